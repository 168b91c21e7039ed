//! Affine d-planes, PCA fitting and the min-max tube search.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub base: Vec<f64>,
    pub frame: Vec<Vec<f64>>,
}

impl Plane {
    pub fn new(base: Vec<f64>, frame: Vec<Vec<f64>>) -> Result<Self> {
        let n = base.len();
        for (i, u) in frame.iter().enumerate() {
            if u.len() != n {
                return Err(invalid("frame vector has wrong dimension"));
            }
            for (j, v) in frame.iter().enumerate().take(i + 1) {
                let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > 1e-9 {
                    return Err(invalid("frame is not orthonormal"));
                }
            }
        }
        Ok(Self { base, frame })
    }

    pub fn dim(&self) -> usize {
        self.frame.len()
    }

    pub fn ambient(&self) -> usize {
        self.base.len()
    }

    /// Coordinates of the projection of `x` in the frame.
    pub fn coords(&self, x: &[f64]) -> Vec<f64> {
        self.frame.iter().map(|u| u.iter().zip(x).zip(&self.base).map(|((a, xi), b)| a * (xi - b)).sum()).collect()
    }

    pub fn point_at(&self, t: &[f64]) -> Vec<f64> {
        let mut p = self.base.clone();
        for (u, &s) in self.frame.iter().zip(t) {
            for (pk, uk) in p.iter_mut().zip(u) {
                *pk += s * uk;
            }
        }
        p
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.point_at(&self.coords(x))
    }

    pub fn dist(&self, x: &[f64]) -> f64 {
        let t = self.coords(x);
        let r2: f64 = x.iter().zip(&self.base).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            - t.iter().map(|v| v * v).sum::<f64>();
        if r2 > 1e-8 * x.iter().zip(&self.base).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() {
            return r2.sqrt();
        }
        // cancellation-prone regime: compute the residual explicitly
        crate::geometry::dist(x, &self.point_at(&t))
    }
}

/// Normalises so the first component with magnitude above `1e-12` is positive.
fn sign_normalise(v: &mut [f64]) {
    if let Some(&first) = v.iter().find(|x| x.abs() > 1e-12) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Gram–Schmidt on `rows`, completing from the standard basis up to `d`
/// vectors. Returns `None` if a row is (numerically) dependent and
/// `complete` is false.
pub(crate) fn orthonormalise(rows: &[Vec<f64>], n: usize, d: usize, complete: bool) -> Option<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(d);
    let push = |v: &[f64], out: &mut Vec<Vec<f64>>| -> bool {
        let mut w = v.to_vec();
        for _ in 0..2 {
            for u in out.iter() {
                let dot: f64 = w.iter().zip(u).map(|(a, b)| a * b).sum();
                w.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= 1e-9 * scale.max(1e-300) || norm == 0.0 {
            return false;
        }
        w.iter_mut().for_each(|x| *x /= norm);
        out.push(w);
        true
    };
    for r in rows.iter().take(d) {
        if !push(r, &mut out) && !complete {
            return None;
        }
    }
    let mut k = 0;
    while out.len() < d && k < n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        push(&e, &mut out);
        k += 1;
    }
    Some(out)
}

/// PCA plane of weighted points (flat row-major `coords`).
pub fn fit_plane_weighted(coords: &[f64], n: usize, weights: Option<&[f64]>, d: usize) -> Plane {
    let len = coords.len() / n;
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let wsum: f64 = (0..len).map(w).sum();
    let mut base = vec![0.0; n];
    for i in 0..len {
        for k in 0..n {
            base[k] += w(i) * coords[i * n + k];
        }
    }
    base.iter_mut().for_each(|b| *b /= wsum);
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..len {
        let p = &coords[i * n..(i + 1) * n];
        for a in 0..n {
            for b in a..n {
                m[(a, b)] += w(i) * (p[a] - base[a]) * (p[b] - base[b]);
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            m[(a, b)] = m[(b, a)];
        }
    }
    let eig = SymmetricEigen::new(m);
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|j| {
            let mut v: Vec<f64> = eig.eigenvectors.column(j).iter().cloned().collect();
            sign_normalise(&mut v);
            (eig.eigenvalues[j], v)
        })
        .filter(|(l, _)| *l > 1e-12 * top && *l > 0.0)
        .collect();
    pairs.sort_by(|a, b| {
        b.0.total_cmp(&a.0).then_with(|| {
            // lexicographic tie-break on the normalised vectors
            b.1.iter().zip(&a.1).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let rows: Vec<Vec<f64>> = pairs.into_iter().map(|(_, v)| v).take(d).collect();
    let mut frame = orthonormalise(&rows, n, d, true).expect("completion always succeeds");
    frame.iter_mut().for_each(|v| sign_normalise(v));
    Plane { base, frame }
}

/// PCA plane of the cloud.
pub fn fit_plane(cloud: &crate::pointset::PointCloud, d: usize) -> Plane {
    fit_plane_weighted(cloud.coords(), cloud.n(), cloud.weights(), d)
}

/// Best base for a fixed frame and the resulting sup distance.
pub(crate) fn tube_for_frame(pts: &[&[f64]], frame: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let n = pts[0].len();
    let resid = |x: &[f64]| -> Vec<f64> {
        let mut r = x.to_vec();
        for u in frame {
            let dot: f64 = u.iter().zip(x).map(|(a, b)| a * b).sum();
            r.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
        }
        r
    };
    let codim = n - frame.len();
    if codim == 0 {
        return (pts[0].to_vec(), 0.0);
    }
    let res: Vec<Vec<f64>> = pts.iter().map(|x| resid(x)).collect();
    let center = if codim == 1 {
        let normal = {
            let mut best = vec![0.0; n];
            let mut bn = -1.0;
            for k in 0..n {
                let mut e = vec![0.0; n];
                e[k] = 1.0;
                let r = resid(&e);
                let nr = r.iter().map(|x| x * x).sum::<f64>();
                if nr > bn {
                    bn = nr;
                    best = r;
                }
            }
            let s = bn.sqrt();
            best.iter().map(|x| x / s).collect::<Vec<f64>>()
        };
        let proj: Vec<f64> = res.iter().map(|r| r.iter().zip(&normal).map(|(a, b)| a * b).sum()).collect();
        let lo = proj.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = proj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        normal.iter().map(|v| v * 0.5 * (lo + hi)).collect::<Vec<f64>>()
    } else {
        // Badoiu–Clarkson core-set iterations for the enclosing ball
        let mut c = res[0].clone();
        for t in 1..=200 {
            let far = res
                .iter()
                .max_by(|a, b| crate::geometry::dist_sq(a, &c).total_cmp(&crate::geometry::dist_sq(b, &c)))
                .unwrap();
            let step = 1.0 / (t as f64 + 1.0);
            for (ck, fk) in c.iter_mut().zip(far) {
                *ck += step * (fk - *ck);
            }
        }
        c
    };
    let sup = res.iter().map(|r| crate::geometry::dist(r, &center)).fold(0.0, f64::max);
    (center, sup)
}

/// Convex hull (counter-clockwise, no collinear points) of planar points.
pub(crate) fn hull2d(pts: &[&[f64]]) -> Vec<[f64; 2]> {
    let mut p: Vec<[f64; 2]> = pts.iter().map(|x| [x[0], x[1]]).collect();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut h: Vec<[f64; 2]> = Vec::with_capacity(2 * p.len());
    for &q in &p {
        while h.len() >= 2 && cross(h[h.len() - 2], h[h.len() - 1], q) <= 0.0 {
            h.pop();
        }
        h.push(q);
    }
    let lower = h.len() + 1;
    for &q in p.iter().rev().skip(1) {
        while h.len() >= lower && cross(h[h.len() - 2], h[h.len() - 1], q) <= 0.0 {
            h.pop();
        }
        h.push(q);
    }
    h.pop();
    h
}

/// Exact minimum-width strip of planar points via rotating calipers.
/// Returns the mid-line and the half-width.
pub(crate) fn min_strip2d(pts: &[&[f64]]) -> (Plane, f64) {
    let h = hull2d(pts);
    if h.len() == 1 {
        return (Plane { base: h[0].to_vec(), frame: vec![vec![1.0, 0.0]] }, 0.0);
    }
    if h.len() == 2 {
        let (a, b) = (h[0], h[1]);
        let l = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let mut u = vec![(b[0] - a[0]) / l, (b[1] - a[1]) / l];
        sign_normalise(&mut u);
        return (Plane { base: a.to_vec(), frame: vec![u] }, 0.0);
    }
    let m = h.len();
    let height = |i: usize, j: usize| {
        let (a, b, c) = (h[i], h[(i + 1) % m], h[j]);
        let l = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])) / l
    };
    let mut best = (f64::INFINITY, 0usize, 0usize);
    let mut j = 1usize;
    for i in 0..m {
        if j == i {
            j = (j + 1) % m;
        }
        while height(i, (j + 1) % m) >= height(i, j) && (j + 1) % m != i {
            j = (j + 1) % m;
        }
        let w = height(i, j);
        if w < best.0 {
            best = (w, i, j);
        }
    }
    let (w, i, _) = best;
    let (a, b) = (h[i], h[(i + 1) % m]);
    let l = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    let mut u = vec![(b[0] - a[0]) / l, (b[1] - a[1]) / l];
    let nrm = [-u[1], u[0]];
    let base = vec![a[0] + nrm[0] * w / 2.0, a[1] + nrm[1] * w / 2.0];
    sign_normalise(&mut u);
    (Plane { base, frame: vec![u] }, w / 2.0)
}

/// Nelder–Mead minimisation with a fixed evaluation budget.
pub(crate) fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], step: f64, max_evals: usize) -> (Vec<f64>, f64) {
    let dim = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let f0 = f(x0);
    simplex.push((x0.to_vec(), f0));
    for k in 0..dim {
        let mut x = x0.to_vec();
        x[k] += step;
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let mut evals = dim + 1;
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[dim].1 - simplex[0].1;
        if spread.abs() <= 1e-15 * simplex[0].1.abs().max(1e-300) && evals > 4 * (dim + 1) {
            break;
        }
        let centroid: Vec<f64> =
            (0..dim).map(|k| simplex[..dim].iter().map(|s| s.0[k]).sum::<f64>() / dim as f64).collect();
        let worst = simplex[dim].clone();
        let along = |t: f64| -> Vec<f64> { (0..dim).map(|k| centroid[k] + t * (worst.0[k] - centroid[k])).collect() };
        let xr = along(-1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe);
            evals += 1;
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            };
            evals += 1;
            if fc < worst.1.min(fr) {
                simplex[dim] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    for k in 0..dim {
                        s.0[k] = best[k] + 0.5 * (s.0[k] - best[k]);
                    }
                    s.1 = f(&s.0);
                    evals += 1;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// Search budget for the min-max plane search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub seed: u64,
    pub restarts: usize,
    pub evals_per_dim: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { seed: 0, restarts: 50, evals_per_dim: 40 }
    }
}

/// Plane minimising the sup distance of `pts`, with that sup distance.
/// Exact for lines in the plane; otherwise PCA plus Nelder–Mead restarts,
/// which yields an upper bound.
pub fn best_tube(pts: &[&[f64]], d: usize, opts: &SearchOptions) -> (Plane, f64) {
    let n = pts[0].len();
    if pts.len() <= d + 1 && pts.len() <= n {
        // an affine d-plane passes through any d+1 points
        let base = pts[0].to_vec();
        let rows: Vec<Vec<f64>> = pts[1..].iter().map(|p| p.iter().zip(&base).map(|(a, b)| a - b).collect()).collect();
        let frame = orthonormalise(&rows, n, d, true).unwrap();
        let plane = Plane { base, frame };
        let sup = pts.iter().map(|p| plane.dist(p)).fold(0.0, f64::max);
        return (plane, sup);
    }
    if n == 2 && d == 1 {
        return min_strip2d(pts);
    }
    let flat: Vec<f64> = pts.iter().flat_map(|p| p.iter().copied()).collect();
    let pca = fit_plane_weighted(&flat, n, None, d);
    let objective = |params: &[f64]| -> f64 {
        let rows: Vec<Vec<f64>> = params.chunks(n).map(|c| c.to_vec()).collect();
        match orthonormalise(&rows, n, d, false) {
            Some(frame) => tube_for_frame(pts, &frame).1,
            None => f64::INFINITY,
        }
    };
    let budget = opts.evals_per_dim * d * n;
    let mut starts: Vec<Vec<f64>> = vec![pca.frame.concat()];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.restarts {
        starts.push((0..d * n).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in starts {
        let (x, fx) = nelder_mead(objective, &s, 0.2, budget);
        if best.as_ref().is_none_or(|b| fx < b.1) {
            best = Some((x, fx));
        }
        if best.as_ref().is_some_and(|b| b.1 == 0.0) {
            break;
        }
    }
    let (x, _) = best.unwrap();
    let rows: Vec<Vec<f64>> = x.chunks(n).map(|c| c.to_vec()).collect();
    let mut frame = orthonormalise(&rows, n, d, true).unwrap();
    frame.iter_mut().for_each(|v| sign_normalise(v));
    let (center, _) = tube_for_frame(pts, &frame);
    let plane = Plane { base: center, frame };
    let sup = pts.iter().map(|p| plane.dist(p)).fold(0.0, f64::max);
    (plane, sup)
}
