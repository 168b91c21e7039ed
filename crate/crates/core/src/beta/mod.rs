//! β∞, content β numbers and multiscale square sums.

mod plane;

pub use plane::{best_tube, fit_plane, fit_plane_weighted, Plane, SearchOptions};
pub(crate) use plane::{nelder_mead, orthonormalise};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cubes::{cube_ball, CubeForest};
use crate::error::{invalid, Error, Result};
use crate::geometry::Ball;
use crate::pointset::{ContentTree, PointCloud};

/// Ball inflation `A`, exponent `p` and dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    #[serde(rename = "A")]
    pub a: f64,
    pub p: f64,
    pub d: usize,
}

impl BetaParams {
    pub fn new(a: f64, p: f64, d: usize) -> Result<Self> {
        let s = Self { a, p, d };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 1.0) {
            return Err(invalid(format!("A must be at least 1, got {}", self.a)));
        }
        if !(self.p >= 1.0 && self.p < critical_exponent(self.d)) {
            return Err(invalid(format!("p = {} must satisfy 1 <= p < p(d) = {}", self.p, critical_exponent(self.d))));
        }
        if self.d == 0 {
            return Err(invalid("d must be positive"));
        }
        Ok(())
    }
}

/// `p(d) = 2d/(d-2)` for `d > 2`, infinite otherwise.
pub fn critical_exponent(d: usize) -> f64 {
    if d > 2 {
        2.0 * d as f64 / (d as f64 - 2.0)
    } else {
        f64::INFINITY
    }
}

/// Tuning knobs shared by the β computations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaOptions {
    pub search: SearchOptions,
    /// Nelder–Mead evaluations spent refining the content-β plane.
    pub refine_evals: usize,
    /// Threshold cap before the quantile bracket kicks in.
    pub max_thresholds: usize,
}

impl Default for BetaOptions {
    fn default() -> Self {
        Self { search: SearchOptions::default(), refine_evals: 60, max_thresholds: 512 }
    }
}

fn points_in<'a>(cloud: &'a PointCloud, ball: &Ball) -> Result<Vec<&'a [f64]>> {
    if ball.center.len() != cloud.n() {
        return Err(invalid("ball dimension differs from the cloud"));
    }
    let pts: Vec<&[f64]> = cloud.points().filter(|p| ball.contains(p)).collect();
    if pts.is_empty() {
        return Err(Error::EmptyBall);
    }
    Ok(pts)
}

/// Normalised width of the best tube: `(1/r) inf_L sup_{y ∈ E ∩ B} dist(y, L)`.
pub fn beta_inf(cloud: &PointCloud, ball: &Ball, d: usize) -> Result<f64> {
    beta_inf_with(cloud, ball, d, &SearchOptions::default()).map(|(b, _)| b)
}

/// β∞ together with the plane achieving it.
pub fn beta_inf_with(cloud: &PointCloud, ball: &Ball, d: usize, opts: &SearchOptions) -> Result<(f64, Plane)> {
    let pts = points_in(cloud, ball)?;
    let (plane, sup) = best_tube(&pts, d, opts);
    Ok((sup / ball.radius, plane))
}

/// Finest dyadic level of the content grid on a ball, capped at cells of
/// `max(resolution, 2^-20 diam B)`.
fn leaf_level(ball: &Ball, resolution: f64) -> u32 {
    let side = 2.0 * ball.radius;
    let min_cell = resolution.max(side * 2f64.powi(-20));
    (side / min_cell).log2().floor().max(0.0) as u32
}

/// Lower and upper bracket of `β^{d,p}(B, L)`; equal when no quantile cap
/// was needed.
pub fn content_beta_bracket(
    pts: &[&[f64]],
    ball: &Ball,
    plane: &Plane,
    d: usize,
    p: f64,
    resolution: f64,
    max_thresholds: usize,
) -> (f64, f64) {
    let r = ball.radius;
    let mut u: Vec<(f64, usize)> = pts.iter().enumerate().map(|(i, x)| ((plane.dist(x) / r).min(1.0), i)).collect();
    u.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut distinct: Vec<f64> = u.iter().map(|x| x.0).collect();
    distinct.dedup();
    let m = distinct.len();
    let breaks: Vec<f64> = if m <= max_thresholds.max(2) {
        distinct
    } else {
        let k = max_thresholds;
        let mut b: Vec<f64> = (0..k).map(|i| distinct[(i * (m - 1) + (k - 1) / 2) / (k - 1)]).collect();
        b.dedup();
        b
    };
    let corner: Vec<f64> = ball.center.iter().map(|c| c - r).collect();
    let mut tree = ContentTree::new(corner, 2.0 * r, leaf_level(ball, resolution), d);
    // before[j] = content{u > b_j}, after[j] = content{u >= b_j}
    let mut before = vec![0.0; breaks.len()];
    let mut after = vec![0.0; breaks.len()];
    let mut pos = 0;
    for (j, &b) in breaks.iter().enumerate() {
        while pos < u.len() && u[pos].0 > b {
            tree.insert(pts[u[pos].1]);
            pos += 1;
        }
        before[j] = tree.total();
        while pos < u.len() && u[pos].0 >= b {
            tree.insert(pts[u[pos].1]);
            pos += 1;
        }
        after[j] = tree.total();
    }
    let mut lo = 0.0;
    let mut hi = 0.0;
    for j in 0..breaks.len() {
        let next = breaks.get(j + 1).copied().unwrap_or(0.0);
        let w = (breaks[j].powf(p) - next.powf(p)) / p;
        lo += after[j] * w;
        hi += if j + 1 < breaks.len() { before[j + 1] } else { after[j] } * w;
    }
    let norm = r.powi(d as i32);
    ((lo / norm).powf(1.0 / p), (hi / norm).powf(1.0 / p))
}

fn content_beta_mid(pts: &[&[f64]], ball: &Ball, plane: &Plane, d: usize, p: f64, res: f64, cap: usize) -> f64 {
    let (lo, hi) = content_beta_bracket(pts, ball, plane, d, p, res, cap);
    0.5 * (lo + hi)
}

/// Content β number `β^{d,p}(B)` (or `β^{d,p}(B, L)` when a plane is given).
pub fn beta_content(cloud: &PointCloud, ball: &Ball, params: &BetaParams, plane: Option<&Plane>) -> Result<f64> {
    beta_content_with(cloud, ball, params, plane, &BetaOptions::default()).map(|(b, _)| b)
}

pub fn beta_content_with(
    cloud: &PointCloud,
    ball: &Ball,
    params: &BetaParams,
    plane: Option<&Plane>,
    opts: &BetaOptions,
) -> Result<(f64, Option<Plane>)> {
    params.validate()?;
    let pts = points_in(cloud, ball)?;
    let (d, p, res, cap) = (params.d, params.p, cloud.resolution(), opts.max_thresholds);
    if let Some(pl) = plane {
        return Ok((content_beta_mid(&pts, ball, pl, d, p, res, cap), Some(pl.clone())));
    }
    if pts.len() < d + 1 {
        return Ok((0.0, None));
    }
    let n = cloud.n();
    let flat: Vec<f64> = pts.iter().flat_map(|x| x.iter().copied()).collect();
    let pca = fit_plane_weighted(&flat, n, None, d);
    let (tube, _) = best_tube(&pts, d, &opts.search);
    let mut best = (content_beta_mid(&pts, ball, &pca, d, p, res, cap), pca);
    let t = content_beta_mid(&pts, ball, &tube, d, p, res, cap);
    if t < best.0 {
        best = (t, tube);
    }
    if best.0 > 0.0 && opts.refine_evals > 0 {
        let r = ball.radius;
        let make = |x: &[f64]| -> Option<Plane> {
            let rows: Vec<Vec<f64>> = x[..d * n].chunks(n).map(|c| c.to_vec()).collect();
            let frame = orthonormalise(&rows, n, d, false)?;
            let base = ball.center.iter().zip(&x[d * n..]).map(|(c, o)| c + r * o).collect();
            Some(Plane { base, frame })
        };
        let mut x0 = best.1.frame.concat();
        x0.extend(best.1.base.iter().zip(&ball.center).map(|(b, c)| (b - c) / r));
        let (x, fx) = nelder_mead(
            |x| make(x).map_or(f64::INFINITY, |pl| content_beta_mid(&pts, ball, &pl, d, p, res, cap)),
            &x0,
            0.05,
            opts.refine_evals,
        );
        if fx < best.0 {
            if let Some(pl) = make(&x) {
                best = (fx, pl);
            }
        }
    }
    Ok((best.0, Some(best.1)))
}

/// One cube's entry in a β square sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaRecord {
    pub cube_id: usize,
    pub level: u32,
    pub size: f64,
    pub beta: f64,
    pub contribution: f64,
    pub plane: Option<Plane>,
    pub ball: Ball,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaProfile {
    pub params: BetaParams,
    pub root: usize,
    pub root_size: f64,
    pub records: Vec<BetaRecord>,
    pub total: f64,
}

impl BetaProfile {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("cube_id,level,size,beta,contribution\n");
        for r in &self.records {
            s.push_str(&format!("{},{},{},{},{}\n", r.cube_id, r.level, r.size, r.beta, r.contribution));
        }
        s
    }

    pub fn summary(&self) -> Value {
        json!({ "total": self.total, "A": self.params.a, "p": self.params.p, "d": self.params.d })
    }
}

/// β records for the given cubes, computed in parallel and returned in the
/// order of `ids`.
pub fn beta_records(
    forest: &CubeForest,
    cloud: &PointCloud,
    ids: &[usize],
    params: &BetaParams,
    opts: &BetaOptions,
) -> Result<Vec<BetaRecord>> {
    params.validate()?;
    ids.par_iter()
        .map(|&q| {
            let cube = forest.cube(q);
            let ball = cube_ball(cube, params.a)?;
            let (beta, plane) = if cube.members.len() < params.d + 1 {
                (0.0, None)
            } else {
                let mut o = *opts;
                o.search.seed = opts.search.seed ^ (q as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                beta_content_with(cloud, &ball, params, None, &o)?
            };
            let contribution = beta * beta * cube.size.powi(params.d as i32);
            Ok(BetaRecord { cube_id: q, level: cube.level, size: cube.size, beta, contribution, plane, ball })
        })
        .collect::<Vec<Result<BetaRecord>>>()
        .into_iter()
        .collect()
}

/// Builds a profile for `R` from precomputed records (which must include
/// every descendant of `R`).
pub fn profile_from_records(forest: &CubeForest, r: usize, params: &BetaParams, all: &[BetaRecord]) -> BetaProfile {
    let ids = forest.descendants(r);
    let by_id: std::collections::HashMap<usize, &BetaRecord> = all.iter().map(|b| (b.cube_id, b)).collect();
    let records: Vec<BetaRecord> = ids.iter().map(|q| by_id[q].clone()).collect();
    let root_size = forest.cube(r).size;
    let total = root_size.powi(params.d as i32) + records.iter().map(|b| b.contribution).sum::<f64>();
    BetaProfile { params: *params, root: r, root_size, records, total }
}

/// `β_{E,A,p}(R) = ℓ(R)^d + Σ_{Q ⊆ R} β(A B_Q)^2 ℓ(Q)^d`.
pub fn beta_sum(forest: &CubeForest, cloud: &PointCloud, r: usize, params: &BetaParams) -> Result<BetaProfile> {
    beta_sum_with(forest, cloud, r, params, &BetaOptions::default())
}

pub fn beta_sum_with(
    forest: &CubeForest,
    cloud: &PointCloud,
    r: usize,
    params: &BetaParams,
    opts: &BetaOptions,
) -> Result<BetaProfile> {
    if r >= forest.cubes.len() {
        return Err(Error::UnknownCube(r.to_string()));
    }
    let ids = forest.descendants(r);
    let records = beta_records(forest, cloud, &ids, params, opts)?;
    Ok(profile_from_records(forest, r, params, &records))
}
