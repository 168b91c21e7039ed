//! Bilateral gaps between a cloud and planes or unions of planes.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::beta::{best_tube, fit_plane_weighted, Plane, SearchOptions};
use crate::geometry::Ball;
use crate::pointset::PointCloud;
use crate::spatial::KdTree;

const MAX_SAMPLES: f64 = 200_000.0;

/// Grid sample of `P ∩ B` at step `r/64`, coarsened when the grid would
/// exceed a few hundred thousand points.
pub fn plane_sample(plane: &Plane, ball: &Ball) -> Vec<Vec<f64>> {
    let d = plane.dim();
    let off = plane.dist(&ball.center);
    if off > ball.radius {
        return Vec::new();
    }
    let rho = (ball.radius * ball.radius - off * off).max(0.0).sqrt();
    let c = plane.project(&ball.center);
    let t0 = plane.coords(&c);
    let mut step = ball.radius / 64.0;
    if d > 0 && (2.0 * rho / step + 1.0).powi(d as i32) > MAX_SAMPLES {
        step = 2.0 * rho / (MAX_SAMPLES.powf(1.0 / d as f64) - 1.0);
    }
    let k = if d == 0 { 0 } else { (rho / step).floor() as i64 };
    let mut out = Vec::new();
    let mut idx = vec![-k; d];
    loop {
        let t: Vec<f64> = idx.iter().map(|&i| i as f64 * step).collect();
        if t.iter().map(|x| x * x).sum::<f64>() <= rho * rho {
            let u: Vec<f64> = t.iter().zip(&t0).map(|(a, b)| a + b).collect();
            out.push(plane.point_at(&u));
        }
        let mut j = 0;
        while j < d {
            idx[j] += 1;
            if idx[j] <= k {
                break;
            }
            idx[j] = -k;
            j += 1;
        }
        if j == d {
            break;
        }
    }
    for a in 0..d {
        for s in [-1.0, 1.0] {
            let mut u = t0.clone();
            u[a] += s * rho;
            out.push(plane.point_at(&u));
        }
    }
    out
}

/// `d_B(E, ⋃ planes)`; `None` when neither side meets the ball.
pub fn union_gap(cloud: &PointCloud, tree: &KdTree, inside: &[usize], ball: &Ball, planes: &[Plane]) -> Option<f64> {
    let side_e = inside
        .iter()
        .map(|&i| {
            let x = cloud.point(i);
            planes.iter().map(|p| p.dist(x)).fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    let mut any_plane = false;
    let mut side_p: f64 = 0.0;
    for p in planes {
        for y in plane_sample(p, ball) {
            any_plane = true;
            side_p = side_p.max(tree.nearest(&y).map_or(f64::INFINITY, |(_, v)| v));
        }
    }
    if inside.is_empty() && !any_plane {
        return None;
    }
    Some(side_e.max(side_p) / ball.radius)
}

#[derive(Debug, Clone)]
pub struct PlaneFit {
    pub gap: f64,
    pub planes: Vec<Plane>,
}

/// Single-plane candidates shared by BWGL and the `K = 1` BAUP search:
/// the PCA plane and the minimal-tube plane of the in-ball points.
pub fn single_plane_candidates(cloud: &PointCloud, inside: &[usize], d: usize, seed: u64) -> Vec<Plane> {
    let n = cloud.n();
    let pts: Vec<&[f64]> = inside.iter().map(|&i| cloud.point(i)).collect();
    let coords: Vec<f64> = pts.iter().flat_map(|p| p.iter().copied()).collect();
    let pca = fit_plane_weighted(&coords, n, None, d);
    let (tube, _) = best_tube(&pts, d, &SearchOptions { seed, ..SearchOptions::default() });
    vec![pca, tube]
}

pub fn best_single_plane(cloud: &PointCloud, tree: &KdTree, inside: &[usize], ball: &Ball, d: usize, seed: u64) -> PlaneFit {
    let mut best = PlaneFit { gap: f64::INFINITY, planes: Vec::new() };
    for p in single_plane_candidates(cloud, inside, d, seed) {
        let g = union_gap(cloud, tree, inside, ball, std::slice::from_ref(&p)).unwrap_or(0.0);
        if g < best.gap {
            best = PlaneFit { gap: g, planes: vec![p] };
        }
    }
    best
}

fn fit(cloud: &PointCloud, idx: &[usize], d: usize) -> Plane {
    let coords: Vec<f64> = idx.iter().flat_map(|&i| cloud.point(i).iter().copied()).collect();
    fit_plane_weighted(&coords, cloud.n(), None, d)
}

/// k-flats alternation for `k` planes: seeds are local PCA planes around
/// random in-ball points, then points are reassigned to their nearest plane
/// and each plane refitted.
pub fn k_flats(cloud: &PointCloud, inside: &[usize], ball: &Ball, d: usize, k: usize, seed: u64) -> Vec<Vec<Plane>> {
    const ITERATIONS: usize = 10;
    const RESTARTS: usize = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    if inside.len() < k {
        return out;
    }
    let local = KdTree::new(&inside.iter().flat_map(|&i| cloud.point(i).iter().copied()).collect::<Vec<_>>(), cloud.n());
    for _ in 0..RESTARTS {
        let seeds = sample(&mut rng, inside.len(), k).into_vec();
        let mut planes: Vec<Plane> = seeds
            .iter()
            .map(|&s| {
                let mut near = local.within(cloud.point(inside[s]), ball.radius / 4.0);
                if near.len() < d + 1 {
                    near = local.within(cloud.point(inside[s]), ball.radius);
                }
                fit(cloud, &near.iter().map(|&j| inside[j]).collect::<Vec<_>>(), d)
            })
            .collect();
        for _ in 0..ITERATIONS {
            let mut groups = vec![Vec::new(); k];
            for &i in inside {
                let x = cloud.point(i);
                let j = (0..k).min_by(|&a, &b| planes[a].dist(x).total_cmp(&planes[b].dist(x))).unwrap();
                groups[j].push(i);
            }
            let mut changed = false;
            for (j, g) in groups.iter().enumerate() {
                if g.len() > d {
                    let p = fit(cloud, g, d);
                    changed |= p != planes[j];
                    planes[j] = p;
                }
            }
            if !changed {
                break;
            }
        }
        out.push(planes);
    }
    out
}

/// Best union of at most `max_planes` planes; the `K = 1` candidates are the
/// BWGL ones so that a BWGL-good ball is always BAUP-good.
pub fn best_union(
    cloud: &PointCloud,
    tree: &KdTree,
    inside: &[usize],
    ball: &Ball,
    d: usize,
    max_planes: usize,
    seed: u64,
) -> PlaneFit {
    let mut best = best_single_plane(cloud, tree, inside, ball, d, seed);
    for k in 2..=max_planes {
        for planes in k_flats(cloud, inside, ball, d, k, seed.wrapping_add(k as u64)) {
            if let Some(g) = union_gap(cloud, tree, inside, ball, &planes) {
                if g < best.gap {
                    best = PlaneFit { gap: g, planes };
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_cloud(k: usize) -> PointCloud {
        PointCloud::new((0..k).map(|i| vec![-2.0 + 4.0 * i as f64 / (k - 1) as f64, 0.0]).collect(), 2, 1, 4.0 / (k - 1) as f64)
            .unwrap()
    }

    #[test]
    fn plane_sample_covers_the_chord() {
        let p = Plane::new(vec![0.0, 0.5], vec![vec![1.0, 0.0]]).unwrap();
        let b = Ball::new(vec![0.0, 0.0], 1.0).unwrap();
        let s = plane_sample(&p, &b);
        let half = (1.0f64 - 0.25).sqrt();
        assert!(s.iter().all(|x| (x[1] - 0.5).abs() < 1e-12 && x[0].abs() <= half + 1e-12));
        assert!(s.iter().any(|x| (x[0] - half).abs() < 1e-12));
        let far = Plane::new(vec![0.0, 2.0], vec![vec![1.0, 0.0]]).unwrap();
        assert!(plane_sample(&far, &b).is_empty());
    }

    #[test]
    fn line_gap_is_discretisation_only() {
        let c = line_cloud(401);
        let tree = c.kdtree();
        let b = Ball::new(vec![0.0, 0.0], 1.0).unwrap();
        let inside = c.indices_in_ball(&b);
        let fit = best_single_plane(&c, &tree, &inside, &b, 1, 0);
        assert!(fit.gap <= c.resolution(), "{}", fit.gap);
        // an offset plane is at gap = offset / r
        let p = Plane::new(vec![0.0, 0.1], vec![vec![1.0, 0.0]]).unwrap();
        let g = union_gap(&c, &tree, &inside, &b, &[p]).unwrap();
        assert!(g >= 0.1 - 1e-12 && g < 0.1 + 1e-3, "{g}");
    }

    #[test]
    fn two_lines_need_two_planes() {
        let mut pts = Vec::new();
        for i in 0..401 {
            let t = -1.0 + 2.0 * i as f64 / 400.0;
            pts.push(vec![t, 0.0]);
            pts.push(vec![0.0, t]);
        }
        let c = PointCloud::new(pts, 2, 1, 0.005).unwrap();
        let tree = c.kdtree();
        let b = Ball::new(vec![0.0, 0.0], 0.8).unwrap();
        let inside = c.indices_in_ball(&b);
        let one = best_single_plane(&c, &tree, &inside, &b, 1, 0);
        let two = best_union(&c, &tree, &inside, &b, 1, 2, 0);
        assert!(one.gap > 0.5);
        assert!(two.gap < 0.02, "{}", two.gap);
        assert_eq!(two.planes.len(), 2);
    }
}
