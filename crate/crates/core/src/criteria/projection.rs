//! Projection content for the big-projection criterion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::beta::{fit_plane_weighted, orthonormalise, Plane};
use crate::geometry::pow2_at_least;
use crate::pointset::content_of_points;

pub const RANDOM_PLANES: usize = 20;

/// Dyadic `d`-content of `Π_P(points)` in the plane's coordinates, with
/// cells no smaller than `min_cell`.
pub fn projection_content(plane: &Plane, pts: &[&[f64]], min_cell: f64) -> f64 {
    let d = plane.dim();
    if pts.is_empty() {
        return 0.0;
    }
    let proj: Vec<Vec<f64>> = pts.iter().map(|p| plane.coords(p)).collect();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for t in &proj {
        for k in 0..d {
            lo[k] = lo[k].min(t[k]);
            hi[k] = hi[k].max(t[k]);
        }
    }
    let extent = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
    let side = pow2_at_least(extent.max(min_cell));
    let leaf = (side / min_cell).log2().round().max(0.0) as u32;
    content_of_points(proj.iter().map(|t| t.as_slice()), &lo, side, leaf, d)
}

/// Candidate planes through the origin: the PCA plane of `pts` followed by
/// `RANDOM_PLANES` seeded random ones.
pub fn candidate_planes(pts: &[&[f64]], n: usize, d: usize, seed: u64) -> Vec<Plane> {
    let mut out = Vec::with_capacity(RANDOM_PLANES + 1);
    let coords: Vec<f64> = pts.iter().flat_map(|p| p.iter().copied()).collect();
    if !pts.is_empty() {
        let pca = fit_plane_weighted(&coords, n, None, d);
        out.push(Plane::new(vec![0.0; n], pca.frame).expect("orthonormal frame"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < RANDOM_PLANES + 1 {
        let rows: Vec<Vec<f64>> = (0..d).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        if let Some(frame) = orthonormalise(&rows, n, d, false) {
            out.push(Plane::new(vec![0.0; n], frame).expect("orthonormal frame"));
        }
    }
    out
}
