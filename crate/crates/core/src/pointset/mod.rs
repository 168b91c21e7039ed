//! Point clouds, the normalised Hausdorff gap, dyadic content and the
//! lower-regularity audit.

mod content;
mod io;

pub use content::{dyadic_content, lower_regularity_scan, ContentTree, RegularityReport, Witness};
pub(crate) use content::content_of_points;
pub use io::{load_cloud, load_weighted_cloud, read_header, save_cloud, CloudHeader};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::Ball;
use crate::spatial::KdTree;

const DUP_TOL: f64 = 1e-12;

/// A finite sample of a set in `R^n` with target dimension `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    coords: Vec<f64>,
    n: usize,
    d: usize,
    resolution: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
}

impl PointCloud {
    /// Builds a cloud from row vectors, dropping later duplicates.
    pub fn new(points: Vec<Vec<f64>>, n: usize, d: usize, resolution: f64) -> Result<Self> {
        if !(1 <= d && d < n) {
            return Err(invalid(format!("target dimension must satisfy 1 <= d < n, got d={d}, n={n}")));
        }
        let mut flat = Vec::with_capacity(points.len() * n);
        for (i, p) in points.iter().enumerate() {
            if p.len() != n {
                return Err(invalid(format!("point {i} has {} coordinates, expected {n}", p.len())));
            }
            flat.extend_from_slice(p);
        }
        Self::from_flat(flat, n, d, resolution)
    }

    /// Builds a cloud from a flat row-major coordinate array.
    pub fn from_flat(coords: Vec<f64>, n: usize, d: usize, resolution: f64) -> Result<Self> {
        if !(1 <= d && d < n) {
            return Err(invalid(format!("target dimension must satisfy 1 <= d < n, got d={d}, n={n}")));
        }
        Self::build(coords, None, n, d, resolution)
    }

    /// Weighted cloud used for skeleton samples; `d` may equal 0 or `n`, and
    /// duplicate samples merge by adding their weights.
    pub(crate) fn weighted(coords: Vec<f64>, weights: Vec<f64>, n: usize, d: usize, resolution: f64) -> Result<Self> {
        if d > n {
            return Err(invalid(format!("skeleton dimension {d} exceeds ambient dimension {n}")));
        }
        Self::build(coords, Some(weights), n, d, resolution)
    }

    fn build(coords: Vec<f64>, weights: Option<Vec<f64>>, n: usize, d: usize, resolution: f64) -> Result<Self> {
        if n == 0 || coords.len() % n != 0 {
            return Err(invalid("coordinate array length is not a multiple of n"));
        }
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(invalid(format!("resolution must be positive, got {resolution}")));
        }
        if coords.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("coordinates must be finite"));
        }
        let len = coords.len() / n;
        let (keep, merged) = dedup(&coords, n, weights.as_deref());
        let mut out = Vec::with_capacity(keep.len() * n);
        for &i in &keep {
            out.extend_from_slice(&coords[i * n..(i + 1) * n]);
        }
        if keep.len() < len {
            log::debug!("dropped {} duplicate points", len - keep.len());
        }
        Ok(Self { coords: out, n, d, resolution, weights: merged })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.n..(i + 1) * self.n]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.n)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// Weight of point `i`; 1 for unweighted clouds.
    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    pub fn total_weight(&self) -> f64 {
        match &self.weights {
            Some(w) => w.iter().sum(),
            None => self.len() as f64,
        }
    }

    /// Copy with a different declared resolution.
    pub fn with_resolution(&self, resolution: f64) -> Result<Self> {
        if !(resolution > 0.0) {
            return Err(invalid("resolution must be positive"));
        }
        Ok(Self { resolution, ..self.clone() })
    }

    /// Sub-cloud of the given point indices (kept in the given order).
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        if idx.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut coords = Vec::with_capacity(idx.len() * self.n);
        for &i in idx {
            coords.extend_from_slice(self.point(i));
        }
        let weights = self.weights.as_ref().map(|w| idx.iter().map(|&i| w[i]).collect());
        Ok(Self { coords, n: self.n, d: self.d, resolution: self.resolution, weights })
    }

    /// Applies `f` to every point; the result is re-deduplicated.
    pub fn map_points(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>, resolution: f64) -> Result<Self> {
        let mut coords = Vec::with_capacity(self.coords.len());
        for p in self.points() {
            let q = f(p);
            if q.len() != self.n {
                return Err(invalid("mapped point has wrong dimension"));
            }
            coords.extend(q);
        }
        Self::build(coords, self.weights.clone(), self.n, self.d, resolution)
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bbox(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.n];
        let mut hi = vec![f64::NEG_INFINITY; self.n];
        for p in self.points() {
            for k in 0..self.n {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    pub fn kdtree(&self) -> KdTree {
        KdTree::new(&self.coords, self.n)
    }

    /// Exact diameter, computed with farthest-point queries.
    pub fn diameter(&self) -> f64 {
        self.diameter_with(&self.kdtree())
    }

    pub fn diameter_with(&self, tree: &KdTree) -> f64 {
        use rayon::prelude::*;
        (0..self.len())
            .into_par_iter()
            .map(|i| tree.farthest_distance(self.point(i)))
            .collect::<Vec<_>>()
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// Indices of points inside the closed ball, ascending.
    pub fn indices_in_ball(&self, ball: &Ball) -> Vec<usize> {
        (0..self.len()).filter(|&i| ball.contains(self.point(i))).collect()
    }
}

/// Returns kept indices (first occurrence) and merged weights.
fn dedup(coords: &[f64], n: usize, weights: Option<&[f64]>) -> (Vec<usize>, Option<Vec<f64>>) {
    let len = coords.len() / n;
    let mut order: Vec<usize> = (0..len).collect();
    order.sort_by(|&a, &b| coords[a * n].total_cmp(&coords[b * n]).then(a.cmp(&b)));
    let xs: Vec<f64> = order.iter().map(|&i| coords[i * n]).collect();
    let mut rep: Vec<usize> = (0..len).collect();
    for i in 0..len {
        let pi = &coords[i * n..(i + 1) * n];
        let from = xs.partition_point(|&x| x < pi[0] - DUP_TOL);
        let to = xs.partition_point(|&x| x <= pi[0] + DUP_TOL);
        let hit = order[from..to]
            .iter()
            .copied()
            .filter(|&j| j < i && rep[j] == j)
            .filter(|&j| pi.iter().zip(&coords[j * n..(j + 1) * n]).all(|(a, b)| (a - b).abs() <= DUP_TOL))
            .min();
        if let Some(j) = hit {
            rep[i] = j;
        }
    }
    let keep: Vec<usize> = (0..len).filter(|&i| rep[i] == i).collect();
    let merged = weights.map(|w| {
        let mut acc = vec![0.0; len];
        for i in 0..len {
            acc[rep[i]] += w[i];
        }
        keep.iter().map(|&i| acc[i]).collect()
    });
    (keep, merged)
}

/// Normalised bilateral gap `d_B(A, B)` restricted to `ball`, with `diam B = 2r`.
pub fn hausdorff_gap(a: &PointCloud, b: &PointCloud, ball: &Ball) -> Result<f64> {
    if a.n() != b.n() || a.n() != ball.center.len() {
        return Err(invalid("clouds and ball must share the ambient dimension"));
    }
    let ia = a.indices_in_ball(ball);
    let ib = b.indices_in_ball(ball);
    if ia.is_empty() && ib.is_empty() {
        return Err(Error::GapUndefined);
    }
    let one_sided = |from: &PointCloud, idx: &[usize], to: &PointCloud| -> f64 {
        if idx.is_empty() {
            return 0.0;
        }
        let tree = to.kdtree();
        idx.iter().map(|&i| tree.nearest(from.point(i)).map_or(0.0, |(_, d)| d)).fold(0.0, f64::max)
    };
    let s = one_sided(a, &ia, b).max(one_sided(b, &ib, a));
    Ok(s / ball.radius)
}

/// Sup distance from the ball-restricted part of `a` to all of `b`, brute force.
#[cfg(test)]
pub(crate) fn brute_one_sided(a: &PointCloud, b: &PointCloud, ball: &Ball) -> f64 {
    a.points()
        .filter(|p| ball.contains(p))
        .map(|p| b.points().map(|q| crate::geometry::dist(p, q)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}
