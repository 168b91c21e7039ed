use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::pow2_at_least;
use crate::pointset::PointCloud;

/// A dyadic cube `[coords * s, (coords + 1) * s)` with `s = side * 2^-level`
/// relative to a [`DyadicGrid`]. Levels may be negative for cubes coarser
/// than the grid root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    pub level: i32,
    pub coords: Vec<i64>,
}

impl DyadicCube {
    pub fn root(n: usize) -> Self {
        Self { level: 0, coords: vec![0; n] }
    }

    pub fn parent(&self) -> Self {
        Self { level: self.level - 1, coords: self.coords.iter().map(|&c| c >> 1).collect() }
    }

    pub fn children(&self) -> Vec<Self> {
        let n = self.coords.len();
        (0..1u32 << n)
            .map(|mask| Self {
                level: self.level + 1,
                coords: self.coords.iter().enumerate().map(|(k, &c)| 2 * c + (mask >> k & 1) as i64).collect(),
            })
            .collect()
    }

    /// Ancestor at `level` (which must not exceed `self.level`).
    pub fn ancestor(&self, level: i32) -> Self {
        let shift = (self.level - level) as u32;
        Self { level, coords: self.coords.iter().map(|&c| c >> shift).collect() }
    }

    /// `true` when `other ⊆ self`.
    pub fn contains(&self, other: &DyadicCube) -> bool {
        other.level >= self.level && other.ancestor(self.level) == *self
    }
}

/// Placement of the dyadic lattice: the level-0 cube is `corner + [0, side]^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicGrid {
    pub corner: Vec<f64>,
    pub side: f64,
}

impl DyadicGrid {
    /// Smallest power-of-two cube cornered at the bounding-box minimum.
    pub fn bounding(cloud: &PointCloud) -> Self {
        let (lo, hi) = cloud.bbox();
        let extent = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
        Self { corner: lo, side: pow2_at_least(extent.max(cloud.resolution())) }
    }

    pub fn n(&self) -> usize {
        self.corner.len()
    }

    pub fn side_at(&self, level: i32) -> f64 {
        self.side * 2f64.powi(-level)
    }

    /// Cube of `level` containing `p`; points on the root's top faces are
    /// clamped into the root.
    pub fn locate(&self, p: &[f64], level: i32) -> DyadicCube {
        let s = self.side_at(level);
        let cells = if level >= 0 { 1i64 << level } else { 1 };
        let coords = p
            .iter()
            .zip(&self.corner)
            .map(|(&x, &c)| {
                let t = ((x - c) / s).floor() as i64;
                if level >= 0 && x - c <= self.side && t == cells {
                    cells - 1
                } else {
                    t
                }
            })
            .collect();
        DyadicCube { level, coords }
    }

    /// Closed box `(lo, hi)` of a cube.
    pub fn bounds(&self, cube: &DyadicCube) -> (Vec<f64>, Vec<f64>) {
        let s = self.side_at(cube.level);
        let lo: Vec<f64> = cube.coords.iter().zip(&self.corner).map(|(&k, &c)| c + k as f64 * s).collect();
        let hi = lo.iter().map(|x| x + s).collect();
        (lo, hi)
    }

    pub fn center(&self, cube: &DyadicCube) -> Vec<f64> {
        let (lo, hi) = self.bounds(cube);
        lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

/// Occupied dyadic cubes of a cloud at levels `0..=max_level`.
#[derive(Debug, Clone)]
pub struct DyadicIndex {
    pub grid: DyadicGrid,
    pub max_level: u32,
    occupancy: Vec<BTreeMap<Vec<i64>, Vec<usize>>>,
}

impl DyadicIndex {
    pub fn occupied(&self, level: u32) -> &BTreeMap<Vec<i64>, Vec<usize>> {
        &self.occupancy[level as usize]
    }

    pub fn members(&self, cube: &DyadicCube) -> Option<&[usize]> {
        if cube.level < 0 || cube.level as u32 > self.max_level {
            return None;
        }
        self.occupancy[cube.level as usize].get(&cube.coords).map(|v| v.as_slice())
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }
}

pub fn build_dyadic_index(cloud: &PointCloud, max_level: u32) -> Result<DyadicIndex> {
    let grid = DyadicGrid::bounding(cloud);
    build_index_on(cloud, grid, max_level)
}

pub(crate) fn build_index_on(cloud: &PointCloud, grid: DyadicGrid, max_level: u32) -> Result<DyadicIndex> {
    if max_level > 40 {
        return Err(invalid(format!("max_level {max_level} is too deep")));
    }
    if grid.side_at(max_level as i32) < cloud.resolution() / 4.0 {
        return Err(invalid(format!(
            "level {max_level} cells (side {}) are finer than a quarter of the resolution {}",
            grid.side_at(max_level as i32),
            cloud.resolution()
        )));
    }
    let mut leaves: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
    for (i, p) in cloud.points().enumerate() {
        leaves.entry(grid.locate(p, max_level as i32).coords).or_default().push(i);
    }
    let mut occupancy = vec![leaves];
    for _ in 0..max_level {
        let finer = occupancy.last().unwrap();
        let mut coarser: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
        for (c, pts) in finer {
            coarser.entry(c.iter().map(|&x| x >> 1).collect()).or_default().extend_from_slice(pts);
        }
        for v in coarser.values_mut() {
            v.sort_unstable();
        }
        occupancy.push(coarser);
    }
    occupancy.reverse();
    Ok(DyadicIndex { grid, max_level, occupancy })
}

/// Cell-centre samples of the `d`-faces of the box `lo + [0, side]^n`;
/// returns flat coordinates and per-sample weights summing to
/// `C(n,d) 2^(n-d) side^d`.
pub fn skeleton_of_box(lo: &[f64], side: f64, d: usize, spacing: f64) -> (Vec<f64>, Vec<f64>) {
    let n = lo.len();
    let k = if d == 0 { 1 } else { (side / spacing).ceil().max(1.0) as usize };
    let h = side / k as f64;
    let w = h.powi(d as i32);
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for free in 0u32..1 << n {
        if free.count_ones() as usize != d {
            continue;
        }
        let free_axes: Vec<usize> = (0..n).filter(|&a| free >> a & 1 == 1).collect();
        let fixed_axes: Vec<usize> = (0..n).filter(|&a| free >> a & 1 == 0).collect();
        for corner in 0u32..1 << fixed_axes.len() {
            let mut base = lo.to_vec();
            for (j, &a) in fixed_axes.iter().enumerate() {
                if corner >> j & 1 == 1 {
                    base[a] += side;
                }
            }
            let total = k.pow(d as u32);
            for t in 0..total {
                let mut p = base.clone();
                let mut rem = t;
                for &a in &free_axes {
                    p[a] += (rem % k) as f64 * h + 0.5 * h;
                    rem /= k;
                }
                coords.extend(p);
                weights.push(w);
            }
        }
    }
    (coords, weights)
}

/// Weighted sample of the `d`-skeleton of one dyadic cube.
pub fn skeleton_points(grid: &DyadicGrid, cube: &DyadicCube, d: usize, spacing: f64) -> Result<PointCloud> {
    let n = grid.n();
    if d > n {
        return Err(invalid(format!("skeleton dimension {d} exceeds ambient dimension {n}")));
    }
    let side = grid.side_at(cube.level);
    if !(spacing > 0.0) || spacing > side / 2.0 {
        return Err(invalid(format!("spacing {spacing} must lie in (0, side/2 = {}]", side / 2.0)));
    }
    let (lo, _) = grid.bounds(cube);
    let (coords, weights) = skeleton_of_box(&lo, side, d, spacing);
    PointCloud::weighted(coords, weights, n, d, spacing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::binomial;

    fn unit_grid(n: usize) -> DyadicGrid {
        DyadicGrid { corner: vec![0.0; n], side: 1.0 }
    }

    #[test]
    fn two_point_index() {
        let c = PointCloud::new(vec![vec![0.0, 0.0], vec![1.0, 0.0]], 2, 1, 0.01).unwrap();
        let idx = build_dyadic_index(&c, 1).unwrap();
        assert_eq!(idx.grid.side, 1.0);
        assert_eq!(idx.occupied(1).len(), 2);
        assert_eq!(idx.occupied(0).len(), 1);
    }

    #[test]
    fn single_point_one_cell_per_level() {
        let c = PointCloud::new(vec![vec![0.2, 0.4]], 2, 1, 0.001).unwrap();
        let idx = build_dyadic_index(&c, 2).unwrap();
        for k in 0..=2 {
            assert_eq!(idx.occupied(k).len(), 1);
        }
    }

    #[test]
    fn cantor_occupancy_counts() {
        let mut pts = vec![vec![0.0, 0.0]];
        for g in 1..=3 {
            let s = 0.75 * 0.25f64.powi(g - 1);
            pts = pts.iter().flat_map(|p| [[0.0, 0.0], [s, 0.0], [0.0, s], [s, s]].map(|o| vec![p[0] + o[0], p[1] + o[1]])).collect();
        }
        let c = PointCloud::new(pts, 2, 1, 1.0 / 64.0).unwrap();
        let idx = build_dyadic_index(&c, 3).unwrap();
        assert_eq!(idx.grid.side, 1.0);
        assert_eq!(idx.occupied(0).len(), 1);
        assert_eq!(idx.occupied(2).len(), 4);
        assert_eq!(idx.occupied(3).len(), 16);
        // occupancy at level k+1 refines level k
        for k in 0..3 {
            for (coords, pts) in idx.occupied(k + 1) {
                let parent: Vec<i64> = coords.iter().map(|x| x >> 1).collect();
                let up = &idx.occupied(k)[&parent];
                assert!(pts.iter().all(|p| up.contains(p)));
            }
        }
    }

    #[test]
    fn index_rejects_too_fine_levels() {
        let c = PointCloud::new(vec![vec![0.0, 0.0], vec![1.0, 0.0]], 2, 1, 0.1).unwrap();
        assert!(build_dyadic_index(&c, 6).is_err());
    }

    #[test]
    fn skeleton_weights() {
        let g = unit_grid(2);
        let sq = DyadicCube::root(2);
        let s = skeleton_points(&g, &sq, 1, 0.1).unwrap();
        assert!((s.total_weight() - 4.0).abs() < 1e-12);
        let v = skeleton_points(&g, &sq, 0, 0.5).unwrap();
        assert_eq!(v.len(), 4);
        assert!((v.total_weight() - 4.0).abs() < 1e-12);
        let cube = skeleton_points(&unit_grid(3), &DyadicCube::root(3), 1, 0.25).unwrap();
        assert!((cube.total_weight() - 12.0).abs() < 1e-12);
        assert!(skeleton_points(&g, &sq, 3, 0.1).is_err());
    }

    #[test]
    fn skeleton_samples_lie_on_faces() {
        for n in 2..=3 {
            for d in 0..=n {
                let (coords, w) = skeleton_of_box(&vec![0.0; n], 2.0, d, 0.5);
                let total: f64 = w.iter().sum();
                let expect = (binomial(n, d) << (n - d)) as f64 * 2f64.powi(d as i32);
                assert!((total - expect).abs() < 1e-9);
                for p in coords.chunks(n) {
                    let on_boundary = p.iter().filter(|&&x| x == 0.0 || x == 2.0).count();
                    assert!(on_boundary >= n - d);
                }
            }
        }
    }

    #[test]
    fn cube_relations() {
        let c = DyadicCube { level: 3, coords: vec![5, 2] };
        assert_eq!(c.parent(), DyadicCube { level: 2, coords: vec![2, 1] });
        assert!(c.parent().contains(&c));
        assert!(!c.contains(&c.parent()));
        assert!(c.children().iter().all(|k| c.contains(k) && k.parent() == c));
        let g = unit_grid(2);
        assert_eq!(g.locate(&[1.0, 1.0], 2), DyadicCube { level: 2, coords: vec![3, 3] });
    }
}
