use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::cubes::{skeleton_of_box, CubeForest, DyadicCube, DyadicGrid};
use crate::error::{invalid, Error, Result};
use crate::geometry::{box_box_dist, point_box_dist};
use crate::pointset::PointCloud;
use crate::spatial::KdTree;

/// `d_F(x) = min_{Q ∈ F} ℓ(Q) + dist(x, Q)`, with `dist(x, Q)` measured to
/// the member points of `Q`.
#[derive(Debug, Clone)]
pub struct SmoothingDistance {
    tree: KdTree,
}

impl SmoothingDistance {
    pub fn new(forest: &CubeForest, cloud: &PointCloud, f: &[usize]) -> Result<Self> {
        if f.is_empty() {
            return Err(invalid("the family of minimal cubes is empty"));
        }
        let mut offset: HashMap<usize, f64> = HashMap::new();
        for &q in f {
            let cube = forest.cube(q);
            for &i in &cube.members {
                let e = offset.entry(i).or_insert(f64::INFINITY);
                *e = e.min(cube.size);
            }
        }
        let mut ids: Vec<usize> = offset.keys().copied().collect();
        ids.sort_unstable();
        let mut coords = Vec::with_capacity(ids.len() * cloud.n());
        for &i in &ids {
            coords.extend_from_slice(cloud.point(i));
        }
        let offsets = ids.iter().map(|i| offset[i]).collect();
        Ok(Self { tree: KdTree::with_offsets(&coords, cloud.n(), Some(offsets)) })
    }

    pub fn at(&self, x: &[f64]) -> f64 {
        self.tree.min_offset_dist(x).map(|(_, v)| v).unwrap_or(f64::INFINITY)
    }

    /// `inf_{x ∈ box} d_F(x)` for a closed box.
    pub fn on_box(&self, lo: &[f64], hi: &[f64]) -> f64 {
        self.tree.min_offset_box_dist(lo, hi).map(|(_, v)| v).unwrap_or(f64::INFINITY)
    }
}

pub fn smoothing_distance(x: &[f64], forest: &CubeForest, cloud: &PointCloud, f: &[usize]) -> Result<f64> {
    Ok(SmoothingDistance::new(forest, cloud, f)?.at(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhitneyParams {
    pub tau: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    pub eta: f64,
}

impl Default for WhitneyParams {
    fn default() -> Self {
        Self { tau: 0.05, c0: 5.0, eta: 0.25 }
    }
}

impl WhitneyParams {
    /// Largest admissible `τ` in dimension `n`: `τ < η / (2√n)`.
    pub fn tau_max(&self, n: usize) -> f64 {
        self.eta / (2.0 * (n as f64).sqrt())
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(invalid(format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        if !(self.tau > 0.0) {
            return Err(invalid(format!("tau must be positive, got {}", self.tau)));
        }
        let max = self.tau_max(n);
        if self.tau >= max {
            return Err(Error::TauTooLarge { tau: self.tau, max });
        }
        if !(self.c0 > 4.0) || !self.c0.is_finite() {
            return Err(invalid(format!("C0 must exceed 4, got {}", self.c0)));
        }
        Ok(())
    }
}

/// The family `𝒞` of maximal dyadic cubes with `ℓ(I) < τ d_F(I)` meeting `T̂`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WhitneyFamily {
    pub params: WhitneyParams,
    pub top: usize,
    pub f: Vec<usize>,
    pub grid: DyadicGrid,
    /// Christ cubes at the level of the top whose members meet `C0 B_T`.
    pub hat_t: Vec<usize>,
    pub cubes: Vec<DyadicCube>,
    /// `d_F(I)` per cube, evaluated on the closed box.
    pub d_f: Vec<f64>,
    /// Cubes breaking `(τ/2) d_F(I) ≤ ℓ(I) < τ d_F(I)`.
    pub size_strict_violations: usize,
    /// Cubes breaking the same bound once the lower side is relaxed to
    /// `(τ/2) d_F(I) ≤ ℓ(I) (1 + τ√n/2)`, which is what the parent test
    /// guarantees for the infimum over `I`.
    pub size_corrected_violations: usize,
}

impl WhitneyFamily {
    pub fn side(&self, i: usize) -> f64 {
        self.grid.side_at(self.cubes[i].level)
    }

    pub fn bounds(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        self.grid.bounds(&self.cubes[i])
    }

    /// `dist(I, J)` between two family cubes.
    pub fn gap(&self, i: usize, j: usize) -> f64 {
        let (alo, ahi) = self.bounds(i);
        let (blo, bhi) = self.bounds(j);
        box_box_dist(&alo, &ahi, &blo, &bhi)
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    /// Pairs of cubes whose interiors overlap (zero for a valid family).
    pub fn overlapping_pairs(&self) -> usize {
        let set: BTreeSet<&DyadicCube> = self.cubes.iter().collect();
        let mut bad = 0;
        for c in &self.cubes {
            let mut a = c.clone();
            let min_level = self.cubes.iter().map(|q| q.level).min().unwrap_or(c.level);
            while a.level > min_level {
                a = a.parent();
                if set.contains(&a) {
                    bad += 1;
                }
            }
        }
        bad
    }

    /// Largest side ratio over pairs with `η⁻¹I ∩ η⁻¹J ≠ ∅`.
    pub fn neighbor_kappa(&self, eta: f64) -> f64 {
        if self.cubes.len() < 2 {
            return 1.0;
        }
        let n = self.grid.n();
        let centers: Vec<f64> = self.cubes.iter().flat_map(|c| self.grid.center(c)).collect();
        let tree = KdTree::new(&centers, n);
        let lmax = (0..self.cubes.len()).map(|i| self.side(i)).fold(0.0, f64::max);
        let mut kappa: f64 = 1.0;
        for i in 0..self.cubes.len() {
            let li = self.side(i);
            let ci = &centers[i * n..(i + 1) * n];
            let reach = (n as f64).sqrt() * (li + lmax) / (2.0 * eta);
            for j in tree.within(ci, reach) {
                let lj = self.side(j);
                let cj = &centers[j * n..(j + 1) * n];
                let half = (li + lj) / (2.0 * eta);
                if ci.iter().zip(cj).all(|(a, b)| (a - b).abs() <= half) {
                    kappa = kappa.max(li / lj);
                }
            }
        }
        kappa
    }
}

fn cells_overlapping(grid: &DyadicGrid, level: i32, lo: &[f64], hi: &[f64]) -> Vec<DyadicCube> {
    let n = grid.n();
    let s = grid.side_at(level);
    let a: Vec<i64> = (0..n).map(|k| ((lo[k] - grid.corner[k]) / s).floor() as i64).collect();
    let b: Vec<i64> = (0..n).map(|k| ((hi[k] - grid.corner[k]) / s).floor() as i64).collect();
    let mut out = Vec::new();
    let mut idx = a.clone();
    loop {
        out.push(DyadicCube { level, coords: idx.clone() });
        let mut k = 0;
        while k < n {
            idx[k] += 1;
            if idx[k] <= b[k] {
                break;
            }
            idx[k] = a[k];
            k += 1;
        }
        if k == n {
            return out;
        }
    }
}

/// Builds `𝒞` for the region with top `top` and minimal cubes `f`, on the
/// lattice `grid`.
pub fn whitney_family(
    forest: &CubeForest,
    cloud: &PointCloud,
    grid: &DyadicGrid,
    top: usize,
    f: &[usize],
    params: WhitneyParams,
) -> Result<WhitneyFamily> {
    let n = cloud.n();
    params.validate(n)?;
    let dist_f = SmoothingDistance::new(forest, cloud, f)?;
    let t = forest.cube(top);
    let reach = params.c0 * t.size;

    let tree = cloud.kdtree();
    let mut hat: BTreeSet<usize> = BTreeSet::new();
    for i in tree.within(&t.center, reach) {
        hat.insert(forest.cube_of(i, t.level));
    }
    let hat_t: Vec<usize> = hat.into_iter().collect();
    let mut hat_coords = Vec::new();
    for &q in &hat_t {
        for &i in &forest.cube(q).members {
            hat_coords.extend_from_slice(cloud.point(i));
        }
    }
    let hat_tree = KdTree::new(&hat_coords, n);
    let res = cloud.resolution();
    let meets = |lo: &[f64], hi: &[f64]| hat_tree.min_offset_box_dist(lo, hi).is_some_and(|(_, v)| v <= res);

    let mut blo = vec![f64::INFINITY; n];
    let mut bhi = vec![f64::NEG_INFINITY; n];
    for p in hat_coords.chunks(n) {
        for k in 0..n {
            blo[k] = blo[k].min(p[k] - res);
            bhi[k] = bhi[k].max(p[k] + res);
        }
    }
    let extent = blo.iter().zip(&bhi).map(|(a, b)| b - a).fold(0.0, f64::max);
    let admissible = |c: &DyadicCube| {
        let (lo, hi) = grid.bounds(c);
        let d = dist_f.on_box(&lo, &hi);
        (grid.side_at(c.level) < params.tau * d, d)
    };

    let mut level = (grid.side / extent).log2().floor() as i32;
    let start = loop {
        let cells: Vec<DyadicCube> = cells_overlapping(grid, level, &blo, &bhi)
            .into_iter()
            .filter(|c| {
                let (lo, hi) = grid.bounds(c);
                meets(&lo, &hi)
            })
            .collect();
        if cells.iter().all(|c| !admissible(c).0) {
            break cells;
        }
        level -= 1;
    };

    let mut found: Vec<(DyadicCube, f64)> = Vec::new();
    let mut stack = start;
    while let Some(c) = stack.pop() {
        for child in c.children() {
            let (lo, hi) = grid.bounds(&child);
            if !meets(&lo, &hi) {
                continue;
            }
            let (ok, d) = admissible(&child);
            if ok {
                found.push((child, d));
            } else {
                stack.push(child);
            }
        }
    }
    found.sort_by(|a, b| a.0.cmp(&b.0));

    let root_n = (n as f64).sqrt();
    let mut strict = 0;
    let mut corrected = 0;
    for (c, d) in &found {
        let l = grid.side_at(c.level);
        if !(0.5 * params.tau * d <= l && l < params.tau * d) {
            strict += 1;
        }
        if !(0.5 * params.tau * d <= l * (1.0 + params.tau * root_n / 2.0) && l < params.tau * d) {
            corrected += 1;
        }
    }
    let (cubes, d_f) = found.into_iter().unzip();
    Ok(WhitneyFamily {
        params,
        top,
        f: f.to_vec(),
        grid: grid.clone(),
        hat_t,
        cubes,
        d_f,
        size_strict_violations: strict,
        size_corrected_violations: corrected,
    })
}

/// Distance from `x` to the `d`-skeleton of the closed box `[lo, hi]`.
pub fn dist_to_skeleton(x: &[f64], lo: &[f64], hi: &[f64], d: usize) -> f64 {
    let n = x.len();
    let mut free_total = 0.0;
    let mut extra = Vec::with_capacity(n);
    for k in 0..n {
        let free = (lo[k] - x[k]).max(x[k] - hi[k]).max(0.0);
        let pinned = (x[k] - lo[k]).abs().min((x[k] - hi[k]).abs());
        free_total += free * free;
        extra.push(pinned * pinned - free * free);
    }
    extra.sort_by(f64::total_cmp);
    (free_total + extra[..n - d.min(n)].iter().sum::<f64>()).sqrt()
}

/// Weighted samples of `Ê = ⋃_{I ∈ 𝒞} ∂_d I`.
#[derive(Debug, Clone)]
pub struct SkeletonSet {
    pub cloud: PointCloud,
    pub top: usize,
    pub d: usize,
    /// Largest sampling step used on any cube.
    pub spacing: f64,
    pub cube_count: usize,
}

impl SkeletonSet {
    pub fn total_weight(&self) -> f64 {
        self.cloud.total_weight()
    }
}

pub fn skeleton_set(fam: &WhitneyFamily, d: usize, spacing_divisor: usize) -> Result<SkeletonSet> {
    let n = fam.grid.n();
    if spacing_divisor < 2 {
        return Err(invalid(format!("spacing divisor must be at least 2, got {spacing_divisor}")));
    }
    if d > n {
        return Err(invalid(format!("skeleton dimension {d} exceeds ambient dimension {n}")));
    }
    if fam.cubes.is_empty() {
        return Err(invalid("empty Whitney family"));
    }
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    let mut spacing: f64 = 0.0;
    let mut min_spacing = f64::INFINITY;
    for i in 0..fam.cubes.len() {
        let s = fam.side(i);
        let h = s / spacing_divisor as f64;
        spacing = spacing.max(h);
        min_spacing = min_spacing.min(h);
        let (lo, _) = fam.bounds(i);
        let (c, w) = skeleton_of_box(&lo, s, d, h);
        coords.extend(c);
        weights.extend(w);
    }
    let cloud = PointCloud::weighted(coords, weights, n, d, min_spacing)?;
    Ok(SkeletonSet { cloud, top: fam.top, d, spacing, cube_count: fam.cubes.len() })
}

/// Distance from `x` to the true skeleton `⋃ ∂_d I` over the family.
pub(crate) struct SkeletonLocator<'a> {
    fam: &'a WhitneyFamily,
    centers: KdTree,
    max_half_diag: f64,
}

impl<'a> SkeletonLocator<'a> {
    pub(crate) fn new(fam: &'a WhitneyFamily) -> Self {
        let n = fam.grid.n();
        let centers: Vec<f64> = fam.cubes.iter().flat_map(|c| fam.grid.center(c)).collect();
        let lmax = (0..fam.cubes.len()).map(|i| fam.side(i)).fold(0.0, f64::max);
        Self { fam, centers: KdTree::new(&centers, n), max_half_diag: 0.5 * lmax * (n as f64).sqrt() }
    }

    /// Indices of cubes whose closed box contains `x`.
    pub(crate) fn containing(&self, x: &[f64]) -> Vec<usize> {
        let tol = 1e-12 * self.fam.grid.side.max(1.0);
        self.centers
            .within(x, self.max_half_diag * (1.0 + 1e-9))
            .into_iter()
            .filter(|&i| {
                let (lo, hi) = self.fam.bounds(i);
                point_box_dist(x, &lo, &hi) <= tol
            })
            .collect()
    }

    pub(crate) fn distance(&self, x: &[f64], d: usize) -> f64 {
        let Some((seed, _)) = self.centers.nearest(x) else {
            return f64::INFINITY;
        };
        let (lo, hi) = self.fam.bounds(seed);
        let mut best = dist_to_skeleton(x, &lo, &hi, d);
        for i in self.centers.within(x, best + self.max_half_diag) {
            let (lo, hi) = self.fam.bounds(i);
            if point_box_dist(x, &lo, &hi) < best {
                best = best.min(dist_to_skeleton(x, &lo, &hi, d));
            }
        }
        best
    }
}
