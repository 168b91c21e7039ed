//! Dyadic Hausdorff content: `inf` over covers by dyadic cubes of `sum l(I)^d`.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PointCloud;
use crate::error::{invalid, Error, Result};
use crate::geometry::{is_pow2, pow2_at_least};

/// Index of the level-`level` cell containing `x` along one axis, clamped to
/// the root so points on the top faces land in the last cell.
#[inline]
pub(crate) fn cell_index(x: f64, corner: f64, side: f64, level: u32) -> i64 {
    let cells = 1i64 << level;
    let t = ((x - corner) / side * cells as f64).floor() as i64;
    t.clamp(0, cells - 1)
}

fn leaf_cells<'a>(
    points: impl IntoIterator<Item = &'a [f64]>,
    corner: &[f64],
    side: f64,
    level: u32,
) -> BTreeMap<Vec<i64>, f64> {
    let mut out = BTreeMap::new();
    for p in points {
        let c: Vec<i64> = p.iter().zip(corner).map(|(&x, &c0)| cell_index(x, c0, side, level)).collect();
        out.insert(c, 0.0);
    }
    out
}

/// Bottom-up dynamic programme over the dyadic tree of the cube
/// `corner + [0, side]^n`, with leaves at `leaf_level`.
pub(crate) fn content_of_points<'a>(
    points: impl IntoIterator<Item = &'a [f64]>,
    corner: &[f64],
    side: f64,
    leaf_level: u32,
    d: usize,
) -> f64 {
    let mut level_map = leaf_cells(points, corner, side, leaf_level);
    if level_map.is_empty() {
        return 0.0;
    }
    let leaf_cost = (side / (1u64 << leaf_level) as f64).powi(d as i32);
    for v in level_map.values_mut() {
        *v = leaf_cost;
    }
    for level in (0..leaf_level).rev() {
        let cap = (side / (1u64 << level) as f64).powi(d as i32);
        let mut parents: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
        for (c, cost) in &level_map {
            let pc: Vec<i64> = c.iter().map(|&x| x >> 1).collect();
            *parents.entry(pc).or_insert(0.0) += cost;
        }
        for v in parents.values_mut() {
            *v = v.min(cap);
        }
        level_map = parents;
    }
    level_map.into_values().next().unwrap_or(0.0)
}

/// Dyadic content of `cloud` with exponent `d` and finest cell `min_cell`,
/// over the dyadic tree rooted at the cloud's bounding dyadic cube.
pub fn dyadic_content(cloud: &PointCloud, d: usize, min_cell: f64) -> Result<f64> {
    if d > cloud.n() {
        return Err(invalid(format!("content exponent {d} exceeds ambient dimension {}", cloud.n())));
    }
    if !is_pow2(min_cell) {
        return Err(invalid(format!("min_cell must be a power of two, got {min_cell}")));
    }
    if min_cell < cloud.resolution() {
        return Err(invalid(format!(
            "min_cell {min_cell} is finer than the cloud resolution {}",
            cloud.resolution()
        )));
    }
    let (lo, hi) = cloud.bbox();
    let extent = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
    let side = pow2_at_least(extent.max(min_cell));
    let leaf_level = (side / min_cell).log2().round() as u32;
    Ok(content_of_points(cloud.points(), &lo, side, leaf_level, d))
}

/// Dyadic content maintained under point insertion. Costs only ever grow, so
/// the running total is monotone in the inserted set.
#[derive(Debug, Clone)]
pub struct ContentTree {
    corner: Vec<f64>,
    side: f64,
    leaf_level: u32,
    caps: Vec<f64>,
    nodes: HashMap<(u32, Vec<i64>), (f64, f64)>,
    total: f64,
}

impl ContentTree {
    pub fn new(corner: Vec<f64>, side: f64, leaf_level: u32, d: usize) -> Self {
        let caps = (0..=leaf_level).map(|k| (side / (1u64 << k) as f64).powi(d as i32)).collect();
        Self { corner, side, leaf_level, caps, nodes: HashMap::new(), total: 0.0 }
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Adds a point and returns the new total.
    pub fn insert(&mut self, p: &[f64]) -> f64 {
        let l = self.leaf_level;
        let mut c: Vec<i64> =
            p.iter().zip(&self.corner).map(|(&x, &c0)| cell_index(x, c0, self.side, l)).collect();
        if self.nodes.contains_key(&(l, c.clone())) {
            return self.total;
        }
        let leaf = self.caps[l as usize];
        self.nodes.insert((l, c.clone()), (leaf, leaf));
        let mut delta = leaf;
        for level in (0..l).rev() {
            for x in c.iter_mut() {
                *x >>= 1;
            }
            let node = self.nodes.entry((level, c.clone())).or_insert((0.0, 0.0));
            node.0 += delta;
            let new = node.0.min(self.caps[level as usize]);
            delta = new - node.1;
            node.1 = new;
            if delta <= 0.0 {
                return self.total;
            }
        }
        if l == 0 {
            self.total = leaf;
        } else {
            self.total += delta;
        }
        self.total
    }
}

/// One sampled ball of a regularity scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub center: Vec<f64>,
    pub radius: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub c_observed: f64,
    pub witnesses: Vec<Witness>,
    pub samples_checked: usize,
}

/// Samples balls centred on the cloud with log-uniform radii in
/// `[8h, diam/2]` and reports the worst ratio `content / r^d`.
pub fn lower_regularity_scan(cloud: &PointCloud, d: usize, trials: usize, seed: u64) -> Result<RegularityReport> {
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    if cloud.len() < 2 {
        return Err(Error::NoScales);
    }
    let tree = cloud.kdtree();
    let diam = cloud.diameter_with(&tree);
    let (lo, hi) = (8.0 * cloud.resolution(), diam / 2.0);
    if !(lo < hi) {
        return Err(Error::NoScales);
    }
    let min_cell = pow2_at_least(cloud.resolution());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut witnesses = Vec::with_capacity(trials);
    for _ in 0..trials {
        let i = rng.gen_range(0..cloud.len());
        let r = (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp();
        let x = cloud.point(i).to_vec();
        let sub = cloud.subset(&tree.within(&x, r))?;
        let c = dyadic_content(&sub, d, min_cell)?;
        witnesses.push(Witness { center: x, radius: r, ratio: c / r.powi(d as i32) });
    }
    let c_observed = witnesses.iter().map(|w| w.ratio).fold(f64::INFINITY, f64::min);
    Ok(RegularityReport { c_observed, witnesses, samples_checked: trials })
}
