//! Stopping-time regions driven by the Bad dyadic cubes, the smoothing
//! distance, Whitney families and skeleton sets.

mod prune;
mod verify;
mod whitney;

pub use prune::{prune_by_qp, PrunedCoronization, PrunedRegion};
pub use verify::{verify_main_lemma, MainLemmaReport, TopReport, VerifyParams};
pub use whitney::{
    dist_to_skeleton, skeleton_set, smoothing_distance, whitney_family, SkeletonSet, SmoothingDistance, WhitneyFamily,
    WhitneyParams,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cubes::{ChristCube, CubeForest, DyadicCube, DyadicGrid};
use crate::error::{invalid, Error, Result};
use crate::frostmann::FrostmannResult;
use crate::geometry::point_box_dist;

/// `Q ∼ I`: `M B_Q` meets the closed cube `I` and `ρ ℓ(I) ≤ ℓ(Q) < ℓ(I)`.
pub fn relate_q_i(q: &ChristCube, i: &DyadicCube, grid: &DyadicGrid, m: f64, rho: f64) -> bool {
    let li = grid.side_at(i.level);
    if !(rho * li <= q.size && q.size < li) {
        return false;
    }
    let (lo, hi) = grid.bounds(i);
    point_box_dist(&q.center, &lo, &hi) <= m * q.size
}

/// One stopping-time region `Tree(R)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoronaTree {
    pub top: usize,
    pub generation: usize,
    pub members: Vec<usize>,
    pub stops: Vec<usize>,
    pub next: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Coronization {
    #[serde(rename = "M")]
    pub m_factor: f64,
    pub k0: u32,
    pub d: usize,
    pub trees: Vec<CoronaTree>,
    /// `Σ_{R ∈ Top} ℓ(R)^d`.
    pub packing_sum: f64,
    /// Per cube: some child is related to a Bad cube.
    pub related_child: Vec<bool>,
}

impl Coronization {
    pub fn tops(&self) -> Vec<usize> {
        self.trees.iter().map(|t| t.top).collect()
    }

    pub fn tree_of_top(&self, top: usize) -> Option<&CoronaTree> {
        self.trees.iter().find(|t| t.top == top)
    }

    /// Number of trees containing each cube of `𝒟(k0)`; all ones for a
    /// partition.
    pub fn membership_counts(&self, forest: &CubeForest) -> Vec<usize> {
        let mut c = vec![0usize; forest.cubes.len()];
        for t in &self.trees {
            for &q in &t.members {
                c[q] += 1;
            }
        }
        c.truncate(forest.cubes.iter().filter(|q| q.level <= self.k0).count());
        c
    }
}

/// Bad cubes related to `q`, searched on the lattice levels whose side lies
/// in `(ℓ(Q), ℓ(Q)/ρ]`.
fn has_related_bad(q: &ChristCube, fr: &FrostmannResult, m_factor: f64, rho: f64, bad_by_level: &[Vec<usize>]) -> bool {
    let grid = &fr.grid;
    let n = grid.n();
    for level in 0..=fr.m as i32 {
        let side = grid.side_at(level);
        if !(rho * side <= q.size && q.size < side) {
            continue;
        }
        let reach = m_factor * q.size;
        let lo: Vec<i64> = (0..n).map(|k| ((q.center[k] - reach - grid.corner[k]) / side).floor() as i64).collect();
        let hi: Vec<i64> = (0..n).map(|k| ((q.center[k] + reach - grid.corner[k]) / side).floor() as i64).collect();
        let cells: f64 = lo.iter().zip(&hi).map(|(a, b)| (b - a + 1) as f64).product();
        let bads = &bad_by_level[level as usize];
        if (bads.len() as f64) < cells {
            if bads.iter().any(|&b| relate_q_i(q, &fr.node(b).cube, grid, m_factor, rho)) {
                return true;
            }
            continue;
        }
        let mut idx = lo.clone();
        loop {
            let cube = DyadicCube { level, coords: idx.clone() };
            if let Some(id) = fr.find(&cube) {
                if fr.node(id).bad && relate_q_i(q, &cube, grid, m_factor, rho) {
                    return true;
                }
            }
            let mut k = 0;
            while k < n {
                idx[k] += 1;
                if idx[k] <= hi[k] {
                    break;
                }
                idx[k] = lo[k];
                k += 1;
            }
            if k == n {
                break;
            }
        }
    }
    false
}

pub fn build_coronization(forest: &CubeForest, fr: &FrostmannResult, m_factor: f64, k0: u32) -> Result<Coronization> {
    if !(m_factor > 1.0) {
        return Err(invalid(format!("M must exceed 1, got {m_factor}")));
    }
    if k0 > forest.depth() {
        return Err(invalid(format!("k0 = {k0} exceeds the forest depth {}", forest.depth())));
    }
    if fr.grid.n() != forest.root().center.len() {
        return Err(invalid("Frostmann grid and forest live in different dimensions"));
    }
    let rho = forest.rho;
    let related = rho * rho.powi(k0 as i32) * forest.root().size;
    let leaf = fr.grid.side_at(fr.m as i32);
    if !(related > leaf) {
        return Err(Error::IncompatibleScales { related, leaf });
    }
    let mut bad_by_level = vec![Vec::new(); fr.m as usize + 1];
    for &b in &fr.bad {
        bad_by_level[fr.node(b).cube.level as usize].push(b);
    }
    let related_self: Vec<bool> = forest
        .cubes
        .par_iter()
        .map(|q| q.level >= 1 && q.level <= k0 && has_related_bad(q, fr, m_factor, rho, &bad_by_level))
        .collect();
    let related_child: Vec<bool> =
        forest.cubes.iter().map(|q| q.children.iter().any(|&c| related_self[c])).collect();

    let d = fr.d;
    let mut trees = Vec::new();
    let mut generation = vec![0usize];
    let mut gen_no = 0;
    while !generation.is_empty() {
        let mut next_gen = Vec::new();
        for &r in &generation {
            let mut members = Vec::new();
            let mut stops = Vec::new();
            let mut stack = vec![r];
            while let Some(q) = stack.pop() {
                members.push(q);
                let cube = forest.cube(q);
                if cube.level == k0 || related_child[q] {
                    stops.push(q);
                } else {
                    stack.extend(cube.children.iter().rev());
                }
            }
            members.sort_unstable();
            stops.sort_unstable();
            let next: Vec<usize> = stops
                .iter()
                .flat_map(|&s| forest.cube(s).children.iter().copied())
                .filter(|&c| forest.cube(c).level <= k0)
                .collect();
            next_gen.extend_from_slice(&next);
            trees.push(CoronaTree { top: r, generation: gen_no, members, stops, next });
        }
        next_gen.sort_unstable();
        generation = next_gen;
        gen_no += 1;
    }
    let packing_sum = trees.iter().map(|t| forest.cube(t.top).size.powi(d as i32)).sum();
    Ok(Coronization { m_factor, k0, d, trees, packing_sum, related_child })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cubes::{build_christ_cubes, build_dyadic_index};
    use crate::frostmann::run_frostmann;
    use crate::pointset::PointCloud;

    fn segment(k: usize) -> PointCloud {
        PointCloud::new((0..k).map(|i| vec![i as f64 / (k - 1) as f64, 0.0]).collect(), 2, 1, 1.0 / (k - 1) as f64)
            .unwrap()
    }

    #[test]
    fn relation_boundary_cases() {
        let grid = DyadicGrid { corner: vec![0.0, 0.0], side: 1.0 };
        let i = DyadicCube { level: 1, coords: vec![0, 0] };
        let mk = |c: Vec<f64>, size: f64| ChristCube {
            id: 0,
            level: 1,
            center_index: 0,
            center: c,
            size,
            parent: None,
            children: vec![],
            members: vec![],
        };
        assert!(!relate_q_i(&mk(vec![0.25, 0.25], 0.5), &i, &grid, 8.0, 0.5));
        assert!(relate_q_i(&mk(vec![0.25, 0.25], 0.25), &i, &grid, 1.0, 0.5));
        // box distance 2.5, reach 8 * 0.25 = 2
        assert!(!relate_q_i(&mk(vec![3.0, 0.25], 0.25), &i, &grid, 8.0, 0.5));
        assert!(relate_q_i(&mk(vec![2.5, 0.25], 0.25), &i, &grid, 8.0, 0.5));
    }

    #[test]
    fn segment_corona_partitions_cubes() {
        let c = segment(513);
        let forest = build_christ_cubes(&c, 0.5, 6, 0).unwrap();
        let idx = build_dyadic_index(&c, 9).unwrap();
        let fr = run_frostmann(&idx, 1, 9).unwrap();
        let cor = build_coronization(&forest, &fr, 8.0, 6).unwrap();
        assert!(cor.membership_counts(&forest).iter().all(|&k| k == 1));
        for t in &cor.trees {
            assert!(t.stops.iter().all(|s| t.members.contains(s)));
        }
        // later generations are exactly the Next sets of the previous one
        let max_gen = cor.trees.iter().map(|t| t.generation).max().unwrap();
        for g in 0..max_gen {
            let mut next: Vec<usize> =
                cor.trees.iter().filter(|t| t.generation == g).flat_map(|t| t.next.clone()).collect();
            next.sort_unstable();
            let tops: Vec<usize> = cor.trees.iter().filter(|t| t.generation == g + 1).map(|t| t.top).collect();
            assert_eq!(next, tops);
        }
        let content = 1.0;
        let ratio = cor.packing_sum / content;
        assert!(ratio > 1.0 && ratio < 4.0, "{ratio}");
    }

    #[test]
    fn incompatible_scales_error() {
        let c = segment(513);
        let forest = build_christ_cubes(&c, 0.5, 6, 0).unwrap();
        let idx = build_dyadic_index(&c, 4).unwrap();
        let fr = run_frostmann(&idx, 1, 4).unwrap();
        assert!(matches!(build_coronization(&forest, &fr, 8.0, 6), Err(Error::IncompatibleScales { .. })));
    }

    #[test]
    fn depth_zero_forest_has_single_top() {
        let c = segment(65);
        let forest = build_christ_cubes(&c, 0.5, 3, 0).unwrap().truncated(0);
        let idx = build_dyadic_index(&c, 6).unwrap();
        let fr = run_frostmann(&idx, 1, 6).unwrap();
        let cor = build_coronization(&forest, &fr, 8.0, 0).unwrap();
        assert_eq!(cor.tops(), vec![0]);
        assert_eq!(cor.trees[0].members, vec![0]);
    }

    #[test]
    fn filled_square_stops_match_brute_force_relation() {
        let k = 65;
        let mut pts = Vec::new();
        for i in 0..k {
            for j in 0..k {
                pts.push(vec![i as f64 / (k - 1) as f64, j as f64 / (k - 1) as f64]);
            }
        }
        let c = PointCloud::new(pts, 2, 1, 1.0 / 64.0).unwrap();
        let forest = build_christ_cubes(&c, 0.5, 4, 0).unwrap();
        let idx = build_dyadic_index(&c, 8).unwrap();
        let fr = run_frostmann(&idx, 1, 8).unwrap();
        let cor = build_coronization(&forest, &fr, 8.0, 4).unwrap();
        let related = |q: usize| fr.bad.iter().any(|&b| relate_q_i(forest.cube(q), &fr.node(b).cube, &fr.grid, 8.0, 0.5));
        let mut stops: Vec<usize> = cor.trees.iter().flat_map(|t| t.stops.clone()).collect();
        stops.sort_unstable();
        for q in forest.cubes.iter().filter(|q| q.level <= 4) {
            let expect = q.level == 4 || q.children.iter().any(|&ch| related(ch));
            assert_eq!(stops.binary_search(&q.id).is_ok(), expect, "cube {}", q.id);
        }
        // Bad cubes do not sit on every level, so some trees span two levels
        assert!(cor.trees.len() < forest.cubes.iter().filter(|q| q.level <= 4).count());
        let tops: f64 = cor.trees.iter().map(|t| forest.cube(t.top).size).sum();
        assert!((cor.packing_sum - tops).abs() < 1e-9);
    }
}
