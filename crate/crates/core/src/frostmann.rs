//! Level-by-level Frostmann renormalisation on the occupied dyadic cubes,
//! the Bad family and the dyadic trees it induces.
//!
//! Masses are measured in units where the root cube has side 1.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cubes::{DyadicCube, DyadicGrid, DyadicIndex};
use crate::error::{invalid, Error, Result};
use crate::geometry::Ball;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrostNode {
    pub cube: DyadicCube,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// `μ_m^{k+1}(J)`: the mass collected from the children before `J`'s own
    /// renormalisation (the base weight for leaves).
    pub pre: f64,
    /// `μ_m^k(J)` with `k = n(J)`.
    pub post: f64,
    /// Renormalisation factor; 1 unless the trigger fired.
    pub factor: f64,
    pub bad: bool,
    pub fired: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrostmannResult {
    pub m: u32,
    pub d: usize,
    pub grid: DyadicGrid,
    pub nodes: Vec<FrostNode>,
    /// Node ids of the Bad family, ascending.
    pub bad: Vec<usize>,
    #[serde(skip)]
    lookup: HashMap<DyadicCube, usize>,
}

/// A region whose `μ^I` measure is requested.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Cube(DyadicCube),
    /// A ball in cloud coordinates; leaves count when their centre is inside.
    Ball(Ball),
}

/// `Tree(I)` and `Stop(I)` for one Bad cube, as node ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicTree {
    pub top: usize,
    pub members: Vec<usize>,
    pub stops: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrostmannAudit {
    pub pairs_checked: usize,
    pub upper_violations: usize,
    pub stop_checked: usize,
    pub stop_violations: usize,
    pub decay_checked: usize,
    pub decay_violations: usize,
    /// Largest `μ^I(J) / ℓ(J)^d` seen.
    pub max_upper_ratio: f64,
    /// Smallest `μ^I(J) / ℓ(J)^d` over stop cubes.
    pub min_stop_ratio: f64,
}

impl FrostmannAudit {
    pub fn passed(&self) -> bool {
        self.upper_violations == 0 && self.stop_violations == 0 && self.decay_violations == 0
    }
}

const TOL: f64 = 1e-12;

pub fn run_frostmann(index: &DyadicIndex, d: usize, m: u32) -> Result<FrostmannResult> {
    if m > index.max_level {
        return Err(invalid(format!("m = {m} exceeds the index depth {}", index.max_level)));
    }
    if d == 0 || d > index.n() {
        return Err(invalid(format!("d = {d} must lie in 1..={}", index.n())));
    }
    let mut nodes: Vec<FrostNode> = Vec::new();
    let mut lookup: HashMap<DyadicCube, usize> = HashMap::new();
    for level in 0..=m {
        for coords in index.occupied(level).keys() {
            let cube = DyadicCube { level: level as i32, coords: coords.clone() };
            let parent = (level > 0).then(|| lookup[&cube.parent()]);
            let id = nodes.len();
            if let Some(p) = parent {
                nodes[p].children.push(id);
            }
            lookup.insert(cube.clone(), id);
            nodes.push(FrostNode {
                cube,
                parent,
                children: Vec::new(),
                pre: 0.0,
                post: 0.0,
                factor: 1.0,
                bad: level == m,
                fired: false,
            });
        }
    }
    for node in nodes.iter_mut().filter(|n| n.cube.level == m as i32) {
        let base = 2f64.powi(-(m as i32) * d as i32);
        node.pre = base;
        node.post = base;
    }
    // sweep from level m-1 to 0; ids are grouped by level so a reverse scan works
    for id in (0..nodes.len()).rev() {
        if nodes[id].cube.level == m as i32 {
            continue;
        }
        let cap = 2f64.powi(-nodes[id].cube.level * d as i32);
        let pre: f64 = nodes[id].children.iter().map(|&c| nodes[c].post).sum();
        let node = &mut nodes[id];
        node.pre = pre;
        if pre > 2.0 * cap {
            node.bad = true;
            node.fired = true;
            node.factor = cap / pre;
            node.post = cap;
        } else {
            node.post = pre;
        }
    }
    nodes[0].bad = true;
    let bad = (0..nodes.len()).filter(|&i| nodes[i].bad).collect();
    Ok(FrostmannResult { m, d, grid: index.grid.clone(), nodes, bad, lookup })
}

impl FrostmannResult {
    pub fn node(&self, id: usize) -> &FrostNode {
        &self.nodes[id]
    }

    pub fn find(&self, cube: &DyadicCube) -> Option<usize> {
        self.lookup.get(cube).copied()
    }

    /// Side of a node in normalised units.
    pub fn side(&self, id: usize) -> f64 {
        2f64.powi(-self.nodes[id].cube.level)
    }

    pub fn side_pow_d(&self, id: usize) -> f64 {
        2f64.powi(-self.nodes[id].cube.level * self.d as i32)
    }

    fn rebuild_lookup(&mut self) {
        self.lookup = self.nodes.iter().enumerate().map(|(i, n)| (n.cube.clone(), i)).collect();
    }

    /// Restores the cube lookup after deserialisation.
    pub fn reindexed(mut self) -> Self {
        self.rebuild_lookup();
        self
    }

    /// Calls `f(J, μ^I(J))` for every occupied `J ⊆ I`, top-down.
    pub fn for_each_under<F: FnMut(usize, f64)>(&self, top: usize, mut f: F) {
        let mut stack = vec![(top, 1.0f64)];
        while let Some((j, acc)) = stack.pop() {
            f(j, self.nodes[j].post * acc);
            let next = acc * self.nodes[j].factor;
            for &c in self.nodes[j].children.iter().rev() {
                stack.push((c, next));
            }
        }
    }

    /// `μ^I(J)` for node ids with `J ⊆ I` (0 when disjoint).
    pub fn mu(&self, top: usize, j: usize) -> f64 {
        let (ti, tj) = (&self.nodes[top].cube, &self.nodes[j].cube);
        if tj.contains(ti) {
            return self.nodes[top].post;
        }
        if !ti.contains(tj) {
            return 0.0;
        }
        let mut acc = self.nodes[j].post;
        let mut k = self.nodes[j].parent;
        while let Some(p) = k {
            acc *= self.nodes[p].factor;
            if p == top {
                break;
            }
            k = self.nodes[p].parent;
        }
        acc
    }

    pub fn measure_of(&self, top: usize, region: &Region) -> Result<f64> {
        if top >= self.nodes.len() || !self.nodes[top].bad {
            return Err(Error::UnknownCube(format!("{top} is not a Bad cube")));
        }
        match region {
            Region::Cube(c) => {
                if c.coords.len() != self.grid.n() {
                    return Err(invalid("cube dimension differs from the index"));
                }
                if c.level > self.m as i32 {
                    // finer than the leaves: the mass of the containing leaf is not split
                    return Err(invalid(format!("cube level {} is finer than m = {}", c.level, self.m)));
                }
                let ti = &self.nodes[top].cube;
                if c.contains(ti) {
                    return Ok(self.nodes[top].post);
                }
                if !ti.contains(c) {
                    return Ok(0.0);
                }
                Ok(self.find(c).map_or(0.0, |j| self.mu(top, j)))
            }
            Region::Ball(b) => {
                let mut total = 0.0;
                let m = self.m as i32;
                self.for_each_under(top, |j, mass| {
                    let node = &self.nodes[j];
                    if node.cube.level == m && b.contains(&self.grid.center(&node.cube)) {
                        total += mass;
                    }
                });
                Ok(total)
            }
        }
    }

    /// `Σ_{I ∈ Bad} ℓ(I)^d` in cloud units.
    pub fn packing_sum(&self) -> f64 {
        let s = self.grid.side.powi(self.d as i32);
        self.bad.iter().map(|&i| self.side_pow_d(i) * s).sum()
    }

    pub fn to_json(&self, content: f64) -> Value {
        let (sum, ratio) = bad_packing(self, content);
        json!({ "m": self.m, "bad_count": self.bad.len(), "packing_sum": sum, "packing_ratio": ratio })
    }

    /// Per-node masses as CSV.
    pub fn masses_csv(&self) -> String {
        let mut s = String::from("id,level,coords,pre,post,factor,bad\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let coords: Vec<String> = n.cube.coords.iter().map(|c| c.to_string()).collect();
            s.push_str(&format!("{i},{},{},{},{},{},{}\n", n.cube.level, coords.join(" "), n.pre, n.post, n.factor, n.bad));
        }
        s
    }

    /// Checks the dyadic upper bound for every Bad top and every cube below
    /// it, the two-sided bound on stop cubes and mass decay along Bad chains.
    pub fn audit(&self) -> FrostmannAudit {
        use rayon::prelude::*;
        let trees = bad_trees(self);
        let parts: Vec<FrostmannAudit> = trees
            .par_iter()
            .map(|t| {
                let mut a = FrostmannAudit { min_stop_ratio: f64::INFINITY, ..Default::default() };
                let n = self.grid.n() as i32;
                let lower = 2f64.powi(self.d as i32 - n - 1);
                let mut mus = HashMap::new();
                self.for_each_under(t.top, |j, mu| {
                    let cap = self.side_pow_d(j);
                    a.pairs_checked += 1;
                    a.max_upper_ratio = a.max_upper_ratio.max(mu / cap);
                    if mu > 2.0 * cap * (1.0 + TOL) {
                        a.upper_violations += 1;
                    }
                    mus.insert(j, mu);
                });
                for &s in &t.stops {
                    let mu = mus[&s];
                    let cap = self.side_pow_d(s);
                    a.stop_checked += 1;
                    a.min_stop_ratio = a.min_stop_ratio.min(mu / cap);
                    if mu < lower * cap * (1.0 - TOL) || mu > 2.0 * cap * (1.0 + TOL) {
                        a.stop_violations += 1;
                    }
                }
                // decay: each fired cube strictly between a leaf and the top halves the mass
                for (&j, &mu) in &mus {
                    if self.nodes[j].cube.level != self.m as i32 {
                        continue;
                    }
                    let mut fired = 0;
                    let mut k = if j == t.top { None } else { self.nodes[j].parent };
                    let mut reached = j == t.top;
                    while let Some(p) = k {
                        if self.nodes[p].fired {
                            fired += 1;
                        }
                        if p == t.top {
                            reached = true;
                            break;
                        }
                        k = self.nodes[p].parent;
                    }
                    debug_assert!(reached);
                    let bound = self.side_pow_d(j) * 2f64.powi(-fired);
                    a.decay_checked += 1;
                    let ok = if fired > 0 { mu < bound * (1.0 + TOL) } else { mu <= bound * (1.0 + TOL) };
                    if !ok {
                        a.decay_violations += 1;
                    }
                }
                a
            })
            .collect();
        parts.into_iter().fold(
            FrostmannAudit { min_stop_ratio: f64::INFINITY, ..Default::default() },
            |mut acc, a| {
                acc.pairs_checked += a.pairs_checked;
                acc.upper_violations += a.upper_violations;
                acc.stop_checked += a.stop_checked;
                acc.stop_violations += a.stop_violations;
                acc.decay_checked += a.decay_checked;
                acc.decay_violations += a.decay_violations;
                acc.max_upper_ratio = acc.max_upper_ratio.max(a.max_upper_ratio);
                acc.min_stop_ratio = acc.min_stop_ratio.min(a.min_stop_ratio);
                acc
            },
        )
    }
}

/// `Σ_{I ∈ Bad} ℓ(I)^d` in cloud units, and its ratio to `content`.
pub fn bad_packing(res: &FrostmannResult, content: f64) -> (f64, f64) {
    let sum = res.packing_sum();
    (sum, sum / content)
}

/// One tree per Bad cube: the cubes whose smallest properly containing Bad
/// cube is `I`, together with `I`; stops are the Bad members other than `I`.
pub fn bad_trees(res: &FrostmannResult) -> Vec<DyadicTree> {
    let mut owner: Vec<Option<usize>> = vec![None; res.nodes.len()];
    for (id, node) in res.nodes.iter().enumerate() {
        if let Some(p) = node.parent {
            owner[id] = Some(if res.nodes[p].bad { p } else { owner[p].unwrap() });
        }
    }
    let pos: HashMap<usize, usize> = res.bad.iter().enumerate().map(|(k, &b)| (b, k)).collect();
    let mut trees: Vec<DyadicTree> =
        res.bad.iter().map(|&b| DyadicTree { top: b, members: vec![b], stops: Vec::new() }).collect();
    for (id, o) in owner.iter().enumerate() {
        if let Some(top) = o {
            let t = &mut trees[pos[top]];
            t.members.push(id);
            if res.nodes[id].bad {
                t.stops.push(id);
            }
        }
    }
    trees
}
