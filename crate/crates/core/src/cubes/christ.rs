use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{invalid, Result};
use crate::geometry::{dist, Ball};
use crate::pointset::PointCloud;
use crate::spatial::KdTree;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChristCube {
    pub id: usize,
    pub level: u32,
    /// Index of the net point `ζ_Q` in the cloud.
    pub center_index: usize,
    pub center: Vec<f64>,
    /// `ℓ(Q) = ρ^k · diam`.
    pub size: f64,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CubeForest {
    pub rho: f64,
    pub c0_observed: f64,
    pub diam: f64,
    /// Net point indices `X_k`, ascending.
    pub levels: Vec<Vec<usize>>,
    pub cubes: Vec<ChristCube>,
    by_level: Vec<Vec<usize>>,
    point_cube: Vec<Vec<usize>>,
}

impl CubeForest {
    /// Deepest level present.
    pub fn depth(&self) -> u32 {
        (self.by_level.len() - 1) as u32
    }

    pub fn root(&self) -> &ChristCube {
        &self.cubes[0]
    }

    pub fn cube(&self, id: usize) -> &ChristCube {
        &self.cubes[id]
    }

    pub fn level(&self, k: u32) -> &[usize] {
        &self.by_level[k as usize]
    }

    /// Id of the level-`k` cube holding point `i`.
    pub fn cube_of(&self, i: usize, k: u32) -> usize {
        self.point_cube[k as usize][i]
    }

    /// `R` and all of its descendants, ordered by id.
    pub fn descendants(&self, r: usize) -> Vec<usize> {
        let mut out = vec![r];
        let mut i = 0;
        while i < out.len() {
            out.extend_from_slice(&self.cubes[out[i]].children);
            i += 1;
        }
        out.sort_unstable();
        out
    }

    /// Descendants of `r` down to `max_level`, ordered by id.
    pub fn descendants_to(&self, r: usize, max_level: u32) -> Vec<usize> {
        let mut v = self.descendants(r);
        v.retain(|&q| self.cubes[q].level <= max_level);
        v
    }

    /// Copy truncated at `depth` (no deeper levels).
    pub fn truncated(&self, depth: u32) -> CubeForest {
        if depth >= self.depth() {
            return self.clone();
        }
        let keep = self.by_level[..=depth as usize].iter().map(|l| l.len()).sum::<usize>();
        let mut cubes = self.cubes[..keep].to_vec();
        for c in cubes.iter_mut().filter(|c| c.level == depth) {
            c.children.clear();
        }
        CubeForest {
            rho: self.rho,
            c0_observed: self.c0_observed,
            diam: self.diam,
            levels: self.levels[..=depth as usize].to_vec(),
            cubes,
            by_level: self.by_level[..=depth as usize].to_vec(),
            point_cube: self.point_cube[..=depth as usize].to_vec(),
        }
    }

    /// Per-cube records for export.
    pub fn to_json(&self, with_members: bool) -> Value {
        let cubes: Vec<Value> = self
            .cubes
            .iter()
            .map(|c| {
                let mut v = json!({
                    "id": c.id,
                    "level": c.level,
                    "center": c.center,
                    "size": c.size,
                    "parent": c.parent,
                    "children": c.children,
                    "member_count": c.members.len(),
                });
                if with_members {
                    v["members"] = json!(c.members);
                }
                v
            })
            .collect();
        json!({ "rho": self.rho, "c0_observed": self.c0_observed, "diam": self.diam, "cubes": cubes })
    }
}

/// `Ball(ζ_Q, scale · ℓ(Q))`.
pub fn cube_ball(q: &ChristCube, scale: f64) -> Result<Ball> {
    Ball::new(q.center.clone(), scale * q.size)
}

#[derive(PartialEq)]
struct Far(f64, usize);

impl Eq for Far {}

impl Ord for Far {
    fn cmp(&self, o: &Self) -> Ordering {
        self.0.total_cmp(&o.0).then(o.1.cmp(&self.1))
    }
}

impl PartialOrd for Far {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Greedy farthest-point nets `X_0 ⊆ X_1 ⊆ ...`; level `k ≥ 1` keeps adding
/// the farthest point while its distance exceeds `ρ^k (1-ρ) diam`, so every
/// point is within that radius of `X_k`.
fn nested_nets(cloud: &PointCloud, tree: &KdTree, rho: f64, scale: f64, depth: u32) -> Vec<Vec<usize>> {
    struct State {
        dnet: Vec<f64>,
        heap: BinaryHeap<Far>,
        net: Vec<usize>,
    }
    fn add(cloud: &PointCloud, tree: &KdTree, st: &mut State, i: usize) {
        // only points farther than the current maximum cannot improve
        let reach = st.dnet[i];
        st.net.push(i);
        let p = cloud.point(i);
        let cand: Vec<usize> = if reach.is_finite() { tree.within(p, reach) } else { (0..cloud.len()).collect() };
        for j in cand {
            let dj = dist(p, cloud.point(j));
            if dj < st.dnet[j] {
                st.dnet[j] = dj;
                st.heap.push(Far(dj, j));
            }
        }
    }
    let len = cloud.len();
    let mut st = State { dnet: vec![f64::INFINITY; len], heap: BinaryHeap::new(), net: Vec::new() };
    add(cloud, tree, &mut st, 0);
    let mut levels = vec![st.net.clone()];
    for k in 1..=depth {
        if st.net.len() == len {
            break;
        }
        let radius = rho.powi(k as i32) * (1.0 - rho) * scale;
        loop {
            while st.heap.peek().is_some_and(|top| top.0 != st.dnet[top.1]) {
                st.heap.pop();
            }
            match st.heap.peek() {
                Some(top) if top.0 > radius => {
                    let i = top.1;
                    add(cloud, tree, &mut st, i);
                }
                _ => break,
            }
        }
        let mut sorted = st.net.clone();
        sorted.sort_unstable();
        levels.push(sorted);
    }
    levels
}

/// Christ–David cubes from nested nets; `ℓ(Q) = ρ^k · diam`.
pub fn build_christ_cubes(cloud: &PointCloud, rho: f64, depth: u32, _seed: u64) -> Result<CubeForest> {
    if !(rho > 0.0 && rho <= 0.5) {
        return Err(invalid(format!("rho must lie in (0, 1/2], got {rho}")));
    }
    if depth < 1 {
        return Err(invalid("depth must be at least 1"));
    }
    let tree = cloud.kdtree();
    let diam = cloud.diameter_with(&tree);
    let scale = if diam > 0.0 { diam } else { cloud.resolution() };
    if cloud.len() > 1 && 5.0 * rho.powi(depth as i32) * diam < cloud.resolution() {
        return Err(invalid(format!(
            "depth {depth} resolves scales 5*rho^depth*diam = {} below the resolution {}",
            5.0 * rho.powi(depth as i32) * diam,
            cloud.resolution()
        )));
    }
    let levels = nested_nets(cloud, &tree, rho, scale, depth);
    if (levels.len() as u32) < depth + 1 {
        log::warn!(
            "nets contain every point at level {}; truncating depth {depth} to {}",
            levels.len() - 1,
            levels.len() - 1
        );
    }

    // parent net point of each level-(k+1) net point
    let mut cubes: Vec<ChristCube> = Vec::new();
    let mut by_level: Vec<Vec<usize>> = Vec::new();
    let mut id_of_net: Vec<std::collections::HashMap<usize, usize>> = Vec::new();
    for (k, net) in levels.iter().enumerate() {
        let mut ids = Vec::with_capacity(net.len());
        let mut map = std::collections::HashMap::with_capacity(net.len());
        let parent_lookup = if k > 0 {
            let prev = &levels[k - 1];
            let coords: Vec<f64> = prev.iter().flat_map(|&i| cloud.point(i).iter().copied()).collect();
            Some((KdTree::new(&coords, cloud.n()), prev))
        } else {
            None
        };
        for &i in net {
            let id = cubes.len();
            let parent = parent_lookup.as_ref().map(|(t, prev)| {
                let (j, _) = t.nearest(cloud.point(i)).unwrap();
                id_of_net[k - 1][&prev[j]]
            });
            if let Some(p) = parent {
                cubes[p].children.push(id);
            }
            cubes.push(ChristCube {
                id,
                level: k as u32,
                center_index: i,
                center: cloud.point(i).to_vec(),
                size: rho.powi(k as i32) * scale,
                parent,
                children: Vec::new(),
                members: Vec::new(),
            });
            ids.push(id);
            map.insert(i, id);
        }
        by_level.push(ids);
        id_of_net.push(map);
    }

    // every point joins its nearest deepest-level net point, then climbs
    let deepest = levels.len() - 1;
    let coords: Vec<f64> = levels[deepest].iter().flat_map(|&i| cloud.point(i).iter().copied()).collect();
    let leaf_tree = KdTree::new(&coords, cloud.n());
    let mut point_cube = vec![vec![0usize; cloud.len()]; levels.len()];
    for i in 0..cloud.len() {
        let (j, _) = leaf_tree.nearest(cloud.point(i)).unwrap();
        let mut c = id_of_net[deepest][&levels[deepest][j]];
        for k in (0..=deepest).rev() {
            point_cube[k][i] = c;
            cubes[c].members.push(i);
            if let Some(p) = cubes[c].parent {
                c = p;
            }
        }
    }

    // c0: largest c with B(ζ, c ℓ) ∩ cloud ⊆ Q, capped at 1
    let mut c0 = 1.0f64;
    for q in &cubes {
        let k = q.level as usize;
        for j in tree.within(&q.center, q.size) {
            if point_cube[k][j] != q.id {
                c0 = c0.min(dist(&q.center, cloud.point(j)) / q.size);
            }
        }
    }

    Ok(CubeForest { rho, c0_observed: c0, diam, levels, cubes, by_level, point_cube })
}
