//! Good/bad cube labelings for the quantitative properties BWGL, LS, LCV,
//! BAUP and BP, their Carleson sums and a continuity probe.

mod continuity;
pub mod gap;
pub mod pairs;
pub mod projection;

pub use continuity::{continuity_probe, ContinuityProbe, ProbeOptions, ProbeOutcome};

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::beta::Plane;
use crate::cubes::{cube_ball, CubeForest};
use crate::error::{invalid, Error, Result};
use crate::geometry::{pow2_at_least, Ball};
use crate::pointset::PointCloud;
use crate::spatial::KdTree;
use pairs::{scan_pairs, scan_set, PairRule};

pub const PAIR_CAP: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionKind {
    Bwgl,
    Ls,
    Lcv,
    Baup,
    Bp,
}

impl CriterionKind {
    pub const ALL: [CriterionKind; 5] =
        [CriterionKind::Bwgl, CriterionKind::Ls, CriterionKind::Lcv, CriterionKind::Baup, CriterionKind::Bp];

    pub fn name(self) -> &'static str {
        match self {
            CriterionKind::Bwgl => "bwgl",
            CriterionKind::Ls => "ls",
            CriterionKind::Lcv => "lcv",
            CriterionKind::Baup => "baup",
            CriterionKind::Bp => "bp",
        }
    }

    /// Ball used for a cube: `C0 B_Q` for the bilateral criteria, `B_Q`
    /// otherwise.
    fn inflated(self) -> bool {
        matches!(self, CriterionKind::Bwgl | CriterionKind::Baup)
    }
}

impl FromStr for CriterionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| invalid(format!("unknown criterion '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionParams {
    pub kind: CriterionKind,
    pub epsilon: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    pub theta: f64,
    pub max_planes: usize,
    pub seed: u64,
}

impl CriterionParams {
    pub fn new(kind: CriterionKind) -> Self {
        Self { kind, epsilon: 0.05, c0: 2.0, theta: 0.5, max_planes: 2, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            CriterionKind::Bp => {
                if !(self.theta > 0.0 && self.theta <= 1.0) {
                    return Err(invalid(format!("theta must lie in (0, 1], got {}", self.theta)));
                }
            }
            _ => {
                if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
                    return Err(invalid(format!("epsilon must be positive, got {}", self.epsilon)));
                }
            }
        }
        if self.kind.inflated() && !(self.c0 >= 1.0) {
            return Err(invalid(format!("C0 must be at least 1, got {}", self.c0)));
        }
        if self.kind == CriterionKind::Baup && self.max_planes == 0 {
            return Err(invalid("max_planes must be at least 1"));
        }
        Ok(())
    }

    fn to_json(self) -> Value {
        match self.kind {
            CriterionKind::Bwgl => json!({ "epsilon": self.epsilon, "C0": self.c0 }),
            CriterionKind::Baup => json!({ "epsilon": self.epsilon, "C0": self.c0, "max_planes": self.max_planes }),
            CriterionKind::Ls | CriterionKind::Lcv => json!({ "epsilon": self.epsilon }),
            CriterionKind::Bp => json!({ "theta": self.theta }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Witness {
    /// Nothing in the ball; good by convention.
    Vacuous,
    /// Pair criteria with no violating pair.
    None,
    Planes(Vec<Plane>),
    Pair { y: usize, z: usize, distance: f64 },
    Projection { plane: Plane, content: f64 },
}

impl Witness {
    fn summary(&self) -> String {
        match self {
            Witness::Vacuous => "vacuous".into(),
            Witness::None => "none".into(),
            Witness::Planes(p) => format!("planes={}", p.len()),
            Witness::Pair { y, z, distance } => format!("pair={y}:{z} dist={distance:.6e}"),
            Witness::Projection { content, .. } => format!("projection content={content:.6e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub cube: usize,
    pub level: u32,
    pub good: bool,
    /// Gap for BWGL/BAUP, worst pair ratio for LS/LCV, best `content / r^d`
    /// for BP.
    pub value: f64,
    /// `false` for verdicts that rest on an incomplete search.
    pub certified: bool,
    pub witness: Witness,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QPLabeling {
    pub params: CriterionParams,
    pub verdicts: Vec<Verdict>,
}

impl QPLabeling {
    /// Every cube of the forest labeled the same way; for tests and for
    /// pruning experiments.
    pub fn uniform(forest: &CubeForest, params: CriterionParams, good: bool) -> Self {
        let verdicts = forest
            .cubes
            .iter()
            .map(|q| Verdict { cube: q.id, level: q.level, good, value: 0.0, certified: false, witness: Witness::None })
            .collect();
        Self { params, verdicts }
    }

    pub fn is_bad(&self, cube: usize) -> bool {
        self.verdicts.get(cube).is_some_and(|v| !v.good)
    }

    pub fn is_good(&self, cube: usize) -> bool {
        self.verdicts.get(cube).is_some_and(|v| v.good)
    }

    pub fn bad_ids(&self) -> Vec<usize> {
        self.verdicts.iter().filter(|v| !v.good).map(|v| v.cube).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("cube_id,level,verdict,gap_or_value,witness_summary\n");
        for v in &self.verdicts {
            let verdict = if v.good { "good" } else { "bad" };
            let _ = writeln!(s, "{},{},{},{:.12e},{}", v.cube, v.level, verdict, v.value, v.witness.summary());
        }
        s
    }

    /// Re-evaluates stored witnesses and returns how many fail: bad pair
    /// verdicts must still violate, good plane verdicts must still fit.
    pub fn recheck(&self, forest: &CubeForest, cloud: &PointCloud) -> Result<usize> {
        let tree = cloud.kdtree();
        let p = self.params;
        let mut failures = 0;
        for v in &self.verdicts {
            let q = forest.cube(v.cube);
            match (&v.witness, v.good) {
                (Witness::Pair { y, z, .. }, false) => {
                    let rule = if p.kind == CriterionKind::Ls { PairRule::Reflection } else { PairRule::Midpoint };
                    let w = rule.image(cloud.point(*y), cloud.point(*z));
                    let dist = tree.nearest(&w).map_or(f64::INFINITY, |(_, d)| d);
                    if dist < p.epsilon * q.size {
                        failures += 1;
                    }
                }
                (Witness::Planes(planes), true) => {
                    let ball = cube_ball(q, p.c0)?;
                    let inside = tree.within(&ball.center, ball.radius);
                    let g = gap::union_gap(cloud, &tree, &inside, &ball, planes).unwrap_or(0.0);
                    if g >= p.epsilon {
                        failures += 1;
                    }
                }
                _ => {}
            }
        }
        Ok(failures)
    }
}

/// Verdict of one criterion on one ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BallVerdict {
    pub good: bool,
    pub value: f64,
    pub certified: bool,
    pub witness: Witness,
}

impl BallVerdict {
    /// Smallest factor `c` making the ball good at parameter `c ε` (or
    /// `θ / c` for BP).
    pub fn relaxation(&self, params: &CriterionParams) -> f64 {
        match params.kind {
            CriterionKind::Bp => {
                if self.value > 0.0 {
                    params.theta / self.value
                } else {
                    f64::INFINITY
                }
            }
            _ => self.value / params.epsilon,
        }
    }
}

/// Evaluates a criterion on the ball `B(center, radius)` of `cloud`. With
/// `full_scan` the pair criteria scan every pair so that `value` is the
/// exact worst ratio.
pub fn evaluate_ball(
    cloud: &PointCloud,
    tree: &KdTree,
    ball: &Ball,
    d: usize,
    params: &CriterionParams,
    seed: u64,
    full_scan: bool,
) -> BallVerdict {
    let inside = tree.within(&ball.center, ball.radius);
    if inside.is_empty() {
        log::warn!("criterion ball at {:?} holds no points; labeled good", ball.center);
        return BallVerdict { good: true, value: 0.0, certified: true, witness: Witness::Vacuous };
    }
    match params.kind {
        CriterionKind::Bwgl | CriterionKind::Baup => {
            let fit = if params.kind == CriterionKind::Bwgl {
                gap::best_single_plane(cloud, tree, &inside, ball, d, seed)
            } else {
                gap::best_union(cloud, tree, &inside, ball, d, params.max_planes, seed)
            };
            let good = fit.gap < params.epsilon;
            BallVerdict { good, value: fit.gap, certified: good, witness: Witness::Planes(fit.planes) }
        }
        CriterionKind::Ls | CriterionKind::Lcv => {
            let rule = if params.kind == CriterionKind::Ls { PairRule::Reflection } else { PairRule::Midpoint };
            let pts = scan_set(&inside, PAIR_CAP, seed);
            let scan = scan_pairs(cloud, tree, &pts, ball.radius, params.epsilon, rule, !full_scan);
            let complete = pts.len() == inside.len();
            match scan.witness {
                Some((y, z, distance)) => BallVerdict {
                    good: false,
                    value: scan.value,
                    certified: true,
                    witness: Witness::Pair { y, z, distance },
                },
                None => BallVerdict { good: true, value: scan.value, certified: complete, witness: Witness::None },
            }
        }
        CriterionKind::Bp => {
            let pts: Vec<&[f64]> = inside.iter().map(|&i| cloud.point(i)).collect();
            let min_cell = pow2_at_least(cloud.resolution().max(ball.radius / 256.0));
            let rd = ball.radius.powi(d as i32);
            let mut best: Option<(Plane, f64)> = None;
            for plane in projection::candidate_planes(&pts, cloud.n(), d, seed) {
                let c = projection::projection_content(&plane, &pts, min_cell);
                if best.as_ref().is_none_or(|(_, b)| c > *b) {
                    best = Some((plane, c));
                }
            }
            let (plane, content) = best.expect("at least one candidate plane");
            let value = content / rd;
            let good = value >= params.theta;
            BallVerdict { good, value, certified: good, witness: Witness::Projection { plane, content } }
        }
    }
}

fn cube_seed(seed: u64, id: usize) -> u64 {
    seed ^ (id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Labels every cube of the forest.
pub fn classify(forest: &CubeForest, cloud: &PointCloud, params: &CriterionParams) -> Result<QPLabeling> {
    params.validate()?;
    let d = cloud.d();
    let tree = cloud.kdtree();
    let scale = if params.kind.inflated() { params.c0 } else { 1.0 };
    let verdicts = forest
        .cubes
        .par_iter()
        .map(|q| {
            let ball = cube_ball(q, scale)?;
            let v = evaluate_ball(cloud, &tree, &ball, d, params, cube_seed(params.seed, q.id), false);
            Ok(Verdict { cube: q.id, level: q.level, good: v.good, value: v.value, certified: v.certified, witness: v.witness })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QPLabeling { params: *params, verdicts })
}

fn classify_kind(forest: &CubeForest, cloud: &PointCloud, params: &CriterionParams, kind: CriterionKind) -> Result<QPLabeling> {
    if params.kind != kind {
        return Err(invalid(format!("expected {} parameters, got {}", kind.name(), params.kind.name())));
    }
    classify(forest, cloud, params)
}

pub fn classify_bwgl(forest: &CubeForest, cloud: &PointCloud, params: &CriterionParams) -> Result<QPLabeling> {
    classify_kind(forest, cloud, params, CriterionKind::Bwgl)
}

pub fn classify_ls(forest: &CubeForest, cloud: &PointCloud, params: &CriterionParams) -> Result<QPLabeling> {
    classify_kind(forest, cloud, params, CriterionKind::Ls)
}

pub fn classify_lcv(forest: &CubeForest, cloud: &PointCloud, params: &CriterionParams) -> Result<QPLabeling> {
    classify_kind(forest, cloud, params, CriterionKind::Lcv)
}

pub fn classify_baup(forest: &CubeForest, cloud: &PointCloud, params: &CriterionParams) -> Result<QPLabeling> {
    classify_kind(forest, cloud, params, CriterionKind::Baup)
}

pub fn classify_bp(forest: &CubeForest, cloud: &PointCloud, params: &CriterionParams) -> Result<QPLabeling> {
    classify_kind(forest, cloud, params, CriterionKind::Bp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarlesonSum {
    pub sum: f64,
    pub normalized: f64,
    pub bad_cubes: usize,
}

/// `Σ ℓ(Q)^d` over the bad cubes `Q ⊆ R`, `R` included.
pub fn carleson_sum(labels: &QPLabeling, forest: &CubeForest, r: usize, d: usize) -> CarlesonSum {
    let mut sum = 0.0;
    let mut bad = 0;
    for q in forest.descendants(r) {
        if labels.is_bad(q) {
            sum += forest.cube(q).size.powi(d as i32);
            bad += 1;
        }
    }
    CarlesonSum { sum, normalized: sum / forest.cube(r).size.powi(d as i32), bad_cubes: bad }
}

/// Carleson sum of bad cubes per level below `r`.
pub fn carleson_by_level(labels: &QPLabeling, forest: &CubeForest, r: usize, d: usize) -> Vec<(u32, f64)> {
    let mut out: Vec<(u32, f64)> = (0..=forest.depth()).map(|k| (k, 0.0)).collect();
    for q in forest.descendants(r) {
        if labels.is_bad(q) {
            let c = forest.cube(q);
            out[c.level as usize].1 += c.size.powi(d as i32);
        }
    }
    out
}

pub fn sum_json(labels: &QPLabeling, s: &CarlesonSum) -> Value {
    json!({
        "criterion": labels.params.kind.name(),
        "params": labels.params.to_json(),
        "sum": s.sum,
        "normalized": s.normalized,
    })
}
