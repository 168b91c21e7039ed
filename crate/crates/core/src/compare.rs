//! Both sides of the comparability statements for a root cube and its
//! children.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::beta::{beta_records, profile_from_records, BetaOptions, BetaParams, BetaRecord};
use crate::criteria::{carleson_by_level, carleson_sum, classify, CriterionKind, CriterionParams, QPLabeling};
use crate::cubes::{build_christ_cubes, CubeForest};
use crate::error::{invalid, Result};
use crate::geometry::pow2_at_least;
use crate::pointset::{dyadic_content, PointCloud};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareParams {
    pub rho: f64,
    pub depth: u32,
    pub beta: BetaParams,
    pub criteria: Vec<CriterionParams>,
    pub seed: u64,
}

impl CompareParams {
    pub fn new(d: usize, depth: u32) -> Self {
        Self {
            rho: 0.5,
            depth,
            beta: BetaParams { a: 3.0, p: 2.0, d },
            criteria: vec![CriterionParams::new(CriterionKind::Bwgl)],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeComparison {
    pub cube: usize,
    pub level: u32,
    pub size: f64,
    pub members: usize,
    /// Dyadic content of the members at leaf scale, standing in for `H^d(R)`.
    pub content_hd: f64,
    pub beta_total: f64,
    pub bwgl_sum: Option<f64>,
    pub criterion_sums: BTreeMap<String, f64>,
    /// `beta_total / (content_hd + sum)` per criterion.
    pub ratios: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub params: CompareParams,
    pub cubes: Vec<CubeComparison>,
    /// `(level, Σ β² ℓ^d)` below the root.
    pub beta_by_level: Vec<(u32, f64)>,
    /// `(level, Σ_bad ℓ^d)` below the root, per criterion.
    pub criterion_by_level: BTreeMap<String, Vec<(u32, f64)>>,
    #[serde(skip)]
    pub labels: Vec<QPLabeling>,
    #[serde(skip)]
    pub beta: Vec<BetaRecord>,
}

impl ComparisonReport {
    /// Every stored ratio equals the one recomputed from stored components.
    pub fn ratios_consistent(&self) -> bool {
        self.cubes.iter().all(|c| {
            c.ratios.iter().all(|(k, &r)| c.criterion_sums.get(k).is_some_and(|&s| r == c.beta_total / (c.content_hd + s)))
        })
    }

    /// Per-level sums are non-negative and add up to the root sums.
    pub fn levels_consistent(&self) -> bool {
        let Some(root) = self.cubes.first() else {
            return true;
        };
        self.criterion_by_level.iter().all(|(k, rows)| {
            let total: f64 = rows.iter().map(|r| r.1).sum();
            let want = root.criterion_sums[k];
            rows.iter().all(|r| r.1 >= 0.0) && (total - want).abs() <= 1e-12 * want.max(1.0)
        })
    }

    pub fn root(&self) -> &CubeComparison {
        &self.cubes[0]
    }
}

pub fn compare_tst(cloud: &PointCloud, params: &CompareParams) -> Result<ComparisonReport> {
    let forest = build_christ_cubes(cloud, params.rho, params.depth, params.seed)?;
    compare_on_forest(&forest, cloud, params)
}

/// As [`compare_tst`] on an already built forest.
pub fn compare_on_forest(forest: &CubeForest, cloud: &PointCloud, params: &CompareParams) -> Result<ComparisonReport> {
    let d = params.beta.d;
    if d != cloud.d() {
        return Err(invalid(format!("beta dimension {d} differs from the cloud dimension {}", cloud.d())));
    }
    let mut opts = BetaOptions::default();
    opts.search.seed = params.seed;
    let ids: Vec<usize> = (0..forest.cubes.len()).collect();
    let beta = beta_records(forest, cloud, &ids, &params.beta, &opts)?;
    let labels = params
        .criteria
        .iter()
        .map(|c| classify(forest, cloud, &CriterionParams { seed: params.seed, ..*c }))
        .collect::<Result<Vec<_>>>()?;
    let min_cell = pow2_at_least(cloud.resolution());

    let mut roots = vec![0usize];
    roots.extend_from_slice(forest.level(1.min(forest.depth())));
    roots.dedup();
    let mut cubes = Vec::with_capacity(roots.len());
    for &r in &roots {
        let q = forest.cube(r);
        let content_hd = dyadic_content(&cloud.subset(&q.members)?, d, min_cell)?;
        let beta_total = profile_from_records(forest, r, &params.beta, &beta).total;
        let mut criterion_sums = BTreeMap::new();
        let mut ratios = BTreeMap::new();
        for l in &labels {
            let s = carleson_sum(l, forest, r, d).sum;
            let key = l.params.kind.name().to_string();
            ratios.insert(key.clone(), beta_total / (content_hd + s));
            criterion_sums.insert(key, s);
        }
        cubes.push(CubeComparison {
            cube: r,
            level: q.level,
            size: q.size,
            members: q.members.len(),
            content_hd,
            beta_total,
            bwgl_sum: criterion_sums.get("bwgl").copied(),
            criterion_sums,
            ratios,
        });
    }

    let mut beta_by_level: Vec<(u32, f64)> = (0..=forest.depth()).map(|k| (k, 0.0)).collect();
    for b in &beta {
        beta_by_level[b.level as usize].1 += b.contribution;
    }
    let criterion_by_level =
        labels.iter().map(|l| (l.params.kind.name().to_string(), carleson_by_level(l, forest, 0, d))).collect();
    Ok(ComparisonReport { params: params.clone(), cubes, beta_by_level, criterion_by_level, labels, beta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::{generate, Shape, ShapeSpec};

    #[test]
    fn segment_sides_agree() {
        let c = generate(&ShapeSpec::new(Shape::Segment).with_points(513)).unwrap();
        let forest = build_christ_cubes(&c, 0.5, 4, 0).unwrap();
        let rep = compare_on_forest(&forest, &c, &CompareParams::new(1, 4)).unwrap();
        let root = rep.root();
        // Only cubes whose enlarged ball runs past an endpoint are bad.
        for v in rep.labels[0].verdicts.iter().filter(|v| !v.good) {
            let q = forest.cube(v.cube);
            let reach = 2.0 * q.size;
            assert!(q.center[0] - reach < 0.0 || q.center[0] + reach > 1.0, "{v:?}");
        }
        assert!(root.bwgl_sum.unwrap() > 0.0);
        let r = root.beta_total / root.content_hd;
        assert!((0.2..=5.0).contains(&r), "{r}");
        assert!(rep.ratios_consistent());
        assert!(rep.levels_consistent());
        assert!(rep.cubes.len() >= 3);
    }

    #[test]
    fn cross_baup_below_bwgl() {
        let c = generate(&ShapeSpec::new(Shape::Cross).with_points(257)).unwrap();
        let mut p = CompareParams::new(1, 4);
        p.criteria = vec![
            CriterionParams::new(CriterionKind::Bwgl),
            CriterionParams { max_planes: 2, ..CriterionParams::new(CriterionKind::Baup) },
        ];
        let rep = compare_tst(&c, &p).unwrap();
        let root = rep.root();
        assert!(root.criterion_sums["baup"] < root.criterion_sums["bwgl"]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let c = generate(&ShapeSpec::new(Shape::Segment).with_points(65)).unwrap();
        assert!(compare_tst(&c, &CompareParams::new(2, 2)).is_err());
    }
}
