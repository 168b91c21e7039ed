use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::whitney::{skeleton_set, whitney_family, SkeletonLocator, SmoothingDistance, WhitneyParams};
use super::Coronization;
use crate::cubes::CubeForest;
use crate::error::Result;
use crate::frostmann::FrostmannResult;
use crate::geometry::point_box_max_dist;
use crate::pointset::{content_of_points, PointCloud};
use crate::spatial::KdTree;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyParams {
    pub whitney: WhitneyParams,
    pub spacing_divisor: usize,
    pub samples: usize,
    pub seed: u64,
    /// Verify a seeded sample of this many tops instead of all of them.
    pub max_tops: Option<usize>,
}

impl Default for VerifyParams {
    fn default() -> Self {
        Self { whitney: WhitneyParams::default(), spacing_divisor: 4, samples: 200, seed: 0, max_tops: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopReport {
    pub top: usize,
    pub level: u32,
    pub size: f64,
    pub cubes: usize,
    pub containment_ok: bool,
    /// Cloud points of `C0 B_T` outside every family cube.
    pub uncovered_points: usize,
    /// Family cubes leaving `2 C0 B_T`.
    pub escaping_cubes: usize,
    /// `max dist(x, Ê) / (τ d_F(x))` over cloud points in `C0 B_T`.
    pub closeness_max: f64,
    pub whitney_ok: bool,
    pub size_strict_violations: usize,
    pub size_corrected_violations: usize,
    pub ar_ratio_min: Option<f64>,
    pub ar_ratio_max: Option<f64>,
    pub ar_samples: usize,
    /// Every sampled Ahlfors ratio, for histograms.
    #[serde(skip)]
    pub ar_ratios: Vec<f64>,
    pub skeleton_weight: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MainLemmaReport {
    pub packing_sum: f64,
    pub content: f64,
    pub packing_ratio: f64,
    pub tops_total: usize,
    pub tops: Vec<TopReport>,
}

impl MainLemmaReport {
    pub fn containment_ok(&self) -> bool {
        self.tops.iter().all(|t| t.containment_ok)
    }

    pub fn whitney_ok(&self) -> bool {
        self.tops.iter().all(|t| t.whitney_ok)
    }

    pub fn strict_violations(&self) -> usize {
        self.tops.iter().map(|t| t.size_strict_violations).sum()
    }

    /// Violations of the lower bound once the half-diagonal of the parent is
    /// accounted for; zero whenever the family is built correctly.
    pub fn corrected_violations(&self) -> usize {
        self.tops.iter().map(|t| t.size_corrected_violations).sum()
    }

    pub fn closeness_max(&self) -> f64 {
        self.tops.iter().map(|t| t.closeness_max).fold(0.0, f64::max)
    }

    /// Overall Ahlfors band `(min, max)` across tops with samples.
    pub fn ar_band(&self) -> Option<(f64, f64)> {
        let lo = self.tops.iter().filter_map(|t| t.ar_ratio_min).reduce(f64::min)?;
        let hi = self.tops.iter().filter_map(|t| t.ar_ratio_max).reduce(f64::max)?;
        Some((lo, hi))
    }

    pub fn kappa_max(&self) -> f64 {
        self.tops.iter().map(|t| t.kappa).fold(1.0, f64::max)
    }
}

pub fn verify_main_lemma(
    corona: &Coronization,
    forest: &CubeForest,
    cloud: &PointCloud,
    fr: &FrostmannResult,
    params: &VerifyParams,
) -> Result<MainLemmaReport> {
    params.whitney.validate(cloud.n())?;
    let content = content_of_points(cloud.points(), &fr.grid.corner, fr.grid.side, fr.m, fr.d);
    let total = corona.trees.len();
    let chosen: Vec<usize> = match params.max_tops {
        Some(k) if k < total => {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            let mut v = sample(&mut rng, total, k).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..total).collect(),
    };
    let tree = cloud.kdtree();
    let mut tops = chosen
        .par_iter()
        .map(|&t| verify_top(corona, forest, cloud, fr, &tree, t, params))
        .collect::<Result<Vec<_>>>()?;
    tops.sort_by_key(|t| t.top);
    Ok(MainLemmaReport {
        packing_sum: corona.packing_sum,
        content,
        packing_ratio: corona.packing_sum / content,
        tops_total: total,
        tops,
    })
}

fn verify_top(
    corona: &Coronization,
    forest: &CubeForest,
    cloud: &PointCloud,
    fr: &FrostmannResult,
    tree: &KdTree,
    index: usize,
    params: &VerifyParams,
) -> Result<TopReport> {
    let region = &corona.trees[index];
    let wp = params.whitney;
    let t = forest.cube(region.top);
    let fam = whitney_family(forest, cloud, &fr.grid, region.top, &region.stops, wp)?;
    let dist_f = SmoothingDistance::new(forest, cloud, &region.stops)?;
    let locator = SkeletonLocator::new(&fam);
    let d = corona.d;

    let mut uncovered = 0;
    let mut closeness: f64 = 0.0;
    for i in tree.within(&t.center, wp.c0 * t.size) {
        let x = cloud.point(i);
        if locator.containing(x).is_empty() {
            uncovered += 1;
        }
        let ratio = locator.distance(x, d) / (wp.tau * dist_f.at(x));
        closeness = closeness.max(ratio);
    }
    let outer = 2.0 * wp.c0 * t.size * (1.0 + 1e-12);
    let escaping = (0..fam.len())
        .filter(|&i| {
            let (lo, hi) = fam.bounds(i);
            point_box_max_dist(&t.center, &lo, &hi) > outer
        })
        .count();

    let sk = skeleton_set(&fam, d, params.spacing_divisor)?;
    let sk_tree = sk.cloud.kdtree();
    let diam = sk.cloud.diameter_with(&sk_tree);
    let (r_lo, r_hi) = (4.0 * sk.spacing, diam / 2.0);
    let mut ar_min: Option<f64> = None;
    let mut ar_max: Option<f64> = None;
    let mut ar_ratios = Vec::new();
    if r_lo < r_hi && params.samples > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ (region.top as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        for _ in 0..params.samples {
            let j = rng.gen_range(0..sk.cloud.len());
            let r = rng.gen_range(r_lo.ln()..r_hi.ln()).exp();
            let x = sk.cloud.point(j);
            let w: f64 = sk_tree.within(x, r).into_iter().map(|k| sk.cloud.weight(k)).sum();
            let ratio = w / r.powi(d as i32);
            ar_min = Some(ar_min.map_or(ratio, |m| m.min(ratio)));
            ar_max = Some(ar_max.map_or(ratio, |m| m.max(ratio)));
            ar_ratios.push(ratio);
        }
    }

    Ok(TopReport {
        top: region.top,
        level: t.level,
        size: t.size,
        cubes: fam.len(),
        containment_ok: uncovered == 0 && escaping == 0,
        uncovered_points: uncovered,
        escaping_cubes: escaping,
        closeness_max: closeness,
        whitney_ok: fam.size_strict_violations == 0,
        size_strict_violations: fam.size_strict_violations,
        size_corrected_violations: fam.size_corrected_violations,
        ar_ratio_min: ar_min,
        ar_ratio_max: ar_max,
        ar_samples: ar_ratios.len(),
        ar_ratios,
        skeleton_weight: sk.total_weight(),
        kappa: fam.neighbor_kappa(wp.eta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corona::build_coronization;
    use crate::cubes::{build_christ_cubes, build_dyadic_index};
    use crate::frostmann::run_frostmann;

    fn segment(k: usize) -> PointCloud {
        PointCloud::new((0..k).map(|i| vec![i as f64 / (k - 1) as f64, 0.3]).collect(), 2, 1, 1.0 / (k - 1) as f64)
            .unwrap()
    }

    fn run(c: &PointCloud, depth: u32, m: u32, params: &VerifyParams) -> MainLemmaReport {
        let forest = build_christ_cubes(c, 0.5, depth.max(1), 0).unwrap().truncated(depth);
        let idx = build_dyadic_index(c, m).unwrap();
        let fr = run_frostmann(&idx, 1, m).unwrap();
        let cor = build_coronization(&forest, &fr, 8.0, depth).unwrap();
        verify_main_lemma(&cor, &forest, c, &fr, params).unwrap()
    }

    #[test]
    fn segment_passes_exact_checks() {
        let c = segment(1025);
        let rep = run(&c, 4, 10, &VerifyParams::default());
        assert!(rep.containment_ok());
        assert!(rep.closeness_max() <= 3.0 * 2f64.sqrt());
        for t in &rep.tops {
            assert_eq!(t.size_corrected_violations, 0);
        }
        let (lo, hi) = rep.ar_band().unwrap();
        assert!(lo > 0.05 && hi < 20.0, "{lo} {hi}");
        assert!(rep.packing_ratio > 1.0 && rep.packing_ratio < 4.0);
    }

    #[test]
    fn single_cube_corona() {
        let c = segment(129);
        let rep = run(&c, 0, 7, &VerifyParams::default());
        assert_eq!(rep.tops.len(), 1);
        assert!(rep.containment_ok());
        assert!((rep.packing_ratio - 1.0).abs() < 0.05);
    }

    #[test]
    fn sampling_tops_is_deterministic() {
        let c = segment(513);
        let p = VerifyParams { max_tops: Some(3), seed: 9, ..VerifyParams::default() };
        let a = run(&c, 3, 9, &p);
        let b = run(&c, 3, 9, &p);
        assert_eq!(a.tops.len(), 3);
        assert_eq!(a, b);
    }
}
