//! End-to-end run: forest, Frostmann measure, coronization, Main Lemma
//! checks, criterion labelings and comparisons, written to an output
//! directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::beta::BetaParams;
use crate::compare::{compare_on_forest, CompareParams, ComparisonReport};
use crate::corona::{build_coronization, verify_main_lemma, MainLemmaReport, VerifyParams, WhitneyParams};
use crate::criteria::{CriterionKind, CriterionParams};
use crate::cubes::{build_christ_cubes, build_dyadic_index, DyadicGrid};
use crate::error::{invalid, Error, Result};
use crate::frostmann::run_frostmann;
use crate::pointset::{load_cloud, read_header, PointCloud};

fn d_rho() -> f64 {
    0.5
}
fn d_tau() -> f64 {
    0.05
}
fn d_c0() -> f64 {
    5.0
}
fn d_criteria() -> String {
    "bwgl".into()
}
fn d_epsilon() -> f64 {
    0.05
}
fn d_eta() -> f64 {
    0.25
}
fn d_m_factor() -> f64 {
    8.0
}
fn d_samples() -> usize {
    200
}
fn d_criteria_c0() -> f64 {
    2.0
}
fn d_theta() -> f64 {
    0.5
}
fn d_max_planes() -> usize {
    2
}
fn d_a() -> f64 {
    3.0
}
fn d_p() -> f64 {
    2.0
}
fn d_divisor() -> usize {
    4
}

/// Run configuration; JSON keys are the command-line flag names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Config {
    pub cloud: PathBuf,
    pub d: usize,
    #[serde(default = "d_rho")]
    pub rho: f64,
    pub depth: u32,
    #[serde(default = "d_tau")]
    pub tau: f64,
    #[serde(default = "d_c0")]
    pub c0: f64,
    #[serde(default = "d_criteria")]
    pub criteria: String,
    #[serde(default = "d_epsilon")]
    pub epsilon: f64,
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_eta")]
    pub eta: f64,
    #[serde(default = "d_m_factor")]
    pub m_factor: f64,
    /// Frostmann leaf level; chosen from the scales when absent.
    #[serde(default)]
    pub m: Option<u32>,
    /// Ambient dimension and resolution; read from the cloud header when absent.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub resolution: Option<f64>,
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default)]
    pub max_tops: Option<usize>,
    #[serde(default = "d_divisor")]
    pub spacing_divisor: usize,
    #[serde(default = "d_criteria_c0")]
    pub criteria_c0: f64,
    #[serde(default = "d_theta")]
    pub theta: f64,
    #[serde(default = "d_max_planes")]
    pub max_planes: usize,
    #[serde(default = "d_a")]
    pub a: f64,
    #[serde(default = "d_p")]
    pub p: f64,
}

impl Config {
    pub fn new(cloud: impl Into<PathBuf>, d: usize, depth: u32, out: impl Into<PathBuf>) -> Self {
        Self {
            cloud: cloud.into(),
            d,
            rho: d_rho(),
            depth,
            tau: d_tau(),
            c0: d_c0(),
            criteria: d_criteria(),
            epsilon: d_epsilon(),
            out: out.into(),
            seed: 0,
            eta: d_eta(),
            m_factor: d_m_factor(),
            m: None,
            n: None,
            resolution: None,
            samples: d_samples(),
            max_tops: None,
            spacing_divisor: d_divisor(),
            criteria_c0: d_criteria_c0(),
            theta: d_theta(),
            max_planes: d_max_planes(),
            a: d_a(),
            p: d_p(),
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn criterion_list(&self) -> Result<Vec<CriterionParams>> {
        let mut out = Vec::new();
        for name in self.criteria.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let kind: CriterionKind = name.parse()?;
            if out.iter().any(|c: &CriterionParams| c.kind == kind) {
                continue;
            }
            out.push(CriterionParams {
                kind,
                epsilon: self.epsilon,
                c0: self.criteria_c0,
                theta: self.theta,
                max_planes: self.max_planes,
                seed: self.seed,
            });
        }
        Ok(out)
    }

    fn whitney(&self) -> WhitneyParams {
        WhitneyParams { tau: self.tau, c0: self.c0, eta: self.eta }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub checks: Vec<Check>,
    pub artifacts: Vec<PathBuf>,
    pub main_lemma: MainLemmaReport,
    pub comparison: ComparisonReport,
}

impl PipelineOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

fn load(config: &Config) -> Result<PointCloud> {
    let header = read_header(&config.cloud).map_err(|e| match e {
        Error::Io(io) => Error::Parse { line: 0, msg: format!("cannot read {}: {io}", config.cloud.display()) },
        e => e,
    })?;
    let n = config.n.or(header.map(|h| h.n)).ok_or_else(|| invalid("ambient dimension unknown: pass n or add a header"))?;
    let res = config
        .resolution
        .or(header.map(|h| h.resolution))
        .ok_or_else(|| invalid("resolution unknown: pass resolution or add a header"))?;
    load_cloud(&config.cloud, n, config.d, res)
}

/// Smallest leaf level whose cells are finer than the smallest related
/// dyadic size, limited to what the resolution supports.
pub fn auto_leaf_level(cloud: &PointCloud, rho: f64, depth: u32, diam: f64) -> u32 {
    let grid = DyadicGrid::bounding(cloud);
    let related = rho.powi(depth as i32 + 1) * diam;
    let mut m = 0u32;
    while m < 40 && grid.side_at(m as i32) >= related {
        m += 1;
    }
    let mut max = 0u32;
    while max < 40 && grid.side_at(max as i32 + 1) >= cloud.resolution() / 4.0 {
        max += 1;
    }
    m.min(max)
}

fn write(path: &Path, body: &str, artifacts: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(path, body)?;
    artifacts.push(path.to_path_buf());
    Ok(())
}

fn level_csv(rows: &[(u32, f64)]) -> String {
    let mut s = String::from("level,value\n");
    for (k, v) in rows {
        s.push_str(&format!("{k},{v:.12e}\n"));
    }
    s
}

fn histogram_csv(values: &[f64], bins: usize) -> String {
    let mut s = String::from("log10_lo,log10_hi,count\n");
    let logs: Vec<f64> = values.iter().filter(|v| **v > 0.0).map(|v| v.log10()).collect();
    if logs.is_empty() {
        return s;
    }
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / bins as f64).max(1e-9);
    let mut counts = vec![0usize; bins];
    for v in logs {
        counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
    }
    for (i, c) in counts.iter().enumerate() {
        s.push_str(&format!("{:.6},{:.6},{c}\n", lo + i as f64 * width, lo + (i + 1) as f64 * width));
    }
    s
}

fn pretty(v: &impl Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

pub fn run_pipeline(config: &Config) -> Result<PipelineOutcome> {
    let cloud = load(config)?;
    let wp = config.whitney();
    wp.validate(cloud.n())?;
    let criteria = config.criterion_list()?;
    let beta = BetaParams::new(config.a, config.p, config.d)?;
    for c in &criteria {
        c.validate()?;
    }
    fs::create_dir_all(config.out.join("plots"))?;

    let forest = build_christ_cubes(&cloud, config.rho, config.depth, config.seed)?;
    let m = config.m.unwrap_or_else(|| auto_leaf_level(&cloud, config.rho, config.depth, forest.diam));
    let index = build_dyadic_index(&cloud, m)?;
    let fr = run_frostmann(&index, config.d, m)?;
    let audit = fr.audit();
    let corona = build_coronization(&forest, &fr, config.m_factor, config.depth)?;
    let vp = VerifyParams {
        whitney: wp,
        spacing_divisor: config.spacing_divisor,
        samples: config.samples,
        seed: config.seed,
        max_tops: config.max_tops,
    };
    let lemma = verify_main_lemma(&corona, &forest, &cloud, &fr, &vp)?;
    let cp = CompareParams { rho: config.rho, depth: config.depth, beta, criteria, seed: config.seed };
    let comparison = compare_on_forest(&forest, &cloud, &cp)?;

    let n = cloud.n();
    let partition = corona.membership_counts(&forest).iter().all(|&k| k == 1);
    let mut checks = vec![
        Check {
            name: "frostmann_bounds".into(),
            passed: audit.passed(),
            detail: format!(
                "upper {}/{} stop {}/{} decay {}/{}",
                audit.upper_violations,
                audit.pairs_checked,
                audit.stop_violations,
                audit.stop_checked,
                audit.decay_violations,
                audit.decay_checked
            ),
        },
        Check { name: "tree_partition".into(), passed: partition, detail: format!("{} trees", corona.trees.len()) },
        Check {
            name: "containment".into(),
            passed: lemma.containment_ok(),
            detail: format!(
                "uncovered {} escaping {}",
                lemma.tops.iter().map(|t| t.uncovered_points).sum::<usize>(),
                lemma.tops.iter().map(|t| t.escaping_cubes).sum::<usize>()
            ),
        },
        Check {
            name: "whitney_like".into(),
            passed: lemma.corrected_violations() == 0,
            detail: format!(
                "corrected violations {}; strict two-sided bound violated by {}",
                lemma.corrected_violations(),
                lemma.strict_violations()
            ),
        },
        Check {
            name: "closeness".into(),
            passed: lemma.closeness_max() <= 3.0 * (n as f64).sqrt(),
            detail: format!("max ratio {:.6}", lemma.closeness_max()),
        },
        Check { name: "report_ratios".into(), passed: comparison.ratios_consistent(), detail: String::new() },
        Check { name: "level_sums".into(), passed: comparison.levels_consistent(), detail: String::new() },
    ];
    checks.iter_mut().for_each(|c| c.detail = c.detail.trim().to_string());

    let run = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "leaf_level": m,
        "points": cloud.len(),
    });
    let out = &config.out;
    let mut artifacts = Vec::new();
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    write(&out.join("metadata.json"), &pretty(&json!({ "timestamp": stamp, "run": run }))?, &mut artifacts)?;
    write(&out.join("forest.json"), &pretty(&forest.to_json(false))?, &mut artifacts)?;
    let mut frost = fr.to_json(lemma.content);
    frost["audit"] = serde_json::to_value(&audit)?;
    write(&out.join("frostmann.json"), &pretty(&frost)?, &mut artifacts)?;
    let lemma_json: Value = json!({
        "M": corona.m_factor,
        "k0": corona.k0,
        "packing_ratio": lemma.packing_ratio,
        "packing_sum": lemma.packing_sum,
        "content": lemma.content,
        "tops_total": lemma.tops_total,
        "tops": lemma.tops,
        "checks": checks,
    });
    write(&out.join("main_lemma.json"), &pretty(&lemma_json)?, &mut artifacts)?;
    write(&out.join("comparison.json"), &pretty(&json!({ "metadata": run, "report": comparison }))?, &mut artifacts)?;
    for l in &comparison.labels {
        write(&out.join(format!("labels_{}.csv", l.params.kind.name())), &l.to_csv(), &mut artifacts)?;
    }
    let plots = out.join("plots");
    write(&plots.join("beta_by_level.csv"), &level_csv(&comparison.beta_by_level), &mut artifacts)?;
    for (k, rows) in &comparison.criterion_by_level {
        write(&plots.join(format!("{k}_by_level.csv")), &level_csv(rows), &mut artifacts)?;
    }
    let ratios: Vec<f64> = lemma.tops.iter().flat_map(|t| t.ar_ratios.iter().copied()).collect();
    write(&plots.join("ar_ratio_histogram.csv"), &histogram_csv(&ratios, 20), &mut artifacts)?;

    for c in checks.iter().filter(|c| !c.passed) {
        log::warn!("check {} failed: {}", c.name, c.detail);
    }
    Ok(PipelineOutcome { checks, artifacts, main_lemma: lemma, comparison })
}

/// Maps an error to the check name reported on exit.
pub fn error_name(e: &Error) -> &'static str {
    match e {
        Error::TauTooLarge { .. } => "tau_too_large",
        Error::IncompatibleScales { .. } => "incompatible_scales",
        Error::Parse { .. } | Error::Json(_) => "parse_error",
        Error::Io(_) => "io_error",
        _ => "invalid_input",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointset::save_cloud;
    use crate::shapes::{generate, Shape, ShapeSpec};

    fn segment_config(dir: &Path) -> Config {
        let c = generate(&ShapeSpec::new(Shape::Segment).with_points(257)).unwrap();
        let path = dir.join("segment.txt");
        save_cloud(&c, &path).unwrap();
        Config { samples: 50, ..Config::new(path, 1, 3, dir.join("out")) }
    }

    #[test]
    fn config_keys_are_flag_names() {
        let j = serde_json::to_value(Config::new("a.txt", 1, 3, "out")).unwrap();
        for key in ["cloud", "d", "rho", "depth", "tau", "c0", "criteria", "epsilon", "out", "criteria-c0", "max-planes"] {
            assert!(j.get(key).is_some(), "{key}");
        }
        assert!(serde_json::from_str::<Config>(r#"{"cloud":"a","d":1,"depth":2,"out":"o","bogus":1}"#).is_err());
    }

    #[test]
    fn segment_demo_runs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = segment_config(dir.path());
        let out = run_pipeline(&cfg).unwrap();
        assert!(out.passed(), "{:?}", out.checks);
        let top: Vec<_> = fs::read_dir(&cfg.out).unwrap().filter_map(|e| e.ok()).filter(|e| e.path().is_file()).collect();
        assert_eq!(top.len(), 6);
    }

    #[test]
    fn tau_violation_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = Config { tau: 0.2, ..segment_config(dir.path()) };
        let e = run_pipeline(&cfg).unwrap_err();
        assert_eq!(error_name(&e), "tau_too_large");
        assert!(e.to_string().contains("tau_too_large"));
    }

    #[test]
    fn missing_cloud_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = Config::new(dir.path().join("nope.txt"), 1, 3, dir.path().join("out"));
        assert_eq!(error_name(&run_pipeline(&cfg).unwrap_err()), "parse_error");
    }
}
