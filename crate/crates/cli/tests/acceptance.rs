//! Acceptance gate. Each test prints one `criterion N [PASS|FAIL]` line
//! before asserting, so `cargo test --test acceptance -- --nocapture`
//! gives the whole scorecard.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use msgeo_core::beta::{beta_records, BetaOptions, BetaParams};
use msgeo_core::corona::VerifyParams;
use msgeo_core::criteria::{carleson_sum, continuity_probe, ProbeOptions};
use msgeo_core::frostmann::{bad_packing, run_frostmann};
use msgeo_core::geometry::pow2_at_least;
use msgeo_core::pointset::save_cloud;
use msgeo_core::{
    build_christ_cubes, build_coronization, build_dyadic_index, classify, compare_tst, dyadic_content, generate,
    verify_main_lemma, CompareParams, CriterionKind, CriterionParams, DyadicGrid, PointCloud, Shape, ShapeSpec,
    WhitneyParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(n: u32, pass: bool, detail: &str) {
    println!("criterion {n:>2} [{}] {detail}", if pass { "PASS" } else { "FAIL" });
}

fn shape(s: Shape) -> PointCloud {
    generate(&ShapeSpec::new(s)).unwrap()
}

fn cantor(g: u32) -> PointCloud {
    generate(&ShapeSpec::new(Shape::Cantor4).with_depth(g)).unwrap()
}

fn square(k: usize) -> PointCloud {
    let s = (k - 1) as f64;
    let pts = (0..k * k).map(|i| vec![(i / k) as f64 / s, (i % k) as f64 / s]).collect();
    PointCloud::new(pts, 2, 1, 1.0 / s).unwrap()
}

fn jittered_line(k: usize, amplitude: f64, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = (0..k).map(|i| vec![i as f64 / (k - 1) as f64, amplitude * rng.gen_range(-1.0..1.0)]).collect();
    PointCloud::new(pts, 2, 1, 1.0 / (k - 1) as f64).unwrap()
}

/// Finest dyadic level whose cells are no larger than the resolution.
fn leaf_level(c: &PointCloud) -> u32 {
    let grid = DyadicGrid::bounding(c);
    (0..30).find(|&m| grid.side_at(m as i32) <= c.resolution()).unwrap_or(30)
}

fn test_clouds() -> Vec<(&'static str, PointCloud)> {
    vec![
        ("segment", shape(Shape::Segment)),
        ("square", square(65)),
        ("cantor4", cantor(5)),
        ("graph", shape(Shape::LipschitzGraph)),
    ]
}

#[test]
fn criterion_01_frostmann_exactness() {
    // (name, cloud, Frostmann dimension); the measure also runs at d = n
    let mut clouds = vec![
        ("segment", shape(Shape::Segment), 1),
        ("square d=1", square(65), 1),
        ("square d=2", square(65), 2),
    ];
    for g in 1..=5 {
        clouds.push((["cantor4 g1", "cantor4 g2", "cantor4 g3", "cantor4 g4", "cantor4 g5"][g as usize - 1], cantor(g), 1));
    }
    clouds.push(("graph", shape(Shape::LipschitzGraph), 1));
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, c, d) in &clouds {
        let t = Instant::now();
        let m = leaf_level(c);
        let idx = build_dyadic_index(c, m).unwrap();
        let fr = run_frostmann(&idx, *d, m).unwrap();
        let a = fr.audit();
        let secs = t.elapsed().as_secs_f64();
        let ok = a.upper_violations == 0 && a.stop_violations == 0 && secs < 10.0 && m <= 10;
        pass &= ok;
        notes.push(format!(
            "{name}: m={m} upper {}/{} stop {}/{} {secs:.2}s",
            a.upper_violations, a.pairs_checked, a.stop_violations, a.stop_checked
        ));
    }
    verdict(1, pass, &format!("Frostmann bounds; {}", notes.join("; ")));
    assert!(pass);
}

#[test]
fn criterion_02_bad_packing_stability() {
    let ratio = |g: u32| {
        let c = cantor(g);
        let m = leaf_level(&c);
        let fr = run_frostmann(&build_dyadic_index(&c, m).unwrap(), 1, m).unwrap();
        let content = dyadic_content(&c, 1, pow2_at_least(c.resolution())).unwrap();
        bad_packing(&fr, content).1
    };
    let (r4, r5) = (ratio(4), ratio(5));
    let factor = (r4 / r5).max(r5 / r4);
    let pass = factor <= 1.5;
    verdict(2, pass, &format!("cantor4 Bad packing ratio g4 {r4:.4} g5 {r5:.4} factor {factor:.3} (limit 1.5)"));
    assert!(pass);
}

#[test]
fn criterion_03_main_lemma_exact() {
    let clouds = vec![
        ("segment", shape(Shape::Segment)),
        ("graph", shape(Shape::LipschitzGraph)),
        ("circle", shape(Shape::Circle)),
        ("cantor4", cantor(4)),
        ("cross", shape(Shape::Cross)),
        ("square", square(65)),
    ];
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, c) in &clouds {
        let depth = 4;
        let forest = build_christ_cubes(c, 0.5, depth, 0).unwrap();
        let m = leaf_level(c);
        let fr = run_frostmann(&build_dyadic_index(c, m).unwrap(), c.d(), m).unwrap();
        let cor = build_coronization(&forest, &fr, 8.0, depth).unwrap();
        let rep = verify_main_lemma(&cor, &forest, c, &fr, &VerifyParams::default()).unwrap();
        let bound = 3.0 * (c.n() as f64).sqrt();
        let ok = rep.containment_ok() && rep.strict_violations() == 0 && rep.closeness_max() <= bound;
        pass &= ok;
        notes.push(format!(
            "{name}: containment {} size bound strict {} (corrected {}) closeness {:.3}",
            rep.containment_ok(),
            rep.strict_violations(),
            rep.corrected_violations(),
            rep.closeness_max()
        ));
    }
    verdict(3, pass, &format!("Main Lemma (b)+(c)+(d); {}", notes.join("; ")));
    assert!(pass);
}

#[test]
fn criterion_04_ahlfors_band() {
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, c) in [("segment", shape(Shape::Segment)), ("graph", shape(Shape::LipschitzGraph))] {
        let depth = 4;
        let forest = build_christ_cubes(&c, 0.5, depth, 0).unwrap();
        let m = leaf_level(&c);
        let fr = run_frostmann(&build_dyadic_index(&c, m).unwrap(), 1, m).unwrap();
        let cor = build_coronization(&forest, &fr, 8.0, depth).unwrap();
        let mut bands = Vec::new();
        for tau in [0.05, 0.1] {
            let vp = VerifyParams {
                whitney: WhitneyParams { tau, c0: 5.0, eta: 0.5 },
                samples: 200,
                ..VerifyParams::default()
            };
            let rep = verify_main_lemma(&cor, &forest, &c, &fr, &vp).unwrap();
            let samples: usize = rep.tops.iter().map(|t| t.ar_samples).sum();
            let (lo, hi) = rep.ar_band().unwrap();
            let ok = samples >= 200 && lo >= 1.0 / 20.0 && hi <= 20.0;
            pass &= ok;
            notes.push(format!("{name} tau {tau}: [{lo:.3}, {hi:.3}] over {samples}"));
            bands.push((lo, hi));
        }
        let drift = (bands[0].0 / bands[1].0)
            .max(bands[1].0 / bands[0].0)
            .max(bands[0].1 / bands[1].1)
            .max(bands[1].1 / bands[0].1);
        pass &= drift <= 1.5;
        notes.push(format!("{name} drift {drift:.3}"));
    }
    verdict(4, pass, &format!("skeleton Ahlfors ratios within [1/20, 20], drift <= 1.5; {}", notes.join("; ")));
    assert!(pass);
}

#[test]
fn criterion_05_tst_desk_check() {
    let t = Instant::now();
    let seg = shape(Shape::Segment);
    let rep = compare_tst(&seg, &CompareParams::new(1, 5)).unwrap();
    let root = rep.root();
    let seg_bwgl = root.bwgl_sum.unwrap();
    let seg_ratio = root.beta_total / root.content_hd;
    let seg_ok = seg_bwgl == 0.0 && (0.2..=5.0).contains(&seg_ratio);
    let seg_secs = t.elapsed().as_secs_f64();

    let c = cantor(5);
    let mut totals = Vec::new();
    let mut slow = seg_secs >= 60.0;
    let mut times = vec![seg_secs];
    for depth in [4, 5] {
        let t = Instant::now();
        let rep = compare_tst(&c, &CompareParams::new(1, depth)).unwrap();
        let root = rep.root();
        totals.push((root.beta_total, root.content_hd + root.bwgl_sum.unwrap()));
        times.push(t.elapsed().as_secs_f64());
        slow |= t.elapsed().as_secs_f64() >= 60.0;
    }
    let d_beta = totals[1].0 - totals[0].0;
    let d_side = totals[1].1 - totals[0].1;
    let ratio = d_beta / d_side;
    let cantor_ok = ratio.is_finite() && (1.0 / 3.0..=3.0).contains(&ratio);
    let pass = seg_ok && cantor_ok && !slow;
    verdict(
        5,
        pass,
        &format!(
            "segment BWGL sum {seg_bwgl:.4} beta/content {seg_ratio:.3}; cantor4 depth 4->5 increments beta {d_beta:.4e} \
             content+BWGL {d_side:.4e} ratio {ratio:.3} (band [1/3, 3]); runs {times:.1?} s"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_baup_bwgl_separation() {
    let c = shape(Shape::Cross);
    let forest = build_christ_cubes(&c, 0.5, 5, 0).unwrap();
    let p = |kind| CriterionParams { epsilon: 0.05, c0: 2.0, max_planes: 2, ..CriterionParams::new(kind) };
    let bwgl = classify(&forest, &c, &p(CriterionKind::Bwgl)).unwrap();
    let baup = classify(&forest, &c, &p(CriterionKind::Baup)).unwrap();
    // cubes whose dilated ball holds the crossing but no arm end
    let crossing: Vec<usize> = forest
        .cubes
        .iter()
        .filter(|q| {
            let r = q.center.iter().map(|v| v * v).sum::<f64>().sqrt();
            r < q.size && r + 2.0 * q.size <= 0.5
        })
        .map(|q| q.id)
        .collect();
    let separated = crossing.iter().filter(|&&q| baup.is_good(q) && bwgl.is_bad(q)).count();
    let s_baup = carleson_sum(&baup, &forest, 0, 1).sum;
    let s_bwgl = carleson_sum(&bwgl, &forest, 0, 1).sum;
    let pass = !crossing.is_empty() && separated == crossing.len() && s_baup < s_bwgl;
    verdict(
        6,
        pass,
        &format!(
            "cross: {separated}/{} crossing-scale cubes BAUP-good and BWGL-bad; BAUP(R) {s_baup:.4} BWGL(R) {s_bwgl:.4}",
            crossing.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_bwgl_implies_ls() {
    let mut clouds = test_clouds();
    clouds.push(("circle", shape(Shape::Circle)));
    clouds.push(("cross", shape(Shape::Cross)));
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, c) in &clouds {
        let forest = build_christ_cubes(c, 0.5, 4, 0).unwrap();
        let bwgl = classify(&forest, c, &CriterionParams { epsilon: 0.025, ..CriterionParams::new(CriterionKind::Bwgl) }).unwrap();
        let ls = classify(&forest, c, &CriterionParams { epsilon: 0.1, ..CriterionParams::new(CriterionKind::Ls) }).unwrap();
        let violations = forest
            .cubes
            .iter()
            .filter(|q| bwgl.is_good(q.id) && q.children.iter().any(|&ch| ls.is_bad(ch)))
            .count();
        let s_ls = carleson_sum(&ls, &forest, 0, c.d()).sum;
        let s_bwgl = carleson_sum(&bwgl, &forest, 0, c.d()).sum;
        let ok = violations == 0 && s_ls <= s_bwgl;
        pass &= ok;
        notes.push(format!("{name}: violations {violations} LS(R) {s_ls:.4} BWGL(R,c eps) {s_bwgl:.4}"));
    }
    verdict(7, pass, &format!("good-BWGL(c eps) => children good-LS(eps); {}", notes.join("; ")));
    assert!(pass);
}

#[test]
fn criterion_08_beta_variants_comparable() {
    let mut clouds = test_clouds();
    clouds.push(("circle", shape(Shape::Circle)));
    let variants = [(3.0, 2.0), (6.0, 2.0), (6.0, 1.0)];
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, c) in &clouds {
        let forest = build_christ_cubes(c, 0.5, 5, 0).unwrap();
        let ids: Vec<usize> = (0..forest.cubes.len()).collect();
        let d = c.d();
        // totals[v][k] for depths 3, 4, 5
        let mut totals = Vec::new();
        for (a, p) in variants {
            let params = BetaParams::new(a, p, d).unwrap();
            let recs = beta_records(&forest, c, &ids, &params, &BetaOptions::default()).unwrap();
            let root = forest.root().size.powi(d as i32);
            totals.push(
                [3u32, 4, 5]
                    .map(|k| root + recs.iter().filter(|r| r.level <= k).map(|r| r.contribution).sum::<f64>()),
            );
        }
        let mut drift: f64 = 1.0;
        for i in 0..3 {
            for j in i + 1..3 {
                let ratios = [0, 1, 2].map(|k| totals[i][k] / totals[j][k]);
                let hi = ratios.iter().copied().fold(f64::MIN, f64::max);
                let lo = ratios.iter().copied().fold(f64::MAX, f64::min);
                drift = drift.max(hi / lo);
            }
        }
        pass &= drift <= 2.0;
        notes.push(format!("{name}: drift {drift:.3}"));
    }
    verdict(8, pass, &format!("beta (A,p) variants, ratio drift depths 3->5 <= 2; {}", notes.join("; ")));
    assert!(pass);
}

fn read_reports(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
                continue;
            }
            let key = p.strip_prefix(dir).unwrap().display().to_string();
            let mut bytes = fs::read(&p).unwrap();
            if key == "metadata.json" {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                v.as_object_mut().unwrap().remove("timestamp");
                bytes = serde_json::to_vec(&v).unwrap();
            }
            out.insert(key, bytes);
        }
    }
    out
}

#[test]
fn criterion_09_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = dir.path().join("graph.txt");
    save_cloud(&shape(Shape::LipschitzGraph), &cloud).unwrap();
    let out = dir.path().join("out");
    let cfg = serde_json::json!({
        "cloud": cloud, "d": 1, "depth": 4, "criteria": "bwgl,ls,lcv,baup,bp",
        "out": out, "seed": 7, "samples": 100,
    });
    let cfg_path = dir.path().join("cfg.json");
    fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let mut runs = Vec::new();
    for _ in 0..2 {
        let o = Command::new(env!("CARGO_BIN_EXE_msgeo")).arg("compare").arg("--config").arg(&cfg_path).output().unwrap();
        runs.push((o.status.code(), read_reports(&out)));
        fs::remove_dir_all(&out).unwrap();
    }
    let same = runs[0] == runs[1];
    let files = runs[0].1.len();
    let differing: Vec<&String> =
        runs[0].1.iter().filter(|(k, v)| runs[1].1.get(*k) != Some(*v)).map(|(k, _)| k).collect();
    let pass = same && files >= 6;
    verdict(9, pass, &format!("two compare runs, {files} report files, exit {:?}, differing {differing:?}", runs[0].0));
    assert!(pass);
}

#[test]
fn criterion_10_continuity_probe() {
    let e1 = jittered_line(1025, 0.0, 0);
    let e2 = jittered_line(1025, 0.001, 1);
    let p = CriterionParams { epsilon: 0.01, ..CriterionParams::new(CriterionKind::Bwgl) };
    let probe = continuity_probe(&p, &e1, &e2, &ProbeOptions { trials: 200, ..ProbeOptions::default() }).unwrap();
    let pairs = probe.outcomes.len();
    let worst = probe.max_relaxation().unwrap_or(f64::INFINITY);
    let pass = pairs >= 50 && worst.is_finite() && worst <= 16.0;
    verdict(10, pass, &format!("line vs jittered line: {pairs} ball pairs, max BWGL relaxation {worst:.3} (limit 16)"));
    assert!(pass);
}
