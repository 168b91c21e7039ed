use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use msgeo_bench::{cantor, graph, leaf_level, prepare, segment};
use msgeo_core::corona::VerifyParams;
use msgeo_core::cubes::{build_christ_cubes, build_dyadic_index};
use msgeo_core::frostmann::run_frostmann;
use msgeo_core::{build_coronization, classify, verify_main_lemma, CriterionKind, CriterionParams};

fn cubes(c: &mut Criterion) {
    let mut g = c.benchmark_group("christ_cubes");
    for points in [1025, 4097] {
        let cloud = segment(points);
        g.bench_with_input(BenchmarkId::from_parameter(points), &cloud, |b, cloud| {
            b.iter(|| build_christ_cubes(cloud, 0.5, 6, 0).unwrap())
        });
    }
    g.finish();
}

fn frostmann(c: &mut Criterion) {
    let mut g = c.benchmark_group("frostmann");
    for generation in [4, 5] {
        let cloud = cantor(generation);
        let m = leaf_level(&cloud);
        let idx = build_dyadic_index(&cloud, m).unwrap();
        g.bench_with_input(BenchmarkId::new("cantor4", generation), &idx, |b, idx| {
            b.iter(|| run_frostmann(idx, 1, m).unwrap())
        });
    }
    g.finish();
}

fn corona(c: &mut Criterion) {
    let p = prepare(segment(1025), 4);
    c.bench_function("coronization/segment", |b| {
        b.iter(|| build_coronization(&p.forest, &p.frostmann, 8.0, p.depth).unwrap())
    });
    let cor = build_coronization(&p.forest, &p.frostmann, 8.0, p.depth).unwrap();
    let vp = VerifyParams { samples: 50, ..VerifyParams::default() };
    c.bench_function("main_lemma/segment", |b| {
        b.iter(|| verify_main_lemma(&cor, &p.forest, &p.cloud, &p.frostmann, &vp).unwrap())
    });
}

fn criteria(c: &mut Criterion) {
    let cloud = graph();
    let forest = build_christ_cubes(&cloud, 0.5, 4, 0).unwrap();
    let mut g = c.benchmark_group("classify/graph");
    g.sample_size(10);
    for kind in [CriterionKind::Bwgl, CriterionKind::Ls, CriterionKind::Bp] {
        let params = CriterionParams::new(kind);
        g.bench_function(kind.name(), |b| b.iter(|| classify(&forest, &cloud, &params).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, cubes, frostmann, corona, criteria);
criterion_main!(benches);
