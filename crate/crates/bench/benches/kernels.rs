use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use dpms_bench::gram;
use dpms_core::{
    enumerate_posterior, gram_noise_for, log_bayes_factor, rng, run_chain, sample_region, simulate_null_lrt,
    unit_box_sensitivity, CensorBounds, EnumerationSettings, Functional, GPriorSpec, ModelPriorKind,
    NullSimConfig, PrivacyBudget, RegionConfig, RepairPolicy, Statistic,
};

fn zs_settings(n: usize) -> EnumerationSettings {
    EnumerationSettings {
        n,
        p0: 1,
        statistic: Statistic::g_prior(GPriorSpec::ZellnerSiow),
        prior_kind: ModelPriorKind::HierarchicalUniform,
    }
}

fn bayes_factor(c: &mut Criterion) {
    c.bench_function("zs_log_bf", |b| {
        b.iter(|| log_bayes_factor(black_box(0.23), 500, 3, 1, &GPriorSpec::ZellnerSiow).unwrap())
    });
    c.bench_function("g_n_log_bf", |b| {
        b.iter(|| log_bayes_factor(black_box(0.23), 500, 3, 1, &GPriorSpec::GEqualsN).unwrap())
    });
}

fn enumeration(c: &mut Criterion) {
    let g = gram(5000, 9, 1);
    let settings = zs_settings(g.n());
    c.bench_function("enumerate_p9_zs", |b| b.iter(|| enumerate_posterior(black_box(g.matrix()), &settings).unwrap()));
    let settings = EnumerationSettings { statistic: Statistic::g_prior(GPriorSpec::GEqualsN), ..settings };
    c.bench_function("enumerate_p9_g_n", |b| b.iter(|| enumerate_posterior(black_box(g.matrix()), &settings).unwrap()));
}

fn null_simulation(c: &mut Criterion) {
    let budget = PrivacyBudget::new(1.0, 1e-3).unwrap();
    let cfg = NullSimConfig::balanced(5, 40, 1, CensorBounds::new(0.0, 7.0).unwrap(), Some(budget), 10_000, 3);
    let mut group = c.benchmark_group("null_sim");
    group.sample_size(20);
    group.bench_function("lrt_10k", |b| b.iter(|| simulate_null_lrt(black_box(&cfg)).unwrap()));
    group.finish();
}

fn region_sampling(c: &mut Criterion) {
    let (p, n) = (3, 20_000);
    let g = gram(n, p, 2);
    let budget = PrivacyBudget::pure(1.0).unwrap();
    let noise = gram_noise_for(p, Some(&budget), &unit_box_sensitivity(p)).unwrap();
    let chain = run_chain(&g, noise, Some(budget), Some(99.0), RepairPolicy::Auto, &mut rng::root(4)).unwrap();
    let cfg = RegionConfig { alpha: 0.05, nsamples: 500, functional: Functional::InclusionProb(0), seed: 5 };
    let mut group = c.benchmark_group("region");
    group.sample_size(20);
    group.bench_function("laplace_p3_500", |b| b.iter(|| sample_region(black_box(&chain), &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, bayes_factor, enumeration, null_simulation, region_sampling);
criterion_main!(benches);
