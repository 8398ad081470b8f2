use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use basketlv::ism::{build_target, run_ism, IsmConfig};
use basketlv::localvol::{estimate_density, DensityConfig};
use basketlv::market::OptionQuote;
use basketlv::sampling::draw_independent;
use basketlv::smile::{calibrate_sabr, sabr_implied_vol, CalibConfig, SabrParams};
use basketlv_bench::bench_laws;

fn bench_sabr(c: &mut Criterion) {
    let params = SabrParams {
        alpha: 0.47,
        beta: 0.9,
        rho: -0.52,
        gamma: 1.2,
    };
    c.bench_function("sabr_implied_vol", |b| {
        b.iter(|| {
            sabr_implied_vol(
                black_box(&params),
                black_box(100.0),
                black_box(92.0),
                black_box(0.25),
            )
            .unwrap()
        })
    });

    let quotes: Vec<OptionQuote> = [0.8, 0.85, 0.9, 0.95, 0.975, 1.0, 1.025, 1.05, 1.1, 1.15, 1.2]
        .iter()
        .map(|&m| OptionQuote {
            maturity: 0.25,
            moneyness: m,
            implied_vol: sabr_implied_vol(&params, 100.0, m * 100.0, 0.25).unwrap(),
            side: basketlv::market::QuoteSide::Mid,
        })
        .collect();
    c.bench_function("calibrate_sabr_11_quotes", |b| {
        b.iter(|| {
            calibrate_sabr(
                black_box(&quotes),
                100.0,
                0.0,
                0.9,
                None,
                &CalibConfig::default(),
            )
            .unwrap()
        })
    });
}

fn bench_rearrangement(c: &mut Criterion) {
    let mut group = c.benchmark_group("ism");
    group.sample_size(10);
    for &(n_assets, m_samples, bins) in &[(10usize, 5_000usize, 400usize), (30, 20_000, 1_400)] {
        let laws = bench_laws(n_assets, 1.0);
        let target = build_target(&laws.index_law, m_samples, bins).unwrap();
        let matrix =
            draw_independent(&laws.constituent_laws, &laws.weights, m_samples, 42).unwrap();
        let config = IsmConfig {
            bins,
            max_iterations: 10,
            stop_fraction: 1e-3,
            seed: 7,
        };
        group.bench_with_input(
            BenchmarkId::new("run", format!("{n_assets}x{m_samples}")),
            &(),
            |b, _| {
                b.iter(|| run_ism(black_box(matrix.clone()), &target, &config).unwrap())
            },
        );
    }
    group.finish();
}

fn bench_density(c: &mut Criterion) {
    let laws = bench_laws(10, 1.0);
    let matrix = draw_independent(&laws.constituent_laws, &laws.weights, 20_000, 3).unwrap();
    let samples = matrix.index_vector();
    c.bench_function("kde_20k_samples", |b| {
        b.iter(|| estimate_density(black_box(&samples), 1.0, &DensityConfig::default()).unwrap())
    });
}

criterion_group!(benches, bench_sabr, bench_rearrangement, bench_density);
criterion_main!(benches);
