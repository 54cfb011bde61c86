use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use xbatch_core::criteria::expand_grid;
use xbatch_core::deliverables::{render_plot, Axis, PlotDocument, PlotKind, Provenance, Series};
use xbatch_core::refplat::{simulate, SimConfig};
use xbatch_core::results::{cell_stats, intra_exp_stats, DataTable, RunStack};
use xbatch_core::ParserRegistry;

fn bench_criteria(c: &mut Criterion) {
    let reg = ParserRegistry::builtin();
    let tokens = vec!["population_size.Log1024".to_string(), "vel.min=1p0.max=10p0.C100".to_string()];
    c.bench_function("criteria parse+expand 11x100", |b| {
        b.iter(|| {
            let crit = reg.parse_raw(black_box(&tokens)).unwrap();
            black_box(expand_grid(&crit).unwrap())
        })
    });
}

fn stack(n: usize, rows: usize, cols: usize) -> RunStack {
    let columns: Vec<String> = (0..cols).map(|c| format!("c{c}")).collect();
    let tables = (0..n)
        .map(|r| {
            let data = (0..rows)
                .map(|i| (0..cols).map(|j| ((r * 31 + i * 7 + j) % 97) as f64 * 0.5).collect())
                .collect();
            DataTable::new("bench", columns.clone(), data)
        })
        .collect();
    RunStack::new(0, "bench", (0..n).collect(), tables).unwrap()
}

fn bench_stats(c: &mut Criterion) {
    let values: Vec<f64> = (0..64).map(|i| (i * 37 % 101) as f64).collect();
    c.bench_function("cell_stats n=64", |b| b.iter(|| black_box(cell_stats(values.iter().copied()))));

    let mut g = c.benchmark_group("intra_exp_stats");
    for &(n, rows) in &[(5usize, 200usize), (16, 1000)] {
        let st = stack(n, rows, 2);
        g.bench_with_input(BenchmarkId::from_parameter(format!("{n}x{rows}")), &st, |b, st| {
            b.iter(|| black_box(intra_exp_stats(st)))
        });
    }
    g.finish();
}

fn bench_refsim(c: &mut Criterion) {
    let cfg = SimConfig {
        population: 16,
        velocity: 1.0,
        noise: 0.2,
        grid_side: 16,
        objects: 24,
        duration_ticks: 2000,
        seed: 42,
    };
    c.bench_function("refsim 16 agents 2000 ticks", |b| b.iter(|| black_box(simulate(black_box(&cfg)))));
}

fn bench_render(c: &mut Criterion) {
    let mut doc = PlotDocument::new(
        "bench",
        PlotKind::Linegraph,
        "bench",
        Axis { label: "t".into(), ..Axis::default() },
        Axis { label: "y".into(), ..Axis::default() },
        Provenance::default(),
    );
    for s in 0..4 {
        let x: Vec<f64> = (0..500).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v * (s + 1) as f64).collect();
        doc.series.push(Series {
            label: format!("s{s}"),
            band_lo: Some(y.iter().map(|v| v - 1.0).collect()),
            band_hi: Some(y.iter().map(|v| v + 1.0).collect()),
            x,
            y,
            ..Series::default()
        });
    }
    c.bench_function("render linegraph 4x500", |b| b.iter(|| black_box(render_plot(black_box(&doc)))));
}

criterion_group!(benches, bench_criteria, bench_stats, bench_refsim, bench_render);
criterion_main!(benches);
