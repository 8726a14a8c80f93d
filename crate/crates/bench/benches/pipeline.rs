use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use legoc_bench::programs;
use legoc_core::pipeline::{prepare, Compiler, PipelineConfig};
use legoc_core::splitter::{split_parts, AlwaysSplit, HeuristicPolicy};
use legoc_core::suite::{gen_subset_program, ENTRY};
use legoc_core::{parse_source, Mode, RefBackend, SplitConfig};

fn frontend(c: &mut Criterion) {
    let src = gen_subset_program(7, 60);
    c.bench_function("parse generated program", |b| b.iter(|| parse_source(black_box(&src)).unwrap()));
}

fn split(c: &mut Criterion) {
    let config = SplitConfig::default();
    let prepared: Vec<_> = programs(16, 40)
        .iter()
        .map(|a| prepare(a, Mode::Lego, &config))
        .collect();
    c.bench_function("force-split 16 programs", |b| {
        b.iter(|| {
            for p in &prepared {
                black_box(split_parts(p.ast.function(ENTRY).unwrap(), &config, &AlwaysSplit).unwrap());
            }
        })
    });
}

fn translate(c: &mut Criterion) {
    let asts = programs(8, 40);
    let mut group = c.benchmark_group("reference compile of 8 programs");
    for mode in [Mode::Direct, Mode::Workflow, Mode::Lego] {
        group.bench_with_input(BenchmarkId::from_parameter(mode), &mode, |b, &mode| {
            b.iter(|| {
                for ast in &asts {
                    let config = PipelineConfig {
                        mode,
                        split: SplitConfig::default(),
                    };
                    let policy = HeuristicPolicy;
                    black_box(Compiler::new(ast, config, &RefBackend, &policy).compile_module(None).unwrap());
                }
            })
        });
    }
    group.finish();
}

criterion_group!(benches, frontend, split, translate);
criterion_main!(benches);
