use std::hint::black_box;
use std::path::PathBuf;

use actmap_core::evaluation::collect_target_dialogues;
use actmap_core::gp::{fit_gp, return_dataset, train_source_policy, SourceSchedule};
use actmap_core::transfer::loss::transitions;
use actmap_core::transfer::{build_problem, Block, MappingParams, TransferConfig, TransferInputs, TransferMapping};
use actmap_core::user_sim::rng_for;
use actmap_core::{load_ontology, Ontology};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::Rng;

fn fixture(name: &str) -> Ontology {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    load_ontology(root.join(name)).expect("fixture loads")
}

fn gp(c: &mut Criterion) {
    let source = fixture("rest_a.json");
    let schedule = SourceSchedule::default();
    let (model, logs) = train_source_policy(&source, 100, &mut rng_for(0, 1), &schedule).unwrap();
    let data = return_dataset(&logs);
    let dim = model.dim();
    let mut rng = rng_for(0, 2);
    let queries: Vec<Vec<f64>> = (0..64)
        .map(|_| (0..dim).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();

    let mut g = c.benchmark_group("gp");
    g.bench_function("fit", |b| b.iter(|| fit_gp(dim, black_box(&data), &schedule.gp).unwrap()));
    g.bench_function("mean x64", |b| {
        b.iter(|| queries.iter().map(|x| model.mean(black_box(x)).unwrap()).sum::<f64>())
    });
    g.bench_function("mean_and_grad x64", |b| {
        b.iter(|| queries.iter().map(|x| model.mean_and_grad(black_box(x)).unwrap().0).sum::<f64>())
    });
    g.bench_function("mean_var x64", |b| {
        b.iter(|| queries.iter().map(|x| model.mean_var(black_box(x)).unwrap().1).sum::<f64>())
    });
    g.finish();
}

fn loss(c: &mut Criterion) {
    let source = fixture("rest_a.json");
    let target = fixture("hotel_b.json");
    let (model, source_logs) =
        train_source_policy(&source, 100, &mut rng_for(1, 1), &SourceSchedule::default()).unwrap();
    let target_logs = collect_target_dialogues(&target, 10, 0.3, 1).unwrap();
    let inputs = TransferInputs {
        source_model: &model,
        source_logs: &source_logs,
        target_logs: &target_logs,
        source: &source,
        target: &target,
    };
    let config = TransferConfig::default();
    let problem = build_problem(&inputs, &config).unwrap();
    let params = MappingParams::random(&problem.target, &problem.source, config.dim, &mut rng_for(1, 3)).unwrap();
    let mapping = TransferMapping {
        params,
        acts: Block::Learned,
        slots: Block::Learned,
    };
    let data = transitions(&target_logs);
    let batch = &data[..config.batch_size.min(data.len())];

    let mut g = c.benchmark_group("transfer");
    g.bench_function("total_loss batch", |b| {
        b.iter(|| problem.total_loss(black_box(&mapping), black_box(batch)).unwrap().total)
    });
    g.bench_function("loss_value batch", |b| {
        b.iter(|| problem.loss_value(black_box(&mapping), black_box(batch)).unwrap())
    });
    g.bench_function("matrices", |b| {
        b.iter_batched(|| mapping.clone(), |m| m.matrices().unwrap(), BatchSize::SmallInput)
    });
    g.finish();
}

criterion_group!(benches, gp, loss);
criterion_main!(benches);
