//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Criteria 1 to 5 and 9 are exact properties and make the run fail when
//! they do not hold. Criteria 6 to 8 compare noisy learning curves; their
//! lines are printed either way and only fail the run when `ACTMAP_STRICT`
//! is set.

mod common;

use std::time::{Duration, Instant};

use actmap_core::baselines::Variant;
use actmap_core::evaluation::{
    act_recovery, auc, greedy, learning_curve, live_eval, summarize_curve, write_curve_csv,
    CurvePoint, CurveResult, CurveSpec, Domains,
};
use actmap_core::gp::{fit_gp, train_source_policy, GpConfig, KernelParams, SourceSchedule};
use actmap_core::transfer::mat::softmax_rows;
use actmap_core::transfer::{
    act_similarity_matrix, reg_state_continuity, slot_similarity_matrix, translate_act, Block,
    Direction, MappingParams, Mat, TransferMapping, TransferQ,
};
use actmap_core::user_sim::{rng_for, RandomPolicy};
use actmap_core::{
    load_alias, run_episode, OraclePolicy, QFunction, RewardMode, SummaryLayout,
};
use common::{finite_difference, fixture, ontology, prob, random_action, random_state, relative_error, RandomFixture};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get()).min(8)
}

fn mapping_algebra() -> Outcome {
    let mut rng = rng_for(1, 0);
    let t = SummaryLayout { n_acts: 5, n_slots: 7 };
    let s = SummaryLayout { n_acts: 6, n_slots: 4 };
    let mut worst_row = 0.0f64;
    let mut worst_mass = 0.0f64;
    for seed in 0..50 {
        let p = MappingParams::random(&t, &s, 4, &mut rng_for(seed, 1)).unwrap();
        for m in [
            act_similarity_matrix(&p, Direction::T2s).unwrap(),
            act_similarity_matrix(&p, Direction::S2t).unwrap(),
            slot_similarity_matrix(&p, Direction::T2s).unwrap(),
            slot_similarity_matrix(&p, Direction::S2t).unwrap(),
        ] {
            for i in 0..m.rows {
                worst_row = worst_row.max((m.row(i).iter().sum::<f64>() - 1.0).abs());
            }
            let a = prob(&mut rng, m.rows);
            let out = translate_act(&a, &m).unwrap();
            worst_mass = worst_mass.max((out.iter().sum::<f64>() - 1.0).abs());
        }
    }
    let equal = softmax_rows(&Mat::from_fn(3, 5, |_, _| 2.5));
    let uniform = equal.data.iter().all(|v| (v - 0.2).abs() < 1e-15);
    let r4 = [
        reg_state_continuity(&Mat::identity(2)),
        reg_state_continuity(&Mat::identity(3)),
        reg_state_continuity(&Mat::from_fn(3, 4, |_, _| 0.25)),
    ];
    let r4_ok = r4.iter().zip([1.0, 2.0, 0.0]).all(|(a, b)| (a - b).abs() < 1e-12);
    outcome(
        worst_row < 1e-9 && worst_mass < 1e-9 && uniform && r4_ok,
        format!("max row-sum error {worst_row:.1e}, max mass error {worst_mass:.1e}, equal logits uniform {uniform}, R4 fixtures {r4:?}"),
    )
}

fn gradient_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let fx = RandomFixture::new(seed);
        let (problem, mapping, batch) = fx.problem();
        let base = problem.total_loss(&mapping, &batch).unwrap();
        if !(base.r1 > 0.0 && base.r2 > 0.0 && base.r3 > 0.0 && base.r4 > 0.0) {
            return outcome(false, format!("seed {seed}: a regularizer is inactive"));
        }
        // Semi-gradient: the bootstrapped targets are constants.
        let frozen = problem.freeze_targets(&mapping, &batch).unwrap();
        let x0 = mapping.params.flatten();
        let numeric = finite_difference(&x0, 1e-5, |x| {
            let mut m = mapping.clone();
            m.params.set_flat(x).unwrap();
            problem.loss_value(&m, &frozen).unwrap()
        });
        worst = worst.max(relative_error(&base.grad, &numeric));
    }
    outcome(worst < 1e-4, format!("20 fixtures, max relative error {worst:.2e}"))
}

/// Posterior by an LU solve of the full system, independent of the model's
/// Cholesky path.
fn dense_posterior(xs: &[Vec<f64>], ys: &[f64], p: &KernelParams, prior: f64, q: &[f64]) -> (f64, f64) {
    let k = |a: &[f64], b: &[f64]| {
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        p.signal_variance * (-d / (2.0 * p.length_scale * p.length_scale)).exp()
    };
    let n = xs.len();
    let mut a = DMatrix::from_fn(n, n, |i, j| k(&xs[i], &xs[j]));
    for i in 0..n {
        a[(i, i)] += p.noise_variance;
    }
    let lu = a.lu();
    let kx = DVector::from_iterator(n, xs.iter().map(|x| k(x, q)));
    let centered = DVector::from_iterator(n, ys.iter().map(|y| y - prior));
    let w = lu.solve(&centered).unwrap();
    let v = lu.solve(&kx).unwrap();
    (prior + kx.dot(&w), p.signal_variance - kx.dot(&v))
}

fn gp_oracle() -> Outcome {
    let mut rng = rng_for(3, 0);
    let mut worst = 0.0f64;
    let mut fixtures = 0;
    for n in 1..=10 {
        for dim in [1, 3, 6] {
            for params in [
                KernelParams::default(),
                KernelParams {
                    signal_variance: 2.0,
                    length_scale: 0.7,
                    noise_variance: 0.1,
                },
            ] {
                fixtures += 1;
                let xs: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
                    .collect();
                let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-20.0..20.0)).collect();
                let data: Vec<_> = xs.iter().cloned().zip(ys.iter().copied()).collect();
                let cfg = GpConfig {
                    kernel: params,
                    novelty_threshold: 1.0,
                    ..GpConfig::default()
                };
                let model = fit_gp(dim, &data, &cfg).unwrap();
                assert_eq!(model.len(), n, "random points never merge");
                let prior = ys.iter().sum::<f64>() / n as f64;
                for _ in 0..5 {
                    let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.5..2.5)).collect();
                    let (m, v) = model.mean_var(&q).unwrap();
                    let (m2, v2) = dense_posterior(&xs, &ys, &params, prior, &q);
                    worst = worst.max((m - m2).abs()).max((v - v2).abs());
                }
            }
        }
    }
    outcome(worst < 1e-8, format!("{fixtures} fixtures with 1 to 10 points, max deviation {worst:.1e}"))
}

fn simulator_soundness() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for name in ["rest_a.json", "hotel_b.json", "rest_twin.json"] {
        let o = ontology(name);
        let oracle = OraclePolicy::new(&o).unwrap();
        let m = live_eval(&oracle, &o, 300, 0).unwrap();
        pass &= m.success_rate == 1.0;
        notes.push(format!("{} oracle success {:.3}", o.name(), m.success_rate));
    }
    let o = ontology("rest_a.json");
    let mut rng = rng_for(9, 0);
    let (mut at5, mut timeouts, mut checked) = (0, 0, 0);
    for i in 0..600 {
        let log = if i % 2 == 0 {
            run_episode(&RandomPolicy, &o, &mut rng, 20, RewardMode::PerTurn).unwrap()
        } else {
            run_episode(&OraclePolicy::new(&o).unwrap(), &o, &mut rng, 20, RewardMode::PerTurn).unwrap()
        };
        let brute: f64 = log.turns.iter().map(|t| t.reward).sum();
        let expected = -(log.length as f64) + if log.success { 20.0 } else { 0.0 };
        pass &= brute == log.total_reward && brute == expected;
        if log.success && log.length == 5 {
            at5 += 1;
            pass &= log.total_reward == 15.0;
        }
        if !log.success && log.length == 20 {
            timeouts += 1;
            pass &= log.total_reward == -20.0;
        }
        checked += 1;
    }
    pass &= at5 > 0 && timeouts > 0;
    notes.push(format!(
        "{checked} episodes summed turn by turn ({at5} successes at turn 5 scored 15, {timeouts} timeouts scored -20)"
    ));
    outcome(pass, notes.join("; "))
}

fn identity_transfer() -> Outcome {
    let o = ontology("rest_a.json");
    let layout = SummaryLayout::of(&o);
    let (gp, _) = train_source_policy(&o, 60, &mut rng_for(2, 1), &SourceSchedule::default()).unwrap();
    let params = MappingParams::random(&layout, &layout, 4, &mut rng_for(2, 2)).unwrap();
    let mapping = TransferMapping {
        params,
        acts: Block::fixed(Mat::identity(layout.n_acts)),
        slots: Block::fixed(Mat::identity(layout.n_slots)),
    };
    let tq = TransferQ::new(&gp, &mapping, layout, layout).unwrap();
    let mut rng = rng_for(2, 3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let h = random_state(&mut rng, &layout);
        let y = random_action(&mut rng, &layout);
        worst = worst.max((tq.q_mean(&h, &y).unwrap() - gp.q_mean(&h, &y).unwrap()).abs());
    }
    let a = live_eval(&greedy(&tq), &o, 100, 7).unwrap();
    let b = live_eval(&greedy(&gp), &o, 100, 7).unwrap();

    outcome(
        worst < 1e-3 && a == b,
        format!("max |Qt - Qs| {worst:.1e} on 100 points; live metrics identical for seed 7: {}", a == b),
    )
}

fn point(points: &[CurvePoint], v: Variant, size: usize) -> &CurvePoint {
    points.iter().find(|p| p.variant == v && p.size == size).expect("grid point present")
}

fn curve_ordering(result: &CurveResult, elapsed: Duration) -> Outcome {
    let pts = summarize_curve(&result.rows);
    let mut pass = elapsed <= Duration::from_secs(30 * 60);
    let mut notes = Vec::new();
    for size in [1, 5, 10, 20] {
        let r = |v| point(&pts, v, size).avg_reward.mean;
        let (pr, none, rafs, fafs) = (r(Variant::Promise), r(Variant::NoneTl), r(Variant::Rafs), r(Variant::Fafs));
        let margin_ok = size > 10 || pr - none >= 2.0;
        let order_ok = fafs >= pr && pr >= rafs;
        pass &= margin_ok && order_ok;
        notes.push(format!(
            "n={size}: promise {pr:.2} nonetl {none:.2} rafs {rafs:.2} fafs {fafs:.2}{}{}",
            if margin_ok { "" } else { " [margin]" },
            if order_ok { "" } else { " [order]" }
        ));
    }
    outcome(pass, format!("{} ({:.0}s)", notes.join("; "), elapsed.as_secs_f64()))
}

fn act_mapping_recovery() -> Outcome {
    let source = ontology("rest_a.json");
    let target = ontology("rest_twin.json");
    let alias = load_alias(fixture("rest_twin_to_rest_a.alias.json")).unwrap();
    let spec = CurveSpec {
        variants: vec![Variant::Promise],
        target_sizes: vec![1, 50],
        seeds: (0..5).collect(),
        eval_episodes: 10,
        auc_episodes: 0,
        ..CurveSpec::default()
    };
    let domains = Domains {
        source: &source,
        target: &target,
        alias: Some(&alias),
    };
    let result = learning_curve(&spec, &domains, None, jobs()).unwrap();
    let mut notes = Vec::new();
    let mut at50 = 0.0;
    for size in [1, 50] {
        let (mut hit, mut total) = (0, 0);
        for cell in result.cells.iter().filter(|c| c.row.size == size) {
            let (h, t) = act_recovery(cell.act_t2s.as_ref().unwrap(), &alias, &source, &target).unwrap();
            hit += h;
            total += t;
        }
        let frac = hit as f64 / total as f64;
        if size == 50 {
            at50 = frac;
        }
        notes.push(format!("size {size}: {hit}/{total} act rows recovered ({:.0}%)", 100.0 * frac));
    }
    outcome(at50 >= 0.8, format!("{} over 5 seeds", notes.join(", ")))
}

fn auc_analogue(result: &CurveResult) -> Outcome {
    let fixtures_ok = auc(&[0.1, 0.4, 0.5, 0.8], &[false, true, false, true]) == Some(0.75)
        && auc(&[1.0, 2.0, 3.0], &[false, false, true]) == Some(1.0)
        && auc(&[3.0, 2.0, 1.0], &[false, false, true]) == Some(0.0)
        && auc(&[5.0; 4], &[true, false, false, true]) == Some(0.5)
        && auc(&[1.0, 1.0, 2.0], &[true, false, false]) == Some(0.25)
        && auc(&[1.0, 2.0], &[true, true]).is_none();
    let pts = summarize_curve(&result.rows);
    let mut pass = fixtures_ok;
    let mut notes = vec![format!("bound and tie fixtures exact: {fixtures_ok}")];
    for size in [1, 5, 10, 20] {
        let (p, n) = (
            point(&pts, Variant::Promise, size).auc.mean,
            point(&pts, Variant::NoneTl, size).auc.mean,
        );
        let ok = (0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&n) && p > n;
        pass &= ok;
        notes.push(format!("n={size}: promise {p:.3} vs nonetl {n:.3}"));
    }
    outcome(pass, notes.join("; "))
}

fn determinism() -> Outcome {
    let source = ontology("rest_a.json");
    let target = ontology("hotel_b.json");
    let alias = load_alias(fixture("hotel_b_to_rest_a.alias.json")).unwrap();
    let domains = Domains {
        source: &source,
        target: &target,
        alias: Some(&alias),
    };
    let mut spec = CurveSpec {
        target_sizes: vec![1, 3],
        seeds: vec![11, 12],
        source_dialogues: 40,
        eval_episodes: 10,
        auc_episodes: 3,
        auc_samples: 3,
        ..CurveSpec::default()
    };
    spec.transfer.epochs = 2;
    spec.transfer.min_steps = 10;
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (i, jobs) in [1, 1, 4].into_iter().enumerate() {
        let r = learning_curve(&spec, &domains, None, jobs).unwrap();
        let path = dir.path().join(format!("run{i}.csv"));
        write_curve_csv(&r.rows, &path).unwrap();
        outputs.push(std::fs::read(&path).unwrap());
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    outcome(
        same && !outputs[0].is_empty(),
        format!(
            "3 runs of a {}-row grid (jobs 1, 1, 4) byte-identical: {same}",
            spec.variants.len() * spec.target_sizes.len() * spec.seeds.len()
        ),
    )
}

fn main() {
    let strict = std::env::var_os("ACTMAP_STRICT").is_some();
    let mut hard_failures = 0;
    let mut soft_failures = 0;
    let mut report = |id: usize, name: &str, empirical: bool, start: Instant, o: Outcome| {
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id} ({name}): {status} [{:.1}s] {}",
            start.elapsed().as_secs_f64(),
            o.detail
        );
        if !o.pass {
            if empirical {
                soft_failures += 1;
            } else {
                hard_failures += 1;
            }
        }
    };

    let t = Instant::now();
    report(1, "mapping algebra", false, t, mapping_algebra());
    let t = Instant::now();
    report(2, "gradient oracle", false, t, gradient_oracle());
    let t = Instant::now();
    report(3, "GP oracle", false, t, gp_oracle());
    let t = Instant::now();
    report(4, "simulator soundness", false, t, simulator_soundness());
    let t = Instant::now();
    report(5, "identity transfer", false, t, identity_transfer());

    let t = Instant::now();
    let source = ontology("rest_a.json");
    let target = ontology("hotel_b.json");
    let alias = load_alias(fixture("hotel_b_to_rest_a.alias.json")).unwrap();
    let spec = CurveSpec {
        variants: vec![Variant::Promise, Variant::NoneTl, Variant::Rafs, Variant::Fafs],
        ..CurveSpec::default()
    };
    let curve = learning_curve(
        &spec,
        &Domains {
            source: &source,
            target: &target,
            alias: Some(&alias),
        },
        None,
        jobs(),
    )
    .unwrap();
    let elapsed = t.elapsed();
    report(6, "learning-curve ordering", true, t, curve_ordering(&curve, elapsed));
    let t = Instant::now();
    report(7, "act mapping recovery", true, t, act_mapping_recovery());
    let t = Instant::now();
    report(8, "static AUC", true, t, auc_analogue(&curve));
    let t = Instant::now();
    report(9, "determinism", false, t, determinism());

    println!(
        "acceptance: {} of 9 criteria passed ({hard_failures} exact failures, {soft_failures} empirical failures)",
        9 - hard_failures - soft_failures
    );
    if hard_failures > 0 || (strict && soft_failures > 0) {
        std::process::exit(1);
    }
}
