mod common;

use actmap_core::baselines::{ground_truth_mappings, Variant};
use actmap_core::evaluation::{
    act_recovery, export_mapping, learning_curve, live_eval, read_curve_csv, read_mapping_csv, write_curve_csv,
    CurveSpec, Domains,
};
use actmap_core::user_sim::{rng_for, RandomPolicy};
use actmap_core::{load_alias, run_episode, OraclePolicy, RewardMode};
use common::{fixture, ontology};

fn tiny_spec() -> CurveSpec {
    let mut spec = CurveSpec {
        variants: vec![Variant::NoneTl, Variant::Promise, Variant::Fafs],
        target_sizes: vec![1, 2],
        seeds: vec![3, 4],
        source_dialogues: 30,
        eval_episodes: 8,
        auc_episodes: 2,
        auc_samples: 2,
        ..CurveSpec::default()
    };
    spec.transfer.epochs = 2;
    spec.transfer.min_steps = 10;
    spec
}

#[test]
fn learning_curve_covers_the_grid_and_resumes_from_cache() {
    let (s, t) = (ontology("rest_a.json"), ontology("hotel_b.json"));
    let alias = load_alias(fixture("hotel_b_to_rest_a.alias.json")).unwrap();
    let d = Domains { source: &s, target: &t, alias: Some(&alias) };
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.jsonl");
    let spec = tiny_spec();

    let first = learning_curve(&spec, &d, Some(&cache), 2).unwrap();
    assert_eq!(first.rows.len(), 12);
    assert_eq!(first.computed, 12);
    let order: Vec<_> = first.rows.iter().map(|r| (r.variant, r.size, r.seed)).collect();
    let mut expected = Vec::new();
    for v in &spec.variants {
        for n in &spec.target_sizes {
            for seed in &spec.seeds {
                expected.push((*v, *n, *seed));
            }
        }
    }
    assert_eq!(order, expected);
    for c in &first.cells {
        assert_eq!(c.act_t2s.is_some(), c.row.variant != Variant::NoneTl);
        assert!((0.0..=1.0).contains(&c.row.success_rate));
    }

    let again = learning_curve(&spec, &d, Some(&cache), 1).unwrap();
    assert_eq!(again.computed, 0);
    assert_eq!(again.rows, first.rows);

    // A torn trailing line is ignored and the missing cell recomputed.
    let text = std::fs::read_to_string(&cache).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let last = lines.pop().unwrap();
    let torn = format!("{}\n{}", lines.join("\n"), &last[..last.len() / 2]);
    std::fs::write(&cache, torn).unwrap();
    let resumed = learning_curve(&spec, &d, Some(&cache), 1).unwrap();
    assert_eq!(resumed.computed, 1);
    assert_eq!(resumed.rows, first.rows);

    let csv = dir.path().join("curve.csv");
    write_curve_csv(&first.rows, &csv).unwrap();
    assert_eq!(read_curve_csv(&csv).unwrap(), first.rows);
}

#[test]
fn alias_variants_are_rejected_without_an_alias() {
    let (s, t) = (ontology("rest_a.json"), ontology("hotel_b.json"));
    let d = Domains { source: &s, target: &t, alias: None };
    assert!(learning_curve(&tiny_spec(), &d, None, 1).is_err());
}

#[test]
fn ground_truth_recovers_every_act_and_exports_losslessly() {
    let (s, t) = (ontology("rest_a.json"), ontology("rest_twin.json"));
    let alias = load_alias(fixture("rest_twin_to_rest_a.alias.json")).unwrap();
    let (acts, _slots) = ground_truth_mappings(&alias, &s, &t).unwrap();
    assert_eq!(act_recovery(&acts, &alias, &s, &t).unwrap(), (6, 6));

    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<String> = t.speech_acts().to_vec();
    let cols: Vec<String> = s.speech_acts().to_vec();
    let (csv, svg) = (dir.path().join("a.csv"), dir.path().join("a.svg"));
    export_mapping(&acts, &rows, &cols, &csv, &svg).unwrap();
    let (m, r, c) = read_mapping_csv(&csv).unwrap();
    assert_eq!((m, r, c), (acts, rows, cols));
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn episodes_are_reproducible_from_the_seed() {
    let o = ontology("hotel_b.json");
    let a = live_eval(&RandomPolicy, &o, 40, 17).unwrap();
    let b = live_eval(&RandomPolicy, &o, 40, 17).unwrap();
    assert_eq!(a, b);
    let oracle = OraclePolicy::new(&o).unwrap();
    let x = run_episode(&oracle, &o, &mut rng_for(5, 0), 20, RewardMode::TerminalOnly).unwrap();
    let y = run_episode(&oracle, &o, &mut rng_for(5, 0), 20, RewardMode::TerminalOnly).unwrap();
    assert_eq!(serde_json::to_string(&x).unwrap(), serde_json::to_string(&y).unwrap());
    assert!(x.success);
}
