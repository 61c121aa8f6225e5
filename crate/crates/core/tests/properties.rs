mod common;

use actmap_core::dialog::match_bucket;
use actmap_core::evaluation::auc;
use actmap_core::transfer::mat::softmax_rows;
use actmap_core::transfer::{translate_act, Mat};
use proptest::prelude::*;

fn matrix() -> impl Strategy<Value = Mat> {
    (1usize..7, 1usize..7).prop_flat_map(|(r, c)| {
        prop::collection::vec(-30.0f64..30.0, r * c).prop_map(move |v| Mat::from_fn(r, c, |i, j| v[i * c + j]))
    })
}

proptest! {
    #[test]
    fn softmax_rows_are_distributions(logits in matrix()) {
        let p = softmax_rows(&logits);
        for i in 0..p.rows {
            prop_assert!((p.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p.row(i).iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn translation_preserves_probability_mass(logits in matrix(), w in prop::collection::vec(0.01f64..1.0, 6)) {
        let m = softmax_rows(&logits);
        let total: f64 = w[..m.rows].iter().sum();
        let a: Vec<f64> = w[..m.rows].iter().map(|x| x / total).collect();
        let out = translate_act(&a, &m).unwrap();
        prop_assert_eq!(out.len(), m.cols);
        prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn auc_is_bounded_and_flips_under_negation(
        pairs in prop::collection::vec((-5i32..5, any::<bool>()), 2..40)
    ) {
        let scores: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let labels: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        match auc(&scores, &labels) {
            None => prop_assert!(labels.iter().all(|l| *l) || labels.iter().all(|l| !*l)),
            Some(a) => {
                prop_assert!((0.0..=1.0).contains(&a));
                let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
                let b = auc(&neg, &labels).unwrap();
                prop_assert!((a + b - 1.0).abs() < 1e-12);
                // Pairwise count with ties worth one half.
                let (mut wins, mut pairs_n) = (0.0, 0.0);
                for (i, li) in labels.iter().enumerate() {
                    for (j, lj) in labels.iter().enumerate() {
                        if *li && !*lj {
                            pairs_n += 1.0;
                            wins += if scores[i] > scores[j] { 1.0 } else if scores[i] == scores[j] { 0.5 } else { 0.0 };
                        }
                    }
                }
                prop_assert!((a - wins / pairs_n).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn buckets_are_monotone(a in 0usize..100, b in 0usize..100) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(match_bucket(lo) <= match_bucket(hi));
        prop_assert!(match_bucket(hi) < 4);
    }
}

#[test]
fn ontology_json_round_trips() {
    for name in ["rest_a.json", "hotel_b.json", "rest_twin.json"] {
        let o = common::ontology(name);
        let back = actmap_core::Ontology::from_json(&o.to_json()).unwrap();
        assert_eq!(back.to_json(), o.to_json());
    }
}
