#![allow(dead_code)]

use std::path::PathBuf;

use actmap_core::dialog::{SummaryLayout, N_BUCKETS};
use actmap_core::gp::{fit_gp, GpConfig, GpModel};
use actmap_core::transfer::loss::{ActFrequencies, Predictors, Transition, TransferProblem};
use actmap_core::transfer::{MappingParams, Mat, Predictor, TransferMapping};
use actmap_core::user_sim::rng_for;
use actmap_core::{load_ontology, Ontology, SimRng};
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn ontology(name: &str) -> Ontology {
    load_ontology(fixture(name)).unwrap()
}

pub fn prob(rng: &mut SimRng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

pub fn one_hot(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

pub fn random_state(rng: &mut SimRng, l: &SummaryLayout) -> Vec<f64> {
    let mut h = one_hot(N_BUCKETS, rng.random_range(0..N_BUCKETS));
    h.extend(one_hot(l.n_acts, rng.random_range(0..l.n_acts)));
    for _ in 0..2 * l.n_slots {
        h.push(if rng.random_bool(0.4) { 1.0 } else { 0.0 });
    }
    h
}

pub fn random_action(rng: &mut SimRng, l: &SummaryLayout) -> Vec<f64> {
    let mut y = one_hot(l.n_acts, rng.random_range(0..l.n_acts));
    if rng.random_bool(0.8) {
        y.extend(one_hot(l.n_slots, rng.random_range(0..l.n_slots)));
    } else {
        y.extend(vec![0.0; l.n_slots]);
    }
    y
}

pub fn random_predictor(rng: &mut SimRng, n_in: usize, n_out: usize) -> Predictor {
    Predictor {
        input_label: "in".into(),
        output_label: "out".into(),
        weights: Mat::from_fn(n_out, n_in, |_, _| rng.random_range(-1.5..1.5)),
        bias: (0..n_out).map(|_| rng.random_range(-0.5..0.5)).collect(),
    }
}

/// Small random GP over the source joint input space.
pub fn random_gp(rng: &mut SimRng, l: &SummaryLayout, n: usize) -> GpModel {
    let data: Vec<(Vec<f64>, f64)> = (0..n)
        .map(|_| {
            let mut x = random_state(rng, l);
            x.extend(random_action(rng, l));
            (x, rng.random_range(-10.0..15.0))
        })
        .collect();
    fit_gp(l.input_dim(), &data, &GpConfig::default()).unwrap()
}

pub struct RandomFixture {
    pub gp: GpModel,
    pub target: SummaryLayout,
    pub source: SummaryLayout,
    pub seed: u64,
}

impl RandomFixture {
    pub fn new(seed: u64) -> Self {
        let mut rng = rng_for(seed, 900);
        let target = SummaryLayout { n_acts: 3, n_slots: 4 };
        let source = SummaryLayout { n_acts: 4, n_slots: 3 };
        let gp = random_gp(&mut rng, &source, 12);
        RandomFixture { gp, target, source, seed }
    }

    /// Problem with all four regularizers active and a mix of terminal and
    /// bootstrapped transitions.
    pub fn problem(&self) -> (TransferProblem<'_>, TransferMapping, Vec<Transition>) {
        let mut rng = rng_for(self.seed, 901);
        let (t, s) = (&self.target, &self.source);
        let predictors = Predictors {
            slot_target: random_predictor(&mut rng, t.n_acts, t.n_slots),
            slot_source: random_predictor(&mut rng, s.n_acts, s.n_slots),
            user_source: random_predictor(&mut rng, s.action_dim(), s.n_acts),
        };
        let sentences = |rng: &mut SimRng, l: &SummaryLayout| -> Vec<(Vec<f64>, Vec<f64>)> {
            (0..6).map(|_| (prob(rng, l.n_acts), prob(rng, l.n_slots))).collect()
        };
        let src_sent = sentences(&mut rng, s);
        let tgt_sent = sentences(&mut rng, t);
        let replies: Vec<_> = (0..6)
            .map(|_| (random_action(&mut rng, t), one_hot(t.n_acts, rng.random_range(0..t.n_acts))))
            .collect();
        let freq = |rng: &mut SimRng, n| ActFrequencies {
            user: prob(rng, n),
            agent: prob(rng, n),
        };
        let target_freq = freq(&mut rng, t.n_acts);
        let source_freq = freq(&mut rng, s.n_acts);
        let candidates: Vec<Vec<f64>> = (0..4).map(|_| random_action(&mut rng, t)).collect();
        let batch: Vec<Transition> = (0..5)
            .map(|i| Transition {
                state: random_state(&mut rng, t),
                action: random_action(&mut rng, t),
                reward: if i == 4 { 19.0 } else { -1.0 },
                next_state: (i != 4).then(|| random_state(&mut rng, t)),
            })
            .collect();
        let problem = TransferProblem::assemble(
            &self.gp,
            *t,
            *s,
            candidates,
            predictors,
            src_sent,
            tgt_sent,
            replies,
            target_freq,
            source_freq,
            0.9,
            [1.0, 0.7, 1.3, 0.5],
        );
        let params = MappingParams::random(t, s, 3, &mut rng).unwrap();
        (problem, TransferMapping::learned(params), batch)
    }
}

/// `max_i |a_i - f_i| / max(|a|_inf, |f|_inf)`.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff = analytic
        .iter()
        .zip(numeric)
        .fold(0.0f64, |m, (a, f)| m.max((a - f).abs()));
    let scale = inf(analytic).max(inf(numeric));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Central differences of `f` around `x`.
pub fn finite_difference(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut xv = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = xv[i];
            xv[i] = orig + h;
            let fp = f(&xv);
            xv[i] = orig - h;
            let fm = f(&xv);
            xv[i] = orig;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}
