//! Gaussian-process Q-function fitted on Monte-Carlo returns-to-go.
//!
//! Inputs are concatenated `[state; action]` summary vectors. Near-duplicate
//! inputs are merged into one retained point whose target is the running mean
//! and whose noise variance is `noise / count`; for exact duplicates this is
//! the same posterior as keeping every copy.

use std::collections::HashMap;

use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dialog::{joint_input, Candidate};
use crate::error::{Error, Result};
use crate::ontology::Ontology;
use crate::user_sim::{run_episode, EpisodeLog, Policy, RewardMode};
use crate::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelParams {
    pub signal_variance: f64,
    pub length_scale: f64,
    pub noise_variance: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            signal_variance: 25.0,
            length_scale: 1.0,
            noise_variance: 1.0,
        }
    }
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Squared-exponential kernel `s^2 exp(-|x - x'|^2 / (2 l^2))`.
pub fn kernel(x: &[f64], y: &[f64], params: &KernelParams) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            actual: y.len(),
        });
    }
    Ok(kernel_unchecked(x, y, params))
}

#[inline]
fn kernel_unchecked(x: &[f64], y: &[f64], params: &KernelParams) -> f64 {
    let l2 = params.length_scale * params.length_scale;
    params.signal_variance * (-sq_dist(x, y) / (2.0 * l2)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpConfig {
    pub kernel: KernelParams,
    /// Maximum number of retained points.
    pub budget: usize,
    /// Normalized similarity above which a new point merges into a retained one.
    pub novelty_threshold: f64,
    pub prior_mean: PriorMean,
}

/// Constant the posterior mean falls back to far from the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorMean {
    Zero,
    /// Mean of the accepted training targets.
    #[default]
    DataMean,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            kernel: KernelParams::default(),
            budget: 500,
            novelty_threshold: 0.999,
            prior_mean: PriorMean::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GpModel {
    dim: usize,
    params: KernelParams,
    prior_mean: f64,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    counts: Vec<usize>,
    alpha: Vec<f64>,
    chol_l: Option<DMatrix<f64>>,
}

impl GpModel {
    /// Prior-only model: mean 0, variance `signal_variance` everywhere.
    pub fn empty(dim: usize, params: KernelParams) -> Self {
        GpModel {
            dim,
            params,
            prior_mean: 0.0,
            inputs: Vec::new(),
            targets: Vec::new(),
            counts: Vec::new(),
            alpha: Vec::new(),
            chol_l: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn prior_mean(&self) -> f64 {
        self.prior_mean
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    /// Mean target of each retained point.
    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Per-point noise variance on the diagonal of the Gram matrix.
    pub fn noise(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| self.params.noise_variance / c as f64)
            .collect()
    }

    fn from_points(
        dim: usize,
        params: KernelParams,
        prior_mean: f64,
        inputs: Vec<Vec<f64>>,
        targets: Vec<f64>,
        counts: Vec<usize>,
    ) -> Result<Self> {
        if !prior_mean.is_finite() {
            return Err(Error::NonFinite("GP prior mean"));
        }
        let mut model = GpModel::empty(dim, params);
        model.prior_mean = prior_mean;
        model.inputs = inputs;
        model.targets = targets;
        model.counts = counts;
        model.factorize()?;
        Ok(model)
    }

    fn factorize(&mut self) -> Result<()> {
        let n = self.inputs.len();
        if n == 0 {
            self.alpha.clear();
            self.chol_l = None;
            return Ok(());
        }
        let noise = self.noise();
        let mut k = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = kernel_unchecked(&self.inputs[i], &self.inputs[j], &self.params);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
            k[(i, i)] += noise[i];
        }
        let chol = k
            .cholesky()
            .ok_or(Error::NonFinite("GP Gram matrix factorization"))?;
        let y = DVector::from_iterator(n, self.targets.iter().map(|t| t - self.prior_mean));
        let alpha = chol.solve(&y);
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("GP weights"));
        }
        self.alpha = alpha.iter().copied().collect();
        self.chol_l = Some(chol.l());
        Ok(())
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Posterior mean at `x`.
    pub fn mean(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.prior_mean
            + self
                .inputs
                .iter()
                .zip(&self.alpha)
                .map(|(xi, a)| a * kernel_unchecked(x, xi, &self.params))
                .sum::<f64>())
    }

    /// Posterior mean and its gradient with respect to `x`.
    pub fn mean_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_dim(x)?;
        let l2 = self.params.length_scale * self.params.length_scale;
        let mut grad = vec![0.0; self.dim];
        let mut mean = 0.0;
        for (xi, a) in self.inputs.iter().zip(&self.alpha) {
            let w = a * kernel_unchecked(x, xi, &self.params);
            mean += w;
            let s = w / l2;
            for ((g, xv), xiv) in grad.iter_mut().zip(x).zip(xi) {
                *g += s * (xiv - xv);
            }
        }
        Ok((self.prior_mean + mean, grad))
    }

    /// Posterior mean and variance at `x`.
    pub fn mean_var(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.check_dim(x)?;
        let prior = self.params.signal_variance;
        let Some(l) = &self.chol_l else {
            return Ok((self.prior_mean, prior));
        };
        let kx = DVector::from_iterator(
            self.inputs.len(),
            self.inputs
                .iter()
                .map(|xi| kernel_unchecked(x, xi, &self.params)),
        );
        let mean = self.prior_mean + kx.iter().zip(&self.alpha).map(|(k, a)| k * a).sum::<f64>();
        let v = l
            .solve_lower_triangular(&kx)
            .ok_or(Error::NonFinite("GP variance solve"))?;
        Ok((mean, (prior - v.norm_squared()).max(0.0)))
    }

    pub fn snapshot(&self) -> GpSnapshot {
        GpSnapshot {
            version: GpSnapshot::VERSION,
            dim: self.dim,
            params: self.params,
            prior_mean: self.prior_mean,
            inputs: self.inputs.clone(),
            targets: self.targets.clone(),
            counts: self.counts.clone(),
            alpha: self.alpha.clone(),
        }
    }

    pub fn from_snapshot(s: GpSnapshot) -> Result<Self> {
        if s.version != GpSnapshot::VERSION {
            return Err(Error::Config(format!(
                "unsupported GP snapshot version {}",
                s.version
            )));
        }
        let n = s.inputs.len();
        if s.targets.len() != n || s.counts.len() != n || s.alpha.len() != n {
            return Err(Error::Schema("GP snapshot arrays differ in length".into()));
        }
        if s.inputs.iter().any(|x| x.len() != s.dim) {
            return Err(Error::Schema("GP snapshot input of wrong dimension".into()));
        }
        if s.counts.contains(&0) {
            return Err(Error::Schema("GP snapshot point with zero count".into()));
        }
        GpModel::from_points(s.dim, s.params, s.prior_mean, s.inputs, s.targets, s.counts)
    }
}

/// Serialized form of a fitted [`GpModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpSnapshot {
    pub version: u32,
    pub dim: usize,
    pub params: KernelParams,
    #[serde(default)]
    pub prior_mean: f64,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub counts: Vec<usize>,
    pub alpha: Vec<f64>,
}

impl GpSnapshot {
    pub const VERSION: u32 = 1;
}

/// Exact GP regression on a novelty-filtered subset of `(input, target)` pairs.
pub fn fit_gp(dim: usize, data: &[(Vec<f64>, f64)], config: &GpConfig) -> Result<GpModel> {
    let p = &config.kernel;
    let mut inputs: Vec<Vec<f64>> = Vec::new();
    let mut sums: Vec<f64> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut exact: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut dropped = 0usize;
    for (x, y) in data {
        if x.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                actual: x.len(),
            });
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("GP training data"));
        }
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        let slot = match exact.get(&key) {
            Some(&i) => Some(i),
            None => {
                let best = inputs
                    .iter()
                    .enumerate()
                    .map(|(i, xi)| (i, kernel_unchecked(x, xi, p) / p.signal_variance))
                    .fold(None, |acc: Option<(usize, f64)>, (i, s)| match acc {
                        Some((_, bs)) if bs >= s => acc,
                        _ => Some((i, s)),
                    });
                match best {
                    Some((i, s)) if s > config.novelty_threshold => Some(i),
                    _ if inputs.len() < config.budget => {
                        inputs.push(x.clone());
                        sums.push(0.0);
                        counts.push(0);
                        exact.insert(key, inputs.len() - 1);
                        Some(inputs.len() - 1)
                    }
                    _ => None,
                }
            }
        };
        match slot {
            Some(i) => {
                sums[i] += y;
                counts[i] += 1;
            }
            None => dropped += 1,
        }
    }
    if dropped > 0 {
        debug!(
            "GP budget {} reached; dropped {dropped} novel points",
            config.budget
        );
    }
    let prior_mean = match config.prior_mean {
        PriorMean::Zero => 0.0,
        PriorMean::DataMean => {
            let n: usize = counts.iter().sum();
            if n == 0 {
                0.0
            } else {
                sums.iter().sum::<f64>() / n as f64
            }
        }
    };
    let targets = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect();
    GpModel::from_points(dim, config.kernel, prior_mean, inputs, targets, counts)
}

/// Something that scores summary (state, action) pairs.
pub trait QFunction {
    fn q_mean_var(&self, state: &[f64], action: &[f64]) -> Result<(f64, f64)>;

    fn q_mean(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        self.q_mean_var(state, action).map(|(m, _)| m)
    }
}

impl QFunction for GpModel {
    fn q_mean_var(&self, state: &[f64], action: &[f64]) -> Result<(f64, f64)> {
        self.mean_var(&joint_input(state, action))
    }

    fn q_mean(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        self.mean(&joint_input(state, action))
    }
}

impl<Q: QFunction + ?Sized> QFunction for &Q {
    fn q_mean_var(&self, state: &[f64], action: &[f64]) -> Result<(f64, f64)> {
        (**self).q_mean_var(state, action)
    }

    fn q_mean(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        (**self).q_mean(state, action)
    }
}

pub fn q_mean_var(model: &GpModel, state: &[f64], action: &[f64]) -> Result<(f64, f64)> {
    model.q_mean_var(state, action)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectMode {
    GreedyMean,
    Thompson,
    EpsilonGreedy(f64),
}

fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Pick a candidate index; ties go to the lowest index.
pub fn select_action<Q: QFunction + ?Sized>(
    q: &Q,
    state: &[f64],
    candidates: &[Candidate],
    mode: SelectMode,
    rng: &mut impl Rng,
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate list"));
    }
    match mode {
        SelectMode::GreedyMean => greedy(q, state, candidates),
        SelectMode::Thompson => {
            let mut samples = Vec::with_capacity(candidates.len());
            for c in candidates {
                let (m, v) = q.q_mean_var(state, &c.action)?;
                let z: f64 = StandardNormal.sample(rng);
                samples.push(m + v.sqrt() * z);
            }
            Ok(argmax_first(samples.into_iter()))
        }
        SelectMode::EpsilonGreedy(eps) => {
            if rng.random::<f64>() < eps {
                Ok(rng.random_range(0..candidates.len()))
            } else {
                greedy(q, state, candidates)
            }
        }
    }
}

fn greedy<Q: QFunction + ?Sized>(q: &Q, state: &[f64], candidates: &[Candidate]) -> Result<usize> {
    let means = candidates
        .iter()
        .map(|c| q.q_mean(state, &c.action))
        .collect::<Result<Vec<_>>>()?;
    Ok(argmax_first(means.into_iter()))
}

/// Acts by [`select_action`] on a Q-function.
#[derive(Debug, Clone)]
pub struct QPolicy<Q> {
    pub q: Q,
    pub mode: SelectMode,
}

impl<Q: QFunction> Policy for QPolicy<Q> {
    fn choose(
        &self,
        state: &crate::dialog::SummaryState,
        candidates: &[Candidate],
        rng: &mut SimRng,
    ) -> Result<crate::dialog::SummaryAction> {
        let i = select_action(&self.q, state, candidates, self.mode, rng)?;
        Ok(candidates[i].action.clone())
    }
}

/// `(input, return-to-go)` for every turn of every episode.
pub fn return_dataset(logs: &[EpisodeLog]) -> Vec<(Vec<f64>, f64)> {
    logs.iter()
        .flat_map(|log| {
            log.turns
                .iter()
                .zip(log.returns_to_go())
                .map(|(t, g)| (joint_input(&t.state, &t.action), g))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SourceSchedule {
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub refit_every: usize,
    /// Refit on at most this many of the latest episodes; 0 keeps all.
    pub window: usize,
    pub max_turns: usize,
    pub reward_mode: RewardMode,
    pub gp: GpConfig,
}

impl Default for SourceSchedule {
    fn default() -> Self {
        SourceSchedule {
            epsilon_start: 0.5,
            epsilon_end: 0.05,
            refit_every: 50,
            window: 100,
            max_turns: 20,
            reward_mode: RewardMode::TerminalOnly,
            gp: GpConfig {
                kernel: KernelParams {
                    length_scale: 0.5,
                    ..KernelParams::default()
                },
                ..GpConfig::default()
            },
        }
    }
}

/// Batch Monte-Carlo control: epsilon-greedy episodes on the current GP,
/// refitting on all returns so far every `refit_every` episodes.
pub fn train_source_policy(
    ontology: &Ontology,
    n_dialogues: usize,
    rng: &mut SimRng,
    schedule: &SourceSchedule,
) -> Result<(GpModel, Vec<EpisodeLog>)> {
    if n_dialogues == 0 {
        return Err(Error::Config(
            "source training needs at least one dialogue".into(),
        ));
    }
    let dim = crate::dialog::SummaryLayout::of(ontology).input_dim();
    let mut model = GpModel::empty(dim, schedule.gp.kernel);
    let mut logs = Vec::with_capacity(n_dialogues);
    let span = (n_dialogues.max(2) - 1) as f64;
    for i in 0..n_dialogues {
        let t = i as f64 / span;
        let eps = schedule.epsilon_start + (schedule.epsilon_end - schedule.epsilon_start) * t;
        let policy = QPolicy {
            q: &model,
            mode: SelectMode::EpsilonGreedy(eps),
        };
        logs.push(run_episode(
            &policy,
            ontology,
            rng,
            schedule.max_turns,
            schedule.reward_mode,
        )?);
        if (i + 1) % schedule.refit_every.max(1) == 0 || i + 1 == n_dialogues {
            // Newest episodes first, so the budget keeps the most on-policy returns.
            let from = match schedule.window {
                0 => 0,
                w => logs.len().saturating_sub(w),
            };
            let mut data = return_dataset(&logs[from..]);
            data.reverse();
            model = fit_gp(dim, &data, &schedule.gp)?;
            debug!(
                "source episode {}: {} GP points, eps {eps:.3}",
                i + 1,
                model.len()
            );
        }
    }
    Ok((model, logs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialog::{candidate_actions, SummaryAction};
    use crate::user_sim::rng_for;

    fn params(noise: f64) -> KernelParams {
        KernelParams {
            signal_variance: 1.0,
            length_scale: 1.0,
            noise_variance: noise,
        }
    }

    #[test]
    fn kernel_values() {
        let p = params(1.0);
        let x = [0.3, -1.0, 2.0];
        assert_eq!(kernel(&x, &x, &p).unwrap(), 1.0);
        let y = [1.3, 0.0, 2.0];
        assert!((kernel(&x, &y, &p).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(kernel(&x, &y, &p).unwrap(), kernel(&y, &x, &p).unwrap());
        assert!(kernel(&x, &[1.0], &p).is_err());
    }

    #[test]
    fn empty_model_is_the_prior() {
        let m = GpModel::empty(2, KernelParams::default());
        assert_eq!(m.mean_var(&[0.1, 0.2]).unwrap(), (0.0, 25.0));
    }

    #[test]
    fn single_point_interpolates() {
        let m = fit_gp(
            2,
            &[(vec![1.0, 0.0], 7.5)],
            &GpConfig {
                kernel: params(1e-9),
                ..GpConfig::default()
            },
        )
        .unwrap();
        let (mean, var) = m.mean_var(&[1.0, 0.0]).unwrap();
        assert!((mean - 7.5).abs() < 1e-6);
        assert!(var < 1e-6);
    }

    #[test]
    fn far_queries_revert_to_prior() {
        let m = fit_gp(
            1,
            &[(vec![0.0], 3.0), (vec![0.5], -2.0)],
            &GpConfig::default(),
        )
        .unwrap();
        assert_eq!(m.prior_mean(), 0.5);
        let (mean, var) = m.mean_var(&[100.0]).unwrap();
        assert!((mean - 0.5).abs() < 1e-12);
        assert!((var - 25.0).abs() < 1e-9);

        let zero = GpConfig {
            prior_mean: PriorMean::Zero,
            ..GpConfig::default()
        };
        let m = fit_gp(1, &[(vec![0.0], 3.0), (vec![0.5], -2.0)], &zero).unwrap();
        assert!(m.mean(&[100.0]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn duplicates_merge_losslessly() {
        let cfg = GpConfig {
            kernel: params(0.5),
            ..GpConfig::default()
        };
        let merged = fit_gp(
            1,
            &[(vec![0.0], 1.0), (vec![0.0], 3.0), (vec![1.0], 0.0)],
            &cfg,
        )
        .unwrap();
        assert_eq!(merged.len(), 2);
        assert_eq!(merged.counts(), &[2, 1]);
        // closed form with both copies kept: 3x3 system
        let k = |a: f64, b: f64| (-(a - b) * (a - b) / 2.0f64).exp();
        let xs = [0.0, 0.0, 1.0];
        let ys = [1.0, 3.0, 0.0];
        let prior = 4.0 / 3.0;
        assert!((merged.prior_mean() - prior).abs() < 1e-15);
        let centered: Vec<f64> = ys.iter().map(|y| y - prior).collect();
        let mut a = DMatrix::from_fn(3, 3, |i, j| k(xs[i], xs[j]));
        for i in 0..3 {
            a[(i, i)] += 0.5;
        }
        let alpha = a.lu().solve(&DVector::from_column_slice(&centered)).unwrap();
        let q = 0.3;
        let full: f64 = prior + (0..3).map(|i| alpha[i] * k(q, xs[i])).sum::<f64>();
        assert!((merged.mean(&[q]).unwrap() - full).abs() < 1e-12);
    }

    #[test]
    fn budget_and_bad_data() {
        let cfg = GpConfig {
            budget: 2,
            ..GpConfig::default()
        };
        let data: Vec<_> = (0..5).map(|i| (vec![i as f64 * 3.0], i as f64)).collect();
        assert_eq!(fit_gp(1, &data, &cfg).unwrap().len(), 2);
        assert!(matches!(
            fit_gp(1, &[(vec![0.0], f64::NAN)], &cfg),
            Err(Error::NonFinite(_))
        ));
        assert!(fit_gp(2, &[(vec![0.0], 1.0)], &cfg).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = vec![
            (vec![0.0, 1.0, 0.5], 2.0),
            (vec![1.0, 0.0, 0.0], -1.0),
            (vec![0.2, 0.2, 0.9], 4.0),
        ];
        let m = fit_gp(3, &data, &GpConfig::default()).unwrap();
        let x = [0.3, 0.4, 0.1];
        let (_, g) = m.mean_and_grad(&x).unwrap();
        for d in 0..3 {
            let mut hi = x;
            let mut lo = x;
            hi[d] += 1e-6;
            lo[d] -= 1e-6;
            let fd = (m.mean(&hi).unwrap() - m.mean(&lo).unwrap()) / 2e-6;
            assert!((fd - g[d]).abs() < 1e-6, "{fd} vs {}", g[d]);
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let m = fit_gp(
            1,
            &[(vec![0.0], 3.0), (vec![0.5], -2.0)],
            &GpConfig::default(),
        )
        .unwrap();
        let s = m.snapshot();
        let json = serde_json::to_string(&s).unwrap();
        let back = GpModel::from_snapshot(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.alpha(), m.alpha());
        let mut bad = s.clone();
        bad.version = 99;
        assert!(GpModel::from_snapshot(bad).is_err());
    }

    fn two_candidates() -> Vec<Candidate> {
        vec![
            Candidate {
                act: 0,
                slot: None,
                action: SummaryAction(vec![1.0, 0.0]),
            },
            Candidate {
                act: 1,
                slot: None,
                action: SummaryAction(vec![0.0, 1.0]),
            },
        ]
    }

    #[test]
    fn selection_modes() {
        let empty = GpModel::empty(3, KernelParams::default());
        let cands = two_candidates();
        let mut rng = rng_for(0, 0);
        // all means equal: lowest index
        assert_eq!(
            select_action(&empty, &[0.0], &cands, SelectMode::GreedyMean, &mut rng).unwrap(),
            0
        );
        let one = &cands[1..];
        for mode in [
            SelectMode::GreedyMean,
            SelectMode::Thompson,
            SelectMode::EpsilonGreedy(1.0),
        ] {
            assert_eq!(
                select_action(&empty, &[0.0], one, mode, &mut rng).unwrap(),
                0
            );
        }
        assert!(select_action(&empty, &[0.0], &[], SelectMode::GreedyMean, &mut rng).is_err());

        let m = fit_gp(
            3,
            &[(vec![0.0, 0.0, 1.0], 5.0), (vec![0.0, 1.0, 0.0], -5.0)],
            &GpConfig::default(),
        )
        .unwrap();
        assert_eq!(
            select_action(&m, &[0.0], &cands, SelectMode::GreedyMean, &mut rng).unwrap(),
            1
        );
        let draw = |seed| {
            let mut r = rng_for(seed, 3);
            (0..20)
                .map(|_| select_action(&m, &[0.0], &cands, SelectMode::Thompson, &mut r).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(4), draw(4));
    }

    #[test]
    fn tiny_source_training_runs() {
        let o = Ontology::from_json(
            r#"{"name": "t", "speech_acts": ["hello", "inform", "request", "deny", "offer", "bye"],
                "informable_slots": {"price": ["cheap", "expensive"]},
                "requestable_slots": ["phone"],
                "entities": [{"name": "a", "price": "cheap", "phone": "1"}]}"#,
        )
        .unwrap();
        let (m, logs) =
            train_source_policy(&o, 1, &mut rng_for(0, 0), &SourceSchedule::default()).unwrap();
        assert_eq!(logs.len(), 1);
        assert!(!m.is_empty());
        let run = |seed| {
            train_source_policy(&o, 60, &mut rng_for(seed, 0), &SourceSchedule::default())
                .unwrap()
                .0
                .alpha()
                .to_vec()
        };
        assert_eq!(run(5), run(5));
        assert_eq!(candidate_actions(&o).len(), 5);
    }
}
