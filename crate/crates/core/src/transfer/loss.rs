//! Transfer objective: semi-gradient TD error of the translated Q-function
//! plus four regularizers, with analytic gradients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mapping::{translate_sentence, translate_state, Block, Matrices, TransferMapping};
use super::mat::{softmax_rows_backward, Mat};
use super::predictor::{cross_entropy, cross_entropy_grad, weighted_unique, Predictor};
use crate::dialog::{joint_input, summarize_act, SummaryLayout};
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::ontology::Ontology;
use crate::user_sim::EpisodeLog;

/// One observed step `(h_n, y_n, r_n, h_{n+1})`; `next_state` is `None` at
/// the end of a dialogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Option<Vec<f64>>,
}

pub fn transitions(logs: &[EpisodeLog]) -> Vec<Transition> {
    let mut out = Vec::new();
    for log in logs {
        let rewards = log.immediate_rewards();
        for (n, t) in log.turns.iter().enumerate() {
            out.push(Transition {
                state: t.state.0.clone(),
                action: t.action.0.clone(),
                reward: rewards[n],
                next_state: log.turns.get(n + 1).map(|nx| nx.state.0.clone()),
            });
        }
    }
    out
}

/// Weighted `(input, target distribution, weight)` triples; weights sum to 1.
pub type WeightedSet = Vec<(Vec<f64>, Vec<f64>, f64)>;

/// Act and slot blocks of every user and agent sentence carrying slots, with
/// the slot block normalized to sum to one.
pub fn slot_sentences(logs: &[EpisodeLog], ontology: &Ontology) -> Vec<(Vec<f64>, Vec<f64>)> {
    let layout = SummaryLayout::of(ontology);
    let mut out = Vec::new();
    let mut push = |y: &[f64]| {
        let act = &y[layout.act_range()];
        let s = &y[layout.slot_range()];
        let mass: f64 = s.iter().sum();
        if mass > 0.0 {
            out.push((act.to_vec(), s.iter().map(|v| v / mass).collect()));
        }
    };
    for log in logs {
        for t in &log.turns {
            push(&t.action);
        }
        for a in log.user_acts() {
            if let Ok(y) = summarize_act(a, ontology) {
                push(&y);
            }
        }
    }
    out
}

/// `(agent reply vector, one-hot of the user act that answered it)`.
pub fn reply_pairs(logs: &[EpisodeLog], ontology: &Ontology) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut out = Vec::new();
    for log in logs {
        for (n, t) in log.turns.iter().enumerate() {
            let next = match log.turns.get(n + 1) {
                Some(nx) => Some(&nx.user_act),
                None => log.final_user_act.as_ref(),
            };
            let Some(next) = next else { continue };
            let Some(k) = ontology.act_index(&next.act) else { continue };
            let mut one_hot = vec![0.0; ontology.n_acts()];
            one_hot[k] = 1.0;
            out.push((t.action.0.clone(), one_hot));
        }
    }
    out
}

/// Add-one smoothed user and agent act frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActFrequencies {
    pub user: Vec<f64>,
    pub agent: Vec<f64>,
}

pub fn act_frequencies(logs: &[EpisodeLog], ontology: &Ontology) -> ActFrequencies {
    let n = ontology.n_acts();
    let mut user = vec![1.0; n];
    let mut agent = vec![1.0; n];
    for log in logs {
        for a in log.user_acts() {
            if let Some(k) = ontology.act_index(&a.act) {
                user[k] += 1.0;
            }
        }
        for t in &log.turns {
            if let Some(k) = ontology.act_index(&t.agent_act.act) {
                agent[k] += 1.0;
            }
        }
    }
    let norm = |v: &mut Vec<f64>| {
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
    };
    norm(&mut user);
    norm(&mut agent);
    ActFrequencies { user, agent }
}

/// Frozen predictors trained before the mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictors {
    /// Target act distribution to target slot distribution.
    pub slot_target: Predictor,
    /// Source act distribution to source slot distribution.
    pub slot_source: Predictor,
    /// Source agent reply to the next source user act.
    pub user_source: Predictor,
}

/// Everything the objective needs apart from the mapping itself.
#[derive(Debug, Clone)]
pub struct TransferProblem<'a> {
    pub source_model: &'a GpModel,
    pub target: SummaryLayout,
    pub source: SummaryLayout,
    /// Target candidate action vectors for the bootstrap max.
    pub candidates: Vec<Vec<f64>>,
    pub predictors: Predictors,
    pub source_sentences: WeightedSet,
    pub target_sentences: WeightedSet,
    pub target_replies: WeightedSet,
    pub target_freq: ActFrequencies,
    pub source_freq: ActFrequencies,
    pub gamma: f64,
    pub lambdas: [f64; 4],
}

/// Loss value, its parts, and the gradient over the flattened embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub td: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    #[serde(skip)]
    pub grad: Vec<f64>,
}

impl TransferProblem<'_> {
    /// Builds the weighted regularizer datasets from raw pairs.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble<'a>(
        source_model: &'a GpModel,
        target: SummaryLayout,
        source: SummaryLayout,
        candidates: Vec<Vec<f64>>,
        predictors: Predictors,
        source_sentences: Vec<(Vec<f64>, Vec<f64>)>,
        target_sentences: Vec<(Vec<f64>, Vec<f64>)>,
        target_replies: Vec<(Vec<f64>, Vec<f64>)>,
        target_freq: ActFrequencies,
        source_freq: ActFrequencies,
        gamma: f64,
        lambdas: [f64; 4],
    ) -> TransferProblem<'a> {
        TransferProblem {
            source_model,
            target,
            source,
            candidates,
            predictors,
            source_sentences: weighted_unique(source_sentences),
            target_sentences: weighted_unique(target_sentences),
            target_replies: weighted_unique(target_replies),
            target_freq,
            source_freq,
            gamma,
            lambdas,
        }
    }

    /// Value and embedding gradient of the full objective on `batch`.
    pub fn total_loss(&self, mapping: &TransferMapping, batch: &[Transition]) -> Result<LossBreakdown> {
        let mats = mapping.matrices()?;
        let mut g = mats.zeros_like();
        let td = td_loss_grad(self, &mats, batch, Some(&mut g))?;
        let [l1, l2, l3, l4] = self.lambdas;
        let mut part = |lambda: f64, f: &dyn Fn(&mut Matrices) -> Result<f64>| -> Result<f64> {
            if lambda == 0.0 {
                return Ok(0.0);
            }
            let mut gi = mats.zeros_like();
            let v = f(&mut gi)?;
            g.add_scaled(lambda, &gi);
            Ok(v)
        };
        let r1 = part(l1, &|gi| r1_grad(self, &mats, Some(gi)))?;
        let r2 = part(l2, &|gi| r2_grad(self, &mats, Some(gi)))?;
        let r3 = part(l3, &|gi| r3_grad(self, &mats, Some(gi)))?;
        let r4 = part(l4, &|gi| Ok(r4_grad(&mats.slot_t2s, Some(&mut gi.slot_t2s))))?;
        let total = td + l1 * r1 + l2 * r2 + l3 * r3 + l4 * r4;
        let grad = embedding_grad(mapping, &mats, &g);
        if !total.is_finite() || !grad.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("transfer loss"));
        }
        Ok(LossBreakdown {
            total,
            td,
            r1,
            r2,
            r3,
            r4,
            grad,
        })
    }

    /// Bootstrapped TD targets `r + gamma * max_y' Q^t(h', y')` at the current
    /// mapping.
    pub fn td_targets(&self, mapping: &TransferMapping, batch: &[Transition]) -> Result<Vec<f64>> {
        let mats = mapping.matrices()?;
        batch
            .iter()
            .map(|tr| match &tr.next_state {
                Some(next) => Ok(tr.reward + self.gamma * q_max(self, &mats, next)?),
                None => Ok(tr.reward),
            })
            .collect()
    }

    /// Replace every transition by a terminal one carrying its current TD
    /// target, so the bootstrap term becomes an explicit constant.
    pub fn freeze_targets(&self, mapping: &TransferMapping, batch: &[Transition]) -> Result<Vec<Transition>> {
        Ok(batch
            .iter()
            .zip(self.td_targets(mapping, batch)?)
            .map(|(tr, target)| Transition {
                reward: target,
                next_state: None,
                ..tr.clone()
            })
            .collect())
    }

    /// Loss value only.
    pub fn loss_value(&self, mapping: &TransferMapping, batch: &[Transition]) -> Result<f64> {
        let mats = mapping.matrices()?;
        let [l1, l2, l3, l4] = self.lambdas;
        let mut total = td_loss_grad(self, &mats, batch, None)?;
        if l1 != 0.0 {
            total += l1 * r1_grad(self, &mats, None)?;
        }
        if l2 != 0.0 {
            total += l2 * r2_grad(self, &mats, None)?;
        }
        if l3 != 0.0 {
            total += l3 * r3_grad(self, &mats, None)?;
        }
        if l4 != 0.0 {
            total += l4 * r4_grad(&mats.slot_t2s, None);
        }
        Ok(total)
    }
}

/// Chain `dL/dM` through the row softmaxes into the embeddings. Pinned
/// blocks contribute nothing.
pub fn embedding_grad(mapping: &TransferMapping, mats: &Matrices, g: &Matrices) -> Vec<f64> {
    let p = &mapping.params;
    let block = |learned: bool, t2s: &Mat, s2t: &Mat, gt2s: &Mat, gs2t: &Mat, et: &Mat, es: &Mat| {
        if !learned {
            return (Mat::zeros(et.rows, et.cols), Mat::zeros(es.rows, es.cols));
        }
        let mut dz = softmax_rows_backward(t2s, gt2s);
        dz.add_scaled(1.0, &softmax_rows_backward(s2t, gs2t).transpose());
        (dz.matmul(es), dz.transpose().matmul(et))
    };
    let (dat, das) = block(
        mapping.acts.is_learned(),
        &mats.act_t2s,
        &mats.act_s2t,
        &g.act_t2s,
        &g.act_s2t,
        &p.act_target,
        &p.act_source,
    );
    let (dst, dss) = block(
        mapping.slots.is_learned(),
        &mats.slot_t2s,
        &mats.slot_s2t,
        &g.slot_t2s,
        &g.slot_s2t,
        &p.slot_target,
        &p.slot_source,
    );
    let mut out = Vec::with_capacity(p.n_params());
    for m in [&dat, &das, &dst, &dss] {
        out.extend_from_slice(&m.data);
    }
    out
}

fn translated_input(p: &TransferProblem, mats: &Matrices, h: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let hs = translate_state(h, mats, &p.target, &p.source)?;
    let ys = translate_sentence(y, mats, &p.target, &p.source)?;
    Ok(joint_input(&hs, &ys))
}

fn q_max(p: &TransferProblem, mats: &Matrices, h: &[f64]) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for y in &p.candidates {
        best = best.max(p.source_model.mean(&translated_input(p, mats, h, y)?)?);
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::Empty("candidate actions"))
    }
}

/// Adds `scale * dQ/dM` at `(h, y)` given the GP input gradient `gx`.
fn accumulate_q_grad(p: &TransferProblem, h: &[f64], y: &[f64], gx: &[f64], scale: f64, g: &mut Matrices) {
    let (t, s) = (&p.target, &p.source);
    let off = s.state_dim();
    let shift = |r: std::ops::Range<usize>| r.start + off..r.end + off;
    g.act_t2s.add_outer(scale, &h[t.user_act_range()], &gx[s.user_act_range()]);
    g.slot_t2s.add_outer(scale, &h[t.constraint_range()], &gx[s.constraint_range()]);
    g.slot_t2s.add_outer(scale, &h[t.request_range()], &gx[s.request_range()]);
    g.act_t2s.add_outer(scale, &y[t.act_range()], &gx[shift(s.act_range())]);
    g.slot_t2s.add_outer(scale, &y[t.slot_range()], &gx[shift(s.slot_range())]);
}

fn td_loss_grad(
    p: &TransferProblem,
    mats: &Matrices,
    batch: &[Transition],
    grad: Option<&mut Matrices>,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("transition batch"));
    }
    let want_grad = grad.is_some();
    let scale = 1.0 / batch.len() as f64;
    let parts: Vec<(f64, Option<Matrices>)> = batch
        .par_iter()
        .map(|tr| -> Result<(f64, Option<Matrices>)> {
            let target = match &tr.next_state {
                Some(next) => tr.reward + p.gamma * q_max(p, mats, next)?,
                None => tr.reward,
            };
            let x = translated_input(p, mats, &tr.state, &tr.action)?;
            if !want_grad {
                let delta = target - p.source_model.mean(&x)?;
                return Ok((delta * delta, None));
            }
            let (q, gx) = p.source_model.mean_and_grad(&x)?;
            let delta = target - q;
            let mut gi = mats.zeros_like();
            accumulate_q_grad(p, &tr.state, &tr.action, &gx, -2.0 * delta * scale, &mut gi);
            Ok((delta * delta, Some(gi)))
        })
        .collect::<Result<_>>()?;
    let mut value = 0.0;
    let mut grad = grad;
    for (v, gi) in parts {
        value += v * scale;
        if let (Some(g), Some(gi)) = (grad.as_deref_mut(), gi) {
            g.add_scaled(1.0, &gi);
        }
    }
    Ok(value)
}

/// Mean CE of `(dest ∘ c ∘ src)(a)` against the observed slot vector.
#[allow(clippy::too_many_arguments)]
fn round_trip_ce(
    data: &WeightedSet,
    c: &Predictor,
    src: &Mat,
    dest: &Mat,
    mut grads: Option<(&mut Mat, &mut Mat)>,
) -> Result<f64> {
    let mut total = 0.0;
    for (a, s, w) in data {
        let u = src.left_mul(a)?;
        let pr = c.predict(&u);
        let q = dest.left_mul(&pr)?;
        total += w * cross_entropy(&q, s);
        if let Some((g_src, g_dest)) = grads.as_mut() {
            let gq = cross_entropy_grad(&q, s);
            g_dest.add_outer(*w, &pr, &gq);
            let gp = dest.mul_vec(&gq);
            let gu = c.input_grad(&pr, &gp);
            g_src.add_outer(*w, a, &gu);
        }
    }
    Ok(total)
}

fn r1_grad(p: &TransferProblem, mats: &Matrices, grad: Option<&mut Matrices>) -> Result<f64> {
    if p.source_sentences.is_empty() || p.target_sentences.is_empty() {
        return Err(Error::Empty("slot-preservation dataset"));
    }
    match grad {
        Some(g) => {
            let Matrices {
                act_t2s,
                act_s2t,
                slot_t2s,
                slot_s2t,
            } = g;
            let rs = round_trip_ce(
                &p.source_sentences,
                &p.predictors.slot_target,
                &mats.act_s2t,
                &mats.slot_t2s,
                Some((act_s2t, slot_t2s)),
            )?;
            let rt = round_trip_ce(
                &p.target_sentences,
                &p.predictors.slot_source,
                &mats.act_t2s,
                &mats.slot_s2t,
                Some((act_t2s, slot_s2t)),
            )?;
            Ok(rs + rt)
        }
        None => Ok(round_trip_ce(
            &p.source_sentences,
            &p.predictors.slot_target,
            &mats.act_s2t,
            &mats.slot_t2s,
            None,
        )? + round_trip_ce(
            &p.target_sentences,
            &p.predictors.slot_source,
            &mats.act_t2s,
            &mats.slot_s2t,
            None,
        )?),
    }
}

fn r2_grad(p: &TransferProblem, mats: &Matrices, mut grad: Option<&mut Matrices>) -> Result<f64> {
    if p.target_replies.is_empty() {
        return Err(Error::Empty("user-prediction dataset"));
    }
    let (t, s) = (&p.target, &p.source);
    let c = &p.predictors.user_source;
    let mut total = 0.0;
    for (y, next, w) in &p.target_replies {
        let x = translate_sentence(y, mats, t, s)?;
        let pr = c.predict(&x);
        let q = mats.act_s2t.left_mul(&pr)?;
        total += w * cross_entropy(&q, next);
        if let Some(g) = grad.as_deref_mut() {
            let gq = cross_entropy_grad(&q, next);
            g.act_s2t.add_outer(*w, &pr, &gq);
            let gx = c.input_grad(&pr, &mats.act_s2t.mul_vec(&gq));
            g.act_t2s.add_outer(*w, &y[t.act_range()], &gx[s.act_range()]);
            g.slot_t2s.add_outer(*w, &y[t.slot_range()], &gx[s.slot_range()]);
        }
    }
    Ok(total)
}

/// `KL(p ‖ q)` with `0 log 0 = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (pi, qi) in p.iter().zip(q) {
        if *pi > 0.0 {
            if *qi <= 0.0 {
                return Err(Error::ContractViolation("KL reference has a zero entry".into()));
            }
            total += pi * (pi / qi).ln();
        }
    }
    Ok(total)
}

fn kl_term(pt: &[f64], ps: &[f64], m: &Mat, grad: Option<&mut Mat>) -> Result<f64> {
    let q = m.left_mul(pt)?;
    let v = kl_divergence(&q, ps)?;
    if let Some(g) = grad {
        let gq: Vec<f64> = q
            .iter()
            .zip(ps)
            .map(|(qi, si)| if *qi > 0.0 { (qi / si).ln() + 1.0 } else { 0.0 })
            .collect();
        g.add_outer(1.0, pt, &gq);
    }
    Ok(v)
}

fn r3_grad(p: &TransferProblem, mats: &Matrices, mut grad: Option<&mut Matrices>) -> Result<f64> {
    let u = kl_term(
        &p.target_freq.user,
        &p.source_freq.user,
        &mats.act_t2s,
        grad.as_deref_mut().map(|g| &mut g.act_t2s),
    )?;
    let a = kl_term(
        &p.target_freq.agent,
        &p.source_freq.agent,
        &mats.act_t2s,
        grad.map(|g| &mut g.act_t2s),
    )?;
    Ok(u + a)
}

fn r4_grad(m: &Mat, grad: Option<&mut Mat>) -> f64 {
    let u = 1.0 / m.cols as f64;
    if let Some(g) = grad {
        for (gi, mi) in g.data.iter_mut().zip(&m.data) {
            *gi += 2.0 * (mi - u);
        }
    }
    m.data.iter().map(|v| (v - u) * (v - u)).sum()
}

/// Mean squared semi-gradient TD error of the translated Q-function.
pub fn td_loss(p: &TransferProblem, mapping: &TransferMapping, batch: &[Transition]) -> Result<f64> {
    td_loss_grad(p, &mapping.matrices()?, batch, None)
}

/// Round-trip slot-vector cross-entropy in both directions.
pub fn reg_slot_preservation(p: &TransferProblem, mapping: &TransferMapping) -> Result<f64> {
    r1_grad(p, &mapping.matrices()?, None)
}

/// Cross-entropy of the next target user act predicted through the source.
pub fn reg_user_prediction(p: &TransferProblem, mapping: &TransferMapping) -> Result<f64> {
    r2_grad(p, &mapping.matrices()?, None)
}

/// `KL(p_user^t M_a ‖ p_user^s) + KL(p_agent^t M_a ‖ p_agent^s)`.
pub fn reg_frequency(m_a: &Mat, target: &ActFrequencies, source: &ActFrequencies) -> Result<f64> {
    Ok(kl_term(&target.user, &source.user, m_a, None)? + kl_term(&target.agent, &source.agent, m_a, None)?)
}

/// `sum_ij (m_ij - 1/|S^s|)^2` over the target-to-source slot matrix.
pub fn reg_state_continuity(m_s: &Mat) -> f64 {
    r4_grad(m_s, None)
}

/// True when neither block is learned, so there is nothing to train.
pub fn is_fully_pinned(mapping: &TransferMapping) -> bool {
    matches!((&mapping.acts, &mapping.slots), (Block::Fixed { .. }, Block::Fixed { .. }))
}
