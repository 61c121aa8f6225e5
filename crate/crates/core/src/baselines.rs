//! Comparison systems built from fixed or learned mappings.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dialog::SummaryLayout;
use crate::error::{Error, Result};
use crate::gp::{fit_gp, return_dataset, GpConfig, GpModel, QFunction};
use crate::ontology::{ActRole, AliasTable, Ontology};
use crate::transfer::{
    train_transfer_with, Block, Mat, TransferConfig, TransferInputs, TransferOutcome, TransferQ,
};
use crate::user_sim::{rng_for, EpisodeLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Promise,
    NoneTl,
    Rafs,
    Lafs,
    Fafs,
    Fals,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Promise,
        Variant::NoneTl,
        Variant::Rafs,
        Variant::Lafs,
        Variant::Fafs,
        Variant::Fals,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Promise => "promise",
            Variant::NoneTl => "nonetl",
            Variant::Rafs => "rafs",
            Variant::Lafs => "lafs",
            Variant::Fafs => "fafs",
            Variant::Fals => "fals",
        }
    }

    pub fn needs_alias(self) -> bool {
        matches!(self, Variant::Fafs | Variant::Fals)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Unknown {
                kind: "variant",
                name: s.to_string(),
            })
    }
}

/// One-to-one greedy pairing minimizing `|t_i - s_j|` over all pairs; ties
/// go to the lower target index, then the lower source index.
pub fn greedy_match(target: &[f64], source: &[f64]) -> Vec<Option<usize>> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(target.len() * source.len());
    for (i, t) in target.iter().enumerate() {
        for (j, s) in source.iter().enumerate() {
            pairs.push(((t - s).abs(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![None; target.len()];
    let mut used = vec![false; source.len()];
    for (_, i, j) in pairs {
        if out[i].is_none() && !used[j] {
            out[i] = Some(j);
            used[j] = true;
        }
    }
    out
}

/// Share of user request acts naming each requestable slot, add-one smoothed.
pub fn request_frequencies(ontology: &Ontology, logs: &[EpisodeLog]) -> Vec<f64> {
    let req = ontology.requestable_slots();
    let mut counts = vec![1.0; req.len()];
    for log in logs {
        for act in log.user_acts() {
            if ontology.role_of(&act.act) != Some(ActRole::Request) {
                continue;
            }
            for s in act.slots() {
                if let Some(k) = req.iter().position(|r| r == s) {
                    counts[k] += 1.0;
                }
            }
        }
    }
    let total: f64 = counts.iter().sum();
    counts.into_iter().map(|c| c / total).collect()
}

/// 0/1 slot matrix: informables matched on normalized value entropy,
/// requestables on request frequency; unmatched target slots get zero rows.
pub fn entropy_slot_matching(
    source: &Ontology,
    target: &Ontology,
    source_logs: &[EpisodeLog],
    target_logs: &[EpisodeLog],
) -> Result<Mat> {
    let entropies = |o: &Ontology| -> Result<Vec<f64>> {
        o.informable_slots()
            .keys()
            .map(|s| o.normalized_slot_entropy(s))
            .collect()
    };
    let inf = greedy_match(&entropies(target)?, &entropies(source)?);
    let req = greedy_match(
        &request_frequencies(target, target_logs),
        &request_frequencies(source, source_logs),
    );
    let mut m = Mat::zeros(target.n_slots(), source.n_slots());
    for (i, j) in inf.into_iter().enumerate() {
        if let Some(j) = j {
            m[(i, j)] = 1.0;
        }
    }
    let (ti, si) = (target.n_informable(), source.n_informable());
    for (i, j) in req.into_iter().enumerate() {
        if let Some(j) = j {
            m[(ti + i, si + j)] = 1.0;
        }
    }
    Ok(m)
}

/// Uniformly random one-to-one partial permutation, `n_target x n_source`.
pub fn random_act_mapping(n_source: usize, n_target: usize, rng: &mut impl Rng) -> Mat {
    let mut t: Vec<usize> = (0..n_target).collect();
    let mut s: Vec<usize> = (0..n_source).collect();
    t.shuffle(rng);
    s.shuffle(rng);
    let mut m = Mat::zeros(n_target, n_source);
    for (i, j) in t.into_iter().zip(s) {
        m[(i, j)] = 1.0;
    }
    m
}

/// Act and slot permutation matrices read from an alias table. Target names
/// absent from the table, or mapped to `null`, get zero rows.
pub fn ground_truth_mappings(alias: &AliasTable, source: &Ontology, target: &Ontology) -> Result<(Mat, Mat)> {
    let mut acts = Mat::zeros(target.n_acts(), source.n_acts());
    for (t, s) in &alias.acts {
        let i = target.act_index(t).ok_or_else(|| Error::Unknown {
            kind: "target act",
            name: t.clone(),
        })?;
        if let Some(s) = s {
            let j = source.act_index(s).ok_or_else(|| Error::Unknown {
                kind: "source act",
                name: s.clone(),
            })?;
            acts[(i, j)] = 1.0;
        }
    }
    let mut slots = Mat::zeros(target.n_slots(), source.n_slots());
    for (t, s) in &alias.slots {
        let i = target.slot_index(t).ok_or_else(|| Error::Unknown {
            kind: "target slot",
            name: t.clone(),
        })?;
        if let Some(s) = s {
            let j = source.slot_index(s).ok_or_else(|| Error::Unknown {
                kind: "source slot",
                name: s.clone(),
            })?;
            slots[(i, j)] = 1.0;
        }
    }
    Ok((acts, slots))
}

/// Inputs for [`build_variant`].
#[derive(Debug, Clone, Copy)]
pub struct VariantInputs<'a> {
    pub source_model: &'a GpModel,
    pub source_logs: &'a [EpisodeLog],
    pub target_logs: &'a [EpisodeLog],
    pub source: &'a Ontology,
    pub target: &'a Ontology,
    pub alias: Option<&'a AliasTable>,
    pub transfer: &'a TransferConfig,
    pub gp: &'a GpConfig,
}

#[derive(Debug, Clone)]
pub enum VariantModel {
    /// A GP fit on target dialogues alone.
    Native(GpModel),
    /// A mapping onto the source GP.
    Transfer(TransferOutcome),
}

#[derive(Debug, Clone)]
pub struct BuiltVariant {
    pub variant: Variant,
    pub model: VariantModel,
}

/// Q-function of a built variant.
#[derive(Debug, Clone)]
pub enum VariantQ<'a> {
    Native(&'a GpModel),
    Transfer(TransferQ<'a>),
}

impl QFunction for VariantQ<'_> {
    fn q_mean_var(&self, state: &[f64], action: &[f64]) -> Result<(f64, f64)> {
        match self {
            VariantQ::Native(g) => g.q_mean_var(state, action),
            VariantQ::Transfer(t) => t.q_mean_var(state, action),
        }
    }

    fn q_mean(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        match self {
            VariantQ::Native(g) => g.q_mean(state, action),
            VariantQ::Transfer(t) => t.q_mean(state, action),
        }
    }
}

impl BuiltVariant {
    pub fn q_function<'a>(
        &'a self,
        source_model: &'a GpModel,
        source: &Ontology,
        target: &Ontology,
    ) -> Result<VariantQ<'a>> {
        Ok(match &self.model {
            VariantModel::Native(g) => VariantQ::Native(g),
            VariantModel::Transfer(o) => VariantQ::Transfer(TransferQ::new(
                source_model,
                &o.mapping,
                SummaryLayout::of(target),
                SummaryLayout::of(source),
            )?),
        })
    }

    pub fn transfer(&self) -> Option<&TransferOutcome> {
        match &self.model {
            VariantModel::Transfer(o) => Some(o),
            VariantModel::Native(_) => None,
        }
    }
}

/// Assemble one comparison system.
pub fn build_variant(variant: Variant, inputs: &VariantInputs) -> Result<BuiltVariant> {
    let missing = |what: &'static str| Error::MissingIngredient {
        variant: variant.to_string(),
        missing: what,
    };
    if variant == Variant::NoneTl {
        let dim = SummaryLayout::of(inputs.target).input_dim();
        let model = if inputs.target_logs.is_empty() {
            GpModel::empty(dim, inputs.gp.kernel)
        } else {
            fit_gp(dim, &return_dataset(inputs.target_logs), inputs.gp)?
        };
        return Ok(BuiltVariant {
            variant,
            model: VariantModel::Native(model),
        });
    }
    if inputs.target_logs.is_empty() {
        return Err(missing("target dialogues"));
    }
    let truth = match (variant.needs_alias(), inputs.alias) {
        (true, None) => return Err(missing("alias table")),
        (true, Some(a)) => Some(ground_truth_mappings(a, inputs.source, inputs.target)?),
        (false, _) => None,
    };
    let entropy = || {
        entropy_slot_matching(inputs.source, inputs.target, inputs.source_logs, inputs.target_logs)
    };
    let (acts, slots) = match variant {
        Variant::Promise => (Block::Learned, Block::Learned),
        Variant::Rafs => {
            let mut rng = rng_for(inputs.transfer.seed, 21);
            let m = random_act_mapping(inputs.source.n_acts(), inputs.target.n_acts(), &mut rng);
            (Block::fixed(m), Block::fixed(entropy()?))
        }
        Variant::Lafs => (Block::Learned, Block::fixed(entropy()?)),
        Variant::Fafs => {
            let (a, s) = truth.expect("alias checked above");
            (Block::fixed(a), Block::fixed(s))
        }
        Variant::Fals => {
            let (a, _) = truth.expect("alias checked above");
            (Block::fixed(a), Block::Learned)
        }
        Variant::NoneTl => unreachable!(),
    };
    let t_inputs = TransferInputs {
        source_model: inputs.source_model,
        source_logs: inputs.source_logs,
        target_logs: inputs.target_logs,
        source: inputs.source,
        target: inputs.target,
    };
    let outcome = train_transfer_with(&t_inputs, inputs.transfer, acts, slots)?;
    Ok(BuiltVariant {
        variant,
        model: VariantModel::Transfer(outcome),
    })
}
