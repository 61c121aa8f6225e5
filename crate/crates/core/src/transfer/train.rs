use log::debug;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::loss::{
    act_frequencies, is_fully_pinned, reply_pairs, slot_sentences, transitions, LossBreakdown,
    Predictors, TransferProblem,
};
use super::mapping::{Block, MappingParams, Matrices, TransferMapping};
use super::predictor::{fit_predictor, PredictorConfig};
use crate::dialog::{candidate_actions, SummaryLayout};
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::ontology::Ontology;
use crate::user_sim::{rng_for, EpisodeLog};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransferConfig {
    pub gamma: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub dim: usize,
    pub adam: AdamConfig,
    pub epochs: usize,
    /// Lower bound on optimizer steps, so tiny target sets still train.
    pub min_steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub predictor: PredictorConfig,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            gamma: 1.0,
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1.0,
            lambda4: 1.0,
            dim: 8,
            adam: AdamConfig::default(),
            epochs: 20,
            min_steps: 200,
            batch_size: 32,
            seed: 0,
            predictor: PredictorConfig::default(),
        }
    }
}

impl TransferConfig {
    pub fn lambdas(&self) -> [f64; 4] {
        [self.lambda1, self.lambda2, self.lambda3, self.lambda4]
    }

    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma {} outside (0, 1]", self.gamma)));
        }
        if self.lambdas().iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::Config("regularizer weights must be finite and non-negative".into()));
        }
        if self.dim == 0 || self.batch_size == 0 {
            return Err(Error::Config("dim and batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Data shared by every transfer run.
#[derive(Debug, Clone, Copy)]
pub struct TransferInputs<'a> {
    pub source_model: &'a GpModel,
    pub source_logs: &'a [EpisodeLog],
    pub target_logs: &'a [EpisodeLog],
    pub source: &'a Ontology,
    pub target: &'a Ontology,
}

/// Per-epoch mean of each loss component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub steps: u64,
    pub total: f64,
    pub td: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferOutcome {
    pub mapping: TransferMapping,
    pub loss_trace: Vec<LossRecord>,
}

/// Pretrain the frozen predictors and collect every regularizer dataset.
pub fn build_problem<'a>(inputs: &TransferInputs<'a>, config: &TransferConfig) -> Result<TransferProblem<'a>> {
    config.validate()?;
    if inputs.target_logs.is_empty() {
        return Err(Error::Empty("target dialogues"));
    }
    let (src, tgt) = (inputs.source, inputs.target);
    let source_sentences = slot_sentences(inputs.source_logs, src);
    let target_sentences = slot_sentences(inputs.target_logs, tgt);
    let source_replies = reply_pairs(inputs.source_logs, src);
    let target_replies = reply_pairs(inputs.target_logs, tgt);
    let mut rng = rng_for(config.seed, 11);
    let pc = &config.predictor;
    let predictors = Predictors {
        slot_target: fit_predictor(&target_sentences, ("target acts", "target slots"), pc, &mut rng)?,
        slot_source: fit_predictor(&source_sentences, ("source acts", "source slots"), pc, &mut rng)?,
        user_source: fit_predictor(&source_replies, ("source replies", "source user acts"), pc, &mut rng)?,
    };
    Ok(TransferProblem::assemble(
        inputs.source_model,
        SummaryLayout::of(tgt),
        SummaryLayout::of(src),
        candidate_actions(tgt).into_iter().map(|c| c.action.0).collect(),
        predictors,
        source_sentences,
        target_sentences,
        target_replies,
        act_frequencies(inputs.target_logs, tgt),
        act_frequencies(inputs.source_logs, src),
        config.gamma,
        config.lambdas(),
    ))
}

/// Learn both the act and the slot mapping.
pub fn train_transfer(inputs: &TransferInputs, config: &TransferConfig) -> Result<TransferOutcome> {
    train_transfer_with(inputs, config, Block::Learned, Block::Learned)
}

/// Train with either block optionally pinned; pinned blocks are left untouched.
pub fn train_transfer_with(
    inputs: &TransferInputs,
    config: &TransferConfig,
    acts: Block,
    slots: Block,
) -> Result<TransferOutcome> {
    let problem = build_problem(inputs, config)?;
    let mut rng = rng_for(config.seed, 12);
    let params = MappingParams::random(&problem.target, &problem.source, config.dim, &mut rng)?;
    let mut mapping = TransferMapping { params, acts, slots };
    let mut loss_trace = Vec::new();
    if is_fully_pinned(&mapping) {
        return Ok(TransferOutcome { mapping, loss_trace });
    }

    let data = transitions(inputs.target_logs);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut flat = mapping.params.flatten();
    let mut adam = Adam::new(flat.len(), config.adam);
    let mut epoch = 0;
    while epoch < config.epochs || adam.steps() < config.min_steps as u64 {
        order.shuffle(&mut rng);
        let mut sum = LossBreakdown {
            total: 0.0,
            td: 0.0,
            r1: 0.0,
            r2: 0.0,
            r3: 0.0,
            r4: 0.0,
            grad: Vec::new(),
        };
        let mut n_batches = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<_> = chunk.iter().map(|&i| data[i].clone()).collect();
            let b = problem.total_loss(&mapping, &batch)?;
            adam.step(&mut flat, &b.grad)?;
            mapping.params.set_flat(&flat)?;
            sum.total += b.total;
            sum.td += b.td;
            sum.r1 += b.r1;
            sum.r2 += b.r2;
            sum.r3 += b.r3;
            sum.r4 += b.r4;
            n_batches += 1.0;
        }
        let rec = LossRecord {
            epoch,
            steps: adam.steps(),
            total: sum.total / n_batches,
            td: sum.td / n_batches,
            r1: sum.r1 / n_batches,
            r2: sum.r2 / n_batches,
            r3: sum.r3 / n_batches,
            r4: sum.r4 / n_batches,
        };
        debug!("transfer epoch {epoch}: {rec:?}");
        loss_trace.push(rec);
        epoch += 1;
    }
    if !mapping.params.is_finite() {
        return Err(Error::NonFinite("mapping embeddings"));
    }
    Ok(TransferOutcome { mapping, loss_trace })
}

/// JSON dump of a trained mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingSnapshot {
    pub version: u32,
    pub target_acts: Vec<String>,
    pub source_acts: Vec<String>,
    pub target_slots: Vec<String>,
    pub source_slots: Vec<String>,
    pub mapping: TransferMapping,
    pub matrices: Matrices,
    pub config: Option<TransferConfig>,
    pub loss_trace: Vec<LossRecord>,
}

impl MappingSnapshot {
    pub const VERSION: u32 = 1;

    pub fn new(
        outcome: &TransferOutcome,
        source: &Ontology,
        target: &Ontology,
        config: Option<TransferConfig>,
    ) -> Result<Self> {
        let names = |o: &Ontology| -> (Vec<String>, Vec<String>) {
            (
                (0..o.n_acts()).map(|i| o.act_name(i).to_string()).collect(),
                o.slot_names().map(str::to_string).collect(),
            )
        };
        let (target_acts, target_slots) = names(target);
        let (source_acts, source_slots) = names(source);
        Ok(MappingSnapshot {
            version: Self::VERSION,
            target_acts,
            source_acts,
            target_slots,
            source_slots,
            mapping: outcome.mapping.clone(),
            matrices: outcome.mapping.matrices()?,
            config,
            loss_trace: outcome.loss_trace.clone(),
        })
    }
}
