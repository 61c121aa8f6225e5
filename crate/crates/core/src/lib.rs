//! Cross-domain dialogue policy transfer with learned speech-act and slot
//! similarity matrices.

pub mod baselines;
pub mod dialog;
pub mod error;
pub mod evaluation;
pub mod gp;
pub mod ontology;
pub mod transfer;
pub mod user_sim;

pub use dialog::{
    candidate_actions, dst_update, summarize_act, summarize_state, AbstractedAct, Candidate,
    DialogueState, SummaryAction, SummaryLayout, SummaryState,
};
pub use error::{Error, Result};
pub use gp::{fit_gp, GpConfig, GpModel, KernelParams, QFunction, SelectMode};
pub use ontology::{load_alias, load_ontology, ActRole, AliasTable, Entity, Ontology};
pub use user_sim::{run_episode, EpisodeLog, Goal, OraclePolicy, Policy, RewardMode};

/// Random stream used throughout simulation and training.
pub type SimRng = rand_chacha::ChaCha8Rng;
