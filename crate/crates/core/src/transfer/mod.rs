//! Mapping a target domain onto a source Q-function.

pub mod adam;
pub mod loss;
pub mod mapping;
pub mod mat;
pub mod predictor;
pub mod train;

pub use adam::{adam_step, Adam, AdamConfig};
pub use loss::{
    reg_frequency, reg_slot_preservation, reg_state_continuity, reg_user_prediction, td_loss,
    LossBreakdown, Transition, TransferProblem,
};
pub use mapping::{
    act_similarity_matrix, q_transfer, slot_similarity_matrix, translate_act, translate_sentence,
    translate_state, Block, Direction, MappingParams, Matrices, TransferMapping, TransferQ,
};
pub use mat::Mat;
pub use predictor::{fit_predictor, Predictor, PredictorConfig};
pub use train::{
    build_problem, train_transfer, train_transfer_with, LossRecord, MappingSnapshot,
    TransferConfig, TransferInputs, TransferOutcome,
};
