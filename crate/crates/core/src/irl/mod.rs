//! Training engine: reward models, optimizers, forward pass, and the two IRL loops.

mod optim;
mod path_model;
mod reward;
mod train;
mod visitation;

pub use optim::{adam_step, AdamState, OptimizerConfig, OptimizerState};
pub use path_model::{path_gradient, path_log_likelihood, path_model, path_visitation, PathModel};
pub use reward::{mlp_backward, mlp_forward, LinearReward, MlpGradients, MlpReward, RewardModel, RewardParams};
pub use train::{
    policy_of, read_checkpoint, train_ccp, train_ccp_from_table, train_maxent, train_with, write_checkpoint, write_report_csv,
    Algorithm, Checkpoint, IterationRecord, TrainConfig, TrainReport, TrainStart,
};
pub use visitation::{
    default_horizon, demo_state_visits, feature_expectations_from_demos, feature_expectations_from_visitation, forward_pass,
    forward_pass_time_varying, state_action_visits, VisitationResult,
};
