//! AdamW training with a cosine schedule, checkpoints and ablation runs.

pub mod ablation;
pub mod checkpoint;
pub mod config;
pub mod diagnostics;
pub mod optim;
pub mod trainer;

pub use ablation::{ablation_rows, run_ablation, AblationAxis, AblationRow, AblationTable};
pub use config::TrainConfig;
pub use diagnostics::check_objective_gradients;
pub use optim::{adamw_step, cosine_lr, AdamHyper, AdamState};
pub use trainer::{prepare_cloud, train, EpochReport, FrozenEncoders, Model, TrainOutcome};
