//! Information-bottleneck local/global feature learning, with an exact
//! discrete-probability toolkit used to check the underlying bound.

pub mod autodiff;
pub mod config;
pub mod discretize;
pub mod losses;
pub mod model;
pub mod prob;
pub mod synth;
pub mod train;
pub mod verify;

pub use autodiff::{Tape, Tensor, Var};
pub use config::RunConfig;
pub use losses::{LossBreakdown, LossWeights, WeightMode};
pub use model::{MaskMode, ModelConfig, ModelParams};
pub use prob::{BoundReport, Categorical, DiscreteJoint};
pub use synth::{FactorSpec, Shift, Split, SynthDataset};
pub use train::metrics::{accuracy, auc, group_level_auc, logloss};
pub use train::trainer::{HistoryRow, MetricsRecord};
