//! Phase-scheduled block pruning of small feed-forward networks with manual
//! backpropagation: attention-masked kernels, dense / sparsification /
//! sparse / finetune scheduling, and the magnitude, powerpropagation and
//! alternating-phase baselines.

mod layer;
mod network;
mod optimizer;
mod schedule;
mod train;

pub use layer::PruneLayer;
pub use network::{ForwardCache, Gradients, LossKind, Network, NetworkSpec, PruneAlgo, Targets};
pub use optimizer::{Optimizer, OptimizerKind};
pub use schedule::{sparsity_at, Phase, PhaseKind, PhaseSchedule, PhaseSpan};
pub use train::{
    default_schedule_for, train, train_network, train_network_observed, train_observed, MetricsRow,
    TrainConfig, TrainData, TrainOutcome,
};
