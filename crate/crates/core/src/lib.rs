//! Group-sparse convex optimization and attention-guided block pruning.
//!
//! The crate is organized around a few cooperating pieces:
//!
//! - [`groups`]: partitions of coordinate indices into disjoint groups and the
//!   group-level norm/sparsity/selection primitives built on them.
//! - [`regularizers`]: the family of strictly increasing q-functions (absolute
//!   value, fractional powers, log-sum, Lambert-W-induced), the composite group
//!   regularizer `lambda * q_inv(sum_i q(|beta_i|))`, and the block
//!   soft-threshold proximal operator.
//! - [`objectives`]: strictly convex differentiable losses (multi-response
//!   least squares, multinomial logistic regression) with analytic gradients.
//! - [`reparam`]: masked reparameterizations (unnormalized softmax masks,
//!   l1-regularized masks, group powerpropagation) and their equivalent
//!   group regularizers.
//! - [`solvers`]: proximal gradient for group LASSO, reweighted group LASSO
//!   for nonconvex group penalties, and smooth gradient descent.
//! - [`ompr`]: orthogonal matching pursuit with replacement driven by group
//!   regularization.
//! - [`seqattn`]: phase-scheduled block pruning of small feed-forward networks
//!   (attention-guided phase-scheduled pruning plus the ACDC / magnitude /
//!   powerpropagation baselines) with manual backpropagation.
//! - [`oracle`]: brute-force support enumeration, global-minimum probing and
//!   restricted strong convexity/smoothness estimation for small instances.

pub mod error;
pub mod groups;
pub mod linalg;
pub mod objectives;
pub mod ompr;
pub mod oracle;
pub mod regularizers;
pub mod reparam;
pub mod rng;
pub mod seqattn;
pub mod solvers;
pub mod synth;

pub use error::{Error, Result};
pub use groups::{GroupPartition, GroupVector};
