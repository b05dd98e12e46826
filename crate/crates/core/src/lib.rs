//! General preference representation learning.
//!
//! Responses are embedded as vectors in `R^{2k}` and compared through a
//! block-diagonal skew-symmetric operator, so every pairwise preference score
//! is antisymmetric by construction and `K` responses cost `K` embedding
//! evaluations. The crate provides:
//!
//! - [`prefcore`]: the scoring kernel (operator, score, logistic link).
//! - [`models`]: tabular GPM and Bradley-Terry models, O(K) score matrices.
//! - [`training`]: CE / MSE objectives, analytic gradients, SGD / Adam.
//! - [`expressiveness`]: constructive embeddings for arbitrary skew matrices.
//! - [`datasets`]: synthetic cyclic / transitive / skew generators and JSONL IO.
//! - [`gpo`]: general preference optimization on tabular softmax policies and
//!   a von Neumann winner checker backed by regret matching.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod datasets;
pub mod error;
pub mod expressiveness;
pub mod gpo;
pub mod models;
pub mod prefcore;
pub mod training;

pub use error::{PrefError, Result};
