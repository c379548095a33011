//! Dynamic extreme-learning-machine training engine.
//!
//! The output weights of a regularized ELM solve
//! `W = Y H' (H H' + k I)^{-1}`. This crate maintains that solution exactly
//! while hidden nodes are added and removed in blocks, without ever
//! re-inverting the full Gram matrix:
//!
//! * [`grow_q::QState`] carries the dense Gram inverse and updates it through
//!   the Schur complement of each inserted block;
//! * [`grow_ldl::LdlState`] carries inverse-LDL factors instead (unit upper
//!   triangular `L`, positive diagonal `D`, `L D L'` equal to the inverse)
//!   and re-triangularizes with diagonal-preserving plane rotations when
//!   nodes are removed;
//! * [`solve`] holds the direct solver both variants are verified against;
//! * [`session::Session`] ties a model, a dataset, and one engine together;
//! * [`cli`] exposes the whole thing as the `elm` command.

pub mod bench;
pub mod cli;
pub mod csvio;
pub mod error;
pub mod grow_ldl;
pub mod grow_q;
pub mod matrix;
pub mod model;
pub mod modelfile;
pub mod session;
pub mod shrink;
pub mod solve;

pub use error::{Error, Result};
pub use grow_ldl::LdlState;
pub use grow_q::QState;
pub use matrix::{permute_to_tail, spd_solve, Matrix, Permutation};
pub use model::{mse, Activation, Dataset, ElmModel, NodeBlock};
pub use session::{Session, SessionConfig, Variant, VerifyReport};
pub use shrink::{retriangularize, wide_givens, GivensPlan, GivensStep, RemovalPlan};
pub use solve::{build_gram, direct_weights, inverse_ldl_factorize, invert_to_q, pseudo_inverse, InverseLdl, RegularizedGram};
