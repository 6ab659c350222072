//! Graph representation learning on grid-world MDPs.
//!
//! The pipeline estimates an MDP graph from random transition samples, trains
//! unsupervised node embeddings on it, and feeds the embeddings to a DQN as
//! pretrained state inputs. Experiments compare learning curves across
//! representation methods.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assets;
pub mod dqn;
pub mod embeddings;
mod error;
pub mod gridworld;
pub mod harness;
pub mod mdpgraph;
pub mod numerics;
pub mod seed;

pub use error::{Error, Result};
