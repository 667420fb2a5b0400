//! Bayesian-network scenario workbench.
//!
//! A discrete BN engine with exact inference ([`infer`]), d-separation
//! ([`dsep`]), object-oriented and dynamic composition ([`compose`],
//! [`dbn`]), influence ranking and scenario evaluation ([`analysis`]), a
//! management catalogue with hazard rubric and catchment loads
//! ([`management`]) feeding the science network ([`pipeline`]), and an
//! RJMCMC probit regression for monthly bloom prediction ([`probit`]).
//! Model files are read and written by [`io`].

pub mod analysis;
pub mod compose;
pub mod dbn;
pub mod dsep;
pub mod exec;
pub mod factor;
pub mod generate;
pub mod infer;
pub mod io;
pub mod management;
pub mod network;
pub mod pipeline;
pub mod probit;

pub use dsep::d_separated;
pub use exec::Execution;
pub use factor::Factor;
pub use infer::{elimination_order, enumerate_joint, joint_posterior, posterior, InferError, PosteriorDistribution};
pub use network::{Evidence, Network, NetworkError, NodeSpec};

/// Validates node definitions into an immutable [`Network`].
pub fn build_network(nodes: Vec<NodeSpec>) -> Result<Network, NetworkError> {
    Network::build(nodes)
}
