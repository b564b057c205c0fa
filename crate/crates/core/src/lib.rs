//! Joint UE and beam selection for multi-AP millimeter-wave networks.
//!
//! A network has `N_A` access points, `N_U` user equipments and a codebook of
//! `N_B` beams per AP. Every AP serves at most one UE per scheduling slot, and
//! every UE is served by at most one AP. The goal is the selection that
//! maximizes the weighted sum rate under mutual interference.
//!
//! Solvers:
//!
//! - [`exhaustive`]: exact search over beam vectors with an optimal UE matching.
//! - [`mcmc`]: Metropolis search over beam vectors.
//! - [`lig`]: a local interaction game solved by log-linear learning.
//! - [`greedy`]: two fast greedy heuristics.
//!
//! Support modules: [`instance`] for the data model and objective,
//! [`matching`] for max-weight bipartite matching, [`reduction`] for the
//! independent-set gadget, [`channel`] for a synthetic mmWave channel model,
//! and [`sim`] for the slot-level simulator.

pub mod anneal;
pub mod channel;
mod error;
pub mod exhaustive;
pub mod greedy;
pub mod instance;
pub mod lig;
pub mod matching;
pub mod mcmc;
pub mod reduction;
pub mod sim;

pub use anneal::Schedule;
pub use error::{Error, Result};
pub use instance::{Instance, Link, RssTensor, Selection};
