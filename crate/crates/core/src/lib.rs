//! Simulation of broadcasting multiple blind signature schemes built on
//! quantum teleportation, together with attacks against them.

pub mod attacks;
pub mod bits;
pub mod crypto;
pub mod error;
pub mod improved;
pub mod netsim;
pub mod original;
pub mod report;
pub mod scenario;
pub mod stats;
pub mod verdict;

pub use bits::{BitsError, Bitstring};
pub use error::{ProtocolError, Result};
pub use verdict::{RejectReason, Verdict};

/// Deterministic generator used for every random draw in a run.
pub type SimRng = rand_chacha::ChaCha8Rng;
