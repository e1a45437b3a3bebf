//! Exact analysis of finite two-player zero-sum stochastic games with perfect
//! information.
//!
//! The crate is organised bottom-up:
//!
//! * [`arena`]: the game graph, its text format, random generation and play sampling.
//! * [`payoff`]: the payoff catalog, exact evaluation on ultimately periodic
//!   words and on recurrent classes, and refuters for shift-invariance and
//!   submixing.
//! * [`chain`]: the Markov chain induced by a pair of finite-memory strategies.
//! * [`solve`]: expected payoffs, best responses, brute-force values, action
//!   classification and martingale checks.
//! * [`strategy`]: strategy representations and the reset, projection and
//!   trigger constructions.
//! * [`verify`]: the property harness that produces [`verify::VerificationReport`]s.
//!
//! All probabilities and values are exact rationals ([`Q`]). Floating point
//! only appears in Monte Carlo summaries.

pub mod arena;
pub mod chain;
pub mod error;
pub mod fixtures;
pub mod linalg;
pub mod payoff;
pub mod rational;
pub mod solve;
pub mod strategy;
pub mod verify;

pub use arena::{Arena, FinitePlay, LassoPlay, Player};
pub use chain::{InducedChain, RecurrentClassSummary};
pub use error::{Error, Result};
pub use payoff::{Colour, ColourKind, LassoWord, PayoffSpec, ShufflePattern};
pub use rational::Q;
pub use solve::{ActionClassification, ValueVector};
pub use strategy::{FiniteMemoryStrategy, PartitionAtState, PureStationaryStrategy, WeaknessSet};
pub use verify::{Verdict, VerificationReport};
