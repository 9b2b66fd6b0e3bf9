//! Drivers that turn a downstream objective into sampling requirements and
//! let GOSPRL collect them.

mod bandit;
mod diameter;
mod gfcf;

pub use bandit::{best_state_identification, phase_lengths, BestStateConfig, BestStateOutcome, StateRewards};
pub use diameter::{estimate_diameter, DiameterConfig, DiameterEstimate};
pub use gfcf::{empirical_mdp, gfcf_plan, gfcf_requirements};
