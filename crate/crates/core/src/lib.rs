pub mod agent;
pub mod apps;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod mdp;
pub mod metrics;
pub mod planner;
pub mod requirements;

pub use error::{Error, Result};
