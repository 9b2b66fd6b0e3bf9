use rand::Rng;

use super::{Agent, Session};
use crate::error::Result;

/// Uniformly random actions until the requirements are met.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomAgent;

impl Agent for RandomAgent {
    fn name(&self) -> &str {
        "random"
    }

    fn run_session(&self, session: &mut Session<'_>) -> Result<()> {
        let a_n = session.env().n_actions();
        session.begin_attempt(0);
        while !session.finished() {
            let a = session.agent_rng.gen_range(0..a_n);
            session.step(a);
        }
        session.end_attempt(session.schedule().all_met());
        Ok(())
    }
}
