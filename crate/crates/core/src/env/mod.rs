//! Simulatable concrete MDPs.

mod corridor;
mod rooms;

pub use corridor::Corridor;
pub use rooms::{build_env, EnvName, RoomEnv, RoomGeometry, RoomOverrides};

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::Result;
use crate::rng::SimRng;

/// Result of one simulator step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub next: Vec<f64>,
    pub reward: f64,
}

/// A concrete MDP that can be simulated from any state.
///
/// Deterministic environments ignore the random source passed to
/// [`Environment::transition`].
pub trait Environment: Sync {
    fn state_dim(&self) -> usize;

    fn action_dim(&self) -> usize;

    fn gamma(&self) -> f64;

    fn transition(&self, state: &[f64], action: &[f64], rng: &mut SimRng) -> Result<Transition>;

    /// Draws a state from the initial distribution.
    fn sample_initial(&self, rng: &mut SimRng) -> Vec<f64>;

    fn is_goal(&self, state: &[f64]) -> bool;

    /// Upper bound on the speed component of the action.
    fn max_speed(&self) -> f64 {
        1.0
    }
}

/// Wraps an environment and counts every simulator step.
pub struct CountingEnv<E> {
    pub inner: E,
    steps: AtomicU64,
}

impl<E> CountingEnv<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            steps: AtomicU64::new(0),
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps.load(Ordering::Relaxed)
    }
}

impl<E: Environment> Environment for CountingEnv<E> {
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }

    fn action_dim(&self) -> usize {
        self.inner.action_dim()
    }

    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    fn transition(&self, state: &[f64], action: &[f64], rng: &mut SimRng) -> Result<Transition> {
        self.steps.fetch_add(1, Ordering::Relaxed);
        self.inner.transition(state, action, rng)
    }

    fn sample_initial(&self, rng: &mut SimRng) -> Vec<f64> {
        self.inner.sample_initial(rng)
    }

    fn is_goal(&self, state: &[f64]) -> bool {
        self.inner.is_goal(state)
    }

    fn max_speed(&self) -> f64 {
        self.inner.max_speed()
    }
}

pub(crate) fn check_finite(what: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(crate::Error::InvalidInput(format!(
            "non-finite {what} component in {v:?}"
        )))
    }
}
