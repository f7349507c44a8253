//! Option policies and their trainer.

pub mod ars;
pub mod mlp;

pub use ars::{run_episode, shaped_return, train_option, ArsConfig, EpisodeResult, SubMdpTask, TrainStats};
pub use mlp::{act, MlpPolicy, Normalizer, OptionPolicy};

/// Anything that maps a concrete state to an action.
pub trait Controller: Sync {
    fn action(&self, s: &[f64]) -> Vec<f64>;
}

impl Controller for OptionPolicy {
    fn action(&self, s: &[f64]) -> Vec<f64> {
        self.act(s).to_vec()
    }
}

impl<C: Controller + ?Sized> Controller for &C {
    fn action(&self, s: &[f64]) -> Vec<f64> {
        (**self).action(s)
    }
}
