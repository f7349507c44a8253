//! Augmented Random Search (V2-t) for subgoal-transition policies.
//!
//! Each option is trained on the reduced MDP where every region other than
//! the source is a sink. Episodes stop on entering such a region. Entering a
//! region other than the target charges the sink's distance penalty for the
//! rest of the horizon, so stopping early in the wrong place never pays.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mlp::{MlpPolicy, Normalizer, OptionPolicy};
use crate::abstraction::AbstractSpec;
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArsConfig {
    pub step_size: f64,
    pub noise: f64,
    pub n_directions: usize,
    pub top_b: usize,
    pub iterations_per_round: usize,
    pub episode_horizon: usize,
    pub normalize: bool,
}

/// Settings used for the room experiments: a smaller step than the published
/// one (which diverges with unscaled perturbations here), a horizon of twice
/// the steps needed to cross two rooms, and few iterations per round so that
/// several alternations fit in the sample budget.
impl Default for ArsConfig {
    fn default() -> Self {
        Self {
            step_size: 0.05,
            iterations_per_round: 6,
            episode_horizon: 32,
            ..Self::published()
        }
    }
}

impl ArsConfig {
    /// The published hyperparameters.
    pub fn published() -> Self {
        Self {
            step_size: 0.3,
            noise: 0.05,
            n_directions: 30,
            top_b: 15,
            iterations_per_round: 300,
            episode_horizon: 100,
            normalize: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || !(self.noise > 0.0) {
            return Err(Error::Config("ARS step size and noise must be positive".into()));
        }
        if self.n_directions == 0 || self.top_b == 0 || self.top_b > self.n_directions {
            return Err(Error::Config(format!(
                "need 0 < top_b <= n_directions, got top_b={} n_directions={}",
                self.top_b, self.n_directions
            )));
        }
        if self.episode_horizon == 0 {
            return Err(Error::Config("episode horizon must be positive".into()));
        }
        Ok(())
    }
}

/// The reduced MDP for edge `source -> target`.
#[derive(Debug, Clone, Copy)]
pub struct SubMdpTask<'a> {
    pub spec: &'a AbstractSpec,
    pub source: usize,
    pub target: usize,
    /// States drawn from the conditional start distribution of `source`.
    pub starts: &'a [Vec<f64>],
    pub distance_scale: f64,
}

impl SubMdpTask<'_> {
    pub fn validate(&self) -> Result<()> {
        if !self.spec.edges.contains(&(self.source, self.target)) {
            return Err(Error::Structural(format!(
                "({}, {}) is not an edge",
                self.source, self.target
            )));
        }
        if self.starts.is_empty() {
            return Err(Error::Config(format!("empty start pool for region {}", self.source)));
        }
        Ok(())
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Sum of `-|s_{t+1} - center| / scale` over a sequence of successor states.
pub fn shaped_return(successors: &[Vec<f64>], center: &[f64], scale: f64) -> f64 {
    -successors.iter().map(|s| dist(s, center)).sum::<f64>() / scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub shaped_return: f64,
    pub steps: usize,
    pub terminal: Option<usize>,
}

/// Runs one training episode with explicit parameters.
#[allow(clippy::too_many_arguments)]
pub fn run_episode<E: Environment + ?Sized>(
    env: &E,
    task: &SubMdpTask,
    net: &MlpPolicy,
    params: &[f64],
    norm: Option<&Normalizer>,
    start: &[f64],
    horizon: usize,
    seed: u64,
    mut visited: Option<&mut Normalizer>,
) -> Result<EpisodeResult> {
    let center = &task.spec.regions[task.target].center;
    let mut rng = stream_rng(seed, &[]);
    let mut s = start.to_vec();
    let mut ret = 0.0;
    for t in 0..horizon {
        if let Some(v) = visited.as_deref_mut() {
            v.push(&s);
        }
        let a = net.act_with(params, &s, norm);
        s = env.transition(&s, &a, &mut rng)?.next;
        let d = dist(&s, center) / task.distance_scale;
        ret -= d;
        if let Some(r) = task.spec.terminal_region(&s, task.source) {
            if r != task.target {
                ret -= (horizon - t - 1) as f64 * d;
            }
            return Ok(EpisodeResult {
                shaped_return: ret,
                steps: t + 1,
                terminal: Some(r),
            });
        }
    }
    Ok(EpisodeResult {
        shaped_return: ret,
        steps: horizon,
        terminal: None,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainStats {
    /// Mean of the perturbed returns at each iteration.
    pub mean_returns: Vec<f64>,
    pub env_steps: u64,
    pub skipped_updates: usize,
}

impl TrainStats {
    pub fn mean_return(&self) -> f64 {
        self.mean_returns.last().copied().unwrap_or(f64::NAN)
    }
}

/// Runs `iterations_per_round` ARS iterations on `task`, updating `policy` in place.
pub fn train_option<E: Environment + ?Sized>(
    env: &E,
    task: &SubMdpTask,
    policy: &mut OptionPolicy,
    cfg: &ArsConfig,
    seed: u64,
) -> Result<TrainStats> {
    cfg.validate()?;
    task.validate()?;
    if cfg.normalize && policy.norm.count == 0.0 {
        for s in task.starts {
            policy.norm.push(s);
        }
    }
    let dim = policy.net.params.len();
    let n = cfg.n_directions;
    let mut stats = TrainStats::default();
    let mut deltas = vec![0.0; n * dim];
    let mut perturbed = vec![0.0; dim];
    let mut returns = vec![(0.0, 0.0); n];
    for it in 0..cfg.iterations_per_round {
        let mut rng = stream_rng(seed, &[it as u64]);
        for d in deltas.iter_mut() {
            *d = rng.sample(StandardNormal);
        }
        let frozen = cfg.normalize.then(|| policy.norm.clone());
        let mut seen = Normalizer::new(policy.net.input_dim());
        for k in 0..n {
            let start = &task.starts[rng.random_range(0..task.starts.len())];
            let delta = &deltas[k * dim..(k + 1) * dim];
            let mut pair = [0.0; 2];
            for (sign_idx, sign) in [1.0, -1.0].into_iter().enumerate() {
                for ((p, th), d) in perturbed.iter_mut().zip(&policy.net.params).zip(delta) {
                    *p = th + sign * cfg.noise * d;
                }
                let ep = run_episode(
                    env,
                    task,
                    &policy.net,
                    &perturbed,
                    frozen.as_ref(),
                    start,
                    cfg.episode_horizon,
                    crate::rng::derive_seed(seed, &[it as u64, k as u64, sign_idx as u64]),
                    Some(&mut seen),
                )?;
                stats.env_steps += ep.steps as u64;
                pair[sign_idx] = ep.shaped_return;
            }
            returns[k] = (pair[0], pair[1]);
        }
        let mean = returns.iter().map(|(a, b)| a + b).sum::<f64>() / (2 * n) as f64;
        stats.mean_returns.push(mean);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            let (a, b) = (returns[i].0.max(returns[i].1), returns[j].0.max(returns[j].1));
            b.total_cmp(&a).then(i.cmp(&j))
        });
        let top = &order[..cfg.top_b];
        let sel: Vec<f64> = top.iter().flat_map(|&k| [returns[k].0, returns[k].1]).collect();
        let m = sel.iter().sum::<f64>() / sel.len() as f64;
        let sd = (sel.iter().map(|r| (r - m) * (r - m)).sum::<f64>() / sel.len() as f64).sqrt();
        if sd > 0.0 {
            let scale = cfg.step_size / (cfg.top_b as f64 * sd);
            for &k in top {
                let w = scale * (returns[k].0 - returns[k].1);
                for (p, d) in policy.net.params.iter_mut().zip(&deltas[k * dim..(k + 1) * dim]) {
                    *p += w * d;
                }
            }
        } else {
            stats.skipped_updates += 1;
        }
        if cfg.normalize {
            policy.norm.merge(&seen);
        }
    }
    Ok(stats)
}
