//! The alternating loop: train options against start distributions, plan on
//! the expected tables, and re-derive the distributions from the resulting
//! hierarchical policy.

use std::time::Instant;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abstraction::AbstractSpec;
use crate::avi::{expected_vi, extract_policy, AbstractPolicy, PolicyKind, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::estimation::{EstimationConfig, EstimationJob, ExpectedAdp};
use crate::geometry::AxisBox;
use crate::policy::{train_option, ArsConfig, Controller, OptionPolicy, SubMdpTask};
use crate::rng::{derive_seed, stream_rng};

/// Per-region pools of start states; all states carry equal weight.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionDistribution {
    pub pools: Vec<Vec<Vec<f64>>>,
    pub capacity: usize,
    /// Mixing weights used by each aggregation so far.
    pub history: Vec<f64>,
}

/// Uniform samples from a square of half-width `init_fraction * half_width`
/// around each region centre.
pub fn initial_distribution(
    spec: &AbstractSpec,
    capacity: usize,
    init_fraction: f64,
    seed: u64,
) -> RegionDistribution {
    let mut rng = stream_rng(seed, &[0x1d]);
    let pools = spec
        .regions
        .iter()
        .map(|r| {
            let half: Vec<f64> = r.bbox().half_widths();
            let b = AxisBox::new(
                r.center.iter().zip(&half).map(|(c, h)| c - init_fraction * h).collect(),
                r.center.iter().zip(&half).map(|(c, h)| c + init_fraction * h).collect(),
            );
            (0..capacity).map(|_| b.sample(&mut rng)).collect()
        })
        .collect();
    RegionDistribution {
        pools,
        capacity,
        history: Vec::new(),
    }
}

/// `(1 - alpha) D + alpha D_bar` per region, drawn as `ceil(alpha * capacity)`
/// states from `D_bar` (with replacement) and the rest from `D` (a random
/// subset in original order, so `alpha = 0` leaves `D` unchanged).
pub fn aggregate(d: &RegionDistribution, d_bar: &[Vec<Vec<f64>>], alpha: f64, seed: u64) -> Result<RegionDistribution> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("mixing weight {alpha} outside [0, 1]")));
    }
    let cap = d.capacity;
    let mut pools = Vec::with_capacity(d.pools.len());
    for (r, old) in d.pools.iter().enumerate() {
        let fresh = d_bar.get(r).map(|p| p.as_slice()).unwrap_or(&[]);
        if old.is_empty() && fresh.is_empty() {
            log::warn!("region {r}: no states in either distribution, skipped");
            pools.push(Vec::new());
            continue;
        }
        let mut rng = stream_rng(seed, &[r as u64]);
        let n_new = if old.is_empty() { cap } else { (alpha * cap as f64).ceil() as usize };
        let source = if fresh.is_empty() {
            log::debug!("region {r}: not visited, keeping previous pool");
            old.as_slice()
        } else {
            fresh
        };
        let mut pool: Vec<Vec<f64>> = (0..n_new)
            .map(|_| source[rng.random_range(0..source.len())].clone())
            .collect();
        let rest = cap - n_new;
        if rest <= old.len() {
            let mut idx = index::sample(&mut rng, old.len(), rest).into_vec();
            idx.sort_unstable();
            pool.extend(idx.into_iter().map(|i| old[i].clone()));
        } else {
            pool.extend(old.iter().cloned());
            pool.extend((old.len()..rest).map(|_| old[rng.random_range(0..old.len())].clone()));
        }
        pools.push(pool);
    }
    let mut history = d.history.clone();
    history.push(alpha);
    Ok(RegionDistribution {
        pools,
        capacity: cap,
        history,
    })
}

/// Abstract policy plus one controller per option id.
pub struct HierarchicalPolicy<'a, C> {
    pub policy: &'a AbstractPolicy,
    pub options: &'a [(usize, usize)],
    pub controllers: &'a [Option<C>],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    /// `(region, entry state)` each time an option ended in a region.
    pub entries: Vec<(usize, Vec<f64>)>,
    pub reached_goal: bool,
    pub discounted_reward: f64,
    pub steps: usize,
    pub option_calls: usize,
}

/// Runs options chosen by the abstract policy until the goal, a region with
/// no choice, an option timeout, or `max_option_steps` option calls.
pub fn execute_hierarchical<E: Environment + ?Sized, C: Controller>(
    env: &E,
    spec: &AbstractSpec,
    hp: &HierarchicalPolicy<C>,
    s0: &[f64],
    max_option_steps: usize,
    option_horizon: usize,
    seed: u64,
) -> Result<Execution> {
    let gamma = env.gamma();
    let mut rng = stream_rng(seed, &[]);
    let mut s = s0.to_vec();
    let mut out = Execution {
        entries: Vec::new(),
        reached_goal: false,
        discounted_reward: 0.0,
        steps: 0,
        option_calls: 0,
    };
    let mut region = spec.region_of(&s);
    if region == Some(spec.goal_id) {
        out.reached_goal = true;
        return Ok(out);
    }
    let mut disc = 1.0;
    while out.option_calls < max_option_steps {
        let Some(r) = region else { break };
        let Some(o) = hp.policy.choice.get(r).copied().flatten() else { break };
        let Some(ctrl) = hp.controllers.get(o).and_then(|c| c.as_ref()) else { break };
        if hp.options[o].0 != r {
            return Err(Error::Structural(format!("option {o} chosen in region {r} but starts elsewhere")));
        }
        out.option_calls += 1;
        let mut next_region = None;
        for _ in 0..option_horizon {
            let a = ctrl.action(&s);
            let tr = env.transition(&s, &a, &mut rng)?;
            out.discounted_reward += disc * tr.reward;
            disc *= gamma;
            out.steps += 1;
            s = tr.next;
            if let Some(k) = spec.terminal_region(&s, r) {
                next_region = Some(k);
                break;
            }
        }
        let Some(k) = next_region else { break };
        out.entries.push((k, s.clone()));
        if k == spec.goal_id {
            out.reached_goal = true;
            break;
        }
        region = Some(k);
    }
    Ok(out)
}

/// Region-entry states (and initial states) collected from `n_episodes`
/// hierarchical rollouts; also returns the simulator steps used.
pub fn induce_distribution<E: Environment + ?Sized, C: Controller>(
    env: &E,
    spec: &AbstractSpec,
    hp: &HierarchicalPolicy<C>,
    n_episodes: usize,
    max_option_steps: usize,
    option_horizon: usize,
    seed: u64,
) -> Result<(Vec<Vec<Vec<f64>>>, u64)> {
    let mut pools = vec![Vec::new(); spec.n_regions()];
    let mut steps = 0;
    for e in 0..n_episodes {
        let mut rng = stream_rng(seed, &[e as u64, 0]);
        let s0 = env.sample_initial(&mut rng);
        if let Some(r) = spec.region_of(&s0) {
            pools[r].push(s0.clone());
        }
        let ex = execute_hierarchical(env, spec, hp, &s0, max_option_steps, option_horizon, derive_seed(seed, &[e as u64, 1]))?;
        steps += ex.steps as u64;
        for (r, s) in ex.entries {
            pools[r].push(s);
        }
    }
    Ok((pools, steps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub success_probability: f64,
    pub mean_discounted_reward: f64,
    pub episodes: usize,
    pub env_steps: u64,
}

/// Hierarchical rollouts from the initial distribution.
pub fn evaluate<E: Environment + ?Sized, C: Controller>(
    env: &E,
    spec: &AbstractSpec,
    hp: &HierarchicalPolicy<C>,
    n_episodes: usize,
    max_option_steps: usize,
    option_horizon: usize,
    seed: u64,
) -> Result<EvalReport> {
    let mut successes = 0;
    let mut total = 0.0;
    let mut steps = 0;
    for e in 0..n_episodes {
        let mut rng = stream_rng(seed, &[e as u64, 0]);
        let s0 = env.sample_initial(&mut rng);
        let ex = execute_hierarchical(env, spec, hp, &s0, max_option_steps, option_horizon, derive_seed(seed, &[e as u64, 1]))?;
        successes += ex.reached_goal as usize;
        total += ex.discounted_reward;
        steps += ex.steps as u64;
    }
    let n = n_episodes.max(1) as f64;
    Ok(EvalReport {
        success_probability: successes as f64 / n,
        mean_discounted_reward: total / n,
        episodes: n_episodes,
        env_steps: steps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum AlphaSchedule {
    Constant(f64),
    /// `alpha_i = 1 / (i + 1)` for the aggregation after iteration `i` (1-based).
    Harmonic,
}

impl AlphaSchedule {
    pub fn at(&self, iteration: usize) -> f64 {
        match *self {
            AlphaSchedule::Constant(a) => a,
            AlphaSchedule::Harmonic => 1.0 / (iteration as f64 + 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AaviConfig {
    pub n_iterations: usize,
    pub alpha: AlphaSchedule,
    pub pool_capacity: usize,
    pub init_fraction: f64,
    pub induction_episodes: usize,
    /// Option calls per hierarchical episode; `None` means twice the region count.
    pub max_option_steps: Option<usize>,
    pub eval_episodes: usize,
    /// Stop after the iteration that exhausts this many simulator steps.
    pub step_budget: Option<u64>,
    /// Length scale of the shaped training reward; the default is the room
    /// side length of the built-in layouts.
    pub distance_scale: f64,
    pub ars: ArsConfig,
    pub estimation: EstimationConfig,
}

impl Default for AaviConfig {
    fn default() -> Self {
        Self {
            n_iterations: 10,
            alpha: AlphaSchedule::Constant(0.5),
            pool_capacity: 200,
            init_fraction: 0.25,
            induction_episodes: 50,
            max_option_steps: None,
            eval_episodes: 100,
            step_budget: None,
            distance_scale: 8.0,
            ars: ArsConfig::default(),
            estimation: EstimationConfig::default(),
        }
    }
}

impl AaviConfig {
    pub fn validate(&self) -> Result<()> {
        self.ars.validate()?;
        if self.n_iterations == 0 {
            return Err(Error::Config("at least one iteration is required".into()));
        }
        if self.pool_capacity == 0 || !(self.distance_scale > 0.0) {
            return Err(Error::Config("pool capacity and distance scale must be positive".into()));
        }
        if let AlphaSchedule::Constant(a) = self.alpha {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::Config(format!("alpha {a} outside [0, 1]")));
            }
        }
        if self.step_budget == Some(0) {
            return Err(Error::Config("step budget must be positive".into()));
        }
        Ok(())
    }

    pub fn option_cap(&self, spec: &AbstractSpec) -> usize {
        self.max_option_steps.unwrap_or(2 * spec.n_regions())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub iteration: usize,
    pub env_steps: u64,
    pub success_prob: f64,
    pub disc_reward: f64,
    pub wall_secs: f64,
}

/// State of the loop after an iteration.
pub struct AaviState {
    pub iteration: usize,
    pub options: Vec<OptionPolicy>,
    pub policy: AbstractPolicy,
    pub expected: ExpectedAdp,
    pub distribution: RegionDistribution,
    pub curve: Vec<CurveRecord>,
    pub env_steps: u64,
    pub aggregations: usize,
}

impl AaviState {
    pub fn plan(&self, spec: &AbstractSpec) -> Vec<usize> {
        self.policy.plan(&self.expected.options, spec.initial_id)
    }
}

/// Runs the loop; `observer` sees the state after every iteration.
pub fn run_aavi<E: Environment + ?Sized>(
    env: &E,
    spec: &AbstractSpec,
    cfg: &AaviConfig,
    seed: u64,
    mut observer: impl FnMut(&AaviState) -> Result<()>,
) -> Result<AaviState> {
    cfg.validate()?;
    let report = crate::abstraction::validate(spec);
    if !report.is_valid() {
        return Err(Error::Structural(report.to_string()));
    }
    let edges = spec.edge_list();
    let cap = cfg.option_cap(spec);
    let horizon = cfg.estimation.horizon;
    let started = Instant::now();
    let mut options: Vec<OptionPolicy> = (0..edges.len())
        .map(|o| OptionPolicy::new(env.state_dim(), env.max_speed(), &mut stream_rng(seed, &[0x0b, o as u64])))
        .collect();
    let mut dist = initial_distribution(spec, cfg.pool_capacity, cfg.init_fraction, seed);
    let mut state: Option<AaviState> = None;
    let mut env_steps = 0u64;
    let mut curve = Vec::new();
    let mut aggregations = 0;
    for it in 1..=cfg.n_iterations {
        // (a) train every edge against the current pools
        let trained: Vec<Result<u64>> = options
            .par_iter_mut()
            .zip(edges.par_iter())
            .enumerate()
            .map(|(o, (pol, &(src, tgt)))| {
                let task = SubMdpTask {
                    spec,
                    source: src,
                    target: tgt,
                    starts: &dist.pools[src],
                    distance_scale: cfg.distance_scale,
                };
                train_option(env, &task, pol, &cfg.ars, derive_seed(seed, &[it as u64, o as u64]))
                    .map(|s| s.env_steps)
            })
            .collect();
        for t in trained {
            env_steps += t?;
        }
        // (b) expected tables under D
        let slots: Vec<Option<&OptionPolicy>> = options.iter().map(Some).collect();
        let job = EstimationJob {
            env,
            spec,
            options: &slots,
            horizon,
            m_rollouts: cfg.estimation.m_rollouts,
            seed: derive_seed(seed, &[it as u64, 0xe5]),
        };
        let (expected, est_steps) = job.estimate_expected(&dist.pools, cfg.estimation.m_starts)?;
        env_steps += est_steps;
        // (c) plan
        let vi = expected_vi(&expected, DEFAULT_TOL, DEFAULT_MAX_ITERS);
        let policy = extract_policy(&vi.q, &expected.options, &expected.available, spec.n_regions(), spec.goal_id, PolicyKind::Expected)?;
        let hp = HierarchicalPolicy {
            policy: &policy,
            options: &expected.options,
            controllers: &slots,
        };
        let eval = evaluate(env, spec, &hp, cfg.eval_episodes, cap, horizon, derive_seed(seed, &[it as u64, 0xe7]))?;
        // (d), (e) skipped after the last iteration
        let last = it == cfg.n_iterations || cfg.step_budget.is_some_and(|b| env_steps >= b);
        if !last {
            let (d_bar, ind_steps) = induce_distribution(
                env,
                spec,
                &hp,
                cfg.induction_episodes,
                cap,
                horizon,
                derive_seed(seed, &[it as u64, 0x1a]),
            )?;
            env_steps += ind_steps;
            dist = aggregate(&dist, &d_bar, cfg.alpha.at(it), derive_seed(seed, &[it as u64, 0xa9]))?;
            aggregations += 1;
        }
        curve.push(CurveRecord {
            iteration: it,
            env_steps,
            success_prob: eval.success_probability,
            disc_reward: eval.mean_discounted_reward,
            wall_secs: started.elapsed().as_secs_f64(),
        });
        log::info!(
            "iteration {it}: steps {env_steps}, success {:.2}, reward {:.4}, plan {:?}",
            eval.success_probability,
            eval.mean_discounted_reward,
            policy.plan(&expected.options, spec.initial_id)
        );
        let snapshot = AaviState {
            iteration: it,
            options: options.clone(),
            policy,
            expected,
            distribution: dist.clone(),
            curve: curve.clone(),
            env_steps,
            aggregations,
        };
        observer(&snapshot)?;
        state = Some(snapshot);
        if last {
            break;
        }
    }
    Ok(state.expect("at least one iteration"))
}
