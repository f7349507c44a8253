//! Training, evaluation and transfer drivers plus learning-curve files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::aavi::{evaluate, run_aavi, AaviState, CurveRecord, EvalReport, HierarchicalPolicy};
use crate::abstraction::AbstractSpec;
use crate::avi::{
    check_contraction, conservative_policy_partial, interval_vi, suboptimality_bound, AbstractPolicy, IntervalVi,
    DEFAULT_MAX_ITERS, DEFAULT_TOL,
};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::estimation::{region_start_grid, EstimationConfig, EstimationJob, IntervalAdp};
use crate::policy::Controller;

use super::artifacts::{save_artifacts, save_options};
use super::config::ExperimentConfig;

pub const CURVE_HEADER: &str = "iteration,env_steps,success_prob,disc_reward,wall_secs";
pub const CURVE_FILE: &str = "curve.csv";
pub const MEAN_CURVE_FILE: &str = "curve_mean.csv";

pub fn curve_to_csv(curve: &[CurveRecord]) -> String {
    let mut out = format!("{CURVE_HEADER}\n");
    for c in curve {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.3}",
            c.iteration, c.env_steps, c.success_prob, c.disc_reward, c.wall_secs
        );
    }
    out
}

pub fn curve_from_csv(text: &str) -> Result<Vec<CurveRecord>> {
    let bad = |d: String| Error::parse("learning curve", d);
    let mut lines = text.lines();
    if lines.next() != Some(CURVE_HEADER) {
        return Err(bad("missing header".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 5 {
                return Err(bad(format!("malformed row {l:?}")));
            }
            let num = |i: usize| f[i].parse::<f64>().map_err(|e| bad(format!("{l:?}: {e}")));
            Ok(CurveRecord {
                iteration: f[0].parse().map_err(|e| bad(format!("{l:?}: {e}")))?,
                env_steps: f[1].parse().map_err(|e| bad(format!("{l:?}: {e}")))?,
                success_prob: num(2)?,
                disc_reward: num(3)?,
                wall_secs: num(4)?,
            })
        })
        .collect()
}

/// Per-iteration mean over the runs that reached that iteration.
pub fn mean_curve(curves: &[Vec<CurveRecord>]) -> Vec<CurveRecord> {
    let longest = curves.iter().map(Vec::len).max().unwrap_or(0);
    (0..longest)
        .map(|i| {
            let rows: Vec<&CurveRecord> = curves.iter().filter_map(|c| c.get(i)).collect();
            let n = rows.len() as f64;
            CurveRecord {
                iteration: i + 1,
                env_steps: (rows.iter().map(|r| r.env_steps as f64).sum::<f64>() / n).round() as u64,
                success_prob: rows.iter().map(|r| r.success_prob).sum::<f64>() / n,
                disc_reward: rows.iter().map(|r| r.disc_reward).sum::<f64>() / n,
                wall_secs: rows.iter().map(|r| r.wall_secs).sum::<f64>() / n,
            }
        })
        .collect()
}

/// The last record whose cumulative step count is within `budget`.
pub fn at_budget(curve: &[CurveRecord], budget: u64) -> Option<&CurveRecord> {
    curve.iter().take_while(|c| c.env_steps <= budget).last()
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}

/// One finished training run.
pub struct TrainedRun {
    pub seed: u64,
    pub spec: AbstractSpec,
    pub state: AaviState,
}

impl TrainedRun {
    pub fn plan(&self) -> Vec<usize> {
        self.state.plan(&self.spec)
    }
}

/// Runs A-AVI for one seed. With `out`, writes the curve after every
/// iteration, optional checkpoints, and the final artifacts.
pub fn train_seed<E: Environment + ?Sized>(
    env: &E,
    spec: &AbstractSpec,
    cfg: &ExperimentConfig,
    seed: u64,
    out: Option<&Path>,
) -> Result<TrainedRun> {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        spec.save(&dir.join(super::artifacts::SPEC_FILE))?;
    }
    let edges = spec.edge_list();
    let state = run_aavi(env, spec, &cfg.aavi, seed, |st| {
        if let Some(dir) = out {
            write(&dir.join(CURVE_FILE), &curve_to_csv(&st.curve))?;
            if cfg.checkpoints {
                save_options(&dir.join("checkpoints").join(format!("iter_{}", st.iteration)), &edges, &st.options)?;
            }
        }
        Ok(())
    })?;
    if let Some(dir) = out {
        save_artifacts(dir, spec, &state.options, &state.policy)?;
    }
    Ok(TrainedRun {
        seed,
        spec: spec.clone(),
        state,
    })
}

/// Trains every configured seed in sequence and writes the mean curve.
pub fn train(cfg: &ExperimentConfig, write_files: bool) -> Result<Vec<TrainedRun>> {
    cfg.validate()?;
    let env = cfg.env.build()?;
    let out = cfg.output_dir();
    if write_files {
        std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        write(&out.join("config.toml"), &cfg.to_toml()?)?;
    }
    let mut runs = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let spec = cfg.regions.build(&env, seed)?;
        let dir = seed_dir(&out, seed);
        let run = train_seed(&env, &spec, cfg, seed, write_files.then_some(dir.as_path()))?;
        log::info!("seed {seed}: final plan {:?}", run.plan());
        runs.push(run);
    }
    if write_files {
        let curves: Vec<Vec<CurveRecord>> = runs.iter().map(|r| r.state.curve.clone()).collect();
        write(&out.join(MEAN_CURVE_FILE), &curve_to_csv(&mean_curve(&curves)))?;
    }
    Ok(runs)
}

/// Hierarchical evaluation of an abstract policy with the given controllers.
pub fn eval_policy<E: Environment + ?Sized, C: Controller>(
    env: &E,
    spec: &AbstractSpec,
    policy: &AbstractPolicy,
    controllers: &[Option<C>],
    episodes: usize,
    option_horizon: usize,
    seed: u64,
) -> Result<EvalReport> {
    let edges = spec.edge_list();
    if controllers.len() != edges.len() || policy.choice.len() != spec.n_regions() {
        return Err(Error::Mismatch("policy, options and spec disagree in size".into()));
    }
    let hp = HierarchicalPolicy {
        policy,
        options: &edges,
        controllers,
    };
    evaluate(env, spec, &hp, episodes, 2 * spec.n_regions(), option_horizon, seed)
}

/// R-AVI replanning with frozen options.
pub struct TransferReport {
    pub adp: IntervalAdp,
    pub vi: IntervalVi,
    pub policy: AbstractPolicy,
    pub plan: Vec<usize>,
    /// Simulator steps spent on estimation rollouts only.
    pub estimation_steps: u64,
    pub eval: EvalReport,
    pub contraction: (bool, f64),
    pub bound: f64,
}

/// Estimates interval tables for `controllers` on `env`, plans
/// conservatively and evaluates the result. Regions left without options
/// (their controllers missing) become dead ends.
pub fn transfer<E: Environment + ?Sized, C: Controller>(
    env: &E,
    spec: &AbstractSpec,
    controllers: &[Option<C>],
    est: &EstimationConfig,
    eval_episodes: usize,
    seed: u64,
) -> Result<TransferReport> {
    let job = EstimationJob {
        env,
        spec,
        options: controllers,
        horizon: est.horizon,
        m_rollouts: est.m_rollouts,
        seed,
    };
    let starts = region_start_grid(spec, est.grid, est.include_center);
    let (adp, estimation_steps) = job.estimate_interval(&starts)?;
    let vi = interval_vi(&adp, DEFAULT_TOL, DEFAULT_MAX_ITERS);
    let policy = conservative_policy_partial(&adp, &vi, spec.goal_id);
    let plan = policy.plan(&adp.options, spec.initial_id);
    let eval = eval_policy(env, spec, &policy, controllers, eval_episodes, est.horizon, seed)?;
    let (eps_t, eps_r) = adp.epsilons();
    let n = spec.n_regions();
    Ok(TransferReport {
        contraction: check_contraction(n, eps_t, adp.gamma),
        bound: suboptimality_bound(n, eps_t, eps_r, adp.gamma),
        adp,
        vi,
        policy,
        plan,
        estimation_steps,
        eval,
    })
}

/// Text report of the suboptimality bound and the contraction condition.
pub fn bound_report(n_regions: usize, eps_t: f64, eps_r: f64, gamma: f64) -> String {
    let (holds, factor) = check_contraction(n_regions, eps_t, gamma);
    let bound = suboptimality_bound(n_regions, eps_t, eps_r, gamma);
    format!(
        "contraction factor {factor}\nassumption {}\nbound {bound}\n",
        if holds { "holds" } else { "violated" }
    )
}
