use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use avi_core::abstraction::{self, AbstractSpec};
use avi_core::env::{build_env, EnvName, RoomOverrides};
use avi_core::harness::artifacts::{load_artifacts, policy_to_csv};
use avi_core::harness::run::{bound_report, eval_policy};
use avi_core::harness::{self, ExperimentConfig, RegionSource};

#[derive(Parser)]
#[command(name = "avi", version, about = "Abstract value iteration over subgoal regions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run alternating abstract value iteration and write curves and artifacts.
    Train(TrainArgs),
    /// Evaluate saved artifacts.
    Eval(EvalArgs),
    /// Replan with frozen options on another environment.
    Transfer(TransferArgs),
    /// Print the suboptimality bound and the contraction verdict.
    Bound(BoundArgs),
    /// Generate, validate or print region specs.
    Regions {
        #[command(subcommand)]
        action: RegionsAction,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RegionKind {
    Doorways,
    RoomCenters,
    FullRooms,
    Random,
}

#[derive(Args)]
struct TrainArgs {
    /// TOML experiment file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<EnvName>,
    #[arg(long, value_enum)]
    regions: Option<RegionKind>,
    /// Region spec file, instead of a generated layout.
    #[arg(long, conflicts_with = "regions")]
    regions_file: Option<PathBuf>,
    /// Number of random regions.
    #[arg(long)]
    n: Option<usize>,
    /// Neighbours per random region.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Seeds, comma separated.
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    /// Stop after the iteration that exhausts this many simulator steps.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    ars_iterations: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_checkpoints: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Run directory holding spec.toml, policy.csv and options/.
    #[arg(long)]
    artifacts: PathBuf,
    #[arg(long, default_value = "nine_rooms")]
    env: EnvName,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    horizon: usize,
}

#[derive(Args)]
struct TransferArgs {
    #[arg(long)]
    artifacts: PathBuf,
    #[arg(long)]
    env: EnvName,
    /// New initial region id.
    #[arg(long)]
    initial: Option<usize>,
    /// New goal region id.
    #[arg(long)]
    goal: Option<usize>,
    #[arg(long, default_value_t = 4)]
    grid: usize,
    #[arg(long, default_value_t = 1)]
    m_rollouts: usize,
    #[arg(long, default_value_t = 100)]
    horizon: usize,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for the replanned policy and interval tables.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    regions: usize,
    #[arg(long)]
    eps_t: f64,
    #[arg(long)]
    eps_r: f64,
    #[arg(long)]
    gamma: f64,
}

#[derive(Subcommand)]
enum RegionsAction {
    Generate {
        #[arg(long, default_value = "nine_rooms")]
        env: EnvName,
        #[arg(long, value_enum, default_value = "doorways")]
        kind: RegionKind,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    Validate {
        path: PathBuf,
    },
    Print {
        path: PathBuf,
    },
}

fn region_source(kind: RegionKind, n: Option<usize>, k: Option<usize>) -> RegionSource {
    match kind {
        RegionKind::Doorways => RegionSource::Doorways,
        RegionKind::RoomCenters => RegionSource::RoomCenters,
        RegionKind::FullRooms => RegionSource::FullRooms,
        RegionKind::Random => RegionSource::Random {
            n: n.unwrap_or(20),
            k: k.unwrap_or(7),
            half_width: 1.0,
        },
    }
}

fn train_config(a: &TrainArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(e) = a.env {
        cfg.env.name = e;
    }
    if let Some(kind) = a.regions {
        cfg.regions = region_source(kind, a.n, a.k);
    } else if let Some(p) = &a.regions_file {
        cfg.regions = RegionSource::File { path: p.clone() };
    } else if let RegionSource::Random { n, k, .. } = &mut cfg.regions {
        *n = a.n.unwrap_or(*n);
        *k = a.k.unwrap_or(*k);
    }
    if let Some(i) = a.iterations {
        cfg.aavi.n_iterations = i;
    }
    if !a.seed.is_empty() {
        cfg.seeds = a.seed.clone();
    }
    if a.budget.is_some() {
        cfg.aavi.step_budget = a.budget;
    }
    if let Some(alpha) = a.alpha {
        cfg.aavi.alpha = avi_core::aavi::AlphaSchedule::Constant(alpha);
    }
    if let Some(n) = a.ars_iterations {
        cfg.aavi.ars.iterations_per_round = n;
    }
    if a.out.is_some() {
        cfg.output = a.out.clone();
    }
    if a.no_checkpoints {
        cfg.checkpoints = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let cfg = train_config(a)?;
    let out = cfg.output_dir();
    let runs = harness::train(&cfg, true)?;
    for r in &runs {
        let last = r.state.curve.last().context("empty curve")?;
        println!(
            "seed {}: steps {} success {:.2} reward {:.4} plan {:?}",
            r.seed,
            last.env_steps,
            last.success_prob,
            last.disc_reward,
            r.plan()
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let env = build_env(a.env, &RoomOverrides::default())?;
    let art = load_artifacts(&a.artifacts)?;
    art.check_env(&env)?;
    let policy = art.policy.as_ref().context("artifacts hold no policy")?;
    let r = eval_policy(&env, &art.spec, policy, &art.options, a.episodes, a.horizon, a.seed)?;
    println!(
        "success_prob {}\nmean_disc_reward {}\nepisodes {}\nenv_steps {}",
        r.success_probability, r.mean_discounted_reward, r.episodes, r.env_steps
    );
    Ok(())
}

fn cmd_transfer(a: &TransferArgs) -> Result<()> {
    let art = load_artifacts(&a.artifacts)?;
    let spec = match (a.initial, a.goal) {
        (None, None) => art.spec.clone(),
        (i, g) => art
            .spec
            .with_endpoints(i.unwrap_or(art.spec.initial_id), g.unwrap_or(art.spec.goal_id))?,
    };
    // the new endpoints also move the task's start and goal boxes
    let mut geometry = RoomOverrides::default();
    if a.initial.is_some() {
        geometry.start_box = Some(region_box(&spec, spec.initial_id));
    }
    if a.goal.is_some() {
        geometry.goal_box = Some(region_box(&spec, spec.goal_id));
    }
    let env = build_env(a.env, &geometry)?;
    art.check_env(&env)?;
    // dropping a goal's out-edges shifts option ids; realign by edge
    let edges = spec.edge_list();
    let old = art.spec.edge_list();
    let options: Vec<_> = edges
        .iter()
        .map(|e| old.iter().position(|o| o == e).and_then(|i| art.options[i].clone()))
        .collect();
    let est = avi_core::estimation::EstimationConfig {
        grid: a.grid,
        m_rollouts: a.m_rollouts,
        horizon: a.horizon,
        ..Default::default()
    };
    let r = harness::transfer(&env, &spec, &options, &est, a.episodes, a.seed)?;
    println!("plan {:?}", r.plan);
    println!("estimation_steps {}", r.estimation_steps);
    let (eps_t, eps_r) = r.adp.epsilons();
    println!("eps_t {eps_t}\neps_r {eps_r}\nbound {}", r.bound);
    println!("success_prob {}\nmean_disc_reward {}", r.eval.success_probability, r.eval.mean_discounted_reward);
    if let Some(out) = &a.out {
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        spec.save(&out.join("spec.toml"))?;
        r.adp.save(&out.join("interval_tables.csv"))?;
        std::fs::write(out.join("policy.csv"), policy_to_csv(&r.policy, &edges))?;
        std::fs::write(out.join("values.csv"), r.policy.to_text(&r.vi))?;
    }
    Ok(())
}

fn region_box(spec: &AbstractSpec, id: usize) -> [f64; 4] {
    let r = &spec.regions[id];
    [r.lo[0], r.lo[1], r.hi[0], r.hi[1]]
}

fn print_spec(spec: &AbstractSpec) {
    println!("initial {} goal {}", spec.initial_id, spec.goal_id);
    for r in &spec.regions {
        println!("region {:>3} lo {:?} hi {:?}", r.id, r.lo, r.hi);
    }
    for (o, (a, b)) in spec.edge_list().iter().enumerate() {
        println!("option {o:>3}: {a} -> {b}");
    }
}

fn cmd_regions(action: &RegionsAction) -> Result<()> {
    match action {
        RegionsAction::Generate { env, kind, n, k, seed, out } => {
            let env = build_env(*env, &RoomOverrides::default())?;
            let spec = region_source(*kind, Some(*n), Some(*k)).build(&env, *seed)?;
            spec.save(out)?;
            println!("wrote {} ({} regions, {} edges)", out.display(), spec.n_regions(), spec.edges.len());
        }
        RegionsAction::Validate { path } => {
            let report = abstraction::validate(&AbstractSpec::load(path)?);
            if !report.is_valid() {
                bail!("{report}");
            }
            println!("valid");
        }
        RegionsAction::Print { path } => print_spec(&AbstractSpec::load(path)?),
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Transfer(a) => cmd_transfer(a),
        Command::Bound(a) => {
            print!("{}", bound_report(a.regions, a.eps_t, a.eps_r, a.gamma));
            Ok(())
        }
        Command::Regions { action } => cmd_regions(action),
    }
}

