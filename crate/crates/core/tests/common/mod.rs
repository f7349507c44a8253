//! Exact theory checks against the tabular oracle, shared by the theory and
//! acceptance targets.
#![allow(dead_code)]

use avi_core::avi::{check_contraction, conservative_policy, interval_vi, suboptimality_bound, ViResult};
use avi_core::oracle::{
    bottleneck_instance, concrete_vi, exact_option_vi, exact_policy_value, exact_tables, random_instance,
    InstanceParams, TabularInstance,
};

pub const THEORY_TOL: f64 = 1e-9;
pub const CONTRACTION_SLACK: f64 = 1e-12;
pub const EXACT_VI_TOL: f64 = 1e-13;
pub const EXACT_VI_ITERS: usize = 1_000_000;

pub const N_FUZZ: u64 = 100;
pub const N_BOTTLENECK: u64 = 20;

pub fn fuzz_instances() -> Vec<TabularInstance> {
    let p = InstanceParams::default();
    (0..N_FUZZ)
        .map(|seed| random_instance(seed, &p).expect("fuzz instance"))
        .collect()
}

pub fn singleton_instances(n: u64) -> Vec<TabularInstance> {
    let p = InstanceParams {
        domino_prob: 0.0,
        ..InstanceParams::default()
    };
    (0..n)
        .map(|seed| random_instance(1000 + seed, &p).expect("singleton instance"))
        .collect()
}

pub fn bottleneck_instances() -> Vec<TabularInstance> {
    (0..N_BOTTLENECK)
        .map(|seed| bottleneck_instance(seed).expect("bottleneck instance"))
        .collect()
}

/// Exact quantities for one instance with ideal options.
pub struct TheoryReport {
    /// Largest `V_inf - V_O*` or `V_O* - V_sup` over region cells; positive means a violation.
    pub sandwich_excess: f64,
    /// Largest `V_sup - V_inf` over regions.
    pub gap: f64,
    pub bound: f64,
    pub assumption_holds: bool,
    /// `J(rho*) - bound - J(rho~)`; positive means a violation.
    pub option_bound_excess: f64,
    /// `J(pi*) - bound - J(rho~)`; positive means a violation.
    pub concrete_bound_excess: f64,
    /// Largest `res[k+1] - factor res[k]` over both recursions.
    pub contraction_excess: f64,
    /// Largest `|V_inf - V_O*|` and `|V_sup - V_O*|` over region cells.
    pub collapse_error: f64,
    pub converged: bool,
}

fn ratio_excess(vi: &ViResult, factor: f64) -> f64 {
    vi.residuals
        .windows(2)
        .map(|w| w[1] - (factor + CONTRACTION_SLACK) * w[0])
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn analyze(inst: &TabularInstance) -> TheoryReport {
    let options = inst.ideal_options();
    let adp = exact_tables(inst, &options);
    let vi = interval_vi(&adp, EXACT_VI_TOL, EXACT_VI_ITERS);
    let n = adp.n_regions;
    let (eps_t, eps_r) = adp.epsilons();
    let (assumption_holds, factor) = check_contraction(n, eps_t, adp.gamma);
    let bound = suboptimality_bound(n, eps_t, eps_r, adp.gamma);

    let v_o = exact_option_vi(inst, &options);
    let mut sandwich_excess = f64::NEG_INFINITY;
    let mut collapse_error: f64 = 0.0;
    for c in 0..inst.n_cells() {
        if let Some(r) = inst.region[c] {
            sandwich_excess = sandwich_excess
                .max(vi.inf.v[r] - v_o.v[c])
                .max(v_o.v[c] - vi.sup.v[r]);
            collapse_error = collapse_error
                .max((vi.inf.v[r] - v_o.v[c]).abs())
                .max((vi.sup.v[r] - v_o.v[c]).abs());
        }
    }
    let gap = (0..n).map(|r| vi.sup.v[r] - vi.inf.v[r]).fold(0.0, f64::max);

    let policy = conservative_policy(&adp, &vi, inst.spec.goal_id).expect("conservative policy");
    let (_, j_rho) = exact_policy_value(inst, &options, &policy);
    let init = inst.initial_cells();
    let j_rho_star = init.iter().map(|&c| v_o.v[c]).sum::<f64>() / init.len() as f64;
    let (_, j_star) = concrete_vi(inst);

    TheoryReport {
        sandwich_excess,
        gap,
        bound,
        assumption_holds,
        option_bound_excess: j_rho_star - bound - j_rho,
        concrete_bound_excess: j_star - bound - j_rho,
        contraction_excess: ratio_excess(&vi.inf, factor).max(ratio_excess(&vi.sup, factor)),
        collapse_error,
        converged: vi.converged(),
    }
}
