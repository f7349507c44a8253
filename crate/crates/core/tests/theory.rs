mod common;

use common::*;

#[test]
fn sandwich_on_fuzzed_instances() {
    for (seed, inst) in fuzz_instances().iter().enumerate() {
        let r = analyze(inst);
        assert!(r.converged, "seed {seed} did not converge\n{}", inst.to_text());
        assert!(
            r.sandwich_excess <= THEORY_TOL,
            "seed {seed}: excess {}\n{}",
            r.sandwich_excess,
            inst.to_text()
        );
    }
}

#[test]
fn gap_within_bound() {
    for (seed, inst) in fuzz_instances().iter().enumerate() {
        let r = analyze(inst);
        assert!(r.assumption_holds);
        assert!(r.gap <= r.bound + THEORY_TOL, "seed {seed}: gap {} bound {}\n{}", r.gap, r.bound, inst.to_text());
    }
}

#[test]
fn option_value_bound_on_fuzzed_instances() {
    for (seed, inst) in fuzz_instances().iter().enumerate() {
        let r = analyze(inst);
        assert!(r.option_bound_excess <= THEORY_TOL, "seed {seed}: {}\n{}", r.option_bound_excess, inst.to_text());
    }
}

#[test]
fn concrete_bound_on_bottleneck_instances() {
    for (seed, inst) in bottleneck_instances().iter().enumerate() {
        assert!(inst.satisfies_bottleneck());
        let r = analyze(inst);
        assert!(r.assumption_holds);
        assert!(r.concrete_bound_excess <= THEORY_TOL, "seed {seed}: {}\n{}", r.concrete_bound_excess, inst.to_text());
    }
}

#[test]
fn residuals_contract() {
    for inst in fuzz_instances().iter().chain(&bottleneck_instances()) {
        let r = analyze(inst);
        assert!(r.contraction_excess <= 0.0, "excess {}\n{}", r.contraction_excess, inst.to_text());
    }
}

#[test]
fn singleton_regions_collapse_to_the_option_value() {
    for inst in singleton_instances(30) {
        let r = analyze(&inst);
        assert!(r.gap < 1e-9);
        assert!(r.collapse_error < 1e-6, "{}\n{}", r.collapse_error, inst.to_text());
    }
}

#[test]
fn bottleneck_check_rejects_missing_edges() {
    // without any edge out of the start the assumption cannot hold
    let mut inst = bottleneck_instances().remove(0);
    inst.spec.edges.retain(|&(a, _)| a != inst.spec.initial_id);
    assert!(!inst.satisfies_bottleneck());
}
