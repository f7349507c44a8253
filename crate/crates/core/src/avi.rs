//! Value iteration over abstract decision processes and the associated bounds.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::estimation::{ExpectedAdp, IntervalAdp};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 100_000;

/// Fixed point of one scalar recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct ViResult {
    pub v: Vec<f64>,
    /// Per option; `NEG_INFINITY` for unavailable options.
    pub q: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Sup-norm change of `V` at each iteration.
    pub residuals: Vec<f64>,
}

impl ViResult {
    pub fn last_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(0.0)
    }
}

/// Option tables viewed as one recursion `V(s) = max_o r[o] + sum_j t[o][j] V(j)`.
pub struct Tables<'a> {
    pub n_regions: usize,
    pub options: &'a [(usize, usize)],
    pub available: &'a [bool],
    pub t: &'a [Vec<f64>],
    pub r: &'a [f64],
}

fn bellman(tab: &Tables, v: &[f64], q: &mut [f64], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = f64::NEG_INFINITY);
    for (o, &(src, _)) in tab.options.iter().enumerate() {
        if !tab.available[o] {
            q[o] = f64::NEG_INFINITY;
            continue;
        }
        let val = tab.r[o] + tab.t[o].iter().zip(v).map(|(t, v)| t * v).sum::<f64>();
        q[o] = val;
        if val > out[src] {
            out[src] = val;
        }
    }
    // regions without options (the goal among them) keep value zero
    out.iter_mut()
        .filter(|x| **x == f64::NEG_INFINITY)
        .for_each(|x| *x = 0.0);
}

/// Jacobi value iteration from the zero vector until the sup-norm change drops below `tol`.
pub fn scalar_vi(tab: &Tables, tol: f64, max_iters: usize) -> ViResult {
    let n = tab.n_regions;
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut q = vec![f64::NEG_INFINITY; tab.options.len()];
    let mut residuals = Vec::new();
    let mut converged = false;
    for _ in 0..max_iters {
        bellman(tab, &v, &mut q, &mut next);
        let res = v
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut v, &mut next);
        residuals.push(res);
        if res < tol {
            converged = true;
            break;
        }
    }
    // Q consistent with the returned V
    bellman(tab, &v, &mut q, &mut next);
    ViResult {
        v,
        q,
        iterations: residuals.len(),
        converged,
        residuals,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalVi {
    pub inf: ViResult,
    pub sup: ViResult,
}

impl IntervalVi {
    pub fn converged(&self) -> bool {
        self.inf.converged && self.sup.converged
    }
}

/// Runs the lower and upper recursions independently.
pub fn interval_vi(adp: &IntervalAdp, tol: f64, max_iters: usize) -> IntervalVi {
    let tab = |t, r| Tables {
        n_regions: adp.n_regions,
        options: &adp.options,
        available: &adp.available,
        t,
        r,
    };
    let out = IntervalVi {
        inf: scalar_vi(&tab(&adp.t_inf, &adp.r_inf), tol, max_iters),
        sup: scalar_vi(&tab(&adp.t_sup, &adp.r_sup), tol, max_iters),
    };
    if !out.converged() {
        log::warn!(
            "interval VI did not converge in {max_iters} iterations (residuals {:.3e}, {:.3e})",
            out.inf.last_residual(),
            out.sup.last_residual()
        );
    }
    out
}

pub fn expected_vi(adp: &ExpectedAdp, tol: f64, max_iters: usize) -> ViResult {
    let out = scalar_vi(
        &Tables {
            n_regions: adp.n_regions,
            options: &adp.options,
            available: &adp.available,
            t: &adp.t,
            r: &adp.r,
        },
        tol,
        max_iters,
    );
    if !out.converged {
        log::warn!(
            "expected VI did not converge in {max_iters} iterations (residual {:.3e})",
            out.last_residual()
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Conservative,
    Expected,
}

/// Option choice per region; `None` for the goal.
#[derive(Debug, Clone, PartialEq)]
pub struct AbstractPolicy {
    pub choice: Vec<Option<usize>>,
    pub kind: PolicyKind,
}

impl AbstractPolicy {
    /// Regions visited by following the chosen options' targets from `from`,
    /// stopping at a region without a choice or on a repeat.
    pub fn plan(&self, options: &[(usize, usize)], from: usize) -> Vec<usize> {
        let mut path = vec![from];
        let mut cur = from;
        while let Some(o) = self.choice.get(cur).copied().flatten() {
            cur = options[o].1;
            if path.contains(&cur) {
                path.push(cur);
                break;
            }
            path.push(cur);
        }
        path
    }

    pub fn to_text(&self, vi: &IntervalVi) -> String {
        let mut out = String::from("region,v_inf,v_sup,choice\n");
        for (r, c) in self.choice.iter().enumerate() {
            let c = c.map(|o| o.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{r},{},{},{c}", vi.inf.v[r], vi.sup.v[r]);
        }
        out
    }
}

fn best_options(
    q: &[f64],
    options: &[(usize, usize)],
    available: &[bool],
    n_regions: usize,
    goal: usize,
) -> Vec<Option<(usize, f64)>> {
    let mut best: Vec<Option<(usize, f64)>> = vec![None; n_regions];
    for (o, &(src, _)) in options.iter().enumerate() {
        if !available[o] || src == goal {
            continue;
        }
        match best[src] {
            Some((_, v)) if v >= q[o] => {}
            _ => best[src] = Some((o, q[o])),
        }
    }
    best
}

/// Per-region argmax of `q`, ties to the lowest option id.
pub fn extract_policy(
    q: &[f64],
    options: &[(usize, usize)],
    available: &[bool],
    n_regions: usize,
    goal: usize,
    kind: PolicyKind,
) -> Result<AbstractPolicy> {
    let best = best_options(q, options, available, n_regions, goal);
    let mut choice = Vec::with_capacity(n_regions);
    for (r, b) in best.into_iter().enumerate() {
        if r == goal {
            choice.push(None);
        } else {
            let (o, _) = b.ok_or_else(|| Error::Structural(format!("region {r} has no options")))?;
            choice.push(Some(o));
        }
    }
    Ok(AbstractPolicy { choice, kind })
}

/// Conservative policy: argmax of the lower Q table.
pub fn conservative_policy(adp: &IntervalAdp, vi: &IntervalVi, goal: usize) -> Result<AbstractPolicy> {
    extract_policy(
        &vi.inf.q,
        &adp.options,
        &adp.available,
        adp.n_regions,
        goal,
        PolicyKind::Conservative,
    )
}

/// Conservative policy that leaves regions without any available option
/// undecided instead of failing; used when replanning with a partial option set.
pub fn conservative_policy_partial(adp: &IntervalAdp, vi: &IntervalVi, goal: usize) -> AbstractPolicy {
    let best = best_options(&vi.inf.q, &adp.options, &adp.available, adp.n_regions, goal);
    let choice = best
        .into_iter()
        .enumerate()
        .map(|(r, b)| {
            if b.is_none() && r != goal {
                log::warn!("region {r} has no available option and becomes a dead end");
            }
            b.map(|(o, _)| o)
        })
        .collect();
    AbstractPolicy {
        choice,
        kind: PolicyKind::Conservative,
    }
}

/// Contraction factor `gamma + n eps_T` and whether it is below one.
pub fn check_contraction(n_regions: usize, epsilon_t: f64, gamma: f64) -> (bool, f64) {
    let spread = n_regions as f64 * epsilon_t;
    (spread < 1.0 - gamma, gamma + spread)
}

/// `[(1-g) eps_R + n eps_T] / [(1-g)(1 - (g + n eps_T))]`, infinite when the
/// contraction condition fails.
pub fn suboptimality_bound(n_regions: usize, epsilon_t: f64, epsilon_r: f64, gamma: f64) -> f64 {
    let spread = n_regions as f64 * epsilon_t;
    let denom = (1.0 - gamma) * (1.0 - (gamma + spread));
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    ((1.0 - gamma) * epsilon_r + spread) / denom
}
