//! Monte-Carlo estimation of option-level transition and reward tables.
//!
//! Option `o` is the `o`-th edge of the spec's sorted edge list; it starts in
//! the edge's source region and stops on entering any other region. Tables
//! are stored densely as `[option][target region]`.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abstraction::AbstractSpec;
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::policy::Controller;
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationConfig {
    /// Lattice resolution per region box for interval estimation.
    pub grid: usize,
    pub include_center: bool,
    pub m_rollouts: usize,
    /// Pool draws per option for expected tables.
    pub m_starts: usize,
    pub horizon: usize,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            grid: 4,
            include_center: true,
            m_rollouts: 1,
            m_starts: 20,
            horizon: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutOutcome {
    pub start: Vec<f64>,
    pub terminal: Option<usize>,
    pub steps: usize,
    /// Discounted environment reward collected before termination.
    pub reward: f64,
}

impl RolloutOutcome {
    /// Time-discounted transition value towards `region`.
    pub fn transition_value(&self, region: usize, gamma: f64) -> f64 {
        if self.terminal == Some(region) {
            gamma.powi(self.steps as i32)
        } else {
            0.0
        }
    }
}

/// Runs `controller` from `start` until it enters a region other than
/// `source` or `horizon` steps elapse.
pub fn rollout_option<E: Environment + ?Sized, C: Controller + ?Sized>(
    env: &E,
    spec: &AbstractSpec,
    source: usize,
    controller: &C,
    start: &[f64],
    horizon: usize,
    seed: u64,
) -> Result<RolloutOutcome> {
    if !spec.regions.get(source).is_some_and(|r| r.contains(start)) {
        return Err(Error::InvalidInput(format!(
            "start {start:?} lies outside source region {source}"
        )));
    }
    let gamma = env.gamma();
    let mut rng = stream_rng(seed, &[]);
    let mut s = start.to_vec();
    let mut reward = 0.0;
    let mut disc = 1.0;
    for t in 0..horizon {
        let a = controller.action(&s);
        let tr = env.transition(&s, &a, &mut rng)?;
        reward += disc * tr.reward;
        disc *= gamma;
        s = tr.next;
        if let Some(r) = spec.terminal_region(&s, source) {
            return Ok(RolloutOutcome {
                start: start.to_vec(),
                terminal: Some(r),
                steps: t + 1,
                reward,
            });
        }
    }
    Ok(RolloutOutcome {
        start: start.to_vec(),
        terminal: None,
        steps: horizon,
        reward,
    })
}

/// Interval tables over options; `t_*[o][j]` bounds the discounted
/// probability that option `o` ends in region `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalAdp {
    pub gamma: f64,
    pub n_regions: usize,
    /// `(source, target)` of each option.
    pub options: Vec<(usize, usize)>,
    /// Whether each option has a policy; absent options carry no table entries.
    pub available: Vec<bool>,
    pub t_inf: Vec<Vec<f64>>,
    pub t_sup: Vec<Vec<f64>>,
    pub r_inf: Vec<f64>,
    pub r_sup: Vec<f64>,
    pub samples: Vec<usize>,
}

/// Tables averaged over a start distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedAdp {
    pub gamma: f64,
    pub n_regions: usize,
    pub options: Vec<(usize, usize)>,
    pub available: Vec<bool>,
    pub t: Vec<Vec<f64>>,
    pub r: Vec<f64>,
    pub samples: Vec<usize>,
}

/// Per-start averages of transition values and rewards over repeated rollouts.
fn start_values(outcomes: &[RolloutOutcome], n_regions: usize, gamma: f64) -> (Vec<f64>, f64) {
    let mut t = vec![0.0; n_regions];
    let mut r = 0.0;
    for o in outcomes {
        if let Some(j) = o.terminal {
            t[j] += gamma.powi(o.steps as i32);
        }
        r += o.reward;
    }
    let m = outcomes.len() as f64;
    t.iter_mut().for_each(|v| *v /= m);
    (t, r / m)
}

impl IntervalAdp {
    /// Min/max of per-start values. `per_option[o]` holds, for each start
    /// state, the outcomes of its repeated rollouts; `None` marks a missing option.
    pub fn from_outcomes(
        gamma: f64,
        n_regions: usize,
        options: Vec<(usize, usize)>,
        per_option: &[Option<Vec<Vec<RolloutOutcome>>>],
    ) -> Self {
        let k = options.len();
        let mut adp = Self {
            gamma,
            n_regions,
            available: per_option.iter().map(|p| p.is_some()).collect(),
            options,
            t_inf: vec![vec![0.0; n_regions]; k],
            t_sup: vec![vec![0.0; n_regions]; k],
            r_inf: vec![0.0; k],
            r_sup: vec![0.0; k],
            samples: vec![0; k],
        };
        for (o, starts) in per_option.iter().enumerate() {
            let Some(starts) = starts else { continue };
            let mut first = true;
            for reps in starts {
                let (t, r) = start_values(reps, n_regions, gamma);
                for j in 0..n_regions {
                    if first {
                        adp.t_inf[o][j] = t[j];
                        adp.t_sup[o][j] = t[j];
                    } else {
                        adp.t_inf[o][j] = adp.t_inf[o][j].min(t[j]);
                        adp.t_sup[o][j] = adp.t_sup[o][j].max(t[j]);
                    }
                }
                if first {
                    adp.r_inf[o] = r;
                    adp.r_sup[o] = r;
                } else {
                    adp.r_inf[o] = adp.r_inf[o].min(r);
                    adp.r_sup[o] = adp.r_sup[o].max(r);
                }
                first = false;
                adp.samples[o] += reps.len();
            }
        }
        adp
    }

    /// Worst-case widths `(eps_T, eps_R)` over available cells.
    pub fn epsilons(&self) -> (f64, f64) {
        let mut et: f64 = 0.0;
        let mut er: f64 = 0.0;
        for o in 0..self.options.len() {
            if !self.available[o] {
                continue;
            }
            for j in 0..self.n_regions {
                et = et.max(self.t_sup[o][j] - self.t_inf[o][j]);
            }
            er = er.max(self.r_sup[o] - self.r_inf[o]);
        }
        (et, er)
    }

    pub fn to_text(&self) -> String {
        let (et, er) = self.epsilons();
        let mut out = format!(
            "# gamma={} regions={} eps_t={} eps_r={}\nkind,option,source,target,lower,upper,samples\n",
            self.gamma, self.n_regions, et, er
        );
        for (o, &(src, tgt)) in self.options.iter().enumerate() {
            if !self.available[o] {
                // keeps option ids stable across a round trip
                let _ = writeln!(out, "-,{o},{src},{tgt},,,0");
                continue;
            }
            for j in 0..self.n_regions {
                let _ = writeln!(
                    out,
                    "T,{o},{src},{j},{},{},{}",
                    self.t_inf[o][j], self.t_sup[o][j], self.samples[o]
                );
            }
            let _ = writeln!(
                out,
                "R,{o},{src},{tgt},{},{},{}",
                self.r_inf[o], self.r_sup[o], self.samples[o]
            );
        }
        out
    }

    /// Parses the format produced by [`IntervalAdp::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |d: String| Error::parse("ADP table", d);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let field = |key: &str| -> Result<f64> {
            header
                .split_whitespace()
                .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
                .ok_or_else(|| bad(format!("missing {key} in header")))?
                .parse::<f64>()
                .map_err(|e| bad(format!("{key}: {e}")))
        };
        let gamma = field("gamma")?;
        let n_regions = field("regions")? as usize;
        lines.next();
        let mut options: Vec<(usize, usize)> = Vec::new();
        let mut rows: Vec<(bool, usize, usize, usize, f64, f64, usize)> = Vec::new();
        let mut missing: Vec<(usize, usize, usize)> = Vec::new();
        for (i, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 7 {
                return Err(bad(format!("row {i}: expected 7 columns")));
            }
            let num = |k: usize| cols[k].parse::<usize>().map_err(|e| bad(format!("row {i}: {e}")));
            let real = |k: usize| cols[k].parse::<f64>().map_err(|e| bad(format!("row {i}: {e}")));
            let is_t = match cols[0] {
                "T" => true,
                "R" => false,
                "-" => {
                    missing.push((num(1)?, num(2)?, num(3)?));
                    continue;
                }
                k => return Err(bad(format!("row {i}: unknown kind {k}"))),
            };
            rows.push((is_t, num(1)?, num(2)?, num(3)?, real(4)?, real(5)?, num(6)?));
        }
        for &(is_t, o, src, tgt, ..) in &rows {
            if !is_t {
                if options.len() <= o {
                    options.resize(o + 1, (usize::MAX, usize::MAX));
                }
                options[o] = (src, tgt);
            }
        }
        let mut available: Vec<bool> = options.iter().map(|o| o.0 != usize::MAX).collect();
        for &(o, src, tgt) in &missing {
            if options.len() <= o {
                options.resize(o + 1, (usize::MAX, usize::MAX));
                available.resize(o + 1, false);
            }
            if available[o] {
                return Err(bad(format!("option {o} is both present and missing")));
            }
            options[o] = (src, tgt);
        }
        if let Some(o) = options.iter().position(|o| o.0 == usize::MAX) {
            return Err(bad(format!("no rows for option {o}")));
        }
        let k = options.len();
        let mut adp = Self {
            gamma,
            n_regions,
            available,
            options,
            t_inf: vec![vec![0.0; n_regions]; k],
            t_sup: vec![vec![0.0; n_regions]; k],
            r_inf: vec![0.0; k],
            r_sup: vec![0.0; k],
            samples: vec![0; k],
        };
        for (is_t, o, _, tgt, lo, hi, n) in rows {
            if o >= k || tgt >= n_regions {
                return Err(bad(format!("cell ({o}, {tgt}) out of range")));
            }
            if is_t {
                adp.t_inf[o][tgt] = lo;
                adp.t_sup[o][tgt] = hi;
            } else {
                adp.r_inf[o] = lo;
                adp.r_sup[o] = hi;
            }
            adp.samples[o] = n;
        }
        Ok(adp)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

impl ExpectedAdp {
    pub fn from_outcomes(
        gamma: f64,
        n_regions: usize,
        options: Vec<(usize, usize)>,
        per_option: &[Option<Vec<Vec<RolloutOutcome>>>],
    ) -> Self {
        let k = options.len();
        let mut adp = Self {
            gamma,
            n_regions,
            available: per_option.iter().map(|p| p.is_some()).collect(),
            options,
            t: vec![vec![0.0; n_regions]; k],
            r: vec![0.0; k],
            samples: vec![0; k],
        };
        for (o, starts) in per_option.iter().enumerate() {
            let Some(starts) = starts else { continue };
            let m = starts.len() as f64;
            for reps in starts {
                let (t, r) = start_values(reps, n_regions, gamma);
                for j in 0..n_regions {
                    adp.t[o][j] += t[j] / m;
                }
                adp.r[o] += r / m;
                adp.samples[o] += reps.len();
            }
        }
        adp
    }
}

/// Estimation inputs shared by both table kinds.
pub struct EstimationJob<'a, E: ?Sized, C> {
    pub env: &'a E,
    pub spec: &'a AbstractSpec,
    /// Policy per option id (edge index); `None` drops the option.
    pub options: &'a [Option<C>],
    pub horizon: usize,
    pub m_rollouts: usize,
    pub seed: u64,
}

impl<E: Environment + ?Sized, C: Controller> EstimationJob<'_, E, C> {
    fn check(&self) -> Result<Vec<(usize, usize)>> {
        let edges = self.spec.edge_list();
        if self.options.len() != edges.len() {
            return Err(Error::Mismatch(format!(
                "{} option slots for {} edges",
                self.options.len(),
                edges.len()
            )));
        }
        if self.m_rollouts == 0 {
            return Err(Error::Config("m_rollouts must be positive".into()));
        }
        Ok(edges)
    }

    /// Rolls every available option from its start list; returns outcomes
    /// grouped per option and per start, plus the simulator steps used.
    fn run(&self, starts: &[Vec<Vec<f64>>]) -> Result<(Vec<Option<Vec<Vec<RolloutOutcome>>>>, u64)> {
        let edges = self.check()?;
        let jobs: Vec<(usize, usize, usize)> = edges
            .iter()
            .enumerate()
            .filter(|(o, _)| self.options[*o].is_some())
            .flat_map(|(o, _)| {
                (0..starts[o].len()).flat_map(move |i| (0..self.m_rollouts).map(move |m| (o, i, m)))
            })
            .collect();
        let outcomes = jobs
            .par_iter()
            .map(|&(o, i, m)| {
                let c = self.options[o].as_ref().expect("filtered");
                let seed = crate::rng::derive_seed(self.seed, &[o as u64, i as u64, m as u64]);
                rollout_option(self.env, self.spec, edges[o].0, c, &starts[o][i], self.horizon, seed)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut steps = 0u64;
        let mut grouped: Vec<Option<Vec<Vec<RolloutOutcome>>>> = self
            .options
            .iter()
            .enumerate()
            .map(|(o, c)| c.as_ref().map(|_| vec![Vec::with_capacity(self.m_rollouts); starts[o].len()]))
            .collect();
        for ((o, i, _), out) in jobs.into_iter().zip(outcomes) {
            steps += out.steps as u64;
            grouped[o].as_mut().expect("available")[i].push(out);
        }
        Ok((grouped, steps))
    }

    /// Interval tables from per-region start lists (`starts[region]`).
    pub fn estimate_interval(&self, starts: &[Vec<Vec<f64>>]) -> Result<(IntervalAdp, u64)> {
        let edges = self.check()?;
        let mut per_option = Vec::with_capacity(edges.len());
        for (o, &(src, _)) in edges.iter().enumerate() {
            let list = starts.get(src).filter(|l| !l.is_empty());
            if self.options[o].is_some() && list.is_none() {
                return Err(Error::Config(format!("no start states for region {src}")));
            }
            per_option.push(list.cloned().unwrap_or_default());
        }
        let (grouped, steps) = self.run(&per_option)?;
        let adp = IntervalAdp::from_outcomes(self.env.gamma(), self.spec.n_regions(), edges, &grouped);
        Ok((adp, steps))
    }

    /// Expected tables with `m_starts` uniform draws from each source pool.
    pub fn estimate_expected(&self, pools: &[Vec<Vec<f64>>], m_starts: usize) -> Result<(ExpectedAdp, u64)> {
        let edges = self.check()?;
        if m_starts == 0 {
            return Err(Error::Config("m_starts must be positive".into()));
        }
        let mut per_option = Vec::with_capacity(edges.len());
        for (o, &(src, _)) in edges.iter().enumerate() {
            let pool = pools.get(src).map(|p| p.as_slice()).unwrap_or(&[]);
            if self.options[o].is_none() {
                per_option.push(Vec::new());
                continue;
            }
            if pool.is_empty() {
                return Err(Error::Config(format!("empty start pool for region {src}")));
            }
            let mut rng = stream_rng(self.seed, &[0xd5, o as u64]);
            per_option.push(
                (0..m_starts)
                    .map(|_| pool[rng.random_range(0..pool.len())].clone())
                    .collect(),
            );
        }
        let (grouped, steps) = self.run(&per_option)?;
        let adp = ExpectedAdp::from_outcomes(self.env.gamma(), self.spec.n_regions(), edges, &grouped);
        Ok((adp, steps))
    }
}

/// Lattice points of every region box plus (optionally) the centre.
pub fn region_start_grid(spec: &AbstractSpec, grid: usize, include_center: bool) -> Vec<Vec<Vec<f64>>> {
    spec.regions
        .iter()
        .map(|r| {
            let mut pts = r.bbox().grid(grid);
            if include_center {
                pts.push(r.center.clone());
            }
            pts
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(terminal: Option<usize>, steps: usize, reward: f64) -> RolloutOutcome {
        RolloutOutcome {
            start: vec![0.0],
            terminal,
            steps,
            reward,
        }
    }

    #[test]
    fn interval_min_max_of_two_starts() {
        let g: f64 = 0.9;
        let per = vec![Some(vec![vec![outcome(Some(1), 1, 0.0)], vec![outcome(Some(1), 3, 0.0)]])];
        let adp = IntervalAdp::from_outcomes(g, 2, vec![(0, 1)], &per);
        assert!((adp.t_inf[0][1] - g.powi(3)).abs() < 1e-15);
        assert!((adp.t_sup[0][1] - g).abs() < 1e-15);
        let (et, er) = adp.epsilons();
        assert!((et - 0.171).abs() < 1e-12);
        assert_eq!(er, 0.0);
    }

    #[test]
    fn single_start_gives_zero_width() {
        let per = vec![Some(vec![vec![outcome(Some(1), 2, 0.5)]])];
        let adp = IntervalAdp::from_outcomes(0.95, 2, vec![(0, 1)], &per);
        assert_eq!(adp.t_inf, adp.t_sup);
        assert_eq!(adp.epsilons(), (0.0, 0.0));
        assert!((adp.t_inf[0][1] - 0.9025).abs() < 1e-15);
    }

    #[test]
    fn expected_is_two_point_mean() {
        let g: f64 = 0.95;
        let per = vec![Some(vec![vec![outcome(Some(1), 1, 0.0)], vec![outcome(Some(1), 3, 0.0)]])];
        let adp = ExpectedAdp::from_outcomes(g, 2, vec![(0, 1)], &per);
        assert!((adp.t[0][1] - (g + g.powi(3)) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn timeouts_contribute_nothing() {
        let per = vec![Some(vec![vec![outcome(None, 100, 0.0)]])];
        let adp = IntervalAdp::from_outcomes(0.95, 3, vec![(0, 1)], &per);
        assert!(adp.t_sup[0].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn text_round_trip() {
        let per = vec![
            Some(vec![vec![outcome(Some(1), 1, 0.0)], vec![outcome(Some(2), 3, 0.25)]]),
            None,
        ];
        let adp = IntervalAdp::from_outcomes(0.9, 3, vec![(0, 1), (1, 2)], &per);
        let text = adp.to_text();
        assert!(text.starts_with("# gamma=0.9 regions=3 "));
        let back = IntervalAdp::from_text(&text).unwrap();
        assert_eq!(back.t_inf[0], adp.t_inf[0]);
        assert_eq!(back.r_sup[0], adp.r_sup[0]);
        assert_eq!(back.options[0], (0, 1));
        assert!(IntervalAdp::from_text("").is_err());
        assert!(IntervalAdp::from_text("# gamma=0.9 regions=3\nh\nX,0,0,0,0,0,0").is_err());
    }
}
