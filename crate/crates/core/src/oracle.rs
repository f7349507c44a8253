//! Exact tabular ground truth on small deterministic gridworlds.
//!
//! Cells are `(x, y)` with `0 <= x < width`, `0 <= y < height`. Actions are
//! the four neighbourhood moves; moving off the grid or into a blocked cell
//! leaves the state unchanged. Regions are rectangles of cells and map to
//! boxes padded by [`CELL_PAD`] so that continuous code sees the same sets.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::Rng;

use crate::abstraction::{AbstractSpec, SubgoalRegion};
use crate::avi::AbstractPolicy;
use crate::env::{Environment, Transition};
use crate::error::{Error, Result};
use crate::estimation::IntervalAdp;
use crate::geometry::AxisBox;
use crate::policy::Controller;
use crate::rng::{stream_rng, SimRng};

pub const MOVES: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];
pub const CELL_PAD: f64 = 0.25;

/// Inclusive cell rectangle `[x0, x1] x [y0, y1]`.
pub type CellRect = [usize; 4];

#[derive(Debug, Clone, PartialEq)]
pub struct TabularInstance {
    pub width: usize,
    pub height: usize,
    pub blocked: Vec<bool>,
    pub gamma: f64,
    pub rects: Vec<CellRect>,
    pub spec: AbstractSpec,
    /// Region of every cell.
    pub region: Vec<Option<usize>>,
}

impl TabularInstance {
    /// Builds an instance; `edges = None` uses the direct-reachability relation.
    pub fn new(
        width: usize,
        height: usize,
        blocked: Vec<bool>,
        gamma: f64,
        rects: Vec<CellRect>,
        initial_id: usize,
        goal_id: usize,
        edges: Option<BTreeSet<(usize, usize)>>,
    ) -> Result<Self> {
        if blocked.len() != width * height || width == 0 || height == 0 {
            return Err(Error::InvalidInput("blocked mask does not match the grid".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidInput(format!("gamma {gamma} outside [0, 1)")));
        }
        let mut region = vec![None; width * height];
        for (i, r) in rects.iter().enumerate() {
            let [x0, y0, x1, y1] = *r;
            if x0 > x1 || y0 > y1 || x1 >= width || y1 >= height {
                return Err(Error::InvalidInput(format!("region {i} rectangle {r:?} invalid")));
            }
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let c = y * width + x;
                    if blocked[c] || region[c].is_some() {
                        return Err(Error::InvalidInput(format!("region {i} covers a blocked or shared cell")));
                    }
                    region[c] = Some(i);
                }
            }
        }
        let regions = rects
            .iter()
            .enumerate()
            .map(|(i, r)| {
                SubgoalRegion::new(
                    i,
                    AxisBox::new(
                        vec![r[0] as f64 - CELL_PAD, r[1] as f64 - CELL_PAD],
                        vec![r[2] as f64 + CELL_PAD, r[3] as f64 + CELL_PAD],
                    ),
                )
            })
            .collect();
        let mut inst = Self {
            width,
            height,
            blocked,
            gamma,
            rects,
            spec: AbstractSpec {
                initial_id,
                goal_id,
                edges: BTreeSet::new(),
                regions,
            },
            region,
        };
        inst.spec.edges = match edges {
            Some(e) => e,
            None => inst.direct_reachability(),
        };
        let report = crate::abstraction::validate(&inst.spec);
        if !report.is_valid() {
            return Err(Error::Structural(report.to_string()));
        }
        Ok(inst)
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn coords(&self, c: usize) -> (usize, usize) {
        (c % self.width, c / self.width)
    }

    pub fn is_goal_cell(&self, c: usize) -> bool {
        self.region[c] == Some(self.spec.goal_id)
    }

    /// Neighbour in direction `a`, or `c` itself when blocked.
    pub fn neighbor(&self, c: usize, a: usize) -> usize {
        let (x, y) = self.coords(c);
        let (dx, dy) = MOVES[a];
        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
        if nx < 0 || ny < 0 || nx >= self.width as i64 || ny >= self.height as i64 {
            return c;
        }
        let n = ny as usize * self.width + nx as usize;
        if self.blocked[n] {
            c
        } else {
            n
        }
    }

    /// Deterministic transition with the goal as a sink.
    pub fn step(&self, c: usize, a: usize) -> usize {
        if self.is_goal_cell(c) {
            c
        } else {
            self.neighbor(c, a)
        }
    }

    pub fn reward(&self, c: usize, a: usize) -> f64 {
        if !self.is_goal_cell(c) && self.is_goal_cell(self.step(c, a)) {
            1.0
        } else {
            0.0
        }
    }

    pub fn free_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_cells()).filter(|&c| !self.blocked[c])
    }

    pub fn region_cells(&self, r: usize) -> Vec<usize> {
        (0..self.n_cells()).filter(|&c| self.region[c] == Some(r)).collect()
    }

    pub fn initial_cells(&self) -> Vec<usize> {
        self.region_cells(self.spec.initial_id)
    }

    /// Regions entered first by some path leaving region `a` that touches no other region before.
    pub fn direct_successors(&self, a: usize) -> BTreeSet<usize> {
        let mut seen = vec![false; self.n_cells()];
        let mut queue: VecDeque<usize> = self.region_cells(a).into();
        for &c in &queue {
            seen[c] = true;
        }
        let mut out = BTreeSet::new();
        while let Some(c) = queue.pop_front() {
            for m in 0..4 {
                let n = self.neighbor(c, m);
                if seen[n] {
                    continue;
                }
                seen[n] = true;
                match self.region[n] {
                    Some(b) if b != a => {
                        out.insert(b);
                    }
                    _ => queue.push_back(n),
                }
            }
        }
        out
    }

    fn direct_reachability(&self) -> BTreeSet<(usize, usize)> {
        (0..self.rects.len())
            .filter(|&a| a != self.spec.goal_id)
            .flat_map(|a| self.direct_successors(a).into_iter().map(move |b| (a, b)))
            .collect()
    }

    /// Every region change along any trajectory is an edge.
    pub fn satisfies_bottleneck(&self) -> bool {
        (0..self.rects.len())
            .filter(|&a| a != self.spec.goal_id)
            .all(|a| self.direct_successors(a).iter().all(|b| self.spec.edges.contains(&(a, *b))))
    }

    /// Shortest-path policy per edge that avoids every region other than
    /// source and target; ties go to the lowest action index.
    pub fn ideal_options(&self) -> Vec<TableOption> {
        self.spec
            .edge_list()
            .into_iter()
            .map(|(src, tgt)| {
                let n = self.n_cells();
                let mut dist = vec![usize::MAX; n];
                let mut queue = VecDeque::new();
                for c in self.region_cells(tgt) {
                    dist[c] = 0;
                    queue.push_back(c);
                }
                let passable = |c: usize| !self.blocked[c] && (self.region[c].is_none() || self.region[c] == Some(src));
                while let Some(c) = queue.pop_front() {
                    // predecessors p with neighbor(p, m) == c
                    for m in 0..4 {
                        let (dx, dy) = MOVES[m];
                        let (x, y) = self.coords(c);
                        let (px, py) = (x as i64 - dx, y as i64 - dy);
                        if px < 0 || py < 0 || px >= self.width as i64 || py >= self.height as i64 {
                            continue;
                        }
                        let p = py as usize * self.width + px as usize;
                        if dist[p] == usize::MAX && passable(p) && self.neighbor(p, m) == c {
                            dist[p] = dist[c] + 1;
                            queue.push_back(p);
                        }
                    }
                }
                let actions = (0..n)
                    .map(|c| {
                        (0..4)
                            .min_by_key(|&m| (dist[self.neighbor(c, m)], m))
                            .unwrap() as u8
                    })
                    .collect();
                TableOption {
                    source: src,
                    target: tgt,
                    actions,
                    width: self.width,
                }
            })
            .collect()
    }

    /// Deterministic rollout of `opt` from cell `c` until it enters another region.
    pub fn option_outcome(&self, opt: &TableOption, c: usize) -> OptionStep {
        let mut s = c;
        let mut reward = 0.0;
        let mut disc = 1.0;
        // a deterministic walk that has not terminated after n steps cycles forever
        for t in 1..=self.n_cells() + 1 {
            let a = opt.actions[s] as usize;
            reward += disc * self.reward(s, a);
            disc *= self.gamma;
            s = self.step(s, a);
            if let Some(r) = self.region[s].filter(|&r| r != opt.source) {
                return OptionStep {
                    terminal: Some((s, r)),
                    steps: t,
                    reward,
                };
            }
        }
        OptionStep {
            terminal: None,
            steps: 0,
            reward: 0.0,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "gamma {}\nsize {} {}\ninitial {}\ngoal {}\n",
            self.gamma, self.width, self.height, self.spec.initial_id, self.spec.goal_id
        );
        for r in &self.rects {
            let _ = writeln!(out, "region {} {} {} {}", r[0], r[1], r[2], r[3]);
        }
        for (a, b) in &self.spec.edges {
            let _ = writeln!(out, "edge {a} {b}");
        }
        for y in (0..self.height).rev() {
            let row: String = (0..self.width)
                .map(|x| {
                    let c = y * self.width + x;
                    match (self.blocked[c], self.region[c]) {
                        (true, _) => '#',
                        (false, Some(r)) if r < 10 => char::from(b'0' + r as u8),
                        (false, Some(_)) => 'R',
                        (false, None) => '.',
                    }
                })
                .collect();
            let _ = writeln!(out, "map {row}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |d: String| Error::parse("tabular instance", d);
        let (mut gamma, mut size, mut initial, mut goal) = (None, None, None, None);
        let mut rects = Vec::new();
        let mut edges = BTreeSet::new();
        let mut rows = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (key, rest) = line.split_once(' ').ok_or_else(|| bad(format!("malformed line {line:?}")))?;
            let nums = || -> Result<Vec<usize>> {
                rest.split_whitespace()
                    .map(|v| v.parse::<usize>().map_err(|e| bad(format!("{line:?}: {e}"))))
                    .collect()
            };
            match key {
                "gamma" => gamma = Some(rest.trim().parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "size" => size = Some(nums()?),
                "initial" => initial = nums()?.first().copied(),
                "goal" => goal = nums()?.first().copied(),
                "region" => {
                    let v = nums()?;
                    if v.len() != 4 {
                        return Err(bad(format!("{line:?}: expected 4 numbers")));
                    }
                    rects.push([v[0], v[1], v[2], v[3]]);
                }
                "edge" => {
                    let v = nums()?;
                    if v.len() != 2 {
                        return Err(bad(format!("{line:?}: expected 2 numbers")));
                    }
                    edges.insert((v[0], v[1]));
                }
                "map" => rows.push(rest.to_string()),
                k => return Err(bad(format!("unknown key {k}"))),
            }
        }
        let size = size.filter(|s| s.len() == 2).ok_or_else(|| bad("missing size".into()))?;
        let (w, h) = (size[0], size[1]);
        if rows.len() != h || rows.iter().any(|r| r.chars().count() != w) {
            return Err(bad("map does not match size".into()));
        }
        let mut blocked = vec![false; w * h];
        for (k, row) in rows.iter().enumerate() {
            let y = h - 1 - k;
            for (x, ch) in row.chars().enumerate() {
                blocked[y * w + x] = ch == '#';
            }
        }
        Self::new(
            w,
            h,
            blocked,
            gamma.ok_or_else(|| bad("missing gamma".into()))?,
            rects,
            initial.ok_or_else(|| bad("missing initial".into()))?,
            goal.ok_or_else(|| bad("missing goal".into()))?,
            Some(edges),
        )
    }

    fn cell_of(&self, s: &[f64]) -> Result<usize> {
        let (x, y) = (s[0].round(), s[1].round());
        if x < 0.0 || y < 0.0 || x >= self.width as f64 || y >= self.height as f64 {
            return Err(Error::InvalidInput(format!("state {s:?} outside the grid")));
        }
        Ok(y as usize * self.width + x as usize)
    }

    fn state_of(&self, c: usize) -> Vec<f64> {
        let (x, y) = self.coords(c);
        vec![x as f64, y as f64]
    }

    pub fn cell_states(&self, cells: &[usize]) -> Vec<Vec<f64>> {
        cells.iter().map(|&c| self.state_of(c)).collect()
    }
}

/// States are `[x, y]` cell coordinates; the action is `[move index]`.
impl Environment for TabularInstance {
    fn state_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn transition(&self, s: &[f64], a: &[f64], _rng: &mut SimRng) -> Result<Transition> {
        let c = self.cell_of(s)?;
        let m = a.first().copied().unwrap_or(f64::NAN);
        if !(0.0..4.0).contains(&m) {
            return Err(Error::InvalidInput(format!("action {a:?} is not a move index")));
        }
        let m = m as usize;
        Ok(Transition {
            next: self.state_of(self.step(c, m)),
            reward: self.reward(c, m),
        })
    }

    fn sample_initial(&self, rng: &mut SimRng) -> Vec<f64> {
        let cells = self.initial_cells();
        self.state_of(cells[rng.random_range(0..cells.len())])
    }

    fn is_goal(&self, s: &[f64]) -> bool {
        self.cell_of(s).is_ok_and(|c| self.is_goal_cell(c))
    }
}

/// A tabular option policy: one move per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TableOption {
    pub source: usize,
    pub target: usize,
    pub actions: Vec<u8>,
    pub width: usize,
}

impl Controller for TableOption {
    fn action(&self, s: &[f64]) -> Vec<f64> {
        let c = s[1].round() as usize * self.width + s[0].round() as usize;
        vec![self.actions[c] as f64]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionStep {
    /// Terminal cell and region, `None` if the option never terminates.
    pub terminal: Option<(usize, usize)>,
    pub steps: usize,
    pub reward: f64,
}

/// Outcome of every option from every cell of its source region.
pub struct OutcomeTable {
    /// `[option][cell]`, `None` for cells outside the option's source.
    pub steps: Vec<Vec<Option<OptionStep>>>,
}

pub fn outcome_table(inst: &TabularInstance, options: &[TableOption]) -> OutcomeTable {
    OutcomeTable {
        steps: options
            .iter()
            .map(|o| {
                (0..inst.n_cells())
                    .map(|c| (inst.region[c] == Some(o.source)).then(|| inst.option_outcome(o, c)))
                    .collect()
            })
            .collect(),
    }
}

const EXACT_TOL: f64 = 1e-14;
const EXACT_MAX_ITERS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OptionValues {
    /// Per cell; zero outside regions.
    pub v: Vec<f64>,
    /// `[cell][option]`, `NEG_INFINITY` where the option is unavailable.
    pub q: Vec<Vec<f64>>,
}

/// Optimal option-level value `V_O*` over all region cells.
pub fn exact_option_vi(inst: &TabularInstance, options: &[TableOption]) -> OptionValues {
    let table = outcome_table(inst, options);
    let n = inst.n_cells();
    let mut v = vec![0.0; n];
    let mut q = vec![vec![f64::NEG_INFINITY; options.len()]; n];
    for _ in 0..EXACT_MAX_ITERS {
        let mut next = vec![0.0; n];
        for c in 0..n {
            let mut best = f64::NEG_INFINITY;
            for (o, row) in table.steps.iter().enumerate() {
                if let Some(out) = row[c] {
                    let cont = out.terminal.map_or(0.0, |(s, _)| inst.gamma.powi(out.steps as i32) * v[s]);
                    q[c][o] = out.reward + cont;
                    best = best.max(q[c][o]);
                }
            }
            if best > f64::NEG_INFINITY && !inst.is_goal_cell(c) {
                next[c] = best;
            }
        }
        let res = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if res < EXACT_TOL {
            break;
        }
    }
    OptionValues { v, q }
}

/// Exact inf/sup tables over every cell of each source region.
pub fn exact_tables(inst: &TabularInstance, options: &[TableOption]) -> IntervalAdp {
    let table = outcome_table(inst, options);
    let n_regions = inst.rects.len();
    let k = options.len();
    let mut adp = IntervalAdp {
        gamma: inst.gamma,
        n_regions,
        options: options.iter().map(|o| (o.source, o.target)).collect(),
        available: vec![true; k],
        t_inf: vec![vec![f64::INFINITY; n_regions]; k],
        t_sup: vec![vec![f64::NEG_INFINITY; n_regions]; k],
        r_inf: vec![f64::INFINITY; k],
        r_sup: vec![f64::NEG_INFINITY; k],
        samples: vec![0; k],
    };
    for (o, row) in table.steps.iter().enumerate() {
        for out in row.iter().flatten() {
            for j in 0..n_regions {
                let t = match out.terminal {
                    Some((_, r)) if r == j => inst.gamma.powi(out.steps as i32),
                    _ => 0.0,
                };
                adp.t_inf[o][j] = adp.t_inf[o][j].min(t);
                adp.t_sup[o][j] = adp.t_sup[o][j].max(t);
            }
            adp.r_inf[o] = adp.r_inf[o].min(out.reward);
            adp.r_sup[o] = adp.r_sup[o].max(out.reward);
            adp.samples[o] += 1;
        }
    }
    adp
}

/// Value of the hierarchical policy induced by `policy` at every region cell,
/// and its expectation over the initial cells.
pub fn exact_policy_value(
    inst: &TabularInstance,
    options: &[TableOption],
    policy: &AbstractPolicy,
) -> (Vec<f64>, f64) {
    let table = outcome_table(inst, options);
    let n = inst.n_cells();
    let mut v = vec![0.0; n];
    for _ in 0..EXACT_MAX_ITERS {
        let mut next = vec![0.0; n];
        for c in 0..n {
            let Some(r) = inst.region[c] else { continue };
            let Some(o) = policy.choice.get(r).copied().flatten() else { continue };
            if let Some(out) = table.steps[o][c] {
                let cont = out.terminal.map_or(0.0, |(s, _)| inst.gamma.powi(out.steps as i32) * v[s]);
                next[c] = out.reward + cont;
            }
        }
        let res = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if res < EXACT_TOL {
            break;
        }
    }
    let j = mean_over(&v, &inst.initial_cells());
    (v, j)
}

/// Optimal concrete value `V*` by plain value iteration over cells.
pub fn concrete_vi(inst: &TabularInstance) -> (Vec<f64>, f64) {
    let n = inst.n_cells();
    let mut v = vec![0.0; n];
    for _ in 0..EXACT_MAX_ITERS {
        let next: Vec<f64> = (0..n)
            .map(|c| {
                if inst.blocked[c] || inst.is_goal_cell(c) {
                    return 0.0;
                }
                (0..4)
                    .map(|a| inst.reward(c, a) + inst.gamma * v[inst.step(c, a)])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let res = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if res < EXACT_TOL {
            break;
        }
    }
    let j = mean_over(&v, &inst.initial_cells());
    (v, j)
}

fn mean_over(v: &[f64], cells: &[usize]) -> f64 {
    cells.iter().map(|&c| v[c]).sum::<f64>() / cells.len().max(1) as f64
}

/// Size ranges for [`random_instance`].
#[derive(Debug, Clone)]
pub struct InstanceParams {
    pub width: (usize, usize),
    pub height: (usize, usize),
    pub n_regions: (usize, usize),
    pub wall_density: f64,
    pub gamma: (f64, f64),
    /// Probability that a region is a two-cell domino instead of a single cell.
    pub domino_prob: f64,
    /// Probability of dropping a reachable edge.
    pub edge_drop: f64,
    pub max_tries: usize,
}

impl Default for InstanceParams {
    fn default() -> Self {
        Self {
            width: (4, 12),
            height: (3, 10),
            n_regions: (3, 6),
            wall_density: 0.15,
            gamma: (0.3, 0.7),
            domino_prob: 0.4,
            edge_drop: 0.2,
            max_tries: 10_000,
        }
    }
}

/// Draws a random gridworld with small regions, ideal options whose tables
/// satisfy `|S| eps_T < 1 - gamma`, and a goal reachable by some option plan.
pub fn random_instance(seed: u64, params: &InstanceParams) -> Result<TabularInstance> {
    for attempt in 0..params.max_tries {
        let mut rng = stream_rng(seed, &[0x07ac1e, attempt as u64]);
        let w = rng.random_range(params.width.0..=params.width.1);
        let h = rng.random_range(params.height.0..=params.height.1);
        let blocked: Vec<bool> = (0..w * h).map(|_| rng.random_bool(params.wall_density)).collect();
        let k = rng.random_range(params.n_regions.0..=params.n_regions.1);
        let mut taken = blocked.clone();
        let mut rects = Vec::with_capacity(k);
        for _ in 0..k {
            let mut placed = false;
            for _ in 0..100 {
                let x = rng.random_range(0..w);
                let y = rng.random_range(0..h);
                let rect = if rng.random_bool(params.domino_prob) {
                    if rng.random_bool(0.5) {
                        [x, y, (x + 1).min(w - 1), y]
                    } else {
                        [x, y, x, (y + 1).min(h - 1)]
                    }
                } else {
                    [x, y, x, y]
                };
                let cells: Vec<usize> = (rect[1]..=rect[3])
                    .flat_map(|yy| (rect[0]..=rect[2]).map(move |xx| yy * w + xx))
                    .collect();
                if cells.iter().all(|&c| !taken[c]) {
                    cells.iter().for_each(|&c| taken[c] = true);
                    rects.push(rect);
                    placed = true;
                    break;
                }
            }
            if !placed {
                break;
            }
        }
        if rects.len() < k {
            continue;
        }
        let gamma = rng.random_range(params.gamma.0..params.gamma.1);
        let Ok(full) = TabularInstance::new(w, h, blocked.clone(), gamma, rects.clone(), 0, k - 1, None) else {
            continue;
        };
        let edges: BTreeSet<(usize, usize)> = full
            .spec
            .edges
            .iter()
            .copied()
            .filter(|_| !rng.random_bool(params.edge_drop))
            .collect();
        let Ok(inst) = TabularInstance::new(w, h, blocked, gamma, rects, 0, k - 1, Some(edges)) else {
            continue;
        };
        // every non-goal region needs an option for policy extraction
        if (0..k - 1).any(|r| inst.spec.out_edges(r).next().is_none()) {
            continue;
        }
        let options = inst.ideal_options();
        let adp = exact_tables(&inst, &options);
        let (eps_t, _) = adp.epsilons();
        let (holds, _) = crate::avi::check_contraction(k, eps_t, gamma);
        if !holds {
            continue;
        }
        let vals = exact_option_vi(&inst, &options);
        if inst.initial_cells().iter().all(|&c| vals.v[c] == 0.0) {
            continue;
        }
        return Ok(inst);
    }
    Err(Error::Config(format!(
        "no admissible instance found in {} attempts",
        params.max_tries
    )))
}

/// A row of rooms joined by one-cell doorways. Regions are the initial cell
/// (or domino) in the first room, every doorway cell, and a goal cell in the
/// last room; edges are the direct-reachability relation, so every
/// trajectory passes through the doorway regions in order.
pub fn bottleneck_instance(seed: u64) -> Result<TabularInstance> {
    for attempt in 0..10_000u64 {
        let mut rng = stream_rng(seed, &[0xb07, attempt]);
        let n_rooms = rng.random_range(2..=4);
        let h = rng.random_range(3..=6);
        let room_w: Vec<usize> = (0..n_rooms).map(|_| rng.random_range(2..=4)).collect();
        let w = room_w.iter().sum::<usize>() + n_rooms - 1;
        let mut blocked = vec![false; w * h];
        let mut rects = Vec::new();
        let init_y = rng.random_range(0..h);
        let init = if h > 1 && rng.random_bool(0.5) && init_y + 1 < h {
            [0, init_y, 0, init_y + 1]
        } else {
            [0, init_y, 0, init_y]
        };
        rects.push(init);
        let mut x = 0;
        for (i, rw) in room_w.iter().enumerate() {
            x += rw;
            if i + 1 < n_rooms {
                let door = rng.random_range(0..h);
                for y in 0..h {
                    blocked[y * w + x] = y != door;
                }
                rects.push([x, door, x, door]);
                x += 1;
            }
        }
        let gy = rng.random_range(0..h);
        rects.push([w - 1, gy, w - 1, gy]);
        if rects[0][0] == w - 1 {
            continue;
        }
        let k = rects.len();
        let gamma = rng.random_range(0.3..0.7);
        let Ok(inst) = TabularInstance::new(w, h, blocked, gamma, rects, 0, k - 1, None) else {
            continue;
        };
        let options = inst.ideal_options();
        let (eps_t, _) = exact_tables(&inst, &options).epsilons();
        if crate::avi::check_contraction(k, eps_t, gamma).0 && inst.satisfies_bottleneck() {
            return Ok(inst);
        }
    }
    Err(Error::Config("no admissible bottleneck instance found".into()))
}
