//! Subgoal regions, the edges between them, and the region layouts used by
//! the room experiments.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::RoomEnv;
use crate::error::{Error, Result};
use crate::geometry::AxisBox;
use crate::rng::stream_rng;

/// A user-specified subset of concrete states. Ids equal positions in
/// [`AbstractSpec::regions`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgoalRegion {
    pub id: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub center: Vec<f64>,
}

impl SubgoalRegion {
    pub fn new(id: usize, bbox: AxisBox) -> Self {
        let center = bbox.center();
        Self {
            id,
            lo: bbox.lo,
            hi: bbox.hi,
            center,
        }
    }

    pub fn bbox(&self) -> AxisBox {
        AxisBox::new(self.lo.clone(), self.hi.clone())
    }

    pub fn contains(&self, s: &[f64]) -> bool {
        s.len() == self.lo.len()
            && s.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    pub fn half_width(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (h - l))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Regions, directed edges, and the distinguished initial and goal regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractSpec {
    pub initial_id: usize,
    pub goal_id: usize,
    pub edges: BTreeSet<(usize, usize)>,
    pub regions: Vec<SubgoalRegion>,
}

impl AbstractSpec {
    pub fn n_regions(&self) -> usize {
        self.regions.len()
    }

    /// Edges in sorted order; the position of an edge is its option id.
    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        self.edges.iter().copied().collect()
    }

    /// Region containing `s`, if any.
    pub fn region_of(&self, s: &[f64]) -> Option<usize> {
        self.regions.iter().position(|r| r.contains(s))
    }

    /// First region other than `source` containing `s`.
    pub fn terminal_region(&self, s: &[f64], source: usize) -> Option<usize> {
        self.regions
            .iter()
            .enumerate()
            .find(|(i, r)| *i != source && r.contains(s))
            .map(|(i, _)| i)
    }

    pub fn out_edges(&self, region: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges
            .range((region, 0)..(region + 1, 0))
            .copied()
    }

    /// Same regions with different endpoints; edges leaving the new goal are dropped.
    pub fn with_endpoints(&self, initial_id: usize, goal_id: usize) -> Result<Self> {
        let mut spec = self.clone();
        spec.initial_id = initial_id;
        spec.goal_id = goal_id;
        spec.edges.retain(|(a, _)| *a != goal_id);
        let report = validate(&spec);
        if report.is_valid() {
            Ok(spec)
        } else {
            Err(Error::Config(format!("invalid endpoints: {report}")))
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(&SpecFile::from(self)).map_err(|e| Error::parse("abstract spec", e))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: SpecFile = toml::from_str(text).map_err(|e| Error::parse("abstract spec", e))?;
        Ok(file.into())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct SpecFile {
    initial_id: usize,
    goal_id: usize,
    edges: Vec<[usize; 2]>,
    regions: Vec<SubgoalRegion>,
}

impl From<&AbstractSpec> for SpecFile {
    fn from(s: &AbstractSpec) -> Self {
        Self {
            initial_id: s.initial_id,
            goal_id: s.goal_id,
            edges: s.edges.iter().map(|(a, b)| [*a, *b]).collect(),
            regions: s.regions.clone(),
        }
    }
}

impl From<SpecFile> for AbstractSpec {
    fn from(f: SpecFile) -> Self {
        Self {
            initial_id: f.initial_id,
            goal_id: f.goal_id,
            edges: f.edges.into_iter().map(|[a, b]| (a, b)).collect(),
            regions: f.regions,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    IdMismatch { index: usize, id: usize },
    EmptyBox(usize),
    CenterOutside(usize),
    DimensionMismatch(usize),
    Overlap(usize, usize),
    SelfEdge(usize),
    EdgeFromGoal(usize, usize),
    DanglingEdge(usize, usize),
    UnknownRegion(&'static str, usize),
    InitialIsGoal,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::IdMismatch { index, id } => write!(f, "region at index {index} has id {id}"),
            Violation::EmptyBox(i) => write!(f, "region {i} has an empty box"),
            Violation::CenterOutside(i) => write!(f, "center of region {i} lies outside its box"),
            Violation::DimensionMismatch(i) => write!(f, "region {i} has inconsistent dimensions"),
            Violation::Overlap(a, b) => write!(f, "regions {a} and {b} overlap"),
            Violation::SelfEdge(a) => write!(f, "self edge on region {a}"),
            Violation::EdgeFromGoal(a, b) => write!(f, "edge {a}->{b} leaves the goal region"),
            Violation::DanglingEdge(a, b) => write!(f, "edge {a}->{b} references a missing region"),
            Violation::UnknownRegion(which, i) => write!(f, "{which} region {i} does not exist"),
            Violation::InitialIsGoal => write!(f, "initial region equals goal region"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

/// Checks every structural invariant of a spec and lists the failures.
pub fn validate(spec: &AbstractSpec) -> ValidationReport {
    let mut v = Vec::new();
    let n = spec.regions.len();
    let dim = spec.regions.first().map(|r| r.lo.len()).unwrap_or(0);
    for (index, r) in spec.regions.iter().enumerate() {
        if r.id != index {
            v.push(Violation::IdMismatch { index, id: r.id });
        }
        if r.lo.len() != dim || r.hi.len() != dim || r.center.len() != dim {
            v.push(Violation::DimensionMismatch(index));
            continue;
        }
        let b = r.bbox();
        if !b.is_nonempty() {
            v.push(Violation::EmptyBox(index));
        } else if !b.contains(&r.center) {
            v.push(Violation::CenterOutside(index));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&spec.regions[i], &spec.regions[j]);
            if a.lo.len() == b.lo.len() && a.bbox().intersects(&b.bbox()) {
                v.push(Violation::Overlap(i, j));
            }
        }
    }
    for &(a, b) in &spec.edges {
        if a >= n || b >= n {
            v.push(Violation::DanglingEdge(a, b));
        } else if a == b {
            v.push(Violation::SelfEdge(a));
        } else if a == spec.goal_id {
            v.push(Violation::EdgeFromGoal(a, b));
        }
    }
    if spec.initial_id >= n {
        v.push(Violation::UnknownRegion("initial", spec.initial_id));
    }
    if spec.goal_id >= n {
        v.push(Violation::UnknownRegion("goal", spec.goal_id));
    }
    if spec.initial_id == spec.goal_id {
        v.push(Violation::InitialIsGoal);
    }
    ValidationReport { violations: v }
}

/// Region ids for the 3x3 doorway layout, keyed by the pair of rooms each
/// doorway joins. The start square is region 3 and the goal square region 9.
const NINE_ROOM_DOOR_IDS: [((usize, usize), (usize, usize), usize); 12] = [
    ((0, 0), (0, 1), 0),
    ((0, 0), (1, 0), 1),
    ((1, 0), (2, 0), 2),
    ((1, 0), (1, 1), 4),
    ((2, 0), (2, 1), 5),
    ((0, 1), (1, 1), 6),
    ((1, 1), (2, 1), 7),
    ((2, 1), (2, 2), 8),
    ((0, 1), (0, 2), 10),
    ((1, 1), (1, 2), 11),
    ((0, 2), (1, 2), 12),
    ((1, 2), (2, 2), 13),
];
const NINE_ROOM_START_ID: usize = 3;
const NINE_ROOM_GOAL_ID: usize = 9;

fn finish_spec(
    mut placed: Vec<(usize, AxisBox, Vec<(usize, usize)>)>,
    initial_id: usize,
    goal_id: usize,
) -> AbstractSpec {
    placed.sort_by_key(|(id, _, _)| *id);
    let mut edges = BTreeSet::new();
    for (a, _, rooms_a) in &placed {
        if *a == goal_id {
            continue;
        }
        for (b, _, rooms_b) in &placed {
            if a != b && rooms_a.iter().any(|r| rooms_b.contains(r)) {
                edges.insert((*a, *b));
            }
        }
    }
    AbstractSpec {
        initial_id,
        goal_id,
        edges,
        regions: placed
            .into_iter()
            .map(|(id, b, _)| SubgoalRegion::new(id, b))
            .collect(),
    }
}

/// One doorway-sized square per doorway plus the start and goal squares;
/// regions that touch a common room are joined in both directions.
pub fn doorway_spec(env: &RoomEnv) -> AbstractSpec {
    let g = &env.geometry;
    let half = 0.5 * g.doorway_width;
    let doors = g.doorways();
    let nine = g.grid_rows == 3 && g.grid_cols == 3;
    let (start_id, goal_id) = if nine {
        (NINE_ROOM_START_ID, NINE_ROOM_GOAL_ID)
    } else {
        (0, doors.len() + 1)
    };
    let mut placed = Vec::with_capacity(doors.len() + 2);
    for (k, d) in doors.iter().enumerate() {
        let id = if nine {
            NINE_ROOM_DOOR_IDS
                .iter()
                .find(|(a, b, _)| [*a, *b] == d.rooms)
                .map(|(_, _, id)| *id)
                .expect("every 3x3 doorway has an id")
        } else {
            k + 1
        };
        placed.push((id, AxisBox::centered(&d.center, half), d.rooms.to_vec()));
    }
    let start = g.start_box.clone();
    let goal = g.goal_box.clone();
    placed.push((start_id, start.clone(), vec![g.room_of(&start.center())]));
    placed.push((goal_id, goal.clone(), vec![g.room_of(&goal.center())]));
    finish_spec(placed, start_id, goal_id)
}

fn room_grid_spec(env: &RoomEnv, room_region: impl Fn(usize, usize) -> AxisBox) -> AbstractSpec {
    let g = &env.geometry;
    let start_room = g.room_of(&g.start_box.center());
    let goal_room = g.room_of(&g.goal_box.center());
    let mut placed = Vec::new();
    let mut next = 1;
    let goal_id = g.grid_rows * g.grid_cols - 1;
    for r in 0..g.grid_rows {
        for c in 0..g.grid_cols {
            let (id, bx) = if (r, c) == goal_room {
                (goal_id, g.goal_box.clone())
            } else if (r, c) == start_room {
                (0, room_region(r, c))
            } else {
                next += 1;
                (next - 1, room_region(r, c))
            };
            let mut rooms = vec![(r, c)];
            if r > 0 {
                rooms.push((r - 1, c));
            }
            if r + 1 < g.grid_rows {
                rooms.push((r + 1, c));
            }
            if c > 0 {
                rooms.push((r, c - 1));
            }
            if c + 1 < g.grid_cols {
                rooms.push((r, c + 1));
            }
            placed.push((id, bx, rooms));
        }
    }
    // adjacency: a and b are adjacent when b's own room is a neighbour of a's room
    placed.sort_by_key(|(id, _, _)| *id);
    let own: Vec<(usize, usize)> = placed.iter().map(|(_, _, rooms)| rooms[0]).collect();
    let mut edges = BTreeSet::new();
    for (a, _, rooms_a) in &placed {
        if *a == goal_id {
            continue;
        }
        for (b, _, _) in &placed {
            if a != b && rooms_a[1..].contains(&own[*b]) {
                edges.insert((*a, *b));
            }
        }
    }
    AbstractSpec {
        initial_id: 0,
        goal_id,
        edges,
        regions: placed
            .into_iter()
            .map(|(id, b, _)| SubgoalRegion::new(id, b))
            .collect(),
    }
}

/// A doorway-sized square at the centre of every room (the start square in
/// the start room, the goal square in the goal room); adjacent rooms are joined.
pub fn room_center_spec(env: &RoomEnv) -> AbstractSpec {
    let g = &env.geometry;
    let half = 0.5 * g.doorway_width;
    let start_room = g.room_of(&g.start_box.center());
    room_grid_spec(env, |r, c| {
        if (r, c) == start_room {
            g.start_box.clone()
        } else {
            AxisBox::centered(&g.room_center(r, c), half)
        }
    })
}

/// Margin between a full-room region and the walls around it.
pub const FULL_ROOM_MARGIN: f64 = 0.1;

/// One region per room covering the room interior (the goal room keeps the
/// goal square); adjacent rooms are joined.
pub fn full_room_spec(env: &RoomEnv) -> AbstractSpec {
    let g = &env.geometry;
    room_grid_spec(env, |r, c| g.room_box(r, c).shrink(FULL_ROOM_MARGIN))
}

/// Directed edges from each point to its `k` nearest other points, ties by index.
pub fn knn_edges(centers: &[Vec<f64>], k: usize) -> BTreeSet<(usize, usize)> {
    let mut edges = BTreeSet::new();
    for (i, ci) in centers.iter().enumerate() {
        let mut others: Vec<(f64, usize)> = centers
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(j, cj)| (dist(ci, cj), j))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        edges.extend(others.into_iter().take(k).map(|(_, j)| (i, j)));
    }
    edges
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

const RANDOM_SPEC_RETRIES: usize = 1000;

/// Random square regions with symmetrised k-nearest-neighbour edges. The
/// start and goal squares are appended (ids `n_points` and `n_points + 1`)
/// and wired to their `k_neighbors` nearest sampled centres.
pub fn random_spec(
    env: &RoomEnv,
    n_points: usize,
    k_neighbors: usize,
    region_half_width: f64,
    seed: u64,
) -> Result<AbstractSpec> {
    if n_points < 2 || k_neighbors >= n_points || k_neighbors == 0 {
        return Err(Error::Config(format!(
            "random regions need n_points >= 2 and 0 < k < n_points, got n={n_points}, k={k_neighbors}"
        )));
    }
    let g = &env.geometry;
    let mut rng = stream_rng(seed, &[0x5eed]);
    let fixed = [g.start_box.clone(), g.goal_box.clone()];
    let mut boxes: Vec<AxisBox> = Vec::with_capacity(n_points);
    let mut hw = region_half_width;
    while boxes.len() < n_points {
        let mut placed = false;
        for _ in 0..RANDOM_SPEC_RETRIES {
            let c = [
                rng.random_range(hw..g.width() - hw),
                rng.random_range(hw..g.height() - hw),
            ];
            if env.in_obstacle(&c) {
                continue;
            }
            let b = AxisBox::centered(&c, hw);
            let clash = fixed.iter().chain(boxes.iter()).any(|o| o.intersects(&b))
                || g.obstacle_boxes.iter().any(|o| o.intersects(&b));
            if !clash {
                boxes.push(b);
                placed = true;
                break;
            }
        }
        if !placed {
            hw *= 0.9;
            log::warn!("random regions: shrinking half-width to {hw:.3}");
        }
    }
    let centers: Vec<Vec<f64>> = boxes.iter().map(|b| b.center()).collect();
    let mut edges = BTreeSet::new();
    for (a, b) in knn_edges(&centers, k_neighbors) {
        edges.insert((a, b));
        edges.insert((b, a));
    }
    let (start_id, goal_id) = (n_points, n_points + 1);
    let nearest = |p: &[f64]| -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = centers.iter().enumerate().map(|(j, c)| (dist(p, c), j)).collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.into_iter().take(k_neighbors).map(|(_, j)| j).collect()
    };
    for j in nearest(&g.start_box.center()) {
        edges.insert((start_id, j));
        edges.insert((j, start_id));
    }
    for j in nearest(&g.goal_box.center()) {
        edges.insert((j, goal_id));
    }
    let mut regions: Vec<SubgoalRegion> = boxes
        .into_iter()
        .enumerate()
        .map(|(i, b)| SubgoalRegion::new(i, b))
        .collect();
    regions.push(SubgoalRegion::new(start_id, g.start_box.clone()));
    regions.push(SubgoalRegion::new(goal_id, g.goal_box.clone()));
    Ok(AbstractSpec {
        initial_id: start_id,
        goal_id,
        edges,
        regions,
    })
}
