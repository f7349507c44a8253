//! Grid-of-rooms navigation with kinematic dynamics and wall collisions.
//!
//! Rooms are indexed `(row, col)` with row 0 at the bottom. Room `(r, c)`
//! occupies `[c L, (c + 1) L] x [r L, (r + 1) L]` where `L` is the room size.
//! Every shared wall carries one doorway gap centred on the wall.
//!
//! The state is the `(x, y)` position and the action is `(v, theta)`:
//! the robot moves by `(v cos theta, v sin theta)` unless the motion crosses
//! a wall or obstacle, in which case it stops just short of the first contact.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{check_finite, Environment, Transition};
use crate::error::{Error, Result};
use crate::geometry::{AxisBox, Segment};
use crate::rng::SimRng;

pub const DEFAULT_ROOM_SIZE: f64 = 8.0;
pub const DEFAULT_DOORWAY_WIDTH: f64 = 2.0;
pub const DEFAULT_MAX_SPEED: f64 = 1.0;
pub const DEFAULT_CONTACT_EPSILON: f64 = 1e-6;
pub const DEFAULT_GAMMA: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvName {
    NineRooms,
    SixteenRooms,
    NineRoomsObstacle,
}

impl EnvName {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnvName::NineRooms => "nine_rooms",
            EnvName::SixteenRooms => "sixteen_rooms",
            EnvName::NineRoomsObstacle => "nine_rooms_obstacle",
        }
    }

    fn grid(&self) -> (usize, usize) {
        match self {
            EnvName::NineRooms | EnvName::NineRoomsObstacle => (3, 3),
            EnvName::SixteenRooms => (4, 4),
        }
    }
}

impl fmt::Display for EnvName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nine_rooms" | "9-rooms" => Ok(EnvName::NineRooms),
            "sixteen_rooms" | "16-rooms" => Ok(EnvName::SixteenRooms),
            "nine_rooms_obstacle" | "9-rooms-obstacle" => Ok(EnvName::NineRoomsObstacle),
            other => Err(Error::Config(format!("unknown environment `{other}`"))),
        }
    }
}

/// Optional geometry and dynamics overrides, read from the `[env]` table of
/// a configuration file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomOverrides {
    pub room_size: Option<f64>,
    pub doorway_width: Option<f64>,
    pub max_speed: Option<f64>,
    pub contact_epsilon: Option<f64>,
    pub gamma: Option<f64>,
    /// Room `[row, col]` holding the start square.
    pub start_room: Option<[usize; 2]>,
    /// Explicit goal box `[x_lo, y_lo, x_hi, y_hi]`.
    pub goal_box: Option<[f64; 4]>,
    /// Explicit start box `[x_lo, y_lo, x_hi, y_hi]`.
    pub start_box: Option<[f64; 4]>,
}

/// A doorway between two horizontally or vertically adjacent rooms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Doorway {
    pub rooms: [(usize, usize); 2],
    pub center: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoomGeometry {
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub room_size: f64,
    pub doorway_width: f64,
    pub wall_segments: Vec<Segment>,
    pub obstacle_boxes: Vec<AxisBox>,
    pub goal_box: AxisBox,
    pub start_box: AxisBox,
}

impl RoomGeometry {
    /// Builds the walls of a full grid with one centred doorway per shared wall.
    pub fn grid(rows: usize, cols: usize, room_size: f64, doorway_width: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Config("room grid must be nonempty".into()));
        }
        if !(room_size > 0.0) || !(doorway_width > 0.0 && doorway_width < room_size) {
            return Err(Error::Config(format!(
                "need room_size > 0 and 0 < doorway_width < room_size, got {room_size}, {doorway_width}"
            )));
        }
        let l = room_size;
        let (w, h) = (cols as f64 * l, rows as f64 * l);
        let half = 0.5 * doorway_width;
        let mut walls = vec![
            Segment::new([0.0, 0.0], [w, 0.0]),
            Segment::new([w, 0.0], [w, h]),
            Segment::new([w, h], [0.0, h]),
            Segment::new([0.0, h], [0.0, 0.0]),
        ];
        for c in 1..cols {
            let x = c as f64 * l;
            for r in 0..rows {
                let (y0, y1, yc) = (r as f64 * l, (r + 1) as f64 * l, (r as f64 + 0.5) * l);
                walls.push(Segment::new([x, y0], [x, yc - half]));
                walls.push(Segment::new([x, yc + half], [x, y1]));
            }
        }
        for r in 1..rows {
            let y = r as f64 * l;
            for c in 0..cols {
                let (x0, x1, xc) = (c as f64 * l, (c + 1) as f64 * l, (c as f64 + 0.5) * l);
                walls.push(Segment::new([x0, y], [xc - half, y]));
                walls.push(Segment::new([xc + half, y], [x1, y]));
            }
        }
        let start_box = AxisBox::centered(&room_center(0, 0, l), half);
        let goal_box = default_goal_box(rows - 1, cols - 1, l, half);
        Ok(Self {
            grid_rows: rows,
            grid_cols: cols,
            room_size: l,
            doorway_width,
            wall_segments: walls,
            obstacle_boxes: Vec::new(),
            goal_box,
            start_box,
        })
    }

    pub fn width(&self) -> f64 {
        self.grid_cols as f64 * self.room_size
    }

    pub fn height(&self) -> f64 {
        self.grid_rows as f64 * self.room_size
    }

    pub fn workspace(&self) -> AxisBox {
        AxisBox::new(vec![0.0, 0.0], vec![self.width(), self.height()])
    }

    pub fn room_box(&self, row: usize, col: usize) -> AxisBox {
        let l = self.room_size;
        AxisBox::new(
            vec![col as f64 * l, row as f64 * l],
            vec![(col + 1) as f64 * l, (row + 1) as f64 * l],
        )
    }

    pub fn room_center(&self, row: usize, col: usize) -> [f64; 2] {
        room_center(row, col, self.room_size)
    }

    /// Room containing a point (points on walls resolve to the upper/right room).
    pub fn room_of(&self, p: &[f64]) -> (usize, usize) {
        let l = self.room_size;
        let col = ((p[0] / l).floor().max(0.0) as usize).min(self.grid_cols - 1);
        let row = ((p[1] / l).floor().max(0.0) as usize).min(self.grid_rows - 1);
        (row, col)
    }

    /// Doorways ordered by wall: vertical walls first (row-major), then horizontal ones.
    pub fn doorways(&self) -> Vec<Doorway> {
        let l = self.room_size;
        let mut out = Vec::new();
        for r in 0..self.grid_rows {
            for c in 1..self.grid_cols {
                out.push(Doorway {
                    rooms: [(r, c - 1), (r, c)],
                    center: [c as f64 * l, (r as f64 + 0.5) * l],
                });
            }
        }
        for r in 1..self.grid_rows {
            for c in 0..self.grid_cols {
                out.push(Doorway {
                    rooms: [(r - 1, c), (r, c)],
                    center: [(c as f64 + 0.5) * l, r as f64 * l],
                });
            }
        }
        out
    }

    fn obstacle_edges(&self) -> impl Iterator<Item = Segment> + '_ {
        self.obstacle_boxes.iter().flat_map(|b| {
            let (x0, y0, x1, y1) = (b.lo[0], b.lo[1], b.hi[0], b.hi[1]);
            [
                Segment::new([x0, y0], [x1, y0]),
                Segment::new([x1, y0], [x1, y1]),
                Segment::new([x1, y1], [x0, y1]),
                Segment::new([x0, y1], [x0, y0]),
            ]
        })
    }
}

fn room_center(row: usize, col: usize, l: f64) -> [f64; 2] {
    [(col as f64 + 0.5) * l, (row as f64 + 0.5) * l]
}

/// Goal square in the given room, offset towards the room's left doorway so
/// that symmetric routes do not tie.
fn default_goal_box(row: usize, col: usize, l: f64, half: f64) -> AxisBox {
    let (ox, oy) = (col as f64 * l, row as f64 * l);
    AxisBox::centered(&[ox + 0.28125 * l, oy + 0.625 * l], half)
}

/// The simulated room-navigation MDP.
#[derive(Debug, Clone)]
pub struct RoomEnv {
    pub name: EnvName,
    pub geometry: RoomGeometry,
    pub gamma: f64,
    pub max_speed: f64,
    pub contact_epsilon: f64,
    segments: Vec<Segment>,
}

impl RoomEnv {
    pub fn new(
        name: EnvName,
        geometry: RoomGeometry,
        gamma: f64,
        max_speed: f64,
        contact_epsilon: f64,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1), got {gamma}")));
        }
        if !(max_speed > 0.0) || !(contact_epsilon >= 0.0) {
            return Err(Error::Config("max_speed must be > 0 and contact_epsilon >= 0".into()));
        }
        let mut segments = geometry.wall_segments.clone();
        segments.extend(geometry.obstacle_edges());
        Ok(Self {
            name,
            geometry,
            gamma,
            max_speed,
            contact_epsilon,
            segments,
        })
    }

    /// Next position for a 2D state; allocation free.
    pub fn advance(&self, s: [f64; 2], speed: f64, heading: f64) -> [f64; 2] {
        if self.geometry.goal_box.contains(&s) {
            return s;
        }
        let v = speed.clamp(0.0, self.max_speed);
        if v == 0.0 {
            return s;
        }
        let theta = heading.rem_euclid(TAU);
        let r = [v * theta.cos(), v * theta.sin()];
        let hit = self
            .segments
            .iter()
            .filter_map(|seg| seg.first_hit(s, r))
            .fold(f64::INFINITY, f64::min);
        if hit.is_finite() {
            let travel = (hit * v - self.contact_epsilon).max(0.0);
            let (c, sn) = (r[0] / v, r[1] / v);
            [s[0] + travel * c, s[1] + travel * sn]
        } else {
            [s[0] + r[0], s[1] + r[1]]
        }
    }

    fn checked(&self, s: &[f64], a: &[f64]) -> Result<([f64; 2], f64, f64)> {
        if s.len() != 2 || a.len() != 2 {
            return Err(Error::InvalidInput(format!(
                "room states and actions are 2-dimensional, got {} and {}",
                s.len(),
                a.len()
            )));
        }
        check_finite("state", s)?;
        check_finite("action", a)?;
        Ok(([s[0], s[1]], a[0], a[1]))
    }

    pub fn step(&self, s: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        let (p, v, th) = self.checked(s, a)?;
        Ok(self.advance(p, v, th).to_vec())
    }

    /// 1 exactly when the step moves from outside the goal box into it.
    pub fn reward(&self, s: &[f64], a: &[f64]) -> Result<f64> {
        let (p, v, th) = self.checked(s, a)?;
        Ok(self.reward_of(p, self.advance(p, v, th)))
    }

    fn reward_of(&self, from: [f64; 2], to: [f64; 2]) -> f64 {
        let g = &self.geometry.goal_box;
        if !g.contains(&from) && g.contains(&to) {
            1.0
        } else {
            0.0
        }
    }

    pub fn in_obstacle(&self, s: &[f64]) -> bool {
        self.geometry.obstacle_boxes.iter().any(|b| {
            b.lo.iter()
                .zip(&b.hi)
                .zip(s)
                .all(|((l, h), v)| *l < *v && *v < *h)
        })
    }
}

impl Environment for RoomEnv {
    fn state_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn transition(&self, s: &[f64], a: &[f64], _rng: &mut SimRng) -> Result<Transition> {
        let (p, v, th) = self.checked(s, a)?;
        let next = self.advance(p, v, th);
        Ok(Transition {
            reward: self.reward_of(p, next),
            next: next.to_vec(),
        })
    }

    fn sample_initial(&self, rng: &mut SimRng) -> Vec<f64> {
        self.geometry.start_box.sample(rng)
    }

    fn max_speed(&self) -> f64 {
        self.max_speed
    }

    fn is_goal(&self, s: &[f64]) -> bool {
        self.geometry.goal_box.contains(s)
    }
}

fn box_from(b: [f64; 4]) -> Result<AxisBox> {
    let bx = AxisBox::new(vec![b[0], b[1]], vec![b[2], b[3]]);
    if bx.is_nonempty() {
        Ok(bx)
    } else {
        Err(Error::Config(format!("empty box {b:?}")))
    }
}

/// Builds one of the named room environments with optional overrides.
pub fn build_env(name: EnvName, overrides: &RoomOverrides) -> Result<RoomEnv> {
    let (rows, cols) = name.grid();
    let l = overrides.room_size.unwrap_or(DEFAULT_ROOM_SIZE);
    let w = overrides.doorway_width.unwrap_or(DEFAULT_DOORWAY_WIDTH);
    let mut geometry = RoomGeometry::grid(rows, cols, l, w)?;
    if name == EnvName::NineRoomsObstacle {
        geometry
            .obstacle_boxes
            .push(geometry.room_box(1, 1).shrink(0.1875 * l));
    }
    if let Some([r, c]) = overrides.start_room {
        if r >= rows || c >= cols {
            return Err(Error::Config(format!("start room ({r}, {c}) outside the grid")));
        }
        geometry.start_box = AxisBox::centered(&geometry.room_center(r, c), 0.5 * w);
    }
    if let Some(b) = overrides.start_box {
        geometry.start_box = box_from(b)?;
    }
    if let Some(b) = overrides.goal_box {
        geometry.goal_box = box_from(b)?;
    }
    if geometry.start_box.intersects(&geometry.goal_box) {
        return Err(Error::Config("start and goal boxes overlap".into()));
    }
    RoomEnv::new(
        name,
        geometry,
        overrides.gamma.unwrap_or(DEFAULT_GAMMA),
        overrides.max_speed.unwrap_or(DEFAULT_MAX_SPEED),
        overrides.contact_epsilon.unwrap_or(DEFAULT_CONTACT_EPSILON),
    )
}
