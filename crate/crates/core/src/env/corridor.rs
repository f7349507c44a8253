//! One-dimensional corridor used as a small training fixture.

use std::f64::consts::TAU;

use super::{check_finite, Environment, Transition};
use crate::error::{Error, Result};
use crate::geometry::AxisBox;
use crate::rng::SimRng;

/// Positions `x` in `[0, length]`; the `(v, theta)` action moves by `v cos theta`.
#[derive(Debug, Clone)]
pub struct Corridor {
    pub length: f64,
    pub max_speed: f64,
    pub gamma: f64,
    pub start: AxisBox,
    pub goal: AxisBox,
}

impl Corridor {
    pub fn new(length: f64, start: (f64, f64), goal: (f64, f64), gamma: f64) -> Self {
        Self {
            length,
            max_speed: 1.0,
            gamma,
            start: AxisBox::new(vec![start.0], vec![start.1]),
            goal: AxisBox::new(vec![goal.0], vec![goal.1]),
        }
    }
}

impl Environment for Corridor {
    fn state_dim(&self) -> usize {
        1
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn transition(&self, s: &[f64], a: &[f64], _rng: &mut SimRng) -> Result<Transition> {
        if s.len() != 1 || a.len() != 2 {
            return Err(Error::InvalidInput("corridor expects 1-d states, 2-d actions".into()));
        }
        check_finite("state", s)?;
        check_finite("action", a)?;
        if self.goal.contains(s) {
            return Ok(Transition {
                next: s.to_vec(),
                reward: 0.0,
            });
        }
        let v = a[0].clamp(0.0, self.max_speed);
        let x = (s[0] + v * a[1].rem_euclid(TAU).cos()).clamp(0.0, self.length);
        let next = vec![x];
        let reward = if self.goal.contains(&next) { 1.0 } else { 0.0 };
        Ok(Transition { next, reward })
    }

    fn sample_initial(&self, rng: &mut SimRng) -> Vec<f64> {
        self.start.sample(rng)
    }

    fn max_speed(&self) -> f64 {
        self.max_speed
    }

    fn is_goal(&self, s: &[f64]) -> bool {
        self.goal.contains(s)
    }
}
