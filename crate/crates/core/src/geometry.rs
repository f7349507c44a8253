//! Axis-aligned boxes and planar segments.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Closed axis-aligned box `lo[i] <= x[i] <= hi[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len(), "box bounds must share a dimension");
        Self { lo, hi }
    }

    /// Square (hyper-cube) of the given half-width around `center`.
    pub fn centered(center: &[f64], half_width: f64) -> Self {
        Self {
            lo: center.iter().map(|c| c - half_width).collect(),
            hi: center.iter().map(|c| c + half_width).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_nonempty(&self) -> bool {
        self.lo.iter().zip(&self.hi).all(|(l, h)| l <= h)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.lo.len()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    /// Closed boxes intersect unless some coordinate interval is strictly separated.
    pub fn intersects(&self, other: &AxisBox) -> bool {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(other.lo.iter().zip(&other.hi))
            .all(|((al, ah), (bl, bh))| al <= bh && bl <= ah)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }

    pub fn half_widths(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (h - l))
            .collect()
    }

    /// Box shrunk by `margin` on every side.
    pub fn shrink(&self, margin: f64) -> Self {
        Self {
            lo: self.lo.iter().map(|l| l + margin).collect(),
            hi: self.hi.iter().map(|h| h - margin).collect(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| if h > l { rng.random_range(*l..*h) } else { *l })
            .collect()
    }

    /// Cell-centred `g^d` lattice of points.
    pub fn grid(&self, g: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        if g == 0 {
            return Vec::new();
        }
        let total = g.pow(d as u32);
        (0..total)
            .map(|mut k| {
                (0..d)
                    .map(|i| {
                        let idx = k % g;
                        k /= g;
                        self.lo[i] + (idx as f64 + 0.5) / g as f64 * (self.hi[i] - self.lo[i])
                    })
                    .collect()
            })
            .collect()
    }
}

/// Planar line segment from `a` to `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

fn cross(u: [f64; 2], v: [f64; 2]) -> f64 {
    u[0] * v[1] - u[1] * v[0]
}

fn dot(u: [f64; 2], v: [f64; 2]) -> f64 {
    u[0] * v[0] + u[1] * v[1]
}

impl Segment {
    pub fn new(a: [f64; 2], b: [f64; 2]) -> Self {
        Self { a, b }
    }

    /// Smallest `t` in `[0, 1]` at which `p + t r` touches this segment.
    pub fn first_hit(&self, p: [f64; 2], r: [f64; 2]) -> Option<f64> {
        let s = [self.b[0] - self.a[0], self.b[1] - self.a[1]];
        let qp = [self.a[0] - p[0], self.a[1] - p[1]];
        let denom = cross(r, s);
        if denom != 0.0 {
            let t = cross(qp, s) / denom;
            let u = cross(qp, r) / denom;
            if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
                return Some(t);
            }
            return None;
        }
        // parallel: only colinear overlap counts
        if cross(qp, r) != 0.0 {
            return None;
        }
        let rr = dot(r, r);
        if rr == 0.0 {
            return None;
        }
        let t0 = dot(qp, r) / rr;
        let t1 = t0 + dot(s, r) / rr;
        let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        if hi < 0.0 || lo > 1.0 {
            None
        } else {
            Some(lo.max(0.0))
        }
    }
}
