//! Fully connected tanh networks used as option policies, plus the running
//! observation normalizer.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Widest layer supported by the stack-allocated forward pass.
pub const MAX_WIDTH: usize = 64;
pub const HIDDEN: [usize; 2] = [30, 30];

/// Parameters are stored flat: for each layer, the `out x in` weight matrix
/// row-major followed by the `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpPolicy {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
    pub max_speed: f64,
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl MlpPolicy {
    /// `input -> 30 -> 30 -> 2` network with hidden weights drawn from
    /// `N(0, 1/fan_in)` and a zero output layer.
    pub fn new<R: Rng + ?Sized>(input_dim: usize, max_speed: f64, rng: &mut R) -> Self {
        let sizes = vec![input_dim, HIDDEN[0], HIDDEN[1], 2];
        Self::with_sizes(sizes, max_speed, rng)
    }

    pub fn with_sizes<R: Rng + ?Sized>(sizes: Vec<usize>, max_speed: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&n| n > 0 && n <= MAX_WIDTH));
        let mut params = Vec::with_capacity(param_count(&sizes));
        let n_layers = sizes.len() - 1;
        for (l, w) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            if l + 1 == n_layers {
                params.extend(std::iter::repeat_n(0.0, fan_out * fan_in + fan_out));
            } else {
                let normal = Normal::new(0.0, (1.0 / fan_in as f64).sqrt()).expect("finite std");
                params.extend((0..fan_out * fan_in).map(|_| normal.sample(rng)));
                params.extend(std::iter::repeat_n(0.0, fan_out));
            }
        }
        Self {
            sizes,
            params,
            max_speed,
        }
    }

    pub fn zeros(sizes: Vec<usize>, max_speed: f64) -> Self {
        let n = param_count(&sizes);
        Self {
            sizes,
            params: vec![0.0; n],
            max_speed,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    /// Raw network output for an already-normalized input.
    pub fn forward_with(&self, params: &[f64], x: &[f64], out: &mut [f64]) {
        let mut a = [0.0; MAX_WIDTH];
        let mut b = [0.0; MAX_WIDTH];
        a[..x.len()].copy_from_slice(x);
        let n_layers = self.sizes.len() - 1;
        let mut off = 0;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &params[off..off + n_out * n_in];
            let bias = &params[off + n_out * n_in..off + n_out * n_in + n_out];
            off += n_out * n_in + n_out;
            for j in 0..n_out {
                let row = &weights[j * n_in..(j + 1) * n_in];
                let z = row.iter().zip(&a[..n_in]).map(|(w, v)| w * v).sum::<f64>() + bias[j];
                b[j] = if l + 1 == n_layers { z } else { z.tanh() };
            }
            std::mem::swap(&mut a, &mut b);
        }
        out.copy_from_slice(&a[..out.len()]);
    }

    /// Maps raw outputs to `v = max_speed (tanh z1 + 1) / 2`, `theta = pi tanh z2`.
    pub fn squash(&self, z: [f64; 2]) -> [f64; 2] {
        [
            self.max_speed * 0.5 * (z[0].tanh() + 1.0),
            PI * z[1].tanh(),
        ]
    }

    /// Action for state `s` under explicit parameters and normalizer.
    pub fn act_with(&self, params: &[f64], s: &[f64], norm: Option<&Normalizer>) -> [f64; 2] {
        let mut x = [0.0; MAX_WIDTH];
        let x = &mut x[..s.len()];
        match norm {
            Some(n) => n.normalize(s, x),
            None => x.copy_from_slice(s),
        }
        let mut z = [0.0; 2];
        self.forward_with(params, x, &mut z);
        self.squash(z)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 4 * self.sizes.len() + 8 * self.params.len());
        out.extend_from_slice(&(self.sizes.len() as u32).to_le_bytes());
        for &s in &self.sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        for &p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], max_speed: f64) -> Result<Self> {
        let bad = |d: &str| Error::parse("policy binary", d);
        let word = |i: usize| -> Result<u32> {
            bytes
                .get(4 * i..4 * i + 4)
                .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
                .ok_or_else(|| bad("truncated header"))
        };
        let n = word(0)? as usize;
        if !(2..=16).contains(&n) {
            return Err(bad("implausible layer count"));
        }
        let sizes = (1..=n)
            .map(|i| word(i).map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        if sizes.iter().any(|&s| s == 0 || s > MAX_WIDTH) {
            return Err(bad("layer width out of range"));
        }
        let body = &bytes[4 * (n + 1)..];
        let count = param_count(&sizes);
        if body.len() != 8 * count {
            return Err(bad(&format!("expected {count} parameters, found {} bytes", body.len())));
        }
        let params: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if params.iter().any(|p| !p.is_finite()) {
            return Err(bad("non-finite parameter"));
        }
        Ok(Self {
            sizes,
            params,
            max_speed,
        })
    }
}

/// Running per-dimension mean and variance (Welford / Chan merge).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub count: f64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

const MIN_VARIANCE: f64 = 1e-8;

impl Normalizer {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.count += 1.0;
        for ((m, s), v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / self.count;
            *s += d * (v - *m);
        }
    }

    pub fn merge(&mut self, other: &Normalizer) {
        if other.count == 0.0 {
            return;
        }
        let n = self.count + other.count;
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.m2[i] += other.m2[i] + d * d * self.count * other.count / n;
            self.mean[i] += d * other.count / n;
        }
        self.count = n;
    }

    pub fn variance(&self) -> Vec<f64> {
        self.m2
            .iter()
            .map(|s| if self.count > 1.0 { s / self.count } else { 0.0 })
            .collect()
    }

    /// `(x - mean) / std`, with unit scale on dimensions of negligible variance.
    pub fn normalize(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            let var = if self.count > 1.0 { self.m2[i] / self.count } else { 0.0 };
            let sd = if var < MIN_VARIANCE { 1.0 } else { var.sqrt() };
            out[i] = (x[i] - self.mean[i]) / sd;
        }
    }
}

/// An option policy together with its observation normalizer.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionPolicy {
    pub net: MlpPolicy,
    pub norm: Normalizer,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    max_speed: f64,
    normalizer: Normalizer,
}

impl OptionPolicy {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, max_speed: f64, rng: &mut R) -> Self {
        Self {
            net: MlpPolicy::new(input_dim, max_speed, rng),
            norm: Normalizer::new(input_dim),
        }
    }

    pub fn act(&self, s: &[f64]) -> [f64; 2] {
        act(&self.net, s, Some(&self.norm))
    }

    /// Writes `<stem>.bin` (parameters) and `<stem>.toml` (normalizer).
    pub fn save(&self, stem: &Path) -> Result<()> {
        let bin = stem.with_extension("bin");
        std::fs::write(&bin, self.net.to_bytes()).map_err(|e| Error::io(&bin, e))?;
        let side = Sidecar {
            max_speed: self.net.max_speed,
            normalizer: self.norm.clone(),
        };
        let text = toml::to_string(&side).map_err(|e| Error::parse("policy sidecar", e))?;
        let path = stem.with_extension("toml");
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let path = stem.with_extension("toml");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let side: Sidecar = toml::from_str(&text).map_err(|e| Error::parse("policy sidecar", e))?;
        let bin = stem.with_extension("bin");
        let bytes = std::fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
        let net = MlpPolicy::from_bytes(&bytes, side.max_speed)?;
        if side.normalizer.mean.len() != net.input_dim() || side.normalizer.m2.len() != net.input_dim() {
            return Err(Error::Mismatch(format!(
                "normalizer dimension does not match policy input {}",
                net.input_dim()
            )));
        }
        Ok(Self {
            net,
            norm: side.normalizer,
        })
    }
}

/// Deterministic action of `policy` at `s`.
pub fn act(policy: &MlpPolicy, s: &[f64], norm: Option<&Normalizer>) -> [f64; 2] {
    policy.act_with(&policy.params, s, norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn zero_policy_outputs_midpoint() {
        let p = MlpPolicy::zeros(vec![2, 30, 30, 2], 1.0);
        assert_eq!(act(&p, &[3.0, -7.0], None), [0.5, 0.0]);
        let mut rng = stream_rng(1, &[]);
        let q = MlpPolicy::new(2, 1.0, &mut rng);
        assert_eq!(act(&q, &[3.0, -7.0], None), [0.5, 0.0]);
        assert_eq!(q.params.len(), 2 * 30 + 30 + 30 * 30 + 30 + 30 * 2 + 2);
    }

    #[test]
    fn forward_matches_hand_computation() {
        // 1 -> 1 -> 2 network
        let p = MlpPolicy {
            sizes: vec![1, 1, 2],
            params: vec![2.0, 0.5, 1.0, -1.0, 0.25, 0.0],
            max_speed: 2.0,
        };
        let h = (2.0f64 * 0.3 + 0.5).tanh();
        let mut z = [0.0; 2];
        p.forward_with(&p.params, &[0.3], &mut z);
        assert!((z[0] - (h + 0.25)).abs() < 1e-15);
        assert!((z[1] + h).abs() < 1e-15);
    }

    #[test]
    fn normalizer_merge_matches_single_pass() {
        let xs: Vec<[f64; 2]> = (0..50).map(|i| [i as f64 * 0.3, (i * i) as f64 % 7.0]).collect();
        let mut all = Normalizer::new(2);
        let (mut a, mut b) = (Normalizer::new(2), Normalizer::new(2));
        for (i, x) in xs.iter().enumerate() {
            all.push(x);
            if i < 20 { a.push(x) } else { b.push(x) }
        }
        a.merge(&b);
        for i in 0..2 {
            assert!((a.mean[i] - all.mean[i]).abs() < 1e-12);
            assert!((a.m2[i] - all.m2[i]).abs() < 1e-9);
        }
        let mean0 = xs.iter().map(|x| x[0]).sum::<f64>() / 50.0;
        assert!((all.mean[0] - mean0).abs() < 1e-12);
    }

    #[test]
    fn binary_round_trip_and_rejection() {
        let mut rng = stream_rng(3, &[]);
        let p = MlpPolicy::new(2, 1.0, &mut rng);
        let bytes = p.to_bytes();
        assert_eq!(MlpPolicy::from_bytes(&bytes, 1.0).unwrap(), p);
        assert!(MlpPolicy::from_bytes(&bytes[..bytes.len() - 3], 1.0).is_err());
        assert!(MlpPolicy::from_bytes(&[1, 0, 0], 1.0).is_err());
    }

    #[test]
    fn option_policy_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = stream_rng(4, &[]);
        let mut op = OptionPolicy::new(2, 1.0, &mut rng);
        op.norm.push(&[1.0, 2.0]);
        op.norm.push(&[3.0, 5.0]);
        let stem = dir.path().join("opt_0");
        op.save(&stem).unwrap();
        assert_eq!(OptionPolicy::load(&stem).unwrap(), op);
    }
}
