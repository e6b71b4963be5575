//! Sampled single-hidden-layer kernels `E_z[φ(z·x) φ(z·x')]`, `z ~ N(0, σ² I)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::check_dims;
use crate::error::{Error, Result};
use crate::par::{mix_seed, Exec};

/// Samples drawn per independently seeded chunk.
const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    /// `φ(u) = e^u`.
    Exponential,
}

impl Activation {
    #[inline]
    pub fn apply(self, u: f64) -> f64 {
        match self {
            Activation::Relu => u.max(0.0),
            Activation::Exponential => u.exp(),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Exponential => "exp",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "exp" | "exponential" => Ok(Activation::Exponential),
            other => Err(Error::invalid(format!("unknown activation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSpec {
    pub activation: Activation,
    pub width: usize,
    pub sigma_sq: f64,
    pub seed: u64,
}

impl McSpec {
    pub fn new(activation: Activation, width: usize, sigma_sq: f64, seed: u64) -> Self {
        McSpec {
            activation,
            width,
            sigma_sq,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√m`.
    pub std_err: f64,
    pub samples: usize,
}

#[derive(Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        let d = v - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (v - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if o.n == 0.0 {
            return self;
        }
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n / n,
            m2: self.m2 + o.m2 + d * d * self.n * o.n / n,
        }
    }
}

/// Estimate with the default execution policy.
pub fn mc_kernel_estimate(x: &[f64], y: &[f64], spec: &McSpec) -> Result<McEstimate> {
    mc_kernel_estimate_with(x, y, spec, Exec::default())
}

/// `(1/m) Σ φ(z_i·x) φ(z_i·x')`. Chunk `c` draws from a generator seeded by
/// `(seed, c)`, so the result does not depend on `exec`.
pub fn mc_kernel_estimate_with(
    x: &[f64],
    y: &[f64],
    spec: &McSpec,
    exec: Exec,
) -> Result<McEstimate> {
    check_dims(x, y)?;
    if spec.width == 0 {
        return Err(Error::invalid("Monte-Carlo width must be at least 1"));
    }
    if !(spec.sigma_sq > 0.0) || !spec.sigma_sq.is_finite() {
        return Err(Error::invalid(format!(
            "weight variance must be positive, got {}",
            spec.sigma_sq
        )));
    }
    let sigma = spec.sigma_sq.sqrt();
    let chunks = spec.width.div_ceil(CHUNK);
    let parts = exec.map_collect(chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, c as u64));
        let count = CHUNK.min(spec.width - c * CHUNK);
        let mut mom = Moments::default();
        for _ in 0..count {
            let (mut u, mut v) = (0.0, 0.0);
            for (a, b) in x.iter().zip(y) {
                let z: f64 = StandardNormal.sample(&mut rng);
                u += z * a;
                v += z * b;
            }
            mom.push(spec.activation.apply(sigma * u) * spec.activation.apply(sigma * v));
        }
        mom
    });
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    let var = if total.n > 1.0 {
        total.m2 / (total.n - 1.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        mean: total.mean,
        std_err: (var / total.n).sqrt(),
        samples: spec.width,
    })
}

/// Exact `E[φ(z·x) φ(z·x')]` for `z ~ N(0, σ² I)`.
///
/// For ReLU this is the order-one arc-cosine kernel
/// `σ²|x||x'| (sin θ + (π − θ) cos θ) / (2π)`; for the exponential it is
/// `exp(σ² |x + x'|² / 2)`.
pub fn expected_kernel(x: &[f64], y: &[f64], activation: Activation, sigma_sq: f64) -> Result<f64> {
    check_dims(x, y)?;
    match activation {
        Activation::Relu => {
            let nx = super::dot(x, x).sqrt();
            let ny = super::dot(y, y).sqrt();
            if nx == 0.0 || ny == 0.0 {
                return Ok(0.0);
            }
            let cos = (super::dot(x, y) / (nx * ny)).clamp(-1.0, 1.0);
            let theta = cos.acos();
            Ok(sigma_sq * nx * ny * (theta.sin() + (PI - theta) * cos) / (2.0 * PI))
        }
        Activation::Exponential => {
            let s: f64 = x.iter().zip(y).map(|(a, b)| (a + b) * (a + b)).sum();
            Ok((0.5 * sigma_sq * s).exp())
        }
    }
}
