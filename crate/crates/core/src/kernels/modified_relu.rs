//! The ReLU kernel on inputs lifted to `(x/√2, 1/√2)`:
//! `K(t) = (t+1)/(4π) · (π − arccos((t+1)/2))`, `t = x·x'`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// Inputs this close outside `[-1, 1]` are clamped instead of rejected.
pub const CLAMP_TOL: f64 = 1e-9;

/// Hard cap on terms of the inner sum for a single coefficient.
const MAX_INNER_TERMS: usize = 1_000_000;
const INNER_RTOL: f64 = 1e-16;

pub(crate) fn clamp_unit(t: f64) -> Result<f64> {
    if t.is_nan() || t.abs() > 1.0 + CLAMP_TOL {
        return Err(Error::Domain(format!(
            "dot product {t} outside [-1, 1]; inputs must be unit vectors"
        )));
    }
    Ok(t.clamp(-1.0, 1.0))
}

pub fn modified_relu_eval(t: f64) -> Result<f64> {
    let t = clamp_unit(t)?;
    let rho = 0.5 * (t + 1.0);
    Ok((t + 1.0) / (4.0 * PI) * (PI - rho.acos()))
}

/// `x ↦ (x/√2, 1/√2)`. With `normalize_first`, `x` is projected onto the
/// unit sphere before lifting; otherwise it must already have unit norm.
pub fn input_lift(x: &[f64], normalize_first: bool) -> Result<Vec<f64>> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = if normalize_first {
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Normalization(format!(
                "cannot project a vector of norm {norm} onto the sphere"
            )));
        }
        1.0 / norm
    } else {
        if (norm - 1.0).abs() > CLAMP_TOL {
            return Err(Error::Domain(format!(
                "lifting expects a unit vector, got norm {norm}"
            )));
        }
        1.0
    };
    let mut out: Vec<f64> = x.iter().map(|v| v * scale * FRAC_1_SQRT_2).collect();
    out.push(FRAC_1_SQRT_2);
    Ok(out)
}

/// Coefficients `A_j` of `π − arccos((1+x)/2) = π/2 + Σ_j A_j x^j` with the
/// residual left by truncating each inner sum.
///
/// `A_j = Σ_n (2n−1)!!/((2n)!! (2n+1)) · 2^{−(2n+1)} C(2n+1, j)`, the sum
/// running over `n >= 0` (the `n = 0` term is the linear term of arcsin).
#[derive(Debug, Clone, PartialEq)]
pub struct ArccosPart {
    pub coeffs: Vec<f64>,
    pub residuals: Vec<f64>,
}

pub fn arccos_part_coeffs(k_max: usize) -> ArccosPart {
    let mut lnfact = LnFactorial::new(2 * k_max + 64);
    let mut coeffs = Vec::with_capacity(k_max + 1);
    let mut residuals = Vec::with_capacity(k_max + 1);
    for j in 0..=k_max {
        let (v, r) = inner_sum(j, &mut lnfact);
        coeffs.push(v);
        residuals.push(r);
    }
    ArccosPart { coeffs, residuals }
}

/// `Σ_{n >= n0} a_n 2^{-N} C(N, j)`, `N = 2n + 1`, by a ratio recurrence in
/// `n` seeded from log-factorials.
fn inner_sum(j: usize, lnfact: &mut LnFactorial) -> (f64, f64) {
    let n0 = j.saturating_sub(1).div_ceil(2);
    let ln2 = std::f64::consts::LN_2;
    let ln_term = |n: usize, lf: &mut LnFactorial| -> f64 {
        let big_n = 2 * n + 1;
        // (2n-1)!!/(2n)!! = C(2n, n) / 4^n
        let ln_a = lf.ln_binom(2 * n, n) - 2.0 * n as f64 * ln2 - ((2 * n + 1) as f64).ln();
        ln_a + lf.ln_binom(big_n, j) - big_n as f64 * ln2
    };

    let mut term = ln_term(n0, lnfact).exp();
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut prev = f64::NAN;
    let mut n = n0;
    for _ in 0..MAX_INNER_TERMS {
        let y = term - comp;
        let s = sum + y;
        comp = (s - sum) - y;
        sum = s;

        // Past the peak at N ≈ 2j the terms decay geometrically.
        if n > j && term < INNER_RTOL * sum {
            let q = term / prev;
            let tail = if q < 1.0 { term * q / (1.0 - q) } else { term };
            return (sum, tail);
        }
        prev = term;

        let nf = n as f64;
        let big_n = (2 * n + 1) as f64;
        let jf = j as f64;
        let ratio_a = (2.0 * nf + 1.0) / (2.0 * nf + 2.0) * (2.0 * nf + 1.0) / (2.0 * nf + 3.0);
        let ratio_binom = (big_n + 2.0) * (big_n + 1.0) / ((big_n + 2.0 - jf) * (big_n + 1.0 - jf));
        term *= ratio_a * ratio_binom * 0.25;
        n += 1;
    }
    // Cap reached: report the last term times the remaining count as residual.
    (sum, term * MAX_INNER_TERMS as f64)
}

struct LnFactorial {
    table: Vec<f64>,
}

impl LnFactorial {
    fn new(n: usize) -> Self {
        let mut s = LnFactorial { table: vec![0.0] };
        s.grow(n);
        s
    }

    fn grow(&mut self, n: usize) {
        while self.table.len() <= n {
            let i = self.table.len();
            let last = *self.table.last().expect("seeded");
            self.table.push(last + (i as f64).ln());
        }
    }

    fn ln_binom(&mut self, n: usize, k: usize) -> f64 {
        self.grow(n);
        self.table[n] - self.table[k] - self.table[n - k]
    }
}

/// Full kernel coefficients `b_k` and their residuals, from multiplying
/// `π/2 + Σ A_j t^j` by `(1 + t)/(4π)`.
pub(crate) fn kernel_coeffs(k_max: usize) -> (Vec<f64>, Vec<f64>) {
    let part = arccos_part_coeffs(k_max);
    let mut p = part.coeffs.clone();
    p[0] += FRAC_PI_2;
    let scale = 1.0 / (4.0 * PI);
    let mut b = Vec::with_capacity(k_max + 1);
    let mut u = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let (prev_p, prev_r) = if k == 0 {
            (0.0, 0.0)
        } else {
            (p[k - 1], part.residuals[k - 1])
        };
        b.push(scale * (p[k] + prev_p));
        u.push(scale * (part.residuals[k] + prev_r));
    }
    (b, u)
}
