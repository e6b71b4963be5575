//! Auxiliary power series: `g̃(y) = Σ |a_k| y^k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stop summing once a term is this small relative to the partial sum...
const TERM_RTOL: f64 = 1e-15;
/// ...and the geometric tail estimate is this small.
const TAIL_TOL: f64 = 1e-12;
/// Consecutive growing terms after which a truncated sum is not trusted.
const RUNAWAY_RUN: usize = 50;

/// A power series with nonnegative coefficients.
///
/// `tail_truncated_at` is `None` for an exact polynomial and `Some(K)` when
/// the stored coefficients are the prefix `c_0..c_K` of an infinite series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxSeries {
    coeffs: Vec<f64>,
    tail_truncated_at: Option<usize>,
    declared_radius: f64,
}

/// A truncated sum together with an estimate of the neglected tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum {
    pub value: f64,
    pub uncertainty: f64,
}

impl AuxSeries {
    /// Auxiliary series of the prefix `raw` of an infinite series with the
    /// given radius of convergence. Signs are discarded.
    pub fn from_coeffs(raw: &[f64], radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Domain(format!(
                "radius of convergence must be positive, got {radius}"
            )));
        }
        if let Some(bad) = raw.iter().find(|c| !c.is_finite()) {
            return Err(Error::Domain(format!("non-finite coefficient {bad}")));
        }
        let coeffs: Vec<f64> = raw.iter().map(|c| c.abs()).collect();
        let tail_truncated_at = if radius.is_infinite() && coeffs.is_empty() {
            None
        } else {
            coeffs.len().checked_sub(1)
        };
        Ok(AuxSeries {
            coeffs,
            tail_truncated_at,
            declared_radius: radius,
        })
    }

    /// Exact polynomial (infinite radius, no tail).
    pub fn polynomial(raw: &[f64]) -> Self {
        AuxSeries {
            coeffs: raw.iter().map(|c| c.abs()).collect(),
            tail_truncated_at: None,
            declared_radius: f64::INFINITY,
        }
    }

    pub fn zero() -> Self {
        Self::polynomial(&[])
    }

    /// Prefix `c_0..c_{terms-1}` generated by `coeff(k)`.
    pub fn from_fn(terms: usize, radius: f64, coeff: impl Fn(usize) -> f64) -> Result<Self> {
        let raw: Vec<f64> = (0..terms).map(coeff).collect();
        Self::from_coeffs(&raw, radius)
    }

    /// `1 + y + y^2 + ...`, the auxiliary series of `1/(1-y)`.
    pub fn geometric(terms: usize) -> Self {
        Self::from_fn(terms, 1.0, |_| 1.0).expect("valid radius")
    }

    /// `Σ y^k / k!`, the auxiliary series of `e^y`.
    pub fn exponential(terms: usize) -> Self {
        let mut c = Vec::with_capacity(terms);
        let mut f = 1.0;
        for k in 0..terms {
            if k > 0 {
                f /= k as f64;
            }
            c.push(f);
        }
        Self::from_coeffs(&c, f64::INFINITY).expect("finite coefficients")
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn declared_radius(&self) -> f64 {
        self.declared_radius
    }

    pub fn tail_truncated_at(&self) -> Option<usize> {
        self.tail_truncated_at
    }

    pub fn is_exact(&self) -> bool {
        self.tail_truncated_at.is_none()
    }

    /// Highest stored degree, or `None` for the zero series.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|&c| c != 0.0)
    }

    fn check_point(&self, y: f64) -> Result<()> {
        if y.is_nan() || y < 0.0 {
            return Err(Error::Domain(format!(
                "auxiliary series are evaluated on y >= 0, got {y}"
            )));
        }
        if y >= self.declared_radius {
            return Err(Error::Divergence {
                value: y,
                radius: self.declared_radius,
            });
        }
        Ok(())
    }

    /// `Σ c_k y^k` with a tail estimate.
    pub fn sum_at(&self, y: f64) -> Result<SeriesSum> {
        self.check_point(y)?;
        self.sum_terms(y, 0)
    }

    /// `Σ k c_k y^{k-1}` with a tail estimate.
    pub fn deriv_sum_at(&self, y: f64) -> Result<SeriesSum> {
        self.check_point(y)?;
        self.sum_terms(y, 1)
    }

    pub fn eval(&self, y: f64) -> Result<f64> {
        Ok(self.sum_at(y)?.value)
    }

    pub fn deriv(&self, y: f64) -> Result<f64> {
        Ok(self.deriv_sum_at(y)?.value)
    }

    /// Sums the terms of the `order`-th derivative (order 0 or 1).
    fn sum_terms(&self, y: f64, order: usize) -> Result<SeriesSum> {
        let term = |k: usize| -> f64 {
            let c = self.coeffs[k];
            if c == 0.0 {
                return 0.0;
            }
            match order {
                0 => c * y.powi(k as i32),
                _ if k == 0 => 0.0,
                _ => k as f64 * c * y.powi(k as i32 - 1),
            }
        };

        let mut sum = 0.0;
        let mut comp = 0.0;
        let mut prev: Option<f64> = None;
        let mut last: Option<f64> = None;
        let mut growing = 0usize;
        let mut last_degree = 0usize;

        for k in 0..self.coeffs.len() {
            let t = term(k);
            if t == 0.0 {
                continue;
            }
            // Kahan summation; all terms are nonnegative.
            let yk = t - comp;
            let s = sum + yk;
            comp = (s - sum) - yk;
            sum = s;

            growing = match last {
                Some(l) if t > l => growing + 1,
                _ => 0,
            };
            prev = last;
            last = Some(t);
            last_degree = k;

            if let (false, Some(p)) = (self.is_exact(), prev) {
                let q = t / p;
                if q < 1.0 && t < TERM_RTOL * sum {
                    let tail = t * q / (1.0 - q);
                    if tail < TAIL_TOL * sum.max(1.0) {
                        return Ok(SeriesSum {
                            value: sum,
                            uncertainty: tail,
                        });
                    }
                }
            }
        }

        if growing >= RUNAWAY_RUN {
            return Err(Error::RunawayTerms {
                degree: last_degree,
                run: growing,
            });
        }

        let uncertainty = if self.is_exact() {
            0.0
        } else {
            match (prev, last) {
                (Some(p), Some(t)) if t < p => {
                    let q = t / p;
                    t * q / (1.0 - q)
                }
                // Not yet decaying: the best honest statement is "unknown".
                (Some(_), Some(_)) => f64::INFINITY,
                _ => 0.0,
            }
        };
        Ok(SeriesSum {
            value: sum,
            uncertainty,
        })
    }

    /// Series of `g(β y)`: coefficients `c_k β^k`, radius `R/β`.
    pub fn scaled(&self, beta: f64) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::Domain(format!(
                "scale must be finite and >= 0, got {beta}"
            )));
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if *c == 0.0 {
                    0.0
                } else {
                    c * beta.powi(k as i32)
                }
            })
            .collect();
        Ok(AuxSeries {
            coeffs,
            tail_truncated_at: self.tail_truncated_at,
            declared_radius: if beta == 0.0 {
                f64::INFINITY
            } else {
                self.declared_radius / beta
            },
        })
    }

    /// Cauchy product, truncated to `max_degree` when either factor is
    /// itself truncated.
    pub fn mul(&self, other: &AuxSeries, max_degree: usize) -> AuxSeries {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return AuxSeries::zero();
        }
        let full = self.coeffs.len() + other.coeffs.len() - 1;
        let exact = self.is_exact() && other.is_exact();
        let len = if exact {
            full
        } else {
            full.min(max_degree + 1)
        };
        let mut out = vec![0.0; len];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if i + j >= len {
                    break;
                }
                out[i + j] += a * b;
            }
        }
        let tail = if exact {
            None
        } else {
            // A truncated factor only determines the product up to its own
            // truncation degree.
            let cut = [self.tail_truncated_at, other.tail_truncated_at]
                .into_iter()
                .flatten()
                .min()
                .unwrap_or(len - 1)
                .min(len - 1);
            out.truncate(cut + 1);
            Some(cut)
        };
        AuxSeries {
            coeffs: out,
            tail_truncated_at: tail,
            declared_radius: self.declared_radius.min(other.declared_radius),
        }
    }

    /// Termwise sum.
    pub fn add(&self, other: &AuxSeries) -> AuxSeries {
        let len = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0.0; len];
        for (k, c) in self.coeffs.iter().enumerate() {
            out[k] += c;
        }
        for (k, c) in other.coeffs.iter().enumerate() {
            out[k] += c;
        }
        let tail = match (self.tail_truncated_at, other.tail_truncated_at) {
            (None, None) => None,
            (a, b) => {
                let cut = a
                    .into_iter()
                    .chain(b)
                    .min()
                    .expect("at least one truncated");
                out.truncate(cut + 1);
                Some(cut)
            }
        };
        AuxSeries {
            coeffs: out,
            tail_truncated_at: tail,
            declared_radius: self.declared_radius.min(other.declared_radius),
        }
    }

    /// Composition `g̃(h̃(y))` for an inner series with zero constant term,
    /// truncated at `max_degree`.
    pub fn compose(&self, inner: &AuxSeries, max_degree: usize) -> Result<AuxSeries> {
        if inner.coeffs.first().copied().unwrap_or(0.0) != 0.0 {
            return Err(Error::Unsupported(
                "series composition needs an inner series with zero constant term".into(),
            ));
        }
        let len = max_degree + 1;
        // Horner: g(h) = c_0 + h (c_1 + h (c_2 + ...)).
        let mut acc: Vec<f64> = Vec::new();
        for c in self.coeffs.iter().rev() {
            let mut next = vec![0.0; (acc.len() + inner.coeffs.len()).clamp(1, len)];
            for (i, a) in acc.iter().enumerate() {
                for (j, b) in inner.coeffs.iter().enumerate() {
                    if i + j >= next.len() {
                        break;
                    }
                    next[i + j] += a * b;
                }
            }
            next[0] += c;
            acc = next;
        }
        let full_degree = self.degree().unwrap_or(0) * inner.degree().unwrap_or(0);
        let tail = if self.is_exact() && inner.is_exact() && full_degree <= max_degree {
            while acc.len() > 1 && acc.last() == Some(&0.0) {
                acc.pop();
            }
            None
        } else {
            let cut = [
                self.tail_truncated_at,
                inner.tail_truncated_at,
                Some(max_degree),
            ]
            .into_iter()
            .flatten()
            .min()
            .expect("max_degree present");
            acc.resize(cut + 1, 0.0);
            Some(cut)
        };

        // g̃ ∘ h̃ converges while h̃(y) stays inside the radius of g̃.
        let mut radius = inner.declared_radius;
        if self.declared_radius.is_finite() {
            let reaches = |y: f64| {
                inner
                    .eval(y)
                    .map(|v| v >= self.declared_radius)
                    .unwrap_or(true)
            };
            let mut hi = if radius.is_finite() { radius } else { 1.0 };
            while !reaches(hi) && hi < 1e12 && !radius.is_finite() {
                hi *= 2.0;
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if reaches(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            radius = hi;
        }
        Ok(AuxSeries {
            coeffs: acc,
            tail_truncated_at: tail,
            declared_radius: radius,
        })
    }
}
