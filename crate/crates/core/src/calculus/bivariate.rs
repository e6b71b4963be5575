use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_DEGREE: usize = 64;

/// Auxiliary series in two variables, `f̃(x, y) = Σ |c_ij| x^i y^j`, stored
/// as a dense triangular grid `i + j <= max_degree`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BivariateSeries {
    max_degree: usize,
    coeffs: Vec<f64>,
    /// Polydisc radius: both arguments must stay below it.
    radius: f64,
}

impl BivariateSeries {
    pub fn new(max_degree: usize) -> Self {
        let len = (max_degree + 1) * (max_degree + 2) / 2;
        BivariateSeries {
            max_degree,
            coeffs: vec![0.0; len],
            radius: f64::INFINITY,
        }
    }

    /// Builds from `(i, j, c)` triples with the default degree cap.
    pub fn from_terms(terms: &[(usize, usize, f64)]) -> Result<Self> {
        Self::from_terms_with_degree(terms, DEFAULT_MAX_DEGREE)
    }

    pub fn from_terms_with_degree(
        terms: &[(usize, usize, f64)],
        max_degree: usize,
    ) -> Result<Self> {
        let mut s = Self::new(max_degree);
        for &(i, j, c) in terms {
            s.add_term(i, j, c)?;
        }
        Ok(s)
    }

    pub fn with_radius(mut self, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Domain(format!(
                "radius must be positive, got {radius}"
            )));
        }
        self.radius = radius;
        Ok(self)
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn index(&self, i: usize, j: usize) -> usize {
        // Rows of constant total degree t = i + j, ordered by i.
        let t = i + j;
        t * (t + 1) / 2 + i
    }

    /// Accumulates `|c|` onto the `x^i y^j` coefficient.
    pub fn add_term(&mut self, i: usize, j: usize, c: f64) -> Result<()> {
        if i + j > self.max_degree {
            return Err(Error::invalid(format!(
                "term x^{i} y^{j} exceeds total degree cap {}",
                self.max_degree
            )));
        }
        if !c.is_finite() {
            return Err(Error::Domain(format!("non-finite coefficient {c}")));
        }
        let k = self.index(i, j);
        self.coeffs[k] += c.abs();
        Ok(())
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > self.max_degree {
            0.0
        } else {
            self.coeffs[self.index(i, j)]
        }
    }

    fn check(&self, x: f64, y: f64) -> Result<()> {
        for v in [x, y] {
            if v.is_nan() || v < 0.0 {
                return Err(Error::Domain(format!(
                    "auxiliary series are evaluated on nonnegative arguments, got {v}"
                )));
            }
            if v >= self.radius {
                return Err(Error::Divergence {
                    value: v,
                    radius: self.radius,
                });
            }
        }
        Ok(())
    }

    /// Evaluates `Σ c_ij w_i(x) v_j(y)` for caller-supplied power tables.
    fn contract(&self, xs: &[f64], ys: &[f64]) -> f64 {
        let mut sum = 0.0;
        for t in 0..=self.max_degree {
            for i in 0..=t {
                let c = self.coeffs[t * (t + 1) / 2 + i];
                if c != 0.0 {
                    sum += c * xs[i] * ys[t - i];
                }
            }
        }
        sum
    }

    fn powers(&self, v: f64) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.max_degree + 1);
        let mut acc = 1.0;
        for _ in 0..=self.max_degree {
            p.push(acc);
            acc *= v;
        }
        p
    }

    fn deriv_powers(&self, v: f64) -> Vec<f64> {
        let p = self.powers(v);
        (0..=self.max_degree)
            .map(|k| if k == 0 { 0.0 } else { k as f64 * p[k - 1] })
            .collect()
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        self.check(x, y)?;
        Ok(self.contract(&self.powers(x), &self.powers(y)))
    }

    /// `∂f̃/∂x`.
    pub fn dx(&self, x: f64, y: f64) -> Result<f64> {
        self.check(x, y)?;
        Ok(self.contract(&self.deriv_powers(x), &self.powers(y)))
    }

    /// `∂f̃/∂y`.
    pub fn dy(&self, x: f64, y: f64) -> Result<f64> {
        self.check(x, y)?;
        Ok(self.contract(&self.powers(x), &self.deriv_powers(y)))
    }
}
