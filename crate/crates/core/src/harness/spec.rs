//! JSON descriptions of bound computations.
//!
//! ```json
//! {"rule": "chain", "outer": {"coeffs": [1, 1, 1], "radius": 1.0},
//!  "inner": {"coeffs": [0, 1], "beta": 0.5}}
//! ```

use serde::{Deserialize, Serialize};

use crate::calculus::{
    bivariate_chain_bound, chain_bound, gravity_bound_log, kernel_weighted_bound, monomial_bound,
    multivariate_bound, product_family_bound, univariate_bound, AuxSeries, BivariateSeries,
    BoundDocument, BoundReport, MonomialTerm, Schedule, DEFAULT_DELTA,
};
use crate::error::{Error, Result};

fn infinite() -> f64 {
    f64::INFINITY
}

fn one() -> f64 {
    1.0
}

/// Auxiliary series of `g(β y)`: coefficients, radius of `g`, and the norm
/// `β`. With a finite radius the coefficients are read as the prefix of an
/// infinite series; otherwise as an exact polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSpec {
    pub coeffs: Vec<f64>,
    #[serde(default = "infinite")]
    pub radius: f64,
    #[serde(default = "one")]
    pub beta: f64,
}

/// Terms kept when a coefficient list is continued with `...`.
const CONTINUED_TERMS: usize = 2000;

impl SeriesSpec {
    /// Parses `c0,c1,...,cn` and, with a trailing `...`, continues the
    /// sequence geometrically with ratio `cn / c(n-1)`; the radius is then
    /// the reciprocal of that ratio.
    pub fn parse_list(text: &str, beta: f64) -> Result<Self> {
        let mut parts: Vec<&str> = text.split(',').map(str::trim).collect();
        let continued = parts.last() == Some(&"...");
        if continued {
            parts.pop();
        }
        let mut coeffs = parts
            .iter()
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| Error::invalid(format!("not a coefficient: '{p}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if coeffs.is_empty() {
            return Err(Error::invalid("empty coefficient list"));
        }
        let mut radius = f64::INFINITY;
        if continued {
            let n = coeffs.len();
            if n < 2 || coeffs[n - 2] == 0.0 {
                return Err(Error::invalid(
                    "'...' needs two trailing coefficients with a nonzero first",
                ));
            }
            let ratio = coeffs[n - 1] / coeffs[n - 2];
            radius = 1.0 / ratio.abs();
            while coeffs.len() < CONTINUED_TERMS {
                let next = coeffs[coeffs.len() - 1] * ratio;
                coeffs.push(next);
            }
        }
        Ok(SeriesSpec {
            coeffs,
            radius,
            beta,
        })
    }

    pub fn to_series(&self) -> Result<AuxSeries> {
        let g = if self.radius.is_finite() {
            AuxSeries::from_coeffs(&self.coeffs, self.radius)?
        } else {
            AuxSeries::polynomial(&self.coeffs)
        };
        g.scaled(self.beta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum BoundSpec {
    Univariate {
        coeffs: Vec<f64>,
        beta: f64,
        #[serde(default = "infinite")]
        radius: f64,
    },
    Monomial {
        betas: Vec<f64>,
    },
    KernelWeighted {
        coeffs: Vec<f64>,
        beta: f64,
        schedule: Schedule,
    },
    Multivariate {
        terms: Vec<MonomialTerm>,
    },
    /// `Π_i g_i(β_i · x)`.
    Product {
        factors: Vec<SeriesSpec>,
    },
    Chain {
        outer: SeriesSpec,
        inner: SeriesSpec,
    },
    /// `f(g(x), h(x))` with `f` given as `[i, j, c]` triples.
    Bivariate {
        f: Vec<(usize, usize, f64)>,
        g: SeriesSpec,
        h: SeriesSpec,
    },
    Gravity {
        ratio: f64,
        k: u32,
        eps: f64,
        #[serde(default)]
        kernel: Option<Schedule>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRequest {
    #[serde(flatten)]
    pub spec: BoundSpec,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
}

impl BoundSpec {
    pub fn evaluate(&self) -> Result<BoundReport> {
        match self {
            BoundSpec::Univariate {
                coeffs,
                beta,
                radius,
            } => {
                let g = SeriesSpec {
                    coeffs: coeffs.clone(),
                    radius: *radius,
                    beta: 1.0,
                }
                .to_series()?;
                univariate_bound(&g, *beta)
            }
            BoundSpec::Monomial { betas } => monomial_bound(betas),
            BoundSpec::KernelWeighted {
                coeffs,
                beta,
                schedule,
            } => kernel_weighted_bound(coeffs, *beta, schedule),
            BoundSpec::Multivariate { terms } => multivariate_bound(terms),
            BoundSpec::Product { factors } => {
                let series = factors
                    .iter()
                    .map(|f| {
                        let unscaled = SeriesSpec {
                            beta: 1.0,
                            ..f.clone()
                        }
                        .to_series()?;
                        Ok((unscaled, f.beta))
                    })
                    .collect::<Result<Vec<_>>>()?;
                product_family_bound(&series)
            }
            BoundSpec::Chain { outer, inner } => {
                if outer.beta != 1.0 {
                    return Err(Error::invalid("the outer series of a chain takes no beta"));
                }
                chain_bound(&outer.to_series()?, &inner.to_series()?)
            }
            BoundSpec::Bivariate { f, g, h } => {
                let f = BivariateSeries::from_terms(f)?;
                bivariate_chain_bound(&f, &g.to_series()?, &h.to_series()?)
            }
            BoundSpec::Gravity {
                ratio,
                k,
                eps,
                kernel,
            } => gravity_bound_log(*ratio, *k, *eps, kernel.as_ref()),
        }
    }
}

impl BoundRequest {
    pub fn evaluate(&self) -> Result<BoundDocument> {
        let report = self
            .spec
            .evaluate()?
            .with_delta(self.delta.unwrap_or(DEFAULT_DELTA))?;
        Ok(report.to_document(self.epsilon))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
