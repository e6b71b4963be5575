//! The bound calculus: `√M` for analytic targets and for sums, products,
//! and compositions of learnable functions.

use serde::{Deserialize, Serialize};

use super::bivariate::BivariateSeries;
use super::report::{log_add_exp, BoundReport, Rule};
use super::series::AuxSeries;
use crate::error::{Error, Result};

/// Target `g(β·x)` with `β = |β|`: `√M = β g̃'(β) + g̃(0)`.
pub fn univariate_bound(g: &AuxSeries, beta: f64) -> Result<BoundReport> {
    check_norm(beta)?;
    let d = g.deriv_sum_at(beta)?;
    let z = g.sum_at(0.0)?;
    Ok(
        BoundReport::linear(Rule::Univariate, beta * d.value + z.value)
            .with_uncertainty(beta * d.uncertainty + z.uncertainty),
    )
}

/// `Π_i (β_i · x)`: `√M = p Π β_i`.
///
/// The empty product is the constant 1, whose bound is `|a_0| = 1`.
pub fn monomial_bound(betas: &[f64]) -> Result<BoundReport> {
    for &b in betas {
        check_norm(b)?;
    }
    if betas.is_empty() {
        return univariate_bound(&AuxSeries::polynomial(&[1.0]), 0.0);
    }
    let p = betas.len() as f64;
    Ok(BoundReport::linear(
        Rule::Monomial,
        p * betas.iter().product::<f64>(),
    ))
}

/// Power-series coefficients `b_k` of a dot-product kernel, as used by
/// [`kernel_weighted_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Schedule {
    /// `b_k = e^{-r²} / k!` (Gaussian kernel on the sphere of radius `r`).
    Gaussian { radius: f64 },
    /// `b_k = k^{-s}` for `k >= 1`. The `k = 0` weight `b_0^{-1/2}` is taken
    /// as zero, so `s = 2` reproduces `Σ k |a_k| β^k`.
    PowerLaw { exponent: f64 },
    /// Un-lifted ReLU: `k^{-2}` at `k = 1` and even `k`, zero at odd `k > 1`.
    PlainRelu,
    /// An explicit coefficient prefix, e.g. from `kernels::series_coeffs`.
    Explicit { coeffs: Vec<f64> },
}

enum Weight {
    /// `ln b_k^{-1/2}`.
    Log(f64),
    /// `b_k^{-1/2} = 0`.
    Vanishing,
    /// `b_k = 0`.
    Absent,
}

impl Schedule {
    pub fn coeff(&self, k: usize) -> Option<f64> {
        match self {
            Schedule::Gaussian { radius } => Some((-radius * radius - ln_factorial(k)).exp()),
            Schedule::PowerLaw { exponent } => Some(if k == 0 {
                f64::INFINITY
            } else {
                (k as f64).powf(-exponent)
            }),
            Schedule::PlainRelu => Some(if k == 0 {
                f64::INFINITY
            } else if k == 1 || k % 2 == 0 {
                (k as f64).powi(-2)
            } else {
                0.0
            }),
            Schedule::Explicit { coeffs } => coeffs.get(k).copied(),
        }
    }

    /// `ln b_k`, computed without forming `b_k` where it would underflow.
    pub fn ln_coeff(&self, k: usize) -> Option<f64> {
        match self {
            Schedule::Gaussian { radius } => Some(-radius * radius - ln_factorial(k)),
            Schedule::PowerLaw { exponent } => Some(if k == 0 {
                f64::INFINITY
            } else {
                -exponent * (k as f64).ln()
            }),
            _ => self.coeff(k).map(f64::ln),
        }
    }

    fn weight(&self, k: usize) -> Result<Weight> {
        let ln_b = self.ln_coeff(k).ok_or_else(|| {
            Error::invalid(format!(
                "kernel coefficient schedule has no entry for degree {k}"
            ))
        })?;
        Ok(if ln_b == f64::INFINITY {
            Weight::Vanishing
        } else if ln_b == f64::NEG_INFINITY || ln_b.is_nan() {
            Weight::Absent
        } else {
            Weight::Log(-0.5 * ln_b)
        })
    }
}

fn ln_factorial(k: usize) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

/// `√M = Σ_k b_k^{-1/2} |a_k| β^k`, accumulated in log domain.
pub fn kernel_weighted_bound(
    g_coeffs: &[f64],
    beta: f64,
    schedule: &Schedule,
) -> Result<BoundReport> {
    check_norm(beta)?;
    let mut log_total = f64::NEG_INFINITY;
    for (k, a) in g_coeffs.iter().enumerate() {
        if !a.is_finite() {
            return Err(Error::Domain(format!("non-finite coefficient {a}")));
        }
        if *a == 0.0 {
            continue;
        }
        let ln_w = match schedule.weight(k)? {
            Weight::Vanishing => continue,
            Weight::Absent => return Err(Error::UnlearnableTerm { degree: k }),
            Weight::Log(l) => l,
        };
        let ln_beta_k = if k == 0 { 0.0 } else { k as f64 * beta.ln() };
        log_total = log_add_exp(log_total, ln_w + a.abs().ln() + ln_beta_k);
    }
    let linear = log_total.exp();
    Ok(if linear.is_finite() {
        BoundReport::linear(Rule::KernelWeighted, linear)
    } else {
        BoundReport::from_log(Rule::KernelWeighted, log_total)
    })
}

/// One term `a_v Π_i (β_{v,i} · x)` of a multivariate power series, given by
/// its coefficient and the norms `|β_{v,i}|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonomialTerm {
    pub coeff: f64,
    pub betas: Vec<f64>,
}

impl MonomialTerm {
    pub fn new(coeff: f64, betas: Vec<f64>) -> Self {
        MonomialTerm { coeff, betas }
    }
}

/// Collapses a multivariate series to `g̃(y) = Σ_k ã_k y^k` with
/// `ã_k = Σ_{v ∈ V_k} |a_v| Π β_{v,i}`.
pub fn induced_series(terms: &[MonomialTerm]) -> Result<AuxSeries> {
    let degree = terms.iter().map(|t| t.betas.len()).max().unwrap_or(0);
    let mut coeffs = vec![0.0; if terms.is_empty() { 0 } else { degree + 1 }];
    for t in terms {
        for &b in &t.betas {
            check_norm(b)?;
        }
        if !t.coeff.is_finite() {
            return Err(Error::Domain(format!("non-finite coefficient {}", t.coeff)));
        }
        coeffs[t.betas.len()] += t.coeff.abs() * t.betas.iter().product::<f64>();
    }
    Ok(AuxSeries::polynomial(&coeffs))
}

/// `√M = g̃'(1) + g̃(0)` for the auxiliary series induced by `terms`.
pub fn multivariate_bound(terms: &[MonomialTerm]) -> Result<BoundReport> {
    let g = induced_series(terms)?;
    let mut r = series_bound(&g)?;
    r.rule = Rule::Multivariate;
    Ok(r)
}

/// `√M = g̃'(1) + g̃(0)` for an auxiliary series that already carries the
/// input norms.
pub fn series_bound(g: &AuxSeries) -> Result<BoundReport> {
    let d = g.deriv_sum_at(1.0)?;
    let z = g.sum_at(0.0)?;
    Ok(BoundReport::linear(Rule::Multivariate, d.value + z.value)
        .with_uncertainty(d.uncertainty + z.uncertainty))
}

/// Values a product or chain rule needs from one factor.
#[derive(Debug, Clone, Copy)]
struct Jet {
    at_one: f64,
    deriv_at_one: f64,
    at_zero: f64,
    uncertainty: f64,
}

fn jet(g: &AuxSeries) -> Result<Jet> {
    let v = g.sum_at(1.0)?;
    let d = g.deriv_sum_at(1.0)?;
    let z = g.sum_at(0.0)?;
    Ok(Jet {
        at_one: v.value,
        deriv_at_one: d.value,
        at_zero: z.value,
        uncertainty: v.uncertainty + d.uncertainty + z.uncertainty,
    })
}

/// Product rule: `√M_gh = g̃'(1) h̃(1) + g̃(1) h̃'(1) + g̃(0) h̃(0)`.
pub fn product_bound(g: &AuxSeries, h: &AuxSeries) -> Result<BoundReport> {
    let a = jet(g)?;
    let b = jet(h)?;
    let value = a.deriv_at_one * b.at_one + a.at_one * b.deriv_at_one + a.at_zero * b.at_zero;
    // First-order propagation of the truncation uncertainties.
    let unc = a.uncertainty * (b.at_one + b.deriv_at_one + b.at_zero)
        + b.uncertainty * (a.at_one + a.deriv_at_one + a.at_zero);
    Ok(BoundReport::linear(Rule::Product, value).with_uncertainty(unc))
}

/// `G(x) = Π_i g_i(β_i · x)`: `√M = d/dy Π g̃_i(β_i y)|_{y=1} + Π g̃_i(0)`,
/// obtained by folding the product rule over the factors.
pub fn product_family_bound(factors: &[(AuxSeries, f64)]) -> Result<BoundReport> {
    // (value at 1, derivative at 1, value at 0) of the running product.
    let mut acc = (1.0, 0.0, 1.0);
    for (g, beta) in factors {
        check_norm(*beta)?;
        let scaled = g.scaled(*beta)?;
        let j = jet(&scaled)?;
        acc = (
            acc.0 * j.at_one,
            acc.1 * j.at_one + acc.0 * j.deriv_at_one,
            acc.2 * j.at_zero,
        );
    }
    Ok(BoundReport::linear(Rule::Product, acc.1 + acc.2))
}

/// Chain rule: `√M_{g∘h} = g̃'(h̃(1)) h̃'(1) + g̃(h̃(0))`.
pub fn chain_bound(outer: &AuxSeries, inner: &AuxSeries) -> Result<BoundReport> {
    let h = jet(inner)?;
    let radius = outer.declared_radius();
    for v in [h.at_zero, h.at_one] {
        if v >= radius {
            return Err(Error::Divergence { value: v, radius });
        }
    }
    let gd = outer.deriv_sum_at(h.at_one)?;
    let g0 = outer.sum_at(h.at_zero)?;
    let value = gd.value * h.deriv_at_one + g0.value;
    let unc = gd.uncertainty * h.deriv_at_one + g0.uncertainty + h.uncertainty * gd.value;
    Ok(BoundReport::linear(Rule::Chain, value).with_uncertainty(unc))
}

/// Two-argument chain rule: the total derivative of `f̃(g̃(y), h̃(y))` at
/// `y = 1`, plus the degree-0 term `f̃(g̃(0), h̃(0))`.
pub fn bivariate_chain_bound(
    f: &BivariateSeries,
    g: &AuxSeries,
    h: &AuxSeries,
) -> Result<BoundReport> {
    let a = jet(g)?;
    let b = jet(h)?;
    let fx = f.dx(a.at_one, b.at_one)?;
    let fy = f.dy(a.at_one, b.at_one)?;
    let f0 = f.eval(a.at_zero, b.at_zero)?;
    let value = fx * a.deriv_at_one + fy * b.deriv_at_one + f0;
    Ok(BoundReport::linear(Rule::Bivariate, value)
        .with_uncertainty(a.uncertainty * fx + b.uncertainty * fy))
}

fn check_norm(beta: f64) -> Result<()> {
    if beta.is_finite() && beta >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "norms must be finite and nonnegative, got {beta}"
        )))
    }
}

impl BoundReport {
    /// Linear value; panics on a log-domain report. Test convenience.
    #[cfg(test)]
    pub(crate) fn value(&self) -> f64 {
        self.sqrt_m().expect("log-domain report")
    }
}
