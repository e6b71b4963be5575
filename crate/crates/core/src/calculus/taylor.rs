//! Polynomial approximation of the inverse-cube force law and the resulting
//! learnability bound for the k-body force.

use super::bounds::product_bound;
use super::report::{BoundReport, Rule};
use super::series::AuxSeries;
use crate::error::{Error, Result};

/// Coefficients `(2n+1)!!/(2n)!!` of `(1-u)^{-3/2} = Σ c_n u^n`, `n = 0..=d`.
pub fn inverse_three_halves_coeffs(d: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(d + 1);
    let mut v = 1.0;
    for n in 0..=d {
        if n > 0 {
            v *= (2 * n + 1) as f64 / (2 * n) as f64;
        }
        c.push(v);
    }
    c
}

/// `f_d(r²) ≈ r^{-3}` on `[r_min, r_max]`, expanded as
/// `r^{-3} = a^{-3} (1 - u)^{-3/2}` with `u = 1 - r²/a²` and
/// `a² = (r_min² + r_max²)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorApprox {
    pub degree: usize,
    pub a_sq: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// `c_n`, the coefficients in `u`.
    pub coeffs: Vec<f64>,
    /// Lagrange remainder bound on `|f_d(r²) - r^{-3}|` over the interval.
    pub error_bound: f64,
}

/// Builds the degree-`d` approximation of `r^{-3}` over `[r_min, r_max]`.
pub fn inverse_cube_taylor(r_min: f64, r_max: f64, d: usize) -> Result<TaylorApprox> {
    if !(r_min > 0.0) || !r_min.is_finite() {
        return Err(Error::Domain(format!(
            "r_min must be positive, got {r_min}"
        )));
    }
    if !(r_max >= r_min) || !r_max.is_finite() {
        return Err(Error::Domain(format!(
            "need r_min <= r_max, got [{r_min}, {r_max}]"
        )));
    }
    let a_sq = 0.5 * (r_min * r_min + r_max * r_max);
    let coeffs = inverse_three_halves_coeffs(d + 1);
    // |u| <= q on the interval: u = +q at r_min, u = -q at r_max. The
    // Lagrange remainder is largest on the u > 0 side:
    //   |R_d(u)| <= c_{d+1} |u|^{d+1} / (1 - |u|)^{d + 5/2}.
    let q = (r_max * r_max - r_min * r_min) / (r_max * r_max + r_min * r_min);
    let error_bound = if q == 0.0 {
        0.0
    } else {
        let ln = coeffs[d + 1].ln() + (d + 1) as f64 * q.ln()
            - (d as f64 + 2.5) * (1.0 - q).ln()
            - 1.5 * a_sq.ln();
        ln.exp()
    };
    Ok(TaylorApprox {
        degree: d,
        a_sq,
        r_min,
        r_max,
        coeffs: coeffs[..=d].to_vec(),
        error_bound,
    })
}

impl TaylorApprox {
    /// `f_d` evaluated at `r_sq = r²`.
    pub fn eval_r_sq(&self, r_sq: f64) -> f64 {
        let u = 1.0 - r_sq / self.a_sq;
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * u + c;
        }
        acc * self.a_sq.powf(-1.5)
    }

    /// Coefficients of `f_d` as an ordinary polynomial in `r²`.
    ///
    /// Expanding `(1 - r²/a²)^n` cancels heavily for large degree; fine for
    /// inspection, not for evaluation.
    pub fn r_sq_polynomial(&self) -> Vec<f64> {
        let d = self.degree;
        let mut out = vec![0.0; d + 1];
        let scale = self.a_sq.powf(-1.5);
        for (n, c) in self.coeffs.iter().enumerate() {
            // (1 - s/a²)^n = Σ_j C(n,j) (-1/a²)^j s^j
            let mut binom = 1.0;
            for j in 0..=n {
                if j > 0 {
                    binom *= (n + 1 - j) as f64 / j as f64;
                }
                out[j] += scale * c * binom * (-1.0 / self.a_sq).powi(j as i32);
            }
        }
        out
    }

    /// Largest `|f_d(r²) - r^{-3}|` over `points` evenly spaced `r`.
    pub fn grid_sup_error(&self, points: usize) -> f64 {
        let n = points.max(2);
        (0..n)
            .map(|i| {
                let r = self.r_min + (self.r_max - self.r_min) * i as f64 / (n - 1) as f64;
                (self.eval_r_sq(r * r) - r.powi(-3)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Taylor degree `⌈R² ln(k²/ε)⌉`, clamped to at least 1.
pub fn gravity_degree(ratio: f64, k: u32, eps: f64) -> Result<usize> {
    check_gravity_args(ratio, k, eps, false)?;
    let d = real_gravity_degree(ratio, k, eps);
    if d <= 0.0 {
        log::warn!(
            "eps = {eps} >= k^2 = {}: clamping Taylor degree to 1",
            k * k
        );
        return Ok(1);
    }
    Ok((d.ceil() as usize).max(1))
}

/// `R² ln(k²/ε)` without rounding.
pub fn real_gravity_degree(ratio: f64, k: u32, eps: f64) -> f64 {
    let k = k as f64;
    ratio * ratio * (k * k / eps).ln()
}

fn check_gravity_args(ratio: f64, k: u32, eps: f64, strict_eps: bool) -> Result<()> {
    if !(ratio >= 1.0) || !ratio.is_finite() {
        return Err(Error::Domain(format!("R must be >= 1, got {ratio}")));
    }
    if k < 2 {
        return Err(Error::Domain(format!("k must be >= 2, got {k}")));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    if strict_eps && eps >= (k * k) as f64 {
        return Err(Error::Domain(format!(
            "eps must be below k^2 = {}, got {eps}",
            k * k
        )));
    }
    Ok(())
}

/// `ln √M` for learning one force component:
/// `−½ ln k + (3/2) ln d + d ln(24k)` with the real-valued
/// `d = R² ln(k²/ε)`.
///
/// With a kernel coefficient schedule the bound gains the factor
/// `(d² b_{⌈d⌉})^{-1/2}`; the modified-ReLU kernel already satisfies
/// `b_k >= k^{-2}` and needs no penalty.
pub fn gravity_bound_log(
    ratio: f64,
    k: u32,
    eps: f64,
    kernel_penalty: Option<&super::bounds::Schedule>,
) -> Result<BoundReport> {
    check_gravity_args(ratio, k, eps, true)?;
    let d = real_gravity_degree(ratio, k, eps);
    let kf = k as f64;
    let mut log = -0.5 * kf.ln() + 1.5 * d.ln() + d * (24.0 * kf).ln();
    if let Some(schedule) = kernel_penalty {
        log += gravity_penalty_log(d, schedule)?;
    }
    Ok(BoundReport::from_log(Rule::Gravity, log))
}

/// `−½ (2 ln d + ln b_{⌈d⌉})`.
pub fn gravity_penalty_log(d: f64, schedule: &super::bounds::Schedule) -> Result<f64> {
    let idx = d.ceil().max(0.0) as usize;
    let ln_b = schedule.ln_coeff(idx).ok_or_else(|| {
        Error::invalid(format!(
            "kernel coefficient schedule has no entry for degree {idx}"
        ))
    })?;
    if ln_b == f64::NEG_INFINITY {
        return Err(Error::UnlearnableTerm { degree: idx });
    }
    Ok(-0.5 * (2.0 * d.ln() + ln_b))
}

/// First-principles recomputation of the gravity bound through the product
/// and chain rules, for comparison with the closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct GravityCrossCheck {
    pub degree: usize,
    pub log_first_principles: f64,
    pub log_closed_form: f64,
}

impl GravityCrossCheck {
    /// `ln(first principles / closed form)`; not guaranteed to be <= 0.
    pub fn log_ratio(&self) -> f64 {
        self.log_first_principles - self.log_closed_form
    }
}

/// Rebuilds `√M = (√8 k / r_max³) A` with
/// `A = (f̃_d ∘ h̃)'(1) k̃(1) + (f̃_d ∘ h̃)(1) k̃'(1)` from the auxiliary
/// functions `k̃(y) = √2 y`, `h̃(y) = 6 y²`, `f̃_d(y) = √(πd) (1 + y/a²)^d`,
/// using `r_max² = 2/k` and `a² = r_max²/2` (the `r_max >> r_min` limit in
/// which the closed form is derived).
pub fn gravity_cross_check(ratio: f64, k: u32, eps: f64) -> Result<GravityCrossCheck> {
    check_gravity_args(ratio, k, eps, true)?;
    let d_real = real_gravity_degree(ratio, k, eps);
    let d = (d_real.ceil() as usize).max(1);
    let kf = k as f64;
    let r_max_sq = 2.0 / kf;
    let a_sq = 0.5 * r_max_sq;

    // f̃_d(h̃(y)) = √(πd) Σ_j C(d, j) (6/a²)^j y^{2j}
    let lead = (std::f64::consts::PI * d as f64).sqrt();
    let ratio_coeff = 6.0 / a_sq;
    let mut coeffs = vec![0.0; 2 * d + 1];
    let mut binom = 1.0;
    for j in 0..=d {
        if j > 0 {
            binom *= (d + 1 - j) as f64 / j as f64;
        }
        coeffs[2 * j] = lead * binom * ratio_coeff.powi(j as i32);
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Unsupported(format!(
            "auxiliary coefficients overflow at degree {d}; cross-check needs smaller R, k"
        )));
    }
    let fh = AuxSeries::polynomial(&coeffs);
    let kt = AuxSeries::polynomial(&[0.0, std::f64::consts::SQRT_2]);
    // k̃(0) = 0, so the product rule's degree-0 term vanishes and this is A.
    let a = product_bound(&fh, &kt)?
        .sqrt_m()
        .ok_or_else(|| Error::Unsupported("product bound overflowed".into()))?;
    let log_first = (8.0f64.sqrt() * kf).ln() - 1.5 * r_max_sq.ln() + a.ln();
    let closed = gravity_bound_log(ratio, k, eps, None)?.log_sqrt_m();
    Ok(GravityCrossCheck {
        degree: d,
        log_first_principles: log_first,
        log_closed_form: closed,
    })
}
