//! Dot-product kernels `K(x, x') = Σ_k b_k (x·x')^k`.

mod modified_relu;
mod monte_carlo;

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;

use crate::calculus::Schedule;
use crate::error::{Error, Result};

pub use modified_relu::{
    arccos_part_coeffs, input_lift, modified_relu_eval, ArccosPart, CLAMP_TOL,
};
pub use monte_carlo::{
    expected_kernel, mc_kernel_estimate, mc_kernel_estimate_with, Activation, McEstimate, McSpec,
};

/// Largest coefficient prefix [`series_coeffs`] will compute.
pub const MAX_PREFIX: usize = 2000;
/// Prefix length held in a kernel's coefficient cache.
pub const DEFAULT_PREFIX: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelKind {
    /// ReLU kernel on lifted inputs (unit-norm `x`).
    ModifiedRelu,
    /// `e^{-|x-x'|²/2} = e^{-r²} e^{x·x'}` on the sphere of radius `r`.
    GaussianOnSphere { radius: f64 },
    /// `Σ_{k>=1} k^{-s} (x·x')^k`.
    SlowDecay { exponent: f64 },
    /// Sampled single-hidden-layer kernel `E[φ(x·z) φ(x'·z)]`.
    MonteCarlo(McSpec),
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelKind::ModifiedRelu => write!(f, "modified-relu"),
            KernelKind::GaussianOnSphere { .. } => write!(f, "gaussian"),
            KernelKind::SlowDecay { .. } => write!(f, "slow-decay"),
            KernelKind::MonteCarlo(spec) => write!(f, "{}-mc", spec.activation),
        }
    }
}

/// A dot-product kernel with a lazily built coefficient prefix.
#[derive(Debug)]
pub struct DotProductKernel {
    kind: KernelKind,
    coeff_cache: OnceLock<Result<CoeffPrefix, String>>,
}

impl Clone for DotProductKernel {
    fn clone(&self) -> Self {
        DotProductKernel::new(self.kind.clone())
    }
}

impl DotProductKernel {
    pub fn new(kind: KernelKind) -> Self {
        DotProductKernel {
            kind,
            coeff_cache: OnceLock::new(),
        }
    }

    pub fn modified_relu() -> Self {
        Self::new(KernelKind::ModifiedRelu)
    }

    pub fn gaussian(radius: f64) -> Self {
        Self::new(KernelKind::GaussianOnSphere { radius })
    }

    pub fn slow_decay(exponent: f64) -> Self {
        Self::new(KernelKind::SlowDecay { exponent })
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    /// `K` as a function of `t = x·x'` (closed-form kinds only).
    pub fn eval_dot(&self, t: f64) -> Result<f64> {
        match &self.kind {
            KernelKind::ModifiedRelu => modified_relu_eval(t),
            KernelKind::GaussianOnSphere { radius } => {
                let r2 = radius * radius;
                if t.is_nan() || t.abs() > r2 * (1.0 + CLAMP_TOL) {
                    return Err(Error::Domain(format!(
                        "dot product {t} impossible on the sphere of radius {radius}"
                    )));
                }
                Ok((t - r2).exp())
            }
            KernelKind::SlowDecay { exponent } => slow_decay_eval(t, *exponent),
            KernelKind::MonteCarlo(_) => Err(Error::Unsupported(
                "Monte-Carlo kernels are evaluated on vectors, not dot products".into(),
            )),
        }
    }

    /// `K(x, x')`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dims(x, y)?;
        match &self.kind {
            KernelKind::GaussianOnSphere { .. } => gaussian_eval(x, y),
            KernelKind::MonteCarlo(spec) => Ok(mc_kernel_estimate(x, y, spec)?.mean),
            _ => self.eval_dot(dot(x, y)),
        }
    }

    /// Cached prefix `b_0..b_500`.
    pub fn coefficients(&self) -> Result<&CoeffPrefix> {
        self.coeff_cache
            .get_or_init(|| series_coeffs(&self.kind, DEFAULT_PREFIX).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| Error::Unsupported(e.clone()))
    }

    /// Coefficient schedule for the bound calculus.
    pub fn schedule(&self, k_max: usize) -> Result<Schedule> {
        Ok(match &self.kind {
            KernelKind::GaussianOnSphere { radius } => Schedule::Gaussian { radius: *radius },
            _ => Schedule::Explicit {
                coeffs: series_coeffs(&self.kind, k_max)?.coeffs,
            },
        })
    }
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn check_dims(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(())
}

/// `e^{-|x - x'|²/2}`.
pub fn gaussian_eval(x: &[f64], y: &[f64]) -> Result<f64> {
    check_dims(x, y)?;
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    if !d2.is_finite() {
        return Err(Error::Domain("non-finite input".into()));
    }
    Ok((-0.5 * d2).exp())
}

const SLOW_DECAY_TOL: f64 = 1e-12;
/// Terms summed explicitly before the Euler-Maclaurin tail at `|t| = 1`.
const EM_TERMS: usize = 10_000;

/// `Σ_{k>=1} k^{-s} t^k` to absolute accuracy `1e-12`.
///
/// At `|t| = 1` the series converges only for `s > 1`; the value is then
/// `ζ(s)` (t = 1) or `−(1 − 2^{1−s}) ζ(s)` (t = −1).
pub fn slow_decay_eval(t: f64, s: f64) -> Result<f64> {
    if t.is_nan() || t.abs() > 1.0 + CLAMP_TOL {
        return Err(Error::Domain(format!(
            "slow-decay kernel needs |t| <= 1, got {t}"
        )));
    }
    let t = t.clamp(-1.0, 1.0);
    if t.abs() == 1.0 {
        if s <= 1.0 {
            return Err(Error::Divergence {
                value: t,
                radius: 1.0,
            });
        }
        let zeta = zeta_em(s);
        return Ok(if t > 0.0 {
            zeta
        } else {
            -(1.0 - 2f64.powf(1.0 - s)) * zeta
        });
    }
    if t < 0.0 {
        // Li_s(−a) = 2^{1−s} Li_s(a²) − Li_s(a)
        return Ok(2f64.powf(1.0 - s) * polylog_pos(t * t, s) - polylog_pos(-t, s));
    }
    Ok(polylog_pos(t, s))
}

/// `Σ_{k>=1} k^{-s} a^k` for `0 <= a < 1`. Summed directly when the
/// geometric tail bound falls below tolerance within `EM_TERMS` terms;
/// otherwise the tail from `EM_TERMS` on is an Euler-Maclaurin sum.
fn polylog_pos(a: f64, s: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut pow = 1.0;
    for k in 1..EM_TERMS {
        pow *= a;
        sum += pow * (k as f64).powf(-s);
        // Remaining tail is at most a^{k+1} (k+1)^{-s} / (1 - a).
        let next = pow * a * ((k + 1) as f64).powf(-s) / (1.0 - a);
        if next < SLOW_DECAY_TOL {
            return sum;
        }
    }
    sum + em_tail(a, s, EM_TERMS as f64)
}

/// `Σ_{k>=N} f(k)` for `f(x) = x^{-s} e^{-μx}`, `μ = −ln a`:
/// `∫_N^∞ f + f(N)/2 − f'(N)/12 + f'''(N)/720`.
fn em_tail(a: f64, s: f64, n: f64) -> f64 {
    let mu = -a.ln();
    let f = n.powf(-s) * (-mu * n).exp();
    let g1 = -s / n - mu;
    let g2 = s / (n * n);
    let g3 = -2.0 * s / (n * n * n);
    let d1 = f * g1;
    let d3 = f * (g1 * g1 * g1 + 3.0 * g1 * g2 + g3);
    em_integral(mu, s, n) + 0.5 * f - d1 / 12.0 + d3 / 720.0
}

/// `∫_N^∞ x^{-s} e^{-μx} dx = N^{1−s} e^{−μN} ∫_0^∞ e^{(1−s)u − μN(e^u − 1)} du`
/// by composite Simpson in `u`.
fn em_integral(mu: f64, s: f64, n: f64) -> f64 {
    const H: f64 = 1e-3;
    let c = mu * n;
    let h = |u: f64| ((1.0 - s) * u - c * u.exp_m1()).exp();
    let mut total = 0.0;
    let mut u = 0.0;
    loop {
        // One Simpson panel on [u, u + 2H].
        let (f0, f1, f2) = (h(u), h(u + H), h(u + 2.0 * H));
        total += H / 3.0 * (f0 + 4.0 * f1 + f2);
        u += 2.0 * H;
        // The integrand is decreasing once past u where its slope turns negative.
        let slope = (1.0 - s) - c * u.exp();
        if slope < 0.0 && f2 < 1e-17 * total {
            break;
        }
    }
    n.powf(1.0 - s) * (-c).exp() * total
}

/// Riemann zeta by direct summation plus an Euler-Maclaurin tail.
fn zeta_em(s: f64) -> f64 {
    let n = EM_TERMS as f64;
    let mut head = 0.0;
    for k in (1..EM_TERMS).rev() {
        head += (k as f64).powf(-s);
    }
    // Σ_{k>=N} k^{-s} ≈ N^{1-s}/(s-1) + N^{-s}/2 + s N^{-s-1}/12 - s(s+1)(s+2) N^{-s-3}/720
    let tail = n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s * n.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * n.powf(-s - 3.0) / 720.0;
    head + tail
}

/// Coefficient prefix `b_0..b_K` with per-coefficient uncertainty.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffPrefix {
    pub kind: KernelKind,
    pub coeffs: Vec<f64>,
    pub uncertainty: Vec<f64>,
}

/// Extracts `b_0..b_{k_max}` for a closed-form kernel.
pub fn series_coeffs(kind: &KernelKind, k_max: usize) -> Result<CoeffPrefix> {
    if k_max > MAX_PREFIX {
        return Err(Error::invalid(format!(
            "coefficient prefix limited to K <= {MAX_PREFIX}, got {k_max}"
        )));
    }
    let (coeffs, uncertainty) = match kind {
        KernelKind::ModifiedRelu => modified_relu::kernel_coeffs(k_max),
        KernelKind::GaussianOnSphere { radius } => {
            let mut c = Vec::with_capacity(k_max + 1);
            let mut b = (-radius * radius).exp();
            for k in 0..=k_max {
                if k > 0 {
                    b /= k as f64;
                }
                c.push(b);
            }
            (c, vec![0.0; k_max + 1])
        }
        KernelKind::SlowDecay { exponent } => {
            let c = (0..=k_max)
                .map(|k| {
                    if k == 0 {
                        0.0
                    } else {
                        (k as f64).powf(-exponent)
                    }
                })
                .collect();
            (c, vec![0.0; k_max + 1])
        }
        KernelKind::MonteCarlo(_) => {
            return Err(Error::Unsupported(
                "series coefficients cannot be extracted from a sampled kernel".into(),
            ))
        }
    };
    Ok(CoeffPrefix {
        kind: kind.clone(),
        coeffs,
        uncertainty,
    })
}

impl CoeffPrefix {
    pub fn k_max(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `Σ_{k<=K} b_k t^k`.
    pub fn partial_sum(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * t + c;
        }
        acc
    }

    /// Upper bound on `|K(t) − Σ_{k<=K} b_k t^k|`: the neglected tail, the
    /// accumulated coefficient uncertainty, and the rounding error of
    /// evaluating the prefix in floating point.
    pub fn tail_bound(&self, t: f64) -> f64 {
        let a = t.abs();
        let k = self.k_max();
        let b_k = self.coeffs[k];
        let kf = k as f64;
        let coeff_err: f64 = self
            .uncertainty
            .iter()
            .enumerate()
            .map(|(i, u)| u * a.powi(i as i32))
            .sum();
        let magnitude: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, b)| b * a.powi(i as i32))
            .sum();
        let rounding = 2.0 * (k as f64 + 2.0) * f64::EPSILON * magnitude;
        let tail = match &self.kind {
            // b_k k^{3/2} is nonincreasing for large k, so the tail is below
            // the k^{-3/2} envelope through b_K.
            KernelKind::ModifiedRelu => {
                let envelope = 2.0 * kf * b_k * a.powi(k as i32 + 1);
                if a < 1.0 {
                    envelope.min(b_k * a.powi(k as i32 + 1) / (1.0 - a))
                } else {
                    envelope
                }
            }
            KernelKind::GaussianOnSphere { .. } => {
                let next = b_k * a.powi(k as i32 + 1) / (kf + 1.0);
                let q = a / (kf + 2.0);
                if q < 1.0 {
                    next / (1.0 - q)
                } else {
                    f64::INFINITY
                }
            }
            KernelKind::SlowDecay { exponent } => {
                let s = *exponent;
                if a < 1.0 {
                    a.powi(k as i32 + 1) * (kf + 1.0).powf(-s) / (1.0 - a)
                } else if s > 1.0 {
                    kf.powf(1.0 - s) / (s - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            KernelKind::MonteCarlo(_) => f64::INFINITY,
        };
        tail + coeff_err + rounding
    }

    /// Writes `k,b_k` rows (plus extra columns from `extra`) as CSV text.
    pub fn write_table<W: Write>(
        &self,
        out: &mut W,
        extra: &[(&str, Vec<f64>)],
    ) -> std::io::Result<()> {
        write!(out, "k,b_k")?;
        for (name, _) in extra {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for (k, b) in self.coeffs.iter().enumerate() {
            write!(out, "{k},{b:.17e}")?;
            for (_, col) in extra {
                write!(out, ",{:.17e}", col[k])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn write_table_to(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_table(&mut buf, &[])
            .map_err(|e| Error::io(path, e))?;
        crate::harness::write_atomic(path, &buf)
    }
}

/// `b_k · 2√π · k^{3/2}`, which tends to 1 for the arccos-part coefficients.
pub fn asymptote_ratio(b: f64, k: usize) -> f64 {
    b * 2.0 * PI.sqrt() * (k as f64).powf(1.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_examples() {
        assert_eq!(gaussian_eval(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 1.0);
        let v = gaussian_eval(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        // Dot-product form on the unit sphere agrees.
        let k = DotProductKernel::gaussian(1.0);
        assert!((k.eval_dot(0.0).unwrap() - v).abs() < 1e-12);
        assert!(matches!(
            gaussian_eval(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn slow_decay_examples() {
        assert_eq!(slow_decay_eval(0.0, 2.0).unwrap(), 0.0);
        let z2 = slow_decay_eval(1.0, 2.0).unwrap();
        assert!((z2 - PI * PI / 6.0).abs() < 1e-12, "{z2}");
        // Σ 2^{-k}/k^2 = Li_2(1/2) = π²/12 − ln²2 / 2.
        let li = slow_decay_eval(0.5, 2.0).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert!((li - (PI * PI / 12.0 - 0.5 * ln2 * ln2)).abs() < 1e-12);
        // η(2) = π²/12.
        let eta = slow_decay_eval(-1.0, 2.0).unwrap();
        assert!((eta + PI * PI / 12.0).abs() < 1e-12);
        assert!(matches!(
            slow_decay_eval(1.0, 1.0),
            Err(Error::Divergence { .. })
        ));
    }

    fn direct_polylog(t: f64, s: f64, terms: usize) -> f64 {
        (1..=terms)
            .rev()
            .map(|k| t.powi(k as i32) * (k as f64).powf(-s))
            .sum()
    }

    #[test]
    fn slow_decay_near_unit_argument() {
        for s in [1.5, 2.0, 3.0] {
            for t in [0.9995, -0.9995, 0.99995] {
                let fast = slow_decay_eval(t, s).unwrap();
                let slow = direct_polylog(t, s, 2_000_000);
                assert!((fast - slow).abs() < 1e-11, "s={s} t={t}: {fast} vs {slow}");
            }
            let edge = slow_decay_eval(1.0 - 1e-15, s).unwrap();
            assert!((edge - zeta_em(s)).abs() < 1e-6, "s={s}");
            let edge = slow_decay_eval(-1.0 + 1e-15, s).unwrap();
            assert!(
                (edge - slow_decay_eval(-1.0, s).unwrap()).abs() < 1e-9,
                "s={s}"
            );
        }
    }

    #[test]
    fn prefixes() {
        let g = series_coeffs(&KernelKind::GaussianOnSphere { radius: 1.0 }, 10).unwrap();
        let e = (-1.0f64).exp();
        let mut fact = 1.0;
        for k in 0..=10 {
            if k > 0 {
                fact *= k as f64;
            }
            assert!((g.coeffs[k] - e / fact).abs() <= 1e-15 * e / fact);
        }
        let s = series_coeffs(&KernelKind::SlowDecay { exponent: 1.5 }, 4).unwrap();
        assert_eq!(s.coeffs[0], 0.0);
        assert_eq!(s.coeffs[4], 4f64.powf(-1.5));
        let mc = KernelKind::MonteCarlo(McSpec::new(Activation::Relu, 10, 1.0, 0));
        assert!(matches!(series_coeffs(&mc, 5), Err(Error::Unsupported(_))));
        assert!(series_coeffs(&KernelKind::ModifiedRelu, MAX_PREFIX + 1).is_err());
    }

    #[test]
    fn modified_relu_prefix_matches_closed_form() {
        let k = DotProductKernel::modified_relu();
        let p = k.coefficients().unwrap();
        assert_eq!(p.k_max(), DEFAULT_PREFIX);
        for t in [-0.9, 0.0, 0.5, 0.9] {
            let err = (p.partial_sum(t) - modified_relu_eval(t).unwrap()).abs();
            assert!(err <= p.tail_bound(t), "t={t}: {err} > {}", p.tail_bound(t));
        }
        assert!(p.coeffs.iter().all(|b| *b > 0.0));
    }

    #[test]
    fn gaussian_prefix_matches_closed_form() {
        let k = DotProductKernel::gaussian(1.0);
        let p = series_coeffs(k.kind(), 30).unwrap();
        for t in [-1.0, -0.3, 0.4, 1.0] {
            let err = (p.partial_sum(t) - k.eval_dot(t).unwrap()).abs();
            assert!(err <= p.tail_bound(t) + 1e-15);
        }
    }

    #[test]
    fn table_has_header_and_rows() {
        let p = series_coeffs(&KernelKind::SlowDecay { exponent: 2.0 }, 3).unwrap();
        let mut buf = Vec::new();
        p.write_table(&mut buf, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "k,b_k");
        assert_eq!(lines.len(), 5);
        assert!(lines[2].starts_with("1,1.0"));
    }
}
