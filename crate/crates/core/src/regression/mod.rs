//! Kernel regression, random-feature networks, and error metrics.

mod features;
mod gram;
mod results;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use features::{
    fit_random_features, fit_top_layer, project_to_sphere, random_features, relative_residual,
    sgd_top_layer, FeatureMap, RandomFeatureModel, SgdConfig, SgdOutcome, Standardizer,
};
pub use gram::{gram, predict, solve_min_norm, GramSystem, KernelModel, JITTER_LADDER, MAX_GRAM_N};
pub use results::{read_results, results_header, write_results, ResultsRow};

fn check_lengths(pred: &[f64], labels: &[f64]) -> Result<()> {
    if pred.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            left: pred.len(),
            right: labels.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::invalid("no predictions to score"));
    }
    Ok(())
}

pub fn rmse(pred: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(pred, labels)?;
    let sse: f64 = pred
        .iter()
        .zip(labels)
        .map(|(p, y)| (p - y) * (p - y))
        .sum();
    Ok((sse / pred.len() as f64).sqrt())
}

/// RMSE divided by the label range of the evaluation set.
pub fn normalized_rmse(pred: &[f64], labels: &[f64]) -> Result<f64> {
    let r = rmse(pred, labels)?;
    let (lo, hi) = labels
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
    if !(hi > lo) {
        return Err(Error::Normalization(
            "labels are constant; range is zero".into(),
        ));
    }
    Ok(r / (hi - lo))
}

/// `√(2 yᵀH⁻¹y / n) + √(ln(n / (λ₀ δ)) / n)`, with the constant of the second
/// term set to 1. A diagnostic, not a guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenBound {
    pub complexity_term: f64,
    pub confidence_term: f64,
    pub total: f64,
    pub constants_dropped: bool,
}

pub fn gen_bound(complexity: f64, n: usize, lambda0: f64, delta: f64) -> Result<GenBound> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    if !(lambda0 > 0.0) {
        return Err(Error::Domain(format!("λ₀ must be positive, got {lambda0}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("δ must lie in (0, 1), got {delta}")));
    }
    if !(complexity >= 0.0) {
        return Err(Error::Domain(format!(
            "complexity must be nonnegative, got {complexity}"
        )));
    }
    let nf = n as f64;
    let complexity_term = (2.0 * complexity / nf).sqrt();
    // The logarithm is floored at zero so the term stays real when λ₀ is large.
    let confidence_term = ((nf / (lambda0 * delta)).ln().max(0.0) / nf).sqrt();
    Ok(GenBound {
        complexity_term,
        confidence_term,
        total: complexity_term + confidence_term,
        constants_dropped: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[0.5, 0.5], &[0.0, 1.0]).unwrap(), 0.5);
        assert_eq!(normalized_rmse(&[0.5, 0.5], &[0.0, 1.0]).unwrap(), 0.5);
        assert!(matches!(
            normalized_rmse(&[1.0, 2.0], &[3.0, 3.0]),
            Err(Error::Normalization(_))
        ));
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn normalized_rmse_scale_free() {
        let p = [0.1, 0.7, -0.3, 2.0];
        let y = [0.0, 1.0, -0.5, 1.5];
        let c = 37.5;
        let ps: Vec<f64> = p.iter().map(|v| v * c).collect();
        let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
        let a = normalized_rmse(&p, &y).unwrap();
        let b = normalized_rmse(&ps, &ys).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn gen_bound_examples() {
        let b = gen_bound(2.0, 2, 0.1, 0.05).unwrap();
        assert!((b.complexity_term - 2f64.sqrt()).abs() < 1e-15);
        assert!(b.total > b.complexity_term);
        assert!(b.constants_dropped);

        let d = gen_bound(4.0, 2, 0.1, 0.05).unwrap();
        assert!((d.complexity_term / b.complexity_term - 2f64.sqrt()).abs() < 1e-15);

        let mut prev = f64::INFINITY;
        for n in [10, 100, 1000, 10_000] {
            let t = gen_bound(2.0, n, 0.1, 0.05).unwrap().total;
            assert!(t < prev);
            prev = t;
        }
        assert!(gen_bound(1.0, 10, 0.0, 0.05).is_err());
        assert!(gen_bound(1.0, 10, 0.1, 1.0).is_err());
    }
}
