use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which rule of the bound calculus produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Univariate,
    Monomial,
    KernelWeighted,
    Multivariate,
    Product,
    Chain,
    Bivariate,
    Gravity,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::Univariate => "univariate",
            Rule::Monomial => "monomial",
            Rule::KernelWeighted => "kernel-weighted",
            Rule::Multivariate => "multivariate",
            Rule::Product => "product",
            Rule::Chain => "chain",
            Rule::Bivariate => "bivariate",
            Rule::Gravity => "gravity",
        };
        f.write_str(s)
    }
}

/// `√M` either directly or as its natural logarithm when too large for f64.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Magnitude {
    Linear(f64),
    Log(f64),
}

pub const DEFAULT_DELTA: f64 = 0.05;

/// A learnability bound `√M_g` with its provenance.
///
/// All `O(1)` constants of the underlying generalization bound are set to 1;
/// `constants_dropped` is always `true` and is carried into every exported
/// document so that values are never mistaken for calibrated sample counts.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub rule: Rule,
    pub magnitude: Magnitude,
    /// Truncation uncertainty on `√M` inherited from series evaluation.
    pub uncertainty: f64,
    pub delta: f64,
    pub constants_dropped: bool,
}

impl BoundReport {
    pub fn linear(rule: Rule, sqrt_m: f64) -> Self {
        debug_assert!(sqrt_m >= 0.0 || sqrt_m.is_nan());
        BoundReport {
            rule,
            magnitude: Magnitude::Linear(sqrt_m),
            uncertainty: 0.0,
            delta: DEFAULT_DELTA,
            constants_dropped: true,
        }
    }

    /// Stores `ln √M`; documents carry it alongside `√M` when representable.
    pub fn from_log(rule: Rule, log_sqrt_m: f64) -> Self {
        BoundReport {
            rule,
            magnitude: Magnitude::Log(log_sqrt_m),
            uncertainty: 0.0,
            delta: DEFAULT_DELTA,
            constants_dropped: true,
        }
    }

    pub fn with_uncertainty(mut self, u: f64) -> Self {
        self.uncertainty = u;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!(
                "delta must lie in (0,1), got {delta}"
            )));
        }
        self.delta = delta;
        Ok(self)
    }

    /// `√M`, or `None` if it overflows f64.
    pub fn sqrt_m(&self) -> Option<f64> {
        match self.magnitude {
            Magnitude::Linear(v) => Some(v),
            Magnitude::Log(l) => {
                let v = l.exp();
                v.is_finite().then_some(v)
            }
        }
    }

    pub fn log_sqrt_m(&self) -> f64 {
        match self.magnitude {
            Magnitude::Linear(v) => v.ln(),
            Magnitude::Log(l) => l,
        }
    }

    /// `ln([M + ln(1/δ)] / ε²)`.
    pub fn log_sample_estimate(&self, epsilon: f64) -> f64 {
        let log_m = 2.0 * self.log_sqrt_m();
        let log_conf = (1.0 / self.delta).ln().ln();
        log_add_exp(log_m, log_conf) - 2.0 * epsilon.ln()
    }

    /// `[M + ln(1/δ)] / ε²` with unit constants; infinite on overflow.
    pub fn sample_estimate(&self, epsilon: f64) -> f64 {
        self.log_sample_estimate(epsilon).exp()
    }

    pub fn to_document(&self, epsilon: Option<f64>) -> BoundDocument {
        let sqrt_m = self.sqrt_m();
        let (sample_estimate, log_sample_estimate) = match epsilon {
            Some(eps) => {
                let l = self.log_sample_estimate(eps);
                let v = l.exp();
                if v.is_finite() {
                    (Some(v), None)
                } else {
                    (None, Some(l))
                }
            }
            None => (None, None),
        };
        BoundDocument {
            rule: self.rule,
            sqrt_m,
            log_sqrt_m: match self.magnitude {
                Magnitude::Log(l) => Some(l),
                Magnitude::Linear(_) => None,
            },
            uncertainty: self.uncertainty,
            delta: self.delta,
            epsilon,
            sample_estimate,
            log_sample_estimate,
            constants_dropped: self.constants_dropped,
        }
    }
}

pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Serialized form of a [`BoundReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundDocument {
    pub rule: Rule,
    #[serde(rename = "sqrt_M", skip_serializing_if = "Option::is_none", default)]
    pub sqrt_m: Option<f64>,
    #[serde(
        rename = "log_sqrt_M",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub log_sqrt_m: Option<f64>,
    pub uncertainty: f64,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sample_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub log_sample_estimate: Option<f64>,
    pub constants_dropped: bool,
}

impl BoundDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_estimate_monotone() {
        let r = BoundReport::linear(Rule::Univariate, 3.0);
        assert!(r.sample_estimate(0.1) > r.sample_estimate(0.2));
        let bigger = BoundReport::linear(Rule::Univariate, 4.0);
        assert!(bigger.sample_estimate(0.1) > r.sample_estimate(0.1));
        let expected = (9.0 + (1.0f64 / 0.05).ln()) / 0.01;
        assert!((r.sample_estimate(0.1) - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn huge_values_stay_in_log_domain() {
        let r = BoundReport::from_log(Rule::Gravity, 2000.0);
        assert_eq!(r.sqrt_m(), None);
        let doc = r.to_document(Some(0.5));
        assert_eq!(doc.log_sqrt_m, Some(2000.0));
        assert!(doc.sample_estimate.is_none());
        let l = doc.log_sample_estimate.unwrap();
        assert!((l - (4000.0 - 2.0 * 0.5f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn document_keys() {
        let doc = BoundReport::linear(Rule::Product, 2.0).to_document(Some(0.1));
        let v: serde_json::Value = serde_json::from_str(&doc.to_json()).unwrap();
        for key in [
            "rule",
            "sqrt_M",
            "delta",
            "epsilon",
            "sample_estimate",
            "constants_dropped",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["rule"], "product");
        assert_eq!(v["constants_dropped"], true);
        let back: BoundDocument = serde_json::from_value(v).unwrap();
        assert_eq!(back, doc);
    }

    #[test]
    fn rejects_bad_delta() {
        assert!(BoundReport::linear(Rule::Univariate, 1.0)
            .with_delta(1.0)
            .is_err());
    }
}
