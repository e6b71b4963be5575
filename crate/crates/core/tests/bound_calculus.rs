use gravkernel::calculus::{
    bivariate_chain_bound, chain_bound, inverse_cube_taylor, monomial_bound, multivariate_bound,
    product_bound, univariate_bound, AuxSeries, BivariateSeries, MonomialTerm,
};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn linear_product_is_monomial(b1 in 0.01f64..5.0, b2 in 0.01f64..5.0) {
        let g = AuxSeries::polynomial(&[0.0, b1]);
        let h = AuxSeries::polynomial(&[0.0, b2]);
        let prod = product_bound(&g, &h).unwrap().sqrt_m().unwrap();
        let mono = monomial_bound(&[b1, b2]).unwrap().sqrt_m().unwrap();
        prop_assert!(rel(prod, mono) <= 1e-12);
        let xy = BivariateSeries::from_terms(&[(1, 1, 1.0)]).unwrap();
        let biv = bivariate_chain_bound(&xy, &g, &h).unwrap().sqrt_m().unwrap();
        prop_assert!(rel(biv, prod) <= 1e-12);
    }

    #[test]
    fn identity_chain_is_multivariate(c in prop::collection::vec(-3.0f64..3.0, 1..10), beta in 0.0f64..2.0) {
        let id = AuxSeries::polynomial(&[0.0, 1.0]);
        let inner = AuxSeries::polynomial(&c).scaled(beta).unwrap();
        let chain = chain_bound(&id, &inner).unwrap().sqrt_m().unwrap();
        let terms: Vec<MonomialTerm> = c
            .iter()
            .enumerate()
            .map(|(j, &cj)| MonomialTerm::new(cj, vec![beta; j]))
            .collect();
        let multi = multivariate_bound(&terms).unwrap().sqrt_m().unwrap();
        prop_assert!((chain - multi).abs() <= 1e-12 * multi.max(1e-300));
    }

    #[test]
    fn bounds_are_nonnegative(c in prop::collection::vec(-3.0f64..3.0, 0..10), beta in 0.0f64..3.0) {
        let g = AuxSeries::polynomial(&c);
        prop_assert!(g.coeffs().iter().all(|&x| x >= 0.0));
        prop_assert!(univariate_bound(&g, beta).unwrap().sqrt_m().unwrap() >= 0.0);
    }

    #[test]
    fn lagrange_bound_dominates_grid_error(r_min in 0.2f64..1.0, ratio in 1.0f64..3.0, d in 0usize..=200) {
        let t = inverse_cube_taylor(r_min, r_min * ratio, d).unwrap();
        let err = t.grid_sup_error(10_000);
        // Rounding in evaluating f_d, which the Lagrange remainder does not cover.
        let rounding = 4.0 * (d as f64 + 2.0) * f64::EPSILON * r_min.powi(-3);
        prop_assert!(err <= t.error_bound + rounding, "grid {err} > bound {}", t.error_bound);
    }
}
