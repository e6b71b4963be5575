use gravkernel::kernels::{
    mc_kernel_estimate, series_coeffs, Activation, DotProductKernel, KernelKind, McSpec,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn closed_form_kernels() -> Vec<DotProductKernel> {
    vec![
        DotProductKernel::modified_relu(),
        DotProductKernel::gaussian(1.0),
        DotProductKernel::slow_decay(2.5),
    ]
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn unit_vector(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, d)
        .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-6)
        .prop_map(normalize)
}

fn unit_cloud() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..6).prop_flat_map(|d| prop::collection::vec(unit_vector(d), 2..=20))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernels_are_symmetric(pair in (2usize..8).prop_flat_map(|d| (unit_vector(d), unit_vector(d)))) {
        let (x, y) = pair;
        for k in closed_form_kernels() {
            prop_assert_eq!(k.eval(&x, &y).unwrap(), k.eval(&y, &x).unwrap());
        }
        let spec = McSpec::new(Activation::Relu, 256, 1.0, 9);
        let a = mc_kernel_estimate(&x, &y, &spec).unwrap();
        let b = mc_kernel_estimate(&y, &x, &spec).unwrap();
        prop_assert_eq!(a.mean, b.mean);
    }

    #[test]
    fn gram_matrices_are_psd(points in unit_cloud()) {
        for k in closed_form_kernels() {
            let n = points.len();
            let h = DMatrix::from_fn(n, n, |i, j| k.eval(&points[i], &points[j]).unwrap());
            let min = h.symmetric_eigenvalues().min();
            prop_assert!(min >= -1e-8, "{}: λ_min = {min}", k.kind());
        }
    }
}

#[test]
fn modified_relu_series_matches_closed_form() {
    let k = DotProductKernel::modified_relu();
    let prefix = k.coefficients().unwrap();
    assert_eq!(prefix.k_max(), 500);
    for t in [-0.9, 0.0, 0.5, 0.9] {
        let gap = (prefix.partial_sum(t) - k.eval_dot(t).unwrap()).abs();
        assert!(
            gap <= prefix.tail_bound(t),
            "t={t}: gap {gap} > {}",
            prefix.tail_bound(t)
        );
    }
}

#[test]
fn modified_relu_coefficients_positive_and_sum_to_half() {
    let prefix = series_coeffs(&KernelKind::ModifiedRelu, 500).unwrap();
    assert!((prefix.coeffs[0] - 1.0 / 6.0).abs() < 1e-10);
    assert!(prefix.coeffs.iter().all(|&b| b > 0.0));
    let sum: f64 = prefix.coeffs.iter().sum();
    assert!((sum - 0.5).abs() <= prefix.tail_bound(1.0), "Σ b_k = {sum}");
    assert!(sum < 0.5);
}

#[test]
fn modified_relu_envelope_nonincreasing() {
    // The tail bound relies on b_k k^{3/2} decreasing in the far range.
    let prefix = series_coeffs(&KernelKind::ModifiedRelu, 1000).unwrap();
    let scaled: Vec<f64> = (100..=1000)
        .map(|k| prefix.coeffs[k] * (k as f64).powf(1.5))
        .collect();
    for w in scaled.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12));
    }
}

#[test]
fn gaussian_coefficients_are_exact() {
    let prefix = series_coeffs(&KernelKind::GaussianOnSphere { radius: 1.0 }, 30).unwrap();
    let mut fact = 1.0f64;
    for (k, b) in prefix.coeffs.iter().enumerate() {
        if k > 0 {
            fact *= k as f64;
        }
        let exact = (-1.0f64).exp() / fact;
        assert!((b - exact).abs() <= 1e-15 * exact, "k={k}");
    }
}
