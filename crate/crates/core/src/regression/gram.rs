use std::collections::HashMap;
use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::kernels::DotProductKernel;
use crate::par::Exec;

/// Largest training set for which an exact Gram system is built.
pub const MAX_GRAM_N: usize = 2000;

/// Jitter levels, as multiples of `trace(H)/n`, tried in order.
pub const JITTER_LADDER: [f64; 5] = [0.0, 1e-12, 1e-10, 1e-8, 1e-6];

const REFINE_STEPS: usize = 3;

/// Kernel Gram matrix with a cached jittered Cholesky factor.
#[derive(Debug)]
pub struct GramSystem {
    h: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
    lambda_min: OnceLock<f64>,
}

/// `H_ab = K(x_a, x_b)`. Exact duplicate inputs are rejected before any
/// factorization.
pub fn gram(kernel: &DotProductKernel, inputs: &[Vec<f64>], exec: Exec) -> Result<GramSystem> {
    let n = inputs.len();
    if n == 0 {
        return Err(Error::invalid("Gram matrix needs at least one input"));
    }
    if n > MAX_GRAM_N {
        return Err(Error::invalid(format!(
            "exact Gram solves are limited to n <= {MAX_GRAM_N}, got {n}; use random features"
        )));
    }
    let d = inputs[0].len();
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(n);
    for (a, x) in inputs.iter().enumerate() {
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                left: d,
                right: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("input {a} has a non-finite entry")));
        }
        // Normalize -0.0 so it collides with 0.0.
        let key = x.iter().map(|v| (v + 0.0).to_bits()).collect();
        if let Some(&first) = seen.get(&key) {
            log::warn!("inputs {first} and {a} coincide; the Gram matrix is singular");
            return Err(Error::SingularGram { first, second: a });
        }
        seen.insert(key, a);
    }

    let rows = exec.map_collect(n, |a| {
        (a..n)
            .map(|b| kernel.eval(&inputs[a], &inputs[b]))
            .collect::<Result<Vec<f64>>>()
    });
    let mut h = DMatrix::zeros(n, n);
    for (a, row) in rows.into_iter().enumerate() {
        for (off, v) in row?.into_iter().enumerate() {
            h[(a, a + off)] = v;
            h[(a + off, a)] = v;
        }
    }
    GramSystem::from_matrix(h)
}

impl GramSystem {
    /// Factors a symmetric matrix, climbing the jitter ladder until Cholesky
    /// succeeds.
    pub fn from_matrix(h: DMatrix<f64>) -> Result<Self> {
        let n = h.nrows();
        if h.ncols() != n {
            return Err(Error::DimensionMismatch {
                left: n,
                right: h.ncols(),
            });
        }
        let scale = h.trace() / n as f64;
        for level in JITTER_LADDER {
            let jitter = level * scale;
            let mut shifted = h.clone();
            for i in 0..n {
                shifted[(i, i)] += jitter;
            }
            if let Some(chol) = Cholesky::new(shifted) {
                if jitter > 0.0 {
                    log::info!("Gram factorization needed jitter {jitter:e}");
                }
                return Ok(GramSystem {
                    h,
                    chol,
                    jitter,
                    lambda_min: OnceLock::new(),
                });
            }
        }
        let lambda_min = smallest_eigenvalue(&h);
        Err(Error::IllConditioned { lambda_min })
    }

    pub fn n(&self) -> usize {
        self.h.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.h
    }

    /// Diagonal shift used by the factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `λ₀`, the smallest eigenvalue of `H` (computed once).
    pub fn lambda_min(&self) -> f64 {
        *self.lambda_min.get_or_init(|| smallest_eigenvalue(&self.h))
    }

    /// `H⁻¹ y` with a few steps of iterative refinement against the
    /// unjittered `H`.
    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.n() {
            return Err(Error::DimensionMismatch {
                left: self.n(),
                right: y.len(),
            });
        }
        let y = DVector::from_column_slice(y);
        let mut x = self.chol.solve(&y);
        for _ in 0..REFINE_STEPS {
            let r = &y - &self.h * &x;
            x += self.chol.solve(&r);
        }
        Ok(x.as_slice().to_vec())
    }

    /// `yᵀ H⁻¹ y`.
    pub fn complexity(&self, y: &[f64]) -> Result<f64> {
        let alpha = self.solve(y)?;
        let q: f64 = alpha.iter().zip(y).map(|(a, b)| a * b).sum();
        Ok(q.max(0.0))
    }

    /// Relative residual `|H α − y| / |y|`.
    pub fn residual(&self, alpha: &[f64], y: &[f64]) -> f64 {
        let a = DVector::from_column_slice(alpha);
        let y = DVector::from_column_slice(y);
        let ny = y.norm();
        let r = (&self.h * a - &y).norm();
        if ny == 0.0 {
            r
        } else {
            r / ny
        }
    }
}

fn smallest_eigenvalue(h: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(h.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Minimum-norm interpolant `f(x) = Σ_a α_a K(x_a, x)`.
#[derive(Debug, Clone)]
pub struct KernelModel {
    kernel: DotProductKernel,
    train: Vec<Vec<f64>>,
    alpha: Vec<f64>,
}

/// Dual coefficients `α = H⁻¹ y`.
pub fn solve_min_norm(system: &GramSystem, y: &[f64]) -> Result<Vec<f64>> {
    system.solve(y)
}

/// Prediction `Σ_a α_a K(x_a, x)`.
pub fn predict(
    alpha: &[f64],
    train: &[Vec<f64>],
    kernel: &DotProductKernel,
    x: &[f64],
) -> Result<f64> {
    if alpha.len() != train.len() {
        return Err(Error::DimensionMismatch {
            left: alpha.len(),
            right: train.len(),
        });
    }
    let mut s = 0.0;
    for (a, xa) in alpha.iter().zip(train) {
        s += a * kernel.eval(xa, x)?;
    }
    Ok(s)
}

impl KernelModel {
    /// Builds the Gram system, solves, and keeps what prediction needs.
    pub fn fit(
        kernel: DotProductKernel,
        train: Vec<Vec<f64>>,
        y: &[f64],
        exec: Exec,
    ) -> Result<(Self, GramSystem)> {
        let system = gram(&kernel, &train, exec)?;
        let alpha = solve_min_norm(&system, y)?;
        Ok((
            KernelModel {
                kernel,
                train,
                alpha,
            },
            system,
        ))
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        predict(&self.alpha, &self.train, &self.kernel, x)
    }

    pub fn predict_many(&self, xs: &[Vec<f64>], exec: Exec) -> Result<Vec<f64>> {
        exec.map_collect(xs.len(), |i| self.predict(&xs[i]))
            .into_iter()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::input_lift;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn unit_vectors(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                v.into_iter().map(|a| a / norm).collect()
            })
            .collect()
    }

    #[test]
    fn single_point_gram() {
        let k = DotProductKernel::modified_relu();
        let g = gram(&k, &[vec![1.0, 0.0]], Exec::Sequential).unwrap();
        assert!((g.matrix()[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((g.complexity(&[1.0]).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(g.complexity(&[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn duplicates_named() {
        let k = DotProductKernel::modified_relu();
        let x = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        match gram(&k, &x, Exec::Sequential) {
            Err(Error::SingularGram { first, second }) => assert_eq!((first, second), (0, 2)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn distinct_inputs_positive_definite() {
        let k = DotProductKernel::modified_relu();
        let g = gram(&k, &unit_vectors(50, 4, 1), Exec::Parallel).unwrap();
        assert!(g.lambda_min() > 0.0);
        assert_eq!(g.jitter(), 0.0);
        let h = g.matrix();
        assert!((h - h.transpose()).amax() <= 1e-12);
    }

    #[test]
    fn assembly_policy_independent() {
        let k = DotProductKernel::modified_relu();
        let x = unit_vectors(40, 3, 2);
        let a = gram(&k, &x, Exec::Sequential).unwrap();
        let b = gram(&k, &x, Exec::Parallel).unwrap();
        assert_eq!(a.matrix(), b.matrix());
    }

    #[test]
    fn interpolates_training_labels() {
        let k = DotProductKernel::modified_relu();
        let x = unit_vectors(60, 5, 3);
        let y: Vec<f64> = x.iter().map(|v| v[0] * v[1] + 0.3 * v[2]).collect();
        let (model, system) = KernelModel::fit(k, x.clone(), &y, Exec::Parallel).unwrap();
        assert!(system.residual(model.alpha(), &y) <= 1e-8);
        for (xi, yi) in x.iter().zip(&y) {
            assert!((model.predict(xi).unwrap() - yi).abs() <= 1e-8 * (1.0 + yi.abs()));
        }
        let (zero, _) = KernelModel::fit(
            DotProductKernel::modified_relu(),
            x.clone(),
            &vec![0.0; 60],
            Exec::Parallel,
        )
        .unwrap();
        assert_eq!(zero.predict(&[0.6, 0.8, 0.0, 0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn jitter_rescues_singular_matrix() {
        // Rank-one matrix: plain Cholesky fails, the ladder adds a small shift.
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let h = &v * v.transpose();
        let g = GramSystem::from_matrix(h).unwrap();
        assert!(g.jitter() > 0.0);
        assert!(g.lambda_min() > -1e-8);
    }

    #[test]
    fn indefinite_matrix_is_ill_conditioned() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            GramSystem::from_matrix(h),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn lifted_inputs_accepted() {
        // Lifted unit vectors are themselves unit vectors, so the kernel
        // accepts them as well.
        let k = DotProductKernel::modified_relu();
        let x: Vec<Vec<f64>> = unit_vectors(10, 3, 4)
            .iter()
            .map(|v| input_lift(v, false).unwrap())
            .collect();
        assert!(gram(&k, &x, Exec::Sequential).unwrap().lambda_min() > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn complexity_permutation_invariant(seed in 0u64..1000, shift in 1usize..29) {
            let k = DotProductKernel::modified_relu();
            let x = unit_vectors(30, 4, seed);
            let y: Vec<f64> = x.iter().map(|v| v[0] - v[3] * v[1]).collect();
            let c = gram(&k, &x, Exec::Sequential).unwrap().complexity(&y).unwrap();
            let mut xp = x.clone();
            let mut yp = y.clone();
            xp.rotate_left(shift);
            yp.rotate_left(shift);
            let cp = gram(&k, &xp, Exec::Sequential).unwrap().complexity(&yp).unwrap();
            prop_assert!((c - cp).abs() <= 1e-8 * c.max(1.0));
        }
    }
}
