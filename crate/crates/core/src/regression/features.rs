//! Single-hidden-layer networks with frozen Gaussian hidden weights and a
//! trained linear top layer.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernels::Activation;
use crate::par::{mix_seed, Exec};

/// Rows per feature block.
const BLOCK_ROWS: usize = 1024;
/// Fixed number of row groups whose normal-equation partial sums are
/// combined in order, so results do not depend on the thread count.
const ROW_GROUPS: usize = 8;
/// Above this many feature-matrix entries the top layer is fit from
/// accumulated normal equations instead of a full SVD.
const DIRECT_LIMIT: usize = 5_000_000;

/// Frozen hidden layer `x ↦ φ(W x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    /// `m × d`, entries `N(0, σ²)`.
    weights: DMatrix<f64>,
    bias: Option<DVector<f64>>,
    activation: Activation,
    sigma_sq: f64,
    seed: u64,
}

impl FeatureMap {
    /// Draws `W` (and `b ~ N(0, bias_var)` when requested) from `seed`.
    pub fn sample(
        input_dim: usize,
        width: usize,
        activation: Activation,
        sigma_sq: f64,
        bias_var: Option<f64>,
        seed: u64,
    ) -> Result<Self> {
        if width == 0 || input_dim == 0 {
            return Err(Error::invalid(
                "feature map needs width >= 1 and input dimension >= 1",
            ));
        }
        for v in std::iter::once(sigma_sq).chain(bias_var) {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "weight variance must be positive, got {v}"
                )));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0));
        let sd = sigma_sq.sqrt();
        let weights = DMatrix::from_fn(width, input_dim, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        });
        let bias = bias_var.map(|var| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 1));
            let sd = var.sqrt();
            DVector::from_fn(width, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            })
        });
        Ok(FeatureMap {
            weights,
            bias,
            activation,
            sigma_sq,
            seed,
        })
    }

    pub fn width(&self) -> usize {
        self.weights.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn check_rows(&self, rows: &[Vec<f64>]) -> Result<()> {
        for r in rows {
            if r.len() != self.input_dim() {
                return Err(Error::DimensionMismatch {
                    left: self.input_dim(),
                    right: r.len(),
                });
            }
        }
        Ok(())
    }

    /// Features of a block of rows, `rows.len() × m`.
    fn block(&self, rows: &[Vec<f64>]) -> DMatrix<f64> {
        let x = DMatrix::from_fn(rows.len(), self.input_dim(), |i, j| rows[i][j]);
        let mut h = x * self.weights.transpose();
        if let Some(b) = &self.bias {
            for (j, mut col) in h.column_iter_mut().enumerate() {
                col.add_scalar_mut(b[j]);
            }
        }
        let act = self.activation;
        h.apply(|v| *v = act.apply(*v));
        h
    }

    /// Full feature matrix `h`, one row per input.
    pub fn features(&self, rows: &[Vec<f64>], exec: Exec) -> Result<DMatrix<f64>> {
        self.check_rows(rows)?;
        let blocks = rows.len().div_ceil(BLOCK_ROWS);
        let parts = exec.map_collect(blocks, |b| {
            let lo = b * BLOCK_ROWS;
            self.block(&rows[lo..(lo + BLOCK_ROWS).min(rows.len())])
        });
        let mut h = DMatrix::zeros(rows.len(), self.width());
        for (b, part) in parts.into_iter().enumerate() {
            h.rows_mut(b * BLOCK_ROWS, part.nrows()).copy_from(&part);
        }
        warn_zero_rows(&h);
        Ok(h)
    }
}

fn warn_zero_rows(h: &DMatrix<f64>) {
    let zero = h.row_iter().filter(|r| r.iter().all(|v| *v == 0.0)).count();
    if zero > 0 {
        log::warn!("{zero} feature rows are identically zero; the top-layer fit is rank deficient");
    }
}

/// Samples a bias-free feature map and evaluates it on `rows`.
pub fn random_features(
    rows: &[Vec<f64>],
    width: usize,
    activation: Activation,
    sigma_sq: f64,
    seed: u64,
) -> Result<(FeatureMap, DMatrix<f64>)> {
    let d = rows.first().map_or(0, Vec::len);
    let map = FeatureMap::sample(d, width, activation, sigma_sq, None, seed)?;
    let h = map.features(rows, Exec::default())?;
    Ok((map, h))
}

/// Network `y = w · φ(W x + b)` with frozen hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomFeatureModel {
    map: FeatureMap,
    w: DVector<f64>,
}

impl RandomFeatureModel {
    pub fn new(map: FeatureMap, w: Vec<f64>) -> Result<Self> {
        if w.len() != map.width() {
            return Err(Error::DimensionMismatch {
                left: map.width(),
                right: w.len(),
            });
        }
        Ok(RandomFeatureModel {
            map,
            w: DVector::from_vec(w),
        })
    }

    pub fn map(&self) -> &FeatureMap {
        &self.map
    }

    pub fn weights(&self) -> &[f64] {
        self.w.as_slice()
    }

    /// `|w|²`.
    pub fn weight_norm_sq(&self) -> f64 {
        self.w.norm_squared()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict_many(std::slice::from_ref(&x.to_vec()), Exec::Sequential)?[0])
    }

    pub fn predict_many(&self, rows: &[Vec<f64>], exec: Exec) -> Result<Vec<f64>> {
        self.map.check_rows(rows)?;
        let blocks = rows.len().div_ceil(BLOCK_ROWS);
        let parts = exec.map_collect(blocks, |b| {
            let lo = b * BLOCK_ROWS;
            let h = self.map.block(&rows[lo..(lo + BLOCK_ROWS).min(rows.len())]);
            (h * &self.w).as_slice().to_vec()
        });
        Ok(parts.concat())
    }
}

/// Minimum-norm least-squares top layer for a precomputed feature matrix,
/// by SVD with relative cutoff `max(n, m) · ε`.
pub fn fit_top_layer(
    map: FeatureMap,
    features: &DMatrix<f64>,
    y: &[f64],
) -> Result<RandomFeatureModel> {
    if features.ncols() != map.width() {
        return Err(Error::DimensionMismatch {
            left: map.width(),
            right: features.ncols(),
        });
    }
    let w = min_norm_svd(features, y)?;
    RandomFeatureModel::new(map, w)
}

pub(crate) fn min_norm_svd(h: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    if h.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            left: h.nrows(),
            right: y.len(),
        });
    }
    let svd = SVD::new(h.clone(), true, true);
    let smax = svd.singular_values.max();
    let cutoff = smax * h.nrows().max(h.ncols()) as f64 * f64::EPSILON;
    let w = svd
        .solve(&DVector::from_column_slice(y), cutoff)
        .map_err(|e| Error::Unsupported(e.to_string()))?;
    Ok(w.as_slice().to_vec())
}

/// Fits the top layer on `rows`, choosing a full SVD for small problems and
/// row-block accumulation of `hᵀh`, `hᵀy` otherwise.
pub fn fit_random_features(
    map: FeatureMap,
    rows: &[Vec<f64>],
    y: &[f64],
    exec: Exec,
) -> Result<RandomFeatureModel> {
    if rows.len() != y.len() {
        return Err(Error::DimensionMismatch {
            left: rows.len(),
            right: y.len(),
        });
    }
    if rows.len() * map.width() <= DIRECT_LIMIT {
        let h = map.features(rows, exec)?;
        return fit_top_layer(map, &h, y);
    }
    map.check_rows(rows)?;
    let (gram, rhs) = normal_equations(&map, rows, y, exec);
    let w = pseudo_solve(gram, &rhs);
    RandomFeatureModel::new(map, w)
}

/// `(hᵀh, hᵀy)` accumulated over row blocks without materializing `h`.
fn normal_equations(
    map: &FeatureMap,
    rows: &[Vec<f64>],
    y: &[f64],
    exec: Exec,
) -> (DMatrix<f64>, DVector<f64>) {
    let m = map.width();
    let n = rows.len();
    let group_len = n.div_ceil(ROW_GROUPS);
    let partials = exec.map_collect(ROW_GROUPS, |g| {
        let mut gram = DMatrix::<f64>::zeros(m, m);
        let mut rhs = DVector::<f64>::zeros(m);
        let lo = (g * group_len).min(n);
        let hi = ((g + 1) * group_len).min(n);
        let mut zero_rows = 0usize;
        let mut start = lo;
        while start < hi {
            let end = (start + BLOCK_ROWS).min(hi);
            let h = map.block(&rows[start..end]);
            zero_rows += h.row_iter().filter(|r| r.iter().all(|v| *v == 0.0)).count();
            let ht = h.transpose();
            gram.gemm(1.0, &ht, &h, 1.0);
            rhs.gemv(1.0, &ht, &DVector::from_column_slice(&y[start..end]), 1.0);
            start = end;
        }
        (gram, rhs, zero_rows)
    });
    let mut gram = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    let mut zero_rows = 0;
    for (g, r, z) in partials {
        gram += g;
        rhs += r;
        zero_rows += z;
    }
    if zero_rows > 0 {
        log::warn!(
            "{zero_rows} feature rows are identically zero; the top-layer fit is rank deficient"
        );
    }
    (gram, rhs)
}

/// `G⁺ c` through the eigendecomposition of the symmetric `G`, dropping
/// eigenvalues below `m · ε · λ_max`.
fn pseudo_solve(gram: DMatrix<f64>, rhs: &DVector<f64>) -> Vec<f64> {
    let m = gram.nrows();
    let eig = SymmetricEigen::new(gram);
    let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let cutoff = lmax * m as f64 * f64::EPSILON;
    let proj = eig.eigenvectors.transpose() * rhs;
    let scaled = DVector::from_fn(m, |i, _| {
        let l = eig.eigenvalues[i];
        if l > cutoff {
            proj[i] / l
        } else {
            0.0
        }
    });
    (eig.eigenvectors * scaled).as_slice().to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub epochs: usize,
    /// `None` for full-batch gradient descent.
    pub batch_size: Option<usize>,
    /// Defaults to `1 / (2 λ_max(hᵀh / n))`.
    pub step: Option<f64>,
    /// Nesterov momentum with gradient restarts (full batch only).
    pub accelerated: bool,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            epochs: 5_000,
            batch_size: None,
            step: None,
            accelerated: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdOutcome {
    pub w: Vec<f64>,
    pub step: f64,
    /// `|h w − y| / |y|` after the last epoch.
    pub residual: f64,
}

/// Largest eigenvalue of `hᵀh / n`.
fn lambda_max_scaled(h: &DMatrix<f64>) -> f64 {
    let n = h.nrows() as f64;
    let small = if h.nrows() <= h.ncols() {
        h * h.transpose()
    } else {
        h.transpose() * h
    };
    SymmetricEigen::new(small)
        .eigenvalues
        .iter()
        .copied()
        .fold(0.0, f64::max)
        / n
}

pub fn relative_residual(h: &DMatrix<f64>, w: &[f64], y: &[f64]) -> f64 {
    let y = DVector::from_column_slice(y);
    let r = (h * DVector::from_column_slice(w) - &y).norm();
    let ny = y.norm();
    if ny == 0.0 {
        r
    } else {
        r / ny
    }
}

/// Gradient descent on the mean squared error `|h w − y|² / n`, from `w = 0`.
/// Every update lies in the row space of `h`, so on an underdetermined
/// problem the iterates approach the minimum-norm interpolant.
pub fn sgd_top_layer(h: &DMatrix<f64>, y: &[f64], config: &SgdConfig) -> Result<SgdOutcome> {
    let n = h.nrows();
    if n != y.len() {
        return Err(Error::DimensionMismatch {
            left: n,
            right: y.len(),
        });
    }
    if n == 0 {
        return Err(Error::invalid("no training rows"));
    }
    let step = match config.step {
        Some(s) => s,
        None => {
            let l = lambda_max_scaled(h);
            if l == 0.0 {
                return Err(Error::invalid("feature matrix is identically zero"));
            }
            1.0 / (2.0 * l)
        }
    };
    let yv = DVector::from_column_slice(y);
    let mut w = DVector::<f64>::zeros(h.ncols());
    match config.batch_size {
        None => {
            let ht = h.transpose();
            let scale = 2.0 * step / n as f64;
            let mut r = DVector::<f64>::zeros(n);
            let mut grad = DVector::<f64>::zeros(h.ncols());
            // Look-ahead point for the accelerated variant.
            let mut v = w.clone();
            let mut t = 1usize;
            for _ in 0..config.epochs {
                r.copy_from(&yv);
                r.gemv(1.0, h, &v, -1.0);
                grad.gemv(scale, &ht, &r, 0.0);
                let mut next = v.clone();
                next -= &grad;
                if config.accelerated {
                    // Restart the momentum when it points uphill.
                    let diff = &next - &w;
                    if grad.dot(&diff) > 0.0 {
                        t = 1;
                    }
                    let beta = (t as f64 - 1.0) / (t as f64 + 2.0);
                    v = &next + diff * beta;
                    t += 1;
                } else {
                    v.copy_from(&next);
                }
                w = next;
            }
        }
        Some(b) => {
            let b = b.clamp(1, n);
            let mut order: Vec<usize> = (0..n).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            for _ in 0..config.epochs {
                order.shuffle(&mut rng);
                for batch in order.chunks(b) {
                    let scale = 2.0 * step / batch.len() as f64;
                    let mut grad = DVector::<f64>::zeros(h.ncols());
                    for &i in batch {
                        let row = h.row(i);
                        let r = row.dot(&w.transpose()) - y[i];
                        grad.axpy(r, &row.transpose(), 1.0);
                    }
                    w.axpy(-scale, &grad, 1.0);
                }
            }
        }
    }
    let w = w.as_slice().to_vec();
    let residual = relative_residual(h, &w, y);
    Ok(SgdOutcome { w, step, residual })
}

/// Per-column standardization fitted on training inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    /// Columns with zero spread are centered but not scaled.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::invalid("cannot standardize an empty set"));
        };
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| if v > 0.0 { v.sqrt() } else { 1.0 })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// `x / |x|`.
pub fn project_to_sphere(x: &[f64]) -> Result<Vec<f64>> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Normalization(format!(
            "vector of norm {norm} has no direction"
        )));
    }
    Ok(x.iter().map(|v| v / norm).collect())
}
