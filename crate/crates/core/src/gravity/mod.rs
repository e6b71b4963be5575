//! Newtonian forces and the synthetic k-body dataset.
//!
//! An instance holds a target body (index 0) and `k` sources in the unit
//! cube. Its label is the x-component of the force on the target, with
//! `G = 1`.

mod io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{mix_seed, Exec};

pub use io::{
    column_count, header, read_dataset, read_metadata, write_dataset, write_metadata,
    DatasetMetadata, Quantiles,
};

/// Consecutive rejections of one source before sampling gives up.
pub const MAX_REJECTIONS: usize = 10_000;

pub type Point = [f64; 3];

fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm_sq(v: &Point) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

/// `F_i = Σ_{j≠i} m_i m_j (x_j − x_i) / |x_j − x_i|³`.
pub fn force(positions: &[Point], masses: &[f64], i: usize) -> Result<Point> {
    if positions.len() != masses.len() {
        return Err(Error::DimensionMismatch {
            left: positions.len(),
            right: masses.len(),
        });
    }
    if i >= positions.len() {
        return Err(Error::invalid(format!(
            "body index {i} out of range for {} bodies",
            positions.len()
        )));
    }
    let xi = &positions[i];
    let mut f = [0.0; 3];
    for (j, (xj, mj)) in positions.iter().zip(masses).enumerate() {
        if j == i {
            continue;
        }
        let d = sub(xj, xi);
        let r2 = norm_sq(&d);
        if r2 == 0.0 {
            return Err(Error::CoincidentBodies {
                first: i,
                second: j,
            });
        }
        let s = masses[i] * mj / (r2 * r2.sqrt());
        for a in 0..3 {
            f[a] += s * d[a];
        }
    }
    Ok(f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleParams {
    /// Minimum target-to-source distance.
    pub min_dist: f64,
    pub mass_max: f64,
}

impl Default for SampleParams {
    fn default() -> Self {
        SampleParams {
            min_dist: 0.1,
            mass_max: 10.0,
        }
    }
}

impl SampleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_dist >= 0.0) || !self.min_dist.is_finite() {
            return Err(Error::invalid(format!(
                "min_dist must be nonnegative, got {}",
                self.min_dist
            )));
        }
        // Beyond half the cube side a corner target may have no admissible source.
        if self.min_dist > 0.5 {
            return Err(Error::GeometryInfeasible(format!(
                "min_dist {} exceeds 0.5; rejection sampling cannot be relied on",
                self.min_dist
            )));
        }
        if !(self.mass_max >= 0.0) || !self.mass_max.is_finite() {
            return Err(Error::invalid(format!(
                "mass_max must be nonnegative, got {}",
                self.mass_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GravityInstance {
    /// `positions[0]` is the target.
    pub positions: Vec<Point>,
    pub masses: Vec<f64>,
    /// x-component of the force on the target.
    pub label: f64,
}

impl GravityInstance {
    /// Builds an instance and computes its label.
    pub fn new(positions: Vec<Point>, masses: Vec<f64>) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::invalid(
                "an instance needs a target and at least one source",
            ));
        }
        let label = force(&positions, &masses, 0)?[0];
        Ok(GravityInstance {
            positions,
            masses,
            label,
        })
    }

    /// Number of source bodies.
    pub fn k(&self) -> usize {
        self.positions.len() - 1
    }

    /// `4(k+1)` features: `m, x, y, z` for the target, then each source.
    pub fn features(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(4 * self.positions.len());
        self.write_features(&mut out);
        out
    }

    pub(crate) fn write_features(&self, out: &mut Vec<f64>) {
        for (p, m) in self.positions.iter().zip(&self.masses) {
            out.push(*m);
            out.extend_from_slice(p);
        }
    }

    fn target_distances_sq(&self) -> impl Iterator<Item = f64> + '_ {
        let t = &self.positions[0];
        self.positions[1..].iter().map(move |p| norm_sq(&sub(p, t)))
    }

    /// Smallest target-to-source distance.
    pub fn r_min(&self) -> f64 {
        self.target_distances_sq()
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    /// Largest target-to-source distance.
    pub fn r_max(&self) -> f64 {
        self.target_distances_sq().fold(0.0, f64::max).sqrt()
    }

    /// `R = r_max / r_min`.
    pub fn distance_ratio(&self) -> f64 {
        self.r_max() / self.r_min()
    }
}

/// Draws one instance. Sources closer than `min_dist` to the target are
/// redrawn.
pub fn sample_instance(k: usize, seed: u64, params: &SampleParams) -> Result<GravityInstance> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let point = |rng: &mut ChaCha8Rng| -> Point { [rng.random(), rng.random(), rng.random()] };
    let target = point(&mut rng);
    let min_sq = params.min_dist * params.min_dist;
    let mut positions = Vec::with_capacity(k + 1);
    positions.push(target);
    for j in 1..=k {
        let mut rejections = 0;
        loop {
            let p = point(&mut rng);
            if norm_sq(&sub(&p, &target)) >= min_sq && p != target {
                positions.push(p);
                break;
            }
            rejections += 1;
            if rejections >= MAX_REJECTIONS {
                return Err(Error::GeometryInfeasible(format!(
                    "source {j} rejected {MAX_REJECTIONS} times in a row (min_dist {})",
                    params.min_dist
                )));
            }
        }
    }
    let masses = (0..=k)
        .map(|_| rng.random::<f64>() * params.mass_max)
        .collect();
    GravityInstance::new(positions, masses)
}

/// Instance `i` is drawn with seed `mix_seed(base_seed, i)`.
pub fn generate_dataset(
    k: usize,
    count: usize,
    base_seed: u64,
    params: &SampleParams,
    exec: Exec,
) -> Result<Vec<GravityInstance>> {
    exec.map_collect(count, |i| {
        sample_instance(k, mix_seed(base_seed, i as u64), params)
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled {
    pub instance: GravityInstance,
    /// Factor `c <= 1` applied to every coordinate.
    pub scale: f64,
    /// Factor `c^{-2}` applied to the label.
    pub label_factor: f64,
    /// Target-to-source `r_max²` after scaling.
    pub r_max_sq: f64,
    /// Whether `r_max² <= 2/k` holds after scaling.
    pub within_bound: bool,
}

/// Scales all positions so the stacked coordinate vector has norm at most 1.
pub fn rescale_instance(instance: &GravityInstance) -> Rescaled {
    let total: f64 = instance.positions.iter().map(norm_sq).sum::<f64>().sqrt();
    let scale = if total > 1.0 { 1.0 / total } else { 1.0 };
    let positions: Vec<Point> = instance
        .positions
        .iter()
        .map(|p| [p[0] * scale, p[1] * scale, p[2] * scale])
        .collect();
    let label_factor = 1.0 / (scale * scale);
    let scaled = GravityInstance {
        positions,
        masses: instance.masses.clone(),
        label: instance.label * label_factor,
    };
    let r_max_sq = scaled.r_max().powi(2);
    let within_bound = r_max_sq <= 2.0 / instance.k() as f64;
    Rescaled {
        instance: scaled,
        scale,
        label_factor,
        r_max_sq,
        within_bound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_masses_at_unit_distance() {
        let f = force(&[[0.0; 3], [1.0, 0.0, 0.0]], &[1.0, 1.0], 0).unwrap();
        assert_eq!(f, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn symmetric_configuration_cancels() {
        let pos = [[0.5, 0.5, 0.5], [0.2, 0.5, 0.5], [0.8, 0.5, 0.5]];
        let f = force(&pos, &[3.0, 2.0, 2.0], 0).unwrap();
        assert!(f.iter().all(|c| c.abs() < 1e-12), "{f:?}");
    }

    #[test]
    fn coincident_bodies_rejected() {
        let err = force(&[[0.1; 3], [0.1; 3]], &[1.0, 1.0], 0).unwrap_err();
        assert!(matches!(
            err,
            Error::CoincidentBodies {
                first: 0,
                second: 1
            }
        ));
    }

    #[test]
    fn sampling_is_deterministic_and_respects_constraints() {
        let p = SampleParams::default();
        let a = sample_instance(7, 99, &p).unwrap();
        assert_eq!(a, sample_instance(7, 99, &p).unwrap());
        assert_ne!(a, sample_instance(7, 100, &p).unwrap());
        assert!(a.r_min() >= 0.1);
        assert!(a
            .positions
            .iter()
            .flatten()
            .all(|c| (0.0..=1.0).contains(c)));
        assert!(a.masses.iter().all(|m| (0.0..=10.0).contains(m)));
        assert_eq!(a.features().len(), 4 * 8);
    }

    #[test]
    fn single_source_respects_min_dist() {
        for seed in 0..200 {
            assert!(
                sample_instance(1, seed, &SampleParams::default())
                    .unwrap()
                    .r_min()
                    >= 0.1
            );
        }
    }

    #[test]
    fn infeasible_geometry_reported() {
        let p = SampleParams {
            min_dist: 0.6,
            mass_max: 10.0,
        };
        assert!(matches!(
            sample_instance(3, 1, &p),
            Err(Error::GeometryInfeasible(_))
        ));
        assert!(sample_instance(0, 1, &SampleParams::default()).is_err());
    }

    #[test]
    fn dataset_independent_of_execution_policy() {
        let p = SampleParams::default();
        let a = generate_dataset(5, 64, 3, &p, Exec::Sequential).unwrap();
        let b = generate_dataset(5, 64, 3, &p, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[10], sample_instance(5, mix_seed(3, 10), &p).unwrap());
    }

    #[test]
    fn coordinates_uniform_by_ks() {
        // Target x-coordinates of 10^5 instances against U[0, 1].
        let p = SampleParams::default();
        let n = 100_000;
        let mut xs: Vec<f64> = generate_dataset(1, n, 11, &p, Exec::Parallel)
            .unwrap()
            .iter()
            .map(|inst| inst.positions[0][0])
            .collect();
        xs.sort_by(f64::total_cmp);
        let nf = n as f64;
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, x)| (x - i as f64 / nf).max((i + 1) as f64 / nf - x))
            .fold(0.0, f64::max);
        let critical = 1.628 / nf.sqrt();
        assert!(d < critical, "KS statistic {d} >= {critical}");
    }

    #[test]
    fn rescale_examples() {
        let small =
            GravityInstance::new(vec![[0.1, 0.0, 0.0], [0.0, 0.2, 0.0]], vec![1.0, 1.0]).unwrap();
        let r = rescale_instance(&small);
        assert_eq!(r.scale, 1.0);
        assert_eq!(r.instance, small);

        let big = sample_instance(5, 4, &SampleParams::default()).unwrap();
        let r = rescale_instance(&big);
        assert!(r.scale < 1.0);
        let total: f64 = r.instance.positions.iter().map(norm_sq).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let recomputed = force(&r.instance.positions, &r.instance.masses, 0).unwrap()[0];
        assert!((recomputed - r.instance.label).abs() <= 1e-12 * recomputed.abs());
    }

    #[test]
    fn rescale_bound_check_rarely_fails() {
        // r_max² <= 2/k is not implied by the normalization, but holds for the
        // overwhelming majority of sampled instances.
        let p = SampleParams::default();
        for k in [5, 20] {
            let data = generate_dataset(k, 1000, 17, &p, Exec::Parallel).unwrap();
            let mut violations = 0;
            for inst in &data {
                let r = rescale_instance(inst);
                assert_eq!(r.within_bound, r.r_max_sq <= 2.0 / k as f64);
                violations += usize::from(!r.within_bound);
            }
            assert!(violations < 20, "k={k}: {violations} violations");
        }
    }

    /// `Σ_j m_0 m_j / r_0j²`, the scale of rounding error in `force(.., 0)`.
    fn contribution_scale(pos: &[Point], masses: &[f64]) -> f64 {
        (1..pos.len())
            .map(|j| masses[0] * masses[j] / norm_sq(&sub(&pos[j], &pos[0])))
            .sum()
    }

    fn point() -> impl Strategy<Value = Point> {
        [-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64]
    }

    proptest! {
        #[test]
        fn forces_sum_to_zero(pos in prop::collection::vec(point(), 2..8), seed in 0u64..1000) {
            let masses: Vec<f64> = (0..pos.len()).map(|i| 0.1 + ((seed + i as u64) % 7) as f64).collect();
            let mut total = [0.0; 3];
            let mut scale = 0.0f64;
            for i in 0..pos.len() {
                let Ok(f) = force(&pos, &masses, i) else { return Ok(()) };
                for a in 0..3 {
                    total[a] += f[a];
                }
                let mut rotated = pos.clone();
                rotated.swap(0, i);
                let mut m = masses.clone();
                m.swap(0, i);
                scale = scale.max(contribution_scale(&rotated, &m));
            }
            for c in total {
                prop_assert!(c.abs() <= 1e-10 * scale.max(1.0));
            }
        }

        #[test]
        fn translation_invariant(pos in prop::collection::vec(point(), 2..6), shift in point()) {
            let masses = vec![1.5; pos.len()];
            let Ok(f) = force(&pos, &masses, 0) else { return Ok(()) };
            let moved: Vec<Point> = pos.iter().map(|p| [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]]).collect();
            let g = force(&moved, &masses, 0).unwrap();
            let tol = 1e-9 * contribution_scale(&pos, &masses);
            for a in 0..3 {
                prop_assert!((f[a] - g[a]).abs() <= tol);
            }
        }

        #[test]
        fn inverse_square_scaling(pos in prop::collection::vec(point(), 2..6), c in 0.1..10.0f64) {
            let masses = vec![2.0; pos.len()];
            let Ok(f) = force(&pos, &masses, 0) else { return Ok(()) };
            let scaled: Vec<Point> = pos.iter().map(|p| [p[0] * c, p[1] * c, p[2] * c]).collect();
            let g = force(&scaled, &masses, 0).unwrap();
            let tol = 1e-12 * contribution_scale(&scaled, &masses);
            for a in 0..3 {
                prop_assert!((g[a] - f[a] / (c * c)).abs() <= tol);
            }
        }
    }
}
