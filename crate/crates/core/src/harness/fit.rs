use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gravity::{generate_dataset, GravityInstance, SampleParams};
use crate::kernels::{Activation, DotProductKernel, KernelKind, McSpec};
use crate::par::{mix_seed, Exec};
use crate::regression::{
    fit_random_features, normalized_rmse, project_to_sphere, rmse, FeatureMap, KernelModel,
    ResultsRow, Standardizer, MAX_GRAM_N,
};

/// Bias variance of the `*-bias-net` models.
const BIAS_VAR: f64 = 1.0;

/// A model the harness can fit.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    /// Minimum-norm kernel interpolation on sphere-projected inputs.
    Kernel(KernelKind),
    /// One frozen random hidden layer with a minimum-norm top layer.
    Net { activation: Activation, bias: bool },
}

impl ModelSpec {
    pub fn relu_net() -> Self {
        ModelSpec::Net {
            activation: Activation::Relu,
            bias: false,
        }
    }

    pub fn relu_bias_net() -> Self {
        ModelSpec::Net {
            activation: Activation::Relu,
            bias: true,
        }
    }

    pub fn exp_net() -> Self {
        ModelSpec::Net {
            activation: Activation::Exponential,
            bias: false,
        }
    }

    /// The kernel column of a results row.
    fn kernel_name(&self) -> String {
        match self {
            ModelSpec::Kernel(kind) => kind.to_string(),
            ModelSpec::Net { activation, .. } => format!("{activation}-mc"),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Kernel(kind) => write!(f, "{kind}-kernel"),
            ModelSpec::Net { activation, bias } => {
                write!(f, "{activation}{}-net", if *bias { "-bias" } else { "" })
            }
        }
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kernel = |kind| Ok(ModelSpec::Kernel(kind));
        match s {
            "modified-relu-kernel" => kernel(KernelKind::ModifiedRelu),
            "gaussian-kernel" => kernel(KernelKind::GaussianOnSphere { radius: 1.0 }),
            "slow-decay-kernel" => kernel(KernelKind::SlowDecay { exponent: 2.0 }),
            "relu-mc-kernel" => kernel(KernelKind::MonteCarlo(McSpec::new(
                Activation::Relu,
                1000,
                1.0,
                0,
            ))),
            _ => {
                let (stem, bias) = match s.strip_suffix("-bias-net") {
                    Some(stem) => (stem, true),
                    None => (
                        s.strip_suffix("-net")
                            .ok_or_else(|| Error::invalid(format!("unknown model '{s}'")))?,
                        false,
                    ),
                };
                Ok(ModelSpec::Net {
                    activation: stem.parse()?,
                    bias,
                })
            }
        }
    }
}

/// Splits off the last 10% of `data` (at least one row) as the test set.
pub fn split_train_test(
    data: &[GravityInstance],
) -> Result<(&[GravityInstance], &[GravityInstance])> {
    if data.len() < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 rows to split into train and test, got {}",
            data.len()
        )));
    }
    let n_test = (data.len() / 10).max(1);
    Ok(data.split_at(data.len() - n_test))
}

fn rows_and_labels(data: &[GravityInstance]) -> (Vec<Vec<f64>>, Vec<f64>) {
    data.iter().map(|i| (i.features(), i.label)).unzip()
}

fn project_all(rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    rows.iter().map(|r| project_to_sphere(r)).collect()
}

/// Fits `model` on `train` and scores it on `test`.
///
/// Inputs are standardized with statistics of the training set. Kernel
/// models always project to the unit sphere; networks do so only with
/// `normalize_inputs`, and use weight variance `1/d` otherwise.
pub fn fit_split(
    model: &ModelSpec,
    train: &[GravityInstance],
    test: &[GravityInstance],
    width: usize,
    seed: u64,
    normalize_inputs: bool,
    exec: Exec,
) -> Result<ResultsRow> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid("train and test sets must be nonempty"));
    }
    let (x_train, y_train) = rows_and_labels(train);
    let (x_test, y_test) = rows_and_labels(test);
    let scaler = Standardizer::fit(&x_train)?;
    let x_train: Vec<Vec<f64>> = x_train.iter().map(|r| scaler.apply(r)).collect();
    let x_test: Vec<Vec<f64>> = x_test.iter().map(|r| scaler.apply(r)).collect();

    let mut row = ResultsRow {
        k: train[0].k(),
        model: model.to_string(),
        kernel: model.kernel_name(),
        n_train: train.len(),
        n_test: test.len(),
        width: None,
        seed: Some(seed),
        rmse: f64::NAN,
        normalized_rmse: f64::NAN,
        complexity: None,
        lambda0: None,
        rmse_std: None,
        normalized_rmse_std: None,
    };

    let pred = match model {
        ModelSpec::Kernel(kind) => {
            if train.len() > MAX_GRAM_N {
                return Err(Error::invalid(format!(
                    "kernel models support at most {MAX_GRAM_N} training rows, got {}",
                    train.len()
                )));
            }
            let kind = match kind {
                KernelKind::MonteCarlo(spec) => {
                    row.width = Some(width);
                    KernelKind::MonteCarlo(McSpec::new(spec.activation, width, spec.sigma_sq, seed))
                }
                other => other.clone(),
            };
            let (fitted, system) = KernelModel::fit(
                DotProductKernel::new(kind),
                project_all(&x_train)?,
                &y_train,
                exec,
            )?;
            row.complexity = Some(system.complexity(&y_train)?);
            row.lambda0 = Some(system.lambda_min());
            fitted.predict_many(&project_all(&x_test)?, exec)?
        }
        ModelSpec::Net { activation, bias } => {
            row.width = Some(width);
            let (x_train, x_test, sigma_sq) = if normalize_inputs {
                (project_all(&x_train)?, project_all(&x_test)?, 1.0)
            } else {
                let d = x_train[0].len() as f64;
                (x_train, x_test, 1.0 / d)
            };
            let map = FeatureMap::sample(
                x_train[0].len(),
                width,
                *activation,
                sigma_sq,
                bias.then_some(BIAS_VAR),
                seed,
            )?;
            let fitted = fit_random_features(map, &x_train, &y_train, exec)?;
            fitted.predict_many(&x_test, exec)?
        }
    };
    row.rmse = rmse(&pred, &y_test)?;
    row.normalized_rmse = normalized_rmse(&pred, &y_test)?;
    Ok(row)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub k_list: Vec<usize>,
    pub n_train: usize,
    pub n_test: usize,
    pub models: Vec<ModelSpec>,
    pub width: usize,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub params: SampleParams,
    pub normalize_inputs: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            k_list: vec![5, 10, 20],
            n_train: 50_000,
            n_test: 5_000,
            models: vec![
                ModelSpec::relu_net(),
                ModelSpec::relu_bias_net(),
                ModelSpec::exp_net(),
            ],
            width: 1000,
            seeds: vec![0, 1, 2],
            out: super::default_out_dir().join("sweep.csv"),
            params: SampleParams::default(),
            normalize_inputs: false,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_list.is_empty() || self.k_list.contains(&0) {
            return Err(Error::invalid("k_list must be nonempty with every k >= 1"));
        }
        if self.n_train == 0 || self.n_test == 0 || self.width == 0 {
            return Err(Error::invalid("n_train, n_test and width must be positive"));
        }
        if self.models.is_empty() {
            return Err(Error::invalid("at least one model is required"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("at least one seed is required"));
        }
        self.params.validate()
    }
}

/// One detail row per `(k, model, seed)`. The dataset of cell `(k, seed)`
/// is drawn from `mix_seed(seed, k)` and shared by all models.
pub fn run_sweep(config: &SweepConfig, exec: Exec) -> Result<Vec<ResultsRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    for &k in &config.k_list {
        for &seed in &config.seeds {
            let data = generate_dataset(
                k,
                config.n_train + config.n_test,
                mix_seed(seed, k as u64),
                &config.params,
                exec,
            )?;
            let (train, test) = data.split_at(config.n_train);
            let cells = exec.map_collect(config.models.len(), |i| {
                fit_split(
                    &config.models[i],
                    train,
                    test,
                    config.width,
                    seed,
                    config.normalize_inputs,
                    exec,
                )
            });
            for cell in cells {
                let row = cell?;
                log::info!(
                    "k={} {} seed={} nrmse={:.4}",
                    k,
                    row.model,
                    seed,
                    row.normalized_rmse
                );
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.len() > 1)
        .then(|| (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt());
    (mean, std)
}

/// Sorts detail rows by `(k, model, seed)` and follows each `(k, model)`
/// group with a `mean` row carrying the across-seed sample deviations.
pub fn aggregate(mut rows: Vec<ResultsRow>) -> Vec<ResultsRow> {
    rows.retain(|r| r.seed.is_some());
    rows.sort_by(|a, b| (a.k, &a.model, a.seed).cmp(&(b.k, &b.model, b.seed)));
    let mut out = Vec::with_capacity(rows.len() * 2);
    for group in rows.chunk_by(|a, b| a.k == b.k && a.model == b.model) {
        let pick = |f: fn(&ResultsRow) -> f64| group.iter().map(f).collect::<Vec<_>>();
        let (rmse, rmse_std) = mean_std(&pick(|r| r.rmse));
        let (nrmse, nrmse_std) = mean_std(&pick(|r| r.normalized_rmse));
        let opt_mean = |f: fn(&ResultsRow) -> Option<f64>| {
            group
                .iter()
                .map(f)
                .collect::<Option<Vec<f64>>>()
                .map(|v| mean_std(&v).0)
        };
        let first = &group[0];
        let summary = ResultsRow {
            seed: None,
            rmse,
            normalized_rmse: nrmse,
            complexity: opt_mean(|r| r.complexity),
            lambda0: opt_mean(|r| r.lambda0),
            rmse_std,
            normalized_rmse_std: nrmse_std,
            ..first.clone()
        };
        out.extend_from_slice(group);
        out.push(summary);
    }
    out
}
