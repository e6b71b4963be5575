//! Experiment commands shared by the CLI and the acceptance suite.
//!
//! Every command is a pure function of its options. Output files are
//! written to a temporary sibling and renamed into place, so a failed run
//! leaves no partial file behind.

mod fit;
mod spec;

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::gravity::{
    generate_dataset, write_dataset, write_metadata, DatasetMetadata, SampleParams,
};
use crate::kernels::{arccos_part_coeffs, asymptote_ratio, series_coeffs, KernelKind, MAX_PREFIX};
use crate::par::Exec;
use crate::regression::{read_results, write_results, ResultsRow};

pub use fit::{aggregate, fit_split, run_sweep, split_train_test, ModelSpec, SweepConfig};
pub use spec::{BoundRequest, BoundSpec, SeriesSpec};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "GRAVKERNEL_OUT_DIR";

/// Writes `bytes` to a temporary file beside `path`, then renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// `$GRAVKERNEL_OUT_DIR`, or the working directory.
pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Sidecar path `d.meta.json` for dataset `d.csv`.
pub fn metadata_path(data: &Path) -> PathBuf {
    data.with_extension("meta.json")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenDataOptions {
    pub k: usize,
    pub examples: usize,
    pub seed: u64,
    pub params: SampleParams,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenDataOutput {
    pub data: PathBuf,
    pub metadata: PathBuf,
    pub rows: usize,
}

pub fn cmd_gen_data(opts: &GenDataOptions, exec: Exec) -> Result<GenDataOutput> {
    let data_path = opts.out.clone().unwrap_or_else(|| {
        default_out_dir().join(format!(
            "gravity_k{}_n{}_s{}.csv",
            opts.k, opts.examples, opts.seed
        ))
    });
    let data = generate_dataset(opts.k, opts.examples, opts.seed, &opts.params, exec)?;
    let meta = DatasetMetadata::describe(opts.k, opts.seed, opts.params, &data);
    let meta_path = metadata_path(&data_path);
    write_dataset(&data, &data_path)?;
    write_metadata(&meta, &meta_path)?;
    Ok(GenDataOutput {
        data: data_path,
        metadata: meta_path,
        rows: data.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub data: PathBuf,
    pub model: ModelSpec,
    pub width: usize,
    pub seed: u64,
    pub normalize_inputs: bool,
    /// Results file; rows are appended to an existing one.
    pub out: Option<PathBuf>,
}

/// Fits on the first 90% of the rows and scores on the last 10%.
pub fn cmd_fit(opts: &FitOptions, exec: Exec) -> Result<ResultsRow> {
    let data = crate::gravity::read_dataset(&opts.data)?;
    let (train, test) = split_train_test(&data)?;
    let row = fit_split(
        &opts.model,
        train,
        test,
        opts.width,
        opts.seed,
        opts.normalize_inputs,
        exec,
    )?;
    if let Some(out) = &opts.out {
        let mut rows = if out.exists() {
            read_results(out)?
        } else {
            Vec::new()
        };
        rows.push(row.clone());
        write_results(&rows, out)?;
    }
    Ok(row)
}

/// Runs the sweep and writes detail and aggregate rows to `config.out`.
pub fn cmd_sweep(config: &SweepConfig, exec: Exec) -> Result<Vec<ResultsRow>> {
    let rows = aggregate(run_sweep(config, exec)?);
    write_results(&rows, &config.out)?;
    Ok(rows)
}

pub fn cmd_bounds(request: &BoundRequest) -> Result<crate::calculus::BoundDocument> {
    request.evaluate()
}

/// Coefficient table `k, b_k` (plus `arccos_coeff, rescaled` for the
/// modified-ReLU kernel, where `rescaled = A_k · 2√π · k^{3/2}` uses the
/// arccos-part coefficient `A_k`).
pub fn cmd_kernel_coeffs(kind: &KernelKind, k_max: usize, out: Option<&Path>) -> Result<String> {
    if k_max > MAX_PREFIX {
        return Err(Error::invalid(format!(
            "K_max must be at most {MAX_PREFIX}, got {k_max}"
        )));
    }
    let prefix = series_coeffs(kind, k_max)?;
    let extra = match kind {
        KernelKind::ModifiedRelu => {
            let part = arccos_part_coeffs(k_max);
            let rescaled = part
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, a)| asymptote_ratio(*a, k))
                .collect();
            vec![("arccos_coeff", part.coeffs), ("rescaled", rescaled)]
        }
        _ => Vec::new(),
    };
    let mut buf = Vec::new();
    prefix
        .write_table(&mut buf, &extra)
        .expect("writing to memory cannot fail");
    if let Some(path) = out {
        write_atomic(path, &buf)?;
    }
    Ok(String::from_utf8(buf).expect("ASCII table"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gen_data_is_byte_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let opts = GenDataOptions {
            k: 5,
            examples: 200,
            seed: 7,
            params: SampleParams::default(),
            out: Some(dir.path().join("a.csv")),
        };
        let a = cmd_gen_data(&opts, Exec::Parallel).unwrap();
        let b = cmd_gen_data(
            &GenDataOptions {
                out: Some(dir.path().join("b.csv")),
                ..opts.clone()
            },
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(
            std::fs::read(&a.data).unwrap(),
            std::fs::read(&b.data).unwrap()
        );
        assert_eq!(a.metadata, dir.path().join("a.meta.json"));
        let text = std::fs::read_to_string(&a.data).unwrap();
        assert_eq!(text.lines().count(), 201);
        assert!(text.lines().all(|l| l.split(',').count() == 25));
    }

    #[test]
    fn infeasible_generation_leaves_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("x.csv");
        let opts = GenDataOptions {
            k: 3,
            examples: 10,
            seed: 1,
            params: SampleParams {
                min_dist: 0.6,
                mass_max: 10.0,
            },
            out: Some(out.clone()),
        };
        assert!(matches!(
            cmd_gen_data(&opts, Exec::Parallel),
            Err(Error::GeometryInfeasible(_))
        ));
        assert!(!out.exists());
    }

    #[test]
    fn kernel_table_columns() {
        let t = cmd_kernel_coeffs(&KernelKind::ModifiedRelu, 20, None).unwrap();
        let lines: Vec<_> = t.lines().collect();
        assert_eq!(lines[0], "k,b_k,arccos_coeff,rescaled");
        assert_eq!(lines.len(), 22);
        let g = cmd_kernel_coeffs(&KernelKind::GaussianOnSphere { radius: 1.0 }, 5, None).unwrap();
        assert!(g.starts_with("k,b_k\n"));
        assert!(cmd_kernel_coeffs(&KernelKind::ModifiedRelu, MAX_PREFIX + 1, None).is_err());
    }
}
