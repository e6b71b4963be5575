use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::write_atomic;

/// One fitted model's scores. Aggregate rows have `seed = None` (written as
/// `mean`) and carry the across-seed standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsRow {
    pub k: usize,
    pub model: String,
    pub kernel: String,
    pub n_train: usize,
    pub n_test: usize,
    pub width: Option<usize>,
    pub seed: Option<u64>,
    pub rmse: f64,
    pub normalized_rmse: f64,
    pub complexity: Option<f64>,
    pub lambda0: Option<f64>,
    pub rmse_std: Option<f64>,
    pub normalized_rmse_std: Option<f64>,
}

const COLUMNS: [&str; 13] = [
    "k",
    "model",
    "kernel",
    "n_train",
    "n_test",
    "width",
    "seed",
    "rmse",
    "normalized_rmse",
    "complexity",
    "lambda0",
    "rmse_std",
    "normalized_rmse_std",
];

pub fn results_header() -> String {
    COLUMNS.join(",")
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_f(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.10e}")).unwrap_or_default()
}

impl ResultsRow {
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        write!(
            s,
            "{},{},{},{},{},{},{},{:.10e},{:.10e},{},{},{},{}",
            self.k,
            self.model,
            self.kernel,
            self.n_train,
            self.n_test,
            opt(self.width),
            self.seed
                .map_or_else(|| "mean".to_string(), |v| v.to_string()),
            self.rmse,
            self.normalized_rmse,
            opt_f(self.complexity),
            opt_f(self.lambda0),
            opt_f(self.rmse_std),
            opt_f(self.normalized_rmse_std),
        )
        .expect("writing to a String");
        s
    }

    fn parse(line: &str, lineno: usize, path: &Path) -> Result<Self> {
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message,
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != COLUMNS.len() {
            return Err(err(format!(
                "expected {} columns, found {}",
                COLUMNS.len(),
                f.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            f[i].parse()
                .map_err(|_| err(format!("{}: not a number: '{}'", COLUMNS[i], f[i])))
        };
        let int = |i: usize| -> Result<usize> {
            f[i].parse()
                .map_err(|_| err(format!("{}: not an integer: '{}'", COLUMNS[i], f[i])))
        };
        let opt_num = |i: usize| -> Result<Option<f64>> {
            if f[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        Ok(ResultsRow {
            k: int(0)?,
            model: f[1].to_string(),
            kernel: f[2].to_string(),
            n_train: int(3)?,
            n_test: int(4)?,
            width: if f[5].is_empty() { None } else { Some(int(5)?) },
            seed: match f[6] {
                "mean" => None,
                s => Some(s.parse().map_err(|_| err(format!("seed: '{s}'")))?),
            },
            rmse: num(7)?,
            normalized_rmse: num(8)?,
            complexity: opt_num(9)?,
            lambda0: opt_num(10)?,
            rmse_std: opt_num(11)?,
            normalized_rmse_std: opt_num(12)?,
        })
    }
}

pub fn write_results(rows: &[ResultsRow], path: &Path) -> Result<()> {
    let mut out = results_header();
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_results(path: &Path) -> Result<Vec<ResultsRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        None => return Ok(Vec::new()),
        Some((_, h)) if h == results_header() => {}
        Some(_) => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: "unrecognized results header".into(),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| ResultsRow::parse(l, i + 1, path))
        .collect()
}
