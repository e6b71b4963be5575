//! Dataset files: comma-separated rows `m_target,x_t,y_t,z_t, m_1,x_1,y_1,z_1,
//! ..., label_Fx` under a header, plus a JSON metadata sidecar.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GravityInstance, Point, SampleParams};
use crate::error::{Error, Result};
use crate::harness::write_atomic;

/// `4(k+1) + 1`.
pub fn column_count(k: usize) -> usize {
    4 * (k + 1) + 1
}

pub fn header(k: usize) -> String {
    let mut h = String::from("m_target,x_t,y_t,z_t");
    for j in 1..=k {
        write!(h, ",m_{j},x_{j},y_{j},z_{j}").expect("writing to a String");
    }
    h.push_str(",label_Fx");
    h
}

fn format_rows(instances: &[GravityInstance]) -> Result<String> {
    let Some(first) = instances.first() else {
        return Ok(String::new());
    };
    let k = first.k();
    let mut out = header(k);
    out.push('\n');
    for (i, inst) in instances.iter().enumerate() {
        if inst.k() != k {
            return Err(Error::invalid(format!(
                "instance {i} has k = {} but the file holds k = {k}",
                inst.k()
            )));
        }
        for (j, v) in inst.features().iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v:.16e}").expect("writing to a String");
        }
        write!(out, ",{:.16e}", inst.label).expect("writing to a String");
        out.push('\n');
    }
    Ok(out)
}

/// Writes all instances (same `k`) atomically. An empty slice gives an
/// empty file.
pub fn write_dataset(instances: &[GravityInstance], path: &Path) -> Result<()> {
    write_atomic(path, format_rows(instances)?.as_bytes())
}

/// Reads a file written by [`write_dataset`]. Labels are taken from the
/// file, not recomputed.
pub fn read_dataset(path: &Path) -> Result<Vec<GravityInstance>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_rows(&text, path)
}

fn parse_rows(text: &str, path: &Path) -> Result<Vec<GravityInstance>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let Some((hline, head)) = lines.next() else {
        return Ok(Vec::new());
    };
    let cols = head.split(',').count();
    if cols < column_count(1) || (cols - 1) % 4 != 0 {
        return Err(parse_err(
            hline + 1,
            format!("header has {cols} columns; expected 4(k+1)+1 for some k >= 1"),
        ));
    }
    let k = (cols - 1) / 4 - 1;
    if head.trim() != header(k) {
        return Err(parse_err(hline + 1, "unrecognized header".into()));
    }
    let mut out = Vec::new();
    let mut values = Vec::with_capacity(cols);
    for (idx, line) in lines {
        values.clear();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(idx + 1, format!("not a number: '{field}'")))?;
            values.push(v);
        }
        if values.len() != cols {
            return Err(parse_err(
                idx + 1,
                format!("expected {cols} columns, found {}", values.len()),
            ));
        }
        let mut positions: Vec<Point> = Vec::with_capacity(k + 1);
        let mut masses = Vec::with_capacity(k + 1);
        for body in values[..cols - 1].chunks_exact(4) {
            masses.push(body[0]);
            positions.push([body[1], body[2], body[3]]);
        }
        out.push(GravityInstance {
            positions,
            masses,
            label: values[cols - 1],
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
    pub max: f64,
}

impl Quantiles {
    /// Linear-interpolation quantiles; `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
        };
        Some(Quantiles {
            min: v[0],
            q05: q(0.05),
            median: q(0.5),
            q95: q(0.95),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub k: usize,
    pub count: usize,
    pub seed: u64,
    pub params: SampleParams,
    pub r_min: Option<Quantiles>,
    pub r_max: Option<Quantiles>,
    /// `r_max / r_min` per instance.
    pub distance_ratio: Option<Quantiles>,
}

impl DatasetMetadata {
    pub fn describe(
        k: usize,
        seed: u64,
        params: SampleParams,
        instances: &[GravityInstance],
    ) -> Self {
        let collect =
            |f: fn(&GravityInstance) -> f64| -> Vec<f64> { instances.iter().map(f).collect() };
        DatasetMetadata {
            k,
            count: instances.len(),
            seed,
            params,
            r_min: Quantiles::of(&collect(GravityInstance::r_min)),
            r_max: Quantiles::of(&collect(GravityInstance::r_max)),
            distance_ratio: Quantiles::of(&collect(GravityInstance::distance_ratio)),
        }
    }
}

pub fn write_metadata(meta: &DatasetMetadata, path: &Path) -> Result<()> {
    let mut json = serde_json::to_string_pretty(meta)?;
    json.push('\n');
    write_atomic(path, json.as_bytes())
}

pub fn read_metadata(path: &Path) -> Result<DatasetMetadata> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
