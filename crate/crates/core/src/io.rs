//! Output files. Tables are tab-separated with a header row and floats in
//! shortest round-trip scientific notation, so identical runs give identical
//! bytes. Summaries are pretty-printed JSON with a `units` map. Wall-clock
//! data appears only in the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::correlation::CorrelationSeries;
use crate::ensemble::EnsembleResult;
use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::spectral::ScanRow;

pub const TRAJECTORY_COLUMNS: [&str; 11] = [
    "t", "re_psi_l", "im_psi_l", "re_psi_r", "im_psi_r", "n_l", "n_r", "pop_l", "pop_r", "re_theta", "im_theta",
];

pub const ENSEMBLE_COLUMNS: [&str; 8] = [
    "t", "mean_pop_l", "mean_pop_r", "re_mean_theta", "im_mean_theta", "mean_n_l", "mean_n_r", "mean_pt_residual",
];

pub const G1_COLUMNS: [&str; 4] = ["lag", "re_g1", "im_g1", "abs_g1"];

pub const SCAN_COLUMNS: [&str; 6] = ["gamma", "re_lambda_plus", "im_lambda_plus", "re_lambda_minus", "im_lambda_minus", "residual"];

/// Header row plus one line per row, cells separated by tabs.
pub fn table<I, R>(columns: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    let mut out = columns.join("\t");
    out.push('\n');
    for row in rows {
        for (k, v) in row.as_ref().iter().enumerate() {
            if k > 0 {
                out.push('\t');
            }
            write!(out, "{v:e}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn trajectory_table(traj: &Trajectory) -> String {
    table(
        &TRAJECTORY_COLUMNS,
        traj.states.iter().map(|s| {
            let theta = s.coherence();
            [
                s.t,
                s.psi_l.re,
                s.psi_l.im,
                s.psi_r.re,
                s.psi_r.im,
                s.n_l,
                s.n_r,
                s.pop_l(),
                s.pop_r(),
                theta.re(),
                theta.im(),
            ]
        }),
    )
}

pub fn ensemble_table(res: &EnsembleResult) -> String {
    table(
        &ENSEMBLE_COLUMNS,
        (0..res.times.len()).map(|k| {
            [
                res.times[k],
                res.mean_pop_l[k],
                res.mean_pop_r[k],
                res.mean_theta[k].re,
                res.mean_theta[k].im,
                res.mean_n_l[k],
                res.mean_n_r[k],
                res.mean_pt_residual[k],
            ]
        }),
    )
}

pub fn g1_table(series: &CorrelationSeries) -> String {
    table(
        &G1_COLUMNS,
        series.lags.iter().zip(&series.values).map(|(l, v)| [*l, v.re, v.im, v.norm()]),
    )
}

pub fn scan_table(rows: &[ScanRow]) -> String {
    table(
        &SCAN_COLUMNS,
        rows.iter()
            .map(|r| [r.gamma, r.re_plus, r.im_plus, r.re_minus, r.im_minus, r.residual]),
    )
}

/// Parses a table written by [`table`] back into its header and rows.
pub fn read_table(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Parse("empty table".into()))?
        .split('\t')
        .map(str::to_string)
        .collect();
    let rows = lines
        .enumerate()
        .map(|(k, line)| {
            let row = line
                .split('\t')
                .map(|c| c.parse::<f64>().map_err(|e| Error::Parse(format!("row {}: {c}: {e}", k + 1))))
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != header.len() {
                return Err(Error::Parse(format!("row {} has {} cells, expected {}", k + 1, row.len(), header.len())));
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok((header, rows))
}

/// JSON document `{ ..fields, "units": units }`.
pub fn summary<T: Serialize>(fields: &T, units: &[(&str, &str)]) -> Value {
    let mut doc = serde_json::to_value(fields).expect("summary fields serialize");
    let units: serde_json::Map<String, Value> =
        units.iter().map(|(k, u)| (k.to_string(), Value::from(*u))).collect();
    if let Value::Object(map) = &mut doc {
        map.insert("units".into(), Value::Object(units));
    }
    doc
}

pub fn error_record(err: &Error) -> Value {
    let kind = if err.is_numerical() {
        "numerical"
    } else if matches!(err, Error::Io(_)) {
        "io"
    } else {
        "validation"
    };
    json!({
        "kind": kind,
        "key": err.key(),
        "message": err.to_string(),
    })
}

/// Writes files into one output directory and remembers their names.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::Io(format!("{}: {e}", root.display())))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        if !self.written.iter().any(|n| n == name) {
            self.written.push(name.to_string());
        }
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, doc: &Value) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(doc).expect("json values serialize");
        text.push('\n');
        self.write_text(name, &text)
    }
}
