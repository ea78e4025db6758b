//! CSV result tables.
//!
//! Two schemas are used:
//!
//! * margin curves: `trial,method,surface,mode,quantile,perturbations,margin`
//! * budget summaries: `method,success_prob,budget_mean,budget_stderr`
//! * per-trial summaries: `trial,method,n_train,avg_training_neighbors,macro_f1,n_targets,n_exhausted`
//!
//! Missing or NaN margins are written as an empty field and read back as `None`.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A row type with a fixed CSV header.
pub trait CsvRecord: Serialize + DeserializeOwned {
    const HEADER: &'static [&'static str];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginRow {
    pub trial: usize,
    pub method: String,
    pub surface: String,
    pub mode: String,
    pub quantile: f64,
    pub perturbations: usize,
    #[serde(serialize_with = "nan_as_empty")]
    pub margin: Option<f64>,
}

impl CsvRecord for MarginRow {
    const HEADER: &'static [&'static str] = &[
        "trial",
        "method",
        "surface",
        "mode",
        "quantile",
        "perturbations",
        "margin",
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub method: String,
    pub success_prob: f64,
    pub budget_mean: f64,
    pub budget_stderr: f64,
}

impl CsvRecord for BudgetRow {
    const HEADER: &'static [&'static str] =
        &["method", "success_prob", "budget_mean", "budget_stderr"];
}

/// Clean-model statistics of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub method: String,
    pub n_train: usize,
    pub avg_training_neighbors: f64,
    pub macro_f1: f64,
    pub n_targets: usize,
    pub n_exhausted: usize,
}

impl CsvRecord for TrialRow {
    const HEADER: &'static [&'static str] = &[
        "trial",
        "method",
        "n_train",
        "avg_training_neighbors",
        "macro_f1",
        "n_targets",
        "n_exhausted",
    ];
}

fn nan_as_empty<S: serde::Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) if !x.is_nan() => s.serialize_some(x),
        _ => s.serialize_none(),
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `rows` with a header line; an empty table yields a header-only file.
pub fn write_results<T: CsvRecord>(rows: &[T], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err(path))?;
    w.write_record(T::HEADER).map_err(csv_err(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_results<T: CsvRecord>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(T::HEADER.iter().copied()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("unexpected header {:?}, want {:?}", header, T::HEADER),
        });
    }
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(csv_err(path))
}
