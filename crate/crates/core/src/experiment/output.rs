use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::batch::{ExperimentRecord, RoundRow};
use super::summary::SummaryStats;

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: row {row}: relative_error {found:?} does not match estimate and true_n ({expected:?})")]
    Inconsistent {
        path: PathBuf,
        row: usize,
        found: Option<f64>,
        expected: Option<f64>,
    },
}

/// Column names of a CSV row type, written even when there are no rows.
pub trait CsvRow: Serialize {
    const HEADER: &'static [&'static str];
}

impl CsvRow for ExperimentRecord {
    const HEADER: &'static [&'static str] = &[
        "scenario",
        "protocol",
        "seed",
        "topology_seed",
        "initial_n",
        "true_n",
        "estimate",
        "relative_error",
        "rounds_or_hops",
        "messages_sent",
        "completed_via",
        "wall_ticks",
    ];
}

impl CsvRow for SummaryStats {
    const HEADER: &'static [&'static str] = &[
        "scenario",
        "protocol",
        "runs",
        "failed",
        "censored",
        "mean_abs_rel_error",
        "median_abs_rel_error",
        "stddev_abs_rel_error",
        "bias",
        "mean_rounds_or_hops",
        "mean_true_n",
    ];
}

impl CsvRow for RoundRow {
    const HEADER: &'static [&'static str] = &[
        "scenario",
        "protocol",
        "seed",
        "round_index",
        "master",
        "cluster_size",
        "max_rel_error",
        "mass_sum",
    ];
}

/// Serializes `rows` after a header line. Output depends only on the rows.
pub fn write_csv<T: CsvRow, W: Write>(out: W, rows: &[T]) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(T::HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string<T: CsvRow>(rows: &[T]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows).expect("in-memory write");
    String::from_utf8(buf).expect("utf-8 csv")
}

pub fn emit_csv<T: CsvRow>(rows: &[T], path: &Path) -> Result<(), CsvError> {
    let file = std::fs::File::create(path).map_err(|source| CsvError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv(std::io::BufWriter::new(file), rows).map_err(|source| CsvError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CsvError> {
    let wrap = |source| CsvError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(wrap)?;
    r.deserialize().collect::<Result<Vec<T>, _>>().map_err(wrap)
}

/// Reads a record CSV, rejecting rows whose stored relative error
/// disagrees with their estimate and true size.
pub fn load_records(path: &Path) -> Result<Vec<ExperimentRecord>, CsvError> {
    let rows: Vec<ExperimentRecord> = read_rows(path)?;
    for (i, r) in rows.iter().enumerate() {
        let expected = r.signed_error().map(f64::abs);
        let ok = match (r.relative_error, expected) {
            (None, None) => true,
            (Some(a), Some(b)) => (a - b).abs() <= 1e-12 * b.abs().max(1.0),
            _ => false,
        };
        if !ok {
            return Err(CsvError::Inconsistent {
                path: path.to_path_buf(),
                row: i + 1,
                found: r.relative_error,
                expected,
            });
        }
    }
    Ok(rows)
}
