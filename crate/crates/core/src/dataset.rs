//! The flat training table: one row per resampled sample.

use std::fmt::Write as _;

use thiserror::Error;

use crate::ids::{CaseId, VesselId};
use crate::scalar::Real;
use crate::trace::VelocityTrace;

pub const DATASET_HEADER: &str = "time_s,velocity_m_per_s,case,vessel,heart_rate_bpm";
pub const DATASET_COLUMNS: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("cannot assemble a dataset from zero traces")]
    Empty,
    #[error("dataset row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("dataset header mismatch: expected `{DATASET_HEADER}`, found `{0}`")]
    Header(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetRow<T> {
    pub time: T,
    pub velocity: T,
    pub case: CaseId,
    pub vessel: VesselId,
    pub heart_rate: T,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset<T> {
    pub rows: Vec<DatasetRow<T>>,
}

impl<T: Real> Dataset<T> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), DATASET_COLUMNS)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(48 * (self.rows.len() + 1));
        out.push_str(DATASET_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.time, r.velocity, r.case, r.vessel, r.heart_rate
            )
            .expect("writing to a String cannot fail");
        }
        out
    }

    pub fn from_csv_str(content: &str) -> Result<Self, DatasetError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(content.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| DatasetError::Parse {
                row: 1,
                message: e.to_string(),
            })?
            .iter()
            .collect::<Vec<_>>()
            .join(",");
        if header != DATASET_HEADER {
            return Err(DatasetError::Header(header));
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| DatasetError::Parse {
                row: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let row = record.position().map_or(0, |p| p.line() as usize);
            let err = |message: String| DatasetError::Parse { row, message };
            let num = |i: usize| -> Result<T, DatasetError> {
                let v: T = record[i]
                    .parse()
                    .map_err(|_| err(format!("non-numeric `{}`", &record[i])))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(err(format!("non-finite `{}`", &record[i])))
                }
            };
            let parsed = DatasetRow {
                time: num(0)?,
                velocity: num(1)?,
                case: record[2].parse().map_err(|e| err(format!("{e}")))?,
                vessel: record[3].parse().map_err(|e| err(format!("{e}")))?,
                heart_rate: num(4)?,
            };
            if parsed.velocity < T::zero() {
                return Err(err("negative velocity".into()));
            }
            if parsed.heart_rate <= T::zero() {
                return Err(err("non-positive heart rate".into()));
            }
            rows.push(parsed);
        }
        Ok(Self { rows })
    }

    /// Splits the table back into contiguous traces: a new trace starts
    /// whenever metadata changes or time fails to increase.
    pub fn trace_segments(&self) -> Vec<&[DatasetRow<T>]> {
        let mut segments = Vec::new();
        let mut start = 0;
        for i in 1..=self.rows.len() {
            let boundary = i == self.rows.len() || {
                let (a, b) = (&self.rows[i - 1], &self.rows[i]);
                b.time <= a.time || a.vessel != b.vessel || a.case != b.case || a.heart_rate != b.heart_rate
            };
            if boundary {
                segments.push(&self.rows[start..i]);
                start = i;
            }
        }
        segments
    }
}

/// One row per sample per trace, in trace order.
pub fn assemble_dataset<T: Real>(traces: &[VelocityTrace<T>]) -> Result<Dataset<T>, DatasetError> {
    if traces.is_empty() {
        return Err(DatasetError::Empty);
    }
    let rows = traces
        .iter()
        .flat_map(|tr| {
            tr.times()
                .iter()
                .zip(tr.velocities())
                .map(move |(&time, &velocity)| DatasetRow {
                    time,
                    velocity,
                    case: tr.case,
                    vessel: tr.vessel,
                    heart_rate: tr.heart_rate(),
                })
        })
        .collect();
    Ok(Dataset { rows })
}
