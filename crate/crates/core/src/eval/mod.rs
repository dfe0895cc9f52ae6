//! Scoring prediction files against manifests and plotting training logs.

mod curves;
mod metrics;

use std::io::Read;
use std::path::PathBuf;

pub use curves::{export_curves, parse_training_log, render_svg, CurveExport, LogRow, TrainingLog};
pub use metrics::{
    evaluate, evaluate_classification, evaluate_counting, Confusion, CountMetrics, MetricsReport,
    Residual, Task, DEFAULT_WORST_K,
};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("no prediction for {0}")]
    MissingPrediction(String),
    #[error("prediction for unknown image id {0}")]
    UnknownImageId(String),
    #[error("negative prediction for {0}")]
    NegativePrediction(String),
    #[error("more than one prediction for {0}")]
    DuplicatePrediction(String),
    #[error("{0}")]
    Mismatch(String),
    #[error("training log has no rows")]
    EmptyLog,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionEntry {
    pub image_id: String,
    /// Count, or 1 for fire and 0 for forest.
    pub value: f64,
    pub line: u64,
}

/// Rows of a `image_id,prediction` CSV file with header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionSet {
    pub entries: Vec<PredictionEntry>,
}

impl PredictionSet {
    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        Self {
            entries: pairs
                .into_iter()
                .enumerate()
                .map(|(i, (id, value))| PredictionEntry {
                    image_id: id.into(),
                    value,
                    line: i as u64 + 2,
                })
                .collect(),
        }
    }

    /// Accepts `fire`/`forest` (any case) or numbers. Ids must be unique.
    pub fn parse<R: Read>(input: R) -> Result<Self, EvalError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = reader.headers().map_err(|e| EvalError::Malformed {
            line: 1,
            message: e.to_string(),
        })?;
        if headers.len() != 2 || &headers[0] != "image_id" || &headers[1] != "prediction" {
            return Err(EvalError::Malformed {
                line: 1,
                message: "expected header `image_id,prediction`".into(),
            });
        }
        let mut entries: Vec<PredictionEntry> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for record in reader.records() {
            let record = record.map_err(|e| EvalError::Malformed {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != 2 {
                return Err(EvalError::Malformed {
                    line,
                    message: format!("expected 2 fields, found {}", record.len()),
                });
            }
            let id = record[0].to_string();
            let raw = &record[1];
            let value = match raw.to_ascii_lowercase().as_str() {
                "fire" => 1.0,
                "forest" => 0.0,
                s => s
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| EvalError::Malformed {
                        line,
                        message: format!("invalid prediction {raw:?}"),
                    })?,
            };
            if !seen.insert(id.clone()) {
                return Err(EvalError::DuplicatePrediction(id));
            }
            entries.push(PredictionEntry {
                image_id: id,
                value,
                line,
            });
        }
        Ok(Self { entries })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, EvalError> {
        let file = std::fs::File::open(path).map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(file)
    }
}
