use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::{EvalError, PredictionSet};
use crate::config::Scenario;
use crate::dataset::{DatasetManifest, Split};
use crate::groundtruth::ClassLabel;

pub const DEFAULT_WORST_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classify,
    Count,
}

impl Task {
    pub fn scenario(self) -> Scenario {
        match self {
            Task::Classify => Scenario::FireClassification,
            Task::Count => Scenario::HouseCounting,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Confusion {
    pub fire_as_fire: usize,
    pub fire_as_forest: usize,
    pub forest_as_fire: usize,
    pub forest_as_forest: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountMetrics {
    pub mse: f64,
    pub mae: f64,
    pub rmse: f64,
}

impl CountMetrics {
    /// From `(prediction, truth)` pairs, accumulated in order.
    fn from_pairs(pairs: impl Iterator<Item = (f64, f64)>) -> Self {
        let (mut se, mut ae, mut n) = (0.0, 0.0, 0usize);
        for (p, t) in pairs {
            let e = p - t;
            se += e * e;
            ae += e.abs();
            n += 1;
        }
        let mse = se / n as f64;
        Self {
            mse,
            mae: ae / n as f64,
            rmse: mse.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub image_id: String,
    pub truth: f64,
    pub prediction: f64,
    /// `prediction − truth`.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub task: Task,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<Confusion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counting: Option<CountMetrics>,
    /// Metrics of predictions rounded half-to-even, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounded: Option<CountMetrics>,
    pub residuals: Vec<Residual>,
    pub worst: Vec<Residual>,
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let split = self.split.map_or("all".to_string(), |s| s.to_string());
        writeln!(f, "task: {:?}, split: {split}, n = {}", self.task, self.n)?;
        if let (Some(acc), Some(c)) = (self.accuracy, &self.confusion) {
            writeln!(f, "accuracy: {acc:.4}")?;
            writeln!(
                f,
                "confusion: fire->fire {}, fire->forest {}, forest->fire {}, forest->forest {}",
                c.fire_as_fire, c.fire_as_forest, c.forest_as_fire, c.forest_as_forest
            )?;
        }
        if let Some(m) = &self.counting {
            writeln!(
                f,
                "mse: {:.6}  mae: {:.6}  rmse: {:.6}",
                m.mse, m.mae, m.rmse
            )?;
        }
        if let Some(m) = &self.rounded {
            writeln!(
                f,
                "rounded mse: {:.6}  mae: {:.6}  rmse: {:.6}",
                m.mse, m.mae, m.rmse
            )?;
        }
        if !self.worst.is_empty() {
            writeln!(f, "worst {}:", self.worst.len())?;
            for r in &self.worst {
                writeln!(
                    f,
                    "  {}  truth {}  predicted {}  error {:+}",
                    r.image_id, r.truth, r.prediction, r.error
                )?;
            }
        }
        Ok(())
    }
}

/// Manifest rows in `split`, each paired with its prediction, in manifest order.
fn align<'a>(
    preds: &'a PredictionSet,
    manifest: &'a DatasetManifest,
    split: Option<Split>,
) -> Result<Vec<(&'a crate::dataset::ManifestRow, f64)>, EvalError> {
    let known: HashSet<&str> = manifest.rows.iter().map(|r| r.image_id.as_str()).collect();
    let mut by_id: HashMap<&str, f64> = HashMap::new();
    for e in &preds.entries {
        if !known.contains(e.image_id.as_str()) {
            return Err(EvalError::UnknownImageId(e.image_id.clone()));
        }
        if by_id.insert(&e.image_id, e.value).is_some() {
            return Err(EvalError::DuplicatePrediction(e.image_id.clone()));
        }
    }
    let mut out = Vec::new();
    for row in manifest.rows_in(split) {
        let p = by_id
            .get(row.image_id.as_str())
            .ok_or_else(|| EvalError::MissingPrediction(row.image_id.clone()))?;
        out.push((row, *p));
    }
    if out.is_empty() {
        return Err(EvalError::Mismatch(format!(
            "no manifest rows in split {}",
            split.map_or("(any)".to_string(), |s| s.to_string())
        )));
    }
    Ok(out)
}

fn check_scenario(manifest: &DatasetManifest, task: Task) -> Result<(), EvalError> {
    if manifest.header.scenario != task.scenario() {
        return Err(EvalError::Mismatch(format!(
            "task {task:?} does not match a {} manifest",
            manifest.header.scenario
        )));
    }
    Ok(())
}

pub fn evaluate_classification(
    preds: &PredictionSet,
    manifest: &DatasetManifest,
    split: Option<Split>,
    worst_k: usize,
) -> Result<MetricsReport, EvalError> {
    check_scenario(manifest, Task::Classify)?;
    let rows = align(preds, manifest, split)?;
    let mut confusion = Confusion::default();
    let mut residuals = Vec::with_capacity(rows.len());
    for (row, p) in rows {
        let predicted_fire = match p {
            v if v == 1.0 => true,
            v if v == 0.0 => false,
            v => {
                return Err(EvalError::Mismatch(format!(
                    "classification prediction for {} is {v}, expected fire/forest or 1/0",
                    row.image_id
                )))
            }
        };
        let truth_fire = match row.ground_truth.class_label {
            Some(ClassLabel::Fire) => true,
            Some(ClassLabel::Forest) => false,
            None => {
                return Err(EvalError::Mismatch(format!(
                    "{} has no class label",
                    row.image_id
                )))
            }
        };
        match (truth_fire, predicted_fire) {
            (true, true) => confusion.fire_as_fire += 1,
            (true, false) => confusion.fire_as_forest += 1,
            (false, true) => confusion.forest_as_fire += 1,
            (false, false) => confusion.forest_as_forest += 1,
        }
        let (t, p) = (truth_fire as u8 as f64, predicted_fire as u8 as f64);
        residuals.push(Residual {
            image_id: row.image_id.clone(),
            truth: t,
            prediction: p,
            error: p - t,
        });
    }
    let n = residuals.len();
    let correct = confusion.fire_as_fire + confusion.forest_as_forest;
    let worst = residuals
        .iter()
        .filter(|r| r.error != 0.0)
        .take(worst_k)
        .cloned()
        .collect();
    Ok(MetricsReport {
        task: Task::Classify,
        split,
        n,
        accuracy: Some(correct as f64 / n as f64),
        confusion: Some(confusion),
        counting: None,
        rounded: None,
        residuals,
        worst,
    })
}

pub fn evaluate_counting(
    preds: &PredictionSet,
    manifest: &DatasetManifest,
    split: Option<Split>,
    worst_k: usize,
    round: bool,
) -> Result<MetricsReport, EvalError> {
    check_scenario(manifest, Task::Count)?;
    let rows = align(preds, manifest, split)?;
    let mut residuals = Vec::with_capacity(rows.len());
    for (row, p) in rows {
        if p < 0.0 {
            return Err(EvalError::NegativePrediction(row.image_id.clone()));
        }
        let t =
            row.ground_truth.house_count.ok_or_else(|| {
                EvalError::Mismatch(format!("{} has no house count", row.image_id))
            })? as f64;
        residuals.push(Residual {
            image_id: row.image_id.clone(),
            truth: t,
            prediction: p,
            error: p - t,
        });
    }
    let counting = CountMetrics::from_pairs(residuals.iter().map(|r| (r.prediction, r.truth)));
    let rounded = round.then(|| {
        CountMetrics::from_pairs(
            residuals
                .iter()
                .map(|r| (r.prediction.round_ties_even(), r.truth)),
        )
    });
    let mut order: Vec<usize> = (0..residuals.len()).collect();
    // Stable: ties keep manifest order.
    order.sort_by(|&a, &b| {
        residuals[b]
            .error
            .abs()
            .total_cmp(&residuals[a].error.abs())
    });
    let worst = order
        .into_iter()
        .filter(|&i| residuals[i].error != 0.0)
        .take(worst_k)
        .map(|i| residuals[i].clone())
        .collect();
    Ok(MetricsReport {
        task: Task::Count,
        split,
        n: residuals.len(),
        accuracy: None,
        confusion: None,
        counting: Some(counting),
        rounded,
        residuals,
        worst,
    })
}

pub fn evaluate(
    task: Task,
    preds: &PredictionSet,
    manifest: &DatasetManifest,
    split: Option<Split>,
    worst_k: usize,
    round: bool,
) -> Result<MetricsReport, EvalError> {
    match task {
        Task::Classify => evaluate_classification(preds, manifest, split, worst_k),
        Task::Count => evaluate_counting(preds, manifest, split, worst_k, round),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ManifestHeader, ManifestRow};
    use crate::groundtruth::GroundTruth;

    fn manifest(scenario: Scenario, truths: &[f64]) -> DatasetManifest {
        DatasetManifest {
            header: ManifestHeader::new(scenario, 100, 100, 38),
            rows: truths
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let id = format!("img_{i:06}");
                    let (class_label, house_count) = match scenario {
                        Scenario::FireClassification => (
                            Some(if t == 1.0 {
                                ClassLabel::Fire
                            } else {
                                ClassLabel::Forest
                            }),
                            None,
                        ),
                        Scenario::HouseCounting => (None, Some(t as u32)),
                    };
                    ManifestRow {
                        image_id: id.clone(),
                        path: format!("images/{id}.png"),
                        image_seed: None,
                        split: if i % 4 == 3 { Split::Val } else { Split::Train },
                        ground_truth: GroundTruth {
                            image_id: id,
                            class_label,
                            house_count,
                            boxes: vec![],
                            density_ref: None,
                        },
                        config_hash: None,
                        detail_version: None,
                        parent_id: None,
                        augmentation: None,
                    }
                })
                .collect(),
        }
    }

    fn preds(values: &[f64]) -> PredictionSet {
        PredictionSet::from_pairs(
            values
                .iter()
                .enumerate()
                .map(|(i, &v)| (format!("img_{i:06}"), v)),
        )
    }

    #[test]
    fn perfect_and_inverted_classification() {
        let truths: Vec<f64> = (0..10).map(|i| (i % 2) as f64).collect();
        let m = manifest(Scenario::FireClassification, &truths);
        let r = evaluate_classification(&preds(&truths), &m, None, 10).unwrap();
        assert_eq!(r.accuracy, Some(1.0));
        assert!(r.worst.is_empty());
        let inv: Vec<f64> = truths.iter().map(|t| 1.0 - t).collect();
        let r = evaluate_classification(&preds(&inv), &m, None, 3).unwrap();
        assert_eq!(r.accuracy, Some(0.0));
        let c = r.confusion.unwrap();
        assert_eq!((c.fire_as_forest, c.forest_as_fire), (5, 5));
        assert_eq!(r.worst.len(), 3);
    }

    #[test]
    fn ninety_six_of_a_hundred() {
        let truths: Vec<f64> = (0..100).map(|i| (i < 50) as u8 as f64).collect();
        let mut p = truths.clone();
        for v in p.iter_mut().take(4) {
            *v = 0.0;
        }
        let m = manifest(Scenario::FireClassification, &truths);
        let r = evaluate_classification(&preds(&p), &m, None, 10).unwrap();
        assert_eq!(r.accuracy, Some(0.96));
        assert_eq!(r.confusion.unwrap().fire_as_forest, 4);
    }

    #[test]
    fn counting_offsets() {
        let truths = [0.0, 3.0, 7.0, 38.0];
        let m = manifest(Scenario::HouseCounting, &truths);
        let same = evaluate_counting(&preds(&truths), &m, None, 10, false).unwrap();
        let c = same.counting.unwrap();
        assert_eq!((c.mse, c.mae), (0.0, 0.0));
        let plus2: Vec<f64> = truths.iter().map(|t| t + 2.0).collect();
        let c = evaluate_counting(&preds(&plus2), &m, None, 10, false)
            .unwrap()
            .counting
            .unwrap();
        assert_eq!((c.mse, c.mae, c.rmse), (4.0, 2.0, 2.0));
    }

    #[test]
    fn rounding_is_reported_separately() {
        let m = manifest(Scenario::HouseCounting, &[2.0, 4.0]);
        let r = evaluate_counting(&preds(&[2.4, 4.5]), &m, None, 10, true).unwrap();
        let raw = r.counting.unwrap();
        assert!((raw.mse - (0.16 + 0.25) / 2.0).abs() < 1e-15);
        assert_eq!(r.rounded.unwrap().mse, 0.0);
    }

    #[test]
    fn worst_offenders_sorted_by_magnitude() {
        let m = manifest(Scenario::HouseCounting, &[5.0, 5.0, 5.0, 5.0]);
        let r = evaluate_counting(&preds(&[6.0, 0.0, 5.0, 9.0]), &m, None, 2, false).unwrap();
        let ids: Vec<&str> = r.worst.iter().map(|w| w.image_id.as_str()).collect();
        assert_eq!(ids, ["img_000001", "img_000003"]);
    }

    #[test]
    fn errors() {
        let m = manifest(Scenario::HouseCounting, &[1.0, 2.0]);
        assert!(matches!(
            evaluate_counting(&preds(&[1.0]), &m, None, 10, false),
            Err(EvalError::MissingPrediction(id)) if id == "img_000001"
        ));
        assert!(matches!(
            evaluate_counting(&preds(&[1.0, -0.5]), &m, None, 10, false),
            Err(EvalError::NegativePrediction(_))
        ));
        let extra =
            PredictionSet::from_pairs([("img_000000", 1.0), ("img_000001", 1.0), ("zzz", 1.0)]);
        assert!(matches!(
            evaluate_counting(&extra, &m, None, 10, false),
            Err(EvalError::UnknownImageId(id)) if id == "zzz"
        ));
        assert!(matches!(
            evaluate_classification(&preds(&[1.0, 0.0]), &m, None, 10),
            Err(EvalError::Mismatch(_))
        ));
    }

    #[test]
    fn split_filter_only_needs_that_split() {
        let m = manifest(
            Scenario::HouseCounting,
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
        );
        // Val rows are indices 3 and 7.
        let p = PredictionSet::from_pairs([("img_000003", 4.0), ("img_000007", 10.0)]);
        let r = evaluate_counting(&p, &m, Some(Split::Val), 10, false).unwrap();
        assert_eq!(r.n, 2);
        assert_eq!(r.counting.unwrap().mse, 2.0);
        assert!(evaluate_counting(&p, &m, Some(Split::Train), 10, false).is_err());
    }
}
