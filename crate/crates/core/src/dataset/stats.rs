use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::DatasetManifest;
use crate::config::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineageStats {
    pub rows: usize,
    pub class_balance: BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_count: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub scenario: Scenario,
    pub total: usize,
    pub augmented: usize,
    pub splits: BTreeMap<String, usize>,
    pub class_balance: BTreeMap<String, usize>,
    pub count_histogram: BTreeMap<u32, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_count: Option<f64>,
    /// Keyed by `detail_version`; rows without one fall back to the header's.
    pub lineage: BTreeMap<String, LineageStats>,
    pub config_hashes: BTreeMap<String, usize>,
}

impl DatasetStats {
    pub fn class_fraction(&self, label: &str) -> f64 {
        let labelled: usize = self.class_balance.values().sum();
        if labelled == 0 {
            0.0
        } else {
            self.class_balance.get(label).copied().unwrap_or(0) as f64 / labelled as f64
        }
    }

    pub fn count_fraction(&self, count: u32) -> f64 {
        let counted: usize = self.count_histogram.values().sum();
        if counted == 0 {
            0.0
        } else {
            self.count_histogram.get(&count).copied().unwrap_or(0) as f64 / counted as f64
        }
    }
}

const UNKNOWN: &str = "unknown";

pub fn dataset_stats(manifest: &DatasetManifest) -> DatasetStats {
    let mut s = DatasetStats {
        scenario: manifest.header.scenario,
        total: manifest.rows.len(),
        augmented: 0,
        splits: BTreeMap::new(),
        class_balance: BTreeMap::new(),
        count_histogram: BTreeMap::new(),
        mean_count: None,
        lineage: BTreeMap::new(),
        config_hashes: BTreeMap::new(),
    };
    let mut count_sum = 0u64;
    let mut lineage_sums: BTreeMap<String, (u64, usize)> = BTreeMap::new();
    for row in &manifest.rows {
        let gt = &row.ground_truth;
        *s.splits.entry(row.split.to_string()).or_default() += 1;
        if row.parent_id.is_some() {
            s.augmented += 1;
        }
        let lineage = row
            .detail_version
            .clone()
            .or_else(|| manifest.header.detail_version.clone())
            .unwrap_or_else(|| UNKNOWN.to_string());
        let hash = row
            .config_hash
            .clone()
            .or_else(|| manifest.header.config_hash.clone())
            .unwrap_or_else(|| UNKNOWN.to_string());
        *s.config_hashes.entry(hash).or_default() += 1;
        let entry = s
            .lineage
            .entry(lineage.clone())
            .or_insert_with(|| LineageStats {
                rows: 0,
                class_balance: BTreeMap::new(),
                mean_count: None,
            });
        entry.rows += 1;
        if let Some(label) = gt.class_label {
            *s.class_balance.entry(label.name().to_string()).or_default() += 1;
            *entry
                .class_balance
                .entry(label.name().to_string())
                .or_default() += 1;
        }
        if let Some(c) = gt.house_count {
            *s.count_histogram.entry(c).or_default() += 1;
            count_sum += c as u64;
            let acc = lineage_sums.entry(lineage).or_default();
            acc.0 += c as u64;
            acc.1 += 1;
        }
    }
    let counted: usize = s.count_histogram.values().sum();
    if counted > 0 {
        s.mean_count = Some(count_sum as f64 / counted as f64);
    }
    for (name, (sum, n)) in lineage_sums {
        if let Some(l) = s.lineage.get_mut(&name) {
            l.mean_count = Some(sum as f64 / n as f64);
        }
    }
    s
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario: {}", self.scenario)?;
        writeln!(f, "images: {} ({} augmented)", self.total, self.augmented)?;
        let splits: Vec<String> = self
            .splits
            .iter()
            .map(|(k, v)| format!("{k} {v}"))
            .collect();
        writeln!(f, "splits: {}", splits.join(", "))?;
        if !self.class_balance.is_empty() {
            writeln!(f, "class balance:")?;
            for (label, n) in &self.class_balance {
                writeln!(
                    f,
                    "  {label:<8} {n:>7}  {:6.2}%",
                    100.0 * self.class_fraction(label)
                )?;
            }
        }
        if !self.count_histogram.is_empty() {
            writeln!(
                f,
                "house counts (mean {:.3}):",
                self.mean_count.unwrap_or(0.0)
            )?;
            for (c, n) in &self.count_histogram {
                writeln!(
                    f,
                    "  {c:>3} {n:>7}  {:6.2}%",
                    100.0 * self.count_fraction(*c)
                )?;
            }
        }
        writeln!(f, "lineage:")?;
        for (name, l) in &self.lineage {
            write!(f, "  {name}: {} rows", l.rows)?;
            for (label, n) in &l.class_balance {
                write!(f, ", {label} {n}")?;
            }
            if let Some(m) = l.mean_count {
                write!(f, ", mean count {m:.3}")?;
            }
            writeln!(f)?;
        }
        write!(f, "config hashes: {}", self.config_hashes.len())
    }
}
