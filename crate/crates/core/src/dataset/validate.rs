use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{
    manifest_dir, parse_header, read_lines, DatasetError, ManifestHeader, ManifestRow, Split,
};
use crate::config::{ObjectClass, Scenario};
use crate::groundtruth::DensityMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    MalformedHeader,
    MalformedLine,
    DuplicateId,
    IdMismatch,
    MissingFile,
    UndecodableImage,
    DimensionMismatch,
    LabelMismatch,
    CountOutOfRange,
    BoxOutOfBounds,
    BoxCountMismatch,
    InvalidDensity,
    DanglingParent,
}

impl ViolationKind {
    pub fn describe(self) -> &'static str {
        match self {
            ViolationKind::MalformedHeader => "malformed header",
            ViolationKind::MalformedLine => "malformed line",
            ViolationKind::DuplicateId => "duplicate id",
            ViolationKind::IdMismatch => "id mismatch",
            ViolationKind::MissingFile => "missing file",
            ViolationKind::UndecodableImage => "undecodable image",
            ViolationKind::DimensionMismatch => "dimension mismatch",
            ViolationKind::LabelMismatch => "label mismatch",
            ViolationKind::CountOutOfRange => "count out of range",
            ViolationKind::BoxOutOfBounds => "box out of bounds",
            ViolationKind::BoxCountMismatch => "box/count mismatch",
            ViolationKind::InvalidDensity => "invalid density map",
            ViolationKind::DanglingParent => "dangling parent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub line: usize,
    pub image_id: Option<String>,
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}", self.line)?;
        if let Some(id) = &self.image_id {
            write!(f, " [{id}]")?;
        }
        write!(f, ": {}: {}", self.kind.describe(), self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub manifest: PathBuf,
    pub rows_checked: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        write!(
            f,
            "{}: {} rows checked, {} violation(s)",
            self.manifest.display(),
            self.rows_checked,
            self.violations.len()
        )
    }
}

/// Checks every row of a manifest and itemizes all violations found.
///
/// Only an unreadable manifest file is an error; everything else ends up in
/// the report.
pub fn validate_manifest(path: &Path) -> Result<ValidationReport, DatasetError> {
    let lines = read_lines(path)?;
    let root = manifest_dir(path);
    let mut report = ValidationReport {
        manifest: path.to_path_buf(),
        rows_checked: 0,
        violations: Vec::new(),
    };
    let mut push = |line: usize, id: Option<&str>, kind: ViolationKind, message: String| {
        report.violations.push(Violation {
            line,
            image_id: id.map(str::to_string),
            kind,
            message,
        })
    };

    let mut iter = lines.into_iter();
    let header = match iter.next() {
        None => {
            push(
                1,
                None,
                ViolationKind::MalformedHeader,
                "empty manifest".into(),
            );
            None
        }
        Some((n, text)) => match parse_header(&text) {
            Ok(h) => Some(h),
            Err(e) => {
                push(n, None, ViolationKind::MalformedHeader, e);
                None
            }
        },
    };

    let mut rows: Vec<(usize, ManifestRow)> = Vec::new();
    for (n, text) in iter {
        match serde_json::from_str::<ManifestRow>(&text) {
            Ok(r) => rows.push((n, r)),
            Err(e) => push(n, None, ViolationKind::MalformedLine, e.to_string()),
        }
    }

    let ids: HashSet<&str> = rows.iter().map(|(_, r)| r.image_id.as_str()).collect();
    let mut first_seen: HashMap<&str, usize> = HashMap::new();
    for (n, row) in &rows {
        let id = Some(row.image_id.as_str());
        if let Some(prev) = first_seen.insert(&row.image_id, *n) {
            push(
                *n,
                id,
                ViolationKind::DuplicateId,
                format!("also on line {prev}"),
            );
            first_seen.insert(&row.image_id, prev);
        }
        if row.ground_truth.image_id != row.image_id {
            push(
                *n,
                id,
                ViolationKind::IdMismatch,
                format!("ground truth names {}", row.ground_truth.image_id),
            );
        }
        if let Some(p) = &row.parent_id {
            if !ids.contains(p.as_str()) {
                push(
                    *n,
                    id,
                    ViolationKind::DanglingParent,
                    format!("parent {p} not in manifest"),
                );
            }
        }
        check_files(&root, row, header.as_ref(), &mut |k, m| push(*n, id, k, m));
        if let Some(h) = &header {
            check_labels(row, h, &mut |k, m| push(*n, id, k, m));
        }
    }
    report.rows_checked = rows.len();
    Ok(report)
}

fn check_files(
    root: &Path,
    row: &ManifestRow,
    header: Option<&ManifestHeader>,
    push: &mut dyn FnMut(ViolationKind, String),
) {
    let dims = header.map(|h| (h.image_width, h.image_height));
    let path = root.join(&row.path);
    if !path.is_file() {
        push(
            ViolationKind::MissingFile,
            format!("{} does not exist", path.display()),
        );
    } else {
        match image::open(&path) {
            Err(e) => push(
                ViolationKind::UndecodableImage,
                format!("{}: {e}", path.display()),
            ),
            Ok(img) => {
                let got = (img.width(), img.height());
                if let Some(want) = dims.filter(|&d| d != got) {
                    push(
                        ViolationKind::DimensionMismatch,
                        format!(
                            "{}x{} image, manifest says {}x{}",
                            got.0, got.1, want.0, want.1
                        ),
                    );
                }
            }
        }
    }
    if let Some(rel) = &row.ground_truth.density_ref {
        let dpath = root.join(rel);
        if !dpath.is_file() {
            push(
                ViolationKind::MissingFile,
                format!("{} does not exist", dpath.display()),
            );
        } else {
            match DensityMap::load(&dpath) {
                Err(e) => push(
                    ViolationKind::InvalidDensity,
                    format!("{}: {e}", dpath.display()),
                ),
                Ok(d) => {
                    if let Some(want) = dims.filter(|&w| w != (d.width, d.height)) {
                        push(
                            ViolationKind::InvalidDensity,
                            format!(
                                "{}x{} density map, expected {}x{}",
                                d.width, d.height, want.0, want.1
                            ),
                        );
                    } else if d.values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                        push(
                            ViolationKind::InvalidDensity,
                            "negative or non-finite cell".into(),
                        );
                    }
                }
            }
        }
    }
}

fn check_labels(
    row: &ManifestRow,
    header: &ManifestHeader,
    push: &mut dyn FnMut(ViolationKind, String),
) {
    let gt = &row.ground_truth;
    match header.scenario {
        Scenario::FireClassification => {
            if gt.class_label.is_none() || gt.house_count.is_some() {
                push(
                    ViolationKind::LabelMismatch,
                    "classification rows need class_label and no house_count".into(),
                );
            }
        }
        Scenario::HouseCounting => {
            if gt.house_count.is_none() || gt.class_label.is_some() {
                push(
                    ViolationKind::LabelMismatch,
                    "counting rows need house_count and no class_label".into(),
                );
            }
        }
    }
    if let Some(c) = gt.house_count {
        if c > header.max_count {
            push(
                ViolationKind::CountOutOfRange,
                format!("house_count {c} exceeds max_count {}", header.max_count),
            );
        }
    }
    let (w, h) = (header.image_width as f64, header.image_height as f64);
    for (i, b) in gt.boxes.iter().enumerate() {
        if !b.is_valid_within(w, h) {
            push(
                ViolationKind::BoxOutOfBounds,
                format!(
                    "box {i} ({}, {}, {}, {}) outside {w}x{h} or empty",
                    b.x_min, b.y_min, b.x_max, b.y_max
                ),
            );
        }
    }
    // Hand-labelled external rows may carry a count without boxes.
    let unboxed_external = row.split == Split::External && gt.boxes.is_empty();
    if let Some(c) = gt.house_count {
        let houses = gt
            .boxes
            .iter()
            .filter(|b| b.class == ObjectClass::House)
            .count();
        if !unboxed_external && houses != c as usize {
            push(
                ViolationKind::BoxCountMismatch,
                format!("house_count {c} but {houses} house boxes"),
            );
        }
    }
}
