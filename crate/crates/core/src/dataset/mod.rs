//! Dataset directories: batch generation, the JSON Lines manifest, splitting,
//! augmentation, validation and summary statistics.

mod augment;
mod generate;
mod split;
mod stats;
mod validate;

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ExtendedColorType, ImageEncoder};
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, Scenario};
use crate::groundtruth::GroundTruth;
use crate::raster::{Raster, RenderError};
use crate::scene::SceneError;

pub use augment::{augment_dataset, AugmentOp, AugmentationSpec};
pub use generate::{generate_dataset, image_id_for, plan_fire_labels, GenerateOptions};
pub use split::{split_dataset, strata_for};
pub use stats::{dataset_stats, DatasetStats, LineageStats};
pub use validate::{validate_manifest, ValidationReport, Violation, ViolationKind};

pub const MANIFEST_FORMAT: &str = "aeroforge-manifest/1";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const IMAGES_DIR: &str = "images";
pub const DENSITY_DIR: &str = "density";

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("image {index} (seed {seed:#018x}): {source}")]
    Placement {
        index: usize,
        seed: u64,
        #[source]
        source: SceneError,
    },
    #[error("image {index} (seed {seed:#018x}): {source}")]
    Render {
        index: usize,
        seed: u64,
        #[source]
        source: RenderError,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{0}")]
    InvalidArgument(String),
    #[error("unknown augmentation op {0:?} (expected hflip, vflip, rot90, rot180 or rot270)")]
    UnknownOp(String),
    #[error("duplicate image id {0}")]
    DuplicateId(String),
}

impl DatasetError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| DatasetError::Io { path, source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
    External,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::Val, Split::Test, Split::External];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::External => "external",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Split::ALL
            .into_iter()
            .find(|sp| sp.name() == s)
            .ok_or_else(|| format!("unknown split {s:?} (expected train, val, test or external)"))
    }
}

/// First line of a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub format: String,
    pub scenario: Scenario,
    pub image_width: u32,
    pub image_height: u32,
    pub max_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
}

impl ManifestHeader {
    /// Header for a hand-assembled manifest, e.g. over external photos.
    pub fn new(scenario: Scenario, image_width: u32, image_height: u32, max_count: u32) -> Self {
        Self {
            format: MANIFEST_FORMAT.to_string(),
            scenario,
            image_width,
            image_height,
            max_count,
            config_hash: None,
            master_seed: None,
            tool_version: None,
            detail_version: None,
            created_at: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub image_id: String,
    /// Relative to the manifest's directory.
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_seed: Option<u64>,
    pub split: Split,
    pub ground_truth: GroundTruth,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmentation: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub header: ManifestHeader,
    pub rows: Vec<ManifestRow>,
}

impl DatasetManifest {
    pub fn row(&self, image_id: &str) -> Option<&ManifestRow> {
        self.rows.iter().find(|r| r.image_id == image_id)
    }

    pub fn rows_in(&self, split: Option<Split>) -> impl Iterator<Item = &ManifestRow> {
        self.rows
            .iter()
            .filter(move |r| split.map_or(true, |s| r.split == s))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&serde_json::to_string(row).expect("row serializes"));
            out.push('\n');
        }
        out
    }

    /// Strict parse: the first malformed line is an error.
    pub fn parse(text: &str, path: &Path) -> Result<Self, DatasetError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (hline, htext) = lines.next().ok_or_else(|| DatasetError::Malformed {
            path: path.to_path_buf(),
            line: 1,
            message: "empty manifest".into(),
        })?;
        let header = parse_header(htext).map_err(|message| DatasetError::Malformed {
            path: path.to_path_buf(),
            line: hline + 1,
            message,
        })?;
        let mut rows = Vec::new();
        for (i, l) in lines {
            let row = serde_json::from_str(l).map_err(|e| DatasetError::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(DatasetError::io(path))?;
        Self::parse(&text, path)
    }

    /// Writes through a temporary sibling file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        let tmp = path.with_extension("jsonl.tmp");
        std::fs::write(&tmp, self.to_jsonl()).map_err(DatasetError::io(&tmp))?;
        std::fs::rename(&tmp, path).map_err(DatasetError::io(path))
    }

    /// One CSV line per row for spreadsheet use.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "image_id",
            "path",
            "split",
            "class_label",
            "house_count",
            "boxes",
            "image_seed",
            "detail_version",
            "parent_id",
            "augmentation",
        ])?;
        for r in &self.rows {
            let gt = &r.ground_truth;
            w.write_record([
                r.image_id.clone(),
                r.path.clone(),
                r.split.to_string(),
                gt.class_label
                    .map(|c| c.name().to_string())
                    .unwrap_or_default(),
                gt.house_count.map(|c| c.to_string()).unwrap_or_default(),
                gt.boxes.len().to_string(),
                r.image_seed.map(|s| s.to_string()).unwrap_or_default(),
                r.detail_version.clone().unwrap_or_default(),
                r.parent_id.clone().unwrap_or_default(),
                r.augmentation.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn parse_header(text: &str) -> Result<ManifestHeader, String> {
    let header: ManifestHeader =
        serde_json::from_str(text).map_err(|e| format!("bad manifest header: {e}"))?;
    if header.format != MANIFEST_FORMAT {
        return Err(format!(
            "unsupported manifest format {:?} (expected {MANIFEST_FORMAT:?})",
            header.format
        ));
    }
    Ok(header)
}

/// Lines of a manifest file with 1-based line numbers, blank lines skipped.
pub(crate) fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, DatasetError> {
    let file = std::fs::File::open(path).map_err(DatasetError::io(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(DatasetError::io(path))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

/// Directory that row paths are relative to.
pub fn manifest_dir(manifest_path: &Path) -> PathBuf {
    match manifest_path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// PNG, 8-bit RGB, non-interlaced, fixed compression and filter settings.
pub fn encode_png(raster: &Raster) -> Vec<u8> {
    let mut buf = Vec::new();
    PngEncoder::new_with_quality(&mut buf, CompressionType::Default, FilterType::Adaptive)
        .write_image(
            raster.pixels(),
            raster.width(),
            raster.height(),
            ExtendedColorType::Rgb8,
        )
        .expect("encoding into memory cannot fail");
    buf
}

pub fn load_raster(path: &Path) -> Result<Raster, DatasetError> {
    let img = image::open(path).map_err(|source| DatasetError::Image {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(Raster::from_image(img.to_rgb8()))
}

/// RFC 3339 creation time, honouring `SOURCE_DATE_EPOCH` for reproducible builds.
pub(crate) fn creation_timestamp() -> String {
    let now = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0))
        .unwrap_or_else(chrono::Utc::now);
    now.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}
