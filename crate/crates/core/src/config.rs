//! Generator configuration: schema, validation, defaults and hashing.
//!
//! The JSON schema is documented field by field in `docs/config-schema.md`.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const DEFAULT_IMAGE_SIZE: u32 = 100;
pub const DEFAULT_MAX_COUNT: u32 = 38;
pub const DEFAULT_DENSITY_SIGMA: f64 = 3.0;
pub const MIN_IMAGE_SIZE: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    FireClassification,
    HouseCounting,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::FireClassification => "fire_classification",
            Scenario::HouseCounting => "house_counting",
        })
    }
}

/// Kinds of scene objects, listed in placement (and painting) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    Grass,
    Tree,
    Fence,
    Garden,
    Pool,
    House,
    SmokePlume,
    FireBlob,
}

impl ObjectClass {
    /// Bottom to top: flora, fences, gardens, pools, houses, smoke, fire.
    pub const PLACEMENT_ORDER: [ObjectClass; 8] = [
        ObjectClass::Grass,
        ObjectClass::Tree,
        ObjectClass::Fence,
        ObjectClass::Garden,
        ObjectClass::Pool,
        ObjectClass::House,
        ObjectClass::SmokePlume,
        ObjectClass::FireBlob,
    ];

    /// Stable index used to fork the class's random stream.
    pub const fn stream_index(self) -> u64 {
        match self {
            ObjectClass::House => 0,
            ObjectClass::Tree => 1,
            ObjectClass::Fence => 2,
            ObjectClass::Garden => 3,
            ObjectClass::Pool => 4,
            ObjectClass::Grass => 5,
            ObjectClass::SmokePlume => 6,
            ObjectClass::FireBlob => 7,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            ObjectClass::House => "house",
            ObjectClass::Tree => "tree",
            ObjectClass::Fence => "fence",
            ObjectClass::Garden => "garden",
            ObjectClass::Pool => "pool",
            ObjectClass::Grass => "grass",
            ObjectClass::SmokePlume => "smoke_plume",
            ObjectClass::FireBlob => "fire_blob",
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A scalar probability distribution. Every variant has a closed support
/// `[min, max]` reported by [`DistributionSpec::support`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    Constant {
        value: f64,
    },
    /// Inclusive integer range.
    UniformInt {
        min: i64,
        max: i64,
    },
    UniformReal {
        min: f64,
        max: f64,
    },
    /// Normal truncated to `[min, max]`: resampled up to 64 times, then clamped.
    Normal {
        mean: f64,
        stddev: f64,
        min: f64,
        max: f64,
    },
    Categorical {
        values: Vec<f64>,
        weights: Vec<f64>,
    },
}

impl DistributionSpec {
    pub fn constant(value: f64) -> Self {
        DistributionSpec::Constant { value }
    }

    pub fn uniform_int(min: i64, max: i64) -> Self {
        DistributionSpec::UniformInt { min, max }
    }

    pub fn uniform_real(min: f64, max: f64) -> Self {
        DistributionSpec::UniformReal { min, max }
    }

    /// `(min, max)` of the values this distribution can produce.
    pub fn support(&self) -> (f64, f64) {
        match self {
            DistributionSpec::Constant { value } => (*value, *value),
            DistributionSpec::UniformInt { min, max } => (*min as f64, *max as f64),
            DistributionSpec::UniformReal { min, max } => (*min, *max),
            DistributionSpec::Normal { min, max, .. } => (*min, *max),
            DistributionSpec::Categorical { values, weights } => values
                .iter()
                .zip(weights)
                .filter(|(_, w)| **w > 0.0)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (v, _)| {
                    (lo.min(*v), hi.max(*v))
                }),
        }
    }

    fn validate(&self, field: &str, errors: &mut Vec<FieldError>) {
        let mut push = |msg: String| errors.push(FieldError::new(field, msg));
        match self {
            DistributionSpec::Constant { value } => {
                if !value.is_finite() {
                    push("constant value must be finite".into());
                }
            }
            DistributionSpec::UniformInt { min, max } => {
                if min > max {
                    push(format!("uniform_int min {min} exceeds max {max}"));
                }
            }
            DistributionSpec::UniformReal { min, max } => {
                if !min.is_finite() || !max.is_finite() {
                    push("uniform_real bounds must be finite".into());
                } else if min > max {
                    push(format!("uniform_real min {min} exceeds max {max}"));
                }
            }
            DistributionSpec::Normal {
                mean,
                stddev,
                min,
                max,
            } => {
                if !mean.is_finite() || !min.is_finite() || !max.is_finite() {
                    push("normal mean and bounds must be finite".into());
                } else if min > max {
                    push(format!("normal min {min} exceeds max {max}"));
                }
                if !(stddev.is_finite() && *stddev >= 0.0) {
                    push(format!(
                        "normal stddev must be finite and >= 0, got {stddev}"
                    ));
                }
            }
            DistributionSpec::Categorical { values, weights } => {
                if values.is_empty() {
                    push("categorical needs at least one value".into());
                }
                if values.len() != weights.len() {
                    push(format!(
                        "categorical has {} values but {} weights",
                        values.len(),
                        weights.len()
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    push("categorical values must be finite".into());
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    push("categorical weights must be finite and non-negative".into());
                } else if !(weights.iter().sum::<f64>() > 0.0) {
                    push("categorical weights must sum to a positive value".into());
                }
            }
        }
    }

    /// Checks that the support lies within `[lo, hi]`.
    fn validate_support(&self, field: &str, lo: f64, hi: f64, errors: &mut Vec<FieldError>) {
        let (min, max) = self.support();
        if min < lo || max > hi {
            errors.push(FieldError::new(
                field,
                format!("support [{min}, {max}] must lie within [{lo}, {hi}]"),
            ));
        }
    }

    fn validate_positive_support(&self, field: &str, hi: f64, errors: &mut Vec<FieldError>) {
        let (min, max) = self.support();
        if !(min > 0.0) || max > hi {
            errors.push(FieldError::new(
                field,
                format!("support [{min}, {max}] must be positive and at most {hi}"),
            ));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaletteEntry {
    /// Base color, each channel in `[0, 255]`.
    pub rgb: [i32; 3],
    /// Per-channel uniform jitter `±jitter`, in `[0, 255]`.
    #[serde(default)]
    pub jitter: i32,
}

impl PaletteEntry {
    pub const fn new(rgb: [i32; 3], jitter: i32) -> Self {
        Self { rgb, jitter }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum OverlapPolicy {
    /// No positive-area intersection with same-class objects or occupied footprints.
    Forbid,
    /// Intersection-over-union with each of those footprints at most `max_iou`.
    AllowWithin { max_iou: f64 },
}

impl OverlapPolicy {
    pub const FREE: OverlapPolicy = OverlapPolicy::AllowWithin { max_iou: 1.0 };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectClassSpec {
    pub class: ObjectClass,
    /// Objects per image. Ignored for houses in the counting scenario, whose
    /// count comes from [`GeneratorConfig::count_distribution`].
    pub count: DistributionSpec,
    /// Footprint width in pixels (tree and pool diameters use `min(width, height)`).
    pub width: DistributionSpec,
    pub height: DistributionSpec,
    /// Rotation in degrees.
    pub rotation: DistributionSpec,
    pub palette: Vec<PaletteEntry>,
    pub opacity: DistributionSpec,
    pub overlap: OverlapPolicy,
    /// Later-placed classes must respect their overlap policy against this class.
    #[serde(default)]
    pub solid: bool,
    /// Keep the whole footprint inside the image, not only its anchor.
    #[serde(default)]
    pub fully_inside: bool,
    /// Gaussian blur applied to this class's layer before compositing; 0 = none.
    #[serde(default)]
    pub blur_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterSpec {
    GaussianBlur {
        sigma: f64,
    },
    /// 3x3 box filter.
    Smooth,
    /// Fixed unsharp mask, see `raster::filter`.
    EdgeEnhance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BackgroundSpec {
    Procedural {
        base_rgb: [i32; 3],
        /// Per-pixel uniform brightness noise `±noise_amplitude`.
        #[serde(default)]
        noise_amplitude: i32,
    },
    /// Real photos, chosen per image by the seeded stream and center-cropped
    /// and nearest-neighbor resized to the image size.
    Hybrid { directory: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub scenario: Scenario,
    #[serde(default = "default_size")]
    pub image_width: u32,
    #[serde(default = "default_size")]
    pub image_height: u32,
    #[serde(default)]
    pub master_seed: u64,
    pub object_specs: Vec<ObjectClassSpec>,
    #[serde(default)]
    pub filter_chain: Vec<FilterSpec>,
    pub background: BackgroundSpec,
    /// House count per image (counting scenario).
    pub count_distribution: DistributionSpec,
    #[serde(default = "default_max_count")]
    pub max_count: u32,
    /// Probability that a classification scene contains fire.
    #[serde(default = "default_fire_probability")]
    pub fire_probability: f64,
    /// Density-map kernel width in pixels.
    #[serde(default = "default_density_sigma")]
    pub density_sigma: f64,
    /// Free-text lineage tag for enrichment rounds of this config.
    #[serde(default)]
    pub detail_version: String,
}

fn default_size() -> u32 {
    DEFAULT_IMAGE_SIZE
}
fn default_max_count() -> u32 {
    DEFAULT_MAX_COUNT
}
fn default_fire_probability() -> f64 {
    0.5
}
fn default_density_sigma() -> f64 {
    DEFAULT_DENSITY_SIGMA
}

/// One offending field and what is wrong with it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config:\n{}", format_field_errors(.0))]
    Invalid(Vec<FieldError>),
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn format_field_errors(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(|e| format!("  - {e}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl ConfigError {
    /// Offending field paths, empty for parse and I/O errors.
    pub fn fields(&self) -> Vec<&str> {
        match self {
            ConfigError::Invalid(errors) => errors.iter().map(|e| e.field.as_str()).collect(),
            _ => Vec::new(),
        }
    }
}

impl GeneratorConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: GeneratorConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Canonical form: JSON with object keys sorted bytewise, no whitespace,
    /// numbers in shortest round-trip notation.
    pub fn canonical_json(&self) -> String {
        // serde_json::Value keeps object keys in a BTreeMap, so this sorts them.
        let value = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&value).expect("value serializes")
    }

    /// SHA-256 of [`canonical_json`](Self::canonical_json), as 64 lowercase hex digits.
    pub fn hash(&self) -> Result<String, ConfigError> {
        self.validate()?;
        Ok(sha256_hex(self.canonical_json().as_bytes()))
    }

    pub fn spec_for(&self, class: ObjectClass) -> Option<&ObjectClassSpec> {
        self.object_specs.iter().find(|s| s.class == class)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errors = Vec::new();
        let (w, h) = (self.image_width, self.image_height);
        if w < MIN_IMAGE_SIZE {
            errors.push(FieldError::new(
                "image_width",
                format!("must be at least {MIN_IMAGE_SIZE}, got {w}"),
            ));
        }
        if h < MIN_IMAGE_SIZE {
            errors.push(FieldError::new(
                "image_height",
                format!("must be at least {MIN_IMAGE_SIZE}, got {h}"),
            ));
        }
        if !(0.0..=1.0).contains(&self.fire_probability) {
            errors.push(FieldError::new(
                "fire_probability",
                format!("must lie in [0, 1], got {}", self.fire_probability),
            ));
        }
        if !(self.density_sigma.is_finite() && self.density_sigma > 0.0) {
            errors.push(FieldError::new(
                "density_sigma",
                format!("must be finite and > 0, got {}", self.density_sigma),
            ));
        }

        let before = errors.len();
        self.count_distribution
            .validate("count_distribution", &mut errors);
        if errors.len() == before {
            self.count_distribution.validate_support(
                "count_distribution",
                0.0,
                self.max_count as f64,
                &mut errors,
            );
        }

        for (i, spec) in self.object_specs.iter().enumerate() {
            let prefix = format!("object_specs[{i}]");
            if self.object_specs[..i].iter().any(|s| s.class == spec.class) {
                errors.push(FieldError::new(
                    format!("{prefix}.class"),
                    format!("duplicate spec for class {}", spec.class),
                ));
            }
            spec.validate(&prefix, w as f64, h as f64, &mut errors);
        }

        match self.scenario {
            Scenario::HouseCounting => {
                if self.spec_for(ObjectClass::House).is_none() {
                    errors.push(FieldError::new(
                        "object_specs",
                        "house_counting needs a house spec",
                    ));
                }
            }
            Scenario::FireClassification => {
                if self.fire_probability > 0.0 {
                    for class in [ObjectClass::FireBlob, ObjectClass::SmokePlume] {
                        if self.spec_for(class).is_none() {
                            errors.push(FieldError::new(
                                "object_specs",
                                format!("fire_classification needs a {class} spec"),
                            ));
                        }
                    }
                }
            }
        }

        for (i, filter) in self.filter_chain.iter().enumerate() {
            if let FilterSpec::GaussianBlur { sigma } = filter {
                if !(sigma.is_finite() && *sigma >= 0.0) {
                    errors.push(FieldError::new(
                        format!("filter_chain[{i}].sigma"),
                        format!("must be finite and >= 0, got {sigma}"),
                    ));
                }
            }
        }

        match &self.background {
            BackgroundSpec::Procedural {
                base_rgb,
                noise_amplitude,
            } => {
                validate_rgb("background.base_rgb", base_rgb, &mut errors);
                if !(0..=255).contains(noise_amplitude) {
                    errors.push(FieldError::new(
                        "background.noise_amplitude",
                        format!("must lie in [0, 255], got {noise_amplitude}"),
                    ));
                }
            }
            BackgroundSpec::Hybrid { directory } => {
                if directory.as_os_str().is_empty() {
                    errors.push(FieldError::new("background.directory", "must not be empty"));
                }
            }
        }

        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }
}

fn validate_rgb(field: &str, rgb: &[i32; 3], errors: &mut Vec<FieldError>) {
    if rgb.iter().any(|c| !(0..=255).contains(c)) {
        errors.push(FieldError::new(
            field,
            format!("channels must lie in [0, 255], got {rgb:?}"),
        ));
    }
}

impl ObjectClassSpec {
    fn validate(&self, prefix: &str, width: f64, height: f64, errors: &mut Vec<FieldError>) {
        let field = |name: &str| format!("{prefix}.{name}");

        let before = errors.len();
        self.count.validate(&field("count"), errors);
        if errors.len() == before {
            let (min, _) = self.count.support();
            if min < 0.0 {
                errors.push(FieldError::new(
                    field("count"),
                    "support must be non-negative",
                ));
            }
        }
        let before = errors.len();
        self.width.validate(&field("width"), errors);
        if errors.len() == before {
            self.width
                .validate_positive_support(&field("width"), width, errors);
        }
        let before = errors.len();
        self.height.validate(&field("height"), errors);
        if errors.len() == before {
            self.height
                .validate_positive_support(&field("height"), height, errors);
        }
        self.rotation.validate(&field("rotation"), errors);
        let before = errors.len();
        self.opacity.validate(&field("opacity"), errors);
        if errors.len() == before {
            self.opacity
                .validate_support(&field("opacity"), 0.0, 1.0, errors);
        }

        if self.palette.is_empty() {
            errors.push(FieldError::new(field("palette"), "must not be empty"));
        }
        for (j, entry) in self.palette.iter().enumerate() {
            validate_rgb(&field(&format!("palette[{j}].rgb")), &entry.rgb, errors);
            if !(0..=255).contains(&entry.jitter) {
                errors.push(FieldError::new(
                    field(&format!("palette[{j}].jitter")),
                    format!("must lie in [0, 255], got {}", entry.jitter),
                ));
            }
        }
        if let OverlapPolicy::AllowWithin { max_iou } = self.overlap {
            if !(0.0..=1.0).contains(&max_iou) {
                errors.push(FieldError::new(
                    field("overlap.max_iou"),
                    format!("must lie in [0, 1], got {max_iou}"),
                ));
            }
        }
        if !(self.blur_sigma.is_finite() && self.blur_sigma >= 0.0) {
            errors.push(FieldError::new(
                field("blur_sigma"),
                format!("must be finite and >= 0, got {}", self.blur_sigma),
            ));
        }
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    use std::fmt::Write;
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        write!(out, "{b:02x}").unwrap();
    }
    out
}

// Default scene recipes.

fn spec(
    class: ObjectClass,
    count: DistributionSpec,
    size: (f64, f64, f64, f64),
    rotation: DistributionSpec,
    palette: Vec<PaletteEntry>,
    opacity: (f64, f64),
    overlap: OverlapPolicy,
) -> ObjectClassSpec {
    ObjectClassSpec {
        class,
        count,
        width: DistributionSpec::uniform_real(size.0, size.1),
        height: DistributionSpec::uniform_real(size.2, size.3),
        rotation,
        palette,
        opacity: DistributionSpec::uniform_real(opacity.0, opacity.1),
        overlap,
        solid: false,
        fully_inside: false,
        blur_sigma: 0.0,
    }
}

fn any_angle() -> DistributionSpec {
    DistributionSpec::uniform_real(0.0, 180.0)
}

fn greens() -> Vec<PaletteEntry> {
    vec![
        PaletteEntry::new([34, 100, 34], 14),
        PaletteEntry::new([20, 70, 30], 10),
        PaletteEntry::new([60, 110, 45], 12),
    ]
}

impl GeneratorConfig {
    /// Forest scenes with smoke and fire on half of them.
    pub fn fire_default() -> Self {
        let mut smoke = spec(
            ObjectClass::SmokePlume,
            DistributionSpec::uniform_int(1, 3),
            (14.0, 30.0, 20.0, 45.0),
            DistributionSpec::Normal {
                mean: 0.0,
                stddev: 20.0,
                min: -60.0,
                max: 60.0,
            },
            vec![
                PaletteEntry::new([190, 190, 190], 20),
                PaletteEntry::new([120, 120, 125], 20),
            ],
            (0.5, 0.8),
            OverlapPolicy::FREE,
        );
        smoke.blur_sigma = 1.5;
        let mut fire = spec(
            ObjectClass::FireBlob,
            DistributionSpec::uniform_int(1, 4),
            (5.0, 14.0, 5.0, 14.0),
            any_angle(),
            vec![
                PaletteEntry::new([210, 40, 10], 25),
                PaletteEntry::new([240, 90, 0], 15),
            ],
            (0.85, 1.0),
            OverlapPolicy::FREE,
        );
        fire.blur_sigma = 1.5;

        GeneratorConfig {
            scenario: Scenario::FireClassification,
            image_width: DEFAULT_IMAGE_SIZE,
            image_height: DEFAULT_IMAGE_SIZE,
            master_seed: 0,
            object_specs: vec![
                spec(
                    ObjectClass::Grass,
                    DistributionSpec::uniform_int(2, 8),
                    (15.0, 45.0, 15.0, 45.0),
                    any_angle(),
                    vec![
                        PaletteEntry::new([70, 120, 50], 15),
                        PaletteEntry::new([95, 110, 55], 15),
                    ],
                    (0.3, 0.7),
                    OverlapPolicy::FREE,
                ),
                spec(
                    ObjectClass::Tree,
                    DistributionSpec::uniform_int(20, 60),
                    (4.0, 12.0, 4.0, 12.0),
                    any_angle(),
                    greens(),
                    (0.85, 1.0),
                    OverlapPolicy::FREE,
                ),
                smoke,
                fire,
            ],
            filter_chain: Vec::new(),
            background: BackgroundSpec::Procedural {
                base_rgb: [34, 85, 34],
                noise_amplitude: 10,
            },
            count_distribution: DistributionSpec::constant(0.0),
            max_count: DEFAULT_MAX_COUNT,
            fire_probability: 0.5,
            density_sigma: DEFAULT_DENSITY_SIGMA,
            detail_version: "fire-v1".into(),
        }
    }

    /// Urban scenes with 0 to 38 houses plus trees, grass, fences, gardens and pools.
    pub fn counting_default() -> Self {
        let mut house = spec(
            ObjectClass::House,
            DistributionSpec::constant(0.0),
            (6.0, 11.0, 5.0, 9.0),
            any_angle(),
            vec![
                PaletteEntry::new([170, 60, 45], 20),
                PaletteEntry::new([150, 150, 155], 20),
                PaletteEntry::new([200, 190, 170], 15),
                PaletteEntry::new([110, 70, 50], 15),
            ],
            (1.0, 1.0),
            OverlapPolicy::Forbid,
        );
        house.solid = true;
        house.fully_inside = true;

        let solid = |mut s: ObjectClassSpec| {
            s.solid = true;
            s
        };

        GeneratorConfig {
            scenario: Scenario::HouseCounting,
            image_width: DEFAULT_IMAGE_SIZE,
            image_height: DEFAULT_IMAGE_SIZE,
            master_seed: 0,
            object_specs: vec![
                spec(
                    ObjectClass::Grass,
                    DistributionSpec::uniform_int(2, 6),
                    (15.0, 40.0, 15.0, 40.0),
                    any_angle(),
                    vec![
                        PaletteEntry::new([95, 130, 60], 15),
                        PaletteEntry::new([120, 135, 80], 15),
                    ],
                    (0.3, 0.7),
                    OverlapPolicy::FREE,
                ),
                spec(
                    ObjectClass::Tree,
                    DistributionSpec::uniform_int(3, 15),
                    (4.0, 9.0, 4.0, 9.0),
                    any_angle(),
                    greens(),
                    (0.9, 1.0),
                    OverlapPolicy::FREE,
                ),
                solid(spec(
                    ObjectClass::Fence,
                    DistributionSpec::uniform_int(0, 3),
                    (10.0, 25.0, 1.0, 1.5),
                    any_angle(),
                    vec![PaletteEntry::new([90, 80, 70], 15)],
                    (0.8, 1.0),
                    OverlapPolicy::FREE,
                )),
                solid(spec(
                    ObjectClass::Garden,
                    DistributionSpec::uniform_int(0, 2),
                    (6.0, 14.0, 6.0, 12.0),
                    any_angle(),
                    vec![
                        PaletteEntry::new([80, 60, 35], 12),
                        PaletteEntry::new([70, 105, 40], 12),
                    ],
                    (0.9, 1.0),
                    OverlapPolicy::Forbid,
                )),
                solid(spec(
                    ObjectClass::Pool,
                    DistributionSpec::uniform_int(0, 2),
                    (3.0, 6.0, 3.0, 6.0),
                    any_angle(),
                    vec![PaletteEntry::new([60, 170, 220], 20)],
                    (1.0, 1.0),
                    OverlapPolicy::Forbid,
                )),
                house,
            ],
            filter_chain: Vec::new(),
            background: BackgroundSpec::Procedural {
                base_rgb: [128, 120, 100],
                noise_amplitude: 12,
            },
            count_distribution: DistributionSpec::uniform_int(0, DEFAULT_MAX_COUNT as i64),
            max_count: DEFAULT_MAX_COUNT,
            fire_probability: 0.0,
            density_sigma: DEFAULT_DENSITY_SIGMA,
            detail_version: "houses-v1".into(),
        }
    }

    pub fn default_for(scenario: Scenario) -> Self {
        match scenario {
            Scenario::FireClassification => Self::fire_default(),
            Scenario::HouseCounting => Self::counting_default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        GeneratorConfig::fire_default().validate().unwrap();
        GeneratorConfig::counting_default().validate().unwrap();
    }

    #[test]
    fn hash_is_deterministic_and_64_hex() {
        let c = GeneratorConfig::counting_default();
        let h = c.hash().unwrap();
        assert_eq!(h, c.hash().unwrap());
        assert_eq!(h.len(), 64);
        assert!(h
            .chars()
            .all(|ch| ch.is_ascii_hexdigit() && !ch.is_ascii_uppercase()));
    }

    #[test]
    fn fire_probability_change_changes_hash() {
        let a = GeneratorConfig::fire_default();
        let mut b = a.clone();
        b.fire_probability = 0.6;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
    }

    #[test]
    fn key_order_does_not_change_hash() {
        let c = GeneratorConfig::fire_default();
        // Reverse the top-level key order by hand.
        let value = serde_json::to_value(&c).unwrap();
        let obj = value.as_object().unwrap();
        let mut parts: Vec<String> = obj
            .iter()
            .map(|(k, v)| format!("{}: {}", serde_json::to_string(k).unwrap(), v))
            .collect();
        parts.reverse();
        let shuffled = format!("{{\n  {}\n}}", parts.join(",\n  "));
        let parsed = GeneratorConfig::from_json(&shuffled).unwrap();
        assert_eq!(parsed.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn small_images_are_rejected_per_field() {
        let mut c = GeneratorConfig::fire_default();
        c.image_width = 8;
        c.image_height = 15;
        let err = c.validate().unwrap_err();
        let fields = err.fields();
        assert!(fields.contains(&"image_width"));
        assert!(fields.contains(&"image_height"));
    }

    #[test]
    fn bad_fire_probability_is_rejected() {
        let mut c = GeneratorConfig::fire_default();
        c.fire_probability = 1.5;
        assert_eq!(c.validate().unwrap_err().fields(), vec!["fire_probability"]);
        assert!(c.hash().is_err());
    }

    #[test]
    fn count_support_beyond_max_count_is_rejected() {
        let mut c = GeneratorConfig::counting_default();
        c.count_distribution = DistributionSpec::uniform_int(0, 39);
        assert_eq!(
            c.validate().unwrap_err().fields(),
            vec!["count_distribution"]
        );
        c.max_count = 39;
        c.validate().unwrap();
    }

    #[test]
    fn distribution_invariants_are_checked() {
        let mut c = GeneratorConfig::counting_default();
        c.object_specs[0].count = DistributionSpec::Categorical {
            values: vec![1.0, 2.0],
            weights: vec![-1.0, 2.0],
        };
        c.object_specs[1].rotation = DistributionSpec::Normal {
            mean: 0.0,
            stddev: -1.0,
            min: -5.0,
            max: 5.0,
        };
        let err = c.validate().unwrap_err();
        assert_eq!(
            err.fields(),
            vec!["object_specs[0].count", "object_specs[1].rotation"]
        );
    }

    #[test]
    fn palette_and_size_invariants_are_checked() {
        let mut c = GeneratorConfig::counting_default();
        let house = c.object_specs.last_mut().unwrap();
        house.palette[0].rgb = [300, 0, 0];
        house.width = DistributionSpec::uniform_real(0.0, 5.0);
        house.height = DistributionSpec::uniform_real(2.0, 101.0);
        let fields: Vec<String> = c
            .validate()
            .unwrap_err()
            .fields()
            .into_iter()
            .map(String::from)
            .collect();
        assert!(fields.contains(&"object_specs[5].width".to_string()));
        assert!(fields.contains(&"object_specs[5].height".to_string()));
        assert!(fields.contains(&"object_specs[5].palette[0].rgb".to_string()));
    }

    #[test]
    fn filter_sigma_must_be_finite() {
        let mut c = GeneratorConfig::fire_default();
        c.filter_chain
            .push(FilterSpec::GaussianBlur { sigma: f64::NAN });
        c.filter_chain
            .push(FilterSpec::GaussianBlur { sigma: -1.0 });
        assert_eq!(
            c.validate().unwrap_err().fields(),
            vec!["filter_chain[0].sigma", "filter_chain[1].sigma"]
        );
    }

    #[test]
    fn duplicate_classes_are_rejected() {
        let mut c = GeneratorConfig::counting_default();
        let dup = c.object_specs[1].clone();
        c.object_specs.push(dup);
        assert!(c
            .validate()
            .unwrap_err()
            .fields()
            .contains(&"object_specs[6].class"));
    }

    #[test]
    fn json_round_trip() {
        for c in [
            GeneratorConfig::fire_default(),
            GeneratorConfig::counting_default(),
        ] {
            let back = GeneratorConfig::from_json(&c.to_json_pretty()).unwrap();
            assert_eq!(back, c);
        }
    }
}
