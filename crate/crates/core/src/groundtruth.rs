//! Per-image supervision derived from a scene: class label or house count,
//! bounding boxes, and an optional count-density map.

use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{ObjectClass, Scenario};
use crate::geometry::{centroid, Aabb};
use crate::scene::SceneGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    Forest,
    Fire,
}

impl ClassLabel {
    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Forest => "forest",
            ClassLabel::Fire => "fire",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub class: ObjectClass,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn is_valid_within(&self, width: f64, height: f64) -> bool {
        self.x_min >= 0.0
            && self.y_min >= 0.0
            && self.x_max <= width
            && self.y_max <= height
            && self.x_min < self.x_max
            && self.y_min < self.y_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_label: Option<ClassLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub house_count: Option<u32>,
    #[serde(default)]
    pub boxes: Vec<BoundingBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_ref: Option<String>,
}

impl GroundTruth {
    pub fn house_boxes(&self) -> usize {
        self.boxes
            .iter()
            .filter(|b| b.class == ObjectClass::House)
            .count()
    }
}

/// Label, count and clipped axis-aligned boxes of every object in `scene`.
pub fn derive_ground_truth(scene: &SceneGraph, image_id: impl Into<String>) -> GroundTruth {
    let (w, h) = (scene.width as f64, scene.height as f64);
    let boxes = scene
        .objects
        .iter()
        .map(|o| {
            let b = Aabb::of_points(&o.footprint).clipped(w, h);
            BoundingBox {
                class: o.class,
                x_min: b.x_min,
                y_min: b.y_min,
                x_max: b.x_max,
                y_max: b.y_max,
            }
        })
        .collect();
    let (class_label, house_count) = match scene.scenario {
        Scenario::FireClassification => (
            Some(if scene.contains_fire {
                ClassLabel::Fire
            } else {
                ClassLabel::Forest
            }),
            None,
        ),
        Scenario::HouseCounting => (None, Some(scene.house_tally() as u32)),
    };
    GroundTruth {
        image_id: image_id.into(),
        class_label,
        house_count,
        boxes,
        density_ref: None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMap {
    pub width: u32,
    pub height: u32,
    pub sigma: f64,
    /// Row-major, non-negative.
    pub values: Vec<f32>,
}

pub const DENSITY_MAGIC: &[u8; 4] = b"AFDM";

impl DensityMap {
    pub fn zeros(width: u32, height: u32, sigma: f64) -> Self {
        Self {
            width,
            height,
            sigma,
            values: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum()
    }

    /// Sum over cells `[x0, x1) x [y0, y1)`.
    pub fn region_sum(&self, x0: u32, y0: u32, x1: u32, y1: u32) -> f64 {
        let mut acc = 0.0;
        for y in y0..y1.min(self.height) {
            for x in x0..x1.min(self.width) {
                acc += self.get(x, y) as f64;
            }
        }
        acc
    }

    /// Little-endian `AFDM` encoding: magic, u32 width, u32 height, f32 cells.
    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(DENSITY_MAGIC)?;
        out.write_all(&self.width.to_le_bytes())?;
        out.write_all(&self.height.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.values.len() * 4);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(12 + self.values.len() * 4);
        self.write_to(&mut buf)
            .expect("writing to a Vec cannot fail");
        buf
    }

    /// Decodes an `AFDM` stream. The kernel width is not stored, so `sigma` is 0.
    pub fn read_from<R: Read>(mut input: R) -> io::Result<Self> {
        let mut header = [0u8; 12];
        input.read_exact(&mut header)?;
        if &header[..4] != DENSITY_MAGIC {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "bad AFDM magic"));
        }
        let width = u32::from_le_bytes(header[4..8].try_into().unwrap());
        let height = u32::from_le_bytes(header[8..12].try_into().unwrap());
        let n = width as usize * height as usize;
        let mut body = Vec::with_capacity(n * 4);
        input.read_to_end(&mut body)?;
        if body.len() != n * 4 {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("AFDM body has {} bytes, expected {}", body.len(), n * 4),
            ));
        }
        let values = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            width,
            height,
            sigma: 0.0,
            values,
        })
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_bytes())
    }

    pub fn load(path: &Path) -> io::Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

/// One Gaussian per house at its footprint centroid, truncated at radius
/// `ceil(3σ)` and at the image border, then renormalized so every house
/// contributes exactly one unit of mass.
pub fn render_density_map(scene: &SceneGraph, sigma: f64) -> DensityMap {
    assert!(sigma > 0.0, "density sigma must be positive");
    let (w, h) = (scene.width, scene.height);
    let mut acc = vec![0.0f64; w as usize * h as usize];
    let radius = (3.0 * sigma).ceil();
    let two_s2 = 2.0 * sigma * sigma;
    let mut kernel: Vec<(usize, f64)> = Vec::new();
    for obj in scene
        .objects
        .iter()
        .filter(|o| o.class == ObjectClass::House)
    {
        let c = centroid(&obj.footprint);
        // Cells whose centers lie within the truncation radius along each axis.
        let x0 = ((c.x - 0.5 - radius).ceil()).max(0.0) as i64;
        let x1 = ((c.x - 0.5 + radius).floor()).min(w as f64 - 1.0) as i64;
        let y0 = ((c.y - 0.5 - radius).ceil()).max(0.0) as i64;
        let y1 = ((c.y - 0.5 + radius).floor()).min(h as f64 - 1.0) as i64;
        kernel.clear();
        let mut mass = 0.0;
        for y in y0..=y1 {
            let dy = y as f64 + 0.5 - c.y;
            for x in x0..=x1 {
                let dx = x as f64 + 0.5 - c.x;
                let v = (-(dx * dx + dy * dy) / two_s2).exp();
                mass += v;
                kernel.push((y as usize * w as usize + x as usize, v));
            }
        }
        if mass > 0.0 {
            for &(i, v) in &kernel {
                acc[i] += v / mass;
            }
        } else {
            // Degenerate: all mass into the nearest cell.
            let x = (c.x.floor().clamp(0.0, w as f64 - 1.0)) as usize;
            let y = (c.y.floor().clamp(0.0, h as f64 - 1.0)) as usize;
            acc[y * w as usize + x] += 1.0;
        }
    }
    DensityMap {
        width: w,
        height: h,
        sigma,
        values: acc.into_iter().map(|v| v as f32).collect(),
    }
}
