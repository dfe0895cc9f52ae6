use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::{
    encode_png, load_raster, manifest_dir, DatasetError, DatasetManifest, ManifestRow, Split,
    DENSITY_DIR, IMAGES_DIR,
};
use crate::groundtruth::{BoundingBox, DensityMap, GroundTruth};
use crate::raster::Raster;

/// Count- and class-preserving geometric transforms. Rotations are
/// counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AugmentOp {
    HFlip,
    VFlip,
    Rot90,
    Rot180,
    Rot270,
}

impl AugmentOp {
    pub const ALL: [AugmentOp; 5] = [
        AugmentOp::HFlip,
        AugmentOp::VFlip,
        AugmentOp::Rot90,
        AugmentOp::Rot180,
        AugmentOp::Rot270,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AugmentOp::HFlip => "hflip",
            AugmentOp::VFlip => "vflip",
            AugmentOp::Rot90 => "rot90",
            AugmentOp::Rot180 => "rot180",
            AugmentOp::Rot270 => "rot270",
        }
    }

    pub fn swaps_axes(self) -> bool {
        matches!(self, AugmentOp::Rot90 | AugmentOp::Rot270)
    }

    pub fn output_dims(self, width: u32, height: u32) -> (u32, u32) {
        if self.swaps_axes() {
            (height, width)
        } else {
            (width, height)
        }
    }

    /// Image of the continuous point `(x, y)` in a `w x h` image.
    pub fn map_point(self, x: f64, y: f64, w: f64, h: f64) -> (f64, f64) {
        match self {
            AugmentOp::HFlip => (w - x, y),
            AugmentOp::VFlip => (x, h - y),
            AugmentOp::Rot90 => (y, w - x),
            AugmentOp::Rot180 => (w - x, h - y),
            AugmentOp::Rot270 => (h - y, x),
        }
    }

    /// Source cell of output cell `(x, y)` in the transformed grid.
    fn source_cell(self, x: u32, y: u32, w: u32, h: u32) -> (u32, u32) {
        match self {
            AugmentOp::HFlip => (w - 1 - x, y),
            AugmentOp::VFlip => (x, h - 1 - y),
            AugmentOp::Rot90 => (w - 1 - y, x),
            AugmentOp::Rot180 => (w - 1 - x, h - 1 - y),
            AugmentOp::Rot270 => (y, h - 1 - x),
        }
    }

    fn remap<T: Copy>(self, src: &[T], w: u32, h: u32, channels: usize) -> Vec<T> {
        let (ow, oh) = self.output_dims(w, h);
        let mut out = Vec::with_capacity(src.len());
        for y in 0..oh {
            for x in 0..ow {
                let (sx, sy) = self.source_cell(x, y, w, h);
                let i = (sy as usize * w as usize + sx as usize) * channels;
                out.extend_from_slice(&src[i..i + channels]);
            }
        }
        out
    }

    pub fn apply_raster(self, raster: &Raster) -> Raster {
        let (w, h) = raster.dims();
        let (ow, oh) = self.output_dims(w, h);
        Raster::from_pixels(ow, oh, self.remap(raster.pixels(), w, h, 3)).expect("dims preserved")
    }

    pub fn apply_density(self, map: &DensityMap) -> DensityMap {
        let (ow, oh) = self.output_dims(map.width, map.height);
        DensityMap {
            width: ow,
            height: oh,
            sigma: map.sigma,
            values: self.remap(&map.values, map.width, map.height, 1),
        }
    }

    pub fn apply_box(self, b: &BoundingBox, w: u32, h: u32) -> BoundingBox {
        let (w, h) = (w as f64, h as f64);
        let (ax, ay) = self.map_point(b.x_min, b.y_min, w, h);
        let (bx, by) = self.map_point(b.x_max, b.y_max, w, h);
        BoundingBox {
            class: b.class,
            x_min: ax.min(bx),
            y_min: ay.min(by),
            x_max: ax.max(bx),
            y_max: ay.max(by),
        }
    }

    /// Ground truth of the transformed image: boxes mapped, labels kept.
    pub fn apply_ground_truth(
        self,
        gt: &GroundTruth,
        w: u32,
        h: u32,
        image_id: &str,
    ) -> GroundTruth {
        GroundTruth {
            image_id: image_id.to_string(),
            class_label: gt.class_label,
            house_count: gt.house_count,
            boxes: gt.boxes.iter().map(|b| self.apply_box(b, w, h)).collect(),
            density_ref: None,
        }
    }
}

impl fmt::Display for AugmentOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AugmentOp {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AugmentOp::ALL
            .into_iter()
            .find(|op| op.name() == s.trim())
            .ok_or_else(|| DatasetError::UnknownOp(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationSpec {
    pub ops: Vec<AugmentOp>,
    /// Total images per parent, the parent included.
    pub multiplier: u32,
}

impl AugmentationSpec {
    /// Parses a comma-separated op list such as `hflip,rot90`.
    pub fn parse(ops: &str, multiplier: u32) -> Result<Self, DatasetError> {
        let ops = ops
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { ops, multiplier })
    }
}

/// Adds `multiplier − 1` transformed copies of every original train row.
///
/// Copy `k` (1-based) of the `p`-th parent uses `ops[(p·(m−1) + k − 1) mod
/// len]` and is named `<parent>_aug<k>_<op>`. New images (and density maps,
/// when the parent has one) are written next to the originals.
pub fn augment_dataset(
    manifest: &DatasetManifest,
    manifest_path: &Path,
    spec: &AugmentationSpec,
) -> Result<DatasetManifest, DatasetError> {
    if spec.multiplier == 0 {
        return Err(DatasetError::InvalidArgument(
            "multiplier must be at least 1".into(),
        ));
    }
    if spec.multiplier > 1 && spec.ops.is_empty() {
        return Err(DatasetError::InvalidArgument(
            "no augmentation ops given".into(),
        ));
    }
    let (w, h) = (manifest.header.image_width, manifest.header.image_height);
    if w != h {
        if let Some(op) = spec.ops.iter().find(|op| op.swaps_axes()) {
            return Err(DatasetError::InvalidArgument(format!(
                "{op} would change the image shape of a {w}x{h} dataset"
            )));
        }
    }
    let root = manifest_dir(manifest_path);
    let mut ids: HashSet<String> = manifest.rows.iter().map(|r| r.image_id.clone()).collect();
    let mut out = manifest.clone();
    let per_parent = (spec.multiplier - 1) as usize;
    let parents = manifest
        .rows
        .iter()
        .filter(|r| r.split == Split::Train && r.parent_id.is_none());
    for (p, parent) in parents.enumerate() {
        if per_parent == 0 {
            break;
        }
        let image = load_raster(&root.join(&parent.path))?;
        let density = match &parent.ground_truth.density_ref {
            Some(rel) => {
                let path = root.join(rel);
                Some(DensityMap::load(&path).map_err(DatasetError::io(&path))?)
            }
            None => None,
        };
        for k in 1..=per_parent {
            let op = spec.ops[(p * per_parent + k - 1) % spec.ops.len()];
            let id = format!("{}_aug{k}_{op}", parent.image_id);
            if !ids.insert(id.clone()) {
                return Err(DatasetError::DuplicateId(id));
            }
            let (iw, ih) = image.dims();
            let rel = format!("{IMAGES_DIR}/{id}.png");
            let path = root.join(&rel);
            std::fs::write(&path, encode_png(&op.apply_raster(&image)))
                .map_err(DatasetError::io(&path))?;
            let mut gt = op.apply_ground_truth(&parent.ground_truth, iw, ih, &id);
            if let Some(d) = &density {
                let drel = format!("{DENSITY_DIR}/{id}.afdm");
                let dpath = root.join(&drel);
                std::fs::create_dir_all(root.join(DENSITY_DIR))
                    .map_err(DatasetError::io(&dpath))?;
                op.apply_density(d)
                    .save(&dpath)
                    .map_err(DatasetError::io(&dpath))?;
                gt.density_ref = Some(drel);
            }
            out.rows.push(ManifestRow {
                image_id: id,
                path: rel,
                image_seed: parent.image_seed,
                split: Split::Train,
                ground_truth: gt,
                config_hash: parent.config_hash.clone(),
                detail_version: parent.detail_version.clone(),
                parent_id: Some(parent.image_id.clone()),
                augmentation: Some(op.name().to_string()),
            });
        }
    }
    Ok(out)
}
