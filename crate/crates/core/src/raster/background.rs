//! Procedural backgrounds and real-photo (hybrid) backgrounds.

use std::path::{Path, PathBuf};

use super::{alpha_from_opacity, blend_channel, Raster, RenderError, Rgb};
use crate::config::BackgroundSpec;
use crate::seed::Stream;

const PHOTO_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "bmp", "gif", "tif", "tiff", "webp"];

/// Base color plus one uniform brightness offset in `±noise` per pixel.
pub fn procedural_background(
    base: [i32; 3],
    noise: i32,
    width: u32,
    height: u32,
    stream: &mut Stream,
) -> Raster {
    let base = Rgb(base.map(|c| c.clamp(0, 255) as u8));
    let mut r = Raster::filled(width, height, base);
    if noise > 0 {
        for px in r.pixels_mut().chunks_exact_mut(3) {
            let d = stream.uniform_int(-(noise as i64), noise as i64) as i32;
            for (c, b) in px.iter_mut().zip(base.0) {
                *c = (b as i32 + d).clamp(0, 255) as u8;
            }
        }
    }
    r
}

/// Center-crops `src` to the aspect ratio of `width x height`, then resizes
/// with nearest-neighbour sampling.
pub fn center_crop_resize(src: &Raster, width: u32, height: u32) -> Raster {
    let (sw, sh) = (src.width() as u64, src.height() as u64);
    let (tw, th) = (width as u64, height as u64);
    // Largest crop with aspect tw:th.
    let (cw, ch) = if sw * th > sh * tw {
        ((sh * tw / th).max(1), sh)
    } else {
        (sw, (sw * th / tw).max(1))
    };
    let (ox, oy) = ((sw - cw) / 2, (sh - ch) / 2);
    let mut out = Raster::new(width, height);
    for y in 0..th {
        let sy = oy + ((2 * y + 1) * ch / (2 * th)).min(ch - 1);
        for x in 0..tw {
            let sx = ox + ((2 * x + 1) * cw / (2 * tw)).min(cw - 1);
            out.put(x as u32, y as u32, src.get(sx as u32, sy as u32));
        }
    }
    out
}

/// Source-over of `foreground` onto `background_photo` with `fg_mask` as alpha.
pub fn composite_background(
    foreground: &Raster,
    fg_mask: &[f32],
    background_photo: &Raster,
) -> Result<Raster, RenderError> {
    if foreground.dims() != background_photo.dims() {
        return Err(RenderError::DimensionMismatch {
            expected: foreground.dims(),
            actual: background_photo.dims(),
        });
    }
    let n = foreground.width() as usize * foreground.height() as usize;
    if fg_mask.len() != n {
        return Err(RenderError::DimensionMismatch {
            expected: foreground.dims(),
            actual: (fg_mask.len() as u32, 1),
        });
    }
    let mut out = background_photo.clone();
    for ((dst, src), m) in out
        .pixels_mut()
        .chunks_exact_mut(3)
        .zip(foreground.pixels().chunks_exact(3))
        .zip(fg_mask)
    {
        let a = alpha_from_opacity(*m as f64);
        for c in 0..3 {
            dst[c] = blend_channel(src[c], dst[c], a);
        }
    }
    Ok(out)
}

/// Real background photos, already cropped and resized to the image size.
#[derive(Debug, Clone, Default)]
pub struct Backgrounds {
    photos: Vec<Raster>,
    sources: Vec<PathBuf>,
}

impl Backgrounds {
    pub fn none() -> Self {
        Self::default()
    }

    /// Loads the photos a background spec needs (none for procedural).
    pub fn load(spec: &BackgroundSpec, width: u32, height: u32) -> Result<Self, RenderError> {
        match spec {
            BackgroundSpec::Procedural { .. } => Ok(Self::none()),
            BackgroundSpec::Hybrid { directory } => Self::load_dir(directory, width, height),
        }
    }

    /// Every photo in `dir`, sorted by file name.
    pub fn load_dir(dir: &Path, width: u32, height: u32) -> Result<Self, RenderError> {
        let entries = std::fs::read_dir(dir)
            .map_err(|e| RenderError::HybridSourceMissing(format!("{}: {e}", dir.display())))?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && has_photo_extension(p))
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(RenderError::HybridSourceMissing(format!(
                "{} contains no background photos",
                dir.display()
            )));
        }
        let mut photos = Vec::with_capacity(paths.len());
        for path in &paths {
            let img = image::open(path).map_err(|e| {
                RenderError::HybridSourceMissing(format!("cannot decode {}: {e}", path.display()))
            })?;
            let src = Raster::from_image(img.to_rgb8());
            photos.push(center_crop_resize(&src, width, height));
        }
        Ok(Self {
            photos,
            sources: paths,
        })
    }

    pub fn from_rasters(photos: Vec<Raster>) -> Self {
        Self {
            photos,
            sources: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.photos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.photos.is_empty()
    }

    pub fn sources(&self) -> &[PathBuf] {
        &self.sources
    }

    /// Photo at `draw mod len`.
    pub fn pick(&self, draw: u64) -> Option<&Raster> {
        if self.photos.is_empty() {
            None
        } else {
            Some(&self.photos[(draw % self.photos.len() as u64) as usize])
        }
    }
}

fn has_photo_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| PHOTO_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}
