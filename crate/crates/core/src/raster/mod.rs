//! RGB rasters, primitive drawing, filters and scene rendering.
//!
//! All compositing is integer arithmetic with ties rounded to even, so a
//! given scene renders to the same bytes on every platform and thread count.

mod background;
mod draw;
mod filter;
mod render;

pub use background::{
    center_crop_resize, composite_background, procedural_background, Backgrounds,
};
pub use draw::{draw_primitive, shape_spans, Outline, Shape, Span, Style};
pub use filter::{apply_filter, gaussian_kernel};
pub use render::{render_scene, render_scene_with_coverage};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    pub const BLACK: Rgb = Rgb([0, 0, 0]);
    pub const WHITE: Rgb = Rgb([255, 255, 255]);

    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Rgb([r, g, b])
    }

    /// Channel-wise multiplication by `factor`, saturating.
    pub fn shade(self, factor: f64) -> Rgb {
        Rgb(self
            .0
            .map(|c| (c as f64 * factor).round_ties_even().clamp(0.0, 255.0) as u8))
    }

    /// Linear interpolation toward `other` by `t` in `[0, 1]`.
    pub fn lerp(self, other: Rgb, t: f64) -> Rgb {
        let mut out = [0u8; 3];
        for (o, (a, b)) in out.iter_mut().zip(self.0.iter().zip(other.0.iter())) {
            let v = *a as f64 + (*b as f64 - *a as f64) * t;
            *o = v.round_ties_even().clamp(0.0, 255.0) as u8;
        }
        Rgb(out)
    }
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("hybrid background source unavailable: {0}")]
    HybridSourceMissing(String),
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
    },
}

/// `n / d` rounded to nearest, ties to even.
#[inline]
pub fn div_round_half_even(n: u64, d: u64) -> u64 {
    let q = n / d;
    let r = n % d;
    match (2 * r).cmp(&d) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q & 1),
    }
}

/// Opacity in `[0, 1]` quantized to an 8-bit alpha (ties to even).
#[inline]
pub fn alpha_from_opacity(opacity: f64) -> u8 {
    if opacity.is_nan() {
        return 0;
    }
    (opacity.clamp(0.0, 1.0) * 255.0).round_ties_even() as u8
}

/// Source-over for one channel: `(a·src + (255−a)·dst) / 255`, ties to even.
#[inline]
pub fn blend_channel(src: u8, dst: u8, alpha: u8) -> u8 {
    let a = alpha as u64;
    div_round_half_even(a * src as u64 + (255 - a) * dst as u64, 255) as u8
}

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl Raster {
    pub fn new(width: u32, height: u32) -> Self {
        Self::filled(width, height, Rgb::BLACK)
    }

    pub fn filled(width: u32, height: u32, color: Rgb) -> Self {
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(n * 3);
        for _ in 0..n {
            pixels.extend_from_slice(&color.0);
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    /// Wraps raw row-major RGB bytes; `None` when the length does not match.
    pub fn from_pixels(width: u32, height: u32, pixels: Vec<u8>) -> Option<Self> {
        (pixels.len() == width as usize * height as usize * 3).then_some(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        let i = self.offset(x, y);
        Rgb([self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]])
    }

    pub fn put(&mut self, x: u32, y: u32, color: Rgb) {
        let i = self.offset(x, y);
        self.pixels[i..i + 3].copy_from_slice(&color.0);
    }

    /// Sum of every channel value.
    pub fn channel_sum(&self) -> u64 {
        self.pixels.iter().map(|&v| v as u64).sum()
    }

    pub fn to_image(&self) -> image::RgbImage {
        image::RgbImage::from_raw(self.width, self.height, self.pixels.clone())
            .expect("raster length matches dims")
    }

    pub fn from_image(img: image::RgbImage) -> Self {
        let (width, height) = img.dimensions();
        Self {
            width,
            height,
            pixels: img.into_raw(),
        }
    }
}

/// Destination for span blending; implemented by opaque rasters and
/// premultiplied RGBA layers.
pub trait Canvas {
    fn dims(&self) -> (u32, u32);
    /// Source-over of `color` at `alpha` on pixels `x0..=x1` of row `y`.
    fn blend_span(&mut self, y: u32, x0: u32, x1: u32, color: Rgb, alpha: u8);
}

impl Canvas for Raster {
    fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    fn blend_span(&mut self, y: u32, x0: u32, x1: u32, color: Rgb, alpha: u8) {
        let start = self.offset(x0, y);
        let end = self.offset(x1, y) + 3;
        let row = &mut self.pixels[start..end];
        if alpha == 255 {
            for px in row.chunks_exact_mut(3) {
                px.copy_from_slice(&color.0);
            }
        } else {
            for px in row.chunks_exact_mut(3) {
                for c in 0..3 {
                    px[c] = blend_channel(color.0[c], px[c], alpha);
                }
            }
        }
    }
}

/// Premultiplied RGBA layer used for blurred object groups and for the
/// foreground of hybrid scenes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl Layer {
    pub fn transparent(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0; width as usize * height as usize * 4],
        }
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn alpha(&self, x: u32, y: u32) -> u8 {
        self.data[(y as usize * self.width as usize + x as usize) * 4 + 3]
    }

    /// Composites this layer over an opaque raster of the same size.
    pub fn composite_onto(&self, dst: &mut Raster) {
        debug_assert_eq!(self.dims(), dst.dims());
        for (src, out) in self
            .data
            .chunks_exact(4)
            .zip(dst.pixels.chunks_exact_mut(3))
        {
            let a = src[3] as u64;
            if a == 0 {
                continue;
            }
            for c in 0..3 {
                let v = src[c] as u64 + div_round_half_even(out[c] as u64 * (255 - a), 255);
                out[c] = v.min(255) as u8;
            }
        }
    }

    /// Composites this layer over another premultiplied layer.
    pub fn composite_onto_layer(&self, dst: &mut Layer) {
        debug_assert_eq!(self.dims(), dst.dims());
        for (src, out) in self.data.chunks_exact(4).zip(dst.data.chunks_exact_mut(4)) {
            let a = src[3] as u64;
            if a == 0 {
                continue;
            }
            for c in 0..4 {
                let v = src[c] as u64 + div_round_half_even(out[c] as u64 * (255 - a), 255);
                out[c] = v.min(255) as u8;
            }
        }
    }

    /// Straight (unpremultiplied) color and coverage in `[0, 1]`.
    pub fn split(&self) -> (Raster, Vec<f32>) {
        let n = self.width as usize * self.height as usize;
        let mut rgb = Vec::with_capacity(n * 3);
        let mut mask = Vec::with_capacity(n);
        for px in self.data.chunks_exact(4) {
            let a = px[3] as u64;
            for c in 0..3 {
                let v = if a == 0 {
                    0
                } else {
                    div_round_half_even(px[c] as u64 * 255, a).min(255)
                };
                rgb.push(v as u8);
            }
            mask.push(a as f32 / 255.0);
        }
        (
            Raster {
                width: self.width,
                height: self.height,
                pixels: rgb,
            },
            mask,
        )
    }
}

impl Canvas for Layer {
    fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    fn blend_span(&mut self, y: u32, x0: u32, x1: u32, color: Rgb, alpha: u8) {
        let a = alpha as u64;
        let premul = color
            .0
            .map(|c| div_round_half_even(c as u64 * a, 255) as u8);
        let start = (y as usize * self.width as usize + x0 as usize) * 4;
        let end = (y as usize * self.width as usize + x1 as usize) * 4 + 4;
        for px in self.data[start..end].chunks_exact_mut(4) {
            for c in 0..3 {
                let v = premul[c] as u64 + div_round_half_even(px[c] as u64 * (255 - a), 255);
                px[c] = v.min(255) as u8;
            }
            let v = a + div_round_half_even(px[3] as u64 * (255 - a), 255);
            px[3] = v.min(255) as u8;
        }
    }
}
