//! Image filters: Gaussian blur, 3x3 box smoothing, edge enhancement.
//!
//! All filters clamp to the border and work in integer arithmetic.
//!
//! * `GaussianBlur(σ)`: separable kernel of radius `ceil(3σ)`, weights
//!   `exp(-k²/2σ²)` quantized to sum exactly to 2^16 (the center weight
//!   absorbs the quantization residue). Both passes are accumulated exactly
//!   and the result is divided by 2^32 once, ties to even.
//! * `Smooth`: mean of the 3x3 neighbourhood, ties to even.
//! * `EdgeEnhance`: unsharp mask `c + 4·(c − mean8)`, i.e. the 3x3 kernel
//!   `[-1 -1 -1; -1 10 -1; -1 -1 -1] / 2`, ties to even, clamped to [0, 255].

use super::{div_round_half_even, Layer, Raster};
use crate::config::FilterSpec;

const KERNEL_ONE: u32 = 1 << 16;

/// Quantized Gaussian weights for offsets `-r..=r`, summing to 2^16.
pub fn gaussian_kernel(sigma: f64) -> Vec<u32> {
    let radius = (3.0 * sigma).ceil().max(0.0) as i64;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    let mut kernel: Vec<u32> = raw
        .iter()
        .map(|w| (w / total * KERNEL_ONE as f64).round_ties_even() as u32)
        .collect();
    let sum: i64 = kernel.iter().map(|&w| w as i64).sum();
    let center = radius as usize;
    kernel[center] = (kernel[center] as i64 + KERNEL_ONE as i64 - sum) as u32;
    kernel
}

pub fn apply_filter(raster: &Raster, filter: &FilterSpec) -> Raster {
    let (w, h) = raster.dims();
    let pixels = filter_buffer(raster.pixels(), w, h, 3, filter);
    Raster::from_pixels(w, h, pixels).expect("filter keeps dims")
}

pub(crate) fn filter_layer(layer: &mut Layer, filter: &FilterSpec) {
    let (w, h) = super::Canvas::dims(layer);
    let out = filter_buffer(layer.data(), w, h, 4, filter);
    layer.data_mut().copy_from_slice(&out);
}

fn filter_buffer(src: &[u8], w: u32, h: u32, channels: usize, filter: &FilterSpec) -> Vec<u8> {
    if w == 0 || h == 0 {
        return src.to_vec();
    }
    match filter {
        FilterSpec::GaussianBlur { sigma } => {
            if !(*sigma > 0.0) || !sigma.is_finite() {
                return src.to_vec();
            }
            gaussian(
                src,
                w as usize,
                h as usize,
                channels,
                &gaussian_kernel(*sigma),
            )
        }
        FilterSpec::Smooth => neighbourhood(src, w as usize, h as usize, channels, |c, sum8| {
            div_round_half_even((c + sum8) as u64, 9) as u8
        }),
        FilterSpec::EdgeEnhance => {
            neighbourhood(src, w as usize, h as usize, channels, |c, sum8| {
                let v = 10 * c as i64 - sum8 as i64;
                if v <= 0 {
                    0
                } else {
                    div_round_half_even(v as u64, 2).min(255) as u8
                }
            })
        }
    }
}

#[inline]
fn clamp_index(i: i64, n: usize) -> usize {
    i.clamp(0, n as i64 - 1) as usize
}

fn gaussian(src: &[u8], w: usize, h: usize, ch: usize, kernel: &[u32]) -> Vec<u8> {
    let r = (kernel.len() / 2) as i64;
    // Horizontal pass, kept at 2^16 scale.
    let mut tmp = vec![0u32; src.len()];
    for y in 0..h {
        let row = y * w * ch;
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0u32;
                for (k, &wt) in kernel.iter().enumerate() {
                    let sx = clamp_index(x as i64 + k as i64 - r, w);
                    acc += wt * src[row + sx * ch + c] as u32;
                }
                tmp[row + x * ch + c] = acc;
            }
        }
    }
    // Vertical pass at 2^32 scale, single rounding.
    let mut out = vec![0u8; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0u64;
                for (k, &wt) in kernel.iter().enumerate() {
                    let sy = clamp_index(y as i64 + k as i64 - r, h);
                    acc += wt as u64 * tmp[(sy * w + x) * ch + c] as u64;
                }
                out[(y * w + x) * ch + c] = div_round_half_even(acc, 1 << 32).min(255) as u8;
            }
        }
    }
    out
}

/// Applies `f(center, sum of the 8 neighbours)` over clamped 3x3 windows.
fn neighbourhood(src: &[u8], w: usize, h: usize, ch: usize, f: impl Fn(u32, u32) -> u8) -> Vec<u8> {
    let mut out = vec![0u8; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut sum8 = 0u32;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let sx = clamp_index(x as i64 + dx, w);
                        let sy = clamp_index(y as i64 + dy, h);
                        sum8 += src[(sy * w + sx) * ch + c] as u32;
                    }
                }
                out[(y * w + x) * ch + c] = f(src[(y * w + x) * ch + c] as u32, sum8);
            }
        }
    }
    out
}
