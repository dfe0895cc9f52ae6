//! Primitive rasterization.
//!
//! Shapes are converted to horizontal pixel spans; a pixel is covered when
//! its center lies inside the shape (half-open on the right and bottom edges
//! of polygons, closed for ellipses). There is no anti-aliasing. Spans are
//! clipped to the canvas, so any finite geometry is safe to draw.

use serde::{Deserialize, Serialize};

use super::{alpha_from_opacity, Canvas, Rgb};
use crate::geometry::Point;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    /// The single pixel containing the point.
    Dot {
        at: Point,
    },
    Line {
        from: Point,
        to: Point,
        width: f64,
    },
    /// Axis-aligned rectangle with top-left corner `(x, y)`.
    Rect {
        x: f64,
        y: f64,
        width: f64,
        height: f64,
    },
    Polygon {
        points: Vec<Point>,
    },
    Circle {
        center: Point,
        radius: f64,
    },
    /// Ellipse with semi-axes `rx`, `ry`, rotated by `rotation` degrees.
    Ellipse {
        center: Point,
        rx: f64,
        ry: f64,
        rotation: f64,
    },
}

impl Shape {
    pub fn translated(&self, by: Point) -> Shape {
        match self {
            Shape::Dot { at } => Shape::Dot { at: at.offset(by) },
            Shape::Line { from, to, width } => Shape::Line {
                from: from.offset(by),
                to: to.offset(by),
                width: *width,
            },
            Shape::Rect {
                x,
                y,
                width,
                height,
            } => Shape::Rect {
                x: x + by.x,
                y: y + by.y,
                width: *width,
                height: *height,
            },
            Shape::Polygon { points } => Shape::Polygon {
                points: points.iter().map(|p| p.offset(by)).collect(),
            },
            Shape::Circle { center, radius } => Shape::Circle {
                center: center.offset(by),
                radius: *radius,
            },
            Shape::Ellipse {
                center,
                rx,
                ry,
                rotation,
            } => Shape::Ellipse {
                center: center.offset(by),
                rx: *rx,
                ry: *ry,
                rotation: *rotation,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outline {
    pub color: Rgb,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Style {
    pub fill: Option<Rgb>,
    pub opacity: f64,
    pub outline: Option<Outline>,
}

impl Style {
    pub fn fill(color: Rgb, opacity: f64) -> Self {
        Self {
            fill: Some(color),
            opacity,
            outline: None,
        }
    }
}

/// Inclusive run of pixels `x0..=x1` on row `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Span {
    pub y: u32,
    pub x0: u32,
    pub x1: u32,
}

impl Span {
    pub fn len(&self) -> usize {
        (self.x1 - self.x0 + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Draws `shape` onto `canvas`: fill first, then outline, each with
/// source-over at the style's opacity.
pub fn draw_primitive<C: Canvas + ?Sized>(canvas: &mut C, shape: &Shape, style: &Style) {
    let alpha = alpha_from_opacity(style.opacity);
    if alpha == 0 {
        return;
    }
    let (w, h) = canvas.dims();
    if let Some(color) = style.fill {
        for span in shape_spans(shape, w, h) {
            canvas.blend_span(span.y, span.x0, span.x1, color, alpha);
        }
    }
    if let Some(outline) = style.outline {
        for span in outline_spans(shape, outline.width, w, h) {
            canvas.blend_span(span.y, span.x0, span.x1, outline.color, alpha);
        }
    }
}

/// Pixels covered by the interior of `shape` on a `w x h` canvas.
pub fn shape_spans(shape: &Shape, w: u32, h: u32) -> Vec<Span> {
    if w == 0 || h == 0 {
        return Vec::new();
    }
    match shape {
        Shape::Dot { at } => {
            if !at.is_finite() {
                return Vec::new();
            }
            let (x, y) = (at.x.floor(), at.y.floor());
            if x >= 0.0 && y >= 0.0 && x < w as f64 && y < h as f64 {
                vec![Span {
                    y: y as u32,
                    x0: x as u32,
                    x1: x as u32,
                }]
            } else {
                Vec::new()
            }
        }
        Shape::Line { from, to, width } => line_spans(*from, *to, *width, w, h),
        Shape::Rect {
            x,
            y,
            width,
            height,
        } => {
            if !(*width > 0.0 && *height > 0.0) {
                return Vec::new();
            }
            let corners = [
                Point::new(*x, *y),
                Point::new(x + width, *y),
                Point::new(x + width, y + height),
                Point::new(*x, y + height),
            ];
            polygon_spans(&corners, w, h)
        }
        Shape::Polygon { points } => polygon_spans(points, w, h),
        Shape::Circle { center, radius } => ellipse_spans(*center, *radius, *radius, 0.0, w, h),
        Shape::Ellipse {
            center,
            rx,
            ry,
            rotation,
        } => ellipse_spans(*center, *rx, *ry, *rotation, w, h),
    }
}

/// Pixels of the outline band of `shape`, `width` pixels thick.
pub fn outline_spans(shape: &Shape, width: f64, w: u32, h: u32) -> Vec<Span> {
    if !(width > 0.0) || w == 0 || h == 0 {
        return Vec::new();
    }
    let ring = |points: &[Point]| {
        let mut spans = Vec::new();
        for i in 0..points.len() {
            let a = points[i];
            let b = points[(i + 1) % points.len()];
            spans.extend(line_spans(a, b, width, w, h));
        }
        merge_spans(spans)
    };
    match shape {
        Shape::Dot { .. } | Shape::Line { .. } => Vec::new(),
        Shape::Rect {
            x,
            y,
            width: rw,
            height: rh,
        } => {
            // Inside band of the rectangle edges.
            let outer = shape_spans(shape, w, h);
            let inner = shape_spans(
                &Shape::Rect {
                    x: x + width,
                    y: y + width,
                    width: rw - 2.0 * width,
                    height: rh - 2.0 * width,
                },
                w,
                h,
            );
            subtract_spans(outer, &inner)
        }
        Shape::Polygon { points } => {
            if points.len() < 2 || points.iter().any(|p| !p.is_finite()) {
                return Vec::new();
            }
            ring(points)
        }
        Shape::Circle { center, radius } => {
            let outer = ellipse_spans(*center, *radius, *radius, 0.0, w, h);
            let inner = ellipse_spans(*center, radius - width, radius - width, 0.0, w, h);
            subtract_spans(outer, &inner)
        }
        Shape::Ellipse {
            center,
            rx,
            ry,
            rotation,
        } => {
            let outer = ellipse_spans(*center, *rx, *ry, *rotation, w, h);
            let inner = ellipse_spans(*center, rx - width, ry - width, *rotation, w, h);
            subtract_spans(outer, &inner)
        }
    }
}

/// Row range whose pixel centers lie in `[y_lo, y_hi]`, clipped to the canvas.
fn row_range(y_lo: f64, y_hi: f64, h: u32) -> Option<(u32, u32)> {
    if !(y_lo <= y_hi) {
        return None;
    }
    let first = (y_lo - 0.5).ceil().max(0.0);
    let last = (y_hi - 0.5).floor().min(h as f64 - 1.0);
    (first <= last).then(|| (first as u32, last as u32))
}

/// Span of pixels whose centers lie in `[xa, xb)` (or `[xa, xb]` when `closed`).
fn push_span(out: &mut Vec<Span>, y: u32, xa: f64, xb: f64, closed: bool, w: u32) {
    let first = (xa - 0.5).ceil();
    let last = if closed {
        (xb - 0.5).floor()
    } else {
        (xb - 0.5).ceil() - 1.0
    };
    let first = first.max(0.0);
    let last = last.min(w as f64 - 1.0);
    if first <= last {
        out.push(Span {
            y,
            x0: first as u32,
            x1: last as u32,
        });
    }
}

fn polygon_spans(points: &[Point], w: u32, h: u32) -> Vec<Span> {
    if points.len() < 3 || points.iter().any(|p| !p.is_finite()) {
        return Vec::new();
    }
    let (y_lo, y_hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.y), hi.max(p.y))
        });
    // Rows whose center yc satisfies y_lo <= yc < y_hi.
    let first = (y_lo - 0.5).ceil().max(0.0);
    let last = ((y_hi - 0.5).ceil() - 1.0).min(h as f64 - 1.0);
    if first > last {
        return Vec::new();
    }
    let mut spans = Vec::new();
    let mut xs: Vec<f64> = Vec::with_capacity(8);
    for py in first as u32..=last as u32 {
        let yc = py as f64 + 0.5;
        xs.clear();
        for i in 0..points.len() {
            let a = points[i];
            let b = points[(i + 1) % points.len()];
            if (a.y <= yc) != (b.y <= yc) {
                xs.push(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            push_span(&mut spans, py, pair[0], pair[1], false, w);
        }
    }
    merge_spans(spans)
}

fn ellipse_spans(center: Point, rx: f64, ry: f64, rotation: f64, w: u32, h: u32) -> Vec<Span> {
    if !(rx > 0.0 && ry > 0.0) || !center.is_finite() || !rotation.is_finite() {
        return Vec::new();
    }
    let (s, c) = rotation.to_radians().sin_cos();
    let (irx2, iry2) = (1.0 / (rx * rx), 1.0 / (ry * ry));
    // Quadratic form a·dx² + b·dx·dy + c·dy² <= 1.
    let qa = c * c * irx2 + s * s * iry2;
    let qb = 2.0 * s * c * (irx2 - iry2);
    let qc = s * s * irx2 + c * c * iry2;
    let half_h = (rx * rx * s * s + ry * ry * c * c).sqrt();
    let Some((first, last)) = row_range(center.y - half_h, center.y + half_h, h) else {
        return Vec::new();
    };
    let mut spans = Vec::new();
    for py in first..=last {
        let dy = py as f64 + 0.5 - center.y;
        let b = qb * dy;
        let disc = b * b - 4.0 * qa * (qc * dy * dy - 1.0);
        if disc < 0.0 {
            continue;
        }
        let root = disc.sqrt();
        let xa = center.x + (-b - root) / (2.0 * qa);
        let xb = center.x + (-b + root) / (2.0 * qa);
        push_span(&mut spans, py, xa, xb, true, w);
    }
    spans
}

fn line_spans(from: Point, to: Point, width: f64, w: u32, h: u32) -> Vec<Span> {
    if !from.is_finite() || !to.is_finite() || !width.is_finite() {
        return Vec::new();
    }
    if width > 1.0 {
        let (dx, dy) = (to.x - from.x, to.y - from.y);
        let len = (dx * dx + dy * dy).sqrt();
        let half = width / 2.0;
        let quad = if len < 1e-12 {
            vec![
                Point::new(from.x - half, from.y - half),
                Point::new(from.x + half, from.y - half),
                Point::new(from.x + half, from.y + half),
                Point::new(from.x - half, from.y + half),
            ]
        } else {
            let (nx, ny) = (-dy / len * half, dx / len * half);
            vec![
                Point::new(from.x + nx, from.y + ny),
                Point::new(to.x + nx, to.y + ny),
                Point::new(to.x - nx, to.y - ny),
                Point::new(from.x - nx, from.y - ny),
            ]
        };
        return polygon_spans(&quad, w, h);
    }
    let Some((a, b)) = clip_segment(from, to, w as f64, h as f64) else {
        return Vec::new();
    };
    bresenham(a, b, w, h)
}

/// Liang-Barsky clip against the canvas grown by one pixel.
fn clip_segment(a: Point, b: Point, w: f64, h: f64) -> Option<(Point, Point)> {
    let (x_min, y_min, x_max, y_max) = (-1.0, -1.0, w + 1.0, h + 1.0);
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (p, q) in [
        (-dx, a.x - x_min),
        (dx, x_max - a.x),
        (-dy, a.y - y_min),
        (dy, y_max - a.y),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    (t0 <= t1).then(|| {
        (
            Point::new(a.x + t0 * dx, a.y + t0 * dy),
            Point::new(a.x + t1 * dx, a.y + t1 * dy),
        )
    })
}

fn bresenham(a: Point, b: Point, w: u32, h: u32) -> Vec<Span> {
    let (mut x, mut y) = (a.x.floor() as i64, a.y.floor() as i64);
    let (x1, y1) = (b.x.floor() as i64, b.y.floor() as i64);
    let dx = (x1 - x).abs();
    let dy = -(y1 - y).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut spans = Vec::new();
    loop {
        if x >= 0 && y >= 0 && x < w as i64 && y < h as i64 {
            spans.push(Span {
                y: y as u32,
                x0: x as u32,
                x1: x as u32,
            });
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    merge_spans(spans)
}

/// Sorts spans and merges overlapping or adjacent runs on the same row.
fn merge_spans(mut spans: Vec<Span>) -> Vec<Span> {
    spans.sort_unstable();
    let mut out: Vec<Span> = Vec::with_capacity(spans.len());
    for s in spans {
        match out.last_mut() {
            Some(last) if last.y == s.y && s.x0 <= last.x1 + 1 => {
                last.x1 = last.x1.max(s.x1);
            }
            _ => out.push(s),
        }
    }
    out
}

/// `outer` minus `inner`, both merged.
fn subtract_spans(outer: Vec<Span>, inner: &[Span]) -> Vec<Span> {
    let mut out = Vec::with_capacity(outer.len());
    for s in merge_spans(outer) {
        let mut cursor = s.x0 as i64;
        let end = s.x1 as i64;
        for cut in inner.iter().filter(|c| c.y == s.y) {
            let (c0, c1) = (cut.x0 as i64, cut.x1 as i64);
            if c1 < cursor || c0 > end {
                continue;
            }
            if c0 > cursor {
                out.push(Span {
                    y: s.y,
                    x0: cursor as u32,
                    x1: (c0 - 1) as u32,
                });
            }
            cursor = cursor.max(c1 + 1);
        }
        if cursor <= end {
            out.push(Span {
                y: s.y,
                x0: cursor as u32,
                x1: end as u32,
            });
        }
    }
    out
}
