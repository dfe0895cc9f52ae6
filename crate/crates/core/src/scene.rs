//! Scene sampling: turns a [`GeneratorConfig`] and an image seed into a
//! [`SceneGraph`] of placed, parameterized objects.
//!
//! Each object class draws from its own stream, forked from the image seed
//! with the class's stable index, in [`ObjectClass::PLACEMENT_ORDER`]. Per
//! object the draw order is: width, height, rotation, palette entry, color
//! jitter (r, g, b), opacity, class-specific shape draws, then anchor
//! positions until the overlap policy is satisfied.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{
    DistributionSpec, GeneratorConfig, ObjectClass, ObjectClassSpec, OverlapPolicy, Scenario,
};
use crate::geometry::{self, rotated_rect, Aabb, Point};
use crate::raster::{Outline, Rgb, Shape, Style};
use crate::seed::{tags, Stream};

/// Rejection-sampling budget per object.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

/// Intersection area treated as touching rather than overlapping.
const TOUCH_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("placement exhausted for {class}: placed {placed} of {requested} objects")]
    PlacementExhausted {
        class: ObjectClass,
        placed: usize,
        requested: usize,
    },
}

/// One drawable piece of an object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Part {
    pub shape: Shape,
    pub style: Style,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedObject {
    pub class: ObjectClass,
    pub anchor: Point,
    /// Convex polygon covering every part, in pixel coordinates.
    pub footprint: Vec<Point>,
    pub rotation: f64,
    pub color: Rgb,
    pub opacity: f64,
    pub parts: Vec<Part>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub scenario: Scenario,
    pub width: u32,
    pub height: u32,
    pub image_seed: u64,
    /// Painter's order: later objects are drawn on top.
    pub objects: Vec<PlacedObject>,
    pub sampled_house_count: u32,
    pub contains_fire: bool,
}

impl SceneGraph {
    pub fn count_of(&self, class: ObjectClass) -> usize {
        self.objects.iter().filter(|o| o.class == class).count()
    }

    pub fn house_tally(&self) -> usize {
        self.count_of(ObjectClass::House)
    }
}

/// Draws one value from `dist`. The result always lies in `dist.support()`.
pub fn sample_from(dist: &DistributionSpec, stream: &mut Stream) -> f64 {
    match dist {
        DistributionSpec::Constant { value } => *value,
        DistributionSpec::UniformInt { min, max } => stream.uniform_int(*min, *max) as f64,
        DistributionSpec::UniformReal { min, max } => stream.uniform_real(*min, *max),
        DistributionSpec::Normal {
            mean,
            stddev,
            min,
            max,
        } => {
            let mut v = *mean;
            for _ in 0..64 {
                v = mean + stddev * stream.standard_normal();
                if (*min..=*max).contains(&v) {
                    return v;
                }
            }
            v.clamp(*min, *max)
        }
        DistributionSpec::Categorical { values, weights } => {
            let i = stream.categorical(weights).unwrap_or(0);
            values[i]
        }
    }
}

fn to_count(v: f64) -> u32 {
    if v.is_nan() {
        return 0;
    }
    v.round_ties_even().clamp(0.0, u32::MAX as f64) as u32
}

pub fn sample_scene(config: &GeneratorConfig, image_seed: u64) -> Result<SceneGraph, SceneError> {
    sample_scene_impl(config, image_seed, None)
}

/// Like [`sample_scene`] but with fire presence fixed by the caller (used for
/// exact class quotas). Ignored outside the classification scenario.
pub fn sample_scene_with_fire(
    config: &GeneratorConfig,
    image_seed: u64,
    contains_fire: bool,
) -> Result<SceneGraph, SceneError> {
    sample_scene_impl(config, image_seed, Some(contains_fire))
}

fn sample_scene_impl(
    config: &GeneratorConfig,
    image_seed: u64,
    forced_fire: Option<bool>,
) -> Result<SceneGraph, SceneError> {
    let (w, h) = (config.image_width, config.image_height);
    let fire_draw = Stream::forked(image_seed, tags::PRESENCE).bernoulli(config.fire_probability);
    let contains_fire = match config.scenario {
        Scenario::FireClassification => forced_fire.unwrap_or(fire_draw),
        Scenario::HouseCounting => false,
    };
    let house_target = match config.scenario {
        Scenario::HouseCounting => {
            let mut s = Stream::forked(image_seed, tags::HOUSE_COUNT);
            Some(to_count(sample_from(&config.count_distribution, &mut s)).min(config.max_count))
        }
        Scenario::FireClassification => None,
    };

    let mut objects = Vec::new();
    let mut occupied: Vec<Vec<Point>> = Vec::new();
    for class in ObjectClass::PLACEMENT_ORDER {
        let Some(spec) = config.spec_for(class) else {
            continue;
        };
        let mut stream = Stream::forked(image_seed, tags::CLASS_TAG_BASE + class.stream_index());
        let drawn = to_count(sample_from(&spec.count, &mut stream));
        let n = match (class, config.scenario) {
            (ObjectClass::House, Scenario::HouseCounting) => house_target.unwrap_or(0),
            (ObjectClass::SmokePlume | ObjectClass::FireBlob, Scenario::FireClassification) => {
                if contains_fire {
                    drawn.max(1)
                } else {
                    0
                }
            }
            _ => drawn,
        };
        let placed = place_objects(n as usize, spec, &occupied, &mut stream, (w, h))?;
        if spec.solid {
            occupied.extend(placed.iter().map(|o| o.footprint.clone()));
        }
        objects.extend(placed);
    }

    let sampled_house_count = objects
        .iter()
        .filter(|o| o.class == ObjectClass::House)
        .count() as u32;
    Ok(SceneGraph {
        scenario: config.scenario,
        width: w,
        height: h,
        image_seed,
        objects,
        sampled_house_count,
        contains_fire,
    })
}

/// Places `count` objects of `spec` by rejection sampling, at most
/// [`MAX_PLACEMENT_ATTEMPTS`] anchor draws per object. The overlap policy is
/// enforced against the objects placed here and against `occupied`.
pub fn place_objects(
    count: usize,
    spec: &ObjectClassSpec,
    occupied: &[Vec<Point>],
    stream: &mut Stream,
    (width, height): (u32, u32),
) -> Result<Vec<PlacedObject>, SceneError> {
    let exhausted = |placed: usize| SceneError::PlacementExhausted {
        class: spec.class,
        placed,
        requested: count,
    };
    let (wf, hf) = (width as f64, height as f64);
    let mut placed: Vec<PlacedObject> = Vec::with_capacity(count);
    for _ in 0..count {
        let template = Template::sample(spec, stream);
        let bounds = Aabb::of_points(&template.footprint);
        let (x_range, y_range) = if spec.fully_inside {
            (
                (-bounds.x_min, wf - bounds.x_max),
                (-bounds.y_min, hf - bounds.y_max),
            )
        } else {
            ((0.0, wf), (0.0, hf))
        };
        if x_range.0 > x_range.1 || y_range.0 > y_range.1 {
            return Err(exhausted(placed.len()));
        }
        let mut accepted = None;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let mut anchor = Point::new(
                stream.uniform_real(x_range.0, x_range.1),
                stream.uniform_real(y_range.0, y_range.1),
            );
            if !spec.fully_inside {
                // Half-open image rectangle keeps the anchor on a pixel.
                anchor.x = anchor.x.min(wf - 1e-9);
                anchor.y = anchor.y.min(hf - 1e-9);
            }
            let footprint: Vec<Point> = template
                .footprint
                .iter()
                .map(|p| p.offset(anchor))
                .collect();
            let clash = |other: &Vec<Point>| conflicts(&footprint, other, spec.overlap);
            if placed.iter().any(|o| clash(&o.footprint)) || occupied.iter().any(clash) {
                continue;
            }
            accepted = Some((anchor, footprint));
            break;
        }
        let Some((anchor, footprint)) = accepted else {
            return Err(exhausted(placed.len()));
        };
        placed.push(PlacedObject {
            class: spec.class,
            anchor,
            footprint,
            rotation: template.rotation,
            color: template.color,
            opacity: template.opacity,
            parts: template
                .parts
                .iter()
                .map(|p| Part {
                    shape: p.shape.translated(anchor),
                    style: p.style,
                })
                .collect(),
        });
    }
    Ok(placed)
}

fn conflicts(candidate: &[Point], other: &[Point], policy: OverlapPolicy) -> bool {
    match policy {
        OverlapPolicy::Forbid => geometry::intersection_area(candidate, other) > TOUCH_EPSILON,
        OverlapPolicy::AllowWithin { max_iou } => {
            max_iou < 1.0 && geometry::iou(candidate, other) > max_iou
        }
    }
}

/// An object's shape relative to its anchor, before positioning.
struct Template {
    rotation: f64,
    color: Rgb,
    opacity: f64,
    parts: Vec<Part>,
    footprint: Vec<Point>,
}

const ORIGIN: Point = Point::new(0.0, 0.0);

fn polygon(points: Vec<Point>) -> Shape {
    Shape::Polygon { points }
}

/// Local rectangle `[x0, x1] x [y0, y1]` rotated about the anchor.
fn rotated_box(x0: f64, y0: f64, x1: f64, y1: f64, degrees: f64) -> Vec<Point> {
    [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
        .into_iter()
        .map(|(x, y)| Point::new(x, y).rotated(degrees))
        .collect()
}

fn ellipse_bounds(center: Point, rx: f64, ry: f64, degrees: f64) -> Aabb {
    let (s, c) = degrees.to_radians().sin_cos();
    let ex = (rx * rx * c * c + ry * ry * s * s).sqrt();
    let ey = (rx * rx * s * s + ry * ry * c * c).sqrt();
    Aabb {
        x_min: center.x - ex,
        y_min: center.y - ey,
        x_max: center.x + ex,
        y_max: center.y + ey,
    }
}

impl Template {
    fn sample(spec: &ObjectClassSpec, stream: &mut Stream) -> Template {
        let w = sample_from(&spec.width, stream);
        let h = sample_from(&spec.height, stream);
        let rotation = sample_from(&spec.rotation, stream);
        let entry = &spec.palette[stream.uniform_int(0, spec.palette.len() as i64 - 1) as usize];
        let mut rgb = [0u8; 3];
        for (c, base) in rgb.iter_mut().zip(entry.rgb) {
            let j = stream.uniform_int(-(entry.jitter as i64), entry.jitter as i64);
            *c = (base as i64 + j).clamp(0, 255) as u8;
        }
        let color = Rgb(rgb);
        let opacity = sample_from(&spec.opacity, stream).clamp(0.0, 1.0);
        let style = |color: Rgb| Style::fill(color, opacity);

        let rect_footprint = rotated_rect(ORIGIN, w, h, rotation);
        let (parts, footprint) = match spec.class {
            ObjectClass::House => {
                let e = (w.min(h) / 6.0).min(1.0);
                let (hw, hh) = (w / 2.0, h / 2.0);
                // Gable roof: two faces split along the ridge on the long axis.
                let (face_a, face_b) = if w >= h {
                    (
                        rotated_box(-hw + e, -hh + e, hw - e, 0.0, rotation),
                        rotated_box(-hw + e, 0.0, hw - e, hh - e, rotation),
                    )
                } else {
                    (
                        rotated_box(-hw + e, -hh + e, 0.0, hh - e, rotation),
                        rotated_box(0.0, -hh + e, hw - e, hh - e, rotation),
                    )
                };
                let parts = vec![
                    Part {
                        shape: polygon(rect_footprint.clone()),
                        style: style(color.shade(0.7)),
                    },
                    Part {
                        shape: polygon(face_a),
                        style: style(color),
                    },
                    Part {
                        shape: polygon(face_b),
                        style: style(color.shade(0.8)),
                    },
                ];
                (parts, rect_footprint)
            }
            ObjectClass::Tree => {
                let r = w.min(h) / 2.0;
                let highlight = Point::new(-0.25 * r, -0.25 * r).rotated(rotation);
                let parts = vec![
                    Part {
                        shape: Shape::Circle {
                            center: ORIGIN,
                            radius: r,
                        },
                        style: style(color),
                    },
                    Part {
                        shape: Shape::Circle {
                            center: highlight,
                            radius: 0.45 * r,
                        },
                        style: style(color.shade(1.25)),
                    },
                ];
                (parts, rotated_rect(ORIGIN, 2.0 * r, 2.0 * r, rotation))
            }
            ObjectClass::Grass => {
                let parts = vec![Part {
                    shape: Shape::Ellipse {
                        center: ORIGIN,
                        rx: w / 2.0,
                        ry: h / 2.0,
                        rotation,
                    },
                    style: style(color),
                }];
                (parts, rect_footprint)
            }
            ObjectClass::Fence => {
                let a = Point::new(-w / 2.0, 0.0).rotated(rotation);
                let b = Point::new(w / 2.0, 0.0).rotated(rotation);
                let mut parts = vec![Part {
                    shape: Shape::Line {
                        from: a,
                        to: b,
                        width: h,
                    },
                    style: style(color),
                }];
                let posts = (w / 4.0).floor() as usize;
                for i in 0..=posts {
                    let x = -w / 2.0 + i as f64 * 4.0;
                    parts.push(Part {
                        shape: Shape::Dot {
                            at: Point::new(x, 0.0).rotated(rotation),
                        },
                        style: style(color.shade(0.7)),
                    });
                }
                (parts, rotated_rect(ORIGIN, w, h.max(1.0), rotation))
            }
            ObjectClass::Garden => {
                let mut parts = vec![Part {
                    shape: polygon(rect_footprint.clone()),
                    style: style(color),
                }];
                let rows = (h / 3.0).floor() as usize;
                for i in 1..=rows {
                    let y = -h / 2.0 + i as f64 * h / (rows + 1) as f64;
                    parts.push(Part {
                        shape: Shape::Line {
                            from: Point::new(-w / 2.0 + 0.5, y).rotated(rotation),
                            to: Point::new(w / 2.0 - 0.5, y).rotated(rotation),
                            width: 1.0,
                        },
                        style: style(color.shade(0.75)),
                    });
                }
                (parts, rect_footprint)
            }
            ObjectClass::Pool => {
                let parts = vec![Part {
                    shape: polygon(rect_footprint.clone()),
                    style: Style {
                        fill: Some(color),
                        opacity,
                        outline: Some(Outline {
                            color: Rgb::new(235, 245, 250),
                            width: 1.0,
                        }),
                    },
                }];
                (parts, rect_footprint)
            }
            ObjectClass::SmokePlume => {
                let puffs = stream.uniform_int(5, 12) as usize;
                let base_r = w / 4.0;
                let mut parts = Vec::with_capacity(puffs);
                let mut bounds: Option<Aabb> = None;
                for i in 0..puffs {
                    let t = i as f64 / (puffs - 1) as f64;
                    let dx = if i == 0 {
                        0.0
                    } else {
                        stream.uniform_real(-0.1, 0.1) * w
                    };
                    let rx = base_r * (0.7 + 0.9 * t);
                    let ry = rx * stream.uniform_real(0.7, 0.9);
                    let shade = stream.uniform_real(0.9, 1.1);
                    let alpha = opacity * stream.uniform_real(0.45, 0.75);
                    // Puffs drift upward (−y) before rotation.
                    let center = Point::new(dx, -t * h * 0.75).rotated(rotation);
                    let b = ellipse_bounds(center, rx, ry, rotation);
                    bounds = Some(bounds.map_or(b, |acc| acc.union(b)));
                    parts.push(Part {
                        shape: Shape::Ellipse {
                            center,
                            rx,
                            ry,
                            rotation,
                        },
                        style: Style::fill(color.shade(shade), alpha),
                    });
                }
                (parts, bounds.expect("at least five puffs").corners())
            }
            ObjectClass::FireBlob => {
                let layers = stream.uniform_int(2, 6) as usize;
                let (rx0, ry0) = (w / 2.0, h / 2.0);
                let core = Rgb::new(255, 230, 90);
                let mut parts = Vec::with_capacity(layers);
                let mut bounds: Option<Aabb> = None;
                for i in 0..layers {
                    let t = i as f64 / (layers - 1) as f64;
                    let scale = 1.0 - 0.65 * t;
                    let jitter = if i == 0 {
                        0.0
                    } else {
                        stream.uniform_real(-0.15, 0.15) * rx0
                    };
                    let center = Point::new(jitter, -0.2 * ry0 * t).rotated(rotation);
                    let (rx, ry) = (rx0 * scale, ry0 * scale);
                    let b = ellipse_bounds(center, rx, ry, rotation);
                    bounds = Some(bounds.map_or(b, |acc| acc.union(b)));
                    parts.push(Part {
                        shape: Shape::Ellipse {
                            center,
                            rx,
                            ry,
                            rotation,
                        },
                        style: Style::fill(color.lerp(core, t), opacity),
                    });
                }
                (parts, bounds.expect("at least two layers").corners())
            }
        };
        Template {
            rotation,
            color,
            opacity,
            parts,
            footprint,
        }
    }
}
