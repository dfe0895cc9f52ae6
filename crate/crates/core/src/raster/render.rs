use super::filter::filter_layer;
use super::{
    apply_filter, composite_background, draw_primitive, procedural_background, Backgrounds, Canvas,
    Layer, Raster, RenderError,
};
use crate::config::{BackgroundSpec, FilterSpec, GeneratorConfig};
use crate::scene::{PlacedObject, SceneGraph};
use crate::seed::{tags, Stream};

/// Something a finished blurred layer can be composited onto.
trait LayerTarget: Canvas {
    fn absorb(&mut self, layer: &Layer);
}

impl LayerTarget for Raster {
    fn absorb(&mut self, layer: &Layer) {
        layer.composite_onto(self);
    }
}

impl LayerTarget for Layer {
    fn absorb(&mut self, layer: &Layer) {
        layer.composite_onto_layer(self);
    }
}

/// Renders `scene`: background, then objects in list order with source-over,
/// then the config's filter chain.
///
/// Consecutive objects whose class has a `blur_sigma` are drawn into a
/// separate layer that is blurred before being composited. In hybrid mode the
/// objects form a foreground layer composited over the chosen photo.
pub fn render_scene(
    scene: &SceneGraph,
    config: &GeneratorConfig,
    backgrounds: &Backgrounds,
) -> Result<Raster, RenderError> {
    Ok(render_impl(scene, config, backgrounds, false)?.0)
}

/// [`render_scene`] plus the per-pixel object coverage in `[0, 1]`
/// (before the filter chain).
pub fn render_scene_with_coverage(
    scene: &SceneGraph,
    config: &GeneratorConfig,
    backgrounds: &Backgrounds,
) -> Result<(Raster, Vec<f32>), RenderError> {
    render_impl(scene, config, backgrounds, true)
}

fn render_impl(
    scene: &SceneGraph,
    config: &GeneratorConfig,
    backgrounds: &Backgrounds,
    want_coverage: bool,
) -> Result<(Raster, Vec<f32>), RenderError> {
    let (w, h) = (scene.width, scene.height);
    let mut fg = Layer::transparent(w, h);
    let mut out = match &config.background {
        BackgroundSpec::Procedural {
            base_rgb,
            noise_amplitude,
        } => {
            let mut stream = Stream::forked(scene.image_seed, tags::BACKGROUND);
            let mut canvas = procedural_background(*base_rgb, *noise_amplitude, w, h, &mut stream);
            paint_objects(&mut canvas, &scene.objects, config);
            if want_coverage {
                // Tracked separately so the canvas keeps single rounding.
                paint_objects(&mut fg, &scene.objects, config);
            }
            canvas
        }
        BackgroundSpec::Hybrid { directory } => {
            let draw = Stream::forked(scene.image_seed, tags::PHOTO_CHOICE).next_u64();
            let photo = backgrounds.pick(draw).ok_or_else(|| {
                RenderError::HybridSourceMissing(format!(
                    "no background photos loaded from {}",
                    directory.display()
                ))
            })?;
            paint_objects(&mut fg, &scene.objects, config);
            let (rgb, mask) = fg.split();
            composite_background(&rgb, &mask, photo)?
        }
    };
    let coverage = if !want_coverage {
        Vec::new()
    } else {
        (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| fg.alpha(x, y) as f32 / 255.0)
            .collect()
    };
    for filter in &config.filter_chain {
        out = apply_filter(&out, filter);
    }
    Ok((out, coverage))
}

fn paint_objects<T: LayerTarget>(
    target: &mut T,
    objects: &[PlacedObject],
    config: &GeneratorConfig,
) {
    let (w, h) = target.dims();
    let mut pending: Option<(f64, Layer)> = None;
    let flush = |target: &mut T, pending: &mut Option<(f64, Layer)>| {
        if let Some((sigma, mut layer)) = pending.take() {
            filter_layer(&mut layer, &FilterSpec::GaussianBlur { sigma });
            target.absorb(&layer);
        }
    };
    for obj in objects {
        let sigma = config.spec_for(obj.class).map_or(0.0, |s| s.blur_sigma);
        if sigma > 0.0 {
            if pending.as_ref().is_some_and(|(s, _)| *s != sigma) {
                flush(target, &mut pending);
            }
            let (_, layer) = pending.get_or_insert_with(|| (sigma, Layer::transparent(w, h)));
            for part in &obj.parts {
                draw_primitive(layer, &part.shape, &part.style);
            }
        } else {
            flush(target, &mut pending);
            for part in &obj.parts {
                draw_primitive(target, &part.shape, &part.style);
            }
        }
    }
    flush(target, &mut pending);
}
