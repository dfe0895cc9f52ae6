use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{
    creation_timestamp, encode_png, DatasetError, DatasetManifest, ManifestHeader, ManifestRow,
    Split, DENSITY_DIR, IMAGES_DIR, MANIFEST_FILE, MANIFEST_FORMAT,
};
use crate::config::{GeneratorConfig, Scenario};
use crate::groundtruth::{derive_ground_truth, render_density_map};
use crate::raster::{render_scene, Backgrounds};
use crate::scene::{sample_scene, sample_scene_with_fire};
use crate::seed::{derive_image_seed, tags, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateOptions {
    pub n_images: usize,
    /// Overrides `config.master_seed` when set.
    pub master_seed: Option<u64>,
    /// Exact ⌊n/2⌋ fire / ⌊n/2⌋ forest quota (classification only).
    pub balanced: bool,
    /// Also write a density map per image.
    pub density: bool,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
}

impl GenerateOptions {
    pub fn new(n_images: usize) -> Self {
        Self {
            n_images,
            master_seed: None,
            balanced: false,
            density: false,
            threads: 0,
        }
    }
}

pub fn image_id_for(index: usize) -> String {
    format!("img_{index:06}")
}

/// Fixed fire presence per image for a balanced run, `None` where the image
/// keeps its own draw (the odd leftover).
///
/// A permutation of `0..n` seeded from `master_seed` marks its first ⌊n/2⌋
/// entries fire and the next ⌊n/2⌋ forest.
pub fn plan_fire_labels(master_seed: u64, n: usize) -> Vec<Option<bool>> {
    let mut order: Vec<usize> = (0..n).collect();
    Stream::forked(master_seed, tags::FIRE_QUOTA).shuffle(&mut order);
    let half = n / 2;
    let mut plan = vec![None; n];
    for (rank, &i) in order.iter().enumerate() {
        if rank < half {
            plan[i] = Some(true);
        } else if rank < 2 * half {
            plan[i] = Some(false);
        }
    }
    plan
}

/// Generates `opts.n_images` images into `out_dir` and writes its manifest.
///
/// Image `i` depends only on the config and `derive_image_seed(master, i)`,
/// so the output does not depend on the worker count. On failure every file
/// written by this call is removed and the lowest failing index is reported.
pub fn generate_dataset(
    config: &GeneratorConfig,
    opts: &GenerateOptions,
    out_dir: &Path,
) -> Result<DatasetManifest, DatasetError> {
    if opts.n_images == 0 {
        return Err(DatasetError::InvalidArgument(
            "image count must be at least 1".into(),
        ));
    }
    let mut config = config.clone();
    if let Some(seed) = opts.master_seed {
        config.master_seed = seed;
    }
    let config_hash = config.hash()?;
    let backgrounds =
        Backgrounds::load(&config.background, config.image_width, config.image_height).map_err(
            |source| DatasetError::Render {
                index: 0,
                seed: derive_image_seed(config.master_seed, 0),
                source,
            },
        )?;

    let images_dir = out_dir.join(IMAGES_DIR);
    let density_dir = out_dir.join(DENSITY_DIR);
    let mut created = Vec::new();
    for dir in std::iter::once(out_dir)
        .chain(std::iter::once(images_dir.as_path()))
        .chain(opts.density.then_some(density_dir.as_path()))
    {
        if !dir.exists() {
            std::fs::create_dir_all(dir).map_err(DatasetError::io(dir))?;
            created.push(dir.to_path_buf());
        }
    }

    let plan = if opts.balanced && config.scenario == Scenario::FireClassification {
        plan_fire_labels(config.master_seed, opts.n_images)
    } else {
        vec![None; opts.n_images]
    };

    let job = |index: usize| -> Result<ManifestRow, DatasetError> {
        let seed = derive_image_seed(config.master_seed, index as u64);
        let scene = match plan[index] {
            Some(fire) => sample_scene_with_fire(&config, seed, fire),
            None => sample_scene(&config, seed),
        }
        .map_err(|source| DatasetError::Placement {
            index,
            seed,
            source,
        })?;
        let raster =
            render_scene(&scene, &config, &backgrounds).map_err(|source| DatasetError::Render {
                index,
                seed,
                source,
            })?;
        let id = image_id_for(index);
        let mut gt = derive_ground_truth(&scene, id.clone());
        let rel = format!("{IMAGES_DIR}/{id}.png");
        let path = out_dir.join(&rel);
        std::fs::write(&path, encode_png(&raster)).map_err(DatasetError::io(&path))?;
        if opts.density {
            let rel = format!("{DENSITY_DIR}/{id}.afdm");
            let path = out_dir.join(&rel);
            render_density_map(&scene, config.density_sigma)
                .save(&path)
                .map_err(DatasetError::io(&path))?;
            gt.density_ref = Some(rel);
        }
        Ok(ManifestRow {
            image_id: id,
            path: rel,
            image_seed: Some(seed),
            split: Split::Train,
            ground_truth: gt,
            config_hash: Some(config_hash.clone()),
            detail_version: Some(config.detail_version.clone()),
            parent_id: None,
            augmentation: None,
        })
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| DatasetError::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<ManifestRow, DatasetError>> =
        pool.install(|| (0..opts.n_images).into_par_iter().map(job).collect());

    let mut rows = Vec::with_capacity(opts.n_images);
    let mut failure = None;
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    let manifest = DatasetManifest {
        header: ManifestHeader {
            format: MANIFEST_FORMAT.to_string(),
            scenario: config.scenario,
            image_width: config.image_width,
            image_height: config.image_height,
            max_count: config.max_count,
            config_hash: Some(config_hash.clone()),
            master_seed: Some(config.master_seed),
            tool_version: Some(env!("CARGO_PKG_VERSION").to_string()),
            detail_version: Some(config.detail_version.clone()),
            created_at: Some(creation_timestamp()),
        },
        rows,
    };
    let result = match failure {
        Some(e) => Err(e),
        None => manifest.save(&out_dir.join(MANIFEST_FILE)),
    };
    if let Err(e) = result {
        cleanup(out_dir, opts, &created);
        return Err(e);
    }
    Ok(manifest)
}

fn cleanup(out_dir: &Path, opts: &GenerateOptions, created: &[PathBuf]) {
    for i in 0..opts.n_images {
        let id = image_id_for(i);
        let _ = std::fs::remove_file(out_dir.join(IMAGES_DIR).join(format!("{id}.png")));
        let _ = std::fs::remove_file(out_dir.join(DENSITY_DIR).join(format!("{id}.afdm")));
    }
    let _ = std::fs::remove_file(out_dir.join(MANIFEST_FILE).with_extension("jsonl.tmp"));
    // Only directories this call created, deepest first, and only if empty.
    for dir in created.iter().rev() {
        let _ = std::fs::remove_dir(dir);
    }
}
