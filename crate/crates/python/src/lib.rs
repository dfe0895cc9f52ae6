//! Python bindings for `aeroforge`.
//!
//! Configs travel as JSON strings; structured results (ground truth, reports,
//! stats) come back as plain dicts.

use std::path::PathBuf;

use aeroforge::config::{ConfigError, GeneratorConfig, Scenario};
use aeroforge::dataset::{self, encode_png, DatasetError, DatasetManifest, GenerateOptions, Split};
use aeroforge::eval::{evaluate as eval_report, EvalError, PredictionSet, Task};
use aeroforge::raster::{Backgrounds, RenderError};
use aeroforge::{
    derive_ground_truth, render_density_map, render_scene, sample_scene, SceneError, SceneGraph,
};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

create_exception!(
    aeroforge_py,
    PlacementError,
    PyException,
    "Object placement ran out of attempts."
);

fn config_err(e: ConfigError) -> PyErr {
    match e {
        ConfigError::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn scene_err(e: SceneError) -> PyErr {
    PlacementError::new_err(e.to_string())
}

fn render_err(e: RenderError) -> PyErr {
    PyOSError::new_err(e.to_string())
}

fn dataset_err(e: DatasetError) -> PyErr {
    match e {
        DatasetError::Config(c) => config_err(c),
        DatasetError::Placement { .. } => PlacementError::new_err(e.to_string()),
        DatasetError::Io { .. } | DatasetError::Render { .. } | DatasetError::Image { .. } => {
            PyOSError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn eval_err(e: EvalError) -> PyErr {
    match e {
        EvalError::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_scenario(name: &str) -> PyResult<Scenario> {
    match name {
        "fire" | "fire_classification" => Ok(Scenario::FireClassification),
        "counting" | "house_counting" => Ok(Scenario::HouseCounting),
        other => Err(PyValueError::new_err(format!(
            "unknown scenario {other:?} (expected fire or counting)"
        ))),
    }
}

fn parse_config(config: Option<&str>, scenario: &str) -> PyResult<GeneratorConfig> {
    match config {
        Some(text) => GeneratorConfig::from_json(text).map_err(config_err),
        None => Ok(GeneratorConfig::default_for(parse_scenario(scenario)?)),
    }
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Per-image seed for `image_index` under `master_seed`.
#[pyfunction]
fn derive_image_seed(master_seed: u64, image_index: u64) -> u64 {
    aeroforge::derive_image_seed(master_seed, image_index)
}

/// Default config for "fire" or "counting", as pretty JSON.
#[pyfunction]
#[pyo3(signature = (scenario = "counting"))]
fn default_config(scenario: &str) -> PyResult<String> {
    Ok(GeneratorConfig::default_for(parse_scenario(scenario)?).to_json_pretty())
}

/// SHA-256 of the canonical JSON of a validated config.
#[pyfunction]
fn config_hash(config: &str) -> PyResult<String> {
    GeneratorConfig::from_json(config)
        .and_then(|c| c.hash())
        .map_err(config_err)
}

/// A sampled scene plus the config it came from.
#[pyclass(module = "aeroforge_py", frozen)]
struct Scene {
    scene: SceneGraph,
    config: GeneratorConfig,
}

#[pymethods]
impl Scene {
    #[getter]
    fn image_seed(&self) -> u64 {
        self.scene.image_seed
    }

    #[getter]
    fn width(&self) -> u32 {
        self.scene.width
    }

    #[getter]
    fn height(&self) -> u32 {
        self.scene.height
    }

    #[getter]
    fn contains_fire(&self) -> bool {
        self.scene.contains_fire
    }

    #[getter]
    fn house_count(&self) -> usize {
        self.scene.house_tally()
    }

    #[getter]
    fn object_count(&self) -> usize {
        self.scene.objects.len()
    }

    /// Row-major RGB8 pixels, `width * height * 3` bytes.
    fn render<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let raster = self.rendered()?;
        Ok(PyBytes::new(py, raster.pixels()))
    }

    /// The rendered image encoded as PNG.
    fn png<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let raster = self.rendered()?;
        Ok(PyBytes::new(py, &encode_png(&raster)))
    }

    #[pyo3(signature = (image_id = "img_000000"))]
    fn ground_truth<'py>(&self, py: Python<'py>, image_id: &str) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &derive_ground_truth(&self.scene, image_id))
    }

    /// Row-major density values (one per pixel) integrating to the house count.
    #[pyo3(signature = (sigma = 3.0))]
    fn density_map(&self, sigma: f64) -> PyResult<Vec<f32>> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(PyValueError::new_err("sigma must be positive"));
        }
        Ok(render_density_map(&self.scene, sigma).values)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.scene)
    }

    fn __repr__(&self) -> String {
        format!(
            "Scene(seed={:#018x}, {}x{}, objects={}, houses={}, fire={})",
            self.scene.image_seed,
            self.scene.width,
            self.scene.height,
            self.scene.objects.len(),
            self.scene.house_tally(),
            self.scene.contains_fire
        )
    }
}

impl Scene {
    fn rendered(&self) -> PyResult<aeroforge::Raster> {
        let bg = Backgrounds::load(&self.config.background, self.scene.width, self.scene.height)
            .map_err(render_err)?;
        render_scene(&self.scene, &self.config, &bg).map_err(render_err)
    }
}

/// Samples the scene for `image_seed` from a JSON config, or from the
/// scenario default when `config` is omitted.
#[pyfunction]
#[pyo3(signature = (image_seed, config = None, scenario = "counting"))]
fn scene(image_seed: u64, config: Option<&str>, scenario: &str) -> PyResult<Scene> {
    let config = parse_config(config, scenario)?;
    config.validate().map_err(config_err)?;
    let scene = sample_scene(&config, image_seed).map_err(scene_err)?;
    Ok(Scene { scene, config })
}

/// Writes a dataset to `out_dir`; returns the manifest path.
#[pyfunction]
#[pyo3(signature = (out_dir, count, config = None, scenario = "counting", seed = None, balanced = false, density = false, threads = 0))]
#[allow(clippy::too_many_arguments)]
fn generate_dataset(
    py: Python<'_>,
    out_dir: PathBuf,
    count: usize,
    config: Option<&str>,
    scenario: &str,
    seed: Option<u64>,
    balanced: bool,
    density: bool,
    threads: usize,
) -> PyResult<PathBuf> {
    let config = parse_config(config, scenario)?;
    let mut opts = GenerateOptions::new(count);
    opts.master_seed = seed;
    opts.balanced = balanced;
    opts.density = density;
    opts.threads = threads;
    py.detach(|| dataset::generate_dataset(&config, &opts, &out_dir))
        .map_err(dataset_err)?;
    Ok(out_dir.join(dataset::MANIFEST_FILE))
}

/// Checks a manifest against its files; returns the report as a dict.
#[pyfunction]
fn validate_manifest<'py>(py: Python<'py>, manifest: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let report = py
        .detach(|| dataset::validate_manifest(&manifest))
        .map_err(dataset_err)?;
    to_py(py, &report)
}

#[pyfunction]
fn dataset_stats<'py>(py: Python<'py>, manifest: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let m = DatasetManifest::load(&manifest).map_err(dataset_err)?;
    to_py(py, &dataset::dataset_stats(&m))
}

/// Scores a predictions CSV against a manifest. `task` is "classify" or "count".
#[pyfunction]
#[pyo3(signature = (manifest, predictions, task, split = None, round = false, worst = 10))]
fn evaluate<'py>(
    py: Python<'py>,
    manifest: PathBuf,
    predictions: PathBuf,
    task: &str,
    split: Option<&str>,
    round: bool,
    worst: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let task = match task {
        "classify" => Task::Classify,
        "count" => Task::Count,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown task {other:?} (expected classify or count)"
            )))
        }
    };
    let split = split
        .map(str::parse::<Split>)
        .transpose()
        .map_err(PyValueError::new_err)?;
    let m = DatasetManifest::load(&manifest).map_err(dataset_err)?;
    let preds = PredictionSet::load(&predictions).map_err(eval_err)?;
    let report = eval_report(task, &preds, &m, split, worst, round).map_err(eval_err)?;
    to_py(py, &report)
}

#[pymodule]
fn aeroforge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("PlacementError", m.py().get_type::<PlacementError>())?;
    m.add_class::<Scene>()?;
    m.add_function(wrap_pyfunction!(derive_image_seed, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(config_hash, m)?)?;
    m.add_function(wrap_pyfunction!(scene, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(validate_manifest, m)?)?;
    m.add_function(wrap_pyfunction!(dataset_stats, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
