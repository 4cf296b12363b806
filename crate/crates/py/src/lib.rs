//! Python bindings: configuration, meshes, descriptor models and the
//! file-based pipeline stages.

use std::path::{Path, PathBuf};

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

use mvdesc::geometry::{area_weighted_sample, bounding_sphere, load_mesh, TriangleMesh};
use mvdesc::network::io::{read_model, write_model};
use mvdesc::network::{contrastive_loss as loss_fn, descriptor_distance, DescriptorModel, StackInput};
use mvdesc::pipeline::{self, EmbedInputs, Manifest, PairSpec, PipelineConfig, PipelineError};

fn py_err(e: PipelineError) -> PyErr {
    match e {
        PipelineError::Numerical(_) => PyArithmeticError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn manifest(path: &str) -> PyResult<Manifest> {
    Manifest::load(Path::new(path)).map_err(py_err)
}

/// Pipeline configuration. `set("train.iterations", "50")` changes one
/// key; `str(cfg)` lists every key in the config file format.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: PipelineConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    fn new() -> Self {
        Self { inner: PipelineConfig::default() }
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        PipelineConfig::load(Path::new(path)).map(|inner| Self { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        PipelineConfig::parse(text).map(|inner| Self { inner }).map_err(py_err)
    }

    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.inner.set(key, value).map_err(py_err)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }
}

/// Triangle mesh with optional per-face part labels.
#[pyclass(name = "Mesh")]
struct PyMesh {
    inner: TriangleMesh,
}

#[pymethods]
impl PyMesh {
    #[staticmethod]
    #[pyo3(signature = (path, labels=None))]
    fn load(path: &str, labels: Option<&str>) -> PyResult<Self> {
        load_mesh(Path::new(path), labels.map(Path::new)).map(|inner| Self { inner }).map_err(value_err)
    }

    #[getter]
    fn vertex_count(&self) -> usize {
        self.inner.vertices().len()
    }

    #[getter]
    fn face_count(&self) -> usize {
        self.inner.face_count()
    }

    fn total_area(&self) -> f64 {
        self.inner.total_area()
    }

    fn bounding_radius(&self) -> PyResult<f64> {
        bounding_sphere(&self.inner).map(|s| s.radius).map_err(value_err)
    }

    /// Area-weighted surface samples as `(position, normal, face, label)`.
    #[allow(clippy::type_complexity)]
    fn sample(&self, n: usize, seed: u64) -> PyResult<Vec<([f64; 3], [f64; 3], u32, Option<u32>)>> {
        let s = area_weighted_sample(&self.inner, n, seed).map_err(value_err)?;
        Ok(s.iter()
            .map(|p| (p.position.into(), p.normal.into(), p.face_id, p.label))
            .collect())
    }
}

/// Multi-view descriptor network.
#[pyclass(name = "Model")]
struct PyModel {
    inner: DescriptorModel,
}

#[pymethods]
impl PyModel {
    /// Fresh model with the network settings of `config`.
    #[new]
    #[pyo3(signature = (config=None, seed=0))]
    fn new(config: Option<PyConfig>, seed: u64) -> PyResult<Self> {
        let cfg = config.map(|c| c.inner).unwrap_or_default();
        DescriptorModel::new(cfg.network, seed).map(|inner| Self { inner }).map_err(value_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        pipeline::load_model(Path::new(path)).map(|inner| Self { inner }).map_err(py_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let f = std::fs::File::create(path)?;
        write_model(&self.inner, std::io::BufWriter::new(f)).map_err(value_err)
    }

    /// Round trip through the model file format, in memory.
    fn copy(&self) -> PyResult<Self> {
        let mut buf = Vec::new();
        write_model(&self.inner, &mut buf).map_err(value_err)?;
        read_model(&buf[..]).map(|inner| Self { inner }).map_err(value_err)
    }

    #[getter]
    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    #[getter]
    fn input_resolution(&self) -> usize {
        self.inner.config().input_resolution
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    /// Descriptor of one point from its rendered views: `(view_id, pixels)`
    /// with row-major 8-bit grayscale images at the input resolution.
    fn embed_views(&self, views: Vec<(u32, Vec<u8>)>) -> PyResult<Vec<f64>> {
        let stack = StackInput::from_bytes(self.inner.config().input_resolution, views).map_err(value_err)?;
        self.inner.embed_stack(&stack).map_err(value_err)
    }
}

/// Contrastive loss of one descriptor pair.
#[pyfunction]
#[pyo3(signature = (a, b, corresponding, margin=1.0))]
fn contrastive_loss(a: Vec<f64>, b: Vec<f64>, corresponding: bool, margin: f64) -> PyResult<f64> {
    if a.len() != b.len() {
        return Err(PyValueError::new_err("descriptor lengths differ"));
    }
    Ok(loss_fn(&a, &b, corresponding, margin).0)
}

#[pyfunction]
fn distance(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    if a.len() != b.len() {
        return Err(PyValueError::new_err("descriptor lengths differ"));
    }
    Ok(descriptor_distance(&a, &b))
}

#[pyfunction]
fn stage_seed(global: u64, stage: &str) -> u64 {
    mvdesc::seed::stage_seed(global, stage)
}

fn config_or_default(config: Option<PyConfig>) -> PipelineConfig {
    config.map(|c| c.inner).unwrap_or_default()
}

#[pyfunction]
#[pyo3(signature = (out, train_per_class=3, test_per_class=2, seed=0))]
fn toy(out: &str, train_per_class: usize, test_per_class: usize, seed: u64) -> PyResult<()> {
    pipeline::cmd_toy(Path::new(out), train_per_class, test_per_class, seed).map_err(py_err)
}

/// Samples every shape of a manifest; returns the number of shapes.
#[pyfunction]
#[pyo3(signature = (manifest_path, out, points=None, config=None))]
fn sample(py: Python<'_>, manifest_path: &str, out: &str, points: Option<usize>, config: Option<PyConfig>) -> PyResult<usize> {
    let cfg = config_or_default(config);
    let m = manifest(manifest_path)?;
    let n = points.unwrap_or(cfg.sample_points);
    py.detach(|| pipeline::cmd_sample(&m, n, m.seed, &cfg, Path::new(out))).map_err(py_err)
}

/// Registers shape pairs (all same-category pairs unless `pairs` names a
/// file). Returns `(category, shapes, pairs, correspondences)` rows.
#[pyfunction]
#[pyo3(signature = (manifest_path, samples, out, pairs=None, config=None))]
fn register(
    py: Python<'_>,
    manifest_path: &str,
    samples: &str,
    out: &str,
    pairs: Option<&str>,
    config: Option<PyConfig>,
) -> PyResult<Vec<(String, usize, usize, usize)>> {
    let cfg = config_or_default(config);
    let m = manifest(manifest_path)?;
    let spec = match pairs {
        Some(p) => PairSpec::read(Path::new(p)).map_err(py_err)?,
        None => PairSpec::AllPerCategory,
    };
    let s = py.detach(|| pipeline::cmd_register(&m, Path::new(samples), &spec, &cfg, Path::new(out))).map_err(py_err)?;
    Ok(s.rows)
}

/// Trains a model and writes it with its loss log; returns the losses.
#[pyfunction]
#[pyo3(signature = (manifest_path, samples, correspondences, model_out, config=None))]
fn train(
    py: Python<'_>,
    manifest_path: &str,
    samples: &str,
    correspondences: &str,
    model_out: &str,
    config: Option<PyConfig>,
) -> PyResult<Vec<f64>> {
    let cfg = config_or_default(config);
    let m = manifest(manifest_path)?;
    let model_out = PathBuf::from(model_out);
    let log = model_out.with_extension("loss.csv");
    let s = py
        .detach(|| pipeline::cmd_train(&m, Path::new(samples), Path::new(correspondences), &cfg, &model_out, &log, |_, _| {}))
        .map_err(py_err)?;
    Ok(s.losses)
}

/// Writes descriptor files for samples and/or features; returns the count.
#[pyfunction]
#[pyo3(signature = (manifest_path, model, out, samples=None, features=None, config=None))]
fn embed(
    py: Python<'_>,
    manifest_path: &str,
    model: &PyModel,
    out: &str,
    samples: Option<&str>,
    features: Option<&str>,
    config: Option<PyConfig>,
) -> PyResult<usize> {
    let cfg = config_or_default(config);
    let m = manifest(manifest_path)?;
    let inputs = EmbedInputs {
        samples_dir: samples.map(PathBuf::from),
        features: features.map(PathBuf::from),
    };
    py.detach(|| pipeline::cmd_embed(&m, &model.inner, &inputs, &cfg, Path::new(out))).map_err(py_err)
}

/// Writes the curve CSVs and returns `{name: (x, y)}`.
#[pyfunction]
#[pyo3(signature = (descriptors, features, out, symmetry=None, config=None))]
#[allow(clippy::type_complexity)]
fn evaluate(
    py: Python<'_>,
    descriptors: &str,
    features: &str,
    out: &str,
    symmetry: Option<&str>,
    config: Option<PyConfig>,
) -> PyResult<Vec<(String, Vec<f64>, Vec<f64>)>> {
    let cfg = config_or_default(config);
    let curves = py
        .detach(|| {
            pipeline::cmd_evaluate(
                Path::new(descriptors),
                Path::new(features),
                symmetry.map(Path::new),
                symmetry.is_some(),
                &cfg,
                Path::new(out),
            )
        })
        .map_err(py_err)?;
    Ok(curves.into_iter().map(|(n, c)| (n, c.x, c.y)).collect())
}

#[pymodule]
fn pymvdesc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyMesh>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(contrastive_loss, m)?)?;
    m.add_function(wrap_pyfunction!(distance, m)?)?;
    m.add_function(wrap_pyfunction!(stage_seed, m)?)?;
    m.add_function(wrap_pyfunction!(toy, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(register, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(embed, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
