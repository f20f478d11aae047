//! Python bindings: rasters, masks, the fourteen sky markers, metrics, synthetic scenes and the selector.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use skymark_core::metrics;
use skymark_core::raster::{decode_mask as core_decode, encode_mask as core_encode};
use skymark_core::selector::{self, SelectorModel, TrainParams};
use skymark_core::synth::{self, SceneClass};
use skymark_core::{Error, MaskConvention, Raster, SkyMask, Technique, TechniqueId};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::File { .. } | Error::ImageIo { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

/// An 8-bit RGB image.
#[pyclass(name = "Raster", module = "skymark", frozen, from_py_object)]
#[derive(Clone)]
struct PyRaster {
    inner: Raster,
}

#[pymethods]
impl PyRaster {
    /// Builds a raster from interleaved RGB bytes, row by row.
    #[new]
    fn new(width: usize, height: usize, data: &[u8]) -> PyResult<Self> {
        if data.len() != width * height * 3 {
            return Err(PyValueError::new_err(format!(
                "expected {} bytes for {width}x{height} RGB, got {}",
                width * height * 3,
                data.len()
            )));
        }
        let pixels = data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Ok(Self { inner: Raster::new(width, height, pixels).map_err(to_py)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: Raster::load(&path).map_err(to_py)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn pixel(&self, x: usize, y: usize) -> PyResult<(u8, u8, u8)> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(PyValueError::new_err("pixel outside the raster"));
        }
        let [r, g, b] = self.inner.get(x, y);
        Ok((r, g, b))
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        let flat: Vec<u8> = self.inner.pixels().iter().flatten().copied().collect();
        PyBytes::new(py, &flat)
    }

    fn __repr__(&self) -> String {
        format!("Raster({}x{})", self.inner.width(), self.inner.height())
    }
}

/// A binary sky mask (True = sky).
#[pyclass(name = "SkyMask", module = "skymark", frozen, from_py_object)]
#[derive(Clone)]
struct PySkyMask {
    inner: SkyMask,
}

#[pymethods]
impl PySkyMask {
    #[new]
    fn new(width: usize, height: usize, bits: Vec<bool>) -> PyResult<Self> {
        Ok(Self { inner: SkyMask::new(width, height, bits).map_err(to_py)? })
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn get(&self, x: usize, y: usize) -> PyResult<bool> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(PyValueError::new_err("pixel outside the mask"));
        }
        Ok(self.inner.get(x, y))
    }

    fn count(&self) -> usize {
        self.inner.count()
    }

    fn sky_fraction(&self) -> f64 {
        self.inner.sky_fraction()
    }

    fn to_list(&self) -> Vec<bool> {
        self.inner.bits().to_vec()
    }

    /// White sky on black.
    fn to_raster(&self) -> PyRaster {
        PyRaster { inner: self.inner.to_raster() }
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "SkyMask({}x{}, sky_fraction={:.4})",
            self.inner.width(),
            self.inner.height(),
            self.inner.sky_fraction()
        )
    }
}

/// A trained technique selector.
#[pyclass(name = "SelectorModel", module = "skymark", frozen)]
struct PySelector {
    inner: SelectorModel,
}

#[pymethods]
impl PySelector {
    /// Labels each (image, truth) pair with its most accurate technique and fits the selector.
    #[staticmethod]
    #[pyo3(signature = (images, truths, seed=17, epochs=200))]
    fn train(py: Python<'_>, images: Vec<PyRaster>, truths: Vec<PySkyMask>, seed: u64, epochs: usize) -> PyResult<Self> {
        if images.len() != truths.len() {
            return Err(PyValueError::new_err("images and truths differ in length"));
        }
        let data: Vec<(Raster, SkyMask)> = images.into_iter().zip(truths).map(|(i, t)| (i.inner, t.inner)).collect();
        let params = TrainParams { seed, epochs, ..Default::default() };
        let model = py
            .detach(|| selector::generate_labels(&data, seed).and_then(|l| SelectorModel::train(&l, &params)))
            .map_err(to_py)?;
        Ok(Self { inner: model })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: SelectorModel::load(&path).map_err(to_py)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    /// Technique names, most suitable first.
    fn rank(&self, image: &PyRaster) -> Vec<String> {
        let f = selector::extract_features(&image.inner);
        self.inner.predict_ranked(&f).iter().map(|t| t.name().to_string()).collect()
    }

    /// Runs the top-ranked technique; returns the mask and the technique used.
    #[pyo3(signature = (image, seed=17))]
    fn adaptive(&self, py: Python<'_>, image: &PyRaster, seed: u64) -> PyResult<(PySkyMask, String)> {
        let (mask, t) = py
            .detach(|| selector::adaptive_mask(&image.inner, &self.inner, seed))
            .map_err(to_py)?;
        Ok((PySkyMask { inner: mask }, t.name().to_string()))
    }
}

/// All fourteen technique names: the thirteen variants, then the flood-fill benchmark.
#[pyfunction]
fn techniques() -> Vec<&'static str> {
    Technique::all().iter().map(|t| t.name()).collect()
}

#[pyfunction]
#[pyo3(signature = (technique, image, seed=17))]
fn apply(py: Python<'_>, technique: &str, image: &PyRaster, seed: u64) -> PyResult<PySkyMask> {
    let t: Technique = parse(technique)?;
    let mask = py.detach(|| t.apply(&image.inner, seed)).map_err(to_py)?;
    Ok(PySkyMask { inner: mask })
}

/// Per-technique pixel accuracy, keyed by technique name.
#[pyfunction]
#[pyo3(signature = (image, truth, seed=17))]
fn score_techniques(py: Python<'_>, image: &PyRaster, truth: &PySkyMask, seed: u64) -> PyResult<Vec<(String, f64)>> {
    let scores = py
        .detach(|| selector::score_techniques(&image.inner, &truth.inner, seed))
        .map_err(to_py)?;
    Ok(TechniqueId::ALL.iter().zip(scores).map(|(t, s)| (t.name().to_string(), s)).collect())
}

#[pyfunction]
fn decode_mask(image: &PyRaster, convention: &str) -> PyResult<PySkyMask> {
    let conv: MaskConvention = parse(convention)?;
    Ok(PySkyMask { inner: core_decode(&image.inner, conv) })
}

#[pyfunction]
fn encode_mask(image: &PyRaster, mask: &PySkyMask, convention: &str) -> PyResult<PyRaster> {
    let conv: MaskConvention = parse(convention)?;
    Ok(PyRaster { inner: core_encode(&image.inner, &mask.inner, conv).map_err(to_py)? })
}

#[pyfunction]
fn confusion<'py>(py: Python<'py>, pred: &PySkyMask, truth: &PySkyMask) -> PyResult<Bound<'py, PyDict>> {
    let c = metrics::confusion(&pred.inner, &truth.inner).map_err(to_py)?;
    let p = metrics::prf1(&c);
    let d = PyDict::new(py);
    d.set_item("tp", c.tp)?;
    d.set_item("fp", c.fp)?;
    d.set_item("tn", c.tn)?;
    d.set_item("fn", c.fn_)?;
    d.set_item("accuracy", c.accuracy())?;
    d.set_item("precision", p.precision)?;
    d.set_item("recall", p.recall)?;
    d.set_item("f1", p.f1)?;
    Ok(d)
}

/// RMSE, squared Pearson correlation and Willmott's d of predicted against observed sky fractions.
#[pyfunction]
fn series_stats(pred: Vec<f64>, obs: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let s = metrics::series_stats(&pred, &obs).map_err(to_py)?;
    Ok((s.rmse, s.r2, s.d))
}

#[pyfunction]
fn extract_features(image: &PyRaster) -> Vec<f64> {
    selector::extract_features(&image.inner).as_slice().to_vec()
}

/// Renders one random scene of a class (clear, patchy, overcast, trees, skyline).
#[pyfunction]
#[pyo3(signature = (scene_class, seed, width=synth::DEFAULT_WIDTH, height=synth::DEFAULT_HEIGHT))]
fn synth_scene(scene_class: &str, seed: u64, width: usize, height: usize) -> PyResult<(PyRaster, PySkyMask)> {
    use rand::SeedableRng;
    let class: SceneClass = parse(scene_class)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let scene = synth::render(&synth::random_spec(class, width, height, &mut rng)).map_err(to_py)?;
    Ok((PyRaster { inner: scene.image }, PySkyMask { inner: scene.truth }))
}

#[pymodule]
fn skymark(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRaster>()?;
    m.add_class::<PySkyMask>()?;
    m.add_class::<PySelector>()?;
    m.add_function(wrap_pyfunction!(techniques, m)?)?;
    m.add_function(wrap_pyfunction!(apply, m)?)?;
    m.add_function(wrap_pyfunction!(score_techniques, m)?)?;
    m.add_function(wrap_pyfunction!(decode_mask, m)?)?;
    m.add_function(wrap_pyfunction!(encode_mask, m)?)?;
    m.add_function(wrap_pyfunction!(confusion, m)?)?;
    m.add_function(wrap_pyfunction!(series_stats, m)?)?;
    m.add_function(wrap_pyfunction!(extract_features, m)?)?;
    m.add_function(wrap_pyfunction!(synth_scene, m)?)?;
    Ok(())
}
