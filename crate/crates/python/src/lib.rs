//! Python bindings for the gazewheel engine.
//!
//! Structured values cross the boundary as plain dicts and lists, built from
//! the same JSON shapes the command line tools read and write.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use gazewheel_core::calibration::{self, CalibrationError, CalibrationSample};
use gazewheel_core::codec;
use gazewheel_core::config::{self, ConfigError};
use gazewheel_core::engine;
use gazewheel_core::model::{BlendShapeVector, FaceBox, GazeAngles, ScreenSize};
use gazewheel_core::replay::{replay_text, Speed};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn config_error(e: ConfigError) -> PyErr {
    match e {
        ConfigError::Io { .. } => PyIOError::new_err(e.to_string()),
        other => value_error(other),
    }
}

fn calibration_error(e: CalibrationError) -> PyErr {
    match e {
        CalibrationError::Io(_) => PyIOError::new_err(e.to_string()),
        other => value_error(other),
    }
}

fn json_loads<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn json_dumps(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()
}

/// Frame line text, accepted either as a string or as a dict.
fn frame_line(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    match obj.extract::<String>() {
        Ok(s) => Ok(s),
        Err(_) => json_dumps(obj),
    }
}

/// Parses a frame line and returns it as a dict. Raises ValueError on any
/// validation failure.
#[pyfunction]
fn decode_frame<'py>(py: Python<'py>, line: &str) -> PyResult<Bound<'py, PyAny>> {
    let frame = codec::decode_frame(line).map_err(value_error)?;
    json_loads(py, &codec::encode_frame(&frame))
}

/// Validates a frame dict and returns its canonical line.
#[pyfunction]
fn encode_frame(frame: &Bound<'_, PyAny>) -> PyResult<String> {
    let parsed = codec::decode_frame(&frame_line(frame)?).map_err(value_error)?;
    Ok(codec::encode_frame(&parsed))
}

#[pyclass(name = "Profile", module = "gazewheel", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyProfile {
    inner: config::Profile,
}

#[pymethods]
impl PyProfile {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyProfile {
            inner: config::load_profile(path).map_err(config_error)?,
        })
    }

    #[staticmethod]
    fn from_yaml(text: &str) -> PyResult<Self> {
        Ok(PyProfile {
            inner: config::Profile::from_yaml(text).map_err(config_error)?,
        })
    }

    fn to_yaml(&self) -> String {
        self.inner.to_yaml()
    }

    #[getter]
    fn modes(&self) -> Vec<String> {
        self.inner.keymaps().keys().cloned().collect()
    }

    #[getter]
    fn intentions(&self) -> Vec<String> {
        self.inner
            .expressions()
            .specs()
            .iter()
            .map(|s| s.name.clone())
            .collect()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings().to_vec()
    }

    /// Returns `(reachable, unreachable)`; each reachable entry is
    /// `(key, mode, intention, item_index)`.
    #[allow(clippy::type_complexity)]
    fn coverage(&self, keys: Vec<String>) -> (Vec<(String, String, String, usize)>, Vec<String>) {
        let report = config::validate_coverage(&self.inner, &keys);
        let reachable = report
            .reachable
            .into_iter()
            .map(|p| (p.key, p.mode, p.intention, p.index))
            .collect();
        (reachable, report.unreachable)
    }

    /// Intentions active for a blendshape dict (missing names read as 0).
    /// With `raw=True` the priority rules are not applied.
    #[pyo3(signature = (blend, raw = false))]
    fn eval_intentions(&self, blend: std::collections::HashMap<String, f64>, raw: bool) -> PyResult<Vec<String>> {
        let vector = BlendShapeVector::from_pairs(blend.iter().map(|(k, v)| (k.as_str(), *v))).map_err(value_error)?;
        let exprs = self.inner.expressions();
        let set = if raw {
            exprs.eval_intentions(&vector)
        } else {
            exprs.evaluate(&vector)
        };
        Ok(exprs.names(set).into_iter().map(String::from).collect())
    }
}

#[pyclass(name = "CalibrationModel", module = "gazewheel", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: calibration::CalibrationModel,
}

fn sample_from(obj: &Bound<'_, PyAny>) -> PyResult<CalibrationSample> {
    let text = json_dumps(obj)?;
    serde_json::from_str(&text).map_err(value_error)
}

#[pymethods]
impl PyModel {
    /// Fits a model from sample dicts shaped like the sample file entries:
    /// `{"gaze": {...}, "box": {...}, "target": {"x": .., "y": ..}}`.
    #[staticmethod]
    fn fit(samples: Vec<Bound<'_, PyAny>>) -> PyResult<Self> {
        let samples = samples.iter().map(sample_from).collect::<PyResult<Vec<_>>>()?;
        Ok(PyModel {
            inner: calibration::fit_calibration(&samples).map_err(calibration_error)?,
        })
    }

    /// Fits from a calibration sample file.
    #[staticmethod]
    fn fit_file(path: PathBuf) -> PyResult<Self> {
        let set = calibration::SampleSet::load(&path).map_err(calibration_error)?;
        Ok(PyModel {
            inner: set.fit().map_err(calibration_error)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel {
            inner: calibration::CalibrationModel::load(&path).map_err(calibration_error)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(calibration_error)
    }

    #[getter]
    fn penalty(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn cv_mse(&self) -> f64 {
        self.inner.cv_mse
    }

    /// Screen point for a gaze direction, clamped to the screen.
    #[pyo3(signature = (yaw, pitch, face_box = (0.35, 0.25, 0.65, 0.75), screen = (1920, 1080)))]
    fn predict(&self, yaw: f64, pitch: f64, face_box: (f64, f64, f64, f64), screen: (u32, u32)) -> (f64, f64) {
        let (x0, y0, x1, y1) = face_box;
        let p = calibration::predict_gaze_point(
            &self.inner,
            &GazeAngles { yaw, pitch },
            &FaceBox { x0, y0, x1, y1 },
            ScreenSize::new(screen.0, screen.1),
        );
        (p.x, p.y)
    }
}

#[pyclass(name = "Engine", module = "gazewheel", unsendable)]
struct PyEngine {
    inner: engine::Engine,
}

#[pymethods]
impl PyEngine {
    #[new]
    #[pyo3(signature = (profile, model = None))]
    fn new(profile: &PyProfile, model: Option<&PyModel>) -> Self {
        PyEngine {
            inner: engine::Engine::new(profile.inner.clone(), model.map(|m| m.inner.clone())),
        }
    }

    /// Processes one frame (line or dict) and returns the emitted events as
    /// `t\tkind\tpayload` strings.
    fn step(&mut self, frame: &Bound<'_, PyAny>) -> PyResult<Vec<String>> {
        let frame = codec::decode_frame(&frame_line(frame)?).map_err(value_error)?;
        Ok(self.inner.step(&frame).iter().map(|e| e.to_string()).collect())
    }

    /// Releases everything still held at the last frame time.
    fn finish(&mut self) -> Vec<String> {
        self.inner.finish_now().iter().map(|e| e.to_string()).collect()
    }

    fn switch_mode(&mut self, t_ms: u64, mode: &str) -> PyResult<()> {
        if self.inner.profile().keymap(mode).is_none() {
            return Err(PyValueError::new_err(format!("unknown mode {mode:?}")));
        }
        self.inner.switch_mode(t_ms, mode);
        Ok(())
    }

    fn snapshot<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_loads(py, &self.inner.snapshot().to_json_line())
    }

    /// The full log so far, notes and diagnostics included.
    fn log_text(&self) -> String {
        self.inner.log().to_text()
    }

    #[getter]
    fn mode(&self) -> Option<String> {
        self.inner.mode().map(String::from)
    }

    #[getter]
    fn held_keys(&self) -> Vec<String> {
        self.inner.held_keys()
    }
}

/// Replays trace text and returns the rendered event log.
#[pyfunction]
#[pyo3(signature = (profile, trace, model = None))]
fn replay(profile: &PyProfile, trace: &str, model: Option<&PyModel>) -> PyResult<String> {
    let log = replay_text(trace, &profile.inner, model.map(|m| &m.inner), Speed::Max, None)
        .map_err(value_error)?;
    Ok(log.to_text())
}

#[pymodule]
fn gazewheel(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(decode_frame, m)?)?;
    m.add_function(wrap_pyfunction!(encode_frame, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_class::<PyProfile>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyEngine>()?;
    let names = PyDict::new(m.py());
    for (i, n) in gazewheel_core::model::BLENDSHAPE_NAMES.iter().enumerate() {
        names.set_item(*n, i)?;
    }
    m.add("BLENDSHAPES", names)?;
    Ok(())
}
