//! Python bindings: run sessions against the built-in fixture domains,
//! inspect state and traces, extract slots, replay and score.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use serde_json::Value;

use tod_core::eval::{self, ReplayOptions, ScoreSummary};
use tod_core::nlu::rule_based_extract;
use tod_core::strategy::Speaker;
use tod_core::{fixtures, DomainDictionary, Engine};

create_exception!(tod_py, TodError, PyException);

fn dictionary(domain: &str) -> PyResult<Arc<DomainDictionary>> {
    fixtures::by_domain(&domain.trim().to_lowercase())
        .ok_or_else(|| PyValueError::new_err(format!("unknown domain `{domain}`")))
}

fn to_py<'py>(py: Python<'py>, value: &Value) -> PyResult<Bound<'py, PyAny>> {
    match value {
        Value::Null => Ok(py.None().into_bound(py)),
        Value::Bool(b) => b.into_bound_py_any(py),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.into_bound_py_any(py),
            (None, Some(u)) => u.into_bound_py_any(py),
            _ => n.as_f64().unwrap_or(f64::NAN).into_bound_py_any(py),
        },
        Value::String(s) => s.into_bound_py_any(py),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            Ok(list.into_any())
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, to_py(py, v)?)?;
            }
            Ok(dict.into_any())
        }
    }
}

fn serialize<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let json = serde_json::to_value(value).map_err(|e| TodError::new_err(e.to_string()))?;
    to_py(py, &json)
}

/// One conversation with the rule-based engine over a fixture domain.
#[pyclass(module = "tod_py")]
struct Session {
    inner: Mutex<tod_core::Session>,
}

impl Session {
    fn with<R>(&self, f: impl FnOnce(&mut tod_core::Session) -> R) -> R {
        let mut guard = self.inner.lock().unwrap_or_else(|p| p.into_inner());
        f(&mut guard)
    }
}

#[pymethods]
impl Session {
    #[new]
    #[pyo3(signature = (domain, session_id = "python"))]
    fn new(domain: &str, session_id: &str) -> PyResult<Self> {
        let session = tod_core::Session::new(session_id, dictionary(domain)?, Engine::rule_based());
        Ok(Self {
            inner: Mutex::new(session),
        })
    }

    /// Feeds one user utterance; returns the turn as a dict.
    fn advance<'py>(&self, py: Python<'py>, utterance: &str) -> PyResult<Bound<'py, PyAny>> {
        let turn = py
            .detach(|| self.with(|s| s.advance(Some(utterance))))
            .map_err(|e| TodError::new_err(e.to_string()))?;
        serialize(py, &turn)
    }

    #[getter]
    fn completed(&self) -> bool {
        self.with(|s| s.is_completed())
    }

    #[getter]
    fn stage(&self) -> String {
        self.with(|s| format!("{:?}", s.stage()))
    }

    /// The information state as a JSON document.
    fn state_json(&self) -> String {
        self.with(|s| s.state().to_json())
    }

    fn state<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let json: Value = serde_json::from_str(&self.state_json()).map_err(|e| TodError::new_err(e.to_string()))?;
        to_py(py, &json)
    }

    /// `(speaker, text)` pairs, speaker being "user" or "tod".
    fn transcript(&self) -> Vec<(String, String)> {
        self.with(|s| {
            s.transcript()
                .iter()
                .map(|e| {
                    let who = match e.speaker {
                        Speaker::User => "user",
                        Speaker::Tod => "tod",
                    };
                    (who.to_string(), e.text.clone())
                })
                .collect()
        })
    }

    /// Trace lines, one per executed move.
    fn trace(&self) -> Vec<String> {
        self.with(|s| s.trace().iter().map(|t| t.to_line()).collect())
    }

    fn __repr__(&self) -> String {
        self.with(|s| format!("Session(id={:?}, domain={:?}, stage={:?})", s.id(), s.state().domain_caption, s.stage()))
    }
}

/// Names of the built-in fixture domains.
#[pyfunction]
fn domains() -> Vec<String> {
    fixtures::all().iter().map(|d| d.domain().to_string()).collect()
}

/// Rule-based extraction of one utterance.
#[pyfunction]
fn extract<'py>(py: Python<'py>, domain: &str, utterance: &str) -> PyResult<Bound<'py, PyAny>> {
    let dict = dictionary(domain)?;
    serialize(py, &rule_based_extract(&dict.schema, utterance))
}

/// Replays `per_domain` synthetic conversations for each fixture domain and
/// returns the score summary.
#[pyfunction]
#[pyo3(signature = (per_domain = 20, seed = 2024))]
fn replay_fixtures<'py>(py: Python<'py>, per_domain: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let summary = py.detach(|| {
        let dicts: BTreeMap<String, Arc<DomainDictionary>> =
            fixtures::all().into_iter().map(|d| (d.domain().to_string(), d)).collect();
        let conversations: Vec<_> = dicts
            .values()
            .flat_map(|d| fixtures::synthetic_conversations(d, per_domain, seed))
            .collect();
        let reports = eval::replay_all(&conversations, &dicts, &Engine::rule_based(), &ReplayOptions::default());
        eval::summarize(&reports)
    });
    serialize(py, &summary.map_err(|e| TodError::new_err(e.to_string()))?)
}

/// Rates from raw counts.
#[pyfunction]
fn summarize_counts<'py>(
    py: Python<'py>,
    conversations: usize,
    informed: usize,
    succeeded: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let summary = ScoreSummary::from_counts(conversations, informed, succeeded)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    serialize(py, &summary)
}

#[pymodule]
fn tod_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Session>()?;
    m.add_function(wrap_pyfunction!(domains, m)?)?;
    m.add_function(wrap_pyfunction!(extract, m)?)?;
    m.add_function(wrap_pyfunction!(replay_fixtures, m)?)?;
    m.add_function(wrap_pyfunction!(summarize_counts, m)?)?;
    m.add("TodError", m.py().get_type::<TodError>())?;
    Ok(())
}
