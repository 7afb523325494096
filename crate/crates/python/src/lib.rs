//! Python bindings for the periporo simulator.

use std::path::PathBuf;

use engine::io::{self, OutputWriter};
use engine::kgd::{kgd_analytical_oracle, KgdParams};
use engine::scenarios;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn config_err(e: engine::ConfigError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn solver_err(e: engine::SolverError) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Scalar crack diagnostics at one instant.
#[pyclass(frozen, get_all, skip_from_py_object, module = "periporo")]
#[derive(Clone)]
struct Summary {
    time: f64,
    step: u64,
    length: f64,
    mouth_width: f64,
    /// Mean fracture pressure at the mouth (Pa).
    mouth_pressure: f64,
    branches: usize,
    broken_bonds: usize,
}

#[pymethods]
impl Summary {
    fn __repr__(&self) -> String {
        format!(
            "Summary(t={:.4e}, length={:.4}, mouth_width={:.3e}, mouth_pressure={:.4e}, branches={}, broken_bonds={})",
            self.time, self.length, self.mouth_width, self.mouth_pressure, self.branches, self.broken_bonds
        )
    }
}

/// Closed-form plane-strain solution sampled at one time.
#[pyclass(frozen, get_all, skip_from_py_object, module = "periporo")]
#[derive(Clone)]
struct KgdPoint {
    length: f64,
    width: f64,
    pressure: f64,
}

/// A configured simulation.
#[pyclass(unsendable, module = "periporo")]
struct Simulation {
    inner: engine::Simulation,
}

#[pymethods]
impl Simulation {
    /// Builds a simulation from a TOML deck.
    #[new]
    fn new(deck: &str) -> PyResult<Self> {
        let cfg = engine::load_scenario_config(deck).map_err(config_err)?;
        Ok(Self { inner: engine::Simulation::new(cfg).map_err(config_err)? })
    }

    /// Builds one of the built-in scenarios, optionally overlaid by a TOML fragment.
    #[staticmethod]
    #[pyo3(signature = (name, overrides = None))]
    fn scenario(name: &str, overrides: Option<&str>) -> PyResult<Self> {
        let deck = format!("scenario = {name:?}\n{}", overrides.unwrap_or(""));
        Self::new(&deck)
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.state.time
    }

    #[getter]
    fn step_count(&self) -> u64 {
        self.inner.state.step
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.config.dt
    }

    #[getter]
    fn t_end(&self) -> f64 {
        self.inner.config.t_end
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.points.nx, self.inner.points.ny)
    }

    fn __len__(&self) -> usize {
        self.inner.points.len()
    }

    /// Resolved deck as TOML.
    fn deck(&self) -> String {
        self.inner.config.to_toml()
    }

    fn step(&mut self) -> PyResult<()> {
        self.inner.step().map_err(solver_err)
    }

    fn advance(&mut self, n: u64) -> PyResult<()> {
        self.inner.advance(n).map_err(solver_err)
    }

    /// Runs to the end time; writes the usual output files when `out_dir` is given.
    #[pyo3(signature = (out_dir = None))]
    fn run(&mut self, out_dir: Option<PathBuf>) -> PyResult<Vec<Summary>> {
        let every = self.inner.config.output.timeseries_every_n_steps;
        let recs = match out_dir {
            Some(dir) => {
                let mut w = OutputWriter::create(&dir, &self.inner).map_err(|e| PyOSError::new_err(e.to_string()))?;
                let recs = io::run(&mut self.inner, Some(&mut w), every, |_| {}).map_err(solver_err)?;
                w.finish(&self.inner).map_err(|e| PyOSError::new_err(e.to_string()))?;
                recs
            }
            None => io::run(&mut self.inner, None, every, |_| {}).map_err(solver_err)?,
        };
        let dt = self.inner.config.dt;
        Ok(recs
            .iter()
            .map(|r| Summary {
                time: r.time,
                step: (r.time / dt).round() as u64,
                length: r.length,
                mouth_width: r.mouth_width,
                mouth_pressure: r.pf_mpa * 1e6,
                branches: r.branches,
                broken_bonds: r.broken_bonds,
            })
            .collect())
    }

    fn summary(&self) -> Summary {
        let s = io::summarize(&self.inner);
        Summary {
            time: self.inner.state.time,
            step: self.inner.state.step,
            length: s.length,
            mouth_width: s.mouth_width,
            mouth_pressure: s.mouth_pressure,
            branches: s.branches,
            broken_bonds: s.broken_bonds,
        }
    }

    fn kinetic_energy(&self) -> f64 {
        self.inner.kinetic_energy()
    }

    fn stored_energy(&self) -> f64 {
        self.inner.stored_energy()
    }

    fn positions(&self) -> Vec<(f64, f64)> {
        self.inner.points.positions.iter().map(|p| (p.x, p.y)).collect()
    }

    fn displacement(&self) -> Vec<(f64, f64)> {
        self.inner.fields().u.iter().map(|u| (u.x, u.y)).collect()
    }

    fn velocity(&self) -> Vec<(f64, f64)> {
        self.inner.fields().v.iter().map(|v| (v.x, v.y)).collect()
    }

    /// Micro-rotation (rad).
    fn rotation(&self) -> Vec<f64> {
        self.inner.fields().rot.clone()
    }

    /// Bulk water pressure (Pa).
    fn water_pressure(&self) -> Vec<f64> {
        self.inner.fields().pw.clone()
    }

    /// Fracture water pressure (Pa).
    fn fracture_pressure(&self) -> Vec<f64> {
        self.inner.fields().pf.clone()
    }

    fn saturation(&self) -> Vec<f64> {
        self.inner.fields().sr.clone()
    }

    fn damage(&self) -> Vec<f64> {
        self.inner.fields().damage.clone()
    }

    /// Crack width (m).
    fn aperture(&self) -> Vec<f64> {
        self.inner.fields().af.clone()
    }

    fn fractured(&self) -> Vec<bool> {
        self.inner.fields().fractured.clone()
    }

    /// Closed-form KGD reference for this deck at time `t`.
    fn kgd_reference(&self, t: f64) -> PyResult<KgdPoint> {
        let p = KgdParams::from_config(&self.inner.config);
        let k = kgd_analytical_oracle(t, &p).map_err(config_err)?;
        Ok(KgdPoint { length: k.length, width: k.width, pressure: k.pressure })
    }

    fn __repr__(&self) -> String {
        format!(
            "Simulation(scenario={:?}, grid={}x{}, step={}, t={:.4e})",
            self.inner.config.name,
            self.inner.points.nx,
            self.inner.points.ny,
            self.inner.state.step,
            self.inner.state.time
        )
    }
}

/// Names of the built-in scenarios.
#[pyfunction]
fn scenario_names() -> Vec<&'static str> {
    scenarios::BUILTIN_NAMES.to_vec()
}

/// Parameter listing of every built-in scenario.
#[pyfunction]
fn list_scenarios() -> String {
    scenarios::list_scenarios()
}

#[pymodule]
fn periporo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Simulation>()?;
    m.add_class::<Summary>()?;
    m.add_class::<KgdPoint>()?;
    m.add_function(wrap_pyfunction!(scenario_names, m)?)?;
    m.add_function(wrap_pyfunction!(list_scenarios, m)?)?;
    Ok(())
}
