//! Python bindings for the co-design core.

use std::path::Path;

use fowt_core::analysis::{rainflow as rainflow_count, Scenario};
use fowt_core::ccd::{PlantDesign, TowerBox};
use fowt_core::environment::{shear_adjust_default, weibull_bins as bins};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn runtime(e: fowt_core::Error) -> PyErr {
    match e {
        fowt_core::Error::Scenario(_) | fowt_core::Error::Argument(_) | fowt_core::Error::InvalidDesign(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn load(scenario: Option<&str>, overrides: Option<Vec<(String, String)>>) -> PyResult<Scenario> {
    let overrides = overrides.unwrap_or_default();
    match scenario {
        Some(p) => Scenario::load(Path::new(p), &overrides).map_err(runtime),
        None => {
            let s = Scenario::from_toml_with(&Scenario::default().to_toml().map_err(runtime)?, &overrides).map_err(runtime)?;
            s.validate().map_err(runtime)?;
            Ok(s)
        }
    }
}

/// TOML text of the built-in baseline scenario.
#[pyfunction]
fn default_scenario() -> PyResult<String> {
    Scenario::default().to_toml().map_err(runtime)
}

/// Weibull wind bins: (centers, probabilities).
#[pyfunction]
#[pyo3(signature = (k=2.0, c=13.44, u_min=3.0, u_max=25.0, step=1.0, groups=None))]
fn weibull_bins(k: f64, c: f64, u_min: f64, u_max: f64, step: f64, groups: Option<usize>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let mut b = bins(k, c, u_min, u_max, step).map_err(runtime)?;
    if let Some(g) = groups {
        b = b.grouped(g).map_err(runtime)?;
    }
    Ok((b.centers, b.probs))
}

/// Hub-height speed of a bin for tower length `l` [m].
#[pyfunction]
fn shear_adjust(u_mean: f64, l: f64) -> f64 {
    shear_adjust_default(u_mean, l)
}

/// Rainflow cycles as (range, mean, count) tuples.
#[pyfunction]
fn rainflow(series: Vec<f64>) -> PyResult<Vec<(f64, f64, f64)>> {
    Ok(rainflow_count(&series).map_err(runtime)?.into_iter().map(|c| (c.range, c.mean, c.count)).collect())
}

/// Solves one wind bin. Returns a dict with the objective, status and the trajectory CSV.
#[pyfunction]
#[pyo3(signature = (u_mean, scenario=None, overrides=None))]
fn solve_oloc<'py>(py: Python<'py>, u_mean: f64, scenario: Option<&str>, overrides: Option<Vec<(String, String)>>) -> PyResult<Bound<'py, PyDict>> {
    let s = load(scenario, overrides)?;
    let sol = py
        .allow_threads(|| -> fowt_core::Result<_> {
            let ev = s.evaluator(s.ccd_bins()?)?;
            let plant = s.plant(&ev)?;
            ev.solve_bin(&plant, u_mean, &s.oloc)
        })
        .map_err(runtime)?;
    let d = PyDict::new(py);
    d.set_item("p_out", sol.p_out)?;
    d.set_item("j_in", sol.j_in)?;
    d.set_item("status", sol.status.as_str())?;
    d.set_item("iterations", sol.iterations)?;
    d.set_item("feasible", sol.feasible)?;
    d.set_item("times", sol.trajectory.times.clone())?;
    d.set_item("power", sol.trajectory.p_u.clone())?;
    d.set_item("sigma", sol.trajectory.sigma.clone())?;
    d.set_item("trajectory_csv", sol.trajectory.to_csv(true))?;
    Ok(d)
}

/// AEP of a tower design `[t_tip, d_tip, t_base, l]` over the scenario's grouped bins.
#[pyfunction]
#[pyo3(signature = (tower, scenario=None, overrides=None))]
fn evaluate_tower<'py>(py: Python<'py>, tower: Vec<f64>, scenario: Option<&str>, overrides: Option<Vec<(String, String)>>) -> PyResult<Bound<'py, PyDict>> {
    let s = load(scenario, overrides)?;
    let template = PlantDesign { tower: s.model.tower, blade: s.model.blade.clone(), mode: fowt_core::ccd::DesignMode::TowerOnly };
    let design = PlantDesign::from_vector(&template, &tower).map_err(runtime)?;
    let r = py
        .allow_threads(|| -> fowt_core::Result<_> {
            let ev = s.evaluator(s.ccd_bins()?)?;
            Ok(ev.evaluate(&design))
        })
        .map_err(runtime)?;
    let d = PyDict::new(py);
    d.set_item("aep_gwh", r.aep_gwh())?;
    d.set_item("j_out", r.j_out)?;
    d.set_item("penalized", r.penalized)?;
    d.set_item("reason", r.reason.clone())?;
    d.set_item("bin_power", r.bins.iter().map(|b| b.p_out).collect::<Vec<_>>())?;
    d.set_item("bin_status", r.bins.iter().map(|b| b.status.clone()).collect::<Vec<_>>())?;
    Ok(d)
}

/// Default tower box as (lower, upper).
#[pyfunction]
fn tower_box() -> (Vec<f64>, Vec<f64>) {
    let b = TowerBox::default();
    (b.lower.to_vec(), b.upper.to_vec())
}

#[pymodule]
fn fowt_ccd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(default_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(weibull_bins, m)?)?;
    m.add_function(wrap_pyfunction!(shear_adjust, m)?)?;
    m.add_function(wrap_pyfunction!(rainflow, m)?)?;
    m.add_function(wrap_pyfunction!(solve_oloc, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_tower, m)?)?;
    m.add_function(wrap_pyfunction!(tower_box, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
