//! Python bindings: plain floats and tuples in, plain floats, tuples,
//! lists and dicts out.

use hornatlas::continuation::{fixed_point_orbit, locate_in_tau, BifKind, LocateControl};
use hornatlas::critical::j0 as j0_curve;
use hornatlas::manifold::{grow_unstable, RefineControl};
use hornatlas::orbit::{detect_period as period_of, iterate_orbit, lyapunov as lyapunov_spectrum, rotation_number as rotation_of};
use hornatlas::periodic::{find_sink_and_saddle, PeriodicOrbit, SeedBudget};
use hornatlas::{EulerLorenz, MapModel, ParamPoint, PhasePoint};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(hornatlas_py, HornatlasError, PyRuntimeError, "A computation failed to converge or left its domain.");

type Xy = (f64, f64);

fn err(e: hornatlas::Error) -> PyErr {
    match e {
        hornatlas::Error::InvalidInput(msg) => PyValueError::new_err(msg),
        other => HornatlasError::new_err(format!("{}: {other}", other.kind())),
    }
}

fn params(a: f64, tau: f64) -> PyResult<ParamPoint> {
    let p = ParamPoint::new(a, tau);
    p.validate().map_err(err)?;
    Ok(p)
}

fn xy(z: PhasePoint) -> Xy {
    (z.x, z.y)
}

fn xys(points: &[PhasePoint]) -> Vec<Xy> {
    points.iter().map(|&z| xy(z)).collect()
}

/// Image of `(x, y)` under one step of the map.
#[pyfunction]
fn apply(a: f64, tau: f64, x: f64, y: f64) -> PyResult<Xy> {
    Ok(xy(EulerLorenz.apply(params(a, tau)?, PhasePoint::new(x, y))))
}

/// Jacobian determinant at `(x, y)`; zero on the critical curve J0.
#[pyfunction]
fn det_jacobian(a: f64, tau: f64, x: f64, y: f64) -> PyResult<f64> {
    Ok(EulerLorenz.det_jacobian(params(a, tau)?, PhasePoint::new(x, y)))
}

/// All real first-rank preimages of `(x, y)`.
#[pyfunction]
fn preimages(a: f64, tau: f64, x: f64, y: f64) -> PyResult<Vec<Xy>> {
    let pre = EulerLorenz.preimages(params(a, tau)?, PhasePoint::new(x, y)).map_err(err)?;
    Ok(xys(&pre))
}

#[pyfunction]
fn fixed_point(a: f64, tau: f64) -> PyResult<Xy> {
    Ok(xy(EulerLorenz.fixed_point(params(a, tau)?)))
}

/// Orbit points after discarding `transient` steps.
#[pyfunction]
#[pyo3(signature = (a, tau, x, y, keep, transient = 0))]
fn iterate(a: f64, tau: f64, x: f64, y: f64, keep: usize, transient: usize) -> PyResult<Vec<Xy>> {
    let o = iterate_orbit(&EulerLorenz, params(a, tau)?, PhasePoint::new(x, y), transient, keep).map_err(err)?;
    Ok(xys(&o.points))
}

/// Both Lyapunov exponents, largest first.
#[pyfunction]
#[pyo3(signature = (a, tau, x, y, n, transient = 10_000))]
fn lyapunov(a: f64, tau: f64, x: f64, y: f64, n: usize, transient: usize) -> PyResult<Xy> {
    let s = lyapunov_spectrum(&EulerLorenz, params(a, tau)?, PhasePoint::new(x, y), transient, n).map_err(err)?;
    Ok((s.l1, s.l2))
}

/// Smallest period up to `q_max` of the settled orbit, or None.
#[pyfunction]
#[pyo3(signature = (a, tau, x, y, q_max, transient = 100_000, eps = 1e-8))]
fn detect_period(a: f64, tau: f64, x: f64, y: f64, q_max: usize, transient: usize, eps: f64) -> PyResult<Option<usize>> {
    let o = iterate_orbit(&EulerLorenz, params(a, tau)?, PhasePoint::new(x, y), transient, 3 * q_max).map_err(err)?;
    Ok(period_of(&o, q_max, eps))
}

/// Mean turning per step about the fixed point, in turns.
#[pyfunction]
#[pyo3(signature = (a, tau, x, y, keep, transient = 10_000))]
fn rotation_number(a: f64, tau: f64, x: f64, y: f64, keep: usize, transient: usize) -> PyResult<f64> {
    let p = params(a, tau)?;
    let o = iterate_orbit(&EulerLorenz, p, PhasePoint::new(x, y), transient, keep).map_err(err)?;
    rotation_of(&o, EulerLorenz.fixed_point(p)).map_err(err)
}

fn orbit_dict<'py>(py: Python<'py>, o: &PeriodicOrbit) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("q", o.q)?;
    d.set_item("tau", o.params.tau)?;
    d.set_item("points", xys(&o.points))?;
    d.set_item("multipliers", [(o.eig[0].re, o.eig[0].im), (o.eig[1].re, o.eig[1].im)])?;
    d.set_item("stability", format!("{:?}", o.stability))?;
    d.set_item("residual", o.residual)?;
    Ok(d)
}

/// The attracting and saddle period-`q` orbits at `(a, tau)`.
#[pyfunction]
fn periodic_pair<'py>(py: Python<'py>, a: f64, tau: f64, q: usize) -> PyResult<Bound<'py, PyDict>> {
    let (sink, saddle) = find_sink_and_saddle(&EulerLorenz, params(a, tau)?, q, &SeedBudget::default()).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("sink", orbit_dict(py, &sink)?)?;
    d.set_item("saddle", orbit_dict(py, &saddle)?)?;
    Ok(d)
}

fn bif_kind(kind: &str, q: usize) -> PyResult<BifKind> {
    Ok(match kind {
        "saddle-node" => BifKind::SaddleNode(q),
        "neimark-sacker" if q == 1 => BifKind::HopfFixed,
        "neimark-sacker" => BifKind::NeimarkSacker(q),
        "eigenvalue-zero" => BifKind::EigenvalueZero(q),
        "equal-eigenvalue" => BifKind::EqualEigenvalue(q),
        "hopf" => BifKind::HopfFixed,
        other => return Err(PyValueError::new_err(format!("unknown bifurcation kind {other:?}"))),
    })
}

/// Bifurcation parameter `tau` at fixed `a` inside `(lo, hi)`. The orbit
/// is seeded at `seed_tau` (default `lo`) as the sink or the saddle.
#[pyfunction]
#[pyo3(signature = (a, kind, q, lo, hi, seed_tau = None, role = "sink"))]
fn locate(a: f64, kind: &str, q: usize, lo: f64, hi: f64, seed_tau: Option<f64>, role: &str) -> PyResult<f64> {
    let kind = bif_kind(kind, q)?;
    let p = params(a, seed_tau.unwrap_or(lo))?;
    let seed = if kind.period() == 1 {
        fixed_point_orbit(&EulerLorenz, p).map_err(err)?
    } else {
        let (sink, saddle) = find_sink_and_saddle(&EulerLorenz, p, q, &SeedBudget::default()).map_err(err)?;
        match role {
            "sink" => sink,
            "saddle" => saddle,
            other => return Err(PyValueError::new_err(format!("role must be sink or saddle, not {other:?}"))),
        }
    };
    let loc = locate_in_tau(&EulerLorenz, kind, (lo, hi), &seed, &LocateControl::default()).map_err(err)?;
    Ok(loc.tau)
}

/// Samples of the critical curve J0 over `[x_min, x_max]`.
#[pyfunction]
fn j0(a: f64, tau: f64, x_min: f64, x_max: f64, n: usize) -> PyResult<Vec<Xy>> {
    let c = j0_curve(params(a, tau)?, (x_min, x_max), n).map_err(err)?;
    Ok(xys(&c.polyline))
}

/// One side of the unstable manifold of the period-`q` saddle, grown from
/// orbit point `point` until `arclength` is used up.
#[pyfunction]
#[pyo3(signature = (a, tau, q, side = 1, point = 0, arclength = 5.0))]
fn unstable_branch(a: f64, tau: f64, q: usize, side: i8, point: usize, arclength: f64) -> PyResult<Vec<Xy>> {
    let (_, saddle) = find_sink_and_saddle(&EulerLorenz, params(a, tau)?, q, &SeedBudget::default()).map_err(err)?;
    if point >= saddle.q {
        return Err(PyValueError::new_err(format!("point {point} out of range for period {}", saddle.q)));
    }
    let saddle = saddle.rebased(&EulerLorenz, point);
    let ctrl = RefineControl { arclength_budget: arclength, ..RefineControl::default() };
    let b = grow_unstable(&EulerLorenz, &saddle, side, &ctrl).map_err(err)?;
    Ok(xys(&b.polyline))
}

#[pymodule]
fn hornatlas_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HornatlasError", m.py().get_type::<HornatlasError>())?;
    m.add_function(wrap_pyfunction!(apply, m)?)?;
    m.add_function(wrap_pyfunction!(det_jacobian, m)?)?;
    m.add_function(wrap_pyfunction!(preimages, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_point, m)?)?;
    m.add_function(wrap_pyfunction!(iterate, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov, m)?)?;
    m.add_function(wrap_pyfunction!(detect_period, m)?)?;
    m.add_function(wrap_pyfunction!(rotation_number, m)?)?;
    m.add_function(wrap_pyfunction!(periodic_pair, m)?)?;
    m.add_function(wrap_pyfunction!(locate, m)?)?;
    m.add_function(wrap_pyfunction!(j0, m)?)?;
    m.add_function(wrap_pyfunction!(unstable_branch, m)?)?;
    Ok(())
}
