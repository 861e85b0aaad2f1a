//! Python bindings: spectral labels, node features, generators, and
//! checkpoint inference.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use netloc::data::LabeledGraph;
use netloc::features::build_feature_matrix;
use netloc::gradcheck::{gradcheck as run_gradcheck, GradcheckOptions};
use netloc::graph::{ErDensity, Graph, GraphFamily};
use netloc::model::{Checkpoint, ModelKind};
use netloc::spectral::{self, RegionThresholds, SpectralConfig};
use netloc::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::ConvergenceFailure { .. } | Error::NumericFailure(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn graph(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Graph> {
    Graph::new(n, edges).map_err(to_py)
}

/// Principal eigenpair, IPR and region of a graph.
#[pyfunction]
#[pyo3(signature = (n, edges, tol = 1e-10, max_iter = 1_000_000))]
fn spectral_summary<'py>(
    py: Python<'py>,
    n: usize,
    edges: Vec<(usize, usize)>,
    tol: f64,
    max_iter: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let g = graph(n, edges)?;
    let r = spectral::principal_eigenpair(&g, &SpectralConfig { tol, max_iter }).map_err(to_py)?;
    let y = spectral::ipr(&r.pev).map_err(to_py)?;
    let region = spectral::classify_region(y, &RegionThresholds::default());
    let out = PyDict::new(py);
    out.set_item("lambda1", r.lambda1)?;
    out.set_item("ipr", y)?;
    out.set_item("region", region.code())?;
    out.set_item("iterations", r.iterations)?;
    out.set_item("pev", r.pev)?;
    Ok(out)
}

/// Inverse participation ratio of a vector.
#[pyfunction]
fn ipr(v: Vec<f64>) -> PyResult<f64> {
    spectral::ipr(&v).map_err(to_py)
}

/// Region code (1, 2 or 3) of an IPR value.
#[pyfunction]
#[pyo3(signature = (y, tau1 = 0.05, tau2 = 0.2, epsilon = 1e-6))]
fn classify(y: f64, tau1: f64, tau2: f64, epsilon: f64) -> PyResult<u8> {
    let th = RegionThresholds::new(tau1, tau2, epsilon).map_err(to_py)?;
    Ok(spectral::classify_region(y, &th).code())
}

/// Min-max scaled node features, one row per node.
#[pyfunction]
fn features(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Vec<Vec<f64>>> {
    let m = build_feature_matrix(&graph(n, edges)?).map_err(to_py)?;
    Ok((0..m.rows()).map(|i| m.row(i).to_vec()).collect())
}

/// Edge list of a generated graph. `family` is one of cycle, path, star,
/// wheel, er, scale_free.
#[pyfunction]
#[pyo3(signature = (family, n, seed = 0, m = 2, mean_degree = 8.0))]
fn generate(family: &str, n: usize, seed: u64, m: usize, mean_degree: f64) -> PyResult<Vec<(usize, usize)>> {
    let fam = match family {
        "cycle" => GraphFamily::Cycle,
        "path" => GraphFamily::Path,
        "star" => GraphFamily::Star,
        "wheel" => GraphFamily::Wheel,
        "er" => GraphFamily::Er {
            density: ErDensity::MeanDegree(mean_degree),
        },
        "scale_free" => GraphFamily::ScaleFree { m },
        other => return Err(PyValueError::new_err(format!("unknown family {other:?}"))),
    };
    Ok(fam.generate(n, seed).map_err(to_py)?.edges().to_vec())
}

/// Predicted IPR of a graph under a saved checkpoint.
#[pyfunction]
fn predict(checkpoint: &str, n: usize, edges: Vec<(usize, usize)>) -> PyResult<f64> {
    let model = Checkpoint::load(checkpoint)
        .and_then(|c| c.to_model())
        .map_err(to_py)?;
    let item = LabeledGraph::with_target("input", graph(n, edges)?, "python", 0, 0.0).map_err(to_py)?;
    model.predict(&item).map_err(to_py)
}

/// Maximum relative gradient error for `model` ("gcn" or "gat").
#[pyfunction]
#[pyo3(signature = (model, seed = 0))]
fn gradcheck(model: &str, seed: u64) -> PyResult<f64> {
    let kind = match model {
        "gcn" => ModelKind::Gcn,
        "gat" => ModelKind::Gat,
        other => return Err(PyValueError::new_err(format!("unknown model {other:?}"))),
    };
    Ok(run_gradcheck(&GradcheckOptions::new(kind), seed).map_err(to_py)?.max_rel_error)
}

#[pymodule]
fn netloc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(spectral_summary, m)?)?;
    m.add_function(wrap_pyfunction!(ipr, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(features, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    Ok(())
}
