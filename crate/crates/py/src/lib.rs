//! Python bindings: mesh building, field generation, the forward solver,
//! network training, adjoint inversion, and the complexity score.
//!
//! The compiled module is named `elastmap`; rename the produced cdylib to
//! `elastmap.so` (see python/smoke_test.py) or install it on the path.

use elastmap_core::adjoint::{inverse_fea, AdjointRun, InitialModulus, Termination};
use elastmap_core::fem::{solve_forward, BoundaryLoad, FemSolution};
use elastmap_core::fieldgen::{self, ModulusField, Tensor2Field};
use elastmap_core::geometry::{self, build_crossed_mesh};
use elastmap_core::materials::{MaterialKind, MaterialModel};
use elastmap_core::pinn::{self, evaluate_fields, GroundTruth, PinnConfig, TransformStats};
use elastmap_core::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::Format(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn material(kind: &str, nu: f64, mu2: f64, jm: f64) -> PyResult<MaterialModel> {
    let kind = match kind {
        "neo-hookean" => MaterialKind::NeoHookeanPlaneStrain,
        "neo-hookean-plane-stress" => MaterialKind::NeoHookeanPlaneStress,
        "mooney-rivlin" => MaterialKind::MooneyRivlin,
        "gent" => MaterialKind::Gent,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown material {other:?} (expected neo-hookean, neo-hookean-plane-stress, mooney-rivlin, or gent)"
            )))
        }
    };
    MaterialModel::from_kind(kind, nu, mu2, jm).map_err(err)
}

fn strains_from_lists(exx: Vec<f64>, eyy: Vec<f64>, exy: Vec<f64>) -> PyResult<Tensor2Field> {
    if exx.len() != eyy.len() || exx.len() != exy.len() {
        return Err(PyValueError::new_err("strain component lengths differ"));
    }
    Ok(Tensor2Field { xx: exx, yy: eyy, xy: exy })
}

/// Crossed triangular mesh on the unit square.
#[pyclass(frozen)]
pub struct Mesh {
    inner: geometry::Mesh,
}

#[pymethods]
impl Mesh {
    #[new]
    fn new(grid_n: usize) -> PyResult<Self> {
        Ok(Mesh {
            inner: build_crossed_mesh(grid_n).map_err(err)?,
        })
    }

    #[getter]
    fn grid_n(&self) -> usize {
        self.inner.grid_n
    }

    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    fn element_count(&self) -> usize {
        self.inner.element_count()
    }

    fn nodes(&self) -> Vec<(f64, f64)> {
        self.inner.nodes.iter().map(|n| (n[0], n[1])).collect()
    }

    fn elements(&self) -> Vec<(usize, usize, usize)> {
        self.inner.elements.iter().map(|e| (e[0], e[1], e[2])).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Mesh(grid_n={}, nodes={}, elements={})",
            self.inner.grid_n,
            self.inner.node_count(),
            self.inner.element_count()
        )
    }
}

/// Converged forward solution.
#[pyclass(frozen)]
pub struct Solution {
    inner: FemSolution,
}

#[pymethods]
impl Solution {
    #[getter]
    fn u(&self) -> Vec<(f64, f64)> {
        self.inner.u.iter().map(|r| (r[0], r[1])).collect()
    }

    #[getter]
    fn exx(&self) -> Vec<f64> {
        self.inner.strain_nodes.xx.clone()
    }

    #[getter]
    fn eyy(&self) -> Vec<f64> {
        self.inner.strain_nodes.yy.clone()
    }

    #[getter]
    fn exy(&self) -> Vec<f64> {
        self.inner.strain_nodes.xy.clone()
    }

    #[getter]
    fn residual_norm(&self) -> f64 {
        self.inner.residual_norm
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(nodes={}, residual_norm={:e})",
            self.inner.u.len(),
            self.inner.residual_norm
        )
    }
}

/// Training outcome plus the evaluated fields.
#[pyclass(frozen)]
pub struct PinnResult {
    /// (iteration, l_pde, l_const, l_data, total, e_l2_pct or None)
    #[pyo3(get)]
    history: Vec<(usize, f64, f64, f64, f64, Option<f64>)>,
    #[pyo3(get)]
    ux: Vec<f64>,
    #[pyo3(get)]
    uy: Vec<f64>,
    #[pyo3(get)]
    e_nodes: Vec<f64>,
    #[pyo3(get)]
    e_elements: Vec<f64>,
    #[pyo3(get)]
    exx: Vec<f64>,
    #[pyo3(get)]
    eyy: Vec<f64>,
    #[pyo3(get)]
    exy: Vec<f64>,
    #[pyo3(get)]
    clamp_events: u64,
    /// L2 relative errors in percent, when ground truth was supplied:
    /// (ux, uy, strain, e)
    #[pyo3(get)]
    l2: Option<(f64, f64, f64, f64)>,
}

#[pymethods]
impl PinnResult {
    fn __repr__(&self) -> String {
        let total = self.history.last().map(|h| h.4).unwrap_or(f64::NAN);
        format!("PinnResult(records={}, final_total={total:e})", self.history.len())
    }
}

/// Adjoint inversion outcome.
#[pyclass(frozen)]
pub struct InvertResult {
    /// (iteration, objective, strain_error_pct, modulus_error_pct or None)
    #[pyo3(get)]
    history: Vec<(usize, f64, f64, Option<f64>)>,
    #[pyo3(get)]
    e_final: Vec<f64>,
    #[pyo3(get)]
    e_best: Vec<f64>,
    #[pyo3(get)]
    termination: String,
    #[pyo3(get)]
    converged: bool,
}

#[pymethods]
impl InvertResult {
    fn __repr__(&self) -> String {
        format!(
            "InvertResult(records={}, termination={:?})",
            self.history.len(),
            self.termination
        )
    }
}

/// Nodal intensity in [0, 1] drawn from a squared-exponential random field.
#[pyfunction]
#[pyo3(signature = (mesh, length_scale=0.2, seed=0))]
fn sample_grf(mesh: &Mesh, length_scale: f64, seed: u64) -> PyResult<Vec<f64>> {
    Ok(fieldgen::sample_grf(&mesh.inner, length_scale, seed)
        .map_err(err)?
        .values)
}

/// Per-element modulus in [1, 4]: sum of the three vertex intensities + 1.
#[pyfunction]
fn elemental_modulus(mesh: &Mesh, intensity: Vec<f64>) -> PyResult<Vec<f64>> {
    if intensity.len() != mesh.inner.node_count() {
        return Err(PyValueError::new_err(format!(
            "intensity has {} values for {} nodes",
            intensity.len(),
            mesh.inner.node_count()
        )));
    }
    let field = fieldgen::IntensityField {
        values: intensity,
        source: fieldgen::FieldSource::Grf,
        seed: None,
    };
    Ok(fieldgen::elemental_modulus(&field, &mesh.inner).values)
}

/// Displacement-controlled equibiaxial forward solve.
#[pyfunction]
#[pyo3(signature = (mesh, modulus, d=0.2, steps=10, material="neo-hookean", nu=0.3, mu2=0.2, jm=10.0))]
#[allow(clippy::too_many_arguments)]
fn forward_solve(
    mesh: &Mesh,
    modulus: Vec<f64>,
    d: f64,
    steps: usize,
    material: &str,
    nu: f64,
    mu2: f64,
    jm: f64,
) -> PyResult<Solution> {
    let model = self::material(material, nu, mu2, jm)?;
    let load = BoundaryLoad::new(d, steps).map_err(err)?;
    let field = ModulusField { values: modulus };
    Ok(Solution {
        inner: solve_forward(&mesh.inner, &model, &field, &load).map_err(err)?,
    })
}

/// Adds seeded Gaussian noise scaled to a percentage of each component's RMS.
#[pyfunction]
#[pyo3(signature = (exx, eyy, exy, percent, seed=0))]
fn add_strain_noise(
    exx: Vec<f64>,
    eyy: Vec<f64>,
    exy: Vec<f64>,
    percent: f64,
    seed: u64,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let strains = strains_from_lists(exx, eyy, exy)?;
    let noisy = fieldgen::add_strain_noise(&strains, percent, seed).map_err(err)?;
    Ok((noisy.xx, noisy.yy, noisy.xy))
}

/// Raw network modulus output mapped into the open interval (1, 5).
#[pyfunction]
fn modulus_transform(n_e: f64) -> f64 {
    pinn::modulus_transform(n_e)
}

/// Trains a network on nodal strain data and evaluates the learned fields.
#[pyfunction]
#[pyo3(signature = (
    mesh, exx, eyy, exy, u,
    variant="B", fcnn="II", iterations=1000, lr=1e-3, seed=0, log_stride=100,
    d=0.2, steps=10, material="neo-hookean", nu=0.3, mu2=0.2, jm=10.0,
    truth_modulus=None, truth_solution=None,
))]
#[allow(clippy::too_many_arguments)]
fn train_pinn(
    mesh: &Mesh,
    exx: Vec<f64>,
    eyy: Vec<f64>,
    exy: Vec<f64>,
    u: Vec<(f64, f64)>,
    variant: &str,
    fcnn: &str,
    iterations: usize,
    lr: f64,
    seed: u64,
    log_stride: usize,
    d: f64,
    steps: usize,
    material: &str,
    nu: f64,
    mu2: f64,
    jm: f64,
    truth_modulus: Option<Vec<f64>>,
    truth_solution: Option<&Solution>,
) -> PyResult<PinnResult> {
    let strains = strains_from_lists(exx, eyy, exy)?;
    let u: Vec<[f64; 2]> = u.into_iter().map(|(x, y)| [x, y]).collect();
    let model = self::material(material, nu, mu2, jm)?;
    let load = BoundaryLoad::new(d, steps).map_err(err)?;

    let mut cfg = PinnConfig::new(
        variant.parse().map_err(err)?,
        fcnn.parse().map_err(err)?,
        load,
        model,
    );
    cfg.learning_rate = lr;
    cfg.iterations = iterations;
    cfg.seed = seed;
    cfg.log_stride = log_stride;

    let stats = TransformStats::from_displacements(&u).map_err(err)?;
    let truth_field = truth_modulus.map(|values| ModulusField { values });
    let outcome =
        pinn::train(&cfg, &mesh.inner, &strains, &stats, truth_field.as_ref()).map_err(err)?;

    let truth = match (truth_solution, &truth_field) {
        (Some(sol), Some(modulus)) => Some(GroundTruth {
            fem: &sol.inner,
            modulus,
        }),
        _ => None,
    };
    let fields = evaluate_fields(&cfg, &outcome.params, &mesh.inner, &stats, truth).map_err(err)?;

    Ok(PinnResult {
        history: outcome
            .history
            .iter()
            .map(|r| (r.iteration, r.l_pde, r.l_const, r.l_data, r.total, r.e_l2_pct))
            .collect(),
        ux: fields.ux,
        uy: fields.uy,
        e_nodes: fields.e_nodes,
        e_elements: fields.e_elements,
        exx: fields.strain.xx,
        eyy: fields.strain.yy,
        exy: fields.strain.xy,
        clamp_events: outcome.clamp_events,
        l2: fields.l2.map(|l| (l.ux, l.uy, l.strain, l.e)),
    })
}

/// Recovers the elemental modulus from strains with the adjoint solver.
#[pyfunction]
#[pyo3(signature = (
    mesh, exx, eyy, exy,
    e_init=3.0, random_init_seed=None, max_iter=200, tol=1e-3,
    d=0.2, steps=10, material="neo-hookean", nu=0.3, mu2=0.2, jm=10.0,
    truth_modulus=None,
))]
#[allow(clippy::too_many_arguments)]
fn invert_fea(
    mesh: &Mesh,
    exx: Vec<f64>,
    eyy: Vec<f64>,
    exy: Vec<f64>,
    e_init: f64,
    random_init_seed: Option<u64>,
    max_iter: usize,
    tol: f64,
    d: f64,
    steps: usize,
    material: &str,
    nu: f64,
    mu2: f64,
    jm: f64,
    truth_modulus: Option<Vec<f64>>,
) -> PyResult<InvertResult> {
    let strains = strains_from_lists(exx, eyy, exy)?;
    let model = self::material(material, nu, mu2, jm)?;
    let load = BoundaryLoad::new(d, steps).map_err(err)?;
    let init = match random_init_seed {
        Some(seed) => InitialModulus::Random { seed },
        None => InitialModulus::Uniform(e_init),
    };
    let mut run = AdjointRun::new(init, max_iter, tol);
    if let Some(values) = truth_modulus {
        run = run.with_truth(ModulusField { values });
    }
    let done = inverse_fea(&mesh.inner, &model, &load, &strains, run).map_err(err)?;
    let termination = match &done.termination {
        Some(Termination::Converged) => "converged".to_string(),
        Some(Termination::MaxIterations) => "max-iterations".to_string(),
        Some(Termination::EarlyTermination(why)) => format!("early: {why}"),
        None => "unknown".to_string(),
    };
    Ok(InvertResult {
        history: done
            .history
            .iter()
            .map(|r| (r.iteration, r.objective, r.strain_error_pct, r.modulus_error_pct))
            .collect(),
        e_final: done.e_final.values,
        e_best: done.e_best.values,
        converged: matches!(done.termination, Some(Termination::Converged)),
        termination,
    })
}

/// Gradient-histogram entropy of a raster (rows of equal length, values
/// expected in [0, 1]).
#[pyfunction]
fn delentropy(raster: Vec<Vec<f64>>) -> PyResult<f64> {
    let rows = raster.len();
    let cols = raster.first().map(Vec::len).unwrap_or(0);
    if raster.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("raster rows have unequal lengths"));
    }
    let flat: Vec<f64> = raster.into_iter().flatten().collect();
    let array = ndarray::Array2::from_shape_vec((rows, cols), flat)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    elastmap_core::complexity::delentropy(&array).map_err(err)
}

#[pymodule]
fn elastmap(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Mesh>()?;
    m.add_class::<Solution>()?;
    m.add_class::<PinnResult>()?;
    m.add_class::<InvertResult>()?;
    m.add_function(wrap_pyfunction!(sample_grf, m)?)?;
    m.add_function(wrap_pyfunction!(elemental_modulus, m)?)?;
    m.add_function(wrap_pyfunction!(forward_solve, m)?)?;
    m.add_function(wrap_pyfunction!(add_strain_noise, m)?)?;
    m.add_function(wrap_pyfunction!(modulus_transform, m)?)?;
    m.add_function(wrap_pyfunction!(train_pinn, m)?)?;
    m.add_function(wrap_pyfunction!(invert_fea, m)?)?;
    m.add_function(wrap_pyfunction!(delentropy, m)?)?;
    Ok(())
}
