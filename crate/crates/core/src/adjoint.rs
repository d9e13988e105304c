//! Inverse FEA: recover the per-element modulus field from a reference
//! nodal strain field.
//!
//! The squared strain mismatch J(E) = sum of (eps(u(E)) - eps_ref)^2 over
//! nodes and components is minimized by projected gradient descent with a
//! backtracking line search, keeping every iterate inside the box [1, 5].
//! The gradient comes from the discrete adjoint: K^T lambda = dJ/du at the
//! converged forward state, then dJ/dE_e = -lambda^T (dR/dE_e). Stops on
//! the L2 relative strain error tolerance, the iteration cap, or a forward
//! solver failure (recorded as early termination).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::fem::{
    deformation_gradient, solve_forward, tangent_banded, BoundaryLoad, Discretization,
    FemSolution,
};
use crate::fieldgen::{ModulusField, Tensor2Field};
use crate::geometry::Mesh;
use crate::materials::{first_pk_stress_unchecked, Kinematics, MaterialModel};
use crate::pinn::l2_relative_error;
use crate::scalar::Dual;
use crate::{Error, Result};

pub const MODULUS_LOWER: f64 = 1.0;
pub const MODULUS_UPPER: f64 = 5.0;
/// Armijo sufficient-decrease constant.
const ARMIJO_C: f64 = 1e-4;
/// Step-size halvings allowed per line search.
const LINE_SEARCH_LIMIT: usize = 30;

/// Starting point of the inversion.
#[derive(Clone, Debug)]
pub enum InitialModulus {
    Uniform(f64),
    /// Elementwise uniform draw from the box, seeded.
    Random { seed: u64 },
    Field(ModulusField),
}

#[derive(Clone, Copy, Debug)]
pub struct AdjointRecord {
    pub iteration: usize,
    pub objective: f64,
    pub strain_error_pct: f64,
    /// Only when a ground-truth modulus was supplied.
    pub modulus_error_pct: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// Forward failure or stalled line search, with the reason.
    EarlyTermination(String),
}

/// Inversion configuration plus, after [`inverse_fea`], its results.
#[derive(Clone, Debug)]
pub struct AdjointRun {
    pub e_init: InitialModulus,
    pub max_iter: usize,
    /// Tolerance on the L2 relative strain error, as a fraction (1e-3 means
    /// 0.1%).
    pub tol: f64,
    /// Ground truth for reporting the modulus error; not used by the
    /// optimizer.
    pub e_truth: Option<ModulusField>,
    pub history: Vec<AdjointRecord>,
    /// The iterate each history record was measured at.
    pub snapshots: Vec<ModulusField>,
    /// Iterate with the smallest strain error seen.
    pub e_best: ModulusField,
    pub e_final: ModulusField,
    pub termination: Option<Termination>,
}

impl AdjointRun {
    pub fn new(e_init: InitialModulus, max_iter: usize, tol: f64) -> AdjointRun {
        AdjointRun {
            e_init,
            max_iter,
            tol,
            e_truth: None,
            history: Vec::new(),
            snapshots: Vec::new(),
            e_best: ModulusField { values: vec![] },
            e_final: ModulusField { values: vec![] },
            termination: None,
        }
    }

    pub fn with_truth(mut self, truth: ModulusField) -> AdjointRun {
        self.e_truth = Some(truth);
        self
    }
}

/// Clamps every element into the admissible box.
pub fn project(values: &mut [f64]) {
    for v in values {
        *v = v.clamp(MODULUS_LOWER, MODULUS_UPPER);
    }
}

fn initial_field(init: &InitialModulus, elements: usize) -> Result<Vec<f64>> {
    let mut values = match init {
        InitialModulus::Uniform(c) => {
            if !c.is_finite() {
                return Err(Error::invalid(format!("initial modulus {c}")));
            }
            vec![*c; elements]
        }
        InitialModulus::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..elements)
                .map(|_| rng.random_range(MODULUS_LOWER..MODULUS_UPPER))
                .collect()
        }
        InitialModulus::Field(f) => {
            if f.len() != elements {
                return Err(Error::invalid(format!(
                    "initial modulus has {} values for {elements} elements",
                    f.len()
                )));
            }
            f.values.clone()
        }
    };
    project(&mut values);
    Ok(values)
}

/// J(E) = squared strain mismatch summed over nodes and the three
/// components (xy counted once).
fn objective(sol: &FemSolution, strain_ref: &Tensor2Field) -> f64 {
    let mut j = 0.0;
    for (pred, refc) in [
        (&sol.strain_nodes.xx, &strain_ref.xx),
        (&sol.strain_nodes.yy, &strain_ref.yy),
        (&sol.strain_nodes.xy, &strain_ref.xy),
    ] {
        for (p, r) in pred.iter().zip(refc.iter()) {
            j += (p - r) * (p - r);
        }
    }
    j
}

/// dJ/dE via the discrete adjoint at the converged forward state.
fn adjoint_gradient(
    disc: &Discretization,
    model: &MaterialModel,
    modulus: &ModulusField,
    sol: &FemSolution,
    strain_ref: &Tensor2Field,
) -> Result<Vec<f64>> {
    let nn = disc.tributary.len();

    // dJ/d(nodal strain)
    let mut dj_node = Tensor2Field::zeros(nn);
    for n in 0..nn {
        dj_node.xx[n] = 2.0 * (sol.strain_nodes.xx[n] - strain_ref.xx[n]);
        dj_node.yy[n] = 2.0 * (sol.strain_nodes.yy[n] - strain_ref.yy[n]);
        dj_node.xy[n] = 2.0 * (sol.strain_nodes.xy[n] - strain_ref.xy[n]);
    }

    // chain through nodal averaging and the element strain-displacement
    // relation: dE_kl/du_(a,i) = (G_ak F_il + F_ik G_al) / 2
    let mut dj_du = vec![0.0; disc.ndof];
    for elem in &disc.elems {
        let f = deformation_gradient(elem, &sol.u);
        let w = elem.area / 3.0;
        let mut de = [0.0; 3]; // dJ/dE_e for (xx, yy, xy)
        for &n in &elem.nodes {
            let share = w / disc.tributary[n];
            de[0] += share * dj_node.xx[n];
            de[1] += share * dj_node.yy[n];
            de[2] += share * dj_node.xy[n];
        }
        for (a, &n) in elem.nodes.iter().enumerate() {
            let g = elem.grads[a];
            for i in 0..2 {
                let dxx = g[0] * f.0[i][0];
                let dyy = g[1] * f.0[i][1];
                let dxy = 0.5 * (g[0] * f.0[i][1] + f.0[i][0] * g[1]);
                dj_du[disc.dof(n, i)] += de[0] * dxx + de[1] * dyy + de[2] * dxy;
            }
        }
    }

    // K^T lambda = dJ/du with Dirichlet rows eliminated
    let mut k = tangent_banded(disc, model, modulus, &sol.u);
    for dof in 0..disc.ndof {
        if disc.constraint[dof].is_some() {
            k.eliminate_symmetric(dof);
            dj_du[dof] = 0.0;
        }
    }
    let lu = k.factor()?;
    let lambda = lu.solve_transpose(&dj_du);

    // dJ/dE_e = -lambda^T dR/dE_e, element by element with the modulus seeded
    let mut grad = vec![0.0; disc.elems.len()];
    for (e, elem) in disc.elems.iter().enumerate() {
        let kin = Kinematics::new(deformation_gradient(elem, &sol.u).map_into(Dual::constant));
        let p = first_pk_stress_unchecked(model, &kin, &Dual::seeded(modulus.values[e]));
        let mut acc = 0.0;
        for (a, &n) in elem.nodes.iter().enumerate() {
            for i in 0..2 {
                let dr = elem.area
                    * (p.0[i][0].d * elem.grads[a][0] + p.0[i][1].d * elem.grads[a][1]);
                acc += lambda[disc.dof(n, i)] * dr;
            }
        }
        grad[e] = -acc;
    }
    Ok(grad)
}

/// Runs the inversion described by `run` against the nodal reference
/// strains. A forward failure at the initial point is an error; later
/// failures terminate gracefully with the history so far.
pub fn inverse_fea(
    mesh: &Mesh,
    model: &MaterialModel,
    load: &BoundaryLoad,
    strain_ref: &Tensor2Field,
    run: AdjointRun,
) -> Result<AdjointRun> {
    if strain_ref.len() != mesh.node_count() {
        return Err(Error::invalid(format!(
            "reference strains cover {} nodes, mesh has {}",
            strain_ref.len(),
            mesh.node_count()
        )));
    }
    let ref_flat = strain_ref.flatten();
    if ref_flat.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid(
            "reference strain field is identically zero; relative errors are undefined",
        ));
    }
    let disc = Discretization::new(mesh)?;
    let mut run = run;
    let mut e = initial_field(&run.e_init, mesh.element_count())?;

    let evaluate = |values: &[f64]| -> Result<(FemSolution, f64, f64)> {
        let field = ModulusField {
            values: values.to_vec(),
        };
        let sol = solve_forward(mesh, model, &field, load)?;
        let j = objective(&sol, strain_ref);
        let err = l2_relative_error(&sol.strain_nodes.flatten(), &ref_flat)?;
        Ok((sol, j, err))
    };

    let (mut sol, mut j, mut strain_err) = evaluate(&e).map_err(|err| match err {
        Error::SolverFailure { step, detail } => Error::SolverFailure {
            step,
            detail: format!("initial forward solve failed: {detail}"),
        },
        other => other,
    })?;

    let modulus_err = |values: &[f64]| {
        run.e_truth
            .as_ref()
            .map(|t| l2_relative_error(values, &t.values).expect("truth is nonzero"))
    };

    let mut best = (strain_err, e.clone());
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None; // (e, gradient)
    let mut termination = Termination::MaxIterations;

    for iteration in 0..run.max_iter {
        run.history.push(AdjointRecord {
            iteration,
            objective: j,
            strain_error_pct: strain_err,
            modulus_error_pct: modulus_err(&e),
        });
        run.snapshots.push(ModulusField { values: e.clone() });
        if strain_err < run.tol * 100.0 {
            termination = Termination::Converged;
            break;
        }

        let field = ModulusField { values: e.clone() };
        let grad = match adjoint_gradient(&disc, model, &field, &sol, strain_ref) {
            Ok(g) => g,
            Err(err) => {
                termination = Termination::EarlyTermination(format!("adjoint solve: {err}"));
                break;
            }
        };

        // Barzilai-Borwein step seed, scale-free fallback on the first pass
        let gmax = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        if gmax == 0.0 {
            termination = Termination::Converged;
            break;
        }
        let mut alpha = match &prev {
            Some((pe, pg)) => {
                let mut sy = 0.0;
                let mut yy = 0.0;
                for i in 0..e.len() {
                    let s = e[i] - pe[i];
                    let y = grad[i] - pg[i];
                    sy += s * y;
                    yy += y * y;
                }
                if yy > 0.0 && sy.abs() > 0.0 {
                    (sy.abs() / yy).clamp(1e-10, 1e6)
                } else {
                    0.1 / gmax
                }
            }
            None => 0.1 / gmax,
        };

        let mut accepted = None;
        for _ in 0..LINE_SEARCH_LIMIT {
            let mut cand: Vec<f64> = e.iter().zip(&grad).map(|(v, g)| v - alpha * g).collect();
            project(&mut cand);
            let moved: f64 = cand
                .iter()
                .zip(&e)
                .map(|(c, v)| (c - v) * (c - v))
                .sum::<f64>()
                .sqrt();
            if moved == 0.0 {
                break; // fully pinned at the box or step underflow
            }
            match evaluate(&cand) {
                Ok((s, jn, err)) => {
                    let decrease: f64 = e
                        .iter()
                        .zip(&cand)
                        .zip(&grad)
                        .map(|((v, c), g)| g * (v - c))
                        .sum();
                    if jn <= j - ARMIJO_C * decrease.max(0.0) {
                        accepted = Some((cand, s, jn, err));
                        break;
                    }
                }
                Err(_) => {} // inadmissible candidate, shrink
            }
            alpha *= 0.5;
        }

        match accepted {
            Some((cand, s, jn, err)) => {
                prev = Some((e.clone(), grad));
                e = cand;
                sol = s;
                j = jn;
                strain_err = err;
                if strain_err < best.0 {
                    best = (strain_err, e.clone());
                }
            }
            None => {
                termination =
                    Termination::EarlyTermination("line search found no descent step".into());
                break;
            }
        }
    }

    if termination == Termination::MaxIterations && strain_err < run.tol * 100.0 {
        termination = Termination::Converged;
    }
    run.e_best = ModulusField { values: best.1 };
    run.e_final = ModulusField { values: e };
    run.termination = Some(termination);
    Ok(run)
}

/// Compares the adjoint gradient against central finite differences of J
/// for 10 randomly chosen elements; returns the worst relative deviation.
pub fn adjoint_gradient_check(
    mesh: &Mesh,
    model: &MaterialModel,
    load: &BoundaryLoad,
    strain_ref: &Tensor2Field,
    e: &ModulusField,
) -> Result<f64> {
    let disc = Discretization::new(mesh)?;
    let sol = solve_forward(mesh, model, e, load)?;
    let grad = adjoint_gradient(&disc, model, e, &sol, strain_ref)?;

    let h = 1e-4;
    let scale = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs())).max(1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(0xadc0de);
    let mut worst = 0.0_f64;
    for _ in 0..10 {
        let idx = rng.random_range(0..e.len());
        let mut probe = e.values.clone();
        probe[idx] += h;
        let jp = objective(
            &solve_forward(mesh, model, &ModulusField { values: probe.clone() }, load)?,
            strain_ref,
        );
        probe[idx] -= 2.0 * h;
        let jm = objective(
            &solve_forward(mesh, model, &ModulusField { values: probe }, load)?,
            strain_ref,
        );
        let fd = (jp - jm) / (2.0 * h);
        let denom = fd.abs().max(grad[idx].abs()).max(1e-6 * scale);
        worst = worst.max((fd - grad[idx]).abs() / denom);
    }
    Ok(worst)
}
