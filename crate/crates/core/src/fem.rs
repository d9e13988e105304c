//! Total-Lagrangian forward solver on P1 triangles under equibiaxial
//! Dirichlet stretch.
//!
//! Normal displacement components are prescribed on all four faces
//! (u_x = -d·s at x=0, +d·s at x=1; u_y = -d·s at y=0, +d·s at y=1),
//! tangential components are free, and the load is ramped over `steps`
//! increments with adaptive halving when Newton fails. The element tangent
//! is the exact derivative of the constitutive law, obtained by dual-number
//! evaluation, so one implementation serves every material model.
//!
//! Unknowns are ordered by (y, x) node position, which keeps the stiffness
//! bandwidth at O(grid_n) for the banded factorization. Assembly is
//! sequential in element order, making results independent of worker count.

use std::collections::VecDeque;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::fieldgen::{ModulusField, Tensor2Field};
use crate::geometry::Mesh;
use crate::linalg::{norm2, BandedMatrix};
use crate::materials::{
    check_admissible, first_pk_stress_unchecked, green_lagrange, Kinematics, MaterialModel,
};
use crate::scalar::{Dual, Mat2};
use crate::{Error, Result};

pub const NEWTON_RELATIVE_TOL: f64 = 1e-10;
/// Residuals below this are converged regardless of the reference norm
/// (covers the unloaded state, whose initial residual is already zero).
pub const NEWTON_ABSOLUTE_FLOOR: f64 = 1e-14;
pub const NEWTON_MAX_ITERATIONS: usize = 50;
/// Failed increments are halved at most this many times in a row.
pub const MAX_STEP_HALVINGS: usize = 4;
/// Newton is declared divergent after this many consecutive residual
/// increases.
const DIVERGENCE_GROWTH_LIMIT: usize = 5;

/// Equibiaxial boundary displacement: each side moves by `d`, so total
/// stretch is 2d per axis (d = 0.2 is 40% equibiaxial stretch).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryLoad {
    pub d: f64,
    pub steps: usize,
}

impl BoundaryLoad {
    pub fn new(d: f64, steps: usize) -> Result<BoundaryLoad> {
        if !(d >= 0.0) {
            return Err(Error::invalid(format!(
                "boundary displacement must be non-negative, got {d}"
            )));
        }
        if steps < 1 {
            return Err(Error::invalid("need at least one load step"));
        }
        Ok(BoundaryLoad { d, steps })
    }
}

/// Converged forward solution.
#[derive(Clone, Debug)]
pub struct FemSolution {
    /// Nodal displacement vectors.
    pub u: Vec<[f64; 2]>,
    /// Green-Lagrange strain averaged to nodes (area-weighted).
    pub strain_nodes: Tensor2Field,
    /// Constant per-element Green-Lagrange strain.
    pub strain_elements: Tensor2Field,
    /// Final Newton residual norm over free unknowns.
    pub residual_norm: f64,
}

pub(crate) struct ElementGeometry {
    pub nodes: [usize; 3],
    /// Constant P1 shape-function gradients.
    pub grads: [[f64; 2]; 3],
    pub area: f64,
}

/// Mesh-derived data shared by the forward and adjoint solvers.
pub(crate) struct Discretization {
    pub ndof: usize,
    pub hbw: usize,
    /// node -> banded slot; dofs are (2*slot, 2*slot + 1).
    pub slot: Vec<usize>,
    pub node_of_slot: Vec<usize>,
    pub elems: Vec<ElementGeometry>,
    /// Per dof: unit-displacement factor of the Dirichlet value, or None if
    /// free. The prescribed value at load fraction s is factor * d * s.
    pub constraint: Vec<Option<f64>>,
    /// Nodal averaging weight: sum of incident element areas / 3.
    pub tributary: Vec<f64>,
}

impl Discretization {
    pub fn new(mesh: &Mesh) -> Result<Discretization> {
        let nn = mesh.node_count();
        let mut elems = Vec::with_capacity(mesh.element_count());
        let mut tributary = vec![0.0; nn];
        for (e, &[a, b, c]) in mesh.elements.iter().enumerate() {
            let (p0, p1, p2) = (mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]);
            let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
            if !(det > 0.0) {
                return Err(Error::DegenerateInput(format!(
                    "element {e} is degenerate or inverted (2A = {det:e})"
                )));
            }
            let grads = [
                [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
                [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det],
                [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det],
            ];
            let area = 0.5 * det;
            for n in [a, b, c] {
                tributary[n] += area / 3.0;
            }
            elems.push(ElementGeometry {
                nodes: [a, b, c],
                grads,
                area,
            });
        }

        let mut order: Vec<usize> = (0..nn).collect();
        order.sort_by(|&a, &b| {
            let (pa, pb) = (mesh.nodes[a], mesh.nodes[b]);
            pa[1].total_cmp(&pb[1]).then(pa[0].total_cmp(&pb[0]))
        });
        let mut slot = vec![0; nn];
        for (s, &n) in order.iter().enumerate() {
            slot[n] = s;
        }

        let mut hbw = 1;
        for elem in &elems {
            let slots = elem.nodes.map(|n| slot[n]);
            let lo = slots.iter().min().copied().expect("triangle");
            let hi = slots.iter().max().copied().expect("triangle");
            hbw = hbw.max(2 * (hi - lo) + 1);
        }

        let mut constraint = vec![None; 2 * nn];
        let mut pin = |nodes: &[usize], comp: usize, factor: f64| {
            for &n in nodes {
                constraint[2 * slot[n] + comp] = Some(factor);
            }
        };
        pin(&mesh.boundary.left, 0, -1.0);
        pin(&mesh.boundary.right, 0, 1.0);
        pin(&mesh.boundary.bottom, 1, -1.0);
        pin(&mesh.boundary.top, 1, 1.0);

        Ok(Discretization {
            ndof: 2 * nn,
            hbw,
            slot,
            node_of_slot: order,
            elems,
            constraint,
            tributary,
        })
    }

    pub fn dof(&self, node: usize, comp: usize) -> usize {
        2 * self.slot[node] + comp
    }

    fn apply_dirichlet(&self, u: &mut [[f64; 2]], value: f64) {
        for (dof, factor) in self.constraint.iter().enumerate() {
            if let Some(f) = factor {
                u[self.node_of_slot[dof / 2]][dof % 2] = f * value;
            }
        }
    }

    fn free_norm(&self, r: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (dof, v) in r.iter().enumerate() {
            if self.constraint[dof].is_none() {
                acc += v * v;
            }
        }
        acc.sqrt()
    }
}

pub(crate) fn deformation_gradient(elem: &ElementGeometry, u: &[[f64; 2]]) -> Mat2<f64> {
    let mut f = [[1.0, 0.0], [0.0, 1.0]];
    for (a, &n) in elem.nodes.iter().enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                f[i][j] += u[n][i] * elem.grads[a][j];
            }
        }
    }
    Mat2::from_f64(f)
}

/// Nodal internal forces assembled at state `u`. Free rows vanish at
/// equilibrium; constrained rows carry the boundary reactions.
pub fn internal_forces(
    mesh: &Mesh,
    model: &MaterialModel,
    modulus: &ModulusField,
    u: &[[f64; 2]],
) -> Result<Vec<[f64; 2]>> {
    if modulus.len() != mesh.element_count() {
        return Err(Error::invalid("modulus field does not match mesh"));
    }
    let disc = Discretization::new(mesh)?;
    let r = residual_vector(&disc, model, modulus, u)?;
    Ok((0..mesh.node_count())
        .map(|n| [r[disc.dof(n, 0)], r[disc.dof(n, 1)]])
        .collect())
}

/// Assembled internal nodal forces (dof-ordered, no boundary handling).
/// Fails with a domain error if any element leaves the material's domain.
pub(crate) fn residual_vector(
    disc: &Discretization,
    model: &MaterialModel,
    modulus: &ModulusField,
    u: &[[f64; 2]],
) -> Result<Vec<f64>> {
    let mut r = vec![0.0; disc.ndof];
    for (e, elem) in disc.elems.iter().enumerate() {
        let kin = Kinematics::new(deformation_gradient(elem, u));
        check_admissible(model, &kin)
            .map_err(|err| Error::Domain(format!("element {e}: {err}")))?;
        let p = first_pk_stress_unchecked(model, &kin, &modulus.values[e]);
        for (a, &n) in elem.nodes.iter().enumerate() {
            for i in 0..2 {
                let f = elem.area
                    * (p.0[i][0] * elem.grads[a][0] + p.0[i][1] * elem.grads[a][1]);
                r[disc.dof(n, i)] += f;
            }
        }
    }
    Ok(r)
}

/// Assembled tangent stiffness (dof-ordered, no boundary elimination),
/// column by column from dual-number directional derivatives of P.
pub(crate) fn tangent_banded(
    disc: &Discretization,
    model: &MaterialModel,
    modulus: &ModulusField,
    u: &[[f64; 2]],
) -> BandedMatrix {
    let mut k = BandedMatrix::zeros(disc.ndof, disc.hbw);
    for (e, elem) in disc.elems.iter().enumerate() {
        let theta = Dual::constant(modulus.values[e]);
        let f = deformation_gradient(elem, u);
        for b in 0..3 {
            for comp in 0..2 {
                // F is linear in u, so seeding u[b][comp] seeds
                // dF_ij = delta(i, comp) * grad_b[j]
                let fd = Mat2::new(
                    Dual::new(f.0[0][0], if comp == 0 { elem.grads[b][0] } else { 0.0 }),
                    Dual::new(f.0[0][1], if comp == 0 { elem.grads[b][1] } else { 0.0 }),
                    Dual::new(f.0[1][0], if comp == 1 { elem.grads[b][0] } else { 0.0 }),
                    Dual::new(f.0[1][1], if comp == 1 { elem.grads[b][1] } else { 0.0 }),
                );
                let kin = Kinematics::new(fd);
                let p = first_pk_stress_unchecked(model, &kin, &theta);
                let col = disc.dof(elem.nodes[b], comp);
                for (a, &n) in elem.nodes.iter().enumerate() {
                    for i in 0..2 {
                        let v = elem.area
                            * (p.0[i][0].d * elem.grads[a][0] + p.0[i][1].d * elem.grads[a][1]);
                        k.add(disc.dof(n, i), col, v);
                    }
                }
            }
        }
    }
    k
}

/// One Newton solve at a fixed load fraction, starting from (and updating)
/// `u`. Returns the converged free-residual norm.
fn newton_at(
    disc: &Discretization,
    model: &MaterialModel,
    modulus: &ModulusField,
    boundary_value: f64,
    u: &mut Vec<[f64; 2]>,
) -> Result<f64> {
    disc.apply_dirichlet(u, boundary_value);
    let mut reference: Option<f64> = None;
    let mut prev = f64::INFINITY;
    let mut growth = 0;
    for _ in 0..NEWTON_MAX_ITERATIONS {
        let r = residual_vector(disc, model, modulus, u)?;
        let rn = disc.free_norm(&r);
        let r0 = *reference.get_or_insert(rn);
        if rn <= NEWTON_RELATIVE_TOL * r0 || rn <= NEWTON_ABSOLUTE_FLOOR {
            return Ok(rn);
        }
        if rn > prev {
            growth += 1;
            if growth >= DIVERGENCE_GROWTH_LIMIT {
                return Err(Error::Numerical(format!(
                    "residual grew over {DIVERGENCE_GROWTH_LIMIT} consecutive iterations \
                     (now {rn:e})"
                )));
            }
        } else {
            growth = 0;
        }
        prev = rn;

        let mut k = tangent_banded(disc, model, modulus, u);
        let mut rhs = vec![0.0; disc.ndof];
        for dof in 0..disc.ndof {
            if disc.constraint[dof].is_none() {
                rhs[dof] = -r[dof];
            } else {
                k.eliminate_symmetric(dof);
            }
        }
        let lu = k.factor()?;
        let delta = lu.solve(&rhs);
        for (dof, dv) in delta.iter().enumerate() {
            u[disc.node_of_slot[dof / 2]][dof % 2] += dv;
        }
    }
    Err(Error::Numerical(format!(
        "no convergence within {NEWTON_MAX_ITERATIONS} Newton iterations"
    )))
}

fn recover_strains(
    disc: &Discretization,
    u: &[[f64; 2]],
) -> (Tensor2Field, Tensor2Field) {
    let ne = disc.elems.len();
    let nn = disc.tributary.len();
    let mut elements = Tensor2Field::zeros(ne);
    let mut nodes = Tensor2Field::zeros(nn);
    for (e, elem) in disc.elems.iter().enumerate() {
        let strain = green_lagrange(&deformation_gradient(elem, u));
        let (exx, eyy, exy) = (strain.0[0][0], strain.0[1][1], strain.0[0][1]);
        elements.xx[e] = exx;
        elements.yy[e] = eyy;
        elements.xy[e] = exy;
        let w = elem.area / 3.0;
        for &n in &elem.nodes {
            nodes.xx[n] += w * exx;
            nodes.yy[n] += w * eyy;
            nodes.xy[n] += w * exy;
        }
    }
    for n in 0..nn {
        nodes.xx[n] /= disc.tributary[n];
        nodes.yy[n] /= disc.tributary[n];
        nodes.xy[n] /= disc.tributary[n];
    }
    (elements, nodes)
}

/// Solves the equibiaxial stretch problem, ramping the boundary displacement
/// over `load.steps` increments.
///
/// A failed increment (Newton divergence, singular tangent, inadmissible
/// deformation state, or an exhausted iteration budget) is retried at half
/// the increment, at most [`MAX_STEP_HALVINGS`] times in a row, before the
/// failure is reported with its 1-based load step.
pub fn solve_forward(
    mesh: &Mesh,
    model: &MaterialModel,
    modulus: &ModulusField,
    load: &BoundaryLoad,
) -> Result<FemSolution> {
    if modulus.len() != mesh.element_count() {
        return Err(Error::invalid(format!(
            "modulus field has {} values for {} elements",
            modulus.len(),
            mesh.element_count()
        )));
    }
    if let Some(bad) = modulus.values.iter().find(|&&e| !(e > 0.0)) {
        return Err(Error::invalid(format!("non-positive modulus {bad}")));
    }
    let disc = Discretization::new(mesh)?;
    let mut u = vec![[0.0; 2]; mesh.node_count()];
    let mut residual_norm = 0.0;
    let mut reached = 0.0;
    let mut halvings = 0usize;
    let mut targets: VecDeque<(f64, usize)> = (1..=load.steps)
        .map(|k| (k as f64 / load.steps as f64, k))
        .collect();

    while let Some(&(fraction, step)) = targets.front() {
        let mut trial = u.clone();
        match newton_at(&disc, model, modulus, load.d * fraction, &mut trial) {
            Ok(rn) => {
                u = trial;
                residual_norm = rn;
                reached = fraction;
                halvings = 0;
                targets.pop_front();
            }
            Err(err @ (Error::Domain(_) | Error::Numerical(_))) => {
                halvings += 1;
                if halvings > MAX_STEP_HALVINGS {
                    return Err(Error::SolverFailure {
                        step,
                        detail: format!("{err} (after {MAX_STEP_HALVINGS} increment halvings)"),
                    });
                }
                targets.push_front((0.5 * (reached + fraction), step));
            }
            Err(other) => return Err(other),
        }
    }

    let (strain_elements, strain_nodes) = recover_strains(&disc, &u);
    Ok(FemSolution {
        u,
        strain_nodes,
        strain_elements,
        residual_norm,
    })
}

/// Compares tangent-vector products K·δu against central finite differences
/// of the residual over 10 random unit directions; returns the worst
/// relative deviation. The state `u` must be admissible.
pub fn tangent_check(
    mesh: &Mesh,
    model: &MaterialModel,
    modulus: &ModulusField,
    u: &[[f64; 2]],
) -> Result<f64> {
    if modulus.len() != mesh.element_count() {
        return Err(Error::invalid("modulus field does not match mesh"));
    }
    let disc = Discretization::new(mesh)?;
    residual_vector(&disc, model, modulus, u)?;
    let k = tangent_banded(&disc, model, modulus, u);

    let h = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(0x7a6e67);
    let mut worst = 0.0_f64;
    for _ in 0..10 {
        let mut dir: Vec<f64> = (0..disc.ndof).map(|_| rng.sample(StandardNormal)).collect();
        let scale = norm2(&dir);
        dir.iter_mut().for_each(|v| *v /= scale);

        let perturb = |sign: f64| -> Vec<[f64; 2]> {
            let mut up = u.to_vec();
            for (dof, dv) in dir.iter().enumerate() {
                up[disc.node_of_slot[dof / 2]][dof % 2] += sign * h * dv;
            }
            up
        };
        let rp = residual_vector(&disc, model, modulus, &perturb(1.0))?;
        let rm = residual_vector(&disc, model, modulus, &perturb(-1.0))?;
        let kd = k.matvec(&dir);
        let mut diff2 = 0.0;
        let mut ref2 = 0.0;
        for i in 0..disc.ndof {
            let fd = (rp[i] - rm[i]) / (2.0 * h);
            diff2 += (kd[i] - fd) * (kd[i] - fd);
            ref2 += fd * fd;
        }
        worst = worst.max((diff2 / ref2.max(1e-30)).sqrt());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_crossed_mesh;
    use crate::materials::PlaneMode;

    fn nh() -> MaterialModel {
        MaterialModel::neo_hookean(0.3, PlaneMode::PlaneStrain).unwrap()
    }

    fn homogeneous(mesh: &Mesh, e: f64) -> ModulusField {
        ModulusField::uniform(e, mesh.element_count())
    }

    #[test]
    fn affine_solution_recovered() {
        let mesh = build_crossed_mesh(4).unwrap();
        let sol = solve_forward(
            &mesh,
            &nh(),
            &homogeneous(&mesh, 2.0),
            &BoundaryLoad::new(0.2, 10).unwrap(),
        )
        .unwrap();
        for (n, &[x, y]) in mesh.nodes.iter().enumerate() {
            assert!((sol.u[n][0] - (0.4 * x - 0.2)).abs() < 1e-8, "node {n}");
            assert!((sol.u[n][1] - (0.4 * y - 0.2)).abs() < 1e-8, "node {n}");
        }
        for field in [&sol.strain_nodes, &sol.strain_elements] {
            for i in 0..field.len() {
                assert!((field.xx[i] - 0.48).abs() < 1e-8);
                assert!((field.yy[i] - 0.48).abs() < 1e-8);
                assert!(field.xy[i].abs() < 1e-8);
            }
        }
    }

    #[test]
    fn unloaded_square_stays_put() {
        let mesh = build_crossed_mesh(3).unwrap();
        let sol = solve_forward(
            &mesh,
            &nh(),
            &homogeneous(&mesh, 1.0),
            &BoundaryLoad::new(0.0, 5).unwrap(),
        )
        .unwrap();
        assert!(sol.u.iter().all(|v| v == &[0.0, 0.0]));
        assert!(sol.strain_nodes.flatten().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn patch_test_is_mesh_independent() {
        let load = BoundaryLoad::new(0.2, 10).unwrap();
        let mut strains = Vec::new();
        for n in [2, 5] {
            let mesh = build_crossed_mesh(n).unwrap();
            let sol = solve_forward(&mesh, &nh(), &homogeneous(&mesh, 1.5), &load).unwrap();
            let xx0 = sol.strain_elements.xx[0];
            for v in &sol.strain_elements.xx {
                assert!((v - xx0).abs() < 1e-8, "non-uniform strain");
            }
            strains.push(xx0);
        }
        assert!((strains[0] - strains[1]).abs() < 1e-8);
    }

    #[test]
    fn all_models_solve_the_homogeneous_problem() {
        let mesh = build_crossed_mesh(3).unwrap();
        let load = BoundaryLoad::new(0.2, 10).unwrap();
        let models = [
            nh(),
            MaterialModel::neo_hookean(0.3, PlaneMode::PlaneStress).unwrap(),
            MaterialModel::mooney_rivlin(0.2).unwrap(),
            MaterialModel::gent(10.0).unwrap(),
        ];
        for model in &models {
            let sol = solve_forward(&mesh, model, &homogeneous(&mesh, 2.0), &load).unwrap();
            for i in 0..sol.strain_elements.len() {
                assert!(
                    (sol.strain_elements.xx[i] - 0.48).abs() < 1e-8,
                    "{:?}",
                    model.kind()
                );
                assert!((sol.strain_elements.yy[i] - 0.48).abs() < 1e-8);
                assert!(sol.strain_elements.xy[i].abs() < 1e-8);
            }
        }
    }

    #[test]
    fn internal_forces_balance_globally() {
        let mesh = build_crossed_mesh(4).unwrap();
        let mut modulus = homogeneous(&mesh, 1.0);
        for (e, v) in modulus.values.iter_mut().enumerate() {
            *v = if mesh.element_centroid(e)[0] < 0.5 { 1.5 } else { 3.0 };
        }
        let sol = solve_forward(&mesh, &nh(), &modulus, &BoundaryLoad::new(0.2, 10).unwrap())
            .unwrap();
        let disc = Discretization::new(&mesh).unwrap();
        let r = residual_vector(&disc, &nh(), &modulus, &sol.u).unwrap();
        let mut total = [0.0, 0.0];
        for dof in 0..disc.ndof {
            total[dof % 2] += r[dof];
        }
        assert!(total[0].abs() < 1e-10, "sum fx = {}", total[0]);
        assert!(total[1].abs() < 1e-10, "sum fy = {}", total[1]);
    }

    #[test]
    fn homogeneous_solution_is_swap_symmetric() {
        let mesh = build_crossed_mesh(3).unwrap();
        let sol = solve_forward(
            &mesh,
            &nh(),
            &homogeneous(&mesh, 2.0),
            &BoundaryLoad::new(0.15, 10).unwrap(),
        )
        .unwrap();
        for (n, &[x, y]) in mesh.nodes.iter().enumerate() {
            let mirror = mesh
                .nodes
                .iter()
                .position(|&[mx, my]| (mx - y).abs() < 1e-12 && (my - x).abs() < 1e-12)
                .expect("swap image exists in the crossed layout");
            assert!(
                (sol.u[n][0] - sol.u[mirror][1]).abs() < 1e-8,
                "u_x({x},{y}) vs u_y({y},{x})"
            );
        }
    }

    #[test]
    fn nodal_averaging_preserves_area_weighted_mean() {
        let mesh = build_crossed_mesh(4).unwrap();
        let mut modulus = homogeneous(&mesh, 2.0);
        for (e, v) in modulus.values.iter_mut().enumerate() {
            *v = 1.0 + 2.0 * mesh.element_centroid(e)[1];
        }
        let sol = solve_forward(&mesh, &nh(), &modulus, &BoundaryLoad::new(0.2, 10).unwrap())
            .unwrap();
        let disc = Discretization::new(&mesh).unwrap();
        let total_area: f64 = disc.elems.iter().map(|e| e.area).sum();
        let trib_total: f64 = disc.tributary.iter().sum();
        for (elem_c, node_c, name) in [
            (&sol.strain_elements.xx, &sol.strain_nodes.xx, "xx"),
            (&sol.strain_elements.yy, &sol.strain_nodes.yy, "yy"),
            (&sol.strain_elements.xy, &sol.strain_nodes.xy, "xy"),
        ] {
            let elem_mean: f64 = disc
                .elems
                .iter()
                .zip(elem_c.iter())
                .map(|(e, s)| e.area * s)
                .sum::<f64>()
                / total_area;
            let node_mean: f64 = disc
                .tributary
                .iter()
                .zip(node_c.iter())
                .map(|(w, s)| w * s)
                .sum::<f64>()
                / trib_total;
            assert!(
                (elem_mean - node_mean).abs() < 1e-12,
                "{name}: {elem_mean} vs {node_mean}"
            );
        }
    }

    #[test]
    fn gent_lockup_reports_failing_step() {
        // Jm = 0.5 locks up well before 40% stretch; halvings cannot save it.
        let mesh = build_crossed_mesh(2).unwrap();
        let err = solve_forward(
            &mesh,
            &MaterialModel::gent(0.5).unwrap(),
            &homogeneous(&mesh, 2.0),
            &BoundaryLoad::new(0.2, 10).unwrap(),
        )
        .unwrap_err();
        match err {
            Error::SolverFailure { step, .. } => assert!((1..=10).contains(&step)),
            other => panic!("expected solver failure, got {other:?}"),
        }
    }

    #[test]
    fn tangent_matches_finite_differences() {
        let mesh = build_crossed_mesh(3).unwrap();
        let modulus = homogeneous(&mesh, 2.0);
        let zero = vec![[0.0, 0.0]; mesh.node_count()];
        let dev = tangent_check(&mesh, &nh(), &modulus, &zero).unwrap();
        assert!(dev < 1e-7, "zero state deviation {dev}");

        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for model in [
            nh(),
            MaterialModel::mooney_rivlin(0.2).unwrap(),
            MaterialModel::gent(10.0).unwrap(),
        ] {
            let u: Vec<[f64; 2]> = (0..mesh.node_count())
                .map(|_| [rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01)])
                .collect();
            let dev = tangent_check(&mesh, &model, &modulus, &u).unwrap();
            assert!(dev < 1e-5, "{:?}: deviation {dev}", model.kind());
        }
    }

    #[test]
    fn inverted_element_is_a_domain_error() {
        let mesh = build_crossed_mesh(1).unwrap();
        let modulus = homogeneous(&mesh, 2.0);
        let mut u = vec![[0.0, 0.0]; mesh.node_count()];
        u[0] = [10.0, 10.0]; // drags the corner across the cell
        match tangent_check(&mesh, &nh(), &modulus, &u) {
            Err(Error::Domain(_)) => {}
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_inputs_rejected() {
        let mesh = build_crossed_mesh(2).unwrap();
        assert!(BoundaryLoad::new(-0.1, 10).is_err());
        assert!(BoundaryLoad::new(0.2, 0).is_err());
        let short = ModulusField::uniform(1.0, 3);
        assert!(solve_forward(&mesh, &nh(), &short, &BoundaryLoad::new(0.1, 2).unwrap()).is_err());
        let negative = ModulusField::uniform(-1.0, mesh.element_count());
        assert!(
            solve_forward(&mesh, &nh(), &negative, &BoundaryLoad::new(0.1, 2).unwrap()).is_err()
        );
    }
}
