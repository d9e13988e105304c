//! The four network variants, output transforms, the three-term loss, the
//! Adam training loop, and field evaluation.
//!
//! Losses are assembled once as a graph over the collocation points (the
//! mesh nodes); each training iteration writes parameters, runs one forward
//! and one reverse sweep, and steps Adam on the exact gradient.

use crate::fem::{BoundaryLoad, FemSolution};
use crate::fieldgen::{ModulusField, Tensor2Field};
use crate::geometry::Mesh;
use crate::graph::{Graph, TapeExpr};
use crate::materials::{first_pk_stress_unchecked, green_lagrange, Kinematics, MaterialModel};
use crate::net::{
    DerivOrder, EvalSession, Fcnn, NetworkSpec, OutputId, ParameterSet,
};
use crate::scalar::{Jet1, Mat2, Scalar};
use crate::{Error, Result};

/// Input mapping and boundary-condition treatment.
///
/// A: hard boundary constraints, raw coordinates.
/// B: soft (free) outputs, raw coordinates.
/// C: hard boundary constraints, Fourier-feature inputs.
/// D: soft outputs, Fourier-feature inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    A,
    B,
    C,
    D,
}

impl Variant {
    pub fn fourier(self) -> bool {
        matches!(self, Variant::C | Variant::D)
    }

    pub fn hard_bc(self) -> bool {
        matches!(self, Variant::A | Variant::C)
    }

    pub fn all() -> [Variant; 4] {
        [Variant::A, Variant::B, Variant::C, Variant::D]
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Variant::A => "A",
            Variant::B => "B",
            Variant::C => "C",
            Variant::D => "D",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Variant> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Variant::A),
            "B" => Ok(Variant::B),
            "C" => Ok(Variant::C),
            "D" => Ok(Variant::D),
            other => Err(Error::invalid(format!(
                "unknown variant {other:?} (expected A, B, C, or D)"
            ))),
        }
    }
}

/// Multiplier on the constitutive residual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConstitutiveWeight {
    /// Pointwise (E*)^2, treated as a constant during the reverse sweep so
    /// the optimizer cannot shrink the modulus to cheat the weight.
    ModulusSquared,
    Fixed(f64),
}

/// Weights of the loss terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub pde: f64,
    pub data: f64,
    pub constitutive: ConstitutiveWeight,
}

impl Default for LossWeights {
    fn default() -> LossWeights {
        LossWeights {
            pde: 1.0,
            data: 100.0,
            constitutive: ConstitutiveWeight::ModulusSquared,
        }
    }
}

impl LossWeights {
    fn validate(&self) -> Result<()> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        let cw = match self.constitutive {
            ConstitutiveWeight::ModulusSquared => 1.0,
            ConstitutiveWeight::Fixed(w) => w,
        };
        if !ok(self.pde) || !ok(self.data) || !ok(cw) {
            return Err(Error::invalid("loss weights must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Everything a training run needs besides the mesh and reference data.
#[derive(Clone, Debug)]
pub struct PinnConfig {
    pub variant: Variant,
    pub fcnn: Fcnn,
    pub load: BoundaryLoad,
    pub material: MaterialModel,
    pub weights: LossWeights,
    pub learning_rate: f64,
    /// Optional per-iteration multiplicative decay on the learning rate.
    pub lr_decay: Option<f64>,
    pub iterations: usize,
    pub seed: u64,
    pub log_stride: usize,
    pub width_override: Option<usize>,
    pub depth_override: Option<usize>,
}

impl PinnConfig {
    pub fn new(
        variant: Variant,
        fcnn: Fcnn,
        load: BoundaryLoad,
        material: MaterialModel,
    ) -> PinnConfig {
        PinnConfig {
            variant,
            fcnn,
            load,
            material,
            weights: LossWeights::default(),
            learning_rate: 1e-3,
            lr_decay: None,
            iterations: 500_000,
            seed: 0,
            log_stride: 100,
            width_override: None,
            depth_override: None,
        }
    }

    pub fn network_spec(&self) -> NetworkSpec {
        let mut spec = NetworkSpec::new(self.fcnn, self.variant.fourier(), self.seed);
        spec.width_override = self.width_override;
        spec.depth_override = self.depth_override;
        spec
    }

    fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::invalid("learning rate must be finite and >= 0"));
        }
        if let Some(d) = self.lr_decay {
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::invalid("lr decay must lie in (0, 1]"));
            }
        }
        if self.log_stride == 0 {
            return Err(Error::invalid("log stride must be at least 1"));
        }
        Ok(())
    }
}

/// Per-component displacement normalization, taken from the reference
/// finite element solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransformStats {
    pub mean: [f64; 2],
    pub std: [f64; 2],
}

impl TransformStats {
    /// Population mean/std of each displacement component.
    pub fn from_displacements(u: &[[f64; 2]]) -> Result<TransformStats> {
        if u.is_empty() {
            return Err(Error::invalid("no displacements supplied"));
        }
        let n = u.len() as f64;
        let mut mean = [0.0; 2];
        for row in u {
            mean[0] += row[0];
            mean[1] += row[1];
        }
        mean[0] /= n;
        mean[1] /= n;
        let mut var = [0.0; 2];
        for row in u {
            var[0] += (row[0] - mean[0]).powi(2);
            var[1] += (row[1] - mean[1]).powi(2);
        }
        let std = [(var[0] / n).sqrt(), (var[1] / n).sqrt()];
        for c in 0..2 {
            if !(std[c] > 0.0) {
                return Err(Error::DegenerateInput(format!(
                    "displacement component {c} has zero spread; cannot normalize"
                )));
            }
        }
        Ok(TransformStats { mean, std })
    }

    /// mean 0, std 1 (raw outputs pass through).
    pub fn unit() -> TransformStats {
        TransformStats {
            mean: [0.0; 2],
            std: [1.0; 2],
        }
    }
}

/// u* for one component: the hard form pins u* = -d at coord 0 and +d at
/// coord 1 for any raw output, the free form just de-normalizes.
fn displacement_transform<S: Scalar>(
    raw: &S,
    coord: &S,
    d: f64,
    mean: f64,
    std: f64,
    hard: bool,
) -> S {
    let scaled = raw.clone() * raw.lift(std) + raw.lift(mean);
    if hard {
        let one = raw.lift(1.0);
        raw.lift(d) * (coord.clone() * raw.lift(2.0) - one.clone())
            + coord.clone() * (one - coord.clone()) * scaled
    } else {
        scaled
    }
}

fn sigmoid_f64(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// E* = 4 sigmoid(N_E) + 1, strictly inside (1, 5).
///
/// The sigmoid saturates to exactly 0 or 1 in f64 for |N_E| beyond ~37;
/// those tails are pinned to the nearest representable interior value so
/// the open bounds hold for every finite raw output.
pub fn modulus_transform(n_e: f64) -> f64 {
    (4.0 * sigmoid_f64(n_e) + 1.0).clamp(1.0_f64.next_up(), 5.0_f64.next_down())
}

/// Applies the output transforms at one point.
pub fn transform_outputs(
    raw: (f64, f64, f64),
    point: [f64; 2],
    stats: &TransformStats,
    variant: Variant,
    load: &BoundaryLoad,
) -> (f64, f64, f64) {
    let hard = variant.hard_bc();
    let ux = displacement_transform(
        &raw.0,
        &point[0],
        load.d,
        stats.mean[0],
        stats.std[0],
        hard,
    );
    let uy = displacement_transform(
        &raw.1,
        &point[1],
        load.d,
        stats.mean[1],
        stats.std[1],
        hard,
    );
    (ux, uy, modulus_transform(raw.2))
}

/// 100 * ||pred - ref||_2 / ||ref||_2.
pub fn l2_relative_error(pred: &[f64], reference: &[f64]) -> Result<f64> {
    if pred.len() != reference.len() {
        return Err(Error::invalid(format!(
            "field length mismatch: {} vs {}",
            pred.len(),
            reference.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, r) in pred.iter().zip(reference) {
        num += (p - r) * (p - r);
        den += r * r;
    }
    if !(den > 0.0) {
        return Err(Error::invalid("reference field has zero norm"));
    }
    Ok(100.0 * (num / den).sqrt())
}

/// E* as value plus spatial partials, from the raw output's channels.
fn modulus_star_jet1(g: &Graph, n: &Jet1<TapeExpr>) -> Jet1<TapeExpr> {
    let s = g.sigmoid(&n.v);
    let one = g.scalar(1.0);
    let four = g.scalar(4.0);
    let sp = s.clone() * (one.clone() - s.clone());
    Jet1::new(
        four.clone() * s + one,
        four.clone() * sp.clone() * n.dx.clone(),
        four * sp * n.dy.clone(),
    )
}

/// The loss graph over a fixed collocation set.
pub(crate) struct LossGraph {
    pub session: EvalSession,
    pub pde: TapeExpr,
    pub constitutive: Option<TapeExpr>,
    pub data: Option<TapeExpr>,
    pub total: TapeExpr,
    /// Nodal E* values (n x 1).
    pub e_star: TapeExpr,
}

fn constant_column(g: &Graph, values: &[f64]) -> TapeExpr {
    let mut a = ndarray::Array2::zeros((values.len(), 1));
    for (i, v) in values.iter().enumerate() {
        a[[i, 0]] = *v;
    }
    g.constant(a)
}

/// Builds the PDE, constitutive, and data terms plus their weighted total.
///
/// Arrangements with stress heads differentiate the network stresses
/// directly (first-order channels suffice); the others differentiate the
/// constitutive stress of the transformed solution, which takes second
/// spatial derivatives of the displacements.
pub(crate) fn build_loss_graph(
    config: &PinnConfig,
    points: &[[f64; 2]],
    stats: &TransformStats,
    strain_ref: Option<&Tensor2Field>,
) -> Result<LossGraph> {
    config.validate()?;
    if let Some(r) = strain_ref {
        if r.len() != points.len() {
            return Err(Error::invalid(format!(
                "reference strains cover {} points, collocation set has {}",
                r.len(),
                points.len()
            )));
        }
    }
    let spec = config.network_spec();
    let with_stress_heads = spec.has_stress_outputs();
    let order = if with_stress_heads {
        DerivOrder::First
    } else {
        DerivOrder::Second
    };
    let session = EvalSession::new(&spec, points, order)?;
    let g = session.graph().clone();
    let hard = config.variant.hard_bc();
    let d = config.load.d;

    // Transformed displacement jets and the deformation gradient
    // F = I + grad u*. Arrangements without stress heads also carry each F
    // entry's spatial partials, for the divergence of the stress law.
    let f_val: Mat2<TapeExpr>;
    let mut f_jet: Option<Mat2<Jet1<TapeExpr>>> = None;
    let e_raw_jet1: Jet1<TapeExpr>;
    if with_stress_heads {
        let ux = displacement_transform(
            &session.jet1(OutputId::Ux)?,
            &session.x_jet1(),
            d,
            stats.mean[0],
            stats.std[0],
            hard,
        );
        let uy = displacement_transform(
            &session.jet1(OutputId::Uy)?,
            &session.y_jet1(),
            d,
            stats.mean[1],
            stats.std[1],
            hard,
        );
        let one = g.scalar(1.0);
        f_val = Mat2::new(
            one.clone() + ux.dx.clone(),
            ux.dy.clone(),
            uy.dx.clone(),
            one + uy.dy.clone(),
        );
        e_raw_jet1 = session.jet1(OutputId::E)?;
    } else {
        let ux = displacement_transform(
            &session.jet2(OutputId::Ux)?,
            &session.x_jet2()?,
            d,
            stats.mean[0],
            stats.std[0],
            hard,
        );
        let uy = displacement_transform(
            &session.jet2(OutputId::Uy)?,
            &session.y_jet2()?,
            d,
            stats.mean[1],
            stats.std[1],
            hard,
        );
        let one = Jet1::constant(g.scalar(1.0));
        let fj = Mat2::new(
            one.clone() + ux.dx_jet(),
            ux.dy_jet(),
            uy.dx_jet(),
            one + uy.dy_jet(),
        );
        f_val = Mat2::new(
            fj.0[0][0].v.clone(),
            fj.0[0][1].v.clone(),
            fj.0[1][0].v.clone(),
            fj.0[1][1].v.clone(),
        );
        f_jet = Some(fj);
        e_raw_jet1 = session.jet2(OutputId::E)?.first_order();
    }
    let strain = green_lagrange(&f_val);
    let e_star = modulus_star_jet1(&g, &e_raw_jet1);

    // PDE term: squared divergence of the stress field.
    let pde = if with_stress_heads {
        // divergence of the network stress outputs
        let p00 = session.jet1(OutputId::P(0))?;
        let p01 = session.jet1(OutputId::P(1))?;
        let p10 = session.jet1(OutputId::P(2))?;
        let p11 = session.jet1(OutputId::P(3))?;
        let div0 = p00.dx.clone() + p10.dy.clone();
        let div1 = p01.dx.clone() + p11.dy.clone();
        session.mean(&(div0.clone() * div0 + div1.clone() * div1))
    } else {
        // divergence of the constitutive stress of (u*, E*)
        let kin = Kinematics::new(f_jet.take().expect("built above"));
        let p = first_pk_stress_unchecked(&config.material, &kin, &e_star);
        let div0 = p.0[0][0].dx.clone() + p.0[1][0].dy.clone();
        let div1 = p.0[0][1].dx.clone() + p.0[1][1].dy.clone();
        session.mean(&(div0.clone() * div0 + div1.clone() * div1))
    };

    // Constitutive term: (E*)^2-weighted gap between network stress and the
    // stress law, summed over the four components.
    let constitutive = if with_stress_heads {
        let kin = Kinematics::new(f_val.clone());
        let p_law = first_pk_stress_unchecked(&config.material, &kin, &e_star.v);
        let n_p = [
            session.jet1(OutputId::P(0))?.v,
            session.jet1(OutputId::P(1))?.v,
            session.jet1(OutputId::P(2))?.v,
            session.jet1(OutputId::P(3))?.v,
        ];
        let mut residual = g.scalar(0.0);
        for (k, n) in n_p.iter().enumerate() {
            let gap = n.clone() - p_law.0[k / 2][k % 2].clone();
            residual = residual + gap.clone() * gap;
        }
        let weight = match config.weights.constitutive {
            ConstitutiveWeight::ModulusSquared => {
                g.stop_grad(&(e_star.v.clone() * e_star.v.clone()))
            }
            ConstitutiveWeight::Fixed(w) => g.scalar(w),
        };
        Some(session.mean(&(weight * residual)))
    } else {
        None
    };

    // Data term: componentwise mean squared gap between the Green-Lagrange
    // strain of u* and the reference field.
    let data = match strain_ref {
        Some(r) => {
            let rxx = constant_column(&g, &r.xx);
            let ryy = constant_column(&g, &r.yy);
            let rxy = constant_column(&g, &r.xy);
            let gxx = strain.0[0][0].clone() - rxx;
            let gyy = strain.0[1][1].clone() - ryy;
            let gxy = strain.0[0][1].clone() - rxy;
            let sum = gxx.clone() * gxx + gyy.clone() * gyy + gxy.clone() * gxy;
            Some(session.mean(&(sum * g.scalar(1.0 / 3.0))))
        }
        None => None,
    };

    let mut total = g.scalar(config.weights.pde) * pde.clone();
    if let Some(c) = &constitutive {
        // the constitutive weight already sits inside the term
        total = total + c.clone();
    }
    if let Some(dt) = &data {
        total = total + g.scalar(config.weights.data) * dt.clone();
    }

    Ok(LossGraph {
        e_star: e_star.v.clone(),
        session,
        pde,
        constitutive,
        data,
        total,
    })
}

/// Values of the individual loss terms at fixed parameters.
#[derive(Clone, Copy, Debug)]
pub struct LossValues {
    pub pde: f64,
    pub constitutive: Option<f64>,
    pub data: Option<f64>,
    pub total: f64,
}

pub fn loss_values(
    config: &PinnConfig,
    params: &ParameterSet,
    points: &[[f64; 2]],
    stats: &TransformStats,
    strain_ref: Option<&Tensor2Field>,
) -> Result<LossValues> {
    let lg = build_loss_graph(config, points, stats, strain_ref)?;
    lg.session.eval(params)?;
    Ok(LossValues {
        pde: lg.session.scalar_value(&lg.pde),
        constitutive: lg
            .constitutive
            .as_ref()
            .map(|c| lg.session.scalar_value(c)),
        data: lg.data.as_ref().map(|d| lg.session.scalar_value(d)),
        total: lg.session.scalar_value(&lg.total),
    })
}

/// Mean squared stress divergence over the points.
pub fn pde_loss(
    config: &PinnConfig,
    params: &ParameterSet,
    points: &[[f64; 2]],
    stats: &TransformStats,
) -> Result<f64> {
    Ok(loss_values(config, params, points, stats, None)?.pde)
}

/// Weighted stress-law residual; only arrangements with stress heads have
/// one.
pub fn constitutive_loss(
    config: &PinnConfig,
    params: &ParameterSet,
    points: &[[f64; 2]],
    stats: &TransformStats,
) -> Result<f64> {
    loss_values(config, params, points, stats, None)?
        .constitutive
        .ok_or_else(|| Error::invalid("this arrangement has no stress outputs"))
}

/// Componentwise mean squared strain mismatch.
pub fn data_loss(
    config: &PinnConfig,
    params: &ParameterSet,
    points: &[[f64; 2]],
    stats: &TransformStats,
    strain_ref: &Tensor2Field,
) -> Result<f64> {
    loss_values(config, params, points, stats, Some(strain_ref))?
        .data
        .ok_or_else(|| Error::invalid("no reference strains supplied"))
}

/// Which term to differentiate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossTerm {
    Pde,
    Constitutive,
    Data,
    Total,
}

/// Value and exact parameter gradient of one loss term.
pub fn loss_term_gradient(
    config: &PinnConfig,
    params: &ParameterSet,
    points: &[[f64; 2]],
    stats: &TransformStats,
    strain_ref: Option<&Tensor2Field>,
    term: LossTerm,
) -> Result<(f64, Vec<f64>)> {
    let lg = build_loss_graph(config, points, stats, strain_ref)?;
    let expr = match term {
        LossTerm::Pde => lg.pde.clone(),
        LossTerm::Constitutive => lg
            .constitutive
            .clone()
            .ok_or_else(|| Error::invalid("this arrangement has no stress outputs"))?,
        LossTerm::Data => lg
            .data
            .clone()
            .ok_or_else(|| Error::invalid("no reference strains supplied"))?,
        LossTerm::Total => lg.total.clone(),
    };
    lg.session.run(params, &expr)
}

/// One logged training step.
#[derive(Clone, Copy, Debug)]
pub struct TrainRecord {
    pub iteration: usize,
    pub l_pde: f64,
    pub l_const: f64,
    pub l_data: f64,
    pub total: f64,
    /// Elemental modulus error vs. ground truth, when supplied.
    pub e_l2_pct: Option<f64>,
}

/// Result of a training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ParameterSet,
    pub history: Vec<TrainRecord>,
    /// Domain-guard activations (clamped log arguments) seen during
    /// training; should be zero by convergence.
    pub clamp_events: u64,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    fn new(n: usize) -> Adam {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    fn step(&mut self, lr: f64, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

/// Average of a nodal field over each element's vertices.
pub fn nodal_to_elemental(mesh: &Mesh, nodal: &[f64]) -> Vec<f64> {
    mesh.elements
        .iter()
        .map(|e| (nodal[e[0]] + nodal[e[1]] + nodal[e[2]]) / 3.0)
        .collect()
}

/// Full-batch Adam on the weighted loss over the mesh nodes.
///
/// Deterministic for a fixed config. Aborts with a diagnostic snapshot if
/// the total loss leaves the finite range.
pub fn train(
    config: &PinnConfig,
    mesh: &Mesh,
    strain_ref: &Tensor2Field,
    stats: &TransformStats,
    truth_modulus: Option<&ModulusField>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if strain_ref.len() != mesh.node_count() {
        return Err(Error::invalid(
            "reference strains must cover every mesh node",
        ));
    }
    if let Some(t) = truth_modulus {
        if t.len() != mesh.element_count() {
            return Err(Error::invalid(
                "ground-truth modulus must cover every element",
            ));
        }
    }

    let spec = config.network_spec();
    let mut params = ParameterSet::init(&spec)?;
    let lg = build_loss_graph(config, &mesh.nodes, stats, Some(strain_ref))?;
    let mut adam = Adam::new(params.len());
    let mut history = Vec::new();

    for it in 0..config.iterations {
        let (total, grad) = lg.session.run(&params, &lg.total)?;
        let l_pde = lg.session.scalar_value(&lg.pde);
        let l_const = lg
            .constitutive
            .as_ref()
            .map(|c| lg.session.scalar_value(c))
            .unwrap_or(0.0);
        let l_data = lg
            .data
            .as_ref()
            .map(|d| lg.session.scalar_value(d))
            .unwrap_or(0.0);
        if !total.is_finite() {
            return Err(Error::TrainingAborted {
                iteration: it,
                l_pde,
                l_const,
                l_data,
            });
        }
        if it % config.log_stride == 0 || it + 1 == config.iterations {
            let e_l2_pct = truth_modulus.and_then(|t| {
                let e_nodes = lg.session.values(&lg.e_star);
                let e_elems = nodal_to_elemental(mesh, &e_nodes);
                l2_relative_error(&e_elems, &t.values).ok()
            });
            history.push(TrainRecord {
                iteration: it,
                l_pde,
                l_const,
                l_data,
                total,
                e_l2_pct,
            });
        }
        let lr = config.learning_rate * config.lr_decay.map_or(1.0, |d| d.powi(it as i32));
        adam.step(lr, &mut params.values, &grad);
    }

    Ok(TrainOutcome {
        params,
        history,
        clamp_events: lg.session.clamp_events(),
    })
}

/// Reference fields for error maps.
#[derive(Clone, Copy)]
pub struct GroundTruth<'a> {
    pub fem: &'a FemSolution,
    pub modulus: &'a ModulusField,
}

/// Scalar L2 relative errors (percent) of the predicted fields.
#[derive(Clone, Copy, Debug)]
pub struct FieldErrors {
    pub ux: f64,
    pub uy: f64,
    pub strain: f64,
    pub e: f64,
}

/// Predicted fields at the mesh nodes plus optional error maps.
#[derive(Clone, Debug)]
pub struct FieldReport {
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
    /// Nodal E*.
    pub e_nodes: Vec<f64>,
    /// Green-Lagrange strain of the transformed displacements.
    pub strain: Tensor2Field,
    /// Element-averaged E*, comparable against elemental ground truth.
    pub e_elements: Vec<f64>,
    pub abs_err_u: Option<Vec<[f64; 2]>>,
    pub abs_err_strain: Option<Tensor2Field>,
    pub abs_err_e: Option<Vec<f64>>,
    pub l2: Option<FieldErrors>,
}

/// Evaluates the transformed solution everywhere and, when ground truth is
/// supplied, pointwise absolute-error maps and scalar L2 errors.
pub fn evaluate_fields(
    config: &PinnConfig,
    params: &ParameterSet,
    mesh: &Mesh,
    stats: &TransformStats,
    truth: Option<GroundTruth<'_>>,
) -> Result<FieldReport> {
    config.validate()?;
    let spec = config.network_spec();
    let session = EvalSession::new(&spec, &mesh.nodes, DerivOrder::First)?;
    let hard = config.variant.hard_bc();
    let d = config.load.d;

    // build every transform node before running the graph
    let ux_jet = displacement_transform(
        &session.jet1(OutputId::Ux)?,
        &session.x_jet1(),
        d,
        stats.mean[0],
        stats.std[0],
        hard,
    );
    let uy_jet = displacement_transform(
        &session.jet1(OutputId::Uy)?,
        &session.y_jet1(),
        d,
        stats.mean[1],
        stats.std[1],
        hard,
    );
    session.eval(params)?;

    let ux = session.values(&ux_jet.v);
    let uy = session.values(&uy_jet.v);
    let ux_dx = session.values(&ux_jet.dx);
    let ux_dy = session.values(&ux_jet.dy);
    let uy_dx = session.values(&uy_jet.dx);
    let uy_dy = session.values(&uy_jet.dy);
    let e_raw = session.values(&session.jet1(OutputId::E)?.v);

    let n = mesh.node_count();
    let mut strain = Tensor2Field::zeros(n);
    let mut e_nodes = vec![0.0; n];
    for i in 0..n {
        let f = Mat2::new(1.0 + ux_dx[i], ux_dy[i], uy_dx[i], 1.0 + uy_dy[i]);
        let eps = green_lagrange(&f);
        strain.xx[i] = eps.0[0][0];
        strain.yy[i] = eps.0[1][1];
        strain.xy[i] = eps.0[0][1];
        e_nodes[i] = modulus_transform(e_raw[i]);
    }
    let e_elements = nodal_to_elemental(mesh, &e_nodes);

    let (abs_err_u, abs_err_strain, abs_err_e, l2) = match truth {
        Some(t) => {
            if t.fem.u.len() != n || t.fem.strain_nodes.len() != n {
                return Err(Error::invalid("ground-truth solution size mismatch"));
            }
            if t.modulus.len() != mesh.element_count() {
                return Err(Error::invalid("ground-truth modulus size mismatch"));
            }
            let err_u: Vec<[f64; 2]> = (0..n)
                .map(|i| {
                    [
                        (ux[i] - t.fem.u[i][0]).abs(),
                        (uy[i] - t.fem.u[i][1]).abs(),
                    ]
                })
                .collect();
            let mut err_s = Tensor2Field::zeros(n);
            for i in 0..n {
                err_s.xx[i] = (strain.xx[i] - t.fem.strain_nodes.xx[i]).abs();
                err_s.yy[i] = (strain.yy[i] - t.fem.strain_nodes.yy[i]).abs();
                err_s.xy[i] = (strain.xy[i] - t.fem.strain_nodes.xy[i]).abs();
            }
            let err_e: Vec<f64> = e_elements
                .iter()
                .zip(&t.modulus.values)
                .map(|(p, r)| (p - r).abs())
                .collect();
            let truth_ux: Vec<f64> = t.fem.u.iter().map(|r| r[0]).collect();
            let truth_uy: Vec<f64> = t.fem.u.iter().map(|r| r[1]).collect();
            let l2 = FieldErrors {
                ux: l2_relative_error(&ux, &truth_ux)?,
                uy: l2_relative_error(&uy, &truth_uy)?,
                strain: l2_relative_error(&strain.flatten(), &t.fem.strain_nodes.flatten())?,
                e: l2_relative_error(&e_elements, &t.modulus.values)?,
            };
            (Some(err_u), Some(err_s), Some(err_e), Some(l2))
        }
        None => (None, None, None, None),
    };

    Ok(FieldReport {
        ux,
        uy,
        e_nodes,
        strain,
        e_elements,
        abs_err_u,
        abs_err_strain,
        abs_err_e,
        l2,
    })
}
