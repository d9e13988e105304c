//! Hyperelastic constitutive laws: strain energy, first Piola-Kirchhoff
//! stress, Lamé reductions, and kinematic tensors.
//!
//! One generic implementation serves the FE data generator (plain and dual
//! scalars), the adjoint solver, and the network losses (graph expressions),
//! so the inverse problem is self-consistent by construction.
//!
//! The spatial parameter `theta` is E for Neo-Hookean, mu1 for
//! Mooney-Rivlin, and mu for Gent. nu, mu2, and Jm are fixed known
//! constants. The incompressible models use their 2D displayed forms with no
//! pressure term; Mooney-Rivlin and Gent therefore carry a nonzero stress at
//! F = identity, and the Mooney-Rivlin energy is -mu2/2 there (I2 = 1 in
//! 2D).

use crate::scalar::{Mat2, Scalar};
use crate::{Error, Result};

/// Floor for logarithm arguments (det F, Gent denominator). Batched
/// evaluations cannot reject inadmissible points, so values below the floor
/// are clamped with zero derivative; callers count clamp activations.
pub const DOMAIN_FLOOR: f64 = 1e-8;

/// Default Mooney-Rivlin second constant (mu2 much smaller than mu1).
pub const DEFAULT_MU2: f64 = 0.2;
/// Default Gent stiffening limit; keeps I1 - 2 < Jm at 40% stretch.
pub const DEFAULT_JM: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlaneMode {
    PlaneStrain,
    PlaneStress,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaterialKind {
    NeoHookeanPlaneStrain,
    NeoHookeanPlaneStress,
    MooneyRivlin,
    Gent,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialModel {
    kind: MaterialKind,
    nu: f64,
    mu2: f64,
    jm: f64,
}

impl MaterialModel {
    pub fn neo_hookean(nu: f64, mode: PlaneMode) -> Result<Self> {
        lame_parameters(1.0, nu, mode)?;
        let kind = match mode {
            PlaneMode::PlaneStrain => MaterialKind::NeoHookeanPlaneStrain,
            PlaneMode::PlaneStress => MaterialKind::NeoHookeanPlaneStress,
        };
        Ok(MaterialModel {
            kind,
            nu,
            mu2: DEFAULT_MU2,
            jm: DEFAULT_JM,
        })
    }

    pub fn mooney_rivlin(mu2: f64) -> Result<Self> {
        if mu2 < 0.0 {
            return Err(Error::invalid(format!("mu2 = {mu2} must be >= 0")));
        }
        Ok(MaterialModel {
            kind: MaterialKind::MooneyRivlin,
            nu: 0.3,
            mu2,
            jm: DEFAULT_JM,
        })
    }

    pub fn gent(jm: f64) -> Result<Self> {
        if !(jm > 0.0) {
            return Err(Error::invalid(format!("Jm = {jm} must be > 0")));
        }
        Ok(MaterialModel {
            kind: MaterialKind::Gent,
            nu: 0.3,
            mu2: DEFAULT_MU2,
            jm,
        })
    }

    pub fn from_kind(kind: MaterialKind, nu: f64, mu2: f64, jm: f64) -> Result<Self> {
        match kind {
            MaterialKind::NeoHookeanPlaneStrain => {
                let mut m = Self::neo_hookean(nu, PlaneMode::PlaneStrain)?;
                m.mu2 = mu2;
                m.jm = jm;
                Ok(m)
            }
            MaterialKind::NeoHookeanPlaneStress => {
                let mut m = Self::neo_hookean(nu, PlaneMode::PlaneStress)?;
                m.mu2 = mu2;
                m.jm = jm;
                Ok(m)
            }
            MaterialKind::MooneyRivlin => {
                let mut m = Self::mooney_rivlin(mu2)?;
                m.nu = nu;
                m.jm = jm;
                Ok(m)
            }
            MaterialKind::Gent => {
                let mut m = Self::gent(jm)?;
                m.nu = nu;
                m.mu2 = mu2;
                Ok(m)
            }
        }
    }

    pub fn kind(&self) -> MaterialKind {
        self.kind
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn mu2(&self) -> f64 {
        self.mu2
    }

    pub fn jm(&self) -> f64 {
        self.jm
    }

    /// Lamé pair at unit modulus; both parameters scale linearly in theta.
    fn lame_unit(&self) -> (f64, f64) {
        let mode = match self.kind {
            MaterialKind::NeoHookeanPlaneStrain => PlaneMode::PlaneStrain,
            MaterialKind::NeoHookeanPlaneStress => PlaneMode::PlaneStress,
            _ => unreachable!("Lamé parameters only apply to Neo-Hookean"),
        };
        lame_parameters(1.0, self.nu, mode).expect("nu validated at construction")
    }
}

/// Deformation state derived from F.
#[derive(Clone, Debug)]
pub struct Kinematics<S> {
    pub f: Mat2<S>,
    /// det F
    pub j: S,
    /// right Cauchy-Green tensor F^T F
    pub c: Mat2<S>,
    /// trace C
    pub i1: S,
    /// (I1^2 - trace(C C)) / 2
    pub i2: S,
}

impl<S: Scalar> Kinematics<S> {
    pub fn new(f: Mat2<S>) -> Self {
        let j = f.det();
        let c = f.transpose().matmul(&f);
        let i1 = c.trace();
        let cc = c.matmul(&c);
        let i2 = j.lift(0.5) * (i1.clone() * i1.clone() - cc.trace());
        Kinematics { f, j, c, i1, i2 }
    }
}

/// (lambda, mu) from Young's modulus and Poisson's ratio.
/// Plane stress replaces lambda by 2·lambda·mu/(lambda + 2·mu).
pub fn lame_parameters(e: f64, nu: f64, mode: PlaneMode) -> Result<(f64, f64)> {
    if !(e > 0.0) {
        return Err(Error::invalid(format!("modulus E = {e} must be > 0")));
    }
    if !(0.0..0.5).contains(&nu) {
        return Err(Error::invalid(format!("nu = {nu} outside [0, 0.5)")));
    }
    let mu = e / (2.0 * (1.0 + nu));
    let lam = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    Ok(match mode {
        PlaneMode::PlaneStrain => (lam, mu),
        PlaneMode::PlaneStress => (2.0 * lam * mu / (lam + 2.0 * mu), mu),
    })
}

/// Rejects states outside the model's domain: J <= 0, Gent lock-up.
pub fn check_admissible(model: &MaterialModel, kin: &Kinematics<f64>) -> Result<()> {
    if !(kin.j > 0.0) {
        return Err(Error::Domain(format!(
            "det F = {:.6e} is not positive",
            kin.j
        )));
    }
    if model.kind == MaterialKind::Gent && kin.i1 - 2.0 >= model.jm {
        return Err(Error::Domain(format!(
            "Gent lock-up: I1 - 2 = {:.6} >= Jm = {}",
            kin.i1 - 2.0,
            model.jm
        )));
    }
    Ok(())
}

/// Strain energy density; no admissibility checks (see [`DOMAIN_FLOOR`]).
pub fn strain_energy_unchecked<S: Scalar>(
    model: &MaterialModel,
    kin: &Kinematics<S>,
    theta: &S,
) -> S {
    let two = theta.lift(2.0);
    let half = theta.lift(0.5);
    match model.kind {
        MaterialKind::NeoHookeanPlaneStrain | MaterialKind::NeoHookeanPlaneStress => {
            let (cl, cm) = model.lame_unit();
            let lam = theta.clone() * theta.lift(cl);
            let mu = theta.clone() * theta.lift(cm);
            let lnj = kin.j.clamp_min(DOMAIN_FLOOR).ln();
            half.clone() * lam * lnj.clone() * lnj.clone() - mu.clone() * lnj
                + half * mu * (kin.i1.clone() - two)
        }
        MaterialKind::MooneyRivlin => {
            half.clone() * theta.clone() * (kin.i1.clone() - two.clone())
                + half * theta.lift(model.mu2) * (kin.i2.clone() - two)
        }
        MaterialKind::Gent => {
            let arg = (theta.lift(1.0) - (kin.i1.clone() - two) / theta.lift(model.jm))
                .clamp_min(DOMAIN_FLOOR);
            -(theta.clone() * theta.lift(0.5 * model.jm) * arg.ln())
        }
    }
}

/// First Piola-Kirchhoff stress; no admissibility checks.
///
/// Neo-Hookean: P = mu F + (lambda ln J - mu) F^{-T}.
/// Mooney-Rivlin: P = mu1 F + mu2 (I1 F - F C).
/// Gent: P = mu Jm/(Jm - (I1 - 2)) F, the exact derivative of its energy.
pub fn first_pk_stress_unchecked<S: Scalar>(
    model: &MaterialModel,
    kin: &Kinematics<S>,
    theta: &S,
) -> Mat2<S> {
    match model.kind {
        MaterialKind::NeoHookeanPlaneStrain | MaterialKind::NeoHookeanPlaneStress => {
            let (cl, cm) = model.lame_unit();
            let lam = theta.clone() * theta.lift(cl);
            let mu = theta.clone() * theta.lift(cm);
            let lnj = kin.j.clamp_min(DOMAIN_FLOOR).ln();
            let coef = lam * lnj - mu.clone();
            kin.f.scale(&mu).add(&kin.f.inv_transpose().scale(&coef))
        }
        MaterialKind::MooneyRivlin => {
            let fc = kin.f.matmul(&kin.c);
            let dev = kin.f.scale(&kin.i1).sub(&fc).scale(&theta.lift(model.mu2));
            kin.f.scale(theta).add(&dev)
        }
        MaterialKind::Gent => {
            let two = theta.lift(2.0);
            let arg = (theta.lift(1.0) - (kin.i1.clone() - two) / theta.lift(model.jm))
                .clamp_min(DOMAIN_FLOOR);
            kin.f.scale(&(theta.clone() / arg))
        }
    }
}

/// Strain energy with domain validation.
pub fn strain_energy(model: &MaterialModel, kin: &Kinematics<f64>, theta: f64) -> Result<f64> {
    check_admissible(model, kin)?;
    Ok(strain_energy_unchecked(model, kin, &theta))
}

/// First Piola-Kirchhoff stress with domain validation.
pub fn first_pk_stress(
    model: &MaterialModel,
    kin: &Kinematics<f64>,
    theta: f64,
) -> Result<Mat2<f64>> {
    check_admissible(model, kin)?;
    Ok(first_pk_stress_unchecked(model, kin, &theta))
}

/// Green-Lagrange strain (F^T F - I)/2; off-diagonal entries are one shared
/// value, so the output is symmetric bitwise.
pub fn green_lagrange<S: Scalar>(f: &Mat2<S>) -> Mat2<S> {
    let c = f.transpose().matmul(f);
    let half = c.0[0][0].lift(0.5);
    let one = c.0[0][0].lift(1.0);
    let e00 = half.clone() * (c.0[0][0].clone() - one.clone());
    let e11 = half.clone() * (c.0[1][1].clone() - one);
    let e01 = half * c.0[0][1].clone();
    Mat2::new(e00, e01.clone(), e01, e11)
}
