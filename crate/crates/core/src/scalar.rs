//! Scalar abstraction shared by the FE solver, the adjoint solver, and the
//! network losses.
//!
//! Constitutive formulas are written once, generic over [`Scalar`], and then
//! evaluated with:
//!
//! * `f64` for plain values,
//! * [`Dual`] for single-direction forward derivatives (element tangents,
//!   parameter sensitivities),
//! * [`Jet1`] for value plus both spatial partials carried through an
//!   arbitrary inner scalar (used to push second spatial derivatives of a
//!   network through a stress law),
//! * graph expressions (see `graph`) for reverse-mode training.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic scalar with the few nonlinearities the constitutive laws need.
///
/// Operations take operands by value; implementations are cheap to clone.
pub trait Scalar:
    Clone
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Constant `c` in the same evaluation context as `self` (same tape,
    /// same batch shape). Plain numbers ignore the receiver.
    fn lift(&self, c: f64) -> Self;

    /// Natural logarithm.
    fn ln(&self) -> Self;

    /// `max(self, lo)`; the derivative is zero wherever the bound is active.
    fn clamp_min(&self, lo: f64) -> Self;

    /// Indicator `self > lo` as 0/1, carrying no derivative.
    fn step_above(&self, lo: f64) -> Self;
}

impl Scalar for f64 {
    fn lift(&self, c: f64) -> f64 {
        c
    }

    fn ln(&self) -> f64 {
        f64::ln(*self)
    }

    fn clamp_min(&self, lo: f64) -> f64 {
        if *self > lo {
            *self
        } else {
            lo
        }
    }

    fn step_above(&self, lo: f64) -> f64 {
        if *self > lo {
            1.0
        } else {
            0.0
        }
    }
}

/// First-order dual number: value `v` and directional derivative `d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Dual {
    pub fn new(v: f64, d: f64) -> Self {
        Dual { v, d }
    }

    /// Value with zero derivative.
    pub fn constant(v: f64) -> Self {
        Dual { v, d: 0.0 }
    }

    /// Value with unit derivative (the seeded variable).
    pub fn seeded(v: f64) -> Self {
        Dual { v, d: 1.0 }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, r: Dual) -> Dual {
        Dual::new(self.v + r.v, self.d + r.d)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, r: Dual) -> Dual {
        Dual::new(self.v - r.v, self.d - r.d)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, r: Dual) -> Dual {
        Dual::new(self.v * r.v, self.d * r.v + self.v * r.d)
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, r: Dual) -> Dual {
        Dual::new(self.v / r.v, (self.d * r.v - self.v * r.d) / (r.v * r.v))
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.v, -self.d)
    }
}

impl Scalar for Dual {
    fn lift(&self, c: f64) -> Dual {
        Dual::constant(c)
    }

    fn ln(&self) -> Dual {
        Dual::new(self.v.ln(), self.d / self.v)
    }

    fn clamp_min(&self, lo: f64) -> Dual {
        if self.v > lo {
            *self
        } else {
            Dual::constant(lo)
        }
    }

    fn step_above(&self, lo: f64) -> Dual {
        Dual::constant(if self.v > lo { 1.0 } else { 0.0 })
    }
}

/// Value plus both spatial partials (d/dx, d/dy), each stored as an inner
/// scalar. With `S = f64` this is plain forward-mode in two directions; with
/// a graph expression as `S` the partials remain differentiable, which is how
/// third-order mixed derivatives (parameter gradient of a PDE residual built
/// from second spatial derivatives) are obtained.
#[derive(Clone, Debug)]
pub struct Jet1<S> {
    pub v: S,
    pub dx: S,
    pub dy: S,
}

impl<S: Scalar> Jet1<S> {
    pub fn new(v: S, dx: S, dy: S) -> Self {
        Jet1 { v, dx, dy }
    }

    /// Spatially constant value: both partials are zero.
    pub fn constant(v: S) -> Self {
        let z = v.lift(0.0);
        Jet1 {
            v,
            dx: z.clone(),
            dy: z,
        }
    }
}

impl<S: Scalar> Add for Jet1<S> {
    type Output = Jet1<S>;
    fn add(self, r: Jet1<S>) -> Jet1<S> {
        Jet1::new(self.v + r.v, self.dx + r.dx, self.dy + r.dy)
    }
}

impl<S: Scalar> Sub for Jet1<S> {
    type Output = Jet1<S>;
    fn sub(self, r: Jet1<S>) -> Jet1<S> {
        Jet1::new(self.v - r.v, self.dx - r.dx, self.dy - r.dy)
    }
}

impl<S: Scalar> Mul for Jet1<S> {
    type Output = Jet1<S>;
    fn mul(self, r: Jet1<S>) -> Jet1<S> {
        let v = self.v.clone() * r.v.clone();
        let dx = self.dx * r.v.clone() + self.v.clone() * r.dx;
        let dy = self.dy * r.v + self.v * r.dy;
        Jet1::new(v, dx, dy)
    }
}

impl<S: Scalar> Div for Jet1<S> {
    type Output = Jet1<S>;
    fn div(self, r: Jet1<S>) -> Jet1<S> {
        let den = r.v.clone() * r.v.clone();
        let v = self.v.clone() / r.v.clone();
        let dx = (self.dx * r.v.clone() - self.v.clone() * r.dx) / den.clone();
        let dy = (self.dy * r.v - self.v * r.dy) / den;
        Jet1::new(v, dx, dy)
    }
}

impl<S: Scalar> Neg for Jet1<S> {
    type Output = Jet1<S>;
    fn neg(self) -> Jet1<S> {
        Jet1::new(-self.v, -self.dx, -self.dy)
    }
}

impl<S: Scalar> Scalar for Jet1<S> {
    fn lift(&self, c: f64) -> Jet1<S> {
        Jet1::constant(self.v.lift(c))
    }

    fn ln(&self) -> Jet1<S> {
        Jet1::new(
            self.v.ln(),
            self.dx.clone() / self.v.clone(),
            self.dy.clone() / self.v.clone(),
        )
    }

    fn clamp_min(&self, lo: f64) -> Jet1<S> {
        let m = self.v.step_above(lo);
        Jet1::new(
            self.v.clamp_min(lo),
            self.dx.clone() * m.clone(),
            self.dy.clone() * m,
        )
    }

    fn step_above(&self, lo: f64) -> Jet1<S> {
        Jet1::constant(self.v.step_above(lo))
    }
}

/// Value plus first and second spatial partials. Same role as [`Jet1`] one
/// order deeper: with a graph expression as `S`, a PDE residual built from
/// the second partials stays differentiable w.r.t. parameters.
#[derive(Clone, Debug)]
pub struct Jet2<S> {
    pub v: S,
    pub dx: S,
    pub dy: S,
    pub dxx: S,
    pub dxy: S,
    pub dyy: S,
}

impl<S: Scalar> Jet2<S> {
    pub fn new(v: S, dx: S, dy: S, dxx: S, dxy: S, dyy: S) -> Self {
        Jet2 {
            v,
            dx,
            dy,
            dxx,
            dxy,
            dyy,
        }
    }

    pub fn constant(v: S) -> Self {
        let z = v.lift(0.0);
        Jet2 {
            v,
            dx: z.clone(),
            dy: z.clone(),
            dxx: z.clone(),
            dxy: z.clone(),
            dyy: z,
        }
    }

    /// Drops the second-order channels.
    pub fn first_order(&self) -> Jet1<S> {
        Jet1::new(self.v.clone(), self.dx.clone(), self.dy.clone())
    }

    /// Jet of the x-partial: value dx, partials (dxx, dxy). Lets a first
    /// spatial derivative feed code written over [`Jet1`].
    pub fn dx_jet(&self) -> Jet1<S> {
        Jet1::new(self.dx.clone(), self.dxx.clone(), self.dxy.clone())
    }

    /// Jet of the y-partial: value dy, partials (dxy, dyy).
    pub fn dy_jet(&self) -> Jet1<S> {
        Jet1::new(self.dy.clone(), self.dxy.clone(), self.dyy.clone())
    }
}

impl<S: Scalar> Add for Jet2<S> {
    type Output = Jet2<S>;
    fn add(self, r: Jet2<S>) -> Jet2<S> {
        Jet2::new(
            self.v + r.v,
            self.dx + r.dx,
            self.dy + r.dy,
            self.dxx + r.dxx,
            self.dxy + r.dxy,
            self.dyy + r.dyy,
        )
    }
}

impl<S: Scalar> Sub for Jet2<S> {
    type Output = Jet2<S>;
    fn sub(self, r: Jet2<S>) -> Jet2<S> {
        Jet2::new(
            self.v - r.v,
            self.dx - r.dx,
            self.dy - r.dy,
            self.dxx - r.dxx,
            self.dxy - r.dxy,
            self.dyy - r.dyy,
        )
    }
}

impl<S: Scalar> Mul for Jet2<S> {
    type Output = Jet2<S>;
    fn mul(self, r: Jet2<S>) -> Jet2<S> {
        let v = self.v.clone() * r.v.clone();
        let dx = self.dx.clone() * r.v.clone() + self.v.clone() * r.dx.clone();
        let dy = self.dy.clone() * r.v.clone() + self.v.clone() * r.dy.clone();
        let two = self.v.lift(2.0);
        let dxx = self.dxx * r.v.clone()
            + two.clone() * self.dx.clone() * r.dx.clone()
            + self.v.clone() * r.dxx;
        let dxy = self.dxy * r.v.clone()
            + self.dx * r.dy.clone()
            + self.dy.clone() * r.dx
            + self.v.clone() * r.dxy;
        let dyy = self.dyy * r.v + two * self.dy * r.dy + self.v * r.dyy;
        Jet2::new(v, dx, dy, dxx, dxy, dyy)
    }
}

impl<S: Scalar> Div for Jet2<S> {
    type Output = Jet2<S>;
    fn div(self, r: Jet2<S>) -> Jet2<S> {
        // q = f/g: solve f = q g order by order
        let q = self.v.clone() / r.v.clone();
        let qdx = (self.dx - q.clone() * r.dx.clone()) / r.v.clone();
        let qdy = (self.dy - q.clone() * r.dy.clone()) / r.v.clone();
        let two = q.lift(2.0);
        let qdxx = (self.dxx - two.clone() * qdx.clone() * r.dx.clone() - q.clone() * r.dxx)
            / r.v.clone();
        let qdxy = (self.dxy
            - qdx.clone() * r.dy.clone()
            - qdy.clone() * r.dx
            - q.clone() * r.dxy)
            / r.v.clone();
        let qdyy = (self.dyy - two * qdy.clone() * r.dy - q.clone() * r.dyy) / r.v;
        Jet2::new(q, qdx, qdy, qdxx, qdxy, qdyy)
    }
}

impl<S: Scalar> Neg for Jet2<S> {
    type Output = Jet2<S>;
    fn neg(self) -> Jet2<S> {
        Jet2::new(-self.v, -self.dx, -self.dy, -self.dxx, -self.dxy, -self.dyy)
    }
}

impl<S: Scalar> Scalar for Jet2<S> {
    fn lift(&self, c: f64) -> Jet2<S> {
        Jet2::constant(self.v.lift(c))
    }

    fn ln(&self) -> Jet2<S> {
        // u = ln f: u' = f'/f, u'' = (f'' - u' f') / f
        let udx = self.dx.clone() / self.v.clone();
        let udy = self.dy.clone() / self.v.clone();
        let udxx = (self.dxx.clone() - udx.clone() * self.dx.clone()) / self.v.clone();
        let udxy = (self.dxy.clone() - udx.clone() * self.dy.clone()) / self.v.clone();
        let udyy = (self.dyy.clone() - udy.clone() * self.dy.clone()) / self.v.clone();
        Jet2::new(self.v.ln(), udx, udy, udxx, udxy, udyy)
    }

    fn clamp_min(&self, lo: f64) -> Jet2<S> {
        let m = self.v.step_above(lo);
        Jet2::new(
            self.v.clamp_min(lo),
            self.dx.clone() * m.clone(),
            self.dy.clone() * m.clone(),
            self.dxx.clone() * m.clone(),
            self.dxy.clone() * m.clone(),
            self.dyy.clone() * m,
        )
    }

    fn step_above(&self, lo: f64) -> Jet2<S> {
        Jet2::constant(self.v.step_above(lo))
    }
}

/// 2x2 tensor over any [`Scalar`]; row-major entries `m.0[row][col]`.
#[derive(Clone, Debug)]
pub struct Mat2<S>(pub [[S; 2]; 2]);

impl<S: Scalar> Mat2<S> {
    pub fn new(a00: S, a01: S, a10: S, a11: S) -> Self {
        Mat2([[a00, a01], [a10, a11]])
    }

    /// Identity in the evaluation context of `donor`.
    pub fn identity_like(donor: &S) -> Self {
        Mat2::new(donor.lift(1.0), donor.lift(0.0), donor.lift(0.0), donor.lift(1.0))
    }

    pub fn det(&self) -> S {
        self.0[0][0].clone() * self.0[1][1].clone() - self.0[0][1].clone() * self.0[1][0].clone()
    }

    pub fn trace(&self) -> S {
        self.0[0][0].clone() + self.0[1][1].clone()
    }

    pub fn transpose(&self) -> Self {
        Mat2::new(
            self.0[0][0].clone(),
            self.0[1][0].clone(),
            self.0[0][1].clone(),
            self.0[1][1].clone(),
        )
    }

    pub fn matmul(&self, r: &Self) -> Self {
        let a = &self.0;
        let b = &r.0;
        Mat2::new(
            a[0][0].clone() * b[0][0].clone() + a[0][1].clone() * b[1][0].clone(),
            a[0][0].clone() * b[0][1].clone() + a[0][1].clone() * b[1][1].clone(),
            a[1][0].clone() * b[0][0].clone() + a[1][1].clone() * b[1][0].clone(),
            a[1][0].clone() * b[0][1].clone() + a[1][1].clone() * b[1][1].clone(),
        )
    }

    pub fn scale(&self, s: &S) -> Self {
        Mat2::new(
            self.0[0][0].clone() * s.clone(),
            self.0[0][1].clone() * s.clone(),
            self.0[1][0].clone() * s.clone(),
            self.0[1][1].clone() * s.clone(),
        )
    }

    pub fn add(&self, r: &Self) -> Self {
        Mat2::new(
            self.0[0][0].clone() + r.0[0][0].clone(),
            self.0[0][1].clone() + r.0[0][1].clone(),
            self.0[1][0].clone() + r.0[1][0].clone(),
            self.0[1][1].clone() + r.0[1][1].clone(),
        )
    }

    pub fn sub(&self, r: &Self) -> Self {
        Mat2::new(
            self.0[0][0].clone() - r.0[0][0].clone(),
            self.0[0][1].clone() - r.0[0][1].clone(),
            self.0[1][0].clone() - r.0[1][0].clone(),
            self.0[1][1].clone() - r.0[1][1].clone(),
        )
    }

    /// Inverse transpose `(M^{-1})^T`, written out for 2x2.
    pub fn inv_transpose(&self) -> Self {
        let det = self.det();
        Mat2::new(
            self.0[1][1].clone() / det.clone(),
            -(self.0[1][0].clone() / det.clone()),
            -(self.0[0][1].clone() / det.clone()),
            self.0[0][0].clone() / det,
        )
    }
}

impl Mat2<f64> {
    pub fn from_f64(a: [[f64; 2]; 2]) -> Self {
        Mat2(a)
    }

    /// Entry-wise map into another scalar context.
    pub fn map_into<S: Scalar>(&self, f: impl Fn(f64) -> S) -> Mat2<S> {
        Mat2::new(
            f(self.0[0][0]),
            f(self.0[0][1]),
            f(self.0[1][0]),
            f(self.0[1][1]),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    // f(x) = ln(x^2 + 1) * x / (x + 2), analytic derivative for comparison.
    fn sample_fn<S: Scalar>(x: S) -> S {
        let one = x.lift(1.0);
        let two = x.lift(2.0);
        (x.clone() * x.clone() + one).ln() * x.clone() / (x + two)
    }

    #[test]
    fn dual_matches_finite_differences() {
        let x0 = 0.7;
        let h = 1e-6;
        let fd = (sample_fn(x0 + h) - sample_fn(x0 - h)) / (2.0 * h);
        let d = sample_fn(Dual::seeded(x0));
        assert!(close(d.v, sample_fn(x0), 1e-14));
        assert!(close(d.d, fd, 1e-8), "dual {} vs fd {}", d.d, fd);
    }

    #[test]
    fn dual_clamp_kills_derivative_below_bound() {
        let x = Dual::seeded(0.5);
        let c = x.clamp_min(0.9);
        assert_eq!(c.v, 0.9);
        assert_eq!(c.d, 0.0);
        let free = x.clamp_min(0.1);
        assert_eq!(free.v, 0.5);
        assert_eq!(free.d, 1.0);
    }

    // g(x, y) = ln(x^2 + y^2 + 1) * x / y with hand-written partials.
    fn g<S: Scalar>(x: S, y: S) -> S {
        let one = x.lift(1.0);
        (x.clone() * x.clone() + y.clone() * y.clone() + one).ln() * x / y
    }

    #[test]
    fn jet_partials_match_analytic() {
        let (x0, y0) = (0.8, 1.3);
        let x = Jet1::new(x0, 1.0, 0.0);
        let y = Jet1::new(y0, 0.0, 1.0);
        let r = g(x, y);

        let s = x0 * x0 + y0 * y0 + 1.0;
        let gx = (2.0 * x0 * x0 / s + s.ln()) / y0;
        let gy = 2.0 * x0 / s - s.ln() * x0 / (y0 * y0);
        assert!(close(r.v, s.ln() * x0 / y0, 1e-14));
        assert!(close(r.dx, gx, 1e-12), "dx {} vs {}", r.dx, gx);
        assert!(close(r.dy, gy, 1e-12), "dy {} vs {}", r.dy, gy);
    }

    #[test]
    fn jet_over_dual_gives_mixed_second_derivatives() {
        // d/dx of the x-partial of g equals the (x,x) second derivative;
        // seed the inner dual on x to differentiate the outer jet once more.
        let (x0, y0) = (0.8, 1.3);
        let x = Jet1::new(Dual::seeded(x0), Dual::constant(1.0), Dual::constant(0.0));
        let y = Jet1::new(Dual::constant(y0), Dual::constant(0.0), Dual::constant(1.0));
        let r = g(x, y);

        let h = 1e-5;
        let gx = |x: f64| {
            let s = x * x + y0 * y0 + 1.0;
            (2.0 * x * x / s + s.ln()) / y0
        };
        let gxx = (gx(x0 + h) - gx(x0 - h)) / (2.0 * h);
        assert!(close(r.dx.d, gxx, 1e-9), "dxx {} vs fd {}", r.dx.d, gxx);
    }

    #[test]
    fn mat2_inverse_transpose() {
        let m = Mat2::from_f64([[1.2, 0.3], [-0.4, 0.9]]);
        let it = m.inv_transpose();
        // M^T * (M^{-1})^T = (M^{-1} M)^T = I
        let p = m.transpose().matmul(&it);
        assert!(close(p.0[0][0], 1.0, 1e-14));
        assert!(close(p.0[1][1], 1.0, 1e-14));
        assert!(p.0[0][1].abs() < 1e-14);
        assert!(p.0[1][0].abs() < 1e-14);
    }

    #[test]
    fn jet_clamp_masks_partials() {
        let x = Jet1::new(0.5_f64, 2.0, 3.0);
        let c = x.clamp_min(0.9);
        assert_eq!((c.v, c.dx, c.dy), (0.9, 0.0, 0.0));
        let f = Jet1::new(0.5_f64, 2.0, 3.0).clamp_min(0.1);
        assert_eq!((f.v, f.dx, f.dy), (0.5, 2.0, 3.0));
    }

    /// Second-order jet arithmetic against analytic derivatives of
    /// f(x,y) = (x^2 y + ln(x + 2)) / (y + 3).
    #[test]
    fn jet2_matches_analytic_second_partials() {
        let (x0, y0) = (0.7_f64, -0.4_f64);
        let x = Jet2::new(x0, 1.0, 0.0, 0.0, 0.0, 0.0);
        let y = Jet2::new(y0, 0.0, 1.0, 0.0, 0.0, 0.0);
        let num = x.clone() * x.clone() * y.clone() + (x.clone() + x.lift(2.0)).ln();
        let den = y.clone() + y.lift(3.0);
        let f = num / den;

        let d = y0 + 3.0;
        let fv = (x0 * x0 * y0 + (x0 + 2.0).ln()) / d;
        let fx = (2.0 * x0 * y0 + 1.0 / (x0 + 2.0)) / d;
        let fy = (x0 * x0 * d - (x0 * x0 * y0 + (x0 + 2.0).ln())) / (d * d);
        let fxx = (2.0 * y0 - 1.0 / ((x0 + 2.0) * (x0 + 2.0))) / d;
        let fxy = (2.0 * x0 * d - (2.0 * x0 * y0 + 1.0 / (x0 + 2.0))) / (d * d);
        let fyy = (-2.0 * x0 * x0 * d + 2.0 * (x0 * x0 * y0 + (x0 + 2.0).ln())) / (d * d * d);

        for (got, want, name) in [
            (f.v, fv, "v"),
            (f.dx, fx, "dx"),
            (f.dy, fy, "dy"),
            (f.dxx, fxx, "dxx"),
            (f.dxy, fxy, "dxy"),
            (f.dyy, fyy, "dyy"),
        ] {
            assert!(close(got, want, 1e-12), "{name}: {got} vs {want}");
        }
    }

    #[test]
    fn jet2_projections_are_consistent() {
        let x = Jet2::new(0.3_f64, 1.0, 0.0, 0.0, 0.0, 0.0);
        let f = x.clone() * x.clone() * x.clone(); // x^3
        let first = f.first_order();
        assert!(close(first.v, 0.027, 1e-15));
        assert!(close(first.dx, 3.0 * 0.09, 1e-12));
        let dxj = f.dx_jet(); // d/dx x^3 = 3x^2 as a first-order jet
        assert!(close(dxj.v, 0.27, 1e-12));
        assert!(close(dxj.dx, 6.0 * 0.3, 1e-12));
        assert!(close(dxj.dy, 0.0, 1e-15));
    }
}
