//! Fixed-size 2×2 complex matrices.
//!
//! Everything in the simulator lives in a two-dimensional Hilbert space, so a
//! plain `[[Complex64; 2]; 2]` beats any general-purpose matrix type in the
//! Monte-Carlo inner loop.

use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub const fn zero() -> Self {
        Mat2([[ZERO, ZERO], [ZERO, ZERO]])
    }

    pub const fn identity() -> Self {
        Mat2([[ONE, ZERO], [ZERO, ONE]])
    }

    pub const fn sigma_x() -> Self {
        Mat2([[ZERO, ONE], [ONE, ZERO]])
    }

    pub const fn sigma_y() -> Self {
        Mat2([[ZERO, C64::new(0.0, -1.0)], [I, ZERO]])
    }

    pub const fn sigma_z() -> Self {
        Mat2([[ONE, ZERO], [ZERO, C64::new(-1.0, 0.0)]])
    }

    /// `c0·I + cx·σx + cy·σy + cz·σz` for real coefficients.
    pub fn from_pauli(c0: f64, cx: f64, cy: f64, cz: f64) -> Self {
        Mat2([
            [C64::new(c0 + cz, 0.0), C64::new(cx, -cy)],
            [C64::new(cx, cy), C64::new(c0 - cz, 0.0)],
        ])
    }

    /// Real Pauli coefficients `(c0, cx, cy, cz)` of a Hermitian matrix.
    pub fn pauli_coefficients(&self) -> (f64, f64, f64, f64) {
        let m = &self.0;
        let c0 = 0.5 * (m[0][0].re + m[1][1].re);
        let cz = 0.5 * (m[0][0].re - m[1][1].re);
        let cx = 0.5 * (m[0][1].re + m[1][0].re);
        let cy = 0.5 * (m[1][0].im - m[0][1].im);
        (c0, cx, cy, cz)
    }

    /// `exp(-i (a·σ) t)` in closed form: `cos(|a|t) I − i sin(|a|t) (â·σ)`.
    #[inline]
    pub fn su2_exp(ax: f64, ay: f64, az: f64, t: f64) -> Self {
        let norm = (ax * ax + ay * ay + az * az).sqrt();
        let theta = norm * t;
        if theta == 0.0 {
            return Mat2::identity();
        }
        let (s, c) = theta.sin_cos();
        let k = s / norm;
        let (x, y, z) = (k * ax, k * ay, k * az);
        Mat2([
            [C64::new(c, -z), C64::new(-y, -x)],
            [C64::new(y, -x), C64::new(c, z)],
        ])
    }

    /// `diag(e^{-iφ/2}, e^{+iφ/2})`, the free-evolution propagator for an
    /// accumulated phase `φ = ∫δ dt`.
    #[inline]
    pub fn z_phase(phi: f64) -> Self {
        let (s, c) = (0.5 * phi).sin_cos();
        Mat2([[C64::new(c, -s), ZERO], [ZERO, C64::new(c, s)]])
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Mat2([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn scale(&self, k: C64) -> Self {
        let m = &self.0;
        Mat2([[m[0][0] * k, m[0][1] * k], [m[1][0] * k, m[1][1] * k]])
    }

    pub fn scale_re(&self, k: f64) -> Self {
        self.scale(C64::new(k, 0.0))
    }

    /// Largest elementwise modulus.
    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Largest elementwise distance to `other`.
    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        (*self - *other).max_abs()
    }

    /// `‖U†U − I‖` measured elementwise.
    pub fn unitarity_error(&self) -> f64 {
        (self.adjoint() * *self - Mat2::identity()).max_abs()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (*self - self.adjoint()).max_abs()
    }

    /// Eigenvalues of a Hermitian matrix in ascending order.
    pub fn hermitian_eigenvalues(&self) -> (f64, f64) {
        let m = &self.0;
        let a = m[0][0].re;
        let d = m[1][1].re;
        let b = 0.5 * (m[0][1] + m[1][0].conj());
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        (mean - radius, mean + radius)
    }

    /// `U ρ U†`.
    #[inline]
    pub fn conjugate(&self, u: &Mat2) -> Mat2 {
        *u * *self * u.adjoint()
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    #[inline]
    fn mul(self, rhs: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

impl Add for Mat2 {
    type Output = Mat2;

    fn add(self, rhs: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;

    fn sub(self, rhs: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        Mat2([
            [a[0][0] - b[0][0], a[0][1] - b[0][1]],
            [a[1][0] - b[1][0], a[1][1] - b[1][1]],
        ])
    }
}
