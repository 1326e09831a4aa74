//! Optical primitives: the balanced beamsplitter, the phase shifter and the
//! two-parameter Mach-Zehnder interferometer built from them.
//!
//! The MZI used throughout is `BS * PS_top(theta) * BS * PS_top(phi)`: an
//! external phase `phi` on the top input followed by an internal phase `theta`
//! on the top arm between two balanced beamsplitters. Its transfer matrix is
//!
//! ```text
//! i e^{i theta/2} [[e^{i phi} sin(theta/2),  cos(theta/2)],
//!                  [e^{i phi} cos(theta/2), -sin(theta/2)]]
//! ```
//!
//! so `(theta, phi) = (0, 0)` is a swap (up to a global `i`) and
//! `(pi, pi)` is exactly the identity.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, UnitaryMatrix, ONE, ZERO};

pub type Mat2 = [[Complex64; 2]; 2];

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Angles of one MZI, in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MziParams {
    pub theta: f64,
    pub phi: f64,
}

impl MziParams {
    /// Setting whose transfer matrix is exactly the 2x2 identity.
    pub const IDENTITY: MziParams = MziParams { theta: PI, phi: PI };

    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    /// Both angles wrapped into `[0, 2pi)`.
    pub fn canonical(self) -> Self {
        Self {
            theta: wrap_angle(self.theta),
            phi: wrap_angle(self.phi),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.phi.is_finite()
    }

    pub fn transfer(&self) -> Mat2 {
        let (s, c) = (self.theta / 2.0).sin_cos();
        let g = I * Complex64::from_polar(1.0, self.theta / 2.0);
        let e = Complex64::from_polar(1.0, self.phi);
        [[g * e * s, g * c], [g * e * c, -g * s]]
    }
}

/// Wraps an angle into `[0, 2pi)`.
pub fn wrap_angle(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

pub fn mat2_adjoint(m: &Mat2) -> Mat2 {
    [
        [m[0][0].conj(), m[1][0].conj()],
        [m[0][1].conj(), m[1][1].conj()],
    ]
}

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

fn mat2_to_matrix(m: &Mat2) -> ComplexMatrix {
    ComplexMatrix::from_vec(2, 2, vec![m[0][0], m[0][1], m[1][0], m[1][1]])
        .expect("2x2 transfer matrices are finite")
}

/// The balanced beamsplitter `(1/sqrt 2) [[1, i], [i, 1]]`.
pub fn beamsplitter() -> Mat2 {
    let a = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let b = Complex64::new(0.0, FRAC_1_SQRT_2);
    [[a, b], [b, a]]
}

pub fn beamsplitter_matrix() -> UnitaryMatrix {
    UnitaryMatrix::new_unchecked(mat2_to_matrix(&beamsplitter()))
}

/// Phase shifter acting on the top mode of a pair.
pub fn phase_top(x: f64) -> Mat2 {
    [[Complex64::from_polar(1.0, x), ZERO], [ZERO, ONE]]
}

pub fn mzi_matrix(p: MziParams) -> UnitaryMatrix {
    UnitaryMatrix::new_unchecked(mat2_to_matrix(&p.transfer()))
}

/// Angles for which `MZI(theta, phi) * (a, b)^T = (a', 0)^T`.
///
/// `phi = arg(b) - arg(a)` (zero when either amplitude vanishes) and
/// `theta = 2 atan2(|a|, |b|)`. The first output component then has modulus
/// `sqrt(|a|^2 + |b|^2)`.
pub fn zeroing_angles(a: Complex64, b: Complex64) -> Result<MziParams> {
    if a == ZERO && b == ZERO {
        return Err(Error::DegenerateVector);
    }
    let phi = if a == ZERO || b == ZERO {
        0.0
    } else {
        b.arg() - a.arg()
    };
    let theta = 2.0 * a.norm().atan2(b.norm());
    Ok(MziParams::new(theta, phi).canonical())
}
