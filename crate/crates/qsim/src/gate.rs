//! Single-qubit operators: the Pauli group and the auxiliary `T` operator
//! used by the improved quantum one-time pad.

use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Dense 2×2 complex matrix acting on one qubit, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Matrix2(pub [[Complex64; 2]; 2]);

impl Matrix2 {
    pub const fn new(m: [[Complex64; 2]; 2]) -> Self {
        Self(m)
    }

    pub fn identity() -> Self {
        Self([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Self([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let m = &self.0;
        Self([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }

    /// Entry-wise comparison.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .all(|(a, b)| (a - b).norm() <= tol)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        (self.adjoint() * *self).approx_eq(&Self::identity(), tol)
    }

    /// `true` when `self = e^{iθ} other` for some θ. Both must be unitary.
    pub fn equal_up_to_phase(&self, other: &Self, tol: f64) -> bool {
        let overlap = (self.adjoint() * *other).trace().norm() / 2.0;
        overlap >= 1.0 - tol
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }
}

impl Mul for Matrix2 {
    type Output = Matrix2;

    fn mul(self, rhs: Matrix2) -> Matrix2 {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [[ZERO; 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        Matrix2(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> Matrix2 {
        match self {
            Pauli::I => Matrix2::identity(),
            Pauli::X => Matrix2([[ZERO, ONE], [ONE, ZERO]]),
            Pauli::Y => Matrix2([[ZERO, -I], [I, ZERO]]),
            Pauli::Z => Matrix2([[ONE, ZERO], [ZERO, -ONE]]),
        }
    }

    /// Product of two Paulis with the global phase dropped.
    pub fn compose(self, other: Pauli) -> Pauli {
        use Pauli::*;
        match (self, other) {
            (I, p) | (p, I) => p,
            (a, b) if a == b => I,
            (X, Y) | (Y, X) => Z,
            (Y, Z) | (Z, Y) => X,
            (X, Z) | (Z, X) => Y,
            _ => unreachable!(),
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Pauli::I => "I",
            Pauli::X => "X",
            Pauli::Y => "Y",
            Pauli::Z => "Z",
        };
        f.write_str(s)
    }
}

/// `T = (i/√3)(σx − σy + σz)`.
///
/// Geometrically a π rotation about the (1, −1, 1)/√3 axis, so `T² = −I`.
pub fn t_gate() -> Matrix2 {
    let x = Pauli::X.matrix().0;
    let y = Pauli::Y.matrix().0;
    let z = Pauli::Z.matrix().0;
    let mut sum = [[ZERO; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            sum[r][c] = x[r][c] - y[r][c] + z[r][c];
        }
    }
    Matrix2(sum).scale(I / 3f64.sqrt())
}
