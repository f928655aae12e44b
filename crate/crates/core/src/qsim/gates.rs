//! Named gates and the rotation family.
//!
//! Rotations follow R_P(θ) = cos(θ/2)·𝟙 + i·sin(θ/2)·P, so each rotation is
//! 4π-periodic in its angle.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use super::matrix::{ComplexMatrix, C64, ONE, ZERO};

const I: C64 = C64::new(0.0, 1.0);

/// Pauli axis of a rotation gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

pub fn identity() -> ComplexMatrix {
    ComplexMatrix::identity(2)
}

pub fn hadamard() -> ComplexMatrix {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    ComplexMatrix::from_rows(&[&[h, h], &[h, -h]])
}

pub fn phase_s() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[&[ONE, ZERO], &[ZERO, I]])
}

pub fn phase_s_dagger() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[&[ONE, ZERO], &[ZERO, -I]])
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[&[ZERO, ONE], &[ONE, ZERO]])
}

/// Y = iXZ.
pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[&[ZERO, -I], &[I, ZERO]])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[&[ONE, ZERO], &[ZERO, -ONE]])
}

pub fn pauli(axis: Axis) -> ComplexMatrix {
    match axis {
        Axis::X => pauli_x(),
        Axis::Y => pauli_y(),
        Axis::Z => pauli_z(),
    }
}

/// CNOT with control on the first (most significant) qubit.
pub fn cnot() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[
        &[1.0, 0.0, 0.0, 0.0],
        &[0.0, 1.0, 0.0, 0.0],
        &[0.0, 0.0, 0.0, 1.0],
        &[0.0, 0.0, 1.0, 0.0],
    ])
}

pub fn cz() -> ComplexMatrix {
    ComplexMatrix::diagonal(&[ONE, ONE, ONE, -ONE])
}

/// R_P(θ) = cos(θ/2)·𝟙 + i·sin(θ/2)·P.
pub fn rotation(axis: Axis, angle: f64) -> ComplexMatrix {
    let (s, c) = (angle / 2.0).sin_cos();
    let p = pauli(axis);
    let mut out = ComplexMatrix::identity(2).scale(C64::new(c, 0.0));
    for i in 0..2 {
        for j in 0..2 {
            out[(i, j)] += I * s * p[(i, j)];
        }
    }
    out
}

/// |0⟩⟨0| on one qubit.
pub fn projector_zero() -> ComplexMatrix {
    ComplexMatrix::diagonal(&[ONE, ZERO])
}
