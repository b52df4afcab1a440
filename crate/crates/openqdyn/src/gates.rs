//! Built-in unitaries and the `UnitaryGate` wrapper.

use num_complex::Complex64;

use crate::error::{QdynError, Result};
use crate::linalg::{ComplexMatrix, C64, C_I, C_ONE, C_ZERO};

/// Unitarity tolerance on gate construction.
pub const UNITARY_TOL: f64 = 1e-9;

/// A unitary on a tensor-product space with explicit subsystem dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryGate {
    matrix: ComplexMatrix,
    dims: (usize, usize),
}

impl UnitaryGate {
    pub fn new(matrix: ComplexMatrix, dims: (usize, usize)) -> Result<Self> {
        let (ds, de) = dims;
        if !matrix.is_square() || matrix.rows() != ds * de {
            return Err(QdynError::Dimension(format!(
                "gate side {} does not match dims {}x{}",
                matrix.rows(),
                ds,
                de
            )));
        }
        let deviation = matrix.unitary_deviation();
        if deviation > UNITARY_TOL {
            return Err(QdynError::NotUnitary {
                deviation,
                tolerance: UNITARY_TOL,
            });
        }
        Ok(Self { matrix, dims })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn side(&self) -> usize {
        self.dims.0 * self.dims.1
    }

    /// U ρ U†
    pub fn conjugate(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        rho.conjugated_by(&self.matrix)
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.matrix.matvec(v)
    }
}

fn c(re: f64, im: f64) -> C64 {
    Complex64::new(re, im)
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[vec![C_ZERO, C_ONE], vec![C_ONE, C_ZERO]])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[vec![C_ZERO, -C_I], vec![C_I, C_ZERO]])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[vec![C_ONE, C_ZERO], vec![C_ZERO, -C_ONE]])
}

pub fn hadamard() -> ComplexMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_rows(&[vec![c(h, 0.0), c(h, 0.0)], vec![c(h, 0.0), c(-h, 0.0)]])
}

/// The four magic-basis vectors, index 0..=3 for |Φ1>..|Φ4>.
pub fn magic_state(index: usize) -> Vec<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match index {
        0 => vec![C_ZERO, c(s, 0.0), c(-s, 0.0), C_ZERO],
        1 => vec![c(0.0, -s), C_ZERO, C_ZERO, c(0.0, s)],
        2 => vec![c(s, 0.0), C_ZERO, C_ZERO, c(s, 0.0)],
        3 => vec![C_ZERO, c(0.0, -s), c(0.0, -s), C_ZERO],
        _ => panic!("magic index out of range"),
    }
}

/// Change-of-basis matrix whose columns are |Φ1>..|Φ4>.
pub fn magic_basis_matrix() -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(4, 4);
    for j in 0..4 {
        let col = magic_state(j);
        for i in 0..4 {
            m[(i, j)] = col[i];
        }
    }
    m
}

pub fn identity_gate() -> UnitaryGate {
    UnitaryGate::new(ComplexMatrix::identity(4), (2, 2)).unwrap()
}

/// The swap operator F on two qubits.
pub fn swap() -> UnitaryGate {
    let mut m = ComplexMatrix::zeros(4, 4);
    m[(0, 0)] = C_ONE;
    m[(1, 2)] = C_ONE;
    m[(2, 1)] = C_ONE;
    m[(3, 3)] = C_ONE;
    UnitaryGate::new(m, (2, 2)).unwrap()
}

/// Computational-basis CNOT with S as control.
pub fn cnot_computational_se() -> UnitaryGate {
    let mut m = ComplexMatrix::zeros(4, 4);
    m[(0, 0)] = C_ONE;
    m[(1, 1)] = C_ONE;
    m[(2, 3)] = C_ONE;
    m[(3, 2)] = C_ONE;
    UnitaryGate::new(m, (2, 2)).unwrap()
}

/// Computational-basis CNOT with E as control.
pub fn cnot_computational_es() -> UnitaryGate {
    let mut m = ComplexMatrix::zeros(4, 4);
    m[(0, 0)] = C_ONE;
    m[(1, 3)] = C_ONE;
    m[(2, 2)] = C_ONE;
    m[(3, 1)] = C_ONE;
    UnitaryGate::new(m, (2, 2)).unwrap()
}

/// Library gate `cnot`: S controls a NOT on E, with the control read in the
/// |±> basis, i.e. (H⊗I)·CNOT_SE·(H⊗I). This is the frame in which the
/// introductory transformation I/2 → |0><0| is generated by
/// √½(|0+> + |1−>); all classification results are frame-independent.
pub fn cnot() -> UnitaryGate {
    let h_i = crate::linalg::tensor(&hadamard(), &ComplexMatrix::identity(2));
    let m = h_i.mul(cnot_computational_se().matrix()).mul(&h_i);
    UnitaryGate::new(m, (2, 2)).unwrap()
}

/// Double CNOT: CNOT_SE followed by CNOT_ES (computational basis).
pub fn dcnot() -> UnitaryGate {
    let m = cnot_computational_es()
        .matrix()
        .mul(cnot_computational_se().matrix());
    UnitaryGate::new(m, (2, 2)).unwrap()
}

/// Square root of the swap operator.
pub fn sqrt_swap() -> UnitaryGate {
    let p = c(0.5, 0.5);
    let q = c(0.5, -0.5);
    let m = ComplexMatrix::from_rows(&[
        vec![C_ONE, C_ZERO, C_ZERO, C_ZERO],
        vec![C_ZERO, p, q, C_ZERO],
        vec![C_ZERO, q, p, C_ZERO],
        vec![C_ZERO, C_ZERO, C_ZERO, C_ONE],
    ]);
    UnitaryGate::new(m, (2, 2)).unwrap()
}

/// The two-parameter purity-extraction family U(θ, γ).
pub fn family_unitary(theta: f64, gamma: f64) -> UnitaryGate {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (ct, st) = (theta.cos(), theta.sin());
    let ph = Complex64::from_polar(1.0, gamma);
    // oriented so that U|Φ₃> = |00> and, at θ = π/4,
    // U(√½(|01> − e^{−iγ}|10>)) = |01>: the one-parameter solution set of
    // I/2 → |0><0| then reads p|Φ₃><Φ₃| + (1−p)|Φ₄(γ)><Φ₄(γ)|
    let m = ComplexMatrix::from_rows(&[
        vec![c(s, 0.0), C_ZERO, C_ZERO, c(s, 0.0)],
        vec![C_ZERO, c(ct, 0.0), -ph * st, C_ZERO],
        vec![C_ZERO, c(st, 0.0), ph * ct, C_ZERO],
        vec![c(s, 0.0), C_ZERO, C_ZERO, c(-s, 0.0)],
    ]);
    UnitaryGate::new(m, (2, 2)).unwrap()
}

/// Controlled modular shift |i>|j> -> |(i-j) mod d>|j> on the computational
/// basis of a d⊗d space.
pub fn shift(d: usize) -> UnitaryGate {
    let mut m = ComplexMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            let target = (i + d - j % d) % d;
            m[(target * d + j, i * d + j)] = C_ONE;
        }
    }
    UnitaryGate::new(m, (d, d)).unwrap()
}

/// Looks up a gate by its schema spelling.
pub fn by_name(name: &str) -> Result<UnitaryGate> {
    match name {
        "identity" => Ok(identity_gate()),
        "swap" => Ok(swap()),
        "cnot" => Ok(cnot()),
        "dcnot" => Ok(dcnot()),
        "sqrt-swap" => Ok(sqrt_swap()),
        other => Err(QdynError::InvalidArgument(format!(
            "unknown gate name '{other}' (expected identity|swap|cnot|dcnot|sqrt-swap|family|shift)"
        ))),
    }
}
