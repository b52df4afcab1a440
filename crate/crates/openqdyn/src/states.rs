//! Density-matrix semantics: validation, purity, spectral and Bloch
//! representations, distances, and seeded random sampling.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QdynError, Result};
use crate::gates::{self, UnitaryGate};
use crate::linalg::{
    self, hermitian_eig, trace_norm, ComplexMatrix, C64,
};

/// PSD slack permitted on construction; more-negative eigenvalues are
/// rejected, less-negative ones are clipped to zero and the trace
/// renormalized.
pub const PSD_TOL: f64 = 1e-9;

/// Trace and Hermiticity tolerance on construction.
pub const STATE_TOL: f64 = 1e-9;

/// Default eigenvalue cutoff separating genuine rank deficiency from
/// eigensolver noise.
pub const RANK_TOL: f64 = 1e-7;

/// Positive unit-trace operator on a single or bipartite space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    dims: Vec<usize>,
    clip_magnitude: f64,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix, dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.len() > 2 {
            return Err(QdynError::InvalidState(
                "dims must have length 1 or 2".into(),
            ));
        }
        let side: usize = dims.iter().product();
        if !matrix.is_square() || matrix.rows() != side {
            return Err(QdynError::InvalidState(format!(
                "matrix side {} does not match dims {:?}",
                matrix.rows(),
                dims
            )));
        }
        let dev = matrix.herm_deviation();
        if dev > STATE_TOL {
            return Err(QdynError::NotHermitian {
                deviation: dev,
                tolerance: STATE_TOL,
            });
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(QdynError::InvalidState(format!(
                "trace {tr} is not 1 within {STATE_TOL:.0e}"
            )));
        }
        let spec = hermitian_eig(&matrix)?;
        let min_eig = *spec
            .eigenvalues
            .last()
            .expect("non-empty spectrum");
        if min_eig < -PSD_TOL {
            return Err(QdynError::InvalidState(format!(
                "eigenvalue {min_eig:.3e} below -{PSD_TOL:.0e}"
            )));
        }
        // Clip tomography-like negative noise and renormalize.
        let clip_magnitude = (-min_eig).max(0.0);
        let matrix = if clip_magnitude > 0.0 {
            let clipped: Vec<f64> = spec.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
            let total: f64 = clipped.iter().sum();
            let n = side;
            let mut d = ComplexMatrix::zeros(n, n);
            for i in 0..n {
                d[(i, i)] = Complex64::new(clipped[i] / total, 0.0);
            }
            d.conjugated_by(&spec.eigenvectors)
        } else {
            matrix
        };
        Ok(Self {
            matrix,
            dims,
            clip_magnitude,
        })
    }

    pub fn pure(state: &[C64], dims: Vec<usize>) -> Result<Self> {
        let n = linalg::vec_norm(state);
        if (n - 1.0).abs() > 1e-9 {
            return Err(QdynError::InvalidState(format!(
                "pure state norm {n} is not 1"
            )));
        }
        Self::new(linalg::outer(state, state), dims)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let m = ComplexMatrix::identity(dim).scale(Complex64::new(1.0 / dim as f64, 0.0));
        Self::new(m, vec![dim]).unwrap()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn side(&self) -> usize {
        self.matrix.rows()
    }

    /// Magnitude of the largest negative eigenvalue clipped at construction.
    pub fn clip_magnitude(&self) -> f64 {
        self.clip_magnitude
    }

    pub fn with_dims(&self, dims: Vec<usize>) -> Result<Self> {
        Self::new(self.matrix.clone(), dims)
    }

    /// tr(ρ²) ∈ [1/d, 1]
    pub fn purity(&self) -> f64 {
        self.matrix.mul(&self.matrix).trace().re
    }

    /// Number of eigenvalues above `tol`.
    pub fn rank_eps(&self, tol: f64) -> usize {
        self.spectral()
            .weights
            .iter()
            .filter(|&&p| p > tol)
            .count()
    }

    pub fn rank(&self) -> usize {
        self.rank_eps(RANK_TOL)
    }

    pub fn spectral(&self) -> SpectralDecomposition {
        let spec = hermitian_eig(&self.matrix).expect("density matrix is Hermitian");
        SpectralDecomposition {
            weights: spec.eigenvalues.clone(),
            states: spec.eigenvectors,
        }
    }

    /// ½||ρ−σ||₁
    pub fn trace_distance(&self, other: &Self) -> f64 {
        0.5 * self.trace_norm_distance(other)
    }

    /// ||ρ−σ||₁ (full trace norm; all thresholds in this crate use this convention)
    pub fn trace_norm_distance(&self, other: &Self) -> f64 {
        trace_norm(&self.matrix.sub(&other.matrix))
    }

    pub fn fidelity_with_pure(&self, state: &[C64]) -> f64 {
        let v = self.matrix.matvec(state);
        linalg::inner(state, &v).re
    }
}

/// Spectral decomposition with weights sorted descending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub weights: Vec<f64>,
    /// Columns are the orthonormal eigenvectors.
    pub states: ComplexMatrix,
}

/// Bloch vector under the normalization ρ = I/2 + m·σ, so
/// |m| ≤ 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub m: [f64; 3],
}

impl BlochVector {
    pub fn new(m: [f64; 3]) -> Result<Self> {
        let r2: f64 = m.iter().map(|x| x * x).sum();
        if r2.sqrt() > 0.5 + 1e-12 {
            return Err(QdynError::InvalidArgument(format!(
                "Bloch vector length {} exceeds 1/2",
                r2.sqrt()
            )));
        }
        Ok(Self { m })
    }

    pub fn norm(&self) -> f64 {
        self.m.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// ρ = I/2 + m·σ
pub fn from_bloch(v: &BlochVector) -> DensityMatrix {
    let mut m = ComplexMatrix::identity(2).scale(Complex64::new(0.5, 0.0));
    let paulis = [gates::pauli_x(), gates::pauli_y(), gates::pauli_z()];
    for (mi, p) in v.m.iter().zip(&paulis) {
        m = m.add(&p.scale(Complex64::new(*mi, 0.0)));
    }
    DensityMatrix::new(m, vec![2]).expect("Bloch ball maps into valid states")
}

pub fn to_bloch(rho: &DensityMatrix) -> Result<BlochVector> {
    if rho.side() != 2 {
        return Err(QdynError::Dimension("Bloch form needs a qubit".into()));
    }
    let paulis = [gates::pauli_x(), gates::pauli_y(), gates::pauli_z()];
    let mut m = [0.0; 3];
    for (out, p) in m.iter_mut().zip(&paulis) {
        *out = 0.5 * rho.matrix().mul(p).trace().re;
    }
    BlochVector::new(m)
}

// ---- random sampling ----

fn gaussian_complex_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<C64> {
    // Box-Muller; two normals per draw pair.
    (0..dim)
        .map(|_| {
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            let r = (-2.0 * u1.ln()).sqrt();
            let phi = 2.0 * std::f64::consts::PI * u2;
            Complex64::new(r * phi.cos(), r * phi.sin())
        })
        .collect()
}

/// Haar-random pure state as a normalized Gaussian vector.
pub fn random_pure_with(rng: &mut ChaCha8Rng, dim: usize) -> Vec<C64> {
    linalg::normalize(&gaussian_complex_vector(rng, dim))
}

/// Haar-random unitary via Gram–Schmidt of a Gaussian matrix.
pub fn random_unitary_matrix_with(rng: &mut ChaCha8Rng, dim: usize) -> ComplexMatrix {
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(dim);
    for _ in 0..dim {
        let mut v = gaussian_complex_vector(rng, dim);
        for c in &cols {
            let ov = linalg::inner(c, &v);
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi -= ov * ci;
            }
        }
        cols.push(linalg::normalize(&v));
    }
    let mut m = ComplexMatrix::zeros(dim, dim);
    for (j, col) in cols.iter().enumerate() {
        for i in 0..dim {
            m[(i, j)] = col[i];
        }
    }
    m
}

/// Mixed state of the requested rank via partial trace of a Haar pure
/// state on a dim×rank extension.
pub fn random_state_with(rng: &mut ChaCha8Rng, dim: usize, rank: usize) -> Result<DensityMatrix> {
    if rank == 0 || rank > dim {
        return Err(QdynError::InvalidArgument(format!(
            "rank {rank} out of range for dim {dim}"
        )));
    }
    let pure = random_pure_with(rng, dim * rank);
    let joint = linalg::outer(&pure, &pure);
    let reduced = linalg::partial_trace(&joint, (dim, rank), linalg::Subsystem::Environment)?;
    DensityMatrix::new(reduced, vec![dim])
}

pub fn random_state(dims: &[usize], rank: usize, seed: u64) -> Result<DensityMatrix> {
    let dim: usize = dims.iter().product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = random_state_with(&mut rng, dim, rank)?;
    rho.with_dims(dims.to_vec())
}

pub fn random_unitary(dim: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_unitary_matrix_with(&mut rng, dim)
}

/// Random two-qubit joint unitary.
pub fn random_two_qubit_gate_with(rng: &mut ChaCha8Rng) -> UnitaryGate {
    UnitaryGate::new(random_unitary_matrix_with(rng, 4), (2, 2)).unwrap()
}

/// Random product unitary A⊗B on two qubits.
pub fn random_local_gate_with(rng: &mut ChaCha8Rng) -> UnitaryGate {
    let a = random_unitary_matrix_with(rng, 2);
    let b = random_unitary_matrix_with(rng, 2);
    UnitaryGate::new(linalg::tensor(&a, &b), (2, 2)).unwrap()
}

// ---- JSON wire format ----

#[derive(Serialize, Deserialize)]
struct DensityMatrixDto {
    dims: Vec<usize>,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl Serialize for DensityMatrix {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.side();
        let mut re = vec![vec![0.0; n]; n];
        let mut im = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                re[i][j] = self.matrix[(i, j)].re;
                im[i][j] = self.matrix[(i, j)].im;
            }
        }
        DensityMatrixDto {
            dims: self.dims.clone(),
            re,
            im,
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let dto = DensityMatrixDto::deserialize(de)?;
        let n: usize = dto.dims.iter().product();
        if dto.re.len() != n || dto.im.len() != n {
            return Err(serde::de::Error::custom("re/im row count mismatch"));
        }
        let mut entries = Vec::with_capacity(n * n);
        for (rrow, irow) in dto.re.iter().zip(&dto.im) {
            if rrow.len() != n || irow.len() != n {
                return Err(serde::de::Error::custom("re/im column count mismatch"));
            }
            for (r, i) in rrow.iter().zip(irow) {
                entries.push(Complex64::new(*r, *i));
            }
        }
        let m = ComplexMatrix::new(n, n, entries).map_err(serde::de::Error::custom)?;
        DensityMatrix::new(m, dto.dims).map_err(serde::de::Error::custom)
    }
}

/// Serializable form for arbitrary complex matrices (gates in scenarios).
#[derive(Debug, Serialize, Deserialize, Clone)]
pub struct MatrixDto {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixDto {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        let (r, c) = (m.rows(), m.cols());
        let mut re = vec![vec![0.0; c]; r];
        let mut im = vec![vec![0.0; c]; r];
        for i in 0..r {
            for j in 0..c {
                re[i][j] = m[(i, j)].re;
                im[i][j] = m[(i, j)].im;
            }
        }
        Self { re, im }
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let r = self.re.len();
        let c = self.re.first().map_or(0, |row| row.len());
        if self.im.len() != r {
            return Err(QdynError::InvalidArgument("re/im shape mismatch".into()));
        }
        let mut entries = Vec::with_capacity(r * c);
        for (rrow, irow) in self.re.iter().zip(&self.im) {
            if rrow.len() != c || irow.len() != c {
                return Err(QdynError::InvalidArgument("ragged matrix rows".into()));
            }
            for (x, y) in rrow.iter().zip(irow) {
                entries.push(Complex64::new(*x, *y));
            }
        }
        ComplexMatrix::new(r, c, entries)
    }
}
