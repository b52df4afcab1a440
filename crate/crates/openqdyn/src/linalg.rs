//! Dense complex matrix kernel for small dimensions (side <= 16).
//!
//! Everything here is sized for desk-scale problems: two-qubit joint spaces
//! and modest extensions of them. The eigensolver is a cyclic Jacobi
//! iteration, which is simple, deterministic, and accurate at this scale.

use num_complex::Complex64;

use crate::error::{QdynError, Result};

/// Hermiticity tolerance on eigensolver inputs (max-entry deviation).
pub const HERM_TOL: f64 = 1e-9;

/// Off-diagonal Frobenius mass at which the Jacobi sweep stops.
pub const JACOBI_TOL: f64 = 1e-13;

pub type C64 = Complex64;

pub const C_ZERO: C64 = Complex64::new(0.0, 0.0);
pub const C_ONE: C64 = Complex64::new(1.0, 0.0);
pub const C_I: C64 = Complex64::new(0.0, 1.0);

/// Which tensor factor an operation acts on. Subsystem `S` is always the
/// left (slow) factor; the computational basis is ordered lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    System,
    Environment,
}

/// Dense complex matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<C64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(QdynError::Dimension(format!(
                "entry count {} does not match {}x{}",
                entries.len(),
                rows,
                cols
            )));
        }
        for (idx, e) in entries.iter().enumerate() {
            if !e.re.is_finite() || !e.im.is_finite() {
                return Err(QdynError::NonFinite {
                    row: idx / cols,
                    col: idx % cols,
                });
            }
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![C_ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C_ONE;
        }
        m
    }

    /// Builds a matrix from rows of (re, im) pairs; panics on ragged input.
    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let r = rows.len();
        let c = if r > 0 { rows[0].len() } else { 0 };
        let mut entries = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged row in from_rows");
            entries.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matrix product dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C_ZERO {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a + b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            entries,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a - b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            entries,
        }
    }

    pub fn scale(&self, factor: C64) -> Self {
        let entries = self.entries.iter().map(|a| a * factor).collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            entries,
        }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.norm()).fold(0.0, f64::max)
    }

    /// Max-entry deviation from Hermiticity.
    pub fn herm_deviation(&self) -> f64 {
        assert!(self.is_square());
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn unitary_deviation(&self) -> f64 {
        assert!(self.is_square());
        self.dagger()
            .mul(self)
            .sub(&Self::identity(self.rows))
            .max_abs()
    }

    /// U self U† for a conjugation unitary of matching dimension.
    pub fn conjugated_by(&self, u: &Self) -> Self {
        u.mul(self).mul(&u.dagger())
    }

    /// Determinant via LU elimination with partial pivoting.
    pub fn determinant(&self) -> C64 {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut det = C_ONE;
        for k in 0..n {
            let mut pivot = k;
            for i in (k + 1)..n {
                if a[(i, k)].norm() > a[(pivot, k)].norm() {
                    pivot = i;
                }
            }
            if a[(pivot, k)].norm() == 0.0 {
                return C_ZERO;
            }
            if pivot != k {
                for j in 0..n {
                    let tmp = a[(k, j)];
                    a[(k, j)] = a[(pivot, j)];
                    a[(pivot, j)] = tmp;
                }
                det = -det;
            }
            det *= a[(k, k)];
            for i in (k + 1)..n {
                let f = a[(i, k)] / a[(k, k)];
                for j in k..n {
                    let akj = a[(k, j)];
                    a[(i, j)] -= f * akj;
                }
            }
        }
        det
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.entries[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.entries[i * self.cols + j]
    }
}

/// Kronecker product with index convention
/// `(i*rows_b + k, j*cols_b + l) = a[i,j] * b[k,l]`.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(a.rows() * b.rows(), a.cols() * b.cols());
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            let aij = a[(i, j)];
            if aij == C_ZERO {
                continue;
            }
            for k in 0..b.rows() {
                for l in 0..b.cols() {
                    out[(i * b.rows() + k, j * b.cols() + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

fn check_bipartite(m: &ComplexMatrix, dims: (usize, usize)) -> Result<()> {
    let (ds, de) = dims;
    if !m.is_square() || m.rows() != ds * de {
        return Err(QdynError::Dimension(format!(
            "expected square side {}x{}={}, got {}x{}",
            ds,
            de,
            ds * de,
            m.rows(),
            m.cols()
        )));
    }
    Ok(())
}

/// Trace over the designated tensor factor.
pub fn partial_trace(
    m: &ComplexMatrix,
    dims: (usize, usize),
    which: Subsystem,
) -> Result<ComplexMatrix> {
    check_bipartite(m, dims)?;
    let (ds, de) = dims;
    match which {
        Subsystem::Environment => {
            let mut out = ComplexMatrix::zeros(ds, ds);
            for i in 0..ds {
                for j in 0..ds {
                    for k in 0..de {
                        out[(i, j)] += m[(i * de + k, j * de + k)];
                    }
                }
            }
            Ok(out)
        }
        Subsystem::System => {
            let mut out = ComplexMatrix::zeros(de, de);
            for k in 0..de {
                for l in 0..de {
                    for i in 0..ds {
                        out[(k, l)] += m[(i * de + k, i * de + l)];
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Transpose on the environment (right) factor only. Involutive.
pub fn partial_transpose(m: &ComplexMatrix, dims: (usize, usize)) -> Result<ComplexMatrix> {
    check_bipartite(m, dims)?;
    let (ds, de) = dims;
    let mut out = ComplexMatrix::zeros(ds * de, ds * de);
    for i in 0..ds {
        for j in 0..ds {
            for k in 0..de {
                for l in 0..de {
                    out[(i * de + k, j * de + l)] = m[(i * de + l, j * de + k)];
                }
            }
        }
    }
    Ok(out)
}

/// Spectrum of a Hermitian matrix: eigenvalues sorted descending with
/// orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct HermitianSpectrum {
    pub eigenvalues: Vec<f64>,
    /// Columns are the eigenvectors, ordered to match `eigenvalues`.
    pub eigenvectors: ComplexMatrix,
    /// Hermiticity deviation of the raw input; the input was symmetrized
    /// as (m + m†)/2 before solving.
    pub input_deviation: f64,
}

impl HermitianSpectrum {
    pub fn eigenvector(&self, k: usize) -> Vec<C64> {
        self.eigenvectors.column(k)
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let mut d = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = C64::new(self.eigenvalues[i], 0.0);
        }
        d.conjugated_by(&self.eigenvectors)
    }
}

/// Cyclic Jacobi eigensolver for Hermitian matrices.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianSpectrum> {
    hermitian_eig_tol(m, HERM_TOL)
}

pub fn hermitian_eig_tol(m: &ComplexMatrix, herm_tol: f64) -> Result<HermitianSpectrum> {
    if !m.is_square() {
        return Err(QdynError::Dimension("eigensolver needs a square matrix".into()));
    }
    let deviation = m.herm_deviation();
    if deviation > herm_tol {
        return Err(QdynError::NotHermitian {
            deviation,
            tolerance: herm_tol,
        });
    }
    let n = m.rows();
    let mut a = m.add(&m.dagger()).scale(C64::new(0.5, 0.0));
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm().max(1.0);
    let tol = JACOBI_TOL * scale;
    for _sweep in 0..120 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if (2.0 * off).sqrt() < tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag < tol / (n * n) as f64 {
                    continue;
                }
                let u = apq / mag;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // G has columns (p, q): [[c, s*u], [-s*conj(u), c]].
                // a <- G† a G, v <- v G.
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c - akq * s * u.conj();
                    a[(k, q)] = akp * s * u + akq * c;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c - aqk * s * u;
                    a[(q, k)] = apk * s * u.conj() + aqk * c;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * s * u.conj();
                    v[(k, q)] = vkp * s * u + vkq * c;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.partial_cmp(&a[(i, i)].re).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[(row, col)] = v[(row, src)];
        }
    }
    Ok(HermitianSpectrum {
        eigenvalues,
        eigenvectors: vectors,
        input_deviation: deviation,
    })
}

/// Singular values via eigendecomposition of A†A; adequate at this scale.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    let gram = m.dagger().mul(m);
    let spec = hermitian_eig_tol(&gram, 1e-7 * gram.frobenius_norm().max(1.0))
        .expect("A†A is Hermitian by construction");
    spec.eigenvalues
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .collect()
}

/// Trace norm ||A||_1 = tr sqrt(A†A), the sum of singular values.
pub fn trace_norm(m: &ComplexMatrix) -> f64 {
    assert!(m.is_square(), "trace norm needs a square matrix");
    singular_values(m).iter().sum()
}

// ---- state-vector helpers ----

pub fn ket(dim: usize, index: usize) -> Vec<C64> {
    let mut v = vec![C_ZERO; dim];
    v[index] = C_ONE;
    v
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn vec_norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(a: &[C64]) -> Vec<C64> {
    let n = vec_norm(a);
    a.iter().map(|x| x / n).collect()
}

/// |a><b|
pub fn outer(a: &[C64], b: &[C64]) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(a.len(), b.len());
    for i in 0..a.len() {
        for j in 0..b.len() {
            m[(i, j)] = a[i] * b[j].conj();
        }
    }
    m
}

pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

pub fn vec_sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn vec_scale(a: &[C64], f: C64) -> Vec<C64> {
    a.iter().map(|x| x * f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sigma_z() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[vec![C_ONE, C_ZERO], vec![C_ZERO, -C_ONE]])
    }

    fn sigma_x() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[vec![C_ZERO, C_ONE], vec![C_ONE, C_ZERO]])
    }

    #[test]
    fn tensor_identity() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(tensor(&i2, &i2), ComplexMatrix::identity(4));
    }

    #[test]
    fn tensor_basis_bookkeeping() {
        // |0><0| ⊗ |1><1| = diag(0,1,0,0) in {00,01,10,11} order
        let p0 = outer(&ket(2, 0), &ket(2, 0));
        let p1 = outer(&ket(2, 1), &ket(2, 1));
        let t = tensor(&p0, &p1);
        for i in 0..4 {
            let expect = if i == 1 { 1.0 } else { 0.0 };
            assert!((t[(i, i)].re - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn tensor_sigma_z_pair() {
        let t = tensor(&sigma_z(), &sigma_z());
        let diag: Vec<f64> = (0..4).map(|i| t[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn partial_trace_product_state() {
        let rho = outer(&ket(2, 0), &ket(2, 0));
        let sigma = ComplexMatrix::from_rows(&[
            vec![c(0.7, 0.0), c(0.1, 0.2)],
            vec![c(0.1, -0.2), c(0.3, 0.0)],
        ]);
        let joint = tensor(&rho, &sigma);
        let red = partial_trace(&joint, (2, 2), Subsystem::Environment).unwrap();
        // tr_E(ρ⊗σ) = ρ·tr(σ) = ρ
        assert!(red.sub(&rho).max_abs() < 1e-14);
    }

    #[test]
    fn partial_trace_bell_state() {
        let phi3 = gates::magic_state(2);
        let joint = outer(&phi3, &phi3);
        let red = partial_trace(&joint, (2, 2), Subsystem::Environment).unwrap();
        let half_i = ComplexMatrix::identity(2).scale(c(0.5, 0.0));
        assert!(red.sub(&half_i).max_abs() < 1e-14);
    }

    #[test]
    fn partial_trace_over_system() {
        let v = kron_vec(&ket(2, 0), &ket(2, 1));
        let joint = outer(&v, &v);
        let red = partial_trace(&joint, (2, 2), Subsystem::System).unwrap();
        assert!((red[(1, 1)].re - 1.0).abs() < 1e-15);
        assert!(red[(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn partial_transpose_product_and_involution() {
        let rho = outer(&normalize(&[c(1.0, 0.0), c(0.5, 0.5)]), &normalize(&[c(1.0, 0.0), c(0.5, 0.5)]));
        let sigma = ComplexMatrix::from_rows(&[
            vec![c(0.6, 0.0), c(0.2, 0.1)],
            vec![c(0.2, -0.1), c(0.4, 0.0)],
        ]);
        let joint = tensor(&rho, &sigma);
        let pt = partial_transpose(&joint, (2, 2)).unwrap();
        assert!(pt.sub(&tensor(&rho, &sigma.transpose())).max_abs() < 1e-14);
        let back = partial_transpose(&pt, (2, 2)).unwrap();
        assert!(back.sub(&joint).max_abs() < 1e-15);
    }

    #[test]
    fn partial_transpose_bell_min_eigenvalue() {
        let phi3 = gates::magic_state(2);
        let pt = partial_transpose(&outer(&phi3, &phi3), (2, 2)).unwrap();
        let spec = hermitian_eig(&pt).unwrap();
        assert!((spec.eigenvalues[3] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn eig_diagonal_sorted() {
        let m = ComplexMatrix::from_rows(&[
            vec![c(1.0, 0.0), C_ZERO, C_ZERO],
            vec![C_ZERO, c(3.0, 0.0), C_ZERO],
            vec![C_ZERO, C_ZERO, c(2.0, 0.0)],
        ]);
        let spec = hermitian_eig(&m).unwrap();
        assert_eq!(spec.eigenvalues, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn eig_sigma_x() {
        let spec = hermitian_eig(&sigma_x()).unwrap();
        assert!((spec.eigenvalues[0] - 1.0).abs() < 1e-13);
        assert!((spec.eigenvalues[1] + 1.0).abs() < 1e-13);
        let v = spec.eigenvector(0);
        assert!((v[0].norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn eig_conjugation_invariance() {
        // ρ = 3/4 |0><0| + 1/4 |1><1| rotated by Hadamard keeps (3/4, 1/4)
        let h = gates::hadamard();
        let rho = ComplexMatrix::from_rows(&[
            vec![c(0.75, 0.0), C_ZERO],
            vec![C_ZERO, c(0.25, 0.0)],
        ]);
        let spec = hermitian_eig(&rho.conjugated_by(&h)).unwrap();
        assert!((spec.eigenvalues[0] - 0.75).abs() < 1e-13);
        assert!((spec.eigenvalues[1] - 0.25).abs() < 1e-13);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = ComplexMatrix::from_rows(&[vec![C_ZERO, C_ONE], vec![C_ZERO, C_ZERO]]);
        assert!(matches!(
            hermitian_eig(&m),
            Err(QdynError::NotHermitian { .. })
        ));
    }

    #[test]
    fn trace_norm_examples() {
        // ||I/2 - |0><0|||_1 = 1 (eigenvalues ±1/2)
        let m = ComplexMatrix::identity(2)
            .scale(c(0.5, 0.0))
            .sub(&outer(&ket(2, 0), &ket(2, 0)));
        assert!((trace_norm(&m) - 1.0).abs() < 1e-12);
        assert!(trace_norm(&ComplexMatrix::zeros(3, 3)) < 1e-15);
    }

    #[test]
    fn non_finite_rejected() {
        let bad = ComplexMatrix::new(1, 1, vec![c(f64::NAN, 0.0)]);
        assert!(matches!(bad, Err(QdynError::NonFinite { .. })));
    }
}
