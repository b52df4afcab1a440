//! Two-qubit structure theory: magic basis, concurrence, the PPT
//! separability test, the Kraus-Cirac decomposition, and the local-unitary
//! class of a gate.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{QdynError, Result};
use crate::gates::{self, UnitaryGate};
use crate::linalg::{
    self, hermitian_eig, ComplexMatrix, C64, C_ONE, C_ZERO,
};
use crate::states::DensityMatrix;

/// Shared tolerance for modular phase comparisons (classify, pairwise
/// phase-difference checks). Overridable through the CLI.
pub const MOD_TOL: f64 = 1e-7;

/// Reconstruction tolerance of the Kraus-Cirac form.
pub const KC_TOL: f64 = 1e-8;

/// M† m M for a 4x4 matrix `m`, with M the magic change of basis.
pub fn to_magic(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    if m.rows() != 4 || m.cols() != 4 {
        return Err(QdynError::Dimension("magic basis transform needs 4x4".into()));
    }
    let mb = gates::magic_basis_matrix();
    Ok(mb.dagger().mul(m).mul(&mb))
}

/// Concurrence of a pure two-qubit state: |Σ c_i²| over magic-basis
/// components. Zero exactly on product states.
pub fn concurrence_pure(psi: &[C64]) -> Result<f64> {
    if psi.len() != 4 {
        return Err(QdynError::Dimension("concurrence needs a 4-vector".into()));
    }
    let n = linalg::vec_norm(psi);
    if (n - 1.0).abs() > 1e-9 {
        return Err(QdynError::InvalidArgument(format!(
            "state norm {n} is not 1"
        )));
    }
    let mb = gates::magic_basis_matrix();
    let coeffs = mb.dagger().matvec(psi);
    Ok(coeffs.iter().map(|c| c * c).sum::<C64>().norm())
}

/// Spin-flip form |<ψ*|σy⊗σy|ψ>|; used as an independent cross-check of
/// the magic-basis expression.
pub fn concurrence_spin_flip(psi: &[C64]) -> f64 {
    let yy = linalg::tensor(&gates::pauli_y(), &gates::pauli_y());
    let flipped = yy.matvec(psi);
    psi.iter()
        .zip(&flipped)
        .map(|(a, b)| a * b)
        .sum::<C64>()
        .norm()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PptVerdict {
    pub separable: bool,
    pub min_gamma_eigenvalue: f64,
}

/// PPT criterion; exact separability decision in 2⊗2.
pub fn ppt_separable(rho: &DensityMatrix) -> Result<PptVerdict> {
    if rho.dims() != [2, 2] {
        return Err(QdynError::Dimension("PPT test needs a 2⊗2 state".into()));
    }
    let pt = linalg::partial_transpose(rho.matrix(), (2, 2))?;
    let spec = hermitian_eig(&pt)?;
    let min = *spec.eigenvalues.last().unwrap();
    Ok(PptVerdict {
        separable: min >= -1e-9,
        min_gamma_eigenvalue: min,
    })
}

/// Kraus-Cirac form U = (U_S⊗U_E) · U_d · (V_S⊗V_E) with
/// U_d = Σ exp(-iλ_k)|Φ_k><Φ_k|.
#[derive(Debug, Clone)]
pub struct KrausCiracForm {
    pub left_s: ComplexMatrix,
    pub left_e: ComplexMatrix,
    /// Raw phases λ_1..λ_4 in [0, 2π); reconstruction is exact with these.
    pub phases: [f64; 4],
    pub right_s: ComplexMatrix,
    pub right_e: ComplexMatrix,
    /// Canonical (Weyl chamber) interaction coefficients.
    pub weyl: [f64; 3],
}

impl KrausCiracForm {
    /// The nonlocal factor U_d as a 4x4 matrix.
    pub fn interaction(&self) -> ComplexMatrix {
        interaction_from_phases(&self.phases)
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let left = linalg::tensor(&self.left_s, &self.left_e);
        let right = linalg::tensor(&self.right_s, &self.right_e);
        left.mul(&self.interaction()).mul(&right)
    }

    pub fn reconstruction_error(&self, u: &UnitaryGate) -> f64 {
        self.reconstruct().sub(u.matrix()).max_abs()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "phases_raw_rad": self.phases.to_vec(),
            "phases_weyl_rad": self.weyl.to_vec(),
        })
    }
}

/// U_d = Σ exp(-iλ_k)|Φ_k><Φ_k|
pub fn interaction_from_phases(phases: &[f64; 4]) -> ComplexMatrix {
    let mb = gates::magic_basis_matrix();
    let mut d = ComplexMatrix::zeros(4, 4);
    for (k, lam) in phases.iter().enumerate() {
        d[(k, k)] = Complex64::from_polar(1.0, -lam);
    }
    d.conjugated_by(&mb)
}

fn wrap_2pi(x: f64) -> f64 {
    x.rem_euclid(2.0 * PI)
}

/// Distance of x to the nearest multiple of π.
pub fn mod_pi_distance(x: f64) -> f64 {
    let r = x.rem_euclid(PI);
    r.min(PI - r)
}

/// Joint real-orthogonal eigenbasis of a symmetric unitary matrix
/// S = A + iB (A, B commuting real symmetric). Returns (V, eigenvalues)
/// with S = V diag(μ) V^T and V real orthogonal.
fn symmetric_unitary_eigenbasis(s: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<C64>)> {
    let n = s.rows();
    let a = s.add(&s.dagger()).scale(Complex64::new(0.5, 0.0));
    let b = s
        .sub(&s.dagger())
        .scale(Complex64::new(0.0, -0.5));
    // Re(S) and Im(S) commute; a generic real combination separates the
    // joint eigenspaces. Try a few mixing weights and keep the first basis
    // that actually diagonalizes S.
    for weight in [1.0, 0.618_033_988_749_894_9, 0.313_7, 2.718_281_828, 0.0] {
        let mix = a.add(&b.scale(Complex64::new(weight, 0.0)));
        let spec = match hermitian_eig(&mix) {
            Ok(s) => s,
            Err(_) => continue,
        };
        // Strip eigenvector phases so columns are real.
        let mut v = ComplexMatrix::zeros(n, n);
        let mut ok = true;
        for j in 0..n {
            let col = spec.eigenvector(j);
            let pivot = col
                .iter()
                .cloned()
                .max_by(|x, y| x.norm().partial_cmp(&y.norm()).unwrap())
                .unwrap();
            let phase = pivot / pivot.norm();
            let mut imag_mass = 0.0;
            for i in 0..n {
                let e = col[i] / phase;
                imag_mass += e.im * e.im;
                v[(i, j)] = Complex64::new(e.re, 0.0);
            }
            if imag_mass.sqrt() > 1e-8 {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }
        let check = v.transpose().mul(s).mul(&v);
        let mut off = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off = off.max(check[(i, j)].norm());
                }
            }
        }
        if off < 1e-9 {
            let eigs = (0..n).map(|i| check[(i, i)]).collect();
            return Ok((v, eigs));
        }
    }
    Err(QdynError::InvalidArgument(
        "failed to find a real orthogonal eigenbasis of the symmetric factor".into(),
    ))
}

/// Splits an exact 4x4 Kronecker product into 2x2 factors.
fn kron_factor(k: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    // k[2i+p, 2j+q] = a[i,j] * b[p,q]; pivot on the largest block.
    let mut best = (0usize, 0usize);
    let mut best_mag = -1.0;
    for i in 0..2 {
        for j in 0..2 {
            let mag: f64 = (0..2)
                .flat_map(|p| (0..2).map(move |q| (p, q)))
                .map(|(p, q)| k[(2 * i + p, 2 * j + q)].norm_sqr())
                .sum();
            if mag > best_mag {
                best_mag = mag;
                best = (i, j);
            }
        }
    }
    let (bi, bj) = best;
    let mut b = ComplexMatrix::zeros(2, 2);
    for p in 0..2 {
        for q in 0..2 {
            b[(p, q)] = k[(2 * bi + p, 2 * bj + q)];
        }
    }
    let scale = 2f64.sqrt() / b.frobenius_norm();
    let b = b.scale(Complex64::new(scale, 0.0));
    let mut a = ComplexMatrix::zeros(2, 2);
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = C_ZERO;
            for p in 0..2 {
                for q in 0..2 {
                    acc += b[(p, q)].conj() * k[(2 * i + p, 2 * j + q)];
                }
            }
            a[(i, j)] = acc / Complex64::new(2.0, 0.0);
        }
    }
    let err = linalg::tensor(&a, &b).sub(k).max_abs();
    if err > 1e-7 {
        return Err(QdynError::InvalidArgument(format!(
            "local factor is not a tensor product (residual {err:.3e})"
        )));
    }
    Ok((a, b))
}

/// Kraus-Cirac decomposition of a two-qubit unitary.
pub fn kraus_cirac(u: &UnitaryGate) -> Result<KrausCiracForm> {
    if u.dims() != (2, 2) {
        return Err(QdynError::Dimension("Kraus-Cirac needs a 2⊗2 gate".into()));
    }
    let det = u.matrix().determinant();
    // Principal fourth root; the discarded phase is folded back into the
    // λ's at the end so reconstruction is exact, not just up to phase.
    let alpha = Complex64::from_polar(det.norm().powf(0.25), det.arg() / 4.0);
    let u_su = u.matrix().scale(C_ONE / alpha);
    let u_m = to_magic(&u_su)?;
    let s = u_m.transpose().mul(&u_m);
    let (v, mu) = symmetric_unitary_eigenbasis(&s)?;
    // U_M = O1 · diag(e^{-iλ}) · O2 with O2 = V^T.
    let lams: Vec<f64> = mu.iter().map(|m| -m.arg() / 2.0).collect();
    let mut o2 = v.transpose();
    if o2.determinant().re < 0.0 {
        for j in 0..4 {
            o2[(3, j)] = -o2[(3, j)];
        }
    }
    let mut d = ComplexMatrix::zeros(4, 4);
    for (k, lam) in lams.iter().enumerate() {
        d[(k, k)] = Complex64::from_polar(1.0, -lam);
    }
    let mut o1 = u_m.mul(&o2.transpose()).mul(&d.dagger());
    let mut lams: Vec<f64> = lams;
    // o1 is real orthogonal up to numerical noise; make det +1 by shifting
    // one phase by π (which flips the matching column sign).
    let imag_mass = (0..4)
        .flat_map(|i| (0..4).map(move |j| (i, j)))
        .map(|(i, j)| o1[(i, j)].im.abs())
        .fold(0.0f64, f64::max);
    if imag_mass > 1e-7 {
        return Err(QdynError::InvalidArgument(format!(
            "orthogonal factor has imaginary mass {imag_mass:.3e}"
        )));
    }
    for i in 0..4 {
        for j in 0..4 {
            o1[(i, j)] = Complex64::new(o1[(i, j)].re, 0.0);
        }
    }
    if o1.determinant().re < 0.0 {
        for i in 0..4 {
            o1[(i, 0)] = -o1[(i, 0)];
        }
        lams[0] += PI;
    }
    let mb = gates::magic_basis_matrix();
    let left = o1.conjugated_by(&mb);
    let right = o2.conjugated_by(&mb);
    let (left_s, left_e) = kron_factor(&left)?;
    let (right_s, right_e) = kron_factor(&right)?;
    // Weyl coordinates come from the det-normalized phases.
    let weyl = canonical_weyl_from_phases(&[lams[0], lams[1], lams[2], lams[3]]);
    let raw: [f64; 4] = [
        wrap_2pi(lams[0] - alpha.arg()),
        wrap_2pi(lams[1] - alpha.arg()),
        wrap_2pi(lams[2] - alpha.arg()),
        wrap_2pi(lams[3] - alpha.arg()),
    ];
    let form = KrausCiracForm {
        left_s,
        left_e,
        phases: raw,
        right_s,
        right_e,
        weyl,
    };
    let err = form.reconstruction_error(u);
    if err > KC_TOL {
        return Err(QdynError::InvalidArgument(format!(
            "Kraus-Cirac reconstruction residual {err:.3e} exceeds {KC_TOL:.0e}"
        )));
    }
    Ok(form)
}

/// Canonical Weyl-chamber coordinates from magic-basis phases of a
/// det-normalized gate. Complete invariant of the local-unitary class.
pub fn canonical_weyl_from_phases(lams: &[f64; 4]) -> [f64; 3] {
    let pi2 = PI / 2.0;
    let pi4 = PI / 4.0;
    let pi32 = 1.5 * PI;
    let mut darg = [lams[0], lams[1], lams[2], 0.0];
    for d in darg.iter_mut().take(3) {
        // bring each representative into (-π/2, π/2]
        *d = *d - PI * (*d / PI).round();
    }
    darg[3] = -darg[0] - darg[1] - darg[2];
    let mut cs: Vec<f64> = (0..3)
        .map(|i| wrap_2pi((darg[i] + darg[3]) / 2.0))
        .collect();
    let cstemp: Vec<f64> = cs
        .iter()
        .map(|x| x.rem_euclid(pi2))
        .map(|x| x.min(pi2 - x))
        .collect();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| cstemp[a].partial_cmp(&cstemp[b]).unwrap());
    let picked = [order[1], order[2], order[0]];
    cs = picked.iter().map(|&i| cs[i]).collect();
    if cs[0] > pi2 {
        cs[0] -= pi32;
    }
    if cs[1] > pi2 {
        cs[1] -= pi32;
    }
    let mut conjs = 0;
    if cs[0] > pi4 {
        cs[0] = pi2 - cs[0];
        conjs += 1;
    }
    if cs[1] > pi4 {
        cs[1] = pi2 - cs[1];
        conjs += 1;
    }
    if cs[2] > pi2 {
        cs[2] -= pi32;
    }
    if conjs == 1 {
        cs[2] = pi2 - cs[2];
    }
    if cs[2] > pi4 {
        cs[2] -= pi2;
    }
    [cs[1], cs[0], cs[2]]
}

/// Canonical Weyl coordinates of a gate.
pub fn weyl_coordinates(u: &UnitaryGate) -> Result<[f64; 3]> {
    Ok(kraus_cirac(u)?.weyl)
}

/// Phase-vector equality under the documented symmetry group (global
/// shift, pairwise π-shifts with sign flips, index permutations): both
/// vectors reduce to the same canonical Weyl point.
pub fn phases_equivalent(a: &[f64; 4], b: &[f64; 4], tol: f64) -> bool {
    let ca = canonical_weyl_from_phases(&centered(a));
    let cb = canonical_weyl_from_phases(&centered(b));
    ca.iter().zip(&cb).all(|(x, y)| (x - y).abs() < tol)
}

fn centered(lams: &[f64; 4]) -> [f64; 4] {
    // remove the global phase so the Σλ ≡ 0 precondition of the Weyl map holds
    let mean = lams.iter().sum::<f64>() / 4.0;
    [
        lams[0] - mean,
        lams[1] - mean,
        lams[2] - mean,
        lams[3] - mean,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ClassLabel {
    #[serde(rename = "LU")]
    Lu,
    #[serde(rename = "SWAP")]
    Swap,
    #[serde(rename = "UC2")]
    Uc2,
    #[serde(rename = "GENERIC")]
    Generic,
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ClassLabel::Lu => "LU",
            ClassLabel::Swap => "SWAP",
            ClassLabel::Uc2 => "UC2",
            ClassLabel::Generic => "GENERIC",
        };
        write!(f, "{s}")
    }
}

/// Class verdict plus the evidence it was decided on.
#[derive(Debug, Clone, Serialize)]
pub struct UnitaryClass {
    pub label: ClassLabel,
    pub phases: [f64; 4],
    pub weyl: [f64; 3],
    /// max distance of pairwise phase differences from {0, π}
    pub pairwise_mod_pi_residual: f64,
    /// parity of the -1 signs when all differences sit in {0, π}
    pub swap_sign_parity: Option<bool>,
}

pub fn classify(u: &UnitaryGate) -> Result<UnitaryClass> {
    classify_with_tol(u, MOD_TOL)
}

pub fn classify_with_tol(u: &UnitaryGate, tol: f64) -> Result<UnitaryClass> {
    let kc = kraus_cirac(u)?;
    let lams = kc.phases;
    let mut residual = 0.0f64;
    for i in 0..4 {
        for j in (i + 1)..4 {
            residual = residual.max(mod_pi_distance(lams[i] - lams[j]));
        }
    }
    if residual <= tol {
        // U_d = e^{-iλ1} diag(±1) in the magic basis; an odd number of
        // flipped signs is the swap pattern, an even number a product gate.
        let mut minus = 0;
        for j in 1..4 {
            if (lams[j] - lams[0]).cos() < 0.0 {
                minus += 1;
            }
        }
        let odd = minus % 2 == 1;
        return Ok(UnitaryClass {
            label: if odd { ClassLabel::Swap } else { ClassLabel::Lu },
            phases: lams,
            weyl: kc.weyl,
            pairwise_mod_pi_residual: residual,
            swap_sign_parity: Some(!odd),
        });
    }
    let label = if kc.weyl[2].abs() <= tol {
        ClassLabel::Uc2
    } else {
        ClassLabel::Generic
    };
    Ok(UnitaryClass {
        label,
        phases: lams,
        weyl: kc.weyl,
        pairwise_mod_pi_residual: residual,
        swap_sign_parity: None,
    })
}

/// A counterexample pair built from a gate's nonlocal phases: entangled
/// inputs whose images under the interaction part are product states.
#[derive(Debug, Clone)]
pub struct CounterexampleStates {
    /// magic indices (0-based) carrying a phase difference outside {0, π}
    pub pair: (usize, usize),
    pub psi_plus: Vec<C64>,
    pub psi_minus: Vec<C64>,
    pub rho_plus: DensityMatrix,
    pub rho_minus: DensityMatrix,
    /// U_d|Ψ±>: product states by construction
    pub target_plus: Vec<C64>,
    pub target_minus: Vec<C64>,
}

/// Builds |Ψ±> = √½(e^{iλ_i}|Φ_i> ± i e^{iλ_j}|Φ_j>) for the pair of magic
/// indices whose phase difference is farthest from {0, π}.
pub fn counterexample_states(kc: &KrausCiracForm) -> Result<CounterexampleStates> {
    let mut best = None;
    let mut best_dist = 0.0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            let d = mod_pi_distance(kc.phases[i] - kc.phases[j]);
            // ties resolve to the last pair in index order so degenerate
            // phase patterns pick deterministic indices
            if d >= best_dist - 1e-12 && d > best_dist.min(MOD_TOL) {
                best_dist = best_dist.max(d);
                best = Some((i, j));
            }
        }
    }
    let (i, j) = best.filter(|_| best_dist > MOD_TOL).ok_or_else(|| {
        QdynError::InvalidArgument(
            "no phase pair outside {0, π}: gate is in LU ∪ SWAP".into(),
        )
    })?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let phi_i = gates::magic_state(i);
    let phi_j = gates::magic_state(j);
    let ei = Complex64::from_polar(s, kc.phases[i]);
    let ej = Complex64::from_polar(s, kc.phases[j]);
    let build = |sign: f64| -> Vec<C64> {
        let mut v = vec![C_ZERO; 4];
        for k in 0..4 {
            v[k] = ei * phi_i[k] + Complex64::new(0.0, sign) * ej * phi_j[k];
        }
        v
    };
    let psi_plus = build(1.0);
    let psi_minus = build(-1.0);
    let ud = kc.interaction();
    let target_plus = ud.matvec(&psi_plus);
    let target_minus = ud.matvec(&psi_minus);
    let reduce = |v: &[C64]| -> Result<DensityMatrix> {
        let joint = linalg::outer(v, v);
        let red = linalg::partial_trace(&joint, (2, 2), linalg::Subsystem::Environment)?;
        DensityMatrix::new(red, vec![2])
    };
    Ok(CounterexampleStates {
        pair: (i, j),
        rho_plus: reduce(&psi_plus)?,
        rho_minus: reduce(&psi_minus)?,
        psi_plus,
        psi_minus,
        target_plus,
        target_minus,
    })
}

// ---- product-basis pattern search (appendix structural test) ----

/// Witness bases realizing the four product-to-product mappings.
#[derive(Debug, Clone)]
pub struct ProdBasisEvidence {
    /// E-basis on the input side
    pub e_in: (Vec<C64>, Vec<C64>),
    /// S-input bases for the two E-branches
    pub s_in_first: (Vec<C64>, Vec<C64>),
    pub s_in_second: (Vec<C64>, Vec<C64>),
    /// shared S-output basis
    pub s_out: (Vec<C64>, Vec<C64>),
    pub score: f64,
}

fn bloch_ket(theta: f64, phi: f64) -> Vec<C64> {
    vec![
        Complex64::new((theta / 2.0).cos(), 0.0),
        Complex64::from_polar((theta / 2.0).sin(), phi),
    ]
}

fn orth_qubit(v: &[C64]) -> Vec<C64> {
    vec![-v[1].conj(), v[0].conj()]
}

/// S-inputs x for which U(x⊗q) is a product state: roots of the magic
/// quadratic Q(x) = Σ_m <Φ_m|ψ(x)>², with ψ(x) = x0 U(|0>⊗q) + x1 U(|1>⊗q).
/// Returns None when every input maps to a product state.
fn product_input_rays(u: &UnitaryGate, q: &[C64]) -> Option<Vec<Vec<C64>>> {
    let mb = gates::magic_basis_matrix();
    let psi0 = mb
        .dagger()
        .matvec(&u.apply(&linalg::kron_vec(&linalg::ket(2, 0), q)));
    let psi1 = mb
        .dagger()
        .matvec(&u.apply(&linalg::kron_vec(&linalg::ket(2, 1), q)));
    let alpha: C64 = psi0.iter().map(|c| c * c).sum();
    let beta: C64 = psi0.iter().zip(&psi1).map(|(a, b)| a * b).sum();
    let gamma: C64 = psi1.iter().map(|c| c * c).sum();
    let scale = alpha.norm().max(beta.norm()).max(gamma.norm());
    if scale < 1e-12 {
        return None; // every S input maps to a product
    }
    let mut roots: Vec<Vec<C64>> = Vec::new();
    if alpha.norm() >= gamma.norm() {
        // x1 = 1: α t² + 2β t + γ = 0 in t = x0
        let disc = (beta * beta - alpha * gamma).sqrt();
        for sign in [1.0, -1.0] {
            let t = (-beta + disc * Complex64::new(sign, 0.0)) / alpha;
            roots.push(linalg::normalize(&[t, C_ONE]));
        }
    } else {
        // x0 = 1: γ t² + 2β t + α = 0 in t = x1
        let disc = (beta * beta - alpha * gamma).sqrt();
        for sign in [1.0, -1.0] {
            let t = (-beta + disc * Complex64::new(sign, 0.0)) / gamma;
            roots.push(linalg::normalize(&[C_ONE, t]));
        }
    }
    Some(roots)
}

/// Splits a product (or near-product) two-qubit vector into its local
/// factors via the leading Schmidt pair.
fn schmidt_factors(v: &[C64]) -> (Vec<C64>, Vec<C64>, f64) {
    let joint = linalg::outer(v, v);
    let rho_s = linalg::partial_trace(&joint, (2, 2), linalg::Subsystem::Environment).unwrap();
    let spec = hermitian_eig_or_panic(&rho_s);
    let s_factor = spec.eigenvector(0);
    // E factor: <s⊗e_k | v>
    let mut e_factor = vec![C_ZERO; 2];
    for k in 0..2 {
        let mut acc = C_ZERO;
        for i in 0..2 {
            acc += s_factor[i].conj() * v[i * 2 + k];
        }
        e_factor[k] = acc;
    }
    let impurity = 1.0 - spec.eigenvalues[0];
    (s_factor, linalg::normalize(&e_factor), impurity)
}

fn hermitian_eig_or_panic(m: &ComplexMatrix) -> linalg::HermitianSpectrum {
    linalg::hermitian_eig_tol(m, 1e-6).expect("reduced state is Hermitian")
}

/// Pattern violation score for one choice of E-input basis. Zero means the
/// four product-to-product mappings are realized.
fn pattern_score(u: &UnitaryGate, q: &[C64]) -> f64 {
    let qp = orth_qubit(q);
    let branch = |qv: &[C64]| -> Option<Vec<(Vec<C64>, Vec<C64>, Vec<C64>, f64)>> {
        // candidates: (s_in, s_out, e_out, penalty)
        match product_input_rays(u, qv) {
            Some(rays) => Some(
                rays.iter()
                    .map(|x| {
                        let out = u.apply(&linalg::kron_vec(x, qv));
                        let (p, e, imp) = schmidt_factors(&out);
                        (x.clone(), p, e, imp)
                    })
                    .collect(),
            ),
            None => {
                // all products: pick the computational S-basis as inputs
                Some(
                    (0..2)
                        .map(|i| {
                            let x = linalg::ket(2, i);
                            let out = u.apply(&linalg::kron_vec(&x, qv));
                            let (p, e, imp) = schmidt_factors(&out);
                            (x, p, e, imp)
                        })
                        .collect(),
                )
            }
        }
    };
    let (c, d) = match (branch(q), branch(&qp)) {
        (Some(c), Some(d)) => (c, d),
        _ => return f64::INFINITY,
    };
    if c.len() < 2 || d.len() < 2 {
        return f64::INFINITY;
    }
    // match d-branch output basis onto c-branch output basis both ways
    let mut best = f64::INFINITY;
    for perm in [(0usize, 1usize), (1, 0)] {
        let mut score = 0.0f64;
        // product impurities
        score += c[0].3 + c[1].3 + d[perm.0].3 + d[perm.1].3;
        // S inputs orthonormal in each branch
        score += linalg::inner(&c[0].0, &c[1].0).norm();
        score += linalg::inner(&d[perm.0].0, &d[perm.1].0).norm();
        // shared S-output basis: c0/d0 aligned, c1/d1 aligned, pair orthogonal
        score += 1.0 - linalg::inner(&c[0].1, &d[perm.0].1).norm();
        score += 1.0 - linalg::inner(&c[1].1, &d[perm.1].1).norm();
        score += linalg::inner(&c[0].1, &c[1].1).norm();
        // E outputs orthogonal across branches within each S-output ray
        score += linalg::inner(&c[0].2, &d[perm.0].2).norm();
        score += linalg::inner(&c[1].2, &d[perm.1].2).norm();
        best = best.min(score);
    }
    best
}

/// Searches for the appendix product-basis pattern; `None` when no E-basis
/// realizes it (absence is a valid result).
pub fn prod_basis_pattern(u: &UnitaryGate) -> Result<Option<ProdBasisEvidence>> {
    if u.dims() != (2, 2) {
        return Err(QdynError::Dimension("pattern search needs a 2⊗2 gate".into()));
    }
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let n_theta = 25;
    let n_phi = 32;
    for it in 0..=n_theta {
        let theta = PI * it as f64 / n_theta as f64;
        for ip in 0..n_phi {
            let phi = 2.0 * PI * ip as f64 / n_phi as f64;
            let s = pattern_score(u, &bloch_ket(theta, phi));
            if s < best.0 {
                best = (s, theta, phi);
            }
        }
    }
    // Nelder-Mead refinement on the sphere angles.
    let refined = crate::optim::nelder_mead(
        |p| pattern_score(u, &bloch_ket(p[0], p[1])),
        &[best.1, best.2],
        0.05,
        400,
        1e-12,
    );
    let (score, q) = if refined.value < best.0 {
        (refined.value, bloch_ket(refined.point[0], refined.point[1]))
    } else {
        (best.0, bloch_ket(best.1, best.2))
    };
    if score > 1e-6 {
        return Ok(None);
    }
    // Rebuild the witness bases at the chosen q.
    let qp = orth_qubit(&q);
    let detail = |qv: &[C64]| -> Vec<(Vec<C64>, Vec<C64>, Vec<C64>)> {
        match product_input_rays(u, qv) {
            Some(rays) => rays
                .iter()
                .map(|x| {
                    let out = u.apply(&linalg::kron_vec(x, qv));
                    let (p, e, _) = schmidt_factors(&out);
                    (x.clone(), p, e)
                })
                .collect(),
            None => (0..2)
                .map(|i| {
                    let x = linalg::ket(2, i);
                    let out = u.apply(&linalg::kron_vec(&x, qv));
                    let (p, e, _) = schmidt_factors(&out);
                    (x, p, e)
                })
                .collect(),
        }
    };
    let c = detail(&q);
    let d = detail(&qp);
    Ok(Some(ProdBasisEvidence {
        e_in: (q, qp),
        s_in_first: (c[0].0.clone(), c[1].0.clone()),
        s_in_second: (d[0].0.clone(), d[1].0.clone()),
        s_out: (c[0].1.clone(), c[1].1.clone()),
        score,
    }))
}
