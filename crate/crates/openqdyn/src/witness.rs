//! Correlation certification from system-only data: the shift-unitary
//! construction, the maximally correlated compatibility structure, its
//! partial-transpose spectrum in closed form, the √γ threshold test, and a
//! finite-shot measurement protocol.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{QdynError, Result};
use crate::gates::{self, UnitaryGate};
use crate::genmodel::{self, FeasibilityResult, GenerationProblem, StateClass};
use crate::linalg::{self, hermitian_eig, ComplexMatrix, C64};
use crate::states::DensityMatrix;

/// Tolerance on the noiseless threshold comparison.
pub const STAT_TOL: f64 = 1e-9;

/// 95% two-sided normal quantile for the Wilson interval.
const Z95: f64 = 1.959_963_984_540_054;

/// The controlled-shift construction: U0|Ψ_i>|j> = |(i−j) mod d>|j> in the
/// eigenbasis of ρ_S, together with the certification threshold √γ(ρ_S).
#[derive(Debug, Clone)]
pub struct ShiftWitness {
    pub d: usize,
    /// eigenbasis of ρ_S, descending weights, padded past the rank
    pub eigenbasis: Vec<Vec<C64>>,
    pub rank: usize,
    pub u0: UnitaryGate,
    pub threshold: f64,
}

/// Deterministic eigenbasis of ρ_S: descending eigenvalues, and each
/// degenerate group re-drawn by Gram–Schmidt against the computational
/// order so repeated runs agree.
fn deterministic_eigenbasis(rho: &DensityMatrix) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
    let d = rho.side();
    let spec = hermitian_eig(rho.matrix())?;
    let mut basis: Vec<Vec<C64>> = (0..d).map(|k| spec.eigenvector(k)).collect();
    let mut k = 0;
    while k < d {
        let mut group = k + 1;
        while group < d && (spec.eigenvalues[group] - spec.eigenvalues[k]).abs() < 1e-9 {
            group += 1;
        }
        if group - k > 1 {
            // projector onto the degenerate eigenspace
            let mut proj = ComplexMatrix::zeros(d, d);
            for member in basis.iter().take(group).skip(k) {
                proj = proj.add(&linalg::outer(member, member));
            }
            let mut fresh: Vec<Vec<C64>> = Vec::new();
            for e in 0..d {
                let mut v = proj.matvec(&linalg::ket(d, e));
                for f in &fresh {
                    let c = linalg::inner(f, &v);
                    for (vi, fi) in v.iter_mut().zip(f) {
                        *vi -= c * fi;
                    }
                }
                if linalg::vec_norm(&v) > 1e-8 {
                    fresh.push(linalg::normalize(&v));
                }
                if fresh.len() == group - k {
                    break;
                }
            }
            if fresh.len() != group - k {
                return Err(QdynError::InvalidArgument(
                    "failed to span a degenerate eigenspace".into(),
                ));
            }
            basis.splice(k..group, fresh);
        }
        k = group;
    }
    Ok((spec.eigenvalues, basis))
}

/// Builds the shift witness for a genuinely mixed ρ_S living in dimension d.
pub fn build_shift(rho_s: &DensityMatrix, d: usize) -> Result<ShiftWitness> {
    if rho_s.side() != d {
        return Err(QdynError::Dimension(format!(
            "ρ_S must live in dimension {d}"
        )));
    }
    let rank = rho_s.rank();
    if rank < 2 {
        return Err(QdynError::InvalidArgument(
            "the shift construction needs a genuinely mixed ρ_S (rank ≥ 2)".into(),
        ));
    }
    let (_, basis) = deterministic_eigenbasis(rho_s)?;
    // V maps |i> to |Ψ_i>; U0 = shift(d)·(V†⊗I)
    let mut v = ComplexMatrix::zeros(d, d);
    for (i, psi) in basis.iter().enumerate() {
        for r in 0..d {
            v[(r, i)] = psi[r];
        }
    }
    let m = gates::shift(d)
        .matrix()
        .mul(&linalg::tensor(&v.dagger(), &ComplexMatrix::identity(d)));
    let u0 = UnitaryGate::new(m, (d, d))?;
    Ok(ShiftWitness {
        d,
        eigenbasis: basis,
        rank,
        u0,
        threshold: rho_s.purity().sqrt(),
    })
}

/// Maximally correlated coefficient matrix: ρ_SE = Σ α_ij|Ψ_i,i><Ψ_j,j|.
#[derive(Debug, Clone)]
pub struct MaxCorrState {
    pub alpha: ComplexMatrix,
}

impl MaxCorrState {
    pub fn new(alpha: ComplexMatrix) -> Result<Self> {
        if !alpha.is_square() {
            return Err(QdynError::Dimension("alpha must be square".into()));
        }
        if alpha.herm_deviation() > 1e-9 {
            return Err(QdynError::NotHermitian {
                deviation: alpha.herm_deviation(),
                tolerance: 1e-9,
            });
        }
        if (alpha.trace().re - 1.0).abs() > 1e-9 {
            return Err(QdynError::InvalidState("alpha must have unit trace".into()));
        }
        let min = *hermitian_eig(&alpha)?.eigenvalues.last().unwrap();
        if min < -1e-9 {
            return Err(QdynError::InvalidState(format!(
                "alpha has negative eigenvalue {min:.3e}"
            )));
        }
        Ok(Self { alpha })
    }

    /// Realizes Σ α_ij|Ψ_i,i><Ψ_j,j| in dimension d ≥ r with the given
    /// eigenbasis.
    pub fn embed(&self, basis: &[Vec<C64>], d: usize) -> Result<DensityMatrix> {
        let r = self.alpha.rows();
        if basis.len() < r || d < r {
            return Err(QdynError::Dimension("basis shorter than alpha".into()));
        }
        let mut m = ComplexMatrix::zeros(d * d, d * d);
        for i in 0..r {
            let vi = linalg::kron_vec(&basis[i], &linalg::ket(d, i));
            for j in 0..r {
                let vj = linalg::kron_vec(&basis[j], &linalg::ket(d, j));
                let o = linalg::outer(&vi, &vj).scale(self.alpha[(i, j)]);
                m = m.add(&o);
            }
        }
        DensityMatrix::new(m, vec![d, d])
    }
}

/// Partial-transpose spectrum of a maximally correlated state in closed
/// form: {α_ii} ∪ {±|α_ij| : i<j}, padded with zeros to the full d².
pub fn ppt_spectrum_max_corr(alpha: &ComplexMatrix, d: usize) -> Result<Vec<f64>> {
    let state = MaxCorrState::new(alpha.clone())?;
    let r = state.alpha.rows();
    if d < r {
        return Err(QdynError::Dimension("d must cover the rank".into()));
    }
    let mut spectrum = Vec::with_capacity(d * d);
    for i in 0..r {
        spectrum.push(alpha[(i, i)].re);
    }
    for i in 0..r {
        for j in (i + 1)..r {
            let a = alpha[(i, j)].norm();
            spectrum.push(a);
            spectrum.push(-a);
        }
    }
    spectrum.resize(d * d, 0.0);
    spectrum.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(spectrum)
}

/// Entangled iff any off-diagonal coherence survives.
pub fn max_corr_entangled(alpha: &ComplexMatrix) -> bool {
    let r = alpha.rows();
    (0..r).any(|i| ((i + 1)..r).any(|j| alpha[(i, j)].norm() > 1e-12))
}

#[derive(Debug, Clone)]
pub struct CompatibleReport {
    pub feasibility: FeasibilityResult,
    /// weight of the solver witness inside span{|Ψ_i,i>}
    pub max_corr_overlap: f64,
}

/// Checks that every joint state compatible with (tr_E = ρ_S, shift output
/// |0><0|) is maximally correlated, by solving the ANY-class feasibility
/// problem and measuring the witness's weight in span{|Ψ_i,i>}.
pub fn compatible_states(w: &ShiftWitness, rho_s: &DensityMatrix) -> Result<CompatibleReport> {
    let target = DensityMatrix::pure(&linalg::ket(w.d, 0), vec![w.d])?;
    let p = GenerationProblem::new(w.u0.clone(), rho_s.clone(), target, StateClass::Any)?;
    let feasibility = genmodel::solve_feasibility(&p)?;
    let overlap = match &feasibility.witness {
        Some(state) => {
            let mut proj = ComplexMatrix::zeros(w.d * w.d, w.d * w.d);
            for (i, psi) in w.eigenbasis.iter().enumerate() {
                let v = linalg::kron_vec(psi, &linalg::ket(w.d, i));
                proj = proj.add(&linalg::outer(&v, &v));
            }
            proj.mul(state.matrix()).trace().re
        }
        None => 0.0,
    };
    Ok(CompatibleReport {
        feasibility,
        max_corr_overlap: overlap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CorrelationVerdict {
    #[serde(rename = "CORRELATED")]
    Correlated,
    #[serde(rename = "INCONCLUSIVE")]
    Inconclusive,
}

impl std::fmt::Display for CorrelationVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CorrelationVerdict::Correlated => write!(f, "CORRELATED"),
            CorrelationVerdict::Inconclusive => write!(f, "INCONCLUSIVE"),
        }
    }
}

/// Noiseless threshold test: <0|ρ_S′|0> above √γ(ρ_S) certifies that the
/// preparation was not a product state. Never claims the converse.
pub fn theorem3_certify(rho_s: &DensityMatrix, observed: f64) -> Result<CorrelationVerdict> {
    if !(0.0..=1.0).contains(&observed) {
        return Err(QdynError::InvalidArgument(
            "observed probability must lie in [0,1]".into(),
        ));
    }
    let threshold = rho_s.purity().sqrt();
    Ok(if observed > threshold + STAT_TOL {
        CorrelationVerdict::Correlated
    } else {
        CorrelationVerdict::Inconclusive
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProtocolTranscript {
    pub threshold: f64,
    pub shots: usize,
    pub count0: usize,
    pub estimate: f64,
    pub ci: [f64; 2],
    pub verdict: CorrelationVerdict,
}

fn wilson_interval(count: usize, shots: usize) -> [f64; 2] {
    let n = shots as f64;
    let p = count as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    [(center - half).max(0.0), (center + half).min(1.0)]
}

/// Finite-shot protocol: build the shift unitary from the reduction of the
/// hidden state, evolve, sample the |0> outcome, and certify only when the
/// Wilson 95% lower bound clears the threshold.
pub fn simulate_protocol(
    hidden: &DensityMatrix,
    shots: usize,
    seed: u64,
) -> Result<ProtocolTranscript> {
    if shots == 0 {
        return Err(QdynError::InvalidArgument("shots must be ≥ 1".into()));
    }
    if hidden.dims().len() != 2 || hidden.dims()[0] != hidden.dims()[1] {
        return Err(QdynError::Dimension(
            "hidden state must be bipartite with d_S = d_E".into(),
        ));
    }
    let d = hidden.dims()[0];
    let rho_s = DensityMatrix::new(
        linalg::partial_trace(hidden.matrix(), (d, d), linalg::Subsystem::Environment)?,
        vec![d],
    )?;
    let w = build_shift(&rho_s, d)?;
    let (_, rho_sp) = genmodel::forward(&w.u0, hidden)?;
    let p0 = rho_sp.matrix()[(0, 0)].re.clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut count0 = 0usize;
    for _ in 0..shots {
        if rng.gen::<f64>() < p0 {
            count0 += 1;
        }
    }
    let ci = wilson_interval(count0, shots);
    let verdict = if ci[0] > w.threshold {
        CorrelationVerdict::Correlated
    } else {
        CorrelationVerdict::Inconclusive
    };
    Ok(ProtocolTranscript {
        threshold: w.threshold,
        shots,
        count0,
        estimate: count0 as f64 / shots as f64,
        ci,
        verdict,
    })
}
