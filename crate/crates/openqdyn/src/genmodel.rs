//! The generation engine: forward reduced dynamics, eigenstate compatibility
//! bounds, purity limits, and feasibility solvers over the four
//! initial-state classes (arbitrary, separable, quantum-classical, product).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{QdynError, Result};
use crate::gates::{self, UnitaryGate};
use crate::linalg::{
    self, hermitian_eig, hermitian_eig_tol, trace_norm, ComplexMatrix, Subsystem, C64, C_ONE,
    C_ZERO,
};
use crate::optim;
use crate::states::{DensityMatrix, RANK_TOL};

/// Feasibility threshold on the combined constraint residual (full ||·||₁).
pub const FEAS_TOL: f64 = 1e-7;

/// Product-search threshold on the minimized objective.
pub const PRODUCT_TOL: f64 = 1e-6;

/// Required margin of the separating-hyperplane certificate.
pub const CERT_MARGIN: f64 = 1e-6;

/// Eigenvalues above this count toward the support of a state.
pub const SUPPORT_EIG_TOL: f64 = 1e-7;

/// Component of |φ> outside the support beyond this collapses τ to zero.
pub const SUPPORT_COMPONENT_TOL: f64 = 1e-6;

/// Iteration cap of one Dykstra solve.
pub const MAX_DYKSTRA_ITERS: usize = 10_000;

/// Best-basis residual above which an exhausted QC grid search is read as
/// infeasible (the residual is Lipschitz in the basis angles, so a floor
/// this far above feasTol cannot hide a feasible basis between grid points).
pub const QC_INFEAS_RESIDUAL: f64 = 1e-4;

// ---- problem and result types ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StateClass {
    #[serde(rename = "ANY")]
    Any,
    #[serde(rename = "SEPARABLE")]
    Separable,
    #[serde(rename = "QC")]
    Qc,
    #[serde(rename = "PRODUCT")]
    Product,
}

impl std::str::FromStr for StateClass {
    type Err = QdynError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "any" => Ok(StateClass::Any),
            "separable" => Ok(StateClass::Separable),
            "qc" => Ok(StateClass::Qc),
            "product" => Ok(StateClass::Product),
            other => Err(QdynError::InvalidArgument(format!(
                "unknown state class '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenerationProblem {
    pub u: UnitaryGate,
    pub rho_s: DensityMatrix,
    pub rho_s_prime: DensityMatrix,
    pub class: StateClass,
}

impl GenerationProblem {
    pub fn new(
        u: UnitaryGate,
        rho_s: DensityMatrix,
        rho_s_prime: DensityMatrix,
        class: StateClass,
    ) -> Result<Self> {
        let (ds, _de) = u.dims();
        if rho_s.side() != ds || rho_s_prime.side() != ds {
            return Err(QdynError::Dimension(format!(
                "system states must have dim {ds} to match the gate"
            )));
        }
        Ok(Self {
            u,
            rho_s,
            rho_s_prime,
            class,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FeasibilityStatus {
    #[serde(rename = "FEASIBLE")]
    Feasible,
    #[serde(rename = "INFEASIBLE")]
    Infeasible,
    #[serde(rename = "UNDECIDED")]
    Undecided,
}

impl std::fmt::Display for FeasibilityStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FeasibilityStatus::Feasible => "FEASIBLE",
            FeasibilityStatus::Infeasible => "INFEASIBLE",
            FeasibilityStatus::Undecided => "UNDECIDED",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityResult {
    pub status: FeasibilityStatus,
    pub witness: Option<DensityMatrix>,
    /// combined constraint violation in the full trace norm
    pub residual: f64,
    pub iterations: usize,
    /// minimized trace-norm objective of the product search
    pub min_objective: Option<f64>,
}

// ---- forward dynamics ----

/// Reduced dynamics of a joint state: (tr_E ρ, tr_E UρU†).
pub fn forward(u: &UnitaryGate, rho_se: &DensityMatrix) -> Result<(DensityMatrix, DensityMatrix)> {
    let (ds, de) = u.dims();
    if rho_se.dims() != [ds, de] {
        return Err(QdynError::Dimension(format!(
            "joint state dims {:?} do not match the gate {ds}x{de}",
            rho_se.dims()
        )));
    }
    let rho_s = linalg::partial_trace(rho_se.matrix(), (ds, de), Subsystem::Environment)?;
    let out = u.conjugate(rho_se.matrix());
    let rho_sp = linalg::partial_trace(&out, (ds, de), Subsystem::Environment)?;
    Ok((
        DensityMatrix::new(rho_s, vec![ds])?,
        DensityMatrix::new(rho_sp, vec![ds])?,
    ))
}

// ---- τ and the eigenstate bound ----

/// Maximal ensemble weight of |φ> in ρ: 1/<φ|ρ⁻¹|φ> on the support of ρ,
/// zero when |φ> leaves the support.
pub fn tau(rho: &DensityMatrix, phi: &[C64]) -> Result<f64> {
    let n = rho.side();
    if phi.len() != n {
        return Err(QdynError::Dimension("vector length must match state".into()));
    }
    if (linalg::vec_norm(phi) - 1.0).abs() > 1e-9 {
        return Err(QdynError::InvalidArgument("|φ> must be normalized".into()));
    }
    let spec = hermitian_eig(rho.matrix())?;
    let mut inside = 0.0f64;
    let mut inv_quad = 0.0f64;
    for (k, &lam) in spec.eigenvalues.iter().enumerate() {
        if lam > SUPPORT_EIG_TOL {
            let overlap = linalg::inner(&spec.eigenvector(k), phi).norm_sqr();
            inside += overlap;
            inv_quad += overlap / lam;
        }
    }
    let outside = (1.0 - inside).max(0.0).sqrt();
    if outside > SUPPORT_COMPONENT_TOL {
        return Ok(0.0);
    }
    Ok((1.0 / inv_quad).clamp(0.0, 1.0))
}

/// An eigenpair of a unitary, U|v> = e^{iθ}|v>.
#[derive(Debug, Clone)]
pub struct UnitaryEigenpair {
    pub phase: f64,
    pub vector: Vec<C64>,
    /// true when the eigenvalue is shared, making the vector basis-dependent
    pub degenerate: bool,
}

/// Full eigensystem of a unitary via joint diagonalization of its Hermitian
/// and anti-Hermitian parts.
pub fn unitary_eigensystem(u: &UnitaryGate) -> Result<Vec<UnitaryEigenpair>> {
    let m = u.matrix();
    let n = m.rows();
    let a = m.add(&m.dagger()).scale(Complex64::new(0.5, 0.0));
    let b = m.sub(&m.dagger()).scale(Complex64::new(0.0, -0.5));
    let scale = m.frobenius_norm().max(1.0);
    for weight in [0.618_033_988_749_894_9, 1.0, 0.287_416_5, 2.113_248_7, 0.0] {
        let mix = a.add(&b.scale(Complex64::new(weight, 0.0)));
        let spec = match hermitian_eig(&mix) {
            Ok(s) => s,
            Err(_) => continue,
        };
        let mut v = ComplexMatrix::zeros(n, n);
        for j in 0..n {
            let col = spec.eigenvector(j);
            for i in 0..n {
                v[(i, j)] = col[i];
            }
        }
        let d = v.dagger().mul(m).mul(&v);
        let mut off = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off = off.max(d[(i, j)].norm());
                }
            }
        }
        if off < 1e-9 * scale {
            let evals: Vec<C64> = (0..n).map(|i| d[(i, i)]).collect();
            let pairs: Vec<UnitaryEigenpair> = (0..n)
                .map(|j| {
                    let degenerate = (0..n)
                        .any(|k| k != j && (evals[k] - evals[j]).norm() < 1e-7);
                    UnitaryEigenpair {
                        phase: evals[j].arg(),
                        vector: v.column(j),
                        degenerate,
                    }
                })
                .collect();
            return Ok(pairs);
        }
    }
    Err(QdynError::InvalidArgument(
        "failed to diagonalize the unitary".into(),
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct PerK {
    pub k: usize,
    pub lower: f64,
    pub observed: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone)]
pub struct Lemma1Report {
    pub phase: f64,
    pub eigenvector: Vec<C64>,
    pub tau: f64,
    pub basis_dependent: bool,
    pub per_k: Vec<PerK>,
}

impl Lemma1Report {
    pub fn all_satisfied(&self) -> bool {
        self.per_k.iter().all(|e| e.satisfied)
    }
}

/// Eigenstate compatibility check: for every eigenstate |φ> of U,
/// τ(ρ_SE, φ)·λ_k(tr_E|φ><φ|) must not exceed λ_k(ρ_S′).
pub fn lemma1_check(
    u: &UnitaryGate,
    rho_se: &DensityMatrix,
    rho_s_prime: &DensityMatrix,
) -> Result<Vec<Lemma1Report>> {
    let (ds, de) = u.dims();
    if rho_se.side() != ds * de || rho_s_prime.side() != ds {
        return Err(QdynError::Dimension("dims must match the gate".into()));
    }
    let observed = hermitian_eig(rho_s_prime.matrix())?.eigenvalues;
    let mut reports = Vec::new();
    for pair in unitary_eigensystem(u)? {
        let t = tau(rho_se, &pair.vector)?;
        let marginal = linalg::partial_trace(
            &linalg::outer(&pair.vector, &pair.vector),
            (ds, de),
            Subsystem::Environment,
        )?;
        let sigma = hermitian_eig(&marginal)?.eigenvalues;
        let per_k = (0..ds)
            .map(|k| {
                let lower = t * sigma[k];
                PerK {
                    k,
                    lower,
                    observed: observed[k],
                    satisfied: lower <= observed[k] + 1e-8,
                }
            })
            .collect();
        reports.push(Lemma1Report {
            phase: pair.phase,
            eigenvector: pair.vector,
            tau: t,
            basis_dependent: pair.degenerate,
            per_k,
        });
    }
    Ok(reports)
}

/// The admissible window for p in the diagonal purity-extraction scenario
/// ρ_S′ = p|0><0| + (1−p)|1><1| when U has an eigenstate with maximally
/// mixed marginal: p ∈ [τ/2, 1−τ/2] ∩ [0,1].
pub fn lemma1_p_window(tau: f64) -> (f64, f64) {
    ((tau / 2.0).max(0.0), (1.0 - tau / 2.0).min(1.0))
}

/// Upper bound on the achievable purity of ρ_S′ for an initially
/// uncorrelated bath I/d_E, maximized over a computed eigenbasis of U
/// (plus sampled vectors in degenerate eigenspaces — more eigenstates only
/// tighten the bound).
pub fn purity_upper_bound(u: &UnitaryGate, rho_s: &DensityMatrix, d_e: usize) -> Result<f64> {
    let ds = rho_s.side();
    if u.dims() != (ds, d_e) {
        return Err(QdynError::Dimension("gate dims must be (d_S, d_E)".into()));
    }
    let spec = hermitian_eig(rho_s.matrix())?;
    let r = spec
        .eigenvalues
        .iter()
        .filter(|&&x| x > RANK_TOL)
        .count()
        .max(1);
    let lam_r = spec.eigenvalues[r - 1];
    let pairs = unitary_eigensystem(u)?;
    let mut candidates: Vec<Vec<C64>> = pairs.iter().map(|p| p.vector.clone()).collect();
    // sample inside degenerate eigenspaces with a fixed generator
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let mut by_phase: Vec<(C64, Vec<usize>)> = Vec::new();
    for (idx, p) in pairs.iter().enumerate() {
        let ev = Complex64::from_polar(1.0, p.phase);
        match by_phase.iter_mut().find(|(e, _)| (*e - ev).norm() < 1e-7) {
            Some((_, members)) => members.push(idx),
            None => by_phase.push((ev, vec![idx])),
        }
    }
    for (_, members) in by_phase.iter().filter(|(_, m)| m.len() > 1) {
        for _ in 0..10 {
            let mut v = vec![C_ZERO; ds * d_e];
            for &idx in members {
                let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                for (i, vi) in v.iter_mut().enumerate() {
                    *vi += c * pairs[idx].vector[i];
                }
            }
            candidates.push(linalg::normalize(&v));
        }
    }
    let mut max_term = 0.0f64;
    for phi in &candidates {
        let marginal = linalg::partial_trace(
            &linalg::outer(phi, phi),
            (ds, d_e),
            Subsystem::Environment,
        )?;
        let lams = hermitian_eig(&marginal)?.eigenvalues;
        let term: f64 = lams.iter().take(r).map(|x| x * x).sum();
        max_term = max_term.max(term);
    }
    Ok(1.0 - (lam_r / (d_e as f64 * ds as f64)).powi(2) * max_term)
}

// ---- affine-set machinery for the Dykstra solver ----

/// Orthonormal basis of d×d Hermitian matrices under tr(AB).
fn hermitian_basis(d: usize) -> Vec<ComplexMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        let mut m = ComplexMatrix::zeros(d, d);
        m[(i, i)] = C_ONE;
        out.push(m);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let mut re = ComplexMatrix::zeros(d, d);
            re[(i, j)] = Complex64::new(s, 0.0);
            re[(j, i)] = Complex64::new(s, 0.0);
            out.push(re);
            let mut im = ComplexMatrix::zeros(d, d);
            im[(i, j)] = Complex64::new(0.0, -s);
            im[(j, i)] = Complex64::new(0.0, s);
            out.push(im);
        }
    }
    out
}

fn re_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.entries()
        .iter()
        .zip(b.entries())
        .map(|(x, y)| (x * y.conj()).re)
        .sum()
}

/// Orthogonal projector onto the affine set {X Hermitian : tr(F_j X)=b_j},
/// with the Gram pseudo-inverse precomputed once.
struct AffineProjector {
    funcs: Vec<ComplexMatrix>,
    targets: Vec<f64>,
    gram_pinv: Vec<Vec<f64>>,
}

impl AffineProjector {
    fn new(funcs: Vec<ComplexMatrix>, targets: Vec<f64>) -> Result<Self> {
        let n = funcs.len();
        let mut g = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = re_inner(&funcs[i], &funcs[j]);
                g[(i, j)] = Complex64::new(v, 0.0);
                g[(j, i)] = Complex64::new(v, 0.0);
            }
        }
        let spec = hermitian_eig(&g)?;
        let cutoff = 1e-10 * spec.eigenvalues[0].max(1.0);
        let mut pinv = vec![vec![0.0f64; n]; n];
        for (k, &lam) in spec.eigenvalues.iter().enumerate() {
            if lam > cutoff {
                let vk = spec.eigenvector(k);
                for i in 0..n {
                    for j in 0..n {
                        pinv[i][j] += (vk[i] * vk[j].conj()).re / lam;
                    }
                }
            }
        }
        Ok(Self {
            funcs,
            targets,
            gram_pinv: pinv,
        })
    }

    fn values(&self, x: &ComplexMatrix) -> Vec<f64> {
        self.funcs.iter().map(|f| re_inner(f, x)).collect()
    }

    fn project(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let vals = self.values(x);
        let n = self.funcs.len();
        let mut y = x.clone();
        for i in 0..n {
            let mut c = 0.0;
            for j in 0..n {
                c += self.gram_pinv[i][j] * (self.targets[j] - vals[j]);
            }
            if c != 0.0 {
                y = y.add(&self.funcs[i].scale(Complex64::new(c, 0.0)));
            }
        }
        y
    }

    /// Component of v inside span{F_j} (the orthogonal complement of the
    /// affine set's direction space).
    fn span_component(&self, v: &ComplexMatrix) -> ComplexMatrix {
        let vals = self.values(v);
        let n = self.funcs.len();
        let mut y = ComplexMatrix::zeros(v.rows(), v.cols());
        for i in 0..n {
            let mut c = 0.0;
            for j in 0..n {
                c += self.gram_pinv[i][j] * vals[j];
            }
            if c != 0.0 {
                y = y.add(&self.funcs[i].scale(Complex64::new(c, 0.0)));
            }
        }
        y
    }
}

fn symmetrize(x: &ComplexMatrix) -> ComplexMatrix {
    x.add(&x.dagger()).scale(Complex64::new(0.5, 0.0))
}

fn psd_project(x: &ComplexMatrix) -> Result<ComplexMatrix> {
    let spec = hermitian_eig_tol(&symmetrize(x), 1e-3)?;
    let n = x.rows();
    let mut y = ComplexMatrix::zeros(n, n);
    for (k, &lam) in spec.eigenvalues.iter().enumerate() {
        if lam > 0.0 {
            let v = spec.eigenvector(k);
            let o = linalg::outer(&v, &v).scale(Complex64::new(lam, 0.0));
            y = y.add(&o);
        }
    }
    Ok(y)
}

fn min_eigenvalue(x: &ComplexMatrix) -> Result<f64> {
    let spec = hermitian_eig_tol(&symmetrize(x), 1e-3)?;
    Ok(*spec.eigenvalues.last().unwrap())
}

fn max_eigenvalue(x: &ComplexMatrix) -> Result<f64> {
    let spec = hermitian_eig_tol(&symmetrize(x), 1e-3)?;
    Ok(spec.eigenvalues[0])
}

/// A PSD operator whose environment trace is rank deficient must vanish on
/// every row and column meeting (supp ρ)^⊥ ⊗ H_E. These zero-target
/// functionals make that implication explicit in the affine set; without
/// them a pure-marginal instance leaves the cyclic projection crawling
/// along the cone boundary.
fn support_functionals(rho: &DensityMatrix, de: usize) -> Vec<ComplexMatrix> {
    let spec = rho.spectral();
    let ds = rho.side();
    let kernel: Vec<bool> = spec.weights.iter().map(|&w| w < 1e-9).collect();
    if !kernel.iter().any(|&k| k) {
        return Vec::new();
    }
    let d = ds * de;
    // lifted orthonormal basis |v_k ⊗ e_m⟩ indexed by k*de + m
    let lifted: Vec<Vec<Complex64>> = (0..ds)
        .flat_map(|k| {
            let v = spec.states.column(k);
            (0..de).map(move |m| {
                let mut out = vec![C_ZERO; d];
                for (s, &vs) in v.iter().enumerate() {
                    out[s * de + m] = vs;
                }
                out
            })
        })
        .collect();
    let mut funcs = Vec::new();
    for a in 0..d {
        for b in a..d {
            if !kernel[a / de] && !kernel[b / de] {
                continue;
            }
            let o = linalg::outer(&lifted[a], &lifted[b]);
            funcs.push(symmetrize(&o.scale(Complex64::new(2.0, 0.0))));
            if a != b {
                funcs.push(symmetrize(&o.scale(Complex64::new(0.0, 2.0))));
            }
        }
    }
    funcs
}

/// Builds the constraint functionals of a generation problem: unit trace,
/// tr_E X = ρ_S, tr_E UXU† = ρ_S′ (pulled back through U).
fn generation_functionals(
    u: &UnitaryGate,
    rho_s: &DensityMatrix,
    rho_s_prime: &DensityMatrix,
) -> (Vec<ComplexMatrix>, Vec<f64>) {
    let (ds, de) = u.dims();
    let d = ds * de;
    let mut funcs = Vec::new();
    let mut targets = Vec::new();
    funcs.push(ComplexMatrix::identity(d));
    targets.push(1.0);
    let ident_e = ComplexMatrix::identity(de);
    for h in hermitian_basis(ds) {
        let lifted = linalg::tensor(&h, &ident_e);
        funcs.push(lifted.clone());
        targets.push(re_inner(&h, rho_s.matrix()));
        funcs.push(u.matrix().dagger().mul(&lifted).mul(u.matrix()));
        targets.push(re_inner(&h, rho_s_prime.matrix()));
    }
    for f in support_functionals(rho_s, de) {
        funcs.push(f);
        targets.push(0.0);
    }
    for f in support_functionals(rho_s_prime, de) {
        funcs.push(u.matrix().dagger().mul(&f).mul(u.matrix()));
        targets.push(0.0);
    }
    (funcs, targets)
}

fn generation_residual(
    x: &ComplexMatrix,
    u: &UnitaryGate,
    rho_s: &DensityMatrix,
    rho_s_prime: &DensityMatrix,
    ppt: bool,
    extra_funcs: &[ComplexMatrix],
) -> Result<f64> {
    let (ds, de) = u.dims();
    let marg = linalg::partial_trace(x, (ds, de), Subsystem::Environment)?;
    let out = linalg::partial_trace(&u.conjugate(x), (ds, de), Subsystem::Environment)?;
    let mut total = trace_norm(&marg.sub(rho_s.matrix()))
        + trace_norm(&out.sub(rho_s_prime.matrix()))
        + (x.trace().re - 1.0).abs();
    total += (-min_eigenvalue(x)?).max(0.0);
    if ppt {
        let pt = linalg::partial_transpose(x, (ds, de))?;
        total += (-min_eigenvalue(&pt)?).max(0.0);
    }
    let mut extra = 0.0;
    for f in extra_funcs {
        extra += re_inner(f, x).abs();
    }
    Ok(total + extra)
}

/// Dykstra-corrected cyclic projections between an affine set (the linear
/// constraints) and one or two spectrahedral cones.
struct DykstraEngine<'a> {
    affine: &'a AffineProjector,
    ppt_dims: Option<(usize, usize)>,
    x: ComplexMatrix,
    corrections: Vec<ComplexMatrix>,
}

impl<'a> DykstraEngine<'a> {
    fn new(affine: &'a AffineProjector, ppt_dims: Option<(usize, usize)>, x0: ComplexMatrix) -> Self {
        let d = x0.rows();
        let n_sets = if ppt_dims.is_some() { 3 } else { 2 };
        Self {
            affine,
            ppt_dims,
            x: x0,
            corrections: vec![ComplexMatrix::zeros(d, d); n_sets],
        }
    }

    fn cycle(&mut self) -> Result<()> {
        // set 0: affine
        let z = self.x.add(&self.corrections[0]);
        let y = self.affine.project(&z);
        self.corrections[0] = z.sub(&y);
        self.x = y;
        // set 1: PSD cone
        let z = self.x.add(&self.corrections[1]);
        let y = psd_project(&z)?;
        self.corrections[1] = z.sub(&y);
        self.x = y;
        // set 2: PPT cone
        if let Some(dims) = self.ppt_dims {
            let z = self.x.add(&self.corrections[2]);
            let pt = linalg::partial_transpose(&z, dims)?;
            let y = linalg::partial_transpose(&psd_project(&pt)?, dims)?;
            self.corrections[2] = z.sub(&y);
            self.x = y;
        }
        Ok(())
    }
}

/// Separating-hyperplane margin: positive margin proves the affine set and
/// the (trace-one slice of the) cone do not intersect.
fn infeasibility_margin(
    affine: &AffineProjector,
    x: &ComplexMatrix,
    ppt_dims: Option<(usize, usize)>,
) -> Result<f64> {
    let a = affine.project(x);
    // displacement from the affine point to the cone: for the separable
    // class the cone is PSD ∩ PPT, approximated by a short inner Dykstra
    // round (the margin test below stays sound regardless of how rough
    // this projection is)
    let c = match ppt_dims {
        None => psd_project(&a)?,
        Some(dims) => {
            let mut y = a.clone();
            let mut q0 = ComplexMatrix::zeros(a.rows(), a.cols());
            let mut q1 = q0.clone();
            for _ in 0..40 {
                let z = y.add(&q0);
                let p = psd_project(&z)?;
                q0 = z.sub(&p);
                let z = p.add(&q1);
                let pt = linalg::partial_transpose(&z, dims)?;
                y = linalg::partial_transpose(&psd_project(&pt)?, dims)?;
                q1 = z.sub(&y);
            }
            y
        }
    };
    let v = a.sub(&c);
    // restrict to the functional span so <v,·> is constant on the affine set
    let vp = affine.span_component(&v);
    let norm = vp.frobenius_norm();
    if norm < 1e-12 {
        return Ok(0.0);
    }
    let alpha = re_inner(&vp, &a);
    let mut beta = max_eigenvalue(&vp)?;
    if let Some(dims) = ppt_dims {
        let pt = linalg::partial_transpose(&vp, dims)?;
        beta = beta.min(max_eigenvalue(&pt)?);
    }
    Ok((alpha - beta) / norm)
}

fn cleanup_state(x: &ComplexMatrix, dims: Vec<usize>) -> Result<DensityMatrix> {
    let y = psd_project(x)?;
    let t = y.trace().re;
    DensityMatrix::new(y.scale(C_ONE / Complex64::new(t, 0.0)), dims)
}

/// Feasibility over the arbitrary or separable initial-state class.
pub fn solve_feasibility(p: &GenerationProblem) -> Result<FeasibilityResult> {
    let separable = match p.class {
        StateClass::Any => false,
        StateClass::Separable => true,
        _ => {
            return Err(QdynError::InvalidArgument(
                "solve_feasibility handles ANY and SEPARABLE; use the search routines for QC and PRODUCT".into(),
            ))
        }
    };
    let (ds, de) = p.u.dims();
    if separable && (ds != 2 || de != 2) {
        return Err(QdynError::Dimension(
            "the separable class relies on PPT exactness and needs 2⊗2".into(),
        ));
    }
    if ds > 4 || de > 4 {
        return Err(QdynError::Dimension("solver supports d_S, d_E ≤ 4".into()));
    }
    let ppt_dims = separable.then_some((ds, de));
    let (funcs, targets) = generation_functionals(&p.u, &p.rho_s, &p.rho_s_prime);
    let affine = AffineProjector::new(funcs, targets)?;
    let x0 = linalg::tensor(
        p.rho_s.matrix(),
        &ComplexMatrix::identity(de).scale(C_ONE / Complex64::new(de as f64, 0.0)),
    );
    let mut engine = DykstraEngine::new(&affine, ppt_dims, x0);
    let mut best_residual = f64::INFINITY;
    let mut last_improvement = 0usize;
    let mut iters = 0usize;
    while iters < MAX_DYKSTRA_ITERS {
        iters += 1;
        engine.cycle()?;
        let res = generation_residual(&engine.x, &p.u, &p.rho_s, &p.rho_s_prime, separable, &[])?;
        if res < best_residual - 1e-13 {
            best_residual = res;
            last_improvement = iters;
        }
        if res <= FEAS_TOL {
            let witness = cleanup_state(&engine.x, vec![ds, de])?;
            let wres = generation_residual(
                witness.matrix(),
                &p.u,
                &p.rho_s,
                &p.rho_s_prime,
                separable,
                &[],
            )?;
            if wres <= FEAS_TOL {
                return Ok(FeasibilityResult {
                    status: FeasibilityStatus::Feasible,
                    witness: Some(witness),
                    residual: wres,
                    iterations: iters,
                    min_objective: None,
                });
            }
        }
        let stalled = iters - last_improvement > 500 && best_residual > 10.0 * FEAS_TOL;
        if iters % 100 == 0 || stalled || iters == MAX_DYKSTRA_ITERS {
            let margin = infeasibility_margin(&affine, &engine.x, ppt_dims)?;
            if margin >= CERT_MARGIN {
                return Ok(FeasibilityResult {
                    status: FeasibilityStatus::Infeasible,
                    witness: None,
                    residual: best_residual,
                    iterations: iters,
                    min_objective: None,
                });
            }
            if stalled {
                break;
            }
        }
    }
    Ok(FeasibilityResult {
        status: FeasibilityStatus::Undecided,
        witness: None,
        residual: best_residual,
        iterations: iters,
    min_objective: None,
    })
}

// ---- product search ----

fn trace_norm_linear(base: &ComplexMatrix, parts: &[ComplexMatrix], m: &[f64]) -> f64 {
    let mut acc = base.clone();
    for (mi, pi) in m.iter().zip(parts) {
        if *mi != 0.0 {
            acc = acc.add(&pi.scale(Complex64::new(*mi, 0.0)));
        }
    }
    trace_norm(&acc)
}

fn clip_ball(m: &[f64]) -> Vec<f64> {
    let n = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
    if n > 0.5 {
        m.iter().map(|x| x * 0.5 / n).collect()
    } else {
        m.to_vec()
    }
}

/// Minimizes ||tr_E[U(ρ_S⊗ω)U†] − ρ_S′||₁ over the qubit Bloch ball by a
/// 21³ lattice plus simplex refinement from the best grid points. FEASIBLE
/// iff the minimum reaches the product threshold; the minimum itself is the
/// robustness ε.
pub fn search_product(p: &GenerationProblem) -> Result<FeasibilityResult> {
    let (ds, de) = p.u.dims();
    if de != 2 {
        return Err(QdynError::Dimension("product search needs d_E = 2".into()));
    }
    // reduced output is affine in the Bloch vector of ω
    let half = ComplexMatrix::identity(2).scale(Complex64::new(0.5, 0.0));
    let reduced = |omega: &ComplexMatrix| -> Result<ComplexMatrix> {
        let joint = linalg::tensor(p.rho_s.matrix(), omega);
        linalg::partial_trace(&p.u.conjugate(&joint), (ds, de), Subsystem::Environment)
    };
    let base = reduced(&half)?.sub(p.rho_s_prime.matrix());
    let paulis = [gates::pauli_x(), gates::pauli_y(), gates::pauli_z()];
    let parts: Vec<ComplexMatrix> = paulis
        .iter()
        .map(|s| reduced(s))
        .collect::<Result<Vec<_>>>()?;
    let objective = |m: &[f64]| -> f64 { trace_norm_linear(&base, &parts, &clip_ball(m)) };

    let n_axis = 21usize;
    let mut evals = 0usize;
    let mut scored: Vec<(f64, [f64; 3])> = Vec::new();
    for ix in 0..n_axis {
        let x = -0.5 + ix as f64 / (n_axis - 1) as f64;
        for iy in 0..n_axis {
            let y = -0.5 + iy as f64 / (n_axis - 1) as f64;
            for iz in 0..n_axis {
                let z = -0.5 + iz as f64 / (n_axis - 1) as f64;
                if x * x + y * y + z * z > 0.25 + 1e-12 {
                    continue;
                }
                evals += 1;
                scored.push((objective(&[x, y, z]), [x, y, z]));
            }
        }
    }
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut best = scored[0];
    for seed in scored.iter().take(5) {
        let r = optim::nelder_mead(|m| objective(m), &seed.1, 0.02, 400, 1e-13);
        evals += r.iterations;
        if r.value < best.0 {
            let m = clip_ball(&r.point);
            best = (r.value, [m[0], m[1], m[2]]);
        }
    }
    let feasible = best.0 <= PRODUCT_TOL;
    let witness = if feasible {
        let omega = crate::states::from_bloch(&crate::states::BlochVector::new(best.1)?);
        Some(DensityMatrix::new(
            linalg::tensor(p.rho_s.matrix(), omega.matrix()),
            vec![ds, de],
        )?)
    } else {
        None
    };
    Ok(FeasibilityResult {
        status: if feasible {
            FeasibilityStatus::Feasible
        } else {
            FeasibilityStatus::Infeasible
        },
        witness,
        residual: best.0,
        iterations: evals,
        min_objective: Some(best.0),
    })
}

// ---- QC search ----

fn basis_rotation(theta: f64, phi: f64) -> ComplexMatrix {
    // columns |β>, |β⊥>
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    ComplexMatrix::from_rows(&[
        vec![Complex64::new(c, 0.0), -Complex64::from_polar(s, -phi)],
        vec![Complex64::from_polar(s, phi), Complex64::new(c, 0.0)],
    ])
}

/// Functionals whose vanishing forces block-diagonality in the E
/// computational basis.
fn off_block_functionals(ds: usize) -> Vec<ComplexMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::new();
    let d = ds * 2;
    for i in 0..ds {
        for j in 0..ds {
            let (r, c) = (2 * i, 2 * j + 1);
            let mut re = ComplexMatrix::zeros(d, d);
            re[(r, c)] = Complex64::new(s, 0.0);
            re[(c, r)] = Complex64::new(s, 0.0);
            out.push(re);
            let mut im = ComplexMatrix::zeros(d, d);
            im[(r, c)] = Complex64::new(0.0, -s);
            im[(c, r)] = Complex64::new(0.0, s);
            out.push(im);
        }
    }
    out
}

struct QcBasisOutcome {
    residual: f64,
    x: ComplexMatrix,
    iterations: usize,
}

fn qc_basis_solve(
    p: &GenerationProblem,
    theta: f64,
    phi: f64,
    max_iters: usize,
) -> Result<QcBasisOutcome> {
    let (ds, de) = p.u.dims();
    let w = linalg::tensor(&ComplexMatrix::identity(ds), &basis_rotation(theta, phi));
    let u_rot = UnitaryGate::new(p.u.matrix().mul(&w), (ds, de))?;
    let (mut funcs, mut targets) = generation_functionals(&u_rot, &p.rho_s, &p.rho_s_prime);
    let extra = off_block_functionals(ds);
    for f in &extra {
        funcs.push(f.clone());
        targets.push(0.0);
    }
    let affine = AffineProjector::new(funcs, targets)?;
    let x0 = linalg::tensor(
        p.rho_s.matrix(),
        &ComplexMatrix::identity(de).scale(Complex64::new(0.5, 0.0)),
    );
    let mut engine = DykstraEngine::new(&affine, None, x0);
    let mut best = f64::INFINITY;
    let mut best_x = engine.x.clone();
    let mut last_improvement = 0usize;
    let mut iters = 0usize;
    while iters < max_iters {
        iters += 1;
        engine.cycle()?;
        let res =
            generation_residual(&engine.x, &u_rot, &p.rho_s, &p.rho_s_prime, false, &extra)?;
        if res < best - 1e-12 {
            best = res;
            best_x = engine.x.clone();
            last_improvement = iters;
        }
        if best <= FEAS_TOL || iters - last_improvement > 40 {
            break;
        }
    }
    Ok(QcBasisOutcome {
        residual: best,
        x: best_x,
        iterations: iters,
    })
}

/// Feasibility over quantum-classical initial states: the E basis is swept
/// over a 64×64 sphere grid, each basis giving a small block-diagonal
/// convex feasibility problem.
pub fn search_qc(p: &GenerationProblem) -> Result<FeasibilityResult> {
    let (ds, de) = p.u.dims();
    if de != 2 {
        return Err(QdynError::Dimension("QC search needs d_E = 2".into()));
    }
    let grid = 64usize;
    let mut candidates: Vec<(f64, f64, f64)> = Vec::new();
    let mut total_iters = 0usize;
    for it in 0..grid {
        let theta = PI * it as f64 / (grid - 1) as f64;
        for ip in 0..grid {
            let phi = 2.0 * PI * ip as f64 / grid as f64;
            let out = qc_basis_solve(p, theta, phi, 150)?;
            total_iters += out.iterations;
            candidates.push((out.residual, theta, phi));
            if out.residual <= FEAS_TOL {
                return qc_finish(p, theta, phi, total_iters);
            }
        }
    }
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut best = candidates[0];
    for &(_, theta, phi) in candidates.iter().take(6) {
        let out = qc_basis_solve(p, theta, phi, 5000)?;
        total_iters += out.iterations;
        if out.residual <= FEAS_TOL {
            return qc_finish(p, theta, phi, total_iters);
        }
        if out.residual < best.0 {
            best = (out.residual, theta, phi);
        }
    }
    // refine the basis angles themselves
    let mut nm_iters = 0usize;
    let refined = optim::nelder_mead(
        |ang| {
            let out = qc_basis_solve(p, ang[0], ang[1], 1000).map(|o| {
                nm_iters += o.iterations;
                o.residual
            });
            out.unwrap_or(f64::INFINITY)
        },
        &[best.1, best.2],
        0.02,
        60,
        1e-12,
    );
    total_iters += nm_iters;
    if refined.value <= FEAS_TOL {
        return qc_finish(p, refined.point[0], refined.point[1], total_iters);
    }
    let best_res = best.0.min(refined.value);
    let status = if best_res >= QC_INFEAS_RESIDUAL {
        FeasibilityStatus::Infeasible
    } else {
        FeasibilityStatus::Undecided
    };
    let _ = ds;
    Ok(FeasibilityResult {
        status,
        witness: None,
        residual: best_res,
        iterations: total_iters,
        min_objective: None,
    })
}

fn qc_finish(
    p: &GenerationProblem,
    theta: f64,
    phi: f64,
    prior_iters: usize,
) -> Result<FeasibilityResult> {
    let (ds, de) = p.u.dims();
    let out = qc_basis_solve(p, theta, phi, MAX_DYKSTRA_ITERS)?;
    // zero the off-blocks exactly, clean up, rotate back
    let mut x = out.x.clone();
    for i in 0..ds {
        for j in 0..ds {
            x[(2 * i, 2 * j + 1)] = C_ZERO;
            x[(2 * i + 1, 2 * j)] = C_ZERO;
        }
    }
    let cleaned = cleanup_state(&x, vec![ds, de])?;
    let w = linalg::tensor(&ComplexMatrix::identity(ds), &basis_rotation(theta, phi));
    let witness_m = cleaned.matrix().conjugated_by(&w);
    let witness = DensityMatrix::new(witness_m, vec![ds, de])?;
    let res = generation_residual(witness.matrix(), &p.u, &p.rho_s, &p.rho_s_prime, false, &[])?;
    if res > FEAS_TOL {
        return Ok(FeasibilityResult {
            status: FeasibilityStatus::Undecided,
            witness: None,
            residual: res,
            iterations: prior_iters + out.iterations,
            min_objective: None,
        });
    }
    Ok(FeasibilityResult {
        status: FeasibilityStatus::Feasible,
        witness: Some(witness),
        residual: res,
        iterations: prior_iters + out.iterations,
        min_objective: None,
    })
}

/// Single entry point the scenario runner uses: dispatch on the class.
pub fn solve(p: &GenerationProblem) -> Result<FeasibilityResult> {
    match p.class {
        StateClass::Any | StateClass::Separable => solve_feasibility(p),
        StateClass::Qc => search_qc(p),
        StateClass::Product => search_product(p),
    }
}

// ---- the two-parameter family ----

/// |Φ₄(γ)> = √½(|01> − e^{−iγ}|10>)
pub fn phi4_gamma(gamma: f64) -> Vec<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    vec![
        C_ZERO,
        Complex64::new(s, 0.0),
        -Complex64::from_polar(s, -gamma),
        C_ZERO,
    ]
}

/// p|Φ₃><Φ₃| + (1−p)|Φ₄(γ)><Φ₄(γ)|
pub fn family_mixture(p: f64, gamma: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(QdynError::InvalidArgument("p must lie in [0,1]".into()));
    }
    let phi3 = gates::magic_state(2);
    let phi4 = phi4_gamma(gamma);
    let m = linalg::outer(&phi3, &phi3)
        .scale(Complex64::new(p, 0.0))
        .add(&linalg::outer(&phi4, &phi4).scale(Complex64::new(1.0 - p, 0.0)));
    DensityMatrix::new(m, vec![2, 2])
}

#[derive(Debug, Clone)]
pub enum FamilySolutions {
    /// cos2θ ≠ 0: the transformation I/2 → |0><0| has the single generator
    /// |Φ₃><Φ₃|.
    Unique { witness: DensityMatrix },
    /// cos2θ = 0: the one-parameter family p|Φ₃><Φ₃| + (1−p)|Φ₄(γ)><Φ₄(γ)|,
    /// separable only at p = 1/2, never a product.
    OneParameter { gamma: f64, separable_p: f64 },
}

/// Closed-form solution set of I/2 → |0><0| under U(θ,γ).
pub fn family_analyze(theta: f64, gamma: f64) -> FamilySolutions {
    if (2.0 * theta).cos().abs() <= 1e-9 {
        FamilySolutions::OneParameter {
            gamma,
            separable_p: 0.5,
        }
    } else {
        let phi3 = gates::magic_state(2);
        FamilySolutions::Unique {
            witness: DensityMatrix::pure(&phi3, vec![2, 2]).expect("|Φ₃> is a unit vector"),
        }
    }
}

// ---- lemma2_check and robustness ----

#[derive(Debug, Clone)]
pub struct Lemma2Verdict {
    pub class: crate::magic::ClassLabel,
    pub product: FeasibilityResult,
    /// product feasibility implies the swap class
    pub consistent: bool,
}

/// Necessary-condition check for purity extraction from a rank-2 system
/// state with an uncorrelated environment: feasibility forces U into the
/// swap class.
pub fn lemma2_check(u: &UnitaryGate, rho_s: &DensityMatrix, psi: &[C64]) -> Result<Lemma2Verdict> {
    if u.dims() != (2, 2) {
        return Err(QdynError::Dimension("lemma2_check needs a 2⊗2 gate".into()));
    }
    if rho_s.rank() != 2 {
        return Err(QdynError::InvalidArgument(
            "ρ_S must have rank 2".into(),
        ));
    }
    let target = DensityMatrix::pure(psi, vec![2])?;
    let class = crate::magic::classify(u)?.label;
    let product = search_product(&GenerationProblem::new(
        u.clone(),
        rho_s.clone(),
        target,
        StateClass::Product,
    )?)?;
    let consistent = product.status != FeasibilityStatus::Feasible
        || class == crate::magic::ClassLabel::Swap;
    Ok(Lemma2Verdict {
        class,
        product,
        consistent,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RobustnessReport {
    /// distance of the transformation from product-generability
    pub epsilon: f64,
    /// any ρ_SE within δ = ε/2 of a product ρ_S⊗ω misses ρ_S′ by more than
    /// ε/2 (the forward map is 1-Lipschitz in ||·||₁)
    pub delta: f64,
}

pub fn robustness_epsilon(
    u: &UnitaryGate,
    rho_s: &DensityMatrix,
    rho_s_prime: &DensityMatrix,
) -> Result<RobustnessReport> {
    let p = GenerationProblem::new(
        u.clone(),
        rho_s.clone(),
        rho_s_prime.clone(),
        StateClass::Product,
    )?;
    let r = search_product(&p)?;
    let eps = r.min_objective.expect("product search reports its minimum");
    Ok(RobustnessReport {
        epsilon: eps,
        delta: eps / 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{inner, ket, kron_vec, normalize, outer, vec_norm};
    use crate::states::{self, from_bloch, BlochVector};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn intro_psi() -> Vec<C64> {
        // √½(|0+> + |1−>) in the S⊗E product basis
        let s = 0.5;
        vec![
            Complex64::new(s, 0.0),
            Complex64::new(s, 0.0),
            Complex64::new(s, 0.0),
            Complex64::new(-s, 0.0),
        ]
    }

    #[test]
    fn forward_intro_cnot() {
        let rho = DensityMatrix::pure(&intro_psi(), vec![2, 2]).unwrap();
        let (rs, rsp) = forward(&gates::cnot(), &rho).unwrap();
        assert!(rs.trace_distance(&DensityMatrix::maximally_mixed(2)) < 1e-10);
        let ket0 = DensityMatrix::pure(&ket(2, 0), vec![2]).unwrap();
        assert!(rsp.trace_distance(&ket0) < 1e-10);
    }

    #[test]
    fn forward_swap_and_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = states::random_state_with(&mut rng, 2, 2).unwrap();
        let b = states::random_state_with(&mut rng, 2, 1).unwrap();
        let joint =
            DensityMatrix::new(linalg::tensor(a.matrix(), b.matrix()), vec![2, 2]).unwrap();
        let (rs, rsp) = forward(&gates::swap(), &joint).unwrap();
        assert!(rs.trace_distance(&a) < 1e-12);
        assert!(rsp.trace_distance(&b) < 1e-12);
        let (is_, isp) = forward(&gates::identity_gate(), &joint).unwrap();
        assert!(is_.trace_distance(&isp) < 1e-12);
    }

    #[test]
    fn tau_pure_state_is_one() {
        let phi = gates::magic_state(2);
        let rho = DensityMatrix::pure(&phi, vec![2, 2]).unwrap();
        assert!((tau(&rho, &phi).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tau_bloch_product_form() {
        let m = [0.1, -0.2, 0.15];
        let omega = from_bloch(&BlochVector::new(m).unwrap());
        let rho = DensityMatrix::new(
            linalg::tensor(
                DensityMatrix::maximally_mixed(2).matrix(),
                omega.matrix(),
            ),
            vec![2, 2],
        )
        .unwrap();
        let expect = 0.25 - m.iter().map(|x| x * x).sum::<f64>();
        assert!((tau(&rho, &gates::magic_state(2)).unwrap() - expect).abs() < 1e-10);
    }

    #[test]
    fn tau_correlated_form() {
        let m = [0.12, -0.08, 0.05];
        let paulis = [gates::pauli_x(), gates::pauli_y(), gates::pauli_z()];
        let mut mat = ComplexMatrix::identity(4).scale(Complex64::new(0.25, 0.0));
        for (mi, s) in m.iter().zip(&paulis) {
            mat = mat.add(&linalg::tensor(s, s).scale(Complex64::new(*mi, 0.0)));
        }
        let rho = DensityMatrix::new(mat, vec![2, 2]).unwrap();
        let expect = 0.25 + m[0] - m[1] + m[2];
        assert!((tau(&rho, &gates::magic_state(2)).unwrap() - expect).abs() < 1e-10);
    }

    #[test]
    fn tau_outside_support_is_zero() {
        let rho = DensityMatrix::pure(&kron_vec(&ket(2, 0), &ket(2, 0)), vec![2, 2]).unwrap();
        let phi = kron_vec(&ket(2, 1), &ket(2, 0));
        assert_eq!(tau(&rho, &phi).unwrap(), 0.0);
    }

    #[test]
    fn p_window_collapse() {
        // at m=(1/4,-1/4,1/4) the correlated τ hits 1 and the window is {1/2}
        let (lo, hi) = lemma1_p_window(1.0);
        assert!((lo - 0.5).abs() < 1e-12 && (hi - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lemma1_never_flags_true_forward_outputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for _ in 0..25 {
            let u = states::random_two_qubit_gate_with(&mut rng);
            let rho = states::random_state_with(&mut rng, 4, 3)
                .unwrap()
                .with_dims(vec![2, 2])
                .unwrap();
            let (_, rsp) = forward(&u, &rho).unwrap();
            for rep in lemma1_check(&u, &rho, &rsp).unwrap() {
                assert!(rep.all_satisfied());
            }
        }
    }

    #[test]
    fn purity_bound_product_eigenbasis() {
        // diagonal gate with distinct phases: computational (product)
        // eigenbasis, so the max marginal-purity term is 1
        let mut m = ComplexMatrix::zeros(4, 4);
        for (k, ph) in [0.0f64, 0.9, 1.7, 2.6].iter().enumerate() {
            m[(k, k)] = Complex64::from_polar(1.0, *ph);
        }
        let u = UnitaryGate::new(m, (2, 2)).unwrap();
        let bound = purity_upper_bound(&u, &DensityMatrix::maximally_mixed(2), 2).unwrap();
        assert!((bound - 63.0 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn purity_bound_pure_input() {
        let rho = DensityMatrix::pure(&ket(2, 0), vec![2]).unwrap();
        let bound = purity_upper_bound(&gates::cnot(), &rho, 2).unwrap();
        assert!(bound <= 1.0 + 1e-12);
    }

    #[test]
    fn purity_bound_respected_by_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let u = states::random_two_qubit_gate_with(&mut rng);
            let rho_s = states::random_state_with(&mut rng, 2, 2).unwrap();
            let joint = DensityMatrix::new(
                linalg::tensor(
                    rho_s.matrix(),
                    DensityMatrix::maximally_mixed(2).matrix(),
                ),
                vec![2, 2],
            )
            .unwrap();
            let (_, rsp) = forward(&u, &joint).unwrap();
            let bound = purity_upper_bound(&u, &rho_s, 2).unwrap();
            assert!(rsp.purity() <= bound + 1e-9);
        }
    }

    #[test]
    fn unitary_eigensystem_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for g in [gates::cnot(), gates::swap(), states::random_two_qubit_gate_with(&mut rng)] {
            let pairs = unitary_eigensystem(&g).unwrap();
            for p in &pairs {
                let lhs = g.apply(&p.vector);
                let rhs = linalg::vec_scale(&p.vector, Complex64::from_polar(1.0, p.phase));
                assert!(vec_norm(&linalg::vec_sub(&lhs, &rhs)) < 1e-8);
            }
        }
    }

    #[test]
    fn cnot_any_feasible_with_correlated_witness() {
        let ket0 = DensityMatrix::pure(&ket(2, 0), vec![2]).unwrap();
        let p = GenerationProblem::new(
            gates::cnot(),
            DensityMatrix::maximally_mixed(2),
            ket0,
            StateClass::Any,
        )
        .unwrap();
        let r = solve_feasibility(&p).unwrap();
        assert_eq!(r.status, FeasibilityStatus::Feasible);
        let w = r.witness.unwrap();
        // any witness must reproduce the transformation and be correlated
        // (the product search proves no uncorrelated state works)
        let (rs, rsp) = forward(&p.u, &w).unwrap();
        assert!(rs.trace_distance(&p.rho_s) < 1e-6);
        assert!(rsp.trace_distance(&p.rho_s_prime) < 1e-6);
        let marg_e =
            linalg::partial_trace(w.matrix(), (2, 2), Subsystem::System).unwrap();
        let product =
            DensityMatrix::new(linalg::tensor(rs.matrix(), &marg_e), vec![2, 2]).unwrap();
        assert!(w.trace_distance(&product) > 0.1);
    }

    #[test]
    fn cnot_separable_feasible_entanglement_not_required() {
        // the classically correlated state ½|0+><0+| + ½|1−><1−| generates
        // I/2 → |0><0| here, so the separable class is genuinely feasible:
        // only uncorrelated (product) inputs are excluded for this gate.
        let ket0 = DensityMatrix::pure(&ket(2, 0), vec![2]).unwrap();
        let p = GenerationProblem::new(
            gates::cnot(),
            DensityMatrix::maximally_mixed(2),
            ket0,
            StateClass::Separable,
        )
        .unwrap();
        let r = solve_feasibility(&p).unwrap();
        assert_eq!(r.status, FeasibilityStatus::Feasible);
        let w = r.witness.unwrap();
        assert!(crate::magic::ppt_separable(&w).unwrap().separable);
        let (rs, rsp) = forward(&p.u, &w).unwrap();
        assert!(rs.trace_distance(&p.rho_s) < 1e-6);
        assert!(rsp.trace_distance(&p.rho_s_prime) < 1e-6);
    }

    #[test]
    fn swap_separable_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = states::random_state_with(&mut rng, 2, 2).unwrap();
        let b = states::random_state_with(&mut rng, 2, 2).unwrap();
        let p = GenerationProblem::new(gates::swap(), a, b, StateClass::Separable).unwrap();
        let r = solve_feasibility(&p).unwrap();
        assert_eq!(r.status, FeasibilityStatus::Feasible);
        assert!(crate::magic::ppt_separable(&r.witness.unwrap()).unwrap().separable);
    }

    #[test]
    fn product_search_cnot_objective_is_one() {
        let ket0 = DensityMatrix::pure(&ket(2, 0), vec![2]).unwrap();
        let p = GenerationProblem::new(
            gates::cnot(),
            DensityMatrix::maximally_mixed(2),
            ket0,
            StateClass::Product,
        )
        .unwrap();
        let r = search_product(&p).unwrap();
        assert_eq!(r.status, FeasibilityStatus::Infeasible);
        assert!((r.min_objective.unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn product_search_swap_succeeds() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = states::random_state_with(&mut rng, 2, 2).unwrap();
        let b = states::random_state_with(&mut rng, 2, 2).unwrap();
        let p = GenerationProblem::new(gates::swap(), a, b, StateClass::Product).unwrap();
        let r = search_product(&p).unwrap();
        assert_eq!(r.status, FeasibilityStatus::Feasible);
        assert!(r.min_objective.unwrap() <= 1e-9);
    }

    #[test]
    fn product_search_local_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = states::random_local_gate_with(&mut rng);
        let a = states::random_state_with(&mut rng, 2, 2).unwrap();
        // extract the S factor to build AρA†
        let rho_sp = {
            let joint = DensityMatrix::new(
                linalg::tensor(a.matrix(), DensityMatrix::maximally_mixed(2).matrix()),
                vec![2, 2],
            )
            .unwrap();
            forward(&g, &joint).unwrap().1
        };
        let p = GenerationProblem::new(g, a, rho_sp, StateClass::Product).unwrap();
        let r = search_product(&p).unwrap();
        assert_eq!(r.status, FeasibilityStatus::Feasible);
    }

    #[test]
    fn qc_search_uc2_feasible() {
        // a UC2 gate generated transformation is QC-feasible
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let u = gates::cnot_computational_se();
        let rho = states::random_state_with(&mut rng, 4, 2)
            .unwrap()
            .with_dims(vec![2, 2])
            .unwrap();
        let (rs, rsp) = forward(&u, &rho).unwrap();
        let p = GenerationProblem::new(u, rs, rsp, StateClass::Qc).unwrap();
        let r = search_qc(&p).unwrap();
        assert_eq!(r.status, FeasibilityStatus::Feasible);

        // the intro transformation also has a QC generator:
        // ½|0><0|⊗|+><+| + ½|1><1|⊗|−><−|
        let ket0 = DensityMatrix::pure(&ket(2, 0), vec![2]).unwrap();
        let p = GenerationProblem::new(
            gates::cnot(),
            DensityMatrix::maximally_mixed(2),
            ket0,
            StateClass::Qc,
        )
        .unwrap();
        let r = search_qc(&p).unwrap();
        assert_eq!(r.status, FeasibilityStatus::Feasible);
        let w = r.witness.unwrap();
        let (rs, rsp) = forward(&p.u, &w).unwrap();
        assert!(rs.trace_distance(&p.rho_s) < 1e-6);
        assert!(rsp.trace_distance(&p.rho_s_prime) < 1e-6);
    }

    #[test]
    fn family_unique_generator() {
        let u = gates::family_unitary(PI / 3.0, 0.7);
        let ket0 = DensityMatrix::pure(&ket(2, 0), vec![2]).unwrap();
        let p = GenerationProblem::new(
            u,
            DensityMatrix::maximally_mixed(2),
            ket0,
            StateClass::Any,
        )
        .unwrap();
        let r = solve_feasibility(&p).unwrap();
        assert_eq!(r.status, FeasibilityStatus::Feasible);
        let w = r.witness.unwrap();
        assert!(w.fidelity_with_pure(&gates::magic_state(2)) >= 1.0 - 1e-6);
        match family_analyze(PI / 3.0, 0.7) {
            FamilySolutions::Unique { witness } => {
                assert!(w.trace_distance(&witness) < 1e-3);
            }
            _ => panic!("cos2θ ≠ 0 must give the unique generator"),
        }
    }

    #[test]
    fn family_critical_angle_mixture() {
        let gamma = 0.7;
        let u = gates::family_unitary(PI / 4.0, gamma);
        for p in [0.2, 0.5, 0.8] {
            let mix = family_mixture(p, gamma).unwrap();
            let (rs, rsp) = forward(&u, &mix).unwrap();
            assert!(rs.trace_distance(&DensityMatrix::maximally_mixed(2)) < 1e-10);
            let ket0 = DensityMatrix::pure(&ket(2, 0), vec![2]).unwrap();
            assert!(rsp.trace_distance(&ket0) < 1e-10);
        }
        let half = family_mixture(0.5, gamma).unwrap();
        assert!(crate::magic::ppt_separable(&half).unwrap().separable);
        assert!(!crate::magic::ppt_separable(&family_mixture(0.2, gamma).unwrap())
            .unwrap()
            .separable);
    }

    #[test]
    fn lemma2_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let rho = states::random_state_with(&mut rng, 2, 2).unwrap();
        let psi = states::random_pure_with(&mut rng, 2);
        let v = lemma2_check(&gates::swap(), &rho, &psi).unwrap();
        assert_eq!(v.product.status, FeasibilityStatus::Feasible);
        assert!(v.consistent);
        let v = lemma2_check(&gates::cnot(), &DensityMatrix::maximally_mixed(2), &ket(2, 0))
            .unwrap();
        assert_ne!(v.product.status, FeasibilityStatus::Feasible);
        assert!(v.consistent);
        let local = states::random_local_gate_with(&mut rng);
        let v = lemma2_check(&local, &rho, &psi).unwrap();
        assert_ne!(v.product.status, FeasibilityStatus::Feasible);
        assert!(v.consistent);
    }

    #[test]
    fn robustness_cnot() {
        let ket0 = DensityMatrix::pure(&ket(2, 0), vec![2]).unwrap();
        let r = robustness_epsilon(&gates::cnot(), &DensityMatrix::maximally_mixed(2), &ket0)
            .unwrap();
        assert!((r.epsilon - 1.0).abs() < 1e-6);
        assert!((r.delta - 0.5).abs() < 1e-6);
    }

    #[test]
    fn any_feasibility_complete_on_generated_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..10 {
            let u = states::random_two_qubit_gate_with(&mut rng);
            let rho = states::random_state_with(&mut rng, 4, 4)
                .unwrap()
                .with_dims(vec![2, 2])
                .unwrap();
            let (rs, rsp) = forward(&u, &rho).unwrap();
            let p = GenerationProblem::new(u, rs, rsp, StateClass::Any).unwrap();
            let r = solve_feasibility(&p).unwrap();
            assert_ne!(r.status, FeasibilityStatus::Infeasible);
        }
    }

    #[test]
    fn intro_psi_is_the_any_witness_shape() {
        // sanity: the construction state actually induces I/2 → |0><0|
        let psi = intro_psi();
        assert!((vec_norm(&psi) - 1.0).abs() < 1e-12);
        let out = gates::cnot().apply(&psi);
        let expect = kron_vec(&ket(2, 0), &normalize(&[C_ONE, C_ZERO]));
        assert!((inner(&out, &expect).norm() - 1.0).abs() < 1e-10);
        let _ = outer(&psi, &psi);
    }
}
