//! Scenario schema and runner behind the command-line interface: classify
//! gates, solve generation problems, analyze the two-parameter family, run
//! the correlation witness, and reproduce the worked examples.

use std::f64::consts::PI;

use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{QdynError, Result};
use crate::gates::{self, UnitaryGate};
use crate::genmodel::{self, FeasibilityResult, FeasibilityStatus, GenerationProblem, StateClass};
use crate::linalg::{self, ComplexMatrix};
use crate::magic;
use crate::states::{from_bloch, BlochVector, DensityMatrix, MatrixDto};
use crate::witness;

/// A gate given by library name (with parameters) or as a dense matrix.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GateSpec {
    pub name: Option<String>,
    pub theta: Option<f64>,
    pub gamma: Option<f64>,
    pub d: Option<usize>,
    pub matrix: Option<MatrixDto>,
    pub file: Option<String>,
    pub dims: Option<[usize; 2]>,
}

impl GateSpec {
    pub fn named(name: &str) -> Self {
        Self {
            name: Some(name.to_string()),
            ..Default::default()
        }
    }

    pub fn resolve(&self) -> Result<UnitaryGate> {
        if let Some(name) = &self.name {
            return match name.as_str() {
                "family" => {
                    let theta = self.theta.ok_or_else(|| {
                        QdynError::InvalidArgument("family gate needs theta".into())
                    })?;
                    let gamma = self.gamma.unwrap_or(0.0);
                    Ok(gates::family_unitary(theta, gamma))
                }
                "shift" => Ok(gates::shift(self.d.unwrap_or(2))),
                other => gates::by_name(other),
            };
        }
        let dto = match (&self.matrix, &self.file) {
            (Some(m), _) => m.clone(),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    QdynError::InvalidArgument(format!("cannot read {path}: {e}"))
                })?;
                serde_json::from_str(&text).map_err(|e| {
                    QdynError::InvalidArgument(format!("bad matrix JSON in {path}: {e}"))
                })?
            }
            (None, None) => {
                return Err(QdynError::InvalidArgument(
                    "gate needs a name, an inline matrix, or a file".into(),
                ))
            }
        };
        let m = dto.to_matrix()?;
        let dims = self.dims.unwrap_or([2, 2]);
        UnitaryGate::new(m, (dims[0], dims[1]))
    }
}

/// A state given by library name or as an inline/on-disk density matrix.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Named(String),
    Inline(DensityMatrix),
}

impl StateSpec {
    /// `dim` is the expected system dimension for named states.
    pub fn resolve(&self, dim: usize) -> Result<DensityMatrix> {
        match self {
            StateSpec::Inline(s) => Ok(s.clone()),
            StateSpec::Named(name) if name.ends_with(".json") => {
                let text = std::fs::read_to_string(name).map_err(|e| {
                    QdynError::InvalidArgument(format!("cannot read {name}: {e}"))
                })?;
                serde_json::from_str(&text)
                    .map_err(|e| QdynError::InvalidArgument(format!("bad state JSON: {e}")))
            }
            StateSpec::Named(name) => match name.as_str() {
                "maximally-mixed" => Ok(DensityMatrix::maximally_mixed(dim)),
                "ket0" => DensityMatrix::pure(&linalg::ket(dim, 0), vec![dim]),
                "ket1" => DensityMatrix::pure(&linalg::ket(dim, 1), vec![dim]),
                "ket-plus" => {
                    let v = linalg::normalize(&vec![linalg::C_ONE; dim]);
                    DensityMatrix::pure(&v, vec![dim])
                }
                "phi3" => DensityMatrix::pure(&gates::magic_state(2), vec![2, 2]),
                other => Err(QdynError::InvalidArgument(format!(
                    "unknown state '{other}'"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Scenario {
    Classify {
        gate: GateSpec,
        tol: Option<f64>,
    },
    Model {
        gate: GateSpec,
        #[serde(rename = "rhoS")]
        rho_s: StateSpec,
        target: StateSpec,
        class: String,
    },
    Family {
        theta: f64,
        #[serde(default)]
        gamma: f64,
        p: Option<f64>,
    },
    Witness {
        #[serde(default = "default_d")]
        d: usize,
        #[serde(rename = "rhoS")]
        rho_s: Option<StateSpec>,
        hidden: Option<StateSpec>,
        observed: Option<f64>,
        #[serde(default = "default_shots")]
        shots: usize,
        #[serde(default)]
        seed: u64,
    },
    PaperExample {
        id: String,
        m: Option<[f64; 3]>,
        theta: Option<f64>,
        gamma: Option<f64>,
        #[serde(default)]
        seed: u64,
    },
}

fn default_d() -> usize {
    2
}

fn default_shots() -> usize {
    10_000
}

/// Runner output: the JSON machine contract plus a text rendering; exit
/// code 2 is signalled through `undecided`.
#[derive(Debug, Clone)]
pub struct Report {
    pub json: Value,
    pub text: String,
    pub undecided: bool,
}

/// Shared modular-comparison tolerance: OPENQDYN_TOL overrides the default.
pub fn effective_mod_tol(explicit: Option<f64>) -> Result<f64> {
    if let Some(t) = explicit {
        return Ok(t);
    }
    match std::env::var("OPENQDYN_TOL") {
        Ok(s) => s
            .parse::<f64>()
            .map_err(|_| QdynError::InvalidArgument("OPENQDYN_TOL must be a float".into())),
        Err(_) => Ok(magic::MOD_TOL),
    }
}

fn feasibility_json(r: &FeasibilityResult) -> Value {
    let mut obj = serde_json::Map::new();
    obj.insert("status".into(), json!(r.status));
    obj.insert("residual".into(), json!(r.residual));
    obj.insert("iterations".into(), json!(r.iterations));
    if let Some(m) = r.min_objective {
        obj.insert("minObjective".into(), json!(m));
    }
    if let Some(w) = &r.witness {
        obj.insert("witness".into(), serde_json::to_value(w).unwrap());
    }
    Value::Object(obj)
}

fn header(kind: &str) -> serde_json::Map<String, Value> {
    let mut obj = serde_json::Map::new();
    obj.insert("version".into(), json!(crate::VERSION));
    obj.insert("kind".into(), json!(kind));
    obj
}

fn tolerances(mod_tol: f64) -> Value {
    json!({
        "modTol": mod_tol,
        "feasTol": genmodel::FEAS_TOL,
        "productTol": genmodel::PRODUCT_TOL,
        "certMargin": genmodel::CERT_MARGIN,
    })
}

pub fn run(scenario: &Scenario) -> Result<Report> {
    match scenario {
        Scenario::Classify { gate, tol } => run_classify(gate, *tol),
        Scenario::Model {
            gate,
            rho_s,
            target,
            class,
        } => run_model(gate, rho_s, target, class),
        Scenario::Family { theta, gamma, p } => run_family(*theta, *gamma, *p),
        Scenario::Witness {
            d,
            rho_s,
            hidden,
            observed,
            shots,
            seed,
        } => run_witness(*d, rho_s.as_ref(), hidden.as_ref(), *observed, *shots, *seed),
        Scenario::PaperExample {
            id,
            m,
            theta,
            gamma,
            seed,
        } => run_paper_example(id, *m, *theta, *gamma, *seed),
    }
}

fn run_classify(gate: &GateSpec, tol: Option<f64>) -> Result<Report> {
    let u = gate.resolve()?;
    let mod_tol = effective_mod_tol(tol)?;
    let class = magic::classify_with_tol(&u, mod_tol)?;
    let mut obj = header("classify");
    obj.insert("class".into(), json!(class.label));
    obj.insert("phases".into(), json!(class.phases.to_vec()));
    obj.insert("weyl".into(), json!(class.weyl.to_vec()));
    obj.insert(
        "pairwiseModPiResidual".into(),
        json!(class.pairwise_mod_pi_residual),
    );
    obj.insert("tolerances".into(), tolerances(mod_tol));
    let text = format!(
        "class: {}\nphases (rad): {:.6} {:.6} {:.6} {:.6}\nweyl (rad):   {:.6} {:.6} {:.6}\n",
        class.label,
        class.phases[0],
        class.phases[1],
        class.phases[2],
        class.phases[3],
        class.weyl[0],
        class.weyl[1],
        class.weyl[2]
    );
    Ok(Report {
        json: Value::Object(obj),
        text,
        undecided: false,
    })
}

fn run_model(gate: &GateSpec, rho_s: &StateSpec, target: &StateSpec, class: &str) -> Result<Report> {
    let u = gate.resolve()?;
    let (ds, _) = u.dims();
    let rho = rho_s.resolve(ds)?;
    let tgt = target.resolve(ds)?;
    let class: StateClass = class.parse()?;
    let problem = GenerationProblem::new(u, rho, tgt, class)?;
    let result = genmodel::solve(&problem)?;
    let mut obj = header("model");
    obj.insert("class".into(), json!(class));
    obj.insert("result".into(), feasibility_json(&result));
    obj.insert("tolerances".into(), tolerances(effective_mod_tol(None)?));
    let mut text = format!("status: {} (residual {:.3e}, {} iterations)\n",
        result.status, result.residual, result.iterations);
    if let Some(m) = result.min_objective {
        text.push_str(&format!(
            "min objective: {m:.9} in the full trace norm ({:.9} in half-norm)\n",
            m / 2.0
        ));
    }
    let undecided = result.status == FeasibilityStatus::Undecided;
    Ok(Report {
        json: Value::Object(obj),
        text,
        undecided,
    })
}

fn run_family(theta: f64, gamma: f64, p: Option<f64>) -> Result<Report> {
    let u = gates::family_unitary(theta, gamma);
    let ket0 = DensityMatrix::pure(&linalg::ket(2, 0), vec![2])?;
    let problem = GenerationProblem::new(
        u,
        DensityMatrix::maximally_mixed(2),
        ket0,
        StateClass::Any,
    )?;
    let feas = genmodel::solve_feasibility(&problem)?;
    let mut obj = header("family");
    obj.insert("theta".into(), json!(theta));
    obj.insert("gamma".into(), json!(gamma));
    let mut text;
    match genmodel::family_analyze(theta, gamma) {
        genmodel::FamilySolutions::Unique { witness } => {
            let fidelity = feas
                .witness
                .as_ref()
                .map(|w| 1.0 - w.trace_distance(&witness))
                .unwrap_or(0.0);
            obj.insert("solutions".into(), json!("unique"));
            obj.insert("generator".into(), serde_json::to_value(&witness).unwrap());
            obj.insert("solverAgreement".into(), json!(fidelity));
            text = format!(
                "cos2θ ≠ 0: unique generator |Φ₃><Φ₃| (solver agreement {fidelity:.9})\n"
            );
        }
        genmodel::FamilySolutions::OneParameter { gamma, separable_p } => {
            obj.insert("solutions".into(), json!("one-parameter"));
            obj.insert("separableP".into(), json!(separable_p));
            text = format!(
                "cos2θ = 0: generators p|Φ₃><Φ₃| + (1−p)|Φ₄(γ)><Φ₄(γ)|, γ = {gamma:.6}; separable only at p = {separable_p}\n"
            );
            if let Some(pv) = p {
                let mix = genmodel::family_mixture(pv, gamma)?;
                let sep = magic::ppt_separable(&mix)?;
                obj.insert("p".into(), json!(pv));
                obj.insert("pptSeparable".into(), json!(sep.separable));
                text.push_str(&format!(
                    "p = {pv}: PPT separable = {}\n",
                    sep.separable
                ));
            }
        }
    }
    obj.insert("anyFeasibility".into(), feasibility_json(&feas));
    obj.insert("tolerances".into(), tolerances(effective_mod_tol(None)?));
    let undecided = feas.status == FeasibilityStatus::Undecided;
    Ok(Report {
        json: Value::Object(obj),
        text,
        undecided,
    })
}

fn run_witness(
    d: usize,
    rho_s: Option<&StateSpec>,
    hidden: Option<&StateSpec>,
    observed: Option<f64>,
    shots: usize,
    seed: u64,
) -> Result<Report> {
    let hidden_state = hidden
        .map(|h| h.resolve(d * d).and_then(|s| s.with_dims(vec![d, d])))
        .transpose()?;
    let rho = match (&rho_s, &hidden_state) {
        (Some(spec), _) => spec.resolve(d)?,
        (None, Some(h)) => {
            let m = linalg::partial_trace(h.matrix(), (d, d), linalg::Subsystem::Environment)?;
            DensityMatrix::new(m, vec![d])?
        }
        (None, None) => DensityMatrix::maximally_mixed(d),
    };
    let w = witness::build_shift(&rho, d)?;
    let mut obj = header("witness");
    obj.insert("d".into(), json!(d));
    obj.insert("rank".into(), json!(w.rank));
    obj.insert("threshold".into(), json!(w.threshold));
    let mut text = format!(
        "shift witness on d = {d}: threshold √γ(ρ_S) = {:.9}\n",
        w.threshold
    );
    if let Some(v) = observed {
        let verdict = witness::theorem3_certify(&rho, v)?;
        obj.insert("observed".into(), json!(v));
        obj.insert("verdict".into(), json!(verdict));
        text.push_str(&format!("observed <0|ρ_S'|0> = {v}: {verdict}\n"));
    }
    if let Some(h) = &hidden_state {
        let t = witness::simulate_protocol(h, shots, seed)?;
        obj.insert("transcript".into(), serde_json::to_value(&t).unwrap());
        text.push_str(&format!(
            "protocol: {}/{} zeros, estimate {:.6}, 95% CI [{:.6}, {:.6}] → {}\n",
            t.count0, t.shots, t.estimate, t.ci[0], t.ci[1], t.verdict
        ));
    }
    obj.insert("tolerances".into(), tolerances(effective_mod_tol(None)?));
    Ok(Report {
        json: Value::Object(obj),
        text,
        undecided: false,
    })
}

/// Stable catalog of reproducible worked examples.
pub fn list_paper_examples() -> Vec<(&'static str, &'static str)> {
    vec![
        (
            "lemma1-bloch",
            "eigenstate weight and p-window for I/2 ⊗ (I/2 + m·σ)",
        ),
        (
            "lemma1-correlated",
            "eigenstate weight and p-window for I/4 + Σ mᵢ σᵢ⊗σᵢ",
        ),
        (
            "family-theta-gamma",
            "solution set of I/2 → |0><0| under the two-parameter family",
        ),
        (
            "shift-witness",
            "controlled-shift correlation certification with finite shots",
        ),
        (
            "cnot-intro",
            "I/2 → |0><0| under the X-controlled CNOT: correlation required",
        ),
    ]
}

fn run_paper_example(
    id: &str,
    m: Option<[f64; 3]>,
    theta: Option<f64>,
    gamma: Option<f64>,
    seed: u64,
) -> Result<Report> {
    match id {
        "lemma1-bloch" => {
            let m = m.unwrap_or([0.25, -0.25, 0.25]);
            let omega = from_bloch(&BlochVector::new(m)?);
            let joint = DensityMatrix::new(
                linalg::tensor(DensityMatrix::maximally_mixed(2).matrix(), omega.matrix()),
                vec![2, 2],
            )?;
            lemma1_example_report("lemma1-bloch", m, &joint)
        }
        "lemma1-correlated" => {
            let m = m.unwrap_or([0.25, -0.25, 0.25]);
            let paulis = [gates::pauli_x(), gates::pauli_y(), gates::pauli_z()];
            let mut mat = ComplexMatrix::identity(4).scale(linalg::C_ONE.scale(0.25));
            for (mi, s) in m.iter().zip(&paulis) {
                mat = mat.add(&linalg::tensor(s, s).scale(linalg::C_ONE.scale(*mi)));
            }
            let joint = DensityMatrix::new(mat, vec![2, 2])?;
            lemma1_example_report("lemma1-correlated", m, &joint)
        }
        "family-theta-gamma" => run_family(theta.unwrap_or(PI / 3.0), gamma.unwrap_or(0.7), None),
        "shift-witness" => {
            let w = witness::build_shift(&DensityMatrix::maximally_mixed(2), 2)?;
            let alpha = ComplexMatrix::from_rows(&[
                vec![linalg::C_ONE.scale(0.5), linalg::C_ONE.scale(0.5)],
                vec![linalg::C_ONE.scale(0.5), linalg::C_ONE.scale(0.5)],
            ]);
            let hidden = witness::MaxCorrState::new(alpha.clone())?.embed(&w.eigenbasis, 2)?;
            let spectrum = witness::ppt_spectrum_max_corr(&alpha, 2)?;
            let transcript = witness::simulate_protocol(&hidden, default_shots(), seed)?;
            let mut obj = header("paper-example");
            obj.insert("id".into(), json!("shift-witness"));
            obj.insert("threshold".into(), json!(w.threshold));
            obj.insert("pptSpectrum".into(), json!(spectrum));
            obj.insert(
                "transcript".into(),
                serde_json::to_value(&transcript).unwrap(),
            );
            obj.insert("tolerances".into(), tolerances(effective_mod_tol(None)?));
            let text = format!(
                "shift witness: threshold {:.9}; PT spectrum {:?}; protocol verdict {}\n",
                w.threshold, spectrum, transcript.verdict
            );
            Ok(Report {
                json: Value::Object(obj),
                text,
                undecided: false,
            })
        }
        "cnot-intro" => {
            let ket0 = DensityMatrix::pure(&linalg::ket(2, 0), vec![2])?;
            let half = DensityMatrix::maximally_mixed(2);
            let sep = genmodel::solve_feasibility(&GenerationProblem::new(
                gates::cnot(),
                half.clone(),
                ket0.clone(),
                StateClass::Separable,
            )?)?;
            let prod = genmodel::search_product(&GenerationProblem::new(
                gates::cnot(),
                half,
                ket0,
                StateClass::Product,
            )?)?;
            let mut obj = header("paper-example");
            obj.insert("id".into(), json!("cnot-intro"));
            obj.insert("separable".into(), feasibility_json(&sep));
            obj.insert("product".into(), feasibility_json(&prod));
            obj.insert("tolerances".into(), tolerances(effective_mod_tol(None)?));
            let text = format!(
                "I/2 → |0><0| under CNOT: separable {}, product {} (ε = {:.6})\n",
                sep.status,
                prod.status,
                prod.min_objective.unwrap_or(f64::NAN)
            );
            let undecided = sep.status == FeasibilityStatus::Undecided
                || prod.status == FeasibilityStatus::Undecided;
            Ok(Report {
                json: Value::Object(obj),
                text,
                undecided,
            })
        }
        other => Err(QdynError::InvalidArgument(format!(
            "unknown example '{other}'; known: {:?}",
            list_paper_examples().iter().map(|e| e.0).collect::<Vec<_>>()
        ))),
    }
}

fn lemma1_example_report(id: &str, m: [f64; 3], joint: &DensityMatrix) -> Result<Report> {
    let t = genmodel::tau(joint, &gates::magic_state(2))?;
    let (lo, hi) = genmodel::lemma1_p_window(t);
    let mut obj = header("paper-example");
    obj.insert("id".into(), json!(id));
    obj.insert("m".into(), json!(m.to_vec()));
    obj.insert("tau".into(), json!(t));
    obj.insert("pWindow".into(), json!([lo, hi]));
    obj.insert("tolerances".into(), tolerances(effective_mod_tol(None)?));
    let text = format!(
        "m = ({}, {}, {}): τ = {t:.9}, admissible p ∈ [{lo:.9}, {hi:.9}]\n",
        m[0], m[1], m[2]
    );
    Ok(Report {
        json: Value::Object(obj),
        text,
        undecided: false,
    })
}
