use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use openqdyn::scenario::{self, GateSpec, Scenario, StateSpec};

/// Reduced-state dynamics toolkit: gate classification, generation-model
/// feasibility, and correlation witnesses.
#[derive(Parser)]
#[command(name = "openqdyn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// write the JSON report here
    #[arg(long, global = true)]
    json: Option<PathBuf>,
    /// seed for randomized sub-steps (protocol sampling)
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone)]
struct GateArgs {
    /// library gate: identity, swap, cnot, dcnot, sqrt-swap, family, shift
    #[arg(long)]
    gate: Option<String>,
    /// family angle θ (radians)
    #[arg(long)]
    theta: Option<f64>,
    /// family phase γ (radians)
    #[arg(long)]
    gamma: Option<f64>,
    /// shift dimension d
    #[arg(long)]
    d: Option<usize>,
    /// JSON file holding a dense matrix {"re": [[..]], "im": [[..]]}
    #[arg(long)]
    gate_file: Option<PathBuf>,
}

impl GateArgs {
    fn spec(&self) -> GateSpec {
        GateSpec {
            name: self.gate.clone(),
            theta: self.theta,
            gamma: self.gamma,
            d: self.d,
            matrix: None,
            file: self.gate_file.as_ref().map(|p| p.display().to_string()),
            dims: None,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Nonlocal class and interaction phases of a two-qubit gate
    Classify {
        #[command(flatten)]
        gate: GateArgs,
        /// override the modular-comparison tolerance (also: OPENQDYN_TOL)
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Feasibility of ρ_S → target over an initial-state class
    Model {
        #[command(flatten)]
        gate: GateArgs,
        /// initial system state: maximally-mixed, ket0, ket1, ket-plus, or a JSON file
        #[arg(long = "rhoS", default_value = "maximally-mixed")]
        rho_s: String,
        /// target system state
        #[arg(long, default_value = "ket0")]
        target: String,
        /// any | separable | qc | product
        #[arg(long, default_value = "any")]
        class: String,
    },
    /// Solution set of I/2 → |0><0| for the two-parameter family U(θ,γ)
    Family {
        #[arg(long)]
        theta: f64,
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        /// mixture weight to test at the critical angle
        #[arg(long)]
        p: Option<f64>,
    },
    /// Shift-unitary correlation witness and finite-shot protocol
    Witness {
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// system state defining the eigenbasis (defaults to I/d)
        #[arg(long = "rhoS")]
        rho_s: Option<String>,
        /// joint state JSON file for the simulated protocol
        #[arg(long)]
        hidden: Option<String>,
        /// noiselessly observed <0|ρ_S'|0>
        #[arg(long)]
        observed: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        shots: usize,
    },
    /// Reproduce a worked example from the catalog
    PaperExample {
        /// example id; use --list to enumerate
        id: Option<String>,
        #[arg(long)]
        list: bool,
        /// Bloch/correlation parameters m1,m2,m3
        #[arg(long, value_delimiter = ',', num_args = 3)]
        m: Option<Vec<f64>>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
    },
}

fn scenario_for(cli: &Cli) -> Result<Option<Scenario>, String> {
    let s = match &cli.command {
        Command::Classify { gate, tol } => Scenario::Classify {
            gate: gate.spec(),
            tol: *tol,
        },
        Command::Model {
            gate,
            rho_s,
            target,
            class,
        } => Scenario::Model {
            gate: gate.spec(),
            rho_s: StateSpec::Named(rho_s.clone()),
            target: StateSpec::Named(target.clone()),
            class: class.clone(),
        },
        Command::Family { theta, gamma, p } => Scenario::Family {
            theta: *theta,
            gamma: *gamma,
            p: *p,
        },
        Command::Witness {
            d,
            rho_s,
            hidden,
            observed,
            shots,
        } => Scenario::Witness {
            d: *d,
            rho_s: rho_s.clone().map(StateSpec::Named),
            hidden: hidden.clone().map(StateSpec::Named),
            observed: *observed,
            shots: *shots,
            seed: cli.seed,
        },
        Command::PaperExample {
            id,
            list,
            m,
            theta,
            gamma,
        } => {
            if *list || id.is_none() {
                for (id, blurb) in scenario::list_paper_examples() {
                    println!("{id:<22} {blurb}");
                }
                return Ok(None);
            }
            Scenario::PaperExample {
                id: id.clone().unwrap(),
                m: m.as_ref().map(|v| [v[0], v[1], v[2]]),
                theta: *theta,
                gamma: *gamma,
                seed: cli.seed,
            }
        }
    };
    Ok(Some(s))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let scenario = match scenario_for(&cli) {
        Ok(Some(s)) => s,
        Ok(None) => return ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match scenario::run(&scenario) {
        Ok(report) => {
            print!("{}", report.text);
            if let Some(path) = &cli.json {
                let rendered = serde_json::to_string_pretty(&report.json).unwrap();
                if let Err(e) = std::fs::write(path, rendered + "\n") {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(1);
                }
            }
            if report.undecided {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
