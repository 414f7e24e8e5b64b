use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use maxent_qst::circuit::{AnsatzShape, RotationKind};
use maxent_qst::gibbs::{exact_gibbs, inner_optimize, GibbsConfig, GibbsResult};
use maxent_qst::harness::{emit_reports, run_tomography, true_state, RunConfig};
use maxent_qst::pauli::{
    ic_operator, ic_set, measure_true_state, pauli_decompose, sum_pauli_terms, HermitianOperator,
    OperatorKind, PauliString, PauliTerm,
};
use maxent_qst::qmath::{fidelity, ComplexMatrix};
use maxent_qst::Result;

#[derive(Parser)]
#[command(name = "maxent-qst", version, about = "Maximal-entropy quantum state tomography")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pauli decomposition of an operator (`P_1`, `S_1_2`, `A_1_2`, or a JSON
    /// matrix file); the whole operator set when `--op` is omitted.
    Decompose {
        #[arg(long)]
        op: Option<String>,
        #[arg(long)]
        qubits: usize,
        #[arg(long)]
        symmetric_only: bool,
    },
    /// Exact expectation values of the operator set on a circuit's output.
    Measure {
        #[arg(long)]
        circuit: String,
        #[arg(long)]
        symmetric_only: bool,
    },
    /// Standalone inner loop on a Hamiltonian given as JSON Pauli terms.
    Gibbs {
        #[arg(long)]
        hamiltonian: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long = "K", default_value_t = 4)]
        truncation_order: usize,
        #[arg(long, default_value_t = 1)]
        ancillas: usize,
        /// Defaults to the number of system qubits.
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, default_value = "ry")]
        rotation: RotationKind,
        #[arg(long)]
        max_iterations: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Full reconstruction pipeline; exits with 2 when the epoch budget runs out.
    Tomography {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct OperatorExport {
    label: String,
    kind: OperatorKind,
    pauli_terms: Vec<PauliTerm>,
}

fn export(op: &HermitianOperator) -> Result<OperatorExport> {
    Ok(OperatorExport {
        label: op.label.clone(),
        kind: op.kind,
        pauli_terms: pauli_decompose(op)?.iter().map(PauliTerm::from).collect(),
    })
}

#[derive(Serialize)]
struct GibbsOutput {
    #[serde(flatten)]
    result: GibbsResult,
    fidelity_to_exact: f64,
}

fn print_json(value: &impl Serialize) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Decompose {
            op,
            qubits,
            symmetric_only,
        } => match op {
            None => {
                let ops = ic_set(qubits, !symmetric_only);
                let all = ops.iter().map(export).collect::<Result<Vec<_>>>()?;
                print_json(&all)?;
            }
            Some(name) => {
                let operator = match ic_operator(qubits, &name) {
                    Ok(op) => op,
                    Err(_) if PathBuf::from(&name).exists() => {
                        let m: ComplexMatrix = serde_json::from_str(&fs::read_to_string(&name)?)?;
                        HermitianOperator::custom(name, m)?
                    }
                    Err(e) => return Err(e),
                };
                print_json(&export(&operator)?)?;
            }
        },
        Command::Measure {
            circuit,
            symmetric_only,
        } => {
            let psi = true_state(&circuit)?;
            let ops = ic_set(psi.num_qubits(), !symmetric_only);
            print_json(&measure_true_state(&psi, &ops)?)?;
        }
        Command::Gibbs {
            hamiltonian,
            beta,
            truncation_order,
            ancillas,
            depth,
            rotation,
            max_iterations,
            seed,
        } => {
            let terms: Vec<PauliTerm> = serde_json::from_str(&fs::read_to_string(hamiltonian)?)?;
            let strings = terms
                .iter()
                .map(PauliString::try_from)
                .collect::<Result<Vec<_>>>()?;
            let h = sum_pauli_terms(&strings)?;
            let n = h.rows().trailing_zeros() as usize;
            let defaults = GibbsConfig::default();
            let cfg = GibbsConfig {
                beta,
                truncation_order,
                seed,
                max_iterations: max_iterations.unwrap_or(defaults.max_iterations),
                ..defaults
            };
            let shape = AnsatzShape::new(n, ancillas, depth.unwrap_or(n), rotation);
            let result = inner_optimize(&h, &cfg, shape, None)?;
            let fidelity_to_exact = fidelity(&result.state, &exact_gibbs(&h, beta)?)?;
            print_json(&GibbsOutput {
                result,
                fidelity_to_exact,
            })?;
        }
        Command::Tomography { config, out } => {
            let cfg = RunConfig::from_file(&config)?;
            let dir = out
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            let report = run_tomography(&cfg)?;
            emit_reports(&report, &dir)?;
            let optional = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.6}"));
            eprintln!(
                "{}: {} epochs, mse {:.3e}, fidelity {}, trace distance {}, {:.2}s -> {}",
                cfg.circuit,
                report.trace.len(),
                report.final_mse,
                optional(report.final_fidelity),
                optional(report.final_trace_distance),
                report.wall_clock_seconds,
                dir.display()
            );
            if !report.converged {
                eprintln!("epoch budget exhausted before reaching the MSE tolerance");
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
