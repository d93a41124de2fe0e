//! `relucert verify | check | oracle`.
//!
//! Exit codes: 0 unsat/accept, 1 sat/reject, 2 unknown, 3 usage or input
//! error, 4 oracle cap exceeded.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use relucert::kernel::model::{forward_eval, Problem};
use relucert::kernel::prooflog::check_proof_str;
use relucert::kernel::Rational;
use relucert::oracle::{oracle_verify, OracleError, OracleVerdict, DEFAULT_CAP};
use relucert::propagate::{Mode, TemplateSet};
use relucert::search::{verify, SearchConfig, VerifyResult};

/// `println!` that tolerates a closed stdout, e.g. when piped into `head`.
macro_rules! out {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

const EXIT_UNSAT: u8 = 0;
const EXIT_SAT: u8 = 1;
const EXIT_UNKNOWN: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_CAP: u8 = 4;

#[derive(Parser)]
#[command(name = "relucert", version, about = "Certificate-carrying ReLU network verifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Strategy {
    Icl,
    Hsrv,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Templates {
    Default,
    MarginOnly,
}

#[derive(Subcommand)]
enum Command {
    /// Decide the property; writes a proof on UNSAT and a witness on SAT.
    Verify {
        problem: PathBuf,
        #[arg(long, value_enum, default_value = "icl")]
        strategy: Strategy,
        #[arg(long, value_name = "PATH")]
        emit_proof: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        witness: Option<PathBuf>,
        #[arg(long, default_value_t = 40)]
        max_depth: usize,
        #[arg(long)]
        lp_budget: Option<u64>,
        #[arg(long, default_value_t = 256)]
        gate_budget: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, value_enum, default_value = "default")]
        templates: Templates,
        /// Bisect the input box at the root before propagating.
        #[arg(long)]
        force_root_split: bool,
        /// Write the run manifest as JSON.
        #[arg(long, value_name = "PATH")]
        manifest: Option<PathBuf>,
    },
    /// Replay a proof log against a problem.
    Check { problem: PathBuf, proof: PathBuf },
    /// Ground truth by enumerating every phase pattern.
    Oracle {
        problem: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
        #[arg(long, value_name = "PATH")]
        witness: Option<PathBuf>,
    },
}

/// Everything that determines a single-worker run.
#[derive(Serialize)]
struct RunManifest<'a> {
    problem: &'a Path,
    digest: String,
    strategy: Strategy,
    templates: Templates,
    max_depth: usize,
    lp_budget: Option<u64>,
    gate_budget: u64,
    workers: usize,
    force_root_split: bool,
    seed: Option<u64>,
    emit_proof: Option<&'a Path>,
    witness: Option<&'a Path>,
}

#[derive(Serialize)]
struct Witness {
    x: Vec<Rational>,
    outputs: Vec<Rational>,
    margin: Rational,
}

fn load(path: &Path) -> Result<Problem, ExitCode> {
    Problem::from_path(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(EXIT_INPUT)
    })
}

fn write(path: &Path, text: &str) -> Result<(), ExitCode> {
    std::fs::write(path, text).map_err(|e| {
        eprintln!("error: cannot write {}: {e}", path.display());
        ExitCode::from(EXIT_INPUT)
    })
}

fn write_witness(problem: &Problem, x: &[Rational], path: Option<&Path>) -> Result<(), ExitCode> {
    let trace = forward_eval(&problem.network, x).expect("witness has the input dimension");
    let w = Witness {
        x: x.to_vec(),
        outputs: trace.outputs().to_vec(),
        margin: problem.property.margin_value(trace.outputs()),
    };
    let list: Vec<String> = x.iter().map(|v| v.to_string()).collect();
    out!("witness={}", list.join(","));
    out!("margin={}", w.margin);
    if let Some(p) = path {
        write(p, &(serde_json::to_string_pretty(&w).expect("witness serializes") + "\n"))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, ExitCode> {
    match cli.command {
        Command::Verify {
            problem,
            strategy,
            emit_proof,
            witness,
            max_depth,
            lp_budget,
            gate_budget,
            workers,
            templates,
            force_root_split,
            manifest,
        } => {
            let p = load(&problem)?;
            if let Some(m) = &manifest {
                let rm = RunManifest {
                    problem: &problem,
                    digest: p.digest(),
                    strategy,
                    templates,
                    max_depth,
                    lp_budget,
                    gate_budget,
                    workers,
                    force_root_split,
                    seed: None,
                    emit_proof: emit_proof.as_deref(),
                    witness: witness.as_deref(),
                };
                write(m, &(serde_json::to_string_pretty(&rm).expect("manifest serializes") + "\n"))?;
            }
            let cfg = SearchConfig {
                mode: match strategy {
                    Strategy::Icl => Mode::Icl,
                    Strategy::Hsrv => Mode::Hsrv,
                },
                templates: match templates {
                    Templates::Default => TemplateSet::Default,
                    Templates::MarginOnly => TemplateSet::MarginOnly,
                },
                max_depth,
                lp_budget,
                gate_budget: Some(gate_budget),
                workers,
                force_root_split,
                ..SearchConfig::default()
            };
            let v = verify(&p, &cfg);
            let code = match &v.result {
                VerifyResult::Unsat(log) => {
                    out!("verdict=unsat");
                    if let Some(path) = &emit_proof {
                        write(path, &(log.to_json_pretty() + "\n"))?;
                    }
                    EXIT_UNSAT
                }
                VerifyResult::Sat(x) => {
                    out!("verdict=sat");
                    write_witness(&p, x, witness.as_deref())?;
                    EXIT_SAT
                }
                VerifyResult::Unknown(reason) => {
                    out!("verdict=unknown");
                    out!("reason={reason}");
                    EXIT_UNKNOWN
                }
            };
            let s = &v.stats;
            out!("splits={}", s.splits);
            out!("lp_calls={}", s.lp_calls);
            out!("gate_invocations={}", s.gate_invocations);
            out!("gate_refinements={}", s.gate_refinements);
            out!("stabilized_units={}", s.stabilized_units);
            out!("lemmas_learned={}", s.lemmas_learned);
            out!("clauses_learned={}", s.clauses_learned);
            out!("nodes={}", s.nodes);
            out!("tgct_rows={}", s.tgct_rows);
            Ok(ExitCode::from(code))
        }
        Command::Check { problem, proof } => {
            let p = load(&problem)?;
            let text = std::fs::read_to_string(&proof).map_err(|e| {
                eprintln!("error: {}: {e}", proof.display());
                ExitCode::from(EXIT_INPUT)
            })?;
            match check_proof_str(&p, &text) {
                Ok(stats) => {
                    out!("verdict=accept");
                    out!("nodes={}", stats.nodes);
                    out!("leaves={}", stats.leaves);
                    out!("derived_rows={}", stats.derived_rows);
                    out!("multiplications={}", stats.multiplications);
                    Ok(ExitCode::from(0))
                }
                Err(r) => {
                    out!("verdict=reject");
                    out!("path={}", r.path);
                    out!("reason={}", r.reason);
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::Oracle { problem, cap, witness } => {
            let p = load(&problem)?;
            match oracle_verify(&p, cap) {
                Ok(r) => {
                    out!("unstable_units={}", r.unstable);
                    out!("lp_calls={}", r.lp_calls);
                    match r.verdict {
                        OracleVerdict::Unsat => {
                            out!("verdict=unsat");
                            Ok(ExitCode::from(EXIT_UNSAT))
                        }
                        OracleVerdict::Sat(x) => {
                            out!("verdict=sat");
                            write_witness(&p, &x, witness.as_deref())?;
                            Ok(ExitCode::from(EXIT_SAT))
                        }
                    }
                }
                Err(e @ OracleError::CapExceeded { .. }) => {
                    eprintln!("error: {e}");
                    Ok(ExitCode::from(EXIT_CAP))
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    Ok(ExitCode::from(EXIT_UNKNOWN))
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    run(cli).unwrap_or_else(|code| code)
}
