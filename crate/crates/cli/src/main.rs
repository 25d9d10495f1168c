//! `guidelab` command line.
//!
//! Every subcommand writes one JSON report (or CSV for `oracle-diag`) to
//! `--output` or stdout. Exit codes: 0 success, 2 validation or promise
//! failure, 3 budget exhausted, 64 usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use guidelab::amplify::csp::{apply_gap_gadget, csp_to_diagonal, CnfFormula, GapGadget};
use guidelab::amplify::{decide, DecideOptions, DecisionInstance, Engine, DEFAULT_BUDGET};
use guidelab::clockred::{
    build_block_instance, build_clock_with, default_parameters, verify_fidelity_chain,
    VerifierCircuit, DEFAULT_PENALTY_CONSTANT,
};
use guidelab::exactsim::diagonalize;
use guidelab::hamiltonian::{HamiltonianFile, LocalHamiltonian};
use guidelab::qcpcp::{
    assemble_hamiltonian, learn_statistics_with, omega_size, reduction_parameters, LearnOptions,
    QcpcpVerifier,
};
use guidelab::signpoly::{build_sign_poly_with, SignPolyOptions};
use guidelab::states::sampling::SamplableAccess;
use guidelab::states::synth::{circuit_fidelity, mps_to_circuit};
use guidelab::states::{MpsState, StabilizerState, StateFile, SubsetState};
use guidelab::{circuit::Circuit, Error};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const SCHEMA_VERSION: u32 = 1;
const BUDGET_ENV: &str = "GUIDELAB_BUDGET";

const EXIT_INVALID: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "guidelab", version, about = "Guided local Hamiltonian toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutputArg {
    /// Report path; stdout when omitted.
    #[arg(long, alias = "report")]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Decide a guided low-energy instance by spectral amplification.
    Decide {
        #[arg(long)]
        hamiltonian: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        #[arg(long)]
        zeta: f64,
        /// Observable budget; falls back to GUIDELAB_BUDGET.
        #[arg(long)]
        budget: Option<u128>,
        /// `term_expansion` or `vector_recurrence`.
        #[arg(long, default_value = "term_expansion")]
        engine: String,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Energy of a guiding state.
    Expect {
        #[arg(long)]
        hamiltonian: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Build and certify a sign polynomial.
    Signpoly {
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = SignPolyOptions::default().grid_points)]
        grid_points: usize,
        #[arg(long, default_value_t = SignPolyOptions::default().max_degree)]
        max_degree: usize,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Build the clock Hamiltonian of a verifier circuit.
    FkBuild {
        #[command(flatten)]
        clock: ClockArgs,
        /// Also build the block instance with this offset.
        #[arg(long)]
        b: Option<f64>,
        #[arg(long, default_value_t = 0)]
        idle: usize,
        /// Write the bare Hamiltonian file here.
        #[arg(long)]
        hamiltonian_out: Option<PathBuf>,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Check the low-energy spectrum and the fidelity chain of a block instance.
    FkVerify {
        #[command(flatten)]
        clock: ClockArgs,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long, default_value_t = 0)]
        idle: usize,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Learn a diagonal Hamiltonian from a query verifier.
    QcpcpLearn {
        #[arg(long)]
        verifier: PathBuf,
        /// Target accuracy; sets gamma, eps0 and eps1 when they are omitted.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        eps0: Option<f64>,
        #[arg(long)]
        eps1: Option<f64>,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sample budget; falls back to GUIDELAB_BUDGET.
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        hamiltonian_out: Option<PathBuf>,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Dense spectrum as CSV, with guide overlaps when a state is given.
    OracleDiag {
        #[arg(long)]
        hamiltonian: PathBuf,
        #[arg(long)]
        state: Option<PathBuf>,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Compile an MPS state file to a circuit.
    Mps2circ {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        eps: f64,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Encode a DIMACS CNF formula as a diagonal Hamiltonian.
    Csp2ham {
        #[arg(long)]
        cnf: PathBuf,
        /// Normalizing clause count; defaults to the formula's.
        #[arg(long)]
        m_total: Option<usize>,
        /// Record the thresholds `3/10` and `(4 - gamma)/10`.
        #[arg(long)]
        gamma: Option<f64>,
        /// Pass 3-literal clauses through the ten-clause gap gadget first.
        #[arg(long)]
        gadget: bool,
        #[arg(long)]
        hamiltonian_out: Option<PathBuf>,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Draw basis-state samples from a subset, MPS or stabilizer state.
    Sample {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutputArg,
    },
}

#[derive(Args)]
struct ClockArgs {
    #[arg(long)]
    circuit: PathBuf,
    /// Input bits, qubit order, e.g. `0110`.
    #[arg(long, default_value = "")]
    input: String,
    /// Output penalty; defaults to `0.1/T⁵`.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_PENALTY_CONSTANT)]
    penalty_constant: f64,
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                eprintln!("\n{}", Cli::command().render_help());
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::BudgetExceeded(_) => ExitCode::from(EXIT_BUDGET),
                _ => ExitCode::from(EXIT_INVALID),
            }
        }
    }
}

fn run(command: Command) -> CmdResult {
    match command {
        Command::Decide {
            hamiltonian,
            state,
            a,
            b,
            zeta,
            budget,
            engine,
            out,
        } => {
            let h = load_hamiltonian(&hamiltonian)?;
            let guide = load_state(&state)?.build()?;
            let engine: Engine = engine
                .parse()
                .map_err(|e: Error| Failure::Usage(e.to_string()))?;
            let budget = resolve_budget(budget)?.unwrap_or(DEFAULT_BUDGET);
            let opts = DecideOptions {
                budget,
                engine,
                ..DecideOptions::default()
            };
            let report = decide(
                &DecisionInstance {
                    hamiltonian: &h,
                    a,
                    b,
                    zeta,
                    guide: guide.as_ref(),
                },
                &opts,
            )?;
            let params = json!({
                "hamiltonian": hamiltonian, "state": state, "a": a, "b": b, "zeta": zeta,
                "budget": budget.to_string(), "engine": engine,
                "guide": guide.description(),
            });
            emit_report("decide", params, to_value(&report)?, &out)
        }
        Command::Expect {
            hamiltonian,
            state,
            out,
        } => {
            let h = load_hamiltonian(&hamiltonian)?;
            let guide = load_state(&state)?.build()?;
            if guide.num_qubits() != h.n {
                return Err(Error::DimensionMismatch(format!(
                    "state on {} qubits, Hamiltonian on {}",
                    guide.num_qubits(),
                    h.n
                ))
                .into());
            }
            let per_term = h
                .terms
                .iter()
                .map(|t| guide.expectation(t))
                .collect::<guidelab::Result<Vec<f64>>>()?;
            let energy: f64 = per_term.iter().sum();
            let result = json!({
                "energy": energy,
                "term_expectations": per_term,
                "additive_error": guide.epsilon() * h.weight_sum(),
            });
            let params =
                json!({"hamiltonian": hamiltonian, "state": state, "guide": guide.description()});
            emit_report("expect", params, result, &out)
        }
        Command::Signpoly {
            delta,
            eps,
            grid_points,
            max_degree,
            out,
        } => {
            let opts = SignPolyOptions {
                grid_points,
                max_degree,
                ..SignPolyOptions::default()
            };
            let poly = build_sign_poly_with(delta, eps, opts)?;
            let params = json!({"delta": delta, "eps": eps, "grid_points": grid_points, "max_degree": max_degree});
            emit_report("signpoly", params, to_value(&poly)?, &out)
        }
        Command::FkBuild {
            clock,
            b,
            idle,
            hamiltonian_out,
            out,
        } => {
            let (circ, input, eps) = load_clock_args(&clock)?;
            let instance = build_clock_with(&circ, &input, eps, clock.penalty_constant)?;
            let (h, block_info) = match b {
                Some(b) => {
                    let block = build_block_instance(&instance, b, idle)?;
                    let info = json!({
                        "b": b, "idle": idle,
                        "flag_qubit": block.flag_qubit(),
                        "accepting_witness": bits_string(&block.accepting_witness),
                        "accept_probabilities": block.accept_probabilities,
                    });
                    (block.hamiltonian, info)
                }
                None => (instance.h_fk(), Value::Null),
            };
            let file = h.to_file();
            write_hamiltonian(hamiltonian_out.as_deref(), &file)?;
            let result = json!({
                "steps": instance.steps(),
                "computation_qubits": instance.computation_qubits(),
                "total_qubits": h.n,
                "terms": h.terms.len(),
                "block": block_info,
                "hamiltonian": to_value(&file)?,
            });
            let params = clock_params(&clock, eps);
            emit_report("fk-build", params, result, &out)
        }
        Command::FkVerify {
            clock,
            b,
            idle,
            out,
        } => {
            let (circ, input, eps) = load_clock_args(&clock)?;
            let instance = build_clock_with(&circ, &input, eps, clock.penalty_constant)?;
            let low_energy = instance.low_energy_check()?;
            let b = b.unwrap_or_else(|| default_parameters(circ.gate_count() + idle).0);
            let block = build_block_instance(&instance, b, idle)?;
            let chain = verify_fidelity_chain(&block)?;
            let mut params = clock_params(&clock, eps);
            params["b"] = json!(b);
            params["idle"] = json!(idle);
            let result =
                json!({"low_energy": to_value(&low_energy)?, "fidelity_chain": to_value(&chain)?});
            emit_report("fk-verify", params, result, &out)
        }
        Command::QcpcpLearn {
            verifier,
            eps,
            gamma,
            eps0,
            eps1,
            delta,
            seed,
            budget,
            hamiltonian_out,
            out,
        } => {
            let v = QcpcpVerifier::from_json_str(&read_file(&verifier)?)?;
            let omega = omega_size(v.proof_length, v.num_queries())?;
            let schedule = eps.map(|e| reduction_parameters(e, omega));
            let pick = |given: Option<f64>, idx: usize, name: &str| {
                given
                    .or_else(|| schedule.map(|s| [s.0, s.1, s.2][idx]))
                    .ok_or_else(|| {
                        Failure::Usage(format!("--{name} is required unless --eps is given"))
                    })
            };
            let gamma = pick(gamma, 0, "gamma")?;
            let eps0 = pick(eps0, 1, "eps0")?;
            let eps1 = pick(eps1, 2, "eps1")?;
            let mut opts = LearnOptions::default();
            if let Some(cap) = resolve_budget(budget.map(u128::from))? {
                opts.budget = u64::try_from(cap).unwrap_or(u64::MAX);
            }
            let stats = learn_statistics_with(&v, gamma, eps0, eps1, delta, seed, &opts)?;
            let learned = assemble_hamiltonian(&stats)?;
            let file = learned.hamiltonian.to_local()?.to_file();
            write_hamiltonian(hamiltonian_out.as_deref(), &file)?;
            let params = json!({
                "verifier": verifier, "eps": eps, "gamma": gamma, "eps0": eps0, "eps1": eps1,
                "delta": delta, "seed": seed, "options": to_value(&opts)?,
            });
            let result = json!({
                "hamiltonian": to_value(&file)?,
                "certificate": {
                    "bound": learned.bound,
                    "terms_bounded": learned.terms_bounded,
                    "total_weight": learned.total_weight,
                    "omega_size": stats.omega_size,
                    "samples_per_answer": stats.samples_per_answer,
                    "tuples_kept": stats.estimates.len(),
                    "tuples_removed": stats.removed,
                    "flagged_tuples": stats.estimates.iter().filter(|e| e.flagged).count(),
                },
                "statistics": to_value(&stats)?,
            });
            emit_report("qcpcp-learn", params, result, &out)
        }
        Command::OracleDiag {
            hamiltonian,
            state,
            out,
        } => {
            let h = load_hamiltonian(&hamiltonian)?;
            let spectrum = diagonalize(&h.to_dense()?)?;
            let guide = match state {
                Some(p) => Some(load_state(&p)?.build()?.to_statevector()?),
                None => None,
            };
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Failure::Core(Error::Io(e.into()));
            match &guide {
                Some(_) => w.write_record(["index", "eigenvalue", "guide_overlap"]),
                None => w.write_record(["index", "eigenvalue"]),
            }
            .map_err(io)?;
            for (i, lambda) in spectrum.eigenvalues.iter().enumerate() {
                let mut row = vec![i.to_string(), lambda.to_string()];
                if let Some(u) = &guide {
                    let col = spectrum.eigenvectors.column(i);
                    let amp: guidelab::linalg::C64 =
                        col.iter().zip(&u.amps).map(|(e, a)| e.conj() * a).sum();
                    row.push(amp.norm_sqr().to_string());
                }
                w.write_record(&row).map_err(io)?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| Failure::Core(Error::Io(e.into_error())))?;
            write_output(&out, &bytes)
        }
        Command::Mps2circ { state, eps, out } => {
            let mps = match load_state(&state)? {
                StateFile::Mps {
                    n,
                    tensors,
                    periodic,
                } => build_mps(n, &tensors, periodic)?,
                other => {
                    return Err(Error::Validation(format!(
                        "expected an mps state file, got '{}'",
                        other.kind()
                    ))
                    .into())
                }
            };
            let compiled = mps_to_circuit(&mps, eps)?;
            let fidelity = circuit_fidelity(&mps, &compiled)?;
            let result = json!({
                "fidelity": fidelity,
                "gate_count": compiled.gate_count(),
                "two_qubit_gate_count": compiled.two_qubit_gate_count(),
                "compiled": to_value(&compiled)?,
            });
            emit_report(
                "mps2circ",
                json!({"state": state, "eps": eps}),
                result,
                &out,
            )
        }
        Command::Csp2ham {
            cnf,
            m_total,
            gamma,
            gadget,
            hamiltonian_out,
            out,
        } => {
            let mut formula = CnfFormula::parse_dimacs(&read_file(&cnf)?)?;
            if gadget {
                formula = apply_gap_gadget(&formula, &GapGadget::ten_clause())?;
            }
            let m = m_total.unwrap_or(formula.clauses.len());
            let encoded = csp_to_diagonal(&formula, m, gamma)?;
            let file = encoded.hamiltonian.to_local()?.to_file();
            write_hamiltonian(hamiltonian_out.as_deref(), &file)?;
            let result = json!({
                "variables": formula.num_vars,
                "clauses": formula.clauses.len(),
                "thresholds": encoded.thresholds.map(|(a, b)| json!({"a": a, "b": b})),
                "hamiltonian": to_value(&file)?,
            });
            let params = json!({"cnf": cnf, "m_total": m, "gamma": gamma, "gadget": gadget});
            emit_report("csp2ham", params, result, &out)
        }
        Command::Sample {
            state,
            count,
            seed,
            out,
        } => {
            let file = load_state(&state)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (n, samples) = match &file {
                StateFile::Subset { n, strings } => (
                    *n,
                    draw(&SubsetState::from_strings(*n, strings)?, count, &mut rng)?,
                ),
                StateFile::Mps {
                    n,
                    tensors,
                    periodic,
                } => (
                    *n,
                    draw(&build_mps(*n, tensors, *periodic)?, count, &mut rng)?,
                ),
                StateFile::Stabilizer { n, gates } => {
                    let s = StabilizerState::from_circuit(&Circuit {
                        n: *n,
                        gates: gates.clone(),
                    })?;
                    (*n, draw(&s, count, &mut rng)?)
                }
                other => {
                    return Err(Error::Unsupported(format!(
                        "no sampling access for '{}' states",
                        other.kind()
                    ))
                    .into())
                }
            };
            let strings: Vec<String> = samples.iter().map(|&x| index_string(x, n)).collect();
            let params = json!({"state": state, "count": count, "seed": seed, "kind": file.kind()});
            emit_report("sample", params, json!({"samples": strings}), &out)
        }
    }
}

fn draw<S: SamplableAccess>(
    state: &S,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> guidelab::Result<Vec<u128>> {
    (0..count).map(|_| state.sample(rng)).collect()
}

fn build_mps(
    n: usize,
    tensors: &[guidelab::states::MpsTensorFile],
    periodic: bool,
) -> guidelab::Result<MpsState> {
    let sites = tensors
        .iter()
        .map(|t| t.to_site())
        .collect::<guidelab::Result<Vec<_>>>()?;
    if sites.len() != n {
        return Err(Error::Validation(format!(
            "{} tensors for {n} sites",
            sites.len()
        )));
    }
    if periodic {
        MpsState::from_periodic(sites)
    } else {
        MpsState::new(sites)
    }
}

fn index_string(x: u128, n: usize) -> String {
    (0..n)
        .map(|q| {
            if (x >> (n - 1 - q)) & 1 == 1 {
                '1'
            } else {
                '0'
            }
        })
        .collect()
}

fn bits_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn parse_bits(s: &str) -> Result<Vec<bool>, Failure> {
    s.chars()
        .map(|ch| match ch {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Failure::Usage(format!("input bit '{other}' is not 0 or 1"))),
        })
        .collect()
}

fn load_clock_args(args: &ClockArgs) -> Result<(VerifierCircuit, Vec<bool>, f64), Failure> {
    let circ = VerifierCircuit::from_json_str(&read_file(&args.circuit)?)?;
    let input = parse_bits(&args.input)?;
    let eps = args
        .eps
        .unwrap_or_else(|| default_parameters(circ.gate_count()).1);
    Ok((circ, input, eps))
}

fn clock_params(args: &ClockArgs, eps: f64) -> Value {
    json!({
        "circuit": args.circuit, "input": args.input, "eps": eps,
        "penalty_constant": args.penalty_constant,
    })
}

/// `--budget` if given, else `GUIDELAB_BUDGET`, else `None`.
fn resolve_budget(flag: Option<u128>) -> Result<Option<u128>, Failure> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(BUDGET_ENV) {
        Ok(text) => text.trim().parse().map(Some).map_err(|_| {
            Failure::Usage(format!(
                "{BUDGET_ENV}='{text}' is not a non-negative integer"
            ))
        }),
        Err(_) => Ok(None),
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| {
        Failure::Core(Error::Validation(format!(
            "cannot read {}: {e}",
            path.display()
        )))
    })
}

fn load_hamiltonian(path: &Path) -> Result<LocalHamiltonian, Failure> {
    Ok(LocalHamiltonian::from_json_str(&read_file(path)?)?)
}

fn load_state(path: &Path) -> Result<StateFile, Failure> {
    Ok(StateFile::from_json_str(&read_file(path)?)?)
}

fn to_value<T: serde::Serialize>(x: &T) -> Result<Value, Failure> {
    serde_json::to_value(x).map_err(|e| Failure::Core(e.into()))
}

fn write_hamiltonian(path: Option<&Path>, file: &HamiltonianFile) -> CmdResult {
    if let Some(p) = path {
        let text = serde_json::to_string_pretty(file).map_err(|e| Failure::Core(e.into()))?;
        std::fs::write(p, text + "\n").map_err(|e| Failure::Core(e.into()))?;
    }
    Ok(())
}

fn emit_report(command: &str, parameters: Value, result: Value, out: &OutputArg) -> CmdResult {
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "parameters": parameters,
        "result": result,
    });
    let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Core(e.into()))?;
    write_output(out, (text + "\n").as_bytes())
}

fn write_output(out: &OutputArg, bytes: &[u8]) -> CmdResult {
    match &out.output {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Failure::Core(e.into())),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(bytes)
                .map_err(|e| Failure::Core(e.into()))
        }
    }
}
