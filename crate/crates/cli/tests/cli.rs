use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use guidelab::amplify::csp::CnfFormula;
use guidelab::circuit::Circuit;
use guidelab::exactsim::{diagonalize, run_circuit};
use guidelab::hamiltonian::LocalHamiltonian;
use guidelab::linalg::C64;
use guidelab::qcpcp::{exact_statistics, toy::uniform_query};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_guidelab"));
    cmd.env_remove("GUIDELAB_BUDGET");
    cmd
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

fn report(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// `0.5·|1⟩⟨1|` on one qubit: spectrum {0, 0.5}.
const HALF_PROJECTOR: &str =
    r#"{"n": 1, "terms": [{"support": [0], "weight": 0.5, "matrix": [[0,0],[0,0],[0,0],[1,0]]}]}"#;
const HALF_IDENTITY: &str =
    r#"{"n": 1, "terms": [{"support": [0], "weight": 0.5, "matrix": [[1,0],[0,0],[0,0],[1,0]]}]}"#;

fn planted_dir() -> TempDir {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "h.json", HALF_PROJECTOR);
    write(dir.path(), "id.json", HALF_IDENTITY);
    write(
        dir.path(),
        "u0.json",
        r#"{"kind": "subset", "n": 1, "strings": ["0"]}"#,
    );
    write(
        dir.path(),
        "u1.json",
        r#"{"kind": "subset", "n": 1, "strings": ["1"]}"#,
    );
    write(
        dir.path(),
        "plus.json",
        r#"{"kind": "subset", "n": 1, "strings": ["0", "1"]}"#,
    );
    dir
}

const DECIDE_YES: [&str; 11] = [
    "decide",
    "--hamiltonian",
    "h.json",
    "--state",
    "u0.json",
    "--a",
    "0.1",
    "--b",
    "0.4",
    "--zeta",
    "1.0",
];

#[test]
fn decide_planted_yes() {
    let dir = planted_dir();
    let r = report(&run(&DECIDE_YES, dir.path()));
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["result"]["verdict"], "YES");
    let norm = r["result"]["filtered_norm"].as_f64().unwrap();
    assert!((0.9..=1.0).contains(&norm), "{norm}");
    assert_eq!(r["result"]["alpha"], 0.25);
    assert_eq!(r["parameters"]["zeta"], 1.0);
}

#[test]
fn decide_planted_no() {
    let dir = planted_dir();
    let args = [
        "decide",
        "--hamiltonian",
        "id.json",
        "--state",
        "u1.json",
        "--a",
        "0.1",
        "--b",
        "0.4",
        "--zeta",
        "1.0",
        "--engine",
        "vector_recurrence",
    ];
    let r = report(&run(&args, dir.path()));
    assert_eq!(r["result"]["verdict"], "NO");
    assert!(r["result"]["filtered_norm"].as_f64().unwrap() <= 0.5);
    assert_eq!(r["result"]["engine"], "vector_recurrence");
}

#[test]
fn decide_writes_report_file() {
    let dir = planted_dir();
    let mut args = DECIDE_YES.to_vec();
    args.extend(["--report", "out.json"]);
    let out = run(&args, dir.path());
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let r: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out.json")).unwrap())
            .unwrap();
    assert_eq!(r["result"]["verdict"], "YES");
}

#[test]
fn missing_file_exits_2() {
    let dir = planted_dir();
    let mut args = DECIDE_YES.to_vec();
    args[2] = "absent.json";
    let out = run(&args, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.json"));
}

#[test]
fn promise_violations_exit_2() {
    let dir = planted_dir();
    let mut args = DECIDE_YES.to_vec();
    args[8] = "0.05"; // b below a
    assert_eq!(run(&args, dir.path()).status.code(), Some(2));
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"n": 1, "terms": [{"support": [0], "weight": 1, "matrix": [[0,0],[1,0],[0,0],[0,0]]}]}"#,
    );
    args = DECIDE_YES.to_vec();
    args[2] = bad.to_str().unwrap();
    assert_eq!(run(&args, dir.path()).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_64() {
    let dir = planted_dir();
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(64));
    assert_eq!(
        run(&["decide", "--a", "0.1"], dir.path()).status.code(),
        Some(64)
    );
    let mut args = DECIDE_YES.to_vec();
    args.extend(["--engine", "magic"]);
    assert_eq!(run(&args, dir.path()).status.code(), Some(64));
    let out = run(&["signpoly", "--delta", "x", "--eps", "0.1"], dir.path());
    assert_eq!(out.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(run(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn budget_from_env_and_flag() {
    let dir = planted_dir();
    let out = bin()
        .args(DECIDE_YES)
        .env("GUIDELAB_BUDGET", "3")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let mut args = DECIDE_YES.to_vec();
    args.extend(["--budget", "1000"]);
    let out = bin()
        .args(&args)
        .env("GUIDELAB_BUDGET", "3")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(report(&out)["parameters"]["budget"], "1000");
    let out = bin()
        .args(DECIDE_YES)
        .env("GUIDELAB_BUDGET", "lots")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(64));
}

/// Chebyshev series `Σ c_k T_k(x/2)` via `T_k(y) = cos(k·acos y)`.
fn chebyshev_direct(coeffs: &[f64], x: f64) -> f64 {
    let theta = (x / 2.0).clamp(-1.0, 1.0).acos();
    coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| c * (k as f64 * theta).cos())
        .sum()
}

#[test]
fn signpoly_certifies_on_grid() {
    let dir = TempDir::new().unwrap();
    let r = report(&run(
        &["signpoly", "--delta", "0.5", "--eps", "0.1"],
        dir.path(),
    ));
    let coeffs: Vec<f64> = r["result"]["chebyshev"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(
        coeffs.len(),
        r["result"]["degree"].as_u64().unwrap() as usize + 1
    );
    for j in 0..=20_000 {
        let x = -2.0 + 4.0 * j as f64 / 20_000.0;
        let p = chebyshev_direct(&coeffs, x);
        assert!(p.abs() <= 1.0 + 1e-12, "|P({x})| = {}", p.abs());
        if x.abs() >= 0.5 {
            assert!((p - x.signum()).abs() <= 0.1 + 1e-12, "P({x}) = {p}");
        }
    }
}

#[test]
fn expect_reports_energy() {
    let dir = planted_dir();
    let r = report(&run(
        &["expect", "--hamiltonian", "h.json", "--state", "plus.json"],
        dir.path(),
    ));
    assert!((r["result"]["energy"].as_f64().unwrap() - 0.25).abs() < 1e-15);
    let r = report(&run(
        &["expect", "--hamiltonian", "h.json", "--state", "u1.json"],
        dir.path(),
    ));
    assert!((r["result"]["energy"].as_f64().unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn oracle_diag_csv() {
    let dir = TempDir::new().unwrap();
    // diagonal two-qubit Hamiltonian with entries 0.3·(0, 1, 1/3, 2/3)
    write(
        dir.path(),
        "d.json",
        r#"{"n": 2, "kind": "diagonal", "terms": [{"support": [0, 1], "weight": 0.3,
            "matrix": [[0,0],[0,0],[0,0],[0,0], [0,0],[1,0],[0,0],[0,0],
                       [0,0],[0,0],[0.3333333333333333,0],[0,0], [0,0],[0,0],[0,0],[0.6666666666666666,0]]}]}"#,
    );
    write(
        dir.path(),
        "u.json",
        r#"{"kind": "subset", "n": 2, "strings": ["10"]}"#,
    );
    let out = run(
        &[
            "oracle-diag",
            "--hamiltonian",
            "d.json",
            "--state",
            "u.json",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    assert_eq!(
        rdr.headers().unwrap(),
        vec!["index", "eigenvalue", "guide_overlap"]
    );
    let rows: Vec<(f64, f64)> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[1].parse().unwrap(), r[2].parse().unwrap())
        })
        .collect();
    let want = [0.0, 0.1, 0.2, 0.3];
    for (k, (lambda, overlap)) in rows.iter().enumerate() {
        assert!((lambda - want[k]).abs() < 1e-12);
        // |10⟩ carries energy 0.1
        let expected = if k == 1 { 1.0 } else { 0.0 };
        assert!((overlap - expected).abs() < 1e-12);
    }
}

fn verifier_file(dir: &Path) -> PathBuf {
    let v = uniform_query(1, 0.8, 0.1).unwrap();
    write(dir, "v.json", &serde_json::to_string(&v).unwrap())
}

#[test]
fn qcpcp_learn_certificate_and_replay() {
    let dir = TempDir::new().unwrap();
    verifier_file(dir.path());
    let args = [
        "qcpcp-learn",
        "--verifier",
        "v.json",
        "--eps",
        "0.1",
        "--delta",
        "0.05",
        "--seed",
        "11",
        "--hamiltonian-out",
        "learned.json",
    ];
    let first = run(&args, dir.path());
    let second = run(&args, dir.path());
    assert_eq!(first.stdout, second.stdout);
    let r = report(&first);
    assert_eq!(r["parameters"]["seed"], 11);
    let gamma = r["parameters"]["gamma"].as_f64().unwrap();
    // |Ω| = 2 for one query into a two-bit proof
    assert!((gamma - 0.1 / 8.0).abs() < 1e-15);

    let learned = LocalHamiltonian::load(&dir.path().join("learned.json")).unwrap();
    let embedded =
        LocalHamiltonian::from_json_str(&r["result"]["hamiltonian"].to_string()).unwrap();
    assert_eq!(learned, embedded);
    let v = uniform_query(1, 0.8, 0.1).unwrap();
    let exact = exact_statistics(&v)
        .unwrap()
        .hamiltonian()
        .unwrap()
        .to_local()
        .unwrap();
    let bound = r["result"]["certificate"]["bound"].as_f64().unwrap();
    for x in 0..4usize {
        let bits = [x & 2 != 0, x & 1 != 0];
        let diff = learned.basis_energy(&bits).unwrap() - exact.basis_energy(&bits).unwrap();
        assert!(diff.abs() <= bound, "x={x}: {diff} vs {bound}");
    }

    let other = run(
        &[
            "qcpcp-learn",
            "--verifier",
            "v.json",
            "--eps",
            "0.1",
            "--delta",
            "0.05",
            "--seed",
            "12",
        ],
        dir.path(),
    );
    assert_eq!(report(&other)["parameters"]["seed"], 12);
}

#[test]
fn qcpcp_learn_parameter_errors() {
    let dir = TempDir::new().unwrap();
    verifier_file(dir.path());
    let missing = run(
        &[
            "qcpcp-learn",
            "--verifier",
            "v.json",
            "--gamma",
            "0.1",
            "--delta",
            "0.05",
        ],
        dir.path(),
    );
    assert_eq!(missing.status.code(), Some(64));
    let starved = run(
        &[
            "qcpcp-learn",
            "--verifier",
            "v.json",
            "--eps",
            "0.1",
            "--delta",
            "0.05",
            "--budget",
            "10",
        ],
        dir.path(),
    );
    assert_eq!(starved.status.code(), Some(3));
}

fn accepting_circuit(dir: &Path) {
    // output qubit 0 copies the witness bit
    write(
        dir,
        "circ.json",
        r#"{"ancilla": 1, "input": 0, "witness": 1, "gates": [{"name": "CNOT", "qubits": [1, 0]}]}"#,
    );
}

#[test]
fn fk_build_emits_frustration_free_hamiltonian() {
    let dir = TempDir::new().unwrap();
    accepting_circuit(dir.path());
    let r = report(&run(
        &[
            "fk-build",
            "--circuit",
            "circ.json",
            "--eps",
            "0.01",
            "--hamiltonian-out",
            "fk.json",
        ],
        dir.path(),
    ));
    assert_eq!(r["result"]["steps"], 1);
    let h = LocalHamiltonian::load(&dir.path().join("fk.json")).unwrap();
    assert_eq!(h.n, 3);
    let spectrum = diagonalize(&h.to_dense().unwrap()).unwrap();
    // witness 1 is accepted with certainty, so the history state has zero energy
    assert!(spectrum.ground_energy().abs() < 1e-12);

    let r = report(&run(
        &[
            "fk-build",
            "--circuit",
            "circ.json",
            "--b",
            "0.001",
            "--idle",
            "2",
        ],
        dir.path(),
    ));
    assert_eq!(r["result"]["block"]["accepting_witness"], "1");
    assert_eq!(r["result"]["total_qubits"], 6);
}

#[test]
fn fk_verify_reports_chain() {
    let dir = TempDir::new().unwrap();
    accepting_circuit(dir.path());
    let r = report(&run(
        &["fk-verify", "--circuit", "circ.json", "--idle", "1"],
        dir.path(),
    ));
    let chain = &r["result"]["fidelity_chain"];
    assert_eq!(chain["triangle_bound_holds"], true);
    assert_eq!(chain["completeness"], 1.0);
    // one idle step in front of one gate: N/(N + T̃ + 1) = 1/3
    assert!((chain["guide_history_overlap"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert!(r["result"]["low_energy"]["eigenvalues"].is_array());
}

#[test]
fn fk_build_rejects_bad_input_bits() {
    let dir = TempDir::new().unwrap();
    accepting_circuit(dir.path());
    let out = run(
        &["fk-build", "--circuit", "circ.json", "--input", "2"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn csp2ham_minimum_matches_brute_force() {
    let dir = TempDir::new().unwrap();
    let dimacs = "c toy\np cnf 3 4\n1 2 0\n-1 3 0\n-2 -3 0\n1 -3 0\n";
    write(dir.path(), "f.cnf", dimacs);
    let r = report(&run(
        &[
            "csp2ham",
            "--cnf",
            "f.cnf",
            "--gamma",
            "0.5",
            "--hamiltonian-out",
            "csp.json",
        ],
        dir.path(),
    ));
    assert_eq!(r["result"]["clauses"], 4);
    assert!((r["result"]["thresholds"]["b"].as_f64().unwrap() - 0.35).abs() < 1e-15);
    let h = LocalHamiltonian::load(&dir.path().join("csp.json")).unwrap();
    let formula = CnfFormula::parse_dimacs(dimacs).unwrap();
    let (mut best_sat, mut min_energy) = (0, f64::INFINITY);
    for x in 0..8usize {
        let bits: Vec<bool> = (0..3).map(|q| (x >> (2 - q)) & 1 == 1).collect();
        best_sat = best_sat.max(formula.satisfied_count(&bits));
        min_energy = min_energy.min(h.basis_energy(&bits).unwrap());
    }
    assert!((min_energy - (1.0 - best_sat as f64 / 4.0)).abs() < 1e-12);
}

#[test]
fn mps2circ_ghz_fidelity() {
    let dir = TempDir::new().unwrap();
    let ghz = guidelab::states::MpsState::ghz(4).unwrap();
    let tensors: Vec<_> = ghz
        .sites()
        .iter()
        .map(guidelab::states::MpsTensorFile::from_site)
        .collect();
    let file = serde_json::json!({"kind": "mps", "n": 4, "tensors": tensors});
    write(dir.path(), "ghz.json", &file.to_string());
    let r = report(&run(
        &["mps2circ", "--state", "ghz.json", "--eps", "0.001"],
        dir.path(),
    ));
    assert!(r["result"]["fidelity"].as_f64().unwrap() >= 0.999);
    let compiled = &r["result"]["compiled"];
    let circuit: Circuit = serde_json::from_value(compiled["circuit"].clone()).unwrap();
    let shift = compiled["ancilla_qubits"].as_u64().unwrap();
    let out = run_circuit(&circuit, None).unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let overlap: C64 = (out.amps[0] + out.amps[0b1111 << shift]) * h;
    assert!(overlap.norm_sqr() >= 0.999);

    write(
        dir.path(),
        "subset.json",
        r#"{"kind": "subset", "n": 1, "strings": ["0"]}"#,
    );
    let wrong = run(
        &["mps2circ", "--state", "subset.json", "--eps", "0.01"],
        dir.path(),
    );
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn sample_is_seeded_and_supported() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "s.json",
        r#"{"kind": "subset", "n": 3, "strings": ["011", "110"]}"#,
    );
    let args = [
        "sample", "--state", "s.json", "--count", "200", "--seed", "5",
    ];
    let a = run(&args, dir.path());
    assert_eq!(a.stdout, run(&args, dir.path()).stdout);
    let r = report(&a);
    let samples = r["result"]["samples"].as_array().unwrap();
    assert_eq!(samples.len(), 200);
    assert!(samples.iter().all(|s| s == "011" || s == "110"));
    assert!(samples.iter().any(|s| s == "011") && samples.iter().any(|s| s == "110"));

    write(
        dir.path(),
        "iqp.json",
        r#"{"kind": "iqp", "n": 2, "gates": [{"name": "CZ", "qubits": [0, 1]}], "epsilon": 0.1}"#,
    );
    let out = run(&["sample", "--state", "iqp.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
