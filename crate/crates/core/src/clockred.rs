//! Circuit-to-Hamiltonian reduction with a small output penalty, the CNOT
//! trick, the block YES/NO Hamiltonian and its pre-idled guiding states.
//!
//! Register layout of a verifier: `[ancilla | input | witness | copy]`, so the
//! output (qubit 0) is the first ancilla whenever one exists. The clock
//! instance appends `T` unary clock qubits `c_1..c_T`; the block instance
//! appends one flag qubit after those.

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::exactsim::{run_circuit, StateVector, MAX_SIM_QUBITS};
use crate::hamiltonian::{LocalHamiltonian, LocalTerm, ProjectorSumHamiltonian};
use crate::linalg::{c, hermitian_eigen, CMat, C64, ONE, ZERO};
use crate::states::sampling::RowAccess;
use crate::states::SubsetState;

/// Default constant in the penalty condition `ε ≤ c / T³`.
pub const DEFAULT_PENALTY_CONSTANT: f64 = 1.0;
/// Gates a verifier may use.
pub const GATE_SET: [&str; 6] = ["H", "X", "T", "CNOT", "TOFFOLI", "I"];
/// Largest legal-clock subspace diagonalized densely.
pub const MAX_RESTRICTED_DIM: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierCircuit {
    #[serde(alias = "ancilla")]
    pub num_ancilla: usize,
    #[serde(alias = "input")]
    pub num_input: usize,
    #[serde(alias = "witness")]
    pub num_witness: usize,
    /// Zero-initialized register the circuit never touches except through
    /// the copying CNOTs.
    #[serde(default, alias = "copy")]
    pub num_copy: usize,
    pub gates: Vec<Gate>,
}

impl VerifierCircuit {
    pub fn new(
        num_ancilla: usize,
        num_input: usize,
        num_witness: usize,
        gates: Vec<Gate>,
    ) -> Result<Self> {
        let v = VerifierCircuit {
            num_ancilla,
            num_input,
            num_witness,
            num_copy: 0,
            gates,
        };
        v.validate()?;
        Ok(v)
    }

    /// Parses a circuit file with `{ancilla, input, witness}` register sizes
    /// and a gate list.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: VerifierCircuit =
            serde_json::from_str(s).map_err(|e| Error::Parse(format!("circuit file: {e}")))?;
        v.validate()?;
        Ok(v)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_ancilla + self.num_input + self.num_witness + self.num_copy
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    pub fn ancilla_qubits(&self) -> std::ops::Range<usize> {
        0..self.num_ancilla
    }

    pub fn input_qubits(&self) -> std::ops::Range<usize> {
        let s = self.num_ancilla;
        s..s + self.num_input
    }

    pub fn witness_qubits(&self) -> std::ops::Range<usize> {
        let s = self.num_ancilla + self.num_input;
        s..s + self.num_witness
    }

    pub fn copy_qubits(&self) -> std::ops::Range<usize> {
        let s = self.num_ancilla + self.num_input + self.num_witness;
        s..s + self.num_copy
    }

    /// Qubits that start in `|0⟩`.
    pub fn zero_qubits(&self) -> Vec<usize> {
        self.ancilla_qubits().chain(self.copy_qubits()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_qubits() == 0 {
            return Err(Error::Validation("verifier has no qubits".into()));
        }
        for g in &self.gates {
            let name = g.canonical_name();
            if !GATE_SET.contains(&name.as_str()) {
                return Err(Error::InvalidGate(format!(
                    "gate '{}' outside {{H, X, T, CNOT, TOFFOLI, I}}",
                    g.name
                )));
            }
            if name != "I" {
                g.matrix()?;
            }
            if let Some(&q) = g.qubits.iter().find(|&&q| q >= self.num_qubits()) {
                return Err(Error::InvalidGate(format!(
                    "gate '{}' on qubit {q} outside {} qubits",
                    g.name,
                    self.num_qubits()
                )));
            }
        }
        Ok(())
    }

    pub fn to_circuit(&self) -> Circuit {
        Circuit {
            n: self.num_qubits(),
            gates: self.gates.clone(),
        }
    }

    /// Basis index of `|0…0⟩|x⟩|y⟩|0…0⟩`.
    pub fn initial_index(&self, input: &[bool], witness: &[bool]) -> Result<usize> {
        if input.len() != self.num_input || witness.len() != self.num_witness {
            return Err(Error::DimensionMismatch(format!(
                "expected {} input and {} witness bits, got {} and {}",
                self.num_input,
                self.num_witness,
                input.len(),
                witness.len()
            )));
        }
        let n = self.num_qubits();
        let mut idx = 0usize;
        for (q, &b) in self.input_qubits().zip(input) {
            idx |= (b as usize) << (n - 1 - q);
        }
        for (q, &b) in self.witness_qubits().zip(witness) {
            idx |= (b as usize) << (n - 1 - q);
        }
        Ok(idx)
    }

    /// Initial state with an arbitrary witness-register state.
    pub fn initial_state(&self, input: &[bool], witness: &StateVector) -> Result<StateVector> {
        if witness.n != self.num_witness {
            return Err(Error::DimensionMismatch(format!(
                "witness state on {} qubits, register has {}",
                witness.n, self.num_witness
            )));
        }
        let n = self.num_qubits();
        if n > MAX_SIM_QUBITS {
            return Err(Error::Size(format!("{n} qubits exceeds {MAX_SIM_QUBITS}")));
        }
        let mut amps = vec![ZERO; 1 << n];
        for (w, &a) in witness.amps.iter().enumerate() {
            let bits = bits_of(w, self.num_witness);
            amps[self.initial_index(input, &bits)?] = a;
        }
        StateVector::from_amplitudes(amps)
    }
}

fn bits_of(x: usize, width: usize) -> Vec<bool> {
    (0..width)
        .map(|i| (x >> (width - 1 - i)) & 1 == 1)
        .collect()
}

fn accept_probability(state: &StateVector) -> f64 {
    state.prob_one(0)
}

/// Probability that the verifier's output qubit reads 1.
pub fn simulate_accept_prob(
    circ: &VerifierCircuit,
    input: &[bool],
    witness: &[bool],
) -> Result<f64> {
    circ.validate()?;
    let n = circ.num_qubits();
    if n > MAX_SIM_QUBITS {
        return Err(Error::Size(format!("{n} qubits exceeds {MAX_SIM_QUBITS}")));
    }
    let start = StateVector::basis(n, circ.initial_index(input, witness)?)?;
    Ok(accept_probability(&run_circuit(
        &circ.to_circuit(),
        Some(start),
    )?))
}

/// Marriott–Watrous operator on the witness register:
/// `Q_ij = ⟨x,i,0|U† Π_acc U|x,j,0⟩`.
pub fn marriott_watrous(circ: &VerifierCircuit, input: &[bool]) -> Result<CMat> {
    circ.validate()?;
    let n = circ.num_qubits();
    if n > MAX_SIM_QUBITS || circ.num_witness > 8 {
        return Err(Error::Size(format!(
            "{n} qubits with a {}-qubit witness is too large",
            circ.num_witness
        )));
    }
    let p = circ.num_witness;
    let circuit = circ.to_circuit();
    let accepted: Vec<Vec<C64>> = (0..1usize << p)
        .map(|w| {
            let start = StateVector::basis(n, circ.initial_index(input, &bits_of(w, p))?)?;
            let out = run_circuit(&circuit, Some(start))?;
            // keep the accepting half
            Ok(out
                .amps
                .iter()
                .enumerate()
                .map(|(i, &a)| if (i >> (n - 1)) & 1 == 1 { a } else { ZERO })
                .collect())
        })
        .collect::<Result<_>>()?;
    let dim = 1usize << p;
    Ok(CMat::from_fn(dim, dim, |i, j| {
        accepted[i]
            .iter()
            .zip(&accepted[j])
            .map(|(a, b)| a.conj() * b)
            .sum()
    }))
}

/// Prepends CNOTs copying each witness qubit into a fresh zero register.
pub fn apply_cnot_trick(circ: &VerifierCircuit) -> VerifierCircuit {
    let mut out = circ.clone();
    let base = circ.num_qubits();
    out.num_copy += circ.num_witness;
    let mut gates: Vec<Gate> = circ
        .witness_qubits()
        .enumerate()
        .map(|(l, w)| Gate::new("CNOT", &[w, base + l]))
        .collect();
    gates.extend(circ.gates.iter().cloned());
    out.gates = gates;
    out
}

/// Prepends `count` identity gates.
pub fn pre_idle(circ: &VerifierCircuit, count: usize) -> VerifierCircuit {
    let mut out = circ.clone();
    let mut gates = vec![Gate::new("I", &[0]); count];
    gates.extend(circ.gates.iter().cloned());
    out.gates = gates;
    out
}

/// Feynman–Kitaev Hamiltonian `H_in + H_clock + H_prop + ε H_out` of a
/// verifier on a fixed input.
#[derive(Debug, Clone)]
pub struct ClockInstance {
    pub circuit: VerifierCircuit,
    pub input: Vec<bool>,
    pub eps: f64,
    pub h_in: LocalHamiltonian,
    pub h_clock: LocalHamiltonian,
    pub h_prop: LocalHamiltonian,
    /// Unweighted output projector; enters `H_FK` with weight `ε`.
    pub h_out: LocalHamiltonian,
}

fn diag_term(support: Vec<usize>, index: usize, weight: f64) -> Result<LocalTerm> {
    let d = 1usize << support.len();
    let mut m = CMat::zeros(d, d);
    m[(index, index)] = ONE;
    LocalTerm::new(support, m, weight)
}

fn outer(a: usize, b: usize, dim: usize) -> CMat {
    let mut m = CMat::zeros(dim, dim);
    m[(a, b)] = ONE;
    m
}

pub fn build_clock(circ: &VerifierCircuit, input: &[bool], eps: f64) -> Result<ClockInstance> {
    build_clock_with(circ, input, eps, DEFAULT_PENALTY_CONSTANT)
}

pub fn build_clock_with(
    circ: &VerifierCircuit,
    input: &[bool],
    eps: f64,
    penalty_constant: f64,
) -> Result<ClockInstance> {
    circ.validate()?;
    let t_gates = circ.gate_count();
    if t_gates == 0 {
        return Err(Error::Validation("verifier needs at least one gate".into()));
    }
    if input.len() != circ.num_input {
        return Err(Error::DimensionMismatch(format!(
            "{} input bits for a {}-bit input register",
            input.len(),
            circ.num_input
        )));
    }
    let limit = penalty_constant / (t_gates as f64).powi(3);
    if !(eps > 0.0) || eps > limit {
        return Err(Error::PenaltyTooLarge(format!(
            "eps = {eps} must lie in (0, {penalty_constant}/T³ = {limit:e}] for T = {t_gates}"
        )));
    }
    let q = circ.num_qubits();
    let total = q + t_gates;
    if total > 127 {
        return Err(Error::Size(format!("{total} qubits exceeds 127")));
    }
    let clock = |i: usize| q + i - 1;

    let mut h_in = Vec::new();
    for z in circ.zero_qubits() {
        // |1⟩_z |0⟩_{c1}
        h_in.push(diag_term(vec![z, clock(1)], 0b10, 1.0)?);
    }
    for (qb, &x) in circ.input_qubits().zip(input) {
        h_in.push(diag_term(
            vec![qb, clock(1)],
            if x { 0b00 } else { 0b10 },
            1.0,
        )?);
    }

    let mut h_clock = Vec::new();
    for i in 1..t_gates {
        h_clock.push(diag_term(vec![clock(i), clock(i + 1)], 0b01, 1.0)?);
    }

    let mut h_prop = Vec::new();
    for (t0, gate) in circ.gates.iter().enumerate() {
        let t = t0 + 1;
        let mut clock_qubits = Vec::new();
        let (mut before, mut after) = (Vec::new(), Vec::new());
        if t > 1 {
            clock_qubits.push(clock(t - 1));
            before.push(true);
            after.push(true);
        }
        clock_qubits.push(clock(t));
        before.push(false);
        after.push(true);
        if t < t_gates {
            clock_qubits.push(clock(t + 1));
            before.push(false);
            after.push(false);
        }
        let cd = 1usize << clock_qubits.len();
        let idx = |bits: &[bool]| bits.iter().fold(0usize, |a, &b| (a << 1) | b as usize);
        let (a, b) = (idx(&after), idx(&before));
        let (gate_qubits, u) = if gate.canonical_name() == "I" {
            (Vec::new(), CMat::identity(1, 1))
        } else {
            (gate.qubits.clone(), gate.matrix()?)
        };
        let gd = u.nrows();
        let id = CMat::identity(gd, gd);
        let m = (id.kronecker(&outer(a, a, cd)) + id.kronecker(&outer(b, b, cd))
            - u.kronecker(&outer(a, b, cd))
            - u.adjoint().kronecker(&outer(b, a, cd)))
            * c(0.5, 0.0);
        let mut support = gate_qubits;
        support.extend(clock_qubits);
        h_prop.push(LocalTerm::from_unsorted(&support, m, 1.0)?);
    }

    let h_out = vec![diag_term(vec![0, clock(t_gates)], 0b01, 1.0)?];

    Ok(ClockInstance {
        circuit: circ.clone(),
        input: input.to_vec(),
        eps,
        h_in: LocalHamiltonian::new(total, h_in)?,
        h_clock: LocalHamiltonian::new(total, h_clock)?,
        h_prop: LocalHamiltonian::new(total, h_prop)?,
        h_out: LocalHamiltonian::new(total, h_out)?,
    })
}

impl ClockInstance {
    pub fn steps(&self) -> usize {
        self.circuit.gate_count()
    }

    pub fn computation_qubits(&self) -> usize {
        self.circuit.num_qubits()
    }

    pub fn total_qubits(&self) -> usize {
        self.computation_qubits() + self.steps()
    }

    /// `H_in + H_clock + H_prop`.
    pub fn h0(&self) -> LocalHamiltonian {
        let mut terms = self.h_in.terms.clone();
        terms.extend(self.h_clock.terms.iter().cloned());
        terms.extend(self.h_prop.terms.iter().cloned());
        LocalHamiltonian {
            n: self.total_qubits(),
            terms,
        }
    }

    pub fn h_fk(&self) -> LocalHamiltonian {
        let mut h = self.h0();
        h.terms.extend(self.h_out.terms.iter().map(|t| LocalTerm {
            weight: t.weight * self.eps,
            ..t.clone()
        }));
        h
    }

    /// Basis index of computation index `comp` at clock time `t`.
    pub fn legal_index(&self, comp: usize, t: usize) -> u128 {
        let steps = self.steps();
        let clock_bits = ((1u128 << t) - 1) << (steps - t);
        ((comp as u128) << steps) | clock_bits
    }

    fn restricted_dim(&self) -> usize {
        (1usize << self.computation_qubits()) * (self.steps() + 1)
    }

    /// Matrix of `h` on the legal-clock subspace, basis ordered by
    /// `(computation index, t)`. Every term of the construction maps this
    /// subspace into itself.
    pub fn restricted_matrix(&self, h: &LocalHamiltonian) -> Result<CMat> {
        let dim = self.restricted_dim();
        if dim > MAX_RESTRICTED_DIM {
            return Err(Error::Size(format!(
                "legal-clock subspace of dimension {dim} exceeds {MAX_RESTRICTED_DIM}"
            )));
        }
        let steps = self.steps();
        let position = |idx: u128| -> Option<usize> {
            let clock_part = idx & ((1u128 << steps) - 1);
            let t = clock_part.count_ones() as usize;
            (self.legal_index((idx >> steps) as usize, t) == idx)
                .then(|| (idx >> steps) as usize * (steps + 1) + t)
        };
        let mut m = CMat::zeros(dim, dim);
        for comp in 0..1usize << self.computation_qubits() {
            for t in 0..=steps {
                let row = comp * (steps + 1) + t;
                for (col, v) in h.row(self.legal_index(comp, t)) {
                    let col = position(col).ok_or_else(|| {
                        Error::Numerical("term leaves the legal clock subspace".into())
                    })?;
                    m[(row, col)] += v;
                }
            }
        }
        Ok(m)
    }

    /// Computation-register states `U_t ⋯ U_1 |ψ⟩` for `t = 0..=T`.
    fn trajectory(&self, witness: &StateVector) -> Result<Vec<StateVector>> {
        let mut state = self.circuit.initial_state(&self.input, witness)?;
        let mut out = vec![state.clone()];
        for g in &self.circuit.gates {
            if g.canonical_name() != "I" {
                state.apply_gate(g)?;
            }
            out.push(state.clone());
        }
        Ok(out)
    }

    /// History state in the legal-clock basis of [`Self::restricted_matrix`].
    pub fn history_restricted(&self, witness: &StateVector) -> Result<Vec<C64>> {
        let steps = self.steps();
        let norm = 1.0 / ((steps + 1) as f64).sqrt();
        let mut v = vec![ZERO; self.restricted_dim()];
        for (t, s) in self.trajectory(witness)?.iter().enumerate() {
            for (comp, &a) in s.amps.iter().enumerate() {
                v[comp * (steps + 1) + t] = a * norm;
            }
        }
        Ok(v)
    }

    /// Dense history state `(T+1)^{-1/2} Σ_t U_t⋯U_1|ψ⟩|t̂⟩`.
    pub fn history_state(&self, witness: &StateVector) -> Result<StateVector> {
        let n = self.total_qubits();
        if n > MAX_SIM_QUBITS {
            return Err(Error::Size(format!("{n} qubits exceeds {MAX_SIM_QUBITS}")));
        }
        let norm = 1.0 / ((self.steps() + 1) as f64).sqrt();
        let mut amps = vec![ZERO; 1 << n];
        for (t, s) in self.trajectory(witness)?.iter().enumerate() {
            for (comp, &a) in s.amps.iter().enumerate() {
                amps[self.legal_index(comp, t) as usize] = a * norm;
            }
        }
        StateVector::from_amplitudes(amps)
    }

    pub fn basis_witness(&self, witness: &[bool]) -> Result<StateVector> {
        let p = self.circuit.num_witness;
        if witness.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "{} witness bits for a {p}-qubit register",
                witness.len()
            )));
        }
        StateVector::basis(
            p,
            witness.iter().fold(0usize, |a, &b| (a << 1) | b as usize),
        )
    }

    /// `⟨η(ψ)|H_FK|η(ψ)⟩` from the dense history state.
    pub fn history_energy(&self, witness: &StateVector) -> Result<f64> {
        let eta = self.history_state(witness)?;
        self.h_fk().energy(&eta.amps)
    }

    /// Compares the low-energy spectrum of `H_FK` with
    /// `ε(1 - μ_i)/(T+1)` for the eigenvalues `μ_i` of the Marriott–Watrous
    /// operator and fits `K` in the `K·T³ε²` deviation.
    pub fn low_energy_check(&self) -> Result<LowEnergyReport> {
        let restricted = self.restricted_matrix(&self.h_fk())?;
        let (eigenvalues, _) = hermitian_eigen(&restricted);
        let q = marriott_watrous(&self.circuit, &self.input)?;
        let (mu, _) = hermitian_eigen(&q);
        let steps = self.steps() as f64;
        let mut predicted: Vec<f64> = mu
            .iter()
            .map(|m| self.eps * (1.0 - m) / (steps + 1.0))
            .collect();
        predicted.sort_by(f64::total_cmp);
        let low: Vec<f64> = eigenvalues[..predicted.len()].to_vec();
        let deviation = low
            .iter()
            .zip(&predicted)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let scale = steps.powi(3) * self.eps * self.eps;
        Ok(LowEnergyReport {
            eigenvalues: low,
            predicted,
            max_deviation: deviation,
            fitted_k: deviation / scale,
            next_eigenvalue: eigenvalues.get(q.nrows()).copied(),
        })
    }

    /// `H_FK / ε` as an unweighted sum of projectors, replicating every
    /// `H_0` term `1/ε` times; needs `1/ε` to be an integer.
    pub fn projector_sum_form(&self) -> Result<ProjectorSumHamiltonian> {
        let copies = 1.0 / self.eps;
        let k = copies.round();
        if (copies - k).abs() > 1e-9 * copies || k > 1e6 {
            return Err(Error::Validation(format!(
                "1/eps = {copies} must be an integer of at most 10^6"
            )));
        }
        let mut terms = Vec::new();
        for t in &self.h0().terms {
            for _ in 0..k as usize {
                terms.push(t.clone());
            }
        }
        terms.extend(self.h_out.terms.iter().cloned());
        ProjectorSumHamiltonian::new(LocalHamiltonian::new(self.total_qubits(), terms)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowEnergyReport {
    pub eigenvalues: Vec<f64>,
    pub predicted: Vec<f64>,
    pub max_deviation: f64,
    pub fitted_k: f64,
    pub next_eigenvalue: Option<f64>,
}

/// `b = 0.1/T⁷`, `ε = 0.1/T⁵`.
pub fn default_parameters(total_gates: usize) -> (f64, f64) {
    let t = total_gates as f64;
    (0.1 / t.powi(7), 0.1 / t.powi(5))
}

/// `H = H_yes ⊗ |0⟩⟨0|_D + H_no ⊗ |1⟩⟨1|_D` with `H_no = Σ_i |1⟩⟨1|_i + b·I`.
#[derive(Debug, Clone)]
pub struct BlockInstance {
    /// Clock instance of the pre-idled circuit.
    pub clock: ClockInstance,
    pub b: f64,
    pub idle: usize,
    /// Gate count before idling.
    pub original_gates: usize,
    pub accepting_witness: Vec<bool>,
    pub accept_probabilities: Vec<f64>,
    pub h_no: LocalHamiltonian,
    pub hamiltonian: LocalHamiltonian,
}

fn with_flag(term: &LocalTerm, flag: usize, value: bool) -> Result<LocalTerm> {
    let p = if value {
        outer(1, 1, 2)
    } else {
        outer(0, 0, 2)
    };
    let mut support = term.support.clone();
    support.push(flag);
    LocalTerm::new(support, term.matrix.kronecker(&p), term.weight)
}

pub fn build_block_instance(clock: &ClockInstance, b: f64, idle: usize) -> Result<BlockInstance> {
    if !(b > 0.0) {
        return Err(Error::Validation(format!(
            "offset b = {b} must be positive"
        )));
    }
    let circ = &clock.circuit;
    let p = circ.num_witness;
    if p > 12 {
        return Err(Error::Size(format!(
            "{p} witness qubits is too many to enumerate"
        )));
    }
    let accept_probabilities: Vec<f64> = (0..1usize << p)
        .map(|w| simulate_accept_prob(circ, &clock.input, &bits_of(w, p)))
        .collect::<Result<_>>()?;
    let best = accept_probabilities
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| {
            if v > accept_probabilities[best] {
                i
            } else {
                best
            }
        });
    let idled = if idle == 0 {
        clock.clone()
    } else {
        build_clock_with(
            &pre_idle(circ, idle),
            &clock.input,
            clock.eps,
            f64::INFINITY,
        )?
    };
    let r = idled.total_qubits();
    let flag = r;
    let mut no_terms = (0..r)
        .map(|i| diag_term(vec![i], 1, 1.0))
        .collect::<Result<Vec<_>>>()?;
    no_terms.push(LocalTerm::new(vec![0], CMat::identity(2, 2), b)?);
    let h_no = LocalHamiltonian::new(r, no_terms)?;
    let mut terms = Vec::new();
    for t in &idled.h_fk().terms {
        terms.push(with_flag(t, flag, false)?);
    }
    for t in &h_no.terms {
        terms.push(with_flag(t, flag, true)?);
    }
    Ok(BlockInstance {
        original_gates: circ.gate_count(),
        clock: idled,
        b,
        idle,
        accepting_witness: bits_of(best, p),
        accept_probabilities,
        h_no,
        hamiltonian: LocalHamiltonian::new(r + 1, terms)?,
    })
}

impl BlockInstance {
    pub fn flag_qubit(&self) -> usize {
        self.clock.total_qubits()
    }

    fn start_comp_index(&self) -> Result<usize> {
        self.clock
            .circuit
            .initial_index(&self.clock.input, &self.accepting_witness)
    }

    /// Uniform superposition over the idle steps `t < N` of the accepting
    /// input (only `t = 0` when there is no idling), flag `0`.
    pub fn u_yes(&self) -> Result<SubsetState> {
        let comp = self.start_comp_index()?;
        let steps = self.idle.max(1);
        let elements = (0..steps)
            .map(|t| self.clock.legal_index(comp, t) << 1)
            .collect();
        SubsetState::new(self.flag_qubit() + 1, elements)
    }

    /// `|0…0⟩|1⟩_D`.
    pub fn u_no(&self) -> Result<SubsetState> {
        SubsetState::new(self.flag_qubit() + 1, vec![1])
    }

    fn u_yes_restricted(&self) -> Result<Vec<C64>> {
        let comp = self.start_comp_index()?;
        let steps = self.clock.steps();
        let count = self.idle.max(1);
        let mut v = vec![ZERO; (1usize << self.clock.computation_qubits()) * (steps + 1)];
        for t in 0..count {
            v[comp * (steps + 1) + t] = c(1.0 / (count as f64).sqrt(), 0.0);
        }
        Ok(v)
    }

    fn accepting_history(&self) -> Result<Vec<C64>> {
        let w = self.clock.basis_witness(&self.accepting_witness)?;
        self.clock.history_restricted(&w)
    }

    /// Measured `|⟨u_yes|(|η(y*)⟩|0⟩)|²`.
    pub fn guide_history_overlap(&self) -> Result<f64> {
        Ok(inner(&self.u_yes_restricted()?, &self.accepting_history()?).norm_sqr())
    }
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityReport {
    pub steps: usize,
    pub original_gates: usize,
    pub idle: usize,
    pub eps: f64,
    pub b: f64,
    pub accepting_witness: String,
    pub completeness: f64,
    pub soundness: f64,
    pub lambda0_yes: f64,
    pub gap_yes: f64,
    /// Leading term `ε(c - s)/(T̃+1)` of the gap bound.
    pub gap_bound_leading: f64,
    pub lambda0_no: f64,
    pub lambda0: f64,
    pub history_ground_fidelity: f64,
    pub guide_history_overlap: f64,
    pub guide_ground_overlap: f64,
    pub triangle_bound: f64,
    pub triangle_bound_holds: bool,
}

/// Ground-state bookkeeping of a block instance, computed exactly on the
/// legal-clock subspace (everything outside it has energy at least 1).
pub fn verify_fidelity_chain(block: &BlockInstance) -> Result<FidelityReport> {
    let clock = &block.clock;
    let restricted = clock.restricted_matrix(&clock.h_fk())?;
    let (values, vectors) = hermitian_eigen(&restricted);
    let lambda0_yes = values[0];
    if lambda0_yes >= 1.0 {
        return Err(Error::Numerical(format!(
            "restricted ground energy {lambda0_yes} is not below the illegal-clock floor"
        )));
    }
    let gap_yes = values
        .get(1)
        .map_or(f64::INFINITY, |v| v.min(1.0) - lambda0_yes);
    let ground: Vec<C64> = vectors.column(0).iter().copied().collect();
    let eta = block.accepting_history()?;
    let history_ground_fidelity = inner(&eta, &ground).norm_sqr();
    let guide_history_overlap = block.guide_history_overlap()?;
    let lambda0_no = block.h_no.basis_energy(&vec![false; block.h_no.n])?;
    let guide_ground_overlap = if lambda0_yes < lambda0_no {
        inner(&block.u_yes_restricted()?, &ground).norm_sqr()
    } else {
        0.0
    };
    let triangle_bound = 1.0
        - ((1.0 - guide_history_overlap).max(0.0).sqrt()
            + (1.0 - history_ground_fidelity).max(0.0).sqrt())
        .powi(2);
    let mut probs = block.accept_probabilities.clone();
    let y = block
        .accepting_witness
        .iter()
        .fold(0usize, |a, &b| (a << 1) | b as usize);
    let completeness = probs[y];
    probs.remove(y);
    let soundness = probs.iter().copied().fold(0.0f64, f64::max);
    Ok(FidelityReport {
        steps: clock.steps(),
        original_gates: block.original_gates,
        idle: block.idle,
        eps: clock.eps,
        b: block.b,
        accepting_witness: block
            .accepting_witness
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect(),
        completeness,
        soundness,
        lambda0_yes,
        gap_yes,
        gap_bound_leading: clock.eps * (completeness - soundness)
            / (block.original_gates as f64 + 1.0),
        lambda0_no,
        lambda0: lambda0_yes.min(lambda0_no),
        history_ground_fidelity,
        guide_history_overlap,
        guide_ground_overlap,
        triangle_bound,
        triangle_bound_holds: guide_ground_overlap >= triangle_bound - 1e-9,
    })
}

/// Small verifiers used by tests, benchmarks and the command line.
pub mod toy {
    use rand::Rng;

    use super::*;

    /// Accepts exactly the witness `target` (1 to 3 bits), deterministically.
    pub fn planted_witness(target: &[bool]) -> Result<VerifierCircuit> {
        let p = target.len();
        if !(1..=3).contains(&p) {
            return Err(Error::Validation(
                "planted witness needs 1 to 3 bits".into(),
            ));
        }
        let ancilla = if p == 3 { 2 } else { 1 };
        let w0 = ancilla;
        let mut gates = Vec::new();
        for (i, &b) in target.iter().enumerate() {
            if !b {
                gates.push(Gate::new("X", &[w0 + i]));
            }
        }
        match p {
            1 => gates.push(Gate::new("CNOT", &[w0, 0])),
            2 => gates.push(Gate::new("TOFFOLI", &[w0, w0 + 1, 0])),
            _ => {
                gates.push(Gate::new("TOFFOLI", &[w0, w0 + 1, 1]));
                gates.push(Gate::new("TOFFOLI", &[1, w0 + 2, 0]));
            }
        }
        VerifierCircuit::new(ancilla, 0, p, gates)
    }

    /// Random verifier over the allowed gate set.
    pub fn random_verifier<R: Rng + ?Sized>(
        num_ancilla: usize,
        num_input: usize,
        num_witness: usize,
        gates: usize,
        rng: &mut R,
    ) -> Result<VerifierCircuit> {
        let n = num_ancilla + num_input + num_witness;
        let mut out = Vec::with_capacity(gates);
        for _ in 0..gates {
            let pick = |k: usize, rng: &mut R| rand::seq::index::sample(rng, n, k).into_vec();
            let choice = rng.gen_range(
                0..if n >= 3 {
                    5
                } else if n == 2 {
                    4
                } else {
                    3
                },
            );
            out.push(match choice {
                0 => Gate::new("H", &pick(1, rng)),
                1 => Gate::new("X", &pick(1, rng)),
                2 => Gate::new("T", &pick(1, rng)),
                3 => Gate::new("CNOT", &pick(2, rng)),
                _ => Gate::new("TOFFOLI", &pick(3, rng)),
            });
        }
        VerifierCircuit::new(num_ancilla, num_input, num_witness, out)
    }
}
