//! Simulated quantum-classical PCP verifiers: proof queries, the
//! adaptive-to-non-adaptive compilation, parallel repetition, and learning a
//! diagonal Hamiltonian from query statistics.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial as BinomialLaw, DiscreteCDF};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::exactsim::{StateVector, MAX_SIM_QUBITS};
use crate::hamiltonian::{DiagonalHamiltonian, DiagonalTerm};

/// Largest number of queries an (amplified) protocol may make.
pub const MAX_QUERIES: usize = 64;
/// Largest query count accepted by the non-adaptive compilation.
pub const MAX_COMPILE_QUERIES: usize = 4;
/// Largest index-tuple space `|Ω|` the learner enumerates.
pub const MAX_OMEGA: usize = 10_000;
/// Additive constant `C₀` of the dixie-cup bound.
pub const DIXIE_CONSTANT: f64 = 2.0;
pub const DEFAULT_SAMPLE_BUDGET: u64 = 1 << 40;
const PROB_FLOOR: f64 = 1e-15;

/// A point between gates where an index register is measured and one proof
/// bit is written into `proof_bit_target`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPoint {
    pub after_gate: usize,
    pub index_register: Vec<usize>,
    pub proof_bit_target: usize,
}

/// Verifier circuit with interleaved proof queries. Qubit 0 is measured at
/// the end; outcome 1 accepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcpcpVerifier {
    #[serde(flatten)]
    pub circuit: Circuit,
    pub proof_length: usize,
    pub query_points: Vec<QueryPoint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunRecord {
    pub accept: bool,
    /// Measured indices in query order; stops at the first invalid one.
    pub indices: Vec<usize>,
}

impl QcpcpVerifier {
    pub fn new(
        circuit: Circuit,
        proof_length: usize,
        query_points: Vec<QueryPoint>,
    ) -> Result<Self> {
        let v = QcpcpVerifier {
            circuit,
            proof_length,
            query_points,
        };
        v.validate()?;
        Ok(v)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: QcpcpVerifier =
            serde_json::from_str(s).map_err(|e| Error::Parse(format!("verifier file: {e}")))?;
        v.validate()?;
        Ok(v)
    }

    pub fn num_queries(&self) -> usize {
        self.query_points.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.circuit.validate()?;
        let n = self.circuit.n;
        if n > MAX_SIM_QUBITS {
            return Err(Error::Size(format!("{n} qubits exceeds {MAX_SIM_QUBITS}")));
        }
        if self.proof_length == 0 {
            return Err(Error::Validation("proof length must be positive".into()));
        }
        if self.num_queries() > MAX_QUERIES {
            return Err(Error::Validation(format!(
                "{} queries exceeds {MAX_QUERIES}",
                self.num_queries()
            )));
        }
        let mut last = 0;
        for (j, qp) in self.query_points.iter().enumerate() {
            if qp.after_gate < last || qp.after_gate > self.circuit.gates.len() {
                return Err(Error::Validation(format!(
                    "query {j} at gate {} is out of order",
                    qp.after_gate
                )));
            }
            last = qp.after_gate;
            if qp.index_register.len() > 20 {
                return Err(Error::Validation(format!(
                    "query {j} index register is too wide"
                )));
            }
            let all = qp
                .index_register
                .iter()
                .chain(std::iter::once(&qp.proof_bit_target));
            if let Some(q) = all.clone().find(|&&q| q >= n) {
                return Err(Error::Validation(format!(
                    "query {j} uses qubit {q} outside {n}"
                )));
            }
            if qp.index_register.contains(&qp.proof_bit_target) {
                return Err(Error::Validation(format!(
                    "query {j} writes into its own index register"
                )));
            }
        }
        Ok(())
    }

    /// True when an index may depend on an earlier proof bit.
    pub fn is_adaptive(&self) -> bool {
        let Some(first) = self.query_points.first() else {
            return false;
        };
        let targets: Vec<usize> = self
            .query_points
            .iter()
            .map(|q| q.proof_bit_target)
            .collect();
        self.query_points.iter().any(|q| {
            q.after_gate != first.after_gate || q.index_register.iter().any(|r| targets.contains(r))
        })
    }

    fn apply_gates(&self, state: &mut StateVector, range: std::ops::Range<usize>) -> Result<()> {
        for g in &self.circuit.gates[range] {
            state.apply_gate(g)?;
        }
        Ok(())
    }

    /// One execution where the `j`-th query at index `i` is answered by
    /// `answer(j, i)`.
    pub fn execute<R, F>(&self, mut answer: F, rng: &mut R) -> Result<RunRecord>
    where
        R: Rng + ?Sized,
        F: FnMut(usize, usize) -> bool,
    {
        let mut state = StateVector::zero(self.circuit.n)?;
        let mut pos = 0;
        let mut indices = Vec::with_capacity(self.num_queries());
        for (j, qp) in self.query_points.iter().enumerate() {
            self.apply_gates(&mut state, pos..qp.after_gate)?;
            pos = qp.after_gate;
            let index = qp.index_register.iter().fold(0usize, |acc, &q| {
                (acc << 1) | state.measure(q, rng) as usize
            });
            indices.push(index);
            if index >= self.proof_length {
                return Ok(RunRecord {
                    accept: false,
                    indices,
                });
            }
            let bit = answer(j, index);
            if state.measure(qp.proof_bit_target, rng) != bit {
                state.apply_gate(&Gate::new("X", &[qp.proof_bit_target]))?;
            }
        }
        self.apply_gates(&mut state, pos..self.circuit.gates.len())?;
        Ok(RunRecord {
            accept: state.measure(0, rng),
            indices,
        })
    }

    /// Exact branch table: index tuple → (probability, probability of
    /// acceptance as well). Invalid tuples end at the offending index.
    pub fn exact_branches<F>(&self, answer: F) -> Result<BTreeMap<Vec<usize>, (f64, f64)>>
    where
        F: Fn(usize, usize) -> bool,
    {
        let mut table = BTreeMap::new();
        let state = StateVector::zero(self.circuit.n)?;
        self.branch(state, 0, 0, Vec::new(), 1.0, &answer, &mut table)?;
        Ok(table)
    }

    #[allow(clippy::too_many_arguments)]
    fn branch<F>(
        &self,
        mut state: StateVector,
        query: usize,
        pos: usize,
        indices: Vec<usize>,
        weight: f64,
        answer: &F,
        table: &mut BTreeMap<Vec<usize>, (f64, f64)>,
    ) -> Result<()>
    where
        F: Fn(usize, usize) -> bool,
    {
        let Some(qp) = self.query_points.get(query) else {
            self.apply_gates(&mut state, pos..self.circuit.gates.len())?;
            let entry = table.entry(indices).or_insert((0.0, 0.0));
            entry.0 += weight;
            entry.1 += weight * state.prob_one(0);
            return Ok(());
        };
        self.apply_gates(&mut state, pos..qp.after_gate)?;
        let n = self.circuit.n;
        let width = qp.index_register.len();
        let mut outcome_probs = vec![0.0; 1 << width];
        let outcome_of = |basis: usize| {
            qp.index_register
                .iter()
                .fold(0usize, |acc, &q| (acc << 1) | ((basis >> (n - 1 - q)) & 1))
        };
        for (i, a) in state.amps.iter().enumerate() {
            outcome_probs[outcome_of(i)] += a.norm_sqr();
        }
        for (index, &p) in outcome_probs.iter().enumerate() {
            if p <= PROB_FLOOR {
                continue;
            }
            let mut next = indices.clone();
            next.push(index);
            if index >= self.proof_length {
                table.entry(next).or_insert((0.0, 0.0)).0 += weight * p;
                continue;
            }
            let mut projected = state.clone();
            let norm = p.sqrt();
            for (i, a) in projected.amps.iter_mut().enumerate() {
                if outcome_of(i) == index {
                    *a /= norm;
                } else {
                    *a = crate::linalg::ZERO;
                }
            }
            let bit = answer(query, index);
            for measured in [false, true] {
                let mut s = projected.clone();
                let pb = s.collapse(qp.proof_bit_target, measured);
                if pb <= PROB_FLOOR {
                    continue;
                }
                if measured != bit {
                    s.apply_gate(&Gate::new("X", &[qp.proof_bit_target]))?;
                }
                self.branch(
                    s,
                    query + 1,
                    qp.after_gate,
                    next.clone(),
                    weight * p * pb,
                    answer,
                    table,
                )?;
            }
        }
        Ok(())
    }

    fn check_proof(&self, proof: &[bool]) -> Result<()> {
        if proof.len() != self.proof_length {
            return Err(Error::DimensionMismatch(format!(
                "proof has {} bits, verifier expects {}",
                proof.len(),
                self.proof_length
            )));
        }
        Ok(())
    }

    /// Exact acceptance probability on `proof`.
    pub fn acceptance_probability(&self, proof: &[bool]) -> Result<f64> {
        self.check_proof(proof)?;
        Ok(self
            .exact_branches(|_, i| proof[i])?
            .values()
            .map(|&(_, acc)| acc)
            .sum())
    }
}

/// Anything that can be run against a classical proof.
pub trait Protocol {
    fn query_count(&self) -> usize;
    fn proof_length(&self) -> usize;
    fn run_on<R: Rng + ?Sized>(&self, proof: &[bool], rng: &mut R) -> Result<RunRecord>;
}

impl Protocol for QcpcpVerifier {
    fn query_count(&self) -> usize {
        self.num_queries()
    }

    fn proof_length(&self) -> usize {
        self.proof_length
    }

    fn run_on<R: Rng + ?Sized>(&self, proof: &[bool], rng: &mut R) -> Result<RunRecord> {
        self.check_proof(proof)?;
        self.execute(|_, i| proof[i], rng)
    }
}

/// One protocol execution with the real proof bits.
pub fn run_verifier(v: &QcpcpVerifier, proof: &[bool], seed: u64) -> Result<RunRecord> {
    v.run_on(proof, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Fraction of `runs` executions that accept; run `k` uses stream `k` of the
/// seed.
pub fn estimate_acceptance<P: Protocol>(
    p: &P,
    proof: &[bool],
    runs: usize,
    seed: u64,
) -> Result<f64> {
    let mut accepted = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..runs {
        rng.set_stream(k as u64);
        accepted += p.run_on(proof, &mut rng)?.accept as usize;
    }
    Ok(accepted as f64 / runs as f64)
}

/// `t` independent copies of a verifier followed by a majority vote.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplifiedVerifier {
    pub base: QcpcpVerifier,
    pub copies: usize,
}

pub fn amplify_protocol(v: &QcpcpVerifier, copies: usize) -> Result<AmplifiedVerifier> {
    if copies == 0 {
        return Err(Error::Validation("need at least one copy".into()));
    }
    if copies * v.num_queries() > MAX_QUERIES {
        return Err(Error::Validation(format!(
            "{copies} copies of {} queries exceeds {MAX_QUERIES}",
            v.num_queries()
        )));
    }
    Ok(AmplifiedVerifier {
        base: v.clone(),
        copies,
    })
}

impl Protocol for AmplifiedVerifier {
    fn query_count(&self) -> usize {
        self.copies * self.base.num_queries()
    }

    fn proof_length(&self) -> usize {
        self.base.proof_length
    }

    fn run_on<R: Rng + ?Sized>(&self, proof: &[bool], rng: &mut R) -> Result<RunRecord> {
        let mut votes = 0;
        let mut indices = Vec::with_capacity(self.query_count());
        for _ in 0..self.copies {
            let r = self.base.run_on(proof, rng)?;
            votes += r.accept as usize;
            indices.extend(r.indices);
        }
        Ok(RunRecord {
            accept: 2 * votes > self.copies,
            indices,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TranscriptEntry {
    pub fake_bits: Vec<bool>,
    pub indices: Vec<usize>,
    pub accept: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompiledRun {
    pub accept: bool,
    /// Position of the first transcript entry consistent with the proof.
    pub consistent_entry: Option<usize>,
    pub proof_bits_read: usize,
    pub transcript: Vec<TranscriptEntry>,
}

/// Number of simulated runs `⌈C·2^q⌉`.
pub fn compiled_run_count(c_factor: f64, queries: usize) -> usize {
    (c_factor * (1u64 << queries) as f64).ceil() as usize
}

/// Runs the verifier `⌈C·2^q⌉` times on uniformly random fake answers, then
/// reads the real proof only to find the first consistent transcript entry.
pub fn compile_nonadaptive<R: Rng + ?Sized>(
    v: &QcpcpVerifier,
    c_factor: f64,
    proof: &[bool],
    rng: &mut R,
) -> Result<CompiledRun> {
    let q = v.num_queries();
    if q > MAX_COMPILE_QUERIES {
        return Err(Error::Validation(format!(
            "{q} queries exceeds {MAX_COMPILE_QUERIES} for compilation"
        )));
    }
    if !(c_factor > 1.0) || !c_factor.is_finite() {
        return Err(Error::Validation(format!("C = {c_factor} must exceed 1")));
    }
    v.check_proof(proof)?;
    let runs = compiled_run_count(c_factor, q);
    let mut transcript = Vec::with_capacity(runs);
    for _ in 0..runs {
        let fake: Vec<bool> = (0..q).map(|_| rng.gen()).collect();
        let record = v.execute(|j, _| fake[j], rng)?;
        transcript.push(TranscriptEntry {
            fake_bits: fake,
            indices: record.indices,
            accept: record.accept,
        });
    }
    let mut reads = 0;
    let mut consistent_entry = None;
    for (k, entry) in transcript.iter().enumerate() {
        // a run that hit an invalid index never asked for proof bits
        if entry.indices.len() < q || entry.indices.iter().any(|&i| i >= v.proof_length) {
            continue;
        }
        let mut consistent = true;
        for (&i, &z) in entry.indices.iter().zip(&entry.fake_bits) {
            reads += 1;
            if proof[i] != z {
                consistent = false;
                break;
            }
        }
        if consistent {
            consistent_entry = Some(k);
            break;
        }
    }
    Ok(CompiledRun {
        accept: consistent_entry.is_some_and(|k| transcript[k].accept),
        consistent_entry,
        proof_bits_read: reads,
        transcript,
    })
}

/// Exact statistics under every assignment `z` of fake answers.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactStatistics {
    pub queries: usize,
    pub proof_length: usize,
    /// Indexed by `z` with the first answer as the top bit.
    pub per_answers: Vec<BTreeMap<Vec<usize>, (f64, f64)>>,
}

fn answer_bits(z: usize, q: usize) -> Vec<bool> {
    (0..q).map(|j| (z >> (q - 1 - j)) & 1 == 1).collect()
}

pub fn exact_statistics(v: &QcpcpVerifier) -> Result<ExactStatistics> {
    let q = v.num_queries();
    if q > 16 {
        return Err(Error::Size(format!("{q} queries is too many to enumerate")));
    }
    let per_answers = (0..1usize << q)
        .map(|z| {
            let bits = answer_bits(z, q);
            v.exact_branches(|j, _| bits[j])
        })
        .collect::<Result<_>>()?;
    Ok(ExactStatistics {
        queries: q,
        proof_length: v.proof_length,
        per_answers,
    })
}

impl ExactStatistics {
    /// `P(i₁,…,i_q)`, averaged over answers (constant for non-adaptive
    /// verifiers).
    pub fn query_distribution(&self) -> BTreeMap<Vec<usize>, f64> {
        let mut out = BTreeMap::new();
        let scale = 1.0 / self.per_answers.len() as f64;
        for table in &self.per_answers {
            for (k, &(p, _)) in table {
                *out.entry(k.clone()).or_insert(0.0) += p * scale;
            }
        }
        out
    }

    /// `λ_{(i₁,…,i_q)}(z)`; zero where the tuple never occurs under `z`.
    pub fn acceptance(&self, tuple: &[usize], z: usize) -> f64 {
        match self.per_answers[z].get(tuple) {
            Some(&(p, acc)) if p > PROB_FLOOR => (acc / p).clamp(0.0, 1.0),
            _ => 0.0,
        }
    }

    /// `H_x = Σ P(i) Σ_z (1 - λ_i(z)) |z⟩⟨z|`.
    pub fn hamiltonian(&self) -> Result<DiagonalHamiltonian> {
        let terms = self
            .query_distribution()
            .into_iter()
            .filter(|&(_, p)| p > PROB_FLOOR)
            .map(|(tuple, p)| {
                let lambda: Vec<f64> = (0..self.per_answers.len())
                    .map(|z| self.acceptance(&tuple, z))
                    .collect();
                tuple_term(&tuple, &lambda, p, self.proof_length, self.queries)
            })
            .collect::<Result<_>>()?;
        Ok(DiagonalHamiltonian {
            n: self.proof_length,
            terms,
        })
    }
}

/// Diagonal term `weight · Σ_z (1 - λ(z)) |z⟩⟨z|` on the distinct proof bits
/// of `tuple`. Repeated indices read the same bit; tuples with an invalid
/// index always reject.
fn tuple_term(
    tuple: &[usize],
    lambda: &[f64],
    weight: f64,
    proof_length: usize,
    queries: usize,
) -> Result<DiagonalTerm> {
    let invalid = tuple.len() < queries || tuple.iter().any(|&i| i >= proof_length);
    let mut support: Vec<usize> = tuple
        .iter()
        .copied()
        .filter(|&i| i < proof_length)
        .collect();
    support.sort_unstable();
    support.dedup();
    let width = support.len();
    let values = (0..1usize << width)
        .map(|w| {
            if invalid {
                return 1.0;
            }
            let z = tuple.iter().fold(0usize, |acc, i| {
                let pos = support.binary_search(i).expect("index in support");
                (acc << 1) | ((w >> (width - 1 - pos)) & 1)
            });
            1.0 - lambda[z]
        })
        .collect();
    if !(0.0..=1.0 + 1e-12).contains(&weight) {
        return Err(Error::Numerical(format!(
            "tuple weight {weight} outside [0, 1]"
        )));
    }
    Ok(DiagonalTerm {
        support,
        values,
        weight: weight.min(1.0),
    })
}

/// Constants of the two sample-count branches, and the sample budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnOptions {
    pub distribution_constant: f64,
    pub acceptance_constant: f64,
    pub dixie_constant: f64,
    pub budget: u64,
}

impl Default for LearnOptions {
    fn default() -> Self {
        LearnOptions {
            distribution_constant: 4.0,
            acceptance_constant: 4.0,
            dixie_constant: DIXIE_CONSTANT,
            budget: DEFAULT_SAMPLE_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRequirement {
    /// Samples for learning the index distribution to `ε₀`.
    pub distribution_branch: f64,
    /// Samples for seeing every heavy tuple often enough to learn `λ` to `ε₁`.
    pub acceptance_branch: f64,
    /// Required sightings of each heavy tuple.
    pub repeats: u64,
    pub samples_per_answer: u64,
}

/// Both branches of the sample-count lower bound with failure budgets
/// `δ₀ = δ/4`, `δ_λ = δ/2^{q+2}`, `δ₁ = δ/(⌈1/γ⌉ 2^{q+2})`.
pub fn sample_requirement(
    queries: usize,
    gamma: f64,
    eps0: f64,
    eps1: f64,
    delta: f64,
    opts: &LearnOptions,
) -> Result<SampleRequirement> {
    check_open_unit("gamma", gamma, true)?;
    check_open_unit("eps0", eps0, false)?;
    check_open_unit("eps1", eps1, false)?;
    check_open_unit("delta", delta, false)?;
    let heavy = (1.0 / gamma).ceil();
    let scale = (1u64 << (queries + 2)) as f64;
    let delta0 = delta / 4.0;
    let delta_lambda = delta / scale;
    let delta1 = delta / (heavy * scale);
    let distribution_branch =
        opts.distribution_constant * (heavy + (1.0 / delta0).ln()) / (eps0 * eps0);
    let repeats = (opts.acceptance_constant * (1.0 / delta1).ln() / (eps1 * eps1)).ceil();
    let collection = dixie_cup_bound_with(gamma, repeats as u64, opts.dixie_constant)?;
    let acceptance_branch = (1u64 << queries) as f64 / delta_lambda * collection;
    let samples = distribution_branch.max(acceptance_branch).ceil();
    if !(samples <= opts.budget as f64) {
        return Err(Error::BudgetExceeded(format!(
            "{samples:e} samples per answer exceeds the budget {}",
            opts.budget
        )));
    }
    Ok(SampleRequirement {
        distribution_branch,
        acceptance_branch,
        repeats: repeats as u64,
        samples_per_answer: samples as u64,
    })
}

fn check_open_unit(name: &str, x: f64, closed_top: bool) -> Result<()> {
    let ok = x > 0.0 && if closed_top { x <= 1.0 } else { x < 1.0 };
    if ok {
        Ok(())
    } else {
        Err(Error::Validation(format!("{name} = {x} outside its range")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleEstimate {
    pub indices: Vec<usize>,
    pub probability: f64,
    /// `λ̃(z)` indexed by `z` with the first answer as the top bit.
    pub acceptance: Vec<f64>,
    /// Set when some `z` never produced this tuple and `λ̃(z)` defaulted to 0.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryStatistics {
    pub queries: usize,
    pub proof_length: usize,
    pub omega_size: usize,
    pub gamma: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub delta: f64,
    pub samples_per_answer: u64,
    pub estimates: Vec<TupleEstimate>,
    /// Observed tuples dropped by the `P̃ ≤ γ` cut.
    pub removed: usize,
}

impl QueryStatistics {
    pub fn validate(&self) -> Result<()> {
        let mut total = 0.0;
        for e in &self.estimates {
            if !(e.probability >= 0.0) {
                return Err(Error::Validation(format!(
                    "negative estimate for {:?}",
                    e.indices
                )));
            }
            if e.acceptance.iter().any(|l| !(0.0..=1.0).contains(l)) {
                return Err(Error::Validation(format!(
                    "acceptance estimate for {:?} outside [0, 1]",
                    e.indices
                )));
            }
            total += e.probability;
        }
        let slack = self.queries as f64 * self.eps0 * self.omega_size as f64;
        if total > 1.0 + slack + 1e-12 {
            return Err(Error::Validation(format!("estimates sum to {total}")));
        }
        Ok(())
    }
}

/// `|Ω| = p^q`, the number of ordered index tuples.
pub fn omega_size(proof_length: usize, queries: usize) -> Result<usize> {
    u32::try_from(queries)
        .ok()
        .and_then(|q| proof_length.checked_pow(q))
        .filter(|&m| m <= MAX_OMEGA)
        .ok_or_else(|| {
            Error::Size(format!(
                "|Ω| = {proof_length}^{queries} exceeds {MAX_OMEGA}"
            ))
        })
}

/// Draws per-category counts of `n` samples from `probs` by sequential
/// binomials.
fn multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Result<Vec<u64>> {
    let mut remaining_mass: f64 = probs.iter().sum();
    let mut remaining = n;
    let mut out = Vec::with_capacity(probs.len());
    for &p in probs {
        if remaining == 0 || remaining_mass <= 0.0 {
            out.push(0);
            continue;
        }
        let share = (p / remaining_mass).clamp(0.0, 1.0);
        let k = Binomial::new(remaining, share)
            .map_err(|e| Error::Numerical(format!("binomial draw: {e}")))?
            .sample(rng);
        out.push(k);
        remaining -= k;
        remaining_mass -= p;
    }
    Ok(out)
}

/// Learns `P̃` and `λ̃` with `T` runs per fake answer assignment `z`. The runs
/// are drawn as one multinomial sample from the exact outcome distribution of
/// the verifier, which has the same law as `T` independent executions.
pub fn learn_statistics(
    v: &QcpcpVerifier,
    gamma: f64,
    eps0: f64,
    eps1: f64,
    delta: f64,
    seed: u64,
) -> Result<QueryStatistics> {
    learn_statistics_with(v, gamma, eps0, eps1, delta, seed, &LearnOptions::default())
}

pub fn learn_statistics_with(
    v: &QcpcpVerifier,
    gamma: f64,
    eps0: f64,
    eps1: f64,
    delta: f64,
    seed: u64,
    opts: &LearnOptions,
) -> Result<QueryStatistics> {
    let q = v.num_queries();
    let omega = omega_size(v.proof_length, q)?;
    let req = sample_requirement(q, gamma, eps0, eps1, delta, opts)?;
    let exact = exact_statistics(v)?;
    learn_from_exact(
        &exact,
        omega,
        gamma,
        eps0,
        eps1,
        delta,
        req.samples_per_answer,
        seed,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn learn_from_exact(
    exact: &ExactStatistics,
    omega: usize,
    gamma: f64,
    eps0: f64,
    eps1: f64,
    delta: f64,
    samples: u64,
    seed: u64,
) -> Result<QueryStatistics> {
    let q = exact.queries;
    let answers = exact.per_answers.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // tuple -> per-z (sightings, acceptances)
    let mut counts: BTreeMap<Vec<usize>, Vec<(u64, u64)>> = BTreeMap::new();
    for (z, table) in exact.per_answers.iter().enumerate() {
        let mut probs = Vec::with_capacity(2 * table.len());
        for &(p, acc) in table.values() {
            probs.push(acc.clamp(0.0, p));
            probs.push((p - acc).max(0.0));
        }
        let drawn = multinomial(samples, &probs, &mut rng)?;
        for (k, tuple) in table.keys().enumerate() {
            let (a, r) = (drawn[2 * k], drawn[2 * k + 1]);
            if a + r == 0 {
                continue;
            }
            let slot = counts
                .entry(tuple.clone())
                .or_insert_with(|| vec![(0, 0); answers]);
            slot[z] = (a + r, a);
        }
    }
    let total = (answers as u64 * samples) as f64;
    let mut estimates = Vec::new();
    let mut removed = 0;
    for (indices, per_z) in counts {
        let seen: u64 = per_z.iter().map(|&(s, _)| s).sum();
        let probability = seen as f64 / total;
        if probability <= gamma {
            removed += 1;
            continue;
        }
        let flagged = per_z.iter().any(|&(s, _)| s == 0);
        let acceptance = per_z
            .iter()
            .map(|&(s, a)| if s == 0 { 0.0 } else { a as f64 / s as f64 })
            .collect();
        estimates.push(TupleEstimate {
            indices,
            probability,
            acceptance,
            flagged,
        });
    }
    let stats = QueryStatistics {
        queries: q,
        proof_length: exact.proof_length,
        omega_size: omega,
        gamma,
        eps0,
        eps1,
        delta,
        samples_per_answer: samples,
        estimates,
        removed,
    };
    stats.validate()?;
    Ok(stats)
}

/// `m(γ + ε₀) + (W + m ε₀) ε₁`.
pub fn certified_bound(m: usize, gamma: f64, eps0: f64, total_weight: f64, eps1: f64) -> f64 {
    let m = m as f64;
    m * (gamma + eps0) + (total_weight + m * eps0) * eps1
}

/// `γ = ε₀ = ε/(4|Ω|)`, `ε₁ = ε/4`.
pub fn reduction_parameters(eps: f64, omega: usize) -> (f64, f64, f64) {
    let small = eps / (4.0 * omega as f64);
    (small, small, eps / 4.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnedHamiltonian {
    pub hamiltonian: DiagonalHamiltonian,
    /// Certified bound on `‖H̃ - H‖`.
    pub bound: f64,
    /// Tuple count entering the bound.
    pub terms_bounded: usize,
    pub total_weight: f64,
}

/// `H̃ = Σ P̃ Σ_z (1 - λ̃(z)) |z⟩⟨z|` with its certified error bound, where
/// the bound counts every tuple of `Ω` (the weights sum to at most 1).
pub fn assemble_hamiltonian(stats: &QueryStatistics) -> Result<LearnedHamiltonian> {
    stats.validate()?;
    let terms = stats
        .estimates
        .iter()
        .map(|e| {
            tuple_term(
                &e.indices,
                &e.acceptance,
                e.probability.min(1.0),
                stats.proof_length,
                stats.queries,
            )
        })
        .collect::<Result<_>>()?;
    let total_weight = 1.0;
    Ok(LearnedHamiltonian {
        hamiltonian: DiagonalHamiltonian {
            n: stats.proof_length,
            terms,
        },
        bound: certified_bound(
            stats.omega_size,
            stats.gamma,
            stats.eps0,
            total_weight,
            stats.eps1,
        ),
        terms_bounded: stats.omega_size,
        total_weight,
    })
}

/// Upper bound on the expected time to see every item of probability at
/// least `γ` at least `m` times, with the default `C₀`.
pub fn dixie_cup_bound(gamma: f64, repeats: u64) -> Result<f64> {
    dixie_cup_bound_with(gamma, repeats, DIXIE_CONSTANT)
}

/// For `⌈1/γ⌉ ≤ 2` the exact uniform expectation is returned, otherwise the
/// asymptotic form, never below the trivial `⌈1/γ⌉·m`.
pub fn dixie_cup_bound_with(gamma: f64, repeats: u64, c0: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Domain(format!("gamma = {gamma} outside (0, 1]")));
    }
    if repeats == 0 {
        return Err(Error::Domain("repeats must be at least 1".into()));
    }
    let n = (1.0 / gamma).ceil() as u64;
    if n <= 2 {
        return dixie_cup_exact_small(n, repeats);
    }
    let asymptotic = dixie_cup_asymptotic(n, repeats, c0)?;
    Ok(asymptotic.max((n * repeats) as f64))
}

/// `n ln n + (m-1) n ln ln n + C₀ n`; undefined for `n ≤ e`.
pub fn dixie_cup_asymptotic(n: u64, repeats: u64, c0: f64) -> Result<f64> {
    if n <= 2 {
        return Err(Error::Domain(format!("ln ln {n} is not positive")));
    }
    let nf = n as f64;
    Ok(nf * nf.ln() + (repeats as f64 - 1.0) * nf * nf.ln().ln() + c0 * nf)
}

/// Exact expected time for one or two equally likely items.
pub fn dixie_cup_exact_small(n: u64, repeats: u64) -> Result<f64> {
    match n {
        1 => Ok(repeats as f64),
        2 => {
            // E[T] = Σ_k P(T > k); P(T > k) = 1 for k < 2m - 1, and
            // 2·P(Bin(k, 1/2) ≤ m - 1) afterwards
            let m = repeats;
            let mut total = (2 * m - 1) as f64;
            let mut k = 2 * m - 1;
            loop {
                let law = BinomialLaw::new(0.5, k)
                    .map_err(|e| Error::Numerical(format!("binomial law: {e}")))?;
                let tail = 2.0 * law.cdf(m - 1);
                total += tail;
                if tail < 1e-15 * total {
                    break;
                }
                k += 1;
            }
            Ok(total)
        }
        _ => Err(Error::Domain(format!("exact form covers n ≤ 2, got {n}"))),
    }
}

/// Verifiers used by tests, benchmarks and the command line.
pub mod toy {
    use super::*;
    use crate::linalg::{c, CMat};

    fn index_width(proof_length: usize) -> usize {
        (usize::BITS - (proof_length.max(2) - 1).leading_zeros()) as usize
    }

    /// Rotation taking `|0⟩` to acceptance probability `p`.
    fn rotation(p: f64) -> [f64; 4] {
        let (a, b) = ((1.0 - p).sqrt(), p.sqrt());
        [a, -b, b, a]
    }

    /// `|0⟩⟨0| ⊗ R(s) + |1⟩⟨1| ⊗ R(c)` on `(control, target)`.
    fn controlled_bias(control: usize, target: usize, completeness: f64, soundness: f64) -> Gate {
        let (r0, r1) = (rotation(soundness), rotation(completeness));
        let mut m = CMat::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                m[(i, j)] = c(r0[2 * i + j], 0.0);
                m[(2 + i, 2 + j)] = c(r1[2 * i + j], 0.0);
            }
        }
        Gate::unitary(&[control, target], &m)
    }

    /// Queries `index` deterministically and accepts iff the bit is 1.
    pub fn fixed_index(index: usize, proof_length: usize) -> Result<QcpcpVerifier> {
        let w = index_width(proof_length);
        let mut circuit = Circuit::new(2 + w);
        for b in 0..w {
            if (index >> (w - 1 - b)) & 1 == 1 {
                circuit.push(Gate::new("X", &[2 + b]));
            }
        }
        let after_gate = circuit.gates.len();
        circuit.push(Gate::new("CNOT", &[1, 0]));
        QcpcpVerifier::new(
            circuit,
            proof_length,
            vec![QueryPoint {
                after_gate,
                index_register: (2..2 + w).collect(),
                proof_bit_target: 1,
            }],
        )
    }

    /// Ignores the proof and accepts with probability 1/2.
    pub fn coin(proof_length: usize) -> Result<QcpcpVerifier> {
        let mut circuit = Circuit::new(1);
        circuit.push(Gate::new("H", &[0]));
        QcpcpVerifier::new(circuit, proof_length, Vec::new())
    }

    /// Prepares each index qubit with `RY(angle)`, queries the measured index
    /// (proof length `2^r`), then accepts with probability `completeness` on
    /// bit 1 and `soundness` on bit 0.
    pub fn biased_query(
        index_angles: &[f64],
        completeness: f64,
        soundness: f64,
    ) -> Result<QcpcpVerifier> {
        let r = index_angles.len();
        let mut circuit = Circuit::new(2 + r);
        for (k, &a) in index_angles.iter().enumerate() {
            circuit.push(Gate::with_params("RY", &[2 + k], &[a]));
        }
        let after_gate = circuit.gates.len();
        circuit.push(controlled_bias(1, 0, completeness, soundness));
        QcpcpVerifier::new(
            circuit,
            1 << r,
            vec![QueryPoint {
                after_gate,
                index_register: (2..2 + r).collect(),
                proof_bit_target: 1,
            }],
        )
    }

    /// Uniform index over `2^r` bits.
    pub fn uniform_query(r: usize, completeness: f64, soundness: f64) -> Result<QcpcpVerifier> {
        biased_query(
            &vec![std::f64::consts::FRAC_PI_2; r],
            completeness,
            soundness,
        )
    }

    /// Two adaptive queries on a 2-bit proof: reads bit 0, then reads the bit
    /// it points to and accepts iff that one is 1.
    pub fn pointer_chase() -> Result<QcpcpVerifier> {
        let mut circuit = Circuit::new(5);
        circuit.push(Gate::new("CNOT", &[1, 4]));
        circuit.push(Gate::new("CNOT", &[3, 0]));
        QcpcpVerifier::new(
            circuit,
            2,
            vec![
                QueryPoint {
                    after_gate: 0,
                    index_register: vec![2],
                    proof_bit_target: 1,
                },
                QueryPoint {
                    after_gate: 1,
                    index_register: vec![4],
                    proof_bit_target: 3,
                },
            ],
        )
    }

    /// Uniform index over `proof_length` bits using `⌈log₂⌉` index qubits;
    /// indices past the end reject.
    pub fn uniform_query_over(
        proof_length: usize,
        completeness: f64,
        soundness: f64,
    ) -> Result<QcpcpVerifier> {
        let mut v = uniform_query(index_width(proof_length), completeness, soundness)?;
        v.proof_length = proof_length;
        v.validate()?;
        Ok(v)
    }

    /// Two non-adaptive uniform queries over a 2-bit proof; accepts with
    /// probability 0.9 when both bits read are 1 and 0.1 otherwise.
    pub fn pair_check() -> Result<QcpcpVerifier> {
        pair_check_with(0.9, 0.1)
    }

    /// [`pair_check`] with acceptance `high` on two ones and `low` otherwise.
    pub fn pair_check_with(high: f64, low: f64) -> Result<QcpcpVerifier> {
        let mut circuit = Circuit::new(5);
        circuit.push(Gate::new("H", &[2]));
        circuit.push(Gate::new("H", &[4]));
        let query_gate = circuit.gates.len();
        let mut m = CMat::zeros(8, 8);
        for block in 0..4 {
            let r = rotation(if block == 3 { high } else { low });
            for i in 0..2 {
                for j in 0..2 {
                    m[(2 * block + i, 2 * block + j)] = c(r[2 * i + j], 0.0);
                }
            }
        }
        circuit.push(Gate::unitary(&[1, 3, 0], &m));
        QcpcpVerifier::new(
            circuit,
            2,
            vec![
                QueryPoint {
                    after_gate: query_gate,
                    index_register: vec![2],
                    proof_bit_target: 1,
                },
                QueryPoint {
                    after_gate: query_gate,
                    index_register: vec![4],
                    proof_bit_target: 3,
                },
            ],
        )
    }
}
