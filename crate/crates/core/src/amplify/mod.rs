//! Deciding low-energy questions by evaluating `‖Q_α(H) u‖` on a guiding
//! state, with `Q_α` the shifted sign-polynomial filter.
//!
//! Two engines evaluate the filter. `TermExpansion` writes `H^l` as a sum of
//! Hermitian groups of ordered term products and only queries local
//! expectations of the guide. `VectorRecurrence` runs the Chebyshev
//! recurrence on the guide's amplitude vector and is the fallback when the
//! expansion exceeds the budget.

pub mod csp;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{LocalHamiltonian, LocalTerm, NormCheck};
use crate::linalg::{compensated_sum, embed, union_support, CMat, C64, ZERO};
use crate::signpoly::{
    build_sign_poly_with, squared_filter_coefficients_exact, to_f64_coefficients, SignPolyOptions,
    SignPolynomial,
};
use crate::states::EvaluatableState;

/// Default cap on group evaluations.
pub const DEFAULT_BUDGET: u128 = 10_000_000;
/// Negative radicands above this are rounding noise and clamp to zero.
pub const RADICAND_CLAMP: f64 = 1e-9;

/// Groups needed for `H^l` with `m` terms: `m` pure powers plus the other
/// `m^l - m` products taken two at a time.
pub fn power_group_count(m: usize, l: usize) -> u128 {
    match m {
        0 => 0,
        1 => 1,
        _ => {
            let m = m as u128;
            m + (m.pow(l as u32) - m) / 2
        }
    }
}

/// Closed form of `Σ_{l=1}^{degree} power_group_count(m, l)`:
/// `m(m^D + Dm - D - 1) / (2(m - 1))`, and `D` when `m = 1`.
pub fn expansion_count(m: usize, degree: usize) -> u128 {
    match m {
        0 => 0,
        1 => degree as u128,
        _ => {
            let (m, d) = (m as u128, degree as u128);
            m * (m.pow(degree as u32) + d * m - d - 1) / (2 * (m - 1))
        }
    }
}

/// Same as [`expansion_count`] but saturating, for reporting huge plans.
pub fn expansion_count_f64(m: usize, degree: usize) -> f64 {
    match m {
        0 => 0.0,
        1 => degree as f64,
        _ => {
            let (mf, d) = (m as f64, degree as f64);
            mf * (mf.powf(d) + d * mf - d - 1.0) / (2.0 * (mf - 1.0))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKind {
    /// `H_i^l`, Hermitian by itself.
    Power,
    /// A product and its reversal.
    Reversal,
    /// Two distinct palindromic products, each Hermitian.
    Palindromes,
}

/// One Hermitian observable of the expansion: `coefficient · Q̂` with
/// `Q̂ = Σ_s w(s) S / coefficient` and `‖Q̂‖ ≤ 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Group {
    pub kind: GroupKind,
    pub sequences: Vec<Vec<usize>>,
    pub coefficient: f64,
    pub support: Vec<usize>,
}

impl Group {
    fn new(
        h: &LocalHamiltonian,
        kind: GroupKind,
        first: &[usize],
        second: Option<&[usize]>,
    ) -> Self {
        let weight = |s: &[usize]| s.iter().map(|&i| h.terms[i].weight).product::<f64>();
        let mut sequences = vec![first.to_vec()];
        sequences.extend(second.map(|s| s.to_vec()));
        let coefficient = sequences.iter().map(|s| weight(s)).sum();
        let support = union_support(
            sequences
                .iter()
                .flatten()
                .map(|&i| h.terms[i].support.as_slice()),
        );
        Group {
            kind,
            sequences,
            coefficient,
            support,
        }
    }

    /// `Q̂` on `self.support`; zero when the coefficient vanishes.
    pub fn observable(&self, h: &LocalHamiltonian) -> Result<CMat> {
        let dim = 1usize << self.support.len();
        let mut sum = CMat::zeros(dim, dim);
        if self.coefficient == 0.0 {
            return Ok(sum);
        }
        for s in &self.sequences {
            let mut prod = CMat::identity(dim, dim);
            for &i in s {
                let t = &h.terms[i];
                prod *= embed(&t.matrix, &t.support, &self.support)? * C64::new(t.weight, 0.0);
            }
            sum += prod;
        }
        Ok(sum / C64::new(self.coefficient, 0.0))
    }
}

/// Groups of one power `l`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionSlice {
    pub power: usize,
    pub groups: Vec<Group>,
}

impl ExpansionSlice {
    /// `Σ coefficient · Q̂` as a dense `2^n` matrix.
    pub fn dense_sum(&self, h: &LocalHamiltonian) -> Result<CMat> {
        let dim = 1usize << h.n;
        let all: Vec<usize> = (0..h.n).collect();
        let mut out = CMat::zeros(dim, dim);
        for g in &self.groups {
            let obs = g.observable(h)?;
            out += embed(&obs, &g.support, &all)? * C64::new(g.coefficient, 0.0);
        }
        Ok(out)
    }
}

fn check_budget(m: usize, l: usize, budget: u128) -> Result<()> {
    let products = (m as f64).powi(l as i32);
    if products > budget as f64 {
        return Err(Error::BudgetExceeded(format!(
            "H^{l} has {m}^{l} = {products:.3e} products, budget {budget}"
        )));
    }
    Ok(())
}

/// Enumerates the groups of `H^l` in lexicographic order of their first
/// product. Palindromes that are not pure powers are paired with the next
/// palindrome in the same order; there is always an even number of them.
fn visit_groups<F>(m: usize, l: usize, mut f: F) -> Result<()>
where
    F: FnMut(GroupKind, &[usize], Option<&[usize]>) -> Result<()>,
{
    if m == 0 || l == 0 {
        return Ok(());
    }
    let mut seq = vec![0usize; l];
    let mut rev = vec![0usize; l];
    let mut pending: Option<Vec<usize>> = None;
    loop {
        rev.iter_mut()
            .zip(seq.iter().rev())
            .for_each(|(r, &s)| *r = s);
        if seq.iter().all(|&i| i == seq[0]) {
            f(GroupKind::Power, &seq, None)?;
        } else if seq == rev {
            match pending.take() {
                None => pending = Some(seq.clone()),
                Some(p) => f(GroupKind::Palindromes, &p, Some(&seq))?,
            }
        } else if seq < rev {
            f(GroupKind::Reversal, &seq, Some(&rev))?;
        }
        // odometer, last index fastest
        let mut pos = l;
        loop {
            if pos == 0 {
                debug_assert!(pending.is_none());
                return Ok(());
            }
            pos -= 1;
            seq[pos] += 1;
            if seq[pos] < m {
                break;
            }
            seq[pos] = 0;
        }
    }
}

/// Hermitian groups whose weighted sum is `H^l`.
pub fn expand_power(h: &LocalHamiltonian, l: usize, budget: u128) -> Result<ExpansionSlice> {
    if l == 0 {
        return Err(Error::Validation("power must be at least 1".into()));
    }
    let m = h.num_terms();
    check_budget(m, l, budget)?;
    let mut groups = Vec::new();
    visit_groups(m, l, |kind, a, b| {
        groups.push(Group::new(h, kind, a, b));
        Ok(())
    })?;
    Ok(ExpansionSlice { power: l, groups })
}

/// Number of groups `expand_power` would produce, without building them.
pub fn count_groups(m: usize, l: usize) -> Result<u128> {
    let mut count = 0u128;
    visit_groups(m, l, |_, _, _| {
        count += 1;
        Ok(())
    })?;
    Ok(count)
}

/// Deterministic pairwise tree sum over a stream; the grouping only depends
/// on the number of values.
#[derive(Debug, Default)]
struct PairwiseAccumulator {
    stack: Vec<(u32, f64)>,
}

impl PairwiseAccumulator {
    fn push(&mut self, v: f64) {
        let mut item = (0u32, v);
        while let Some(&(level, top)) = self.stack.last() {
            if level != item.0 {
                break;
            }
            self.stack.pop();
            item = (level + 1, top + item.1);
        }
        self.stack.push(item);
    }

    fn total(self) -> f64 {
        self.stack.iter().rev().fold(0.0, |acc, &(_, v)| v + acc)
    }
}

fn sequence_expectation(
    state: &dyn EvaluatableState,
    h: &LocalHamiltonian,
    s: &[usize],
) -> Result<C64> {
    let terms: Vec<&LocalTerm> = s.iter().map(|&i| &h.terms[i]).collect();
    state.product_expectation(&terms)
}

/// `⟨u|H^l|u⟩` from group expectations, with the number of groups used.
pub fn moment_counted(
    state: &dyn EvaluatableState,
    h: &LocalHamiltonian,
    l: usize,
    budget: u128,
) -> Result<(f64, u128)> {
    if state.num_qubits() != h.n {
        return Err(Error::DimensionMismatch(format!(
            "state on {} qubits, Hamiltonian on {}",
            state.num_qubits(),
            h.n
        )));
    }
    if l == 0 {
        return Ok((1.0, 0));
    }
    let m = h.num_terms();
    check_budget(m, l, budget)?;
    let mut acc = PairwiseAccumulator::default();
    let mut count = 0u128;
    visit_groups(m, l, |kind, a, b| {
        count += 1;
        let value = match (kind, b) {
            (GroupKind::Reversal, _) => 2.0 * sequence_expectation(state, h, a)?.re,
            (GroupKind::Palindromes, Some(b)) => {
                sequence_expectation(state, h, a)?.re + sequence_expectation(state, h, b)?.re
            }
            _ => sequence_expectation(state, h, a)?.re,
        };
        acc.push(value);
        Ok(())
    })?;
    Ok((acc.total(), count))
}

pub fn moment(
    state: &dyn EvaluatableState,
    h: &LocalHamiltonian,
    l: usize,
    budget: u128,
) -> Result<f64> {
    moment_counted(state, h, l, budget).map(|r| r.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    TermExpansion,
    VectorRecurrence,
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "expansion" | "term_expansion" => Ok(Engine::TermExpansion),
            "recurrence" | "vector_recurrence" => Ok(Engine::VectorRecurrence),
            other => Err(Error::Validation(format!("unknown engine '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilteredNorm {
    pub value: f64,
    pub radicand: f64,
    pub observables: u128,
}

/// `‖Q_α(H) u‖` via moments: `√(Σ_l c_l ⟨u|H^l|u⟩)` with `c_l` the
/// monomial coefficients of `Q_α²`.
pub fn filtered_norm(
    state: &dyn EvaluatableState,
    h: &LocalHamiltonian,
    poly: &SignPolynomial,
    alpha: f64,
    budget: u128,
) -> Result<FilteredNorm> {
    let coeffs = to_f64_coefficients(&squared_filter_coefficients_exact(poly, alpha));
    let degree = coeffs.len() - 1;
    let m = h.num_terms();
    let needed = expansion_count_f64(m, degree);
    if needed > budget as f64 {
        return Err(Error::BudgetExceeded(format!(
            "term expansion to degree {degree} with m = {m} needs {needed:.3e} observables, budget {budget}"
        )));
    }
    let mut observables = 0u128;
    let mut parts = Vec::with_capacity(coeffs.len());
    for (l, &cl) in coeffs.iter().enumerate() {
        if cl == 0.0 {
            continue;
        }
        let (mu, count) = moment_counted(state, h, l, budget)?;
        observables += count;
        parts.push(cl * mu);
    }
    let radicand = compensated_sum(parts);
    finish_norm(radicand, observables)
}

fn finish_norm(radicand: f64, observables: u128) -> Result<FilteredNorm> {
    if radicand < -RADICAND_CLAMP || !radicand.is_finite() {
        return Err(Error::Numerical(format!(
            "filtered norm radicand {radicand:e} is negative"
        )));
    }
    Ok(FilteredNorm {
        value: radicand.max(0.0).sqrt(),
        radicand,
        observables,
    })
}

/// `‖Q_α(H) u‖` from the dense amplitudes of the guide, with Clenshaw's
/// recurrence run on vectors.
pub fn filtered_norm_recurrence(
    state: &dyn EvaluatableState,
    h: &LocalHamiltonian,
    poly: &SignPolynomial,
    alpha: f64,
) -> Result<FilteredNorm> {
    if state.num_qubits() != h.n {
        return Err(Error::DimensionMismatch(format!(
            "state on {} qubits, Hamiltonian on {}",
            state.num_qubits(),
            h.n
        )));
    }
    let u = state.to_statevector()?.amps;
    // A = (H - α)/2 so that P(H - α) = Σ c_k T_k(A)
    let apply_a = |v: &[C64]| -> Result<Vec<C64>> {
        let hv = h.apply(v)?;
        Ok(hv
            .iter()
            .zip(v)
            .map(|(x, y)| (x - y * alpha) * 0.5)
            .collect())
    };
    let coeffs = &poly.chebyshev;
    let dim = u.len();
    let mut b1 = vec![ZERO; dim];
    let mut b2 = vec![ZERO; dim];
    for &ck in coeffs.iter().skip(1).rev() {
        let ab1 = apply_a(&b1)?;
        let b0: Vec<C64> = (0..dim).map(|i| ab1[i] * 2.0 - b2[i] + u[i] * ck).collect();
        b2 = std::mem::replace(&mut b1, b0);
    }
    let ab1 = apply_a(&b1)?;
    let c0 = coeffs.first().copied().unwrap_or(0.0);
    let radicand: f64 = (0..dim)
        .map(|i| {
            let p = ab1[i] - b2[i] + u[i] * c0;
            (0.5 * (u[i] - p)).norm_sqr()
        })
        .sum();
    finish_norm(radicand, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "YES")]
    Yes,
    #[serde(rename = "NO")]
    No,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Yes => "YES",
            Verdict::No => "NO",
        })
    }
}

/// Input of the guided low-energy decision problem.
pub struct DecisionInstance<'a> {
    pub hamiltonian: &'a LocalHamiltonian,
    pub a: f64,
    pub b: f64,
    pub zeta: f64,
    pub guide: &'a dyn EvaluatableState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecideOptions {
    pub budget: u128,
    pub engine: Engine,
    pub sign_poly: SignPolyOptions,
}

impl Default for DecideOptions {
    fn default() -> Self {
        DecideOptions {
            budget: DEFAULT_BUDGET,
            engine: Engine::TermExpansion,
            sign_poly: SignPolyOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionReport {
    pub verdict: Verdict,
    pub filtered_norm: f64,
    pub radicand: f64,
    /// `(9/10)√ζ`.
    pub threshold: f64,
    /// Guaranteed gap `(2/5)√ζ` between the two promise cases.
    pub separation: f64,
    pub alpha: f64,
    pub delta_prime: f64,
    pub eps_prime: f64,
    pub degree: usize,
    pub sign_poly_certified_error: f64,
    /// Observables a full term expansion needs for degree `2d`.
    pub observable_count: f64,
    pub observables_evaluated: u128,
    pub engine: Engine,
    pub norm: NormCheck,
}

/// Threshold parameters for a decision: `(α, δ', ε')`.
pub fn decision_parameters(a: f64, b: f64, zeta: f64) -> (f64, f64, f64) {
    ((a + b) / 2.0, (b - a) / 2.0, zeta.sqrt() / 10.0)
}

pub fn decide(inst: &DecisionInstance<'_>, opts: &DecideOptions) -> Result<DecisionReport> {
    let h = inst.hamiltonian;
    let (a, b, zeta) = (inst.a, inst.b, inst.zeta);
    if !((-1.0..=1.0).contains(&a) && (-1.0..=1.0).contains(&b) && b > a) {
        return Err(Error::Validation(format!(
            "thresholds need -1 ≤ a < b ≤ 1, got a = {a}, b = {b}"
        )));
    }
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(Error::Validation(format!("zeta {zeta} must be in (0, 1]")));
    }
    if inst.guide.num_qubits() != h.n {
        return Err(Error::DimensionMismatch(format!(
            "guide on {} qubits, Hamiltonian on {}",
            inst.guide.num_qubits(),
            h.n
        )));
    }
    let norm = h.check_norm(false)?;
    let (alpha, delta_prime, eps_prime) = decision_parameters(a, b, zeta);
    let poly = build_sign_poly_with(delta_prime, eps_prime, opts.sign_poly)?;
    let observable_count = expansion_count_f64(h.num_terms(), 2 * poly.degree);
    let result = match opts.engine {
        Engine::TermExpansion => filtered_norm(inst.guide, h, &poly, alpha, opts.budget)?,
        Engine::VectorRecurrence => filtered_norm_recurrence(inst.guide, h, &poly, alpha)?,
    };
    let threshold = 0.9 * zeta.sqrt();
    Ok(DecisionReport {
        verdict: if result.value >= threshold {
            Verdict::Yes
        } else {
            Verdict::No
        },
        filtered_norm: result.value,
        radicand: result.radicand,
        threshold,
        separation: 0.4 * zeta.sqrt(),
        alpha,
        delta_prime,
        eps_prime,
        degree: poly.degree,
        sign_poly_certified_error: poly.certified_error,
        observable_count,
        observables_evaluated: result.observables,
        engine: opts.engine,
        norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CloseGuideReport {
    pub verdict: Verdict,
    pub energy: f64,
    pub threshold: f64,
}

/// Accepts iff `⟨u|H|u⟩ ≤ a + f_inv`, for guides promised to have ground
/// space fidelity at least `1 - f_inv`.
pub fn verify_close_guide(
    h: &LocalHamiltonian,
    guide: &dyn EvaluatableState,
    a: f64,
    f_inv: f64,
) -> Result<CloseGuideReport> {
    let energy = moment(guide, h, 1, DEFAULT_BUDGET)?;
    let threshold = a + f_inv;
    Ok(CloseGuideReport {
        verdict: if energy <= threshold {
            Verdict::Yes
        } else {
            Verdict::No
        },
        energy,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::exactsim::{diagonalize, StateVector};
    use crate::linalg::{c, is_hermitian, max_abs_diff, ONE};
    use crate::signpoly::build_sign_poly;
    use crate::states::testutil::{random_hermitian, random_support};
    use crate::states::MpsState;

    fn random_h(n: usize, m: usize, k: usize, rng: &mut ChaCha8Rng) -> LocalHamiltonian {
        let terms = (0..m)
            .map(|_| {
                let sup = random_support(n, k, rng);
                let op = random_hermitian(k, rng);
                LocalTerm::new(sup, op, 1.0 / m as f64).unwrap()
            })
            .collect();
        LocalHamiltonian::new(n, terms).unwrap()
    }

    fn dense_power(h: &LocalHamiltonian, l: usize) -> CMat {
        let d = h.to_dense().unwrap();
        (0..l).fold(CMat::identity(d.nrows(), d.nrows()), |acc, _| acc * &d)
    }

    #[test]
    fn two_terms_cubed() {
        assert_eq!(power_group_count(2, 3), 5);
        assert_eq!(expansion_count(2, 3), 10);
        assert_eq!(count_groups(2, 3).unwrap(), 5);
        let cumulative: u128 = (1..=3).map(|l| count_groups(2, l).unwrap()).sum();
        assert_eq!(cumulative, 10);
    }

    #[test]
    fn single_term_has_one_group_per_power() {
        for l in 1..6 {
            assert_eq!(count_groups(1, l).unwrap(), 1);
        }
        assert_eq!(expansion_count(1, 7), 7);
    }

    #[test]
    fn counter_matches_closed_form() {
        for m in 2..=5 {
            for d in 1..=5 {
                let counted: u128 = (1..=d).map(|l| count_groups(m, l).unwrap()).sum();
                assert_eq!(counted, expansion_count(m, d), "m = {m}, d = {d}");
            }
        }
    }

    #[test]
    fn groups_sum_to_dense_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = random_h(6, 4, 2, &mut rng);
        let slice = expand_power(&h, 2, DEFAULT_BUDGET).unwrap();
        assert!(max_abs_diff(&slice.dense_sum(&h).unwrap(), &dense_power(&h, 2)) < 1e-10);
    }

    #[test]
    fn groups_are_hermitian_with_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_h(5, 3, 2, &mut rng);
        for l in 1..=4 {
            let slice = expand_power(&h, l, DEFAULT_BUDGET).unwrap();
            assert!(max_abs_diff(&slice.dense_sum(&h).unwrap(), &dense_power(&h, l)) < 1e-10);
            for g in &slice.groups {
                let obs = g.observable(&h).unwrap();
                assert!(is_hermitian(&obs, 1e-12));
                assert!(crate::linalg::spectral_norm(&obs) <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_h(4, 3, 2, &mut rng);
        assert!(matches!(
            expand_power(&h, 5, 100),
            Err(Error::BudgetExceeded(_))
        ));
    }

    #[test]
    fn moment_examples() {
        let h = LocalHamiltonian::new(1, vec![LocalTerm::pauli("Z", &[0], 0.5).unwrap()]).unwrap();
        let u = StateVector::zero(1).unwrap();
        assert!((moment(&u, &h, 3, DEFAULT_BUDGET).unwrap() - 0.125).abs() < 1e-15);
        assert_eq!(moment(&u, &h, 0, DEFAULT_BUDGET).unwrap(), 1.0);
    }

    #[test]
    fn mps_moments_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = random_h(8, 5, 2, &mut rng);
        let mps = MpsState::random(8, 3, &mut rng).unwrap();
        let v = mps.to_statevector().unwrap();
        let dense = dense_power(&h, 4);
        let want: C64 = v
            .amps
            .iter()
            .zip((&dense * CMat::from_column_slice(256, 1, &v.amps)).iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        let got = moment(&mps, &h, 4, DEFAULT_BUDGET).unwrap();
        assert!((got - want.re).abs() < 1e-9, "{got} vs {}", want.re);
    }

    fn dense_filtered_norm(
        h: &LocalHamiltonian,
        poly: &SignPolynomial,
        alpha: f64,
        u: &[C64],
    ) -> f64 {
        let spectrum = diagonalize(&h.to_dense().unwrap()).unwrap();
        spectrum
            .quadratic_form(u, |x| {
                let q = crate::signpoly::eval_filter(poly, alpha, x).unwrap();
                q * q
            })
            .sqrt()
    }

    #[test]
    fn empty_hamiltonian_filter() {
        let h = LocalHamiltonian::new(2, vec![]).unwrap();
        let poly = build_sign_poly(0.4, 0.1).unwrap();
        let u = StateVector::basis(2, 1).unwrap();
        let r = filtered_norm(&u, &h, &poly, 0.5, DEFAULT_BUDGET).unwrap();
        assert!((0.95..=1.0).contains(&r.value), "{}", r.value);
    }

    #[test]
    fn eigenstate_above_threshold_is_suppressed() {
        let h =
            LocalHamiltonian::new(2, vec![LocalTerm::pauli("ZZ", &[0, 1], 0.7).unwrap()]).unwrap();
        let poly = build_sign_poly(0.4, 0.1).unwrap();
        // |00⟩ has energy 0.7 ≥ α + δ' with α = 0.2
        let u = StateVector::basis(2, 0).unwrap();
        let r = filtered_norm(&u, &h, &poly, 0.2, DEFAULT_BUDGET).unwrap();
        assert!(r.value <= 0.05 + 1e-6, "{}", r.value);
    }

    #[test]
    fn expansion_and_recurrence_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_h(4, 2, 2, &mut rng);
        let poly = build_sign_poly(0.8, 0.2).unwrap();
        assert!(2 * poly.degree <= 24);
        let mps = MpsState::random(4, 2, &mut rng).unwrap();
        let u = mps.to_statevector().unwrap();
        let want = dense_filtered_norm(&h, &poly, 0.1, &u.amps);
        let a = filtered_norm(&mps, &h, &poly, 0.1, DEFAULT_BUDGET).unwrap();
        let b = filtered_norm_recurrence(&mps, &h, &poly, 0.1).unwrap();
        assert!(
            (a.radicand - want * want).abs() < 1e-8,
            "{} vs {}",
            a.radicand,
            want * want
        );
        assert!((b.value - want).abs() < 1e-10);
        assert_eq!(a.observables, expansion_count(2, 2 * poly.degree));
    }

    fn half_z_projector() -> LocalHamiltonian {
        // 0.25·(I - Z): spectrum {0, 0.5}
        let m = CMat::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, ONE]);
        LocalHamiltonian::new(1, vec![LocalTerm::new(vec![0], m, 0.5).unwrap()]).unwrap()
    }

    #[test]
    fn decide_examples() {
        let h = half_z_projector();
        let u = StateVector::zero(1).unwrap();
        let inst = DecisionInstance {
            hamiltonian: &h,
            a: 0.1,
            b: 0.4,
            zeta: 1.0,
            guide: &u,
        };
        let r = decide(&inst, &DecideOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Yes);
        assert!((r.separation - 0.4).abs() < 1e-15);

        let id = LocalHamiltonian::new(
            1,
            vec![
                LocalTerm::new(vec![0], CMat::identity(2, 2).map(|v| v * c(1.0, 0.0)), 0.5)
                    .unwrap(),
            ],
        )
        .unwrap();
        let v = StateVector::basis(1, 1).unwrap();
        let inst = DecisionInstance {
            hamiltonian: &id,
            a: 0.1,
            b: 0.4,
            zeta: 1.0,
            guide: &v,
        };
        assert_eq!(
            decide(&inst, &DecideOptions::default()).unwrap().verdict,
            Verdict::No
        );
    }

    #[test]
    fn decide_reports_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_h(4, 4, 2, &mut rng);
        let u = StateVector::zero(4).unwrap();
        let inst = DecisionInstance {
            hamiltonian: &h,
            a: 0.0,
            b: 0.2,
            zeta: 0.5,
            guide: &u,
        };
        let err = decide(&inst, &DecideOptions::default()).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded(_)));
        let opts = DecideOptions {
            engine: Engine::VectorRecurrence,
            ..DecideOptions::default()
        };
        assert!(decide(&inst, &opts).is_ok());
    }

    #[test]
    fn close_guide_examples() {
        let h = half_z_projector();
        let ground = StateVector::zero(1).unwrap();
        assert_eq!(
            verify_close_guide(&h, &ground, 0.0, 0.01).unwrap().verdict,
            Verdict::Yes
        );
        // ‖Π_gs u‖² = 1 - f_inv exactly
        let f_inv: f64 = 0.2;
        let u =
            StateVector::from_amplitudes(vec![c((1.0 - f_inv).sqrt(), 0.0), c(f_inv.sqrt(), 0.0)])
                .unwrap();
        let r = verify_close_guide(&h, &u, 0.0, f_inv).unwrap();
        assert!(r.energy <= f_inv + 1e-12);
        assert_eq!(r.verdict, Verdict::Yes);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(4))]

        #[test]
        fn moment_consistency(seed in 0u64..1000, alpha in -0.3f64..0.3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_h(4, 2, 2, &mut rng);
            let poly = build_sign_poly(0.5, 0.1).unwrap();
            let u = MpsState::random(4, 2, &mut rng).unwrap().to_statevector().unwrap();
            let want = dense_filtered_norm(&h, &poly, alpha, &u.amps);
            let got = filtered_norm(&u, &h, &poly, alpha, DEFAULT_BUDGET).unwrap();
            prop_assert!((got.radicand - want * want).abs() < 1e-8);
        }

        #[test]
        fn decide_is_permutation_invariant(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_h(4, 3, 2, &mut rng);
            let mut shuffled = h.clone();
            shuffled.terms.reverse();
            let u = MpsState::random(4, 2, &mut rng).unwrap();
            let opts = DecideOptions { engine: Engine::VectorRecurrence, ..DecideOptions::default() };
            let run = |h: &LocalHamiltonian| {
                decide(&DecisionInstance { hamiltonian: h, a: -0.2, b: 0.2, zeta: 0.5, guide: &u }, &opts).unwrap()
            };
            let (r1, r2) = (run(&h), run(&shuffled));
            prop_assert_eq!(r1.verdict, r2.verdict);
            prop_assert!((r1.filtered_norm - r2.filtered_norm).abs() < 1e-12);
        }

        #[test]
        fn permuted_terms_give_same_moments(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_h(4, 3, 2, &mut rng);
            let mut shuffled = h.clone();
            shuffled.terms.rotate_left(1);
            let u = MpsState::random(4, 2, &mut rng).unwrap();
            for l in 1..=4 {
                let a = moment(&u, &h, l, DEFAULT_BUDGET).unwrap();
                let b = moment(&u, &shuffled, l, DEFAULT_BUDGET).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
