//! Estimating `u†Au` from sample-and-query access to `u` and row access to a
//! sparse `A`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::exactsim::StateVector;
use crate::hamiltonian::{LocalHamiltonian, LocalTerm};
use crate::linalg::{spectral_norm, C64, ZERO};

/// Query and sample access to a vector `u`.
pub trait SamplableAccess {
    fn num_qubits(&self) -> usize;

    /// `⟨x|u⟩`.
    fn amplitude(&self, index: u128) -> Result<C64>;

    /// Draws `x` with probability `|⟨x|u⟩|² / ‖u‖²`.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u128>;

    /// Known value of `‖u‖`.
    fn norm(&self) -> f64 {
        1.0
    }

    /// Multiplicative accuracy `ξ` of `norm()`; zero means exact.
    fn norm_error(&self) -> f64 {
        0.0
    }
}

impl SamplableAccess for StateVector {
    fn num_qubits(&self) -> usize {
        self.n
    }

    fn amplitude(&self, index: u128) -> Result<C64> {
        self.amps
            .get(index as usize)
            .copied()
            .ok_or_else(|| Error::Validation(format!("index {index} out of range")))
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u128> {
        Ok(self.sample_index(rng) as u128)
    }

    fn norm(&self) -> f64 {
        StateVector::norm(self)
    }
}

/// Row access to a sparse matrix on `n` qubits.
pub trait RowAccess {
    fn num_qubits(&self) -> usize;

    /// Nonzero entries `(column, value)` of row `index`.
    fn row(&self, index: u128) -> Vec<(u128, C64)>;

    /// Upper bound on the operator norm.
    fn norm_bound(&self) -> f64;
}

/// A single weighted term seen as an `n`-qubit operator.
#[derive(Debug, Clone)]
pub struct TermRows<'a> {
    pub n: usize,
    pub term: &'a LocalTerm,
}

impl RowAccess for TermRows<'_> {
    fn num_qubits(&self) -> usize {
        self.n
    }

    fn row(&self, index: u128) -> Vec<(u128, C64)> {
        term_row(self.n, self.term, index)
    }

    fn norm_bound(&self) -> f64 {
        self.term.weight * spectral_norm(&self.term.matrix)
    }
}

fn term_row(n: usize, term: &LocalTerm, index: u128) -> Vec<(u128, C64)> {
    let k = term.support.len();
    let local = term.support.iter().fold(0usize, |acc, &q| {
        (acc << 1) | ((index >> (n - 1 - q)) & 1) as usize
    });
    let mut out = Vec::new();
    for col in 0..1usize << k {
        let v = term.matrix[(local, col)] * term.weight;
        if v == ZERO {
            continue;
        }
        let mut j = index;
        for (pos, &q) in term.support.iter().enumerate() {
            let bit = 1u128 << (n - 1 - q);
            if (col >> (k - 1 - pos)) & 1 == 1 {
                j |= bit;
            } else {
                j &= !bit;
            }
        }
        out.push((j, v));
    }
    out
}

impl RowAccess for LocalHamiltonian {
    fn num_qubits(&self) -> usize {
        self.n
    }

    fn row(&self, index: u128) -> Vec<(u128, C64)> {
        let mut entries: Vec<(u128, C64)> = self
            .terms
            .iter()
            .flat_map(|t| term_row(self.n, t, index))
            .collect();
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(u128, C64)> = Vec::with_capacity(entries.len());
        for (j, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += v,
                _ => merged.push((j, v)),
            }
        }
        merged
    }

    fn norm_bound(&self) -> f64 {
        self.triangle_norm_bound()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticEstimate {
    pub value: f64,
    pub samples: usize,
    pub amplitude_queries: usize,
}

/// Number of independent batches whose means are combined by a median.
pub const MEDIAN_BATCHES: usize = 9;

/// Estimates `Re(u†Au)` to additive error `eps` with high probability.
///
/// Draws `x ∝ |u_x|²` and averages `(Au)_x / u_x`; each batch uses
/// `⌈6‖A‖²/eps²⌉` samples and the median of the batch means is returned.
/// Requires the norm of `u` to be known within `ξ ≤ eps/8`.
pub fn sampling_estimate_quadratic<U, A, R>(
    u: &U,
    a: &A,
    eps: f64,
    rng: &mut R,
) -> Result<QuadraticEstimate>
where
    U: SamplableAccess,
    A: RowAccess + ?Sized,
    R: Rng + ?Sized,
{
    if !(eps > 0.0) {
        return Err(Error::Validation(format!("eps {eps} must be positive")));
    }
    if u.num_qubits() != a.num_qubits() {
        return Err(Error::DimensionMismatch(format!(
            "state on {} qubits, operator on {}",
            u.num_qubits(),
            a.num_qubits()
        )));
    }
    if u.norm_error() > eps / 8.0 {
        return Err(Error::PromiseViolation(format!(
            "norm accuracy {} exceeds eps/8 = {}",
            u.norm_error(),
            eps / 8.0
        )));
    }
    let bound = a.norm_bound().max(1e-300);
    let per_batch = ((6.0 * bound * bound) / (eps * eps)).ceil().max(1.0) as usize;
    let norm_sq = u.norm() * u.norm();
    let mut queries = 0usize;
    let mut means = Vec::with_capacity(MEDIAN_BATCHES);
    for _ in 0..MEDIAN_BATCHES {
        let mut sum = 0.0;
        for _ in 0..per_batch {
            let x = u.sample(rng)?;
            let ux = u.amplitude(x)?;
            queries += 1;
            let mut au = ZERO;
            for (j, v) in a.row(x) {
                au += v * u.amplitude(j)?;
                queries += 1;
            }
            sum += (au / ux).re;
        }
        means.push(norm_sq * sum / per_batch as f64);
    }
    means.sort_by(f64::total_cmp);
    Ok(QuadraticEstimate {
        value: means[MEDIAN_BATCHES / 2],
        samples: per_batch * MEDIAN_BATCHES,
        amplitude_queries: queries,
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::hamiltonian::LocalTerm;
    use crate::states::{EvaluatableState, MpsState, StabilizerState, SubsetState};

    fn random_ham(n: usize, rng: &mut ChaCha8Rng) -> LocalHamiltonian {
        let mut terms = Vec::new();
        for q in 0..n - 1 {
            let labels = ["XX", "ZZ", "XZ", "YY"][rng.gen_range(0..4)];
            terms.push(LocalTerm::pauli(labels, &[q, q + 1], 0.5 / n as f64).unwrap());
        }
        terms.push(LocalTerm::pauli("X", &[0], 0.2).unwrap());
        LocalHamiltonian::new(n, terms).unwrap()
    }

    #[test]
    fn rows_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_ham(4, &mut rng);
        let dense = h.to_dense().unwrap();
        for i in 0..16u128 {
            let mut row = vec![ZERO; 16];
            for (j, v) in h.row(i) {
                row[j as usize] += v;
            }
            for j in 0..16 {
                assert!((row[j] - dense[(i as usize, j)]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn estimator_within_eps_for_each_backend() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 5;
        let h = random_ham(n, &mut rng);
        let eps = 0.05;
        let mps = MpsState::random(n, 3, &mut rng).unwrap();
        let exact = h.energy(&mps.to_statevector().unwrap().amps).unwrap();
        let est = sampling_estimate_quadratic(&mps, &h, eps, &mut rng).unwrap();
        assert!((est.value - exact).abs() <= eps, "{} vs {exact}", est.value);

        let stab = StabilizerState::random(n, 5, &mut rng).unwrap();
        let exact = h.energy(&stab.to_statevector().unwrap().amps).unwrap();
        let est = sampling_estimate_quadratic(&stab, &h, eps, &mut rng).unwrap();
        assert!((est.value - exact).abs() <= eps);

        let sub = SubsetState::from_indices(n, &[1, 4, 9, 30]).unwrap();
        let exact = h.energy(&sub.to_statevector().unwrap().amps).unwrap();
        let est = sampling_estimate_quadratic(&sub, &h, eps, &mut rng).unwrap();
        assert!((est.value - exact).abs() <= eps);
    }

    struct Noisy(SubsetState);

    impl SamplableAccess for Noisy {
        fn num_qubits(&self) -> usize {
            SamplableAccess::num_qubits(&self.0)
        }
        fn amplitude(&self, index: u128) -> Result<C64> {
            self.0.amplitude(index)
        }
        fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u128> {
            self.0.sample(rng)
        }
        fn norm_error(&self) -> f64 {
            0.1
        }
    }

    #[test]
    fn loose_norm_is_promise_violation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = Noisy(SubsetState::from_indices(2, &[0]).unwrap());
        let t = LocalTerm::pauli("Z", &[0], 1.0).unwrap();
        let a = TermRows { n: 2, term: &t };
        assert!(matches!(
            sampling_estimate_quadratic(&u, &a, 0.1, &mut rng),
            Err(Error::PromiseViolation(_))
        ));
    }
}
