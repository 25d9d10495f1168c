use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_support, EvaluatableState};
use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::exactsim::{run_circuit, StateVector};
use crate::linalg::{c, embed, CMat, C64, ONE};

/// `H^{⊗n} D H^{⊗n} |0…0⟩` for a diagonal circuit `D`. Expectations are
/// sampled estimates, additive error `epsilon` with high probability.
#[derive(Debug)]
pub struct IqpState {
    n: usize,
    gates: Vec<Gate>,
    diagonals: Vec<(Vec<usize>, Vec<C64>)>,
    epsilon: f64,
    seed: u64,
    calls: AtomicU64,
}

impl IqpState {
    pub fn new(n: usize, gates: Vec<Gate>, epsilon: f64, seed: u64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::Validation(format!(
                "epsilon {epsilon} must be in (0, 1]"
            )));
        }
        let mut diagonals = Vec::with_capacity(gates.len());
        for g in &gates {
            if g.qubits.iter().any(|&q| q >= n) {
                return Err(Error::InvalidGate(format!("{} outside register", g.name)));
            }
            let m = g.matrix()?;
            let d = m.nrows();
            if (0..d).any(|i| (0..d).any(|j| i != j && m[(i, j)].norm() > 1e-12)) {
                return Err(Error::InvalidGate(format!(
                    "IQP gates must be diagonal, '{}' is not",
                    g.name
                )));
            }
            diagonals.push((g.qubits.clone(), (0..d).map(|i| m[(i, i)]).collect()));
        }
        Ok(IqpState {
            n,
            gates,
            diagonals,
            epsilon,
            seed,
            calls: AtomicU64::new(0),
        })
    }

    /// Samples per estimate: `⌈6/ε²⌉`.
    pub fn sample_count(&self) -> usize {
        (6.0 / (self.epsilon * self.epsilon)).ceil() as usize
    }

    fn next_rng(&self) -> ChaCha8Rng {
        let call = self.calls.fetch_add(1, Ordering::Relaxed);
        ChaCha8Rng::seed_from_u64(self.seed ^ call.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    /// Phase vector `a_x = e^{i f(x, y')}` over local strings `x` on `support`.
    fn phases(&self, support: &[usize], outside: &[bool]) -> Vec<C64> {
        let s = support.len();
        let mut bits = outside.to_vec();
        (0..1usize << s)
            .map(|x| {
                for (pos, &q) in support.iter().enumerate() {
                    bits[q] = (x >> (s - 1 - pos)) & 1 == 1;
                }
                self.diagonals
                    .iter()
                    .filter(|(qs, _)| qs.iter().any(|q| support.contains(q)))
                    .fold(ONE, |acc, (qs, d)| {
                        let idx = qs.iter().fold(0usize, |a, &q| (a << 1) | bits[q] as usize);
                        acc * d[idx]
                    })
            })
            .collect()
    }

    /// Mean of `2^{-s} H a a† H` over random outside strings.
    fn estimate_rdm(&self, support: &[usize]) -> Result<CMat> {
        check_support(self.n, support)?;
        let s = support.len();
        let dim = 1usize << s;
        let hs = hadamard_power(s);
        let mut rng = self.next_rng();
        let samples = self.sample_count();
        let mut acc = CMat::zeros(dim, dim);
        for _ in 0..samples {
            let outside: Vec<bool> = (0..self.n).map(|_| rng.gen::<bool>()).collect();
            let a = CMat::from_column_slice(dim, 1, &self.phases(support, &outside));
            let ha = &hs * a;
            acc += &ha * ha.adjoint();
        }
        Ok(acc / c((samples * dim) as f64, 0.0))
    }
}

fn hadamard_power(s: usize) -> CMat {
    let h = Gate::new("H", &[0]).matrix().expect("H");
    (0..s).fold(CMat::identity(1, 1), |acc, _| acc.kronecker(&h))
}

impl EvaluatableState for IqpState {
    fn num_qubits(&self) -> usize {
        self.n
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn description(&self) -> String {
        format!(
            "IQP state on {} qubits with {} diagonal gates (eps = {})",
            self.n,
            self.gates.len(),
            self.epsilon
        )
    }

    fn local_expectation(&self, support: &[usize], op: &CMat) -> Result<C64> {
        let rho = self.estimate_rdm(support)?;
        Ok((&rho * op).trace())
    }

    fn reduced_density_matrix(&self, support: &[usize]) -> Result<CMat> {
        self.estimate_rdm(support)
    }

    fn to_statevector(&self) -> Result<StateVector> {
        let mut circ = Circuit::new(self.n);
        for q in 0..self.n {
            circ.push(Gate::new("H", &[q]));
        }
        circ.gates.extend(self.gates.iter().cloned());
        for q in 0..self.n {
            circ.push(Gate::new("H", &[q]));
        }
        run_circuit(&circ, None)
    }

    fn product_expectation(&self, terms: &[&crate::hamiltonian::LocalTerm]) -> Result<C64> {
        let support = crate::linalg::union_support(terms.iter().map(|t| t.support.as_slice()));
        let dim = 1usize << support.len();
        let mut prod = CMat::identity(dim, dim);
        for t in terms {
            prod *= embed(&t.matrix, &t.support, &support)? * c(t.weight, 0.0);
        }
        self.local_expectation(&support, &prod)
    }
}
