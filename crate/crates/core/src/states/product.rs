use super::{check_support, rdm_from_amplitudes, EvaluatableState};
use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::exactsim::{run_circuit, StateVector};
use crate::linalg::{CMat, C64};

/// Largest backward lightcone simulated densely.
pub const MAX_LIGHTCONE: usize = 12;

/// `C|0…0⟩` for a shallow circuit; local quantities are computed on the
/// backward lightcone of the observable only.
#[derive(Debug, Clone)]
pub struct ProductCircuitState {
    circuit: Circuit,
}

impl ProductCircuitState {
    pub fn new(circuit: Circuit) -> Result<Self> {
        circuit.validate()?;
        Ok(ProductCircuitState { circuit })
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    /// Gates in the backward lightcone of `support` and the qubits they touch.
    pub fn lightcone(&self, support: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let mut active = vec![false; self.circuit.n];
        for &q in support {
            active[q] = true;
        }
        let mut gates = Vec::new();
        for (i, g) in self.circuit.gates.iter().enumerate().rev() {
            if g.qubits.iter().any(|&q| active[q]) {
                for &q in &g.qubits {
                    active[q] = true;
                }
                gates.push(i);
            }
        }
        gates.reverse();
        let qubits = (0..self.circuit.n).filter(|&q| active[q]).collect();
        (gates, qubits)
    }

    /// Simulates the lightcone of `support` and returns the restricted state
    /// together with the positions of `support` inside it.
    fn cone_state(&self, support: &[usize]) -> Result<(StateVector, Vec<usize>)> {
        check_support(self.circuit.n, support)?;
        let (gates, qubits) = self.lightcone(support);
        if qubits.len() > MAX_LIGHTCONE {
            return Err(Error::Size(format!(
                "lightcone of {} qubits exceeds {MAX_LIGHTCONE}",
                qubits.len()
            )));
        }
        let pos = |q: usize| qubits.iter().position(|&x| x == q).unwrap();
        let mut local = Circuit::new(qubits.len());
        for &i in &gates {
            let g = &self.circuit.gates[i];
            local.push(Gate {
                name: g.name.clone(),
                qubits: g.qubits.iter().map(|&q| pos(q)).collect(),
                params: g.params.clone(),
            });
        }
        let state = run_circuit(&local, None)?;
        Ok((state, support.iter().map(|&q| pos(q)).collect()))
    }
}

impl EvaluatableState for ProductCircuitState {
    fn num_qubits(&self) -> usize {
        self.circuit.n
    }

    fn description(&self) -> String {
        format!(
            "depth-{} circuit state on {} qubits",
            self.circuit.depth(),
            self.circuit.n
        )
    }

    fn local_expectation(&self, support: &[usize], op: &CMat) -> Result<C64> {
        let (state, local) = self.cone_state(support)?;
        state.local_expectation(&local, op)
    }

    fn reduced_density_matrix(&self, support: &[usize]) -> Result<CMat> {
        let (state, local) = self.cone_state(support)?;
        Ok(rdm_from_amplitudes(state.n, &state.amps, &local))
    }

    fn to_statevector(&self) -> Result<StateVector> {
        run_circuit(&self.circuit, None)
    }

    fn prepare_circuit(&self) -> Option<Circuit> {
        Some(self.circuit.clone())
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::states::testutil::{random_hermitian, random_support};

    fn brickwork<R: Rng>(n: usize, layers: usize, rng: &mut R) -> Circuit {
        let mut c = Circuit::new(n);
        for l in 0..layers {
            for q in 0..n {
                c.push(Gate::with_params("RY", &[q], &[rng.gen::<f64>() * 3.0]));
                c.push(Gate::with_params("RZ", &[q], &[rng.gen::<f64>() * 3.0]));
            }
            for q in ((l % 2)..n.saturating_sub(1)).step_by(2) {
                c.push(Gate::new("CNOT", &[q, q + 1]));
            }
        }
        c
    }

    #[test]
    fn lightcone_matches_full_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let state = ProductCircuitState::new(brickwork(9, 2, &mut rng)).unwrap();
        let dense = state.to_statevector().unwrap();
        for k in 1..=3 {
            for _ in 0..6 {
                let sup = random_support(9, k, &mut rng);
                let op = random_hermitian(k, &mut rng);
                let a = state.local_expectation(&sup, &op).unwrap();
                let b = dense.local_expectation(&sup, &op).unwrap();
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn lightcone_is_local_for_shallow_circuits() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let state = ProductCircuitState::new(brickwork(40, 2, &mut rng)).unwrap();
        let (_, qubits) = state.lightcone(&[20]);
        assert!(qubits.len() <= 4);
        let op = crate::linalg::pauli_string("Z").unwrap();
        let v = state.local_expectation(&[20], &op).unwrap();
        assert!(v.re.abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn deep_lightcone_is_size_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let state = ProductCircuitState::new(brickwork(20, 12, &mut rng)).unwrap();
        let op = crate::linalg::pauli_string("Z").unwrap();
        assert!(matches!(
            state.local_expectation(&[10], &op),
            Err(Error::Size(_))
        ));
    }
}
