//! Classically evaluatable guiding states.
//!
//! Every backend answers local expectation values; deterministic backends
//! also expose exact reduced density matrices, which products of terms are
//! evaluated against.

mod iqp;
mod mps;
mod product;
pub mod sampling;
mod stabilizer;
mod subset;
pub mod synth;

use serde::{Deserialize, Serialize};

pub use iqp::IqpState;
pub use mps::{mps_sample, MpsState, MpsTensorFile, Site};
pub use product::{ProductCircuitState, MAX_LIGHTCONE};
pub use stabilizer::{StabilizerState, Tableau};
pub use subset::SubsetState;

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::exactsim::StateVector;
use crate::hamiltonian::LocalTerm;
use crate::linalg::{apply_local_add, c, local_offsets, union_support, CMat, C64, ONE, ZERO};

/// A state with efficient local expectation values, up to additive error
/// `epsilon()` (zero for exact backends).
pub trait EvaluatableState {
    fn num_qubits(&self) -> usize;

    /// Additive accuracy of `expectation`; zero for exact backends.
    fn epsilon(&self) -> f64 {
        0.0
    }

    fn description(&self) -> String;

    /// `⟨u|(op ⊗ I)|u⟩` for any (not necessarily Hermitian) local operator.
    fn local_expectation(&self, support: &[usize], op: &CMat) -> Result<C64>;

    /// Reduced density matrix on `support` (in the given qubit order).
    fn reduced_density_matrix(&self, support: &[usize]) -> Result<CMat>;

    /// Dense amplitudes; only for small registers.
    fn to_statevector(&self) -> Result<StateVector>;

    /// Weighted expectation `w · ⟨u|M|u⟩` of a term.
    fn expectation(&self, term: &LocalTerm) -> Result<f64> {
        check_support(self.num_qubits(), &term.support)?;
        Ok(term.weight * self.local_expectation(&term.support, &term.matrix)?.re)
    }

    /// `⟨u| w₁M₁ w₂M₂ ⋯ |u⟩` for an ordered product of terms.
    fn product_expectation(&self, terms: &[&LocalTerm]) -> Result<C64> {
        let support = union_support(terms.iter().map(|t| t.support.as_slice()));
        check_support(self.num_qubits(), &support)?;
        let rho = self.reduced_density_matrix(&support)?;
        let weight: f64 = terms.iter().map(|t| t.weight).product();
        Ok(trace_with_product(&rho, &support, terms)? * weight)
    }

    /// Circuit preparing the state from `|0…0⟩`, when one is available.
    fn prepare_circuit(&self) -> Option<Circuit> {
        None
    }
}

/// `⟨u| H_{i1} ⋯ H_{il} |u⟩` including weights.
pub fn expectation_bilinear(state: &dyn EvaluatableState, terms: &[&LocalTerm]) -> Result<C64> {
    state.product_expectation(terms)
}

pub(crate) fn check_support(n: usize, support: &[usize]) -> Result<()> {
    if let Some(&q) = support.iter().find(|&&q| q >= n) {
        return Err(Error::Validation(format!(
            "qubit {q} outside {n}-qubit state"
        )));
    }
    Ok(())
}

/// `Tr(ρ M₁ ⋯ M_l)` where each `M_i` acts on a subset of `support`.
pub(crate) fn trace_with_product(
    rho: &CMat,
    support: &[usize],
    terms: &[&LocalTerm],
) -> Result<C64> {
    let s = support.len();
    let dim = 1usize << s;
    let mut m = rho.clone();
    for t in terms {
        let local: Vec<usize> = t
            .support
            .iter()
            .map(|q| support.iter().position(|x| x == q).unwrap())
            .collect();
        // (M·E)[r,:] = (Eᵀ M[r,:]ᵀ)ᵀ
        let et = t.matrix.transpose();
        let mut next = CMat::zeros(dim, dim);
        let mut row = vec![ZERO; dim];
        let mut out = vec![ZERO; dim];
        for r in 0..dim {
            for (j, v) in row.iter_mut().enumerate() {
                *v = m[(r, j)];
            }
            out.iter_mut().for_each(|v| *v = ZERO);
            apply_local_add(s, &local, &et, ONE, &row, &mut out);
            for (j, v) in out.iter().enumerate() {
                next[(r, j)] = *v;
            }
        }
        m = next;
    }
    Ok(m.trace())
}

/// Partial trace of a dense state onto `support` (in the given order).
pub(crate) fn rdm_from_amplitudes(n: usize, amps: &[C64], support: &[usize]) -> CMat {
    let offsets = local_offsets(n, support);
    let mask = crate::linalg::support_mask(n, support);
    let dim = offsets.len();
    let mut rho = CMat::zeros(dim, dim);
    for base in (0..amps.len()).filter(|b| b & mask == 0) {
        for (r, &ro) in offsets.iter().enumerate() {
            let a = amps[base | ro];
            if a == ZERO {
                continue;
            }
            for (col, &co) in offsets.iter().enumerate() {
                rho[(r, col)] += a * amps[base | co].conj();
            }
        }
    }
    rho
}

impl EvaluatableState for StateVector {
    fn num_qubits(&self) -> usize {
        self.n
    }

    fn description(&self) -> String {
        format!("dense statevector on {} qubits", self.n)
    }

    fn local_expectation(&self, support: &[usize], op: &CMat) -> Result<C64> {
        check_support(self.n, support)?;
        let mut out = vec![ZERO; self.amps.len()];
        apply_local_add(self.n, support, op, ONE, &self.amps, &mut out);
        Ok(self.amps.iter().zip(&out).map(|(a, b)| a.conj() * b).sum())
    }

    fn reduced_density_matrix(&self, support: &[usize]) -> Result<CMat> {
        check_support(self.n, support)?;
        Ok(rdm_from_amplitudes(self.n, &self.amps, support))
    }

    fn to_statevector(&self) -> Result<StateVector> {
        Ok(self.clone())
    }

    fn product_expectation(&self, terms: &[&LocalTerm]) -> Result<C64> {
        let mut v = self.amps.clone();
        for t in terms.iter().rev() {
            check_support(self.n, &t.support)?;
            let mut out = vec![ZERO; v.len()];
            apply_local_add(
                self.n,
                &t.support,
                &t.matrix,
                c(t.weight, 0.0),
                &v,
                &mut out,
            );
            v = out;
        }
        Ok(self.amps.iter().zip(&v).map(|(a, b)| a.conj() * b).sum())
    }
}

/// On-disk description of a guiding state.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateFile {
    Subset {
        n: usize,
        /// Bit strings, qubit 0 first.
        strings: Vec<String>,
    },
    Mps {
        n: usize,
        tensors: Vec<MpsTensorFile>,
        #[serde(default)]
        periodic: bool,
    },
    Stabilizer {
        n: usize,
        gates: Vec<Gate>,
    },
    ProductCircuit {
        n: usize,
        gates: Vec<Gate>,
    },
    Iqp {
        n: usize,
        gates: Vec<Gate>,
        epsilon: f64,
        #[serde(default)]
        seed: u64,
    },
}

impl StateFile {
    pub fn kind(&self) -> &'static str {
        match self {
            StateFile::Subset { .. } => "subset",
            StateFile::Mps { .. } => "mps",
            StateFile::Stabilizer { .. } => "stabilizer",
            StateFile::ProductCircuit { .. } => "product_circuit",
            StateFile::Iqp { .. } => "iqp",
        }
    }

    pub fn build(&self) -> Result<Box<dyn EvaluatableState>> {
        Ok(match self {
            StateFile::Subset { n, strings } => Box::new(SubsetState::from_strings(*n, strings)?),
            StateFile::Mps {
                n,
                tensors,
                periodic,
            } => {
                let sites = tensors
                    .iter()
                    .map(MpsTensorFile::to_site)
                    .collect::<Result<Vec<_>>>()?;
                if sites.len() != *n {
                    return Err(Error::Validation(format!(
                        "{} tensors for {n} sites",
                        sites.len()
                    )));
                }
                if *periodic {
                    Box::new(MpsState::from_periodic(sites)?)
                } else {
                    Box::new(MpsState::new(sites)?)
                }
            }
            StateFile::Stabilizer { n, gates } => {
                Box::new(StabilizerState::from_circuit(&Circuit {
                    n: *n,
                    gates: gates.clone(),
                })?)
            }
            StateFile::ProductCircuit { n, gates } => {
                Box::new(ProductCircuitState::new(Circuit {
                    n: *n,
                    gates: gates.clone(),
                })?)
            }
            StateFile::Iqp {
                n,
                gates,
                epsilon,
                seed,
            } => Box::new(IqpState::new(*n, gates.clone(), *epsilon, *seed)?),
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use rand::Rng;

    use super::*;
    use crate::linalg::spectral_norm;

    /// Random Hermitian matrix on `k` qubits with spectral norm one.
    pub fn random_hermitian<R: Rng>(k: usize, rng: &mut R) -> CMat {
        let d = 1 << k;
        let a = CMat::from_fn(d, d, |_, _| {
            c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let h = &a + a.adjoint();
        let nrm = spectral_norm(&h);
        h * c(1.0 / nrm, 0.0)
    }

    /// Random sorted support of size `k` among `n` qubits.
    pub fn random_support<R: Rng>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
        let mut s = rand::seq::index::sample(rng, n, k).into_vec();
        s.sort_unstable();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pauli_string;

    #[test]
    fn statevector_product_expectation_matches_rdm_route() {
        let mut s = StateVector::zero(3).unwrap();
        s.apply_gate(&Gate::new("H", &[0])).unwrap();
        s.apply_gate(&Gate::new("CNOT", &[0, 2])).unwrap();
        s.apply_gate(&Gate::with_params("RY", &[1], &[0.4]))
            .unwrap();
        let a = LocalTerm::pauli("XZ", &[0, 1], 0.5).unwrap();
        let b = LocalTerm::pauli("XY", &[1, 2], -0.7).unwrap();
        let direct = s.product_expectation(&[&a, &b]).unwrap();
        let support = vec![0, 1, 2];
        let rho = s.reduced_density_matrix(&support).unwrap();
        let via_rdm = trace_with_product(&rho, &support, &[&a, &b]).unwrap() * (0.5 * 0.7);
        assert!((direct - via_rdm).norm() < 1e-13);
    }

    #[test]
    fn rdm_of_bell_pair_is_maximally_mixed() {
        let mut s = StateVector::zero(2).unwrap();
        s.apply_gate(&Gate::new("H", &[0])).unwrap();
        s.apply_gate(&Gate::new("CNOT", &[0, 1])).unwrap();
        let rho = s.reduced_density_matrix(&[1]).unwrap();
        assert!((rho[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!(rho[(0, 1)].norm() < 1e-15);
        let zz = s
            .local_expectation(&[0, 1], &pauli_string("ZZ").unwrap())
            .unwrap();
        assert!((zz.re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn state_file_parses_each_kind() {
        let subset = r#"{"kind":"subset","n":2,"strings":["00","11"]}"#;
        let s = StateFile::from_json_str(subset).unwrap().build().unwrap();
        let zz = s
            .local_expectation(&[0, 1], &pauli_string("ZZ").unwrap())
            .unwrap();
        assert!((zz.re - 1.0).abs() < 1e-14);
        let stab = r#"{"kind":"stabilizer","n":2,"gates":[{"name":"H","qubits":[0]},{"name":"CNOT","qubits":[0,1]}]}"#;
        let s = StateFile::from_json_str(stab).unwrap().build().unwrap();
        let xx = s
            .local_expectation(&[0, 1], &pauli_string("XX").unwrap())
            .unwrap();
        assert!((xx.re - 1.0).abs() < 1e-14);
        assert!(StateFile::from_json_str(r#"{"kind":"bogus"}"#).is_err());
    }
}
