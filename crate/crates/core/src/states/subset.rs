use std::collections::BTreeMap;

use rand::Rng;

use super::sampling::SamplableAccess;
use super::{check_support, EvaluatableState};
use crate::error::{Error, Result};
use crate::exactsim::StateVector;
use crate::linalg::{c, CMat, C64, ZERO};

/// Uniform superposition `|S|^{-1/2} Σ_{x∈S} |x⟩` over explicit bit strings.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetState {
    n: usize,
    /// Sorted, distinct basis indices (qubit 0 is the top bit).
    elements: Vec<u128>,
}

impl SubsetState {
    pub fn new(n: usize, mut elements: Vec<u128>) -> Result<Self> {
        if n > 128 {
            return Err(Error::Size(
                "subset states support at most 128 qubits".into(),
            ));
        }
        if elements.is_empty() {
            return Err(Error::Validation(
                "subset state needs at least one string".into(),
            ));
        }
        if n < 128 && elements.iter().any(|&x| x >> n != 0) {
            return Err(Error::Validation(format!("string longer than {n} bits")));
        }
        elements.sort_unstable();
        let len = elements.len();
        elements.dedup();
        if elements.len() != len {
            return Err(Error::Validation("subset strings must be distinct".into()));
        }
        Ok(SubsetState { n, elements })
    }

    pub fn from_strings(n: usize, strings: &[String]) -> Result<Self> {
        let elements = strings
            .iter()
            .map(|s| {
                if s.len() != n {
                    return Err(Error::Validation(format!("string '{s}' is not {n} bits")));
                }
                s.chars().try_fold(0u128, |acc, ch| match ch {
                    '0' => Ok(acc << 1),
                    '1' => Ok((acc << 1) | 1),
                    _ => Err(Error::Parse(format!("bad bit '{ch}' in '{s}'"))),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        SubsetState::new(n, elements)
    }

    pub fn from_indices(n: usize, indices: &[usize]) -> Result<Self> {
        SubsetState::new(n, indices.iter().map(|&i| i as u128).collect())
    }

    pub fn elements(&self) -> &[u128] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    fn contains(&self, x: u128) -> bool {
        self.elements.binary_search(&x).is_ok()
    }

    fn local_index(&self, x: u128, support: &[usize]) -> usize {
        support.iter().fold(0usize, |acc, &q| {
            (acc << 1) | ((x >> (self.n - 1 - q)) & 1) as usize
        })
    }

    fn with_local(&self, x: u128, support: &[usize], local: usize) -> u128 {
        let k = support.len();
        let mut y = x;
        for (pos, &q) in support.iter().enumerate() {
            let bit = 1u128 << (self.n - 1 - q);
            if (local >> (k - 1 - pos)) & 1 == 1 {
                y |= bit;
            } else {
                y &= !bit;
            }
        }
        y
    }
}

impl EvaluatableState for SubsetState {
    fn num_qubits(&self) -> usize {
        self.n
    }

    fn description(&self) -> String {
        format!(
            "subset state of {} strings on {} qubits",
            self.len(),
            self.n
        )
    }

    fn local_expectation(&self, support: &[usize], op: &CMat) -> Result<C64> {
        check_support(self.n, support)?;
        let dim = 1usize << support.len();
        let mut acc = ZERO;
        for &x in &self.elements {
            let col = self.local_index(x, support);
            for row in 0..dim {
                let v = op[(row, col)];
                if v != ZERO && self.contains(self.with_local(x, support, row)) {
                    acc += v;
                }
            }
        }
        Ok(acc / self.len() as f64)
    }

    fn reduced_density_matrix(&self, support: &[usize]) -> Result<CMat> {
        check_support(self.n, support)?;
        let dim = 1usize << support.len();
        // group strings by their bits outside the support
        let mut mask = 0u128;
        for &q in support {
            mask |= 1u128 << (self.n - 1 - q);
        }
        let mut groups: BTreeMap<u128, Vec<usize>> = BTreeMap::new();
        for &x in &self.elements {
            groups
                .entry(x & !mask)
                .or_default()
                .push(self.local_index(x, support));
        }
        let mut rho = CMat::zeros(dim, dim);
        let w = c(1.0 / self.len() as f64, 0.0);
        for locals in groups.values() {
            for &r in locals {
                for &col in locals {
                    rho[(r, col)] += w;
                }
            }
        }
        Ok(rho)
    }

    fn to_statevector(&self) -> Result<StateVector> {
        let mut s = StateVector::zero(self.n)?;
        s.amps[0] = ZERO;
        let amp = c(1.0 / (self.len() as f64).sqrt(), 0.0);
        for &x in &self.elements {
            s.amps[x as usize] = amp;
        }
        Ok(s)
    }
}

impl SamplableAccess for SubsetState {
    fn num_qubits(&self) -> usize {
        self.n
    }

    fn amplitude(&self, index: u128) -> Result<C64> {
        Ok(if self.contains(index) {
            c(1.0 / (self.len() as f64).sqrt(), 0.0)
        } else {
            ZERO
        })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u128> {
        Ok(self.elements[rng.gen_range(0..self.len())])
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::states::testutil::{random_hermitian, random_support};

    #[test]
    fn matches_statevector_on_random_observables() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = SubsetState::from_indices(6, &[0, 5, 17, 33, 62]).unwrap();
        let dense = s.to_statevector().unwrap();
        for k in 1..=3 {
            for _ in 0..10 {
                let sup = random_support(6, k, &mut rng);
                let op = random_hermitian(k, &mut rng);
                let a = s.local_expectation(&sup, &op).unwrap();
                let b = dense.local_expectation(&sup, &op).unwrap();
                assert!((a - b).norm() < 1e-12);
                let ra = s.reduced_density_matrix(&sup).unwrap();
                let rb = dense.reduced_density_matrix(&sup).unwrap();
                assert!(crate::linalg::max_abs_diff(&ra, &rb) < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_malformed_strings() {
        assert!(SubsetState::from_strings(2, &["0".into()]).is_err());
        assert!(SubsetState::from_strings(2, &["0a".into()]).is_err());
        assert!(SubsetState::from_strings(2, &["01".into(), "01".into()]).is_err());
        assert!(SubsetState::new(2, vec![]).is_err());
    }
}
