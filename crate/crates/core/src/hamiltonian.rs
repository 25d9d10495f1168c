//! k-local Hamiltonians stored as weighted dense terms on explicit supports.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactsim::{diagonalize, MAX_DIAG_QUBITS};
use crate::linalg::{
    apply_local_add, c, embed, is_hermitian, local_offsets, pauli_string, spectral_norm,
    support_mask, CMat, C64, ZERO,
};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const NORM_TOL: f64 = 1e-12;
pub const PROJECTOR_TOL: f64 = 1e-10;
pub const FRUSTRATION_FREE_TOL: f64 = 1e-9;

/// A weighted Hermitian operator acting on a sorted list of qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTerm {
    pub support: Vec<usize>,
    pub matrix: CMat,
    pub weight: f64,
}

impl LocalTerm {
    pub fn new(support: Vec<usize>, matrix: CMat, weight: f64) -> Result<Self> {
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(format!(
                "support {support:?} is not strictly increasing"
            )));
        }
        let dim = 1usize << support.len();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::Validation(format!(
                "matrix is {}x{}, support needs {dim}x{dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !is_hermitian(&matrix, HERMITIAN_TOL) {
            return Err(Error::Validation("term matrix is not Hermitian".into()));
        }
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::Validation(format!("weight {weight} must be >= 0")));
        }
        let norm = spectral_norm(&matrix);
        if norm > 1.0 + NORM_TOL {
            return Err(Error::Validation(format!("term norm {norm} exceeds 1")));
        }
        Ok(LocalTerm {
            support,
            matrix,
            weight,
        })
    }

    /// Accepts any qubit order and permutes the matrix onto the sorted support.
    pub fn from_unsorted(support: &[usize], matrix: CMat, weight: f64) -> Result<Self> {
        let mut sorted = support.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != support.len() {
            return Err(Error::Validation(format!(
                "support {support:?} repeats a qubit"
            )));
        }
        let m = if sorted == support {
            matrix
        } else {
            embed(&matrix, support, &sorted)?
        };
        LocalTerm::new(sorted, m, weight)
    }

    /// Pauli string with a signed real coefficient; the sign is folded into
    /// the matrix so the weight stays non-negative.
    pub fn pauli(labels: &str, support: &[usize], coeff: f64) -> Result<Self> {
        if labels.len() != support.len() {
            return Err(Error::Validation(format!(
                "Pauli string '{labels}' does not match support {support:?}"
            )));
        }
        let m = pauli_string(labels)? * c(coeff.signum(), 0.0);
        LocalTerm::from_unsorted(support, m, coeff.abs())
    }

    pub fn locality(&self) -> usize {
        self.support.len()
    }

    pub fn weighted_matrix(&self) -> CMat {
        &self.matrix * c(self.weight, 0.0)
    }

    pub fn is_diagonal(&self) -> bool {
        let d = self.matrix.nrows();
        (0..d).all(|i| (0..d).all(|j| i == j || self.matrix[(i, j)].norm() <= HERMITIAN_TOL))
    }

    pub fn is_projector(&self) -> bool {
        let sq = &self.matrix * &self.matrix;
        sq.iter()
            .zip(self.matrix.iter())
            .all(|(a, b)| (a - b).norm() <= PROJECTOR_TOL)
    }

    pub fn max_qubit(&self) -> Option<usize> {
        self.support.last().copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalHamiltonian {
    pub n: usize,
    pub terms: Vec<LocalTerm>,
}

/// How the `‖H‖ ≤ 1` requirement was established.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum NormMethod {
    Dense,
    TriangleBound,
    Waived,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormCheck {
    pub value: f64,
    pub method: NormMethod,
}

impl LocalHamiltonian {
    pub fn new(n: usize, terms: Vec<LocalTerm>) -> Result<Self> {
        if let Some(q) = terms.iter().filter_map(LocalTerm::max_qubit).max() {
            if q >= n {
                return Err(Error::Validation(format!(
                    "term acts on qubit {q} but n = {n}"
                )));
            }
        }
        Ok(LocalHamiltonian { n, terms })
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Largest term support size.
    pub fn locality(&self) -> usize {
        self.terms
            .iter()
            .map(LocalTerm::locality)
            .max()
            .unwrap_or(0)
    }

    pub fn weight_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }

    /// `Σ w_i ‖H_i‖`.
    pub fn triangle_norm_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.weight * spectral_norm(&t.matrix))
            .sum()
    }

    /// Checks `‖H‖ ≤ 1`: the triangle bound first, then the dense norm for
    /// small systems. `allow_loose` waives the check for large systems.
    pub fn check_norm(&self, allow_loose: bool) -> Result<NormCheck> {
        let bound = self.triangle_norm_bound();
        if bound <= 1.0 + NORM_TOL {
            return Ok(NormCheck {
                value: bound,
                method: NormMethod::TriangleBound,
            });
        }
        if self.n <= MAX_DIAG_QUBITS {
            let spectrum = diagonalize(&self.to_dense()?)?;
            let norm = spectrum
                .eigenvalues
                .first()
                .unwrap()
                .abs()
                .max(spectrum.eigenvalues.last().unwrap().abs());
            if norm <= 1.0 + 1e-9 {
                return Ok(NormCheck {
                    value: norm,
                    method: NormMethod::Dense,
                });
            }
            return Err(Error::Validation(format!("‖H‖ = {norm} exceeds 1")));
        }
        if allow_loose {
            return Ok(NormCheck {
                value: bound,
                method: NormMethod::Waived,
            });
        }
        Err(Error::Validation(format!(
            "Σ w‖H_i‖ = {bound} exceeds 1 and n = {} is too large for a dense check",
            self.n
        )))
    }

    /// Off-diagonal entries of every term are real and non-positive.
    pub fn is_stoquastic(&self) -> bool {
        self.terms.iter().all(|t| {
            let d = t.matrix.nrows();
            (0..d).all(|i| {
                (0..d).all(|j| {
                    if i == j {
                        return true;
                    }
                    let v = t.matrix[(i, j)] * t.weight;
                    v.im.abs() <= HERMITIAN_TOL && v.re <= HERMITIAN_TOL
                })
            })
        })
    }

    pub fn is_projector_sum(&self) -> bool {
        self.terms.iter().all(LocalTerm::is_projector)
    }

    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(LocalTerm::is_diagonal)
    }

    /// Dense `2^n × 2^n` matrix.
    pub fn to_dense(&self) -> Result<CMat> {
        if self.n > MAX_DIAG_QUBITS + 2 {
            return Err(Error::Size(format!(
                "refusing to materialize {} qubits",
                self.n
            )));
        }
        let dim = 1usize << self.n;
        let mut out = CMat::zeros(dim, dim);
        for t in &self.terms {
            let offsets = local_offsets(self.n, &t.support);
            let mask = support_mask(self.n, &t.support);
            let w = c(t.weight, 0.0);
            for base in (0..dim).filter(|b| b & mask == 0) {
                for (r, &ro) in offsets.iter().enumerate() {
                    for (col, &co) in offsets.iter().enumerate() {
                        let v = t.matrix[(r, col)];
                        if v != ZERO {
                            out[(base | ro, base | co)] += w * v;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// `H v` without materializing `H`.
    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != 1usize << self.n {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for {} qubits",
                v.len(),
                self.n
            )));
        }
        let mut out = vec![ZERO; v.len()];
        for t in &self.terms {
            apply_local_add(self.n, &t.support, &t.matrix, c(t.weight, 0.0), v, &mut out);
        }
        Ok(out)
    }

    /// `⟨v|H|v⟩` for a dense vector.
    pub fn energy(&self, v: &[C64]) -> Result<f64> {
        let hv = self.apply(v)?;
        Ok(v.iter().zip(&hv).map(|(a, b)| (a.conj() * b).re).sum())
    }

    /// `⟨x|H|x⟩` for a computational basis state.
    pub fn basis_energy(&self, bits: &[bool]) -> Result<f64> {
        if bits.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "{} bits for {} qubits",
                bits.len(),
                self.n
            )));
        }
        Ok(self
            .terms
            .iter()
            .map(|t| {
                let idx = t
                    .support
                    .iter()
                    .fold(0usize, |acc, &q| (acc << 1) | bits[q] as usize);
                t.weight * t.matrix[(idx, idx)].re
            })
            .sum())
    }

    /// Multiplies every weight by `factor ≥ 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if factor < 0.0 {
            return Err(Error::Validation("scale factor must be >= 0".into()));
        }
        let terms = self
            .terms
            .iter()
            .map(|t| LocalTerm {
                weight: t.weight * factor,
                ..t.clone()
            })
            .collect();
        Ok(LocalHamiltonian { n: self.n, terms })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: HamiltonianFile = serde_json::from_str(s)?;
        file.into_hamiltonian()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_file(&self) -> HamiltonianFile {
        HamiltonianFile {
            n: self.n,
            kind: None,
            terms: self
                .terms
                .iter()
                .map(|t| TermFile {
                    support: t.support.clone(),
                    weight: Some(t.weight),
                    matrix: Some(
                        (0..t.matrix.nrows())
                            .flat_map(|r| (0..t.matrix.ncols()).map(move |col| (r, col)))
                            .map(|(r, col)| [t.matrix[(r, col)].re, t.matrix[(r, col)].im])
                            .collect(),
                    ),
                    pauli: None,
                    coeff: None,
                })
                .collect(),
        }
    }
}

/// Kinds a Hamiltonian file may declare; they are checked on ingest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianKind {
    General,
    Stoquastic,
    ProjectorSum,
    Diagonal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HamiltonianFile {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<HamiltonianKind>,
    pub terms: Vec<TermFile>,
}

/// One term: either an explicit row-major matrix of `[re, im]` pairs with a
/// weight, or a Pauli string with a signed coefficient.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermFile {
    pub support: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pauli: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeff: Option<f64>,
}

impl HamiltonianFile {
    pub fn into_hamiltonian(self) -> Result<LocalHamiltonian> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (i, t) in self.terms.into_iter().enumerate() {
            let term = match (t.matrix, t.pauli) {
                (Some(entries), None) => {
                    let dim = 1usize << t.support.len();
                    if entries.len() != dim * dim {
                        return Err(Error::Validation(format!(
                            "term {i}: {} entries for a {dim}x{dim} matrix",
                            entries.len()
                        )));
                    }
                    let vals: Vec<C64> = entries.iter().map(|p| c(p[0], p[1])).collect();
                    let m = CMat::from_row_slice(dim, dim, &vals);
                    LocalTerm::new(t.support, m, t.weight.unwrap_or(1.0))
                }
                (None, Some(labels)) => {
                    let coeff = t.coeff.or(t.weight).unwrap_or(1.0);
                    LocalTerm::pauli(&labels, &t.support, coeff)
                }
                _ => Err(Error::Parse(format!(
                    "term {i}: give exactly one of 'matrix' or 'pauli'"
                ))),
            }
            .map_err(|e| match e {
                Error::Validation(m) => Error::Validation(format!("term {i}: {m}")),
                other => other,
            })?;
            terms.push(term);
        }
        let h = LocalHamiltonian::new(self.n, terms)?;
        match self.kind {
            Some(HamiltonianKind::Stoquastic) if !h.is_stoquastic() => {
                Err(Error::Validation("declared stoquastic but is not".into()))
            }
            Some(HamiltonianKind::ProjectorSum) if !h.is_projector_sum() => Err(Error::Validation(
                "declared projector sum but a term is not a projector".into(),
            )),
            Some(HamiltonianKind::Diagonal) if !h.is_diagonal() => {
                Err(Error::Validation("declared diagonal but is not".into()))
            }
            _ => Ok(h),
        }
    }
}

/// Sum of weighted projectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorSumHamiltonian(LocalHamiltonian);

impl ProjectorSumHamiltonian {
    pub fn new(h: LocalHamiltonian) -> Result<Self> {
        if let Some(i) = h.terms.iter().position(|t| !t.is_projector()) {
            return Err(Error::Validation(format!("term {i} is not a projector")));
        }
        Ok(ProjectorSumHamiltonian(h))
    }

    pub fn inner(&self) -> &LocalHamiltonian {
        &self.0
    }

    /// `λ₀ ≤ 1e-9`, by dense diagonalization.
    pub fn frustration_free_check(&self) -> Result<bool> {
        frustration_free_check(&self.0)
    }
}

pub fn frustration_free_check(h: &LocalHamiltonian) -> Result<bool> {
    if h.n > MAX_DIAG_QUBITS {
        return Err(Error::Size(format!(
            "frustration-free check limited to {MAX_DIAG_QUBITS} qubits"
        )));
    }
    let spectrum = diagonalize(&h.to_dense()?)?;
    Ok(spectrum.ground_energy() <= FRUSTRATION_FREE_TOL)
}

/// Diagonal Hamiltonian of classical constraint terms; each term stores the
/// diagonal of its local matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalHamiltonian {
    pub n: usize,
    pub terms: Vec<DiagonalTerm>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalTerm {
    pub support: Vec<usize>,
    pub values: Vec<f64>,
    pub weight: f64,
}

impl DiagonalHamiltonian {
    pub fn from_local(h: &LocalHamiltonian) -> Result<Self> {
        if !h.is_diagonal() {
            return Err(Error::Validation("Hamiltonian is not diagonal".into()));
        }
        Ok(DiagonalHamiltonian {
            n: h.n,
            terms: h
                .terms
                .iter()
                .map(|t| DiagonalTerm {
                    support: t.support.clone(),
                    values: (0..t.matrix.nrows()).map(|i| t.matrix[(i, i)].re).collect(),
                    weight: t.weight,
                })
                .collect(),
        })
    }

    pub fn to_local(&self) -> Result<LocalHamiltonian> {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let d = t.values.len();
                let mut m = CMat::zeros(d, d);
                for (i, &v) in t.values.iter().enumerate() {
                    m[(i, i)] = c(v, 0.0);
                }
                LocalTerm::new(t.support.clone(), m, t.weight)
            })
            .collect::<Result<_>>()?;
        LocalHamiltonian::new(self.n, terms)
    }

    pub fn energy(&self, bits: &[bool]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let idx = t
                    .support
                    .iter()
                    .fold(0usize, |acc, &q| (acc << 1) | bits[q] as usize);
                t.weight * t.values[idx]
            })
            .sum()
    }

    /// All `2^n` basis energies, indexed with qubit 0 as the top bit.
    pub fn all_energies(&self) -> Result<Vec<f64>> {
        if self.n > 24 {
            return Err(Error::Size(format!(
                "{} qubits is too many to enumerate",
                self.n
            )));
        }
        let n = self.n;
        Ok((0..1usize << n)
            .map(|x| {
                let bits: Vec<bool> = (0..n).map(|q| (x >> (n - 1 - q)) & 1 == 1).collect();
                self.energy(&bits)
            })
            .collect())
    }
}
