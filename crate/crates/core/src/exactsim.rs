//! Dense statevector simulation and exact diagonalization. Used as the
//! reference oracle for every other module.

use rand::Rng;

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::linalg::{apply_local_inplace, hermitian_eigen, CMat, C64, ONE, ZERO};

pub const MAX_SIM_QUBITS: usize = 14;
pub const MAX_DIAG_QUBITS: usize = 12;
/// Eigenvalues within this distance of the minimum span the ground space.
pub const GROUND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub n: usize,
    pub amps: Vec<C64>,
}

impl StateVector {
    pub fn zero(n: usize) -> Result<Self> {
        Self::basis(n, 0)
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        check_sim_size(n)?;
        let mut amps = vec![ZERO; 1 << n];
        if index >= amps.len() {
            return Err(Error::Validation(format!(
                "basis index {index} out of range"
            )));
        }
        amps[index] = ONE;
        Ok(StateVector { n, amps })
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if !len.is_power_of_two() {
            return Err(Error::DimensionMismatch(format!(
                "amplitude vector length {len} is not a power of two"
            )));
        }
        let n = len.trailing_zeros() as usize;
        check_sim_size(n)?;
        Ok(StateVector { n, amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let nrm = self.norm();
        if nrm > 0.0 {
            for a in &mut self.amps {
                *a /= nrm;
            }
        }
    }

    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(format!(
                "{} vs {} qubits",
                self.n, other.n
            )));
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn apply_matrix(&mut self, qubits: &[usize], m: &CMat) -> Result<()> {
        if qubits.iter().any(|&q| q >= self.n) {
            return Err(Error::InvalidGate(format!(
                "qubits {qubits:?} outside {}-qubit register",
                self.n
            )));
        }
        if m.nrows() != 1 << qubits.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix on {} qubits",
                m.nrows(),
                m.ncols(),
                qubits.len()
            )));
        }
        apply_local_inplace(self.n, qubits, m, &mut self.amps);
        Ok(())
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        let m = gate.matrix()?;
        self.apply_matrix(&gate.qubits, &m)
    }

    /// Probability that measuring `qubit` yields 1.
    pub fn prob_one(&self, qubit: usize) -> f64 {
        let bit = 1usize << (self.n - 1 - qubit);
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Projects `qubit` onto `outcome` and renormalizes; returns the
    /// probability of that outcome before projection.
    pub fn collapse(&mut self, qubit: usize, outcome: bool) -> f64 {
        let bit = 1usize << (self.n - 1 - qubit);
        let mut p = 0.0;
        for (i, a) in self.amps.iter_mut().enumerate() {
            if (i & bit != 0) == outcome {
                p += a.norm_sqr();
            } else {
                *a = ZERO;
            }
        }
        if p > 0.0 {
            let s = p.sqrt();
            for a in &mut self.amps {
                *a /= s;
            }
        }
        p
    }

    pub fn measure<R: Rng + ?Sized>(&mut self, qubit: usize, rng: &mut R) -> bool {
        let p1 = self.prob_one(qubit);
        let outcome = rng.gen::<f64>() < p1;
        self.collapse(qubit, outcome);
        outcome
    }

    /// Samples a full computational-basis outcome without collapsing.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let r: f64 = rng.gen::<f64>() * self.norm().powi(2);
        let mut acc = 0.0;
        for (i, a) in self.amps.iter().enumerate() {
            acc += a.norm_sqr();
            if r < acc {
                return i;
            }
        }
        self.amps.len() - 1
    }

    /// `⟨ψ|O|ψ⟩` for a local operator on `support`.
    pub fn local_expectation(&self, support: &[usize], op: &CMat) -> Result<C64> {
        let mut tmp = self.clone();
        tmp.apply_matrix(support, op)?;
        self.inner(&tmp)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

fn check_sim_size(n: usize) -> Result<()> {
    if n > MAX_SIM_QUBITS {
        return Err(Error::Size(format!(
            "statevector limited to {MAX_SIM_QUBITS} qubits, got {n}"
        )));
    }
    Ok(())
}

/// Runs `circuit` on `initial` (or `|0…0⟩`).
pub fn run_circuit(circuit: &Circuit, initial: Option<StateVector>) -> Result<StateVector> {
    circuit.validate()?;
    let mut state = match initial {
        Some(s) => {
            if s.n != circuit.n {
                return Err(Error::DimensionMismatch(format!(
                    "initial state has {} qubits, circuit {}",
                    s.n, circuit.n
                )));
            }
            s
        }
        None => StateVector::zero(circuit.n)?,
    };
    for g in &circuit.gates {
        state.apply_gate(g)?;
    }
    Ok(state)
}

/// Full spectrum of a Hermitian matrix with eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors as columns, in eigenvalue order.
    pub eigenvectors: CMat,
}

impl Spectrum {
    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Number of eigenvalues within `GROUND_TOL` of the minimum.
    pub fn ground_degeneracy(&self) -> usize {
        let e0 = self.ground_energy();
        self.eigenvalues
            .iter()
            .take_while(|&&e| e - e0 <= GROUND_TOL)
            .count()
    }

    /// First eigenvalue above the ground space minus the ground energy.
    pub fn spectral_gap(&self) -> Option<f64> {
        let g = self.ground_degeneracy();
        self.eigenvalues.get(g).map(|e| e - self.ground_energy())
    }

    pub fn ground_projector(&self) -> CMat {
        self.projector_onto(self.ground_degeneracy())
    }

    /// Projector onto eigenvectors with eigenvalue `≤ threshold`.
    pub fn low_energy_projector(&self, threshold: f64) -> CMat {
        let count = self
            .eigenvalues
            .iter()
            .take_while(|&&e| e <= threshold)
            .count();
        self.projector_onto(count)
    }

    fn projector_onto(&self, count: usize) -> CMat {
        let cols = self.eigenvectors.columns(0, count);
        &cols * cols.adjoint()
    }

    /// `‖Π v‖²` where `Π` projects onto the ground space.
    pub fn ground_overlap(&self, v: &[C64]) -> f64 {
        let g = self.ground_degeneracy();
        (0..g)
            .map(|j| {
                let col = self.eigenvectors.column(j);
                col.iter()
                    .zip(v)
                    .map(|(a, b)| a.conj() * b)
                    .sum::<C64>()
                    .norm_sqr()
            })
            .sum()
    }

    /// `f(H)` through the eigenbasis.
    pub fn apply_function(&self, f: impl Fn(f64) -> f64) -> CMat {
        let d = self.eigenvalues.len();
        let mut scaled = self.eigenvectors.clone();
        for j in 0..d {
            let fj = f(self.eigenvalues[j]);
            for i in 0..d {
                scaled[(i, j)] *= fj;
            }
        }
        &scaled * self.eigenvectors.adjoint()
    }

    /// `⟨v| f(H) |v⟩` through the eigenbasis.
    pub fn quadratic_form(&self, v: &[C64], f: impl Fn(f64) -> f64) -> f64 {
        (0..self.eigenvalues.len())
            .map(|j| {
                let amp: C64 = self
                    .eigenvectors
                    .column(j)
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                f(self.eigenvalues[j]) * amp.norm_sqr()
            })
            .sum()
    }
}

/// Dense diagonalization, limited to `MAX_DIAG_QUBITS` qubits.
pub fn diagonalize(h: &CMat) -> Result<Spectrum> {
    let dim = h.nrows();
    if !h.is_square() || !dim.is_power_of_two() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} is not a qubit operator",
            h.nrows(),
            h.ncols()
        )));
    }
    if dim > 1 << MAX_DIAG_QUBITS {
        return Err(Error::Size(format!(
            "dense diagonalization limited to {MAX_DIAG_QUBITS} qubits"
        )));
    }
    let (eigenvalues, eigenvectors) = hermitian_eigen(h);
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Polynomial `Σ c_j H^j` (monomial coefficients) evaluated through the
/// eigenbasis.
pub fn poly_of_matrix(spectrum: &Spectrum, coeffs: &[f64]) -> Result<CMat> {
    if coeffs.len() > 401 {
        return Err(Error::Domain(format!(
            "polynomial degree {} above 400",
            coeffs.len() - 1
        )));
    }
    Ok(spectrum.apply_function(|x| coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)))
}

/// `|⟨a|b⟩|²`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "dimensions {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(a.inner(b)?.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, pauli_string};

    #[test]
    fn bell_state_preparation() {
        let mut circ = Circuit::new(2);
        circ.push(Gate::new("H", &[0]));
        circ.push(Gate::new("CNOT", &[0, 1]));
        let s = run_circuit(&circ, None).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amps[0] - c(h, 0.0)).norm() < 1e-15);
        assert!((s.amps[3] - c(h, 0.0)).norm() < 1e-15);
        assert!(s.amps[1].norm() < 1e-15);
    }

    #[test]
    fn qubit_zero_is_most_significant() {
        let mut s = StateVector::zero(3).unwrap();
        s.apply_gate(&Gate::new("X", &[0])).unwrap();
        assert_eq!(s.amps[4], ONE);
    }

    #[test]
    fn too_many_qubits_is_size_error() {
        assert!(matches!(StateVector::zero(15), Err(Error::Size(_))));
        let big = CMat::zeros(1 << 13, 1 << 13);
        assert!(matches!(diagonalize(&big), Err(Error::Size(_))));
    }

    #[test]
    fn zz_spectrum_and_ground_space() {
        let h = pauli_string("ZZ").unwrap();
        let spectrum = diagonalize(&h).unwrap();
        assert!((spectrum.ground_energy() + 1.0).abs() < 1e-12);
        assert_eq!(spectrum.ground_degeneracy(), 2);
        let p = spectrum.ground_projector();
        assert!((p[(1, 1)].re - 1.0).abs() < 1e-12);
        assert!((p[(2, 2)].re - 1.0).abs() < 1e-12);
        assert!(p[(0, 0)].norm() < 1e-12);
        assert!((spectrum.spectral_gap().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn poly_of_matrix_squares() {
        let h = pauli_string("XI").unwrap() * c(0.5, 0.0);
        let spectrum = diagonalize(&h).unwrap();
        let sq = poly_of_matrix(&spectrum, &[0.0, 0.0, 1.0]).unwrap();
        let want = &h * &h;
        assert!(crate::linalg::max_abs_diff(&sq, &want) < 1e-12);
    }

    #[test]
    fn fidelity_dimension_mismatch() {
        let a = StateVector::zero(2).unwrap();
        let b = StateVector::zero(3).unwrap();
        assert!(matches!(fidelity(&a, &b), Err(Error::DimensionMismatch(_))));
    }
}
