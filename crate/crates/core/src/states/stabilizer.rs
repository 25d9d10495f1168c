use rand::Rng;

use super::sampling::SamplableAccess;
use super::{check_support, EvaluatableState};
use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::exactsim::{run_circuit, StateVector};
use crate::linalg::{c, embed, CMat, C64, ZERO};

/// Aaronson–Gottesman tableau: rows `0..n` are destabilizers, rows `n..2n`
/// stabilizers. Row `(x, z, r)` is `(-1)^r ⊗_j P_j` with `P_j ∈ {I, X, Y, Z}`
/// chosen by `(x_j, z_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tableau {
    n: usize,
    x: Vec<Vec<bool>>,
    z: Vec<Vec<bool>>,
    r: Vec<bool>,
}

/// Phase exponent (power of `i`) picked up when multiplying single-qubit
/// Paulis `(x1, z1) · (x2, z2)`.
fn g(x1: bool, z1: bool, x2: bool, z2: bool) -> i32 {
    match (x1, z1) {
        (false, false) => 0,
        (true, true) => z2 as i32 - x2 as i32,
        (true, false) => (z2 as i32) * (2 * x2 as i32 - 1),
        (false, true) => (x2 as i32) * (1 - 2 * z2 as i32),
    }
}

impl Tableau {
    /// `|0…0⟩`.
    pub fn new(n: usize) -> Self {
        let mut x = vec![vec![false; n]; 2 * n + 1];
        let mut z = vec![vec![false; n]; 2 * n + 1];
        for i in 0..n {
            x[i][i] = true;
            z[n + i][i] = true;
        }
        Tableau {
            n,
            x,
            z,
            r: vec![false; 2 * n + 1],
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn h(&mut self, a: usize) {
        for i in 0..2 * self.n {
            self.r[i] ^= self.x[i][a] && self.z[i][a];
            std::mem::swap(&mut self.x[i][a], &mut self.z[i][a]);
        }
    }

    pub fn s(&mut self, a: usize) {
        for i in 0..2 * self.n {
            self.r[i] ^= self.x[i][a] && self.z[i][a];
            self.z[i][a] ^= self.x[i][a];
        }
    }

    pub fn cnot(&mut self, a: usize, b: usize) {
        for i in 0..2 * self.n {
            self.r[i] ^= self.x[i][a] && self.z[i][b] && (self.x[i][b] ^ self.z[i][a] ^ true);
            self.x[i][b] ^= self.x[i][a];
            self.z[i][a] ^= self.z[i][b];
        }
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        let q = &gate.qubits;
        if q.iter().any(|&x| x >= self.n) {
            return Err(Error::InvalidGate(format!(
                "{} outside register",
                gate.name
            )));
        }
        match gate.canonical_name().as_str() {
            "I" => {}
            "H" => self.h(q[0]),
            "S" => self.s(q[0]),
            "SDG" => {
                self.s(q[0]);
                self.s(q[0]);
                self.s(q[0]);
            }
            "Z" => {
                self.s(q[0]);
                self.s(q[0]);
            }
            "X" => {
                self.h(q[0]);
                self.s(q[0]);
                self.s(q[0]);
                self.h(q[0]);
            }
            "Y" => {
                // Y ∝ X Z
                self.s(q[0]);
                self.s(q[0]);
                self.h(q[0]);
                self.s(q[0]);
                self.s(q[0]);
                self.h(q[0]);
            }
            "CNOT" => self.cnot(q[0], q[1]),
            "CZ" => {
                self.h(q[1]);
                self.cnot(q[0], q[1]);
                self.h(q[1]);
            }
            "SWAP" => {
                self.cnot(q[0], q[1]);
                self.cnot(q[1], q[0]);
                self.cnot(q[0], q[1]);
            }
            other => {
                return Err(Error::InvalidGate(format!(
                    "'{other}' is not a Clifford gate"
                )))
            }
        }
        Ok(())
    }

    /// Row `h ← row_i · row_h` with phase tracking.
    fn rowsum(&mut self, h: usize, i: usize) {
        let mut e: i32 = 2 * self.r[h] as i32 + 2 * self.r[i] as i32;
        for j in 0..self.n {
            e += g(self.x[i][j], self.z[i][j], self.x[h][j], self.z[h][j]);
        }
        self.r[h] = e.rem_euclid(4) == 2;
        for j in 0..self.n {
            let (xi, zi) = (self.x[i][j], self.z[i][j]);
            self.x[h][j] ^= xi;
            self.z[h][j] ^= zi;
        }
    }

    /// Measures qubit `a` in the computational basis. `choose` is called with
    /// no arguments only when the outcome is random.
    pub fn measure_with(&mut self, a: usize, choose: impl FnOnce() -> bool) -> (bool, bool) {
        let n = self.n;
        if let Some(p) = (n..2 * n).find(|&i| self.x[i][a]) {
            for i in 0..2 * n {
                if i != p && self.x[i][a] {
                    self.rowsum(i, p);
                }
            }
            self.x[p - n] = self.x[p].clone();
            self.z[p - n] = self.z[p].clone();
            self.r[p - n] = self.r[p];
            self.x[p] = vec![false; n];
            self.z[p] = vec![false; n];
            self.z[p][a] = true;
            let outcome = choose();
            self.r[p] = outcome;
            (outcome, true)
        } else {
            let scratch = 2 * n;
            self.x[scratch] = vec![false; n];
            self.z[scratch] = vec![false; n];
            self.r[scratch] = false;
            for i in 0..n {
                if self.x[i][a] {
                    self.rowsum(scratch, i + n);
                }
            }
            (self.r[scratch], false)
        }
    }

    /// `⟨P⟩ ∈ {-1, 0, 1}` for a Pauli string given by labels on `support`.
    pub fn pauli_expectation(&self, support: &[usize], labels: &[u8]) -> i32 {
        let n = self.n;
        let mut px = vec![false; n];
        let mut pz = vec![false; n];
        for (&q, &l) in support.iter().zip(labels) {
            match l {
                1 => px[q] = true,
                2 => {
                    px[q] = true;
                    pz[q] = true
                }
                3 => pz[q] = true,
                _ => {}
            }
        }
        let anticommutes = |row: usize| -> bool {
            support.iter().fold(false, |acc, &q| {
                acc ^ ((px[q] && self.z[row][q]) ^ (pz[q] && self.x[row][q]))
            })
        };
        if (n..2 * n).any(anticommutes) {
            return 0;
        }
        // P = ± Π_{i: P anticommutes with destabilizer i} S_i
        let mut acc = Tableau {
            n,
            x: vec![vec![false; n]],
            z: vec![vec![false; n]],
            r: vec![false],
        };
        for i in 0..n {
            if anticommutes(i) {
                acc.x.push(self.x[i + n].clone());
                acc.z.push(self.z[i + n].clone());
                acc.r.push(self.r[i + n]);
                let last = acc.x.len() - 1;
                acc.rowsum(0, last);
            }
        }
        debug_assert!(acc.x[0] == px && acc.z[0] == pz);
        if acc.r[0] {
            -1
        } else {
            1
        }
    }

    /// Stabilizer generators as `(x, z, sign)` rows.
    pub fn stabilizers(&self) -> Vec<(Vec<bool>, Vec<bool>, bool)> {
        (self.n..2 * self.n)
            .map(|i| (self.x[i].clone(), self.z[i].clone(), self.r[i]))
            .collect()
    }
}

/// Stabilizer state prepared by a Clifford circuit from `|0…0⟩`.
#[derive(Debug, Clone)]
pub struct StabilizerState {
    circuit: Circuit,
    tableau: Tableau,
    /// A basis state in the support, with its amplitude fixed real positive.
    reference: Vec<bool>,
    /// Number of random outcomes when measuring everything, so each nonzero
    /// amplitude has magnitude `2^{-rank/2}`.
    rank: usize,
}

impl StabilizerState {
    pub fn from_circuit(circuit: &Circuit) -> Result<Self> {
        let mut tableau = Tableau::new(circuit.n);
        for g in &circuit.gates {
            if g.qubits.iter().any(|&q| q >= circuit.n) {
                return Err(Error::InvalidGate(format!("{} outside register", g.name)));
            }
            tableau.apply_gate(g)?;
        }
        let mut probe = tableau.clone();
        let mut reference = Vec::with_capacity(circuit.n);
        let mut rank = 0;
        for q in 0..circuit.n {
            let (bit, random) = probe.measure_with(q, || false);
            rank += random as usize;
            reference.push(bit);
        }
        Ok(StabilizerState {
            circuit: circuit.clone(),
            tableau,
            reference,
            rank,
        })
    }

    /// Random Clifford circuit of the given depth over `H`, `S`, `CNOT`.
    pub fn random<R: Rng + ?Sized>(n: usize, depth: usize, rng: &mut R) -> Result<Self> {
        let mut circ = Circuit::new(n);
        for _ in 0..depth {
            for q in 0..n {
                match rng.gen_range(0..4) {
                    0 => circ.push(Gate::new("H", &[q])),
                    1 => circ.push(Gate::new("S", &[q])),
                    2 if n > 1 => {
                        let mut t = rng.gen_range(0..n - 1);
                        if t >= q {
                            t += 1;
                        }
                        circ.push(Gate::new("CNOT", &[q, t]));
                    }
                    _ => {}
                }
            }
        }
        StabilizerState::from_circuit(&circ)
    }

    pub fn tableau(&self) -> &Tableau {
        &self.tableau
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    /// Exact sample of all qubits.
    pub fn sample_bits<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<bool> {
        let mut t = self.tableau.clone();
        (0..self.tableau.n)
            .map(|q| t.measure_with(q, || rng.gen::<bool>()).0)
            .collect()
    }

    /// Amplitude `⟨x|u⟩` in the phase convention where the reference string
    /// has a positive real amplitude.
    pub fn amplitude_bits(&self, bits: &[bool]) -> C64 {
        let n = self.tableau.n;
        let target: Vec<bool> = bits
            .iter()
            .zip(&self.reference)
            .map(|(a, b)| a ^ b)
            .collect();
        // find a stabilizer element with X-part equal to `target`
        let gens = self.tableau.stabilizers();
        let mut rows: Vec<(Vec<bool>, Vec<usize>)> = gens
            .iter()
            .enumerate()
            .map(|(i, (x, _, _))| (x.clone(), vec![i]))
            .collect();
        let mut residual = (target, Vec::<usize>::new());
        let mut pivot_row = 0;
        for col in 0..n {
            let Some(p) = (pivot_row..rows.len()).find(|&i| rows[i].0[col]) else {
                continue;
            };
            rows.swap(pivot_row, p);
            let (px, pidx) = rows[pivot_row].clone();
            for i in 0..rows.len() {
                if i != pivot_row && rows[i].0[col] {
                    xor_into(&mut rows[i], &px, &pidx);
                }
            }
            if residual.0[col] {
                xor_into(&mut residual, &px, &pidx);
            }
            pivot_row += 1;
        }
        if residual.0.iter().any(|&b| b) {
            return ZERO;
        }
        // multiply the selected generators with phase tracking
        let mut acc = Tableau {
            n,
            x: vec![vec![false; n]],
            z: vec![vec![false; n]],
            r: vec![false],
        };
        for &i in &residual.1 {
            let (x, z, r) = &gens[i];
            acc.x.push(x.clone());
            acc.z.push(z.clone());
            acc.r.push(*r);
            let last = acc.x.len() - 1;
            acc.rowsum(0, last);
        }
        // ⟨x|u⟩ = phase(g, reference) ⟨reference|u⟩
        let mut phase = if acc.r[0] { c(-1.0, 0.0) } else { c(1.0, 0.0) };
        for j in 0..n {
            let b = self.reference[j];
            match (acc.x[0][j], acc.z[0][j]) {
                (false, true) if b => phase = -phase,
                (true, true) => {
                    phase *= c(0.0, 1.0);
                    if b {
                        phase = -phase;
                    }
                }
                _ => {}
            }
        }
        phase * (0.5f64).powf(self.rank as f64 / 2.0)
    }
}

fn xor_into(dst: &mut (Vec<bool>, Vec<usize>), x: &[bool], idx: &[usize]) {
    for (d, s) in dst.0.iter_mut().zip(x) {
        *d ^= s;
    }
    for &i in idx {
        if let Some(pos) = dst.1.iter().position(|&j| j == i) {
            dst.1.remove(pos);
        } else {
            dst.1.push(i);
        }
    }
}

/// Pauli labels 0..4 = I, X, Y, Z.
fn pauli_matrix(labels: &[u8]) -> CMat {
    let one = |l: u8| -> CMat {
        let name = ['I', 'X', 'Y', 'Z'][l as usize];
        crate::linalg::pauli(name).expect("valid label")
    };
    labels
        .iter()
        .fold(CMat::identity(1, 1), |acc, &l| acc.kronecker(&one(l)))
}

impl EvaluatableState for StabilizerState {
    fn num_qubits(&self) -> usize {
        self.tableau.n
    }

    fn description(&self) -> String {
        format!(
            "stabilizer state on {} qubits from {} Clifford gates",
            self.tableau.n,
            self.circuit.gates.len()
        )
    }

    fn local_expectation(&self, support: &[usize], op: &CMat) -> Result<C64> {
        let rho = self.reduced_density_matrix(support)?;
        Ok((&rho * op).trace())
    }

    /// `ρ_S = 2^{-s} Σ_P ⟨P⟩ P` over Pauli strings on the support.
    fn reduced_density_matrix(&self, support: &[usize]) -> Result<CMat> {
        check_support(self.tableau.n, support)?;
        let mut sorted = support.to_vec();
        sorted.sort_unstable();
        let s = sorted.len();
        let dim = 1usize << s;
        let mut rho = CMat::zeros(dim, dim);
        let mut labels = vec![0u8; s];
        for code in 0..1usize << (2 * s) {
            for (j, l) in labels.iter_mut().enumerate() {
                *l = ((code >> (2 * (s - 1 - j))) & 3) as u8;
            }
            let e = self.tableau.pauli_expectation(&sorted, &labels);
            if e != 0 {
                rho += pauli_matrix(&labels) * c(e as f64, 0.0);
            }
        }
        rho /= c(dim as f64, 0.0);
        if sorted == support {
            Ok(rho)
        } else {
            embed(&rho, &sorted, support)
        }
    }

    fn to_statevector(&self) -> Result<StateVector> {
        run_circuit(&self.circuit, None)
    }

    fn prepare_circuit(&self) -> Option<Circuit> {
        Some(self.circuit.clone())
    }
}

impl SamplableAccess for StabilizerState {
    fn num_qubits(&self) -> usize {
        self.tableau.n
    }

    fn amplitude(&self, index: u128) -> Result<C64> {
        let n = self.tableau.n;
        let bits: Vec<bool> = (0..n).map(|q| (index >> (n - 1 - q)) & 1 == 1).collect();
        Ok(self.amplitude_bits(&bits))
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u128> {
        Ok(self
            .sample_bits(rng)
            .iter()
            .fold(0u128, |acc, &b| (acc << 1) | b as u128))
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::linalg::max_abs_diff;
    use crate::states::testutil::{random_hermitian, random_support};

    #[test]
    fn ghz_pauli_expectations() {
        let mut circ = Circuit::new(3);
        circ.push(Gate::new("H", &[0]));
        circ.push(Gate::new("CNOT", &[0, 1]));
        circ.push(Gate::new("CNOT", &[1, 2]));
        let s = StabilizerState::from_circuit(&circ).unwrap();
        let t = s.tableau();
        assert_eq!(t.pauli_expectation(&[0, 1, 2], &[1, 1, 1]), 1);
        assert_eq!(t.pauli_expectation(&[0, 2], &[3, 3]), 1);
        assert_eq!(t.pauli_expectation(&[0], &[3]), 0);
        assert_eq!(t.pauli_expectation(&[0, 1, 2], &[2, 2, 1]), -1);
    }

    #[test]
    fn random_states_match_statevector() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let s = StabilizerState::random(6, 6, &mut rng).unwrap();
            let dense = s.to_statevector().unwrap();
            for k in 1..=3 {
                let sup = random_support(6, k, &mut rng);
                let op = random_hermitian(k, &mut rng);
                let a = s.local_expectation(&sup, &op).unwrap();
                let b = dense.local_expectation(&sup, &op).unwrap();
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn amplitudes_match_up_to_global_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let s = StabilizerState::random(5, 5, &mut rng).unwrap();
            let dense = s.to_statevector().unwrap();
            let ours: Vec<C64> = (0..32u128).map(|x| s.amplitude(x).unwrap()).collect();
            let r = s
                .reference
                .iter()
                .fold(0usize, |acc, &b| (acc << 1) | b as usize);
            let phase = dense.amps[r] / dense.amps[r].norm();
            let rotated: Vec<C64> = ours.iter().map(|a| a * phase).collect();
            let want = CMat::from_column_slice(32, 1, &dense.amps);
            let got = CMat::from_column_slice(32, 1, &rotated);
            assert!(max_abs_diff(&want, &got) < 1e-12);
        }
    }

    #[test]
    fn non_clifford_gate_rejected() {
        let mut circ = Circuit::new(1);
        circ.push(Gate::new("T", &[0]));
        assert!(matches!(
            StabilizerState::from_circuit(&circ),
            Err(Error::InvalidGate(_))
        ));
    }
}
