//! Sequential circuit synthesis for MPS states: each site becomes an
//! isometry from the ancilla bond register into bond ⊗ qubit, embedded in a
//! unitary and compiled exactly to one- and two-qubit gates.

use serde::Serialize;

use super::mps::MpsState;
use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::exactsim::{run_circuit, MAX_SIM_QUBITS};
use crate::linalg::{CMat, C64, ONE, ZERO};

/// Output of `mps_to_circuit`. Physical qubits are `0..n`, ancillas follow
/// and return to `|0…0⟩`.
#[derive(Debug, Clone, Serialize)]
pub struct MpsCircuit {
    pub circuit: Circuit,
    pub physical_qubits: usize,
    pub ancilla_qubits: usize,
    pub target_epsilon: f64,
    pub bond_dims: Vec<usize>,
}

impl MpsCircuit {
    pub fn gate_count(&self) -> usize {
        self.circuit.gates.len()
    }

    pub fn two_qubit_gate_count(&self) -> usize {
        self.circuit
            .gates
            .iter()
            .filter(|g| g.qubits.len() == 2)
            .count()
    }
}

/// Compiles `mps` to a circuit over one- and two-qubit gates preparing the
/// state on the physical qubits with fidelity at least `1 - eps`.
pub fn mps_to_circuit(mps: &MpsState, eps: f64) -> Result<MpsCircuit> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Validation(format!("eps {eps} must be in (0, 1)")));
    }
    let sites = mps.left_canonical()?;
    let n = sites.len();
    let max_bond = sites
        .iter()
        .map(|s| s[0].nrows().max(s[0].ncols()))
        .max()
        .unwrap_or(1);
    let anc = ceil_log2(max_bond);
    let dim = 1usize << (anc + 1);
    let mut circuit = Circuit::new(n + anc);
    for k in (0..n).rev() {
        let site = &sites[k];
        let (dl, dr) = site[0].shape();
        // columns for inputs |β⟩|0⟩, outputs indexed α·2 + s
        let mut fixed = Vec::with_capacity(dr);
        for beta in 0..dr {
            let mut col = vec![ZERO; dim];
            for alpha in 0..dl {
                for s in 0..2 {
                    col[alpha * 2 + s] = site[s][(alpha, beta)];
                }
            }
            fixed.push((beta * 2, col));
        }
        let u = complete_unitary(dim, &fixed)?;
        let mut register: Vec<usize> = (n..n + anc).collect();
        register.push(k);
        for g in compile_unitary(&u, &register)? {
            circuit.push(g);
        }
    }
    Ok(MpsCircuit {
        circuit,
        physical_qubits: n,
        ancilla_qubits: anc,
        target_epsilon: eps,
        bond_dims: sites.iter().skip(1).map(|s| s[0].nrows()).collect(),
    })
}

/// `|⟨ψ ⊗ 0_anc | C |0⟩|²` by dense simulation.
pub fn circuit_fidelity(mps: &MpsState, compiled: &MpsCircuit) -> Result<f64> {
    let total = compiled.physical_qubits + compiled.ancilla_qubits;
    if total > MAX_SIM_QUBITS {
        return Err(Error::Size(format!("{total} qubits exceed the simulator")));
    }
    let out = run_circuit(&compiled.circuit, None)?;
    let target = super::EvaluatableState::to_statevector(mps)?;
    let shift = compiled.ancilla_qubits;
    let overlap: C64 = target
        .amps
        .iter()
        .enumerate()
        .map(|(x, a)| a.conj() * out.amps[x << shift])
        .sum();
    Ok(overlap.norm_sqr())
}

fn ceil_log2(d: usize) -> usize {
    let mut bits = 0;
    while (1usize << bits) < d {
        bits += 1;
    }
    bits
}

/// Unitary with prescribed orthonormal columns at given positions; the
/// remaining columns come from Gram–Schmidt on the standard basis.
pub fn complete_unitary(dim: usize, fixed: &[(usize, Vec<C64>)]) -> Result<CMat> {
    let mut u = CMat::zeros(dim, dim);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(dim);
    for (pos, col) in fixed {
        for (i, v) in col.iter().enumerate() {
            u[(i, *pos)] = *v;
        }
        basis.push(col.clone());
    }
    let mut taken: Vec<bool> = vec![false; dim];
    for (pos, _) in fixed {
        taken[*pos] = true;
    }
    let mut free = (0..dim).filter(|&p| !taken[p]);
    for e in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut v = vec![ZERO; dim];
        v[e] = ONE;
        for _ in 0..2 {
            for b in &basis {
                let proj: C64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= proj * bi;
                }
            }
        }
        let nrm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if nrm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= nrm);
        let pos = free
            .next()
            .ok_or_else(|| Error::Numerical("unitary completion ran out of columns".into()))?;
        for (i, x) in v.iter().enumerate() {
            u[(i, pos)] = *x;
        }
        basis.push(v);
    }
    let defect = &u.adjoint() * &u - CMat::identity(dim, dim);
    if defect.iter().any(|x| x.norm() > 1e-9) {
        return Err(Error::Numerical(
            "prescribed columns are not orthonormal".into(),
        ));
    }
    Ok(u)
}

/// Unitary acting on two basis states that differ in one bit.
#[derive(Debug, Clone)]
struct TwoLevel {
    a: usize,
    b: usize,
    m: CMat,
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

/// Factors `u` into two-level unitaries on Gray-adjacent basis states, in
/// time order.
fn two_level_factors(u: &CMat) -> Vec<TwoLevel> {
    let dim = u.nrows();
    let order: Vec<usize> = (0..dim).map(gray).collect();
    let mut w = u.clone();
    let mut elim: Vec<TwoLevel> = Vec::new();
    let apply_rows = |w: &mut CMat, a: usize, b: usize, g: &CMat| {
        for col in 0..dim {
            let (x, y) = (w[(a, col)], w[(b, col)]);
            w[(a, col)] = g[(0, 0)] * x + g[(0, 1)] * y;
            w[(b, col)] = g[(1, 0)] * x + g[(1, 1)] * y;
        }
    };
    for j in 0..dim.saturating_sub(1) {
        let col = order[j];
        for i in (j + 1..dim).rev() {
            let (r1, r2) = (order[i - 1], order[i]);
            let (x, y) = (w[(r1, col)], w[(r2, col)]);
            if y.norm() < 1e-15 && (i != j + 1 || (x.im.abs() < 1e-15 && x.re > 0.0)) {
                continue;
            }
            let nu = (x.norm_sqr() + y.norm_sqr()).sqrt();
            let g = CMat::from_row_slice(2, 2, &[x.conj() / nu, y.conj() / nu, -y / nu, x / nu]);
            apply_rows(&mut w, r1, r2, &g);
            elim.push(TwoLevel { a: r1, b: r2, m: g });
        }
    }
    if dim >= 2 {
        let (r1, r2) = (order[dim - 2], order[dim - 1]);
        let ph = w[(r2, r2)];
        if (ph - ONE).norm() > 1e-15 {
            let g = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ph.conj()]);
            apply_rows(&mut w, r1, r2, &g);
            elim.push(TwoLevel { a: r1, b: r2, m: g });
        }
    }
    // G_m ⋯ G_1 U = I  ⇒  U = G_1† ⋯ G_m†; time order applies G_m† first
    elim.into_iter()
        .rev()
        .map(|t| TwoLevel {
            a: t.a,
            b: t.b,
            m: t.m.adjoint(),
        })
        .collect()
}

/// Exact compilation of a unitary on `register` (first entry is the most
/// significant bit) into one- and two-qubit gates.
pub fn compile_unitary(u: &CMat, register: &[usize]) -> Result<Vec<Gate>> {
    let k = register.len();
    if u.nrows() != 1 << k || !u.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} unitary on {k} qubits",
            u.nrows(),
            u.ncols()
        )));
    }
    let mut gates = Vec::new();
    for t in two_level_factors(u) {
        let diff = t.a ^ t.b;
        debug_assert!(diff.is_power_of_two());
        let pos = k - 1 - diff.trailing_zeros() as usize;
        let target = register[pos];
        // matrix in the (|0⟩, |1⟩) basis of the target bit
        let m = if t.a & diff == 0 {
            t.m.clone()
        } else {
            let x = CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
            &x * &t.m * &x
        };
        let mut controls = Vec::new();
        let mut flips = Vec::new();
        for (p, &q) in register.iter().enumerate() {
            if p == pos {
                continue;
            }
            controls.push(q);
            if (t.a >> (k - 1 - p)) & 1 == 0 {
                flips.push(q);
            }
        }
        for &q in &flips {
            gates.push(Gate::new("X", &[q]));
        }
        controlled(&controls, target, &m, &mut gates);
        for &q in &flips {
            gates.push(Gate::new("X", &[q]));
        }
    }
    Ok(gates)
}

fn sqrt_unitary2(m: &CMat) -> CMat {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let tr = m[(0, 0)] + m[(1, 1)];
    let s = det.sqrt();
    let (s, t2) = {
        let a = tr + s * 2.0;
        let b = tr - s * 2.0;
        if a.norm() >= b.norm() {
            (s, a)
        } else {
            (-s, b)
        }
    };
    let t = t2.sqrt();
    (m + CMat::identity(2, 2) * s) / t
}

/// Multi-controlled single-qubit unitary, all controls on `|1⟩`.
fn controlled(controls: &[usize], target: usize, m: &CMat, out: &mut Vec<Gate>) {
    match controls.len() {
        0 => {
            if !is_identity(m) {
                out.push(Gate::unitary(&[target], m));
            }
        }
        1 => {
            if is_identity(m) {
                return;
            }
            let mut cu = CMat::identity(4, 4);
            cu.view_mut((2, 2), (2, 2)).copy_from(m);
            out.push(Gate::unitary(&[controls[0], target], &cu));
        }
        k => {
            if is_identity(m) {
                return;
            }
            let v = sqrt_unitary2(m);
            let vd = v.adjoint();
            let last = controls[k - 1];
            let rest = &controls[..k - 1];
            let x = CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
            controlled(&[last], target, &v, out);
            controlled(rest, last, &x, out);
            controlled(&[last], target, &vd, out);
            controlled(rest, last, &x, out);
            controlled(rest, target, &v, out);
        }
    }
}

fn is_identity(m: &CMat) -> bool {
    let d = m.nrows();
    (0..d).all(|i| (0..d).all(|j| (m[(i, j)] - if i == j { ONE } else { ZERO }).norm() < 1e-14))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::exactsim::StateVector;
    use crate::linalg::{c, max_abs_diff};

    fn random_unitary(dim: usize, rng: &mut ChaCha8Rng) -> CMat {
        let a = CMat::from_fn(dim, dim, |_, _| {
            c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        a.qr().q()
    }

    fn circuit_unitary(gates: &[Gate], k: usize) -> CMat {
        let dim = 1 << k;
        let mut u = CMat::zeros(dim, dim);
        for col in 0..dim {
            let mut s = StateVector::basis(k, col).unwrap();
            for g in gates {
                s.apply_gate(g).unwrap();
            }
            for r in 0..dim {
                u[(r, col)] = s.amps[r];
            }
        }
        u
    }

    #[test]
    fn compiled_unitaries_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for k in 1..=4 {
            let u = random_unitary(1 << k, &mut rng);
            let register: Vec<usize> = (0..k).collect();
            let gates = compile_unitary(&u, &register).unwrap();
            assert!(gates.iter().all(|g| g.qubits.len() <= 2));
            let got = circuit_unitary(&gates, k);
            // equal up to a global phase
            let (r, col) = (0, 0);
            let phase = if got[(r, col)].norm() > 1e-6 {
                u[(r, col)] / got[(r, col)]
            } else {
                ONE
            };
            assert!(max_abs_diff(&(got * phase), &u) < 1e-10, "k = {k}");
        }
    }

    #[test]
    fn ghz_circuit_fidelity() {
        let mps = MpsState::ghz(5).unwrap();
        let comp = mps_to_circuit(&mps, 1e-3).unwrap();
        assert_eq!(comp.ancilla_qubits, 1);
        let f = circuit_fidelity(&mps, &comp).unwrap();
        assert!(f >= 1.0 - 1e-10, "fidelity {f}");
    }

    #[test]
    fn random_mps_circuit_fidelity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mps = MpsState::random(5, 4, &mut rng).unwrap();
        let comp = mps_to_circuit(&mps, 1e-3).unwrap();
        let f = circuit_fidelity(&mps, &comp).unwrap();
        assert!(f >= 1.0 - 1e-10, "fidelity {f}");
    }
}
