//! Gate-level circuit description shared by state preparation, the clock
//! construction and verifier simulation.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMat, C64, ONE, ZERO};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
}

impl Gate {
    pub fn new(name: &str, qubits: &[usize]) -> Self {
        Gate {
            name: name.to_string(),
            qubits: qubits.to_vec(),
            params: Vec::new(),
        }
    }

    pub fn with_params(name: &str, qubits: &[usize], params: &[f64]) -> Self {
        Gate {
            name: name.to_string(),
            qubits: qubits.to_vec(),
            params: params.to_vec(),
        }
    }

    /// Arbitrary unitary on `qubits`; params hold row-major `(re, im)` pairs.
    pub fn unitary(qubits: &[usize], m: &CMat) -> Self {
        let mut params = Vec::with_capacity(2 * m.len());
        for r in 0..m.nrows() {
            for col in 0..m.ncols() {
                params.push(m[(r, col)].re);
                params.push(m[(r, col)].im);
            }
        }
        Gate {
            name: "UNITARY".to_string(),
            qubits: qubits.to_vec(),
            params,
        }
    }

    pub fn canonical_name(&self) -> String {
        match self.name.to_ascii_uppercase().as_str() {
            "CX" => "CNOT".into(),
            "CCX" | "CCNOT" => "TOFFOLI".into(),
            "ID" => "I".into(),
            other => other.into(),
        }
    }

    pub fn matrix(&self) -> Result<CMat> {
        let name = self.canonical_name();
        let arity = |k: usize| -> Result<()> {
            if self.qubits.len() != k {
                return Err(Error::InvalidGate(format!(
                    "{name} expects {k} qubits, got {}",
                    self.qubits.len()
                )));
            }
            Ok(())
        };
        let param = |i: usize| -> Result<f64> {
            self.params
                .get(i)
                .copied()
                .ok_or_else(|| Error::InvalidGate(format!("{name} missing parameter {i}")))
        };
        let h = FRAC_1_SQRT_2;
        let m2 = |v: [C64; 4]| CMat::from_row_slice(2, 2, &v);
        let m = match name.as_str() {
            "I" => {
                if self.qubits.is_empty() {
                    return Err(Error::InvalidGate("I needs at least one qubit".into()));
                }
                CMat::identity(1 << self.qubits.len(), 1 << self.qubits.len())
            }
            "X" => {
                arity(1)?;
                m2([ZERO, ONE, ONE, ZERO])
            }
            "Y" => {
                arity(1)?;
                m2([ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO])
            }
            "Z" => {
                arity(1)?;
                m2([ONE, ZERO, ZERO, -ONE])
            }
            "H" => {
                arity(1)?;
                m2([c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)])
            }
            "S" => {
                arity(1)?;
                m2([ONE, ZERO, ZERO, c(0.0, 1.0)])
            }
            "SDG" => {
                arity(1)?;
                m2([ONE, ZERO, ZERO, c(0.0, -1.0)])
            }
            "T" => {
                arity(1)?;
                m2([
                    ONE,
                    ZERO,
                    ZERO,
                    C64::from_polar(1.0, std::f64::consts::FRAC_PI_4),
                ])
            }
            "TDG" => {
                arity(1)?;
                m2([
                    ONE,
                    ZERO,
                    ZERO,
                    C64::from_polar(1.0, -std::f64::consts::FRAC_PI_4),
                ])
            }
            "RX" => {
                arity(1)?;
                let t = param(0)? / 2.0;
                m2([
                    c(t.cos(), 0.0),
                    c(0.0, -t.sin()),
                    c(0.0, -t.sin()),
                    c(t.cos(), 0.0),
                ])
            }
            "RY" => {
                arity(1)?;
                let t = param(0)? / 2.0;
                m2([
                    c(t.cos(), 0.0),
                    c(-t.sin(), 0.0),
                    c(t.sin(), 0.0),
                    c(t.cos(), 0.0),
                ])
            }
            "RZ" => {
                arity(1)?;
                let t = param(0)? / 2.0;
                m2([
                    C64::from_polar(1.0, -t),
                    ZERO,
                    ZERO,
                    C64::from_polar(1.0, t),
                ])
            }
            "PHASE" => {
                arity(1)?;
                m2([ONE, ZERO, ZERO, C64::from_polar(1.0, param(0)?)])
            }
            "CNOT" => {
                arity(2)?;
                permutation(2, |i| if i >= 2 { i ^ 1 } else { i })
            }
            "CZ" => {
                arity(2)?;
                let mut m = CMat::identity(4, 4);
                m[(3, 3)] = -ONE;
                m
            }
            "CPHASE" => {
                arity(2)?;
                let mut m = CMat::identity(4, 4);
                m[(3, 3)] = C64::from_polar(1.0, param(0)?);
                m
            }
            "SWAP" => {
                arity(2)?;
                permutation(2, |i| ((i & 1) << 1) | (i >> 1))
            }
            "TOFFOLI" => {
                arity(3)?;
                permutation(3, |i| if i >= 6 { i ^ 1 } else { i })
            }
            "UNITARY" => {
                let k = self.qubits.len();
                let dim = 1usize << k;
                if k == 0 || self.params.len() != 2 * dim * dim {
                    return Err(Error::InvalidGate(format!(
                        "UNITARY on {k} qubits needs {} params, got {}",
                        2 * dim * dim,
                        self.params.len()
                    )));
                }
                let entries: Vec<C64> = self.params.chunks(2).map(|p| c(p[0], p[1])).collect();
                let m = CMat::from_row_slice(dim, dim, &entries);
                let defect = &m.adjoint() * &m - CMat::identity(dim, dim);
                if defect.iter().any(|v| v.norm() > 1e-9) {
                    return Err(Error::InvalidGate("UNITARY matrix is not unitary".into()));
                }
                m
            }
            other => return Err(Error::InvalidGate(format!("unknown gate '{other}'"))),
        };
        Ok(m)
    }

    /// True for gates whose matrix is a Clifford operation.
    pub fn is_clifford(&self) -> bool {
        matches!(
            self.canonical_name().as_str(),
            "I" | "X" | "Y" | "Z" | "H" | "S" | "SDG" | "CNOT" | "CZ" | "SWAP"
        )
    }
}

fn permutation(k: usize, f: impl Fn(usize) -> usize) -> CMat {
    let dim = 1 << k;
    let mut m = CMat::zeros(dim, dim);
    for i in 0..dim {
        m[(f(i), i)] = ONE;
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n: usize,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n: usize) -> Self {
        Circuit {
            n,
            gates: Vec::new(),
        }
    }

    pub fn push(&mut self, gate: Gate) {
        self.gates.push(gate);
    }

    pub fn validate(&self) -> Result<()> {
        for (i, g) in self.gates.iter().enumerate() {
            if g.qubits.iter().any(|&q| q >= self.n) {
                return Err(Error::InvalidGate(format!(
                    "gate {i} ({}) acts outside {} qubits",
                    g.name, self.n
                )));
            }
            let mut qs = g.qubits.clone();
            qs.sort_unstable();
            qs.dedup();
            if qs.len() != g.qubits.len() {
                return Err(Error::InvalidGate(format!("gate {i} repeats a qubit")));
            }
            g.matrix()?;
        }
        Ok(())
    }

    pub fn is_clifford(&self) -> bool {
        self.gates.iter().all(Gate::is_clifford)
    }

    /// Number of layers when gates are packed greedily in order.
    pub fn depth(&self) -> usize {
        let mut level = vec![0usize; self.n];
        let mut depth = 0;
        for g in &self.gates {
            let l = g.qubits.iter().map(|&q| level[q]).max().unwrap_or(0) + 1;
            for &q in &g.qubits {
                level[q] = l;
            }
            depth = depth.max(l);
        }
        depth
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_gates_are_unitary() {
        for (name, qs, ps) in [
            ("H", vec![0], vec![]),
            ("T", vec![0], vec![]),
            ("RY", vec![0], vec![0.3]),
            ("CNOT", vec![0, 1], vec![]),
            ("SWAP", vec![0, 1], vec![]),
            ("TOFFOLI", vec![0, 1, 2], vec![]),
        ] {
            let m = Gate::with_params(name, &qs, &ps).matrix().unwrap();
            let d = m.nrows();
            let defect = &m.adjoint() * &m - CMat::identity(d, d);
            assert!(defect.iter().all(|v| v.norm() < 1e-14), "{name}");
        }
    }

    #[test]
    fn cnot_flips_target_when_control_set() {
        let m = Gate::new("CNOT", &[0, 1]).matrix().unwrap();
        assert_eq!(m[(3, 2)], ONE);
        assert_eq!(m[(0, 0)], ONE);
    }

    #[test]
    fn unitary_gate_round_trips() {
        let m = Gate::new("H", &[0]).matrix().unwrap();
        let g = Gate::unitary(&[3], &m);
        assert_eq!(g.matrix().unwrap(), m);
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        assert!(Gate::new("CNOT", &[0]).matrix().is_err());
        assert!(Gate::new("FOO", &[0]).matrix().is_err());
    }
}
