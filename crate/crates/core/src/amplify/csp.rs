//! Constraint satisfaction instances as diagonal Hamiltonians, and the
//! 3-clause to 2-clause gap gadget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{DiagonalHamiltonian, DiagonalTerm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub var: usize,
    pub negated: bool,
}

impl Literal {
    pub fn pos(var: usize) -> Self {
        Literal {
            var,
            negated: false,
        }
    }

    pub fn neg(var: usize) -> Self {
        Literal { var, negated: true }
    }

    pub fn eval(&self, bits: &[bool]) -> bool {
        bits[self.var] != self.negated
    }

    fn dimacs(&self) -> i64 {
        let v = self.var as i64 + 1;
        if self.negated {
            -v
        } else {
            v
        }
    }
}

/// Disjunction of literals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clause(pub Vec<Literal>);

impl Clause {
    pub fn eval(&self, bits: &[bool]) -> bool {
        self.0.iter().any(|l| l.eval(bits))
    }

    /// Sorted distinct variables.
    pub fn variables(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.0.iter().map(|l| l.var).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnfFormula {
    pub num_vars: usize,
    pub clauses: Vec<Clause>,
}

impl CnfFormula {
    pub fn new(num_vars: usize, clauses: Vec<Clause>) -> Result<Self> {
        for cl in &clauses {
            if cl.0.is_empty() {
                return Err(Error::Validation("empty clause".into()));
            }
            if let Some(l) = cl.0.iter().find(|l| l.var >= num_vars) {
                return Err(Error::Validation(format!(
                    "literal on variable {} but only {num_vars} variables",
                    l.var + 1
                )));
            }
        }
        Ok(CnfFormula { num_vars, clauses })
    }

    /// Parses DIMACS CNF: `c` comment lines, a `p cnf <vars> <clauses>`
    /// header, and zero-terminated clauses of signed 1-based literals.
    pub fn parse_dimacs(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut clauses = Vec::new();
        let mut current = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if line.starts_with('p') {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 4 || parts[1] != "cnf" {
                    return Err(Error::Parse(format!(
                        "line {}: bad header '{line}'",
                        lineno + 1
                    )));
                }
                let parse = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
                };
                header = Some((parse(parts[2])?, parse(parts[3])?));
                continue;
            }
            for tok in line.split_whitespace() {
                let v: i64 = tok
                    .parse()
                    .map_err(|e| Error::Parse(format!("line {}: '{tok}': {e}", lineno + 1)))?;
                if v == 0 {
                    if !current.is_empty() {
                        clauses.push(Clause(std::mem::take(&mut current)));
                    }
                } else {
                    let var = v.unsigned_abs() as usize - 1;
                    current.push(Literal {
                        var,
                        negated: v < 0,
                    });
                }
            }
        }
        if !current.is_empty() {
            clauses.push(Clause(current));
        }
        let (num_vars, declared) =
            header.ok_or_else(|| Error::Parse("missing 'p cnf' header".into()))?;
        if declared != clauses.len() {
            return Err(Error::Parse(format!(
                "header declares {declared} clauses, found {}",
                clauses.len()
            )));
        }
        CnfFormula::new(num_vars, clauses)
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for cl in &self.clauses {
            for l in &cl.0 {
                out.push_str(&l.dimacs().to_string());
                out.push(' ');
            }
            out.push_str("0\n");
        }
        out
    }

    pub fn satisfied_count(&self, bits: &[bool]) -> usize {
        self.clauses.iter().filter(|c| c.eval(bits)).count()
    }

    pub fn max_clause_width(&self) -> usize {
        self.clauses.iter().map(|c| c.0.len()).max().unwrap_or(0)
    }
}

/// Replaces one 3-literal clause by 2-literal clauses over the clause's
/// three literals (slots 0, 1, 2) and auxiliary variables (3, 4, ...).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapGadget {
    pub aux_vars: usize,
    pub clauses: Vec<Clause>,
}

impl GapGadget {
    /// Ten clauses with one auxiliary `d`: `a, b, c, d, ¬a∨¬b, ¬a∨¬c,
    /// ¬b∨¬c, a∨¬d, b∨¬d, c∨¬d`.
    pub fn ten_clause() -> Self {
        let (a, b, c, d) = (0, 1, 2, 3);
        let p = Literal::pos;
        let n = Literal::neg;
        GapGadget {
            aux_vars: 1,
            clauses: vec![
                Clause(vec![p(a)]),
                Clause(vec![p(b)]),
                Clause(vec![p(c)]),
                Clause(vec![p(d)]),
                Clause(vec![n(a), n(b)]),
                Clause(vec![n(a), n(c)]),
                Clause(vec![n(b), n(c)]),
                Clause(vec![p(a), n(d)]),
                Clause(vec![p(b), n(d)]),
                Clause(vec![p(c), n(d)]),
            ],
        }
    }

    fn num_vars(&self) -> usize {
        3 + self.aux_vars
    }

    /// Most gadget clauses satisfiable for fixed slot values.
    pub fn max_satisfied(&self, slots: [bool; 3]) -> usize {
        let mut bits = vec![false; self.num_vars()];
        bits[..3].copy_from_slice(&slots);
        (0..1usize << self.aux_vars)
            .map(|aux| {
                for j in 0..self.aux_vars {
                    bits[3 + j] = (aux >> j) & 1 == 1;
                }
                self.clauses.iter().filter(|c| c.eval(&bits)).count()
            })
            .max()
            .unwrap_or(0)
    }
}

/// Exhaustive check: slot assignments satisfying `s0 ∨ s1 ∨ s2` reach
/// exactly 7 satisfied gadget clauses, the others at most 6.
pub fn validate_gap_gadget(gadget: &GapGadget) -> bool {
    if gadget.aux_vars > 20
        || gadget.clauses.iter().any(|c| {
            c.0.is_empty() || c.0.len() > 2 || c.0.iter().any(|l| l.var >= gadget.num_vars())
        })
    {
        return false;
    }
    (0..8usize).all(|x| {
        let slots = [x & 4 != 0, x & 2 != 0, x & 1 != 0];
        let best = gadget.max_satisfied(slots);
        if slots.iter().any(|&s| s) {
            best == 7
        } else {
            best <= 6
        }
    })
}

/// Maps each 3-literal clause through the gadget, with fresh auxiliary
/// variables appended after the formula's own.
pub fn apply_gap_gadget(formula: &CnfFormula, gadget: &GapGadget) -> Result<CnfFormula> {
    if !validate_gap_gadget(gadget) {
        return Err(Error::Validation("gap gadget fails validation".into()));
    }
    let mut num_vars = formula.num_vars;
    let mut clauses = Vec::with_capacity(formula.clauses.len() * gadget.clauses.len());
    for cl in &formula.clauses {
        if cl.0.len() != 3 {
            return Err(Error::Validation(format!(
                "gadget input needs 3-literal clauses, got {}",
                cl.0.len()
            )));
        }
        let base = num_vars;
        num_vars += gadget.aux_vars;
        for g in &gadget.clauses {
            clauses.push(Clause(
                g.0.iter()
                    .map(|l| {
                        if l.var < 3 {
                            let slot = cl.0[l.var];
                            Literal {
                                var: slot.var,
                                negated: slot.negated != l.negated,
                            }
                        } else {
                            Literal {
                                var: base + l.var - 3,
                                negated: l.negated,
                            }
                        }
                    })
                    .collect(),
            ));
        }
    }
    CnfFormula::new(num_vars, clauses)
}

/// `H' = Σ_i sat_i / m_total` and `H = I - H'`, with the optional
/// thresholds `a = 3/10`, `b = (4 - γ)/10`.
#[derive(Debug, Clone, PartialEq)]
pub struct CspHamiltonian {
    pub satisfied: DiagonalHamiltonian,
    pub hamiltonian: DiagonalHamiltonian,
    pub thresholds: Option<(f64, f64)>,
}

fn clause_values(clause: &Clause, support: &[usize], satisfied: bool) -> Vec<f64> {
    let k = support.len();
    let mut bits = vec![false; support.iter().max().map_or(0, |m| m + 1)];
    (0..1usize << k)
        .map(|x| {
            for (pos, &q) in support.iter().enumerate() {
                bits[q] = (x >> (k - 1 - pos)) & 1 == 1;
            }
            if clause.eval(&bits) == satisfied {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

pub fn csp_to_diagonal(
    formula: &CnfFormula,
    m_total: usize,
    gamma: Option<f64>,
) -> Result<CspHamiltonian> {
    if formula.num_vars == 0 {
        return Err(Error::Validation("formula has no variables".into()));
    }
    if m_total < formula.clauses.len() || m_total == 0 {
        return Err(Error::Validation(format!(
            "normalization {m_total} is below the clause count {}",
            formula.clauses.len()
        )));
    }
    if let Some(g) = gamma {
        if !(0.0..1.0).contains(&g) {
            return Err(Error::Validation(format!("gamma {g} must be in [0, 1)")));
        }
    }
    let w = 1.0 / m_total as f64;
    let build = |satisfied: bool| {
        formula
            .clauses
            .iter()
            .map(|cl| {
                let support = cl.variables();
                DiagonalTerm {
                    values: clause_values(cl, &support, satisfied),
                    support,
                    weight: w,
                }
            })
            .collect::<Vec<_>>()
    };
    let mut inverted = build(false);
    let slack = 1.0 - formula.clauses.len() as f64 * w;
    if slack > 0.0 {
        inverted.push(DiagonalTerm {
            support: vec![0],
            values: vec![1.0, 1.0],
            weight: slack,
        });
    }
    Ok(CspHamiltonian {
        satisfied: DiagonalHamiltonian {
            n: formula.num_vars,
            terms: build(true),
        },
        hamiltonian: DiagonalHamiltonian {
            n: formula.num_vars,
            terms: inverted,
        },
        thresholds: gamma.map(|g| (0.3, (4.0 - g) / 10.0)),
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random_2sat(n: usize, m: usize, rng: &mut ChaCha8Rng) -> CnfFormula {
        let clauses = (0..m)
            .map(|_| {
                let width = rng.gen_range(1..=2);
                Clause(
                    (0..width)
                        .map(|_| Literal {
                            var: rng.gen_range(0..n),
                            negated: rng.gen(),
                        })
                        .collect(),
                )
            })
            .collect();
        CnfFormula::new(n, clauses).unwrap()
    }

    fn bits_of(x: usize, n: usize) -> Vec<bool> {
        (0..n).map(|q| (x >> (n - 1 - q)) & 1 == 1).collect()
    }

    #[test]
    fn single_clause_truth_table() {
        let f = CnfFormula::new(2, vec![Clause(vec![Literal::pos(0), Literal::pos(1)])]).unwrap();
        let r = csp_to_diagonal(&f, 1, None).unwrap();
        assert_eq!(r.satisfied.energy(&[true, true]), 1.0);
        assert_eq!(r.satisfied.energy(&[false, false]), 0.0);
        assert_eq!(r.hamiltonian.energy(&[false, false]), 1.0);
    }

    #[test]
    fn dimacs_round_trip() {
        let text = "c demo\np cnf 3 2\n1 -2 0\n-3 0\n";
        let f = CnfFormula::parse_dimacs(text).unwrap();
        assert_eq!(f.clauses[0].0, vec![Literal::pos(0), Literal::neg(1)]);
        assert_eq!(CnfFormula::parse_dimacs(&f.to_dimacs()).unwrap(), f);
        assert!(CnfFormula::parse_dimacs("p cnf 2 2\n1 0\n").is_err());
        assert!(CnfFormula::parse_dimacs("1 2 0\n").is_err());
    }

    #[test]
    fn ten_clause_gadget_validates() {
        let g = GapGadget::ten_clause();
        assert!(validate_gap_gadget(&g));
        assert_eq!(g.max_satisfied([true, false, false]), 7);
        assert!(g.max_satisfied([false, false, false]) <= 6);
    }

    #[test]
    fn broken_gadget_fails() {
        let mut g = GapGadget::ten_clause();
        g.clauses.remove(4);
        assert!(!validate_gap_gadget(&g));
    }

    #[test]
    fn gadget_application_counts() {
        let f = CnfFormula::new(
            4,
            vec![
                Clause(vec![Literal::pos(0), Literal::neg(1), Literal::pos(2)]),
                Clause(vec![Literal::neg(0), Literal::pos(2), Literal::pos(3)]),
            ],
        )
        .unwrap();
        let g = apply_gap_gadget(&f, &GapGadget::ten_clause()).unwrap();
        assert_eq!(g.num_vars, 6);
        assert_eq!(g.clauses.len(), 20);
        assert!(g.max_clause_width() <= 2);
        // max over auxiliaries: 7 per satisfied clause, ≤ 6 otherwise
        for x in 0..16 {
            let bits = bits_of(x, 4);
            let best = (0..4)
                .map(|aux| {
                    let mut all = bits.clone();
                    all.extend(bits_of(aux, 2));
                    g.satisfied_count(&all)
                })
                .max()
                .unwrap();
            let sat = f.satisfied_count(&bits);
            assert!(best <= 7 * sat + 6 * (2 - sat));
            assert!(best >= 7 * sat);
        }
    }

    #[test]
    fn thresholds_from_gamma() {
        let f = CnfFormula::new(1, vec![Clause(vec![Literal::pos(0)])]).unwrap();
        let r = csp_to_diagonal(&f, 10, Some(0.5)).unwrap();
        assert_eq!(r.thresholds, Some((0.3, 0.35)));
        assert!(csp_to_diagonal(&f, 0, None).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn minimum_energy_is_one_minus_best_fraction(seed in 0u64..10_000, n in 2usize..=8, m in 1usize..=12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_2sat(n, m, &mut rng);
            let r = csp_to_diagonal(&f, m, None).unwrap();
            let energies = r.hamiltonian.all_energies().unwrap();
            let min_e = energies.iter().copied().fold(f64::INFINITY, f64::min);
            let best = (0..1usize << n).map(|x| f.satisfied_count(&bits_of(x, n))).max().unwrap();
            prop_assert!((min_e - (1.0 - best as f64 / m as f64)).abs() < 1e-12);
            let local = r.hamiltonian.to_local().unwrap();
            prop_assert!(local.triangle_norm_bound() <= 1.0 + 1e-12);
        }
    }
}
