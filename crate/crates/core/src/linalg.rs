//! Small dense linear-algebra helpers on complex matrices.
//!
//! Qubit `0` is the most significant bit of a basis index, so the leftmost
//! tensor factor in `A ⊗ B` acts on the lowest-numbered qubit.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(dim: usize) -> CMat {
    CMat::identity(dim, dim)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn pauli(label: char) -> Result<CMat> {
    let m = match label.to_ascii_uppercase() {
        'I' => [ONE, ZERO, ZERO, ONE],
        'X' => [ZERO, ONE, ONE, ZERO],
        'Y' => [ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO],
        'Z' => [ONE, ZERO, ZERO, -ONE],
        other => return Err(Error::Parse(format!("unknown Pauli label '{other}'"))),
    };
    Ok(CMat::from_row_slice(2, 2, &m))
}

/// Tensor product of single-qubit Paulis, e.g. `"XZ"`.
pub fn pauli_string(labels: &str) -> Result<CMat> {
    let mut out = identity(1);
    for ch in labels.chars() {
        out = kron(&out, &pauli(ch)?);
    }
    Ok(out)
}

/// `|bits⟩⟨bits|` on `bits.len()` qubits.
pub fn basis_projector(bits: &[bool]) -> CMat {
    let dim = 1usize << bits.len();
    let idx = bits_to_index(bits);
    let mut m = CMat::zeros(dim, dim);
    m[(idx, idx)] = ONE;
    m
}

pub fn bits_to_index(bits: &[bool]) -> usize {
    bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)
}

pub fn index_to_bits(idx: usize, width: usize) -> Vec<bool> {
    (0..width)
        .map(|i| (idx >> (width - 1 - i)) & 1 == 1)
        .collect()
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let d = m.nrows();
    for i in 0..d {
        for j in i..d {
            if (m[(i, j)] - m[(j, i)].conj()).norm() > tol {
                return false;
            }
        }
    }
    true
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(m.nrows(), m.ncols());
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Basis-index offsets of every local configuration of `support` inside an
/// `n`-qubit register. Entry `j` is the offset for local index `j`.
pub fn local_offsets(n: usize, support: &[usize]) -> Vec<usize> {
    let k = support.len();
    (0..1usize << k)
        .map(|j| {
            support.iter().enumerate().fold(0usize, |acc, (pos, &q)| {
                if (j >> (k - 1 - pos)) & 1 == 1 {
                    acc | (1 << (n - 1 - q))
                } else {
                    acc
                }
            })
        })
        .collect()
}

pub fn support_mask(n: usize, support: &[usize]) -> usize {
    support
        .iter()
        .fold(0usize, |acc, &q| acc | (1 << (n - 1 - q)))
}

/// `out += scale * (op ⊗ I) * input` for an operator on `support`.
pub fn apply_local_add(
    n: usize,
    support: &[usize],
    op: &CMat,
    scale: C64,
    input: &[C64],
    out: &mut [C64],
) {
    let offsets = local_offsets(n, support);
    let mask = support_mask(n, support);
    let dim = offsets.len();
    let mut gathered = vec![ZERO; dim];
    for base in 0..input.len() {
        if base & mask != 0 {
            continue;
        }
        let mut any = false;
        for (j, &off) in offsets.iter().enumerate() {
            gathered[j] = input[base | off];
            any |= gathered[j] != ZERO;
        }
        if !any {
            continue;
        }
        for (r, &off) in offsets.iter().enumerate() {
            let mut acc = ZERO;
            for (col, g) in gathered.iter().enumerate() {
                acc += op[(r, col)] * g;
            }
            out[base | off] += scale * acc;
        }
    }
}

/// In-place `(op ⊗ I) * state`.
pub fn apply_local_inplace(n: usize, support: &[usize], op: &CMat, state: &mut [C64]) {
    let offsets = local_offsets(n, support);
    let mask = support_mask(n, support);
    let dim = offsets.len();
    let mut gathered = vec![ZERO; dim];
    for base in 0..state.len() {
        if base & mask != 0 {
            continue;
        }
        for (j, &off) in offsets.iter().enumerate() {
            gathered[j] = state[base | off];
        }
        for (r, &off) in offsets.iter().enumerate() {
            let mut acc = ZERO;
            for (col, g) in gathered.iter().enumerate() {
                acc += op[(r, col)] * g;
            }
            state[base | off] = acc;
        }
    }
}

/// Extends an operator on `support` to the ordered qubit list `target`
/// (which must contain `support`), padding with identities.
pub fn embed(op: &CMat, support: &[usize], target: &[usize]) -> Result<CMat> {
    let positions: Vec<usize> = support
        .iter()
        .map(|q| {
            target
                .iter()
                .position(|t| t == q)
                .ok_or_else(|| Error::Validation(format!("qubit {q} not in target support")))
        })
        .collect::<Result<_>>()?;
    let m = target.len();
    let dim = 1usize << m;
    let k = support.len();
    let local = |idx: usize| -> usize {
        positions
            .iter()
            .fold(0usize, |acc, &p| (acc << 1) | ((idx >> (m - 1 - p)) & 1))
    };
    let mask = positions
        .iter()
        .fold(0usize, |acc, &p| acc | (1 << (m - 1 - p)));
    let mut out = CMat::zeros(dim, dim);
    for r in 0..dim {
        for col in 0..dim {
            if r & !mask != col & !mask {
                continue;
            }
            let v = op[(local(r), local(col))];
            if v != ZERO {
                out[(r, col)] = v;
            }
        }
    }
    debug_assert_eq!(op.nrows(), 1 << k);
    Ok(out)
}

/// Sorted union of supports.
pub fn union_support<'a, I: IntoIterator<Item = &'a [usize]>>(supports: I) -> Vec<usize> {
    let mut all: Vec<usize> = supports.into_iter().flatten().copied().collect();
    all.sort_unstable();
    all.dedup();
    all
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Pairwise tree sum; the grouping only depends on the slice length.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        len => {
            let mid = len / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}
