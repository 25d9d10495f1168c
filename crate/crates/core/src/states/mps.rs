use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::sampling::SamplableAccess;
use super::{check_support, EvaluatableState};
use crate::error::{Error, Result};
use crate::exactsim::{StateVector, MAX_SIM_QUBITS};
use crate::linalg::{c, embed, CMat, C64, ONE, ZERO};

/// Singular values below this are dropped when canonicalizing.
pub const SVD_CUTOFF: f64 = 1e-12;

/// One qubit site: matrices `A^{(0)}` and `A^{(1)}`, both `D_left × D_right`.
pub type Site = [CMat; 2];

/// Open-boundary matrix product state, normalized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MpsState {
    sites: Vec<Site>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MpsTensorFile {
    /// `[D_left, D_right]`.
    pub shape: [usize; 2],
    /// Row-major `[re, im]` entries of `A^{(0)}` and `A^{(1)}`.
    pub data: [Vec<[f64; 2]>; 2],
}

impl MpsTensorFile {
    pub fn to_site(&self) -> Result<Site> {
        let [dl, dr] = self.shape;
        let build = |entries: &Vec<[f64; 2]>| -> Result<CMat> {
            if entries.len() != dl * dr {
                return Err(Error::Validation(format!(
                    "tensor of shape {dl}x{dr} has {} entries",
                    entries.len()
                )));
            }
            let vals: Vec<C64> = entries.iter().map(|p| c(p[0], p[1])).collect();
            Ok(CMat::from_row_slice(dl, dr, &vals))
        };
        Ok([build(&self.data[0])?, build(&self.data[1])?])
    }

    pub fn from_site(site: &Site) -> Self {
        let flat = |m: &CMat| -> Vec<[f64; 2]> {
            (0..m.nrows())
                .flat_map(|r| (0..m.ncols()).map(move |col| (r, col)))
                .map(|(r, col)| [m[(r, col)].re, m[(r, col)].im])
                .collect()
        };
        MpsTensorFile {
            shape: [site[0].nrows(), site[0].ncols()],
            data: [flat(&site[0]), flat(&site[1])],
        }
    }
}

impl MpsState {
    pub fn new(sites: Vec<Site>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::Validation("MPS needs at least one site".into()));
        }
        for (i, s) in sites.iter().enumerate() {
            if s[0].shape() != s[1].shape() {
                return Err(Error::Validation(format!(
                    "site {i}: physical slices differ in shape"
                )));
            }
            if i > 0 && sites[i - 1][0].ncols() != s[0].nrows() {
                return Err(Error::Validation(format!(
                    "bond mismatch between sites {} and {i}",
                    i - 1
                )));
            }
        }
        if sites[0][0].nrows() != 1 || sites.last().unwrap()[0].ncols() != 1 {
            return Err(Error::Validation(
                "open boundary bonds must have dimension 1; use from_periodic for traces".into(),
            ));
        }
        let mut mps = MpsState { sites };
        let norm2 = mps.raw_norm_sqr();
        if !(norm2 > 1e-300) {
            return Err(Error::Validation("MPS has zero norm".into()));
        }
        let scale = c(1.0 / norm2.sqrt(), 0.0);
        for m in mps.sites[0].iter_mut() {
            *m *= scale;
        }
        Ok(mps)
    }

    /// Converts `Tr(A_1 ⋯ A_n)` with `D × D` site matrices to open boundary
    /// form with bond dimension `D²`.
    pub fn from_periodic(sites: Vec<Site>) -> Result<Self> {
        let n = sites.len();
        if n < 2 {
            return Err(Error::Validation(
                "periodic MPS needs at least two sites".into(),
            ));
        }
        let d = sites[0][0].nrows();
        if sites
            .iter()
            .any(|s| s[0].shape() != (d, d) || s[1].shape() != (d, d))
        {
            return Err(Error::Validation(
                "periodic MPS needs square D×D tensors".into(),
            ));
        }
        let eye = CMat::identity(d, d);
        let open = sites
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let conv = |a: &CMat| -> CMat {
                    if i == 0 {
                        // row vector over (α, β) = A[α, β]
                        CMat::from_fn(1, d * d, |_, j| a[(j / d, j % d)])
                    } else if i == n - 1 {
                        // column vector over (α, γ) = A[γ, α]
                        CMat::from_fn(d * d, 1, |j, _| a[(j % d, j / d)])
                    } else {
                        eye.kronecker(a)
                    }
                };
                [conv(&s[0]), conv(&s[1])]
            })
            .collect();
        MpsState::new(open)
    }

    /// Product state from single-qubit amplitude pairs.
    pub fn product(qubits: &[[C64; 2]]) -> Result<Self> {
        let sites = qubits
            .iter()
            .map(|a| {
                [
                    CMat::from_element(1, 1, a[0]),
                    CMat::from_element(1, 1, a[1]),
                ]
            })
            .collect();
        MpsState::new(sites)
    }

    /// `(|0…0⟩ + |1…1⟩)/√2` with bond dimension 2.
    pub fn ghz(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Validation("GHZ needs at least two qubits".into()));
        }
        let sites = (0..n)
            .map(|i| {
                let pick = |s: usize| -> CMat {
                    if i == 0 {
                        CMat::from_fn(1, 2, |_, j| if j == s { ONE } else { ZERO })
                    } else if i == n - 1 {
                        CMat::from_fn(2, 1, |r, _| if r == s { ONE } else { ZERO })
                    } else {
                        CMat::from_fn(2, 2, |r, col| if r == s && col == s { ONE } else { ZERO })
                    }
                };
                [pick(0), pick(1)]
            })
            .collect();
        MpsState::new(sites)
    }

    /// Gaussian random tensors with bond dimension capped by `d` and by the
    /// Hilbert space dimension on either side.
    pub fn random<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<Self> {
        let bond = |cut: usize| -> usize {
            if cut == 0 || cut == n {
                1
            } else {
                let left = 1usize.checked_shl(cut as u32).unwrap_or(usize::MAX);
                let right = 1usize.checked_shl((n - cut) as u32).unwrap_or(usize::MAX);
                d.min(left).min(right)
            }
        };
        let mut gauss = || c(rng.sample(StandardNormal), rng.sample(StandardNormal));
        let sites = (0..n)
            .map(|i| {
                let (dl, dr) = (bond(i), bond(i + 1));
                [
                    CMat::from_fn(dl, dr, |_, _| gauss()),
                    CMat::from_fn(dl, dr, |_, _| gauss()),
                ]
            })
            .collect();
        MpsState::new(sites)
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites.iter().skip(1).map(|s| s[0].nrows()).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.sites
            .iter()
            .map(|s| s[0].nrows().max(s[0].ncols()))
            .max()
            .unwrap_or(1)
    }

    fn raw_norm_sqr(&self) -> f64 {
        let mut env = CMat::from_element(1, 1, ONE);
        for s in &self.sites {
            env = s[0].adjoint() * &env * &s[0] + s[1].adjoint() * &env * &s[1];
        }
        env[(0, 0)].re
    }

    pub fn amplitude_bits(&self, bits: &[bool]) -> C64 {
        let mut v = CMat::from_element(1, 1, ONE);
        for (s, &b) in self.sites.iter().zip(bits) {
            v = v * &s[b as usize];
        }
        v[(0, 0)]
    }

    /// Left-canonical copy (`Σ_s A^{s†}A^s = I` on every site) with singular
    /// values below `SVD_CUTOFF` truncated.
    pub fn left_canonical(&self) -> Result<Vec<Site>> {
        let n = self.sites.len();
        let mut out = Vec::with_capacity(n);
        let mut carry = CMat::identity(1, 1);
        for (i, s) in self.sites.iter().enumerate() {
            let a0 = &carry * &s[0];
            let a1 = &carry * &s[1];
            let (dl, dr) = a0.shape();
            let mut stacked = CMat::zeros(2 * dl, dr);
            stacked.view_mut((0, 0), (dl, dr)).copy_from(&a0);
            stacked.view_mut((dl, 0), (dl, dr)).copy_from(&a1);
            if i == n - 1 {
                let nrm = stacked.norm();
                stacked /= c(nrm, 0.0);
                out.push([
                    stacked.view((0, 0), (dl, 1)).into_owned(),
                    stacked.view((dl, 0), (dl, 1)).into_owned(),
                ]);
                break;
            }
            let svd = stacked.svd(true, true);
            let u = svd.u.ok_or_else(|| Error::Numerical("SVD failed".into()))?;
            let vt = svd
                .v_t
                .ok_or_else(|| Error::Numerical("SVD failed".into()))?;
            let keep: Vec<usize> = (0..svd.singular_values.len())
                .filter(|&j| svd.singular_values[j] >= SVD_CUTOFF)
                .collect();
            if keep.is_empty() {
                return Err(Error::Numerical(
                    "state vanished during canonicalization".into(),
                ));
            }
            let r = keep.len();
            let mut uk = CMat::zeros(2 * dl, r);
            let mut sv = CMat::zeros(r, dr);
            for (dst, &j) in keep.iter().enumerate() {
                uk.set_column(dst, &u.column(j));
                let sig = svd.singular_values[j];
                for col in 0..dr {
                    sv[(dst, col)] = vt[(j, col)] * sig;
                }
            }
            out.push([
                uk.view((0, 0), (dl, r)).into_owned(),
                uk.view((dl, 0), (dl, r)).into_owned(),
            ]);
            carry = sv;
        }
        Ok(out)
    }

    /// `⟨u|O|u⟩` by contracting a bond-dimension-`χ` operator chain across
    /// the support interval. Returns the value and the number of scalar
    /// multiplications performed.
    pub fn expectation_counted(&self, support: &[usize], op: &CMat) -> Result<(C64, u64)> {
        check_support(self.len(), support)?;
        let mut sorted = support.to_vec();
        sorted.sort_unstable();
        let op = if sorted == support {
            op.clone()
        } else {
            embed(op, support, &sorted)?
        };
        let chain = operator_chain(&op, sorted.len())?;
        let mut count = 0u64;
        // env[(α, a, α')] with α on the bra side
        let mut env = vec![ONE];
        let mut chi = 1usize;
        let mut next_op = 0usize;
        for (site_idx, site) in self.sites.iter().enumerate() {
            let (dl, dr) = site[0].shape();
            let w: Vec<C64>;
            let chi_r;
            if next_op < sorted.len() && sorted[next_op] == site_idx {
                let (cl, cr, data) = &chain[next_op];
                debug_assert_eq!(*cl, chi);
                chi_r = *cr;
                w = data.clone();
                next_op += 1;
            } else {
                chi_r = chi;
                let mut id = vec![ZERO; chi * chi * 4];
                for a in 0..chi {
                    for s in 0..2 {
                        id[((a * chi + a) * 2 + s) * 2 + s] = ONE;
                    }
                }
                w = id;
            }
            // F[α, a, s', β'] = Σ_α' env[α, a, α'] A^{s'}[α', β']
            let mut f = vec![ZERO; dl * chi * 2 * dr];
            for al in 0..dl {
                for a in 0..chi {
                    for sp in 0..2 {
                        for bp in 0..dr {
                            let mut acc = ZERO;
                            for alp in 0..dl {
                                acc += env[(al * chi + a) * dl + alp] * site[sp][(alp, bp)];
                            }
                            f[((al * chi + a) * 2 + sp) * dr + bp] = acc;
                        }
                    }
                }
            }
            count += (dl * chi * 2 * dr * dl) as u64;
            // G[α, b, s, β'] = Σ_{a, s'} F[α, a, s', β'] W[a, b, s, s']
            let mut g = vec![ZERO; dl * chi_r * 2 * dr];
            for al in 0..dl {
                for b in 0..chi_r {
                    for s in 0..2 {
                        for bp in 0..dr {
                            let mut acc = ZERO;
                            for a in 0..chi {
                                for sp in 0..2 {
                                    acc += f[((al * chi + a) * 2 + sp) * dr + bp]
                                        * w[((a * chi_r + b) * 2 + s) * 2 + sp];
                                }
                            }
                            g[((al * chi_r + b) * 2 + s) * dr + bp] = acc;
                        }
                    }
                }
            }
            count += (dl * chi_r * 2 * dr * chi * 2) as u64;
            // env'[β, b, β'] = Σ_{α, s} conj(A^s[α, β]) G[α, b, s, β']
            let mut next = vec![ZERO; dr * chi_r * dr];
            for be in 0..dr {
                for b in 0..chi_r {
                    for bp in 0..dr {
                        let mut acc = ZERO;
                        for al in 0..dl {
                            for s in 0..2 {
                                acc += site[s][(al, be)].conj()
                                    * g[((al * chi_r + b) * 2 + s) * dr + bp];
                            }
                        }
                        next[(be * chi_r + b) * dr + bp] = acc;
                    }
                }
            }
            count += (dr * chi_r * dr * dl * 2) as u64;
            env = next;
            chi = chi_r;
        }
        Ok((env[0], count))
    }

    /// Upper bound `n(2D³p^{k+1} + D²p^{2k+2})` on the multiplications of
    /// `expectation_counted` for a `k`-local operator, with `p = 2`.
    pub fn multiplication_bound(n: usize, bond: usize, k: usize) -> u64 {
        let p = 2u64;
        let d = bond as u64;
        n as u64 * (2 * d.pow(3) * p.pow(k as u32 + 1) + d.pow(2) * p.pow(2 * k as u32 + 2))
    }
}

/// Splits an operator on `k` sites into a chain of tensors
/// `W[a, b, s, s']` (stored flat with their bond dimensions).
fn operator_chain(op: &CMat, k: usize) -> Result<Vec<(usize, usize, Vec<C64>)>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    // site-major vector over pair indices p_j = 2 s_j + s'_j
    let total = 1usize << (2 * k);
    let mut v = vec![ZERO; total];
    for r in 0..1usize << k {
        for col in 0..1usize << k {
            let mut idx = 0usize;
            for j in 0..k {
                let s = (r >> (k - 1 - j)) & 1;
                let sp = (col >> (k - 1 - j)) & 1;
                idx = idx * 4 + 2 * s + sp;
            }
            v[idx] = op[(r, col)];
        }
    }
    let mut chain = Vec::with_capacity(k);
    let mut chi = 1usize;
    let mut rest = v;
    for j in 0..k {
        let cols = 1usize << (2 * (k - 1 - j));
        let m = CMat::from_row_slice(chi * 4, cols, &rest);
        if j == k - 1 {
            let data = (0..chi * 4).map(|row| m[(row, 0)]).collect::<Vec<_>>();
            chain.push((chi, 1, reorder_w(&data, chi, 1)));
            break;
        }
        let svd = m.svd(true, true);
        let u = svd.u.ok_or_else(|| Error::Numerical("SVD failed".into()))?;
        let vt = svd
            .v_t
            .ok_or_else(|| Error::Numerical("SVD failed".into()))?;
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > 1e-14 * smax.max(1e-300))
            .collect();
        let keep = if keep.is_empty() { vec![0] } else { keep };
        let chi_r = keep.len();
        let mut data = vec![ZERO; chi * 4 * chi_r];
        for row in 0..chi * 4 {
            for (b, &i) in keep.iter().enumerate() {
                data[row * chi_r + b] = u[(row, i)];
            }
        }
        chain.push((chi, chi_r, reorder_w(&data, chi, chi_r)));
        let mut next = vec![ZERO; chi_r * cols];
        for (b, &i) in keep.iter().enumerate() {
            for col in 0..cols {
                next[b * cols + col] = vt[(i, col)] * svd.singular_values[i];
            }
        }
        rest = next;
        chi = chi_r;
    }
    Ok(chain)
}

/// `[(a, s, s'), b]` row-major to `[a, b, s, s']`.
fn reorder_w(data: &[C64], chi_l: usize, chi_r: usize) -> Vec<C64> {
    let mut w = vec![ZERO; chi_l * chi_r * 4];
    for a in 0..chi_l {
        for p in 0..4 {
            for b in 0..chi_r {
                w[(a * chi_r + b) * 4 + p] = data[(a * 4 + p) * chi_r + b];
            }
        }
    }
    w
}

impl EvaluatableState for MpsState {
    fn num_qubits(&self) -> usize {
        self.sites.len()
    }

    fn description(&self) -> String {
        format!(
            "MPS on {} qubits with bond dimension {}",
            self.len(),
            self.max_bond()
        )
    }

    fn local_expectation(&self, support: &[usize], op: &CMat) -> Result<C64> {
        Ok(self.expectation_counted(support, op)?.0)
    }

    fn reduced_density_matrix(&self, support: &[usize]) -> Result<CMat> {
        check_support(self.len(), support)?;
        let mut sorted = support.to_vec();
        sorted.sort_unstable();
        // env is (2^j D) × (2^j D) with index (o, α); α on the ket side
        let mut env = CMat::from_element(1, 1, ONE);
        let mut open = 1usize;
        for (i, site) in self.sites.iter().enumerate() {
            let (dl, dr) = site[0].shape();
            let traced = sorted.binary_search(&i).is_err();
            let new_open = if traced { open } else { open * 2 };
            let mut next = CMat::zeros(new_open * dr, new_open * dr);
            for o in 0..open {
                for op_ in 0..open {
                    let block = env.view((o * dl, op_ * dl), (dl, dl));
                    if traced {
                        let nb = site[0].transpose() * block * site[0].conjugate()
                            + site[1].transpose() * block * site[1].conjugate();
                        next.view_mut((o * dr, op_ * dr), (dr, dr)).copy_from(&nb);
                    } else {
                        for s in 0..2 {
                            for sp in 0..2 {
                                let nb = site[s].transpose() * block * site[sp].conjugate();
                                next.view_mut(((o * 2 + s) * dr, (op_ * 2 + sp) * dr), (dr, dr))
                                    .copy_from(&nb);
                            }
                        }
                    }
                }
            }
            env = next;
            open = new_open;
        }
        if sorted == support {
            Ok(env)
        } else {
            embed(&env, &sorted, support)
        }
    }

    fn to_statevector(&self) -> Result<StateVector> {
        if self.len() > MAX_SIM_QUBITS {
            return Err(Error::Size(format!(
                "statevector limited to {MAX_SIM_QUBITS} qubits"
            )));
        }
        let mut v = CMat::from_element(1, 1, ONE);
        for site in &self.sites {
            let dr = site[0].ncols();
            let rows = v.nrows();
            let mut next = CMat::zeros(rows * 2, dr);
            for r in 0..rows {
                let row = v.row(r);
                for s in 0..2 {
                    let prod = row * &site[s];
                    next.set_row(r * 2 + s, &prod);
                }
            }
            v = next;
        }
        StateVector::from_amplitudes(v.column(0).iter().copied().collect())
    }
}

/// Right environments `R_j = Σ_s A^s R_{j+1} A^{s†}` with `R_n = [1]`.
fn right_environments(mps: &MpsState) -> Vec<CMat> {
    let n = mps.len();
    let mut envs = vec![CMat::from_element(1, 1, ONE); n + 1];
    for j in (0..n).rev() {
        let s = &mps.sites[j];
        envs[j] = &s[0] * &envs[j + 1] * s[0].adjoint() + &s[1] * &envs[j + 1] * s[1].adjoint();
    }
    envs
}

/// Exact sample from `|⟨x|u⟩|²`, drawn one qubit at a time from the
/// conditional marginals.
pub fn mps_sample<R: Rng + ?Sized>(mps: &MpsState, rng: &mut R) -> Vec<bool> {
    let envs = right_environments(mps);
    mps_sample_with(mps, &envs, rng)
}

fn mps_sample_with<R: Rng + ?Sized>(mps: &MpsState, envs: &[CMat], rng: &mut R) -> Vec<bool> {
    let mut left = CMat::from_element(1, 1, ONE);
    let mut bits = Vec::with_capacity(mps.len());
    for (j, site) in mps.sites.iter().enumerate() {
        let v0 = &left * &site[0];
        let v1 = &left * &site[1];
        let p0 = (&v0 * &envs[j + 1] * v0.adjoint())[(0, 0)].re.max(0.0);
        let p1 = (&v1 * &envs[j + 1] * v1.adjoint())[(0, 0)].re.max(0.0);
        let one = rng.gen::<f64>() * (p0 + p1) >= p0;
        let (v, p) = if one { (v1, p1) } else { (v0, p0) };
        left = v / c(p.sqrt(), 0.0);
        bits.push(one);
    }
    bits
}

impl SamplableAccess for MpsState {
    fn num_qubits(&self) -> usize {
        self.len()
    }

    fn amplitude(&self, index: u128) -> Result<C64> {
        let n = self.len();
        let bits: Vec<bool> = (0..n).map(|q| (index >> (n - 1 - q)) & 1 == 1).collect();
        Ok(self.amplitude_bits(&bits))
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u128> {
        Ok(mps_sample(self, rng)
            .iter()
            .fold(0u128, |acc, &b| (acc << 1) | b as u128))
    }
}
