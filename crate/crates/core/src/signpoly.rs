//! Odd polynomial approximations of `sgn(x)` on `[-2, 2]` and the derived
//! spectral filter `Q_α(x) = (1 - P(x - α)) / 2`.
//!
//! The polynomial is a truncated Chebyshev series of `erf(κx)` (in the
//! variable `x/2`). For every steepness `κ` on a fixed ladder the smallest
//! odd degree that passes grid certification is found; the overall smallest
//! degree wins. Because the ladder does not depend on the target error, the
//! chosen degree is monotone in it.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use statrs::function::erf::{erf, erfc, erfc_inv};

use crate::error::{Error, Result};
use crate::linalg::compensated_sum;

pub const DEFAULT_MAX_DEGREE: usize = 200;
pub const DEFAULT_GRID: usize = 100_000;
pub const DEFAULT_MARGIN: f64 = 1e-8;
/// Recorded constant `C` in `d ≤ C·ln(1/ε)/δ` for every built polynomial.
pub const DEGREE_CONSTANT_BOUND: f64 = 10.0;
/// Reconstruction tolerance for floating-point monomial coefficients.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;
/// Nodes used to compute Chebyshev coefficients.
const CHEB_NODES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignPolyOptions {
    pub max_degree: usize,
    pub grid_points: usize,
    pub margin: f64,
}

impl Default for SignPolyOptions {
    fn default() -> Self {
        SignPolyOptions {
            max_degree: DEFAULT_MAX_DEGREE,
            grid_points: DEFAULT_GRID,
            margin: DEFAULT_MARGIN,
        }
    }
}

/// Certified odd polynomial with `|P| ≤ 1` on `[-2, 2]` and
/// `|P(x) - sgn(x)| ≤ ε` for `δ ≤ |x| ≤ 2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignPolynomial {
    pub delta: f64,
    pub epsilon: f64,
    pub kappa: f64,
    pub degree: usize,
    /// Coefficients of `T_k(x/2)`, `k = 0..=degree`; even entries are zero.
    pub chebyshev: Vec<f64>,
    /// Largest `|P(x) - sgn(x)|` over grid points with `|x| ≥ δ`.
    pub certified_error: f64,
    /// Largest `|P(x)|` over the grid.
    pub certified_max_abs: f64,
    pub grid_points: usize,
    /// `degree · δ / ln(1/ε)`.
    pub degree_constant: f64,
}

/// Chebyshev coefficients of `erf(2κy)` on `[-1, 1]`, `k = 0..=max_k`.
fn erf_chebyshev(kappa: f64, max_k: usize) -> Vec<f64> {
    let n = CHEB_NODES;
    let nodes: Vec<f64> = (0..n)
        .map(|j| (std::f64::consts::PI * (j as f64 + 0.5) / n as f64).cos())
        .collect();
    let values: Vec<f64> = nodes.iter().map(|y| erf(2.0 * kappa * y)).collect();
    let mut t_prev = vec![1.0; n];
    let mut t_cur = nodes.clone();
    let mut out = vec![0.0; max_k + 1];
    for k in 1..=max_k {
        if k > 1 {
            for j in 0..n {
                let next = 2.0 * nodes[j] * t_cur[j] - t_prev[j];
                t_prev[j] = t_cur[j];
                t_cur[j] = next;
            }
        }
        if k % 2 == 1 {
            let s: f64 = values.iter().zip(&t_cur).map(|(v, t)| v * t).sum();
            out[k] = 2.0 * s / n as f64;
        }
    }
    out
}

/// Clenshaw evaluation of `Σ c_k T_k(y)`.
pub fn chebyshev_eval(coeffs: &[f64], y: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &ck in coeffs.iter().skip(1).rev() {
        let b0 = 2.0 * y * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    y * b1 - b2 + coeffs.first().copied().unwrap_or(0.0)
}

/// `Σ c_k T_k(y)` with the terms accumulated by Neumaier summation.
pub fn chebyshev_eval_compensated(coeffs: &[f64], y: f64) -> f64 {
    let mut t_prev = 1.0;
    let mut t_cur = y;
    let terms = coeffs.iter().enumerate().map(|(k, &ck)| {
        let tk = match k {
            0 => 1.0,
            1 => y,
            _ => {
                let next = 2.0 * y * t_cur - t_prev;
                t_prev = t_cur;
                t_cur = next;
                next
            }
        };
        ck * tk
    });
    compensated_sum(terms)
}

fn certification_grid(delta: f64, points: usize) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..points)
        .map(|i| -2.0 + 4.0 * i as f64 / (points - 1) as f64)
        .collect();
    let cheb = 4 * DEFAULT_MAX_DEGREE;
    grid.extend((0..=cheb).map(|j| 2.0 * (std::f64::consts::PI * j as f64 / cheb as f64).cos()));
    grid.push(delta);
    grid.push(-delta);
    grid
}

/// Steepness ladder; independent of the target error.
fn kappa_ladder(delta: f64) -> Vec<f64> {
    (1..=52)
        .map(|j| erfc_inv(10f64.powf(-0.25 * j as f64)) / delta)
        .collect()
}

struct Candidate {
    kappa: f64,
    degree: usize,
    coeffs: Vec<f64>,
    error: f64,
    max_abs: f64,
}

/// Certification of the degree-`d` truncation on `grid`: the polynomial is
/// scaled so `max |P| ≤ 1 - margin`; returns `(error, max_abs, scale)`.
fn certify(coeffs: &[f64], delta: f64, grid: &[f64], margin: f64) -> (f64, f64, f64) {
    let values: Vec<f64> = grid
        .iter()
        .map(|x| chebyshev_eval(coeffs, x / 2.0))
        .collect();
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if max_abs > 1.0 - margin {
        (1.0 - margin) / max_abs
    } else {
        1.0
    };
    let error = grid
        .iter()
        .zip(&values)
        .filter(|(x, _)| x.abs() >= delta)
        .map(|(x, v)| (scale * v - x.signum()).abs())
        .fold(0.0f64, f64::max);
    (error, max_abs * scale, scale)
}

/// Smallest odd degree `≤ limit` for which the series of `erf(κx)` passes.
///
/// Degrees are screened on a subset of the grid first. The screen uses a
/// lower bound on the error valid for every admissible scale, so a rejection
/// there is a rejection on the full grid.
fn search_kappa(
    kappa: f64,
    delta: f64,
    eps: f64,
    grid: &[f64],
    limit: usize,
    margin: f64,
) -> Option<Candidate> {
    let coeffs = erf_chebyshev(kappa, limit);
    let coarse: Vec<f64> = grid.iter().step_by(16).copied().collect();
    let ys: Vec<f64> = coarse.iter().map(|x| x / 2.0).collect();
    let mut t_prev: Vec<f64> = vec![1.0; ys.len()];
    let mut t_cur: Vec<f64> = ys.clone();
    let mut sum: Vec<f64> = ys.iter().map(|y| coeffs[1] * y).collect();
    let mut degree = 1;
    loop {
        let max_abs = sum.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // full-grid scale can only be smaller than this one
        let scale_cap = if max_abs > 1.0 - margin {
            (1.0 - margin) / max_abs
        } else {
            1.0
        };
        let lower = coarse
            .iter()
            .zip(&sum)
            .filter(|(x, _)| x.abs() >= delta)
            .map(|(x, v)| {
                let aligned = v * x.signum();
                if aligned * scale_cap >= 1.0 {
                    0.0
                } else {
                    (1.0 - aligned * scale_cap).max(0.0)
                }
            })
            .fold(0.0f64, f64::max);
        if lower <= eps - margin {
            let (error, max_abs, scale) = certify(&coeffs[..=degree], delta, grid, margin);
            if error <= eps - margin {
                let c: Vec<f64> = coeffs[..=degree].iter().map(|v| v * scale).collect();
                return Some(Candidate {
                    kappa,
                    degree,
                    coeffs: c,
                    error,
                    max_abs,
                });
            }
        }
        if degree + 2 > limit {
            return None;
        }
        for i in 0..ys.len() {
            let y = ys[i];
            let t_even = 2.0 * y * t_cur[i] - t_prev[i];
            let t_odd = 2.0 * y * t_even - t_cur[i];
            t_prev[i] = t_even;
            t_cur[i] = t_odd;
            sum[i] += coeffs[degree + 2] * t_odd;
        }
        degree += 2;
    }
}

pub fn build_sign_poly(delta: f64, eps: f64) -> Result<SignPolynomial> {
    build_sign_poly_with(delta, eps, SignPolyOptions::default())
}

pub fn build_sign_poly_with(delta: f64, eps: f64, opts: SignPolyOptions) -> Result<SignPolynomial> {
    if !(delta > 0.0 && delta < 2.0) {
        return Err(Error::Domain(format!("delta {delta} must lie in (0, 2)")));
    }
    if !(eps > opts.margin && eps < 0.5) {
        return Err(Error::Domain(format!(
            "epsilon {eps} must lie in ({}, 1/2)",
            opts.margin
        )));
    }
    if opts.grid_points < 2 {
        return Err(Error::Domain("grid needs at least two points".into()));
    }
    let grid = certification_grid(delta, opts.grid_points);
    let mut best: Option<Candidate> = None;
    for kappa in kappa_ladder(delta) {
        let limit = best.as_ref().map_or(opts.max_degree, |b| b.degree);
        if limit < 1 {
            break;
        }
        if let Some(c) = search_kappa(kappa, delta, eps, &grid, limit, opts.margin) {
            let better = match &best {
                None => true,
                Some(b) => c.degree < b.degree || (c.degree == b.degree && c.error < b.error),
            };
            if better {
                best = Some(c);
            }
        }
    }
    let best = best.ok_or_else(|| {
        Error::DegreeOverflow(format!(
            "no certified polynomial of degree <= {} for delta = {delta}, eps = {eps}",
            opts.max_degree
        ))
    })?;
    Ok(SignPolynomial {
        delta,
        epsilon: eps,
        kappa: best.kappa,
        degree: best.degree,
        chebyshev: best.coeffs,
        certified_error: best.error,
        certified_max_abs: best.max_abs,
        grid_points: grid.len(),
        degree_constant: best.degree as f64 * delta / (1.0 / eps).ln(),
    })
}

impl SignPolynomial {
    /// `P(x)` for `x ∈ [-2, 2]`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(-2.0..=2.0).contains(&x) {
            return Err(Error::Domain(format!("{x} outside [-2, 2]")));
        }
        Ok(chebyshev_eval(&self.chebyshev, x / 2.0))
    }

    /// Error bound of the underlying `erf` at `|x| = δ`.
    pub fn erf_tail(&self) -> f64 {
        erfc(self.kappa * self.delta)
    }

    /// Exact monomial coefficients of `P(x)` in `x`.
    pub fn monomial_coefficients_exact(&self) -> Vec<BigRational> {
        chebyshev_to_monomial_exact(&self.chebyshev)
    }

    /// Monomial coefficients rounded to `f64`, rejected when Horner
    /// evaluation on the certification grid drifts more than `1e-8`.
    pub fn monomial_coefficients(&self) -> Result<Vec<f64>> {
        let exact = self.monomial_coefficients_exact();
        let rounded: Vec<f64> = exact
            .iter()
            .map(|q| q.to_f64().unwrap_or(f64::NAN))
            .collect();
        let grid = certification_grid(self.delta, DEFAULT_GRID);
        let mut worst = 0.0f64;
        for &x in &grid {
            let h = rounded.iter().rev().fold(0.0, |acc, &c| acc * x + c);
            let want = chebyshev_eval(&self.chebyshev, x / 2.0);
            worst = worst.max((h - want).abs());
        }
        if !(worst <= RECONSTRUCTION_TOL) {
            return Err(Error::Precision(format!(
                "monomial form of degree {} reconstructs with error {worst:e}",
                self.degree
            )));
        }
        Ok(rounded)
    }
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite coefficient")
}

/// Exact expansion of `Σ c_k T_k(x/2)` in powers of `x`.
pub fn chebyshev_to_monomial_exact(coeffs: &[f64]) -> Vec<BigRational> {
    let d = coeffs.len().saturating_sub(1);
    // T_k(y) in powers of y, integer coefficients
    let mut t_prev: Vec<BigInt> = vec![BigInt::one()];
    let mut t_cur: Vec<BigInt> = vec![BigInt::zero(), BigInt::one()];
    let mut out_y: Vec<BigRational> = vec![BigRational::zero(); d + 1];
    for (k, &ck) in coeffs.iter().enumerate() {
        let tk: &Vec<BigInt> = match k {
            0 => &t_prev,
            1 => &t_cur,
            _ => {
                let mut next = vec![BigInt::zero(); k + 1];
                for (j, v) in t_cur.iter().enumerate() {
                    next[j + 1] += v * 2;
                }
                for (j, v) in t_prev.iter().enumerate() {
                    next[j] -= v;
                }
                t_prev = std::mem::replace(&mut t_cur, next);
                &t_cur
            }
        };
        if ck != 0.0 {
            let cr = rational(ck);
            for (j, v) in tk.iter().enumerate() {
                if !v.is_zero() {
                    out_y[j] += &cr * BigRational::from_integer(v.clone());
                }
            }
        }
    }
    // y = x / 2
    out_y
        .into_iter()
        .enumerate()
        .map(|(j, a)| a / BigRational::from_integer(BigInt::one() << j))
        .collect()
}

/// `Q_α(x) = (1 - P(x - α)) / 2`; requires `x - α ∈ [-2, 2]`.
pub fn eval_filter(poly: &SignPolynomial, alpha: f64, x: f64) -> Result<f64> {
    let t = x - alpha;
    if !(-2.0..=2.0).contains(&t) {
        return Err(Error::Domain(format!("x - alpha = {t} outside [-2, 2]")));
    }
    Ok(0.5 * (1.0 - chebyshev_eval_compensated(&poly.chebyshev, t / 2.0)))
}

/// Exact monomial coefficients (in `x`) of `Q_α(x)`.
pub fn filter_coefficients_exact(poly: &SignPolynomial, alpha: f64) -> Vec<BigRational> {
    let p = poly.monomial_coefficients_exact();
    let shifted = shift_polynomial(&p, &rational(alpha));
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    shifted
        .iter()
        .enumerate()
        .map(|(j, a)| {
            let base = if j == 0 {
                BigRational::one()
            } else {
                BigRational::zero()
            };
            (base - a) * &half
        })
        .collect()
}

/// Exact monomial coefficients of `Q_α(x)²`, degree `2d`.
pub fn squared_filter_coefficients_exact(poly: &SignPolynomial, alpha: f64) -> Vec<BigRational> {
    let q = filter_coefficients_exact(poly, alpha);
    let mut out = vec![BigRational::zero(); 2 * q.len() - 1];
    for (i, a) in q.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        for (j, b) in q.iter().enumerate() {
            if !b.is_zero() {
                out[i + j] += a * b;
            }
        }
    }
    out
}

/// Coefficients of `p(x - α)` from those of `p(t)`.
fn shift_polynomial(p: &[BigRational], alpha: &BigRational) -> Vec<BigRational> {
    // Horner in the shifted variable: p(x - α) = (((a_d)(x - α) + a_{d-1})(x - α) + …)
    let mut acc: Vec<BigRational> = Vec::with_capacity(p.len());
    let neg_alpha = -alpha.clone();
    for a in p.iter().rev() {
        // acc ← acc·(x - α) + a
        let mut next = vec![BigRational::zero(); acc.len() + 1];
        for (j, v) in acc.iter().enumerate() {
            next[j + 1] += v;
            if !neg_alpha.is_zero() {
                next[j] += v * &neg_alpha;
            }
        }
        next[0] += a;
        acc = next;
    }
    acc.truncate(p.len().max(1));
    acc
}

/// Rounds exact coefficients to `f64`.
pub fn to_f64_coefficients(exact: &[BigRational]) -> Vec<f64> {
    exact
        .iter()
        .map(|q| q.to_f64().unwrap_or(f64::NAN))
        .collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn coarse() -> SignPolyOptions {
        SignPolyOptions {
            grid_points: 20_001,
            ..SignPolyOptions::default()
        }
    }

    #[test]
    fn small_case_is_certified_and_odd() {
        let p = build_sign_poly(0.5, 0.1).unwrap();
        assert_eq!(p.degree % 2, 1);
        assert!(p.certified_error <= 0.1);
        assert!(p.certified_max_abs <= 1.0);
        for x in [0.3, 0.7, 1.3, 1.9] {
            assert!((p.eval(x).unwrap() + p.eval(-x).unwrap()).abs() < 1e-14);
        }
        assert!(p.chebyshev.iter().step_by(2).all(|&c| c == 0.0));
    }

    #[test]
    fn listed_values() {
        let p = build_sign_poly(0.5, 0.1).unwrap();
        assert_eq!(p.eval(0.0).unwrap(), 0.0);
        assert!((0.9..=1.0).contains(&p.eval(1.0).unwrap()));
        assert!((-1.0..=-0.9).contains(&p.eval(-1.0).unwrap()));
        assert_eq!(eval_filter(&p, 0.0, 0.0).unwrap(), 0.5);
        let f = build_sign_poly(0.2, 0.1).unwrap();
        assert!((0.95..=1.0).contains(&eval_filter(&f, 0.5, 0.0).unwrap()));
        assert!((0.0..=0.05).contains(&eval_filter(&f, 0.5, 0.9).unwrap()));
    }

    #[test]
    fn identity_polynomial_monomials() {
        // x = 2·T_1(x/2)
        let m = to_f64_coefficients(&chebyshev_to_monomial_exact(&[0.0, 2.0]));
        assert_eq!(m, vec![0.0, 1.0]);
    }

    #[test]
    fn compensated_matches_clenshaw() {
        let p = build_sign_poly(0.1, 0.05).unwrap();
        for x in [-1.9, -0.4, 0.05, 0.7, 1.99] {
            let a = chebyshev_eval(&p.chebyshev, x / 2.0);
            let b = chebyshev_eval_compensated(&p.chebyshev, x / 2.0);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn epsilon_outside_range_rejected() {
        assert!(matches!(build_sign_poly(0.5, 0.6), Err(Error::Domain(_))));
        assert!(matches!(build_sign_poly(0.0, 0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn degree_constant_is_moderate() {
        let p = build_sign_poly(0.1, 0.05).unwrap();
        assert!(p.degree <= DEFAULT_MAX_DEGREE);
        assert!(
            p.degree_constant <= DEGREE_CONSTANT_BOUND,
            "C = {}",
            p.degree_constant
        );
    }

    #[test]
    fn degree_overflow_when_cap_too_small() {
        let opts = SignPolyOptions {
            max_degree: 5,
            ..coarse()
        };
        assert!(matches!(
            build_sign_poly_with(0.05, 0.01, opts),
            Err(Error::DegreeOverflow(_))
        ));
    }

    #[test]
    fn eval_filter_domain_error() {
        let p = build_sign_poly_with(0.5, 0.1, coarse()).unwrap();
        assert!(matches!(eval_filter(&p, 0.5, 3.0), Err(Error::Domain(_))));
        assert!(eval_filter(&p, 0.5, 2.5).is_ok());
    }

    #[test]
    fn monomial_form_matches_low_degree() {
        let p = build_sign_poly(0.5, 0.1).unwrap();
        let m = p.monomial_coefficients().unwrap();
        for x in [-1.7, -0.2, 0.0, 0.9, 2.0] {
            let h = m.iter().rev().fold(0.0, |acc, &c| acc * x + c);
            assert!((h - p.eval(x).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn high_degree_monomial_form_is_precision_error() {
        let p = build_sign_poly(0.1, 0.05).unwrap();
        assert!(matches!(
            p.monomial_coefficients(),
            Err(Error::Precision(_))
        ));
    }

    #[test]
    fn exact_chebyshev_conversion() {
        // T_3(x/2) = 4(x/2)^3 - 3(x/2) = x^3/2 - 3x/2
        let m = to_f64_coefficients(&chebyshev_to_monomial_exact(&[0.0, 0.0, 0.0, 1.0]));
        assert_eq!(m, vec![0.0, -1.5, 0.0, 0.5]);
    }

    #[test]
    fn squared_filter_matches_pointwise() {
        let p = build_sign_poly(0.8, 0.2).unwrap();
        let alpha = 0.125;
        let sq = to_f64_coefficients(&squared_filter_coefficients_exact(&p, alpha));
        for x in [-1.0, -0.3, 0.2, 0.6, 1.0] {
            let h = sq.iter().rev().fold(0.0, |acc, &c| acc * x + c);
            let q = eval_filter(&p, alpha, x).unwrap();
            assert!((h - q * q).abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn filter_reflection_and_range(alpha in -0.9f64..0.9, x in -1.0f64..1.0) {
            let p = build_sign_poly_with(0.4, 0.1, coarse()).unwrap();
            let q = eval_filter(&p, alpha, x).unwrap();
            let r = eval_filter(&p, alpha, 2.0 * alpha - x).unwrap();
            prop_assert!((q + r - 1.0).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&(q * q)));
        }

        #[test]
        fn degree_monotone_in_epsilon(e1 in 0.02f64..0.3, e2 in 0.02f64..0.3) {
            let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            let a = build_sign_poly_with(0.3, lo, coarse()).unwrap();
            let b = build_sign_poly_with(0.3, hi, coarse()).unwrap();
            prop_assert!(a.degree >= b.degree);
        }
    }
}
