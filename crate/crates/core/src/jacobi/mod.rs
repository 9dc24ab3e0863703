//! The matrix Jacobi QBD family on `[0,1]`.
//!
//! For `α, β > -1`, `0 < k < β+1` and block size `d`, six positive local
//! coefficients `a_j(i,n)`, `b_j(i,n)` with `a_1+a_2+a_3 = b_1+b_2+b_3 = 1`
//! generate the block entries `A_n, B_n, C_n` of a stochastic block
//! tridiagonal chain, a distinguished stochastic UL factor pair
//! `X_n, Y_n, R_n, S_n`, the orthogonality weight
//! `W(x) = x^α (1-x)^β V* Z(x) V`, and (at `d = 2`) moments, the Geronimus
//! mass matrix, parameter-region inequalities and a second-order ODE for the
//! Darboux-transformed polynomials.

pub mod d2;
mod ode;
mod region;

pub use ode::{ode_check, OdeCheckReport};
pub use region::{
    default_scan_bounds, region_membership, region_scan, RegionCase, RegionCaseKind, RegionQuery,
    RegionResult, RegionRow,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::blockmat::{checked_inverse, Band, Block, BlockSequence, LevelBlocks};
use crate::error::Error;
use crate::Result;

/// Parameters of the matrix Jacobi family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobiParams {
    pub alpha: f64,
    pub beta: f64,
    pub k: f64,
    pub d: usize,
}

impl JacobiParams {
    pub fn new(alpha: f64, beta: f64, k: f64, d: usize) -> Result<Self> {
        let p = JacobiParams { alpha, beta, k, d };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.beta.is_finite() && self.k.is_finite()) {
            return Err(Error::InvalidParameter("parameters must be finite".into()));
        }
        if self.alpha <= -1.0 {
            return Err(Error::InvalidParameter(format!("alpha must be > -1, got {}", self.alpha)));
        }
        if self.beta <= -1.0 {
            return Err(Error::InvalidParameter(format!("beta must be > -1, got {}", self.beta)));
        }
        if !(self.k > 0.0 && self.k < self.beta + 1.0) {
            return Err(Error::InvalidParameter(format!(
                "k must satisfy 0 < k < beta+1, got k={}, beta={}",
                self.k, self.beta
            )));
        }
        if self.d == 0 {
            return Err(Error::InvalidParameter("d must be a positive integer".into()));
        }
        Ok(())
    }

    /// Urn models additionally need nonnegative integer `α, β, k` with
    /// `1 ≤ k ≤ β`, at block size 2.
    pub fn validate_urn(&self) -> Result<()> {
        self.validate()?;
        let int = |v: f64| v.fract() == 0.0 && v >= 0.0;
        if !(int(self.alpha) && int(self.beta) && int(self.k)) {
            return Err(Error::InvalidParameter(
                "urn models need nonnegative integer alpha, beta, k".into(),
            ));
        }
        if !(self.k >= 1.0 && self.k <= self.beta) {
            return Err(Error::InvalidParameter(format!(
                "urn models need 1 <= k <= beta, got k={}, beta={}",
                self.k, self.beta
            )));
        }
        if self.d != 2 {
            return Err(Error::InvalidParameter("urn models are defined for d = 2".into()));
        }
        Ok(())
    }

    /// Same family with `α` shifted by `delta`.
    pub fn shifted_alpha(&self, delta: f64) -> JacobiParams {
        JacobiParams {
            alpha: self.alpha + delta,
            ..*self
        }
    }
}

/// Pochhammer symbol `(a)_n = a (a+1) ··· (a+n-1)`.
pub(crate) fn poch(a: f64, n: usize) -> f64 {
    (0..n).fold(1.0, |acc, j| acc * (a + j as f64))
}

/// Generalized binomial `C(a, m) = a (a-1) ··· (a-m+1) / m!` for integer `m`.
/// Coincides with the integer binomial on integer `a` and vanishes there when
/// `m > a ≥ 0`.
pub(crate) fn binom(a: f64, m: usize) -> f64 {
    let mut num = 1.0;
    let mut den = 1.0;
    for j in 0..m {
        num *= a - j as f64;
        den *= (j + 1) as f64;
    }
    num / den
}

/// `num/den`, with an exact-zero numerator short-circuiting to 0 so that the
/// structurally vanishing coefficients (`b_1` at `n=0`, `b_2` at `i=0`,
/// `a_2` at `i=d-1`) never divide 0 by 0.
fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// The six local coefficients at phase `i`, level `n`.
#[derive(Clone, Copy, Debug)]
pub struct LocalCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

pub fn local_coefficients(p: &JacobiParams, i: usize, n: usize) -> Result<LocalCoefficients> {
    p.validate()?;
    if i >= p.d {
        return Err(Error::InvalidParameter(format!("phase index {i} out of range for d={}", p.d)));
    }
    Ok(local_unchecked(p, i, n))
}

fn local_unchecked(p: &JacobiParams, i: usize, n: usize) -> LocalCoefficients {
    let (al, be, k) = (p.alpha, p.beta, p.k);
    let d = p.d as f64;
    let i = i as f64;
    let n = n as f64;
    let a1 = if i == d - 1.0 {
        // (n+k) cancels (n+k+d-i-1)
        (n + be + d) / (2.0 * n + al + be + d + i)
    } else {
        ratio((n + k) * (n + be + d), (2.0 * n + al + be + d + i) * (n + k + d - i - 1.0))
    };
    let a2 = ratio(
        (d - i - 1.0) * (be - k + i + 1.0),
        (n + al + be - k + 2.0 * i + 1.0) * (n + k + d - i - 1.0),
    );
    let a3 = ratio(
        (n + al + i) * (n + al + be - k + d + i),
        (2.0 * n + al + be + d + i) * (n + al + be - k + 2.0 * i + 1.0),
    );
    let b1 = ratio(
        n * (n + k + d - 1.0),
        (2.0 * n + al + be + d + i - 1.0) * (n + k + d - i - 1.0),
    );
    let b2 = ratio(
        i * (k + d - i - 1.0),
        (n + al + be - k + 2.0 * i) * (n + k + d - i - 1.0),
    );
    let b3 = if i == 0.0 {
        // (n+α+β-k+i) cancels (n+α+β-k+2i)
        (n + al + be + d - 1.0) / (2.0 * n + al + be + d - 1.0)
    } else {
        ratio(
            (n + al + be + d + i - 1.0) * (n + al + be - k + i),
            (2.0 * n + al + be + d + i - 1.0) * (n + al + be - k + 2.0 * i),
        )
    };
    LocalCoefficients { a1, a2, a3, b1, b2, b3 }
}

/// Block entries `(A_n, B_n, C_n)` of the chain; `C_0` is absent.
pub fn block_coefficients(p: &JacobiParams, n: usize) -> Result<(Block, Block, Option<Block>)> {
    p.validate()?;
    Ok(block_unchecked(p, n))
}

fn block_unchecked(p: &JacobiParams, n: usize) -> (Block, Block, Option<Block>) {
    let d = p.d;
    let here: Vec<LocalCoefficients> = (0..d).map(|i| local_unchecked(p, i, n)).collect();
    let next: Vec<LocalCoefficients> = (0..d).map(|i| local_unchecked(p, i, n + 1)).collect();
    let mut a = Block::zeros(d, d);
    let mut b = Block::zeros(d, d);
    let mut c = Block::zeros(d, d);
    for i in 0..d {
        a[(i, i)] = here[i].a1 * next[i].b3;
        let mut diag = here[i].a1 * next[i].b1 + here[i].a3 * here[i].b3;
        if i + 1 < d {
            diag += here[i].a2 * here[i + 1].b2;
            a[(i + 1, i)] = here[i + 1].a1 * next[i + 1].b2;
            b[(i + 1, i)] = here[i + 1].a3 * here[i + 1].b2;
            b[(i, i + 1)] = here[i].a2 * here[i + 1].b3;
            c[(i, i + 1)] = here[i].a2 * here[i + 1].b1;
        }
        b[(i, i)] = diag;
        c[(i, i)] = here[i].a3 * here[i].b1;
    }
    (a, b, (n > 0).then_some(c))
}

/// The chain `P` as a lazy tridiagonal sequence.
pub fn tridiagonal_chain(p: &JacobiParams) -> Result<BlockSequence> {
    p.validate()?;
    let p = *p;
    Ok(BlockSequence::from_fn(p.d, Band::Tridiagonal, move |n| {
        let (a, b, c) = block_unchecked(&p, n);
        Ok(LevelBlocks::Tri { c, b, a })
    }))
}

/// The distinguished stochastic factor blocks at level `n`:
/// `X_n` diagonal, `Y_n` upper bidiagonal, `R_n` diagonal, `S_n` lower
/// bidiagonal, all built from the local coefficients.
#[derive(Clone, Debug)]
pub struct PaperFactors {
    pub x: Block,
    pub y: Block,
    pub r: Block,
    pub s: Block,
}

pub fn paper_factors(p: &JacobiParams, n: usize) -> Result<PaperFactors> {
    p.validate()?;
    Ok(paper_factors_unchecked(p, n))
}

fn paper_factors_unchecked(p: &JacobiParams, n: usize) -> PaperFactors {
    let d = p.d;
    let loc: Vec<LocalCoefficients> = (0..d).map(|i| local_unchecked(p, i, n)).collect();
    let mut x = Block::zeros(d, d);
    let mut y = Block::zeros(d, d);
    let mut r = Block::zeros(d, d);
    let mut s = Block::zeros(d, d);
    for i in 0..d {
        x[(i, i)] = loc[i].a1;
        y[(i, i)] = loc[i].a3;
        r[(i, i)] = loc[i].b1;
        s[(i, i)] = loc[i].b3;
        if i + 1 < d {
            y[(i, i + 1)] = loc[i].a2;
            s[(i + 1, i)] = loc[i + 1].b2;
        }
    }
    PaperFactors { x, y, r, s }
}

/// Upper factor `P_U` (levels hold `(Y_n, X_n)`).
pub fn paper_upper(p: &JacobiParams) -> Result<BlockSequence> {
    p.validate()?;
    let p = *p;
    Ok(BlockSequence::from_fn(p.d, Band::UpperBidiagonal, move |n| {
        let f = paper_factors_unchecked(&p, n);
        Ok(LevelBlocks::Upper { y: f.y, x: f.x })
    }))
}

/// Lower factor `P_L` (levels hold `(R_n, S_n)`, `R_0` absent).
pub fn paper_lower(p: &JacobiParams) -> Result<BlockSequence> {
    p.validate()?;
    let p = *p;
    Ok(BlockSequence::from_fn(p.d, Band::LowerBidiagonal, move |n| {
        let f = paper_factors_unchecked(&p, n);
        Ok(LevelBlocks::Lower {
            r: (n > 0).then_some(f.r),
            s: f.s,
        })
    }))
}

/// The seed `α_0 = B_0 - D_0` with `D_0 = diag(a_1(i,0) b_1(i,1))`, the
/// choice whose Geronimus mass vanishes (`α_0 = μ_0 μ_{-1}⁻¹`).
pub fn alpha0_paper(p: &JacobiParams) -> Result<Block> {
    p.validate()?;
    let (_, b0, _) = block_unchecked(p, 0);
    let d = p.d;
    let mut a0 = b0;
    for i in 0..d {
        let l0 = local_unchecked(p, i, 0);
        let l1 = local_unchecked(p, i, 1);
        a0[(i, i)] -= l0.a1 * l1.b1;
    }
    Ok(a0)
}

/// `τ_0⁻¹ = S_0`, the stochastic lower triangular base of the closed-form τ choice.
pub fn tau0_inverse(p: &JacobiParams) -> Result<Block> {
    Ok(paper_factors(p, 0)?.s)
}

/// `τ_n = τ_0 · (L_n⁻¹ at α-1)` for the UL factorization; needs `α > 0`.
pub fn tau_paper_ul(p: &JacobiParams, count: usize) -> Result<Vec<Block>> {
    p.validate()?;
    if p.alpha <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "the closed-form tau choice needs alpha > 0 (alpha-1 chain must exist), got {}",
            p.alpha
        )));
    }
    let tau0 = checked_inverse(&tau0_inverse(p)?, "tau_0 (inverse of S_0)")?;
    Ok(tau_from_shifted_chain(p, -1.0, tau0, count))
}

/// `τ̃_n = τ̃_0 · (L_n⁻¹ at α+1)` with `τ̃_0 = τ_0⁻¹ at α+1` for the LU
/// factorization.
pub fn tau_paper_lu(p: &JacobiParams, count: usize) -> Result<Vec<Block>> {
    p.validate()?;
    let shifted = p.shifted_alpha(1.0);
    let tau0 = tau0_inverse(&shifted)?;
    Ok(tau_from_shifted_chain(p, 1.0, tau0, count))
}

/// Accumulates `τ_n = τ_0 · A_0 ··· A_{n-1}` of the α-shifted chain
/// (`L_n⁻¹ = A_0 ··· A_{n-1}`).
fn tau_from_shifted_chain(p: &JacobiParams, delta: f64, tau0: Block, count: usize) -> Vec<Block> {
    let shifted = p.shifted_alpha(delta);
    let mut taus = Vec::with_capacity(count);
    let mut acc = tau0;
    for n in 0..count {
        taus.push(acc.clone());
        if n + 1 < count {
            let (a, _, _) = block_unchecked(&shifted, n);
            acc = &acc * a;
        }
    }
    taus
}

/// Degree (in `x`) of the polynomial matrix part `V* Z(x) V`.
pub fn matrix_part_degree(d: usize) -> usize {
    3 * (d - 1)
}

/// The binomial quadruple sum `Z(x)`.
pub fn z_matrix(p: &JacobiParams, x: f64) -> Block {
    let d = p.d;
    let mut z = Block::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mut sum = 0.0;
            for r in 0..d {
                let coeff = binom(r as f64, i)
                    * binom(r as f64, j)
                    * binom(d as f64 + p.k - r as f64 - 2.0, d - r - 1)
                    * binom(p.beta - p.k + r as f64, r);
                if coeff != 0.0 {
                    sum += coeff * (1.0 - x).powi((i + j) as i32) * x.powi((d - r - 1) as i32);
                }
            }
            z[(i, j)] = sum;
        }
    }
    z
}

/// The constant upper triangular Pochhammer matrix `V`.
pub fn v_matrix(p: &JacobiParams) -> Block {
    let d = p.d;
    let mut v = Block::zeros(d, d);
    for j in 0..d {
        for i in 0..=j {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            v[(i, j)] = sign * (poch(-(j as f64), i) / poch(1.0 - d as f64, i))
                * (poch(p.alpha + p.beta - p.k + j as f64 + 1.0, i) / poch(p.beta - p.k + 1.0, i));
        }
    }
    v
}

/// Polynomial matrix part `V* Z(x) V` of the weight.
pub fn weight_matrix_part(p: &JacobiParams, x: f64) -> Block {
    let v = v_matrix(p);
    v.transpose() * z_matrix(p, x) * v
}

/// Weight matrix `W(x) = x^α (1-x)^β V* Z(x) V` for `0 < x < 1`.
pub fn weight_eval(p: &JacobiParams, x: f64) -> Result<Block> {
    p.validate()?;
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::InvalidParameter(format!("weight is defined on 0 < x < 1, got {x}")));
    }
    Ok(weight_matrix_part(p, x) * (x.powf(p.alpha) * (1.0 - x).powf(p.beta)))
}

/// The `2×2` moments `μ_0 = ∫W` and `μ_{-1} = ∫W/x`.
#[derive(Clone, Debug)]
pub struct MomentPair {
    pub mu0: Block,
    pub mu_minus1: Block,
}

/// Closed-form moments of the `d=2` weight; `μ_{-1}` needs `α > 0`.
pub fn moments_d2(p: &JacobiParams) -> Result<MomentPair> {
    Ok(MomentPair {
        mu0: d2::mu0(p)?,
        mu_minus1: d2::mu_minus1(p)?,
    })
}

/// Geronimus point mass `M = α_0⁻¹ μ_0 - μ_{-1}` with its shape flags.
#[derive(Clone, Debug)]
pub struct GeronimusMass {
    pub m: Block,
    pub alpha0_used: Block,
    pub symmetric: bool,
    pub positive_semidefinite: bool,
}

pub fn geronimus_mass(alpha0: &Block, moments: &MomentPair) -> Result<GeronimusMass> {
    let a0_inv = checked_inverse(alpha0, "alpha0 (degenerate spectral measure)")?;
    let m = a0_inv * &moments.mu0 - &moments.mu_minus1;
    let scale = crate::blockmat::inf_norm(&m).max(1.0);
    let symmetric = crate::blockmat::max_abs_diff(&m, &m.transpose()) <= 1e-10 * scale;
    let positive_semidefinite = symmetric && {
        let sym = (&m + m.transpose()) * 0.5;
        DMatrix::from(sym)
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .all(|ev| *ev >= -1e-10 * scale)
    };
    Ok(GeronimusMass {
        m,
        alpha0_used: alpha0.clone(),
        symmetric,
        positive_semidefinite,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockmat::{max_abs_diff, multiply_banded, validate_stochastic};
    use approx::assert_abs_diff_eq;

    fn p321() -> JacobiParams {
        JacobiParams::new(3.0, 2.0, 1.0, 2).unwrap()
    }

    fn p122() -> JacobiParams {
        JacobiParams::new(1.0, 2.0, 2.0, 2).unwrap()
    }

    #[test]
    fn a1_at_origin() {
        let c = local_coefficients(&p321(), 0, 0).unwrap();
        assert_abs_diff_eq!(c.a1, 2.0 / 7.0, epsilon = 1e-15);
    }

    #[test]
    fn sum_identities_across_parameters() {
        let triples = [
            (3.0, 2.0, 1.0),
            (1.0, 2.0, 2.0),
            (0.5, 0.25, 1.0),
            (-0.5, 4.0, 4.9),
            (7.0, 0.0, 0.5),
        ];
        for (alpha, beta, k) in triples {
            for d in [1usize, 2, 3, 5] {
                let p = JacobiParams::new(alpha, beta, k, d).unwrap();
                for i in 0..d {
                    for n in 0..50 {
                        let c = local_coefficients(&p, i, n).unwrap();
                        assert_abs_diff_eq!(c.a1 + c.a2 + c.a3, 1.0, epsilon = 1e-14);
                        assert_abs_diff_eq!(c.b1 + c.b2 + c.b3, 1.0, epsilon = 1e-14);
                        // nonnegativity needs alpha >= 0 (a3 carries a bare
                        // alpha factor at n = i = 0)
                        if alpha >= 0.0 {
                            for v in [c.a1, c.a2, c.a3, c.b1, c.b2, c.b3] {
                                assert!(v >= 0.0, "negative coefficient {v} at i={i} n={n}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn scalar_case_is_k_free() {
        let p1 = JacobiParams::new(0.5, 1.0, 0.3, 1).unwrap();
        let p2 = JacobiParams::new(0.5, 1.0, 1.7, 1).unwrap();
        for n in 0..10 {
            let c1 = local_coefficients(&p1, 0, n).unwrap();
            let c2 = local_coefficients(&p2, 0, n).unwrap();
            assert_abs_diff_eq!(c1.a1, c2.a1, epsilon = 1e-14);
            assert_abs_diff_eq!(c1.a3, c2.a3, epsilon = 1e-14);
            assert_abs_diff_eq!(c1.b1, c2.b1, epsilon = 1e-14);
            assert_abs_diff_eq!(c1.b3, c2.b3, epsilon = 1e-14);
        }
    }

    #[test]
    fn block_entries_at_origin() {
        let (a0, _, c0) = block_coefficients(&p321(), 0).unwrap();
        assert!(c0.is_none());
        assert_abs_diff_eq!(a0[(0, 0)], 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(a0[(1, 0)], 1.0 / 28.0, epsilon = 1e-14);
        assert_abs_diff_eq!(a0[(1, 1)], 8.0 / 21.0, epsilon = 1e-14);
        assert_abs_diff_eq!(a0[(0, 1)], 0.0, epsilon = 0.0);
        let (_, _, c1) = block_coefficients(&p321(), 1).unwrap();
        assert_eq!(c1.unwrap()[(1, 0)], 0.0);
    }

    #[test]
    fn chain_is_stochastic() {
        for p in [p321(), p122()] {
            let chain = tridiagonal_chain(&p).unwrap();
            let rep = validate_stochastic(&chain, 21, 1e-12).unwrap();
            assert!(rep.passed, "{rep:?}");
        }
    }

    #[test]
    fn general_d_matches_d2_closed_forms() {
        for p in [p321(), p122()] {
            for n in 0..=30 {
                let (a, b, c) = block_coefficients(&p, n).unwrap();
                assert!(max_abs_diff(&a, &d2::a_block(&p, n).unwrap()) < 1e-13);
                assert!(max_abs_diff(&b, &d2::b_block(&p, n).unwrap()) < 1e-13);
                if let Some(c) = c {
                    assert!(max_abs_diff(&c, &d2::c_block(&p, n).unwrap()) < 1e-13);
                }
            }
        }
    }

    #[test]
    fn paper_factor_blocks_match_d2() {
        for p in [p321(), p122()] {
            for n in 0..=20 {
                let f = paper_factors(&p, n).unwrap();
                assert!(max_abs_diff(&f.x, &d2::x_block(&p, n).unwrap()) < 1e-14);
                assert!(max_abs_diff(&f.y, &d2::y_block(&p, n).unwrap()) < 1e-14);
                assert!(max_abs_diff(&f.r, &d2::r_block(&p, n).unwrap()) < 1e-14);
                assert!(max_abs_diff(&f.s, &d2::s_block(&p, n).unwrap()) < 1e-14);
            }
        }
    }

    #[test]
    fn x0_and_s0_frozen_values() {
        let f = paper_factors(&p321(), 0).unwrap();
        assert_abs_diff_eq!(f.x[(0, 0)], 2.0 / 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.x[(1, 1)], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(f.y[(0, 0)], 18.0 / 35.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.y[(0, 1)], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(f.y[(1, 1)], 0.5, epsilon = 1e-15);
        // S_0 is the stochastic tau_0^{-1} = [[1, 0], [1/6, 5/6]]
        let t0 = d2::tau0_inv_display(&p321()).unwrap();
        assert!(max_abs_diff(&f.s, &t0) < 1e-15);
        assert_abs_diff_eq!(t0[(0, 0)], 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(t0[(1, 0)], 1.0 / 6.0, epsilon = 1e-16);
        assert_abs_diff_eq!(t0[(1, 1)], 5.0 / 6.0, epsilon = 1e-16);
        // R_1 diagonal check: n/(2n+alpha+beta+1) at n=1
        let f1 = paper_factors(&p321(), 1).unwrap();
        assert_abs_diff_eq!(f1.r[(0, 0)], 1.0 / 8.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f1.r[(1, 1)], 1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn paper_factors_multiply_back_to_chain() {
        for p in [p321(), p122()] {
            let chain = tridiagonal_chain(&p).unwrap();
            let prod = multiply_banded(&paper_upper(&p).unwrap(), &paper_lower(&p).unwrap(), 25).unwrap();
            for n in 0..25 {
                let LevelBlocks::Tri { c, b, a } = chain.level(n).unwrap() else { panic!() };
                let LevelBlocks::Tri { c: cp, b: bp, a: ap } = prod.level(n).unwrap() else { panic!() };
                assert!(max_abs_diff(&a, &ap) < 1e-10);
                assert!(max_abs_diff(&b, &bp) < 1e-10);
                if let (Some(c), Some(cp)) = (c, cp) {
                    assert!(max_abs_diff(&c, &cp) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn alpha0_paper_three_ways() {
        for p in [p321(), p122()] {
            let a0 = alpha0_paper(&p).unwrap();
            let display = d2::alpha0_paper_display(&p).unwrap();
            assert!(max_abs_diff(&a0, &display) < 1e-14);
            let mom = moments_d2(&p).unwrap();
            let from_moments = &mom.mu0 * crate::blockmat::small_inverse(&mom.mu_minus1).unwrap();
            assert!(max_abs_diff(&a0, &from_moments) < 1e-11);
            // the defining property: zero Geronimus mass
            let gm = geronimus_mass(&a0, &mom).unwrap();
            assert!(crate::blockmat::inf_norm(&gm.m) < 1e-12);
            assert!(gm.symmetric && gm.positive_semidefinite);
            // alpha0 must be at least semi-stochastic
            assert!(a0.iter().all(|v| *v >= 0.0));
            for i in 0..2 {
                assert!(a0[(i, 0)] + a0[(i, 1)] <= 1.0 + 1e-14);
            }
        }
    }

    #[test]
    fn moment_frozen_values_and_relation() {
        let p = p321();
        let mom = moments_d2(&p).unwrap();
        // frozen rational values; tolerance bounded by ln_gamma accuracy
        assert_abs_diff_eq!(mom.mu0[(0, 0)], 3.0 / 70.0, epsilon = 1e-13);
        assert_abs_diff_eq!(mom.mu0[(1, 1)], 3.0 / 140.0, epsilon = 1e-13);
        assert_abs_diff_eq!(mom.mu0[(0, 1)], 0.0, epsilon = 0.0);
        assert_abs_diff_eq!(mom.mu_minus1[(0, 0)], 5.0 / 60.0, epsilon = 1e-13);
        assert_abs_diff_eq!(mom.mu_minus1[(0, 1)], -1.0 / 60.0, epsilon = 1e-13);
        assert_abs_diff_eq!(mom.mu_minus1[(1, 1)], 23.0 / 420.0, epsilon = 1e-13);
        // mu0 at alpha-1 equals tau0^{-1} mu_{-1} tau0^{-T}
        let t0inv = tau0_inverse(&p).unwrap();
        let lhs = d2::mu0(&p.shifted_alpha(-1.0)).unwrap();
        let rhs = &t0inv * &mom.mu_minus1 * t0inv.transpose();
        assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn mu_minus1_needs_positive_alpha() {
        let p0 = JacobiParams::new(0.0, 2.0, 1.0, 2).unwrap();
        assert!(matches!(d2::mu_minus1(&p0), Err(Error::InvalidParameter(_))));
        assert!(moments_d2(&p0).is_err());
    }

    #[test]
    fn weight_is_spd_at_half() {
        let p = p321();
        let w = weight_eval(&p, 0.5).unwrap();
        assert!(max_abs_diff(&w, &w.transpose()) < 1e-13);
        let eig = w.clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|ev| *ev > 0.0), "{w}");
    }

    #[test]
    fn weight_scalar_reduction() {
        let p = JacobiParams::new(1.5, 0.5, 0.75, 1).unwrap();
        let z0 = z_matrix(&p, 0.3)[(0, 0)];
        let z1 = z_matrix(&p, 0.8)[(0, 0)];
        assert_abs_diff_eq!(z0, z1, epsilon = 1e-15); // constant in x at d=1
        assert_abs_diff_eq!(v_matrix(&p)[(0, 0)], 1.0, epsilon = 0.0);
        let w = weight_eval(&p, 0.3).unwrap();
        assert_abs_diff_eq!(w[(0, 0)], 0.3f64.powf(1.5) * 0.7f64.powf(0.5) * z0, epsilon = 1e-15);
    }

    #[test]
    fn weight_rejects_outside_support() {
        let p = p321();
        assert!(weight_eval(&p, 0.0).is_err());
        assert!(weight_eval(&p, 1.0).is_err());
        assert!(weight_eval(&p, -0.2).is_err());
    }

    #[test]
    fn l_closed_form_matches_monic() {
        for p in [p321(), p122()] {
            let chain = tridiagonal_chain(&p).unwrap();
            let monic = crate::factorization::monic_reduce(&chain, 21).unwrap();
            for n in 0..=20 {
                let closed = d2::l_block(&p, n).unwrap();
                assert!(
                    max_abs_diff(monic.l(n), &closed) < 1e-10 * crate::blockmat::inf_norm(&closed).max(1.0),
                    "L_{n} mismatch"
                );
            }
        }
    }

    #[test]
    fn l1_frozen_value() {
        let l1 = d2::l_block(&p321(), 1).unwrap();
        assert_abs_diff_eq!(l1[(0, 0)], 4.0, epsilon = 1e-13);
        assert_abs_diff_eq!(l1[(1, 0)], -3.0 / 8.0, epsilon = 1e-13);
        assert_abs_diff_eq!(l1[(1, 1)], 21.0 / 8.0, epsilon = 1e-13);
        assert_abs_diff_eq!(l1[(0, 1)], 0.0, epsilon = 0.0);
    }

    #[test]
    fn geronimus_mass_case2a_shape() {
        let p = p321();
        let mom = moments_d2(&p).unwrap();
        let a0 = d2::alpha0_case2a(&p, 0.4, 0.7).unwrap();
        let gm = geronimus_mass(&a0, &mom).unwrap();
        assert!(!gm.symmetric);
        assert!(!gm.positive_semidefinite);
        // singular: second row of the closed form is zero
        let det = gm.m[(0, 0)] * gm.m[(1, 1)] - gm.m[(0, 1)] * gm.m[(1, 0)];
        assert_abs_diff_eq!(det, 0.0, epsilon = 1e-12);
        let closed = d2::m_case2a_closed(&p, 0.4, 0.7).unwrap();
        assert!(max_abs_diff(&gm.m, &closed) < 1e-12);
    }

    #[test]
    fn geronimus_mass_case1_psd_boundary() {
        let p = p321();
        let mom = moments_d2(&p).unwrap();
        let s21_bound = d2::case1_s21_bound(&p).unwrap();
        assert_abs_diff_eq!(s21_bound, 1.0 / 12.0, epsilon = 1e-15);
        // At (s21 bound, s21 + gap) the case-1 seed IS the zero-mass seed.
        let corner =
            d2::alpha0_case1(&p, s21_bound, s21_bound + d2::case1_s11_psd_gap(&p).unwrap()).unwrap();
        assert!(max_abs_diff(&corner, &alpha0_paper(&p).unwrap()) < 1e-14);
        // Interior s21 with s11 at its PSD bound: rank-one PSD mass.
        let s21 = 0.05;
        let s11 = s21 + d2::case1_s11_psd_gap(&p).unwrap();
        let gm = geronimus_mass(&d2::alpha0_case1(&p, s21, s11).unwrap(), &mom).unwrap();
        assert!(gm.symmetric);
        assert!(gm.positive_semidefinite);
        let sym = (&gm.m + gm.m.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        assert_abs_diff_eq!(min, 0.0, epsilon = 1e-12);
        assert!(max > 1e-4);
        let closed = d2::m_case1_closed(&p, s21, s11).unwrap();
        assert!(max_abs_diff(&gm.m, &closed) < 1e-12, "{} vs {}", gm.m, closed);
        // just beyond the s21 bound the mass loses semidefiniteness
        let beyond = geronimus_mass(
            &d2::alpha0_case1(&p, s21_bound + 1e-3, s21_bound + 0.5).unwrap(),
            &mom,
        )
        .unwrap();
        assert!(!beyond.positive_semidefinite);
    }

    #[test]
    fn binom_generalized_values() {
        assert_abs_diff_eq!(binom(5.0, 2), 10.0, epsilon = 0.0);
        assert_abs_diff_eq!(binom(1.0, 3), 0.0, epsilon = 0.0);
        assert_abs_diff_eq!(binom(2.5, 2), 2.5 * 1.5 / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(poch(3.0, 0), 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(poch(3.0, 3), 60.0, epsilon = 0.0);
    }

    #[test]
    fn urn_parameter_validation() {
        assert!(p321().validate_urn().is_ok());
        assert!(p122().validate_urn().is_ok());
        let bad = JacobiParams { k: 2.5, ..p321() };
        assert!(bad.validate_urn().is_err());
        assert!(JacobiParams::new(3.0, 2.0, 4.0, 2).is_err()); // k = beta + 2
    }
}
