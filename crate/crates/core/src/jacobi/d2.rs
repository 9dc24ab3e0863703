//! Explicit `2×2` closed forms: block entries, `L_n`, the distinguished
//! factor blocks, moments, the seed families with their parameter regions,
//! and the second-order ODE coefficients of the transformed polynomials.
//!
//! Kept as an independent code path from the general-`d` assembly so the two
//! can cross-validate each other.

use statrs::function::gamma::ln_gamma;

use super::{poch, JacobiParams};
use crate::blockmat::{checked_inverse, Block};
use crate::error::Error;
use crate::poly::MatrixPolynomial;
use crate::Result;

fn require_d2(p: &JacobiParams) -> Result<(f64, f64, f64)> {
    p.validate()?;
    if p.d != 2 {
        return Err(Error::InvalidParameter(format!("closed forms need d = 2, got d = {}", p.d)));
    }
    Ok((p.alpha, p.beta, p.k))
}

fn m2(a11: f64, a12: f64, a21: f64, a22: f64) -> Block {
    Block::from_row_slice(2, 2, &[a11, a12, a21, a22])
}

/// `A_n`.
pub fn a_block(p: &JacobiParams, n: usize) -> Result<Block> {
    let (al, be, k) = require_d2(p)?;
    let n = n as f64;
    Ok(m2(
        (be + n + 2.0) * (k + n) * (al + be + n + 2.0)
            / ((k + n + 1.0) * (al + be + 2.0 * n + 2.0) * (al + be + 2.0 * n + 3.0)),
        0.0,
        k * (be + n + 2.0)
            / ((al + be - k + n + 3.0) * (al + be + 2.0 * n + 3.0) * (k + n + 1.0)),
        (be + n + 2.0) * (al + be + n + 3.0) * (al + be - k + n + 2.0)
            / ((al + be + 2.0 * n + 3.0) * (al + be + 2.0 * n + 4.0) * (al + be - k + n + 3.0)),
    ))
}

/// `B_n`.
pub fn b_block(p: &JacobiParams, n: usize) -> Result<Block> {
    let (al, be, k) = require_d2(p)?;
    let n = n as f64;
    let b11 = (n + k) * (n + be + 2.0) * (n + 1.0)
        / ((al + be + 2.0 * n + 2.0) * (n + k + 1.0) * (al + be + 2.0 * n + 3.0))
        + (n + al) * (al + be - k + n + 2.0) * (n + al + be + 1.0)
            / ((al + be + 2.0 * n + 2.0) * (al + 1.0 + n - k + be) * (al + be + 2.0 * n + 1.0))
        + k * (be - k + 1.0)
            / ((al + 1.0 + n - k + be) * (n + k + 1.0) * (al + be - k + n + 2.0) * (n + k));
    let b22 = (n + be + 2.0) * (n + 1.0) * (n + k + 2.0)
        / ((al + be + 2.0 * n + 3.0) * (al + be + 2.0 * n + 4.0) * (n + k + 1.0))
        + (al + n + 1.0) * (al + be + n + 2.0) * (al + 1.0 + n - k + be)
            / ((al + be + 2.0 * n + 3.0) * (al + be + 2.0 * n + 2.0) * (al + be - k + n + 2.0));
    Ok(m2(
        b11,
        (be - k + 1.0) * (al + be + n + 2.0)
            / ((k + n + 1.0) * (al + be + 2.0 * n + 2.0) * (al + be - k + n + 2.0)),
        (al + n + 1.0) * k / ((k + n) * (al + be - k + n + 2.0) * (al + be + 2.0 * n + 3.0)),
        b22,
    ))
}

/// `C_n` for `n ≥ 1`.
pub fn c_block(p: &JacobiParams, n: usize) -> Result<Block> {
    let (al, be, k) = require_d2(p)?;
    let n = n as f64;
    Ok(m2(
        n * (al + n) * (al + be - k + n + 2.0)
            / ((al + be - k + n + 1.0) * (al + be + 2.0 * n + 1.0) * (al + be + 2.0 * n + 2.0)),
        n * (be - k + 1.0) / ((al + be - k + n + 1.0) * (al + be + 2.0 * n + 2.0) * (k + n)),
        0.0,
        n * (al + n + 1.0) * (k + n + 1.0)
            / ((k + n) * (al + be + 2.0 * n + 2.0) * (al + be + 2.0 * n + 3.0)),
    ))
}

/// Monic conjugation blocks `L_n` (lower triangular).
pub fn l_block(p: &JacobiParams, n: usize) -> Result<Block> {
    let (al, be, k) = require_d2(p)?;
    let nf = n as f64;
    let base = poch(be + 2.0, n);
    Ok(m2(
        (nf + k) * poch(al + be + nf + 2.0, n) / (k * base),
        0.0,
        -nf * poch(al + be + nf + 3.0, n) / ((al + be - k + 2.0) * base),
        (al + be + nf - k + 2.0) * poch(al + be + nf + 3.0, n) / ((al + be - k + 2.0) * base),
    ))
}

/// Paper factor `X_n` (diagonal).
pub fn x_block(p: &JacobiParams, n: usize) -> Result<Block> {
    let (al, be, k) = require_d2(p)?;
    let n = n as f64;
    Ok(m2(
        (n + k) * (n + be + 2.0) / ((2.0 * n + al + be + 2.0) * (n + k + 1.0)),
        0.0,
        0.0,
        (n + be + 2.0) / (2.0 * n + al + be + 3.0),
    ))
}

/// Paper factor `Y_n` (upper triangular).
pub fn y_block(p: &JacobiParams, n: usize) -> Result<Block> {
    let (al, be, k) = require_d2(p)?;
    let n = n as f64;
    Ok(m2(
        (n + al) * (n + al + be - k + 2.0) / ((2.0 * n + al + be + 2.0) * (n + al + 1.0 - k + be)),
        (be - k + 1.0) / ((n + al + 1.0 - k + be) * (n + k + 1.0)),
        0.0,
        (n + al + 1.0) / (2.0 * n + al + be + 3.0),
    ))
}

/// Paper factor `S_n` (lower triangular, `S_0` stochastic).
pub fn s_block(p: &JacobiParams, n: usize) -> Result<Block> {
    let (al, be, k) = require_d2(p)?;
    let n = n as f64;
    Ok(m2(
        (n + al + be + 1.0) / (2.0 * n + al + be + 1.0),
        0.0,
        k / ((n + al + be - k + 2.0) * (n + k)),
        (n + al + be + 2.0) * (n + al + 1.0 - k + be)
            / ((2.0 * n + al + be + 2.0) * (n + al + be - k + 2.0)),
    ))
}

/// Paper factor `R_n` (diagonal, `R_0 = 0`).
pub fn r_block(p: &JacobiParams, n: usize) -> Result<Block> {
    let (al, be, k) = require_d2(p)?;
    let n = n as f64;
    Ok(m2(
        n / (2.0 * n + al + be + 1.0),
        0.0,
        0.0,
        n * (n + k + 1.0) / ((2.0 * n + al + be + 2.0) * (n + k)),
    ))
}

/// `μ_0 = ∫_0^1 W(x) dx` (diagonal).
pub fn mu0(p: &JacobiParams) -> Result<Block> {
    let (al, be, k) = require_d2(p)?;
    let scale = (ln_gamma(al + 1.0) + ln_gamma(be + 2.0) - ln_gamma(al + be + 3.0)).exp()
        * (al + be - k + 2.0);
    Ok(m2(
        scale,
        0.0,
        0.0,
        scale * (al + 1.0) * (k + 1.0) / ((al + be + 3.0) * (be - k + 1.0)),
    ))
}

/// `μ_{-1} = ∫_0^1 W(x)/x dx`; needs `α > 0`.
pub fn mu_minus1(p: &JacobiParams) -> Result<Block> {
    let (al, be, k) = require_d2(p)?;
    if al <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "mu_{{-1}} diverges unless alpha > 0, got {al}"
        )));
    }
    let scale = (ln_gamma(al) + ln_gamma(be + 2.0) - ln_gamma(al + be + 2.0)).exp();
    Ok(m2(
        scale * (al + be - k + 1.0),
        -scale,
        -scale,
        scale * ((al + 1.0) * (k + 1.0) * (al + be - k + 2.0) - k * (be - k + 1.0))
            / ((al + be + 2.0) * (be - k + 1.0)),
    ))
}

/// The zero-mass seed `α_0` in its explicit `2×2` closed form.
pub fn alpha0_paper_display(p: &JacobiParams) -> Result<Block> {
    let (al, be, k) = require_d2(p)?;
    Ok(m2(
        (be - k + 1.0) / ((1.0 + al + be - k) * (1.0 + k) * (2.0 + al + be - k))
            + al * (2.0 + al + be - k) / ((2.0 + al + be) * (1.0 + al + be - k)),
        (be - k + 1.0) / ((1.0 + k) * (2.0 + al + be - k)),
        (1.0 + al) / ((3.0 + al + be) * (2.0 + al + be - k)),
        (1.0 + al) * (1.0 + al + be - k) / ((3.0 + al + be) * (2.0 + al + be - k)),
    ))
}

/// `τ_0⁻¹` in its explicit `2×2` display.
pub fn tau0_inv_display(p: &JacobiParams) -> Result<Block> {
    let (al, be, k) = require_d2(p)?;
    Ok(m2(
        1.0,
        0.0,
        1.0 / (al + be - k + 2.0),
        (al + be - k + 1.0) / (al + be - k + 2.0),
    ))
}

/// Case-1 seed family (symmetric Geronimus mass by construction).
pub fn alpha0_case1(p: &JacobiParams, s21: f64, s11: f64) -> Result<Block> {
    let (al, be, k) = require_d2(p)?;
    Ok(m2(
        (al + be + 3.0) * (be - k + 1.0) / ((k + 1.0) * (al + 1.0) * (al + be - k + 1.0)) * s11,
        (al + be + 3.0) * (be - k + 1.0) / ((k + 1.0) * (al + 1.0)) * s21,
        s21,
        (al + be - k + 1.0) * s21,
    ))
}

/// Case-2(a) seed family (diagonal `X_n`), normalized so that
/// `s11 = s12 = 1` recovers [`alpha0_paper_display`].
pub fn alpha0_case2a(p: &JacobiParams, s11: f64, s12: f64) -> Result<Block> {
    let (al, be, k) = require_d2(p)?;
    Ok(m2(
        ((be - k + 1.0) / ((1.0 + al + be - k) * (1.0 + k) * (2.0 + al + be - k))
            + al * (2.0 + al + be - k) / ((2.0 + al + be) * (1.0 + al + be - k)))
            * s11,
        (be - k + 1.0) / ((1.0 + k) * (2.0 + al + be - k)) * s12,
        (1.0 + al) / ((3.0 + al + be) * (2.0 + al + be - k)),
        (1.0 + al) * (1.0 + al + be - k) / ((3.0 + al + be) * (2.0 + al + be - k)),
    ))
}

/// Case-2(b) seed family (diagonal `R_n`).
pub fn alpha0_case2b(p: &JacobiParams, s11: f64, s21: f64) -> Result<Block> {
    let (al, be, k) = require_d2(p)?;
    Ok(m2(
        s11,
        (be - k + 1.0) / ((1.0 + k) * (2.0 + al + be - k)),
        s21,
        (1.0 + al) * (1.0 + al + be - k) / ((3.0 + al + be) * (2.0 + al + be - k)),
    ))
}

/// Case-2(c) seed family (diagonal `Y_n`; singular seed).
pub fn alpha0_case2c(p: &JacobiParams, s21: f64, s22: f64) -> Result<Block> {
    require_d2(p)?;
    Ok(m2(0.0, 0.0, s21, s22))
}

/// Case-2(d) seed family (diagonal `S_n`; singular seed).
pub fn alpha0_case2d(p: &JacobiParams, s21: f64, s22: f64) -> Result<Block> {
    require_d2(p)?;
    Ok(m2(0.0, s21, 0.0, s22))
}

/// Case-1 upper bound on `s21`.
pub fn case1_s21_bound(p: &JacobiParams) -> Result<f64> {
    let (al, be, k) = require_d2(p)?;
    Ok((al + 1.0) / ((al + be + 3.0) * (al + be - k + 2.0)))
}

/// Case-1 stochastic upper bound on `s11` at a given `s21`.
pub fn case1_s11_stochastic_bound(p: &JacobiParams, s21: f64) -> Result<f64> {
    let (al, be, k) = require_d2(p)?;
    let c1 = (al + 1.0) * (al + 1.0) * (k + 1.0) / (k * (be - k + 1.0) * (al + be + 3.0));
    let c2 = (al + 1.0) * (k + 1.0) / (k * (al + be - k + 1.0) * (al + be + 3.0));
    Ok(s21 * (s21 - c1) / (s21 - c2))
}

/// Width of the case-1 PSD band: `s11 ≤ s21 + gap` keeps `M` PSD.
pub fn case1_s11_psd_gap(p: &JacobiParams) -> Result<f64> {
    let (al, be, k) = require_d2(p)?;
    Ok(poch(al, 2) * (k + 1.0) * (al + be - k + 2.0) / ((be - k + 1.0) * poch(al + be + 2.0, 2)))
}

/// Case-1 stochastic-region membership.
pub fn case1_inside(p: &JacobiParams, s21: f64, s11: f64) -> Result<bool> {
    Ok(s21 > 0.0
        && s21 <= case1_s21_bound(p)?
        && s11 > s21
        && s11 <= case1_s11_stochastic_bound(p, s21)?)
}

/// Case-1 PSD-region membership (sufficient range for `M ⪰ 0`).
pub fn case1_psd_inside(p: &JacobiParams, s21: f64, s11: f64) -> Result<bool> {
    Ok(s21 > 0.0
        && s21 <= case1_s21_bound(p)?
        && s11 > s21
        && s11 <= s21 + case1_s11_psd_gap(p)?)
}

/// Case-2(a) slope of the upper `s12` constraint before the cap at 1.
pub fn case2a_slope(p: &JacobiParams) -> Result<f64> {
    let (al, be, k) = require_d2(p)?;
    let t = al + be - k + 2.0;
    Ok(1.0 + al * (k + 1.0) * t * t / ((al + be + 2.0) * (be - k + 1.0)))
}

/// Case-2(a) stochastic-region membership (with the `min{·,1}` cap).
pub fn case2a_inside(p: &JacobiParams, s11: f64, s12: f64) -> Result<bool> {
    let slope = case2a_slope(p)?;
    Ok(s11 > 0.0 && s11 <= 1.0 && s12 >= s11 && s12 <= (slope * s11).min(1.0))
}

/// Case-1 Geronimus mass in closed form (cross-check for
/// [`super::geronimus_mass`]).
///
/// The second diagonal entry carries `(α+β+3)`, the denominator that makes
/// the PSD range an exact characterization: it vanishes at the `s21` bound,
/// and at `(s21, s11) = (bound, bound + gap)` the seed coincides with the
/// zero-mass seed.
pub fn m_case1_closed(p: &JacobiParams, s21: f64, s11: f64) -> Result<Block> {
    let (al, be, k) = require_d2(p)?;
    let tau0 = checked_inverse(&tau0_inv_display(p)?, "tau_0")?;
    let mid = m2(
        poch(al, 2) * (k + 1.0) * (al + be - k + 2.0)
            / ((be - k + 1.0) * poch(al + be + 2.0, 2) * (s11 - s21))
            - 1.0,
        0.0,
        0.0,
        (al + 1.0) / ((al + be + 3.0) * (al + be - k + 2.0) * s21) - 1.0,
    );
    let mu = mu0(&p.shifted_alpha(-1.0))?;
    Ok(&tau0 * mid * mu * tau0.transpose())
}

/// Case-2(a) Geronimus mass in closed form (singular, non-symmetric unless
/// `s12 = 1`).
pub fn m_case2a_closed(p: &JacobiParams, s11: f64, s12: f64) -> Result<Block> {
    let (al, be, k) = require_d2(p)?;
    let a0 = alpha0_case2a(p, s11, s12)?;
    let det = a0[(0, 0)] * a0[(1, 1)] - a0[(0, 1)] * a0[(1, 0)];
    let tau0 = checked_inverse(&tau0_inv_display(p)?, "tau_0")?;
    let mid = m2(
        poch(al, 2) / (poch(al + be + 2.0, 2) * det) - 1.0,
        (be - k + 1.0) * (al + 1.0) * (1.0 - s12)
            / (det * (k + 1.0) * (al + be + 3.0) * (al + be - k + 2.0)),
        0.0,
        0.0,
    );
    let mu = mu0(&p.shifted_alpha(-1.0))?;
    Ok(&tau0 * mid * mu * tau0.transpose())
}

/// ODE coefficient `F̃_2(x)` (degree 2, vanishes at `x = 0`).
pub fn ode_f2(p: &JacobiParams) -> Result<MatrixPolynomial> {
    let (al, be, k) = require_d2(p)?;
    let q = (be - k + 1.0) / (al + be - k + 2.0);
    let r = (al + 1.0) / (al + be - k + 2.0);
    Ok(MatrixPolynomial::from_coeffs(
        2,
        vec![
            Block::zeros(2, 2),
            m2(q, -q, -r, r),
            m2(0.0, 0.0, 1.0, -1.0),
        ],
    ))
}

/// ODE coefficient `F̃_1(x)` (degree 1).
pub fn ode_f1(p: &JacobiParams) -> Result<MatrixPolynomial> {
    let (al, be, k) = require_d2(p)?;
    let q = (be - k + 1.0) / (al + be - k + 2.0);
    let r = (al + 1.0) / (al + be - k + 2.0);
    let w = al + be - k + 1.0;
    Ok(MatrixPolynomial::from_coeffs(
        2,
        vec![
            m2(-q, -q * w, r, r * w),
            m2(0.0, 0.0, k + 1.0, -(al + be + 3.0)),
        ],
    ))
}

/// ODE coefficient `F̃_0` (constant).
pub fn ode_f0(p: &JacobiParams) -> Result<Block> {
    let (al, be, k) = require_d2(p)?;
    Ok(m2(
        (k + 1.0) * (al + be - k + 1.0),
        0.0,
        -(k + 1.0),
        0.0,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p321() -> JacobiParams {
        JacobiParams::new(3.0, 2.0, 1.0, 2).unwrap()
    }

    #[test]
    fn case1_bounds_frozen() {
        let p = p321();
        assert_abs_diff_eq!(case1_s21_bound(&p).unwrap(), 1.0 / 12.0, epsilon = 1e-16);
        // s11 bound at s21 = 1/12: (1/12)(1/12 - 2)/(1/12 - 1/5) = 115/84
        let b = case1_s11_stochastic_bound(&p, 1.0 / 12.0).unwrap();
        let direct = (1.0 / 12.0) * (1.0 / 12.0 - 2.0) / (1.0 / 12.0 - 1.0 / 5.0);
        assert_abs_diff_eq!(b, direct, epsilon = 1e-15);
        assert_abs_diff_eq!(b, 115.0 / 84.0, epsilon = 1e-13);
        // PSD gap at (3,2,1): (3)_2·2·6/(2·(7)_2) = 9/7
        assert_abs_diff_eq!(case1_s11_psd_gap(&p).unwrap(), 9.0 / 7.0, epsilon = 1e-14);
    }

    #[test]
    fn case2a_region_shape() {
        let p122 = JacobiParams::new(1.0, 2.0, 2.0, 2).unwrap();
        // slope at (1,2,2): 1 + 1·3·9/(5·1) = 32/5
        assert_abs_diff_eq!(case2a_slope(&p122).unwrap(), 32.0 / 5.0, epsilon = 1e-14);
        assert!(case2a_inside(&p122, 1.0, 1.0).unwrap()); // boundary of min{.,1}
        assert!(case2a_inside(&p122, 0.1, 0.3).unwrap());
        assert!(!case2a_inside(&p122, 0.1, 0.65).unwrap()); // above slope
        assert!(!case2a_inside(&p122, 0.5, 0.4).unwrap()); // below s11
        assert!(!case2a_inside(&p122, 1.05, 1.05).unwrap());
    }

    #[test]
    fn case1_region_shape() {
        let p = p321();
        let s21 = 1.0 / 12.0;
        assert!(case1_inside(&p, s21, 1.0 / 6.0).unwrap());
        assert!(case1_inside(&p, s21, 115.0 / 84.0 - 1e-9).unwrap());
        assert!(!case1_inside(&p, s21, 115.0 / 84.0 + 1e-9).unwrap());
        assert!(!case1_inside(&p, s21 + 1e-9, 0.2).unwrap());
        assert!(!case1_inside(&p, 0.05, 0.04).unwrap()); // s11 <= s21
    }

    #[test]
    fn case2a_reduces_to_paper_seed_at_ones() {
        let p = p321();
        let a = alpha0_case2a(&p, 1.0, 1.0).unwrap();
        let b = alpha0_paper_display(&p).unwrap();
        assert!(crate::blockmat::max_abs_diff(&a, &b) < 1e-15);
    }

    #[test]
    fn case1_meets_case2a_at_special_s21() {
        // s12 = 1 in case 2(a) lands inside the case-1 family exactly when
        // s21 sits at its case-1 upper bound: all entries except (1,1) match.
        let p = p321();
        let s21 = case1_s21_bound(&p).unwrap();
        let a1 = alpha0_case1(&p, s21, 0.5).unwrap();
        let a2 = alpha0_case2a(&p, 0.5, 1.0).unwrap();
        assert_abs_diff_eq!(a1[(0, 1)], a2[(0, 1)], epsilon = 1e-15);
        assert_abs_diff_eq!(a1[(1, 0)], a2[(1, 0)], epsilon = 1e-15);
        assert_abs_diff_eq!(a1[(1, 1)], a2[(1, 1)], epsilon = 1e-15);
    }

    #[test]
    fn remaining_seed_families_have_their_shapes() {
        let p = p321();
        // case 2(b): second column equals the zero-mass seed's
        let b = alpha0_case2b(&p, 0.3, 0.07).unwrap();
        let a = alpha0_paper_display(&p).unwrap();
        assert_abs_diff_eq!(b[(0, 1)], a[(0, 1)], epsilon = 1e-15);
        assert_abs_diff_eq!(b[(1, 1)], a[(1, 1)], epsilon = 1e-15);
        assert_abs_diff_eq!(b[(0, 0)], 0.3, epsilon = 0.0);
        assert_abs_diff_eq!(b[(1, 0)], 0.07, epsilon = 0.0);
        // cases 2(c)/2(d) are singular by construction
        for m in [
            alpha0_case2c(&p, 0.2, 0.5).unwrap(),
            alpha0_case2d(&p, 0.2, 0.5).unwrap(),
        ] {
            assert_abs_diff_eq!(m.determinant(), 0.0, epsilon = 0.0);
        }
    }

    #[test]
    fn ode_f2_vanishes_at_zero() {
        let f2 = ode_f2(&p321()).unwrap();
        assert_eq!(f2.eval(0.0), Block::zeros(2, 2));
        assert_eq!(f2.degree(), 2);
    }
}
