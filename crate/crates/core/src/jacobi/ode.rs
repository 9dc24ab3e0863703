//! Second-order ODE check for the Darboux-transformed monic polynomials.
//!
//! For the case-2(a) seed with `s12 = 1` the monic matrix polynomials
//! generated by the reversed monic factorization `J̃ = β·α` satisfy
//! `P̃_n'' F̃_2 + P̃_n' F̃_1 + P̃_n F̃_0 = Λ_n P̃_n` with coefficients
//! independent of `s11`. `Λ_n` is read off the degree-`n` coefficient of the
//! left-hand side (the polynomials are monic), not taken from a table.

use super::{d2, tridiagonal_chain, JacobiParams};
use crate::blockmat::Block;
use crate::error::Error;
use crate::factorization::{monic_reduce, ul_coefficients};
use crate::poly::MatrixPolynomial;
use crate::Result;

#[derive(Clone, Debug)]
pub struct OdeCheckReport {
    /// `max over sample xs of ‖P̃_n'' F̃_2 + P̃_n' F̃_1 + P̃_n F̃_0 - Λ_n P̃_n‖∞`.
    pub max_residual: f64,
    /// The eigenvalue matrix `Λ_n` from the leading-coefficient balance.
    pub lambda: Block,
}

/// Monic polynomials of the transformed chain `J̃ = β·α`:
/// `B̂'_0 = α_0`, `B̂'_n = α_n + β_n`, `Ĉ'_n = β_n α_{n-1}`.
fn transformed_monic_polynomials(
    p: &JacobiParams,
    s11: f64,
    degree: usize,
) -> Result<Vec<MatrixPolynomial>> {
    let chain = tridiagonal_chain(p)?;
    let monic = monic_reduce(&chain, degree + 2)?;
    let alpha0 = d2::alpha0_case2a(p, s11, 1.0)?;
    let coeffs = ul_coefficients(&monic, &alpha0)?;
    let d = p.d;
    let mut polys = vec![MatrixPolynomial::identity(d)];
    for n in 0..degree {
        let bph = if n == 0 {
            coeffs.alpha(0).clone()
        } else {
            coeffs.alpha(n) + coeffs.beta(n)
        };
        let mut next = polys[n].shift_up().sub(&polys[n].mul_matrix_left(&bph));
        if n >= 1 {
            let cph = coeffs.beta(n) * coeffs.alpha(n - 1);
            next = next.sub(&polys[n - 1].mul_matrix_left(&cph));
        }
        polys.push(next);
    }
    Ok(polys)
}

/// Residual of the second-order ODE for `P̃_degree` at the sample points.
///
/// Only `s12 = 1` admits the displayed coefficients; other values are
/// rejected.
pub fn ode_check(
    p: &JacobiParams,
    s11: f64,
    s12: f64,
    degree: usize,
    sample_xs: &[f64],
) -> Result<OdeCheckReport> {
    p.validate()?;
    if p.d != 2 {
        return Err(Error::InvalidParameter("the ODE check is a d = 2 construction".into()));
    }
    if (s12 - 1.0).abs() > 1e-12 {
        return Err(Error::Unsupported(format!(
            "the transformed polynomials satisfy the second-order equation only for s12 = 1, got {s12}"
        )));
    }
    if sample_xs.is_empty() {
        return Err(Error::InvalidParameter("need at least one sample point".into()));
    }
    let polys = transformed_monic_polynomials(p, s11, degree)?;
    let pn = &polys[degree];
    let f2 = d2::ode_f2(p)?;
    let f1 = d2::ode_f1(p)?;
    let f0 = d2::ode_f0(p)?;
    let lhs = pn
        .derivative()
        .derivative()
        .mul(&f2)
        .add(&pn.derivative().mul(&f1))
        .add(&pn.mul_matrix_right(&f0));
    let lambda = lhs.coeff(degree);
    let mut max_residual = 0.0_f64;
    for &x in sample_xs {
        let r = lhs.eval(x) - &lambda * pn.eval(x);
        max_residual = max_residual.max(r.amax());
    }
    Ok(OdeCheckReport { max_residual, lambda })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p321() -> JacobiParams {
        JacobiParams::new(3.0, 2.0, 1.0, 2).unwrap()
    }

    fn sample_xs(count: usize) -> Vec<f64> {
        (0..count).map(|i| (i + 1) as f64 / (count + 1) as f64).collect()
    }

    #[test]
    fn degree_zero_lambda_is_f0() {
        let p = p321();
        let rep = ode_check(&p, 0.25, 1.0, 0, &sample_xs(5)).unwrap();
        assert!(rep.max_residual < 1e-14);
        let f0 = d2::ode_f0(&p).unwrap();
        assert!(crate::blockmat::max_abs_diff(&rep.lambda, &f0) < 1e-14);
    }

    #[test]
    fn residual_small_and_lambda_s11_free() {
        let p = p321();
        let xs = sample_xs(20);
        for degree in 0..=5 {
            let a = ode_check(&p, 0.25, 1.0, degree, &xs).unwrap();
            let b = ode_check(&p, 0.5, 1.0, degree, &xs).unwrap();
            assert!(a.max_residual <= 1e-8, "degree {degree}: {}", a.max_residual);
            assert!(b.max_residual <= 1e-8, "degree {degree}: {}", b.max_residual);
            assert!(
                crate::blockmat::max_abs_diff(&a.lambda, &b.lambda) <= 1e-9,
                "lambda differs at degree {degree}"
            );
        }
    }

    #[test]
    fn lambda_matches_coefficient_balance() {
        // Λ_n = n(n-1)·F22 + n·F11 + F0 with the displayed leading blocks.
        let p = p321();
        let n = 4.0;
        let rep = ode_check(&p, 0.3, 1.0, 4, &sample_xs(6)).unwrap();
        let f22 = Block::from_row_slice(2, 2, &[0.0, 0.0, 1.0, -1.0]);
        let f11 = Block::from_row_slice(2, 2, &[0.0, 0.0, p.k + 1.0, -(p.alpha + p.beta + 3.0)]);
        let f0 = d2::ode_f0(&p).unwrap();
        let expect = f22 * (n * (n - 1.0)) + f11 * n + f0;
        assert!(crate::blockmat::max_abs_diff(&rep.lambda, &expect) < 1e-10);
    }

    #[test]
    fn s12_other_than_one_rejected() {
        let p = p321();
        match ode_check(&p, 0.25, 0.8, 2, &sample_xs(3)) {
            Err(Error::Unsupported(_)) => {}
            other => panic!("expected unsupported case, got {other:?}"),
        }
    }

    #[test]
    fn lambda_zero_entries() {
        // Rows of Λ_n: the second column is always zero by the shape of
        // F22/F11/F0.
        let p = p321();
        let rep = ode_check(&p, 0.4, 1.0, 3, &sample_xs(4)).unwrap();
        assert_abs_diff_eq!(rep.lambda[(0, 1)], 0.0, epsilon = 1e-10);
    }
}
