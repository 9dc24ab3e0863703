//! Cross-module verification suite: one entry point that runs the pipeline
//! identities end to end for a parameter triple and reports pass/fail per
//! check. The CLI `verify` subcommand is a thin wrapper over this.

use crate::blockmat::{inf_norm, max_abs_diff, truncate_dense, validate_stochastic};
use crate::darboux::{darboux_from_lu, darboux_from_ul};
use crate::factorization::{factorization_residual, lu_factorize, ul_factorize, TauStrategy};
use crate::jacobi::{self, JacobiParams};
use crate::spectral::{self, WeightSpec};
use crate::{Block, LevelBlocks, Result};

#[derive(Clone, Debug)]
pub struct VerifyCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub checks: Vec<VerifyCheck>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> VerifyCheck {
    match outcome {
        Ok((passed, detail)) => VerifyCheck { name, passed, detail },
        Err(e) => VerifyCheck {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Runs the full identity suite at the given parameter triple.
pub fn run(p: &JacobiParams, levels: usize) -> Result<VerifyReport> {
    p.validate()?;
    let chain = jacobi::tridiagonal_chain(p)?;
    let mut checks = Vec::new();

    // UL factorization with the closed-form seed and tau: residual and
    // stochasticity of both factors.
    let ul = ul_factorize(
        &chain,
        jacobi::alpha0_paper(p)?,
        &TauStrategy::JacobiPaper(*p),
        levels,
    );
    let ul = match ul {
        Ok(f) => f,
        Err(e) => {
            checks.push(VerifyCheck {
                name: "ul_factorization_residual",
                passed: false,
                detail: format!("pipeline error: {e}"),
            });
            return Ok(VerifyReport { checks });
        }
    };
    checks.push(check(
        "ul_factorization_residual",
        factorization_residual(&chain, &ul.upper, &ul.lower, levels)
            .map(|r| (r <= 1e-10, format!("max residual {r:.3e}"))),
    ));
    checks.push(check("ul_factor_stochasticity", {
        let up = validate_stochastic(&ul.upper, levels, 1e-10)?;
        let lo = validate_stochastic(&ul.lower, levels, 1e-10)?;
        Ok((
            up.passed && lo.passed,
            format!(
                "upper: min entry {:.3e}, row-sum dev {:.3e}; lower: min entry {:.3e}, row-sum dev {:.3e}",
                up.max_negative_entry, up.max_row_sum_deviation, lo.max_negative_entry, lo.max_row_sum_deviation
            ),
        ))
    }));

    // Darboux transforms of both factorizations stay stochastic.
    checks.push(check("darboux_ul_stochasticity", {
        let res = darboux_from_ul(&ul.upper, &ul.lower, levels)?;
        let rep = validate_stochastic(&res.transformed, levels, 1e-10)?;
        Ok((
            rep.passed,
            format!(
                "min entry {:.3e}, row-sum dev {:.3e}",
                rep.max_negative_entry, rep.max_row_sum_deviation
            ),
        ))
    }));
    checks.push(check("darboux_lu_stochasticity", {
        let lu = lu_factorize(&chain, &TauStrategy::JacobiPaper(*p), levels)?;
        let res = darboux_from_lu(&lu.upper, &lu.lower, levels)?;
        let rep = validate_stochastic(&res.transformed, levels, 1e-10)?;
        Ok((
            rep.passed,
            format!(
                "min entry {:.3e}, row-sum dev {:.3e}",
                rep.max_negative_entry, rep.max_row_sum_deviation
            ),
        ))
    }));

    // Orthogonality of the recurrence polynomials against the weight.
    checks.push(check("polynomial_orthogonality", {
        let w = WeightSpec::jacobi(p)?;
        let mut worst = 0.0_f64;
        for n in 0..=8 {
            let norm = spectral::chain_inner_product(&chain, &w, 0, n, n)?;
            let scale = inf_norm(&norm).max(1.0);
            for m in 0..n {
                let cross = spectral::chain_inner_product(&chain, &w, 0, n, m)?;
                worst = worst.max(cross.amax() / scale);
            }
        }
        Ok((worst <= 1e-10, format!("worst relative cross norm {worst:.3e}")))
    }));

    // Karlin-McGregor entries against truncated matrix powers.
    checks.push(check("kmcg_vs_matrix_power", {
        let w = WeightSpec::jacobi(p)?;
        let trunc = truncate_dense(&chain, 15)?;
        let mut power = trunc.clone();
        let mut worst = 0.0_f64;
        for n in 1..=6 {
            for i in 0..=3 {
                for j in 0..=3 {
                    let km = spectral::kmcg_entry(&chain, &w, n, i, j)?;
                    let blk = power.view((2 * i, 2 * j), (2, 2)).clone_owned();
                    worst = worst.max(max_abs_diff(&km, &blk));
                }
            }
            power = &power * &trunc;
        }
        Ok((worst <= 1e-8, format!("worst block deviation {worst:.3e}")))
    }));

    // Invariant measure stationarity over the leading blocks.
    checks.push(check("invariant_measure_stationarity", {
        let w = WeightSpec::jacobi(p)?;
        let worst = stationarity_residual(&chain, &w, 8, 15)?;
        Ok((worst <= 1e-8, format!("worst block residual {worst:.3e}")))
    }));

    // LU factors of the chain equal the distinguished UL factor blocks at alpha+1.
    checks.push(check("lu_alpha_shift_identity", {
        let lu = lu_factorize(&chain, &TauStrategy::JacobiPaper(*p), levels)?;
        let shifted = p.shifted_alpha(1.0);
        let mut worst = 0.0_f64;
        for n in 0..levels {
            let f = jacobi::paper_factors(&shifted, n)?;
            let LevelBlocks::Upper { y, x } = lu.upper.level(n)? else { unreachable!() };
            worst = worst.max(max_abs_diff(&x, &f.x)).max(max_abs_diff(&y, &f.y));
            let LevelBlocks::Lower { r, s } = lu.lower.level(n)? else { unreachable!() };
            worst = worst.max(max_abs_diff(&s, &f.s));
            if let Some(r) = r {
                worst = worst.max(max_abs_diff(&r, &f.r));
            }
        }
        Ok((worst <= 1e-10, format!("worst entry deviation {worst:.3e}")))
    }));

    // Second-order ODE for the transformed polynomials, coefficients
    // independent of s11.
    checks.push(check("ode_bispectrality", {
        if p.d != 2 {
            Ok((false, "d = 2 only".into()))
        } else {
            let xs: Vec<f64> = (1..=20).map(|i| i as f64 / 21.0).collect();
            let mut worst = 0.0_f64;
            let mut lambda_dev = 0.0_f64;
            for degree in 0..=5 {
                let a = jacobi::ode_check(p, 0.25, 1.0, degree, &xs)?;
                let b = jacobi::ode_check(p, 0.5, 1.0, degree, &xs)?;
                worst = worst.max(a.max_residual).max(b.max_residual);
                lambda_dev = lambda_dev.max(max_abs_diff(&a.lambda, &b.lambda));
            }
            Ok((
                worst <= 1e-8 && lambda_dev <= 1e-9,
                format!("worst residual {worst:.3e}, lambda deviation {lambda_dev:.3e}"),
            ))
        }
    }));

    Ok(VerifyReport { checks })
}

/// Per-block stationarity deviations `‖(πP - π)_m‖∞` for `m < m_blocks`,
/// with π computed to `truncation` blocks.
pub fn stationarity_residuals(
    chain: &crate::BlockSequence,
    w: &WeightSpec,
    m_blocks: usize,
    truncation: usize,
) -> Result<Vec<f64>> {
    let pi = spectral::invariant_measure(chain, w, truncation)?;
    let d = chain.d();
    let mut out = Vec::with_capacity(m_blocks);
    for m in 0..m_blocks {
        // (pi P)_m = pi_{m-1} A_{m-1} + pi_m B_m + pi_{m+1} C_{m+1}
        let mut acc = vec![0.0; d];
        let LevelBlocks::Tri { b, .. } = chain.level(m)? else { unreachable!() };
        add_row_vec(&mut acc, &pi[m], &b);
        if m >= 1 {
            let LevelBlocks::Tri { a, .. } = chain.level(m - 1)? else { unreachable!() };
            add_row_vec(&mut acc, &pi[m - 1], &a);
        }
        let LevelBlocks::Tri { c, .. } = chain.level(m + 1)? else { unreachable!() };
        add_row_vec(&mut acc, &pi[m + 1], &c.expect("level >= 1 has a sub-diagonal block"));
        let mut worst = 0.0_f64;
        for (i, v) in acc.iter().enumerate() {
            worst = worst.max((v - pi[m][i]).abs());
        }
        out.push(worst);
    }
    Ok(out)
}

/// `max over blocks m < m_blocks of ‖(πP - π)_m‖∞`.
pub fn stationarity_residual(
    chain: &crate::BlockSequence,
    w: &WeightSpec,
    m_blocks: usize,
    truncation: usize,
) -> Result<f64> {
    Ok(stationarity_residuals(chain, w, m_blocks, truncation)?
        .into_iter()
        .fold(0.0, f64::max))
}

fn add_row_vec(acc: &mut [f64], row: &[f64], block: &Block) {
    for j in 0..acc.len() {
        for (i, r) in row.iter().enumerate() {
            acc[j] += r * block[(i, j)];
        }
    }
}
