//! Parameter-region analysis for the `d=2` seed families.
//!
//! `analytic_inside` evaluates the closed-form inequalities; the stochastic
//! flag runs the actual factorization pipeline (case α_0, lower-triangular τ)
//! and scans all factor entries for nonnegativity up to a finite level
//! horizon. The closed-form regions hold for all levels, so finite scans can
//! only disagree near the boundary.

use rayon::prelude::*;

use super::{d2, geronimus_mass, moments_d2, tridiagonal_chain, JacobiParams, MomentPair};
use crate::blockmat::Block;
use crate::error::Error;
use crate::factorization::{monic_reduce, ul_coefficients, Coefficients, MonicData};
use crate::Result;

/// Entry tolerance for the finite positivity scan.
const REGION_TOL: f64 = 1e-9;

/// Which seed family and which point of its parameter plane.
#[derive(Clone, Copy, Debug)]
pub enum RegionCase {
    Case1 { s21: f64, s11: f64 },
    Case2a { s11: f64, s12: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct RegionQuery {
    pub case: RegionCase,
    /// Positivity horizon: factor levels `0..=n_check` are scanned.
    pub n_check: usize,
}

#[derive(Clone, Debug)]
pub struct RegionResult {
    pub analytic_inside: bool,
    pub stochastic_factorization: bool,
    /// Geronimus mass PSD flag; `None` where the case carries no PSD claim
    /// (case 2) or the moments do not exist.
    pub m_psd: Option<bool>,
    /// Why the pipeline stopped, when it did (reported as outside).
    pub failure: Option<String>,
}

/// Evaluates one region query against a fresh factorization pipeline.
pub fn region_membership(p: &JacobiParams, q: &RegionQuery) -> Result<RegionResult> {
    p.validate()?;
    if p.d != 2 {
        return Err(Error::InvalidParameter("region analysis is a d = 2 construction".into()));
    }
    if q.n_check < 1 {
        return Err(Error::InvalidParameter("n_check must be at least 1".into()));
    }
    let chain = tridiagonal_chain(p)?;
    let monic = monic_reduce(&chain, q.n_check + 2)?;
    let moments = moments_d2(p).ok();
    evaluate(p, &monic, moments.as_ref(), &q.case, q.n_check)
}

fn evaluate(
    p: &JacobiParams,
    monic: &MonicData,
    moments: Option<&MomentPair>,
    case: &RegionCase,
    n_check: usize,
) -> Result<RegionResult> {
    let (alpha0, analytic_inside, m_psd) = match *case {
        RegionCase::Case1 { s21, s11 } => {
            let a0 = d2::alpha0_case1(p, s21, s11)?;
            let psd = moments.map(|mom| {
                geronimus_mass(&a0, mom)
                    .map(|gm| gm.positive_semidefinite)
                    .unwrap_or(false)
            });
            (a0, d2::case1_inside(p, s21, s11)?, psd)
        }
        RegionCase::Case2a { s11, s12 } => {
            let a0 = d2::alpha0_case2a(p, s11, s12)?;
            (a0, d2::case2a_inside(p, s11, s12)?, None)
        }
    };
    let (stochastic_factorization, failure) = stochastic_scan(monic, &alpha0, n_check);
    Ok(RegionResult {
        analytic_inside,
        stochastic_factorization,
        m_psd,
        failure,
    })
}

/// Runs the UL pipeline for one seed and scans factor entries level by
/// level up to the horizon, stopping at the first violation (most grid
/// points fail within a few levels). Every pipeline failure counts as
/// outside the region.
fn stochastic_scan(monic: &MonicData, alpha0: &Block, n_check: usize) -> (bool, Option<String>) {
    use crate::blockmat::checked_inverse;
    use crate::factorization::{solve_level_system, tau_row_target};

    let d = monic.d();
    let nonneg = |b: &Block| b.iter().all(|v| *v >= -REGION_TOL);
    let run = || -> Result<Option<usize>> {
        let coeffs = ul_coefficients(monic, alpha0)?;
        let t0 = tau_row_target(Coefficients::Ul(&coeffs), monic, 0)?;
        // work with T_n = L_n τ_n throughout (all O(1))
        let mut t_cur = solve_level_system(coeffs.g(0), &t0, d, 0)?;
        for n in 0..=n_check {
            let target = tau_row_target(Coefficients::Ul(&coeffs), monic, n + 1)?;
            let sys = coeffs.g(n + 1) * monic.l(n + 1);
            let tau_next = solve_level_system(&sys, &target, d, n + 1)?;
            let t_next = monic.l(n + 1) * tau_next;
            let s = checked_inverse(&t_cur, &format!("tau_{n}"))?;
            let x = monic.a(n) * &t_next;
            let y = coeffs.g(n) * &t_cur;
            let ok = nonneg(&x) && nonneg(&y) && nonneg(&s) && {
                n == 0 || nonneg(&(&s * coeffs.h(n)))
            };
            if !ok {
                return Ok(Some(n));
            }
            t_cur = t_next;
        }
        Ok(None)
    };
    match run() {
        Ok(None) => (true, None),
        Ok(Some(level)) => (false, Some(format!("factor entry negative at level {level}"))),
        Err(e) => (false, Some(e.to_string())),
    }
}

/// Case selector for grid scans.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegionCaseKind {
    Case1,
    Case2a,
}

/// One scanned grid point; `s_a`/`s_b` are `(s21, s11)` for case 1 and
/// `(s11, s12)` for case 2(a).
#[derive(Clone, Debug)]
pub struct RegionRow {
    pub s_a: f64,
    pub s_b: f64,
    pub result: RegionResult,
}

/// Default scan rectangle, sized to frame the analytic region.
pub fn default_scan_bounds(p: &JacobiParams, kind: RegionCaseKind) -> Result<(f64, f64)> {
    match kind {
        RegionCaseKind::Case1 => {
            let s21_max = d2::case1_s21_bound(p)?;
            let s11_max = d2::case1_s11_stochastic_bound(p, s21_max)?;
            Ok((1.25 * s21_max, 1.25 * s11_max))
        }
        RegionCaseKind::Case2a => Ok((1.2, 1.2)),
    }
}

/// Scans a `grid × grid` lattice over `(0, s_a_max] × (0, s_b_max]`,
/// row-major over `s_a` then `s_b`. Grid points are evaluated in parallel;
/// the output order is fixed by the grid index.
pub fn region_scan(
    p: &JacobiParams,
    kind: RegionCaseKind,
    grid: usize,
    n_check: usize,
    s_a_max: f64,
    s_b_max: f64,
) -> Result<Vec<RegionRow>> {
    p.validate()?;
    if p.d != 2 {
        return Err(Error::InvalidParameter("region analysis is a d = 2 construction".into()));
    }
    let bad_bound = |v: f64| !v.is_finite() || v <= 0.0;
    if grid < 2 || n_check < 1 || bad_bound(s_a_max) || bad_bound(s_b_max) {
        return Err(Error::InvalidParameter(
            "region scan needs grid >= 2, n_check >= 1 and positive bounds".into(),
        ));
    }
    let chain = tridiagonal_chain(p)?;
    let monic = monic_reduce(&chain, n_check + 2)?;
    let moments = moments_d2(p).ok();
    (0..grid * grid)
        .into_par_iter()
        .map(|idx| {
            let i = idx / grid;
            let j = idx % grid;
            let s_a = s_a_max * (i + 1) as f64 / grid as f64;
            let s_b = s_b_max * (j + 1) as f64 / grid as f64;
            let case = match kind {
                RegionCaseKind::Case1 => RegionCase::Case1 { s21: s_a, s11: s_b },
                RegionCaseKind::Case2a => RegionCase::Case2a { s11: s_a, s12: s_b },
            };
            let result = evaluate(p, &monic, moments.as_ref(), &case, n_check)?;
            Ok(RegionRow { s_a, s_b, result })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p321() -> JacobiParams {
        JacobiParams::new(3.0, 2.0, 1.0, 2).unwrap()
    }

    #[test]
    fn membership_inside_and_outside() {
        let p = p321();
        let inside = region_membership(
            &p,
            &RegionQuery {
                case: RegionCase::Case1 {
                    s21: 1.0 / 12.0,
                    s11: 1.0 / 6.0,
                },
                n_check: 30,
            },
        )
        .unwrap();
        assert!(inside.analytic_inside);
        assert!(inside.stochastic_factorization, "{:?}", inside.failure);
        assert_eq!(inside.m_psd, Some(true));

        let outside = region_membership(
            &p,
            &RegionQuery {
                case: RegionCase::Case1 { s21: 0.2, s11: 1.9 },
                n_check: 30,
            },
        )
        .unwrap();
        assert!(!outside.analytic_inside);
        assert!(!outside.stochastic_factorization);
    }

    #[test]
    fn case2a_membership_at_corner() {
        let p122 = JacobiParams::new(1.0, 2.0, 2.0, 2).unwrap();
        let r = region_membership(
            &p122,
            &RegionQuery {
                case: RegionCase::Case2a { s11: 1.0, s12: 1.0 },
                n_check: 30,
            },
        )
        .unwrap();
        assert!(r.analytic_inside);
        assert!(r.stochastic_factorization, "{:?}", r.failure);
        assert_eq!(r.m_psd, None);
    }

    #[test]
    fn scan_orders_rows_by_grid_index() {
        let p = p321();
        let rows = region_scan(&p, RegionCaseKind::Case1, 4, 5, 0.1, 1.4).unwrap();
        assert_eq!(rows.len(), 16);
        assert!(rows[0].s_a < rows[15].s_a);
        assert_eq!(rows[0].s_a, rows[3].s_a);
        assert!(rows[0].s_b < rows[3].s_b);
    }
}
