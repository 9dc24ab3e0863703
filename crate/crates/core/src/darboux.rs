//! Discrete Darboux transformations: reverse the order of a stochastic
//! factor pair to obtain a new QBD chain.
//!
//! `P = P_U P_L` gives `P̃ = P_L P_U` and `P = P̃_L P̃_U` gives
//! `P̂ = P̃_U P̃_L`. Both are plain banded products through
//! [`multiply_banded`]; the closed-form block expressions are exercised in
//! the tests, not duplicated as a second code path.

use crate::blockmat::{multiply_banded, Band, BlockSequence};
use crate::error::Error;
use crate::Result;

/// Which factorization the transform reversed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DarbouxSource {
    FromUl,
    FromLu,
}

#[derive(Clone, Debug)]
pub struct DarbouxResult {
    pub transformed: BlockSequence,
    pub source: DarbouxSource,
}

/// `P̃ = P_L P_U` over `n_levels` levels:
/// `Ã_n = S_n X_n`, `B̃_n = R_n X_{n-1} + S_n Y_n`, `C̃_n = R_n Y_{n-1}`.
pub fn darboux_from_ul(p_u: &BlockSequence, p_l: &BlockSequence, n_levels: usize) -> Result<DarbouxResult> {
    if p_u.band() != Band::UpperBidiagonal || p_l.band() != Band::LowerBidiagonal {
        return Err(Error::BandMismatch(
            "darboux_from_ul needs the (upper, lower) pair of a UL factorization".into(),
        ));
    }
    Ok(DarbouxResult {
        transformed: multiply_banded(p_l, p_u, n_levels)?,
        source: DarbouxSource::FromUl,
    })
}

/// `P̂ = P̃_U P̃_L` over `n_levels` levels:
/// `Â_n = X̃_n S̃_{n+1}`, `B̂_n = X̃_n R̃_{n+1} + Ỹ_n S̃_n`, `Ĉ_n = Ỹ_n R̃_n`.
pub fn darboux_from_lu(p_ut: &BlockSequence, p_lt: &BlockSequence, n_levels: usize) -> Result<DarbouxResult> {
    if p_ut.band() != Band::UpperBidiagonal || p_lt.band() != Band::LowerBidiagonal {
        return Err(Error::BandMismatch(
            "darboux_from_lu needs the (upper, lower) pair of a LU factorization".into(),
        ));
    }
    Ok(DarbouxResult {
        transformed: multiply_banded(p_ut, p_lt, n_levels)?,
        source: DarbouxSource::FromLu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockmat::{validate_stochastic, Block, LevelBlocks};

    fn scalar_upper(y: f64) -> BlockSequence {
        BlockSequence::from_fn(1, Band::UpperBidiagonal, move |_| {
            Ok(LevelBlocks::Upper {
                y: Block::from_element(1, 1, y),
                x: Block::from_element(1, 1, 1.0 - y),
            })
        })
    }

    fn scalar_lower(r: f64) -> BlockSequence {
        BlockSequence::from_fn(1, Band::LowerBidiagonal, move |n| {
            Ok(LevelBlocks::Lower {
                r: (n > 0).then(|| Block::from_element(1, 1, r)),
                s: Block::from_element(1, 1, if n == 0 { 1.0 } else { 1.0 - r }),
            })
        })
    }

    #[test]
    fn scalar_level_zero_blocks() {
        let res = darboux_from_ul(&scalar_upper(0.5), &scalar_lower(0.5), 4).unwrap();
        let LevelBlocks::Tri { c, b, a } = res.transformed.level(0).unwrap() else { panic!() };
        assert!(c.is_none());
        assert_eq!(b[(0, 0)], 0.5); // S0 Y0
        assert_eq!(a[(0, 0)], 0.5); // S0 X0
        assert_eq!(res.source, DarbouxSource::FromUl);
    }

    #[test]
    fn stochasticity_is_preserved() {
        let res = darboux_from_ul(&scalar_upper(0.3), &scalar_lower(0.6), 12).unwrap();
        let rep = validate_stochastic(&res.transformed, 12, 1e-12).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn degenerate_x_identity_shifts_structure() {
        // X_n = I, Y_n = 0: P̃ level n has Ã_n = S_n, B̃_n = R_n, C̃_n = 0.
        let upper = BlockSequence::from_fn(1, Band::UpperBidiagonal, |_| {
            Ok(LevelBlocks::Upper {
                y: Block::zeros(1, 1),
                x: Block::identity(1, 1),
            })
        });
        let lower = scalar_lower(0.4);
        let res = darboux_from_ul(&upper, &lower, 6).unwrap();
        for n in 1..6 {
            let LevelBlocks::Tri { c, b, a } = res.transformed.level(n).unwrap() else { panic!() };
            assert_eq!(a[(0, 0)], 0.6); // S_n
            assert_eq!(b[(0, 0)], 0.4); // R_n X_{n-1}
            assert_eq!(c.unwrap()[(0, 0)], 0.0);
        }
    }

    #[test]
    fn zero_y_gives_pure_birth_output() {
        let upper = BlockSequence::from_fn(1, Band::UpperBidiagonal, |_| {
            Ok(LevelBlocks::Upper {
                y: Block::zeros(1, 1),
                x: Block::identity(1, 1),
            })
        });
        let res = darboux_from_lu(&upper, &scalar_lower(0.4), 6).unwrap();
        for n in 1..5 {
            let LevelBlocks::Tri { c, .. } = res.transformed.level(n).unwrap() else { panic!() };
            assert_eq!(c.unwrap()[(0, 0)], 0.0); // Ĉ_n = Ỹ_n R̃_n = 0
        }
    }

    #[test]
    fn band_mismatch_rejected() {
        let u = scalar_upper(0.5);
        assert!(matches!(
            darboux_from_ul(&u, &u, 3),
            Err(Error::BandMismatch(_))
        ));
    }
}
