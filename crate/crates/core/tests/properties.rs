//! Property tests for the block-matrix algebra: stochasticity of banded
//! products, finite-section consistency, and inverse round trips.

use proptest::prelude::*;

use qbd::blockmat::{
    max_abs_diff, multiply_banded, small_inverse, truncate_dense, validate_stochastic, Band, Block,
    BlockSequence, LevelBlocks,
};
use qbd::jacobi::{self, JacobiParams};

const LEVELS: usize = 7;

/// Row-stochastic `[Y | X]` pairs per level.
fn upper_levels(d: usize) -> impl Strategy<Value = Vec<(Vec<f64>, Vec<f64>)>> {
    let row = prop::collection::vec(0.05f64..1.0, 2 * d);
    let level = prop::collection::vec(row, d).prop_map(move |rows| {
        let mut y = vec![0.0; d * d];
        let mut x = vec![0.0; d * d];
        for (i, r) in rows.iter().enumerate() {
            let sum: f64 = r.iter().sum();
            for j in 0..d {
                y[i * d + j] = r[j] / sum;
                x[i * d + j] = r[d + j] / sum;
            }
        }
        (y, x)
    });
    prop::collection::vec(level, LEVELS + 1)
}

/// Row-stochastic `[R | S]` pairs per level (`R_0` empty, `S_0` stochastic).
fn lower_levels(d: usize) -> impl Strategy<Value = Vec<(Vec<f64>, Vec<f64>)>> {
    let row = prop::collection::vec(0.05f64..1.0, 2 * d);
    let level = prop::collection::vec(row, d).prop_map(move |rows| {
        let mut r = vec![0.0; d * d];
        let mut s = vec![0.0; d * d];
        for (i, row) in rows.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            for j in 0..d {
                r[i * d + j] = row[j] / sum;
                s[i * d + j] = row[d + j] / sum;
            }
        }
        (r, s)
    });
    prop::collection::vec(level, LEVELS + 1)
}

fn upper_seq(d: usize, levels: Vec<(Vec<f64>, Vec<f64>)>) -> BlockSequence {
    BlockSequence::from_fn(d, Band::UpperBidiagonal, move |n| {
        let (y, x) = &levels[n];
        Ok(LevelBlocks::Upper {
            y: Block::from_row_slice(d, d, y),
            x: Block::from_row_slice(d, d, x),
        })
    })
}

fn lower_seq(d: usize, levels: Vec<(Vec<f64>, Vec<f64>)>) -> BlockSequence {
    BlockSequence::from_fn(d, Band::LowerBidiagonal, move |n| {
        let (r, s) = &levels[n];
        Ok(if n == 0 {
            // fold the sub-diagonal mass into the diagonal so S_0 is stochastic
            let rs: Vec<f64> = r.iter().zip(s).map(|(a, b)| a + b).collect();
            LevelBlocks::Lower {
                r: None,
                s: Block::from_row_slice(d, d, &rs),
            }
        } else {
            LevelBlocks::Lower {
                r: Some(Block::from_row_slice(d, d, r)),
                s: Block::from_row_slice(d, d, s),
            }
        })
    })
}

proptest! {
    /// Product of stochastic bidiagonal factors is stochastic, in both
    /// multiplication orders.
    #[test]
    fn stochastic_products_stay_stochastic(
        d in 1usize..4,
        ups in upper_levels(3),
        los in lower_levels(3),
    ) {
        let cut = |levels: &Vec<(Vec<f64>, Vec<f64>)>| -> Vec<(Vec<f64>, Vec<f64>)> {
            levels
                .iter()
                .map(|(a, b)| {
                    // reshape leading d*d entries of the generated 3x3 data
                    let take = |v: &Vec<f64>| {
                        let mut out = vec![0.0; d * d];
                        for i in 0..d {
                            for j in 0..d {
                                out[i * d + j] = v[i * 3 + j];
                            }
                        }
                        out
                    };
                    (take(a), take(b))
                })
                .collect()
        };
        // renormalize rows after cutting to d columns
        let renorm = |levels: Vec<(Vec<f64>, Vec<f64>)>| -> Vec<(Vec<f64>, Vec<f64>)> {
            levels
                .into_iter()
                .map(|(a, b)| {
                    let mut a = a;
                    let mut b = b;
                    for i in 0..d {
                        let sum: f64 = (0..d).map(|j| a[i * d + j] + b[i * d + j]).sum();
                        for j in 0..d {
                            a[i * d + j] /= sum;
                            b[i * d + j] /= sum;
                        }
                    }
                    (a, b)
                })
                .collect()
        };
        let upper = upper_seq(d, renorm(cut(&ups)));
        let lower = lower_seq(d, renorm(cut(&los)));

        let ul = multiply_banded(&upper, &lower, LEVELS - 1).unwrap();
        let rep = validate_stochastic(&ul, LEVELS - 1, 1e-12).unwrap();
        prop_assert!(rep.passed, "{rep:?}");

        let lu = multiply_banded(&lower, &upper, LEVELS - 1).unwrap();
        let rep = validate_stochastic(&lu, LEVELS - 1, 1e-12).unwrap();
        prop_assert!(rep.passed, "{rep:?}");
    }

    /// Finite sections are consistent: the truncated product agrees with the
    /// product of truncations on the leading block rows.
    #[test]
    fn finite_section_consistency(
        ups in upper_levels(2),
        los in lower_levels(2),
    ) {
        let d = 2;
        let n = LEVELS - 1;
        let upper = upper_seq(d, ups);
        let lower = lower_seq(d, los);
        let prod = multiply_banded(&upper, &lower, n).unwrap();
        let lhs = truncate_dense(&prod, n - 1).unwrap();
        let full = truncate_dense(&upper, n).unwrap() * truncate_dense(&lower, n).unwrap();
        let rhs = full.view((0, 0), ((n - 1) * d, (n - 1) * d)).clone_owned();
        prop_assert!(max_abs_diff(&lhs, &rhs) <= 1e-13);
    }

    /// Scalar UL factorization matches the brute-force one-parameter family
    /// across random stochastic chains and admissible seeds.
    #[test]
    fn scalar_ul_brute_force_equivalence(
        b0 in 0.2f64..0.8,
        cs in prop::collection::vec((0.1f64..0.4, 0.2f64..0.6), 12),
        y0 in 0.05f64..0.6,
    ) {
        prop_assume!(y0 < b0 - 0.05); // keep r_1 = (B0 - y0)/x0 clearly positive
        let levels: Vec<(f64, f64, f64)> = cs
            .iter()
            .map(|(c, b)| (*c, *b, 1.0 - c - b))
            .collect();
        let chain = BlockSequence::from_fn(1, Band::Tridiagonal, move |n| {
            let (c, b, a) = if n == 0 { (0.0, b0, 1.0 - b0) } else { levels[n] };
            Ok(LevelBlocks::Tri {
                c: (n > 0).then(|| Block::from_element(1, 1, c)),
                b: Block::from_element(1, 1, b),
                a: Block::from_element(1, 1, a),
            })
        });
        let n = 8usize;
        // brute-force oracle first; skip draws whose trajectory passes near a
        // singularity of the recursion (both routes lose accuracy there)
        let mut ys = vec![y0];
        let mut ss = vec![1.0];
        let mut rs = vec![0.0];
        let mut xs = Vec::new();
        for lvl in 0..n {
            let LevelBlocks::Tri { b, .. } = chain.level(lvl).unwrap() else { unreachable!() };
            let y = ys[lvl];
            let x = 1.0 - y;
            xs.push(x);
            let r = (b[(0, 0)] - y * ss[lvl]) / x;
            rs.push(r);
            ss.push(1.0 - r);
            let LevelBlocks::Tri { c, .. } = chain.level(lvl + 1).unwrap() else { unreachable!() };
            ys.push(c.unwrap()[(0, 0)] / r);
        }
        let conditioned = xs.iter().chain(ys.iter()).chain(ss[1..].iter()).chain(rs[1..].iter())
            .all(|v| v.abs() >= 0.03 && v.abs() <= 30.0);
        prop_assume!(conditioned);
        let fac = qbd::factorization::ul_factorize(
            &chain,
            Block::from_element(1, 1, y0),
            &qbd::factorization::TauStrategy::LowerTriangularYUpper,
            n,
        );
        let fac = match fac {
            Ok(f) => f,
            Err(_) => return Ok(()),
        };
        for lvl in 0..n {
            let LevelBlocks::Upper { y, x } = fac.upper.level(lvl).unwrap() else { unreachable!() };
            prop_assert!((x[(0, 0)] - xs[lvl]).abs() <= 1e-9);
            prop_assert!((y[(0, 0)] - ys[lvl]).abs() <= 1e-9);
            let LevelBlocks::Lower { r, s } = fac.lower.level(lvl).unwrap() else { unreachable!() };
            prop_assert!((s[(0, 0)] - ss[lvl]).abs() <= 1e-9);
            if let Some(r) = r {
                prop_assert!((r[(0, 0)] - rs[lvl]).abs() <= 1e-9);
            }
        }
    }

    /// Local coefficient sums are 1 across random valid parameter triples.
    #[test]
    fn local_coefficient_sums(
        alpha in -0.9f64..8.0,
        beta in -0.9f64..8.0,
        kfrac in 0.05f64..0.95,
        d in 1usize..5,
        n in 0usize..60,
    ) {
        let k = kfrac * (beta + 1.0);
        prop_assume!(k > 0.0);
        let p = JacobiParams::new(alpha, beta, k, d).unwrap();
        for i in 0..d {
            let c = jacobi::local_coefficients(&p, i, n).unwrap();
            prop_assert!((c.a1 + c.a2 + c.a3 - 1.0).abs() <= 1e-13);
            prop_assert!((c.b1 + c.b2 + c.b3 - 1.0).abs() <= 1e-13);
        }
    }

    /// Inverse round trip on well-conditioned small blocks.
    #[test]
    fn small_inverse_involution(entries in prop::collection::vec(-1.0f64..1.0, 9)) {
        let m = Block::from_row_slice(3, 3, &entries);
        // keep clearly nonsingular inputs only
        prop_assume!(m.determinant().abs() > 0.05);
        let inv = small_inverse(&m).unwrap();
        let back = small_inverse(&inv).unwrap();
        prop_assert!(max_abs_diff(&back, &m) <= 1e-10);
        let id = &m * &inv;
        prop_assert!(max_abs_diff(&id, &Block::identity(3, 3)) <= 1e-12 * qbd::blockmat::inf_norm(&m).max(1.0));
    }
}
