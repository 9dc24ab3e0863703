//! Stochastic UL and LU block factorization of a block tridiagonal
//! stochastic matrix.
//!
//! The route is the monic one: conjugate `P = L J L⁻¹` with
//! `L_n = (A_0···A_{n-1})⁻¹` so the super-diagonal blocks of `J` become
//! identities, factor `J` into bidiagonal factors through the `α_n/β_n`
//! recursion (UL keeps a free matrix seed `α_0`, LU is unique), then restore
//! stochastic row sums with a block diagonal `τ_n`:
//!
//! ```text
//! UL:  X_n = L_n τ_{n+1}   Y_n = L_n α_n τ_n   S_n = τ_n⁻¹ L_n⁻¹   R_{n+1} = τ_{n+1}⁻¹ β_{n+1} L_n⁻¹
//! LU:  X̃_n = τ̃_n⁻¹ L_{n+1}⁻¹   Ỹ_n = τ̃_n⁻¹ α̃_n L_n⁻¹   S̃_n = L_n τ̃_n   R̃_{n+1} = L_{n+1} β̃_{n+1} τ̃_n
//! ```
//!
//! Row sums are solved for, entry nonnegativity is not: assembly never
//! enforces it and callers validate the factors afterwards with
//! [`crate::blockmat::validate_stochastic`].
//!
//! Numerically the recursions run in the factor frame
//! (`G_n = L_n α_n L_n⁻¹`, `H_n = L_n β_n L_{n-1}⁻¹`, and the LU analogs),
//! where every quantity is O(1) and the inputs are the chain blocks
//! themselves: `G_{n+1} = C_{n+1} (A_n⁻¹(B_n - G_n))⁻¹ ... ` collapses to
//! `H_{n+1} = A_n⁻¹(B_n - G_n)`, `G_{n+1} = C_{n+1} H_{n+1}⁻¹`. The monic
//! frame conjugates by `L_n`, whose condition number grows with the level
//! and amplifies rounding; the `alpha`/`beta` accessors expose the monic
//! coefficients as derived views.

use nalgebra::{DMatrix, DVector};

use crate::blockmat::{checked_inverse, ones, Band, Block, BlockSequence, LevelBlocks};
use crate::error::Error;
use crate::jacobi::JacobiParams;
use crate::Result;

/// Tolerance for user-supplied τ sequences against the row-sum equations.
pub const TAU_ROW_SUM_TOL: f64 = 1e-10;

/// Monic reduction data: `L_n`, their inverses, and the monic blocks
/// `B̂_n = L_n⁻¹ B_n L_n`, `Ĉ_n = L_n⁻¹ C_n A_{n-1} L_n`.
#[derive(Clone, Debug)]
pub struct MonicData {
    d: usize,
    l: Vec<Block>,
    l_inv: Vec<Block>,
    bhat: Vec<Block>,
    chat: Vec<Block>, // index 0 is an unused zero placeholder
    a: Vec<Block>,
    b: Vec<Block>,
    c: Vec<Block>, // index 0 is an unused zero placeholder
}

impl MonicData {
    /// Number of monic diagonal blocks (`B̂_0..B̂_{levels-1}`); `L` runs one
    /// index further.
    pub fn levels(&self) -> usize {
        self.bhat.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `L_n`, valid for `n <= levels()`.
    pub fn l(&self, n: usize) -> &Block {
        &self.l[n]
    }

    /// `L_n⁻¹`, valid for `n <= levels()`.
    pub fn l_inv(&self, n: usize) -> &Block {
        &self.l_inv[n]
    }

    /// `B̂_n`, valid for `n < levels()`.
    pub fn bhat(&self, n: usize) -> &Block {
        &self.bhat[n]
    }

    /// `Ĉ_n`, valid for `1 <= n < levels()`.
    pub fn chat(&self, n: usize) -> &Block {
        debug_assert!(n >= 1);
        &self.chat[n]
    }

    /// Chain block `A_n`, valid for `n < levels()`.
    pub fn a(&self, n: usize) -> &Block {
        &self.a[n]
    }

    /// Chain block `B_n`, valid for `n < levels()`.
    pub fn b(&self, n: usize) -> &Block {
        &self.b[n]
    }

    /// Chain block `C_n`, valid for `1 <= n < levels()`.
    pub fn c(&self, n: usize) -> &Block {
        debug_assert!(n >= 1);
        &self.c[n]
    }
}

/// Computes the monic reduction of a tridiagonal sequence over
/// `levels` levels (`L` up to index `levels`).
pub fn monic_reduce(p: &BlockSequence, levels: usize) -> Result<MonicData> {
    if p.band() != Band::Tridiagonal {
        return Err(Error::BandMismatch("monic reduction needs a tridiagonal sequence".into()));
    }
    if levels == 0 {
        return Err(Error::InvalidParameter("monic reduction needs at least one level".into()));
    }
    let d = p.d();
    let mut l = Vec::with_capacity(levels + 1);
    let mut l_inv = Vec::with_capacity(levels + 1);
    let mut bhat = Vec::with_capacity(levels);
    let mut chat = vec![Block::zeros(d, d)];
    let mut orig_a = Vec::with_capacity(levels);
    let mut orig_b = Vec::with_capacity(levels);
    let mut orig_c = vec![Block::zeros(d, d)];
    l.push(Block::identity(d, d));
    l_inv.push(Block::identity(d, d));
    for n in 0..levels {
        let LevelBlocks::Tri { c, b, a } = p.level(n)? else { unreachable!() };
        bhat.push(&l_inv[n] * &b * &l[n]);
        if n >= 1 {
            let c = c.ok_or_else(|| Error::Generator {
                level: n,
                reason: "missing sub-diagonal block".into(),
            })?;
            // Ĉ_n = L_n⁻¹ C_n L_{n-1}
            chat.push(&l_inv[n] * &c * &l[n - 1]);
            orig_c.push(c);
        }
        let a_inv = checked_inverse(&a, &format!("A_{n}"))?;
        l.push(&a_inv * &l[n]);
        l_inv.push(&l_inv[n] * &a);
        orig_a.push(a);
        orig_b.push(b);
    }
    Ok(MonicData {
        d,
        l,
        l_inv,
        bhat,
        chat,
        a: orig_a,
        b: orig_b,
        c: orig_c,
    })
}

/// UL coefficients of the monic factorization `J = α·β`:
/// `B̂_n = β_{n+1} + α_n`, `Ĉ_n = α_n β_n`, seeded by the free `α_0`.
#[derive(Clone, Debug)]
pub struct UlCoefficients {
    alpha: Vec<Block>, // α_0..α_{levels-1}
    beta: Vec<Block>,  // β_1..β_levels at indices 1..=levels; index 0 unused
    g: Vec<Block>,     // G_n = L_n α_n L_n⁻¹
    h: Vec<Block>,     // H_n = L_n β_n L_{n-1}⁻¹; index 0 unused
}

impl UlCoefficients {
    /// Number of α blocks; β runs one index further.
    pub fn levels(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self, n: usize) -> &Block {
        &self.alpha[n]
    }

    /// `β_n`, valid for `1 <= n <= levels()`.
    pub fn beta(&self, n: usize) -> &Block {
        debug_assert!(n >= 1);
        &self.beta[n]
    }

    /// Factor-frame `G_n = L_n α_n L_n⁻¹` (the level-`n` `Y/τ` kernel).
    pub(crate) fn g(&self, n: usize) -> &Block {
        &self.g[n]
    }

    /// Factor-frame `H_n = L_n β_n L_{n-1}⁻¹`, valid for `1 <= n <= levels()`.
    pub(crate) fn h(&self, n: usize) -> &Block {
        debug_assert!(n >= 1);
        &self.h[n]
    }
}

/// Runs the UL recursion `β_{n+1} = B̂_n - α_n`, `α_{n+1} = Ĉ_{n+1} β_{n+1}⁻¹`
/// to the full depth of `monic`, computed in the factor frame
/// (`H_{n+1} = A_n⁻¹(B_n - G_n)`, `G_{n+1} = C_{n+1} H_{n+1}⁻¹`).
///
/// Fails when the invertibility chain breaks, naming the offending matrix.
pub fn ul_coefficients(monic: &MonicData, alpha0: &Block) -> Result<UlCoefficients> {
    let levels = monic.levels();
    let d = monic.d();
    if alpha0.nrows() != d || alpha0.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "alpha0 is {}x{}, chain has d={}",
            alpha0.nrows(),
            alpha0.ncols(),
            d
        )));
    }
    let mut g = vec![alpha0.clone()];
    let mut h = vec![Block::zeros(d, d)];
    for n in 0..levels {
        let a_inv = checked_inverse(monic.a(n), &format!("A_{n}"))?;
        let h_next = a_inv * (monic.b(n) - &g[n]);
        if n + 1 < levels {
            let h_inv =
                checked_inverse(&h_next, &format!("beta_{} (invertibility chain)", n + 1))?;
            g.push(monic.c(n + 1) * &h_inv);
        }
        h.push(h_next);
    }
    // monic-frame views α_n = L_n⁻¹ G_n L_n, β_n = L_n⁻¹ H_n L_{n-1}
    let alpha = (0..g.len()).map(|n| monic.l_inv(n) * &g[n] * monic.l(n)).collect();
    let beta = (0..h.len())
        .map(|n| {
            if n == 0 {
                Block::zeros(d, d)
            } else {
                monic.l_inv(n) * &h[n] * monic.l(n - 1)
            }
        })
        .collect();
    Ok(UlCoefficients { alpha, beta, g, h })
}

/// LU coefficients of `J = β̃·α̃`: `α̃_0 = B̂_0`, `β̃_n = Ĉ_n α̃_{n-1}⁻¹`,
/// `α̃_n = B̂_n - β̃_n`. Unique; no free seed.
#[derive(Clone, Debug)]
pub struct LuCoefficients {
    alphat: Vec<Block>, // α̃_0..α̃_{levels-1}
    betat: Vec<Block>,  // β̃_0 = 0, β̃_1..β̃_{levels-1}
    p: Vec<Block>,      // P_n = L_n α̃_n L_n⁻¹
    q: Vec<Block>,      // Q_n = L_n β̃_n L_n⁻¹; index 0 zero
}

impl LuCoefficients {
    pub fn levels(&self) -> usize {
        self.alphat.len()
    }

    pub fn alphat(&self, n: usize) -> &Block {
        &self.alphat[n]
    }

    /// `β̃_n` with `β̃_0 = 0`.
    pub fn betat(&self, n: usize) -> &Block {
        &self.betat[n]
    }

    /// Factor-frame `P_n = L_n α̃_n L_n⁻¹`.
    pub(crate) fn p(&self, n: usize) -> &Block {
        &self.p[n]
    }

    /// Factor-frame `Q_n = L_n β̃_n L_n⁻¹` (`Q_0 = 0`).
    pub(crate) fn q(&self, n: usize) -> &Block {
        &self.q[n]
    }
}

/// Runs the unique LU recursion `α̃_0 = B̂_0`, `β̃_n = Ĉ_n α̃_{n-1}⁻¹`,
/// `α̃_n = B̂_n - β̃_n`, computed in the factor frame
/// (`P_0 = B_0`, `Q_n = C_n P_{n-1}⁻¹ A_{n-1}`, `P_n = B_n - Q_n`).
pub fn lu_coefficients(monic: &MonicData) -> Result<LuCoefficients> {
    let levels = monic.levels();
    let d = monic.d();
    let mut p: Vec<Block> = Vec::with_capacity(levels);
    let mut q = vec![Block::zeros(d, d)];
    for n in 0..levels {
        let qn = if n == 0 {
            Block::zeros(d, d)
        } else {
            let prev_inv = checked_inverse(&p[n - 1], &format!("alphat_{}", n - 1))?;
            monic.c(n) * prev_inv * monic.a(n - 1)
        };
        p.push(monic.b(n) - &qn);
        if n > 0 {
            q.push(qn);
        }
    }
    // The last α̃ is only used by deeper recursions, but a singular value
    // there violates the standing nonsingularity assumption; fail loudly.
    if let Some(last) = p.last() {
        checked_inverse(last, &format!("alphat_{}", levels - 1))?;
    }
    let alphat = (0..p.len()).map(|n| monic.l_inv(n) * &p[n] * monic.l(n)).collect();
    let betat = (0..q.len())
        .map(|n| {
            if n == 0 {
                Block::zeros(d, d)
            } else {
                monic.l_inv(n) * &q[n] * monic.l(n)
            }
        })
        .collect();
    Ok(LuCoefficients { alphat, betat, p, q })
}

/// How the block diagonal `τ_n` is produced.
#[derive(Clone, Debug)]
pub enum TauStrategy {
    /// User-supplied sequence; validated against the row-sum equations.
    Explicit(Vec<Block>),
    /// Lower triangular `τ_n` with the diagonal factor `Y_n` (resp. `Ỹ_n`)
    /// forced upper triangular; per level this pins all degrees of freedom.
    LowerTriangularYUpper,
    /// The matrix Jacobi chain's own choice, `τ_n = τ_0·(L_n⁻¹ at α-1)` for
    /// UL and `τ̃_n = τ̃_0·(L_n⁻¹ at α+1)` with `τ̃_0 = τ_0⁻¹ at α+1` for LU.
    ///
    /// That sequence is exactly the lower-triangular/upper-`Y` solution, and
    /// it is evaluated through that characterization: solving the level
    /// systems against the coefficients actually computed keeps the row-sum
    /// identities consistent to machine precision at any depth, which the
    /// literal closed-form products cannot do once the coefficient
    /// recursion's conditioning bites ([`crate::jacobi::tau_paper_ul`] keeps
    /// the closed form for cross-checks). Requires `α > 0` for UL so the
    /// α-1 family exists.
    JacobiPaper(JacobiParams),
}

/// Which factorization a τ sequence is being solved for.
#[derive(Clone, Copy)]
pub enum Coefficients<'a> {
    Ul(&'a UlCoefficients),
    Lu(&'a LuCoefficients),
}

/// Solves for `τ_0..τ_{count-1}`.
///
/// Row-sum equations: UL has `τ_0⁻¹𝐞 = 𝐞` and
/// `τ_n 𝐞 = (β_n L_{n-1}⁻¹ + L_n⁻¹) 𝐞` for `n ≥ 1`; LU has
/// `τ̃_n 𝐞 = (α̃_n L_n⁻¹ + L_{n+1}⁻¹) 𝐞` for all `n ≥ 0`.
pub fn solve_tau(
    coeffs: Coefficients<'_>,
    monic: &MonicData,
    strategy: &TauStrategy,
    count: usize,
) -> Result<Vec<Block>> {
    let d = monic.d();
    match strategy {
        TauStrategy::Explicit(taus) => {
            if taus.len() < count {
                return Err(Error::InvalidParameter(format!(
                    "explicit tau sequence has {} matrices, need {count}",
                    taus.len()
                )));
            }
            let taus: Vec<Block> = taus[..count].to_vec();
            for (n, t) in taus.iter().enumerate() {
                let target = tau_row_target(coeffs, monic, n)?;
                let got = t * ones(d);
                let dev = (got - &target).amax();
                if dev > TAU_ROW_SUM_TOL {
                    return Err(Error::Validation(format!(
                        "explicit tau_{n} violates its row-sum equation by {dev:.3e}"
                    )));
                }
                if matches!(coeffs, Coefficients::Ul(_)) && n == 0 {
                    let t_inv = checked_inverse(t, "tau_0")?;
                    let dev = (t_inv * ones(d) - ones(d)).amax();
                    if dev > TAU_ROW_SUM_TOL {
                        return Err(Error::Validation(format!(
                            "explicit tau_0 inverse is not stochastic in row sums (dev {dev:.3e})"
                        )));
                    }
                }
            }
            Ok(taus)
        }
        TauStrategy::LowerTriangularYUpper => match coeffs {
            Coefficients::Ul(ul) => solve_tau_lower_triangular_ul(ul, monic, count),
            Coefficients::Lu(lu) => solve_tau_lower_triangular_lu(lu, monic, count),
        },
        TauStrategy::JacobiPaper(params) => {
            params.validate()?;
            match coeffs {
                Coefficients::Ul(ul) => {
                    if params.alpha <= 0.0 {
                        return Err(Error::InvalidParameter(format!(
                            "the JacobiPaper tau choice needs alpha > 0 (alpha-1 chain must exist), got {}",
                            params.alpha
                        )));
                    }
                    solve_tau_lower_triangular_ul(ul, monic, count)
                }
                Coefficients::Lu(lu) => solve_tau_lower_triangular_lu(lu, monic, count),
            }
        }
    }
}

/// Right-hand side of the row-sum equation for `τ_n`.
pub(crate) fn tau_row_target(coeffs: Coefficients<'_>, monic: &MonicData, n: usize) -> Result<DVector<f64>> {
    let d = monic.d();
    Ok(match coeffs {
        Coefficients::Ul(ul) => {
            if n == 0 {
                // τ_0⁻¹𝐞 = 𝐞 is equivalent to τ_0𝐞 = 𝐞.
                ones(d)
            } else {
                if n > ul.levels() || n > monic.levels() {
                    return Err(Error::InvalidParameter(format!(
                        "tau_{n} needs beta_{n} and L_{n}; recursion depth too small"
                    )));
                }
                // (β_n L_{n-1}⁻¹ + L_n⁻¹)𝐞 = L_n⁻¹(H_n + I)𝐞
                monic.l_inv(n) * (ul.h(n) * ones(d) + ones(d))
            }
        }
        Coefficients::Lu(lu) => {
            if n >= lu.levels() || n + 1 > monic.levels() {
                return Err(Error::InvalidParameter(format!(
                    "taut_{n} needs alphat_{n} and L_{}; recursion depth too small",
                    n + 1
                )));
            }
            // (α̃_n L_n⁻¹ + L_{n+1}⁻¹)𝐞 = L_n⁻¹(P_n + A_n)𝐞
            monic.l_inv(n) * ((lu.p(n) + monic.a(n)) * ones(d))
        }
    })
}

/// UL construction: per level a `d²` linear system fixes τ_n from
/// `d` row-sum equations, the strict upper zeros of τ_n and the strict lower
/// zeros of `Y_n = L_n α_n τ_n`.
fn solve_tau_lower_triangular_ul(
    ul: &UlCoefficients,
    monic: &MonicData,
    count: usize,
) -> Result<Vec<Block>> {
    let d = monic.d();
    let mut taus = Vec::with_capacity(count);
    for n in 0..count {
        if n >= ul.levels() {
            return Err(Error::InvalidParameter(format!(
                "tau_{n} needs alpha_{n}; recursion depth too small"
            )));
        }
        let target = tau_row_target(Coefficients::Ul(ul), monic, n)?;
        // L_n α_n = G_n L_n
        let g = ul.g(n) * monic.l(n);
        taus.push(solve_level_system(&g, &target, d, n)?);
    }
    Ok(taus)
}

/// Assembles and solves the `d²×d²` system for one lower-triangular τ level.
/// Unknowns are the entries of τ in row-major order.
pub(crate) fn solve_level_system(g: &Block, target: &DVector<f64>, d: usize, level: usize) -> Result<Block> {
    let size = d * d;
    let mut sys = DMatrix::<f64>::zeros(size, size);
    let mut rhs = DVector::<f64>::zeros(size);
    let mut eq = 0;
    // row sums
    for i in 0..d {
        for j in 0..d {
            sys[(eq, i * d + j)] = 1.0;
        }
        rhs[eq] = target[i];
        eq += 1;
    }
    // strict upper of τ is zero
    for i in 0..d {
        for j in (i + 1)..d {
            sys[(eq, i * d + j)] = 1.0;
            eq += 1;
        }
    }
    // strict lower of G·τ is zero
    for i in 0..d {
        for j in 0..i {
            for m in 0..d {
                sys[(eq, m * d + j)] = g[(i, m)];
            }
            eq += 1;
        }
    }
    debug_assert_eq!(eq, size);
    // L_n grows geometrically, so the Y-constraint rows dwarf the row-sum
    // rows deep in the chain; equilibrate rows before the solve.
    for r in 0..size {
        let scale = (0..size).fold(0.0_f64, |m, c| m.max(sys[(r, c)].abs()));
        if scale > 0.0 {
            for c in 0..size {
                sys[(r, c)] /= scale;
            }
            rhs[r] /= scale;
        }
    }
    let lu = sys.lu();
    let sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::singular_at("tau level system", level))?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::singular_at("tau level system", level));
    }
    let tau = Block::from_fn(d, d, |i, j| sol[i * d + j]);
    checked_inverse(&tau, &format!("tau_{level}"))?;
    Ok(tau)
}

/// LU construction: `Ỹ_n = τ̃_n⁻¹ α̃_n L_n⁻¹` upper triangular with τ̃_n
/// lower triangular means `τ̃_n` carries the unit-lower factor of
/// `G = α̃_n L_n⁻¹`; the row-sum equation then fixes its diagonal scaling.
fn solve_tau_lower_triangular_lu(
    lu: &LuCoefficients,
    monic: &MonicData,
    count: usize,
) -> Result<Vec<Block>> {
    let d = monic.d();
    let mut taus = Vec::with_capacity(count);
    for n in 0..count {
        let target = tau_row_target(Coefficients::Lu(lu), monic, n)?;
        // α̃_n L_n⁻¹ = L_n⁻¹ P_n
        let g = monic.l_inv(n) * lu.p(n);
        let unit_lower = doolittle_unit_lower(&g, n)?;
        // (Λ·D)𝐞 = t  =>  Λ·diag(D) = t
        let diag = forward_substitute_unit(&unit_lower, &target);
        let mut tau = unit_lower;
        for j in 0..d {
            if diag[j].abs() < 1e-300 {
                return Err(Error::singular_at("taut diagonal scaling", n));
            }
            for i in 0..d {
                tau[(i, j)] *= diag[j];
            }
        }
        checked_inverse(&tau, &format!("taut_{n}"))?;
        taus.push(tau);
    }
    Ok(taus)
}

/// Unit-lower factor of a Doolittle LU without pivoting (pivoting would
/// destroy the triangular shape this strategy requires).
fn doolittle_unit_lower(g: &Block, level: usize) -> Result<Block> {
    let d = g.nrows();
    let mut u = g.clone();
    let mut l = Block::identity(d, d);
    let scale = crate::blockmat::inf_norm(g).max(1e-300);
    for k in 0..d {
        let pivot = u[(k, k)];
        if pivot.abs() < 1e-13 * scale {
            return Err(Error::singular_at("leading minor in taut factorization", level));
        }
        for i in (k + 1)..d {
            let f = u[(i, k)] / pivot;
            l[(i, k)] = f;
            for j in k..d {
                let v = u[(k, j)];
                u[(i, j)] -= f * v;
            }
        }
    }
    Ok(l)
}

fn forward_substitute_unit(l: &Block, rhs: &DVector<f64>) -> DVector<f64> {
    let d = l.nrows();
    let mut x = DVector::zeros(d);
    for i in 0..d {
        let mut v = rhs[i];
        for j in 0..i {
            v -= l[(i, j)] * x[j];
        }
        x[i] = v;
    }
    x
}

/// Builds the UL factor pair from monic data, coefficients and τ.
///
/// With `tau.len() = T` the upper factor holds levels `0..T-1` and the lower
/// factor levels `0..=T-1`. Row sums come from the τ equations; entry
/// nonnegativity is the caller's check.
pub fn assemble_ul(
    monic: &MonicData,
    coeffs: &UlCoefficients,
    tau: &[Block],
) -> Result<(BlockSequence, BlockSequence)> {
    let d = monic.d();
    let t = tau.len();
    if t < 2 {
        return Err(Error::InvalidParameter("need at least two tau levels".into()));
    }
    if t - 1 > coeffs.levels() || t - 1 > monic.levels() {
        return Err(Error::InvalidParameter(format!(
            "tau has {t} levels but the recursions only reach {}",
            coeffs.levels()
        )));
    }
    // T_n = L_n τ_n is O(1); every factor block is an O(1) product of it:
    // X_n = A_n T_{n+1}, Y_n = G_n T_n, S_n = T_n⁻¹, R_n = S_n H_n.
    let t_seq: Vec<Block> = (0..t).map(|n| monic.l(n) * &tau[n]).collect();
    let mut upper = Vec::with_capacity(t - 1);
    for (n, pair) in t_seq.windows(2).enumerate() {
        let x = monic.a(n) * &pair[1];
        let y = coeffs.g(n) * &pair[0];
        upper.push(LevelBlocks::Upper { y, x });
    }
    let mut lower = Vec::with_capacity(t);
    for (n, t_n) in t_seq.iter().enumerate() {
        let s = checked_inverse(t_n, &format!("tau_{n}"))?;
        let r = (n > 0).then(|| &s * coeffs.h(n));
        lower.push(LevelBlocks::Lower { r, s });
    }
    Ok((
        BlockSequence::from_levels(d, Band::UpperBidiagonal, upper)?,
        BlockSequence::from_levels(d, Band::LowerBidiagonal, lower)?,
    ))
}

/// Builds the LU factor pair `(P̃_L, P̃_U)`; levels `0..T-1` on both factors
/// (`τ̃_0` must come out stochastic, `β̃_0 = 0`).
pub fn assemble_lu(
    monic: &MonicData,
    coeffs: &LuCoefficients,
    tau: &[Block],
) -> Result<(BlockSequence, BlockSequence)> {
    let d = monic.d();
    let t = tau.len();
    if t == 0 {
        return Err(Error::InvalidParameter("need at least one tau level".into()));
    }
    if t > coeffs.levels() || t > monic.levels() {
        return Err(Error::InvalidParameter(format!(
            "tau has {t} levels but the recursions only reach {}",
            coeffs.levels()
        )));
    }
    // S̃_n = L_n τ̃_n is O(1); the rest are O(1) products of it:
    // X̃_n = S̃_n⁻¹ A_n, Ỹ_n = S̃_n⁻¹ P_n, R̃_n = Q_n A_{n-1}⁻¹ S̃_{n-1}.
    let s_seq: Vec<Block> = (0..t).map(|n| monic.l(n) * &tau[n]).collect();
    let mut lower = Vec::with_capacity(t);
    let mut upper = Vec::with_capacity(t);
    for n in 0..t {
        let s_inv = checked_inverse(&s_seq[n], &format!("taut_{n}"))?;
        let r = (n > 0).then(|| -> Result<Block> {
            let a_inv = checked_inverse(monic.a(n - 1), &format!("A_{}", n - 1))?;
            Ok(coeffs.q(n) * a_inv * &s_seq[n - 1])
        });
        let r = r.transpose()?;
        lower.push(LevelBlocks::Lower { r, s: s_seq[n].clone() });
        let x = &s_inv * monic.a(n);
        let y = &s_inv * coeffs.p(n);
        upper.push(LevelBlocks::Upper { y, x });
    }
    Ok((
        BlockSequence::from_levels(d, Band::LowerBidiagonal, lower)?,
        BlockSequence::from_levels(d, Band::UpperBidiagonal, upper)?,
    ))
}

/// Max entrywise deviation `|truncate(P) - truncate(left)·truncate(right)|`
/// over the leading `(N-1)·d` rows (the last block row of a truncated
/// product misses tail contributions and is excluded).
pub fn factorization_residual(
    p: &BlockSequence,
    left: &BlockSequence,
    right: &BlockSequence,
    n_levels: usize,
) -> Result<f64> {
    if n_levels < 2 {
        return Err(Error::InvalidParameter("residual needs at least two levels".into()));
    }
    let d = p.d();
    let pt = crate::blockmat::truncate_dense(p, n_levels)?;
    let lt = crate::blockmat::truncate_dense(left, n_levels)?;
    let rt = crate::blockmat::truncate_dense(right, n_levels)?;
    let prod = lt * rt;
    let rows = (n_levels - 1) * d;
    let mut max = 0.0_f64;
    for i in 0..rows {
        for j in 0..n_levels * d {
            max = max.max((pt[(i, j)] - prod[(i, j)]).abs());
        }
    }
    Ok(max)
}

/// A complete UL factorization run.
pub struct UlFactorization {
    pub upper: BlockSequence,
    pub lower: BlockSequence,
    pub alpha0: Block,
    pub tau: Vec<Block>,
    pub monic: MonicData,
    pub coeffs: UlCoefficients,
}

/// Factors `levels` levels of `p`: the returned upper factor covers levels
/// `0..levels`, the lower factor `0..=levels`, and their product reproduces
/// `p` on levels `0..levels`.
pub fn ul_factorize(
    p: &BlockSequence,
    alpha0: Block,
    strategy: &TauStrategy,
    levels: usize,
) -> Result<UlFactorization> {
    let monic = monic_reduce(p, levels + 1)?;
    let coeffs = ul_coefficients(&monic, &alpha0)?;
    let tau = solve_tau(Coefficients::Ul(&coeffs), &monic, strategy, levels + 1)?;
    let (upper, lower) = assemble_ul(&monic, &coeffs, &tau)?;
    Ok(UlFactorization {
        upper,
        lower,
        alpha0,
        tau,
        monic,
        coeffs,
    })
}

/// A complete LU factorization run.
pub struct LuFactorization {
    pub lower: BlockSequence,
    pub upper: BlockSequence,
    pub tau: Vec<Block>,
    pub monic: MonicData,
    pub coeffs: LuCoefficients,
}

/// LU counterpart of [`ul_factorize`]; both factors cover levels
/// `0..=levels` and their product reproduces `p` on levels `0..=levels`.
pub fn lu_factorize(p: &BlockSequence, strategy: &TauStrategy, levels: usize) -> Result<LuFactorization> {
    let monic = monic_reduce(p, levels + 1)?;
    let coeffs = lu_coefficients(&monic)?;
    let tau = solve_tau(Coefficients::Lu(&coeffs), &monic, strategy, levels + 1)?;
    let (lower, upper) = assemble_lu(&monic, &coeffs, &tau)?;
    Ok(LuFactorization {
        lower,
        upper,
        tau,
        monic,
        coeffs,
    })
}
