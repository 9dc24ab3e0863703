//! Semi-infinite block-banded matrices with `d×d` blocks.
//!
//! A [`BlockSequence`] is a level-indexed view of one of three band shapes:
//!
//! * tridiagonal: level `n` holds `(C_n, B_n, A_n)` (sub, diag, super; `C_0`
//!   absent),
//! * upper bidiagonal: level `n` holds `(Y_n, X_n)` (diag, super),
//! * lower bidiagonal: level `n` holds `(R_n, S_n)` (sub, diag; `R_0` absent).
//!
//! Blocks are produced lazily by a pure generator closure or stored up to a
//! materialization bound. All algorithms in this crate are level-recursive,
//! so nothing ever needs the full matrix.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::error::Error;
use crate::Result;

/// Dense `d×d` real block.
pub type Block = DMatrix<f64>;

/// Reciprocal condition numbers below this raise [`Error::Singular`].
pub const RCOND_MIN: f64 = 1e-13;

/// Band shape of a [`BlockSequence`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Band {
    Tridiagonal,
    UpperBidiagonal,
    LowerBidiagonal,
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Band::Tridiagonal => write!(f, "tridiagonal"),
            Band::UpperBidiagonal => write!(f, "upper"),
            Band::LowerBidiagonal => write!(f, "lower"),
        }
    }
}

/// The blocks a band contributes at one level.
#[derive(Clone, Debug)]
pub enum LevelBlocks {
    /// `(C_n, B_n, A_n)`; `c` is `None` at level 0.
    Tri { c: Option<Block>, b: Block, a: Block },
    /// `(Y_n, X_n)`.
    Upper { y: Block, x: Block },
    /// `(R_n, S_n)`; `r` is `None` at level 0.
    Lower { r: Option<Block>, s: Block },
}

impl LevelBlocks {
    fn band(&self) -> Band {
        match self {
            LevelBlocks::Tri { .. } => Band::Tridiagonal,
            LevelBlocks::Upper { .. } => Band::UpperBidiagonal,
            LevelBlocks::Lower { .. } => Band::LowerBidiagonal,
        }
    }

    fn blocks(&self) -> Vec<&Block> {
        match self {
            LevelBlocks::Tri { c, b, a } => {
                let mut v: Vec<&Block> = Vec::new();
                if let Some(c) = c {
                    v.push(c);
                }
                v.push(b);
                v.push(a);
                v
            }
            LevelBlocks::Upper { y, x } => vec![y, x],
            LevelBlocks::Lower { r, s } => {
                let mut v: Vec<&Block> = Vec::new();
                if let Some(r) = r {
                    v.push(r);
                }
                v.push(s);
                v
            }
        }
    }

    fn has_sub(&self) -> Option<bool> {
        match self {
            LevelBlocks::Tri { c, .. } => Some(c.is_some()),
            LevelBlocks::Lower { r, .. } => Some(r.is_some()),
            LevelBlocks::Upper { .. } => None,
        }
    }
}

type Generator = Arc<dyn Fn(usize) -> Result<LevelBlocks> + Send + Sync>;

#[derive(Clone)]
enum Source {
    Stored(Arc<Vec<LevelBlocks>>),
    Lazy(Generator),
}

/// Level-indexed sequence of `d×d` blocks of a semi-infinite banded matrix.
///
/// Immutable after construction; generators must be pure functions of the
/// level, which makes the sequence safe to share across threads.
#[derive(Clone)]
pub struct BlockSequence {
    d: usize,
    band: Band,
    source: Source,
}

impl fmt::Debug for BlockSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlockSequence")
            .field("d", &self.d)
            .field("band", &self.band)
            .field("max_level", &self.max_level())
            .finish()
    }
}

impl BlockSequence {
    /// Lazily generated sequence. `f(n)` must return the level-`n` blocks of
    /// the declared band shape.
    pub fn from_fn<F>(d: usize, band: Band, f: F) -> Self
    where
        F: Fn(usize) -> Result<LevelBlocks> + Send + Sync + 'static,
    {
        BlockSequence {
            d,
            band,
            source: Source::Lazy(Arc::new(f)),
        }
    }

    /// Sequence stored up to `levels.len()` levels; every level is validated.
    pub fn from_levels(d: usize, band: Band, levels: Vec<LevelBlocks>) -> Result<Self> {
        let seq = BlockSequence {
            d,
            band,
            source: Source::Stored(Arc::new(levels)),
        };
        for n in 0..seq.max_level().unwrap_or(0) {
            seq.level(n)?;
        }
        Ok(seq)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn band(&self) -> Band {
        self.band
    }

    /// Materialization bound, `None` for lazy sequences.
    pub fn max_level(&self) -> Option<usize> {
        match &self.source {
            Source::Stored(v) => Some(v.len()),
            Source::Lazy(_) => None,
        }
    }

    /// Blocks at level `n`, validated for shape, band and finiteness.
    pub fn level(&self, n: usize) -> Result<LevelBlocks> {
        let lb = match &self.source {
            Source::Stored(v) => v
                .get(n)
                .cloned()
                .ok_or_else(|| Error::Generator {
                    level: n,
                    reason: format!("sequence is materialized to {} levels", v.len()),
                })?,
            Source::Lazy(f) => f(n)?,
        };
        self.check_level(n, &lb)?;
        Ok(lb)
    }

    /// Evaluates and stores the first `n_levels` levels.
    pub fn materialize(&self, n_levels: usize) -> Result<BlockSequence> {
        let mut levels = Vec::with_capacity(n_levels);
        for n in 0..n_levels {
            levels.push(self.level(n)?);
        }
        Ok(BlockSequence {
            d: self.d,
            band: self.band,
            source: Source::Stored(Arc::new(levels)),
        })
    }

    fn check_level(&self, n: usize, lb: &LevelBlocks) -> Result<()> {
        if lb.band() != self.band {
            return Err(Error::Generator {
                level: n,
                reason: format!("level blocks are {:?}, sequence band is {:?}", lb.band(), self.band),
            });
        }
        if let Some(has_sub) = lb.has_sub() {
            if has_sub == (n == 0) {
                return Err(Error::Generator {
                    level: n,
                    reason: if n == 0 {
                        "level 0 must omit the sub-diagonal block".into()
                    } else {
                        format!("level {n} is missing its sub-diagonal block")
                    },
                });
            }
        }
        for b in lb.blocks() {
            if b.nrows() != self.d || b.ncols() != self.d {
                return Err(Error::Generator {
                    level: n,
                    reason: format!("block is {}x{}, expected {}x{}", b.nrows(), b.ncols(), self.d, self.d),
                });
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::Generator {
                    level: n,
                    reason: "block has non-finite entries".into(),
                });
            }
        }
        Ok(())
    }

    /// Serializes the first `n_levels` levels to the block-sequence JSON form
    /// `{"d": .., "band": .., "blocks": [{"C": .., "B": .., "A": ..}, ..]}`.
    pub fn to_json_value(&self, n_levels: usize) -> Result<Value> {
        let mut blocks = Vec::with_capacity(n_levels);
        for n in 0..n_levels {
            let mut map = serde_json::Map::new();
            match self.level(n)? {
                LevelBlocks::Tri { c, b, a } => {
                    if let Some(c) = c {
                        map.insert("C".into(), matrix_to_rows(&c));
                    }
                    map.insert("B".into(), matrix_to_rows(&b));
                    map.insert("A".into(), matrix_to_rows(&a));
                }
                LevelBlocks::Upper { y, x } => {
                    map.insert("Y".into(), matrix_to_rows(&y));
                    map.insert("X".into(), matrix_to_rows(&x));
                }
                LevelBlocks::Lower { r, s } => {
                    if let Some(r) = r {
                        map.insert("R".into(), matrix_to_rows(&r));
                    }
                    map.insert("S".into(), matrix_to_rows(&s));
                }
            }
            blocks.push(Value::Object(map));
        }
        Ok(json!({
            "d": self.d,
            "band": self.band.to_string(),
            "blocks": blocks,
        }))
    }

    /// Parses the block-sequence JSON form into a stored sequence.
    pub fn from_json_value(v: &Value) -> Result<BlockSequence> {
        let obj = v.as_object().ok_or_else(|| Error::Format("expected object".into()))?;
        let d = obj
            .get("d")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Format("missing integer field 'd'".into()))? as usize;
        let band = match obj.get("band").and_then(Value::as_str) {
            Some("tridiagonal") => Band::Tridiagonal,
            Some("upper") => Band::UpperBidiagonal,
            Some("lower") => Band::LowerBidiagonal,
            other => return Err(Error::Format(format!("bad band {other:?}"))),
        };
        let blocks = obj
            .get("blocks")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Format("missing array field 'blocks'".into()))?;
        let mut levels = Vec::with_capacity(blocks.len());
        for (n, entry) in blocks.iter().enumerate() {
            let get = |key: &str| -> Result<Block> {
                rows_to_matrix(entry.get(key).ok_or_else(|| {
                    Error::Format(format!("level {n}: missing block '{key}'"))
                })?)
            };
            let opt = |key: &str| -> Result<Option<Block>> {
                entry.get(key).map(rows_to_matrix).transpose()
            };
            levels.push(match band {
                Band::Tridiagonal => LevelBlocks::Tri {
                    c: opt("C")?,
                    b: get("B")?,
                    a: get("A")?,
                },
                Band::UpperBidiagonal => LevelBlocks::Upper {
                    y: get("Y")?,
                    x: get("X")?,
                },
                Band::LowerBidiagonal => LevelBlocks::Lower {
                    r: opt("R")?,
                    s: get("S")?,
                },
            });
        }
        BlockSequence::from_levels(d, band, levels)
    }
}

/// Serializes a matrix as row-major JSON arrays.
pub fn matrix_to_json(m: &Block) -> Value {
    matrix_to_rows(m)
}

/// Parses a row-major JSON array-of-arrays into a matrix.
pub fn matrix_from_json(v: &Value) -> Result<Block> {
    rows_to_matrix(v)
}

pub(crate) fn matrix_to_rows(m: &Block) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| json!(m[(i, j)])).collect()))
            .collect(),
    )
}

pub(crate) fn rows_to_matrix(v: &Value) -> Result<Block> {
    let rows = v.as_array().ok_or_else(|| Error::Format("expected row array".into()))?;
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::Format("empty matrix".into()));
    }
    let ncols = rows[0].as_array().map(Vec::len).unwrap_or(0);
    let mut m = Block::zeros(nrows, ncols);
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array().ok_or_else(|| Error::Format("expected row array".into()))?;
        if row.len() != ncols {
            return Err(Error::Format("ragged matrix rows".into()));
        }
        for (j, x) in row.iter().enumerate() {
            m[(i, j)] = x
                .as_f64()
                .ok_or_else(|| Error::Format("non-numeric matrix entry".into()))?;
        }
    }
    Ok(m)
}

/// Outcome of a stochasticity scan over the leading levels of a sequence.
#[derive(Clone, Debug)]
pub struct StochasticityReport {
    /// Most negative scalar entry found (0 when all entries are nonnegative).
    pub max_negative_entry: f64,
    /// Largest deviation of a scalar row sum from 1.
    pub max_row_sum_deviation: f64,
    /// First level at which either check failed.
    pub offending_level: Option<usize>,
    pub passed: bool,
}

/// Leading principal `(N·d)×(N·d)` section of the semi-infinite matrix.
pub fn truncate_dense(seq: &BlockSequence, n_levels: usize) -> Result<DMatrix<f64>> {
    if n_levels == 0 {
        return Err(Error::InvalidParameter("truncation needs at least one level".into()));
    }
    let d = seq.d();
    let mut out = DMatrix::zeros(n_levels * d, n_levels * d);
    let mut put = |row_lvl: usize, col_lvl: usize, m: &Block| {
        if col_lvl < n_levels {
            out.view_mut((row_lvl * d, col_lvl * d), (d, d)).copy_from(m);
        }
    };
    for n in 0..n_levels {
        match seq.level(n)? {
            LevelBlocks::Tri { c, b, a } => {
                if let Some(c) = &c {
                    put(n, n - 1, c);
                }
                put(n, n, &b);
                put(n, n + 1, &a);
            }
            LevelBlocks::Upper { y, x } => {
                put(n, n, &y);
                put(n, n + 1, &x);
            }
            LevelBlocks::Lower { r, s } => {
                if let Some(r) = &r {
                    put(n, n - 1, r);
                }
                put(n, n, &s);
            }
        }
    }
    Ok(out)
}

/// Product of a compatible bidiagonal pair, as a stored tridiagonal sequence
/// with `n_levels` levels.
///
/// `(upper, lower)` gives `A_n = X_n S_{n+1}`, `B_n = X_n R_{n+1} + Y_n S_n`,
/// `C_n = Y_n R_n`; `(lower, upper)` gives `A_n = S_n X_n`,
/// `B_n = R_n X_{n-1} + S_n Y_n`, `C_n = R_n Y_{n-1}`.
pub fn multiply_banded(
    left: &BlockSequence,
    right: &BlockSequence,
    n_levels: usize,
) -> Result<BlockSequence> {
    if left.d() != right.d() {
        return Err(Error::DimensionMismatch(format!(
            "left has d={}, right has d={}",
            left.d(),
            right.d()
        )));
    }
    let d = left.d();
    let mut levels = Vec::with_capacity(n_levels);
    match (left.band(), right.band()) {
        (Band::UpperBidiagonal, Band::LowerBidiagonal) => {
            for n in 0..n_levels {
                let LevelBlocks::Upper { y, x } = left.level(n)? else { unreachable!() };
                let LevelBlocks::Lower { r, s } = right.level(n)? else { unreachable!() };
                let LevelBlocks::Lower { r: r_next, s: s_next } = right.level(n + 1)? else {
                    unreachable!()
                };
                let r_next = r_next.ok_or_else(|| Error::Generator {
                    level: n + 1,
                    reason: "missing sub-diagonal block".into(),
                })?;
                let a = &x * &s_next;
                let b = &x * &r_next + &y * &s;
                let c = r.map(|rn| &y * &rn);
                levels.push(LevelBlocks::Tri { c, b, a });
            }
        }
        (Band::LowerBidiagonal, Band::UpperBidiagonal) => {
            let mut prev: Option<(Block, Block)> = None; // (Y_{n-1}, X_{n-1})
            for n in 0..n_levels {
                let LevelBlocks::Lower { r, s } = left.level(n)? else { unreachable!() };
                let LevelBlocks::Upper { y, x } = right.level(n)? else { unreachable!() };
                let a = &s * &x;
                let (b, c) = match (&r, &prev) {
                    (Some(rn), Some((y_prev, x_prev))) => {
                        (rn * x_prev + &s * &y, Some(rn * y_prev))
                    }
                    (None, _) => (&s * &y, None),
                    (Some(_), None) => {
                        return Err(Error::Generator {
                            level: n,
                            reason: "sub-diagonal block present at level 0".into(),
                        })
                    }
                };
                prev = Some((y, x));
                levels.push(LevelBlocks::Tri { c, b, a });
            }
        }
        (lb, rb) => {
            return Err(Error::BandMismatch(format!(
                "cannot multiply {lb} by {rb}; need an (upper, lower) or (lower, upper) pair"
            )));
        }
    }
    BlockSequence::from_levels(d, Band::Tridiagonal, levels)
}

/// Scans levels `0..n_levels` for nonnegative entries and unit scalar row
/// sums (rows span the adjacent blocks dictated by the band).
pub fn validate_stochastic(seq: &BlockSequence, n_levels: usize, tol: f64) -> Result<StochasticityReport> {
    if n_levels == 0 || tol <= 0.0 {
        return Err(Error::InvalidParameter(
            "stochasticity scan needs n_levels >= 1 and tol > 0".into(),
        ));
    }
    let d = seq.d();
    let mut min_entry = 0.0_f64;
    let mut max_dev = 0.0_f64;
    let mut offending = None;
    for n in 0..n_levels {
        let lb = seq.level(n)?;
        let parts = lb.blocks();
        let mut level_min = 0.0_f64;
        let mut level_dev = 0.0_f64;
        for i in 0..d {
            let mut sum = 0.0;
            for p in &parts {
                for j in 0..d {
                    let v = p[(i, j)];
                    level_min = level_min.min(v);
                    sum += v;
                }
            }
            level_dev = level_dev.max((sum - 1.0).abs());
        }
        if offending.is_none() && (level_min < -tol || level_dev > tol) {
            offending = Some(n);
        }
        min_entry = min_entry.min(level_min);
        max_dev = max_dev.max(level_dev);
    }
    Ok(StochasticityReport {
        max_negative_entry: min_entry,
        max_row_sum_deviation: max_dev,
        offending_level: offending,
        passed: min_entry >= -tol && max_dev <= tol,
    })
}

/// Row-sum norm (max absolute row sum).
pub fn inf_norm(m: &Block) -> f64 {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest absolute entry difference between two equal-shaped matrices.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Inverse of a small well-conditioned block.
///
/// Fails with [`Error::Singular`] when the reciprocal condition estimate
/// `1/(‖M‖∞·‖M⁻¹‖∞)` drops below [`RCOND_MIN`]; the factorization recursions
/// rely on this to reject seed choices that violate the invertibility chain.
pub fn small_inverse(m: &Block) -> Result<Block> {
    checked_inverse(m, "matrix")
}

pub(crate) fn checked_inverse(m: &Block, what: &str) -> Result<Block> {
    let inv = m
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular(what.to_string()))?;
    let rcond = 1.0 / (inf_norm(m) * inf_norm(&inv));
    if !rcond.is_finite() || rcond < RCOND_MIN {
        return Err(Error::Singular(format!("{what} (rcond {rcond:.3e})")));
    }
    Ok(inv)
}

/// `d`-vector of ones.
pub(crate) fn ones(d: usize) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_element(d, 1.0)
}
