//! Matrix-valued orthogonal polynomials, quadrature against the spectral
//! weight, Karlin–McGregor n-step blocks, invariant measures, and the
//! Geronimus/Christoffel weight transforms.
//!
//! Every integral here is a polynomial against a density `x^a (1-x)^b`, so a
//! Gauss rule of matching exponents is exact; node counts are always derived
//! from the required exactness degree, never fixed globally, and a freshly
//! built rule is verified against closed-form Beta moments before use.

use nalgebra::DMatrix;
use serde_json::{json, Value};
use statrs::function::gamma::ln_gamma;

use crate::blockmat::{checked_inverse, matrix_to_rows, ones, rows_to_matrix, Band, Block, BlockSequence, LevelBlocks};
use crate::error::Error;
use crate::jacobi::{self, JacobiParams};
use crate::poly::MatrixPolynomial;
use crate::Result;

/// `∫_0^1 x^(a+p) (1-x)^b dx = B(a+p+1, b+1)`.
fn beta_moment(a: f64, b: f64, p: usize) -> f64 {
    let ap = a + p as f64;
    (ln_gamma(ap + 1.0) + ln_gamma(b + 1.0) - ln_gamma(ap + b + 2.0)).exp()
}

/// Gauss–Jacobi rule on `(0,1)` for the density `x^a (1-x)^b`.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Exact for `p(x)·x^a(1-x)^b` with `deg p` up to this.
    pub exactness_degree: usize,
    pub a: f64,
    pub b: f64,
}

/// Builds an `m`-node rule by the Golub–Welsch eigen decomposition of the
/// symmetric Jacobi recurrence matrix, then verifies its monomial moments
/// against the Beta closed forms.
pub fn gauss_jacobi_rule(a: f64, b: f64, m: usize) -> Result<QuadratureRule> {
    if !(a > -1.0 && b > -1.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "density exponents must be > -1, got a={a}, b={b}"
        )));
    }
    if m < 1 {
        return Err(Error::InvalidParameter("need at least one node".into()));
    }
    // On [-1,1] with weight (1-t)^A (1+t)^B, the substitution x = (1+t)/2
    // carries x^a(1-x)^b to A = b, B = a.
    let (big_a, big_b) = (b, a);
    let mut jm = DMatrix::<f64>::zeros(m, m);
    jm[(0, 0)] = (big_b - big_a) / (2.0 + big_a + big_b);
    for idx in 1..m {
        let j = idx as f64;
        let denom = 2.0 * j + big_a + big_b;
        let off = 2.0 / denom
            * (j * (j + big_a) * (j + big_b) * (j + big_a + big_b) / ((denom + 1.0) * (denom - 1.0)))
                .sqrt();
        jm[(idx - 1, idx)] = off;
        jm[(idx, idx - 1)] = off;
        jm[(idx, idx)] = (big_b * big_b - big_a * big_a) / (denom * (denom + 2.0));
    }
    let eig = jm
        .try_symmetric_eigen(f64::EPSILON, 200 * m.max(4))
        .ok_or_else(|| {
            Error::QuadratureVerification(format!(
                "symmetric eigen solve did not converge for m={m}, a={a}, b={b}"
            ))
        })?;
    let total = beta_moment(a, b, 0);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let t = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            ((1.0 + t) / 2.0, v0 * v0 * total)
        })
        .collect();
    pairs.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    let rule = QuadratureRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
        exactness_degree: 2 * m - 1,
        a,
        b,
    };
    verify_rule(&rule)?;
    Ok(rule)
}

/// Checks every monomial moment the rule claims to integrate exactly.
fn verify_rule(rule: &QuadratureRule) -> Result<()> {
    for p in 0..=rule.exactness_degree {
        let exact = beta_moment(rule.a, rule.b, p);
        let quad: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * x.powi(p as i32))
            .sum();
        if (quad - exact).abs() > 1e-12 * exact.abs().max(1.0) {
            return Err(Error::QuadratureVerification(format!(
                "moment x^{p} off by {:.3e} (a={}, b={}, m={})",
                (quad - exact).abs(),
                rule.a,
                rule.b,
                rule.nodes.len()
            )));
        }
    }
    Ok(())
}

/// Polynomial matrix factor of a weight.
#[derive(Clone, Debug)]
pub enum MatrixPart {
    Identity { d: usize },
    Jacobi(JacobiParams),
}

impl MatrixPart {
    pub fn d(&self) -> usize {
        match self {
            MatrixPart::Identity { d } => *d,
            MatrixPart::Jacobi(p) => p.d,
        }
    }

    pub fn degree(&self) -> usize {
        match self {
            MatrixPart::Identity { .. } => 0,
            MatrixPart::Jacobi(p) => jacobi::matrix_part_degree(p.d),
        }
    }

    pub fn eval(&self, x: f64) -> Block {
        match self {
            MatrixPart::Identity { d } => Block::identity(*d, *d),
            MatrixPart::Jacobi(p) => jacobi::weight_matrix_part(p, x),
        }
    }
}

/// A matrix-valued measure on `[0,1]`: density
/// `x^a (1-x)^b · matrix_part(x)` plus an optional point mass at 0.
#[derive(Clone, Debug)]
pub struct WeightSpec {
    pub a: f64,
    pub b: f64,
    pub matrix_part: MatrixPart,
    pub atom0: Option<Block>,
}

impl WeightSpec {
    pub fn new(a: f64, b: f64, matrix_part: MatrixPart, atom0: Option<Block>) -> Result<Self> {
        if !(a > -1.0 && b > -1.0) {
            return Err(Error::InvalidParameter(format!(
                "density exponents must be > -1 for integrability, got a={a}, b={b}"
            )));
        }
        if let Some(m) = &atom0 {
            let d = matrix_part.d();
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch("point mass dimension".into()));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("point mass has non-finite entries".into()));
            }
        }
        Ok(WeightSpec { a, b, matrix_part, atom0 })
    }

    /// The spectral weight of the matrix Jacobi chain.
    pub fn jacobi(p: &JacobiParams) -> Result<Self> {
        p.validate()?;
        WeightSpec::new(p.alpha, p.beta, MatrixPart::Jacobi(*p), None)
    }

    pub fn d(&self) -> usize {
        self.matrix_part.d()
    }

    pub fn to_json_value(&self) -> Value {
        let (kind, params) = match &self.matrix_part {
            MatrixPart::Identity { d } => ("identity", json!({ "d": d })),
            MatrixPart::Jacobi(p) => ("jacobi", serde_json::to_value(p).unwrap()),
        };
        json!({
            "a": self.a,
            "b": self.b,
            "atom0": self.atom0.as_ref().map(matrix_to_rows),
            "matrix_part": kind,
            "params": params,
        })
    }

    pub fn from_json_value(v: &Value) -> Result<Self> {
        let a = v.get("a").and_then(Value::as_f64).ok_or_else(|| Error::Format("missing 'a'".into()))?;
        let b = v.get("b").and_then(Value::as_f64).ok_or_else(|| Error::Format("missing 'b'".into()))?;
        let atom0 = match v.get("atom0") {
            None | Some(Value::Null) => None,
            Some(m) => Some(rows_to_matrix(m)?),
        };
        let params = v.get("params").ok_or_else(|| Error::Format("missing 'params'".into()))?;
        let matrix_part = match v.get("matrix_part").and_then(Value::as_str) {
            Some("identity") => MatrixPart::Identity {
                d: params.get("d").and_then(Value::as_u64).ok_or_else(|| Error::Format("missing 'd'".into()))?
                    as usize,
            },
            Some("jacobi") => MatrixPart::Jacobi(
                serde_json::from_value(params.clone())
                    .map_err(|e| Error::Format(format!("bad jacobi params: {e}")))?,
            ),
            other => return Err(Error::Format(format!("bad matrix_part {other:?}"))),
        };
        WeightSpec::new(a, b, matrix_part, atom0)
    }
}

/// Orthogonal polynomial sequence `Q_0..Q_{count-1}` of a tridiagonal chain:
/// `x Q_n = A_n Q_{n+1} + B_n Q_n + C_n Q_{n-1}`, `Q_0 = I` (coefficients
/// only; norms come from [`inner_product`]).
pub fn polynomial_sequence(p: &BlockSequence, count: usize) -> Result<Vec<MatrixPolynomial>> {
    if p.band() != Band::Tridiagonal {
        return Err(Error::BandMismatch("polynomial recurrence needs a tridiagonal chain".into()));
    }
    if count == 0 {
        return Err(Error::InvalidParameter("need at least Q_0".into()));
    }
    let d = p.d();
    let mut polys = vec![MatrixPolynomial::identity(d)];
    for n in 0..count - 1 {
        let LevelBlocks::Tri { c, b, a } = p.level(n)? else { unreachable!() };
        let a_inv = checked_inverse(&a, &format!("A_{n}"))?;
        let mut rhs = polys[n].shift_up().sub(&polys[n].mul_matrix_left(&b));
        if n >= 1 {
            let c = c.ok_or_else(|| Error::Generator {
                level: n,
                reason: "missing sub-diagonal block".into(),
            })?;
            rhs = rhs.sub(&polys[n - 1].mul_matrix_left(&c));
        }
        polys.push(rhs.mul_matrix_left(&a_inv));
    }
    Ok(polys)
}

/// `(F, G)_W = ∫ F(x) W(x) G*(x) dx + F(0) M G*(0)` when a point mass `M`
/// sits at 0.
///
/// The rule must carry the weight's exponents and enough exactness for
/// `deg F + deg G + deg matrix_part`; a shortfall is an error, never a
/// silent inaccuracy.
pub fn inner_product(
    f: &MatrixPolynomial,
    g: &MatrixPolynomial,
    w: &WeightSpec,
    rule: &QuadratureRule,
) -> Result<Block> {
    let d = w.d();
    if f.d() != d || g.d() != d {
        return Err(Error::DimensionMismatch("polynomial/weight dimensions".into()));
    }
    if rule.a != w.a || rule.b != w.b {
        return Err(Error::InvalidParameter(format!(
            "rule exponents (a={}, b={}) do not match the weight (a={}, b={})",
            rule.a, rule.b, w.a, w.b
        )));
    }
    let required = f.degree() + g.degree() + w.matrix_part.degree();
    if rule.exactness_degree < required {
        return Err(Error::InsufficientExactness {
            required,
            available: rule.exactness_degree,
        });
    }
    let mut acc = Block::zeros(d, d);
    for (x, wgt) in rule.nodes.iter().zip(&rule.weights) {
        acc += f.eval(*x) * w.matrix_part.eval(*x) * g.eval(*x).transpose() * *wgt;
    }
    if let Some(m) = &w.atom0 {
        acc += f.eval(0.0) * m * g.eval(0.0).transpose();
    }
    Ok(acc)
}

/// A rule sized for integrands of the given polynomial degree against `w`.
pub fn rule_for(w: &WeightSpec, poly_degree: usize) -> Result<QuadratureRule> {
    gauss_jacobi_rule(w.a, w.b, poly_degree / 2 + 1)
}

/// Values `Q_0(x)..Q_{count-1}(x)` straight from the three-term recurrence.
///
/// The monomial coefficients of `Q_n` grow like `‖L_n‖`, so Horner
/// evaluation cancels catastrophically past degree ~8; the recurrence stays
/// accurate and is what every chain integral below uses.
pub fn polynomial_values_at(p: &BlockSequence, count: usize, x: f64) -> Result<Vec<Block>> {
    let levels = levels_for_recurrence(p, count)?;
    Ok(values_from_levels(&levels, p.d(), count, x))
}

struct RecurrenceLevel {
    a_inv: Block,
    b: Block,
    c: Option<Block>,
}

fn levels_for_recurrence(p: &BlockSequence, count: usize) -> Result<Vec<RecurrenceLevel>> {
    if p.band() != Band::Tridiagonal {
        return Err(Error::BandMismatch("polynomial recurrence needs a tridiagonal chain".into()));
    }
    let mut out = Vec::new();
    for n in 0..count.saturating_sub(1) {
        let LevelBlocks::Tri { c, b, a } = p.level(n)? else { unreachable!() };
        out.push(RecurrenceLevel {
            a_inv: checked_inverse(&a, &format!("A_{n}"))?,
            b,
            c,
        });
    }
    Ok(out)
}

fn values_from_levels(levels: &[RecurrenceLevel], d: usize, count: usize, x: f64) -> Vec<Block> {
    let mut vals = Vec::with_capacity(count);
    vals.push(Block::identity(d, d));
    for (n, lvl) in levels.iter().enumerate().take(count - 1) {
        let mut rhs = vals[n].clone() * x - &lvl.b * &vals[n];
        if n >= 1 {
            rhs -= lvl.c.as_ref().expect("level >= 1 has C_n") * &vals[n - 1];
        }
        vals.push(&lvl.a_inv * rhs);
    }
    vals
}

/// `(x^s Q_i, Q_j)_W` for the chain's own polynomials, integrated with
/// recurrence-evaluated node values and an automatically sized rule.
pub fn chain_inner_product(
    p: &BlockSequence,
    w: &WeightSpec,
    s: usize,
    i: usize,
    j: usize,
) -> Result<Block> {
    let d = w.d();
    if p.d() != d {
        return Err(Error::DimensionMismatch("chain/weight dimensions".into()));
    }
    let count = i.max(j) + 1;
    let levels = levels_for_recurrence(p, count)?;
    let required = s + i + j + w.matrix_part.degree();
    let rule = gauss_jacobi_rule(w.a, w.b, required / 2 + 1)?;
    let mut acc = Block::zeros(d, d);
    for (x, wgt) in rule.nodes.iter().zip(&rule.weights) {
        let vals = values_from_levels(&levels, d, count, *x);
        acc += &vals[i] * w.matrix_part.eval(*x) * vals[j].transpose() * (wgt * x.powi(s as i32));
    }
    if let Some(m) = &w.atom0 {
        if s == 0 {
            let vals = values_from_levels(&levels, d, count, 0.0);
            acc += &vals[i] * m * vals[j].transpose();
        }
    }
    Ok(acc)
}

/// Karlin–McGregor block `P^n_{ij} = (x^n Q_i, Q_j)_W (Q_j, Q_j)_W^{-1}`.
pub fn kmcg_entry(p: &BlockSequence, w: &WeightSpec, n: usize, i: usize, j: usize) -> Result<Block> {
    let num = chain_inner_product(p, w, n, i, j)?;
    let norm = chain_inner_product(p, w, 0, j, j)?;
    let norm_inv = checked_inverse(&norm, &format!("norm matrix of Q_{j}"))?;
    Ok(num * norm_inv)
}

/// Invariant measure blocks `π_n = (Π_n 𝐞)^T` with
/// `Π_n = (Q_n, Q_n)_W^{-1}`, for `n < m`.
pub fn invariant_measure(p: &BlockSequence, w: &WeightSpec, m: usize) -> Result<Vec<Vec<f64>>> {
    if m == 0 {
        return Err(Error::InvalidParameter("need at least one block".into()));
    }
    let mut out = Vec::with_capacity(m);
    for n in 0..m {
        let norm = chain_inner_product(p, w, 0, n, n)?;
        let pin = checked_inverse(&norm, &format!("norm matrix of Q_{n}"))?;
        let row = pin * ones(w.d());
        out.push(row.iter().cloned().collect());
    }
    Ok(out)
}

/// Geronimus transform: divides the density by `x` (`a -> a-1`) and adds the
/// point mass `M = α_0⁻¹ μ_0 - μ_{-1}` at 0. Needs `a > 0` so that
/// `μ_{-1}` exists.
pub fn geronimus_transform(
    w: &WeightSpec,
    alpha0: &Block,
    moments: &jacobi::MomentPair,
) -> Result<WeightSpec> {
    if w.a <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "mu_{{-1}} diverges at exponent a={}; Geronimus needs a > 0",
            w.a
        )));
    }
    let gm = jacobi::geronimus_mass(alpha0, moments)?;
    WeightSpec::new(w.a - 1.0, w.b, w.matrix_part.clone(), Some(gm.m))
}

/// Christoffel transform: multiplies the density by `x` (`a -> a+1`); any
/// point mass at 0 is annihilated by the factor `x`.
pub fn christoffel_transform(w: &WeightSpec) -> WeightSpec {
    WeightSpec {
        a: w.a + 1.0,
        b: w.b,
        matrix_part: w.matrix_part.clone(),
        atom0: None,
    }
}
