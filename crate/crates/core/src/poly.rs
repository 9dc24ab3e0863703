//! Matrix-valued polynomials in the monomial basis.
//!
//! Coefficients are `d×d` blocks; arithmetic is exact on the coefficient
//! level, which keeps recurrence computations and differentiation sharp at
//! the degrees used here (≲ 40).

use crate::blockmat::Block;

/// Polynomial `sum_j coeffs[j] x^j` with `d×d` matrix coefficients.
#[derive(Clone, Debug)]
pub struct MatrixPolynomial {
    d: usize,
    coeffs: Vec<Block>,
}

impl MatrixPolynomial {
    pub fn from_coeffs(d: usize, coeffs: Vec<Block>) -> Self {
        assert!(coeffs.iter().all(|c| c.nrows() == d && c.ncols() == d));
        let mut p = MatrixPolynomial { d, coeffs };
        if p.coeffs.is_empty() {
            p.coeffs.push(Block::zeros(d, d));
        }
        p.trim();
        p
    }

    pub fn zero(d: usize) -> Self {
        MatrixPolynomial {
            d,
            coeffs: vec![Block::zeros(d, d)],
        }
    }

    pub fn identity(d: usize) -> Self {
        MatrixPolynomial {
            d,
            coeffs: vec![Block::identity(d, d)],
        }
    }

    /// Constant polynomial equal to `m`.
    pub fn constant(m: Block) -> Self {
        MatrixPolynomial {
            d: m.nrows(),
            coeffs: vec![m],
        }
    }

    fn trim(&mut self) {
        while self.coeffs.len() > 1
            && self.coeffs.last().map(|c| c.iter().all(|v| *v == 0.0)) == Some(true)
        {
            self.coeffs.pop();
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficient of `x^j` (zero block past the degree).
    pub fn coeff(&self, j: usize) -> Block {
        self.coeffs
            .get(j)
            .cloned()
            .unwrap_or_else(|| Block::zeros(self.d, self.d))
    }

    pub fn eval(&self, x: f64) -> Block {
        let mut acc = Block::zeros(self.d, self.d);
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return MatrixPolynomial::zero(self.d);
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, c)| c * j as f64)
            .collect();
        MatrixPolynomial::from_coeffs(self.d, coeffs)
    }

    /// Multiplication by `x`.
    pub fn shift_up(&self) -> Self {
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(Block::zeros(self.d, self.d));
        coeffs.extend(self.coeffs.iter().cloned());
        MatrixPolynomial::from_coeffs(self.d, coeffs)
    }

    /// `m * self` (matrix on the left of every coefficient).
    pub fn mul_matrix_left(&self, m: &Block) -> Self {
        MatrixPolynomial::from_coeffs(self.d, self.coeffs.iter().map(|c| m * c).collect())
    }

    /// `self * m`.
    pub fn mul_matrix_right(&self, m: &Block) -> Self {
        MatrixPolynomial::from_coeffs(self.d, self.coeffs.iter().map(|c| c * m).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len).map(|j| self.coeff(j) + other.coeff(j)).collect();
        MatrixPolynomial::from_coeffs(self.d, coeffs)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len).map(|j| self.coeff(j) - other.coeff(j)).collect();
        MatrixPolynomial::from_coeffs(self.d, coeffs)
    }

    /// Polynomial product `self * other` (coefficient order preserved).
    pub fn mul(&self, other: &Self) -> Self {
        let mut coeffs = vec![Block::zeros(self.d, self.d); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        MatrixPolynomial::from_coeffs(self.d, coeffs)
    }
}
