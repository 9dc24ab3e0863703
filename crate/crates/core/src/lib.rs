//! Stochastic UL/LU block factorization of quasi-birth-and-death (QBD)
//! transition matrices and the spectral machinery that goes with it.
//!
//! A discrete-time QBD process on `Z≥0 × {1..d}` has a block tridiagonal
//! one-step transition matrix `P` with `d×d` blocks. This crate factors `P`
//! into stochastic upper- and lower-bidiagonal block factors, reverses the
//! factors (a discrete Darboux transformation) to produce new QBD processes,
//! and exposes the associated spectral objects: matrix-valued orthogonal
//! polynomials, Karlin–McGregor n-step probabilities, invariant measures and
//! the Geronimus/Christoffel transforms of the spectral weight. The matrix
//! Jacobi family on `[0,1]` is implemented in closed form together with the
//! urn experiments that realize its factor entries as ball-drawing
//! probabilities.

pub mod blockmat;
pub mod darboux;
pub mod error;
pub mod factorization;
pub mod jacobi;
pub mod poly;
pub mod spectral;
pub mod urnsim;
pub mod verify;

pub use blockmat::{Band, Block, BlockSequence, LevelBlocks, StochasticityReport};
pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
