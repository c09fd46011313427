//! Augmented-EFIE (PEEC-like) thin-wire dipole solver and greedy reduced-basis
//! frequency sweeps.
//!
//! The full-order model couples segment currents `j` and node potentials `φ`:
//!
//! ```text
//! [ R + iωL   Sᵀ  ] [ j ]   [ e_ext ]
//! [ P·S     −iω·1 ] [ φ ] = [   0   ]
//! ```
//!
//! Two reduced-order strategies are provided on top of it: a monolithic
//! projection of the stacked state and a block-structure-preserving projection
//! with separate current and potential bases.

pub mod analysis;
pub mod fom;
pub mod geometry;
pub mod io;
pub mod mor;
pub mod numerics;
pub mod quadrature;

pub use num_complex::Complex64;

/// Vacuum permeability (H/m).
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Vacuum permittivity (F/m).
pub const EPS0: f64 = 8.854_187_812_8e-12;

/// Default delta-gap voltage, so that `Z = 1 / j_feed`.
pub const DEFAULT_V_GAP: f64 = 1.0;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("degenerate geometry: elements {0} and {1} have center distance {2:e} m")]
    DegeneratePair(usize, usize, f64),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("singular matrix: pivot {pivot} has magnitude {magnitude:e}")]
    Singular { pivot: usize, magnitude: f64 },
    #[error("full-order solve failed at omega = {omega:e} rad/s: {source}")]
    SolveFailed {
        omega: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("zero feed current; impedance undefined")]
    ZeroFeedCurrent,
    #[error("zero reference impedance")]
    ZeroReference,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
