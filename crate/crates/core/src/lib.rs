//! Spectral laboratory for the Dirac-Beltrami equation D- F = M D+ F with
//! measurable coefficients on a periodic box.
//!
//! The crate provides exact exterior-algebra arithmetic, Fourier-multiplier
//! Hodge-Dirac operators, a Neumann-series solver with residual certificates,
//! the Cayley-transform bridge to divergence-form second-order equations, and
//! a harness for normal-families (Montel-type) compactness experiments.

pub mod algebra;
pub mod coefficient;
pub mod divform;
pub mod error;
pub mod grid;
pub mod io;
pub mod montel;
pub mod operators;
pub mod poly;
pub mod solver;
pub mod verify;

pub use algebra::{Blade, ComplexMultivector, Multivector, RealMultivector, Scalar};
pub use coefficient::{CoefficientField, CoefficientStructure};
pub use divform::{cayley, DivFormCoefficient, ScalarSolution};
pub use error::{Error, Result};
pub use grid::{BoxRegion, GridSpec, MultivectorField, SpectralField, SubdomainSpec};
pub use poly::{harmonic_basis, make_monogenic, PolyMultivector};
pub use solver::{residual, solve, SolveOptions, SolveReport};
