//! Synthesis of linear-optical quantum state generators.
//!
//! A generator is a passive interferometer fed with Fock states, with
//! photon counters on some output modes. [`inverse`] finds mode matrices
//! whose heralded output equals a target state, [`scalingopt`] picks the
//! most probable member of each solution class, [`dilation`] embeds it in
//! a unitary with vacuum ancillas, [`circuit`] writes that unitary as a
//! beam-splitter mesh, and [`forward`] simulates the result independently.
//!
//! Polynomial types are generic over the coefficient field; the aliases
//! below fix the two fields in use.

pub mod circuit;
pub mod dilation;
pub mod error;
pub mod fockpoly;
pub mod forward;
pub mod inverse;
pub mod io;
mod linalg;
pub mod pipeline;
pub mod scalingopt;

pub use error::{Error, Result};
pub use fockpoly::{FockState, GaussianRational, Monomial, OperatorPoly, StateVector, SymbolicPoly};
pub use forward::{Convention, HeraldedOutput, MeasurementPattern, ModeMatrix};

/// Exact polynomials over the rationals.
pub type RationalPoly = fockpoly::Poly<num_rational::BigRational>;
/// Polynomials over a word-sized prime field.
pub type ModularPoly = fockpoly::Poly<inverse::modular::Zp>;
