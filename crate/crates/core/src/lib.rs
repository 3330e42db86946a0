//! Higher-order variational calculus on truncated Taylor data.
//!
//! Every derivative in this crate is obtained by evaluating user functions on [`JetScalar`]
//! arguments. Points of iterated higher tangent bundles are stored in a single global chart as
//! arrays of jet coefficients, and the canonical morphisms between those bundles act by
//! re-indexing and weighting coefficients.

pub mod bundles;
pub mod canonical;
pub mod checks;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod linalg;
pub mod solver;
pub mod variational;
pub mod weil;

pub use bundles::{
    curve_jet, CurveEvaluator, HigherVelocity, LiftedVectorElement, SemiHolonomicElement,
};
pub use error::{Error, ParseErrorKind, Result, SourcePos};
pub use weil::{ElementaryFn, JetScalar, JetShape, Reinterpret};
