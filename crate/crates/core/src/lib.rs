//! Unbounded continuous first-order logic over gauged metric spaces.
//!
//! The crate provides, over exact rational arithmetic:
//!
//! - a calculus of uniform continuity moduli ([`modulus`]);
//! - formulas over unbounded continuous signatures with the connective
//!   system `{1, ∸, +, /2}` and `sup`/`inf` quantifiers ([`syntax`]);
//! - the syntactic boundedness / eventual-constancy analysis with
//!   quantitative bounds and modulus synthesis ([`analysis`]);
//! - finite gauged structures with exact evaluation under the
//!   point-at-infinity quantifier semantics, restricted-quantifier
//!   macros and prenex normalization ([`structure`]);
//! - the emboundment transform to bounded metric structures and its
//!   inverse ([`embound`]);
//! - theory files with approximate axiom schemes, measure algebras and
//!   sampled normed spaces ([`theories`]);
//! - ε-isomorphism certification between finite-dimensional normed
//!   spaces via exact linear programming ([`banach_mazur`]).

pub mod acceptance;
pub mod analysis;
pub mod banach_mazur;
pub mod corpus;
pub mod embound;
pub mod modulus;
pub mod rational;
pub mod sexp;
pub mod simplex;
pub mod structure;
pub mod syntax;
pub mod theories;

pub use analysis::{classify, AnalysisResult};
pub use modulus::ContinuityModulus;
pub use rational::{ExtendedValue, Rat};
pub use structure::{Assignment, GaugedStructure};
pub use syntax::{Formula, Signature, Term};
