//! Fixpoint engine for side-effecting constraint systems.
//!
//! The sequential top-down solver ([`solver::solve_seq`]) and two parallel
//! variants ([`solver::solve_immediate`], [`solver::solve_independent`]) all
//! consume the [`ConstraintSystem`] trait. Systems come from the expression
//! language in [`eqsys`] or from the toy-language [`frontend`]; [`verify`]
//! checks results independently of any solver.
//!
//! Lattices are generic over the integer type of interval bounds; the
//! aliases at the crate root fix it to `i64`.

pub mod eqsys;
mod error;
pub mod frontend;
pub mod lattice;
pub mod solver;
mod text;
pub mod verify;

pub use eqsys::{ConstraintSystem, Effects, EquationSystem, Kind, RhsExpr, Unknown};
pub use error::{Error, Result};
pub use lattice::{BinOp, Domain, DomainError, FiniteSet, Flat, Lattice};
pub use text::ParseError;

/// Interval over `i64` bounds.
pub type Interval = lattice::Interval<i64>;
/// Interval environment over `i64` bounds.
pub type Env = lattice::Env<i64>;
/// Lattice value over `i64` bounds.
pub type Value = lattice::Value<i64>;
/// Extended integer over `i64`.
pub type ExtInt = lattice::ExtInt<i64>;
