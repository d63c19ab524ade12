//! Bounded lattices used as abstract values.
//!
//! Every domain here is generic over the integer type used for interval
//! bounds (see [`Bound`]); the crate root fixes it to `i64` through type
//! aliases.

mod env;
mod flat;
mod interval;
mod set;
mod text;

use std::fmt;

use thiserror::Error;

pub use env::Env;
pub use flat::Flat;
pub use interval::{abstract_binop, Bound, ExtInt, Interval};
pub use set::FiniteSet;

/// Errors raised by lattice operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("lattice variant mismatch: {left} vs {right}")]
    Mismatch { left: &'static str, right: &'static str },
    #[error("widening contract violated: old value is not below the next value")]
    WidenContract,
    #[error("operator `{op}` is not defined on {domain} values")]
    Unsupported { op: BinOp, domain: &'static str },
}

/// A bounded join-semilattice with a widening operator.
///
/// Operations are fallible because some implementors (notably [`Value`]) are
/// tagged unions whose operations are only defined between equal variants.
pub trait Lattice: Clone + PartialEq + fmt::Debug + Send + Sync + 'static {
    fn join(&self, other: &Self) -> Result<Self, DomainError>;

    fn leq(&self, other: &Self) -> Result<bool, DomainError>;

    /// Widens `self` (the old value) towards `next`. Callers must ensure
    /// `self ⊑ next`, which holds when `next` was obtained by joining into `self`.
    fn widen(&self, next: &Self) -> Result<Self, DomainError>;

    fn is_bot(&self) -> bool;

    /// The bottom element of the same sort as `self`.
    fn bot_like(&self) -> Self;
}

/// Abstract arithmetic operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
}

impl BinOp {
    pub fn keyword(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
        }
    }

    pub(crate) fn apply_i64(self, a: i64, b: i64) -> Option<i64> {
        match self {
            BinOp::Add => a.checked_add(b),
            BinOp::Sub => a.checked_sub(b),
            BinOp::Mul => a.checked_mul(b),
        }
    }
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sym = match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
        };
        f.write_str(sym)
    }
}

/// The sort of a [`Value`]; determines the bottom element of an unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Interval,
    Env,
    Set,
    Flat,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::Interval => "interval",
            Domain::Env => "env",
            Domain::Set => "set",
            Domain::Flat => "flat",
        }
    }

    pub fn from_name(name: &str) -> Option<Domain> {
        match name {
            "interval" => Some(Domain::Interval),
            "env" => Some(Domain::Env),
            "set" => Some(Domain::Set),
            "flat" => Some(Domain::Flat),
            _ => None,
        }
    }

    pub fn bottom<B: Bound>(self) -> Value<B> {
        match self {
            Domain::Interval => Value::Interval(Interval::Empty),
            Domain::Env => Value::Env(Env::Unreachable),
            Domain::Set => Value::Set(FiniteSet::empty()),
            Domain::Flat => Value::Flat(Flat::Bot),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Tagged union over all supported domains.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value<B: Bound> {
    Interval(Interval<B>),
    Env(Env<B>),
    Set(FiniteSet),
    Flat(Flat),
}

impl<B: Bound> Value<B> {
    pub fn domain(&self) -> Domain {
        match self {
            Value::Interval(_) => Domain::Interval,
            Value::Env(_) => Domain::Env,
            Value::Set(_) => Domain::Set,
            Value::Flat(_) => Domain::Flat,
        }
    }

    pub fn as_interval(&self) -> Option<&Interval<B>> {
        match self {
            Value::Interval(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_env(&self) -> Option<&Env<B>> {
        match self {
            Value::Env(e) => Some(e),
            _ => None,
        }
    }

    fn mismatch(&self, other: &Self) -> DomainError {
        DomainError::Mismatch {
            left: self.domain().name(),
            right: other.domain().name(),
        }
    }

    /// Abstract arithmetic. Defined on intervals, and on flat values whose
    /// constants are integers (non-integer constants go to top).
    pub fn binop(&self, op: BinOp, other: &Self) -> Result<Self, DomainError> {
        match (self, other) {
            (Value::Interval(a), Value::Interval(b)) => Ok(Value::Interval(abstract_binop(op, a, b))),
            (Value::Flat(a), Value::Flat(b)) => Ok(Value::Flat(a.binop(op, b))),
            (a, b) if a.domain() == b.domain() => Err(DomainError::Unsupported {
                op,
                domain: a.domain().name(),
            }),
            (a, b) => Err(a.mismatch(b)),
        }
    }

    /// Parses the textual form of a value of the given sort.
    pub fn parse(text: &str, domain: Domain) -> Result<Self, crate::ParseError> {
        let mut cur = crate::text::Cursor::new(text, crate::text::Comments::None);
        let v = text::parse_value(&mut cur, domain)?;
        cur.skip_ws();
        if !cur.at_end() {
            return Err(cur.error("trailing input after value"));
        }
        Ok(v)
    }
}

impl<B: Bound> Lattice for Value<B> {
    fn join(&self, other: &Self) -> Result<Self, DomainError> {
        match (self, other) {
            (Value::Interval(a), Value::Interval(b)) => Ok(Value::Interval(a.join(b))),
            (Value::Env(a), Value::Env(b)) => Ok(Value::Env(a.join(b))),
            (Value::Set(a), Value::Set(b)) => Ok(Value::Set(a.join(b))),
            (Value::Flat(a), Value::Flat(b)) => Ok(Value::Flat(a.join(b))),
            (a, b) => Err(a.mismatch(b)),
        }
    }

    fn leq(&self, other: &Self) -> Result<bool, DomainError> {
        match (self, other) {
            (Value::Interval(a), Value::Interval(b)) => Ok(a.leq(b)),
            (Value::Env(a), Value::Env(b)) => Ok(a.leq(b)),
            (Value::Set(a), Value::Set(b)) => Ok(a.leq(b)),
            (Value::Flat(a), Value::Flat(b)) => Ok(a.leq(b)),
            (a, b) => Err(a.mismatch(b)),
        }
    }

    fn widen(&self, next: &Self) -> Result<Self, DomainError> {
        if !self.leq(next)? {
            return Err(DomainError::WidenContract);
        }
        match (self, next) {
            (Value::Interval(a), Value::Interval(b)) => Ok(Value::Interval(a.widen(b))),
            (Value::Env(a), Value::Env(b)) => Ok(Value::Env(a.widen(b))),
            // finite height: widening is join
            (Value::Set(a), Value::Set(b)) => Ok(Value::Set(a.join(b))),
            (Value::Flat(a), Value::Flat(b)) => Ok(Value::Flat(a.join(b))),
            (a, b) => Err(a.mismatch(b)),
        }
    }

    fn is_bot(&self) -> bool {
        match self {
            Value::Interval(i) => i.is_empty(),
            Value::Env(e) => e.is_unreachable(),
            Value::Set(s) => s.is_empty(),
            Value::Flat(f) => *f == Flat::Bot,
        }
    }

    fn bot_like(&self) -> Self {
        self.domain().bottom()
    }
}

impl<B: Bound> fmt::Display for Value<B> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Interval(i) => i.fmt(f),
            Value::Env(e) => e.fmt(f),
            Value::Set(s) => s.fmt(f),
            Value::Flat(v) => v.fmt(f),
        }
    }
}

impl<B: Bound> From<Interval<B>> for Value<B> {
    fn from(i: Interval<B>) -> Self {
        Value::Interval(i)
    }
}

impl<B: Bound> From<Env<B>> for Value<B> {
    fn from(e: Env<B>) -> Self {
        Value::Env(e)
    }
}

impl<B: Bound> From<FiniteSet> for Value<B> {
    fn from(s: FiniteSet) -> Self {
        Value::Set(s)
    }
}

impl<B: Bound> From<Flat> for Value<B> {
    fn from(v: Flat) -> Self {
        Value::Flat(v)
    }
}

pub(crate) use text::parse_value;
