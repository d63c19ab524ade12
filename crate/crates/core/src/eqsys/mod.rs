//! Side-effecting equation systems.
//!
//! An [`EquationSystem`] assigns a right-hand side ([`RhsExpr`]) to every
//! local unknown. Globals have no right-hand side and only accumulate
//! contributions made through `set`. Solvers talk to a system exclusively
//! through the [`ConstraintSystem`] trait, so they never need to know the
//! dependency structure up front.

mod expr;
mod parse;
mod synth;

use std::borrow::Cow;
use std::collections::HashMap;
use std::fmt;

pub use expr::{eval_rhs, RhsExpr, Transfer};
pub use parse::{parse_system, serialize_system};
pub use synth::{generate_synthetic, SyntheticParams};

use crate::lattice::{Domain, Lattice};
use crate::{Error, Value};

/// Interned identity of an unknown within one system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Unknown(u32);

impl Unknown {
    pub fn from_index(i: usize) -> Self {
        Unknown(u32::try_from(i).expect("unknown index overflows u32"))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Unknown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Local,
    Global,
}

/// The `get` / `set` / `demand` interface a solver hands to a right-hand side.
pub trait Effects<V> {
    fn get(&mut self, u: Unknown) -> Result<V, Error>;
    fn set(&mut self, g: Unknown, contribution: V) -> Result<(), Error>;
    fn demand(&mut self, u: Unknown) -> Result<(), Error>;
}

/// What a solver needs to know about a system.
pub trait ConstraintSystem: Sync {
    type Value: Lattice;

    fn is_global(&self, u: Unknown) -> bool;

    /// Initial value of `u`.
    fn bottom(&self, u: Unknown) -> Self::Value;

    /// Evaluates the right-hand side of the local `u`.
    fn eval(&self, u: Unknown, fx: &mut dyn Effects<Self::Value>) -> Result<Self::Value, Error>;

    fn label(&self, u: Unknown) -> Cow<'_, str>;
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    label: String,
    kind: Kind,
    domain: Domain,
    rhs: Option<RhsExpr>,
}

/// Errors raised while assembling a system programmatically.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BuildError {
    #[error("unknown `{0}` declared twice")]
    Duplicate(String),
    #[error("local `{0}` already has a right-hand side")]
    DuplicateRhs(String),
    #[error("`{0}` is a global and cannot have a right-hand side")]
    RhsOnGlobal(String),
}

/// An equation system with interned unknowns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EquationSystem {
    /// Uniform domain of every unknown, when there is one (file-based systems).
    lattice: Option<Domain>,
    entries: Vec<Entry>,
    by_label: HashMap<String, Unknown>,
    roots: Vec<Unknown>,
}

impl EquationSystem {
    pub fn new() -> Self {
        Self::default()
    }

    /// A system whose unknowns all live in `domain`; required for serialization.
    pub fn with_lattice(domain: Domain) -> Self {
        EquationSystem {
            lattice: Some(domain),
            ..Self::default()
        }
    }

    pub fn lattice(&self) -> Option<Domain> {
        self.lattice
    }

    fn declare(&mut self, label: &str, kind: Kind, domain: Domain) -> Result<Unknown, BuildError> {
        if self.by_label.contains_key(label) {
            return Err(BuildError::Duplicate(label.to_string()));
        }
        if self.lattice.is_some_and(|d| d != domain) {
            self.lattice = None;
        }
        let u = Unknown::from_index(self.entries.len());
        self.entries.push(Entry {
            label: label.to_string(),
            kind,
            domain,
            rhs: None,
        });
        self.by_label.insert(label.to_string(), u);
        Ok(u)
    }

    pub fn add_global(&mut self, label: &str, domain: Domain) -> Result<Unknown, BuildError> {
        self.declare(label, Kind::Global, domain)
    }

    /// Declares a local without defining it yet (for forward references).
    pub fn declare_local(&mut self, label: &str, domain: Domain) -> Result<Unknown, BuildError> {
        self.declare(label, Kind::Local, domain)
    }

    pub fn add_local(&mut self, label: &str, domain: Domain, rhs: RhsExpr) -> Result<Unknown, BuildError> {
        let u = self.declare_local(label, domain)?;
        self.define(u, rhs)?;
        Ok(u)
    }

    pub fn define(&mut self, u: Unknown, rhs: RhsExpr) -> Result<(), BuildError> {
        let entry = &mut self.entries[u.index()];
        match (entry.kind, &entry.rhs) {
            (Kind::Global, _) => Err(BuildError::RhsOnGlobal(entry.label.clone())),
            (Kind::Local, Some(_)) => Err(BuildError::DuplicateRhs(entry.label.clone())),
            (Kind::Local, None) => {
                entry.rhs = Some(rhs);
                Ok(())
            }
        }
    }

    pub fn lookup(&self, label: &str) -> Option<Unknown> {
        self.by_label.get(label).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn unknowns(&self) -> impl ExactSizeIterator<Item = Unknown> + '_ {
        (0..self.entries.len()).map(Unknown::from_index)
    }

    pub fn label_of(&self, u: Unknown) -> &str {
        &self.entries[u.index()].label
    }

    pub fn kind(&self, u: Unknown) -> Kind {
        self.entries[u.index()].kind
    }

    pub fn domain(&self, u: Unknown) -> Domain {
        self.entries[u.index()].domain
    }

    pub fn rhs(&self, u: Unknown) -> Option<&RhsExpr> {
        self.entries[u.index()].rhs.as_ref()
    }

    /// Records `u` as a designated root; duplicates are ignored.
    pub fn add_root(&mut self, u: Unknown) {
        if !self.roots.contains(&u) {
            self.roots.push(u);
        }
    }

    /// Designated roots, or the last declared local when none were given.
    pub fn roots(&self) -> Vec<Unknown> {
        if !self.roots.is_empty() {
            return self.roots.clone();
        }
        self.unknowns()
            .filter(|&u| self.kind(u) == Kind::Local)
            .last()
            .into_iter()
            .collect()
    }

    pub(crate) fn declared_roots(&self) -> &[Unknown] {
        &self.roots
    }

    /// True when no right-hand side contains a host closure.
    pub fn is_expression_only(&self) -> bool {
        self.entries
            .iter()
            .filter_map(|e| e.rhs.as_ref())
            .all(|r| !r.contains_transfer())
    }
}

impl ConstraintSystem for EquationSystem {
    type Value = Value;

    fn is_global(&self, u: Unknown) -> bool {
        self.kind(u) == Kind::Global
    }

    fn bottom(&self, u: Unknown) -> Value {
        self.domain(u).bottom()
    }

    fn eval(&self, u: Unknown, fx: &mut dyn Effects<Value>) -> Result<Value, Error> {
        match self.rhs(u) {
            Some(e) => eval_rhs(e, fx),
            None => Err(Error::MissingRhs(self.label_of(u).to_string())),
        }
    }

    fn label(&self, u: Unknown) -> Cow<'_, str> {
        Cow::Borrowed(self.label_of(u))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Interval;

    #[test]
    fn interning_and_kinds() {
        let mut sys = EquationSystem::with_lattice(Domain::Interval);
        let g = sys.add_global("g", Domain::Interval).unwrap();
        let x = sys
            .add_local("x", Domain::Interval, RhsExpr::Const(Interval::range(1, 2).into()))
            .unwrap();
        assert_eq!(sys.lookup("g"), Some(g));
        assert_eq!(sys.lookup("x"), Some(x));
        assert!(sys.is_global(g) && !sys.is_global(x));
        assert_eq!(
            sys.add_global("x", Domain::Interval),
            Err(BuildError::Duplicate("x".into()))
        );
        assert_eq!(
            sys.define(x, RhsExpr::Get(g)),
            Err(BuildError::DuplicateRhs("x".into()))
        );
        assert_eq!(sys.define(g, RhsExpr::Get(x)), Err(BuildError::RhsOnGlobal("g".into())));
        assert_eq!(sys.lattice(), Some(Domain::Interval));
    }

    #[test]
    fn missing_rhs_is_reported() {
        let mut sys = EquationSystem::new();
        let x = sys.declare_local("lonely", Domain::Flat).unwrap();
        struct NoFx;
        impl Effects<Value> for NoFx {
            fn get(&mut self, _: Unknown) -> Result<Value, Error> {
                unreachable!()
            }
            fn set(&mut self, _: Unknown, _: Value) -> Result<(), Error> {
                unreachable!()
            }
            fn demand(&mut self, _: Unknown) -> Result<(), Error> {
                unreachable!()
            }
        }
        let err = sys.eval(x, &mut NoFx).unwrap_err();
        assert!(matches!(err, Error::MissingRhs(l) if l == "lonely"));
    }
}
