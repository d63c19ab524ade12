use std::collections::BTreeSet;
use std::fmt;

/// Powerset of atoms, bounded by an explicit `All` element.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FiniteSet {
    Elems(BTreeSet<String>),
    All,
}

impl FiniteSet {
    pub fn empty() -> Self {
        FiniteSet::Elems(BTreeSet::new())
    }

    pub fn of<S: Into<String>>(atoms: impl IntoIterator<Item = S>) -> Self {
        FiniteSet::Elems(atoms.into_iter().map(Into::into).collect())
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, FiniteSet::Elems(s) if s.is_empty())
    }

    pub fn join(&self, other: &Self) -> Self {
        match (self, other) {
            (FiniteSet::Elems(a), FiniteSet::Elems(b)) => FiniteSet::Elems(a.union(b).cloned().collect()),
            _ => FiniteSet::All,
        }
    }

    pub fn leq(&self, other: &Self) -> bool {
        match (self, other) {
            (_, FiniteSet::All) => true,
            (FiniteSet::All, FiniteSet::Elems(_)) => false,
            (FiniteSet::Elems(a), FiniteSet::Elems(b)) => a.is_subset(b),
        }
    }
}

impl fmt::Display for FiniteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FiniteSet::All => f.write_str("top"),
            FiniteSet::Elems(s) => {
                f.write_str("{")?;
                for (i, a) in s.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    f.write_str(a)?;
                }
                f.write_str("}")
            }
        }
    }
}
