use std::collections::BTreeMap;
use std::fmt;

use super::{Bound, Interval};

/// Non-relational environment mapping program variables to intervals.
///
/// Variables without a binding are unconstrained (top). A binding is never
/// `Empty` and never top: setting a variable to `Empty` collapses the whole
/// environment to `Unreachable`, setting it to top removes the binding.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Env<B: Bound> {
    Unreachable,
    Reachable(BTreeMap<String, Interval<B>>),
}

impl<B: Bound> Default for Env<B> {
    fn default() -> Self {
        Env::Reachable(BTreeMap::new())
    }
}

impl<B: Bound> Env<B> {
    /// The reachable environment with no constraints.
    pub fn top() -> Self {
        Self::default()
    }

    pub fn is_unreachable(&self) -> bool {
        matches!(self, Env::Unreachable)
    }

    pub fn from_bindings<S, I>(bindings: I) -> Self
    where
        S: Into<String>,
        I: IntoIterator<Item = (S, Interval<B>)>,
    {
        bindings.into_iter().fold(Env::top(), |env, (k, v)| env.with(k, v))
    }

    /// Value of `var`; `Empty` when unreachable, top when unbound.
    pub fn get(&self, var: &str) -> Interval<B> {
        match self {
            Env::Unreachable => Interval::Empty,
            Env::Reachable(m) => m.get(var).copied().unwrap_or_else(Interval::top),
        }
    }

    pub fn bindings(&self) -> Option<&BTreeMap<String, Interval<B>>> {
        match self {
            Env::Unreachable => None,
            Env::Reachable(m) => Some(m),
        }
    }

    /// Strong update of `var`.
    pub fn with(self, var: impl Into<String>, value: Interval<B>) -> Self {
        match self {
            Env::Unreachable => Env::Unreachable,
            Env::Reachable(_) if value.is_empty() => Env::Unreachable,
            Env::Reachable(mut m) => {
                let var = var.into();
                if value.is_top() {
                    m.remove(&var);
                } else {
                    m.insert(var, value);
                }
                Env::Reachable(m)
            }
        }
    }

    /// Refines `var` by meeting it with `bound`.
    pub fn refine(self, var: &str, bound: &Interval<B>) -> Self {
        let current = self.get(var);
        let refined = current.meet(bound);
        self.with(var, refined)
    }

    pub fn join(&self, other: &Self) -> Self {
        match (self, other) {
            (Env::Unreachable, x) | (x, Env::Unreachable) => x.clone(),
            (Env::Reachable(a), Env::Reachable(b)) => {
                let m = a
                    .iter()
                    .filter_map(|(k, va)| {
                        let j = va.join(b.get(k)?);
                        (!j.is_top()).then(|| (k.clone(), j))
                    })
                    .collect();
                Env::Reachable(m)
            }
        }
    }

    pub fn leq(&self, other: &Self) -> bool {
        match (self, other) {
            (Env::Unreachable, _) => true,
            (_, Env::Unreachable) => false,
            (a @ Env::Reachable(_), Env::Reachable(b)) => b.iter().all(|(k, vb)| a.get(k).leq(vb)),
        }
    }

    /// Pointwise widening; variables bound on only one side end up unbound.
    pub fn widen(&self, next: &Self) -> Self {
        match (self, next) {
            (Env::Unreachable, x) => x.clone(),
            (x, Env::Unreachable) => x.clone(),
            (Env::Reachable(a), Env::Reachable(b)) => {
                let m = a
                    .iter()
                    .filter_map(|(k, va)| {
                        let w = va.widen(b.get(k)?);
                        (!w.is_top()).then(|| (k.clone(), w))
                    })
                    .collect();
                Env::Reachable(m)
            }
        }
    }
}

impl<B: Bound> fmt::Display for Env<B> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Env::Unreachable => f.write_str("unreachable"),
            Env::Reachable(m) => {
                f.write_str("env{")?;
                for (i, (k, v)) in m.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{k}:{v}")?;
                }
                f.write_str("}")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ExtInt;
    use proptest::prelude::*;

    type E = Env<i64>;

    fn iv(lo: i64, hi: i64) -> Interval<i64> {
        Interval::range(lo, hi)
    }

    #[test]
    fn empty_binding_collapses() {
        let e = E::from_bindings([("x", iv(0, 1))]);
        assert_eq!(e.clone().with("y", Interval::Empty), Env::Unreachable);
        assert_eq!(e.refine("x", &iv(5, 6)), Env::Unreachable);
    }

    #[test]
    fn absent_means_top() {
        let e = E::from_bindings([("x", iv(0, 1)), ("y", Interval::top())]);
        assert_eq!(e.get("y"), Interval::top());
        assert_eq!(e.bindings().unwrap().len(), 1);
        assert!(e.leq(&E::top()));
        assert!(!E::top().leq(&e));
    }

    #[test]
    fn join_drops_one_sided_bindings() {
        let a = E::from_bindings([("x", iv(0, 0)), ("y", iv(1, 1))]);
        let b = E::from_bindings([("x", iv(42, 42))]);
        assert_eq!(a.join(&b), E::from_bindings([("x", iv(0, 42))]));
        assert_eq!(a.join(&Env::Unreachable), a);
    }

    #[test]
    fn widen_pointwise() {
        let a = E::from_bindings([("x", iv(0, 0)), ("y", iv(5, 5))]);
        let b = E::from_bindings([("x", iv(0, 1)), ("y", iv(5, 5))]);
        assert_eq!(
            a.widen(&b),
            E::from_bindings([("x", Interval::new(ExtInt::Fin(0), ExtInt::PosInf)), ("y", iv(5, 5))])
        );
    }

    fn env() -> impl Strategy<Value = E> {
        let binding = prop_oneof![
            Just(None),
            (-20i64..20, 0i64..10).prop_map(|(lo, w)| Some(iv(lo, lo + w))),
            (-20i64..20).prop_map(|lo| Some(Interval::new(ExtInt::Fin(lo), ExtInt::PosInf))),
        ];
        prop_oneof![
            1 => Just(Env::Unreachable),
            6 => proptest::collection::vec(binding, 3).prop_map(|bs| {
                let mut e = E::top();
                for (name, b) in ["a", "b", "c"].iter().zip(bs) {
                    if let Some(b) = b {
                        e = e.with(*name, b);
                    }
                }
                e
            }),
        ]
    }

    proptest! {
        #[test]
        fn join_laws(a in env(), b in env(), c in env()) {
            prop_assert_eq!(a.join(&b), b.join(&a));
            prop_assert_eq!(a.join(&b).join(&c), a.join(&b.join(&c)));
            prop_assert_eq!(a.join(&a), a.clone());
            prop_assert!(a.leq(&a.join(&b)) && b.leq(&a.join(&b)));
        }

        #[test]
        fn order_laws(a in env(), b in env(), c in env()) {
            prop_assert!(a.leq(&a));
            if a.leq(&b) && b.leq(&c) { prop_assert!(a.leq(&c)); }
            if a.leq(&b) && b.leq(&a) { prop_assert_eq!(a, b); }
        }

        #[test]
        fn widening_chains_stabilize(start in env(), steps in proptest::collection::vec(env(), 1..30)) {
            let mut v = start;
            let mut changes = 0usize;
            for w in steps {
                let next = v.join(&w);
                let widened = v.widen(&next);
                prop_assert!(next.leq(&widened));
                if widened != v { changes += 1; }
                v = widened;
            }
            // three variables
            prop_assert!(changes <= 2 * 3 + 2);
        }
    }
}
