use std::fmt;
use std::sync::Arc;

use super::{Effects, Unknown};
use crate::lattice::{BinOp, Lattice};
use crate::{Error, Value};

type TransferFn = dyn Fn(&mut dyn Effects<Value>) -> Result<Value, Error> + Send + Sync;

/// Host-provided right-hand side. Must be a pure function of what it reads
/// through the effect interface.
#[derive(Clone)]
pub struct Transfer(Arc<TransferFn>);

impl Transfer {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&mut dyn Effects<Value>) -> Result<Value, Error> + Send + Sync + 'static,
    {
        Transfer(Arc::new(f))
    }

    pub fn call(&self, fx: &mut dyn Effects<Value>) -> Result<Value, Error> {
        (self.0)(fx)
    }
}

impl fmt::Debug for Transfer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Transfer(..)")
    }
}

impl PartialEq for Transfer {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

/// Right-hand-side expression.
#[derive(Debug, Clone, PartialEq)]
pub enum RhsExpr {
    Const(Value),
    Get(Unknown),
    Binop(BinOp, Box<RhsExpr>, Box<RhsExpr>),
    Join(Box<RhsExpr>, Box<RhsExpr>),
    /// Contributes the value to a global; evaluates to that value.
    Set(Unknown, Box<RhsExpr>),
    /// Promotes an unknown to the top level. Yields the flat bottom, so it
    /// only makes sense in a non-final `Seq` position.
    Demand(Unknown),
    Let(String, Box<RhsExpr>, Box<RhsExpr>),
    Var(String),
    /// Evaluates left to right, yields the last value.
    Seq(Vec<RhsExpr>),
    Transfer(Transfer),
}

impl RhsExpr {
    pub fn binop(op: BinOp, a: RhsExpr, b: RhsExpr) -> Self {
        RhsExpr::Binop(op, Box::new(a), Box::new(b))
    }

    pub fn join(a: RhsExpr, b: RhsExpr) -> Self {
        RhsExpr::Join(Box::new(a), Box::new(b))
    }

    pub fn set(g: Unknown, v: RhsExpr) -> Self {
        RhsExpr::Set(g, Box::new(v))
    }

    pub fn let_in(name: impl Into<String>, bound: RhsExpr, body: RhsExpr) -> Self {
        RhsExpr::Let(name.into(), Box::new(bound), Box::new(body))
    }

    pub fn var(name: impl Into<String>) -> Self {
        RhsExpr::Var(name.into())
    }

    pub(crate) fn contains_transfer(&self) -> bool {
        match self {
            RhsExpr::Transfer(_) => true,
            RhsExpr::Const(_) | RhsExpr::Get(_) | RhsExpr::Demand(_) | RhsExpr::Var(_) => false,
            RhsExpr::Binop(_, a, b) | RhsExpr::Join(a, b) | RhsExpr::Let(_, a, b) => {
                a.contains_transfer() || b.contains_transfer()
            }
            RhsExpr::Set(_, e) => e.contains_transfer(),
            RhsExpr::Seq(es) => es.iter().any(RhsExpr::contains_transfer),
        }
    }

    /// Every unknown mentioned, in evaluation order (with repetitions).
    pub fn mentions(&self, out: &mut Vec<Unknown>) {
        match self {
            RhsExpr::Get(u) | RhsExpr::Demand(u) => out.push(*u),
            RhsExpr::Set(g, e) => {
                e.mentions(out);
                out.push(*g);
            }
            RhsExpr::Binop(_, a, b) | RhsExpr::Join(a, b) | RhsExpr::Let(_, a, b) => {
                a.mentions(out);
                b.mentions(out);
            }
            RhsExpr::Seq(es) => es.iter().for_each(|e| e.mentions(out)),
            RhsExpr::Const(_) | RhsExpr::Var(_) | RhsExpr::Transfer(_) => {}
        }
    }
}

/// Evaluates `e` against the effect interface, strictly left to right.
///
/// `Demand` has no value of its own; used in value position it yields the
/// flat bottom, which makes any surrounding lattice operation fail loudly.
pub fn eval_rhs(e: &RhsExpr, fx: &mut dyn Effects<Value>) -> Result<Value, Error> {
    let mut scope = Vec::new();
    eval_in(e, fx, &mut scope)
}

fn eval_in<'e>(e: &'e RhsExpr, fx: &mut dyn Effects<Value>, scope: &mut Vec<(&'e str, Value)>) -> Result<Value, Error> {
    match e {
        RhsExpr::Const(v) => Ok(v.clone()),
        RhsExpr::Get(u) => fx.get(*u),
        RhsExpr::Binop(op, a, b) => {
            let a = eval_in(a, fx, scope)?;
            let b = eval_in(b, fx, scope)?;
            Ok(a.binop(*op, &b)?)
        }
        RhsExpr::Join(a, b) => {
            let a = eval_in(a, fx, scope)?;
            let b = eval_in(b, fx, scope)?;
            Ok(a.join(&b)?)
        }
        RhsExpr::Set(g, v) => {
            let v = eval_in(v, fx, scope)?;
            fx.set(*g, v.clone())?;
            Ok(v)
        }
        RhsExpr::Demand(u) => {
            fx.demand(*u)?;
            Ok(Value::Flat(crate::Flat::Bot))
        }
        RhsExpr::Let(name, bound, body) => {
            let v = eval_in(bound, fx, scope)?;
            scope.push((name.as_str(), v));
            let r = eval_in(body, fx, scope);
            scope.pop();
            r
        }
        RhsExpr::Var(name) => scope
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| Error::UnboundVariable(name.clone())),
        RhsExpr::Seq(es) => {
            let (last, init) = es.split_last().ok_or_else(|| Error::Other("empty seq".into()))?;
            for e in init {
                eval_in(e, fx, scope)?;
            }
            eval_in(last, fx, scope)
        }
        RhsExpr::Transfer(t) => t.call(fx),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Interval;

    #[derive(Debug, PartialEq)]
    enum Event {
        Get(Unknown),
        Set(Unknown, Value),
        Demand(Unknown),
    }

    struct Recorder<F: Fn(Unknown) -> Value> {
        lookup: F,
        events: Vec<Event>,
    }

    impl<F: Fn(Unknown) -> Value> Effects<Value> for Recorder<F> {
        fn get(&mut self, u: Unknown) -> Result<Value, Error> {
            self.events.push(Event::Get(u));
            Ok((self.lookup)(u))
        }
        fn set(&mut self, g: Unknown, v: Value) -> Result<(), Error> {
            self.events.push(Event::Set(g, v));
            Ok(())
        }
        fn demand(&mut self, u: Unknown) -> Result<(), Error> {
            self.events.push(Event::Demand(u));
            Ok(())
        }
    }

    fn iv(lo: i64, hi: i64) -> Value {
        Interval::range(lo, hi).into()
    }

    fn u(i: usize) -> Unknown {
        Unknown::from_index(i)
    }

    #[test]
    fn increment_after_read() {
        // ⟨12⟩ = get ⟨11⟩ + [1,1]
        let e = RhsExpr::binop(BinOp::Add, RhsExpr::Get(u(11)), RhsExpr::Const(iv(1, 1)));
        let mut rec = Recorder {
            lookup: |_| iv(0, 42),
            events: vec![],
        };
        assert_eq!(eval_rhs(&e, &mut rec).unwrap(), iv(1, 43));
        assert_eq!(rec.events, vec![Event::Get(u(11))]);
    }

    #[test]
    fn write_to_global() {
        // ⟨4⟩ = let d = get ⟨3⟩ in (set g d; d)
        let g = u(0);
        let e = RhsExpr::let_in(
            "d",
            RhsExpr::Get(u(3)),
            RhsExpr::Seq(vec![RhsExpr::set(g, RhsExpr::var("d")), RhsExpr::var("d")]),
        );
        let mut rec = Recorder {
            lookup: |_| iv(42, 42),
            events: vec![],
        };
        assert_eq!(eval_rhs(&e, &mut rec).unwrap(), iv(42, 42));
        assert_eq!(rec.events, vec![Event::Get(u(3)), Event::Set(g, iv(42, 42))]);
    }

    #[test]
    fn thread_creation_sets_then_demands() {
        // ⟨10⟩ = let d = get ⟨9⟩ in (set ⟨3⟩ [42,42]; demand ⟨5⟩; d)
        let e = RhsExpr::let_in(
            "d",
            RhsExpr::Get(u(9)),
            RhsExpr::Seq(vec![
                RhsExpr::set(u(3), RhsExpr::Const(iv(42, 42))),
                RhsExpr::Demand(u(5)),
                RhsExpr::var("d"),
            ]),
        );
        let mut rec = Recorder {
            lookup: |_| iv(-7, 7),
            events: vec![],
        };
        assert_eq!(eval_rhs(&e, &mut rec).unwrap(), iv(-7, 7));
        assert_eq!(
            rec.events,
            vec![Event::Get(u(9)), Event::Set(u(3), iv(42, 42)), Event::Demand(u(5))]
        );
    }

    #[test]
    fn unbound_variable() {
        let e = RhsExpr::let_in("a", RhsExpr::Const(iv(0, 0)), RhsExpr::var("b"));
        let mut rec = Recorder {
            lookup: |_| iv(0, 0),
            events: vec![],
        };
        assert!(matches!(eval_rhs(&e, &mut rec), Err(Error::UnboundVariable(v)) if v == "b"));
    }

    #[test]
    fn let_shadowing_and_scope_exit() {
        let e = RhsExpr::join(
            RhsExpr::let_in(
                "a",
                RhsExpr::Const(iv(0, 0)),
                RhsExpr::let_in("a", RhsExpr::Const(iv(5, 5)), RhsExpr::var("a")),
            ),
            RhsExpr::Const(iv(1, 1)),
        );
        let mut rec = Recorder {
            lookup: |_| iv(0, 0),
            events: vec![],
        };
        assert_eq!(eval_rhs(&e, &mut rec).unwrap(), iv(1, 5));
    }

    #[test]
    fn domain_errors_propagate() {
        let e = RhsExpr::join(RhsExpr::Const(iv(0, 0)), RhsExpr::Const(Value::Flat(crate::Flat::Top)));
        let mut rec = Recorder {
            lookup: |_| iv(0, 0),
            events: vec![],
        };
        assert!(matches!(eval_rhs(&e, &mut rec), Err(Error::Domain(_))));
    }
}
