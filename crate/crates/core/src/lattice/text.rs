use std::collections::{BTreeMap, BTreeSet};

use super::{Bound, Domain, Env, ExtInt, FiniteSet, Flat, Interval, Value};
use crate::text::Cursor;
use crate::ParseError;

pub(crate) fn parse_value<B: Bound>(cur: &mut Cursor<'_>, domain: Domain) -> Result<Value<B>, ParseError> {
    Ok(match domain {
        Domain::Interval => Value::Interval(parse_interval(cur)?),
        Domain::Env => Value::Env(parse_env(cur)?),
        Domain::Set => Value::Set(parse_set(cur)?),
        Domain::Flat => Value::Flat(parse_flat(cur)?),
    })
}

fn parse_bound<B: Bound>(cur: &mut Cursor<'_>) -> Result<ExtInt<B>, ParseError> {
    if cur.eat("-inf") {
        return Ok(ExtInt::NegInf);
    }
    if cur.eat("+inf") || cur.eat("inf") {
        return Ok(ExtInt::PosInf);
    }
    let start = cur.pos();
    let digits = cur
        .integer()
        .ok_or_else(|| cur.error("expected an integer bound or ±inf"))?;
    digits
        .parse::<B>()
        .map(ExtInt::Fin)
        .map_err(|_| cur.error_at(start, format!("bound `{digits}` out of range")))
}

fn parse_interval<B: Bound>(cur: &mut Cursor<'_>) -> Result<Interval<B>, ParseError> {
    if cur.eat_keyword("bot") {
        return Ok(Interval::Empty);
    }
    if cur.eat_keyword("top") {
        return Ok(Interval::top());
    }
    let start = cur.pos();
    cur.expect("[")?;
    let lo = parse_bound(cur)?;
    cur.expect(",")?;
    let hi = parse_bound(cur)?;
    cur.expect("]")?;
    let i = Interval::new(lo, hi);
    if i.is_empty() {
        return Err(cur.error_at(
            start,
            "interval bounds out of order; write `bot` for the empty interval",
        ));
    }
    Ok(i)
}

fn parse_env<B: Bound>(cur: &mut Cursor<'_>) -> Result<Env<B>, ParseError> {
    if cur.eat_keyword("unreachable") || cur.eat_keyword("bot") {
        return Ok(Env::Unreachable);
    }
    if cur.eat_keyword("top") {
        return Ok(Env::top());
    }
    cur.expect("env{")?;
    let mut seen = BTreeMap::new();
    let mut env = Env::top();
    if !cur.eat("}") {
        loop {
            let start = cur.pos();
            let var = cur.ident("").ok_or_else(|| cur.error("expected a variable name"))?;
            cur.expect(":")?;
            let v = parse_interval(cur)?;
            if seen.insert(var.to_string(), ()).is_some() {
                return Err(cur.error_at(start, format!("variable `{var}` bound twice")));
            }
            env = env.with(var, v);
            if cur.eat("}") {
                break;
            }
            cur.expect(",")?;
        }
    }
    Ok(env)
}

fn parse_set(cur: &mut Cursor<'_>) -> Result<FiniteSet, ParseError> {
    if cur.eat_keyword("top") {
        return Ok(FiniteSet::All);
    }
    if cur.eat_keyword("bot") {
        return Ok(FiniteSet::empty());
    }
    cur.expect("{")?;
    let mut atoms = BTreeSet::new();
    if !cur.eat("}") {
        loop {
            let a = cur.atom().ok_or_else(|| cur.error("expected an atom"))?;
            atoms.insert(a.to_string());
            if cur.eat("}") {
                break;
            }
            cur.expect(",")?;
        }
    }
    Ok(FiniteSet::Elems(atoms))
}

fn parse_flat(cur: &mut Cursor<'_>) -> Result<Flat, ParseError> {
    if cur.eat_keyword("bot") {
        return Ok(Flat::Bot);
    }
    if cur.eat_keyword("top") {
        return Ok(Flat::Top);
    }
    cur.atom()
        .map(Flat::constant)
        .ok_or_else(|| cur.error("expected `bot`, `top` or a constant"))
}
