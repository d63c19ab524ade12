use std::cmp::{max, min};
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use num_traits::{PrimInt, Signed};

use super::BinOp;

/// Integer types usable as finite interval bounds.
pub trait Bound: PrimInt + Signed + Hash + FromStr + fmt::Display + fmt::Debug + Send + Sync + 'static {}

impl<T> Bound for T where T: PrimInt + Signed + Hash + FromStr + fmt::Display + fmt::Debug + Send + Sync + 'static {}

/// An integer extended with both infinities. Variant order gives the total order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtInt<B> {
    NegInf,
    Fin(B),
    PosInf,
}

impl<B: Bound> ExtInt<B> {
    fn signum(self) -> i8 {
        match self {
            ExtInt::NegInf => -1,
            ExtInt::PosInf => 1,
            ExtInt::Fin(b) if b.is_zero() => 0,
            ExtInt::Fin(b) if b.is_negative() => -1,
            ExtInt::Fin(_) => 1,
        }
    }

    fn infinity(sign: i8) -> Self {
        if sign < 0 {
            ExtInt::NegInf
        } else {
            ExtInt::PosInf
        }
    }

    /// Product with `0 · ±∞ = 0`; finite overflow saturates to the signed infinity.
    fn mul(self, other: Self) -> Self {
        let sign = self.signum() * other.signum();
        if sign == 0 {
            return ExtInt::Fin(B::zero());
        }
        match (self, other) {
            (ExtInt::Fin(a), ExtInt::Fin(b)) => match a.checked_mul(&b) {
                Some(p) => ExtInt::Fin(p),
                None => Self::infinity(sign),
            },
            _ => Self::infinity(sign),
        }
    }
}

impl<B: Bound> fmt::Display for ExtInt<B> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtInt::NegInf => f.write_str("-inf"),
            ExtInt::PosInf => f.write_str("+inf"),
            ExtInt::Fin(b) => write!(f, "{b}"),
        }
    }
}

/// Integer interval, possibly empty or unbounded on either side.
///
/// A `Range` always satisfies `lo <= hi`, `lo != +inf` and `hi != -inf`;
/// [`Interval::new`] normalizes anything else to `Empty`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Interval<B> {
    Empty,
    Range { lo: ExtInt<B>, hi: ExtInt<B> },
}

impl<B: Bound> Interval<B> {
    pub fn new(lo: ExtInt<B>, hi: ExtInt<B>) -> Self {
        if lo > hi || lo == ExtInt::PosInf || hi == ExtInt::NegInf {
            Interval::Empty
        } else {
            Interval::Range { lo, hi }
        }
    }

    pub fn range(lo: B, hi: B) -> Self {
        Self::new(ExtInt::Fin(lo), ExtInt::Fin(hi))
    }

    pub fn constant(c: B) -> Self {
        Self::range(c, c)
    }

    pub fn top() -> Self {
        Interval::Range {
            lo: ExtInt::NegInf,
            hi: ExtInt::PosInf,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Interval::Empty)
    }

    pub fn is_top(&self) -> bool {
        *self == Self::top()
    }

    pub fn bounds(&self) -> Option<(ExtInt<B>, ExtInt<B>)> {
        match *self {
            Interval::Empty => None,
            Interval::Range { lo, hi } => Some((lo, hi)),
        }
    }

    pub fn contains(&self, x: B) -> bool {
        match *self {
            Interval::Empty => false,
            Interval::Range { lo, hi } => lo <= ExtInt::Fin(x) && ExtInt::Fin(x) <= hi,
        }
    }

    /// Convex hull.
    pub fn join(&self, other: &Self) -> Self {
        match (*self, *other) {
            (Interval::Empty, x) | (x, Interval::Empty) => x,
            (Interval::Range { lo: a, hi: b }, Interval::Range { lo: c, hi: d }) => Interval::Range {
                lo: min(a, c),
                hi: max(b, d),
            },
        }
    }

    pub fn meet(&self, other: &Self) -> Self {
        match (*self, *other) {
            (Interval::Empty, _) | (_, Interval::Empty) => Interval::Empty,
            (Interval::Range { lo: a, hi: b }, Interval::Range { lo: c, hi: d }) => Self::new(max(a, c), min(b, d)),
        }
    }

    pub fn leq(&self, other: &Self) -> bool {
        match (*self, *other) {
            (Interval::Empty, _) => true,
            (_, Interval::Empty) => false,
            (Interval::Range { lo: a, hi: b }, Interval::Range { lo: c, hi: d }) => c <= a && b <= d,
        }
    }

    /// Bound-jump widening: any bound that moved outwards goes to infinity.
    pub fn widen(&self, next: &Self) -> Self {
        match (*self, *next) {
            (Interval::Empty, x) => x,
            (x, Interval::Empty) => x,
            (Interval::Range { lo: a, hi: b }, Interval::Range { lo: c, hi: d }) => Interval::Range {
                lo: if c < a { ExtInt::NegInf } else { a },
                hi: if d > b { ExtInt::PosInf } else { b },
            },
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        match (*self, *other) {
            (Interval::Range { lo: a, hi: b }, Interval::Range { lo: c, hi: d }) => {
                let lo = match (a, c) {
                    (ExtInt::Fin(x), ExtInt::Fin(y)) => x.checked_add(&y).map_or(ExtInt::NegInf, ExtInt::Fin),
                    _ => ExtInt::NegInf,
                };
                let hi = match (b, d) {
                    (ExtInt::Fin(x), ExtInt::Fin(y)) => x.checked_add(&y).map_or(ExtInt::PosInf, ExtInt::Fin),
                    _ => ExtInt::PosInf,
                };
                Interval::Range { lo, hi }
            }
            _ => Interval::Empty,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        match (*self, *other) {
            (Interval::Range { lo: a, hi: b }, Interval::Range { lo: c, hi: d }) => {
                let lo = match (a, d) {
                    (ExtInt::Fin(x), ExtInt::Fin(y)) => x.checked_sub(&y).map_or(ExtInt::NegInf, ExtInt::Fin),
                    _ => ExtInt::NegInf,
                };
                let hi = match (b, c) {
                    (ExtInt::Fin(x), ExtInt::Fin(y)) => x.checked_sub(&y).map_or(ExtInt::PosInf, ExtInt::Fin),
                    _ => ExtInt::PosInf,
                };
                Interval::Range { lo, hi }
            }
            _ => Interval::Empty,
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        match (*self, *other) {
            (Interval::Range { lo: a, hi: b }, Interval::Range { lo: c, hi: d }) => {
                let products = [a.mul(c), a.mul(d), b.mul(c), b.mul(d)];
                let mut lo = *products.iter().min().expect("nonempty");
                let mut hi = *products.iter().max().expect("nonempty");
                // a saturated product can land on the wrong side; clamp to the
                // nearest representable bound
                if lo == ExtInt::PosInf {
                    lo = ExtInt::Fin(B::max_value());
                }
                if hi == ExtInt::NegInf {
                    hi = ExtInt::Fin(B::min_value());
                }
                Interval::Range { lo, hi }
            }
            _ => Interval::Empty,
        }
    }
}

/// Sound interval arithmetic; `Empty` absorbs.
pub fn abstract_binop<B: Bound>(op: BinOp, a: &Interval<B>, b: &Interval<B>) -> Interval<B> {
    match op {
        BinOp::Add => a.add(b),
        BinOp::Sub => a.sub(b),
        BinOp::Mul => a.mul(b),
    }
}

impl<B: Bound> fmt::Display for Interval<B> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Interval::Empty => f.write_str("bot"),
            Interval::Range { lo, hi } => write!(f, "[{lo},{hi}]"),
        }
    }
}
