use std::fmt;

use super::BinOp;

/// Flat lattice over named constants: `Bot ⊑ Const(a) ⊑ Top`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Flat {
    Bot,
    Const(String),
    Top,
}

impl Flat {
    pub fn constant(atom: impl Into<String>) -> Self {
        Flat::Const(atom.into())
    }

    pub fn join(&self, other: &Self) -> Self {
        match (self, other) {
            (Flat::Bot, x) | (x, Flat::Bot) => x.clone(),
            (Flat::Const(a), Flat::Const(b)) if a == b => self.clone(),
            _ => Flat::Top,
        }
    }

    pub fn leq(&self, other: &Self) -> bool {
        match (self, other) {
            (Flat::Bot, _) | (_, Flat::Top) => true,
            (Flat::Const(a), Flat::Const(b)) => a == b,
            _ => false,
        }
    }

    /// Constant folding over integer atoms.
    pub(crate) fn binop(&self, op: BinOp, other: &Self) -> Self {
        match (self, other) {
            (Flat::Bot, _) | (_, Flat::Bot) => Flat::Bot,
            (Flat::Const(a), Flat::Const(b)) => match (a.parse::<i64>(), b.parse::<i64>()) {
                (Ok(x), Ok(y)) => op.apply_i64(x, y).map_or(Flat::Top, |r| Flat::Const(r.to_string())),
                _ => Flat::Top,
            },
            _ => Flat::Top,
        }
    }
}

impl fmt::Display for Flat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flat::Bot => f.write_str("bot"),
            Flat::Top => f.write_str("top"),
            Flat::Const(a) => f.write_str(a),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order() {
        let a = Flat::constant("a");
        assert!(Flat::Bot.leq(&a) && a.leq(&Flat::Top));
        assert!(!a.leq(&Flat::constant("b")));
        assert_eq!(a.join(&Flat::constant("b")), Flat::Top);
        assert_eq!(a.join(&Flat::Bot), a);
    }

    #[test]
    fn folding() {
        let r = Flat::constant("6").binop(BinOp::Mul, &Flat::constant("7"));
        assert_eq!(r, Flat::constant("42"));
        assert_eq!(Flat::constant("x").binop(BinOp::Add, &Flat::constant("1")), Flat::Top);
        assert_eq!(Flat::Bot.binop(BinOp::Add, &Flat::Top), Flat::Bot);
    }
}
