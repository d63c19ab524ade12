//! Text format for equation systems.
//!
//! ```text
//! lattice interval;
//! g: global
//! x: local = add(get y, const [1,1])
//! y: local = seq(set g const [0,0]; const [1,2])
//! root x
//! ```
//!
//! `root NAME` lines are optional; without them the last declared local is the root.

use std::fmt::Write as _;

use super::{EquationSystem, Kind, RhsExpr, Unknown};
use crate::lattice::{parse_value, BinOp, Domain};
use crate::text::{Comments, Cursor};
use crate::{Error, ParseError};

const KEYWORDS: &[&str] = &[
    "const", "get", "add", "sub", "mul", "join", "set", "demand", "let", "in", "seq", "global", "local", "lattice",
];

/// Expression with unresolved unknown names.
enum Ast {
    Const(crate::Value),
    Get(String, usize),
    Binop(BinOp, Box<Ast>, Box<Ast>),
    Join(Box<Ast>, Box<Ast>),
    Set(String, usize, Box<Ast>),
    Demand(String, usize),
    Let(String, Box<Ast>, Box<Ast>),
    Var(String, usize),
    Seq(Vec<Ast>),
}

enum Item {
    Global(String, usize),
    Local(String, usize, Ast),
    Root(String, usize),
}

struct Parser<'a> {
    cur: Cursor<'a>,
    lattice: Domain,
}

impl<'a> Parser<'a> {
    fn name(&mut self, what: &str) -> Result<(String, usize), ParseError> {
        self.cur.skip_ws();
        let pos = self.cur.pos();
        match self.cur.ident(".'") {
            Some(n) if !KEYWORDS.contains(&n) => Ok((n.to_string(), pos)),
            Some(n) => Err(self.cur.error_at(pos, format!("keyword `{n}` used as {what}"))),
            None => Err(self.cur.error(format!("expected {what}"))),
        }
    }

    fn pair(&mut self) -> Result<(Ast, Ast), ParseError> {
        self.cur.expect("(")?;
        let a = self.expr()?;
        self.cur.expect(",")?;
        let b = self.expr()?;
        self.cur.expect(")")?;
        Ok((a, b))
    }

    fn expr(&mut self) -> Result<Ast, ParseError> {
        let c = &mut self.cur;
        if c.eat_keyword("const") {
            return Ok(Ast::Const(parse_value(c, self.lattice)?));
        }
        if c.eat_keyword("get") {
            let (n, p) = self.name("an unknown name")?;
            return Ok(Ast::Get(n, p));
        }
        for op in [BinOp::Add, BinOp::Sub, BinOp::Mul] {
            if self.cur.eat_keyword(op.keyword()) {
                let (a, b) = self.pair()?;
                return Ok(Ast::Binop(op, Box::new(a), Box::new(b)));
            }
        }
        if self.cur.eat_keyword("join") {
            let (a, b) = self.pair()?;
            return Ok(Ast::Join(Box::new(a), Box::new(b)));
        }
        if self.cur.eat_keyword("set") {
            let (n, p) = self.name("an unknown name")?;
            let v = self.expr()?;
            return Ok(Ast::Set(n, p, Box::new(v)));
        }
        if self.cur.eat_keyword("demand") {
            let (n, p) = self.name("an unknown name")?;
            return Ok(Ast::Demand(n, p));
        }
        if self.cur.eat_keyword("let") {
            let (n, _) = self.name("a variable name")?;
            self.cur.expect("=")?;
            let bound = self.expr()?;
            if !self.cur.eat_keyword("in") {
                return Err(self.cur.error("expected `in`"));
            }
            let body = self.expr()?;
            return Ok(Ast::Let(n, Box::new(bound), Box::new(body)));
        }
        if self.cur.eat_keyword("seq") {
            self.cur.expect("(")?;
            let mut es = vec![self.expr()?];
            while self.cur.eat(";") {
                es.push(self.expr()?);
            }
            self.cur.expect(")")?;
            return Ok(Ast::Seq(es));
        }
        let (n, p) = self.name("an expression")?;
        Ok(Ast::Var(n, p))
    }

    fn item(&mut self) -> Result<Item, ParseError> {
        let (name, pos) = self.name("an unknown name")?;
        if name == "root" && self.cur.peek() != Some(':') {
            let (target, tpos) = self.name("an unknown name")?;
            return Ok(Item::Root(target, tpos));
        }
        self.cur.expect(":")?;
        if self.cur.eat_keyword("global") {
            return Ok(Item::Global(name, pos));
        }
        if !self.cur.eat_keyword("local") {
            return Err(self.cur.error("expected `global` or `local`"));
        }
        self.cur.expect("=")?;
        let rhs = self.expr()?;
        Ok(Item::Local(name, pos, rhs))
    }
}

struct Resolver<'s, 'a> {
    sys: &'s EquationSystem,
    cur: &'s Cursor<'a>,
}

impl Resolver<'_, '_> {
    fn unknown(&self, name: &str, pos: usize) -> Result<Unknown, ParseError> {
        self.sys
            .lookup(name)
            .ok_or_else(|| self.cur.error_at(pos, format!("undeclared unknown `{name}`")))
    }

    fn resolve(&self, ast: Ast, scope: &mut Vec<String>) -> Result<RhsExpr, ParseError> {
        Ok(match ast {
            Ast::Const(v) => RhsExpr::Const(v),
            Ast::Get(n, p) => RhsExpr::Get(self.unknown(&n, p)?),
            Ast::Binop(op, a, b) => RhsExpr::binop(op, self.resolve(*a, scope)?, self.resolve(*b, scope)?),
            Ast::Join(a, b) => RhsExpr::join(self.resolve(*a, scope)?, self.resolve(*b, scope)?),
            Ast::Set(n, p, v) => {
                let g = self.unknown(&n, p)?;
                if self.sys.kind(g) != Kind::Global {
                    return Err(self.cur.error_at(p, format!("`set` target `{n}` is not a global")));
                }
                RhsExpr::set(g, self.resolve(*v, scope)?)
            }
            Ast::Demand(n, p) => {
                let u = self.unknown(&n, p)?;
                if self.sys.kind(u) != Kind::Local {
                    return Err(self.cur.error_at(p, format!("`demand` target `{n}` is not a local")));
                }
                RhsExpr::Demand(u)
            }
            Ast::Let(n, bound, body) => {
                let bound = self.resolve(*bound, scope)?;
                scope.push(n.clone());
                let body = self.resolve(*body, scope);
                scope.pop();
                RhsExpr::let_in(n, bound, body?)
            }
            Ast::Var(n, p) => {
                if !scope.contains(&n) {
                    return Err(self.cur.error_at(p, format!("unbound variable `{n}`")));
                }
                RhsExpr::Var(n)
            }
            Ast::Seq(es) => RhsExpr::Seq(
                es.into_iter()
                    .map(|e| self.resolve(e, scope))
                    .collect::<Result<_, _>>()?,
            ),
        })
    }
}

/// Parses the equation-system text format.
pub fn parse_system(text: &str) -> Result<EquationSystem, ParseError> {
    let mut cur = Cursor::new(text, Comments::Hash);
    if !cur.eat_keyword("lattice") {
        return Err(cur.error("expected `lattice interval|flat|set;` header"));
    }
    let lpos = cur.pos();
    let lattice = match cur.ident("") {
        Some("interval") => Domain::Interval,
        Some("flat") => Domain::Flat,
        Some("set") => Domain::Set,
        _ => return Err(cur.error_at(lpos, "lattice must be one of interval, flat, set")),
    };
    cur.expect(";")?;

    let mut p = Parser { cur, lattice };
    let mut items = Vec::new();
    while p.cur.peek().is_some() {
        items.push(p.item()?);
    }
    let cur = p.cur;

    let mut sys = EquationSystem::with_lattice(lattice);
    for item in &items {
        let (name, pos, declared) = match item {
            Item::Global(n, p) => (n, *p, sys.add_global(n, lattice)),
            Item::Local(n, p, _) => (n, *p, sys.declare_local(n, lattice)),
            Item::Root(..) => continue,
        };
        declared.map_err(|_| {
            let twice_local =
                matches!(item, Item::Local(..)) && sys.lookup(name).is_some_and(|u| sys.kind(u) == Kind::Local);
            if twice_local {
                cur.error_at(pos, format!("local `{name}` has two right-hand sides"))
            } else {
                cur.error_at(pos, format!("`{name}` declared twice"))
            }
        })?;
    }
    let mut resolved = Vec::with_capacity(items.len());
    let mut roots = Vec::new();
    {
        let r = Resolver { sys: &sys, cur: &cur };
        for item in items {
            match item {
                Item::Global(..) => {}
                Item::Local(name, _, ast) => {
                    let u = sys.lookup(&name).expect("declared above");
                    resolved.push((u, r.resolve(ast, &mut Vec::new())?));
                }
                Item::Root(name, pos) => {
                    let u = r.unknown(&name, pos)?;
                    if sys.kind(u) != Kind::Local {
                        return Err(cur.error_at(pos, format!("root `{name}` is not a local")));
                    }
                    roots.push(u);
                }
            }
        }
    }
    for (u, rhs) in resolved {
        sys.define(u, rhs).expect("fresh local");
    }
    for u in roots {
        sys.add_root(u);
    }
    Ok(sys)
}

/// Renders a system in the text format; fails on mixed domains or host closures.
pub fn serialize_system(sys: &EquationSystem) -> Result<String, Error> {
    let lattice = match sys.lattice() {
        Some(d @ (Domain::Interval | Domain::Flat | Domain::Set)) => d,
        Some(Domain::Env) => return Err(Error::NotSerializable("env lattice has no file form".into())),
        None if sys.is_empty() => Domain::Interval,
        None => return Err(Error::NotSerializable("unknowns live in different lattices".into())),
    };
    let mut out = format!("lattice {lattice};\n");
    for u in sys.unknowns() {
        let label = sys.label_of(u);
        match sys.rhs(u) {
            None if sys.kind(u) == Kind::Global => writeln!(out, "{label}: global").unwrap(),
            None => return Err(Error::MissingRhs(label.to_string())),
            Some(e) => {
                write!(out, "{label}: local = ").unwrap();
                write_expr(sys, e, &mut out)?;
                out.push('\n');
            }
        }
    }
    for &u in sys.declared_roots() {
        writeln!(out, "root {}", sys.label_of(u)).unwrap();
    }
    Ok(out)
}

fn write_expr(sys: &EquationSystem, e: &RhsExpr, out: &mut String) -> Result<(), Error> {
    match e {
        RhsExpr::Const(v) => write!(out, "const {v}").unwrap(),
        RhsExpr::Get(u) => write!(out, "get {}", sys.label_of(*u)).unwrap(),
        RhsExpr::Binop(op, a, b) => {
            write!(out, "{}(", op.keyword()).unwrap();
            write_expr(sys, a, out)?;
            out.push_str(", ");
            write_expr(sys, b, out)?;
            out.push(')');
        }
        RhsExpr::Join(a, b) => {
            out.push_str("join(");
            write_expr(sys, a, out)?;
            out.push_str(", ");
            write_expr(sys, b, out)?;
            out.push(')');
        }
        RhsExpr::Set(g, v) => {
            write!(out, "set {} ", sys.label_of(*g)).unwrap();
            write_expr(sys, v, out)?;
        }
        RhsExpr::Demand(u) => write!(out, "demand {}", sys.label_of(*u)).unwrap(),
        RhsExpr::Let(n, bound, body) => {
            write!(out, "let {n} = ").unwrap();
            write_expr(sys, bound, out)?;
            out.push_str(" in ");
            write_expr(sys, body, out)?;
        }
        RhsExpr::Var(n) => out.push_str(n),
        RhsExpr::Seq(es) => {
            out.push_str("seq(");
            for (i, e) in es.iter().enumerate() {
                if i > 0 {
                    out.push_str("; ");
                }
                write_expr(sys, e, out)?;
            }
            out.push(')');
        }
        RhsExpr::Transfer(_) => return Err(Error::NotSerializable("host closure in right-hand side".into())),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_system() {
        let sys = parse_system("lattice interval;\ng: global\nx: local = const [1,2]").unwrap();
        assert_eq!(sys.len(), 2);
        let g = sys.lookup("g").unwrap();
        let x = sys.lookup("x").unwrap();
        assert_eq!(sys.kind(g), Kind::Global);
        assert_eq!(sys.kind(x), Kind::Local);
    }

    #[test]
    fn duplicate_rhs_is_rejected() {
        let err = parse_system("lattice interval;\nx: local = const [1,1]\nx: local = const [2,2]").unwrap_err();
        assert_eq!((err.line, err.col), (3, 1));
        assert!(err.message.contains("two right-hand sides"), "{err}");
    }

    #[test]
    fn set_must_target_a_global() {
        let err = parse_system("lattice flat;\ny: local = const a\nx: local = set y const b").unwrap_err();
        assert!(err.message.contains("not a global"), "{err}");
        assert_eq!((err.line, err.col), (3, 16));
    }

    #[test]
    fn demand_must_target_a_local() {
        let err = parse_system("lattice flat;\ng: global\nx: local = seq(demand g; const a)").unwrap_err();
        assert!(err.message.contains("not a local"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_system("lattice interval;\nx: local = add(const [1,1] const [2,2])").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.message.contains("expected `,`"));
        assert!(parse_system("lattice octagon;").is_err());
        assert!(parse_system("x: global").is_err());
        let err = parse_system("lattice interval;\nx: local = get nowhere").unwrap_err();
        assert!(err.message.contains("undeclared"));
        let err = parse_system("lattice interval;\nx: local = let a = const [0,0] in b").unwrap_err();
        assert!(err.message.contains("unbound variable `b`"));
    }

    #[test]
    fn forward_references_and_comments() {
        let text = "lattice interval; # header\n\
                    ⟨13⟩: local = get ⟨12⟩ # endpoint\n\
                    ⟨12⟩: local = add(get ⟨11⟩, const [1,1])\n\
                    ⟨11⟩: local = const [0,42]\n\
                    root ⟨13⟩\n";
        let sys = parse_system(text).unwrap();
        assert_eq!(sys.label_of(Unknown::from_index(0)), "⟨13⟩");
        assert_eq!(sys.roots(), vec![Unknown::from_index(0)]);
        let again = parse_system(&serialize_system(&sys).unwrap()).unwrap();
        assert_eq!(sys, again);
    }

    #[test]
    fn transfer_nodes_do_not_serialize() {
        let mut sys = EquationSystem::with_lattice(Domain::Interval);
        sys.add_local(
            "x",
            Domain::Interval,
            RhsExpr::Transfer(super::super::Transfer::new(|_| Ok(crate::Interval::constant(1).into()))),
        )
        .unwrap();
        assert!(matches!(serialize_system(&sys), Err(Error::NotSerializable(_))));
    }
}
