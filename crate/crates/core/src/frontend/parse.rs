use std::collections::HashSet;

use indexmap::IndexMap;

use super::ast::{CmpOp, Cond, Expr, Function, Program, Stmt};
use crate::lattice::BinOp;
use crate::text::{Comments, Cursor};
use crate::ParseError;

const KEYWORDS: &[&str] = &["global", "fn", "if", "else", "while", "call", "spawn", "return", "ret"];

// longest first, so `<=` is not read as `<`
const COMPARISONS: [(&str, CmpOp); 6] = [
    ("<=", CmpOp::Le),
    (">=", CmpOp::Ge),
    ("==", CmpOp::Eq),
    ("!=", CmpOp::Ne),
    ("<", CmpOp::Lt),
    (">", CmpOp::Gt),
];

struct Parser<'a> {
    cur: Cursor<'a>,
}

impl Parser<'_> {
    fn name(&mut self, what: &str) -> Result<(String, usize), ParseError> {
        self.cur.skip_ws();
        let pos = self.cur.pos();
        match self.cur.ident("") {
            Some(n) if !KEYWORDS.contains(&n) => Ok((n.to_string(), pos)),
            Some(n) => Err(self.cur.error_at(pos, format!("keyword `{n}` used as {what}"))),
            None => Err(self.cur.error(format!("expected {what}"))),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        if self.cur.eat("(") {
            let e = self.expr()?;
            self.cur.expect(")")?;
            return Ok(e);
        }
        self.cur.skip_ws();
        let pos = self.cur.pos();
        if let Some(text) = self.cur.integer() {
            return text
                .parse()
                .map(Expr::Int)
                .map_err(|_| self.cur.error_at(pos, format!("integer `{text}` out of range")));
        }
        let (n, _) = self.name("an expression")?;
        Ok(Expr::Var(n))
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.atom()?;
        while self.cur.eat("*") {
            e = Expr::Bin(BinOp::Mul, Box::new(e), Box::new(self.atom()?));
        }
        Ok(e)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.term()?;
        loop {
            let op = if self.cur.eat("+") {
                BinOp::Add
            } else if self.cur.eat("-") {
                BinOp::Sub
            } else {
                return Ok(e);
            };
            e = Expr::Bin(op, Box::new(e), Box::new(self.term()?));
        }
    }

    fn cond(&mut self) -> Result<Cond, ParseError> {
        self.cur.expect("(")?;
        let lhs = self.expr()?;
        let op = COMPARISONS
            .iter()
            .find(|(sym, _)| self.cur.eat(sym))
            .map(|&(_, op)| op)
            .ok_or_else(|| self.cur.error("expected a comparison operator"))?;
        let rhs = self.expr()?;
        self.cur.expect(")")?;
        Ok(Cond { op, lhs, rhs })
    }

    /// `name(arg?)` after `call` or `spawn`.
    fn invocation(&mut self) -> Result<(String, Option<Expr>), ParseError> {
        let (callee, _) = self.name("a function name")?;
        self.cur.expect("(")?;
        let arg = if self.cur.eat(")") {
            None
        } else {
            let e = self.expr()?;
            self.cur.expect(")")?;
            Some(e)
        };
        self.cur.expect(";")?;
        Ok((callee, arg))
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.cur.expect("{")?;
        let mut stmts = Vec::new();
        while !self.cur.eat("}") {
            if self.cur.at_end() {
                return Err(self.cur.error("expected `}`"));
            }
            stmts.push(self.stmt()?);
        }
        Ok(stmts)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        if self.cur.eat_keyword("if") {
            let cond = self.cond()?;
            let then = self.block()?;
            let otherwise = if self.cur.eat_keyword("else") {
                if self.cur.peek_keyword("if") {
                    vec![self.stmt()?]
                } else {
                    self.block()?
                }
            } else {
                Vec::new()
            };
            return Ok(Stmt::If { cond, then, otherwise });
        }
        if self.cur.eat_keyword("while") {
            let cond = self.cond()?;
            let body = self.block()?;
            return Ok(Stmt::While { cond, body });
        }
        if self.cur.eat_keyword("call") {
            let (callee, arg) = self.invocation()?;
            return Ok(Stmt::Call {
                target: None,
                callee,
                arg,
            });
        }
        if self.cur.eat_keyword("spawn") {
            let (callee, arg) = self.invocation()?;
            return Ok(Stmt::Spawn { callee, arg });
        }
        if self.cur.eat_keyword("return") {
            let value = if self.cur.eat(";") {
                None
            } else {
                let e = self.expr()?;
                self.cur.expect(";")?;
                Some(e)
            };
            return Ok(Stmt::Return(value));
        }
        let (target, _) = self.name("a statement")?;
        self.cur.expect("=")?;
        if self.cur.eat_keyword("call") {
            let (callee, arg) = self.invocation()?;
            return Ok(Stmt::Call {
                target: Some(target),
                callee,
                arg,
            });
        }
        let value = self.expr()?;
        self.cur.expect(";")?;
        Ok(Stmt::Assign { target, value })
    }
}

/// Parses a toy program and resolves its names.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut p = Parser {
        cur: Cursor::new(text, Comments::Slashes),
    };
    let mut globals: Vec<String> = Vec::new();
    let mut functions: IndexMap<String, Function> = IndexMap::new();
    let mut positions = Vec::new();
    loop {
        p.cur.skip_ws();
        if p.cur.at_end() {
            break;
        }
        let pos = p.cur.pos();
        if p.cur.eat_keyword("global") {
            let (g, gpos) = p.name("a global name")?;
            p.cur.expect(";")?;
            if globals.contains(&g) {
                return Err(p.cur.error_at(gpos, format!("global `{g}` declared twice")));
            }
            globals.push(g);
        } else if p.cur.eat_keyword("fn") {
            let (name, npos) = p.name("a function name")?;
            p.cur.expect("(")?;
            let param = if p.cur.eat(")") {
                None
            } else {
                let (param, _) = p.name("a parameter name")?;
                p.cur.expect(")")?;
                Some(param)
            };
            let body = p.block()?;
            if functions.contains_key(&name) {
                return Err(p.cur.error_at(npos, format!("function `{name}` defined twice")));
            }
            positions.push(pos);
            functions.insert(name.clone(), Function { name, param, body });
        } else {
            return Err(p.cur.error("expected `global` or `fn`"));
        }
    }
    let prog = Program { globals, functions };
    if !prog.functions.contains_key(Program::ENTRY) {
        return Err(p.cur.error_at(0, "no `main` function"));
    }
    for (f, &pos) in prog.functions.values().zip(&positions) {
        check_function(&prog, f).map_err(|msg| p.cur.error_at(pos, format!("in `{}`: {msg}", f.name)))?;
    }
    Ok(prog)
}

/// Locals of `f`: its parameter and every non-global assignment target.
pub(crate) fn locals_of(prog: &Program, f: &Function) -> HashSet<String> {
    fn walk(prog: &Program, stmts: &[Stmt], out: &mut HashSet<String>) {
        for s in stmts {
            match s {
                Stmt::Assign { target, .. }
                | Stmt::Call {
                    target: Some(target), ..
                } if !prog.is_global(target) => {
                    out.insert(target.clone());
                }
                Stmt::If { then, otherwise, .. } => {
                    walk(prog, then, out);
                    walk(prog, otherwise, out);
                }
                Stmt::While { body, .. } => walk(prog, body, out),
                _ => {}
            }
        }
    }
    let mut out: HashSet<String> = f.param.iter().cloned().collect();
    walk(prog, &f.body, &mut out);
    out
}

fn check_function(prog: &Program, f: &Function) -> Result<(), String> {
    if let Some(p) = &f.param {
        if prog.is_global(p) {
            return Err(format!("parameter `{p}` shadows a global"));
        }
    }
    let locals = locals_of(prog, f);
    let expr = |e: &Expr| check_expr(prog, &locals, e);
    fn stmts(prog: &Program, body: &[Stmt], expr: &dyn Fn(&Expr) -> Result<(), String>) -> Result<(), String> {
        for s in body {
            match s {
                Stmt::Assign { value, .. } => expr(value)?,
                Stmt::If { cond, then, otherwise } => {
                    expr(&cond.lhs)?;
                    expr(&cond.rhs)?;
                    stmts(prog, then, expr)?;
                    stmts(prog, otherwise, expr)?;
                }
                Stmt::While { cond, body } => {
                    expr(&cond.lhs)?;
                    expr(&cond.rhs)?;
                    stmts(prog, body, expr)?;
                }
                Stmt::Call { callee, arg, .. } | Stmt::Spawn { callee, arg } => {
                    let Some(target) = prog.functions.get(callee) else {
                        return Err(format!("undefined function `{callee}`"));
                    };
                    match (&target.param, arg) {
                        (Some(_), None) => return Err(format!("`{callee}` expects an argument")),
                        (None, Some(_)) => return Err(format!("`{callee}` takes no argument")),
                        _ => {}
                    }
                    if let Some(a) = arg {
                        expr(a)?;
                    }
                }
                Stmt::Return(Some(e)) => expr(e)?,
                Stmt::Return(None) => {}
            }
        }
        Ok(())
    }
    stmts(prog, &f.body, &expr)
}

fn check_expr(prog: &Program, locals: &HashSet<String>, e: &Expr) -> Result<(), String> {
    match e {
        Expr::Int(_) => Ok(()),
        Expr::Var(v) if prog.is_global(v) || locals.contains(v) => Ok(()),
        Expr::Var(v) => Err(format!("undefined variable `{v}`")),
        Expr::Bin(_, a, b) => {
            check_expr(prog, locals, a)?;
            check_expr(prog, locals, b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RUNNING: &str = "global g;\n\
        fn foo(a) { g = a; return 0; }\n\
        fn main() { g = 0; spawn foo(42); a = g; a = a + 1; return a; }\n";

    #[test]
    fn running_program_structure() {
        let p = parse_program(RUNNING).unwrap();
        assert_eq!(p.globals, vec!["g"]);
        assert_eq!(p.functions.len(), 2);
        assert_eq!(p.functions["main"].body.len(), 5);
        assert_eq!(
            p.functions["foo"].body[0],
            Stmt::Assign {
                target: "g".into(),
                value: Expr::Var("a".into())
            }
        );
    }

    #[test]
    fn empty_main() {
        let p = parse_program("fn main() {}").unwrap();
        assert!(p.functions["main"].body.is_empty());
    }

    #[test]
    fn precedence_and_comments() {
        let p = parse_program("// header\nfn main() { x = 1 + 2 * (3 - -4); // tail\n }").unwrap();
        let Stmt::Assign { value, .. } = &p.functions["main"].body[0] else {
            panic!()
        };
        let expected = Expr::Bin(
            BinOp::Add,
            Box::new(Expr::Int(1)),
            Box::new(Expr::Bin(
                BinOp::Mul,
                Box::new(Expr::Int(2)),
                Box::new(Expr::Bin(BinOp::Sub, Box::new(Expr::Int(3)), Box::new(Expr::Int(-4)))),
            )),
        );
        assert_eq!(*value, expected);
    }

    #[test]
    fn control_flow_statements() {
        let p = parse_program(
            "fn f(n) { return n; }\n\
             fn main() { x = 0; while (x < 10) { if (x != 3) { x = x + 1; } else { x = x + 2; } } y = call f(x); call f(1); }",
        )
        .unwrap();
        let body = &p.functions["main"].body;
        assert!(matches!(&body[1], Stmt::While { cond, .. } if cond.op == CmpOp::Lt));
        assert!(matches!(&body[2], Stmt::Call { target: Some(t), .. } if t == "y"));
        assert!(matches!(&body[3], Stmt::Call { target: None, .. }));
    }

    #[test]
    fn resolution_errors() {
        let e = parse_program("fn main() { spawn undefined(1); }").unwrap_err();
        assert!(e.message.contains("undefined function `undefined`"), "{e}");
        let e = parse_program("fn main() { x = y; }").unwrap_err();
        assert!(e.message.contains("undefined variable `y`"), "{e}");
        let e = parse_program("fn f() {} fn main() { call f(1); }").unwrap_err();
        assert!(e.message.contains("takes no argument"), "{e}");
        assert!(parse_program("fn f() {}").unwrap_err().message.contains("main"));
        assert!(parse_program("global g; global g; fn main() {}").is_err());
        assert!(parse_program("global g; fn f(g) {} fn main() {}").is_err());
        assert!(parse_program("fn main() { ret = 1; }").is_err());
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let e = parse_program("fn main() {\n  x = 1\n}").unwrap_err();
        assert_eq!((e.line, e.col), (3, 1));
        let e = parse_program("fn main() { if (x) {} }").unwrap_err();
        assert!(e.message.contains("comparison"), "{e}");
    }
}
