//! Equation generation for toy programs.
//!
//! Every function `f` owns a global `f.start` (the join of all argument
//! environments passed to it), one local `f.N` per simple statement or loop
//! head, numbered in source order, and a local `f.end` whose environment
//! binds the return value to `ret`. Program globals are interval globals.
//!
//! A node's right-hand side first joins its incoming edges, each edge being a
//! predecessor's value filtered by the guards on the way, then applies the
//! statement. Nodes after branches need no join node of their own: the edges
//! of both arms simply flow into the next node.

use std::sync::Arc;

use super::ast::{CmpOp, Cond, Expr, Function, Program, Stmt};
use super::DemandStrategy;
use crate::eqsys::{EquationSystem, RhsExpr, Transfer, Unknown};
use crate::lattice::{abstract_binop, BinOp, Domain, DomainError, ExtInt};
use crate::{Effects, Env, Interval, Result, Value};

/// Binding of the return value in endpoint environments.
pub const RET: &str = "ret";

/// An equation system for a program, with its root (the endpoint of `main`).
#[derive(Debug, Clone)]
pub struct ProgramEquations {
    pub system: EquationSystem,
    pub roots: Vec<Unknown>,
}

pub fn start_label(f: &str) -> String {
    format!("{f}.start")
}

pub fn end_label(f: &str) -> String {
    format!("{f}.end")
}

pub fn point_label(f: &str, n: usize) -> String {
    format!("{f}.{n}")
}

/// Expression with resolved variables.
#[derive(Debug)]
enum CExpr {
    Int(i64),
    Local(String),
    Global(Unknown),
    Bin(BinOp, Box<CExpr>, Box<CExpr>),
}

#[derive(Debug)]
struct CCond {
    op: CmpOp,
    lhs: CExpr,
    rhs: CExpr,
}

#[derive(Debug)]
enum Source {
    Node(Unknown),
    /// Entry of `main`: every program global starts at zero.
    MainEntry(Vec<Unknown>),
}

/// A predecessor's value, filtered by guards (`true` = the guard holds).
#[derive(Debug, Clone)]
struct Edge {
    source: Arc<Source>,
    guards: Vec<(Arc<CCond>, bool)>,
}

fn as_env(v: Value) -> Result<Env> {
    match v {
        Value::Env(e) => Ok(e),
        other => Err(DomainError::Mismatch {
            left: "env",
            right: other.domain().name(),
        }
        .into()),
    }
}

fn as_interval(v: Value) -> Result<Interval> {
    match v {
        Value::Interval(i) => Ok(i),
        other => Err(DomainError::Mismatch {
            left: "interval",
            right: other.domain().name(),
        }
        .into()),
    }
}

fn eval(e: &CExpr, env: &Env, fx: &mut dyn Effects<Value>) -> Result<Interval> {
    if env.is_unreachable() {
        return Ok(Interval::Empty);
    }
    Ok(match e {
        CExpr::Int(c) => Interval::constant(*c),
        CExpr::Local(x) => env.get(x),
        CExpr::Global(g) => as_interval(fx.get(*g)?)?,
        CExpr::Bin(op, a, b) => {
            let a = eval(a, env, fx)?;
            let b = eval(b, env, fx)?;
            abstract_binop(*op, &a, &b)
        }
    })
}

/// Whether `l op r` can hold for some members of the two intervals.
fn satisfiable(op: CmpOp, l: &Interval, r: &Interval) -> bool {
    let (Some((ll, lh)), Some((rl, rh))) = (l.bounds(), r.bounds()) else {
        return false;
    };
    match op {
        CmpOp::Lt => ll < rh,
        CmpOp::Le => ll <= rh,
        CmpOp::Gt => lh > rl,
        CmpOp::Ge => lh >= rl,
        CmpOp::Eq => !l.meet(r).is_empty(),
        CmpOp::Ne => !(ll == lh && l == r),
    }
}

/// Values `v` with `v op c`.
fn solutions(op: CmpOp, c: i64) -> Interval {
    let fin = ExtInt::Fin;
    match op {
        CmpOp::Lt => c
            .checked_sub(1)
            .map_or(Interval::Empty, |d| Interval::new(ExtInt::NegInf, fin(d))),
        CmpOp::Le => Interval::new(ExtInt::NegInf, fin(c)),
        CmpOp::Eq => Interval::constant(c),
        CmpOp::Ne => Interval::top(),
        CmpOp::Ge => Interval::new(fin(c), ExtInt::PosInf),
        CmpOp::Gt => c
            .checked_add(1)
            .map_or(Interval::Empty, |d| Interval::new(fin(d), ExtInt::PosInf)),
    }
}

/// Filters `env` by a guard. A guard that cannot hold makes it unreachable;
/// a comparison of a local against a constant also narrows the local.
fn assume(env: Env, cond: &CCond, holds: bool, fx: &mut dyn Effects<Value>) -> Result<Env> {
    if env.is_unreachable() {
        return Ok(env);
    }
    let op = if holds { cond.op } else { cond.op.negate() };
    let l = eval(&cond.lhs, &env, fx)?;
    let r = eval(&cond.rhs, &env, fx)?;
    if !satisfiable(op, &l, &r) {
        return Ok(Env::Unreachable);
    }
    Ok(match (&cond.lhs, &cond.rhs) {
        (CExpr::Local(x), CExpr::Int(c)) => env.refine(x, &solutions(op, *c)),
        (CExpr::Int(c), CExpr::Local(x)) => env.refine(x, &solutions(op.flip(), *c)),
        _ => env,
    })
}

fn edge_value(e: &Edge, fx: &mut dyn Effects<Value>) -> Result<Env> {
    let mut env = match &*e.source {
        Source::Node(u) => as_env(fx.get(*u)?)?,
        Source::MainEntry(globals) => {
            for &g in globals {
                fx.set(g, Interval::constant(0).into())?;
            }
            Env::top()
        }
    };
    for (cond, holds) in &e.guards {
        env = assume(env, cond, *holds, fx)?;
    }
    Ok(env)
}

fn incoming(edges: &[Edge], fx: &mut dyn Effects<Value>) -> Result<Env> {
    let mut env = Env::Unreachable;
    for e in edges {
        env = env.join(&edge_value(e, fx)?);
    }
    Ok(env)
}

fn transfer(f: impl Fn(&mut dyn Effects<Value>) -> Result<Env> + Send + Sync + 'static) -> RhsExpr {
    RhsExpr::Transfer(Transfer::new(move |fx| Ok(Value::Env(f(fx)?))))
}

struct FnBuilder<'p> {
    prog: &'p Program,
    sys: &'p mut EquationSystem,
    strategy: DemandStrategy,
    f: &'p Function,
    next: usize,
    /// Edges into the endpoint, with the returned expression if any.
    returns: Vec<(Vec<Edge>, Option<Arc<CExpr>>)>,
}

impl FnBuilder<'_> {
    fn unknown(&self, label: &str) -> Unknown {
        self.sys.lookup(label).expect("declared before building")
    }

    fn node(&mut self) -> Unknown {
        let u = self.unknown(&point_label(&self.f.name, self.next));
        self.next += 1;
        u
    }

    fn define(&mut self, u: Unknown, rhs: RhsExpr) {
        self.sys.define(u, rhs).expect("each node is defined once");
    }

    fn expr(&self, e: &Expr) -> CExpr {
        match e {
            Expr::Int(c) => CExpr::Int(*c),
            Expr::Var(v) if self.prog.is_global(v) => CExpr::Global(self.unknown(v)),
            Expr::Var(v) => CExpr::Local(v.clone()),
            Expr::Bin(op, a, b) => CExpr::Bin(*op, Box::new(self.expr(a)), Box::new(self.expr(b))),
        }
    }

    fn cond(&self, c: &Cond) -> Arc<CCond> {
        Arc::new(CCond {
            op: c.op,
            lhs: self.expr(&c.lhs),
            rhs: self.expr(&c.rhs),
        })
    }

    /// `set callee.start (argument environment)`.
    fn pass_argument(&self, edges: &Arc<Vec<Edge>>, callee: &str, arg: &Option<Expr>) -> RhsExpr {
        let start = self.unknown(&start_label(callee));
        let param = self.prog.functions[callee].param.clone();
        let arg = arg.as_ref().map(|a| self.expr(a));
        let edges = Arc::clone(edges);
        let argenv = transfer(move |fx| {
            let env = incoming(&edges, fx)?;
            if env.is_unreachable() {
                return Ok(env);
            }
            Ok(match (&param, &arg) {
                (Some(p), Some(a)) => Env::top().with(p.as_str(), eval(a, &env, fx)?),
                _ => Env::top(),
            })
        });
        RhsExpr::set(start, argenv)
    }

    fn block(&mut self, stmts: &[Stmt], mut edges: Vec<Edge>) -> Vec<Edge> {
        for s in stmts {
            edges = self.stmt(s, edges);
        }
        edges
    }

    fn stmt(&mut self, s: &Stmt, edges: Vec<Edge>) -> Vec<Edge> {
        let from = |u: Unknown| {
            vec![Edge {
                source: Arc::new(Source::Node(u)),
                guards: Vec::new(),
            }]
        };
        match s {
            Stmt::Assign { target, value } => {
                let u = self.node();
                let value = self.expr(value);
                let edges = Arc::new(edges);
                let rhs = if self.prog.is_global(target) {
                    let g = self.unknown(target);
                    let (e1, e2) = (Arc::clone(&edges), edges);
                    let value = RhsExpr::Transfer(Transfer::new(move |fx| {
                        let env = incoming(&e1, fx)?;
                        Ok(eval(&value, &env, fx)?.into())
                    }));
                    RhsExpr::Seq(vec![RhsExpr::set(g, value), transfer(move |fx| incoming(&e2, fx))])
                } else {
                    let x = target.clone();
                    transfer(move |fx| {
                        let env = incoming(&edges, fx)?;
                        let v = eval(&value, &env, fx)?;
                        Ok(env.with(x.as_str(), v))
                    })
                };
                self.define(u, rhs);
                from(u)
            }
            Stmt::Call { target, callee, arg } => {
                let u = self.node();
                let edges = Arc::new(edges);
                let end = self.unknown(&end_label(callee));
                let mut seq = vec![self.pass_argument(&edges, callee, arg)];
                if self.strategy == DemandStrategy::ThreadsAndFunctions {
                    seq.push(RhsExpr::Demand(end));
                }
                let dest = target.as_ref().map(|t| match self.prog.is_global(t) {
                    true => CExpr::Global(self.unknown(t)),
                    false => CExpr::Local(t.clone()),
                });
                seq.push(transfer(move |fx| {
                    let env = incoming(&edges, fx)?;
                    if env.is_unreachable() {
                        return Ok(env);
                    }
                    let ret = as_env(fx.get(end)?)?;
                    if ret.is_unreachable() {
                        // the callee never returns
                        return Ok(Env::Unreachable);
                    }
                    Ok(match &dest {
                        Some(CExpr::Local(x)) => env.with(x.as_str(), ret.get(RET)),
                        Some(CExpr::Global(g)) => {
                            fx.set(*g, ret.get(RET).into())?;
                            env
                        }
                        _ => env,
                    })
                }));
                self.define(u, RhsExpr::Seq(seq));
                from(u)
            }
            Stmt::Spawn { callee, arg } => {
                let u = self.node();
                let edges = Arc::new(edges);
                let end = self.unknown(&end_label(callee));
                let run = match self.strategy {
                    // no promotion: the thread body is reached through a plain query
                    DemandStrategy::None => RhsExpr::Get(end),
                    _ => RhsExpr::Demand(end),
                };
                let rest = Arc::clone(&edges);
                let seq = vec![
                    self.pass_argument(&edges, callee, arg),
                    run,
                    transfer(move |fx| incoming(&rest, fx)),
                ];
                self.define(u, RhsExpr::Seq(seq));
                from(u)
            }
            Stmt::If { cond, then, otherwise } => {
                let c = self.cond(cond);
                let guarded = |holds: bool| -> Vec<Edge> {
                    edges
                        .iter()
                        .map(|e| {
                            let mut e = e.clone();
                            e.guards.push((Arc::clone(&c), holds));
                            e
                        })
                        .collect()
                };
                let (t, o) = (guarded(true), guarded(false));
                let mut out = self.block(then, t);
                out.extend(self.block(otherwise, o));
                out
            }
            Stmt::While { cond, body } => {
                let head = self.node();
                let c = self.cond(cond);
                let from_head = |holds| Edge {
                    source: Arc::new(Source::Node(head)),
                    guards: vec![(Arc::clone(&c), holds)],
                };
                let back = self.block(body, vec![from_head(true)]);
                let all: Vec<Edge> = edges.into_iter().chain(back).collect();
                self.define(head, transfer(move |fx| incoming(&all, fx)));
                vec![from_head(false)]
            }
            Stmt::Return(value) => {
                let value = value.as_ref().map(|v| Arc::new(self.expr(v)));
                self.returns.push((edges, value));
                Vec::new()
            }
        }
    }

    fn finish(mut self, entry: Vec<Edge>) {
        let out = self.block(&self.f.body, entry);
        self.returns.push((out, None));
        let end = self.unknown(&end_label(&self.f.name));
        let returns = std::mem::take(&mut self.returns);
        self.define(
            end,
            transfer(move |fx| {
                let mut env = Env::Unreachable;
                for (edges, value) in &returns {
                    let mut e = incoming(edges, fx)?;
                    if let Some(v) = value {
                        let r = eval(v, &e, fx)?;
                        e = e.with(RET, r);
                    }
                    env = env.join(&e);
                }
                Ok(env)
            }),
        );
    }
}

fn count_nodes(stmts: &[Stmt]) -> usize {
    stmts
        .iter()
        .map(|s| match s {
            Stmt::Assign { .. } | Stmt::Call { .. } | Stmt::Spawn { .. } => 1,
            Stmt::If { then, otherwise, .. } => count_nodes(then) + count_nodes(otherwise),
            Stmt::While { body, .. } => 1 + count_nodes(body),
            Stmt::Return(_) => 0,
        })
        .sum()
}

/// Builds the equation system of `prog`. Unknowns are declared in a fixed
/// order (globals, then per function its start, points and end), so
/// building the same program twice yields identical systems.
pub fn build_equations(prog: &Program, strategy: DemandStrategy) -> ProgramEquations {
    let mut sys = EquationSystem::new();
    let declared = "labels are unique by construction";
    for g in &prog.globals {
        sys.add_global(g, Domain::Interval).expect(declared);
    }
    for f in prog.functions.values() {
        sys.add_global(&start_label(&f.name), Domain::Env).expect(declared);
        for n in 0..count_nodes(&f.body) {
            sys.declare_local(&point_label(&f.name, n), Domain::Env)
                .expect(declared);
        }
        sys.declare_local(&end_label(&f.name), Domain::Env).expect(declared);
    }
    let globals: Vec<Unknown> = prog.globals.iter().map(|g| sys.lookup(g).expect(declared)).collect();
    for f in prog.functions.values() {
        let source = if f.name == Program::ENTRY {
            Source::MainEntry(globals.clone())
        } else {
            Source::Node(sys.lookup(&start_label(&f.name)).expect(declared))
        };
        let entry = vec![Edge {
            source: Arc::new(source),
            guards: Vec::new(),
        }];
        FnBuilder {
            prog,
            sys: &mut sys,
            strategy,
            f,
            next: 0,
            returns: Vec::new(),
        }
        .finish(entry);
    }
    let root = sys.lookup(&end_label(Program::ENTRY)).expect(declared);
    sys.add_root(root);
    ProgramEquations {
        system: sys,
        roots: vec![root],
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::frontend::parse_program;
    use crate::solver::{solve_seq, SolverConfig};

    const RUNNING: &str = "global g;\n\
        fn foo(a) { g = a; return 0; }\n\
        fn main() { g = 0; spawn foo(42); a = g; a = a + 1; return a; }\n";

    /// Records the effects of one evaluation against a fixed assignment.
    #[derive(Default)]
    struct Probe {
        values: HashMap<Unknown, Value>,
        sets: Vec<(Unknown, Value)>,
        demands: Vec<Unknown>,
    }

    impl Effects<Value> for Probe {
        fn get(&mut self, u: Unknown) -> Result<Value> {
            Ok(self.values.get(&u).cloned().unwrap_or(Value::Env(Env::top())))
        }
        fn set(&mut self, g: Unknown, v: Value) -> Result<()> {
            self.sets.push((g, v));
            Ok(())
        }
        fn demand(&mut self, u: Unknown) -> Result<()> {
            self.demands.push(u);
            Ok(())
        }
    }

    fn labels(sys: &EquationSystem) -> HashMap<Unknown, String> {
        sys.unknowns().map(|u| (u, sys.label_of(u).to_string())).collect()
    }

    fn iv(lo: i64, hi: i64) -> Interval {
        Interval::range(lo, hi)
    }

    #[test]
    fn spawn_point_sets_start_and_demands_end() {
        let eq = build_equations(&parse_program(RUNNING).unwrap(), DemandStrategy::ThreadsOnly);
        let sys = &eq.system;
        let spawn = sys.lookup("main.1").unwrap();
        let mut probe = Probe::default();
        crate::eqsys::eval_rhs(sys.rhs(spawn).unwrap(), &mut probe).unwrap();
        let start = sys.lookup("foo.start").unwrap();
        let expected: Value = Env::from_bindings([("a", iv(42, 42))]).into();
        assert_eq!(probe.sets, vec![(start, expected)]);
        assert_eq!(probe.demands, vec![sys.lookup("foo.end").unwrap()]);
    }

    #[test]
    fn running_program_solution() {
        let eq = build_equations(&parse_program(RUNNING).unwrap(), DemandStrategy::ThreadsOnly);
        let sys = &eq.system;
        let r = solve_seq(sys, &eq.roots, &SolverConfig::default()).unwrap();
        let g = sys.lookup("g").unwrap();
        assert_eq!(r.solution.get(g), Some(&iv(0, 42).into()));
        let end = as_env(r.solution.get(eq.roots[0]).unwrap().clone()).unwrap();
        assert_eq!(end.get("a"), iv(1, 43));
        assert_eq!(end.get(RET), iv(1, 43));
    }

    #[test]
    fn straight_line_needs_one_pass() {
        let prog = parse_program("fn main() { x = 1; y = x + 2; z = y * x; return z; }").unwrap();
        let eq = build_equations(&prog, DemandStrategy::ThreadsOnly);
        let r = solve_seq(&eq.system, &eq.roots, &SolverConfig::default()).unwrap();
        // main.0..main.2 and main.end
        assert_eq!(r.stats.rhs_evaluations, 4);
        let end = as_env(r.solution.get(eq.roots[0]).unwrap().clone()).unwrap();
        assert_eq!(end.get(RET), iv(3, 3));
    }

    #[test]
    fn loop_exit_is_refined_by_the_guard() {
        let prog = parse_program("fn main() { x = 0; while (x < 10) { x = x + 1; } return x; }").unwrap();
        let eq = build_equations(&prog, DemandStrategy::ThreadsOnly);
        let r = solve_seq(&eq.system, &eq.roots, &SolverConfig::default()).unwrap();
        let end = as_env(r.solution.get(eq.roots[0]).unwrap().clone()).unwrap();
        assert_eq!(end.get("x"), Interval::new(ExtInt::Fin(10), ExtInt::PosInf));
        let body = as_env(r.solution.get(eq.system.lookup("main.2").unwrap()).unwrap().clone()).unwrap();
        assert_eq!(body.get("x"), iv(1, 10));
    }

    #[test]
    fn branches_join_and_dead_arms_vanish() {
        let prog = parse_program(
            "fn main() { x = 5; if (x > 3) { y = 1; } else { y = 2; } if (x == 4) { z = 1; } return y; }",
        )
        .unwrap();
        let eq = build_equations(&prog, DemandStrategy::ThreadsOnly);
        let r = solve_seq(&eq.system, &eq.roots, &SolverConfig::default()).unwrap();
        let sys = &eq.system;
        let else_arm = as_env(r.solution.get(sys.lookup("main.2").unwrap()).unwrap().clone()).unwrap();
        assert!(else_arm.is_unreachable());
        let end = as_env(r.solution.get(eq.roots[0]).unwrap().clone()).unwrap();
        assert_eq!(end.get(RET), iv(1, 1));
        assert_eq!(end.get("z"), Interval::top());
    }

    #[test]
    fn calls_pass_arguments_and_results() {
        let prog = parse_program(
            "global h; fn inc(n) { h = n; return n + 1; }\n\
             fn main() { a = call inc(1); b = call inc(a); h = call inc(10); return b; }",
        )
        .unwrap();
        for strategy in DemandStrategy::ALL {
            let eq = build_equations(&prog, strategy);
            let r = solve_seq(&eq.system, &eq.roots, &SolverConfig::default()).unwrap();
            let end = as_env(r.solution.get(eq.roots[0]).unwrap().clone()).unwrap();
            // context-insensitive: a = n + 1 flows back into n, so n = [1,+inf]
            let up = |lo| Interval::new(ExtInt::Fin(lo), ExtInt::PosInf);
            assert_eq!(end.get("b"), up(2), "{strategy:?}");
            let h = r.solution.get(eq.system.lookup("h").unwrap()).unwrap();
            assert_eq!(h, &Value::from(up(0)));
        }
    }

    #[test]
    fn numbering_is_stable() {
        let prog = parse_program(RUNNING).unwrap();
        let a = build_equations(&prog, DemandStrategy::ThreadsOnly);
        let b = build_equations(&parse_program(RUNNING).unwrap(), DemandStrategy::ThreadsOnly);
        assert_eq!(labels(&a.system), labels(&b.system));
        let names: Vec<_> = a.system.unknowns().map(|u| a.system.label_of(u).to_string()).collect();
        assert_eq!(
            names,
            [
                "g",
                "foo.start",
                "foo.0",
                "foo.end",
                "main.start",
                "main.0",
                "main.1",
                "main.2",
                "main.3",
                "main.end"
            ]
        );
    }
}
