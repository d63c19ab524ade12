//! Solver-independent checks on solutions.
//!
//! [`verify_solution`] re-evaluates right-hand sides against a candidate
//! solution, [`kleene_solve`] is a widening-free round-robin oracle for small
//! systems, and [`compare_precision`] classifies two solutions unknown by
//! unknown.

use std::collections::BTreeSet;
use std::fmt;

use crate::eqsys::{ConstraintSystem, Effects, Unknown};
use crate::solver::Solution;
use crate::{Error, Lattice, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    /// The re-evaluated right-hand side exceeds the stored value.
    RhsNotSubsumed,
    /// A side contribution exceeds the stored value of its global.
    SideNotSubsumed,
    /// A demanded unknown is missing from the solution.
    DemandUnreached,
}

impl ViolationKind {
    pub fn name(self) -> &'static str {
        match self {
            ViolationKind::RhsNotSubsumed => "RhsNotSubsumed",
            ViolationKind::SideNotSubsumed => "SideNotSubsumed",
            ViolationKind::DemandUnreached => "DemandUnreached",
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation<V> {
    /// The local whose right-hand side was re-evaluated.
    pub unknown: Unknown,
    pub kind: ViolationKind,
    /// The unknown the failing check is about: `unknown` itself, the global
    /// written, or the unknown demanded.
    pub target: Unknown,
    /// Value of `target` in the solution (bot if absent); `None` for demands.
    pub stored: Option<V>,
    /// Value `target` would have to cover; `None` for demands.
    pub required: Option<V>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationResult<V> {
    pub ok: bool,
    pub violations: Vec<Violation<V>>,
}

/// Records the effects of one right-hand side against a fixed assignment.
struct Probe<'a, V> {
    x: Unknown,
    lookup: &'a dyn Fn(Unknown) -> V,
    reached: &'a dyn Fn(Unknown) -> bool,
    out: &'a mut Vec<Violation<V>>,
}

impl<V: Lattice> Effects<V> for Probe<'_, V> {
    fn get(&mut self, y: Unknown) -> Result<V> {
        Ok((self.lookup)(y))
    }

    fn set(&mut self, g: Unknown, contribution: V) -> Result<()> {
        let stored = (self.lookup)(g);
        if !contribution.leq(&stored)? {
            self.out.push(Violation {
                unknown: self.x,
                kind: ViolationKind::SideNotSubsumed,
                target: g,
                stored: Some(stored),
                required: Some(contribution),
            });
        }
        Ok(())
    }

    fn demand(&mut self, y: Unknown) -> Result<()> {
        if !(self.reached)(y) {
            self.out.push(Violation {
                unknown: self.x,
                kind: ViolationKind::DemandUnreached,
                target: y,
                stored: None,
                required: None,
            });
        }
        Ok(())
    }
}

/// Checks the right-hand sides of `locals` against the assignment `lookup`
/// (`None` reads as bot). `reached` decides whether a demand is satisfied.
pub fn check_with<S: ConstraintSystem>(
    sys: &S,
    locals: impl IntoIterator<Item = Unknown>,
    lookup: &dyn Fn(Unknown) -> Option<S::Value>,
    reached: &dyn Fn(Unknown) -> bool,
) -> Result<VerificationResult<S::Value>> {
    let read = |u: Unknown| lookup(u).unwrap_or_else(|| sys.bottom(u));
    let mut violations = Vec::new();
    for x in locals {
        let mut probe = Probe {
            x,
            lookup: &read,
            reached,
            out: &mut violations,
        };
        let v = sys.eval(x, &mut probe)?;
        let stored = read(x);
        if !v.leq(&stored)? {
            violations.push(Violation {
                unknown: x,
                kind: ViolationKind::RhsNotSubsumed,
                target: x,
                stored: Some(stored),
                required: Some(v),
            });
        }
    }
    Ok(VerificationResult {
        ok: violations.is_empty(),
        violations,
    })
}

/// Checks that `sol` is a post-solution on every local it contains.
pub fn verify_solution<S: ConstraintSystem>(sys: &S, sol: &Solution<S::Value>) -> Result<VerificationResult<S::Value>> {
    check_with(
        sys,
        sol.unknowns().filter(|&u| !sys.is_global(u)),
        &|u| sol.get(u).cloned(),
        &|u| sol.contains(u),
    )
}

/// Round cap of [`kleene_solve`].
pub const KLEENE_MAX_ROUNDS: u64 = 100_000;

/// Widening-free chaotic iteration from bot over the unknowns reachable from
/// `roots`. Locals accumulate the join of their right-hand-side values and
/// globals the join of their contributions; iteration stops after a round
/// that changes nothing and reaches nothing new.
pub fn kleene_solve<S: ConstraintSystem>(sys: &S, roots: &[Unknown]) -> Result<Solution<S::Value>> {
    kleene_solve_capped(sys, roots, KLEENE_MAX_ROUNDS)
}

pub fn kleene_solve_capped<S: ConstraintSystem>(
    sys: &S,
    roots: &[Unknown],
    max_rounds: u64,
) -> Result<Solution<S::Value>> {
    struct Round<'a, S: ConstraintSystem> {
        sys: &'a S,
        sol: &'a mut Solution<S::Value>,
        order: &'a mut Vec<Unknown>,
        changed: bool,
    }

    impl<S: ConstraintSystem> Round<'_, S> {
        fn reach(&mut self, u: Unknown) {
            if !self.sol.contains(u) {
                self.sol.insert(u, self.sys.bottom(u));
                self.order.push(u);
                self.changed = true;
            }
        }

        fn absorb(&mut self, u: Unknown, v: &S::Value) -> Result<()> {
            self.reach(u);
            let old = self.sol.get(u).expect("reached");
            if !v.leq(old)? {
                let joined = old.join(v)?;
                self.sol.insert(u, joined);
                self.changed = true;
            }
            Ok(())
        }
    }

    impl<S: ConstraintSystem> Effects<S::Value> for Round<'_, S> {
        fn get(&mut self, y: Unknown) -> Result<S::Value> {
            self.reach(y);
            Ok(self.sol.get(y).cloned().expect("reached"))
        }

        fn set(&mut self, g: Unknown, contribution: S::Value) -> Result<()> {
            if !self.sys.is_global(g) {
                return Err(Error::InvalidSide(self.sys.label(g).into_owned()));
            }
            self.absorb(g, &contribution)
        }

        fn demand(&mut self, y: Unknown) -> Result<()> {
            if self.sys.is_global(y) {
                return Err(Error::InvalidDemand(self.sys.label(y).into_owned()));
            }
            self.reach(y);
            Ok(())
        }
    }

    if let Some(&r) = roots.iter().find(|&&r| sys.is_global(r)) {
        return Err(Error::InvalidRoot(sys.label(r).into_owned()));
    }
    let mut sol = Solution::new();
    let mut order = Vec::new();
    let mut round = Round {
        sys,
        sol: &mut sol,
        order: &mut order,
        changed: false,
    };
    for &r in roots {
        round.reach(r);
    }
    for _ in 0..max_rounds {
        round.changed = false;
        let mut i = 0;
        while i < round.order.len() {
            let x = round.order[i];
            i += 1;
            if sys.is_global(x) {
                continue;
            }
            let v = sys.eval(x, &mut round)?;
            round.absorb(x, &v)?;
        }
        if !round.changed {
            return Ok(sol);
        }
    }
    Err(Error::OracleDiverged(max_rounds))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Precision {
    Equal,
    /// `other` is strictly below `base`.
    MorePrecise,
    /// `other` is strictly above `base`.
    LessPrecise,
    Incomparable,
}

impl Precision {
    pub fn name(self) -> &'static str {
        match self {
            Precision::Equal => "equal",
            Precision::MorePrecise => "more_precise",
            Precision::LessPrecise => "less_precise",
            Precision::Incomparable => "incomparable",
        }
    }
}

/// Per-unknown classification of `other` relative to `base`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrecisionReport {
    pub equal: usize,
    pub more_precise: usize,
    pub less_precise: usize,
    pub incomparable: usize,
    pub details: Vec<(Unknown, Precision)>,
}

impl PrecisionReport {
    pub fn total(&self) -> usize {
        self.equal + self.more_precise + self.less_precise + self.incomparable
    }

    pub fn count(&self, p: Precision) -> usize {
        match p {
            Precision::Equal => self.equal,
            Precision::MorePrecise => self.more_precise,
            Precision::LessPrecise => self.less_precise,
            Precision::Incomparable => self.incomparable,
        }
    }

    /// Share of compared unknowns in class `p`. With nothing to compare, the
    /// two solutions agree trivially and `equal` gets the whole share.
    pub fn fraction(&self, p: Precision) -> f64 {
        match self.total() {
            0 if p == Precision::Equal => 1.0,
            0 => 0.0,
            n => self.count(p) as f64 / n as f64,
        }
    }
}

/// Classifies every unknown in either solution; an unknown missing on one
/// side reads as bot there.
pub fn compare_precision<V: Lattice>(base: &Solution<V>, other: &Solution<V>) -> Result<PrecisionReport> {
    let universe: BTreeSet<Unknown> = base.unknowns().chain(other.unknowns()).collect();
    let mut report = PrecisionReport::default();
    for u in universe {
        let (b, o) = match (base.get(u), other.get(u)) {
            (Some(b), Some(o)) => (b.clone(), o.clone()),
            (Some(b), None) => (b.clone(), b.bot_like()),
            (None, Some(o)) => (o.bot_like(), o.clone()),
            (None, None) => unreachable!("unknown taken from one of the solutions"),
        };
        let class = match (o.leq(&b)?, b.leq(&o)?) {
            (true, true) => Precision::Equal,
            (true, false) => Precision::MorePrecise,
            (false, true) => Precision::LessPrecise,
            (false, false) => Precision::Incomparable,
        };
        match class {
            Precision::Equal => report.equal += 1,
            Precision::MorePrecise => report.more_precise += 1,
            Precision::LessPrecise => report.less_precise += 1,
            Precision::Incomparable => report.incomparable += 1,
        }
        report.details.push((u, class));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eqsys::parse_system;
    use crate::solver::{solve_seq, SolverConfig};
    use crate::{Interval, Value};

    fn iv(lo: i64, hi: i64) -> Value {
        Interval::range(lo, hi).into()
    }

    const RUNNING: &str = include_str!("../corpus/systems/running.eqs");

    #[test]
    fn seq_solution_of_running_example_verifies() {
        let sys = parse_system(RUNNING).unwrap();
        let solved = solve_seq(&sys, &sys.roots(), &SolverConfig::default()).unwrap();
        let r = verify_solution(&sys, &solved.solution).unwrap();
        assert!(r.ok, "{:?}", r.violations);
    }

    #[test]
    fn too_small_root_value_is_reported() {
        let sys = parse_system(RUNNING).unwrap();
        let mut sol = solve_seq(&sys, &sys.roots(), &SolverConfig::default())
            .unwrap()
            .solution;
        let root = sys.lookup("⟨13⟩").unwrap();
        sol.insert(root, iv(1, 1));
        let r = verify_solution(&sys, &sol).unwrap();
        assert!(!r.ok);
        assert!(r
            .violations
            .iter()
            .any(|v| v.unknown == root && v.kind == ViolationKind::RhsNotSubsumed));
    }

    #[test]
    fn empty_solution_of_empty_system_verifies() {
        let sys = parse_system("lattice interval;").unwrap();
        assert!(verify_solution(&sys, &Solution::new()).unwrap().ok);
    }

    #[test]
    fn side_and_demand_violations() {
        let sys = parse_system("lattice interval;\ng: global\nx: local = seq(set g const [5,5]; demand y; const [0,0])\ny: local = const [1,1]\nroot x").unwrap();
        let x = sys.lookup("x").unwrap();
        let g = sys.lookup("g").unwrap();
        let sol: Solution<Value> = [(x, iv(0, 0)), (g, iv(0, 4))].into_iter().collect();
        let r = verify_solution(&sys, &sol).unwrap();
        let kinds: Vec<_> = r.violations.iter().map(|v| (v.kind, v.target)).collect();
        assert_eq!(
            kinds,
            vec![
                (ViolationKind::SideNotSubsumed, g),
                (ViolationKind::DemandUnreached, sys.lookup("y").unwrap())
            ]
        );
    }

    #[test]
    fn kleene_examples() {
        let sys = parse_system(
            "lattice interval;\nx: local = const [1,2]\ny: local = add(get x, const [1,1])\nz: local = const [7,7]",
        )
        .unwrap();
        let (x, y, z) = (
            sys.lookup("x").unwrap(),
            sys.lookup("y").unwrap(),
            sys.lookup("z").unwrap(),
        );
        let sol = kleene_solve(&sys, &[y]).unwrap();
        assert_eq!(sol.get(x), Some(&iv(1, 2)));
        assert_eq!(sol.get(y), Some(&iv(2, 3)));
        assert!(!sol.contains(z));

        let sys = parse_system("lattice interval;\ng: global\na: local = seq(set g const [0,0]; const [0,0])\nb: local = seq(set g const [42,42]; get a)\nr: local = seq(get b; get g)").unwrap();
        let sol = kleene_solve(&sys, &sys.roots()).unwrap();
        assert_eq!(sol.get(sys.lookup("g").unwrap()), Some(&iv(0, 42)));
    }

    #[test]
    fn kleene_reports_divergence() {
        let sys = parse_system("lattice interval;\nx: local = join(const [0,0], add(get x, const [1,1]))").unwrap();
        assert!(matches!(
            kleene_solve_capped(&sys, &sys.roots(), 50),
            Err(Error::OracleDiverged(50))
        ));
    }

    #[test]
    fn precision_examples() {
        let x = Unknown::from_index(0);
        let a: Solution<Value> = [(x, iv(0, 42))].into_iter().collect();
        let b: Solution<Value> = [(x, iv(0, 10))].into_iter().collect();
        let c: Solution<Value> = [(x, iv(0, 5))].into_iter().collect();
        let d: Solution<Value> = [(x, iv(3, 9))].into_iter().collect();
        assert_eq!(compare_precision(&a, &a).unwrap().fraction(Precision::Equal), 1.0);
        assert_eq!(compare_precision(&a, &b).unwrap().more_precise, 1);
        assert_eq!(compare_precision(&b, &a).unwrap().less_precise, 1);
        assert_eq!(compare_precision(&c, &d).unwrap().incomparable, 1);
    }

    #[test]
    fn absent_unknowns_read_as_bot() {
        let (x, y) = (Unknown::from_index(0), Unknown::from_index(1));
        let a: Solution<Value> = [(x, iv(0, 1)), (y, Interval::Empty.into())].into_iter().collect();
        let b: Solution<Value> = [(x, iv(0, 1))].into_iter().collect();
        let r = compare_precision(&a, &b).unwrap();
        assert_eq!(r.equal, 2);
        let c: Solution<Value> = [(x, iv(0, 1)), (y, iv(2, 2))].into_iter().collect();
        let r = compare_precision(&c, &b).unwrap();
        assert_eq!((r.equal, r.more_precise), (1, 1));
        let total: f64 = [
            Precision::Equal,
            Precision::MorePrecise,
            Precision::LessPrecise,
            Precision::Incomparable,
        ]
        .into_iter()
        .map(|p| r.fraction(p))
        .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
