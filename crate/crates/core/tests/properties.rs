//! Invariants of the solvers, the oracle, the text format and the precision
//! comparison, checked on generated systems.

mod common;

use common::random_finite_system;
use fixlab::eqsys::{generate_synthetic, parse_system, serialize_system, SyntheticParams};
use fixlab::solver::{solve, Solution, SolverConfig, SolverKind};
use fixlab::verify::{compare_precision, kleene_solve, verify_solution, Precision};
use fixlab::{Flat, Lattice, Unknown, Value};
use proptest::prelude::*;

fn synthetic_params() -> impl Strategy<Value = SyntheticParams> {
    (any::<u64>(), 1usize..=4, 1usize..=12, 0usize..=3, 1usize..=3).prop_map(
        |(seed, components, chain_length, globals_per_component, work_factor)| SyntheticParams {
            seed,
            components,
            chain_length,
            globals_per_component,
            work_factor,
        },
    )
}

fn seeded(seed: u64) -> SolverConfig {
    SolverConfig {
        schedule_seed: Some(seed),
        ..SolverConfig::default()
    }
}

/// Every value of `low` lies below the value `high` holds for the same unknown.
fn below(low: &Solution<Value>, high: &Solution<Value>) -> bool {
    low.iter().all(|(u, v)| high.get(u).is_some_and(|h| v.leq(h).unwrap()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn serialization_round_trips(seed in any::<u64>(), p in synthetic_params()) {
        for sys in [random_finite_system(seed), generate_synthetic(&p)] {
            let text = serialize_system(&sys).unwrap();
            let again = parse_system(&text).unwrap();
            prop_assert_eq!(serialize_system(&again).unwrap(), text);
            prop_assert_eq!(again.roots().len(), sys.roots().len());
        }
    }

    #[test]
    fn seq_matches_the_oracle_on_finite_lattices(seed in any::<u64>()) {
        let sys = random_finite_system(seed);
        let roots = sys.roots();
        let seq = solve(SolverKind::Seq, &sys, &roots, 1, &SolverConfig::default()).unwrap();
        let least = kleene_solve(&sys, &roots).unwrap();
        prop_assert_eq!(&seq.solution, &least);
        prop_assert!(verify_solution(&sys, &seq.solution).unwrap().ok);
    }

    #[test]
    fn parallel_solutions_are_sound_on_finite_lattices(seed in any::<u64>(), workers in 1usize..=8, schedule in any::<u64>()) {
        let sys = random_finite_system(seed);
        let roots = sys.roots();
        let least = kleene_solve(&sys, &roots).unwrap();
        for kind in [SolverKind::Immediate, SolverKind::Independent] {
            let r = solve(kind, &sys, &roots, workers, &seeded(schedule)).unwrap();
            prop_assert!(r.termination.holds(), "{:?}", r.termination);
            prop_assert!(verify_solution(&sys, &r.solution).unwrap().ok, "{kind}");
            prop_assert!(below(&least, &r.solution), "{kind} misses part of the least solution");
        }
    }

    #[test]
    fn synthetic_systems_verify_under_every_solver(p in synthetic_params(), workers in 1usize..=4, schedule in any::<u64>()) {
        let sys = generate_synthetic(&p);
        let roots = sys.roots();
        let seq = solve(SolverKind::Seq, &sys, &roots, 1, &SolverConfig::default()).unwrap();
        prop_assert!(verify_solution(&sys, &seq.solution).unwrap().ok);
        prop_assert_eq!(seq.solution.len(), p.reached_unknowns());
        let immediate = solve(SolverKind::Immediate, &sys, &roots, workers, &seeded(schedule)).unwrap();
        prop_assert!(verify_solution(&sys, &immediate.solution).unwrap().ok);
        prop_assert!(immediate.termination.holds());
        let independent = solve(SolverKind::Independent, &sys, &roots, workers, &seeded(schedule)).unwrap();
        let report = independent.fixpoint_report.clone().unwrap();
        let v = verify_solution(&sys, &independent.solution).unwrap();
        // the merge may miss a fixpoint only if every task verifies on its own
        prop_assert!(v.ok || (!report.is_empty() && report.per_task_sound));
        prop_assert!(independent.termination.holds());
    }

    #[test]
    fn one_worker_reproduces_seq(p in synthetic_params()) {
        let sys = generate_synthetic(&p);
        let roots = sys.roots();
        let seq = solve(SolverKind::Seq, &sys, &roots, 1, &SolverConfig::default()).unwrap();
        for kind in [SolverKind::Immediate, SolverKind::Independent] {
            let r = solve(kind, &sys, &roots, 1, &SolverConfig::default()).unwrap();
            prop_assert_eq!(&r.solution, &seq.solution, "{}", kind);
        }
    }
}

fn flat() -> impl Strategy<Value = Option<Flat>> {
    prop_oneof![
        Just(None),
        Just(Some(Flat::Bot)),
        Just(Some(Flat::constant("a"))),
        Just(Some(Flat::constant("b"))),
        Just(Some(Flat::Top)),
    ]
}

fn solution(values: &[Option<Flat>]) -> Solution<Value> {
    values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| Some((Unknown::from_index(i), Value::Flat(v.clone()?))))
        .collect()
}

proptest! {
    #[test]
    fn precision_classes_mirror_when_swapped(pairs in prop::collection::vec((flat(), flat()), 0..20)) {
        let (a, b): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let (sa, sb) = (solution(&a), solution(&b));
        let ab = compare_precision(&sa, &sb).unwrap();
        let ba = compare_precision(&sb, &sa).unwrap();
        prop_assert_eq!(ab.equal, ba.equal);
        prop_assert_eq!(ab.more_precise, ba.less_precise);
        prop_assert_eq!(ab.less_precise, ba.more_precise);
        prop_assert_eq!(ab.incomparable, ba.incomparable);
        let sum: f64 = [Precision::Equal, Precision::MorePrecise, Precision::LessPrecise, Precision::Incomparable]
            .into_iter()
            .map(|p| ab.fraction(p))
            .sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        let universe = a.iter().zip(&b).filter(|(x, y)| x.is_some() || y.is_some()).count();
        prop_assert_eq!(ab.total(), universe);
    }

    #[test]
    fn a_solution_equals_itself(values in prop::collection::vec(flat(), 0..20)) {
        let s = solution(&values);
        let r = compare_precision(&s, &s).unwrap();
        prop_assert_eq!(r.fraction(Precision::Equal), 1.0);
    }

    #[test]
    fn classification_follows_the_order(x in flat(), y in flat()) {
        let r = compare_precision(&solution(std::slice::from_ref(&x)), &solution(std::slice::from_ref(&y))).unwrap();
        let read = |v: Option<Flat>| v.unwrap_or(Flat::Bot);
        let (x, y) = (read(x), read(y));
        if r.total() == 0 {
            return Ok(());
        }
        let expected = match (y.leq(&x), x.leq(&y)) {
            (true, true) => Precision::Equal,
            (true, false) => Precision::MorePrecise,
            (false, true) => Precision::LessPrecise,
            (false, false) => Precision::Incomparable,
        };
        prop_assert_eq!(r.count(expected), 1);
    }
}
