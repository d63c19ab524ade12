//! Corpus shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use fixlab::eqsys::{generate_synthetic, parse_system, SyntheticParams};
use fixlab::frontend::{build_equations, parse_program, DemandStrategy, Program};
use fixlab::{BinOp, Domain, EquationSystem, FiniteSet, Flat, RhsExpr, Unknown, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

fn files(sub: &str, ext: &str) -> Vec<(String, String)> {
    let mut out: Vec<_> = fs::read_dir(corpus_dir().join(sub))
        .expect("corpus directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

pub fn toy_programs() -> Vec<(String, Program)> {
    files("programs", "toy")
        .into_iter()
        .map(|(n, t)| {
            let p = parse_program(&t).unwrap_or_else(|e| panic!("{n}: {e}"));
            (n, p)
        })
        .collect()
}

pub fn toy_program(name: &str) -> Program {
    let text = fs::read_to_string(corpus_dir().join("programs").join(name)).unwrap();
    parse_program(&text).unwrap()
}

pub fn eqs_systems() -> Vec<(String, EquationSystem)> {
    files("systems", "eqs")
        .into_iter()
        .map(|(n, t)| {
            let s = parse_system(&t).unwrap_or_else(|e| panic!("{n}: {e}"));
            (n, s)
        })
        .collect()
}

/// Seeded synthetic systems of varied shape.
pub fn synthetic_systems(count: u64) -> Vec<(String, EquationSystem)> {
    (0..count)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + seed);
            let p = SyntheticParams {
                seed,
                components: rng.gen_range(1..=6),
                chain_length: rng.gen_range(1..=40),
                globals_per_component: rng.gen_range(0..=3),
                work_factor: rng.gen_range(1..=4),
            };
            let name = format!(
                "synth-s{}-c{}-l{}-g{}-w{}",
                p.seed, p.components, p.chain_length, p.globals_per_component, p.work_factor
            );
            (name, generate_synthetic(&p))
        })
        .collect()
}

/// One solvable unit of the corpus: a system and its roots.
pub struct Item {
    pub name: String,
    pub system: EquationSystem,
    pub roots: Vec<Unknown>,
}

/// Toy programs under every demand strategy, the `.eqs` files and
/// `synthetic` seeded synthetic systems.
pub fn full_corpus(synthetic: u64) -> Vec<Item> {
    let mut items = Vec::new();
    for (name, prog) in toy_programs() {
        for strategy in DemandStrategy::ALL {
            let eq = build_equations(&prog, strategy);
            items.push(Item {
                name: format!("{name}[{strategy}]"),
                system: eq.system,
                roots: eq.roots,
            });
        }
    }
    for (name, system) in eqs_systems().into_iter().chain(synthetic_systems(synthetic)) {
        let roots = system.roots();
        items.push(Item { name, system, roots });
    }
    items
}

/// A random side-effect-free, demand-free system over the flat or set lattice.
pub fn random_finite_system(seed: u64) -> EquationSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = if rng.gen_bool(0.5) { Domain::Flat } else { Domain::Set };
    let n = rng.gen_range(2..=12);
    let mut sys = EquationSystem::with_lattice(domain);
    let xs: Vec<Unknown> = (0..n)
        .map(|i| sys.declare_local(&format!("x{i}"), domain).unwrap())
        .collect();
    for &x in &xs {
        let rhs = random_expr(&mut rng, domain, &xs, 3);
        sys.define(x, rhs).unwrap();
    }
    sys
}

fn random_const(rng: &mut ChaCha8Rng, domain: Domain) -> Value {
    match domain {
        Domain::Flat => match rng.gen_range(0..6) {
            0 => Value::Flat(Flat::Top),
            1 => Value::Flat(Flat::Bot),
            k => Value::Flat(Flat::constant(k.to_string())),
        },
        _ => {
            let atoms = ["a", "b", "c", "d"];
            let pick = atoms.iter().filter(|_| rng.gen_bool(0.4)).copied();
            Value::Set(FiniteSet::of(pick))
        }
    }
}

fn random_expr(rng: &mut ChaCha8Rng, domain: Domain, xs: &[Unknown], depth: u32) -> RhsExpr {
    let leaf = depth == 0 || rng.gen_bool(0.3);
    if leaf {
        return if rng.gen_bool(0.6) {
            RhsExpr::Get(xs[rng.gen_range(0..xs.len())])
        } else {
            RhsExpr::Const(random_const(rng, domain))
        };
    }
    let a = random_expr(rng, domain, xs, depth - 1);
    let b = random_expr(rng, domain, xs, depth - 1);
    match (domain, rng.gen_range(0..3)) {
        (Domain::Flat, 0) => RhsExpr::binop(BinOp::Add, a, b),
        (Domain::Flat, 1) => RhsExpr::binop(BinOp::Mul, a, b),
        (_, 2) => RhsExpr::let_in("v", a, RhsExpr::join(RhsExpr::var("v"), b)),
        _ => RhsExpr::join(a, b),
    }
}
