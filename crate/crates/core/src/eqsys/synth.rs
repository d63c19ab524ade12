use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EquationSystem, RhsExpr, Unknown};
use crate::lattice::{BinOp, Domain};
use crate::Interval;

/// Shape of a generated system. All counts must be at least 1, except
/// `globals_per_component`, which may be 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticParams {
    pub seed: u64,
    pub components: usize,
    pub chain_length: usize,
    pub globals_per_component: usize,
    pub work_factor: usize,
}

impl SyntheticParams {
    /// Locals plus globals a solve from the root reaches.
    pub fn reached_unknowns(&self) -> usize {
        let main = usize::from(self.components > 1);
        self.components * self.chain_length + main + self.components * self.globals_per_component
    }
}

fn konst(k: i64) -> RhsExpr {
    RhsExpr::Const(Interval::constant(k).into())
}

/// Builds `components` chains of locals `c{c}.{i}`. Element `i` reads
/// element `i-1`, folds `work_factor` interval operations over it and
/// contributes the result to the globals `g{c}.{j}` with `j ≡ i (mod G)`.
/// Chain heads read a global of the next component, so components interact
/// only through globals. With more than one component a local `main`
/// demands every chain end and is the sole root; otherwise the chain end is.
pub fn generate_synthetic(p: &SyntheticParams) -> EquationSystem {
    assert!(
        p.components >= 1 && p.chain_length >= 1 && p.work_factor >= 1,
        "synthetic parameters must be positive"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut sys = EquationSystem::with_lattice(Domain::Interval);
    let globals: Vec<Vec<Unknown>> = (0..p.components)
        .map(|c| {
            (0..p.globals_per_component)
                .map(|j| {
                    sys.add_global(&format!("g{c}.{j}"), Domain::Interval)
                        .expect("fresh label")
                })
                .collect()
        })
        .collect();

    let mut ends = Vec::with_capacity(p.components);
    for c in 0..p.components {
        let mut pred: Option<Unknown> = None;
        for i in 0..p.chain_length {
            let input = match pred {
                Some(u) => RhsExpr::Get(u),
                None => {
                    let seed = konst(rng.gen_range(0..10));
                    let next = &globals[(c + 1) % p.components];
                    if p.components > 1 && !next.is_empty() {
                        RhsExpr::join(seed, RhsExpr::Get(next[0]))
                    } else {
                        seed
                    }
                }
            };
            let mut body = Vec::new();
            let g = &globals[c];
            if !g.is_empty() {
                body.push(RhsExpr::set(g[i % g.len()], RhsExpr::var("v")));
                if i + 1 == p.chain_length {
                    for &extra in g.iter().skip(i + 1) {
                        body.push(RhsExpr::set(extra, RhsExpr::var("v")));
                    }
                }
            }
            body.push(RhsExpr::var("v"));
            let mut rhs = if body.len() == 1 {
                RhsExpr::var("v")
            } else {
                RhsExpr::Seq(body)
            };
            let ops: Vec<(BinOp, i64)> = (0..p.work_factor)
                .map(|_| match rng.gen_range(0..10) {
                    0 => (BinOp::Mul, 1),
                    1..=3 => (BinOp::Sub, rng.gen_range(0..3)),
                    _ => (BinOp::Add, rng.gen_range(0..6)),
                })
                .collect();
            for (op, k) in ops.into_iter().rev() {
                rhs = RhsExpr::let_in("v", RhsExpr::binop(op, RhsExpr::var("v"), konst(k)), rhs);
            }
            let rhs = RhsExpr::let_in("v", input, rhs);
            let u = sys
                .add_local(&format!("c{c}.{i}"), Domain::Interval, rhs)
                .expect("fresh label");
            pred = Some(u);
        }
        ends.push(pred.expect("chain_length >= 1"));
    }

    if p.components > 1 {
        let mut body: Vec<RhsExpr> = ends.iter().map(|&e| RhsExpr::Demand(e)).collect();
        body.push(konst(0));
        let main = sys
            .add_local("main", Domain::Interval, RhsExpr::Seq(body))
            .expect("fresh label");
        sys.add_root(main);
    } else {
        sys.add_root(ends[0]);
    }
    sys
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eqsys::{parse_system, serialize_system};

    fn params(seed: u64, c: usize, l: usize, g: usize, w: usize) -> SyntheticParams {
        SyntheticParams {
            seed,
            components: c,
            chain_length: l,
            globals_per_component: g,
            work_factor: w,
        }
    }

    #[test]
    fn smallest_instance_has_one_unknown() {
        let sys = generate_synthetic(&params(7, 1, 1, 0, 1));
        assert_eq!(sys.len(), 1);
        assert_eq!(sys.roots(), vec![Unknown::from_index(0)]);
    }

    #[test]
    fn deterministic_in_seed() {
        let p = params(3, 3, 5, 2, 4);
        assert_eq!(generate_synthetic(&p), generate_synthetic(&p));
        assert_ne!(
            generate_synthetic(&p),
            generate_synthetic(&SyntheticParams { seed: 4, ..p })
        );
    }

    #[test]
    fn round_trips_through_text() {
        for seed in 0..5 {
            let sys = generate_synthetic(&params(seed, 3, 4, 2, 3));
            let text = serialize_system(&sys).unwrap();
            assert_eq!(parse_system(&text).unwrap(), sys);
        }
    }

    #[test]
    fn every_global_is_written_even_for_short_chains() {
        let sys = generate_synthetic(&params(1, 2, 1, 3, 1));
        let mut seen = Vec::new();
        for u in sys.unknowns() {
            if let Some(rhs) = sys.rhs(u) {
                rhs.mentions(&mut seen);
            }
        }
        for u in sys.unknowns().filter(|&u| sys.kind(u) == crate::eqsys::Kind::Global) {
            assert!(seen.contains(&u), "{} never mentioned", sys.label_of(u));
        }
    }
}
