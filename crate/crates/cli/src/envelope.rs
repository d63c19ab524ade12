//! The JSON result envelope `{meta, solution, stats, verification}`.
//!
//! Values are stored in their textual form next to their domain, so an
//! envelope can be read back into a [`Solution`] for `compare`.

use anyhow::{bail, Context};
use fixlab::solver::{Solution, Solved, SolverDetail};
use fixlab::verify::VerificationResult;
use fixlab::{ConstraintSystem, Domain, EquationSystem, Kind, Unknown, Value};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL: &str = "fixlab";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub meta: Meta,
    pub solution: Vec<Entry>,
    pub stats: RunStats,
    pub verification: Verification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    /// `solve` or `analyze`.
    pub command: String,
    pub input: String,
    pub solver: String,
    pub workers: usize,
    pub seed: Option<u64>,
    pub widen_delay: u32,
    pub budget: u64,
    /// Demand strategy; only set by `analyze`.
    pub demand: Option<String>,
    pub system: SystemInfo,
}

/// Identifies the declared unknowns of a system, ignoring right-hand sides,
/// so results of different demand strategies on one program stay comparable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemInfo {
    pub unknowns: usize,
    pub fingerprint: String,
}

impl SystemInfo {
    pub fn of(sys: &EquationSystem) -> Self {
        let mut h = Sha256::new();
        for u in sys.unknowns() {
            let kind = match sys.kind(u) {
                Kind::Local => "local",
                Kind::Global => "global",
            };
            h.update(format!("{}\t{kind}\t{}\n", sys.label_of(u), sys.domain(u)));
        }
        let digest = h.finalize();
        SystemInfo {
            unknowns: sys.len(),
            fingerprint: digest[..8].iter().map(|b| format!("{b:02x}")).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub unknown: String,
    pub kind: String,
    pub domain: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub wall_time_ms: f64,
    pub rhs_evaluations: u64,
    pub unknowns_reached: usize,
    pub destabilizations: u64,
    pub widenings: u64,
    pub termination: TerminationOut,
    pub immediate: Option<ImmediateOut>,
    pub independent: Option<IndependentOut>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminationOut {
    pub holds: bool,
    pub work_empty: bool,
    pub all_stable: bool,
    pub none_called: bool,
    pub inboxes_drained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImmediateOut {
    pub cas_attempts: u64,
    pub cas_retries: u64,
    pub claims_skipped: u64,
    pub retry_ratio: f64,
    pub per_worker_rhs: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependentOut {
    pub tasks_created: u64,
    pub revivals: u64,
    pub publishes: u64,
    pub updates_delivered: u64,
    pub duplicate_work_ratio: f64,
    pub per_worker_rhs: Vec<u64>,
    pub fixpoint_report: ReportOut,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportOut {
    pub violations: Vec<String>,
    pub per_task_sound: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verification {
    pub ok: bool,
    pub violations: Vec<ViolationOut>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationOut {
    pub unknown: String,
    pub kind: String,
    pub target: String,
    pub stored: Option<String>,
    pub required: Option<String>,
}

impl Envelope {
    pub fn new(
        meta: Meta,
        sys: &EquationSystem,
        solved: &Solved<Value>,
        verification: &VerificationResult<Value>,
    ) -> Self {
        let label = |u: Unknown| sys.label_of(u).to_string();
        let mut solution: Vec<Entry> = solved
            .solution
            .iter()
            .map(|(u, v)| Entry {
                unknown: label(u),
                kind: if sys.is_global(u) { "global" } else { "local" }.to_string(),
                domain: v.domain().name().to_string(),
                value: v.to_string(),
            })
            .collect();
        // declaration order, so output is stable across solvers
        solution.sort_by_key(|e| sys.lookup(&e.unknown));
        let s = &solved.stats;
        let t = &solved.termination;
        let (immediate, independent) = match &solved.detail {
            SolverDetail::Seq => (None, None),
            SolverDetail::Immediate(d) => (
                Some(ImmediateOut {
                    cas_attempts: d.cas_attempts,
                    cas_retries: d.cas_retries,
                    claims_skipped: d.claims_skipped,
                    retry_ratio: d.retry_ratio(),
                    per_worker_rhs: d.per_worker_rhs.clone(),
                }),
                None,
            ),
            SolverDetail::Independent(d) => {
                let report = solved.fixpoint_report.clone().unwrap_or_default();
                (
                    None,
                    Some(IndependentOut {
                        tasks_created: d.tasks_created,
                        revivals: d.revivals,
                        publishes: d.publishes,
                        updates_delivered: d.updates_delivered,
                        duplicate_work_ratio: d.duplicate_work_ratio,
                        per_worker_rhs: d.per_worker_rhs.clone(),
                        fixpoint_report: ReportOut {
                            violations: report.violations.iter().map(|&u| label(u)).collect(),
                            per_task_sound: report.per_task_sound,
                        },
                    }),
                )
            }
        };
        Envelope {
            meta,
            solution,
            stats: RunStats {
                wall_time_ms: s.wall_time.as_secs_f64() * 1e3,
                rhs_evaluations: s.rhs_evaluations,
                unknowns_reached: s.unknowns_reached,
                destabilizations: s.destabilizations,
                widenings: s.widenings,
                termination: TerminationOut {
                    holds: t.holds(),
                    work_empty: t.work_empty,
                    all_stable: t.all_stable,
                    none_called: t.none_called,
                    inboxes_drained: t.inboxes_drained,
                },
                immediate,
                independent,
            },
            verification: Verification {
                ok: verification.ok,
                violations: verification
                    .violations
                    .iter()
                    .map(|v| ViolationOut {
                        unknown: label(v.unknown),
                        kind: v.kind.name().to_string(),
                        target: label(v.target),
                        stored: v.stored.as_ref().map(ToString::to_string),
                        required: v.required.as_ref().map(ToString::to_string),
                    })
                    .collect(),
            },
        }
    }

    /// Plain-text rendering: one `label = value` line per unknown, then stats.
    pub fn to_text(&self) -> String {
        let m = &self.meta;
        let s = &self.stats;
        let mut out = format!("# {} {} with {} x{}", m.command, m.input, m.solver, m.workers);
        if let Some(d) = &m.demand {
            out += &format!(", demand {d}");
        }
        out.push('\n');
        for e in &self.solution {
            out += &format!("{} = {}\n", e.unknown, e.value);
        }
        out += &format!(
            "# rhs_evaluations {} unknowns_reached {} destabilizations {} widenings {} wall_time_ms {:.3}\n",
            s.rhs_evaluations, s.unknowns_reached, s.destabilizations, s.widenings, s.wall_time_ms
        );
        if let Some(i) = &s.immediate {
            out += &format!(
                "# cas_attempts {} cas_retries {} retry_ratio {:.6} claims_skipped {}\n",
                i.cas_attempts, i.cas_retries, i.retry_ratio, i.claims_skipped
            );
        }
        if let Some(i) = &s.independent {
            out += &format!(
                "# tasks_created {} revivals {} publishes {} updates_delivered {} duplicate_work_ratio {:.4} fixpoint_report [{}]\n",
                i.tasks_created,
                i.revivals,
                i.publishes,
                i.updates_delivered,
                i.duplicate_work_ratio,
                i.fixpoint_report.violations.join(", ")
            );
        }
        if self.verification.ok {
            out += "# verified\n";
        } else {
            out += &format!(
                "# verification FAILED: {} violations\n",
                self.verification.violations.len()
            );
            for v in &self.verification.violations {
                out += &format!("#   {} {} on {}", v.unknown, v.kind, v.target);
                if let (Some(s), Some(r)) = (&v.stored, &v.required) {
                    out += &format!(": stored {s}, required {r}");
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Reads two envelopes back into solutions over one shared label index.
/// Fails if they were produced from systems with different declarations.
pub fn solutions_of(a: &Envelope, b: &Envelope) -> anyhow::Result<(Vec<String>, Solution<Value>, Solution<Value>)> {
    if a.meta.system != b.meta.system {
        bail!(
            "results are over different systems ({} unknowns, fingerprint {} vs {} unknowns, fingerprint {})",
            a.meta.system.unknowns,
            a.meta.system.fingerprint,
            b.meta.system.unknowns,
            b.meta.system.fingerprint
        );
    }
    let mut labels: Vec<String> = Vec::new();
    let mut index = std::collections::HashMap::new();
    let mut read = |env: &Envelope| -> anyhow::Result<Solution<Value>> {
        let mut sol = Solution::new();
        for e in &env.solution {
            let domain = Domain::from_name(&e.domain).with_context(|| format!("unknown domain `{}`", e.domain))?;
            let value = Value::parse(&e.value, domain).with_context(|| format!("value of `{}`", e.unknown))?;
            let id = *index.entry(e.unknown.clone()).or_insert_with(|| {
                labels.push(e.unknown.clone());
                Unknown::from_index(labels.len() - 1)
            });
            if sol.insert(id, value).is_some() {
                bail!("unknown `{}` listed twice", e.unknown);
            }
        }
        Ok(sol)
    };
    let sa = read(a)?;
    let sb = read(b)?;
    Ok((labels, sa, sb))
}
