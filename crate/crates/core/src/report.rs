//! Serializable report documents. Terms and levels are stored rendered, so
//! documents round-trip through any serde format unchanged.

use crate::checker::{AttackResult, IncreasingVerdict, Verdict};
use crate::deduce::{Derivation, Rule};
use crate::funcs::ReliabilityReport;
use crate::roles::RoleSpec;
use crate::term::Term;
use serde::{Deserialize, Serialize};
use std::fmt;

fn render_all<'a>(ts: impl IntoIterator<Item = &'a Term>) -> Vec<String> {
    ts.into_iter().map(Term::to_string).collect()
}

fn set(items: &[String]) -> String {
    format!("{{{}}}", items.join(", "))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleDoc {
    pub id: String,
    pub owner: String,
    pub steps: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolesDoc {
    pub protocol: String,
    pub roles: Vec<RoleDoc>,
}

impl From<&RoleSpec> for RolesDoc {
    fn from(spec: &RoleSpec) -> Self {
        RolesDoc {
            protocol: spec.protocol.clone(),
            roles: spec
                .roles
                .iter()
                .map(|g| RoleDoc {
                    id: g.id.clone(),
                    owner: g.owner.clone(),
                    steps: g.render_steps(),
                })
                .collect(),
        }
    }
}

impl fmt::Display for RolesDoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.roles {
            writeln!(f, "{} = {}", r.id, r.steps.join(". "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WellFormedCounterexample {
    pub axiom: String,
    pub alpha: String,
    pub m1: Vec<String>,
    pub m2: Vec<String>,
    pub got: String,
    pub expected: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WellFormedDoc {
    pub pass: bool,
    pub cases: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<WellFormedCounterexample>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvarianceBoundsDoc {
    pub pool: Vec<String>,
    pub set_depth: usize,
    pub max_set_size: usize,
    pub goal_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvarianceCounterexample {
    pub msgs: Vec<String>,
    pub derived: String,
    pub alpha: String,
    pub lhs: String,
    pub rhs: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FullInvariantDoc {
    pub pass: bool,
    pub bounds: InvarianceBoundsDoc,
    pub sets_checked: usize,
    pub sets_skipped: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<InvarianceCounterexample>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReliabilityDoc {
    pub function: String,
    pub well_formed: WellFormedDoc,
    pub full_invariant: FullInvariantDoc,
}

impl ReliabilityDoc {
    pub fn passed(&self) -> bool {
        self.well_formed.pass && self.full_invariant.pass
    }
}

impl From<&ReliabilityReport> for ReliabilityDoc {
    fn from(r: &ReliabilityReport) -> Self {
        let b = &r.invariance_bounds;
        ReliabilityDoc {
            function: r.function.clone(),
            well_formed: WellFormedDoc {
                pass: r.well_formed.passed(),
                cases: r.well_formed.cases,
                counterexample: r.well_formed.violation.as_ref().map(|v| WellFormedCounterexample {
                    axiom: v.axiom.to_string(),
                    alpha: v.alpha.to_string(),
                    m1: render_all(&v.m1),
                    m2: render_all(&v.m2),
                    got: v.got.to_string(),
                    expected: v.expected.to_string(),
                }),
            },
            full_invariant: FullInvariantDoc {
                pass: r.full_invariant.passed(),
                bounds: InvarianceBoundsDoc {
                    pool: b.pool.iter().map(ToString::to_string).collect(),
                    set_depth: b.set_depth,
                    max_set_size: b.max_set_size,
                    goal_depth: b.goal_depth,
                },
                sets_checked: r.full_invariant.sets_checked,
                sets_skipped: r.full_invariant.sets_skipped,
                counterexample: r.full_invariant.violation.as_ref().map(|v| {
                    InvarianceCounterexample {
                        msgs: render_all(&v.msgs),
                        derived: v.derived.to_string(),
                        alpha: v.alpha.to_string(),
                        lhs: v.lhs.to_string(),
                        rhs: v.rhs.to_string(),
                    }
                }),
            },
        }
    }
}

fn pass(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "fail"
    }
}

impl fmt::Display for ReliabilityDoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wf = &self.well_formed;
        writeln!(f, "function {}", self.function)?;
        writeln!(f, "  well-formed: {} ({} cases)", pass(wf.pass), wf.cases)?;
        if let Some(c) = &wf.counterexample {
            writeln!(
                f,
                "    violates {} at a={} M1={} M2={}: got {}, expected {}",
                c.axiom,
                c.alpha,
                set(&c.m1),
                set(&c.m2),
                c.got,
                c.expected
            )?;
        }
        let fi = &self.full_invariant;
        writeln!(
            f,
            "  full-invariant: {} at pool {} set depth {} set size {} goal depth {} ({} sets, {} skipped)",
            pass(fi.pass),
            set(&fi.bounds.pool),
            fi.bounds.set_depth,
            fi.bounds.max_set_size,
            fi.bounds.goal_depth,
            fi.sets_checked,
            fi.sets_skipped
        )?;
        if let Some(c) = &fi.counterexample {
            writeln!(
                f,
                "    M={} derives m={}: F({},{{m}})={} below F({},M)={}",
                set(&c.msgs),
                c.derived,
                c.alpha,
                c.lhs,
                c.alpha,
                c.rhs
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncreasingCounterexampleDoc {
    pub role: String,
    pub sigma: String,
    pub alpha: String,
    pub lhs: String,
    pub rhs: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncreasingDoc {
    pub status: String,
    pub depth: usize,
    pub universe_atoms: Vec<String>,
    pub universe_size: usize,
    pub substitutions_checked: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<IncreasingCounterexampleDoc>,
}

impl From<&IncreasingVerdict> for IncreasingDoc {
    fn from(v: &IncreasingVerdict) -> Self {
        IncreasingDoc {
            status: format!("{:?}", v.status),
            depth: v.depth,
            universe_atoms: v.universe_atoms.clone(),
            universe_size: v.universe_size,
            substitutions_checked: v.substitutions_checked,
            counterexample: v.counterexample.as_ref().map(|c| IncreasingCounterexampleDoc {
                role: c.role.clone(),
                sigma: c.sigma.to_string(),
                alpha: c.alpha.to_string(),
                lhs: c.lhs.to_string(),
                rhs: c.rhs.to_string(),
            }),
        }
    }
}

impl fmt::Display for IncreasingDoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "increasing: {} at depth {} over {} ({} terms, {} substitutions checked)",
            self.status,
            self.depth,
            set(&self.universe_atoms),
            self.universe_size,
            self.substitutions_checked
        )?;
        if let Some(c) = &self.counterexample {
            writeln!(
                f,
                "  {} with {}: F({}, r+) = {} is not above {}",
                c.role, c.sigma, c.alpha, c.lhs, c.rhs
            )?;
        }
        Ok(())
    }
}

fn render_derivation(d: &Derivation) -> Vec<String> {
    d.steps
        .iter()
        .map(|s| {
            let rule = match (s.rule, s.function) {
                (Rule::Int, _) => "int".to_string(),
                (Rule::Eq, _) => "eq".to_string(),
                (Rule::Op, Some(f)) => format!("op {}", format!("{f:?}").to_lowercase()),
                (Rule::Op, None) => "op".to_string(),
            };
            if s.premises.is_empty() {
                format!("{rule}: {}", s.conclusion)
            } else {
                format!("{rule}: {} => {}", render_all(&s.premises).join(", "), s.conclusion)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBoundsDoc {
    pub max_sessions: usize,
    pub max_depth: usize,
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessDoc {
    pub secret: String,
    pub sessions: usize,
    pub trace: Vec<String>,
    pub derivation: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackDoc {
    pub status: String,
    pub secret: String,
    pub bounds: SearchBoundsDoc,
    pub states: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessDoc>,
}

impl From<&AttackResult> for AttackDoc {
    fn from(r: &AttackResult) -> Self {
        AttackDoc {
            status: format!("{:?}", r.status),
            secret: r.secret.to_string(),
            bounds: SearchBoundsDoc {
                max_sessions: r.bounds.max_sessions,
                max_depth: r.bounds.max_depth,
                max_steps: r.bounds.max_steps,
            },
            states: r.stats.states,
            witness: r.witness.as_ref().map(|w| WitnessDoc {
                secret: w.secret.to_string(),
                sessions: w.trace.sessions_of().len(),
                trace: w.trace.render(),
                derivation: render_derivation(&w.derivation),
            }),
        }
    }
}

impl fmt::Display for AttackDoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "attack search on {}: {} (sessions {}, depth {}, steps {}; {} states)",
            self.secret,
            self.status,
            self.bounds.max_sessions,
            self.bounds.max_depth,
            self.bounds.max_steps,
            self.states
        )?;
        if let Some(w) = &self.witness {
            writeln!(f, "  witness for {} over {} session(s):", w.secret, w.sessions)?;
            for s in &w.trace {
                writeln!(f, "    {s}")?;
            }
            writeln!(f, "  derivation:")?;
            for s in &w.derivation {
                writeln!(f, "    {s}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckBoundsDoc {
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictDoc {
    pub protocol: String,
    pub function: String,
    pub bounds: CheckBoundsDoc,
    pub reliability: ReliabilityDoc,
    pub increasing: IncreasingDoc,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attack_search: Vec<AttackDoc>,
    pub verdict: String,
}

impl VerdictDoc {
    pub fn new(
        protocol: &str,
        reliability: &ReliabilityReport,
        increasing: &IncreasingVerdict,
        attacks: &[AttackResult],
        verdict: Verdict,
    ) -> Self {
        VerdictDoc {
            protocol: protocol.to_string(),
            function: reliability.function.clone(),
            bounds: CheckBoundsDoc {
                depth: increasing.depth,
            },
            reliability: reliability.into(),
            increasing: increasing.into(),
            attack_search: attacks.iter().map(AttackDoc::from).collect(),
            verdict: verdict.as_str().to_string(),
        }
    }
}

impl fmt::Display for VerdictDoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "protocol {}", self.protocol)?;
        write!(f, "{}", self.reliability)?;
        write!(f, "{}", self.increasing)?;
        for a in &self.attack_search {
            write!(f, "{a}")?;
        }
        writeln!(f, "verdict: {} (depth {})", self.verdict, self.bounds.depth)
    }
}
