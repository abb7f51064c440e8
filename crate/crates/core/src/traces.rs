//! Traces: interleavings of role sessions, their projections and validity.
//!
//! A session is one instance of a generalized role. Payloads sent by honest
//! agents go to the intruder (`Def`); payloads the intruder sends to honest
//! agents are `Use`.

use crate::context::VerificationContext;
use crate::deduce::saturate;
use crate::roles::{Direction, GenRole, RoleSpec};
use crate::term::{match_with, Session, Substitution, Term};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepKind {
    /// `A -> I(B)`
    HonestSend { agent: String, to: String },
    /// `I(A) -> B`
    IntruderSend { from: String, agent: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraceStep {
    pub session: u32,
    pub index: u32,
    pub kind: StepKind,
    pub payload: Term,
}

impl TraceStep {
    pub fn is_honest_send(&self) -> bool {
        matches!(self.kind, StepKind::HonestSend { .. })
    }

    pub fn is_intruder_send(&self) -> bool {
        matches!(self.kind, StepKind::IntruderSend { .. })
    }

    /// The honest agent taking part in the step.
    pub fn agent(&self) -> &str {
        match &self.kind {
            StepKind::HonestSend { agent, .. } | StepKind::IntruderSend { agent, .. } => agent,
        }
    }
}

impl fmt::Display for TraceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{} ", self.session, self.index)?;
        match &self.kind {
            StepKind::HonestSend { agent, to } => write!(f, "{agent} -> I({to})")?,
            StepKind::IntruderSend { from, agent } => write!(f, "I({from}) -> {agent}")?,
        }
        write!(f, " : {}", self.payload)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_steps(steps: Vec<TraceStep>) -> Self {
        Trace { steps }
    }

    pub fn push(&mut self, step: TraceStep) {
        self.steps.push(step);
    }

    pub fn concat(&self, other: &Trace) -> Trace {
        Trace {
            steps: self.steps.iter().chain(&other.steps).cloned().collect(),
        }
    }

    /// |ρ|
    pub fn size(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The first `n` steps.
    pub fn prefix(&self, n: usize) -> Trace {
        Trace {
            steps: self.steps[..n.min(self.steps.len())].to_vec(),
        }
    }

    /// Whether `self` is a prefix of `of`.
    pub fn is_prefix(&self, of: &Trace) -> bool {
        of.steps.starts_with(&self.steps)
    }

    /// S^ρ
    pub fn sessions_of(&self) -> BTreeSet<u32> {
        self.steps.iter().map(|s| s.session).collect()
    }

    /// ρ^id
    pub fn project(&self, id: u32) -> Trace {
        Trace {
            steps: self.steps.iter().filter(|s| s.session == id).cloned().collect(),
        }
    }

    /// Payloads sent by honest agents: what the intruder has learned.
    pub fn def_of(&self) -> BTreeSet<Term> {
        self.payloads(TraceStep::is_honest_send)
    }

    /// Payloads the intruder has sent to honest agents.
    pub fn use_of(&self) -> BTreeSet<Term> {
        self.payloads(TraceStep::is_intruder_send)
    }

    fn payloads(&self, keep: impl Fn(&TraceStep) -> bool) -> BTreeSet<Term> {
        self.steps
            .iter()
            .filter(|s| keep(s))
            .map(|s| s.payload.clone())
            .collect()
    }

    /// Labels are unique and indices increase within each session.
    pub fn labels_consistent(&self) -> bool {
        let mut last: BTreeMap<u32, u32> = BTreeMap::new();
        self.steps.iter().all(|s| {
            let ok = last.get(&s.session).is_none_or(|&prev| s.index > prev);
            last.insert(s.session, s.index);
            ok
        })
    }

    pub fn render(&self) -> Vec<String> {
        self.steps.iter().map(TraceStep::to_string).collect()
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Replaces the symbolic session exponent with session `j`.
pub fn instantiate(t: &Term, j: u32) -> Term {
    t.map_atoms(&|a| match a.session {
        Some(Session::Symbolic) => a.in_session(Session::Id(j)),
        _ => a.clone(),
    })
}

/// Every intruder-sent payload is derivable from what honest agents sent before it.
pub fn is_well_defined(ctx: &VerificationContext, rho: &Trace) -> bool {
    let mut def: Vec<Term> = Vec::new();
    for s in &rho.steps {
        match s.kind {
            StepKind::HonestSend { .. } => def.push(s.payload.clone()),
            StepKind::IntruderSend { .. } => {
                if !saturate(ctx, &def).can_compose(&s.payload) {
                    return false;
                }
            }
        }
    }
    true
}

/// Matches a single-session trace against a generalized role instantiated for
/// session `j`. The trace may stop early, including right after a receive.
pub fn match_session(g: &GenRole, j: u32, session: &Trace) -> Option<Substitution> {
    if session.size() > g.steps.len() {
        return None;
    }
    let mut sigma = Substitution::new();
    for (rs, ts) in g.steps.iter().zip(&session.steps) {
        let shape_ok = match (&rs.direction, &ts.kind) {
            (Direction::Send, StepKind::HonestSend { agent, to }) => {
                agent == &rs.owner && to == &rs.counterparty
            }
            (Direction::Receive, StepKind::IntruderSend { from, agent }) => {
                agent == &rs.owner && from == &rs.counterparty
            }
            _ => false,
        };
        if !shape_ok || rs.index != ts.index || ts.session != j {
            return None;
        }
        sigma = match_with(&instantiate(&rs.payload, j), &ts.payload, &sigma)?;
    }
    Some(sigma)
}

/// For every session, a generalized role and substitution generating it.
pub fn well_formed_witness(
    spec: &RoleSpec,
    rho: &Trace,
) -> Option<BTreeMap<u32, (String, Substitution)>> {
    if !rho.labels_consistent() {
        return None;
    }
    let mut out = BTreeMap::new();
    for j in rho.sessions_of() {
        let proj = rho.project(j);
        let found = spec
            .roles
            .iter()
            .find_map(|g| match_session(g, j, &proj).map(|s| (g.id.clone(), s)))?;
        out.insert(j, found);
    }
    Some(out)
}

pub fn is_well_formed(spec: &RoleSpec, rho: &Trace) -> bool {
    well_formed_witness(spec, rho).is_some()
}

pub fn is_valid(ctx: &VerificationContext, spec: &RoleSpec, rho: &Trace) -> bool {
    is_well_defined(ctx, rho) && is_well_formed(spec, rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roles::{parse_protocol, role_spec, Protocol};

    fn woo_lam() -> Protocol {
        parse_protocol(include_str!("../protocols/woo_lam.proto")).unwrap()
    }

    fn step(session: u32, index: u32, honest: bool, a: &str, b: &str, payload: Term) -> TraceStep {
        let kind = if honest {
            StepKind::HonestSend {
                agent: a.into(),
                to: b.into(),
            }
        } else {
            StepKind::IntruderSend {
                from: a.into(),
                agent: b.into(),
            }
        };
        TraceStep {
            session,
            index,
            kind,
            payload,
        }
    }

    fn at(p: &Protocol, name: &str, j: Option<u32>) -> Term {
        let a = p.atom(name).unwrap();
        Term::Atom(match j {
            Some(j) => a.in_session(Session::Id(j)),
            None => a,
        })
    }

    /// Honest run: A in session 1, B in session 2, S in session 3.
    fn honest_run(p: &Protocol) -> Trace {
        let a = at(p, "A", None);
        let nb = at(p, "Nb", Some(2));
        let kab = at(p, "kab", Some(1));
        let kas = at(p, "kas", None);
        let kbs = at(p, "kbs", None);
        let m3 = Term::enc(Term::pair(nb.clone(), kab.clone()), kas);
        let m4 = Term::enc(Term::pair(a.clone(), m3.clone()), kbs.clone());
        let m5 = Term::enc(Term::pair(nb.clone(), kab), kbs);
        Trace::from_steps(vec![
            step(1, 1, true, "A", "B", a.clone()),
            step(2, 1, false, "A", "B", a),
            step(2, 2, true, "B", "A", nb.clone()),
            step(1, 2, false, "B", "A", nb),
            step(1, 3, true, "A", "B", m3.clone()),
            step(2, 3, false, "A", "B", m3),
            step(2, 4, true, "B", "S", m4.clone()),
            step(3, 4, false, "B", "S", m4),
            step(3, 5, true, "S", "B", m5.clone()),
            step(2, 5, false, "S", "B", m5),
        ])
    }

    #[test]
    fn empty_trace() {
        let p = woo_lam();
        let spec = role_spec(&p);
        let e = Trace::new();
        assert!(e.sessions_of().is_empty());
        assert_eq!(e.size(), 0);
        assert!(e.def_of().is_empty() && e.use_of().is_empty());
        assert!(e.project(1).is_empty());
        assert!(is_valid(&p.context, &spec, &e));
        assert!(e.is_prefix(&e));
    }

    #[test]
    fn def_and_use() {
        let p = woo_lam();
        let a = at(&p, "A", None);
        let t = Trace::from_steps(vec![step(1, 1, true, "A", "B", a.clone())]);
        assert_eq!(t.def_of(), BTreeSet::from([a.clone()]));
        assert!(t.use_of().is_empty());
        assert_eq!(t.sessions_of(), BTreeSet::from([1]));
        let u = Trace::from_steps(vec![step(1, 1, false, "A", "B", a.clone())]);
        assert_eq!(u.use_of(), BTreeSet::from([a]));
        assert!(u.def_of().is_empty());
    }

    #[test]
    fn honest_run_is_valid() {
        let p = woo_lam();
        let spec = role_spec(&p);
        let rho = honest_run(&p);
        assert_eq!(rho.sessions_of(), BTreeSet::from([1, 2, 3]));
        let w = well_formed_witness(&spec, &rho).unwrap();
        let (id, sigma) = &w[&2];
        assert_eq!(id, "B_G^3");
        let y = sigma
            .iter()
            .find(|(v, _)| v.name == "Y")
            .map(|(_, t)| t.to_string())
            .unwrap();
        assert_eq!(y, "{Nb^2.kab^1}kas");
        assert_eq!(w[&1].0, "A_G^2");
        assert!(is_valid(&p.context, &spec, &rho));
        for n in 0..=rho.size() {
            assert!(is_valid(&p.context, &spec, &rho.prefix(n)));
        }
    }

    #[test]
    fn projections_recover_sessions() {
        let p = woo_lam();
        let rho = honest_run(&p);
        let total: usize = rho.sessions_of().iter().map(|&j| rho.project(j).size()).sum();
        assert_eq!(total, rho.size());
        assert!(rho.project(7).is_empty());
        assert!(rho.project(1).steps.iter().all(|s| s.agent() == "A"));
    }

    #[test]
    fn forged_message_is_not_well_defined() {
        let p = woo_lam();
        let spec = role_spec(&p);
        let m3 = Term::enc(
            Term::pair(Term::Atom(p.context.intruder_nonce().clone()), at(&p, "kab", Some(5))),
            at(&p, "kas", None),
        );
        let rho = Trace::from_steps(vec![
            step(1, 1, false, "A", "B", at(&p, "A", None)),
            step(1, 2, true, "B", "A", at(&p, "Nb", Some(1))),
            step(1, 3, false, "A", "B", m3),
        ]);
        assert!(is_well_formed(&spec, &rho));
        assert!(!is_well_defined(&p.context, &rho));
        assert!(!is_valid(&p.context, &spec, &rho));
    }

    #[test]
    fn out_of_order_session_is_not_well_formed() {
        let p = woo_lam();
        let spec = role_spec(&p);
        let rho = Trace::from_steps(vec![step(1, 2, true, "B", "A", at(&p, "Nb", Some(1)))]);
        assert!(!is_well_formed(&spec, &rho));
        assert!(is_well_defined(&p.context, &rho));
    }

    #[test]
    fn rendering() {
        let p = woo_lam();
        let rho = honest_run(&p);
        assert_eq!(rho.steps[0].to_string(), "1.1 A -> I(B) : A");
        assert_eq!(rho.steps[3].to_string(), "1.2 I(B) -> A : Nb^2");
    }
}
