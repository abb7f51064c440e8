use super::CheckError;
use crate::context::{SecLevel, VerificationContext};
use crate::deduce::{saturate, Derivation, KnowledgeSet};
use crate::funcs::InterpFn;
use crate::roles::{Direction, GenRole, RoleSpec, RoleStep};
use crate::term::{match_with, Atom, Session, Substitution, Term, Var};
use crate::traces::{instantiate, StepKind, Trace, TraceStep};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBounds {
    pub max_sessions: usize,
    /// Depth of the terms the intruder substitutes for pattern variables.
    pub max_depth: usize,
    /// Longest trace explored.
    pub max_steps: usize,
}

impl Default for SearchBounds {
    fn default() -> Self {
        SearchBounds {
            max_sessions: 2,
            max_depth: 3,
            max_steps: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttackStatus {
    NoAttackAtBound,
    Disclosure,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackWitness {
    pub trace: Trace,
    /// The disclosed session instance of the secret.
    pub secret: Atom,
    pub derivation: Derivation,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub states: usize,
    pub terms_observed: usize,
}

/// A derived message whose function value fell below an atom's level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelViolation {
    pub trace: Trace,
    pub message: Term,
    pub alpha: Atom,
    pub level: SecLevel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackResult {
    pub status: AttackStatus,
    pub secret: Atom,
    pub bounds: SearchBounds,
    pub witness: Option<AttackWitness>,
    pub stats: SearchStats,
    pub level_violations: Vec<LevelViolation>,
}

/// Every session copy of `secret` among `sessions`, or the atom itself when it is long-term.
pub fn secret_instances(secret: &Atom, sessions: impl IntoIterator<Item = u32>) -> Vec<Atom> {
    if secret.fresh {
        sessions
            .into_iter()
            .map(|j| secret.in_session(Session::Id(j)))
            .collect()
    } else {
        vec![secret.base()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct Sess {
    pub role: usize,
    pub id: u32,
    pub pos: usize,
    pub sigma: Substitution,
}

#[derive(Debug, Clone)]
pub(crate) struct State {
    pub sessions: Vec<Sess>,
    pub trace: Trace,
    pub def: Vec<Term>,
}

impl State {
    fn key(&self) -> (Vec<Sess>, BTreeSet<Term>) {
        (self.sessions.clone(), self.def.iter().cloned().collect())
    }
}

/// Runs sessions of the maximal generalized roles against the intruder.
pub(crate) struct Explorer<'a> {
    pub roles: Vec<&'a GenRole>,
    pub max_depth: usize,
}

impl<'a> Explorer<'a> {
    pub fn new(spec: &'a RoleSpec, max_depth: usize) -> Self {
        Explorer {
            roles: spec.maximal(),
            max_depth,
        }
    }

    pub fn start(&self, roles: &[usize]) -> State {
        let sessions = roles
            .iter()
            .enumerate()
            .map(|(i, &role)| Sess {
                role,
                id: i as u32 + 1,
                pos: 0,
                sigma: Substitution::new(),
            })
            .collect();
        State {
            sessions,
            trace: Trace::new(),
            def: Vec::new(),
        }
    }

    pub fn next_step(&self, s: &Sess) -> Option<&'a RoleStep> {
        self.roles[s.role].steps.get(s.pos)
    }

    pub fn can_send(&self, st: &State, i: usize) -> bool {
        self.next_step(&st.sessions[i])
            .is_some_and(|r| r.direction == Direction::Send)
    }

    pub fn can_receive(&self, st: &State, i: usize) -> bool {
        self.next_step(&st.sessions[i])
            .is_some_and(|r| r.direction == Direction::Receive)
    }

    pub fn send(&self, st: &mut State, i: usize) {
        let s = &mut st.sessions[i];
        let r = self.roles[s.role].steps[s.pos].clone();
        let payload = s.sigma.apply(&instantiate(&r.payload, s.id));
        st.trace.push(TraceStep {
            session: s.id,
            index: r.index,
            kind: StepKind::HonestSend {
                agent: r.owner,
                to: r.counterparty,
            },
            payload: payload.clone(),
        });
        st.def.push(payload);
        s.pos += 1;
    }

    /// Performs every pending honest send.
    pub fn flush(&self, st: &mut State) {
        for i in 0..st.sessions.len() {
            while self.can_send(st, i) {
                self.send(st, i);
            }
        }
    }

    pub fn receive(&self, st: &mut State, i: usize, msg: Term, sigma: Substitution) {
        let s = &mut st.sessions[i];
        let r = &self.roles[s.role].steps[s.pos];
        st.trace.push(TraceStep {
            session: s.id,
            index: r.index,
            kind: StepKind::IntruderSend {
                from: r.counterparty.clone(),
                agent: r.owner.clone(),
            },
            payload: msg,
        });
        s.sigma = sigma;
        s.pos += 1;
    }

    /// Messages the intruder can send to session `i`, with the extended substitution.
    pub fn receive_options(
        &self,
        st: &State,
        closure: &KnowledgeSet,
        i: usize,
    ) -> Vec<(Term, Substitution)> {
        let s = &st.sessions[i];
        let Some(r) = self.next_step(s) else {
            return Vec::new();
        };
        let pattern = s.sigma.apply(&instantiate(&r.payload, s.id));
        let mut out: BTreeMap<Term, Substitution> = BTreeMap::new();
        for t in closure.terms() {
            if let Some(sigma) = match_with(&pattern, t, &s.sigma) {
                out.entry(t.clone()).or_insert(sigma);
            }
        }
        let vars: Vec<Var> = pattern.vars().into_iter().collect();
        let pool: Vec<&Term> = closure
            .terms()
            .iter()
            .filter(|t| t.depth() <= self.max_depth)
            .collect();
        let total = pool.len().checked_pow(vars.len() as u32).unwrap_or(usize::MAX);
        for mut n in 0..total {
            let mut sigma = s.sigma.clone();
            for v in &vars {
                sigma
                    .bind(v.clone(), pool[n % pool.len()])
                    .expect("closure terms are closed");
                n /= pool.len();
            }
            let m = sigma.apply(&pattern);
            if !out.contains_key(&m) && closure.can_compose(&m) {
                out.insert(m, sigma);
            }
        }
        out.into_iter().collect()
    }

    fn successors(&self, ctx: &VerificationContext, st: &State, max_steps: usize) -> Vec<State> {
        if st.trace.size() >= max_steps {
            return Vec::new();
        }
        let closure = saturate(ctx, &st.def);
        let mut out = Vec::new();
        for i in 0..st.sessions.len() {
            if !self.can_receive(st, i) {
                continue;
            }
            for (msg, sigma) in self.receive_options(st, &closure, i) {
                let mut next = st.clone();
                self.receive(&mut next, i, msg, sigma);
                self.flush(&mut next);
                if next.trace.size() <= max_steps {
                    out.push(next);
                }
            }
        }
        out
    }
}

/// Multisets of role indices of size 1 to `k`, smallest first.
fn role_multisets(roles: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::new();
        for m in &layer {
            let start = m.last().copied().unwrap_or(0);
            for r in start..roles {
                let mut n = m.clone();
                n.push(r);
                next.push(n);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

pub fn search_disclosure(
    ctx: &VerificationContext,
    spec: &RoleSpec,
    secret: &Atom,
    bounds: SearchBounds,
) -> Result<AttackResult, CheckError> {
    search_disclosure_observed(ctx, spec, secret, bounds, None::<&crate::funcs::Dek>)
}

/// Breadth-first search for a valid trace after which the intruder derives a
/// session instance of `secret`. Honest sends happen as soon as they are
/// enabled. When `observer` is given, every message in the intruder's
/// closure along the way is checked against its atoms' declared levels.
pub fn search_disclosure_observed<F: InterpFn + ?Sized>(
    ctx: &VerificationContext,
    spec: &RoleSpec,
    secret: &Atom,
    bounds: SearchBounds,
    observer: Option<&F>,
) -> Result<AttackResult, CheckError> {
    if bounds.max_sessions == 0 || bounds.max_depth == 0 || bounds.max_steps == 0 {
        return Err(CheckError::BadBound);
    }
    let secret = secret.base();
    if !spec.atoms().iter().any(|a| a.base() == secret) || !ctx.typing().is_typed(&secret) {
        return Err(CheckError::UnknownSecret(secret.to_string()));
    }
    if ctx.entitled(&secret) {
        return Err(CheckError::VacuousQuery(secret.to_string()));
    }
    let ex = Explorer::new(spec, bounds.max_depth);
    let mut visited = HashSet::new();
    let mut frontier = Vec::new();
    for roles in role_multisets(ex.roles.len(), bounds.max_sessions) {
        let mut st = ex.start(&roles);
        ex.flush(&mut st);
        if visited.insert(st.key()) {
            frontier.push(st);
        }
    }
    let mut stats = SearchStats::default();
    let mut observed: HashSet<Term> = HashSet::new();
    let mut violations = Vec::new();
    let result = |witness: Option<AttackWitness>, stats, violations| AttackResult {
        status: if witness.is_some() {
            AttackStatus::Disclosure
        } else {
            AttackStatus::NoAttackAtBound
        },
        secret: secret.clone(),
        bounds,
        witness,
        stats,
        level_violations: violations,
    };
    while !frontier.is_empty() {
        for st in &frontier {
            stats.states += 1;
            let closure = saturate(ctx, &st.def);
            if let Some(f) = observer {
                for m in closure.terms() {
                    if !observed.insert(m.clone()) {
                        continue;
                    }
                    stats.terms_observed += 1;
                    for alpha in m.atoms() {
                        if ctx.entitled(&alpha) {
                            continue;
                        }
                        let declared = ctx.level_of(&alpha)?;
                        let level = f.eval(ctx, &alpha, std::slice::from_ref(m))?;
                        if !ctx.dominates(&level, &declared)? {
                            violations.push(LevelViolation {
                                trace: st.trace.clone(),
                                message: m.clone(),
                                alpha,
                                level,
                            });
                        }
                    }
                }
            }
            let ids = st.sessions.iter().map(|s| s.id);
            for inst in secret_instances(&secret, ids) {
                if let Some(derivation) = closure.derive(&Term::Atom(inst.clone())) {
                    let witness = AttackWitness {
                        trace: st.trace.clone(),
                        secret: inst,
                        derivation,
                    };
                    return Ok(result(Some(witness), stats, violations));
                }
            }
        }
        let next: Vec<Vec<State>> = frontier
            .par_iter()
            .map(|st| ex.successors(ctx, st, bounds.max_steps))
            .collect();
        frontier = next
            .into_iter()
            .flatten()
            .filter(|st| visited.insert(st.key()))
            .collect();
    }
    Ok(result(None, stats, violations))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multisets() {
        let m = role_multisets(3, 2);
        assert_eq!(m.len(), 3 + 6);
        assert_eq!(m[0], [0]);
        assert_eq!(m[3], [0, 0]);
    }
}
