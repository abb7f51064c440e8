//! Protocol narrations, role extraction and generalized roles.

mod parse;

use crate::context::{ContextError, SecLevel, TypeKey, TypingMap, VerificationContext};
use crate::term::{inverse_key, Atom, AtomKind, Session, Term, Var};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: undeclared identifier `{name}`")]
    UndeclaredIdentifier { name: String, line: usize, col: usize },
    #[error("line {line}: duplicate step {index}")]
    DuplicateStep { index: u32, line: usize },
    #[error("line {line}: {msg}")]
    Semantic { line: usize, msg: String },
    #[error("invalid context: {0}")]
    Context(#[from] ContextError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NarrationStep {
    pub index: u32,
    pub sender: String,
    pub receiver: String,
    pub payload: Term,
}

/// A parsed narration together with its verification context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Protocol {
    pub name: String,
    /// Honest agents in declaration order.
    pub agents: Vec<String>,
    pub intruder: String,
    /// Every declared atom by name, principals included.
    pub atoms: BTreeMap<String, Atom>,
    /// Fresh atom name to owning agent.
    pub fresh: BTreeMap<String, String>,
    pub knows: BTreeMap<String, Vec<Term>>,
    pub levels: BTreeMap<TypeKey, SecLevel>,
    pub steps: Vec<NarrationStep>,
    pub context: VerificationContext,
}

pub fn parse_protocol(text: &str) -> Result<Protocol, ParseError> {
    parse::parse(text)
}

impl Protocol {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        name: String,
        agents: Vec<String>,
        intruder: String,
        atoms: BTreeMap<String, Atom>,
        fresh: BTreeMap<String, String>,
        knows: BTreeMap<String, Vec<Term>>,
        levels: BTreeMap<TypeKey, SecLevel>,
        steps: Vec<NarrationStep>,
    ) -> Result<Self, ParseError> {
        let mut typing = TypingMap::new();
        for (key, level) in &levels {
            let base = &atoms[&key.name];
            let atom = if key.inverse { base.inverse_key() } else { base.clone() };
            typing.declare(&atom, level.clone());
        }
        let knowledge = knows
            .iter()
            .map(|(a, ts)| (a.clone(), ts.iter().cloned().collect::<BTreeSet<_>>()))
            .collect();
        let context = VerificationContext::new(
            agents.iter().cloned().chain([intruder.clone()]),
            intruder.clone(),
            knowledge,
            typing,
        )?;
        Ok(Protocol {
            name,
            agents,
            intruder,
            atoms,
            fresh,
            knows,
            levels,
            steps,
            context,
        })
    }

    /// Looks up a declared atom by name; `name^-1` selects the private half of a key pair.
    pub fn atom(&self, name: &str) -> Option<Atom> {
        if let Some(base) = name.strip_suffix("^-1") {
            let a = self.atoms.get(base)?;
            return (a.kind == AtomKind::AsymmetricKey).then(|| a.inverse_key());
        }
        self.atoms.get(name).cloned()
    }

    /// Parses a term against this protocol's declarations, resolving the given
    /// variable names first.
    pub fn parse_term(&self, text: &str, vars: &[Var]) -> Result<Term, ParseError> {
        let scope = parse::Scope {
            atoms: &self.atoms,
            vars: vars.iter().map(|v| (v.name.clone(), v.clone())).collect(),
        };
        parse::parse_term(text, &scope)
    }

    /// What an honest agent starts with: its declared knowledge, the atoms it
    /// generates, every principal name and every public key.
    pub fn initial_knowledge(&self, agent: &str) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        for t in self.knows.get(agent).into_iter().flatten() {
            collect_pair_atoms(t, &mut out);
        }
        for (name, owner) in &self.fresh {
            if owner == agent {
                out.insert(self.atoms[name].in_session(Session::Symbolic));
            }
        }
        for a in self.atoms.values() {
            if a.kind == AtomKind::Principal || (a.kind == AtomKind::AsymmetricKey && !a.inverse) {
                out.insert(a.clone());
            }
        }
        out
    }

    /// Atoms occurring anywhere in the narration payloads.
    pub fn payload_atoms(&self) -> BTreeSet<Atom> {
        crate::term::atoms_of(self.steps.iter().map(|s| &s.payload))
    }
}

fn collect_pair_atoms(t: &Term, out: &mut BTreeSet<Atom>) {
    match t {
        Term::Atom(a) => {
            out.insert(a.clone());
        }
        Term::Pair(a, b) => {
            collect_pair_atoms(a, out);
            collect_pair_atoms(b, out);
        }
        _ => {}
    }
}

fn join_terms(ts: &[Term]) -> String {
    ts.iter().map(Term::to_string).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "protocol {}", self.name)?;
        writeln!(f, "agents {}", self.agents.join(", "))?;
        writeln!(f, "intruder {}", self.intruder)?;
        for (kw, kind) in [
            ("nonce", AtomKind::Nonce),
            ("symkey", AtomKind::SymmetricKey),
            ("pubkey", AtomKind::AsymmetricKey),
            ("const", AtomKind::Constant),
        ] {
            let names: Vec<&str> = self
                .atoms
                .values()
                .filter(|a| a.kind == kind)
                .map(|a| a.name.as_str())
                .collect();
            if !names.is_empty() {
                writeln!(f, "{kw} {}", names.join(", "))?;
            }
        }
        for (a, owner) in &self.fresh {
            writeln!(f, "fresh {a} @ {owner}")?;
        }
        for (who, ts) in &self.knows {
            writeln!(f, "knows {who} = {}", join_terms(ts))?;
        }
        for (key, level) in &self.levels {
            let inv = if key.inverse { "^-1" } else { "" };
            writeln!(f, "level {}{inv} = {level}", key.name)?;
        }
        for s in &self.steps {
            writeln!(f, "{}. {} -> {} : {}", s.index, s.sender, s.receiver, s.payload)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Send,
    Receive,
}

/// One communication step of a role, seen from its owner. The other end is
/// always the intruder impersonating `counterparty`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleStep {
    pub index: u32,
    pub direction: Direction,
    pub owner: String,
    pub counterparty: String,
    pub payload: Term,
}

impl RoleStep {
    pub fn render(&self, session: &str) -> String {
        match self.direction {
            Direction::Send => format!(
                "<{session}.{}, {} -> I({}) : {}>",
                self.index, self.owner, self.counterparty, self.payload
            ),
            Direction::Receive => format!(
                "<{session}.{}, I({}) -> {} : {}>",
                self.index, self.counterparty, self.owner, self.payload
            ),
        }
    }
}

/// The steps one agent takes part in, fresh atoms tagged with the symbolic session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentRole {
    pub owner: String,
    pub steps: Vec<RoleStep>,
}

pub fn extract_roles(p: &Protocol) -> Vec<AgentRole> {
    let tag = |t: &Term| t.map_atoms(&|a| a.in_session(Session::Symbolic));
    p.agents
        .iter()
        .filter_map(|agent| {
            let steps: Vec<RoleStep> = p
                .steps
                .iter()
                .filter_map(|s| {
                    let (direction, counterparty) = if &s.sender == agent {
                        (Direction::Send, &s.receiver)
                    } else if &s.receiver == agent {
                        (Direction::Receive, &s.sender)
                    } else {
                        return None;
                    };
                    Some(RoleStep {
                        index: s.index,
                        direction,
                        owner: agent.clone(),
                        counterparty: counterparty.clone(),
                        payload: tag(&s.payload),
                    })
                })
                .collect();
            (!steps.is_empty()).then(|| AgentRole {
                owner: agent.clone(),
                steps,
            })
        })
        .collect()
}

/// Hands out variable names X, Y, Z, U, V, W, X1, Y1, ...
#[derive(Debug, Default)]
pub struct VarNames {
    next: usize,
}

impl VarNames {
    pub fn fresh(&mut self) -> String {
        const BASE: [&str; 6] = ["X", "Y", "Z", "U", "V", "W"];
        let n = self.next;
        self.next += 1;
        let round = n / BASE.len();
        if round == 0 {
            BASE[n].to_string()
        } else {
            format!("{}{round}", BASE[n % BASE.len()])
        }
    }
}

/// A prefix of an agent's role with unverifiable received content abstracted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenRole {
    pub id: String,
    pub owner: String,
    pub steps: Vec<RoleStep>,
}

impl GenRole {
    /// R⁺: every sent payload.
    pub fn sent_of(&self) -> BTreeSet<Term> {
        self.payloads(Direction::Send, self.steps.len())
    }

    /// R⁻: every received payload.
    pub fn received_of(&self) -> BTreeSet<Term> {
        self.payloads(Direction::Receive, self.steps.len())
    }

    /// r⁺: the payload of the final step when it is a send, empty otherwise.
    pub fn terminal_sent(&self) -> BTreeSet<Term> {
        match self.steps.last() {
            Some(s) if s.direction == Direction::Send => BTreeSet::from([s.payload.clone()]),
            _ => BTreeSet::new(),
        }
    }

    /// R⁻ for the prefix R in `R.r`: receives before the final step.
    pub fn prior_received(&self) -> BTreeSet<Term> {
        self.payloads(Direction::Receive, self.steps.len().saturating_sub(1))
    }

    fn payloads(&self, dir: Direction, upto: usize) -> BTreeSet<Term> {
        self.steps[..upto]
            .iter()
            .filter(|s| s.direction == dir)
            .map(|s| s.payload.clone())
            .collect()
    }

    /// Variables in order of first occurrence.
    pub fn vars(&self) -> Vec<Var> {
        let mut out: Vec<Var> = Vec::new();
        for s in &self.steps {
            for t in s.payload.subterms() {
                if let Term::Var(v) = t {
                    if !out.contains(v) {
                        out.push(v.clone());
                    }
                }
            }
        }
        out
    }

    pub fn render_steps(&self) -> Vec<String> {
        self.steps.iter().map(|s| s.render("i")).collect()
    }
}

impl fmt::Display for GenRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.id, self.render_steps().join(". "))
    }
}

/// Generalized roles of one agent. Variable names are drawn from `names`, so
/// passing one allocator across agents keeps names distinct protocol-wide.
pub fn generalize_with(p: &Protocol, role: &AgentRole, names: &mut VarNames) -> Vec<GenRole> {
    let known = p.initial_knowledge(&role.owner);
    let mut abs = Abstraction {
        known: &known,
        map: BTreeMap::new(),
        names,
    };
    let steps: Vec<RoleStep> = role
        .steps
        .iter()
        .map(|s| {
            let payload = match s.direction {
                Direction::Receive => abs.receive(&s.payload),
                Direction::Send => abs.send(&s.payload),
            };
            RoleStep {
                payload,
                ..s.clone()
            }
        })
        .collect();

    // Send-terminated prefixes, plus the whole role when it ends on a receive
    // after at least one send.
    let mut ends: Vec<usize> = steps
        .iter()
        .enumerate()
        .filter(|(_, s)| s.direction == Direction::Send)
        .map(|(i, _)| i + 1)
        .collect();
    if !ends.is_empty() && ends.last() != Some(&steps.len()) {
        ends.push(steps.len());
    }
    ends.into_iter()
        .enumerate()
        .map(|(n, end)| {
            let id = format!("{}_G^{}", role.owner, n + 1);
            let scoped = steps[..end]
                .iter()
                .map(|s| RoleStep {
                    payload: s.payload.map_leaves(&|t| match t {
                        Term::Var(v) => Some(Term::Var(Var::new(v.name.clone(), id.clone()))),
                        _ => None,
                    }),
                    ..s.clone()
                })
                .collect();
            GenRole {
                id,
                owner: role.owner.clone(),
                steps: scoped,
            }
        })
        .collect()
}

pub fn generalize(p: &Protocol, role: &AgentRole) -> Vec<GenRole> {
    generalize_with(p, role, &mut VarNames::default())
}

struct Abstraction<'a> {
    known: &'a BTreeSet<Atom>,
    map: BTreeMap<Term, Var>,
    names: &'a mut VarNames,
}

impl Abstraction<'_> {
    fn var_for(&mut self, t: &Term) -> Term {
        if let Some(v) = self.map.get(t) {
            return Term::Var(v.clone());
        }
        let v = Var::new(self.names.fresh(), "");
        self.map.insert(t.clone(), v.clone());
        Term::Var(v)
    }

    fn holds(&self, t: &Term) -> bool {
        t.as_atom().is_some_and(|a| self.known.contains(a))
    }

    fn receive(&mut self, t: &Term) -> Term {
        if let Some(v) = self.map.get(t) {
            return Term::Var(v.clone());
        }
        match t {
            Term::Atom(a) if self.known.contains(a) => t.clone(),
            Term::Pair(a, b) => Term::pair(self.receive(a), self.receive(b)),
            Term::Enc(body, key) if self.holds(&inverse_key(key)) => {
                Term::enc(self.receive(body), (**key).clone())
            }
            _ => self.var_for(t),
        }
    }

    fn send(&self, t: &Term) -> Term {
        t.map_leaves(&|s| self.map.get(s).map(|v| Term::Var(v.clone())))
    }
}

/// R_G(p): every generalized role of the protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleSpec {
    pub protocol: String,
    pub roles: Vec<GenRole>,
}

pub fn role_spec(p: &Protocol) -> RoleSpec {
    let mut names = VarNames::default();
    let roles = extract_roles(p)
        .iter()
        .flat_map(|r| generalize_with(p, r, &mut names))
        .collect();
    RoleSpec {
        protocol: p.name.clone(),
        roles,
    }
}

impl RoleSpec {
    pub fn get(&self, id: &str) -> Option<&GenRole> {
        self.roles.iter().find(|g| g.id == id)
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    /// The longest generalized role of each agent; every other one is a prefix of it.
    pub fn maximal(&self) -> Vec<&GenRole> {
        let mut out: Vec<&GenRole> = Vec::new();
        for g in &self.roles {
            match out.iter_mut().find(|m| m.owner == g.owner) {
                Some(m) if m.steps.len() < g.steps.len() => *m = g,
                Some(_) => {}
                None => out.push(g),
            }
        }
        out
    }

    /// Atoms occurring in any payload.
    pub fn atoms(&self) -> BTreeSet<Atom> {
        crate::term::atoms_of(self.roles.iter().flat_map(|g| g.steps.iter().map(|s| &s.payload)))
    }

    /// Atoms occurring in a payload outside every key position.
    pub fn content_atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        for g in &self.roles {
            for s in &g.steps {
                collect_content_atoms(&s.payload, &mut out);
            }
        }
        out
    }
}

fn collect_content_atoms(t: &Term, out: &mut BTreeSet<Atom>) {
    match t {
        Term::Atom(a) => {
            out.insert(a.clone());
        }
        Term::Pair(a, b) => {
            collect_content_atoms(a, out);
            collect_content_atoms(b, out);
        }
        Term::Enc(body, _) => collect_content_atoms(body, out),
        _ => {}
    }
}

impl fmt::Display for RoleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.roles {
            writeln!(f, "{g}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
