//! Verification context: agents, initial knowledge, the security lattice and
//! the typing of atoms.

use crate::term::{normalize, Atom, AtomKind, Term};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContextError {
    #[error("atom `{0}` has no declared security level")]
    UntypedAtom(String),
    #[error("level {level} is not a subset of the agent set {agents}")]
    Carrier { level: String, agents: String },
    #[error("intruder `{0}` is not a declared agent")]
    UnknownIntruder(String),
    #[error("knowledge term `{0}` is not closed and normalized")]
    BadKnowledge(String),
}

/// Bounded lattice `(L, ⊒, ⊔, ⊓, ⊥, ⊤)`. `dominates(a, b)` reads `a ⊒ b`.
pub trait Lattice {
    type Level: Clone + PartialEq + fmt::Debug;

    fn top(&self) -> Self::Level;
    fn bot(&self) -> Self::Level;
    fn contains(&self, level: &Self::Level) -> bool;
    fn dominates(&self, a: &Self::Level, b: &Self::Level) -> bool;
    fn meet(&self, a: &Self::Level, b: &Self::Level) -> Self::Level;
    fn join(&self, a: &Self::Level, b: &Self::Level) -> Self::Level;

    fn dominated_by(&self, a: &Self::Level, b: &Self::Level) -> bool {
        self.dominates(b, a)
    }
}

/// A security level of the powerset lattice: the agents allowed to read.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SecLevel(pub BTreeSet<String>);

impl SecLevel {
    pub fn of<I, S>(agents: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        SecLevel(agents.into_iter().map(Into::into).collect())
    }
}

impl fmt::Display for SecLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(a)?;
        }
        f.write_str("}")
    }
}

/// `(2^I, ⊆, ∩, ∪, I, ∅)`: fewer readers means more secure, so `⊒` is `⊆`,
/// the meet is union and the join is intersection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PowersetLattice {
    agents: BTreeSet<String>,
}

impl PowersetLattice {
    pub fn new<I, S>(agents: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        PowersetLattice {
            agents: agents.into_iter().map(Into::into).collect(),
        }
    }

    pub fn agents(&self) -> &BTreeSet<String> {
        &self.agents
    }

    pub fn check(&self, level: &SecLevel) -> Result<(), ContextError> {
        if self.contains(level) {
            Ok(())
        } else {
            Err(ContextError::Carrier {
                level: level.to_string(),
                agents: SecLevel(self.agents.clone()).to_string(),
            })
        }
    }
}

impl Lattice for PowersetLattice {
    type Level = SecLevel;

    fn top(&self) -> SecLevel {
        SecLevel::default()
    }

    fn bot(&self) -> SecLevel {
        SecLevel(self.agents.clone())
    }

    fn contains(&self, level: &SecLevel) -> bool {
        level.0.is_subset(&self.agents)
    }

    fn dominates(&self, a: &SecLevel, b: &SecLevel) -> bool {
        a.0.is_subset(&b.0)
    }

    fn meet(&self, a: &SecLevel, b: &SecLevel) -> SecLevel {
        SecLevel(a.0.union(&b.0).cloned().collect())
    }

    fn join(&self, a: &SecLevel, b: &SecLevel) -> SecLevel {
        SecLevel(a.0.intersection(&b.0).cloned().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TwoPointLevel {
    Public,
    Secret,
}

/// `{public ⊑ secret}`.
#[derive(Debug, Clone, Copy, Default)]
pub struct TwoPointLattice;

impl Lattice for TwoPointLattice {
    type Level = TwoPointLevel;

    fn top(&self) -> TwoPointLevel {
        TwoPointLevel::Secret
    }

    fn bot(&self) -> TwoPointLevel {
        TwoPointLevel::Public
    }

    fn contains(&self, _: &TwoPointLevel) -> bool {
        true
    }

    fn dominates(&self, a: &TwoPointLevel, b: &TwoPointLevel) -> bool {
        a >= b
    }

    fn meet(&self, a: &TwoPointLevel, b: &TwoPointLevel) -> TwoPointLevel {
        *a.min(b)
    }

    fn join(&self, a: &TwoPointLevel, b: &TwoPointLevel) -> TwoPointLevel {
        *a.max(b)
    }
}

/// Typing key: atom name plus the inverse flag. Session copies of a fresh
/// atom share the declared level.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeKey {
    pub name: String,
    pub inverse: bool,
}

impl From<&Atom> for TypeKey {
    fn from(a: &Atom) -> Self {
        TypeKey {
            name: a.name.clone(),
            inverse: a.inverse,
        }
    }
}

/// Partial map from atoms to security levels.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypingMap {
    levels: BTreeMap<TypeKey, SecLevel>,
}

impl TypingMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, atom: &Atom, level: SecLevel) {
        self.levels.insert(atom.into(), level);
    }

    pub fn get(&self, atom: &Atom) -> Option<&SecLevel> {
        self.levels.get(&TypeKey::from(atom))
    }

    pub fn is_typed(&self, atom: &Atom) -> bool {
        self.get(atom).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TypeKey, &SecLevel)> {
        self.levels.iter()
    }
}

/// Name of the intruder nonce added to every context.
pub const INTRUDER_NONCE: &str = "nI";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationContext {
    lattice: PowersetLattice,
    intruder: String,
    knowledge: BTreeMap<String, BTreeSet<Term>>,
    typing: TypingMap,
    intruder_nonce: Atom,
}

impl VerificationContext {
    /// `knowledge` maps agents to their initial knowledge; the intruder's entry is K(I).
    /// A distinguished intruder nonce `nI`, typed ⊥, is added to K(I) unless the
    /// caller already declared an atom of that name.
    pub fn new<I, S>(
        agents: I,
        intruder: impl Into<String>,
        knowledge: BTreeMap<String, BTreeSet<Term>>,
        mut typing: TypingMap,
    ) -> Result<Self, ContextError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let lattice = PowersetLattice::new(agents);
        let intruder = intruder.into();
        if !lattice.agents.contains(&intruder) {
            return Err(ContextError::UnknownIntruder(intruder));
        }
        for (_, level) in typing.iter() {
            lattice.check(level)?;
        }
        for t in knowledge.values().flatten() {
            if !t.is_closed() || normalize(t).as_ref() != Ok(t) {
                return Err(ContextError::BadKnowledge(t.to_string()));
            }
        }
        let mut knowledge = knowledge;
        let declared = knowledge
            .values()
            .flatten()
            .flat_map(|t| t.atoms())
            .find(|a| a.name == INTRUDER_NONCE);
        let nonce = declared.unwrap_or_else(|| Atom::new(INTRUDER_NONCE, AtomKind::Nonce));
        knowledge
            .entry(intruder.clone())
            .or_default()
            .insert(Term::Atom(nonce.clone()));
        if !typing.is_typed(&nonce) {
            typing.declare(&nonce, lattice.bot());
        }
        Ok(VerificationContext {
            lattice,
            intruder,
            knowledge,
            typing,
            intruder_nonce: nonce,
        })
    }

    pub fn lattice(&self) -> &PowersetLattice {
        &self.lattice
    }

    pub fn agents(&self) -> &BTreeSet<String> {
        self.lattice.agents()
    }

    pub fn intruder(&self) -> &str {
        &self.intruder
    }

    pub fn intruder_nonce(&self) -> &Atom {
        &self.intruder_nonce
    }

    pub fn typing(&self) -> &TypingMap {
        &self.typing
    }

    /// K(I).
    pub fn intruder_knowledge(&self) -> &BTreeSet<Term> {
        self.knowledge
            .get(&self.intruder)
            .expect("intruder knowledge is always present")
    }

    pub fn knowledge_of(&self, agent: &str) -> BTreeSet<Term> {
        self.knowledge.get(agent).cloned().unwrap_or_default()
    }

    pub fn top(&self) -> SecLevel {
        self.lattice.top()
    }

    pub fn bot(&self) -> SecLevel {
        self.lattice.bot()
    }

    /// `a ⊒ b`.
    pub fn dominates(&self, a: &SecLevel, b: &SecLevel) -> Result<bool, ContextError> {
        self.lattice.check(a)?;
        self.lattice.check(b)?;
        Ok(self.lattice.dominates(a, b))
    }

    /// `a ⊑ b`.
    pub fn dominated_by(&self, a: &SecLevel, b: &SecLevel) -> Result<bool, ContextError> {
        self.dominates(b, a)
    }

    pub fn meet(&self, a: &SecLevel, b: &SecLevel) -> Result<SecLevel, ContextError> {
        self.lattice.check(a)?;
        self.lattice.check(b)?;
        Ok(self.lattice.meet(a, b))
    }

    pub fn join(&self, a: &SecLevel, b: &SecLevel) -> Result<SecLevel, ContextError> {
        self.lattice.check(a)?;
        self.lattice.check(b)?;
        Ok(self.lattice.join(a, b))
    }

    /// ⌈α⌉. Never defaults: untyped atoms are an error.
    pub fn level_of(&self, atom: &Atom) -> Result<SecLevel, ContextError> {
        self.typing
            .get(atom)
            .cloned()
            .ok_or_else(|| ContextError::UntypedAtom(atom.to_string()))
    }

    /// `⌈M⌉ ⊒ ⌈α⌉`: some typed atom of `M` dominates `α`. Composite members
    /// take part through their atoms; untyped atoms are skipped.
    pub fn set_dominates<'a>(&self, msgs: impl IntoIterator<Item = &'a Term>, atom: &Atom) -> bool {
        let Some(target) = self.typing.get(atom) else {
            return false;
        };
        msgs.into_iter().flat_map(Term::atoms).any(|m| {
            self.typing
                .get(&m)
                .is_some_and(|l| self.lattice.dominates(l, target))
        })
    }

    /// `⌈K(I)⌉ ⊒ ⌈α⌉`: the intruder is entitled to know `atom`.
    pub fn entitled(&self, atom: &Atom) -> bool {
        self.set_dominates(self.intruder_knowledge(), atom)
    }

    /// The involutive key-inverse map on key atoms.
    pub fn key_inverse(&self, atom: &Atom) -> Atom {
        atom.inverse_key()
    }
}
