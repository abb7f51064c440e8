//! F-increasing check, secrecy verdict, bounded attack search and the
//! lemma-growth property.

mod increasing;
mod lemma;
mod search;

pub use increasing::{check_increasing, replays, substitution_universe, IncreasingCounterexample};
pub use lemma::{check_lemma_growth, LemmaBounds, LemmaReport, LemmaViolation};
pub use search::{
    search_disclosure, search_disclosure_observed, secret_instances, AttackResult, AttackStatus,
    AttackWitness, LevelViolation, SearchBounds, SearchStats,
};

use crate::context::ContextError;
use crate::funcs::ReliabilityReport;
use crate::term::TermError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Term(#[from] TermError),
    #[error("the intruder is already entitled to `{0}`; the query is vacuous")]
    VacuousQuery(String),
    #[error("`{0}` is not an atom of the protocol")]
    UnknownSecret(String),
    #[error("depth bound must be at least 1")]
    BadBound,
    #[error("certified protocol has a disclosure of `{0}`")]
    Contradiction(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IncreasingStatus {
    IncreasingAtBound,
    NotIncreasing,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncreasingVerdict {
    pub status: IncreasingStatus,
    pub depth: usize,
    /// Leaves of the substitution universe.
    pub universe_atoms: Vec<String>,
    pub universe_size: usize,
    pub substitutions_checked: usize,
    pub counterexample: Option<IncreasingCounterexample>,
}

impl IncreasingVerdict {
    pub fn increasing(&self) -> bool {
        self.status == IncreasingStatus::IncreasingAtBound
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    CertifiedAtBound,
    Inconclusive,
    Disclosure,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::CertifiedAtBound => "CertifiedAtBound",
            Verdict::Inconclusive => "Inconclusive",
            Verdict::Disclosure => "Disclosure",
        }
    }
}

/// Certified only when the function is reliable at its bounds and every
/// generalized role is increasing. A failed check never proves an attack.
pub fn secrecy_verdict(reliability: &ReliabilityReport, inc: &IncreasingVerdict) -> Verdict {
    if reliability.passed() && inc.increasing() {
        Verdict::CertifiedAtBound
    } else {
        Verdict::Inconclusive
    }
}

/// Folds an attack search result into a verdict. A disclosure against a
/// certified protocol means the framework itself is broken.
pub fn with_attack(verdict: Verdict, attack: &AttackResult) -> Result<Verdict, CheckError> {
    match (&attack.witness, verdict) {
        (None, v) => Ok(v),
        (Some(w), Verdict::CertifiedAtBound) => Err(CheckError::Contradiction(w.secret.to_string())),
        (Some(_), _) => Ok(Verdict::Disclosure),
    }
}
