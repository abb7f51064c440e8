//! Secrecy analysis of cryptographic protocols by monotony.
//!
//! A protocol narration is turned into generalized roles, an interpretation
//! function estimates how well every atom is protected, and the protocol is
//! certified when no honest step ever lowers that estimate. A bounded
//! Dolev-Yao attack search runs alongside as an independent cross-check.

pub mod checker;
pub mod context;
pub mod deduce;
pub mod funcs;
pub mod pipeline;
pub mod report;
pub mod roles;
pub mod term;
pub mod traces;
pub mod universe;

pub use checker::{
    check_increasing, check_lemma_growth, search_disclosure, search_disclosure_observed,
    secrecy_verdict, with_attack, AttackResult, AttackStatus, CheckError, IncreasingStatus,
    IncreasingVerdict, LemmaBounds, SearchBounds, Verdict,
};
pub use context::{
    ContextError, Lattice, PowersetLattice, SecLevel, TwoPointLattice, TwoPointLevel, TypingMap,
    VerificationContext,
};
pub use deduce::{derivable, replay, saturate, Derivation, KnowledgeSet, Rule};
pub use funcs::{
    check_full_invariant, check_reliability, check_well_formed, geq_f, geq_fhat, Aux, Dek,
    InterpFn, InvarianceBounds, ReliabilityReport, WellFormedBounds,
};
pub use roles::{parse_protocol, role_spec, GenRole, ParseError, Protocol, RoleSpec};
pub use term::{Atom, AtomKind, Session, Substitution, Term, TermError, Var};
pub use traces::{is_valid, Trace, TraceStep};
