//! The full secrecy pipeline: reliability, increasing check, attack search, verdict.

use crate::checker::{
    check_increasing, search_disclosure_observed, secrecy_verdict, substitution_universe,
    with_attack, AttackResult, CheckError, IncreasingVerdict, SearchBounds, Verdict,
};
use crate::funcs::{check_reliability, InterpFn, InvarianceBounds, ReliabilityReport, WellFormedBounds};
use crate::report::VerdictDoc;
use crate::roles::{role_spec, Protocol};
use crate::term::Atom;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckConfig {
    /// Depth of the substitution universe.
    pub depth: usize,
    /// Cross-check with a bounded attack search when set.
    pub search: Option<SearchBounds>,
    /// Secrets to search for; defaults to [`default_secrets`].
    pub secrets: Option<Vec<Atom>>,
    pub seed: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            depth: 2,
            search: Some(SearchBounds::default()),
            secrets: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckOutcome {
    pub protocol: String,
    pub reliability: ReliabilityReport,
    pub increasing: IncreasingVerdict,
    pub attacks: Vec<AttackResult>,
    pub verdict: Verdict,
}

impl CheckOutcome {
    pub fn doc(&self) -> VerdictDoc {
        VerdictDoc::new(
            &self.protocol,
            &self.reliability,
            &self.increasing,
            &self.attacks,
            self.verdict,
        )
    }
}

/// Fresh atoms of the protocol the intruder is not entitled to.
pub fn default_secrets(p: &Protocol) -> Vec<Atom> {
    p.atoms
        .values()
        .filter(|a| a.fresh && p.context.typing().is_typed(a) && !p.context.entitled(a))
        .cloned()
        .collect()
}

/// Reliability bounds over the leaves of the protocol's substitution universe.
pub fn reliability_bounds(p: &Protocol, seed: u64) -> (WellFormedBounds, InvarianceBounds) {
    let spec = role_spec(p);
    let (pool, _) = substitution_universe(&p.context, &spec, 1);
    let mut wf = WellFormedBounds::new(pool.clone());
    wf.seed = seed;
    let inv = InvarianceBounds {
        pool,
        set_depth: 2,
        max_set_size: 1,
        goal_depth: 2,
    };
    (wf, inv)
}

pub fn run_reliability(
    p: &Protocol,
    f: &(impl InterpFn + ?Sized),
    seed: u64,
) -> Result<ReliabilityReport, CheckError> {
    let (wf, inv) = reliability_bounds(p, seed);
    Ok(check_reliability(&p.context, f, &wf, &inv)?)
}

/// Runs the pipeline. A disclosure found against a certified protocol is
/// reported as [`CheckError::Contradiction`].
pub fn run_check(
    p: &Protocol,
    f: &(impl InterpFn + ?Sized),
    cfg: &CheckConfig,
) -> Result<CheckOutcome, CheckError> {
    let spec = role_spec(p);
    let reliability = run_reliability(p, f, cfg.seed)?;
    let increasing = check_increasing(&p.context, &spec, f, cfg.depth)?;
    let mut verdict = secrecy_verdict(&reliability, &increasing);
    let mut attacks = Vec::new();
    if let Some(bounds) = cfg.search {
        let secrets = cfg.secrets.clone().unwrap_or_else(|| default_secrets(p));
        for s in &secrets {
            let r = search_disclosure_observed(&p.context, &spec, s, bounds, Some(f))?;
            verdict = with_attack(verdict, &r)?;
            attacks.push(r);
        }
    }
    Ok(CheckOutcome {
        protocol: p.name.clone(),
        reliability,
        increasing,
        attacks,
        verdict,
    })
}
