use super::{CheckError, IncreasingStatus, IncreasingVerdict};
use crate::context::{INTRUDER_NONCE, SecLevel, VerificationContext};
use crate::funcs::InterpFn;
use crate::roles::{GenRole, RoleSpec};
use crate::term::{Atom, Substitution, Term};
use crate::universe::{atom_terms, terms_with_keys};
use rayon::prelude::*;
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncreasingCounterexample {
    pub role: String,
    pub sigma: Substitution,
    pub alpha: Atom,
    /// `F(α, r⁺σ)`
    pub lhs: SecLevel,
    /// `⌈α⌉ ⊓ F(α, R⁻σ)`
    pub rhs: SecLevel,
}

/// U(d): closed terms of depth at most `d` over the content atoms of the
/// roles and the intruder nonce. Atoms seen only as keys appear only in
/// key position.
pub fn substitution_universe(
    ctx: &VerificationContext,
    spec: &RoleSpec,
    d: usize,
) -> (Vec<Atom>, Vec<Term>) {
    let mut content = spec.content_atoms();
    content.insert(ctx.intruder_nonce().clone());
    let keys: BTreeSet<Atom> = spec.atoms().difference(&content).cloned().collect();
    let leaves: Vec<Atom> = content.iter().chain(&keys).cloned().collect();
    let universe = terms_with_keys(&atom_terms(&content), &atom_terms(&keys), d);
    (leaves, universe)
}

fn nth_sigma(vars: &[crate::term::Var], universe: &[Term], mut n: usize) -> Substitution {
    let mut sigma = Substitution::new();
    for v in vars.iter().rev() {
        let t = &universe[n % universe.len()];
        n /= universe.len();
        sigma
            .bind(v.clone(), t)
            .expect("universe terms are closed");
    }
    sigma
}

fn check_one(
    ctx: &VerificationContext,
    g: &GenRole,
    f: &(impl InterpFn + ?Sized),
    sigma: &Substitution,
) -> Result<Option<IncreasingCounterexample>, CheckError> {
    let sent: Vec<Term> = g.terminal_sent().iter().map(|t| sigma.apply(t)).collect();
    let received: Vec<Term> = g.prior_received().iter().map(|t| sigma.apply(t)).collect();
    let alphas: BTreeSet<Atom> = sent.iter().chain(&received).flat_map(Term::atoms).collect();
    for alpha in alphas {
        let lhs = f.eval(ctx, &alpha, &sent)?;
        let rhs = ctx.meet(&ctx.level_of(&alpha)?, &f.eval(ctx, &alpha, &received)?)?;
        if !ctx.dominates(&lhs, &rhs)? {
            return Ok(Some(IncreasingCounterexample {
                role: g.id.clone(),
                sigma: sigma.clone(),
                alpha,
                lhs,
                rhs,
            }));
        }
    }
    Ok(None)
}

/// Checks `F(α, r⁺σ) ⊒ ⌈α⌉ ⊓ F(α, R⁻σ)` for every generalized role, every
/// substitution into U(d) and every atom involved. Returns the first violation
/// in role order, then substitution order.
pub fn check_increasing(
    ctx: &VerificationContext,
    spec: &RoleSpec,
    f: &(impl InterpFn + ?Sized),
    d: usize,
) -> Result<IncreasingVerdict, CheckError> {
    if d == 0 {
        return Err(CheckError::BadBound);
    }
    let (leaves, universe) = substitution_universe(ctx, spec, d);
    let mut checked = 0;
    let mut counterexample = None;
    for g in &spec.roles {
        let vars = g.vars();
        let count = universe
            .len()
            .checked_pow(vars.len() as u32)
            .expect("substitution space fits in usize");
        let found = (0..count)
            .into_par_iter()
            .map(|n| check_one(ctx, g, f, &nth_sigma(&vars, &universe, n)))
            .find_map_first(|r| r.transpose());
        match found {
            Some(r) => {
                counterexample = Some(r?);
                break;
            }
            None => checked += count,
        }
    }
    let mut universe_atoms: Vec<String> = leaves.iter().map(Atom::to_string).collect();
    universe_atoms.sort();
    universe_atoms.dedup();
    debug_assert!(universe_atoms.iter().any(|a| a == INTRUDER_NONCE));
    Ok(IncreasingVerdict {
        status: if counterexample.is_some() {
            IncreasingStatus::NotIncreasing
        } else {
            IncreasingStatus::IncreasingAtBound
        },
        depth: d,
        universe_atoms,
        universe_size: universe.len(),
        substitutions_checked: checked,
        counterexample,
    })
}

/// Re-evaluates a counterexample; true when it still violates the inequality.
pub fn replays(
    ctx: &VerificationContext,
    spec: &RoleSpec,
    f: &(impl InterpFn + ?Sized),
    cx: &IncreasingCounterexample,
) -> bool {
    let Some(g) = spec.get(&cx.role) else {
        return false;
    };
    let sent: Vec<Term> = g.terminal_sent().iter().map(|t| cx.sigma.apply(t)).collect();
    let received: Vec<Term> = g.prior_received().iter().map(|t| cx.sigma.apply(t)).collect();
    let lhs = f.eval(ctx, &cx.alpha, &sent);
    let rhs = f
        .eval(ctx, &cx.alpha, &received)
        .and_then(|r| ctx.meet(&ctx.level_of(&cx.alpha)?, &r));
    matches!((lhs, rhs), (Ok(l), Ok(r)) if ctx.dominates(&l, &r) == Ok(false))
}
