//! Interpretation functions `F(α, M)` and the reliability checks over them.

use crate::context::{ContextError, SecLevel, VerificationContext};
use crate::deduce::saturate;
use crate::term::{inverse_key, Atom, Term};
use crate::universe::{atom_terms, subsets_up_to, terms_up_to_depth};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

/// `F(α, M)`: the security level of atom `α` given the messages `M`.
pub trait InterpFn: Sync {
    fn name(&self) -> String;
    fn eval(&self, ctx: &VerificationContext, alpha: &Atom, msgs: &[Term])
        -> Result<SecLevel, ContextError>;
    /// What the absent-atom axiom expects of this function.
    fn absent(&self) -> Absent {
        Absent::Top
    }
}

impl<T: InterpFn + ?Sized> InterpFn for &T {
    fn name(&self) -> String {
        (**self).name()
    }

    fn eval(
        &self,
        ctx: &VerificationContext,
        alpha: &Atom,
        msgs: &[Term],
    ) -> Result<SecLevel, ContextError> {
        (**self).eval(ctx, alpha, msgs)
    }

    fn absent(&self) -> Absent {
        (**self).absent()
    }
}

/// Direct encrypting keys: each occurrence of `α` is worth the level of the
/// decryption key of the innermost encryption around it, `⊥` in clear.
/// Occurrences in key position are ignored.
#[derive(Debug, Clone, Copy, Default)]
pub struct Dek;

impl Dek {
    fn walk(
        ctx: &VerificationContext,
        alpha: &Atom,
        t: &Term,
        here: &SecLevel,
        acc: &mut SecLevel,
    ) {
        match t {
            Term::Atom(a) => {
                if a == alpha {
                    acc.0.extend(here.0.iter().cloned());
                }
            }
            Term::Var(_) => {}
            Term::Enc(body, key) => {
                let level = match inverse_key(key).as_atom() {
                    Some(dk) => ctx.level_of(dk).unwrap_or_else(|_| ctx.bot()),
                    None => ctx.bot(),
                };
                Self::walk(ctx, alpha, body, &level, acc);
            }
            Term::Pair(a, b) | Term::Dec(a, b) => {
                Self::walk(ctx, alpha, a, here, acc);
                Self::walk(ctx, alpha, b, here, acc);
            }
            Term::Inv(a) | Term::Fst(a) | Term::Snd(a) => Self::walk(ctx, alpha, a, here, acc),
        }
    }
}

impl InterpFn for Dek {
    fn name(&self) -> String {
        "dek".into()
    }

    fn eval(
        &self,
        ctx: &VerificationContext,
        alpha: &Atom,
        msgs: &[Term],
    ) -> Result<SecLevel, ContextError> {
        ctx.level_of(alpha)?;
        let bot = ctx.bot();
        let mut acc = ctx.top();
        for m in msgs {
            Self::walk(ctx, alpha, m, &bot, &mut acc);
        }
        Ok(acc)
    }
}

/// `F̂(α, M) = ⌈α⌉ ⊓ F(α, M)`.
#[derive(Debug, Clone, Copy)]
pub struct Aux<F>(pub F);

impl<F: InterpFn> InterpFn for Aux<F> {
    fn name(&self) -> String {
        format!("{}-hat", self.0.name())
    }

    fn eval(
        &self,
        ctx: &VerificationContext,
        alpha: &Atom,
        msgs: &[Term],
    ) -> Result<SecLevel, ContextError> {
        let declared = ctx.level_of(alpha)?;
        ctx.meet(&declared, &self.0.eval(ctx, alpha, msgs)?)
    }

    fn absent(&self) -> Absent {
        Absent::Declared
    }
}

/// Looks up a function by its command-line name.
pub fn by_name(name: &str) -> Option<Box<dyn InterpFn>> {
    match name {
        "dek" => Some(Box::new(Dek)),
        "dek-hat" => Some(Box::new(Aux(Dek))),
        _ => None,
    }
}

fn atoms_of_set(msgs: &[Term]) -> BTreeSet<Atom> {
    msgs.iter().flat_map(Term::atoms).collect()
}

/// `M₁ ⊒_F M₂`: for every atom of `M₁`, `F(α, M₁) ⊒ F(α, M₂)`.
pub fn geq_f(
    ctx: &VerificationContext,
    f: &(impl InterpFn + ?Sized),
    m1: &[Term],
    m2: &[Term],
) -> Result<bool, ContextError> {
    for alpha in atoms_of_set(m1) {
        if !ctx.dominates(&f.eval(ctx, &alpha, m1)?, &f.eval(ctx, &alpha, m2)?)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `M₁ ⊒_F̂ M₂`.
pub fn geq_fhat(
    ctx: &VerificationContext,
    f: &(impl InterpFn + ?Sized),
    m1: &[Term],
    m2: &[Term],
) -> Result<bool, ContextError> {
    geq_f(ctx, &Aux(f), m1, m2)
}

/// Expected value of `F(α, M)` when `α` does not occur in `M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Absent {
    /// `⊤`, as required of `F`.
    Top,
    /// `⌈α⌉`, as holds for `F̂`.
    Declared,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WellFormedBounds {
    pub pool: Vec<Atom>,
    /// Depth of the exhaustively enumerated terms.
    pub depth: usize,
    /// Largest `M₁`, `M₂` in the exhaustive part.
    pub max_set_size: usize,
    pub random_trials: usize,
    pub random_depth: usize,
    pub random_set_size: usize,
    pub seed: u64,
}

impl WellFormedBounds {
    pub fn new(pool: Vec<Atom>) -> Self {
        WellFormedBounds {
            pool,
            depth: 2,
            max_set_size: 1,
            random_trials: 1000,
            random_depth: 3,
            random_set_size: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    /// `F(α, {α}) = ⊥`
    Singleton,
    /// `F(α, M₁ ∪ M₂) = F(α, M₁) ⊓ F(α, M₂)`
    Union,
    /// `F(α, M) = ⊤` when `α ∉ A(M)`
    Absent,
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axiom::Singleton => "F(a,{a}) = bot",
            Axiom::Union => "F(a,M1 u M2) = F(a,M1) meet F(a,M2)",
            Axiom::Absent => "F(a,M) = top when a is absent",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WellFormedViolation {
    pub axiom: Axiom,
    pub alpha: Atom,
    pub m1: Vec<Term>,
    pub m2: Vec<Term>,
    pub got: SecLevel,
    pub expected: SecLevel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WellFormedResult {
    pub cases: usize,
    pub violation: Option<WellFormedViolation>,
}

impl WellFormedResult {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

fn union(m1: &[Term], m2: &[Term]) -> Vec<Term> {
    let set: BTreeSet<&Term> = m1.iter().chain(m2).collect();
    set.into_iter().cloned().collect()
}

fn wf_case(
    ctx: &VerificationContext,
    f: &(impl InterpFn + ?Sized),
    absent: Absent,
    alpha: &Atom,
    m1: &[Term],
    m2: &[Term],
) -> Result<Option<WellFormedViolation>, ContextError> {
    let violation = |axiom, got, expected| {
        Some(WellFormedViolation {
            axiom,
            alpha: alpha.clone(),
            m1: m1.to_vec(),
            m2: m2.to_vec(),
            got,
            expected,
        })
    };
    let v1 = f.eval(ctx, alpha, m1)?;
    let v2 = f.eval(ctx, alpha, m2)?;
    let vu = f.eval(ctx, alpha, &union(m1, m2))?;
    let meet = ctx.meet(&v1, &v2)?;
    if vu != meet {
        return Ok(violation(Axiom::Union, vu, meet));
    }
    for (m, v) in [(m1, &v1), (m2, &v2)] {
        if !m.iter().any(|t| t.contains_atom(alpha)) {
            let expected = match absent {
                Absent::Top => ctx.top(),
                Absent::Declared => ctx.level_of(alpha)?,
            };
            if *v != expected {
                return Ok(violation(Axiom::Absent, v.clone(), expected));
            }
        }
    }
    Ok(None)
}

fn random_term(rng: &mut ChaCha8Rng, leaves: &[Term], depth: usize) -> Term {
    if depth <= 1 || rng.gen_bool(0.4) {
        return leaves[rng.gen_range(0..leaves.len())].clone();
    }
    let a = random_term(rng, leaves, depth - 1);
    let b = random_term(rng, leaves, depth - 1);
    if rng.gen_bool(0.5) {
        Term::pair(a, b)
    } else {
        Term::enc(a, b)
    }
}

fn random_set(rng: &mut ChaCha8Rng, leaves: &[Term], depth: usize, max: usize) -> Vec<Term> {
    let n = rng.gen_range(0..=max);
    let set: BTreeSet<Term> = (0..n).map(|_| random_term(rng, leaves, depth)).collect();
    set.into_iter().collect()
}

/// Checks the three well-formedness axioms, exhaustively on small sets and
/// then on random ones. The first violation found is reported.
pub fn check_well_formed(
    ctx: &VerificationContext,
    f: &(impl InterpFn + ?Sized),
    bounds: &WellFormedBounds,
) -> Result<WellFormedResult, ContextError> {
    check_well_formed_with(ctx, f, bounds, f.absent())
}

pub fn check_well_formed_with(
    ctx: &VerificationContext,
    f: &(impl InterpFn + ?Sized),
    bounds: &WellFormedBounds,
    absent: Absent,
) -> Result<WellFormedResult, ContextError> {
    let mut cases = 0;
    let bot = ctx.bot();
    for alpha in &bounds.pool {
        cases += 1;
        let got = f.eval(ctx, alpha, &[Term::Atom(alpha.clone())])?;
        if got != bot {
            return Ok(WellFormedResult {
                cases,
                violation: Some(WellFormedViolation {
                    axiom: Axiom::Singleton,
                    alpha: alpha.clone(),
                    m1: vec![Term::Atom(alpha.clone())],
                    m2: Vec::new(),
                    got,
                    expected: bot,
                }),
            });
        }
    }

    let leaves = atom_terms(&bounds.pool);
    let universe = terms_up_to_depth(&leaves, bounds.depth);
    let sets: Vec<Vec<Term>> = subsets_up_to(universe.len(), bounds.max_set_size)
        .into_iter()
        .map(|ix| ix.into_iter().map(|i| universe[i].clone()).collect())
        .collect();
    let exhaustive: Vec<(usize, usize)> = (0..sets.len())
        .flat_map(|i| (0..sets.len()).map(move |j| (i, j)))
        .collect();
    cases += exhaustive.len() * bounds.pool.len();
    let found = exhaustive
        .par_iter()
        .map(|&(i, j)| {
            for alpha in &bounds.pool {
                if let Some(v) = wf_case(ctx, f, absent, alpha, &sets[i], &sets[j])? {
                    return Ok(Some(v));
                }
            }
            Ok(None)
        })
        .find_map_first(|r: Result<Option<WellFormedViolation>, ContextError>| r.transpose());
    if let Some(r) = found {
        return Ok(WellFormedResult {
            cases,
            violation: Some(r?),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(bounds.seed);
    for _ in 0..bounds.random_trials {
        let m1 = random_set(&mut rng, &leaves, bounds.random_depth, bounds.random_set_size);
        let m2 = random_set(&mut rng, &leaves, bounds.random_depth, bounds.random_set_size);
        let alpha = &bounds.pool[rng.gen_range(0..bounds.pool.len())];
        cases += 1;
        if let Some(v) = wf_case(ctx, f, absent, alpha, &m1, &m2)? {
            return Ok(WellFormedResult {
                cases,
                violation: Some(v),
            });
        }
    }
    Ok(WellFormedResult {
        cases,
        violation: None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvarianceBounds {
    pub pool: Vec<Atom>,
    /// Depth of the members of `M`.
    pub set_depth: usize,
    pub max_set_size: usize,
    /// Depth of the derived messages `m`.
    pub goal_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvarianceViolation {
    pub msgs: Vec<Term>,
    pub derived: Term,
    pub alpha: Atom,
    /// `F(α, {m})`
    pub lhs: SecLevel,
    /// `F(α, M)`
    pub rhs: SecLevel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvarianceResult {
    pub sets_checked: usize,
    /// Sets where some atom is already exposed below its level.
    pub sets_skipped: usize,
    pub violation: Option<InvarianceViolation>,
}

impl InvarianceResult {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

/// Every atom of `M` is valued at least at its declared level, unless the
/// intruder is entitled to it.
pub fn guarded(
    ctx: &VerificationContext,
    f: &(impl InterpFn + ?Sized),
    msgs: &[Term],
) -> Result<bool, ContextError> {
    for alpha in atoms_of_set(msgs) {
        if ctx.entitled(&alpha) {
            continue;
        }
        let declared = ctx.level_of(&alpha)?;
        if !ctx.dominates(&f.eval(ctx, &alpha, msgs)?, &declared)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Messages of depth at most `depth` composable from the decomposition closure of `msgs`.
pub fn derived_messages(ctx: &VerificationContext, msgs: &[Term], depth: usize) -> Vec<Term> {
    let closure = saturate(ctx, msgs);
    let leaves: Vec<Term> = closure
        .terms()
        .iter()
        .filter(|t| t.depth() <= depth)
        .cloned()
        .collect();
    let mut seen: BTreeSet<Term> = leaves.iter().cloned().collect();
    let mut all = leaves;
    for d in 2..=depth {
        let below = all.len();
        let mut next = Vec::new();
        for a in &all[..below] {
            for b in &all[..below] {
                if a.depth().max(b.depth()) + 1 != d {
                    continue;
                }
                for t in [Term::pair(a.clone(), b.clone()), Term::enc(a.clone(), b.clone())] {
                    if seen.insert(t.clone()) {
                        next.push(t);
                    }
                }
            }
        }
        all.extend(next);
    }
    all
}

fn invariance_case(
    ctx: &VerificationContext,
    f: &(impl InterpFn + ?Sized),
    msgs: &[Term],
    goal_depth: usize,
) -> Result<Option<InvarianceViolation>, ContextError> {
    for m in derived_messages(ctx, msgs, goal_depth) {
        for alpha in m.atoms() {
            if ctx.entitled(&alpha) {
                continue;
            }
            let lhs = f.eval(ctx, &alpha, std::slice::from_ref(&m))?;
            let rhs = f.eval(ctx, &alpha, msgs)?;
            if !ctx.dominates(&lhs, &rhs)? {
                return Ok(Some(InvarianceViolation {
                    msgs: msgs.to_vec(),
                    derived: m,
                    alpha,
                    lhs,
                    rhs,
                }));
            }
        }
    }
    Ok(None)
}

/// Full invariance by intruder at a bound: from no guarded `M` in the bounded
/// universe can the intruder derive an `m` that lowers the level of an atom
/// it is not entitled to.
pub fn check_full_invariant(
    ctx: &VerificationContext,
    f: &(impl InterpFn + ?Sized),
    bounds: &InvarianceBounds,
) -> Result<InvarianceResult, ContextError> {
    let universe = terms_up_to_depth(&atom_terms(&bounds.pool), bounds.set_depth);
    let subsets = subsets_up_to(universe.len(), bounds.max_set_size);
    let outcomes: Vec<Result<Option<Option<InvarianceViolation>>, ContextError>> = subsets
        .par_iter()
        .map(|ix| {
            let msgs: Vec<Term> = ix.iter().map(|&i| universe[i].clone()).collect();
            if !guarded(ctx, f, &msgs)? {
                return Ok(None);
            }
            invariance_case(ctx, f, &msgs, bounds.goal_depth).map(Some)
        })
        .collect();
    let mut result = InvarianceResult {
        sets_checked: 0,
        sets_skipped: 0,
        violation: None,
    };
    for o in outcomes {
        match o? {
            None => result.sets_skipped += 1,
            Some(v) => {
                result.sets_checked += 1;
                if result.violation.is_none() {
                    result.violation = v;
                }
            }
        }
    }
    Ok(result)
}

/// Both reliability conditions for one function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReliabilityReport {
    pub function: String,
    pub well_formed: WellFormedResult,
    pub well_formed_bounds: WellFormedBounds,
    pub full_invariant: InvarianceResult,
    pub invariance_bounds: InvarianceBounds,
}

impl ReliabilityReport {
    pub fn passed(&self) -> bool {
        self.well_formed.passed() && self.full_invariant.passed()
    }
}

pub fn check_reliability(
    ctx: &VerificationContext,
    f: &(impl InterpFn + ?Sized),
    wf: &WellFormedBounds,
    inv: &InvarianceBounds,
) -> Result<ReliabilityReport, ContextError> {
    Ok(ReliabilityReport {
        function: f.name(),
        well_formed: check_well_formed(ctx, f, wf)?,
        well_formed_bounds: wf.clone(),
        full_invariant: check_full_invariant(ctx, f, inv)?,
        invariance_bounds: inv.clone(),
    })
}
