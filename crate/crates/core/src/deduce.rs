//! Intruder deduction `M ⊨ m` over ground terms.
//!
//! Decision is two-phase: the knowledge is first closed under decomposition
//! (projections, and decryption when the inverse key is derivable), then a
//! goal is checked by composing it top-down from the closure.

use crate::context::VerificationContext;
use crate::term::{inverse_key, normalize_lenient, Term};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, HashSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Int,
    Op,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Function {
    Pair,
    Enc,
    Fst,
    Snd,
    Dec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivationStep {
    pub rule: Rule,
    pub function: Option<Function>,
    pub premises: Vec<Term>,
    pub conclusion: Term,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Derivation {
    pub goal: Term,
    pub steps: Vec<DerivationStep>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Initial,
    Projection { pair: Term, first: bool },
    Decryption { cipher: Term, key: Term },
}

/// Closure of `M ∪ K(I)` under decomposition.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeSet {
    terms: HashMap<Term, Provenance>,
    order: Vec<Term>,
}

impl KnowledgeSet {
    fn insert(&mut self, t: Term, p: Provenance) -> bool {
        if self.terms.contains_key(&t) {
            return false;
        }
        self.terms.insert(t.clone(), p);
        self.order.push(t);
        true
    }

    pub fn contains(&self, t: &Term) -> bool {
        self.terms.contains_key(t)
    }

    pub fn provenance(&self, t: &Term) -> Option<&Provenance> {
        self.terms.get(t)
    }

    /// Stored terms in insertion order.
    pub fn terms(&self) -> &[Term] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Whether `goal` is buildable from the closure with pairing and encryption.
    pub fn can_compose(&self, goal: &Term) -> bool {
        if self.terms.contains_key(goal) {
            return true;
        }
        match goal {
            Term::Pair(a, b) | Term::Enc(a, b) => self.can_compose(a) && self.can_compose(b),
            _ => false,
        }
    }

    /// A derivation of `goal`, if one exists.
    pub fn derive(&self, goal: &Term) -> Option<Derivation> {
        if !self.can_compose(goal) {
            return None;
        }
        let mut steps = Vec::new();
        let mut done = HashSet::new();
        self.explain(goal, &mut steps, &mut done);
        Some(Derivation {
            goal: goal.clone(),
            steps,
        })
    }

    fn explain(&self, t: &Term, steps: &mut Vec<DerivationStep>, done: &mut HashSet<Term>) {
        if done.contains(t) {
            return;
        }
        match self.terms.get(t) {
            Some(Provenance::Initial) => steps.push(DerivationStep {
                rule: Rule::Int,
                function: None,
                premises: vec![],
                conclusion: t.clone(),
            }),
            Some(Provenance::Projection { pair, first }) => {
                self.explain(pair, steps, done);
                let (f, raw) = if *first {
                    (Function::Fst, Term::fst(pair.clone()))
                } else {
                    (Function::Snd, Term::snd(pair.clone()))
                };
                push_destructor(steps, f, vec![pair.clone()], raw, t);
            }
            Some(Provenance::Decryption { cipher, key }) => {
                self.explain(cipher, steps, done);
                self.explain(key, steps, done);
                let raw = Term::dec(cipher.clone(), key.clone());
                push_destructor(
                    steps,
                    Function::Dec,
                    vec![cipher.clone(), key.clone()],
                    raw,
                    t,
                );
            }
            None => {
                let (f, a, b) = match t {
                    Term::Pair(a, b) => (Function::Pair, a, b),
                    Term::Enc(a, b) => (Function::Enc, a, b),
                    _ => unreachable!("explain called on an underivable term"),
                };
                self.explain(a, steps, done);
                self.explain(b, steps, done);
                steps.push(DerivationStep {
                    rule: Rule::Op,
                    function: Some(f),
                    premises: vec![(**a).clone(), (**b).clone()],
                    conclusion: t.clone(),
                });
            }
        }
        done.insert(t.clone());
    }
}

fn push_destructor(
    steps: &mut Vec<DerivationStep>,
    f: Function,
    premises: Vec<Term>,
    raw: Term,
    result: &Term,
) {
    steps.push(DerivationStep {
        rule: Rule::Op,
        function: Some(f),
        premises,
        conclusion: raw.clone(),
    });
    steps.push(DerivationStep {
        rule: Rule::Eq,
        function: None,
        premises: vec![raw],
        conclusion: result.clone(),
    });
}

/// Closure of `M ∪ K(I)` under decomposition.
pub fn saturate<'a>(
    ctx: &VerificationContext,
    msgs: impl IntoIterator<Item = &'a Term>,
) -> KnowledgeSet {
    let mut ks = KnowledgeSet::default();
    let mut work = Vec::new();
    let given = msgs.into_iter().map(normalize_lenient);
    for t in given.chain(ctx.intruder_knowledge().iter().map(normalize_lenient)) {
        if ks.insert(t.clone(), Provenance::Initial) {
            work.push(t);
        }
    }
    let mut sealed: Vec<Term> = Vec::new();
    loop {
        while let Some(t) = work.pop() {
            match &t {
                Term::Pair(a, b) => {
                    for (part, first) in [(a, true), (b, false)] {
                        let p = Provenance::Projection {
                            pair: t.clone(),
                            first,
                        };
                        if ks.insert((**part).clone(), p) {
                            work.push((**part).clone());
                        }
                    }
                }
                Term::Enc(..) => sealed.push(t.clone()),
                _ => {}
            }
        }
        let mut opened = false;
        sealed.retain(|c| {
            let Term::Enc(body, key) = c else {
                unreachable!()
            };
            let dk = inverse_key(key);
            if !ks.can_compose(&dk) {
                return true;
            }
            let p = Provenance::Decryption {
                cipher: c.clone(),
                key: dk,
            };
            if ks.insert((**body).clone(), p) {
                work.push((**body).clone());
            }
            opened = true;
            false
        });
        if !opened && work.is_empty() {
            break;
        }
    }
    ks
}

/// `M ⊨ goal`, with a replayable derivation when it holds.
pub fn derivable<'a>(
    ctx: &VerificationContext,
    msgs: impl IntoIterator<Item = &'a Term>,
    goal: &Term,
) -> Option<Derivation> {
    saturate(ctx, msgs).derive(goal)
}

/// Checks a derivation step by step against the three intruder rules.
pub fn replay<'a>(
    ctx: &VerificationContext,
    msgs: impl IntoIterator<Item = &'a Term>,
    d: &Derivation,
) -> bool {
    let initial: BTreeSet<Term> = msgs
        .into_iter()
        .map(normalize_lenient)
        .chain(ctx.intruder_knowledge().iter().map(normalize_lenient))
        .collect();
    let mut concluded: HashSet<&Term> = HashSet::new();
    for step in &d.steps {
        if !step.premises.iter().all(|p| concluded.contains(p)) {
            return false;
        }
        let ok = match (step.rule, step.function, step.premises.as_slice()) {
            (Rule::Int, None, []) => initial.contains(&step.conclusion),
            (Rule::Op, Some(f), ps) => {
                let built = match (f, ps) {
                    (Function::Pair, [a, b]) => Term::pair(a.clone(), b.clone()),
                    (Function::Enc, [a, b]) => Term::enc(a.clone(), b.clone()),
                    (Function::Dec, [a, b]) => Term::dec(a.clone(), b.clone()),
                    (Function::Fst, [a]) => Term::fst(a.clone()),
                    (Function::Snd, [a]) => Term::snd(a.clone()),
                    _ => return false,
                };
                built == step.conclusion
            }
            (Rule::Eq, None, [p]) => normalize_lenient(p) == step.conclusion,
            _ => false,
        };
        if !ok {
            return false;
        }
        concluded.insert(&step.conclusion);
    }
    concluded.contains(&d.goal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::TypingMap;
    use crate::term::{Atom, AtomKind};
    use std::collections::BTreeMap;

    fn ctx_with(ki: &[Term]) -> VerificationContext {
        let mut k = BTreeMap::new();
        k.insert("I".to_string(), ki.iter().cloned().collect());
        VerificationContext::new(["A", "B", "I"], "I", k, TypingMap::new()).unwrap()
    }

    fn t(name: &str, kind: AtomKind) -> Term {
        Term::Atom(Atom::new(name, kind))
    }

    #[test]
    fn saturation_opens_ciphertexts_with_known_keys() {
        let nb = t("Nb", AtomKind::Nonce);
        let kab = t("kab", AtomKind::SymmetricKey);
        let kas = t("kas", AtomKind::SymmetricKey);
        let c = Term::enc(Term::pair(nb.clone(), kab.clone()), kas.clone());
        let ctx = ctx_with(&[]);
        let ks = saturate(&ctx, &[c, Term::inv(kas.clone())]);
        assert!(ks.contains(&nb));
        assert!(ks.contains(&kab));
    }

    #[test]
    fn empty_knowledge_saturates_to_intruder_knowledge() {
        let ctx = ctx_with(&[]);
        let ks = saturate(&ctx, &[]);
        assert_eq!(ks.len(), 1);
        assert!(ks.contains(&Term::Atom(ctx.intruder_nonce().clone())));
    }

    #[test]
    fn sealed_without_key() {
        let s = t("s", AtomKind::Nonce);
        let k = t("k", AtomKind::SymmetricKey);
        let c = Term::enc(s.clone(), k);
        let ctx = ctx_with(&[]);
        let ks = saturate(&ctx, std::slice::from_ref(&c));
        assert!(ks.contains(&c));
        assert!(!ks.contains(&s));
        assert_eq!(ks.len(), 2);
        assert!(derivable(&ctx, &[c], &s).is_none());
    }

    #[test]
    fn composition_uses_intruder_keys() {
        let nb = t("Nb", AtomKind::Nonce);
        let kab = t("kab", AtomKind::SymmetricKey);
        let kis = t("kis", AtomKind::SymmetricKey);
        let ctx = ctx_with(std::slice::from_ref(&kis));
        let m = [nb.clone(), kab.clone()];
        let goal = Term::enc(Term::pair(nb, kab), kis);
        let d = derivable(&ctx, &m, &goal).unwrap();
        assert!(replay(&ctx, &m, &d));
        let ops = d.steps.iter().filter(|s| s.rule == Rule::Op).count();
        assert_eq!(ops, 2);
    }

    #[test]
    fn member_is_derivable_by_int() {
        let a = t("A", AtomKind::Principal);
        let ctx = ctx_with(&[]);
        let d = derivable(&ctx, std::slice::from_ref(&a), &a).unwrap();
        assert_eq!(d.steps.len(), 1);
        assert_eq!(d.steps[0].rule, Rule::Int);
    }

    #[test]
    fn nested_decryption_replays() {
        let s = t("s", AtomKind::Nonce);
        let k1 = t("k1", AtomKind::SymmetricKey);
        let k2 = t("k2", AtomKind::SymmetricKey);
        let pk = Atom::new("pk", AtomKind::AsymmetricKey);
        let m = [
            Term::enc(Term::enc(s.clone(), k1.clone()), pk.clone()),
            Term::enc(k1.clone(), k2.clone()),
            Term::pair(k2, Term::Atom(pk.inverse_key())),
        ];
        let ctx = ctx_with(&[]);
        let d = derivable(&ctx, &m, &s).unwrap();
        assert!(replay(&ctx, &m, &d));
        let mut tampered = d.clone();
        tampered.steps.remove(0);
        assert!(!replay(&ctx, &m, &tampered));
    }

    #[test]
    fn composite_key_decrypts_when_composable() {
        let s = t("s", AtomKind::Nonce);
        let a = t("a", AtomKind::Nonce);
        let b = t("b", AtomKind::Nonce);
        let c = Term::enc(s.clone(), Term::pair(a.clone(), b.clone()));
        let ctx = ctx_with(&[]);
        assert!(derivable(&ctx, &[c.clone(), a.clone(), b], &s).is_some());
        assert!(derivable(&ctx, &[c, a], &s).is_none());
    }
}
