#![allow(dead_code)]

use monotony_core::context::{ContextError, SecLevel, TypingMap, VerificationContext};
use monotony_core::funcs::{Dek, InterpFn};
use monotony_core::term::{normalize_lenient, Atom, AtomKind, Term};
use monotony_core::{parse_protocol, Protocol};
use std::collections::{BTreeMap, BTreeSet, HashMap};

pub const WOO_LAM: &str = include_str!("../../protocols/woo_lam.proto");
pub const WOO_LAM_CLEAR: &str = include_str!("../../protocols/woo_lam_clear.proto");

pub fn woo_lam() -> Protocol {
    parse_protocol(WOO_LAM).unwrap()
}

pub fn woo_lam_clear() -> Protocol {
    parse_protocol(WOO_LAM_CLEAR).unwrap()
}

/// Every protocol shipped in `protocols/`.
pub fn corpus() -> Vec<(String, Protocol)> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/protocols");
    let mut out: Vec<(String, Protocol)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "proto"))
        .map(|p| {
            let text = std::fs::read_to_string(&p).unwrap();
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let proto = parse_protocol(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
            (name, proto)
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Small context for the exhaustive suites: a secret nonce `s`, a symmetric
/// key `k` the intruder is entitled to but does not hold, and an asymmetric
/// pair `pk`/`pk^-1`. K(I) = {nI, kI} with ⌈kI⌉ = {I}.
pub struct Suite {
    pub ctx: VerificationContext,
    pub s: Atom,
    pub k: Atom,
    pub pk: Atom,
    pub pk_inv: Atom,
}

impl Suite {
    pub fn pool(&self) -> Vec<Atom> {
        vec![
            self.s.clone(),
            self.k.clone(),
            self.pk.clone(),
            self.pk_inv.clone(),
        ]
    }

    /// Atoms of the pool plus those of K(I).
    pub fn leaves(&self) -> Vec<Term> {
        let mut out: Vec<Term> = self.pool().into_iter().map(Term::Atom).collect();
        out.extend(self.ctx.intruder_knowledge().iter().cloned());
        out
    }
}

pub fn suite() -> Suite {
    let s = Atom::new("s", AtomKind::Nonce);
    let k = Atom::new("k", AtomKind::SymmetricKey);
    let pk = Atom::new("pk", AtomKind::AsymmetricKey);
    let pk_inv = pk.inverse_key();
    let ki = Atom::new("kI", AtomKind::SymmetricKey);
    let mut typing = TypingMap::new();
    typing.declare(&s, SecLevel::of(["A", "B"]));
    typing.declare(&k, SecLevel::of(["A", "B", "I"]));
    typing.declare(&pk, SecLevel::of(["A", "B", "I", "S"]));
    typing.declare(&pk_inv, SecLevel::of(["A"]));
    typing.declare(&ki, SecLevel::of(["I"]));
    let knowledge = BTreeMap::from([("I".to_string(), BTreeSet::from([Term::Atom(ki)]))]);
    let ctx = VerificationContext::new(["A", "B", "I", "S"], "I", knowledge, typing).unwrap();
    Suite {
        ctx,
        s,
        k,
        pk,
        pk_inv,
    }
}

/// ⊤ for every atom: breaks `F(α, {α}) = ⊥`.
pub struct ConstTop;

impl InterpFn for ConstTop {
    fn name(&self) -> String {
        "const-top".into()
    }

    fn eval(&self, ctx: &VerificationContext, _: &Atom, _: &[Term]) -> Result<SecLevel, ContextError> {
        Ok(ctx.top())
    }
}

/// Looks only at the first message of the set: breaks the union axiom.
pub struct FirstOnly;

impl InterpFn for FirstOnly {
    fn name(&self) -> String {
        "first-only".into()
    }

    fn eval(&self, ctx: &VerificationContext, a: &Atom, msgs: &[Term]) -> Result<SecLevel, ContextError> {
        Dek.eval(ctx, a, &msgs[..msgs.len().min(1)])
    }
}

/// ⊤ for occurrences under an encryption, ⊥ in clear. Well-formed, but blind
/// to what decryption reveals.
pub struct DecryptionBlind;

fn blind_walk(a: &Atom, t: &Term, covered: bool, clear: &mut bool) {
    match t {
        Term::Atom(b) => *clear |= b == a && !covered,
        Term::Enc(body, _) => blind_walk(a, body, true, clear),
        Term::Pair(x, y) | Term::Dec(x, y) => {
            blind_walk(a, x, covered, clear);
            blind_walk(a, y, covered, clear);
        }
        Term::Inv(x) | Term::Fst(x) | Term::Snd(x) => blind_walk(a, x, covered, clear),
        Term::Var(_) => {}
    }
}

impl InterpFn for DecryptionBlind {
    fn name(&self) -> String {
        "decryption-blind".into()
    }

    fn eval(&self, ctx: &VerificationContext, a: &Atom, msgs: &[Term]) -> Result<SecLevel, ContextError> {
        ctx.level_of(a)?;
        let mut clear = false;
        for m in msgs {
            blind_walk(a, m, false, &mut clear);
        }
        Ok(if clear { ctx.bot() } else { ctx.top() })
    }
}

/// Knowledge closure computed naively: a forward fixpoint of the intruder
/// rules (int, op over pair/enc/fst/snd/dec, eq by normalization) inside a
/// fixed universe of terms closed under subterms.
pub struct BruteOracle {
    universe: Vec<Term>,
    index: HashMap<Term, usize>,
    /// Components of pairs and encryptions.
    parts: Vec<Option<(usize, usize)>>,
    /// For each ciphertext, the keys that open it and the body they yield.
    opens: Vec<Vec<(usize, usize)>>,
}

impl BruteOracle {
    pub fn new(universe: Vec<Term>) -> Self {
        let index: HashMap<Term, usize> =
            universe.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let parts = universe
            .iter()
            .map(|t| match t {
                Term::Pair(a, b) | Term::Enc(a, b) => Some((index[&**a], index[&**b])),
                _ => None,
            })
            .collect();
        let keys: Vec<usize> = (0..universe.len()).filter(|&i| universe[i].depth() <= 2).collect();
        let opens = universe
            .iter()
            .map(|c| {
                if !matches!(c, Term::Enc(..)) {
                    return Vec::new();
                }
                keys.iter()
                    .filter_map(|&k| {
                        let d = normalize_lenient(&Term::dec(c.clone(), universe[k].clone()));
                        index.get(&d).map(|&b| (k, b))
                    })
                    .collect()
            })
            .collect();
        BruteOracle {
            universe,
            index,
            parts,
            opens,
        }
    }

    pub fn universe(&self) -> &[Term] {
        &self.universe
    }

    /// Membership of every universe term in the closure of `msgs ∪ K(I)`.
    pub fn closure(&self, ctx: &VerificationContext, msgs: &[Term]) -> Vec<bool> {
        let mut known = vec![false; self.universe.len()];
        for t in msgs.iter().chain(ctx.intruder_knowledge()) {
            let t = normalize_lenient(t);
            let i = *self
                .index
                .get(&t)
                .unwrap_or_else(|| panic!("{t} is outside the oracle universe"));
            known[i] = true;
        }
        loop {
            let mut changed = false;
            for i in 0..self.universe.len() {
                let Some((a, b)) = self.parts[i] else {
                    continue;
                };
                if known[i] {
                    if matches!(self.universe[i], Term::Pair(..)) {
                        for p in [a, b] {
                            changed |= !known[p];
                            known[p] = true;
                        }
                    }
                    for &(k, body) in &self.opens[i] {
                        if known[k] && !known[body] {
                            known[body] = true;
                            changed = true;
                        }
                    }
                } else if known[a] && known[b] {
                    known[i] = true;
                    changed = true;
                }
            }
            if !changed {
                return known;
            }
        }
    }
}
