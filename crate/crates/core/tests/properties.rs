mod common;

use common::{suite, BruteOracle};
use monotony_core::context::Lattice;
use monotony_core::term::{inverse_key, match_term, normalize, normalize_lenient};
use monotony_core::{
    derivable, geq_f, replay, Atom, AtomKind, Dek, PowersetLattice, SecLevel, Substitution, Term, Var,
};
use proptest::prelude::*;
use std::collections::BTreeSet;

fn atoms() -> Vec<Atom> {
    let s = suite();
    let mut out = s.pool();
    out.push(Atom::new("kI", AtomKind::SymmetricKey));
    out.push(s.ctx.intruder_nonce().clone());
    out
}

fn leaf() -> impl Strategy<Value = Term> {
    proptest::sample::select(atoms()).prop_map(Term::Atom)
}

/// Keys: atoms or pairs of atoms.
fn key() -> impl Strategy<Value = Term> {
    prop_oneof![3 => leaf(), 1 => (leaf(), leaf()).prop_map(|(a, b)| Term::pair(a, b))]
}

/// Constructor terms: pairs and encryptions.
fn message() -> impl Strategy<Value = Term> {
    leaf().prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::pair(a, b)),
            (inner, key()).prop_map(|(a, k)| Term::enc(a, k)),
        ]
    })
}

/// Terms that may also contain destructors.
fn any_term() -> impl Strategy<Value = Term> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::pair(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::enc(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::dec(a, b)),
            inner.clone().prop_map(Term::fst),
            inner.clone().prop_map(Term::snd),
            inner.prop_map(Term::inv),
        ]
    })
}

fn level() -> impl Strategy<Value = SecLevel> {
    proptest::sample::subsequence(vec!["A", "B", "I", "S"], 0..=4).prop_map(SecLevel::of)
}

fn subterm_closure(msgs: &[Term]) -> Vec<Term> {
    let mut set = BTreeSet::new();
    for m in msgs {
        set.extend(m.subterms().into_iter().cloned());
    }
    set.into_iter().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn normalization_is_idempotent(t in any_term()) {
        let n = normalize_lenient(&t);
        prop_assert_eq!(normalize_lenient(&n), n);
    }

    #[test]
    fn decryption_inverts_encryption(m in message(), k in key()) {
        let c = Term::enc(m.clone(), k.clone());
        prop_assert_eq!(normalize(&Term::dec(c, inverse_key(&k))).unwrap(), m.clone());
        let p = Term::pair(m.clone(), k.clone());
        prop_assert_eq!(normalize(&Term::fst(p.clone())).unwrap(), m);
        prop_assert_eq!(normalize(&Term::snd(p)).unwrap(), k);
    }

    #[test]
    fn constructor_terms_are_normal(m in message()) {
        prop_assert_eq!(normalize(&m).unwrap(), m);
    }

    #[test]
    fn matching_recovers_instances(m in message(), a in message(), b in message()) {
        let x = Term::Var(Var::new("X", "r"));
        let y = Term::Var(Var::new("Y", "r"));
        let pattern = Term::pair(Term::enc(x.clone(), y.clone()), Term::pair(m, x.clone()));
        let mut sigma = Substitution::new();
        sigma.bind(Var::new("X", "r"), &a).unwrap();
        sigma.bind(Var::new("Y", "r"), &b).unwrap();
        let ground = sigma.apply(&pattern);
        let found = match_term(&pattern, &ground).unwrap();
        prop_assert_eq!(found.apply(&pattern), ground);
        prop_assert_eq!(found.get(&Var::new("X", "r")), Some(&a));
    }

    #[test]
    fn powerset_lattice_laws(a in level(), b in level(), c in level()) {
        let l = PowersetLattice::new(["A", "B", "I", "S"]);
        prop_assert_eq!(l.meet(&a, &b), l.meet(&b, &a));
        prop_assert_eq!(l.join(&a, &b), l.join(&b, &a));
        prop_assert_eq!(l.meet(&a, &l.meet(&b, &c)), l.meet(&l.meet(&a, &b), &c));
        prop_assert_eq!(l.join(&a, &l.join(&b, &c)), l.join(&l.join(&a, &b), &c));
        prop_assert_eq!(l.meet(&a, &l.join(&a, &b)), a.clone());
        prop_assert_eq!(l.join(&a, &l.meet(&a, &b)), a.clone());
        prop_assert!(l.dominates(&a, &l.meet(&a, &b)));
        prop_assert!(l.dominates(&l.join(&a, &b), &a));
        prop_assert!(l.dominates(&l.top(), &a));
        prop_assert!(l.dominates(&a, &l.bot()));
        prop_assert_eq!(l.dominates(&a, &b) && l.dominates(&b, &a), a == b);
    }

    #[test]
    fn deduction_agrees_with_forward_closure(msgs in proptest::collection::vec(message(), 1..4)) {
        let s = suite();
        let mut base: Vec<Term> = msgs.clone();
        base.extend(s.ctx.intruder_knowledge().iter().cloned());
        let closed = subterm_closure(&base);
        // Goals: subterms plus one constructor step over them.
        let mut universe = closed.clone();
        for a in &closed {
            for b in &closed {
                universe.push(Term::pair(a.clone(), b.clone()));
                universe.push(Term::enc(a.clone(), b.clone()));
            }
        }
        let universe: Vec<Term> = universe.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let oracle = BruteOracle::new(universe);
        let known = oracle.closure(&s.ctx, &msgs);
        for (i, goal) in oracle.universe().iter().enumerate() {
            let d = derivable(&s.ctx, &msgs, goal);
            prop_assert_eq!(d.is_some(), known[i], "goal {}", goal);
            if let Some(d) = d {
                prop_assert!(replay(&s.ctx, &msgs, &d));
            }
        }
    }

    #[test]
    fn deduction_is_monotone(m1 in proptest::collection::vec(message(), 0..3), extra in message(), goal in message()) {
        let s = suite();
        if derivable(&s.ctx, &m1, &goal).is_some() {
            let mut m2 = m1.clone();
            m2.push(extra);
            prop_assert!(derivable(&s.ctx, &m2, &goal).is_some());
        }
    }

    #[test]
    fn dek_ordering_is_reflexive(msgs in proptest::collection::vec(message(), 0..3)) {
        let s = suite();
        prop_assert!(geq_f(&s.ctx, &Dek, &msgs, &msgs).unwrap());
    }
}
