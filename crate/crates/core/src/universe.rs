//! Bounded term universes used by the exhaustive checks.

use crate::term::{Atom, Term};

/// Every term of depth at most `depth` built from `leaves` with pairing and
/// encryption, ordered by depth and then by construction order.
pub fn terms_up_to_depth(leaves: &[Term], depth: usize) -> Vec<Term> {
    terms_with_keys(leaves, &[], depth)
}

/// Like [`terms_up_to_depth`], with `keys` additionally allowed in the key
/// slot of every encryption.
pub fn terms_with_keys(leaves: &[Term], keys: &[Term], depth: usize) -> Vec<Term> {
    if depth == 0 {
        return Vec::new();
    }
    let mut all: Vec<Term> = leaves.to_vec();
    let mut frontier_start = 0;
    for _ in 1..depth {
        let below = all.len();
        let mut next = Vec::new();
        for (i, a) in all[..below].iter().enumerate() {
            for (j, b) in all[..below].iter().enumerate() {
                if i < frontier_start && j < frontier_start {
                    continue;
                }
                next.push(Term::pair(a.clone(), b.clone()));
                next.push(Term::enc(a.clone(), b.clone()));
            }
            if i >= frontier_start {
                for k in keys {
                    if !all[..below].contains(k) {
                        next.push(Term::enc(a.clone(), k.clone()));
                    }
                }
            }
        }
        frontier_start = below;
        all.extend(next);
    }
    all
}

pub fn atom_terms<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> Vec<Term> {
    atoms.into_iter().cloned().map(Term::Atom).collect()
}

/// Index sets of all subsets of `0..n` with at most `k` elements, smallest first.
pub fn subsets_up_to(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut layer: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..k.min(n) {
        let mut next = Vec::new();
        for s in &layer {
            let start = s.last().map_or(0, |&l| l + 1);
            for i in start..n {
                let mut t = s.clone();
                t.push(i);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::AtomKind;
    use std::collections::HashSet;

    fn leaves(n: usize) -> Vec<Term> {
        (0..n)
            .map(|i| Term::Atom(Atom::new(format!("a{i}"), AtomKind::Nonce)))
            .collect()
    }

    #[test]
    fn universe_sizes() {
        let l = leaves(3);
        assert_eq!(terms_up_to_depth(&l, 1).len(), 3);
        assert_eq!(terms_up_to_depth(&l, 2).len(), 3 + 2 * 9);
        let u3 = terms_up_to_depth(&l, 3);
        assert_eq!(u3.len(), 21 + 2 * (21 * 21 - 9));
        assert!(u3.iter().all(|t| t.depth() <= 3));
        assert_eq!(u3.iter().collect::<HashSet<_>>().len(), u3.len());
    }

    #[test]
    fn extra_keys_only_in_key_slot() {
        let l = leaves(2);
        let k = Term::Atom(Atom::new("k", AtomKind::SymmetricKey));
        let u = terms_with_keys(&l, std::slice::from_ref(&k), 2);
        assert_eq!(u.len(), 2 + 2 * 4 + 2);
        assert!(!u.contains(&k));
        assert!(u.contains(&Term::enc(l[0].clone(), k)));
    }

    #[test]
    fn subset_counts() {
        assert_eq!(subsets_up_to(4, 0).len(), 1);
        assert_eq!(subsets_up_to(4, 2).len(), 1 + 4 + 6);
        assert_eq!(subsets_up_to(3, 5).len(), 8);
    }
}
