//! Message algebra: atoms, variables, constructors and substitutions.
//!
//! Terms are kept in normal form modulo the equations
//!
//! ```text
//! dec(enc(x, y), y^-1) = x      fst(x.y) = x      snd(x.y) = y      (k^-1)^-1 = k
//! ```
//!
//! Symmetric keys are their own inverse. The inverse of an asymmetric key atom
//! is another atom (same name, `inverse` flag flipped), so a private key can be
//! typed and tracked on its own. `Inv` only survives in normal forms above a
//! variable or a stuck destructor.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("inverse applied to non-key term `{0}`")]
    KindError(String),
    #[error("substitution range must be closed, got `{0}`")]
    OpenBinding(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AtomKind {
    Principal,
    Nonce,
    SymmetricKey,
    AsymmetricKey,
    Constant,
}

impl AtomKind {
    pub fn is_key(self) -> bool {
        matches!(self, AtomKind::SymmetricKey | AtomKind::AsymmetricKey)
    }
}

/// Session exponent of a fresh atom: the symbolic `i` of generalized roles,
/// or a concrete session id inside a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Session {
    Symbolic,
    Id(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub name: String,
    pub inverse: bool,
    pub session: Option<Session>,
    pub kind: AtomKind,
    pub fresh: bool,
}

impl Atom {
    pub fn new(name: impl Into<String>, kind: AtomKind) -> Self {
        let name = name.into();
        debug_assert!(!name.is_empty());
        Atom {
            name,
            inverse: false,
            session: None,
            kind,
            fresh: false,
        }
    }

    pub fn fresh(name: impl Into<String>, kind: AtomKind) -> Self {
        Atom {
            fresh: true,
            ..Atom::new(name, kind)
        }
    }

    /// Tags a fresh atom with a session; non-fresh atoms are returned unchanged.
    pub fn in_session(&self, session: Session) -> Self {
        let mut a = self.clone();
        if a.fresh {
            a.session = Some(session);
        }
        a
    }

    /// The atom without its session exponent.
    pub fn base(&self) -> Self {
        Atom {
            session: None,
            ..self.clone()
        }
    }

    /// Decryption partner: flips the inverse flag of asymmetric keys, identity otherwise.
    pub fn inverse_key(&self) -> Self {
        let mut a = self.clone();
        if a.kind == AtomKind::AsymmetricKey {
            a.inverse = !a.inverse;
        }
        a
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        match self.session {
            Some(Session::Symbolic) => f.write_str("^i")?,
            Some(Session::Id(n)) => write!(f, "^{n}")?,
            None => {}
        }
        if self.inverse {
            f.write_str("^-1")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Var {
    pub name: String,
    /// Generalized role the variable belongs to.
    pub scope: String,
}

impl Var {
    pub fn new(name: impl Into<String>, scope: impl Into<String>) -> Self {
        Var {
            name: name.into(),
            scope: scope.into(),
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    Atom(Atom),
    Var(Var),
    Enc(Box<Term>, Box<Term>),
    Pair(Box<Term>, Box<Term>),
    Inv(Box<Term>),
    Dec(Box<Term>, Box<Term>),
    Fst(Box<Term>),
    Snd(Box<Term>),
}

impl From<Atom> for Term {
    fn from(a: Atom) -> Self {
        Term::Atom(a)
    }
}

impl From<Var> for Term {
    fn from(v: Var) -> Self {
        Term::Var(v)
    }
}

impl Term {
    pub fn pair(a: impl Into<Term>, b: impl Into<Term>) -> Term {
        Term::Pair(Box::new(a.into()), Box::new(b.into()))
    }

    pub fn enc(body: impl Into<Term>, key: impl Into<Term>) -> Term {
        Term::Enc(Box::new(body.into()), Box::new(key.into()))
    }

    pub fn inv(key: impl Into<Term>) -> Term {
        Term::Inv(Box::new(key.into()))
    }

    pub fn dec(cipher: impl Into<Term>, key: impl Into<Term>) -> Term {
        Term::Dec(Box::new(cipher.into()), Box::new(key.into()))
    }

    pub fn fst(t: impl Into<Term>) -> Term {
        Term::Fst(Box::new(t.into()))
    }

    pub fn snd(t: impl Into<Term>) -> Term {
        Term::Snd(Box::new(t.into()))
    }

    /// Right-nested pairing of a non-empty sequence.
    pub fn tuple(items: impl IntoIterator<Item = Term>) -> Option<Term> {
        let mut items: Vec<Term> = items.into_iter().collect();
        let mut acc = items.pop()?;
        while let Some(t) = items.pop() {
            acc = Term::pair(t, acc);
        }
        Some(acc)
    }

    pub fn as_atom(&self) -> Option<&Atom> {
        match self {
            Term::Atom(a) => Some(a),
            _ => None,
        }
    }

    fn children(&self) -> impl Iterator<Item = &Term> {
        let (a, b): (Option<&Term>, Option<&Term>) = match self {
            Term::Atom(_) | Term::Var(_) => (None, None),
            Term::Enc(x, y) | Term::Pair(x, y) | Term::Dec(x, y) => (Some(x), Some(y)),
            Term::Inv(x) | Term::Fst(x) | Term::Snd(x) => (Some(x), None),
        };
        a.into_iter().chain(b)
    }

    /// Atoms and variables have depth 1; every constructor adds one level.
    pub fn depth(&self) -> usize {
        1 + self.children().map(Term::depth).max().unwrap_or(0)
    }

    pub fn size(&self) -> usize {
        1 + self.children().map(Term::size).sum::<usize>()
    }

    pub fn is_closed(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Atom(_) => true,
            _ => self.children().all(Term::is_closed),
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            _ => self.children().for_each(|c| c.collect_vars(out)),
        }
    }

    /// The atom leaves of the term. Variables contribute nothing.
    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<Atom>) {
        match self {
            Term::Atom(a) => {
                out.insert(a.clone());
            }
            _ => self.children().for_each(|c| c.collect_atoms(out)),
        }
    }

    pub fn contains_atom(&self, atom: &Atom) -> bool {
        match self {
            Term::Atom(a) => a == atom,
            _ => self.children().any(|c| c.contains_atom(atom)),
        }
    }

    /// Rewrites every atom leaf; the result is renormalized.
    pub fn map_atoms(&self, f: &impl Fn(&Atom) -> Atom) -> Term {
        let mapped = self.map_leaves(&|t| match t {
            Term::Atom(a) => Some(Term::Atom(f(a))),
            _ => None,
        });
        normalize_lenient(&mapped)
    }

    /// Homomorphic rewrite: `f` may replace any subterm (tried top-down).
    pub fn map_leaves(&self, f: &impl Fn(&Term) -> Option<Term>) -> Term {
        if let Some(t) = f(self) {
            return t;
        }
        match self {
            Term::Atom(_) | Term::Var(_) => self.clone(),
            Term::Enc(a, b) => Term::enc(a.map_leaves(f), b.map_leaves(f)),
            Term::Pair(a, b) => Term::pair(a.map_leaves(f), b.map_leaves(f)),
            Term::Dec(a, b) => Term::dec(a.map_leaves(f), b.map_leaves(f)),
            Term::Inv(a) => Term::inv(a.map_leaves(f)),
            Term::Fst(a) => Term::fst(a.map_leaves(f)),
            Term::Snd(a) => Term::snd(a.map_leaves(f)),
        }
    }

    /// All subterms, the term itself included, in pre-order.
    pub fn subterms(&self) -> Vec<&Term> {
        let mut out = vec![self];
        let mut i = 0;
        while i < out.len() {
            let t = out[i];
            out.extend(t.children());
            i += 1;
        }
        out
    }
}

/// The key that undoes encryption under `key`.
pub fn inverse_key(key: &Term) -> Term {
    match key {
        Term::Atom(a) => Term::Atom(a.inverse_key()),
        Term::Inv(k) => (**k).clone(),
        Term::Var(_) => Term::inv(key.clone()),
        // composite keys act symmetrically
        _ => key.clone(),
    }
}

/// Normal form modulo the equational theory.
pub fn normalize(t: &Term) -> Result<Term, TermError> {
    norm(t, true)
}

/// Like [`normalize`], but an ill-kinded `Inv` is left in place instead of failing.
pub fn normalize_lenient(t: &Term) -> Term {
    norm(t, false).expect("lenient normalization is total")
}

fn norm(t: &Term, strict: bool) -> Result<Term, TermError> {
    Ok(match t {
        Term::Atom(_) | Term::Var(_) => t.clone(),
        Term::Pair(a, b) => Term::pair(norm(a, strict)?, norm(b, strict)?),
        Term::Enc(a, b) => Term::enc(norm(a, strict)?, norm(b, strict)?),
        Term::Inv(k) => {
            let k = norm(k, strict)?;
            match k {
                Term::Atom(ref a) if a.kind.is_key() => Term::Atom(a.inverse_key()),
                Term::Inv(inner) => *inner,
                Term::Var(_) | Term::Dec(..) | Term::Fst(_) | Term::Snd(_) => Term::inv(k),
                other if strict => return Err(TermError::KindError(other.to_string())),
                other => Term::inv(other),
            }
        }
        Term::Dec(c, k) => {
            let c = norm(c, strict)?;
            let k = norm(k, strict)?;
            match c {
                Term::Enc(body, key) if inverse_key(&key) == k => *body,
                c => Term::dec(c, k),
            }
        }
        Term::Fst(p) => match norm(p, strict)? {
            Term::Pair(a, _) => *a,
            p => Term::fst(p),
        },
        Term::Snd(p) => match norm(p, strict)? {
            Term::Pair(_, b) => *b,
            p => Term::snd(p),
        },
    })
}

/// Atoms of a set of terms.
pub fn atoms_of<'a>(terms: impl IntoIterator<Item = &'a Term>) -> BTreeSet<Atom> {
    let mut out = BTreeSet::new();
    for t in terms {
        t.collect_atoms(&mut out);
    }
    out
}

/// Finite map from variables to closed, normalized terms.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Substitution {
    bindings: BTreeMap<Var, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, var: Var, value: &Term) -> Result<(), TermError> {
        if !value.is_closed() {
            return Err(TermError::OpenBinding(value.to_string()));
        }
        self.bindings.insert(var, normalize_lenient(value));
        Ok(())
    }

    pub fn with(mut self, var: Var, value: &Term) -> Result<Self, TermError> {
        self.bind(var, value)?;
        Ok(self)
    }

    pub fn get(&self, var: &Var) -> Option<&Term> {
        self.bindings.get(var)
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Term)> {
        self.bindings.iter()
    }

    /// Homomorphic replacement followed by normalization. Unbound variables stay.
    pub fn apply(&self, t: &Term) -> Term {
        if self.bindings.is_empty() {
            return normalize_lenient(t);
        }
        let replaced = t.map_leaves(&|s| match s {
            Term::Var(v) => self.bindings.get(v).cloned(),
            _ => None,
        });
        normalize_lenient(&replaced)
    }

    /// Union of two substitutions; `None` when they disagree on a shared variable.
    pub fn merge(&self, other: &Substitution) -> Option<Substitution> {
        let mut out = self.clone();
        for (v, t) in other.iter() {
            match out.bindings.get(v) {
                Some(existing) if existing != t => return None,
                _ => {
                    out.bindings.insert(v.clone(), t.clone());
                }
            }
        }
        Some(out)
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, t)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v} -> {t}")?;
        }
        f.write_str("}")
    }
}

/// One-way syntactic matching of `pattern` against a closed, normalized `ground`.
pub fn match_term(pattern: &Term, ground: &Term) -> Option<Substitution> {
    match_with(pattern, ground, &Substitution::new())
}

/// Matching that extends an existing substitution.
pub fn match_with(pattern: &Term, ground: &Term, base: &Substitution) -> Option<Substitution> {
    let pattern = base.apply(pattern);
    let mut sigma = base.clone();
    if !match_into(&pattern, ground, &mut sigma) {
        return None;
    }
    // Inv patterns are matched through the inverse; confirm by replay.
    (sigma.apply(&pattern) == *ground).then_some(sigma)
}

fn match_into(p: &Term, g: &Term, sigma: &mut Substitution) -> bool {
    match (p, g) {
        (Term::Var(v), _) => match sigma.get(v) {
            Some(bound) => bound == g,
            None => {
                if !g.is_closed() {
                    return false;
                }
                sigma.bindings.insert(v.clone(), g.clone());
                true
            }
        },
        (Term::Atom(a), Term::Atom(b)) => a == b,
        (Term::Pair(a1, b1), Term::Pair(a2, b2)) | (Term::Enc(a1, b1), Term::Enc(a2, b2)) => {
            match_into(a1, a2, sigma) && match_into(b1, b2, sigma)
        }
        (Term::Inv(k), Term::Atom(a)) if a.kind.is_key() => {
            match_into(k, &Term::Atom(a.inverse_key()), sigma)
        }
        _ => p == g,
    }
}

fn needs_parens_as_left(t: &Term) -> bool {
    matches!(t, Term::Pair(..))
}

fn fmt_key(k: &Term, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match k {
        Term::Pair(..) => write!(f, "({k})"),
        _ => write!(f, "{k}"),
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Atom(a) => write!(f, "{a}"),
            Term::Var(v) => write!(f, "{v}"),
            Term::Pair(a, b) => {
                if needs_parens_as_left(a) {
                    write!(f, "({a}).{b}")
                } else {
                    write!(f, "{a}.{b}")
                }
            }
            Term::Enc(body, key) => {
                write!(f, "{{{body}}}")?;
                fmt_key(key, f)
            }
            Term::Inv(k) => match **k {
                Term::Atom(_) | Term::Var(_) | Term::Inv(_) => write!(f, "{k}^-1"),
                _ => write!(f, "({k})^-1"),
            },
            Term::Dec(c, k) => write!(f, "dec({c}, {k})"),
            Term::Fst(p) => write!(f, "fst({p})"),
            Term::Snd(p) => write!(f, "snd({p})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(n: &str) -> Atom {
        Atom::new(n, AtomKind::SymmetricKey)
    }
    fn nonce(n: &str) -> Atom {
        Atom::new(n, AtomKind::Nonce)
    }

    #[test]
    fn decryption_redex_reduces() {
        let s = nonce("s");
        let k = sym("k");
        let t = Term::dec(Term::enc(s.clone(), k.clone()), Term::inv(k));
        assert_eq!(normalize(&t).unwrap(), Term::Atom(s));
    }

    #[test]
    fn normal_atom_is_untouched() {
        let a = Term::Atom(Atom::new("A", AtomKind::Principal));
        assert_eq!(normalize(&a).unwrap(), a);
    }

    #[test]
    fn double_inverse_cancels() {
        let kas = sym("kas");
        assert_eq!(
            normalize(&Term::inv(Term::inv(kas.clone()))).unwrap(),
            Term::Atom(kas)
        );
        let pk = Atom::new("pk", AtomKind::AsymmetricKey);
        let once = normalize(&Term::inv(pk.clone())).unwrap();
        assert_eq!(once, Term::Atom(pk.inverse_key()));
        assert_eq!(normalize(&Term::inv(once)).unwrap(), Term::Atom(pk));
    }

    #[test]
    fn inverse_of_pair_is_a_kind_error() {
        let t = Term::inv(Term::pair(nonce("a"), nonce("b")));
        assert!(matches!(normalize(&t), Err(TermError::KindError(_))));
        assert!(matches!(
            normalize(&Term::inv(nonce("a"))),
            Err(TermError::KindError(_))
        ));
    }

    #[test]
    fn asymmetric_decryption_needs_the_partner() {
        let pk = Atom::new("pk", AtomKind::AsymmetricKey);
        let s = nonce("s");
        let c = Term::enc(s.clone(), pk.clone());
        assert_eq!(
            normalize(&Term::dec(c.clone(), Term::inv(pk.clone()))).unwrap(),
            Term::Atom(s)
        );
        let stuck = normalize(&Term::dec(c.clone(), pk)).unwrap();
        assert!(matches!(stuck, Term::Dec(..)));
    }

    #[test]
    fn atoms_of_examples() {
        let nb = nonce("Nb");
        let kab = sym("kab");
        let kas = sym("kas");
        let t = Term::enc(Term::pair(nb.clone(), kab.clone()), kas.clone());
        assert_eq!(t.atoms(), [nb, kab, kas].into_iter().collect());
        assert!(Term::Var(Var::new("X", "r")).atoms().is_empty());
        let a = Atom::new("A", AtomKind::Principal);
        assert_eq!(Term::pair(a.clone(), a.clone()).atoms().len(), 1);
    }

    #[test]
    fn apply_examples() {
        let x = Var::new("X", "A_G^2");
        let nb = nonce("Nb");
        let kab = sym("kab");
        let kas = sym("kas");
        let sigma = Substitution::new().with(x.clone(), &nb.clone().into()).unwrap();
        let t = Term::enc(Term::pair(x.clone(), kab.clone()), kas.clone());
        assert_eq!(
            sigma.apply(&t),
            Term::enc(Term::pair(nb.clone(), kab.clone()), kas.clone())
        );

        let closed = Term::enc(nb.clone(), kas.clone());
        assert_eq!(Substitution::new().apply(&closed), closed);

        let s = nonce("s");
        let k = sym("k");
        let sigma = Substitution::new()
            .with(x.clone(), &Term::enc(s.clone(), k.clone()))
            .unwrap();
        assert_eq!(
            sigma.apply(&Term::dec(x, Term::inv(k))),
            Term::Atom(s)
        );
    }

    #[test]
    fn match_examples() {
        let y = Var::new("Y", "B_G^2");
        let nb = nonce("Nb");
        let kab = sym("kab");
        let kbs = sym("kbs");
        let ground = Term::enc(Term::pair(nb.clone(), kab.clone()), kbs.clone());
        let sigma = match_term(&Term::enc(y.clone(), kbs.clone()), &ground).unwrap();
        assert_eq!(sigma.get(&y), Some(&Term::pair(nb.clone(), kab)));
        assert_eq!(sigma.len(), 1);

        let a = Term::Atom(Atom::new("A", AtomKind::Principal));
        assert!(match_term(&a, &a).unwrap().is_empty());

        let x = Var::new("X", "r");
        let na = nonce("Na");
        assert!(match_term(
            &Term::pair(x.clone(), x.clone()),
            &Term::pair(nb, na)
        )
        .is_none());
    }

    #[test]
    fn inverse_pattern_matches_private_key() {
        let x = Var::new("X", "r");
        let pk = Atom::new("pk", AtomKind::AsymmetricKey);
        let sigma = match_term(&Term::inv(x.clone()), &Term::Atom(pk.inverse_key())).unwrap();
        assert_eq!(sigma.get(&x), Some(&Term::Atom(pk)));
    }

    #[test]
    fn display_uses_concrete_syntax() {
        let pk = Atom::new("pk", AtomKind::AsymmetricKey);
        let kab = Atom::fresh("kab", AtomKind::SymmetricKey).in_session(Session::Symbolic);
        let t = Term::enc(
            Term::pair(Term::pair(nonce("a"), nonce("b")), kab),
            Term::inv(pk),
        );
        assert_eq!(t.to_string(), "{(a.b).kab^i}pk^-1");
        let nested = Term::enc(nonce("a"), Term::pair(nonce("k1"), nonce("k2")));
        assert_eq!(nested.to_string(), "{a}(k1.k2)");
    }
}
