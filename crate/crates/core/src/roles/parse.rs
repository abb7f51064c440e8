//! Lexer and parser for the narration format.
//!
//! ```text
//! protocol woo-lam
//! agents A, B, S
//! intruder I
//! nonce Nb
//! symkey kab, kas, kbs, kis
//! fresh Nb @ B; fresh kab @ A
//! knows A = kas; knows B = kbs; knows S = kas, kbs
//! knows I = A, B, S, I, kis
//! level kab = {A,B,S}; level A, B, S, I, Nb = bot
//! 1. A -> B : A
//! 3. A -> B : {Nb.kab}kas
//! ```
//!
//! Statements end at a newline or `;`. Identifiers must be declared before use.

use super::{NarrationStep, ParseError, Protocol};
use crate::context::{Lattice, PowersetLattice, SecLevel, TypeKey};
use crate::term::{normalize, Atom, AtomKind, Session, Term, Var};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(u32),
    Dot,
    Comma,
    Semi,
    Colon,
    Eq,
    At,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Arrow,
    Caret,
    Minus,
    Newline,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Num(n) => format!("`{n}`"),
            Tok::Newline => "end of line".into(),
            Tok::Eof => "end of input".into(),
            other => {
                let s = match other {
                    Tok::Dot => ".",
                    Tok::Comma => ",",
                    Tok::Semi => ";",
                    Tok::Colon => ":",
                    Tok::Eq => "=",
                    Tok::At => "@",
                    Tok::LBrace => "{",
                    Tok::RBrace => "}",
                    Tok::LParen => "(",
                    Tok::RParen => ")",
                    Tok::Arrow => "->",
                    Tok::Caret => "^",
                    _ => "-",
                };
                format!("`{s}`")
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let pos = Pos {
                line: ln + 1,
                col: i + 1,
            };
            if c == '#' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c.is_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
                continue;
            }
            if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let n = s.parse().map_err(|_| ParseError::Syntax {
                    line: pos.line,
                    col: pos.col,
                    msg: format!("number `{s}` out of range"),
                })?;
                out.push((Tok::Num(n), pos));
                continue;
            }
            let tok = match c {
                '.' => Tok::Dot,
                ',' => Tok::Comma,
                ';' => Tok::Semi,
                ':' => Tok::Colon,
                '=' => Tok::Eq,
                '@' => Tok::At,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '^' => Tok::Caret,
                '-' if chars.get(i + 1) == Some(&'>') => {
                    i += 1;
                    Tok::Arrow
                }
                '-' => Tok::Minus,
                _ => {
                    return Err(ParseError::Syntax {
                        line: pos.line,
                        col: pos.col,
                        msg: format!("unexpected character `{c}`"),
                    })
                }
            };
            out.push((tok, pos));
            i += 1;
        }
        out.push((
            Tok::Newline,
            Pos {
                line: ln + 1,
                col: chars.len() + 1,
            },
        ));
    }
    let end = out.last().map_or(Pos { line: 1, col: 1 }, |(_, p)| *p);
    out.push((Tok::Eof, end));
    Ok(out)
}

/// Identifier resolution for terms.
pub(crate) struct Scope<'a> {
    pub atoms: &'a BTreeMap<String, Atom>,
    pub vars: BTreeMap<String, Var>,
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.i].clone();
        if self.i < self.toks.len() - 1 {
            self.i += 1;
        }
        t
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        let p = self.pos();
        ParseError::Syntax {
            line: p.line,
            col: p.col,
            msg: msg.into(),
        }
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        self.error(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<Pos, ParseError> {
        if *self.peek() == tok {
            Ok(self.bump().1)
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let p = self.bump().1;
                Ok((s, p))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn ident_list(&mut self) -> Result<Vec<(String, Pos)>, ParseError> {
        let mut out = vec![self.ident()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            out.push(self.ident()?);
        }
        Ok(out)
    }

    fn end_of_statement(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Newline | Tok::Semi => {
                self.bump();
                Ok(())
            }
            Tok::Eof => Ok(()),
            _ => Err(self.unexpected("end of statement")),
        }
    }

    // term := unary (('.' | ',' when bracketed) term)?
    fn term(&mut self, scope: &Scope, bracketed: bool) -> Result<Term, ParseError> {
        let left = self.unary(scope)?;
        let sep = match self.peek() {
            Tok::Dot => true,
            Tok::Comma => bracketed,
            _ => false,
        };
        if sep {
            self.bump();
            let right = self.term(scope, bracketed)?;
            Ok(Term::pair(left, right))
        } else {
            Ok(left)
        }
    }

    fn unary(&mut self, scope: &Scope) -> Result<Term, ParseError> {
        let mut t = self.primary(scope)?;
        while *self.peek() == Tok::Caret {
            let caret = self.pos();
            self.bump();
            match self.peek().clone() {
                Tok::Minus => {
                    self.bump();
                    if *self.peek() != Tok::Num(1) {
                        return Err(self.unexpected("`1` after `^-`"));
                    }
                    self.bump();
                    t = normalize(&Term::inv(t)).map_err(|e| ParseError::Syntax {
                        line: caret.line,
                        col: caret.col,
                        msg: e.to_string(),
                    })?;
                }
                Tok::Ident(ref s) if s == "i" => {
                    self.bump();
                    t = with_session(t, Session::Symbolic, caret)?;
                }
                Tok::Num(n) => {
                    self.bump();
                    t = with_session(t, Session::Id(n), caret)?;
                }
                _ => return Err(self.unexpected("`-1`, `i` or a session number after `^`")),
            }
        }
        Ok(t)
    }

    fn primary(&mut self, scope: &Scope) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::LBrace => {
                self.bump();
                let body = self.term(scope, true)?;
                self.expect(Tok::RBrace, "`}`")?;
                let key = self.unary(scope)?;
                Ok(Term::enc(body, key))
            }
            Tok::LParen => {
                self.bump();
                let t = self.term(scope, true)?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            Tok::Ident(name) => {
                let pos = self.bump().1;
                if matches!(name.as_str(), "dec" | "fst" | "snd") && *self.peek() == Tok::LParen {
                    self.bump();
                    let a = self.term(scope, false)?;
                    let t = if name == "dec" {
                        self.expect(Tok::Comma, "`,`")?;
                        let k = self.term(scope, false)?;
                        Term::dec(a, k)
                    } else if name == "fst" {
                        Term::fst(a)
                    } else {
                        Term::snd(a)
                    };
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(t);
                }
                if let Some(v) = scope.vars.get(&name) {
                    return Ok(Term::Var(v.clone()));
                }
                match scope.atoms.get(&name) {
                    Some(a) => Ok(Term::Atom(a.clone())),
                    None => Err(ParseError::UndeclaredIdentifier {
                        name,
                        line: pos.line,
                        col: pos.col,
                    }),
                }
            }
            _ => Err(self.unexpected("a term")),
        }
    }

    fn level(&mut self, agents: &PowersetLattice) -> Result<SecLevel, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "bot" => {
                self.bump();
                Ok(agents.bot())
            }
            Tok::Ident(s) if s == "top" => {
                self.bump();
                Ok(agents.top())
            }
            Tok::LBrace => {
                self.bump();
                let mut names = BTreeSet::new();
                if *self.peek() != Tok::RBrace {
                    for (n, p) in self.ident_list()? {
                        if !agents.agents().contains(&n) {
                            return Err(ParseError::UndeclaredIdentifier {
                                name: n,
                                line: p.line,
                                col: p.col,
                            });
                        }
                        names.insert(n);
                    }
                }
                self.expect(Tok::RBrace, "`}`")?;
                Ok(SecLevel(names))
            }
            _ => Err(self.unexpected("`{...}`, `bot` or `top`")),
        }
    }
}

fn with_session(t: Term, s: Session, at: Pos) -> Result<Term, ParseError> {
    match t {
        Term::Atom(a) if a.fresh && a.session.is_none() && !a.inverse => {
            Ok(Term::Atom(a.in_session(s)))
        }
        other => Err(ParseError::Syntax {
            line: at.line,
            col: at.col,
            msg: format!("session exponent on `{other}`, which is not a fresh atom"),
        }),
    }
}

fn semantic(p: Pos, msg: impl Into<String>) -> ParseError {
    ParseError::Semantic {
        line: p.line,
        msg: msg.into(),
    }
}

pub(crate) fn parse(text: &str) -> Result<Protocol, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        i: 0,
    };
    let mut name: Option<String> = None;
    let mut agents: Vec<String> = Vec::new();
    let mut intruder: Option<String> = None;
    let mut atoms: BTreeMap<String, Atom> = BTreeMap::new();
    let mut used: BTreeSet<String> = BTreeSet::new();
    let mut fresh: BTreeMap<String, String> = BTreeMap::new();
    let mut knows: BTreeMap<String, Vec<Term>> = BTreeMap::new();
    let mut levels: BTreeMap<TypeKey, SecLevel> = BTreeMap::new();
    let mut steps: Vec<(NarrationStep, Pos)> = Vec::new();

    let lattice = |agents: &[String], intruder: &Option<String>| {
        PowersetLattice::new(agents.iter().cloned().chain(intruder.clone()))
    };

    loop {
        let start = p.pos();
        match p.peek().clone() {
            Tok::Eof => break,
            Tok::Newline | Tok::Semi => {
                p.bump();
                continue;
            }
            Tok::Num(index) => {
                p.bump();
                p.expect(Tok::Dot, "`.` after the step number")?;
                let (sender, sp) = p.ident()?;
                p.expect(Tok::Arrow, "`->`")?;
                let (receiver, rp) = p.ident()?;
                p.expect(Tok::Colon, "`:`")?;
                for (who, wp) in [(&sender, sp), (&receiver, rp)] {
                    if !agents.contains(who) {
                        if intruder.as_deref() == Some(who.as_str()) {
                            return Err(semantic(wp, "the intruder cannot be a protocol participant"));
                        }
                        return Err(ParseError::UndeclaredIdentifier {
                            name: who.clone(),
                            line: wp.line,
                            col: wp.col,
                        });
                    }
                }
                if sender == receiver {
                    return Err(semantic(start, format!("step {index}: sender and receiver are both {sender}")));
                }
                let scope = Scope {
                    atoms: &atoms,
                    vars: BTreeMap::new(),
                };
                let payload = p.term(&scope, false)?;
                if steps.iter().any(|(s, _)| s.index == index) {
                    return Err(ParseError::DuplicateStep {
                        index,
                        line: start.line,
                    });
                }
                used.extend(payload.atoms().into_iter().map(|a| a.name));
                steps.push((
                    NarrationStep {
                        index,
                        sender,
                        receiver,
                        payload,
                    },
                    start,
                ));
            }
            Tok::Ident(kw) => {
                p.bump();
                match kw.as_str() {
                    "protocol" => {
                        let mut n = String::new();
                        loop {
                            match p.peek().clone() {
                                Tok::Ident(s) => n.push_str(&s),
                                Tok::Num(k) => n.push_str(&k.to_string()),
                                Tok::Minus => n.push('-'),
                                _ => break,
                            }
                            p.bump();
                        }
                        if n.is_empty() {
                            return Err(p.unexpected("protocol name"));
                        }
                        if name.replace(n).is_some() {
                            return Err(semantic(start, "protocol name declared twice"));
                        }
                    }
                    "agents" => {
                        for (a, ap) in p.ident_list()? {
                            if atoms.contains_key(&a) {
                                return Err(semantic(ap, format!("`{a}` declared twice")));
                            }
                            atoms.insert(a.clone(), Atom::new(a.clone(), AtomKind::Principal));
                            agents.push(a);
                        }
                    }
                    "intruder" => {
                        let (a, ap) = p.ident()?;
                        if intruder.is_some() {
                            return Err(semantic(ap, "intruder declared twice"));
                        }
                        if atoms.contains_key(&a) {
                            return Err(semantic(ap, format!("`{a}` declared twice")));
                        }
                        atoms.insert(a.clone(), Atom::new(a.clone(), AtomKind::Principal));
                        intruder = Some(a);
                    }
                    "nonce" | "symkey" | "pubkey" | "const" => {
                        let kind = match kw.as_str() {
                            "nonce" => AtomKind::Nonce,
                            "symkey" => AtomKind::SymmetricKey,
                            "pubkey" => AtomKind::AsymmetricKey,
                            _ => AtomKind::Constant,
                        };
                        for (a, ap) in p.ident_list()? {
                            if matches!(a.as_str(), "dec" | "fst" | "snd" | "bot" | "top" | "i") {
                                return Err(semantic(ap, format!("`{a}` is reserved")));
                            }
                            if atoms.contains_key(&a) {
                                return Err(semantic(ap, format!("`{a}` declared twice")));
                            }
                            atoms.insert(a.clone(), Atom::new(a, kind));
                        }
                    }
                    "fresh" => {
                        let (a, ap) = p.ident()?;
                        p.expect(Tok::At, "`@`")?;
                        let (owner, op) = p.ident()?;
                        let Some(atom) = atoms.get_mut(&a) else {
                            return Err(ParseError::UndeclaredIdentifier {
                                name: a,
                                line: ap.line,
                                col: ap.col,
                            });
                        };
                        if atom.kind == AtomKind::Principal {
                            return Err(semantic(ap, format!("principal `{a}` cannot be fresh")));
                        }
                        if used.contains(&a) || fresh.contains_key(&a) {
                            return Err(semantic(ap, format!("fresh declaration of `{a}` must precede its uses")));
                        }
                        if !agents.contains(&owner) {
                            return Err(ParseError::UndeclaredIdentifier {
                                name: owner,
                                line: op.line,
                                col: op.col,
                            });
                        }
                        atom.fresh = true;
                        fresh.insert(a, owner);
                    }
                    "knows" => {
                        let (who, wp) = p.ident()?;
                        if !agents.contains(&who) && intruder.as_deref() != Some(who.as_str()) {
                            return Err(ParseError::UndeclaredIdentifier {
                                name: who,
                                line: wp.line,
                                col: wp.col,
                            });
                        }
                        p.expect(Tok::Eq, "`=`")?;
                        let scope = Scope {
                            atoms: &atoms,
                            vars: BTreeMap::new(),
                        };
                        let mut terms = vec![p.term(&scope, false)?];
                        while *p.peek() == Tok::Comma {
                            p.bump();
                            terms.push(p.term(&scope, false)?);
                        }
                        for t in &terms {
                            used.extend(t.atoms().into_iter().map(|a| a.name));
                        }
                        knows.entry(who).or_default().extend(terms);
                    }
                    "level" => {
                        let mut keys = Vec::new();
                        loop {
                            let (a, ap) = p.ident()?;
                            let Some(atom) = atoms.get(&a) else {
                                return Err(ParseError::UndeclaredIdentifier {
                                    name: a,
                                    line: ap.line,
                                    col: ap.col,
                                });
                            };
                            let mut atom = atom.clone();
                            if *p.peek() == Tok::Caret {
                                p.bump();
                                p.expect(Tok::Minus, "`-1`")?;
                                if *p.peek() != Tok::Num(1) {
                                    return Err(p.unexpected("`1`"));
                                }
                                p.bump();
                                if atom.kind != AtomKind::AsymmetricKey {
                                    return Err(semantic(ap, format!("`{a}` has no separate inverse")));
                                }
                                atom = atom.inverse_key();
                            }
                            keys.push(TypeKey::from(&atom));
                            if *p.peek() != Tok::Comma {
                                break;
                            }
                            p.bump();
                        }
                        p.expect(Tok::Eq, "`=`")?;
                        let level = p.level(&lattice(&agents, &intruder))?;
                        for k in keys {
                            levels.insert(k, level.clone());
                        }
                    }
                    other => {
                        return Err(ParseError::Syntax {
                            line: start.line,
                            col: start.col,
                            msg: format!("unknown statement `{other}`"),
                        })
                    }
                }
            }
            _ => return Err(p.unexpected("a statement")),
        }
        p.end_of_statement()?;
    }

    let eof = p.pos();
    let Some(name) = name else {
        return Err(ParseError::Syntax {
            line: eof.line,
            col: eof.col,
            msg: "missing `protocol` declaration".into(),
        });
    };
    let Some(intruder) = intruder else {
        return Err(ParseError::Syntax {
            line: eof.line,
            col: eof.col,
            msg: "missing `intruder` declaration".into(),
        });
    };
    if steps.is_empty() {
        return Err(ParseError::Syntax {
            line: eof.line,
            col: eof.col,
            msg: "the narration has no steps".into(),
        });
    }
    steps.sort_by_key(|(s, _)| s.index);
    for (k, (s, pos)) in steps.iter().enumerate() {
        if s.index as usize != k + 1 {
            return Err(semantic(*pos, format!("steps must be numbered 1..n, found {} at position {}", s.index, k + 1)));
        }
    }
    for (a, owner) in &fresh {
        let first = steps
            .iter()
            .find(|(s, _)| s.payload.atoms().iter().any(|x| &x.name == a));
        if let Some((s, pos)) = first {
            if &s.sender != owner {
                return Err(semantic(
                    *pos,
                    format!("fresh `{a}` belongs to {owner} but is first sent by {}", s.sender),
                ));
            }
        }
    }
    Protocol::assemble(
        name,
        agents,
        intruder,
        atoms,
        fresh,
        knows,
        levels,
        steps.into_iter().map(|(s, _)| s).collect(),
    )
}

/// Parses a single term; identifiers resolve to `vars` first, then to `atoms`.
pub(crate) fn parse_term(text: &str, scope: &Scope) -> Result<Term, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        i: 0,
    };
    while *p.peek() == Tok::Newline {
        p.bump();
    }
    let t = p.term(scope, true)?;
    while *p.peek() == Tok::Newline {
        p.bump();
    }
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected("end of term"));
    }
    Ok(t)
}
