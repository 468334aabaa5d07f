//! Formula syntax: abstract syntax tree, concrete-syntax parser and printer,
//! subformula machinery, and the rewrites that bring formulas into the
//! diamond/E core handled by the decision procedure.
//!
//! Concrete syntax: propositions are lowercase identifiers (`p`, `q1`),
//! nominals are quoted (`'i`), and the operators are `~`, `&`, `|`, `->`,
//! `[]`, `<>`, `@'i`, `E`, `A`. Unary operators bind tightest, `&` binds
//! over `|` over `->`, and the binary connectives associate to the right.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

/// Formulas of the hybrid language. Propositions and nominals live in
/// disjoint namespaces: `Prop("i")` and `Nom("i")` are unrelated atoms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    Prop(String),
    Nom(String),
    Neg(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Impl(Box<Formula>, Box<Formula>),
    /// Closure modality: true where every open neighborhood meets the body.
    Dia(Box<Formula>),
    /// Interior modality: true where some open neighborhood satisfies the body.
    Box(Box<Formula>),
    /// Jump to the point named by the nominal.
    At(String, Box<Formula>),
    /// Global existential modality.
    E(Box<Formula>),
    /// Global universal modality.
    A(Box<Formula>),
}

/// Formula sets are kept in canonical structural order; no simplification
/// (not even double negation) is ever applied to members.
pub type FormulaSet = BTreeSet<Formula>;

impl Formula {
    pub fn prop(name: impl Into<String>) -> Self {
        Formula::Prop(name.into())
    }
    pub fn nom(name: impl Into<String>) -> Self {
        Formula::Nom(name.into())
    }
    pub fn neg(f: Formula) -> Self {
        Formula::Neg(Box::new(f))
    }
    pub fn and(l: Formula, r: Formula) -> Self {
        Formula::And(Box::new(l), Box::new(r))
    }
    pub fn or(l: Formula, r: Formula) -> Self {
        Formula::Or(Box::new(l), Box::new(r))
    }
    pub fn impl_(l: Formula, r: Formula) -> Self {
        Formula::Impl(Box::new(l), Box::new(r))
    }
    pub fn dia(f: Formula) -> Self {
        Formula::Dia(Box::new(f))
    }
    pub fn box_(f: Formula) -> Self {
        Formula::Box(Box::new(f))
    }
    pub fn at(name: impl Into<String>, f: Formula) -> Self {
        Formula::At(name.into(), Box::new(f))
    }
    pub fn e(f: Formula) -> Self {
        Formula::E(Box::new(f))
    }
    pub fn a(f: Formula) -> Self {
        Formula::A(Box::new(f))
    }

    /// Immediate subformulas. For `@'i f` this includes the nominal `'i`
    /// itself, so closures always record every name the formula mentions.
    fn immediate(&self) -> Vec<Formula> {
        match self {
            Formula::Prop(_) | Formula::Nom(_) => vec![],
            Formula::Neg(g)
            | Formula::Dia(g)
            | Formula::Box(g)
            | Formula::E(g)
            | Formula::A(g) => vec![(**g).clone()],
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Impl(l, r) => {
                vec![(**l).clone(), (**r).clone()]
            }
            Formula::At(i, g) => vec![Formula::nom(i.clone()), (**g).clone()],
        }
    }

    /// True when the formula contains no `@` operator.
    pub fn is_at_free(&self) -> bool {
        match self {
            Formula::At(_, _) => false,
            Formula::Prop(_) | Formula::Nom(_) => true,
            Formula::Neg(g) | Formula::Dia(g) | Formula::Box(g) | Formula::E(g) | Formula::A(g) => {
                g.is_at_free()
            }
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Impl(l, r) => {
                l.is_at_free() && r.is_at_free()
            }
        }
    }

    /// True when the formula mentions no nominal (neither `'i` nor `@'i`).
    pub fn is_nominal_free(&self) -> bool {
        self.nominals().is_empty()
    }

    /// True for formulas built from propositions, nominals, `~`, `&`, `<>`
    /// and `E` only: the shape the satisfiability game works on.
    pub fn is_core(&self) -> bool {
        match self {
            Formula::Prop(_) | Formula::Nom(_) => true,
            Formula::Neg(g) | Formula::Dia(g) | Formula::E(g) => g.is_core(),
            Formula::And(l, r) => l.is_core() && r.is_core(),
            _ => false,
        }
    }

    /// All nominal names occurring anywhere in the formula.
    pub fn nominals(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_nominals(&mut out);
        out
    }

    fn collect_nominals(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::Prop(_) => {}
            Formula::Nom(i) => {
                out.insert(i.clone());
            }
            Formula::Neg(g) | Formula::Dia(g) | Formula::Box(g) | Formula::E(g) | Formula::A(g) => {
                g.collect_nominals(out)
            }
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Impl(l, r) => {
                l.collect_nominals(out);
                r.collect_nominals(out);
            }
            Formula::At(i, g) => {
                out.insert(i.clone());
                g.collect_nominals(out);
            }
        }
    }

    /// All proposition names occurring in the formula.
    pub fn props(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_props(&mut out);
        out
    }

    fn collect_props(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::Prop(p) => {
                out.insert(p.clone());
            }
            Formula::Nom(_) => {}
            Formula::Neg(g)
            | Formula::Dia(g)
            | Formula::Box(g)
            | Formula::E(g)
            | Formula::A(g)
            | Formula::At(_, g) => g.collect_props(out),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Impl(l, r) => {
                l.collect_props(out);
                r.collect_props(out);
            }
        }
    }

    /// Number of connectives (everything except bare atoms).
    pub fn connective_count(&self) -> usize {
        match self {
            Formula::Prop(_) | Formula::Nom(_) => 0,
            Formula::Neg(g)
            | Formula::Dia(g)
            | Formula::Box(g)
            | Formula::E(g)
            | Formula::A(g)
            | Formula::At(_, g) => 1 + g.connective_count(),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Impl(l, r) => {
                1 + l.connective_count() + r.connective_count()
            }
        }
    }
}

/// All subformulas of `f`, including `f` itself.
pub fn subformula_closure(f: &Formula) -> FormulaSet {
    let mut out = FormulaSet::new();
    let mut stack = vec![f.clone()];
    while let Some(g) = stack.pop() {
        if out.contains(&g) {
            continue;
        }
        stack.extend(g.immediate());
        out.insert(g);
    }
    out
}

/// Closes `s` under single negation: adds `~g` for every non-negation
/// member and the body of every negation member. Expects (but does not
/// insist) that `s` is already subformula-closed.
pub fn negation_closure(s: &FormulaSet) -> FormulaSet {
    let mut out = s.clone();
    for g in s {
        match g {
            Formula::Neg(h) => {
                out.insert((**h).clone());
            }
            other => {
                out.insert(Formula::neg(other.clone()));
            }
        }
    }
    out
}

/// Rewrites every `@'i g` into `E('i & g)`. The result is `@`-free and
/// agrees with the input at every point of every model.
pub fn eliminate_at(f: &Formula) -> Formula {
    match f {
        Formula::Prop(_) | Formula::Nom(_) => f.clone(),
        Formula::Neg(g) => Formula::neg(eliminate_at(g)),
        Formula::And(l, r) => Formula::and(eliminate_at(l), eliminate_at(r)),
        Formula::Or(l, r) => Formula::or(eliminate_at(l), eliminate_at(r)),
        Formula::Impl(l, r) => Formula::impl_(eliminate_at(l), eliminate_at(r)),
        Formula::Dia(g) => Formula::dia(eliminate_at(g)),
        Formula::Box(g) => Formula::box_(eliminate_at(g)),
        Formula::At(i, g) => Formula::e(Formula::and(Formula::nom(i.clone()), eliminate_at(g))),
        Formula::E(g) => Formula::e(eliminate_at(g)),
        Formula::A(g) => Formula::a(eliminate_at(g)),
    }
}

/// Rewrites an `@`-free formula into the diamond/E core: `[] g` becomes
/// `~<>~g`, `A g` becomes `~E~g`, and `|`/`->` are expressed with `~`, `&`.
pub fn normalize_to_diamond(f: &Formula) -> Result<Formula> {
    match f {
        Formula::Prop(_) | Formula::Nom(_) => Ok(f.clone()),
        Formula::Neg(g) => Ok(Formula::neg(normalize_to_diamond(g)?)),
        Formula::And(l, r) => Ok(Formula::and(
            normalize_to_diamond(l)?,
            normalize_to_diamond(r)?,
        )),
        Formula::Or(l, r) => {
            let l = normalize_to_diamond(l)?;
            let r = normalize_to_diamond(r)?;
            Ok(Formula::neg(Formula::and(Formula::neg(l), Formula::neg(r))))
        }
        Formula::Impl(l, r) => {
            let l = normalize_to_diamond(l)?;
            let r = normalize_to_diamond(r)?;
            Ok(Formula::neg(Formula::and(l, Formula::neg(r))))
        }
        Formula::Dia(g) => Ok(Formula::dia(normalize_to_diamond(g)?)),
        Formula::Box(g) => Ok(Formula::neg(Formula::dia(Formula::neg(
            normalize_to_diamond(g)?,
        )))),
        Formula::At(_, _) => Err(Error::Precondition(
            "normalize_to_diamond expects an @-free formula; run eliminate_at first".into(),
        )),
        Formula::E(g) => Ok(Formula::e(normalize_to_diamond(g)?)),
        Formula::A(g) => Ok(Formula::neg(Formula::e(Formula::neg(normalize_to_diamond(
            g,
        )?)))),
    }
}

/// `eliminate_at` followed by `normalize_to_diamond`: the preprocessing
/// every decision entry point applies.
pub fn to_core(f: &Formula) -> Formula {
    normalize_to_diamond(&eliminate_at(f)).expect("eliminate_at leaves no @ behind")
}

// ---------------------------------------------------------------------------
// Printing

fn prec(f: &Formula) -> u8 {
    match f {
        Formula::Impl(_, _) => 1,
        Formula::Or(_, _) => 2,
        Formula::And(_, _) => 3,
        Formula::Neg(_)
        | Formula::Dia(_)
        | Formula::Box(_)
        | Formula::At(_, _)
        | Formula::E(_)
        | Formula::A(_) => 4,
        Formula::Prop(_) | Formula::Nom(_) => 5,
    }
}

fn write_prec(f: &Formula, min: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    let wrap = prec(f) < min;
    if wrap {
        write!(out, "(")?;
    }
    match f {
        Formula::Prop(p) => write!(out, "{p}")?,
        Formula::Nom(i) => write!(out, "'{i}")?,
        Formula::Neg(g) => {
            write!(out, "~")?;
            write_prec(g, 4, out)?;
        }
        Formula::And(l, r) => {
            write_prec(l, 4, out)?;
            write!(out, " & ")?;
            write_prec(r, 3, out)?;
        }
        Formula::Or(l, r) => {
            write_prec(l, 3, out)?;
            write!(out, " | ")?;
            write_prec(r, 2, out)?;
        }
        Formula::Impl(l, r) => {
            write_prec(l, 2, out)?;
            write!(out, " -> ")?;
            write_prec(r, 1, out)?;
        }
        Formula::Dia(g) => {
            write!(out, "<>")?;
            write_prec(g, 4, out)?;
        }
        Formula::Box(g) => {
            write!(out, "[]")?;
            write_prec(g, 4, out)?;
        }
        Formula::At(i, g) => {
            write!(out, "@'{i} ")?;
            write_prec(g, 4, out)?;
        }
        Formula::E(g) => {
            write!(out, "E ")?;
            write_prec(g, 4, out)?;
        }
        Formula::A(g) => {
            write!(out, "A ")?;
            write_prec(g, 4, out)?;
        }
    }
    if wrap {
        write!(out, ")")?;
    }
    Ok(())
}

impl fmt::Display for Formula {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_prec(self, 0, out)
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Nominal(String),
    Tilde,
    Amp,
    Pipe,
    Arrow,
    BoxTok,
    DiaTok,
    AtSign,
    CapE,
    CapA,
    LParen,
    RParen,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_lowercase() || c == '_'
}

fn is_ident_cont(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn lex(input: &str) -> Result<Vec<(usize, Tok)>> {
    let mut toks = Vec::new();
    let bytes = input.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '~' => {
                toks.push((i, Tok::Tilde));
                i += 1;
            }
            '&' => {
                toks.push((i, Tok::Amp));
                i += 1;
            }
            '|' => {
                toks.push((i, Tok::Pipe));
                i += 1;
            }
            '(' => {
                toks.push((i, Tok::LParen));
                i += 1;
            }
            ')' => {
                toks.push((i, Tok::RParen));
                i += 1;
            }
            '@' => {
                toks.push((i, Tok::AtSign));
                i += 1;
            }
            '-' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    toks.push((i, Tok::Arrow));
                    i += 2;
                } else {
                    return Err(Error::Parse {
                        pos: i,
                        msg: "expected '->'".into(),
                    });
                }
            }
            '[' => {
                if bytes.get(i + 1) == Some(&b']') {
                    toks.push((i, Tok::BoxTok));
                    i += 2;
                } else {
                    return Err(Error::Parse {
                        pos: i,
                        msg: "expected '[]'".into(),
                    });
                }
            }
            '<' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    toks.push((i, Tok::DiaTok));
                    i += 2;
                } else {
                    return Err(Error::Parse {
                        pos: i,
                        msg: "expected '<>'".into(),
                    });
                }
            }
            '\'' => {
                let start = i + 1;
                let mut j = start;
                if j < bytes.len() && is_ident_start(bytes[j] as char) {
                    j += 1;
                    while j < bytes.len() && is_ident_cont(bytes[j] as char) {
                        j += 1;
                    }
                    toks.push((i, Tok::Nominal(input[start..j].to_string())));
                    i = j;
                } else {
                    return Err(Error::Parse {
                        pos: i,
                        msg: "expected nominal name after '".into(),
                    });
                }
            }
            c if is_ident_start(c) => {
                let start = i;
                let mut j = i + 1;
                while j < bytes.len() && is_ident_cont(bytes[j] as char) {
                    j += 1;
                }
                toks.push((start, Tok::Ident(input[start..j].to_string())));
                i = j;
            }
            c if c.is_ascii_uppercase() => {
                let start = i;
                let mut j = i + 1;
                while j < bytes.len() && is_ident_cont(bytes[j] as char) {
                    j += 1;
                }
                match &input[start..j] {
                    "E" => toks.push((start, Tok::CapE)),
                    "A" => toks.push((start, Tok::CapA)),
                    other => {
                        return Err(Error::Parse {
                            pos: start,
                            msg: format!("unknown token '{other}'"),
                        })
                    }
                }
                i = j;
            }
            other => {
                return Err(Error::Parse {
                    pos: i,
                    msg: format!("unknown token '{other}'"),
                })
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    pos: usize,
    input_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|(p, _)| *p)
            .unwrap_or(self.input_len)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            pos: self.here(),
            msg: msg.into(),
        }
    }

    fn formula(&mut self) -> Result<Formula> {
        let lhs = self.or_level()?;
        if self.peek() == Some(&Tok::Arrow) {
            self.bump();
            let rhs = self.formula()?;
            Ok(Formula::impl_(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn or_level(&mut self) -> Result<Formula> {
        let lhs = self.and_level()?;
        if self.peek() == Some(&Tok::Pipe) {
            self.bump();
            let rhs = self.or_level()?;
            Ok(Formula::or(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn and_level(&mut self) -> Result<Formula> {
        let lhs = self.unary()?;
        if self.peek() == Some(&Tok::Amp) {
            self.bump();
            let rhs = self.and_level()?;
            Ok(Formula::and(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn unary(&mut self) -> Result<Formula> {
        match self.peek() {
            Some(Tok::Tilde) => {
                self.bump();
                Ok(Formula::neg(self.unary()?))
            }
            Some(Tok::BoxTok) => {
                self.bump();
                Ok(Formula::box_(self.unary()?))
            }
            Some(Tok::DiaTok) => {
                self.bump();
                Ok(Formula::dia(self.unary()?))
            }
            Some(Tok::CapE) => {
                self.bump();
                Ok(Formula::e(self.unary()?))
            }
            Some(Tok::CapA) => {
                self.bump();
                Ok(Formula::a(self.unary()?))
            }
            Some(Tok::AtSign) => {
                self.bump();
                match self.bump() {
                    Some(Tok::Nominal(i)) => Ok(Formula::at(i, self.unary()?)),
                    _ => Err(self.err("expected nominal after '@'")),
                }
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Formula> {
        match self.bump() {
            Some(Tok::Ident(p)) => Ok(Formula::prop(p)),
            Some(Tok::Nominal(i)) => Ok(Formula::nom(i)),
            Some(Tok::LParen) => {
                let f = self.formula()?;
                if self.bump() == Some(Tok::RParen) {
                    Ok(f)
                } else {
                    self.pos -= 1;
                    Err(self.err("unbalanced parenthesis: expected ')'"))
                }
            }
            Some(t) => {
                self.pos -= 1;
                Err(self.err(format!("unexpected token {t:?}")))
            }
            None => Err(self.err("unexpected end of input")),
        }
    }
}

/// Parses the concrete syntax. `parse(&f.to_string())` returns `f` again
/// for every formula.
pub fn parse(input: &str) -> Result<Formula> {
    let toks = lex(input)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        input_len: input.len(),
    };
    let f = p.formula()?;
    if p.pos != toks.len() {
        return Err(p.err("trailing input after formula"));
    }
    Ok(f)
}

impl std::str::FromStr for Formula {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Formula> {
        parse(s)
    }
}
