use std::collections::BTreeSet;
use std::fmt::{self, Display, Formatter, Write};
use std::str::FromStr;

use serde::Serialize;

use crate::syntax::{alpha_normalize, parse_contract, Atom, Contract, Observable, SyntaxError};

/// Prefixes of channel types.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AbsAction {
    Atom(Atom),
    Tau,
    /// `tau?`: a silent step that may block.
    TauBlock,
    /// `tau[phi]`: a silent step guarded by an observable.
    TauObs(Observable),
    /// `<c>`: advertisement of a contract.
    Tell(Contract),
}

impl AbsAction {
    fn canon(&self) -> AbsAction {
        match self {
            AbsAction::Tell(c) => AbsAction::Tell(alpha_normalize(c)),
            a => a.clone(),
        }
    }
}

impl Display for AbsAction {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            AbsAction::Atom(a) => write!(f, "{a}"),
            AbsAction::Tau => f.write_str("tau"),
            AbsAction::TauBlock => f.write_str("tau?"),
            AbsAction::TauObs(Observable::NextIs(a)) => write!(f, "tau[{a}?]"),
            AbsAction::Tell(c) => write!(f, "<{c}>"),
        }
    }
}

/// Channel types: Basic Parallel Processes over [`AbsAction`] prefixes.
///
/// Sums and parallel compositions are n-ary. [`ChannelType::canon`] flattens
/// them, drops `0` operands, sorts them, and renames recursion binders by
/// nesting depth, so that terms equal up to the monoid laws and
/// α-conversion share one representative. Equality up to unfolding is
/// [`congruent`].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChannelType {
    Nil,
    Prefix(AbsAction, Box<ChannelType>),
    Sum(Vec<ChannelType>),
    Par(Vec<ChannelType>),
    Rec(String, Box<ChannelType>),
    Var(String),
}

impl ChannelType {
    pub fn prefix(a: AbsAction, t: ChannelType) -> ChannelType {
        ChannelType::Prefix(a, Box::new(t))
    }

    pub fn action(a: AbsAction) -> ChannelType {
        ChannelType::prefix(a, ChannelType::Nil)
    }

    pub fn sum(ts: Vec<ChannelType>) -> ChannelType {
        ChannelType::Sum(ts).canon()
    }

    pub fn par(ts: Vec<ChannelType>) -> ChannelType {
        ChannelType::Par(ts).canon()
    }

    pub fn rec(x: &str, body: ChannelType) -> ChannelType {
        ChannelType::Rec(x.to_string(), Box::new(body)).canon()
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, ChannelType::Nil)
    }

    /// The canonical representative of the term.
    pub fn canon(&self) -> ChannelType {
        fn flatten(
            ts: &[ChannelType],
            env: &mut Vec<(String, String)>,
            is_par: bool,
        ) -> Vec<ChannelType> {
            let mut out = Vec::new();
            for t in ts {
                match go(t, env) {
                    ChannelType::Nil => {}
                    ChannelType::Par(xs) if is_par => out.extend(xs),
                    ChannelType::Sum(xs) if !is_par => out.extend(xs),
                    g => out.push(g),
                }
            }
            out.sort();
            out
        }
        fn go(t: &ChannelType, env: &mut Vec<(String, String)>) -> ChannelType {
            match t {
                ChannelType::Nil => ChannelType::Nil,
                ChannelType::Prefix(a, k) => ChannelType::prefix(a.canon(), go(k, env)),
                ChannelType::Sum(ts) | ChannelType::Par(ts) => {
                    let is_par = matches!(t, ChannelType::Par(_));
                    let mut xs = flatten(ts, env, is_par);
                    match xs.len() {
                        0 => ChannelType::Nil,
                        1 => xs.pop().expect("one element"),
                        _ if is_par => ChannelType::Par(xs),
                        _ => ChannelType::Sum(xs),
                    }
                }
                ChannelType::Rec(x, body) => {
                    if !body.free_vars().contains(x) {
                        return go(body, env);
                    }
                    let name = format!("X{}", env.len());
                    env.push((x.clone(), name.clone()));
                    let b = go(body, env);
                    env.pop();
                    ChannelType::Rec(name, Box::new(b))
                }
                ChannelType::Var(x) => match env.iter().rev().find(|(y, _)| y == x) {
                    Some((_, n)) => ChannelType::Var(n.clone()),
                    None => t.clone(),
                },
            }
        }
        go(self, &mut Vec::new())
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        fn go(t: &ChannelType, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
            match t {
                ChannelType::Nil => {}
                ChannelType::Prefix(_, k) => go(k, bound, out),
                ChannelType::Sum(ts) | ChannelType::Par(ts) => {
                    for k in ts {
                        go(k, bound, out);
                    }
                }
                ChannelType::Rec(x, k) => {
                    bound.push(x.clone());
                    go(k, bound, out);
                    bound.pop();
                }
                ChannelType::Var(x) => {
                    if !bound.contains(x) {
                        out.insert(x.clone());
                    }
                }
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn mentions(&self, x: &str) -> bool {
        match self {
            ChannelType::Nil => false,
            ChannelType::Prefix(_, k) => k.mentions(x),
            ChannelType::Sum(ts) | ChannelType::Par(ts) => ts.iter().any(|k| k.mentions(x)),
            ChannelType::Rec(y, k) => y != x && k.mentions(x),
            ChannelType::Var(y) => y == x,
        }
    }

    /// Replaces free occurrences of `x`; the free variables of `by` must not
    /// be bound in `self`.
    pub fn subst(&self, x: &str, by: &ChannelType) -> ChannelType {
        match self {
            ChannelType::Nil => ChannelType::Nil,
            ChannelType::Prefix(a, k) => ChannelType::prefix(a.clone(), k.subst(x, by)),
            ChannelType::Sum(ts) => ChannelType::Sum(ts.iter().map(|k| k.subst(x, by)).collect()),
            ChannelType::Par(ts) => ChannelType::Par(ts.iter().map(|k| k.subst(x, by)).collect()),
            ChannelType::Rec(y, _) if y == x => self.clone(),
            ChannelType::Rec(y, k) => ChannelType::Rec(y.clone(), Box::new(k.subst(x, by))),
            ChannelType::Var(y) if y == x => by.clone(),
            ChannelType::Var(_) => self.clone(),
        }
    }

    /// Unfolds top-level recursion.
    pub fn unfold(&self) -> ChannelType {
        let mut t = self.clone();
        while let ChannelType::Rec(x, body) = &t {
            t = body.subst(x, &t);
        }
        t
    }

    /// One-step transitions, with canonical targets.
    pub fn step(&self) -> Vec<(AbsAction, ChannelType)> {
        let mut out = Vec::new();
        self.raw_steps(&mut out);
        let mut out: Vec<(AbsAction, ChannelType)> =
            out.into_iter().map(|(a, t)| (a.canon(), t.canon())).collect();
        out.sort();
        out.dedup();
        out
    }

    fn raw_steps(&self, out: &mut Vec<(AbsAction, ChannelType)>) {
        match self {
            ChannelType::Nil | ChannelType::Var(_) => {}
            ChannelType::Prefix(a, k) => out.push((a.clone(), (**k).clone())),
            ChannelType::Sum(ts) => {
                for k in ts {
                    k.raw_steps(out);
                }
            }
            ChannelType::Par(ts) => {
                for (i, k) in ts.iter().enumerate() {
                    let mut sub = Vec::new();
                    k.raw_steps(&mut sub);
                    for (a, k2) in sub {
                        let mut rest = ts.clone();
                        rest[i] = k2;
                        out.push((a, ChannelType::Par(rest)));
                    }
                }
            }
            ChannelType::Rec(..) => self.unfold().raw_steps(out),
        }
    }

    /// Actions occurring anywhere in the term.
    pub fn actions(&self) -> BTreeSet<AbsAction> {
        fn go(t: &ChannelType, out: &mut BTreeSet<AbsAction>) {
            match t {
                ChannelType::Nil | ChannelType::Var(_) => {}
                ChannelType::Prefix(a, k) => {
                    out.insert(a.clone());
                    go(k, out);
                }
                ChannelType::Sum(ts) | ChannelType::Par(ts) => {
                    for k in ts {
                        go(k, out);
                    }
                }
                ChannelType::Rec(_, k) => go(k, out),
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut out);
        out
    }

    /// Checks that recursion variables are bound and prefix-guarded.
    pub fn validate(&self) -> Result<(), String> {
        fn go(t: &ChannelType, bound: &mut Vec<String>, unguarded: &mut Vec<String>) -> Result<(), String> {
            match t {
                ChannelType::Nil => Ok(()),
                ChannelType::Prefix(_, k) => go(k, bound, &mut Vec::new()),
                ChannelType::Sum(ts) | ChannelType::Par(ts) => {
                    ts.iter().try_for_each(|k| go(k, bound, unguarded))
                }
                ChannelType::Rec(x, k) => {
                    bound.push(x.clone());
                    unguarded.push(x.clone());
                    let r = go(k, bound, unguarded);
                    unguarded.pop();
                    bound.pop();
                    r
                }
                ChannelType::Var(x) if !bound.contains(x) => Err(format!("unbound variable {x}")),
                ChannelType::Var(x) if unguarded.contains(x) => {
                    Err(format!("variable {x} occurs unguarded"))
                }
                ChannelType::Var(_) => Ok(()),
            }
        }
        go(self, &mut Vec::new(), &mut Vec::new())
    }
}

/// Head form of a term after unfolding, with nested sums and parallel
/// compositions spliced.
enum Head {
    Nil,
    Prefix(AbsAction, ChannelType),
    Sum(Vec<ChannelType>),
    Par(Vec<ChannelType>),
    Var(String),
}

fn head(t: &ChannelType) -> Head {
    match t.unfold() {
        ChannelType::Nil => Head::Nil,
        ChannelType::Prefix(a, k) => Head::Prefix(a, *k),
        ChannelType::Var(x) => Head::Var(x),
        ChannelType::Sum(ts) => {
            let mut items = Vec::new();
            for k in ts {
                splice(k, false, &mut items);
            }
            collapse(items, false)
        }
        ChannelType::Par(ts) => {
            let mut items = Vec::new();
            for k in ts {
                splice(k, true, &mut items);
            }
            collapse(items, true)
        }
        ChannelType::Rec(..) => unreachable!("unfold removes top-level recursion"),
    }
}

fn splice(t: ChannelType, is_par: bool, out: &mut Vec<ChannelType>) {
    match head(&t) {
        Head::Nil => {}
        Head::Par(xs) if is_par => out.extend(xs),
        Head::Sum(xs) if !is_par => out.extend(xs),
        _ => out.push(t.unfold()),
    }
}

fn collapse(mut items: Vec<ChannelType>, is_par: bool) -> Head {
    match items.len() {
        0 => Head::Nil,
        1 => head(&items.pop().expect("one element")),
        _ if is_par => Head::Par(items),
        _ => Head::Sum(items),
    }
}

/// Equality up to structural congruence: unfolding of recursion and the
/// commutative monoid laws of `+` and `|`.
pub fn congruent(a: &ChannelType, b: &ChannelType) -> bool {
    let (a, b) = (a.canon(), b.canon());
    a == b || cong(&a, &b, &mut Vec::new())
}

fn cong(a: &ChannelType, b: &ChannelType, assumed: &mut Vec<(ChannelType, ChannelType)>) -> bool {
    if a == b || assumed.iter().any(|(x, y)| x == a && y == b) {
        return true;
    }
    assumed.push((a.clone(), b.clone()));
    let r = match (head(a), head(b)) {
        (Head::Nil, Head::Nil) => true,
        (Head::Var(x), Head::Var(y)) => x == y,
        (Head::Prefix(x, k), Head::Prefix(y, h)) => x == y && cong(&k, &h, assumed),
        (Head::Sum(xs), Head::Sum(ys)) | (Head::Par(xs), Head::Par(ys)) => {
            xs.len() == ys.len() && matching(&xs, &ys, &mut vec![false; ys.len()], assumed)
        }
        _ => false,
    };
    assumed.pop();
    r
}

fn matching(
    xs: &[ChannelType],
    ys: &[ChannelType],
    used: &mut Vec<bool>,
    assumed: &mut Vec<(ChannelType, ChannelType)>,
) -> bool {
    let Some((x, rest)) = xs.split_first() else {
        return true;
    };
    for j in 0..ys.len() {
        if !used[j] && cong(x, &ys[j], assumed) {
            used[j] = true;
            if matching(rest, ys, used, assumed) {
                return true;
            }
            used[j] = false;
        }
    }
    false
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Ctx {
    Top,
    Sum,
    Unary,
}

fn write_type(t: &ChannelType, ctx: Ctx, f: &mut Formatter<'_>) -> fmt::Result {
    let paren = |open: bool, f: &mut Formatter<'_>, c: char| if open { f.write_char(c) } else { Ok(()) };
    match t {
        ChannelType::Nil => f.write_char('0'),
        ChannelType::Prefix(a, k) => {
            write!(f, "{a}")?;
            if k.is_nil() {
                return Ok(());
            }
            f.write_char('.')?;
            write_type(k, Ctx::Unary, f)
        }
        ChannelType::Sum(ts) => {
            let open = ctx == Ctx::Unary;
            paren(open, f, '(')?;
            for (i, k) in ts.iter().enumerate() {
                if i > 0 {
                    f.write_str(" + ")?;
                }
                write_type(k, Ctx::Sum, f)?;
            }
            paren(open, f, ')')
        }
        ChannelType::Par(ts) => {
            let open = ctx != Ctx::Top;
            paren(open, f, '(')?;
            for (i, k) in ts.iter().enumerate() {
                if i > 0 {
                    f.write_str(" | ")?;
                }
                write_type(k, Ctx::Sum, f)?;
            }
            paren(open, f, ')')
        }
        ChannelType::Rec(x, k) => {
            let open = ctx != Ctx::Top;
            paren(open, f, '(')?;
            write!(f, "rec {x}. ")?;
            write_type(k, Ctx::Top, f)?;
            paren(open, f, ')')
        }
        ChannelType::Var(x) => f.write_str(x),
    }
}

impl Display for ChannelType {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_type(self, Ctx::Top, f)
    }
}

impl Serialize for ChannelType {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Parses the printed form, e.g. `<a (+) b> | tau.a!` or
/// `rec X. tau.X + tau[a?].a`. Uppercase identifiers are type variables.
impl FromStr for ChannelType {
    type Err = SyntaxError;

    fn from_str(s: &str) -> Result<ChannelType, SyntaxError> {
        let mut p = TypeParser {
            chars: s.chars().collect(),
            pos: 0,
        };
        let t = p.par()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(t.canon())
    }
}

struct TypeParser {
    chars: Vec<char>,
    pos: usize,
}

impl TypeParser {
    fn error(&self, msg: &str) -> SyntaxError {
        SyntaxError::Parse {
            line: 1,
            col: self.pos + 1,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), SyntaxError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{c}`")))
        }
    }

    fn ident(&mut self) -> Option<String> {
        self.skip_ws();
        let start = self.pos;
        while let Some(&c) = self.chars.get(self.pos) {
            let ok = if self.pos == start {
                c.is_ascii_alphabetic() || c == '_'
            } else {
                c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '\''
            };
            if !ok {
                break;
            }
            self.pos += 1;
        }
        (self.pos > start).then(|| self.chars[start..self.pos].iter().collect())
    }

    fn atom(&mut self) -> Result<Atom, SyntaxError> {
        let name = self.ident().ok_or_else(|| self.error("expected an atom"))?;
        let barred = self.chars.get(self.pos) == Some(&'!');
        if barred {
            self.pos += 1;
        }
        Ok(Atom::new(&name, barred))
    }

    fn par(&mut self) -> Result<ChannelType, SyntaxError> {
        let mut ts = vec![self.sum()?];
        while self.eat('|') {
            ts.push(self.sum()?);
        }
        Ok(if ts.len() == 1 { ts.pop().expect("one") } else { ChannelType::Par(ts) })
    }

    fn sum(&mut self) -> Result<ChannelType, SyntaxError> {
        let mut ts = vec![self.unary()?];
        while self.eat('+') {
            ts.push(self.unary()?);
        }
        Ok(if ts.len() == 1 { ts.pop().expect("one") } else { ChannelType::Sum(ts) })
    }

    fn unary(&mut self) -> Result<ChannelType, SyntaxError> {
        match self.peek() {
            Some('0') => {
                self.pos += 1;
                Ok(ChannelType::Nil)
            }
            Some('(') => {
                self.pos += 1;
                let t = self.par()?;
                self.expect(')')?;
                Ok(t)
            }
            Some('<') => {
                self.pos += 1;
                let start = self.pos;
                let end = (start..self.chars.len())
                    .find(|&i| self.chars[i] == '>')
                    .ok_or_else(|| self.error("unterminated contract"))?;
                let text: String = self.chars[start..end].iter().collect();
                let c = parse_contract(&text)?;
                self.pos = end + 1;
                self.continuation(AbsAction::Tell(c))
            }
            Some(_) => {
                let save = self.pos;
                let name = self.ident().ok_or_else(|| self.error("expected a channel type"))?;
                if name == "rec" {
                    let x = self.ident().ok_or_else(|| self.error("expected a variable"))?;
                    self.expect('.')?;
                    let body = self.par()?;
                    return Ok(ChannelType::Rec(x, Box::new(body)));
                }
                if name == "tau" {
                    let a = if self.chars.get(self.pos) == Some(&'?') {
                        self.pos += 1;
                        AbsAction::TauBlock
                    } else if self.chars.get(self.pos) == Some(&'[') {
                        self.pos += 1;
                        let a = self.atom()?;
                        self.expect('?')?;
                        self.expect(']')?;
                        AbsAction::TauObs(Observable::NextIs(a))
                    } else {
                        AbsAction::Tau
                    };
                    return self.continuation(a);
                }
                if name.starts_with(|c: char| c.is_ascii_uppercase()) {
                    return Ok(ChannelType::Var(name));
                }
                self.pos = save;
                let a = self.atom()?;
                self.continuation(AbsAction::Atom(a))
            }
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn continuation(&mut self, a: AbsAction) -> Result<ChannelType, SyntaxError> {
        if self.eat('.') {
            Ok(ChannelType::prefix(a, self.unary()?))
        } else {
            Ok(ChannelType::action(a))
        }
    }
}
