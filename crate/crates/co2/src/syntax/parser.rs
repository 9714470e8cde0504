use std::collections::BTreeMap;

use super::contract::SumKind;
use super::lexer::{lex, Tok, Token};
use super::{
    Atom, Bilateral, ChannelId, Condition, Contract, Definition, Defs, LatentItem, Observable,
    Participant, Prefix, Process, SyntaxError, System,
};

/// A parsed source file.
#[derive(Clone, Debug, Default)]
pub struct Program {
    pub defs: Defs,
    pub contracts: BTreeMap<String, Contract>,
    pub system: Option<System>,
    pub process: Option<Process>,
}

const ITEM_KEYWORDS: [&str; 4] = ["contract", "def", "system", "process"];
const PREFIX_KEYWORDS: [&str; 5] = ["tau", "tell", "fuse", "do", "ask"];

fn is_upper(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

fn is_var_name(s: &str) -> bool {
    !is_upper(s) && !PREFIX_KEYWORDS.contains(&s)
}

/// Parses and validates a contract.
pub fn parse_contract(text: &str) -> Result<Contract, SyntaxError> {
    let mut p = Parser::new(text)?;
    let c = p.contract()?;
    p.expect_eof()?;
    c.validate()?;
    Ok(c)
}

/// Parses a source file: either a sequence of items or a bare system.
pub fn parse_program(text: &str) -> Result<Program, SyntaxError> {
    let mut p = Parser::new(text)?;
    let mut prog = Program::default();
    let mut defs = Vec::new();
    if !p.at_item() {
        if p.peek() != &Tok::Eof {
            let s = p.system()?;
            p.eat(&Tok::Semi);
            prog.system = Some(s);
        }
        p.expect_eof()?;
    } else {
        while p.peek() != &Tok::Eof {
            let kw = p.ident()?;
            match kw.as_str() {
                "contract" => {
                    let name = p.ident()?;
                    p.expect(Tok::Eq)?;
                    let c = p.contract()?;
                    p.expect(Tok::Semi)?;
                    c.validate()?;
                    p.contracts.insert(name, c);
                }
                "def" => {
                    let name = p.upper_ident()?;
                    p.expect(Tok::LParen)?;
                    let mut params = Vec::new();
                    if !p.eat(&Tok::RParen) {
                        loop {
                            match p.chan()? {
                                ChannelId::Var(v) => params.push(v),
                                other => {
                                    return Err(p.err_prev(format!(
                                        "parameters must be variables, found {other}"
                                    )))
                                }
                            }
                            if p.eat(&Tok::RParen) {
                                break;
                            }
                            p.expect(Tok::Comma)?;
                        }
                    }
                    p.expect(Tok::Eq)?;
                    let body = p.process()?;
                    p.expect(Tok::Semi)?;
                    defs.push(Definition { name, params, body });
                }
                "system" => {
                    let s = p.system()?;
                    p.expect(Tok::Semi)?;
                    if prog.system.replace(s).is_some() {
                        return Err(p.err_prev("more than one system item".into()));
                    }
                }
                "process" => {
                    let q = p.process()?;
                    p.expect(Tok::Semi)?;
                    if prog.process.replace(q).is_some() {
                        return Err(p.err_prev("more than one process item".into()));
                    }
                }
                other => return Err(p.err_prev(format!("unknown item `{other}`"))),
            }
        }
    }
    prog.defs = Defs::from_definitions(defs)?;
    prog.contracts = std::mem::take(&mut p.contracts);
    if let Some(s) = &prog.system {
        s.validate()?;
        for q in s.processes() {
            prog.defs.check_calls(q)?;
        }
    }
    if let Some(q) = &prog.process {
        for c in q.contracts() {
            c.validate()?;
        }
        prog.defs.check_calls(q)?;
    }
    for d in prog.defs.iter() {
        for c in d.body.contracts() {
            c.validate()?;
        }
    }
    Ok(prog)
}

/// Parses a system, either bare or as the `system` item of a file.
pub fn parse_system(text: &str) -> Result<System, SyntaxError> {
    let prog = parse_program(text)?;
    prog.system.ok_or_else(|| SyntaxError::Parse {
        line: 1,
        col: 1,
        msg: "no system found".into(),
    })
}

/// Parses a process, either bare or as the `process` item of a file.
pub fn parse_process(text: &str) -> Result<Process, SyntaxError> {
    let mut p = Parser::new(text)?;
    if p.at_item() {
        let prog = parse_program(text)?;
        return prog.process.ok_or_else(|| SyntaxError::Parse {
            line: 1,
            col: 1,
            msg: "no process found".into(),
        });
    }
    let q = p.process()?;
    p.eat(&Tok::Semi);
    p.expect_eof()?;
    for c in q.contracts() {
        c.validate()?;
    }
    Ok(q)
}

struct Operand {
    c: Contract,
    fixed: Option<SumKind>,
    absorbable: bool,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    contracts: BTreeMap<String, Contract>,
}

impl Parser {
    fn new(text: &str) -> Result<Parser, SyntaxError> {
        Ok(Parser {
            toks: lex(text)?,
            pos: 0,
            contracts: BTreeMap::new(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn err(&self, msg: String) -> SyntaxError {
        let t = &self.toks[self.pos];
        SyntaxError::Parse {
            line: t.line,
            col: t.col,
            msg,
        }
    }

    fn err_prev(&self, msg: String) -> SyntaxError {
        let t = &self.toks[self.pos.saturating_sub(1)];
        SyntaxError::Parse {
            line: t.line,
            col: t.col,
            msg,
        }
    }

    fn unexpected(&self, what: &str) -> SyntaxError {
        self.err(format!("expected {what}, found {}", self.peek().describe()))
    }

    fn expect(&mut self, t: Tok) -> Result<(), SyntaxError> {
        if self.eat(&t) {
            Ok(())
        } else {
            Err(self.unexpected(&t.describe()))
        }
    }

    fn expect_eof(&self) -> Result<(), SyntaxError> {
        if self.peek() == &Tok::Eof {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }

    fn at_item(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if ITEM_KEYWORDS.contains(&s.as_str()))
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("an identifier")),
        }
    }

    fn upper_ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) if is_upper(&s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("a capitalised name")),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), SyntaxError> {
        if self.at_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn atom(&mut self) -> Result<Atom, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_upper(&s) && s != "rec" && s != "rdy" => {
                self.bump();
                let barred = self.eat(&Tok::Bang);
                Ok(Atom::new(&s, barred))
            }
            _ => Err(self.unexpected("an atom")),
        }
    }

    fn chan(&mut self) -> Result<ChannelId, SyntaxError> {
        match self.peek().clone() {
            Tok::Session(s) => {
                self.bump();
                Ok(ChannelId::Session(s))
            }
            Tok::Ident(s) if is_var_name(&s) => {
                self.bump();
                Ok(ChannelId::Var(s))
            }
            _ => Err(self.unexpected("a channel")),
        }
    }

    fn at_chan(&self, k: usize) -> bool {
        match self.peek_at(k) {
            Tok::Session(_) => true,
            Tok::Ident(s) => is_var_name(s),
            _ => false,
        }
    }

    // Contracts.

    fn contract(&mut self) -> Result<Contract, SyntaxError> {
        Ok(self.contract_operand()?.c)
    }

    fn contract_operand(&mut self) -> Result<Operand, SyntaxError> {
        let first = self.cunary()?;
        let kind = match self.peek() {
            Tok::Plus => SumKind::External,
            Tok::OPlus => SumKind::Internal,
            _ => return Ok(first),
        };
        let sep = self.peek().clone();
        let mut ops = vec![first];
        while self.peek() == &Tok::Plus || self.peek() == &Tok::OPlus {
            if self.peek() != &sep {
                return Err(self.err(
                    "mixing `+` and `(+)` requires parentheses".to_string(),
                ));
            }
            self.bump();
            ops.push(self.cunary()?);
        }
        let mut branches = Vec::new();
        for op in ops {
            let ok = op.absorbable && op.fixed.map_or(true, |k| k == kind);
            match (&op.c, ok) {
                (Contract::Sum(_, bs), true) => branches.extend(bs.iter().cloned()),
                _ => {
                    return Err(self.err_prev(format!(
                        "operand `{}` of a {} sum must be a branch or a sum of the same kind",
                        op.c,
                        if kind == SumKind::Internal { "(+)" } else { "+" }
                    )))
                }
            }
        }
        Ok(Operand {
            c: Contract::Sum(kind, branches),
            fixed: Some(kind),
            absorbable: true,
        })
    }

    fn branch(&mut self, kind: Option<SumKind>) -> Result<Operand, SyntaxError> {
        let a = self.atom()?;
        let cont = if self.eat(&Tok::Dot) {
            self.cunary()?.c
        } else {
            Contract::end()
        };
        let k = kind.unwrap_or_else(|| SumKind::default_for(&a));
        Ok(Operand {
            c: Contract::Sum(k, vec![(a, cont)]),
            fixed: kind,
            absorbable: true,
        })
    }

    fn cunary(&mut self) -> Result<Operand, SyntaxError> {
        let plain = |c| Operand {
            c,
            fixed: None,
            absorbable: false,
        };
        match self.peek().clone() {
            Tok::OPlus => {
                self.bump();
                self.branch(Some(SumKind::Internal))
            }
            Tok::Plus => {
                self.bump();
                self.branch(Some(SumKind::External))
            }
            Tok::Zero => {
                self.bump();
                Ok(Operand {
                    c: Contract::zero(),
                    fixed: None,
                    absorbable: true,
                })
            }
            Tok::LParen => {
                self.bump();
                let op = self.contract_operand()?;
                self.expect(Tok::RParen)?;
                Ok(op)
            }
            Tok::Ident(s) if s == "E" => {
                self.bump();
                Ok(plain(Contract::end()))
            }
            Tok::Ident(s) if s == "rdy" => {
                self.bump();
                let a = self.atom()?;
                self.expect(Tok::Dot)?;
                let c = self.cunary()?.c;
                Ok(plain(Contract::rdy(a, c)))
            }
            Tok::Ident(s) if s == "rec" => {
                self.bump();
                let x = self.upper_ident()?;
                self.expect(Tok::Dot)?;
                let body = self.contract()?;
                Ok(plain(Contract::Rec(x, Box::new(body))))
            }
            Tok::Ident(s) if is_upper(&s) => {
                self.bump();
                Ok(plain(Contract::Var(s)))
            }
            Tok::Ident(_) => self.branch(None),
            Tok::Ref(name) => {
                self.bump();
                let c = self
                    .contracts
                    .get(&name)
                    .cloned()
                    .ok_or_else(|| self.err_prev(format!("undefined contract ${name}")))?;
                Ok(plain(c))
            }
            _ => Err(self.unexpected("a contract")),
        }
    }

    // Processes.

    fn process(&mut self) -> Result<Process, SyntaxError> {
        let mut p = self.psum()?;
        while self.eat(&Tok::Bar) {
            let q = self.psum()?;
            p = Process::par(p, q);
        }
        Ok(p)
    }

    fn psum(&mut self) -> Result<Process, SyntaxError> {
        let first = self.punary()?;
        if self.peek() != &Tok::Plus {
            return Ok(first);
        }
        let mut branches = Vec::new();
        let mut ops = vec![first];
        while self.eat(&Tok::Plus) {
            ops.push(self.punary()?);
        }
        for op in ops {
            match op {
                Process::Sum(bs) => branches.extend(bs),
                other => {
                    return Err(self.err_prev(format!(
                        "operand `{other}` of `+` must be prefix-guarded"
                    )))
                }
            }
        }
        Ok(Process::Sum(branches))
    }

    fn punary(&mut self) -> Result<Process, SyntaxError> {
        match self.peek().clone() {
            Tok::Zero => {
                self.bump();
                Ok(Process::nil())
            }
            Tok::LParen => {
                if self.at_chan(1) && matches!(self.peek_at(2), Tok::Comma | Tok::RParen) {
                    let vars = self.chan_list()?;
                    let body = self.punary()?;
                    Ok(Process::del(vars, body))
                } else {
                    self.bump();
                    let p = self.process()?;
                    self.expect(Tok::RParen)?;
                    Ok(p)
                }
            }
            Tok::Ident(s) if is_upper(&s) => {
                self.bump();
                let args = self.arg_list()?;
                Ok(Process::Call(s, args))
            }
            Tok::Ident(_) => {
                let pre = self.prefix()?;
                let cont = if self.eat(&Tok::Dot) {
                    self.punary()?
                } else {
                    Process::nil()
                };
                Ok(Process::prefixed(pre, cont))
            }
            _ => Err(self.unexpected("a process")),
        }
    }

    fn chan_list(&mut self) -> Result<Vec<ChannelId>, SyntaxError> {
        self.expect(Tok::LParen)?;
        let mut vars = vec![self.chan()?];
        while self.eat(&Tok::Comma) {
            vars.push(self.chan()?);
        }
        self.expect(Tok::RParen)?;
        Ok(vars)
    }

    fn arg_list(&mut self) -> Result<Vec<ChannelId>, SyntaxError> {
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.chan()?);
            if self.eat(&Tok::RParen) {
                return Ok(args);
            }
            self.expect(Tok::Comma)?;
        }
    }

    fn prefix(&mut self) -> Result<Prefix, SyntaxError> {
        let kw = self.ident()?;
        match kw.as_str() {
            "tau" => Ok(Prefix::Tau),
            "fuse" => Ok(Prefix::Fuse),
            "tell" => {
                let to = Participant(self.upper_ident()?);
                let chan = self.chan()?;
                let contract = if self.eat(&Tok::LBrace) {
                    let c = self.contract()?;
                    self.expect(Tok::RBrace)?;
                    c
                } else if let Tok::Ref(name) = self.peek().clone() {
                    self.bump();
                    self.contracts
                        .get(&name)
                        .cloned()
                        .ok_or_else(|| self.err_prev(format!("undefined contract ${name}")))?
                } else {
                    return Err(self.unexpected("`{` or a contract reference"));
                };
                if contract.count_rdy() > 0 {
                    return Err(SyntaxError::invariant(
                        Condition::RdyTopLevel,
                        "advertised contracts cannot carry rdy",
                    ));
                }
                Ok(Prefix::Tell { to, chan, contract })
            }
            "do" => {
                let chan = self.chan()?;
                let atom = self.atom()?;
                Ok(Prefix::Do { chan, atom })
            }
            "ask" => {
                let chan = self.chan()?;
                self.expect(Tok::LBracket)?;
                let atom = self.atom()?;
                self.expect(Tok::Question)?;
                self.expect(Tok::RBracket)?;
                Ok(Prefix::Ask {
                    chan,
                    obs: Observable::NextIs(atom),
                })
            }
            other => Err(self.err_prev(format!("unknown prefix `{other}`"))),
        }
    }

    // Systems.

    fn system(&mut self) -> Result<System, SyntaxError> {
        let mut s = self.sunary()?;
        while self.eat(&Tok::Bar) {
            let t = self.sunary()?;
            s = System::par(s, t);
        }
        Ok(s)
    }

    fn sunary(&mut self) -> Result<System, SyntaxError> {
        match self.peek().clone() {
            Tok::Zero => {
                self.bump();
                Ok(System::Zero)
            }
            Tok::LParen => {
                if self.at_chan(1) && matches!(self.peek_at(2), Tok::Comma | Tok::RParen) {
                    let vars = self.chan_list()?;
                    let body = self.sunary()?;
                    Ok(System::del(vars, body))
                } else {
                    self.bump();
                    let s = self.system()?;
                    self.expect(Tok::RParen)?;
                    Ok(s)
                }
            }
            Tok::Session(name) => {
                self.bump();
                self.expect(Tok::LBracket)?;
                let (a, c) = self.says()?;
                self.expect(Tok::Bar)?;
                let (b, d) = self.says()?;
                self.expect(Tok::RBracket)?;
                Ok(System::Session(name, Bilateral::new(a, c, b, d)))
            }
            Tok::Ident(s) if is_upper(&s) => {
                self.bump();
                let who = Participant(s);
                self.expect(Tok::LBracket)?;
                if self.eat(&Tok::RBracket) {
                    return Ok(System::Latent(who, Vec::new()));
                }
                if self.at_chan(0) && self.peek_at(1) == &Tok::Colon {
                    let mut items = vec![self.latent()?];
                    while self.eat(&Tok::Bar) {
                        items.push(self.latent()?);
                    }
                    self.expect(Tok::RBracket)?;
                    Ok(System::Latent(who, items))
                } else {
                    let p = self.process()?;
                    self.expect(Tok::RBracket)?;
                    Ok(System::Participant(who, p))
                }
            }
            _ => Err(self.unexpected("a system")),
        }
    }

    fn says(&mut self) -> Result<(Participant, Contract), SyntaxError> {
        let who = Participant(self.upper_ident()?);
        self.keyword("says")?;
        let c = self.contract()?;
        Ok((who, c))
    }

    fn latent(&mut self) -> Result<LatentItem, SyntaxError> {
        let chan = self.chan()?;
        self.expect(Tok::Colon)?;
        let (who, contract) = self.says()?;
        Ok(LatentItem {
            chan,
            who,
            contract,
        })
    }
}
