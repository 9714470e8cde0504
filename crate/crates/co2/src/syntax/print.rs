use std::fmt::{self, Display, Formatter, Write};

use super::contract::SumKind;
use super::{Bilateral, Contract, LatentItem, Observable, Prefix, Process, System};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Ctx {
    Top,
    Unary,
}

fn write_contract(c: &Contract, ctx: Ctx, f: &mut Formatter<'_>) -> fmt::Result {
    if c.is_end() {
        return f.write_str("E");
    }
    match c {
        Contract::Sum(_, bs) if bs.is_empty() => f.write_str("0"),
        Contract::Sum(k, bs) if bs.len() == 1 => {
            let (a, cont) = &bs[0];
            if *k != SumKind::default_for(a) {
                f.write_str(if *k == SumKind::Internal { "(+)" } else { "+" })?;
            }
            write_branch(a, cont, f)
        }
        Contract::Sum(k, bs) => {
            if ctx == Ctx::Unary {
                f.write_char('(')?;
            }
            let sep = if *k == SumKind::Internal { " (+) " } else { " + " };
            for (i, (a, cont)) in bs.iter().enumerate() {
                if i > 0 {
                    f.write_str(sep)?;
                }
                write_branch(a, cont, f)?;
            }
            if ctx == Ctx::Unary {
                f.write_char(')')?;
            }
            Ok(())
        }
        Contract::Rdy(a, cont) => {
            write!(f, "rdy {a}.")?;
            write_contract(cont, Ctx::Unary, f)
        }
        Contract::Rec(x, body) => {
            if ctx == Ctx::Unary {
                f.write_char('(')?;
            }
            write!(f, "rec {x}. ")?;
            write_contract(body, Ctx::Top, f)?;
            if ctx == Ctx::Unary {
                f.write_char(')')?;
            }
            Ok(())
        }
        Contract::Var(x) => f.write_str(x),
    }
}

fn write_branch(a: &super::Atom, cont: &Contract, f: &mut Formatter<'_>) -> fmt::Result {
    write!(f, "{a}")?;
    if cont.is_end() {
        return Ok(());
    }
    f.write_char('.')?;
    write_contract(cont, Ctx::Unary, f)
}

impl Display for Contract {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_contract(self, Ctx::Top, f)
    }
}

impl Display for Observable {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Observable::NextIs(a) => write!(f, "{a}?"),
        }
    }
}

impl Display for Prefix {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Prefix::Tau => f.write_str("tau"),
            Prefix::Fuse => f.write_str("fuse"),
            Prefix::Tell { to, chan, contract } => write!(f, "tell {to} {chan} {{{contract}}}"),
            Prefix::Do { chan, atom } => write!(f, "do {chan} {atom}"),
            Prefix::Ask { chan, obs } => write!(f, "ask {chan} [{obs}]"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum PCtx {
    /// Anywhere a full process may appear, or the left operand of `|`.
    Top,
    /// Right operand of `|`.
    ParRight,
    /// Continuation of a prefix, body of a delimitation.
    Unary,
}

fn write_process(p: &Process, ctx: PCtx, f: &mut Formatter<'_>) -> fmt::Result {
    match p {
        Process::Sum(bs) if bs.is_empty() => f.write_str("0"),
        Process::Sum(bs) => {
            let paren = ctx == PCtx::Unary && bs.len() > 1;
            if paren {
                f.write_char('(')?;
            }
            for (i, (pre, cont)) in bs.iter().enumerate() {
                if i > 0 {
                    f.write_str(" + ")?;
                }
                write!(f, "{pre}")?;
                if !cont.is_nil() {
                    f.write_str(" . ")?;
                    write_process(cont, PCtx::Unary, f)?;
                }
            }
            if paren {
                f.write_char(')')?;
            }
            Ok(())
        }
        Process::Par(a, b) => {
            let paren = ctx != PCtx::Top;
            if paren {
                f.write_char('(')?;
            }
            write_process(a, PCtx::Top, f)?;
            f.write_str(" | ")?;
            write_process(b, PCtx::ParRight, f)?;
            if paren {
                f.write_char(')')?;
            }
            Ok(())
        }
        Process::Del(vs, body) => {
            write_chan_list(vs, f)?;
            f.write_char(' ')?;
            write_process(body, PCtx::Unary, f)
        }
        Process::Call(x, args) => {
            write!(f, "{x}")?;
            write_chan_list(args, f)
        }
    }
}

fn write_chan_list(vs: &[super::ChannelId], f: &mut Formatter<'_>) -> fmt::Result {
    f.write_char('(')?;
    for (i, v) in vs.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{v}")?;
    }
    f.write_char(')')
}

impl Display for Process {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_process(self, PCtx::Top, f)
    }
}

impl Display for LatentItem {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{} : {} says {}", self.chan, self.who, self.contract)
    }
}

impl Display for Bilateral {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} says {} | {} says {}",
            self.left.0, self.left.1, self.right.0, self.right.1
        )
    }
}

fn write_system(s: &System, ctx: PCtx, f: &mut Formatter<'_>) -> fmt::Result {
    match s {
        System::Zero => f.write_str("0"),
        System::Participant(a, p) => write!(f, "{a}[{p}]"),
        System::Latent(a, items) => {
            write!(f, "{a}[")?;
            for (i, it) in items.iter().enumerate() {
                if i > 0 {
                    f.write_str(" | ")?;
                }
                write!(f, "{it}")?;
            }
            f.write_char(']')
        }
        System::Session(n, g) => write!(f, "@{n}[{g}]"),
        System::Par(a, b) => {
            let paren = ctx != PCtx::Top;
            if paren {
                f.write_char('(')?;
            }
            write_system(a, PCtx::Top, f)?;
            f.write_str(" | ")?;
            write_system(b, PCtx::ParRight, f)?;
            if paren {
                f.write_char(')')?;
            }
            Ok(())
        }
        System::Del(vs, body) => {
            write_chan_list(vs, f)?;
            f.write_char(' ')?;
            write_system(body, PCtx::Unary, f)
        }
    }
}

impl Display for System {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_system(self, PCtx::Top, f)
    }
}
