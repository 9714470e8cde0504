//! Abstract syntax, parser and printer for contracts, processes and systems.
//!
//! The concrete grammar (EBNF):
//!
//! ```text
//! program   ::= item* | system
//! item      ::= "contract" ident "=" contract ";"
//!             | "def" Const "(" [var {"," var}] ")" "=" process ";"
//!             | "system" system ";"
//!             | "process" process ";"
//!
//! contract  ::= cunary {"+" cunary} | cunary {"(+)" cunary}
//! cunary    ::= ["(+)" | "+"] atom ["." cunary]
//!             | "0" | "E" | Var | "rdy" atom "." cunary
//!             | "rec" Var "." contract | "(" contract ")"
//! atom      ::= ident ["!"]
//!
//! process   ::= psum {"|" psum}
//! psum      ::= punary {"+" punary}
//! punary    ::= prefix ["." punary] | "0" | Const "(" [chan {"," chan}] ")"
//!             | "(" chan {"," chan} ")" punary | "(" process ")"
//! prefix    ::= "tau" | "fuse" | "tell" Part chan ("{" contract "}" | "$" ident)
//!             | "do" chan atom | "ask" chan "[" atom "?" "]"
//! chan      ::= var | "@" ident
//!
//! system    ::= sunary {"|" sunary}
//! sunary    ::= "0" | Part "[" process "]" | Part "[" [latent {"|" latent}] "]"
//!             | "@" ident "[" Part "says" contract "|" Part "says" contract "]"
//!             | "(" chan {"," chan} ")" sunary | "(" system ")"
//! latent    ::= chan ":" Part "says" contract
//! ```
//!
//! A single unmarked branch `a.c` is an internal singleton when `a` is barred
//! and an external singleton otherwise; `(+)a.c` and `+a.c` force the kind.
//! Omitted continuations stand for `E`. Comments start with `#` or `//`.

mod contract;
mod lexer;
mod parser;
mod print;
mod process;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

pub use contract::{alpha_normalize, Contract, SumKind};
pub use parser::{parse_contract, parse_process, parse_program, parse_system, Program};
pub use process::{
    Bilateral, Defs, Definition, LatentItem, Observable, Prefix, Process, System,
};

/// An action name with a polarity; `e` is its own co-atom.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    name: Arc<str>,
    barred: bool,
}

impl Atom {
    pub fn new(name: &str, barred: bool) -> Atom {
        let barred = barred && name != "e";
        Atom {
            name: Arc::from(name),
            barred,
        }
    }

    pub fn plain(name: &str) -> Atom {
        Atom::new(name, false)
    }

    pub fn barred(name: &str) -> Atom {
        Atom::new(name, true)
    }

    /// The distinguished success atom.
    pub fn e() -> Atom {
        Atom::plain("e")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_barred(&self) -> bool {
        self.barred
    }

    pub fn is_e(&self) -> bool {
        &*self.name == "e"
    }

    pub fn co(&self) -> Atom {
        if self.is_e() {
            return self.clone();
        }
        Atom {
            name: self.name.clone(),
            barred: !self.barred,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.barred {
            write!(f, "{}!", self.name)
        } else {
            write!(f, "{}", self.name)
        }
    }
}

impl Serialize for Atom {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Participant(pub String);

impl Participant {
    pub fn new(name: &str) -> Participant {
        Participant(name.to_string())
    }
}

impl fmt::Display for Participant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for Participant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Variables, session names, and the dummy channel `*`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChannelId {
    Var(String),
    Session(String),
    Dummy,
}

impl ChannelId {
    pub fn var(name: &str) -> ChannelId {
        ChannelId::Var(name.to_string())
    }

    pub fn session(name: &str) -> ChannelId {
        ChannelId::Session(name.to_string())
    }

    pub fn is_var(&self) -> bool {
        matches!(self, ChannelId::Var(_))
    }

    pub fn is_session(&self) -> bool {
        matches!(self, ChannelId::Session(_))
    }

    pub fn name(&self) -> &str {
        match self {
            ChannelId::Var(n) | ChannelId::Session(n) => n,
            ChannelId::Dummy => "*",
        }
    }

    /// Same kind of channel, different name.
    pub fn renamed(&self, name: String) -> ChannelId {
        match self {
            ChannelId::Var(_) => ChannelId::Var(name),
            ChannelId::Session(_) => ChannelId::Session(name),
            ChannelId::Dummy => ChannelId::Dummy,
        }
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelId::Var(n) => f.write_str(n),
            ChannelId::Session(n) => write!(f, "@{n}"),
            ChannelId::Dummy => f.write_str("*"),
        }
    }
}

impl Serialize for ChannelId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Well-formedness conditions checked after parsing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Condition {
    /// Branch atoms of a sum are pairwise distinct.
    DistinctBranches,
    /// `rdy` occurs at top level only.
    RdyTopLevel,
    /// Recursion variables are prefix-guarded.
    GuardedRecursion,
    /// Recursion variables are bound.
    ClosedContract,
    /// The continuation of `e` is `E`.
    SuccessContinuation,
    /// A bilateral contract has two distinct participants and at most one `rdy`.
    BilateralShape,
    /// At most one process per participant.
    OneProcessPerParticipant,
    /// Session names are not duplicated.
    DistinctSessions,
    /// Constants are defined once, with the right arity, with free channels
    /// among the parameters, and called under a prefix in definition bodies.
    ConstantDefinition,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::DistinctBranches => "branch atoms must be pairwise distinct",
            Condition::RdyTopLevel => "rdy may only appear at top level",
            Condition::GuardedRecursion => "recursion must be guarded",
            Condition::ClosedContract => "recursion variables must be bound",
            Condition::SuccessContinuation => "the continuation of e must be E",
            Condition::BilateralShape => {
                "bilateral contracts need distinct participants and at most one rdy"
            }
            Condition::OneProcessPerParticipant => "at most one process per participant",
            Condition::DistinctSessions => "session names must be distinct",
            Condition::ConstantDefinition => "ill-formed constant definition or call",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SyntaxError {
    #[error("{line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("{condition}: {detail}")]
    Invariant { condition: Condition, detail: String },
}

impl SyntaxError {
    pub(crate) fn invariant(condition: Condition, detail: impl Into<String>) -> SyntaxError {
        SyntaxError::Invariant {
            condition,
            detail: detail.into(),
        }
    }
}
