//! Contracts, the CO2 process calculus, and static honesty checking.
//!
//! The crate is organised bottom-up:
//!
//! * [`syntax`]: ASTs, the textual DSL, and the pretty-printer.
//! * [`contracts`]: bilateral contract semantics, ready sets, compliance and
//!   the abstract single-contract relation.
//! * [`runtime`]: structural congruence, reduction semantics, ready-do sets
//!   and bounded honesty testing.
//! * [`typing`]: channel types, process types and the typing rules.
//! * [`honesty`]: abstract processes and the abstract-honesty decision procedure.

pub mod contracts;
pub mod honesty;
pub mod runtime;
pub mod syntax;
pub mod typing;

pub use syntax::{
    parse_contract, parse_process, parse_program, parse_system, Atom, Bilateral, ChannelId,
    Contract, Defs, LatentItem, Observable, Participant, Prefix, Process, Program, SyntaxError,
    System,
};
