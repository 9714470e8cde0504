#![allow(dead_code)]

pub mod gen;
pub mod props;

use std::path::PathBuf;

use co2::runtime::{normalize, NormalSystem};
use co2::{parse_program, Atom, ChannelId, Contract, Participant, Program};

pub fn corpus_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name)
}

pub fn corpus(name: &str) -> String {
    std::fs::read_to_string(corpus_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn program(name: &str) -> Program {
    parse_program(&corpus(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn contract_file(name: &str) -> Contract {
    co2::parse_contract(&corpus(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn system_of(prog: &Program) -> NormalSystem {
    normalize(prog.system.as_ref().expect("system item"))
}

pub fn contract(s: &str) -> Contract {
    co2::parse_contract(s).unwrap_or_else(|e| panic!("{s}: {e}"))
}

pub fn atom(s: &str) -> Atom {
    Atom::new(s.trim_end_matches('!'), s.ends_with('!'))
}

pub fn atoms(xs: &[&str]) -> std::collections::BTreeSet<Atom> {
    xs.iter().map(|s| atom(s)).collect()
}

pub fn who(s: &str) -> Participant {
    Participant::new(s)
}

pub fn var(s: &str) -> ChannelId {
    ChannelId::var(s)
}

pub fn session(s: &str) -> ChannelId {
    ChannelId::session(s)
}
