use std::fmt;

use thiserror::Error;

use super::{type_process, ProcessType, TypeConfig, TypeError};
use crate::honesty::{abstract_honest, realizes, HonestyVerdict};
use crate::runtime::NormalSystem;
use crate::syntax::{ChannelId, Defs, Participant};

/// Outcome of checking `⊢_A S : f` or `⊢_A S ▷ f`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Judgment {
    /// `⊢_A S : f` holds.
    Colon,
    /// `⊢_A S ▷ f` holds.
    Compat,
    Fail(String),
    Inconclusive(String),
}

impl fmt::Display for Judgment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Judgment::Colon => f.write_str("typed"),
            Judgment::Compat => f.write_str("compatible"),
            Judgment::Fail(r) => write!(f, "not derivable: {r}"),
            Judgment::Inconclusive(r) => write!(f, "inconclusive: {r}"),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SystemTypeError {
    #[error(transparent)]
    Process(#[from] TypeError),
    #[error("{rule}: {detail}")]
    Rule { rule: &'static str, detail: String },
    #[error("{rule}: undetermined within bounds: {detail}")]
    Inconclusive { rule: &'static str, detail: String },
}

fn require(rule: &'static str, what: String, v: HonestyVerdict) -> Result<(), SystemTypeError> {
    match v {
        HonestyVerdict::Honest { .. } => Ok(()),
        HonestyVerdict::Dishonest { .. } => Err(SystemTypeError::Rule {
            rule,
            detail: format!("{what}\n{v}"),
        }),
        HonestyVerdict::Inconclusive { reason } => Err(SystemTypeError::Inconclusive {
            rule,
            detail: format!("{what}: {reason}"),
        }),
    }
}

/// `⊢_A S ▷ h` for the binder-free body of `s`.
fn compatible(who: &Participant, s: &NormalSystem, h: &ProcessType, cfg: &TypeConfig) -> Result<(), SystemTypeError> {
    for items in s.latent().values() {
        for it in items {
            if it.who != *who || it.chan.is_session() {
                continue;
            }
            let v = realizes(h.get(&it.chan), &it.contract, &cfg.honesty);
            require(
                "T-SFrozen1",
                format!("{} does not realize {} advertised on {}", h.get(&it.chan), it.contract, it.chan),
                v,
            )?;
        }
    }
    for (name, g) in s.sessions() {
        if let Some(c) = g.side(who) {
            let u = ChannelId::Session(name.clone());
            let v = realizes(h.get(&u), c, &cfg.honesty);
            require(
                "T-SFused",
                format!("{} does not realize {c} stipulated in {u}", h.get(&u)),
                v,
            )?;
        }
    }
    Ok(())
}

/// The process type `f` with `⊢_A S : f`.
///
/// The top-level delimitations of the normal form are typed by T-SDel2,
/// the context by the compatibility rules against `A`'s inner type. A
/// participant without a process is typed as `A[0]`.
pub fn type_system(
    who: &Participant,
    s: &NormalSystem,
    defs: &Defs,
    cfg: &TypeConfig,
) -> Result<ProcessType, SystemTypeError> {
    let g = type_process(defs, &s.process_of(who), cfg)?;
    for u in s.bound() {
        if g.explicit().contains_key(u) {
            require(
                "T-SDel2",
                format!("{u} has type {}", g.get(u)),
                abstract_honest(g.get(u), &cfg.honesty),
            )?;
        }
    }
    compatible(who, s, &g, cfg)?;
    Ok(s.bound().iter().fold(g, |f, u| f.reset(u)))
}

/// Decides `⊢_A S : f` when `A` has a process in `s`, and `⊢_A S ▷ f`
/// otherwise.
pub fn type_system_judgment(
    who: &Participant,
    s: &NormalSystem,
    f: &ProcessType,
    defs: &Defs,
    cfg: &TypeConfig,
) -> Judgment {
    let outcome = if s.processes().contains_key(who) {
        match type_system(who, s, defs, cfg) {
            Ok(g) if g.congruent(f) => Ok(Judgment::Colon),
            Ok(g) => Err(SystemTypeError::Rule {
                rule: "T-SA",
                detail: format!("the system has type\n{g}"),
            }),
            Err(e) => Err(e),
        }
    } else {
        let h = s.bound().iter().fold(f.clone(), |h, u| h.reset(u));
        compatible(who, s, &h, cfg).map(|_| Judgment::Compat)
    };
    match outcome {
        Ok(j) => j,
        Err(SystemTypeError::Inconclusive { rule, detail }) => {
            Judgment::Inconclusive(format!("{rule}: {detail}"))
        }
        Err(SystemTypeError::Process(TypeError::Inconclusive(cs))) => Judgment::Inconclusive(
            TypeError::Inconclusive(cs).to_string(),
        ),
        Err(e) => Judgment::Fail(e.to_string()),
    }
}
