use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::{Atom, ChannelId, Condition, Contract, Participant, SyntaxError};

/// Observables queried by `ask`: `[a?]` holds when the next action is `a`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Observable {
    NextIs(Atom),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Prefix {
    Tau,
    Tell {
        to: Participant,
        chan: ChannelId,
        contract: Contract,
    },
    Fuse,
    Do {
        chan: ChannelId,
        atom: Atom,
    },
    Ask {
        chan: ChannelId,
        obs: Observable,
    },
}

impl Prefix {
    /// The channel the prefix acts on, if any.
    pub fn chan(&self) -> Option<&ChannelId> {
        match self {
            Prefix::Tell { chan, .. } | Prefix::Do { chan, .. } | Prefix::Ask { chan, .. } => {
                Some(chan)
            }
            Prefix::Tau | Prefix::Fuse => None,
        }
    }

    pub fn rename(&self, map: &BTreeMap<ChannelId, ChannelId>) -> Prefix {
        let r = |u: &ChannelId| map.get(u).cloned().unwrap_or_else(|| u.clone());
        match self {
            Prefix::Tell { to, chan, contract } => Prefix::Tell {
                to: to.clone(),
                chan: r(chan),
                contract: contract.clone(),
            },
            Prefix::Do { chan, atom } => Prefix::Do {
                chan: r(chan),
                atom: atom.clone(),
            },
            Prefix::Ask { chan, obs } => Prefix::Ask {
                chan: r(chan),
                obs: obs.clone(),
            },
            p => p.clone(),
        }
    }
}

/// CO2 processes. `Sum(vec![])` is the inert process `0`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Process {
    Sum(Vec<(Prefix, Process)>),
    Par(Box<Process>, Box<Process>),
    Del(Vec<ChannelId>, Box<Process>),
    Call(String, Vec<ChannelId>),
}

impl Process {
    pub fn nil() -> Process {
        Process::Sum(Vec::new())
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, Process::Sum(bs) if bs.is_empty())
    }

    pub fn prefixed(p: Prefix, cont: Process) -> Process {
        Process::Sum(vec![(p, cont)])
    }

    pub fn par(a: Process, b: Process) -> Process {
        Process::Par(Box::new(a), Box::new(b))
    }

    pub fn del(vars: Vec<ChannelId>, body: Process) -> Process {
        Process::Del(vars, Box::new(body))
    }

    /// Free variables and session names.
    pub fn free_channels(&self) -> BTreeSet<ChannelId> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<ChannelId>, out: &mut BTreeSet<ChannelId>) {
        fn add(u: &ChannelId, bound: &[ChannelId], out: &mut BTreeSet<ChannelId>) {
            if !bound.contains(u) && *u != ChannelId::Dummy {
                out.insert(u.clone());
            }
        }
        match self {
            Process::Sum(bs) => {
                for (p, c) in bs {
                    if let Some(u) = p.chan() {
                        add(u, bound, out);
                    }
                    c.collect_free(bound, out);
                }
            }
            Process::Par(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Process::Del(vs, body) => {
                let n = bound.len();
                bound.extend(vs.iter().cloned());
                body.collect_free(bound, out);
                bound.truncate(n);
            }
            Process::Call(_, args) => {
                for u in args {
                    add(u, bound, out);
                }
            }
        }
    }

    /// Capture-avoiding renaming of free channels.
    pub fn rename(&self, map: &BTreeMap<ChannelId, ChannelId>) -> Process {
        if map.is_empty() {
            return self.clone();
        }
        match self {
            Process::Sum(bs) => Process::Sum(
                bs.iter()
                    .map(|(p, c)| (p.rename(map), c.rename(map)))
                    .collect(),
            ),
            Process::Par(a, b) => Process::par(a.rename(map), b.rename(map)),
            Process::Del(vs, body) => {
                let mut inner = map.clone();
                for v in vs {
                    inner.remove(v);
                }
                let range: BTreeSet<ChannelId> = inner.values().cloned().collect();
                let mut avoid = body.free_channels();
                avoid.extend(range.iter().cloned());
                avoid.extend(inner.keys().cloned());
                let mut new_vs = Vec::new();
                for v in vs {
                    if range.contains(v) {
                        let fresh = fresh_like(v, &avoid);
                        avoid.insert(fresh.clone());
                        inner.insert(v.clone(), fresh.clone());
                        new_vs.push(fresh);
                    } else {
                        new_vs.push(v.clone());
                    }
                }
                Process::del(new_vs, body.rename(&inner))
            }
            Process::Call(x, args) => Process::Call(
                x.clone(),
                args.iter()
                    .map(|u| map.get(u).cloned().unwrap_or_else(|| u.clone()))
                    .collect(),
            ),
        }
    }

    /// Calls occurring outside any prefix.
    pub fn unguarded_calls(&self) -> Vec<(&str, &[ChannelId])> {
        let mut out = Vec::new();
        fn go<'a>(p: &'a Process, out: &mut Vec<(&'a str, &'a [ChannelId])>) {
            match p {
                Process::Sum(_) => {}
                Process::Par(a, b) => {
                    go(a, out);
                    go(b, out);
                }
                Process::Del(_, b) => go(b, out),
                Process::Call(x, args) => out.push((x, args)),
            }
        }
        go(self, &mut out);
        out
    }

    pub fn all_calls(&self) -> Vec<(&str, &[ChannelId])> {
        let mut out = Vec::new();
        fn go<'a>(p: &'a Process, out: &mut Vec<(&'a str, &'a [ChannelId])>) {
            match p {
                Process::Sum(bs) => bs.iter().for_each(|(_, c)| go(c, out)),
                Process::Par(a, b) => {
                    go(a, out);
                    go(b, out);
                }
                Process::Del(_, b) => go(b, out),
                Process::Call(x, args) => out.push((x, args)),
            }
        }
        go(self, &mut out);
        out
    }

    pub fn contracts(&self) -> Vec<&Contract> {
        let mut out = Vec::new();
        fn go<'a>(p: &'a Process, out: &mut Vec<&'a Contract>) {
            match p {
                Process::Sum(bs) => {
                    for (pre, c) in bs {
                        if let Prefix::Tell { contract, .. } = pre {
                            out.push(contract);
                        }
                        go(c, out);
                    }
                }
                Process::Par(a, b) => {
                    go(a, out);
                    go(b, out);
                }
                Process::Del(_, b) => go(b, out),
                Process::Call(..) => {}
            }
        }
        go(self, &mut out);
        out
    }
}

/// A name of the same kind as `v` that is not in `avoid`.
pub(crate) fn fresh_like(v: &ChannelId, avoid: &BTreeSet<ChannelId>) -> ChannelId {
    let base = v.name().trim_end_matches(|c: char| c.is_ascii_digit());
    let base = if base.is_empty() { "v" } else { base };
    (0..)
        .map(|k| v.renamed(format!("{base}{k}")))
        .find(|c| !avoid.contains(c))
        .expect("unbounded range")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Definition {
    pub name: String,
    pub params: Vec<String>,
    pub body: Process,
}

impl Definition {
    /// The body with parameters replaced by `args`.
    pub fn instantiate(&self, args: &[ChannelId]) -> Process {
        let map: BTreeMap<ChannelId, ChannelId> = self
            .params
            .iter()
            .zip(args)
            .map(|(p, a)| (ChannelId::Var(p.clone()), a.clone()))
            .collect();
        self.body.rename(&map)
    }
}

/// The table of constant definitions, shared cheaply.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Defs {
    map: Arc<BTreeMap<String, Definition>>,
}

impl Defs {
    pub fn new() -> Defs {
        Defs::default()
    }

    pub fn from_definitions(defs: Vec<Definition>) -> Result<Defs, SyntaxError> {
        let mut map = BTreeMap::new();
        for d in defs {
            if map.contains_key(&d.name) {
                return Err(SyntaxError::invariant(
                    Condition::ConstantDefinition,
                    format!("constant {} defined twice", d.name),
                ));
            }
            map.insert(d.name.clone(), d);
        }
        let defs = Defs { map: Arc::new(map) };
        defs.validate()?;
        Ok(defs)
    }

    pub fn get(&self, name: &str) -> Option<&Definition> {
        self.map.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Definition> {
        self.map.values()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Whether both handles share one table.
    pub(crate) fn same_table(&self, other: &Defs) -> bool {
        Arc::ptr_eq(&self.map, &other.map)
    }

    /// Union of two tables; a name defined in both must have the same definition.
    pub fn merge(&self, other: &Defs) -> Result<Defs, SyntaxError> {
        let mut map = (*self.map).clone();
        for d in other.iter() {
            match map.get(&d.name) {
                Some(old) if old != d => {
                    return Err(SyntaxError::invariant(
                        Condition::ConstantDefinition,
                        format!("conflicting definitions of {}", d.name),
                    ))
                }
                _ => {
                    map.insert(d.name.clone(), d.clone());
                }
            }
        }
        Ok(Defs { map: Arc::new(map) })
    }

    fn validate(&self) -> Result<(), SyntaxError> {
        for d in self.iter() {
            let params: BTreeSet<ChannelId> =
                d.params.iter().map(|p| ChannelId::Var(p.clone())).collect();
            if params.len() != d.params.len() {
                return Err(SyntaxError::invariant(
                    Condition::ConstantDefinition,
                    format!("repeated parameter in {}", d.name),
                ));
            }
            if let Some(u) = d.body.free_channels().difference(&params).next() {
                return Err(SyntaxError::invariant(
                    Condition::ConstantDefinition,
                    format!("channel {u} is free in the body of {} but not a parameter", d.name),
                ));
            }
            if let Some((x, _)) = d.body.unguarded_calls().first() {
                return Err(SyntaxError::invariant(
                    Condition::ConstantDefinition,
                    format!("call to {x} is not prefix-guarded in the body of {}", d.name),
                ));
            }
            self.check_calls(&d.body)?;
        }
        Ok(())
    }

    /// Every call refers to a defined constant with matching arity.
    pub fn check_calls(&self, p: &Process) -> Result<(), SyntaxError> {
        for (x, args) in p.all_calls() {
            match self.get(x) {
                None => {
                    return Err(SyntaxError::invariant(
                        Condition::ConstantDefinition,
                        format!("undefined constant {x}"),
                    ))
                }
                Some(d) if d.params.len() != args.len() => {
                    return Err(SyntaxError::invariant(
                        Condition::ConstantDefinition,
                        format!("{x} expects {} arguments", d.params.len()),
                    ))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// A latent contract `↓chan who says contract`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LatentItem {
    pub chan: ChannelId,
    pub who: Participant,
    pub contract: Contract,
}

/// A stipulated contract `A says c | B says d`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bilateral {
    pub left: (Participant, Contract),
    pub right: (Participant, Contract),
}

impl Bilateral {
    pub fn new(a: Participant, c: Contract, b: Participant, d: Contract) -> Bilateral {
        Bilateral {
            left: (a, c),
            right: (b, d),
        }
    }

    pub fn validate(&self) -> Result<(), SyntaxError> {
        if self.left.0 == self.right.0 {
            return Err(SyntaxError::invariant(
                Condition::BilateralShape,
                format!("participant {} on both sides", self.left.0),
            ));
        }
        if self.left.1.count_rdy() + self.right.1.count_rdy() > 1 {
            return Err(SyntaxError::invariant(
                Condition::BilateralShape,
                "more than one rdy",
            ));
        }
        self.left.1.validate()?;
        self.right.1.validate()
    }

    /// The side of `who`, if present.
    pub fn side(&self, who: &Participant) -> Option<&Contract> {
        if self.left.0 == *who {
            Some(&self.left.1)
        } else if self.right.0 == *who {
            Some(&self.right.1)
        } else {
            None
        }
    }

    pub fn participants(&self) -> [&Participant; 2] {
        [&self.left.0, &self.right.0]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum System {
    Zero,
    Participant(Participant, Process),
    Latent(Participant, Vec<LatentItem>),
    Session(String, Bilateral),
    Par(Box<System>, Box<System>),
    Del(Vec<ChannelId>, Box<System>),
}

impl System {
    pub fn par(a: System, b: System) -> System {
        System::Par(Box::new(a), Box::new(b))
    }

    pub fn del(vars: Vec<ChannelId>, body: System) -> System {
        System::Del(vars, Box::new(body))
    }

    /// Parallel composition of a list, `0` when empty.
    pub fn par_all(items: Vec<System>) -> System {
        let mut it = items.into_iter();
        match it.next() {
            None => System::Zero,
            Some(first) => it.fold(first, System::par),
        }
    }

    pub fn free_channels(&self) -> BTreeSet<ChannelId> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<ChannelId>, out: &mut BTreeSet<ChannelId>) {
        match self {
            System::Zero => {}
            System::Participant(_, p) => {
                out.extend(p.free_channels().into_iter().filter(|u| !bound.contains(u)))
            }
            System::Latent(_, items) => {
                for it in items {
                    if !bound.contains(&it.chan) {
                        out.insert(it.chan.clone());
                    }
                }
            }
            System::Session(s, _) => {
                let u = ChannelId::Session(s.clone());
                if !bound.contains(&u) {
                    out.insert(u);
                }
            }
            System::Par(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            System::Del(vs, body) => {
                let n = bound.len();
                bound.extend(vs.iter().cloned());
                body.collect_free(bound, out);
                bound.truncate(n);
            }
        }
    }

    /// Participants with a process term.
    pub fn participants(&self) -> Vec<&Participant> {
        let mut out = Vec::new();
        fn go<'a>(s: &'a System, out: &mut Vec<&'a Participant>) {
            match s {
                System::Participant(a, _) => out.push(a),
                System::Par(a, b) => {
                    go(a, out);
                    go(b, out);
                }
                System::Del(_, b) => go(b, out),
                _ => {}
            }
        }
        go(self, &mut out);
        out
    }

    /// Whether no process, latent or stipulated contract of `who` occurs.
    pub fn is_free_of(&self, who: &Participant) -> bool {
        match self {
            System::Zero => true,
            System::Participant(a, _) => a != who,
            System::Latent(_, items) => items.iter().all(|it| it.who != *who),
            System::Session(_, g) => !g.participants().contains(&who),
            System::Par(a, b) => a.is_free_of(who) && b.is_free_of(who),
            System::Del(_, b) => b.is_free_of(who),
        }
    }

    pub fn processes(&self) -> Vec<&Process> {
        let mut out = Vec::new();
        fn go<'a>(s: &'a System, out: &mut Vec<&'a Process>) {
            match s {
                System::Participant(_, p) => out.push(p),
                System::Par(a, b) => {
                    go(a, out);
                    go(b, out);
                }
                System::Del(_, b) => go(b, out),
                _ => {}
            }
        }
        go(self, &mut out);
        out
    }

    /// One process per participant, distinct sessions, well-formed contracts.
    pub fn validate(&self) -> Result<(), SyntaxError> {
        let mut seen = BTreeSet::new();
        for a in self.participants() {
            if !seen.insert(a) {
                return Err(SyntaxError::invariant(
                    Condition::OneProcessPerParticipant,
                    format!("participant {a} has two processes"),
                ));
            }
        }
        let mut sessions = BTreeSet::new();
        let mut stack = vec![self];
        while let Some(s) = stack.pop() {
            match s {
                System::Session(n, g) => {
                    if !sessions.insert(n) {
                        return Err(SyntaxError::invariant(
                            Condition::DistinctSessions,
                            format!("session @{n} occurs twice"),
                        ));
                    }
                    g.validate()?;
                }
                System::Latent(_, items) => {
                    for it in items {
                        it.contract.validate()?;
                        if it.contract.count_rdy() > 0 {
                            return Err(SyntaxError::invariant(
                                Condition::RdyTopLevel,
                                "latent contracts cannot carry rdy",
                            ));
                        }
                    }
                }
                System::Participant(_, p) => {
                    for c in p.contracts() {
                        c.validate()?;
                    }
                }
                System::Par(a, b) => {
                    stack.push(a);
                    stack.push(b);
                }
                System::Del(_, b) => stack.push(b),
                System::Zero => {}
            }
        }
        Ok(())
    }
}
