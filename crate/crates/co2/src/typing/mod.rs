//! Channel types, process types, and the typing rules for processes and
//! systems.

mod chan;
mod system;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use chan::{congruent, AbsAction, ChannelType};
pub use system::{type_system, type_system_judgment, Judgment, SystemTypeError};

use crate::honesty::{abstract_honest, HonestyConfig, HonestyVerdict, WitnessStep};
use crate::syntax::{ChannelId, Defs, Prefix, Process};

/// `[pi]_u`.
pub fn abstract_prefix(pi: &Prefix, u: &ChannelId) -> AbsAction {
    let here = pi.chan() == Some(u);
    match pi {
        Prefix::Tau => AbsAction::Tau,
        Prefix::Tell { contract, .. } if here => AbsAction::Tell(contract.clone()),
        Prefix::Tell { .. } => AbsAction::Tau,
        Prefix::Fuse => AbsAction::TauBlock,
        Prefix::Do { atom, .. } if here => AbsAction::Atom(atom.clone()),
        Prefix::Ask { obs, .. } if here => AbsAction::TauObs(obs.clone()),
        Prefix::Do { .. } | Prefix::Ask { .. } => AbsAction::TauBlock,
    }
}

/// A total map from channels to channel types: finitely many explicit
/// entries, and the entry of `*` everywhere else.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProcessType {
    explicit: BTreeMap<ChannelId, ChannelType>,
    default: ChannelType,
}

impl ProcessType {
    /// Entries syntactically equal to the default are dropped.
    pub fn new(explicit: BTreeMap<ChannelId, ChannelType>, default: ChannelType) -> ProcessType {
        let default = default.canon();
        let explicit = explicit
            .into_iter()
            .filter(|(u, _)| *u != ChannelId::Dummy)
            .map(|(u, t)| (u, t.canon()))
            .filter(|(_, t)| *t != default)
            .collect();
        ProcessType { explicit, default }
    }

    pub fn uniform(t: ChannelType) -> ProcessType {
        ProcessType::new(BTreeMap::new(), t)
    }

    pub fn get(&self, u: &ChannelId) -> &ChannelType {
        self.explicit.get(u).unwrap_or(&self.default)
    }

    pub fn default_type(&self) -> &ChannelType {
        &self.default
    }

    pub fn explicit(&self) -> &BTreeMap<ChannelId, ChannelType> {
        &self.explicit
    }

    /// `f{u -> t}`; `u = *` sets the default only.
    pub fn with(&self, u: &ChannelId, t: ChannelType) -> ProcessType {
        if *u == ChannelId::Dummy {
            return ProcessType::new(self.explicit.clone(), t);
        }
        let mut explicit = self.explicit.clone();
        explicit.insert(u.clone(), t);
        ProcessType::new(explicit, self.default.clone())
    }

    /// `f{u -> f(*)}`.
    pub fn reset(&self, u: &ChannelId) -> ProcessType {
        let mut f = self.clone();
        f.explicit.remove(u);
        f
    }

    pub fn map(&self, g: impl Fn(&ChannelType) -> ChannelType) -> ProcessType {
        ProcessType::new(
            self.explicit.iter().map(|(u, t)| (u.clone(), g(t))).collect(),
            g(&self.default),
        )
    }

    /// Pointwise congruence.
    pub fn congruent(&self, other: &ProcessType) -> bool {
        let dom: BTreeSet<&ChannelId> = self.explicit.keys().chain(other.explicit.keys()).collect();
        congruent(&self.default, &other.default)
            && dom.into_iter().all(|u| congruent(self.get(u), other.get(u)))
    }

    /// `f(u) = f(*)` up to congruence.
    pub fn is_default_at(&self, u: &ChannelId) -> bool {
        congruent(self.get(u), &self.default)
    }

    /// Checks honesty of every explicit entry and of the default.
    pub fn honesty(&self, cfg: &HonestyConfig) -> Vec<(ChannelId, HonestyVerdict)> {
        let mut out: Vec<(ChannelId, HonestyVerdict)> = self
            .explicit
            .iter()
            .map(|(u, t)| (u.clone(), abstract_honest(t, cfg)))
            .collect();
        out.push((ChannelId::Dummy, abstract_honest(&self.default, cfg)));
        out
    }

    pub fn json(&self) -> serde_json::Value {
        let mut m = serde_json::Map::new();
        for (u, t) in &self.explicit {
            m.insert(u.to_string(), serde_json::Value::String(t.to_string()));
        }
        m.insert("*".into(), serde_json::Value::String(self.default.to_string()));
        serde_json::Value::Object(m)
    }
}

impl fmt::Display for ProcessType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (u, t) in &self.explicit {
            writeln!(f, "{u}: {t}")?;
        }
        write!(f, "*: {}", self.default)
    }
}

impl Serialize for ProcessType {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.json().serialize(s)
    }
}

/// `f ⊑ g`: at every channel, `f(u)` is `g(u)` or `g(*)`.
pub fn leq(f: &ProcessType, g: &ProcessType) -> bool {
    let dom: BTreeSet<&ChannelId> = f.explicit.keys().chain(g.explicit.keys()).collect();
    let ok = |u: &ChannelId| congruent(f.get(u), g.get(u)) || congruent(f.get(u), &g.default);
    ok(&ChannelId::Dummy) && dom.into_iter().all(ok)
}

/// `f --pi--> f'`: every channel moves on `[pi]_u`. Returns every
/// combination of pointwise successors.
pub fn process_type_step(f: &ProcessType, pi: &Prefix) -> Vec<ProcessType> {
    let mut dom: Vec<ChannelId> = f.explicit.keys().cloned().collect();
    if let Some(u) = pi.chan() {
        if !dom.contains(u) {
            dom.push(u.clone());
        }
    }
    dom.push(ChannelId::Dummy);
    let mut choices: Vec<Vec<ChannelType>> = Vec::new();
    for u in &dom {
        let a = abstract_prefix(pi, u);
        let a = match a {
            AbsAction::Tell(c) => AbsAction::Tell(crate::syntax::alpha_normalize(&c)),
            a => a,
        };
        let next: Vec<ChannelType> = f
            .get(u)
            .step()
            .into_iter()
            .filter(|(b, _)| *b == a)
            .map(|(_, t)| t)
            .collect();
        if next.is_empty() {
            return Vec::new();
        }
        choices.push(next);
    }
    let mut out: Vec<ProcessType> = Vec::new();
    let mut idx = vec![0usize; dom.len()];
    loop {
        let mut explicit = BTreeMap::new();
        for (k, u) in dom.iter().enumerate().take(dom.len() - 1) {
            explicit.insert(u.clone(), choices[k][idx[k]].clone());
        }
        let last = dom.len() - 1;
        out.push(ProcessType::new(explicit, choices[last][idx[last]].clone()));
        let mut k = 0;
        loop {
            if k == dom.len() {
                out.sort();
                out.dedup();
                return out;
            }
            idx[k] += 1;
            if idx[k] < choices[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// `f{us -> v}`: the identity when every `u` is at the default, moves the
/// unique non-default entry to `v`, and is undefined otherwise.
pub fn type_subst(f: &ProcessType, us: &[ChannelId], v: &ChannelId) -> Option<ProcessType> {
    let moved: Vec<&ChannelId> = us.iter().filter(|u| !f.is_default_at(u)).collect();
    match moved.as_slice() {
        [] => Some(f.clone()),
        [u0] => {
            let t = f.get(u0).clone();
            Some(f.reset(u0).with(v, t))
        }
        _ => None,
    }
}

/// A delimited channel whose type is not honest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DishonestChannel {
    pub channel: String,
    pub channel_type: String,
    pub witness: Vec<WitnessStep>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct UndecidedChannel {
    pub channel: String,
    pub channel_type: String,
    pub reason: String,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum TypeError {
    #[error("undefined constant {0}")]
    UndefinedConstant(String),
    #[error("dishonest delimited channel(s): {}", channel_list(.0.iter().map(|d| &d.channel)))]
    DishonestChannel(Vec<DishonestChannel>),
    #[error("honesty undetermined within bounds for channel(s): {}", channel_list(.0.iter().map(|d| &d.channel)))]
    Inconclusive(Vec<UndecidedChannel>),
    #[error("typing {constant} needs more than {depth} nested unfoldings (recursion through delimited channels)")]
    FixpointDivergence { constant: String, depth: usize },
}

fn channel_list<'a>(it: impl Iterator<Item = &'a String>) -> String {
    it.cloned().collect::<Vec<_>>().join(", ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TypeConfig {
    pub honesty: HonestyConfig,
    /// Largest number of nested constant unfoldings.
    pub max_unfold: usize,
}

impl Default for TypeConfig {
    fn default() -> Self {
        TypeConfig {
            honesty: HonestyConfig::default(),
            max_unfold: 64,
        }
    }
}

type Key = (String, Vec<ChannelId>);

struct Frame {
    id: usize,
    key: Key,
    hidden: bool,
}

struct Obligation {
    channel: String,
    ty: ChannelType,
}

struct Typer<'a> {
    defs: &'a Defs,
    cfg: TypeConfig,
    frames: Vec<Frame>,
    cache: BTreeMap<Key, ProcessType>,
    pending: Vec<Obligation>,
    checked: BTreeMap<ChannelType, HonestyVerdict>,
    dishonest: Vec<DishonestChannel>,
    undecided: Vec<UndecidedChannel>,
    fresh: usize,
}

fn unknown(id: usize, u: &ChannelId) -> String {
    format!("?{id}:{u}")
}

fn is_closed(t: &ChannelType) -> bool {
    t.free_vars().iter().all(|x| !x.starts_with('?'))
}

impl<'a> Typer<'a> {
    fn new(defs: &'a Defs, cfg: TypeConfig) -> Typer<'a> {
        Typer {
            defs,
            cfg,
            frames: Vec::new(),
            cache: BTreeMap::new(),
            pending: Vec::new(),
            checked: BTreeMap::new(),
            dishonest: Vec::new(),
            undecided: Vec::new(),
            fresh: 0,
        }
    }

    fn ty(&mut self, p: &Process) -> Result<ProcessType, TypeError> {
        match p {
            Process::Sum(bs) => {
                let mut parts = Vec::new();
                let mut dom = BTreeSet::new();
                for (pi, k) in bs {
                    let f = self.ty(k)?;
                    dom.extend(f.explicit.keys().cloned());
                    if let Some(u) = pi.chan() {
                        dom.insert(u.clone());
                    }
                    parts.push((pi, f));
                }
                let at = |u: &ChannelId| {
                    ChannelType::Sum(
                        parts
                            .iter()
                            .map(|(pi, f)| ChannelType::prefix(abstract_prefix(pi, u), f.get(u).clone()))
                            .collect(),
                    )
                };
                Ok(ProcessType::new(
                    dom.iter().map(|u| (u.clone(), at(u))).collect(),
                    at(&ChannelId::Dummy),
                ))
            }
            Process::Par(a, b) => {
                let f = self.ty(a)?;
                let g = self.ty(b)?;
                let dom: BTreeSet<ChannelId> =
                    f.explicit.keys().chain(g.explicit.keys()).cloned().collect();
                let at = |u: &ChannelId| ChannelType::Par(vec![f.get(u).clone(), g.get(u).clone()]);
                Ok(ProcessType::new(
                    dom.iter().map(|u| (u.clone(), at(u))).collect(),
                    at(&ChannelId::Dummy),
                ))
            }
            Process::Del(vs, body) => {
                let mut map = BTreeMap::new();
                for v in vs {
                    self.fresh += 1;
                    map.insert(v.clone(), v.renamed(format!("{}#{}", v.name(), self.fresh)));
                }
                let body = body.rename(&map);
                let fresh: Vec<ChannelId> = map.values().cloned().collect();
                let mut hidden = Vec::new();
                for (i, fr) in self.frames.iter_mut().enumerate() {
                    if !fr.hidden && fr.key.1.iter().any(|u| fresh.contains(u)) {
                        fr.hidden = true;
                        hidden.push(i);
                    }
                }
                let f = self.ty(&body);
                for i in hidden {
                    self.frames[i].hidden = false;
                }
                let mut f = f?;
                for v in vs {
                    let w = &map[v];
                    self.pending.push(Obligation {
                        channel: v.to_string(),
                        ty: f.get(w).clone(),
                    });
                    f = f.reset(w);
                }
                self.settle();
                Ok(f)
            }
            Process::Call(x, args) => self.call(x, args),
        }
    }

    fn call(&mut self, x: &str, args: &[ChannelId]) -> Result<ProcessType, TypeError> {
        let key: Key = (x.to_string(), args.to_vec());
        if let Some(fr) = self.frames.iter().rev().find(|fr| !fr.hidden && fr.key == key) {
            let id = fr.id;
            return Ok(ProcessType::new(
                args.iter()
                    .map(|u| (u.clone(), ChannelType::Var(unknown(id, u))))
                    .collect(),
                ChannelType::Var(unknown(id, &ChannelId::Dummy)),
            ));
        }
        if let Some(f) = self.cache.get(&key) {
            return Ok(f.clone());
        }
        let def = self
            .defs
            .get(x)
            .ok_or_else(|| TypeError::UndefinedConstant(x.to_string()))?;
        if self.frames.len() >= self.cfg.max_unfold {
            return Err(TypeError::FixpointDivergence {
                constant: x.to_string(),
                depth: self.cfg.max_unfold,
            });
        }
        self.fresh += 1;
        let id = self.fresh;
        self.frames.push(Frame {
            id,
            key: key.clone(),
            hidden: false,
        });
        let body = def.instantiate(args);
        let f = self.ty(&body);
        self.frames.pop();
        let f = f?;
        let mut chans: Vec<ChannelId> = args.to_vec();
        chans.push(ChannelId::Dummy);
        chans.sort();
        chans.dedup();
        let mut solution = Vec::new();
        for u in &chans {
            let v = unknown(id, u);
            let t = f.get(u);
            let t = if t.mentions(&v) {
                let z = format!("&{id}");
                ChannelType::rec(&z, t.subst(&v, &ChannelType::Var(z.clone())))
            } else {
                t.clone()
            };
            solution.push((u.clone(), v, t));
        }
        let subst_all = |t: &ChannelType| {
            solution
                .iter()
                .fold(t.clone(), |acc, (_, v, s)| acc.subst(v, s))
                .canon()
        };
        let mut explicit = BTreeMap::new();
        let mut default = f.default.clone();
        for (u, _, t) in &solution {
            if *u == ChannelId::Dummy {
                default = t.clone();
            } else {
                explicit.insert(u.clone(), t.clone());
            }
        }
        for (u, t) in &f.explicit {
            if !chans.contains(u) {
                explicit.insert(u.clone(), subst_all(t));
            }
        }
        let result = ProcessType::new(explicit, default);
        for ob in &mut self.pending {
            ob.ty = subst_all(&ob.ty);
        }
        self.settle();
        if is_closed(&result.default) && result.explicit.values().all(is_closed) {
            self.cache.insert(key, result.clone());
        }
        Ok(result)
    }

    /// Checks the pending obligations whose types no longer mention unknowns.
    fn settle(&mut self) {
        let (ready, open): (Vec<Obligation>, Vec<Obligation>) =
            std::mem::take(&mut self.pending).into_iter().partition(|o| is_closed(&o.ty));
        self.pending = open;
        for ob in ready {
            let verdict = match self.checked.get(&ob.ty) {
                Some(v) => v.clone(),
                None => {
                    let v = abstract_honest(&ob.ty, &self.cfg.honesty);
                    self.checked.insert(ob.ty.clone(), v.clone());
                    v
                }
            };
            match &verdict {
                HonestyVerdict::Honest { .. } => {}
                HonestyVerdict::Dishonest { .. } => {
                    let d = DishonestChannel {
                        channel: ob.channel.clone(),
                        channel_type: ob.ty.to_string(),
                        witness: verdict.witness().unwrap_or_default(),
                    };
                    if !self.dishonest.contains(&d) {
                        self.dishonest.push(d);
                    }
                }
                HonestyVerdict::Inconclusive { reason } => {
                    let d = UndecidedChannel {
                        channel: ob.channel.clone(),
                        channel_type: ob.ty.to_string(),
                        reason: reason.clone(),
                    };
                    if !self.undecided.contains(&d) {
                        self.undecided.push(d);
                    }
                }
            }
        }
    }
}

/// `∅ ⊢ P : f`. Recursive constants are typed by tying each channel's
/// knot into a recursive channel type; every delimitation requires the
/// delimited channel's type to be honest.
pub fn type_process(defs: &Defs, p: &Process, cfg: &TypeConfig) -> Result<ProcessType, TypeError> {
    let mut typer = Typer::new(defs, *cfg);
    let f = typer.ty(p)?;
    debug_assert!(typer.pending.is_empty());
    if !typer.dishonest.is_empty() {
        return Err(TypeError::DishonestChannel(typer.dishonest));
    }
    if !typer.undecided.is_empty() {
        return Err(TypeError::Inconclusive(typer.undecided));
    }
    Ok(f)
}
