//! Canonical representatives of systems up to structural congruence.
//!
//! Delimitations are floated to the top, parallel compositions flattened and
//! sorted, latent stores merged, inert parts and unused binders dropped.
//! Bound names are chosen canonically: the assignment minimising the printed
//! form among all assignments compatible with each binder's usage signature.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::syntax::{Bilateral, ChannelId, Defs, LatentItem, Participant, Prefix, Process, System};

/// A system in normal form.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NormalSystem {
    pub(crate) bound: Vec<ChannelId>,
    pub(crate) procs: BTreeMap<Participant, Vec<Process>>,
    pub(crate) latent: BTreeMap<Participant, Vec<LatentItem>>,
    pub(crate) sessions: BTreeMap<String, Bilateral>,
}

impl NormalSystem {
    pub fn bound(&self) -> &[ChannelId] {
        &self.bound
    }

    /// Sequential components of each participant's process.
    pub fn processes(&self) -> &BTreeMap<Participant, Vec<Process>> {
        &self.procs
    }

    pub fn latent(&self) -> &BTreeMap<Participant, Vec<LatentItem>> {
        &self.latent
    }

    pub fn sessions(&self) -> &BTreeMap<String, Bilateral> {
        &self.sessions
    }

    pub fn is_zero(&self) -> bool {
        self.procs.is_empty() && self.latent.is_empty() && self.sessions.is_empty()
    }

    /// The process of `who`, as a parallel composition of its components.
    pub fn process_of(&self, who: &Participant) -> Process {
        par_of(self.procs.get(who).cloned().unwrap_or_default())
    }

    /// The same system with every top-level binder removed.
    pub fn opened(&self) -> NormalSystem {
        NormalSystem {
            bound: Vec::new(),
            ..self.clone()
        }
    }

    pub fn free_channels(&self) -> BTreeSet<ChannelId> {
        let mut out = self.all_names();
        for b in &self.bound {
            out.remove(b);
        }
        out
    }

    pub(crate) fn all_names(&self) -> BTreeSet<ChannelId> {
        let mut out: BTreeSet<ChannelId> = self.bound.iter().cloned().collect();
        for comps in self.procs.values() {
            for p in comps {
                out.extend(p.free_channels());
            }
        }
        for items in self.latent.values() {
            out.extend(items.iter().map(|it| it.chan.clone()));
        }
        out.extend(self.sessions.keys().map(|s| ChannelId::Session(s.clone())));
        out
    }

    pub fn to_system(&self) -> System {
        let mut items = Vec::new();
        for (a, comps) in &self.procs {
            items.push(System::Participant(a.clone(), par_of(comps.clone())));
        }
        for (a, ks) in &self.latent {
            items.push(System::Latent(a.clone(), ks.clone()));
        }
        for (s, g) in &self.sessions {
            items.push(System::Session(s.clone(), g.clone()));
        }
        let body = System::par_all(items);
        if self.bound.is_empty() {
            body
        } else {
            System::del(self.bound.clone(), body)
        }
    }
}

impl fmt::Display for NormalSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_system())
    }
}

impl Serialize for NormalSystem {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

pub(crate) fn par_of(mut comps: Vec<Process>) -> Process {
    match comps.len() {
        0 => Process::nil(),
        1 => comps.pop().expect("one component"),
        _ => {
            let mut it = comps.into_iter();
            let first = it.next().expect("nonempty");
            it.fold(first, Process::par)
        }
    }
}

/// Source of temporary names that cannot clash with user identifiers.
pub(crate) struct Temps {
    tag: char,
    next: usize,
}

impl Temps {
    pub(crate) fn new(tag: char) -> Temps {
        Temps { tag, next: 0 }
    }

    pub(crate) fn fresh(&mut self, like: &ChannelId) -> ChannelId {
        self.next += 1;
        like.renamed(format!("\u{1}{}{}", self.tag, self.next))
    }
}

/// Splits a process into binders and sequential components (nonempty sums
/// and calls), renaming binders apart with temporary names.
pub(crate) fn flatten_process(
    p: &Process,
    env: &BTreeMap<ChannelId, ChannelId>,
    temps: &mut Temps,
    binders: &mut Vec<ChannelId>,
    comps: &mut Vec<Process>,
) {
    match p {
        Process::Sum(bs) if bs.is_empty() => {}
        Process::Sum(_) | Process::Call(..) => comps.push(p.rename(env)),
        Process::Par(a, b) => {
            flatten_process(a, env, temps, binders, comps);
            flatten_process(b, env, temps, binders, comps);
        }
        Process::Del(vs, body) => {
            let mut inner = env.clone();
            for v in vs {
                let t = temps.fresh(v);
                inner.insert(v.clone(), t.clone());
                binders.push(t);
            }
            flatten_process(body, &inner, temps, binders, comps);
        }
    }
}

/// The `k`-th name `prefix0, prefix1, ...` not in `avoid`.
fn nth_name(like: &ChannelId, prefix: &str, k: usize, avoid: &BTreeSet<ChannelId>) -> ChannelId {
    (0..)
        .map(|i| like.renamed(format!("{prefix}{i}")))
        .filter(|c| !avoid.contains(c))
        .nth(k)
        .expect("unbounded range")
}

const MAX_PERMUTATIONS: usize = 720;

/// Canonical final names for `binders`, given a renderer of the block under a
/// renaming. Names are `name_for(binder, index among binders of its kind)`.
fn assign_names(
    binders: &[ChannelId],
    render: &dyn Fn(&BTreeMap<ChannelId, ChannelId>) -> String,
    name_for: &dyn Fn(&ChannelId, usize) -> ChannelId,
) -> BTreeMap<ChannelId, ChannelId> {
    if binders.is_empty() {
        return BTreeMap::new();
    }
    let mark = |b: &ChannelId| b.renamed("\u{2}#".into());
    let other = |b: &ChannelId| b.renamed("\u{2}_".into());
    let mut keyed: Vec<((bool, String), ChannelId)> = binders
        .iter()
        .map(|b| {
            let map: BTreeMap<ChannelId, ChannelId> = binders
                .iter()
                .map(|c| (c.clone(), if c == b { mark(c) } else { other(c) }))
                .collect();
            ((b.is_session(), render(&map)), b.clone())
        })
        .collect();
    keyed.sort();
    let mut groups: Vec<Vec<ChannelId>> = Vec::new();
    let mut last: Option<&(bool, String)> = None;
    for (k, b) in &keyed {
        if last == Some(k) {
            groups.last_mut().expect("group").push(b.clone());
        } else {
            groups.push(vec![b.clone()]);
        }
        last = Some(k);
    }
    let naming = |order: &[ChannelId]| -> BTreeMap<ChannelId, ChannelId> {
        let (mut nv, mut ns) = (0, 0);
        order
            .iter()
            .map(|b| {
                let idx = if b.is_session() {
                    ns += 1;
                    ns - 1
                } else {
                    nv += 1;
                    nv - 1
                };
                (b.clone(), name_for(b, idx))
            })
            .collect()
    };
    let count: usize = groups
        .iter()
        .map(|g| (1..=g.len()).product::<usize>())
        .try_fold(1usize, |acc, n| acc.checked_mul(n).filter(|m| *m <= MAX_PERMUTATIONS))
        .unwrap_or(usize::MAX);
    let base: Vec<ChannelId> = groups.iter().flatten().cloned().collect();
    if count <= 1 || count == usize::MAX {
        return naming(&base);
    }
    let mut best: Option<(String, BTreeMap<ChannelId, ChannelId>)> = None;
    let mut perms: Vec<Vec<ChannelId>> = vec![Vec::new()];
    for g in &groups {
        let gp = permutations(g);
        perms = perms
            .into_iter()
            .flat_map(|pre| {
                gp.iter().map(move |p| {
                    let mut v = pre.clone();
                    v.extend(p.iter().cloned());
                    v
                })
            })
            .collect();
    }
    for order in perms {
        let map = naming(&order);
        let s = render(&map);
        if best.as_ref().map_or(true, |(b, _)| s < *b) {
            best = Some((s, map));
        }
    }
    best.expect("at least one permutation").1
}

fn permutations(v: &[ChannelId]) -> Vec<Vec<ChannelId>> {
    if v.len() <= 1 {
        return vec![v.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..v.len() {
        let mut rest = v.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x.clone());
            out.push(p);
        }
    }
    out
}

fn render_procs(comps: &[Process], map: &BTreeMap<ChannelId, ChannelId>) -> String {
    let mut v: Vec<String> = comps.iter().map(|c| c.rename(map).to_string()).collect();
    v.sort();
    v.join(" | ")
}

/// Canonical form of a sequential component whose inner binders live at
/// nesting `depth`.
fn canon_seq(p: &Process, depth: usize, avoid: &BTreeSet<ChannelId>) -> Process {
    match p {
        Process::Sum(bs) => {
            let mut out: Vec<(Prefix, Process)> = bs
                .iter()
                .map(|(pre, c)| (pre.clone(), canon_cont(c, depth, avoid)))
                .collect();
            out.sort();
            Process::Sum(out)
        }
        other => other.clone(),
    }
}

/// Canonical form of an arbitrary process nested under a prefix.
pub(crate) fn canon_cont(p: &Process, depth: usize, avoid: &BTreeSet<ChannelId>) -> Process {
    let mut temps = Temps::new('c');
    let mut binders = Vec::new();
    let mut comps = Vec::new();
    flatten_process(p, &BTreeMap::new(), &mut temps, &mut binders, &mut comps);
    let used: BTreeSet<ChannelId> = comps.iter().flat_map(|c| c.free_channels()).collect();
    binders.retain(|b| used.contains(b));
    let inner = depth + binders.len();
    let comps: Vec<Process> = comps.iter().map(|c| canon_seq(c, inner, avoid)).collect();
    let map = assign_names(
        &binders,
        &|m| render_procs(&comps, m),
        &|b, i| {
            let prefix = if b.is_session() { "r" } else { "y" };
            nth_name(b, prefix, depth + i, avoid)
        },
    );
    let mut comps: Vec<Process> = comps.iter().map(|c| c.rename(&map)).collect();
    comps.sort();
    let mut names: Vec<ChannelId> = binders.iter().map(|b| map[b].clone()).collect();
    names.sort();
    let body = par_of(comps);
    if names.is_empty() {
        body
    } else {
        Process::del(names, body)
    }
}

#[derive(Clone)]
enum Item {
    Proc(Participant, Process),
    Latent(Participant, LatentItem),
    Session(ChannelId, Bilateral),
}

impl Item {
    fn rename(&self, map: &BTreeMap<ChannelId, ChannelId>) -> Item {
        let r = |u: &ChannelId| map.get(u).cloned().unwrap_or_else(|| u.clone());
        match self {
            Item::Proc(a, p) => Item::Proc(a.clone(), p.rename(map)),
            Item::Latent(a, it) => Item::Latent(
                a.clone(),
                LatentItem {
                    chan: r(&it.chan),
                    ..it.clone()
                },
            ),
            Item::Session(s, g) => Item::Session(r(s), g.clone()),
        }
    }

    fn render(&self) -> String {
        match self {
            Item::Proc(a, p) => format!("{a}[{p}]"),
            Item::Latent(a, it) => format!("{a}[{it}]"),
            Item::Session(s, g) => format!("{s}[{g}]"),
        }
    }

    fn free(&self) -> BTreeSet<ChannelId> {
        match self {
            Item::Proc(_, p) => p.free_channels(),
            Item::Latent(_, it) => BTreeSet::from([it.chan.clone()]),
            Item::Session(s, _) => BTreeSet::from([s.clone()]),
        }
    }
}

fn flatten_system(
    s: &System,
    env: &BTreeMap<ChannelId, ChannelId>,
    temps: &mut Temps,
    binders: &mut Vec<ChannelId>,
    items: &mut Vec<Item>,
) {
    let r = |u: &ChannelId| env.get(u).cloned().unwrap_or_else(|| u.clone());
    match s {
        System::Zero => {}
        System::Participant(a, p) => {
            let mut comps = Vec::new();
            flatten_process(p, env, temps, binders, &mut comps);
            items.extend(comps.into_iter().map(|c| Item::Proc(a.clone(), c)));
        }
        System::Latent(a, ks) => {
            for it in ks {
                items.push(Item::Latent(
                    a.clone(),
                    LatentItem {
                        chan: r(&it.chan),
                        who: it.who.clone(),
                        contract: crate::syntax::alpha_normalize(&it.contract),
                    },
                ));
            }
        }
        System::Session(n, g) => {
            let mut g = g.clone();
            g.left.1 = crate::syntax::alpha_normalize(&g.left.1);
            g.right.1 = crate::syntax::alpha_normalize(&g.right.1);
            if g.right.0 < g.left.0 {
                std::mem::swap(&mut g.left, &mut g.right);
            }
            items.push(Item::Session(r(&ChannelId::Session(n.clone())), g));
        }
        System::Par(a, b) => {
            flatten_system(a, env, temps, binders, items);
            flatten_system(b, env, temps, binders, items);
        }
        System::Del(vs, body) => {
            let mut inner = env.clone();
            for v in vs {
                let t = temps.fresh(v);
                inner.insert(v.clone(), t.clone());
                binders.push(t);
            }
            flatten_system(body, &inner, temps, binders, items);
        }
    }
}

/// The canonical representative of the congruence class of `s`.
pub fn normalize(s: &System) -> NormalSystem {
    let mut temps = Temps::new('n');
    let mut binders = Vec::new();
    let mut items = Vec::new();
    flatten_system(s, &BTreeMap::new(), &mut temps, &mut binders, &mut items);
    let used: BTreeSet<ChannelId> = items.iter().flat_map(|i| i.free()).collect();
    binders.retain(|b| used.contains(b));
    let bset: BTreeSet<ChannelId> = binders.iter().cloned().collect();
    let avoid: BTreeSet<ChannelId> = used.difference(&bset).cloned().collect();
    let items: Vec<Item> = items
        .into_iter()
        .map(|i| match i {
            Item::Proc(a, p) => Item::Proc(a, canon_seq(&p, 0, &avoid)),
            other => other,
        })
        .collect();
    let render = |m: &BTreeMap<ChannelId, ChannelId>| {
        let mut v: Vec<String> = items.iter().map(|i| i.rename(m).render()).collect();
        v.sort();
        v.join(" | ")
    };
    let map = assign_names(&binders, &render, &|b, i| {
        let prefix = if b.is_session() { "s" } else { "x" };
        nth_name(b, prefix, i, &avoid)
    });
    let mut out = NormalSystem {
        bound: binders.iter().map(|b| map[b].clone()).collect(),
        procs: BTreeMap::new(),
        latent: BTreeMap::new(),
        sessions: BTreeMap::new(),
    };
    out.bound.sort();
    for it in items {
        match it.rename(&map) {
            Item::Proc(a, p) => out.procs.entry(a).or_default().push(p),
            Item::Latent(a, k) => out.latent.entry(a).or_default().push(k),
            Item::Session(s, g) => {
                out.sessions.insert(s.name().to_string(), g);
            }
        }
    }
    for v in out.procs.values_mut() {
        v.sort();
    }
    for v in out.latent.values_mut() {
        v.sort();
    }
    out
}

/// Unfolds a call once, yielding its binders and sequential components.
pub(crate) fn expand_call(
    p: &Process,
    defs: &Defs,
    temps: &mut Temps,
) -> (Vec<ChannelId>, Vec<Process>) {
    let mut binders = Vec::new();
    let mut comps = Vec::new();
    match p {
        Process::Call(x, args) => {
            let def = defs
                .get(x)
                .unwrap_or_else(|| panic!("undefined constant {x} reached the runtime"));
            let body = def.instantiate(args);
            flatten_process(&body, &BTreeMap::new(), temps, &mut binders, &mut comps);
        }
        other => comps.push(other.clone()),
    }
    (binders, comps)
}
