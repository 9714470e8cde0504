//! Reduction semantics of systems, ready-do sets, readiness, and bounded
//! honesty testing.

mod normal;

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::rc::Rc;

use serde::Serialize;
use thiserror::Error;

pub use normal::{normalize, NormalSystem};
use normal::{expand_call, par_of, Temps};

use crate::contracts::{compliant, contract_step, observes, ready_sets, ReadyElem, ReadySet};
use crate::syntax::{
    alpha_normalize, Atom, Bilateral, ChannelId, Contract, Defs, LatentItem, Participant, Prefix,
    Process, System,
};

/// Label `A : π, σ` of a system transition.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SysLabel {
    pub participant: Participant,
    pub prefix: Prefix,
    pub sigma: BTreeMap<ChannelId, String>,
}

impl fmt::Display for SysLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} : {}", self.participant, self.prefix)?;
        if !self.sigma.is_empty() {
            let parts: Vec<String> = self
                .sigma
                .iter()
                .map(|(u, s)| format!("{u} -> @{s}"))
                .collect();
            write!(f, " {{{}}}", parts.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuntimeError {
    #[error("context {index} is not free of participant {who}")]
    ContextNotAFree { index: usize, who: Participant },
    #[error("participant {0} has no process in the system")]
    MissingParticipant(Participant),
}

/// A run: the initial system and each step taken from it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub initial: NormalSystem,
    pub steps: Vec<(SysLabel, NormalSystem)>,
}

#[derive(Serialize)]
struct StepLine<'a> {
    participant: &'a Participant,
    prefix: String,
    sigma: BTreeMap<String, String>,
    #[serde(rename = "systemAfter")]
    system_after: String,
}

impl Trace {
    pub fn last(&self) -> &NormalSystem {
        self.steps.last().map_or(&self.initial, |(_, s)| s)
    }

    /// One JSON object per step.
    pub fn json_lines(&self) -> Vec<serde_json::Value> {
        self.steps
            .iter()
            .map(|(l, s)| {
                serde_json::to_value(StepLine {
                    participant: &l.participant,
                    prefix: l.prefix.to_string(),
                    sigma: l
                        .sigma
                        .iter()
                        .map(|(u, s)| (u.to_string(), format!("@{s}")))
                        .collect(),
                    system_after: s.to_string(),
                })
                .expect("serializable step")
            })
            .collect()
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.initial)?;
        for (l, s) in &self.steps {
            writeln!(f, "  --[{l}]-->")?;
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

fn fresh_session(ns: &NormalSystem) -> String {
    let names = ns.all_names();
    (0..)
        .map(|k| format!("s{k}"))
        .find(|s| !names.contains(&ChannelId::Session(s.clone())))
        .expect("unbounded range")
}

/// Ingredients of a successor before normalization.
struct Parts {
    bound: Vec<ChannelId>,
    procs: BTreeMap<Participant, Vec<Process>>,
    latent: BTreeMap<Participant, Vec<LatentItem>>,
    sessions: BTreeMap<String, Bilateral>,
}

impl Parts {
    fn of(ns: &NormalSystem) -> Parts {
        Parts {
            bound: ns.bound.clone(),
            procs: ns.procs.clone(),
            latent: ns.latent.clone(),
            sessions: ns.sessions.clone(),
        }
    }

    fn rename(&mut self, map: &BTreeMap<ChannelId, ChannelId>) {
        for comps in self.procs.values_mut() {
            for p in comps.iter_mut() {
                *p = p.rename(map);
            }
        }
        for items in self.latent.values_mut() {
            for it in items.iter_mut() {
                if let Some(v) = map.get(&it.chan) {
                    it.chan = v.clone();
                }
            }
        }
    }

    fn finish(self) -> NormalSystem {
        let mut items = Vec::new();
        for (a, comps) in self.procs {
            items.push(System::Participant(a, par_of(comps)));
        }
        for (a, ks) in self.latent {
            if !ks.is_empty() {
                items.push(System::Latent(a, ks));
            }
        }
        for (s, g) in self.sessions {
            items.push(System::Session(s, g));
        }
        normalize(&System::del(self.bound, System::par_all(items)))
    }
}

const STEP_MEMO_CAP: usize = 1 << 15;

type Steps = Rc<Vec<(SysLabel, NormalSystem)>>;

thread_local! {
    static STEP_MEMO: RefCell<(Defs, HashMap<NormalSystem, Steps>)> =
        RefCell::new((Defs::new(), HashMap::new()));
}

/// All transitions of a normalized system, sorted by label then target.
pub fn system_step(ns: &NormalSystem, defs: &Defs) -> Vec<(SysLabel, NormalSystem)> {
    let hit = STEP_MEMO.with(|m| {
        let m = m.borrow();
        if m.0.same_table(defs) {
            m.1.get(ns).cloned()
        } else {
            None
        }
    });
    if let Some(v) = hit {
        return v.to_vec();
    }
    let v: Steps = Rc::new(compute_steps(ns, defs));
    STEP_MEMO.with(|m| {
        let mut m = m.borrow_mut();
        if !m.0.same_table(defs) {
            *m = (defs.clone(), HashMap::new());
        }
        if m.1.len() >= STEP_MEMO_CAP {
            m.1.clear();
        }
        m.1.insert(ns.clone(), v.clone());
    });
    v.to_vec()
}

fn compute_steps(ns: &NormalSystem, defs: &Defs) -> Vec<(SysLabel, NormalSystem)> {
    let mut out = Vec::new();
    let mut temps = Temps::new('u');
    for (who, comps) in &ns.procs {
        for i in 0..comps.len() {
            let (new_binders, expanded) = expand_call(&comps[i], defs, &mut temps);
            let others: Vec<Process> = comps
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != i)
                .map(|(_, p)| p.clone())
                .collect();
            for (j, comp) in expanded.iter().enumerate() {
                let Process::Sum(branches) = comp else {
                    continue;
                };
                for (pre, cont) in branches {
                    let base = |extra: Process| {
                        let mut parts = Parts::of(ns);
                        parts.bound.extend(new_binders.iter().cloned());
                        let mut mine = others.clone();
                        mine.extend(
                            expanded
                                .iter()
                                .enumerate()
                                .filter(|(k, _)| *k != j)
                                .map(|(_, p)| p.clone()),
                        );
                        mine.push(extra);
                        parts.procs.insert(who.clone(), mine);
                        parts
                    };
                    let label = |sigma| SysLabel {
                        participant: who.clone(),
                        prefix: pre.clone(),
                        sigma,
                    };
                    match pre {
                        Prefix::Tau => {
                            out.push((label(BTreeMap::new()), base(cont.clone()).finish()));
                        }
                        Prefix::Tell { to, chan, contract } => {
                            let mut parts = base(cont.clone());
                            parts.latent.entry(to.clone()).or_default().push(LatentItem {
                                chan: chan.clone(),
                                who: who.clone(),
                                contract: alpha_normalize(contract),
                            });
                            out.push((label(BTreeMap::new()), parts.finish()));
                        }
                        Prefix::Fuse => {
                            let store = ns.latent.get(who).cloned().unwrap_or_default();
                            for a in 0..store.len() {
                                for b in a + 1..store.len() {
                                    if let Some((sigma, next)) =
                                        fuse(ns, &store, a, b, who, &base(cont.clone()))
                                    {
                                        out.push((label(sigma), next));
                                    }
                                }
                            }
                        }
                        Prefix::Do { chan, atom } => {
                            let ChannelId::Session(s) = chan else {
                                continue;
                            };
                            let Some(g) = ns.sessions.get(s) else {
                                continue;
                            };
                            let mut seen = BTreeSet::new();
                            for (l, g2) in contract_step(g) {
                                if l.participant == *who && l.atom == *atom && seen.insert(g2.clone())
                                {
                                    let mut parts = base(cont.clone());
                                    parts.sessions.insert(s.clone(), g2);
                                    out.push((label(BTreeMap::new()), parts.finish()));
                                }
                            }
                        }
                        Prefix::Ask { chan, obs } => {
                            let ChannelId::Session(s) = chan else {
                                continue;
                            };
                            let Some(g) = ns.sessions.get(s) else {
                                continue;
                            };
                            if g.side(who).is_some_and(|c| observes(c, obs)) {
                                out.push((label(BTreeMap::new()), base(cont.clone()).finish()));
                            }
                        }
                    }
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

fn fuse(
    ns: &NormalSystem,
    store: &[LatentItem],
    a: usize,
    b: usize,
    broker: &Participant,
    parts: &Parts,
) -> Option<(BTreeMap<ChannelId, String>, NormalSystem)> {
    let (ka, kb) = (&store[a], &store[b]);
    if !ka.chan.is_var() || !kb.chan.is_var() || ka.who == kb.who {
        return None;
    }
    if !compliant(&ka.contract, &kb.contract) {
        return None;
    }
    let s = fresh_session(ns);
    let sid = ChannelId::Session(s.clone());
    let mut parts = Parts {
        bound: parts.bound.clone(),
        procs: parts.procs.clone(),
        latent: parts.latent.clone(),
        sessions: parts.sessions.clone(),
    };
    let rest: Vec<LatentItem> = store
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != a && *k != b)
        .map(|(_, it)| it.clone())
        .collect();
    parts.latent.insert(broker.clone(), rest);
    let vars: BTreeSet<ChannelId> = [ka.chan.clone(), kb.chan.clone()].into();
    let map: BTreeMap<ChannelId, ChannelId> =
        vars.iter().map(|v| (v.clone(), sid.clone())).collect();
    parts.rename(&map);
    let all_bound = vars.iter().all(|v| parts.bound.contains(v));
    parts.bound.retain(|v| !vars.contains(v));
    let sigma: BTreeMap<ChannelId, String> = if all_bound {
        parts.bound.push(sid);
        BTreeMap::new()
    } else {
        vars.iter()
            .filter(|v| !ns.bound.contains(v))
            .map(|v| (v.clone(), s.clone()))
            .collect()
    };
    let mut g = Bilateral::new(
        ka.who.clone(),
        ka.contract.clone(),
        kb.who.clone(),
        kb.contract.clone(),
    );
    if g.right.0 < g.left.0 {
        std::mem::swap(&mut g.left, &mut g.right);
    }
    parts.sessions.insert(s, g);
    Some((sigma, parts.finish()))
}

/// Atoms `a` with an unguarded `do u a` of `who`; empty when `u` is bound.
pub fn ready_do(ns: &NormalSystem, who: &Participant, u: &ChannelId, defs: &Defs) -> BTreeSet<Atom> {
    let mut out = BTreeSet::new();
    if ns.bound.contains(u) {
        return out;
    }
    let Some(comps) = ns.procs.get(who) else {
        return out;
    };
    let mut temps = Temps::new('r');
    for i in 0..comps.len() {
        let (_, expanded) = expand_call(&comps[i], defs, &mut temps);
        for comp in expanded {
            if let Process::Sum(bs) = comp {
                for (pre, _) in bs {
                    if let Prefix::Do { chan, atom } = pre {
                        if chan == *u {
                            out.insert(atom);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Result of a bounded weak-ready-do exploration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeakReadyDo {
    pub atoms: BTreeSet<Atom>,
    /// Exploration exhausted the reachable states before the bound.
    pub saturated: bool,
    pub states: usize,
}

fn passive(l: &SysLabel, who: &Participant, u: &ChannelId) -> bool {
    l.participant != *who || !matches!(&l.prefix, Prefix::Do { chan, .. } if chan == u)
}

/// Union of ready-do sets over states reachable within `bound` steps that
/// are not `do u _` steps of `who`.
pub fn weak_ready_do(
    ns: &NormalSystem,
    who: &Participant,
    u: &ChannelId,
    defs: &Defs,
    bound: usize,
) -> WeakReadyDo {
    let mut atoms = ready_do(ns, who, u, defs);
    let mut seen: BTreeSet<NormalSystem> = BTreeSet::from([ns.clone()]);
    let mut frontier = vec![ns.clone()];
    let mut saturated = false;
    for depth in 0..=bound {
        let mut next = Vec::new();
        for s in &frontier {
            for (l, t) in system_step(s, defs) {
                if passive(&l, who, u) && !seen.contains(&t) {
                    if depth == bound {
                        return WeakReadyDo {
                            atoms,
                            saturated: false,
                            states: seen.len(),
                        };
                    }
                    seen.insert(t.clone());
                    atoms.extend(ready_do(&t, who, u, defs));
                    next.push(t);
                }
            }
        }
        if next.is_empty() {
            saturated = true;
            break;
        }
        frontier = next;
    }
    WeakReadyDo {
        atoms,
        saturated,
        states: seen.len(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Ready,
    NotReady,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Ready => "ready",
            Verdict::NotReady => "not ready",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Readiness of one stipulated contract.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionReadiness {
    pub session: String,
    pub contract: Contract,
    pub weak_ready_do: WeakReadyDo,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Readiness {
    pub verdict: Verdict,
    pub sessions: Vec<SessionReadiness>,
}

fn covered(x: &ReadySet, atoms: &BTreeSet<Atom>) -> bool {
    x.iter()
        .map(ReadyElem::atom)
        .filter(|a| !a.is_e())
        .all(|a| atoms.contains(a))
}

/// Whether `who` is ready in every session where it has a stipulated contract.
pub fn readiness(ns: &NormalSystem, who: &Participant, defs: &Defs, wrd_bound: usize) -> Readiness {
    let open = ns.opened();
    let mut sessions = Vec::new();
    for (s, g) in &ns.sessions {
        let Some(c) = g.side(who) else {
            continue;
        };
        let rs = ready_sets(c);
        let wrd = weak_ready_do(&open, who, &ChannelId::Session(s.clone()), defs, wrd_bound);
        let verdict = if rs.iter().any(|x| covered(x, &wrd.atoms)) {
            Verdict::Ready
        } else if wrd.saturated {
            Verdict::NotReady
        } else {
            Verdict::Inconclusive
        };
        sessions.push(SessionReadiness {
            session: s.clone(),
            contract: c.clone(),
            weak_ready_do: wrd,
            verdict,
        });
    }
    let verdict = sessions
        .iter()
        .map(|s| s.verdict)
        .fold(Verdict::Ready, |acc, v| match (acc, v) {
            (Verdict::NotReady, _) | (_, Verdict::NotReady) => Verdict::NotReady,
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Ready,
        });
    Readiness { verdict, sessions }
}

pub fn is_ready(ns: &NormalSystem, who: &Participant, defs: &Defs, wrd_bound: usize) -> Verdict {
    readiness(ns, who, defs, wrd_bound).verdict
}

/// Breadth-first exploration of the runs of `start`, returning the path to
/// every visited state.
pub struct Explorer<'a> {
    defs: &'a Defs,
    parent: HashMap<NormalSystem, Option<(NormalSystem, SysLabel)>>,
    order: Vec<(NormalSystem, usize)>,
}

impl<'a> Explorer<'a> {
    /// Visits every state reachable within `steps` transitions.
    pub fn run(start: &NormalSystem, defs: &'a Defs, steps: usize) -> Explorer<'a> {
        let mut parent = HashMap::new();
        parent.insert(start.clone(), None);
        let mut order = vec![(start.clone(), 0)];
        let mut queue = VecDeque::from([(start.clone(), 0usize)]);
        while let Some((s, d)) = queue.pop_front() {
            if d == steps {
                continue;
            }
            for (l, t) in system_step(&s, defs) {
                if !parent.contains_key(&t) {
                    parent.insert(t.clone(), Some((s.clone(), l)));
                    order.push((t.clone(), d + 1));
                    queue.push_back((t, d + 1));
                }
            }
        }
        Explorer {
            defs,
            parent,
            order,
        }
    }

    /// Visited states in breadth-first order, with their depth.
    pub fn states(&self) -> &[(NormalSystem, usize)] {
        &self.order
    }

    pub fn defs(&self) -> &Defs {
        self.defs
    }

    /// The breadth-first path to a visited state.
    pub fn trace_to(&self, target: &NormalSystem) -> Option<Trace> {
        let mut steps = Vec::new();
        let mut cur = target.clone();
        loop {
            match self.parent.get(&cur)? {
                None => break,
                Some((prev, l)) => {
                    steps.push((l.clone(), cur.clone()));
                    cur = prev.clone();
                }
            }
        }
        steps.reverse();
        Some(Trace {
            initial: cur,
            steps,
        })
    }
}

/// Every run of at most `steps` transitions, in deterministic order. Runs
/// are extended until they reach a stuck state or the step bound.
pub fn all_runs(start: &NormalSystem, defs: &Defs, steps: usize) -> Vec<Trace> {
    let mut out = Vec::new();
    let mut stack = vec![Trace {
        initial: start.clone(),
        steps: Vec::new(),
    }];
    while let Some(t) = stack.pop() {
        let succ = if t.steps.len() < steps {
            system_step(t.last(), defs)
        } else {
            Vec::new()
        };
        if succ.is_empty() {
            out.push(t);
            continue;
        }
        for (l, s) in succ.into_iter().rev() {
            let mut t2 = t.clone();
            t2.steps.push((l, s));
            stack.push(t2);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HonestyTestOutcome {
    /// No reachable state within the bounds where the participant is not ready.
    NoViolation,
    /// A run to a state where the participant is not ready.
    Violation {
        context: usize,
        trace: Trace,
        readiness: Readiness,
    },
    /// Some reachable state could not be decided within the bounds.
    Inconclusive { context: usize, state: NormalSystem },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HonestyTestReport {
    pub outcome: HonestyTestOutcome,
    pub states: usize,
}

/// Checks readiness of `who` along all runs of `who[p] | ctx` for each context.
pub fn test_honesty(
    p: &Process,
    who: &Participant,
    contexts: &[System],
    defs: &Defs,
    step_bound: usize,
    wrd_bound: usize,
) -> Result<HonestyTestReport, RuntimeError> {
    for (index, ctx) in contexts.iter().enumerate() {
        if !ctx.is_free_of(who) {
            return Err(RuntimeError::ContextNotAFree {
                index,
                who: who.clone(),
            });
        }
    }
    let mut states = 0;
    let mut inconclusive = None;
    for (index, ctx) in contexts.iter().enumerate() {
        let start = normalize(&System::par(
            System::Participant(who.clone(), p.clone()),
            ctx.clone(),
        ));
        let r = test_honesty_from(&start, who, defs, step_bound, wrd_bound, index);
        states += r.states;
        match r.outcome {
            HonestyTestOutcome::NoViolation => {}
            HonestyTestOutcome::Violation { .. } => {
                return Ok(HonestyTestReport {
                    outcome: r.outcome,
                    states,
                })
            }
            o @ HonestyTestOutcome::Inconclusive { .. } => {
                inconclusive.get_or_insert(o);
            }
        }
    }
    Ok(HonestyTestReport {
        outcome: inconclusive.unwrap_or(HonestyTestOutcome::NoViolation),
        states,
    })
}

/// Checks readiness of `who` in every state reachable from `start`; the
/// outcome reports `context` as the index of the explored system.
pub fn test_honesty_from(
    start: &NormalSystem,
    who: &Participant,
    defs: &Defs,
    step_bound: usize,
    wrd_bound: usize,
    context: usize,
) -> HonestyTestReport {
    let ex = Explorer::run(start, defs, step_bound);
    let states = ex.states().len();
    let mut inconclusive = None;
    for (s, _) in ex.states() {
        let r = readiness(s, who, defs, wrd_bound);
        match r.verdict {
            Verdict::NotReady => {
                return HonestyTestReport {
                    outcome: HonestyTestOutcome::Violation {
                        context,
                        trace: ex.trace_to(s).expect("visited state"),
                        readiness: r,
                    },
                    states,
                }
            }
            Verdict::Inconclusive if inconclusive.is_none() => {
                inconclusive = Some(HonestyTestOutcome::Inconclusive {
                    context,
                    state: s.clone(),
                })
            }
            _ => {}
        }
    }
    HonestyTestReport {
        outcome: inconclusive.unwrap_or(HonestyTestOutcome::NoViolation),
        states,
    }
}
