//! Abstract processes, weak transitions, abstract readiness and the
//! abstract-honesty decision procedure.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use serde::Serialize;

use crate::contracts::{abstract_contract_step, observes, ready_sets, AbsLabel};
use crate::syntax::{alpha_normalize, Atom, Contract};
use crate::typing::{AbsAction, ChannelType};

/// Exploration limits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HonestyConfig {
    /// Largest multiplicity of a place in a marking before giving up.
    pub marking_bound: usize,
    /// Largest number of abstract states explored.
    pub state_cap: usize,
}

impl Default for HonestyConfig {
    fn default() -> Self {
        HonestyConfig {
            marking_bound: 16,
            state_cap: 200_000,
        }
    }
}

/// Three-valued answer of a bounded search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Answer {
    Yes,
    No,
    Inconclusive,
}

/// A channel type as a Petri-net marking: sequential components with
/// their multiplicities.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BppMarking {
    places: BTreeMap<ChannelType, usize>,
}

impl BppMarking {
    pub fn from_type(t: &ChannelType) -> BppMarking {
        let mut places = BTreeMap::new();
        match t.canon() {
            ChannelType::Nil => {}
            ChannelType::Par(ts) => {
                for k in ts {
                    *places.entry(k).or_insert(0) += 1;
                }
            }
            k => {
                places.insert(k, 1);
            }
        }
        BppMarking { places }
    }

    pub fn to_type(&self) -> ChannelType {
        let ts = self
            .places
            .iter()
            .flat_map(|(k, &n)| std::iter::repeat(k.clone()).take(n))
            .collect();
        ChannelType::par(ts)
    }

    pub fn places(&self) -> &BTreeMap<ChannelType, usize> {
        &self.places
    }

    /// The place with the largest multiplicity.
    pub fn max_place(&self) -> Option<(&ChannelType, usize)> {
        self.places.iter().map(|(k, &n)| (k, n)).max_by_key(|&(_, n)| n)
    }
}

/// `(C, T)` before stipulation or `(c, T)` after it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AbstractProcess {
    Advertising(BTreeSet<Contract>, ChannelType),
    Stipulated(Contract, ChannelType),
}

impl AbstractProcess {
    pub fn channel_type(&self) -> &ChannelType {
        match self {
            AbstractProcess::Advertising(_, t) | AbstractProcess::Stipulated(_, t) => t,
        }
    }

    pub fn contract_state(&self) -> String {
        match self {
            AbstractProcess::Advertising(cs, _) => {
                let items: Vec<String> = cs.iter().map(|c| c.to_string()).collect();
                format!("{{{}}}", items.join(", "))
            }
            AbstractProcess::Stipulated(c, _) => c.to_string(),
        }
    }
}

impl fmt::Display for AbstractProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.contract_state(), self.channel_type())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AbstractRule {
    Tell1,
    Tell2,
    Fuse,
    Tau1,
    Tau2,
    Do,
    Ctx,
}

impl fmt::Display for AbstractRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AbstractRule::Tell1 => "A-Tell1",
            AbstractRule::Tell2 => "A-Tell2",
            AbstractRule::Fuse => "A-Fuse",
            AbstractRule::Tau1 => "A-Tau1",
            AbstractRule::Tau2 => "A-Tau2",
            AbstractRule::Do => "A-Do",
            AbstractRule::Ctx => "A-Ctx",
        };
        f.write_str(s)
    }
}

/// Memoized channel-type successors and weak-reachability sets, shared by
/// the states of one exploration.
#[derive(Default)]
struct Cache {
    steps: HashMap<ChannelType, Rc<[(AbsAction, ChannelType)]>>,
    weak: HashMap<(ChannelType, Contract), Rc<Weak>>,
}

/// Atoms reachable by silent steps then one visible step; `cut` when some
/// state was not expanded.
struct Weak {
    atoms: BTreeSet<Atom>,
    cut: bool,
}

impl Cache {
    fn step(&mut self, t: &ChannelType) -> Rc<[(AbsAction, ChannelType)]> {
        if let Some(v) = self.steps.get(t) {
            return v.clone();
        }
        let v: Rc<[(AbsAction, ChannelType)]> = t.step().into();
        self.steps.insert(t.clone(), v.clone());
        v
    }

    fn abstract_step(&mut self, ap: &AbstractProcess) -> Vec<(AbstractRule, AbstractProcess)> {
        let mut out = Vec::new();
        match ap {
            AbstractProcess::Advertising(cs, t) => {
                for (a, t2) in self.step(t).iter() {
                    match a {
                        AbsAction::Tell(c) => {
                            let mut cs2 = cs.clone();
                            cs2.insert(alpha_normalize(c));
                            out.push((AbstractRule::Tell1, AbstractProcess::Advertising(cs2, t2.clone())));
                        }
                        AbsAction::Tau | AbsAction::TauBlock | AbsAction::TauObs(_) => {
                            out.push((AbstractRule::Tau1, AbstractProcess::Advertising(cs.clone(), t2.clone())));
                        }
                        AbsAction::Atom(_) => {}
                    }
                }
                for c in cs {
                    out.push((AbstractRule::Fuse, AbstractProcess::Stipulated(c.clone(), t.clone())));
                }
            }
            AbstractProcess::Stipulated(c, t) => {
                let moves = abstract_contract_step(c);
                for (a, t2) in self.step(t).iter() {
                    match a {
                        AbsAction::Tell(_) => {
                            out.push((AbstractRule::Tell2, AbstractProcess::Stipulated(c.clone(), t2.clone())));
                        }
                        AbsAction::Tau | AbsAction::TauBlock => {
                            out.push((AbstractRule::Tau2, AbstractProcess::Stipulated(c.clone(), t2.clone())));
                        }
                        AbsAction::TauObs(phi) => {
                            if observes(c, phi) {
                                out.push((AbstractRule::Tau2, AbstractProcess::Stipulated(c.clone(), t2.clone())));
                            }
                        }
                        AbsAction::Atom(x) => {
                            for (l, c2) in &moves {
                                if *l == AbsLabel::Own(x.clone()) {
                                    out.push((
                                        AbstractRule::Do,
                                        AbstractProcess::Stipulated(c2.clone(), t2.clone()),
                                    ));
                                }
                            }
                        }
                    }
                }
                for (l, c2) in moves {
                    if l == AbsLabel::Ctx {
                        out.push((AbstractRule::Ctx, AbstractProcess::Stipulated(c2, t.clone())));
                    }
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// `T =a=>` for every `a` at once, for the owner of contract `c`.
    fn weak(&mut self, t: &ChannelType, c: &Contract, bound: usize) -> Rc<Weak> {
        let key = (t.clone(), c.clone());
        if let Some(w) = self.weak.get(&key) {
            return w.clone();
        }
        let mut atoms = BTreeSet::new();
        let mut seen = BTreeSet::from([t.clone()]);
        let mut queue = VecDeque::from([t.clone()]);
        let mut cut = false;
        while let Some(k) = queue.pop_front() {
            if over_bound(&k, bound) {
                cut = true;
                continue;
            }
            for (x, k2) in self.step(&k).iter() {
                let silent = match x {
                    AbsAction::Atom(b) => {
                        atoms.insert(b.clone());
                        false
                    }
                    AbsAction::TauBlock => false,
                    AbsAction::Tau | AbsAction::Tell(_) => true,
                    AbsAction::TauObs(phi) => observes(c, phi),
                };
                if silent && seen.insert(k2.clone()) {
                    if seen.len() > WEAK_STATE_CAP {
                        cut = true;
                        queue.clear();
                        break;
                    }
                    queue.push_back(k2.clone());
                }
            }
        }
        let w = Rc::new(Weak { atoms, cut });
        self.weak.insert(key, w.clone());
        w
    }

    fn ready(&mut self, t: &ChannelType, c: &Contract, bound: usize) -> Answer {
        let w = self.weak(t, c, bound);
        let mut result = Answer::No;
        for x in ready_sets(c) {
            let mut all = Answer::Yes;
            for elem in &x {
                let a = elem.atom();
                if a.is_e() || w.atoms.contains(a) {
                    continue;
                }
                if w.cut {
                    all = Answer::Inconclusive;
                } else {
                    all = Answer::No;
                    break;
                }
            }
            match all {
                Answer::Yes => return Answer::Yes,
                Answer::Inconclusive => result = Answer::Inconclusive,
                Answer::No => {}
            }
        }
        result
    }
}

/// Successors of an abstract process. In a stipulated state `tau[phi]`
/// fires only when the contract observes `phi`.
pub fn abstract_step(ap: &AbstractProcess) -> Vec<(AbstractRule, AbstractProcess)> {
    Cache::default().abstract_step(ap)
}

const WEAK_STATE_CAP: usize = 100_000;

fn over_bound(t: &ChannelType, bound: usize) -> bool {
    BppMarking::from_type(t)
        .max_place()
        .is_some_and(|(_, n)| n > bound)
}

/// `T =a=>` for the owner of contract `c`: silent steps `tau`, `<d>`, and
/// `tau[phi]` with `c |-# phi`, followed by `a`. `tau?` is never collapsed.
pub fn weak_transition_exists(t: &ChannelType, a: &Atom, c: &Contract, bound: usize) -> Answer {
    let w = Cache::default().weak(&t.canon(), c, bound);
    if w.atoms.contains(a) {
        Answer::Yes
    } else if w.cut {
        Answer::Inconclusive
    } else {
        Answer::No
    }
}

/// Some ready set of `c` has all its non-`e` atoms weakly reachable in `t`.
pub fn abstract_ready(t: &ChannelType, c: &Contract, bound: usize) -> Answer {
    Cache::default().ready(&t.canon(), c, bound)
}

/// One state of a dishonesty witness, as serialized.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WitnessStep {
    pub rule: String,
    pub contract_state: String,
    pub channel_type: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HonestyVerdict {
    Honest {
        states: usize,
    },
    /// A shortest path to a stipulated state that is not ready; the first
    /// entry has no rule.
    Dishonest {
        trace: Vec<(Option<AbstractRule>, AbstractProcess)>,
    },
    Inconclusive {
        reason: String,
    },
}

impl HonestyVerdict {
    pub fn is_honest(&self) -> bool {
        matches!(self, HonestyVerdict::Honest { .. })
    }

    pub fn is_dishonest(&self) -> bool {
        matches!(self, HonestyVerdict::Dishonest { .. })
    }

    pub fn witness(&self) -> Option<Vec<WitnessStep>> {
        match self {
            HonestyVerdict::Dishonest { trace } => Some(
                trace
                    .iter()
                    .map(|(r, ap)| WitnessStep {
                        rule: r.map_or_else(|| "start".to_string(), |r| r.to_string()),
                        contract_state: ap.contract_state(),
                        channel_type: ap.channel_type().to_string(),
                    })
                    .collect(),
            ),
            _ => None,
        }
    }
}

impl fmt::Display for HonestyVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HonestyVerdict::Honest { states } => write!(f, "honest ({states} abstract states)"),
            HonestyVerdict::Dishonest { trace } => {
                writeln!(f, "dishonest; witness:")?;
                for (i, (r, ap)) in trace.iter().enumerate() {
                    match r {
                        None => write!(f, "  {ap}")?,
                        Some(r) => write!(f, "  --{r}--> {ap}")?,
                    }
                    if i + 1 < trace.len() {
                        writeln!(f)?;
                    }
                }
                Ok(())
            }
            HonestyVerdict::Inconclusive { reason } => write!(f, "inconclusive: {reason}"),
        }
    }
}

/// Explores every abstract process reachable from `start` and checks
/// readiness at each stipulated state.
pub fn explore_honesty(start: AbstractProcess, cfg: &HonestyConfig) -> HonestyVerdict {
    let start = match start {
        AbstractProcess::Advertising(cs, t) => AbstractProcess::Advertising(
            cs.iter().map(alpha_normalize).collect(),
            t.canon(),
        ),
        AbstractProcess::Stipulated(c, t) => {
            AbstractProcess::Stipulated(alpha_normalize(&c), t.canon())
        }
    };
    let key = (start.clone(), *cfg);
    if let Some(v) = VERDICT_MEMO.with(|m| m.borrow().get(&key).cloned()) {
        return v;
    }
    let v = explore(start, cfg);
    VERDICT_MEMO.with(|m| {
        let mut m = m.borrow_mut();
        if m.len() >= VERDICT_MEMO_CAP {
            m.clear();
        }
        m.insert(key, v.clone());
    });
    v
}

const VERDICT_MEMO_CAP: usize = 1 << 12;

thread_local! {
    static VERDICT_MEMO: RefCell<HashMap<(AbstractProcess, HonestyConfig), HonestyVerdict>> =
        RefCell::new(HashMap::new());
}

fn explore(start: AbstractProcess, cfg: &HonestyConfig) -> HonestyVerdict {
    let mut states: Vec<(AbstractProcess, Option<(usize, AbstractRule)>)> =
        vec![(start.clone(), None)];
    let mut index: HashMap<AbstractProcess, usize> = HashMap::from([(start, 0)]);
    let mut inconclusive: Option<String> = None;
    let mut cache = Cache::default();
    let mut i = 0;
    while i < states.len() {
        let ap = states[i].0.clone();
        if let Some((place, n)) = BppMarking::from_type(ap.channel_type()).max_place() {
            if n > cfg.marking_bound {
                inconclusive.get_or_insert_with(|| {
                    format!("place {place} reached multiplicity {n} in {ap}")
                });
                i += 1;
                continue;
            }
        }
        if let AbstractProcess::Stipulated(c, t) = &ap {
            match cache.ready(t, c, cfg.marking_bound) {
                Answer::No => {
                    let mut trace = Vec::new();
                    let mut k = i;
                    loop {
                        let (s, parent) = &states[k];
                        match parent {
                            Some((p, r)) => {
                                trace.push((Some(*r), s.clone()));
                                k = *p;
                            }
                            None => {
                                trace.push((None, s.clone()));
                                break;
                            }
                        }
                    }
                    trace.reverse();
                    return HonestyVerdict::Dishonest { trace };
                }
                Answer::Inconclusive => {
                    inconclusive
                        .get_or_insert_with(|| format!("readiness undetermined in {ap}"));
                }
                Answer::Yes => {}
            }
        }
        for (r, next) in cache.abstract_step(&ap) {
            if !index.contains_key(&next) {
                if states.len() >= cfg.state_cap {
                    return HonestyVerdict::Inconclusive {
                        reason: format!("more than {} abstract states", cfg.state_cap),
                    };
                }
                index.insert(next.clone(), states.len());
                states.push((next, Some((i, r))));
            }
        }
        i += 1;
    }
    match inconclusive {
        Some(reason) => HonestyVerdict::Inconclusive { reason },
        None => HonestyVerdict::Honest {
            states: states.len(),
        },
    }
}

/// Honesty of a channel type: of `(∅, t)`.
pub fn abstract_honest(t: &ChannelType, cfg: &HonestyConfig) -> HonestyVerdict {
    explore_honesty(AbstractProcess::Advertising(BTreeSet::new(), t.clone()), cfg)
}

/// `t` realizes `c`: honesty of `(c, t)`.
pub fn realizes(t: &ChannelType, c: &Contract, cfg: &HonestyConfig) -> HonestyVerdict {
    explore_honesty(AbstractProcess::Stipulated(c.clone(), t.clone()), cfg)
}
