//! Bilateral contract semantics, ready sets, compliance, and the abstract
//! relation on a single contract.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

use crate::syntax::{alpha_normalize, Atom, Bilateral, Contract, Observable, Participant, SumKind};

/// An element of a ready set: a plain atom or a `rdy`-marked one.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReadyElem {
    Atom(Atom),
    Rdy(Atom),
}

impl ReadyElem {
    pub fn atom(&self) -> &Atom {
        match self {
            ReadyElem::Atom(a) | ReadyElem::Rdy(a) => a,
        }
    }
}

impl fmt::Display for ReadyElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReadyElem::Atom(a) => write!(f, "{a}"),
            ReadyElem::Rdy(a) => write!(f, "rdy {a}"),
        }
    }
}

pub type ReadySet = BTreeSet<ReadyElem>;

pub fn format_ready_set(x: &ReadySet) -> String {
    let items: Vec<String> = x.iter().map(|e| e.to_string()).collect();
    format!("{{{}}}", items.join(", "))
}

/// The ready sets of a contract.
pub fn ready_sets(c: &Contract) -> BTreeSet<ReadySet> {
    match &*c.unfolded() {
        Contract::Rdy(a, _) => BTreeSet::from([BTreeSet::from([ReadyElem::Rdy(a.clone())])]),
        Contract::Sum(SumKind::Internal, bs) if !bs.is_empty() => bs
            .iter()
            .map(|(a, _)| BTreeSet::from([ReadyElem::Atom(a.clone())]))
            .collect(),
        Contract::Sum(_, bs) => {
            BTreeSet::from([bs.iter().map(|(a, _)| ReadyElem::Atom(a.clone())).collect()])
        }
        Contract::Var(_) | Contract::Rec(..) => BTreeSet::from([BTreeSet::new()]),
    }
}

/// Label `A says a` of a bilateral contract transition.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ContractLabel {
    pub participant: Participant,
    pub atom: Atom,
}

impl fmt::Display for ContractLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} says {}", self.participant, self.atom)
    }
}

/// Moves of `mover` against `partner`: (atom, mover residual, partner residual).
fn moves(mover: &Contract, partner: &Contract) -> Vec<(Atom, Contract, Contract)> {
    let m = mover.unfolded();
    let p = partner.unfolded();
    let fail = || (Contract::end(), Contract::zero());
    let mut out = Vec::new();
    match &*m {
        Contract::Rdy(a, c) => out.push((a.clone(), (**c).clone(), partner.clone())),
        Contract::Sum(SumKind::Internal, bs) if !bs.is_empty() => {
            for (a, c) in bs {
                let co = a.co();
                match &*p {
                    Contract::Sum(SumKind::Internal, ds) if !ds.is_empty() => {
                        if ds.len() == 1 && ds[0].0 == co {
                            out.push((a.clone(), c.clone(), Contract::rdy(co, ds[0].1.clone())));
                        } else {
                            let (e, z) = fail();
                            out.push((a.clone(), e, z));
                        }
                    }
                    Contract::Sum(_, ds) => match ds.iter().find(|(b, _)| *b == co) {
                        Some((_, d)) => {
                            out.push((a.clone(), c.clone(), Contract::rdy(co, d.clone())))
                        }
                        None => {
                            let (e, z) = fail();
                            out.push((a.clone(), e, z));
                        }
                    },
                    _ => {}
                }
            }
        }
        Contract::Sum(SumKind::External, bs) if !bs.is_empty() => {
            if let Contract::Sum(kind, ds) = &*p {
                if ds.is_empty() || *kind == SumKind::External {
                    let partner_co: BTreeSet<Atom> = ds.iter().map(|(b, _)| b.co()).collect();
                    let disjoint = bs.iter().all(|(a, _)| !partner_co.contains(a));
                    for (a, c) in bs {
                        let co = a.co();
                        if let Some((_, d)) = ds.iter().find(|(b, _)| *b == co) {
                            out.push((a.clone(), c.clone(), Contract::rdy(co, d.clone())));
                        } else if disjoint {
                            let (e, z) = fail();
                            out.push((a.clone(), e, z));
                        }
                    }
                }
            }
        }
        _ => {}
    }
    out
}

/// All transitions of a bilateral contract, with both sides α-normalized.
pub fn contract_step(g: &Bilateral) -> Vec<(ContractLabel, Bilateral)> {
    let (a, c) = &g.left;
    let (b, d) = &g.right;
    let mut out = Vec::new();
    for (atom, c2, d2) in moves(c, d) {
        out.push((
            ContractLabel {
                participant: a.clone(),
                atom,
            },
            Bilateral::new(a.clone(), alpha_normalize(&c2), b.clone(), alpha_normalize(&d2)),
        ));
    }
    for (atom, d2, c2) in moves(d, c) {
        out.push((
            ContractLabel {
                participant: b.clone(),
                atom,
            },
            Bilateral::new(a.clone(), alpha_normalize(&c2), b.clone(), alpha_normalize(&d2)),
        ));
    }
    out.sort();
    out.dedup();
    out
}

/// Condition (1) of compliance on a single configuration; returns the
/// violating pair of ready sets, if any.
pub fn ready_condition(c: &Contract, d: &Contract) -> Option<(ReadySet, ReadySet)> {
    let rc = ready_sets(c);
    let rd = ready_sets(d);
    for x in &rc {
        for y in &rd {
            let co_x: BTreeSet<ReadyElem> = x
                .iter()
                .filter_map(|e| match e {
                    ReadyElem::Atom(a) => Some(ReadyElem::Atom(a.co())),
                    ReadyElem::Rdy(_) => None,
                })
                .collect();
            if co_x.intersection(y).next().is_some() {
                continue;
            }
            let rdy_in_symdiff = x
                .symmetric_difference(y)
                .any(|e| matches!(e, ReadyElem::Rdy(_)));
            if rdy_in_symdiff {
                continue;
            }
            return Some((x.clone(), y.clone()));
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ComplianceReport {
    Compliant {
        configurations: usize,
    },
    /// A reachable configuration violating condition (1), with the path to it.
    Violation {
        path: Vec<ContractLabel>,
        configuration: Bilateral,
        left_ready: ReadySet,
        right_ready: ReadySet,
    },
}

/// Greatest-fixpoint compliance check over the reachable configurations.
pub fn check_compliance(c: &Contract, d: &Contract) -> ComplianceReport {
    let a = Participant::new("A");
    let b = Participant::new("B");
    let start = Bilateral::new(a, alpha_normalize(c), b, alpha_normalize(d));
    let mut index: HashMap<Bilateral, usize> = HashMap::from([(start.clone(), 0)]);
    let mut nodes: Vec<(Bilateral, Option<(usize, ContractLabel)>)> = vec![(start, None)];
    let mut next = 0;
    while next < nodes.len() {
        let k = next;
        next += 1;
        if let Some((x, y)) = ready_condition(&nodes[k].0.left.1, &nodes[k].0.right.1) {
            let mut path = Vec::new();
            let mut cur = k;
            while let Some((prev, l)) = &nodes[cur].1 {
                path.push(l.clone());
                cur = *prev;
            }
            path.reverse();
            return ComplianceReport::Violation {
                path,
                configuration: nodes.swap_remove(k).0,
                left_ready: x,
                right_ready: y,
            };
        }
        for (l, g2) in contract_step(&nodes[k].0) {
            if !index.contains_key(&g2) {
                index.insert(g2.clone(), nodes.len());
                nodes.push((g2, Some((k, l))));
            }
        }
    }
    ComplianceReport::Compliant {
        configurations: nodes.len(),
    }
}

const COMPLIANCE_MEMO_CAP: usize = 1 << 16;

thread_local! {
    static COMPLIANCE_MEMO: RefCell<HashMap<(Contract, Contract), bool>> = RefCell::new(HashMap::new());
}

/// `c ⋈ d`, memoized per thread.
pub fn compliant(c: &Contract, d: &Contract) -> bool {
    let key = (c.clone(), d.clone());
    if let Some(v) = COMPLIANCE_MEMO.with(|m| m.borrow().get(&key).copied()) {
        return v;
    }
    let v = matches!(check_compliance(c, d), ComplianceReport::Compliant { .. });
    COMPLIANCE_MEMO.with(|m| {
        let mut m = m.borrow_mut();
        if m.len() >= COMPLIANCE_MEMO_CAP {
            m.clear();
        }
        m.insert(key, v);
    });
    v
}

/// Labels of the abstract relation on a single contract.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AbsLabel {
    Own(Atom),
    Ctx,
}

impl fmt::Display for AbsLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbsLabel::Own(a) => write!(f, "{a}"),
            AbsLabel::Ctx => f.write_str("ctx"),
        }
    }
}

/// The abstract contract relation: own moves and context moves.
///
/// * `rdy a.c` moves on `a` to `c`;
/// * a nonempty internal sum moves on each branch, stays put on a context
///   move, and a singleton `(+)a.c` commits to `rdy a.c` on a context move;
/// * a nonempty external sum moves on each branch, commits to `rdy a_i.c_i`
///   on a context move, or stays put;
/// * `0` has no moves.
pub fn abstract_contract_step(c: &Contract) -> Vec<(AbsLabel, Contract)> {
    let mut out = Vec::new();
    match c.unfold() {
        Contract::Rdy(a, k) => out.push((AbsLabel::Own(a), *k)),
        Contract::Sum(SumKind::Internal, bs) if !bs.is_empty() => {
            if bs.len() == 1 {
                let (a, k) = &bs[0];
                out.push((AbsLabel::Ctx, Contract::rdy(a.clone(), k.clone())));
            }
            for (a, k) in bs {
                out.push((AbsLabel::Own(a), k));
            }
            out.push((AbsLabel::Ctx, c.clone()));
        }
        Contract::Sum(SumKind::External, bs) if !bs.is_empty() => {
            for (a, k) in bs {
                out.push((AbsLabel::Ctx, Contract::rdy(a.clone(), k.clone())));
                out.push((AbsLabel::Own(a), k));
            }
            out.push((AbsLabel::Ctx, c.clone()));
        }
        _ => {}
    }
    let mut out: Vec<(AbsLabel, Contract)> = out
        .into_iter()
        .map(|(l, k)| (l, alpha_normalize(&k)))
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Contracts reachable from `c` under the abstract relation.
pub fn abstract_reachable(c: &Contract) -> BTreeSet<Contract> {
    let start = alpha_normalize(c);
    let mut seen = BTreeSet::from([start.clone()]);
    let mut stack = vec![start];
    while let Some(k) = stack.pop() {
        for (_, k2) in abstract_contract_step(&k) {
            if seen.insert(k2.clone()) {
                stack.push(k2);
            }
        }
    }
    seen
}

/// `c ⊢♯ [a?]`: the only ready set of `c` is `{a}` or `{rdy a}`.
pub fn observes(c: &Contract, phi: &Observable) -> bool {
    let Observable::NextIs(a) = phi;
    let rs = ready_sets(c);
    rs == BTreeSet::from([BTreeSet::from([ReadyElem::Atom(a.clone())])])
        || rs == BTreeSet::from([BTreeSet::from([ReadyElem::Rdy(a.clone())])])
}
