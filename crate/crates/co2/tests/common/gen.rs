use std::collections::{BTreeMap, BTreeSet};

use co2::syntax::{Definition, SumKind};
use co2::{Atom, ChannelId, Contract, Defs, LatentItem, Observable, Participant, Prefix, Process, System};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NAMES: [&str; 3] = ["a", "b", "c"];

/// A generated system together with its definitions.
#[derive(Clone, Debug)]
pub struct Sample {
    pub defs: Defs,
    pub system: System,
}

pub struct Gen {
    rng: ChaCha8Rng,
    defs: Vec<Definition>,
    /// Probability of a deliberately wrong move.
    pub noise: f64,
}

pub fn dual(c: &Contract) -> Contract {
    match c {
        Contract::Sum(k, bs) => {
            let k = match k {
                SumKind::Internal => SumKind::External,
                SumKind::External => SumKind::Internal,
            };
            Contract::Sum(k, bs.iter().map(|(a, d)| (a.co(), dual(d))).collect())
        }
        Contract::Rdy(a, d) => Contract::Rdy(a.co(), Box::new(dual(d))),
        other => other.clone(),
    }
}

fn branches(c: &Contract) -> Option<(SumKind, &[(Atom, Contract)])> {
    match c {
        Contract::Sum(k, bs) if !bs.is_empty() => Some((*k, bs)),
        _ => None,
    }
}

impl Gen {
    pub fn new(seed: u64) -> Gen {
        Gen { rng: ChaCha8Rng::seed_from_u64(seed), defs: Vec::new(), noise: 0.0 }
    }

    pub fn coin(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    pub fn shuffle<T>(&mut self, v: &mut [T]) {
        v.shuffle(&mut self.rng);
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    /// A finite contract of the given depth, internal sums on barred atoms.
    pub fn contract(&mut self, depth: usize) -> Contract {
        if depth == 0 || self.coin(0.2) {
            return Contract::end();
        }
        let kind = if self.coin(0.5) { SumKind::Internal } else { SumKind::External };
        let n = 1 + self.below(2);
        let mut names = NAMES.to_vec();
        names.shuffle(&mut self.rng);
        let bs = names[..n]
            .iter()
            .map(|x| (Atom::new(x, kind == SumKind::Internal), self.contract(depth - 1)))
            .collect();
        Contract::Sum(kind, bs)
    }

    /// A compliant partner: the dual, sometimes with an extra external branch.
    pub fn partner(&mut self, c: &Contract) -> Contract {
        let mut d = dual(c);
        if let Contract::Sum(SumKind::External, bs) = &mut d {
            let used: Vec<String> = bs.iter().map(|(a, _)| a.name().to_string()).collect();
            if let Some(x) = NAMES.iter().find(|x| !used.contains(&x.to_string())) {
                if self.coin(0.3) {
                    bs.push((Atom::plain(x), Contract::end()));
                }
            }
        }
        d
    }

    /// A process of `who` meant to honour `c` on `u`.
    pub fn realize(&mut self, c: &Contract, u: &ChannelId) -> Process {
        let body = self.realize_body(c, u);
        if body.is_nil() {
            return body;
        }
        if self.coin(0.1) && body.free_channels() == BTreeSet::from([u.clone()]) {
            let name = format!("L{}", self.defs.len());
            let x = ChannelId::var("p");
            let mut map = BTreeMap::new();
            map.insert(u.clone(), x.clone());
            let Process::Sum(mut bs) = body.rename(&map) else { unreachable!() };
            bs.push((Prefix::Tau, Process::Call(name.clone(), vec![x.clone()])));
            self.defs.push(Definition { name: name.clone(), params: vec!["p".to_string()], body: Process::Sum(bs) });
            return Process::Call(name, vec![u.clone()]);
        }
        if self.coin(0.15) {
            return Process::prefixed(Prefix::Tau, body);
        }
        body
    }

    fn realize_body(&mut self, c: &Contract, u: &ChannelId) -> Process {
        let Some((kind, bs)) = branches(c) else {
            return Process::nil();
        };
        let mut picks: Vec<&(Atom, Contract)> = match kind {
            SumKind::External => bs.iter().collect(),
            SumKind::Internal if self.coin(0.3) => bs.iter().collect(),
            SumKind::Internal => vec![&bs[self.below(bs.len())]],
        };
        if self.coin(self.noise) {
            if picks.len() > 1 {
                picks.pop();
            } else {
                return Process::prefixed(Prefix::Do { chan: ChannelId::session("z"), atom: Atom::plain("z") }, Process::nil());
            }
        }
        let out: Vec<(Prefix, Process)> = picks
            .into_iter()
            .map(|(a, k)| {
                let cont = self.realize(k, u);
                let act = Process::prefixed(Prefix::Do { chan: u.clone(), atom: a.clone() }, cont.clone());
                if bs.len() == 1 && self.coin(0.15) {
                    (Prefix::Ask { chan: u.clone(), obs: Observable::NextIs(a.clone()) }, act)
                } else {
                    (Prefix::Do { chan: u.clone(), atom: a.clone() }, cont)
                }
            })
            .collect();
        Process::Sum(out)
    }

    fn tell(k: &str, u: &ChannelId, c: &Contract, cont: Process) -> Process {
        Process::prefixed(
            Prefix::Tell { to: Participant::new(k), chan: u.clone(), contract: c.clone() },
            cont,
        )
    }

    /// A random process of `A` on private variables, honest unless noise
    /// strikes.
    pub fn process(&mut self) -> (Defs, Process) {
        self.defs.clear();
        let (p, _) = self.a_side(&mut Vec::new(), &mut Vec::new());
        (self.take_defs(), p)
    }

    fn take_defs(&mut self) -> Defs {
        Defs::from_definitions(std::mem::take(&mut self.defs)).expect("distinct definition names")
    }

    /// Components of `A` and the latent contracts it tells, as (variable,
    /// contract) pairs that still need a partner.
    fn a_side(
        &mut self,
        partners: &mut Vec<(ChannelId, Contract)>,
        sessions: &mut Vec<(String, Contract, Contract)>,
    ) -> (Process, Vec<ChannelId>) {
        let mut comps = Vec::new();
        let mut told = Vec::new();
        let n = 1 + self.below(2);
        let mut pending = Vec::new();
        for i in 0..n {
            let x = ChannelId::var(&format!("x{i}"));
            let c = self.contract(2);
            partners.push((x.clone(), c.clone()));
            told.push(x.clone());
            pending.push((x, c));
        }
        if n == 2 && self.coin(0.3) {
            let (x0, c0) = pending[0].clone();
            let (x1, c1) = pending[1].clone();
            let body = Process::par(self.realize(&c0, &x0), self.realize(&c1, &x1));
            comps.push(Self::tell("K", &x0, &c0, Self::tell("K", &x1, &c1, body)));
        } else {
            for (x, c) in pending {
                let mut p = Self::tell("K", &x, &c, self.realize(&c, &x));
                if self.coin(0.2) {
                    p = Process::prefixed(Prefix::Tau, p);
                }
                if self.coin(0.25) {
                    partners.retain(|(y, _)| *y != x);
                    told.retain(|y| *y != x);
                    p = Process::del(vec![x.clone()], p);
                }
                comps.push(p);
            }
        }
        if self.coin(0.4) {
            let name = format!("s{}", sessions.len());
            let c = self.contract(2);
            let d = self.partner(&c);
            comps.push(self.realize(&c, &ChannelId::session(&name)));
            sessions.push((name, c, d));
        }
        if self.coin(self.noise) {
            comps.push(Process::prefixed(
                Prefix::Do { chan: ChannelId::session("z"), atom: Atom::plain("z") },
                Self::tell("K", &ChannelId::var("x9"), &Contract::internal(vec![(Atom::barred("a"), Contract::end())]), Process::nil()),
            ));
        }
        let p = comps.into_iter().reduce(Process::par).unwrap_or_else(Process::nil);
        (p, told)
    }

    /// A system around `A`: partners for its latent contracts, a broker,
    /// stipulated sessions, and some pre-told contracts.
    pub fn system(&mut self) -> Sample {
        self.defs.clear();
        let mut partners = Vec::new();
        let mut sessions = Vec::new();
        let (mut a, told) = self.a_side(&mut partners, &mut sessions);
        let mut b_comps = Vec::new();
        let mut latent = Vec::new();
        for (i, (x, c)) in partners.iter().enumerate() {
            let y = ChannelId::var(&format!("y{i}"));
            let d = self.partner(c);
            let mut q = Self::tell("K", &y, &d, self.realize(&d, &y));
            if self.coin(0.2) {
                q = Self::tell("K", &y, &d, Process::nil());
            }
            b_comps.push(q);
            let _ = x;
        }
        if self.coin(0.3) {
            let x = ChannelId::var("w");
            let c = self.contract(2);
            let d = self.partner(&c);
            a = Process::par(a, self.realize(&c, &x));
            latent.push(LatentItem { chan: x, who: Participant::new("A"), contract: c });
            let y = ChannelId::var("v");
            b_comps.push(Self::tell("K", &y, &d, self.realize(&d, &y)));
        }
        let mut items = vec![System::Participant(Participant::new("A"), a)];
        for (s, c, d) in &sessions {
            let sid = ChannelId::session(s);
            b_comps.push(self.realize(d, &sid));
            items.push(System::Session(
                s.clone(),
                co2::Bilateral::new(Participant::new("A"), c.clone(), Participant::new("B"), d.clone()),
            ));
        }
        if let Some(q) = b_comps.into_iter().reduce(Process::par) {
            items.push(System::Participant(Participant::new("B"), q));
        }
        let fuses = (0..partners.len() + latent.len())
            .map(|_| Process::prefixed(Prefix::Fuse, Process::nil()))
            .reduce(Process::par);
        if let Some(k) = fuses {
            items.push(System::Participant(Participant::new("K"), k));
        }
        if !latent.is_empty() {
            items.push(System::Latent(Participant::new("K"), latent));
        }
        let mut system = System::par_all(items);
        if !told.is_empty() && self.coin(0.25) {
            system = System::del(vec![told[0].clone()], system);
        }
        Sample { defs: self.take_defs(), system }
    }
}
