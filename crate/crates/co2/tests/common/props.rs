use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use co2::contracts::{
    abstract_contract_step, check_compliance, contract_step, ready_condition, ready_sets, AbsLabel,
    ComplianceReport, ReadySet,
};
use co2::honesty::{weak_transition_exists, Answer, HonestyConfig};
use co2::runtime::{normalize, ready_do, system_step, weak_ready_do, NormalSystem, SysLabel};
use co2::syntax::{alpha_normalize, SumKind};
use co2::typing::{
    abstract_prefix, leq, ChannelType, process_type_step, type_process, type_subst, type_system, AbsAction, ProcessType, TypeConfig,
};
use co2::{Atom, Bilateral, ChannelId, Contract, Defs, Participant, Prefix, Process, System};

use super::gen::{Gen, Sample};

/// Outcome of one property over a population.
#[derive(Clone, Debug, Default)]
pub struct Tally {
    pub instances: usize,
    pub checks: usize,
    pub undecided: usize,
    pub violations: Vec<String>,
}

impl Tally {
    fn fail(&mut self, msg: String) {
        if self.violations.len() < 20 {
            self.violations.push(msg);
        } else {
            self.violations.push(String::new());
            self.violations.truncate(21);
        }
    }

    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for Tally {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} instances, {} checks, {} undecided, {} violations",
            self.instances,
            self.checks,
            self.undecided,
            self.violations.len()
        )?;
        for v in self.violations.iter().take(3) {
            write!(f, "\n  {v}")?;
        }
        Ok(())
    }
}

fn a() -> Participant {
    Participant::new("A")
}

fn cfg() -> TypeConfig {
    TypeConfig::default()
}

/// A typed system whose process type is honest at every point.
#[derive(Clone, Debug)]
pub struct Typed {
    pub defs: Defs,
    pub system: NormalSystem,
    pub ty: ProcessType,
}

fn honest(f: &ProcessType) -> bool {
    f.honesty(&HonestyConfig::default()).iter().all(|(_, v)| v.is_honest())
}

/// `n` typed honest systems, drawn from a seeded generator.
pub fn population(n: usize, seed: u64) -> Vec<Typed> {
    let mut g = Gen::new(seed);
    let mut out = Vec::new();
    let mut tries = 0;
    while out.len() < n {
        tries += 1;
        assert!(tries < 50 * n, "generator yields too few typed systems");
        let Sample { defs, system } = g.system();
        let ns = normalize(&system);
        if let Ok(ty) = type_system(&a(), &ns, &defs, &cfg()) {
            if honest(&ty) {
                out.push(Typed { defs, system: ns, ty });
            }
        }
    }
    out
}

/// States reachable within `depth` steps, at most `cap` of them.
fn reachable(s: &NormalSystem, defs: &Defs, depth: usize, cap: usize) -> Vec<NormalSystem> {
    let mut seen = BTreeSet::from([s.clone()]);
    let mut out = vec![s.clone()];
    let mut frontier = vec![s.clone()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for r in &frontier {
            for (_, t) in system_step(r, defs) {
                if seen.len() < cap && seen.insert(t.clone()) {
                    out.push(t.clone());
                    next.push(t);
                }
            }
        }
        frontier = next;
    }
    out
}

/// Applies `σ`, grouped by target session.
fn apply_sigma(f: &ProcessType, sigma: &BTreeMap<ChannelId, String>) -> Option<ProcessType> {
    let mut by_target: BTreeMap<&String, Vec<ChannelId>> = BTreeMap::new();
    for (u, s) in sigma {
        by_target.entry(s).or_default().push(u.clone());
    }
    by_target
        .into_iter()
        .try_fold(f.clone(), |f, (s, us)| type_subst(&f, &us, &ChannelId::session(s)))
}

fn expected(f: &ProcessType, l: &SysLabel) -> Vec<ProcessType> {
    let base = if l.participant == a() {
        process_type_step(f, &l.prefix)
    } else {
        vec![f.clone()]
    };
    base.iter().filter_map(|g| apply_sigma(g, &l.sigma)).collect()
}

/// Every step of a typed system is matched by the process type.
pub fn subject_reduction(pop: &[Typed]) -> Tally {
    let mut t = Tally::default();
    for sample in pop {
        t.instances += 1;
        for r in reachable(&sample.system, &sample.defs, 4, 40) {
            t.checks += 1;
            if let Err(e) = type_system(&a(), &r, &sample.defs, &cfg()) {
                t.fail(format!("reduct not typeable: {r}\n{e}"));
                continue;
            }
            let o = r.opened();
            let f = match type_system(&a(), &o, &sample.defs, &cfg()) {
                Ok(f) => f,
                Err(e) => {
                    t.fail(format!("opened state not typeable: {o}\n{e}"));
                    continue;
                }
            };
            for (l, o2) in system_step(&o, &sample.defs) {
                t.checks += 1;
                let cands = expected(&f, &l);
                match type_system(&a(), &o2, &sample.defs, &cfg()) {
                    Ok(g) if cands.iter().any(|c| c.congruent(&g)) => {}
                    Ok(g) => t.fail(format!(
                        "{o}\n --[{l}]--> {o2}\nhas type\n{g}\nexpected one of {} candidates from\n{f}",
                        cands.len()
                    )),
                    Err(e) => t.fail(format!("{o}\n --[{l}]--> {o2}\nnot typeable: {e}")),
                }
            }
        }
    }
    t
}

/// `f(s) ⇒a` implies `a ∈ WRD_s(A)` in every reachable state.
pub fn progress(pop: &[Typed], wrd_bound: usize) -> Tally {
    let mut t = Tally::default();
    for sample in pop {
        t.instances += 1;
        for r in reachable(&sample.system, &sample.defs, 4, 40) {
            let Ok(f) = type_system(&a(), &r, &sample.defs, &cfg()) else {
                continue;
            };
            for (s, g) in r.sessions() {
                let Some(c) = g.side(&a()) else { continue };
                let u = ChannelId::session(s);
                let ty = f.get(&u);
                let rd = ready_do(&r, &a(), &u, &sample.defs);
                for act in ty.actions() {
                    let AbsAction::Atom(at) = act else { continue };
                    if weak_transition_exists(ty, &at, c, 16) != Answer::Yes {
                        continue;
                    }
                    t.checks += 1;
                    if rd.contains(&at) {
                        continue;
                    }
                    let mut found = None;
                    for b in [2, 8, wrd_bound] {
                        let w = weak_ready_do(&r, &a(), &u, &sample.defs, b.min(wrd_bound));
                        if w.atoms.contains(&at) || w.saturated || b >= wrd_bound {
                            found = Some(w);
                            break;
                        }
                    }
                    let w = found.expect("bound list ends at wrd_bound");
                    if !w.atoms.contains(&at) {
                        if w.saturated {
                            t.fail(format!("{r}\n{u}: {ty} => {at} but WRD = {:?}", w.atoms));
                        } else {
                            t.undecided += 1;
                        }
                    }
                }
            }
        }
    }
    t
}

/// Results of the lemma suite, one tally per lemma.
pub struct Lemmas {
    pub struct_equiv: Tally,
    pub nonfree: Tally,
    pub del_proc: Tally,
    pub del_sys: Tally,
    pub honesty_order: Tally,
    pub rd_wrd: Tally,
    pub wrd_monotone: Tally,
    pub default_silent: Tally,
    pub lifting: Tally,
}

impl Lemmas {
    pub fn all(&self) -> [(&'static str, &Tally); 9] {
        [
            ("struct-equiv typing", &self.struct_equiv),
            ("non-free channels at default", &self.nonfree),
            ("delimitation ordering (processes)", &self.del_proc),
            ("delimitation ordering (systems)", &self.del_sys),
            ("honesty ordering", &self.honesty_order),
            ("RD within WRD", &self.rd_wrd),
            ("WRD monotone in bound", &self.wrd_monotone),
            ("default type silent", &self.default_silent),
            ("type step lifting", &self.lifting),
        ]
    }
}

struct Fresh(usize);

impl Fresh {
    fn var(&mut self) -> ChannelId {
        self.0 += 1;
        ChannelId::var(&format!("r{}", self.0))
    }
}

/// A structurally congruent variant of `p`.
fn rewrite(p: &Process, g: &mut Gen, fresh: &mut Fresh) -> Process {
    let p = match p {
        Process::Sum(bs) => {
            let mut bs: Vec<(Prefix, Process)> =
                bs.iter().map(|(pi, k)| (pi.clone(), rewrite(k, g, fresh))).collect();
            bs.reverse();
            if g.coin(0.5) {
                let k = bs.len().min(1);
                bs.rotate_left(k);
            }
            Process::Sum(bs)
        }
        Process::Par(l, r) => {
            let (l, r) = (rewrite(l, g, fresh), rewrite(r, g, fresh));
            match (g.below(3), &l) {
                (0, _) => Process::par(r, l),
                (1, Process::Del(vs, body)) if vs.iter().all(|v| !r.free_channels().contains(v)) => {
                    Process::del(vs.clone(), Process::par((**body).clone(), r))
                }
                (1, Process::Par(l1, l2)) => {
                    Process::par((**l1).clone(), Process::par((**l2).clone(), r))
                }
                _ => Process::par(l, r),
            }
        }
        Process::Del(vs, body) => {
            let body = rewrite(body, g, fresh);
            let map: BTreeMap<ChannelId, ChannelId> = vs.iter().map(|v| (v.clone(), fresh.var())).collect();
            let vs2: Vec<ChannelId> = vs.iter().map(|v| map[v].clone()).collect();
            let body = body.rename(&map);
            if vs2.len() > 1 && g.coin(0.5) {
                Process::del(vec![vs2[0].clone()], Process::del(vs2[1..].to_vec(), body))
            } else {
                Process::del(vs2, body)
            }
        }
        Process::Call(..) => p.clone(),
    };
    match g.below(6) {
        0 => Process::par(p, Process::nil()),
        1 => Process::del(vec![fresh.var()], p),
        _ => p,
    }
}

fn same_outcome(
    a: &Result<ProcessType, co2::typing::TypeError>,
    b: &Result<ProcessType, co2::typing::TypeError>,
) -> bool {
    match (a, b) {
        (Ok(f), Ok(g)) => f.congruent(g),
        (Err(e), Err(d)) => std::mem::discriminant(e) == std::mem::discriminant(d),
        _ => false,
    }
}

fn same_action(a: &AbsAction, b: &AbsAction) -> bool {
    let as_type = |x: &AbsAction| ChannelType::action(x.clone()).canon();
    as_type(a) == as_type(b)
}

fn silent(act: &AbsAction) -> bool {
    matches!(act, AbsAction::Tau | AbsAction::TauBlock)
}

/// Every prefix occurring in `p`, with calls instantiated once.
fn prefixes(p: &Process, defs: &Defs, seen: &mut BTreeSet<(String, Vec<ChannelId>)>, out: &mut BTreeSet<Prefix>) {
    match p {
        Process::Sum(bs) => {
            for (pi, k) in bs {
                out.insert(pi.clone());
                prefixes(k, defs, seen, out);
            }
        }
        Process::Par(l, r) => {
            prefixes(l, defs, seen, out);
            prefixes(r, defs, seen, out);
        }
        Process::Del(_, body) => prefixes(body, defs, seen, out),
        Process::Call(x, args) => {
            if seen.insert((x.clone(), args.clone())) {
                if let Some(d) = defs.get(x) {
                    prefixes(&d.instantiate(args), defs, seen, out);
                }
            }
        }
    }
}

pub fn lemmas(n: usize, seed: u64, wrd_bound: usize) -> Lemmas {
    let mut g = Gen::new(seed);
    g.noise = 0.15;
    let mut l = Lemmas {
        struct_equiv: Tally::default(),
        nonfree: Tally::default(),
        del_proc: Tally::default(),
        del_sys: Tally::default(),
        honesty_order: Tally::default(),
        rd_wrd: Tally::default(),
        wrd_monotone: Tally::default(),
        default_silent: Tally::default(),
        lifting: Tally::default(),
    };
    let mut fresh = Fresh(0);
    let hcfg = HonestyConfig::default();
    for _ in 0..n {
        let (defs, p) = g.process();
        let fp = type_process(&defs, &p, &cfg());

        l.struct_equiv.instances += 1;
        let q = rewrite(&p, &mut g, &mut fresh);
        let fq = type_process(&defs, &q, &cfg());
        l.struct_equiv.checks += 1;
        if !same_outcome(&fp, &fq) {
            l.struct_equiv.fail(format!("{p}\n  vs {q}\n  {fp:?}\n  {fq:?}"));
        }

        let Ok(f) = &fp else { continue };
        let free = p.free_channels();

        l.nonfree.instances += 1;
        for z in [ChannelId::var("zz"), ChannelId::session("zz"), ChannelId::var("x0"), ChannelId::var("x1"), ChannelId::session("s0")] {
            if !free.contains(&z) {
                l.nonfree.checks += 1;
                if !f.is_default_at(&z) {
                    l.nonfree.fail(format!("{p}: {z} not free but typed {}", f.get(&z)));
                }
            }
        }

        l.del_proc.instances += 1;
        for u in free.iter().filter(|u| u.is_var()) {
            let dp = Process::del(vec![u.clone()], p.clone());
            if let Ok(fd) = type_process(&defs, &dp, &cfg()) {
                l.del_proc.checks += 1;
                if !leq(&fd, f) {
                    l.del_proc.fail(format!("({u}) {p}:\n{fd}\nnot below\n{f}"));
                }
            }
        }

        l.default_silent.instances += 1;
        l.default_silent.checks += 1;
        if !f.default_type().actions().iter().all(silent) {
            l.default_silent.fail(format!("{p}: default {}", f.default_type()));
        }

        l.lifting.instances += 1;
        let mut pis = BTreeSet::from([Prefix::Tau, Prefix::Fuse]);
        prefixes(&p, &defs, &mut BTreeSet::new(), &mut pis);
        let mut chans: Vec<ChannelId> = f.explicit().keys().cloned().collect();
        chans.push(ChannelId::var("zz9"));
        for u in &chans {
            for (act, next) in f.get(u).step() {
                l.lifting.checks += 1;
                let lifted = pis.iter().filter(|pi| same_action(&abstract_prefix(pi, u), &act)).any(|pi| {
                    process_type_step(f, pi)
                        .iter()
                        .any(|f2| co2::typing::congruent(f2.get(u), &next))
                });
                if !lifted {
                    l.lifting.fail(format!("{p}: {u} --{act}--> {next} not lifted"));
                }
            }
        }

        if honest(f) {
            l.honesty_order.instances += 1;
            let mut keys: Vec<ChannelId> = f.explicit().keys().cloned().collect();
            g.shuffle(&mut keys);
            for k in 0..=keys.len() {
                let f2 = keys[..k].iter().fold(f.clone(), |h, u| h.reset(u));
                l.honesty_order.checks += 1;
                if !leq(&f2, f) {
                    l.honesty_order.fail(format!("reset does not yield a lower type:\n{f2}"));
                } else if !f2.honesty(&hcfg).iter().all(|(_, v)| v.is_honest()) {
                    l.honesty_order.fail(format!("{f2}\nbelow honest\n{f}\nis not honest"));
                }
            }
        }
    }

    for _ in 0..n {
        let Sample { defs, system } = g.system();
        let ns = normalize(&system);
        if let Ok(f) = type_system(&a(), &ns, &defs, &cfg()) {
            l.del_sys.instances += 1;
            for u in ns.free_channels().into_iter().filter(|u| u.is_var()) {
                let ds = normalize(&System::del(vec![u.clone()], system.clone()));
                if let Ok(fd) = type_system(&a(), &ds, &defs, &cfg()) {
                    l.del_sys.checks += 1;
                    if !leq(&fd, &f) {
                        l.del_sys.fail(format!("({u}) {ns}:\n{fd}\nnot below\n{f}"));
                    }
                }
            }
        }

        l.rd_wrd.instances += 1;
        l.wrd_monotone.instances += 1;
        for who in ns.processes().keys() {
            for u in &ns.process_of(who).free_channels() {
                let rd = ready_do(&ns, who, u, &defs);
                let mut prev: Option<BTreeSet<Atom>> = None;
                for b in [1, 2, 4, wrd_bound.min(6)] {
                    let w = weak_ready_do(&ns, who, u, &defs, b);
                    l.rd_wrd.checks += 1;
                    if !rd.is_subset(&w.atoms) {
                        l.rd_wrd.fail(format!("{ns}: RD_{u}({who}) = {rd:?} not within WRD = {:?}", w.atoms));
                    }
                    if let Some(p) = &prev {
                        l.wrd_monotone.checks += 1;
                        if !p.is_subset(&w.atoms) {
                            l.wrd_monotone.fail(format!("{ns}: WRD_{u}({who}) shrinks at bound {b}"));
                        }
                    }
                    prev = Some(w.atoms);
                }
            }
        }
    }
    l
}

/// All finite contracts of depth at most `depth` over the names `a`, `b`,
/// internal sums on barred atoms, external sums on plain atoms.
pub fn all_contracts(depth: usize) -> Vec<Contract> {
    if depth == 0 {
        return vec![Contract::end()];
    }
    let smaller = all_contracts(depth - 1);
    let mut out = vec![Contract::end()];
    for kind in [SumKind::Internal, SumKind::External] {
        let barred = kind == SumKind::Internal;
        let (a, b) = (Atom::new("a", barred), Atom::new("b", barred));
        for k in &smaller {
            out.push(Contract::Sum(kind, vec![(a.clone(), k.clone())]));
            out.push(Contract::Sum(kind, vec![(b.clone(), k.clone())]));
            for k2 in &smaller {
                out.push(Contract::Sum(kind, vec![(a.clone(), k.clone()), (b.clone(), k2.clone())]));
            }
        }
    }
    out
}

fn side_of(g: &Bilateral, who: &Participant) -> Contract {
    alpha_normalize(g.side(who).expect("participant of the session"))
}

/// The abstract contract relation covers every concrete move of `A`'s side
/// in every session with a compliant partner.
pub fn abstract_contract_soundness(own_depth: usize, partner_depth: usize) -> Tally {
    let mut t = Tally::default();
    let (pa, pb) = (Participant::new("A"), Participant::new("B"));
    let mut groups: BTreeMap<BTreeSet<ReadySet>, Vec<Contract>> = BTreeMap::new();
    for d in all_contracts(partner_depth) {
        groups.entry(ready_sets(&d)).or_default().push(d);
    }
    for c in all_contracts(own_depth) {
        let partners = groups
            .values()
            .filter(|g| ready_condition(&c, &g[0]).is_none())
            .flatten();
        for d in partners {
            if !matches!(check_compliance(&c, d), ComplianceReport::Compliant { .. }) {
                continue;
            }
            t.instances += 1;
            let start = Bilateral::new(pa.clone(), c.clone(), pb.clone(), d.clone());
            let mut seen = BTreeSet::from([start.clone()]);
            let mut stack = vec![start];
            while let Some(g) = stack.pop() {
                let mine = side_of(&g, &pa);
                let abs = abstract_contract_step(&mine);
                for (l, g2) in contract_step(&g) {
                    let next = side_of(&g2, &pa);
                    let label = if l.participant == pa { AbsLabel::Own(l.atom.clone()) } else { AbsLabel::Ctx };
                    t.checks += 1;
                    if !abs.contains(&(label.clone(), next.clone())) {
                        t.fail(format!("{g} --{}--> {g2}: {mine} has no {label} move to {next}", l.participant));
                    }
                    if seen.insert(g2.clone()) {
                        stack.push(g2);
                    }
                }
            }
        }
    }
    t
}
