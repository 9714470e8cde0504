mod common;

use std::collections::BTreeSet;

use co2::honesty::{
    abstract_honest, abstract_ready, abstract_step, realizes, weak_transition_exists, AbstractProcess,
    AbstractRule, Answer, BppMarking, HonestyConfig, HonestyVerdict,
};
use co2::typing::{congruent, type_process, ChannelType, TypeConfig};
use co2::{parse_process, Contract};
use common::*;

fn t(s: &str) -> ChannelType {
    s.parse().unwrap_or_else(|e| panic!("{s}: {e}"))
}

fn cfg() -> HonestyConfig {
    HonestyConfig::default()
}

fn adv(cs: &[&str], ty: &str) -> AbstractProcess {
    AbstractProcess::Advertising(
        cs.iter().map(|c| co2::syntax::alpha_normalize(&contract(c))).collect(),
        t(ty),
    )
}

fn stip(c: &str, ty: &str) -> AbstractProcess {
    AbstractProcess::Stipulated(co2::syntax::alpha_normalize(&contract(c)), t(ty))
}

fn succ(ap: &AbstractProcess) -> Vec<(AbstractRule, AbstractProcess)> {
    abstract_step(ap)
}

fn has(ap: &AbstractProcess, rule: AbstractRule, next: &AbstractProcess) -> bool {
    succ(ap).iter().any(|(r, n)| *r == rule && n == next)
}

const CI: &str = "a! (+) b!";
const TX: &str = "<a! (+) b!> | tau.a!";

#[test]
fn both_abstract_traces_of_tx() {
    use AbstractRule::*;
    let path1 = [
        (Tell1, adv(&[CI], "tau.a!")),
        (Fuse, stip(CI, "tau.a!")),
        (Tau2, stip(CI, "a!")),
        (Do, stip("E", "0")),
    ];
    let path2 = [
        (Tell1, adv(&[CI], "tau.a!")),
        (Tau1, adv(&[CI], "a!")),
        (Fuse, stip(CI, "a!")),
        (Do, stip("E", "0")),
    ];
    for path in [path1, path2] {
        let mut cur = adv(&[], TX);
        for (r, next) in path {
            assert!(has(&cur, r, &next), "{cur} --{r}--> {next}");
            cur = next;
        }
    }
}

#[test]
fn action_before_advertisement_is_blocked() {
    let start = adv(&[], TX);
    let early = adv(&[], "<a! (+) b!> | a!");
    assert!(has(&start, AbstractRule::Tau1, &early));
    assert!(succ(&early).iter().all(|(r, _)| *r != AbstractRule::Do));
    assert!(succ(&adv(&[], "0")).is_empty());
}

#[test]
fn tx_is_honest() {
    let v = abstract_honest(&t(TX), &cfg());
    assert!(matches!(v, HonestyVerdict::Honest { .. }), "{v}");
}

#[test]
fn realization_examples() {
    assert!(realizes(&t("a!"), &contract(CI), &cfg()).is_honest());
    assert!(realizes(&ChannelType::Nil, &contract("E"), &cfg()).is_honest());
    assert!(realizes(&t("tau?.a!"), &contract("a!"), &cfg()).is_dishonest());
}

#[test]
fn weak_transitions() {
    let c = contract("E");
    assert_eq!(weak_transition_exists(&t("tau.a!"), &atom("a!"), &c, 16), Answer::Yes);
    let blocked = t("tau?.(ok!.pay + tau.no!)");
    assert_eq!(weak_transition_exists(&blocked, &atom("ok!"), &c, 16), Answer::No);
    assert_eq!(weak_transition_exists(&blocked, &atom("no!"), &c, 16), Answer::No);
    assert_eq!(weak_transition_exists(&ChannelType::Nil, &atom("a"), &c, 16), Answer::No);
    let adv = t("<a>.tau.b");
    assert_eq!(weak_transition_exists(&adv, &atom("b"), &c, 16), Answer::Yes);
}

#[test]
fn conditional_silent_steps_depend_on_the_contract() {
    let ty = t("tau[ship_a!?].ship_a!");
    let a = atom("ship_a!");
    assert_eq!(weak_transition_exists(&ty, &a, &contract("ship_a!"), 16), Answer::Yes);
    assert_eq!(weak_transition_exists(&ty, &a, &contract("ship_b!"), 16), Answer::No);
}

#[test]
fn readiness_examples() {
    assert_eq!(abstract_ready(&t("ship_a!"), &contract("ship_b!"), 16), Answer::No);
    assert_eq!(abstract_ready(&ChannelType::Nil, &contract("E"), 16), Answer::Yes);
    assert_eq!(abstract_ready(&t("tau?"), &contract("E"), 16), Answer::Yes);
    assert_eq!(abstract_ready(&t("a!"), &contract(CI), 16), Answer::Yes);
    assert_eq!(abstract_ready(&t("a"), &contract("a + b"), 16), Answer::No);
    assert_eq!(abstract_ready(&t("a | b"), &contract("a + b"), 16), Answer::Yes);
    assert_eq!(abstract_ready(&t("a"), &contract("rdy a.b"), 16), Answer::Yes);
}

#[test]
fn dishonesty_witnesses_replay() {
    let cases = [
        ("<a!>.tau?.a!", None),
        ("<a + b>.(a + tau?.b)", None),
        ("tau?.a!", Some("a!")),
        ("b", Some("a + b")),
    ];
    for (ty, c) in cases {
        let v = match c {
            None => abstract_honest(&t(ty), &cfg()),
            Some(c) => realizes(&t(ty), &contract(c), &cfg()),
        };
        let HonestyVerdict::Dishonest { trace } = &v else {
            panic!("{ty}: {v}")
        };
        assert!(trace[0].0.is_none());
        for w in trace.windows(2) {
            let rule = w[1].0.unwrap();
            assert!(succ(&w[0].1).contains(&(rule, w[1].1.clone())), "{ty}");
        }
        let AbstractProcess::Stipulated(c, t) = &trace.last().unwrap().1 else {
            panic!("witness ends in a stipulated state")
        };
        assert_eq!(abstract_ready(t, c, 16), Answer::No);
        let json = serde_json::to_value(v.witness().unwrap()).unwrap();
        assert!(json[0].get("contractState").is_some() && json[0].get("channelType").is_some());
    }
}

#[test]
fn honest_means_every_stipulated_state_is_ready() {
    for ty in [TX, "<a + b>.(a | b)", "<a (+) b>.(rec X. tau.X + tau.a + tau.b)"] {
        assert!(abstract_honest(&t(ty), &cfg()).is_honest(), "{ty}");
        let start = adv(&[], ty);
        let mut seen = BTreeSet::from([start.clone()]);
        let mut stack = vec![start];
        while let Some(ap) = stack.pop() {
            if let AbstractProcess::Stipulated(c, t) = &ap {
                assert_eq!(abstract_ready(t, c, 16), Answer::Yes, "{ap}");
            }
            for (_, n) in succ(&ap) {
                if seen.insert(n.clone()) {
                    stack.push(n);
                }
            }
        }
    }
}

#[test]
fn unbounded_markings_are_inconclusive() {
    let small = HonestyConfig { marking_bound: 4, ..cfg() };
    let v = abstract_honest(&t("<a>.rec X. tau.(X | a)"), &small);
    assert!(matches!(v, HonestyVerdict::Inconclusive { .. }), "{v}");
}

#[test]
fn markings_round_trip() {
    for ty in [TX, "a | a | b.c", "0", "rec X. a.(X | b)", "(a + b) | (a + b)"] {
        let x = t(ty);
        let m = BppMarking::from_type(&x);
        assert!(congruent(&m.to_type(), &x), "{ty}");
    }
    let m = BppMarking::from_type(&t("a | a | b"));
    assert_eq!(m.max_place(), Some((&t("a"), 2)));
}

fn loop_type(name: &str) -> (ChannelType, Contract) {
    let prog = program(name);
    let f = type_process(&prog.defs, &parse_process("X(x)").unwrap(), &TypeConfig::default()).unwrap();
    let c = prog.process.as_ref().unwrap().contracts()[0].clone();
    (f.get(&var("x")).clone(), c)
}

#[test]
fn fairness_loops_realize_their_contracts() {
    for name in ["fairness_internal.co2", "fairness_external.co2"] {
        let (ty, c) = loop_type(name);
        let v = realizes(&ty, &c, &cfg());
        assert!(v.is_honest(), "{name}: {v}");
        let adv = ChannelType::prefix(co2::typing::AbsAction::Tell(c.clone()), ty);
        assert!(abstract_honest(&adv, &cfg()).is_honest(), "{name}");
    }
}

#[test]
fn fuse_before_the_loop_blocks_readiness() {
    let prog = program("fairness_internal.co2");
    let err = type_process(&prog.defs, prog.process.as_ref().unwrap(), &TypeConfig::default());
    assert!(matches!(err, Err(co2::typing::TypeError::DishonestChannel(_))));
}
