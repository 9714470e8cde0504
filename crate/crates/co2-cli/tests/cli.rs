use std::path::{Path, PathBuf};
use std::process::Command;

use co2::Participant;
use co2_cli::{
    cmd_check, cmd_compliance, cmd_simulate, cmd_test_honesty, Format, RunConfig, SimMode,
};

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name)
}

fn scratch(name: &str, text: &str) -> PathBuf {
    let p = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn text() -> RunConfig {
    RunConfig::default()
}

fn json() -> RunConfig {
    RunConfig {
        format: Format::Json,
        ..RunConfig::default()
    }
}

fn a() -> Participant {
    Participant::new("A")
}

fn co2(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_co2"))
        .args(args)
        .current_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("../.."))
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn food_store_is_compliant_with_the_customer() {
    let o = cmd_compliance(&corpus("food_store.ctr"), &corpus("customer.ctr"), &text()).unwrap();
    assert_eq!(o.code, 0);
    assert!(o.stdout.starts_with("compliant"), "{}", o.stdout);
}

#[test]
fn success_is_compliant_with_itself() {
    let e = scratch("e.ctr", "E");
    let o = cmd_compliance(&e, &e, &text()).unwrap();
    assert_eq!(o.code, 0);
}

#[test]
fn internal_choice_against_a_single_offer_is_not_compliant() {
    let o = cmd_compliance(&corpus("choice_internal.ctr"), &corpus("offer_a.ctr"), &text()).unwrap();
    assert_eq!(o.code, 1, "{}", o.stdout);
    assert!(o.stdout.starts_with("non-compliant"));
    assert!(o.stdout.contains("ready sets: "), "{}", o.stdout);
    let j = cmd_compliance(&corpus("choice_internal.ctr"), &corpus("offer_a.ctr"), &json()).unwrap();
    let v: serde_json::Value = serde_json::from_str(j.stdout.trim()).unwrap();
    assert_eq!(v["verdict"], "non-compliant");
    assert!(v["leftReady"].is_string() && v["rightReady"].is_string());
}

#[test]
fn check_verdicts_on_the_stores() {
    let h = cmd_check(&corpus("store_honest.co2"), &a(), &text()).unwrap();
    assert_eq!(h.code, 0);
    assert!(h.stdout.starts_with("HONEST (typeable)"));

    let m = cmd_check(&corpus("store_malicious.co2"), &a(), &text()).unwrap();
    assert_eq!(m.code, 1);
    assert!(m.stdout.starts_with("UNTYPEABLE"));
    assert!(m.stdout.contains("channel x:"));
    assert!(m.stdout.contains("(ship_b!, tau[ship_a!?].ship_a!)"), "{}", m.stdout);

    let n = cmd_check(&corpus("store_naive.co2"), &a(), &json()).unwrap();
    assert_eq!(n.code, 1);
    let v: serde_json::Value = serde_json::from_str(n.stdout.trim()).unwrap();
    let chans: Vec<&str> = v["channels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["channel"].as_str().unwrap())
        .collect();
    assert_eq!(chans, ["x", "y"]);
    for c in v["channels"].as_array().unwrap() {
        let last = c["witness"].as_array().unwrap().last().unwrap();
        assert!(last["channelType"].as_str().unwrap().contains("tau?"), "{last}");
    }
}

#[test]
fn check_types_a_participant_of_a_system() {
    let o = cmd_check(&corpus("trivial.co2"), &Participant::new("B"), &text()).unwrap();
    assert_eq!(o.code, 0, "{}", o.stdout);
}

#[test]
fn simulate_contains_the_four_step_run() {
    let o = cmd_simulate(&corpus("trivial.co2"), 4, SimMode::All, &json()).unwrap();
    assert_eq!(o.code, 0);
    let lines: Vec<serde_json::Value> = o
        .stdout
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let run0: Vec<String> = lines
        .iter()
        .filter(|v| v["run"] == 0)
        .map(|v| format!("{} : {}", v["participant"].as_str().unwrap(), v["prefix"].as_str().unwrap()))
        .collect();
    assert_eq!(
        run0,
        ["A : tell K x0 {(+)a}", "B : tell K x1 {+a!}", "K : fuse", "A : do @s0 a"]
    );
    let last = lines.iter().filter(|v| v["run"] == 0).last().unwrap();
    assert_eq!(
        last["systemAfter"].as_str().unwrap(),
        "(@s0) (B[do @s0 a!] | @s0[A says E | B says rdy a!.E])"
    );
}

#[test]
fn simulate_zero_is_empty() {
    let z = scratch("zero.co2", "system 0;");
    let o = cmd_simulate(&z, 4, SimMode::All, &json()).unwrap();
    assert_eq!((o.code, o.stdout.as_str()), (0, ""));
}

#[test]
fn simulate_trace_reaches_the_stuck_state() {
    let o = cmd_simulate(&corpus("dependent_violation.co2"), 64, SimMode::All, &text()).unwrap();
    assert!(
        o.stdout.contains(
            "(@s0, @s1) (A[do @s1 a . do @s0 b] | B[do @s0 b!] | @s0[A says (+)b | B says +b!] | @s1[A says a | C says a!])"
        ),
        "{}",
        o.stdout
    );
    let t = cmd_simulate(&corpus("trivial.co2"), 64, SimMode::Trace, &text()).unwrap();
    assert!(t.stdout.starts_with("run 0 (5 steps)"), "{}", t.stdout);
}

#[test]
fn honest_store_passes_the_dynamic_test() {
    let ctx = [corpus("customer_a.co2"), corpus("customer_b.co2")];
    let o = cmd_test_honesty(&corpus("store_honest.co2"), &a(), &ctx, &text()).unwrap();
    assert_eq!(o.code, 0, "{}", o.stdout);
    assert!(o.stdout.starts_with("NO VIOLATION"));
}

#[test]
fn dependent_violation_is_detected() {
    let o = cmd_test_honesty(&corpus("dependent_violation.co2"), &a(), &[], &json()).unwrap();
    assert_eq!(o.code, 2, "{}", o.stdout);
    let v: serde_json::Value = serde_json::from_str(o.stdout.trim()).unwrap();
    assert_eq!(v["verdict"], "dishonest");
    assert!(!v["trace"].as_array().unwrap().is_empty());
}

#[test]
fn binary_exit_codes() {
    assert_eq!(co2(&["compliance", "corpus/food_store.ctr", "corpus/customer.ctr"]).0, 0);
    assert_eq!(co2(&["check", "corpus/store_malicious.co2"]).0, 1);
    assert_eq!(co2(&["check", "corpus/store_honest.co2", "--bound-marking", "16"]).0, 0);
    let (code, _, err) = co2(&["frobnicate"]);
    assert_eq!(code, 64);
    assert!(!err.is_empty());
    let (code, _, err) = co2(&["check", "corpus/no_such_file.co2"]);
    assert_eq!(code, 64);
    assert!(err.starts_with("error: "));
    assert_eq!(co2(&["--help"]).0, 0);
}

#[test]
fn output_is_deterministic() {
    let args = ["simulate", "--all", "--steps", "4", "--json", "corpus/trivial.co2"];
    let (c1, o1, _) = co2(&args);
    let (c2, o2, _) = co2(&args);
    assert_eq!((c1, &o1), (c2, &o2));
    assert!(o1.contains("\"systemAfter\""));
}
