mod common;

use common::props::*;

#[test]
fn subject_reduction_on_random_systems() {
    let pop = population(500, 7);
    let t = subject_reduction(&pop);
    println!("{t}");
    assert!(t.ok(), "{t}");
}

#[test]
fn progress_on_random_systems() {
    let pop = population(500, 7);
    let t = progress(&pop, 32);
    println!("{t}");
    assert!(t.ok(), "{t}");
}

#[test]
fn typing_and_readiness_lemmas() {
    let l = lemmas(300, 23, 32);
    for (name, t) in l.all() {
        println!("{name}: {t}");
    }
    for (name, t) in l.all() {
        assert!(t.ok(), "{name}: {t}");
    }
}

#[test]
fn abstract_contract_relation_is_sound() {
    let t = abstract_contract_soundness(1, 3);
    println!("{t}");
    assert!(t.instances > 0 && t.ok(), "{t}");
}
