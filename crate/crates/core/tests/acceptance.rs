//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line. Tolerances and trial counts are pinned in `Scale::acceptance`.

use gauge_logic::acceptance::{self, CriterionResult, Scale};

fn report(result: CriterionResult) {
    println!(
        "[{}] {} — {}",
        if result.pass { "PASS" } else { "FAIL" },
        result.name,
        result.detail
    );
    assert!(result.pass, "{}: {}", result.name, result.detail);
}

fn corpus() -> acceptance::TestCorpus {
    acceptance::build_corpus(&Scale::acceptance())
}

#[test]
fn criterion_01_bound_soundness() {
    report(acceptance::bound_soundness(&corpus()));
}

#[test]
fn criterion_02_constancy_soundness() {
    report(acceptance::constancy_soundness(&corpus()));
}

#[test]
fn criterion_03_modulus_soundness() {
    report(acceptance::modulus_soundness(&corpus(), &Scale::acceptance()));
}

#[test]
fn criterion_04_window_sandwich() {
    report(acceptance::window_sandwich(&corpus(), &Scale::acceptance()));
}

#[test]
fn criterion_05_prenex_equivalence() {
    report(acceptance::prenex_equivalence(&corpus()));
}

#[test]
fn criterion_06_emboundment() {
    report(acceptance::emboundment(&corpus()));
}

#[test]
fn criterion_07_measure_algebras() {
    report(acceptance::measure_algebra_theories(&Scale::acceptance()));
}

#[test]
fn criterion_08_graph_transform() {
    report(acceptance::graph_transform(&Scale::acceptance()));
}

#[test]
fn criterion_09_principal_ultraproduct() {
    report(acceptance::principal_los(&corpus()));
}

#[test]
fn criterion_10_banach_mazur() {
    report(acceptance::banach_mazur_trials(&Scale::acceptance()));
}
