//! One test per acceptance criterion; each prints a single PASS/FAIL line.

use lsi_core::verification::*;

fn report(r: CriterionResult) {
    println!("{r}");
    assert!(r.passed, "{r}");
}

#[test]
fn acceptance_01_bell_triple_transcript_table() {
    report(criterion_1());
}

#[test]
fn acceptance_02_bell_triple_identification() {
    report(criterion_2());
}

#[test]
fn acceptance_03_bell_product_regrouping() {
    report(criterion_3());
}

#[test]
fn acceptance_04_bell_pairs_certificate() {
    report(criterion_4());
}

#[test]
fn acceptance_05_mes_basis_scan() {
    report(criterion_5());
}

#[test]
fn acceptance_06_mes_basis_pairs() {
    report(criterion_6());
}

#[test]
fn acceptance_07_ghz_connecting_unitaries() {
    report(criterion_7());
}

#[test]
fn acceptance_08_ghz3_genuine() {
    report(criterion_8());
}

#[test]
fn acceptance_09_ghz4_genuine() {
    report(criterion_9());
}

#[test]
fn acceptance_10_bell_four_three_protocol() {
    report(criterion_10());
}

#[test]
fn acceptance_11_protocol_certificate_consistency() {
    report(criterion_11());
}

#[test]
fn acceptance_12_infrastructure() {
    report(criterion_12());
}
