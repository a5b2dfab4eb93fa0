//! Byte-exact report regressions. Regenerate with `LSI_BLESS=1 cargo test --test golden`.

use std::path::PathBuf;

use lsi_core::script::{execute, parse, ExecOptions, RunFilter};
use lsi_core::verification::{BELL_TRIPLE_SCRIPT, GHZ3_SCRIPT, GHZ4_SCRIPT};

fn check(script: &str, filter: RunFilter, golden: &str) {
    let opts = ExecOptions {
        filter,
        ..ExecOptions::default()
    };
    let got = execute(&parse(script).unwrap(), &opts).unwrap().to_json();
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "golden", golden]
        .iter()
        .collect();
    if std::env::var_os("LSI_BLESS").is_some() {
        std::fs::write(&path, &got).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&path).unwrap();
    assert!(got == want, "{golden} drifted:\n{got}");
}

#[test]
fn bell_triple_table_report() {
    check(
        BELL_TRIPLE_SCRIPT,
        RunFilter::Simulate,
        "bell_triple_table.json",
    );
}

#[test]
fn ghz3_certificate_report() {
    check(GHZ3_SCRIPT, RunFilter::Certify, "ghz3_certificates.json");
}

#[test]
fn ghz4_certificate_report() {
    check(GHZ4_SCRIPT, RunFilter::Certify, "ghz4_certificates.json");
}

#[test]
fn bell_triple_golden_lists_each_column() {
    let text = std::fs::read_to_string(
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/bell_triple_table.json"),
    )
    .unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let hyps = v["runs"][0]["hypotheses"].as_array().unwrap();
    assert_eq!(hyps.len(), 3);
    for h in hyps {
        let ts = h["transcripts"].as_array().unwrap();
        assert_eq!(ts.len(), 4);
        assert!(ts.iter().all(|t| t["probability"] == 0.25));
    }
    assert_eq!(v["runs"][0]["perfect_identification"], true);
}
