use std::path::PathBuf;
use std::process::{Command, Output};

fn lsi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "scenarios", name]
        .iter()
        .collect();
    p.to_string_lossy().into_owned()
}

fn temp_script(name: &str, body: &str) -> String {
    let p = std::env::temp_dir().join(format!("lsi-cli-{}-{name}", std::process::id()));
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn bell_one_amplitudes() {
    let o = lsi(&["families", "bell", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let amps: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(' ').next().unwrap())
        .collect();
    assert_eq!(amps, ["0.707106781187", "0", "0", "0.707106781187"]);
}

#[test]
fn structured_families_parse_as_json() {
    let o = lsi(&["--format", "structured", "families", "ghz3", "1"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["amplitudes"].as_array().unwrap().len(), 8);
    assert_eq!(v["parties"], serde_json::json!(["A", "B", "C"]));
}

#[test]
fn bell_triple_certify_condition_fails() {
    let o = lsi(&[
        "--format",
        "structured",
        "certify",
        &scenario("bell_triple_table.lsi"),
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let runs = v["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 1, "simulate runs are filtered out");
    assert_eq!(runs[0]["certificates"][0]["verdict"], "ConditionFails");
}

#[test]
fn simulate_identifies_bell_triple() {
    let o = lsi(&[
        "--format",
        "structured",
        "simulate",
        &scenario("bell_triple_table.lsi"),
    ]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["runs"][0]["perfect_identification"], true);
    assert_eq!(v["runs"][0]["order_blind"], true);
}

#[test]
fn parse_error_is_located_and_exits_two() {
    let path = temp_script(
        "bad.lsi",
        "set s = bell_basis(2)\ntask t = subset(x, k=2)\n",
    );
    let o = lsi(&["--format", "structured", "parse", &path]);
    assert_eq!(o.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["error"]["kind"], "parse");
    assert_eq!(v["error"]["line"], 2);
}

#[test]
fn resource_guard_exits_three() {
    let path = temp_script(
        "big.lsi",
        "set s = ges_basis(3)\ntask t = subset(s, k=6)\ncertify t cut A:B\n",
    );
    let o = lsi(&["--format", "structured", "certify", &path]);
    assert_eq!(o.status.code(), Some(3));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["error"]["kind"], "resource");
    assert_eq!(v["error"]["line"], 3);
}

#[test]
fn raising_max_dim_lifts_the_guard() {
    let path = temp_script(
        "lifted.lsi",
        "set s = ges_basis(3)\ntask t = subset(s, k=6)\ncertify t cut A:B\n",
    );
    let o = lsi(&["--max-dim", "1000000", "certify", &path]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("route: factorized"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(lsi(&["families", "bell", "9"]).status.code(), Some(2));
    assert_eq!(lsi(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(
        lsi(&["--tolerance=-1", "verify-paper"]).status.code(),
        Some(2)
    );
    let o = lsi(&["--format", "structured", "simulate"]);
    assert_eq!(o.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["error"]["kind"], "usage");
}

#[test]
fn output_flag_writes_file() {
    let out = std::env::temp_dir().join(format!("lsi-cli-{}-out.json", std::process::id()));
    let o = lsi(&[
        "--format",
        "structured",
        "--output",
        out.to_str().unwrap(),
        "certify",
        &scenario("ghz3_genuine.lsi"),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let direct = lsi(&[
        "--format",
        "structured",
        "certify",
        &scenario("ghz3_genuine.lsi"),
    ]);
    assert_eq!(std::fs::read(&out).unwrap(), direct.stdout);
}

#[test]
fn parse_prints_canonical_form() {
    let path = temp_script(
        "canon.lsi",
        "set   s=ghz3_basis()  # c\ntask t=subset(s,k=2)\n",
    );
    let o = lsi(&["parse", &path]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "set s = ghz3_basis\ntask t = subset(s, k=2)\n");
}

#[test]
fn verify_paper_reports_every_criterion() {
    let o = lsi(&["verify-paper"]);
    let text = stdout(&o);
    let lines: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]"))
        .collect();
    assert_eq!(lines.len(), 12);
    let all_pass = lines.iter().all(|l| l.starts_with("[PASS]"));
    assert_eq!(o.status.code(), Some(if all_pass { 0 } else { 1 }));
}
