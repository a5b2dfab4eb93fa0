//! End-to-end checks of the library against known results.
//!
//! Each criterion is an independent function returning a [`CriterionResult`];
//! [`run_acceptance`] runs them all in order.

use std::collections::BTreeSet;
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::certificates::{
    certify_cut, certify_genuine, corollary_pairs, CertificateRequest, CutSelection, RouteChoice,
    Verdict,
};
use crate::families::{
    bell_basis, connecting_residual, connecting_unitary, ges_basis, ghz3_basis, ghz4_basis,
    unitarity_defect,
};
use crate::protocols::{
    builtin_bell32, builtin_bell32_variants, builtin_bell43, copy1_computational, order_blindness,
    perfect_identification, protocol_by_name, run_exact, tally_classifier, Protocol,
    SimulationReport, Transcript, BUILTIN_PROTOCOLS, PRUNE,
};
use crate::script::{execute, parse, serialize, ExecOptions};
use crate::statespace::{
    is_maximally_entangled, regroup_coefficients, Cut, Layout, StateVector, TOL,
};
use crate::subsets::{
    binomial, hypothesis_ensemble, hypothesis_overlap, stacked_state, StateSet, SubsetTask,
    DEFAULT_MAX_DIM,
};

/// Scenario reproducing the transcript table of the Bell-triple protocol.
pub const BELL_TRIPLE_SCRIPT: &str = include_str!("../../../scenarios/bell_triple_table.lsi");
/// Scenario certifying the three-qubit GHZ family across every cut.
pub const GHZ3_SCRIPT: &str = include_str!("../../../scenarios/ghz3_genuine.lsi");
/// Scenario certifying the four-qubit GHZ family across every cut.
pub const GHZ4_SCRIPT: &str = include_str!("../../../scenarios/ghz4_genuine.lsi");

/// Every bundled scenario, by file name.
pub const SCENARIOS: [(&str, &str); 6] = [
    ("bell_triple_table.lsi", BELL_TRIPLE_SCRIPT),
    (
        "bell_pairs.lsi",
        include_str!("../../../scenarios/bell_pairs.lsi"),
    ),
    (
        "bell_four_three.lsi",
        include_str!("../../../scenarios/bell_four_three.lsi"),
    ),
    (
        "ges_scan.lsi",
        include_str!("../../../scenarios/ges_scan.lsi"),
    ),
    ("ghz3_genuine.lsi", GHZ3_SCRIPT),
    ("ghz4_genuine.lsi", GHZ4_SCRIPT),
];

pub const FUZZ_CASES: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "[{status}] {:>2} {}: {}",
            self.id, self.name, self.detail
        )
    }
}

/// Collects sub-check outcomes; the criterion passes iff none failed.
struct Checks {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Self {
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn note(&mut self, what: impl Into<String>) {
        self.notes.push(what.into());
    }

    fn finish(self, id: u8, name: &'static str) -> CriterionResult {
        let passed = self.failures.is_empty();
        let detail = if passed {
            self.notes.join("; ")
        } else {
            self.failures.join("; ")
        };
        CriterionResult {
            id,
            name,
            passed,
            detail,
        }
    }

    fn error(id: u8, name: &'static str, e: impl fmt::Display) -> CriterionResult {
        CriterionResult {
            id,
            name,
            passed: false,
            detail: format!("error: {e}"),
        }
    }
}

fn bell_set(indices: &[usize]) -> StateSet {
    let all = bell_basis();
    let name = format!(
        "bell{}",
        indices.iter().map(|i| i.to_string()).collect::<String>()
    );
    StateSet::new(name, indices.iter().map(|&i| all[i - 1].clone()).collect())
        .expect("Bell states are orthonormal")
}

fn ab() -> Cut {
    Cut::new(["A"], ["B"]).expect("valid cut")
}

fn t(a: usize, b: usize) -> Transcript {
    Transcript::from_pairs(&[("A", a), ("B", b)])
}

/// Expected support of each Bell-triple hypothesis, keyed by 0-based subset.
pub fn bell_triple_columns() -> Vec<(Vec<usize>, Vec<Transcript>)> {
    vec![
        (vec![0, 1], vec![t(1, 2), t(2, 1), t(3, 4), t(4, 3)]),
        (vec![1, 2], vec![t(1, 4), t(2, 3), t(3, 2), t(4, 1)]),
        (vec![0, 2], vec![t(1, 3), t(2, 4), t(3, 1), t(4, 2)]),
    ]
}

fn bell_triple_report() -> Result<SimulationReport, String> {
    let task = SubsetTask::new(bell_set(&[1, 2, 3]), 2).map_err(|e| e.to_string())?;
    let hyps = hypothesis_ensemble(&task).map_err(|e| e.to_string())?;
    run_exact(&builtin_bell32().0, &hyps).map_err(|e| e.to_string())
}

pub fn criterion_1() -> CriterionResult {
    const NAME: &str = "bell-triple transcript table";
    let report = match bell_triple_report() {
        Ok(r) => r,
        Err(e) => return Checks::error(1, NAME, e),
    };
    let mut c = Checks::new();
    for (subset, column) in bell_triple_columns() {
        let Some(h) = report.hypotheses.iter().find(|h| h.subset == subset) else {
            c.check(false, format!("no hypothesis for {subset:?}"));
            continue;
        };
        let support: BTreeSet<&Transcript> = h.support().into_iter().collect();
        let expected: BTreeSet<&Transcript> = column.iter().collect();
        c.check(
            support == expected,
            format!("support of {subset:?} is {support:?}"),
        );
        for (tr, &p) in &h.distribution {
            if expected.contains(tr) {
                c.check(
                    (p - 0.25).abs() < TOL,
                    format!("P{tr} = {p} under {subset:?}"),
                );
            } else {
                c.check(p < PRUNE, format!("stray P{tr} = {p} under {subset:?}"));
            }
        }
    }
    c.note("3 columns x 4 transcripts at probability 1/4");
    c.finish(1, NAME)
}

pub fn criterion_2() -> CriterionResult {
    const NAME: &str = "bell-triple identification and order blindness";
    let mut c = Checks::new();
    let (p, classifier) = builtin_bell32();
    let task = SubsetTask::new(bell_set(&[1, 2, 3]), 2).expect("valid task");
    let result = bell_triple_report().and_then(|report| {
        let id = perfect_identification(&report, &classifier).map_err(|e| e.to_string())?;
        c.check(
            id.identified,
            format!("identification witness {:?}", id.witness),
        );
        for s in task.subsets() {
            let ob = order_blindness(&p, &task, &s).map_err(|e| e.to_string())?;
            c.check(ob.blind, format!("{s:?} reveals order (tv {})", ob.max_tv));
        }
        for triple in [[1, 2, 3], [1, 2, 4], [1, 3, 4], [2, 3, 4]] {
            let (vp, vc) = builtin_bell32_variants(triple).map_err(|e| e.to_string())?;
            let vt = SubsetTask::new(bell_set(&triple), 2).map_err(|e| e.to_string())?;
            let hyps = hypothesis_ensemble(&vt).map_err(|e| e.to_string())?;
            let report = run_exact(&vp, &hyps).map_err(|e| e.to_string())?;
            let id = perfect_identification(&report, &vc).map_err(|e| e.to_string())?;
            c.check(id.identified, format!("triple {triple:?} not identified"));
        }
        Ok(())
    });
    if let Err(e) = result {
        return Checks::error(2, NAME, e);
    }
    c.note("identified and order-blind on 3 subsets; all 4 triples identified");
    c.finish(2, NAME)
}

pub fn criterion_3() -> CriterionResult {
    const NAME: &str = "bell product regrouping";
    let mut c = Checks::new();
    let set = bell_set(&[1, 2, 3, 4]);
    let basis = bell_basis();
    let half = 0.5;
    let cases = [
        ([0usize, 1], [half, half, half, half]),
        ([1, 0], [half, half, -half, -half]),
    ];
    let support = [(0usize, 1usize), (1, 0), (2, 3), (3, 2)];
    let mut matrices = Vec::new();
    for (ordering, _) in &cases {
        let result = stacked_state(&set, ordering)
            .map_err(|e| e.to_string())
            .and_then(|s| {
                regroup_coefficients(&s, &ab(), &basis, &basis).map_err(|e| e.to_string())
            });
        match result {
            Ok(m) => matrices.push(m),
            Err(e) => return Checks::error(3, NAME, e),
        }
    }
    // B4 carries one free global phase; fix it from the first (3,4) entry and
    // require the same choice to explain every B4-bearing entry of both orderings.
    let b4_phase = if matrices[0][(2, 3)].re < 0.0 {
        -1.0
    } else {
        1.0
    };
    for ((ordering, signs), m) in cases.iter().zip(&matrices) {
        for a in 0..4 {
            for b in 0..4 {
                let phase = if a == 3 || b == 3 { b4_phase } else { 1.0 };
                let want = support
                    .iter()
                    .position(|&x| x == (a, b))
                    .map_or(0.0, |i| phase * signs[i]);
                let got = m[(a, b)];
                c.check(
                    (got.re - want).abs() < TOL && got.im.abs() < TOL,
                    format!(
                        "ordering {ordering:?}: c[{}][{}] = {got}, want {want}",
                        a + 1,
                        b + 1
                    ),
                );
            }
        }
    }
    c.note(format!(
        "support (1,2),(2,1),(3,4),(4,3) at +-1/2; sign pattern matches with B4 phase {b4_phase:+}"
    ));
    c.finish(3, NAME)
}

pub fn criterion_4() -> CriterionResult {
    const NAME: &str = "bell (4,2) certificate";
    let mut c = Checks::new();
    let set = bell_set(&[1, 2, 3, 4]);
    let result = (|| -> Result<(), String> {
        let task = SubsetTask::new(set.clone(), 2).map_err(|e| e.to_string())?;
        let hyps = hypothesis_ensemble(&task).map_err(|e| e.to_string())?;
        c.check(hyps.len() == 6, format!("{} hypotheses", hyps.len()));
        let dense = hyps
            .iter()
            .map(|h| h.density().map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        for i in 0..hyps.len() {
            for j in i + 1..hyps.len() {
                let via_components = hypothesis_overlap(&hyps[i], &hyps[j]);
                let via_matrices = (dense[i].matrix() * dense[j].matrix()).trace().norm();
                c.check(
                    via_components < TOL && via_matrices < TOL,
                    format!("tr(rho_{i} rho_{j}) = {via_matrices}"),
                );
            }
        }
        for h in &hyps {
            for s in h.components() {
                let mes = is_maximally_entangled(s, &ab()).map_err(|e| e.to_string())?;
                c.check(
                    mes,
                    format!("stacked state of {:?} not maximally entangled", h.subset()),
                );
            }
        }
        let cert = certify_cut(&CertificateRequest::new(set, 2, CutSelection::Single(ab())))
            .map_err(|e| e.to_string())?;
        c.check(
            cert.verdict == Verdict::Certified && cert.kappa == 6 && cert.bound == 4,
            format!(
                "certificate {} with kappa {} bound {}",
                cert.verdict, cert.kappa, cert.bound
            ),
        );
        Ok(())
    })();
    if let Err(e) = result {
        return Checks::error(4, NAME, e);
    }
    c.note("6 orthogonal hypotheses, all stacked states maximally entangled, kappa 6 > 4");
    c.finish(4, NAME)
}

pub fn criterion_5() -> CriterionResult {
    const NAME: &str = "maximally entangled basis scan";
    let mut c = Checks::new();
    let mut cases = Vec::new();
    for d in [2usize, 3] {
        let set = match ges_basis(d)
            .map_err(|e| e.to_string())
            .and_then(|b| StateSet::new(format!("ges{d}"), b).map_err(|e| e.to_string()))
        {
            Ok(s) => s,
            Err(e) => return Checks::error(5, NAME, e),
        };
        let n = d * d;
        for k in 2..n {
            let stacked = (n as u128).pow(k as u32);
            if stacked > DEFAULT_MAX_DIM as u128 {
                continue;
            }
            let kappa = binomial(n as u64, k as u64);
            let bound = (d as u128).pow(k as u32);
            let want = if kappa > bound {
                Verdict::Certified
            } else {
                Verdict::ConditionFails
            };
            match certify_cut(&CertificateRequest::new(
                set.clone(),
                k,
                CutSelection::Single(ab()),
            )) {
                Ok(cert) => {
                    c.check(
                        cert.verdict == want && cert.kappa == kappa && cert.bound == bound,
                        format!(
                            "d={d} k={k}: {} (kappa {} bound {})",
                            cert.verdict, cert.kappa, cert.bound
                        ),
                    );
                    cases.push(format!("d={d},k={k}:{}", cert.verdict));
                }
                Err(e) => c.check(false, format!("d={d} k={k}: {e}")),
            }
        }
    }
    c.note(cases.join(" "));
    c.finish(5, NAME)
}

pub fn criterion_6() -> CriterionResult {
    const NAME: &str = "pairs from a maximally entangled basis";
    let mut c = Checks::new();
    for d in [2usize, 3, 4] {
        match corollary_pairs(d) {
            Ok(cert) => c.check(
                cert.verdict == Verdict::Certified,
                format!("d={d}: {}", cert.verdict),
            ),
            Err(e) => c.check(false, format!("d={d}: {e}")),
        }
    }
    c.note("d = 2, 3, 4 certified");
    c.finish(6, NAME)
}

/// Cuts with the identity side on the left, for the connecting-unitary scans.
pub fn ghz_connecting_cuts() -> (Vec<Cut>, Vec<Cut>) {
    let cut = |l: &[&str], r: &[&str]| Cut::new(l.to_vec(), r.to_vec()).expect("valid cut");
    let three = vec![
        cut(&["A"], &["B", "C"]),
        cut(&["B"], &["A", "C"]),
        cut(&["C"], &["A", "B"]),
    ];
    let four = vec![
        cut(&["A"], &["B", "C", "D"]),
        cut(&["B"], &["A", "C", "D"]),
        cut(&["C"], &["A", "B", "D"]),
        cut(&["D"], &["A", "B", "C"]),
        cut(&["A", "B"], &["C", "D"]),
        cut(&["A", "D"], &["B", "C"]),
    ];
    (three, four)
}

pub fn criterion_7() -> CriterionResult {
    const NAME: &str = "ghz connecting unitaries";
    let mut c = Checks::new();
    let (three, four) = ghz_connecting_cuts();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (states, cuts) in [(ghz3_basis(), three), (ghz4_basis(), four)] {
        for cut in &cuts {
            for src in &states {
                for dst in &states {
                    count += 1;
                    match connecting_unitary(src, dst, cut) {
                        Ok(u) => {
                            let r = connecting_residual(src, dst, cut, &u).unwrap_or(f64::INFINITY);
                            worst = worst.max(r);
                            c.check(r < TOL, format!("cut {cut}: residual {r}"));
                            c.check(
                                unitarity_defect(&u) < 1e-12,
                                format!("cut {cut}: non-unitary result"),
                            );
                        }
                        Err(e) => c.check(false, format!("cut {cut}: {e}")),
                    }
                }
            }
        }
    }
    c.note(format!("{count} pairs, worst residual {worst:.2e}"));
    c.finish(7, NAME)
}

fn genuine_check(
    id: u8,
    name: &'static str,
    set: StateSet,
    kappa: u128,
    expected_bounds: &[u128],
) -> CriterionResult {
    let mut c = Checks::new();
    let g = match certify_genuine(&CertificateRequest::new(set, 2, CutSelection::AllCuts)) {
        Ok(g) => g,
        Err(e) => return Checks::error(id, name, e),
    };
    c.check(
        g.certificates.len() == expected_bounds.len(),
        format!("{} cuts", g.certificates.len()),
    );
    for (cert, &bound) in g.certificates.iter().zip(expected_bounds) {
        c.check(
            cert.verdict == Verdict::Certified && cert.kappa == kappa && cert.bound == bound,
            format!(
                "cut {}: {} (kappa {} bound {}, failed premises: {})",
                cert.cut,
                cert.verdict,
                cert.kappa,
                cert.bound,
                cert.premises
                    .iter()
                    .filter(|p| !p.passed)
                    .map(|p| format!("{} dev {:.3}", p.name, p.max_deviation))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        );
    }
    c.check(g.genuine, "genuine verdict withheld");
    c.note(format!(
        "{} cuts certified, genuine verdict granted",
        g.certificates.len()
    ));
    c.finish(id, name)
}

pub fn criterion_8() -> CriterionResult {
    let set = StateSet::new("ghz3", ghz3_basis()).expect("orthonormal");
    genuine_check(8, "ghz3 genuine certificate", set, 28, &[16, 16, 16])
}

pub fn criterion_9() -> CriterionResult {
    let set = StateSet::new("ghz4", ghz4_basis()).expect("orthonormal");
    genuine_check(
        9,
        "ghz4 genuine certificate",
        set,
        120,
        &[64, 64, 64, 64, 16, 16, 16],
    )
}

pub fn criterion_10() -> CriterionResult {
    const NAME: &str = "ghz-basis protocol on bell (4,3)";
    let mut c = Checks::new();
    let (p, classifier) = builtin_bell43();
    let result = (|| -> Result<(), String> {
        let task = SubsetTask::new(bell_set(&[1, 2, 3, 4]), 3).map_err(|e| e.to_string())?;
        let hyps = hypothesis_ensemble(&task).map_err(|e| e.to_string())?;
        let report = run_exact(&p, &hyps).map_err(|e| e.to_string())?;
        let id = perfect_identification(&report, &classifier).map_err(|e| e.to_string())?;
        if let Some(w) = &id.witness {
            c.check(
                false,
                format!(
                    "not identified: transcript {} under subset {:?} is assigned {:?}",
                    w.transcript,
                    w.hypothesis.iter().map(|i| i + 1).collect::<Vec<_>>(),
                    w.assigned.iter().map(|i| i + 1).collect::<Vec<_>>()
                ),
            );
        }
        for s in task.subsets() {
            let ob = order_blindness(&p, &task, &s).map_err(|e| e.to_string())?;
            c.check(
                ob.blind,
                format!(
                    "subset {:?} reveals order (tv {:.3})",
                    s.iter().map(|i| i + 1).collect::<Vec<_>>(),
                    ob.max_tv
                ),
            );
        }
        Ok(())
    })();
    if let Err(e) = result {
        return Checks::error(10, NAME, e);
    }
    c.note("identified and order-blind on all 4 subsets");
    c.finish(10, NAME)
}

fn identifies(p: &Protocol, task: &SubsetTask) -> Option<SimulationReport> {
    let hyps = hypothesis_ensemble(task).ok()?;
    let report = run_exact(p, &hyps).ok()?;
    let classifier = tally_classifier(&report).ok()?;
    perfect_identification(&report, &classifier)
        .ok()
        .filter(|id| id.identified)
        .map(|_| report)
}

/// Bell tasks with `1 < k < n` over every Bell index set of size 3 or 4.
fn bell_tasks() -> Vec<SubsetTask> {
    let mut out = Vec::new();
    for indices in [
        vec![1, 2, 3],
        vec![1, 2, 4],
        vec![1, 3, 4],
        vec![2, 3, 4],
        vec![1, 2, 3, 4],
    ] {
        for k in 2..indices.len() {
            out.push(SubsetTask::new(bell_set(&indices), k).expect("valid task"));
        }
    }
    out
}

pub fn criterion_11() -> CriterionResult {
    const NAME: &str = "protocol/certificate consistency";
    let mut c = Checks::new();
    let mut passing = 0;
    for task in bell_tasks() {
        for name in BUILTIN_PROTOCOLS {
            let p = protocol_by_name(name).expect("builtin");
            if identifies(&p, &task).is_none() {
                continue;
            }
            passing += 1;
            match certify_cut(&CertificateRequest::new(
                task.set().clone(),
                task.k(),
                CutSelection::Single(ab()),
            )) {
                Ok(cert) => c.check(
                    cert.verdict != Verdict::Certified,
                    format!(
                        "{name} identifies {} k={} yet it is certified",
                        task.set().name(),
                        task.k()
                    ),
                ),
                Err(e) => c.check(false, e.to_string()),
            }
        }
    }
    c.check(passing > 0, "no builtin protocol identified any task");

    let mut states = bell_basis();
    states[3] = StateVector::basis(Layout::qubits(&["A", "B"]), &[0, 0]).expect("basis ket");
    let faulty = StateSet::unvalidated("bell-with-product", states).expect("same layout");
    for route in [RouteChoice::Direct, RouteChoice::Factorized] {
        let req = CertificateRequest::new(faulty.clone(), 2, CutSelection::Single(ab()))
            .with_route(route);
        match certify_cut(&req) {
            Ok(cert) => c.check(
                cert.verdict == Verdict::PremiseFails,
                format!("product substitution gave {} ({route:?})", cert.verdict),
            ),
            Err(e) => c.check(false, e.to_string()),
        }
    }
    c.note(format!(
        "{passing} identifying (protocol, task) pairs, none certified; product substitution gives PremiseFails"
    ));
    c.finish(11, NAME)
}

const FUZZ_WORDS: [&str; 36] = [
    "set",
    "task",
    "simulate",
    "certify",
    "subset",
    "protocol",
    "cut",
    "auto",
    "all",
    "k",
    "bell_basis",
    "ges_basis",
    "ghz3_basis",
    "ghz4_basis",
    "states",
    "bell32",
    "bell43",
    "copy1_computational",
    "s",
    "t",
    "A",
    "B",
    "C",
    "B1",
    "G4_3",
    "W3_1_2",
    "K01",
    "=",
    "(",
    ")",
    "[",
    "]",
    ",",
    ":",
    "2",
    "#",
];

/// Random token soup, occasionally with arbitrary characters mixed in.
pub fn random_input(rng: &mut StdRng) -> String {
    let len = rng.random_range(0..24);
    let mut out = String::new();
    for _ in 0..len {
        match rng.random_range(0..10) {
            0 => out.push(char::from_u32(rng.random_range(0..0x3000)).unwrap_or('?')),
            1 => out.push_str(&rng.random::<u64>().to_string()),
            2 => out.push('\n'),
            _ => out.push_str(FUZZ_WORDS[rng.random_range(0..FUZZ_WORDS.len())]),
        }
        if rng.random_bool(0.7) {
            out.push(' ');
        }
    }
    out
}

/// A random script that parses, with irregular spacing and comments.
pub fn random_valid_script(rng: &mut StdRng) -> String {
    let ws = |rng: &mut StdRng| -> &'static str {
        [" ", "  ", "\t", " \n ", " # note\n"][rng.random_range(0..5)]
    };
    let mut out = String::new();
    let mut tasks: Vec<String> = Vec::new();
    let n_sets = rng.random_range(0..3);
    for i in 0..n_sets {
        let family = match rng.random_range(0..5) {
            0 => "bell_basis(2)".to_string(),
            1 => format!("ges_basis({})", rng.random_range(2..5)),
            2 => "ghz3_basis".to_string(),
            3 => "ghz4_basis()".to_string(),
            _ => {
                let names = ["B1", "B2", "B3", "B4", "K01", "W2_1_1"];
                let count = rng.random_range(1..4);
                let picked: Vec<&str> = (0..count)
                    .map(|_| names[rng.random_range(0..names.len())])
                    .collect();
                format!("states[{}]", picked.join(","))
            }
        };
        out += &format!("set{}s{i}{}={}{family}\n", ws(rng), ws(rng), ws(rng));
        let name = format!("t{i}");
        out += &format!(
            "task {name} ={}subset( s{i} ,k={} )\n",
            ws(rng),
            rng.random_range(0..6)
        );
        tasks.push(name);
    }
    for _ in 0..rng.random_range(0..4) {
        let Some(task) = tasks.get(rng.random_range(0..tasks.len().max(1))) else {
            break;
        };
        if rng.random_bool(0.5) {
            let p = BUILTIN_PROTOCOLS[rng.random_range(0..BUILTIN_PROTOCOLS.len())];
            out += &format!("simulate{}{task} protocol {p}\n", ws(rng));
        } else {
            let cut = ["auto", "all", "A:B", "A,B:C", "A : B , C"][rng.random_range(0..5)];
            out += &format!("certify {task}{}cut {cut}\n", ws(rng));
        }
    }
    out
}

/// Runs `text` under a rayon pool of `threads` workers and returns the JSON report.
pub fn report_with_threads(text: &str, threads: usize) -> Result<String, String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| e.to_string())?;
    pool.install(|| {
        let script = parse(text).map_err(|e| e.to_string())?;
        execute(&script, &ExecOptions::default())
            .map(|r| r.to_json())
            .map_err(|e| e.to_string())
    })
}

pub fn criterion_12() -> CriterionResult {
    const NAME: &str = "infrastructure properties";
    let mut c = Checks::new();

    // probability conservation on every builtin run that applies
    let mut runs = 0;
    let mut worst: f64 = 0.0;
    let protocols = [
        builtin_bell32().0,
        builtin_bell43().0,
        copy1_computational("A"),
        copy1_computational("B"),
    ];
    for task in bell_tasks() {
        let Ok(hyps) = hypothesis_ensemble(&task) else {
            continue;
        };
        for p in &protocols {
            if let Ok(report) = run_exact(p, &hyps) {
                runs += 1;
                for h in &report.hypotheses {
                    worst = worst.max((h.total() - 1.0).abs());
                }
            }
        }
    }
    c.check(
        runs > 0 && worst < TOL,
        format!("probability drift {worst}"),
    );

    // parser totality
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut crashes = 0;
    for _ in 0..FUZZ_CASES {
        let input = random_input(&mut rng);
        if catch_unwind(AssertUnwindSafe(|| parse(&input).map(|_| ()))).is_err() {
            crashes += 1;
        }
    }
    c.check(crashes == 0, format!("{crashes} parser crashes"));

    // byte determinism across runs and thread counts
    for (name, text) in [("bell triple", BELL_TRIPLE_SCRIPT), ("ghz3", GHZ3_SCRIPT)] {
        let outputs: Vec<Result<String, String>> = [1, 1, 4, 4]
            .iter()
            .map(|&n| report_with_threads(text, n))
            .collect();
        let first = &outputs[0];
        c.check(
            first.is_ok() && outputs.iter().all(|o| o == first),
            format!("{name} report differs across runs or thread counts"),
        );
    }

    // round-trip law on scenarios and generated scripts
    let mut trips = 0;
    let mut texts: Vec<String> = SCENARIOS.iter().map(|(_, s)| s.to_string()).collect();
    texts.extend((0..500).map(|_| random_valid_script(&mut rng)));
    for text in &texts {
        match parse(text) {
            Ok(once) => {
                trips += 1;
                let twice = parse(&serialize(&once));
                c.check(
                    twice.as_ref() == Ok(&once),
                    format!("round trip changed {text:?}"),
                );
            }
            Err(e) => c.check(false, format!("generated script failed to parse: {e}")),
        }
    }
    c.note(format!(
        "{runs} runs conserve probability (drift {worst:.1e}); {FUZZ_CASES} fuzz inputs, 0 crashes; reports identical over 2 runs x threads {{1,4}}; {trips} round trips"
    ));
    c.finish(12, NAME)
}

/// Every criterion, in order.
pub fn run_acceptance() -> Vec<CriterionResult> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
        criterion_11(),
        criterion_12(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_scripts_parse() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..200 {
            let s = random_valid_script(&mut rng);
            assert!(parse(&s).is_ok(), "{s}");
        }
    }

    #[test]
    fn display_line() {
        let r = CriterionResult {
            id: 3,
            name: "x",
            passed: true,
            detail: "ok".into(),
        };
        assert_eq!(r.to_string(), "[PASS]  3 x: ok");
    }
}
