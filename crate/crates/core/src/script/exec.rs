//! Evaluation of parsed scripts into report documents.

use std::collections::HashMap;

use thiserror::Error;

use super::parser::{CutSpec, Family, Script, Span, StateName, Statement, StmtKind, MAX_WEYL_DIM};
use super::report::Value;
use crate::certificates::{
    certify_cut, certify_genuine, Certificate, CertificateError, CertificateRequest, CutSelection,
};
use crate::families::{
    bell, bell_basis, ges_basis, ges_state, ghz3, ghz3_basis, ghz4, ghz4_basis, BellIndex,
    GhzLabel, WeylLabel,
};
use crate::protocols::{
    order_blindness_within, protocol_by_name, run_exact, tally_classifier, ProtocolError,
    SimulationReport, PRUNE,
};
use crate::statespace::{Cut, Layout, StateVector, TOL};
use crate::subsets::{
    binomial, hypothesis_ensemble, StateSet, SubsetError, SubsetTask, DEFAULT_MAX_DIM,
};

/// Cap on the total number of amplitudes held while simulating a task.
pub const MAX_SIMULATION_AMPLITUDES: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RunFilter {
    #[default]
    All,
    Simulate,
    Certify,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExecOptions {
    pub tolerance: f64,
    pub max_dim: usize,
    pub filter: RunFilter,
}

impl Default for ExecOptions {
    fn default() -> Self {
        Self {
            tolerance: TOL,
            max_dim: DEFAULT_MAX_DIM,
            filter: RunFilter::All,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecErrorKind {
    /// A resource guard refused the work.
    Resource,
    /// The statement is well formed but cannot be evaluated.
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{span}: {message} (in `{statement}`)")]
pub struct ExecError {
    pub kind: ExecErrorKind,
    pub span: Span,
    pub statement: String,
    pub message: String,
}

/// Result of executing a script.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub root: Value,
}

impl Report {
    pub fn runs(&self) -> &[Value] {
        self.root
            .get("runs")
            .and_then(Value::as_list)
            .unwrap_or(&[])
    }

    pub fn to_json(&self) -> String {
        super::report::to_json(&self.root)
    }

    pub fn to_text(&self) -> String {
        super::report::to_text(&self.root)
    }
}

struct SetEntry {
    set: StateSet,
    family: Family,
}

struct TaskEntry {
    name: String,
    set: String,
    task: SubsetTask,
}

struct Exec<'a> {
    opts: &'a ExecOptions,
    sets: HashMap<String, SetEntry>,
    tasks: HashMap<String, TaskEntry>,
}

fn one_based(v: &[usize]) -> Value {
    Value::from(v.iter().map(|i| i + 1).collect::<Vec<_>>())
}

fn invalid(msg: impl ToString) -> (ExecErrorKind, String) {
    (ExecErrorKind::Invalid, msg.to_string())
}

fn from_subset(e: SubsetError) -> (ExecErrorKind, String) {
    match e {
        SubsetError::Resource { .. } => (ExecErrorKind::Resource, e.to_string()),
        _ => invalid(e),
    }
}

fn from_protocol(e: ProtocolError) -> (ExecErrorKind, String) {
    match e {
        ProtocolError::Subset(s) => from_subset(s),
        _ => invalid(e),
    }
}

fn from_certificate(e: CertificateError) -> (ExecErrorKind, String) {
    match e {
        CertificateError::Resource { .. } => (ExecErrorKind::Resource, e.to_string()),
        CertificateError::Subset(s) => from_subset(s),
        _ => invalid(e),
    }
}

fn build_state(name: &str) -> Result<StateVector, (ExecErrorKind, String)> {
    let parsed =
        StateName::parse(name).ok_or_else(|| invalid(format!("unknown state '{name}'")))?;
    Ok(match parsed {
        StateName::Bell(i) => bell(BellIndex::new(i).map_err(invalid)?),
        StateName::Ghz3(a) => ghz3(GhzLabel::three(a).map_err(invalid)?).map_err(invalid)?,
        StateName::Ghz4(a) => ghz4(GhzLabel::four(a).map_err(invalid)?).map_err(invalid)?,
        StateName::Weyl { d, a, b } => ges_state(WeylLabel::new(a, b, d).map_err(invalid)?),
        StateName::Ket { bits, len } => {
            let labels: Vec<String> = (0..len)
                .map(|i| char::from(b'A' + i as u8).to_string())
                .collect();
            let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
            let digits: Vec<usize> = (0..len)
                .map(|i| usize::from((bits >> (len - 1 - i)) & 1))
                .collect();
            StateVector::basis(Layout::qubits(&refs), &digits).map_err(invalid)?
        }
    })
}

fn build_set(name: &str, family: &Family) -> Result<StateSet, (ExecErrorKind, String)> {
    let states = match family {
        Family::BellBasis(2) => bell_basis(),
        Family::BellBasis(d) => {
            return Err(invalid(format!(
                "bell_basis is defined for local dimension 2 only, got {d}; use ges_basis({d})"
            )))
        }
        Family::GesBasis(d) => {
            let d = *d as usize;
            if d > MAX_WEYL_DIM {
                return Err((
                    ExecErrorKind::Resource,
                    format!("ges_basis({d}) exceeds the dimension limit {MAX_WEYL_DIM}"),
                ));
            }
            ges_basis(d).map_err(invalid)?
        }
        Family::Ghz3Basis => ghz3_basis(),
        Family::Ghz4Basis => ghz4_basis(),
        Family::States(names) => names
            .iter()
            .map(|n| build_state(n))
            .collect::<Result<Vec<_>, _>>()?,
    };
    StateSet::new(name, states).map_err(invalid)
}

fn certificate_value(c: &Certificate) -> Value {
    let premises = c
        .premises
        .iter()
        .map(|p| {
            Value::map([
                ("name", Value::from(p.name)),
                ("passed", Value::from(p.passed)),
                ("max_deviation", Value::from(p.max_deviation)),
            ])
        })
        .collect();
    Value::map([
        ("cut", Value::from(c.cut.to_string())),
        ("kappa", Value::from(c.kappa)),
        ("bound", Value::from(c.bound)),
        ("unitary_side", Value::from(c.unitary_side.to_string())),
        ("axiom", Value::from(c.axiom.tag())),
        ("verdict", Value::from(c.verdict.to_string())),
        ("route", Value::from(c.route.to_string())),
        ("premises", Value::List(premises)),
    ])
}

fn distribution_values(report: &SimulationReport) -> Vec<Value> {
    report
        .hypotheses
        .iter()
        .map(|h| {
            let transcripts = h
                .distribution
                .iter()
                .filter(|(_, &p)| p > PRUNE)
                .map(|(t, &p)| {
                    Value::map([
                        ("transcript", Value::from(t.to_string())),
                        ("probability", Value::from(p)),
                    ])
                })
                .collect();
            Value::map([
                ("subset", one_based(&h.subset)),
                ("total_probability", Value::from(h.total())),
                ("transcripts", Value::List(transcripts)),
            ])
        })
        .collect()
}

impl Exec<'_> {
    fn task_echo(&self, entry: &TaskEntry) -> Value {
        let set = &self.sets[&entry.set];
        let d = set.set.len();
        Value::map([
            ("name", Value::from(entry.name.as_str())),
            (
                "set",
                Value::map([
                    ("name", Value::from(entry.set.as_str())),
                    ("family", Value::from(set.family.to_string())),
                    ("size", Value::from(d)),
                    ("parties", Value::from(set.set.parties())),
                ]),
            ),
            ("k", Value::from(entry.task.k())),
            (
                "subsets",
                Value::from(binomial(d as u64, entry.task.k() as u64)),
            ),
            ("stacked_dim", Value::from(entry.task.stacked_dim())),
        ])
    }

    fn statement(&mut self, stmt: &Statement) -> Result<Option<Value>, (ExecErrorKind, String)> {
        match &stmt.kind {
            StmtKind::Set { name, family } => {
                let set = build_set(name, family)?;
                self.sets.insert(
                    name.clone(),
                    SetEntry {
                        set,
                        family: family.clone(),
                    },
                );
                Ok(None)
            }
            StmtKind::Task { name, set, k } => {
                let entry = self
                    .sets
                    .get(set)
                    .ok_or_else(|| invalid(format!("undeclared set '{set}'")))?;
                let k = usize::try_from(*k).map_err(invalid)?;
                let task = SubsetTask::new(entry.set.clone(), k)
                    .map_err(from_subset)?
                    .with_max_dim(self.opts.max_dim);
                self.tasks.insert(
                    name.clone(),
                    TaskEntry {
                        name: name.clone(),
                        set: set.clone(),
                        task,
                    },
                );
                Ok(None)
            }
            StmtKind::Simulate { task, protocol } => {
                if self.opts.filter == RunFilter::Certify {
                    return Ok(None);
                }
                self.simulate(stmt, task, protocol).map(Some)
            }
            StmtKind::Certify { task, cut } => {
                if self.opts.filter == RunFilter::Simulate {
                    return Ok(None);
                }
                self.certify(stmt, task, cut).map(Some)
            }
        }
    }

    fn task(&self, name: &str) -> Result<&TaskEntry, (ExecErrorKind, String)> {
        self.tasks
            .get(name)
            .ok_or_else(|| invalid(format!("undeclared task '{name}'")))
    }

    fn simulate(
        &self,
        stmt: &Statement,
        task_name: &str,
        protocol: &str,
    ) -> Result<Value, (ExecErrorKind, String)> {
        let entry = self.task(task_name)?;
        let task = &entry.task;
        task.check_resources().map_err(from_subset)?;
        let n = task.set().len() as u64;
        let orderings: u128 = (1..=task.k() as u128).product();
        let amplitudes = binomial(n, task.k() as u64)
            .saturating_mul(orderings)
            .saturating_mul(task.stacked_dim() as u128);
        if amplitudes > MAX_SIMULATION_AMPLITUDES as u128 {
            return Err((
                ExecErrorKind::Resource,
                format!(
                    "simulation needs {amplitudes} amplitudes, above the limit {MAX_SIMULATION_AMPLITUDES}"
                ),
            ));
        }
        let p = protocol_by_name(protocol)
            .ok_or_else(|| invalid(format!("unknown protocol '{protocol}'")))?;
        let hyps = hypothesis_ensemble(task).map_err(from_subset)?;
        let report = run_exact(&p, &hyps).map_err(from_protocol)?;

        let (classifier, identified, witness) = match tally_classifier(&report) {
            Ok(c) => {
                let table = c
                    .table()
                    .iter()
                    .map(|(t, s)| {
                        Value::map([
                            ("transcript", Value::from(t.to_string())),
                            ("subset", one_based(s)),
                        ])
                    })
                    .collect();
                (Value::List(table), true, Value::Null)
            }
            Err(ProtocolError::Ambiguous {
                transcript,
                first,
                second,
            }) => (
                Value::Null,
                false,
                Value::map([
                    ("transcript", Value::from(transcript.to_string())),
                    (
                        "subsets",
                        Value::List(vec![one_based(&first), one_based(&second)]),
                    ),
                ]),
            ),
            Err(e) => return Err(from_protocol(e)),
        };

        let mut blind_all = true;
        let mut blindness = Vec::new();
        for h in &hyps {
            let ob = order_blindness_within(&p, task, h.subset(), self.opts.tolerance)
                .map_err(from_protocol)?;
            blind_all &= ob.blind;
            let witness = ob.witness.map_or(Value::Null, |(a, b)| {
                Value::List(vec![one_based(&a), one_based(&b)])
            });
            blindness.push(Value::map([
                ("subset", one_based(h.subset())),
                ("blind", Value::from(ob.blind)),
                ("max_tv", Value::from(ob.max_tv)),
                ("witness", witness),
            ]));
        }

        Ok(Value::map([
            ("kind", Value::from("simulate")),
            ("line", Value::from(stmt.span.line)),
            ("task", self.task_echo(entry)),
            ("protocol", Value::from(protocol)),
            ("hypothesis_count", Value::from(report.hypotheses.len())),
            ("hypotheses", Value::List(distribution_values(&report))),
            ("classifier", classifier),
            ("perfect_identification", Value::from(identified)),
            ("witness", witness),
            ("order_blind", Value::from(blind_all)),
            ("order_blindness", Value::List(blindness)),
        ]))
    }

    fn certify(
        &self,
        stmt: &Statement,
        task_name: &str,
        spec: &CutSpec,
    ) -> Result<Value, (ExecErrorKind, String)> {
        let entry = self.task(task_name)?;
        let set = entry.task.set().clone();
        let parties = set.parties();
        let selection = match spec {
            CutSpec::Auto if parties.len() == 2 => {
                CutSelection::Single(Cut::new([&parties[0]], [&parties[1]]).map_err(invalid)?)
            }
            CutSpec::Auto => {
                return Err(invalid(format!(
                    "'cut auto' needs a two-party set, '{}' has {} parties",
                    entry.set,
                    parties.len()
                )))
            }
            CutSpec::All => CutSelection::AllCuts,
            CutSpec::Parties { left, right } => {
                let cut = Cut::new(left.clone(), right.clone()).map_err(invalid)?;
                cut.validate(set.layout()).map_err(invalid)?;
                CutSelection::Single(cut)
            }
        };
        let req = CertificateRequest::new(set, entry.task.k(), selection.clone())
            .with_tolerance(self.opts.tolerance)
            .with_max_dim(self.opts.max_dim);
        let mut fields = vec![
            ("kind", Value::from("certify")),
            ("line", Value::from(stmt.span.line)),
            ("task", self.task_echo(entry)),
            ("cut", Value::from(spec.to_string())),
        ];
        match selection {
            CutSelection::Single(_) => {
                let c = certify_cut(&req).map_err(from_certificate)?;
                fields.push(("certificates", Value::List(vec![certificate_value(&c)])));
            }
            CutSelection::AllCuts => {
                let g = certify_genuine(&req).map_err(from_certificate)?;
                fields.push((
                    "certificates",
                    Value::List(g.certificates.iter().map(certificate_value).collect()),
                ));
                fields.push(("genuine", Value::from(g.genuine)));
            }
        }
        Ok(Value::map(fields))
    }
}

/// Runs every statement in order and collects one report entry per run.
pub fn execute(script: &Script, opts: &ExecOptions) -> Result<Report, ExecError> {
    let mut exec = Exec {
        opts,
        sets: HashMap::new(),
        tasks: HashMap::new(),
    };
    let mut runs = Vec::new();
    for stmt in &script.statements {
        match exec.statement(stmt) {
            Ok(Some(v)) => runs.push(v),
            Ok(None) => {}
            Err((kind, message)) => {
                return Err(ExecError {
                    kind,
                    span: stmt.span,
                    statement: stmt.kind.to_string(),
                    message,
                })
            }
        }
    }
    Ok(Report {
        root: Value::map([("runs", Value::List(runs))]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::script::parse;

    fn run(text: &str) -> Result<Report, ExecError> {
        execute(&parse(text).unwrap(), &ExecOptions::default())
    }

    #[test]
    fn empty_script_gives_empty_report() {
        let r = run("").unwrap();
        assert_eq!(r.to_json(), "{\n  \"runs\": []\n}\n");
    }

    #[test]
    fn bell_certify_auto() {
        let r = run("set s = bell_basis(2)\ntask t = subset(s, k=2)\ncertify t cut auto").unwrap();
        let c = &r.runs()[0].get("certificates").unwrap().as_list().unwrap()[0];
        assert_eq!(c.get("verdict").unwrap().as_str(), Some("Certified"));
        assert_eq!(c.get("kappa").unwrap().as_int(), Some(6));
        assert_eq!(c.get("bound").unwrap().as_int(), Some(4));
    }

    #[test]
    fn cut_auto_requires_two_parties() {
        let e = run("set s = ghz3_basis\ntask t = subset(s, k=2)\ncertify t cut auto").unwrap_err();
        assert_eq!(e.kind, ExecErrorKind::Invalid);
        assert_eq!(e.span.line, 3);
    }

    #[test]
    fn bad_bell_dimension() {
        let e = run("set s = bell_basis(3)").unwrap_err();
        assert_eq!(e.kind, ExecErrorKind::Invalid);
        assert_eq!(e.statement, "set s = bell_basis(3)");
    }

    #[test]
    fn resource_guard_surfaces_statement() {
        let script =
            parse("set s = ges_basis(3)\ntask t = subset(s, k=5)\ncertify t cut auto").unwrap();
        let opts = ExecOptions {
            max_dim: 1000,
            ..ExecOptions::default()
        };
        let e = execute(&script, &opts).unwrap_err();
        assert_eq!(e.kind, ExecErrorKind::Resource);
        assert_eq!(e.span.line, 3);
    }

    #[test]
    fn k_out_of_range() {
        let e = run("set s = bell_basis(2)\ntask t = subset(s, k=4)").unwrap_err();
        assert_eq!(e.kind, ExecErrorKind::Invalid);
    }

    #[test]
    fn custom_states() {
        let r = run("set s = states[B1, B2, K01, K10]\ntask t = subset(s, k=2)\ncertify t cut A:B")
            .unwrap();
        let c = &r.runs()[0].get("certificates").unwrap().as_list().unwrap()[0];
        assert_eq!(c.get("verdict").unwrap().as_str(), Some("PremiseFails"));
        let e = run("set s = states[B1, K00]").unwrap_err();
        assert!(e.message.contains("orthonormal"), "{}", e.message);
    }

    #[test]
    fn simulate_bell_triple() {
        let r =
            run("set s = states[B1, B2, B3]\ntask t = subset(s, k=2)\nsimulate t protocol bell32")
                .unwrap();
        let run = &r.runs()[0];
        assert_eq!(
            run.get("perfect_identification").unwrap().as_bool(),
            Some(true)
        );
        assert_eq!(run.get("order_blind").unwrap().as_bool(), Some(true));
        assert_eq!(run.get("classifier").unwrap().as_list().unwrap().len(), 12);
    }

    #[test]
    fn filter_skips_runs() {
        let script = parse(
            "set s = states[B1, B2, B3]\ntask t = subset(s, k=2)\nsimulate t protocol bell32\ncertify t cut auto",
        )
        .unwrap();
        for (filter, kind) in [
            (RunFilter::Simulate, "simulate"),
            (RunFilter::Certify, "certify"),
        ] {
            let opts = ExecOptions {
                filter,
                ..ExecOptions::default()
            };
            let r = execute(&script, &opts).unwrap();
            assert_eq!(r.runs().len(), 1);
            assert_eq!(r.runs()[0].get("kind").unwrap().as_str(), Some(kind));
        }
    }

    #[test]
    fn protocol_layout_error_is_invalid() {
        let e = run("set s = ges_basis(3)\ntask t = subset(s, k=2)\nsimulate t protocol bell32")
            .unwrap_err();
        assert_eq!(e.kind, ExecErrorKind::Invalid);
    }
}
