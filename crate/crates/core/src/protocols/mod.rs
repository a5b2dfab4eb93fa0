//! Exact simulation of finite LOCC protocols.
//!
//! A [`Protocol`] is a fixed sequence of rounds. In each round one party
//! performs a projective [`Measurement`] on factors it holds; the measurement
//! may depend on the outcomes broadcast so far. [`run_exact`] walks the full
//! outcome tree for every hypothesis and records the probability of each
//! [`Transcript`].

mod builtin;

pub use builtin::{
    bell32_classifier, bell43_classifier, bell_task, builtin_bell32, builtin_bell32_variants,
    builtin_bell43, copy1_computational, protocol_by_name, BUILTIN_PROTOCOLS,
};

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use thiserror::Error;

use crate::statespace::{apply_local, max_abs, DensityOperator, Layout, StateVector, TOL};
use crate::subsets::{orderings, stacked_state, MixedHypothesis, SubsetError, SubsetTask};

/// Branches below this probability are treated as impossible.
pub const PRUNE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("invalid protocol: {0}")]
    Invalid(Violation),
    #[error("round {step}: party {party} measures factor {factor}, which it does not hold")]
    LocalityViolation {
        step: usize,
        party: String,
        factor: FactorRef,
    },
    #[error("round {step}: factor {factor} is not part of the layout")]
    UnknownFactor { step: usize, factor: FactorRef },
    #[error("round {step}: projectors have dimension {got}, targets span {expected}")]
    DimensionMismatch {
        step: usize,
        expected: usize,
        got: usize,
    },
    #[error("no hypotheses to simulate")]
    NoHypotheses,
    #[error("hypotheses do not share a layout")]
    LayoutMismatch,
    #[error("classifier has no entry for reached transcript {0}")]
    Coverage(Transcript),
    #[error("transcript {transcript} occurs under subsets {first:?} and {second:?}")]
    Ambiguous {
        transcript: Transcript,
        first: Vec<usize>,
        second: Vec<usize>,
    },
    #[error("{0}")]
    Builtin(String),
    #[error(transparent)]
    Subset(#[from] SubsetError),
}

/// A tensor factor named by party and copy.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FactorRef {
    pub party: String,
    pub copy: usize,
}

impl FactorRef {
    pub fn new(party: impl Into<String>, copy: usize) -> Self {
        Self {
            party: party.into(),
            copy,
        }
    }
}

impl fmt::Display for FactorRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.party, self.copy)
    }
}

/// Projective measurement by one party on some of its factors.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    party: String,
    targets: Vec<FactorRef>,
    projectors: Vec<DMatrix<C64>>,
    labels: Vec<usize>,
}

impl Measurement {
    /// Unchecked; see [`validate`].
    pub fn new(
        party: impl Into<String>,
        targets: Vec<FactorRef>,
        projectors: Vec<DMatrix<C64>>,
        labels: Vec<usize>,
    ) -> Self {
        Self {
            party: party.into(),
            targets,
            projectors,
            labels,
        }
    }

    /// Rank-one projectors onto `basis`, labelled `1..=n`.
    pub fn from_basis(
        party: impl Into<String>,
        targets: Vec<FactorRef>,
        basis: &[StateVector],
    ) -> Self {
        let projectors = basis.iter().map(StateVector::projector).collect();
        let labels = (1..=basis.len()).collect();
        Self::new(party, targets, projectors, labels)
    }

    /// Computational-basis measurement of one qudit, labelled `0..d`.
    pub fn computational(party: impl Into<String>, target: FactorRef, dim: usize) -> Self {
        let projectors = (0..dim)
            .map(|i| {
                let mut p = DMatrix::zeros(dim, dim);
                p[(i, i)] = C64::new(1.0, 0.0);
                p
            })
            .collect();
        Self::new(party, vec![target], projectors, (0..dim).collect())
    }

    pub fn party(&self) -> &str {
        &self.party
    }

    pub fn targets(&self) -> &[FactorRef] {
        &self.targets
    }

    pub fn projectors(&self) -> &[DMatrix<C64>] {
        &self.projectors
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

/// One round: a default measurement plus variants keyed by the labels seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    measurement: Measurement,
    variants: Vec<(Vec<usize>, Measurement)>,
}

impl Step {
    pub fn new(measurement: Measurement) -> Self {
        Self {
            measurement,
            variants: Vec::new(),
        }
    }

    /// Use `m` instead of the default when the earlier outcome labels equal `prefix`.
    pub fn conditioned(mut self, prefix: Vec<usize>, m: Measurement) -> Self {
        self.variants.push((prefix, m));
        self
    }

    fn measurements(&self) -> impl Iterator<Item = &Measurement> {
        std::iter::once(&self.measurement).chain(self.variants.iter().map(|(_, m)| m))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    name: String,
    steps: Vec<Step>,
}

impl Protocol {
    pub fn new(name: impl Into<String>, steps: Vec<Step>) -> Self {
        Self {
            name: name.into(),
            steps,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    Empty,
    LabelCount { labels: usize, projectors: usize },
    DuplicateLabel(usize),
    Shape { index: usize },
    NotProjector { index: usize },
    NotOrthogonal { first: usize, second: usize },
    Incomplete,
}

/// The first broken measurement invariant and where it sits.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub step: usize,
    /// `None` for the default measurement, `Some(i)` for the i-th conditioned variant.
    pub variant: Option<usize>,
    pub kind: ViolationKind,
    pub deviation: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "round {}", self.step)?;
        if let Some(v) = self.variant {
            write!(f, " variant {v}")?;
        }
        match &self.kind {
            ViolationKind::Empty => write!(f, ": measurement has no outcomes"),
            ViolationKind::LabelCount { labels, projectors } => {
                write!(f, ": {labels} labels for {projectors} projectors")
            }
            ViolationKind::DuplicateLabel(l) => write!(f, ": label {l} used twice"),
            ViolationKind::Shape { index } => {
                write!(f, ": projector {index} has the wrong shape")
            }
            ViolationKind::NotProjector { index } => write!(
                f,
                ": operator {index} is not an orthogonal projector (deviation {:.3e})",
                self.deviation
            ),
            ViolationKind::NotOrthogonal { first, second } => write!(
                f,
                ": projectors {first} and {second} are not orthogonal (deviation {:.3e})",
                self.deviation
            ),
            ViolationKind::Incomplete => write!(
                f,
                ": projectors do not sum to the identity (deviation {:.3e})",
                self.deviation
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

fn check_measurement(m: &Measurement) -> Option<(ViolationKind, f64)> {
    let n = m.projectors.len();
    if n == 0 {
        return Some((ViolationKind::Empty, 0.0));
    }
    if m.labels.len() != n {
        return Some((
            ViolationKind::LabelCount {
                labels: m.labels.len(),
                projectors: n,
            },
            0.0,
        ));
    }
    for (i, l) in m.labels.iter().enumerate() {
        if m.labels[..i].contains(l) {
            return Some((ViolationKind::DuplicateLabel(*l), 0.0));
        }
    }
    let dim = m.projectors[0].nrows();
    for (index, p) in m.projectors.iter().enumerate() {
        if p.nrows() != dim || p.ncols() != dim {
            return Some((ViolationKind::Shape { index }, 0.0));
        }
    }
    for (index, p) in m.projectors.iter().enumerate() {
        let dev = max_abs(&(p - p.adjoint())).max(max_abs(&(p * p - p)));
        if dev > TOL {
            return Some((ViolationKind::NotProjector { index }, dev));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let dev = max_abs(&(&m.projectors[i] * &m.projectors[j]));
            if dev > TOL {
                return Some((
                    ViolationKind::NotOrthogonal {
                        first: i,
                        second: j,
                    },
                    dev,
                ));
            }
        }
    }
    let sum = m
        .projectors
        .iter()
        .fold(DMatrix::zeros(dim, dim), |acc, p| acc + p);
    let dev = max_abs(&(sum - DMatrix::identity(dim, dim)));
    if dev > TOL {
        return Some((ViolationKind::Incomplete, dev));
    }
    None
}

/// Checks every measurement of every round; never fails, reports instead.
pub fn validate(p: &Protocol) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (step, s) in p.steps.iter().enumerate() {
        for (i, m) in s.measurements().enumerate() {
            if let Some((kind, deviation)) = check_measurement(m) {
                report.violations.push(Violation {
                    step,
                    variant: i.checked_sub(1),
                    kind,
                    deviation,
                });
            }
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Outcome {
    pub party: String,
    pub label: usize,
}

/// Outcomes broadcast during one run, in round order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Transcript(pub Vec<Outcome>);

impl Transcript {
    pub fn from_pairs(pairs: &[(&str, usize)]) -> Self {
        Self(
            pairs
                .iter()
                .map(|&(p, l)| Outcome {
                    party: p.to_string(),
                    label: l,
                })
                .collect(),
        )
    }

    pub fn labels(&self) -> Vec<usize> {
        self.0.iter().map(|o| o.label).collect()
    }
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self.0.iter().map(|o| o.label.to_string()).collect();
        write!(f, "({})", labels.join(","))
    }
}

/// Transcript → subset decision map.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Classifier {
    table: BTreeMap<Transcript, Vec<usize>>,
    fallback: Option<Vec<usize>>,
}

impl Classifier {
    pub fn new(table: BTreeMap<Transcript, Vec<usize>>) -> Self {
        Self {
            table,
            fallback: None,
        }
    }

    /// Assigns every transcript to `subset`.
    pub fn constant(subset: Vec<usize>) -> Self {
        Self {
            table: BTreeMap::new(),
            fallback: Some(subset),
        }
    }

    pub fn classify(&self, t: &Transcript) -> Option<&[usize]> {
        self.table
            .get(t)
            .or(self.fallback.as_ref())
            .map(Vec::as_slice)
    }

    pub fn table(&self) -> &BTreeMap<Transcript, Vec<usize>> {
        &self.table
    }
}

pub type Distribution = BTreeMap<Transcript, f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisDistribution {
    pub subset: Vec<usize>,
    pub distribution: Distribution,
}

impl HypothesisDistribution {
    pub fn total(&self) -> f64 {
        self.distribution.values().sum()
    }

    /// Transcripts with probability above [`PRUNE`].
    pub fn support(&self) -> Vec<&Transcript> {
        self.distribution
            .iter()
            .filter(|(_, &p)| p > PRUNE)
            .map(|(t, _)| t)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub protocol: String,
    pub hypotheses: Vec<HypothesisDistribution>,
}

struct Resolved {
    party: String,
    positions: Vec<usize>,
    projectors: Vec<DMatrix<C64>>,
    labels: Vec<usize>,
}

struct ResolvedStep {
    options: Vec<Resolved>,
    variant_prefixes: Vec<Vec<usize>>,
}

fn resolve(p: &Protocol, layout: &Layout) -> Result<Vec<ResolvedStep>, ProtocolError> {
    if let Some(v) = validate(p).first() {
        return Err(ProtocolError::Invalid(v.clone()));
    }
    p.steps
        .iter()
        .enumerate()
        .map(|(step, s)| {
            let options = s
                .measurements()
                .map(|m| {
                    let mut positions = Vec::with_capacity(m.targets.len());
                    for t in &m.targets {
                        let pos = layout.position(&t.party, t.copy).ok_or_else(|| {
                            ProtocolError::UnknownFactor {
                                step,
                                factor: t.clone(),
                            }
                        })?;
                        if t.party != m.party {
                            return Err(ProtocolError::LocalityViolation {
                                step,
                                party: m.party.clone(),
                                factor: t.clone(),
                            });
                        }
                        positions.push(pos);
                    }
                    let expected = layout.dim_of(&positions);
                    let got = m.projectors[0].nrows();
                    if expected != got {
                        return Err(ProtocolError::DimensionMismatch {
                            step,
                            expected,
                            got,
                        });
                    }
                    Ok(Resolved {
                        party: m.party.clone(),
                        positions,
                        projectors: m.projectors.clone(),
                        labels: m.labels.clone(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ResolvedStep {
                options,
                variant_prefixes: s.variants.iter().map(|(p, _)| p.clone()).collect(),
            })
        })
        .collect()
}

impl ResolvedStep {
    fn pick(&self, prefix: &[usize]) -> &Resolved {
        let i = self
            .variant_prefixes
            .iter()
            .position(|p| p == prefix)
            .map_or(0, |i| i + 1);
        &self.options[i]
    }
}

fn walk_pure(
    steps: &[ResolvedStep],
    layout: &Layout,
    amps: &[C64],
    prob: f64,
    transcript: &mut Vec<Outcome>,
    out: &mut Distribution,
) {
    let depth = transcript.len();
    let Some(step) = steps.get(depth) else {
        *out.entry(Transcript(transcript.clone())).or_insert(0.0) += prob;
        return;
    };
    let prefix: Vec<usize> = transcript.iter().map(|o| o.label).collect();
    let m = step.pick(&prefix);
    for (proj, &label) in m.projectors.iter().zip(&m.labels) {
        let mut next = apply_local(amps, layout, &m.positions, proj);
        let branch: f64 = next.iter().map(|a| a.norm_sqr()).sum();
        if branch * prob < PRUNE {
            continue;
        }
        let scale = C64::new(1.0 / branch.sqrt(), 0.0);
        for a in &mut next {
            *a *= scale;
        }
        transcript.push(Outcome {
            party: m.party.clone(),
            label,
        });
        walk_pure(steps, layout, &next, prob * branch, transcript, out);
        transcript.pop();
    }
}

fn pure_distribution(steps: &[ResolvedStep], state: &StateVector) -> Distribution {
    let mut out = Distribution::new();
    walk_pure(
        steps,
        state.layout(),
        state.amplitudes(),
        1.0,
        &mut Vec::new(),
        &mut out,
    );
    out
}

/// Transcript distribution of one pure state.
pub fn run_pure(p: &Protocol, state: &StateVector) -> Result<Distribution, ProtocolError> {
    let steps = resolve(p, state.layout())?;
    Ok(pure_distribution(&steps, state))
}

/// Exhaustive evaluation of `p` on every hypothesis.
pub fn run_exact(
    p: &Protocol,
    hypotheses: &[MixedHypothesis],
) -> Result<SimulationReport, ProtocolError> {
    let first = hypotheses.first().ok_or(ProtocolError::NoHypotheses)?;
    let layout = first.layout().clone();
    if hypotheses.iter().any(|h| h.layout() != &layout) {
        return Err(ProtocolError::LayoutMismatch);
    }
    let steps = resolve(p, &layout)?;
    let dists: Vec<HypothesisDistribution> = hypotheses
        .par_iter()
        .map(|h| {
            let mut dist = Distribution::new();
            for c in h.components() {
                for (t, q) in pure_distribution(&steps, c) {
                    *dist.entry(t).or_insert(0.0) += q * h.weight();
                }
            }
            HypothesisDistribution {
                subset: h.subset().to_vec(),
                distribution: dist,
            }
        })
        .collect();
    Ok(SimulationReport {
        protocol: p.name.clone(),
        hypotheses: dists,
    })
}

fn apply_both_sides(
    rho: &DMatrix<C64>,
    layout: &Layout,
    positions: &[usize],
    proj: &DMatrix<C64>,
) -> DMatrix<C64> {
    let n = rho.nrows();
    let left = |m: &DMatrix<C64>| -> DMatrix<C64> {
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            let col: Vec<C64> = m.column(j).iter().copied().collect();
            let applied = apply_local(&col, layout, positions, proj);
            out.set_column(j, &nalgebra::DVector::from_vec(applied));
        }
        out
    };
    // P ρ P = (P (P ρ)†)† for Hermitian P
    let half = left(rho);
    left(&half.adjoint()).adjoint()
}

fn walk_density(
    steps: &[ResolvedStep],
    layout: &Layout,
    rho: &DMatrix<C64>,
    transcript: &mut Vec<Outcome>,
    out: &mut Distribution,
) {
    let depth = transcript.len();
    let Some(step) = steps.get(depth) else {
        *out.entry(Transcript(transcript.clone())).or_insert(0.0) += rho.trace().re;
        return;
    };
    let prefix: Vec<usize> = transcript.iter().map(|o| o.label).collect();
    let m = step.pick(&prefix);
    for (proj, &label) in m.projectors.iter().zip(&m.labels) {
        let next = apply_both_sides(rho, layout, &m.positions, proj);
        if next.trace().re < PRUNE {
            continue;
        }
        transcript.push(Outcome {
            party: m.party.clone(),
            label,
        });
        walk_density(steps, layout, &next, transcript, out);
        transcript.pop();
    }
}

/// Transcript distribution computed by propagating the density operator itself
/// (unnormalized branches, probability = trace at the leaves).
pub fn run_density(p: &Protocol, rho: &DensityOperator) -> Result<Distribution, ProtocolError> {
    let steps = resolve(p, rho.layout())?;
    let mut out = Distribution::new();
    walk_density(
        &steps,
        rho.layout(),
        rho.matrix(),
        &mut Vec::new(),
        &mut out,
    );
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationWitness {
    pub transcript: Transcript,
    pub hypothesis: Vec<usize>,
    pub assigned: Vec<usize>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Identification {
    pub identified: bool,
    pub witness: Option<IdentificationWitness>,
}

/// True iff every reachable transcript of hypothesis `i` is classified as subset `i`.
pub fn perfect_identification(
    report: &SimulationReport,
    c: &Classifier,
) -> Result<Identification, ProtocolError> {
    for h in &report.hypotheses {
        for (t, &p) in &h.distribution {
            if p <= PRUNE {
                continue;
            }
            let assigned = c
                .classify(t)
                .ok_or_else(|| ProtocolError::Coverage(t.clone()))?;
            if assigned != h.subset.as_slice() {
                return Ok(Identification {
                    identified: false,
                    witness: Some(IdentificationWitness {
                        transcript: t.clone(),
                        hypothesis: h.subset.clone(),
                        assigned: assigned.to_vec(),
                        probability: p,
                    }),
                });
            }
        }
    }
    Ok(Identification {
        identified: true,
        witness: None,
    })
}

/// Total-variation distance between two transcript distributions.
pub fn total_variation(a: &Distribution, b: &Distribution) -> f64 {
    let mut keys: Vec<&Transcript> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    0.5 * keys
        .into_iter()
        .map(|t| (a.get(t).unwrap_or(&0.0) - b.get(t).unwrap_or(&0.0)).abs())
        .sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderBlindness {
    pub blind: bool,
    pub max_tv: f64,
    /// Two orderings whose transcript distributions differ most.
    pub witness: Option<(Vec<usize>, Vec<usize>)>,
}

/// True iff every ordering of `subset` induces the same transcript distribution.
pub fn order_blindness(
    p: &Protocol,
    task: &SubsetTask,
    subset: &[usize],
) -> Result<OrderBlindness, ProtocolError> {
    order_blindness_within(p, task, subset, TOL)
}

pub fn order_blindness_within(
    p: &Protocol,
    task: &SubsetTask,
    subset: &[usize],
    tol: f64,
) -> Result<OrderBlindness, ProtocolError> {
    task.check_resources()?;
    let steps = resolve(p, &task.stacked_layout())?;
    let orders = orderings(subset);
    let dists = orders
        .iter()
        .map(|o| Ok(pure_distribution(&steps, &stacked_state(task.set(), o)?)))
        .collect::<Result<Vec<_>, ProtocolError>>()?;
    let mut max_tv: f64 = 0.0;
    let mut witness = None;
    for i in 0..dists.len() {
        for j in i + 1..dists.len() {
            let tv = total_variation(&dists[i], &dists[j]);
            if tv > max_tv {
                max_tv = tv;
                witness = Some((orders[i].clone(), orders[j].clone()));
            }
        }
    }
    let blind = max_tv < tol;
    Ok(OrderBlindness {
        blind,
        max_tv,
        witness: if blind { None } else { witness },
    })
}

/// Assigns each reachable transcript to the unique subset that produces it.
pub fn tally_classifier(report: &SimulationReport) -> Result<Classifier, ProtocolError> {
    let mut table: BTreeMap<Transcript, Vec<usize>> = BTreeMap::new();
    for h in &report.hypotheses {
        for t in h.support() {
            if let Some(prev) = table.get(t) {
                if prev != &h.subset {
                    return Err(ProtocolError::Ambiguous {
                        transcript: t.clone(),
                        first: prev.clone(),
                        second: h.subset.clone(),
                    });
                }
            } else {
                table.insert(t.clone(), h.subset.clone());
            }
        }
    }
    Ok(Classifier::new(table))
}

/// Assigns each reachable transcript to the first hypothesis (in report order)
/// that produces it. Total on the reachable set even when supports overlap.
pub fn first_match_classifier(report: &SimulationReport) -> Classifier {
    let mut table: BTreeMap<Transcript, Vec<usize>> = BTreeMap::new();
    for h in &report.hypotheses {
        for t in h.support() {
            table.entry(t.clone()).or_insert_with(|| h.subset.clone());
        }
    }
    Classifier::new(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{bell, bell_basis, BellIndex};
    use crate::subsets::{hypothesis_ensemble, rho_subset, StateSet};

    fn bell_measure(party: &str) -> Measurement {
        Measurement::from_basis(
            party,
            vec![FactorRef::new(party, 1), FactorRef::new(party, 2)],
            &bell_basis(),
        )
    }

    #[test]
    fn bell_measurement_is_valid() {
        let p = Protocol::new("m", vec![Step::new(bell_measure("A"))]);
        assert!(validate(&p).is_valid());
    }

    #[test]
    fn incomplete_measurement_flagged() {
        let mut m = Measurement::computational("A", FactorRef::new("A", 1), 2);
        m.projectors.truncate(1);
        m.labels.truncate(1);
        let p = Protocol::new("bad", vec![Step::new(m)]);
        let v = validate(&p);
        assert_eq!(v.first().unwrap().kind, ViolationKind::Incomplete);
        assert_eq!(v.first().unwrap().step, 0);
    }

    #[test]
    fn non_orthogonal_flagged() {
        let zero = StateVector::basis(Layout::qubits(&["A"]), &[0]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::from_real(Layout::qubits(&["A"]), &[h, h]).unwrap();
        let m = Measurement::from_basis("A", vec![FactorRef::new("A", 1)], &[zero, plus]);
        let p = Protocol::new(
            "bad",
            vec![Step::new(bell_measure("A")).conditioned(vec![], m)],
        );
        let v = validate(&p);
        let first = v.first().unwrap();
        assert_eq!(first.variant, Some(0));
        assert_eq!(
            first.kind,
            ViolationKind::NotOrthogonal {
                first: 0,
                second: 1
            }
        );
    }

    #[test]
    fn identity_measurement_single_transcript() {
        let m = Measurement::new(
            "A",
            vec![FactorRef::new("A", 1)],
            vec![DMatrix::identity(2, 2)],
            vec![1],
        );
        let p = Protocol::new("id", vec![Step::new(m)]);
        let d = run_pure(&p, &bell(BellIndex::new(1).unwrap())).unwrap();
        assert_eq!(d.len(), 1);
        assert!((d.values().next().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn locality_violation_rejected() {
        let mut m = bell_measure("A");
        m.targets = vec![FactorRef::new("A", 1), FactorRef::new("B", 2)];
        let p = Protocol::new("nonlocal", vec![Step::new(m)]);
        let task = bell_task(&[1, 2, 3], 2).unwrap();
        let hyps = hypothesis_ensemble(&task).unwrap();
        assert!(matches!(
            run_exact(&p, &hyps),
            Err(ProtocolError::LocalityViolation { step: 0, .. })
        ));
    }

    #[test]
    fn constant_classifier_fails_with_witness() {
        let (p, _) = builtin_bell32();
        let task = bell_task(&[1, 2, 3], 2).unwrap();
        let report = run_exact(&p, &hypothesis_ensemble(&task).unwrap()).unwrap();
        let verdict = perfect_identification(&report, &Classifier::constant(vec![0, 1])).unwrap();
        assert!(!verdict.identified);
        let w = verdict.witness.unwrap();
        assert_ne!(w.hypothesis, vec![0, 1]);
    }

    #[test]
    fn coverage_error_on_missing_entry() {
        let (p, _) = builtin_bell32();
        let task = bell_task(&[1, 2, 3], 2).unwrap();
        let report = run_exact(&p, &hypothesis_ensemble(&task).unwrap()).unwrap();
        assert!(matches!(
            perfect_identification(&report, &Classifier::default()),
            Err(ProtocolError::Coverage(_))
        ));
    }

    #[test]
    fn conditioned_rounds_follow_prefix() {
        // Alice measures A1 computationally; Bob measures B1 computationally only after outcome 1
        let alice = Measurement::computational("A", FactorRef::new("A", 1), 2);
        let bob_trivial = Measurement::new(
            "B",
            vec![FactorRef::new("B", 1)],
            vec![DMatrix::identity(2, 2)],
            vec![9],
        );
        let bob = Measurement::computational("B", FactorRef::new("B", 1), 2);
        let p = Protocol::new(
            "adaptive",
            vec![
                Step::new(alice),
                Step::new(bob_trivial).conditioned(vec![1], bob),
            ],
        );
        let d = run_pure(&p, &bell(BellIndex::new(1).unwrap())).unwrap();
        let keys: Vec<String> = d.keys().map(|t| t.to_string()).collect();
        assert_eq!(keys, ["(0,9)", "(1,1)"]);
    }

    #[test]
    fn density_and_component_routes_agree() {
        let (p, _) = builtin_bell32();
        let set = StateSet::new("bell", bell_basis()).unwrap();
        let task = SubsetTask::new(set, 2).unwrap();
        let h = rho_subset(&task, &[0, 2]).unwrap();
        let a = run_exact(&p, std::slice::from_ref(&h)).unwrap();
        let b = run_density(&p, &h.density().unwrap()).unwrap();
        let pruned: Distribution = a.hypotheses[0]
            .distribution
            .iter()
            .filter(|(_, &v)| v > PRUNE)
            .map(|(t, v)| (t.clone(), *v))
            .collect();
        assert!(total_variation(&pruned, &b) < 1e-9);
    }

    #[test]
    fn copy1_fixture_on_b1_b3() {
        // B1 and B3 differ in the parity of A1 B1 only; measuring A1 alone sees ½/½ for both
        let task = bell_task(&[1, 3, 4], 2).unwrap();
        let p = copy1_computational("A");
        let ob = order_blindness(&p, &task, &[0, 1]).unwrap();
        assert!(ob.blind);
        assert!(ob.max_tv < 1e-12);
    }

    #[test]
    fn single_copy_order_blindness_is_vacuous() {
        let task = bell_task(&[1, 2, 3], 1).unwrap();
        let p = Protocol::new(
            "a",
            vec![Step::new(Measurement::computational(
                "A",
                FactorRef::new("A", 1),
                2,
            ))],
        );
        assert!(order_blindness(&p, &task, &[2]).unwrap().blind);
    }
}
