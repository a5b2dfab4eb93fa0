//! Unidentifiability certificates.
//!
//! A certificate checks, for one bipartition of the agents, that every stacked
//! state of a subset task is related to every other by a unitary acting on one
//! side of the cut only. A cited indistinguishability result then says that
//! more than `bound` such states cannot be perfectly distinguished by LOCC,
//! where `bound` is the dimension of the unitary side. Since the hypotheses
//! are mutually orthogonal mixtures of these states, `C(D, k) > bound` rules
//! out perfect subset identification.
//!
//! The premises are checked numerically by one of two routes that agree on
//! every input: [`Route::Direct`] builds each stacked state, while
//! [`Route::Factorized`] derives the same facts from single-copy Gram
//! matrices and reductions, which keeps large stacked spaces tractable.

use std::fmt;

use itertools::Itertools;
use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::families::{ges_basis, FamilyError};
use crate::statespace::{max_abs, schmidt_coefficients, Cut, StateError, TOL};
use crate::subsets::{
    binomial, hypothesis_ensemble, hypothesis_overlap, stacked_layout, StateSet, SubsetError,
    SubsetTask, DEFAULT_MAX_DIM, MAX_DENSE_DIM,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertificateError {
    #[error("certificates need 1 < k < D, got k = {k} for D = {d}")]
    KOutOfRange { d: usize, k: usize },
    #[error("genuine certification needs at least three parties, got {0}")]
    NotMultiparty(usize),
    #[error("stacked dimension {dim} exceeds the resource limit {limit}")]
    Resource { dim: usize, limit: usize },
    #[error(transparent)]
    Subset(#[from] SubsetError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Family(#[from] FamilyError),
}

/// Which bipartitions a request covers.
#[derive(Debug, Clone, PartialEq)]
pub enum CutSelection {
    Single(Cut),
    AllCuts,
}

/// How premises are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RouteChoice {
    /// Direct up to [`MAX_DENSE_DIM`], factorized above.
    #[default]
    Auto,
    Direct,
    Factorized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Direct,
    Factorized,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::Direct => "direct",
            Route::Factorized => "factorized",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateRequest {
    pub set: StateSet,
    pub k: usize,
    pub cut: CutSelection,
    pub tolerance: f64,
    pub max_dim: usize,
    pub route: RouteChoice,
}

impl CertificateRequest {
    pub fn new(set: StateSet, k: usize, cut: CutSelection) -> Self {
        Self {
            set,
            k,
            cut,
            tolerance: TOL,
            max_dim: DEFAULT_MAX_DIM,
            route: RouteChoice::Auto,
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_dim(mut self, max_dim: usize) -> Self {
        self.max_dim = max_dim;
        self
    }

    pub fn with_route(mut self, route: RouteChoice) -> Self {
        self.route = route;
        self
    }

    fn stacked_dim(&self) -> usize {
        self.set.layout().total_dim().saturating_pow(self.k as u32)
    }

    fn validate(&self) -> Result<(), CertificateError> {
        let d = self.set.len();
        if self.k <= 1 || self.k >= d {
            return Err(CertificateError::KOutOfRange { d, k: self.k });
        }
        let dim = self.stacked_dim();
        if dim > self.max_dim {
            return Err(CertificateError::Resource {
                dim,
                limit: self.max_dim,
            });
        }
        Ok(())
    }

    fn resolve_route(&self) -> Route {
        match self.route {
            RouteChoice::Direct => Route::Direct,
            RouteChoice::Factorized => Route::Factorized,
            RouteChoice::Auto if self.stacked_dim() <= MAX_DENSE_DIM => Route::Direct,
            RouteChoice::Auto => Route::Factorized,
        }
    }
}

/// The indistinguishability result a certificate relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axiom {
    /// Maximally entangled states of a symmetric bipartite space.
    CompleteMesBasis,
    /// States related by unitaries on one side of an asymmetric cut.
    OneSidedUnitaryFamily,
}

impl Axiom {
    pub fn tag(self) -> &'static str {
        match self {
            Axiom::CompleteMesBasis => "complete-MES-basis-indistinguishability",
            Axiom::OneSidedUnitaryFamily => "one-sided-unitary-family-indistinguishability",
        }
    }
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Certified,
    ConditionFails,
    PremiseFails,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Certified => "Certified",
            Verdict::ConditionFails => "ConditionFails",
            Verdict::PremiseFails => "PremiseFails",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

pub const PREMISE_ORTHOGONAL: &str = "hypotheses-orthogonal";
pub const PREMISE_REDUCTIONS: &str = "identity-side-reductions-equal";
pub const PREMISE_MES: &str = "stacked-states-maximally-entangled";

#[derive(Debug, Clone, PartialEq)]
pub struct PremiseCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Largest deviation seen; `passed` iff it is below the tolerance.
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub set_name: String,
    /// Size of the state set.
    pub d: usize,
    pub k: usize,
    pub kappa: u128,
    pub bound: u128,
    pub cut: Cut,
    pub unitary_side: Side,
    pub premises: Vec<PremiseCheck>,
    pub axiom: Axiom,
    pub verdict: Verdict,
    pub route: Route,
}

impl Certificate {
    pub fn premises_hold(&self) -> bool {
        self.premises.iter().all(|p| p.passed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenuineCertificate {
    pub certificates: Vec<Certificate>,
    /// True iff every cut is certified.
    pub genuine: bool,
}

fn verdict(premises: &[PremiseCheck], kappa: u128, bound: u128) -> Verdict {
    if !premises.iter().all(|p| p.passed) {
        Verdict::PremiseFails
    } else if kappa > bound {
        Verdict::Certified
    } else {
        Verdict::ConditionFails
    }
}

/// Certifies a single cut. `req.cut` must be [`CutSelection::Single`].
pub fn certify_cut(req: &CertificateRequest) -> Result<Certificate, CertificateError> {
    let cut = match &req.cut {
        CutSelection::Single(c) => c.clone(),
        CutSelection::AllCuts => {
            return Err(StateError::InvalidCut("expected a single cut, got all cuts".into()).into())
        }
    };
    certify_one(req, &cut)
}

fn certify_one(req: &CertificateRequest, cut: &Cut) -> Result<Certificate, CertificateError> {
    req.validate()?;
    let single = req.set.layout();
    let (l1, r1) = cut.positions(single)?;
    let k = req.k as u32;
    let left_dim = (single.dim_of(&l1) as u128).pow(k);
    let right_dim = (single.dim_of(&r1) as u128).pow(k);
    let (unitary_side, bound) = if left_dim > right_dim {
        (Side::Left, left_dim)
    } else {
        (Side::Right, right_dim)
    };
    let symmetric = left_dim == right_dim;
    let route = req.resolve_route();
    let premises = match route {
        Route::Direct => direct_premises(req, cut, unitary_side, symmetric)?,
        Route::Factorized => factorized_premises(req, cut, unitary_side, symmetric)?,
    };
    let kappa = binomial(req.set.len() as u64, req.k as u64);
    Ok(Certificate {
        set_name: req.set.name().to_string(),
        d: req.set.len(),
        k: req.k,
        kappa,
        bound,
        cut: cut.clone(),
        unitary_side,
        verdict: verdict(&premises, kappa, bound),
        premises,
        axiom: if symmetric {
            Axiom::CompleteMesBasis
        } else {
            Axiom::OneSidedUnitaryFamily
        },
        route,
    })
}

fn check(name: &'static str, deviation: f64, tol: f64) -> PremiseCheck {
    PremiseCheck {
        name,
        passed: deviation < tol,
        max_deviation: deviation,
    }
}

fn direct_premises(
    req: &CertificateRequest,
    cut: &Cut,
    unitary_side: Side,
    symmetric: bool,
) -> Result<Vec<PremiseCheck>, CertificateError> {
    let task = SubsetTask::new(req.set.clone(), req.k)?.with_max_dim(req.max_dim);
    let hyps = hypothesis_ensemble(&task)?;
    let pairs: Vec<[usize; 2]> = (0..hyps.len()).array_combinations().collect();
    let orth = pairs
        .par_iter()
        .map(|&[i, j]| hypothesis_overlap(&hyps[i], &hyps[j]))
        .reduce(|| 0.0, f64::max);

    let layout = stacked_layout(req.set.layout(), req.k)?;
    let (l, r) = cut.positions(&layout)?;
    let identity_side = match unitary_side {
        Side::Left => r,
        Side::Right => l,
    };
    let components: Vec<_> = hyps.iter().flat_map(|h| h.components()).collect();
    let reference = components[0].reduced_matrix(&identity_side);
    let red = components
        .par_iter()
        .map(|s| max_abs(&(s.reduced_matrix(&identity_side) - &reference)))
        .reduce(|| 0.0, f64::max);

    let mut out = vec![
        check(PREMISE_ORTHOGONAL, orth, req.tolerance),
        check(PREMISE_REDUCTIONS, red, req.tolerance),
    ];
    if symmetric {
        let mes = components
            .par_iter()
            .map(|s| schmidt_deviation(s, cut))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .fold(0.0, f64::max);
        out.push(check(PREMISE_MES, mes, req.tolerance));
    }
    Ok(out)
}

fn schmidt_deviation(s: &crate::statespace::StateVector, cut: &Cut) -> Result<f64, StateError> {
    let coeffs = schmidt_coefficients(s, cut)?;
    let target = 1.0 / (coeffs.len() as f64).sqrt();
    Ok(coeffs
        .iter()
        .map(|c| (c - target).abs())
        .fold(0.0, f64::max))
}

/// Permanent of a small square matrix, by expansion over permutations.
fn permanent(w: &DMatrix<f64>) -> f64 {
    let n = w.nrows();
    (0..n)
        .permutations(n)
        .map(|p| {
            p.iter()
                .enumerate()
                .map(|(i, &j)| w[(i, j)])
                .product::<f64>()
        })
        .sum()
}

fn factorized_premises(
    req: &CertificateRequest,
    cut: &Cut,
    unitary_side: Side,
    symmetric: bool,
) -> Result<Vec<PremiseCheck>, CertificateError> {
    // tr(ρ_s ρ_t) = perm(W) / k! with W[a][b] = |⟨ψ_{s_a}|ψ_{t_b}⟩|², since
    // stacked overlaps factor over copies.
    let gram = req.set.gram();
    let subsets: Vec<Vec<usize>> = (0..req.set.len()).combinations(req.k).collect();
    let fact: f64 = (1..=req.k).map(|x| x as f64).product();
    let pairs: Vec<[usize; 2]> = (0..subsets.len()).array_combinations().collect();
    let orth = pairs
        .par_iter()
        .map(|&[i, j]| {
            let (s, t) = (&subsets[i], &subsets[j]);
            let w = DMatrix::from_fn(req.k, req.k, |a, b| gram[(s[a], t[b])].norm_sqr());
            permanent(&w) / fact
        })
        .reduce(|| 0.0, f64::max);

    // Stacked identity-side reductions are tensor products of single-copy
    // ones, so they all agree iff the single-copy reductions agree.
    let single = req.set.layout();
    let (l, r) = cut.positions(single)?;
    let identity_side = match unitary_side {
        Side::Left => r,
        Side::Right => l,
    };
    let states = req.set.states();
    let reference = states[0].reduced_matrix(&identity_side);
    let red = states
        .iter()
        .map(|s| max_abs(&(s.reduced_matrix(&identity_side) - &reference)))
        .fold(0.0, f64::max);

    let mut out = vec![
        check(PREMISE_ORTHOGONAL, orth, req.tolerance),
        check(PREMISE_REDUCTIONS, red, req.tolerance),
    ];
    if symmetric {
        // A product of states is maximally entangled across a symmetric cut
        // iff every factor is.
        let mes = states
            .iter()
            .map(|s| schmidt_deviation(s, cut))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .fold(0.0, f64::max);
        out.push(check(PREMISE_MES, mes, req.tolerance));
    }
    Ok(out)
}

/// Certifies every bipartition of a multiparty set.
pub fn certify_genuine(req: &CertificateRequest) -> Result<GenuineCertificate, CertificateError> {
    let parties = req.set.parties();
    if parties.len() < 3 {
        return Err(CertificateError::NotMultiparty(parties.len()));
    }
    req.validate()?;
    let certificates = Cut::all_bipartitions(&parties)
        .par_iter()
        .map(|cut| certify_one(req, cut))
        .collect::<Result<Vec<_>, _>>()?;
    let genuine = certificates.iter().all(|c| c.verdict == Verdict::Certified);
    Ok(GenuineCertificate {
        certificates,
        genuine,
    })
}

/// Any two distinct members of the `d × d` maximally entangled basis.
pub fn corollary_pairs(d: usize) -> Result<Certificate, CertificateError> {
    let set = StateSet::new(format!("ges({d})"), ges_basis(d)?)?;
    let cut = Cut::new(["A"], ["B"])?;
    certify_cut(&CertificateRequest::new(set, 2, CutSelection::Single(cut)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{bell_basis, ghz3_basis, ghz4_basis};
    use crate::statespace::{Layout, StateVector};

    fn ab() -> Cut {
        Cut::new(["A"], ["B"]).unwrap()
    }

    fn bell_set(indices: &[usize]) -> StateSet {
        let all = bell_basis();
        StateSet::new(
            "bell",
            indices.iter().map(|&i| all[i - 1].clone()).collect(),
        )
        .unwrap()
    }

    fn single(set: StateSet, k: usize) -> Certificate {
        certify_cut(&CertificateRequest::new(set, k, CutSelection::Single(ab()))).unwrap()
    }

    #[test]
    fn bell_four_two_certified() {
        let c = single(bell_set(&[1, 2, 3, 4]), 2);
        assert_eq!((c.kappa, c.bound), (6, 4));
        assert_eq!(c.verdict, Verdict::Certified);
        assert_eq!(c.axiom, Axiom::CompleteMesBasis);
        assert_eq!(c.unitary_side, Side::Right);
        assert_eq!(c.premises.len(), 3);
    }

    #[test]
    fn bell_triple_condition_fails() {
        let c = single(bell_set(&[1, 2, 3]), 2);
        assert_eq!((c.kappa, c.bound), (3, 4));
        assert_eq!(c.verdict, Verdict::ConditionFails);
        assert!(c.premises_hold());
    }

    #[test]
    fn ges_three_two_certified() {
        let set = StateSet::new("ges3", ges_basis(3).unwrap()).unwrap();
        let c = single(set, 2);
        assert_eq!((c.kappa, c.bound), (36, 9));
        assert_eq!(c.verdict, Verdict::Certified);
    }

    #[test]
    fn k_range_enforced() {
        let req = CertificateRequest::new(bell_set(&[1, 2, 3, 4]), 1, CutSelection::Single(ab()));
        assert!(matches!(
            certify_cut(&req),
            Err(CertificateError::KOutOfRange { .. })
        ));
        let req = CertificateRequest::new(bell_set(&[1, 2, 3, 4]), 4, CutSelection::Single(ab()));
        assert!(certify_cut(&req).is_err());
    }

    #[test]
    fn resource_guard() {
        let set = StateSet::new("ges3", ges_basis(3).unwrap()).unwrap();
        let req = CertificateRequest::new(set, 3, CutSelection::Single(ab())).with_max_dim(100);
        assert_eq!(
            certify_cut(&req),
            Err(CertificateError::Resource {
                dim: 729,
                limit: 100
            })
        );
    }

    #[test]
    fn ghz3_genuine() {
        let set = StateSet::new("ghz3", ghz3_basis()).unwrap();
        let g = certify_genuine(&CertificateRequest::new(set, 2, CutSelection::AllCuts)).unwrap();
        assert_eq!(g.certificates.len(), 3);
        for c in &g.certificates {
            assert_eq!((c.kappa, c.bound), (28, 16));
            assert_eq!(c.axiom, Axiom::OneSidedUnitaryFamily);
            assert_eq!(c.verdict, Verdict::Certified);
        }
        assert!(g.genuine);
    }

    #[test]
    fn ghz3_k3_condition_fails() {
        let set = StateSet::new("ghz3", ghz3_basis()).unwrap();
        let g = certify_genuine(&CertificateRequest::new(set, 3, CutSelection::AllCuts)).unwrap();
        assert!(g
            .certificates
            .iter()
            .all(|c| c.kappa == 56 && c.bound == 64 && c.verdict == Verdict::ConditionFails));
        assert!(!g.genuine);
    }

    #[test]
    fn ghz4_bounds() {
        let set = StateSet::new("ghz4", ghz4_basis()).unwrap();
        let g = certify_genuine(&CertificateRequest::new(set, 2, CutSelection::AllCuts)).unwrap();
        assert_eq!(g.certificates.len(), 7);
        let bounds: Vec<u128> = g.certificates.iter().map(|c| c.bound).collect();
        assert_eq!(bounds, vec![64, 64, 64, 64, 16, 16, 16]);
        assert!(g.certificates.iter().all(|c| c.kappa == 120));
    }

    #[test]
    fn genuine_needs_three_parties() {
        let req = CertificateRequest::new(bell_set(&[1, 2, 3, 4]), 2, CutSelection::AllCuts);
        assert_eq!(
            certify_genuine(&req),
            Err(CertificateError::NotMultiparty(2))
        );
    }

    #[test]
    fn corollary() {
        for d in 2..=3 {
            let c = corollary_pairs(d).unwrap();
            let n = (d * d) as u128;
            assert_eq!(c.kappa, n * (n - 1) / 2);
            assert_eq!(c.bound, n);
            assert_eq!(c.verdict, Verdict::Certified);
        }
    }

    #[test]
    fn product_states_fail_premises() {
        let l = Layout::qubits(&["A", "B"]);
        let all = bell_basis();
        let states = vec![
            all[0].clone(),
            all[1].clone(),
            StateVector::basis(l.clone(), &[0, 1]).unwrap(),
            StateVector::basis(l, &[1, 0]).unwrap(),
        ];
        let c = single(StateSet::new("mixed", states).unwrap(), 2);
        assert_eq!(c.verdict, Verdict::PremiseFails);
    }

    #[test]
    fn substituted_product_state_fails_premises() {
        let mut states = bell_basis();
        states[3] = StateVector::basis(Layout::qubits(&["A", "B"]), &[0, 0]).unwrap();
        let set = StateSet::unvalidated("bell*", states).unwrap();
        for route in [RouteChoice::Direct, RouteChoice::Factorized] {
            let req = CertificateRequest::new(set.clone(), 2, CutSelection::Single(ab()))
                .with_route(route);
            let c = certify_cut(&req).unwrap();
            assert_eq!(c.verdict, Verdict::PremiseFails);
            assert!(c.premises.iter().all(|p| !p.passed));
        }
    }

    #[test]
    fn routes_agree() {
        let l = Layout::qubits(&["A", "B"]);
        let all = bell_basis();
        let broken = StateSet::new(
            "mixed",
            vec![
                all[0].clone(),
                all[1].clone(),
                StateVector::basis(l.clone(), &[0, 1]).unwrap(),
                StateVector::basis(l, &[1, 0]).unwrap(),
            ],
        )
        .unwrap();
        let sets = [
            (bell_set(&[1, 2, 3, 4]), 2),
            (bell_set(&[1, 2, 3, 4]), 3),
            (bell_set(&[1, 2, 3]), 2),
            (broken, 2),
            (StateSet::new("ges3", ges_basis(3).unwrap()).unwrap(), 2),
            (StateSet::new("ghz3", ghz3_basis()).unwrap(), 2),
            (StateSet::new("ghz4", ghz4_basis()).unwrap(), 2),
        ];
        for (set, k) in sets {
            for cut in Cut::all_bipartitions(&set.parties()) {
                let req = CertificateRequest::new(set.clone(), k, CutSelection::Single(cut));
                let a = certify_cut(&req.clone().with_route(RouteChoice::Direct)).unwrap();
                let b = certify_cut(&req.with_route(RouteChoice::Factorized)).unwrap();
                assert_eq!(a.route, Route::Direct);
                assert_eq!(b.route, Route::Factorized);
                assert_eq!(a.verdict, b.verdict, "{} {}", set.name(), a.cut);
                for (p, q) in a.premises.iter().zip(&b.premises) {
                    assert_eq!((p.name, p.passed), (q.name, q.passed));
                }
            }
        }
    }

    #[test]
    fn permanent_small() {
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(permanent(&w), 10.0);
    }
}
