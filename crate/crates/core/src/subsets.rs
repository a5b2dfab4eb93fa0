//! The subset identification task: enumeration of k-subsets, stacked
//! multi-copy states and the permutation-averaged hypotheses.
//!
//! Subset and ordering indices are 0-based positions into the [`StateSet`];
//! reports print them 1-based.

use itertools::Itertools;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use thiserror::Error;

use crate::statespace::{
    permute_factors, tensor, DensityOperator, Factor, Layout, StateError, StateVector, TOL,
};

/// Default cap on the stacked (k-copy) dimension.
pub const DEFAULT_MAX_DIM: usize = 1 << 16;
/// Largest stacked dimension for which a dense density matrix is built.
pub const MAX_DENSE_DIM: usize = 1 << 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SubsetError {
    #[error("state set is empty")]
    EmptySet,
    #[error("state {index} of set {set} has layout {got}, expected {expected}")]
    LayoutMismatch {
        set: String,
        index: usize,
        expected: String,
        got: String,
    },
    #[error("states of set {set} are not orthonormal (Gram deviation {deviation:.3e})")]
    NotOrthonormal { set: String, deviation: f64 },
    #[error("set layout must be single-copy with one factor per party")]
    NotSingleCopy,
    #[error("subset size {k} out of range for a set of {n} states (need 1 <= k < n)")]
    KOutOfRange { n: usize, k: usize },
    #[error("index {index} out of range for a set of {n} states")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("state {0} listed twice in an ordering")]
    DuplicateIndex(usize),
    #[error("stacked dimension {dim} exceeds the resource limit {limit}")]
    Resource { dim: usize, limit: usize },
    #[error(transparent)]
    State(#[from] StateError),
}

/// An orthonormal set of states over a common single-copy layout.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSet {
    name: String,
    states: Vec<StateVector>,
}

impl StateSet {
    pub fn new(name: impl Into<String>, states: Vec<StateVector>) -> Result<Self, SubsetError> {
        let set = Self::unvalidated(name, states)?;
        let deviation = set.orthonormality_deviation();
        if deviation > TOL {
            return Err(SubsetError::NotOrthonormal {
                set: set.name,
                deviation,
            });
        }
        Ok(set)
    }

    /// Like [`StateSet::new`] but skips the orthonormality check. Meant for
    /// fault injection: certificate premises must catch such sets.
    pub fn unvalidated(
        name: impl Into<String>,
        states: Vec<StateVector>,
    ) -> Result<Self, SubsetError> {
        let name = name.into();
        let first = states.first().ok_or(SubsetError::EmptySet)?;
        let layout = first.layout().clone();
        if layout.factors().iter().any(|f| f.copy != 1)
            || layout.party_labels().len() != layout.len()
        {
            return Err(SubsetError::NotSingleCopy);
        }
        for (index, s) in states.iter().enumerate() {
            if s.layout() != &layout {
                return Err(SubsetError::LayoutMismatch {
                    set: name,
                    index,
                    expected: layout.to_string(),
                    got: s.layout().to_string(),
                });
            }
        }
        Ok(Self { name, states })
    }

    /// Max-norm distance of the Gram matrix from the identity.
    pub fn orthonormality_deviation(&self) -> f64 {
        let mut deviation: f64 = 0.0;
        for (i, a) in self.states.iter().enumerate() {
            for (j, b) in self.states.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                deviation = deviation.max((a.inner(b) - C64::new(target, 0.0)).norm());
            }
        }
        deviation
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn layout(&self) -> &Layout {
        self.states[0].layout()
    }

    pub fn parties(&self) -> Vec<String> {
        self.layout().party_labels()
    }

    /// `G[i][j] = ⟨ψ_i|ψ_j⟩`.
    pub fn gram(&self) -> DMatrix<C64> {
        let n = self.states.len();
        DMatrix::from_fn(n, n, |i, j| self.states[i].inner(&self.states[j]))
    }

    /// Copy of the set with state `index` replaced; re-validates orthonormality.
    pub fn with_replacement(
        &self,
        index: usize,
        state: StateVector,
    ) -> Result<StateSet, SubsetError> {
        if index >= self.len() {
            return Err(SubsetError::IndexOutOfRange {
                index,
                n: self.len(),
            });
        }
        let mut states = self.states.clone();
        states[index] = state;
        StateSet::new(format!("{}*", self.name), states)
    }
}

/// All sorted `k`-subsets of `0..n` in lexicographic order.
pub fn enumerate_subsets(n: usize, k: usize) -> Result<Vec<Vec<usize>>, SubsetError> {
    if k == 0 || k >= n {
        return Err(SubsetError::KOutOfRange { n, k });
    }
    Ok((0..n).combinations(k).collect())
}

/// `n choose k`, exactly.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Party-major, copy-minor layout for `k` copies of `single`.
pub fn stacked_layout(single: &Layout, k: usize) -> Result<Layout, StateError> {
    let mut factors = Vec::with_capacity(single.len() * k);
    for f in single.factors() {
        for copy in 1..=k {
            factors.push(Factor::new(f.party.clone(), copy, f.dim));
        }
    }
    Layout::new(factors)
}

/// Every ordering of the subset's elements, lexicographic.
pub fn orderings(subset: &[usize]) -> Vec<Vec<usize>> {
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    let k = sorted.len();
    sorted.into_iter().permutations(k).collect()
}

/// `ψ_{o_1} ⊗ … ⊗ ψ_{o_k}` with copy `c` holding `ψ_{o_c}`, regrouped party-major.
pub fn stacked_state(set: &StateSet, ordering: &[usize]) -> Result<StateVector, SubsetError> {
    let n = set.len();
    for (i, &o) in ordering.iter().enumerate() {
        if o >= n {
            return Err(SubsetError::IndexOutOfRange { index: o, n });
        }
        if ordering[..i].contains(&o) {
            return Err(SubsetError::DuplicateIndex(o));
        }
    }
    let k = ordering.len();
    let single = set.layout();
    let mut acc: Option<StateVector> = None;
    for (c, &o) in ordering.iter().enumerate() {
        let copy = set.states[o].relabel(single.with_copy(c + 1)?)?;
        acc = Some(match acc {
            None => copy,
            Some(a) => tensor(&a, &copy)?,
        });
    }
    let copy_major = acc.ok_or(SubsetError::KOutOfRange { n, k })?;
    let f = single.len();
    // copy-major position of (copy c, factor p) is c*f + p
    let perm: Vec<usize> = (0..f)
        .flat_map(|p| (0..k).map(move |c| c * f + p))
        .collect();
    Ok(permute_factors(&copy_major, &perm)?)
}

/// A set, a subset size and the resource limit for the stacked space.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetTask {
    set: StateSet,
    k: usize,
    parties: Vec<String>,
    max_dim: usize,
}

impl SubsetTask {
    pub fn new(set: StateSet, k: usize) -> Result<Self, SubsetError> {
        if k == 0 || k >= set.len() {
            return Err(SubsetError::KOutOfRange { n: set.len(), k });
        }
        let parties = set.parties();
        Ok(Self {
            set,
            k,
            parties,
            max_dim: DEFAULT_MAX_DIM,
        })
    }

    pub fn with_max_dim(mut self, max_dim: usize) -> Self {
        self.max_dim = max_dim;
        self
    }

    pub fn set(&self) -> &StateSet {
        &self.set
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn parties(&self) -> &[String] {
        &self.parties
    }

    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    pub fn stacked_dim(&self) -> usize {
        self.set.layout().total_dim().saturating_pow(self.k as u32)
    }

    pub fn stacked_layout(&self) -> Layout {
        stacked_layout(self.set.layout(), self.k).expect("single-copy layout is valid")
    }

    pub fn check_resources(&self) -> Result<(), SubsetError> {
        let dim = self.stacked_dim();
        if dim > self.max_dim {
            return Err(SubsetError::Resource {
                dim,
                limit: self.max_dim,
            });
        }
        Ok(())
    }

    pub fn subsets(&self) -> Vec<Vec<usize>> {
        enumerate_subsets(self.set.len(), self.k).expect("k validated at construction")
    }
}

/// The uniform mixture over all orderings of one subset's stacked states.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedHypothesis {
    subset: Vec<usize>,
    orderings: Vec<Vec<usize>>,
    components: Vec<StateVector>,
}

impl MixedHypothesis {
    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn orderings(&self) -> &[Vec<usize>] {
        &self.orderings
    }

    /// Stacked states `Φ_μ`, one per ordering.
    pub fn components(&self) -> &[StateVector] {
        &self.components
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.components.len() as f64
    }

    pub fn layout(&self) -> &Layout {
        self.components[0].layout()
    }

    /// Dense `ρ = (1/k!) Σ_μ |Φ_μ⟩⟨Φ_μ|`.
    pub fn density(&self) -> Result<DensityOperator, SubsetError> {
        let dim = self.layout().total_dim();
        if dim > MAX_DENSE_DIM {
            return Err(SubsetError::Resource {
                dim,
                limit: MAX_DENSE_DIM,
            });
        }
        let w = vec![self.weight(); self.components.len()];
        Ok(DensityOperator::mixture(&w, &self.components)?)
    }

    /// Rank of `ρ`, from the Gram matrix of its components.
    pub fn rank(&self) -> usize {
        let n = self.components.len();
        let g = DMatrix::from_fn(n, n, |i, j| self.components[i].inner(&self.components[j]));
        g.symmetric_eigenvalues()
            .iter()
            .filter(|&&l| l * self.weight() > TOL)
            .count()
    }
}

/// `tr(ρ_a ρ_b)`, from component overlaps.
pub fn hypothesis_overlap(a: &MixedHypothesis, b: &MixedHypothesis) -> f64 {
    let w = a.weight() * b.weight();
    a.components
        .iter()
        .flat_map(|x| b.components.iter().map(move |y| x.inner(y).norm_sqr()))
        .sum::<f64>()
        * w
}

pub fn rho_subset(task: &SubsetTask, subset: &[usize]) -> Result<MixedHypothesis, SubsetError> {
    task.check_resources()?;
    if subset.len() != task.k {
        return Err(SubsetError::KOutOfRange {
            n: task.set.len(),
            k: subset.len(),
        });
    }
    let orderings = orderings(subset);
    let components = orderings
        .iter()
        .map(|o| stacked_state(&task.set, o))
        .collect::<Result<Vec<_>, _>>()?;
    let mut subset = subset.to_vec();
    subset.sort_unstable();
    Ok(MixedHypothesis {
        subset,
        orderings,
        components,
    })
}

/// One hypothesis per subset, in [`enumerate_subsets`] order.
pub fn hypothesis_ensemble(task: &SubsetTask) -> Result<Vec<MixedHypothesis>, SubsetError> {
    task.check_resources()?;
    task.subsets()
        .par_iter()
        .map(|s| rho_subset(task, s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{bell_basis, ghz3_basis};
    use crate::statespace::{is_maximally_entangled, max_abs, Cut};

    fn bell_set(indices: &[usize]) -> StateSet {
        let all = bell_basis();
        StateSet::new("bell", indices.iter().map(|&i| all[i].clone()).collect()).unwrap()
    }

    #[test]
    fn subset_enumeration() {
        assert_eq!(
            enumerate_subsets(3, 2).unwrap(),
            vec![vec![0, 1], vec![0, 2], vec![1, 2]]
        );
        assert_eq!(enumerate_subsets(4, 2).unwrap().len(), 6);
        assert_eq!(enumerate_subsets(8, 2).unwrap().len(), 28);
        assert!(enumerate_subsets(3, 3).is_err());
        assert!(enumerate_subsets(3, 0).is_err());
        assert_eq!(binomial(16, 2), 120);
        assert_eq!(binomial(9, 4), 126);
    }

    #[test]
    fn orderings_are_lexicographic() {
        assert_eq!(
            orderings(&[2, 0, 1]),
            vec![
                vec![0, 1, 2],
                vec![0, 2, 1],
                vec![1, 0, 2],
                vec![1, 2, 0],
                vec![2, 0, 1],
                vec![2, 1, 0]
            ]
        );
    }

    #[test]
    fn stacked_layout_is_party_major() {
        let l = stacked_layout(&Layout::qubits(&["A", "B"]), 2).unwrap();
        assert_eq!(l.to_string(), "A1[2] A2[2] B1[2] B2[2]");
    }

    #[test]
    fn stacked_bell_pair_amplitudes() {
        // B1_{A1B1} B2_{A2B2} in A1 A2 B1 B2 order: ½(|0000⟩ − |0101⟩ + |1010⟩ − |1111⟩)
        let s = stacked_state(&bell_set(&[0, 1, 2]), &[0, 1]).unwrap();
        let want = [(0b0000, 0.5), (0b0101, -0.5), (0b1010, 0.5), (0b1111, -0.5)];
        for (i, a) in s.amplitudes().iter().enumerate() {
            let w = want.iter().find(|(k, _)| *k == i).map_or(0.0, |x| x.1);
            assert!((a - C64::new(w, 0.0)).norm() < 1e-12, "index {i:04b}");
        }
    }

    #[test]
    fn single_ordering_relabels() {
        let set = bell_set(&[0, 1, 2]);
        let s = stacked_state(&set, &[2]).unwrap();
        assert_eq!(s.amplitudes(), set.states()[2].amplitudes());
        assert_eq!(s.layout(), set.layout());
    }

    #[test]
    fn duplicate_ordering_rejected() {
        assert_eq!(
            stacked_state(&bell_set(&[0, 1, 2]), &[1, 1]).unwrap_err(),
            SubsetError::DuplicateIndex(1)
        );
    }

    #[test]
    fn bell_pair_hypothesis() {
        let task = SubsetTask::new(bell_set(&[0, 1, 2, 3]), 2).unwrap();
        let h = rho_subset(&task, &[0, 1]).unwrap();
        assert_eq!(h.rank(), 2);
        let rho = h.density().unwrap();
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
        let b12 = stacked_state(task.set(), &[0, 1]).unwrap();
        let b21 = stacked_state(task.set(), &[1, 0]).unwrap();
        let expected = (b12.projector() + b21.projector()) * C64::new(0.5, 0.0);
        assert!(max_abs(&(rho.matrix() - expected)) < 1e-12);
    }

    #[test]
    fn single_copy_hypothesis_is_pure() {
        let task = SubsetTask::new(bell_set(&[0, 1, 2]), 1).unwrap();
        let h = rho_subset(&task, &[1]).unwrap();
        let rho = h.density().unwrap();
        assert!(max_abs(&(rho.matrix() - task.set().states()[1].projector())) < 1e-12);
    }

    #[test]
    fn bell_ensemble_is_orthogonal_and_maximally_entangled() {
        let task = SubsetTask::new(bell_set(&[0, 1, 2, 3]), 2).unwrap();
        let ens = hypothesis_ensemble(&task).unwrap();
        assert_eq!(ens.len(), 6);
        for (i, a) in ens.iter().enumerate() {
            assert!((a.density().unwrap().trace().re - 1.0).abs() < 1e-12);
            for b in &ens[i + 1..] {
                assert!(hypothesis_overlap(a, b) < 1e-9);
            }
        }
        let cut = Cut::new(["A"], ["B"]).unwrap();
        for h in &ens {
            for c in h.components() {
                assert!(is_maximally_entangled(c, &cut).unwrap());
            }
        }
    }

    #[test]
    fn ghz_ensemble_count() {
        let set = StateSet::new("ghz3", ghz3_basis()).unwrap();
        let task = SubsetTask::new(set, 2).unwrap();
        assert_eq!(hypothesis_ensemble(&task).unwrap().len(), 28);
    }

    #[test]
    fn resource_guard() {
        let set = StateSet::new("ghz3", ghz3_basis()).unwrap();
        let task = SubsetTask::new(set, 3).unwrap().with_max_dim(256);
        assert_eq!(
            hypothesis_ensemble(&task).unwrap_err(),
            SubsetError::Resource {
                dim: 512,
                limit: 256
            }
        );
    }

    #[test]
    fn set_validation() {
        let b = bell_basis();
        assert!(matches!(
            StateSet::new("dup", vec![b[0].clone(), b[0].clone()]),
            Err(SubsetError::NotOrthonormal { .. })
        ));
        assert_eq!(
            StateSet::new("empty", vec![]).unwrap_err(),
            SubsetError::EmptySet
        );
        assert!(matches!(
            SubsetTask::new(bell_set(&[0, 1]), 2),
            Err(SubsetError::KOutOfRange { n: 2, k: 2 })
        ));
    }
}
