//! Dense complex tensor algebra over multipartite systems.
//!
//! States carry an explicit [`Layout`]: an ordered list of tensor factors,
//! each tagged with the party holding it, a copy index and a local
//! dimension. The leftmost factor is the most significant digit of the
//! mixed-radix basis index, so `|01⟩` on two qubits is index 1.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use thiserror::Error;

/// Tolerance for logical predicates (normalization, orthogonality, equality of reductions).
pub const TOL: f64 = 1e-9;
/// Tolerance for algebraic identities that hold up to rounding.
pub const ALGEBRA_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("layout collision: factor ({party}, copy {copy}) appears more than once")]
    LayoutCollision { party: String, copy: usize },
    #[error("invalid local dimension {0}; every factor needs dimension at least 2")]
    InvalidDimension(usize),
    #[error("copy index must be at least 1")]
    InvalidCopy,
    #[error("amplitude count {got} does not match layout dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),
    #[error("not a density operator: {0}")]
    NotDensityOperator(String),
    #[error("{0:?} is not a bijection on factor positions")]
    InvalidPermutation(Vec<usize>),
    #[error("partial trace needs at least one kept factor")]
    EmptyKeep,
    #[error("factor position {position} out of range for {count} factors")]
    InvalidPosition { position: usize, count: usize },
    #[error("invalid cut: {0}")]
    InvalidCut(String),
    #[error("basis on the {side} side is not orthonormal (deviation {deviation:.3e})")]
    NonOrthonormalBasis { side: &'static str, deviation: f64 },
    #[error("basis vector on the {side} side has dimension {got}, expected {expected}")]
    BasisDimension {
        side: &'static str,
        expected: usize,
        got: usize,
    },
}

/// One tensor factor of a [`Layout`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Factor {
    pub party: String,
    pub copy: usize,
    pub dim: usize,
}

impl Factor {
    pub fn new(party: impl Into<String>, copy: usize, dim: usize) -> Self {
        Self {
            party: party.into(),
            copy,
            dim,
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}[{}]", self.party, self.copy, self.dim)
    }
}

/// Ordered tensor-factor bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Layout {
    factors: Vec<Factor>,
}

impl Layout {
    pub fn new(factors: Vec<Factor>) -> Result<Self, StateError> {
        let mut seen = BTreeSet::new();
        for f in &factors {
            if f.dim < 2 {
                return Err(StateError::InvalidDimension(f.dim));
            }
            if f.copy == 0 {
                return Err(StateError::InvalidCopy);
            }
            if !seen.insert((f.party.as_str(), f.copy)) {
                return Err(StateError::LayoutCollision {
                    party: f.party.clone(),
                    copy: f.copy,
                });
            }
        }
        Ok(Self { factors })
    }

    /// Single-copy layout with one factor per party.
    pub fn parties(parties: &[(&str, usize)]) -> Result<Self, StateError> {
        Self::new(parties.iter().map(|&(p, d)| Factor::new(p, 1, d)).collect())
    }

    /// Single-copy layout of one qubit per listed party.
    pub fn qubits(parties: &[&str]) -> Self {
        Self::parties(&parties.iter().map(|&p| (p, 2)).collect::<Vec<_>>())
            .expect("qubit layout with distinct parties")
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim).product()
    }

    /// Party labels in order of first appearance.
    pub fn party_labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for f in &self.factors {
            if !out.contains(&f.party) {
                out.push(f.party.clone());
            }
        }
        out
    }

    pub fn positions_of(&self, party: &str) -> Vec<usize> {
        self.factors
            .iter()
            .enumerate()
            .filter(|(_, f)| f.party == party)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn position(&self, party: &str, copy: usize) -> Option<usize> {
        self.factors
            .iter()
            .position(|f| f.party == party && f.copy == copy)
    }

    pub fn concat(&self, other: &Layout) -> Result<Layout, StateError> {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        Layout::new(factors)
    }

    /// The same factors with every copy index replaced.
    pub fn with_copy(&self, copy: usize) -> Result<Layout, StateError> {
        Layout::new(
            self.factors
                .iter()
                .map(|f| Factor::new(f.party.clone(), copy, f.dim))
                .collect(),
        )
    }

    /// Dimension spanned by the given factor positions.
    pub fn dim_of(&self, positions: &[usize]) -> usize {
        positions.iter().map(|&p| self.factors[p].dim).product()
    }

    fn check_permutation(&self, perm: &[usize]) -> Result<(), StateError> {
        let n = self.factors.len();
        let distinct: BTreeSet<usize> = perm.iter().copied().collect();
        if perm.len() != n || distinct.len() != n || perm.iter().any(|&p| p >= n) {
            return Err(StateError::InvalidPermutation(perm.to_vec()));
        }
        Ok(())
    }

    fn check_positions(&self, positions: &[usize]) -> Result<(), StateError> {
        for &p in positions {
            if p >= self.factors.len() {
                return Err(StateError::InvalidPosition {
                    position: p,
                    count: self.factors.len(),
                });
            }
        }
        Ok(())
    }

    /// Factor `i` of the result is factor `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Layout, StateError> {
        self.check_permutation(perm)?;
        Ok(Layout {
            factors: perm.iter().map(|&p| self.factors[p].clone()).collect(),
        })
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.factors.len()];
        for i in (0..self.factors.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.factors[i + 1].dim;
        }
        strides
    }

    /// Flat-index offsets contributed by the listed positions, enumerated in
    /// mixed-radix order with the first listed position most significant.
    pub(crate) fn offsets(&self, positions: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let mut out = vec![0usize];
        for &p in positions {
            let dim = self.factors[p].dim;
            let mut next = Vec::with_capacity(out.len() * dim);
            for &o in &out {
                for j in 0..dim {
                    next.push(o + j * strides[p]);
                }
            }
            out = next;
        }
        out
    }

    /// Positions not listed, in layout order.
    pub(crate) fn complement(&self, positions: &[usize]) -> Vec<usize> {
        (0..self.factors.len())
            .filter(|p| !positions.contains(p))
            .collect()
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.factors.iter().map(|x| x.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    layout: Layout,
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// Rejects amplitude vectors whose norm differs from 1 by more than [`TOL`].
    pub fn new(layout: Layout, amplitudes: Vec<C64>) -> Result<Self, StateError> {
        if amplitudes.len() != layout.total_dim() {
            return Err(StateError::DimensionMismatch {
                expected: layout.total_dim(),
                got: amplitudes.len(),
            });
        }
        let norm = norm(&amplitudes);
        if (norm - 1.0).abs() > TOL {
            return Err(StateError::NotNormalized(norm));
        }
        Ok(Self { layout, amplitudes })
    }

    /// Builds from real amplitudes.
    pub fn from_real(layout: Layout, amplitudes: &[f64]) -> Result<Self, StateError> {
        Self::new(
            layout,
            amplitudes.iter().map(|&x| C64::new(x, 0.0)).collect(),
        )
    }

    /// Computational basis ket `|digits⟩`.
    pub fn basis(layout: Layout, digits: &[usize]) -> Result<Self, StateError> {
        if digits.len() != layout.len() {
            return Err(StateError::DimensionMismatch {
                expected: layout.len(),
                got: digits.len(),
            });
        }
        let mut index = 0;
        for (d, f) in digits.iter().zip(layout.factors()) {
            if *d >= f.dim {
                return Err(StateError::DimensionMismatch {
                    expected: f.dim,
                    got: *d,
                });
            }
            index = index * f.dim + d;
        }
        let mut amps = vec![C64::new(0.0, 0.0); layout.total_dim()];
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self {
            layout,
            amplitudes: amps,
        })
    }

    /// Normalizes a nonzero vector; used for post-measurement states.
    pub(crate) fn normalized(layout: Layout, mut amplitudes: Vec<C64>) -> Self {
        let n = norm(&amplitudes);
        for a in &mut amplitudes {
            *a /= n;
        }
        Self { layout, amplitudes }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        inner(&self.amplitudes, &other.amplitudes)
    }

    /// Same amplitudes under a different layout of equal factor dimensions.
    pub fn relabel(&self, layout: Layout) -> Result<Self, StateError> {
        if layout.dims() != self.layout.dims() {
            return Err(StateError::DimensionMismatch {
                expected: self.layout.total_dim(),
                got: layout.total_dim(),
            });
        }
        Ok(Self {
            layout,
            amplitudes: self.amplitudes.clone(),
        })
    }

    /// Amplitudes reshaped into a matrix with rows indexed by `rows` and
    /// columns by `cols` (each enumerated in the listed order).
    pub fn reshape(&self, rows: &[usize], cols: &[usize]) -> DMatrix<C64> {
        let r = self.layout.offsets(rows);
        let c = self.layout.offsets(cols);
        DMatrix::from_fn(r.len(), c.len(), |i, j| self.amplitudes[r[i] + c[j]])
    }

    /// Reduced density matrix on the kept positions (in the listed order).
    pub fn reduced_matrix(&self, keep: &[usize]) -> DMatrix<C64> {
        let rest = self.layout.complement(keep);
        let m = self.reshape(keep, &rest);
        &m * m.adjoint()
    }

    pub fn projector(&self) -> DMatrix<C64> {
        let v = nalgebra::DVector::from_column_slice(&self.amplitudes);
        &v * v.adjoint()
    }
}

pub(crate) fn norm(amps: &[C64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Mixed state with an explicit layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    layout: Layout,
    matrix: DMatrix<C64>,
}

impl DensityOperator {
    /// Validates Hermiticity, unit trace and positive semidefiniteness within [`TOL`].
    pub fn new(layout: Layout, matrix: DMatrix<C64>) -> Result<Self, StateError> {
        let n = layout.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(StateError::DimensionMismatch {
                expected: n,
                got: matrix.nrows(),
            });
        }
        let herm = max_abs(&(&matrix - matrix.adjoint()));
        if herm > TOL {
            return Err(StateError::NotDensityOperator(format!(
                "not Hermitian (deviation {herm:.3e})"
            )));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > TOL || trace.im.abs() > TOL {
            return Err(StateError::NotDensityOperator(format!(
                "trace {trace} differs from 1"
            )));
        }
        let min_eig = matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -TOL {
            return Err(StateError::NotDensityOperator(format!(
                "negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self { layout, matrix })
    }

    pub fn pure(state: &StateVector) -> Self {
        Self {
            layout: state.layout.clone(),
            matrix: state.projector(),
        }
    }

    /// Convex combination `Σ w_i |ψ_i⟩⟨ψ_i|`; weights must sum to 1.
    pub fn mixture(weights: &[f64], states: &[StateVector]) -> Result<Self, StateError> {
        let first = states
            .first()
            .ok_or_else(|| StateError::NotDensityOperator("empty mixture".into()))?;
        let n = first.dim();
        let mut m = DMatrix::zeros(n, n);
        for (w, s) in weights.iter().zip(states) {
            if s.layout != first.layout {
                return Err(StateError::NotDensityOperator(
                    "mixture components have different layouts".into(),
                ));
            }
            m += s.projector() * C64::new(*w, 0.0);
        }
        Self::new(first.layout.clone(), m)
    }

    pub fn maximally_mixed(layout: Layout) -> Self {
        let n = layout.total_dim();
        let m = DMatrix::identity(n, n) * C64::new(1.0 / n as f64, 0.0);
        Self { layout, matrix: m }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }
}

pub(crate) fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// A bipartition of the parties of a layout.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cut {
    left: Vec<String>,
    right: Vec<String>,
}

impl Cut {
    pub fn new<L, R, S>(left: L, right: R) -> Result<Self, StateError>
    where
        L: IntoIterator<Item = S>,
        R: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let left: Vec<String> = left.into_iter().map(Into::into).collect();
        let right: Vec<String> = right.into_iter().map(Into::into).collect();
        if left.is_empty() || right.is_empty() {
            return Err(StateError::InvalidCut("both sides must be nonempty".into()));
        }
        let l: BTreeSet<&String> = left.iter().collect();
        let r: BTreeSet<&String> = right.iter().collect();
        if l.len() != left.len() || r.len() != right.len() {
            return Err(StateError::InvalidCut("repeated party label".into()));
        }
        if let Some(p) = l.intersection(&r).next() {
            return Err(StateError::InvalidCut(format!(
                "party {p} appears on both sides"
            )));
        }
        Ok(Self { left, right })
    }

    pub fn left(&self) -> &[String] {
        &self.left
    }

    pub fn right(&self) -> &[String] {
        &self.right
    }

    /// Checks that the cut covers exactly the parties of `layout`.
    pub fn validate(&self, layout: &Layout) -> Result<(), StateError> {
        let parties: BTreeSet<String> = layout.party_labels().into_iter().collect();
        let covered: BTreeSet<String> = self.left.iter().chain(&self.right).cloned().collect();
        if parties != covered {
            return Err(StateError::InvalidCut(format!(
                "cut {self} does not partition parties {{{}}}",
                parties.into_iter().collect::<Vec<_>>().join(",")
            )));
        }
        Ok(())
    }

    /// Factor positions of each side, in layout order.
    pub fn positions(&self, layout: &Layout) -> Result<(Vec<usize>, Vec<usize>), StateError> {
        self.validate(layout)?;
        let side = |labels: &[String]| -> Vec<usize> {
            layout
                .factors()
                .iter()
                .enumerate()
                .filter(|(_, f)| labels.contains(&f.party))
                .map(|(i, _)| i)
                .collect()
        };
        Ok((side(&self.left), side(&self.right)))
    }

    /// All bipartitions of `parties`, with the first party always on the left.
    /// Ordered by the size of the smaller side, then lexicographically.
    pub fn all_bipartitions(parties: &[String]) -> Vec<Cut> {
        let n = parties.len();
        if n < 2 {
            return Vec::new();
        }
        let mut cuts: Vec<(usize, Vec<usize>, Cut)> = Vec::new();
        for mask in 0..(1u64 << (n - 1)) {
            // bit i set: party i+1 joins the first party on the left
            let mut left = vec![0];
            left.extend((1..n).filter(|i| mask & (1 << (i - 1)) != 0));
            if left.len() == n {
                continue;
            }
            let right: Vec<usize> = (0..n).filter(|i| !left.contains(i)).collect();
            let small = left.len().min(right.len());
            let cut = Cut {
                left: left.iter().map(|&i| parties[i].clone()).collect(),
                right: right.iter().map(|&i| parties[i].clone()).collect(),
            };
            cuts.push((small, left, cut));
        }
        cuts.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
        cuts.into_iter().map(|(_, _, c)| c).collect()
    }
}

impl fmt::Display for Cut {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.left.join(","), self.right.join(","))
    }
}

impl FromStr for Cut {
    type Err = StateError;

    /// Parses `A,B:C`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (l, r) = s
            .split_once(':')
            .ok_or_else(|| StateError::InvalidCut(format!("missing ':' in {s:?}")))?;
        let side = |x: &str| -> Vec<String> {
            x.split(',')
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .map(String::from)
                .collect()
        };
        Cut::new(side(l), side(r))
    }
}

/// Kronecker product; the result's layout is `a` followed by `b`.
pub fn tensor(a: &StateVector, b: &StateVector) -> Result<StateVector, StateError> {
    let layout = a.layout.concat(&b.layout)?;
    let mut amps = Vec::with_capacity(a.dim() * b.dim());
    for x in &a.amplitudes {
        for y in &b.amplitudes {
            amps.push(x * y);
        }
    }
    Ok(StateVector {
        layout,
        amplitudes: amps,
    })
}

/// Reorders factors: factor `i` of the result is factor `perm[i]` of `s`.
pub fn permute_factors(s: &StateVector, perm: &[usize]) -> Result<StateVector, StateError> {
    let layout = s.layout.permuted(perm)?;
    let offsets = s.layout.offsets(perm);
    Ok(StateVector {
        layout,
        amplitudes: offsets.iter().map(|&o| s.amplitudes[o]).collect(),
    })
}

/// Partial trace over every factor not in `keep`; kept factors stay in layout order.
pub fn partial_trace(
    rho: &DensityOperator,
    keep: &BTreeSet<usize>,
) -> Result<DensityOperator, StateError> {
    if keep.is_empty() {
        return Err(StateError::EmptyKeep);
    }
    let keep: Vec<usize> = keep.iter().copied().collect();
    rho.layout.check_positions(&keep)?;
    let rest = rho.layout.complement(&keep);
    let k = rho.layout.offsets(&keep);
    let r = rho.layout.offsets(&rest);
    let m = &rho.matrix;
    let out = DMatrix::from_fn(k.len(), k.len(), |i, j| {
        r.iter().map(|&o| m[(k[i] + o, k[j] + o)]).sum::<C64>()
    });
    let layout = Layout {
        factors: keep
            .iter()
            .map(|&p| rho.layout.factors[p].clone())
            .collect(),
    };
    Ok(DensityOperator {
        layout,
        matrix: out,
    })
}

/// Schmidt coefficients across `cut`, in descending order.
pub fn schmidt_coefficients(s: &StateVector, cut: &Cut) -> Result<Vec<f64>, StateError> {
    let (l, r) = cut.positions(&s.layout)?;
    let m = s.reshape(&l, &r);
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

pub fn is_maximally_entangled(s: &StateVector, cut: &Cut) -> Result<bool, StateError> {
    is_maximally_entangled_within(s, cut, TOL)
}

pub fn is_maximally_entangled_within(
    s: &StateVector,
    cut: &Cut,
    tol: f64,
) -> Result<bool, StateError> {
    let coeffs = schmidt_coefficients(s, cut)?;
    let target = 1.0 / (coeffs.len() as f64).sqrt();
    Ok(coeffs.iter().all(|c| (c - target).abs() <= tol))
}

/// Eigenpairs of `rho` with eigenvalue above `tol`, largest first.
pub fn spectral_support(rho: &DensityOperator, tol: f64) -> Vec<(f64, StateVector)> {
    let eig = rho.matrix.clone().symmetric_eigen();
    let mut pairs: Vec<(f64, StateVector)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > tol)
        .map(|(i, &l)| {
            let v: Vec<C64> = eig.eigenvectors.column(i).iter().copied().collect();
            (l, StateVector::normalized(rho.layout.clone(), v))
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

/// Orthonormal basis of the support of `rho`.
pub fn support_basis(rho: &DensityOperator, tol: f64) -> Vec<StateVector> {
    spectral_support(rho, tol)
        .into_iter()
        .map(|(_, v)| v)
        .collect()
}

fn check_basis(basis: &[StateVector], dim: usize, side: &'static str) -> Result<(), StateError> {
    for b in basis {
        if b.dim() != dim {
            return Err(StateError::BasisDimension {
                side,
                expected: dim,
                got: b.dim(),
            });
        }
    }
    let mut deviation: f64 = 0.0;
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            deviation = deviation.max((a.inner(b) - C64::new(target, 0.0)).norm());
        }
    }
    if deviation > TOL {
        return Err(StateError::NonOrthonormalBasis { side, deviation });
    }
    Ok(())
}

/// Expansion coefficients `c[a][b] = (⟨left_a| ⊗ ⟨right_b|) s` after regrouping
/// the factors of `s` into left-side factors followed by right-side factors.
pub fn regroup_coefficients(
    s: &StateVector,
    cut: &Cut,
    left_basis: &[StateVector],
    right_basis: &[StateVector],
) -> Result<DMatrix<C64>, StateError> {
    let (l, r) = cut.positions(&s.layout)?;
    check_basis(left_basis, s.layout.dim_of(&l), "left")?;
    check_basis(right_basis, s.layout.dim_of(&r), "right")?;
    let m = s.reshape(&l, &r);
    Ok(DMatrix::from_fn(
        left_basis.len(),
        right_basis.len(),
        |a, b| {
            let la = left_basis[a].amplitudes();
            let rb = right_basis[b].amplitudes();
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    acc += la[i].conj() * m[(i, j)] * rb[j].conj();
                }
            }
            acc
        },
    ))
}

/// `Σ c[a][b] |left_a⟩|right_b⟩` as a flat amplitude vector (left side most significant).
pub fn reconstruct_regrouped(
    coeffs: &DMatrix<C64>,
    left_basis: &[StateVector],
    right_basis: &[StateVector],
) -> Vec<C64> {
    let ld = left_basis.first().map_or(0, |b| b.dim());
    let rd = right_basis.first().map_or(0, |b| b.dim());
    let mut out = vec![C64::new(0.0, 0.0); ld * rd];
    for (a, la) in left_basis.iter().enumerate() {
        for (b, rb) in right_basis.iter().enumerate() {
            let c = coeffs[(a, b)];
            if c.norm() == 0.0 {
                continue;
            }
            for i in 0..ld {
                for j in 0..rd {
                    out[i * rd + j] += c * la.amplitudes()[i] * rb.amplitudes()[j];
                }
            }
        }
    }
    out
}

/// Applies `op` to the listed factor positions, returning raw (unnormalized) amplitudes.
pub fn apply_local(
    amplitudes: &[C64],
    layout: &Layout,
    positions: &[usize],
    op: &DMatrix<C64>,
) -> Vec<C64> {
    let t = layout.offsets(positions);
    let r = layout.offsets(&layout.complement(positions));
    let mut out = vec![C64::new(0.0, 0.0); amplitudes.len()];
    let mut column = vec![C64::new(0.0, 0.0); t.len()];
    for &ro in &r {
        for (i, &to) in t.iter().enumerate() {
            column[i] = amplitudes[to + ro];
        }
        for (i, &to) in t.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (j, c) in column.iter().enumerate() {
                acc += op[(i, j)] * c;
            }
            out[to + ro] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn bell1() -> StateVector {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::from_real(Layout::qubits(&["A", "B"]), &[h, 0.0, 0.0, h]).unwrap()
    }

    fn bell2() -> StateVector {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::from_real(Layout::qubits(&["A", "B"]), &[h, 0.0, 0.0, -h]).unwrap()
    }

    #[test]
    fn basis_product() {
        let z = StateVector::basis(Layout::qubits(&["A"]), &[0]).unwrap();
        let w = StateVector::basis(Layout::qubits(&["B"]), &[0]).unwrap();
        let t = tensor(&z, &w).unwrap();
        assert_eq!(t.amplitudes(), &[c(1.0), c(0.0), c(0.0), c(0.0)]);
    }

    #[test]
    fn tensor_rejects_collision() {
        let err = tensor(&bell1(), &bell1()).unwrap_err();
        assert!(matches!(err, StateError::LayoutCollision { .. }));
    }

    #[test]
    fn bell_product_amplitudes() {
        let a = bell1();
        let b = bell2()
            .relabel(Layout::qubits(&["A", "B"]).with_copy(2).unwrap())
            .unwrap();
        let t = tensor(&a, &b).unwrap();
        // index digits A1 B1 A2 B2; B1 has + on 00,11 and B2 has - on 11
        let expected = [(0b0000, 0.5), (0b0011, -0.5), (0b1100, 0.5), (0b1111, -0.5)];
        for (i, amp) in t.amplitudes().iter().enumerate() {
            let want = expected
                .iter()
                .find(|(k, _)| *k == i)
                .map_or(0.0, |(_, v)| *v);
            assert!((amp - c(want)).norm() < ALGEBRA_TOL, "index {i}");
        }
        assert!((t.norm() - 1.0).abs() < ALGEBRA_TOL);
    }

    #[test]
    fn rejects_unnormalized() {
        let err = StateVector::from_real(Layout::qubits(&["A"]), &[1.0, 1.0]).unwrap_err();
        assert!(matches!(err, StateError::NotNormalized(_)));
    }

    #[test]
    fn swap_factors() {
        let s = StateVector::basis(Layout::qubits(&["A", "B"]), &[0, 1]).unwrap();
        let t = permute_factors(&s, &[1, 0]).unwrap();
        assert_eq!(t.amplitudes()[0b10], c(1.0));
        assert_eq!(t.layout().factors()[0].party, "B");
        assert_eq!(permute_factors(&s, &[0, 1]).unwrap(), s);
        assert!(matches!(
            permute_factors(&s, &[0, 0]),
            Err(StateError::InvalidPermutation(_))
        ));
    }

    #[test]
    fn partial_trace_examples() {
        let rho = DensityOperator::pure(&bell1());
        let keep: BTreeSet<usize> = [0].into();
        let red = partial_trace(&rho, &keep).unwrap();
        let half = DMatrix::identity(2, 2) * c(0.5);
        assert!(max_abs(&(red.matrix() - half)) < ALGEBRA_TOL);

        let all: BTreeSet<usize> = [0, 1].into();
        assert_eq!(partial_trace(&rho, &all).unwrap().matrix(), rho.matrix());

        let zz = StateVector::basis(Layout::qubits(&["A", "B"]), &[0, 0]).unwrap();
        let keep_b: BTreeSet<usize> = [1].into();
        let red = partial_trace(&DensityOperator::pure(&zz), &keep_b).unwrap();
        assert_eq!(red.matrix()[(0, 0)], c(1.0));
        assert_eq!(red.layout().factors()[0].party, "B");

        assert_eq!(
            partial_trace(&rho, &BTreeSet::new()).unwrap_err(),
            StateError::EmptyKeep
        );
    }

    #[test]
    fn schmidt_examples() {
        let cut: Cut = "A:B".parse().unwrap();
        let s = schmidt_coefficients(&bell1(), &cut).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s[0] - h).abs() < ALGEBRA_TOL && (s[1] - h).abs() < ALGEBRA_TOL);
        let zz = StateVector::basis(Layout::qubits(&["A", "B"]), &[0, 0]).unwrap();
        let s = schmidt_coefficients(&zz, &cut).unwrap();
        assert!((s[0] - 1.0).abs() < ALGEBRA_TOL && s[1].abs() < ALGEBRA_TOL);
        let bad: Cut = "A:C".parse().unwrap();
        assert!(matches!(
            schmidt_coefficients(&zz, &bad),
            Err(StateError::InvalidCut(_))
        ));
    }

    #[test]
    fn product_with_plus_is_not_maximally_entangled() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = StateVector::from_real(Layout::qubits(&["A", "B"]), &[h, h, 0.0, 0.0]).unwrap();
        assert!(!is_maximally_entangled(&s, &"A:B".parse().unwrap()).unwrap());
    }

    #[test]
    fn support_of_pure_and_maximally_mixed() {
        let basis = support_basis(&DensityOperator::pure(&bell1()), TOL);
        assert_eq!(basis.len(), 1);
        assert!((basis[0].inner(&bell1()).norm() - 1.0).abs() < 1e-9);
        let mixed = DensityOperator::maximally_mixed(Layout::qubits(&["A", "B"]));
        assert_eq!(support_basis(&mixed, 1e-9).len(), 4);
    }

    #[test]
    fn density_validation() {
        let layout = Layout::qubits(&["A"]);
        let m = DMatrix::identity(2, 2) * c(1.0);
        assert!(matches!(
            DensityOperator::new(layout.clone(), m),
            Err(StateError::NotDensityOperator(_))
        ));
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 0)] = c(1.5);
        m[(1, 1)] = c(-0.5);
        assert!(DensityOperator::new(layout, m).is_err());
    }

    #[test]
    fn cut_parsing_and_validation() {
        let cut: Cut = "A,B:C".parse().unwrap();
        assert_eq!(cut.left(), &["A".to_string(), "B".to_string()]);
        assert_eq!(cut.to_string(), "A,B:C");
        assert!("A:A".parse::<Cut>().is_err());
        assert!(":A".parse::<Cut>().is_err());
        assert!("AB".parse::<Cut>().is_err());
    }

    #[test]
    fn bipartition_enumeration() {
        let parties: Vec<String> = ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect();
        let cuts: Vec<String> = Cut::all_bipartitions(&parties)
            .iter()
            .map(|c| c.to_string())
            .collect();
        assert_eq!(
            cuts,
            ["A:B,C,D", "A,B,C:D", "A,B,D:C", "A,C,D:B", "A,B:C,D", "A,C:B,D", "A,D:B,C"]
        );
    }

    #[test]
    fn product_regrouping_is_single_entry() {
        let zz = StateVector::basis(Layout::qubits(&["A", "B"]), &[0, 0]).unwrap();
        let basis = |p: &str| {
            vec![
                StateVector::basis(Layout::qubits(&[p]), &[0]).unwrap(),
                StateVector::basis(Layout::qubits(&[p]), &[1]).unwrap(),
            ]
        };
        let c =
            regroup_coefficients(&zz, &"A:B".parse().unwrap(), &basis("A"), &basis("B")).unwrap();
        assert_eq!(c[(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(c.iter().filter(|x| x.norm() > 0.0).count(), 1);
    }

    #[test]
    fn regrouping_rejects_non_orthonormal_basis() {
        let zz = StateVector::basis(Layout::qubits(&["A", "B"]), &[0, 0]).unwrap();
        let z = StateVector::basis(Layout::qubits(&["A"]), &[0]).unwrap();
        let err = regroup_coefficients(&zz, &"A:B".parse().unwrap(), &[z.clone(), z.clone()], &[z])
            .unwrap_err();
        assert!(matches!(
            err,
            StateError::NonOrthonormalBasis { side: "left", .. }
        ));
    }

    #[test]
    fn apply_local_acts_on_selected_factor() {
        let s = StateVector::basis(Layout::qubits(&["A", "B"]), &[0, 0]).unwrap();
        let mut x = DMatrix::zeros(2, 2);
        x[(0, 1)] = c(1.0);
        x[(1, 0)] = c(1.0);
        let out = apply_local(s.amplitudes(), s.layout(), &[1], &x);
        assert_eq!(out[0b01], c(1.0));
    }
}
