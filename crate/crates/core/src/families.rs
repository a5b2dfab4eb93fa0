//! Generators for the state families used by the identification tasks,
//! plus the one-sided unitaries that connect members of a family.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::statespace::{apply_local, max_abs, Cut, Layout, StateError, StateVector, TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FamilyError {
    #[error("Bell index {0} out of range 1..=4")]
    BellIndex(usize),
    #[error("local dimension {0} must be at least 2")]
    Dimension(usize),
    #[error("Weyl label ({a}, {b}) out of range for dimension {d}")]
    WeylLabel { a: usize, b: usize, d: usize },
    #[error("GHZ label {alpha} out of range for the {family} family")]
    GhzLabel { family: GhzFamily, alpha: usize },
    #[error("expected a {expected} label, got a {got} label")]
    WrongFamily { expected: GhzFamily, got: GhzFamily },
    #[error("no connecting unitary: left reductions differ by {deviation:.3e}")]
    NoConnectingUnitary { deviation: f64 },
    #[error("states do not share a layout")]
    LayoutMismatch,
    #[error(transparent)]
    State(#[from] StateError),
}

/// Index of one of the four two-qubit Bell states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BellIndex(u8);

impl BellIndex {
    pub fn new(i: usize) -> Result<Self, FamilyError> {
        if (1..=4).contains(&i) {
            Ok(Self(i as u8))
        } else {
            Err(FamilyError::BellIndex(i))
        }
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> [BellIndex; 4] {
        [Self(1), Self(2), Self(3), Self(4)]
    }
}

/// Label `(a, b)` of the generalized Pauli `X^a Z^b` in dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WeylLabel {
    a: usize,
    b: usize,
    d: usize,
}

impl WeylLabel {
    pub fn new(a: usize, b: usize, d: usize) -> Result<Self, FamilyError> {
        if d < 2 {
            return Err(FamilyError::Dimension(d));
        }
        if a >= d || b >= d {
            return Err(FamilyError::WeylLabel { a, b, d });
        }
        Ok(Self { a, b, d })
    }

    pub fn shift(self) -> usize {
        self.a
    }

    pub fn phase(self) -> usize {
        self.b
    }

    pub fn dim(self) -> usize {
        self.d
    }

    /// All `d²` labels, shift-major.
    pub fn all(d: usize) -> Result<Vec<WeylLabel>, FamilyError> {
        if d < 2 {
            return Err(FamilyError::Dimension(d));
        }
        Ok((0..d)
            .flat_map(|a| (0..d).map(move |b| WeylLabel { a, b, d }))
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GhzFamily {
    ThreeQubit,
    FourQubit,
}

impl GhzFamily {
    pub fn size(self) -> usize {
        match self {
            GhzFamily::ThreeQubit => 8,
            GhzFamily::FourQubit => 16,
        }
    }
}

impl std::fmt::Display for GhzFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GhzFamily::ThreeQubit => "three-qubit",
            GhzFamily::FourQubit => "four-qubit",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GhzLabel {
    family: GhzFamily,
    alpha: usize,
}

impl GhzLabel {
    pub fn new(family: GhzFamily, alpha: usize) -> Result<Self, FamilyError> {
        if alpha == 0 || alpha > family.size() {
            return Err(FamilyError::GhzLabel { family, alpha });
        }
        Ok(Self { family, alpha })
    }

    pub fn three(alpha: usize) -> Result<Self, FamilyError> {
        Self::new(GhzFamily::ThreeQubit, alpha)
    }

    pub fn four(alpha: usize) -> Result<Self, FamilyError> {
        Self::new(GhzFamily::FourQubit, alpha)
    }

    pub fn family(self) -> GhzFamily {
        self.family
    }

    pub fn alpha(self) -> usize {
        self.alpha
    }
}

fn ket(bits: &str) -> usize {
    usize::from_str_radix(bits, 2).expect("binary literal")
}

fn sparse_state(layout: Layout, terms: &[(usize, f64)]) -> StateVector {
    let mut amps = vec![C64::new(0.0, 0.0); layout.total_dim()];
    for &(i, a) in terms {
        amps[i] += C64::new(a, 0.0);
    }
    StateVector::new(layout, amps).expect("family state is normalized")
}

pub fn bell(i: BellIndex) -> StateVector {
    let h = FRAC_1_SQRT_2;
    let terms: [(usize, f64); 2] = match i.get() {
        1 => [(0b00, h), (0b11, h)],
        2 => [(0b00, h), (0b11, -h)],
        3 => [(0b01, h), (0b10, h)],
        _ => [(0b01, h), (0b10, -h)],
    };
    sparse_state(Layout::qubits(&["A", "B"]), &terms)
}

pub fn bell_basis() -> Vec<StateVector> {
    BellIndex::all().into_iter().map(bell).collect()
}

/// `Σ_j |jj⟩ / √d` on parties A and B.
pub fn gamma(d: usize) -> Result<StateVector, FamilyError> {
    if d < 2 {
        return Err(FamilyError::Dimension(d));
    }
    let layout = Layout::parties(&[("A", d), ("B", d)])?;
    let a = 1.0 / (d as f64).sqrt();
    let terms: Vec<(usize, f64)> = (0..d).map(|j| (j * d + j, a)).collect();
    Ok(sparse_state(layout, &terms))
}

/// `X^a Z^b` with `X|j⟩ = |j+1 mod d⟩` and `Z|j⟩ = ω^j |j⟩`.
pub fn weyl_unitary(w: WeylLabel) -> DMatrix<C64> {
    let d = w.d;
    let omega = 2.0 * PI / d as f64;
    let mut u = DMatrix::zeros(d, d);
    for j in 0..d {
        let phase = omega * ((w.b * j) % d) as f64;
        u[((j + w.a) % d, j)] = C64::from_polar(1.0, phase);
    }
    u
}

/// `(U_w ⊗ I) |Γ⟩`.
pub fn ges_state(w: WeylLabel) -> StateVector {
    let g = gamma(w.d).expect("dimension validated by label");
    let amps = apply_local(g.amplitudes(), g.layout(), &[0], &weyl_unitary(w));
    StateVector::new(g.layout().clone(), amps).expect("unitary preserves norm")
}

/// The `d²` generalized Bell states, shift-major.
pub fn ges_basis(d: usize) -> Result<Vec<StateVector>, FamilyError> {
    Ok(WeylLabel::all(d)?.into_iter().map(ges_state).collect())
}

pub fn ghz3(label: GhzLabel) -> Result<StateVector, FamilyError> {
    if label.family != GhzFamily::ThreeQubit {
        return Err(FamilyError::WrongFamily {
            expected: GhzFamily::ThreeQubit,
            got: label.family,
        });
    }
    const PAIRS: [(&str, &str); 4] = [
        ("000", "111"),
        ("001", "110"),
        ("010", "101"),
        ("100", "011"),
    ];
    let (x, y) = PAIRS[(label.alpha - 1) / 2];
    let sign = if label.alpha % 2 == 1 { 1.0 } else { -1.0 };
    let h = FRAC_1_SQRT_2;
    Ok(sparse_state(
        Layout::qubits(&["A", "B", "C"]),
        &[(ket(x), h), (ket(y), sign * h)],
    ))
}

pub fn ghz4(label: GhzLabel) -> Result<StateVector, FamilyError> {
    if label.family != GhzFamily::FourQubit {
        return Err(FamilyError::WrongFamily {
            expected: GhzFamily::FourQubit,
            got: label.family,
        });
    }
    // each row lists the four kets shared by a block of four labels
    const ROWS: [[&str; 4]; 4] = [
        ["0000", "0111", "1010", "1101"],
        ["0001", "0110", "1011", "1100"],
        ["0010", "0101", "1000", "1111"],
        ["0011", "0100", "1001", "1110"],
    ];
    // within a block: ±, then the second pair flipped (−, ∓)
    const SIGNS: [[f64; 4]; 4] = [
        [1.0, 1.0, 1.0, 1.0],
        [1.0, -1.0, 1.0, -1.0],
        [1.0, 1.0, -1.0, -1.0],
        [1.0, -1.0, -1.0, 1.0],
    ];
    let idx = label.alpha - 1;
    let row = ROWS[idx / 4];
    let signs = SIGNS[idx % 4];
    let terms: Vec<(usize, f64)> = row
        .iter()
        .zip(signs)
        .map(|(k, s)| (ket(k), 0.5 * s))
        .collect();
    Ok(sparse_state(Layout::qubits(&["A", "B", "C", "D"]), &terms))
}

pub fn ghz3_basis() -> Vec<StateVector> {
    (1..=8)
        .map(|a| ghz3(GhzLabel::three(a).unwrap()).unwrap())
        .collect()
}

pub fn ghz4_basis() -> Vec<StateVector> {
    (1..=16)
        .map(|a| ghz4(GhzLabel::four(a).unwrap()).unwrap())
        .collect()
}

/// Orthonormal completion of the column space of `range`, by Gram–Schmidt over
/// the standard basis vectors in order.
fn complement_basis(range: &[DVector<C64>], dim: usize) -> Vec<DVector<C64>> {
    let mut basis: Vec<DVector<C64>> = range.to_vec();
    let mut extra = Vec::new();
    for i in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut v = DVector::zeros(dim);
        v[i] = C64::new(1.0, 0.0);
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dotc(&v);
                v -= q * proj;
            }
        }
        let n = v.norm();
        if n > 1e-8 {
            v /= C64::new(n, 0.0);
            basis.push(v.clone());
            extra.push(v);
        }
    }
    extra
}

/// Orthonormal basis of the column space of `m`, from its SVD.
fn column_space(m: &DMatrix<C64>) -> Vec<DVector<C64>> {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested left singular vectors");
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > 1e-10)
        .map(|(i, _)| u.column(i).into_owned())
        .collect()
}

/// A unitary `U` on the right side of `cut` with `(I ⊗ U) src = dst`.
///
/// Exists exactly when the left-side reductions of `src` and `dst` agree.
/// The partial isometry `M_dstᵀ pinv(M_srcᵀ)` is completed on the kernel by
/// pairing the Gram–Schmidt completions of the two column spaces.
pub fn connecting_unitary(
    src: &StateVector,
    dst: &StateVector,
    cut: &Cut,
) -> Result<DMatrix<C64>, FamilyError> {
    if src.layout() != dst.layout() {
        return Err(FamilyError::LayoutMismatch);
    }
    let (l, r) = cut.positions(src.layout())?;
    let deviation = max_abs(&(src.reduced_matrix(&l) - dst.reduced_matrix(&l)));
    if deviation > TOL {
        return Err(FamilyError::NoConnectingUnitary { deviation });
    }
    let ms = src.reshape(&l, &r).transpose();
    let md = dst.reshape(&l, &r).transpose();
    let pinv = ms
        .clone()
        .pseudo_inverse(1e-10)
        .expect("nonnegative pseudo-inverse threshold");
    let mut u = &md * pinv;

    let rdim = ms.nrows();
    let src_range = column_space(&ms);
    let dst_range = column_space(&md);
    let src_extra = complement_basis(&src_range, rdim);
    let dst_extra = complement_basis(&dst_range, rdim);
    for (p, q) in src_extra.iter().zip(&dst_extra) {
        u += q * p.adjoint();
    }

    let mapped = apply_local(src.amplitudes(), src.layout(), &r, &u);
    let residual = mapped
        .iter()
        .zip(dst.amplitudes())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    if residual > TOL {
        return Err(FamilyError::NoConnectingUnitary {
            deviation: residual,
        });
    }
    Ok(u)
}

/// `‖(I ⊗ U) src − dst‖` with `U` acting on the right side of `cut`.
pub fn connecting_residual(
    src: &StateVector,
    dst: &StateVector,
    cut: &Cut,
    u: &DMatrix<C64>,
) -> Result<f64, FamilyError> {
    let (_, r) = cut.positions(src.layout())?;
    let mapped = apply_local(src.amplitudes(), src.layout(), &r, u);
    Ok(mapped
        .iter()
        .zip(dst.amplitudes())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// Max-norm distance of `U†U` from the identity.
pub fn unitarity_defect(u: &DMatrix<C64>) -> f64 {
    let n = u.nrows();
    max_abs(&(u.adjoint() * u - DMatrix::identity(n, n)))
}
