//! Channel representations and the algebra between them.

pub mod bloch;
pub mod choi;
pub mod presets;
pub mod random;
pub mod spec;
pub mod stinespring;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix};
use crate::state::DensityState;
use crate::tolerance::Tolerances;

pub use bloch::BlochAffine;
pub use choi::ChoiMatrix;
pub use presets::Preset;
pub use spec::ChannelSpec;
pub use stinespring::StinespringIsometry;

/// A completely positive map `X ↦ Σ K X K†`, not necessarily trace preserving.
///
/// Used for adjoints and other intermediate maps; [`KrausChannel`] is the
/// validated trace-preserving carrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpMap {
    in_dim: usize,
    out_dim: usize,
    #[serde(with = "crate::io::matrices")]
    kraus: Vec<CMatrix>,
}

impl CpMap {
    pub fn new(kraus: Vec<CMatrix>) -> Result<Self> {
        let first = kraus.first().ok_or_else(|| Error::Dimension("empty Kraus list".into()))?;
        let (out_dim, in_dim) = first.shape();
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Dimension("Kraus operator with zero dimension".into()));
        }
        for (k, op) in kraus.iter().enumerate() {
            if op.shape() != (out_dim, in_dim) {
                return Err(Error::Dimension(format!(
                    "Kraus operator {k} is {}x{}, expected {out_dim}x{in_dim}",
                    op.nrows(),
                    op.ncols()
                )));
            }
            if !linalg::is_finite(op) {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self { in_dim, out_dim, kraus })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.out_dim, self.out_dim);
        for k in &self.kraus {
            out += k * x * k.adjoint();
        }
        out
    }

    /// `Σ_ij T(|i⟩⟨j|) ⊗ |i⟩⟨j|`, output factor first.
    pub fn choi(&self) -> CMatrix {
        let n = self.out_dim * self.in_dim;
        let mut c = CMatrix::zeros(n, n);
        for k in &self.kraus {
            // row-major flattening of K is the vector Σ_i K|i⟩ ⊗ |i⟩
            let v = linalg::CVector::from_iterator(n, (0..self.out_dim).flat_map(|b| (0..self.in_dim).map(move |a| k[(b, a)])));
            c += &v * v.adjoint();
        }
        c
    }

    /// Spectral norm of `Σ K†K - I`.
    pub fn tp_residual(&self) -> f64 {
        let mut s = -linalg::identity(self.in_dim);
        for k in &self.kraus {
            s += k.adjoint() * k;
        }
        linalg::spectral_norm(&s)
    }

    /// Spectral norm of `Σ K K† - I` (requires equal dimensions to be meaningful).
    pub fn unital_residual(&self) -> f64 {
        let out = self.apply(&linalg::identity(self.in_dim));
        linalg::spectral_norm(&(out - linalg::identity(self.out_dim)))
    }

    /// `self ∘ inner`: apply `inner` first.
    pub fn compose(&self, inner: &CpMap) -> Result<CpMap> {
        if inner.out_dim != self.in_dim {
            return Err(Error::Dimension(format!(
                "cannot compose: inner map outputs dimension {}, outer map expects {}",
                inner.out_dim, self.in_dim
            )));
        }
        let kraus = self.kraus.iter().flat_map(|a| inner.kraus.iter().map(move |b| a * b)).collect();
        Ok(CpMap { in_dim: inner.in_dim, out_dim: self.out_dim, kraus })
    }

    pub fn tensor(&self, other: &CpMap) -> CpMap {
        let kraus = self.kraus.iter().flat_map(|a| other.kraus.iter().map(move |b| linalg::kron(a, b))).collect();
        CpMap { in_dim: self.in_dim * other.in_dim, out_dim: self.out_dim * other.out_dim, kraus }
    }

    /// Hilbert-Schmidt adjoint, Kraus operators `K†`.
    pub fn adjoint(&self) -> CpMap {
        CpMap { in_dim: self.out_dim, out_dim: self.in_dim, kraus: self.kraus.iter().map(|k| k.adjoint()).collect() }
    }

    pub fn scaled(&self, weight: f64) -> CpMap {
        let s = c64(weight.max(0.0).sqrt(), 0.0);
        CpMap { in_dim: self.in_dim, out_dim: self.out_dim, kraus: self.kraus.iter().map(|k| k * s).collect() }
    }
}

/// A completely positive trace-preserving map in Kraus form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CpMap", into = "CpMap")]
pub struct KrausChannel {
    map: CpMap,
}

impl TryFrom<CpMap> for KrausChannel {
    type Error = Error;
    fn try_from(map: CpMap) -> Result<Self> {
        KrausChannel::from_cp_map(map, &Tolerances::default())
    }
}

impl From<KrausChannel> for CpMap {
    fn from(ch: KrausChannel) -> Self {
        ch.map
    }
}

impl KrausChannel {
    pub fn new(kraus: Vec<CMatrix>) -> Result<Self> {
        Self::with_tolerances(kraus, &Tolerances::default())
    }

    pub fn with_tolerances(kraus: Vec<CMatrix>, tol: &Tolerances) -> Result<Self> {
        Self::from_cp_map(CpMap::new(kraus)?, tol)
    }

    pub fn from_cp_map(map: CpMap, tol: &Tolerances) -> Result<Self> {
        let residual = map.tp_residual();
        if residual > tol.tp {
            return Err(Error::NotTracePreserving { residual });
        }
        Ok(Self { map })
    }

    pub fn identity(d: usize) -> Self {
        Self { map: CpMap { in_dim: d, out_dim: d, kraus: vec![linalg::identity(d)] } }
    }

    pub fn in_dim(&self) -> usize {
        self.map.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.map.out_dim
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.map.kraus
    }

    pub fn as_cp_map(&self) -> &CpMap {
        &self.map
    }

    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        self.map.apply(x)
    }

    pub fn apply_state(&self, state: &DensityState) -> Result<DensityState> {
        if state.dim() != self.in_dim() {
            return Err(Error::Dimension(format!(
                "state has dimension {}, channel expects {}",
                state.dim(),
                self.in_dim()
            )));
        }
        Ok(DensityState::from_channel_output(self.apply(state.matrix())))
    }

    pub fn choi(&self) -> ChoiMatrix {
        ChoiMatrix::from_parts_unchecked(self.in_dim(), self.out_dim(), self.map.choi())
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &KrausChannel) -> Result<KrausChannel> {
        Ok(KrausChannel { map: self.map.compose(&inner.map)? })
    }

    pub fn tensor(&self, other: &KrausChannel) -> KrausChannel {
        KrausChannel { map: self.map.tensor(&other.map) }
    }

    /// The adjoint map; unital because `self` is trace preserving.
    pub fn adjoint(&self) -> CpMap {
        self.map.adjoint()
    }

    /// `(1 - w)·self + w·other`.
    pub fn mix(&self, other: &KrausChannel, w: f64) -> Result<KrausChannel> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidParameter(format!("mixing weight {w} outside [0, 1]")));
        }
        if self.in_dim() != other.in_dim() || self.out_dim() != other.out_dim() {
            return Err(Error::Dimension("mixing channels of different dimensions".into()));
        }
        let mut kraus = self.map.scaled(1.0 - w).kraus;
        kraus.extend(other.map.scaled(w).kraus);
        kraus.retain(|k| linalg::max_abs(k) > 0.0);
        Ok(KrausChannel { map: CpMap { in_dim: self.in_dim(), out_dim: self.out_dim(), kraus } })
    }

    /// Minimal Kraus representation from the Choi eigen-decomposition.
    pub fn canonical(&self) -> KrausChannel {
        self.choi().to_kraus_unchecked(Tolerances::default().psd)
    }

    pub fn choi_rank(&self, tol: f64) -> usize {
        self.choi().rank(tol)
    }

    pub fn unital_residual(&self) -> f64 {
        self.map.unital_residual()
    }

    pub fn is_unital(&self, tol: f64) -> bool {
        self.in_dim() == self.out_dim() && self.unital_residual() <= tol
    }

    pub fn is_qubit(&self) -> bool {
        self.in_dim() == 2 && self.out_dim() == 2
    }

    pub(crate) fn require_qubit(&self) -> Result<()> {
        if self.is_qubit() {
            Ok(())
        } else {
            Err(Error::NotQubit { in_dim: self.in_dim(), out_dim: self.out_dim() })
        }
    }

    pub(crate) fn require_square(&self) -> Result<usize> {
        if self.in_dim() == self.out_dim() {
            Ok(self.in_dim())
        } else {
            Err(Error::Dimension(format!(
                "operation requires equal input and output dimensions, got {} -> {}",
                self.in_dim(),
                self.out_dim()
            )))
        }
    }

    /// Trace norm of the difference of Choi matrices.
    pub fn choi_distance(&self, other: &KrausChannel) -> f64 {
        linalg::trace_norm_herm(&(self.map.choi() - other.map.choi()))
    }

    /// Whether the Choi matrix has a single eigenvalue above `tol` (unitary/isometric channel).
    pub fn is_unitary(&self, tol: f64) -> bool {
        let ev = self.choi().eigenvalues();
        ev.len() < 2 || ev[ev.len() - 2] < tol
    }
}

/// Outcome of [`validate_channel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub in_dim: usize,
    pub out_dim: usize,
    pub kraus_count: usize,
    pub tp_residual: f64,
    pub choi_min_eigenvalue: f64,
    pub tp_pass: bool,
    pub cp_pass: bool,
    pub passed: bool,
}

/// Checks trace preservation and complete positivity of a Kraus list.
pub fn validate_channel(kraus: &[CMatrix], tol: &Tolerances) -> Result<ValidationReport> {
    let map = CpMap::new(kraus.to_vec())?;
    let tp_residual = map.tp_residual();
    let choi_min_eigenvalue = linalg::min_eigenvalue(&map.choi());
    let tp_pass = tp_residual <= tol.tp;
    let cp_pass = choi_min_eigenvalue >= -tol.psd;
    Ok(ValidationReport {
        in_dim: map.in_dim,
        out_dim: map.out_dim,
        kraus_count: map.kraus.len(),
        tp_residual,
        choi_min_eigenvalue,
        tp_pass,
        cp_pass,
        passed: tp_pass && cp_pass,
    })
}

/// Extremality in the convex set of channels: `{K_i† K_j}` linearly independent
/// for a minimal Kraus representation.
pub fn is_extreme_point(ch: &KrausChannel, tol: f64) -> bool {
    extremality_margin(ch) > tol
}

/// Smallest singular value of the matrix whose columns are `vec(K_i† K_j)`,
/// zero when there are more products than the operator space can hold.
pub fn extremality_margin(ch: &KrausChannel) -> f64 {
    let minimal = ch.canonical();
    let ops = minimal.kraus();
    let d = ch.in_dim();
    let r = ops.len();
    if r * r > d * d {
        return 0.0;
    }
    let mut gram = CMatrix::zeros(d * d, r * r);
    for i in 0..r {
        for j in 0..r {
            let prod = ops[i].adjoint() * &ops[j];
            for (idx, z) in prod.iter().enumerate() {
                gram[(idx, i * r + j)] = *z;
            }
        }
    }
    gram.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::presets::Preset;

    #[test]
    fn validate_identity_and_scaled_identity() {
        let tol = Tolerances::default();
        let r = validate_channel(&[linalg::identity(2)], &tol).unwrap();
        assert!(r.passed);
        assert!(r.tp_residual == 0.0);
        let r = validate_channel(&[linalg::identity(2) * c64(0.9, 0.0)], &tol).unwrap();
        assert!(!r.passed);
        assert!((r.tp_residual - 0.19).abs() < 1e-12);
    }

    #[test]
    fn validate_amplitude_damping_by_direct_sum() {
        let ch = Preset::AmplitudeDamping(0.3).channel().unwrap();
        let r = validate_channel(ch.kraus(), &Tolerances::default()).unwrap();
        assert!(r.passed, "{r:?}");
        // Σ K†K evaluated entry by entry: diag(1, (1-γ) + γ)
        let k = ch.kraus();
        let s00 = k.iter().map(|m| m[(0, 0)].norm_sqr() + m[(1, 0)].norm_sqr()).sum::<f64>();
        let s11 = k.iter().map(|m| m[(0, 1)].norm_sqr() + m[(1, 1)].norm_sqr()).sum::<f64>();
        assert!((s00 - 1.0).abs() < 1e-15 && (s11 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn validate_rejects_mismatched_dims() {
        let err = validate_channel(&[linalg::identity(2), linalg::identity(3)], &Tolerances::default());
        assert!(matches!(err, Err(Error::Dimension(_))));
        assert!(matches!(CpMap::new(vec![]), Err(Error::Dimension(_))));
    }

    #[test]
    fn compose_tensor_adjoint() {
        let dep = Preset::Depolarizing(0.3).channel().unwrap();
        let id = KrausChannel::identity(2);
        let c = id.compose(&dep).unwrap();
        assert!(c.choi_distance(&dep) < 1e-12);
        let t = dep.tensor(&id);
        assert_eq!(t.in_dim(), 4);
        let adj = dep.adjoint();
        let out = adj.apply(&linalg::identity(2));
        assert!(linalg::max_abs(&(out - linalg::identity(2))) < 1e-12);
        assert!(id.compose(&KrausChannel::identity(3)).is_err());
    }

    #[test]
    fn extremality_of_presets() {
        let tol = 1e-9;
        let u = Preset::Unitary(linalg::pauli(2)).channel().unwrap();
        assert!(is_extreme_point(&u, tol));
        for g in [0.1, 0.5, 0.9] {
            assert!(is_extreme_point(&Preset::AmplitudeDamping(g).channel().unwrap(), tol));
        }
        for p in [0.1, 0.5, 0.9] {
            assert!(!is_extreme_point(&Preset::Depolarizing(p).channel().unwrap(), tol));
        }
    }

    #[test]
    fn amplitude_damping_gram_rank_by_hand() {
        // K1†K1 = diag(1, 1-γ), K2†K2 = γ|1⟩⟨1|, K1†K2 ∝ |0⟩⟨1|, K2†K1 ∝ |1⟩⟨0|: full rank 4
        let ch = Preset::AmplitudeDamping(0.4).channel().unwrap();
        let m = extremality_margin(&ch);
        assert!(m > 0.1, "margin {m}");
    }
}
