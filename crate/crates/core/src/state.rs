use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix, CVector};
use crate::tolerance::Tolerances;

/// A density operator: Hermitian, positive semidefinite, unit trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateRepr", into = "StateRepr")]
pub struct DensityState {
    matrix: CMatrix,
}

#[derive(Serialize, Deserialize)]
struct StateRepr {
    #[serde(with = "crate::io::matrix")]
    matrix: CMatrix,
}

impl TryFrom<StateRepr> for DensityState {
    type Error = Error;
    fn try_from(r: StateRepr) -> Result<Self> {
        DensityState::new(r.matrix)
    }
}

impl From<DensityState> for StateRepr {
    fn from(s: DensityState) -> Self {
        StateRepr { matrix: s.matrix }
    }
}

impl DensityState {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::with_tolerances(matrix, &Tolerances::default())
    }

    pub fn with_tolerances(matrix: CMatrix, tol: &Tolerances) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension(format!("density matrix is {}x{}", matrix.nrows(), matrix.ncols())));
        }
        if !linalg::is_finite(&matrix) {
            return Err(Error::NonFinite);
        }
        let herm = linalg::herm_residual(&matrix);
        if herm > tol.herm {
            return Err(Error::InvalidState(format!("not Hermitian (residual {herm:.3e})")));
        }
        let tr = linalg::trace(&matrix).re;
        if (tr - 1.0).abs() > tol.trace {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let matrix = linalg::hermitize(&matrix);
        let min = linalg::min_eigenvalue(&matrix);
        if min < -tol.psd {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
        Ok(Self { matrix })
    }

    /// Wraps a matrix produced by a trace-preserving computation, renormalising
    /// the trace and symmetrising without re-validating positivity.
    pub(crate) fn from_channel_output(matrix: CMatrix) -> Self {
        let m = linalg::hermitize(&matrix);
        let tr = linalg::trace(&m).re;
        Self { matrix: m / c64(tr, 0.0) }
    }

    pub fn pure(v: &CVector) -> Result<Self> {
        let n = v.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidState("zero or non-finite state vector".into()));
        }
        let u = v / c64(n, 0.0);
        Ok(Self { matrix: linalg::outer(&u) })
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self { matrix: linalg::identity(d) / c64(d as f64, 0.0) }
    }

    pub fn basis(d: usize, k: usize) -> Self {
        Self { matrix: linalg::outer(&linalg::basis_vector(d, k)) }
    }

    /// Qubit state `(I + r·σ)/2`; requires `|r| ≤ 1`.
    pub fn from_bloch(r: [f64; 3]) -> Result<Self> {
        let n = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        if n > 1.0 + 1e-12 {
            return Err(Error::InvalidState(format!("Bloch vector norm {n} exceeds 1")));
        }
        let mut m = linalg::identity(2);
        for (k, rk) in r.iter().enumerate() {
            m += linalg::pauli(k + 1) * c64(*rk, 0.0);
        }
        Ok(Self { matrix: m * c64(0.5, 0.0) })
    }

    pub fn random(d: usize, rank: usize, rng: &mut impl Rng) -> Self {
        Self { matrix: linalg::random_density(d, rank, rng) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn bloch_vector(&self) -> Option<[f64; 3]> {
        (self.dim() == 2).then(|| {
            [1, 2, 3].map(|k| linalg::hs_inner(&linalg::pauli(k), &self.matrix).re)
        })
    }

    pub fn purity(&self) -> f64 {
        linalg::hs_inner(&self.matrix, &self.matrix).re
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_inputs() {
        let not_unit = linalg::identity(2);
        assert!(matches!(DensityState::new(not_unit), Err(Error::InvalidState(_))));
        let negative = CMatrix::from_row_slice(2, 2, &[c64(1.5, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(-0.5, 0.0)]);
        assert!(matches!(DensityState::new(negative), Err(Error::NotPositive { .. })));
        let rect = CMatrix::zeros(2, 3);
        assert!(matches!(DensityState::new(rect), Err(Error::Dimension(_))));
    }

    #[test]
    fn bloch_round_trip() {
        let s = DensityState::from_bloch([0.3, -0.4, 0.5]).unwrap();
        let r = s.bloch_vector().unwrap();
        assert!((r[0] - 0.3).abs() < 1e-14 && (r[1] + 0.4).abs() < 1e-14 && (r[2] - 0.5).abs() < 1e-14);
    }
}
