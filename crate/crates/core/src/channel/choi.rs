use serde::{Deserialize, Serialize};

use super::{CpMap, KrausChannel};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix, Keep};
use crate::tolerance::Tolerances;

/// Choi matrix `Σ_ij T(|i⟩⟨j|) ⊗ |i⟩⟨j|` on `C^out ⊗ C^in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiMatrix {
    in_dim: usize,
    out_dim: usize,
    #[serde(with = "crate::io::matrix")]
    matrix: CMatrix,
}

impl ChoiMatrix {
    /// Validates complete positivity and the partial-trace condition.
    pub fn new(in_dim: usize, out_dim: usize, matrix: CMatrix, tol: &Tolerances) -> Result<Self> {
        let n = in_dim * out_dim;
        if matrix.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "Choi matrix is {}x{}, expected {n}x{n}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !linalg::is_finite(&matrix) {
            return Err(Error::NonFinite);
        }
        let matrix = linalg::hermitize(&matrix);
        let min = linalg::min_eigenvalue(&matrix);
        if min < -tol.psd {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
        let reduced = linalg::partial_trace(&matrix, out_dim, in_dim, Keep::Second);
        let residual = linalg::spectral_norm(&(reduced - linalg::identity(in_dim)));
        if residual > tol.tp {
            return Err(Error::NotTracePreserving { residual });
        }
        Ok(Self { in_dim, out_dim, matrix })
    }

    pub(crate) fn from_parts_unchecked(in_dim: usize, out_dim: usize, matrix: CMatrix) -> Self {
        Self { in_dim, out_dim, matrix }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.matrix).re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigenvalues(&self.matrix)
    }

    pub fn rank(&self, tol: f64) -> usize {
        self.eigenvalues().iter().filter(|&&x| x > tol).count()
    }

    /// Kraus operators `√μ_k · reshape(v_k)` for eigenpairs with `μ_k > rank_tol`.
    pub fn to_kraus(&self, rank_tol: f64) -> Result<KrausChannel> {
        let min = linalg::min_eigenvalue(&self.matrix);
        let scale = linalg::max_abs(&self.matrix).max(1.0);
        if min < -Tolerances::default().psd * scale {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
        let ch = self.to_kraus_unchecked(rank_tol);
        KrausChannel::from_cp_map(ch.map, &Tolerances { tp: 1e-7, ..Default::default() })
    }

    pub(crate) fn to_kraus_unchecked(&self, rank_tol: f64) -> KrausChannel {
        let map = self.to_cp_map(rank_tol);
        KrausChannel { map }
    }

    pub(crate) fn to_cp_map(&self, rank_tol: f64) -> CpMap {
        let e = linalg::eigh(&self.matrix);
        let (din, dout) = (self.in_dim, self.out_dim);
        let mut kraus: Vec<CMatrix> = e
            .values
            .iter()
            .enumerate()
            .rev()
            .filter(|(_, &mu)| mu > rank_tol)
            .map(|(k, &mu)| {
                let s = mu.sqrt();
                CMatrix::from_fn(dout, din, |b, a| e.vectors[(b * din + a, k)] * c64(s, 0.0))
            })
            .collect();
        if kraus.is_empty() {
            kraus.push(CMatrix::zeros(dout, din));
        }
        CpMap { in_dim: din, out_dim: dout, kraus }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::presets::Preset;
    use crate::channel::random::random_channel;
    use crate::rng;

    /// Direct evaluation of Σ_ij T(|i⟩⟨j|) ⊗ |i⟩⟨j| by applying the channel to matrix units.
    fn choi_by_matrix_units(ch: &KrausChannel) -> CMatrix {
        let (din, dout) = (ch.in_dim(), ch.out_dim());
        let mut c = CMatrix::zeros(din * dout, din * dout);
        for i in 0..din {
            for j in 0..din {
                let mut e = CMatrix::zeros(din, din);
                e[(i, j)] = linalg::ONE;
                let mut unit = CMatrix::zeros(din, din);
                unit[(i, j)] = linalg::ONE;
                c += linalg::kron(&ch.apply(&e), &unit);
            }
        }
        c
    }

    #[test]
    fn identity_choi_is_rank_one_with_eigenvalue_two() {
        let c = KrausChannel::identity(2).choi();
        let ev = c.eigenvalues();
        assert!((ev[3] - 2.0).abs() < 1e-12);
        assert!(ev[..3].iter().all(|x| x.abs() < 1e-12));
        assert_eq!(c.rank(1e-9), 1);
        assert!((c.trace() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn completely_depolarizing_choi_is_half_identity() {
        let c = Preset::Depolarizing(1.0).channel().unwrap().choi();
        assert!(linalg::max_abs(&(c.matrix() - linalg::identity(4) * c64(0.5, 0.0))) < 1e-12);
        assert_eq!(c.to_kraus(1e-9).unwrap().kraus().len(), 4);
    }

    #[test]
    fn amplitude_damping_choi_matches_matrix_unit_construction() {
        let ch = Preset::AmplitudeDamping(0.5).channel().unwrap();
        let direct = choi_by_matrix_units(&ch);
        assert!(linalg::max_abs(&(ch.choi().matrix() - &direct)) < 1e-14);
        // spectrum of the 4x4 built entry by entry: {0, 0, 1/2, 3/2}
        let ev = linalg::eigenvalues(&direct);
        let expected = [0.0, 0.0, 0.5, 1.5];
        for (a, b) in ev.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn choi_of_identity_round_trips_to_single_kraus() {
        let k = KrausChannel::identity(2).choi().to_kraus(1e-9).unwrap();
        assert_eq!(k.kraus().len(), 1);
        let op = &k.kraus()[0];
        // I up to a global phase
        let phase = op[(0, 0)];
        assert!((phase.norm() - 1.0).abs() < 1e-12);
        assert!(linalg::max_abs(&(op / phase - linalg::identity(2))) < 1e-12);
    }

    #[test]
    fn random_two_kraus_channel_recovers_rank_two() {
        let mut r = rng::stream(11, 0);
        let ch = random_channel(3, 3, 2, &mut r);
        let back = ch.choi().to_kraus(1e-9).unwrap();
        assert_eq!(back.kraus().len(), 2);
        assert!(back.choi_distance(&ch) < 1e-10);
    }

    #[test]
    fn rejects_non_psd_and_wrong_shape() {
        let tol = Tolerances::default();
        let mut m = linalg::identity(4) * c64(0.5, 0.0);
        m[(0, 0)] = c64(-0.5, 0.0);
        assert!(ChoiMatrix::new(2, 2, m, &tol).is_err());
        assert!(matches!(ChoiMatrix::new(2, 2, linalg::identity(3), &tol), Err(Error::Dimension(_))));
    }
}
