use serde::{Deserialize, Serialize};

use super::KrausChannel;
use crate::linalg::{self, CMatrix, Keep};

/// Isometry `V: C^in → C^out ⊗ C^env` with `T(X) = Tr_env(V X V†)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StinespringIsometry {
    pub in_dim: usize,
    pub out_dim: usize,
    pub env_dim: usize,
    #[serde(with = "crate::io::matrix")]
    pub isometry: CMatrix,
}

impl StinespringIsometry {
    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        let full = &self.isometry * x * self.isometry.adjoint();
        linalg::partial_trace(&full, self.out_dim, self.env_dim, Keep::First)
    }

    /// Complementary channel output `Tr_out(V X V†)`.
    pub fn apply_complementary(&self, x: &CMatrix) -> CMatrix {
        let full = &self.isometry * x * self.isometry.adjoint();
        linalg::partial_trace(&full, self.out_dim, self.env_dim, Keep::Second)
    }

    pub fn isometry_residual(&self) -> f64 {
        linalg::spectral_norm(&(self.isometry.adjoint() * &self.isometry - linalg::identity(self.in_dim)))
    }
}

/// Minimal dilation: the environment dimension equals the Choi rank.
pub fn stinespring(ch: &KrausChannel) -> StinespringIsometry {
    let minimal = ch.canonical();
    let ops = minimal.kraus();
    let (din, dout, env) = (ch.in_dim(), ch.out_dim(), ops.len());
    let isometry = CMatrix::from_fn(dout * env, din, |row, a| {
        let (b, k) = (row / env, row % env);
        ops[k][(b, a)]
    });
    StinespringIsometry { in_dim: din, out_dim: dout, env_dim: env, isometry }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::presets::Preset;
    use crate::channel::random::random_channel;
    use crate::rng;

    #[test]
    fn environment_dimensions() {
        assert_eq!(stinespring(&KrausChannel::identity(2)).env_dim, 1);
        assert_eq!(stinespring(&Preset::Depolarizing(1.0).channel().unwrap()).env_dim, 4);
        assert_eq!(stinespring(&Preset::Dephasing(0.5).channel().unwrap()).env_dim, 2);
    }

    #[test]
    fn identity_dilation_is_identity_up_to_phase() {
        let v = stinespring(&KrausChannel::identity(2)).isometry;
        let phase = v[(0, 0)];
        assert!(linalg::max_abs(&(v / phase - linalg::identity(2))) < 1e-12);
    }

    #[test]
    fn dilation_reproduces_channel() {
        let mut r = rng::stream(5, 0);
        for d in 2..=4 {
            let ch = random_channel(d, d, 3, &mut r);
            let s = stinespring(&ch);
            assert!(s.isometry_residual() < 1e-10);
            let x = linalg::ginibre(d, d, &mut r);
            assert!(linalg::max_abs(&(s.apply(&x) - ch.apply(&x))) < 1e-10);
        }
    }
}
