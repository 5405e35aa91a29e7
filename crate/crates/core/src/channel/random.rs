//! Random channel ensembles for property tests and verification suites.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::bloch::BlochAffine;
use super::{CpMap, KrausChannel};
use crate::linalg::{self, CMatrix};

/// Traces out the environment of a Haar-random isometry `C^in → C^out ⊗ C^env`.
pub fn random_channel(in_dim: usize, out_dim: usize, env_dim: usize, rng: &mut impl Rng) -> KrausChannel {
    let big = out_dim * env_dim;
    assert!(big >= in_dim, "isometry needs out_dim * env_dim >= in_dim");
    let u = linalg::haar_unitary(big, rng);
    let kraus = (0..env_dim)
        .map(|k| CMatrix::from_fn(out_dim, in_dim, |b, a| u[(b * env_dim + k, a)]))
        .collect();
    KrausChannel { map: CpMap { in_dim, out_dim, kraus } }
}

/// Random channel with environment dimension uniform in `1..=d²`, or `2..=d²`
/// when unitaries are excluded.
pub fn random_channel_any_rank(d: usize, allow_unitary: bool, rng: &mut impl Rng) -> KrausChannel {
    let lo = if allow_unitary { 1 } else { 2 };
    let env = rng.random_range(lo..=d * d);
    random_channel(d, d, env, rng)
}

pub fn random_unitary_channel(d: usize, rng: &mut impl Rng) -> KrausChannel {
    KrausChannel::identity(d).compose_unitary(&linalg::haar_unitary(d, rng))
}

fn dirichlet4(rng: &mut impl Rng) -> [f64; 4] {
    let mut w = [0.0; 4];
    for x in w.iter_mut() {
        *x = Exp1.sample(rng);
    }
    let s: f64 = w.iter().sum();
    w.map(|x| x / s)
}

/// Unital qubit channel with λ uniform in the tetrahedron and Haar rotations;
/// the Pauli weights are kept away from a single corner so the channel is not unitary.
pub fn random_unital_qubit(rng: &mut impl Rng) -> KrausChannel {
    loop {
        let w = dirichlet4(rng);
        if w.iter().cloned().fold(0.0, f64::max) > 1.0 - 1e-3 {
            continue;
        }
        let lambda = [w[0] + w[1] - w[2] - w[3], w[0] - w[1] + w[2] - w[3], w[0] - w[1] - w[2] + w[3]];
        let u = linalg::haar_unitary(2, rng);
        let v = linalg::haar_unitary(2, rng);
        let b = BlochAffine { t: [0.0; 3], lambda, post_unitary: u, pre_unitary: v };
        return b.to_channel().expect("tetrahedron point is a channel");
    }
}

/// Generic non-unital qubit channel (Haar Stinespring, environment 2..=4).
pub fn random_nonunital_qubit(rng: &mut impl Rng) -> KrausChannel {
    loop {
        let env = rng.random_range(2..=4);
        let ch = random_channel(2, 2, env, rng);
        if ch.unital_residual() > 1e-3 {
            return ch;
        }
    }
}

impl KrausChannel {
    /// `U · T(·) · U†`.
    pub fn compose_unitary(&self, u: &CMatrix) -> KrausChannel {
        let kraus = self.kraus().iter().map(|k| u * k).collect();
        KrausChannel { map: CpMap { in_dim: self.in_dim(), out_dim: u.nrows(), kraus } }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::tolerance::Tolerances;

    #[test]
    fn random_channels_are_valid() {
        let tol = Tolerances::default();
        let mut r = rng::stream(1, 0);
        for d in 2..=4 {
            for _ in 0..20 {
                let ch = random_channel_any_rank(d, true, &mut r);
                assert!(ch.as_cp_map().tp_residual() < tol.tp);
                assert!(ch.choi().eigenvalues()[0] > -tol.psd);
            }
        }
        for _ in 0..20 {
            let u = random_unital_qubit(&mut r);
            assert!(u.is_unital(1e-9));
            assert!(!u.is_unitary(1e-9));
            assert!(random_nonunital_qubit(&mut r).unital_residual() > 1e-3);
        }
    }
}
