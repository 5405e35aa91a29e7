//! Affine Bloch-ball form of qubit channels.
//!
//! Every qubit channel acts as `ρ ↦ U · C[t, λ](V ρ V†) · U†`, where
//! `C[t, λ]` maps the Bloch vector `r` to `t + diag(λ) r`. The rotations are
//! obtained from a singular value decomposition of the 3×3 matrix of the
//! channel on the Pauli operators, with both orthogonal factors forced into
//! SO(3); any reflection is absorbed into the sign of `λ_z`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{ChoiMatrix, KrausChannel};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix};
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochAffine {
    pub t: [f64; 3],
    pub lambda: [f64; 3],
    #[serde(rename = "U", with = "crate::io::matrix")]
    pub post_unitary: CMatrix,
    #[serde(rename = "V", with = "crate::io::matrix")]
    pub pre_unitary: CMatrix,
}

/// Translation `t_i = Tr(σ_i N(I))/2` and linear part `M_ij = Tr(σ_i N(σ_j))/2`.
pub fn affine_parts(ch: &KrausChannel) -> Result<(Vector3<f64>, Matrix3<f64>)> {
    ch.require_qubit()?;
    let n_id = ch.apply(&linalg::identity(2));
    let t = Vector3::from_fn(|i, _| 0.5 * linalg::hs_inner(&linalg::pauli(i + 1), &n_id).re);
    let images: Vec<CMatrix> = (1..4).map(|j| ch.apply(&linalg::pauli(j))).collect();
    let m = Matrix3::from_fn(|i, j| 0.5 * linalg::hs_inner(&linalg::pauli(i + 1), &images[j]).re);
    Ok((t, m))
}

/// Bloch rotation induced by conjugation with a 2×2 unitary.
pub fn rotation_of(u: &CMatrix) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| {
        let img = u * linalg::pauli(j + 1) * u.adjoint();
        0.5 * linalg::hs_inner(&linalg::pauli(i + 1), &img).re
    })
}

/// An SU(2) element whose conjugation action is the rotation `r`.
pub fn unitary_of_rotation(r: &Matrix3<f64>) -> CMatrix {
    // quaternion (w, x, y, z) by Shepperd's method
    let tr = r.trace();
    let (w, x, y, z);
    if tr > r[(0, 0)] && tr > r[(1, 1)] && tr > r[(2, 2)] {
        let s = (1.0 + tr).sqrt() * 2.0;
        w = 0.25 * s;
        x = (r[(2, 1)] - r[(1, 2)]) / s;
        y = (r[(0, 2)] - r[(2, 0)]) / s;
        z = (r[(1, 0)] - r[(0, 1)]) / s;
    } else if r[(0, 0)] > r[(1, 1)] && r[(0, 0)] > r[(2, 2)] {
        let s = (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt() * 2.0;
        w = (r[(2, 1)] - r[(1, 2)]) / s;
        x = 0.25 * s;
        y = (r[(0, 1)] + r[(1, 0)]) / s;
        z = (r[(0, 2)] + r[(2, 0)]) / s;
    } else if r[(1, 1)] > r[(2, 2)] {
        let s = (1.0 + r[(1, 1)] - r[(0, 0)] - r[(2, 2)]).sqrt() * 2.0;
        w = (r[(0, 2)] - r[(2, 0)]) / s;
        x = (r[(0, 1)] + r[(1, 0)]) / s;
        y = 0.25 * s;
        z = (r[(1, 2)] + r[(2, 1)]) / s;
    } else {
        let s = (1.0 + r[(2, 2)] - r[(0, 0)] - r[(1, 1)]).sqrt() * 2.0;
        w = (r[(1, 0)] - r[(0, 1)]) / s;
        x = (r[(0, 2)] + r[(2, 0)]) / s;
        y = (r[(1, 2)] + r[(2, 1)]) / s;
        z = 0.25 * s;
    }
    let n = (w * w + x * x + y * y + z * z).sqrt();
    let (w, x, y, z) = (w / n, x / n, y / n, z / n);
    // U = w I - i (x X + y Y + z Z)
    linalg::identity(2) * c64(w, 0.0)
        - (linalg::pauli(1) * c64(x, 0.0) + linalg::pauli(2) * c64(y, 0.0) + linalg::pauli(3) * c64(z, 0.0)) * linalg::I
}

/// Rotation-constrained (signed) SVD: `m = r_u · diag(s) · r_v` with `r_u, r_v ∈ SO(3)`.
pub fn signed_svd(m: &Matrix3<f64>) -> (Matrix3<f64>, [f64; 3], Matrix3<f64>) {
    let svd = m.svd(true, true);
    let mut w = svd.u.expect("requested U");
    let mut vt = svd.v_t.expect("requested V^T");
    let mut s = [svd.singular_values[0], svd.singular_values[1], svd.singular_values[2]];
    // nalgebra does not sort singular values
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let w0 = w;
    let vt0 = vt;
    for (dst, &src) in order.iter().enumerate() {
        w.set_column(dst, &w0.column(src));
        vt.set_row(dst, &vt0.row(src));
    }
    s = order.map(|k| s[k]);
    if w.determinant() < 0.0 {
        w.set_column(2, &(-w.column(2)));
        s[2] = -s[2];
    }
    if vt.determinant() < 0.0 {
        vt.set_row(2, &(-vt.row(2)));
        s[2] = -s[2];
    }
    (w, s, vt)
}

pub fn to_bloch_affine(ch: &KrausChannel) -> Result<BlochAffine> {
    let (t, m) = affine_parts(ch)?;
    let (r_u, lambda, r_v) = signed_svd(&m);
    let t_rot = r_u.transpose() * t;
    Ok(BlochAffine {
        t: [t_rot[0], t_rot[1], t_rot[2]],
        lambda,
        post_unitary: unitary_of_rotation(&r_u),
        pre_unitary: unitary_of_rotation(&r_v),
    })
}

impl BlochAffine {
    /// Linear extension of the affine map to all 2×2 matrices.
    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        let y = &self.pre_unitary * x * self.pre_unitary.adjoint();
        let y0 = linalg::trace(&y);
        let mut out = linalg::identity(2) * y0;
        for k in 0..3 {
            let yk = linalg::hs_inner(&linalg::pauli(k + 1), &y);
            let zk = y0 * c64(self.t[k], 0.0) + yk * c64(self.lambda[k], 0.0);
            out += linalg::pauli(k + 1) * zk;
        }
        out *= c64(0.5, 0.0);
        &self.post_unitary * out * self.post_unitary.adjoint()
    }

    pub fn choi_matrix(&self) -> CMatrix {
        let mut c = CMatrix::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                let mut e = CMatrix::zeros(2, 2);
                e[(i, j)] = linalg::ONE;
                c += linalg::kron(&self.apply(&e), &e);
            }
        }
        c
    }

    /// Kraus form of the represented map; fails if the parameters are not CP.
    pub fn to_channel(&self) -> Result<KrausChannel> {
        let tol = Tolerances { tp: 1e-8, ..Default::default() };
        let choi = ChoiMatrix::new(2, 2, self.choi_matrix(), &tol)?;
        choi.to_kraus(1e-12)
    }

    /// Choi trace-norm distance between this form and `ch`.
    pub fn reconstruction_error(&self, ch: &KrausChannel) -> f64 {
        linalg::trace_norm_herm(&(self.choi_matrix() - ch.as_cp_map().choi()))
    }

    pub fn translation_norm(&self) -> f64 {
        self.t.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_unital(&self, tol: f64) -> bool {
        self.translation_norm() <= tol
    }
}

/// Exact trace-norm contraction coefficient of a qubit channel: the largest
/// singular value of the linear part, with the maximising Bloch axis.
pub fn qubit_contraction(ch: &KrausChannel) -> Result<(f64, Vector3<f64>)> {
    let (_, m) = affine_parts(ch)?;
    let svd = m.svd(true, true);
    let vt = svd.v_t.expect("requested V^T");
    let (k, s) = svd
        .singular_values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, s)| (k, *s))
        .expect("three singular values");
    let axis = vt.row(k).transpose();
    Ok((s, axis))
}

pub(crate) fn require_unital(b: &BlochAffine, tol: f64) -> Result<()> {
    if b.is_unital(tol) {
        Ok(())
    } else {
        Err(Error::NotUnital { translation: b.translation_norm() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::presets::Preset;
    use crate::channel::random::random_channel;
    use crate::rng;
    use crate::state::DensityState;

    fn close3(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn identity_and_depolarizing() {
        let b = to_bloch_affine(&KrausChannel::identity(2)).unwrap();
        assert!(close3(b.t, [0.0; 3], 1e-12) && close3(b.lambda, [1.0; 3], 1e-12));
        let b = to_bloch_affine(&Preset::Depolarizing(0.3).channel().unwrap()).unwrap();
        assert!(close3(b.t, [0.0; 3], 1e-12) && close3(b.lambda, [0.7; 3], 1e-12));
    }

    #[test]
    fn amplitude_damping_by_pauli_evaluation() {
        let g: f64 = 0.36;
        let ch = Preset::AmplitudeDamping(g).channel().unwrap();
        let (t, m) = affine_parts(&ch).unwrap();
        assert!((t[2] - g).abs() < 1e-12 && t[0].abs() < 1e-12 && t[1].abs() < 1e-12);
        let expected = Matrix3::from_diagonal(&Vector3::new((1.0 - g).sqrt(), (1.0 - g).sqrt(), 1.0 - g));
        assert!((m - expected).abs().max() < 1e-12);
        let b = to_bloch_affine(&ch).unwrap();
        assert!(b.reconstruction_error(&ch) < 1e-9);
        // AD is already diagonal: translation stays on the z axis up to the frame
        assert!((b.translation_norm() - g).abs() < 1e-12);
    }

    #[test]
    fn rotation_round_trip() {
        let mut r = rng::stream(9, 0);
        for _ in 0..50 {
            let u = linalg::haar_unitary(2, &mut r);
            let rot = rotation_of(&u);
            assert!((rot.determinant() - 1.0).abs() < 1e-10);
            let back = rotation_of(&unitary_of_rotation(&rot));
            assert!((back - rot).abs().max() < 1e-10);
        }
    }

    #[test]
    fn random_reconstruction() {
        let mut r = rng::stream(10, 0);
        for _ in 0..100 {
            let env = rand::Rng::random_range(&mut r, 1..=4);
            let ch = random_channel(2, 2, env, &mut r);
            let b = to_bloch_affine(&ch).unwrap();
            assert!(b.reconstruction_error(&ch) < 1e-7);
            assert!(b.translation_norm() <= 1.0 + 1e-12);
            assert!(b.lambda.iter().all(|l| l.abs() <= 1.0 + 1e-12));
            let rebuilt = b.to_channel().unwrap();
            let s = DensityState::random(2, 2, &mut r);
            let diff = ch.apply(s.matrix()) - rebuilt.apply(s.matrix());
            assert!(linalg::trace_norm_herm(&diff) < 1e-7);
        }
    }

    #[test]
    fn non_qubit_rejected() {
        let mut r = rng::stream(10, 1);
        assert!(matches!(to_bloch_affine(&random_channel(3, 3, 2, &mut r)), Err(Error::NotQubit { .. })));
    }

    #[test]
    fn qubit_contraction_of_amplitude_damping() {
        let (eta, _) = qubit_contraction(&Preset::AmplitudeDamping(0.36).channel().unwrap()).unwrap();
        assert!((eta - 0.8).abs() < 1e-12);
    }

}
