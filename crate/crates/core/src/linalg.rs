//! Dense complex linear algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type RMatrix = DMatrix<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c64(0.5, 0.0)
}

/// Max-entry size of the anti-Hermitian part.
pub fn herm_residual(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Hilbert-Schmidt inner product `Tr(A† B)`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Real part of `Tr(A B)` without forming the product.
pub fn re_trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn outer(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

/// Eigen-decomposition of a Hermitian matrix with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigh {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Rebuilds `Σ f(μ_k) |k⟩⟨k|`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (k, &mu) in self.values.iter().enumerate() {
            let s = f(mu);
            for r in 0..n {
                scaled[(r, k)] *= s;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

pub fn eigh(m: &CMatrix) -> Eigh {
    let h = hermitize(m);
    let eig = h.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Eigh { values, vectors }
}

pub fn eigenvalues(m: &CMatrix) -> Vec<f64> {
    eigh(m).values
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    eigh(m).min()
}

/// Trace norm of a Hermitian matrix.
pub fn trace_norm_herm(m: &CMatrix) -> f64 {
    eigenvalues(m).iter().map(|x| x.abs()).sum()
}

/// Trace norm of an arbitrary matrix (sum of singular values).
pub fn trace_norm(m: &CMatrix) -> f64 {
    m.clone().singular_values().iter().sum()
}

pub fn spectral_norm(m: &CMatrix) -> f64 {
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

/// Square root of a positive semidefinite matrix; negative eigenvalues are clipped.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    eigh(m).map(|x| x.max(0.0).sqrt())
}

/// `exp(iH)` for Hermitian `H`.
pub fn expi_hermitian(h: &CMatrix) -> CMatrix {
    let e = eigh(h);
    let n = e.values.len();
    let mut scaled = e.vectors.clone();
    for (k, &mu) in e.values.iter().enumerate() {
        let phase = C64::from_polar(1.0, mu);
        for r in 0..n {
            scaled[(r, k)] *= phase;
        }
    }
    scaled * e.vectors.adjoint()
}

/// Which tensor factor to keep in a bipartite partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keep {
    First,
    Second,
}

/// Partial trace of an operator on `C^da ⊗ C^db` (first factor is the slow index).
pub fn partial_trace(m: &CMatrix, da: usize, db: usize, keep: Keep) -> CMatrix {
    match keep {
        Keep::First => CMatrix::from_fn(da, da, |i, j| (0..db).map(|b| m[(i * db + b, j * db + b)]).sum()),
        Keep::Second => CMatrix::from_fn(db, db, |i, j| (0..da).map(|a| m[(a * db + i, a * db + j)]).sum()),
    }
}

/// Partial transpose on the second factor of `C^da ⊗ C^db`.
pub fn partial_transpose(m: &CMatrix, da: usize, db: usize) -> CMatrix {
    CMatrix::from_fn(da * db, da * db, |r, c| {
        let (a, b) = (r / db, r % db);
        let (a2, b2) = (c / db, c % db);
        m[(a * db + b2, a2 * db + b)]
    })
}

pub fn pauli(k: usize) -> CMatrix {
    match k {
        0 => identity(2),
        1 => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        2 => CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        3 => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        _ => panic!("pauli index {k} out of range"),
    }
}

/// Hermitian matrix from `d²` real coordinates: diagonal first, then
/// (re, im) pairs of the strict upper triangle in row order.
pub fn hermitian_from_params(x: &[f64], d: usize) -> CMatrix {
    debug_assert_eq!(x.len(), d * d);
    let mut h = zeros(d, d);
    for i in 0..d {
        h[(i, i)] = c64(x[i], 0.0);
    }
    let mut k = d;
    for i in 0..d {
        for j in (i + 1)..d {
            let z = c64(x[k], x[k + 1]);
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
            k += 2;
        }
    }
    h
}

/// Orthonormal (Hilbert-Schmidt) basis of the traceless Hermitian `d×d` matrices.
pub fn traceless_hermitian_basis(d: usize) -> Vec<CMatrix> {
    let mut basis = Vec::with_capacity(d * d - 1);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..d {
        for j in (i + 1)..d {
            let mut sym = zeros(d, d);
            sym[(i, j)] = c64(s, 0.0);
            sym[(j, i)] = c64(s, 0.0);
            basis.push(sym);
            let mut asym = zeros(d, d);
            asym[(i, j)] = c64(0.0, -s);
            asym[(j, i)] = c64(0.0, s);
            basis.push(asym);
        }
    }
    for l in 1..d {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut diag = zeros(d, d);
        for k in 0..l {
            diag[(k, k)] = c64(norm, 0.0);
        }
        diag[(l, l)] = c64(-(l as f64) * norm, 0.0);
        basis.push(diag);
    }
    basis
}

pub fn ginibre(rows: usize, cols: usize, rng: &mut impl Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Haar-distributed unitary via QR of a Ginibre matrix with phase correction.
pub fn haar_unitary(n: usize, rng: &mut impl Rng) -> CMatrix {
    let qr = ginibre(n, n, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..n {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for row in 0..n {
            q[(row, k)] *= phase;
        }
    }
    q
}

pub fn random_pure(d: usize, rng: &mut impl Rng) -> CVector {
    let g = ginibre(d, 1, rng);
    let v = CVector::from_iterator(d, g.iter().copied());
    let n = v.norm();
    v / c64(n, 0.0)
}

/// Random density matrix `G G† / Tr` with a `d × rank` Ginibre factor.
pub fn random_density(d: usize, rank: usize, rng: &mut impl Rng) -> CMatrix {
    let g = ginibre(d, rank.max(1), rng);
    let m = &g * g.adjoint();
    let t = trace(&m).re;
    m / c64(t, 0.0)
}

pub fn basis_vector(d: usize, k: usize) -> CVector {
    let mut v = CVector::zeros(d);
    v[k] = ONE;
    v
}

/// Normalises a complex vector given by `2d` real coordinates (re, im interleaved).
pub fn unit_vector_from_params(x: &[f64]) -> Option<CVector> {
    let d = x.len() / 2;
    let v = CVector::from_fn(d, |i, _| c64(x[2 * i], x[2 * i + 1]));
    let n = v.norm();
    (n > 1e-300).then(|| v / c64(n, 0.0))
}

pub fn params_from_vector(v: &CVector) -> Vec<f64> {
    v.iter().flat_map(|z| [z.re, z.im]).collect()
}

/// Von Neumann entropy in bits, with eigenvalues below `floor` contributing zero.
pub fn entropy_bits(m: &CMatrix, floor: f64) -> f64 {
    eigenvalues(m)
        .into_iter()
        .filter(|&x| x > floor)
        .map(|x| -x * x.log2())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..6 {
            let u = haar_unitary(n, &mut rng);
            assert!(max_abs(&(u.adjoint() * &u - identity(n))) < 1e-12);
        }
    }

    #[test]
    fn eigh_sorted_and_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = ginibre(5, 5, &mut rng);
        let h = hermitize(&g);
        let e = eigh(&h);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        assert!(max_abs(&(e.map(|x| x) - &h)) < 1e-12);
    }

    #[test]
    fn partial_trace_of_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_density(2, 2, &mut rng);
        let b = random_density(3, 3, &mut rng);
        let ab = kron(&a, &b);
        assert!(max_abs(&(partial_trace(&ab, 2, 3, Keep::First) - &a)) < 1e-12);
        assert!(max_abs(&(partial_trace(&ab, 2, 3, Keep::Second) - &b)) < 1e-12);
        let pt = partial_transpose(&ab, 2, 3);
        assert!(max_abs(&(pt - kron(&a, &b.transpose()))) < 1e-12);
    }

    #[test]
    fn traceless_basis_is_orthonormal() {
        let basis = traceless_hermitian_basis(3);
        assert_eq!(basis.len(), 8);
        for (i, a) in basis.iter().enumerate() {
            assert!(trace(a).norm() < 1e-14);
            for (j, b) in basis.iter().enumerate() {
                let ip = hs_inner(a, b);
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((ip - c64(expected, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn expi_is_unitary() {
        let h = hermitian_from_params(&[0.3, -0.2, 0.5, 0.1, 0.7, -0.4, 0.2, 0.9, 0.05], 3);
        let u = expi_hermitian(&h);
        assert!(max_abs(&(u.adjoint() * &u - identity(3))) < 1e-12);
    }
}
