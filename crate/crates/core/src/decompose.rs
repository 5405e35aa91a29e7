//! Splitting qubit channels into a unitary or extremal part and an
//! entanglement breaking remainder, and the constant `p(N)` derived from it.

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::bloch::{self, BlochAffine};
use crate::channel::{is_extreme_point, ChoiMatrix, KrausChannel};
use crate::contraction::composite_choi_min_eigenvalue;
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix, Keep, RMatrix};
use crate::optim;
use crate::rng::stream;
use crate::tolerance::Tolerances;

/// Denominator in the lower bound `p₂ ≥ q² λ_min(C_{M†∘M}) / 204800`.
pub const P2_DENOMINATOR: f64 = 204800.0;

/// Channels whose second-largest Choi eigenvalue is below this are unitary.
pub const UNITARY_THRESHOLD: f64 = 1e-9;

/// Slack on `|λ_x| + |λ_y| + |λ_z| ≤ 1`.
pub const OCTAHEDRON_TOL: f64 = 1e-9;

const UNITAL_TOL: f64 = 1e-9;

/// Tetrahedron corners and the Pauli operator whose conjugation realises each.
const CORNERS: [[f64; 3]; 4] = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];

/// `N = (1 − p₁)·unitary_part + p₁·eb_part`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitalDecomposition {
    pub p1: f64,
    pub unitary_part: KrausChannel,
    pub eb_part: KrausChannel,
    pub corner: usize,
    pub lambda: [f64; 3],
    pub eb_lambda: [f64; 3],
}

impl UnitalDecomposition {
    /// Choi trace-norm distance between the recombined parts and `ch`.
    pub fn reconstruction_error(&self, ch: &KrausChannel) -> Result<f64> {
        Ok(self.unitary_part.mix(&self.eb_part, self.p1)?.choi_distance(ch))
    }
}

/// A witness `N ≥ q·M` with `M` extremal and non-unital.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalCertificate {
    pub q: f64,
    pub m: KrausChannel,
    pub lambda_min_choi: f64,
    pub p2_lower: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certification {
    ExactP1,
    CertifiedLowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PConstantReport {
    pub p1: f64,
    pub p2_lower: f64,
    pub p: f64,
    pub certification: Certification,
    pub unital: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<UnitalDecomposition>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<ExtremalCertificate>,
    /// Bloch vector of the replacement state used for the entanglement breaking peel.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peel_state: Option<[f64; 3]>,
}

#[derive(Debug, Clone)]
pub struct P2Options {
    pub seed: u64,
    pub candidates: usize,
    /// Best candidates that get a local refinement of the first walk direction.
    pub refine: usize,
}

impl Default for P2Options {
    fn default() -> Self {
        Self { seed: 0, candidates: 256, refine: 4 }
    }
}

fn require_non_unitary(ch: &KrausChannel) -> Result<()> {
    if ch.is_unitary(UNITARY_THRESHOLD) {
        return Err(Error::UnitaryChannel);
    }
    Ok(())
}

/// Diagonal Bloch form with `λ` inside the tetrahedron of unital qubit channels.
pub fn tetrahedron_coords(ch: &KrausChannel) -> Result<BlochAffine> {
    ch.require_qubit()?;
    let b = bloch::to_bloch_affine(ch)?;
    bloch::require_unital(&b, UNITAL_TOL)?;
    Ok(b)
}

pub fn l1(v: &[f64; 3]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// `v + s (λ − v)`: the entanglement breaking part when the corner has weight `1 − 1/s`.
fn eb_point(lambda: &[f64; 3], v: &[f64; 3], s: f64) -> [f64; 3] {
    [0, 1, 2].map(|i| v[i] + s * (lambda[i] - v[i]))
}

/// Largest `p` with `(λ − (1 − p) v) / p` in the octahedron, 0 if none.
///
/// `g(s) = ‖v + s(λ − v)‖₁` is convex and piecewise linear with knots where a
/// coordinate changes sign, so the smallest feasible `s ≥ 1` is found exactly
/// by walking the segments.
pub fn corner_weight(lambda: &[f64; 3], v: &[f64; 3]) -> f64 {
    let g = |s: f64| l1(&eb_point(lambda, v, s));
    let (mut a, mut ga) = (1.0, g(1.0));
    if ga <= 1.0 + OCTAHEDRON_TOL {
        return 1.0;
    }
    let mut knots: Vec<f64> = (0..3)
        .filter_map(|i| {
            let d = lambda[i] - v[i];
            (d != 0.0).then(|| -v[i] / d)
        })
        .filter(|&s| s > 1.0)
        .collect();
    knots.sort_by(f64::total_cmp);
    for b in knots {
        let gb = g(b);
        if gb <= 1.0 {
            let s = a + (ga - 1.0) * (b - a) / (ga - gb);
            return 1.0 / s;
        }
        if gb >= ga {
            break;
        }
        (a, ga) = (b, gb);
    }
    0.0
}

/// `N = (1 − p₁) U + p₁ B` with `U` unitary and `B` unital entanglement
/// breaking, maximising `p₁` over the four tetrahedron corners.
pub fn unital_split(ch: &KrausChannel) -> Result<UnitalDecomposition> {
    let coords = tetrahedron_coords(ch)?;
    require_non_unitary(ch)?;
    let lambda = coords.lambda;
    let (corner, p1) = CORNERS
        .iter()
        .enumerate()
        .map(|(k, v)| (k, corner_weight(&lambda, v)))
        .fold((0, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best });
    if p1 <= 0.0 {
        return Err(Error::Numerical(format!("no tetrahedron corner admits a split of lambda = {lambda:?}")));
    }
    let eb_lambda = eb_point(&lambda, &CORNERS[corner], 1.0 / p1);
    let eb = BlochAffine { t: [0.0; 3], lambda: eb_lambda, ..coords.clone() };
    let u = &coords.post_unitary * linalg::pauli(corner) * &coords.pre_unitary;
    Ok(UnitalDecomposition {
        p1,
        unitary_part: KrausChannel::new(vec![u])?,
        eb_part: eb.to_channel()?,
        corner,
        lambda,
        eb_lambda,
    })
}

/// PPT test on the Choi matrix, exact for qubit channels.
pub fn is_entanglement_breaking(ch: &KrausChannel) -> Result<bool> {
    ch.require_qubit()?;
    let c = ch.as_cp_map().choi();
    Ok(linalg::min_eigenvalue(&linalg::partial_transpose(&c, 2, 2)) >= -Tolerances::default().psd)
}

/// Largest `q` with `C_N − q C_M ⪰ 0`, 0 if `C_M` leaves the support of `C_N`.
pub fn max_dominated_weight(c_n: &CMatrix, c_m: &CMatrix) -> f64 {
    let e = linalg::eigh(c_n);
    let cut = Tolerances::default().supp * e.max().max(1.0);
    let inv_sqrt = e.map(|x| if x > cut { 1.0 / x.sqrt() } else { 0.0 });
    let proj = e.map(|x| if x > cut { 1.0 } else { 0.0 });
    let outside = c_m - &proj * c_m * &proj;
    if linalg::spectral_norm(&outside) > 1e-9 * linalg::spectral_norm(c_m).max(1.0) {
        return 0.0;
    }
    let top = linalg::eigh(&linalg::hermitize(&(&inv_sqrt * c_m * &inv_sqrt))).max();
    if top <= 0.0 {
        return 0.0;
    }
    1.0 / top
}

fn require_non_unital(ch: &KrausChannel) -> Result<()> {
    ch.require_qubit()?;
    if ch.is_unital(UNITAL_TOL) {
        return Err(Error::Unital);
    }
    Ok(())
}

/// Checks a user-supplied `(q, M)` and computes its `p₂` lower bound.
pub fn validate_certificate(ch: &KrausChannel, q: f64, m: &KrausChannel) -> Result<ExtremalCertificate> {
    let invalid = |msg: String| Err(Error::InvalidCertificate(msg));
    if !(q > 0.0 && q <= 1.0) {
        return invalid(format!("weight q = {q} outside (0, 1]"));
    }
    if !m.is_qubit() {
        return invalid("certificate channel is not a qubit channel".into());
    }
    let diff = ch.as_cp_map().choi() - m.as_cp_map().choi() * c64(q, 0.0);
    let min = linalg::min_eigenvalue(&diff);
    if min < -Tolerances::default().psd {
        return invalid(format!("N - qM is not completely positive (Choi eigenvalue {min:e})"));
    }
    if !is_extreme_point(m, 1e-9) {
        return invalid("certificate channel is not an extreme point".into());
    }
    if m.is_unital(UNITAL_TOL) {
        return invalid("certificate channel is unital".into());
    }
    Ok(certificate(q, m.clone()))
}

fn certificate(q: f64, m: KrausChannel) -> ExtremalCertificate {
    let lambda_min_choi = composite_choi_min_eigenvalue(&m);
    ExtremalCertificate { q, lambda_min_choi, p2_lower: q * q * lambda_min_choi / P2_DENOMINATOR, m }
}

/// The set `{X ⪰ 0 : Tr_out(K X K†) = I}` parametrising channels below `N`,
/// where `C_N = K K†`.
struct ChoiFace {
    k: CMatrix,
}

impl ChoiFace {
    fn new(ch: &KrausChannel) -> Self {
        let c = ch.as_cp_map().choi();
        let e = linalg::eigh(&c);
        let cut = 1e-12 * e.max().max(1.0);
        let cols: Vec<usize> = (0..e.values.len()).filter(|&k| e.values[k] > cut).collect();
        let k = CMatrix::from_fn(c.nrows(), cols.len(), |i, j| e.vectors[(i, cols[j])] * c64(e.values[cols[j]].sqrt(), 0.0));
        Self { k }
    }

    fn rank(&self) -> usize {
        self.k.ncols()
    }

    fn choi(&self, x: &CMatrix) -> CMatrix {
        linalg::hermitize(&(&self.k * x * self.k.adjoint()))
    }

    /// Hermitian `Y` (in the coordinates of `w`) with `Tr_out(K W Y W† K†) = 0`.
    fn null_directions(&self, w: &CMatrix) -> Vec<CMatrix> {
        let k = w.ncols();
        let basis: Vec<CMatrix> = (0..k * k)
            .map(|i| {
                let mut p = vec![0.0; k * k];
                p[i] = 1.0;
                linalg::hermitian_from_params(&p, k)
            })
            .collect();
        let kw = &self.k * w;
        let cols: Vec<[f64; 4]> = basis
            .iter()
            .map(|y| {
                let t = linalg::partial_trace(&(&kw * y * kw.adjoint()), 2, 2, Keep::Second);
                [t[(0, 0)].re, t[(1, 1)].re, t[(0, 1)].re, t[(0, 1)].im]
            })
            .collect();
        let gram = RMatrix::from_fn(k * k, k * k, |i, j| (0..4).map(|r| cols[i][r] * cols[j][r]).sum());
        let e = gram.symmetric_eigen();
        let scale = e.eigenvalues.iter().cloned().fold(1.0, f64::max);
        (0..k * k)
            .filter(|&i| e.eigenvalues[i] < 1e-10 * scale)
            .map(|i| {
                let v: DVector<f64> = e.eigenvectors.column(i).into_owned();
                let mut y = CMatrix::zeros(k, k);
                for (j, b) in basis.iter().enumerate() {
                    y += b * c64(v[j], 0.0);
                }
                y
            })
            .collect()
    }

    /// Moves along null directions until the face is a single point, i.e.
    /// the channel is extremal. The first direction mixes the initial null
    /// space with `first`; later ones are drawn from `rng`.
    fn walk(&self, first: &[f64], rng: &mut impl Rng) -> CMatrix {
        let mut x = linalg::identity(self.rank());
        let mut first_step = true;
        loop {
            let e = linalg::eigh(&x);
            let cut = 1e-9 * e.max();
            let keep: Vec<usize> = (0..e.values.len()).filter(|&i| e.values[i] > cut).collect();
            let w = CMatrix::from_fn(x.nrows(), keep.len(), |i, j| e.vectors[(i, keep[j])]);
            let y_diag: Vec<f64> = keep.iter().map(|&i| e.values[i]).collect();
            let null = self.null_directions(&w);
            if null.is_empty() {
                return x;
            }
            let coeffs: Vec<f64> = if first_step {
                (0..null.len()).map(|i| first.get(i).copied().unwrap_or(0.0)).collect()
            } else {
                (0..null.len()).map(|_| rng.sample(rand_distr::StandardNormal)).collect()
            };
            first_step = false;
            let mut z = CMatrix::zeros(keep.len(), keep.len());
            for (c, d) in coeffs.iter().zip(&null) {
                z += d * c64(*c, 0.0);
            }
            if z.norm() < 1e-12 {
                z = null[0].clone();
            }
            let s = CMatrix::from_fn(keep.len(), keep.len(), |i, j| z[(i, j)] / c64((y_diag[i] * y_diag[j]).sqrt(), 0.0));
            let m = linalg::min_eigenvalue(&linalg::hermitize(&s));
            if m >= 0.0 {
                return x;
            }
            let t = -1.0 / m;
            let y = CMatrix::from_diagonal(&DVector::from_iterator(keep.len(), y_diag.iter().map(|&v| c64(v, 0.0)))) + z * c64(t, 0.0);
            x = linalg::hermitize(&(&w * y * w.adjoint()));
        }
    }

    fn candidate(&self, x: &CMatrix) -> Option<ExtremalCertificate> {
        let top = linalg::eigh(x).max();
        let tol = Tolerances { tp: 1e-7, psd: 1e-9, ..Default::default() };
        let choi = ChoiMatrix::new(2, 2, self.choi(x), &tol).ok()?;
        let m = choi.to_kraus(1e-11).ok()?;
        if m.is_unital(1e-7) || !is_extreme_point(&m, 1e-7) {
            return None;
        }
        // guard the order relation against rounding in the walk
        Some(certificate((1.0 / top).min(1.0) * (1.0 - 1e-12), m))
    }
}

fn candidate_value(c: &Option<ExtremalCertificate>) -> f64 {
    c.as_ref().map_or(f64::NEG_INFINITY, |c| c.p2_lower)
}

/// Certified lower bound on `p₂` by a randomised walk over extremal channels
/// `M` with `N ≥ qM`; a supplied certificate is validated instead.
pub fn p2_certificate(ch: &KrausChannel, user: Option<(f64, &KrausChannel)>, opts: &P2Options) -> Result<ExtremalCertificate> {
    require_non_unital(ch)?;
    if let Some((q, m)) = user {
        return validate_certificate(ch, q, m);
    }
    let face = ChoiFace::new(ch);
    let m0 = face.null_directions(&linalg::identity(face.rank())).len();
    let eval = |first: &[f64], index: u64| {
        let mut r = stream(opts.seed, index);
        face.candidate(&face.walk(first, &mut r))
    };
    if m0 == 0 {
        return eval(&[], 0).ok_or_else(|| Error::Numerical("extremal input rejected as its own certificate".into()));
    }
    let mut found: Vec<(u64, Vec<f64>, Option<ExtremalCertificate>)> = (0..opts.candidates.max(1) as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = stream(opts.seed, i);
            let first: Vec<f64> = (0..m0).map(|_| r.sample(rand_distr::StandardNormal)).collect();
            let c = eval(&first, i);
            (i, first, c)
        })
        .collect();
    found.sort_by(|a, b| candidate_value(&b.2).total_cmp(&candidate_value(&a.2)).then(a.0.cmp(&b.0)));
    let refined: Vec<(u64, Vec<f64>, Option<ExtremalCertificate>)> = found
        .iter()
        .take(opts.refine)
        .filter(|f| f.2.is_some())
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(i, first, _)| {
            let f = |c: &[f64]| -candidate_value(&eval(c, *i));
            let m = optim::compass(f, first, 0.5, 1e-10, 4000);
            let c = eval(&m.x, *i);
            (*i, m.x, c)
        })
        .collect();
    found.extend(refined);
    found
        .into_iter()
        .filter_map(|(i, _, c)| c.map(|c| (i, c)))
        .max_by(|a, b| a.1.p2_lower.total_cmp(&b.1.p2_lower).then(b.0.cmp(&a.0)))
        .map(|(_, c)| c)
        .ok_or_else(|| Error::Numerical("no non-unital extremal channel found below the input".into()))
}

fn replacement_choi(r: &[f64; 3]) -> CMatrix {
    let omega = crate::state::DensityState::from_bloch(*r).map(|s| s.into_matrix()).unwrap_or_else(|_| linalg::identity(2) * c64(0.5, 0.0));
    linalg::kron(&omega, &linalg::identity(2))
}

fn ball(x: &[f64]) -> [f64; 3] {
    let n = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if n == 0.0 {
        return [0.0; 3];
    }
    let s = n.tanh() / n;
    [x[0] * s, x[1] * s, x[2] * s]
}

/// Largest weight of a replacement channel `ρ ↦ ω` below `N`, with the Bloch vector of `ω`.
pub fn replacement_peel(ch: &KrausChannel) -> Result<(f64, [f64; 3])> {
    ch.require_qubit()?;
    let c_n = ch.as_cp_map().choi();
    let weight = |r: &[f64; 3]| max_dominated_weight(&c_n, &replacement_choi(r));
    let t = bloch::affine_parts(ch)?.0;
    let centre = [t[0], t[1], t[2]];
    let len = l1(&centre.map(|x| x * x)).sqrt();
    let mut best = ([0.0; 3], weight(&[0.0; 3]));
    let mut consider = |r: [f64; 3]| {
        let w = weight(&r);
        if w > best.1 {
            best = (r, w);
        }
    };
    consider(centre);
    if len > 0.0 {
        consider(centre.map(|x| x / len));
    }
    let f = |x: &[f64]| -weight(&ball(x));
    for start in [[0.0; 3], [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0]] {
        let m = optim::compass(f, &start, 0.5, 1e-7, 400);
        consider(ball(&m.x));
    }
    Ok((best.1, best.0))
}

/// `p(N) = max(p₁, p₂)` for a non-unitary qubit channel.
pub fn p_constant(ch: &KrausChannel, opts: &P2Options) -> Result<PConstantReport> {
    ch.require_qubit()?;
    require_non_unitary(ch)?;
    if ch.is_unital(UNITAL_TOL) {
        let d = unital_split(ch)?;
        return Ok(PConstantReport {
            p1: d.p1,
            p2_lower: 0.0,
            p: d.p1,
            certification: Certification::ExactP1,
            unital: true,
            decomposition: Some(d),
            certificate: None,
            peel_state: None,
        });
    }
    let cert = p2_certificate(ch, None, opts)?;
    let (p1, peel) = replacement_peel(ch)?;
    let p = p1.max(cert.p2_lower);
    if p <= 0.0 {
        return Err(Error::Numerical("no positive certificate found for p".into()));
    }
    Ok(PConstantReport {
        p1,
        p2_lower: cert.p2_lower,
        p,
        certification: Certification::CertifiedLowerBound,
        unital: false,
        decomposition: None,
        certificate: Some(cert),
        peel_state: (p1 > 0.0).then_some(peel),
    })
}
