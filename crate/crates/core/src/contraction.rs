//! Divergences between states and contraction coefficients of channels.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{bloch, CpMap, KrausChannel};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix, CVector};
use crate::optim::{self, LocalOptions};
use crate::rng;
use crate::state::DensityState;

/// Relative eigenvalue threshold separating the support of `σ` from numerical noise.
pub const SUPPORT_TOL: f64 = 1e-10;

fn same_dim(rho: &DensityState, sigma: &DensityState) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Dimension(format!("states of dimension {} and {}", rho.dim(), sigma.dim())));
    }
    Ok(())
}

/// `‖ρ − σ‖₁`, ranging over `[0, 2]`.
pub fn trace_distance(rho: &DensityState, sigma: &DensityState) -> Result<f64> {
    same_dim(rho, sigma)?;
    Ok(linalg::trace_norm_herm(&(rho.matrix() - sigma.matrix())))
}

/// χ² divergence of raw matrices; `+∞` when the support of `rho` leaves that of `sigma`.
pub fn chi2_matrices(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    let e = linalg::eigh(sigma);
    let cutoff = SUPPORT_TOL * e.max().max(0.0);
    let n = e.values.len();
    let in_basis = e.vectors.adjoint() * rho * &e.vectors;
    let leak: f64 = (0..n).filter(|&k| e.values[k] <= cutoff).map(|k| in_basis[(k, k)].re).sum();
    if leak > SUPPORT_TOL * linalg::trace(rho).re.abs().max(1.0) {
        return f64::INFINITY;
    }
    // ‖σ^{-1/4}(ρ − σ)σ^{-1/4}‖_F² on the support
    let w: Vec<f64> = e.values.iter().map(|&x| if x > cutoff { x.powf(-0.25) } else { 0.0 }).collect();
    let mut total = 0.0;
    for k in 0..n {
        for l in 0..n {
            let mut z = in_basis[(k, l)];
            if k == l {
                z -= c64(e.values[k].max(0.0), 0.0);
            }
            total += (w[k] * w[l]) * (w[k] * w[l]) * z.norm_sqr();
        }
    }
    total
}

pub fn chi2_divergence(rho: &DensityState, sigma: &DensityState) -> Result<f64> {
    same_dim(rho, sigma)?;
    Ok(chi2_matrices(rho.matrix(), sigma.matrix()))
}

/// Uhlmann fidelity `‖√ρ √σ‖₁²`.
pub fn fidelity(rho: &DensityState, sigma: &DensityState) -> Result<f64> {
    same_dim(rho, sigma)?;
    let f = fidelity_matrices(rho.matrix(), sigma.matrix());
    debug_assert!(
        trace_distance(rho, sigma)? / 2.0 <= (1.0 - f).max(0.0).sqrt() + 1e-7,
        "normalized Fuchs-van de Graaf inequality violated"
    );
    Ok(f)
}

pub(crate) fn fidelity_matrices(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    let s = linalg::trace_norm(&(linalg::psd_sqrt(rho) * linalg::psd_sqrt(sigma)));
    (s * s).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalPair {
    #[serde(with = "crate::io::vector")]
    pub psi: CVector,
    #[serde(with = "crate::io::vector")]
    pub phi: CVector,
}

impl OrthogonalPair {
    pub fn new(psi: CVector, phi: CVector) -> Result<Self> {
        if psi.len() != phi.len() {
            return Err(Error::Dimension("pair vectors differ in length".into()));
        }
        if (psi.norm() - 1.0).abs() > 1e-12 || (phi.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState("pair vectors must have unit norm".into()));
        }
        if psi.dotc(&phi).norm() > 1e-9 {
            return Err(Error::InvalidState("pair vectors are not orthogonal".into()));
        }
        Ok(Self { psi, phi })
    }

    /// `½‖T(|ψ⟩⟨ψ| − |φ⟩⟨φ|)‖₁`.
    pub fn contraction(&self, ch: &KrausChannel) -> f64 {
        pair_value(ch, &self.psi, &self.phi)
    }
}

fn pair_value(ch: &KrausChannel, psi: &CVector, phi: &CVector) -> f64 {
    let diff = ch.apply(&(linalg::outer(psi) - linalg::outer(phi)));
    0.5 * linalg::trace_norm_herm(&diff)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractionKind {
    EtaTrEstimate,
    EtaTrUpperMinoutev,
    EtaTrUpperChoi,
    EtaChiLower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    OrthogonalPair(OrthogonalPair),
    /// Pure pair minimising `⟨ψ|(T†∘T)(|φ⟩⟨φ|)|ψ⟩`.
    ProductPair {
        #[serde(with = "crate::io::vector")]
        psi: CVector,
        #[serde(with = "crate::io::vector")]
        phi: CVector,
    },
    States {
        #[serde(with = "crate::io::matrix")]
        rho: CMatrix,
        #[serde(with = "crate::io::matrix")]
        sigma: CMatrix,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub value: f64,
    pub kind: ContractionKind,
    /// Whether `value` is exact rather than a one-sided bound.
    pub exact: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    /// Minimal output eigenvalue or Choi eigenvalue behind an upper bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_min: Option<f64>,
    pub seed: u64,
    pub restarts: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub seed: u64,
    pub restarts: usize,
    pub tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { seed: 0, restarts: 64, tol: 1e-9 }
    }
}

impl SearchOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    fn local(&self) -> LocalOptions {
        LocalOptions { f_tol: self.tol * 1e-3, g_tol: self.tol, ..LocalOptions::default() }
    }
}

/// Runs `restarts` independent searches on per-restart streams and keeps the
/// best (smallest `key`) result, breaking ties by restart index.
pub(crate) fn best_of<T: Send>(seed: u64, restarts: usize, run: impl Fn(&mut rng::StreamRng) -> (f64, T) + Sync) -> (f64, T, usize) {
    let results: Vec<(f64, T)> = (0..restarts.max(1) as u64)
        .into_par_iter()
        .map(|k| run(&mut rng::stream(seed, k)))
        .collect();
    let mut best: Option<(f64, T)> = None;
    for (key, payload) in results {
        if best.as_ref().is_none_or(|(b, _)| key < *b) {
            best = Some((key, payload));
        }
    }
    let (key, payload) = best.expect("at least one restart");
    (key, payload, restarts.max(1))
}

fn pair_from_params(x: &[f64], d: usize) -> Option<(CVector, CVector)> {
    let psi = linalg::unit_vector_from_params(&x[..2 * d])?;
    let raw = CVector::from_fn(d, |i, _| c64(x[2 * d + 2 * i], x[2 * d + 2 * i + 1]));
    let proj = psi.dotc(&raw);
    let phi = raw - &psi * proj;
    let n = phi.norm();
    (n > 1e-12).then(|| (psi, phi / c64(n, 0.0)))
}

fn require_endo(ch: &KrausChannel) -> Result<usize> {
    if ch.in_dim() != ch.out_dim() {
        return Err(Error::Dimension(format!("channel maps dimension {} to {}", ch.in_dim(), ch.out_dim())));
    }
    Ok(ch.in_dim())
}

/// Multi-start search for the best orthogonal pair, for any dimension.
pub fn eta_tr_search(ch: &KrausChannel, opts: &SearchOptions) -> Result<ContractionReport> {
    let d = require_endo(ch)?;
    let local = opts.local();
    let (neg, (pair, iters), restarts) = best_of(opts.seed, opts.restarts, |r| {
        let h = linalg::hermitize(&linalg::ginibre(d, d, r)) * c64(std::f64::consts::PI, 0.0);
        let u = linalg::expi_hermitian(&h);
        let mut x = linalg::params_from_vector(&u.column(0).into_owned());
        x.extend(linalg::params_from_vector(&u.column(1).into_owned()));
        let f = |x: &[f64]| match pair_from_params(x, d) {
            Some((a, b)) => -pair_value(ch, &a, &b),
            None => f64::INFINITY,
        };
        let m = optim::bfgs(f, &x, &local);
        let (psi, phi) = pair_from_params(&m.x, d).unwrap_or_else(|| pair_from_params(&x, d).expect("unitary columns"));
        let v = pair_value(ch, &psi, &phi);
        (-v, (OrthogonalPair { psi, phi }, m.iterations))
    });
    Ok(ContractionReport {
        value: (-neg).clamp(0.0, 1.0),
        kind: ContractionKind::EtaTrEstimate,
        exact: false,
        witness: Some(Witness::OrthogonalPair(pair)),
        lambda_min: None,
        seed: opts.seed,
        restarts,
        iterations: iters,
    })
}

/// Trace-norm contraction coefficient: exact through the Bloch form for
/// qubit channels, otherwise a multi-start lower estimate.
pub fn eta_tr(ch: &KrausChannel, opts: &SearchOptions) -> Result<ContractionReport> {
    require_endo(ch)?;
    if !ch.is_qubit() {
        return eta_tr_search(ch, opts);
    }
    let (value, axis) = bloch::qubit_contraction(ch)?;
    let up = DensityState::from_bloch([axis[0], axis[1], axis[2]])?;
    let e = linalg::eigh(up.matrix());
    let psi = e.vectors.column(1).into_owned();
    let phi = e.vectors.column(0).into_owned();
    Ok(ContractionReport {
        value: value.clamp(0.0, 1.0),
        kind: ContractionKind::EtaTrEstimate,
        exact: true,
        witness: Some(Witness::OrthogonalPair(OrthogonalPair { psi, phi })),
        lambda_min: None,
        seed: opts.seed,
        restarts: 0,
        iterations: 0,
    })
}

/// `T† ∘ T` as a completely positive map.
pub fn adjoint_composite(ch: &KrausChannel) -> CpMap {
    ch.adjoint().compose(ch.as_cp_map()).expect("dimensions agree")
}

/// `λ_min` of the Choi matrix of `T† ∘ T`.
pub fn composite_choi_min_eigenvalue(ch: &KrausChannel) -> f64 {
    linalg::min_eigenvalue(&adjoint_composite(ch).choi()).max(0.0)
}

fn min_eigvec(m: &CMatrix) -> (f64, CVector) {
    let e = linalg::eigh(m);
    (e.min(), e.vectors.column(0).into_owned())
}

/// Minimal output eigenvalue `min_{ψ,φ} ⟨ψ|(T†∘T)(|φ⟩⟨φ|)|ψ⟩` by alternating
/// exact minimisation over `ψ` and `φ` from random starts.
pub fn min_output_eigenvalue(ch: &KrausChannel, opts: &SearchOptions) -> Result<(f64, CVector, CVector, usize)> {
    let d = require_endo(ch)?;
    let adj = ch.adjoint();
    let apply = |v: &CVector| adj.apply(&ch.apply(&linalg::outer(v)));
    let (value, (psi, phi, iters), _) = best_of(opts.seed, opts.restarts, |r| {
        let mut phi = linalg::random_pure(d, r);
        let (mut val, mut psi) = min_eigvec(&apply(&phi));
        let mut iters = 0;
        for _ in 0..500 {
            iters += 1;
            let (v1, phi_new) = min_eigvec(&apply(&psi));
            phi = phi_new;
            let (v2, psi_new) = min_eigvec(&apply(&phi));
            psi = psi_new;
            let improvement = val - v1.min(v2);
            val = val.min(v1).min(v2);
            if improvement <= 1e-15 {
                break;
            }
        }
        (val, (psi, phi, iters))
    });
    Ok((value.max(0.0), psi, phi, iters))
}

/// Upper bound `√(1 − λ_min^out(T†∘T)/d²)` on the trace-norm contraction.
pub fn eta_tr_upper_minoutev(ch: &KrausChannel, opts: &SearchOptions) -> Result<ContractionReport> {
    let d = require_endo(ch)? as f64;
    let (lambda, psi, phi, iterations) = min_output_eigenvalue(ch, opts)?;
    Ok(ContractionReport {
        value: (1.0 - lambda / (d * d)).clamp(0.0, 1.0).sqrt(),
        kind: ContractionKind::EtaTrUpperMinoutev,
        exact: false,
        witness: Some(Witness::ProductPair { psi, phi }),
        lambda_min: Some(lambda),
        seed: opts.seed,
        restarts: opts.restarts.max(1),
        iterations,
    })
}

/// `√(1 − λ_min(C_{T†∘T})/d²)`.
pub fn eta_tr_upper_choi(ch: &KrausChannel) -> Result<ContractionReport> {
    eta_tr_upper_choi_power(ch, 1)
}

/// The Choi bound for `T^{⊗n}` using `λ_min(C^{⊗n}) = λ_min(C)^n`:
/// `√(1 − (λ_min(C)/d²)^n)`.
pub fn eta_tr_upper_choi_power(ch: &KrausChannel, n: u32) -> Result<ContractionReport> {
    let d = require_endo(ch)? as f64;
    let lambda = composite_choi_min_eigenvalue(ch);
    let value = (1.0 - (lambda / (d * d)).powi(n as i32)).clamp(0.0, 1.0).sqrt();
    Ok(ContractionReport {
        value,
        kind: ContractionKind::EtaTrUpperChoi,
        exact: false,
        witness: None,
        lambda_min: Some(lambda),
        seed: 0,
        restarts: 0,
        iterations: 0,
    })
}

fn density_from_params(x: &[f64], d: usize) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |i, j| c64(x[2 * (i * d + j)], x[2 * (i * d + j) + 1]));
    let m = &g * g.adjoint();
    let t = linalg::trace(&m).re;
    m / c64(t, 0.0)
}

fn chi2_ratio(ch: &KrausChannel, rho: &CMatrix, sigma: &CMatrix) -> Option<f64> {
    let den = chi2_matrices(rho, sigma);
    if !(den.is_finite() && den > 1e-12) {
        return None;
    }
    let num = chi2_matrices(&ch.apply(rho), &ch.apply(sigma));
    num.is_finite().then_some(num / den)
}

/// Lower estimate of the χ² contraction coefficient from random state pairs
/// refined by local ascent.
pub fn eta_chi_lower(ch: &KrausChannel, trials: usize, seed: u64) -> Result<ContractionReport> {
    let d = require_endo(ch)?;
    let n = 2 * d * d;
    let (neg, (x, iters), _) = best_of(seed, trials, |r| {
        loop {
            let rank = r.random_range(1..=d);
            let mut x: Vec<f64> = (0..2 * n).map(|_| r.sample(rand_distr::StandardNormal)).collect();
            for k in (2 * d * rank)..n {
                x[k] = 0.0;
            }
            let rho = density_from_params(&x[..n], d);
            let sigma = density_from_params(&x[n..], d);
            if linalg::min_eigenvalue(&sigma) < 1e-6 {
                continue;
            }
            let Some(v) = chi2_ratio(ch, &rho, &sigma) else { continue };
            return (-v, (x, 0));
        }
    });
    let f = |x: &[f64]| {
        let rho = density_from_params(&x[..n], d);
        let sigma = density_from_params(&x[n..], d);
        chi2_ratio(ch, &rho, &sigma).map_or(f64::INFINITY, |v| -v)
    };
    let m = optim::bfgs(f, &x, &LocalOptions { max_iter: 100, ..Default::default() });
    let (best_x, best) = if m.value < neg { (m.x, -m.value) } else { (x, -neg) };
    let rho = density_from_params(&best_x[..n], d);
    let sigma = density_from_params(&best_x[n..], d);
    Ok(ContractionReport {
        value: best.clamp(0.0, 1.0),
        kind: ContractionKind::EtaChiLower,
        exact: false,
        witness: Some(Witness::States { rho, sigma }),
        lambda_min: None,
        seed,
        restarts: trials,
        iterations: m.iterations + iters,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Independence {
    /// The contraction is certified below one, so the trivial exponent applies.
    Certified,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    pub verdict: Independence,
    pub minoutev_bound: f64,
    pub choi_bound: f64,
}

/// Certified when the minimal-output-eigenvalue bound on `η_tr` is below one.
pub fn independence_trivial(ch: &KrausChannel, opts: &SearchOptions) -> Result<IndependenceReport> {
    let m = eta_tr_upper_minoutev(ch, opts)?;
    let c = eta_tr_upper_choi(ch)?;
    let verdict = if m.value < 1.0 - 1e-9 { Independence::Certified } else { Independence::Unknown };
    Ok(IndependenceReport { verdict, minoutev_bound: m.value, choi_bound: c.value })
}
