//! Calculators for the memory-time threshold, capacity brackets, the
//! space-overhead lower bound and the near-identity stability estimate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{KrausChannel, Preset};
use crate::contraction::best_of;
use crate::decompose::{is_entanglement_breaking, PConstantReport};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix};
use crate::optim::{self, LocalOptions};
use crate::tolerance::Tolerances;

/// Accuracy below which the memory-time threshold applies.
pub const EPSILON0: f64 = 1.0 / 128.0;

/// Entropy eigenvalue floor.
pub const ENTROPY_FLOOR: f64 = 1e-14;

fn require_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!("channel constant p = {p} outside (0, 1]")));
    }
    Ok(())
}

/// `T ≥ (2/p)^{2n}`: no memory of `n` qubits stays `ε₀`-accurate that long.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryTimeBound {
    pub n: u32,
    pub p: f64,
    pub log2_threshold: f64,
    /// `None` when the threshold overflows a double.
    pub threshold: Option<f64>,
    pub epsilon0: f64,
}

pub fn memory_time_bound_from_p(n: u32, p: f64) -> Result<MemoryTimeBound> {
    require_p(p)?;
    if n == 0 {
        return Err(Error::InvalidParameter("memory needs at least one qubit".into()));
    }
    let log2_threshold = 2.0 * n as f64 * (2.0 / p).log2();
    let t = log2_threshold.exp2();
    Ok(MemoryTimeBound { n, p, log2_threshold, threshold: t.is_finite().then_some(t), epsilon0: EPSILON0 })
}

pub fn memory_time_bound(n: u32, report: &PConstantReport) -> Result<MemoryTimeBound> {
    memory_time_bound_from_p(n, report.p)
}

#[derive(Debug, Clone, Copy)]
pub struct SearchConfig {
    pub seed: u64,
    pub restarts: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { seed: 0, restarts: 16 }
    }
}

fn ball(x: &[f64]) -> [f64; 3] {
    let n = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if n == 0.0 {
        return [0.0; 3];
    }
    let s = n.tanh() / n;
    [x[0] * s, x[1] * s, x[2] * s]
}

fn bloch_density(r: &[f64; 3]) -> CMatrix {
    let mut m = linalg::identity(2);
    for k in 0..3 {
        m += linalg::pauli(k + 1) * c64(r[k], 0.0);
    }
    m * c64(0.5, 0.0)
}

/// `S(N(ρ)) − S((N⊗I)(φ_ρ))` with `φ_ρ` a purification of `ρ`.
pub fn coherent_information(ch: &KrausChannel, rho: &CMatrix) -> f64 {
    let d = rho.nrows();
    let sqrt = linalg::psd_sqrt(rho);
    let mut v = linalg::CVector::zeros(d * d);
    for i in 0..d {
        for j in 0..d {
            v[i * d + j] = sqrt[(i, j)];
        }
    }
    let phi = linalg::outer(&v);
    let joint = ch.tensor(&KrausChannel::identity(d)).apply(&phi);
    linalg::entropy_bits(&ch.apply(rho), ENTROPY_FLOOR) - linalg::entropy_bits(&joint, ENTROPY_FLOOR)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherentInfoReport {
    /// `max(0, max_ρ I_c(ρ))`, a lower bound on the quantum capacity.
    pub value: f64,
    pub raw: f64,
    pub input_bloch: [f64; 3],
    pub restarts: usize,
}

/// Multi-start maximisation of the single-use coherent information over qubit inputs.
pub fn coherent_info_lower(ch: &KrausChannel, cfg: &SearchConfig) -> Result<CoherentInfoReport> {
    ch.require_qubit()?;
    let f = |x: &[f64]| -coherent_information(ch, &bloch_density(&ball(x)));
    let opts = LocalOptions { max_iter: 200, ..Default::default() };
    let (neg, x, restarts) = best_of(cfg.seed, cfg.restarts.max(1), |r| {
        let x0: Vec<f64> = if r.random_bool(0.25) { vec![0.0; 3] } else { (0..3).map(|_| r.random_range(-2.0..2.0)).collect() };
        let m = optim::bfgs(f, &x0, &opts);
        (m.value, m.x)
    });
    let centre = f(&[0.0; 3]);
    let (neg, input) = if centre < neg { (centre, [0.0; 3]) } else { (neg, ball(&x)) };
    Ok(CoherentInfoReport { value: (-neg).max(0.0), raw: -neg, input_bloch: input, restarts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum UpperSource {
    /// `Q ≤ log₂ d = 1` for qubits.
    Trivial,
    User,
    /// Matches a channel with known zero capacity.
    Preset { name: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityBracket {
    pub lower: f64,
    pub upper: f64,
    pub lower_source: String,
    pub upper_source: UpperSource,
    pub lower_input_bloch: [f64; 3],
}

impl CapacityBracket {
    /// `[0, 1]` with no channel behind it.
    pub fn trivial() -> Self {
        Self { lower: 0.0, upper: 1.0, lower_source: "none".into(), upper_source: UpperSource::Trivial, lower_input_bloch: [0.0; 3] }
    }

    pub fn upper_is_trivial(&self) -> bool {
        self.upper_source == UpperSource::Trivial
    }
}

/// Zero-capacity facts applied when the channel matches within the conversion tolerance.
fn preset_upper(ch: &KrausChannel) -> Result<Option<(f64, String)>> {
    let tol = Tolerances::default().conv;
    if ch.is_unital(1e-9) {
        let b = crate::channel::bloch::to_bloch_affine(ch)?;
        let l = b.lambda;
        let mean = (l[0] + l[1] + l[2]) / 3.0;
        let p = 1.0 - mean;
        if (0.0..=1.0).contains(&p) && p > 1.0 / 3.0 && ch.choi_distance(&Preset::Depolarizing(p).channel()?) <= tol {
            return Ok(Some((0.0, format!("depolarizing p = {p:.6} > 1/3"))));
        }
    }
    if is_entanglement_breaking(ch)? {
        return Ok(Some((0.0, "entanglement breaking".into())));
    }
    Ok(None)
}

pub fn capacity_bracket(ch: &KrausChannel, user_upper: Option<f64>, cfg: &SearchConfig) -> Result<CapacityBracket> {
    let lower = coherent_info_lower(ch, cfg)?;
    let mut upper = (1.0, UpperSource::Trivial);
    if let Some(u) = user_upper {
        if !(u >= 0.0) {
            return Err(Error::InvalidParameter(format!("capacity upper bound {u} is negative")));
        }
        if u < upper.0 {
            upper = (u, UpperSource::User);
        }
    }
    if let Some((u, name)) = preset_upper(ch)? {
        if u < upper.0 {
            upper = (u, UpperSource::Preset { name });
        }
    }
    if upper.0 < lower.value - 1e-9 {
        return Err(Error::InconsistentCapacity { lower: lower.value, upper: upper.0 });
    }
    Ok(CapacityBracket {
        lower: lower.value.min(upper.0),
        upper: upper.0,
        lower_source: "coherent_information".into(),
        upper_source: upper.1,
        lower_input_bloch: lower.input_bloch,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OverheadValue {
    Bound {
        value: f64,
        capacity_term: f64,
        /// The capacity term only uses the trivial upper bound 1.
        capacity_term_vacuous: bool,
        log_term: f64,
    },
    /// The quantum capacity is zero, so no accurate computation of any length exists.
    Impossible { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadBound {
    pub n: u64,
    pub t: f64,
    pub p: f64,
    pub alpha: f64,
    pub bracket: CapacityBracket,
    pub bound: OverheadValue,
}

/// `α = 1/(2 log₂(2/p))`.
pub fn overhead_alpha(p: f64) -> Result<f64> {
    require_p(p)?;
    Ok(1.0 / (2.0 * (2.0 / p).log2()))
}

/// Physical qubits needed for `n` logical qubits over `t` steps:
/// `max(n/Q_upper, α log₂ t)`, or impossible when the capacity vanishes.
pub fn overhead_lower_bound(n: u64, t: f64, p: f64, bracket: &CapacityBracket) -> Result<OverheadBound> {
    let alpha = overhead_alpha(p)?;
    if n == 0 || !(t >= 1.0) {
        return Err(Error::InvalidParameter("overhead needs n >= 1 and T >= 1".into()));
    }
    let bound = if bracket.upper <= 0.0 {
        OverheadValue::Impossible { reason: "the noise channel has zero quantum capacity".into() }
    } else {
        let capacity_term = n as f64 / bracket.upper;
        let log_term = alpha * t.log2();
        OverheadValue::Bound { value: capacity_term.max(log_term), capacity_term, capacity_term_vacuous: bracket.upper_is_trivial(), log_term }
    };
    Ok(OverheadBound { n, t, p, alpha, bracket: bracket.clone(), bound })
}

/// Largest trace norm of `(Φ − id)(ψ)` over pure inputs of dimension `d`.
fn max_pure_deviation(d: usize, apply: impl Fn(&CMatrix) -> CMatrix + Sync, cfg: &SearchConfig) -> f64 {
    let f = |x: &[f64]| {
        let Some(v) = linalg::unit_vector_from_params(x) else { return f64::INFINITY };
        let psi = linalg::outer(&v);
        -linalg::trace_norm_herm(&(apply(&psi) - psi))
    };
    let opts = LocalOptions { max_iter: 150, ..Default::default() };
    let (neg, _, _) = best_of(cfg.seed, cfg.restarts.max(1), |r| {
        let x0 = linalg::params_from_vector(&linalg::random_pure(d, r));
        let m = optim::bfgs(f, &x0, &opts);
        (m.value, m.x)
    });
    (-neg).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Estimate of `‖T − id‖_{1→1}`.
    pub epsilon: f64,
    /// Estimate of `‖T ⊗ id_d − id‖_{1→1}` against `√(2ε)`.
    pub extended: f64,
    pub extended_bound: f64,
    /// Estimate of `‖T ⊗ T − id‖_{1→1}` against `2√(2ε)`.
    pub doubled: f64,
    pub doubled_bound: f64,
    pub passed: bool,
}

pub fn verify_stability_lemma(ch: &KrausChannel, cfg: &SearchConfig) -> Result<StabilityReport> {
    let d = ch.require_square()?;
    let epsilon = max_pure_deviation(d, |x| ch.apply(x), cfg);
    if epsilon > 2.0 + 1e-9 {
        return Err(Error::Numerical(format!("trace-norm deviation {epsilon} exceeds 2")));
    }
    let ext = ch.tensor(&KrausChannel::identity(d));
    let extended = max_pure_deviation(d * d, |x| ext.apply(x), cfg);
    let dbl = ch.tensor(ch);
    let doubled = max_pure_deviation(d * d, |x| dbl.apply(x), cfg);
    let extended_bound = (2.0 * epsilon).sqrt();
    let doubled_bound = 2.0 * extended_bound;
    Ok(StabilityReport {
        epsilon,
        extended,
        extended_bound,
        doubled,
        doubled_bound,
        passed: extended <= extended_bound + 1e-6 && doubled <= doubled_bound + 1e-6,
    })
}
