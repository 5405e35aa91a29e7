//! Exact density-matrix simulation of noisy circuits on mixed classical and
//! quantum registers.
//!
//! Quantum registers are qubits ordered with the A side first, so block states
//! of the underlying [`CcQqState`] live on `C^{2^{n_A}} ⊗ C^{2^{n_B}}`.
//! Classical registers are carried exactly as block labels.

mod circuit;
mod doubled;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channel::KrausChannel;
use crate::entanglement::{chisep_ccqq, dsep, BipartiteState, CcQqBlock, CcQqState, SepOptions};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

pub use circuit::{CircuitFile, CircuitLayer, InputSpec, NamedInput, NoisyCircuit, Operation};
pub use doubled::{doubled_circuit, doubled_memory_experiment, DoubledOptions, DoubledReport, ENDGAME_DISTANCE};

/// Quantum registers allowed in one simulation by default.
pub const MAX_QUBITS: usize = 4;
/// Classical blocks kept after merging equal labels.
pub const MAX_BLOCKS: usize = 256;
/// Below this χ²_Sep value the contraction factor is no longer asserted for non-unital noise.
pub const CHISEP_THRESHOLD: f64 = 1.0 / 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitSpec {
    pub label: String,
    #[serde(default = "side_a")]
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassicalSpec {
    pub label: String,
    pub size: usize,
    #[serde(default = "side_a")]
    pub side: Side,
}

fn side_a() -> Side {
    Side::A
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ClassicalRef {
    pub side: Side,
    pub index: usize,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayoutRepr", into = "LayoutRepr")]
pub struct RegisterLayout {
    qubits: Vec<QubitSpec>,
    classical: Vec<ClassicalSpec>,
    /// Position of each qubit (layout order) in the A-first tensor order.
    position: Vec<usize>,
    n_a: usize,
}

#[derive(Serialize, Deserialize)]
struct LayoutRepr {
    #[serde(default)]
    qubits: Vec<QubitSpec>,
    #[serde(default)]
    classical: Vec<ClassicalSpec>,
}

impl TryFrom<LayoutRepr> for RegisterLayout {
    type Error = Error;
    fn try_from(r: LayoutRepr) -> Result<Self> {
        RegisterLayout::new(r.qubits, r.classical)
    }
}

impl From<RegisterLayout> for LayoutRepr {
    fn from(l: RegisterLayout) -> Self {
        LayoutRepr { qubits: l.qubits, classical: l.classical }
    }
}

impl RegisterLayout {
    pub fn new(qubits: Vec<QubitSpec>, classical: Vec<ClassicalSpec>) -> Result<Self> {
        Self::with_cap(qubits, classical, MAX_QUBITS)
    }

    pub fn with_cap(qubits: Vec<QubitSpec>, classical: Vec<ClassicalSpec>, max_qubits: usize) -> Result<Self> {
        if qubits.len() > max_qubits {
            return Err(Error::TooLarge { dim: qubits.len(), max: max_qubits });
        }
        let mut seen = std::collections::HashSet::new();
        for label in qubits.iter().map(|q| &q.label).chain(classical.iter().map(|c| &c.label)) {
            if !seen.insert(label.clone()) {
                return Err(Error::InvalidParameter(format!("duplicate register label {label:?}")));
            }
        }
        if let Some(c) = classical.iter().find(|c| c.size == 0) {
            return Err(Error::InvalidParameter(format!("classical register {:?} has empty alphabet", c.label)));
        }
        let n_a = qubits.iter().filter(|q| q.side == Side::A).count();
        let (mut next_a, mut next_b) = (0, n_a);
        let position = qubits
            .iter()
            .map(|q| match q.side {
                Side::A => {
                    next_a += 1;
                    next_a - 1
                }
                Side::B => {
                    next_b += 1;
                    next_b - 1
                }
            })
            .collect();
        Ok(Self { qubits, classical, position, n_a })
    }

    /// `n` qubits on one side and no classical registers.
    pub fn qubits(n: usize) -> Result<Self> {
        Self::new((0..n).map(|k| QubitSpec { label: format!("q{k}"), side: Side::A }).collect(), vec![])
    }

    pub fn qubit_specs(&self) -> &[QubitSpec] {
        &self.qubits
    }

    pub fn classical_specs(&self) -> &[ClassicalSpec] {
        &self.classical
    }

    pub fn n_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn dim_a(&self) -> usize {
        1 << self.n_a
    }

    pub fn dim_b(&self) -> usize {
        1 << (self.qubits.len() - self.n_a)
    }

    /// Tensor position of the qubit with this label.
    pub fn qubit(&self, label: &str) -> Result<usize> {
        self.qubits
            .iter()
            .position(|q| q.label == label)
            .map(|k| self.position[k])
            .ok_or_else(|| Error::InvalidParameter(format!("unknown qubit {label:?}")))
    }

    pub(crate) fn qubit_side(&self, position: usize) -> Side {
        if position < self.n_a {
            Side::A
        } else {
            Side::B
        }
    }

    pub(crate) fn register(&self, label: &str) -> Result<ClassicalRef> {
        let k = self
            .classical
            .iter()
            .position(|c| c.label == label)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown classical register {label:?}")))?;
        let spec = &self.classical[k];
        let index = self.classical[..k].iter().filter(|c| c.side == spec.side).count();
        Ok(ClassicalRef { side: spec.side, index, size: spec.size })
    }

    fn classical_counts(&self) -> (usize, usize) {
        let a = self.classical.iter().filter(|c| c.side == Side::A).count();
        (a, self.classical.len() - a)
    }

    /// All qubits in `|0⟩`, all classical registers at 0.
    pub fn zero_state(&self) -> CcQqState {
        let d = self.dim_a() * self.dim_b();
        let mut rho = CMatrix::zeros(d, d);
        rho[(0, 0)] = linalg::ONE;
        self.state_with(rho)
    }

    pub(crate) fn state_with(&self, rho: CMatrix) -> CcQqState {
        let (ca, cb) = self.classical_counts();
        let block = CcQqBlock { x: vec![0; ca], y: vec![0; cb], p: 1.0, rho };
        CcQqState::new_unchecked(self.dim_a(), self.dim_b(), vec![block])
    }

    /// Checks that `s` has this layout's dimensions and label arity.
    pub fn check_state(&self, s: &CcQqState) -> Result<()> {
        let (ca, cb) = self.classical_counts();
        if s.dim_a() != self.dim_a() || s.dim_b() != self.dim_b() {
            return Err(Error::Dimension(format!(
                "state is {}x{}, layout needs {}x{}",
                s.dim_a(),
                s.dim_b(),
                self.dim_a(),
                self.dim_b()
            )));
        }
        for b in s.blocks() {
            if b.x.len() != ca || b.y.len() != cb {
                return Err(Error::Dimension("block labels do not match the classical registers".into()));
            }
        }
        Ok(())
    }
}

/// `op` acting on the listed qubit positions of an `n`-qubit register, identity elsewhere.
pub fn embed(op: &CMatrix, targets: &[usize], n: usize) -> CMatrix {
    let d = 1usize << n;
    let bit = |i: usize, q: usize| (i >> (n - 1 - q)) & 1;
    let sub = |i: usize| targets.iter().fold(0, |acc, &q| (acc << 1) | bit(i, q));
    let mask: usize = targets.iter().map(|&q| 1usize << (n - 1 - q)).sum();
    CMatrix::from_fn(d, d, |i, j| if i & !mask == j & !mask { op[(sub(i), sub(j))] } else { linalg::ZERO })
}

fn apply_kraus(ops: &[CMatrix], rho: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(rho.nrows(), rho.ncols());
    for k in ops {
        out += k * rho * k.adjoint();
    }
    linalg::hermitize(&out)
}

/// Combines blocks with equal labels and drops empty ones.
pub(crate) fn merge_blocks(blocks: Vec<CcQqBlock>, cap: usize) -> Result<Vec<CcQqBlock>> {
    let mut merged: BTreeMap<(Vec<usize>, Vec<usize>), (f64, CMatrix)> = BTreeMap::new();
    for b in blocks {
        if b.p <= 1e-15 {
            continue;
        }
        let weighted = b.rho * linalg::c64(b.p, 0.0);
        merged
            .entry((b.x, b.y))
            .and_modify(|e| {
                e.0 += b.p;
                e.1 += &weighted;
            })
            .or_insert((b.p, weighted));
    }
    if merged.len() > cap {
        return Err(Error::CapExceeded(format!("{} classical blocks exceed the cap of {cap}", merged.len())));
    }
    Ok(merged
        .into_iter()
        .map(|((x, y), (p, m))| CcQqBlock { x, y, p, rho: linalg::hermitize(&(m / linalg::c64(p, 0.0))) })
        .collect())
}

/// Applies the qubit channel `noise` to every quantum register of every block.
pub fn apply_iid_noise(s: &CcQqState, noise: &KrausChannel, layout: &RegisterLayout) -> Result<CcQqState> {
    noise.require_qubit()?;
    layout.check_state(s)?;
    let n = layout.n_qubits();
    let per_qubit: Vec<Vec<CMatrix>> = (0..n).map(|q| noise.kraus().iter().map(|k| embed(k, &[q], n)).collect()).collect();
    Ok(s.map_blocks(
        |rho| per_qubit.iter().fold(rho.clone(), |acc, ops| apply_kraus(ops, &acc)),
        s.dim_a(),
        s.dim_b(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseOrder {
    #[default]
    NoiseFirst,
    LayerFirst,
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub sep: SepOptions,
    pub order: NoiseOrder,
    /// Apply one more noise layer after the last computation layer.
    pub trailing_noise: bool,
    pub max_blocks: usize,
    /// Compute the trace-norm distance to separable states once χ²_Sep drops below the threshold.
    pub dsep_below_threshold: bool,
    pub seed: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            sep: SepOptions::default(),
            order: NoiseOrder::default(),
            trailing_noise: false,
            max_blocks: MAX_BLOCKS,
            dsep_below_threshold: true,
            seed: 0,
        }
    }
}

/// A per-step contraction claim `χ²(t+1) ≤ factor·χ²(t) + tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorCheck {
    pub factor: f64,
    /// Assert the factor at every step; otherwise only while χ²_Sep ≥ 1/16.
    pub every_step: bool,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub chisep: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    pub mass: f64,
    pub blocks: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factor_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factor_ok: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dsep: Option<f64>,
    /// Distribution of each classical register, in layout order.
    pub classical: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub seed: u64,
    pub width: usize,
    pub length: usize,
    pub order: NoiseOrder,
    pub trailing_noise: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<FactorCheck>,
    pub steps: Vec<StepRecord>,
    /// Every asserted factor held.
    pub passed: bool,
    #[serde(skip)]
    pub final_state: Option<CcQqState>,
}

impl TrajectoryReport {
    pub fn chisep_values(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.chisep).collect()
    }

    /// First step whose χ²_Sep is below the threshold and its dsep value.
    pub fn endgame(&self) -> Option<(usize, f64)> {
        self.steps.iter().find_map(|s| s.dsep.map(|d| (s.step, d)))
    }
}

fn classical_marginals(s: &CcQqState, layout: &RegisterLayout) -> Result<Vec<Vec<f64>>> {
    layout
        .classical_specs()
        .iter()
        .map(|c| {
            let r = layout.register(&c.label)?;
            let mut dist = vec![0.0; r.size];
            for b in s.blocks() {
                let v = match r.side {
                    Side::A => b.x[r.index],
                    Side::B => b.y[r.index],
                };
                dist[v] += b.p;
            }
            Ok(dist)
        })
        .collect()
}

/// Runs the circuit from `input`, recording χ²_Sep across the A:B cut after
/// the input and after every step.
pub fn run_noisy_circuit(
    c: &NoisyCircuit,
    input: &CcQqState,
    check: Option<FactorCheck>,
    opts: &SimOptions,
) -> Result<TrajectoryReport> {
    c.layout.check_state(input)?;
    let mut state = input.clone();
    let mut prev = chisep_ccqq(&state, &opts.sep)?.value;
    let mut steps = vec![record(0, &state, prev, None, None, &c.layout, opts)?];
    let mut passed = true;
    let length = c.layers.len();
    for t in 0..length {
        match opts.order {
            NoiseOrder::NoiseFirst => {
                state = apply_iid_noise(&state, &c.noise, &c.layout)?;
                state = c.apply_layer(t, &state, opts.max_blocks)?;
            }
            NoiseOrder::LayerFirst => {
                state = c.apply_layer(t, &state, opts.max_blocks)?;
                if t + 1 < length {
                    state = apply_iid_noise(&state, &c.noise, &c.layout)?;
                }
            }
        }
        if t + 1 == length && opts.trailing_noise {
            state = apply_iid_noise(&state, &c.noise, &c.layout)?;
        }
        let value = chisep_ccqq(&state, &opts.sep)?.value;
        let bound = check.and_then(|f| (f.every_step || prev >= CHISEP_THRESHOLD).then_some(f.factor * prev));
        let ok = bound.map(|b| value <= b + check.map_or(0.0, |f| f.tol));
        passed &= ok.unwrap_or(true);
        steps.push(record(t + 1, &state, value, Some(prev), bound.map(|b| (b, ok.unwrap_or(true))), &c.layout, opts)?);
        prev = value;
    }
    Ok(TrajectoryReport {
        seed: opts.seed,
        width: c.layout.n_qubits(),
        length,
        order: opts.order,
        trailing_noise: opts.trailing_noise,
        check,
        steps,
        passed,
        final_state: Some(state),
    })
}

fn record(
    step: usize,
    s: &CcQqState,
    chisep: f64,
    prev: Option<f64>,
    bound: Option<(f64, bool)>,
    layout: &RegisterLayout,
    opts: &SimOptions,
) -> Result<StepRecord> {
    let dsep_value = if opts.dsep_below_threshold && chisep < CHISEP_THRESHOLD && s.dim_a() > 1 && s.dim_b() > 1 {
        let m = s.quantum_marginal();
        let q = BipartiteState::from_matrix(m, s.dim_a(), s.dim_b())?;
        Some(dsep(&q, &opts.sep)?.value)
    } else {
        None
    };
    Ok(StepRecord {
        step,
        chisep,
        ratio: prev.filter(|&p| p > 1e-12).map(|p| chisep / p),
        mass: s.total_probability(),
        blocks: s.blocks().len(),
        factor_bound: bound.map(|b| b.0),
        factor_ok: bound.map(|b| b.1),
        dsep: dsep_value,
        classical: classical_marginals(s, layout)?,
    })
}

/// Qubit count and layer count; classical registers are not counted.
pub fn circuit_metrics(c: &NoisyCircuit) -> (usize, usize) {
    (c.layout.n_qubits(), c.layers.len())
}
