//! Separability across a bipartition: PPT tests, distance and χ² divergence
//! to the separable set, cc-qq states and separable channels.

mod chisep;
mod dsep;
mod ensemble;
mod family;
mod separable;
mod step;

pub use chisep::{chisep, chisep_blocks, chisep_ccqq, chisep_ccqq_direct, BlockSepResult, CcQqSepResult};
pub use dsep::dsep;
pub use ensemble::{ensemble_upper_bound, ensemble_upper_bound_distance, SeparableEnsemble};
pub use separable::{random_separable_channel, SeparableChannel};
pub use step::{verify_contraction_step, ContractionStepReport, StepOptions};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix, CVector};
use crate::optim::barrier::BarrierOptions;
use crate::state::DensityState;
use crate::tolerance::Tolerances;

/// Largest total dimension handled by the separability machinery.
pub const MAX_DIM: usize = 16;

/// PPT eigenvalue slack.
pub const PPT_TOL: f64 = 1e-9;

/// A density matrix on `C^{d_A} ⊗ C^{d_B}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BipartiteRepr", into = "BipartiteRepr")]
pub struct BipartiteState {
    dim_a: usize,
    dim_b: usize,
    state: DensityState,
}

#[derive(Serialize, Deserialize)]
struct BipartiteRepr {
    dim_a: usize,
    dim_b: usize,
    #[serde(with = "crate::io::matrix")]
    matrix: CMatrix,
}

impl TryFrom<BipartiteRepr> for BipartiteState {
    type Error = Error;
    fn try_from(r: BipartiteRepr) -> Result<Self> {
        BipartiteState::new(DensityState::new(r.matrix)?, r.dim_a, r.dim_b)
    }
}

impl From<BipartiteState> for BipartiteRepr {
    fn from(s: BipartiteState) -> Self {
        BipartiteRepr { dim_a: s.dim_a, dim_b: s.dim_b, matrix: s.state.into_matrix() }
    }
}

impl BipartiteState {
    pub fn new(state: DensityState, dim_a: usize, dim_b: usize) -> Result<Self> {
        if dim_a == 0 || dim_b == 0 || dim_a * dim_b != state.dim() {
            return Err(Error::Dimension(format!("{dim_a} x {dim_b} does not match state dimension {}", state.dim())));
        }
        Ok(Self { dim_a, dim_b, state })
    }

    pub fn from_matrix(matrix: CMatrix, dim_a: usize, dim_b: usize) -> Result<Self> {
        Self::new(DensityState::new(matrix)?, dim_a, dim_b)
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix, dim_a: usize, dim_b: usize) -> Self {
        Self { dim_a, dim_b, state: DensityState::from_channel_output(matrix) }
    }

    /// `(|00⟩ + |11⟩)/√2`.
    pub fn bell() -> Self {
        Self::maximally_entangled(2)
    }

    pub fn maximally_entangled(d: usize) -> Self {
        let v = CVector::from_fn(d * d, |i, _| if i % (d + 1) == 0 { c64(1.0 / (d as f64).sqrt(), 0.0) } else { linalg::ZERO });
        Self::from_matrix_unchecked(linalg::outer(&v), d, d)
    }

    /// `F |Φ⟩⟨Φ| + (1 − F)(I − |Φ⟩⟨Φ|)/(d² − 1)`.
    pub fn isotropic(d: usize, fidelity: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fidelity) {
            return Err(Error::InvalidParameter(format!("fidelity {fidelity} outside [0, 1]")));
        }
        let phi = Self::maximally_entangled(d).state.into_matrix();
        let n = d * d;
        let rest = (linalg::identity(n) - &phi) * c64((1.0 - fidelity) / (n as f64 - 1.0), 0.0);
        Self::from_matrix(phi * c64(fidelity, 0.0) + rest, d, d)
    }

    pub fn product(a: &DensityState, b: &DensityState) -> Self {
        Self::from_matrix_unchecked(linalg::kron(a.matrix(), b.matrix()), a.dim(), b.dim())
    }

    pub fn random(dim_a: usize, dim_b: usize, rank: usize, rng: &mut impl rand::Rng) -> Self {
        Self::from_matrix_unchecked(linalg::random_density(dim_a * dim_b, rank, rng), dim_a, dim_b)
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn dim(&self) -> usize {
        self.dim_a * self.dim_b
    }

    pub fn state(&self) -> &DensityState {
        &self.state
    }

    pub fn matrix(&self) -> &CMatrix {
        self.state.matrix()
    }

    pub fn partial_transpose(&self) -> CMatrix {
        linalg::partial_transpose(self.matrix(), self.dim_a, self.dim_b)
    }

    /// Whether PPT coincides with separability for these dimensions.
    pub fn ppt_is_exact(&self) -> bool {
        self.dim() <= 6
    }

    pub(crate) fn require_small(&self) -> Result<()> {
        if self.dim() > MAX_DIM {
            return Err(Error::TooLarge { dim: self.dim(), max: MAX_DIM });
        }
        Ok(())
    }
}

pub fn ppt_min_eigenvalue(s: &BipartiteState) -> f64 {
    linalg::min_eigenvalue(&s.partial_transpose())
}

/// Minimal eigenvalue of the partial transpose is at least `-1e-9`.
pub fn is_ppt(s: &BipartiteState) -> bool {
    ppt_min_eigenvalue(s) >= -PPT_TOL
}

/// A block of a cc-qq state: classical labels on each side, a probability and a
/// bipartite quantum state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcQqBlock {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub p: f64,
    #[serde(with = "crate::io::matrix")]
    pub rho: CMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CcQqRepr", into = "CcQqRepr")]
pub struct CcQqState {
    dim_a: usize,
    dim_b: usize,
    blocks: Vec<CcQqBlock>,
}

#[derive(Serialize, Deserialize)]
struct CcQqRepr {
    dim_a: usize,
    dim_b: usize,
    blocks: Vec<CcQqBlock>,
}

impl TryFrom<CcQqRepr> for CcQqState {
    type Error = Error;
    fn try_from(r: CcQqRepr) -> Result<Self> {
        CcQqState::new(r.dim_a, r.dim_b, r.blocks)
    }
}

impl From<CcQqState> for CcQqRepr {
    fn from(s: CcQqState) -> Self {
        CcQqRepr { dim_a: s.dim_a, dim_b: s.dim_b, blocks: s.blocks }
    }
}

impl CcQqState {
    pub fn new(dim_a: usize, dim_b: usize, blocks: Vec<CcQqBlock>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidState("cc-qq state needs at least one block".into()));
        }
        let tol = Tolerances::default();
        let mut total = 0.0;
        for b in &blocks {
            if !(b.p.is_finite() && b.p >= 0.0) {
                return Err(Error::InvalidState(format!("block probability {} is invalid", b.p)));
            }
            if b.rho.nrows() != dim_a * dim_b {
                return Err(Error::Dimension(format!("block of size {} in a {dim_a} x {dim_b} state", b.rho.nrows())));
            }
            DensityState::with_tolerances(b.rho.clone(), &tol)?;
            total += b.p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("block probabilities sum to {total}")));
        }
        Ok(Self { dim_a, dim_b, blocks })
    }

    pub(crate) fn new_unchecked(dim_a: usize, dim_b: usize, blocks: Vec<CcQqBlock>) -> Self {
        Self { dim_a, dim_b, blocks }
    }

    pub fn single(state: &BipartiteState) -> Self {
        let block = CcQqBlock { x: vec![], y: vec![], p: 1.0, rho: state.matrix().clone() };
        Self { dim_a: state.dim_a, dim_b: state.dim_b, blocks: vec![block] }
    }

    /// Random state with `n` blocks, Dirichlet weights and random block states of the given rank range.
    pub fn random(dim_a: usize, dim_b: usize, n: usize, rng: &mut impl rand::Rng) -> Self {
        use rand_distr::{Distribution, Exp1};
        let w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
        let s: f64 = w.iter().sum();
        let d = dim_a * dim_b;
        let blocks = w
            .iter()
            .enumerate()
            .map(|(k, wk)| {
                let rank = rng.random_range(1..=d);
                CcQqBlock { x: vec![k], y: vec![k], p: wk / s, rho: linalg::random_density(d, rank, rng) }
            })
            .collect();
        Self { dim_a, dim_b, blocks }
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn blocks(&self) -> &[CcQqBlock] {
        &self.blocks
    }

    pub fn total_probability(&self) -> f64 {
        self.blocks.iter().map(|b| b.p).sum()
    }

    pub fn block_state(&self, k: usize) -> BipartiteState {
        BipartiteState::from_matrix_unchecked(self.blocks[k].rho.clone(), self.dim_a, self.dim_b)
    }

    /// `Σ p_xy ρ_xy`, forgetting the classical labels.
    pub fn quantum_marginal(&self) -> CMatrix {
        let d = self.dim_a * self.dim_b;
        self.blocks.iter().fold(CMatrix::zeros(d, d), |acc, b| acc + &b.rho * c64(b.p, 0.0))
    }

    pub fn map_blocks(&self, f: impl Fn(&CMatrix) -> CMatrix, dim_a: usize, dim_b: usize) -> Self {
        let blocks = self
            .blocks
            .iter()
            .map(|b| CcQqBlock { x: b.x.clone(), y: b.y.clone(), p: b.p, rho: f(&b.rho) })
            .collect();
        Self { dim_a, dim_b, blocks }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SepMethod {
    /// PPT minimisation where PPT equals separability (2⊗2 and 2⊗3).
    PptExact2x2,
    /// PPT relaxation in larger dimensions: a lower bound.
    PptLowerBound,
    /// Explicit separable ensemble: an upper bound.
    EnsembleUpperBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SepDiagnostics {
    pub newton_steps: usize,
    pub gap: f64,
    pub converged: bool,
    /// Smallest eigenvalue of the minimizer and of its partial transpose.
    pub min_eigenvalue: f64,
    pub min_pt_eigenvalue: f64,
    /// The input was PPT and the search was skipped.
    pub short_circuit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SepApproxResult {
    pub value: f64,
    #[serde(with = "crate::io::matrix")]
    pub minimizer: CMatrix,
    pub method: SepMethod,
    pub diagnostics: SepDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SepOptions {
    pub gap: f64,
    pub max_newton: usize,
    pub seed: u64,
    pub ensemble_terms: usize,
    pub ensemble_restarts: usize,
}

impl Default for SepOptions {
    fn default() -> Self {
        Self { gap: 1e-10, max_newton: 4000, seed: 0, ensemble_terms: 8, ensemble_restarts: 4 }
    }
}

impl SepOptions {
    pub(crate) fn barrier(&self) -> BarrierOptions {
        BarrierOptions { gap: self.gap, max_newton: self.max_newton, ..BarrierOptions::default() }
    }
}

fn method_for(dim_a: usize, dim_b: usize) -> SepMethod {
    if dim_a * dim_b <= 6 {
        SepMethod::PptExact2x2
    } else {
        SepMethod::PptLowerBound
    }
}

fn diagnostics(sigma: &CMatrix, dim_a: usize, dim_b: usize) -> SepDiagnostics {
    SepDiagnostics {
        newton_steps: 0,
        gap: 0.0,
        converged: true,
        min_eigenvalue: linalg::min_eigenvalue(sigma),
        min_pt_eigenvalue: linalg::min_eigenvalue(&linalg::partial_transpose(sigma, dim_a, dim_b)),
        short_circuit: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppt_examples() {
        let zero = DensityState::basis(2, 0);
        let plus = DensityState::from_bloch([1.0, 0.0, 0.0]).unwrap();
        assert!(is_ppt(&BipartiteState::product(&zero, &plus)));
        let bell = BipartiteState::bell();
        assert!((ppt_min_eigenvalue(&bell) + 0.5).abs() < 1e-12);
        assert!(!is_ppt(&bell));
        let werner = bell.matrix() * c64(0.9, 0.0) + linalg::identity(4) * c64(0.1 / 4.0, 0.0);
        let w = BipartiteState::from_matrix(werner, 2, 2).unwrap();
        // partial transpose spectrum: 0.9·(-1/2) + 0.025
        assert!((ppt_min_eigenvalue(&w) - (-0.45 + 0.025)).abs() < 1e-12);
        assert!(!is_ppt(&w));
    }

    #[test]
    fn ccqq_validation() {
        let bell = BipartiteState::bell();
        let mut s = CcQqState::single(&bell);
        assert!((s.total_probability() - 1.0).abs() < 1e-15);
        s.blocks[0].p = 0.5;
        let repr = serde_json::to_string(&s).unwrap();
        assert!(serde_json::from_str::<CcQqState>(&repr).is_err());
        assert!(BipartiteState::from_matrix(linalg::identity(4) * c64(0.25, 0.0), 2, 3).is_err());
    }
}
