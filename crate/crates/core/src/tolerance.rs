use serde::{Deserialize, Serialize};

/// Numerical tolerances shared by validation and conversion routines.
///
/// The defaults leave several orders of magnitude of headroom for double
/// precision arithmetic on matrices of dimension at most 16.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Hermiticity residual, max-entry norm of `A - A†`.
    pub herm: f64,
    /// Allowed negative eigenvalue for positive semidefiniteness.
    pub psd: f64,
    /// Trace-preservation residual, spectral norm of `Σ K†K - I`.
    pub tp: f64,
    /// Agreement between two representations of the same map (Choi 1-norm).
    pub conv: f64,
    /// Relative eigenvalue threshold below which a direction is outside the support.
    pub supp: f64,
    /// Trace normalisation of density matrices.
    pub trace: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { herm: 1e-9, psd: 1e-9, tp: 1e-9, conv: 1e-7, supp: 1e-10, trace: 1e-9 }
    }
}
