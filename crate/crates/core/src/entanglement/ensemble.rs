use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BipartiteState, SepApproxResult, SepDiagnostics, SepMethod, SepOptions};
use crate::contraction::{best_of, chi2_matrices};
use crate::error::Result;
use crate::linalg::{self, c64, CMatrix, CVector};
use crate::optim::{self, LocalOptions};

/// `w_0 I/(d_A d_B) + Σ_k w_k |a_k⟩⟨a_k| ⊗ |b_k⟩⟨b_k|`: an explicitly separable state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableEnsemble {
    pub noise_weight: f64,
    pub weights: Vec<f64>,
    #[serde(with = "crate::io::matrices")]
    pub terms: Vec<CMatrix>,
}

struct Layout {
    da: usize,
    db: usize,
    k: usize,
}

impl Layout {
    fn len(&self) -> usize {
        self.k * 2 * (self.da + self.db) + self.k + 1
    }

    fn decode(&self, x: &[f64]) -> Option<(Vec<f64>, Vec<CMatrix>)> {
        let stride = 2 * (self.da + self.db);
        let logits = &x[self.k * stride..];
        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = exps.iter().sum();
        let weights = exps.iter().map(|e| e / total).collect();
        let mut terms = Vec::with_capacity(self.k);
        for t in 0..self.k {
            let chunk = &x[t * stride..(t + 1) * stride];
            let a = linalg::unit_vector_from_params(&chunk[..2 * self.da])?;
            let b = linalg::unit_vector_from_params(&chunk[2 * self.da..])?;
            let v: CVector = a.kronecker(&b);
            terms.push(linalg::outer(&v));
        }
        Some((weights, terms))
    }

    fn state(&self, x: &[f64]) -> Option<CMatrix> {
        let (w, terms) = self.decode(x)?;
        let n = self.da * self.db;
        let mut m = linalg::identity(n) * c64(w[self.k] / n as f64, 0.0);
        for (wk, t) in w.iter().zip(&terms) {
            m += t * c64(*wk, 0.0);
        }
        Some(m)
    }
}

/// Upper bound on the χ² divergence to separable states from an explicit
/// ensemble of product pure states, fitted first to `guide` (typically the
/// PPT minimizer) and then optimised directly.
pub fn ensemble_upper_bound(s: &BipartiteState, guide: &CMatrix, opts: &SepOptions) -> Result<(SepApproxResult, SeparableEnsemble)> {
    ensemble_search(s, guide, opts, chi2_matrices)
}

/// Same search for the trace-norm distance.
pub fn ensemble_upper_bound_distance(s: &BipartiteState, guide: &CMatrix, opts: &SepOptions) -> Result<(SepApproxResult, SeparableEnsemble)> {
    ensemble_search(s, guide, opts, |tau, sigma| linalg::trace_norm_herm(&(tau - sigma)))
}

fn ensemble_search(
    s: &BipartiteState,
    guide: &CMatrix,
    opts: &SepOptions,
    objective: impl Fn(&CMatrix, &CMatrix) -> f64 + Sync,
) -> Result<(SepApproxResult, SeparableEnsemble)> {
    s.require_small()?;
    let layout = Layout { da: s.dim_a(), db: s.dim_b(), k: opts.ensemble_terms.max(1) };
    let tau = s.matrix();
    let local = LocalOptions { max_iter: 400, f_tol: 1e-14, g_tol: 1e-10, fd_step: 1e-7 };
    let (best, x, _) = best_of(opts.seed, opts.ensemble_restarts, |r| {
        let mut x: Vec<f64> = (0..layout.len()).map(|_| r.sample(rand_distr::StandardNormal)).collect();
        let fit = |y: &[f64]| layout.state(y).map_or(f64::INFINITY, |m| (m - guide).norm_squared());
        x = optim::bfgs(fit, &x, &local).x;
        let f = |y: &[f64]| layout.state(y).map_or(f64::INFINITY, |m| objective(tau, &m));
        let m = optim::bfgs(f, &x, &local);
        (m.value, m.x)
    });
    let sigma = layout.state(&x).expect("optimizer keeps a valid ensemble");
    let (weights, terms) = layout.decode(&x).expect("valid ensemble");
    let ensemble = SeparableEnsemble { noise_weight: weights[layout.k], weights: weights[..layout.k].to_vec(), terms };
    let pt = linalg::partial_transpose(&sigma, s.dim_a(), s.dim_b());
    let result = SepApproxResult {
        value: best,
        method: SepMethod::EnsembleUpperBound,
        diagnostics: SepDiagnostics {
            newton_steps: 0,
            gap: 0.0,
            converged: true,
            min_eigenvalue: linalg::min_eigenvalue(&sigma),
            min_pt_eigenvalue: linalg::min_eigenvalue(&pt),
            short_circuit: false,
        },
        minimizer: sigma,
    };
    Ok((result, ensemble))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entanglement::{chisep, dsep};

    #[test]
    fn bell_sandwich_closes() {
        let opts = SepOptions::default();
        let bell = BipartiteState::bell();
        let lower = chisep(&bell, &opts).unwrap();
        let (upper, ens) = ensemble_upper_bound(&bell, &lower.minimizer, &opts).unwrap();
        assert!(lower.value <= upper.value + 1e-9);
        assert!(upper.value - lower.value <= 1e-3, "gap {} - {}", upper.value, lower.value);
        let total: f64 = ens.weights.iter().sum::<f64>() + ens.noise_weight;
        assert!((total - 1.0).abs() < 1e-12);

        let dl = dsep(&bell, &opts).unwrap();
        let (du, _) = ensemble_upper_bound_distance(&bell, &dl.minimizer, &opts).unwrap();
        assert!(dl.value <= du.value + 1e-9);
        assert!(du.value - dl.value <= 1e-4, "gap {} - {}", du.value, dl.value);
    }
}
