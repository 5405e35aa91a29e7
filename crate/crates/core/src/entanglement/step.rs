use serde::{Deserialize, Serialize};

use super::{chisep_ccqq, CcQqState, SepOptions, SeparableChannel};
use crate::contraction::{eta_chi_lower, eta_tr_upper_minoutev, SearchOptions};
use crate::error::{Error, Result};

/// Both sides of `χ²_Sep(T(s)) ≤ (1 − (ε²/100)(1 − η)) χ²_Sep(s)` with `η` an
/// upper bound on the χ² contraction coefficient of `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionStepReport {
    pub epsilon: f64,
    pub chisep_in: f64,
    pub chisep_out: f64,
    pub eta_upper: f64,
    /// Diagnostic only; never enters the inequality.
    pub eta_chi_lower: f64,
    pub factor: f64,
    pub rhs: f64,
    pub slack: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct StepOptions {
    pub sep: SepOptions,
    pub search: SearchOptions,
    pub eta_chi_trials: usize,
    /// Absolute tolerance on the comparison.
    pub tol: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self { sep: SepOptions::default(), search: SearchOptions::default(), eta_chi_trials: 8, tol: 1e-6 }
    }
}

pub fn verify_contraction_step(s: &CcQqState, t: &SeparableChannel, epsilon: f64, opts: &StepOptions) -> Result<ContractionStepReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0,1), got {epsilon}")));
    }
    let chisep_in = chisep_ccqq(s, &opts.sep)?.value;
    if chisep_in < epsilon {
        return Err(Error::Precondition(format!("chi2 to separable states {chisep_in} is below epsilon {epsilon}")));
    }
    let out = t.apply_ccqq(s)?;
    let chisep_out = chisep_ccqq(&out, &opts.sep)?.value;
    let eta_upper = eta_tr_upper_minoutev(t.channel(), &opts.search)?.value;
    let eta_chi = if opts.eta_chi_trials > 0 {
        eta_chi_lower(t.channel(), opts.eta_chi_trials, opts.search.seed)?.value
    } else {
        f64::NAN
    };
    let factor = 1.0 - epsilon * epsilon / 100.0 * (1.0 - eta_upper);
    let rhs = factor * chisep_in;
    let slack = rhs - chisep_out;
    Ok(ContractionStepReport {
        epsilon,
        chisep_in,
        chisep_out,
        eta_upper,
        eta_chi_lower: eta_chi,
        factor,
        rhs,
        slack,
        passed: slack >= -opts.tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Preset;
    use crate::entanglement::BipartiteState;

    fn bell() -> CcQqState {
        CcQqState::single(&BipartiteState::bell())
    }

    #[test]
    fn identity_is_tight() {
        let r = verify_contraction_step(&bell(), &SeparableChannel::identity(2, 2), 0.1, &StepOptions::default()).unwrap();
        assert!((r.eta_upper - 1.0).abs() < 1e-9);
        assert!((r.rhs - r.chisep_in).abs() < 1e-9);
        assert!(r.passed);
    }

    #[test]
    fn complete_depolarizing_kills_entanglement() {
        let d = Preset::Depolarizing(1.0).channel().unwrap();
        let r = verify_contraction_step(&bell(), &SeparableChannel::local(&d, &d), 0.1, &StepOptions::default()).unwrap();
        assert_eq!(r.chisep_out, 0.0);
        assert!(r.passed);
    }

    #[test]
    fn half_depolarizing_both_sides() {
        let d = Preset::Depolarizing(0.5).channel().unwrap();
        let r = verify_contraction_step(&bell(), &SeparableChannel::local(&d, &d), 1.0 / 16.0, &StepOptions::default()).unwrap();
        // Output is isotropic with fidelity 1/4 + 3/4 · 1/4 = 7/16 < 1/2, hence separable.
        assert_eq!(r.chisep_out, 0.0);
        assert!(r.eta_upper < 1.0);
        assert!(r.passed);
    }

    #[test]
    fn precondition_enforced() {
        let zero = crate::state::DensityState::basis(2, 0);
        let s = CcQqState::single(&BipartiteState::product(&zero, &zero));
        let e = verify_contraction_step(&s, &SeparableChannel::identity(2, 2), 0.1, &StepOptions::default());
        assert!(matches!(e, Err(Error::Precondition(_))));
    }
}
