use nalgebra::DVector;

use super::family::BlockFamily;
use super::{diagnostics, is_ppt, method_for, BipartiteState, SepApproxResult, SepOptions};
use crate::error::Result;
use crate::linalg::{self, c64, CMatrix, RMatrix};
use crate::optim::barrier::{self, ConvexObjective};

/// `Tr P + Tr N`; only the shared trace direction (the last one) moves it.
struct TraceSum {
    dim: usize,
    slope: f64,
}

impl ConvexObjective for TraceSum {
    fn value(&self, x: &[f64]) -> f64 {
        self.slope * x[self.dim - 1]
    }
    fn gradient(&self, _: &[f64]) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim);
        g[self.dim - 1] = self.slope;
        g
    }
    fn hessian(&self, _: &[f64]) -> RMatrix {
        RMatrix::zeros(self.dim, self.dim)
    }
}

/// Trace-norm distance `min ‖τ − ζ‖₁` over PPT states `ζ`, as the program
/// `min Tr P + Tr N` with `τ − ζ = P − N`, `P, N ⪰ 0`.
pub fn dsep(s: &BipartiteState, opts: &SepOptions) -> Result<SepApproxResult> {
    s.require_small()?;
    let (da, db) = (s.dim_a(), s.dim_b());
    let n = s.dim();
    let method = method_for(da, db);
    if is_ppt(s) {
        let mut diag = diagnostics(s.matrix(), da, db);
        diag.short_circuit = true;
        return Ok(SepApproxResult { value: 0.0, minimizer: s.matrix().clone(), method, diagnostics: diag });
    }
    let tau = s.matrix();
    let zeta0 = linalg::identity(n) * c64(1.0 / n as f64, 0.0);
    let e = linalg::eigh(&(tau - &zeta0));
    let delta = 0.1 / n as f64;
    let p0 = e.map(|x| x.max(0.0)) + linalg::identity(n) * c64(delta, 0.0);
    let n0 = e.map(|x| (-x).max(0.0)) + linalg::identity(n) * c64(delta, 0.0);

    let basis = linalg::traceless_hermitian_basis(n);
    let mut dirs: Vec<Vec<(usize, CMatrix)>> = Vec::new();
    for b in 0..2 {
        for m in &basis {
            dirs.push(vec![(b, m.clone())]);
        }
    }
    let unit = linalg::identity(n) * c64(1.0 / n as f64, 0.0);
    dirs.push(vec![(0, unit.clone()), (1, unit)]);
    let family = BlockFamily { size: n, offset: vec![p0, n0], dirs };

    let lmis = vec![
        family.lmi(None, |b| b[0].clone()),
        family.lmi(None, |b| b[1].clone()),
        family.lmi(Some(tau), |b| &b[1] - &b[0]),
        family.lmi(Some(&linalg::partial_transpose(tau, da, db)), |b| {
            linalg::partial_transpose(&(&b[1] - &b[0]), da, db)
        }),
    ];
    let obj = TraceSum { dim: family.dim(), slope: 2.0 };
    let res = barrier::minimize(&obj, &lmis, &vec![0.0; family.dim()], &opts.barrier())?;
    let blocks = family.blocks(&res.x);
    let zeta = tau - &blocks[0] + &blocks[1];
    let value = linalg::trace_norm_herm(&(tau - &zeta));
    let mut diag = diagnostics(&zeta, da, db);
    diag.newton_steps = res.newton_steps;
    diag.gap = res.gap;
    diag.converged = res.converged;
    Ok(SepApproxResult { value, minimizer: zeta, method, diagnostics: diag })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::DensityState;

    #[test]
    fn product_state_is_at_distance_zero() {
        let zero = DensityState::basis(2, 0);
        let one = DensityState::basis(2, 1);
        let r = dsep(&BipartiteState::product(&zero, &one), &SepOptions::default()).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn isotropic_closed_form() {
        let opts = SepOptions::default();
        let bell = dsep(&BipartiteState::bell(), &opts).unwrap();
        assert!(bell.value >= 0.5);
        assert!((bell.value - 1.0).abs() < 1e-6, "{}", bell.value);
        for f in [0.6, 0.8] {
            let v = dsep(&BipartiteState::isotropic(2, f).unwrap(), &opts).unwrap();
            assert!((v.value - (2.0 * f - 1.0)).abs() < 1e-6, "f={f}: {}", v.value);
            assert!(v.diagnostics.min_pt_eigenvalue > -1e-8);
        }
    }
}
