//! Log-barrier interior-point method for
//! `min f(x)` subject to `A_j(x) = B_j + Σ_i x_i D_ji ≻ 0`, with `f` convex
//! and twice differentiable on the feasible set.

use nalgebra::{Cholesky, DVector, Dyn};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, RMatrix};

/// Affine Hermitian matrix function of the parameters.
#[derive(Debug, Clone)]
pub struct Lmi {
    pub base: CMatrix,
    pub dirs: Vec<CMatrix>,
}

impl Lmi {
    pub fn eval(&self, x: &[f64]) -> CMatrix {
        let mut m = self.base.clone();
        for (d, &xi) in self.dirs.iter().zip(x) {
            if xi != 0.0 {
                m += d * crate::linalg::c64(xi, 0.0);
            }
        }
        m
    }

    fn size(&self) -> usize {
        self.base.nrows()
    }
}

pub trait ConvexObjective {
    /// `+∞` outside the domain.
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> DVector<f64>;
    fn hessian(&self, x: &[f64]) -> RMatrix;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierOptions {
    /// Target duality-gap bound `ν / t`.
    pub gap: f64,
    pub t0: f64,
    pub growth: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self { gap: 1e-9, t0: 1.0, growth: 8.0, newton_tol: 1e-11, max_newton: 4000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub gap: f64,
    pub newton_steps: usize,
    pub rounds: usize,
    pub converged: bool,
}

/// Cholesky factor of a Hermitian matrix, `None` unless every pivot is real and positive.
pub(crate) fn chol(m: &CMatrix) -> Option<Cholesky<crate::linalg::C64, Dyn>> {
    let c = Cholesky::new(crate::linalg::hermitize(m))?;
    let l = c.l_dirty();
    let ok = (0..l.nrows()).all(|i| {
        let z = l[(i, i)];
        z.re > 0.0 && z.re.is_finite() && z.im.abs() <= 1e-12 * z.re
    });
    ok.then_some(c)
}

fn log_det(c: &Cholesky<crate::linalg::C64, Dyn>) -> f64 {
    let l = c.l_dirty();
    (0..l.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum()
}

struct Barrier<'a> {
    lmis: &'a [Lmi],
}

impl Barrier<'_> {
    /// `-Σ log det A_j(x)`, `None` when infeasible.
    fn value(&self, x: &[f64]) -> Option<f64> {
        let mut total = 0.0;
        for l in self.lmis {
            let c = chol(&l.eval(x))?;
            let ld = log_det(&c);
            if !ld.is_finite() {
                return None;
            }
            total -= ld;
        }
        Some(total)
    }

    fn derivatives(&self, x: &[f64], m: usize) -> Option<(DVector<f64>, RMatrix)> {
        let mut g = DVector::zeros(m);
        let mut h = RMatrix::zeros(m, m);
        for l in self.lmis {
            let inv = chol(&l.eval(x))?.inverse();
            let prods: Vec<Option<CMatrix>> = l
                .dirs
                .iter()
                .map(|d| (d.iter().any(|z| z.norm_sqr() > 0.0)).then(|| &inv * d))
                .collect();
            for i in 0..m {
                let Some(pi) = &prods[i] else { continue };
                g[i] -= (0..pi.nrows()).map(|k| pi[(k, k)].re).sum::<f64>();
                for j in i..m {
                    let Some(pj) = &prods[j] else { continue };
                    let v = crate::linalg::re_trace_product(pi, pj);
                    h[(i, j)] += v;
                    if i != j {
                        h[(j, i)] += v;
                    }
                }
            }
        }
        Some((g, h))
    }
}

fn solve_spd(h: &RMatrix, g: &DVector<f64>) -> DVector<f64> {
    let n = h.nrows();
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut ridge = 0.0;
    loop {
        let mut m = h.clone();
        for i in 0..n {
            m[(i, i)] += ridge;
        }
        if let Some(c) = m.cholesky() {
            return c.solve(g);
        }
        ridge = if ridge == 0.0 { 1e-14 * scale } else { ridge * 10.0 };
    }
}

/// Runs the barrier method from the strictly feasible point `x0`.
pub fn minimize(obj: &impl ConvexObjective, lmis: &[Lmi], x0: &[f64], opts: &BarrierOptions) -> Result<BarrierResult> {
    let m = x0.len();
    let barrier = Barrier { lmis };
    if barrier.value(x0).is_none() || !obj.value(x0).is_finite() {
        return Err(Error::Numerical("barrier start point is not strictly feasible".into()));
    }
    let nu: f64 = lmis.iter().map(|l| l.size() as f64).sum();
    let mut x = x0.to_vec();
    let mut t = opts.t0;
    let mut newton_steps = 0;
    let mut rounds = 0;
    let mut converged = false;
    loop {
        rounds += 1;
        // centering
        let psi = |x: &[f64]| -> Option<f64> {
            let b = barrier.value(x)?;
            let f = obj.value(x);
            f.is_finite().then_some(t * f + b)
        };
        let mut current = psi(&x).expect("iterate stays feasible");
        for _ in 0..200 {
            if newton_steps >= opts.max_newton {
                break;
            }
            newton_steps += 1;
            let Some((gb, hb)) = barrier.derivatives(&x, m) else { break };
            let g = obj.gradient(&x) * t + gb;
            let h = obj.hessian(&x) * t + hb;
            let dx = -solve_spd(&h, &g);
            let dec2 = -g.dot(&dx);
            if !(dec2 > 2.0 * opts.newton_tol) {
                break;
            }
            let mut s = 1.0;
            let mut moved = false;
            while s > 1e-14 {
                let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, b)| a + s * b).collect();
                if let Some(v) = psi(&trial) {
                    if v <= current - 0.25 * s * dec2 {
                        x = trial;
                        current = v;
                        moved = true;
                        break;
                    }
                }
                s *= 0.5;
            }
            if !moved {
                break;
            }
        }
        let gap = nu / t;
        if gap <= opts.gap {
            converged = true;
            break;
        }
        if newton_steps >= opts.max_newton {
            break;
        }
        t *= opts.growth;
    }
    Ok(BarrierResult { value: obj.value(&x), gap: nu / t, x, newton_steps, rounds, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, c64};

    struct Linear(DVector<f64>);

    impl ConvexObjective for Linear {
        fn value(&self, x: &[f64]) -> f64 {
            self.0.iter().zip(x).map(|(a, b)| a * b).sum()
        }
        fn gradient(&self, _: &[f64]) -> DVector<f64> {
            self.0.clone()
        }
        fn hessian(&self, _: &[f64]) -> RMatrix {
            RMatrix::zeros(self.0.len(), self.0.len())
        }
    }

    #[test]
    fn linear_objective_over_density_matrices_reaches_min_eigenvalue() {
        // min Tr(C ρ) over ρ = I/d + Σ x_i B_i ≻ 0 equals λ_min(C)
        let mut r = crate::rng::stream(2, 0);
        let d = 3;
        let g = linalg::ginibre(d, d, &mut r);
        let c = linalg::hermitize(&(&g + g.adjoint()));
        let basis = linalg::traceless_hermitian_basis(d);
        let cost = DVector::from_iterator(basis.len(), basis.iter().map(|b| linalg::hs_inner(&c, b).re));
        let lmi = Lmi { base: linalg::identity(d) * c64(1.0 / d as f64, 0.0), dirs: basis };
        let res = minimize(&Linear(cost), std::slice::from_ref(&lmi), &vec![0.0; d * d - 1], &BarrierOptions::default()).unwrap();
        let value = linalg::hs_inner(&c, &lmi.eval(&res.x)).re;
        assert!(res.converged);
        assert!((value - linalg::min_eigenvalue(&c)).abs() < 1e-7, "{value} vs {}", linalg::min_eigenvalue(&c));
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let lmi = Lmi { base: -linalg::identity(2), dirs: vec![linalg::identity(2)] };
        let obj = Linear(DVector::from_vec(vec![1.0]));
        assert!(minimize(&obj, &[lmi], &[0.0], &BarrierOptions::default()).is_err());
    }
}
