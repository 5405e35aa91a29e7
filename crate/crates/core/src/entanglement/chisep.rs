use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::family::BlockFamily;
use super::{diagnostics, is_ppt, method_for, BipartiteState, CcQqState, SepApproxResult, SepMethod, SepOptions};
use crate::error::Result;
use crate::linalg::{self, c64, CMatrix, RMatrix};
use crate::optim::barrier::{self, ConvexObjective};

/// First divided difference of `x^{-1/2}`.
fn dd1(a: f64, b: f64) -> f64 {
    let (sa, sb) = (a.sqrt(), b.sqrt());
    -1.0 / (sa * sb * (sa + sb))
}

/// Second divided difference of `x^{-1/2}`.
fn dd2(a: f64, b: f64, c: f64) -> f64 {
    let (sa, sb, sc) = (a.sqrt(), b.sqrt(), c.sqrt());
    (sa + sb + sc) / (sa * sb * sc * (sa + sb) * (sb + sc) * (sa + sc))
}

/// `Σ_b w_b Tr(ρ_b σ_b^{-1/2} ρ_b σ_b^{-1/2}) − 1` over a block family.
pub(crate) struct Chi2Objective<'a> {
    pub family: &'a BlockFamily,
    pub targets: Vec<(f64, CMatrix)>,
}

struct BlockData {
    values: Vec<f64>,
    vectors: CMatrix,
    rho: CMatrix,
    q: CMatrix,
    g1: Vec<f64>,
}

impl Chi2Objective<'_> {
    fn block_data(&self, sigma: &CMatrix, rho: &CMatrix) -> Option<BlockData> {
        let e = linalg::eigh(sigma);
        if !(e.min() > 0.0) {
            return None;
        }
        let n = e.values.len();
        let rho_e = e.vectors.adjoint() * rho * &e.vectors;
        let s: Vec<f64> = e.values.iter().map(|x| x.powf(-0.5)).collect();
        let q = CMatrix::from_fn(n, n, |k, l| (0..n).map(|m| rho_e[(k, m)] * s[m] * rho_e[(m, l)]).sum());
        let g1 = (0..n * n).map(|kl| dd1(e.values[kl / n], e.values[kl % n])).collect();
        Some(BlockData { values: e.values, vectors: e.vectors, rho: rho_e, q, g1 })
    }

    fn all_data(&self, x: &[f64]) -> Option<Vec<BlockData>> {
        let blocks = self.family.blocks(x);
        blocks.iter().zip(&self.targets).map(|(s, (_, r))| self.block_data(s, r)).collect()
    }

    fn rotate(data: &BlockData, m: &CMatrix) -> CMatrix {
        data.vectors.adjoint() * m * &data.vectors
    }
}

impl ConvexObjective for Chi2Objective<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let blocks = self.family.blocks(x);
        let mut total = -1.0;
        for (sigma, (w, rho)) in blocks.iter().zip(&self.targets) {
            let e = linalg::eigh(sigma);
            if !(e.min() > 0.0) {
                return f64::INFINITY;
            }
            let s = e.map(|v| v.powf(-0.5));
            let a = rho * &s;
            total += w * linalg::re_trace_product(&a, &a);
        }
        total
    }

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let data = self.all_data(x).expect("gradient at a feasible point");
        let mut g = DVector::zeros(self.family.dim());
        for (i, dir) in self.family.dirs.iter().enumerate() {
            for (b, m) in dir {
                let d = &data[*b];
                let n = d.values.len();
                let dp = Self::rotate(d, m);
                let mut acc = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        acc += (d.q[(l, k)] * dp[(k, l)]).re * d.g1[k * n + l];
                    }
                }
                g[i] += 2.0 * self.targets[*b].0 * acc;
            }
        }
        g
    }

    fn hessian(&self, x: &[f64]) -> RMatrix {
        let data = self.all_data(x).expect("hessian at a feasible point");
        let m = self.family.dim();
        let mut h = RMatrix::zeros(m, m);
        for (b, d) in data.iter().enumerate() {
            let n = d.values.len();
            let w = self.targets[b].0;
            let f2: Vec<f64> = (0..n * n * n)
                .map(|idx| dd2(d.values[idx / (n * n)], d.values[(idx / n) % n], d.values[idx % n]))
                .collect();
            // directions touching block b, rotated into the eigenbasis
            let touching: Vec<(usize, CMatrix)> = self
                .family
                .dirs
                .iter()
                .enumerate()
                .filter_map(|(i, dir)| dir.iter().find(|(bb, _)| *bb == b).map(|(_, mat)| (i, Self::rotate(d, mat))))
                .collect();
            let prepared: Vec<(usize, CMatrix, CMatrix, CMatrix)> = touching
                .into_iter()
                .map(|(i, dp)| {
                    let ds = CMatrix::from_fn(n, n, |k, l| dp[(k, l)] * d.g1[k * n + l]);
                    let a = &d.rho * ds;
                    let r = CMatrix::from_fn(n, n, |mm, l| {
                        (0..n).map(|k| d.q[(l, k)] * dp[(k, mm)] * f2[(k * n + mm) * n + l]).sum()
                    });
                    (i, dp, a, r)
                })
                .collect();
            for (ii, (i, dpi, ai, ri)) in prepared.iter().enumerate() {
                for (j, dpj, aj, rj) in prepared.iter().skip(ii) {
                    let first = linalg::re_trace_product(ai, aj);
                    let mut second = 0.0;
                    for mm in 0..n {
                        for l in 0..n {
                            second += (dpj[(mm, l)] * ri[(mm, l)]).re + (dpi[(mm, l)] * rj[(mm, l)]).re;
                        }
                    }
                    let v = 2.0 * w * (first + second);
                    h[(*i, *j)] += v;
                    if i != j {
                        h[(*j, *i)] += v;
                    }
                }
            }
        }
        h
    }
}

/// Result of a block-diagonal minimisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSepResult {
    pub value: f64,
    /// Unnormalised blocks `q_b σ_b`, total trace one.
    #[serde(with = "crate::io::matrices")]
    pub blocks: Vec<CMatrix>,
    pub newton_steps: usize,
    pub gap: f64,
    pub converged: bool,
}

/// Minimises `Σ_b p_b² Tr(ρ_b Σ_b^{-1/2} ρ_b Σ_b^{-1/2}) − 1` over positive
/// blocks `Σ_b` with positive partial transposes and total trace one, i.e.
/// the χ² divergence of a cc-qq state to block-diagonal PPT states.
pub fn chisep_blocks(weights: &[f64], states: &[CMatrix], dim_a: usize, dim_b: usize, opts: &SepOptions) -> Result<BlockSepResult> {
    let n = dim_a * dim_b;
    let offset = weights.iter().map(|p| linalg::identity(n) * c64(p / n as f64, 0.0)).collect();
    let family = BlockFamily::fixed_total_trace(n, offset);
    let mut lmis = Vec::new();
    for b in 0..weights.len() {
        lmis.push(family.lmi(None, |bl| bl[b].clone()));
        lmis.push(family.lmi(None, |bl| linalg::partial_transpose(&bl[b], dim_a, dim_b)));
    }
    let obj = Chi2Objective {
        family: &family,
        targets: weights.iter().zip(states).map(|(p, r)| (p * p, r.clone())).collect(),
    };
    let res = barrier::minimize(&obj, &lmis, &vec![0.0; family.dim()], &opts.barrier())?;
    Ok(BlockSepResult {
        value: res.value.max(0.0),
        blocks: family.blocks(&res.x),
        newton_steps: res.newton_steps,
        gap: res.gap,
        converged: res.converged,
    })
}

/// χ² divergence to the PPT set (the separable set for 2⊗2 and 2⊗3).
pub fn chisep(s: &BipartiteState, opts: &SepOptions) -> Result<SepApproxResult> {
    s.require_small()?;
    let (da, db) = (s.dim_a(), s.dim_b());
    let method = method_for(da, db);
    if is_ppt(s) {
        let mut diag = diagnostics(s.matrix(), da, db);
        diag.short_circuit = true;
        return Ok(SepApproxResult { value: 0.0, minimizer: s.matrix().clone(), method, diagnostics: diag });
    }
    let res = chisep_blocks(&[1.0], std::slice::from_ref(s.matrix()), da, db, opts)?;
    let sigma = res.blocks[0].clone();
    let mut diag = diagnostics(&sigma, da, db);
    diag.newton_steps = res.newton_steps;
    diag.gap = res.gap;
    diag.converged = res.converged;
    Ok(SepApproxResult { value: res.value, minimizer: sigma, method, diagnostics: diag })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcQqSepResult {
    pub value: f64,
    pub block_values: Vec<f64>,
    /// Optimal classical weights `q_xy ∝ p_xy √(χ²_Sep(ρ_xy) + 1)`.
    pub weights: Vec<f64>,
    pub method: SepMethod,
}

/// `(Σ p_xy √(χ²_Sep(ρ_xy) + 1))² − 1` from per-block minimisations.
pub fn chisep_ccqq(s: &CcQqState, opts: &SepOptions) -> Result<CcQqSepResult> {
    let results: Vec<Result<SepApproxResult>> = (0..s.blocks().len())
        .into_par_iter()
        .map(|k| chisep(&s.block_state(k), opts))
        .collect();
    let mut block_values = Vec::with_capacity(results.len());
    let mut method = SepMethod::PptExact2x2;
    for r in results {
        let r = r?;
        method = r.method;
        block_values.push(r.value);
    }
    let terms: Vec<f64> = s.blocks().iter().zip(&block_values).map(|(b, v)| b.p * (v + 1.0).sqrt()).collect();
    let z: f64 = terms.iter().sum();
    Ok(CcQqSepResult {
        value: (z * z - 1.0).max(0.0),
        block_values,
        weights: terms.iter().map(|t| t / z).collect(),
        method,
    })
}

/// Direct minimisation over block-diagonal PPT states, without the closed form.
pub fn chisep_ccqq_direct(s: &CcQqState, opts: &SepOptions) -> Result<BlockSepResult> {
    let weights: Vec<f64> = s.blocks().iter().map(|b| b.p).collect();
    let states: Vec<CMatrix> = s.blocks().iter().map(|b| b.rho.clone()).collect();
    chisep_blocks(&weights, &states, s.dim_a(), s.dim_b(), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contraction::chi2_matrices;
    use crate::optim::fd_gradient;
    use crate::rng;

    #[test]
    fn divided_differences_match_derivatives() {
        let f = |x: f64| x.powf(-0.5);
        let a = 0.37;
        assert!((dd1(a, a) - (-0.5 * a.powf(-1.5))).abs() < 1e-12);
        assert!((dd2(a, a, a) - 0.375 * a.powf(-2.5)).abs() < 1e-12);
        let (a, b, c) = (0.2, 0.5, 0.9);
        assert!((dd1(a, b) - (f(a) - f(b)) / (a - b)).abs() < 1e-12);
        assert!((dd2(a, b, c) - (dd1(a, b) - dd1(b, c)) / (a - c)).abs() < 1e-12);
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let mut r = rng::stream(12, 0);
        let n = 4;
        let rhos = vec![linalg::random_density(n, 2, &mut r), linalg::random_density(n, 4, &mut r)];
        let offset = vec![linalg::identity(n) * c64(0.1, 0.0), linalg::identity(n) * c64(0.15, 0.0)];
        let family = BlockFamily::fixed_total_trace(n, offset);
        let obj = Chi2Objective { family: &family, targets: vec![(0.16, rhos[0].clone()), (0.36, rhos[1].clone())] };
        let x: Vec<f64> = (0..family.dim()).map(|i| 0.01 * ((i * 7 % 5) as f64 - 2.0)).collect();
        let g = obj.gradient(&x);
        let g_fd = fd_gradient(&|y: &[f64]| obj.value(y), &x, 1e-6);
        for i in 0..x.len() {
            assert!((g[i] - g_fd[i]).abs() < 1e-5 * (1.0 + g[i].abs()), "grad {i}: {} vs {}", g[i], g_fd[i]);
        }
        let h = obj.hessian(&x);
        let h_step = 1e-6;
        for j in 0..x.len() {
            let mut xp = x.clone();
            xp[j] += h_step;
            let mut xm = x.clone();
            xm[j] -= h_step;
            let col = (obj.gradient(&xp) - obj.gradient(&xm)) / (2.0 * h_step);
            for i in 0..x.len() {
                assert!((h[(i, j)] - col[i]).abs() < 1e-4 * (1.0 + h[(i, j)].abs()), "hess {i},{j}: {} vs {}", h[(i, j)], col[i]);
            }
        }
        // value matches the χ² divergence for a single block
        let blocks = family.blocks(&x);
        let direct = 0.16 * (chi2_matrices(&rhos[0], &(&blocks[0] / c64(linalg::trace(&blocks[0]).re, 0.0))) + 1.0)
            / linalg::trace(&blocks[0]).re;
        let a = obj.value(&x) + 1.0;
        let second = a - direct;
        let expected = 0.36 * (chi2_matrices(&rhos[1], &(&blocks[1] / c64(linalg::trace(&blocks[1]).re, 0.0))) + 1.0)
            / linalg::trace(&blocks[1]).re;
        assert!((second - expected).abs() < 1e-9);
    }

    #[test]
    fn isotropic_closed_form() {
        let opts = SepOptions::default();
        let bell = chisep(&BipartiteState::bell(), &opts).unwrap();
        assert!((bell.value - 1.0).abs() < 1e-6, "{}", bell.value);
        assert!(bell.value <= 3.0);
        for f in [0.6, 0.75, 0.9] {
            let s = BipartiteState::isotropic(2, f).unwrap();
            let v = chisep(&s, &opts).unwrap().value;
            assert!((v - (2.0 * f - 1.0).powi(2)).abs() < 1e-6, "f={f}: {v}");
        }
    }

    #[test]
    fn separable_inputs_short_circuit() {
        let zero = crate::state::DensityState::basis(2, 0);
        let s = BipartiteState::product(&zero, &zero);
        let r = chisep(&s, &SepOptions::default()).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.diagnostics.short_circuit);
    }

    #[test]
    fn ccqq_formula_examples() {
        let opts = SepOptions::default();
        let bell = BipartiteState::bell();
        let single = chisep_ccqq(&CcQqState::single(&bell), &opts).unwrap();
        assert!((single.value - chisep(&bell, &opts).unwrap().value).abs() < 1e-12);
        let zero = crate::state::DensityState::basis(2, 0);
        let prod = BipartiteState::product(&zero, &zero);
        let blocks = vec![
            super::super::CcQqBlock { x: vec![0], y: vec![0], p: 0.5, rho: bell.matrix().clone() },
            super::super::CcQqBlock { x: vec![1], y: vec![1], p: 0.5, rho: prod.matrix().clone() },
        ];
        let s = CcQqState::new(2, 2, blocks).unwrap();
        let formula = chisep_ccqq(&s, &opts).unwrap();
        // (½√2 + ½)² − 1
        let expected = (0.5 * 2f64.sqrt() + 0.5).powi(2) - 1.0;
        assert!((formula.value - expected).abs() < 1e-6);
        let direct = chisep_ccqq_direct(&s, &opts).unwrap();
        assert!((direct.value - formula.value).abs() < 1e-4, "{} vs {}", direct.value, formula.value);
    }
}
