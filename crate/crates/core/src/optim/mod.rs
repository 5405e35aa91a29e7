//! Small unconstrained optimizers used by the multi-start searches, and a
//! log-barrier interior-point method for problems with linear matrix inequalities.

pub mod barrier;

use nalgebra::DVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalOptions {
    pub max_iter: usize,
    /// Stop when the objective improves by less than `f_tol·(1 + |f|)` twice in a row.
    pub f_tol: f64,
    pub g_tol: f64,
    pub fd_step: f64,
}

impl Default for LocalOptions {
    fn default() -> Self {
        Self { max_iter: 200, f_tol: 1e-12, g_tol: 1e-9, fd_step: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalMinimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// Central finite-difference gradient.
pub fn fd_gradient(f: &impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let step = h * x[i].abs().max(1.0);
            xp[i] = x[i] + step;
            let fp = f(&xp);
            xp[i] = x[i] - step;
            let fm = f(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * step)
        })
        .collect()
}

/// BFGS with Armijo backtracking and finite-difference gradients.
pub fn bfgs(f: impl Fn(&[f64]) -> f64, x0: &[f64], opts: &LocalOptions) -> LocalMinimum {
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = f(x.as_slice());
    let mut g = DVector::from_vec(fd_gradient(&f, x.as_slice(), opts.fd_step));
    let mut h_inv = nalgebra::DMatrix::<f64>::identity(n, n);
    let mut stalls = 0;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        if g.amax() < opts.g_tol {
            break;
        }
        let mut dir = -(&h_inv * &g);
        let mut slope = g.dot(&dir);
        if slope >= 0.0 {
            h_inv.fill_with_identity();
            dir = -g.clone();
            slope = -g.norm_squared();
        }
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-16 {
            let trial = &x + &dir * step;
            let ft = f(trial.as_slice());
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else { break };
        let g_new = DVector::from_vec(fd_gradient(&f, x_new.as_slice(), opts.fd_step));
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-14 * s.norm() * y.norm() && sy > 0.0 {
            let rho = 1.0 / sy;
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            h_inv += (&s * s.transpose()) * (rho * rho * yhy + rho) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        let improvement = fx - f_new;
        x = x_new;
        g = g_new;
        fx = f_new;
        if improvement <= opts.f_tol * (1.0 + fx.abs()) {
            stalls += 1;
            if stalls >= 2 {
                break;
            }
        } else {
            stalls = 0;
        }
    }
    LocalMinimum { x: x.as_slice().to_vec(), value: fx, iterations }
}

/// Derivative-free compass search with step halving.
pub fn compass(f: impl Fn(&[f64]) -> f64, x0: &[f64], initial_step: f64, min_step: f64, max_evals: usize) -> LocalMinimum {
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut step = initial_step;
    let mut evals = 1;
    let mut iterations = 0;
    while step > min_step && evals < max_evals {
        iterations += 1;
        let mut improved = false;
        for i in 0..x.len() {
            for sign in [1.0, -1.0] {
                let old = x[i];
                x[i] = old + sign * step;
                let ft = f(&x);
                evals += 1;
                if ft < fx {
                    fx = ft;
                    improved = true;
                    break;
                }
                x[i] = old;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    LocalMinimum { x, value: fx, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn bfgs_solves_rosenbrock() {
        let m = bfgs(rosenbrock, &[-1.2, 1.0], &LocalOptions { max_iter: 500, ..Default::default() });
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{m:?}");
    }

    #[test]
    fn compass_finds_quadratic_minimum() {
        let m = compass(|x| (x[0] - 0.3).powi(2) + (x[1] + 0.7).powi(2), &[0.0, 0.0], 0.5, 1e-9, 100_000);
        assert!((m.x[0] - 0.3).abs() < 1e-8 && (m.x[1] + 0.7).abs() < 1e-8);
    }

    #[test]
    fn fd_gradient_matches_analytic() {
        let g = fd_gradient(&|x: &[f64]| x[0].sin() * x[1], &[0.4, 2.0], 1e-6);
        assert!((g[0] - 0.4f64.cos() * 2.0).abs() < 1e-8);
        assert!((g[1] - 0.4f64.sin()).abs() < 1e-8);
    }
}
