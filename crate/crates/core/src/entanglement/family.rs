//! Affine parametrisations of tuples of Hermitian blocks.

use crate::linalg::{self, c64, CMatrix};
use crate::optim::barrier::Lmi;

/// `blocks(x) = offset + Σ_i x_i dir_i`, each direction touching a few blocks.
#[derive(Debug, Clone)]
pub(crate) struct BlockFamily {
    pub size: usize,
    pub offset: Vec<CMatrix>,
    pub dirs: Vec<Vec<(usize, CMatrix)>>,
}

impl BlockFamily {
    /// Blocks of size `n` with fixed total trace: traceless directions per
    /// block plus trace transfer between neighbouring blocks.
    pub fn fixed_total_trace(n: usize, offset: Vec<CMatrix>) -> Self {
        let basis = linalg::traceless_hermitian_basis(n);
        let mut dirs = Vec::new();
        for b in 0..offset.len() {
            for m in &basis {
                dirs.push(vec![(b, m.clone())]);
            }
        }
        let unit = linalg::identity(n) * c64(1.0 / n as f64, 0.0);
        for b in 1..offset.len() {
            dirs.push(vec![(b - 1, unit.clone()), (b, -unit.clone())]);
        }
        Self { size: n, offset, dirs }
    }

    pub fn dim(&self) -> usize {
        self.dirs.len()
    }

    pub fn blocks(&self, x: &[f64]) -> Vec<CMatrix> {
        let mut out = self.offset.clone();
        for (dir, &xi) in self.dirs.iter().zip(x) {
            if xi != 0.0 {
                for (b, m) in dir {
                    out[*b] += m * c64(xi, 0.0);
                }
            }
        }
        out
    }

    /// The matrix inequality `constant + f(blocks(x)) ≻ 0` for a linear `f`.
    pub fn lmi(&self, constant: Option<&CMatrix>, f: impl Fn(&[CMatrix]) -> CMatrix) -> Lmi {
        let zero = CMatrix::zeros(self.size, self.size);
        let mut base = f(&self.offset);
        if let Some(c) = constant {
            base += c;
        }
        let dirs = self
            .dirs
            .iter()
            .map(|dir| {
                let mut full = vec![zero.clone(); self.offset.len()];
                for (b, m) in dir {
                    full[*b] += m;
                }
                f(&full)
            })
            .collect();
        Lmi { base, dirs }
    }
}
