use serde::{Deserialize, Serialize};

use super::KrausChannel;
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix, ZERO};

/// Named qubit channel families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum Preset {
    Identity,
    /// `ρ ↦ (1-p)ρ + p I/2`.
    Depolarizing(f64),
    /// `ρ ↦ (1-p/2)ρ + (p/2) ZρZ`, Bloch scaling `(1-p, 1-p, 1)`.
    Dephasing(f64),
    AmplitudeDamping(f64),
    Unitary(#[serde(with = "crate::io::matrix")] CMatrix),
}

fn check_unit_interval(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} parameter {x} outside [0, 1]")))
    }
}

impl Preset {
    pub fn channel(&self) -> Result<KrausChannel> {
        let r = |x: f64| c64(x, 0.0);
        match self {
            Preset::Identity => Ok(KrausChannel::identity(2)),
            Preset::Depolarizing(p) => {
                check_unit_interval("depolarizing", *p)?;
                let mut ops = vec![linalg::identity(2) * r((1.0 - 0.75 * p).sqrt())];
                for k in 1..4 {
                    ops.push(linalg::pauli(k) * r((p / 4.0).sqrt()));
                }
                KrausChannel::new(ops)
            }
            Preset::Dephasing(p) => {
                check_unit_interval("dephasing", *p)?;
                KrausChannel::new(vec![
                    linalg::identity(2) * r((1.0 - p / 2.0).sqrt()),
                    linalg::pauli(3) * r((p / 2.0).sqrt()),
                ])
            }
            Preset::AmplitudeDamping(g) => {
                check_unit_interval("amplitude damping", *g)?;
                KrausChannel::new(vec![
                    CMatrix::from_row_slice(2, 2, &[r(1.0), ZERO, ZERO, r((1.0 - g).sqrt())]),
                    CMatrix::from_row_slice(2, 2, &[ZERO, r(g.sqrt()), ZERO, ZERO]),
                ])
            }
            Preset::Unitary(u) => {
                if !u.is_square() {
                    return Err(Error::Dimension("unitary preset must be square".into()));
                }
                let n = u.nrows();
                let res = linalg::spectral_norm(&(u.adjoint() * u - linalg::identity(n)));
                if res > 1e-9 {
                    return Err(Error::InvalidParameter(format!("matrix is not unitary (residual {res:.3e})")));
                }
                KrausChannel::new(vec![u.clone()])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::DensityState;

    #[test]
    fn depolarizing_zero_is_identity() {
        let d = Preset::Depolarizing(0.0).channel().unwrap();
        assert!(d.choi_distance(&KrausChannel::identity(2)) < 1e-12);
    }

    #[test]
    fn extreme_parameters_collapse_states() {
        let full = Preset::Depolarizing(1.0).channel().unwrap();
        let ad = Preset::AmplitudeDamping(1.0).channel().unwrap();
        for r in [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.3, 0.2, -0.5]] {
            let s = DensityState::from_bloch(r).unwrap();
            let out = full.apply_state(&s).unwrap();
            assert!(linalg::max_abs(&(out.matrix() - linalg::identity(2) * c64(0.5, 0.0))) < 1e-12);
            let out = ad.apply_state(&s).unwrap();
            assert!(linalg::max_abs(&(out.matrix() - DensityState::basis(2, 0).matrix())) < 1e-12);
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(Preset::Depolarizing(1.2).channel().is_err());
        assert!(Preset::AmplitudeDamping(-0.1).channel().is_err());
        assert!(Preset::Dephasing(f64::NAN).channel().is_err());
        assert!(Preset::Unitary(linalg::identity(2) * c64(2.0, 0.0)).channel().is_err());
    }
}
