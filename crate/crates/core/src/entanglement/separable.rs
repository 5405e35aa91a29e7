use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BipartiteState, CcQqState};
use crate::channel::KrausChannel;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::tolerance::Tolerances;

/// A bipartite channel given by product Kraus operators `K_A ⊗ K_B`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SeparableChannelData", into = "SeparableChannelData")]
pub struct SeparableChannel {
    pairs: Vec<(CMatrix, CMatrix)>,
    channel: KrausChannel,
}

#[derive(Serialize, Deserialize)]
struct SeparableChannelData {
    #[serde(with = "crate::io::matrices")]
    a: Vec<CMatrix>,
    #[serde(with = "crate::io::matrices")]
    b: Vec<CMatrix>,
}

impl TryFrom<SeparableChannelData> for SeparableChannel {
    type Error = Error;
    fn try_from(d: SeparableChannelData) -> Result<Self> {
        if d.a.len() != d.b.len() {
            return Err(Error::Dimension(format!("{} A factors but {} B factors", d.a.len(), d.b.len())));
        }
        Self::new(d.a.into_iter().zip(d.b).collect())
    }
}

impl From<SeparableChannel> for SeparableChannelData {
    fn from(c: SeparableChannel) -> Self {
        let (a, b) = c.pairs.into_iter().unzip();
        Self { a, b }
    }
}

impl SeparableChannel {
    pub fn new(pairs: Vec<(CMatrix, CMatrix)>) -> Result<Self> {
        Self::with_tolerances(pairs, &Tolerances::default())
    }

    pub fn with_tolerances(pairs: Vec<(CMatrix, CMatrix)>, tol: &Tolerances) -> Result<Self> {
        let Some((a0, b0)) = pairs.first() else {
            return Err(Error::InvalidParameter("separable channel needs at least one Kraus pair".into()));
        };
        let (sa, sb) = (a0.shape(), b0.shape());
        if pairs.iter().any(|(a, b)| a.shape() != sa || b.shape() != sb) {
            return Err(Error::Dimension("Kraus factors on one side must share a shape".into()));
        }
        let kraus = pairs.iter().map(|(a, b)| linalg::kron(a, b)).collect();
        let channel = KrausChannel::with_tolerances(kraus, tol)?;
        Ok(Self { pairs, channel })
    }

    /// `A ⊗ B` for two local channels.
    pub fn local(a: &KrausChannel, b: &KrausChannel) -> Self {
        let pairs = a
            .kraus()
            .iter()
            .flat_map(|ka| b.kraus().iter().map(move |kb| (ka.clone(), kb.clone())))
            .collect();
        Self { pairs, channel: a.tensor(b) }
    }

    pub fn identity(dim_a: usize, dim_b: usize) -> Self {
        Self::local(&KrausChannel::identity(dim_a), &KrausChannel::identity(dim_b))
    }

    pub fn pairs(&self) -> &[(CMatrix, CMatrix)] {
        &self.pairs
    }

    pub fn channel(&self) -> &KrausChannel {
        &self.channel
    }

    /// Input dimensions `(d_A, d_B)`.
    pub fn in_dims(&self) -> (usize, usize) {
        (self.pairs[0].0.ncols(), self.pairs[0].1.ncols())
    }

    /// Output dimensions `(d_A, d_B)`.
    pub fn out_dims(&self) -> (usize, usize) {
        (self.pairs[0].0.nrows(), self.pairs[0].1.nrows())
    }

    fn require_input(&self, da: usize, db: usize) -> Result<()> {
        if self.in_dims() != (da, db) {
            return Err(Error::Dimension(format!(
                "channel acts on {:?}, state is {da}x{db}",
                self.in_dims()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, s: &BipartiteState) -> Result<BipartiteState> {
        self.require_input(s.dim_a(), s.dim_b())?;
        let (oa, ob) = self.out_dims();
        Ok(BipartiteState::from_matrix_unchecked(self.channel.apply(s.matrix()), oa, ob))
    }

    /// Applies the channel to the quantum part of every block.
    pub fn apply_ccqq(&self, s: &CcQqState) -> Result<CcQqState> {
        self.require_input(s.dim_a(), s.dim_b())?;
        let (oa, ob) = self.out_dims();
        Ok(s.map_blocks(|m| self.channel.apply(m), oa, ob))
    }
}

fn random_instrument(d_in: usize, d_out: usize, outcomes: usize, rng: &mut impl Rng) -> Vec<CMatrix> {
    let g = linalg::ginibre(d_out * outcomes, d_in, rng);
    let h = g.adjoint() * &g;
    let e = linalg::eigh(&h);
    let inv_sqrt = e.map(|x| 1.0 / x.sqrt());
    let v = g * inv_sqrt;
    (0..outcomes).map(|k| v.rows(k * d_out, d_out).into_owned()).collect()
}

/// A random one-way LOCC channel: A applies a random instrument with a few
/// outcomes and B applies a random channel depending on the outcome.
pub fn random_separable_channel(dim_a: usize, dim_b: usize, rng: &mut impl Rng) -> SeparableChannel {
    let outcomes = rng.random_range(1..=3);
    let a_ops = random_instrument(dim_a, dim_a, outcomes, rng);
    let mut pairs = Vec::new();
    for a in a_ops {
        let kb = rng.random_range(1..=3);
        for b in random_instrument(dim_b, dim_b, kb, rng) {
            pairs.push((a.clone(), b));
        }
    }
    let kraus = pairs.iter().map(|(a, b)| linalg::kron(a, b)).collect();
    let channel = KrausChannel::new(kraus).expect("LOCC construction is trace preserving");
    SeparableChannel { pairs, channel }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Preset;
    use crate::linalg::c64;
    use crate::entanglement::{chisep, SepOptions};
    use crate::rng::stream;

    #[test]
    fn identity_pair_is_identity() {
        let c = SeparableChannel::new(vec![(linalg::identity(2), linalg::identity(2))]).unwrap();
        let bell = BipartiteState::bell();
        let out = c.apply(&bell).unwrap();
        assert!((out.matrix() - bell.matrix()).norm() < 1e-14);
    }

    #[test]
    fn non_trace_preserving_pairs_rejected() {
        let half = linalg::identity(2) * c64(0.5, 0.0);
        assert!(SeparableChannel::new(vec![(half.clone(), half)]).is_err());
    }

    #[test]
    fn local_depolarizing_is_valid() {
        let d = Preset::Depolarizing(0.3).channel().unwrap();
        let c = SeparableChannel::local(&d, &d);
        assert_eq!(c.pairs().len(), d.kraus().len().pow(2));
        assert!(c.channel().as_cp_map().tp_residual() < 1e-12);
    }

    #[test]
    fn serde_round_trip() {
        let mut r = stream(5, 0);
        let c = random_separable_channel(2, 2, &mut r);
        let json = serde_json::to_string(&c).unwrap();
        let back: SeparableChannel = serde_json::from_str(&json).unwrap();
        assert!(back.channel().choi_distance(c.channel()) < 1e-12);
    }

    #[test]
    fn chisep_monotone_under_random_separable_channels() {
        let opts = SepOptions::default();
        for k in 0..10 {
            let mut r = stream(77, k);
            let s = BipartiteState::random(2, 2, 1, &mut r);
            let c = random_separable_channel(2, 2, &mut r);
            let before = chisep(&s, &opts).unwrap().value;
            let after = chisep(&c.apply(&s).unwrap(), &opts).unwrap().value;
            assert!(after <= before + 1e-6, "{after} > {before}");
        }
    }
}
