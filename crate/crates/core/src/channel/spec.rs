//! Channel specification files.
//!
//! Either an explicit Kraus list
//! `{"in_dim": 2, "out_dim": 2, "kraus": [[[[re, im], ...], ...], ...]}`
//! or a preset such as `{"preset": "depolarizing", "p": 0.25}`.

use serde::{Deserialize, Serialize};

use super::{KrausChannel, Preset};
use crate::error::{Error, Result};
use crate::io::{matrix_from_json, matrix_to_json, JsonMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelSpec {
    Explicit { in_dim: usize, out_dim: usize, kraus: Vec<JsonMatrix> },
    Preset(PresetSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetSpec {
    pub preset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<JsonMatrix>,
}

impl ChannelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_channel(ch: &KrausChannel) -> Self {
        ChannelSpec::Explicit {
            in_dim: ch.in_dim(),
            out_dim: ch.out_dim(),
            kraus: ch.kraus().iter().map(matrix_to_json).collect(),
        }
    }

    pub fn preset(&self) -> Result<Option<Preset>> {
        let ChannelSpec::Preset(spec) = self else { return Ok(None) };
        let param = |name: &str| {
            spec.p
                .or(spec.gamma)
                .ok_or_else(|| Error::Parse(format!("preset {name:?} needs a parameter \"p\"")))
        };
        let preset = match spec.preset.as_str() {
            "identity" => Preset::Identity,
            "depolarizing" => Preset::Depolarizing(param("depolarizing")?),
            "dephasing" => Preset::Dephasing(param("dephasing")?),
            "amplitude_damping" => Preset::AmplitudeDamping(param("amplitude_damping")?),
            "unitary" => {
                let m = spec
                    .matrix
                    .as_ref()
                    .ok_or_else(|| Error::Parse("preset \"unitary\" needs a \"matrix\"".into()))?;
                Preset::Unitary(matrix_from_json(m)?)
            }
            other => return Err(Error::Parse(format!("unknown preset {other:?}"))),
        };
        Ok(Some(preset))
    }

    pub fn to_channel(&self) -> Result<KrausChannel> {
        match self {
            ChannelSpec::Explicit { in_dim, out_dim, kraus } => {
                let ops = kraus.iter().map(matrix_from_json).collect::<Result<Vec<_>>>()?;
                let ch = KrausChannel::new(ops)?;
                if ch.in_dim() != *in_dim || ch.out_dim() != *out_dim {
                    return Err(Error::Dimension(format!(
                        "declared {in_dim} -> {out_dim} but Kraus operators are {} -> {}",
                        ch.in_dim(),
                        ch.out_dim()
                    )));
                }
                Ok(ch)
            }
            ChannelSpec::Preset(_) => self.preset()?.expect("preset variant").channel(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_presets_and_explicit() {
        let s = ChannelSpec::from_json(r#"{"preset": "depolarizing", "p": 0.25}"#).unwrap();
        let ch = s.to_channel().unwrap();
        assert_eq!(ch.kraus().len(), 4);
        let explicit = ChannelSpec::from_channel(&ch);
        let text = serde_json::to_string(&explicit).unwrap();
        let back = ChannelSpec::from_json(&text).unwrap().to_channel().unwrap();
        assert!(back.choi_distance(&ch) < 1e-15);
    }

    #[test]
    fn reports_errors() {
        assert!(matches!(ChannelSpec::from_json("{ nope"), Err(Error::Parse(_))));
        let s = ChannelSpec::from_json(r#"{"preset": "bogus", "p": 0.1}"#).unwrap();
        assert!(s.to_channel().is_err());
        let s = ChannelSpec::from_json(r#"{"in_dim": 3, "out_dim": 2, "kraus": [[[[1,0],[0,0]],[[0,0],[1,0]]]]}"#).unwrap();
        assert!(matches!(s.to_channel(), Err(Error::Dimension(_))));
    }
}
