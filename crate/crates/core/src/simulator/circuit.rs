use serde::{Deserialize, Serialize};

use super::{embed, merge_blocks, ClassicalRef, RegisterLayout, Side};
use crate::channel::{ChannelSpec, KrausChannel};
use crate::entanglement::{BipartiteState, CcQqBlock, CcQqState};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix};
use crate::state::DensityState;

/// One operation of a layer, as written in a circuit file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Operation {
    /// A channel on the listed qubits.
    Gate { targets: Vec<String>, channel: ChannelSpec },
    /// A channel chosen by the value of a classical register.
    Controlled { targets: Vec<String>, register: String, channels: Vec<ChannelSpec> },
    /// Computational-basis measurement with the outcome written to a register.
    Measure { qubit: String, register: String },
    /// Stochastic update `table[row][new]`, rows indexed by the joint value of
    /// `inputs` (first input most significant; defaults to the register itself).
    Classical {
        register: String,
        #[serde(default)]
        inputs: Vec<String>,
        table: Vec<Vec<f64>>,
    },
    /// Replace the qubit by `|0⟩`.
    Reset { qubit: String },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CircuitLayer {
    #[serde(default)]
    pub ops: Vec<Operation>,
    /// Claimed separability across the A:B cut, verified on construction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separable: Option<bool>,
}

impl CircuitLayer {
    pub fn new(ops: Vec<Operation>) -> Self {
        Self { ops, separable: None }
    }
}

#[derive(Debug, Clone)]
enum Compiled {
    Kraus(Vec<CMatrix>),
    Controlled { reg: ClassicalRef, branches: Vec<Vec<CMatrix>> },
    Measure { projectors: [CMatrix; 2], reg: ClassicalRef },
    Classical { reg: ClassicalRef, inputs: Vec<ClassicalRef>, table: Vec<Vec<f64>> },
}

fn read(b: &CcQqBlock, r: &ClassicalRef) -> usize {
    match r.side {
        Side::A => b.x[r.index],
        Side::B => b.y[r.index],
    }
}

fn write(b: &mut CcQqBlock, r: &ClassicalRef, v: usize) {
    match r.side {
        Side::A => b.x[r.index] = v,
        Side::B => b.y[r.index] = v,
    }
}

fn conjugate(ops: &[CMatrix], rho: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(rho.nrows(), rho.ncols());
    for k in ops {
        out += k * rho * k.adjoint();
    }
    linalg::hermitize(&out)
}

impl Compiled {
    fn apply(&self, blocks: Vec<CcQqBlock>, cap: usize) -> Result<Vec<CcQqBlock>> {
        match self {
            Compiled::Kraus(ops) => Ok(blocks.into_iter().map(|b| CcQqBlock { rho: conjugate(ops, &b.rho), ..b }).collect()),
            Compiled::Controlled { reg, branches } => Ok(blocks
                .into_iter()
                .map(|b| {
                    let ops = &branches[read(&b, reg)];
                    CcQqBlock { rho: conjugate(ops, &b.rho), ..b }
                })
                .collect()),
            Compiled::Measure { projectors, reg } => {
                let mut out = Vec::with_capacity(2 * blocks.len());
                for b in blocks {
                    for (k, proj) in projectors.iter().enumerate() {
                        let m = proj * &b.rho * proj;
                        let w = linalg::trace(&m).re;
                        if w <= 1e-15 {
                            continue;
                        }
                        let mut nb = CcQqBlock { p: b.p * w, rho: linalg::hermitize(&(m / c64(w, 0.0))), ..b.clone() };
                        write(&mut nb, reg, k);
                        out.push(nb);
                    }
                }
                merge_blocks(out, cap)
            }
            Compiled::Classical { reg, inputs, table } => {
                let mut out = Vec::new();
                for b in blocks {
                    let row = inputs.iter().fold(0, |acc, r| acc * r.size + read(&b, r));
                    for (v, &w) in table[row].iter().enumerate() {
                        if w > 0.0 {
                            let mut nb = CcQqBlock { p: b.p * w, ..b.clone() };
                            write(&mut nb, reg, v);
                            out.push(nb);
                        }
                    }
                }
                merge_blocks(out, cap)
            }
        }
    }
}

/// A layout, its layers and the qubit noise channel applied between them.
#[derive(Debug, Clone)]
pub struct NoisyCircuit {
    pub layout: RegisterLayout,
    pub layers: Vec<CircuitLayer>,
    pub noise: KrausChannel,
    compiled: Vec<Vec<Compiled>>,
}

impl NoisyCircuit {
    pub fn new(layout: RegisterLayout, layers: Vec<CircuitLayer>, noise: KrausChannel) -> Result<Self> {
        noise.require_qubit()?;
        let compiled = layers
            .iter()
            .enumerate()
            .map(|(t, l)| compile_layer(l, &layout).map_err(|e| Error::InvalidParameter(format!("layer {t}: {e}"))))
            .collect::<Result<_>>()?;
        Ok(Self { layout, layers, noise, compiled })
    }

    /// Whether layer `t` acts on each side separately.
    pub fn layer_is_separable(&self, t: usize) -> Result<bool> {
        layer_is_separable(&self.layers[t], &self.layout)
    }
}

impl NoisyCircuit {
    pub(crate) fn apply_layer(&self, t: usize, s: &CcQqState, cap: usize) -> Result<CcQqState> {
        apply_compiled(&self.compiled[t], s, cap)
    }
}

fn apply_compiled(ops: &[Compiled], s: &CcQqState, cap: usize) -> Result<CcQqState> {
    let mut blocks = s.blocks().to_vec();
    for op in ops {
        blocks = op.apply(blocks, cap)?;
    }
    Ok(CcQqState::new_unchecked(s.dim_a(), s.dim_b(), blocks))
}

fn targets_of(labels: &[String], layout: &RegisterLayout) -> Result<Vec<usize>> {
    let t: Vec<usize> = labels.iter().map(|l| layout.qubit(l)).collect::<Result<_>>()?;
    let mut sorted = t.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != t.len() {
        return Err(Error::InvalidParameter("repeated target qubit".into()));
    }
    if t.is_empty() {
        return Err(Error::InvalidParameter("gate without targets".into()));
    }
    Ok(t)
}

fn embedded(spec: &ChannelSpec, targets: &[usize], layout: &RegisterLayout) -> Result<Vec<CMatrix>> {
    let ch = spec.to_channel()?;
    let d = 1usize << targets.len();
    if ch.in_dim() != d || ch.out_dim() != d {
        return Err(Error::Dimension(format!(
            "channel is {} -> {} but acts on {} qubits",
            ch.in_dim(),
            ch.out_dim(),
            targets.len()
        )));
    }
    Ok(ch.kraus().iter().map(|k| embed(k, targets, layout.n_qubits())).collect())
}

fn one_side(targets: &[usize], layout: &RegisterLayout) -> bool {
    targets.windows(2).all(|w| layout.qubit_side(w[0]) == layout.qubit_side(w[1]))
}

fn layer_is_separable(layer: &CircuitLayer, layout: &RegisterLayout) -> Result<bool> {
    for op in &layer.ops {
        if let Operation::Gate { targets, .. } | Operation::Controlled { targets, .. } = op {
            if !one_side(&targets_of(targets, layout)?, layout) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn compile_layer(layer: &CircuitLayer, layout: &RegisterLayout) -> Result<Vec<Compiled>> {
    if layer.separable == Some(true) && !layer_is_separable(layer, layout)? {
        return Err(Error::InvalidParameter("layer claimed separable but a gate spans both sides".into()));
    }
    let n = layout.n_qubits();
    layer
        .ops
        .iter()
        .map(|op| {
            Ok(match op {
                Operation::Gate { targets, channel } => Compiled::Kraus(embedded(channel, &targets_of(targets, layout)?, layout)?),
                Operation::Controlled { targets, register, channels } => {
                    let reg = layout.register(register)?;
                    if channels.len() != reg.size {
                        return Err(Error::InvalidParameter(format!(
                            "register {register:?} has {} values but {} branches were given",
                            reg.size,
                            channels.len()
                        )));
                    }
                    let t = targets_of(targets, layout)?;
                    let branches = channels.iter().map(|c| embedded(c, &t, layout)).collect::<Result<_>>()?;
                    Compiled::Controlled { reg, branches }
                }
                Operation::Measure { qubit, register } => {
                    let reg = layout.register(register)?;
                    if reg.size < 2 {
                        return Err(Error::InvalidParameter(format!("register {register:?} cannot hold a measurement outcome")));
                    }
                    let q = layout.qubit(qubit)?;
                    let proj = |k: usize| embed(&linalg::outer(&linalg::basis_vector(2, k)), &[q], n);
                    Compiled::Measure { projectors: [proj(0), proj(1)], reg }
                }
                Operation::Classical { register, inputs, table } => {
                    let reg = layout.register(register)?;
                    let inputs: Vec<ClassicalRef> = if inputs.is_empty() {
                        vec![reg]
                    } else {
                        inputs.iter().map(|l| layout.register(l)).collect::<Result<_>>()?
                    };
                    let rows: usize = inputs.iter().map(|r| r.size).product();
                    if table.len() != rows || table.iter().any(|r| r.len() != reg.size) {
                        return Err(Error::Dimension(format!("classical table must be {rows} x {}", reg.size)));
                    }
                    for row in table {
                        let s: f64 = row.iter().sum();
                        if row.iter().any(|&w| !(w >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                            return Err(Error::InvalidParameter("classical table rows must be probability vectors".into()));
                        }
                    }
                    Compiled::Classical { reg, inputs, table: table.clone() }
                }
                Operation::Reset { qubit } => {
                    let q = layout.qubit(qubit)?;
                    let mut k0 = CMatrix::zeros(2, 2);
                    k0[(0, 0)] = linalg::ONE;
                    let mut k1 = CMatrix::zeros(2, 2);
                    k1[(0, 1)] = linalg::ONE;
                    Compiled::Kraus(vec![embed(&k0, &[q], n), embed(&k1, &[q], n)])
                }
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedInput {
    /// All qubits `|0⟩`.
    Zero,
    /// Qubit `k` of side A maximally entangled with qubit `k` of side B.
    Bell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputSpec {
    Named(NamedInput),
    Matrix {
        #[serde(with = "crate::io::matrix")]
        matrix: CMatrix,
    },
}

impl InputSpec {
    pub fn state(&self, layout: &RegisterLayout) -> Result<CcQqState> {
        match self {
            InputSpec::Named(NamedInput::Zero) => Ok(layout.zero_state()),
            InputSpec::Named(NamedInput::Bell) => {
                if layout.dim_a() != layout.dim_b() || layout.dim_a() == 1 {
                    return Err(Error::InvalidParameter("bell input needs the same positive number of qubits on both sides".into()));
                }
                Ok(layout.state_with(BipartiteState::maximally_entangled(layout.dim_a()).matrix().clone()))
            }
            InputSpec::Matrix { matrix } => {
                let d = layout.dim_a() * layout.dim_b();
                if matrix.nrows() != d {
                    return Err(Error::Dimension(format!("input is {}x{}, layout needs dimension {d}", matrix.nrows(), matrix.ncols())));
                }
                let s = DensityState::new(matrix.clone())?;
                Ok(layout.state_with(s.into_matrix()))
            }
        }
    }
}

/// The JSON circuit description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitFile {
    pub layout: RegisterLayout,
    pub noise: ChannelSpec,
    #[serde(default)]
    pub layers: Vec<CircuitLayer>,
    /// Number of time steps; layers repeat cyclically. Defaults to the layer count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputSpec>,
}

impl CircuitFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<(NoisyCircuit, CcQqState)> {
        let steps = self.steps.unwrap_or(self.layers.len());
        let layers = (0..steps)
            .map(|t| if self.layers.is_empty() { CircuitLayer::default() } else { self.layers[t % self.layers.len()].clone() })
            .collect();
        let circuit = NoisyCircuit::new(self.layout.clone(), layers, self.noise.to_channel()?)?;
        let input = self.input.clone().unwrap_or(InputSpec::Named(NamedInput::Zero)).state(&self.layout)?;
        Ok((circuit, input))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Preset;
    use crate::simulator::{circuit_metrics, run_noisy_circuit, ClassicalSpec, QubitSpec, SimOptions};

    fn one_qubit_with_register() -> RegisterLayout {
        RegisterLayout::new(
            vec![QubitSpec { label: "q".into(), side: Side::A }],
            vec![ClassicalSpec { label: "c".into(), size: 2, side: Side::A }],
        )
        .unwrap()
    }

    #[test]
    fn zero_layers_leave_input() {
        let layout = RegisterLayout::qubits(1).unwrap();
        let c = NoisyCircuit::new(layout.clone(), vec![], Preset::Depolarizing(0.3).channel().unwrap()).unwrap();
        let input = layout.zero_state();
        let r = run_noisy_circuit(&c, &input, None, &SimOptions::default()).unwrap();
        assert_eq!(r.final_state.unwrap(), input);
        assert_eq!(circuit_metrics(&c), (1, 0));
    }

    #[test]
    fn bloch_vector_shrinks_geometrically() {
        let layout = RegisterLayout::qubits(1).unwrap();
        let p = 0.1;
        let t = 7;
        let layers = vec![CircuitLayer::default(); t];
        let c = NoisyCircuit::new(layout.clone(), layers, Preset::Depolarizing(p).channel().unwrap()).unwrap();
        let plus = DensityState::from_bloch([1.0, 0.0, 0.0]).unwrap();
        let input = layout.state_with(plus.into_matrix());
        let r = run_noisy_circuit(&c, &input, None, &SimOptions::default()).unwrap();
        let out = DensityState::new(r.final_state.unwrap().blocks()[0].rho.clone()).unwrap();
        let bx = out.bloch_vector().unwrap()[0];
        assert!((bx - (1.0 - p).powi(t as i32)).abs() < 1e-12);
        assert!(r.steps.iter().all(|s| (s.mass - 1.0).abs() < 1e-9));
    }

    #[test]
    fn measured_outcome_survives_noise() {
        let layout = one_qubit_with_register();
        let h = (linalg::pauli(1) + linalg::pauli(3)) / c64(2f64.sqrt(), 0.0);
        let first = CircuitLayer::new(vec![
            Operation::Gate { targets: vec!["q".into()], channel: ChannelSpec::from_channel(&KrausChannel::new(vec![h]).unwrap()) },
            Operation::Measure { qubit: "q".into(), register: "c".into() },
        ]);
        let mut layers = vec![first];
        layers.extend(vec![CircuitLayer::default(); 30]);
        for noise in [Preset::Depolarizing(1.0), Preset::AmplitudeDamping(0.9)] {
            let c = NoisyCircuit::new(layout.clone(), layers.clone(), noise.channel().unwrap()).unwrap();
            let r = run_noisy_circuit(&c, &layout.zero_state(), None, &SimOptions::default()).unwrap();
            for s in &r.steps[1..] {
                assert!((s.classical[0][0] - 0.5).abs() < 1e-12 && (s.classical[0][1] - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn classical_update_and_control() {
        let layout = one_qubit_with_register();
        let flip = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let x = ChannelSpec::from_channel(&KrausChannel::new(vec![linalg::pauli(1)]).unwrap());
        let id = ChannelSpec::from_channel(&KrausChannel::identity(2));
        let layer = CircuitLayer::new(vec![
            Operation::Classical { register: "c".into(), inputs: vec![], table: flip },
            Operation::Controlled { targets: vec!["q".into()], register: "c".into(), channels: vec![id, x] },
        ]);
        let c = NoisyCircuit::new(layout.clone(), vec![layer], KrausChannel::identity(2)).unwrap();
        let r = run_noisy_circuit(&c, &layout.zero_state(), None, &SimOptions::default()).unwrap();
        let out = r.final_state.unwrap();
        assert_eq!(out.blocks()[0].x, vec![1]);
        assert!((out.blocks()[0].rho[(1, 1)].re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn invalid_layers_rejected() {
        let layout = RegisterLayout::new(
            vec![QubitSpec { label: "a".into(), side: Side::A }, QubitSpec { label: "b".into(), side: Side::B }],
            vec![],
        )
        .unwrap();
        let cnot = {
            let mut m = CMatrix::zeros(4, 4);
            for (i, j) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
                m[(i, j)] = linalg::ONE;
            }
            ChannelSpec::from_channel(&KrausChannel::new(vec![m]).unwrap())
        };
        let layer = CircuitLayer { ops: vec![Operation::Gate { targets: vec!["a".into(), "b".into()], channel: cnot.clone() }], separable: Some(true) };
        assert!(NoisyCircuit::new(layout.clone(), vec![layer], KrausChannel::identity(2)).is_err());
        let unclaimed = CircuitLayer::new(vec![Operation::Gate { targets: vec!["a".into(), "b".into()], channel: cnot }]);
        let c = NoisyCircuit::new(layout.clone(), vec![unclaimed], KrausChannel::identity(2)).unwrap();
        assert!(!c.layer_is_separable(0).unwrap());
        let bad = CircuitLayer::new(vec![Operation::Gate {
            targets: vec!["a".into()],
            channel: ChannelSpec::from_channel(&KrausChannel::identity(4)),
        }]);
        assert!(NoisyCircuit::new(layout, vec![bad], KrausChannel::identity(2)).is_err());
    }

    #[test]
    fn circuit_file_round_trip() {
        let text = r#"{
            "layout": {"qubits": [{"label": "a", "side": "A"}, {"label": "b", "side": "B"}],
                       "classical": [{"label": "m", "size": 2, "side": "A"}]},
            "noise": {"preset": "depolarizing", "p": 0.25},
            "layers": [{"ops": [{"op": "measure", "qubit": "a", "register": "m"}], "separable": true}],
            "steps": 3,
            "input": "bell"
        }"#;
        let f = CircuitFile::from_json(text).unwrap();
        let (c, input) = f.build().unwrap();
        assert_eq!(circuit_metrics(&c), (2, 3));
        let back = CircuitFile::from_json(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(back, f);
        let r = run_noisy_circuit(&c, &input, None, &SimOptions::default()).unwrap();
        // measuring one half of a Bell pair leaves a classically correlated state
        assert_eq!(r.steps[1].chisep, 0.0);
        assert_eq!(r.steps.len(), 4);
    }

    #[test]
    fn width_ignores_classical_registers() {
        let layout = RegisterLayout::new(
            vec![QubitSpec { label: "q".into(), side: Side::A }],
            vec![ClassicalSpec { label: "c".into(), size: 1024, side: Side::A }],
        )
        .unwrap();
        let c = NoisyCircuit::new(layout, vec![CircuitLayer::default(); 5], KrausChannel::identity(2)).unwrap();
        assert_eq!(circuit_metrics(&c), (1, 5));
        let empty = NoisyCircuit::new(RegisterLayout::new(vec![], vec![]).unwrap(), vec![], KrausChannel::identity(2)).unwrap();
        assert_eq!(circuit_metrics(&empty), (0, 0));
    }
}
