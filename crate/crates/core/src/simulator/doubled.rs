use serde::{Deserialize, Serialize};

use super::{run_noisy_circuit, CircuitLayer, FactorCheck, NoisyCircuit, Operation, QubitSpec, RegisterLayout, Side, SimOptions, TrajectoryReport};
use crate::channel::{ChannelSpec, KrausChannel};
use crate::decompose::{p_constant, P2Options, PConstantReport};
use crate::entanglement::{BipartiteState, CcQqState};
use crate::error::{Error, Result};

/// Bound on the trace-norm distance to separable states once χ²_Sep < 1/16.
pub const ENDGAME_DISTANCE: f64 = 0.25;

#[derive(Debug, Clone)]
pub struct DoubledOptions {
    pub sim: SimOptions,
    pub p2: P2Options,
    /// Absolute slack on every asserted inequality.
    pub tol: f64,
}

impl Default for DoubledOptions {
    fn default() -> Self {
        Self { sim: SimOptions::default(), p2: P2Options::default(), tol: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubledReport {
    pub n: usize,
    pub constant: PConstantReport,
    /// `1 − p^{2n}`.
    pub factor: f64,
    pub trajectory: TrajectoryReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endgame_step: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endgame_dsep: Option<f64>,
    pub endgame_ok: bool,
    pub passed: bool,
}

/// Two copies of an `n`-qubit memory, copy one on side A and copy two on side
/// B, each step applying `gate` (identity when absent) to both copies.
pub fn doubled_circuit(n: usize, noise: &KrausChannel, steps: usize, gate: Option<&KrausChannel>) -> Result<NoisyCircuit> {
    let qubits = (0..n)
        .map(|k| QubitSpec { label: format!("a{k}"), side: Side::A })
        .chain((0..n).map(|k| QubitSpec { label: format!("b{k}"), side: Side::B }))
        .collect();
    let layout = RegisterLayout::new(qubits, vec![])?;
    let layer = match gate {
        None => CircuitLayer { ops: vec![], separable: Some(true) },
        Some(g) => {
            if g.in_dim() != 1 << n || g.out_dim() != 1 << n {
                return Err(Error::Dimension(format!("gate acts on dimension {}, memory has {n} qubits", g.in_dim())));
            }
            let spec = ChannelSpec::from_channel(g);
            let side = |s: &str| (0..n).map(|k| format!("{s}{k}")).collect();
            CircuitLayer {
                ops: vec![
                    Operation::Gate { targets: side("a"), channel: spec.clone() },
                    Operation::Gate { targets: side("b"), channel: spec },
                ],
                separable: Some(true),
            }
        }
    };
    NoisyCircuit::new(layout, vec![layer; steps], noise.clone())
}

/// Runs the doubled memory from an entangled `input` and checks the per-step
/// contraction `χ²(t+1) ≤ (1 − p^{2n}) χ²(t)`: at every step for unital noise,
/// while `χ² ≥ 1/16` otherwise. Once `χ²` drops below 1/16 the distance to
/// separable states must be at most 1/4.
pub fn doubled_memory_experiment(
    n: usize,
    noise: &KrausChannel,
    steps: usize,
    gate: Option<&KrausChannel>,
    input: &BipartiteState,
    opts: &DoubledOptions,
) -> Result<DoubledReport> {
    let circuit = doubled_circuit(n, noise, steps, gate)?;
    if input.dim_a() != 1 << n || input.dim_b() != 1 << n {
        return Err(Error::Dimension(format!("input is {}x{}, doubled memory needs {}x{}", input.dim_a(), input.dim_b(), 1 << n, 1 << n)));
    }
    let constant = p_constant(noise, &opts.p2)?;
    let factor = 1.0 - constant.p.powi(2 * n as i32);
    let check = FactorCheck { factor, every_step: constant.unital, tol: opts.tol };
    let trajectory = run_noisy_circuit(&circuit, &CcQqState::single(input), Some(check), &opts.sim)?;
    let endgame = trajectory.endgame();
    let endgame_ok = endgame.is_none_or(|(_, d)| d <= ENDGAME_DISTANCE + opts.tol);
    Ok(DoubledReport {
        n,
        factor,
        passed: trajectory.passed && endgame_ok,
        endgame_step: endgame.map(|e| e.0),
        endgame_dsep: endgame.map(|e| e.1),
        endgame_ok,
        constant,
        trajectory,
    })
}
