//! Seeded verification suites for the inequalities the library relies on.
//!
//! Instance `k` of a suite run with seed `s` draws everything from
//! `rng::stream(s, k)`, so any violation replays from `(suite, seed, index)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bounds::{overhead_alpha, overhead_lower_bound, verify_stability_lemma, CapacityBracket, OverheadValue, SearchConfig, UpperSource};
use crate::channel::{random, ChannelSpec, KrausChannel};
use crate::contraction::{chi2_matrices, composite_choi_min_eigenvalue, eta_chi_lower, eta_tr, eta_tr_upper_minoutev, SearchOptions};
use crate::decompose::{unital_split, P2Options};
use crate::entanglement::{
    chisep_ccqq, chisep_ccqq_direct, random_separable_channel, verify_contraction_step, BipartiteState, CcQqBlock, CcQqState, SepOptions,
    StepOptions,
};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix};
use crate::rng;
use crate::simulator::{doubled_memory_experiment, DoubledOptions, ENDGAME_DISTANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// `‖ρ − σ‖₁² ≤ χ²(ρ, σ)`.
    TrDistChi2,
    /// `η_tr ≤ √(1 − λ_min^out/d²)` and `λ_min^out ≥ λ_min(C_{T†∘T})`.
    EtaUpperBound,
    /// Unital qubit channels split into a unitary and an entanglement breaking part.
    UnitalSplit,
    /// Per-step decay of χ²_Sep in the doubled memory and the trace distance endgame.
    MemoryDecay,
    /// `‖T ⊗ id − id‖ ≤ √(2ε)` for channels near the identity.
    Stability,
    /// `η_χ ≤ η_tr`.
    EtaChi,
    /// Closed form of χ²_Sep for cc-qq states and its `d_A d_B − 1` ceiling.
    CcqqFormula,
    /// Contraction of χ²_Sep under separable channels.
    SepContraction,
    /// Overhead calculator: closed-form α and monotonicity in `n` and `T`.
    Overhead,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::TrDistChi2,
        Suite::EtaUpperBound,
        Suite::UnitalSplit,
        Suite::MemoryDecay,
        Suite::Stability,
        Suite::EtaChi,
        Suite::CcqqFormula,
        Suite::SepContraction,
        Suite::Overhead,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::TrDistChi2 => "tr-dist-chi2",
            Suite::EtaUpperBound => "eta-upper-bound",
            Suite::UnitalSplit => "unital-split",
            Suite::MemoryDecay => "memory-decay",
            Suite::Stability => "stability",
            Suite::EtaChi => "eta-chi",
            Suite::CcqqFormula => "ccqq-formula",
            Suite::SepContraction => "sep-contraction",
            Suite::Overhead => "overhead",
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            Suite::TrDistChi2 => 1000,
            Suite::EtaUpperBound => 500,
            Suite::UnitalSplit => 300,
            Suite::MemoryDecay => 8,
            Suite::Stability => 100,
            Suite::EtaChi => 100,
            Suite::CcqqFormula => 200,
            Suite::SepContraction => 50,
            Suite::Overhead => 25,
        }
    }

    /// Additive slack on every `lhs ≤ rhs` comparison.
    pub fn default_tol(self) -> f64 {
        match self {
            Suite::TrDistChi2 => 1e-8,
            Suite::EtaUpperBound | Suite::Stability | Suite::EtaChi | Suite::SepContraction => 1e-6,
            Suite::UnitalSplit => 1e-7,
            Suite::MemoryDecay | Suite::CcqqFormula => 1e-3,
            Suite::Overhead => 1e-12,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let names: Vec<_> = Suite::ALL.iter().map(|x| x.name()).collect();
            Error::InvalidParameter(format!("unknown suite '{s}', expected one of: {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Instance count; the suite default when absent.
    pub trials: Option<usize>,
    /// Restarts of the inner multi-start searches.
    pub restarts: Option<usize>,
    pub tol: Option<f64>,
}

impl VerifyOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}

/// One inequality `lhs ≤ rhs` (tolerance already folded into `rhs`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
}

impl Check {
    fn new(name: &str, lhs: f64, rhs: f64) -> Self {
        Self { name: name.into(), lhs, rhs }
    }

    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub suite: Suite,
    pub seed: u64,
    pub index: usize,
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    /// Channels, states and parameters of the instance.
    pub witness: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFailure {
    pub index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub trials: usize,
    pub tol: f64,
    pub checks: usize,
    /// Smallest `rhs − lhs` over all checks.
    pub worst_margin: f64,
    pub violations: Vec<Counterexample>,
    pub failures: Vec<InstanceFailure>,
    pub passed: bool,
}

struct Instance {
    checks: Vec<Check>,
    witness: Value,
}

struct Ctx {
    seed: u64,
    index: usize,
    tol: f64,
    restarts: Option<usize>,
}

impl Ctx {
    fn rng(&self) -> rng::StreamRng {
        rng::stream(self.seed, self.index as u64)
    }

    fn child(&self) -> u64 {
        rng::child_seed(self.seed, self.index as u64)
    }

    fn search(&self, default: usize) -> SearchOptions {
        SearchOptions { seed: self.child(), restarts: self.restarts.unwrap_or(default), ..SearchOptions::default() }
    }
}

fn mat(m: &CMatrix) -> Value {
    serde_json::to_value(crate::io::matrix_to_json(m)).expect("matrix serializes")
}

fn chan(ch: &KrausChannel) -> Value {
    serde_json::to_value(ChannelSpec::from_channel(ch)).expect("channel serializes")
}

fn ccqq(s: &CcQqState) -> Value {
    serde_json::to_value(s).expect("state serializes")
}

fn run_instance(suite: Suite, ctx: &Ctx) -> Result<Instance> {
    match suite {
        Suite::TrDistChi2 => tr_dist_chi2(ctx),
        Suite::EtaUpperBound => eta_upper_bound(ctx),
        Suite::UnitalSplit => unital_split_instance(ctx),
        Suite::MemoryDecay => memory_decay(ctx),
        Suite::Stability => stability(ctx),
        Suite::EtaChi => eta_chi(ctx),
        Suite::CcqqFormula => ccqq_formula(ctx),
        Suite::SepContraction => sep_contraction(ctx),
        Suite::Overhead => overhead(ctx),
    }
}

fn tr_dist_chi2(ctx: &Ctx) -> Result<Instance> {
    let mut r = ctx.rng();
    let d = 2 + ctx.index % 3;
    let rank = r.random_range(1..=d);
    let rho = linalg::random_density(d, rank, &mut r);
    let sigma = linalg::random_density(d, d, &mut r);
    let dist = linalg::trace_norm_herm(&(&rho - &sigma));
    let chi2 = chi2_matrices(&rho, &sigma);
    Ok(Instance {
        checks: vec![Check::new("trace_distance_squared", dist * dist, chi2 + ctx.tol)],
        witness: json!({ "rho": mat(&rho), "sigma": mat(&sigma) }),
    })
}

fn eta_upper_bound(ctx: &Ctx) -> Result<Instance> {
    let mut r = ctx.rng();
    let d = 2 + ctx.index % 2;
    let ch = random::random_channel_any_rank(d, true, &mut r);
    let opts = ctx.search(32);
    let eta = eta_tr(&ch, &opts)?.value;
    let upper = eta_tr_upper_minoutev(&ch, &opts)?;
    let lambda_out = upper.lambda_min.unwrap_or(0.0);
    let lambda_choi = composite_choi_min_eigenvalue(&ch);
    Ok(Instance {
        checks: vec![
            Check::new("eta_tr_below_minoutev_bound", eta, upper.value + ctx.tol),
            Check::new("minoutev_above_choi_eigenvalue", lambda_choi - 1e-8, lambda_out),
        ],
        witness: json!({ "channel": chan(&ch), "eta_tr": eta, "bound": upper.value, "lambda_out": lambda_out, "lambda_choi": lambda_choi }),
    })
}

fn unital_split_instance(ctx: &Ctx) -> Result<Instance> {
    let mut r = ctx.rng();
    let ch = random::random_unital_qubit(&mut r);
    let dec = unital_split(&ch)?;
    let recon = dec.reconstruction_error(&ch)?;
    let c = dec.eb_part.as_cp_map().choi();
    let pt_min = linalg::min_eigenvalue(&linalg::partial_transpose(&c, 2, 2));
    Ok(Instance {
        checks: vec![
            Check::new("reconstruction_error", recon, ctx.tol),
            Check::new("eb_part_ppt", -pt_min, 1e-9),
            Check::new("p1_positive", 0.0, dec.p1 - f64::MIN_POSITIVE),
        ],
        witness: json!({ "channel": chan(&ch), "p1": dec.p1, "lambda": dec.lambda, "eb_lambda": dec.eb_lambda }),
    })
}

fn memory_decay(ctx: &Ctx) -> Result<Instance> {
    let mut r = ctx.rng();
    let noise = if ctx.index.is_multiple_of(2) { random::random_unital_qubit(&mut r) } else { random::random_nonunital_qubit(&mut r) };
    let opts = DoubledOptions {
        p2: P2Options { seed: ctx.child(), candidates: 64, refine: 1 },
        tol: ctx.tol,
        ..DoubledOptions::default()
    };
    let rep = doubled_memory_experiment(1, &noise, 6, None, &BipartiteState::bell(), &opts)?;
    let mut checks = Vec::new();
    let steps = &rep.trajectory.steps;
    for w in steps.windows(2) {
        if let Some(bound) = w[1].factor_bound {
            checks.push(Check::new(&format!("decay_step_{}", w[1].step), w[1].chisep, bound + ctx.tol));
        }
    }
    if let (Some(step), Some(d)) = (rep.endgame_step, rep.endgame_dsep) {
        checks.push(Check::new(&format!("endgame_step_{step}"), d, ENDGAME_DISTANCE + ctx.tol));
    }
    Ok(Instance {
        checks,
        witness: json!({ "noise": chan(&noise), "p": rep.constant.p, "factor": rep.factor, "chisep": rep.trajectory.chisep_values() }),
    })
}

/// Channel within trace distance about 0.1 of the identity: a small rotation
/// followed by a small admixture of a random channel.
fn near_identity(r: &mut impl Rng) -> KrausChannel {
    let h = linalg::hermitize(&linalg::ginibre(2, 2, r));
    let theta = r.random_range(0.0..0.02) / linalg::spectral_norm(&h).max(1e-12);
    let u = linalg::expi_hermitian(&(h * c64(theta, 0.0)));
    let env = r.random_range(1..=4);
    let other = random::random_channel(2, 2, env, r);
    let w = r.random_range(0.0..0.03);
    KrausChannel::identity(2).compose_unitary(&u).mix(&other, w).expect("weight in range")
}

fn stability(ctx: &Ctx) -> Result<Instance> {
    let mut r = ctx.rng();
    let ch = near_identity(&mut r);
    let cfg = SearchConfig { seed: ctx.child(), restarts: ctx.restarts.unwrap_or(8) };
    let rep = verify_stability_lemma(&ch, &cfg)?;
    Ok(Instance {
        checks: vec![
            Check::new("epsilon_at_most_0.1", rep.epsilon, 0.1),
            Check::new("extended", rep.extended, rep.extended_bound + ctx.tol),
            Check::new("doubled", rep.doubled, rep.doubled_bound + ctx.tol),
        ],
        witness: json!({ "channel": chan(&ch), "report": rep }),
    })
}

fn eta_chi(ctx: &Ctx) -> Result<Instance> {
    let mut r = ctx.rng();
    let d = 2 + ctx.index % 2;
    let ch = random::random_channel_any_rank(d, false, &mut r);
    let chi = eta_chi_lower(&ch, 8, ctx.child())?.value;
    let opts = ctx.search(8);
    let tr = if d == 2 { eta_tr(&ch, &opts)?.value } else { eta_tr_upper_minoutev(&ch, &opts)?.value };
    Ok(Instance {
        checks: vec![Check::new("eta_chi_below_eta_tr", chi, tr + ctx.tol)],
        witness: json!({ "channel": chan(&ch), "eta_chi_lower": chi, "eta_tr": tr }),
    })
}

fn ccqq_formula(ctx: &Ctx) -> Result<Instance> {
    let mut r = ctx.rng();
    let s = CcQqState::random(2, 2, 2, &mut r);
    let sep = SepOptions { seed: ctx.child(), ..SepOptions::default() };
    let formula = chisep_ccqq(&s, &sep)?.value;
    let direct = chisep_ccqq_direct(&s, &sep)?.value;
    Ok(Instance {
        checks: vec![
            Check::new("formula_matches_direct", (formula - direct).abs(), ctx.tol),
            Check::new("ceiling", formula, 3.0 + 1e-9),
        ],
        witness: json!({ "state": ccqq(&s), "formula": formula, "direct": direct }),
    })
}

/// Two-block cc-qq state with pure block states, redrawn until χ²_Sep ≥ ε.
fn entangled_ccqq(r: &mut impl Rng, epsilon: f64, sep: &SepOptions) -> Result<(CcQqState, f64)> {
    for _ in 0..64 {
        let p = r.random_range(0.2..0.8);
        let blocks = (0..2)
            .map(|k| CcQqBlock {
                x: vec![k],
                y: vec![k],
                p: if k == 0 { p } else { 1.0 - p },
                rho: linalg::outer(&linalg::random_pure(4, r)),
            })
            .collect();
        let s = CcQqState::new(2, 2, blocks)?;
        let v = chisep_ccqq(&s, sep)?.value;
        if v >= epsilon {
            return Ok((s, v));
        }
    }
    Err(Error::Precondition(format!("no cc-qq state with chi2 to separable states above {epsilon} in 64 draws")))
}

fn sep_contraction(ctx: &Ctx) -> Result<Instance> {
    const EPSILON: f64 = 1.0 / 16.0;
    let mut r = ctx.rng();
    let opts = StepOptions {
        sep: SepOptions { seed: ctx.child(), ..SepOptions::default() },
        search: ctx.search(16),
        eta_chi_trials: 0,
        tol: ctx.tol,
    };
    let (s, _) = entangled_ccqq(&mut r, EPSILON, &opts.sep)?;
    let t = random_separable_channel(2, 2, &mut r);
    let rep = verify_contraction_step(&s, &t, EPSILON, &opts)?;
    Ok(Instance {
        checks: vec![Check::new("contraction", rep.chisep_out, rep.rhs + ctx.tol)],
        witness: json!({ "state": ccqq(&s), "channel": t, "report": rep }),
    })
}

fn bound_value(v: &OverheadValue) -> f64 {
    match v {
        OverheadValue::Bound { value, .. } => *value,
        OverheadValue::Impossible { .. } => f64::INFINITY,
    }
}

fn overhead(ctx: &Ctx) -> Result<Instance> {
    let mut r = ctx.rng();
    let p = r.random_range(0.01..=1.0);
    let upper: f64 = r.random_range(0.05..=1.0);
    let bracket = CapacityBracket {
        lower: 0.0,
        upper,
        lower_source: "none".into(),
        upper_source: UpperSource::User,
        lower_input_bloch: [0.0; 3],
    };
    let n = r.random_range(1..=64u64);
    let t = 2f64.powi(r.random_range(1..=60));
    let base = overhead_lower_bound(n, t, p, &bracket)?;
    let more_n = overhead_lower_bound(n + 1, t, p, &bracket)?;
    let more_t = overhead_lower_bound(n, 2.0 * t, p, &bracket)?;
    let alpha = overhead_alpha(p)?;
    let closed = 1.0 / (2.0 * (2.0 / p).log2());
    let b = bound_value(&base.bound);
    Ok(Instance {
        checks: vec![
            Check::new("alpha_closed_form", (alpha - closed).abs(), ctx.tol),
            Check::new("monotone_in_n", b, bound_value(&more_n.bound) + ctx.tol),
            Check::new("monotone_in_t", b, bound_value(&more_t.bound) + ctx.tol),
            Check::new("at_least_log_term", alpha * t.log2(), b + ctx.tol),
            Check::new("at_least_capacity_term", n as f64 / upper, b * (1.0 + 1e-12)),
        ],
        witness: json!({ "p": p, "upper": upper, "n": n, "t": t, "bound": base }),
    })
}

fn ctx_for(suite: Suite, opts: &VerifyOptions, index: usize) -> Ctx {
    Ctx { seed: opts.seed, index, tol: opts.tol.unwrap_or(suite.default_tol()), restarts: opts.restarts }
}

fn violations(suite: Suite, ctx: &Ctx, inst: &Instance) -> Vec<Counterexample> {
    inst.checks
        .iter()
        .filter(|c| !c.holds())
        .map(|c| Counterexample {
            suite,
            seed: ctx.seed,
            index: ctx.index,
            check: c.name.clone(),
            lhs: c.lhs,
            rhs: c.rhs,
            tol: ctx.tol,
            restarts: ctx.restarts,
            witness: inst.witness.clone(),
        })
        .collect()
}

/// Runs every instance of `suite`; independent instances run in parallel and
/// are reported in index order.
pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> SuiteReport {
    let trials = opts.trials.unwrap_or(suite.default_trials());
    let results: Vec<(usize, Result<Instance>)> = (0..trials)
        .into_par_iter()
        .map(|k| (k, run_instance(suite, &ctx_for(suite, opts, k))))
        .collect();
    let mut checks = 0;
    let mut worst_margin = f64::INFINITY;
    let mut viol = Vec::new();
    let mut failures = Vec::new();
    for (k, res) in results {
        match res {
            Ok(inst) => {
                checks += inst.checks.len();
                for c in &inst.checks {
                    worst_margin = worst_margin.min(c.rhs - c.lhs);
                }
                viol.extend(violations(suite, &ctx_for(suite, opts, k), &inst));
            }
            Err(e) => failures.push(InstanceFailure { index: k, message: e.to_string() }),
        }
    }
    SuiteReport {
        suite,
        seed: opts.seed,
        trials,
        tol: opts.tol.unwrap_or(suite.default_tol()),
        checks,
        worst_margin,
        passed: viol.is_empty() && failures.is_empty(),
        violations: viol,
        failures,
    }
}

/// Re-runs the instance behind a counterexample and returns the violations
/// it produces now.
pub fn replay(c: &Counterexample) -> Result<Vec<Counterexample>> {
    let ctx = Ctx { seed: c.seed, index: c.index, tol: c.tol, restarts: c.restarts };
    let inst = run_instance(c.suite, &ctx)?;
    Ok(violations(c.suite, &ctx, &inst))
}
