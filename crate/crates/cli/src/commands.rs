use std::path::Path;

use chcon::bounds::{capacity_bracket, memory_time_bound_from_p, overhead_lower_bound, CapacityBracket, OverheadValue, SearchConfig, UpperSource};
use chcon::channel::{bloch, extremality_margin, is_extreme_point, validate_channel};
use chcon::contraction::{eta_tr, eta_tr_upper_choi, eta_tr_upper_minoutev, SearchOptions};
use chcon::decompose::{is_entanglement_breaking, p_constant, P2Options};
use chcon::entanglement::BipartiteState;
use chcon::simulator::{doubled_memory_experiment, run_noisy_circuit, CircuitFile, DoubledOptions, NoiseOrder, SimOptions};
use chcon::verify::{replay, run_suite, Counterexample, Suite, VerifyOptions};
use chcon::{ChannelSpec, Error, KrausChannel, Tolerances};
use serde::Serialize;
use serde_json::{json, Value};

use crate::{Cli, Command, NoiseOrderArg, Switch};

pub struct Outcome {
    pub records: Vec<Value>,
    pub ok: bool,
    /// Lines for stderr.
    pub notices: Vec<String>,
}

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Lib(Error),
    Usage(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Io(m) | CliError::Usage(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_channel(path: &Path) -> Result<KrausChannel> {
    let spec = ChannelSpec::from_json(&read(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    spec.to_channel().map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn value(x: impl Serialize) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

/// Accepts plain numbers (`1e6`) and powers (`2^40`).
pub fn parse_depth(s: &str) -> std::result::Result<f64, String> {
    let v = match s.split_once('^') {
        Some((b, e)) => {
            let b: f64 = b.trim().parse().map_err(|_| format!("invalid base in {s:?}"))?;
            let e: f64 = e.trim().parse().map_err(|_| format!("invalid exponent in {s:?}"))?;
            b.powf(e)
        }
        None => s.trim().parse().map_err(|_| format!("invalid depth {s:?}"))?,
    };
    if !(v.is_finite() && v >= 1.0) {
        return Err(format!("depth must be a finite number >= 1, got {s:?}"));
    }
    Ok(v)
}

fn search(cli: &Cli) -> SearchOptions {
    SearchOptions { seed: cli.seed, restarts: cli.restarts.unwrap_or(SearchOptions::default().restarts), ..SearchOptions::default() }
}

fn p2(cli: &Cli) -> P2Options {
    P2Options { seed: cli.seed, ..P2Options::default() }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Analyze { channel } => analyze(cli, channel),
        Command::Bound { channel, n, t, p, capacity_upper } => bound(cli, channel.as_deref(), *n, *t, *p, *capacity_upper),
        Command::Simulate { file, doubled, qubits, steps, noise_order, trailing_noise } => {
            let sim = SimOptions {
                order: match noise_order {
                    NoiseOrderArg::NoiseFirst => NoiseOrder::NoiseFirst,
                    NoiseOrderArg::LayerFirst => NoiseOrder::LayerFirst,
                },
                trailing_noise: *trailing_noise == Switch::On,
                seed: cli.seed,
                ..SimOptions::default()
            };
            if *doubled {
                simulate_doubled(cli, file, *qubits, steps.unwrap_or(10), sim)
            } else {
                simulate(file, *steps, sim)
            }
        }
        Command::Verify { suite, replay } => match replay {
            Some(path) => replay_file(path),
            None => verify(cli, suite.as_deref().unwrap_or("all")),
        },
    }
}

fn analyze(cli: &Cli, path: &Path) -> Result<Outcome> {
    let ch = load_channel(path)?;
    let tol = Tolerances::default();
    let mut notes = Vec::new();
    let validation = validate_channel(ch.kraus(), &tol)?;
    let choi = ch.choi();
    let mut report = json!({
        "channel": { "in_dim": ch.in_dim(), "out_dim": ch.out_dim(), "kraus_count": ch.kraus().len(), "choi_rank": ch.choi_rank(tol.psd) },
        "validation": validation,
        "choi_spectrum": choi.eigenvalues(),
        "unital": ch.is_unital(tol.psd),
        "unitary": ch.is_unitary(1e-9),
        "extremal": is_extreme_point(&ch, 1e-9),
        "extremality_margin": extremality_margin(&ch),
    });
    if ch.is_qubit() {
        let (t, m) = bloch::affine_parts(&ch)?;
        report["bloch"] = json!({
            "t": [t[0], t[1], t[2]],
            "matrix": (0..3).map(|i| [m[(i, 0)], m[(i, 1)], m[(i, 2)]]).collect::<Vec<_>>(),
            "normal_form": bloch::to_bloch_affine(&ch)?,
        });
        report["entanglement_breaking"] = json!(is_entanglement_breaking(&ch)?);
    } else {
        notes.push("Bloch form, entanglement breaking test and p constant need a qubit channel".to_string());
    }
    if ch.in_dim() == ch.out_dim() {
        let opts = search(cli);
        report["eta_tr"] = value(eta_tr(&ch, &opts)?);
        report["eta_tr_upper_minoutev"] = value(eta_tr_upper_minoutev(&ch, &opts)?);
        report["eta_tr_upper_choi"] = value(eta_tr_upper_choi(&ch)?);
    } else {
        notes.push("contraction coefficients need equal input and output dimensions".to_string());
    }
    if ch.is_qubit() {
        match p_constant(&ch, &p2(cli)) {
            Ok(r) => report["p_constant"] = value(r),
            Err(e @ Error::UnitaryChannel) => {
                report["p_constant"] = Value::Null;
                notes.push(e.to_string());
            }
            Err(e) => return Err(e.into()),
        }
    }
    report["notes"] = json!(notes);
    Ok(Outcome { records: vec![report], ok: true, notices: vec![] })
}

fn bound(cli: &Cli, path: Option<&Path>, n: u64, t: f64, p: Option<f64>, user_upper: Option<f64>) -> Result<Outcome> {
    let mut notes = Vec::new();
    let ch = path.map(load_channel).transpose()?;
    let mut report = json!({});
    let p = match (p, &ch) {
        (Some(p), _) => {
            notes.push(format!("p = {p} supplied directly"));
            p
        }
        (None, Some(ch)) => {
            let r = p_constant(ch, &p2(cli))?;
            notes.push(format!("p = max(p1, p2) = {} from the channel ({:?})", r.p, r.certification));
            report["p_constant"] = value(&r);
            r.p
        }
        (None, None) => return Err(CliError::Usage("bound needs a channel file or --p".into())),
    };
    let bracket = match &ch {
        Some(ch) => {
            let cfg = SearchConfig { seed: cli.seed, restarts: cli.restarts.unwrap_or(SearchConfig::default().restarts) };
            capacity_bracket(ch, user_upper, &cfg)?
        }
        None => {
            let mut b = CapacityBracket::trivial();
            if let Some(u) = user_upper {
                if !(0.0..=1.0).contains(&u) {
                    return Err(CliError::Usage(format!("--capacity-upper must lie in [0, 1], got {u}")));
                }
                b.upper = u;
                b.upper_source = UpperSource::User;
            }
            b
        }
    };
    notes.push(match &bracket.upper_source {
        UpperSource::Trivial => "capacity upper bound 1 is trivial; the capacity term is vacuous".to_string(),
        UpperSource::User => format!("capacity upper bound {} supplied by the user", bracket.upper),
        UpperSource::Preset { name } => format!("capacity upper bound {} from a known channel: {name}", bracket.upper),
    });
    let n32 = u32::try_from(n).map_err(|_| CliError::Usage(format!("--n {n} is too large")))?;
    let overhead = overhead_lower_bound(n, t, p, &bracket)?;
    let mut notices = Vec::new();
    if let OverheadValue::Impossible { reason } = &overhead.bound {
        notices.push(format!("IMPOSSIBLE: {reason}; fault tolerance is not possible even for a single time step"));
    }
    report["impossible"] = json!(matches!(overhead.bound, OverheadValue::Impossible { .. }));
    report["memory_time"] = value(memory_time_bound_from_p(n32, p)?);
    report["overhead"] = value(&overhead);
    report["notes"] = json!(notes);
    Ok(Outcome { records: vec![report], ok: true, notices })
}

fn simulate(path: &Path, steps: Option<usize>, sim: SimOptions) -> Result<Outcome> {
    let text = read(path)?;
    let mut file = CircuitFile::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if steps.is_some() {
        file.steps = steps;
    }
    let (circuit, input) = file.build()?;
    let report = run_noisy_circuit(&circuit, &input, None, &sim)?;
    let mut records: Vec<Value> = report.steps.iter().map(|s| tagged("step", value(s))).collect();
    records.push(json!({
        "record": "summary",
        "seed": report.seed,
        "width": report.width,
        "length": report.length,
        "order": report.order,
        "trailing_noise": report.trailing_noise,
        "passed": report.passed,
    }));
    Ok(Outcome { records, ok: report.passed, notices: vec![] })
}

fn tagged(kind: &str, mut v: Value) -> Value {
    if let Value::Object(m) = &mut v {
        m.insert("record".into(), json!(kind));
    }
    v
}

fn simulate_doubled(cli: &Cli, path: &Path, qubits: usize, steps: usize, sim: SimOptions) -> Result<Outcome> {
    let noise = load_channel(path)?;
    if !noise.is_qubit() {
        return Err(CliError::Usage("--doubled needs a qubit noise channel".into()));
    }
    let opts = DoubledOptions { sim, p2: p2(cli), tol: cli.tol.unwrap_or(DoubledOptions::default().tol) };
    let input = BipartiteState::maximally_entangled(1 << qubits);
    let report = doubled_memory_experiment(qubits, &noise, steps, None, &input, &opts)?;
    let mut records: Vec<Value> = report.trajectory.steps.iter().map(|s| tagged("step", value(s))).collect();
    let mut summary = value(&report);
    if let Value::Object(m) = &mut summary {
        m.remove("trajectory");
        let c = &report.constant;
        m.insert("constant".into(), json!({ "p": c.p, "p1": c.p1, "p2_lower": c.p2_lower, "certification": c.certification, "unital": c.unital }));
        m.insert("record".into(), json!("summary"));
        m.insert("order".into(), value(report.trajectory.order));
        m.insert("trailing_noise".into(), json!(report.trajectory.trailing_noise));
    }
    records.push(summary);
    let notices = if report.passed { vec![] } else { vec!["VIOLATION: per-step contraction or endgame check failed".to_string()] };
    Ok(Outcome { records, ok: report.passed, notices })
}

fn verify(cli: &Cli, name: &str) -> Result<Outcome> {
    let suites: Vec<Suite> = if name == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![name.parse().map_err(|e: Error| CliError::Usage(e.to_string()))?]
    };
    let opts = VerifyOptions { seed: cli.seed, trials: cli.trials, restarts: cli.restarts, tol: cli.tol };
    let mut records = Vec::new();
    let mut notices = Vec::new();
    let mut ok = true;
    for s in suites {
        let r = run_suite(s, &opts);
        ok &= r.passed;
        notices.push(format!(
            "{:<16} {} checks={} violations={} failures={}",
            s.name(),
            if r.passed { "PASS" } else { "FAIL" },
            r.checks,
            r.violations.len(),
            r.failures.len()
        ));
        records.push(value(&r));
    }
    Ok(Outcome { records, ok, notices })
}

fn collect_counterexamples(v: &Value, out: &mut Vec<Counterexample>) -> Result<()> {
    match v {
        Value::Array(a) => a.iter().try_for_each(|x| collect_counterexamples(x, out)),
        Value::Object(m) if m.contains_key("violations") => collect_counterexamples(&m["violations"], out),
        Value::Object(_) => {
            let c: Counterexample = serde_json::from_value(v.clone()).map_err(|e| CliError::Usage(format!("not a counterexample: {e}")))?;
            out.push(c);
            Ok(())
        }
        _ => Err(CliError::Usage("replay file must hold counterexamples or suite reports".into())),
    }
}

fn replay_file(path: &Path) -> Result<Outcome> {
    let text = read(path)?;
    let mut cases = Vec::new();
    let parsed: Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        // a jsonl report
        Err(_) => Value::Array(
            text.lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| serde_json::from_str(l).map_err(|e| CliError::Lib(e.into())))
                .collect::<Result<_>>()?,
        ),
    };
    collect_counterexamples(&parsed, &mut cases)?;
    if cases.is_empty() {
        return Err(CliError::Usage(format!("{}: no counterexamples to replay", path.display())));
    }
    let mut records = Vec::new();
    let mut reproduced_any = false;
    let mut notices = Vec::new();
    for c in cases {
        let now = replay(&c)?;
        let reproduced = now.iter().any(|x| x.check == c.check);
        reproduced_any |= reproduced;
        notices.push(format!(
            "{} seed={} index={} check={}: {}",
            c.suite,
            c.seed,
            c.index,
            c.check,
            if reproduced { "REPRODUCED" } else { "not reproduced" }
        ));
        records.push(json!({ "counterexample": c, "reproduced": reproduced, "violations": now }));
    }
    Ok(Outcome { records, ok: !reproduced_any, notices })
}
