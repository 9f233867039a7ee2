//! The `cpctl` command line.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::engine::{
    max_achievable, run_vi, slater_check, step_pairs, EngineConfig, FrontierCurve, VIResult,
};
use crate::formula::{parse_formula, parse_formula_with, Formula, Fragment, ParseOptions};
use crate::frontier::ValueVector;
use crate::model::{builtin_model, gridworld, load_model, save_model, Mdp, SlipTiers};
use crate::policy::{
    certify_coherence, check_compatibility, extract_policy, policy_from_json, policy_to_json,
    DEFAULT_REACH_CAP,
};
use crate::reachability::safe_sets_by_path;
use crate::verify::{
    check_chain_model, product_chain_check, simulate, CheckResult, THM1_FORMULA,
};

pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_NO_INPUT: i32 = 66;
pub const EXIT_CANT_CREATE: i32 = 73;

const DEFAULT_MANIFEST: &str = "cpctl-manifest.json";

#[derive(Debug, Parser)]
#[command(name = "cpctl", version, about = "Policy synthesis for continuing PCTL on finite MDPs")]
struct Cli {
    /// Worker threads (default: available cores). CPCTL_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Where to write the run manifest.
    #[arg(long, global = true, value_name = "PATH")]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Export a built-in or file model as JSON.
    Model(ModelCmd),
    /// Run value iteration and export frontiers and a policy.
    Synth(SynthCmd),
    /// Check a policy's compatibility and emit a certificate.
    Certify(CertifyCmd),
    /// Exact or sampled evaluation of a chain or a policy.
    Check(CheckCmd),
    /// Turn a frontier CSV into step-function plot data.
    FrontierPlot(PlotCmd),
    /// Dump the almost-sure safe sets of each path subformula.
    Preinfo(PreinfoCmd),
}

#[derive(Debug, Args, Serialize)]
struct ModelArgs {
    /// Built-in name (example1, thm1, gridworld1, gridworld2) or a model file.
    #[arg(long)]
    model: String,
    #[command(flatten)]
    params: ModelParams,
}

#[derive(Debug, Args, Serialize)]
struct ModelParams {
    /// Branch probability of the witness chain.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Escape probability of the witness chain.
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long)]
    slip_high: Option<f64>,
    #[arg(long)]
    slip_medium: Option<f64>,
    #[arg(long)]
    slip_low: Option<f64>,
    #[arg(long)]
    slip_constant: Option<f64>,
}

impl ModelParams {
    fn tiers(&self) -> SlipTiers {
        let d = SlipTiers::default();
        SlipTiers {
            high: self.slip_high.unwrap_or(d.high),
            medium: self.slip_medium.unwrap_or(d.medium),
            low: self.slip_low.unwrap_or(d.low),
            constant: self.slip_constant.unwrap_or(d.constant),
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct ModelCmd {
    /// Built-in name, `gridworld` (with --variant), or a model file.
    name: String,
    #[arg(long, default_value_t = 1)]
    variant: u32,
    #[command(flatten)]
    params: ModelParams,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct FormulaArgs {
    #[arg(long)]
    formula: String,
    /// Accept `a W b` by rewriting the goal to `a & b`.
    #[arg(long)]
    continuing_normalize: bool,
}

#[derive(Debug, Args, Serialize)]
struct SynthCmd {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    formula: FormulaArgs,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    convergence_delta: f64,
    #[arg(long, default_value_t = 4)]
    w_mix: u32,
    #[arg(long, default_value_t = 64)]
    max_points: usize,
    #[arg(long, default_value_t = 0.01)]
    slater_margin: f64,
    /// Frontier CSV; a JSON mirror is written next to it.
    #[arg(long)]
    frontier: Option<PathBuf>,
    /// Policy file for the target point (written only when the target is met).
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Also run with every threshold raised by the Slater margin.
    #[arg(long)]
    slater_check: bool,
    /// Run to convergence and report the trade-off curve for this top-level
    /// path instead of stopping at the target.
    #[arg(long, value_name = "PATH_INDEX")]
    objective: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
struct CertifyCmd {
    #[command(flatten)]
    model: ModelArgs,
    /// Defaults to the formula recorded in the policy file.
    #[arg(long)]
    formula: Option<String>,
    #[arg(long)]
    policy: PathBuf,
    #[arg(long)]
    certificate: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct CheckCmd {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long)]
    formula: Option<String>,
    #[arg(long, conflicts_with = "simulate")]
    exact: bool,
    /// Sample count and horizon.
    #[arg(long, num_args = 2, value_names = ["N", "HORIZON"])]
    simulate: Option<Vec<u64>>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct PlotCmd {
    /// Frontier CSV written by `synth --frontier`.
    #[arg(long)]
    input: PathBuf,
    /// State whose rows are plotted (default: the first row's state).
    #[arg(long)]
    state: Option<String>,
    /// Column for the horizontal axis (default: first counter).
    #[arg(long)]
    x: Option<String>,
    /// Column for the vertical axis (default: last counter).
    #[arg(long)]
    y: Option<String>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct PreinfoCmd {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    formula: FormulaArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug)]
struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
    fn data(message: impl ToString) -> Self {
        Self::new(EXIT_DATA, message.to_string())
    }
}

/// Record of one invocation, written on success and failure alike.
#[derive(Debug, Default, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub model_hash: Option<String>,
    pub formula: Option<String>,
    pub elapsed_ms: f64,
    pub status: String,
    pub exit_code: i32,
    pub outputs: Vec<String>,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub error: Option<String>,
}

pub fn model_hash(m: &Mdp) -> String {
    let digest = Sha256::digest(save_model(m));
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

fn resolve_model(name: &str, p: &ModelParams) -> Result<Mdp, CliError> {
    match builtin_model(name, p.alpha, p.eps, p.tiers()) {
        Ok(m) => return Ok(m),
        Err(crate::model::ModelError::UnknownBuiltin(_)) => {}
        Err(e) => return Err(CliError::data(e)),
    }
    let bytes = std::fs::read(name)
        .map_err(|e| CliError::new(EXIT_NO_INPUT, format!("cannot read model '{name}': {e}")))?;
    load_model(&bytes).map_err(CliError::data)
}

fn parse_cpctl(text: &str, normalize: bool) -> Result<Formula, CliError> {
    parse_formula_with(
        text,
        Fragment::Cpctl,
        ParseOptions {
            continuing_normalize: normalize,
        },
    )
    .map_err(CliError::data)
}

/// CPCTL when possible, so path indices match synthesized policies;
/// otherwise safe PCTL.
fn parse_for_checking(text: &str) -> Result<Formula, CliError> {
    parse_formula(text, Fragment::Cpctl)
        .or_else(|_| parse_formula(text, Fragment::SafePctl))
        .map_err(CliError::data)
}

fn write_output(path: &Path, bytes: &[u8], ctx: &mut RunManifest) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| {
        CliError::new(EXIT_CANT_CREATE, format!("cannot write '{}': {e}", path.display()))
    })?;
    ctx.outputs.push(path.display().to_string());
    Ok(())
}

fn emit(out: Option<&Path>, bytes: &[u8], ctx: &mut RunManifest) -> Result<(), CliError> {
    match out {
        Some(p) => write_output(p, bytes, ctx),
        None => {
            print!("{}", String::from_utf8_lossy(bytes));
            Ok(())
        }
    }
}

fn pretty(v: &impl Serialize) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("output serializes");
    out.push(b'\n');
    out
}

/// Frontier rows: initial state first, then the rest in index order.
pub fn frontier_csv(m: &Mdp, f: &Formula, v: &ValueVector) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = std::iter::once("state".to_string())
        .chain((0..f.sf()).map(|i| format!("mu_{i}")))
        .chain((0..f.pf()).map(|j| format!("nu_{j}")));
    w.write_record(header).expect("in-memory write");
    for s in state_order(m) {
        for p in v.points(s) {
            let row = std::iter::once(m.state_name(s).to_string())
                .chain(p.mu.iter().map(|&b| if b { "1" } else { "0" }.to_string()))
                .chain(p.nu.iter().map(|x| x.to_string()));
            w.write_record(row).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 fields")
}

fn state_order(m: &Mdp) -> Vec<usize> {
    let s0 = m.initial();
    std::iter::once(s0)
        .chain((0..m.num_states()).filter(|&s| s != s0))
        .collect()
}

pub fn frontier_json(m: &Mdp, f: &Formula, r: &VIResult, cfg: &EngineConfig) -> Value {
    let states: Vec<Value> = state_order(m)
        .into_iter()
        .map(|s| {
            let points: Vec<Value> = r
                .frontiers
                .points(s)
                .map(|p| json!({"mu": p.mu, "nu": p.nu}))
                .collect();
            json!({"state": m.state_name(s), "points": points})
        })
        .collect();
    json!({
        "formula": f.to_string(),
        "status": r.status,
        "iterations": r.iterations,
        "config": cfg,
        "note": "frontiers are under-approximations; mixing is limited to the configured grid",
        "states": states,
    })
}

fn cmd_model(c: &ModelCmd, ctx: &mut RunManifest) -> Result<i32, CliError> {
    let m = if c.name == "gridworld" {
        gridworld(c.variant, c.params.tiers()).map_err(CliError::data)?
    } else {
        resolve_model(&c.name, &c.params)?
    };
    ctx.model_hash = Some(model_hash(&m));
    emit(c.output.as_deref(), &save_model(&m), ctx)?;
    Ok(0)
}

fn cmd_synth(c: &SynthCmd, ctx: &mut RunManifest) -> Result<i32, CliError> {
    let m = resolve_model(&c.model.model, &c.model.params)?;
    ctx.model_hash = Some(model_hash(&m));
    let f = parse_cpctl(&c.formula.formula, c.formula.continuing_normalize)?;
    ctx.formula = Some(f.to_string());
    let cfg = EngineConfig {
        epsilon: c.epsilon,
        max_iters: c.max_iters,
        convergence_delta: c.convergence_delta,
        w_mix: c.w_mix,
        max_points: c.max_points,
        slater_margin: c.slater_margin,
    };
    let (r, curve): (VIResult, Option<FrontierCurve>) = match c.objective {
        Some(j) => {
            let a = max_achievable(&m, &f, j, &cfg).map_err(CliError::data)?;
            (a.result, Some(a.curve))
        }
        None => (run_vi(&m, &f, &cfg).map_err(CliError::data)?, None),
    };
    ctx.status = serde_json::to_value(r.status)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default();
    if let Some(path) = &c.frontier {
        write_output(path, frontier_csv(&m, &f, &r.frontiers).as_bytes(), ctx)?;
        let mirror = path.with_extension("json");
        if mirror != *path {
            write_output(&mirror, &pretty(&frontier_json(&m, &f, &r, &cfg)), ctx)?;
        }
    }
    let mut policy_note = Value::Null;
    if let Some(path) = &c.policy {
        match r.target_point {
            Some(pid) => {
                let p = extract_policy(&m, &f, &r.frontiers, pid).map_err(CliError::data)?;
                write_output(path, &policy_to_json(&m, &f, &p), ctx)?;
                policy_note = json!({"memory_states": p.memory().len()});
            }
            None => policy_note = json!("target not met; no policy written"),
        }
    }
    let slater = if c.slater_check {
        Some(slater_check(&m, &f, &cfg).map_err(CliError::data)?)
    } else {
        None
    };
    let s0 = m.initial();
    let summary = json!({
        "status": r.status,
        "iterations": r.iterations,
        "last_change": r.last_change,
        "monotone": r.monotone,
        "initial_state": m.state_name(s0),
        "initial_points": r.frontiers.points(s0).map(|p| &p.nu).collect::<Vec<_>>(),
        "target_nu": r.target_point.map(|id| r.frontiers.point(id).nu.clone()),
        "curve": curve,
        "policy": policy_note,
        "slater": slater,
        "w_mix": cfg.w_mix,
    });
    print!("{}", String::from_utf8_lossy(&pretty(&summary)));
    Ok(r.status.exit_code())
}

fn cmd_certify(c: &CertifyCmd, ctx: &mut RunManifest) -> Result<i32, CliError> {
    let m = resolve_model(&c.model.model, &c.model.params)?;
    ctx.model_hash = Some(model_hash(&m));
    let bytes = std::fs::read(&c.policy).map_err(|e| {
        CliError::new(EXIT_NO_INPUT, format!("cannot read '{}': {e}", c.policy.display()))
    })?;
    let (p, recorded) = policy_from_json(&m, &bytes).map_err(CliError::data)?;
    let f = parse_for_checking(c.formula.as_deref().unwrap_or(&recorded))?;
    ctx.formula = Some(f.to_string());
    let vp = p.to_valued();
    match certify_coherence(&m, &f, &vp) {
        Ok(cert) => {
            ctx.status = "CERTIFIED".into();
            emit(c.certificate.as_deref(), &pretty(&cert), ctx)?;
            Ok(0)
        }
        Err(e) => {
            ctx.status = "REFUSED".into();
            if let Ok(report) = check_compatibility(&m, &f, &vp, DEFAULT_REACH_CAP) {
                eprint!("{}", String::from_utf8_lossy(&pretty(&report.violations)));
            }
            Err(CliError::data(e))
        }
    }
}

fn check_json(m_names: &dyn Fn(usize) -> String, f: &Formula, r: &CheckResult, at: usize) -> Value {
    let paths: Vec<Value> = (0..f.pf())
        .map(|j| {
            json!({
                "path": j,
                "formula": f.subexpr(f.owner(j)).to_string(),
                "probability": r.probability(j, at),
            })
        })
        .collect();
    let nodes: Vec<Value> = (0..f.sf())
        .map(|i| {
            json!({
                "node": i,
                "formula": f.subexpr(i).to_string(),
                "holds": r.holds(i, at),
                "sat_states": r.sat_set(i).into_iter().map(m_names).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "formula": f.to_string(),
        "satisfied": r.satisfied(at),
        "paths": paths,
        "nodes": nodes,
    })
}

fn cmd_check(c: &CheckCmd, ctx: &mut RunManifest) -> Result<i32, CliError> {
    let m = resolve_model(&c.model.model, &c.model.params)?;
    ctx.model_hash = Some(model_hash(&m));
    ctx.seed = Some(c.seed);
    let out = match &c.policy {
        None => {
            let text = match (&c.formula, c.model.model.as_str()) {
                (Some(t), _) => t.clone(),
                (None, "thm1" | "thm1chain") => THM1_FORMULA.to_string(),
                (None, _) => return Err(CliError::new(EXIT_USAGE, "--formula is required")),
            };
            let f = parse_for_checking(&text)?;
            ctx.formula = Some(f.to_string());
            let r = check_chain_model(&m, &f).map_err(CliError::data)?;
            let mut v = check_json(&|s| m.state_name(s).to_string(), &f, &r, m.initial());
            v["initial_state"] = json!(m.state_name(m.initial()));
            v
        }
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| {
                CliError::new(EXIT_NO_INPUT, format!("cannot read '{}': {e}", path.display()))
            })?;
            let (p, recorded) = policy_from_json(&m, &bytes).map_err(CliError::data)?;
            let f = parse_for_checking(c.formula.as_deref().unwrap_or(&recorded))?;
            ctx.formula = Some(f.to_string());
            match &c.simulate {
                Some(args) => {
                    let (n, horizon) = (args[0], args[1]);
                    if n == 0 || horizon == 0 {
                        return Err(CliError::new(EXIT_USAGE, "sample count and horizon must be positive"));
                    }
                    let est = simulate(&m, &p, &f, n, horizon as usize, c.seed)
                        .map_err(CliError::data)?;
                    json!({"formula": f.to_string(), "seed": c.seed, "estimates": est})
                }
                None => {
                    let pc = product_chain_check(&m, &p, &f).map_err(CliError::data)?;
                    let names = &pc.product.chain;
                    let mut v = check_json(&|s| names.state_name(s).to_string(), &f, &pc.result, 0);
                    v["product_states"] = json!(pc.product.memories.len());
                    v["claimed_nu"] = json!(p.achieved().1);
                    v["shortfalls"] = json!(pc.shortfalls(&p));
                    v
                }
            }
        }
    };
    ctx.status = "CHECKED".into();
    emit(c.output.as_deref(), &pretty(&out), ctx)?;
    Ok(0)
}

/// Parses a frontier CSV and returns the step-function plot data.
pub fn plot_data(
    csv: &str,
    state: Option<&str>,
    x: Option<&str>,
    y: Option<&str>,
) -> Result<String, String> {
    let mut r = csv::Reader::from_reader(csv.as_bytes());
    let header: Vec<String> = r.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
    if header.first().map(String::as_str) != Some("state") {
        return Err("frontier header must start with 'state'".into());
    }
    let counters: Vec<usize> = (0..header.len()).filter(|&i| header[i].starts_with("nu_")).collect();
    let col = |name: Option<&str>, default: Option<&usize>| -> Result<usize, String> {
        match name {
            Some(n) => header
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| format!("no column '{n}'")),
            None => default.copied().ok_or_else(|| "frontier has no counters".to_string()),
        }
    };
    let xi = col(x, counters.first())?;
    let yi = col(y, counters.last())?;
    let rows: Vec<csv::StringRecord> = r.records().collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let target = match state {
        Some(s) => s.to_string(),
        None => rows.first().ok_or("frontier has no rows")?[0].to_string(),
    };
    let mut pairs = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if &row[0] != target.as_str() {
            continue;
        }
        let num = |k: usize| row[k].parse::<f64>().map_err(|e| format!("row {}: {e}", i + 2));
        pairs.push((num(xi)?, num(yi)?));
    }
    if pairs.is_empty() {
        return Err(format!("no rows for state '{target}'"));
    }
    let curve = FrontierCurve::from_pairs(0, 0, pairs);
    let mut out = format!("# state={target} x={} y={}\n", header[xi], header[yi]);
    for (a, b) in step_pairs(&curve.points) {
        let _ = writeln!(out, "{a} {b}");
    }
    Ok(out)
}

fn cmd_plot(c: &PlotCmd, ctx: &mut RunManifest) -> Result<i32, CliError> {
    let text = std::fs::read_to_string(&c.input).map_err(|e| {
        CliError::new(EXIT_NO_INPUT, format!("cannot read '{}': {e}", c.input.display()))
    })?;
    let out = plot_data(&text, c.state.as_deref(), c.x.as_deref(), c.y.as_deref())
        .map_err(CliError::data)?;
    emit(c.output.as_deref(), out.as_bytes(), ctx)?;
    Ok(0)
}

fn cmd_preinfo(c: &PreinfoCmd, ctx: &mut RunManifest) -> Result<i32, CliError> {
    let m = resolve_model(&c.model.model, &c.model.params)?;
    ctx.model_hash = Some(model_hash(&m));
    let f = parse_cpctl(&c.formula.formula, c.formula.continuing_normalize)?;
    ctx.formula = Some(f.to_string());
    let sets = safe_sets_by_path(&m, &f);
    let paths: Vec<Value> = sets
        .iter()
        .map(|(&j, safe)| {
            let held = f.path(j).left();
            let actions: serde_json::Map<String, Value> = safe
                .members
                .iter()
                .map(|&s| {
                    let a = safe.safe_action[s].expect("member has an action");
                    (m.state_name(s).to_string(), json!(m.actions(s)[a].name))
                })
                .collect();
            json!({
                "path": j,
                "formula": f.subexpr(f.owner(j)).to_string(),
                "held_literals": crate::formula::literal_projection(&f, held).to_string(),
                "states": safe.members.iter().map(|&s| m.state_name(s)).collect::<Vec<_>>(),
                "safe_actions": actions,
            })
        })
        .collect();
    let out = json!({"formula": f.to_string(), "paths": paths});
    emit(c.output.as_deref(), &pretty(&out), ctx)?;
    Ok(0)
}

fn configure_threads(flag: Option<usize>) -> Result<(), CliError> {
    let env = std::env::var("CPCTL_THREADS").ok();
    let n = match env {
        Some(v) => Some(v.trim().parse::<usize>().map_err(|_| {
            CliError::new(EXIT_USAGE, format!("CPCTL_THREADS must be a positive integer, got '{v}'"))
        })?),
        None => flag,
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::new(EXIT_USAGE, "thread count must be positive"));
        }
        // A second build in the same process is harmless; keep the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn write_manifest(path: &Path, ctx: &RunManifest) {
    if let Err(e) = std::fs::write(path, pretty(ctx)) {
        eprintln!("cpctl: cannot write manifest '{}': {e}", path.display());
    }
}

/// `--manifest` as given, for runs whose arguments did not parse.
fn raw_manifest_path(args: &[OsString]) -> PathBuf {
    let mut it = args.iter().map(|a| a.to_string_lossy());
    while let Some(a) = it.next() {
        if a == "--manifest" {
            if let Some(v) = it.next() {
                return PathBuf::from(v.as_ref());
            }
        } else if let Some(v) = a.strip_prefix("--manifest=") {
            return PathBuf::from(v);
        }
    }
    PathBuf::from(DEFAULT_MANIFEST)
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let start = Instant::now();
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let mut ctx = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        ..Default::default()
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            ctx.command = args
                .get(1)
                .map(|a| a.to_string_lossy().into_owned())
                .unwrap_or_default();
            ctx.status = "USAGE".into();
            ctx.exit_code = code;
            ctx.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
            write_manifest(&raw_manifest_path(&args), &ctx);
            return code;
        }
    };
    let manifest = cli.manifest.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_MANIFEST));
    let (name, config) = match &cli.command {
        Command::Model(c) => ("model", serde_json::to_value(c)),
        Command::Synth(c) => ("synth", serde_json::to_value(c)),
        Command::Certify(c) => ("certify", serde_json::to_value(c)),
        Command::Check(c) => ("check", serde_json::to_value(c)),
        Command::FrontierPlot(c) => ("frontier-plot", serde_json::to_value(c)),
        Command::Preinfo(c) => ("preinfo", serde_json::to_value(c)),
    };
    ctx.command = name.to_string();
    ctx.config = config.unwrap_or(Value::Null);
    let result = configure_threads(cli.threads).and_then(|()| match &cli.command {
        Command::Model(c) => cmd_model(c, &mut ctx),
        Command::Synth(c) => cmd_synth(c, &mut ctx),
        Command::Certify(c) => cmd_certify(c, &mut ctx),
        Command::Check(c) => cmd_check(c, &mut ctx),
        Command::FrontierPlot(c) => cmd_plot(c, &mut ctx),
        Command::Preinfo(c) => cmd_preinfo(c, &mut ctx),
    });
    let code = match result {
        Ok(code) => {
            if ctx.status.is_empty() {
                ctx.status = "OK".into();
            }
            code
        }
        Err(e) => {
            eprintln!("cpctl: {}", e.message);
            if ctx.status.is_empty() {
                ctx.status = "ERROR".into();
            }
            ctx.error = Some(e.message);
            e.code
        }
    };
    ctx.exit_code = code;
    ctx.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    write_manifest(&manifest, &ctx);
    code
}

pub fn main() -> ! {
    std::process::exit(run(std::env::args_os()))
}
