//! Command-line front end for the `hap` library.
//!
//! Every subcommand writes to the supplied writer so it can be driven from
//! tests. [`run`] returns the process exit code:
//! 0 ok, 1 usage, 2 input error, 3 solver limit hit.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hap::bnb::{linearize, relax_value, solve_mip, SolveParams, SolveReport, SolveStatus};
use hap::cutplane::bf_k_driver;
use hap::cyclic::{karp_policy, solve_l_cyclic, solve_mplus1_nonoverlap};
use hap::metrics::{g_end, g_root, heuristic_gap, hhi};
use hap::modelir::{
    build_bound_free, build_conic, build_cycle_conic, build_env_milp, build_mplus1_base, build_multilinear,
    lp_text, Model,
};
use hap::policies::{brute_force, sequential_lospo, sequential_ro};
use hap::problem::{generate_instance, instance_to_json, load_instance, plan_revenue, GenConfig, Satiation};
use hap::{ConstraintSpec, Error, Instance, Plan};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_LIMIT: i32 = 3;

/// Relaxation rounds stop once an OA round improves the bound by less than this.
const RELAX_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "hap", about = "History-dependent assortment planning", version)]
pub struct Cli {
    /// Report wall-clock times (outputs are then no longer byte-reproducible).
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub cmd: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded random instance as JSON.
    Generate(GenerateArgs),
    /// Solve an instance with one formulation.
    Solve(SolveArgs),
    /// Evaluate an exact or heuristic policy.
    Policy(PolicyArgs),
    /// Best cyclic policy: Karp on the assortment graph, or a fixed length with --L.
    Cycle(CycleArgs),
    /// Root relaxation value of a formulation.
    Relax(RelaxArgs),
    /// Benchmark table, one CSV row per (instance, formulation).
    Bench(BenchArgs),
    /// Write a formulation as a CPLEX LP file.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Regime {
    Weak,
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Form {
    Env,
    Conic,
    Ml,
    Cycle,
    Base,
    Bf,
}

impl Form {
    fn label(self) -> &'static str {
        match self {
            Form::Env => "env",
            Form::Conic => "conic",
            Form::Ml => "ml",
            Form::Cycle => "cycle",
            Form::Base => "base",
            Form::Bf => "bf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyKind {
    Brute,
    Seqro,
    Lospo,
    Karp,
    Mplus1,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "n")]
    pub n: Option<usize>,
    #[arg(long = "t")]
    pub t: Option<usize>,
    #[arg(long = "m")]
    pub m: Option<usize>,
    /// Probability that a product is addictive.
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    #[arg(long, value_enum, default_value_t = Regime::Strong)]
    pub regime: Regime,
    /// Per-period cardinality cap C.
    #[arg(long)]
    pub cardinality: Option<usize>,
    /// Per-product offer cap K over the horizon.
    #[arg(long = "offer-cap")]
    pub offer_cap: Option<usize>,
    #[arg(long = "non-overlap")]
    pub non_overlap: bool,
}

impl GenArgs {
    fn config(&self) -> Result<GenConfig, CliError> {
        let need = |v: Option<usize>, f: &str| v.ok_or_else(|| CliError::Usage(format!("--{f} is required")));
        let cfg = GenConfig::new(need(self.n, "n")?, need(self.t, "t")?, need(self.m, "m")?)
            .theta(self.theta)
            .satiation(match self.regime {
                Regime::Weak => Satiation::Weak,
                Regime::Strong => Satiation::Strong,
            })
            .constraints(ConstraintSpec {
                cardinality_cap: self.cardinality,
                offer_cap: self.offer_cap,
                non_overlapping: self.non_overlap,
            });
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Relative optimality gap.
    #[arg(long, default_value_t = 0.005)]
    pub gap: f64,
    /// Time limit in seconds.
    #[arg(long = "time-limit", default_value_t = 3600.0)]
    pub time_limit: f64,
    /// Cut rounds for the bound-free formulation, or OA rounds for export.
    #[arg(long)]
    pub cuts: Option<usize>,
    /// Cycle length for --form cycle.
    #[arg(long = "L")]
    pub len: Option<usize>,
}

impl SolverArgs {
    fn params(&self) -> Result<SolveParams, CliError> {
        if !(self.gap >= 0.0) || !(self.time_limit > 0.0) || !self.time_limit.is_finite() {
            return Err(CliError::Usage("--gap must be >= 0 and --time-limit > 0".into()));
        }
        Ok(SolveParams::default()
            .with_gap(self.gap)
            .with_time_limit(Duration::from_secs_f64(self.time_limit)))
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub gen: GenArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum)]
    pub form: Form,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write the incumbent plan JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PolicyArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum)]
    pub policy: PolicyKind,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CycleArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RelaxArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum)]
    pub form: Form,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Instance files; repeat the flag for several. Without it instances are generated.
    #[arg(long = "instance")]
    pub instances: Vec<PathBuf>,
    #[command(flatten)]
    pub gen: GenArgs,
    /// Number of generated instances, seeds `seed, seed+1, ...`.
    #[arg(long = "count", default_value_t = 5)]
    pub count: usize,
    /// Formulations to run, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = vec![Form::Env, Form::Conic, Form::Ml])]
    pub form: Vec<Form>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum)]
    pub form: Form,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Limit(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Input(_) => EXIT_INPUT,
            CliError::Limit(_) => EXIT_LIMIT,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Limit(m) => write!(f, "solver limit: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Lp(_) | Error::SizeGuard(_) => CliError::Limit(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.code()
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> CliResult<i32> {
    match &cli.cmd {
        Command::Generate(a) => generate(a, out),
        Command::Solve(a) => solve(a, cli.timing, out),
        Command::Policy(a) => policy(a, cli.timing, out),
        Command::Cycle(a) => cycle(a, cli.timing, out),
        Command::Relax(a) => relax(a, cli.timing, out),
        Command::Bench(a) => bench(a, cli.timing, out),
        Command::Export(a) => export(a, out),
    }
}

fn load(path: &Path) -> CliResult<Instance> {
    load_instance(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, v: &Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::Input(e.to_string()))?;
    writeln!(out, "{text}")?;
    Ok(())
}

fn write_plan(path: &Option<PathBuf>, plan: &Plan) -> CliResult<()> {
    if let Some(p) = path {
        std::fs::write(p, hap::problem::plan_to_json(plan) + "\n")?;
    }
    Ok(())
}

fn status_label(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::TimeLimit => "time_limit",
        SolveStatus::NodeLimit => "node_limit",
    }
}

fn limit_hit(s: SolveStatus) -> bool {
    matches!(s, SolveStatus::TimeLimit | SolveStatus::NodeLimit)
}

fn finite(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn generate(a: &GenerateArgs, out: &mut dyn Write) -> CliResult<i32> {
    let seed = a.gen.seed.ok_or_else(|| CliError::Usage("--seed is required".into()))?;
    let inst = generate_instance(&a.gen.config()?, seed)?;
    let text = instance_to_json(&inst) + "\n";
    match &a.out {
        Some(p) => std::fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(EXIT_OK)
}

fn build(inst: &Instance, form: Form, len: Option<usize>) -> CliResult<Model> {
    Ok(match form {
        Form::Env => build_env_milp(inst)?,
        Form::Conic => build_conic(inst)?,
        Form::Ml => build_multilinear(inst)?,
        Form::Cycle => {
            let l = len.ok_or_else(|| CliError::Usage("--form cycle needs --L".into()))?;
            build_cycle_conic(inst, l)?
        }
        Form::Base => build_mplus1_base(inst)?,
        Form::Bf => build_bound_free(inst)?,
    })
}

/// Solve with one formulation. The objective is the decoded plan's revenue
/// for the cyclic formulations.
fn solve_form(inst: &Instance, form: Form, s: &SolverArgs) -> CliResult<(SolveReport, Option<f64>)> {
    let params = s.params()?;
    let rep = match form {
        Form::Base => solve_mplus1_nonoverlap(inst, false, 0, &params).map(|r| r.2)?,
        Form::Bf => solve_mplus1_nonoverlap(inst, true, s.cuts.unwrap_or(1), &params).map(|r| r.2)?,
        Form::Cycle => {
            let l = s.len.ok_or_else(|| CliError::Usage("--form cycle needs --L".into()))?;
            solve_l_cyclic(inst, l, &params).map(|r| r.2)?
        }
        _ => solve_mip(&build(inst, form, s.len)?, &params, &mut [])?,
    };
    let value = match &rep.plan {
        Some(p) => Some(plan_revenue(inst, p)?),
        None => None,
    };
    Ok((rep, value))
}

fn report_json(form: &str, rep: &SolveReport, value: Option<f64>, timing: bool) -> Value {
    let mut v = json!({
        "formulation": form,
        "status": status_label(rep.status),
        "objective": value.map_or(Value::Null, finite),
        "bound": finite(rep.bound),
        "gap": finite(rep.gap),
        "root_bound": finite(rep.root_bound),
        "nodes": rep.nodes,
        "cuts": rep.cuts,
        "plan": rep.plan.as_ref().map_or(Value::Null, |p| json!(p)),
    });
    if timing {
        v["wall_time"] = json!(rep.wall_time.as_secs_f64());
    }
    v
}

fn solve(a: &SolveArgs, timing: bool, out: &mut dyn Write) -> CliResult<i32> {
    let inst = load(&a.instance)?;
    let (rep, value) = solve_form(&inst, a.form, &a.solver)?;
    emit(out, &report_json(a.form.label(), &rep, value, timing))?;
    if let Some(p) = &rep.plan {
        write_plan(&a.out, p)?;
    }
    Ok(if limit_hit(rep.status) { EXIT_LIMIT } else { EXIT_OK })
}

fn policy(a: &PolicyArgs, timing: bool, out: &mut dyn Write) -> CliResult<i32> {
    let inst = load(&a.instance)?;
    let start = Instant::now();
    let mut extra = json!({});
    let mut code = EXIT_OK;
    let plan = match a.policy {
        PolicyKind::Brute => brute_force(&inst)?.0,
        PolicyKind::Seqro => sequential_ro(&inst),
        PolicyKind::Lospo => sequential_lospo(&inst),
        PolicyKind::Karp => {
            let p = karp_policy(&inst)?;
            extra = json!({ "cycle_length": p.cycle.len, "cycle_mean": p.cycle.mean });
            p.plan
        }
        PolicyKind::Mplus1 => {
            let (plan, _, rep) = solve_mplus1_nonoverlap(&inst, false, 0, &a.solver.params()?)?;
            if limit_hit(rep.status) {
                code = EXIT_LIMIT;
            }
            extra = json!({ "status": status_label(rep.status) });
            plan
        }
    };
    let name = a.policy.to_possible_value().expect("named").get_name().to_string();
    let mut v = json!({
        "policy": name,
        "value": plan_revenue(&inst, &plan)?,
        "plan": plan,
    });
    for (k, x) in extra.as_object().expect("object") {
        v[k] = x.clone();
    }
    if timing {
        v["wall_time"] = json!(start.elapsed().as_secs_f64());
    }
    emit(out, &v)?;
    write_plan(&a.out, &plan)?;
    Ok(code)
}

fn cycle(a: &CycleArgs, timing: bool, out: &mut dyn Write) -> CliResult<i32> {
    let inst = load(&a.instance)?;
    let start = Instant::now();
    let (mut v, plan, code) = match a.solver.len {
        None => {
            let p = karp_policy(&inst)?;
            let v = json!({
                "method": "karp",
                "length": p.cycle.len,
                "mean": p.cycle.mean,
                "value": plan_revenue(&inst, &p.plan)?,
                "plan": p.plan,
            });
            (v, p.plan, EXIT_OK)
        }
        Some(l) => {
            let (plan, value, rep) = solve_l_cyclic(&inst, l, &a.solver.params()?)?;
            let v = json!({
                "method": "cycle",
                "length": l,
                "status": status_label(rep.status),
                "value": value,
                "bound": finite(rep.bound),
                "plan": plan,
            });
            (v, plan, if limit_hit(rep.status) { EXIT_LIMIT } else { EXIT_OK })
        }
    };
    if timing {
        v["wall_time"] = json!(start.elapsed().as_secs_f64());
    }
    emit(out, &v)?;
    write_plan(&a.out, &plan)?;
    Ok(code)
}

fn relax(a: &RelaxArgs, timing: bool, out: &mut dyn Write) -> CliResult<i32> {
    let inst = load(&a.instance)?;
    let start = Instant::now();
    let model = match a.form {
        Form::Bf => bf_k_driver(&inst, a.solver.cuts.unwrap_or(1), &a.solver.params()?)?.model,
        f => build(&inst, f, a.solver.len)?,
    };
    let trace = relax_value(&model, &mut [], RELAX_TOL)?;
    let mut v = json!({
        "formulation": a.form.label(),
        "value": trace.value,
        "rounds": trace.history.len() - 1,
        "cuts": trace.cuts.len(),
    });
    if timing {
        v["wall_time"] = json!(start.elapsed().as_secs_f64());
    }
    emit(out, &v)?;
    Ok(EXIT_OK)
}

/// One benchmark row. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub instance: String,
    pub formulation: String,
    pub status: String,
    pub r_ip: Option<f64>,
    pub r_u: Option<f64>,
    pub r_rlx: Option<f64>,
    pub g_end: Option<f64>,
    pub g_root: Option<f64>,
    pub gap_seqro: Option<f64>,
    pub gap_lospo: Option<f64>,
    pub hhi: Option<f64>,
    /// Seconds; empty unless `--timing` is given.
    pub wall_time: Option<f64>,
}

pub const BENCH_COLUMNS: [&str; 12] = [
    "instance",
    "formulation",
    "status",
    "r_ip",
    "r_u",
    "r_rlx",
    "g_end",
    "g_root",
    "gap_seqro",
    "gap_lospo",
    "hhi",
    "wall_time",
];

fn opt(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn bench_row(id: &str, inst: &Instance, form: Form, s: &SolverArgs, timing: bool) -> BenchRecord {
    let start = Instant::now();
    let ro = plan_revenue(inst, &sequential_ro(inst)).ok();
    let lospo = plan_revenue(inst, &sequential_lospo(inst)).ok();
    let mut rec = BenchRecord {
        instance: id.to_string(),
        formulation: form.label().to_string(),
        status: String::new(),
        r_ip: None,
        r_u: None,
        r_rlx: None,
        g_end: None,
        g_root: None,
        gap_seqro: None,
        gap_lospo: None,
        hhi: None,
        wall_time: None,
    };
    match solve_form(inst, form, s) {
        Err(e) => rec.status = format!("error: {e}"),
        Ok((rep, value)) => {
            rec.status = status_label(rep.status).to_string();
            rec.r_ip = value;
            // the LP bound can sit a rounding error below the exact plan revenue
            rec.r_u = opt(rep.bound).map(|u| value.map_or(u, |ip| u.max(ip)));
            rec.r_rlx = opt(rep.root_bound);
            if let Some(ip) = value {
                rec.g_end = rec.r_u.map(|u| g_end(u, ip));
                rec.g_root = rec.r_rlx.map(|r| g_root(r, ip));
                rec.gap_seqro = ro.map(|h| heuristic_gap(ip, h));
                rec.gap_lospo = lospo.map(|h| heuristic_gap(ip, h));
            }
            rec.hhi = rep.plan.as_ref().and_then(|p| hhi(p).ok());
        }
    }
    if timing {
        rec.wall_time = Some(start.elapsed().as_secs_f64());
    }
    rec
}

/// Benchmark rows in input order: instances outer, formulations inner.
pub fn bench_records(instances: &[(String, Instance)], forms: &[Form], s: &SolverArgs, jobs: usize, timing: bool) -> CliResult<Vec<BenchRecord>> {
    let tasks: Vec<(usize, Form)> = (0..instances.len())
        .flat_map(|k| forms.iter().map(move |&f| (k, f)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Input(e.to_string()))?;
    Ok(pool.install(|| {
        tasks
            .par_iter()
            .map(|&(k, f)| bench_row(&instances[k].0, &instances[k].1, f, s, timing))
            .collect()
    }))
}

pub fn write_csv(records: &[BenchRecord], w: &mut dyn Write) -> CliResult<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(BENCH_COLUMNS).map_err(|e| CliError::Input(e.to_string()))?;
    for r in records {
        wr.serialize(r).map_err(|e| CliError::Input(e.to_string()))?;
    }
    wr.flush()?;
    Ok(())
}

fn bench(a: &BenchArgs, timing: bool, out: &mut dyn Write) -> CliResult<i32> {
    a.solver.params()?;
    let mut instances = Vec::new();
    if a.instances.is_empty() {
        let cfg = a.gen.config()?;
        let seed = a.gen.seed.unwrap_or(0);
        for k in 0..a.count as u64 {
            instances.push((format!("seed{}", seed + k), generate_instance(&cfg, seed + k)?));
        }
    } else {
        for p in &a.instances {
            let id = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
            instances.push((id, load(p)?));
        }
    }
    let records = bench_records(&instances, &a.form, &a.solver, a.jobs, timing)?;
    match &a.out {
        Some(p) => {
            let mut f = std::fs::File::create(p)?;
            write_csv(&records, &mut f)?;
        }
        None => write_csv(&records, out)?,
    }
    let limited = records.iter().any(|r| r.status == "time_limit" || r.status == "node_limit");
    Ok(if limited { EXIT_LIMIT } else { EXIT_OK })
}

fn export(a: &ExportArgs, out: &mut dyn Write) -> CliResult<i32> {
    let inst = load(&a.instance)?;
    let mut model = build(&inst, a.form, a.solver.len)?;
    if !model.convex.is_empty() {
        let rounds = a.solver.cuts.ok_or_else(|| {
            CliError::Usage(format!(
                "--form {} has {} convex rows; pass --cuts K to linearize them",
                a.form.label(),
                model.convex.len()
            ))
        })?;
        model = linearize(&model, rounds)?;
    }
    let text = lp_text(&model)?;
    std::fs::write(&a.out, text)?;
    writeln!(out, "wrote {} ({} rows, {} columns)", a.out.display(), model.rows.len(), model.n_vars())?;
    Ok(EXIT_OK)
}
