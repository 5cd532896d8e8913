//! `sinr-region solve | sweep | tv-solve | verify`.
//!
//! Numbers are written with 12 significant digits (`{:.11e}`), and JSON
//! values are parsed back from those same strings, so CSV and JSON agree
//! exactly and repeated runs are byte-identical. Exit codes: 0 success,
//! 1 invalid input or solver failure, 2 unbounded `gamma*`, 3 `verify` gap
//! above tolerance.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::model::{load_channel_spec, ChannelSource, ChannelSpec, Direction, ModelError, SpecError};
use crate::oracle::{self, OracleError, OracleOutcome};
use crate::random::Sampler;
use crate::static_region::{Binding, Directions, SolveError, SolveReport, Solver, SweepPoint};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_UNBOUNDED: i32 = 2;
pub const EXIT_GAP: i32 = 3;

/// Overrides the relative tolerance of `verify`.
pub const TOL_ENV: &str = "SINR_REGION_TOL";
pub const DEFAULT_VERIFY_TOL: f64 = 1e-7;

#[derive(Debug, Parser)]
#[command(
    name = "sinr-region",
    version,
    about = "Maximum balanced SINR and rate-region boundaries"
)]
struct Cli {
    #[command(subcommand)]
    command: CommandArgs,
}

#[derive(Debug, Subcommand)]
enum CommandArgs {
    /// Maximum balanced SINR of a fixed channel along one direction.
    Solve(SolveArgs),
    /// Boundary of the rate region, one row per direction.
    Sweep(SweepArgs),
    /// Maximum balanced SINR of a time-varying channel under average-power budgets.
    TvSolve(SolveArgs),
    /// Compare the closed form against feasibility bisection.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Write results here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Channel spec (JSON).
    #[arg(long)]
    input: PathBuf,
    /// Direction weights, e.g. `1,0.5`; uniform when omitted.
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    input: PathBuf,
    /// Number of interior angles of (0, pi/2); two users only.
    #[arg(long, default_value_t = 181)]
    points: usize,
    /// File with one comma-separated direction per line, for any user count.
    #[arg(long, conflicts_with = "points")]
    directions: Option<PathBuf>,
    /// Also emit the unconstrained curve and one curve per constraint.
    #[arg(long)]
    per_constraint: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Channel spec; a seeded random spec is used when omitted.
    #[arg(long, required_unless_present = "seed")]
    input: Option<PathBuf>,
    #[arg(long, conflicts_with = "input")]
    seed: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<String>,
    /// Multiplies the closed-form value before comparing (negative control).
    #[arg(long, hide = true)]
    corrupt_gamma: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Sweep,
    TvSolve,
    Verify,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    File(PathBuf),
    Seed(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DirectionSource {
    Uniform,
    Inline(String),
    File(PathBuf),
}

/// Validated command line.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub input: InputSource,
    pub output: Option<PathBuf>,
    pub direction: DirectionSource,
    pub points: usize,
    pub per_constraint: bool,
    pub format: Format,
    pub verify_tol: f64,
    pub corrupt_gamma: Option<f64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("direction: {0}")]
    Direction(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl RunConfig {
    /// `tol_env` is the value of [`TOL_ENV`], if set.
    fn from_cli(cli: Cli, tol_env: Option<&str>) -> Result<Self, CliError> {
        let verify_tol = match tol_env {
            None => DEFAULT_VERIFY_TOL,
            Some(s) => match s.trim().parse::<f64>() {
                Ok(t) if t.is_finite() && t > 0.0 => t,
                _ => {
                    return Err(CliError::Usage(format!(
                        "{TOL_ENV} must be a positive number, got {s:?}"
                    )))
                }
            },
        };
        let inline = |mu: Option<String>| mu.map_or(DirectionSource::Uniform, DirectionSource::Inline);
        let base = |command, input, common: Common, direction| Self {
            command,
            input,
            output: common.output,
            direction,
            points: 0,
            per_constraint: false,
            format: common.format,
            verify_tol,
            corrupt_gamma: None,
        };
        Ok(match cli.command {
            CommandArgs::Solve(a) => base(Command::Solve, InputSource::File(a.input), a.common, inline(a.mu)),
            CommandArgs::TvSolve(a) => base(Command::TvSolve, InputSource::File(a.input), a.common, inline(a.mu)),
            CommandArgs::Sweep(a) => {
                if a.directions.is_none() && a.points < 2 {
                    return Err(CliError::Usage(format!(
                        "--points must be at least 2, got {}",
                        a.points
                    )));
                }
                let direction = a.directions.map_or(DirectionSource::Uniform, DirectionSource::File);
                Self {
                    points: a.points,
                    per_constraint: a.per_constraint,
                    ..base(Command::Sweep, InputSource::File(a.input), a.common, direction)
                }
            }
            CommandArgs::Verify(a) => {
                if let Some(f) = a.corrupt_gamma {
                    if !(f.is_finite() && f > 0.0) {
                        return Err(CliError::Usage("--corrupt-gamma must be a positive factor".into()));
                    }
                }
                let input = match (a.input, a.seed) {
                    (Some(p), _) => InputSource::File(p),
                    (None, Some(s)) => InputSource::Seed(s),
                    (None, None) => return Err(CliError::Usage("verify needs --input or --seed".into())),
                };
                Self {
                    corrupt_gamma: a.corrupt_gamma,
                    ..base(Command::Verify, input, a.common, inline(a.mu))
                }
            }
        })
    }
}

/// Runs one invocation; returns the process exit code. Diagnostics go to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(rendered.as_bytes())
            } else {
                stdout.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    let env = std::env::var(TOL_ENV).ok();
    let result = RunConfig::from_cli(cli, env.as_deref()).and_then(|cfg| execute(&cfg));
    match result {
        Ok(out) => {
            for line in &out.diagnostics {
                let _ = writeln!(stderr, "{line}");
            }
            if let Err(e) = emit(&out.body, out.output.as_deref(), stdout) {
                let _ = writeln!(stderr, "error: {e}");
                return EXIT_ERROR;
            }
            out.code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_ERROR
        }
    }
}

/// Rendered result of a command.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub body: String,
    pub code: i32,
    pub output: Option<PathBuf>,
    pub diagnostics: Vec<String>,
}

fn emit(body: &str, path: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, body).map_err(|source| CliError::Output {
            path: p.display().to_string(),
            source,
        }),
        None => stdout.write_all(body.as_bytes()).map_err(|source| CliError::Output {
            path: "stdout".into(),
            source,
        }),
    }
}

pub fn execute(cfg: &RunConfig) -> Result<Output, CliError> {
    let spec = match &cfg.input {
        InputSource::File(p) => load_channel_spec(p)?,
        InputSource::Seed(s) => {
            let mut sampler = Sampler::new(*s);
            let n = sampler.index(2, 4);
            sampler.spec(n)
        }
    };
    let solver = Solver::default();
    let mut out = Output {
        body: String::new(),
        code: EXIT_OK,
        output: cfg.output.clone(),
        diagnostics: Vec::new(),
    };
    match cfg.command {
        Command::Solve => {
            let ChannelSource::Static(ch) = &spec.source else {
                return Err(CliError::Usage("spec has `states`; use tv-solve".into()));
            };
            let d = direction(cfg, ch.users())?;
            let report = solver.multi_constrained_max_sinr(ch, &d, &spec.constraints)?;
            out.body = render_report(&report, &d, cfg.format);
            if report.unbounded {
                out.code = EXIT_UNBOUNDED;
                out.diagnostics
                    .push("gamma* is unbounded: no constraint limits the balanced SINR".into());
            }
        }
        Command::TvSolve => {
            let ChannelSource::TimeVarying(tv) = &spec.source else {
                return Err(CliError::Usage("spec has no `states`; use solve".into()));
            };
            let d = direction(cfg, tv.users())?;
            let report = solver.tv_multi(tv, &d, &spec.constraints)?;
            out.body = render_report(&report, &d, cfg.format);
            if report.unbounded {
                out.code = EXIT_UNBOUNDED;
                out.diagnostics
                    .push("gamma* is unbounded: no constraint limits the balanced SINR".into());
            }
        }
        Command::Sweep => {
            let ChannelSource::Static(ch) = &spec.source else {
                return Err(CliError::Usage("sweep supports fixed channels only".into()));
            };
            let directions = match &cfg.direction {
                DirectionSource::File(p) => {
                    let text = fs::read_to_string(p).map_err(|source| SpecError::Io {
                        path: p.display().to_string(),
                        source,
                    })?;
                    Directions::Explicit(parse_directions(&text)?)
                }
                _ => Directions::Count(cfg.points),
            };
            let users = ch.users();
            let curves: Vec<(String, Vec<SweepPoint>)> = if cfg.per_constraint {
                let region = solver.sweep_region(ch, &spec.constraints, &directions)?;
                let mut curves = vec![("unconstrained".to_owned(), region.unconstrained)];
                for (k, mut pts) in region.per_constraint.into_iter().enumerate() {
                    // Each curve was solved alone; report its position in the full list.
                    for p in &mut pts {
                        if let Ok(b) = &mut p.result {
                            if b.binding != Binding::Unconstrained {
                                b.binding = Binding::Constraint(k);
                            }
                        }
                    }
                    curves.push(((k + 1).to_string(), pts));
                }
                curves.push(("combined".to_owned(), region.combined));
                curves
            } else {
                vec![(
                    "combined".to_owned(),
                    solver.sweep_boundary(ch, &spec.constraints, &directions)?,
                )]
            };
            let failed = curves.iter().flat_map(|(_, p)| p).filter(|p| p.result.is_err()).count();
            if failed > 0 {
                out.diagnostics
                    .push(format!("{failed} direction(s) failed; see the error column"));
            }
            out.body = render_sweep(&curves, users, cfg.per_constraint, cfg.format);
        }
        Command::Verify => {
            let (closed, bisection) = verify_values(&solver, &spec, cfg)?;
            let closed = cfg.corrupt_gamma.map_or(closed, |f| closed * f);
            let v = Verification::new(closed, bisection, cfg.verify_tol);
            if !v.pass {
                out.code = EXIT_GAP;
                out.diagnostics.push(format!(
                    "relative gap {} exceeds {}",
                    num(v.rel_gap),
                    num(cfg.verify_tol)
                ));
            }
            out.body = render_verification(&v, cfg.format);
        }
    }
    Ok(out)
}

fn direction(cfg: &RunConfig, users: usize) -> Result<Direction, CliError> {
    Ok(match &cfg.direction {
        DirectionSource::Inline(s) => Direction::parse(s)?,
        _ => Direction::uniform(users)?,
    })
}

fn verify_values(solver: &Solver, spec: &ChannelSpec, cfg: &RunConfig) -> Result<(f64, OracleOutcome), CliError> {
    let users = spec.source.users();
    let d = match (&cfg.direction, &cfg.input) {
        (DirectionSource::Inline(s), _) => Direction::parse(s)?,
        (_, InputSource::Seed(seed)) => Sampler::new(seed.wrapping_add(1)).direction(users),
        _ => Direction::uniform(users)?,
    };
    Ok(match &spec.source {
        ChannelSource::Static(ch) => (
            solver.multi_constrained_max_sinr(ch, &d, &spec.constraints)?.gamma_star,
            oracle::bisect_max_sinr(ch, &d, &spec.constraints)?,
        ),
        ChannelSource::TimeVarying(tv) => (
            solver.tv_multi(tv, &d, &spec.constraints)?.gamma_star,
            oracle::bisect_time_varying(tv, &d, &spec.constraints)?,
        ),
    })
}

/// Closed form against bisection.
#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub closed_form: f64,
    pub bisection: f64,
    pub abs_gap: f64,
    pub rel_gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Verification {
    pub fn new(closed_form: f64, bisection: OracleOutcome, tolerance: f64) -> Self {
        let b = bisection.gamma();
        let (abs_gap, rel_gap) = match (closed_form.is_infinite(), b.is_infinite()) {
            (true, true) => (0.0, 0.0),
            (false, false) => {
                let gap = (closed_form - b).abs();
                (gap, gap / b)
            }
            _ => (f64::INFINITY, f64::INFINITY),
        };
        Self {
            closed_form,
            bisection: b,
            abs_gap,
            rel_gap,
            tolerance,
            pass: rel_gap <= tolerance,
        }
    }
}

/// Blank lines and `#` comments are skipped.
pub fn parse_directions(text: &str) -> Result<Vec<Direction>, CliError> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .map(|(k, l)| Direction::parse(l).map_err(|e| CliError::Usage(format!("directions line {}: {e}", k + 1))))
        .collect()
}

/// 12 significant digits, lowercase exponent; `inf` for unbounded values.
pub fn num(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x.is_nan() {
        return "nan".into();
    }
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.11e}")
}

/// Same rounding as [`num`]; non-finite values become `null`.
pub fn json_num(x: f64) -> Value {
    if x.is_finite() {
        json!(num(x).parse::<f64>().expect("formatted float parses"))
    } else {
        Value::Null
    }
}

fn json_nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| json_num(x)).collect())
}

fn binding_json(b: &Binding) -> Value {
    match b {
        Binding::Unconstrained => json!("unconstrained"),
        Binding::Constraint(k) => json!(k + 1),
    }
}

fn csv_string(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// CSV: one row per link (`state`, `user`), with the shared values repeated.
pub fn render_report(r: &SolveReport, d: &Direction, format: Format) -> String {
    let n = d.len();
    match format {
        Format::Json => {
            let mut obj = Map::new();
            obj.insert("mu".into(), json_nums(d.weights()));
            obj.insert("gamma_star".into(), json_num(r.gamma_star));
            obj.insert("unbounded".into(), json!(r.unbounded));
            obj.insert("binding".into(), binding_json(&r.binding));
            obj.insert("ties".into(), json!(r.ties.iter().map(|k| k + 1).collect::<Vec<_>>()));
            obj.insert("per_constraint".into(), json_nums(&r.per_constraint));
            obj.insert("power".into(), r.power.as_deref().map_or(Value::Null, json_nums));
            obj.insert("sinr".into(), json_nums(&r.sinr));
            obj.insert("rate".into(), json_nums(&r.rate));
            obj.insert("states".into(), json!(r.states));
            obj.insert(
                "average_power".into(),
                r.average_power.as_deref().map_or(Value::Null, json_nums),
            );
            pretty(&Value::Object(obj))
        }
        Format::Csv => {
            let mut header: Vec<String> = ["state", "user", "mu", "gamma_star", "sinr", "rate", "power"]
                .map(String::from)
                .to_vec();
            if r.average_power.is_some() {
                header.push("average_power".into());
            }
            header.push("binding".into());
            let mut rows = vec![header];
            for link in 0..r.sinr.len() {
                let (state, user) = (link / n, link % n);
                let mut row = vec![
                    (state + 1).to_string(),
                    (user + 1).to_string(),
                    num(d.weights()[user]),
                    num(r.gamma_star),
                    num(r.sinr[link]),
                    num(r.rate[link]),
                    r.power.as_ref().map_or(String::new(), |p| num(p[link])),
                ];
                if let Some(avg) = &r.average_power {
                    row.push(num(avg[user]));
                }
                row.push(r.binding.to_string());
                rows.push(row);
            }
            csv_string(rows)
        }
    }
}

pub fn render_sweep(curves: &[(String, Vec<SweepPoint>)], users: usize, with_curve: bool, format: Format) -> String {
    match format {
        Format::Json => {
            let curves: Vec<Value> = curves
                .iter()
                .map(|(name, pts)| {
                    let points: Vec<Value> = pts.iter().map(sweep_point_json).collect();
                    json!({ "curve": name, "points": points })
                })
                .collect();
            pretty(&json!({ "curves": curves }))
        }
        Format::Csv => {
            let mut header: Vec<String> = Vec::new();
            if with_curve {
                header.push("curve".into());
            }
            header.push("theta".into());
            header.extend((1..=users).map(|i| format!("mu{i}")));
            header.push("gamma_star".into());
            header.extend((1..=users).map(|i| format!("sinr{i}")));
            header.extend((1..=users).map(|i| format!("rate{i}")));
            header.push("binding".into());
            header.push("error".into());
            let mut rows = vec![header];
            for (name, pts) in curves {
                for p in pts {
                    let mut row = Vec::new();
                    if with_curve {
                        row.push(name.clone());
                    }
                    row.push(p.theta.map_or(String::new(), num));
                    row.extend(p.mu.weights().iter().map(|&m| num(m)));
                    match &p.result {
                        Ok(b) => {
                            row.push(num(b.gamma_star));
                            row.extend(b.sinr.iter().map(|&s| num(s)));
                            row.extend(b.rate.iter().map(|&s| num(s)));
                            row.push(b.binding.to_string());
                            row.push(String::new());
                        }
                        Err(e) => {
                            row.extend(std::iter::repeat_n(String::new(), 2 * users + 2));
                            row.push(e.to_string());
                        }
                    }
                    rows.push(row);
                }
            }
            csv_string(rows)
        }
    }
}

fn sweep_point_json(p: &SweepPoint) -> Value {
    let mut obj = Map::new();
    obj.insert("theta".into(), p.theta.map_or(Value::Null, json_num));
    obj.insert("mu".into(), json_nums(p.mu.weights()));
    match &p.result {
        Ok(b) => {
            obj.insert("gamma_star".into(), json_num(b.gamma_star));
            obj.insert("unbounded".into(), json!(b.unbounded));
            obj.insert("sinr".into(), json_nums(&b.sinr));
            obj.insert("rate".into(), json_nums(&b.rate));
            obj.insert("binding".into(), binding_json(&b.binding));
            obj.insert("error".into(), Value::Null);
        }
        Err(e) => {
            obj.insert("error".into(), json!(e.to_string()));
        }
    }
    Value::Object(obj)
}

pub fn render_verification(v: &Verification, format: Format) -> String {
    let status = if v.pass { "pass" } else { "fail" };
    match format {
        Format::Json => pretty(&json!({
            "closed_form": json_num(v.closed_form),
            "bisection": json_num(v.bisection),
            "abs_gap": json_num(v.abs_gap),
            "rel_gap": json_num(v.rel_gap),
            "tolerance": json_num(v.tolerance),
            "status": status,
        })),
        Format::Csv => csv_string(vec![
            ["closed_form", "bisection", "abs_gap", "rel_gap", "tolerance", "status"]
                .map(String::from)
                .to_vec(),
            vec![
                num(v.closed_form),
                num(v.bisection),
                num(v.abs_gap),
                num(v.rel_gap),
                num(v.tolerance),
                status.into(),
            ],
        ]),
    }
}
