//! Command-line front end: verification suites, integration runs,
//! elimination reports, lattice classification and catalog tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::json;

use crate::atlas::{builtin_atlas, check_atlas, parse_atlas, Atlas, BUILTIN_ATLASES};
use crate::hamiltonian::{fundamental_check, recover_hamiltonian, verify_hamiltonian, HamiltonianError};
use crate::integrator::{compile_atlas, integrate, IntegrateOptions, PhaseState, TPath, Trajectory};
use crate::kodaira_spencer::{ks_cocycle, verify_cocycle, verify_coboundary, verify_gluing, Orientation};
use crate::lattice::{builtin_labels, builtin_matrix, classify, deformation_dim, kernel, IntersectionMatrix};
use crate::painleve_db::{self, builtin_system, d8_chart0_reduction, eliminate_y, Comparison};
use crate::report::Report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "okpair", version, about = "Exact verification and chart-switching integration for Okamoto–Painlevé pairs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every symbolic identity of an atlas.
    Verify(VerifyArgs),
    /// Integrate the atlas vector field along a complex time path.
    Integrate(IntegrateArgs),
    /// Eliminate the momentum of a catalog Hamiltonian and compare with the equation.
    Eliminate(EliminateArgs),
    /// Classify an intersection matrix against the catalog.
    Classify(ClassifyArgs),
    /// Print the catalog of pair types.
    Tables(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Emit JSON instead of text.
    #[arg(long)]
    pub json: bool,
    /// Write the primary output to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false)]
pub struct SourceArgs {
    /// Built-in atlas name.
    #[arg(long, group = "source")]
    pub atlas: Option<String>,
    /// Atlas DSL file.
    #[arg(long, group = "source")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrajectoryFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct IntegrateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Parameter value `name=re` or `name=re,im`; repeat for each parameter.
    #[arg(long = "param", value_name = "K=V")]
    pub params: Vec<String>,
    /// Chart of the initial state.
    #[arg(long)]
    pub chart: String,
    /// First coordinate of the initial state, `re` or `re,im`.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: String,
    /// Second coordinate of the initial state.
    #[arg(long, allow_hyphen_values = true)]
    pub y0: String,
    /// Initial time; defaults to 0.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "path")]
    pub t0: Option<String>,
    /// Final time; equal to `--t0` gives a single sample.
    #[arg(long, allow_hyphen_values = true, required_unless_present = "path", conflicts_with = "path")]
    pub t1: Option<String>,
    /// Polyline `re,im;re,im;...` starting at the initial time.
    #[arg(long, allow_hyphen_values = true)]
    pub path: Option<String>,
    #[arg(long, default_value_t = crate::integrator::DEFAULT_RTOL)]
    pub rtol: f64,
    #[arg(long, default_value_t = crate::integrator::DEFAULT_ATOL)]
    pub atol: f64,
    #[arg(long)]
    pub max_step: Option<f64>,
    #[arg(long, default_value_t = crate::integrator::DEFAULT_MAX_STEPS)]
    pub max_steps: usize,
    /// Trajectory format; defaults to CSV for `.csv` files and JSON otherwise.
    #[arg(long, value_enum)]
    pub format: Option<TrajectoryFormat>,
}

#[derive(Debug, Args)]
pub struct EliminateArgs {
    /// Catalog tag: I, II, III, IV, V, VI, III_D7 or III_D8.
    #[arg(long)]
    pub system: String,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
#[group(id = "matrix", required = true, multiple = false)]
pub struct ClassifyArgs {
    /// JSON intersection matrix: `{"n":..,"entries":[[..]]}` or a bare array of rows.
    #[arg(long, group = "matrix")]
    pub file: Option<PathBuf>,
    /// Catalog label such as E7, D8, A3 or A0*.
    #[arg(long = "type", group = "matrix")]
    pub label: Option<String>,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Outcome of a subcommand: exit code, primary output and diagnostics.
struct Outcome {
    code: i32,
    text: String,
    json: serde_json::Value,
}

enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => m,
        }
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{rendered}")
            } else {
                write!(out, "{rendered}")
            };
            return code;
        }
    };
    let (common, result) = match &cli.command {
        Command::Verify(a) => (&a.common, cmd_verify(a)),
        Command::Integrate(a) => (&a.common, cmd_integrate(a)),
        Command::Eliminate(a) => (&a.common, cmd_eliminate(a)),
        Command::Classify(a) => (&a.common, cmd_classify(a)),
        Command::Tables(a) => (a, cmd_tables()),
    };
    match result {
        Ok(o) => {
            let body = if common.json {
                serde_json::to_string_pretty(&o.json).expect("plain JSON values") + "\n"
            } else {
                o.text
            };
            match &common.out {
                Some(p) if !matches!(cli.command, Command::Integrate(_)) => {
                    if let Err(e) = std::fs::write(p, body) {
                        let _ = writeln!(err, "error: cannot write {}: {e}", p.display());
                        return EXIT_USAGE;
                    }
                }
                _ => {
                    let _ = write!(out, "{body}");
                }
            }
            o.code
        }
        Err(e) => {
            if common.json {
                let _ = writeln!(out, "{}", json!({ "error": e.message(), "exit": e.code() }));
            }
            let _ = writeln!(err, "error: {}", e.message());
            e.code()
        }
    }
}

fn load_atlas(src: &SourceArgs) -> Result<Atlas, CliError> {
    match (&src.atlas, &src.file) {
        (Some(name), None) => {
            let upper = name.to_ascii_uppercase();
            builtin_atlas(&upper).map_err(|_| {
                CliError::Usage(format!("unknown atlas `{name}` (built-in: {})", BUILTIN_ATLASES.join(", ")))
            })
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            parse_atlas(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
        }
        _ => Err(CliError::Usage("give exactly one of --atlas and --file".into())),
    }
}

fn math<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Failure(e.to_string())
}

/// Runs the verification pipeline of an atlas, in order.
pub fn verify_reports(atlas: &Atlas) -> Result<Vec<Report>, String> {
    let s = |e: &dyn std::fmt::Display| e.to_string();
    let mut reports = vec![check_atlas(atlas).map_err(|e| s(&e))?];
    let cocycle = ks_cocycle(atlas).map_err(|e| s(&e))?;
    reports.push(verify_cocycle(&cocycle, atlas).map_err(|e| s(&e))?);
    let Some(b) = atlas.coboundary() else {
        let mut r = Report::new("coboundary");
        r.push("coboundary fields declared", false, Some("the atlas has no coboundary block".into()));
        reports.push(r);
        return Ok(reports);
    };
    let cb = verify_coboundary(&cocycle, b, atlas).map_err(|e| s(&e))?;
    let mut r = cb.report;
    if cb.orientation == Orientation::Reversed {
        r.push(
            "orientation",
            false,
            Some("fields satisfy theta_ij = theta_i - theta_j; negate them".into()),
        );
    }
    reports.push(r);
    reports.push(verify_gluing(atlas, b).map_err(|e| s(&e))?);
    let mut fundamental = Report::new("fundamental equation");
    let mut hamiltonians = Report::new("Hamiltonians");
    for chart in atlas.charts() {
        let Some(vf) = b.fields.get(&chart.id) else {
            fundamental.push(format!("field on {}", chart.id), false, Some("missing".into()));
            continue;
        };
        let density = chart.density();
        let f = fundamental_check(atlas, &density, vf).map_err(|e| s(&e))?;
        for c in f.checks {
            fundamental.push(format!("{}: {}", chart.id, c.label), c.passed, c.detail);
        }
        match recover_hamiltonian(atlas, vf) {
            Ok(h) => {
                let v = verify_hamiltonian(atlas, &h, vf, &density).map_err(|e| s(&e))?;
                let detail = if v.sign.is_some() {
                    None
                } else {
                    Some(v.report.failures().map(|c| c.label.clone()).collect::<Vec<_>>().join("; "))
                };
                hamiltonians.push(format!("{}: H = {}", chart.id, h.h), v.sign.is_some(), detail);
            }
            Err(HamiltonianError::NotUnitDensity(_)) | Err(HamiltonianError::NonPolynomial(_)) => {
                hamiltonians.push(format!("{}: no polynomial Hamiltonian for this density (skipped)", chart.id), true, None);
            }
            Err(HamiltonianError::NotClosed { chart, residual }) => {
                hamiltonians.push(format!("{chart}: contraction closed"), false, Some(residual));
            }
            Err(e) => return Err(e.to_string()),
        }
    }
    reports.push(fundamental);
    reports.push(hamiltonians);
    Ok(reports)
}

fn cmd_verify(a: &VerifyArgs) -> Result<Outcome, CliError> {
    let atlas = load_atlas(&a.source)?;
    let reports = verify_reports(&atlas).map_err(CliError::Failure)?;
    let passed = reports.iter().all(Report::passed);
    let total: usize = reports.iter().map(Report::len).sum();
    let failed: usize = reports.iter().map(|r| r.failures().count()).sum();
    let mut text = String::new();
    for r in &reports {
        let _ = write!(text, "{r}");
    }
    let _ = writeln!(
        text,
        "{}: {} of {total} identities hold in atlas {}",
        if passed { "PASS" } else { "FAIL" },
        total - failed,
        atlas.name
    );
    Ok(Outcome {
        code: if passed { EXIT_OK } else { EXIT_FAILURE },
        text,
        json: json!({ "atlas": atlas.name, "passed": passed, "reports": reports }),
    })
}

/// Parses `re` or `re,im`.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| p.parse::<f64>().map_err(|_| format!("malformed number `{p}` in `{s}`"));
    let z = match parts.as_slice() {
        [re] => Complex64::new(num(re)?, 0.0),
        [re, im] => Complex64::new(num(re)?, num(im)?),
        _ => return Err(format!("expected `re` or `re,im`, got `{s}`")),
    };
    if z.is_finite() {
        Ok(z)
    } else {
        Err(format!("non-finite value `{s}`"))
    }
}

/// Parses `re,im;re,im;...`.
pub fn parse_path(s: &str) -> Result<Vec<Complex64>, String> {
    s.split(';').filter(|p| !p.trim().is_empty()).map(parse_complex).collect()
}

fn fmt_c(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else {
        format!("{}{:+}i", z.re, z.im)
    }
}

fn cmd_integrate(a: &IntegrateArgs) -> Result<Outcome, CliError> {
    let atlas = load_atlas(&a.source)?;
    let usage = CliError::Usage;
    if !(a.rtol > 0.0 && a.atol > 0.0) {
        return Err(usage("tolerances must be positive".into()));
    }
    let mut params = BTreeMap::new();
    for p in &a.params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| usage(format!("parameter `{p}` is not of the form name=value")))?;
        params.insert(k.trim().to_string(), parse_complex(v).map_err(usage)?);
    }
    let sys = compile_atlas(&atlas).map_err(|e| usage(e.to_string()))?;
    for name in sys.param_names() {
        if !params.contains_key(name) {
            return Err(usage(format!("missing --param {name}=VALUE")));
        }
    }
    let chart = sys
        .chart_index(&a.chart)
        .ok_or_else(|| usage(format!("unknown chart `{}`", a.chart)))?;
    let x = parse_complex(&a.x0).map_err(usage)?;
    let y = parse_complex(&a.y0).map_err(usage)?;
    let path = match (&a.path, &a.t1) {
        (Some(p), _) => TPath::new(parse_path(p).map_err(usage)?).map_err(|e| usage(e.to_string()))?,
        (None, Some(t1)) => {
            let t0 = match &a.t0 {
                Some(t) => parse_complex(t).map_err(usage)?,
                None => Complex64::new(0.0, 0.0),
            };
            let t1 = parse_complex(t1).map_err(usage)?;
            if t0 == t1 {
                TPath::stationary(t0)
            } else {
                TPath::segment(t0, t1).map_err(|e| usage(e.to_string()))?
            }
        }
        (None, None) => return Err(usage("give --t1 or --path".into())),
    };
    let init = PhaseState {
        chart,
        x,
        y,
        t: path.start(),
    };
    let opts = IntegrateOptions {
        rtol: a.rtol,
        atol: a.atol,
        max_steps: a.max_steps,
        max_step: a.max_step,
        ..Default::default()
    };
    let traj = integrate(&sys, &params, &path, init, &opts).map_err(math)?;
    if let Some(out) = &a.common.out {
        write_trajectory(&traj, out, a.format).map_err(usage)?;
    }
    let f = traj.final_state();
    let mut text = format!(
        "atlas {}: {} accepted steps, {} rejected, {} chart switches\nfinal t = {}, chart {}, x = {}, y = {}\n",
        traj.atlas,
        traj.accepted,
        traj.rejected,
        traj.switches.len(),
        fmt_c(f.t),
        traj.chart_id(f.chart),
        fmt_c(f.x),
        fmt_c(f.y)
    );
    if let Some(out) = &a.common.out {
        let _ = writeln!(text, "trajectory written to {}", out.display());
    }
    let c = |z: Complex64| json!([z.re, z.im]);
    Ok(Outcome {
        code: EXIT_OK,
        text,
        json: json!({
            "atlas": traj.atlas,
            "accepted": traj.accepted,
            "rejected": traj.rejected,
            "samples": traj.samples.len(),
            "switches": traj.switches.len(),
            "max_switch_residual": traj.max_switch_residual(),
            "final": { "t": c(f.t), "chart": traj.chart_id(f.chart), "x": c(f.x), "y": c(f.y) },
            "out": a.common.out.as_ref().map(|p| p.display().to_string()),
        }),
    })
}

fn write_trajectory(traj: &Trajectory, path: &Path, format: Option<TrajectoryFormat>) -> Result<(), String> {
    let format = format.unwrap_or_else(|| {
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            TrajectoryFormat::Csv
        } else {
            TrajectoryFormat::Json
        }
    });
    let body = match format {
        TrajectoryFormat::Json => traj.to_json(),
        TrajectoryFormat::Csv => traj.to_csv(),
    };
    std::fs::write(path, body).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn verdict_line(c: &Comparison, rhs: &str) -> String {
    match &c.residual {
        None => format!("match: x'' = {rhs}"),
        Some(r) => format!("residual: {r}"),
    }
}

fn cmd_eliminate(a: &EliminateArgs) -> Result<Outcome, CliError> {
    let tag = a.system.to_ascii_uppercase();
    let sys = builtin_system(&tag).map_err(|e| {
        CliError::Usage(format!("{e} (known: {})", painleve_db::SYSTEMS.join(", ")))
    })?;
    let mut text = format!("system {tag}\ntable:      x'' = {}\n", sys.ode.rhs);
    let mut j = json!({ "system": tag, "table": sys.ode.rhs.to_string() });
    let mut code = EXIT_OK;
    if let Some(h) = &sys.hamiltonian {
        let elim = eliminate_y(h, sys.ode.p).map_err(math)?;
        let cmp = painleve_db::compare(&elim, &sys.ode, sys.params.as_ref()).map_err(math)?;
        let h_text = h.h().map_err(math)?.to_string();
        let _ = writeln!(text, "hamiltonian: H = {h_text}");
        let _ = writeln!(text, "eliminated: x'' = {}", elim.rhs);
        let _ = writeln!(text, "{}", verdict_line(&cmp, &elim.rhs.to_string()));
        j["hamiltonian"] = json!(h_text);
        j["eliminated"] = json!(elim.rhs.to_string());
        j["verdict"] = json!(cmp);
        if !cmp.matched {
            code = EXIT_FAILURE;
        }
    } else {
        let _ = writeln!(text, "no polynomial Hamiltonian in the catalog");
    }
    if tag == "III_D8" {
        let atlas = builtin_atlas("D8").map_err(math)?;
        let r = d8_chart0_reduction(&atlas).map_err(math)?;
        let _ = writeln!(text, "chart U0 of atlas D8: x0' = {}, y0' = {}", r.system.dx, r.system.dy);
        let _ = writeln!(text, "eliminating x0:        y0'' = {}", r.scalar.rhs);
        let _ = writeln!(text, "  against printed scalar equation: {}", r.versus_printed.verdict());
        let _ = writeln!(text, "  renaming y0 -> x:                {}", r.relabeled.verdict());
        let _ = writeln!(text, "  x(t) = -8*y0(-t/4):              {}", r.rescaled.verdict());
        j["chart_reduction"] = json!({
            "scalar": r.scalar.rhs.to_string(),
            "versus_printed": r.versus_printed,
            "relabeled": r.relabeled,
            "rescaled": r.rescaled,
        });
        if !(r.versus_printed.matched && r.relabeled.matched) {
            code = EXIT_FAILURE;
        }
    }
    Ok(Outcome { code, text, json: j })
}

fn read_matrix(path: &Path) -> Result<IntersectionMatrix, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    match IntersectionMatrix::from_json(&text) {
        Ok(m) => Ok(m),
        Err(first) => {
            let rows: Vec<Vec<i64>> = serde_json::from_str(&text)
                .map_err(|_| CliError::Usage(format!("{}: {first}", path.display())))?;
            IntersectionMatrix::new(rows).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
        }
    }
}

fn ascii_label(label: &str) -> String {
    match label.strip_suffix('*') {
        Some(base) => format!("{base}~*"),
        None => format!("{label}~"),
    }
}

fn cmd_classify(a: &ClassifyArgs) -> Result<Outcome, CliError> {
    let m = match (&a.file, &a.label) {
        (Some(p), None) => read_matrix(p)?,
        (None, Some(l)) => builtin_matrix(&l.to_ascii_uppercase())
            .map_err(|e| CliError::Usage(e.to_string()))?
            .0,
        _ => return Err(CliError::Usage("give exactly one of --file and --type".into())),
    };
    let k = kernel(&m);
    let Some(c) = classify(&m) else {
        return Ok(Outcome {
            code: EXIT_FAILURE,
            text: format!("not in the catalog (n = {}, rank {}, kernel {:?})\n", m.n, m.rank(), k),
            json: json!({ "type": null, "n": m.n, "rank": m.rank(), "kernel": k }),
        });
    };
    let t = &c.root_type;
    let dim = deformation_dim(t);
    let mut text = format!("{}, Kodaira {}, r={}, dim={}\n", ascii_label(&t.label), t.kodaira, t.r, dim);
    let _ = writeln!(text, "marks: {:?}", t.marks);
    let _ = writeln!(text, "kernel: {k:?}");
    let _ = writeln!(text, "Painlevé equation: {}", t.painleve.as_deref().unwrap_or("none"));
    if !c.aliases.is_empty() {
        let _ = writeln!(text, "same matrix as: {}", c.aliases.iter().map(|l| ascii_label(l)).collect::<Vec<_>>().join(", "));
    }
    Ok(Outcome {
        code: EXIT_OK,
        text,
        json: json!({
            "type": t.label,
            "display": t.display,
            "kodaira": t.kodaira,
            "r": t.r,
            "dim": dim,
            "marks": t.marks,
            "kernel": k,
            "painleve": t.painleve,
            "aliases": c.aliases,
        }),
    })
}

fn cmd_tables() -> Result<Outcome, CliError> {
    let mut text = format!("{:<6} {:<9} {:>2} {:>4}  {:<10} {}\n", "Y", "Kodaira", "r", "dim", "Painlevé", "marks");
    let mut rows = Vec::new();
    for label in builtin_labels() {
        let (_, t) = builtin_matrix(&label).expect("catalog label");
        let dim = deformation_dim(&t);
        let p = t.painleve.clone().unwrap_or_else(|| "none".into());
        let _ = writeln!(
            text,
            "{:<6} {:<9} {:>2} {:>4}  {:<10} {:?}",
            ascii_label(&t.label),
            t.kodaira,
            t.r,
            dim,
            p,
            t.marks
        );
        rows.push(json!({
            "type": t.label,
            "display": t.display,
            "kodaira": t.kodaira,
            "r": t.r,
            "dim": dim,
            "painleve": t.painleve,
            "marks": t.marks,
        }));
    }
    let _ = writeln!(text, "\nR(Y): elliptic A0~; multiplicative A0~*, A1~ .. A8~; additive D4~ .. D8~, E6~, E7~, E8~");
    Ok(Outcome {
        code: EXIT_OK,
        text,
        json: json!(rows),
    })
}
