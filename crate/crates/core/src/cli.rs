//! `sps-lab` command line: solve, sweep, verify, report.
//!
//! Settings are merged as defaults < config file < flags. The config file
//! is `--config`, or else the file named by `SPS_LAB_CONFIG`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::asymptotics::{eps_of_lambda, sweep, SweepOptions, SweepReport};
use crate::error::{Result, SpsError};
use crate::functionals::ProblemParams;
use crate::io::{
    parse_json, parse_sweep_csv, read_solution, solution_to_json, sweep_to_csv, sweep_to_json,
    SweepCsvRow, VERSION,
};
use crate::scf::scf_cross_check;
use crate::solver::{ground_state, verify, GridSpec, Init, Solution, SolverConfig};
use crate::svg::{log_log_chart, Chart};

pub const CONFIG_ENV: &str = "SPS_LAB_CONFIG";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "sps-lab", version, about = "Radial Schrödinger-Poisson-Slater ground states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// JSON config file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Exponent p in (3,6).
    #[arg(long, global = true)]
    p: Option<f64>,
    /// Number of grid nodes [default: 4096].
    #[arg(long = "grid-n", global = true)]
    grid_n: Option<usize>,
    /// Outer radius of the grid [default: 40].
    #[arg(long, global = true)]
    rmax: Option<f64>,
    /// Ratio of outer to inner node spacing; 1 is uniform [default: 1].
    #[arg(long, global = true)]
    stretch: Option<f64>,
    /// Relative residual tolerance [default: 1e-8].
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Iteration cap [default: 200000].
    #[arg(long = "max-iters", global = true)]
    max_iters: Option<usize>,
    /// Output file (solution JSON, sweep CSV or summary text).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Directory for SVG charts.
    #[arg(long, global = true, value_name = "DIR")]
    svg: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ground state for one eps (or lambda).
    Solve {
        /// Mass parameter eps >= 0.
        #[arg(long, conflicts_with = "lambda")]
        eps: Option<f64>,
        /// Coupling lambda > 0, converted to eps.
        #[arg(long)]
        lambda: Option<f64>,
        /// Initial profile: solution JSON or `r,value` CSV.
        #[arg(long, value_name = "FILE")]
        init: Option<PathBuf>,
        /// Also solve by SCF shooting and keep the lower-energy profile.
        #[arg(long)]
        cross_check: bool,
    },
    /// Descending eps sweep ending at 0.
    Sweep {
        /// Descending eps values ending at 0.
        #[arg(long = "eps-list", value_delimiter = ',', conflicts_with = "lambda_list")]
        eps_list: Option<Vec<f64>>,
        /// Ascending lambda values; converted to descending eps with 0 appended.
        #[arg(long = "lambda-list", value_delimiter = ',')]
        lambda_list: Option<Vec<f64>>,
        /// Worker threads; only used with --no-continuation.
        #[arg(long)]
        jobs: Option<usize>,
        /// Start every eps from the default guess instead of the previous solution.
        #[arg(long)]
        no_continuation: bool,
    },
    /// Recompute the residuals of a stored solution.
    Verify { solution: PathBuf },
    /// Charts and a text summary from a sweep CSV.
    Report { csv: PathBuf },
}

/// File form of the run settings. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_list: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmax: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stretch: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub continuation: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub svg: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SpsError::Io(format!("{}: {e}", path.display())))?;
        parse_json(&text, &path.display().to_string())
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(self, top: RunConfig) -> RunConfig {
        RunConfig {
            p: top.p.or(self.p),
            eps: top.eps.or(self.eps),
            lambda: top.lambda.or(self.lambda),
            eps_list: top.eps_list.or(self.eps_list),
            lambda_list: top.lambda_list.or(self.lambda_list),
            grid_n: top.grid_n.or(self.grid_n),
            rmax: top.rmax.or(self.rmax),
            stretch: top.stretch.or(self.stretch),
            tol: top.tol.or(self.tol),
            max_iters: top.max_iters.or(self.max_iters),
            jobs: top.jobs.or(self.jobs),
            continuation: top.continuation.or(self.continuation),
            init: top.init.or(self.init),
            cross_check: top.cross_check.or(self.cross_check),
            out: top.out.or(self.out),
            svg: top.svg.or(self.svg),
        }
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let d = SolverConfig::default();
        let cfg = SolverConfig {
            grid: GridSpec {
                n: self.grid_n.unwrap_or(d.grid.n),
                r_max: self.rmax.unwrap_or(d.grid.r_max),
                stretch: self.stretch.unwrap_or(d.grid.stretch),
            },
            tol_residual: self.tol.unwrap_or(d.tol_residual),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            init: match &self.init {
                Some(path) => Init::FromFile(path.clone()),
                None => d.init,
            },
            descent: d.descent,
        };
        cfg.validate()?;
        cfg.grid.build()?;
        Ok(cfg)
    }

    /// Settings with defaults filled in, as echoed into artifacts. Output
    /// destinations are left out so that artifacts depend only on the
    /// computation.
    pub fn resolved(&self) -> Result<serde_json::Value> {
        let cfg = self.solver_config()?;
        let echo = RunConfig {
            grid_n: Some(cfg.grid.n),
            rmax: Some(cfg.grid.r_max),
            stretch: Some(cfg.grid.stretch),
            tol: Some(cfg.tol_residual),
            max_iters: Some(cfg.max_iters),
            out: None,
            svg: None,
            ..self.clone()
        };
        Ok(serde_json::to_value(echo).expect("plain config"))
    }
}

fn usage(message: impl Into<String>) -> SpsError {
    SpsError::BadConfig(message.into())
}

fn exit_code(err: &SpsError) -> i32 {
    match err {
        SpsError::NotConverged { .. }
        | SpsError::Collapse
        | SpsError::ScfStagnation(_)
        | SpsError::TailUnderflow => EXIT_NOT_CONVERGED,
        _ => EXIT_USAGE,
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code. `env_config` stands in for the `SPS_LAB_CONFIG` variable.
pub fn run<I, T>(args: I, env_config: Option<PathBuf>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli, env_config) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, SpsError::ExponentOutOfRange(_)) {
                eprintln!("valid range: 3 < p < 6");
            }
            exit_code(&e)
        }
    }
}

fn dispatch(cli: Cli, env_config: Option<PathBuf>) -> Result<i32> {
    let c = cli.common;
    let file = match c.config.or(env_config) {
        Some(path) => RunConfig::load(&path)?,
        None => RunConfig::default(),
    };
    let mut flags = RunConfig {
        p: c.p,
        grid_n: c.grid_n,
        rmax: c.rmax,
        stretch: c.stretch,
        tol: c.tol,
        max_iters: c.max_iters,
        out: c.out,
        svg: c.svg,
        ..RunConfig::default()
    };
    match cli.command {
        Command::Solve {
            eps,
            lambda,
            init,
            cross_check,
        } => {
            flags.eps = eps;
            flags.lambda = lambda;
            flags.init = init;
            flags.cross_check = cross_check.then_some(true);
            let mut cfg = file.overlay(flags);
            if eps.is_some() {
                cfg.lambda = None;
            } else if lambda.is_some() {
                cfg.eps = None;
            }
            cmd_solve(&cfg)
        }
        Command::Sweep {
            eps_list,
            lambda_list,
            jobs,
            no_continuation,
        } => {
            flags.eps_list = eps_list.clone();
            flags.lambda_list = lambda_list.clone();
            flags.jobs = jobs;
            flags.continuation = no_continuation.then_some(false);
            let mut cfg = file.overlay(flags);
            if eps_list.is_some() {
                cfg.lambda_list = None;
            } else if lambda_list.is_some() {
                cfg.eps_list = None;
            }
            cmd_sweep(&cfg)
        }
        Command::Verify { solution } => cmd_verify(&solution, &file.overlay(flags)),
        Command::Report { csv } => cmd_report(&csv, &file.overlay(flags)),
    }
}

fn require_p(cfg: &RunConfig) -> Result<f64> {
    let p = cfg.p.ok_or_else(|| usage("--p is required (3 < p < 6)"))?;
    crate::functionals::check_exponent(p)?;
    Ok(p)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text).map_err(|e| SpsError::Io(format!("{}: {e}", path.display())))
}

fn print_solution(sol: &Solution) {
    println!("p         {}", sol.params.p);
    println!("eps       {}", sol.params.eps);
    if let Some(l) = sol.params.lambda {
        println!("lambda    {l}");
    }
    println!("m         {:.12}", sol.m);
    println!("nehari    {:.3e}", sol.residuals.nehari);
    println!("pohozaev  {:.3e}", sol.residuals.pohozaev);
    println!("ode_sup   {:.3e}", sol.residuals.ode_sup);
    println!("iters     {}", sol.iters);
    println!("converged {}", sol.converged);
}

fn cmd_solve(cfg: &RunConfig) -> Result<i32> {
    let p = require_p(cfg)?;
    let params = match (cfg.eps, cfg.lambda) {
        (Some(eps), None) => ProblemParams::new(p, eps)?,
        (None, Some(lambda)) => ProblemParams::from_lambda(p, lambda)?,
        _ => return Err(usage("give exactly one of --eps (>= 0) or --lambda (> 0)")),
    };
    let solver = cfg.solver_config()?;
    let echo = cfg.resolved()?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("solution.json"));
    let (mut sol, converged) = match ground_state(&params, &solver) {
        Ok(mut s) => {
            s.converged = true;
            (s, true)
        }
        Err(SpsError::NotConverged { best, .. }) => (*best, false),
        Err(e) => return Err(e),
    };
    if converged && cfg.cross_check == Some(true) {
        match scf_cross_check(&params, &solver) {
            Ok(other) => {
                let dist = other.u.sub(&sol.u)?.sup_norm() / sol.u.sup_norm();
                eprintln!(
                    "cross-check: scf m = {:.12}, descent m = {:.12}, sup distance {dist:.3e}",
                    other.m, sol.m
                );
                if other.m < sol.m && verify(&other, solver.tol_residual).pass {
                    eprintln!("cross-check: keeping the scf profile");
                    sol = other;
                }
            }
            Err(e) => eprintln!("cross-check failed: {e}"),
        }
    }
    write_file(&out, &solution_to_json(&sol, Some(echo)))?;
    print_solution(&sol);
    if converged {
        Ok(EXIT_OK)
    } else {
        eprintln!("not converged; best iterate written to {}", out.display());
        Ok(EXIT_NOT_CONVERGED)
    }
}

/// Ascending lambdas to descending eps, with the limit `eps = 0` appended.
pub fn eps_list_from_lambdas(p: f64, lambdas: &[f64]) -> Result<Vec<f64>> {
    if lambdas.is_empty() {
        return Err(SpsError::BadLambdaList("empty".into()));
    }
    if lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SpsError::BadLambdaList("entries must strictly increase".into()));
    }
    let mut eps = lambdas
        .iter()
        .map(|&l| eps_of_lambda(l, p))
        .collect::<Result<Vec<_>>>()?;
    eps.push(0.0);
    Ok(eps)
}

fn companion_json(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn cmd_sweep(cfg: &RunConfig) -> Result<i32> {
    let p = require_p(cfg)?;
    let eps_list = match (&cfg.eps_list, &cfg.lambda_list) {
        (Some(e), None) => e.clone(),
        (None, Some(l)) => eps_list_from_lambdas(p, l)?,
        _ => return Err(usage("give exactly one of --eps-list or --lambda-list")),
    };
    crate::asymptotics::check_eps_list(&eps_list)?;
    let solver = cfg.solver_config()?;
    let echo = cfg.resolved()?;
    let continuation = cfg.continuation.unwrap_or(true);
    let jobs = cfg.jobs.unwrap_or(1).max(1);
    if continuation && jobs > 1 {
        eprintln!("note: --jobs is ignored unless --no-continuation is given");
    }
    let report = sweep(p, &eps_list, &solver, SweepOptions { continuation, jobs })?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("sweep.csv"));
    write_file(&out, &sweep_to_csv(&report))?;
    write_file(&companion_json(&out), &sweep_to_json(&report, Some(echo)))?;
    let rows: Vec<SweepCsvRow> = parse_sweep_csv(&sweep_to_csv(&report), "sweep")?;
    if let Some(dir) = &cfg.svg {
        write_charts(dir, &rows)?;
    }
    print!("{}", summary(&rows, Some(&digest(&report))));
    if report.partial {
        eprintln!("some rows did not converge");
        return Ok(EXIT_NOT_CONVERGED);
    }
    if !report.flags.all() {
        eprintln!("sweep invariants violated: {:?}", report.flags);
        return Ok(EXIT_VERIFY);
    }
    Ok(EXIT_OK)
}

fn cmd_verify(path: &Path, cfg: &RunConfig) -> Result<i32> {
    let sol = read_solution(path)?;
    let tol = cfg.tol.unwrap_or(SolverConfig::default().tol_residual);
    let r = verify(&sol, tol);
    println!("residual            value       tol {tol:.1e}");
    for (name, v) in [
        ("nehari", r.nehari),
        ("pohozaev_identity", r.pohozaev_identity),
        ("pohozaev_manifold", r.pohozaev_manifold),
        ("ode_sup", r.ode_sup),
    ] {
        let mark = if v.abs() <= tol { "ok" } else { "FAIL" };
        println!("{name:<19} {v:>11.3e} {mark}");
    }
    if r.empty {
        println!("identity violated: profile is identically zero");
        return Ok(EXIT_VERIFY);
    }
    if !r.pass {
        println!("identity violated");
        return Ok(EXIT_VERIFY);
    }
    println!("all identities hold");
    Ok(EXIT_OK)
}

/// Headline numbers from the companion JSON.
#[derive(Debug, Clone, Deserialize)]
struct SweepDigest {
    m_inf: f64,
    slope: Option<f64>,
    eta: f64,
    pass: bool,
    partial: bool,
}

fn digest(report: &SweepReport) -> SweepDigest {
    SweepDigest {
        m_inf: report.m_inf,
        slope: report.slope,
        eta: report.eta,
        pass: report.flags.all(),
        partial: report.partial,
    }
}

fn write_charts(dir: &Path, rows: &[SweepCsvRow]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let gap: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, r.gap)).collect();
    let dist: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, r.e_dist)).collect();
    write_file(
        &dir.join("gap_vs_eps.svg"),
        &log_log_chart(&Chart {
            title: "energy gap m_eps - m_inf",
            x_label: "eps",
            y_label: "gap",
            points: &gap,
        }),
    )?;
    write_file(
        &dir.join("e_dist_vs_eps.svg"),
        &log_log_chart(&Chart {
            title: "E-distance to the zero-mass ground state",
            x_label: "eps",
            y_label: "e_dist",
            points: &dist,
        }),
    )
}

fn summary(rows: &[SweepCsvRow], digest: Option<&SweepDigest>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{VERSION}");
    if let Some(d) = digest {
        let _ = writeln!(s, "m_inf   {:.12}", d.m_inf);
        match d.slope {
            Some(k) => {
                let _ = writeln!(s, "slope   {k:.4} (log gap vs log eps, three smallest eps)");
            }
            None => {
                let _ = writeln!(s, "slope   n/a");
            }
        }
        let _ = writeln!(s, "eta     {:.6}", d.eta);
        let _ = writeln!(s, "pass    {}", d.pass && !d.partial);
    }
    let _ = writeln!(
        s,
        "{:>10} {:>14} {:>12} {:>12} {:>12} {:>12} {:>10}",
        "eps", "m_eps", "gap", "eps*B", "1-t_proj", "e_dist", "decay"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:>10.4e} {:>14.9} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>10.4}",
            r.eps,
            r.m_eps,
            r.gap,
            r.eps_times_b,
            1.0 - r.t_proj,
            r.e_dist,
            r.decay_rate
        );
    }
    let pos: Vec<&SweepCsvRow> = rows.iter().filter(|r| r.eps > 0.0).collect();
    if let (Some(first), Some(last)) = (pos.first(), pos.last()) {
        let _ = writeln!(
            s,
            "gap      {:.4e} -> {:.4e}  (all positive: {})",
            first.gap,
            last.gap,
            pos.iter().all(|r| r.gap > 0.0)
        );
        let _ = writeln!(
            s,
            "eps*B    {:.4e} -> {:.4e}  (ratio {:.3e})",
            first.eps_times_b,
            last.eps_times_b,
            last.eps_times_b / first.eps_times_b
        );
        let _ = writeln!(
            s,
            "t_proj   {:.6} -> {:.6}",
            first.t_proj, last.t_proj
        );
        let _ = writeln!(s, "e_dist   {:.4e} -> {:.4e}", first.e_dist, last.e_dist);
    }
    s
}

fn cmd_report(csv: &Path, cfg: &RunConfig) -> Result<i32> {
    let text = std::fs::read_to_string(csv)
        .map_err(|e| SpsError::Io(format!("{}: {e}", csv.display())))?;
    let rows = parse_sweep_csv(&text, &csv.display().to_string())?;
    let json = companion_json(csv);
    let digest = if json.exists() {
        let text = std::fs::read_to_string(&json)?;
        Some(parse_json::<SweepDigest>(&text, &json.display().to_string())?)
    } else {
        None
    };
    let dir = cfg.svg.clone().unwrap_or_else(|| {
        csv.parent()
            .filter(|d| !d.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    });
    write_charts(&dir, &rows)?;
    let text = summary(&rows, digest.as_ref());
    let out = cfg.out.clone().unwrap_or_else(|| dir.join("summary.txt"));
    write_file(&out, &text)?;
    print!("{text}");
    Ok(EXIT_OK)
}
