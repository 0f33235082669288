//! Command-line frontend. Exit codes: 0 success, 2 usage or input error,
//! 3 solver did not converge.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{DifferentialSpec, GroupSection, RunConfig, SurfaceKind, SurfaceSection};
use crate::error::{Error, Result};
use crate::higgs::{fiducial_metric, hopf_constant};
use crate::lie::{construct_principal_sl2, invariant_table};
use crate::pipeline::{self, analyze, flatness_sweep, write_analysis, write_run, write_sweep_csv};
use crate::solver::{Method, SolveStatus};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Largest residual accepted by `lie-check`.
pub const LIE_TOL: f64 = 1e-12;

#[derive(Parser, Debug)]
#[command(name = "higgslab", version, about = "Harmonic metrics, minimal surfaces and entropy bounds for Hitchin-section Higgs fields")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the principal sl(2) invariant residuals for rank n.
    LieCheck {
        #[arg(long, short)]
        n: usize,
    },
    /// Solve a configured run and write snapshots and reports.
    Solve {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Recompute geometry and entropy from a stored run directory.
    Report {
        dir: PathBuf,
        /// Override the form scale of the stored configuration.
        #[arg(long)]
        kappa: Option<f64>,
        /// Write the full analysis here instead of printing the JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the flatness sweep over the configured multipliers.
    Sweep {
        config: PathBuf,
        /// Multipliers, overriding `sweep.t_values`.
        #[arg(long, value_delimiter = ',')]
        t: Option<Vec<f64>>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print closed-form data of the constant cyclic solution on the torus.
    Oracle {
        #[arg(long, short)]
        n: usize,
        /// Value of the constant top differential.
        #[arg(long, short, allow_hyphen_values = true)]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
    },
}

/// Flags that take precedence over the config file.
#[derive(Args, Debug, Default)]
pub struct Overrides {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    #[arg(long)]
    pub kappa: Option<f64>,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    match s {
        "relax" => Ok(Method::Relax),
        "newton" => Ok(Method::Newton),
        "auto" => Ok(Method::Auto),
        _ => Err(format!("unknown method {s:?}; expected relax, newton or auto")),
    }
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(v) = self.tol {
            cfg.solver.tol = v;
        }
        if let Some(v) = self.max_iter {
            cfg.solver.max_iter = v;
        }
        if let Some(v) = self.method {
            cfg.solver.method = v;
        }
        if let Some(v) = self.kappa {
            cfg.metric.kappa = v;
        }
        if let Some(v) = &self.out {
            cfg.output.dir = v.clone();
        }
        // Round-trip so overridden values pass the same validation as file values.
        *cfg = RunConfig::parse(&cfg.to_toml())?;
        Ok(())
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I, out: &mut (dyn std::io::Write + Send), err: &mut (dyn std::io::Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if code == EXIT_OK { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    let result = match cli.threads {
        Some(t) => pipeline::with_threads(t, || dispatch(&cli.command, out)).and_then(|r| r),
        None => dispatch(&cli.command, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn dispatch(cmd: &Command, out: &mut (dyn std::io::Write + Send)) -> Result<i32> {
    match cmd {
        Command::LieCheck { n } => cmd_lie_check(*n, out),
        Command::Solve { config, overrides } => cmd_solve(config, overrides, out),
        Command::Report { dir, kappa, out: dest } => cmd_report(dir, *kappa, dest.as_deref(), out),
        Command::Sweep { config, t, overrides } => cmd_sweep(config, t.as_deref(), overrides, out),
        Command::Oracle { n, c, kappa } => cmd_oracle(*n, *c, *kappa, out),
    }
}

pub fn cmd_lie_check(n: usize, out: &mut (dyn std::io::Write + Send)) -> Result<i32> {
    let basis = construct_principal_sl2(n)?;
    let rows = invariant_table(&basis, LIE_TOL);
    writeln!(out, "{:<40} {:>12}  status", format!("invariant (n = {n})"), "value")?;
    for r in &rows {
        writeln!(out, "{:<40} {:>12.3e}  {}", r.name, r.value, if r.ok { "ok" } else { "FAIL" })?;
    }
    Ok(if rows.iter().all(|r| r.ok) { EXIT_OK } else { EXIT_SOLVER })
}

fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    overrides.apply(&mut cfg)?;
    Ok(cfg)
}

pub fn cmd_solve(config: &Path, overrides: &Overrides, out: &mut (dyn std::io::Write + Send)) -> Result<i32> {
    let cfg = load_config(config, overrides)?;
    let run = pipeline::run(&cfg)?;
    let dir = cfg.output.dir.clone();
    write_run(&dir, &run)?;
    let o = &run.outcome;
    writeln!(
        out,
        "status {:?} after {} iterations ({} Newton), residual sup {:.3e}, path {}",
        o.status, o.iterations, o.newton_steps, o.residual_sup, o.path
    )?;
    if let Some(m) = &o.message {
        writeln!(out, "{m}")?;
    }
    if let Some(a) = &run.analysis {
        let g = &a.report.geometry;
        writeln!(out, "min detg {:.6e}, branch points {}", g.detg.min, g.branch_points.len())?;
        match (&a.report.entropy, &a.report.entropy_error) {
            (Some(e), _) => writeln!(out, "{:?} {:.12e} over volume {:.6e}", e.kind, e.bound, e.volume)?,
            (None, Some(msg)) => writeln!(out, "entropy bound unavailable: {msg}")?,
            _ => {}
        }
    }
    writeln!(out, "wrote {}", dir.display())?;
    Ok(if o.status == SolveStatus::Converged { EXIT_OK } else { EXIT_SOLVER })
}

pub fn cmd_report(dir: &Path, kappa: Option<f64>, dest: Option<&Path>, out: &mut (dyn std::io::Write + Send)) -> Result<i32> {
    let analysis = pipeline::reanalyze(dir, kappa)?;
    match dest {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            write_analysis(d, &analysis)?;
            writeln!(out, "wrote {}", d.display())?;
        }
        None => out.write_all(analysis.report.to_json().as_bytes())?,
    }
    Ok(EXIT_OK)
}

pub fn cmd_sweep(config: &Path, t: Option<&[f64]>, overrides: &Overrides, out: &mut (dyn std::io::Write + Send)) -> Result<i32> {
    let cfg = load_config(config, overrides)?;
    let (ts, window) = match (&cfg.sweep, t) {
        (_, Some(t)) => (t.to_vec(), cfg.sweep.as_ref().map_or(0.5, |s| s.window)),
        (Some(s), None) => (s.t_values.clone(), s.window),
        (None, None) => return Err(Error::Config("no sweep.t_values in config and no --t given".into())),
    };
    let rows = flatness_sweep(&cfg, &ts, window)?;
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(pipeline::CONFIG_FILE), pipeline::config_echo(&cfg))?;
    write_sweep_csv(&dir.join("sweep.csv"), &rows)?;
    #[derive(Serialize)]
    struct SweepFile<'a> {
        format: &'static str,
        version: u32,
        window: f64,
        rows: &'a [pipeline::SweepRow],
    }
    let json = serde_json::to_string_pretty(&SweepFile {
        format: pipeline::SWEEP_FORMAT,
        version: pipeline::FORMAT_VERSION,
        window,
        rows: &rows,
    })?;
    std::fs::write(dir.join("sweep.json"), json + "\n")?;
    for r in &rows {
        writeln!(
            out,
            "t = {:<8} {:<10} mean|K| {:.6e}  sup|K| {:.6e}  mean|B|^2 {:.6e}",
            r.t, r.status, r.mean_abs_k, r.sup_abs_k, r.mean_b_norm_sq
        )?;
    }
    writeln!(out, "wrote {}", dir.display())?;
    Ok(if rows.iter().all(|r| r.ok()) { EXIT_OK } else { EXIT_SOLVER })
}

#[derive(Serialize)]
struct OracleData {
    n: usize,
    c: f64,
    kappa: f64,
    /// `H = diag(e^{2 u_j})`.
    u: Vec<f64>,
    h_diagonal: Vec<f64>,
    hopf_constant: f64,
    residual_sup: f64,
    g11: f64,
    g12: f64,
    g22: f64,
    detg: f64,
    k_induced: Option<f64>,
    sec_ambient: Option<f64>,
    energy_density: f64,
}

/// Closed-form constant solution for `alpha_{n-1} = c`, checked on a small torus.
pub fn cmd_oracle(n: usize, c: f64, kappa: f64, out: &mut (dyn std::io::Write + Send)) -> Result<i32> {
    let cfg = RunConfig {
        group: GroupSection { n },
        surface: SurfaceSection {
            kind: SurfaceKind::Torus,
            resolution: 16,
            tau: None,
            half_width: None,
        },
        differentials: vec![DifferentialSpec {
            k: n.saturating_sub(1),
            constant: Some(Complex64::new(c, 0.0)),
            polynomial: None,
            fourier: None,
        }],
        solver: Default::default(),
        metric: crate::config::MetricSection { kappa },
        output: Default::default(),
        sweep: None,
    };
    let cfg = RunConfig::parse(&cfg.to_toml())?;
    let phi = cfg.higgs()?;
    let fid = fiducial_metric(&phi);
    if !fid.defined {
        return Err(Error::Precondition("c = 0 is the Fuchsian point; no constant solution exists".into()));
    }
    let a = analyze(&phi, &fid.metric, kappa)?;
    let g = &a.geometry;
    let node = 0;
    let u: Vec<f64> = match &fid.metric {
        crate::solver::HermitianMetricField::Diagonal(u) => u.iter().map(|f| f.values[node]).collect(),
        other => (0..n).map(|j| other.log_matrices().values[node][(j, j)].re / 2.0).collect(),
    };
    let pick = |f: &crate::domain::RealField| g.evaluated.contains(&node).then(|| f.values[node]);
    let data = OracleData {
        n,
        c,
        kappa,
        h_diagonal: u.iter().map(|v| (2.0 * v).exp()).collect(),
        u,
        hopf_constant: hopf_constant(&phi.basis),
        residual_sup: a.report.residual.sup,
        g11: g.g11.values[node],
        g12: g.g12.values[node],
        g22: g.g22.values[node],
        detg: g.detg.values[node],
        k_induced: pick(&g.k_induced),
        sec_ambient: pick(&g.sec_ambient),
        energy_density: g.energy_density.values[node],
    };
    writeln!(out, "{}", serde_json::to_string_pretty(&data)?)?;
    Ok(EXIT_OK)
}
