//! Build, solve, analyse and persist one configured run.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::domain::{snapshot, DiffOps, SurfaceDomain};
use crate::entropy::{entropy_for_run, mean_abs, EntropyReport};
use crate::error::{Error, Result};
use crate::geometry::{build_geometry, GeometryReport, GeometrySummary};
use crate::higgs::HiggsField;
use crate::solver::{
    assemble_flat_connection, residual, solve_harmonic_metric, HermitianMetricField, SolveOutcome, SolveStatus,
};

pub const REPORT_FORMAT: &str = "higgslab-report";
pub const SOLVE_FORMAT: &str = "higgslab-solve";
pub const TIMING_FORMAT: &str = "higgslab-timing";
pub const SWEEP_FORMAT: &str = "higgslab-sweep";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub sup: f64,
    pub l2: f64,
    pub trace_defect: f64,
    pub self_adjointness_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatSummary {
    pub curvature_sup: f64,
    pub residual_sup: f64,
}

/// Everything derived from a solved `(phi, H)` pair; no solver state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format: String,
    pub version: u32,
    pub n: usize,
    pub kappa: f64,
    pub domain: SurfaceDomain,
    pub residual: ResidualSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flat_connection: Option<FlatSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flat_connection_error: Option<String>,
    pub geometry: GeometrySummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy: Option<EntropyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy_error: Option<String>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

#[derive(Clone, Debug)]
pub struct Analysis {
    pub geometry: GeometryReport,
    pub report: Report,
}

/// Geometry, entropy and flat-connection diagnostics of a metric.
pub fn analyze(phi: &HiggsField, h: &HermitianMetricField, kappa: f64) -> Result<Analysis> {
    let d = phi.domain();
    let ops = DiffOps::new(&d)?;
    let res = residual(h, phi, &ops)?;
    let residual = ResidualSummary {
        sup: res.sup,
        l2: res.l2,
        trace_defect: res.trace_defect(),
        self_adjointness_defect: res.self_adjointness_defect(h)?,
    };
    let (flat_connection, flat_connection_error) = match assemble_flat_connection(h, phi, &ops) {
        Ok(f) => (
            Some(FlatSummary {
                curvature_sup: f.curvature_sup,
                residual_sup: f.residual_sup,
            }),
            None,
        ),
        Err(e) => (None, Some(e.to_string())),
    };
    let geometry = build_geometry(phi, h, kappa, &ops)?;
    let (entropy, entropy_error) = match entropy_for_run(&geometry) {
        Ok(e) => (Some(e), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = Report {
        format: REPORT_FORMAT.into(),
        version: FORMAT_VERSION,
        n: phi.n(),
        kappa,
        domain: d,
        residual,
        flat_connection,
        flat_connection_error,
        geometry: geometry.summary(),
        entropy,
        entropy_error,
    };
    Ok(Analysis { geometry, report })
}

/// A finished run; `analysis` is present only when the solve converged.
#[derive(Clone, Debug)]
pub struct Run {
    pub config: RunConfig,
    pub phi: HiggsField,
    pub metric: HermitianMetricField,
    pub outcome: SolveOutcome,
    pub analysis: Option<Analysis>,
}

impl Run {
    pub fn converged(&self) -> bool {
        self.outcome.status == SolveStatus::Converged
    }
}

pub fn run(config: &RunConfig) -> Result<Run> {
    let phi = config.higgs()?;
    let init = config.initial_metric(&phi)?;
    let (metric, outcome) = solve_harmonic_metric(&phi, &init, &config.solver.params())?;
    let analysis = if outcome.status == SolveStatus::Converged {
        Some(analyze(&phi, &metric, config.metric.kappa)?)
    } else {
        None
    };
    Ok(Run {
        config: config.clone(),
        phi,
        metric,
        outcome,
        analysis,
    })
}

#[derive(Serialize)]
struct SolveFile<'a> {
    format: &'static str,
    version: u32,
    #[serde(flatten)]
    outcome: &'a SolveOutcome,
}

#[derive(Serialize)]
struct TimingFile {
    format: &'static str,
    version: u32,
    wall_time_s: f64,
    threads: usize,
}

pub const CONFIG_FILE: &str = "config.toml";
pub const PHI_FILE: &str = "phi.fld";
pub const METRIC_FILE: &str = "metric.fld";
pub const REPORT_FILE: &str = "report.json";

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

pub fn config_echo(config: &RunConfig) -> String {
    format!("# format = higgslab-config v{FORMAT_VERSION}\n{}", config.to_toml())
}

pub fn write_metric(path: &Path, h: &HermitianMetricField) -> Result<()> {
    match h {
        HermitianMetricField::Diagonal(u) => snapshot::write_components(path, u, Some("u")),
        HermitianMetricField::Full(s) => snapshot::write_matrix(path, s, Some("log_metric")),
    }
}

/// Inverse of [`write_metric`], bit-exact (no re-projection).
pub fn read_metric(path: &Path) -> Result<HermitianMetricField> {
    let snap = snapshot::read(path)?;
    match snap.header.value_kind {
        snapshot::ValueKind::Vector => Ok(HermitianMetricField::Diagonal(snap.into_components()?)),
        snapshot::ValueKind::Matrix => Ok(HermitianMetricField::Full(snap.into_matrix()?)),
        other => Err(Error::Snapshot(format!(
            "{}: metric snapshot has {other:?} values",
            path.display()
        ))),
    }
}

/// Writes the report, its CSV and the per-node geometry snapshots.
pub fn write_analysis(dir: &Path, analysis: &Analysis) -> Result<()> {
    let g = &analysis.geometry;
    write_text(&dir.join(REPORT_FILE), &analysis.report.to_json())?;
    g.write_csv(&dir.join("geometry.csv"))?;
    snapshot::write_real(&dir.join("K.fld"), &g.k_induced, Some("K"))?;
    snapshot::write_real(&dir.join("Sec.fld"), &g.sec_ambient, Some("Sec"))?;
    snapshot::write_real(&dir.join("detg.fld"), &g.detg, Some("detg"))?;
    snapshot::write_real(&dir.join("energy.fld"), &g.energy_density, Some("energy"))?;
    snapshot::write_scalar(&dir.join("hopf.fld"), &g.hopf, Some("hopf"))?;
    if let Some(b) = &g.b_norm_sq {
        snapshot::write_real(&dir.join("Bnormsq.fld"), b, Some("Bnormsq"))?;
    }
    Ok(())
}

/// Persists a run into `dir`.
pub fn write_run(dir: &Path, run: &Run) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_text(&dir.join(CONFIG_FILE), &config_echo(&run.config))?;
    let solve = SolveFile {
        format: SOLVE_FORMAT,
        version: FORMAT_VERSION,
        outcome: &run.outcome,
    };
    write_text(&dir.join("solve.json"), &(serde_json::to_string_pretty(&solve)? + "\n"))?;
    let timing = TimingFile {
        format: TIMING_FORMAT,
        version: FORMAT_VERSION,
        wall_time_s: run.outcome.wall_time_s,
        threads: rayon::current_num_threads(),
    };
    write_text(&dir.join("timing.json"), &(serde_json::to_string_pretty(&timing)? + "\n"))?;
    snapshot::write_matrix(&dir.join(PHI_FILE), &run.phi.phi, Some("phi"))?;
    write_metric(&dir.join(METRIC_FILE), &run.metric)?;
    if let Some(a) = &run.analysis {
        write_analysis(dir, a)?;
    }
    Ok(())
}

/// Recomputes the analysis of a stored run without solving.
///
/// The stored Higgs field must match the one rebuilt from the echoed config
/// bit for bit; `kappa` overrides the configured form scale.
pub fn reanalyze(dir: &Path, kappa: Option<f64>) -> Result<Analysis> {
    let config = RunConfig::load(&dir.join(CONFIG_FILE))?;
    let phi = config.higgs()?;
    let stored = snapshot::read(&dir.join(PHI_FILE))?.into_matrix()?;
    if stored != phi.phi {
        return Err(Error::Snapshot(format!(
            "{} does not match the field built from {}",
            dir.join(PHI_FILE).display(),
            CONFIG_FILE
        )));
    }
    let metric = read_metric(&dir.join(METRIC_FILE))?;
    if metric.domain() != phi.domain() || metric.dim() != phi.n() {
        return Err(Error::Snapshot(format!(
            "metric snapshot is {0}x{0} on {1} nodes, the field is {2}x{2} on {3}",
            metric.dim(),
            metric.domain().node_count(),
            phi.n(),
            phi.domain().node_count()
        )));
    }
    let kappa = kappa.unwrap_or(config.metric.kappa);
    if !(kappa > 0.0) {
        return Err(Error::Config(format!("kappa must be positive, got {kappa}")));
    }
    analyze(&phi, &metric, kappa)
}

/// One row of a flatness sweep. Numbers are `NaN` when the member failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t: f64,
    pub status: String,
    pub iterations: usize,
    pub residual_sup: f64,
    pub window_nodes: usize,
    pub mean_abs_k: f64,
    pub sup_abs_k: f64,
    pub mean_b_norm_sq: f64,
    pub sup_b_norm_sq: f64,
    /// `dV`-weighted window mean of `sqrt(-K)`.
    pub integrand_mean: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl SweepRow {
    fn failed(t: f64, status: String, message: String) -> Self {
        Self {
            t,
            status,
            iterations: 0,
            residual_sup: f64::NAN,
            window_nodes: 0,
            mean_abs_k: f64::NAN,
            sup_abs_k: f64::NAN,
            mean_b_norm_sq: f64::NAN,
            sup_b_norm_sq: f64::NAN,
            integrand_mean: f64::NAN,
            message: Some(message),
        }
    }

    pub fn ok(&self) -> bool {
        self.status == "converged" && self.message.is_none()
    }
}

/// `base` with its top differential multiplied by `t`.
pub fn scale_top_differential(base: &RunConfig, t: f64) -> Result<RunConfig> {
    let top = base.group.n - 1;
    let mut cfg = base.clone();
    let spec = cfg
        .differentials
        .iter_mut()
        .find(|d| d.k == top)
        .ok_or_else(|| Error::Precondition(format!("the sweep scales alpha_{top}, which is not configured")))?;
    let z = num_complex::Complex64::new(t, 0.0);
    if let Some(c) = &mut spec.constant {
        *c *= z;
    }
    if let Some(p) = &mut spec.polynomial {
        p.iter_mut().for_each(|c| *c *= z);
    }
    if let Some(f) = &mut spec.fourier {
        f.iter_mut().for_each(|m| m.coeff *= z);
    }
    Ok(cfg)
}

fn sweep_member(base: &RunConfig, t: f64, window: f64) -> Result<SweepRow> {
    let cfg = scale_top_differential(base, t)?;
    let r = run(&cfg)?;
    let status = serde_json::to_value(r.outcome.status)?
        .as_str()
        .unwrap_or_default()
        .to_string();
    let Some(a) = &r.analysis else {
        let msg = r.outcome.message.clone().unwrap_or_else(|| "solve did not converge".into());
        let mut row = SweepRow::failed(t, status, msg);
        row.iterations = r.outcome.iterations;
        row.residual_sup = r.outcome.residual_sup;
        return Ok(row);
    };
    let g = &a.geometry;
    let d = g.domain();
    let nodes: Vec<usize> = d
        .window_nodes(window)
        .into_iter()
        .filter(|i| g.evaluated.binary_search(i).is_ok())
        .collect();
    let sup_abs = |f: &crate::domain::RealField| nodes.iter().map(|i| f.values[*i].abs()).fold(0.0, f64::max);
    let (mean_b, sup_b) = match &g.b_norm_sq {
        Some(b) => (mean_abs(b, &nodes), sup_abs(b)),
        None => (f64::NAN, f64::NAN),
    };
    let (integrand_mean, message) =
        match crate::entropy::manning_bound_over(&g.k_induced, &g.area_density(), &nodes) {
            Ok(e) => (e.bound, None),
            Err(e) => (f64::NAN, Some(e.to_string())),
        };
    Ok(SweepRow {
        t,
        status,
        iterations: r.outcome.iterations,
        residual_sup: r.outcome.residual_sup,
        window_nodes: nodes.len(),
        mean_abs_k: mean_abs(&g.k_induced, &nodes),
        sup_abs_k: sup_abs(&g.k_induced),
        mean_b_norm_sq: mean_b,
        sup_b_norm_sq: sup_b,
        integrand_mean,
        message,
    })
}

/// Solves `t * alpha_{n-1}` for each `t` (in parallel) and tabulates window
/// statistics of `|K|` and `|B|^2`. Rows keep the order of `ts`; a failing
/// member yields a marked row instead of an error.
pub fn flatness_sweep(base: &RunConfig, ts: &[f64], window: f64) -> Result<Vec<SweepRow>> {
    scale_top_differential(base, 1.0)?;
    Ok(ts
        .par_iter()
        .map(|&t| {
            sweep_member(base, t, window).unwrap_or_else(|e| SweepRow::failed(t, "error".into(), e.to_string()))
        })
        .collect())
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# format = {SWEEP_FORMAT} v{FORMAT_VERSION}")?;
    writeln!(
        out,
        "t,status,iterations,residual_sup,window_nodes,mean_abs_K,sup_abs_K,mean_Bnormsq,sup_Bnormsq,integrand_mean"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.12e},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            r.t,
            r.status,
            r.iterations,
            r.residual_sup,
            r.window_nodes,
            r.mean_abs_k,
            r.sup_abs_k,
            r.mean_b_norm_sq,
            r.sup_b_norm_sq,
            r.integrand_mean
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} threads: {e}")))?;
    Ok(pool.install(f))
}

/// Output directory: the override if given, else the configured one.
pub fn output_dir(config: &RunConfig, override_dir: Option<&Path>) -> PathBuf {
    override_dir.map_or_else(|| config.output.dir.clone(), Path::to_path_buf)
}
