//! Task dispatch: turns a validated config into CSV artifacts and a
//! registry line.
//!
//! Every run gets a content-addressed id and writes its artifacts under
//! `<out>/<run-id>/`, so re-running the same config lands on the same
//! paths with the same bytes. The registry (`<out>/registry.jsonl`) is
//! append only; it records the id, a config snapshot, artifact paths,
//! and headline numbers. Timestamps live only in the registry, never in
//! artifacts, to keep the artifacts byte-stable.
//!
//! Failures map onto three operator-visible classes: bad configuration,
//! blown enumeration budget, and I/O. Anything else is an internal
//! error and means a bug here, not in the experiment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    self, fit_exponent, moments_from_dist, moments_from_series, re_ledger, variance_profile,
    AnalysisError, MomentReport,
};
use crate::config::{ConfigError, ExperimentConfig, ProposalKind, SweepSpec, TaskKind};
use crate::exact::{self, ExactError};
use crate::kernel::{CouplingKernel, KernelError};
use crate::model::{BoundaryRule, ModelError, ModelParams, Window};
use crate::sampler::{run_chain, Observable, ProposalLaw, SamplerError, Schedule};

#[derive(Debug, Error)]
pub enum TaskError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("enumeration budget exceeded: {0}")]
    Budget(String),
    #[error("I/O failure: {0}")]
    Io(#[from] io::Error),
    #[error("internal failure: {0}")]
    Internal(String),
}

impl TaskError {
    /// Process exit code for the CLI: 2 config, 3 budget, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            TaskError::Config(_) => 2,
            TaskError::Budget(_) => 3,
            TaskError::Io(_) => 4,
            TaskError::Internal(_) => 1,
        }
    }

    fn invalid(msg: String) -> Self {
        TaskError::Config(ConfigError::Invalid {
            violations: vec![msg],
        })
    }
}

impl From<ExactError> for TaskError {
    fn from(e: ExactError) -> Self {
        match e {
            ExactError::BudgetExceeded { .. } => TaskError::Budget(e.to_string()),
            ExactError::Model(m) => m.into(),
            ExactError::KmaxZero => TaskError::invalid(e.to_string()),
            other => TaskError::Internal(other.to_string()),
        }
    }
}

impl From<ModelError> for TaskError {
    fn from(e: ModelError) -> Self {
        TaskError::invalid(e.to_string())
    }
}

impl From<KernelError> for TaskError {
    fn from(e: KernelError) -> Self {
        TaskError::invalid(e.to_string())
    }
}

impl From<SamplerError> for TaskError {
    fn from(e: SamplerError) -> Self {
        TaskError::invalid(e.to_string())
    }
}

impl From<AnalysisError> for TaskError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Exact(x) => x.into(),
            AnalysisError::Model(m) => m.into(),
            AnalysisError::Kernel(k) => k.into(),
            AnalysisError::Sampler(s) => s.into(),
            AnalysisError::TooFewPoints(_)
            | AnalysisError::NonpositiveValue(_)
            | AnalysisError::BadSizes
            | AnalysisError::BadConstant(_) => TaskError::invalid(e.to_string()),
            other => TaskError::Internal(other.to_string()),
        }
    }
}

/// One registry line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub run_id: String,
    pub task: TaskKind,
    pub timestamp_unix: u64,
    pub config: ExperimentConfig,
    /// Artifact paths relative to the output directory.
    pub artifacts: Vec<String>,
    pub summary: BTreeMap<String, f64>,
}

/// Everything a finished run leaves behind.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub entry: RegistryEntry,
    pub out_dir: PathBuf,
}

fn model_params(cfg: &ExperimentConfig) -> Result<ModelParams, TaskError> {
    let kernel = CouplingKernel::pure_power(cfg.alpha)?;
    Ok(ModelParams::new(kernel, cfg.beta, cfg.p)?)
}

fn proposal_law(cfg: &ExperimentConfig) -> Result<ProposalLaw, TaskError> {
    Ok(match cfg.proposal {
        ProposalKind::UnitStep => ProposalLaw::UnitStep,
        ProposalKind::Geometric => ProposalLaw::geometric(cfg.proposal_q)?,
    })
}

/// Runs one task, writing artifacts under `out/<run-id>/` and appending
/// one line to `out/registry.jsonl`.
pub fn run_task(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome, TaskError> {
    let outcome = run_task_unregistered(cfg, out)?;
    append_registry(out, &outcome.entry)?;
    Ok(outcome)
}

/// Same as `run_task` but leaves the registry untouched; the sweep
/// driver appends under its own single-writer discipline.
pub fn run_task_unregistered(
    cfg: &ExperimentConfig,
    out: &Path,
) -> Result<RunOutcome, TaskError> {
    let run_id = cfg.run_id();
    let run_dir = out.join(&run_id);
    fs::create_dir_all(&run_dir)?;

    let mut artifacts: Vec<String> = Vec::new();
    let mut summary: BTreeMap<String, f64> = BTreeMap::new();
    let emit = |run_dir: &Path,
                    artifacts: &mut Vec<String>,
                    name: &str,
                    body: String|
     -> Result<(), TaskError> {
        fs::write(run_dir.join(name), body)?;
        artifacts.push(format!("{run_id}/{name}"));
        Ok(())
    };

    match cfg.task {
        TaskKind::Exact => {
            let params = model_params(cfg)?;
            let kmax = cfg.kmax.expect("validated");
            let dist = exact::enumerate(
                &params,
                Window::centered(cfg.half_width)?,
                kmax,
                BoundaryRule::Constant(cfg.omega),
                cfg.eps,
                cfg.budget,
            )?;
            let report = moments_from_dist(&dist, 0)?;
            emit(
                &run_dir,
                &mut artifacts,
                "moments.csv",
                moments_csv(0, &report),
            )?;
            if cfg.dump {
                let mut buf = Vec::new();
                dist.write_csv(&mut buf)?;
                let text = String::from_utf8(buf)
                    .map_err(|e| TaskError::Internal(e.to_string()))?;
                emit(&run_dir, &mut artifacts, "distribution.csv", text)?;
            }
            summary.insert("log_z".into(), dist.log_z());
            summary.insert("boundary_mass".into(), dist.boundary_mass());
            summary.insert("mean_abs".into(), report.mean_abs.value);
            summary.insert("second_moment".into(), report.second_moment.value);
            summary.insert("states".into(), dist.state_count() as f64);
        }
        TaskKind::Sample => {
            let params = model_params(cfg)?;
            let proposal = proposal_law(cfg)?;
            let schedule =
                Schedule::new(cfg.burn_in, cfg.sweeps.expect("validated"), cfg.thinning)?;
            let mut observables = vec![
                Observable::Height(0),
                Observable::AbsHeight(0),
                Observable::SqHeight(0),
                Observable::Energy,
            ];
            if let (Some(t), Some(n)) = (cfg.ledger_t, cfg.ledger_n) {
                observables.push(Observable::NegLogRn { t, n });
            }
            let record = run_chain(
                &params,
                Window::centered(cfg.half_width)?,
                BoundaryRule::Constant(cfg.omega),
                &proposal,
                schedule,
                &observables,
                cfg.seed,
                cfg.eps,
            )?;
            emit(&run_dir, &mut artifacts, "series.csv", series_csv(&record))?;
            let h0 = record.series_named("h_0").expect("requested");
            let report = moments_from_series(h0)?;
            emit(
                &run_dir,
                &mut artifacts,
                "moments.csv",
                moments_csv(0, &report),
            )?;
            summary.insert("mean".into(), report.mean.value);
            summary.insert("mean_se".into(), report.mean.se);
            summary.insert("mean_abs".into(), report.mean_abs.value);
            summary.insert("second_moment".into(), report.second_moment.value);
            summary.insert("tau".into(), report.autocorrelation_time);
            summary.insert("acceptance_rate".into(), record.acceptance_rate);
            summary.insert("samples".into(), report.samples as f64);
            if let (Some(t), Some(n)) = (cfg.ledger_t, cfg.ledger_n) {
                let est = analysis::re_mc_estimate(&record, t, n)?;
                summary.insert("re_mc".into(), est.value);
                summary.insert("re_mc_se".into(), est.se);
            }
        }
        TaskKind::Ledger => {
            let params = model_params(cfg)?;
            let dist = exact::enumerate(
                &params,
                Window::centered(cfg.half_width)?,
                cfg.kmax.expect("validated"),
                BoundaryRule::Constant(cfg.omega),
                cfg.eps,
                cfg.budget,
            )?;
            let t = cfg.ledger_t.expect("validated");
            let n = cfg.ledger_n.expect("validated");
            let ledger = re_ledger(&dist, t, n, &params)?;
            let mut body = String::from("alpha,beta,p,t,n,formula,bound,c1,c2\n");
            let _ = writeln!(
                body,
                "{},{},{},{},{},{},{},{},{}",
                cfg.alpha,
                cfg.beta,
                cfg.p,
                ledger.t,
                ledger.n,
                ledger.formula_value,
                ledger.bound_value,
                ledger.c1,
                ledger.c2
            );
            emit(&run_dir, &mut artifacts, "ledger.csv", body)?;
            summary.insert("formula".into(), ledger.formula_value);
            summary.insert("bound".into(), ledger.bound_value);
            summary.insert("c1".into(), ledger.c1);
            summary.insert("c2".into(), ledger.c2);
        }
        TaskKind::Tailsum => {
            let params = model_params(cfg)?;
            let sizes = cfg.tailsum_sizes.as_ref().expect("validated");
            let kernel = params.kernel();
            let mut xs = Vec::with_capacity(sizes.len());
            for &n in sizes {
                xs.push(kernel.cross_sum(n, cfg.eps)?);
            }
            let mut body = String::from("n,x_n\n");
            for (&n, &x) in sizes.iter().zip(&xs) {
                let _ = writeln!(body, "{n},{x}");
            }
            emit(&run_dir, &mut artifacts, "tailsum.csv", body)?;
            summary.insert("final_value".into(), *xs.last().expect("nonempty"));

            let size_f: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
            if let Ok(fit) = fit_exponent(&size_f, &xs) {
                emit(&run_dir, &mut artifacts, "fit.csv", fit_csv(&fit))?;
                summary.insert("slope".into(), fit.slope);
                summary.insert("r2".into(), fit.r2);
            }
            // Increments between consecutive sizes decay like the tail
            // exponent; fit them when there are enough and they stay
            // positive (they can sink into rounding for steep decay).
            if sizes.len() >= 5 {
                let incs: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
                if let Ok(fit) = fit_exponent(&size_f[..incs.len()], &incs) {
                    summary.insert("increment_slope".into(), fit.slope);
                }
            }
        }
        TaskKind::Profile => {
            let params = model_params(cfg)?;
            let proposal = proposal_law(cfg)?;
            let schedule =
                Schedule::new(cfg.burn_in, cfg.sweeps.expect("validated"), cfg.thinning)?;
            let sizes = cfg.profile_sizes.as_ref().expect("validated");
            let points = variance_profile(
                &params,
                sizes,
                &proposal,
                schedule,
                cfg.seed,
                cfg.eps,
            )?;
            let mut body = String::from("n,variance,se,samples\n");
            for p in &points {
                let _ = writeln!(body, "{},{},{},{}", p.half_width, p.variance, p.se, p.samples);
            }
            emit(&run_dir, &mut artifacts, "profile.csv", body)?;
            summary.insert(
                "final_variance".into(),
                points.last().expect("nonempty").variance,
            );
            // Short scans still get the variance table; the growth fit
            // needs at least four sizes.
            let size_f: Vec<f64> = points.iter().map(|p| p.half_width as f64).collect();
            let vars: Vec<f64> = points.iter().map(|p| p.variance).collect();
            if let Ok(fit) = fit_exponent(&size_f, &vars) {
                emit(&run_dir, &mut artifacts, "fit.csv", fit_csv(&fit))?;
                summary.insert("slope".into(), fit.slope);
                summary.insert("ci_lo".into(), fit.ci_lo);
                summary.insert("ci_hi".into(), fit.ci_hi);
                summary.insert("r2".into(), fit.r2);
            }
        }
        TaskKind::Fit => {
            let xs = cfg.fit_xs.as_ref().expect("validated");
            let ys = cfg.fit_ys.as_ref().expect("validated");
            let fit = fit_exponent(xs, ys)?;
            emit(&run_dir, &mut artifacts, "fit.csv", fit_csv(&fit))?;
            summary.insert("slope".into(), fit.slope);
            summary.insert("ci_lo".into(), fit.ci_lo);
            summary.insert("ci_hi".into(), fit.ci_hi);
            summary.insert("r2".into(), fit.r2);
        }
    }

    let entry = RegistryEntry {
        run_id,
        task: cfg.task,
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        config: cfg.clone(),
        artifacts,
        summary,
    };
    Ok(RunOutcome {
        entry,
        out_dir: out.to_path_buf(),
    })
}

fn append_registry(out: &Path, entry: &RegistryEntry) -> Result<(), TaskError> {
    use std::io::Write;
    let line = serde_json::to_string(entry).map_err(|e| TaskError::Internal(e.to_string()))?;
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(out.join("registry.jsonl"))?;
    writeln!(file, "{line}")?;
    Ok(())
}

fn moments_csv(site: i64, r: &MomentReport) -> String {
    let mut body =
        String::from("site,mean,mean_se,mean_abs,mean_abs_se,second_moment,second_moment_se,tau,samples\n");
    let _ = writeln!(
        body,
        "{site},{},{},{},{},{},{},{},{}",
        r.mean.value,
        r.mean.se,
        r.mean_abs.value,
        r.mean_abs.se,
        r.second_moment.value,
        r.second_moment.se,
        r.autocorrelation_time,
        r.samples
    );
    body
}

fn series_csv(record: &crate::sampler::RunRecord) -> String {
    let mut body = String::from("sweep");
    for name in &record.observable_names {
        let _ = write!(body, ",{name}");
    }
    body.push('\n');
    for (row, &sweep) in record.measured_sweeps.iter().enumerate() {
        let _ = write!(body, "{sweep}");
        for series in &record.series {
            let _ = write!(body, ",{}", series[row]);
        }
        body.push('\n');
    }
    body
}

fn fit_csv(fit: &analysis::ExponentFit) -> String {
    let mut body = String::from("slope,ci_lo,ci_hi,r2\n");
    let _ = writeln!(
        body,
        "{},{},{},{}",
        fit.slope, fit.ci_lo, fit.ci_hi, fit.r2
    );
    body
}

/// Outcome of one sweep cell that failed; the sweep itself continues.
#[derive(Debug)]
pub struct CellFailure {
    pub run_id: String,
    pub axis_values: Vec<String>,
    pub error: TaskError,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub entries: Vec<RegistryEntry>,
    pub failures: Vec<CellFailure>,
    pub summary_path: PathBuf,
}

/// Runs every cell of a sweep, isolating failures, then writes a merged
/// summary sorted by the axis value tuple. Cells write into their own
/// run directories; the registry sees one append per successful cell.
pub fn run_sweep(spec: &SweepSpec, out: &Path) -> Result<SweepOutcome, TaskError> {
    fs::create_dir_all(out)?;
    let axis_keys: Vec<&str> = spec.axes.iter().map(|(k, _)| k.as_str()).collect();

    struct Row {
        axis_values: Vec<String>,
        run_id: String,
        status: String,
        summary: BTreeMap<String, f64>,
    }
    let mut rows: Vec<Row> = Vec::with_capacity(spec.cells.len());
    let mut entries = Vec::new();
    let mut failures = Vec::new();

    let mut index = vec![0usize; spec.axes.len()];
    for cfg in &spec.cells {
        let axis_values: Vec<String> = index
            .iter()
            .zip(&spec.axes)
            .map(|(&i, (_, vals))| vals[i].clone())
            .collect();
        match run_task(cfg, out) {
            Ok(outcome) => {
                rows.push(Row {
                    axis_values,
                    run_id: outcome.entry.run_id.clone(),
                    status: "ok".into(),
                    summary: outcome.entry.summary.clone(),
                });
                entries.push(outcome.entry);
            }
            Err(err) => {
                rows.push(Row {
                    axis_values: axis_values.clone(),
                    run_id: cfg.run_id(),
                    status: format!("error({})", err.exit_code()),
                    summary: BTreeMap::new(),
                });
                failures.push(CellFailure {
                    run_id: cfg.run_id(),
                    axis_values,
                    error: err,
                });
            }
        }
        let mut carry = index.len();
        while carry > 0 {
            index[carry - 1] += 1;
            if index[carry - 1] < spec.axes[carry - 1].1.len() {
                break;
            }
            index[carry - 1] = 0;
            carry -= 1;
        }
    }

    // Numeric-aware ordering by the axis tuple so "10" sorts after "2".
    rows.sort_by(|a, b| {
        for (x, y) in a.axis_values.iter().zip(&b.axis_values) {
            let ord = match (x.parse::<f64>(), y.parse::<f64>()) {
                (Ok(u), Ok(v)) => u.total_cmp(&v),
                _ => x.cmp(y),
            };
            if ord != std::cmp::Ordering::Equal {
                return ord;
            }
        }
        std::cmp::Ordering::Equal
    });

    let mut summary_keys: Vec<String> = rows
        .iter()
        .flat_map(|r| r.summary.keys().cloned())
        .collect();
    summary_keys.sort();
    summary_keys.dedup();

    let mut body = String::new();
    for key in &axis_keys {
        let _ = write!(body, "{key},");
    }
    body.push_str("run_id,status");
    for key in &summary_keys {
        let _ = write!(body, ",{key}");
    }
    body.push('\n');
    for row in &rows {
        for v in &row.axis_values {
            let _ = write!(body, "{v},");
        }
        let _ = write!(body, "{},{}", row.run_id, row.status);
        for key in &summary_keys {
            match row.summary.get(key) {
                Some(v) => {
                    let _ = write!(body, ",{v}");
                }
                None => body.push(','),
            }
        }
        body.push('\n');
    }
    let summary_path = out.join("sweep_summary.csv");
    fs::write(&summary_path, body)?;

    Ok(SweepOutcome {
        entries,
        failures,
        summary_path,
    })
}
