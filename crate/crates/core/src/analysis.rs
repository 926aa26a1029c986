//! Estimators, fits, and the entropy ledger.
//!
//! Chain series are autocorrelated, so every error bar here goes through
//! the integrated autocorrelation time tau: se = sqrt(2 tau var / N),
//! with tau estimated by the usual self-consistent window (sum the
//! autocorrelation function up to the first lag W >= 6 tau(W)). Exact
//! tables produce the same report shapes with zero error, which is what
//! lets tests compare the two paths at face value.
//!
//! The ledger pairs the exact relative entropy of a step transform,
//! computed from an enumerated table, with its closed-form upper bound
//! beta * 2 X(n) * (C1 + C2 t^p) built from the kernel cross sum. The
//! constants follow the convexity argument: C2 = 1 for p = 2 (exact
//! quadratic expansion) and 2^(p-1) otherwise; C1 = 0 at both endpoint
//! exponents, and for p strictly between 1 and 2 it is the worst
//! cross-pair moment (2^(p-1) - 1) * max <|phi_i - phi_j|^p>, evaluated
//! exactly from the table.

use thiserror::Error;

use crate::exact::{ExactDistribution, ExactError};
use crate::kernel::KernelError;
use crate::model::{BoundaryRule, FieldConfig, ModelError, ModelParams, StepProfile, Window};
use crate::sampler::{
    run_chain, Observable, ProposalLaw, RunRecord, SamplerError, Schedule,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("series is empty")]
    EmptySeries,
    #[error("record has no series named {0}")]
    MissingSeries(String),
    #[error("need at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("log-log fit requires positive values, found {0}")]
    NonpositiveValue(f64),
    #[error("sizes must be nonempty and strictly increasing")]
    BadSizes,
    #[error("C1 must be nonnegative and finite, got {0}")]
    BadConstant(f64),
    #[error("ledger parameters disagree with the distribution's")]
    ParamsMismatch,
    #[error("entropy bound violated: formula {formula} > bound {bound} + slack")]
    BoundViolated { formula: f64, bound: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

/// Moment estimates of the center-site height.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub mean: Estimate,
    pub mean_abs: Estimate,
    pub second_moment: Estimate,
    /// Integrated autocorrelation time of the underlying height series
    /// (0 for exact tables): effective sample size is N / (2 tau).
    pub autocorrelation_time: f64,
    pub samples: usize,
}

/// Exact-vs-bound comparison for one step transform.
#[derive(Debug, Clone, PartialEq)]
pub struct ReLedger {
    pub t: i64,
    pub n: u64,
    pub formula_value: f64,
    pub bound_value: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Log-log least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentFit {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub r2: f64,
}

/// One entry of a variance profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub half_width: u64,
    pub variance: f64,
    pub se: f64,
    pub samples: usize,
}

/// Integrated autocorrelation time of a series via the self-consistent
/// window: tau(W) = 1/2 + sum(k=1..W) rho(k), stopping at the first
/// W >= 6 tau(W) (capped at N/4). White noise gives 1/2; the result is
/// floored there so effective sample sizes never exceed N.
pub fn integrated_autocorr_time(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 2 {
        return 0.5;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c0 = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    if c0 <= 0.0 || !c0.is_finite() {
        return 0.5;
    }
    let cap = (n / 4).max(1);
    let mut tau = 0.5;
    let mut w = 1;
    while w <= cap {
        let mut c = 0.0;
        for i in 0..(n - w) {
            c += (series[i] - mean) * (series[i + w] - mean);
        }
        tau += c / (n as f64 * c0);
        if w as f64 >= 6.0 * tau {
            break;
        }
        w += 1;
    }
    tau.max(0.5)
}

/// Mean of an autocorrelated series with its tau-corrected standard error.
pub fn series_mean(series: &[f64]) -> Result<Estimate, AnalysisError> {
    if series.is_empty() {
        return Err(AnalysisError::EmptySeries);
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let tau = integrated_autocorr_time(series);
    Ok(Estimate {
        value: mean,
        se: (2.0 * tau * var / n).sqrt(),
    })
}

/// Moment report from a recorded height series.
pub fn moments_from_series(series: &[f64]) -> Result<MomentReport, AnalysisError> {
    if series.is_empty() {
        return Err(AnalysisError::EmptySeries);
    }
    let abs: Vec<f64> = series.iter().map(|x| x.abs()).collect();
    let sq: Vec<f64> = series.iter().map(|x| x * x).collect();
    Ok(MomentReport {
        mean: series_mean(series)?,
        mean_abs: series_mean(&abs)?,
        second_moment: series_mean(&sq)?,
        autocorrelation_time: integrated_autocorr_time(series),
        samples: series.len(),
    })
}

/// Moment report of a site from an exact table: exact values, zero error.
pub fn moments_from_dist(
    dist: &ExactDistribution,
    site: i64,
) -> Result<MomentReport, AnalysisError> {
    let zero = |value| Estimate { value, se: 0.0 };
    Ok(MomentReport {
        mean: zero(dist.site_mean(site)?),
        mean_abs: zero(dist.site_mean_abs(site)?),
        second_moment: zero(dist.site_second_moment(site)?),
        autocorrelation_time: 0.0,
        samples: dist.state_count(),
    })
}

/// Box average (1/2n) * sum(|i| <= n) phi_i, the literal normalization
/// over 2n+1 sites.
pub fn ergodic_average(config: &FieldConfig, n: u64) -> Result<f64, AnalysisError> {
    if n == 0 {
        return Err(AnalysisError::Model(ModelError::EmptyStepBox));
    }
    let window = config.window();
    let n_i = n as i64;
    for edge in [-n_i, n_i] {
        if !window.contains(edge) {
            return Err(AnalysisError::Model(ModelError::SiteOutsideWindow(edge)));
        }
    }
    let sum: i64 = (-n_i..=n_i).map(|i| config.height(i)).sum();
    Ok(sum as f64 / (2 * n) as f64)
}

/// Evaluates the entropy upper bound beta * 2 X(n) * (C1 + C2 |t|^p),
/// with C2 = 1 for p = 2 and 2^(p-1) otherwise.
pub fn re_bound_eval(
    params: &ModelParams,
    t: i64,
    n: u64,
    c1: f64,
    eps: f64,
) -> Result<f64, AnalysisError> {
    if !c1.is_finite() || c1 < 0.0 {
        return Err(AnalysisError::BadConstant(c1));
    }
    let x = params.kernel().cross_sum(n, eps)?;
    let p = params.p();
    let c2 = bound_c2(p);
    let tp = (t.unsigned_abs() as f64).powf(p);
    Ok(params.beta() * 2.0 * x * (c1 + c2 * tp))
}

fn bound_c2(p: f64) -> f64 {
    if p == 2.0 {
        1.0
    } else {
        2f64.powf(p - 1.0)
    }
}

/// Pairs the exact RE of a step transform (via the enumerated table) with
/// the evaluated upper bound, computing C1 from the table for exponents
/// strictly between 1 and 2. Errors if the bound fails beyond numerical
/// slack: that would falsify the inequality chain, not tune it.
pub fn re_ledger(
    dist: &ExactDistribution,
    t: i64,
    n: u64,
    params: &ModelParams,
) -> Result<ReLedger, AnalysisError> {
    if params != dist.params() {
        return Err(AnalysisError::ParamsMismatch);
    }
    let step = StepProfile::new(t, n)?;
    let formula_value = dist.re_via_formula(&step)?;
    let p = params.p();
    let c1 = if p == 1.0 || p == 2.0 {
        0.0
    } else {
        (2f64.powf(p - 1.0) - 1.0) * dist.max_cross_pair_moment(&step)?
    };
    let bound_value = re_bound_eval(params, t, n, c1, dist.eps())?;
    let slack = 1e-8 * (1.0 + bound_value.abs());
    if formula_value > bound_value + slack {
        return Err(AnalysisError::BoundViolated {
            formula: formula_value,
            bound: bound_value,
        });
    }
    Ok(ReLedger {
        t,
        n,
        formula_value,
        bound_value,
        c1,
        c2: bound_c2(p),
    })
}

/// Monte-Carlo estimate of the RE from the recorded -log_rn series.
pub fn re_mc_estimate(record: &RunRecord, t: i64, n: u64) -> Result<Estimate, AnalysisError> {
    let name = Observable::NegLogRn { t, n }.name();
    let series = record
        .series_named(&name)
        .ok_or(AnalysisError::MissingSeries(name))?;
    series_mean(series)
}

/// Ordinary least squares of log ys on log xs.
pub fn fit_exponent(xs: &[f64], ys: &[f64]) -> Result<ExponentFit, AnalysisError> {
    if xs.len() != ys.len() || xs.len() < 4 {
        return Err(AnalysisError::TooFewPoints(xs.len().min(ys.len())));
    }
    for &v in xs.iter().chain(ys) {
        if !v.is_finite() || v <= 0.0 {
            return Err(AnalysisError::NonpositiveValue(v));
        }
    }
    let n = xs.len() as f64;
    let u: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let v: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let um = u.iter().sum::<f64>() / n;
    let vm = v.iter().sum::<f64>() / n;
    let sxx: f64 = u.iter().map(|x| (x - um) * (x - um)).sum();
    let sxy: f64 = u.iter().zip(&v).map(|(x, y)| (x - um) * (y - vm)).sum();
    if sxx <= 0.0 {
        return Err(AnalysisError::NonpositiveValue(sxx));
    }
    let slope = sxy / sxx;
    let intercept = vm - slope * um;
    let ssr: f64 = u
        .iter()
        .zip(&v)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let sst: f64 = v.iter().map(|y| (y - vm) * (y - vm)).sum();
    let resid_var = (ssr / (n - 2.0)).max(0.0);
    let se = (resid_var / sxx).sqrt();
    let half = 1.96 * se;
    let r2 = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };
    Ok(ExponentFit {
        xs: xs.to_vec(),
        ys: ys.to_vec(),
        slope,
        intercept,
        ci_lo: slope - half,
        ci_hi: slope + half,
        r2,
    })
}

/// Var(phi_0) across a family of centered windows with zero boundary:
/// one chain per half-width, seeds derived as seed + index. The error
/// combines the tau-corrected errors of the first two moments.
pub fn variance_profile(
    params: &ModelParams,
    half_widths: &[u64],
    proposal: &ProposalLaw,
    schedule: Schedule,
    seed: u64,
    eps: f64,
) -> Result<Vec<ProfilePoint>, AnalysisError> {
    if half_widths.is_empty() || half_widths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AnalysisError::BadSizes);
    }
    let mut points = Vec::with_capacity(half_widths.len());
    for (idx, &hw) in half_widths.iter().enumerate() {
        let window = Window::centered(hw)?;
        let record = run_chain(
            params,
            window,
            BoundaryRule::Constant(0),
            proposal,
            schedule,
            &[Observable::Height(0), Observable::SqHeight(0)],
            seed.wrapping_add(idx as u64),
            eps,
        )?;
        let m1 = series_mean(record.series_named("h_0").expect("requested"))?;
        let m2 = series_mean(record.series_named("sq_h_0").expect("requested"))?;
        let variance = m2.value - m1.value * m1.value;
        let se = (m2.se * m2.se + 4.0 * m1.value * m1.value * m1.se * m1.se).sqrt();
        points.push(ProfilePoint {
            half_width: hw,
            variance,
            se,
            samples: record.sample_count(),
        });
    }
    Ok(points)
}

/// Relative entropy between two enumerated tables on the same support.
pub fn table_relative_entropy(
    a: &ExactDistribution,
    b: &ExactDistribution,
) -> Result<f64, AnalysisError> {
    Ok(crate::exact::relative_entropy(
        a.probabilities(),
        b.probabilities(),
    )?)
}
