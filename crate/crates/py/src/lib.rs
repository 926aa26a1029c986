//! Python bindings: exact tables, chain runs, kernel sums, fits, and
//! entropy functions, with errors surfaced as ValueError (bad inputs)
//! or RuntimeError (blown budgets).

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use std::collections::HashMap;

use dgchain::analysis;
use dgchain::exact::{self, ExactDistribution, ExactError};
use dgchain::kernel::CouplingKernel;
use dgchain::model::{BoundaryRule, ModelParams, StepProfile, Window};
use dgchain::sampler::{self, Observable, ProposalLaw, RunRecord, Schedule};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn exact_err(e: ExactError) -> PyErr {
    match e {
        ExactError::BudgetExceeded { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn build_params(alpha: f64, beta: f64, p: f64) -> PyResult<ModelParams> {
    let kernel = CouplingKernel::pure_power(alpha).map_err(value_err)?;
    ModelParams::new(kernel, beta, p).map_err(value_err)
}

fn build_proposal(name: &str, q: f64) -> PyResult<ProposalLaw> {
    match name {
        "unit-step" => Ok(ProposalLaw::UnitStep),
        "geometric" => ProposalLaw::geometric(q).map_err(value_err),
        other => Err(PyValueError::new_err(format!(
            "unknown proposal '{other}', expected 'unit-step' or 'geometric'"
        ))),
    }
}

/// Inverse of Observable::name, so Python callers use the same strings
/// that label the recorded series.
fn parse_observable(s: &str) -> PyResult<Observable> {
    let bad = || PyValueError::new_err(format!("unknown observable '{s}'"));
    if s == "one" {
        return Ok(Observable::One);
    }
    if s == "energy" {
        return Ok(Observable::Energy);
    }
    if let Some(rest) = s.strip_prefix("abs_h_") {
        return rest.parse().map(Observable::AbsHeight).map_err(|_| bad());
    }
    if let Some(rest) = s.strip_prefix("sq_h_") {
        return rest.parse().map(Observable::SqHeight).map_err(|_| bad());
    }
    if let Some(rest) = s.strip_prefix("box_mean_") {
        return rest.parse().map(Observable::BoxMean).map_err(|_| bad());
    }
    if let Some(rest) = s.strip_prefix("neg_log_rn_t") {
        if let Some((t, n)) = rest.split_once("_n") {
            if let (Ok(t), Ok(n)) = (t.parse(), n.parse()) {
                return Ok(Observable::NegLogRn { t, n });
            }
        }
        return Err(bad());
    }
    if let Some(rest) = s.strip_prefix("h_") {
        return rest.parse().map(Observable::Height).map_err(|_| bad());
    }
    Err(bad())
}

/// Exactly enumerated finite-volume distribution on a truncated height
/// space.
#[pyclass(frozen)]
struct ExactTable {
    inner: ExactDistribution,
}

#[pymethods]
impl ExactTable {
    fn state_count(&self) -> usize {
        self.inner.state_count()
    }

    fn log_z(&self) -> f64 {
        self.inner.log_z()
    }

    fn boundary_mass(&self) -> f64 {
        self.inner.boundary_mass()
    }

    fn probabilities(&self) -> Vec<f64> {
        self.inner.probabilities().to_vec()
    }

    fn index_of(&self, heights: Vec<i64>) -> PyResult<usize> {
        self.inner.index_of(&heights).map_err(exact_err)
    }

    fn site_mean(&self, site: i64) -> PyResult<f64> {
        self.inner.site_mean(site).map_err(exact_err)
    }

    fn site_mean_abs(&self, site: i64) -> PyResult<f64> {
        self.inner.site_mean_abs(site).map_err(exact_err)
    }

    fn site_second_moment(&self, site: i64) -> PyResult<f64> {
        self.inner.site_second_moment(site).map_err(exact_err)
    }

    fn site_variance(&self, site: i64) -> PyResult<f64> {
        self.inner.site_variance(site).map_err(exact_err)
    }

    /// Exact expectation of -log_rn for the step of height t on |i| < n.
    fn re_via_formula(&self, t: i64, n: u64) -> PyResult<f64> {
        let step = StepProfile::new(t, n).map_err(value_err)?;
        self.inner.re_via_formula(&step).map_err(exact_err)
    }

    /// Exact entropy next to its closed-form bound, as a dict with keys
    /// formula, bound, c1, c2.
    fn ledger(&self, t: i64, n: u64) -> PyResult<HashMap<String, f64>> {
        let ledger = analysis::re_ledger(&self.inner, t, n, self.inner.params())
            .map_err(value_err)?;
        Ok(HashMap::from([
            ("formula".to_string(), ledger.formula_value),
            ("bound".to_string(), ledger.bound_value),
            ("c1".to_string(), ledger.c1),
            ("c2".to_string(), ledger.c2),
        ]))
    }

    /// Total-variation gap between this table and its recomposition
    /// from the marginal on the complement of a subwindow times inner
    /// conditionals.
    #[pyo3(signature = (sub_lo, sub_hi, budget = exact::DEFAULT_STATE_BUDGET))]
    fn dlr_residual(&self, sub_lo: i64, sub_hi: i64, budget: u64) -> PyResult<f64> {
        let sub = Window::new(sub_lo, sub_hi).map_err(value_err)?;
        self.inner.dlr_residual(sub, budget).map_err(exact_err)
    }
}

/// Recorded Metropolis run.
#[pyclass(frozen)]
struct ChainRun {
    inner: RunRecord,
}

#[pymethods]
impl ChainRun {
    fn observable_names(&self) -> Vec<String> {
        self.inner.observable_names.clone()
    }

    fn series(&self, name: &str) -> PyResult<Vec<f64>> {
        self.inner
            .series_named(name)
            .map(|s| s.to_vec())
            .ok_or_else(|| PyValueError::new_err(format!("no series named '{name}'")))
    }

    fn measured_sweeps(&self) -> Vec<u64> {
        self.inner.measured_sweeps.clone()
    }

    fn sample_count(&self) -> usize {
        self.inner.sample_count()
    }

    #[getter]
    fn acceptance_rate(&self) -> f64 {
        self.inner.acceptance_rate
    }

    #[getter]
    fn final_energy(&self) -> f64 {
        self.inner.final_energy
    }
}

/// Enumerates the finite-volume measure on {-half_width..half_width}
/// with heights truncated to [-kmax, kmax] and constant boundary omega.
#[pyfunction]
#[pyo3(signature = (alpha, beta, p, half_width, kmax, omega = 0, eps = 1e-10,
                    budget = exact::DEFAULT_STATE_BUDGET))]
#[allow(clippy::too_many_arguments)]
fn enumerate_table(
    alpha: f64,
    beta: f64,
    p: f64,
    half_width: u64,
    kmax: u32,
    omega: i64,
    eps: f64,
    budget: u64,
) -> PyResult<ExactTable> {
    let params = build_params(alpha, beta, p)?;
    let window = Window::centered(half_width).map_err(value_err)?;
    let dist = exact::enumerate(
        &params,
        window,
        kmax,
        BoundaryRule::Constant(omega),
        eps,
        budget,
    )
    .map_err(exact_err)?;
    Ok(ExactTable { inner: dist })
}

/// Runs the Metropolis chain and records the named observables.
#[pyfunction]
#[pyo3(signature = (alpha, beta, p, half_width, sweeps, observables,
                    omega = 0, burn_in = 1000, thinning = 1, seed = 0,
                    proposal = "unit-step", q = 0.5, eps = 1e-10))]
#[allow(clippy::too_many_arguments)]
fn run_chain(
    alpha: f64,
    beta: f64,
    p: f64,
    half_width: u64,
    sweeps: u64,
    observables: Vec<String>,
    omega: i64,
    burn_in: u64,
    thinning: u64,
    seed: u64,
    proposal: &str,
    q: f64,
    eps: f64,
) -> PyResult<ChainRun> {
    let params = build_params(alpha, beta, p)?;
    let window = Window::centered(half_width).map_err(value_err)?;
    let law = build_proposal(proposal, q)?;
    let schedule = Schedule::new(burn_in, sweeps, thinning).map_err(value_err)?;
    let obs: Vec<Observable> = observables
        .iter()
        .map(|s| parse_observable(s))
        .collect::<PyResult<_>>()?;
    let record = sampler::run_chain(
        &params,
        window,
        BoundaryRule::Constant(omega),
        &law,
        schedule,
        &obs,
        seed,
        eps,
    )
    .map_err(value_err)?;
    Ok(ChainRun { inner: record })
}

/// Certified coupling sum between the box |i| < n and its complement.
#[pyfunction]
#[pyo3(signature = (alpha, n, eps = 1e-10))]
fn cross_sum(alpha: f64, n: u64, eps: f64) -> PyResult<f64> {
    CouplingKernel::pure_power(alpha)
        .and_then(|k| k.cross_sum(n, eps))
        .map_err(value_err)
}

/// Certified tail sum of the coupling from distance m on.
#[pyfunction]
#[pyo3(signature = (alpha, m, eps = 1e-10))]
fn tail_sum(alpha: f64, m: u64, eps: f64) -> PyResult<f64> {
    CouplingKernel::pure_power(alpha)
        .and_then(|k| k.tail_sum(m, eps))
        .map_err(value_err)
}

/// Closed-form entropy bound beta 2 X(n) (c1 + c2 |t|^p).
#[pyfunction]
#[pyo3(signature = (alpha, beta, p, t, n, c1 = 0.0, eps = 1e-10))]
fn re_bound(alpha: f64, beta: f64, p: f64, t: i64, n: u64, c1: f64, eps: f64) -> PyResult<f64> {
    let params = build_params(alpha, beta, p)?;
    analysis::re_bound_eval(&params, t, n, c1, eps).map_err(value_err)
}

/// Log-log least squares; returns (slope, ci_lo, ci_hi, r2).
#[pyfunction]
fn fit_exponent(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<(f64, f64, f64, f64)> {
    let fit = analysis::fit_exponent(&xs, &ys).map_err(value_err)?;
    Ok((fit.slope, fit.ci_lo, fit.ci_hi, fit.r2))
}

/// Relative entropy between two probability tables on the same support.
#[pyfunction]
fn relative_entropy(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    exact::relative_entropy(&a, &b).map_err(exact_err)
}

/// Total variation distance between two probability tables.
#[pyfunction]
fn total_variation(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    exact::total_variation(&a, &b).map_err(exact_err)
}

/// Integrated autocorrelation time by the self-consistent window.
#[pyfunction]
fn integrated_autocorr_time(series: Vec<f64>) -> f64 {
    analysis::integrated_autocorr_time(&series)
}

/// Mean and tau-corrected standard error of a series.
#[pyfunction]
fn series_mean(series: Vec<f64>) -> PyResult<(f64, f64)> {
    let est = analysis::series_mean(&series).map_err(value_err)?;
    Ok((est.value, est.se))
}

/// Var(phi_0) across centered windows; returns a list of
/// (half_width, variance, se) triples.
#[pyfunction]
#[pyo3(signature = (alpha, beta, p, sizes, sweeps, burn_in = 1000,
                    thinning = 1, seed = 0, proposal = "unit-step", q = 0.5,
                    eps = 1e-8))]
#[allow(clippy::too_many_arguments)]
fn variance_profile(
    alpha: f64,
    beta: f64,
    p: f64,
    sizes: Vec<u64>,
    sweeps: u64,
    burn_in: u64,
    thinning: u64,
    seed: u64,
    proposal: &str,
    q: f64,
    eps: f64,
) -> PyResult<Vec<(u64, f64, f64)>> {
    let params = build_params(alpha, beta, p)?;
    let law = build_proposal(proposal, q)?;
    let schedule = Schedule::new(burn_in, sweeps, thinning).map_err(value_err)?;
    let points = analysis::variance_profile(&params, &sizes, &law, schedule, seed, eps)
        .map_err(value_err)?;
    Ok(points
        .into_iter()
        .map(|p| (p.half_width, p.variance, p.se))
        .collect())
}

#[pymodule]
fn dgchain_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ExactTable>()?;
    m.add_class::<ChainRun>()?;
    m.add_function(wrap_pyfunction!(enumerate_table, m)?)?;
    m.add_function(wrap_pyfunction!(run_chain, m)?)?;
    m.add_function(wrap_pyfunction!(cross_sum, m)?)?;
    m.add_function(wrap_pyfunction!(tail_sum, m)?)?;
    m.add_function(wrap_pyfunction!(re_bound, m)?)?;
    m.add_function(wrap_pyfunction!(fit_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(relative_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(total_variation, m)?)?;
    m.add_function(wrap_pyfunction!(integrated_autocorr_time, m)?)?;
    m.add_function(wrap_pyfunction!(series_mean, m)?)?;
    m.add_function(wrap_pyfunction!(variance_profile, m)?)?;
    Ok(())
}
