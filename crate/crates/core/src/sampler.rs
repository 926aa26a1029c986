//! Seeded Metropolis dynamics for the height models.
//!
//! A chain owns one configuration and one ChaCha8 stream. Sweeps visit the
//! window sites in ascending order; each site update draws its proposal,
//! then always consumes exactly one accept uniform, so a trajectory is a
//! pure function of (parameters, window, boundary, proposal, seed) and the
//! number of draws per update is fixed per proposal law (unit step: 2,
//! geometric: 3). That makes runs bit-reproducible across machines and
//! lets tests replay prefixes.
//!
//! Energies are tracked incrementally through the O(window) single-site
//! difference and revalidated against a full recomputation on a configurable
//! cadence; the drift between the two is a standing invariant check.
//!
//! The same update rule can be assembled as a dense transition matrix on
//! the height-truncated state space (out-of-range proposals become holds).
//! Those matrices tie the dynamics back to the enumeration oracle: each
//! site kernel satisfies detailed balance entrywise against the enumerated
//! distribution, and the sweep product fixes it.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{
    self, BoundaryRule, BoundaryWeights, FieldConfig, ModelError, ModelParams, Potential,
    StepProfile, Window,
};

/// Sweeps between full energy recomputations, unless overridden.
pub const DEFAULT_REVALIDATION_SWEEPS: u64 = 4096;

/// Cap on the state count of dense transition matrices.
pub const MATRIX_STATE_CAP: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("geometric proposal parameter must lie strictly in (0, 1), got {0}")]
    BadProposalParameter(f64),
    #[error("thinning must be >= 1")]
    BadThinning,
    #[error("observable {0} does not fit in the window")]
    ObservableOutsideWindow(String),
    #[error("dense matrix needs {states} states, cap is {cap}")]
    MatrixTooBig { states: u128, cap: usize },
    #[error("height cap must be >= 1")]
    KmaxZero,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Symmetric proposal distribution for single-site moves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProposalLaw {
    /// delta = -1 or +1 with probability 1/2 each.
    UnitStep,
    /// |delta| geometric with success parameter q (mean 1/q), sign fair.
    GeometricStep { q: f64 },
}

impl ProposalLaw {
    pub fn geometric(q: f64) -> Result<Self, SamplerError> {
        if !q.is_finite() || q <= 0.0 || q >= 1.0 {
            return Err(SamplerError::BadProposalParameter(q));
        }
        Ok(ProposalLaw::GeometricStep { q })
    }

    pub fn name(&self) -> String {
        match self {
            ProposalLaw::UnitStep => "unit-step".to_string(),
            ProposalLaw::GeometricStep { q } => format!("geometric(q={q})"),
        }
    }

    /// Draw order: magnitude uniform first (geometric only), then sign.
    #[inline]
    fn draw(&self, rng: &mut ChaCha8Rng) -> i64 {
        match self {
            ProposalLaw::UnitStep => {
                if rng.random::<f64>() < 0.5 {
                    -1
                } else {
                    1
                }
            }
            ProposalLaw::GeometricStep { q } => {
                let u: f64 = rng.random();
                let mag = 1 + ((1.0 - u).ln() / (1.0 - q).ln()).floor() as i64;
                if rng.random::<f64>() < 0.5 {
                    -mag
                } else {
                    mag
                }
            }
        }
    }

    /// Explicit move list for the dense matrices: (delta, probability)
    /// pairs covering |delta| <= max_mag, plus the leftover magnitude mass
    /// beyond max_mag (always an out-of-range hold for the caller).
    fn enumerate_moves(&self, max_mag: i64) -> (Vec<(i64, f64)>, f64) {
        match self {
            ProposalLaw::UnitStep => (vec![(-1, 0.5), (1, 0.5)], 0.0),
            ProposalLaw::GeometricStep { q } => {
                let mut moves = Vec::with_capacity(2 * max_mag as usize);
                let mut tail = 1.0;
                for m in 1..=max_mag {
                    let pm = q * (1.0 - q).powi(m as i32 - 1);
                    moves.push((-m, pm / 2.0));
                    moves.push((m, pm / 2.0));
                    tail -= pm;
                }
                (moves, tail.max(0.0))
            }
        }
    }
}

/// Burn-in sweeps, measured sweeps, and the thinning stride between
/// recorded samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub burn_in: u64,
    pub sweeps: u64,
    pub thinning: u64,
}

impl Schedule {
    pub fn new(burn_in: u64, sweeps: u64, thinning: u64) -> Result<Self, SamplerError> {
        if thinning == 0 {
            return Err(SamplerError::BadThinning);
        }
        Ok(Self {
            burn_in,
            sweeps,
            thinning,
        })
    }
}

/// Scalar functions of the chain state recorded during a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observable {
    /// Constant 1, for plumbing checks.
    One,
    Height(i64),
    AbsHeight(i64),
    SqHeight(i64),
    /// Box average (1/2n) * sum over |i| <= n of phi_i. The literal 1/(2n)
    /// normalization over 2n+1 sites is kept as-is.
    BoxMean(u64),
    /// Cached relative energy of the current configuration.
    Energy,
    /// -log_rn for the step (t, n) evaluated at the current configuration.
    NegLogRn { t: i64, n: u64 },
}

impl Observable {
    pub fn name(&self) -> String {
        match self {
            Observable::One => "one".to_string(),
            Observable::Height(i) => format!("h_{i}"),
            Observable::AbsHeight(i) => format!("abs_h_{i}"),
            Observable::SqHeight(i) => format!("sq_h_{i}"),
            Observable::BoxMean(n) => format!("box_mean_{n}"),
            Observable::Energy => "energy".to_string(),
            Observable::NegLogRn { t, n } => format!("neg_log_rn_t{t}_n{n}"),
        }
    }

    fn validate(&self, window: &Window) -> Result<(), SamplerError> {
        let ok = match self {
            Observable::One => true,
            Observable::Height(i) | Observable::AbsHeight(i) | Observable::SqHeight(i) => {
                window.contains(*i)
            }
            Observable::BoxMean(n) => {
                window.contains(*n as i64) && window.contains(-(*n as i64)) && *n >= 1
            }
            Observable::Energy => true,
            Observable::NegLogRn { t, n } => {
                let step = StepProfile::new(*t, *n).map_err(SamplerError::Model)?;
                return step
                    .check_fits(window)
                    .map_err(|_| SamplerError::ObservableOutsideWindow(self.name()));
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SamplerError::ObservableOutsideWindow(self.name()))
        }
    }

    fn eval(&self, state: &ChainState) -> f64 {
        match self {
            Observable::One => 1.0,
            Observable::Height(i) => state.config.height(*i) as f64,
            Observable::AbsHeight(i) => state.config.height(*i).abs() as f64,
            Observable::SqHeight(i) => {
                let h = state.config.height(*i) as f64;
                h * h
            }
            Observable::BoxMean(n) => {
                let n = *n as i64;
                let sum: i64 = (-n..=n).map(|i| state.config.height(i)).sum();
                sum as f64 / (2 * n) as f64
            }
            Observable::Energy => state.cached_energy,
            Observable::NegLogRn { t, n } => {
                let step = StepProfile::new(*t, *n).expect("validated");
                -model::log_rn_derivative_with_weights(
                    &state.config,
                    &step,
                    &state.params,
                    &state.weights,
                )
                .expect("validated")
            }
        }
    }
}

/// Result of one attempted site update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub delta: i64,
    pub delta_h: f64,
    pub accepted: bool,
}

/// A Metropolis chain: configuration, parameters, RNG stream and the
/// incrementally tracked relative energy.
#[derive(Debug, Clone)]
pub struct ChainState {
    config: FieldConfig,
    params: ModelParams,
    pot: Potential,
    jt: Vec<f64>,
    weights: BoundaryWeights,
    eps: f64,
    rng: ChaCha8Rng,
    seed: u64,
    cached_energy: f64,
    sweeps_done: u64,
    proposed: u64,
    accepted: u64,
    revalidate_every: Option<u64>,
}

impl ChainState {
    /// Fresh chain started from the flat configuration at the boundary
    /// height (zero relative energy).
    pub fn new(
        params: &ModelParams,
        window: Window,
        boundary: BoundaryRule,
        seed: u64,
        eps: f64,
    ) -> Result<Self, SamplerError> {
        let config = FieldConfig::constant(window, boundary.height(), boundary);
        Self::from_config(config, params, seed, eps)
    }

    /// Chain started from an arbitrary configuration.
    pub fn from_config(
        config: FieldConfig,
        params: &ModelParams,
        seed: u64,
        eps: f64,
    ) -> Result<Self, SamplerError> {
        let window = config.window();
        let weights = BoundaryWeights::new(window, params.kernel(), eps)?;
        let jt = params.kernel().distance_table(window.len() as u64);
        let cached_energy = model::energy_with_weights(&config, params, &weights);
        Ok(Self {
            config,
            params: *params,
            pot: params.potential(),
            jt,
            weights,
            eps,
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            cached_energy,
            sweeps_done: 0,
            proposed: 0,
            accepted: 0,
            revalidate_every: Some(DEFAULT_REVALIDATION_SWEEPS),
        })
    }

    pub fn config(&self) -> &FieldConfig {
        &self.config
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn sweeps_done(&self) -> u64 {
        self.sweeps_done
    }

    pub fn proposed(&self) -> u64 {
        self.proposed
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    /// Relative energy tracked through accepted deltas.
    pub fn cached_energy(&self) -> f64 {
        self.cached_energy
    }

    /// None disables periodic revalidation entirely.
    pub fn set_revalidation_interval(&mut self, every: Option<u64>) {
        self.revalidate_every = match every {
            Some(0) => None,
            other => other,
        };
    }

    /// |cached - freshly recomputed| relative energy.
    pub fn energy_drift(&self) -> f64 {
        let fresh = model::energy_with_weights(&self.config, &self.params, &self.weights);
        (self.cached_energy - fresh).abs()
    }

    /// Recomputes the energy from scratch, replaces the cache, and returns
    /// the drift that had accumulated.
    pub fn revalidate_energy(&mut self) -> f64 {
        let fresh = model::energy_with_weights(&self.config, &self.params, &self.weights);
        let drift = (self.cached_energy - fresh).abs();
        self.cached_energy = fresh;
        drift
    }

    /// One Metropolis update at a site: draw delta from the proposal,
    /// accept with probability min(1, exp(-beta dH)). Exactly one accept
    /// uniform is consumed whether or not dH is negative.
    pub fn metropolis_step(
        &mut self,
        site: i64,
        proposal: &ProposalLaw,
    ) -> Result<StepOutcome, SamplerError> {
        let a = self
            .config
            .window()
            .offset_of(site)
            .ok_or(SamplerError::Model(ModelError::SiteOutsideWindow(site)))?;
        let delta = proposal.draw(&mut self.rng);
        let delta_h = model::energy_delta_inner(
            self.config.heights(),
            a,
            delta,
            self.config.omega(),
            self.pot,
            &self.jt,
            &self.weights,
        );
        let u: f64 = self.rng.random();
        let accepted = u < (-self.params.beta() * delta_h).exp();
        self.proposed += 1;
        if accepted {
            self.config.heights_mut()[a] += delta;
            self.cached_energy += delta_h;
            self.accepted += 1;
        }
        Ok(StepOutcome {
            delta,
            delta_h,
            accepted,
        })
    }

    /// One sweep: every window site once, in ascending site order.
    pub fn sweep(&mut self, proposal: &ProposalLaw) -> Result<(), SamplerError> {
        let (lo, hi) = (self.config.window().lo(), self.config.window().hi());
        for site in lo..=hi {
            self.metropolis_step(site, proposal)?;
        }
        self.sweeps_done += 1;
        if let Some(every) = self.revalidate_every {
            if self.sweeps_done % every == 0 {
                self.revalidate_energy();
            }
        }
        Ok(())
    }
}

/// A finished run: the recorded observable series plus everything needed
/// to reproduce them.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub params: ModelParams,
    pub window: Window,
    pub boundary: BoundaryRule,
    pub proposal: ProposalLaw,
    pub schedule: Schedule,
    pub seed: u64,
    pub eps: f64,
    pub observable_names: Vec<String>,
    pub measured_sweeps: Vec<u64>,
    /// One inner vector per observable, index-aligned with the names.
    pub series: Vec<Vec<f64>>,
    pub proposed: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
    pub final_energy: f64,
}

impl RunRecord {
    pub fn series_named(&self, name: &str) -> Option<&[f64]> {
        self.observable_names
            .iter()
            .position(|n| n == name)
            .map(|k| self.series[k].as_slice())
    }

    pub fn sample_count(&self) -> usize {
        self.measured_sweeps.len()
    }
}

/// Runs a full schedule from the flat start and records the observables
/// every `thinning`-th measured sweep.
#[allow(clippy::too_many_arguments)]
pub fn run_chain(
    params: &ModelParams,
    window: Window,
    boundary: BoundaryRule,
    proposal: &ProposalLaw,
    schedule: Schedule,
    observables: &[Observable],
    seed: u64,
    eps: f64,
) -> Result<RunRecord, SamplerError> {
    if schedule.thinning == 0 {
        return Err(SamplerError::BadThinning);
    }
    for obs in observables {
        obs.validate(&window)?;
    }
    let mut state = ChainState::new(params, window, boundary, seed, eps)?;
    for _ in 0..schedule.burn_in {
        state.sweep(proposal)?;
    }
    let samples = (schedule.sweeps / schedule.thinning) as usize;
    let mut series = vec![Vec::with_capacity(samples); observables.len()];
    let mut measured_sweeps = Vec::with_capacity(samples);
    for s in 1..=schedule.sweeps {
        state.sweep(proposal)?;
        if s % schedule.thinning == 0 {
            for (k, obs) in observables.iter().enumerate() {
                series[k].push(obs.eval(&state));
            }
            measured_sweeps.push(s);
        }
    }
    Ok(RunRecord {
        params: *params,
        window,
        boundary,
        proposal: *proposal,
        schedule,
        seed,
        eps,
        observable_names: observables.iter().map(|o| o.name()).collect(),
        measured_sweeps,
        series,
        proposed: state.proposed(),
        accepted: state.accepted(),
        acceptance_rate: state.acceptance_rate(),
        final_energy: state.cached_energy(),
    })
}

/// Dense one-site Metropolis kernel on the truncated space
/// {-kmax..kmax}^window, row-major N x N with N = (2 kmax + 1)^|window|.
/// Proposals leaving the truncation are counted as holds. State indexing
/// matches the enumeration oracle (leftmost site fastest).
pub fn site_transition_matrix(
    params: &ModelParams,
    window: Window,
    kmax: u32,
    boundary: BoundaryRule,
    site: i64,
    proposal: &ProposalLaw,
    eps: f64,
) -> Result<Vec<f64>, SamplerError> {
    if kmax == 0 {
        return Err(SamplerError::KmaxZero);
    }
    let a = window
        .offset_of(site)
        .ok_or(SamplerError::Model(ModelError::SiteOutsideWindow(site)))?;
    let n = matrix_states(window.len(), kmax)?;
    let base = (2 * kmax + 1) as usize;
    let k = kmax as i64;
    let weights = BoundaryWeights::new(window, params.kernel(), eps)?;
    let jt = params.kernel().distance_table(window.len() as u64);
    let pot = params.potential();
    let omega = boundary.height();
    let beta = params.beta();
    let (moves, leftover) = proposal.enumerate_moves(2 * k);

    let mut site_mult = 1usize;
    for _ in 0..a {
        site_mult *= base;
    }

    let mut matrix = vec![0.0f64; n * n];
    let mut h = vec![-k; window.len()];
    for x in 0..n {
        let row = &mut matrix[x * n..(x + 1) * n];
        row[x] += leftover;
        for &(delta, prob) in &moves {
            let target = h[a] + delta;
            if target.abs() > k {
                row[x] += prob;
                continue;
            }
            let dh = model::energy_delta_inner(&h, a, delta, omega, pot, &jt, &weights);
            let acc = (-beta * dh).exp().min(1.0);
            let y = (x as i64 + delta * site_mult as i64) as usize;
            row[y] += prob * acc;
            row[x] += prob * (1.0 - acc);
        }
        // Next state in enumeration order.
        for d in h.iter_mut() {
            if *d < k {
                *d += 1;
                break;
            }
            *d = -k;
        }
    }
    Ok(matrix)
}

/// Dense kernel of one full sweep: the product of the site kernels in the
/// same ascending site order the chain uses.
pub fn sweep_transition_matrix(
    params: &ModelParams,
    window: Window,
    kmax: u32,
    boundary: BoundaryRule,
    proposal: &ProposalLaw,
    eps: f64,
) -> Result<Vec<f64>, SamplerError> {
    let n = matrix_states(window.len(), kmax)?;
    let mut total: Option<Vec<f64>> = None;
    for site in window.sites() {
        let step = site_transition_matrix(params, window, kmax, boundary, site, proposal, eps)?;
        total = Some(match total {
            None => step,
            Some(acc) => mat_mul(&acc, &step, n),
        });
    }
    Ok(total.expect("window is never empty"))
}

fn matrix_states(len: usize, kmax: u32) -> Result<usize, SamplerError> {
    let base = (2 * kmax as u128) + 1;
    let mut states: u128 = 1;
    for _ in 0..len {
        states = states.checked_mul(base).ok_or(SamplerError::MatrixTooBig {
            states: u128::MAX,
            cap: MATRIX_STATE_CAP,
        })?;
    }
    if states > MATRIX_STATE_CAP as u128 {
        return Err(SamplerError::MatrixTooBig {
            states,
            cap: MATRIX_STATE_CAP,
        });
    }
    Ok(states as usize)
}

fn mat_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0f64; n * n];
    for i in 0..n {
        for l in 0..n {
            let ail = a[i * n + l];
            if ail == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += ail * b[l * n + j];
            }
        }
    }
    c
}
