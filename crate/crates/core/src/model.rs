//! Height configurations on a finite window and their relative energies.
//!
//! A configuration assigns an integer height to every site of a window
//! {lo..hi} and a single constant height omega to all of Z outside. The
//! formal Hamiltonian sums J(|i-j|) * |phi_i - phi_j|^p over all ordered
//! pairs; subtracting the (infinite) energy of the all-omega configuration
//! leaves the finite relative energy
//!
//!   H(phi) = 2 * [ sum(i<j in window) J(|i-j|) V(phi_i - phi_j)
//!                  + sum(i in window) V(phi_i - omega) * W_i ],
//!
//! where V(d) = |d|^p and W_i collects the couplings from site i to the
//! entire region beyond the window, W_i = T(hi-i+1) + T(i-lo+1) in terms of
//! the kernel tail sums. All energies produced here are relative energies in
//! this sense; the Boltzmann factor exp(-beta H) then defines the
//! finite-volume measure with boundary height omega.
//!
//! A step transform shifts the centered box {|i| < n} by a constant t.
//! Because inside-inside pair terms are invariant under a common shift, the
//! log density of the stepped measure against the original one reduces to
//! the pairs crossing the box boundary:
//!
//!   log_rn(phi) = -beta * sum(i in box, j outside) J(|i-j|)
//!                   * [ V(phi_i + t - phi_j) - V(phi_i - phi_j) ],
//!
//! again with tail weights absorbing the region beyond the window.

use thiserror::Error;

use crate::accum::KahanSum;
use crate::kernel::{CouplingKernel, KernelError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("window must satisfy lo <= hi, got {lo}..{hi}")]
    EmptyWindow { lo: i64, hi: i64 },
    #[error("window width {0} exceeds the supported maximum {1}")]
    WindowTooWide(u64, u64),
    #[error("height vector has {got} entries, window holds {want} sites")]
    HeightCountMismatch { got: usize, want: usize },
    #[error("site {0} lies outside the window")]
    SiteOutsideWindow(i64),
    #[error("step box half-width must be >= 1")]
    EmptyStepBox,
    #[error("step box of half-width n = {n} does not fit inside the window")]
    StepBoxOutsideWindow { n: u64 },
    #[error("inverse temperature must be positive and finite, got {0}")]
    BadBeta(f64),
    #[error("gradient exponent must lie in [1, 2], got {0}")]
    BadGradientExponent(f64),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Hard cap on window widths; keeps index arithmetic comfortably inside
/// usize and catches misconfigured geometry before allocation.
pub const MAX_WINDOW_WIDTH: u64 = 1 << 24;

/// A contiguous block of sites {lo, ..., hi} in Z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Window {
    lo: i64,
    hi: i64,
}

impl Window {
    pub fn new(lo: i64, hi: i64) -> Result<Self, ModelError> {
        if lo > hi {
            return Err(ModelError::EmptyWindow { lo, hi });
        }
        let width = (hi as i128 - lo as i128 + 1) as u128;
        if width > MAX_WINDOW_WIDTH as u128 {
            return Err(ModelError::WindowTooWide(width as u64, MAX_WINDOW_WIDTH));
        }
        Ok(Self { lo, hi })
    }

    /// The symmetric window {-half_width, ..., half_width}.
    pub fn centered(half_width: u64) -> Result<Self, ModelError> {
        if half_width > MAX_WINDOW_WIDTH / 2 {
            return Err(ModelError::WindowTooWide(2 * half_width + 1, MAX_WINDOW_WIDTH));
        }
        Self::new(-(half_width as i64), half_width as i64)
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo) as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, site: i64) -> bool {
        self.lo <= site && site <= self.hi
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.hi
    }

    /// Position of a site in window order.
    pub fn offset_of(&self, site: i64) -> Option<usize> {
        if self.contains(site) {
            Some((site - self.lo) as usize)
        } else {
            None
        }
    }

    /// True if `other` is contained in self and strictly smaller.
    pub fn properly_contains(&self, other: &Window) -> bool {
        self.lo <= other.lo && other.hi <= self.hi && (self.lo < other.lo || other.hi < self.hi)
    }
}

/// Behaviour of the field outside the window. Constant boundary height is
/// the only rule in the model class; keeping it as an enum makes call sites
/// explicit about that assumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryRule {
    Constant(i64),
}

impl BoundaryRule {
    pub fn height(&self) -> i64 {
        match self {
            BoundaryRule::Constant(h) => *h,
        }
    }
}

/// Integer heights on a window together with the boundary rule.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FieldConfig {
    window: Window,
    heights: Vec<i64>,
    boundary: BoundaryRule,
}

impl FieldConfig {
    pub fn new(
        window: Window,
        heights: Vec<i64>,
        boundary: BoundaryRule,
    ) -> Result<Self, ModelError> {
        if heights.len() != window.len() {
            return Err(ModelError::HeightCountMismatch {
                got: heights.len(),
                want: window.len(),
            });
        }
        Ok(Self {
            window,
            heights,
            boundary,
        })
    }

    /// Constant configuration, by default the one matching the boundary.
    pub fn constant(window: Window, height: i64, boundary: BoundaryRule) -> Self {
        Self {
            window,
            heights: vec![height; window.len()],
            boundary,
        }
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn boundary(&self) -> BoundaryRule {
        self.boundary
    }

    pub fn omega(&self) -> i64 {
        self.boundary.height()
    }

    pub fn heights(&self) -> &[i64] {
        &self.heights
    }

    /// Height at any site of Z: window heights inside, omega outside.
    pub fn height(&self, site: i64) -> i64 {
        match self.window.offset_of(site) {
            Some(k) => self.heights[k],
            None => self.omega(),
        }
    }

    pub(crate) fn heights_mut(&mut self) -> &mut [i64] {
        &mut self.heights
    }
}

/// Gradient potential V(d) = |d|^p evaluated on integer differences, with
/// exact fast paths for the two endpoint exponents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Potential {
    Abs,
    Square,
    Power(f64),
}

impl Potential {
    pub fn of(p: f64) -> Self {
        if p == 2.0 {
            Potential::Square
        } else if p == 1.0 {
            Potential::Abs
        } else {
            Potential::Power(p)
        }
    }

    #[inline]
    pub fn eval(self, d: i64) -> f64 {
        match self {
            Potential::Abs => (d as f64).abs(),
            Potential::Square => {
                let x = d as f64;
                x * x
            }
            Potential::Power(p) => (d as f64).abs().powf(p),
        }
    }

    /// V(d + t) - V(d) without cancellation for the exact-arithmetic cases.
    #[inline]
    pub fn shift_diff(self, d: i64, t: i64) -> f64 {
        match self {
            Potential::Square => (t * (2 * d + t)) as f64,
            Potential::Abs => ((d + t).abs() - d.abs()) as f64,
            Potential::Power(_) => self.eval(d + t) - self.eval(d),
        }
    }
}

/// |x|^p for integer x; V(0) = 0 and V is even.
pub fn potential_eval(p: f64, d: i64) -> Result<f64, ModelError> {
    check_gradient_exponent(p)?;
    Ok(Potential::of(p).eval(d))
}

/// Interaction parameters: coupling kernel, inverse temperature and the
/// gradient exponent p in [1, 2].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    kernel: CouplingKernel,
    beta: f64,
    p: f64,
}

impl ModelParams {
    pub fn new(kernel: CouplingKernel, beta: f64, p: f64) -> Result<Self, ModelError> {
        if !beta.is_finite() || beta <= 0.0 {
            return Err(ModelError::BadBeta(beta));
        }
        check_gradient_exponent(p)?;
        Ok(Self { kernel, beta, p })
    }

    pub fn kernel(&self) -> &CouplingKernel {
        &self.kernel
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub(crate) fn potential(&self) -> Potential {
        Potential::of(self.p)
    }
}

fn check_gradient_exponent(p: f64) -> Result<(), ModelError> {
    if !p.is_finite() || !(1.0..=2.0).contains(&p) {
        return Err(ModelError::BadGradientExponent(p));
    }
    Ok(())
}

/// Per-site total coupling to the region beyond the window,
/// W_i = T(hi - i + 1) + T(i - lo + 1), each tail certified to eps.
#[derive(Debug, Clone)]
pub struct BoundaryWeights {
    window: Window,
    weights: Vec<f64>,
}

impl BoundaryWeights {
    pub fn new(window: Window, kernel: &CouplingKernel, eps: f64) -> Result<Self, ModelError> {
        let width = window.len() as u64;
        let tails = kernel.tail_table(width, eps)?;
        let weights = window
            .sites()
            .map(|i| {
                let right = (window.hi - i + 1) as usize;
                let left = (i - window.lo + 1) as usize;
                tails[right] + tails[left]
            })
            .collect();
        Ok(Self { window, weights })
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn weight(&self, site: i64) -> Result<f64, ModelError> {
        self.window
            .offset_of(site)
            .map(|k| self.weights[k])
            .ok_or(ModelError::SiteOutsideWindow(site))
    }

    pub(crate) fn at(&self, offset: usize) -> f64 {
        self.weights[offset]
    }
}

/// Constant shift of the centered box {|i| < n}: site i moves by t when
/// |i| < n and is untouched otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StepProfile {
    t: i64,
    n: u64,
}

impl StepProfile {
    pub fn new(t: i64, n: u64) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::EmptyStepBox);
        }
        Ok(Self { t, n })
    }

    pub fn t(&self) -> i64 {
        self.t
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Shift applied at a site.
    pub fn offset(&self, site: i64) -> i64 {
        if site.unsigned_abs() < self.n {
            self.t
        } else {
            0
        }
    }

    pub fn box_lo(&self) -> i64 {
        -((self.n - 1) as i64)
    }

    pub fn box_hi(&self) -> i64 {
        (self.n - 1) as i64
    }

    pub(crate) fn check_fits(&self, window: &Window) -> Result<(), ModelError> {
        if window.contains(self.box_lo()) && window.contains(self.box_hi()) {
            Ok(())
        } else {
            Err(ModelError::StepBoxOutsideWindow { n: self.n })
        }
    }
}

/// Applies a step transform to a configuration. The boundary is untouched,
/// so the step box must sit inside the window.
pub fn apply_step(config: &FieldConfig, step: &StepProfile) -> Result<FieldConfig, ModelError> {
    let window = config.window();
    step.check_fits(&window)?;
    let heights = window
        .sites()
        .zip(config.heights())
        .map(|(site, &h)| h + step.offset(site))
        .collect();
    Ok(FieldConfig {
        window,
        heights,
        boundary: config.boundary(),
    })
}

/// Relative energy of a configuration against its constant boundary.
/// Tail sums toward the boundary are certified to eps each.
pub fn energy(config: &FieldConfig, params: &ModelParams, eps: f64) -> Result<f64, ModelError> {
    let weights = BoundaryWeights::new(config.window(), params.kernel(), eps)?;
    Ok(energy_with_weights(config, params, &weights))
}

/// Same as [`energy`] with precomputed boundary weights, for callers that
/// evaluate many configurations on one window.
pub fn energy_with_weights(
    config: &FieldConfig,
    params: &ModelParams,
    weights: &BoundaryWeights,
) -> f64 {
    let window = config.window();
    let jt = params.kernel().distance_table(window.len() as u64);
    let pot = params.potential();
    let h = config.heights();
    let omega = config.omega();

    let mut pair = KahanSum::new();
    for a in 0..h.len() {
        for b in (a + 1)..h.len() {
            pair.add(jt[b - a] * pot.eval(h[a] - h[b]));
        }
    }
    let mut bnd = KahanSum::new();
    for (a, &ha) in h.iter().enumerate() {
        bnd.add(weights.at(a) * pot.eval(ha - omega));
    }
    2.0 * (pair.value() + bnd.value())
}

/// Energy change from moving one site by delta, in O(window) time.
pub fn energy_delta(
    config: &FieldConfig,
    site: i64,
    delta: i64,
    params: &ModelParams,
    eps: f64,
) -> Result<f64, ModelError> {
    let window = config.window();
    if !window.contains(site) {
        return Err(ModelError::SiteOutsideWindow(site));
    }
    let weights = BoundaryWeights::new(window, params.kernel(), eps)?;
    let jt = params.kernel().distance_table(window.len() as u64);
    Ok(energy_delta_inner(
        config.heights(),
        window.offset_of(site).expect("checked above"),
        delta,
        config.omega(),
        params.potential(),
        &jt,
        &weights,
    ))
}

/// Hot-path energy difference shared by the sampler: all lookups are
/// precomputed, `a` is the window offset of the moved site.
pub(crate) fn energy_delta_inner(
    h: &[i64],
    a: usize,
    delta: i64,
    omega: i64,
    pot: Potential,
    jt: &[f64],
    weights: &BoundaryWeights,
) -> f64 {
    if delta == 0 {
        return 0.0;
    }
    let ha = h[a];
    let mut acc = 0.0;
    for (b, &hb) in h.iter().enumerate() {
        if b == a {
            continue;
        }
        let d = if b > a { b - a } else { a - b };
        acc += jt[d] * pot.shift_diff(ha - hb, delta);
    }
    acc += weights.at(a) * pot.shift_diff(ha - omega, delta);
    2.0 * acc
}

/// Log Radon-Nikodym derivative of the step-transformed measure against the
/// untransformed one, evaluated at `config`. Only pairs crossing the step
/// box contribute; the returned value carries the -beta prefactor.
pub fn log_rn_derivative(
    config: &FieldConfig,
    step: &StepProfile,
    params: &ModelParams,
    eps: f64,
) -> Result<f64, ModelError> {
    let weights = BoundaryWeights::new(config.window(), params.kernel(), eps)?;
    log_rn_derivative_with_weights(config, step, params, &weights)
}

/// Same as [`log_rn_derivative`] with precomputed boundary weights.
pub fn log_rn_derivative_with_weights(
    config: &FieldConfig,
    step: &StepProfile,
    params: &ModelParams,
    weights: &BoundaryWeights,
) -> Result<f64, ModelError> {
    let window = config.window();
    step.check_fits(&window)?;
    let jt = params.kernel().distance_table(window.len() as u64);
    let pot = params.potential();
    let h = config.heights();
    let omega = config.omega();
    let t = step.t();
    if t == 0 {
        return Ok(0.0);
    }

    let box_lo = window.offset_of(step.box_lo()).expect("box inside window");
    let box_hi = window.offset_of(step.box_hi()).expect("box inside window");

    let mut acc = KahanSum::new();
    for a in box_lo..=box_hi {
        let ha = h[a];
        // Window sites outside the box, both flanks.
        for b in (0..box_lo).chain((box_hi + 1)..h.len()) {
            let d = if b > a { b - a } else { a - b };
            acc.add(jt[d] * pot.shift_diff(ha - h[b], t));
        }
        // Region beyond the window, all at height omega.
        acc.add(weights.at(a) * pot.shift_diff(ha - omega, t));
    }
    Ok(-params.beta() * 2.0 * acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const ZETA_2: f64 = 1.6449340668482264;
    const ZETA_3: f64 = 1.2020569031595942;

    fn kernel(alpha: f64) -> CouplingKernel {
        CouplingKernel::pure_power(alpha).unwrap()
    }

    fn params(alpha: f64, beta: f64, p: f64) -> ModelParams {
        ModelParams::new(kernel(alpha), beta, p).unwrap()
    }

    #[test]
    fn window_basics() {
        let w = Window::new(-3, 3).unwrap();
        assert_eq!(w.len(), 7);
        assert_eq!(w.offset_of(-3), Some(0));
        assert_eq!(w.offset_of(3), Some(6));
        assert_eq!(w.offset_of(4), None);
        assert_eq!(Window::centered(2).unwrap(), Window::new(-2, 2).unwrap());
        assert!(Window::new(1, 0).is_err());

        let inner = Window::new(-1, 1).unwrap();
        assert!(w.properly_contains(&inner));
        assert!(!w.properly_contains(&w));
        assert!(!inner.properly_contains(&w));
    }

    #[test]
    fn config_heights_and_boundary() {
        let w = Window::new(-1, 1).unwrap();
        let c = FieldConfig::new(w, vec![5, -2, 7], BoundaryRule::Constant(3)).unwrap();
        assert_eq!(c.height(-1), 5);
        assert_eq!(c.height(0), -2);
        assert_eq!(c.height(1), 7);
        assert_eq!(c.height(2), 3);
        assert_eq!(c.height(-100), 3);
        assert!(FieldConfig::new(w, vec![0, 0], BoundaryRule::Constant(0)).is_err());
    }

    #[test]
    fn potential_values() {
        assert_eq!(potential_eval(2.0, -3).unwrap(), 9.0);
        assert_eq!(potential_eval(1.0, -3).unwrap(), 3.0);
        assert_abs_diff_eq!(
            potential_eval(1.5, 4).unwrap(),
            8.0,
            epsilon = 1e-12
        );
        assert_eq!(potential_eval(1.5, 0).unwrap(), 0.0);
        assert!(potential_eval(0.5, 1).is_err());
        assert!(potential_eval(2.5, 1).is_err());
        // Evenness across the exponent range.
        for p in [1.0, 1.3, 2.0] {
            for d in -5..=5 {
                assert_eq!(
                    potential_eval(p, d).unwrap(),
                    potential_eval(p, -d).unwrap()
                );
            }
        }
    }

    #[test]
    fn potential_shift_diff_consistent() {
        for p in [1.0, 1.5, 2.0] {
            let pot = Potential::of(p);
            for d in -6i64..=6 {
                for t in [-3i64, -1, 1, 2, 5] {
                    let direct = pot.eval(d + t) - pot.eval(d);
                    assert_abs_diff_eq!(pot.shift_diff(d, t), direct, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(kernel(2.0), 0.0, 2.0).is_err());
        assert!(ModelParams::new(kernel(2.0), -1.0, 2.0).is_err());
        assert!(ModelParams::new(kernel(2.0), f64::INFINITY, 2.0).is_err());
        assert!(ModelParams::new(kernel(2.0), 1.0, 0.9).is_err());
        assert!(ModelParams::new(kernel(2.0), 1.0, 2.1).is_err());
        assert!(ModelParams::new(kernel(2.0), 1.0, 1.0).is_ok());
    }

    #[test]
    fn boundary_weights_match_tail_sums() {
        let w = Window::new(-2, 2).unwrap();
        let k = kernel(2.5);
        let eps = 1e-10;
        let bw = BoundaryWeights::new(w, &k, eps).unwrap();
        for i in w.sites() {
            let expect = k.tail_sum((w.hi() - i + 1) as u64, eps).unwrap()
                + k.tail_sum((i - w.lo() + 1) as u64, eps).unwrap();
            assert_abs_diff_eq!(bw.weight(i).unwrap(), expect, epsilon = 1e-9);
        }
        assert!(bw.weight(3).is_err());
    }

    #[test]
    fn single_site_energy_closed_form() {
        // One site at height 1, zero boundary, alpha = 2:
        // H = 2 * 1^p * (T(1) + T(1)) = 4 zeta(2) = 2 pi^2 / 3.
        let w = Window::new(0, 0).unwrap();
        let c = FieldConfig::new(w, vec![1], BoundaryRule::Constant(0)).unwrap();
        for p in [1.0, 1.5, 2.0] {
            let e = energy(&c, &params(2.0, 1.0, p), 1e-10).unwrap();
            assert_abs_diff_eq!(e, 4.0 * ZETA_2, epsilon = 1e-8);
        }
    }

    #[test]
    fn two_site_energy_closed_form() {
        // Heights (1, 1) on {0,1}, zero boundary, alpha = 3, p = 2:
        // pair term vanishes, H = 2 * (W_0 + W_1)
        //   = 2 * (T(2) + T(1) + T(1) + T(2)) = 4 * (2 zeta(3) - 1).
        let w = Window::new(0, 1).unwrap();
        let c = FieldConfig::new(w, vec![1, 1], BoundaryRule::Constant(0)).unwrap();
        let e = energy(&c, &params(3.0, 1.0, 2.0), 1e-10).unwrap();
        assert_abs_diff_eq!(e, 8.0 * ZETA_3 - 4.0, epsilon = 1e-8);
    }

    #[test]
    fn energy_zero_when_flat_at_boundary() {
        let w = Window::new(-4, 4).unwrap();
        let c = FieldConfig::constant(w, 7, BoundaryRule::Constant(7));
        assert_eq!(energy(&c, &params(1.8, 2.0, 1.5), 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn energy_flip_and_shift_invariance() {
        let w = Window::new(-3, 2).unwrap();
        let heights = vec![2, -1, 0, 3, -2, 1];
        let c = FieldConfig::new(w, heights.clone(), BoundaryRule::Constant(1)).unwrap();
        let flipped = FieldConfig::new(
            w,
            heights.iter().map(|h| -h).collect(),
            BoundaryRule::Constant(-1),
        )
        .unwrap();
        let shifted = FieldConfig::new(
            w,
            heights.iter().map(|h| h + 5).collect(),
            BoundaryRule::Constant(6),
        )
        .unwrap();
        for p in [1.0, 1.5, 2.0] {
            let pr = params(2.2, 0.7, p);
            let e = energy(&c, &pr, 1e-10).unwrap();
            assert_eq!(e, energy(&flipped, &pr, 1e-10).unwrap());
            assert_eq!(e, energy(&shifted, &pr, 1e-10).unwrap());
        }
    }

    #[test]
    fn energy_delta_matches_full_difference() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let w = Window::new(-3, 3).unwrap();
        for p in [1.0, 1.4, 2.0] {
            let pr = params(1.9, 0.8, p);
            for _ in 0..200 {
                let heights: Vec<i64> = (0..w.len()).map(|_| rng.random_range(-4..=4)).collect();
                let omega = rng.random_range(-2..=2);
                let site = rng.random_range(w.lo()..=w.hi());
                let delta = *[-2i64, -1, 1, 2, 3].get(rng.random_range(0..5)).unwrap();
                let c = FieldConfig::new(w, heights.clone(), BoundaryRule::Constant(omega))
                    .unwrap();
                let mut moved = heights.clone();
                moved[w.offset_of(site).unwrap()] += delta;
                let c2 = FieldConfig::new(w, moved, BoundaryRule::Constant(omega)).unwrap();

                let d1 = energy_delta(&c, site, delta, &pr, 1e-10).unwrap();
                let d2 = energy(&c2, &pr, 1e-10).unwrap() - energy(&c, &pr, 1e-10).unwrap();
                let tol = 1e-10 * d2.abs().max(1.0);
                assert!((d1 - d2).abs() <= tol, "p={p} d1={d1} d2={d2}");
            }
        }
    }

    #[test]
    fn energy_delta_rejects_outside_site() {
        let w = Window::new(0, 2).unwrap();
        let c = FieldConfig::constant(w, 0, BoundaryRule::Constant(0));
        assert!(matches!(
            energy_delta(&c, 3, 1, &params(2.0, 1.0, 2.0), 1e-8),
            Err(ModelError::SiteOutsideWindow(3))
        ));
    }

    #[test]
    fn step_profile_geometry() {
        let s = StepProfile::new(2, 3).unwrap();
        assert_eq!(s.box_lo(), -2);
        assert_eq!(s.box_hi(), 2);
        assert_eq!(s.offset(0), 2);
        assert_eq!(s.offset(2), 2);
        assert_eq!(s.offset(3), 0);
        assert_eq!(s.offset(-3), 0);
        assert_eq!(s.offset(-2), 2);
        assert!(StepProfile::new(1, 0).is_err());
    }

    #[test]
    fn apply_step_shifts_inner_box_only() {
        let w = Window::new(-3, 3).unwrap();
        let c = FieldConfig::constant(w, 0, BoundaryRule::Constant(0));
        let s = StepProfile::new(5, 2).unwrap();
        let stepped = apply_step(&c, &s).unwrap();
        assert_eq!(stepped.heights(), &[0, 0, 5, 5, 5, 0, 0]);

        // n = 4 means box {-3..3}, exactly filling this window.
        let snug = StepProfile::new(1, 4).unwrap();
        assert!(apply_step(&c, &snug).is_ok());
        let too_big = StepProfile::new(1, 5).unwrap();
        assert!(matches!(
            apply_step(&c, &too_big),
            Err(ModelError::StepBoxOutsideWindow { n: 5 })
        ));
    }

    #[test]
    fn apply_step_composes_additively() {
        let w = Window::new(-4, 4).unwrap();
        let c = FieldConfig::new(
            w,
            vec![1, -2, 0, 3, -1, 2, 0, -3, 1],
            BoundaryRule::Constant(0),
        )
        .unwrap();
        let s1 = StepProfile::new(2, 3).unwrap();
        let s2 = StepProfile::new(-5, 3).unwrap();
        let s12 = StepProfile::new(-3, 3).unwrap();
        let a = apply_step(&apply_step(&c, &s1).unwrap(), &s2).unwrap();
        let b = apply_step(&c, &s12).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn log_rn_zero_for_trivial_step() {
        let w = Window::new(-3, 3).unwrap();
        let c = FieldConfig::new(
            w,
            vec![1, -2, 0, 3, -1, 2, 0],
            BoundaryRule::Constant(0),
        )
        .unwrap();
        let s = StepProfile::new(0, 2).unwrap();
        let v = log_rn_derivative(&c, &s, &params(2.0, 1.3, 1.5), 1e-10).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn log_rn_flat_config_square_case() {
        // phi = 0, omega = 0, p = 2: every ordered crossing pair contributes
        // t^2, so log_rn = -beta t^2 * 2 X(n).
        let w = Window::new(-8, 8).unwrap();
        let c = FieldConfig::constant(w, 0, BoundaryRule::Constant(0));
        let pr = params(2.0, 0.7, 2.0);
        for (t, n) in [(1i64, 1u64), (2, 3), (-3, 5)] {
            let s = StepProfile::new(t, n).unwrap();
            let v = log_rn_derivative(&c, &s, &pr, 1e-10).unwrap();
            let x = pr.kernel().cross_sum(n, 1e-10).unwrap();
            assert_abs_diff_eq!(
                v,
                -pr.beta() * (t * t) as f64 * 2.0 * x,
                epsilon = 1e-7
            );
        }
    }

    #[test]
    fn log_rn_flat_config_sos_case() {
        // Same geometry with p = 1 and t > 0: each ordered crossing pair
        // contributes |t|, so log_rn = -beta t * 2 X(n).
        let w = Window::new(-6, 6).unwrap();
        let c = FieldConfig::constant(w, 0, BoundaryRule::Constant(0));
        let pr = params(2.4, 1.1, 1.0);
        let s = StepProfile::new(2, 2).unwrap();
        let v = log_rn_derivative(&c, &s, &pr, 1e-10).unwrap();
        let x = pr.kernel().cross_sum(2, 1e-10).unwrap();
        assert_abs_diff_eq!(v, -pr.beta() * 2.0 * 2.0 * x, epsilon = 1e-7);
    }

    #[test]
    fn log_rn_cocycle_antisymmetry() {
        // log_rn(phi, t) + log_rn(step_t phi, -t) = 0 pointwise.
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let w = Window::new(-5, 5).unwrap();
        for p in [1.0, 1.5, 2.0] {
            let pr = params(2.1, 0.9, p);
            for _ in 0..50 {
                let heights: Vec<i64> = (0..w.len()).map(|_| rng.random_range(-3..=3)).collect();
                let c = FieldConfig::new(w, heights, BoundaryRule::Constant(1)).unwrap();
                let s = StepProfile::new(rng.random_range(1..=3), rng.random_range(1..=4))
                    .unwrap();
                let back = StepProfile::new(-s.t(), s.n()).unwrap();
                let fwd = log_rn_derivative(&c, &s, &pr, 1e-10).unwrap();
                let stepped = apply_step(&c, &s).unwrap();
                let rev = log_rn_derivative(&stepped, &back, &pr, 1e-10).unwrap();
                assert!(
                    (fwd + rev).abs() <= 1e-10 * fwd.abs().max(1.0),
                    "fwd={fwd} rev={rev}"
                );
            }
        }
    }

    #[test]
    fn log_rn_matches_energy_difference_for_global_shift() {
        // When the step box covers the whole window the transform is a
        // global shift, and log_rn = -beta (H(phi + t) - H(phi)).
        let side = 4u64;
        let w = Window::centered(side).unwrap();
        let c = FieldConfig::new(
            w,
            vec![1, -2, 0, 3, -1, 2, 0, -3, 1],
            BoundaryRule::Constant(0),
        )
        .unwrap();
        for p in [1.0, 1.5, 2.0] {
            let pr = params(2.3, 1.2, p);
            let s = StepProfile::new(2, side + 1).unwrap();
            let v = log_rn_derivative(&c, &s, &pr, 1e-11).unwrap();
            let shifted = apply_step(&c, &s).unwrap();
            let de = energy(&shifted, &pr, 1e-11).unwrap() - energy(&c, &pr, 1e-11).unwrap();
            assert!(
                (v + pr.beta() * de).abs() <= 1e-8 * de.abs().max(1.0),
                "p={p} v={v} de={de}"
            );
        }
    }
}
