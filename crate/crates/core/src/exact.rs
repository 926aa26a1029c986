//! Exact finite-volume distributions by full enumeration.
//!
//! Heights are truncated to {-kmax..kmax} per site and every configuration
//! of the window is visited in mixed-radix order (leftmost site fastest).
//! Log weights -beta H are accumulated first and exponentiated against
//! their maximum, so the normalization never overflows regardless of beta.
//!
//! The truncation is quantified rather than ignored: the total probability
//! of configurations touching the height cap is reported as
//! [`ExactDistribution::boundary_mass`], and consistency checks against the
//! enumerated table (for instance [`ExactDistribution::dlr_residual`]) are
//! expected to land below [`ExactDistribution::truncation_floor`], which
//! combines that mass with the rounding slack of a table-sized reduction.
//!
//! Everything downstream (sampler stationarity, entropy ledgers, profile
//! estimates) treats these tables as ground truth, so this module sticks to
//! the most literal evaluation available and spends cycles, not cleverness.

use std::io::{self, Write};

use thiserror::Error;

use crate::accum::KahanSum;
use crate::model::{
    BoundaryRule, BoundaryWeights, FieldConfig, ModelError, ModelParams, Potential, StepProfile,
    Window,
};

/// Default cap on the number of enumerated configurations.
pub const DEFAULT_STATE_BUDGET: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error("height cap must be >= 1")]
    KmaxZero,
    #[error("enumeration needs {states} states, budget allows {budget}")]
    BudgetExceeded { states: u128, budget: u64 },
    #[error("subwindow must be properly contained in the distribution window")]
    SubwindowNotProper,
    #[error("distributions have {a} and {b} states, expected equal supports")]
    MismatchedSupport { a: usize, b: usize },
    #[error("heights lie outside the truncated support")]
    HeightsOutsideSupport,
    #[error("invalid probability table: {0}")]
    BadTable(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Mixed-radix counter over {-kmax..kmax}^len, leftmost digit fastest.
/// Enumeration order therefore matches the index formula
/// index = sum_pos (digit_pos + kmax) * (2 kmax + 1)^pos.
struct Odometer {
    digits: Vec<i64>,
    kmax: i64,
}

impl Odometer {
    fn new(len: usize, kmax: i64) -> Self {
        Self {
            digits: vec![-kmax; len],
            kmax,
        }
    }

    fn digits(&self) -> &[i64] {
        &self.digits
    }

    /// Steps to the next configuration; false once all have been visited.
    fn advance(&mut self) -> bool {
        for d in self.digits.iter_mut() {
            if *d < self.kmax {
                *d += 1;
                return true;
            }
            *d = -self.kmax;
        }
        false
    }

    fn touches_cap(&self) -> bool {
        let k = self.kmax;
        self.digits.iter().any(|d| d.abs() == k)
    }
}

/// Precomputed ingredients for the relative energy of one window.
struct EnergyTables {
    jt: Vec<f64>,
    weights: BoundaryWeights,
    omega: i64,
    pot: Potential,
}

impl EnergyTables {
    fn new(
        params: &ModelParams,
        window: Window,
        boundary: BoundaryRule,
        eps: f64,
    ) -> Result<Self, ModelError> {
        Ok(Self {
            jt: params.kernel().distance_table(window.len() as u64),
            weights: BoundaryWeights::new(window, params.kernel(), eps)?,
            omega: boundary.height(),
            pot: params.potential(),
        })
    }

    /// Relative energy of the digit vector (window order).
    fn energy(&self, h: &[i64]) -> f64 {
        let mut acc = 0.0;
        for a in 0..h.len() {
            let ha = h[a];
            for b in (a + 1)..h.len() {
                acc += self.jt[b - a] * self.pot.eval(ha - h[b]);
            }
            acc += self.weights.at(a) * self.pot.eval(ha - self.omega);
        }
        2.0 * acc
    }
}

/// Fully enumerated truncated finite-volume distribution.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    params: ModelParams,
    window: Window,
    kmax: u32,
    boundary: BoundaryRule,
    eps: f64,
    probabilities: Vec<f64>,
    log_z: f64,
    boundary_mass: f64,
}

/// Enumerates exp(-beta H) over {-kmax..kmax}^window and normalizes.
/// Refuses to start if the state count exceeds `budget`.
pub fn enumerate(
    params: &ModelParams,
    window: Window,
    kmax: u32,
    boundary: BoundaryRule,
    eps: f64,
    budget: u64,
) -> Result<ExactDistribution, ExactError> {
    if kmax == 0 {
        return Err(ExactError::KmaxZero);
    }
    let states = count_states(window.len(), kmax, budget)?;
    let tables = EnergyTables::new(params, window, boundary, eps)?;
    let beta = params.beta();

    let mut table = Vec::with_capacity(states);
    let mut max_lw = f64::NEG_INFINITY;
    let mut odo = Odometer::new(window.len(), kmax as i64);
    loop {
        let lw = -beta * tables.energy(odo.digits());
        if lw > max_lw {
            max_lw = lw;
        }
        table.push(lw);
        if !odo.advance() {
            break;
        }
    }
    debug_assert_eq!(table.len(), states);

    let mut norm = KahanSum::new();
    let mut cap_mass = KahanSum::new();
    let mut odo = Odometer::new(window.len(), kmax as i64);
    for slot in table.iter_mut() {
        let w = (*slot - max_lw).exp();
        *slot = w;
        norm.add(w);
        if odo.touches_cap() {
            cap_mass.add(w);
        }
        odo.advance();
    }
    let z = norm.value();
    for p in table.iter_mut() {
        *p /= z;
    }

    Ok(ExactDistribution {
        params: *params,
        window,
        kmax,
        boundary,
        eps,
        probabilities: table,
        log_z: max_lw + z.ln(),
        boundary_mass: cap_mass.value() / z,
    })
}

fn count_states(len: usize, kmax: u32, budget: u64) -> Result<usize, ExactError> {
    let base = (2 * kmax as u128) + 1;
    let mut states: u128 = 1;
    for _ in 0..len {
        states = states
            .checked_mul(base)
            .ok_or(ExactError::BudgetExceeded {
                states: u128::MAX,
                budget,
            })?;
    }
    if states > budget as u128 {
        return Err(ExactError::BudgetExceeded { states, budget });
    }
    Ok(states as usize)
}

impl ExactDistribution {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn kmax(&self) -> u32 {
        self.kmax
    }

    pub fn boundary(&self) -> BoundaryRule {
        self.boundary
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn state_count(&self) -> usize {
        self.probabilities.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Log normalization constant of the truncated relative-energy weights.
    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    /// Probability that some site sits at the truncation cap. This is the
    /// resolution limit of the truncation: statements about the untruncated
    /// model cannot be sharper than this mass.
    pub fn boundary_mass(&self) -> f64 {
        self.boundary_mass
    }

    /// Consistency checks against this table are meaningful down to this
    /// level: truncation mass plus rounding slack of a table-sized sum.
    pub fn truncation_floor(&self) -> f64 {
        self.boundary_mass + self.probabilities.len() as f64 * f64::EPSILON * 16.0
    }

    /// Heights of the configuration at a table index, in window order.
    pub fn decode(&self, index: usize) -> Vec<i64> {
        let base = (2 * self.kmax + 1) as usize;
        let k = self.kmax as i64;
        let mut rest = index;
        let mut h = Vec::with_capacity(self.window.len());
        for _ in 0..self.window.len() {
            h.push((rest % base) as i64 - k);
            rest /= base;
        }
        h
    }

    /// Table index of a height vector in window order.
    pub fn index_of(&self, heights: &[i64]) -> Result<usize, ExactError> {
        if heights.len() != self.window.len() {
            return Err(ExactError::HeightsOutsideSupport);
        }
        let base = (2 * self.kmax + 1) as usize;
        let k = self.kmax as i64;
        let mut index = 0usize;
        let mut mult = 1usize;
        for &h in heights {
            if h.abs() > k {
                return Err(ExactError::HeightsOutsideSupport);
            }
            index += (h + k) as usize * mult;
            mult *= base;
        }
        Ok(index)
    }

    /// Expectation of an arbitrary observable of the heights.
    pub fn moment<F: FnMut(&[i64]) -> f64>(&self, mut f: F) -> f64 {
        let mut acc = KahanSum::new();
        let mut odo = Odometer::new(self.window.len(), self.kmax as i64);
        for &p in &self.probabilities {
            acc.add(p * f(odo.digits()));
            odo.advance();
        }
        acc.value()
    }

    pub fn site_mean(&self, site: i64) -> Result<f64, ExactError> {
        let k = self.offset(site)?;
        Ok(self.moment(|h| h[k] as f64))
    }

    pub fn site_mean_abs(&self, site: i64) -> Result<f64, ExactError> {
        let k = self.offset(site)?;
        Ok(self.moment(|h| h[k].abs() as f64))
    }

    pub fn site_second_moment(&self, site: i64) -> Result<f64, ExactError> {
        let k = self.offset(site)?;
        Ok(self.moment(|h| (h[k] * h[k]) as f64))
    }

    /// Var(phi_site) under the truncated measure.
    pub fn site_variance(&self, site: i64) -> Result<f64, ExactError> {
        let m1 = self.site_mean(site)?;
        let m2 = self.site_second_moment(site)?;
        Ok(m2 - m1 * m1)
    }

    fn offset(&self, site: i64) -> Result<usize, ExactError> {
        self.window
            .offset_of(site)
            .ok_or(ExactError::Model(ModelError::SiteOutsideWindow(site)))
    }

    /// Exact expectation of -log_rn under this distribution, evaluated by
    /// summing the crossing-pair contributions over the whole table.
    pub fn re_via_formula(&self, step: &StepProfile) -> Result<f64, ExactError> {
        step.check_fits(&self.window)?;
        let t = step.t();
        if t == 0 {
            return Ok(0.0);
        }
        let tables = EnergyTables::new(&self.params, self.window, self.boundary, self.eps)?;
        let bl = self.window.offset_of(step.box_lo()).expect("box inside");
        let bh = self.window.offset_of(step.box_hi()).expect("box inside");
        let len = self.window.len();

        let mut acc = KahanSum::new();
        let mut odo = Odometer::new(len, self.kmax as i64);
        for &p in &self.probabilities {
            let h = odo.digits();
            let mut s = 0.0;
            for a in bl..=bh {
                let ha = h[a];
                for b in (0..bl).chain((bh + 1)..len) {
                    let d = if b > a { b - a } else { a - b };
                    s += tables.jt[d] * tables.pot.shift_diff(ha - h[b], t);
                }
                s += tables.weights.at(a) * tables.pot.shift_diff(ha - tables.omega, t);
            }
            acc.add(p * s);
            odo.advance();
        }
        Ok(self.params.beta() * 2.0 * acc.value())
    }

    /// Largest p-th absolute moment of a height difference across the step
    /// box boundary, including differences against the constant boundary
    /// height. This is the configuration-dependent factor in the convexity
    /// bound for exponents strictly between 1 and 2.
    pub fn max_cross_pair_moment(&self, step: &StepProfile) -> Result<f64, ExactError> {
        step.check_fits(&self.window)?;
        let bl = self.window.offset_of(step.box_lo()).expect("box inside");
        let bh = self.window.offset_of(step.box_hi()).expect("box inside");
        let len = self.window.len();
        let pot = self.params.potential();
        let omega = self.boundary.height();

        let inside: Vec<usize> = (bl..=bh).collect();
        let outside: Vec<usize> = (0..bl).chain((bh + 1)..len).collect();
        let mut sums = vec![KahanSum::new(); inside.len() * (outside.len() + 1)];
        let mut odo = Odometer::new(len, self.kmax as i64);
        for &p in &self.probabilities {
            let h = odo.digits();
            for (ai, &a) in inside.iter().enumerate() {
                let row = ai * (outside.len() + 1);
                for (bi, &b) in outside.iter().enumerate() {
                    sums[row + bi].add(p * pot.eval(h[a] - h[b]));
                }
                sums[row + outside.len()].add(p * pot.eval(h[a] - omega));
            }
            odo.advance();
        }
        Ok(sums
            .iter()
            .map(|s| s.value())
            .fold(0.0f64, |m, v| m.max(v)))
    }

    /// Total-variation distance between this table and its recomposition
    /// from the outer marginal and re-enumerated inner conditionals (same
    /// truncation). Boundary heights for the inner enumeration are read off
    /// each outer configuration, so this exercises the compatibility of the
    /// window energies across volumes.
    pub fn dlr_residual(&self, sub: Window, budget: u64) -> Result<f64, ExactError> {
        if !self.window.properly_contains(&sub) {
            return Err(ExactError::SubwindowNotProper);
        }
        let len = self.window.len();
        let base = (2 * self.kmax + 1) as usize;
        let k = self.kmax as i64;

        let inner_lo = self.window.offset_of(sub.lo()).expect("contained");
        let inner_hi = self.window.offset_of(sub.hi()).expect("contained");
        let inner_pos: Vec<usize> = (inner_lo..=inner_hi).collect();
        let outer_pos: Vec<usize> = (0..inner_lo).chain((inner_hi + 1)..len).collect();

        count_states(inner_pos.len(), self.kmax, budget)?;
        let mut mult = vec![1usize; len];
        for pos in 1..len {
            mult[pos] = mult[pos - 1] * base;
        }

        // Index offsets contributed by each inner configuration.
        let mut inner_offsets = Vec::new();
        let mut odo = Odometer::new(inner_pos.len(), k);
        loop {
            let off: usize = odo
                .digits()
                .iter()
                .zip(&inner_pos)
                .map(|(&d, &pos)| (d + k) as usize * mult[pos])
                .sum();
            inner_offsets.push(off);
            if !odo.advance() {
                break;
            }
        }

        let tables = EnergyTables::new(&self.params, self.window, self.boundary, self.eps)?;
        let beta = self.params.beta();
        let pot = tables.pot;
        let inner_sites: Vec<i64> = sub.sites().collect();
        let outer_sites: Vec<i64> = self
            .window
            .sites()
            .filter(|s| !sub.contains(*s))
            .collect();

        let mut tv = KahanSum::new();
        let mut cond = vec![0.0f64; inner_offsets.len()];
        let mut outer = Odometer::new(outer_pos.len(), k);
        loop {
            let psi = outer.digits();
            let outer_off: usize = psi
                .iter()
                .zip(&outer_pos)
                .map(|(&d, &pos)| (d + k) as usize * mult[pos])
                .sum();

            let mut marginal = KahanSum::new();
            for &off in &inner_offsets {
                marginal.add(self.probabilities[outer_off + off]);
            }
            let m = marginal.value();

            // Conditional Gibbs weights on the subwindow given outer heights
            // psi inside the window and omega beyond it.
            let mut max_lw = f64::NEG_INFINITY;
            let mut inner = Odometer::new(inner_pos.len(), k);
            for slot in cond.iter_mut() {
                let h = inner.digits();
                let mut e = 0.0;
                for a in 0..h.len() {
                    let site_a = inner_sites[a];
                    let ha = h[a];
                    for b in (a + 1)..h.len() {
                        e += tables.jt[b - a] * pot.eval(ha - h[b]);
                    }
                    for (j, &site_j) in outer_sites.iter().enumerate() {
                        let d = (site_a - site_j).unsigned_abs() as usize;
                        e += tables.jt[d] * pot.eval(ha - psi[j]);
                    }
                    let wpos = self.window.offset_of(site_a).expect("contained");
                    e += tables.weights.at(wpos) * pot.eval(ha - tables.omega);
                }
                *slot = -beta * 2.0 * e;
                if *slot > max_lw {
                    max_lw = *slot;
                }
                inner.advance();
            }
            let mut z = KahanSum::new();
            for slot in cond.iter_mut() {
                *slot = (*slot - max_lw).exp();
                z.add(*slot);
            }
            let z = z.value();

            for (g, &off) in cond.iter().zip(&inner_offsets) {
                let recomposed = m * (g / z);
                tv.add((self.probabilities[outer_off + off] - recomposed).abs());
            }

            if !outer.advance() {
                break;
            }
        }
        Ok(0.5 * tv.value())
    }

    /// Clone of this distribution with a replacement probability table,
    /// for diagnostics against synthetic references. The table must be a
    /// normalized distribution on the same support; log_z is meaningless
    /// for synthetic tables and is reported as NaN.
    pub fn with_table(&self, table: Vec<f64>) -> Result<ExactDistribution, ExactError> {
        if table.len() != self.probabilities.len() {
            return Err(ExactError::MismatchedSupport {
                a: table.len(),
                b: self.probabilities.len(),
            });
        }
        let mut total = KahanSum::new();
        for &p in &table {
            if !p.is_finite() || p < 0.0 {
                return Err(ExactError::BadTable(format!(
                    "entries must be finite and nonnegative, found {p}"
                )));
            }
            total.add(p);
        }
        if (total.value() - 1.0).abs() > 1e-9 {
            return Err(ExactError::BadTable(format!(
                "table sums to {}, expected 1",
                total.value()
            )));
        }
        let mut cap_mass = KahanSum::new();
        let mut odo = Odometer::new(self.window.len(), self.kmax as i64);
        for &p in &table {
            if odo.touches_cap() {
                cap_mass.add(p);
            }
            odo.advance();
        }
        Ok(ExactDistribution {
            probabilities: table,
            log_z: f64::NAN,
            boundary_mass: cap_mass.value(),
            ..self.clone()
        })
    }

    /// Configuration of maximal probability (lowest relative energy).
    pub fn mode(&self) -> (usize, f64) {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, &p) in self.probabilities.iter().enumerate() {
            if p > best.1 {
                best = (i, p);
            }
        }
        best
    }

    /// Dumps the table as CSV: config_id, one height column per site, and
    /// the probability.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        write!(out, "config_id")?;
        for site in self.window.sites() {
            write!(out, ",h_{site}")?;
        }
        writeln!(out, ",probability")?;
        let mut odo = Odometer::new(self.window.len(), self.kmax as i64);
        for (i, &p) in self.probabilities.iter().enumerate() {
            write!(out, "{i}")?;
            for d in odo.digits() {
                write!(out, ",{d}")?;
            }
            writeln!(out, ",{p}")?;
            odo.advance();
        }
        Ok(())
    }

    /// The configuration distribution as a FieldConfig at a table index.
    pub fn config_at(&self, index: usize) -> FieldConfig {
        FieldConfig::new(self.window, self.decode(index), self.boundary)
            .expect("decode produces window-sized vectors")
    }
}

/// Relative entropy sum(a_i log(a_i / b_i)) between two probability tables
/// on the same indexed support. Zero entries of `a` contribute zero; a zero
/// in `b` against positive `a` yields infinity.
pub fn relative_entropy(a: &[f64], b: &[f64]) -> Result<f64, ExactError> {
    if a.len() != b.len() {
        return Err(ExactError::MismatchedSupport {
            a: a.len(),
            b: b.len(),
        });
    }
    let mut acc = KahanSum::new();
    for (&pa, &pb) in a.iter().zip(b) {
        if pa == 0.0 {
            continue;
        }
        if pb == 0.0 {
            return Ok(f64::INFINITY);
        }
        acc.add(pa * (pa / pb).ln());
    }
    Ok(acc.value())
}

/// Total-variation distance between two probability tables.
pub fn total_variation(a: &[f64], b: &[f64]) -> Result<f64, ExactError> {
    if a.len() != b.len() {
        return Err(ExactError::MismatchedSupport {
            a: a.len(),
            b: b.len(),
        });
    }
    let mut acc = KahanSum::new();
    for (&pa, &pb) in a.iter().zip(b) {
        acc.add((pa - pb).abs());
    }
    Ok(0.5 * acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::CouplingKernel;
    use approx::assert_abs_diff_eq;

    fn params(alpha: f64, beta: f64, p: f64) -> ModelParams {
        ModelParams::new(CouplingKernel::pure_power(alpha).unwrap(), beta, p).unwrap()
    }

    fn small_dist(beta: f64, p: f64, kmax: u32, half: u64, omega: i64) -> ExactDistribution {
        enumerate(
            &params(2.5, beta, p),
            Window::centered(half).unwrap(),
            kmax,
            BoundaryRule::Constant(omega),
            1e-10,
            DEFAULT_STATE_BUDGET,
        )
        .unwrap()
    }

    #[test]
    fn odometer_visits_every_state_once() {
        let mut odo = Odometer::new(3, 1);
        let mut seen = std::collections::HashSet::new();
        loop {
            assert!(seen.insert(odo.digits().to_vec()));
            if !odo.advance() {
                break;
            }
        }
        assert_eq!(seen.len(), 27);
    }

    #[test]
    fn decode_and_index_roundtrip() {
        let d = small_dist(1.0, 2.0, 2, 1, 0);
        for idx in 0..d.state_count() {
            let h = d.decode(idx);
            assert_eq!(d.index_of(&h).unwrap(), idx);
        }
        assert!(d.index_of(&[3, 0, 0]).is_err());
        assert!(d.index_of(&[0, 0]).is_err());
    }

    #[test]
    fn budget_is_enforced() {
        let err = enumerate(
            &params(2.5, 1.0, 2.0),
            Window::centered(3).unwrap(),
            4,
            BoundaryRule::Constant(0),
            1e-10,
            1000,
        )
        .unwrap_err();
        assert_eq!(
            err,
            ExactError::BudgetExceeded {
                states: 9u128.pow(7),
                budget: 1000
            }
        );
    }

    #[test]
    fn probabilities_normalized_and_positive() {
        let d = small_dist(0.8, 1.5, 2, 2, 1);
        let total: f64 = d.probabilities().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        assert!(d.probabilities().iter().all(|&p| p > 0.0));
        assert!(d.boundary_mass() > 0.0 && d.boundary_mass() < 1.0);
    }

    #[test]
    fn single_site_matches_direct_boltzmann() {
        // One site, zero boundary: p(h) prop to exp(-2 beta W_0 |h|^p).
        let pr = params(2.5, 0.9, 2.0);
        let w = Window::new(0, 0).unwrap();
        let d = enumerate(&pr, w, 3, BoundaryRule::Constant(0), 1e-12, 100).unwrap();
        let bw = BoundaryWeights::new(w, pr.kernel(), 1e-12).unwrap();
        let w0 = bw.weight(0).unwrap();
        let weights: Vec<f64> = (-3i64..=3)
            .map(|h| (-pr.beta() * 2.0 * w0 * (h * h) as f64).exp())
            .collect();
        let z: f64 = weights.iter().sum();
        for (idx, &wgt) in weights.iter().enumerate() {
            assert_abs_diff_eq!(d.probabilities()[idx], wgt / z, epsilon = 1e-13);
        }
        assert_abs_diff_eq!(d.log_z(), z.ln(), epsilon = 1e-12);
        // Mode at the boundary height.
        assert_eq!(d.mode().0, d.index_of(&[0]).unwrap());
    }

    #[test]
    fn flip_symmetry_around_boundary() {
        // omega = 0: the map phi -> -phi preserves the measure.
        let d = small_dist(0.7, 1.5, 2, 1, 0);
        for idx in 0..d.state_count() {
            let h = d.decode(idx);
            let neg: Vec<i64> = h.iter().map(|x| -x).collect();
            let j = d.index_of(&neg).unwrap();
            let a = d.probabilities()[idx];
            let b = d.probabilities()[j];
            assert!((a - b).abs() <= 1e-14 * a.max(b), "idx={idx}");
        }
        assert_abs_diff_eq!(d.site_mean(0).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn moments_satisfy_jensen() {
        let d = small_dist(0.6, 1.0, 3, 1, 0);
        let ma = d.site_mean_abs(0).unwrap();
        let m2 = d.site_second_moment(0).unwrap();
        assert!(m2 > ma * ma);
        assert!(d.site_variance(0).unwrap() > 0.0);
    }

    #[test]
    fn beta_zero_limit_is_uniform() {
        // Tiny beta: the table approaches the uniform distribution.
        let d = small_dist(1e-9, 2.0, 1, 1, 0);
        let u = 1.0 / d.state_count() as f64;
        for &p in d.probabilities() {
            assert_abs_diff_eq!(p, u, epsilon = 1e-7);
        }
    }

    #[test]
    fn larger_beta_concentrates_on_flat_configuration() {
        let cold = small_dist(3.0, 2.0, 2, 1, 0);
        let flat = cold.index_of(&[0, 0, 0]).unwrap();
        assert_eq!(cold.mode().0, flat);
        let warm = small_dist(0.3, 2.0, 2, 1, 0);
        assert!(cold.probabilities()[flat] > warm.probabilities()[flat]);
    }

    #[test]
    fn relative_entropy_basics() {
        let a = vec![0.5, 0.25, 0.25];
        let b = vec![0.25, 0.5, 0.25];
        let re = relative_entropy(&a, &b).unwrap();
        // 0.5 ln 2 - 0.25 ln 2 = 0.25 ln 2
        assert_abs_diff_eq!(re, 0.25 * std::f64::consts::LN_2, epsilon = 1e-14);
        assert_eq!(relative_entropy(&a, &a).unwrap(), 0.0);
        assert!(relative_entropy(&a, &[1.0, 0.0, 0.0]).unwrap().is_infinite());
        assert!(relative_entropy(&a, &[0.5, 0.5]).is_err());

        // Gibbs inequality on a pair of enumerated tables.
        let d1 = small_dist(0.5, 2.0, 1, 1, 0);
        let d2 = small_dist(0.9, 2.0, 1, 1, 0);
        let re = relative_entropy(d1.probabilities(), d2.probabilities()).unwrap();
        assert!(re > 0.0);
    }

    #[test]
    fn total_variation_basics() {
        let a = vec![0.5, 0.5, 0.0];
        let b = vec![0.25, 0.25, 0.5];
        assert_abs_diff_eq!(total_variation(&a, &b).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(total_variation(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn with_table_validates() {
        let d = small_dist(0.5, 2.0, 1, 1, 0);
        let n = d.state_count();
        let uniform = vec![1.0 / n as f64; n];
        let u = d.with_table(uniform).unwrap();
        assert!(u.log_z().is_nan());
        assert!(d.with_table(vec![0.5; 3]).is_err());
        let mut bad = vec![0.0; n];
        bad[0] = 2.0;
        assert!(d.with_table(bad).is_err());
    }

    #[test]
    fn re_via_formula_zero_step() {
        let d = small_dist(0.8, 2.0, 2, 2, 0);
        let s = StepProfile::new(0, 2).unwrap();
        assert_eq!(d.re_via_formula(&s).unwrap(), 0.0);
    }

    #[test]
    fn re_via_formula_nonnegative_and_monotone_in_t() {
        let d = small_dist(0.8, 2.0, 2, 2, 0);
        let r1 = d
            .re_via_formula(&StepProfile::new(1, 2).unwrap())
            .unwrap();
        let r2 = d
            .re_via_formula(&StepProfile::new(2, 2).unwrap())
            .unwrap();
        assert!(r1 > 0.0);
        assert!(r2 > 3.0 * r1, "expected near-quadratic growth: {r1} {r2}");
        // Step box must fit.
        assert!(d
            .re_via_formula(&StepProfile::new(1, 4).unwrap())
            .is_err());
    }

    #[test]
    fn re_formula_symmetric_in_step_sign_for_zero_boundary() {
        let d = small_dist(0.9, 1.5, 2, 2, 0);
        let plus = d.re_via_formula(&StepProfile::new(1, 2).unwrap()).unwrap();
        let minus = d
            .re_via_formula(&StepProfile::new(-1, 2).unwrap())
            .unwrap();
        assert_abs_diff_eq!(plus, minus, epsilon = 1e-10);
    }

    #[test]
    fn max_cross_pair_moment_sane() {
        let d = small_dist(0.8, 1.5, 2, 2, 0);
        let s = StepProfile::new(1, 2).unwrap();
        let m = d.max_cross_pair_moment(&s).unwrap();
        assert!(m > 0.0);
        // Bounded by the largest possible |difference|^p on the support.
        assert!(m <= Potential::of(1.5).eval(4 * d.kmax() as i64));
    }

    #[test]
    fn dlr_residual_at_fp_floor_for_own_table() {
        for (beta, p, omega) in [(1.0, 2.0, 0i64), (0.6, 1.0, 1), (0.9, 1.5, -1)] {
            let d = small_dist(beta, p, 2, 2, omega);
            let sub = Window::new(-1, 1).unwrap();
            let res = d.dlr_residual(sub, DEFAULT_STATE_BUDGET).unwrap();
            assert!(res >= 0.0);
            assert!(
                res <= d.truncation_floor(),
                "residual {res} above floor {}",
                d.truncation_floor()
            );
        }
    }

    #[test]
    fn dlr_residual_detects_wrong_table() {
        let d = small_dist(0.9, 2.0, 1, 2, 0);
        let n = d.state_count();
        let u = d.with_table(vec![1.0 / n as f64; n]).unwrap();
        let res = u
            .dlr_residual(Window::new(-1, 1).unwrap(), DEFAULT_STATE_BUDGET)
            .unwrap();
        assert!(res > 1e-3, "uniform table should fail recomposition: {res}");
    }

    #[test]
    fn dlr_residual_rejects_improper_subwindow() {
        let d = small_dist(0.9, 2.0, 1, 1, 0);
        assert!(matches!(
            d.dlr_residual(d.window(), 1_000_000),
            Err(ExactError::SubwindowNotProper)
        ));
        assert!(matches!(
            d.dlr_residual(Window::new(-5, 5).unwrap(), 1_000_000),
            Err(ExactError::SubwindowNotProper)
        ));
    }

    #[test]
    fn csv_dump_shape() {
        let d = small_dist(1.0, 2.0, 1, 1, 0);
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "config_id,h_-1,h_0,h_1,probability");
        assert_eq!(lines.len(), 1 + d.state_count());
        assert!(lines[1].starts_with("0,-1,-1,-1,"));
    }
}
