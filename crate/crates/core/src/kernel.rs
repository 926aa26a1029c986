//! Power-law pair couplings and the certified tail sums built from them.
//!
//! A kernel assigns the weight J(k) = amplitude * k^(-alpha) to a pair of
//! sites at distance k >= 1; alpha > 1 keeps the total interaction of one
//! site summable. Tail sums sum(k >= m) J(k) cannot be evaluated exactly, so
//! [`CouplingKernel::tail_sum_certified`] returns a value together with a
//! rigorous error bound: terms are added explicitly up to a cutoff where
//! J drops below the requested precision and the remainder is bracketed by
//! the two integral comparisons
//!
//!   integral(K+1, inf) J(x) dx  <=  sum(k > K) J(k)  <=  integral(K, inf) J(x) dx.
//!
//! Reporting the bracket midpoint keeps the certified error at J(K)/2 or
//! better. The cross sum X(n), the total coupling between the centered box
//! {|i| < n} and its complement, reduces to a single tail sum through
//!
//!   X(n) = 2 * ( sum(k=1..2n-1) k * J(k) + (2n-1) * T(2n) ),
//!
//! which is how [`CouplingKernel::cross_sum`] evaluates it.

use thiserror::Error;

use crate::accum::KahanSum;

/// Refusing explicit summation beyond this many terms keeps a misconfigured
/// eps from turning a tail sum into an unbounded loop.
const MAX_EXPLICIT_TERMS: f64 = 4.0e9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("pair distance must be >= 1, self-coupling is excluded")]
    ZeroDistance,
    #[error("decay exponent must satisfy alpha > 1 for summable couplings, got {0}")]
    AlphaNotSummable(f64),
    #[error("amplitude must be positive and finite, got {0}")]
    BadAmplitude(f64),
    #[error("precision target must be positive and finite, got {0}")]
    BadEps(f64),
    #[error("box half-width must be >= 1")]
    EmptyBox,
    #[error("precision target needs about {0:.2e} explicit terms, beyond the supported range")]
    PrecisionTooTight(f64),
}

/// Functional form of the couplings. Only the pure power law is implemented;
/// the enum keeps call sites explicit about that assumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelForm {
    PurePower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingKernel {
    alpha: f64,
    amplitude: f64,
    form: KernelForm,
}

/// A tail sum with a rigorous two-sided error bound:
/// |value - exact| <= error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifiedTail {
    pub value: f64,
    pub error: f64,
}

impl CouplingKernel {
    /// Kernel J(k) = k^(-alpha).
    pub fn pure_power(alpha: f64) -> Result<Self, KernelError> {
        Self::with_amplitude(alpha, 1.0)
    }

    /// Kernel J(k) = amplitude * k^(-alpha).
    pub fn with_amplitude(alpha: f64, amplitude: f64) -> Result<Self, KernelError> {
        if !alpha.is_finite() || alpha <= 1.0 {
            return Err(KernelError::AlphaNotSummable(alpha));
        }
        if !amplitude.is_finite() || amplitude <= 0.0 {
            return Err(KernelError::BadAmplitude(amplitude));
        }
        Ok(Self {
            alpha,
            amplitude,
            form: KernelForm::PurePower,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn form(&self) -> KernelForm {
        self.form
    }

    /// Coupling at distance k. Distance zero is a domain error, not J = 0:
    /// the models never couple a site to itself.
    pub fn eval(&self, k: u64) -> Result<f64, KernelError> {
        if k == 0 {
            return Err(KernelError::ZeroDistance);
        }
        Ok(self.j(k))
    }

    #[inline]
    fn j(&self, k: u64) -> f64 {
        self.amplitude * (k as f64).powf(-self.alpha)
    }

    /// sum(k >= m) J(k) with certified error at most eps.
    pub fn tail_sum(&self, m: u64, eps: f64) -> Result<f64, KernelError> {
        self.tail_sum_certified(m, eps).map(|t| t.value)
    }

    /// sum(k >= m) J(k) together with a rigorous error bound (<= eps).
    pub fn tail_sum_certified(&self, m: u64, eps: f64) -> Result<CertifiedTail, KernelError> {
        if m == 0 {
            return Err(KernelError::ZeroDistance);
        }
        check_eps(eps)?;

        // Cutoff where J(k) <= eps; the bracket half-width below is then
        // at most J(cutoff)/2 <= eps/2.
        let needed = (self.amplitude / eps).powf(1.0 / self.alpha);
        if needed > MAX_EXPLICIT_TERMS {
            return Err(KernelError::PrecisionTooTight(needed));
        }
        let cutoff = (needed.ceil() as u64).max(m);

        // Ascending magnitudes: walk the explicit terms from the cutoff down.
        let mut partial = KahanSum::new();
        for k in (m..=cutoff).rev() {
            partial.add(self.j(k));
        }

        // Remainder bracket by integral comparison.
        let scale = self.amplitude / (self.alpha - 1.0);
        let lower = scale * ((cutoff + 1) as f64).powf(1.0 - self.alpha);
        let upper = scale * (cutoff as f64).powf(1.0 - self.alpha);

        let value = partial.value() + 0.5 * (lower + upper);
        let error = 0.5 * (upper - lower) + 8.0 * f64::EPSILON * value.abs();
        Ok(CertifiedTail { value, error })
    }

    /// Total coupling between the box {|i| < n} and its complement in Z,
    ///
    ///   X(n) = sum(|i| < n) sum(|j| >= n) J(|i - j|),
    ///
    /// with certified error at most eps. The summation over the ordered
    /// pairs of the two half-spaces collapses by translation counting to
    /// the closed form in the module docs.
    pub fn cross_sum(&self, n: u64, eps: f64) -> Result<f64, KernelError> {
        if n == 0 {
            return Err(KernelError::EmptyBox);
        }
        check_eps(eps)?;

        let d = 2 * n - 1;
        let mut near = KahanSum::new();
        for k in 1..=d {
            near.add(k as f64 * self.j(k));
        }
        // The far part contributes d * T(d + 1); splitting eps leaves half
        // the budget to the amplified tail error and half to rounding.
        let tail = self.tail_sum_certified(d + 1, eps / (4.0 * d as f64))?;
        Ok(2.0 * (near.value() + d as f64 * tail.value))
    }

    /// Couplings by distance, index d in 1..=max_d ([0] is a placeholder).
    pub(crate) fn distance_table(&self, max_d: u64) -> Vec<f64> {
        let mut t = Vec::with_capacity(max_d as usize + 1);
        t.push(0.0);
        for d in 1..=max_d {
            t.push(self.j(d));
        }
        t
    }

    /// Tail sums T(d) = sum(k >= d) J(k) for every d in 1..=max_d, each with
    /// certified error <= eps ([0] is a placeholder). One certified tail at
    /// the far end plus the backward recursion T(d) = T(d+1) + J(d) covers
    /// the whole range at the cost of a single cutoff scan.
    pub(crate) fn tail_table(&self, max_d: u64, eps: f64) -> Result<Vec<f64>, KernelError> {
        let far = self.tail_sum_certified(max_d + 1, eps)?;
        let mut t = vec![0.0; max_d as usize + 1];
        let mut acc = far.value;
        for d in (1..=max_d).rev() {
            acc += self.j(d);
            t[d as usize] = acc;
        }
        Ok(t)
    }
}

fn check_eps(eps: f64) -> Result<(), KernelError> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(KernelError::BadEps(eps));
    }
    Ok(())
}
