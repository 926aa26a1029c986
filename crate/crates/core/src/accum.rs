//! Compensated accumulation for the long sums used throughout the crate.
//!
//! Tail sums run over millions of terms and the enumeration oracle reduces
//! over tens of millions of states; plain f64 accumulation would eat several
//! digits of the certified error budgets. Neumaier's variant of Kahan
//! summation keeps the rounding error at a few ulps of the result
//! independently of the term count.

#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
