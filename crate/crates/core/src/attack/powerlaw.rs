//! Likelihood-ratio test for whether a perturbed degree sequence still looks
//! like it comes from the same power law as the original one.
//!
//! Only degrees `≥ D_MIN` enter the fit. For a sample of `n` such degrees
//! with `S = Σ ln d`, the approximate maximum-likelihood exponent is
//! `α = 1 + n / (S − n·ln(D_MIN − ½))` and the log-likelihood is
//! `n·ln α + n·α·ln D_MIN − (α + 1)·S`.

use crate::graph::Graph;

pub const D_MIN: usize = 2;

/// Nettack's default cutoff on the test statistic.
pub const DEFAULT_CUTOFF: f64 = 0.004;

/// Sufficient statistics of a degree sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DegreeStats {
    /// number of degrees `≥ D_MIN`
    pub n: f64,
    /// sum of their logarithms
    pub log_sum: f64,
}

impl DegreeStats {
    pub fn from_degrees(degrees: impl IntoIterator<Item = usize>) -> Self {
        let mut s = DegreeStats::default();
        for d in degrees {
            s.add(d);
        }
        s
    }

    pub fn of_graph(g: &Graph) -> Self {
        Self::from_degrees((0..g.n_nodes()).map(|u| g.degree(u)))
    }

    fn add(&mut self, d: usize) {
        if d >= D_MIN {
            self.n += 1.0;
            self.log_sum += (d as f64).ln();
        }
    }

    fn remove(&mut self, d: usize) {
        if d >= D_MIN {
            self.n -= 1.0;
            self.log_sum -= (d as f64).ln();
        }
    }

    /// Statistics after one node's degree changes from `old` to `new`.
    pub fn with_change(mut self, old: usize, new: usize) -> Self {
        self.remove(old);
        self.add(new);
        self
    }

    pub fn alpha(&self) -> f64 {
        1.0 + self.n / (self.log_sum - self.n * (D_MIN as f64 - 0.5).ln())
    }

    pub fn log_likelihood(&self) -> f64 {
        if self.n == 0.0 {
            return 0.0;
        }
        let a = self.alpha();
        self.n * a.ln() + self.n * a * (D_MIN as f64).ln() - (a + 1.0) * self.log_sum
    }

    fn combined(&self, other: &DegreeStats) -> DegreeStats {
        DegreeStats {
            n: self.n + other.n,
            log_sum: self.log_sum + other.log_sum,
        }
    }
}

/// `−2·ℓ(original ∪ perturbed) + 2·(ℓ(original) + ℓ(perturbed))`, where the
/// pooled sample is fit with a single exponent.
pub fn likelihood_ratio(original: &DegreeStats, perturbed: &DegreeStats) -> f64 {
    -2.0 * original.combined(perturbed).log_likelihood()
        + 2.0 * (original.log_likelihood() + perturbed.log_likelihood())
}
