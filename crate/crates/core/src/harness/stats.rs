//! Binomial and sample-mean estimates with confidence intervals.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval at normal quantile `z`.
pub fn wilson(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // clamp so the interval always contains p_hat despite rounding
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

/// A Bernoulli proportion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub trials: u64,
    pub successes: u64,
}

impl Proportion {
    pub fn new(successes: u64, trials: u64) -> Self {
        assert!(successes <= trials);
        Self { trials, successes }
    }

    pub fn p_hat(&self) -> f64 {
        if self.trials == 0 {
            return f64::NAN;
        }
        self.successes as f64 / self.trials as f64
    }

    /// Binomial standard error `√(p(1−p)/n)`.
    pub fn sigma(&self) -> f64 {
        let p = self.p_hat();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    pub fn wilson95(&self) -> (f64, f64) {
        wilson(self.successes, self.trials, Z95)
    }

    /// Relative half-width of the Wilson interval.
    pub fn rel_half_width(&self) -> f64 {
        let (lo, hi) = self.wilson95();
        0.5 * (hi - lo) / self.p_hat()
    }

    pub fn merge(self, other: Self) -> Self {
        Self { trials: self.trials + other.trials, successes: self.successes + other.successes }
    }
}

/// A sample mean with its standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanAcc {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl MeanAcc {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(self, o: Self) -> Self {
        Self { n: self.n + o.n, sum: self.sum + o.sum, sum_sq: self.sum_sq + o.sum_sq }
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        let n = self.n as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }

    pub fn summary(&self) -> MeanEstimate {
        let se = self.std_error();
        let m = self.mean();
        MeanEstimate { n: self.n, mean: m, std_error: se, ci_low: m - Z95 * se, ci_high: m + Z95 * se }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub n: u64,
    pub mean: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// A positive quantity with a log-normal CI from a delta-method variance of its log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub value: f64,
    pub log_sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl RatioEstimate {
    pub fn from_log(value: f64, log_var: f64) -> Self {
        let sd = log_var.max(0.0).sqrt();
        Self { value, log_sd: sd, ci_low: value * (-Z95 * sd).exp(), ci_high: value * (Z95 * sd).exp() }
    }

    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.value >= lo && self.value <= hi
    }
}

/// `Var(ln p̂) ≈ (1−p)/(n p)`.
pub fn log_var(p: &Proportion) -> f64 {
    let ph = p.p_hat();
    (1.0 - ph) / (p.trials as f64 * ph)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_known_values() {
        let (lo, hi) = wilson(50, 100, Z95);
        assert!((lo - 0.403_831_4).abs() < 1e-6 && (hi - 0.596_168_6).abs() < 1e-6);
        let (lo, hi) = wilson(0, 10, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.2 && hi < 0.35);
        let (lo, hi) = wilson(10, 10, Z95);
        assert_eq!(hi, 1.0);
        assert!(lo < 1.0);
    }

    #[test]
    fn wilson_coverage() {
        // exact binomial coverage, summed in log space
        for (n, p, want) in [(400u64, 0.01, 0.931_812), (400, 0.5, 0.948_960), (1000, 0.01, 0.963_536), (1000, 0.05, 0.950_417)] {
            let mut ln_choose = 0.0f64;
            let mut cov = 0.0;
            for s in 0..=n {
                if s > 0 {
                    ln_choose += ((n - s + 1) as f64).ln() - (s as f64).ln();
                }
                let (lo, hi) = wilson(s, n, Z95);
                if lo <= p && p <= hi {
                    cov += (ln_choose + s as f64 * p.ln() + (n - s) as f64 * (1.0 - p).ln()).exp();
                }
            }
            assert!((cov - want).abs() < 1e-5, "n={n} p={p}: {cov}");
            assert!(cov > 0.93);
        }
    }

    #[test]
    fn wilson_coverage_simulated() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(11);
        for p in [0.01, 0.5] {
            let (reps, n) = (10_000, 1000);
            let mut covered = 0;
            for _ in 0..reps {
                let s = (0..n).filter(|_| rng.random::<f64>() < p).count() as u64;
                let (lo, hi) = wilson(s, n, Z95);
                covered += (lo <= p && p <= hi) as u32;
            }
            assert!(covered as f64 / reps as f64 >= 0.93, "p={p}: {covered}");
        }
    }

    #[test]
    fn mean_acc() {
        let mut m = MeanAcc::default();
        for x in [1.0, 2.0, 3.0, 4.0] {
            m.push(x);
        }
        assert_eq!(m.mean(), 2.5);
        assert!((m.variance() - 5.0 / 3.0).abs() < 1e-12);
    }
}
