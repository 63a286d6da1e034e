//! Small statistics helpers for Monte Carlo estimators.

use serde::{Deserialize, Serialize};

/// Binomial proportion with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub hits: u64,
    pub reps: u64,
}

impl Proportion {
    pub fn new(hits: u64, reps: u64) -> Self {
        assert!(hits <= reps);
        Self { hits, reps }
    }

    pub fn estimate(&self) -> f64 {
        if self.reps == 0 {
            return f64::NAN;
        }
        self.hits as f64 / self.reps as f64
    }

    pub fn stderr(&self) -> f64 {
        let p = self.estimate();
        (p * (1.0 - p) / self.reps as f64).sqrt()
    }

    pub fn merge(self, other: Proportion) -> Proportion {
        Proportion::new(self.hits + other.hits, self.reps + other.reps)
    }
}

/// Streaming mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.m2 / (self.n - 1) as f64
    }

    pub fn stderr(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }
}

impl Moments {
    /// Combines partial moments (Chan et al.), in the given order.
    pub fn merge(&self, o: &Moments) -> Moments {
        if self.n == 0 {
            return *o;
        }
        if o.n == 0 {
            return *self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        let mean = self.mean + d * o.n as f64 / n as f64;
        let m2 = self.m2 + o.m2 + d * d * self.n as f64 * o.n as f64 / n as f64;
        Moments { n, mean, m2 }
    }

    pub fn merge_all(parts: &[Moments]) -> Moments {
        parts.iter().fold(Moments::new(), |acc, m| acc.merge(m))
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::new();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Standard error of a pooled mean over equally sized clusters, from the
/// spread of the cluster means. `None` with fewer than two clusters.
pub fn cluster_stderr(cluster_means: &[f64]) -> Option<f64> {
    if cluster_means.len() < 2 {
        return None;
    }
    let m: Moments = cluster_means.iter().copied().collect();
    Some(m.stderr())
}

/// One-sample Kolmogorov–Smirnov distance of `samples` to `cdf`.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n)
                .abs()
                .max((((i + 1) as f64) / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Pearson chi-square statistic for observed counts against expected counts.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum()
}
