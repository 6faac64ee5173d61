//! Mergeable running moments.

/// Count, mean and centred second moment; merges with Chan's formula.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&self, other: &RunningStats) -> RunningStats {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        RunningStats {
            n,
            mean: self.mean + delta * w,
            m2: self.m2 + other.m2 + delta * delta * self.n as f64 * w,
        }
    }

    /// Deterministic pairwise tree over the slice order.
    pub fn from_slice(xs: &[f64]) -> RunningStats {
        if xs.len() <= 32 {
            let mut s = RunningStats::new();
            for &x in xs {
                s.push(x);
            }
            return s;
        }
        let (l, r) = xs.split_at(xs.len() / 2);
        RunningStats::from_slice(l).merge(&RunningStats::from_slice(r))
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matches_two_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.01).collect();
        let s = RunningStats::from_slice(&xs);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((s.mean() - mean).abs() < 1e-13);
        assert!((s.variance() - var).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn merge_is_layout_independent(xs in proptest::collection::vec(-10.0f64..10.0, 2..400),
                                       cut in 0usize..400) {
            let cut = cut % xs.len();
            let whole = RunningStats::from_slice(&xs);
            let (a, b) = xs.split_at(cut);
            let mut sa = RunningStats::new();
            a.iter().for_each(|&x| sa.push(x));
            let merged = sa.merge(&RunningStats::from_slice(b));
            prop_assert_eq!(merged.count(), whole.count());
            prop_assert!((merged.mean() - whole.mean()).abs() <= 1e-14 * (1.0 + whole.mean().abs()));
            prop_assert!((merged.stderr() - whole.stderr()).abs() <= 1e-14 * (1.0 + whole.stderr()));
        }
    }
}
