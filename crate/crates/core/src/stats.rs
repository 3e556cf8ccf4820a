//! Mergeable running moments.

use serde::{Deserialize, Serialize};

/// Count, mean and centred second moment (Welford / Chan merge).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = RunningStats::new();
        for x in iter {
            s.push(x);
        }
        s
    }
}

/// Mean and standard error of a ratio-type functional via the delta method.
///
/// `grad` is the gradient of the functional at the sample means and `cov`
/// the covariance matrix of the per-batch values (row-major, `k × k`).
pub fn delta_method_stderr(grad: &[f64], cov: &[f64], n: usize) -> f64 {
    let k = grad.len();
    let mut v = 0.0;
    for i in 0..k {
        for j in 0..k {
            v += grad[i] * cov[i * k + j] * grad[j];
        }
    }
    (v.max(0.0) / n as f64).sqrt()
}

/// Sample covariance matrix of equally long columns.
pub fn sample_covariance(columns: &[Vec<f64>]) -> Vec<f64> {
    let k = columns.len();
    let n = columns.first().map_or(0, |c| c.len());
    let means: Vec<f64> = columns.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let mut cov = vec![0.0; k * k];
    if n < 2 {
        return cov;
    }
    for i in 0..k {
        for j in i..k {
            let s: f64 = (0..n)
                .map(|t| (columns[i][t] - means[i]) * (columns[j][t] - means[j]))
                .sum();
            cov[i * k + j] = s / (n - 1) as f64;
            cov[j * k + i] = cov[i * k + j];
        }
    }
    cov
}

/// Empirical quantile (linear interpolation); sorts a copy.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = pos - lo as f64;
    v[lo] * (1.0 - t) + v[hi] * t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64 * 0.3 - 1.0).collect();
        let all: RunningStats = xs.iter().copied().collect();
        let mut a: RunningStats = xs[..40].iter().copied().collect();
        let b: RunningStats = xs[40..].iter().copied().collect();
        a.merge(&b);
        assert_eq!(a.count, all.count);
        assert!((a.mean - all.mean).abs() < 1e-12);
        assert!((a.variance() - all.variance()).abs() < 1e-12);
    }

    #[test]
    fn quantile_endpoints() {
        let v = [3.0, 1.0, 2.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 3.0);
        assert_eq!(quantile(&v, 0.5), 2.0);
    }
}
