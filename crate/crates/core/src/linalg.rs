//! Circularly-symmetric complex Gaussian vectors: covariance algebra,
//! Cholesky factorization with a jitter ladder, regression and sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{complex_normal, StreamRng};
use crate::stats::RunningStats;
use crate::C64;

/// Default condition-number cap for the given block in regression.
pub const DEFAULT_CONDITION_CAP: f64 = 1e12;

/// Default PSD tolerance on eigenvalues.
pub const DEFAULT_EPS_PSD: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("covariance is not positive semidefinite (all jitters up to {max_jitter:e} failed)")]
    NotPositiveSemidefinite { max_jitter: f64 },
    #[error("conditioning block is numerically singular (condition number {condition:e})")]
    SingularConditioning { condition: f64 },
    #[error("non-finite Monte Carlo sample")]
    NonFiniteSample,
    #[error("matrix is not Hermitian (max asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Hermitian `n × n` complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HermitianCov {
    n: usize,
    entries: Vec<C64>,
}

impl HermitianCov {
    /// Validates Hermitian symmetry to a relative tolerance and snaps the
    /// matrix to exact symmetry.
    pub fn new(n: usize, entries: Vec<C64>) -> Result<Self, LinalgError> {
        if entries.len() != n * n {
            return Err(LinalgError::Dimension(format!(
                "expected {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        let scale = entries.iter().map(|c| c.norm()).fold(1.0, f64::max);
        let mut asym: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                asym = asym.max((entries[i * n + j] - entries[j * n + i].conj()).norm());
            }
        }
        if asym > 1e-10 * scale {
            return Err(LinalgError::NotHermitian { asymmetry: asym });
        }
        Ok(Self::from_fn(n, |i, j| entries[i * n + j]))
    }

    /// Builds from the upper triangle; the lower triangle is the conjugate and
    /// the diagonal is taken real, so the result is Hermitian exactly.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut entries = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            entries[i * n + i] = C64::new(f(i, i).re, 0.0);
            for j in i + 1..n {
                let v = f(i, j);
                entries[i * n + j] = v;
                entries[j * n + i] = v.conj();
            }
        }
        Self { n, entries }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        Self::from_fn(diag.len(), |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    /// Principal submatrix on `idx` (in the given order).
    pub fn submatrix(&self, idx: &[usize]) -> HermitianCov {
        Self::from_fn(idx.len(), |i, j| self.get(idx[i], idx[j]))
    }

    pub fn max_abs_diff(&self, other: &HermitianCov) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn max_diag(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).re).fold(0.0, f64::max)
    }
}

/// Lower-triangular factor `L` with `L L* ≈ Σ + jitter·I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CholFactor {
    n: usize,
    lower: Vec<C64>,
    pub jitter_used: f64,
}

impl CholFactor {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.lower[i * self.n + j]
    }

    pub fn reconstruct(&self) -> HermitianCov {
        HermitianCov::from_fn(self.n, |i, j| {
            (0..=i.min(j)).map(|k| self.get(i, k) * self.get(j, k).conj()).sum()
        })
    }

    /// `out = L · xi`.
    #[inline]
    pub fn apply(&self, xi: &[C64], out: &mut [C64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i + 1];
            out[i] = row.iter().zip(xi).map(|(l, x)| l * x).sum();
        }
    }

    /// Solves `L y = b` in place.
    fn forward_solve(&self, b: &mut [C64]) {
        for i in 0..self.n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.get(i, k) * b[k];
            }
            b[i] = s / self.get(i, i);
        }
    }

    /// Solves `L* x = y` in place.
    fn backward_solve(&self, b: &mut [C64]) {
        for i in (0..self.n).rev() {
            let mut s = b[i];
            for k in i + 1..self.n {
                s -= self.get(k, i).conj() * b[k];
            }
            b[i] = s / self.get(i, i).conj();
        }
    }

    /// Solves `(L L*) x = b`.
    pub fn solve(&self, b: &mut [C64]) {
        self.forward_solve(b);
        self.backward_solve(b);
    }
}

fn try_cholesky(cov: &HermitianCov, jitter: f64) -> Option<CholFactor> {
    let n = cov.n;
    let mut lower = vec![C64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let mut d = cov.get(j, j).re + jitter;
        for k in 0..j {
            d -= lower[j * n + k].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let ljj = d.sqrt();
        lower[j * n + j] = C64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut s = cov.get(i, j);
            for k in 0..j {
                s -= lower[i * n + k] * lower[j * n + k].conj();
            }
            lower[i * n + j] = s / ljj;
        }
    }
    let f = CholFactor { n, lower, jitter_used: jitter };
    let err = f.reconstruct().max_abs_diff(cov);
    let tol = n as f64 * (1e-12 * cov.max_diag().max(1.0) + jitter);
    (err <= tol).then_some(f)
}

/// Jitter ladder `0, 1e-14, 1e-12, ...` up to `max_jitter`.
pub fn jitter_ladder(max_jitter: f64) -> Vec<f64> {
    let mut ladder = vec![0.0];
    let mut j = 1e-14;
    while j <= max_jitter * (1.0 + 1e-12) {
        ladder.push(j);
        j *= 100.0;
    }
    ladder
}

/// Cholesky factorization using the smallest successful jitter.
pub fn cholesky(cov: &HermitianCov, max_jitter: f64) -> Result<CholFactor, LinalgError> {
    jitter_ladder(max_jitter)
        .into_iter()
        .find_map(|j| try_cholesky(cov, j))
        .ok_or(LinalgError::NotPositiveSemidefinite { max_jitter })
}

/// One draw of a complex normal vector with the factor's covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexNormalSample {
    pub values: Vec<C64>,
    pub stream_id: u64,
}

pub fn sample_complex_normal(factor: &CholFactor, rng: &mut StreamRng) -> ComplexNormalSample {
    let xi: Vec<C64> = (0..factor.n).map(|_| complex_normal(rng)).collect();
    let mut values = vec![C64::new(0.0, 0.0); factor.n];
    factor.apply(&xi, &mut values);
    ComplexNormalSample { values, stream_id: rng.get_stream() }
}

/// Covariance of `target_idx` conditioned on `given_idx` being zero.
pub fn gaussian_regression(
    joint: &HermitianCov,
    target_idx: &[usize],
    given_idx: &[usize],
) -> Result<HermitianCov, LinalgError> {
    gaussian_regression_capped(joint, target_idx, given_idx, DEFAULT_CONDITION_CAP)
}

pub fn gaussian_regression_capped(
    joint: &HermitianCov,
    target_idx: &[usize],
    given_idx: &[usize],
    condition_cap: f64,
) -> Result<HermitianCov, LinalgError> {
    if let Some(&bad) = target_idx.iter().chain(given_idx).find(|&&i| i >= joint.n) {
        return Err(LinalgError::Dimension(format!("index {bad} out of range")));
    }
    let s22 = joint.submatrix(target_idx);
    if given_idx.is_empty() {
        return Ok(s22);
    }
    let s11 = joint.submatrix(given_idx);
    let chol = try_cholesky(&s11, 0.0).ok_or(LinalgError::SingularConditioning {
        condition: f64::INFINITY,
    })?;
    let condition = condition_number_1(&s11, &chol);
    if !(condition <= condition_cap) {
        return Err(LinalgError::SingularConditioning { condition });
    }
    let m = given_idx.len();
    // Columns of Σ₁₁⁻¹ Σ₁₂.
    let solved: Vec<Vec<C64>> = target_idx
        .iter()
        .map(|&t| {
            let mut col: Vec<C64> = given_idx.iter().map(|&g| joint.get(g, t)).collect();
            chol.solve(&mut col);
            col
        })
        .collect();
    Ok(HermitianCov::from_fn(target_idx.len(), |i, j| {
        let correction: C64 = (0..m)
            .map(|k| joint.get(target_idx[i], given_idx[k]) * solved[j][k])
            .sum();
        s22.get(i, j) - correction
    }))
}

/// Exact 1-norm condition number of a small Hermitian positive definite matrix.
fn condition_number_1(a: &HermitianCov, chol: &CholFactor) -> f64 {
    let n = a.n;
    let norm1 = |col: &dyn Fn(usize, usize) -> C64| {
        (0..n)
            .map(|j| (0..n).map(|i| col(i, j).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let mut inv = vec![C64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[j] = C64::new(1.0, 0.0);
        chol.solve(&mut e);
        for i in 0..n {
            inv[i * n + j] = e[i];
        }
    }
    norm1(&|i, j| a.get(i, j)) * norm1(&|i, j| inv[i * n + j])
}

/// Sample mean and standard error of `f` over `n` draws.
pub fn mc_expectation<F>(
    f: F,
    factor: &CholFactor,
    n: usize,
    rng: &mut StreamRng,
) -> Result<(f64, f64), LinalgError>
where
    F: Fn(&[C64]) -> f64,
{
    let dim = factor.n;
    let mut xi = vec![C64::new(0.0, 0.0); dim];
    let mut z = vec![C64::new(0.0, 0.0); dim];
    let mut acc = RunningStats::new();
    for _ in 0..n.max(2) {
        for x in xi.iter_mut() {
            *x = complex_normal(rng);
        }
        factor.apply(&xi, &mut z);
        let v = f(&z);
        if !v.is_finite() {
            return Err(LinalgError::NonFiniteSample);
        }
        acc.push(v);
    }
    Ok((acc.mean, acc.stderr()))
}

/// Draws from `N_C(0, LL*)` into `out`, using `xi` as scratch.
#[inline]
pub fn draw_into<R: Rng + ?Sized>(factor: &CholFactor, rng: &mut R, xi: &mut [C64], out: &mut [C64]) {
    for x in xi.iter_mut() {
        *x = complex_normal(rng);
    }
    factor.apply(xi, out);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn m0() -> HermitianCov {
        HermitianCov::new(
            3,
            vec![
                c(8.0 / 3.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 4.0),
                c(0.0, 0.0),
                c(6.0, 0.0),
                c(0.0, 0.0),
                c(0.0, -4.0),
                c(0.0, 0.0),
                c(30.0, 0.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn cholesky_identity() {
        let f = cholesky(&HermitianCov::identity(3), 0.0).unwrap();
        assert_eq!(f.jitter_used, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert_eq!(f.get(i, j), c(e, 0.0));
            }
        }
    }

    #[test]
    fn cholesky_diagonal() {
        let f = cholesky(&HermitianCov::diagonal(&[2.0, 6.0]), 0.0).unwrap();
        assert!((f.get(0, 0).re - 2f64.sqrt()).abs() < 1e-15);
        assert!((f.get(1, 1).re - 6f64.sqrt()).abs() < 1e-15);
        assert_eq!(f.get(1, 0), c(0.0, 0.0));
    }

    #[test]
    fn cholesky_limit_matrix() {
        let f = cholesky(&m0(), 1e-6).unwrap();
        assert_eq!(f.jitter_used, 0.0);
        assert!(f.reconstruct().max_abs_diff(&m0()) < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = HermitianCov::diagonal(&[1.0, -1.0]);
        assert!(matches!(cholesky(&a, 1e-6), Err(LinalgError::NotPositiveSemidefinite { .. })));
    }

    #[test]
    fn cholesky_singular_needs_jitter() {
        let a = HermitianCov::from_fn(2, |_, _| c(1.0, 0.0));
        let f = cholesky(&a, 1e-8).unwrap();
        assert!(f.jitter_used > 0.0);
        assert!(f.reconstruct().max_abs_diff(&a) < 2.0 * (1e-12 + f.jitter_used));
    }

    #[test]
    fn ladder_steps() {
        assert_eq!(jitter_ladder(0.0), vec![0.0]);
        let l = jitter_ladder(1e-10);
        assert_eq!(l.len(), 4);
        assert!((l[3] - 1e-10).abs() < 1e-24);
    }

    #[test]
    fn unit_variance_samples() {
        let f = cholesky(&HermitianCov::identity(1), 0.0).unwrap();
        let mut rng = stream(1, 0);
        let (m, se) = mc_expectation(|z| z[0].norm_sqr(), &f, 1_000_000, &mut rng).unwrap();
        assert!((m - 1.0).abs() < 5.0 * se, "{m} ± {se}");
    }

    #[test]
    fn independent_components() {
        let f = cholesky(&HermitianCov::diagonal(&[2.0, 6.0]), 0.0).unwrap();
        let mut rng = stream(2, 0);
        let (re, se_re) = mc_expectation(|z| (z[0] * z[1].conj()).re, &f, 1_000_000, &mut rng).unwrap();
        let (im, se_im) = mc_expectation(|z| (z[0] * z[1].conj()).im, &f, 1_000_000, &mut rng).unwrap();
        assert!(re.abs() < 5.0 * se_re && im.abs() < 5.0 * se_im);
    }

    #[test]
    fn limit_matrix_cross_moment() {
        let f = cholesky(&m0(), 0.0).unwrap();
        let mut rng = stream(3, 0);
        let (re, se_re) = mc_expectation(|z| (z[0] * z[2].conj()).re, &f, 1_000_000, &mut rng).unwrap();
        let (im, se_im) = mc_expectation(|z| (z[0] * z[2].conj()).im, &f, 1_000_000, &mut rng).unwrap();
        assert!(re.abs() < 5.0 * se_re, "{re} ± {se_re}");
        assert!((im - 4.0).abs() < 5.0 * se_im, "{im} ± {se_im}");
    }

    #[test]
    fn product_of_independent_moments() {
        let f = cholesky(&HermitianCov::identity(2), 0.0).unwrap();
        let mut rng = stream(4, 0);
        let (m, se) =
            mc_expectation(|z| z[0].norm_sqr() * z[1].norm_sqr(), &f, 1_000_000, &mut rng).unwrap();
        assert!((m - 1.0).abs() < 5.0 * se);
    }

    #[test]
    fn imaginary_cross_product_moment() {
        let f = cholesky(&HermitianCov::diagonal(&[8.0 / 3.0, 6.0]), 0.0).unwrap();
        let mut rng = stream(5, 0);
        let (m, se) =
            mc_expectation(|z| (z[1] * z[0].conj()).im.powi(2), &f, 1_000_000, &mut rng).unwrap();
        assert!((m - 8.0).abs() < 5.0 * se, "{m} ± {se}");
    }

    #[test]
    fn nonfinite_is_reported() {
        let f = cholesky(&HermitianCov::identity(1), 0.0).unwrap();
        let mut rng = stream(6, 0);
        assert_eq!(
            mc_expectation(|_| f64::NAN, &f, 10, &mut rng),
            Err(LinalgError::NonFiniteSample)
        );
    }

    #[test]
    fn regression_block_diagonal() {
        let joint = HermitianCov::from_fn(3, |i, j| match (i, j) {
            (0, 0) => c(2.0, 0.0),
            (1, 1) => c(3.0, 0.0),
            (2, 2) => c(5.0, 0.0),
            (1, 2) => c(0.5, 1.0),
            _ => c(0.0, 0.0),
        });
        let cond = gaussian_regression(&joint, &[1, 2], &[0]).unwrap();
        assert!(cond.max_abs_diff(&joint.submatrix(&[1, 2])) < 1e-15);
    }

    #[test]
    fn regression_two_by_two() {
        // Var(X | Y = 0) = 1 − |ρ|² for unit variances.
        let joint = HermitianCov::from_fn(2, |i, j| if i == j { c(1.0, 0.0) } else { c(0.3, 0.4) });
        let cond = gaussian_regression(&joint, &[0], &[1]).unwrap();
        assert!((cond.get(0, 0).re - 0.75).abs() < 1e-14);
    }

    #[test]
    fn regression_singular_given_block() {
        let joint = HermitianCov::from_fn(3, |_, _| c(1.0, 0.0));
        assert!(matches!(
            gaussian_regression(&joint, &[0], &[1, 2]),
            Err(LinalgError::SingularConditioning { .. })
        ));
    }

    #[test]
    fn not_hermitian_rejected() {
        let e = vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(1.0, 0.0)];
        assert!(matches!(HermitianCov::new(2, e), Err(LinalgError::NotHermitian { .. })));
    }

    #[test]
    fn sample_records_stream() {
        let f = cholesky(&HermitianCov::identity(2), 0.0).unwrap();
        let mut rng = stream(7, 42);
        let s = sample_complex_normal(&f, &mut rng);
        assert_eq!(s.stream_id, 42);
        assert_eq!(s.values.len(), 2);
    }
}
