//! Gaussian-window short-time Fourier transform of discretized complex white
//! noise and landmark extraction on the resulting grid.
//!
//! With `Vf(x, ξ) = (2/π)^{1/4} ∫ f(t) e^{−(t−x)²} e^{−2itξ} dt`, the
//! spectrogram of white noise at `(x, ξ)` has the law of the weighted GEF
//! amplitude at `x − iξ`.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{complex_normal, StreamRng};
use crate::C64;

/// Window half-width in units of the Gaussian's `e^{−t²}` scale.
pub const WINDOW_HALF_WIDTH: f64 = 6.0;

#[derive(Debug, Error)]
pub enum SpectrogramError {
    #[error("grid point x = {x} needs signal on [{lo}, {hi}], available [{t0}, {t1}]")]
    GridOutsideSignal { x: f64, lo: f64, hi: f64, t0: f64, t1: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Samples `f(t0 + j·dt)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSignal {
    pub dt: f64,
    pub t0: f64,
    pub samples: Vec<C64>,
    pub seed: Option<u64>,
}

impl NoiseSignal {
    pub fn new(t0: f64, dt: f64, samples: Vec<C64>) -> Self {
        Self { dt, t0, samples, seed: None }
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + (self.samples.len().max(1) - 1) as f64 * self.dt
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    /// Riemann sum of `|f|²` over the span.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() * self.dt
    }

    /// `a·self + b·other` on a common time grid.
    pub fn combine(&self, a: C64, other: &NoiseSignal, b: C64) -> Result<NoiseSignal, SpectrogramError> {
        if self.samples.len() != other.samples.len() || self.dt != other.dt || self.t0 != other.t0 {
            return Err(SpectrogramError::InvalidParameter("signals on different grids".into()));
        }
        let samples = self.samples.iter().zip(&other.samples).map(|(x, y)| a * x + b * y).collect();
        Ok(NoiseSignal::new(self.t0, self.dt, samples))
    }
}

/// White noise on `[t0, t0 + span]`: i.i.d. standard complex normals scaled
/// by `1/√dt`.
pub fn sample_white_noise(t0: f64, span: f64, dt: f64, rng: &mut StreamRng) -> Result<NoiseSignal, SpectrogramError> {
    if !(dt > 0.0 && dt <= 0.05) || !(span > 0.0) {
        return Err(SpectrogramError::InvalidParameter(format!("dt = {dt}, span = {span}")));
    }
    let n = (span / dt).round() as usize + 1;
    let scale = 1.0 / dt.sqrt();
    let samples = (0..n).map(|_| complex_normal(rng) * scale).collect();
    Ok(NoiseSignal { dt, t0, samples, seed: None })
}

/// Noise long enough for a grid over `[x0, x1]` with the window guard.
pub fn white_noise_for(x0: f64, x1: f64, dt: f64, rng: &mut StreamRng) -> Result<NoiseSignal, SpectrogramError> {
    let guard = WINDOW_HALF_WIDTH + 1.0;
    sample_white_noise(x0 - guard, x1 - x0 + 2.0 * guard, dt, rng)
}

/// Uniform rectangular grid `x0 + i·δ`, `ξ0 + k·δ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x0: f64,
    pub xi0: f64,
    pub nx: usize,
    pub nxi: usize,
    pub delta: f64,
}

impl GridSpec {
    pub fn square(x0: f64, xi0: f64, side: f64, delta: f64) -> Self {
        let n = (side / delta).round() as usize + 1;
        Self { x0, xi0, nx: n, nxi: n, delta }
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.delta
    }

    pub fn xi(&self, k: usize) -> f64 {
        self.xi0 + k as f64 * self.delta
    }

    /// Area represented by interior nodes (one cell each).
    pub fn interior_area(&self) -> f64 {
        (self.nx.saturating_sub(2) * self.nxi.saturating_sub(2)) as f64 * self.delta * self.delta
    }
}

/// `|Vf|` on a grid, stored column by column (`x` outer, `ξ` inner).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    /// True when the `(2/π)^{1/4}` prefactor is applied.
    pub normalized: bool,
}

impl SpectrogramGrid {
    pub fn from_fn(spec: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(spec.nx * spec.nxi);
        for i in 0..spec.nx {
            for k in 0..spec.nxi {
                values.push(f(spec.x(i), spec.xi(k)));
            }
        }
        Self { spec, values, normalized: true }
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.spec.nxi + k]
    }

    /// Mean of `|V|²` over all nodes.
    pub fn mean_power(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64
    }

    /// CSV matrix: first row `x` coordinates, first column `ξ`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), SpectrogramError> {
        writeln!(out, "# schema: geflab-spectrogram v1")?;
        let mut wtr = csv::WriterBuilder::new().from_writer(out);
        let mut header = vec!["xi\\x".to_string()];
        header.extend((0..self.spec.nx).map(|i| format!("{:?}", self.spec.x(i))));
        wtr.write_record(&header).map_err(csv_err)?;
        for k in 0..self.spec.nxi {
            let mut row = vec![format!("{:?}", self.spec.xi(k))];
            row.extend((0..self.spec.nx).map(|i| format!("{:?}", self.get(i, k))));
            wtr.write_record(&row).map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> SpectrogramError {
    SpectrogramError::Io(std::io::Error::other(e))
}

/// Complex STFT values on the grid (column-parallel direct summation).
pub fn stft_complex(f: &NoiseSignal, spec: &GridSpec) -> Result<Vec<C64>, SpectrogramError> {
    if !(spec.delta > 0.0) || spec.nx == 0 || spec.nxi == 0 {
        return Err(SpectrogramError::InvalidParameter("empty grid".into()));
    }
    for x in [spec.x(0), spec.x(spec.nx - 1)] {
        let (lo, hi) = (x - WINDOW_HALF_WIDTH, x + WINDOW_HALF_WIDTH);
        if lo < f.t0 - 1e-12 || hi > f.t_end() + 1e-12 {
            return Err(SpectrogramError::GridOutsideSignal { x, lo, hi, t0: f.t0, t1: f.t_end() });
        }
    }
    let norm = (2.0 / PI).powf(0.25) * f.dt;
    let cols: Vec<Vec<C64>> = (0..spec.nx)
        .into_par_iter()
        .map(|i| {
            let x = spec.x(i);
            let j0 = ((x - WINDOW_HALF_WIDTH - f.t0) / f.dt).ceil().max(0.0) as usize;
            let j1 = (((x + WINDOW_HALF_WIDTH - f.t0) / f.dt).floor() as usize).min(f.samples.len() - 1);
            let windowed: Vec<C64> = (j0..=j1)
                .map(|j| {
                    let u = f.time(j) - x;
                    f.samples[j] * (-u * u).exp()
                })
                .collect();
            (0..spec.nxi)
                .map(|k| {
                    let xi = spec.xi(k);
                    // e^{−2itξ} with t measured from x; the global phase
                    // e^{−2ixξ} is restored afterwards.
                    let step = C64::from_polar(1.0, -2.0 * f.dt * xi);
                    let mut ph = C64::from_polar(1.0, -2.0 * (f.time(j0) - x) * xi);
                    let mut acc = C64::new(0.0, 0.0);
                    for (n, w) in windowed.iter().enumerate() {
                        acc += w * ph;
                        ph *= step;
                        if n % 64 == 63 {
                            ph = C64::from_polar(1.0, -2.0 * (f.time(j0 + n + 1) - x) * xi);
                        }
                    }
                    acc * C64::from_polar(norm, -2.0 * x * xi)
                })
                .collect()
        })
        .collect();
    Ok(cols.into_iter().flatten().collect())
}

pub fn stft_gauss(f: &NoiseSignal, spec: &GridSpec) -> Result<SpectrogramGrid, SpectrogramError> {
    let v = stft_complex(f, spec)?;
    Ok(SpectrogramGrid { spec: *spec, values: v.iter().map(|c| c.norm()).collect(), normalized: true })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GridLandmarkKind {
    Minimum,
    Maximum,
    Saddle,
}

impl GridLandmarkKind {
    pub fn label(self) -> &'static str {
        match self {
            GridLandmarkKind::Minimum => "min",
            GridLandmarkKind::Maximum => "max",
            GridLandmarkKind::Saddle => "saddle",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridLandmark {
    pub x: f64,
    pub xi: f64,
    pub kind: GridLandmarkKind,
    pub value: f64,
}

impl GridLandmark {
    /// Position in the GEF plane, `x − iξ`.
    pub fn gef_point(&self) -> C64 {
        C64::new(self.x, -self.xi)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GridLandmarks {
    pub minima: Vec<GridLandmark>,
    pub maxima: Vec<GridLandmark>,
    pub saddles: Vec<GridLandmark>,
    /// Area covered by the interior nodes examined for extrema.
    pub area: f64,
    /// Area covered by the cells examined for saddles.
    pub cell_area: f64,
    /// Saddle cells whose quadratic fit has a negative Hessian determinant.
    pub indefinite_fits: usize,
}

impl GridLandmarks {
    pub fn counts(&self) -> [usize; 3] {
        [self.minima.len(), self.saddles.len(), self.maxima.len()]
    }

    /// `(count, area)` for minima, saddles and maxima.
    pub fn batch(&self) -> [(usize, f64); 3] {
        [
            (self.minima.len(), self.area),
            (self.saddles.len(), self.cell_area),
            (self.maxima.len(), self.area),
        ]
    }

    pub fn all(&self) -> impl Iterator<Item = &GridLandmark> {
        self.minima.iter().chain(&self.saddles).chain(&self.maxima)
    }
}

/// Least-squares quadratic `a + b u + c v + d u² + e uv + f v²` on the 3×3
/// stencil (unit spacing). The stencil design is orthogonal, so each
/// coefficient is a fixed weighted sum.
#[derive(Clone, Copy, Debug)]
struct Quad {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    e: f64,
    f: f64,
}

impl Quad {
    fn fit(s: &[[f64; 3]; 3]) -> Self {
        // s[du+1][dv+1]
        let mut sum = 0.0;
        let (mut su, mut sv, mut suu, mut svv, mut suv) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (iu, row) in s.iter().enumerate() {
            for (iv, &y) in row.iter().enumerate() {
                let u = iu as f64 - 1.0;
                let v = iv as f64 - 1.0;
                sum += y;
                su += u * y;
                sv += v * y;
                suu += u * u * y;
                svv += v * v * y;
                suv += u * v * y;
            }
        }
        let b = su / 6.0;
        let c = sv / 6.0;
        let e = suv / 4.0;
        // u² column is (2/3 centred): d = (suu − (2/3)·sum) / (6 − 4) ...
        let d = (suu - 2.0 * sum / 3.0) / 2.0;
        let f = (svv - 2.0 * sum / 3.0) / 2.0;
        let a = (sum - 6.0 * d - 6.0 * f) / 9.0;
        Quad { a, b, c, d, e, f }
    }

    /// Stationary point `(u, v)` and Hessian determinant `4df − e²`.
    fn stationary(&self) -> Option<(f64, f64, f64)> {
        let det = 4.0 * self.d * self.f - self.e * self.e;
        if det == 0.0 {
            return None;
        }
        let u = (-2.0 * self.f * self.b + self.e * self.c) / det;
        let v = (-2.0 * self.d * self.c + self.e * self.b) / det;
        Some((u, v, det))
    }

    fn eval(&self, u: f64, v: f64) -> f64 {
        self.a + self.b * u + self.c * v + self.d * u * u + self.e * u * v + self.f * v * v
    }
}

/// Minima and maxima by strict 8-neighbour comparison on interior nodes,
/// refined by a 3×3 quadratic fit (on `|V|²` for minima, which is smooth at
/// zeros). Saddles: cells between interior nodes around which the
/// central-difference gradient of `|V|²` winds by −1, placed at the
/// stationary point of the local quadratic fit, whose Hessian sign is
/// recorded in `indefinite_fits`.
pub fn extract_grid_landmarks(sg: &SpectrogramGrid) -> GridLandmarks {
    let spec = sg.spec;
    let mut out = GridLandmarks { area: spec.interior_area(), ..Default::default() };
    if spec.nx < 4 || spec.nxi < 4 {
        return out;
    }
    out.cell_area = ((spec.nx - 3) * (spec.nxi - 3)) as f64 * spec.delta * spec.delta;
    let stencil = |i: usize, k: usize, square: bool| -> [[f64; 3]; 3] {
        let mut s = [[0.0; 3]; 3];
        for (du, row) in s.iter_mut().enumerate() {
            for (dv, v) in row.iter_mut().enumerate() {
                let x = sg.get(i + du - 1, k + dv - 1);
                *v = if square { x * x } else { x };
            }
        }
        s
    };
    for i in 1..spec.nx - 1 {
        for k in 1..spec.nxi - 1 {
            let s = stencil(i, k, false);
            let c = s[1][1];
            let mut lower = true;
            let mut higher = true;
            for (du, row) in s.iter().enumerate() {
                for (dv, &v) in row.iter().enumerate() {
                    if du == 1 && dv == 1 {
                        continue;
                    }
                    lower &= c < v;
                    higher &= c > v;
                }
            }
            let place = |q: &Quad| -> (f64, f64, f64) {
                match q.stationary() {
                    Some((u, v, _)) if u.abs() <= 1.0 && v.abs() <= 1.0 => {
                        (spec.x(i) + u * spec.delta, spec.xi(k) + v * spec.delta, q.eval(u, v))
                    }
                    _ => (spec.x(i), spec.xi(k), q.a),
                }
            };
            if lower {
                let (x, xi, v) = place(&Quad::fit(&stencil(i, k, true)));
                out.minima.push(GridLandmark { x, xi, kind: GridLandmarkKind::Minimum, value: v.max(0.0).sqrt() });
            } else if higher {
                let (x, xi, v) = place(&Quad::fit(&s));
                out.maxima.push(GridLandmark { x, xi, kind: GridLandmarkKind::Maximum, value: v });
            }
        }
    }
    let p = |i: usize, k: usize| sg.get(i, k).powi(2);
    let grad = |i: usize, k: usize| -> f64 {
        let gx = p(i + 1, k) - p(i - 1, k);
        let gy = p(i, k + 1) - p(i, k - 1);
        gy.atan2(gx)
    };
    let wrap = |d: f64| {
        let t = std::f64::consts::TAU;
        d - t * (d / t).round()
    };
    for i in 1..spec.nx - 2 {
        for k in 1..spec.nxi - 2 {
            let corners = [grad(i, k), grad(i + 1, k), grad(i + 1, k + 1), grad(i, k + 1)];
            let turn: f64 = (0..4).map(|j| wrap(corners[(j + 1) % 4] - corners[j])).sum();
            let index = (turn / std::f64::consts::TAU).round() as i64;
            if index >= 0 {
                continue;
            }
            // Stencil on the corner nearest the fitted point.
            let q = Quad::fit(&stencil(i, k, true));
            let (u, v, det) = q.stationary().unwrap_or((0.5, 0.5, 0.0));
            let (u, v) = (u.clamp(0.0, 1.0), v.clamp(0.0, 1.0));
            if det < 0.0 {
                out.indefinite_fits += 1;
            }
            for _ in 0..(-index) {
                out.saddles.push(GridLandmark {
                    x: spec.x(i) + u * spec.delta,
                    xi: spec.xi(k) + v * spec.delta,
                    kind: GridLandmarkKind::Saddle,
                    value: q.eval(u, v).max(0.0).sqrt(),
                });
            }
        }
    }
    out
}

/// Landmark intensity per unit area with a standard error over batches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intensity {
    pub value: f64,
    pub stderr: f64,
}

impl Intensity {
    /// `batches` holds `(count, area)` per independent realization.
    pub fn from_batches(batches: &[(usize, f64)]) -> Option<Self> {
        let area: f64 = batches.iter().map(|b| b.1).sum();
        if batches.is_empty() || area <= 0.0 {
            return None;
        }
        let total: usize = batches.iter().map(|b| b.0).sum();
        let value = total as f64 / area;
        let stderr = if batches.len() > 1 {
            // Ratio estimator: per-batch residuals c_i − value·a_i.
            let n = batches.len() as f64;
            let ss: f64 = batches.iter().map(|&(c, a)| (c as f64 - value * a).powi(2)).sum();
            (ss / (n - 1.0) * n).sqrt() / area
        } else {
            // Poisson fallback for a single realization.
            (total as f64).sqrt() / area
        };
        Some(Self { value, stderr })
    }
}

/// Expected intensities of zeros, saddles and maxima: `(1, 4/3, 1/3)/π`.
pub fn expected_intensities() -> [f64; 3] {
    [1.0 / PI, 4.0 / (3.0 * PI), 1.0 / (3.0 * PI)]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub kind: String,
    pub noise: Intensity,
    pub gef: Intensity,
    pub expected: f64,
    /// `|noise − gef| / combined stderr`
    pub z_score: f64,
    pub flagged: bool,
}

/// Per-kind intensities of both pipelines. Each input is a list of
/// realizations with `(count, area)` for zeros (minima), saddles and maxima.
/// Noise positions enter the GEF plane through `x − iξ`, which preserves
/// areas, so intensities compare directly.
pub fn compare_to_gef(noise: &[[(usize, f64); 3]], gef: &[[(usize, f64); 3]]) -> Vec<ComparisonRow> {
    if noise.is_empty() || gef.is_empty() {
        return Vec::new();
    }
    let labels = ["zeros", "saddles", "maxima"];
    let expected = expected_intensities();
    (0..3)
        .filter_map(|j| {
            let n = Intensity::from_batches(&noise.iter().map(|b| b[j]).collect::<Vec<_>>())?;
            let g = Intensity::from_batches(&gef.iter().map(|b| b[j]).collect::<Vec<_>>())?;
            let se = (n.stderr.powi(2) + g.stderr.powi(2)).sqrt();
            let z = if se > 0.0 { (n.value - g.value).abs() / se } else { 0.0 };
            Some(ComparisonRow {
                kind: labels[j].to_string(),
                noise: n,
                gef: g,
                expected: expected[j],
                z_score: z,
                flagged: z > 3.0,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_relative_eq;

    #[test]
    fn spike_gives_gaussian_profile() {
        let n = 2001;
        let dt = 0.01;
        let mut samples = vec![C64::new(0.0, 0.0); n];
        let j0 = 1000;
        samples[j0] = C64::new(1.0, 0.0);
        let f = NoiseSignal::new(-10.0, dt, samples);
        let t0 = f.time(j0);
        let spec = GridSpec { x0: -2.0, xi0: 0.0, nx: 41, nxi: 1, delta: 0.1 };
        let g = stft_gauss(&f, &spec).unwrap();
        for i in 0..spec.nx {
            let x = spec.x(i);
            let want = (2.0 / PI).powf(0.25) * dt * (-(t0 - x).powi(2)).exp();
            assert_relative_eq!(g.get(i, 0), want, max_relative = 1e-12);
        }
    }

    #[test]
    fn tone_peaks_at_matching_frequency() {
        let dt = 0.01;
        let xi0 = 1.5;
        let samples: Vec<C64> = (0..3001).map(|j| C64::from_polar(1.0, 2.0 * (-15.0 + j as f64 * dt) * xi0)).collect();
        let f = NoiseSignal::new(-15.0, dt, samples);
        let spec = GridSpec { x0: 0.0, xi0: 0.0, nx: 1, nxi: 31, delta: 0.1 };
        let g = stft_gauss(&f, &spec).unwrap();
        // ∫e^{−t²}e^{2it(ξ₀−ξ)}dt = √π e^{−(ξ₀−ξ)²}
        for k in 0..spec.nxi {
            let xi = spec.xi(k);
            let want = (2.0 / PI).powf(0.25) * PI.sqrt() * (-(xi0 - xi).powi(2)).exp();
            assert_relative_eq!(g.get(0, k), want, epsilon = 1e-9);
        }
    }

    #[test]
    fn grid_outside_signal() {
        let mut rng = stream(1, 0);
        let f = sample_white_noise(0.0, 10.0, 0.02, &mut rng).unwrap();
        let spec = GridSpec { x0: 2.0, xi0: 0.0, nx: 3, nxi: 3, delta: 0.1 };
        assert!(matches!(stft_gauss(&f, &spec), Err(SpectrogramError::GridOutsideSignal { .. })));
    }

    #[test]
    fn noise_variance_and_seed() {
        let f = sample_white_noise(0.0, 400.0, 0.02, &mut stream(9, 1)).unwrap();
        let g = sample_white_noise(0.0, 400.0, 0.02, &mut stream(9, 1)).unwrap();
        assert_eq!(f, g);
        let v: crate::stats::RunningStats = f.samples.iter().map(|s| s.norm_sqr() * f.dt).collect();
        assert!((v.mean - 1.0).abs() < 5.0 * v.stderr());
        assert!(sample_white_noise(0.0, 1.0, 0.1, &mut stream(9, 1)).is_err());
    }

    #[test]
    fn paraboloid_has_single_minimum() {
        let spec = GridSpec::square(-1.0, -1.0, 2.0, 0.1);
        let g = SpectrogramGrid::from_fn(spec, |x, xi| (x - 0.03).powi(2) + (xi + 0.02).powi(2));
        let l = extract_grid_landmarks(&g);
        assert_eq!(l.minima.len(), 1);
        assert!(l.maxima.is_empty() && l.saddles.is_empty());
        // |V|² fit is quartic here, so refinement is approximate.
        assert!((l.minima[0].x - 0.03).abs() < 0.05 && (l.minima[0].xi + 0.02).abs() < 0.05);
    }

    #[test]
    fn quadratic_saddle_is_located() {
        let spec = GridSpec::square(-1.0, -1.0, 2.0, 0.1);
        let g = SpectrogramGrid::from_fn(spec, |x, xi| 5.0 + (x - 0.02).powi(2) - (xi - 0.01).powi(2));
        let l = extract_grid_landmarks(&g);
        assert_eq!(l.saddles.len(), 1);
        assert_eq!(l.indefinite_fits, 1);
        assert!((l.saddles[0].x - 0.02).abs() < 0.01);
        assert!((l.saddles[0].xi - 0.01).abs() < 0.01);
    }

    #[test]
    fn empty_comparison() {
        assert!(compare_to_gef(&[], &[[(1, 1.0); 3]]).is_empty());
    }
}
