//! Two-point Kac–Rice intensities by Gaussian conditioning and Monte Carlo,
//! their radial integration over disks, and the closed-form oracles used to
//! check them.
//!
//! Conditioned draws come from one of two independent routes:
//! [`CovarianceSampler`] regresses the exact kernel covariance and samples
//! through a Cholesky factor, while [`ProjectionSampler`] projects the i.i.d.
//! series coefficients onto the null space of the conditioning functionals.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::truncation_for;
use crate::kernel::{eval_cov, DerivDescriptor, KernelError};
use crate::linalg::{cholesky, gaussian_regression, CholFactor, HermitianCov, LinalgError};
use crate::rng::{complex_normal, stream, task_id, StreamRng};
use crate::stats::{quantile, RunningStats};
use crate::C64;

/// Conditioning floor for the symmetric pair `±ir`.
pub const R_MIN: f64 = 1e-4;
/// Largest diagonal jitter accepted when factoring a conditioned covariance.
pub const MAX_JITTER: f64 = 1e-10;

pub const TAG_SIGMA: u32 = 10;
pub const TAG_ZC: u32 = 11;
pub const TAG_PROXY: u32 = 12;
pub const TAG_PHI: u32 = 13;
pub const TAG_CLOSED: u32 = 14;
pub const TAG_SMALLBALL: u32 = 15;

const CHUNK: usize = 1 << 15;

#[derive(Debug, Error)]
pub enum KacRiceError {
    #[error("points coincide; the two-point intensity is undefined on the diagonal")]
    DegenerateDiagonal,
    #[error("r = {r} is below the conditioning floor {r_min}")]
    SingularConditioning { r: f64, r_min: f64 },
    #[error("argument {0} outside the supported range")]
    OutOfRange(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Number of draws and the master seed of a Monte Carlo evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub draws: usize,
    pub seed: u64,
}

impl Budget {
    pub fn new(draws: usize, seed: u64) -> Self {
        Self { draws, seed }
    }
}

/// Draws are split into fixed chunks, each with its own stream keyed by
/// `(tag, key, chunk)`, so results do not depend on the thread count.
fn run_mc<const K: usize, F>(budget: &Budget, tag: u32, key: u64, f: F) -> [RunningStats; K]
where
    F: Fn(&mut StreamRng) -> [f64; K] + Sync,
{
    let chunks = budget.draws.div_ceil(CHUNK).max(1);
    let parts: Vec<[RunningStats; K]> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(budget.seed, task_id(tag, (key << 24) ^ c as u64));
            let n = CHUNK.min(budget.draws.saturating_sub(c * CHUNK)).max(1);
            let mut acc = [RunningStats::new(); K];
            for _ in 0..n {
                let v = f(&mut rng);
                for (a, x) in acc.iter_mut().zip(v) {
                    a.push(x);
                }
            }
            acc
        })
        .collect();
    let mut out = [RunningStats::new(); K];
    for p in &parts {
        for (o, a) in out.iter_mut().zip(p) {
            o.merge(a);
        }
    }
    out
}

fn mean_se(s: &RunningStats) -> (f64, f64) {
    (s.mean, s.stderr())
}

/// `jac f = −Im(f^{(1,0)} · conj f^{(0,1)})`
#[inline]
pub fn jac_from_real(f10: C64, f01: C64) -> f64 {
    -(f10 * f01.conj()).im
}

/// Source of conditioned Gaussian vectors.
pub trait ConditionedSampler: Sync {
    fn dim(&self) -> usize;
    /// Writes one draw into `out`; `scratch` is resized as needed.
    fn draw(&self, rng: &mut StreamRng, scratch: &mut Vec<C64>, out: &mut [C64]);
    /// Covariance of the conditioned vector implied by the sampler.
    fn covariance(&self) -> HermitianCov;
}

/// Regression on the kernel covariance, then a jittered Cholesky factor.
#[derive(Clone, Debug)]
pub struct CovarianceSampler {
    cov: HermitianCov,
    factor: CholFactor,
}

impl CovarianceSampler {
    pub fn new(given: &[DerivDescriptor], targets: &[DerivDescriptor]) -> Result<Self, KacRiceError> {
        let all: Vec<DerivDescriptor> = given.iter().chain(targets).cloned().collect();
        let joint = eval_cov(&all);
        let g: Vec<usize> = (0..given.len()).collect();
        let t: Vec<usize> = (given.len()..all.len()).collect();
        let cov = gaussian_regression(&joint, &t, &g)?;
        let factor = cholesky(&cov, MAX_JITTER)?;
        Ok(Self { cov, factor })
    }
}

impl ConditionedSampler for CovarianceSampler {
    fn dim(&self) -> usize {
        self.cov.n()
    }

    fn draw(&self, rng: &mut StreamRng, scratch: &mut Vec<C64>, out: &mut [C64]) {
        scratch.resize(self.cov.n(), C64::new(0.0, 0.0));
        crate::linalg::draw_into(&self.factor, rng, scratch, out);
    }

    fn covariance(&self) -> HermitianCov {
        self.cov.clone()
    }
}

/// `T' = T − T C* (C C*)⁻¹ C` on truncated coefficient rows; a draw is
/// `T' ξ` with i.i.d. standard `ξ`.
#[derive(Clone, Debug)]
pub struct ProjectionSampler {
    rows: Vec<Vec<C64>>,
    len: usize,
}

impl ProjectionSampler {
    pub fn new(given: &[DerivDescriptor], targets: &[DerivDescriptor]) -> Result<Self, KacRiceError> {
        let reach = given.iter().chain(targets).map(|d| d.point.norm()).fold(0.0, f64::max);
        let len = truncation_for(reach.max(1.0)) + 20;
        Self::with_len(given, targets, len)
    }

    pub fn with_len(given: &[DerivDescriptor], targets: &[DerivDescriptor], len: usize) -> Result<Self, KacRiceError> {
        let c: Vec<Vec<C64>> = given.iter().map(|d| d.coefficient_row(len)).collect();
        let t: Vec<Vec<C64>> = targets.iter().map(|d| d.coefficient_row(len)).collect();
        let dot = |a: &[C64], b: &[C64]| -> C64 { a.iter().zip(b).map(|(x, y)| x * y.conj()).sum() };
        let m = c.len();
        if m == 0 {
            return Ok(Self { rows: t, len });
        }
        let gram = HermitianCov::from_fn(m, |i, j| dot(&c[i], &c[j]));
        let chol = cholesky(&gram, 0.0)?;
        let rows = t
            .iter()
            .map(|row| {
                // Coefficients y solving (C C*) y = C row*, conjugated back.
                let mut y: Vec<C64> = c.iter().map(|ci| dot(ci, row)).collect();
                chol.solve(&mut y);
                let mut out = row.clone();
                for (k, ck) in c.iter().enumerate() {
                    let yk = y[k].conj();
                    for (o, x) in out.iter_mut().zip(ck) {
                        *o -= yk * x;
                    }
                }
                out
            })
            .collect();
        Ok(Self { rows, len })
    }
}

impl ConditionedSampler for ProjectionSampler {
    fn dim(&self) -> usize {
        self.rows.len()
    }

    fn draw(&self, rng: &mut StreamRng, scratch: &mut Vec<C64>, out: &mut [C64]) {
        scratch.resize(self.len, C64::new(0.0, 0.0));
        for x in scratch.iter_mut() {
            *x = complex_normal(rng);
        }
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().zip(scratch.iter()).map(|(a, b)| a * b).sum();
        }
    }

    fn covariance(&self) -> HermitianCov {
        HermitianCov::from_fn(self.rows.len(), |i, j| {
            self.rows[i].iter().zip(&self.rows[j]).map(|(a, b)| a * b.conj()).sum()
        })
    }
}

/// Which conditioned-sampling route to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Route {
    #[default]
    Covariance,
    Projection,
}

fn make_sampler(
    route: Route,
    given: &[DerivDescriptor],
    targets: &[DerivDescriptor],
) -> Result<Box<dyn ConditionedSampler>, KacRiceError> {
    Ok(match route {
        Route::Covariance => Box::new(CovarianceSampler::new(given, targets)?),
        Route::Projection => Box::new(ProjectionSampler::new(given, targets)?),
    })
}

/// Pair family of a two-point intensity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// Two critical points: conditioning on `F(z) = F(w) = 0`.
    CritCrit,
    /// A zero of `G` at `z` and a critical point at `w`.
    ZeroCrit,
}

/// Closed-form determinant of the conditioning covariance.
pub fn pair_denominator(z: C64, w: C64, family: Family) -> Result<f64, KacRiceError> {
    let s2 = (z - w).norm_sqr();
    let scale = (z.norm_sqr() + w.norm_sqr()).exp();
    match family {
        Family::CritCrit => {
            if s2 == 0.0 {
                return Err(KacRiceError::DegenerateDiagonal);
            }
            Ok(scale * cc_bracket(s2))
        }
        Family::ZeroCrit => Ok(scale * (1.0 - (-s2).exp() * s2)),
    }
}

/// `1 − e^{−s²}(1 − s²)²`, with a series near 0 to avoid cancellation.
fn cc_bracket(s2: f64) -> f64 {
    if s2 < 1e-3 {
        // 3s² − 7/2 s⁴ + 13/6 s⁶ − 25/24 s⁸
        s2 * (3.0 + s2 * (-3.5 + s2 * (13.0 / 6.0 - s2 * 25.0 / 24.0)))
    } else {
        1.0 - (-s2).exp() * (1.0 - s2).powi(2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SigmaKind {
    All,
    Plus,
    Minus,
    /// One positive and one negative Jacobian, in either order.
    Mixed,
}

impl SigmaKind {
    pub fn label(self) -> &'static str {
        match self {
            SigmaKind::All => "c",
            SigmaKind::Plus => "c+",
            SigmaKind::Minus => "c-",
            SigmaKind::Mixed => "mixed",
        }
    }
}

/// All four indicator-weighted conditional expectations from common draws.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaSet {
    pub all: (f64, f64),
    pub plus: (f64, f64),
    pub minus: (f64, f64),
    pub mixed: (f64, f64),
    pub draws: usize,
}

impl SigmaSet {
    pub fn get(&self, kind: SigmaKind) -> (f64, f64) {
        match kind {
            SigmaKind::All => self.all,
            SigmaKind::Plus => self.plus,
            SigmaKind::Minus => self.minus,
            SigmaKind::Mixed => self.mixed,
        }
    }
}

fn cc_descriptors(z: C64, w: C64) -> Result<(Vec<DerivDescriptor>, Vec<DerivDescriptor>), KacRiceError> {
    let given = vec![DerivDescriptor::f(z), DerivDescriptor::f(w)];
    let targets = vec![
        DerivDescriptor::f_real(1, 0, z)?,
        DerivDescriptor::f_real(0, 1, z)?,
        DerivDescriptor::f_real(1, 0, w)?,
        DerivDescriptor::f_real(0, 1, w)?,
    ];
    Ok((given, targets))
}

/// `E[|jac F(z)·jac F(w)|·indicator | F(z) = F(w) = 0]` for every sign
/// pattern. The stream is keyed by `key` only, so calls sharing a key use
/// common random numbers.
pub fn sigma_pair(z: C64, w: C64, budget: &Budget, route: Route, key: u64) -> Result<SigmaSet, KacRiceError> {
    if z == w {
        return Err(KacRiceError::DegenerateDiagonal);
    }
    let (given, targets) = cc_descriptors(z, w)?;
    let sampler = make_sampler(route, &given, &targets)?;
    let acc = run_mc::<4, _>(budget, TAG_SIGMA, key, |rng| {
        let mut scratch = Vec::new();
        let mut x = [C64::new(0.0, 0.0); 4];
        sampler.draw(rng, &mut scratch, &mut x);
        let j1 = jac_from_real(x[0], x[1]);
        let j2 = jac_from_real(x[2], x[3]);
        let p = (j1 * j2).abs();
        let (pp, mm) = (j1 > 0.0 && j2 > 0.0, j1 < 0.0 && j2 < 0.0);
        let mixed = !pp && !mm;
        [p, if pp { p } else { 0.0 }, if mm { p } else { 0.0 }, if mixed { p } else { 0.0 }]
    });
    Ok(SigmaSet {
        all: mean_se(&acc[0]),
        plus: mean_se(&acc[1]),
        minus: mean_se(&acc[2]),
        mixed: mean_se(&acc[3]),
        draws: budget.draws,
    })
}

/// `σ(r)` for the symmetric pair `±ir`.
pub fn sigma_all(r: f64, budget: &Budget, route: Route) -> Result<SigmaSet, KacRiceError> {
    if r < R_MIN {
        return Err(KacRiceError::SingularConditioning { r, r_min: R_MIN });
    }
    sigma_pair(C64::new(0.0, r), C64::new(0.0, -r), budget, route, 0)
}

pub fn sigma(kind: SigmaKind, r: f64, budget: &Budget) -> Result<(f64, f64), KacRiceError> {
    Ok(sigma_all(r, budget, Route::Covariance)?.get(kind))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairIntensityKind {
    CritCrit,
    PlusPlus,
    MinusMinus,
    /// Ordered pairs with a saddle at one point and a maximum at the other.
    PlusMinus,
    ZeroPlus,
    ZeroMinus,
}

impl PairIntensityKind {
    pub const ALL: [PairIntensityKind; 6] = [
        PairIntensityKind::CritCrit,
        PairIntensityKind::PlusPlus,
        PairIntensityKind::MinusMinus,
        PairIntensityKind::PlusMinus,
        PairIntensityKind::ZeroPlus,
        PairIntensityKind::ZeroMinus,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PairIntensityKind::CritCrit => "cc",
            PairIntensityKind::PlusPlus => "c+c+",
            PairIntensityKind::MinusMinus => "c-c-",
            PairIntensityKind::PlusMinus => "c+c-",
            PairIntensityKind::ZeroPlus => "zc+",
            PairIntensityKind::ZeroMinus => "zc-",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.label() == s)
    }

    pub fn family(self) -> Family {
        match self {
            PairIntensityKind::ZeroPlus | PairIntensityKind::ZeroMinus => Family::ZeroCrit,
            _ => Family::CritCrit,
        }
    }

    /// Points at separation `s` used for radial profiles.
    pub fn canonical_points(self, s: f64) -> (C64, C64) {
        match self.family() {
            Family::CritCrit => (C64::new(0.0, 0.5 * s), C64::new(0.0, -0.5 * s)),
            Family::ZeroCrit => (C64::new(s, 0.0), C64::new(0.0, 0.0)),
        }
    }
}

/// Conditioned moments of the zero–critical family at `(z, w)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroCritMoments {
    /// `E[|∂G(z)|²·|jac F(w)|·1{jac F(w) > 0} | G(z) = F(w) = 0]`
    pub plus: (f64, f64),
    /// Same with `jac F(w) < 0`.
    pub minus: (f64, f64),
    /// `E[|∂²G(w)|⁴ | G(z) = F(w) = 0]`
    pub fourth: (f64, f64),
    pub draws: usize,
}

/// Conditions on `G(z) = F(w) = 0` and draws `(∂G(z), G(w), ∂G(w), ∂²G(w))`;
/// `jac F(w) = |w̄∂G(w) − ∂²G(w)|² − |G(w)|²`.
pub fn zero_crit_moments(z: C64, w: C64, budget: &Budget, route: Route, key: u64) -> Result<ZeroCritMoments, KacRiceError> {
    if z == w {
        return Err(KacRiceError::DegenerateDiagonal);
    }
    let given = [DerivDescriptor::g(z), DerivDescriptor::f(w)];
    let targets = [
        DerivDescriptor::dg(1, z),
        DerivDescriptor::g(w),
        DerivDescriptor::dg(1, w),
        DerivDescriptor::dg(2, w),
    ];
    let sampler = make_sampler(route, &given, &targets)?;
    let wb = w.conj();
    let acc = run_mc::<3, _>(budget, TAG_ZC, key, |rng| {
        let mut scratch = Vec::new();
        let mut x = [C64::new(0.0, 0.0); 4];
        sampler.draw(rng, &mut scratch, &mut x);
        let jac_g = x[0].norm_sqr();
        let jac_f = (wb * x[2] - x[3]).norm_sqr() - x[1].norm_sqr();
        let v = jac_g * jac_f.abs();
        [
            if jac_f > 0.0 { v } else { 0.0 },
            if jac_f < 0.0 { v } else { 0.0 },
            x[3].norm_sqr().powi(2),
        ]
    });
    Ok(ZeroCritMoments {
        plus: mean_se(&acc[0]),
        minus: mean_se(&acc[1]),
        fourth: mean_se(&acc[2]),
        draws: budget.draws,
    })
}

/// Conditional numerator of the two-point formula (before dividing by the
/// determinant and `π²`).
pub fn pair_numerator(
    kind: PairIntensityKind,
    z: C64,
    w: C64,
    budget: &Budget,
    route: Route,
    key: u64,
) -> Result<(f64, f64), KacRiceError> {
    Ok(match kind.family() {
        Family::CritCrit => {
            let s = sigma_pair(z, w, budget, route, key)?;
            match kind {
                PairIntensityKind::CritCrit => s.all,
                PairIntensityKind::PlusPlus => s.plus,
                PairIntensityKind::MinusMinus => s.minus,
                _ => (0.5 * s.mixed.0, 0.5 * s.mixed.1),
            }
        }
        Family::ZeroCrit => {
            let m = zero_crit_moments(z, w, budget, route, key)?;
            if kind == PairIntensityKind::ZeroPlus {
                m.plus
            } else {
                m.minus
            }
        }
    })
}

/// Two-point intensity `q(z, w)/π²` with its standard error.
pub fn pair_intensity(
    kind: PairIntensityKind,
    z: C64,
    w: C64,
    budget: &Budget,
    route: Route,
) -> Result<(f64, f64), KacRiceError> {
    let d = pair_denominator(z, w, kind.family())?;
    let (m, se) = pair_numerator(kind, z, w, budget, route, 0)?;
    let c = 1.0 / (PI * PI * d);
    Ok((m * c, se * c))
}

/// Area of `B_ρ(0) ∩ B_ρ(s)`.
pub fn lens_area(rho: f64, s: f64) -> f64 {
    if s >= 2.0 * rho {
        return 0.0;
    }
    2.0 * rho * rho * (s / (2.0 * rho)).acos() - 0.5 * s * (4.0 * rho * rho - s * s).sqrt()
}

/// Result of a radial quadrature with Monte Carlo node values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairIntegral {
    pub value: f64,
    pub stderr: f64,
    /// Simpson on every other node.
    pub coarse: f64,
    /// `value − coarse`
    pub richardson: f64,
    pub intervals: usize,
}

/// `(1/π²) ∫₀^{2ρ} q(s)·|B_ρ(0) ∩ B_ρ(s)|·2πs ds` by composite Simpson with
/// `intervals` (even) panels. `q` returns `(value, stderr)` at interior nodes;
/// both endpoints carry zero weight.
pub fn integrate_radial(
    rho: f64,
    intervals: usize,
    q: impl Fn(usize, f64) -> Result<(f64, f64), KacRiceError> + Sync,
) -> Result<PairIntegral, KacRiceError> {
    if !(rho > 0.0) || intervals < 4 || intervals % 4 != 0 {
        return Err(KacRiceError::OutOfRange(rho));
    }
    let h = 2.0 * rho / intervals as f64;
    let nodes: Vec<(f64, f64)> = (1..intervals)
        .map(|k| {
            let s = k as f64 * h;
            let (v, e) = q(k, s)?;
            let weight = lens_area(rho, s) * 2.0 * PI * s / (PI * PI);
            Ok((v * weight, e * weight))
        })
        .collect::<Result<_, KacRiceError>>()?;
    let simpson = |step: usize| -> (f64, f64) {
        let hh = h * step as f64;
        let (mut v, mut var) = (0.0, 0.0);
        for k in (step..intervals).step_by(step) {
            let c = if (k / step) % 2 == 1 { 4.0 } else { 2.0 } * hh / 3.0;
            let (a, e) = nodes[k - 1];
            v += c * a;
            var += (c * e).powi(2);
        }
        (v, var.sqrt())
    };
    let (value, stderr) = simpson(1);
    let (coarse, _) = simpson(2);
    Ok(PairIntegral { value, stderr, coarse, richardson: value - coarse, intervals })
}

/// `E[N(N−1)]` (same kind) or `E[N_a N_b]` over a disk of radius `ρ`, with
/// every node evaluated on its own stream.
pub fn integrate_pair(
    kind: PairIntensityKind,
    rho: f64,
    intervals: usize,
    budget: &Budget,
    route: Route,
) -> Result<PairIntegral, KacRiceError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(KacRiceError::OutOfRange(rho));
    }
    integrate_radial(rho, intervals, |k, s| {
        let (z, w) = kind.canonical_points(s);
        if kind.family() == Family::CritCrit && 0.5 * s < R_MIN {
            return Err(KacRiceError::SingularConditioning { r: 0.5 * s, r_min: R_MIN });
        }
        let d = pair_denominator(z, w, kind.family())?;
        let (m, se) = pair_numerator(kind, z, w, budget, route, k as u64 + 1)?;
        Ok((m / d, se / d))
    })
}

/// Covariance of `(F^{(1,0)}(0), F^{(0,2)}(0), F^{(0,3)}(0))` given
/// `F(ir) = F(−ir) = 0`, by regression on the kernel matrix.
pub fn conditional_derivative_cov(r: f64) -> Result<HermitianCov, KacRiceError> {
    if r < R_MIN {
        return Err(KacRiceError::SingularConditioning { r, r_min: R_MIN });
    }
    let (given, targets) = proxy_descriptors(r, false)?;
    let all: Vec<DerivDescriptor> = given.iter().chain(&targets).cloned().collect();
    let joint = eval_cov(&all);
    Ok(gaussian_regression(&joint, &[2, 3, 4], &[0, 1])?)
}

fn proxy_descriptors(r: f64, with_jets: bool) -> Result<(Vec<DerivDescriptor>, Vec<DerivDescriptor>), KacRiceError> {
    let (p, m) = (C64::new(0.0, r), C64::new(0.0, -r));
    let o = C64::new(0.0, 0.0);
    let given = vec![DerivDescriptor::f(p), DerivDescriptor::f(m)];
    let mut targets = vec![
        DerivDescriptor::f_real(1, 0, o)?,
        DerivDescriptor::f_real(0, 2, o)?,
        DerivDescriptor::f_real(0, 3, o)?,
    ];
    if with_jets {
        targets.extend([
            DerivDescriptor::f_real(1, 0, p)?,
            DerivDescriptor::f_real(0, 1, p)?,
            DerivDescriptor::f_real(1, 0, m)?,
            DerivDescriptor::f_real(0, 1, m)?,
        ]);
    }
    Ok((given, targets))
}

/// Closed forms of the conditioning blocks at `±ir`.
pub mod closed {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Covariance of `(F(ir), F(−ir))`.
    pub fn m1(r: f64) -> HermitianCov {
        let r2 = r * r;
        let d = r2.exp();
        let o = (-r2).exp() * (1.0 - 4.0 * r2);
        HermitianCov::new(2, vec![c(d, 0.0), c(o, 0.0), c(o, 0.0), c(d, 0.0)]).unwrap()
    }

    /// Cross covariance rows `E[F(±ir)·conj X_j]`, `X = (F^{(1,0)}, F^{(0,2)}, F^{(0,3)})(0)`.
    pub fn m2(r: f64) -> [[C64; 3]; 2] {
        let r2 = r * r;
        let a = r * (1.0 - r2);
        let b = -2.0 + 5.0 * r2 - r2 * r2;
        let e = -6.0 * r + 7.0 * r2 * r - r2 * r2 * r;
        [[c(0.0, a), c(b, 0.0), c(e, 0.0)], [c(0.0, -a), c(b, 0.0), c(-e, 0.0)]]
    }

    pub fn m3() -> HermitianCov {
        HermitianCov::new(
            3,
            vec![
                c(3.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 6.0),
                c(0.0, 0.0),
                c(10.0, 0.0),
                c(0.0, 0.0),
                c(0.0, -6.0),
                c(0.0, 0.0),
                c(42.0, 0.0),
            ],
        )
        .unwrap()
    }

    /// Conditioned covariance `Mʳ`.
    pub fn mr(r: f64) -> HermitianCov {
        let r2 = r * r;
        let e1 = r2.exp();
        let e2 = (2.0 * r2).exp();
        // e^{2r²} − 1 + 4r², computed without cancellation.
        let dm = (2.0 * r2).exp_m1() + 4.0 * r2;
        let dp = 1.0 + e2 - 4.0 * r2;
        let m11 = 3.0 - 2.0 * e1 * r2 * (1.0 - r2).powi(2) / dm;
        let m22 = 10.0 - 2.0 * e1 * (2.0 - 5.0 * r2 + r2 * r2).powi(2) / dp;
        let m33 = 42.0 - 2.0 * e1 * r2 * (6.0 - 7.0 * r2 + r2 * r2).powi(2) / dm;
        let m13 = 6.0 + 2.0 * e1 * r2 * (-6.0 + r2) * (r2 - 1.0).powi(2) / dm;
        let z = c(0.0, 0.0);
        HermitianCov::new(
            3,
            vec![c(m11, 0.0), z, c(0.0, m13), z, c(m22, 0.0), z, c(0.0, -m13), z, c(m33, 0.0)],
        )
        .unwrap()
    }

    /// `lim_{r→0⁺} Mʳ`
    pub fn m0() -> HermitianCov {
        let z = c(0.0, 0.0);
        HermitianCov::new(
            3,
            vec![c(8.0 / 3.0, 0.0), z, c(0.0, 4.0), z, c(6.0, 0.0), z, c(0.0, -4.0), z, c(30.0, 0.0)],
        )
        .unwrap()
    }
}

/// `A = Im(F^{(0,2)}(0)·conj F^{(1,0)}(0))`
/// and `B = Im(i|F^{(0,2)}(0)|² + ⅓F^{(0,3)}(0)·conj F^{(1,0)}(0))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxyPair {
    pub a: f64,
    pub b: f64,
}

impl ProxyPair {
    pub fn from_derivatives(f10: C64, f02: C64, f03: C64) -> Self {
        let a = (f02 * f10.conj()).im;
        let b = (C64::new(0.0, f02.norm_sqr()) + f03 * f10.conj() / 3.0).im;
        Self { a, b }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxyReport {
    pub r: f64,
    /// 99th percentile of `|jac F(ir) − rA − r²B| / r³`.
    pub residual_p99: f64,
    /// `E[A²]` under the conditioning.
    pub a2: (f64, f64),
    /// `E[jac F(ir)·jac F(−ir) − r²(−A² + r²B²)] / r⁴`
    pub sign_gap: (f64, f64),
    pub draws: usize,
}

/// Joint conditioned draws of the derivatives at `0` and the Jacobians at
/// `±ir`, via coefficient projection (exact constraints, no jitter).
pub fn proxy_expansion_check(r: f64, budget: &Budget) -> Result<ProxyReport, KacRiceError> {
    if !(r >= R_MIN && r < 1.0) {
        return Err(KacRiceError::OutOfRange(r));
    }
    let (given, targets) = proxy_descriptors(r, true)?;
    let sampler = ProjectionSampler::new(&given, &targets)?;
    let chunks = budget.draws.div_ceil(CHUNK).max(1);
    let parts: Vec<(Vec<f64>, RunningStats, RunningStats)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(budget.seed, task_id(TAG_PROXY, c as u64));
            let n = CHUNK.min(budget.draws.saturating_sub(c * CHUNK)).max(1);
            let mut res = Vec::with_capacity(n);
            let (mut a2, mut gap) = (RunningStats::new(), RunningStats::new());
            let mut scratch = Vec::new();
            let mut x = [C64::new(0.0, 0.0); 7];
            for _ in 0..n {
                sampler.draw(&mut rng, &mut scratch, &mut x);
                let p = ProxyPair::from_derivatives(x[0], x[1], x[2]);
                let jp = jac_from_real(x[3], x[4]);
                let jm = jac_from_real(x[5], x[6]);
                res.push((jp - r * p.a - r * r * p.b).abs() / r.powi(3));
                a2.push(p.a * p.a);
                let lead = r * r * (-p.a * p.a + r * r * p.b * p.b);
                gap.push((jp * jm - lead) / r.powi(4));
            }
            (res, a2, gap)
        })
        .collect();
    let mut residuals = Vec::with_capacity(budget.draws);
    let (mut a2, mut gap) = (RunningStats::new(), RunningStats::new());
    for (r, a, g) in parts {
        residuals.extend(r);
        a2.merge(&a);
        gap.merge(&g);
    }
    Ok(ProxyReport {
        r,
        residual_p99: quantile(&residuals, 0.99),
        a2: mean_se(&a2),
        sign_gap: mean_se(&gap),
        draws: residuals.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhiVariant {
    Plus,
    Minus,
}

/// `φ_r = (−A² + r²B²)·1{|A| < rB}` and `φ′_r` (indicator `|A| < −rB`) for a
/// standard complex triple.
pub fn phi_value(variant: PhiVariant, r: f64, z1: C64, z2: C64, z3: C64) -> f64 {
    let p = ProxyPair::from_derivatives(z1, z2, z3);
    let bound = match variant {
        PhiVariant::Plus => r * p.b,
        PhiVariant::Minus => -r * p.b,
    };
    if p.a.abs() < bound {
        -p.a * p.a + r * r * p.b * p.b
    } else {
        0.0
    }
}

pub fn phi_expectation(variant: PhiVariant, r: f64, budget: &Budget) -> (f64, f64) {
    let key = match variant {
        PhiVariant::Plus => 0,
        PhiVariant::Minus => 1,
    };
    let acc = run_mc::<1, _>(budget, TAG_PHI, key, |rng| {
        let (z1, z2, z3) = (complex_normal(rng), complex_normal(rng), complex_normal(rng));
        [phi_value(variant, r, z1, z2, z3)]
    });
    mean_se(&acc[0])
}

/// `P(|Z₁| ≤ r|Z₂|) = r²/(1+r²)` for independent standard complex normals.
pub fn explicit_ratio(r: f64) -> f64 {
    r * r / (1.0 + r * r)
}

/// `|z|¹²(54+|z|⁶) / (72(36+|z|⁶)²)`: the radial form of the zero–maximum
/// indicator integral, a quarter of its value over `ℂ²`.
pub fn zcm_integral(z_abs: f64) -> f64 {
    let t = z_abs.powi(6);
    z_abs.powi(12) * (54.0 + t) / (72.0 * (36.0 + t).powi(2))
}

/// Monte Carlo of `P(|Z₁| ≤ r|Z₂|)`.
pub fn explicit_ratio_mc(r: f64, budget: &Budget) -> (f64, f64) {
    let acc = run_mc::<1, _>(budget, TAG_CLOSED, 0, |rng| {
        let (z1, z2) = (complex_normal(rng), complex_normal(rng));
        [if z1.norm() <= r * z2.norm() { 1.0 } else { 0.0 }]
    });
    mean_se(&acc[0])
}

/// Monte Carlo of `¼·E[|Z₂|²(a|Z₂|² − |Z₁|²)·1{|Z₁|² < a|Z₂|²}]`,
/// `a = |z|⁶/36`; exact value [`zcm_integral`].
pub fn zcm_integral_mc(z_abs: f64, budget: &Budget) -> (f64, f64) {
    let a = z_abs.powi(6) / 36.0;
    let acc = run_mc::<1, _>(budget, TAG_CLOSED, 1, |rng| {
        let (x, y) = (complex_normal(rng).norm_sqr(), complex_normal(rng).norm_sqr());
        [if x < a * y { 0.25 * y * (a * y - x) } else { 0.0 }]
    });
    mean_se(&acc[0])
}

/// Events of the small-ball bounds for standard complex `Z₁, Z₂, Z₃`:
/// 1. `|Im(Z₂ Z̄₁)| < r`;
/// 2. `|Im(Z₂ Z̄₁) + r·Im(i|Z₂|² + ⅓Z₃Z̄₁)| < r^{2−η}`;
/// 3. `|Im(Z₂ Z̄₁) − r·Im(i|Z₂|² − ⅓Z₃Z̄₁)| < r^{2−η}`.
pub fn smallball_event(case: u8, r: f64, eta: f64, z1: C64, z2: C64, z3: C64) -> Result<bool, KacRiceError> {
    let a = (z2 * z1.conj()).im;
    let i = C64::new(0.0, 1.0);
    let t = r.powf(2.0 - eta);
    Ok(match case {
        1 => a.abs() < r,
        2 => (a + r * (i * z2.norm_sqr() + z3 * z1.conj() / 3.0).im).abs() < t,
        3 => (a - r * (i * z2.norm_sqr() - z3 * z1.conj() / 3.0).im).abs() < t,
        _ => return Err(KacRiceError::OutOfRange(case as f64)),
    })
}

/// Probability of a small-ball event; draws are shared across `r` and `case`.
pub fn smallball_probe(case: u8, r: f64, eta: f64, budget: &Budget) -> Result<(f64, f64), KacRiceError> {
    smallball_event(case, r, eta, C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0))?;
    let acc = run_mc::<1, _>(budget, TAG_SMALLBALL, 0, |rng| {
        let (z1, z2, z3) = (complex_normal(rng), complex_normal(rng), complex_normal(rng));
        [smallball_event(case, r, eta, z1, z2, z3).unwrap() as u8 as f64]
    });
    Ok(mean_se(&acc[0]))
}

/// Radial profile row of a Kac–Rice quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KacRiceRow {
    pub kind: String,
    pub r: f64,
    pub value: f64,
    pub stderr: f64,
    pub n_draws: usize,
}
