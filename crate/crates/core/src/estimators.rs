//! Monte Carlo first and second moments of landmark counts, repulsion
//! factors and log–log exponent fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{sample_gef, FieldError};
use crate::landmarks::{
    find_landmarks, Counts, Diagnostics, Disk, Landmark, LandmarkError, LandmarkKind, LandmarkSet,
    SearchParams, SpatialIndex,
};
use crate::rng::{stream, task_id};
use crate::stats::{delta_method_stderr, sample_covariance};
use crate::C64;

/// RNG tag for GEF samples used by counting experiments.
pub const TAG_COUNTING: u32 = 1;
/// RNG tag for synthetic Poisson landmark sets.
pub const TAG_POISSON: u32 = 2;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("no pairs observed at any radius; increase the sample budget")]
    BudgetTooSmall,
    #[error("only {usable} usable rows in the fit range (need at least 4)")]
    InsufficientSignal { usable: usize },
    #[error("radius {0} is not part of this campaign")]
    UnknownRadius(f64),
    #[error(transparent)]
    Landmark(#[from] LandmarkError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Pair statistics estimated by counting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairKind {
    ZeroZero,
    CritCrit,
    PlusPlus,
    MinusMinus,
    PlusMinus,
    ZeroCrit,
    ZeroPlus,
    ZeroMinus,
}

impl PairKind {
    pub const ALL: [PairKind; 8] = [
        PairKind::ZeroZero,
        PairKind::CritCrit,
        PairKind::PlusPlus,
        PairKind::MinusMinus,
        PairKind::PlusMinus,
        PairKind::ZeroCrit,
        PairKind::ZeroPlus,
        PairKind::ZeroMinus,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PairKind::ZeroZero => "zz",
            PairKind::CritCrit => "cc",
            PairKind::PlusPlus => "c+c+",
            PairKind::MinusMinus => "c-c-",
            PairKind::PlusMinus => "c+c-",
            PairKind::ZeroCrit => "zc",
            PairKind::ZeroPlus => "zc+",
            PairKind::ZeroMinus => "zc-",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.label() == s)
    }

    /// Same-kind pairs report `N(N−1)`, cross pairs `N_a·N_b`.
    pub fn value(self, c: &Counts) -> f64 {
        let f = |n: u32| n as f64;
        match self {
            PairKind::ZeroZero => f(c.nz) * (f(c.nz) - 1.0),
            PairKind::CritCrit => f(c.nc) * (f(c.nc) - 1.0),
            PairKind::PlusPlus => f(c.ncp) * (f(c.ncp) - 1.0),
            PairKind::MinusMinus => f(c.ncm) * (f(c.ncm) - 1.0),
            PairKind::PlusMinus => f(c.ncp) * f(c.ncm),
            PairKind::ZeroCrit => f(c.nz) * f(c.nc),
            PairKind::ZeroPlus => f(c.nz) * f(c.ncp),
            PairKind::ZeroMinus => f(c.nz) * f(c.ncm),
        }
    }

    fn index(self) -> usize {
        Self::ALL.iter().position(|&p| p == self).unwrap()
    }
}

/// Per-disk first-moment statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CountKind {
    Zeros,
    Crits,
    Saddles,
    Maxima,
}

impl CountKind {
    pub const ALL: [CountKind; 4] = [CountKind::Zeros, CountKind::Crits, CountKind::Saddles, CountKind::Maxima];

    pub fn value(self, c: &Counts) -> f64 {
        match self {
            CountKind::Zeros => c.nz as f64,
            CountKind::Crits => c.nc as f64,
            CountKind::Saddles => c.ncp as f64,
            CountKind::Maxima => c.ncm as f64,
        }
    }

    /// Intensity per unit `ρ²` (mean count in a disk is this times `ρ²`).
    pub fn expected_per_rho2(self) -> f64 {
        match self {
            CountKind::Zeros => 1.0,
            CountKind::Crits => 5.0 / 3.0,
            CountKind::Saddles => 4.0 / 3.0,
            CountKind::Maxima => 1.0 / 3.0,
        }
    }
}

/// Produces one landmark set per sample index.
pub trait LandmarkSource: Sync {
    fn landmarks(&self, index: u64) -> Result<LandmarkSet, EstimatorError>;
    /// Region in which the sets are complete.
    fn working_disk(&self) -> Disk;
}

/// GEF realizations searched on `B_R`, sampled with a safety margin so
/// Newton iterates near the rim stay in the stable disk.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GefSource {
    pub working_radius: f64,
    pub margin: f64,
    pub master_seed: u64,
    pub params: SearchParams,
}

impl GefSource {
    pub fn new(working_radius: f64, master_seed: u64) -> Self {
        Self { working_radius, margin: 0.5, master_seed, params: SearchParams::default() }
    }
}

impl LandmarkSource for GefSource {
    fn landmarks(&self, index: u64) -> Result<LandmarkSet, EstimatorError> {
        let s = sample_gef(
            self.working_radius + self.margin,
            self.master_seed,
            task_id(TAG_COUNTING, index),
        )?;
        Ok(find_landmarks(&s, &self.working_disk(), &self.params)?)
    }

    fn working_disk(&self) -> Disk {
        Disk::centered(self.working_radius)
    }
}

/// Independent Poisson points with the GEF first-moment intensities.
#[derive(Clone, Debug)]
pub struct PoissonSource {
    pub working_radius: f64,
    pub master_seed: u64,
    /// Points per unit area for zeros, saddles and maxima.
    pub intensities: [f64; 3],
}

impl PoissonSource {
    pub fn gef_like(working_radius: f64, master_seed: u64) -> Self {
        let pi = std::f64::consts::PI;
        Self { working_radius, master_seed, intensities: [1.0 / pi, 4.0 / (3.0 * pi), 1.0 / (3.0 * pi)] }
    }
}

impl LandmarkSource for PoissonSource {
    fn landmarks(&self, index: u64) -> Result<LandmarkSet, EstimatorError> {
        use rand::Rng;
        use rand_distr::{Distribution, Poisson};
        let mut rng = stream(self.master_seed, task_id(TAG_POISSON, index));
        let r = self.working_radius;
        let area = std::f64::consts::PI * r * r;
        let mut draw = |kind: LandmarkKind, lambda: f64| -> Vec<Landmark> {
            let n = if lambda * area > 0.0 {
                Poisson::new(lambda * area).unwrap().sample(&mut rng) as usize
            } else {
                0
            };
            (0..n)
                .map(|_| {
                    let rad = r * rng.random::<f64>().sqrt();
                    let th = std::f64::consts::TAU * rng.random::<f64>();
                    Landmark { position: C64::from_polar(rad, th), kind, jac_w: 0.0, residual: 0.0 }
                })
                .collect()
        };
        let zeros = draw(LandmarkKind::Zero, self.intensities[0]);
        let mut criticals = draw(LandmarkKind::Saddle, self.intensities[1]);
        criticals.extend(draw(LandmarkKind::LocalMax, self.intensities[2]));
        Ok(LandmarkSet { disk: self.working_disk(), zeros, criticals, diagnostics: Diagnostics::default() })
    }

    fn working_disk(&self) -> Disk {
        Disk::centered(self.working_radius)
    }
}

/// Centres of a square grid of pitch `pitch` (shifted by `offset`) whose
/// disks of radius `rho` fit in `region`.
pub fn tile_centers(region: &Disk, rho: f64, pitch: f64, offset: C64) -> Vec<C64> {
    let reach = region.radius - rho;
    if reach < 0.0 {
        return Vec::new();
    }
    let k = ((reach + offset.norm()) / pitch).ceil() as i64 + 1;
    let mut out = Vec::new();
    for i in -k..=k {
        for j in -k..=k {
            let c = region.center + offset + C64::new(i as f64 * pitch, j as f64 * pitch);
            if (c - region.center).norm() <= reach {
                out.push(c);
            }
        }
    }
    out
}

/// Settings of a counting campaign shared by all pair kinds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CountingCampaign {
    pub radii: Vec<f64>,
    pub samples: usize,
    /// Disk pitch is `2ρ + pitch_gap`, keeping test disks disjoint.
    pub pitch_gap: f64,
    /// Translation applied to every test-disk centre.
    pub offset: C64,
}

impl CountingCampaign {
    pub fn new(radii: Vec<f64>, samples: usize) -> Self {
        Self { radii, samples, pitch_gap: 0.1, offset: C64::new(0.0, 0.0) }
    }

    pub fn run<S: LandmarkSource + ?Sized>(&self, source: &S) -> Result<CampaignSummary, EstimatorError> {
        let region = source.working_disk();
        let centers: Vec<Vec<C64>> = self
            .radii
            .iter()
            .map(|&rho| tile_centers(&region, rho, 2.0 * rho + self.pitch_gap, self.offset))
            .collect();
        let per_sample: Vec<Result<(Vec<DiskMeans>, Diagnostics), EstimatorError>> = (0..self.samples as u64)
            .into_par_iter()
            .map(|i| {
                let ls = source.landmarks(i)?;
                let index = SpatialIndex::new(&ls, 1.0);
                let means = centers
                    .iter()
                    .zip(&self.radii)
                    .map(|(cs, &rho)| DiskMeans::from_counts(cs.iter().map(|&c| index.counts(c, rho))))
                    .collect();
                Ok((means, ls.diagnostics))
            })
            .collect();
        let mut records = Vec::with_capacity(self.samples);
        let mut diagnostics = Diagnostics::default();
        for r in per_sample {
            let (m, d) = r?;
            records.push(m);
            diagnostics.seeds += d.seeds;
            diagnostics.gated += d.gated;
            diagnostics.iterations += d.iterations;
            diagnostics.newton_failures += d.newton_failures;
            diagnostics.escaped += d.escaped;
            diagnostics.dedup_merges += d.dedup_merges;
            diagnostics.coincidences += d.coincidences;
        }
        Ok(CampaignSummary {
            radii: self.radii.clone(),
            n_disks: centers.iter().map(Vec::len).collect(),
            records,
            diagnostics,
        })
    }
}

/// Per-sample means over that sample's test disks at one radius.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiskMeans {
    pub pairs: [f64; 8],
    pub firsts: [f64; 4],
    pub degenerate: f64,
}

impl DiskMeans {
    fn from_counts(counts: impl Iterator<Item = Counts>) -> Self {
        let mut m = DiskMeans::default();
        let mut n = 0usize;
        for c in counts {
            n += 1;
            for (k, p) in PairKind::ALL.iter().enumerate() {
                m.pairs[k] += p.value(&c);
            }
            for (k, f) in CountKind::ALL.iter().enumerate() {
                m.firsts[k] += f.value(&c);
            }
            m.degenerate += c.ndeg as f64;
        }
        if n > 0 {
            let inv = 1.0 / n as f64;
            m.pairs.iter_mut().for_each(|v| *v *= inv);
            m.firsts.iter_mut().for_each(|v| *v *= inv);
            m.degenerate *= inv;
        }
        m
    }
}

/// Batch means of every sample at every radius.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub radii: Vec<f64>,
    pub n_disks: Vec<usize>,
    /// `records[sample][radius]`
    pub records: Vec<Vec<DiskMeans>>,
    pub diagnostics: Diagnostics,
}

fn mean_se(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let s: crate::stats::RunningStats = xs.collect();
    (s.mean, s.stderr())
}

impl CampaignSummary {
    pub fn samples(&self) -> usize {
        self.records.len()
    }

    fn radius_index(&self, rho: f64) -> Result<usize, EstimatorError> {
        self.radii
            .iter()
            .position(|&r| (r - rho).abs() < 1e-12)
            .ok_or(EstimatorError::UnknownRadius(rho))
    }

    /// Mean and standard error over sample batches at radius index `k`.
    pub fn pair_moment(&self, pair: PairKind, k: usize) -> (f64, f64) {
        mean_se(self.records.iter().map(|r| r[k].pairs[pair.index()]))
    }

    pub fn first_moment(&self, kind: CountKind, k: usize) -> (f64, f64) {
        let i = CountKind::ALL.iter().position(|&c| c == kind).unwrap();
        mean_se(self.records.iter().map(|r| r[k].firsts[i]))
    }

    /// Means of `(Nz, Nc, Ncp, Ncm)` at radius `rho`.
    pub fn first_moments(&self, rho: f64) -> Result<[(f64, f64); 4], EstimatorError> {
        let k = self.radius_index(rho)?;
        Ok(CountKind::ALL.map(|c| self.first_moment(c, k)))
    }

    pub fn profile(&self, pair: PairKind) -> RadialProfile {
        let rows = (0..self.radii.len())
            .map(|k| {
                let (estimate, stderr) = self.pair_moment(pair, k);
                ProfileRow {
                    rho: self.radii[k],
                    estimate,
                    stderr,
                    n_samples: self.samples(),
                    n_disks: self.n_disks[k] * self.samples(),
                }
            })
            .collect();
        RadialProfile::new(pair.label(), rows)
    }

    /// Second moment over the product of first moments (factorial for
    /// same-kind pairs), with a delta-method standard error.
    pub fn repulsion_factor(&self, pair: PairKind, rho: f64) -> Result<(f64, f64), EstimatorError> {
        let k = self.radius_index(rho)?;
        let (a, b) = match pair {
            PairKind::ZeroZero => (CountKind::Zeros, CountKind::Zeros),
            PairKind::CritCrit => (CountKind::Crits, CountKind::Crits),
            PairKind::PlusPlus => (CountKind::Saddles, CountKind::Saddles),
            PairKind::MinusMinus => (CountKind::Maxima, CountKind::Maxima),
            PairKind::PlusMinus => (CountKind::Saddles, CountKind::Maxima),
            PairKind::ZeroCrit => (CountKind::Zeros, CountKind::Crits),
            PairKind::ZeroPlus => (CountKind::Zeros, CountKind::Saddles),
            PairKind::ZeroMinus => (CountKind::Zeros, CountKind::Maxima),
        };
        let ia = CountKind::ALL.iter().position(|&c| c == a).unwrap();
        let ib = CountKind::ALL.iter().position(|&c| c == b).unwrap();
        let cols = vec![
            self.records.iter().map(|r| r[k].pairs[pair.index()]).collect::<Vec<_>>(),
            self.records.iter().map(|r| r[k].firsts[ia]).collect(),
            self.records.iter().map(|r| r[k].firsts[ib]).collect(),
        ];
        let n = self.samples();
        let mean = |c: &Vec<f64>| c.iter().sum::<f64>() / n as f64;
        let (m, x, y) = (mean(&cols[0]), mean(&cols[1]), mean(&cols[2]));
        let ratio = m / (x * y);
        let grad = [1.0 / (x * y), -m / (x * x * y), -m / (x * y * y)];
        let se = delta_method_stderr(&grad, &sample_covariance(&cols), n);
        Ok((ratio, se))
    }
}

/// `E[N(N−1)]` or `E[N_a N_b]` over radii for one pair kind.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairCountExperiment {
    pub pair: PairKind,
    pub radii: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

impl PairCountExperiment {
    /// Test disks per sample at each radius for a working region.
    pub fn disks_per_sample(&self, region: &Disk, pitch_gap: f64) -> Vec<usize> {
        self.radii
            .iter()
            .map(|&r| tile_centers(region, r, 2.0 * r + pitch_gap, C64::new(0.0, 0.0)).len())
            .collect()
    }
}

pub fn estimate_pair_moment<S: LandmarkSource + ?Sized>(
    exp: &PairCountExperiment,
    source: &S,
) -> Result<RadialProfile, EstimatorError> {
    let summary = CountingCampaign::new(exp.radii.clone(), exp.samples).run(source)?;
    let profile = summary.profile(exp.pair);
    if profile.rows.iter().all(|r| r.estimate == 0.0) {
        return Err(EstimatorError::BudgetTooSmall);
    }
    Ok(profile)
}

/// Means of `(Nz, Nc, Ncp, Ncm)` in disks of radius `rho` over `samples`
/// GEF realizations on `B_R`.
pub fn estimate_first_moments(
    rho: f64,
    samples: usize,
    working_radius: f64,
    master_seed: u64,
) -> Result<[(f64, f64); 4], EstimatorError> {
    let source = GefSource::new(working_radius, master_seed);
    CountingCampaign::new(vec![rho], samples).run(&source)?.first_moments(rho)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub rho: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub n_disks: usize,
}

/// Rows sorted by radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub label: String,
    pub rows: Vec<ProfileRow>,
}

impl RadialProfile {
    pub fn new(label: &str, mut rows: Vec<ProfileRow>) -> Self {
        rows.sort_by(|a, b| a.rho.total_cmp(&b.rho));
        Self { label: label.to_string(), rows }
    }

    /// Exact rows `y = c·ρ^p`, zero error.
    pub fn synthetic_power(label: &str, radii: &[f64], c: f64, p: f64) -> Self {
        let rows = radii
            .iter()
            .map(|&rho| ProfileRow { rho, estimate: c * rho.powf(p), stderr: 0.0, n_samples: 1, n_disks: 1 })
            .collect();
        Self::new(label, rows)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub fit_range: (f64, f64),
    pub n_rows: usize,
}

/// Weighted least squares of `log estimate` on `log ρ` over rows in `range`
/// whose estimate exceeds three standard errors. Weights are inverse squared
/// relative errors; rows without error estimates get equal weights.
pub fn fit_exponent(p: &RadialProfile, range: (f64, f64)) -> Result<ExponentFit, EstimatorError> {
    let rows: Vec<&ProfileRow> = p
        .rows
        .iter()
        .filter(|r| r.rho >= range.0 - 1e-12 && r.rho <= range.1 + 1e-12)
        .filter(|r| r.estimate > 0.0 && r.estimate > 3.0 * r.stderr)
        .collect();
    if rows.len() < 4 {
        return Err(EstimatorError::InsufficientSignal { usable: rows.len() });
    }
    let known = rows.iter().all(|r| r.stderr > 0.0);
    let pts: Vec<(f64, f64, f64)> = rows
        .iter()
        .map(|r| {
            let w = if known { (r.estimate / r.stderr).powi(2) } else { 1.0 };
            (r.rho.ln(), r.estimate.ln(), w)
        })
        .collect();
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if known {
        (1.0 / sxx).sqrt()
    } else {
        let n = pts.len() as f64;
        let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    };
    Ok(ExponentFit { slope, intercept, slope_stderr, fit_range: range, n_rows: pts.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_power_law() {
        let p = RadialProfile::synthetic_power("t", &[0.1, 0.2, 0.3, 0.5, 0.8], 2.5, 4.0);
        let f = fit_exponent(&p, (0.1, 0.8)).unwrap();
        assert!((f.slope - 4.0).abs() < 1e-12);
        assert!((f.intercept - 2.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn fit_needs_rows() {
        let p = RadialProfile::synthetic_power("t", &[0.1, 0.2, 0.3], 1.0, 2.0);
        assert!(matches!(fit_exponent(&p, (0.0, 1.0)), Err(EstimatorError::InsufficientSignal { usable: 3 })));
    }

    #[test]
    fn tiling_is_disjoint_and_inside() {
        let region = Disk::centered(6.0);
        let rho = 0.3;
        let cs = tile_centers(&region, rho, 2.0 * rho + 0.1, C64::new(0.05, -0.02));
        assert!(cs.len() > 50);
        for (i, a) in cs.iter().enumerate() {
            assert!(a.norm() + rho <= 6.0 + 1e-12);
            for b in &cs[i + 1..] {
                assert!((a - b).norm() >= 2.0 * rho);
            }
        }
    }

    struct TwoPerDisk;

    impl LandmarkSource for TwoPerDisk {
        fn landmarks(&self, _index: u64) -> Result<LandmarkSet, EstimatorError> {
            let rho = 0.5;
            let zeros = tile_centers(&self.working_disk(), rho, 2.0 * rho + 0.1, C64::new(0.0, 0.0))
                .into_iter()
                .flat_map(|c| {
                    [c + 0.1, c - 0.1].map(|p| Landmark { position: p, kind: LandmarkKind::Zero, jac_w: 0.0, residual: 0.0 })
                })
                .collect();
            Ok(LandmarkSet { disk: self.working_disk(), zeros, criticals: vec![], diagnostics: Diagnostics::default() })
        }

        fn working_disk(&self) -> Disk {
            Disk::centered(4.0)
        }
    }

    #[test]
    fn toy_two_per_disk() {
        let exp = PairCountExperiment { pair: PairKind::ZeroZero, radii: vec![0.5], samples: 3, seed: 0 };
        let p = estimate_pair_moment(&exp, &TwoPerDisk).unwrap();
        assert_eq!(p.rows[0].estimate, 2.0);
        assert_eq!(p.rows[0].stderr, 0.0);
    }

    #[test]
    fn poisson_baseline_ratio_is_one() {
        let src = PoissonSource::gef_like(6.0, 5);
        let s = CountingCampaign::new(vec![0.5], 3000).run(&src).unwrap();
        for pair in [PairKind::CritCrit, PairKind::PlusMinus] {
            let (r, se) = s.repulsion_factor(pair, 0.5).unwrap();
            assert!((r - 1.0).abs() < 4.0 * se, "{pair:?}: {r} ± {se}");
        }
    }

    #[test]
    fn budget_too_small() {
        struct Empty;
        impl LandmarkSource for Empty {
            fn landmarks(&self, _: u64) -> Result<LandmarkSet, EstimatorError> {
                Ok(LandmarkSet { disk: self.working_disk(), zeros: vec![], criticals: vec![], diagnostics: Diagnostics::default() })
            }
            fn working_disk(&self) -> Disk {
                Disk::centered(3.0)
            }
        }
        let exp = PairCountExperiment { pair: PairKind::CritCrit, radii: vec![0.2, 0.4], samples: 2, seed: 0 };
        assert!(matches!(estimate_pair_moment(&exp, &Empty), Err(EstimatorError::BudgetTooSmall)));
    }
}
