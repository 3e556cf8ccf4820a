//! One function per subcommand. Each returns the files it wants written and
//! the numeric checks it performed; the caller owns the output directory.

use std::fmt::Write as _;
use std::fs;
use std::io;

use rayon::prelude::*;
use thiserror::Error;

use geflab_core::estimators::{fit_exponent, CampaignSummary, CountKind, CountingCampaign, EstimatorError, GefSource, ProfileRow};
use geflab_core::field::{sample_gef, FieldError};
use geflab_core::io::{kacrice_profile, read_kacrice, read_profiles, write_kacrice, write_landmarks, write_profiles, CsvError, KACRICE_SCHEMA, PROFILE_SCHEMA};
use geflab_core::kacrice::{
    closed, conditional_derivative_cov, integrate_pair, sigma_pair, zero_crit_moments, Budget, KacRiceError, KacRiceRow,
    PairIntegral, PairIntensityKind, Route,
};
use geflab_core::landmarks::{contour_radius_avoiding, find_landmarks, winding_number, Disk, LandmarkError, SearchParams};
use geflab_core::rng::{stream, task_id};
use geflab_core::spectrogram::{compare_to_gef, extract_grid_landmarks, stft_gauss, white_noise_for, GridSpec, SpectrogramError};
use geflab_core::stats::RunningStats;
use geflab_core::{ExponentFit, LandmarkKind, PairKind, RadialProfile, C64};

use crate::config::{ConfigError, KacRiceConfig, MomentsConfig, RunConfig, SpectrogramConfig};

/// Stream tags owned by the runner; the core crate uses tags below 20.
pub const TAG_SAMPLE: u32 = 30;
pub const TAG_SPECTRO_NOISE: u32 = 31;
pub const TAG_SPECTRO_GEF: u32 = 32;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("input: {0}")]
    Input(String),
    #[error("numeric: {0}")]
    Numeric(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl RunError {
    /// Usage and configuration problems exit with 2, everything else with 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Input(_) => 2,
            RunError::Numeric(_) | RunError::Io(_) => 1,
        }
    }
}

macro_rules! numeric_from {
    ($($t:ty),*) => {$(
        impl From<$t> for RunError {
            fn from(e: $t) -> Self {
                RunError::Numeric(e.to_string())
            }
        }
    )*};
}
numeric_from!(EstimatorError, FieldError, KacRiceError, LandmarkError, SpectrogramError, CsvError);

/// Fixed notation for moderate magnitudes, scientific otherwise.
fn num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() || (1e-3..1e5).contains(&x.abs()) {
        format!("{x:.6}")
    } else {
        format!("{x:.4e}")
    }
}

/// A single numeric criterion with its verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub id: String,
    pub criterion: u8,
    pub value: f64,
    pub stderr: f64,
    pub target: String,
    pub pass: bool,
    pub note: String,
}

impl Check {
    /// `|value − target| ≤ tol`
    pub fn abs(id: &str, criterion: u8, (value, stderr): (f64, f64), target: f64, tol: f64) -> Self {
        Self {
            id: id.into(),
            criterion,
            value,
            stderr,
            target: format!("{target} ± {tol}"),
            pass: (value - target).abs() <= tol,
            note: String::new(),
        }
    }

    /// `|value − target| ≤ max(rel·|target|, k·stderr)`
    pub fn rel_or_se(id: &str, criterion: u8, (value, stderr): (f64, f64), target: f64, rel: f64, k: f64) -> Self {
        let tol = (rel * target.abs()).max(k * stderr);
        Self {
            target: format!("{target} within max({}%, {k}σ)", rel * 100.0),
            ..Self::abs(id, criterion, (value, stderr), target, tol)
        }
    }

    /// `|value − target| ≤ k·stderr`
    pub fn within_se(id: &str, criterion: u8, (value, stderr): (f64, f64), target: f64, k: f64) -> Self {
        Self { target: format!("{} within {k}σ", num(target)), ..Self::abs(id, criterion, (value, stderr), target, k * stderr) }
    }

    /// `value ≤ bound`
    pub fn at_most(id: &str, criterion: u8, value: f64, bound: f64) -> Self {
        Self {
            id: id.into(),
            criterion,
            value,
            stderr: 0.0,
            target: format!("≤ {}", num(bound)),
            pass: value <= bound,
            note: String::new(),
        }
    }

    /// A check whose quantity could not be computed.
    pub fn failed(id: &str, criterion: u8, target: &str, why: impl ToString) -> Self {
        Self {
            id: id.into(),
            criterion,
            value: f64::NAN,
            stderr: f64::NAN,
            target: target.into(),
            pass: false,
            note: why.to_string(),
        }
    }

    pub fn with_note(mut self, note: impl ToString) -> Self {
        self.note = note.to_string();
        self
    }

    pub fn verdict(&self) -> &'static str {
        if self.pass {
            "PASS"
        } else {
            "FAIL"
        }
    }

    pub fn line(&self) -> String {
        let mut s = format!(
            "{} [{:>2}] {:<24} value {:<12} ± {:<10.3e} target {}",
            self.verdict(),
            self.criterion,
            self.id,
            num(self.value),
            self.stderr,
            self.target
        );
        if !self.note.is_empty() {
            let _ = write!(s, " ({})", self.note);
        }
        s
    }
}

/// Files to write and checks performed by one subcommand.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<(String, Vec<u8>)>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl Outcome {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn file(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }
}

pub const CHECKS_SCHEMA: &str = "geflab-checks v1";
pub const FITS_SCHEMA: &str = "geflab-fits v1";

fn clean(s: &str) -> String {
    s.replace([',', '\n'], ";")
}

pub fn checks_csv(checks: &[Check]) -> Vec<u8> {
    let mut s = format!("# schema: {CHECKS_SCHEMA}\nid,criterion,value,stderr,target,status,note\n");
    for c in checks {
        let _ = writeln!(
            s,
            "{},{},{:?},{:?},{},{},{}",
            clean(&c.id),
            c.criterion,
            c.value,
            c.stderr,
            clean(&c.target),
            c.verdict(),
            clean(&c.note)
        );
    }
    s.into_bytes()
}

pub fn fits_csv(fits: &[(String, ExponentFit)]) -> Vec<u8> {
    let mut s = format!("# schema: {FITS_SCHEMA}\nlabel,slope,slope_stderr,intercept,lo,hi,n_rows\n");
    for (label, f) in fits {
        let _ = writeln!(
            s,
            "{},{:?},{:?},{:?},{:?},{:?},{}",
            clean(label),
            f.slope,
            f.slope_stderr,
            f.intercept,
            f.fit_range.0,
            f.fit_range.1,
            f.n_rows
        );
    }
    s.into_bytes()
}

fn profiles_csv<'a>(profiles: impl IntoIterator<Item = &'a RadialProfile>) -> Result<Vec<u8>, RunError> {
    let mut buf = Vec::new();
    write_profiles(&mut buf, profiles)?;
    Ok(buf)
}

fn kacrice_csv(rows: &[KacRiceRow]) -> Result<Vec<u8>, RunError> {
    let mut buf = Vec::new();
    write_kacrice(&mut buf, rows)?;
    Ok(buf)
}

fn search_params(cfg: &RunConfig) -> SearchParams {
    SearchParams {
        h_seed_zero: cfg.landmarks.h_seed_zero,
        h_seed_crit: cfg.landmarks.h_seed_crit,
        seed_gate: cfg.landmarks.seed_gate,
        ..SearchParams::default()
    }
}

/// GEF realizations in binary and CSV form.
pub fn sample(cfg: &RunConfig, seed: u64) -> Result<Outcome, RunError> {
    let samples: Vec<_> = (0..cfg.sample.count as u64)
        .into_par_iter()
        .map(|i| sample_gef(cfg.sample.radius, seed, task_id(TAG_SAMPLE, i)))
        .collect::<Result<_, _>>()?;
    let mut out = Outcome::default();
    for (i, s) in samples.iter().enumerate() {
        let mut bin = Vec::new();
        s.write_binary(&mut bin)?;
        let mut csv = Vec::new();
        s.write_csv(&mut csv)?;
        out.file(&format!("samples/sample_{i:04}.gef"), bin);
        out.file(&format!("samples/sample_{i:04}.csv"), csv);
        out.notes.push(format!("sample {i}: {} coefficients, r_max {}", s.coeffs().len(), s.r_max()));
    }
    Ok(out)
}

/// Landmarks of each realization on `B_radius`, with an argument-principle
/// check on a contour that avoids every landmark.
pub fn landmarks(cfg: &RunConfig, seed: u64) -> Result<Outcome, RunError> {
    let params = search_params(cfg);
    let radius = cfg.landmarks.radius;
    let origin = C64::new(0.0, 0.0);
    let per_sample: Vec<_> = (0..cfg.landmarks.samples as u64)
        .into_par_iter()
        .map(|i| -> Result<_, RunError> {
            let g = sample_gef(radius + 0.5, seed, task_id(TAG_SAMPLE, i))?;
            let set = find_landmarks(&g, &Disk::centered(radius), &params)?;
            let pos: Vec<C64> = set.all().map(|l| l.position).collect();
            let r = contour_radius_avoiding(pos.iter().copied(), origin, 0.8 * radius, 1e-3);
            let inside = |k: LandmarkKind| set.all().filter(|l| l.kind == k && l.position.norm() < r).count() as i64;
            let wz = winding_number(|z| g.eval_jet(z).map(|j| j.w_g).unwrap_or(C64::new(f64::NAN, 0.0)), origin, r);
            let wf = winding_number(|z| g.eval_jet(z).map(|j| j.w_f).unwrap_or(C64::new(f64::NAN, 0.0)), origin, r);
            let ok = wz == Some(inside(LandmarkKind::Zero))
                && wf == Some(inside(LandmarkKind::Saddle) - inside(LandmarkKind::LocalMax));
            Ok((set, r, wz, wf, ok))
        })
        .collect::<Result<_, _>>()?;

    let mut out = Outcome::default();
    let mut counts = String::from("# schema: geflab-landmark-counts v1\nsample,zeros,saddles,maxima,degenerate,contour_r,winding_g,winding_f\n");
    let mut mismatches = 0usize;
    for (i, (set, r, wz, wf, ok)) in per_sample.iter().enumerate() {
        let mut buf = Vec::new();
        write_landmarks(&mut buf, set.all())?;
        out.file(&format!("landmarks/landmarks_{i:04}.csv"), buf);
        let n = |k: LandmarkKind| set.all().filter(|l| l.kind == k).count();
        let _ = writeln!(
            counts,
            "{i},{},{},{},{},{r:?},{},{}",
            n(LandmarkKind::Zero),
            n(LandmarkKind::Saddle),
            n(LandmarkKind::LocalMax),
            n(LandmarkKind::Degenerate),
            wz.map_or("NA".into(), |w| w.to_string()),
            wf.map_or("NA".into(), |w| w.to_string()),
        );
        mismatches += usize::from(!ok);
    }
    out.file("landmark_counts.csv", counts.into_bytes());
    out.checks.push(Check::at_most("landmarks/winding", 12, mismatches as f64, 0.0).with_note(format!("{} samples", per_sample.len())));
    Ok(out)
}

pub fn run_campaign(m: &MomentsConfig, seed: u64) -> Result<CampaignSummary, RunError> {
    let mut c = CountingCampaign::new(m.radii.clone(), m.samples);
    c.pitch_gap = m.pitch_gap;
    Ok(c.run(&GefSource::new(m.working_radius, seed))?)
}

/// Default counting fit ranges with their target slopes and tolerances.
pub const COUNTING_FITS: [(PairKind, (f64, f64), f64, f64); 5] = [
    (PairKind::ZeroZero, (0.3, 0.8), 6.0, 0.4),
    (PairKind::CritCrit, (0.1, 0.5), 4.0, 0.3),
    (PairKind::PlusPlus, (0.35, 0.8), 7.0, 0.6),
    (PairKind::MinusMinus, (0.35, 0.8), 7.0, 0.6),
    (PairKind::ZeroPlus, (0.3, 0.8), 6.0, 0.4),
];

pub fn counting_fits(s: &CampaignSummary) -> Vec<(String, Result<ExponentFit, EstimatorError>)> {
    COUNTING_FITS.iter().map(|&(p, range, _, _)| (p.label().to_string(), fit_exponent(&s.profile(p), range))).collect()
}

pub fn first_moment_checks(s: &CampaignSummary, m: &MomentsConfig) -> Vec<Check> {
    let rho = m.first_moment_radius;
    let labels = ["z", "c", "c+", "c-"];
    let mut checks = Vec::new();
    match s.first_moments(rho) {
        Ok(fm) => {
            for (k, kind) in CountKind::ALL.iter().enumerate() {
                let want = kind.expected_per_rho2() * rho * rho;
                let (v, se) = fm[k];
                checks.push(Check::abs(&format!("2/E N{}", labels[k]), 2, (v / want, se / want), 1.0, 0.02).with_note(format!("ratio to {want:.6}")));
            }
            let k = s.radii.iter().position(|&r| (r - rho).abs() < 1e-12).unwrap_or(0);
            let disks = (s.n_disks[k] * s.samples()) as f64;
            checks.push(Check { target: "≥ 2e4".into(), pass: disks >= 2e4, ..Check::at_most("2/disks", 2, disks, f64::INFINITY) });
        }
        Err(e) => checks.push(Check::failed("2/first moments", 2, "ratio 1 ± 0.02", e)),
    }
    checks
}

pub fn repulsion_checks(s: &CampaignSummary, m: &MomentsConfig) -> Vec<Check> {
    let rho = m.repulsion_radius;
    [(PairKind::CritCrit, 4, 6.0 / 25.0, 0.03), (PairKind::PlusMinus, 5, 0.75, 0.08)]
        .iter()
        .map(|&(p, crit, target, tol)| {
            let id = format!("{crit}/{} counting", p.label());
            match s.repulsion_factor(p, rho) {
                Ok(v) => Check::abs(&id, crit, v, target, tol).with_note(format!("rho {rho}")),
                Err(e) => Check::failed(&id, crit, &format!("{target} ± {tol}"), e),
            }
        })
        .collect()
}

pub fn slope_checks(fits: &[(String, Result<ExponentFit, EstimatorError>)]) -> Vec<Check> {
    fits.iter()
        .zip(COUNTING_FITS)
        .map(|((label, fit), (_, range, target, tol))| {
            let id = format!("6/{label} slope");
            match fit {
                Ok(f) => Check::abs(&id, 6, (f.slope, f.slope_stderr), target, tol).with_note(format!("fit {:?}", range)),
                Err(e) => Check::failed(&id, 6, &format!("{target} ± {tol}"), e),
            }
        })
        .collect()
}

/// First and second moments by counting.
pub fn moments(cfg: &RunConfig, seed: u64) -> Result<Outcome, RunError> {
    let m = &cfg.moments;
    let s = run_campaign(m, seed)?;
    moments_outcome(&s, m)
}

pub fn moments_outcome(s: &CampaignSummary, m: &MomentsConfig) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    let profiles: Vec<RadialProfile> = PairKind::ALL.iter().map(|&p| s.profile(p)).collect();
    out.file("profiles.csv", profiles_csv(&profiles)?);
    let labels = ["z", "c", "c+", "c-"];
    let firsts: Vec<RadialProfile> = CountKind::ALL
        .iter()
        .zip(labels)
        .map(|(&kind, label)| {
            let rows = (0..s.radii.len())
                .map(|k| {
                    let (estimate, stderr) = s.first_moment(kind, k);
                    ProfileRow { rho: s.radii[k], estimate, stderr, n_samples: s.samples(), n_disks: s.n_disks[k] * s.samples() }
                })
                .collect();
            RadialProfile::new(label, rows)
        })
        .collect();
    out.file("first_moments.csv", profiles_csv(&firsts)?);
    let fits = counting_fits(s);
    let ok: Vec<(String, ExponentFit)> = fits.iter().filter_map(|(l, f)| f.as_ref().ok().map(|f| (l.clone(), f.clone()))).collect();
    out.file("fits.csv", fits_csv(&ok));
    out.checks.extend(first_moment_checks(s, m));
    out.checks.extend(repulsion_checks(s, m));
    out.checks.extend(slope_checks(&fits));
    let d = &s.diagnostics;
    out.notes.push(format!(
        "{} samples; newton failures {}, escaped {}, dedup merges {}, coincidences {}",
        s.samples(),
        d.newton_failures,
        d.escaped,
        d.dedup_merges,
        d.coincidences
    ));
    Ok(out)
}

/// σ over `±ir` for every radius, one independent stream per radius.
pub fn sigma_rows(k: &KacRiceConfig, seed: u64) -> Result<Vec<KacRiceRow>, RunError> {
    let mut rows = Vec::new();
    for (i, &r) in k.sigma_radii.iter().enumerate() {
        let s = sigma_pair(C64::new(0.0, r), C64::new(0.0, -r), &Budget::new(k.sigma_draws, seed), Route::Covariance, i as u64 + 1)?;
        for (kind, (value, stderr)) in [("c", s.all), ("c+", s.plus), ("c-", s.minus), ("mixed", s.mixed)] {
            rows.push(KacRiceRow { kind: kind.into(), r, value, stderr, n_draws: s.draws });
        }
    }
    Ok(rows)
}

/// `E[|∂G(z)|²·|jac F(0)|·1{jac F(0) < 0} | G(z) = F(0) = 0]` over `|z|`.
pub fn zcm_rows(k: &KacRiceConfig, seed: u64) -> Result<Vec<KacRiceRow>, RunError> {
    k.zcm_radii
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let m = zero_crit_moments(C64::new(r, 0.0), C64::new(0.0, 0.0), &Budget::new(k.zcm_draws, seed), Route::Projection, i as u64 + 1)?;
            Ok(KacRiceRow { kind: "zc-".into(), r, value: m.minus.0, stderr: m.minus.1, n_draws: m.draws })
        })
        .collect()
}

pub fn cc_integral(k: &KacRiceConfig, seed: u64) -> Result<PairIntegral, RunError> {
    Ok(integrate_pair(PairIntensityKind::CritCrit, k.integral_rho, k.intervals, &Budget::new(k.integral_draws, seed), Route::Projection)?)
}

/// `E[Nc(Nc−1)] / (E Nc)²` from the integrated two-point intensity.
pub fn cc_integral_check(p: &PairIntegral, rho: f64) -> Check {
    let first = 5.0 / 3.0 * rho * rho;
    let d = first * first;
    Check::abs("4/cc kac-rice", 4, (p.value / d, p.stderr / d), 6.0 / 25.0, 0.03)
        .with_note(format!("rho {rho}; quadrature gap {:.2e}", p.richardson / d))
}

pub fn sigma_checks(rows: &[KacRiceRow]) -> Vec<Check> {
    let mut checks = Vec::new();
    if let Some(row) = rows.iter().find(|r| r.kind == "c" && (r.r - 0.01).abs() < 1e-12) {
        let r2 = row.r * row.r;
        checks.push(Check::rel_or_se("3/sigma_c(r)/r^2", 3, (row.value / r2, row.stderr / r2), 8.0, 0.05, 5.0).with_note(format!("{} draws", row.n_draws)));
    }
    for kind in ["c+", "c-"] {
        let id = format!("7/sigma_{kind} slope");
        match fit_exponent(&kacrice_profile(rows, kind), (0.02, 0.2)) {
            Ok(f) => checks.push(Check::abs(&id, 7, (f.slope, f.slope_stderr), 5.0, 0.3)),
            Err(e) => checks.push(Check::failed(&id, 7, "5 ± 0.3", e)),
        }
    }
    checks
}

pub fn zcm_check(rows: &[KacRiceRow]) -> Check {
    match fit_exponent(&kacrice_profile(rows, "zc-"), (0.3, 0.8)) {
        Ok(f) => Check::abs("7/zc- integrand slope", 7, (f.slope, f.slope_stderr), 16.0, 0.5),
        Err(e) => Check::failed("7/zc- integrand slope", 7, "16 ± 0.5", e),
    }
}

fn mr_table(radii: &[f64]) -> Result<(Vec<u8>, Vec<(f64, f64)>), RunError> {
    let mut s = String::from("# schema: geflab-mr v1\nr,i,j,re,im,closed_re,closed_im\n");
    let mut gaps = Vec::new();
    for &r in radii {
        let m = conditional_derivative_cov(r)?;
        let want = closed::mr(r);
        let mut gap: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let (a, b) = (m.get(i, j), want.get(i, j));
                gap = gap.max((a - b).norm() / b.norm().max(1.0));
                let _ = writeln!(s, "{r:?},{i},{j},{:?},{:?},{:?},{:?}", a.re, a.im, b.re, b.im);
            }
        }
        gaps.push((r, gap));
    }
    let m0 = closed::m0();
    for i in 0..3 {
        for j in 0..3 {
            let v = m0.get(i, j);
            let _ = writeln!(s, "0.0,{i},{j},{:?},{:?},{:?},{:?}", v.re, v.im, v.re, v.im);
        }
    }
    Ok((s.into_bytes(), gaps))
}

/// σ profiles, the conditioned derivative covariance, the zc− integrand and
/// the integrated cc intensity.
pub fn kacrice(cfg: &RunConfig, seed: u64) -> Result<Outcome, RunError> {
    let k = &cfg.kacrice;
    let mut out = Outcome::default();
    let sig = sigma_rows(k, seed)?;
    out.file("sigma.csv", kacrice_csv(&sig)?);
    out.checks.extend(sigma_checks(&sig));

    let (table, gaps) = mr_table(&k.mr_radii)?;
    out.file("mr.csv", table);
    for (r, gap) in gaps {
        // Below r = 0.1 the regression loses digits to the conditioning.
        if r >= 0.1 - 1e-12 {
            out.checks.push(Check::at_most(&format!("1/M^r r={r}"), 1, gap, 1e-10));
        } else {
            out.notes.push(format!("M^r at r={r}: max deviation from closed form {gap:.2e}"));
        }
    }

    let zcm = zcm_rows(k, seed)?;
    out.file("zcm.csv", kacrice_csv(&zcm)?);
    out.checks.push(zcm_check(&zcm));

    let mut fits = Vec::new();
    for (label, rows, range) in [("c+", &sig, (0.02, 0.2)), ("c-", &sig, (0.02, 0.2)), ("zc-", &zcm, (0.3, 0.8))] {
        if let Ok(f) = fit_exponent(&kacrice_profile(rows, label), range) {
            fits.push((label.to_string(), f));
        }
    }
    out.file("fits.csv", fits_csv(&fits));

    let p = cc_integral(k, seed)?;
    out.checks.push(cc_integral_check(&p, k.integral_rho));
    out.file(
        "integral.csv",
        format!(
            "# schema: geflab-integral v1\nkind,rho,value,stderr,coarse,intervals\ncc,{:?},{:?},{:?},{:?},{}\n",
            k.integral_rho, p.value, p.stderr, p.coarse, p.intervals
        )
        .into_bytes(),
    );
    Ok(out)
}

/// Landmark batches of noise spectrograms and of GEF realizations, and the
/// mean spectrogram power.
pub struct SpectroStudy {
    pub noise: Vec<[(usize, f64); 3]>,
    pub gef: Vec<[(usize, f64); 3]>,
    pub power: RunningStats,
}

pub fn spectro_study(s: &SpectrogramConfig, seed: u64) -> Result<SpectroStudy, RunError> {
    let spec = GridSpec::square(0.0, -0.5 * s.side, s.side, s.delta);
    let noise: Vec<([(usize, f64); 3], f64)> = (0..s.realizations as u64)
        .into_par_iter()
        .map(|i| -> Result<_, RunError> {
            let mut rng = stream(seed, task_id(TAG_SPECTRO_NOISE, i));
            let f = white_noise_for(spec.x(0), spec.x(spec.nx - 1), s.dt, &mut rng)?;
            let g = stft_gauss(&f, &spec)?;
            Ok((extract_grid_landmarks(&g).batch(), g.mean_power()))
        })
        .collect::<Result<_, _>>()?;
    let radius = 5.0;
    let area = std::f64::consts::PI * radius * radius;
    let gef: Vec<[(usize, f64); 3]> = (0..s.gef_samples as u64)
        .into_par_iter()
        .map(|i| -> Result<_, RunError> {
            let g = sample_gef(radius + 0.5, seed, task_id(TAG_SPECTRO_GEF, i))?;
            let set = find_landmarks(&g, &Disk::centered(radius), &SearchParams::default())?;
            let n = |k: LandmarkKind| set.all().filter(|l| l.kind == k).count();
            Ok([(n(LandmarkKind::Zero), area), (n(LandmarkKind::Saddle), area), (n(LandmarkKind::LocalMax), area)])
        })
        .collect::<Result<_, _>>()?;
    let mut power = RunningStats::new();
    for (_, p) in &noise {
        power.push(*p);
    }
    Ok(SpectroStudy { noise: noise.into_iter().map(|n| n.0).collect(), gef, power })
}

pub fn spectro_checks(st: &SpectroStudy) -> Vec<Check> {
    let mut checks = Vec::new();
    let area: f64 = st.noise.iter().map(|b| b[0].1).sum();
    checks.push(Check { target: "≥ 400".into(), pass: area >= 400.0, ..Check::at_most("13/area", 13, area, f64::INFINITY) });
    let rows = compare_to_gef(&st.noise, &st.gef);
    if rows.is_empty() {
        checks.push(Check::failed("13/intensities", 13, "(1, 4/3, 1/3)/π", "no realizations"));
    }
    for r in &rows {
        checks.push(Check::within_se(&format!("13/{} noise", r.kind), 13, (r.noise.value, r.noise.stderr), r.expected, 3.0));
    }
    checks.push(Check::abs("13/mean power", 13, (st.power.mean, st.power.stderr()), 1.0, 0.05));
    checks
}

/// Landmark intensities of white-noise spectrograms against GEF counts.
pub fn spectrogram(cfg: &RunConfig, seed: u64) -> Result<Outcome, RunError> {
    let st = spectro_study(&cfg.spectrogram, seed)?;
    let mut out = Outcome::default();
    let mut s = String::from("# schema: geflab-spectrogram-comparison v1\nkind,noise,noise_stderr,gef,gef_stderr,expected,z_score,flagged\n");
    for r in compare_to_gef(&st.noise, &st.gef) {
        let _ = writeln!(
            s,
            "{},{:?},{:?},{:?},{:?},{:?},{:?},{}",
            r.kind, r.noise.value, r.noise.stderr, r.gef.value, r.gef.stderr, r.expected, r.z_score, r.flagged
        );
        out.notes.push(format!("{}: noise {:.5} ± {:.5}, gef {:.5} ± {:.5}, z {:.2}", r.kind, r.noise.value, r.noise.stderr, r.gef.value, r.gef.stderr, r.z_score));
    }
    out.file("comparison.csv", s.into_bytes());
    let mut b = String::from("# schema: geflab-spectrogram-batches v1\nrealization,minima,saddles,maxima,area,cell_area\n");
    for (i, x) in st.noise.iter().enumerate() {
        let _ = writeln!(b, "{i},{},{},{},{:?},{:?}", x[0].0, x[1].0, x[2].0, x[0].1, x[1].1);
    }
    out.file("batches.csv", b.into_bytes());
    out.checks.extend(spectro_checks(&st));
    // One example grid for plotting.
    if cfg.spectrogram.realizations > 0 {
        let spec = GridSpec::square(0.0, -0.5 * cfg.spectrogram.side, cfg.spectrogram.side, cfg.spectrogram.delta);
        let mut rng = stream(seed, task_id(TAG_SPECTRO_NOISE, 0));
        let f = white_noise_for(spec.x(0), spec.x(spec.nx - 1), cfg.spectrogram.dt, &mut rng)?;
        let mut buf = Vec::new();
        stft_gauss(&f, &spec)?.write_csv(&mut buf)?;
        out.file("spectrogram_0000.csv", buf);
    }
    Ok(out)
}

/// Exponent fits of the profiles in a profile or Kac–Rice CSV.
pub fn fit(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let path = cfg.fit.input.as_ref().ok_or_else(|| RunError::Input("fit.input is not set".into()))?;
    let text = fs::read_to_string(path).map_err(|e| RunError::Input(format!("{}: {e}", path.display())))?;
    let schema = text.lines().next().unwrap_or("").trim_start_matches("# schema: ").trim();
    let bad = |e: CsvError| RunError::Input(format!("{}: {e}", path.display()));
    let profiles: Vec<RadialProfile> = if schema == PROFILE_SCHEMA {
        read_profiles(text.as_bytes()).map_err(bad)?
    } else if schema == KACRICE_SCHEMA {
        let rows = read_kacrice(text.as_bytes()).map_err(bad)?;
        let mut kinds: Vec<String> = Vec::new();
        for r in &rows {
            if !kinds.contains(&r.kind) {
                kinds.push(r.kind.clone());
            }
        }
        kinds.iter().map(|k| kacrice_profile(&rows, k)).collect()
    } else {
        return Err(RunError::Input(format!("{}: unsupported schema `{schema}`", path.display())));
    };
    let selected: Vec<&RadialProfile> = if cfg.fit.labels.is_empty() {
        profiles.iter().collect()
    } else {
        let mut v = Vec::new();
        for l in &cfg.fit.labels {
            v.push(profiles.iter().find(|p| &p.label == l).ok_or_else(|| RunError::Input(format!("no profile labelled `{l}`")))?);
        }
        v
    };
    let mut out = Outcome::default();
    let mut fits = Vec::new();
    for p in selected {
        let id = format!("fit/{}", p.label);
        match fit_exponent(p, cfg.fit.range) {
            Ok(f) => {
                out.notes.push(format!("{}: slope {:.3} ± {:.3} over {:?} ({} rows)", p.label, f.slope, f.slope_stderr, f.fit_range, f.n_rows));
                out.checks.push(Check { target: "fit".into(), pass: true, ..Check::at_most(&id, 0, f.slope, f64::INFINITY) }.with_stderr(f.slope_stderr));
                fits.push((p.label.clone(), f));
            }
            Err(e) => out.checks.push(Check::failed(&id, 0, "fit", e)),
        }
    }
    out.file("fits.csv", fits_csv(&fits));
    Ok(out)
}

impl Check {
    fn with_stderr(mut self, se: f64) -> Self {
        self.stderr = se;
        self
    }
}
