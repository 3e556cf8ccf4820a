//! The full criterion suite. Expensive shared inputs (the counting campaign,
//! the σ and zc− profiles) are computed once per [`Suite`].

use std::sync::OnceLock;

use rayon::prelude::*;

use geflab_core::estimators::{fit_exponent, CampaignSummary, ProfileRow};
use geflab_core::field::sample_gef;
use geflab_core::kacrice::{
    closed, conditional_derivative_cov, explicit_ratio, explicit_ratio_mc, integrate_radial, pair_intensity,
    phi_expectation, proxy_expansion_check, sigma_pair, zcm_integral, zcm_integral_mc, zero_crit_moments, Budget,
    KacRiceRow, PairIntegral, PairIntensityKind, PhiVariant, Route,
};
use geflab_core::kernel::{eval_cov, DerivDescriptor};
use geflab_core::landmarks::{contour_radius_avoiding, find_landmarks, winding_number, Disk, SearchParams};
use geflab_core::linalg::gaussian_regression;
use geflab_core::rng::task_id;
use geflab_core::{LandmarkKind, RadialProfile, C64};

use crate::config::RunConfig;
use crate::experiments::{
    cc_integral, cc_integral_check, checks_csv, counting_fits, first_moment_checks, repulsion_checks, run_campaign,
    sigma_checks, sigma_rows, slope_checks, spectro_checks, spectro_study, zcm_check, zcm_rows, Check, Outcome, RunError,
};

pub const CRITERIA: std::ops::RangeInclusive<u8> = 1..=13;

/// Checks that fail at the configured budgets for reasons analysed outside
/// the code: the finite-ρ curvature of the zc+ counting profile and the
/// O(|z|) corrections to the zc− integrand over `[0.3, 0.8]`. They are still
/// run and reported as FAIL.
pub const KNOWN_DEVIATIONS: &[&str] = &["6/zc+ slope", "7/zc- integrand slope"];

pub const TAG_STRUCTURAL: u32 = 33;

type Shared<T> = OnceLock<Result<T, String>>;

pub struct Suite<'a> {
    cfg: &'a RunConfig,
    seed: u64,
    campaign: Shared<CampaignSummary>,
    sigma: Shared<Vec<KacRiceRow>>,
    zcm: Shared<Vec<KacRiceRow>>,
    integral: Shared<PairIntegral>,
}

fn cached<'s, T>(cell: &'s Shared<T>, f: impl FnOnce() -> Result<T, RunError>) -> Result<&'s T, String> {
    cell.get_or_init(|| f().map_err(|e| e.to_string())).as_ref().map_err(Clone::clone)
}

fn agree(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 - b.0, (a.1 * a.1 + b.1 * b.1).sqrt())
}

impl<'a> Suite<'a> {
    pub fn new(cfg: &'a RunConfig, seed: u64) -> Self {
        Self {
            cfg,
            seed,
            campaign: OnceLock::new(),
            sigma: OnceLock::new(),
            zcm: OnceLock::new(),
            integral: OnceLock::new(),
        }
    }

    fn campaign(&self) -> Result<&CampaignSummary, String> {
        cached(&self.campaign, || run_campaign(&self.cfg.moments, self.seed))
    }

    fn sigma(&self) -> Result<&Vec<KacRiceRow>, String> {
        cached(&self.sigma, || sigma_rows(&self.cfg.kacrice, self.seed))
    }

    fn zcm(&self) -> Result<&Vec<KacRiceRow>, String> {
        cached(&self.zcm, || zcm_rows(&self.cfg.kacrice, self.seed))
    }

    fn integral(&self) -> Result<&PairIntegral, String> {
        cached(&self.integral, || cc_integral(&self.cfg.kacrice, self.seed))
    }

    fn budget(&self, draws: usize) -> Budget {
        Budget::new(draws, self.seed)
    }

    /// Every check of criterion `n`. Failures to compute become FAIL checks.
    pub fn criterion(&self, n: u8) -> Vec<Check> {
        let a = &self.cfg.acceptance;
        match n {
            1 => kernel_checks(),
            2 => match self.campaign() {
                Ok(s) => first_moment_checks(s, &self.cfg.moments),
                Err(e) => vec![Check::failed("2/first moments", 2, "ratio 1 ± 0.02", e)],
            },
            3 => {
                let r = 0.01;
                match sigma_pair(C64::new(0.0, r), C64::new(0.0, -r), &self.budget(a.smallr_draws), Route::Covariance, 0) {
                    Ok(s) => vec![Check::rel_or_se("3/sigma_c(r)/r^2", 3, (s.all.0 / (r * r), s.all.1 / (r * r)), 8.0, 0.05, 5.0)
                        .with_note(format!("r {r}; {} draws", s.draws))],
                    Err(e) => vec![Check::failed("3/sigma_c(r)/r^2", 3, "8", e)],
                }
            }
            4 | 5 => {
                let mut v: Vec<Check> = match self.campaign() {
                    Ok(s) => repulsion_checks(s, &self.cfg.moments).into_iter().filter(|c| c.criterion == n).collect(),
                    Err(e) => vec![Check::failed(&format!("{n}/counting"), n, "repulsion factor", e)],
                };
                if n == 4 {
                    v.push(match self.integral() {
                        Ok(p) => cc_integral_check(p, self.cfg.kacrice.integral_rho),
                        Err(e) => Check::failed("4/cc kac-rice", 4, "0.24 ± 0.03", e),
                    });
                }
                v
            }
            6 => match self.campaign() {
                Ok(s) => slope_checks(&counting_fits(s)),
                Err(e) => vec![Check::failed("6/slopes", 6, "slopes", e)],
            },
            7 => {
                let mut v = match self.sigma() {
                    Ok(rows) => sigma_checks(rows).into_iter().filter(|c| c.criterion == 7).collect(),
                    Err(e) => vec![Check::failed("7/sigma slopes", 7, "5 ± 0.3", e)],
                };
                v.push(match self.zcm() {
                    Ok(rows) => zcm_check(rows),
                    Err(e) => Check::failed("7/zc- integrand slope", 7, "16 ± 0.5", e),
                });
                v.push(quadrature_exponent_check(self.cfg.kacrice.intervals));
                v
            }
            8 => self.zero_crit_limits(),
            9 => self.closed_form_checks(),
            10 => self.phi_checks(),
            11 => self.proxy_checks(),
            12 => self.structural_checks(),
            13 => match spectro_study(&self.cfg.spectrogram, self.seed) {
                Ok(st) => spectro_checks(&st),
                Err(e) => vec![Check::failed("13/spectrogram", 13, "(1, 4/3, 1/3)/π", e)],
            },
            _ => vec![Check::failed(&format!("{n}/unknown"), n, "-", "no such criterion")],
        }
    }

    pub fn run_all(&self) -> Vec<Check> {
        CRITERIA.flat_map(|n| self.criterion(n)).collect()
    }

    fn zero_crit_limits(&self) -> Vec<Check> {
        let s = 0.05;
        match zero_crit_moments(C64::new(s, 0.0), C64::new(0.0, 0.0), &self.budget(self.cfg.acceptance.zc_draws), Route::Projection, 0) {
            Ok(m) => vec![
                Check::rel_or_se("8/zc+ numerator/s^2", 8, (m.plus.0 / (s * s), m.plus.1 / (s * s)), 8.0, 0.10, 5.0),
                Check::abs("8/fourth moment", 8, m.fourth, 8.0, 0.4),
            ],
            Err(e) => vec![Check::failed("8/zc+ limits", 8, "8", e)],
        }
    }

    fn closed_form_checks(&self) -> Vec<Check> {
        let b = self.budget(self.cfg.acceptance.closed_draws);
        let mut v: Vec<Check> = [0.25, 0.5, 1.0]
            .iter()
            .map(|&r| Check::within_se(&format!("9/ratio r={r}"), 9, explicit_ratio_mc(r, &b), explicit_ratio(r), 5.0))
            .collect();
        v.extend(
            [0.6, 1.0]
                .iter()
                .map(|&z| Check::within_se(&format!("9/zc- indicator |z|={z}"), 9, zcm_integral_mc(z, &b), zcm_integral(z), 5.0)),
        );
        v
    }

    fn phi_checks(&self) -> Vec<Check> {
        let radii = [0.05, 0.07, 0.1, 0.14, 0.2, 0.3, 0.4, 0.5];
        let b = self.budget(self.cfg.acceptance.phi_draws);
        [(PhiVariant::Plus, "phi"), (PhiVariant::Minus, "phi'")]
            .iter()
            .map(|&(variant, label)| {
                let rows = radii
                    .iter()
                    .map(|&rho| {
                        let (estimate, stderr) = phi_expectation(variant, rho, &b);
                        ProfileRow { rho, estimate, stderr, n_samples: b.draws, n_disks: 0 }
                    })
                    .collect();
                let id = format!("10/{label} slope");
                match fit_exponent(&RadialProfile::new(label, rows), (0.05, 0.5)) {
                    Ok(f) => Check::abs(&id, 10, (f.slope, f.slope_stderr), 3.0, 0.2),
                    Err(e) => Check::failed(&id, 10, "3 ± 0.2", e),
                }
            })
            .collect()
    }

    fn proxy_checks(&self) -> Vec<Check> {
        let b = self.budget(self.cfg.acceptance.proxy_draws);
        let reports: Result<Vec<_>, _> = [0.1, 0.05, 0.02, 0.01].iter().map(|&r| proxy_expansion_check(r, &b)).collect();
        match reports {
            Ok(reps) => {
                let last = reps.last().unwrap();
                let p99: Vec<f64> = reps.iter().map(|r| r.residual_p99).collect();
                let hi = p99.iter().cloned().fold(f64::MIN, f64::max);
                let lo = p99.iter().cloned().fold(f64::MAX, f64::min);
                vec![
                    Check::abs("11/E[A^2] r=0.01", 11, last.a2, 8.0, 0.4),
                    Check::at_most("11/residual p99 spread", 11, hi / lo, 3.0)
                        .with_note(format!("p99 {}", p99.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" "))),
                ]
            }
            Err(e) => vec![Check::failed("11/proxy", 11, "8", e)],
        }
    }

    fn structural_checks(&self) -> Vec<Check> {
        let n = self.cfg.acceptance.structural_samples;
        let origin = C64::new(0.0, 0.0);
        let params = SearchParams::default();
        let per: Result<Vec<(bool, bool)>, String> = (0..n as u64)
            .into_par_iter()
            .map(|i| {
                let g = sample_gef(5.5, self.seed, task_id(TAG_STRUCTURAL, i)).map_err(|e| e.to_string())?;
                let set = find_landmarks(&g, &Disk::centered(5.0), &params).map_err(|e| e.to_string())?;
                let pos: Vec<C64> = set.all().map(|l| l.position).collect();
                let r = contour_radius_avoiding(pos.iter().copied(), origin, 4.0, 1e-3);
                let inside = |k: LandmarkKind| set.all().filter(|l| l.kind == k && l.position.norm() < r).count() as i64;
                let nan = C64::new(f64::NAN, 0.0);
                let wz = winding_number(|z| g.eval_jet(z).map(|j| j.w_g).unwrap_or(nan), origin, r);
                let wf = winding_number(|z| g.eval_jet(z).map(|j| j.w_f).unwrap_or(nan), origin, r);
                Ok((
                    wz == Some(inside(LandmarkKind::Zero)),
                    wf == Some(inside(LandmarkKind::Saddle) - inside(LandmarkKind::LocalMax)),
                ))
            })
            .collect();
        let mut v = match per {
            Ok(p) => vec![
                Check::at_most("12/argument principle", 12, p.iter().filter(|x| !x.0).count() as f64, 0.0)
                    .with_note(format!("mismatches over {n} samples")),
                Check::at_most("12/winding of F", 12, p.iter().filter(|x| !x.1).count() as f64, 0.0)
                    .with_note(format!("mismatches over {n} samples")),
            ],
            Err(e) => vec![Check::failed("12/topology", 12, "0 mismatches", e)],
        };
        v.extend(self.invariance_checks());
        v
    }

    fn invariance_checks(&self) -> Vec<Check> {
        let draws = self.cfg.acceptance.invariance_draws;
        let b = |k: u64| Budget::new(draws, self.seed.wrapping_add(k));
        let zeta = C64::new(0.8, -0.5);
        let rot = C64::from_polar(1.0, 1.1);
        let mut v = Vec::new();
        for (j, kind) in [PairIntensityKind::CritCrit, PairIntensityKind::ZeroPlus].into_iter().enumerate() {
            let (z, w) = kind.canonical_points(0.4);
            let j = 3 * j as u64;
            let r = (|| {
                let base = pair_intensity(kind, z, w, &b(j + 1), Route::Covariance)?;
                let moved = pair_intensity(kind, z + zeta, w + zeta, &b(j + 2), Route::Covariance)?;
                let turned = pair_intensity(kind, rot * z, rot * w, &b(j + 3), Route::Covariance)?;
                Ok::<_, geflab_core::kacrice::KacRiceError>((base, moved, turned))
            })();
            match r {
                Ok((base, moved, turned)) => {
                    v.push(Check::within_se(&format!("12/q_{} translation", kind.label()), 12, agree(moved, base), 0.0, 3.0));
                    v.push(Check::within_se(&format!("12/q_{} rotation", kind.label()), 12, agree(turned, base), 0.0, 3.0));
                }
                Err(e) => v.push(Check::failed(&format!("12/q_{}", kind.label()), 12, "0 within 3σ", e)),
            }
        }
        let r = 0.2;
        let rot = C64::from_polar(1.0, 0.7);
        let (p, q) = (C64::new(0.0, r), C64::new(0.0, -r));
        match (
            sigma_pair(p, q, &b(7), Route::Covariance, 0),
            sigma_pair(rot * p, rot * q, &b(8), Route::Covariance, 0),
        ) {
            (Ok(x), Ok(y)) => v.push(Check::within_se("12/sigma rotation", 12, agree(y.all, x.all), 0.0, 3.0)),
            (Err(e), _) | (_, Err(e)) => v.push(Check::failed("12/sigma rotation", 12, "0 within 3σ", e)),
        }
        v
    }
}

fn rel_gap(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

/// Kernel blocks and the conditioned covariance against closed forms.
fn kernel_checks() -> Vec<Check> {
    let o = C64::new(0.0, 0.0);
    let (mut blocks, mut regression): (f64, f64) = (0.0, 0.0);
    for r in [0.1, 0.5, 1.0] {
        let descs = [
            DerivDescriptor::f(C64::new(0.0, r)),
            DerivDescriptor::f(C64::new(0.0, -r)),
            DerivDescriptor::f_real(1, 0, o).expect("valid order"),
            DerivDescriptor::f_real(0, 2, o).expect("valid order"),
            DerivDescriptor::f_real(0, 3, o).expect("valid order"),
        ];
        let j = eval_cov(&descs);
        let (m1, m2, m3) = (closed::m1(r), closed::m2(r), closed::m3());
        for a in 0..2 {
            for b in 0..2 {
                blocks = blocks.max(rel_gap(j.get(a, b), m1.get(a, b)));
            }
            for b in 0..3 {
                blocks = blocks.max(rel_gap(j.get(a, 2 + b), m2[a][b]));
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                blocks = blocks.max(rel_gap(j.get(2 + a, 2 + b), m3.get(a, b)));
            }
        }
        match gaussian_regression(&j, &[2, 3, 4], &[0, 1]) {
            Ok(m) => {
                let want = closed::mr(r);
                for a in 0..3 {
                    for b in 0..3 {
                        regression = regression.max(rel_gap(m.get(a, b), want.get(a, b)));
                    }
                }
            }
            Err(_) => regression = f64::INFINITY,
        }
    }
    let limit = conditional_derivative_cov(1e-3).map(|m| m.max_abs_diff(&closed::m0())).unwrap_or(f64::INFINITY);
    vec![
        Check::at_most("1/kernel blocks", 1, blocks, 1e-12),
        Check::at_most("1/regression M^r", 1, regression, 1e-10),
        Check::at_most("1/M^0 at r=1e-3", 1, limit, 1e-2),
    ]
}

/// The radial quadrature turns an `s^16` integrand into a `ρ^20` disk
/// integral.
fn quadrature_exponent_check(intervals: usize) -> Check {
    let rows: Result<Vec<ProfileRow>, _> = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8]
        .iter()
        .map(|&rho| {
            integrate_radial(rho, intervals, |_, s| Ok((s.powi(16), 0.0)))
                .map(|p| ProfileRow { rho, estimate: p.value, stderr: p.value * 1e-6, n_samples: 0, n_disks: 0 })
        })
        .collect();
    let fit = rows.map_err(|e| e.to_string()).and_then(|r| fit_exponent(&RadialProfile::new("s16", r), (0.3, 0.8)).map_err(|e| e.to_string()));
    match fit {
        Ok(f) => Check::abs("7/quadrature exponent", 7, (f.slope, 0.0), 20.0, 0.01),
        Err(e) => Check::failed("7/quadrature exponent", 7, "20", e),
    }
}

pub fn is_known_deviation(c: &Check) -> bool {
    KNOWN_DEVIATIONS.contains(&c.id.as_str())
}

/// Full suite as a subcommand outcome.
pub fn acceptance(cfg: &RunConfig, seed: u64) -> Result<Outcome, RunError> {
    let suite = Suite::new(cfg, seed);
    let mut out = Outcome::default();
    for n in CRITERIA {
        let checks = suite.criterion(n);
        for c in &checks {
            eprintln!("{}", c.line());
        }
        out.checks.extend(checks);
    }
    for n in CRITERIA {
        let cs: Vec<&Check> = out.checks.iter().filter(|c| c.criterion == n).collect();
        let pass = cs.iter().all(|c| c.pass);
        out.notes.push(format!("criterion {n:>2}: {}", if pass { "PASS" } else { "FAIL" }));
    }
    out.files.push(("acceptance.csv".into(), checks_csv(&out.checks)));
    Ok(out)
}
