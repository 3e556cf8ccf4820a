//! Two-point Kac–Rice machinery: route agreement, an independent rejection
//! sampler, invariances and quadrature properties.

use geflab_core::kacrice::{
    integrate_radial, lens_area, pair_denominator, pair_intensity, sigma_pair, zero_crit_moments, Budget, Family,
    PairIntensityKind, Route,
};
use geflab_core::estimators::{fit_exponent, ProfileRow};
use geflab_core::kacrice::closed;
use geflab_core::kernel::{eval_cov, DerivDescriptor};
use geflab_core::linalg::{cholesky, gaussian_regression};
use geflab_core::rng::{complex_normal, stream};
use geflab_core::stats::RunningStats;
use geflab_core::{RadialProfile, C64};
use proptest::prelude::*;

fn agree(a: (f64, f64), b: (f64, f64), k: f64) -> bool {
    (a.0 - b.0).abs() <= k * (a.1 * a.1 + b.1 * b.1).sqrt()
}

#[test]
fn routes_agree_on_sigma() {
    for r in [0.1, 0.3] {
        let (z, w) = (C64::new(0.0, r), C64::new(0.0, -r));
        let a = sigma_pair(z, w, &Budget::new(200_000, 1), Route::Covariance, 0).unwrap();
        let b = sigma_pair(z, w, &Budget::new(200_000, 2), Route::Projection, 0).unwrap();
        for (x, y) in [(a.all, b.all), (a.plus, b.plus), (a.minus, b.minus), (a.mixed, b.mixed)] {
            assert!(agree(x, y, 4.0), "r={r}: {x:?} vs {y:?}");
        }
    }
}

#[test]
fn routes_agree_on_zero_critical_moments() {
    let (z, w) = (C64::new(0.5, 0.0), C64::new(0.0, 0.0));
    let a = zero_crit_moments(z, w, &Budget::new(200_000, 3), Route::Covariance, 0).unwrap();
    let b = zero_crit_moments(z, w, &Budget::new(200_000, 4), Route::Projection, 0).unwrap();
    assert!(agree(a.plus, b.plus, 4.0), "{:?} {:?}", a.plus, b.plus);
    assert!(agree(a.minus, b.minus, 4.0), "{:?} {:?}", a.minus, b.minus);
    assert!(agree(a.fourth, b.fourth, 4.0), "{:?} {:?}", a.fourth, b.fourth);
}

/// Conditioning by rejection: with the joint factor ordered given-first, the
/// given block depends only on the first two normals, which are redrawn
/// until both conditioned values fall inside an ε-ball. The residual
/// second moment `B E[xx*|accept] B*` is subtracted using the accepted `x`.
#[test]
fn regression_matches_rejection_sampling() {
    let r = 0.3;
    let o = C64::new(0.0, 0.0);
    let descs = [
        DerivDescriptor::f(C64::new(0.0, r)),
        DerivDescriptor::f(C64::new(0.0, -r)),
        DerivDescriptor::f_real(1, 0, o).unwrap(),
        DerivDescriptor::f_real(0, 2, o).unwrap(),
        DerivDescriptor::f_real(0, 3, o).unwrap(),
    ];
    let joint = eval_cov(&descs);
    let l = cholesky(&joint, 0.0).unwrap();
    let m = gaussian_regression(&joint, &[2, 3, 4], &[0, 1]).unwrap();
    // B = Σ₂₁ Σ₁₁⁻¹ from the 2×2 block.
    let (a, b, c) = (joint.get(0, 0), joint.get(0, 1), joint.get(1, 1));
    let det = a * c - b * b.conj();
    let inv = [[c / det, -b / det], [-b.conj() / det, a / det]];
    let bmat: Vec<[C64; 2]> = (2..5)
        .map(|t| [0, 1].map(|j| joint.get(t, 0) * inv[0][j] + joint.get(t, 1) * inv[1][j]))
        .collect();

    let eps = 0.1;
    let accepted = 4000;
    let mut rng = stream(17, 0);
    let mut tt = vec![vec![RunningStats::new(); 3]; 3];
    let mut xx = [[C64::new(0.0, 0.0); 2]; 2];
    for _ in 0..accepted {
        let (x, xi) = loop {
            let xi = [complex_normal(&mut rng), complex_normal(&mut rng)];
            let x0 = l.get(0, 0) * xi[0];
            let x1 = l.get(1, 0) * xi[0] + l.get(1, 1) * xi[1];
            if x0.norm() < eps && x1.norm() < eps {
                break ([x0, x1], xi);
            }
        };
        let rest = [complex_normal(&mut rng), complex_normal(&mut rng), complex_normal(&mut rng)];
        let t: Vec<C64> = (2..5)
            .map(|i| {
                let mut v = l.get(i, 0) * xi[0] + l.get(i, 1) * xi[1];
                for k in 2..=i {
                    v += l.get(i, k) * rest[k - 2];
                }
                v
            })
            .collect();
        for i in 0..3 {
            for j in 0..3 {
                tt[i][j].push((t[i] * t[j].conj()).re);
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                xx[i][j] += x[i] * x[j].conj() / accepted as f64;
            }
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            let mut bias = C64::new(0.0, 0.0);
            for p in 0..2 {
                for q in 0..2 {
                    bias += bmat[i][p] * xx[p][q] * bmat[j][q].conj();
                }
            }
            let got = tt[i][j].mean - bias.re;
            let want = m.get(i, j).re;
            assert!((got - want).abs() < 5.0 * tt[i][j].stderr() + 1e-3, "({i},{j}): {got} ± {} vs {want}", tt[i][j].stderr());
            assert!((want - closed::mr(r).get(i, j).re).abs() < 1e-10);
        }
    }
}

#[test]
fn pair_intensity_is_translation_and_rotation_invariant() {
    let budget = Budget::new(300_000, 5);
    for kind in [PairIntensityKind::CritCrit, PairIntensityKind::ZeroPlus] {
        let (z, w) = kind.canonical_points(0.4);
        let base = pair_intensity(kind, z, w, &budget, Route::Covariance).unwrap();
        let zeta = C64::new(0.8, -0.5);
        let rot = C64::from_polar(1.0, 1.1);
        let moved = pair_intensity(kind, z + zeta, w + zeta, &Budget::new(300_000, 6), Route::Covariance).unwrap();
        let turned = pair_intensity(kind, rot * z, rot * w, &Budget::new(300_000, 7), Route::Covariance).unwrap();
        assert!(agree(base, moved, 3.0), "{}: {base:?} vs translated {moved:?}", kind.label());
        assert!(agree(base, turned, 3.0), "{}: {base:?} vs rotated {turned:?}", kind.label());
    }
    // σ itself (before dividing by the determinant) is rotation invariant.
    let r = 0.2;
    let rot = C64::from_polar(1.0, 0.7);
    let a = sigma_pair(C64::new(0.0, r), C64::new(0.0, -r), &Budget::new(300_000, 8), Route::Covariance, 0).unwrap();
    let b = sigma_pair(rot * C64::new(0.0, r), rot * C64::new(0.0, -r), &Budget::new(300_000, 9), Route::Covariance, 0).unwrap();
    assert!(agree(a.all, b.all, 3.0), "{:?} {:?}", a.all, b.all);
}

#[test]
fn area_integration_adds_four_to_the_integrand_exponent() {
    let radii = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
    for p in [2.0, 8.0, 16.0] {
        let rows = radii
            .iter()
            .map(|&rho| {
                let v = integrate_radial(rho, 64, |_, s| Ok((s.powf(p), 0.0))).unwrap().value;
                ProfileRow { rho, estimate: v, stderr: v * 1e-6, n_samples: 0, n_disks: 0 }
            })
            .collect();
        let prof = RadialProfile::new("q", rows);
        let fit = fit_exponent(&prof, (0.3, 0.8)).unwrap();
        assert!((fit.slope - (p + 4.0)).abs() < 1e-3, "p={p}: {}", fit.slope);
    }
}

#[test]
fn radial_quadrature_matches_exact_moment() {
    // ∫∫_{B×B} |z−w|² dA dA = π²ρ⁶, so the (1/π²)-normalized value is ρ⁶.
    for rho in [0.2, 0.7] {
        let v = integrate_radial(rho, 64, |_, s| Ok((s * s, 0.0))).unwrap();
        // The lens weight has a square-root edge at s = 2ρ, so Simpson converges slowly.
        assert!((v.value / rho.powi(6) - 1.0).abs() < 1e-4, "{rho}: {:?}", v);
        assert!(v.richardson.abs() < 1e-3 * v.value);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lens_area_is_monotone_and_bounded(rho in 0.01f64..1.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (s1, s2) = (2.0 * rho * a.min(b), 2.0 * rho * a.max(b));
        let (l1, l2) = (lens_area(rho, s1), lens_area(rho, s2));
        prop_assert!(l1 >= l2 - 1e-15);
        prop_assert!(l1 <= std::f64::consts::PI * rho * rho * (1.0 + 1e-12));
        prop_assert!(l2 >= 0.0);
    }

    #[test]
    fn weighted_denominator_depends_on_distance_only(x in -2.0f64..2.0, y in -2.0f64..2.0, s in 0.01f64..1.5, t in 0.0f64..6.3) {
        let z = C64::new(x, y);
        let w = z + C64::from_polar(s, t);
        for fam in [Family::CritCrit, Family::ZeroCrit] {
            let d = pair_denominator(z, w, fam).unwrap() * (-(z.norm_sqr() + w.norm_sqr())).exp();
            let d0 = pair_denominator(C64::new(s, 0.0), C64::new(0.0, 0.0), fam).unwrap() * (-(s * s)).exp();
            prop_assert!((d - d0).abs() < 1e-12 * d0.max(1e-300) + 1e-15);
        }
    }
}
