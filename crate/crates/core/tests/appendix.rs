//! Kernel matrices at the symmetric pair `±ir` against hand-derived closed
//! forms, and the conditioned covariance against its limit.

use geflab_core::kacrice::{closed, conditional_derivative_cov};
use geflab_core::kernel::{eval_cov, DerivDescriptor};
use geflab_core::linalg::gaussian_regression;
use geflab_core::{HermitianCov, C64};

fn joint(r: f64) -> HermitianCov {
    let o = C64::new(0.0, 0.0);
    eval_cov(&[
        DerivDescriptor::f(C64::new(0.0, r)),
        DerivDescriptor::f(C64::new(0.0, -r)),
        DerivDescriptor::f_real(1, 0, o).unwrap(),
        DerivDescriptor::f_real(0, 2, o).unwrap(),
        DerivDescriptor::f_real(0, 3, o).unwrap(),
    ])
}

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol * b.norm().max(1.0)
}

#[test]
fn conditioning_blocks_match_closed_forms() {
    for r in [0.1, 0.5, 1.0] {
        let j = joint(r);
        let m1 = closed::m1(r);
        let m2 = closed::m2(r);
        let m3 = closed::m3();
        for a in 0..2 {
            for b in 0..2 {
                assert!(close(j.get(a, b), m1.get(a, b), 1e-12), "m1 r={r} ({a},{b}): {} vs {}", j.get(a, b), m1.get(a, b));
            }
            for b in 0..3 {
                assert!(close(j.get(a, 2 + b), m2[a][b], 1e-12), "m2 r={r} ({a},{b}): {} vs {}", j.get(a, 2 + b), m2[a][b]);
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                assert!(close(j.get(2 + a, 2 + b), m3.get(a, b), 1e-12), "m3 r={r} ({a},{b})");
            }
        }
    }
}

#[test]
fn regression_matches_conditioned_closed_form() {
    for r in [0.1, 0.5, 1.0] {
        let m = gaussian_regression(&joint(r), &[2, 3, 4], &[0, 1]).unwrap();
        let want = closed::mr(r);
        for a in 0..3 {
            for b in 0..3 {
                assert!(close(m.get(a, b), want.get(a, b), 1e-10), "r={r} ({a},{b}): {} vs {}", m.get(a, b), want.get(a, b));
            }
        }
        assert!(conditional_derivative_cov(r).unwrap().max_abs_diff(&m) < 1e-14);
    }
}

#[test]
fn conditioned_covariance_tends_to_limit() {
    let m = conditional_derivative_cov(1e-3).unwrap();
    assert!(m.max_abs_diff(&closed::m0()) < 1e-2, "{:?}", m);
    // The limit is approached at rate r²: halving r quarters the gap.
    let g1 = conditional_derivative_cov(0.02).unwrap().max_abs_diff(&closed::m0());
    let g2 = conditional_derivative_cov(0.01).unwrap().max_abs_diff(&closed::m0());
    assert!((g1 / g2 - 4.0).abs() < 0.2, "{g1} {g2}");
}

#[test]
fn closed_form_is_positive_semidefinite_and_continuous() {
    let mut prev = closed::mr(0.05);
    for k in 2..=40 {
        let r = 0.05 * k as f64;
        let m = closed::mr(r);
        let d = [m.get(0, 0).re, m.get(1, 1).re, m.get(2, 2).re];
        assert!(d.iter().all(|&x| x > 0.0), "r={r} {:?}", d);
        // 2×2 minor on the coupled pair (0, 2).
        assert!(d[0] * d[2] - m.get(0, 2).norm_sqr() > -1e-9, "r={r}");
        assert!(m.max_abs_diff(&prev) < 2.0, "jump at r={r}");
        prev = m;
    }
}
