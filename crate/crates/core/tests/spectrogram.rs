//! Spectrogram of sampled signals: analytic transforms, linearity,
//! discretization and landmark stability.

use geflab_core::rng::stream;
use geflab_core::spectrogram::{
    extract_grid_landmarks, stft_complex, stft_gauss, white_noise_for, GridSpec, NoiseSignal,
};
use geflab_core::C64;
use std::f64::consts::PI;

fn sampled(t0: f64, t1: f64, dt: f64, f: impl Fn(f64) -> C64) -> NoiseSignal {
    let n = ((t1 - t0) / dt).round() as usize + 1;
    NoiseSignal::new(t0, dt, (0..n).map(|j| f(t0 + j as f64 * dt)).collect())
}

#[test]
fn gaussian_tone_has_closed_form_magnitude() {
    // f(t) = e^{−(t−a)²} e^{2iηt} gives |V| = (2/π)^{1/4} √(π/2) e^{−(a−x)²/2 − (η−ξ)²/2}.
    let (a, eta) = (1.3, -0.7);
    let f = sampled(-10.0, 12.0, 0.01, |t| C64::from_polar((-(t - a) * (t - a)).exp(), 2.0 * eta * t));
    let spec = GridSpec::square(-2.0, -3.0, 4.0, 0.25);
    let g = stft_gauss(&f, &spec).unwrap();
    let c = (2.0 / PI).powf(0.25) * (PI / 2.0).sqrt();
    for i in 0..spec.nx {
        for k in 0..spec.nxi {
            let (x, xi) = (spec.x(i), spec.xi(k));
            let want = c * (-(a - x).powi(2) / 2.0 - (eta - xi).powi(2) / 2.0).exp();
            assert!((g.get(i, k) - want).abs() < 1e-10, "({x},{xi}): {} vs {want}", g.get(i, k));
        }
    }
}

#[test]
fn transform_is_linear() {
    let mut r1 = stream(3, 1);
    let mut r2 = stream(3, 2);
    let f = white_noise_for(0.0, 3.0, 0.02, &mut r1).unwrap();
    let g = white_noise_for(0.0, 3.0, 0.02, &mut r2).unwrap();
    let (a, b) = (C64::new(0.3, -1.2), C64::new(2.0, 0.5));
    let h = f.combine(a, &g, b).unwrap();
    let spec = GridSpec::square(0.0, -1.5, 3.0, 0.1);
    let (vf, vg, vh) = (stft_complex(&f, &spec).unwrap(), stft_complex(&g, &spec).unwrap(), stft_complex(&h, &spec).unwrap());
    for ((x, y), z) in vf.iter().zip(&vg).zip(&vh) {
        assert!((a * x + b * y - z).norm() < 1e-9 * (1.0 + z.norm()));
    }
}

#[test]
fn halving_the_step_leaves_smooth_transforms_unchanged() {
    let f = |t: f64| C64::from_polar((-0.25 * (t - 0.5).powi(2)).exp(), 0.8 * t + 0.1 * t * t);
    let coarse = sampled(-10.0, 10.0, 0.02, f);
    let fine = sampled(-10.0, 10.0, 0.01, f);
    let spec = GridSpec::square(-2.0, -2.0, 4.0, 0.2);
    let a = stft_complex(&coarse, &spec).unwrap();
    let b = stft_complex(&fine, &spec).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).norm() < 1e-9, "{x} vs {y}");
    }
}

#[test]
fn time_shift_moves_the_spectrogram() {
    let mut rng = stream(4, 0);
    let f = white_noise_for(0.0, 6.0, 0.02, &mut rng).unwrap();
    let mut g = f.clone();
    g.t0 += 1.0;
    let a = stft_gauss(&f, &GridSpec::square(0.0, -2.0, 4.0, 0.1)).unwrap();
    let b = stft_gauss(&g, &GridSpec::square(1.0, -2.0, 4.0, 0.1)).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() < 1e-9 * (1.0 + x));
    }
}

#[test]
fn minima_are_stable_under_grid_refinement() {
    let mut matched = 0;
    let mut total = 0;
    for s in 0..4 {
        let mut rng = stream(9, s);
        let f = white_noise_for(0.0, 8.0, 0.02, &mut rng).unwrap();
        let coarse = extract_grid_landmarks(&stft_gauss(&f, &GridSpec::square(0.0, -4.0, 8.0, 0.1)).unwrap());
        let fine = extract_grid_landmarks(&stft_gauss(&f, &GridSpec::square(0.0, -4.0, 8.0, 0.05)).unwrap());
        for m in &coarse.minima {
            // Skip the border where the fine grid sees points the coarse one cannot.
            if m.x < 0.3 || m.x > 7.7 || m.xi < -3.7 || m.xi > 3.7 {
                continue;
            }
            total += 1;
            if fine.minima.iter().any(|n| (n.x - m.x).hypot(n.xi - m.xi) < 0.1) {
                matched += 1;
            }
        }
    }
    assert!(total > 50);
    assert!(matched as f64 >= 0.95 * total as f64, "{matched}/{total}");
}

#[test]
fn landmark_counts_balance_like_a_morse_function() {
    // Interior minima + maxima − saddles is an Euler characteristic up to
    // boundary terms; the intensities 1, 1/3 and 4/3 balance exactly.
    let mut rng = stream(10, 0);
    let f = white_noise_for(0.0, 20.0, 0.02, &mut rng).unwrap();
    let l = extract_grid_landmarks(&stft_gauss(&f, &GridSpec::square(0.0, -10.0, 20.0, 0.1)).unwrap());
    let [mn, sd, mx] = l.counts().map(|c| c as f64);
    assert!(mn > 100.0);
    let imbalance = mn + mx - sd;
    // Boundary term scales with the perimeter (80 units).
    assert!(imbalance.abs() < 30.0, "{mn} + {mx} − {sd} = {imbalance}");
}
