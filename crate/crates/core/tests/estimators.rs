//! Counting estimators on GEF samples: identities, invariances, monotonicity.

use geflab_core::estimators::{
    fit_exponent, tile_centers, CampaignSummary, CountKind, CountingCampaign, GefSource, PoissonSource,
};
use geflab_core::landmarks::Disk;
use geflab_core::{PairKind, RadialProfile, C64};
use proptest::prelude::*;
use std::sync::OnceLock;

const RADII: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

fn campaign(offset: C64, seed: u64) -> CampaignSummary {
    let mut c = CountingCampaign::new(RADII.to_vec(), 150);
    c.offset = offset;
    c.run(&GefSource::new(4.5, seed)).unwrap()
}

fn shared() -> &'static CampaignSummary {
    static S: OnceLock<CampaignSummary> = OnceLock::new();
    S.get_or_init(|| campaign(C64::new(0.0, 0.0), 31))
}

fn idx(p: PairKind) -> usize {
    PairKind::ALL.iter().position(|&q| q == p).unwrap()
}

#[test]
fn pair_counts_decompose_by_index() {
    let s = shared();
    for sample in &s.records {
        for m in sample {
            let cc = m.pairs[idx(PairKind::CritCrit)];
            let parts = m.pairs[idx(PairKind::PlusPlus)]
                + m.pairs[idx(PairKind::MinusMinus)]
                + 2.0 * m.pairs[idx(PairKind::PlusMinus)];
            assert!((cc - parts).abs() < 1e-9 * cc.max(1.0));
            let zc = m.pairs[idx(PairKind::ZeroCrit)];
            let zparts = m.pairs[idx(PairKind::ZeroPlus)] + m.pairs[idx(PairKind::ZeroMinus)];
            assert!((zc - zparts).abs() < 1e-9 * zc.max(1.0));
            assert!((m.firsts[1] - m.firsts[2] - m.firsts[3]).abs() < 1e-9);
        }
    }
}

#[test]
fn first_moments_scale_with_area() {
    let s = shared();
    for &rho in &[0.6, 1.0] {
        let fm = s.first_moments(rho).unwrap();
        for (k, kind) in CountKind::ALL.iter().enumerate() {
            let want = kind.expected_per_rho2() * rho * rho;
            let (m, se) = fm[k];
            assert!((m - want).abs() < 5.0 * se + 0.01 * want, "{kind:?} rho={rho}: {m} ± {se} vs {want}");
        }
    }
}

#[test]
fn pair_moments_increase_with_radius() {
    let s = shared();
    for p in [PairKind::ZeroZero, PairKind::CritCrit, PairKind::PlusMinus, PairKind::ZeroCrit] {
        let prof = s.profile(p);
        for w in prof.rows.windows(2) {
            assert!(w[1].estimate + 3.0 * w[1].stderr >= w[0].estimate, "{} {:?}", p.label(), w);
        }
        let last = prof.rows.last().unwrap();
        let first = &prof.rows[1];
        assert!(last.estimate > first.estimate, "{}", p.label());
    }
}

#[test]
fn translated_tiling_gives_consistent_estimates() {
    let a = shared();
    let b = campaign(C64::new(0.37, -0.21), 32);
    for p in [PairKind::CritCrit, PairKind::ZeroZero] {
        let k = RADII.len() - 1;
        let (ma, sa) = a.pair_moment(p, k);
        let (mb, sb) = b.pair_moment(p, k);
        assert!((ma - mb).abs() < 4.0 * (sa * sa + sb * sb).sqrt(), "{}: {ma}±{sa} vs {mb}±{sb}", p.label());
    }
}

#[test]
fn campaign_is_deterministic() {
    let mut c = CountingCampaign::new(vec![0.5], 6);
    c.pitch_gap = 0.2;
    let src = GefSource::new(3.5, 5);
    let x = c.run(&src).unwrap();
    let y = c.run(&src).unwrap();
    assert_eq!(x.records, y.records);
}

#[test]
fn gef_is_more_repulsive_than_poisson() {
    let s = shared();
    let (g, gse) = s.repulsion_factor(PairKind::CritCrit, 0.4).unwrap();
    let p = CountingCampaign::new(vec![0.4], 300).run(&PoissonSource::gef_like(4.5, 9)).unwrap();
    let (q, qse) = p.repulsion_factor(PairKind::CritCrit, 0.4).unwrap();
    assert!((q - 1.0).abs() < 4.0 * qse, "poisson {q} ± {qse}");
    assert!(g + 4.0 * gse < q, "gef {g} ± {gse} vs poisson {q}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fit_recovers_exact_power_laws(p in 1.0f64..20.0, c in 0.01f64..100.0) {
        let radii: Vec<f64> = (0..8).map(|k| 0.1 + 0.1 * k as f64).collect();
        let prof = RadialProfile::synthetic_power("x", &radii, c, p);
        let fit = fit_exponent(&prof, (0.1, 0.8)).unwrap();
        prop_assert!((fit.slope - p).abs() < 1e-6);
        prop_assert!((fit.intercept - c.ln()).abs() < 1e-5);
    }

    #[test]
    fn tiles_are_disjoint_and_inside(rho in 0.05f64..1.0, gap in 0.0f64..0.3, ox in -1.0f64..1.0, oy in -1.0f64..1.0, r in 2.0f64..6.0) {
        let region = Disk::centered(r);
        let cs = tile_centers(&region, rho, 2.0 * rho + gap, C64::new(ox, oy));
        for (i, a) in cs.iter().enumerate() {
            prop_assert!(a.norm() + rho <= r + 1e-12);
            for b in &cs[i + 1..] {
                prop_assert!((a - b).norm() >= 2.0 * rho - 1e-12);
            }
        }
    }
}
