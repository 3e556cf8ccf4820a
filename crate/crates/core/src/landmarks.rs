//! Zeros of `G` and of `F` (critical points of the weighted amplitude),
//! index classification and per-disk counting.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FieldError, JetEvaluator, WeightedJet};
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LandmarkError {
    #[error("Newton iteration budget of {0} exceeded")]
    SearchBudgetExceeded(usize),
    #[error("disk (center {center}, radius {radius}) not inside the available region")]
    DiskOutOfBounds { center: C64, radius: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LandmarkKind {
    Zero,
    Saddle,
    LocalMax,
    Degenerate,
}

impl LandmarkKind {
    pub fn label(self) -> &'static str {
        match self {
            LandmarkKind::Zero => "zero",
            LandmarkKind::Saddle => "saddle",
            LandmarkKind::LocalMax => "max",
            LandmarkKind::Degenerate => "degenerate",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "zero" => Some(LandmarkKind::Zero),
            "saddle" => Some(LandmarkKind::Saddle),
            "max" => Some(LandmarkKind::LocalMax),
            "degenerate" => Some(LandmarkKind::Degenerate),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub position: C64,
    pub kind: LandmarkKind,
    /// `e^{−|z|²}·jac F` at the point (0 for zeros).
    pub jac_w: f64,
    /// Weighted `|G|` or `|F|` at the accepted point.
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: C64,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: C64, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn centered(radius: f64) -> Self {
        Self { center: C64::new(0.0, 0.0), radius }
    }

    /// Strict interior.
    #[inline]
    pub fn contains(&self, z: C64) -> bool {
        (z - self.center).norm() < self.radius
    }

    pub fn contains_disk(&self, other: &Disk) -> bool {
        (other.center - self.center).norm() + other.radius <= self.radius * (1.0 + 1e-12)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub h_seed_zero: f64,
    pub h_seed_crit: f64,
    pub tol_accept: f64,
    pub tol_jac: f64,
    pub dedup_radius: f64,
    pub max_iter: usize,
    /// Seeds whose first Newton step exceeds `seed_gate · h` are skipped;
    /// the landmark they would reach lies closer to another seed.
    /// `f64::INFINITY` runs Newton from every seed.
    pub seed_gate: f64,
    /// Cap on total Newton iterations per search.
    pub iteration_budget: usize,
    /// Extra ungated seeds on small rings around every critical point found
    /// by the grid pass. Close saddle–maximum pairs share a tiny basin.
    pub partner_rings: Vec<f64>,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            h_seed_zero: 0.25,
            h_seed_crit: 0.2,
            tol_accept: 1e-9,
            tol_jac: 1e-12,
            dedup_radius: 1e-6,
            max_iter: 60,
            seed_gate: 2.0,
            iteration_budget: 5_000_000,
            partner_rings: vec![0.05, 0.12],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub seeds: usize,
    pub gated: usize,
    pub iterations: usize,
    pub newton_failures: usize,
    pub escaped: usize,
    pub dedup_merges: usize,
    /// Zeros of `G` within `dedup_radius` of a zero of `F`.
    pub coincidences: usize,
}

impl Diagnostics {
    fn add(&mut self, o: &Diagnostics) {
        self.seeds += o.seeds;
        self.gated += o.gated;
        self.iterations += o.iterations;
        self.newton_failures += o.newton_failures;
        self.escaped += o.escaped;
        self.dedup_merges += o.dedup_merges;
        self.coincidences += o.coincidences;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSet {
    pub disk: Disk,
    pub zeros: Vec<Landmark>,
    pub criticals: Vec<Landmark>,
    pub diagnostics: Diagnostics,
}

/// Per-disk counts; `nc = ncp + ncm` and degenerate points are separate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub nz: u32,
    pub nc: u32,
    pub ncp: u32,
    pub ncm: u32,
    pub ndeg: u32,
}

/// Kind and weighted Jacobian of a critical point.
pub fn classify(jet: &WeightedJet, tol_jac: f64) -> (LandmarkKind, f64) {
    let j = jet.jac_w();
    let kind = if j > tol_jac {
        LandmarkKind::Saddle
    } else if j < -tol_jac {
        LandmarkKind::LocalMax
    } else {
        LandmarkKind::Degenerate
    };
    (kind, j)
}

fn seed_grid(disk: &Disk, h: f64) -> Vec<C64> {
    let reach = disk.radius + h;
    let k = (reach / h).ceil() as i64;
    let mut seeds = Vec::new();
    for i in -k..=k {
        for j in -k..=k {
            let p = C64::new(i as f64 * h, j as f64 * h);
            if p.norm() <= reach {
                seeds.push(disk.center + p);
            }
        }
    }
    seeds
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Target {
    Zeros,
    Criticals,
}

/// Newton step for the chosen target at a jet.
///
/// The step is computed for the re-centred field `u ↦ e^{−u z̄₀} f(u + z₀)`
/// at `u = 0` (`z₀` the current iterate), which has the same zeros as `f`.
/// Its derivatives are `∂f − z̄₀ f` and `∂̄f` up to a common nonzero factor
/// that cancels in the step. The raw field carries a phase rotating at rate
/// `|z₀|`, which shrinks Newton basins far from the origin.
fn newton_step(jet: &WeightedJet, target: Target) -> Option<C64> {
    let zb = jet.point.conj();
    match target {
        Target::Zeros => {
            let d = jet.w_dg - zb * jet.w_g;
            (d.norm() > 0.0).then(|| -jet.w_g / d)
        }
        Target::Criticals => {
            let a = jet.w_df - zb * jet.w_f;
            let b = jet.w_dbar_f;
            // Real Jacobian of (Re F, Im F) w.r.t. (x, y) from
            // f^{(1,0)} = ∂f + ∂̄f, f^{(0,1)} = i(∂f − ∂̄f).
            let fx = a + b;
            let fy = C64::new(0.0, 1.0) * (a - b);
            let (a, b, c, d) = (fx.re, fy.re, fx.im, fy.im);
            let (r0, r1) = (jet.w_f.re, jet.w_f.im);
            // (JᵀJ + λI) Δ = −Jᵀ F; λ only matters on degenerate curves.
            let jtj00 = a * a + c * c;
            let jtj01 = a * b + c * d;
            let jtj11 = b * b + d * d;
            let lambda = 1e-14 * (jtj00 + jtj11);
            let g0 = -(a * r0 + c * r1);
            let g1 = -(b * r0 + d * r1);
            let m00 = jtj00 + lambda;
            let m11 = jtj11 + lambda;
            let det = m00 * m11 - jtj01 * jtj01;
            if !(det > 0.0) {
                return None;
            }
            Some(C64::new((m11 * g0 - jtj01 * g1) / det, (m00 * g1 - jtj01 * g0) / det))
        }
    }
}

fn order(target: Target) -> usize {
    match target {
        Target::Zeros => 1,
        Target::Criticals => 2,
    }
}

fn residual(jet: &WeightedJet, target: Target) -> f64 {
    match target {
        Target::Zeros => jet.w_g.norm(),
        Target::Criticals => jet.w_f.norm(),
    }
}

struct Refined {
    point: C64,
    jet: WeightedJet,
    residual: f64,
}

enum Outcome {
    Converged(Refined),
    Failed,
    Escaped,
}

fn refine<E: JetEvaluator>(
    eval: &E,
    start: C64,
    first: &WeightedJet,
    target: Target,
    params: &SearchParams,
    fence: &Disk,
    iterations: &mut usize,
) -> Outcome {
    let mut z = start;
    let mut jet = *first;
    let mut converged = false;
    let mut best = residual(&jet, target);
    let mut stalled = 0;
    for _ in 0..params.max_iter {
        *iterations += 1;
        let Some(mut step) = newton_step(&jet, target) else {
            return Outcome::Failed;
        };
        let max_step = 0.5;
        if step.norm() > max_step {
            step *= max_step / step.norm();
        }
        z += step;
        if !fence.contains(z) {
            return Outcome::Escaped;
        }
        jet = match eval.jet_order(z, order(target)) {
            Ok(j) => j,
            Err(_) => return Outcome::Escaped,
        };
        let res = residual(&jet, target);
        // Quadratic convergence: a step this small leaves the iterate at
        // rounding level.
        if step.norm() <= 1e-10 * (1.0 + z.norm()) && res < params.tol_accept {
            converged = true;
            break;
        }
        if res < 0.5 * best {
            best = res;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled > 8 {
                return Outcome::Failed;
            }
        }
    }
    // Complete jet (with ∂³G) for the caller.
    jet = match eval.jet(z) {
        Ok(j) => j,
        Err(_) => return Outcome::Escaped,
    };
    let res = residual(&jet, target);
    if res < params.tol_accept && (converged || res < 1e-3 * params.tol_accept) {
        Outcome::Converged(Refined { point: z, jet, residual: res })
    } else {
        Outcome::Failed
    }
}

fn search<E: JetEvaluator>(
    eval: &E,
    disk: &Disk,
    params: &SearchParams,
    target: Target,
) -> Result<(Vec<Landmark>, Diagnostics), LandmarkError> {
    let stable = Disk::new(eval.stable_center(), eval.stable_radius());
    if !stable.contains_disk(disk) {
        return Err(LandmarkError::DiskOutOfBounds { center: disk.center, radius: disk.radius });
    }
    let h = match target {
        Target::Zeros => params.h_seed_zero,
        Target::Criticals => params.h_seed_crit,
    };
    // Newton may wander a little past the search disk but never outside the
    // stable disk.
    let fence = Disk::new(disk.center, disk.radius + 2.0 * h);
    let mut diag = Diagnostics::default();
    let mut found: Vec<Landmark> = Vec::new();
    let mut seeds = seed_grid(disk, h);
    let n_grid = seeds.len();
    let mut k = 0;
    while k < seeds.len() || (k == n_grid && target == Target::Criticals) {
        if k == n_grid && target == Target::Criticals && seeds.len() == n_grid {
            let (kept, _) = dedup(found.clone(), params.dedup_radius);
            for p in &kept {
                for (ring, &d) in params.partner_rings.iter().enumerate() {
                    for j in 0..6 {
                        let th = std::f64::consts::TAU * (j as f64 + 0.5 * (ring % 2) as f64) / 6.0;
                        let s = p.position + C64::from_polar(d, th);
                        if fence.contains(s) {
                            seeds.push(s);
                        }
                    }
                }
            }
            if seeds.len() == n_grid {
                break;
            }
        }
        let seed = seeds[k];
        let gated = k < n_grid;
        k += 1;
        let Ok(jet) = eval.jet_order(seed, order(target)) else {
            continue;
        };
        diag.seeds += 1;
        if gated && params.seed_gate.is_finite() {
            match newton_step(&jet, target) {
                Some(s) if s.norm() <= params.seed_gate * h => {}
                _ => {
                    diag.gated += 1;
                    continue;
                }
            }
        }
        match refine(eval, seed, &jet, target, params, &fence, &mut diag.iterations) {
            Outcome::Converged(r) => {
                if (r.point - disk.center).norm() >= disk.radius + params.dedup_radius {
                    continue;
                }
                let (kind, jac_w) = match target {
                    Target::Zeros => (LandmarkKind::Zero, 0.0),
                    Target::Criticals => classify(&r.jet, params.tol_jac),
                };
                found.push(Landmark { position: r.point, kind, jac_w, residual: r.residual });
            }
            Outcome::Failed => diag.newton_failures += 1,
            Outcome::Escaped => diag.escaped += 1,
        }
        if diag.iterations > params.iteration_budget {
            return Err(LandmarkError::SearchBudgetExceeded(params.iteration_budget));
        }
    }
    let (kept, merges) = dedup(found, params.dedup_radius);
    diag.dedup_merges = merges;
    Ok((kept, diag))
}

/// Keeps one representative (lowest residual) per cluster of radius `r`.
fn dedup(mut pts: Vec<Landmark>, r: f64) -> (Vec<Landmark>, usize) {
    pts.sort_by(|a, b| a.residual.total_cmp(&b.residual));
    let mut kept: Vec<Landmark> = Vec::with_capacity(pts.len());
    let mut merges = 0;
    // Sweep on a coarse hash of positions; clusters are tiny.
    let mut buckets: std::collections::HashMap<(i64, i64), Vec<usize>> = Default::default();
    let cell = r.max(1e-300) * 2.0;
    let key = |z: C64| ((z.re / cell).floor() as i64, (z.im / cell).floor() as i64);
    for p in pts {
        let (kx, ky) = key(p.position);
        let mut dup = false;
        'outer: for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = buckets.get(&(kx + dx, ky + dy)) {
                    if list.iter().any(|&i| (kept[i].position - p.position).norm() < r) {
                        dup = true;
                        break 'outer;
                    }
                }
            }
        }
        if dup {
            merges += 1;
        } else {
            buckets.entry((kx, ky)).or_default().push(kept.len());
            kept.push(p);
        }
    }
    kept.sort_by(|a, b| a.position.re.total_cmp(&b.position.re).then(a.position.im.total_cmp(&b.position.im)));
    (kept, merges)
}

/// Zeros of `G` in `disk` by seeded complex Newton on weighted values.
pub fn find_zeros<E: JetEvaluator>(
    eval: &E,
    disk: &Disk,
    params: &SearchParams,
) -> Result<(Vec<Landmark>, Diagnostics), LandmarkError> {
    search(eval, disk, params, Target::Zeros)
}

/// Zeros of `F` in `disk` by seeded real 2×2 Newton.
pub fn find_critical_points<E: JetEvaluator>(
    eval: &E,
    disk: &Disk,
    params: &SearchParams,
) -> Result<(Vec<Landmark>, Diagnostics), LandmarkError> {
    search(eval, disk, params, Target::Criticals)
}

/// Both landmark families, with coincidences flagged in diagnostics.
pub fn find_landmarks<E: JetEvaluator>(
    eval: &E,
    disk: &Disk,
    params: &SearchParams,
) -> Result<LandmarkSet, LandmarkError> {
    let (zeros, dz) = find_zeros(eval, disk, params)?;
    let (criticals, dc) = find_critical_points(eval, disk, params)?;
    let mut diagnostics = dz;
    diagnostics.add(&dc);
    diagnostics.coincidences = zeros
        .iter()
        .filter(|z| {
            criticals.iter().any(|c| (c.position - z.position).norm() < params.dedup_radius)
        })
        .count();
    Ok(LandmarkSet { disk: *disk, zeros, criticals, diagnostics })
}

impl LandmarkSet {
    /// Strict-interior counts in `B_ρ(center)`.
    pub fn count_stats(&self, center: C64, rho: f64) -> Result<Counts, LandmarkError> {
        let probe = Disk::new(center, rho);
        if !self.disk.contains_disk(&probe) {
            return Err(LandmarkError::DiskOutOfBounds { center, radius: rho });
        }
        Ok(count_in(&self.zeros, &self.criticals, &probe))
    }

    pub fn all(&self) -> impl Iterator<Item = &Landmark> {
        self.zeros.iter().chain(&self.criticals)
    }
}

fn count_in(zeros: &[Landmark], criticals: &[Landmark], d: &Disk) -> Counts {
    let mut c = Counts { nz: zeros.iter().filter(|l| d.contains(l.position)).count() as u32, ..Default::default() };
    for l in criticals.iter().filter(|l| d.contains(l.position)) {
        match l.kind {
            LandmarkKind::Saddle => c.ncp += 1,
            LandmarkKind::LocalMax => c.ncm += 1,
            _ => c.ndeg += 1,
        }
    }
    c.nc = c.ncp + c.ncm;
    c
}

/// Uniform bucket grid over a landmark set for fast disk counts.
pub struct SpatialIndex {
    origin: C64,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<(C64, LandmarkKind)>>,
}

impl SpatialIndex {
    pub fn new(set: &LandmarkSet, cell: f64) -> Self {
        let r = set.disk.radius + 1e-6;
        let origin = set.disk.center - C64::new(r, r);
        let n = ((2.0 * r) / cell).ceil() as usize + 1;
        let mut buckets = vec![Vec::new(); n * n];
        for l in set.all() {
            let ix = (((l.position.re - origin.re) / cell).floor() as usize).min(n - 1);
            let iy = (((l.position.im - origin.im) / cell).floor() as usize).min(n - 1);
            buckets[iy * n + ix].push((l.position, l.kind));
        }
        Self { origin, cell, nx: n, ny: n, buckets }
    }

    /// Strict-interior counts in `B_ρ(center)`.
    pub fn counts(&self, center: C64, rho: f64) -> Counts {
        let lo_x = ((center.re - rho - self.origin.re) / self.cell).floor().max(0.0) as usize;
        let lo_y = ((center.im - rho - self.origin.im) / self.cell).floor().max(0.0) as usize;
        let hi_x = (((center.re + rho - self.origin.re) / self.cell).floor().max(0.0) as usize).min(self.nx - 1);
        let hi_y = (((center.im + rho - self.origin.im) / self.cell).floor().max(0.0) as usize).min(self.ny - 1);
        let mut c = Counts::default();
        for iy in lo_y..=hi_y {
            for ix in lo_x..=hi_x {
                for &(p, kind) in &self.buckets[iy * self.nx + ix] {
                    if (p - center).norm() < rho {
                        match kind {
                            LandmarkKind::Zero => c.nz += 1,
                            LandmarkKind::Saddle => c.ncp += 1,
                            LandmarkKind::LocalMax => c.ncm += 1,
                            LandmarkKind::Degenerate => c.ndeg += 1,
                        }
                    }
                }
            }
        }
        c.nc = c.ncp + c.ncm;
        c
    }
}

/// Winding number of `f` around the circle `|z − center| = radius`,
/// refining each arc until the argument increment is below π/4.
pub fn winding_number(f: impl Fn(C64) -> C64, center: C64, radius: f64) -> Option<i64> {
    let n0 = 256;
    let point = |t: f64| center + C64::from_polar(radius, t);
    let tau = std::f64::consts::TAU;
    let mut total = 0.0;
    fn arc(
        f: &dyn Fn(C64) -> C64,
        point: &dyn Fn(f64) -> C64,
        t0: f64,
        t1: f64,
        v0: C64,
        v1: C64,
        depth: u32,
    ) -> Option<f64> {
        let d = (v1 / v0).arg();
        if d.abs() < std::f64::consts::FRAC_PI_4 {
            return Some(d);
        }
        if depth == 0 {
            return None;
        }
        let tm = 0.5 * (t0 + t1);
        let vm = f(point(tm));
        if vm.norm() == 0.0 || !vm.is_finite() {
            return None;
        }
        Some(arc(f, point, t0, tm, v0, vm, depth - 1)? + arc(f, point, tm, t1, vm, v1, depth - 1)?)
    }
    let mut prev = f(point(0.0));
    if prev.norm() == 0.0 {
        return None;
    }
    let first = prev;
    for k in 1..=n0 {
        let t0 = tau * (k - 1) as f64 / n0 as f64;
        let t1 = tau * k as f64 / n0 as f64;
        let v = if k == n0 { first } else { f(point(t1)) };
        if v.norm() == 0.0 {
            return None;
        }
        total += arc(&f, &point, t0, t1, prev, v, 30)?;
        prev = v;
    }
    Some((total / tau).round() as i64)
}

/// A radius near `radius` with no landmark within `clearance` of the circle.
pub fn contour_radius_avoiding<'a>(
    positions: impl Iterator<Item = C64> + Clone + 'a,
    center: C64,
    radius: f64,
    clearance: f64,
) -> f64 {
    for k in 0..100 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let r = radius + sign * (k as f64 / 2.0).ceil() * 3.0 * clearance;
        if positions.clone().all(|p| ((p - center).norm() - r).abs() >= clearance) {
            return r;
        }
    }
    radius
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{sample_gef, GefSample};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn monomial_zero() {
        let s = GefSample::from_coeffs(&[c(0.0, 0.0), c(1.0, 0.0)], 2.0).unwrap();
        let (z, _) = find_zeros(&s, &Disk::centered(1.0), &SearchParams::default()).unwrap();
        assert_eq!(z.len(), 1);
        assert!(z[0].position.norm() < 1e-10);
    }

    #[test]
    fn constant_has_no_zeros() {
        let s = GefSample::from_coeffs(&[c(1.0, 0.0)], 2.0).unwrap();
        let (z, _) = find_zeros(&s, &Disk::centered(1.5), &SearchParams::default()).unwrap();
        assert!(z.is_empty());
    }

    #[test]
    fn constant_has_single_maximum() {
        let s = GefSample::from_coeffs(&[c(1.0, 0.0)], 2.0).unwrap();
        let (cp, _) = find_critical_points(&s, &Disk::centered(1.5), &SearchParams::default()).unwrap();
        assert_eq!(cp.len(), 1);
        assert_eq!(cp[0].kind, LandmarkKind::LocalMax);
        assert!(cp[0].position.norm() < 1e-10);
        assert!((cp[0].jac_w + 1.0).abs() < 1e-10);
    }

    #[test]
    fn degenerate_circle_is_flagged() {
        let s = GefSample::from_coeffs(&[c(0.0, 0.0), c(1.0, 0.0)], 2.0).unwrap();
        let (cp, _) = find_critical_points(&s, &Disk::centered(1.5), &SearchParams::default()).unwrap();
        assert!(!cp.is_empty());
        for l in &cp {
            assert_eq!(l.kind, LandmarkKind::Degenerate, "{l:?}");
            assert!((l.position.norm() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn classify_signs() {
        let z = c(0.0, 0.0);
        let mut j = WeightedJet::from_holomorphic(z, c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        j.w_df = c(1.0, 0.0);
        assert_eq!(classify(&j, 1e-12).0, LandmarkKind::Saddle);
        let j2 = WeightedJet::from_holomorphic(z, c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        assert_eq!(classify(&j2, 1e-12).0, LandmarkKind::LocalMax);
    }

    #[test]
    fn count_stats_basic() {
        let empty = LandmarkSet {
            disk: Disk::centered(2.0),
            zeros: vec![],
            criticals: vec![],
            diagnostics: Diagnostics::default(),
        };
        assert_eq!(empty.count_stats(c(0.0, 0.0), 1.0).unwrap(), Counts::default());
        let one = LandmarkSet {
            criticals: vec![Landmark { position: c(0.5, 0.5), kind: LandmarkKind::Saddle, jac_w: 1.0, residual: 0.0 }],
            ..empty.clone()
        };
        let k = one.count_stats(c(0.5, 0.5), 0.1).unwrap();
        assert_eq!((k.nz, k.nc, k.ncp, k.ncm), (0, 1, 1, 0));
        assert!(matches!(one.count_stats(c(1.5, 0.0), 1.0), Err(LandmarkError::DiskOutOfBounds { .. })));
        let idx = SpatialIndex::new(&one, 0.5);
        assert_eq!(idx.counts(c(0.5, 0.5), 0.1), k);
    }

    #[test]
    fn gate_does_not_change_results() {
        for seed in 0..5 {
            let s = sample_gef(4.0, 11, seed).unwrap();
            let disk = Disk::centered(3.5);
            let gated = find_landmarks(&s, &disk, &SearchParams::default()).unwrap();
            let full = find_landmarks(&s, &disk, &SearchParams { seed_gate: f64::INFINITY, ..Default::default() }).unwrap();
            assert_eq!(gated.zeros.len(), full.zeros.len());
            assert_eq!(gated.criticals.len(), full.criticals.len());
        }
    }

    #[test]
    fn winding_of_polynomial() {
        let f = |z: C64| (z - c(0.3, 0.1)) * (z + c(0.5, 0.0)) * (z - c(2.0, 0.0));
        assert_eq!(winding_number(f, c(0.0, 0.0), 1.0), Some(2));
        assert_eq!(winding_number(|z: C64| z.conj(), c(0.0, 0.0), 1.0), Some(-1));
    }
}
