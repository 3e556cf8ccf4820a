//! Truncated GEF samples and weighted jet evaluation.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{complex_normal, stream};
use crate::C64;

/// Largest working radius accepted by [`sample_gef`].
pub const MAX_RADIUS: f64 = 12.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("working radius {0} outside (0, {MAX_RADIUS}]")]
    RadiusTooLarge(f64),
    #[error("point {point} outside the stable disk of radius {radius} around {center}")]
    OutsideStableDisk { point: C64, center: C64, radius: f64 },
}

#[derive(Debug, Error)]
pub enum SampleIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed sample file: {0}")]
    Format(String),
}

/// Seed provenance of a sample.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub master: u64,
    pub stream: u64,
}

/// Truncation policy `N = ceil(R² + 10R + 50)`.
pub fn truncation_for(r_max: f64) -> usize {
    (r_max * r_max + 10.0 * r_max + 50.0).ceil() as usize
}

/// Realization of `Σ_{n≤N} ξₙ zⁿ/√n!`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GefSample {
    coeffs: Vec<C64>,
    r_max: f64,
    pub seed: SeedInfo,
}

/// Weighted values `e^{−|z|²/2}·(G, ∂G, ∂²G, ∂³G, F, ∂F, ∂̄F)` at `point`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedJet {
    pub point: C64,
    pub w_g: C64,
    pub w_dg: C64,
    pub w_d2g: C64,
    pub w_d3g: C64,
    pub w_f: C64,
    pub w_df: C64,
    pub w_dbar_f: C64,
}

impl WeightedJet {
    /// Builds the F entries from the holomorphic jet.
    pub fn from_holomorphic(point: C64, w_g: C64, w_dg: C64, w_d2g: C64, w_d3g: C64) -> Self {
        let zb = point.conj();
        Self {
            point,
            w_g,
            w_dg,
            w_d2g,
            w_d3g,
            w_f: zb * w_g - w_dg,
            w_df: zb * w_dg - w_d2g,
            w_dbar_f: w_g,
        }
    }

    /// Weighted amplitude `S(z) = e^{−|z|²/2}|G(z)|`.
    pub fn amplitude(&self) -> f64 {
        self.w_g.norm()
    }

    /// `e^{−|z|²}·jac F = |w∂F|² − |w∂̄F|²`.
    pub fn jac_w(&self) -> f64 {
        self.w_df.norm_sqr() - self.w_dbar_f.norm_sqr()
    }

    /// Weighted real derivatives `(F^{(1,0)}, F^{(0,1)})`.
    pub fn f_real_derivatives(&self) -> (C64, C64) {
        let a = self.w_df;
        let b = self.w_dbar_f;
        (a + b, C64::new(0.0, 1.0) * (a - b))
    }
}

/// Anything that produces weighted jets inside a stable disk.
pub trait JetEvaluator: Sync {
    fn jet(&self, z: C64) -> Result<WeightedJet, FieldError>;
    /// Jet with holomorphic derivatives only up to `order`; higher entries
    /// are zero. Used by the root finders, which need at most `∂²G`.
    fn jet_order(&self, z: C64, order: usize) -> Result<WeightedJet, FieldError> {
        let _ = order;
        self.jet(z)
    }
    fn stable_center(&self) -> C64;
    fn stable_radius(&self) -> f64;
}

/// Samples a GEF for working radius `r_max` from stream `(master, stream_id)`.
pub fn sample_gef(r_max: f64, master: u64, stream_id: u64) -> Result<GefSample, FieldError> {
    if !(r_max > 0.0 && r_max <= MAX_RADIUS) {
        return Err(FieldError::RadiusTooLarge(r_max));
    }
    let n = truncation_for(r_max);
    let mut rng = stream(master, stream_id);
    let coeffs = (0..=n).map(|_| complex_normal(&mut rng)).collect();
    Ok(GefSample { coeffs, r_max, seed: SeedInfo { master, stream: stream_id } })
}

impl GefSample {
    /// Deterministic sample from explicit leading coefficients, zero-padded
    /// to the truncation policy.
    pub fn from_coeffs(leading: &[C64], r_max: f64) -> Result<Self, FieldError> {
        if !(r_max > 0.0 && r_max <= MAX_RADIUS) {
            return Err(FieldError::RadiusTooLarge(r_max));
        }
        let n = truncation_for(r_max).max(leading.len().saturating_sub(1));
        let mut coeffs = leading.to_vec();
        coeffs.resize(n + 1, C64::new(0.0, 0.0));
        Ok(Self { coeffs, r_max, seed: SeedInfo::default() })
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn truncation(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Weighted jet, summing in ascending `n`. The monomials
    /// `u_m = e^{−|z|²/2} z^m/√m!` are advanced by `u_m = u_{m−1}·z/√m`, which
    /// keeps every term at its true magnitude (at most O(1)) so nothing
    /// overflows for `|z| ≤ 12`.
    pub fn eval_jet(&self, z: C64) -> Result<WeightedJet, FieldError> {
        if z.norm() > self.r_max {
            return Err(FieldError::OutsideStableDisk {
                point: z,
                center: C64::new(0.0, 0.0),
                radius: self.r_max,
            });
        }
        Ok(self.eval_jet_unchecked::<3>(z))
    }

    /// As [`eval_jet`](Self::eval_jet) but only up to `∂^ORDER G`.
    pub fn eval_jet_order<const ORDER: usize>(&self, z: C64) -> Result<WeightedJet, FieldError> {
        if z.norm() > self.r_max {
            return Err(FieldError::OutsideStableDisk {
                point: z,
                center: C64::new(0.0, 0.0),
                radius: self.r_max,
            });
        }
        Ok(self.eval_jet_unchecked::<ORDER>(z))
    }

    fn eval_jet_unchecked<const ORDER: usize>(&self, z: C64) -> WeightedJet {
        let zero = C64::new(0.0, 0.0);
        let (mut g, mut dg, mut d2g, mut d3g) = (zero, zero, zero, zero);
        // u_{n}, u_{n-1}, u_{n-2}, u_{n-3}
        let mut u0 = C64::new((-0.5 * z.norm_sqr()).exp(), 0.0);
        let (mut u1, mut u2, mut u3) = (zero, zero, zero);
        for (n, &xi) in self.coeffs.iter().enumerate() {
            if n > 0 {
                u3 = u2;
                u2 = u1;
                u1 = u0;
                u0 = u0 * z / (n as f64).sqrt();
            }
            let nf = n as f64;
            g += xi * u0;
            if ORDER >= 1 && n >= 1 {
                let s1 = nf.sqrt();
                dg += xi * u1 * s1;
                if ORDER >= 2 && n >= 2 {
                    let s2 = s1 * (nf - 1.0).sqrt();
                    d2g += xi * u2 * s2;
                    if ORDER >= 3 && n >= 3 {
                        d3g += xi * u3 * (s2 * (nf - 2.0).sqrt());
                    }
                }
            }
        }
        WeightedJet::from_holomorphic(z, g, dg, d2g, d3g)
    }

    /// Binary form: magic `GEFS`, version, master seed, stream, N, `r_max`
    /// bits, then `N+1` little-endian `(re, im)` pairs.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(b"GEFS")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&self.seed.master.to_le_bytes())?;
        w.write_all(&self.seed.stream.to_le_bytes())?;
        w.write_all(&(self.truncation() as u64).to_le_bytes())?;
        w.write_all(&self.r_max.to_bits().to_le_bytes())?;
        for c in &self.coeffs {
            w.write_all(&c.re.to_bits().to_le_bytes())?;
            w.write_all(&c.im.to_bits().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, SampleIoError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"GEFS" {
            return Err(SampleIoError::Format("bad magic".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != 1 {
            return Err(SampleIoError::Format("unsupported version".into()));
        }
        let mut next = || -> io::Result<u64> {
            let mut b8 = [0u8; 8];
            r.read_exact(&mut b8)?;
            Ok(u64::from_le_bytes(b8))
        };
        let master = next()?;
        let stream_id = next()?;
        let n = next()? as usize;
        let r_max = f64::from_bits(next()?);
        let mut coeffs = Vec::with_capacity(n + 1);
        for _ in 0..=n {
            let re = f64::from_bits(next()?);
            let im = f64::from_bits(next()?);
            coeffs.push(C64::new(re, im));
        }
        Ok(Self { coeffs, r_max, seed: SeedInfo { master, stream: stream_id } })
    }

    /// CSV form: schema comment, `master,stream,n,r_max` header and row,
    /// then `index,re,im` rows. Floats use shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# schema: geflab-sample v1")?;
        writeln!(w, "master,stream,n,r_max")?;
        writeln!(w, "{},{},{},{:?}", self.seed.master, self.seed.stream, self.truncation(), self.r_max)?;
        writeln!(w, "index,re,im")?;
        for (i, c) in self.coeffs.iter().enumerate() {
            writeln!(w, "{},{:?},{:?}", i, c.re, c.im)?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(mut r: R) -> Result<Self, SampleIoError> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        let bad = |m: &str| SampleIoError::Format(m.to_string());
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        if lines.next() != Some("master,stream,n,r_max") {
            return Err(bad("missing header"));
        }
        let head: Vec<&str> = lines.next().ok_or_else(|| bad("missing header row"))?.split(',').collect();
        if head.len() != 4 {
            return Err(bad("header row"));
        }
        let master = head[0].parse().map_err(|_| bad("master"))?;
        let stream_id = head[1].parse().map_err(|_| bad("stream"))?;
        let n: usize = head[2].parse().map_err(|_| bad("n"))?;
        let r_max: f64 = head[3].parse().map_err(|_| bad("r_max"))?;
        if lines.next() != Some("index,re,im") {
            return Err(bad("missing coefficient header"));
        }
        let mut coeffs = Vec::with_capacity(n + 1);
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 || f[0].parse::<usize>().ok() != Some(i) {
                return Err(bad(&format!("coefficient row {i}")));
            }
            let re = f[1].parse().map_err(|_| bad("re"))?;
            let im = f[2].parse().map_err(|_| bad("im"))?;
            coeffs.push(C64::new(re, im));
        }
        if coeffs.len() != n + 1 {
            return Err(bad("coefficient count"));
        }
        Ok(Self { coeffs, r_max, seed: SeedInfo { master, stream: stream_id } })
    }
}

impl JetEvaluator for GefSample {
    fn jet(&self, z: C64) -> Result<WeightedJet, FieldError> {
        self.eval_jet(z)
    }

    fn jet_order(&self, z: C64, order: usize) -> Result<WeightedJet, FieldError> {
        match order {
            0 => self.eval_jet_order::<0>(z),
            1 => self.eval_jet_order::<1>(z),
            2 => self.eval_jet_order::<2>(z),
            _ => self.eval_jet_order::<3>(z),
        }
    }

    fn stable_center(&self) -> C64 {
        C64::new(0.0, 0.0)
    }

    fn stable_radius(&self) -> f64 {
        self.r_max
    }
}

/// Bargmann–Fock shift `f_ζ(z) = e^{−|ζ|²/2 + z ζ̄} f(z − ζ)` of an evaluator.
#[derive(Clone, Debug)]
pub struct Shifted<E> {
    inner: E,
    zeta: C64,
}

pub fn bargmann_fock_shift<E: JetEvaluator>(inner: E, zeta: C64) -> Shifted<E> {
    Shifted { inner, zeta }
}

impl<E: JetEvaluator> JetEvaluator for Shifted<E> {
    /// With `u = z − ζ` the weighted shifted jet is `e^{i Im(z ζ̄)}` times
    /// the binomial combinations `Σ C(k,j) ζ̄^{k−j} w∂^jG(u)`.
    fn jet(&self, z: C64) -> Result<WeightedJet, FieldError> {
        self.jet_order(z, 3)
    }

    fn jet_order(&self, z: C64, order: usize) -> Result<WeightedJet, FieldError> {
        let u = z - self.zeta;
        let base = self.inner.jet_order(u, order).map_err(|_| FieldError::OutsideStableDisk {
            point: z,
            center: self.stable_center(),
            radius: self.stable_radius(),
        })?;
        let phase = C64::from_polar(1.0, (z * self.zeta.conj()).im);
        let c = self.zeta.conj();
        let c2 = c * c;
        let c3 = c2 * c;
        let g = base.w_g;
        let dg = c * base.w_g + base.w_dg;
        let d2g = c2 * base.w_g + 2.0 * c * base.w_dg + base.w_d2g;
        let d3g = c3 * base.w_g + 3.0 * c2 * base.w_dg + 3.0 * c * base.w_d2g + base.w_d3g;
        Ok(WeightedJet::from_holomorphic(z, phase * g, phase * dg, phase * d2g, phase * d3g))
    }

    fn stable_center(&self) -> C64 {
        self.inner.stable_center() + self.zeta
    }

    fn stable_radius(&self) -> f64 {
        self.inner.stable_radius()
    }
}

impl<E: JetEvaluator> JetEvaluator for &E {
    fn jet(&self, z: C64) -> Result<WeightedJet, FieldError> {
        (*self).jet(z)
    }

    fn jet_order(&self, z: C64, order: usize) -> Result<WeightedJet, FieldError> {
        (*self).jet_order(z, order)
    }

    fn stable_center(&self) -> C64 {
        (*self).stable_center()
    }

    fn stable_radius(&self) -> f64 {
        (*self).stable_radius()
    }
}

/// `Σ_{n>N} R^{2n}/n!`, summed from log-space terms until they stop mattering.
pub fn truncation_tail_bound(n: usize, r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let x = r * r;
    let ln_fact: f64 = (1..=n + 1).map(|k| (k as f64).ln()).sum();
    let mut term = ((n + 1) as f64 * x.ln() - ln_fact).exp();
    let mut sum = 0.0;
    let mut k = n + 1;
    loop {
        sum += term;
        k += 1;
        term *= x / k as f64;
        if k as f64 > x && term <= sum * 1e-17 {
            break;
        }
        if term == 0.0 && sum == 0.0 && k as f64 > x {
            break;
        }
    }
    sum
}
