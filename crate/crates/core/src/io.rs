//! CSV persistence for landmark sets and radial profiles. Every file starts
//! with a `# schema: <name> v<version>` comment line.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{ProfileRow, RadialProfile};
use crate::kacrice::KacRiceRow;
use crate::landmarks::{Landmark, LandmarkKind};
use crate::C64;

pub const LANDMARK_SCHEMA: &str = "geflab-landmarks v1";
pub const PROFILE_SCHEMA: &str = "geflab-profile v1";
pub const KACRICE_SCHEMA: &str = "geflab-kacrice v1";

#[derive(Debug, Error)]
pub enum CsvError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("expected schema `{expected}`, found `{found}`")]
    Schema { expected: String, found: String },
    #[error("unknown landmark kind `{0}`")]
    Kind(String),
}

fn write_schema<W: Write>(out: &mut W, schema: &str) -> Result<(), CsvError> {
    writeln!(out, "# schema: {schema}")?;
    Ok(())
}

/// Reads all input, checks the schema line and returns a reader over the rest.
fn open_checked<R: Read>(mut input: R, schema: &str) -> Result<csv::Reader<std::io::Cursor<String>>, CsvError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let first = text.lines().next().unwrap_or("");
    let found = first.strip_prefix("# schema: ").unwrap_or(first).trim();
    if found != schema {
        return Err(CsvError::Schema { expected: schema.into(), found: found.into() });
    }
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(std::io::Cursor::new(text)))
}

/// Floats are written with `{:?}` so they read back bit-exactly.
fn f(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Serialize, Deserialize)]
struct LandmarkRecord {
    re: f64,
    im: f64,
    kind: String,
    jac_w: f64,
    residual: f64,
}

pub fn write_landmarks<'a, W: Write>(
    mut out: W,
    landmarks: impl IntoIterator<Item = &'a Landmark>,
) -> Result<(), CsvError> {
    write_schema(&mut out, LANDMARK_SCHEMA)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["re", "im", "kind", "jac_w", "residual"])?;
    for l in landmarks {
        w.write_record([f(l.position.re), f(l.position.im), l.kind.label().into(), f(l.jac_w), f(l.residual)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_landmarks<R: Read>(input: R) -> Result<Vec<Landmark>, CsvError> {
    let mut r = open_checked(input, LANDMARK_SCHEMA)?;
    r.deserialize::<LandmarkRecord>()
        .map(|rec| {
            let rec = rec?;
            let kind = LandmarkKind::from_label(&rec.kind).ok_or_else(|| CsvError::Kind(rec.kind.clone()))?;
            Ok(Landmark { position: C64::new(rec.re, rec.im), kind, jac_w: rec.jac_w, residual: rec.residual })
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileRecord {
    pair: String,
    rho: f64,
    estimate: f64,
    stderr: f64,
    n_samples: usize,
    n_disks: usize,
}

pub fn write_profiles<'a, W: Write>(mut out: W, profiles: impl IntoIterator<Item = &'a RadialProfile>) -> Result<(), CsvError> {
    write_schema(&mut out, PROFILE_SCHEMA)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["pair", "rho", "estimate", "stderr", "n_samples", "n_disks"])?;
    for p in profiles {
        for r in &p.rows {
            w.write_record([
                p.label.clone(),
                f(r.rho),
                f(r.estimate),
                f(r.stderr),
                r.n_samples.to_string(),
                r.n_disks.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Profiles in order of first appearance of their labels.
pub fn read_profiles<R: Read>(input: R) -> Result<Vec<RadialProfile>, CsvError> {
    let mut r = open_checked(input, PROFILE_SCHEMA)?;
    let mut out: Vec<(String, Vec<ProfileRow>)> = Vec::new();
    for rec in r.deserialize::<ProfileRecord>() {
        let rec = rec?;
        let row = ProfileRow {
            rho: rec.rho,
            estimate: rec.estimate,
            stderr: rec.stderr,
            n_samples: rec.n_samples,
            n_disks: rec.n_disks,
        };
        match out.iter_mut().find(|(l, _)| *l == rec.pair) {
            Some((_, rows)) => rows.push(row),
            None => out.push((rec.pair, vec![row])),
        }
    }
    Ok(out.into_iter().map(|(l, rows)| RadialProfile::new(&l, rows)).collect())
}

pub fn write_kacrice<'a, W: Write>(mut out: W, rows: impl IntoIterator<Item = &'a KacRiceRow>) -> Result<(), CsvError> {
    write_schema(&mut out, KACRICE_SCHEMA)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "r", "value", "stderr", "n_draws"])?;
    for r in rows {
        w.write_record([r.kind.clone(), f(r.r), f(r.value), f(r.stderr), r.n_draws.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_kacrice<R: Read>(input: R) -> Result<Vec<KacRiceRow>, CsvError> {
    let mut r = open_checked(input, KACRICE_SCHEMA)?;
    Ok(r.deserialize::<KacRiceRow>().collect::<Result<_, _>>()?)
}

/// Kac–Rice rows of one kind as a profile, for exponent fits.
pub fn kacrice_profile(rows: &[KacRiceRow], kind: &str) -> RadialProfile {
    let rows = rows
        .iter()
        .filter(|r| r.kind == kind)
        .map(|r| ProfileRow { rho: r.r, estimate: r.value, stderr: r.stderr, n_samples: r.n_draws, n_disks: 0 })
        .collect();
    RadialProfile::new(kind, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn landmark_round_trip() {
        let ls = vec![
            Landmark { position: C64::new(0.1, -1.0 / 3.0), kind: LandmarkKind::Saddle, jac_w: 1e-300, residual: 2.5e-12 },
            Landmark { position: C64::new(-4.0, 5.5), kind: LandmarkKind::Zero, jac_w: 0.0, residual: 0.0 },
        ];
        let mut buf = Vec::new();
        write_landmarks(&mut buf, &ls).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("# schema: geflab-landmarks v1\nre,im,kind"));
        assert_eq!(read_landmarks(&buf[..]).unwrap(), ls);
    }

    #[test]
    fn profile_round_trip() {
        let a = RadialProfile::synthetic_power("zz", &[0.1, 0.2, 0.3], 1.7, 6.0);
        let b = RadialProfile::synthetic_power("cc", &[0.1, 0.3], 0.1, 4.0);
        let mut buf = Vec::new();
        write_profiles(&mut buf, [&a, &b]).unwrap();
        assert_eq!(read_profiles(&buf[..]).unwrap(), vec![a, b]);
    }

    #[test]
    fn kacrice_round_trip_and_schema_check() {
        let rows = vec![KacRiceRow { kind: "c+".into(), r: 0.02, value: 3.9e-7, stderr: 5e-9, n_draws: 1000 }];
        let mut buf = Vec::new();
        write_kacrice(&mut buf, &rows).unwrap();
        assert_eq!(read_kacrice(&buf[..]).unwrap(), rows);
        assert!(matches!(read_profiles(&buf[..]), Err(CsvError::Schema { .. })));
    }
}
