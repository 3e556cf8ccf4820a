//! The `geflab` binary end to end: exit codes, artifacts, determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use geflab_cli::manifest::{sha256_hex, RunManifest, Status, MANIFEST_FILE};
use geflab_core::io::write_profiles;
use geflab_core::RadialProfile;

fn geflab(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_geflab"));
    c.args(args).env_remove("GEFLAB_THREADS");
    for (k, v) in envs {
        c.env(k, v);
    }
    c.output().expect("binary runs")
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap()).unwrap()
}

fn assert_manifest_matches_files(dir: &Path) {
    let m = manifest(dir);
    assert!(m.wall_clock_s.is_some());
    for a in &m.artifacts {
        let bytes = fs::read(dir.join(&a.path)).unwrap();
        assert_eq!(sha256_hex(&bytes), a.sha256, "{}", a.path);
        if a.path.ends_with(".csv") {
            assert!(bytes.starts_with(b"# schema: "), "{} has no schema line", a.path);
        }
    }
}

const SMALL: &str = "\
seed = 11
[moments]
radii = 0.2, 0.3, 0.4
samples = 6
working_radius = 3.0
[kacrice]
sigma_radii = 0.05, 0.1
sigma_draws = 20000
zcm_radii = 0.5, 0.8
zcm_draws = 20000
mr_radii = 0.1, 1.0
integral_draws = 2000
intervals = 8
[spectrogram]
realizations = 3
side = 4
gef_samples = 2
[landmarks]
radius = 2.5
samples = 2
";

#[test]
fn fit_recovers_a_synthetic_quartic_profile() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("synthetic.csv");
    let mut buf = Vec::new();
    let p = RadialProfile::synthetic_power("q", &[0.1, 0.2, 0.3, 0.4, 0.5], 3.0, 4.0);
    write_profiles(&mut buf, [&p]).unwrap();
    fs::write(&input, buf).unwrap();
    let cfg = dir.path().join("fit.cfg");
    fs::write(&cfg, format!("seed = 1\n[fit]\ninput = {}\nrange = 0.1, 0.5\n", input.display())).unwrap();
    let out = dir.path().join("out");
    let o = geflab(&["fit", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout.contains("q: slope 4.000"), "{stdout}");
    assert!(fs::read_to_string(out.join("fits.csv")).unwrap().contains("\nq,4.0"));
    assert_eq!(manifest(&out).experiments[0].status, Status::Pass);
    assert_manifest_matches_files(&out);
}

#[test]
fn config_errors_exit_with_usage_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "seed = 1\nmoments.samplez = 4\n").unwrap();
    let o = geflab(&["moments", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("moments.samplez"), "{err}");

    fs::write(&cfg, "[moments]\nsamples = 4\n").unwrap();
    let o = geflab(&["moments", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));

    let o = geflab(&["moments", "--config", dir.path().join("missing.cfg").to_str().unwrap(), "--seed", "1"], &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = geflab(&["nonsense"], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn csv_outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    fs::write(&cfg, SMALL).unwrap();
    for sub in ["sample", "landmarks", "moments", "kacrice", "spectrogram"] {
        let runs: Vec<_> = [("1", "a"), ("2", "b")]
            .iter()
            .map(|(threads, tag)| {
                let out = dir.path().join(format!("{sub}-{tag}"));
                let o = geflab(&[sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads], &[]);
                // Tiny budgets may fail numeric checks but never the run itself.
                assert!(matches!(o.status.code(), Some(0 | 1)), "{sub}: {}", String::from_utf8_lossy(&o.stderr));
                assert_manifest_matches_files(&out);
                manifest(&out)
            })
            .collect();
        assert_eq!(runs[0].threads, 1);
        assert_eq!(runs[1].threads, 2);
        let csv = |m: &RunManifest| -> Vec<(String, String)> {
            m.artifacts.iter().filter(|a| a.path != "config.txt").map(|a| (a.path.clone(), a.sha256.clone())).collect()
        };
        assert!(!csv(&runs[0]).is_empty(), "{sub}");
        assert_eq!(csv(&runs[0]), csv(&runs[1]), "{sub}");
    }
}

#[test]
fn thread_count_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = geflab(&["sample", "--seed", "3", "--out", out.to_str().unwrap()], &[("GEFLAB_THREADS", "2")]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(manifest(&out).threads, 2);
    let o = geflab(&["sample", "--seed", "3", "--out", out.to_str().unwrap()], &[("GEFLAB_THREADS", "many")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn stored_samples_read_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = geflab(&["sample", "--seed", "5", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));
    let bin = geflab_core::GefSample::read_binary(fs::File::open(out.join("samples/sample_0000.gef")).unwrap()).unwrap();
    let csv = geflab_core::GefSample::read_csv(fs::File::open(out.join("samples/sample_0000.csv")).unwrap()).unwrap();
    assert_eq!(bin.coeffs(), csv.coeffs());
}
