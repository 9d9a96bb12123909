use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tomo_core::hilbert::Povm;
use tomo_core::likelihood::MeasurementRecord;
use tomo_core::moments::{
    balanced_basis_coefficient, covariant_coefficient, expand_record, harmonic, MomentSource,
};
use tomo_core::simulator::{CoverageConfig, TruthSource};
use tomo_core::wire::{record_to_json, CoverageConfigDto, RecordDto};

fn tomo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tomo"))
        .args(args)
        .output()
        .expect("tomo binary runs")
}

fn write_file(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn pauli_record(dir: &Path, counts: Vec<u64>) -> PathBuf {
    let record = MeasurementRecord::new(Povm::pauli_six(), counts).unwrap();
    write_file(dir, "record.json", &record_to_json(&record))
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn analyze_report_roundtrips_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let record = pauli_record(dir.path(), vec![5, 1, 3, 3, 2, 6]);
    let record = record.to_str().unwrap();
    let out_a = dir.path().join("a.json");
    let out_b = dir.path().join("b.json");

    let run = tomo(&[
        "analyze", "--input", record, "--epsilon", "0.2", "--samples", "2000", "--seed", "7",
        "--output", out_a.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", stderr_of(&run));

    let report: Value = serde_json::from_str(&fs::read_to_string(&out_a).unwrap()).unwrap();
    assert_eq!(report["seed"], 7);
    assert!(report["tool_version"].is_string());
    assert_eq!(report["record"]["counts"].as_array().unwrap().len(), 6);
    assert!(report["mle"]["log_likelihood"].is_f64());
    assert!(report["normalization"]["log_c"].is_f64());
    assert_eq!(report["region"]["epsilon"], 0.2);
    assert!(report["region"]["witness_count"].as_u64().unwrap() > 0);
    // Witness matrices are only for explicit export, not the report, and the
    // moments field only appears when requested.
    assert!(report["region"]["witnesses"].is_null());
    assert!(report.get("moments").is_none() || report["moments"].is_null());

    let rerun = tomo(&[
        "analyze", "--input", record, "--epsilon", "0.2", "--samples", "2000", "--seed", "7",
        "--output", out_b.to_str().unwrap(),
    ]);
    assert!(rerun.status.success());
    assert_eq!(fs::read(&out_a).unwrap(), fs::read(&out_b).unwrap());

    // Logging stays on stderr and thread count cannot change the bytes.
    let quiet = Command::new(env!("CARGO_BIN_EXE_tomo"))
        .args([
            "analyze", "--input", record, "--epsilon", "0.2", "--samples", "2000", "--seed", "7",
            "--threads", "1",
        ])
        .env("TOMO_LOG", "debug")
        .output()
        .unwrap();
    assert!(quiet.status.success());
    assert_eq!(quiet.stdout, fs::read(&out_a).unwrap());
}

#[test]
fn analyze_appends_moments_for_single_basis_records() {
    let dir = tempfile::tempdir().unwrap();
    let record = MeasurementRecord::new(Povm::z_basis(), vec![14, 6]).unwrap();
    let input = write_file(dir.path(), "z.json", &record_to_json(&record));
    let run = tomo(&[
        "analyze", "--input", input.to_str().unwrap(), "--epsilon", "0.2", "--samples", "2000",
        "--seed", "11", "--lmax", "2",
    ]);
    assert!(run.status.success(), "{}", stderr_of(&run));
    let report: Value = serde_json::from_slice(&run.stdout).unwrap();
    let direct = expand_record(&MomentSource::Record(record), 2).unwrap();
    let coeffs = report["moments"]["coeffs"].as_array().unwrap();
    assert_eq!(coeffs.len(), 9);
    for c in coeffs {
        let l = c["l"].as_u64().unwrap() as usize;
        let m = c["m"].as_i64().unwrap();
        let want = direct.coeff(l, m);
        assert!((c["re"].as_f64().unwrap() - want.re).abs() < 1e-12);
        assert!((c["im"].as_f64().unwrap() - want.im).abs() < 1e-12);
    }
}

#[test]
fn analyze_names_the_offending_field() {
    let dir = tempfile::tempdir().unwrap();

    // Counts array shorter than the POVM.
    let record = MeasurementRecord::new(Povm::pauli_six(), vec![5, 1, 3, 3, 2, 6]).unwrap();
    let mut dto = RecordDto::from_record(&record);
    dto.counts.pop();
    let bad = write_file(dir.path(), "bad.json", &serde_json::to_string(&dto).unwrap());
    let run = tomo(&[
        "analyze", "--input", bad.to_str().unwrap(), "--samples", "2000", "--seed", "1",
    ]);
    assert_eq!(run.status.code(), Some(1));
    assert!(stderr_of(&run).contains("counts"), "{}", stderr_of(&run));

    // Confidence parameter out of range.
    let good = pauli_record(dir.path(), vec![5, 1, 3, 3, 2, 6]);
    let run = tomo(&[
        "analyze", "--input", good.to_str().unwrap(), "--epsilon", "1.5", "--samples", "2000",
        "--seed", "1",
    ]);
    assert_eq!(run.status.code(), Some(1));
    let err = stderr_of(&run);
    assert!(err.contains("epsilon") && err.contains("between 0 and 1"), "{err}");

    // Stochastic commands refuse to run without a seed.
    let run = tomo(&["analyze", "--input", good.to_str().unwrap(), "--samples", "2000"]);
    assert_eq!(run.status.code(), Some(1));

    // Unreadable input path.
    let run = tomo(&["analyze", "--input", "/nonexistent/r.json", "--samples", "2000", "--seed", "1"]);
    assert_eq!(run.status.code(), Some(1));
}

#[test]
fn analyze_reports_estimation_failure_as_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    // A concentrated n=900 likelihood starves the minimum-size Monte Carlo
    // budget of effective samples.
    let record = pauli_record(dir.path(), vec![200, 100, 250, 50, 200, 100]);
    let run = tomo(&[
        "analyze", "--input", record.to_str().unwrap(), "--epsilon", "0.2", "--samples", "1000",
        "--seed", "1",
    ]);
    assert_eq!(run.status.code(), Some(2));
    assert!(stderr_of(&run).contains("effective sample size"), "{}", stderr_of(&run));
}

#[test]
fn bloch_grid_shape_header_and_argmax() {
    let dir = tempfile::tempdir().unwrap();
    let record = MeasurementRecord::new(Povm::half_zy(), vec![2, 8, 7, 3]).unwrap();
    let input = write_file(dir.path(), "fig.json", &record_to_json(&record));
    let out = dir.path().join("grid.csv");
    let run = tomo(&[
        "bloch", "--input", input.to_str().unwrap(), "--grid", "16", "--surface", "--samples",
        "2000", "--seed", "3", "--output", out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", stderr_of(&run));

    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    let mut header_lines = 0;
    for line in lines.by_ref() {
        if line.starts_with('#') {
            header_lines += 1;
            continue;
        }
        assert_eq!(line, "theta,phi,density");
        break;
    }
    assert!(header_lines >= 2, "conventions documented in the header");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 16 * 32);

    // Density peaks where the identified Bloch coordinates match the observed
    // frequencies: z = 2*0.2 - 1, y = 2*0.7 - 1. The record says nothing
    // about x, so the surface maximum is a +/-x pair sharing those (y, z).
    let best = rows
        .iter()
        .max_by(|a, b| a[2].partial_cmp(&b[2]).unwrap())
        .unwrap();
    let (theta, phi) = (best[0], best[1]);
    let y = theta.sin() * phi.sin();
    let z = theta.cos();
    assert!((z + 0.6).abs() < 0.12, "z {z} vs -0.6 at theta {theta}");
    assert!((y - 0.4).abs() < 0.12, "y {y} vs 0.4 at phi {phi}");

    // Same bytes on rerun.
    let out2 = dir.path().join("grid2.csv");
    let rerun = tomo(&[
        "bloch", "--input", input.to_str().unwrap(), "--grid", "16", "--surface", "--samples",
        "2000", "--seed", "3", "--output", out2.to_str().unwrap(),
    ]);
    assert!(rerun.status.success());
    assert_eq!(fs::read(&out).unwrap(), fs::read(&out2).unwrap());
}

#[test]
fn bloch_rejects_non_qubit_records() {
    let dir = tempfile::tempdir().unwrap();
    let record = MeasurementRecord::new(Povm::trivial(3), vec![4]).unwrap();
    let input = write_file(dir.path(), "qutrit.json", &record_to_json(&record));
    let run = tomo(&[
        "bloch", "--input", input.to_str().unwrap(), "--grid", "8", "--samples", "2000",
        "--seed", "3",
    ]);
    assert_eq!(run.status.code(), Some(1));
    assert!(stderr_of(&run).contains("dimension"), "{}", stderr_of(&run));
}

#[test]
fn bloch_flat_record_gives_constant_density() {
    let dir = tempfile::tempdir().unwrap();
    let record = MeasurementRecord::new(Povm::trivial(2), vec![5]).unwrap();
    let input = write_file(dir.path(), "flat.json", &record_to_json(&record));
    let run = tomo(&[
        "bloch", "--input", input.to_str().unwrap(), "--grid", "8", "--surface", "--samples",
        "2000", "--seed", "3",
    ]);
    assert!(run.status.success());
    let text = String::from_utf8(run.stdout).unwrap();
    let densities: Vec<f64> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("theta"))
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(densities.len(), 8 * 16);
    for d in &densities {
        assert!((d - densities[0]).abs() < 1e-9);
    }
}

#[test]
fn coverage_smoke_writes_one_diagnostic_per_trial() {
    let dir = tempfile::tempdir().unwrap();
    let config = CoverageConfig {
        dimension: 2,
        povm: Povm::pauli_six(),
        n: 10,
        epsilon: 0.2,
        trials: 10,
        truth_source: TruthSource::HilbertSchmidt,
        seed: 5,
        mc_samples: 2000,
        exclude_failed_builds: false,
    };
    let dto = CoverageConfigDto::from_config(&config);
    let input = write_file(dir.path(), "cov.json", &serde_json::to_string(&dto).unwrap());
    let out = dir.path().join("report.json");
    let run = tomo(&["coverage", "--input", input.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", stderr_of(&run));

    let report: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["trials"], 10);
    assert_eq!(report["diagnostics"].as_array().unwrap().len(), 10);
    assert_eq!(report["config"]["seed"], 5);
    let lo = report["wilson_low"].as_f64().unwrap();
    let hi = report["wilson_high"].as_f64().unwrap();
    assert!(0.0 <= lo && lo <= hi && hi <= 1.0);

    let out2 = dir.path().join("report2.json");
    let rerun = tomo(&["coverage", "--input", input.to_str().unwrap(), "--output", out2.to_str().unwrap()]);
    assert!(rerun.status.success());
    assert_eq!(fs::read(&out).unwrap(), fs::read(&out2).unwrap());
}

#[test]
fn coverage_rejects_zero_trials() {
    let dir = tempfile::tempdir().unwrap();
    let config = CoverageConfig {
        dimension: 2,
        povm: Povm::pauli_six(),
        n: 10,
        epsilon: 0.2,
        trials: 0,
        truth_source: TruthSource::HilbertSchmidt,
        seed: 5,
        mc_samples: 2000,
        exclude_failed_builds: false,
    };
    let dto = CoverageConfigDto::from_config(&config);
    let input = write_file(dir.path(), "cov.json", &serde_json::to_string(&dto).unwrap());
    let run = tomo(&["coverage", "--input", input.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(1));
    assert!(stderr_of(&run).contains("trials"), "{}", stderr_of(&run));
}

#[test]
fn moments_covariant_outcome_matches_the_coefficient_table() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(
        dir.path(),
        "cov.json",
        r#"{"covariant":{"n":1,"theta":0.9,"phi":2.3}}"#,
    );
    let run = tomo(&["moments", "--input", input.to_str().unwrap(), "--lmax", "1"]);
    assert!(run.status.success(), "{}", stderr_of(&run));
    let v: Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(v["l_max"], 1);
    let coeffs = v["coeffs"].as_array().unwrap();
    assert_eq!(coeffs.len(), 4);

    use num_traits::ToPrimitive;
    let scale = covariant_coefficient(1, 1).to_f64().unwrap();
    assert!((scale - 1.0 / 3.0).abs() < 1e-15);
    for c in coeffs {
        let l = c["l"].as_u64().unwrap();
        let m = c["m"].as_i64().unwrap();
        let got = (c["re"].as_f64().unwrap(), c["im"].as_f64().unwrap());
        let want = if l == 0 {
            (1.0, 0.0)
        } else {
            let y = harmonic(1, m, 0.9, 2.3).unwrap().conj() * scale;
            (y.re, y.im)
        };
        assert!((got.0 - want.0).abs() < 1e-12, "l={l} m={m}");
        assert!((got.1 - want.1).abs() < 1e-12, "l={l} m={m}");
    }
}

#[test]
fn moments_balanced_record_is_zonal_and_even() {
    let dir = tempfile::tempdir().unwrap();
    let record = MeasurementRecord::new(Povm::z_basis(), vec![2, 2]).unwrap();
    let input = write_file(dir.path(), "zbal.json", &record_to_json(&record));
    let run = tomo(&["moments", "--input", input.to_str().unwrap(), "--lmax", "4"]);
    assert!(run.status.success(), "{}", stderr_of(&run));
    let v: Value = serde_json::from_slice(&run.stdout).unwrap();
    let direct = expand_record(&MomentSource::Record(record), 4).unwrap();

    use num_traits::ToPrimitive;
    for c in v["coeffs"].as_array().unwrap() {
        let l = c["l"].as_u64().unwrap() as usize;
        let m = c["m"].as_i64().unwrap();
        let re = c["re"].as_f64().unwrap();
        let im = c["im"].as_f64().unwrap();
        let want = direct.coeff(l, m);
        assert!((re - want.re).abs() < 1e-12 && (im - want.im).abs() < 1e-12, "l={l} m={m}");
        if m != 0 || l % 2 == 1 {
            assert!(re.abs() < 1e-12 && im.abs() < 1e-12, "zonal even-band only: l={l} m={m}");
        } else {
            let table = balanced_basis_coefficient(4, l as u64).unwrap().to_f64().unwrap();
            let norm = ((2 * l + 1) as f64).sqrt();
            assert!((re.abs() - (table * norm).abs()).abs() < 1e-9, "l={l}");
            assert!(re.abs() > 1e-3, "l={l} should be nonzero");
        }
    }
}

#[test]
fn moments_rejects_multi_basis_records_as_unsupported() {
    let dir = tempfile::tempdir().unwrap();
    let record = pauli_record(dir.path(), vec![5, 1, 3, 3, 2, 6]);
    let run = tomo(&["moments", "--input", record.to_str().unwrap(), "--lmax", "2"]);
    assert_eq!(run.status.code(), Some(3));
}

#[test]
fn moments_lmax_zero_gives_the_unit_mass_entry() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(
        dir.path(),
        "cov.json",
        r#"{"covariant":{"n":3,"theta":0.4,"phi":1.0}}"#,
    );
    let run = tomo(&["moments", "--input", input.to_str().unwrap(), "--lmax", "0"]);
    assert!(run.status.success());
    let v: Value = serde_json::from_slice(&run.stdout).unwrap();
    let coeffs = v["coeffs"].as_array().unwrap();
    assert_eq!(coeffs.len(), 1);
    assert_eq!(coeffs[0]["l"], 0);
    assert_eq!(coeffs[0]["m"], 0);
    assert!((coeffs[0]["re"].as_f64().unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn version_exits_zero_and_unknown_flags_exit_one() {
    let run = tomo(&["--version"]);
    assert!(run.status.success());
    assert!(String::from_utf8_lossy(&run.stdout).contains("tomo"));

    let run = tomo(&["analyze", "--bogus"]);
    assert_eq!(run.status.code(), Some(1));
}
