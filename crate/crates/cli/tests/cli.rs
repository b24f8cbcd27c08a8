use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn vines(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vines")).args(args).output().expect("spawn vines")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

/// Every file of `a` except timing.json is byte-identical in `b`.
fn assert_same_bundle(a: &Path, b: &Path) {
    let mut names: Vec<_> = fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 2);
    for n in names {
        if n == "timing.json" {
            continue;
        }
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?} differs");
    }
}

const CLOSED_FORM: &str = "[model]\neps = 0.05\nlambda = 0.0\nc_e = 0.0\nkappa = 0.54\nl_c = 0.25\n\
[initial]\nv1 = 0.5\nx2 = 0.0\n[simulate]\nhorizon = 5.0\nwavelet = false\n";

#[test]
fn closed_form_impact_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", CLOSED_FORM);
    let out = dir.path().join("o");
    let o = vines(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&out.join("impacts.csv"));
    let tau: f64 = rows[0][1].parse().unwrap();
    assert!((tau - std::f64::consts::FRAC_PI_6).abs() < 1e-6);
}

#[test]
fn conservative_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[model]\nlambda = 0.0\nc_e = 0.0\nkappa = 1.0\nl_c = 0.3\n[initial]\nx2 = 0.0\n[simulate]\nhorizon = 20.0\nwavelet = false\nspectrum = false\n",
    );
    let out = dir.path().join("o");
    assert!(vines(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let rows = read_csv(&out.join("ledger.csv"));
    assert!(rows.len() > 1000);
    for r in rows {
        let e_mech: f64 = r[1].parse().unwrap();
        assert!((e_mech - 1.0).abs() < 1e-8);
    }
    assert!(!read_csv(&out.join("impacts.csv")).is_empty());
}

#[test]
fn rerun_from_manifest_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let cfg = write(dir.path(), "c.toml", "[simulate]\nhorizon = 20.0\n");
    assert!(vines(&["simulate", "--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    let manifest = a.join("manifest.json");
    assert!(vines(&["simulate", "--config", manifest.to_str().unwrap(), "--out", b.to_str().unwrap()]).status.success());
    assert_same_bundle(&a, &b);
}

#[test]
fn projection_warning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[model]\nl_c = 0.5\n[simulate]\nhorizon = 5.0\nwavelet = false\n");
    let out = dir.path().join("o");
    let o = vines(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("outside the cavity"));
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    for (i, text) in ["[model]\nkappa = 2.0\n", "[model]\nkapa = 0.5\n", "[ga]\npopulation = 3\n"].iter().enumerate() {
        let cfg = write(dir.path(), &format!("bad{i}.toml"), text);
        let o = vines(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        let err: String = fs::read_to_string(out.join("error.json")).unwrap();
        assert!(err.contains("\"kind\": \"config\""));
    }
    let o = vines(&["sweep", "--mode", "nsga2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = vines(&["simulate", "--config", "/nonexistent/cfg.toml", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(6));
}

#[test]
fn small_sweep_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[sweep]\nv1 = 0.5\n[sweep.x]\nvar = \"kappa\"\nlo = 0.3\nhi = 0.6\nn = 2\n\
         [sweep.y]\nvar = \"l_c\"\nlo = 0.5\nhi = 1.0\nn = 2\n[compare]\nsamples = 12\n",
    );
    let out = dir.path().join("s");
    assert!(vines(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let rows = read_csv(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 4);
    let out = dir.path().join("c");
    assert!(vines(&["compare", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    assert_eq!(read_csv(&out.join("histograms.csv")).len(), 4 * 4 * 20);
    assert_eq!(read_csv(&out.join("samples.csv")).len(), 4 * 12);
}

#[test]
fn small_optimizations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "seed = 3\n[ga]\npopulation = 4\ngenerations = 2\nelites = 1\nmc_samples = 4\n[optimize]\nfinal_samples = 8\n",
    );
    for mode in ["stochastic", "deterministic", "nsga2"] {
        let out = dir.path().join(mode);
        let o = vines(&["optimize", "--mode", mode, "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{mode}: {}", String::from_utf8_lossy(&o.stderr));
        let result = fs::read_to_string(out.join("result.json")).unwrap();
        assert!(result.contains(&format!("\"mode\": \"{mode}\"")));
        assert_eq!(read_csv(&out.join("history.csv")).len(), 2);
        assert_eq!(out.join("front.csv").exists(), mode == "nsga2");
    }
}

#[test]
fn validate_agrees_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("t1");
    let b = dir.path().join("t4");
    let oa = vines(&["validate", "--mode", "quick", "--threads", "1", "--out", a.to_str().unwrap()]);
    assert!(oa.status.success(), "{}", String::from_utf8_lossy(&oa.stdout));
    let ob = vines(&["validate", "--mode", "quick", "--threads", "4", "--out", b.to_str().unwrap()]);
    assert!(ob.status.success());
    assert_same_bundle(&a, &b);
    let junit = fs::read_to_string(a.join("junit.xml")).unwrap();
    assert!(junit.contains("tests=\"13\"") && junit.contains("failures=\"0\""));
}
