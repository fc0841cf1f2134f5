use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_truncfock"))
}

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn write_cfg(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.cfg");
    std::fs::write(&p, text).unwrap();
    p
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1, "expected one line, got {text:?}");
    serde_json::from_str(lines[0]).unwrap()
}

const SMALL: &str = "space.sites = 6\nspace.box = 6.0\nparticles = 2\ninteraction.kind = \"soft_coulomb\"\n";

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    for (text, key) in [
        ("scenario = \"hvz\"\nsolver.resarts = 3\n", "solver.resarts"),
        ("scenario = \"hvz\"\nspace.sites = \"six\"\n", "space.sites"),
        ("scenario = \"hvz\"\npotential.kind = \"well\"\npotential.omega = 1.0\n", "potential.omega"),
        ("scenario = \"hvz\"\nspace = [1, \n", "<syntax>"),
        ("scenario = \"sideways\"\n", "scenario"),
    ] {
        let cfg = write_cfg(dir.path(), text);
        let out = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{text}");
        let err = stderr_json(&out);
        assert_eq!(err["error"], "config");
        assert_eq!(err["key"], key, "{text}");
    }
}

#[test]
fn solve_takes_the_scenario_from_the_command() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), &format!("{SMALL}rank = 3\n"));
    for (kind, files) in [
        ("exact", &["energies.csv", "profile.csv"][..]),
        ("hf", &["energies.csv", "profile.csv"]),
        ("rank", &["energies.csv"]),
        ("hvz", &["energies.csv", "margins.csv"]),
        ("pekar", &["energies.csv", "profile.csv"]),
    ] {
        let out_dir = dir.path().join(kind);
        let out = bin().args(["solve", kind, "--seed", "5", "--restarts", "2", "--config"]).arg(&cfg).arg("--out").arg(&out_dir).output().unwrap();
        assert!(out.status.success(), "{kind}: {}", String::from_utf8_lossy(&out.stderr));
        for f in files.iter().chain(&["manifest.json"]) {
            assert!(out_dir.join(f).exists(), "{kind} missing {f}");
        }
        let manifest: serde_json::Value = serde_json::from_reader(std::fs::File::open(out_dir.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["scenario"], kind);
        assert_eq!(manifest["seed"], 5);
    }
}

#[test]
fn rank_requirement_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), SMALL);
    let out = bin().args(["solve", "rank", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["key"], "rank");
}

#[test]
fn non_convergence_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), &format!("{SMALL}rank = 4\nsolver.max_iterations = 1\n"));
    let out = bin().args(["solve", "rank", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "computation");
}

#[test]
fn escaping_config_writes_its_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["run", "--config"]).arg(shipped("escaping.cfg")).arg("--out").arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["convergence.csv", "convergence.json", "particle_numbers.csv", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
    let mut rdr = csv::Reader::from_path(dir.path().join("particle_numbers.csv")).unwrap();
    let counts: Vec<f64> = rdr.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(counts.len(), 5);
    assert!(counts.iter().all(|n| (n - 2.0).abs() < 1e-12));
}

#[test]
fn bipolaron_config_writes_its_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["run", "--config"]).arg(shipped("bipolaron_scan.cfg")).arg("--out").arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("binding_curve.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap().get(0), Some("alpha"));
    assert_eq!(rdr.records().count(), 8);
    assert!(dir.path().join("margins.csv").exists());
}

#[test]
fn verify_quick_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["verify", "quick", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().skip(1).all(|l| l.ends_with("pass")), "{stdout}");
    let report: serde_json::Value = serde_json::from_reader(std::fs::File::open(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["level"], "quick");
}
