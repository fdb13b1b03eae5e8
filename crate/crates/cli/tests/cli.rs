use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn models() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn misofade(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_misofade")).args(args).output().unwrap()
}

fn model(name: &str) -> String {
    models().join(name).display().to_string()
}

fn value(report: &str, section: &str, key: &str) -> f64 {
    let body = report.split(&format!("[{section}]\n")).nth(1).expect("section present");
    let line = body
        .lines()
        .find(|l| l.starts_with(&format!("{key} = ")))
        .expect("key present");
    line.split(" = ").nth(1).unwrap().parse().unwrap()
}

#[test]
fn dstar_of_diagonal_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = misofade(&["dstar", "--model", &model("dstar_example.toml"), "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(dir.path().join("report.toml")).unwrap();
    let d = value(&report, "result", "value");
    // K = diag(1, 4), d = (1, 1): d*^2 = 1 + 1/4
    assert!((d - 1.25f64.sqrt()).abs() < 1e-12);
    assert!((d - 1.1180).abs() < 1e-4);
    assert!(report.contains("command = \"dstar\"") && report.contains("seed = 0"));
}

#[test]
fn sweep_writes_four_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = misofade(&[
        "sweep",
        "--model",
        &model("siso_rayleigh.toml"),
        "--snr-grid",
        "40,60,80,100",
        "--plot",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "snr_db,es,mi_nats,mi_minus_loglog,stderr");
    assert_eq!(lines.len(), 5);
    for (row, snr) in lines[1..].iter().zip(["40", "60", "80", "100"]) {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 5);
        assert_eq!(fields[0], snr);
        assert!(fields[1..].iter().all(|f| f.parse::<f64>().unwrap().is_finite()));
    }
    let svg = fs::read_to_string(dir.path().join("sweep.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline") && svg.contains("reference chi"));
}

#[test]
fn bits_convert_presentation_only() {
    let dir = tempfile::tempdir().unwrap();
    let nats_dir = dir.path().join("nats");
    let bits_dir = dir.path().join("bits");
    let m = model("iid_ar1.toml");
    assert!(misofade(&["chi-iid-memory", "--model", &m, "--out", nats_dir.to_str().unwrap()]).status.success());
    assert!(misofade(&["chi-iid-memory", "--model", &m, "--bits", "--out", bits_dir.to_str().unwrap()])
        .status
        .success());
    let nats = value(&fs::read_to_string(nats_dir.join("report.toml")).unwrap(), "result", "value");
    let bits = value(&fs::read_to_string(bits_dir.join("report.toml")).unwrap(), "result", "value");
    assert!((nats - (-0.492_934_1)).abs() < 1e-6);
    assert!((bits - nats / std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn invalid_model_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "nt = 2\nmean = [1.0, 0.0]\ninnovation_covariance = [[1.0, 0.0], [0.0, -1.0]]\n").unwrap();
    let o = misofade(&["dstar", "--model", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.toml:3:"), "{err}");
    assert!(!dir.path().join("report.toml").exists());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(misofade(&["dstar"]).status.code(), Some(1));
    assert_eq!(misofade(&["nonsense"]).status.code(), Some(1));
    let m = model("siso_rayleigh.toml");
    assert_eq!(misofade(&["sweep", "--model", &m]).status.code(), Some(1));
    assert_eq!(misofade(&["sweep", "--model", &m, "--snr-grid", "40,x"]).status.code(), Some(1));
    let general = model("mixture_ar1.toml");
    assert_eq!(misofade(&["chi-gauss", "--model", &general]).status.code(), Some(1));
    assert_eq!(misofade(&["--help"]).status.code(), Some(0));
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn run_in(dir: &Path, args: &[&str]) -> Vec<(String, Vec<u8>)> {
    let mut all = args.to_vec();
    all.extend(["--out", dir.to_str().unwrap()]);
    let o = misofade(&all);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    artifacts(dir)
}

#[test]
fn artifacts_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let sweep_model = model("correlated_var1.toml");
    let sweep = ["sweep", "--model", &sweep_model, "--snr-grid", "20,40,60", "--plot", "--seed", "7"];
    let mixture = model("isotropic_mixture.toml");
    let gaussian = model("correlated_var1.toml");
    let mc = ["isotropic", "--model", &mixture, "--mc-samples", "20000", "--seed", "3"];
    let upper = ["bound-upper", "--model", &gaussian, "--seed", "5"];
    for (name, args) in [("sweep", &sweep[..]), ("mc", &mc[..]), ("upper", &upper[..])] {
        let mut runs = Vec::new();
        for threads in ["1", "4", "4"] {
            let mut a = args.to_vec();
            a.extend(["--threads", threads]);
            runs.push(run_in(&dir.path().join(format!("{name}-{}", runs.len())), &a));
        }
        assert!(!runs[0].is_empty());
        assert_eq!(runs[0], runs[1], "{name}: 1 vs 4 threads");
        assert_eq!(runs[1], runs[2], "{name}: repeated run");
    }
}

#[test]
fn selftest_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let first = misofade(&["selftest", "--threads", "2", "--out", a.to_str().unwrap()]);
    let second = misofade(&["selftest", "--threads", "3", "--out", b.to_str().unwrap()]);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stdout));
    assert_eq!(second.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&first.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("criterion")).count(), 10);
    assert_eq!(fs::read(a.join("report.toml")).unwrap(), fs::read(b.join("report.toml")).unwrap());
}
