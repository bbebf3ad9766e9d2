use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_csbpc");

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "fixtures", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn fixtures() -> Vec<(String, String)> {
    let dir: PathBuf = [env!("CARGO_MANIFEST_DIR"), "fixtures"].iter().collect();
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .map(|p| (p.file_stem().unwrap().to_string_lossy().into_owned(), p.to_string_lossy().into_owned()))
        .collect();
    v.sort();
    v
}

fn csbpc(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = csbpc(args);
    assert!(
        out.status.success(),
        "csbpc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every numeric field must be printed as `{:.16e}`.
fn assert_float_format(csv: &str) {
    for line in csv.lines().skip(1) {
        for field in line.split(',') {
            if let Ok(x) = field.parse::<f64>() {
                if field.contains('e') {
                    assert_eq!(format!("{x:.16e}"), field, "in line {line}");
                }
            }
        }
    }
}

#[test]
fn classify_strongly_subcritical() {
    let out = ok(&["classify", "--config", &fixture("strongly.toml")]);
    assert_eq!(out.lines().next(), Some("StronglySubcritical rate=-0.4 kappa=0"));
    assert!(out.contains("label,phi_prime_0,phi_prime_1,tau,exp_rate,poly_exponent"));
}

#[test]
fn classify_weak_reports_tau() {
    let out = ok(&["classify", "--config", &fixture("weak.toml")]);
    assert!(out.starts_with("WeaklySubcritical rate=-0.04303566603 kappa=1.5"));
    assert!(out.contains("tau=0.4712336271"));
}

#[test]
fn cell_classify_mentions_infected_cells() {
    let out = ok(&["classify", "--config", &fixture("cell.toml")]);
    assert!(out.contains("infected cells"));
}

#[test]
fn ode_check_within_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ode.csv");
    ok(&["ode-check", "--config", &fixture("stable_beta_half.toml"), "--out", s(&out)]);
    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,lambda,max_rel_err,mean_rel_err,paths"));
    let mut rows = 0;
    for line in lines {
        let max: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!(max <= 1e-6, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 9);
    assert_float_format(&csv);
}

#[test]
fn ode_check_general_is_inside_sandwich() {
    let out = ok(&["ode-check", "--config", &fixture("general.toml"), "--n", "5", "--t-grid", "1,5"]);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r.ends_with(",true")));
}

#[test]
fn empty_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.toml");
    fs::write(&cfg, "# nothing\n").unwrap();
    for cmd in ["classify", "survival", "rates", "ode-check", "simulate"] {
        let out = csbpc(&[cmd, "--config", s(&cfg)]);
        assert!(!out.status.success(), "{cmd}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));
    }
}

#[test]
fn usage_errors_exit_nonzero() {
    let strongly = fixture("strongly.toml");
    let general = fixture("general.toml");
    let cases: Vec<Vec<&str>> = vec![
        vec![],
        vec!["frobnicate"],
        vec!["classify"],
        vec!["classify", "--config", "/nonexistent/model.toml"],
        vec!["survival", "--quenched", "--method", "plain", "--config", &strongly],
        vec!["survival", "--path", "p.csv", "--config", &strongly],
        vec!["survival", "--config", &strongly, "--method", "esscher:nope"],
        vec!["survival", "--config", &strongly, "--t-grid", "5:1:1"],
        vec!["survival", "--config", &strongly, "--workers", "0"],
        vec!["survival", "--config", &strongly, "--n", "0"],
        vec!["rates", "--config", &general],
        vec!["phase-diagram", "--n", "10"],
        vec!["rerun", "--manifest", "/nonexistent/x.manifest.toml"],
    ];
    for args in cases {
        assert!(!csbpc(&args).status.success(), "{args:?} should fail");
    }
}

#[test]
fn malformed_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[mechanism]\nkind = \"stable\"\ng = 0.1\nc_plus = 1.0\nbeta = 3.0\n").unwrap();
    assert!(!csbpc(&["classify", "--config", s(&cfg)]).status.success());
    fs::write(&cfg, "[mechanism]\nkind = \"stable\"\ng = 0.1\nc_plus = 1.0\nbeta = 1.0\ncolour = 1\n").unwrap();
    assert!(!csbpc(&["classify", "--config", s(&cfg)]).status.success());
}

#[test]
fn every_fixture_runs_under_every_command() {
    for (name, path) in fixtures() {
        let general = name == "general";
        ok(&["classify", "--config", &path]);
        ok(&["survival", "--config", &path, "--n", "50", "--t-grid", "1,2"]);
        ok(&["survival", "--quenched", "--config", &path, "--t-grid", "1,2"]);
        ok(&["ode-check", "--config", &path, "--n", "3", "--t-grid", "1"]);
        ok(&["simulate", "--config", &path, "--n", "2", "--t-grid", "0:1:0.5"]);
        ok(&["phase-diagram", "--config", &path, "--theta", "0.25", "--gr", "0:1:0.5"]);
        if !general {
            ok(&["rates", "--config", &path, "--n", "200", "--t-grid", "1:6:1", "--workers", "2"]);
        }
    }
}

fn rerun_matches(args: &[&str], name: &str) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join(format!("{name}.csv"));
    let mut full: Vec<&str> = args.to_vec();
    full.extend(["--out", s(&out)]);
    ok(&full);
    let manifest = dir.path().join(format!("{name}.csv.manifest.toml"));
    let text = fs::read_to_string(&manifest).unwrap();
    assert!(text.contains("version"));

    let again_dir = dir.path().join("again");
    fs::create_dir(&again_dir).unwrap();
    let again = again_dir.join(format!("{name}.csv"));
    ok(&["rerun", "--manifest", s(&manifest), "--out", s(&again)]);

    let mut produced: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file() && !p.to_string_lossy().ends_with(".manifest.toml"))
        .collect();
    produced.sort();
    assert!(!produced.is_empty());
    for p in produced {
        let twin = again_dir.join(p.file_name().unwrap());
        assert_eq!(fs::read(&p).unwrap(), fs::read(&twin).unwrap(), "{}", p.display());
    }
    // rerunning in place reproduces the recorded file too
    let before = fs::read(&out).unwrap();
    ok(&["rerun", "--manifest", s(&manifest)]);
    assert_eq!(before, fs::read(&out).unwrap());
}

#[test]
fn manifest_rerun_is_byte_identical() {
    let strongly = fixture("strongly.toml");
    let weak = fixture("weak.toml");
    rerun_matches(&["survival", "--config", &strongly, "--n", "500", "--seed", "9"], "survival");
    rerun_matches(
        &["rates", "--fit", "--config", &weak, "--n", "400", "--t-grid", "5:30:5", "--workers", "3"],
        "rates",
    );
    rerun_matches(&["survival", "--quenched", "--config", &fixture("general.toml")], "quenched");
    rerun_matches(&["simulate", "--config", &fixture("supercritical.toml"), "--n", "3"], "simulate");
    rerun_matches(&["phase-diagram", "--theta", "0.1:0.4:0.1", "--gr", "0:2:0.5"], "diagram");
    rerun_matches(&["classify", "--config", &fixture("cell.toml")], "classify");
}

#[test]
fn worker_count_does_not_change_output() {
    let weak = fixture("weak.toml");
    let a = ok(&["survival", "--config", &weak, "--n", "800", "--workers", "1", "--method", "esscher:auto"]);
    let b = ok(&["survival", "--config", &weak, "--n", "800", "--workers", "5", "--method", "esscher:auto"]);
    assert_eq!(a, b);
    assert!(a.contains("esscher:0.47123"));
}

#[test]
fn quenched_survival_from_path_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("path.csv");
    fs::write(&path, "time,log_multiplier\n0.5,-0.6931471805599453\n1.5,-0.6931471805599453\n").unwrap();
    let out = ok(&[
        "survival",
        "--quenched",
        "--config",
        &fixture("strongly.toml"),
        "--path",
        s(&path),
        "--t-grid",
        "1,2",
    ]);
    let rows: Vec<f64> = out
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    // Feller closed form 1 - exp(-x0 / J) with J = ∫ e^{-K}, K = 0.1 s minus ln 2 per jump
    let j = |t: f64| {
        let seg = |a: f64, b: f64, shift: f64| shift * ((-0.1 * a).exp() - (-0.1 * b).exp()) / 0.1;
        let mut total = seg(0.0, t.min(0.5), 1.0);
        if t > 0.5 {
            total += seg(0.5, t.min(1.5), 2.0);
        }
        if t > 1.5 {
            total += seg(1.5, t, 4.0);
        }
        total
    };
    for (p, t) in rows.iter().zip([1.0, 2.0]) {
        let exact = 1.0 - (-1.0 / j(t)).exp();
        assert!((p - exact).abs() < 1e-12, "{p} vs {exact}");
    }
}

#[test]
fn rates_fit_rows() {
    let out = ok(&[
        "rates",
        "--fit",
        "--config",
        &fixture("strongly.toml"),
        "--n",
        "5000",
        "--method",
        "esscher:1",
    ]);
    let fit = out.lines().find(|l| l.starts_with("fit,")).unwrap();
    let rho: f64 = fit.split(',').nth(1).unwrap().parse().unwrap();
    assert!((rho + 0.4).abs() < 0.04, "{fit}");
    assert!(out.lines().any(|l| l.starts_with("prediction,") && l.ends_with("StronglySubcritical")));
}

#[test]
fn phase_diagram_csv() {
    let out = ok(&["phase-diagram", "--theta", "0.25", "--gr", "0.4,1.8"]);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows[0], "theta,g_over_r,label,critical_boundary,entropy_boundary");
    assert!(rows[1].contains("StronglySubcritical"));
    assert!(rows[2].contains("Supercritical"));
    assert_float_format(&out);
}

#[test]
fn simulate_writes_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.csv");
    ok(&["simulate", "--config", &fixture("supercritical.toml"), "--n", "2", "--t-grid", "0:4:1", "--out", s(&out)]);
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("replicate,t,K_t,Y_t\n"));
    assert_eq!(csv.lines().count(), 11);
    for i in 0..2 {
        let p = fs::read_to_string(dir.path().join(format!("sim.path{i}.csv"))).unwrap();
        assert!(p.starts_with("time,log_multiplier"));
    }
    assert_float_format(&csv);
}

#[test]
fn run_defaults_come_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("m.toml");
    let base = fs::read_to_string(fixture("strongly.toml")).unwrap();
    fs::write(&cfg, format!("{base}\n[run]\nseed = 3\nn = 100\nt_grid = \"1,2,3\"\n")).unwrap();
    let out = ok(&["survival", "--config", s(&cfg)]);
    assert_eq!(out.lines().count(), 4);
    let explicit = ok(&["survival", "--config", &fixture("strongly.toml"), "--seed", "3", "--n", "100", "--t-grid", "1,2,3"]);
    assert_eq!(out, explicit);
}
