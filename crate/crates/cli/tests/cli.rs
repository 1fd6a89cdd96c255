use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_delocspec");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("DELOCSPEC_OUT").output().unwrap()
}

fn run_in(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Rows of a CSV as maps from header to cell.
fn read_csv(path: &Path) -> Vec<std::collections::HashMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    r.records()
        .map(|rec| header.iter().cloned().zip(rec.unwrap().iter().map(String::from)).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("c.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn laplacian_deltas_are_one_over_n() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in("converge", &configs().join("lap_z.toml"), dir.path(), &["--stages", "2..200,1000", "--no-oracle"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_csv(&dir.path().join("convergence.csv"));
    assert_eq!(rows.len(), 200);
    let mut last = f64::INFINITY;
    for r in &rows {
        let n: i64 = r["i"].parse().unwrap();
        for g in ["e", "u"] {
            assert_eq!(r[&format!("coeff_exact[{g}]")], format!("1/{n}"));
            let d = num(&r[&format!("delta[{g}]")]);
            assert!((d - 1.0 / n as f64).abs() <= 1e-12, "n = {n}: {d}");
        }
        assert_eq!(r["F0_exact"], format!("1/{n}"));
        let d = num(&r["delta[e]"]);
        assert!(d < last);
        last = d;
    }
}

#[test]
fn z2z_deltas_are_one_over_2n() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in("converge", &configs().join("z2z.toml"), dir.path(), &["--stages", "2..40"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_csv(&dir.path().join("convergence.csv"));
    let (stages, oracle): (Vec<_>, Vec<_>) = rows.iter().partition(|r| r["i"] != "oracle");
    for r in stages {
        let n: f64 = num(&r["i"]);
        for g in ["e", "t"] {
            let d = num(&r[&format!("delta[{g}]")]);
            assert!((d - 1.0 / (2.0 * n)).abs() <= 1e-10, "n = {n}, {g}: {d}");
        }
    }
    assert_eq!(oracle.len(), 1);
    assert!((num(&oracle[0]["coeff[t]"]) - 0.5).abs() <= 1e-6);
}

#[test]
fn classical_run_is_the_identity_column() {
    let dir = tempfile::tempdir().unwrap();
    let both = dir.path().join("both");
    let only_e = dir.path().join("e");
    let cfg = configs().join("z2z.toml");
    assert!(run_in("converge", &cfg, &both, &["--stages", "2..12", "--no-oracle"]).status.success());
    assert!(run_in("converge", &cfg, &only_e, &["--stages", "2..12", "--no-oracle", "--track", "e"]).status.success());
    let a = read_csv(&both.join("convergence.csv"));
    let b = read_csv(&only_e.join("convergence.csv"));
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x["F0_exact"], y["coeff_exact[e]"]);
        assert_eq!(x["coeff_exact[e]"], y["coeff_exact[e]"]);
    }
}

#[test]
fn reproducible_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("z2z.toml");
    let outs: Vec<PathBuf> = (0..2).map(|i| dir.path().join(i.to_string())).collect();
    for o in &outs {
        let r = run_in("converge", &cfg, o, &["--stages", "2..24", "--reproducible", "--grid", "256"]);
        assert!(r.status.success(), "{}", stderr(&r));
        let r = run_in("density", &cfg, o, &["--stages", "2..8", "--reproducible", "--grid", "256"]);
        assert!(r.status.success(), "{}", stderr(&r));
    }
    for f in ["convergence.csv", "densities.csv", "report.txt"] {
        assert_eq!(fs::read(outs[0].join(f)).unwrap(), fs::read(outs[1].join(f)).unwrap(), "{f}");
    }
}

#[test]
fn oracle_table_for_the_sector_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in("oracle", &configs().join("z2z.toml"), dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("{e: 0.5, t: 0.5}"), "{}", stdout(&o));
    assert!(dir.path().join("report.txt").exists());
}

#[test]
fn detbound_integer_input_prints_nonnegative_lndet() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in("detbound", &configs().join("golden_z.toml"), dir.path(), &["--stages", "8..64:8"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("stage ") && l.ends_with("≥ 0: PASS")).count(), 8, "{out}");
    let rows = read_csv(&dir.path().join("determinants.csv"));
    assert!(rows.iter().filter(|r| r["source"] == "stage").all(|r| r["certified"] == "true"));
    let oracle = rows.iter().find(|r| r["source"] == "oracle").unwrap();
    assert!((num(&oracle["lndet"]) - ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-3);
}

#[test]
fn detbound_cyclotomic_bounds_hold() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in("detbound", &configs().join("conductor4.toml"), dir.path(), &["--stages", "2..16"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_csv(&dir.path().join("determinants.csv"));
    assert!(rows.iter().filter(|r| r["source"] == "stage").all(|r| r["bounds"] == "PASS"));
}

#[test]
fn sofic_cycles_match_quotients() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("golden_z.toml");
    let o = run_in("sofic", &cfg, &dir.path().join("s"), &["--stages", "8,16"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(run_in("detbound", &cfg, &dir.path().join("d"), &["--stages", "8,16"]).status.success());
    let s = read_csv(&dir.path().join("s/determinants.csv"));
    let d = read_csv(&dir.path().join("d/determinants.csv"));
    for (a, b) in s.iter().zip(&d).take(2) {
        assert!((num(&a["lndet"]) - num(&b["lndet"])).abs() < 1e-9);
        assert_eq!(a["det_star_certificate"], b["det_star_certificate"]);
    }
}

#[test]
fn failing_check_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("lap_z.toml")).unwrap().replace("final_delta = 1e-3", "final_delta = 1e-6");
    let cfg = write_config(dir.path(), &text);
    let o = run_in("converge", &cfg, &dir.path().join("o"), &["--stages", "2..16", "--no-oracle"]);
    assert_eq!(o.status.code(), Some(1));
    let report = fs::read_to_string(dir.path().join("o/report.txt")).unwrap();
    assert!(report.contains("check.final_delta = FAIL") && report.ends_with("result = FAIL\n"), "{report}");
}

#[test]
fn parse_errors_carry_context() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("lap_z.toml")).unwrap().replace("seed = 1", "seed = 1\nsede = 2");
    let cfg = write_config(dir.path(), &text);
    let o = run_in("converge", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("sede") && err.contains("c.toml"), "{err}");

    let text = fs::read_to_string(configs().join("lap_z.toml")).unwrap().replace("2..4096", "2,8,4");
    let cfg = write_config(dir.path(), &text);
    let err = stderr(&run_in("converge", &cfg, dir.path(), &[]));
    assert!(err.contains("strictly increasing"), "{err}");
}

#[test]
fn folner_rejects_elements_outside_the_finite_factor() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in("converge", &configs().join("z2z_folner.toml"), dir.path(), &["--track", "e,u"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cannot track `u`"), "{}", stderr(&o));
}

#[test]
fn folner_stages_pass_telescope_checks() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in("converge", &configs().join("z2z_folner.toml"), dir.path(), &["--stages", "2..16", "--no-oracle"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("telescope: PASS (15/15)"), "{}", stdout(&o));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("golden_z.toml");
    let o = Command::new(BIN)
        .args(["oracle", "--config", cfg.to_str().unwrap(), "--grid", "64"])
        .env("DELOCSPEC_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("report.txt").exists());
}

#[test]
fn conflicting_flags_and_unknown_subcommand() {
    let cfg = configs().join("lap_z.toml");
    let o = run(&["oracle", "--config", cfg.to_str().unwrap(), "--grid", "64", "--no-oracle"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cannot be used with"), "{}", stderr(&o));
    let o = run(&["plot", "--config", cfg.to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
}
