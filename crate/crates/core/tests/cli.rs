mod common;

use common::cli;

fn write(dir: &std::path::Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn invalid_kernel_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[kernel]\nname = \"no-such-kernel\"\n");
    let out = dir.path().join("out.csv");
    let (code, stdout, stderr) = cli(&["energy", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(code, 2, "{stderr}");
    assert!(stdout.is_empty());
    assert!(stderr.contains("line 2") && stderr.contains("no-such-kernel"), "{stderr}");
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1, "stray files left behind");
}

#[test]
fn every_validation_error_is_listed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[grid]\nN = 2\nsize = 3\n[params]\ns = 1.0\nf = \"cos(x)\"\n");
    let (code, _, stderr) = cli(&["solve-nonlocal", "--config", &cfg], None);
    assert_eq!(code, 2);
    for needle in ["line 2: N must be at least 3", "line 3: unknown key `grid.size`", "line 5: s must lie in (0,1)", "line 6: params.f"] {
        assert!(stderr.contains(needle), "missing `{needle}` in\n{stderr}");
    }
}

#[test]
fn homogenize_reports_the_gap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "h.toml", "[kernel]\nname = \"periodic-1d\"\n[kernel.params]\nA0 = 2\nA1 = 1\n");
    let out = dir.path().join("h.csv");
    let (code, stdout, _) = cli(&["homogenize", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(code, 0);
    assert!(stdout.contains("gap 0.2679"), "{stdout}");
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("A_star_formula,A_star_oracle,A_bar,gap"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((row[1] - 3f64.sqrt()).abs() < 0.01 * 3f64.sqrt());
    assert!((row[2] - 2.0).abs() < 1e-10);
}

#[test]
fn bbm_sweep_default_config() {
    let (code, stdout, stderr) = cli(&["bbm-sweep"], None);
    assert_eq!(code, 0, "{stderr}");
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "param,value,extrapolated,reference,rel_error");
    assert_eq!(lines.len(), 7);
    let last: f64 = lines[6].rsplit(',').next().unwrap().parse().unwrap();
    assert!(last < 0.02);
    assert!(stderr.starts_with("bbm-sweep: 6 rows"), "{stderr}");
}

#[test]
fn energy_breakdown_columns() {
    let (code, plain, _) = cli(&["energy"], None);
    assert_eq!(code, 0);
    assert!(plain.starts_with("value,error_bound\n"));
    let (code, split, _) = cli(&["energy", "--breakdown"], None);
    assert_eq!(code, 0);
    let mut lines = split.lines();
    assert_eq!(lines.next(), Some("value,near_diagonal,bulk,tail,error_bound"));
    let v: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(v[0], v[1] + v[2] + v[3]);
    assert_eq!(plain.lines().nth(1).unwrap().split(',').next().unwrap().parse::<f64>().unwrap(), v[0]);
}

#[test]
fn non_convergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "n.toml", "[grid]\nN = 33\n[params]\np = 3\nmax_iter = 2\n");
    let out = dir.path().join("u.csv");
    let (code, stdout, _) = cli(&["solve-nonlocal", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(code, 3);
    assert!(stdout.contains("converged false"), "{stdout}");
    assert!(std::fs::read_to_string(&out).unwrap().starts_with("# grid n=1"));
}

#[test]
fn solve_local_writes_a_grid_function() {
    let (code, stdout, _) = cli(&["solve-local"], None);
    assert_eq!(code, 0);
    let vals: Vec<f64> = stdout.lines().skip(1).map(|l| l.parse().unwrap()).collect();
    assert_eq!(vals.len(), 129);
    assert!((vals[64] - 0.25).abs() < 1e-10);
}

#[test]
fn verify_kernel_seed_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "k.toml", "[kernel]\nname = \"periodic-1d\"\n[params]\nsamples = 64\n");
    let (code, a, _) = cli(&["verify-kernel", "--config", &cfg, "--seed", "3"], None);
    assert_eq!(code, 0);
    let (_, b, _) = cli(&["verify-kernel", "--config", &cfg, "--seed", "3"], None);
    assert_eq!(a, b);
    // periodic-1d depends on x only, so m(x, h) = m(x - h, -h) fails.
    assert!(a.contains("h2_violation") && a.lines().any(|l| l.starts_with("h2_violation") && l.ends_with("false")), "{a}");
    assert!(a.lines().last().unwrap().ends_with("false"));
}

#[test]
fn two_dimensional_cap_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "big.toml", "[grid]\nn = 2\nN = 49\n");
    let (code, _, stderr) = cli(&["energy", "--config", &cfg], None);
    assert_eq!(code, 2);
    assert!(stderr.contains("48"), "{stderr}");
}

#[test]
fn output_path_from_config_is_relative_to_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "o.toml", "[output]\npath = \"result.csv\"\n");
    let (code, _, _) = cli(&["homogenize", "--config", &cfg], None);
    // The constant kernel is periodic with any period, so homogenize runs.
    assert_eq!(code, 0);
    assert!(dir.path().join("result.csv").exists());
}

#[test]
fn bad_thread_count_and_unknown_flag() {
    assert_eq!(cli(&["energy", "--threads", "0"], None).0, 2);
    assert_eq!(cli(&["energy", "--bogus"], None).0, 2);
    assert_eq!(cli(&["energy"], Some(3)).0, 0);
}
