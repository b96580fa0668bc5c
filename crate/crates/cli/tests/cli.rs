use std::path::Path;
use std::process::{Command, Output};

fn wtbridge(args: &[&str], env_root: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wtbridge"));
    cmd.args(args);
    match env_root {
        Some(p) => cmd.env("WTBRIDGE_OUTPUT", p),
        None => cmd.env_remove("WTBRIDGE_OUTPUT"),
    };
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SHORT: [&str; 6] = ["--duration", "4", "--realisations", "2", "--threads", "1"];

fn run_short(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--out", out.to_str().unwrap()];
    args.extend(SHORT);
    args.extend(extra);
    wtbridge(&args, None)
}

#[test]
fn validate_default_config() {
    let o = wtbridge(&["validate"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.starts_with("0 violations"));
    assert!(s.contains("[simulation]") && s.contains("master_seed = 20240601"));
}

#[test]
fn validate_reports_band_mismatch() {
    let o = wtbridge(&["validate", "--case", "1", "--mean-speed", "22"], None);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("case/wind-band mismatch"), "{}", stdout(&o));
}

#[test]
fn validate_reports_composition_and_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "[traffic.composition]\ncar = 0.70\nvan = 0.12\nbus = 0.02\ntruck2 = 0.07\ntruck3 = 0.06\n",
    )
    .unwrap();
    let o = wtbridge(&["validate", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("composition"), "{}", stdout(&o));

    std::fs::write(&cfg, "[simulation]\n\ncase = 1\nduration = \"long\"\n").unwrap();
    let o = wtbridge(&["validate", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("bad.toml:4"), "{}", stderr(&o));
}

#[test]
fn shipped_configs_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for k in 1..=3 {
        let p = root.join(format!("case{k}.toml"));
        let o = wtbridge(&["validate", "--config", p.to_str().unwrap()], None);
        assert!(o.status.success(), "case {k}: {}{}", stdout(&o), stderr(&o));
    }
}

#[test]
fn steady_wind_gives_static_histories() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w");
    let o = run_short(&out, &["--scenario", "W", "--turbulence", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let entries = manifest["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 2);
    for e in entries {
        let h = wtbridge_core::ResponseHistory::load(out.join(e["path"].as_str().unwrap())).unwrap();
        for s in 0..h.stations.len() {
            for dof in [wtbridge_core::Dof::H, wtbridge_core::Dof::Alpha] {
                let v = h.series(s, dof);
                let scale = v.iter().fold(1e-12f64, |m, x| m.max(x.abs()));
                let spread = v.iter().fold(0.0f64, |m, x| m.max((x - v[0]).abs()));
                assert!(spread <= 1e-9 * scale, "station {s}: spread {spread} vs {scale}");
            }
        }
    }
}

#[test]
fn run_is_reproducible_and_analyzable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run_short(out, &["--seed", "7"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let mut names: Vec<String> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "timings.json")
        .collect();
    names.sort();
    assert_eq!(names.iter().filter(|n| n.ends_with(".csv")).count(), 6);
    for n in &names {
        assert_eq!(std::fs::read(a.join(n)).unwrap(), std::fs::read(b.join(n)).unwrap(), "{n}");
    }

    let analysis = dir.path().join("analysis");
    let o = wtbridge(
        &["analyze", a.to_str().unwrap(), "--out", analysis.to_str().unwrap()],
        None,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let compare = std::fs::read_to_string(analysis.join("compare_3.csv")).unwrap();
    let header = compare.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.contains("h_W+T") && header.contains("h_WT"), "{header}");
    for f in ["envelope_W_3.csv", "envelope_WT_3.csv", "envelope_WplusT_3.csv", "compare_3.svg"] {
        assert!(analysis.join(f).is_file(), "{f}");
    }
    // Same inputs, same outputs.
    let again = dir.path().join("again");
    let o = wtbridge(&["analyze", a.to_str().unwrap(), "--out", again.to_str().unwrap()], None);
    assert!(o.status.success());
    assert_eq!(std::fs::read(analysis.join("compare_3.csv")).unwrap(), std::fs::read(again.join("compare_3.csv")).unwrap());
}

#[test]
fn output_root_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "--scenario", "T"];
    args.extend(SHORT);
    let o = wtbridge(&args, Some(dir.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("case3/manifest.json").is_file());
}

#[test]
fn analyze_lists_every_missing_history() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert!(run_short(&out, &["--scenario", "T"]).status.success());
    for r in 0..2 {
        std::fs::remove_file(out.join(format!("history_T_case3_r{r:02}.csv"))).unwrap();
    }
    let o = wtbridge(&["analyze", out.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(5));
    let e = stderr(&o);
    assert!(e.contains("2 missing") && e.contains("r00") && e.contains("r01"), "{e}");
}

#[test]
fn analyze_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert!(run_short(&out, &["--scenario", "T"]).status.success());
    let path = out.join("manifest.json");
    let mut m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    m["entries"] = serde_json::json!([]);
    std::fs::write(&path, m.to_string()).unwrap();
    let o = wtbridge(&["analyze", path.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr(&o).contains("nothing to analyze"), "{}", stderr(&o));
}

#[test]
fn oracle_suite_passes() {
    let o = wtbridge(&["oracle"], None);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    let s = stdout(&o);
    assert_eq!(s.lines().filter(|l| l.starts_with("PASS")).count(), 5, "{s}");
    assert!(!s.contains("FAIL"));
}

#[test]
fn usage_errors_exit_with_two() {
    let o = wtbridge(&["run", "--case", "4"], None);
    assert_eq!(o.status.code(), Some(2));
}
