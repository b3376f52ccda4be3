use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn preset(name: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets").join(format!("{name}.toml"));
    std::fs::read_to_string(p).unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn navslip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_navslip")).args(args).output().unwrap()
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, config.to_str().unwrap(), "--output", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    navslip(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// `key,value` rows of a manifest.
fn manifest(dir: &Path) -> Vec<(String, String)> {
    std::fs::read_to_string(dir.join("manifest.csv"))
        .unwrap()
        .lines()
        .skip_while(|l| l.starts_with('#'))
        .skip(1)
        .take_while(|l| !l.is_empty())
        .map(|l| {
            let (k, v) = l.split_once(',').unwrap();
            (k.to_string(), v.to_string())
        })
        .collect()
}

fn value(dir: &Path, key: &str) -> f64 {
    manifest(dir).into_iter().find(|(k, _)| k == key).unwrap().1.parse().unwrap()
}

#[test]
fn zero_data_gives_zero_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &preset("zero"));
    let out = tmp.path().join("out");
    let o = run("solve", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["state_0000.csv", "state_0002.csv"] {
        let text = std::fs::read_to_string(out.join(name)).unwrap();
        let values: Vec<f64> = text
            .lines()
            .filter(|l| !l.starts_with(char::is_alphabetic))
            .flat_map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>())
            .collect();
        assert!(!values.is_empty());
        assert!(values.iter().all(|v| *v == 0.0), "{name}");
    }
}

#[test]
fn small_alpha_is_rejected_with_the_condition() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &preset("gradcheck"));
    // wall speed 0.5 requires alpha > 1.5
    let o = run("solve", &cfg, &tmp.path().join("out"), &["--bc", "slip", "--alpha", "1.2"]);
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(msg.contains("bc.alpha") && msg.contains("alpha > ||b||_inf + 1 = 1.5"), "{msg}");
}

#[test]
fn flags_override_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let text = preset("zero").replace("alpha = 10.0", "alpha = 0.1");
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("out");
    assert_eq!(run("solve", &cfg, &out, &[]).status.code(), Some(1));
    let o = run("solve", &cfg, &out, &["--alpha", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(manifest(&out).contains(&("alpha".into(), "5e0".into())));
    let o = run("solve", &cfg, &out, &["--bc", "dirichlet"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(manifest(&out).contains(&("bc".into(), "dirichlet".into())));
}

#[test]
fn validation_errors_name_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (preset("zero").replace("[output]", "[cost]\nm = -1.0\n\n[output]"), "cost.m"),
        (preset("zero").replace("region = [0.25, 0.75, 0.25, 0.75]", "region = [0.0, 0.5, 0.25, 0.75]"), "control.region"),
        (preset("zero").replace("steps = 2", "steps = 0"), "time.steps"),
        (preset("zero").replace("[output]", "[solver]\ntol = 0.0\n\n[output]"), "solver.tol"),
        (preset("zero").replace("alphas = [10.0, 100.0, 1000.0]", "alphas = [100.0, 10.0]"), "sweep.alphas"),
    ];
    for (text, key) in cases {
        let cfg = write_config(tmp.path(), &text);
        let o = run("solve", &cfg, &tmp.path().join("out"), &[]);
        assert_eq!(o.status.code(), Some(1), "{key}");
        assert!(stderr(&o).contains(key), "{key}: {}", stderr(&o));
    }
    let cfg = write_config(tmp.path(), &preset("zero").replace("[grid]", "[grid]\nspacing = 2"));
    let o = run("solve", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("spacing"), "{}", stderr(&o));
    let o = navslip(&["solve", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn poiseuille_preset_matches_the_profile() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &preset("poiseuille").replace("steps = 10", "steps = 2"));
    let out = tmp.path().join("out");
    let o = run("solve", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let err = value(&out, "profile_rel_error");
    assert!(err <= 1e-3, "{err}");
}

#[test]
fn gradcheck_passes_and_lists_every_direction() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &preset("gradcheck"));
    let out = tmp.path().join("out");
    let o = run("gradcheck", &cfg, &out, &["--directions", "5", "--eps", "1e-4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("gradcheck.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    for r in &rows {
        let rel: f64 = r.rsplit(',').next().unwrap().parse().unwrap();
        assert!(rel <= 1e-5, "{r}");
    }
}

#[test]
fn gradcheck_threshold_failure_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let text = preset("gradcheck").replace("threshold = 1e-5", "threshold = 1e-300");
    let cfg = write_config(tmp.path(), &text);
    let o = run("gradcheck", &cfg, &tmp.path().join("out"), &["--directions", "2"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("direction 0"), "{}", stderr(&o));
}

#[test]
fn gradient_is_pure_regularization_when_target_is_attained() {
    // the target is recorded from the control the gradient is checked at
    let tmp = tempfile::tempdir().unwrap();
    let text = preset("gradcheck").replace(
        r#"control = { preset = "taylor-vortex", amplitude = 3.0 }"#,
        r#"control = { preset = "constant", value = [1.0, -0.5] }"#,
    );
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("out");
    let o = run("gradcheck", &cfg, &out, &["--eps", "1e-2,1e-3,1e-4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("gradcheck.csv")).unwrap();
    for r in csv.lines().skip(1).filter(|r| !r.starts_with("duality")) {
        let rel: f64 = r.rsplit(',').next().unwrap().parse().unwrap();
        assert!(rel <= 1e-5, "{r}");
    }
}

#[test]
fn energycheck_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &preset("gradcheck"));
    let out = tmp.path().join("out");
    let o = run("energycheck", &cfg, &out, &["--samples", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("energy.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 5);
}

#[test]
fn identical_configs_give_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &preset("gradcheck"));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        assert!(run("optimize", &cfg, dir, &[]).status.success());
        assert!(run("gradcheck", &cfg, dir, &["--directions", "2"]).status.success());
    }
    let strip = |p: PathBuf| -> String {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("# generated_unix="))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 4);
    for n in names {
        assert_eq!(strip(a.join(&n)), strip(b.join(&n)), "{n:?}");
    }
}

#[test]
fn optimize_reaches_a_tenth_of_the_initial_cost() {
    let tmp = tempfile::tempdir().unwrap();
    let text = preset("attainable").replace("resolution = [16, 16]", "resolution = [8, 8]");
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("out");
    let o = run("optimize", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (j0, j) = (value(&out, "cost_initial"), value(&out, "cost_final"));
    assert!(j <= 0.1 * j0, "{j0} -> {j}");
    let history = std::fs::read_to_string(out.join("history.csv")).unwrap();
    let costs: Vec<f64> = history.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(costs.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn sweep_over_the_zero_set_has_zero_control_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &preset("zero"));
    let out = tmp.path().join("out");
    let o = run("sweep", &cfg, &out, &["--threads", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "control_error").unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[col].parse::<f64>().unwrap() == 0.0));
    assert!(out.join("state_error.svg").exists());
}

#[test]
fn poiseuille_sweep_reports_slopes_in_the_plots() {
    let tmp = tempfile::tempdir().unwrap();
    let text = preset("poiseuille-sweep").replace("alphas = [10.0, 31.6, 100.0, 316.0, 1000.0, 3160.0, 10000.0]", "alphas = [10.0, 100.0, 1000.0]");
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("out");
    let o = run("sweep", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = std::fs::read_to_string(out.join("state_error.svg")).unwrap();
    assert!(svg.contains("slope -1.0") || svg.contains("slope -0.99"), "{}", &svg[..300]);
    let slope = value(&out, "slope_state_error");
    assert!((slope + 1.0).abs() <= 0.05, "{slope}");
    let trace = value(&out, "slope_sqrt_alpha_state_trace");
    assert!((trace + 0.5).abs() <= 0.05, "{trace}");
}

#[test]
fn unconverged_optimization_exits_with_two_and_keeps_history() {
    let tmp = tempfile::tempdir().unwrap();
    let text = preset("attainable")
        .replace("resolution = [16, 16]", "resolution = [8, 8]")
        .replace("max_iter = 500", "max_iter = 2");
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("out");
    let o = run("optimize", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(out.join("history.csv")).unwrap().lines().count(), 4);
}
