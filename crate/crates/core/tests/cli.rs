use std::fs;
use std::process::{Command, Output};

fn hexevo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hexevo"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn hover_check_and_mutate_preview() {
    let o = hexevo(&["hover-check"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("feasible true"), "{out}");
    assert!(out.contains("ces 0") || out.contains("ces 5"), "{out}");

    let o = hexevo(&["mutate-preview", "--count", "3", "--seed", "4"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.matches("mutant ").count(), 3, "{out}");
    assert_eq!(out.matches("overlaps 0").count(), 3, "{out}");

    let tmp = tempfile::tempdir().unwrap();
    let g = tmp.path().join("g.json");
    let record: Vec<&str> = out.lines().skip(1).take_while(|l| !l.starts_with("mutant ")).collect();
    fs::write(&g, record.join("\n")).unwrap();
    let o = hexevo(&["hover-check", "--genotype", g.to_str().unwrap()]);
    assert!(o.status.success());
    fs::write(&g, "{}").unwrap();
    let o = hexevo(&["hover-check", "--genotype", g.to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn bad_config_reports_location() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "seed = 1\n[evolution]\nmu = 2\nlamda = 3\n").unwrap();
    let o = hexevo(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("lamda") && err.contains("line 4"), "{err}");
}

#[test]
fn run_analyze_compare_verify() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("tiny.toml");
    fs::write(
        &cfg,
        "repetitions = 1\n[evolution]\nmu = 2\nlambda = 2\ngenerations = 1\n\
         [ppo]\nn_envs = 2\nn_steps = 20\nbatch_size = 20\nn_epochs = 1\nepisode_seconds = 0.1\n",
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let common = ["--config", cfg.to_str().unwrap(), "--output", out_dir.to_str().unwrap(), "--seed", "3"];
    let with = |cmd: &str, extra: &[&str]| {
        let mut a = vec![cmd];
        a.extend_from_slice(&common);
        a.extend_from_slice(extra);
        hexevo(&a)
    };

    let o = with("run", &["--budget", "40"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("individuals 4"), "{}", stdout(&o));
    let o = with("run", &["--budget", "40"]);
    assert!(o.status.success());

    let o = hexevo(&["analyze", out_dir.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("summary.csv"));

    let o = with("compare-baseline", &["--budget", "0", "--runs", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("rep_00/baseline.json")).unwrap()).unwrap();
    assert_eq!(report["baseline"]["waypoints"], serde_json::json!([0]));
    assert_eq!(report["evolved"]["waypoints"], serde_json::json!([0]));

    let o = with("verify", &["--budget", "40", "--retrain"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("verified"));
}
