use std::fs;
use std::path::Path;

use hexevo::evolution::RunStore;
use hexevo::experiment::{self, ExperimentConfig, ExperimentError};

fn tiny(dir: &Path, repetitions: usize) -> ExperimentConfig {
    let text = format!(
        r#"
seed = 11
repetitions = {repetitions}
output_dir = "{}"

[evolution]
mu = 2
lambda = 2
generations = 2
smoothing_window = 5

[ppo]
n_envs = 2
n_steps = 40
batch_size = 40
n_epochs = 1
total_timesteps = 80
episode_seconds = 0.2
"#,
        dir.display()
    );
    ExperimentConfig::from_toml(&text, "tiny.toml").unwrap()
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn run_resume_verify_and_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(tmp.path(), 2);
    let first = experiment::run(&cfg).unwrap();
    assert_eq!(first.len(), 2);
    assert_ne!(first[0].seed, first[1].seed);
    for s in &first {
        assert_eq!(s.generations, 3);
        assert_eq!(s.individuals, 2 + 2 * 2);
    }
    let logs: Vec<_> = first.iter().map(|s| RunStore::open(&s.directory).unwrap()).collect();
    assert_ne!(logs[0].individuals[&0].genotype, logs[1].individuals[&0].genotype);

    // a completed directory is left untouched
    let before = snapshot(tmp.path());
    let again = experiment::run(&cfg).unwrap();
    assert_eq!(again, first);
    assert_eq!(snapshot(tmp.path()), before);

    // dropping the last generation record retrains it identically
    let rep0 = cfg.repetition_dir(0);
    fs::remove_file(RunStore::new(&rep0).generation_path(2)).unwrap();
    experiment::run(&cfg).unwrap();
    assert_eq!(snapshot(tmp.path()), before);

    let report = experiment::verify(&rep0, true).unwrap();
    assert!(report.ok(), "{report:?}");
    assert_eq!(report.artifacts.len(), 2 * 3);

    let written = experiment::analyze(tmp.path()).unwrap();
    assert_eq!(written.len(), 2 * 2 + 1);
    let metrics = fs::read_to_string(rep0.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 3);
    assert!(metrics.starts_with("generation,mean_fitness,max_fitness,diversity"));
    let inds = fs::read_to_string(rep0.join("individuals.csv")).unwrap();
    assert_eq!(inds.lines().count(), 1 + 6);
    let summary = fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 3);
}

#[test]
fn corrupt_record_names_the_generation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(tmp.path(), 1);
    experiment::run(&cfg).unwrap();
    let store = RunStore::new(cfg.repetition_dir(0));
    let log = RunStore::open(store.root()).unwrap();
    let victim = log.generations[1].born[0];
    fs::write(store.individual_path(victim), "{ not json").unwrap();
    let err = experiment::run(&cfg).unwrap_err();
    assert!(matches!(err, ExperimentError::Evolution(_)));
    let msg = err.to_string();
    assert!(msg.contains("generation 1"), "{msg}");

    let tmp2 = tempfile::tempdir().unwrap();
    let cfg2 = tiny(tmp2.path(), 1);
    experiment::run(&cfg2).unwrap();
    let g = RunStore::new(cfg2.repetition_dir(0)).generation_path(2);
    fs::write(&g, "[]").unwrap();
    let msg = experiment::run(&cfg2).unwrap_err().to_string();
    assert!(msg.contains("generation 2"), "{msg}");
}

#[test]
fn changed_config_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(tmp.path(), 1);
    let mut c = cfg.clone();
    c.evolution.generations = 0;
    experiment::run(&c).unwrap();
    let err = experiment::run(&cfg.with_budget(120)).unwrap_err().to_string();
    assert!(err.contains("different configuration"), "{err}");
}
