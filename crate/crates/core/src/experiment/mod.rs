//! Experiment configuration and orchestration: repeated evolution runs,
//! metric tables, baseline comparisons and reproducibility checks.

pub mod baseline;
pub mod tables;
pub mod verify;

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolution::{derive_seed, run_evolution, EvolutionConfig, EvolutionError, RunStore, STREAM_REPETITION};
use crate::learner::PPOConfig;
use crate::metrics::learning::DEFAULT_WINDOW;
use crate::morphology::MutationConfig;
use crate::sim::PhysicalConstants;
use crate::tasks::{make_track, TrackKind, TrackSpec};

pub use baseline::{compare_baseline, select_best, BaselineReport, MorphologyReport};
pub use tables::{analyze, write_tables};
pub use verify::{verify, VerifyReport};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Learner(#[from] crate::learner::LearnerError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn io_err(path: &Path, source: std::io::Error) -> ExperimentError {
    ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionSection {
    pub mu: usize,
    pub lambda: usize,
    pub generations: usize,
    pub init_attempt_cap: usize,
    pub smoothing_window: usize,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        Self {
            mu: 12,
            lambda: 12,
            generations: 40,
            init_attempt_cap: 10_000,
            smoothing_window: DEFAULT_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    /// Independent training runs per morphology.
    pub runs: usize,
    /// Training budget; the evolution budget when absent.
    pub budget: Option<u64>,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self { runs: 10, budget: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub repetitions: usize,
    pub output_dir: PathBuf,
    pub evolution: EvolutionSection,
    pub mutation: MutationConfig,
    pub track: TrackSpec,
    pub ppo: PPOConfig,
    pub physics: PhysicalConstants,
    pub baseline: BaselineSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            repetitions: 5,
            output_dir: PathBuf::from("runs"),
            evolution: EvolutionSection::default(),
            mutation: MutationConfig::default(),
            track: TrackSpec::default_for(TrackKind::Circle),
            ppo: PPOConfig::default(),
            physics: PhysicalConstants::default(),
            baseline: BaselineSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ExperimentError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let field = |f: &str, m: String| ExperimentError::Field {
            field: f.to_string(),
            message: m,
        };
        if self.repetitions == 0 {
            return Err(field("repetitions", "must be at least 1".into()));
        }
        let e = &self.evolution;
        if e.mu == 0 {
            return Err(field("evolution.mu", "must be positive".into()));
        }
        if e.lambda == 0 {
            return Err(field("evolution.lambda", "must be positive".into()));
        }
        if e.init_attempt_cap == 0 {
            return Err(field("evolution.init_attempt_cap", "must be positive".into()));
        }
        if e.smoothing_window == 0 {
            return Err(field("evolution.smoothing_window", "must be positive".into()));
        }
        self.mutation.validate().map_err(|m| field("mutation", m))?;
        make_track(&self.track).map_err(|m| field("track", m.to_string()))?;
        self.ppo.validate().map_err(|m| field("ppo", m.to_string()))?;
        self.physics.validate().map_err(|m| field("physics", m))?;
        if self.baseline.runs == 0 {
            return Err(field("baseline.runs", "must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.ppo.total_timesteps = budget;
        self
    }

    pub fn repetition_seed(&self, repetition: usize) -> u64 {
        derive_seed(self.seed, STREAM_REPETITION, repetition as u64)
    }

    pub fn evolution_config(&self, repetition: usize) -> EvolutionConfig {
        EvolutionConfig {
            mu: self.evolution.mu,
            lambda: self.evolution.lambda,
            generations: self.evolution.generations,
            init_attempt_cap: self.evolution.init_attempt_cap,
            smoothing_window: self.evolution.smoothing_window,
            mutation: self.mutation.clone(),
            track: self.track.clone(),
            ppo: self.ppo.clone(),
            seed: self.repetition_seed(repetition),
        }
    }

    pub fn repetition_dir(&self, repetition: usize) -> PathBuf {
        self.output_dir.join(format!("rep_{repetition:02}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionSummary {
    pub repetition: usize,
    pub seed: u64,
    pub directory: PathBuf,
    pub generations: usize,
    pub individuals: usize,
    pub max_fitness: Vec<u32>,
}

/// Runs (or resumes) every repetition and writes its metric tables.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<RepetitionSummary>, ExperimentError> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| io_err(&cfg.output_dir, e))?;
    let cfg_path = cfg.output_dir.join("experiment.toml");
    if cfg_path.exists() {
        let previous = ExperimentConfig::load(&cfg_path)?;
        if previous != *cfg {
            return Err(ExperimentError::Field {
                field: "output_dir".into(),
                message: format!("{} holds an experiment with a different configuration", cfg.output_dir.display()),
            });
        }
    } else {
        fs::write(&cfg_path, cfg.to_toml()).map_err(|e| io_err(&cfg_path, e))?;
    }

    let mut out = Vec::new();
    for rep in 0..cfg.repetitions {
        let dir = cfg.repetition_dir(rep);
        let evo = cfg.evolution_config(rep);
        let store = RunStore::new(&dir);
        let done = store.completed_generations();
        if done > evo.generations {
            info!("repetition {rep}: complete, nothing to do");
        } else {
            info!("repetition {rep}: seed {}, starting at generation {done}", evo.seed);
        }
        let log = run_evolution(&evo, &cfg.physics, Some(&store))?;
        write_tables(&log, &dir)?;
        out.push(RepetitionSummary {
            repetition: rep,
            seed: evo.seed,
            directory: dir,
            generations: log.generations.len(),
            individuals: log.individuals.len(),
            max_fitness: log.max_fitness_per_generation(),
        });
    }
    Ok(out)
}
