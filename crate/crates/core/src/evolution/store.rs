//! On-disk layout of one evolution run:
//!
//! ```text
//! manifest.json              config, physical constants
//! init.json                  start-population sampling counts
//! individuals/000012.json    genotype, lineage, evaluation
//! traces/000012.csv          episode,reward,timestep
//! policies/000012.json       policy checkpoint
//! generations/0003.json      born ids, surviving ids, population stats
//! ```
//!
//! Files are written to a temporary name and renamed into place.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EvolutionConfig, EvolutionError, EvolutionLog, GenerationRecord, Individual, InitStats};
use crate::learner::{PolicyCheckpoint, RewardTrace};
use crate::sim::PhysicalConstants;

pub const RUN_FORMAT: &str = "hexevo.run";
pub const RUN_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub config: EvolutionConfig,
    pub phys: PhysicalConstants,
}

#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
}

fn io_err(path: &Path, source: std::io::Error) -> EvolutionError {
    EvolutionError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), EvolutionError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec_pretty(v).expect("record serializes")
}

impl RunStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn individual_path(&self, id: u64) -> PathBuf {
        self.root.join("individuals").join(format!("{id:06}.json"))
    }

    pub fn trace_path(&self, id: u64) -> PathBuf {
        self.root.join("traces").join(format!("{id:06}.csv"))
    }

    pub fn policy_path(&self, id: u64) -> PathBuf {
        self.root.join("policies").join(format!("{id:06}.json"))
    }

    pub fn generation_path(&self, g: usize) -> PathBuf {
        self.root.join("generations").join(format!("{g:04}.json"))
    }

    pub fn write_manifest(&self, cfg: &EvolutionConfig, phys: &PhysicalConstants) -> Result<(), EvolutionError> {
        let m = Manifest {
            format: RUN_FORMAT.into(),
            version: RUN_VERSION,
            config: cfg.clone(),
            phys: phys.clone(),
        };
        write_atomic(&self.manifest_path(), &to_json(&m))
    }

    pub fn read_manifest(&self) -> Result<Option<Manifest>, EvolutionError> {
        let path = self.manifest_path();
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| EvolutionError::Resume {
            generation: 0,
            reason: format!("manifest unreadable: {e}"),
        })?;
        if m.format != RUN_FORMAT || m.version != RUN_VERSION {
            return Err(EvolutionError::Resume {
                generation: 0,
                reason: format!("unsupported run format {} v{}", m.format, m.version),
            });
        }
        Ok(Some(m))
    }

    pub fn write_init(&self, stats: &InitStats) -> Result<(), EvolutionError> {
        write_atomic(&self.root.join("init.json"), &to_json(stats))
    }

    pub fn write_individual(
        &self,
        ind: &Individual,
        trace: &RewardTrace,
        checkpoint: &PolicyCheckpoint,
    ) -> Result<(), EvolutionError> {
        let mut csv = Vec::new();
        trace.write_csv(&mut csv)?;
        write_atomic(&self.trace_path(ind.id), &csv)?;
        write_atomic(&self.policy_path(ind.id), checkpoint.to_json().as_bytes())?;
        write_atomic(&self.individual_path(ind.id), &to_json(ind))
    }

    pub fn write_generation(&self, record: &GenerationRecord) -> Result<(), EvolutionError> {
        write_atomic(&self.generation_path(record.generation), &to_json(record))
    }

    pub fn read_individual(&self, id: u64) -> Result<Individual, String> {
        let path = self.individual_path(id);
        let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let ind: Individual = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        if ind.id != id {
            return Err(format!("{}: holds individual {}", path.display(), ind.id));
        }
        Ok(ind)
    }

    pub fn read_trace(&self, id: u64) -> Result<RewardTrace, String> {
        let path = self.trace_path(id);
        let file = fs::File::open(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        RewardTrace::read_csv(file).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn read_policy(&self, id: u64) -> Result<PolicyCheckpoint, String> {
        let path = self.policy_path(id);
        let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        PolicyCheckpoint::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Number of consecutive generation records present from 0.
    pub fn completed_generations(&self) -> usize {
        (0..).take_while(|g| self.generation_path(*g).exists()).count()
    }

    /// Loads every completed generation. A fresh directory gets a manifest
    /// and yields `None`.
    pub fn resume(
        &self,
        cfg: &EvolutionConfig,
        phys: &PhysicalConstants,
    ) -> Result<Option<EvolutionLog>, EvolutionError> {
        match self.read_manifest()? {
            None => {
                self.write_manifest(cfg, phys)?;
                return Ok(None);
            }
            Some(m) => {
                if m.config != *cfg || m.phys != *phys {
                    return Err(EvolutionError::Config(format!(
                        "{} belongs to a run with a different configuration",
                        self.root.display()
                    )));
                }
            }
        }
        let log = self.load(cfg.clone(), phys.clone())?;
        Ok((!log.generations.is_empty()).then_some(log))
    }

    /// Reads the run back, checking every completed generation.
    pub fn load(&self, config: EvolutionConfig, phys: PhysicalConstants) -> Result<EvolutionLog, EvolutionError> {
        let init = fs::read_to_string(self.root.join("init.json"))
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .unwrap_or_default();
        let mut log = EvolutionLog {
            config,
            phys,
            init,
            individuals: BTreeMap::new(),
            traces: BTreeMap::new(),
            generations: Vec::new(),
        };
        for g in 0..self.completed_generations() {
            let fail = |reason: String| EvolutionError::Resume { generation: g, reason };
            let path = self.generation_path(g);
            let text = fs::read_to_string(&path).map_err(|e| fail(e.to_string()))?;
            let record: GenerationRecord =
                serde_json::from_str(&text).map_err(|e| fail(format!("{}: {e}", path.display())))?;
            if record.generation != g {
                return Err(fail(format!("record claims generation {}", record.generation)));
            }
            for id in record.born.iter().chain(&record.population) {
                if log.individuals.contains_key(id) {
                    continue;
                }
                let ind = self.read_individual(*id).map_err(fail)?;
                if ind.evaluation().is_none() {
                    return Err(fail(format!("individual {id} was never evaluated")));
                }
                let trace = self.read_trace(*id).map_err(fail)?;
                log.traces.insert(*id, trace);
                log.individuals.insert(*id, ind);
            }
            log.generations.push(record);
        }
        Ok(log)
    }

    /// Reads a run using the configuration stored in its manifest.
    pub fn open(root: impl Into<PathBuf>) -> Result<EvolutionLog, EvolutionError> {
        let store = Self::new(root);
        let m = store.read_manifest()?.ok_or_else(|| {
            EvolutionError::Config(format!("{} has no manifest", store.root.display()))
        })?;
        store.load(m.config, m.phys)
    }
}
