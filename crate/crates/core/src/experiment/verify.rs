//! Re-derives generation 0 of a stored run and compares content hashes.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{io_err, ExperimentError};
use crate::evolution::{derive_seed, init_population, train_and_evaluate, RunStore, STREAM_GENERATION};
use crate::evolution::EvolutionError;

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn file_hash(path: &Path) -> Result<String, ExperimentError> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| io_err(path, e))?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactCheck {
    pub id: u64,
    pub artifact: String,
    pub stored: String,
    pub derived: String,
}

impl ArtifactCheck {
    pub fn matches(&self) -> bool {
        self.stored == self.derived
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    /// Hash over the generation-0 genotype records in id order.
    pub stored_genotypes: String,
    pub derived_genotypes: String,
    /// Trace, policy and individual files of retrained members.
    pub artifacts: Vec<ArtifactCheck>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.stored_genotypes == self.derived_genotypes && self.artifacts.iter().all(ArtifactCheck::matches)
    }
}

/// With `retrain`, every generation-0 body is trained again and its stored
/// files are compared byte for byte through their hashes.
pub fn verify(dir: &Path, retrain: bool) -> Result<VerifyReport, ExperimentError> {
    let store = RunStore::new(dir);
    let manifest = store.read_manifest()?.ok_or_else(|| ExperimentError::Field {
        field: "output_dir".into(),
        message: format!("{} has no manifest", dir.display()),
    })?;
    let (cfg, phys) = (manifest.config, manifest.phys);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_GENERATION, 0));
    let (pop, _) = init_population(&cfg, &phys, &mut rng)?;

    let mut stored = Sha256::new();
    let mut derived = Sha256::new();
    for ind in &pop {
        let s = store.read_individual(ind.id).map_err(|reason| EvolutionError::Resume { generation: 0, reason })?;
        stored.update(s.genotype.to_record().as_bytes());
        derived.update(ind.genotype.to_record().as_bytes());
    }

    let mut artifacts = Vec::new();
    if retrain {
        for ind in &pop {
            let t = train_and_evaluate(&ind.genotype, ind.train_seed, &cfg, &phys)?;
            let mut csv = Vec::new();
            t.trace.write_csv(&mut csv)?;
            let mut full = ind.clone();
            full.set_evaluation(t.evaluation);
            let ind_json = serde_json::to_vec_pretty(&full).expect("record serializes");
            for (artifact, path, bytes) in [
                ("trace", store.trace_path(ind.id), csv),
                ("policy", store.policy_path(ind.id), t.checkpoint.to_json().into_bytes()),
                ("individual", store.individual_path(ind.id), ind_json),
            ] {
                artifacts.push(ArtifactCheck {
                    id: ind.id,
                    artifact: artifact.into(),
                    stored: file_hash(&path)?,
                    derived: sha256_hex(&bytes),
                });
            }
        }
    }
    Ok(VerifyReport {
        stored_genotypes: hex(&stored.finalize()),
        derived_genotypes: hex(&derived.finalize()),
        artifacts,
    })
}
