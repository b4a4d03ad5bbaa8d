//! (μ+λ) evolution of bodies, each trained from scratch before evaluation.

pub mod store;

use std::cmp::Ordering;
use std::collections::BTreeMap;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hover::{check_static_hover_with, ControlBounds, HoverError, HoverSearch, DEFAULT_TOLERANCE};
use crate::learner::{train, LearnerError, PPOConfig, PolicyCheckpoint, RewardTrace};
use crate::metrics::{self, mean_std, DescriptorError, LearningDescriptors};
use crate::morphology::{decode, mutate, random_genotype, Genotype, MorphologyError, MutationConfig, Phenotype};
use crate::sim::PhysicalConstants;
use crate::tasks::{evaluate_fitness, make_track, FitnessReport, TaskError, TrackSpec};

pub use store::RunStore;

/// Seed streams for [`derive_seed`].
pub const STREAM_REPETITION: u64 = 1;
pub const STREAM_GENERATION: u64 = 2;
pub const STREAM_TRAINING: u64 = 3;
pub const STREAM_BASELINE: u64 = 4;

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based split: `splitmix(splitmix(master ^ splitmix(stream)) + index)`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(stream)).wrapping_add(index))
}

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("invalid evolution configuration: {0}")]
    Config(String),
    #[error("no hover-feasible genotype among the first {attempts} attempts ({accepted} accepted)")]
    InitExhausted { attempts: usize, accepted: usize },
    #[error("cannot resume generation {generation}: {reason}")]
    Resume { generation: usize, reason: String },
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Hover(#[from] HoverError),
    #[error(transparent)]
    Morphology(#[from] MorphologyError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    pub mu: usize,
    pub lambda: usize,
    pub generations: usize,
    pub init_attempt_cap: usize,
    /// Median window for the learning descriptors, in episodes.
    pub smoothing_window: usize,
    pub mutation: MutationConfig,
    pub track: TrackSpec,
    pub ppo: PPOConfig,
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            mu: 12,
            lambda: 12,
            generations: 40,
            init_attempt_cap: 10_000,
            smoothing_window: metrics::learning::DEFAULT_WINDOW,
            mutation: MutationConfig::default(),
            track: TrackSpec::default_for(crate::tasks::TrackKind::Circle),
            ppo: PPOConfig::default(),
            seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        let bad = |m: String| Err(EvolutionError::Config(m));
        if self.mu == 0 || self.lambda == 0 {
            return bad("mu and lambda must be positive".into());
        }
        if self.init_attempt_cap == 0 {
            return bad("init_attempt_cap must be positive".into());
        }
        if self.smoothing_window == 0 {
            return bad("smoothing_window must be positive".into());
        }
        self.mutation.validate().map_err(EvolutionError::Config)?;
        self.ppo.validate()?;
        make_track(&self.track)?;
        Ok(())
    }

    /// Total individuals trained over a full run.
    pub fn total_individuals(&self) -> usize {
        self.mu + self.generations * self.lambda
    }
}

/// Result of training then evaluating one body. Set once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub report: FitnessReport,
    pub descriptors: Option<LearningDescriptors>,
    pub episodes: usize,
    pub timesteps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub id: u64,
    pub genotype: Genotype,
    pub parent: Option<u64>,
    pub born: usize,
    pub train_seed: u64,
    evaluation: Option<Evaluation>,
}

impl Individual {
    pub fn new(id: u64, genotype: Genotype, parent: Option<u64>, born: usize, master_seed: u64) -> Self {
        Self {
            id,
            genotype,
            parent,
            born,
            train_seed: derive_seed(master_seed, STREAM_TRAINING, id),
            evaluation: None,
        }
    }

    pub fn phenotype(&self, phys: &PhysicalConstants) -> Phenotype {
        decode(&self.genotype, phys)
    }

    pub fn evaluation(&self) -> Option<&Evaluation> {
        self.evaluation.as_ref()
    }

    /// Waypoints passed in the evaluation rollout.
    pub fn fitness(&self) -> Option<u32> {
        self.evaluation.as_ref().map(|e| e.report.waypoints)
    }

    pub fn episode_return(&self) -> Option<f64> {
        self.evaluation.as_ref().map(|e| e.report.episode_return)
    }

    /// Records the evaluation; an already evaluated individual is left as is
    /// and `false` returned.
    pub fn set_evaluation(&mut self, e: Evaluation) -> bool {
        if self.evaluation.is_some() {
            return false;
        }
        self.evaluation = Some(e);
        true
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct InitStats {
    pub attempts: usize,
    pub rejected: usize,
}

/// Draws genotypes from `sample` until `cfg.mu` pass the hover test.
pub fn init_population_from<F>(
    cfg: &EvolutionConfig,
    phys: &PhysicalConstants,
    mut sample: F,
) -> Result<(Vec<Individual>, InitStats), EvolutionError>
where
    F: FnMut() -> Genotype,
{
    let bounds = ControlBounds::default();
    let search = HoverSearch::default();
    let mut pop = Vec::with_capacity(cfg.mu);
    let mut stats = InitStats::default();
    while pop.len() < cfg.mu {
        if stats.attempts == cfg.init_attempt_cap {
            return Err(EvolutionError::InitExhausted {
                attempts: stats.attempts,
                accepted: pop.len(),
            });
        }
        stats.attempts += 1;
        let g = sample();
        let r = check_static_hover_with(&decode(&g, phys), &bounds, DEFAULT_TOLERANCE, phys.g, &search)?;
        if r.feasible {
            let id = pop.len() as u64;
            pop.push(Individual::new(id, g, None, 0, cfg.seed));
        } else {
            stats.rejected += 1;
        }
    }
    info!("initial population: {} accepted, {} rejected", pop.len(), stats.rejected);
    Ok((pop, stats))
}

pub fn init_population<R: Rng + ?Sized>(
    cfg: &EvolutionConfig,
    phys: &PhysicalConstants,
    rng: &mut R,
) -> Result<(Vec<Individual>, InitStats), EvolutionError> {
    init_population_from(cfg, phys, || random_genotype(rng, phys))
}

/// `cfg.lambda` mutants of parents drawn uniformly with replacement. A
/// mutation whose repair fails, or that leaves the genotype unchanged, is
/// redrawn for the same parent.
pub fn reproduce<R: Rng + ?Sized>(
    parents: &[Individual],
    cfg: &EvolutionConfig,
    phys: &PhysicalConstants,
    generation: usize,
    first_id: u64,
    rng: &mut R,
) -> Vec<Individual> {
    (0..cfg.lambda)
        .map(|k| {
            let parent = &parents[rng.random_range(0..parents.len())];
            let child = loop {
                match mutate(&parent.genotype, &cfg.mutation, phys, rng) {
                    Ok(g) if g != parent.genotype => break g,
                    Ok(_) => {}
                    Err(e) => warn!("resampling mutation of {}: {e}", parent.id),
                }
            };
            Individual::new(first_id + k as u64, child, Some(parent.id), generation, cfg.seed)
        })
        .collect()
}

/// Survivor order: fitness, then episode return (both descending), then
/// older birth generation, then lower id.
pub fn survivor_order(a: &Individual, b: &Individual) -> Ordering {
    let fa = a.fitness().unwrap_or(0);
    let fb = b.fitness().unwrap_or(0);
    fb.cmp(&fa)
        .then_with(|| {
            let ra = a.episode_return().unwrap_or(f64::NEG_INFINITY);
            let rb = b.episode_return().unwrap_or(f64::NEG_INFINITY);
            rb.total_cmp(&ra)
        })
        .then_with(|| a.born.cmp(&b.born))
        .then_with(|| a.id.cmp(&b.id))
}

/// Best `mu` of `parents ∪ offspring`.
pub fn select_mu_plus_lambda(parents: &[Individual], offspring: &[Individual], mu: usize) -> Vec<Individual> {
    let mut all: Vec<Individual> = parents.iter().chain(offspring).cloned().collect();
    all.sort_by(survivor_order);
    all.truncate(mu);
    all
}

/// Everything produced by training one individual.
#[derive(Debug, Clone)]
pub struct Trained {
    pub evaluation: Evaluation,
    pub trace: RewardTrace,
    pub checkpoint: PolicyCheckpoint,
}

/// Trains a policy for the body and evaluates it deterministically.
pub fn train_and_evaluate(
    genotype: &Genotype,
    seed: u64,
    cfg: &EvolutionConfig,
    phys: &PhysicalConstants,
) -> Result<Trained, EvolutionError> {
    let track = make_track(&cfg.track)?;
    let ph = decode(genotype, phys);
    let out = train(&ph, &track, phys, &cfg.ppo, seed)?;
    let report = evaluate_fitness(&ph, out.policy.controller(), &track, phys);
    let descriptors = match metrics::descriptors(&out.trace, cfg.smoothing_window) {
        Ok(d) => Some(d),
        Err(DescriptorError::EmptyTrace) | Err(DescriptorError::TooShort(_)) => None,
        Err(e) => return Err(EvolutionError::Config(e.to_string())),
    };
    Ok(Trained {
        evaluation: Evaluation {
            report,
            descriptors,
            episodes: out.trace.len(),
            timesteps: out.timesteps,
        },
        checkpoint: PolicyCheckpoint::new(&out.policy, &cfg.ppo, seed, out.rng_word_pos),
        trace: out.trace,
    })
}

/// Population summary after selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub mean_fitness: f64,
    pub max_fitness: u32,
    pub diversity: f64,
    pub ces_mean: f64,
    pub ces_std: f64,
    pub bis_mean: f64,
    pub bis_std: f64,
    pub t_b_mean: f64,
    pub t_b_std: f64,
    pub t_c_mean: f64,
    pub t_c_std: f64,
    pub speed_mean: f64,
    pub speed_std: f64,
    pub r_max_mean: f64,
    pub r_max_std: f64,
    pub volatility_mean: f64,
    pub volatility_std: f64,
}

impl GenerationStats {
    pub fn compute(generation: usize, population: &[Individual]) -> Self {
        let fitness: Vec<f64> = population.iter().map(|i| i.fitness().unwrap_or(0) as f64).collect();
        let genotypes: Vec<Genotype> = population.iter().map(|i| i.genotype.clone()).collect();
        let sym: Vec<_> = population
            .iter()
            .map(|i| metrics::symmetry_scores(&i.genotype.motor_positions()))
            .collect();
        let (ces_mean, ces_std) = mean_std(&sym.iter().map(|s| s.ces).collect::<Vec<_>>());
        let (bis_mean, bis_std) = mean_std(&sym.iter().map(|s| s.bis).collect::<Vec<_>>());
        let desc: Vec<&LearningDescriptors> = population
            .iter()
            .filter_map(|i| i.evaluation().and_then(|e| e.descriptors.as_ref()))
            .collect();
        let stat = |f: &dyn Fn(&LearningDescriptors) -> Option<f64>| {
            mean_std(&desc.iter().filter_map(|d| f(d)).collect::<Vec<_>>())
        };
        let (t_b_mean, t_b_std) = stat(&|d| Some(d.t_b as f64));
        let (t_c_mean, t_c_std) = stat(&|d| Some(d.t_c as f64));
        let (speed_mean, speed_std) = stat(&|d| d.speed);
        let (r_max_mean, r_max_std) = stat(&|d| Some(d.r_max));
        let (volatility_mean, volatility_std) = stat(&|d| Some(d.volatility));
        Self {
            generation,
            mean_fitness: mean_std(&fitness).0,
            max_fitness: population.iter().filter_map(Individual::fitness).max().unwrap_or(0),
            diversity: if genotypes.len() >= 2 {
                metrics::diversity(&genotypes)
            } else {
                0.0
            },
            ces_mean,
            ces_std,
            bis_mean,
            bis_std,
            t_b_mean,
            t_b_std,
            t_c_mean,
            t_c_std,
            speed_mean,
            speed_std,
            r_max_mean,
            r_max_std,
            volatility_mean,
            volatility_std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Ids of the individuals trained in this generation.
    pub born: Vec<u64>,
    /// Ids of the surviving population, best first.
    pub population: Vec<u64>,
    pub stats: GenerationStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionLog {
    pub config: EvolutionConfig,
    pub phys: PhysicalConstants,
    pub init: InitStats,
    /// Every trained individual, by id.
    pub individuals: BTreeMap<u64, Individual>,
    pub traces: BTreeMap<u64, RewardTrace>,
    pub generations: Vec<GenerationRecord>,
}

impl EvolutionLog {
    pub fn population(&self, generation: usize) -> Vec<&Individual> {
        self.generations[generation]
            .population
            .iter()
            .map(|id| &self.individuals[id])
            .collect()
    }

    pub fn max_fitness_per_generation(&self) -> Vec<u32> {
        self.generations.iter().map(|g| g.stats.max_fitness).collect()
    }
}

fn train_batch(
    batch: &mut [Individual],
    cfg: &EvolutionConfig,
    phys: &PhysicalConstants,
    store: Option<&RunStore>,
    traces: &mut BTreeMap<u64, RewardTrace>,
) -> Result<(), EvolutionError> {
    let results: Vec<Result<Trained, EvolutionError>> = batch
        .par_iter()
        .map(|ind| train_and_evaluate(&ind.genotype, ind.train_seed, cfg, phys))
        .collect();
    for (ind, r) in batch.iter_mut().zip(results) {
        let t = r?;
        ind.set_evaluation(t.evaluation);
        if let Some(s) = store {
            s.write_individual(ind, &t.trace, &t.checkpoint)?;
        }
        traces.insert(ind.id, t.trace);
    }
    Ok(())
}

/// Full run: start population, then `generations` rounds of
/// reproduce → train → evaluate → select. With a store, every generation is
/// persisted as it completes and a rerun continues after the last one found.
pub fn run_evolution(
    cfg: &EvolutionConfig,
    phys: &PhysicalConstants,
    store: Option<&RunStore>,
) -> Result<EvolutionLog, EvolutionError> {
    cfg.validate()?;
    phys.validate().map_err(EvolutionError::Config)?;

    let mut log = match store {
        Some(s) => s.resume(cfg, phys)?,
        None => None,
    }
    .unwrap_or_else(|| EvolutionLog {
        config: cfg.clone(),
        phys: phys.clone(),
        init: InitStats::default(),
        individuals: BTreeMap::new(),
        traces: BTreeMap::new(),
        generations: Vec::new(),
    });

    if log.generations.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_GENERATION, 0));
        let (mut pop, init) = init_population(cfg, phys, &mut rng)?;
        log.init = init;
        if let Some(s) = store {
            s.write_init(&init)?;
        }
        train_batch(&mut pop, cfg, phys, store, &mut log.traces)?;
        let born = pop.iter().map(|i| i.id).collect();
        pop.sort_by(survivor_order);
        finish_generation(&mut log, 0, born, pop, store)?;
    }

    while log.generations.len() <= cfg.generations {
        let g = log.generations.len();
        let parents: Vec<Individual> = log.population(g - 1).into_iter().cloned().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_GENERATION, g as u64));
        let first_id = (cfg.mu + (g - 1) * cfg.lambda) as u64;
        let mut offspring = reproduce(&parents, cfg, phys, g, first_id, &mut rng);
        train_batch(&mut offspring, cfg, phys, store, &mut log.traces)?;
        let born = offspring.iter().map(|i| i.id).collect();
        let next = select_mu_plus_lambda(&parents, &offspring, cfg.mu);
        for o in offspring {
            log.individuals.insert(o.id, o);
        }
        finish_generation(&mut log, g, born, next, store)?;
    }
    Ok(log)
}

fn finish_generation(
    log: &mut EvolutionLog,
    generation: usize,
    born: Vec<u64>,
    population: Vec<Individual>,
    store: Option<&RunStore>,
) -> Result<(), EvolutionError> {
    let stats = GenerationStats::compute(generation, &population);
    info!(
        "generation {generation}: max fitness {}, mean {:.2}, diversity {:.3}",
        stats.max_fitness, stats.mean_fitness, stats.diversity
    );
    let record = GenerationRecord {
        generation,
        born,
        population: population.iter().map(|i| i.id).collect(),
        stats,
    };
    for ind in population {
        log.individuals.entry(ind.id).or_insert(ind);
    }
    if let Some(s) = store {
        s.write_generation(&record)?;
    }
    log.generations.push(record);
    Ok(())
}
