//! Regular hexacopter against the best evolved body, same training budget.

use std::cmp::Ordering;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::evolution::{derive_seed, train_and_evaluate, EvolutionLog, Individual, STREAM_BASELINE};
use crate::metrics::distance::{distance_matrix, edit_distance};
use crate::metrics::{mean_std, smooth_median};
use crate::morphology::Genotype;

/// Outcome of `runs` independent trainings of one body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphologyReport {
    pub label: String,
    pub genotype: Genotype,
    pub waypoints: Vec<u32>,
    pub waypoints_mean: f64,
    pub waypoints_std: f64,
    /// Highest median-smoothed episode reward per run; absent for runs
    /// that finished no episode.
    pub max_reward: Vec<Option<f64>>,
    pub max_reward_mean: Option<f64>,
    pub lap_time: Vec<Option<f64>>,
    /// Mean over the runs that completed a lap.
    pub lap_time_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub task: String,
    pub budget: u64,
    pub seeds: Vec<u64>,
    pub best_id: u64,
    pub best_fitness: u32,
    pub best_novelty: f64,
    pub baseline: MorphologyReport,
    pub evolved: MorphologyReport,
}

/// Index of the best of `candidates`: highest fitness, then highest novelty
/// against `reference`, then lowest id.
pub fn best_by_fitness_then_novelty(candidates: &[Individual], reference: &[Genotype]) -> Option<(usize, f64)> {
    let d_max = distance_matrix(reference).iter().flatten().fold(0.0f64, |m, &x| m.max(x));
    let novelty = |g: &Genotype| {
        if d_max > 0.0 {
            reference.iter().map(|e| edit_distance(g, e) / d_max).sum::<f64>() / reference.len() as f64
        } else {
            0.0
        }
    };
    let scored: Vec<(usize, u32, f64)> = candidates
        .iter()
        .enumerate()
        .map(|(i, ind)| (i, ind.fitness().unwrap_or(0), novelty(&ind.genotype)))
        .collect();
    scored
        .into_iter()
        .max_by(|a, b| {
            a.1.cmp(&b.1)
                .then(a.2.partial_cmp(&b.2).unwrap_or(Ordering::Equal))
                .then(candidates[b.0].id.cmp(&candidates[a.0].id))
        })
        .map(|(i, _, n)| (i, n))
}

/// Best individual ever trained in the run, with its novelty against all
/// of them.
pub fn select_best(log: &EvolutionLog) -> Option<(&Individual, f64)> {
    let all: Vec<Individual> = log.individuals.values().cloned().collect();
    let genotypes: Vec<Genotype> = all.iter().map(|i| i.genotype.clone()).collect();
    let (i, n) = best_by_fitness_then_novelty(&all, &genotypes)?;
    Some((&log.individuals[&all[i].id], n))
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn evaluate_body(
    label: &str,
    genotype: &Genotype,
    seeds: &[u64],
    log: &EvolutionLog,
    budget: u64,
) -> Result<MorphologyReport, ExperimentError> {
    let mut cfg = log.config.clone();
    cfg.ppo.total_timesteps = budget;
    let runs: Vec<_> = seeds
        .par_iter()
        .map(|&s| train_and_evaluate(genotype, s, &cfg, &log.phys))
        .collect::<Result<_, _>>()?;
    let waypoints: Vec<u32> = runs.iter().map(|t| t.evaluation.report.waypoints).collect();
    let max_reward: Vec<Option<f64>> = runs
        .iter()
        .map(|t| {
            smooth_median(&t.trace.rewards(), cfg.smoothing_window)
                .ok()
                .map(|s| s.into_iter().fold(f64::NEG_INFINITY, f64::max))
        })
        .collect();
    let lap_time: Vec<Option<f64>> = runs.iter().map(|t| t.evaluation.report.avg_lap_time).collect();
    let (waypoints_mean, waypoints_std) = mean_std(&waypoints.iter().map(|&w| w as f64).collect::<Vec<_>>());
    info!("{label}: waypoints {waypoints:?}");
    Ok(MorphologyReport {
        label: label.to_string(),
        genotype: genotype.clone(),
        waypoints_mean,
        waypoints_std,
        max_reward_mean: mean_of(max_reward.iter().flatten().copied()),
        lap_time_mean: mean_of(lap_time.iter().flatten().copied()),
        waypoints,
        max_reward,
        lap_time,
    })
}

/// Trains both bodies `runs` times with seeds shared between them.
pub fn compare_baseline(log: &EvolutionLog, budget: u64, runs: usize) -> Result<BaselineReport, ExperimentError> {
    let (best, best_novelty) = select_best(log).ok_or_else(|| ExperimentError::Field {
        field: "output_dir".into(),
        message: "run holds no trained individual".into(),
    })?;
    let seeds: Vec<u64> = (0..runs as u64)
        .map(|k| derive_seed(log.config.seed, STREAM_BASELINE, k))
        .collect();
    let baseline = evaluate_body("regular", &Genotype::regular_hexacopter(), &seeds, log, budget)?;
    let evolved = evaluate_body("evolved", &best.genotype, &seeds, log, budget)?;
    Ok(BaselineReport {
        task: format!("{:?}", log.config.track.kind()).to_lowercase(),
        budget,
        seeds,
        best_id: best.id,
        best_fitness: best.fitness().unwrap_or(0),
        best_novelty,
        baseline,
        evolved,
    })
}
