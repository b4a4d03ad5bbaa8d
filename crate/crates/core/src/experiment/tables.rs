//! CSV tables for plotting. Floats are written in shortest round-trip form.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{io_err, ExperimentError};
use crate::evolution::{EvolutionLog, RunStore};
use crate::metrics::{mean_std, novelties, symmetry_scores};
use crate::morphology::{Genotype, Param, MOTORS};

pub const METRICS_FILE: &str = "metrics.csv";
pub const INDIVIDUALS_FILE: &str = "individuals.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn genotype_header() -> Vec<String> {
    let mut h = Vec::new();
    for k in 0..MOTORS {
        for p in Param::ALL {
            h.push(format!("arm{k}_{}", serde_json::to_value(p).unwrap().as_str().unwrap()));
        }
    }
    h
}

fn genotype_cells(g: &Genotype) -> Vec<String> {
    g.arms
        .iter()
        .flat_map(|a| a.as_array())
        .map(|x| x.to_string())
        .collect()
}

fn csv_file(path: &Path) -> Result<csv::Writer<fs::File>, ExperimentError> {
    let f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

/// Writes `metrics.csv` (one row per generation) and `individuals.csv`
/// (one row per trained body) into `dir`.
pub fn write_tables(log: &EvolutionLog, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let metrics_path = dir.join(METRICS_FILE);
    let mut w = csv_file(&metrics_path)?;
    for g in &log.generations {
        w.serialize(&g.stats)?;
    }
    w.flush().map_err(|e| io_err(&metrics_path, e))?;

    let ind_path = dir.join(INDIVIDUALS_FILE);
    let all: Vec<Genotype> = log.individuals.values().map(|i| i.genotype.clone()).collect();
    let nov = novelties(&all);
    let mut w = csv_file(&ind_path)?;
    let mut header: Vec<String> = [
        "id",
        "born",
        "parent",
        "fitness",
        "episode_return",
        "avg_lap_time",
        "episodes",
        "timesteps",
        "novelty",
        "ces",
        "bis",
        "t_b",
        "t_c",
        "speed",
        "r_max",
        "volatility",
    ]
    .map(String::from)
    .to_vec();
    header.extend(genotype_header());
    w.write_record(&header)?;
    for (ind, nov) in log.individuals.values().zip(nov) {
        let e = ind.evaluation();
        let d = e.and_then(|e| e.descriptors.as_ref());
        let sym = symmetry_scores(&ind.genotype.motor_positions());
        let mut cells = vec![
            ind.id.to_string(),
            ind.born.to_string(),
            cell(ind.parent),
            cell(ind.fitness()),
            cell(ind.episode_return()),
            cell(e.and_then(|e| e.report.avg_lap_time)),
            cell(e.map(|e| e.episodes)),
            cell(e.map(|e| e.timesteps)),
            nov.to_string(),
            sym.ces.to_string(),
            sym.bis.to_string(),
            cell(d.map(|d| d.t_b)),
            cell(d.map(|d| d.t_c)),
            cell(d.and_then(|d| d.speed)),
            cell(d.map(|d| d.r_max)),
            cell(d.map(|d| d.volatility)),
        ];
        cells.extend(genotype_cells(&ind.genotype));
        w.write_record(&cells)?;
    }
    w.flush().map_err(|e| io_err(&ind_path, e))?;
    Ok(vec![metrics_path, ind_path])
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    generation: usize,
    runs: usize,
    max_fitness_mean: f64,
    max_fitness_std: f64,
    mean_fitness_mean: f64,
    diversity_mean: f64,
    diversity_std: f64,
    ces_mean: f64,
    bis_mean: f64,
}

fn repetition_dirs(root: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| io_err(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_dir()
                && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("rep_"))
                && RunStore::new(p).manifest_path().exists()
        })
        .collect();
    dirs.sort();
    Ok(dirs)
}

/// Rewrites the tables of one run directory, or of every repetition below
/// an experiment directory plus a `summary.csv` averaged across them.
pub fn analyze(path: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    if RunStore::new(path).manifest_path().exists() {
        let log = RunStore::open(path)?;
        return write_tables(&log, path);
    }
    let dirs = repetition_dirs(path)?;
    if dirs.is_empty() {
        return Err(ExperimentError::Field {
            field: "output_dir".into(),
            message: format!("{} holds no evolution run", path.display()),
        });
    }
    let mut written = Vec::new();
    let mut logs = Vec::new();
    for d in &dirs {
        let log = RunStore::open(d)?;
        written.extend(write_tables(&log, d)?);
        logs.push(log);
    }
    let generations = logs.iter().map(|l| l.generations.len()).max().unwrap_or(0);
    let summary_path = path.join(SUMMARY_FILE);
    let mut w = csv_file(&summary_path)?;
    for g in 0..generations {
        let stats: Vec<_> = logs.iter().filter_map(|l| l.generations.get(g)).map(|r| &r.stats).collect();
        let col = |f: &dyn Fn(&crate::evolution::GenerationStats) -> f64| {
            mean_std(&stats.iter().map(|s| f(s)).collect::<Vec<_>>())
        };
        let (max_fitness_mean, max_fitness_std) = col(&|s| s.max_fitness as f64);
        let (diversity_mean, diversity_std) = col(&|s| s.diversity);
        w.serialize(SummaryRow {
            generation: g,
            runs: stats.len(),
            max_fitness_mean,
            max_fitness_std,
            mean_fitness_mean: col(&|s| s.mean_fitness).0,
            diversity_mean,
            diversity_std,
            ces_mean: col(&|s| s.ces_mean).0,
            bis_mean: col(&|s| s.bis_mean).0,
        })?;
    }
    w.flush().map_err(|e| io_err(&summary_path, e))?;
    written.push(summary_path);
    Ok(written)
}
