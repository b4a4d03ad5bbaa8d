use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hexevo::evolution::{derive_seed, RunStore, STREAM_GENERATION};
use hexevo::experiment::{self, ExperimentConfig};
use hexevo::hover::{check_static_hover_with, hover_residuals, ControlBounds, HoverSearch, DEFAULT_TOLERANCE};
use hexevo::metrics::symmetry_scores;
use hexevo::morphology::{decode, mutate_traced, overlapping_pairs, Genotype, MutationConfig};
use hexevo::sim::PhysicalConstants;

#[derive(Parser)]
#[command(name = "hexevo", version, about = "Evolve hexacopter bodies with learned controllers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Master seed; overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// PPO timesteps per individual; overrides `ppo.total_timesteps`.
    #[arg(long)]
    budget: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, String> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p).map_err(|e| e.to_string())?,
            None => ExperimentConfig::default(),
        };
        if let Some(o) = &self.output {
            cfg.output_dir = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(b) = self.budget {
            cfg = cfg.with_budget(b);
        }
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run or resume every repetition of an experiment.
    Run(Common),
    /// Rewrite metric tables of a run or experiment directory.
    Analyze {
        /// Run directory or experiment directory.
        dir: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train the regular hexacopter and the best evolved body side by side.
    CompareBaseline {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        repetition: usize,
        /// Training runs per body; overrides `baseline.runs`.
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Static hover test for one genotype.
    HoverCheck {
        /// Genotype record (JSON); the regular hexacopter if omitted.
        #[arg(long, short)]
        genotype: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print a few mutants of a genotype.
    MutatePreview {
        #[arg(long, short)]
        genotype: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Re-derive generation 0 of a repetition and compare hashes.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        repetition: usize,
        /// Also retrain generation 0 and compare its stored files.
        #[arg(long)]
        retrain: bool,
    },
}

fn read_genotype(path: Option<&Path>) -> Result<Genotype, String> {
    match path {
        None => Ok(Genotype::regular_hexacopter()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            Genotype::from_record(&text).map_err(|e| format!("{}: {e}", p.display()))
        }
    }
}

fn physics_and_mutation(config: Option<&Path>) -> Result<(PhysicalConstants, MutationConfig), String> {
    match config {
        None => Ok((PhysicalConstants::default(), MutationConfig::default())),
        Some(p) => {
            let c = ExperimentConfig::load(p).map_err(|e| e.to_string())?;
            Ok((c.physics, c.mutation))
        }
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Run(common) => {
            let cfg = common.load()?;
            let summaries = experiment::run(&cfg).map_err(|e| e.to_string())?;
            for s in summaries {
                println!(
                    "repetition {} seed {} generations {} individuals {} max fitness {:?}",
                    s.repetition, s.seed, s.generations, s.individuals, s.max_fitness
                );
            }
        }
        Command::Analyze { dir, common } => {
            let dir = match dir {
                Some(d) => d,
                None => common.load()?.output_dir,
            };
            for p in experiment::analyze(&dir).map_err(|e| e.to_string())? {
                println!("{}", p.display());
            }
        }
        Command::CompareBaseline {
            common,
            repetition,
            runs,
        } => {
            let cfg = common.load()?;
            let dir = cfg.repetition_dir(repetition);
            let log = RunStore::open(&dir).map_err(|e| e.to_string())?;
            let budget = common
                .budget
                .or(cfg.baseline.budget)
                .unwrap_or(cfg.ppo.total_timesteps);
            let report = experiment::compare_baseline(&log, budget, runs.unwrap_or(cfg.baseline.runs))
                .map_err(|e| e.to_string())?;
            let out = dir.join("baseline.json");
            fs::write(&out, json(&report)).map_err(|e| format!("{}: {e}", out.display()))?;
            for m in [&report.baseline, &report.evolved] {
                println!(
                    "{:8} waypoints {:.2} ± {:.2}  max reward {}  lap time {}",
                    m.label,
                    m.waypoints_mean,
                    m.waypoints_std,
                    m.max_reward_mean.map_or("-".into(), |x| format!("{x:.3}")),
                    m.lap_time_mean.map_or("-".into(), |x| format!("{x:.3}")),
                );
            }
            println!("{}", out.display());
        }
        Command::HoverCheck {
            genotype,
            tolerance,
            config,
        } => {
            let g = read_genotype(genotype.as_deref())?;
            let (phys, _) = physics_and_mutation(config.as_deref())?;
            let ph = decode(&g, &phys);
            let bounds = ControlBounds::default();
            let r = check_static_hover_with(&ph, &bounds, tolerance, phys.g, &HoverSearch::default())
                .map_err(|e| e.to_string())?;
            println!("feasible {}", r.feasible);
            if r.feasible {
                let (force, moment, bound) = hover_residuals(&ph, &bounds, &r.u_hat, phys.g);
                println!("u_hat {:?}", r.u_hat);
                println!("cost {}", r.cost);
                println!("force direction {:?}", r.force_direction);
                println!("residuals force {force:e} moment {moment:e} bounds {bound:e}");
            }
            let s = symmetry_scores(&g.motor_positions());
            println!("ces {} bis {}", s.ces, s.bis);
        }
        Command::MutatePreview {
            genotype,
            count,
            seed,
            config,
        } => {
            let g = read_genotype(genotype.as_deref())?;
            let (phys, mcfg) = physics_and_mutation(config.as_deref())?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_GENERATION, 0));
            for k in 0..count {
                match mutate_traced(&g, &mcfg, &phys, &mut rng) {
                    Ok((m, site)) => {
                        println!(
                            "mutant {k}: arm {} {:?} {} -> {}  overlaps {}",
                            site.arm,
                            site.param,
                            site.before,
                            site.after,
                            overlapping_pairs(&m, &phys).len()
                        );
                        println!("{}", m.to_record());
                    }
                    Err(e) => println!("mutant {k}: {e}"),
                }
            }
        }
        Command::Verify {
            common,
            repetition,
            retrain,
        } => {
            let cfg = common.load()?;
            let report = experiment::verify(&cfg.repetition_dir(repetition), retrain).map_err(|e| e.to_string())?;
            println!("genotypes stored {} derived {}", report.stored_genotypes, report.derived_genotypes);
            for a in &report.artifacts {
                println!("{:06} {:10} {}", a.id, a.artifact, if a.matches() { "ok" } else { "MISMATCH" });
            }
            if !report.ok() {
                return Err("verification failed".into());
            }
            println!("verified");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
