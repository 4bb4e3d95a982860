//! Command-line front end: each pipeline stage as a subcommand plus the
//! monolithic `run`, with a JSON config file and per-flag overrides.
//!
//! Exit codes: 0 success, 2 config error, 3 ingest error, 4 stage failure.
//! `FLEET_HEALTH_SEED` overrides the config seed; an explicit `--seed`
//! flag beats both.

use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::pipeline::{self, PipelineConfig};
use crate::synth::{self, SynthConfig};

#[derive(Debug, Parser)]
#[command(
    name = "fleet-health",
    about = "Predictive-maintenance pipeline: impute, extract, train, and rank a railcar fleet",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every stage; each one overrides its config-file key.
#[derive(Debug, Args)]
struct ConfigArgs {
    /// JSON pipeline configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// events.csv path.
    #[arg(long)]
    events: Option<PathBuf>,
    /// cars.csv path.
    #[arg(long)]
    cars: Option<PathBuf>,
    /// trips.csv path (optional record kind).
    #[arg(long)]
    trips: Option<PathBuf>,
    /// Directory for all pipeline artifacts.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Feature/target cut-off date (YYYY-MM-DD).
    #[arg(long)]
    cutoff_date: Option<NaiveDate>,
    /// Failure window length after the cutoff, in days.
    #[arg(long)]
    horizon_days: Option<u32>,
    /// Pipeline variant: without-pca | b-pca-k | b-pca-nk | adasyn | adasyn-pca.
    #[arg(long)]
    variant: Option<String>,
    /// Global seed (beats FLEET_HEALTH_SEED and the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Clustering radius in Gower-distance units.
    #[arg(long)]
    eps: Option<f64>,
    /// Neighbors (self included) needed for a core point.
    #[arg(long)]
    min_points: Option<usize>,
    /// Operational-set radius multiplier.
    #[arg(long)]
    n_factor: Option<f64>,
    /// Force minority oversampling on (conflicts with non-adasyn variants).
    #[arg(long)]
    adasyn: bool,
    /// Oversampling balance level in (0, 1].
    #[arg(long)]
    adasyn_beta: Option<f64>,
    /// Oversampling neighbor count.
    #[arg(long)]
    adasyn_k: Option<usize>,
    /// Trees per component forest.
    #[arg(long)]
    n_trees: Option<usize>,
    /// Maximum tree depth.
    #[arg(long)]
    max_depth: Option<usize>,
    /// Minimum rows per leaf.
    #[arg(long)]
    min_leaf: Option<usize>,
    /// Features sampled per split.
    #[arg(long)]
    mtry: Option<usize>,
    /// Component criticality weights, comma separated.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Held-out fraction of railcars for the simple split.
    #[arg(long)]
    test_fraction: Option<f64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_json_file(path)?,
            None => PipelineConfig::default(),
        };
        if let Ok(seed) = std::env::var("FLEET_HEALTH_SEED") {
            cfg.seed = seed
                .parse()
                .map_err(|_| Error::Config(format!("invalid FLEET_HEALTH_SEED '{seed}'")))?;
        }
        if let Some(v) = &self.events {
            cfg.events = v.clone();
        }
        if let Some(v) = &self.cars {
            cfg.cars = v.clone();
        }
        if let Some(v) = &self.trips {
            cfg.trips = Some(v.clone());
        }
        if let Some(v) = &self.out_dir {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = self.cutoff_date {
            cfg.cutoff_date = v;
        }
        if let Some(v) = self.horizon_days {
            cfg.horizon_days = v;
        }
        if let Some(v) = &self.variant {
            cfg.variant = v.parse()?;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.eps {
            cfg.dbscan.eps = v;
        }
        if let Some(v) = self.min_points {
            cfg.dbscan.min_points = v;
        }
        if let Some(v) = self.n_factor {
            cfg.dbscan.n_factor = v;
        }
        if self.adasyn {
            cfg.adasyn.enabled = Some(true);
        }
        if let Some(v) = self.adasyn_beta {
            cfg.adasyn.beta = v;
        }
        if let Some(v) = self.adasyn_k {
            cfg.adasyn.k = v;
        }
        if let Some(v) = self.n_trees {
            cfg.forest.n_trees = v;
        }
        if let Some(v) = self.max_depth {
            cfg.forest.max_depth = v;
        }
        if let Some(v) = self.min_leaf {
            cfg.forest.min_leaf = v;
        }
        if let Some(v) = self.mtry {
            cfg.forest.mtry = Some(v);
        }
        if let Some(v) = &self.weights {
            cfg.weights = Some(v.clone());
        }
        if let Some(v) = self.test_fraction {
            cfg.test_fraction = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic fleet (events.csv, cars.csv, trips.csv,
    /// truth.csv) with a planted degradation signal.
    Synth {
        /// Number of railcars.
        #[arg(long, default_value_t = 1000)]
        cars: usize,
        /// Generator seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Probability of blanking an optional field, in [0, 0.5].
        #[arg(long, default_value_t = 0.1)]
        missingness: f64,
        /// Span of build dates before the cutoff, in years.
        #[arg(long, default_value_t = 25)]
        years: u32,
        /// Output directory.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Ingest the raw CSVs and write one labeled feature matrix per
    /// component.
    Features(ConfigArgs),
    /// Cluster each feature matrix and fill missing cells.
    Impute(ConfigArgs),
    /// Fit per-component forests on a railcar-grouped split and write
    /// models plus evaluation curves.
    Train(ConfigArgs),
    /// Cross-validated AUC per component.
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Number of stratified folds.
        #[arg(long, default_value_t = 10)]
        fold: usize,
    },
    /// Score the fleet with trained models and emit the ranked health
    /// report.
    Score(ConfigArgs),
    /// Run the whole pipeline: features, impute, train, score.
    Run(ConfigArgs),
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            cars,
            seed,
            missingness,
            years,
            out_dir,
        } => {
            let cfg = SynthConfig {
                n_cars: cars,
                seed,
                missingness,
                years_history: years,
                ..Default::default()
            };
            let output = synth::generate(&cfg)?;
            output.write_csvs(&out_dir)?;
            println!(
                "wrote {} events, {} cars under {}",
                output.events.len(),
                output.cars.len(),
                out_dir.display()
            );
            Ok(())
        }
        Command::Features(args) => {
            let cfg = args.resolve()?;
            let components = pipeline::stage_features(&cfg)?;
            println!(
                "wrote {} component feature matrices under {}",
                components.len(),
                cfg.out_dir.join("features").display()
            );
            Ok(())
        }
        Command::Impute(args) => {
            let cfg = args.resolve()?;
            pipeline::stage_impute(&cfg)?;
            println!(
                "imputed matrices written under {}",
                cfg.out_dir.join("imputed").display()
            );
            Ok(())
        }
        Command::Train(args) => {
            let cfg = args.resolve()?;
            let outcomes = pipeline::stage_train(&cfg)?;
            for outcome in &outcomes {
                println!(
                    "component #{}: auc {:.3}, threshold {:.3}, capture@50% {:.3}",
                    outcome.component, outcome.auc, outcome.threshold, outcome.capture_half
                );
            }
            Ok(())
        }
        Command::Evaluate { config, fold } => {
            let cfg = config.resolve()?;
            let means = pipeline::stage_evaluate(&cfg, fold)?;
            println!("{fold}-fold AUC ({})", cfg.variant);
            for (component, auc) in means {
                println!("component #{component}: {auc:.3}");
            }
            Ok(())
        }
        Command::Score(args) => {
            let cfg = args.resolve()?;
            let summary = pipeline::stage_score(&cfg)?;
            pipeline::print_summary(&summary);
            Ok(())
        }
        Command::Run(args) => {
            let cfg = args.resolve()?;
            pipeline::run_pipeline(&cfg)?;
            Ok(())
        }
    }
}

/// Parse arguments, run, and exit with the documented code on failure.
pub fn main() {
    let cli = Cli::parse();
    if let Err(error) = dispatch(cli) {
        eprintln!("error: {error}");
        std::process::exit(error.exit_code());
    }
}
