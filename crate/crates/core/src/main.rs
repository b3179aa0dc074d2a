use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ridgelive::eval::{parse_scores, scores_to_text, ScoredSample};
use ridgelive::exec::Exec;
use ridgelive::forest::{load_model, save_model};
use ridgelive::ingest::{build_manifest, summarize, DatasetManifest, LayoutDescriptor, Split};
use ridgelive::pipeline::{
    cmd_eval, cmd_extract, cmd_score, cmd_select, cmd_sweep, cmd_train, features_to_text, parse_subset_mask,
    read_features, read_text, subset_to_text, write_text, PipelineError, RunConfig, MAX_EXTRACT_FAILURE_RATE,
};
use ridgelive::synth::{gen_stripe_grid, write_dataset, DatasetSpec, SynthSpec};

#[derive(Parser)]
#[command(name = "ridgelive", version, about = "Quality-feature fingerprint liveness detection")]
struct Cli {
    /// Run every stage on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan a dataset tree and write a manifest.
    Manifest {
        root: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `livdet`, `livdet-by-sensor`, or a layout descriptor file.
        #[arg(long, default_value = "livdet")]
        layout: String,
        #[arg(long, default_value = "default")]
        sensor: String,
    },
    /// Print per-split, per-material counts of a manifest.
    Summarize {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Compute the 13-value quality vector of every image in a manifest.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Only extract this split (`train` or `test`).
        #[arg(long)]
        split: Option<Split>,
        #[command(flatten)]
        blocks: BlockArgs,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Floating forward feature selection on train-split features.
    Select {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 13)]
        max_dim: usize,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Train the final forest on train-split features under a subset mask.
    Train {
        #[arg(long)]
        features: PathBuf,
        /// Subset report written by `select`.
        #[arg(long)]
        subset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Score feature rows with a trained model.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
    },
    /// Error rates at a fixed threshold, per sensor and per material.
    Eval {
        #[command(flatten)]
        input: ScoreInput,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error rates at thresholds 0.00, 0.01, ..., 1.00.
    Sweep {
        #[command(flatten)]
        input: ScoreInput,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthetic data generators.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Subcommand)]
enum SynthCommand {
    /// One stripe image.
    Stripes {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 192)]
        size: usize,
        #[arg(long, default_value_t = 10)]
        period: usize,
        /// Ridge direction in radians.
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
        orientation: f64,
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// A LivDet-shaped tree of constant-width (live) and jittered (fake) images.
    Dataset {
        root: PathBuf,
        /// Where to write the manifest; defaults to `<root>/manifest.tsv`.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        per_class: usize,
        #[arg(long, default_value_t = 192)]
        size: usize,
        #[arg(long, default_value_t = 2.0)]
        fake_jitter: f64,
        #[arg(long, default_value_t = 5.0)]
        noise: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Args)]
struct BlockArgs {
    #[arg(long, default_value_t = 32)]
    block_size: usize,
    /// Ridges are bright on a dark background.
    #[arg(long)]
    invert: bool,
    #[arg(long, default_value_t = 8)]
    gabor_orientations: usize,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct ScoreInput {
    /// Score file written by `score`.
    #[arg(long, conflicts_with_all = ["model", "features"])]
    scores: Option<PathBuf>,
    #[arg(long, requires = "features")]
    model: Option<PathBuf>,
    /// Feature file; its test-split rows are scored.
    #[arg(long, requires = "model")]
    features: Option<PathBuf>,
}

impl ScoreInput {
    fn load(&self) -> Result<Vec<ScoredSample>, PipelineError> {
        match (&self.scores, &self.model, &self.features) {
            (Some(s), _, _) => parse_scores(&read_text(s)?).map_err(|e| PipelineError::Data(e.to_string())),
            (None, Some(m), Some(f)) => {
                let model = load_model(m).map_err(|e| PipelineError::Data(e.to_string()))?;
                cmd_score(&model, &read_features(f)?, Some(Split::Test))
            }
            _ => Err(PipelineError::Usage("give --scores, or --model with --features".into())),
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), PipelineError> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_manifest(path: &Path) -> Result<DatasetManifest, PipelineError> {
    DatasetManifest::read(path).map_err(|e| PipelineError::Data(e.to_string()))
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let mut config = RunConfig::default();
    if cli.sequential {
        config.exec = Exec::Sequential;
    }
    let data = |e: &dyn std::fmt::Display| PipelineError::Data(e.to_string());

    match cli.command {
        Command::Manifest { root, out, layout, sensor } => {
            let layout = LayoutDescriptor::load(&layout).map_err(|e| PipelineError::Usage(e.to_string()))?;
            let m = build_manifest(&root, &layout, &sensor).map_err(|e| data(&e))?;
            write_text(&out, &m.to_text())?;
            log::info!("{} records", m.len());
        }
        Command::Summarize { manifest } => print!("{}", summarize(&read_manifest(&manifest)?)),
        Command::Extract { manifest, out, split, blocks, workers } => {
            let mut m = read_manifest(&manifest)?;
            if let Some(s) = split {
                m = m.filter_split(s);
            }
            config = config.with_invert(blocks.invert);
            config.block.block_size = blocks.block_size;
            config.gabor.orientations = blocks.gabor_orientations;
            config.workers = workers;
            let ex = cmd_extract(&m, &config)?;
            write_text(&out, &features_to_text(&ex.rows))?;
            for (path, reason) in &ex.failures {
                eprintln!("failed\t{}\t{reason}", path.display());
            }
            if ex.failure_rate() > MAX_EXTRACT_FAILURE_RATE {
                return Err(PipelineError::Data(format!(
                    "{} of {} images failed extraction",
                    ex.failures.len(),
                    m.len()
                )));
            }
        }
        Command::Select { features, out, model, folds, max_dim, workers } => {
            config.forest.n_trees = model.trees;
            config.seed = model.seed;
            config.folds = folds;
            config.workers = workers;
            let subset = cmd_select(&read_features(&features)?, &config, max_dim)?;
            write_text(&out, &subset_to_text(&subset))?;
        }
        Command::Train { features, subset, out, model } => {
            config.forest.n_trees = model.trees;
            config.seed = model.seed;
            let mask = parse_subset_mask(&read_text(&subset)?)?;
            let forest = cmd_train(&read_features(&features)?, &mask, &config)?;
            save_model(&forest, &out).map_err(|e| data(&e))?;
        }
        Command::Score { model, features, out, split } => {
            let model = load_model(&model).map_err(|e| data(&e))?;
            let scores = cmd_score(&model, &read_features(&features)?, Some(split))?;
            write_text(&out, &scores_to_text(&scores))?;
        }
        Command::Eval { input, threshold, out } => {
            config.threshold = threshold;
            config.validate()?;
            let report = cmd_eval(&input.load()?, &config)?;
            emit(out.as_deref(), &report.to_text())?;
        }
        Command::Sweep { input, out } => {
            let curve = cmd_sweep(&input.load()?)?;
            emit(out.as_deref(), &curve.to_text())?;
        }
        Command::Synth(SynthCommand::Stripes { out, size, period, orientation, jitter, noise, seed }) => {
            let spec = SynthSpec {
                width: size,
                height: size,
                period,
                orientation,
                jitter,
                noise_std: noise,
                seed,
                ..SynthSpec::default()
            };
            spec.validate().map_err(PipelineError::Usage)?;
            let (grid, _) = gen_stripe_grid(&spec);
            grid.write_pgm(&out).map_err(|e| data(&e))?;
        }
        Command::Synth(SynthCommand::Dataset { root, manifest, per_class, size, fake_jitter, noise, seed }) => {
            let ds = DatasetSpec {
                per_class,
                size,
                fake_jitter,
                noise_std: noise,
                seed,
                ..DatasetSpec::default()
            };
            let m = write_dataset(&root, &ds).map_err(|e| data(&e))?;
            let path = manifest.unwrap_or_else(|| root.join("manifest.tsv"));
            write_text(&path, &m.to_text())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
