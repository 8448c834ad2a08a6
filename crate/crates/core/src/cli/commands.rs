use std::path::Path;

use serde::Serialize;

use super::config::{default_run_dir, parse_grid, Overrides, RunConfig, RUN_CONFIG_FILE};
use super::{AblateArgs, EmbedArgs, EvalArgs, EvalMode, SynthArgs, TrainArgs, TrainingFlags};
use crate::alignment::{train, JointModel, ModalityInput, MetricRecord, BEST_CHECKPOINT, LAST_CHECKPOINT, METRICS_FILE};
use crate::chemdata::{
    generate_synthetic_m4, parse_sdf_subset, parse_xyz, parse_xyz_pocket, Dataset, Modality, PairKind, SplitCounts,
    SynthConfig,
};
use crate::encoders::Checkpoint;
use crate::error::{Error, Result};
use crate::evaluation::{ablation_run, evaluate_retrieval, AblationTable, RetrievalMode, RetrievalReport};
use crate::numerics::AdamConfig;

pub const PROVENANCE_FILE: &str = "provenance.json";

#[derive(Debug, Clone, Serialize)]
pub struct SynthSummary {
    pub out: String,
    pub config: SynthConfig,
    pub counts: std::collections::BTreeMap<PairKind, SplitCounts>,
}

#[derive(Serialize)]
struct Provenance<'a> {
    generator: &'static str,
    version: &'static str,
    config: &'a SynthConfig,
    counts: &'a std::collections::BTreeMap<PairKind, SplitCounts>,
}

fn ensure_fresh(dir: &Path, overwrite: bool, what: &str) -> Result<()> {
    let occupied = dir.exists()
        && std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .next()
            .is_some();
    if occupied && !overwrite {
        return Err(Error::Config(format!(
            "{what} {} already exists and is not empty; pass --overwrite to replace it",
            dir.display()
        )));
    }
    if occupied {
        std::fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes a synthetic dataset plus `provenance.json` into `--out`.
pub fn cmd_synth(args: &SynthArgs) -> Result<SynthSummary> {
    let config = SynthConfig {
        n_samples: args.n,
        latent_dim: args.latent_dim,
        noise_sigma: args.noise,
        seed: args.seed,
    };
    let synth = generate_synthetic_m4(config)?;
    ensure_fresh(&args.out, args.overwrite, "output directory")?;
    synth.dataset.save(&args.out)?;
    let counts = synth.dataset.manifests.iter().map(|(k, m)| (*k, m.counts())).collect();
    let prov = Provenance {
        generator: "synthetic-m4",
        version: env!("CARGO_PKG_VERSION"),
        config: &config,
        counts: &counts,
    };
    let path = args.out.join(PROVENANCE_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&prov)?).map_err(|e| Error::io(&path, e))?;
    Ok(SynthSummary {
        out: args.out.display().to_string(),
        config,
        counts,
    })
}

fn overrides(flags: &TrainingFlags, pairs: Option<Vec<PairKind>>) -> Overrides {
    Overrides {
        seed: flags.seed,
        pairs,
        max_epochs: flags.epochs,
        batch_size: flags.batch_size,
        learning_rate: flags.lr,
        temperature: flags.temperature,
    }
}

fn new_model(ds: &Dataset, cfg: &RunConfig) -> Result<JointModel> {
    let adam = AdamConfig {
        lr: cfg.alignment.learning_rate,
        ..AdamConfig::default()
    };
    JointModel::for_dataset(ds, cfg.encoders, cfg.alignment.learnable_temperature, adam, cfg.alignment.seed)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub run_dir: String,
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    pub best_val_recall_at_1: Option<f64>,
    pub best_checkpoint: String,
    pub last_checkpoint: String,
    pub metrics: Vec<MetricRecord>,
}

/// Validates data and config, then trains into the run directory.
pub fn cmd_train(args: &TrainArgs) -> Result<TrainSummary> {
    let cfg = RunConfig::resolve(args.flags.config.as_deref(), &overrides(&args.flags, args.pairs.clone()))?;
    let run_dir = args
        .run_dir
        .clone()
        .unwrap_or_else(|| default_run_dir(&format!("train-seed{}", cfg.alignment.seed)));
    let ds = Dataset::load(&args.data)?;
    crate::alignment::check_training_data(&ds, &cfg.alignment)?;
    ensure_fresh(&run_dir, args.overwrite, "run directory")?;
    let cfg_path = run_dir.join(RUN_CONFIG_FILE);
    std::fs::write(&cfg_path, cfg.to_toml()?).map_err(|e| Error::io(&cfg_path, e))?;
    let model = new_model(&ds, &cfg)?;
    let outcome = train(model, &ds, &cfg.alignment, Some(&run_dir))?;
    if outcome.epochs_run == 0 {
        outcome.best.checkpoint()?.save(&run_dir.join(BEST_CHECKPOINT))?;
        outcome.last.checkpoint()?.save(&run_dir.join(LAST_CHECKPOINT))?;
        let path = run_dir.join(METRICS_FILE);
        std::fs::write(&path, "").map_err(|e| Error::io(&path, e))?;
    }
    Ok(TrainSummary {
        run_dir: run_dir.display().to_string(),
        epochs_run: outcome.epochs_run,
        best_epoch: outcome.best_epoch,
        best_val_recall_at_1: outcome.best_val_recall,
        best_checkpoint: run_dir.join(BEST_CHECKPOINT).display().to_string(),
        last_checkpoint: run_dir.join(LAST_CHECKPOINT).display().to_string(),
        metrics: outcome.metrics,
    })
}

fn load_model(path: &Path) -> Result<JointModel> {
    JointModel::from_checkpoint(&Checkpoint::load(path)?)
}

/// Scores one retrieval direction and writes the report next to the
/// checkpoint (or into `--run-dir`).
pub fn cmd_eval(args: &EvalArgs) -> Result<RetrievalReport> {
    let model = load_model(&args.ckpt)?;
    let ds = Dataset::load(&args.data)?;
    let mode = match args.mode {
        EvalMode::Batch => RetrievalMode::InBatch(args.batch_size),
        EvalMode::Full => RetrievalMode::FullSet,
    };
    let report = evaluate_retrieval(&model, &ds, args.split.into(), args.direction, mode)?;
    let dir = match &args.run_dir {
        Some(d) => d.clone(),
        None => args.ckpt.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let split: crate::chemdata::Split = args.split.into();
    let path = dir.join(format!(
        "eval-{}-{}-{}.json",
        report.direction.to_lowercase(),
        report.mode,
        split
    ));
    std::fs::write(&path, serde_json::to_string_pretty(&report)?).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}

/// Runs the ablation grid and writes the CSV table.
pub fn cmd_ablate(args: &AblateArgs) -> Result<AblationTable> {
    let text = std::fs::read_to_string(&args.grid).map_err(|e| Error::io(&args.grid, e))?;
    let grid = parse_grid(&text)?;
    let cfg = RunConfig::resolve(args.flags.config.as_deref(), &overrides(&args.flags, None))?;
    let ds = Dataset::load(&args.data)?;
    let table = ablation_run(&ds, &grid, &cfg.alignment, cfg.encoders)?;
    table.write_csv(&args.out)?;
    Ok(table)
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbedOutput {
    pub modality: Modality,
    pub dim: usize,
    pub embedding: Vec<f64>,
}

/// Embeds one record read from `--input` in the format of `--modality`.
pub fn cmd_embed(args: &EmbedArgs) -> Result<EmbedOutput> {
    let model = load_model(&args.ckpt)?;
    let text = std::fs::read_to_string(&args.input).map_err(|e| Error::io(&args.input, e))?;
    let embedding = match args.modality {
        Modality::Language => {
            let t = text.trim();
            if t.is_empty() {
                return Err(Error::parse(1, "empty text input"));
            }
            model.embed(ModalityInput::Text(t))?
        }
        Modality::Graph => model.embed(ModalityInput::Graph(&parse_sdf_subset(&text)?))?,
        Modality::Conformation => model.embed(ModalityInput::Conformation(&parse_xyz(&text)?))?,
        Modality::Protein => model.embed(ModalityInput::Pocket(&parse_xyz_pocket(&text)?))?,
    };
    Ok(EmbedOutput {
        modality: args.modality,
        dim: embedding.len(),
        embedding,
    })
}

