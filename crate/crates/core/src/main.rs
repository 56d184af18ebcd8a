//! Command-line pipeline: simulate a wake dataset, train any of the seven
//! models, run the comparison table, and export attention diagrams.
//!
//! Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numeric
//! failure.

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use windgnn::baselines::{BaselineModel, BaselineVariant, BlstmConfig, BlstmModel, PaddedMlpConfig, PaddedMlpModel};
use windgnn::checkpoint::{load_model, save_model};
use windgnn::gnn::{GnnConfig, GnnModel};
use windgnn::graph::{build_upstream_sequences, SequenceOrder};
use windgnn::svg::{busiest_receiver, render_attention};
use windgnn::train::{
    evaluate_model, extract_attention, train, EvalReport, EvalRow, History, Model, ModelKind,
    TrainConfig,
};
use windgnn::wake::{
    normalize_and_split, read_jsonl, simulate_dataset, write_jsonl, NormStats, ScenarioRecord,
    SimConfig, Splits,
};
use windgnn::{Error, Result};

const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "windgnn", version, about = "Wind-farm power prediction with attention graph networks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a simulated wake dataset.
    Simulate {
        /// Simulation config (TOML, JSON fallback).
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output dataset directory.
        #[arg(long, default_value = "dataset")]
        out: PathBuf,
    },
    /// Train one model on a simulated dataset.
    Train {
        /// Model kind: bs-farm, bs-turb, mlp, blstm, o-graph, n-graph,
        /// f-graph.
        #[arg(long)]
        model: String,
        /// Dataset directory from `simulate`.
        #[arg(long)]
        dataset: PathBuf,
        /// Output directory for checkpoint + history.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Training config (TOML, JSON fallback); defaults per model family.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the training seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the epoch cap.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Evaluate checkpoints on the test split and print the comparison
    /// table.
    Compare {
        #[arg(long)]
        dataset: PathBuf,
        /// Checkpoint manifest paths.
        #[arg(required = true)]
        checkpoints: Vec<PathBuf>,
        /// Optional CSV output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export attention weights of a trained graph model as SVG + JSON.
    AttnExport {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Scenario id within the dataset.
        #[arg(long)]
        scenario: usize,
        /// Target turbine (default: the receiver with most upstream
        /// neighbours).
        #[arg(long)]
        target: Option<usize>,
        #[arg(long, default_value = "attention")]
        out: PathBuf,
    },
}

/// Reproducibility record written next to every artifact.
#[derive(Serialize, Deserialize)]
struct RunManifest {
    tool_version: String,
    command: String,
    seed: u64,
    config_sha256: String,
    dataset: Option<String>,
    checkpoints: Vec<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Parse a config file as TOML, falling back to JSON.
fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    match toml::from_str(&text) {
        Ok(v) => Ok(v),
        Err(toml_err) => serde_json::from_str(&text).map_err(|json_err| {
            Error::Config(format!(
                "config {} is neither valid TOML ({toml_err}) nor JSON ({json_err})",
                path.display()
            ))
        }),
    }
}

struct Dataset {
    records: Vec<ScenarioRecord>,
    splits: Splits,
    norm: NormStats,
}

impl Dataset {
    fn load(dir: &Path) -> Result<Self> {
        let records = read_jsonl(&dir.join("dataset.jsonl"))?;
        let norm: NormStats =
            serde_json::from_str(&std::fs::read_to_string(dir.join("norm_stats.json"))?)?;
        let splits: Splits =
            serde_json::from_str(&std::fs::read_to_string(dir.join("splits.json"))?)?;
        let n = records.len();
        for idx in splits.train.iter().chain(&splits.val).chain(&splits.test) {
            if *idx >= n {
                return Err(Error::Data(format!(
                    "split index {idx} out of range for {n} records"
                )));
            }
        }
        Ok(Dataset {
            records,
            splits,
            norm,
        })
    }

    fn pick(&self, idxs: &[usize]) -> Vec<ScenarioRecord> {
        idxs.iter().map(|&i| self.records[i].clone()).collect()
    }
}

fn cmd_simulate(config: PathBuf, seed: Option<u64>, out: PathBuf) -> Result<()> {
    let mut sim: SimConfig = load_config(&config)?;
    if let Some(s) = seed {
        sim.seed = s;
    }
    let records = simulate_dataset(&sim)?;
    let (splits, norm) = normalize_and_split(&records, sim.seed)?;
    std::fs::create_dir_all(&out)?;
    write_jsonl(&records, &out.join("dataset.jsonl"))?;
    std::fs::write(
        out.join("norm_stats.json"),
        serde_json::to_string_pretty(&norm)?,
    )?;
    std::fs::write(
        out.join("splits.json"),
        serde_json::to_string_pretty(&splits)?,
    )?;
    let manifest = RunManifest {
        tool_version: TOOL_VERSION.into(),
        command: "simulate".into(),
        seed: sim.seed,
        config_sha256: sha256_hex(serde_json::to_string(&sim)?.as_bytes()),
        dataset: Some(out.display().to_string()),
        checkpoints: vec![],
    };
    std::fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    let n_values: usize = records.iter().map(|r| r.powers.len()).sum();
    println!(
        "{} scenarios, {} turbine power values -> {}",
        records.len(),
        n_values,
        out.display()
    );
    Ok(())
}

/// Largest upstream-neighbour count over the training split, sizing the
/// padded MLP.
fn max_neighbors_in_train(ds: &Dataset) -> Result<usize> {
    let mut max = 1usize;
    for &i in &ds.splits.train {
        let seqs = build_upstream_sequences(&ds.records[i], &ds.norm, SequenceOrder::NearestFirst)?;
        for s in seqs {
            max = max.max(s.triples.len());
        }
    }
    Ok(max)
}

fn build_model(kind: ModelKind, ds: &Dataset, seed: u64) -> Result<Model> {
    Ok(match kind {
        ModelKind::BsFarm => {
            Model::Baseline(BaselineModel::new(BaselineVariant::Farm, vec![64, 64], seed)?)
        }
        ModelKind::BsTurb => Model::Baseline(BaselineModel::new(
            BaselineVariant::Turbine,
            vec![64, 64],
            seed,
        )?),
        ModelKind::Mlp => Model::PaddedMlp(PaddedMlpModel::new(
            PaddedMlpConfig {
                max_neighbors: max_neighbors_in_train(ds)?,
                widths: vec![64, 64],
            },
            seed,
        )?),
        ModelKind::Blstm => Model::Blstm(BlstmModel::new(BlstmConfig::default(), seed)?),
        ModelKind::OGraph | ModelKind::NGraph | ModelKind::FGraph => {
            let gk = kind.graph_kind().unwrap();
            Model::Gnn(gk, GnnModel::new(GnnConfig::preset(gk), seed)?)
        }
    })
}

fn cmd_train(
    model: String,
    dataset: PathBuf,
    out: PathBuf,
    config: Option<PathBuf>,
    seed: Option<u64>,
    epochs: Option<usize>,
) -> Result<()> {
    let kind = ModelKind::parse(&model)?;
    let ds = Dataset::load(&dataset)?;
    let mut cfg = match &config {
        Some(p) => load_config::<TrainConfig>(p)?,
        None => TrainConfig::default_for(kind),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(e) = epochs {
        cfg.max_epochs = e;
    }
    cfg.validate()?;
    let mut m = build_model(kind, &ds, cfg.seed)?;
    let history = train(&mut m, &ds.records, &ds.splits, &ds.norm, &cfg)?;
    std::fs::create_dir_all(&out)?;
    let stem = kind.cli_name();
    let ckpt = save_model(&m, &out, stem)?;
    std::fs::write(
        out.join(format!("{stem}.history.json")),
        serde_json::to_string_pretty(&history)?,
    )?;
    let manifest = RunManifest {
        tool_version: TOOL_VERSION.into(),
        command: format!("train {stem}"),
        seed: cfg.seed,
        config_sha256: sha256_hex(serde_json::to_string(&cfg)?.as_bytes()),
        dataset: Some(dataset.display().to_string()),
        checkpoints: vec![ckpt.display().to_string()],
    };
    std::fs::write(
        out.join(format!("{stem}.manifest.json")),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    println!(
        "trained {} for {} epochs, best val MAE {:.6} (epoch {}) -> {}",
        kind.display_name(),
        history.epochs.len(),
        history.best_val_mae,
        history.best_epoch,
        ckpt.display()
    );
    Ok(())
}

fn cmd_compare(dataset: PathBuf, checkpoints: Vec<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    let ds = Dataset::load(&dataset)?;
    let test = ds.pick(&ds.splits.test);
    let mut report = EvalReport::default();
    for path in &checkpoints {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        match load_model(path) {
            Ok(m) => {
                let started = std::time::Instant::now();
                let scores = evaluate_model(&m, &test, &ds.norm)?;
                let epochs = path
                    .with_extension("history.json")
                    .exists()
                    .then(|| -> Result<usize> {
                        let h: History = serde_json::from_str(&std::fs::read_to_string(
                            path.with_extension("history.json"),
                        )?)?;
                        Ok(h.epochs.len())
                    })
                    .transpose()?
                    .unwrap_or(0);
                report.rows.push(EvalRow {
                    model: m.kind().display_name().into(),
                    mae_turbine: scores.mae_turbine,
                    mae_farm: scores.mae_farm,
                    epochs,
                    wall_seconds: started.elapsed().as_secs_f64(),
                });
            }
            Err(e) => {
                eprintln!("checkpoint {} absent or unreadable: {e}", path.display());
                report.rows.push(EvalRow {
                    model: format!("{stem} (absent)"),
                    mae_turbine: None,
                    mae_farm: None,
                    epochs: 0,
                    wall_seconds: 0.0,
                });
            }
        }
    }
    print!("{}", report.to_table());
    if let Some(csv_path) = out {
        std::fs::write(&csv_path, report.to_csv())?;
        println!("wrote {}", csv_path.display());
    }
    Ok(())
}

fn cmd_attn_export(
    checkpoint: PathBuf,
    dataset: PathBuf,
    scenario: usize,
    target: Option<usize>,
    out: PathBuf,
) -> Result<()> {
    let model = load_model(&checkpoint)?;
    let ds = Dataset::load(&dataset)?;
    let record = ds
        .records
        .iter()
        .find(|r| r.id == scenario)
        .ok_or_else(|| Error::Data(format!("no scenario with id {scenario} in dataset")))?;
    let (weights, overlay) = extract_attention(&model, record, &ds.norm)?;
    let target = target.unwrap_or_else(|| busiest_receiver(&overlay));
    let export = render_attention(&weights, &overlay, target)?;
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("attention.svg"), &export.svg)?;
    std::fs::write(out.join("attention.json"), &export.json)?;
    println!(
        "exported {} panels for scenario {scenario}, target turbine {target} -> {}",
        export.n_panels,
        out.display()
    );
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        Error::Data(_) | Error::Io(_) | Error::Json(_) | Error::Capacity { .. }
        | Error::NoAttention => 3,
        _ => 4,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Simulate { config, seed, out } => cmd_simulate(config, seed, out),
        Cmd::Train {
            model,
            dataset,
            out,
            config,
            seed,
            epochs,
        } => cmd_train(model, dataset, out, config, seed, epochs),
        Cmd::Compare {
            dataset,
            checkpoints,
            out,
        } => cmd_compare(dataset, checkpoints, out),
        Cmd::AttnExport {
            checkpoint,
            dataset,
            scenario,
            target,
            out,
        } => cmd_attn_export(checkpoint, dataset, scenario, target, out),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
