//! The five batch commands.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use reflexnav_core::metrics::{summarize, BenchmarkReport};
use reflexnav_core::model::{importance_report, Checkpoint};
use reflexnav_core::sim::{gen_dataset, run_trial, Setback, Track, TrialConfig, TrialLog};
use reflexnav_core::{solve, Controller};

use crate::config::{load_config, RunConfig};
use crate::io::{
    read_checkpoint, read_dataset, write_json, write_text, DatasetFile, ImportanceFile, TraceFile, DATASET_FORMAT,
    FILE_VERSION, IMPORTANCE_FORMAT, TRACE_FORMAT,
};

const DEFAULT_TIMEOUT: f64 = 120.0;

/// Rolls out the expert over the `[data]` section and writes `dataset.json`.
pub fn gen_data(config: &Path, out: &Path) -> Result<PathBuf> {
    let cfg = load_config(config)?;
    let Some(data) = &cfg.data else {
        bail!("config {} has no [data] section", config.display());
    };
    let tracks: Vec<Track> = data.tracks.iter().map(|t| cfg.track(t)).collect::<Result<_, _>>()?;
    let setbacks: Vec<Setback> = data.setbacks.iter().map(|s| cfg.setback(s)).collect::<Result<_, _>>()?;
    let dataset = gen_dataset(
        &tracks,
        &setbacks,
        &data.seeds,
        cfg.hyperparams.history_len,
        &cfg.world(),
        data.timeout,
    )?;
    info!("generated {} instances", dataset.len());
    let path = out.join("dataset.json");
    write_json(
        &path,
        &DatasetFile {
            format: DATASET_FORMAT.into(),
            version: FILE_VERSION,
            config_hash: cfg.hash(),
            dataset,
        },
    )?;
    Ok(path)
}

/// Fits the model and writes `checkpoint.json` and `trace.json`.
pub fn train(data: &Path, config: &Path, out: &Path) -> Result<PathBuf> {
    let cfg = load_config(config)?;
    let file = read_dataset(data)?;
    let hash = cfg.hash();
    if file.config_hash != hash {
        log::warn!("dataset was generated with a different config ({})", file.config_hash);
    }
    let layout = cfg.layout()?;
    if file.dataset.layout.modality_dims != layout.modality_dims {
        bail!(
            "dataset layout {:?} does not match the config layout {:?}",
            file.dataset.layout.modality_dims,
            layout.modality_dims
        );
    }
    let (weights, report) = solve(&file.dataset, &cfg.hyperparams, &cfg.solver).context("training failed")?;
    info!(
        "{} iterations, objective {:.6} -> {:.6}, converged {} ({:.1}s)",
        report.iterations,
        report.objective_trace.first().copied().unwrap_or(f64::NAN),
        report.objective_trace.last().copied().unwrap_or(f64::NAN),
        report.converged,
        report.wall_time
    );
    let ck = Checkpoint::new(
        weights,
        file.dataset.layout.clone(),
        cfg.hyperparams.clone(),
        hash.clone(),
        cfg.portable_json(),
    );
    let path = out.join("checkpoint.json");
    write_text(&path, &(ck.to_json()? + "\n"))?;
    write_json(
        &out.join("trace.json"),
        &TraceFile {
            format: TRACE_FORMAT.into(),
            version: FILE_VERSION,
            config_hash: hash,
            report,
        },
    )?;
    Ok(path)
}

/// The config a checkpoint was trained with, unless one is given explicitly.
fn resolve_config(ck: &Checkpoint, config: Option<&Path>) -> Result<RunConfig> {
    match config {
        Some(p) => Ok(load_config(p)?),
        None => {
            let cfg: RunConfig = serde_json::from_value(ck.run_config.clone())
                .context("checkpoint does not embed a usable run config; pass --config")?;
            cfg.validate()?;
            Ok(cfg)
        }
    }
}

fn trial_timeout(cfg: &RunConfig) -> f64 {
    cfg.benchmark
        .as_ref()
        .map(|b| b.timeout)
        .or(cfg.data.as_ref().map(|d| d.timeout))
        .unwrap_or(DEFAULT_TIMEOUT)
}

/// Runs `trials` closed-loop trials with seeds `seed, seed + 1, ...`.
pub fn run_trials(
    ck: &Checkpoint,
    cfg: &RunConfig,
    track: &Track,
    setback: &Setback,
    trials: usize,
    seed: u64,
    use_offset: bool,
) -> Result<Vec<TrialLog>> {
    if ck.layout != cfg.layout()? {
        bail!("checkpoint feature layout does not match the configured world");
    }
    let mut controller = Controller::new(ck.weights.clone(), cfg.limits, use_offset)?;
    let world = cfg.world();
    let timeout = trial_timeout(cfg);
    (0..trials as u64)
        .map(|i| {
            let tc = TrialConfig {
                timeout,
                seed: seed.wrapping_add(i),
            };
            Ok(run_trial(track, &mut controller, setback, &world, &tc)?)
        })
        .collect()
}

fn labeled(logs: &[TrialLog], label: String, hash: &str) -> BenchmarkReport {
    let mut r = summarize(logs);
    r.label = label;
    r.config_hash = hash.to_string();
    r
}

fn log_text(log: &TrialLog, hash: &str) -> String {
    format!("# config_hash {hash}\n{}", log.to_text())
}

pub struct EvaluateArgs<'a> {
    pub ckpt: &'a Path,
    pub scenario: &'a str,
    pub trials: usize,
    pub seed: u64,
    pub out: Option<&'a Path>,
    pub config: Option<&'a Path>,
    pub use_offset: bool,
}

/// Writes one text log per trial plus `report.json` and `report.csv`.
pub fn evaluate(args: &EvaluateArgs) -> Result<BenchmarkReport> {
    if args.trials == 0 {
        bail!("--trials must be >= 1");
    }
    let ck = read_checkpoint(args.ckpt)?;
    let cfg = resolve_config(&ck, args.config)?;
    let (track, setback) = cfg.scenario(args.scenario)?;
    let logs = run_trials(&ck, &cfg, &track, &setback, args.trials, args.seed, args.use_offset)?;
    let variant = if args.use_offset { "full" } else { "ablation" };
    let dir = match args.out {
        Some(d) => d.to_path_buf(),
        None => cfg.output_dir.join("evaluate").join(args.scenario).join(variant),
    };
    let hash = ck.config_hash.as_str();
    for (i, log) in logs.iter().enumerate() {
        write_text(&dir.join(format!("trial_{i:03}.log")), &log_text(log, hash))?;
    }
    let report = labeled(&logs, format!("{}/{variant}", args.scenario), hash);
    write_json(&dir.join("report.json"), &report)?;
    write_text(&dir.join("report.csv"), &report.to_csv())?;
    Ok(report)
}

/// Full controller and offset-disabled ablation for every configured scenario.
pub fn benchmark(ckpt: &Path, config: &Path) -> Result<Vec<(BenchmarkReport, BenchmarkReport)>> {
    let ck = read_checkpoint(ckpt)?;
    let cfg = load_config(config)?;
    let Some(bench) = &cfg.benchmark else {
        bail!("config {} has no [benchmark] section", config.display());
    };
    let dir = cfg.output_dir.join("benchmark");
    let hash = ck.config_hash.as_str();
    let mut pairs = Vec::new();
    for name in &bench.scenarios {
        let (track, setback) = cfg.scenario(name)?;
        let mut pair = Vec::with_capacity(2);
        for (variant, use_offset) in [("full", true), ("ablation", false)] {
            let logs = run_trials(&ck, &cfg, &track, &setback, bench.trials, bench.seed, use_offset)?;
            let report = labeled(&logs, format!("{name}/{variant}"), hash);
            write_json(&dir.join(format!("{name}_{variant}.json")), &report)?;
            write_text(&dir.join(format!("{name}_{variant}.csv")), &report.to_csv())?;
            pair.push(report);
        }
        let ablation = pair.pop().expect("two variants");
        let full = pair.pop().expect("two variants");
        pairs.push((full, ablation));
    }
    Ok(pairs)
}

/// Writes `importance.json` next to the checkpoint (or into `out`).
pub fn inspect(ckpt: &Path, out: Option<&Path>) -> Result<ImportanceFile> {
    let ck = read_checkpoint(ckpt)?;
    let report = importance_report(&ck.weights, &ck.layout)?;
    let file = ImportanceFile {
        format: IMPORTANCE_FORMAT.into(),
        version: FILE_VERSION,
        config_hash: ck.config_hash.clone(),
        report,
    };
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => ckpt.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    write_json(&dir.join("importance.json"), &file)?;
    Ok(file)
}

/// Plain-text summary of a report, one line.
pub fn describe(r: &BenchmarkReport) -> String {
    let f = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into());
    format!(
        "{:<28} trials {:>3}  failures {:>3}  time {:>9}  inconsistency {:>8}  jerkiness {:>8}",
        r.label,
        r.trials,
        r.failure_count,
        f(r.mean_traversal_time),
        f(r.mean_inconsistency),
        f(r.mean_jerkiness)
    )
}
