//! File-in, file-out versions of the harness operations.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::eval::{evaluate, inspect_records, predict_records};
use super::metrics::MetricsReport;
use super::train::{train_with, StepRecord};
use crate::config::Config;
use crate::error::{NestError, Result};
use crate::model::Model;
use crate::numerics::Checkpoint;
use crate::scenario::{
    generate_synthetic, load_scenarios, make_batch, save_scenarios, SceneInput, SynthKind, SynthParams,
};

pub fn gen_data(kind: SynthKind, count: usize, seed: u64, out: &Path) -> Result<()> {
    let scenes = generate_synthetic(kind, count, seed, &SynthParams::default())?;
    save_scenarios(out, &scenes)
}

pub fn load_scenes(path: &Path, cfg: &Config, require_future: bool) -> Result<Vec<SceneInput>> {
    let raw = load_scenarios(path)?;
    if raw.is_empty() {
        return Err(NestError::Data {
            line: 0,
            detail: format!("{} holds no scenarios", path.display()),
        });
    }
    make_batch(&raw, cfg.t_h, cfg.t_f, require_future)
}

/// `<dir>/<stem>.<suffix>` next to `path`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| NestError::io(path, e))?,
    ))
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = writer(path)?;
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| NestError::io(path, e))?;
    }
    w.flush().map_err(|e| NestError::io(path, e))
}

pub fn write_loss_curve(path: &Path, curve: &[StepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["step", "loss"])?;
    for r in curve {
        w.write_record([r.step.to_string(), format!("{:e}", r.loss)])?;
    }
    w.flush().map_err(|e| NestError::io(path, e))
}

/// Trains from a config file and a scenario file. Writes the final
/// checkpoint to `out`, the loss curve to `<out stem>.loss.csv`, and every
/// `checkpoint_every` steps `<out stem>.step<N>.json`.
pub fn train_files(config: &Path, data: &Path, out: &Path) -> Result<PathBuf> {
    let cfg = Config::load(config)?;
    let scenes = load_scenes(data, &cfg, true)?;
    let every = cfg.checkpoint_every;
    let outcome = train_with(Model::init(cfg)?, &scenes, |rec, model| {
        if every > 0 && (rec.step + 1) % every == 0 {
            model.save(&sibling(out, &format!("step{}.json", rec.step + 1)))?;
        }
        Ok(())
    })?;
    outcome.model.save(out)?;
    let curve = sibling(out, "loss.csv");
    write_loss_curve(&curve, &outcome.curve)?;
    Ok(curve)
}

/// Loads a checkpoint; with `config`, refuses one trained under another.
pub fn load_model(ckpt: &Path, config: Option<&Path>) -> Result<Model> {
    let expected = config.map(Config::load).transpose()?.map(|c| c.hash());
    Model::from_checkpoint(&Checkpoint::load(ckpt, expected.as_deref())?)
}

pub fn eval_files(ckpt: &Path, data: &Path, report: &Path, config: Option<&Path>) -> Result<MetricsReport> {
    let model = load_model(ckpt, config)?;
    let scenes = load_scenes(data, &model.config, true)?;
    let r = evaluate(&model, &scenes, true)?;
    let mut w = writer(report)?;
    serde_json::to_writer_pretty(&mut w, &r)?;
    w.write_all(b"\n").map_err(|e| NestError::io(report, e))?;
    Ok(r)
}

pub fn predict_files(ckpt: &Path, data: &Path, out: &Path) -> Result<()> {
    let model = load_model(ckpt, None)?;
    let scenes = load_scenes(data, &model.config, false)?;
    write_jsonl(out, &predict_records(&model, &scenes)?)
}

pub fn inspect_files(ckpt: &Path, data: &Path, out: &Path) -> Result<()> {
    let model = load_model(ckpt, None)?;
    let scenes = load_scenes(data, &model.config, false)?;
    write_jsonl(out, &inspect_records(&model, &scenes)?)
}
