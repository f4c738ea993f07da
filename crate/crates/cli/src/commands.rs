use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use unigraph::data::checkpoint::Checkpoint;
use unigraph::data::mutag::cycle_rule_accuracy;
use unigraph::data::Dataset;
use unigraph::encoder::{prepare_dataset, PreparedGraph};
use unigraph::kernels::{cache, KernelKind, KernelSet};
use unigraph::model::Model;
use unigraph::train::{self, argmax, cross_validate_with, EpochRecord, FinetuneOutcome, FoldResult, PretrainData};

use crate::config::RunConfig;
use crate::CliError;

const CHECKPOINT_FILE: &str = "checkpoint.ugc";

/// Creates `<out_dir>/<parts...>` and writes the resolved config into it.
fn run_dir(cfg: &RunConfig, parts: &[&str]) -> Result<PathBuf, CliError> {
    let mut dir = cfg.out_dir.clone();
    dir.extend(parts);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    Ok(dir)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::msg(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn write_epochs<'a>(path: &Path, records: impl IntoIterator<Item = &'a EpochRecord>) -> Result<(), CliError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| CliError::msg(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Cached kernels when `needed`, else `None`.
fn cached_kernels(cfg: &RunConfig, ds: &Dataset, needed: bool) -> Result<Option<KernelSet>, CliError> {
    if !needed {
        return Ok(None);
    }
    Ok(Some(cache::load(
        &cfg.cache_dir,
        &ds.name,
        &ds.graphs,
        &KernelKind::ALL,
        &cfg.kernel,
    )?))
}

fn load_model(cfg: &RunConfig, path: &Path) -> Result<Model, CliError> {
    let ck = Checkpoint::load(path)?;
    Model::from_checkpoint(&ck, cfg.encoder.clone(), &KernelKind::ALL, cfg.seed).map_err(|e| {
        CliError::msg(format!(
            "checkpoint {} does not fit the encoder config: {e}",
            path.display()
        ))
    })
}

pub fn kernels(cfg: &RunConfig, names: &[String]) -> Result<(), CliError> {
    run_dir(cfg, &["kernels"])?;
    for spec in cfg.select(names)? {
        let ds = spec.load()?;
        let (set, status) =
            cache::load_or_compute(&cfg.cache_dir, &ds.name, &ds.graphs, &KernelKind::ALL, &cfg.kernel)?;
        for ((kind, st), k) in KernelKind::ALL.iter().zip(&status).zip(&set.matrices) {
            let what = match st {
                cache::CacheStatus::Hit => "cache hit",
                cache::CacheStatus::Computed => "computed",
            };
            println!("{} {kind}: {what} ({n}x{n})", ds.name, n = k.len());
        }
    }
    Ok(())
}

pub fn pretrain(cfg: &RunConfig, names: &[String]) -> Result<(), CliError> {
    let specs = cfg.select(names)?;
    let datasets = specs.iter().map(|s| s.load()).collect::<Result<Vec<_>, _>>()?;
    let needs_kernels = cfg.train.pretrain_losses.needs_kernels();
    let mut model = Model::new(cfg.encoder.clone(), &KernelKind::ALL, cfg.seed)?;
    let mut prepared = Vec::new();
    let mut kernels = Vec::new();
    for ds in &datasets {
        model.register(ds)?;
        prepared.push(prepare_dataset(ds, &cfg.encoder, cfg.seed)?);
        kernels.push(cached_kernels(cfg, ds, needs_kernels)?);
    }
    let data: Vec<PretrainData> = datasets
        .iter()
        .zip(&prepared)
        .zip(&kernels)
        .map(|((ds, p), k)| PretrainData {
            name: &ds.name,
            prepared: p,
            kernels: k.as_ref(),
            labels: Some(&ds.labels),
        })
        .collect();

    let dir = run_dir(cfg, &["pretrain"])?;
    let history = train::pretrain(&mut model, &data, &cfg.train, |r| {
        log::info!("epoch {}: loss {:.6} lr {:.3e}", r.epoch, r.loss, r.lr);
    })?;
    write_epochs(&dir.join("epochs.jsonl"), &history)?;
    let path = dir.join(CHECKPOINT_FILE);
    model.to_checkpoint(&cfg.to_toml()).save(&path)?;
    let names: Vec<&str> = datasets.iter().map(|d| d.name.as_str()).collect();
    println!(
        "pretrained on {} for {} epochs; final loss {:.6}",
        names.join(", "),
        history.len(),
        history.last().map_or(f64::NAN, |r| r.loss)
    );
    println!("checkpoint: {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct FoldSummary {
    fold: usize,
    best_epoch: usize,
    epochs_run: usize,
    best_val_loss: f64,
    train_accuracy: f64,
    val_accuracy: f64,
    test_accuracy: f64,
}

struct CvRun {
    result: FoldResult,
    folds: Vec<(FinetuneOutcome, Model)>,
}

fn run_folds(
    cfg: &RunConfig,
    ds: &Dataset,
    prepared: &[PreparedGraph],
    kernels: Option<&KernelSet>,
    template: &Model,
    k: usize,
) -> Result<CvRun, CliError> {
    let (result, folds) = cross_validate_with(&ds.labels, k, cfg.seed, |i, split| {
        let mut model = template.clone();
        let out = train::finetune(
            &mut model,
            &ds.name,
            prepared,
            &ds.labels,
            kernels,
            split,
            Some(i),
            &cfg.train,
            |_| {},
        )?;
        log::info!(
            "fold {i}: test accuracy {:.4} after {} epochs",
            out.test_accuracy,
            out.epochs_run
        );
        Ok((out.test_accuracy, (out, model)))
    })?;
    Ok(CvRun { result, folds })
}

pub fn finetune(
    cfg: &RunConfig,
    name: &str,
    from_checkpoint: Option<&Path>,
    k: usize,
    compare_fresh: bool,
) -> Result<(), CliError> {
    if k < 3 {
        return Err(CliError::msg(format!(
            "--folds must be at least 3 (one test, one validation and at least one training fold), got {k}"
        )));
    }
    let ds = cfg.dataset(name)?.load()?;
    let prepared = prepare_dataset(&ds, &cfg.encoder, cfg.seed)?;
    let kernels = cached_kernels(cfg, &ds, cfg.train.finetune_losses.needs_kernels())?;
    let mut fresh = Model::new(cfg.encoder.clone(), &KernelKind::ALL, cfg.seed)?;
    fresh.register(&ds)?;
    let template = match from_checkpoint {
        Some(p) => {
            let mut m = load_model(cfg, p)?;
            m.register(&ds)?;
            m
        }
        None => fresh.clone(),
    };

    let dir = run_dir(cfg, &["finetune", &ds.name])?;
    let run = run_folds(cfg, &ds, &prepared, kernels.as_ref(), &template, k)?;
    write_epochs(
        &dir.join("epochs.jsonl"),
        run.folds.iter().flat_map(|(o, _)| &o.history),
    )?;

    // Keep the fold whose restored parameters validate best.
    let keep = (0..run.folds.len())
        .max_by(|&a, &b| {
            let (va, vb) = (run.folds[a].0.val_accuracy, run.folds[b].0.val_accuracy);
            va.total_cmp(&vb).then(b.cmp(&a))
        })
        .expect("at least three folds");
    run.folds[keep]
        .1
        .to_checkpoint(&cfg.to_toml())
        .save(&dir.join(CHECKPOINT_FILE))?;

    let per_fold: Vec<FoldSummary> = run
        .folds
        .iter()
        .enumerate()
        .map(|(fold, (o, _))| FoldSummary {
            fold,
            best_epoch: o.best_epoch,
            epochs_run: o.epochs_run,
            best_val_loss: o.best_val_loss,
            train_accuracy: o.train_accuracy,
            val_accuracy: o.val_accuracy,
            test_accuracy: o.test_accuracy,
        })
        .collect();
    let fresh_result = if compare_fresh {
        Some(run_folds(cfg, &ds, &prepared, kernels.as_ref(), &fresh, k)?.result)
    } else {
        None
    };
    let report = json!({
        "dataset": ds.name,
        "folds": k,
        "seed": cfg.seed,
        "from_checkpoint": from_checkpoint,
        "fold_accuracies": run.result.fold_accuracies,
        "mean": run.result.mean,
        "std": run.result.std,
        "per_fold": per_fold,
        "checkpoint_fold": keep,
        "fresh": fresh_result,
    });
    write_json(&dir.join("results.json"), &report)?;

    for (i, a) in run.result.fold_accuracies.iter().enumerate() {
        println!("fold {i}: {a:.4}");
    }
    let origin = if from_checkpoint.is_some() {
        "from checkpoint"
    } else {
        "fresh"
    };
    println!("{} {origin}: {:.4} ± {:.4}", ds.name, run.result.mean, run.result.std);
    if let Some(f) = &fresh_result {
        println!("{} fresh: {:.4} ± {:.4}", ds.name, f.mean, f.std);
    }
    println!("results: {}", dir.join("results.json").display());
    Ok(())
}

/// Graphs per forward pass when scoring a whole dataset.
const EVAL_CHUNK: usize = 256;

/// Embedding and class probabilities of one graph.
type EmbeddingRow = (Vec<f64>, Vec<f64>);

/// One row per graph, in dataset order.
fn embed_all(model: &Model, ds: &Dataset, prepared: &[PreparedGraph]) -> Result<Vec<EmbeddingRow>, CliError> {
    if !model.datasets().contains_key(&ds.name) {
        return Err(CliError::msg(format!(
            "the checkpoint has no input transform for dataset `{}`; pretrain or fine-tune on it first",
            ds.name
        )));
    }
    let shape = model.datasets()[&ds.name];
    let mut check = model.clone();
    check.register(ds).map_err(|_| {
        CliError::msg(format!(
            "dimension mismatch: the checkpoint expects {} input features and {} classes for `{}`",
            shape.input_dim, shape.num_classes, ds.name
        ))
    })?;
    let all: Vec<usize> = (0..ds.len()).collect();
    let mut rows = Vec::with_capacity(ds.len());
    for chunk in all.chunks(EVAL_CHUNK) {
        let (z, p) = model.embed(&ds.name, prepared, chunk)?;
        for r in 0..chunk.len() {
            rows.push((z.row(r).to_vec(), p.row(r).to_vec()));
        }
    }
    Ok(rows)
}

pub fn embed(cfg: &RunConfig, name: &str, checkpoint: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let model = load_model(cfg, checkpoint)?;
    let ds = cfg.dataset(name)?.load()?;
    let prepared = prepare_dataset(&ds, &cfg.encoder, cfg.seed)?;
    let rows = embed_all(&model, &ds, &prepared)?;
    let dir = run_dir(cfg, &["embed", &ds.name])?;
    let path = out.map_or_else(|| dir.join("embeddings.csv"), Path::to_path_buf);
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let width = rows.first().map_or(0, |r| r.0.len());
    let mut w = BufWriter::new(fs::File::create(&path)?);
    let header: Vec<String> = std::iter::once("graph".to_string())
        .chain((0..width).map(|j| format!("z{j}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (i, (z, _)) in rows.iter().enumerate() {
        let values: Vec<String> = z.iter().map(f64::to_string).collect();
        writeln!(w, "{i},{}", values.join(","))?;
    }
    w.flush()?;
    println!("wrote {} embeddings of width {width} to {}", rows.len(), path.display());
    Ok(())
}

pub fn eval(cfg: &RunConfig, name: &str, checkpoint: Option<&Path>, cycle_rule: bool) -> Result<(), CliError> {
    let ds = cfg.dataset(name)?.load()?;
    if ds.is_empty() {
        return Err(CliError::msg(format!("dataset `{name}` is empty")));
    }
    let counts = ds.class_counts();
    let majority = *counts.iter().max().expect("nonempty") as f64 / ds.len() as f64;
    let mut report = json!({
        "dataset": ds.name,
        "graphs": ds.len(),
        "class_counts": counts,
        "majority_accuracy": majority,
    });
    println!(
        "{}: {} graphs, majority-class accuracy {majority:.4}",
        ds.name,
        ds.len()
    );
    if cycle_rule {
        if ds.num_classes != 2 {
            return Err(CliError::msg("the cycle rule needs a two-class dataset"));
        }
        let acc = cycle_rule_accuracy(&ds);
        report["cycle_rule_accuracy"] = json!(acc);
        println!("cycle rule accuracy {acc:.4}");
    }
    if let Some(p) = checkpoint {
        let model = load_model(cfg, p)?;
        let prepared = prepare_dataset(&ds, &cfg.encoder, cfg.seed)?;
        let rows = embed_all(&model, &ds, &prepared)?;
        let hits = rows
            .iter()
            .zip(&ds.labels)
            .filter(|((_, probs), &l)| argmax(probs) == l)
            .count();
        let acc = hits as f64 / ds.len() as f64;
        report["model_accuracy"] = json!(acc);
        report["checkpoint"] = json!(p);
        println!("model accuracy {acc:.4} over all graphs");
    }
    let dir = run_dir(cfg, &["eval", &ds.name])?;
    write_json(&dir.join("eval.json"), &report)?;
    Ok(())
}
