use std::io::Write;
use std::path::Path;

use serde_json::json;
use zsl_core::corpus::{
    self, build_class_descriptions, load_manifest_file, write_descriptions, write_manifest,
    zsl_split,
};
use zsl_core::eval::{
    self, predict_all, truth_of, write_metrics_csv, write_predictions_csv, zsl_accuracy_with,
    ZslMetric,
};
use zsl_core::model::{train_with_progress, ModelConfig};
use zsl_core::synth::{zipf_corpus, ZipfCorpusConfig, ZslTask, ZslTaskConfig};
use zsl_core::text::{remove_stopwords, tokenize};
use zsl_core::{
    Artwork, ClassDescription, Dataset, EmbeddingTable, ModelParams, OptimConfig, Stoplist,
};

use crate::manifest::write_atomic;
use crate::{
    BalanceArgs, CliError, CliResult, DescribeArgs, EvaluateArgs, MetricArg, PreprocessArgs,
    RunManifest, SmoothArgs, SplitArgs, SynthArgs, SynthKind, TrainArgs, TrainCommon,
};

fn stoplist(path: Option<&Path>) -> CliResult<Stoplist> {
    Ok(match path {
        Some(p) => Stoplist::from_file(p)?,
        None => Stoplist::english(),
    })
}

fn inputs<'a>(named: &[(&'a str, Option<&'a Path>)]) -> Vec<(&'a str, &'a Path)> {
    named
        .iter()
        .filter_map(|&(n, p)| p.map(|p| (n, p)))
        .collect()
}

fn write_dataset(ds: &Dataset, path: &Path) -> CliResult {
    write_atomic(path, |w| Ok(write_manifest(ds, w)?))
}

pub fn preprocess(a: &PreprocessArgs) -> CliResult {
    let table = EmbeddingTable::from_file(&a.embeddings, a.embed_dim)?;
    let stop = stoplist(a.stopwords.as_deref())?;
    let ds = load_manifest_file(&a.manifest, a.feature_dim)?;
    let config = json!({ "feature_dim": a.feature_dim, "embed_dim": a.embed_dim });
    let run = RunManifest::new(
        "preprocess",
        &config,
        &inputs(&[
            ("manifest", Some(&a.manifest)),
            ("embeddings", Some(&a.embeddings)),
            ("stopwords", a.stopwords.as_deref()),
        ]),
    )?;
    run.write(&RunManifest::path_for(&a.out))?;

    let total = ds.len();
    let mut skipped = Vec::new();
    let mut kept = Vec::with_capacity(total);
    for mut art in ds.into_artworks() {
        let tokens: Vec<_> = remove_stopwords(&tokenize(&art.description), &stop)
            .into_iter()
            .filter(|t| table.contains(t.as_str()))
            .collect();
        if tokens.is_empty() {
            skipped.push(art.id);
        } else {
            art.tokens = Some(tokens);
            kept.push(art);
        }
    }
    let out = Dataset::new(kept);
    write_dataset(&out, &a.out)?;
    eprintln!(
        "preprocess: {} of {total} artworks kept, {} skipped (no usable description words)",
        out.len(),
        skipped.len()
    );
    for id in &skipped {
        log::info!("skipped artwork {id:?}");
    }
    Ok(())
}

pub fn balance(a: &BalanceArgs) -> CliResult {
    let ds = load_manifest_file(&a.dataset, a.feature_dim)?;
    let config = json!({ "cap": a.cap, "seed": a.seed.seed, "feature_dim": a.feature_dim });
    RunManifest::new("balance", &config, &[("dataset", &a.dataset)])?
        .write(&RunManifest::path_for(&a.out))?;
    if a.cap == 0 {
        return Err(CliError::Usage("--cap must be positive".into()));
    }
    let out = corpus::balance(&ds, a.cap, a.seed.seed);
    write_dataset(&out, &a.out)?;
    eprintln!(
        "balance: {} of {} artworks kept across {} classes",
        out.len(),
        ds.len(),
        out.classes().len()
    );
    Ok(())
}

pub fn describe(a: &DescribeArgs) -> CliResult {
    if a.k == 0 || a.max_len == 0 {
        return Err(CliError::Usage("--k and --max-len must be positive".into()));
    }
    let table = EmbeddingTable::from_file(&a.embeddings, a.embed_dim)?;
    let stop = stoplist(a.stopwords.as_deref())?;
    let ds = load_manifest_file(&a.dataset, a.feature_dim)?;
    let config = json!({ "k": a.k, "max_len": a.max_len, "embed_dim": a.embed_dim, "feature_dim": a.feature_dim });
    RunManifest::new(
        "describe",
        &config,
        &inputs(&[
            ("dataset", Some(&a.dataset)),
            ("embeddings", Some(&a.embeddings)),
            ("stopwords", a.stopwords.as_deref()),
        ]),
    )?
    .write(&RunManifest::path_for(&a.out))?;
    let set = build_class_descriptions(&ds, a.k, &table, &stop, a.max_len);
    write_atomic(&a.out, |w| Ok(write_descriptions(&set.descriptions, w)?))?;
    eprintln!(
        "describe: {} materials described, {} without usable words",
        set.descriptions.len(),
        set.unusable.len()
    );
    Ok(())
}

pub fn split(a: &SplitArgs) -> CliResult {
    if !(0.0..=1.0).contains(&a.fraction) {
        return Err(CliError::Usage(format!(
            "--fraction must lie in [0, 1], got {}",
            a.fraction
        )));
    }
    let ds = load_manifest_file(&a.dataset, a.feature_dim)?;
    let config =
        json!({ "fraction": a.fraction, "seed": a.seed.seed, "feature_dim": a.feature_dim });
    RunManifest::new("split", &config, &[("dataset", &a.dataset)])?
        .write(&RunManifest::path_for(&a.train_out))?;
    let s = zsl_split(&ds, a.fraction, a.seed.seed);
    write_dataset(&s.train, &a.train_out)?;
    write_dataset(&s.val, &a.val_out)?;
    if let Some(path) = &a.heldout_out {
        write_atomic(path, |w| {
            for c in &s.heldout_classes {
                writeln!(w, "{c}").map_err(|e| CliError::io(path, e))?;
            }
            Ok(())
        })?;
    }
    eprintln!(
        "split: {} classes held out; {} train and {} validation artworks",
        s.heldout_classes.len(),
        s.train.len(),
        s.val.len()
    );
    Ok(())
}

/// Loaded inputs of a training run.
pub struct TrainingData {
    pub train: Dataset,
    pub val: Dataset,
    pub descriptions: Vec<ClassDescription>,
}

impl TrainingData {
    pub fn load(c: &TrainCommon) -> CliResult<Self> {
        let train = load_manifest_file(&c.train, c.feature_dim)?;
        let val = match &c.val {
            Some(p) => load_manifest_file(p, c.feature_dim)?,
            None => Dataset::new(Vec::<Artwork>::new()),
        };
        let descriptions = corpus::read_descriptions_file(&c.descriptions)?;
        if descriptions.is_empty() {
            return Err(zsl_core::Error::Empty("description file").into());
        }
        Ok(TrainingData {
            train,
            val,
            descriptions,
        })
    }

    pub fn config(
        &self,
        c: &TrainCommon,
        optimizer: OptimConfig,
        batch_size: usize,
        depth: zsl_core::Depth,
    ) -> ModelConfig {
        let first = &self.descriptions[0].embedded;
        ModelConfig {
            depth,
            feature_dim: c.feature_dim,
            embed_dim: first.dim(),
            hidden: c.hidden,
            max_seq_len: first.max_len(),
            batch_size,
            epochs: c.epochs,
            optimizer,
            seed: c.seed.seed,
            negatives_per_positive: c.negatives,
        }
    }
}

pub fn training_inputs(c: &TrainCommon) -> Vec<(&str, &Path)> {
    inputs(&[
        ("train", Some(&c.train)),
        ("val", c.val.as_deref()),
        ("descriptions", Some(&c.descriptions)),
    ])
}

pub const CHECKPOINT_FILE: &str = "checkpoint.zslm";

pub fn train(a: &TrainArgs) -> CliResult {
    let data = TrainingData::load(&a.common)?;
    let optimizer = a.common.optimizer(a.optimizer, a.lr);
    let config = data.config(&a.common, optimizer, a.batch_size, a.depth.into());
    config.validate()?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    RunManifest::new("train", &config, &training_inputs(&a.common))?
        .write(&a.out_dir.join("run.json"))?;

    let every = (config.epochs / 20).max(1);
    let run = train_with_progress(
        &config,
        &data.train,
        &data.val,
        &data.descriptions,
        |epoch, loss, acc| {
            if epoch % every == 0 || epoch == config.epochs {
                log::info!("epoch {epoch}: train loss {loss:.5}, validation accuracy {acc:.4}");
            }
        },
    )?;
    write_atomic(&a.out_dir.join(CHECKPOINT_FILE), |w| {
        Ok(run.params.save(w)?)
    })?;
    for series in [&run.train_loss, &run.val_acc] {
        let path = a.out_dir.join(format!("{}.csv", series.name));
        write_atomic(&path, |w| Ok(write_metrics_csv(series, w)?))?;
    }
    eprintln!(
        "train: {} parameters, {} steps, final train loss {:.5}, validation accuracy {:.4}",
        run.params.param_count(),
        run.steps,
        run.train_loss.last().unwrap_or(f64::NAN),
        run.val_acc.last().unwrap_or(f64::NAN)
    );
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs) -> CliResult {
    let params = ModelParams::load_file(&a.checkpoint)?;
    let ds = load_manifest_file(&a.manifest, a.feature_dim)?;
    let descs = corpus::read_descriptions_file(&a.descriptions)?;
    if ds.feature_dim().is_some_and(|d| d != params.feature_dim()) {
        return Err(zsl_core::Error::Config(format!(
            "the checkpoint expects {} features",
            params.feature_dim()
        ))
        .into());
    }
    if let Some(d) = descs
        .iter()
        .find(|d| d.embedded.dim() != params.embed_dim())
    {
        return Err(zsl_core::Error::Config(format!(
            "description of {:?} has dimension {}, the checkpoint expects {}",
            d.material,
            d.embedded.dim(),
            params.embed_dim()
        ))
        .into());
    }
    let metric = match a.metric {
        MetricArg::Top1Hit => ZslMetric::Top1Hit,
        MetricArg::ExactSet => ZslMetric::ExactSet,
    };
    let config =
        json!({ "metric": metric.to_string(), "top_k": a.top_k, "feature_dim": a.feature_dim });
    RunManifest::new(
        "evaluate",
        &config,
        &[
            ("checkpoint", &a.checkpoint),
            ("manifest", &a.manifest),
            ("descriptions", &a.descriptions),
        ],
    )?
    .write(&RunManifest::path_for(&a.out))?;
    let preds = predict_all(&params, &ds, &descs)?;
    write_atomic(&a.out, |w| Ok(write_predictions_csv(&preds, a.top_k, w)?))?;
    let acc = zsl_accuracy_with(&preds, &truth_of(&ds), metric)?;
    println!("{metric} accuracy: {acc}");
    Ok(())
}

pub fn smooth(a: &SmoothArgs) -> CliResult {
    let series = eval::read_metrics_csv_file(&a.input)?;
    let smoothed = eval::smooth(&series, a.com)?;
    write_atomic(&a.out, |w| Ok(write_metrics_csv(&smoothed, w)?))
}

pub fn synth(a: &SynthArgs) -> CliResult {
    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    let manifest = a.out_dir.join("manifest.jsonl");
    match a.kind {
        SynthKind::Zsl => {
            let task = ZslTask::generate(&ZslTaskConfig {
                seed: a.seed.seed,
                ..ZslTaskConfig::default()
            });
            write_dataset(&task.dataset, &manifest)?;
            let path = a.out_dir.join("embeddings.txt");
            write_atomic(&path, |w| Ok(task.table.write(w)?))?;
        }
        SynthKind::Zipf => {
            let ds = zipf_corpus(&ZipfCorpusConfig {
                seed: a.seed.seed,
                feature_dim: 100,
                ..ZipfCorpusConfig::default()
            });
            write_dataset(&ds, &manifest)?;
        }
    }
    Ok(())
}
