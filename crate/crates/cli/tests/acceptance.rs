//! Acceptance run: one PASS/FAIL line per criterion. Criterion 10 and the
//! pair-accuracy check are reported without failing the run.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zsl_core::corpus::{
    balance, build_class_descriptions, class_histogram, zsl_split, ClassDescription,
};
use zsl_core::eval::{
    predict_all, read_metrics_csv, smooth, truth_of, write_metrics_csv, zsl_accuracy, MetricSeries,
};
use zsl_core::model::{train, Mode, ModelConfig, TextBatch, TrainRun};
use zsl_core::nn::{NormMode, Tape, BATCH_NORM_EPS};
use zsl_core::optim::{adagrad_step, adam_step, rmsprop_step};
use zsl_core::synth::{zipf_corpus, ZipfCorpusConfig, ZslTask, ZslTaskConfig};
use zsl_core::{
    Depth, EmbeddedSequence, ModelParams, OptimConfig, OptimKind, Stoplist, Tensor, Token,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

struct Harness {
    hard_failures: usize,
}

impl Harness {
    fn run(&mut self, id: &str, title: &str, limit: Duration, body: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let o = body();
        let took = start.elapsed();
        let in_time = took < limit;
        let pass = o.pass && in_time;
        if !pass {
            self.hard_failures += 1;
        }
        println!(
            "{} [{id}] {title}: {} ({:.2}s, limit {}s{})",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", too slow" }
        );
    }

    fn report(&self, id: &str, title: &str, o: Outcome) {
        println!(
            "{} [{id}] {title}: {} (reported only)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
}

fn scalar_step(kind: OptimKind, lr: f64, eps: f64, grads: &[f64]) -> Vec<f64> {
    let cfg = OptimConfig {
        epsilon: eps,
        ..OptimConfig::new(kind, lr)
    };
    let mut w = Tensor::scalar(0.0);
    let (mut a, mut b, mut t) = (vec![0.0], vec![0.0], 0u64);
    let mut deltas = Vec::new();
    for &g in grads {
        let before = w.item();
        let g = Tensor::scalar(g);
        match kind {
            OptimKind::Adagrad => adagrad_step(&mut w, &g, &mut a, &cfg).unwrap(),
            OptimKind::Rmsprop => rmsprop_step(&mut w, &g, &mut a, &cfg).unwrap(),
            OptimKind::Adam => adam_step(&mut w, &g, &mut a, &mut b, &mut t, &cfg).unwrap(),
        }
        deltas.push(w.item() - before);
    }
    deltas
}

fn optimizer_oracles() -> Outcome {
    let checks = [
        (
            "adagrad step 1",
            scalar_step(OptimKind::Adagrad, 0.1, 0.0, &[1.0])[0],
            -0.1,
        ),
        (
            "adagrad step 2",
            scalar_step(OptimKind::Adagrad, 0.1, 0.0, &[1.0, 1.0])[1],
            -0.1 / 2f64.sqrt(),
        ),
        (
            "rmsprop step 1",
            scalar_step(OptimKind::Rmsprop, 0.001, 0.0, &[1.0])[0],
            -0.001 / 0.1f64.sqrt(),
        ),
        (
            "adam step 1",
            scalar_step(OptimKind::Adam, 0.001, 1e-8, &[0.5])[0],
            -0.001 * 0.5 / (0.5 + 1e-8),
        ),
    ];
    let worst = checks
        .iter()
        .map(|(_, got, want)| (got - want).abs())
        .fold(0.0, f64::max);
    let bad: Vec<&str> = checks
        .iter()
        .filter(|(_, g, w)| (g - w).abs() > 1e-12)
        .map(|c| c.0)
        .collect();
    outcome(
        bad.is_empty(),
        format!(
            "max abs error {worst:.1e}{}",
            if bad.is_empty() {
                String::new()
            } else {
                format!(", off: {bad:?}")
            }
        ),
    )
}

fn adam_scale_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let lr = 0.001;
    let mut worst = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..100 {
        let mag = 10f64.powf(rng.random_range(-3.0..=3.0));
        let g = if rng.random_bool(0.5) { mag } else { -mag };
        let d = scalar_step(OptimKind::Adam, lr, 1e-8, &[g])[0].abs();
        worst = (worst.0.min(d), worst.1.max(d));
    }
    let pass = worst.0 >= 0.99 * lr && worst.1 <= lr;
    outcome(
        pass,
        format!("|Δw| range [{:.9}, {:.9}] for ν = {lr}", worst.0, worst.1),
    )
}

fn random_sequence(rng: &mut ChaCha8Rng, dim: usize, max_len: usize) -> EmbeddedSequence {
    let len = rng.random_range(1..=max_len);
    let tokens: Vec<Token> = (0..len)
        .map(|i| Token::new(&format!("w{i}")).unwrap())
        .collect();
    let rows: Vec<Vec<f64>> = (0..len)
        .map(|_| (0..dim).map(|_| rng.random_range(-0.5..0.5)).collect())
        .collect();
    EmbeddedSequence::from_rows(tokens, &rows, dim, max_len).unwrap()
}

/// Batch loss of the full model in train mode.
fn model_loss(params: &ModelParams, images: &Tensor, text: &TextBatch, labels: &[f64]) -> f64 {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let x = tape.leaf(images.clone());
    let out = params
        .forward_tape(&mut tape, &bound, x, text, Mode::Train)
        .unwrap();
    let loss = tape.bce(out.score, labels).unwrap();
    tape.value(loss).item()
}

fn full_model_gradient_check() -> Outcome {
    let (batch, seq_len, step) = (4, 6, 1e-5);
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for trial in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + trial);
        let cfg = ModelConfig {
            depth: Depth::Baseline,
            hidden: 8,
            max_seq_len: seq_len,
            seed: trial,
            ..ModelConfig::default()
        };
        let mut params = ModelParams::build(&cfg);
        for t in params.trainable_mut() {
            for v in t.data_mut() {
                *v += rng.random_range(-0.1..0.1);
            }
        }
        let images = Tensor::new(
            vec![batch, cfg.feature_dim],
            (0..batch * cfg.feature_dim)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .unwrap();
        let seqs: Vec<EmbeddedSequence> = (0..batch)
            .map(|_| random_sequence(&mut rng, cfg.embed_dim, seq_len))
            .collect();
        let text = TextBatch::per_row(&seqs.iter().collect::<Vec<_>>()).unwrap();
        let labels = [1.0, 0.0, 1.0, 0.0];

        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let x = tape.leaf(images.clone());
        let out = params
            .forward_tape(&mut tape, &bound, x, &text, Mode::Train)
            .unwrap();
        let loss = tape.bce(out.score, &labels).unwrap();
        let grads = tape.backward(loss).unwrap();
        let analytic: Vec<Tensor> = bound.vars.iter().map(|&v| grads.get(v)).collect();

        for (p, grad) in analytic.iter().enumerate() {
            for j in 0..grad.numel() {
                let original = params.trainable()[p].1.data()[j];
                params.trainable_mut()[p].data_mut()[j] = original + step;
                let up = model_loss(&params, &images, &text, &labels);
                params.trainable_mut()[p].data_mut()[j] = original - step;
                let down = model_loss(&params, &images, &text, &labels);
                params.trainable_mut()[p].data_mut()[j] = original;
                let numeric = (up - down) / (2.0 * step);
                let a = grad.data()[j];
                worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
                checked += 1;
            }
        }
    }
    outcome(
        worst < 1e-4,
        format!("max relative error {worst:.2e} over {checked} partial derivatives in 20 trials"),
    )
}

fn batch_norm_statistics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let features = 16;
    let (mut worst_mean, mut worst_var) = (0.0f64, 0.0f64);
    for batch in [2usize, 32] {
        for _ in 0..100 {
            let mut cols: Vec<Vec<f64>> = Vec::with_capacity(features);
            while cols.len() < features {
                let scale = rng.random_range(0.5..10.0);
                let shift = rng.random_range(-5.0..5.0);
                let col: Vec<f64> = (0..batch)
                    .map(|_| shift + scale * rng.random_range(-1.0..1.0))
                    .collect();
                let mean = col.iter().sum::<f64>() / batch as f64;
                let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / batch as f64;
                // Nearly constant columns are dominated by the epsilon in the denominator.
                if var >= 0.1 {
                    cols.push(col);
                }
            }
            let data: Vec<f64> = (0..batch)
                .flat_map(|r| cols.iter().map(move |c| c[r]))
                .collect();
            let mut tape = Tape::new();
            let x = tape.leaf(Tensor::new(vec![batch, features], data).unwrap());
            let g = tape.leaf(Tensor::full(&[features], 1.0));
            let b = tape.leaf(Tensor::zeros(&[features]));
            let (y, _) = tape
                .batch_norm(x, g, b, NormMode::Train, BATCH_NORM_EPS)
                .unwrap();
            let y = tape.value(y);
            for f in 0..features {
                let col: Vec<f64> = (0..batch).map(|r| y.row(r)[f]).collect();
                let mean = col.iter().sum::<f64>() / batch as f64;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / batch as f64;
                worst_mean = worst_mean.max(mean.abs());
                worst_var = worst_var.max((var - 1.0).abs());
            }
        }
    }
    outcome(
        worst_mean < 1e-9 && worst_var < 1e-4,
        format!("max |mean| {worst_mean:.1e}, max |var - 1| {worst_var:.1e}"),
    )
}

fn balancer_contract() -> Outcome {
    let ds = zipf_corpus(&ZipfCorpusConfig::default());
    let before = class_histogram(&ds);
    let first = balance(&ds, 147, 11);
    let second = balance(&ds, 147, 11);
    let after = class_histogram(&first);
    let wrong: Vec<&String> = before
        .iter()
        .filter(|(c, &n)| after.get(*c).copied().unwrap_or(0) != n.min(147))
        .map(|(c, _)| c)
        .collect();
    let capped = before.values().filter(|&&n| n > 147).count();
    outcome(
        wrong.is_empty() && first == second,
        format!(
            "{} artworks, {} classes ({capped} above the cap) → {} kept; {} classes off target; repeat identical: {}",
            ds.len(),
            before.len(),
            first.len(),
            wrong.len(),
            first == second
        ),
    )
}

struct Synthetic {
    split: zsl_core::ZslSplit,
    descs: Vec<ClassDescription>,
}

fn synthetic_task() -> Synthetic {
    let task = ZslTask::generate(&ZslTaskConfig::default());
    let descs = build_class_descriptions(&task.dataset, 25, &task.table, &Stoplist::english(), 25)
        .descriptions;
    Synthetic {
        split: zsl_split(&task.dataset, 0.3, 0),
        descs,
    }
}

fn train_synthetic(s: &Synthetic, kind: OptimKind, epochs: usize) -> TrainRun {
    let cfg = ModelConfig {
        depth: Depth::Baseline,
        epochs,
        batch_size: 128,
        optimizer: OptimConfig::new(kind, 0.001),
        ..ModelConfig::default()
    };
    train(&cfg, &s.split.train, &s.split.val, &s.descs).unwrap()
}

fn synthetic_zero_shot(s: &Synthetic) -> Outcome {
    let run = train_synthetic(s, OptimKind::Rmsprop, 500);
    let preds = predict_all(&run.params, &s.split.val, &s.descs).unwrap();
    let acc = zsl_accuracy(&preds, &truth_of(&s.split.val)).unwrap();
    outcome(
        acc >= 0.8 && s.split.heldout_classes.len() == 6,
        format!(
            "held-out top-1 accuracy {acc:.4} over {} artworks of {} unseen classes, ranked among {} (chance {:.2})",
            s.split.val.len(),
            s.split.heldout_classes.len(),
            s.descs.len(),
            1.0 / s.descs.len() as f64
        ),
    )
}

fn random_series(rng: &mut ChaCha8Rng, max_len: usize) -> MetricSeries {
    let len = rng.random_range(1..=max_len);
    let mut step = rng.random_range(0..3u64);
    let mut points = Vec::with_capacity(len);
    for _ in 0..len {
        points.push((step, rng.random_range(-1.0..1.0)));
        step += rng.random_range(1..4u64);
    }
    MetricSeries::from_points("s", points).unwrap()
}

fn smoothing_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut identity = true;
    let decay: f64 = 5.0 / 6.0;
    for _ in 0..1000 {
        let s = random_series(&mut rng, 120);
        let xs: Vec<f64> = s.values().collect();
        let got: Vec<f64> = smooth(&s, 5.0).unwrap().values().collect();
        for (t, &y) in got.iter().enumerate() {
            let weights: Vec<f64> = (0..=t).map(|i| decay.powi((t - i) as i32)).collect();
            let want = weights.iter().zip(&xs).map(|(w, x)| w * x).sum::<f64>()
                / weights.iter().sum::<f64>();
            worst = worst.max((y - want).abs());
        }
        identity &= smooth(&s, 0.0).unwrap() == s;
    }
    outcome(
        worst < 1e-12 && identity,
        format!("max deviation {worst:.1e} over 1000 series; com 0 identity: {identity}"),
    )
}

fn zsl(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_zsl"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .env_remove("ZSL_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn sweep_determinism() -> Outcome {
    let run = || -> Result<Vec<(String, Vec<u8>)>, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let d = dir.path();
        zsl(d, &["synth", "--out-dir", ".", "--seed", "5"])?;
        zsl(
            d,
            &[
                "preprocess",
                "--manifest",
                "manifest.jsonl",
                "--embeddings",
                "embeddings.txt",
                "--out",
                "pre.jsonl",
            ],
        )?;
        zsl(
            d,
            &[
                "describe",
                "--dataset",
                "pre.jsonl",
                "--embeddings",
                "embeddings.txt",
                "--out",
                "desc.jsonl",
            ],
        )?;
        zsl(
            d,
            &[
                "split",
                "--dataset",
                "pre.jsonl",
                "--seed",
                "5",
                "--train-out",
                "train.jsonl",
                "--val-out",
                "val.jsonl",
            ],
        )?;
        zsl(
            d,
            &[
                "sweep",
                "--train",
                "train.jsonl",
                "--val",
                "val.jsonl",
                "--descriptions",
                "desc.jsonl",
                "--seed",
                "5",
                "--epochs",
                "50",
                "--optimizers",
                "rmsprop,adam",
                "--lrs",
                "0.01,0.001",
                "--out-dir",
                "runs",
                "--jobs",
                "2",
            ],
        )?;
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(d.join("runs"))
            .map_err(|e| e.to_string())?
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .map(|p| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    std::fs::read(&p).unwrap(),
                )
            })
            .collect();
        files.sort();
        Ok(files)
    };
    match (run(), run()) {
        (Ok(a), Ok(b)) => outcome(
            a == b && a.len() == 4,
            format!("{} CSV files per run, identical: {}", a.len(), a == b),
        ),
        (Err(e), _) | (_, Err(e)) => outcome(false, e),
    }
}

fn csv_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut mismatches = 0;
    let mut header_ok = true;
    for i in 0..1000 {
        let len = rng.random_range(0..60);
        let mut points = Vec::with_capacity(len);
        let mut step = 0u64;
        while points.len() < len {
            let v = if i % 2 == 0 {
                f64::from_bits(rng.random())
            } else {
                rng.random_range(-1e3..1e3)
            };
            if v.is_finite() {
                points.push((step, v));
                step += rng.random_range(1..1000u64);
            }
        }
        let s = MetricSeries::from_points("s", points).unwrap();
        let mut buf = Vec::new();
        write_metrics_csv(&s, &mut buf).unwrap();
        header_ok &= buf.starts_with(b"Step,Value\n");
        let back = read_metrics_csv(&buf[..], "s").unwrap();
        let exact = back.len() == s.len()
            && back
                .points()
                .iter()
                .zip(s.points())
                .all(|(a, b)| a.0 == b.0 && a.1.to_bits() == b.1.to_bits());
        mismatches += usize::from(!exact);
    }
    outcome(
        mismatches == 0 && header_ok,
        format!("{mismatches} of 1000 series differ after the round trip; header ok: {header_ok}"),
    )
}

fn main() {
    let mut h = Harness { hard_failures: 0 };
    let secs = Duration::from_secs;
    h.run("1", "optimizer oracle suite", secs(1), optimizer_oracles);
    h.run(
        "2",
        "Adam first-step scale invariance",
        secs(1),
        adam_scale_invariance,
    );
    h.run(
        "3",
        "full-model gradient check",
        secs(60),
        full_model_gradient_check,
    );
    h.run(
        "4",
        "batch-norm train-mode statistics",
        secs(1),
        batch_norm_statistics,
    );
    h.run(
        "5",
        "balancer contract on a Zipf corpus",
        secs(10),
        balancer_contract,
    );
    let synthetic = synthetic_task();
    h.run("6", "synthetic zero-shot end to end", secs(300), || {
        synthetic_zero_shot(&synthetic)
    });
    h.run("7", "smoothing oracle", secs(60), smoothing_oracle);
    h.run(
        "8",
        "sweep determinism through the CLI",
        secs(300),
        sweep_determinism,
    );
    h.run("9", "metrics CSV round trip", secs(60), csv_round_trip);

    let rms = train_synthetic(&synthetic, OptimKind::Rmsprop, 200);
    let ada = train_synthetic(&synthetic, OptimKind::Adagrad, 200);
    let (r, a) = (rms.val_acc.last().unwrap(), ada.val_acc.last().unwrap());
    h.report(
        "10",
        "RMSProp ends at or above AdaGrad (200 epochs)",
        outcome(
            r >= a,
            format!("validation accuracy RMSProp {r:.4}, AdaGrad {a:.4}"),
        ),
    );
    let best = rms.val_acc.values().fold(f64::NEG_INFINITY, f64::max);
    h.report(
        "model",
        "validation pair accuracy above 0.9 within 200 epochs",
        outcome(
            best > 0.9,
            format!("best RMSProp validation pair accuracy {best:.4}"),
        ),
    );

    if h.hard_failures > 0 {
        println!("{} criteria failed", h.hard_failures);
        std::process::exit(1);
    }
    println!("all hard criteria passed");
}
