//! The joint-embedding network and its training loop.
//!
//! Image branch: `dense(feature_dim → h)` → batch norm → `blocks × (dense(h → h) → SELU)`.
//! Text branch: `LSTM(embed_dim → h)` (final hidden state) → batch norm →
//! the same kind of blocks. The two outputs are compared with a cosine and
//! squashed with a sigmoid into a match score.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{ClassDescription, Dataset};
use crate::error::{Error, Result};
use crate::eval::{pair_accuracy, MetricSeries};
use crate::nn::layers::{BatchNormVars, DenseVars, LstmVars};
use crate::nn::{
    read_checkpoint, write_checkpoint, BatchNorm, BatchStats, Dense, Lstm, NormMode, SequenceBatch,
    Tape, Tensor, Var, BATCH_NORM_EPS, COSINE_EPS,
};
use crate::optim::{OptimConfig, OptimKind, Optimizer};
use crate::rng::{self, purpose, Rng};
use crate::text::EmbeddedSequence;

/// Network depth: how many `dense + SELU` blocks follow each branch stem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Depth {
    Baseline,
    Medium,
    Large,
}

impl Depth {
    pub const ALL: [Depth; 3] = [Depth::Baseline, Depth::Medium, Depth::Large];

    pub fn blocks(self) -> usize {
        match self {
            Depth::Baseline => 0,
            Depth::Medium => 2,
            Depth::Large => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Depth::Baseline => "baseline",
            Depth::Medium => "medium",
            Depth::Large => "large",
        }
    }

    fn from_blocks(blocks: usize) -> Option<Self> {
        Depth::ALL.into_iter().find(|d| d.blocks() == blocks)
    }
}

impl fmt::Display for Depth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Depth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Depth::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown depth {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in batch norm.
    Train,
    /// Running statistics in batch norm.
    Eval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub depth: Depth,
    pub feature_dim: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub max_seq_len: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimConfig,
    pub seed: u64,
    pub negatives_per_positive: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            depth: Depth::Baseline,
            feature_dim: 100,
            embed_dim: 100,
            hidden: 64,
            max_seq_len: 25,
            batch_size: 128,
            epochs: 1000,
            optimizer: OptimConfig::new(OptimKind::Rmsprop, 0.001),
            seed: 0,
            negatives_per_positive: 1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("feature_dim", self.feature_dim),
            ("embed_dim", self.embed_dim),
            ("hidden", self.hidden),
            ("max_seq_len", self.max_seq_len),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("negatives_per_positive", self.negatives_per_positive),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if ![32, 64, 128, 256].contains(&self.batch_size) {
            log::warn!(
                "batch size {} is outside the usual 32..256 powers of two",
                self.batch_size
            );
        }
        self.optimizer.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageBranch {
    pub dense: Dense,
    pub norm: BatchNorm,
    pub blocks: Vec<Dense>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TextBranch {
    pub lstm: Lstm,
    pub norm: BatchNorm,
    pub blocks: Vec<Dense>,
}

/// All weights of the network. The cosine head has no parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub image: ImageBranch,
    pub text: TextBranch,
}

/// Tape handles for every trainable tensor, in [`ModelParams::trainable`] order.
pub struct BoundParams {
    pub vars: Vec<Var>,
    image_dense: DenseVars,
    image_norm: BatchNormVars,
    image_blocks: Vec<DenseVars>,
    text_lstm: LstmVars,
    text_norm: BatchNormVars,
    text_blocks: Vec<DenseVars>,
}

/// Text input for a batch: the distinct sequences once, plus which of them
/// each batch row uses. Running the LSTM once per distinct description is
/// exact because every row's text output depends only on its own sequence.
#[derive(Clone, Debug)]
pub struct TextBatch {
    pub sequences: SequenceBatch,
    pub index: Vec<usize>,
}

impl TextBatch {
    /// One sequence per row, no sharing.
    pub fn per_row(seqs: &[&EmbeddedSequence]) -> Result<Self> {
        Ok(TextBatch {
            sequences: SequenceBatch::new(seqs)?,
            index: (0..seqs.len()).collect(),
        })
    }
}

pub struct Forward {
    pub score: Var,
    pub image_embedding: Var,
    pub text_embedding: Var,
    /// Image then text batch statistics, in train mode.
    pub stats: Option<(BatchStats, BatchStats)>,
}

fn blocks_forward(tape: &mut Tape, mut x: Var, blocks: &[DenseVars]) -> Result<Var> {
    for b in blocks {
        let y = tape.dense(x, b.weight, b.bias)?;
        x = tape.selu(y);
    }
    Ok(x)
}

fn norm_mode(bn: &BatchNorm, mode: Mode) -> NormMode<'_> {
    match mode {
        Mode::Train => NormMode::Train,
        Mode::Eval => NormMode::Eval {
            mean: bn.running_mean.data(),
            var: bn.running_var.data(),
        },
    }
}

impl ModelParams {
    /// Seeded initialization for `config`'s depth and sizes.
    pub fn build(config: &ModelConfig) -> Self {
        let mut rng = rng::stream(config.seed, purpose::INIT, 0);
        let h = config.hidden;
        let image = ImageBranch {
            dense: Dense::init(config.feature_dim, h, &mut rng),
            norm: BatchNorm::new(h),
            blocks: (0..config.depth.blocks())
                .map(|_| Dense::init(h, h, &mut rng))
                .collect(),
        };
        let text = TextBranch {
            lstm: Lstm::init(config.embed_dim, h, &mut rng),
            norm: BatchNorm::new(h),
            blocks: (0..config.depth.blocks())
                .map(|_| Dense::init(h, h, &mut rng))
                .collect(),
        };
        ModelParams { image, text }
    }

    pub fn hidden(&self) -> usize {
        self.image.dense.weight.shape()[1]
    }

    pub fn feature_dim(&self) -> usize {
        self.image.dense.weight.shape()[0]
    }

    pub fn embed_dim(&self) -> usize {
        self.text.lstm.w_input.shape()[0]
    }

    pub fn depth(&self) -> Depth {
        Depth::from_blocks(self.image.blocks.len()).expect("block count of a known depth")
    }

    /// Trainable tensors with their checkpoint names.
    pub fn trainable(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![
            ("image.dense.weight".to_string(), &self.image.dense.weight),
            ("image.dense.bias".to_string(), &self.image.dense.bias),
            ("image.norm.gamma".to_string(), &self.image.norm.gamma),
            ("image.norm.beta".to_string(), &self.image.norm.beta),
        ];
        for (i, b) in self.image.blocks.iter().enumerate() {
            out.push((format!("image.block{i}.weight"), &b.weight));
            out.push((format!("image.block{i}.bias"), &b.bias));
        }
        out.extend([
            ("text.lstm.w_input".to_string(), &self.text.lstm.w_input),
            (
                "text.lstm.w_recurrent".to_string(),
                &self.text.lstm.w_recurrent,
            ),
            ("text.lstm.bias".to_string(), &self.text.lstm.bias),
            ("text.norm.gamma".to_string(), &self.text.norm.gamma),
            ("text.norm.beta".to_string(), &self.text.norm.beta),
        ]);
        for (i, b) in self.text.blocks.iter().enumerate() {
            out.push((format!("text.block{i}.weight"), &b.weight));
            out.push((format!("text.block{i}.bias"), &b.bias));
        }
        out
    }

    /// Same order as [`ModelParams::trainable`].
    pub fn trainable_mut(&mut self) -> Vec<&mut Tensor> {
        let ModelParams { image, text } = self;
        let mut out = vec![
            &mut image.dense.weight,
            &mut image.dense.bias,
            &mut image.norm.gamma,
            &mut image.norm.beta,
        ];
        for b in &mut image.blocks {
            out.push(&mut b.weight);
            out.push(&mut b.bias);
        }
        out.extend([
            &mut text.lstm.w_input,
            &mut text.lstm.w_recurrent,
            &mut text.lstm.bias,
            &mut text.norm.gamma,
            &mut text.norm.beta,
        ]);
        for b in &mut text.blocks {
            out.push(&mut b.weight);
            out.push(&mut b.bias);
        }
        out
    }

    /// Every tensor, trainable ones followed by batch-norm running statistics.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = self.trainable();
        out.extend([
            (
                "image.norm.running_mean".to_string(),
                &self.image.norm.running_mean,
            ),
            (
                "image.norm.running_var".to_string(),
                &self.image.norm.running_var,
            ),
            (
                "text.norm.running_mean".to_string(),
                &self.text.norm.running_mean,
            ),
            (
                "text.norm.running_var".to_string(),
                &self.text.norm.running_var,
            ),
        ]);
        out
    }

    pub fn param_count(&self) -> usize {
        self.trainable().iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        let image_dense = self.image.dense.bind(tape);
        let image_norm = self.image.norm.bind(tape);
        let image_blocks: Vec<DenseVars> = self.image.blocks.iter().map(|b| b.bind(tape)).collect();
        let text_lstm = self.text.lstm.bind(tape);
        let text_norm = self.text.norm.bind(tape);
        let text_blocks: Vec<DenseVars> = self.text.blocks.iter().map(|b| b.bind(tape)).collect();
        let mut vars = vec![
            image_dense.weight,
            image_dense.bias,
            image_norm.gamma,
            image_norm.beta,
        ];
        vars.extend(image_blocks.iter().flat_map(|b| [b.weight, b.bias]));
        vars.extend([
            text_lstm.w_input,
            text_lstm.w_recurrent,
            text_lstm.bias,
            text_norm.gamma,
            text_norm.beta,
        ]);
        vars.extend(text_blocks.iter().flat_map(|b| [b.weight, b.bias]));
        BoundParams {
            vars,
            image_dense,
            image_norm,
            image_blocks,
            text_lstm,
            text_norm,
            text_blocks,
        }
    }

    /// Image branch for `images: B × feature_dim`.
    pub fn image_branch(
        &self,
        tape: &mut Tape,
        p: &BoundParams,
        images: Var,
        mode: Mode,
    ) -> Result<(Var, Option<BatchStats>)> {
        let x = tape.dense(images, p.image_dense.weight, p.image_dense.bias)?;
        let (x, stats) = tape.batch_norm(
            x,
            p.image_norm.gamma,
            p.image_norm.beta,
            norm_mode(&self.image.norm, mode),
            BATCH_NORM_EPS,
        )?;
        Ok((blocks_forward(tape, x, &p.image_blocks)?, stats))
    }

    /// Text branch; the output has one row per entry of `text.index`.
    pub fn text_branch(
        &self,
        tape: &mut Tape,
        p: &BoundParams,
        text: &TextBatch,
        mode: Mode,
    ) -> Result<(Var, Option<BatchStats>)> {
        let h = tape.lstm(
            &text.sequences,
            p.text_lstm.w_input,
            p.text_lstm.w_recurrent,
            p.text_lstm.bias,
        )?;
        let h = tape.gather_rows(h, &text.index)?;
        let (x, stats) = tape.batch_norm(
            h,
            p.text_norm.gamma,
            p.text_norm.beta,
            norm_mode(&self.text.norm, mode),
            BATCH_NORM_EPS,
        )?;
        Ok((blocks_forward(tape, x, &p.text_blocks)?, stats))
    }

    /// `sigmoid(cosine(image_branch, text_branch))` recorded on `tape`.
    pub fn forward_tape(
        &self,
        tape: &mut Tape,
        p: &BoundParams,
        images: Var,
        text: &TextBatch,
        mode: Mode,
    ) -> Result<Forward> {
        let rows = tape.value(images).rows();
        if text.index.len() != rows {
            return Err(Error::Shape {
                op: "forward",
                lhs: vec![rows],
                rhs: vec![text.index.len()],
            });
        }
        let (img, img_stats) = self.image_branch(tape, p, images, mode)?;
        let (txt, txt_stats) = self.text_branch(tape, p, text, mode)?;
        let score = score_head(tape, img, txt)?;
        Ok(Forward {
            score,
            image_embedding: img,
            text_embedding: txt,
            stats: img_stats.zip(txt_stats),
        })
    }

    /// Match scores in (0, 1) for `images: B × feature_dim` against one
    /// description per row.
    pub fn forward(
        &self,
        images: &Tensor,
        descs: &[&EmbeddedSequence],
        mode: Mode,
    ) -> Result<Tensor> {
        let text = TextBatch::per_row(descs)?;
        let mut tape = Tape::new();
        let p = self.bind(&mut tape);
        let x = tape.leaf(images.clone());
        let out = self.forward_tape(&mut tape, &p, x, &text, mode)?;
        Ok(tape.value(out.score).clone())
    }

    /// Eval-mode image embeddings, one row per feature vector.
    pub fn embed_images(&self, features: &[&[f64]]) -> Result<Tensor> {
        let dim = self.feature_dim();
        if let Some(bad) = features.iter().find(|f| f.len() != dim) {
            return Err(Error::Shape {
                op: "embed_images",
                lhs: vec![dim],
                rhs: vec![bad.len()],
            });
        }
        let images = Tensor::new(vec![features.len(), dim], features.concat())?;
        let mut tape = Tape::new();
        let p = self.bind(&mut tape);
        let x = tape.leaf(images);
        let (y, _) = self.image_branch(&mut tape, &p, x, Mode::Eval)?;
        Ok(tape.value(y).clone())
    }

    /// Eval-mode text embeddings, one row per description.
    pub fn embed_descriptions(&self, descs: &[&EmbeddedSequence]) -> Result<Tensor> {
        let text = TextBatch::per_row(descs)?;
        let mut tape = Tape::new();
        let p = self.bind(&mut tape);
        let (y, _) = self.text_branch(&mut tape, &p, &text, Mode::Eval)?;
        Ok(tape.value(y).clone())
    }

    pub fn update_running_stats(&mut self, image: &BatchStats, text: &BatchStats) {
        self.image.norm.update_running(image);
        self.text.norm.update_running(text);
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        let named = self.named_tensors();
        write_checkpoint(out, named.iter().map(|(n, t)| (n.as_str(), *t)))
    }

    pub fn save_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.save(std::io::BufWriter::new(file))
    }

    /// Rebuilds parameters from a checkpoint; depth and sizes are inferred
    /// from the stored names and shapes.
    pub fn load<R: Read>(input: R) -> Result<Self> {
        let mut records: HashMap<String, Tensor> = read_checkpoint(input)?.into_iter().collect();
        let mut take = |name: &str| {
            records
                .remove(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing {name}")))
        };
        let dense = |w: Tensor, b: Tensor| Dense { weight: w, bias: b };
        let image_dense = dense(take("image.dense.weight")?, take("image.dense.bias")?);
        let image_norm = BatchNorm {
            gamma: take("image.norm.gamma")?,
            beta: take("image.norm.beta")?,
            running_mean: take("image.norm.running_mean")?,
            running_var: take("image.norm.running_var")?,
        };
        let lstm = Lstm {
            w_input: take("text.lstm.w_input")?,
            w_recurrent: take("text.lstm.w_recurrent")?,
            bias: take("text.lstm.bias")?,
        };
        let text_norm = BatchNorm {
            gamma: take("text.norm.gamma")?,
            beta: take("text.norm.beta")?,
            running_mean: take("text.norm.running_mean")?,
            running_var: take("text.norm.running_var")?,
        };
        let mut image_blocks = Vec::new();
        let mut text_blocks = Vec::new();
        for (branch, blocks) in [("image", &mut image_blocks), ("text", &mut text_blocks)] {
            let mut i = 0;
            while let Ok(w) = take(&format!("{branch}.block{i}.weight")) {
                blocks.push(dense(w, take(&format!("{branch}.block{i}.bias"))?));
                i += 1;
            }
        }
        if let Some(extra) = records.keys().next() {
            return Err(Error::Checkpoint(format!("unexpected tensor {extra}")));
        }
        let params = ModelParams {
            image: ImageBranch {
                dense: image_dense,
                norm: image_norm,
                blocks: image_blocks,
            },
            text: TextBranch {
                lstm,
                norm: text_norm,
                blocks: text_blocks,
            },
        };
        params.check_shapes()?;
        Ok(params)
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::load(std::io::BufReader::new(file))
    }

    fn check_shapes(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Checkpoint(format!("inconsistent shape for {what}")));
        let w = self.image.dense.weight.shape();
        if w.len() != 2 {
            return bad("image.dense.weight");
        }
        let h = w[1];
        let vec_h = [h];
        if self.image.dense.bias.shape() != vec_h {
            return bad("image.dense.bias");
        }
        for (name, bn) in [
            ("image.norm", &self.image.norm),
            ("text.norm", &self.text.norm),
        ] {
            for t in [&bn.gamma, &bn.beta, &bn.running_mean, &bn.running_var] {
                if t.shape() != vec_h {
                    return bad(name);
                }
            }
        }
        let l = &self.text.lstm;
        if l.w_input.shape().len() != 2
            || l.w_input.shape()[1] != 4 * h
            || l.w_recurrent.shape() != [h, 4 * h]
            || l.bias.shape() != [4 * h]
        {
            return bad("text.lstm");
        }
        if self.image.blocks.len() != self.text.blocks.len()
            || Depth::from_blocks(self.image.blocks.len()).is_none()
        {
            return bad("blocks");
        }
        for b in self.image.blocks.iter().chain(&self.text.blocks) {
            if b.weight.shape() != [h, h] || b.bias.shape() != vec_h {
                return bad("block");
            }
        }
        Ok(())
    }
}

/// `sigmoid(cosine(u, v))` per row.
pub fn score_head(tape: &mut Tape, image: Var, text: Var) -> Result<Var> {
    let c = tape.cosine(image, text, COSINE_EPS)?;
    Ok(tape.sigmoid(c))
}

/// A labelled (artwork, class description) pair; indices point into the
/// dataset and the description list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pair {
    pub artwork: usize,
    pub class: usize,
    pub positive: bool,
}

/// Positive pairs for every described material of every artwork, each
/// followed by `negatives_per_positive` classes drawn uniformly (with
/// replacement) from `candidates` minus the artwork's own materials; the
/// whole list is then shuffled. `candidates` index into `descs`.
pub fn make_pairs_among(
    ds: &Dataset,
    descs: &[ClassDescription],
    candidates: &[usize],
    negatives_per_positive: usize,
    rng: &mut Rng,
) -> Result<Vec<Pair>> {
    let index: HashMap<&str, usize> = descs
        .iter()
        .enumerate()
        .map(|(i, d)| (d.material.as_str(), i))
        .collect();
    let mut pairs = Vec::new();
    let mut negatives = Vec::new();
    for (ai, a) in ds.artworks().iter().enumerate() {
        let positives: Vec<usize> = a
            .materials
            .iter()
            .filter_map(|m| index.get(m.as_str()).copied())
            .collect();
        if positives.is_empty() {
            log::warn!("artwork {:?} has no described material; skipped", a.id);
            continue;
        }
        negatives.clear();
        negatives.extend(
            candidates
                .iter()
                .copied()
                .filter(|&c| !a.has_material(&descs[c].material)),
        );
        if negatives.is_empty() && negatives_per_positive > 0 {
            return Err(Error::NoNegatives(a.id.clone()));
        }
        for &p in &positives {
            pairs.push(Pair {
                artwork: ai,
                class: p,
                positive: true,
            });
            for _ in 0..negatives_per_positive {
                let n = negatives[rng.random_range(0..negatives.len())];
                pairs.push(Pair {
                    artwork: ai,
                    class: n,
                    positive: false,
                });
            }
        }
    }
    pairs.shuffle(rng);
    Ok(pairs)
}

/// [`make_pairs_among`] with negatives drawn from the dataset's own described classes.
pub fn make_pairs(
    ds: &Dataset,
    descs: &[ClassDescription],
    negatives_per_positive: usize,
    seed: u64,
) -> Result<Vec<Pair>> {
    let mut rng = rng::stream(seed, purpose::PAIRS, 0);
    make_pairs_among(
        ds,
        descs,
        &classes_of(ds, descs),
        negatives_per_positive,
        &mut rng,
    )
}

/// Indices of the descriptions whose material occurs in `ds`.
pub fn classes_of(ds: &Dataset, descs: &[ClassDescription]) -> Vec<usize> {
    descs
        .iter()
        .enumerate()
        .filter(|(_, d)| ds.classes().contains(&d.material))
        .map(|(i, _)| i)
        .collect()
}

/// Minibatch boundaries. The trailing partial batch is kept, except that a
/// single leftover row joins the previous batch (train-mode batch norm needs
/// two rows).
pub fn batch_ranges(len: usize, batch_size: usize) -> Vec<std::ops::Range<usize>> {
    let mut out: Vec<std::ops::Range<usize>> = (0..len)
        .step_by(batch_size)
        .map(|s| s..(s + batch_size).min(len))
        .collect();
    if out.len() >= 2 && out.last().is_some_and(|r| r.len() == 1) {
        let last = out.pop().expect("checked length");
        out.last_mut().expect("checked length").end = last.end;
    }
    out
}

/// Result of a training run.
#[derive(Clone, Debug)]
pub struct TrainRun {
    pub config: ModelConfig,
    /// Mean training loss per epoch.
    pub train_loss: MetricSeries,
    /// Validation pair accuracy per epoch (NaN when there is no validation data).
    pub val_acc: MetricSeries,
    pub params: ModelParams,
    /// Optimizer steps taken.
    pub steps: usize,
}

/// Builds the batch inputs for `pairs` and returns `(images, text, labels)`.
pub fn batch_inputs(
    ds: &Dataset,
    descs: &[ClassDescription],
    pairs: &[Pair],
) -> Result<(Tensor, TextBatch, Vec<f64>)> {
    let dim = ds.feature_dim().ok_or(Error::Empty("dataset"))?;
    let mut images = Vec::with_capacity(pairs.len() * dim);
    let mut slot: HashMap<usize, usize> = HashMap::new();
    let mut unique: Vec<&EmbeddedSequence> = Vec::new();
    let mut index = Vec::with_capacity(pairs.len());
    for p in pairs {
        images.extend_from_slice(&ds.artworks()[p.artwork].features);
        let s = *slot.entry(p.class).or_insert_with(|| {
            unique.push(&descs[p.class].embedded);
            unique.len() - 1
        });
        index.push(s);
    }
    let labels = pairs
        .iter()
        .map(|p| if p.positive { 1.0 } else { 0.0 })
        .collect();
    let text = TextBatch {
        sequences: SequenceBatch::new(&unique)?,
        index,
    };
    Ok((Tensor::new(vec![pairs.len(), dim], images)?, text, labels))
}

/// One optimizer step on a batch; returns the batch loss.
pub fn train_step(
    params: &mut ModelParams,
    optimizer: &mut Optimizer,
    ds: &Dataset,
    descs: &[ClassDescription],
    pairs: &[Pair],
) -> Result<f64> {
    let (images, text, labels) = batch_inputs(ds, descs, pairs)?;
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let x = tape.leaf(images);
    let out = params.forward_tape(&mut tape, &bound, x, &text, Mode::Train)?;
    let loss = tape.bce(out.score, &labels)?;
    let loss_value = tape.value(loss).item();
    let grads = tape.backward(loss)?;
    let grads: Vec<Tensor> = bound.vars.iter().map(|&v| grads.get(v)).collect();
    optimizer.step(params.trainable_mut(), &grads)?;
    let (img_stats, txt_stats) = out.stats.expect("train mode yields batch statistics");
    params.update_running_stats(&img_stats, &txt_stats);
    Ok(loss_value)
}

pub fn train(
    config: &ModelConfig,
    train_ds: &Dataset,
    val_ds: &Dataset,
    descs: &[ClassDescription],
) -> Result<TrainRun> {
    train_with_progress(config, train_ds, val_ds, descs, |_, _, _| {})
}

/// Trains for `config.epochs` epochs. `progress(epoch, loss, val_acc)` is
/// called after each epoch (1-based).
pub fn train_with_progress(
    config: &ModelConfig,
    train_ds: &Dataset,
    val_ds: &Dataset,
    descs: &[ClassDescription],
    mut progress: impl FnMut(usize, f64, f64),
) -> Result<TrainRun> {
    config.validate()?;
    if train_ds.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    for ds in [train_ds, val_ds] {
        if let Some(bad) = ds
            .artworks()
            .iter()
            .find(|a| a.features.len() != config.feature_dim)
        {
            return Err(Error::Config(format!(
                "artwork {:?} has {} features, the model expects {}",
                bad.id,
                bad.features.len(),
                config.feature_dim
            )));
        }
    }
    if let Some(bad) = descs.iter().find(|d| d.embedded.dim() != config.embed_dim) {
        return Err(Error::Config(format!(
            "description of {:?} has dimension {}, the model expects {}",
            bad.material,
            bad.embedded.dim(),
            config.embed_dim
        )));
    }

    let mut params = ModelParams::build(config);
    let mut optimizer = Optimizer::new(
        config.optimizer,
        params.trainable().into_iter().map(|(_, t)| t),
    )?;

    let val_pairs = if val_ds.is_empty() {
        Vec::new()
    } else {
        let mut candidates = classes_of(val_ds, descs);
        if candidates.len() < 2 {
            candidates = (0..descs.len()).collect();
        }
        let mut rng = rng::stream(config.seed, purpose::VAL_PAIRS, 0);
        make_pairs_among(
            val_ds,
            descs,
            &candidates,
            config.negatives_per_positive,
            &mut rng,
        )?
    };

    let mut train_loss = MetricSeries::new("train_loss");
    let mut val_acc = MetricSeries::new("val_acc");
    let train_classes = classes_of(train_ds, descs);
    let mut steps = 0;
    for epoch in 1..=config.epochs {
        let mut rng = rng::stream(config.seed, purpose::PAIRS, epoch as u64);
        let pairs = make_pairs_among(
            train_ds,
            descs,
            &train_classes,
            config.negatives_per_positive,
            &mut rng,
        )?;
        if pairs.len() < 2 {
            return Err(Error::EmptyTrainSet);
        }
        let mut total = 0.0;
        for range in batch_ranges(pairs.len(), config.batch_size) {
            let n = range.len() as f64;
            total += n * train_step(&mut params, &mut optimizer, train_ds, descs, &pairs[range])?;
            steps += 1;
        }
        let loss = total / pairs.len() as f64;
        let acc = if val_pairs.is_empty() {
            f64::NAN
        } else {
            pair_accuracy(&params, val_ds, descs, &val_pairs)?
        };
        train_loss.push(epoch as u64, loss)?;
        val_acc.push(epoch as u64, acc)?;
        progress(epoch, loss, acc);
    }

    Ok(TrainRun {
        config: config.clone(),
        train_loss,
        val_acc,
        params,
        steps,
    })
}
