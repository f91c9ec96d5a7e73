//! Synthetic corpora with known structure, used by tests, benchmarks and the
//! `synth` CLI subcommand.

use std::collections::BTreeSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{Artwork, Dataset};
use crate::rng::{self, purpose, Rng};
use crate::text::EmbeddingTable;

/// Multi-label corpus whose primary labels follow a Zipf law over the classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZipfCorpusConfig {
    pub artworks: usize,
    pub classes: usize,
    pub exponent: f64,
    /// Chance that an artwork also carries a second, independently drawn class.
    pub second_label_prob: f64,
    pub feature_dim: usize,
    pub seed: u64,
}

impl Default for ZipfCorpusConfig {
    fn default() -> Self {
        ZipfCorpusConfig {
            artworks: 10_000,
            classes: 147,
            exponent: 1.0,
            second_label_prob: 0.05,
            feature_dim: 4,
            seed: 0,
        }
    }
}

pub fn class_name(i: usize) -> String {
    format!("class{i:03}")
}

pub fn zipf_corpus(cfg: &ZipfCorpusConfig) -> Dataset {
    assert!(cfg.classes >= 2, "need at least two classes");
    let mut rng = rng::stream(cfg.seed, purpose::SYNTH, 0);
    let weights: Vec<f64> = (1..=cfg.classes)
        .map(|r| (r as f64).powf(-cfg.exponent))
        .collect();
    let zipf = WeightedIndex::new(&weights).expect("positive weights");
    let artworks = (0..cfg.artworks)
        .map(|i| {
            let first = zipf.sample(&mut rng);
            let mut materials: BTreeSet<String> = [class_name(first)].into();
            if rng.random_bool(cfg.second_label_prob) {
                let mut second = zipf.sample(&mut rng);
                while second == first {
                    second = zipf.sample(&mut rng);
                }
                materials.insert(class_name(second));
            }
            Artwork {
                id: format!("art{i:06}"),
                features: (0..cfg.feature_dim)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect(),
                description: String::new(),
                materials,
                tokens: None,
            }
        })
        .collect();
    Dataset::new(artworks)
}

/// Zero-shot task with a planted cross-modal relation.
///
/// Each class has a latent prototype in a low-dimensional space. Its
/// signature words embed near a fixed linear image of the prototype, and
/// its artworks' features are a fixed linear image of the class's mean word
/// embedding plus Gaussian noise, so a map learned on some classes carries
/// over to the rest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZslTaskConfig {
    pub classes: usize,
    pub words_per_class: usize,
    pub artworks_per_class: usize,
    /// Signature words drawn per artwork description.
    pub words_per_description: usize,
    pub embed_dim: usize,
    pub feature_dim: usize,
    pub latent_dim: usize,
    /// Typical magnitude of a word-vector component.
    pub word_scale: f64,
    /// Per-word noise relative to `word_scale`.
    pub word_noise: f64,
    /// Standard deviation of the per-artwork feature noise, relative to the
    /// typical feature magnitude.
    pub feature_noise: f64,
    pub seed: u64,
}

impl Default for ZslTaskConfig {
    fn default() -> Self {
        ZslTaskConfig {
            classes: 20,
            words_per_class: 25,
            artworks_per_class: 15,
            words_per_description: 12,
            embed_dim: 100,
            feature_dim: 100,
            latent_dim: 5,
            word_scale: 0.1,
            word_noise: 0.3,
            feature_noise: 0.3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ZslTask {
    pub table: EmbeddingTable,
    pub dataset: Dataset,
    pub classes: Vec<String>,
}

fn normal(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| scale * normal(rng)).collect())
        .collect()
}

fn apply(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

const FILLER: [&str; 6] = ["the", "of", "and", "a", "with", "in"];

pub fn word_name(class: usize, word: usize) -> String {
    format!("c{class:02}w{word:02}")
}

impl ZslTask {
    pub fn generate(cfg: &ZslTaskConfig) -> Self {
        assert!(cfg.classes >= 2 && cfg.words_per_class >= 1 && cfg.latent_dim >= 1);
        let mut rng = rng::stream(cfg.seed, purpose::SYNTH, 1);
        let k = cfg.latent_dim;
        let to_words = gaussian_matrix(
            &mut rng,
            cfg.embed_dim,
            k,
            cfg.word_scale / (k as f64).sqrt(),
        );
        let to_features = gaussian_matrix(
            &mut rng,
            cfg.feature_dim,
            cfg.embed_dim,
            1.0 / (cfg.word_scale * (cfg.embed_dim as f64).sqrt()),
        );

        let mut table = EmbeddingTable::new(cfg.embed_dim);
        let mut means = Vec::with_capacity(cfg.classes);
        for c in 0..cfg.classes {
            let proto: Vec<f64> = (0..k).map(|_| normal(&mut rng)).collect();
            let centre = apply(&to_words, &proto);
            let mut mean = vec![0.0; cfg.embed_dim];
            for w in 0..cfg.words_per_class {
                let v: Vec<f64> = centre
                    .iter()
                    .map(|x| x + cfg.word_scale * cfg.word_noise * normal(&mut rng))
                    .collect();
                for (m, x) in mean.iter_mut().zip(&v) {
                    *m += x / cfg.words_per_class as f64;
                }
                table
                    .insert(&word_name(c, w), &v)
                    .expect("fresh finite word");
            }
            means.push(mean);
        }
        for f in FILLER {
            let v: Vec<f64> = (0..cfg.embed_dim)
                .map(|_| cfg.word_scale * normal(&mut rng))
                .collect();
            table.insert(f, &v).expect("fresh finite word");
        }

        let word_weights: Vec<f64> = (1..=cfg.words_per_class)
            .map(|r| 1.0 / (r as f64).sqrt())
            .collect();
        let pick_word = WeightedIndex::new(&word_weights).expect("positive weights");
        let classes: Vec<String> = (0..cfg.classes).map(class_name).collect();
        let mut artworks = Vec::with_capacity(cfg.classes * cfg.artworks_per_class);
        for (c, mean) in means.iter().enumerate() {
            let centre = apply(&to_features, mean);
            for i in 0..cfg.artworks_per_class {
                let features = centre
                    .iter()
                    .map(|x| x + cfg.feature_noise * normal(&mut rng))
                    .collect();
                let mut words = Vec::with_capacity(cfg.words_per_description + 2);
                for _ in 0..cfg.words_per_description {
                    words.push(word_name(c, pick_word.sample(&mut rng)));
                    if rng.random_bool(0.25) {
                        words.push(FILLER[rng.random_range(0..FILLER.len())].to_string());
                    }
                }
                artworks.push(Artwork {
                    id: format!("{}-{i:03}", classes[c]),
                    features,
                    description: words.join(" "),
                    materials: [classes[c].clone()].into(),
                    tokens: None,
                });
            }
        }
        ZslTask {
            table,
            dataset: Dataset::new(artworks),
            classes,
        }
    }
}
