use std::collections::BTreeSet;

use super::Dataset;
use crate::rng::{self, purpose};

/// Train/validation partition with a set of classes never seen in training.
#[derive(Clone, Debug, PartialEq)]
pub struct ZslSplit {
    pub train: Dataset,
    pub heldout_classes: BTreeSet<String>,
    pub val: Dataset,
    pub seed: u64,
}

/// `floor(fraction × classes)`, tolerant of products that land a hair below
/// an integer (`0.29 × 100`).
pub fn heldout_count(fraction: f64, classes: usize) -> usize {
    assert!(
        (0.0..=1.0).contains(&fraction),
        "holdout fraction must lie in [0, 1]"
    );
    ((fraction * classes as f64) + 1e-9).floor() as usize
}

/// Draws the held-out classes uniformly without replacement. Any artwork
/// carrying a held-out class goes to validation, everything else to train.
pub fn zsl_split(ds: &Dataset, fraction: f64, seed: u64) -> ZslSplit {
    let classes: Vec<&String> = ds.classes().iter().collect();
    let count = heldout_count(fraction, classes.len());
    let mut rng = rng::stream(seed, purpose::SPLIT, 0);
    let heldout_classes: BTreeSet<String> =
        rand::seq::index::sample(&mut rng, classes.len(), count)
            .into_iter()
            .map(|i| classes[i].clone())
            .collect();
    let (val, train): (Vec<_>, Vec<_>) = ds
        .artworks()
        .iter()
        .cloned()
        .partition(|a| a.materials.iter().any(|m| heldout_classes.contains(m)));
    ZslSplit {
        train: Dataset::new(train),
        heldout_classes,
        val: Dataset::new(val),
        seed,
    }
}
