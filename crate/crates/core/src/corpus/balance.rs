use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::{class_histogram, Dataset};
use crate::rng::{self, purpose};

/// Undersamples so that each class is carried by at most `cap` artworks.
///
/// Classes are visited from rarest to most frequent (ties by name). For each
/// class, artworks already selected for a rarer class count toward its
/// quota `min(cap, count)`; the remainder is drawn at random from its
/// unselected artworks, considering only artworks whose other classes still
/// have room, so no class ever exceeds its own quota. The result keeps the
/// input order and contains every selected artwork once.
pub fn balance(ds: &Dataset, cap: usize, seed: u64) -> Dataset {
    assert!(cap >= 1, "balance cap must be at least 1");
    let hist = class_histogram(ds);
    let quota: BTreeMap<&str, usize> = hist
        .iter()
        .map(|(m, &n)| (m.as_str(), n.min(cap)))
        .collect();
    let mut order: Vec<(&str, usize)> = hist.iter().map(|(m, &n)| (m.as_str(), n)).collect();
    order.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(b.0)));

    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, a) in ds.artworks().iter().enumerate() {
        for m in &a.materials {
            members.entry(m.as_str()).or_default().push(i);
        }
    }

    let mut rng = rng::stream(seed, purpose::BALANCE, 0);
    let mut selected = vec![false; ds.len()];
    let mut carried: BTreeMap<&str, usize> = BTreeMap::new();

    for (class, _) in order {
        let have = carried.get(class).copied().unwrap_or(0);
        let need = quota[class].saturating_sub(have);
        if need == 0 {
            continue;
        }
        let mut candidates: Vec<usize> = members[class]
            .iter()
            .copied()
            .filter(|&i| !selected[i])
            .filter(|&i| {
                ds.artworks()[i]
                    .materials
                    .iter()
                    .filter(|m| m.as_str() != class)
                    .all(|m| carried.get(m.as_str()).copied().unwrap_or(0) < quota[m.as_str()])
            })
            .collect();
        candidates.shuffle(&mut rng);
        for i in candidates {
            if carried.get(class).copied().unwrap_or(0) >= quota[class] {
                break;
            }
            // room may have run out since filtering, for classes shared by
            // earlier picks in this round
            let fits = ds.artworks()[i]
                .materials
                .iter()
                .all(|m| carried.get(m.as_str()).copied().unwrap_or(0) < quota[m.as_str()]);
            if !fits {
                continue;
            }
            selected[i] = true;
            for m in &ds.artworks()[i].materials {
                *carried.entry(m.as_str()).or_insert(0) += 1;
            }
        }
    }

    let kept = ds
        .artworks()
        .iter()
        .zip(&selected)
        .filter(|(_, &s)| s)
        .map(|(a, _)| a.clone())
        .collect();
    Dataset::new(kept)
}
