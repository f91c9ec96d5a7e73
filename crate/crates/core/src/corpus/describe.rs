use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::text::{
    embed_tokens, remove_stopwords, tokenize, EmbeddedSequence, EmbeddingTable, Stoplist, Token,
};

/// A material described by its most frequent description words.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassDescription {
    pub material: String,
    /// Most frequent first, ties in lexicographic order.
    pub words: Vec<Token>,
    pub embedded: EmbeddedSequence,
}

/// Descriptions for every usable material plus the materials that had no
/// embeddable words.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DescriptionSet {
    pub descriptions: Vec<ClassDescription>,
    pub unusable: Vec<String>,
}

impl DescriptionSet {
    pub fn get(&self, material: &str) -> Option<&ClassDescription> {
        self.descriptions.iter().find(|d| d.material == material)
    }

    /// Material name → position in `descriptions`.
    pub fn index(&self) -> HashMap<&str, usize> {
        self.descriptions
            .iter()
            .enumerate()
            .map(|(i, d)| (d.material.as_str(), i))
            .collect()
    }
}

/// Builds one description per material, in material order.
///
/// The tokens of every artwork carrying the material are pooled (stop words
/// removed, words without an embedding ignored), ranked by count descending
/// with lexicographic tie-break, and the first `min(k, distinct)` are kept
/// and embedded into sequences of length `max_len`. Artworks that were
/// preprocessed contribute their stored tokens instead of re-tokenizing.
pub fn build_class_descriptions(
    ds: &Dataset,
    k: usize,
    table: &EmbeddingTable,
    stoplist: &Stoplist,
    max_len: usize,
) -> DescriptionSet {
    assert!(k >= 1, "k must be at least 1");
    let mut pooled: BTreeMap<&str, HashMap<Token, usize>> = ds
        .classes()
        .iter()
        .map(|c| (c.as_str(), HashMap::new()))
        .collect();
    for a in ds.artworks() {
        let tokens = match &a.tokens {
            Some(t) => remove_stopwords(t, stoplist),
            None => remove_stopwords(&tokenize(&a.description), stoplist),
        };
        for m in &a.materials {
            let counts = pooled
                .get_mut(m.as_str())
                .expect("material is a dataset class");
            for t in tokens.iter().filter(|t| table.contains(t.as_str())) {
                *counts.entry(t.clone()).or_insert(0) += 1;
            }
        }
    }

    let mut out = DescriptionSet::default();
    for (material, counts) in pooled {
        let mut ranked: Vec<(Token, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let words: Vec<Token> = ranked.into_iter().take(k).map(|(t, _)| t).collect();
        match embed_tokens(&words, table, max_len) {
            Ok(embedded) => out.descriptions.push(ClassDescription {
                material: material.to_string(),
                words,
                embedded,
            }),
            Err(_) => {
                log::warn!("material {material:?} has no embeddable description words; excluded");
                out.unusable.push(material.to_string());
            }
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct DescriptionRow {
    material: String,
    words: Vec<Token>,
    max_len: usize,
    vectors: Vec<Vec<f64>>,
}

/// JSON lines: `material`, `words`, `max_len` and one embedding vector per
/// real step of the sequence.
pub fn write_descriptions<W: Write>(descs: &[ClassDescription], mut out: W) -> Result<()> {
    for d in descs {
        let row = DescriptionRow {
            material: d.material.clone(),
            words: d.embedded.tokens().to_vec(),
            max_len: d.embedded.max_len(),
            vectors: (0..d.embedded.len())
                .map(|i| d.embedded.row(i).to_vec())
                .collect(),
        };
        serde_json::to_writer(&mut out, &row).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_descriptions<R: BufRead>(reader: R) -> Result<Vec<ClassDescription>> {
    let mut out: Vec<ClassDescription> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Manifest {
            row: i + 1,
            message,
        };
        let row: DescriptionRow = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        let dim = row.vectors.first().map_or(0, Vec::len);
        if let Some(prev) = out.first() {
            if prev.embedded.dim() != dim || prev.embedded.max_len() != row.max_len {
                return Err(err("descriptions disagree on dimension or length".into()));
            }
        }
        let embedded =
            EmbeddedSequence::from_rows(row.words.clone(), &row.vectors, dim, row.max_len)
                .map_err(|e| err(e.to_string()))?;
        out.push(ClassDescription {
            material: row.material,
            words: row.words,
            embedded,
        });
    }
    Ok(out)
}

pub fn write_descriptions_file(descs: &[ClassDescription], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_descriptions(descs, std::io::BufWriter::new(file))
}

pub fn read_descriptions_file(path: &Path) -> Result<Vec<ClassDescription>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_descriptions(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::artwork;
    use proptest::prelude::*;

    fn table_for(words: &[String], dim: usize) -> EmbeddingTable {
        let mut t = EmbeddingTable::new(dim);
        for (i, w) in words.iter().enumerate() {
            t.insert(w, &vec![i as f64 + 1.0; dim]).unwrap();
        }
        t
    }

    /// Brute-force reference ranking: count by scanning, then pick the
    /// maximum repeatedly.
    fn reference_top_k(descriptions: &[String], k: usize) -> Vec<String> {
        let words: Vec<String> = descriptions
            .iter()
            .flat_map(|d| d.split(' ').map(String::from))
            .collect();
        let mut distinct: Vec<String> = words.clone();
        distinct.sort();
        distinct.dedup();
        let count = |w: &String| words.iter().filter(|x| *x == w).count();
        let mut chosen = Vec::new();
        while chosen.len() < k && chosen.len() < distinct.len() {
            let best = distinct
                .iter()
                .filter(|w| !chosen.contains(*w))
                .fold(None::<&String>, |best, w| match best {
                    Some(b) if count(b) >= count(w) => Some(b),
                    _ => Some(w),
                })
                .unwrap();
            chosen.push(best.clone());
        }
        chosen
    }

    #[test]
    fn top_25_of_30_words() {
        // word i appears i+1 times, spread over artworks of one material
        let words: Vec<String> = (0..30).map(|i| format!("word{i:02}")).collect();
        let mut descriptions = vec![String::new(); 30];
        for (i, w) in words.iter().enumerate() {
            for d in &mut descriptions[..=i] {
                if !d.is_empty() {
                    d.push(' ');
                }
                d.push_str(w);
            }
        }
        let arts = descriptions
            .iter()
            .enumerate()
            .map(|(i, d)| artwork(&format!("a{i}"), &["oak"], d, 1))
            .collect();
        let ds = Dataset::new(arts);
        let set =
            build_class_descriptions(&ds, 25, &table_for(&words, 4), &Stoplist::english(), 25);
        let got: Vec<String> = set.descriptions[0]
            .words
            .iter()
            .map(|t| t.to_string())
            .collect();
        assert_eq!(got, reference_top_k(&descriptions, 25));
        assert_eq!(got[0], "word29");
        assert_eq!(got.len(), 25);
        assert_eq!(set.descriptions[0].embedded.len(), 25);
    }

    #[test]
    fn fewer_words_than_k_and_ties() {
        let words: Vec<String> = [
            "birds", "branch", "pear", "column", "fruits", "stick", "pillar", "bunch",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let ds = Dataset::new(vec![artwork("a", &["maple"], &words.join(" "), 1)]);
        let set =
            build_class_descriptions(&ds, 25, &table_for(&words, 2), &Stoplist::english(), 25);
        let got: Vec<&str> = set.descriptions[0]
            .words
            .iter()
            .map(Token::as_str)
            .collect();
        assert_eq!(
            got,
            ["birds", "branch", "bunch", "column", "fruits", "pear", "pillar", "stick"]
        );
    }

    #[test]
    fn stopwords_and_oov_are_excluded() {
        let words: Vec<String> = ["farm", "hill"].iter().map(|s| s.to_string()).collect();
        let ds = Dataset::new(vec![
            artwork("a", &["oil", "canvas"], "The farm and the hill", 1),
            artwork("b", &["tin"], "unknown words only", 1),
        ]);
        let set =
            build_class_descriptions(&ds, 25, &table_for(&words, 2), &Stoplist::english(), 25);
        assert_eq!(set.unusable, vec!["tin".to_string()]);
        let oil = set.get("oil").unwrap();
        assert_eq!(
            oil.words,
            vec![Token::new("farm").unwrap(), Token::new("hill").unwrap()]
        );
        assert_eq!(set.get("canvas").unwrap().words, oil.words);
    }

    #[test]
    fn file_round_trip() {
        let words: Vec<String> = ["farm", "hill", "lake"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let ds = Dataset::new(vec![artwork("a", &["oil"], "farm hill hill lake", 1)]);
        let set = build_class_descriptions(&ds, 25, &table_for(&words, 3), &Stoplist::english(), 6);
        let mut buf = Vec::new();
        write_descriptions(&set.descriptions, &mut buf).unwrap();
        assert_eq!(read_descriptions(&buf[..]).unwrap(), set.descriptions);
    }

    proptest! {
        #[test]
        fn descriptions_are_ranked_subsets_of_the_pool(
            docs in proptest::collection::vec(proptest::collection::vec(0usize..15, 1..12), 1..10),
            k in 1usize..10,
        ) {
            let vocab: Vec<String> = (0..15).map(|i| format!("v{i:02}")).collect();
            let descriptions: Vec<String> = docs.iter().map(|d| d.iter().map(|&i| vocab[i].clone()).collect::<Vec<_>>().join(" ")).collect();
            let arts = descriptions.iter().enumerate().map(|(i, d)| artwork(&format!("a{i}"), &["m"], d, 1)).collect();
            let set = build_class_descriptions(&Dataset::new(arts), k, &table_for(&vocab, 2), &Stoplist::english(), 10);
            let got: Vec<String> = set.descriptions[0].words.iter().map(|t| t.to_string()).collect();
            prop_assert_eq!(got, reference_top_k(&descriptions, k));
        }
    }
}
