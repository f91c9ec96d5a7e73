//! Description text: tokenization, stop-word filtering and pretrained word
//! embeddings.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default sequence length shared by artwork and class-description sequences.
pub const DEFAULT_MAX_LEN: usize = 25;

/// Dimension of the pretrained word vectors the pipeline is configured for.
pub const DEFAULT_EMBED_DIM: usize = 100;

const ENGLISH_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

/// A lowercase word with no whitespace and no punctuation other than
/// internal hyphens.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Token(String);

impl Token {
    /// Normalizes a single word. Returns `None` if nothing survives.
    pub fn new(word: &str) -> Option<Self> {
        let lower = word.to_lowercase();
        let trimmed = lower.trim_matches(|c: char| !c.is_alphanumeric());
        let cleaned: String = trimmed
            .chars()
            .filter(|&c| c.is_alphanumeric() || c == '-')
            .collect();
        if cleaned.is_empty() {
            None
        } else {
            Some(Token(cleaned))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Token {
    type Error = String;

    fn try_from(value: String) -> std::result::Result<Self, Self::Error> {
        match Token::new(&value) {
            Some(t) if t.0 == value => Ok(t),
            _ => Err(format!("{value:?} is not a normalized token")),
        }
    }
}

impl From<Token> for String {
    fn from(t: Token) -> String {
        t.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Lowercases, splits on whitespace and strips punctuation. Order is kept and
/// empty tokens are dropped.
pub fn tokenize(text: &str) -> Vec<Token> {
    text.split_whitespace().filter_map(Token::new).collect()
}

/// Set of words removed from descriptions before embedding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stoplist(BTreeSet<Token>);

impl Stoplist {
    /// The bundled English list (178 entries).
    pub fn english() -> Self {
        Self::parse(ENGLISH_STOPWORDS)
    }

    /// One word per line; words are normalized like description tokens.
    pub fn parse(text: &str) -> Self {
        Stoplist(text.lines().flat_map(tokenize).collect())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, token: &Token) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<Token> for Stoplist {
    fn from_iter<I: IntoIterator<Item = Token>>(iter: I) -> Self {
        Stoplist(iter.into_iter().collect())
    }
}

pub fn remove_stopwords(tokens: &[Token], stoplist: &Stoplist) -> Vec<Token> {
    tokens
        .iter()
        .filter(|t| !stoplist.contains(t))
        .cloned()
        .collect()
}

/// Word vectors loaded from the standard `word v1 ... vd` text layout.
///
/// Immutable after loading; lookups are exact matches on the word.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    values: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        EmbeddingTable {
            dim,
            words: Vec::new(),
            index: HashMap::new(),
            values: Vec::new(),
        }
    }

    /// Adds a word. Fails on a wrong length, a non-finite value or a repeated word.
    pub fn insert(&mut self, word: &str, vector: &[f64]) -> Result<()> {
        let line = self.words.len() + 1;
        if vector.len() != self.dim {
            return Err(Error::Dimension {
                line,
                expected: self.dim,
                found: vector.len(),
            });
        }
        if let Some(v) = vector.iter().find(|v| !v.is_finite()) {
            return Err(Error::ParseFloat {
                line,
                value: v.to_string(),
            });
        }
        if self.index.contains_key(word) {
            return Err(Error::DuplicateWord {
                line,
                word: word.to_string(),
            });
        }
        self.index.insert(word.to_string(), self.words.len());
        self.words.push(word.to_string());
        self.values.extend_from_slice(vector);
        Ok(())
    }

    /// Parses an embedding stream. Blank lines are skipped; line numbers in
    /// errors are 1-based.
    pub fn load<R: BufRead>(reader: R, dim: usize) -> Result<Self> {
        let mut table = EmbeddingTable::new(dim);
        let mut vector = Vec::with_capacity(dim);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else {
                continue;
            };
            vector.clear();
            for field in fields {
                let v: f64 = field.parse().map_err(|_| Error::ParseFloat {
                    line: lineno,
                    value: field.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(Error::ParseFloat {
                        line: lineno,
                        value: field.to_string(),
                    });
                }
                vector.push(v);
            }
            if vector.len() != dim {
                return Err(Error::Dimension {
                    line: lineno,
                    expected: dim,
                    found: vector.len(),
                });
            }
            if table.index.contains_key(word) {
                return Err(Error::DuplicateWord {
                    line: lineno,
                    word: word.to_string(),
                });
            }
            table.index.insert(word.to_string(), table.words.len());
            table.words.push(word.to_string());
            table.values.extend_from_slice(&vector);
        }
        Ok(table)
    }

    pub fn from_file(path: &Path, dim: usize) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::load(std::io::BufReader::new(file), dim)
    }

    /// Writes entries in insertion order with shortest round-trip float formatting.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for (word, vector) in self.iter() {
            write!(out, "{word}")?;
            for v in vector {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index
            .get(word)
            .map(|&i| &self.values[i * self.dim..(i + 1) * self.dim])
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.words
            .iter()
            .zip(self.values.chunks_exact(self.dim))
            .map(|(w, v)| (w.as_str(), v))
    }
}

/// A token sequence embedded into a fixed `max_len × dim` matrix.
///
/// Row `i` holds the vector of `tokens[i]` for `i < tokens.len()`; the
/// remaining rows are zero padding and masked out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedSequence {
    tokens: Vec<Token>,
    dim: usize,
    data: Vec<f64>,
    mask: Vec<bool>,
}

impl EmbeddedSequence {
    /// Builds a sequence from rows given directly. The first `rows.len()`
    /// steps are real, the rest padding.
    pub fn from_rows(
        tokens: Vec<Token>,
        rows: &[Vec<f64>],
        dim: usize,
        max_len: usize,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptySequence);
        }
        if rows.len() > max_len || tokens.len() != rows.len() {
            return Err(Error::Config(format!(
                "{} rows and {} tokens for a sequence of length {max_len}",
                rows.len(),
                tokens.len()
            )));
        }
        let mut data = vec![0.0; max_len * dim];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Dimension {
                    line: i + 1,
                    expected: dim,
                    found: row.len(),
                });
            }
            data[i * dim..(i + 1) * dim].copy_from_slice(row);
        }
        let mut mask = vec![false; max_len];
        mask[..rows.len()].fill(true);
        Ok(EmbeddedSequence {
            tokens,
            dim,
            data,
            mask,
        })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_len(&self) -> usize {
        self.mask.len()
    }

    /// Number of real (unmasked) steps.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Row-major `max_len × dim` matrix.
    pub fn matrix(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Embeds tokens, dropping those missing from the table, truncating to
/// `max_len` and zero-padding the rest.
pub fn embed_tokens(
    tokens: &[Token],
    table: &EmbeddingTable,
    max_len: usize,
) -> Result<EmbeddedSequence> {
    assert!(max_len >= 1, "max_len must be at least 1");
    let dim = table.dim();
    let mut kept = Vec::new();
    let mut data = vec![0.0; max_len * dim];
    for token in tokens {
        if kept.len() == max_len {
            break;
        }
        if let Some(vector) = table.get(token.as_str()) {
            let i = kept.len();
            data[i * dim..(i + 1) * dim].copy_from_slice(vector);
            kept.push(token.clone());
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut mask = vec![false; max_len];
    mask[..kept.len()].fill(true);
    Ok(EmbeddedSequence {
        tokens: kept,
        dim,
        data,
        mask,
    })
}
