//! Bag-of-words featurization of ad-creative descriptions: tokenization,
//! a lexicographically indexed global corpus, sparse count vectors and
//! cosine similarity.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

const UNBOUND: u64 = 0;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("token {0:?} is not in the corpus")]
    OutOfCorpus(String),
    #[error("count vectors come from different corpora")]
    CorpusMismatch,
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Lowercase, split on whitespace and trim non-alphanumeric characters from
/// both ends of each word. Words that trim to nothing are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(normalize_token)
        .collect()
}

pub fn normalize_token(word: &str) -> Option<String> {
    let t = word.trim_matches(|c: char| !c.is_alphanumeric());
    (!t.is_empty()).then(|| t.to_lowercase())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DocKey {
    /// Interest group or persona id.
    pub id: String,
    pub run: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub key: DocKey,
    pub tokens: Vec<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, run: u32, tokens: Vec<String>) -> Self {
        Self {
            key: DocKey {
                id: id.into(),
                run,
            },
            tokens,
        }
    }

    pub fn from_text(id: impl Into<String>, run: u32, text: &str) -> Self {
        Self::new(id, run, tokenize(text))
    }
}

/// Read documents from JSON lines of the form `{"key": {"id": .., "run": ..}, "tokens": [..]}`.
/// Tokens are normalized on the way in.
pub fn read_documents<R: BufRead>(reader: R) -> Result<Vec<Document>, TextError> {
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut doc: Document =
            serde_json::from_str(&line).map_err(|source| TextError::Parse { line: i + 1, source })?;
        doc.tokens = doc
            .tokens
            .iter()
            .flat_map(|t| tokenize(t))
            .collect();
        docs.push(doc);
    }
    Ok(docs)
}

/// Global word index. Tokens are numbered in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
    fingerprint: u64,
}

impl Corpus {
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = tokens.into_iter().map(Into::into).collect();
        let tokens: Vec<String> = set.into_iter().collect();
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let mut h = Sha256::new();
        for t in &tokens {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        let digest = h.finalize();
        let fingerprint = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
        Self {
            tokens,
            index,
            fingerprint,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// An empty vector bound to this corpus.
    pub fn zero(&self) -> CountVector {
        CountVector {
            counts: BTreeMap::new(),
            corpus: self.fingerprint,
        }
    }
}

pub fn build_corpus(documents: &[Document]) -> Corpus {
    Corpus::from_tokens(documents.iter().flat_map(|d| d.tokens.iter().cloned()))
}

/// Sparse word-frequency vector. Only non-zero counts are stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountVector {
    counts: BTreeMap<usize, u64>,
    corpus: u64,
}

impl CountVector {
    pub fn counts(&self) -> &BTreeMap<usize, u64> {
        &self.counts
    }

    pub fn get(&self, index: usize) -> u64 {
        self.counts.get(&index).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn corpus_fingerprint(&self) -> u64 {
        self.corpus
    }

    /// Dense copy of length `len`.
    pub fn to_dense(&self, len: usize) -> Vec<u64> {
        let mut v = vec![0; len];
        for (&i, &c) in &self.counts {
            v[i] = c;
        }
        v
    }

    pub fn add_assign(&mut self, other: &CountVector) -> Result<(), TextError> {
        // corpus 0 marks the unbound empty vector from merging nothing
        if other.corpus == UNBOUND && other.is_zero() {
            return Ok(());
        }
        if self.corpus == UNBOUND && self.is_zero() {
            self.corpus = other.corpus;
        }
        if self.corpus != other.corpus {
            return Err(TextError::CorpusMismatch);
        }
        for (&i, &c) in &other.counts {
            *self.counts.entry(i).or_insert(0) += c;
        }
        Ok(())
    }

    /// Token-keyed view, used for serialization.
    pub fn to_token_map(&self, corpus: &Corpus) -> BTreeMap<String, u64> {
        self.counts
            .iter()
            .map(|(&i, &c)| (corpus.tokens[i].clone(), c))
            .collect()
    }

    pub fn from_token_map(map: &BTreeMap<String, u64>, corpus: &Corpus) -> Result<Self, TextError> {
        let mut counts = BTreeMap::new();
        for (t, &c) in map {
            let i = corpus
                .index_of(t)
                .ok_or_else(|| TextError::OutOfCorpus(t.clone()))?;
            if c > 0 {
                counts.insert(i, c);
            }
        }
        Ok(Self {
            counts,
            corpus: corpus.fingerprint,
        })
    }
}

/// Count the tokens of `document` over `corpus`.
pub fn vectorize(document: &Document, corpus: &Corpus) -> Result<CountVector, TextError> {
    vectorize_tokens(document.tokens.iter().map(String::as_str), corpus)
}

pub fn vectorize_tokens<'a, I>(tokens: I, corpus: &Corpus) -> Result<CountVector, TextError>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut v = corpus.zero();
    for t in tokens {
        let i = corpus
            .index_of(t)
            .ok_or_else(|| TextError::OutOfCorpus(t.to_owned()))?;
        *v.counts.entry(i).or_insert(0) += 1;
    }
    Ok(v)
}

/// Element-wise sum. An empty list sums to an empty vector with no corpus
/// binding, which merges with anything.
pub fn merge_vectors(vectors: &[CountVector]) -> Result<CountVector, TextError> {
    let Some(first) = vectors.first() else {
        return Ok(CountVector {
            counts: BTreeMap::new(),
            corpus: UNBOUND,
        });
    };
    let mut acc = first.clone();
    for v in &vectors[1..] {
        acc.add_assign(v)?;
    }
    Ok(acc)
}

/// Cosine similarity in [0, 1]; 0 when either vector is all-zero.
pub fn cosine_similarity(x: &CountVector, y: &CountVector) -> Result<f64, TextError> {
    if x.corpus != y.corpus {
        return Err(TextError::CorpusMismatch);
    }
    if x.is_zero() || y.is_zero() {
        return Ok(0.0);
    }
    let (small, large) = if x.counts.len() <= y.counts.len() {
        (x, y)
    } else {
        (y, x)
    };
    let dot: f64 = small
        .counts
        .iter()
        .map(|(i, &a)| a as f64 * large.get(*i) as f64)
        .sum();
    let norm = |v: &CountVector| {
        v.counts
            .values()
            .map(|&c| (c as f64) * (c as f64))
            .sum::<f64>()
            .sqrt()
    };
    Ok((dot / (norm(x) * norm(y))).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(text: &str) -> Document {
        Document::from_text("g", 0, text)
    }

    #[test]
    fn tokenization_normalizes() {
        assert_eq!(
            tokenize("  Hello, WORLD!  (video)  -- games\n"),
            vec!["hello", "world", "video", "games"]
        );
        assert_eq!(tokenize("e-sports"), vec!["e-sports"]);
    }

    #[test]
    fn corpus_is_lexicographic_union() {
        assert!(build_corpus(&[]).is_empty());
        let c = build_corpus(&[doc("b a"), doc("c b")]);
        assert_eq!(c.len(), 3);
        assert_eq!(
            (c.index_of("a"), c.index_of("b"), c.index_of("c")),
            (Some(0), Some(1), Some(2))
        );
    }

    #[test]
    fn vectorize_counts() {
        let c = Corpus::from_tokens(["a", "b", "c"]);
        let v = vectorize(&doc("a a b"), &c).unwrap();
        assert_eq!(v.counts(), &BTreeMap::from([(0, 2), (1, 1)]));
        assert!(vectorize(&doc(""), &c).unwrap().is_zero());
        assert!(matches!(
            vectorize(&doc("z"), &c),
            Err(TextError::OutOfCorpus(t)) if t == "z"
        ));
    }

    #[test]
    fn merge_sums_and_checks_corpus() {
        let c = Corpus::from_tokens(["a", "b"]);
        let x = vectorize(&doc("a"), &c).unwrap();
        let y = vectorize(&doc("a a b"), &c).unwrap();
        let m = merge_vectors(&[x.clone(), y]).unwrap();
        assert_eq!(m.counts(), &BTreeMap::from([(0, 3), (1, 1)]));
        assert_eq!(merge_vectors(&[x.clone(), c.zero()]).unwrap(), x);

        let other = Corpus::from_tokens(["a", "q"]);
        let z = vectorize(&doc("a"), &other).unwrap();
        assert!(matches!(merge_vectors(&[x, z]), Err(TextError::CorpusMismatch)));
    }

    #[test]
    fn cosine_cases() {
        let c = Corpus::from_tokens(["a", "b", "c"]);
        let v = |t: &str| vectorize(&doc(t), &c).unwrap();
        assert!((cosine_similarity(&v("a b b"), &v("a b b")).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&v("a"), &v("b")).unwrap(), 0.0);
        assert!((cosine_similarity(&v("a b"), &v("a c")).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(cosine_similarity(&v(""), &v("a")).unwrap(), 0.0);
    }

    #[test]
    fn token_map_roundtrip() {
        let c = Corpus::from_tokens(["x", "y"]);
        let v = vectorize(&doc("y y x"), &c).unwrap();
        let m = v.to_token_map(&c);
        assert_eq!(m, BTreeMap::from([("x".to_owned(), 1), ("y".to_owned(), 2)]));
        assert_eq!(CountVector::from_token_map(&m, &c).unwrap(), v);
    }

    #[test]
    fn ingest_jsonl() {
        let input = "{\"key\":{\"id\":\"games\",\"run\":2},\"tokens\":[\"Console\",\"Fantasy RPG!\"]}\n\n";
        let docs = read_documents(input.as_bytes()).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].key.run, 2);
        assert_eq!(docs[0].tokens, vec!["console", "fantasy", "rpg"]);
        assert!(read_documents("{oops".as_bytes()).is_err());
    }
}
