//! Tokenization and word-rank vectorization.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const PAD_INDEX: u32 = 0;
pub const OOV_INDEX: u32 = 1;
/// First index handed to a real token.
pub const FIRST_TOKEN_INDEX: u32 = 2;

pub const DEFAULT_VOCAB_SIZE: usize = 25_000;
pub const DEFAULT_MAX_LEN: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub lowercase: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig { lowercase: true }
    }
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric()
}

fn is_sigil(c: char) -> bool {
    c == '#' || c == '@'
}

/// Splits `text` on whitespace, peels leading and trailing punctuation into
/// one-character tokens and lowercases. Apostrophes and hyphens inside a word
/// stay put, and `#tag` / `@user` keep their sigil.
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with(text, &TokenizerConfig::default())
}

pub fn tokenize_with(text: &str, cfg: &TokenizerConfig) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut start = 0;
        let mut end = chars.len();

        // Leading punctuation, except a sigil directly attached to a word.
        while start < end && is_punct(chars[start]) {
            if is_sigil(chars[start]) && start + 1 < end && !is_punct(chars[start + 1]) {
                break;
            }
            out.push(chars[start].to_string());
            start += 1;
        }
        let mut trailing = Vec::new();
        while end > start && is_punct(chars[end - 1]) {
            trailing.push(chars[end - 1].to_string());
            end -= 1;
        }
        // A bare sigil with nothing after it is just punctuation.
        if end - start == 1 && is_sigil(chars[start]) {
            trailing.push(chars[start].to_string());
            end = start;
        }
        if end > start {
            let word: String = chars[start..end].iter().collect();
            out.push(if cfg.lowercase {
                word.to_lowercase()
            } else {
                word
            });
        }
        out.extend(trailing.into_iter().rev());
    }
    out
}

/// Frequency-ranked token index. Index 0 is padding, 1 is out-of-vocabulary,
/// real tokens start at 2 in order of decreasing training frequency, ties
/// broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    max_size: usize,
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn build<S: AsRef<str>>(sequences: &[Vec<S>], max_size: usize) -> Result<Self> {
        if max_size == 0 {
            return Err(Error::InvalidArgument(
                "vocabulary max_size must be >= 1".into(),
            ));
        }
        if sequences.is_empty() {
            return Err(Error::InvalidArgument(
                "cannot build a vocabulary from an empty training set".into(),
            ));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for seq in sequences {
            for tok in seq {
                *counts.entry(tok.as_ref()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(max_size);
        Ok(Self::from_tokens(
            ranked.into_iter().map(|(t, _)| t.to_string()).collect(),
            max_size,
        ))
    }

    fn from_tokens(tokens: Vec<String>, max_size: usize) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32 + FIRST_TOKEN_INDEX))
            .collect();
        Vocabulary {
            max_size,
            tokens,
            index,
        }
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    /// Number of real tokens.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Size of the index space including the two reserved slots.
    pub fn index_space(&self) -> usize {
        self.tokens.len() + FIRST_TOKEN_INDEX as usize
    }

    pub fn index_of(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(OOV_INDEX)
    }

    pub fn token(&self, index: u32) -> Option<&str> {
        index
            .checked_sub(FIRST_TOKEN_INDEX)
            .and_then(|i| self.tokens.get(i as usize))
            .map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// `token<TAB>index` lines sorted by index.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            let _ = writeln!(s, "{}\t{}", t, i as u32 + FIRST_TOKEN_INDEX);
        }
        s
    }

    pub fn from_tsv(contents: &str, max_size: Option<usize>) -> Result<Self> {
        let mut tokens = Vec::new();
        for (n, line) in contents.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (tok, idx) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: n + 1,
                message: "expected token<TAB>index".into(),
            })?;
            let idx: u32 = idx.trim().parse().map_err(|_| Error::Parse {
                line: n + 1,
                message: format!("bad index {idx:?}"),
            })?;
            if idx as usize != tokens.len() + FIRST_TOKEN_INDEX as usize {
                return Err(Error::Parse {
                    line: n + 1,
                    message: format!("indices must be contiguous from 2, got {idx}"),
                });
            }
            tokens.push(tok.to_string());
        }
        let max_size = max_size.unwrap_or(tokens.len().max(1));
        if tokens.len() > max_size {
            return Err(Error::Validation(format!(
                "vocabulary has {} tokens but max_size is {max_size}",
                tokens.len()
            )));
        }
        Ok(Self::from_tokens(tokens, max_size))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&s, None)
    }

    /// SHA-256 over the serialized token list.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.to_tsv().as_bytes());
        hex::encode(h.finalize())
    }
}

/// Fixed-length sequence of vocabulary indices, zero padded at the tail.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexVector(pub Vec<u32>);

impl IndexVector {
    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Maps the first `max_len` tokens to indices and pads with zeros.
pub fn vectorize<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary, max_len: usize) -> IndexVector {
    let mut v: Vec<u32> = tokens
        .iter()
        .take(max_len)
        .map(|t| vocab.index_of(t.as_ref()))
        .collect();
    v.resize(max_len, PAD_INDEX);
    IndexVector(v)
}
