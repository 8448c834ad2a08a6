use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::types::TokenSequence;
use crate::error::{Error, Result};

pub const OOV_TOKEN: &str = "[oov]";
pub const OOV_ID: usize = 0;

/// Words seen fewer times than this in the building corpus map to OOV.
pub const DEFAULT_MIN_FREQ: usize = 2;

/// Lowercases and splits on anything that is not alphanumeric.
pub fn words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

/// Corpus-derived word vocabulary with a single OOV entry at ID 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { tokens, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    /// Builds from a corpus. Tokens are ordered by descending frequency,
    /// ties broken alphabetically, so the result is independent of corpus
    /// order.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, min_freq: usize) -> Self {
        let mut freq: HashMap<String, usize> = HashMap::new();
        for t in texts {
            for w in words(t) {
                *freq.entry(w).or_default() += 1;
            }
        }
        let mut kept: Vec<(String, usize)> = freq
            .into_iter()
            .filter(|(w, c)| *c >= min_freq && w != OOV_TOKEN)
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut tokens = vec![OOV_TOKEN.to_string()];
        tokens.extend(kept.into_iter().map(|(w, _)| w));
        Vocabulary::from(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(OOV_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Never returns an empty sequence: empty text becomes `[OOV]`.
    pub fn tokenize(&self, text: &str) -> TokenSequence {
        let mut ids: Vec<usize> = words(text).iter().map(|w| self.id(w)).collect();
        if ids.is_empty() {
            ids.push(OOV_ID);
        }
        TokenSequence {
            token_ids: ids,
            raw_text: text.to_string(),
        }
    }

    /// One `token<TAB>id` line per entry.
    pub fn to_text(&self) -> String {
        self.tokens
            .iter()
            .enumerate()
            .map(|(i, t)| format!("{t}\t{i}\n"))
            .collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        for (k, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (tok, id) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(k + 1, "expected token<TAB>id"))?;
            let id: usize = id
                .trim()
                .parse()
                .map_err(|_| Error::parse(k + 1, format!("bad id {id:?}")))?;
            if id != tokens.len() {
                return Err(Error::parse(k + 1, format!("ids must be dense, got {id}")));
            }
            tokens.push(tok.to_string());
        }
        if tokens.first().map(String::as_str) != Some(OOV_TOKEN) {
            return Err(Error::parse(1, "vocabulary must start with the OOV token"));
        }
        Ok(Vocabulary::from(tokens))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}
