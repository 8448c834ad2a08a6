//! Newline-delimited JSON pair manifests.
//!
//! Each line is one record:
//! `{"pair_kind":"language-graph","left":"L000001","right":"G000001","split":"pretrain"}`.
//! A manifest file holds a single pair kind.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Language,
    Graph,
    Conformation,
    Protein,
}

impl Modality {
    pub const ALL: [Modality; 4] = [
        Modality::Language,
        Modality::Graph,
        Modality::Conformation,
        Modality::Protein,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Language => "language",
            Modality::Graph => "graph",
            Modality::Conformation => "conformation",
            Modality::Protein => "protein",
        }
    }

    /// Single-letter code used in direction labels such as `L2G`.
    pub fn letter(self) -> char {
        match self {
            Modality::Language => 'L',
            Modality::Graph => 'G',
            Modality::Conformation => 'C',
            Modality::Protein => 'P',
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "language" | "text" => Ok(Modality::Language),
            "graph" => Ok(Modality::Graph),
            "conformation" => Ok(Modality::Conformation),
            "protein" | "pocket" => Ok(Modality::Protein),
            other => Err(Error::Config(format!("unknown modality {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairKind {
    LanguageGraph,
    LanguageConformation,
    GraphConformation,
    ConformationProtein,
}

impl PairKind {
    pub const ALL: [PairKind; 4] = [
        PairKind::LanguageGraph,
        PairKind::LanguageConformation,
        PairKind::GraphConformation,
        PairKind::ConformationProtein,
    ];

    pub fn modalities(self) -> (Modality, Modality) {
        use Modality::*;
        match self {
            PairKind::LanguageGraph => (Language, Graph),
            PairKind::LanguageConformation => (Language, Conformation),
            PairKind::GraphConformation => (Graph, Conformation),
            PairKind::ConformationProtein => (Conformation, Protein),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PairKind::LanguageGraph => "language-graph",
            PairKind::LanguageConformation => "language-conformation",
            PairKind::GraphConformation => "graph-conformation",
            PairKind::ConformationProtein => "conformation-protein",
        }
    }

    /// Row label in the style `(language, graph)`.
    pub fn label(self) -> String {
        let (a, b) = self.modalities();
        format!("({a}, {b})")
    }

    /// The kind pairing two modalities, in either order.
    pub fn between(a: Modality, b: Modality) -> Option<Self> {
        PairKind::ALL.into_iter().find(|k| {
            let (l, r) = k.modalities();
            (l, r) == (a, b) || (l, r) == (b, a)
        })
    }
}

impl fmt::Display for PairKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PairKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PairKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown pair kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Pretrain,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Pretrain, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Pretrain => "pretrain",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown split {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairEntry {
    pub left: String,
    pub right: String,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitCounts {
    pub pretrain: usize,
    pub validation: usize,
    pub test: usize,
}

impl SplitCounts {
    pub const fn new(pretrain: usize, validation: usize, test: usize) -> Self {
        SplitCounts {
            pretrain,
            validation,
            test,
        }
    }

    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Pretrain => self.pretrain,
            Split::Validation => self.validation,
            Split::Test => self.test,
        }
    }
}

impl fmt::Display for SplitCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.pretrain, self.validation, self.test)
    }
}

/// Split sizes of the full four-modality reference corpus, per pair kind.
pub const REFERENCE_COUNTS: [(PairKind, SplitCounts); 4] = [
    (PairKind::LanguageGraph, SplitCounts::new(319_353, 1_500, 1_500)),
    (PairKind::LanguageConformation, SplitCounts::new(158_237, 1_500, 1_500)),
    (PairKind::ConformationProtein, SplitCounts::new(72_355, 100, 285)),
    (PairKind::GraphConformation, SplitCounts::new(158_237, 1_500, 1_500)),
];

pub fn reference_counts(kind: PairKind) -> SplitCounts {
    REFERENCE_COUNTS
        .iter()
        .find(|(k, _)| *k == kind)
        .map(|(_, c)| *c)
        .expect("every kind has reference counts")
}

/// Outcome of comparing a manifest's split sizes with the reference corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conformance {
    pub kind: PairKind,
    pub expected: SplitCounts,
    pub actual: SplitCounts,
}

impl Conformance {
    pub fn is_complete(&self) -> bool {
        self.expected == self.actual
    }

    pub fn mismatches(&self) -> Vec<String> {
        Split::ALL
            .into_iter()
            .filter(|&s| self.expected.get(s) != self.actual.get(s))
            .map(|s| {
                format!(
                    "{} {}: expected {}, found {}",
                    self.kind,
                    s.as_str(),
                    self.expected.get(s),
                    self.actual.get(s)
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairManifest {
    pub kind: PairKind,
    pub entries: Vec<PairEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    pair_kind: String,
    left: String,
    right: String,
    split: String,
}

impl PairManifest {
    /// Validates entries for duplicates and cross-split leakage.
    pub fn new(kind: PairKind, entries: Vec<PairEntry>) -> Result<Self> {
        let mut problems = Vec::new();
        check_entries(&entries, |k| format!("entry {k}"), &mut problems);
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        Ok(PairManifest { kind, entries })
    }

    pub fn counts(&self) -> SplitCounts {
        let mut c = SplitCounts::default();
        for e in &self.entries {
            match e.split {
                Split::Pretrain => c.pretrain += 1,
                Split::Validation => c.validation += 1,
                Split::Test => c.test += 1,
            }
        }
        c
    }

    pub fn split_filter(&self, split: Split) -> PairManifest {
        PairManifest {
            kind: self.kind,
            entries: self.entries.iter().filter(|e| e.split == split).cloned().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn conformance(&self) -> Conformance {
        Conformance {
            kind: self.kind,
            expected: reference_counts(self.kind),
            actual: self.counts(),
        }
    }

    /// Checks that every ref names an existing record of the modality the
    /// pair kind dictates.
    pub fn check_refs(&self, exists: impl Fn(Modality, &str) -> bool) -> Result<()> {
        let (lm, rm) = self.kind.modalities();
        let mut problems = Vec::new();
        for (k, e) in self.entries.iter().enumerate() {
            if !exists(lm, &e.left) {
                problems.push(format!("entry {k}: dangling {lm} ref {:?}", e.left));
            }
            if !exists(rm, &e.right) {
                problems.push(format!("entry {k}: dangling {rm} ref {:?}", e.right));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            let rec = RawRecord {
                pair_kind: self.kind.as_str().to_string(),
                left: e.left.clone(),
                right: e.right.clone(),
                split: e.split.as_str().to_string(),
            };
            s.push_str(&serde_json::to_string(&rec).expect("plain strings serialize"));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }
}

fn check_entries(entries: &[PairEntry], label: impl Fn(usize) -> String, problems: &mut Vec<String>) {
    let mut seen: HashMap<(&str, &str), (Split, usize)> = HashMap::with_capacity(entries.len());
    for (k, e) in entries.iter().enumerate() {
        match seen.get(&(e.left.as_str(), e.right.as_str())) {
            Some(&(split, first)) if split == e.split => problems.push(format!(
                "{}: duplicate ({}, {}, {}) first seen at {}",
                label(k),
                e.left,
                e.right,
                e.split.as_str(),
                label(first)
            )),
            Some(&(split, first)) => problems.push(format!(
                "{}: pair ({}, {}) appears in both {} ({}) and {}",
                label(k),
                e.left,
                e.right,
                split.as_str(),
                label(first),
                e.split.as_str()
            )),
            None => {
                seen.insert((e.left.as_str(), e.right.as_str()), (e.split, k));
            }
        }
    }
}

/// Parses and validates manifest text. All problems are collected before
/// failing.
pub fn parse_manifest_str(text: &str) -> Result<PairManifest> {
    let mut problems = Vec::new();
    let mut kind: Option<PairKind> = None;
    let mut entries = Vec::new();
    let mut line_of = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let lineno = k + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RawRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                problems.push(format!("line {lineno}: {e}"));
                continue;
            }
        };
        let rk = match rec.pair_kind.parse::<PairKind>() {
            Ok(rk) => rk,
            Err(_) => {
                problems.push(format!("line {lineno}: unknown pair_kind {:?}", rec.pair_kind));
                continue;
            }
        };
        match kind {
            None => kind = Some(rk),
            Some(k0) if k0 != rk => {
                problems.push(format!("line {lineno}: pair_kind {rk} in a {k0} manifest"));
                continue;
            }
            _ => {}
        }
        let split = match rec.split.parse::<Split>() {
            Ok(s) => s,
            Err(_) => {
                problems.push(format!("line {lineno}: unknown split {:?}", rec.split));
                continue;
            }
        };
        if rec.left.is_empty() || rec.right.is_empty() {
            problems.push(format!("line {lineno}: empty ref"));
            continue;
        }
        entries.push(PairEntry {
            left: rec.left,
            right: rec.right,
            split,
        });
        line_of.push(lineno);
    }
    check_entries(&entries, |k| format!("line {}", line_of[k]), &mut problems);
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    let kind = kind.ok_or_else(|| Error::Validation(vec!["manifest has no records".into()]))?;
    Ok(PairManifest { kind, entries })
}

pub fn parse_manifest(path: &Path) -> Result<PairManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest_str(&text)
}

/// Per-split counts of several manifests, keyed by kind.
pub fn count_table(manifests: &[PairManifest]) -> BTreeMap<PairKind, SplitCounts> {
    manifests.iter().map(|m| (m.kind, m.counts())).collect()
}
