use std::path::Path;

use serde::{Deserialize, Serialize};

use super::retrieval::{embed_split, report_from_embeddings, Direction, RetrievalMode};
use crate::alignment::{train, AlignmentConfig, JointModel, TrainOutcome};
use crate::chemdata::{Dataset, Modality, PairKind, Split};
use crate::encoders::EncoderConfig;
use crate::error::{Error, Result};
use crate::numerics::{AdamConfig, SeedRng};

/// Chance-level R@1 (percent) with `c` candidates.
pub fn chance_recall_at_1(c: usize) -> f64 {
    100.0 / c as f64
}

/// Standard error (percent) of R@1 over `n` queries when every query hits
/// with probability `1/c`.
pub fn chance_standard_error(c: usize, n: usize) -> f64 {
    let p = 1.0 / c as f64;
    100.0 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Matched-versus-mismatched cosine similarity test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationTest {
    /// Mean matched similarity minus mean mismatched similarity.
    pub margin: f64,
    pub p_value: f64,
    pub shuffles: usize,
}

/// One-sided permutation test on rows `a_i`, `b_i` (row-major, width
/// `dim`): how often does a random re-pairing reach the observed margin?
/// `p = (1 + #{margin_perm >= margin_obs}) / (1 + shuffles)`.
pub fn permutation_test(a: &[f64], b: &[f64], dim: usize, shuffles: usize, seed: u64) -> Result<PermutationTest> {
    let n = a.len() / dim.max(1);
    if n < 2 || a.len() != b.len() || a.len() != n * dim {
        return Err(Error::contract("permutation test needs two aligned sets of at least 2 rows"));
    }
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            s[i * n + j] = a[i * dim..(i + 1) * dim]
                .iter()
                .zip(&b[j * dim..(j + 1) * dim])
                .map(|(x, y)| x * y)
                .sum();
        }
    }
    let total: f64 = s.iter().sum();
    let off = (n * (n - 1)) as f64;
    let margin_of = |perm: &[usize]| {
        let m: f64 = (0..n).map(|i| s[i * n + perm[i]]).sum();
        m / n as f64 - (total - m) / off
    };
    let ident: Vec<usize> = (0..n).collect();
    let observed = margin_of(&ident);
    let mut rng = SeedRng::new(seed);
    let mut perm = ident;
    let mut exceed = 0usize;
    for _ in 0..shuffles {
        rng.shuffle(&mut perm);
        if margin_of(&perm) >= observed {
            exceed += 1;
        }
    }
    Ok(PermutationTest {
        margin: observed,
        p_value: (1 + exceed) as f64 / (1 + shuffles) as f64,
        shuffles,
    })
}

/// Row label in the style `(language, graph) & (graph, conformation)`.
pub fn configuration_label(pairs: &[PairKind]) -> String {
    pairs.iter().map(|k| k.label()).collect::<Vec<_>>().join(" & ")
}

/// The ablation rows: each single kind among language-graph,
/// language-conformation and graph-conformation, the three two-kind
/// combinations, then all four kinds.
pub fn standard_configurations() -> Vec<Vec<PairKind>> {
    use PairKind::*;
    vec![
        vec![LanguageGraph],
        vec![LanguageConformation],
        vec![GraphConformation],
        vec![LanguageGraph, LanguageConformation],
        vec![LanguageGraph, GraphConformation],
        vec![LanguageConformation, GraphConformation],
        PairKind::ALL.to_vec(),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub configuration: String,
    pub pairs: Vec<PairKind>,
    pub seed: u64,
    pub epochs_run: usize,
    pub l2g_recall_at_1: f64,
    pub l2c_recall_at_1: f64,
    pub n_test: usize,
    /// Language-conformation matched-vs-mismatched test on the test split.
    pub l2c_permutation: PermutationTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

/// Shuffles used by the permutation test in ablation rows.
pub const PERMUTATION_SHUFFLES: usize = 10_000;

impl AblationTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Data(format!("csv: {e}"));
        w.write_record([
            "configuration",
            "seed",
            "epochs_run",
            "l2g_recall_at_1",
            "l2c_recall_at_1",
            "n_test",
            "l2c_margin",
            "l2c_p_value",
        ])
        .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.configuration.clone(),
                r.seed.to_string(),
                r.epochs_run.to_string(),
                format!("{:.4}", r.l2g_recall_at_1),
                format!("{:.4}", r.l2c_recall_at_1),
                r.n_test.to_string(),
                format!("{:.6}", r.l2c_permutation.margin),
                format!("{:.6}", r.l2c_permutation.p_value),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
    }

    pub fn row(&self, pairs: &[PairKind]) -> Option<&AblationRow> {
        let mut want = pairs.to_vec();
        want.sort();
        self.rows.iter().find(|r| {
            let mut have = r.pairs.clone();
            have.sort();
            have == want
        })
    }
}

/// Scores a trained configuration: full-test L2G and L2C R@1 plus the
/// language-conformation permutation test.
pub fn ablation_row(ds: &Dataset, pairs: &[PairKind], outcome: &TrainOutcome, seed: u64) -> Result<AblationRow> {
    let lg = embed_split(&outcome.best, ds, PairKind::LanguageGraph, Split::Test)?;
    let lc = embed_split(&outcome.best, ds, PairKind::LanguageConformation, Split::Test)?;
    let l2g = report_from_embeddings(&lg, Direction::forward(PairKind::LanguageGraph), RetrievalMode::FullSet)?;
    let l2c = report_from_embeddings(&lc, Direction::forward(PairKind::LanguageConformation), RetrievalMode::FullSet)?;
    let perm = permutation_test(
        lc.side(Modality::Language),
        lc.side(Modality::Conformation),
        lc.dim,
        PERMUTATION_SHUFFLES,
        seed,
    )?;
    Ok(AblationRow {
        configuration: configuration_label(pairs),
        pairs: pairs.to_vec(),
        seed,
        epochs_run: outcome.epochs_run,
        l2g_recall_at_1: l2g.recall_at(1).unwrap_or(0.0),
        l2c_recall_at_1: l2c.recall_at(1).unwrap_or(0.0),
        n_test: lc.n,
        l2c_permutation: perm,
    })
}

/// Trains one model per configuration from the same seed and scores
/// full-test L2G and L2C retrieval for each. Language-graph and
/// language-conformation manifests must exist for scoring even when a
/// configuration does not train on them.
pub fn ablation_run(
    ds: &Dataset,
    configurations: &[Vec<PairKind>],
    cfg: &AlignmentConfig,
    encoders: EncoderConfig,
) -> Result<AblationTable> {
    if configurations.is_empty() {
        return Err(Error::Config("ablation grid is empty".into()));
    }
    let mut rows = Vec::with_capacity(configurations.len());
    for pairs in configurations {
        if pairs.is_empty() {
            return Err(Error::Config("ablation configuration with no pair kinds".into()));
        }
        let run_cfg = AlignmentConfig {
            active_pairs: pairs.clone(),
            ..cfg.clone()
        };
        let adam = AdamConfig {
            lr: cfg.learning_rate,
            ..AdamConfig::default()
        };
        let model = JointModel::for_dataset(ds, encoders, cfg.learnable_temperature, adam, cfg.seed)?;
        let outcome = train(model, ds, &run_cfg, None)?;
        rows.push(ablation_row(ds, pairs, &outcome, cfg.seed)?);
    }
    Ok(AblationTable { rows })
}
