//! Rankings, top-n subsets, and the two baselines.

mod baseline;
mod pca;

use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::debate::FeatureVerdict;
use crate::{Error, Result};

pub use baseline::{llm_select_score, score_single_prompt, BaselineRecord, SELECTOR_ROLE};
pub use pca::{pca_transform, Pca, PcaOptions};

/// Subset sizes used when none are configured.
pub const DEFAULT_SUBSET_SIZES: [usize; 6] = [5, 10, 20, 30, 40, 50];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub feature: String,
    pub score: f64,
    /// Column index used to break ties.
    pub original_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub method_id: String,
    pub provenance: String,
    pub entries: Vec<RankedFeature>,
}

impl Ranking {
    /// Sorts by score descending, ties by ascending original index.
    pub fn from_scores(
        method_id: impl Into<String>,
        provenance: impl Into<String>,
        mut entries: Vec<RankedFeature>,
    ) -> Self {
        entries.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(a.original_index.cmp(&b.original_index))
        });
        Self {
            method_id: method_id.into(),
            provenance: provenance.into(),
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.feature.clone()).collect()
    }

    /// Same features, same order, same scores (method and provenance ignored).
    pub fn same_order_and_scores(&self, other: &Ranking) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.feature == b.feature && a.score.to_bits() == b.score.to_bits())
    }

    /// Writes `rank,feature,score,original_index,method,run_id,config_hash`.
    pub fn write_csv(&self, path: impl AsRef<Path>, config_hash: &str) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record([
            "rank",
            "feature",
            "score",
            "original_index",
            "method",
            "run_id",
            "config_hash",
        ])
        .map_err(|e| Error::csv(path, e))?;
        for (i, e) in self.entries.iter().enumerate() {
            w.write_record([
                (i + 1).to_string(),
                e.feature.clone(),
                format!("{:?}", e.score),
                e.original_index.to_string(),
                self.method_id.clone(),
                self.provenance.clone(),
                config_hash.to_string(),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Ranking> {
        #[derive(Deserialize)]
        struct Row {
            feature: String,
            score: f64,
            original_index: usize,
            method: String,
            run_id: String,
        }
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = csv::Reader::from_reader(file);
        let rows: Vec<Row> = r
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::csv(path, e))?;
        let first = rows.first().ok_or_else(|| Error::EmptyDataset {
            path: path.to_path_buf(),
        })?;
        Ok(Ranking {
            method_id: first.method.clone(),
            provenance: first.run_id.clone(),
            entries: rows
                .iter()
                .map(|r| RankedFeature {
                    feature: r.feature.clone(),
                    score: r.score,
                    original_index: r.original_index,
                })
                .collect(),
        })
    }
}

/// Ranks verdicts by final score.
pub fn rank(verdicts: &[FeatureVerdict], method_id: &str, provenance: &str) -> Result<Ranking> {
    if verdicts.is_empty() {
        return Err(Error::InvalidArgument("cannot rank an empty verdict list".into()));
    }
    Ok(Ranking::from_scores(
        method_id,
        provenance,
        verdicts
            .iter()
            .map(|v| RankedFeature {
                feature: v.feature_name.clone(),
                score: v.s_final,
                original_index: v.feature_index,
            })
            .collect(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSpec {
    /// Requested size.
    pub n: usize,
    /// The first `min(n, len)` features of the ranking.
    pub feature_names: Vec<String>,
}

/// Prefixes of the ranking for each requested size.
///
/// Sizes must be positive and strictly ascending; sizes above the feature
/// count are clamped with a warning.
pub fn top_n_subsets(r: &Ranking, ns: &[usize]) -> Result<Vec<SubsetSpec>> {
    validate_sizes(ns)?;
    Ok(ns
        .iter()
        .map(|&n| {
            if n > r.len() {
                warn!(
                    "subset size {n} exceeds {} ranked features; clamping",
                    r.len()
                );
            }
            let k = n.min(r.len());
            SubsetSpec {
                n,
                feature_names: r.entries[..k].iter().map(|e| e.feature.clone()).collect(),
            }
        })
        .collect())
}

pub fn validate_sizes(ns: &[usize]) -> Result<()> {
    if ns.is_empty() {
        return Err(Error::InvalidArgument("no subset sizes given".into()));
    }
    if ns.contains(&0) {
        return Err(Error::InvalidArgument("subset sizes must be positive".into()));
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "subset sizes must be strictly ascending, got {ns:?}"
        )));
    }
    Ok(())
}
