//! From-scratch regression random forest.
//!
//! CART trees with variance-reduction splits, bootstrap bagging and a
//! frozen seeding scheme: tree `t` uses `derive_seed(hyper.seed, t)`,
//! draws its bootstrap indices first (one bounded draw per training
//! row) and then per-node feature subsets in depth-first preorder, left
//! child before right. Identical inputs and seed give bit-identical
//! models regardless of how many threads fit the trees.

mod codec;
mod tree;

pub use codec::{deserialize_forest, serialize_forest, DecodeError, FORMAT_VERSION};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{derive_seed, fnv1a64, Xoshiro256PlusPlus};
use crate::telemetry::{apply_normalizer, FeatureTable, NormStats};

/// Identifier of the frozen generator scheme, recorded in the model
/// header flags (bits 1-3).
pub const RNG_ID: u16 = 1;
/// Human-readable name of [`RNG_ID`], stored in model metadata.
pub const RNG_NAME: &str = "splitmix64/xoshiro256++ v1";

/// Header flag bit 0: bootstrap resampling was enabled during training.
pub const FLAG_BOOTSTRAP: u16 = 1;

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("fit error: empty training input")]
    EmptyInput,
    #[error("fit error: non-finite value in training data")]
    NonFinite,
    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),
    #[error("schema error: unknown target `{0}`")]
    UnknownTarget(String),
    #[error("dimension mismatch: expected {expected} features, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("metadata error: {0}")]
    Meta(#[from] serde_json::Error),
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub n_estimators: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// `None` grows trees until the other stop rules fire.
    pub max_depth: Option<usize>,
    /// `None` uses `max(1, n_features / 3)` at fit time.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            n_estimators: 100,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_depth: None,
            features_per_split: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl HyperParams {
    /// Validate against a concrete feature count and resolve the
    /// per-split feature budget.
    pub fn resolve_features_per_split(&self, n_features: usize) -> Result<usize, ForestError> {
        if self.n_estimators == 0 {
            return Err(ForestError::InvalidParams("n_estimators must be >= 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(ForestError::InvalidParams("min_samples_split must be >= 2".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(ForestError::InvalidParams("min_samples_leaf must be >= 1".into()));
        }
        if self.max_depth == Some(0) {
            return Err(ForestError::InvalidParams("max_depth must be >= 1".into()));
        }
        let m = self.features_per_split.unwrap_or((n_features / 3).max(1));
        if m == 0 || m > n_features {
            return Err(ForestError::InvalidParams(format!(
                "features_per_split {m} out of range 1..={n_features}"
            )));
        }
        Ok(m)
    }
}

/// One node of a fitted tree. Nodes live in a flat arena per tree with
/// the root at index 0; internal nodes route `x[feature] <= threshold`
/// to `left`, else `right`.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf { value: f64, n_samples: u32 },
    Internal {
        feature_index: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

/// The ensemble itself: exactly what the binary model format stores.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub seed: u64,
    pub flags: u16,
    pub n_features: u32,
    pub trees: Vec<Vec<TreeNode>>,
}

impl Forest {
    /// Mean of the per-tree leaf values reached by `row`.
    ///
    /// The values are summed in sorted order, so the prediction is
    /// exactly invariant under tree permutation.
    pub fn predict(&self, row: &[f64]) -> Result<f64, ForestError> {
        if row.len() != self.n_features as usize {
            return Err(ForestError::Dimension {
                expected: self.n_features as usize,
                got: row.len(),
            });
        }
        let mut leaf_values: Vec<f64> = self
            .trees
            .iter()
            .map(|tree| route_to_leaf(tree, row))
            .collect();
        leaf_values.sort_unstable_by(f64::total_cmp);
        Ok(leaf_values.iter().sum::<f64>() / leaf_values.len() as f64)
    }

    /// Maximum node depth over all trees (root = 0).
    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(|t| tree_depth(t, 0, 0)).max().unwrap_or(0)
    }

    pub fn fingerprint(&self) -> u64 {
        fnv1a64(&serialize_forest(self))
    }
}

fn route_to_leaf(tree: &[TreeNode], row: &[f64]) -> f64 {
    let mut idx = 0usize;
    loop {
        match tree[idx] {
            TreeNode::Leaf { value, .. } => return value,
            TreeNode::Internal {
                feature_index,
                threshold,
                left,
                right,
            } => {
                idx = if row[feature_index as usize] <= threshold {
                    left as usize
                } else {
                    right as usize
                };
            }
        }
    }
}

fn tree_depth(tree: &[TreeNode], idx: usize, depth: usize) -> usize {
    match tree[idx] {
        TreeNode::Leaf { .. } => depth,
        TreeNode::Internal { left, right, .. } => tree_depth(tree, left as usize, depth + 1)
            .max(tree_depth(tree, right as usize, depth + 1)),
    }
}

/// Everything about a model that is not the tree ensemble: feature
/// schema, frozen normalization statistics and training provenance.
/// Stored as a JSON sidecar next to the binary model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub format_version: u16,
    pub target_name: String,
    pub state_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub lag: usize,
    pub norm_stats: Option<NormStats>,
    pub hyper: HyperParams,
    /// FNV-1a 64 of the training matrix, hex encoded.
    pub train_fingerprint: String,
    pub rng: String,
}

/// A fitted forest plus its metadata. Immutable; safe to share across
/// threads for concurrent prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub forest: Forest,
    pub meta: ModelMeta,
}

impl ForestModel {
    /// Predict from an already-normalized feature row.
    pub fn predict(&self, row: &[f64]) -> Result<f64, ForestError> {
        self.forest.predict(row)
    }

    /// Predict from a raw feature row, applying the stored
    /// normalization statistics first (identity when none were fitted).
    pub fn predict_raw(&self, raw_row: &[f64]) -> Result<f64, ForestError> {
        match &self.meta.norm_stats {
            None => self.forest.predict(raw_row),
            Some(stats) => {
                let normalized = apply_normalizer(stats, raw_row).map_err(|_| {
                    ForestError::Dimension {
                        expected: stats.means.len(),
                        got: raw_row.len(),
                    }
                })?;
                self.forest.predict(&normalized)
            }
        }
    }

    /// Write the binary model to `path` and its metadata to
    /// `<path>.json`.
    pub fn save(&self, path: &std::path::Path) -> Result<(), ForestError> {
        std::fs::write(path, serialize_forest(&self.forest))?;
        let meta_json = serde_json::to_string_pretty(&self.meta)?;
        std::fs::write(sidecar_path(path), meta_json)?;
        Ok(())
    }

    /// Load a model saved by [`ForestModel::save`].
    pub fn load(path: &std::path::Path) -> Result<Self, ForestError> {
        let bytes = std::fs::read(path)?;
        let forest = deserialize_forest(&bytes)?;
        let meta: ModelMeta = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
        Ok(ForestModel { forest, meta })
    }
}

/// Metadata sidecar location for a binary model path.
pub fn sidecar_path(path: &std::path::Path) -> std::path::PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".json");
    path.with_file_name(name)
}

/// Fit a single CART tree. No bootstrap: every row is used once. The
/// generator seeded with `tree_seed` supplies per-node feature subsets.
pub fn fit_tree(
    rows: &[f64],
    n_features: usize,
    y: &[f64],
    hyper: &HyperParams,
    tree_seed: u64,
) -> Result<Vec<TreeNode>, ForestError> {
    validate_matrix(rows, n_features, y)?;
    let m = hyper.resolve_features_per_split(n_features)?;
    let samples: Vec<u32> = (0..y.len() as u32).collect();
    let mut rng = Xoshiro256PlusPlus::new(tree_seed);
    Ok(tree::fit_tree_with_samples(rows, n_features, y, &samples, hyper, m, &mut rng))
}

/// Fit a forest on one target column of a feature table.
pub fn fit_forest(
    table: &FeatureTable,
    target: &str,
    hyper: &HyperParams,
) -> Result<ForestModel, ForestError> {
    let y = table
        .target_column(target)
        .ok_or_else(|| ForestError::UnknownTarget(target.to_string()))?;
    validate_matrix(&table.rows, table.n_features, &y)?;
    let m = hyper.resolve_features_per_split(table.n_features)?;
    let n_rows = table.n_rows;

    let trees: Vec<Vec<TreeNode>> = (0..hyper.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = Xoshiro256PlusPlus::new(derive_seed(hyper.seed, t as u64));
            let samples: Vec<u32> = if hyper.bootstrap {
                (0..n_rows).map(|_| rng.gen_range(n_rows as u64) as u32).collect()
            } else {
                (0..n_rows as u32).collect()
            };
            tree::fit_tree_with_samples(&table.rows, table.n_features, &y, &samples, hyper, m, &mut rng)
        })
        .collect();

    let flags = if hyper.bootstrap { FLAG_BOOTSTRAP } else { 0 } | (RNG_ID << 1);
    let forest = Forest {
        seed: hyper.seed,
        flags,
        n_features: table.n_features as u32,
        trees,
    };
    let meta = ModelMeta {
        format_version: FORMAT_VERSION,
        target_name: target.to_string(),
        state_names: table.state_names.clone(),
        feature_names: table.feature_names.clone(),
        lag: table.lag,
        norm_stats: table.norm_stats.clone(),
        hyper: hyper.clone(),
        train_fingerprint: format!("{:016x}", table_fingerprint(table, target, &y)),
        rng: RNG_NAME.to_string(),
    };
    Ok(ForestModel { forest, meta })
}

fn validate_matrix(rows: &[f64], n_features: usize, y: &[f64]) -> Result<(), ForestError> {
    if y.is_empty() || n_features == 0 {
        return Err(ForestError::EmptyInput);
    }
    if rows.len() != y.len() * n_features {
        return Err(ForestError::Dimension {
            expected: y.len() * n_features,
            got: rows.len(),
        });
    }
    if rows.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(ForestError::NonFinite);
    }
    Ok(())
}

/// FNV-1a 64 over a canonical encoding of the training matrix.
fn table_fingerprint(table: &FeatureTable, target: &str, y: &[f64]) -> u64 {
    let mut bytes = Vec::with_capacity(16 + table.rows.len() * 8 + y.len() * 8);
    bytes.extend_from_slice(&(table.n_rows as u64).to_le_bytes());
    bytes.extend_from_slice(&(table.n_features as u64).to_le_bytes());
    for name in &table.feature_names {
        bytes.extend_from_slice(name.as_bytes());
        bytes.push(0xFF);
    }
    bytes.extend_from_slice(target.as_bytes());
    bytes.push(0xFF);
    for v in table.rows.iter().chain(y.iter()) {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fnv1a64(&bytes)
}
