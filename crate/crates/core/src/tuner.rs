//! Metrics and cross-validated grid search.
//!
//! Folds are contiguous blocks: the telemetry is a time series, and
//! shuffled folds would leak lagged copies of validation rows into
//! training. Normalization statistics are refit on each fold's training
//! split only. Per-evaluation seeds are
//! `derive_seed(derive_seed(base_seed, combo_index), fold_index)`, so
//! the report is a pure function of (table, grid, k, base seed) no
//! matter how many threads evaluate it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forest::{fit_forest, ForestError, HyperParams};
use crate::rng::derive_seed;
use crate::telemetry::{apply_normalizer, fit_normalizer, FeatureTable, TelemetryError};

#[derive(Debug, Error)]
pub enum TunerError {
    #[error("metric input lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("metric input is empty")]
    EmptyInput,
    #[error("R^2 needs at least 2 observations, got {0}")]
    TooFewObservations(usize),
    #[error("R^2 is undefined: target is constant")]
    ConstantTarget,
    #[error("{n_rows} rows cannot form {k} folds")]
    TooFewRows { n_rows: usize, k: usize },
    #[error("grid is empty")]
    EmptyGrid,
    #[error("combo {combo} fold {fold}: {source}")]
    Fit {
        combo: usize,
        fold: usize,
        source: ForestError,
    },
    #[error("combo {combo} fold {fold}: {source}")]
    Normalize {
        combo: usize,
        fold: usize,
        source: TelemetryError,
    },
}

/// Mean squared error.
pub fn mse(y: &[f64], yhat: &[f64]) -> Result<f64, TunerError> {
    if y.len() != yhat.len() {
        return Err(TunerError::LengthMismatch {
            left: y.len(),
            right: yhat.len(),
        });
    }
    if y.is_empty() {
        return Err(TunerError::EmptyInput);
    }
    let sum: f64 = y
        .iter()
        .zip(yhat)
        .map(|(a, b)| {
            let r = a - b;
            r * r
        })
        .sum();
    Ok(sum / y.len() as f64)
}

/// Coefficient of determination, `1 - SS_res / SS_tot`. A constant
/// target is an explicit error, never a silent NaN.
pub fn r2(y: &[f64], yhat: &[f64]) -> Result<f64, TunerError> {
    if y.len() != yhat.len() {
        return Err(TunerError::LengthMismatch {
            left: y.len(),
            right: yhat.len(),
        });
    }
    if y.len() < 2 {
        return Err(TunerError::TooFewObservations(y.len()));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|a| (a - mean) * (a - mean)).sum();
    if ss_tot == 0.0 {
        return Err(TunerError::ConstantTarget);
    }
    let ss_res: f64 = y
        .iter()
        .zip(yhat)
        .map(|(a, b)| {
            let r = a - b;
            r * r
        })
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// One cross-validation fold: a contiguous validation block and its
/// complement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub validation: std::ops::Range<usize>,
}

impl Fold {
    pub fn train_indices(&self, n_rows: usize) -> Vec<usize> {
        (0..self.validation.start)
            .chain(self.validation.end..n_rows)
            .collect()
    }

    pub fn validation_indices(&self) -> Vec<usize> {
        self.validation.clone().collect()
    }
}

/// Split `n_rows` into `k` contiguous validation blocks covering every
/// row, sizes differing by at most one (earlier blocks take the
/// remainder).
pub fn kfold_splits(n_rows: usize, k: usize) -> Result<Vec<Fold>, TunerError> {
    if k < 2 || n_rows < k {
        return Err(TunerError::TooFewRows { n_rows, k });
    }
    let base = n_rows / k;
    let rem = n_rows % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let size = base + usize::from(i < rem);
        folds.push(Fold {
            validation: start..start + size,
        });
        start += size;
    }
    Ok(folds)
}

/// Cross-validation outcome for one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVReport {
    pub k: usize,
    pub base_seed: u64,
    pub grid: Vec<HyperParams>,
    /// `fold_mse[combo][fold]`.
    pub fold_mse: Vec<Vec<f64>>,
    pub mean_mse: Vec<f64>,
    /// Index into `grid` of the winning combo.
    pub best: usize,
    pub fold_boundaries: Vec<Fold>,
}

impl CVReport {
    pub fn best_params(&self) -> &HyperParams {
        &self.grid[self.best]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("CVReport is always serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// The default tuning grid: estimators {10, 25, 50, 75, 100} x
/// min_samples_split {2, 3, 4, 5} x min_samples_leaf {1, 2, 3},
/// 60 combos in that nesting order.
pub fn default_grid() -> Vec<HyperParams> {
    let mut grid = Vec::with_capacity(60);
    for &n_estimators in &[10usize, 25, 50, 75, 100] {
        for min_samples_split in 2..=5usize {
            for min_samples_leaf in 1..=3usize {
                grid.push(HyperParams {
                    n_estimators,
                    min_samples_split,
                    min_samples_leaf,
                    ..HyperParams::default()
                });
            }
        }
    }
    grid
}

/// Evaluate every combo with k-fold cross-validation on one target and
/// pick the winner by mean MSE. Ties go to the combo with fewer
/// estimators, then the smaller grid index.
pub fn grid_search(
    table: &FeatureTable,
    target: &str,
    grid: &[HyperParams],
    k: usize,
    base_seed: u64,
) -> Result<CVReport, TunerError> {
    if grid.is_empty() {
        return Err(TunerError::EmptyGrid);
    }
    let folds = kfold_splits(table.n_rows, k)?;

    let fold_mse: Vec<Vec<f64>> = grid
        .par_iter()
        .enumerate()
        .map(|(combo_idx, combo)| {
            folds
                .iter()
                .enumerate()
                .map(|(fold_idx, fold)| evaluate_fold(table, target, combo, combo_idx, fold, fold_idx, base_seed))
                .collect::<Result<Vec<f64>, TunerError>>()
        })
        .collect::<Result<_, _>>()?;

    let mean_mse: Vec<f64> = fold_mse
        .iter()
        .map(|mses| mses.iter().sum::<f64>() / mses.len() as f64)
        .collect();

    let mut best = 0usize;
    for i in 1..grid.len() {
        let better = mean_mse[i] < mean_mse[best]
            || (mean_mse[i] == mean_mse[best] && grid[i].n_estimators < grid[best].n_estimators);
        if better {
            best = i;
        }
    }

    Ok(CVReport {
        k,
        base_seed,
        grid: grid.to_vec(),
        fold_mse,
        mean_mse,
        best,
        fold_boundaries: folds,
    })
}

fn evaluate_fold(
    table: &FeatureTable,
    target: &str,
    combo: &HyperParams,
    combo_idx: usize,
    fold: &Fold,
    fold_idx: usize,
    base_seed: u64,
) -> Result<f64, TunerError> {
    let wrap_fit = |source| TunerError::Fit {
        combo: combo_idx,
        fold: fold_idx,
        source,
    };
    let wrap_norm = |source| TunerError::Normalize {
        combo: combo_idx,
        fold: fold_idx,
        source,
    };

    let train = table.select_rows(&fold.train_indices(table.n_rows));
    let train = fit_normalizer(train).map_err(wrap_norm)?;
    let stats = train.norm_stats.clone().expect("stats set by fit_normalizer");

    let hyper = HyperParams {
        seed: derive_seed(derive_seed(base_seed, combo_idx as u64), fold_idx as u64),
        ..combo.clone()
    };
    let model = fit_forest(&train, target, &hyper).map_err(wrap_fit)?;

    let validation = table.select_rows(&fold.validation_indices());
    let y = validation
        .target_column(target)
        .ok_or_else(|| wrap_fit(ForestError::UnknownTarget(target.to_string())))?;
    let yhat: Vec<f64> = (0..validation.n_rows)
        .map(|i| {
            let row = apply_normalizer(&stats, validation.row(i)).map_err(wrap_norm)?;
            model.predict(&row).map_err(wrap_fit)
        })
        .collect::<Result<_, _>>()?;
    mse(&y, &yhat)
}
