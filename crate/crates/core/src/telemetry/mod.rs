//! Plant telemetry ingestion and featurization.
//!
//! Raw time-stamped records (machine states plus intermittently sampled
//! sensors) are cleaned, flattened into a lagged feature table and
//! z-score normalized. Normalization statistics are captured once at fit
//! time and reused verbatim at inference, never refit.

mod io;

pub use io::{ingest_csv, stream_to_csv_string};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("timestamps not strictly increasing at data row {row}")]
    Ordering { row: usize },
    #[error("unparseable timestamp at data row {row}")]
    BadTimestamp { row: usize },
    #[error("flatten produced an empty table: {0}")]
    EmptyTable(String),
    #[error("dimension mismatch: expected {expected} values, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Column names of a telemetry stream: machine states (actuator
/// settings, always the model inputs) and sensors (targets, possibly
/// intermittent).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TelemetrySchema {
    pub state_names: Vec<String>,
    pub sensor_names: Vec<String>,
}

impl TelemetrySchema {
    pub fn new<S: Into<String>>(states: Vec<S>, sensors: Vec<S>) -> Self {
        TelemetrySchema {
            state_names: states.into_iter().map(Into::into).collect(),
            sensor_names: sensors.into_iter().map(Into::into).collect(),
        }
    }

    pub fn sensor_index(&self, name: &str) -> Option<usize> {
        self.sensor_names.iter().position(|n| n == name)
    }
}

/// One timestamped sample. Values are aligned with the owning stream's
/// schema; `None` marks an absent or unparseable cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRecord {
    pub timestamp: i64,
    pub states: Vec<Option<f64>>,
    pub sensors: Vec<Option<f64>>,
}

/// A schema plus its records, timestamps strictly increasing.
#[derive(Debug, Clone)]
pub struct TelemetryStream {
    pub schema: TelemetrySchema,
    pub records: Vec<TelemetryRecord>,
}

/// How lag windows treat gaps in the sample cadence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GapPolicy {
    /// Never split the stream.
    None,
    /// Split wherever the inter-sample interval exceeds `factor` times
    /// the median interval, so lag features never span an outage.
    MedianFactor(f64),
    /// Split wherever the interval exceeds a fixed number of seconds.
    FixedSeconds(i64),
}

#[derive(Debug, Clone)]
pub struct FlattenOptions {
    pub gap_policy: GapPolicy,
}

impl Default for FlattenOptions {
    fn default() -> Self {
        FlattenOptions {
            gap_policy: GapPolicy::MedianFactor(10.0),
        }
    }
}

/// Per-feature normalization statistics frozen at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub means: Vec<f64>,
    /// Population standard deviation; exactly 1.0 for zero-variance
    /// columns so normalization stays invertible.
    pub stds: Vec<f64>,
}

/// Flat numeric design matrix: lagged machine states as features,
/// aligned sensor readings as targets. Immutable once built; share it
/// read-only across threads.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub state_names: Vec<String>,
    /// `<state>_lag<k>` for k = 0..=lag, lag-major.
    pub feature_names: Vec<String>,
    pub target_names: Vec<String>,
    pub lag: usize,
    pub n_rows: usize,
    pub n_features: usize,
    /// Row-major, `n_rows * n_features`.
    pub rows: Vec<f64>,
    /// Row-major, `n_rows * target_names.len()`.
    pub targets: Vec<f64>,
    /// Timestamp of the current (lag-0) sample of each row.
    pub row_timestamps: Vec<i64>,
    pub norm_stats: Option<NormStats>,
}

impl FeatureTable {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn target_column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.target_names.iter().position(|n| n == name)?;
        let k = self.target_names.len();
        Some((0..self.n_rows).map(|i| self.targets[i * k + j]).collect())
    }

    /// Copy of the listed rows, in the given order. Normalization stats
    /// are not carried over; the subset is a raw table.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureTable {
        let k = self.target_names.len();
        let mut rows = Vec::with_capacity(indices.len() * self.n_features);
        let mut targets = Vec::with_capacity(indices.len() * k);
        let mut row_timestamps = Vec::with_capacity(indices.len());
        for &i in indices {
            rows.extend_from_slice(self.row(i));
            targets.extend_from_slice(&self.targets[i * k..(i + 1) * k]);
            row_timestamps.push(self.row_timestamps[i]);
        }
        FeatureTable {
            state_names: self.state_names.clone(),
            feature_names: self.feature_names.clone(),
            target_names: self.target_names.clone(),
            lag: self.lag,
            n_rows: indices.len(),
            n_features: self.n_features,
            rows,
            targets,
            row_timestamps,
            norm_stats: None,
        }
    }

    /// CSV export: feature columns then target columns, one row each.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self
            .feature_names
            .iter()
            .chain(self.target_names.iter())
            .map(|s| s.as_str())
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        let k = self.target_names.len();
        for i in 0..self.n_rows {
            let mut cells: Vec<String> = self.row(i).iter().map(|v| format!("{v}")).collect();
            cells.extend(self.targets[i * k..(i + 1) * k].iter().map(|v| format!("{v}")));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Flatten a telemetry stream into a lagged feature table.
///
/// Row `i` (counted inside a contiguous segment, `i >= lag`) holds the
/// states at times `i, i-1, ..., i-lag`, lag-major in schema order; its
/// targets are the requested sensors at time `i`. Rows with any absent
/// required value (a state anywhere in the window, or a requested
/// target) are dropped. Lag windows are taken by row position and never
/// cross a gap boundary (see [`GapPolicy`]).
pub fn flatten(
    stream: &TelemetryStream,
    lag: usize,
    targets: &[&str],
    opts: &FlattenOptions,
) -> Result<FeatureTable, TelemetryError> {
    let records = &stream.records;
    if records.is_empty() {
        return Err(TelemetryError::EmptyTable("no records".into()));
    }
    if lag >= records.len() {
        return Err(TelemetryError::EmptyTable(format!(
            "lag {lag} >= record count {}",
            records.len()
        )));
    }
    // The stream precondition is sorted input; a shuffled stream is an
    // error, never silently reordered.
    for (i, w) in records.windows(2).enumerate() {
        if w[1].timestamp <= w[0].timestamp {
            return Err(TelemetryError::Ordering { row: i + 2 });
        }
    }
    let target_idx: Vec<usize> = targets
        .iter()
        .map(|t| {
            stream
                .schema
                .sensor_index(t)
                .ok_or_else(|| TelemetryError::Schema(format!("unknown sensor `{t}`")))
        })
        .collect::<Result<_, _>>()?;

    let segments = segment_boundaries(records, opts.gap_policy);
    let n_states = stream.schema.state_names.len();
    let n_features = n_states * (lag + 1);

    let mut feature_names = Vec::with_capacity(n_features);
    for k in 0..=lag {
        for s in &stream.schema.state_names {
            feature_names.push(format!("{s}_lag{k}"));
        }
    }

    let mut rows = Vec::new();
    let mut target_vals = Vec::new();
    let mut row_timestamps = Vec::new();
    for seg in &segments {
        if seg.len() <= lag {
            continue;
        }
        'row: for i in (seg.start + lag)..seg.end {
            for k in 0..=lag {
                for s in 0..n_states {
                    if records[i - k].states[s].is_none() {
                        continue 'row;
                    }
                }
            }
            for &t in &target_idx {
                if records[i].sensors[t].is_none() {
                    continue 'row;
                }
            }
            for k in 0..=lag {
                for s in 0..n_states {
                    rows.push(records[i - k].states[s].unwrap());
                }
            }
            for &t in &target_idx {
                target_vals.push(records[i].sensors[t].unwrap());
            }
            row_timestamps.push(records[i].timestamp);
        }
    }

    Ok(FeatureTable {
        state_names: stream.schema.state_names.clone(),
        feature_names,
        target_names: targets.iter().map(|s| s.to_string()).collect(),
        lag,
        n_rows: row_timestamps.len(),
        n_features,
        rows,
        targets: target_vals,
        row_timestamps,
        norm_stats: None,
    })
}

fn segment_boundaries(records: &[TelemetryRecord], policy: GapPolicy) -> Vec<std::ops::Range<usize>> {
    let max_gap: Option<f64> = match policy {
        GapPolicy::None => None,
        GapPolicy::FixedSeconds(s) => Some(s as f64),
        GapPolicy::MedianFactor(f) => {
            if records.len() < 2 {
                None
            } else {
                let mut deltas: Vec<i64> = records
                    .windows(2)
                    .map(|w| w[1].timestamp - w[0].timestamp)
                    .collect();
                deltas.sort_unstable();
                // Lower median keeps the threshold integer-exact.
                let median = deltas[(deltas.len() - 1) / 2];
                Some(f * median as f64)
            }
        }
    };
    let mut segments = Vec::new();
    let mut start = 0usize;
    if let Some(max_gap) = max_gap {
        for i in 1..records.len() {
            let delta = (records[i].timestamp - records[i - 1].timestamp) as f64;
            if delta > max_gap {
                segments.push(start..i);
                start = i;
            }
        }
    }
    segments.push(start..records.len());
    segments
}

/// Fit z-score statistics on the table's feature columns and return the
/// normalized table. Mean and population standard deviation per column;
/// zero-variance columns get std 1 so they normalize to zeros.
pub fn fit_normalizer(mut table: FeatureTable) -> Result<FeatureTable, TelemetryError> {
    if table.n_rows == 0 {
        return Err(TelemetryError::EmptyTable("cannot fit normalizer".into()));
    }
    let n = table.n_rows as f64;
    let nf = table.n_features;
    let mut means = vec![0.0; nf];
    let mut m2 = vec![0.0; nf];
    // Welford per column, single pass over rows.
    for i in 0..table.n_rows {
        let count = (i + 1) as f64;
        for j in 0..nf {
            let x = table.rows[i * nf + j];
            let delta = x - means[j];
            means[j] += delta / count;
            m2[j] += delta * (x - means[j]);
        }
    }
    let stds: Vec<f64> = m2
        .iter()
        .map(|&m| {
            let var = m / n;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    for i in 0..table.n_rows {
        for j in 0..nf {
            let cell = &mut table.rows[i * nf + j];
            *cell = (*cell - means[j]) / stds[j];
        }
    }
    table.norm_stats = Some(NormStats { means, stds });
    Ok(table)
}

/// Normalize one raw feature row with frozen statistics. Never refits.
pub fn apply_normalizer(stats: &NormStats, raw_row: &[f64]) -> Result<Vec<f64>, TelemetryError> {
    if raw_row.len() != stats.means.len() {
        return Err(TelemetryError::Dimension {
            expected: stats.means.len(),
            got: raw_row.len(),
        });
    }
    Ok(raw_row
        .iter()
        .zip(stats.means.iter().zip(stats.stds.iter()))
        .map(|(&x, (&m, &s))| (x - m) / s)
        .collect())
}

/// Invert [`apply_normalizer`].
pub fn denormalize_row(stats: &NormStats, normalized: &[f64]) -> Result<Vec<f64>, TelemetryError> {
    if normalized.len() != stats.means.len() {
        return Err(TelemetryError::Dimension {
            expected: stats.means.len(),
            got: normalized.len(),
        });
    }
    Ok(normalized
        .iter()
        .zip(stats.means.iter().zip(stats.stds.iter()))
        .map(|(&z, (&m, &s))| z * s + m)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schema() -> TelemetrySchema {
        TelemetrySchema::new(vec!["valve", "fan"], vec!["temp", "nox"])
    }

    fn rec(ts: i64, states: &[f64], sensors: &[Option<f64>]) -> TelemetryRecord {
        TelemetryRecord {
            timestamp: ts,
            states: states.iter().map(|&v| Some(v)).collect(),
            sensors: sensors.to_vec(),
        }
    }

    fn stream(records: Vec<TelemetryRecord>) -> TelemetryStream {
        TelemetryStream {
            schema: schema(),
            records,
        }
    }

    #[test]
    fn flatten_shapes_with_lag() {
        // 5 records, lag 2, no gaps -> 3 rows, each with 3x state columns.
        let recs: Vec<_> = (0..5)
            .map(|i| rec(i * 10, &[i as f64, 10.0 + i as f64], &[Some(1.0), Some(2.0)]))
            .collect();
        let t = flatten(&stream(recs), 2, &["nox"], &FlattenOptions::default()).unwrap();
        assert_eq!(t.n_rows, 3);
        assert_eq!(t.n_features, 6);
        assert_eq!(
            t.feature_names,
            vec!["valve_lag0", "fan_lag0", "valve_lag1", "fan_lag1", "valve_lag2", "fan_lag2"]
        );
        // Row 0 is record index 2; lag-1 column holds record 1's states.
        assert_eq!(t.row(0), &[2.0, 12.0, 1.0, 11.0, 0.0, 10.0]);
        assert_eq!(t.row_timestamps, vec![20, 30, 40]);
    }

    #[test]
    fn flatten_lag_zero_is_identity() {
        let recs: Vec<_> = (0..4)
            .map(|i| rec(i, &[i as f64, -(i as f64)], &[Some(0.0), Some(i as f64)]))
            .collect();
        let t = flatten(&stream(recs), 0, &["nox"], &FlattenOptions::default()).unwrap();
        assert_eq!(t.n_rows, 4);
        for i in 0..4 {
            assert_eq!(t.row(i), &[i as f64, -(i as f64)]);
        }
        assert_eq!(t.target_column("nox").unwrap(), vec![0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn flatten_drops_rows_missing_target() {
        let mut recs: Vec<_> = (0..5)
            .map(|i| rec(i, &[i as f64, 0.0], &[Some(1.0), Some(2.0)]))
            .collect();
        recs[3].sensors[1] = None; // nox absent
        let t = flatten(&stream(recs), 0, &["nox"], &FlattenOptions::default()).unwrap();
        assert_eq!(t.n_rows, 4);
        assert!(!t.row_timestamps.contains(&3));
    }

    #[test]
    fn flatten_rejects_unsorted() {
        let recs = vec![
            rec(10, &[0.0, 0.0], &[None, None]),
            rec(5, &[0.0, 0.0], &[None, None]),
        ];
        match flatten(&stream(recs), 0, &[], &FlattenOptions::default()) {
            Err(TelemetryError::Ordering { row }) => assert_eq!(row, 2),
            other => panic!("expected ordering error, got {other:?}"),
        }
    }

    #[test]
    fn flatten_empty_and_excess_lag_error() {
        assert!(matches!(
            flatten(&stream(vec![]), 0, &[], &FlattenOptions::default()),
            Err(TelemetryError::EmptyTable(_))
        ));
        let recs = vec![rec(0, &[1.0, 2.0], &[None, None])];
        assert!(matches!(
            flatten(&stream(recs), 1, &[], &FlattenOptions::default()),
            Err(TelemetryError::EmptyTable(_))
        ));
    }

    #[test]
    fn flatten_gap_splits_segments() {
        // Median interval 10; a 200s hole splits the stream, so no lag
        // window crosses it.
        let mut recs: Vec<_> = (0..5)
            .map(|i| rec(i * 10, &[i as f64, 0.0], &[Some(0.0), Some(0.0)]))
            .collect();
        recs.extend((0..5).map(|i| rec(240 + i * 10, &[100.0 + i as f64, 0.0], &[Some(0.0), Some(0.0)])));
        let t = flatten(&stream(recs), 2, &["nox"], &FlattenOptions::default()).unwrap();
        // Each 5-record segment yields 3 rows.
        assert_eq!(t.n_rows, 6);
        // No row mixes pre- and post-gap states (valve columns sit at
        // even offsets).
        for i in 0..t.n_rows {
            let valves: Vec<f64> = t.row(i).iter().step_by(2).copied().collect();
            let pre = valves.iter().any(|&v| v < 100.0);
            let post = valves.iter().any(|&v| v >= 100.0);
            assert!(!(pre && post), "row {i} crosses the gap: {valves:?}");
        }
    }

    #[test]
    fn flatten_drops_rows_with_absent_state_in_window() {
        let mut recs: Vec<_> = (0..5)
            .map(|i| rec(i, &[i as f64, 0.0], &[Some(0.0), Some(0.0)]))
            .collect();
        recs[2].states[0] = None;
        let t = flatten(&stream(recs), 1, &["nox"], &FlattenOptions::default()).unwrap();
        // Candidate rows are records 1..=4; records 2 and 3 need record
        // 2's states, so only rows at records 1 and 4 survive.
        assert_eq!(t.row_timestamps, vec![1, 4]);
    }

    #[test]
    fn table_exports_generated_column_names() {
        let recs: Vec<_> = (0..3)
            .map(|i| rec(i, &[i as f64, 2.0 * i as f64], &[Some(0.5), Some(7.0)]))
            .collect();
        let t = flatten(&stream(recs), 1, &["nox"], &FlattenOptions::default()).unwrap();
        let csv = t.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("valve_lag0,fan_lag0,valve_lag1,fan_lag1,nox")
        );
        assert_eq!(lines.next(), Some("1,2,0,0,7"));
        assert_eq!(lines.next(), Some("2,4,1,2,7"));
        assert_eq!(lines.next(), None);
    }

    #[test]
    fn normalizer_hand_case() {
        // Column [0, 2] -> mean 1, population std 1, normalized [-1, 1].
        let recs = vec![
            rec(0, &[0.0, 7.0], &[Some(0.0), Some(0.0)]),
            rec(1, &[2.0, 7.0], &[Some(0.0), Some(0.0)]),
        ];
        let t = flatten(&stream(recs), 0, &[], &FlattenOptions::default()).unwrap();
        let t = fit_normalizer(t).unwrap();
        let stats = t.norm_stats.as_ref().unwrap();
        assert_eq!(stats.means, vec![1.0, 7.0]);
        assert_eq!(stats.stds, vec![1.0, 1.0]); // second column zero-variance
        assert_eq!(t.row(0), &[-1.0, 0.0]);
        assert_eq!(t.row(1), &[1.0, 0.0]);
    }

    #[test]
    fn apply_normalizer_formula_and_errors() {
        let stats = NormStats {
            means: vec![1.0],
            stds: vec![1.0],
        };
        assert_eq!(apply_normalizer(&stats, &[3.0]).unwrap(), vec![2.0]);
        assert!(matches!(
            apply_normalizer(&stats, &[1.0, 2.0]),
            Err(TelemetryError::Dimension { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn apply_matches_fit_on_training_rows() {
        let recs: Vec<_> = (0..10)
            .map(|i| rec(i, &[(i * i) as f64, i as f64 * 0.5], &[Some(0.0), Some(0.0)]))
            .collect();
        let raw = flatten(&stream(recs), 0, &[], &FlattenOptions::default()).unwrap();
        let normalized = fit_normalizer(raw.clone()).unwrap();
        let stats = normalized.norm_stats.as_ref().unwrap();
        for i in 0..raw.n_rows {
            let via_apply = apply_normalizer(stats, raw.row(i)).unwrap();
            assert_eq!(via_apply.as_slice(), normalized.row(i));
        }
    }

    proptest! {
        #[test]
        fn normalized_columns_are_standardized(
            rows in proptest::collection::vec(
                proptest::collection::vec(-1e3f64..1e3, 3),
                2..40,
            )
        ) {
            let recs: Vec<_> = rows
                .iter()
                .enumerate()
                .map(|(i, r)| TelemetryRecord {
                    timestamp: i as i64,
                    states: vec![Some(r[0]), Some(r[1])],
                    sensors: vec![Some(r[2]), Some(0.0)],
                })
                .collect();
            let t = flatten(&stream(recs), 0, &["temp"], &FlattenOptions::default()).unwrap();
            let t = fit_normalizer(t).unwrap();
            let n = t.n_rows as f64;
            for j in 0..t.n_features {
                let col: Vec<f64> = (0..t.n_rows).map(|i| t.row(i)[j]).collect();
                let mean = col.iter().sum::<f64>() / n;
                prop_assert!(mean.abs() < 1e-9);
                let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                let distinct = col.iter().any(|&v| v != col[0]);
                if distinct {
                    prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
                } else {
                    prop_assert!(col.iter().all(|&v| v == 0.0));
                }
            }
        }

        #[test]
        fn normalize_round_trips(
            rows in proptest::collection::vec(
                proptest::collection::vec(-1e6f64..1e6, 2),
                1..30,
            )
        ) {
            let recs: Vec<_> = rows
                .iter()
                .enumerate()
                .map(|(i, r)| TelemetryRecord {
                    timestamp: i as i64,
                    states: vec![Some(r[0]), Some(r[1])],
                    sensors: vec![Some(0.0), Some(0.0)],
                })
                .collect();
            let raw = flatten(&stream(recs), 0, &[], &FlattenOptions::default()).unwrap();
            let normalized = fit_normalizer(raw.clone()).unwrap();
            let stats = normalized.norm_stats.as_ref().unwrap();
            for i in 0..raw.n_rows {
                let back = denormalize_row(stats, normalized.row(i)).unwrap();
                for (a, b) in back.iter().zip(raw.row(i)) {
                    prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
                }
            }
        }

        #[test]
        fn dropped_rows_are_exactly_those_with_absent_values(
            missing in proptest::collection::vec(0usize..20, 0..6),
            lag in 0usize..3,
        ) {
            let mut recs: Vec<_> = (0..20)
                .map(|i| rec(i as i64, &[i as f64, 1.0], &[Some(0.0), Some(i as f64)]))
                .collect();
            for &m in &missing {
                recs[m].sensors[1] = None;
            }
            let t = flatten(&stream(recs.clone()), lag, &["nox"], &FlattenOptions::default()).unwrap();
            // Independent count: candidate rows are lag.., dropped iff
            // the target at i is absent (states always present here).
            let expected: Vec<i64> = (lag..20)
                .filter(|&i| recs[i].sensors[1].is_some())
                .map(|i| i as i64)
                .collect();
            prop_assert_eq!(t.row_timestamps, expected);
        }
    }
}
