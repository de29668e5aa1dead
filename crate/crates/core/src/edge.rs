//! Edge deployment loop emulation.
//!
//! A resource-capped forest serves predictions on incoming telemetry
//! and is retrained at a fixed cadence on a rolling window of recent
//! records, then hot-swapped in. The clock is simulated from record
//! timestamps, so runs are fast and reproducible. The implementation is
//! single-threaded; the observable contract is that every logged
//! prediction is attributable to exactly one model id and the active
//! model changes only at retrain events.
//!
//! Retrain ticks fire at `start + k * retrain_period` (k = 1, 2, ...)
//! within the run duration, where `start` is the first record's
//! timestamp. A tick due at or before a record's timestamp fires before
//! that record is predicted or ingested, so the retrain window never
//! includes the record arriving at the tick instant. A degenerate
//! window (no usable training rows) skips the retrain and keeps the
//! previous model serving.

use std::collections::VecDeque;

use thiserror::Error;

use crate::forest::{fit_forest, ForestError, ForestModel, HyperParams};
use crate::rng::derive_seed;
use crate::telemetry::{
    fit_normalizer, flatten, FlattenOptions, TelemetryError, TelemetryRecord, TelemetryStream,
};
use crate::tuner::{r2, TunerError};

#[derive(Debug, Error)]
pub enum EdgeError {
    #[error("edge schema error: {0}")]
    Schema(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("log contains no actual sensor readings")]
    NoActuals,
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error(transparent)]
    Forest(#[from] ForestError),
}

#[derive(Debug, Clone)]
pub struct EdgeConfig {
    /// Seconds between retrains.
    pub retrain_period_s: i64,
    /// Number of recent records retained for retraining.
    pub window: usize,
    /// Hyperparameters for on-device retraining; depth-capped by
    /// default.
    pub edge_hyper: HyperParams,
    /// Model served before the first retrain.
    pub warm_model: ForestModel,
}

impl EdgeConfig {
    /// Defaults: two-hour cadence, 24 h of minutely records, 20 trees
    /// of depth 2.
    pub fn new(warm_model: ForestModel) -> Self {
        EdgeConfig {
            retrain_period_s: 7200,
            window: 1440,
            edge_hyper: HyperParams {
                n_estimators: 20,
                max_depth: Some(2),
                ..HyperParams::default()
            },
            warm_model,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeEvent {
    Predict,
    Retrain,
    Skip,
}

impl std::fmt::Display for EdgeEvent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EdgeEvent::Predict => write!(f, "predict"),
            EdgeEvent::Retrain => write!(f, "retrain"),
            EdgeEvent::Skip => write!(f, "skip"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeLogEntry {
    pub timestamp: i64,
    pub model_id: u32,
    pub prediction: Option<f64>,
    pub actual: Option<f64>,
    pub event: EdgeEvent,
}

#[derive(Debug, Clone, Default)]
pub struct EdgeLog {
    pub entries: Vec<EdgeLogEntry>,
    /// Successful retrains.
    pub retrain_count: usize,
    /// High-water mark of retained records; never exceeds the window.
    pub max_retained: usize,
}

impl EdgeLog {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("timestamp,model_id,prediction,actual,event\n");
        for e in &self.entries {
            out.push_str(&format!("{},{}", e.timestamp, e.model_id));
            match e.prediction {
                Some(p) => out.push_str(&format!(",{p}")),
                None => out.push(','),
            }
            match e.actual {
                Some(a) => out.push_str(&format!(",{a}")),
                None => out.push(','),
            }
            out.push_str(&format!(",{}\n", e.event));
        }
        out
    }
}

/// Which records a retrain trained on; exposed for verification.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrainWindow {
    pub model_id: u32,
    pub tick_timestamp: i64,
    pub first_record_timestamp: i64,
    pub last_record_timestamp: i64,
    pub records: usize,
}

#[derive(Debug)]
pub struct EdgeRun {
    pub log: EdgeLog,
    /// Every model that served, keyed by id (0 = warm model, k = k-th
    /// retrain).
    pub models: Vec<(u32, ForestModel)>,
    pub retrain_windows: Vec<RetrainWindow>,
}

/// Run the edge loop over a telemetry stream for `duration` seconds of
/// simulated time from the first record.
pub fn run_edge(
    config: &EdgeConfig,
    stream: &TelemetryStream,
    duration: i64,
) -> Result<EdgeRun, EdgeError> {
    if config.retrain_period_s <= 0 {
        return Err(EdgeError::Config("retrain_period_s must be positive".into()));
    }
    if config.window == 0 {
        return Err(EdgeError::Config("window must be >= 1".into()));
    }
    let meta = &config.warm_model.meta;
    if meta.state_names != stream.schema.state_names {
        return Err(EdgeError::Schema(format!(
            "warm model expects states {:?}, stream has {:?}",
            meta.state_names, stream.schema.state_names
        )));
    }
    let target_idx = stream.schema.sensor_index(&meta.target_name).ok_or_else(|| {
        EdgeError::Schema(format!("stream has no `{}` sensor", meta.target_name))
    })?;
    let first = stream
        .records
        .first()
        .ok_or_else(|| EdgeError::Schema("empty telemetry stream".into()))?;

    let lag = meta.lag;
    let target = meta.target_name.clone();
    let n_states = stream.schema.state_names.len();
    let start = first.timestamp;
    let end = start + duration;

    let mut log = EdgeLog::default();
    let mut models: Vec<(u32, ForestModel)> = vec![(0, config.warm_model.clone())];
    let mut retrain_windows = Vec::new();
    let mut active: u32 = 0;
    let mut window: VecDeque<TelemetryRecord> = VecDeque::with_capacity(config.window);
    let mut next_tick = start + config.retrain_period_s;
    let mut tick_index: u64 = 1;

    let do_retrain = |tick: i64,
                          tick_index: u64,
                          window: &VecDeque<TelemetryRecord>,
                          active: &mut u32,
                          models: &mut Vec<(u32, ForestModel)>,
                          log: &mut EdgeLog,
                          retrain_windows: &mut Vec<RetrainWindow>|
     -> Result<(), EdgeError> {
        let records: Vec<TelemetryRecord> = window.iter().cloned().collect();
        let retrained = (|| -> Result<ForestModel, EdgeError> {
            let snapshot = TelemetryStream {
                schema: stream.schema.clone(),
                records: records.clone(),
            };
            let table = flatten(&snapshot, lag, &[target.as_str()], &FlattenOptions::default())?;
            let table = fit_normalizer(table)?;
            let hyper = HyperParams {
                seed: derive_seed(config.edge_hyper.seed, tick_index),
                ..config.edge_hyper.clone()
            };
            Ok(fit_forest(&table, &target, &hyper)?)
        })();
        match retrained {
            Ok(model) => {
                let id = tick_index as u32;
                models.push((id, model));
                *active = id;
                log.retrain_count += 1;
                retrain_windows.push(RetrainWindow {
                    model_id: id,
                    tick_timestamp: tick,
                    first_record_timestamp: records.first().map(|r| r.timestamp).unwrap_or(tick),
                    last_record_timestamp: records.last().map(|r| r.timestamp).unwrap_or(tick),
                    records: records.len(),
                });
                log.entries.push(EdgeLogEntry {
                    timestamp: tick,
                    model_id: id,
                    prediction: None,
                    actual: None,
                    event: EdgeEvent::Retrain,
                });
            }
            Err(_) => {
                // Availability over freshness: keep serving the last
                // good model.
                log.entries.push(EdgeLogEntry {
                    timestamp: tick,
                    model_id: *active,
                    prediction: None,
                    actual: None,
                    event: EdgeEvent::Skip,
                });
            }
        }
        Ok(())
    };

    for record in &stream.records {
        if record.timestamp > end {
            break;
        }
        while next_tick <= record.timestamp && next_tick <= end {
            do_retrain(
                next_tick,
                tick_index,
                &window,
                &mut active,
                &mut models,
                &mut log,
                &mut retrain_windows,
            )?;
            tick_index += 1;
            next_tick += config.retrain_period_s;
        }

        // Predict once a full lag window of history is available.
        if window.len() >= lag {
            let mut row = Vec::with_capacity(n_states * (lag + 1));
            let mut complete = record.states.iter().all(|s| s.is_some());
            row.extend(record.states.iter().map(|s| s.unwrap_or(0.0)));
            for k in 1..=lag {
                let past = &window[window.len() - k];
                complete &= past.states.iter().all(|s| s.is_some());
                row.extend(past.states.iter().map(|s| s.unwrap_or(0.0)));
            }
            if complete {
                let model = &models.iter().find(|(id, _)| *id == active).unwrap().1;
                let prediction = model.predict_raw(&row)?;
                log.entries.push(EdgeLogEntry {
                    timestamp: record.timestamp,
                    model_id: active,
                    prediction: Some(prediction),
                    actual: record.sensors[target_idx],
                    event: EdgeEvent::Predict,
                });
            }
        }

        window.push_back(record.clone());
        if window.len() > config.window {
            window.pop_front();
        }
        log.max_retained = log.max_retained.max(window.len());
    }

    // Ticks past the end of the stream but within the duration.
    while next_tick <= end {
        do_retrain(
            next_tick,
            tick_index,
            &window,
            &mut active,
            &mut models,
            &mut log,
            &mut retrain_windows,
        )?;
        tick_index += 1;
        next_tick += config.retrain_period_s;
    }

    Ok(EdgeRun {
        log,
        models,
        retrain_windows,
    })
}

/// Per-segment prediction quality: R-squared of predictions against
/// actuals for each model's serving segment, over at most `horizon`
/// most recent scoreable records of the segment. Segments with constant
/// actuals (or fewer than two scoreable records) report `None` rather
/// than vanishing.
pub fn rolling_score(log: &EdgeLog, horizon: usize) -> Result<Vec<(u32, Option<f64>)>, EdgeError> {
    if horizon == 0 {
        return Err(EdgeError::Config("horizon must be >= 1".into()));
    }
    let mut segments: Vec<(u32, Vec<(f64, f64)>)> = Vec::new();
    let mut any_actuals = false;
    for e in &log.entries {
        if e.event != EdgeEvent::Predict {
            continue;
        }
        if segments.last().map(|(id, _)| *id) != Some(e.model_id) {
            segments.push((e.model_id, Vec::new()));
        }
        if let (Some(p), Some(a)) = (e.prediction, e.actual) {
            any_actuals = true;
            segments.last_mut().unwrap().1.push((a, p));
        }
    }
    if !any_actuals {
        return Err(EdgeError::NoActuals);
    }
    Ok(segments
        .into_iter()
        .map(|(id, pairs)| {
            let tail = &pairs[pairs.len().saturating_sub(horizon)..];
            let actuals: Vec<f64> = tail.iter().map(|&(a, _)| a).collect();
            let predictions: Vec<f64> = tail.iter().map(|&(_, p)| p).collect();
            let score = match r2(&actuals, &predictions) {
                Ok(v) => Some(v),
                Err(TunerError::ConstantTarget) | Err(TunerError::TooFewObservations(_)) => None,
                Err(_) => None,
            };
            (id, score)
        })
        .collect())
}
