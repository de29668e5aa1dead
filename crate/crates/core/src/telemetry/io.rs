//! CSV ingestion for telemetry streams.
//!
//! Expected layout: UTF-8, header row, comma separator, a `timestamp`
//! column in integer seconds, remaining columns real-valued or empty.
//! An empty or unparseable numeric cell is an absent value.

use std::path::Path;

use super::{TelemetryError, TelemetryRecord, TelemetrySchema, TelemetryStream};

/// Read a telemetry CSV into a stream, validating the schema and
/// timestamp ordering. Extra columns not named by the schema are
/// ignored.
pub fn ingest_csv(path: &Path, schema: &TelemetrySchema) -> Result<TelemetryStream, TelemetryError> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);

    let ts_col = col("timestamp")
        .ok_or_else(|| TelemetryError::Schema("missing `timestamp` column".into()))?;
    let state_cols: Vec<usize> = schema
        .state_names
        .iter()
        .map(|n| col(n).ok_or_else(|| TelemetryError::Schema(format!("missing state column `{n}`"))))
        .collect::<Result<_, _>>()?;
    let sensor_cols: Vec<usize> = schema
        .sensor_names
        .iter()
        .map(|n| col(n).ok_or_else(|| TelemetryError::Schema(format!("missing sensor column `{n}`"))))
        .collect::<Result<_, _>>()?;

    let mut records = Vec::new();
    let mut last_ts: Option<i64> = None;
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let data_row = i + 1;
        let timestamp: i64 = row
            .get(ts_col)
            .and_then(|c| c.trim().parse().ok())
            .ok_or(TelemetryError::BadTimestamp { row: data_row })?;
        if let Some(prev) = last_ts {
            if timestamp <= prev {
                return Err(TelemetryError::Ordering { row: data_row });
            }
        }
        last_ts = Some(timestamp);
        let cell = |c: usize| -> Option<f64> {
            let text = row.get(c)?.trim();
            if text.is_empty() {
                return None;
            }
            // Non-finite parses (inf, NaN spellings) are absent too.
            text.parse::<f64>().ok().filter(|v| v.is_finite())
        };
        records.push(TelemetryRecord {
            timestamp,
            states: state_cols.iter().map(|&c| cell(c)).collect(),
            sensors: sensor_cols.iter().map(|&c| cell(c)).collect(),
        });
    }
    Ok(TelemetryStream {
        schema: schema.clone(),
        records,
    })
}

/// Render a stream back to the canonical CSV layout. Floats use the
/// shortest round-trip form, so identical streams produce identical
/// bytes.
pub fn stream_to_csv_string(stream: &TelemetryStream) -> String {
    let mut out = String::from("timestamp");
    for n in &stream.schema.state_names {
        out.push(',');
        out.push_str(n);
    }
    for n in &stream.schema.sensor_names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for r in &stream.records {
        out.push_str(&r.timestamp.to_string());
        for v in r.states.iter().chain(r.sensors.iter()) {
            out.push(',');
            if let Some(v) = v {
                out.push_str(&format!("{v}"));
            }
        }
        out.push('\n');
    }
    out
}
