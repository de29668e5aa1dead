//! Deterministic synthetic pyrolysis plant.
//!
//! Stands in for proprietary plant data: a closed-form ground truth
//! maps machine states to sensor values, and seeded noise/drift turn it
//! into realistic telemetry. All formula constants live in
//! [`TruthParams`] with the documented defaults below, so tests can
//! cite exact expected values. The shapes are physics-flavored, not
//! validated physics; the toolkit's claims are about the modeling
//! pipeline, not combustion chemistry.
//!
//! Ground truth, with `u` the state normalized to `[0, 1]` by its
//! bounds and `sat(x, lo, hi)` clamping:
//!
//! ```text
//! T°C  = sat(temp_base + temp_feed*u_feed + temp_air*u_air
//!            + temp_vent*u_vent + temp_ox*u_ox, temp_range)
//! O2%  = sat(o2_base + o2_air*u_air + o2_ox*u_ox
//!            + o2_feed*u_feed + o2_vent*u_vent, 0, 21)
//! CO2% = sat(co2_base + co2_feed*u_feed + co2_air*u_air
//!            + co2_ox*u_ox, 0, 20)
//! H2O% = sat(moisture_base + moisture_temp*(T - 600)/600
//!            + moisture_feed*u_feed, 0, 60)
//! NOx  = nox_baseline                          if T < nox_floor_c
//!        nox_scale * exp(-nox_activation_k / (T + 273.15))
//!          * sqrt(max(O2, 0)) + nox_baseline   otherwise
//! ```
//!
//! Sensor output at time `t` is `truth + drift_amp * sin(tau * t /
//! drift_period) + noise_std * N(0, 1)`, the normal deviates drawn from
//! a stream seeded by `(seed, "NOIS", t)` in the fixed sensor order, so
//! a step is a pure function of `(config, state, t)`.

use thiserror::Error;

use crate::rng::{derive_seed, Xoshiro256PlusPlus};
use crate::telemetry::{TelemetryRecord, TelemetrySchema, TelemetryStream};

/// Machine states, in schema order.
pub const STATE_NAMES: [&str; 4] = ["feed_rate", "air_valve", "ventilator", "oxygen_flow"];
/// Sensors, in schema and noise-draw order.
pub const SENSOR_NAMES: [&str; 5] = ["temperature", "nox", "o2", "co2", "moisture"];

const NOISE_TAG: u64 = 0x4E4F_4953; // "NOIS"
const WALK_TAG: u64 = 0x5741_4C4B; // "WALK"

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config error: {0}")]
    Config(String),
    #[error("state `{name}` = {value} outside bounds [{lo}, {hi}]")]
    OutOfBounds {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
}

/// Closed-form sensor values before drift and noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub temperature: f64,
    pub nox: f64,
    pub o2: f64,
    pub co2: f64,
    pub moisture: f64,
}

/// Ground-truth formula constants. Defaults are the documented
/// reference plant.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthParams {
    pub temp_base: f64,
    pub temp_feed: f64,
    pub temp_air: f64,
    pub temp_vent: f64,
    pub temp_ox: f64,
    pub o2_base: f64,
    pub o2_air: f64,
    pub o2_ox: f64,
    pub o2_feed: f64,
    pub o2_vent: f64,
    pub co2_base: f64,
    pub co2_feed: f64,
    pub co2_air: f64,
    pub co2_ox: f64,
    pub moisture_base: f64,
    pub moisture_temp: f64,
    pub moisture_feed: f64,
    pub nox_scale: f64,
    pub nox_activation_k: f64,
    pub nox_baseline: f64,
    pub nox_floor_c: f64,
}

impl Default for TruthParams {
    fn default() -> Self {
        TruthParams {
            temp_base: 580.0,
            temp_feed: 520.0,
            temp_air: 320.0,
            temp_vent: -15.0,
            temp_ox: 15.0,
            o2_base: 9.0,
            o2_air: 2.0,
            o2_ox: 1.5,
            o2_feed: -1.5,
            o2_vent: 0.8,
            co2_base: 14.0,
            co2_feed: 4.5,
            co2_air: -5.5,
            co2_ox: -3.5,
            moisture_base: 35.0,
            moisture_temp: -22.0,
            moisture_feed: 10.0,
            nox_scale: 1600.0,
            nox_activation_k: 4000.0,
            nox_baseline: 25.0,
            nox_floor_c: 600.0,
        }
    }
}

/// State trajectory policy for dataset generation.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    /// Reflected Gaussian random walk starting at the bound midpoints;
    /// per step and dimension one normal deviate scaled by
    /// `step_frac * (hi - lo)`.
    RandomWalk { step_frac: f64 },
    /// Scripted operating cycle: each state follows a sinusoid of
    /// amplitude `amp_frac * (hi - lo)` around the bound midpoint, with
    /// per-state periods `period_s` times [`PATROL_PERIOD_MULT`] and
    /// phases [`PATROL_PHASES`], plus a reflected random walk of step
    /// `step_frac * (hi - lo)`. The default: plants cycle through
    /// operating regimes rather than wandering freely, so every
    /// retraining window sees the whole band.
    Patrol {
        period_s: f64,
        amp_frac: f64,
        step_frac: f64,
    },
    /// Explicit state trajectory, cycled if shorter than the run.
    Script(Vec<Vec<f64>>),
}

/// Per-state period multipliers of the patrol cycle. Feed and air
/// share the base period with reinforcing phases so their combined
/// thermal effect never cancels; the minor states run slower,
/// incommensurate cycles.
pub const PATROL_PERIOD_MULT: [f64; 4] = [1.0, 1.0, 1.93, 2.71];
/// Per-state phase offsets of the patrol cycle.
pub const PATROL_PHASES: [f64; 4] = [
    0.0,
    std::f64::consts::FRAC_PI_3,
    std::f64::consts::PI,
    4.71238898038469,
];

#[derive(Debug, Clone, PartialEq)]
pub struct SimPlantConfig {
    pub seed: u64,
    pub sample_interval_s: i64,
    pub start_timestamp: i64,
    /// Per state in [`STATE_NAMES`] order.
    pub state_bounds: Vec<(f64, f64)>,
    pub temp_range: (f64, f64),
    /// Per sensor in [`SENSOR_NAMES`] order.
    pub noise_std: [f64; 5],
    pub drift_amp: [f64; 5],
    pub drift_period_s: f64,
    /// Fraction of the run `[start, end)` during which NOx is measured.
    pub nox_window: (f64, f64),
    pub schedule: Schedule,
    pub truth: TruthParams,
}

impl Default for SimPlantConfig {
    fn default() -> Self {
        SimPlantConfig {
            seed: 42,
            sample_interval_s: 60,
            start_timestamp: 0,
            state_bounds: vec![(40.0, 120.0), (0.0, 100.0), (20.0, 100.0), (0.0, 50.0)],
            temp_range: (600.0, 1200.0),
            noise_std: [4.0, 12.0, 0.25, 0.3, 0.8],
            drift_amp: [0.0; 5],
            drift_period_s: 86_400.0,
            nox_window: (0.0, 1.0),
            schedule: Schedule::Patrol {
                period_s: 10_800.0,
                amp_frac: 0.35,
                step_frac: 0.03,
            },
            truth: TruthParams::default(),
        }
    }
}

impl SimPlantConfig {
    pub fn schema() -> TelemetrySchema {
        TelemetrySchema::new(STATE_NAMES.to_vec(), SENSOR_NAMES.to_vec())
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.sample_interval_s <= 0 {
            return Err(SimError::Config("sample_interval_s must be positive".into()));
        }
        if self.state_bounds.len() != STATE_NAMES.len() {
            return Err(SimError::Config("state_bounds must cover all four states".into()));
        }
        for (name, &(lo, hi)) in STATE_NAMES.iter().zip(&self.state_bounds) {
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(SimError::Config(format!("state_bounds.{name}: need lo < hi")));
            }
        }
        let (tlo, thi) = self.temp_range;
        if !(600.0 <= tlo && tlo < thi && thi <= 1200.0) {
            return Err(SimError::Config("temp_range must lie within [600, 1200]".into()));
        }
        if self.noise_std.iter().any(|&s| s < 0.0 || !s.is_finite()) {
            return Err(SimError::Config("noise_std must be non-negative".into()));
        }
        if self.drift_period_s <= 0.0 {
            return Err(SimError::Config("drift_period_s must be positive".into()));
        }
        let (wlo, whi) = self.nox_window;
        if !(0.0..=1.0).contains(&wlo) || !(0.0..=1.0).contains(&whi) || wlo > whi {
            return Err(SimError::Config("nox_window must satisfy 0 <= start <= end <= 1".into()));
        }
        match &self.schedule {
            Schedule::RandomWalk { step_frac } => {
                if *step_frac <= 0.0 || !step_frac.is_finite() {
                    return Err(SimError::Config("walk_step_frac must be positive".into()));
                }
            }
            Schedule::Patrol {
                period_s,
                amp_frac,
                step_frac,
            } => {
                if *period_s <= 0.0 || !period_s.is_finite() {
                    return Err(SimError::Config("patrol_period_s must be positive".into()));
                }
                if !(0.0..0.5).contains(amp_frac) {
                    return Err(SimError::Config("patrol_amp_frac must lie in [0, 0.5)".into()));
                }
                if *step_frac <= 0.0 || !step_frac.is_finite() {
                    return Err(SimError::Config("walk_step_frac must be positive".into()));
                }
            }
            Schedule::Script(states) => {
                if states.is_empty() {
                    return Err(SimError::Config("schedule script is empty".into()));
                }
            }
        }
        Ok(())
    }

    fn check_state(&self, state: &[f64]) -> Result<(), SimError> {
        for ((name, &(lo, hi)), &v) in STATE_NAMES.iter().zip(&self.state_bounds).zip(state) {
            if !(lo..=hi).contains(&v) {
                return Err(SimError::OutOfBounds {
                    name,
                    value: v,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }
}

fn sat(x: f64, lo: f64, hi: f64) -> f64 {
    x.clamp(lo, hi)
}

/// Evaluate the closed-form plant at a state. Exposed so evaluations
/// can compare against the noise-free truth.
pub fn ground_truth(config: &SimPlantConfig, state: &[f64]) -> GroundTruth {
    let tp = &config.truth;
    let u: Vec<f64> = state
        .iter()
        .zip(&config.state_bounds)
        .map(|(&v, &(lo, hi))| (v - lo) / (hi - lo))
        .collect();
    let (u_feed, u_air, u_vent, u_ox) = (u[0], u[1], u[2], u[3]);

    let temperature = sat(
        tp.temp_base + tp.temp_feed * u_feed + tp.temp_air * u_air + tp.temp_vent * u_vent
            + tp.temp_ox * u_ox,
        config.temp_range.0,
        config.temp_range.1,
    );
    let o2 = sat(
        tp.o2_base + tp.o2_air * u_air + tp.o2_ox * u_ox + tp.o2_feed * u_feed + tp.o2_vent * u_vent,
        0.0,
        21.0,
    );
    let co2 = sat(
        tp.co2_base + tp.co2_feed * u_feed + tp.co2_air * u_air + tp.co2_ox * u_ox,
        0.0,
        20.0,
    );
    let moisture = sat(
        tp.moisture_base + tp.moisture_temp * (temperature - 600.0) / 600.0 + tp.moisture_feed * u_feed,
        0.0,
        60.0,
    );
    let nox = nox_from(tp, temperature, o2);
    GroundTruth {
        temperature,
        nox,
        o2,
        co2,
        moisture,
    }
}

/// Thermal-NOx shape: exponentially activated in temperature, square
/// root in available oxygen, exactly the baseline below the activation
/// floor.
pub fn nox_from(tp: &TruthParams, temperature_c: f64, o2: f64) -> f64 {
    if temperature_c < tp.nox_floor_c {
        return tp.nox_baseline;
    }
    let t_kelvin = temperature_c + 273.15;
    tp.nox_scale * (-tp.nox_activation_k / t_kelvin).exp() * o2.max(0.0).sqrt() + tp.nox_baseline
}

/// One sensor sample at time `t`. Pure in `(config, state, t)`.
pub fn step(config: &SimPlantConfig, state: &[f64], t: i64) -> Result<TelemetryRecord, SimError> {
    config.check_state(state)?;
    let truth = ground_truth(config, state);
    let base = [truth.temperature, truth.nox, truth.o2, truth.co2, truth.moisture];
    let drift_phase = (std::f64::consts::TAU * t as f64 / config.drift_period_s).sin();
    let mut rng = Xoshiro256PlusPlus::new(derive_seed(derive_seed(config.seed, NOISE_TAG), t as u64));
    let sensors: Vec<Option<f64>> = base
        .iter()
        .enumerate()
        .map(|(s, &v)| {
            let noise = rng.next_normal() * config.noise_std[s];
            Some(v + config.drift_amp[s] * drift_phase + noise)
        })
        .collect();
    Ok(TelemetryRecord {
        timestamp: t,
        states: state.iter().map(|&v| Some(v)).collect(),
        sensors,
    })
}

/// Roll the schedule for `n` steps and mask NOx outside the configured
/// measurement window.
pub fn generate_dataset(config: &SimPlantConfig, n: usize) -> Result<TelemetryStream, SimError> {
    config.validate()?;
    if n == 0 {
        return Err(SimError::Config("n must be >= 1".into()));
    }
    let mut walk_rng = Xoshiro256PlusPlus::new(derive_seed(derive_seed(config.seed, WALK_TAG), 0));
    let mut state: Vec<f64> = config.state_bounds.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
    // Walk offsets of the patrol schedule, reflected separately from
    // the sinusoid.
    let mut offsets = vec![0.0f64; config.state_bounds.len()];

    let nox_idx = 1; // SENSOR_NAMES order
    let window_start = (config.nox_window.0 * n as f64).floor() as usize;
    let covered = ((config.nox_window.1 - config.nox_window.0) * n as f64).ceil() as usize;
    let window_end = (window_start + covered).min(n);

    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        match &config.schedule {
            Schedule::RandomWalk { step_frac } => {
                if i > 0 {
                    for (d, &(lo, hi)) in config.state_bounds.iter().enumerate() {
                        let range = hi - lo;
                        let mut x = state[d] + walk_rng.next_normal() * step_frac * range;
                        // Reflect at the bounds.
                        for _ in 0..8 {
                            if x > hi {
                                x = 2.0 * hi - x;
                            } else if x < lo {
                                x = 2.0 * lo - x;
                            } else {
                                break;
                            }
                        }
                        state[d] = x.clamp(lo, hi);
                    }
                }
            }
            Schedule::Patrol {
                period_s,
                amp_frac,
                step_frac,
            } => {
                let t = (i as i64 * config.sample_interval_s) as f64;
                for (d, &(lo, hi)) in config.state_bounds.iter().enumerate() {
                    let range = hi - lo;
                    if i > 0 {
                        let mut w = offsets[d] + walk_rng.next_normal() * step_frac * range;
                        let margin = (0.5 - amp_frac) * range;
                        for _ in 0..8 {
                            if w > margin {
                                w = 2.0 * margin - w;
                            } else if w < -margin {
                                w = -2.0 * margin - w;
                            } else {
                                break;
                            }
                        }
                        offsets[d] = w.clamp(-margin, margin);
                    }
                    let phase = std::f64::consts::TAU * t / (period_s * PATROL_PERIOD_MULT[d])
                        + PATROL_PHASES[d];
                    let v = 0.5 * (lo + hi) + amp_frac * range * phase.sin() + offsets[d];
                    state[d] = v.clamp(lo, hi);
                }
            }
            Schedule::Script(states) => {
                let s = &states[i % states.len()];
                if s.len() != STATE_NAMES.len() {
                    return Err(SimError::Config(format!(
                        "schedule script row {i} has {} values, expected {}",
                        s.len(),
                        STATE_NAMES.len()
                    )));
                }
                state.clone_from_slice(s);
            }
        }
        let t = config.start_timestamp + i as i64 * config.sample_interval_s;
        let mut rec = step(config, &state, t)?;
        if i < window_start || i >= window_end {
            rec.sensors[nox_idx] = None;
        }
        records.push(rec);
    }
    Ok(TelemetryStream {
        schema: SimPlantConfig::schema(),
        records,
    })
}

// ---------------------------------------------------------------------
// Key-value config file
// ---------------------------------------------------------------------

/// Parse the human-readable `key = value` config format. Unknown keys
/// and malformed values are errors naming the key. Lines starting with
/// `#` are comments.
pub fn parse_config(text: &str) -> Result<SimPlantConfig, SimError> {
    let mut config = SimPlantConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            SimError::Config(format!("line {}: expected `key = value`", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        apply_key(&mut config, key, value)?;
    }
    config.validate()?;
    Ok(config)
}

fn apply_key(config: &mut SimPlantConfig, key: &str, value: &str) -> Result<(), SimError> {
    let bad = || SimError::Config(format!("bad value for key `{key}`"));
    let f = |v: &str| v.parse::<f64>().map_err(|_| bad());
    let pair = |v: &str| -> Result<(f64, f64), SimError> {
        let (a, b) = v.split_once(',').ok_or_else(bad)?;
        Ok((f(a.trim())?, f(b.trim())?))
    };
    match key {
        "seed" => config.seed = value.parse().map_err(|_| bad())?,
        "sample_interval_s" => config.sample_interval_s = value.parse().map_err(|_| bad())?,
        "start_timestamp" => config.start_timestamp = value.parse().map_err(|_| bad())?,
        "temp_range" => config.temp_range = pair(value)?,
        "drift_period_s" => config.drift_period_s = f(value)?,
        "nox_window" => config.nox_window = pair(value)?,
        "schedule" => match value {
            "random_walk" => {
                if !matches!(config.schedule, Schedule::RandomWalk { .. }) {
                    config.schedule = Schedule::RandomWalk { step_frac: 0.06 };
                }
            }
            "patrol" => {
                if !matches!(config.schedule, Schedule::Patrol { .. }) {
                    config.schedule = SimPlantConfig::default().schedule;
                }
            }
            _ => return Err(SimError::Config(format!("unknown schedule `{value}`"))),
        },
        "walk_step_frac" => match &mut config.schedule {
            Schedule::Patrol { step_frac, .. } => *step_frac = f(value)?,
            _ => config.schedule = Schedule::RandomWalk { step_frac: f(value)? },
        },
        "patrol_period_s" => match &mut config.schedule {
            Schedule::Patrol { period_s, .. } => *period_s = f(value)?,
            _ => {
                let Schedule::Patrol { amp_frac, step_frac, .. } = SimPlantConfig::default().schedule
                else {
                    unreachable!()
                };
                config.schedule = Schedule::Patrol {
                    period_s: f(value)?,
                    amp_frac,
                    step_frac,
                };
            }
        },
        "patrol_amp_frac" => match &mut config.schedule {
            Schedule::Patrol { amp_frac, .. } => *amp_frac = f(value)?,
            _ => {
                let Schedule::Patrol { period_s, step_frac, .. } = SimPlantConfig::default().schedule
                else {
                    unreachable!()
                };
                config.schedule = Schedule::Patrol {
                    period_s,
                    amp_frac: f(value)?,
                    step_frac,
                };
            }
        },
        _ => {
            if let Some(name) = key.strip_prefix("state_bounds.") {
                let idx = STATE_NAMES
                    .iter()
                    .position(|&s| s == name)
                    .ok_or_else(|| SimError::Config(format!("unknown key `{key}`")))?;
                config.state_bounds[idx] = pair(value)?;
            } else if let Some(name) = key.strip_prefix("noise_std.") {
                let idx = SENSOR_NAMES
                    .iter()
                    .position(|&s| s == name)
                    .ok_or_else(|| SimError::Config(format!("unknown key `{key}`")))?;
                config.noise_std[idx] = f(value)?;
            } else if let Some(name) = key.strip_prefix("drift_amp.") {
                let idx = SENSOR_NAMES
                    .iter()
                    .position(|&s| s == name)
                    .ok_or_else(|| SimError::Config(format!("unknown key `{key}`")))?;
                config.drift_amp[idx] = f(value)?;
            } else if let Some(field) = key.strip_prefix("truth.") {
                let tp = &mut config.truth;
                let slot = match field {
                    "temp_base" => &mut tp.temp_base,
                    "temp_feed" => &mut tp.temp_feed,
                    "temp_air" => &mut tp.temp_air,
                    "temp_vent" => &mut tp.temp_vent,
                    "temp_ox" => &mut tp.temp_ox,
                    "o2_base" => &mut tp.o2_base,
                    "o2_air" => &mut tp.o2_air,
                    "o2_ox" => &mut tp.o2_ox,
                    "o2_feed" => &mut tp.o2_feed,
                    "o2_vent" => &mut tp.o2_vent,
                    "co2_base" => &mut tp.co2_base,
                    "co2_feed" => &mut tp.co2_feed,
                    "co2_air" => &mut tp.co2_air,
                    "co2_ox" => &mut tp.co2_ox,
                    "moisture_base" => &mut tp.moisture_base,
                    "moisture_temp" => &mut tp.moisture_temp,
                    "moisture_feed" => &mut tp.moisture_feed,
                    "nox_scale" => &mut tp.nox_scale,
                    "nox_activation_k" => &mut tp.nox_activation_k,
                    "nox_baseline" => &mut tp.nox_baseline,
                    "nox_floor_c" => &mut tp.nox_floor_c,
                    _ => return Err(SimError::Config(format!("unknown key `{key}`"))),
                };
                *slot = f(value)?;
            } else {
                return Err(SimError::Config(format!("unknown key `{key}`")));
            }
        }
    }
    Ok(())
}

/// Render a config in the key-value format accepted by
/// [`parse_config`].
pub fn write_config(config: &SimPlantConfig) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    kv("seed", config.seed.to_string());
    kv("sample_interval_s", config.sample_interval_s.to_string());
    kv("start_timestamp", config.start_timestamp.to_string());
    for (name, (lo, hi)) in STATE_NAMES.iter().zip(&config.state_bounds) {
        kv(&format!("state_bounds.{name}"), format!("{lo},{hi}"));
    }
    kv("temp_range", format!("{},{}", config.temp_range.0, config.temp_range.1));
    for (name, v) in SENSOR_NAMES.iter().zip(&config.noise_std) {
        kv(&format!("noise_std.{name}"), format!("{v}"));
    }
    for (name, v) in SENSOR_NAMES.iter().zip(&config.drift_amp) {
        kv(&format!("drift_amp.{name}"), format!("{v}"));
    }
    kv("drift_period_s", format!("{}", config.drift_period_s));
    kv("nox_window", format!("{},{}", config.nox_window.0, config.nox_window.1));
    match &config.schedule {
        Schedule::RandomWalk { step_frac } => {
            kv("schedule", "random_walk".into());
            kv("walk_step_frac", format!("{step_frac}"));
        }
        Schedule::Patrol {
            period_s,
            amp_frac,
            step_frac,
        } => {
            kv("schedule", "patrol".into());
            kv("patrol_period_s", format!("{period_s}"));
            kv("patrol_amp_frac", format!("{amp_frac}"));
            kv("walk_step_frac", format!("{step_frac}"));
        }
        Schedule::Script(_) => {
            // Scripted schedules are API-only; files always describe a
            // patrol.
        }
    }
    let tp = &config.truth;
    for (k, v) in [
        ("temp_base", tp.temp_base),
        ("temp_feed", tp.temp_feed),
        ("temp_air", tp.temp_air),
        ("temp_vent", tp.temp_vent),
        ("temp_ox", tp.temp_ox),
        ("o2_base", tp.o2_base),
        ("o2_air", tp.o2_air),
        ("o2_ox", tp.o2_ox),
        ("o2_feed", tp.o2_feed),
        ("o2_vent", tp.o2_vent),
        ("co2_base", tp.co2_base),
        ("co2_feed", tp.co2_feed),
        ("co2_air", tp.co2_air),
        ("co2_ox", tp.co2_ox),
        ("moisture_base", tp.moisture_base),
        ("moisture_temp", tp.moisture_temp),
        ("moisture_feed", tp.moisture_feed),
        ("nox_scale", tp.nox_scale),
        ("nox_activation_k", tp.nox_activation_k),
        ("nox_baseline", tp.nox_baseline),
        ("nox_floor_c", tp.nox_floor_c),
    ] {
        kv(&format!("truth.{k}"), format!("{v}"));
    }
    out
}
