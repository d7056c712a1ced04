//! Scenario files: flat `key = value unit` lines grouped under `[section]`
//! headers, `#` comments. Every key has a default, unknown keys are
//! rejected, and each value is unit-checked as soon as it is read.
//!
//! File sizes use decimal megabytes of 8e6 bits (`2 MB` = 1.6e7 bits).

use std::fmt;
use std::path::Path;

use crate::error::Error;
use crate::optimizer::Scenario;
use crate::power::{ComputeParams, EarthParams, RadioParams};
use crate::queueing::{TrafficParams, BITS_PER_MB};
use crate::radio::LinkBudget;
use crate::sim::SizeDistribution;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key `{section}.{key}`")]
    UnknownKey { section: String, key: String },
    #[error("`{section}.{key}`: {msg}")]
    BadValue { section: String, key: String, msg: String },
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error(transparent)]
    Model(#[from] Error),
}

/// Physical quantity of a key, which fixes its accepted unit suffixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Count,
    Scalar,
    Fraction,
    Power,
    Energy,
    Frequency,
    Distance,
    Decibel,
    NoiseDensity,
    ArrivalRate,
    DataSize,
    DataRate,
    Duration,
    Word,
}

impl Quantity {
    /// Multiplier from `unit` to the SI base, `None` if not accepted.
    fn scale(self, unit: &str) -> Option<f64> {
        use Quantity::*;
        let s = match (self, unit) {
            (Count | Scalar | Word, "") => 1.0,
            (Fraction, "") => 1.0,
            (Fraction, "%") => 0.01,
            (Power, "" | "W") => 1.0,
            (Power, "mW") => 1e-3,
            (Power, "kW") => 1e3,
            (Energy, "" | "J") => 1.0,
            (Energy, "mJ") => 1e-3,
            (Energy, "kJ") => 1e3,
            (Frequency, "" | "Hz") => 1.0,
            (Frequency, "kHz") => 1e3,
            (Frequency, "MHz") => 1e6,
            (Frequency, "GHz") => 1e9,
            (Distance, "" | "m") => 1.0,
            (Distance, "km") => 1e3,
            (Decibel, "" | "dB") => 1.0,
            (NoiseDensity, "" | "dBm/Hz") => 1.0,
            (ArrivalRate, "" | "/s" | "1/s" | "s^-1") => 1.0,
            (ArrivalRate, "/min") => 1.0 / 60.0,
            (DataSize, "" | "bit" | "bits" | "b") => 1.0,
            (DataSize, "kbit") => 1e3,
            (DataSize, "Mbit") => 1e6,
            (DataSize, "B") => 8.0,
            (DataSize, "kB" | "KB") => 8e3,
            (DataSize, "MB") => BITS_PER_MB,
            (DataSize, "GB") => 8e9,
            (DataRate, "" | "bps" | "bit/s") => 1.0,
            (DataRate, "kbps") => 1e3,
            (DataRate, "Mbps") => 1e6,
            (DataRate, "Gbps") => 1e9,
            (Duration, "" | "s") => 1.0,
            (Duration, "ms") => 1e-3,
            _ => return None,
        };
        Some(s)
    }
}

/// Parse `"<number> [unit]"` into SI units.
pub fn parse_quantity(text: &str, q: Quantity) -> Result<f64, String> {
    let text = text.trim();
    let (num, unit) = match text.strip_prefix("inf") {
        Some(rest) => ("inf", rest.trim()),
        None => text.split_at(numeric_prefix_len(text)),
    };
    let unit = unit.trim();
    let value: f64 = num
        .parse()
        .map_err(|_| format!("`{text}` does not start with a number"))?;
    let scale = q
        .scale(unit)
        .ok_or_else(|| format!("unit `{unit}` is not valid for a {q:?} value"))?;
    if q == Quantity::Count && (value.fract() != 0.0 || value < 0.0) {
        return Err(format!("`{text}` is not a non-negative integer"));
    }
    Ok(value * scale)
}

fn numeric_prefix_len(text: &str) -> usize {
    let chars: Vec<char> = text.chars().collect();
    let mut end = 0;
    for (i, &c) in chars.iter().enumerate() {
        let prev = if i > 0 { Some(chars[i - 1]) } else { None };
        let next = chars.get(i + 1).copied();
        let ok = c.is_ascii_digit()
            || c == '.'
            || ((c == '+' || c == '-') && (i == 0 || matches!(prev, Some('e' | 'E'))))
            || ((c == 'e' || c == 'E') && i > 0 && next.is_some_and(|n| n.is_ascii_digit() || n == '+' || n == '-'));
        if !ok {
            break;
        }
        end = i + 1;
    }
    // all accepted characters are ASCII
    end
}

struct KeySpec {
    section: &'static str,
    key: &'static str,
    quantity: Quantity,
    default: &'static str,
}

const fn spec(section: &'static str, key: &'static str, quantity: Quantity, default: &'static str) -> KeySpec {
    KeySpec {
        section,
        key,
        quantity,
        default,
    }
}

const KEYS: &[KeySpec] = &[
    spec("compute", "cores", Quantity::Count, "2"),
    spec("compute", "cpu_speed", Quantity::Frequency, "2 GHz"),
    spec("compute", "ref_speed", Quantity::Frequency, "2 GHz"),
    spec("compute", "p_core_max", Quantity::Power, "20 W"),
    spec("compute", "p_core_min", Quantity::Power, "5 W"),
    spec("compute", "beta", Quantity::Scalar, "2"),
    spec("compute", "c0", Quantity::Scalar, "7e8"),
    spec("compute", "kappa", Quantity::Scalar, "35"),
    spec("radio", "pa_efficiency", Quantity::Fraction, "31.1 %"),
    spec("radio", "p_rf", Quantity::Power, "12.9 W"),
    spec("radio", "p_sleep", Quantity::Power, "6.45 W"),
    spec("radio", "p_out_max", Quantity::Power, "inf"),
    spec("radio", "bandwidth", Quantity::Frequency, "20 MHz"),
    spec("radio", "e_switch", Quantity::Energy, "5 J"),
    spec("link", "carrier_freq", Quantity::Frequency, "2 GHz"),
    spec("link", "cell_radius", Quantity::Distance, "0.5 km"),
    spec("link", "noise_figure", Quantity::Decibel, "9 dB"),
    spec("link", "noise_density", Quantity::NoiseDensity, "-174 dBm/Hz"),
    spec("traffic", "lambda", Quantity::ArrivalRate, "1 /s"),
    spec("traffic", "file_size", Quantity::DataSize, "2 MB"),
    spec("earth", "n_trx", Quantity::Count, "1"),
    spec("earth", "p0", Quantity::Power, "84 W"),
    spec("earth", "delta_p", Quantity::Scalar, "2.8"),
    spec("earth", "p_sleep", Quantity::Power, "56 W"),
    spec("earth", "p_out_max", Quantity::Power, "inf"),
    spec("earth", "e_switch", Quantity::Energy, "5 J"),
    spec("run", "alpha", Quantity::Scalar, "0"),
    spec("run", "cores_max", Quantity::Count, "8"),
    spec("run", "seed", Quantity::Count, "42"),
    spec("run", "arrivals", Quantity::Count, "111112"),
    spec("run", "warmup", Quantity::Fraction, "0.1"),
    spec("run", "batches", Quantity::Count, "20"),
    spec("run", "size_distribution", Quantity::Word, "exponential"),
    spec("run", "pareto_shape", Quantity::Scalar, "1.5"),
    spec("run", "pareto_spread", Quantity::Scalar, "1000"),
    spec("run", "delay_min", Quantity::Duration, "0.15 s"),
    spec("run", "delay_max", Quantity::Duration, "5 s"),
    spec("run", "delay_points", Quantity::Count, "25"),
];

fn find_key(section: &str, key: &str) -> Option<usize> {
    KEYS.iter().position(|k| k.section == section && k.key == key)
}

fn check_value(idx: usize, text: &str) -> Result<(), ConfigError> {
    let k = &KEYS[idx];
    let bad = |msg: String| ConfigError::BadValue {
        section: k.section.into(),
        key: k.key.into(),
        msg,
    };
    if k.quantity == Quantity::Word {
        return parse_size_distribution(text, 1.5, 1000.0).map(|_| ()).map_err(bad);
    }
    parse_quantity(text, k.quantity).map(|_| ()).map_err(bad)
}

fn parse_size_distribution(text: &str, shape: f64, spread: f64) -> Result<SizeDistribution, String> {
    match text.trim() {
        "exponential" => Ok(SizeDistribution::Exponential),
        "deterministic" => Ok(SizeDistribution::Deterministic),
        "bounded-pareto" => Ok(SizeDistribution::BoundedPareto { shape, spread }),
        other => Err(format!(
            "`{other}` is not one of exponential, deterministic, bounded-pareto"
        )),
    }
}

/// Raw scenario text, one entry per known key, kept exactly as written.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    values: Vec<String>,
    /// Identifier written to the `scenario_id` column.
    pub id: String,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        ScenarioFile {
            values: KEYS.iter().map(|k| k.default.to_string()).collect(),
            id: "default".into(),
        }
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut file = ScenarioFile::default();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line: i + 1,
                    msg: "unterminated section header".into(),
                })?;
                let name = name.trim();
                if !KEYS.iter().any(|k| k.section == name) {
                    return Err(ConfigError::Syntax {
                        line: i + 1,
                        msg: format!("unknown section `{name}`"),
                    });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                msg: "expected `key = value`".into(),
            })?;
            let sec = section.as_deref().ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                msg: "key outside of any section".into(),
            })?;
            file.set(sec, key.trim(), value.trim())?;
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        let mut file = Self::parse(&text)?;
        file.id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "config".into());
        Ok(file)
    }

    /// Replace one value, checking its unit.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<(), ConfigError> {
        let idx = find_key(section, key).ok_or_else(|| ConfigError::UnknownKey {
            section: section.into(),
            key: key.into(),
        })?;
        check_value(idx, value)?;
        self.values[idx] = value.trim().to_string();
        Ok(())
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        find_key(section, key).map(|i| self.values[i].as_str())
    }

    fn number(&self, section: &str, key: &str) -> f64 {
        let idx = find_key(section, key).expect("key is in the table");
        parse_quantity(&self.values[idx], KEYS[idx].quantity).expect("checked on set")
    }

    fn count(&self, section: &str, key: &str) -> Result<u32, ConfigError> {
        let v = self.number(section, key);
        if v > f64::from(u32::MAX) {
            return Err(ConfigError::BadValue {
                section: section.into(),
                key: key.into(),
                msg: "too large".into(),
            });
        }
        Ok(v as u32)
    }

    /// Build typed parameters, validating model invariants.
    pub fn resolve(&self) -> Result<ResolvedConfig, ConfigError> {
        let compute = ComputeParams {
            n_cores: self.count("compute", "cores")?,
            cpu_speed: self.number("compute", "cpu_speed"),
            ref_speed: self.number("compute", "ref_speed"),
            p_core_max: self.number("compute", "p_core_max"),
            p_core_min: self.number("compute", "p_core_min"),
            beta: self.number("compute", "beta"),
            c0: self.number("compute", "c0"),
            kappa: self.number("compute", "kappa"),
        };
        let radio = RadioParams {
            pa_efficiency: self.number("radio", "pa_efficiency"),
            p_rf: self.number("radio", "p_rf"),
            p_sleep: self.number("radio", "p_sleep"),
            p_out_max: self.number("radio", "p_out_max"),
            bandwidth: self.number("radio", "bandwidth"),
            e_switch: self.number("radio", "e_switch"),
        };
        let link = LinkBudget::new(
            self.number("link", "carrier_freq"),
            self.number("link", "cell_radius"),
            self.number("link", "noise_figure"),
            self.number("link", "noise_density"),
            radio.bandwidth,
        )?;
        let traffic = TrafficParams::new(self.number("traffic", "lambda"), self.number("traffic", "file_size"))?;
        let earth = EarthParams {
            n_trx: self.count("earth", "n_trx")?,
            p0: self.number("earth", "p0"),
            delta_p: self.number("earth", "delta_p"),
            p_sleep: self.number("earth", "p_sleep"),
            p_out_max: self.number("earth", "p_out_max"),
            e_switch: self.number("earth", "e_switch"),
        };
        earth.validate()?;
        let scenario = Scenario::new(compute, radio, link, traffic, self.number("run", "alpha"))?;

        let size_distribution = parse_size_distribution(
            self.get("run", "size_distribution").unwrap_or("exponential"),
            self.number("run", "pareto_shape"),
            self.number("run", "pareto_spread"),
        )
        .map_err(|msg| ConfigError::BadValue {
            section: "run".into(),
            key: "size_distribution".into(),
            msg,
        })?;
        let run = RunOptions {
            cores_max: self.count("run", "cores_max")?,
            seed: self.number("run", "seed") as u64,
            arrivals: self.number("run", "arrivals") as u64,
            warmup: self.number("run", "warmup"),
            batches: self.count("run", "batches")? as usize,
            size_distribution,
            delay_min: self.number("run", "delay_min"),
            delay_max: self.number("run", "delay_max"),
            delay_points: self.count("run", "delay_points")? as usize,
        };
        Ok(ResolvedConfig {
            id: self.id.clone(),
            scenario,
            earth,
            run,
        })
    }
}

impl fmt::Display for ScenarioFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut current = "";
        for (k, v) in KEYS.iter().zip(&self.values) {
            if k.section != current {
                if !current.is_empty() {
                    writeln!(f)?;
                }
                writeln!(f, "[{}]", k.section)?;
                current = k.section;
            }
            writeln!(f, "{} = {}", k.key, v)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub cores_max: u32,
    pub seed: u64,
    pub arrivals: u64,
    pub warmup: f64,
    pub batches: usize,
    pub size_distribution: SizeDistribution,
    pub delay_min: f64,
    pub delay_max: f64,
    pub delay_points: usize,
}

impl RunOptions {
    /// Log-spaced delay grid between `delay_min` and `delay_max`.
    pub fn delay_grid(&self) -> Vec<f64> {
        log_grid(self.delay_min, self.delay_max, self.delay_points)
    }
}

pub fn log_grid(start: f64, stop: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let ratio = stop / start;
            (0..steps)
                .map(|i| {
                    if i + 1 == steps {
                        stop
                    } else {
                        start * ratio.powf(i as f64 / (steps - 1) as f64)
                    }
                })
                .collect()
        }
    }
}

pub fn linear_grid(start: f64, stop: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..steps)
            .map(|i| {
                if i + 1 == steps {
                    stop
                } else {
                    start + (stop - start) * i as f64 / (steps - 1) as f64
                }
            })
            .collect(),
    }
}

/// Typed view of a scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub id: String,
    pub scenario: Scenario,
    pub earth: EarthParams,
    pub run: RunOptions,
}
