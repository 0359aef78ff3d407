use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveTime;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embedding::AnnealingConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    IntradayTicks,
    IntradayBinned,
    Daily,
}

impl Mode {
    pub fn is_intraday(self) -> bool {
        !matches!(self, Mode::Daily)
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intraday-ticks" => Ok(Mode::IntradayTicks),
            "intraday-binned" => Ok(Mode::IntradayBinned),
            "daily" => Ok(Mode::Daily),
            other => Err(Error::invalid(format!(
                "unknown mode `{other}` (expected intraday-ticks, intraday-binned or daily)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    HayashiYoshida,
    Realized,
    PearsonBinned,
    Pearson,
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hayashi-yoshida" | "hy" => Ok(Estimator::HayashiYoshida),
            "realized" => Ok(Estimator::Realized),
            "pearson-binned" => Ok(Estimator::PearsonBinned),
            "pearson" => Ok(Estimator::Pearson),
            other => Err(Error::invalid(format!("unknown estimator `{other}`"))),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::HayashiYoshida => "hayashi-yoshida",
            Estimator::Realized => "realized",
            Estimator::PearsonBinned => "pearson-binned",
            Estimator::Pearson => "pearson",
        })
    }
}

/// What to do with a window (or bin) where some symbol lacks data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    #[default]
    DropSymbols,
    SkipWindow,
}

/// Intraday session `HH:MM-HH:MM` (UTC).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Session {
    pub start: NaiveTime,
    pub end: NaiveTime,
}

impl Default for Session {
    fn default() -> Self {
        Session {
            start: NaiveTime::from_hms_opt(10, 0, 0).expect("valid time"),
            end: NaiveTime::from_hms_opt(16, 0, 0).expect("valid time"),
        }
    }
}

impl FromStr for Session {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("session `{s}` is not HH:MM-HH:MM"));
        let (a, b) = s.split_once('-').ok_or_else(bad)?;
        let parse = |t: &str| {
            NaiveTime::parse_from_str(t.trim(), "%H:%M:%S")
                .or_else(|_| NaiveTime::parse_from_str(t.trim(), "%H:%M"))
                .map_err(|_| bad())
        };
        Ok(Session {
            start: parse(a)?,
            end: parse(b)?,
        })
    }
}

impl fmt::Display for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start.format("%H:%M:%S"), self.end.format("%H:%M:%S"))
    }
}

impl Serialize for Session {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Session {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Declarative pipeline configuration, usually read from TOML and then
/// overridden by command-line flags.
///
/// Grid fields (`session`, `bin_width`, `map_bin_width`) belong to the
/// intraday modes, window fields (`window`, `step`) to the daily mode; the
/// other mode's fields must be absent. Missing grid fields default to a
/// 10:00-16:00 session in 300-second bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub mode: Mode,
    #[serde(default)]
    pub inputs: Vec<PathBuf>,
    #[serde(default)]
    pub session: Option<Session>,
    /// Seconds.
    #[serde(default)]
    pub bin_width: Option<u32>,
    /// Coarser bin width (seconds) for the map stage; defaults to `bin_width`.
    #[serde(default)]
    pub map_bin_width: Option<u32>,
    /// Trading days per window.
    #[serde(default)]
    pub window: Option<usize>,
    /// Days between window starts; defaults to `window`.
    #[serde(default)]
    pub step: Option<usize>,
    #[serde(default)]
    pub estimator: Option<Estimator>,
    /// Grid interval (seconds) of the realized estimator.
    #[serde(default)]
    pub realized_interval: Option<f64>,
    #[serde(default)]
    pub clean: bool,
    #[serde(default)]
    pub missing: MissingPolicy,
    #[serde(default)]
    pub annealing: AnnealingConfig,
    /// Warm-start penalty weight; defaults per step to 0.01 times the mean
    /// squared target distance.
    #[serde(default)]
    pub penalty_weight: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; excluded from the config hash.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

pub const DEFAULT_BIN_WIDTH: u32 = 300;
pub const DEFAULT_REALIZED_INTERVAL: f64 = 60.0;

impl PipelineConfig {
    pub fn new(mode: Mode) -> Self {
        PipelineConfig {
            mode,
            inputs: Vec::new(),
            session: None,
            bin_width: None,
            map_bin_width: None,
            window: None,
            step: None,
            estimator: None,
            realized_interval: None,
            clean: false,
            missing: MissingPolicy::default(),
            annealing: AnnealingConfig::default(),
            penalty_weight: None,
            seed: 0,
            out: None,
        }
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::invalid(format!("config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn session(&self) -> Session {
        self.session.unwrap_or_default()
    }

    pub fn bin_width(&self) -> u32 {
        self.bin_width.unwrap_or(DEFAULT_BIN_WIDTH)
    }

    pub fn estimator(&self) -> Estimator {
        self.estimator.unwrap_or(match self.mode {
            Mode::IntradayTicks => Estimator::HayashiYoshida,
            Mode::IntradayBinned => Estimator::PearsonBinned,
            Mode::Daily => Estimator::Pearson,
        })
    }

    pub fn realized_interval(&self) -> f64 {
        self.realized_interval.unwrap_or(DEFAULT_REALIZED_INTERVAL)
    }

    /// Check mode-consistent field presence and value ranges.
    pub fn validate(&self) -> Result<()> {
        let est = self.estimator();
        if self.mode.is_intraday() {
            if self.window.is_some() || self.step.is_some() {
                return Err(Error::invalid("window/step apply to the daily mode only"));
            }
            let session = self.session();
            let start = chrono::Timelike::num_seconds_from_midnight(&session.start);
            let end = chrono::Timelike::num_seconds_from_midnight(&session.end);
            if end <= start {
                return Err(Error::invalid(format!("session {session} is empty")));
            }
            let width = self.bin_width();
            if width == 0 || !(end - start).is_multiple_of(width) {
                return Err(Error::invalid(format!(
                    "bin width {width}s does not divide the session {session}"
                )));
            }
            if let Some(m) = self.map_bin_width {
                if m == 0 || m % width != 0 || !(end - start).is_multiple_of(m) {
                    return Err(Error::invalid(format!(
                        "map bin width {m}s must be a multiple of {width}s dividing the session"
                    )));
                }
            }
            match (self.mode, est) {
                (Mode::IntradayTicks, Estimator::Pearson)
                | (Mode::IntradayBinned, Estimator::HayashiYoshida | Estimator::Realized | Estimator::Pearson) => {
                    return Err(Error::invalid(format!(
                        "estimator {est} is not available in this mode"
                    )));
                }
                _ => {}
            }
        } else {
            if self.session.is_some() || self.bin_width.is_some() || self.map_bin_width.is_some() {
                return Err(Error::invalid("session/bin width apply to intraday modes only"));
            }
            let window = self
                .window
                .ok_or_else(|| Error::invalid("daily mode needs a window width"))?;
            if window < 2 {
                return Err(Error::invalid("daily window must span at least 2 days"));
            }
            if self.step == Some(0) {
                return Err(Error::invalid("window step must be positive"));
            }
            if est != Estimator::Pearson {
                return Err(Error::invalid(format!("estimator {est} is not available in daily mode")));
            }
        }
        if !(self.realized_interval() > 0.0) {
            return Err(Error::invalid("realized interval must be positive"));
        }
        if let Some(w) = self.penalty_weight {
            if !(w >= 0.0) {
                return Err(Error::invalid(format!("penalty weight {w} must be >= 0")));
            }
        }
        if self.annealing.dims == 0 {
            return Err(Error::invalid("embedding dimension must be at least 1"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form of the config, output
    /// directory excluded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = None;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
