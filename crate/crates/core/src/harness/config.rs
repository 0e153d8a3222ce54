//! Experiment configuration: a TOML key/value document with unit-aware values.
//!
//! ```toml
//! water = "I"
//! distance = ["30m", "60m", "90m"]   # an array marks the swept quantity
//! aperture = "10cm"
//! fov = "10deg"
//! environment = "starlight"
//! photons = 100000
//! ```

use std::fmt::Write as _;
use std::path::PathBuf;

use sha2::{Digest, Sha256};
use thiserror::Error;
use toml::Value;

use crate::link::LinkParams;
use crate::medium::{
    JerlovType, JungePsd, Sky, DEFAULT_WAVELENGTH, DIFFUSE_ATTENUATION_JERLOV_I, PURE_SEAWATER_ABSORPTION_480NM,
    SEAWATER_INDEX,
};
use crate::mie::{ComplexIndex, DEFAULT_DIAMETER_NODES};
use crate::polarization::Bb84State;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("malformed configuration: {0}")]
    Syntax(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {message}")]
    InvalidValue { key: String, message: String },
    #[error("only one quantity may be swept per run, found arrays for {}", .0.join(", "))]
    MultipleSweeps(Vec<String>),
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue { key: key.to_string(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepKey {
    Distance,
    Aperture,
    Fov,
    Depth,
}

impl SweepKey {
    pub fn name(self) -> &'static str {
        match self {
            SweepKey::Distance => "distance",
            SweepKey::Aperture => "aperture",
            SweepKey::Fov => "fov",
            SweepKey::Depth => "depth",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            SweepKey::Fov => "rad",
            _ => "m",
        }
    }

    fn from_key(key: &str) -> Option<Self> {
        match key {
            "distance" => Some(SweepKey::Distance),
            "aperture" => Some(SweepKey::Aperture),
            "fov" => Some(SweepKey::Fov),
            "depth" => Some(SweepKey::Depth),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub key: SweepKey,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub water: JerlovType,
    /// Total extinction override (1/m); the Jerlov value when `None`.
    pub extinction: Option<f64>,
    pub water_absorption: f64,
    pub wavelength: f64,
    pub distance: f64,
    pub aperture: f64,
    pub fov: f64,
    pub depth: f64,
    pub sweep: Option<Sweep>,
    /// `None` disables ambient background light.
    pub environment: Option<Sky>,
    pub mu_d: f64,
    pub states: Vec<Bb84State>,
    pub photons: u64,
    pub seed: u64,
    /// Worker threads; `None` lets the caller choose.
    pub workers: Option<usize>,
    pub psd: JungePsd,
    pub particle_index: ComplexIndex,
    pub water_index: f64,
    pub diameter_nodes: usize,
    pub link: LinkParams,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            water: JerlovType::I,
            extinction: None,
            water_absorption: PURE_SEAWATER_ABSORPTION_480NM,
            wavelength: DEFAULT_WAVELENGTH,
            distance: 60.0,
            aperture: 0.1,
            fov: 0.175,
            depth: 200.0,
            sweep: None,
            environment: Some(Sky::Starlight),
            mu_d: DIFFUSE_ATTENUATION_JERLOV_I,
            states: Bb84State::ALL.to_vec(),
            photons: 1_000_000,
            seed: 20_131_301,
            workers: None,
            psd: JungePsd::default(),
            particle_index: ComplexIndex::plankton(),
            water_index: SEAWATER_INDEX,
            diameter_nodes: DEFAULT_DIAMETER_NODES,
            link: LinkParams::default(),
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn extinction(&self) -> f64 {
        self.extinction.unwrap_or_else(|| self.water.extinction())
    }

    /// Copy of this configuration with the sweep replaced by a single value.
    pub fn at(&self, key: SweepKey, value: f64) -> ExperimentConfig {
        let mut c = self.clone();
        c.sweep = None;
        c.set(key, value);
        c
    }

    pub fn set(&mut self, key: SweepKey, value: f64) {
        match key {
            SweepKey::Distance => self.distance = value,
            SweepKey::Aperture => self.aperture = value,
            SweepKey::Fov => self.fov = value,
            SweepKey::Depth => self.depth = value,
        }
    }

    pub fn get(&self, key: SweepKey) -> f64 {
        match key {
            SweepKey::Distance => self.distance,
            SweepKey::Aperture => self.aperture,
            SweepKey::Fov => self.fov,
            SweepKey::Depth => self.depth,
        }
    }

    pub fn with_sweep(mut self, key: SweepKey, values: Vec<f64>) -> Self {
        self.sweep = Some(Sweep { key, values });
        self
    }

    /// Canonical text of every field that affects results. Worker count and
    /// output path are excluded.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let f = |v: f64| format!("{:016x}", v.to_bits());
        let _ = writeln!(s, "water={:?}", self.water);
        let _ = writeln!(s, "extinction={}", self.extinction.map(f).unwrap_or_default());
        let _ = writeln!(s, "water_absorption={}", f(self.water_absorption));
        let _ = writeln!(s, "wavelength={}", f(self.wavelength));
        let _ = writeln!(s, "distance={}", f(self.distance));
        let _ = writeln!(s, "aperture={}", f(self.aperture));
        let _ = writeln!(s, "fov={}", f(self.fov));
        let _ = writeln!(s, "depth={}", f(self.depth));
        match &self.sweep {
            Some(sw) => {
                let vals: Vec<String> = sw.values.iter().map(|&v| f(v)).collect();
                let _ = writeln!(s, "sweep={}:{}", sw.key.name(), vals.join(","));
            }
            None => s.push_str("sweep=\n"),
        }
        let _ = writeln!(s, "environment={:?}", self.environment);
        let _ = writeln!(s, "mu_d={}", f(self.mu_d));
        let _ = writeln!(s, "states={:?}", self.states);
        let _ = writeln!(s, "photons={}", self.photons);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "psd={},{},{}", f(self.psd.slope()), f(self.psd.dmin()), f(self.psd.dmax()));
        let _ = writeln!(s, "particle_index={},{}", f(self.particle_index.real()), f(self.particle_index.absorption()));
        let _ = writeln!(s, "water_index={}", f(self.water_index));
        let _ = writeln!(s, "diameter_nodes={}", self.diameter_nodes);
        let l = &self.link;
        let _ = writeln!(
            s,
            "link={},{},{},{},{},{}",
            f(l.pulse_rate),
            f(l.mean_photons),
            f(l.bit_period),
            f(l.gate),
            f(l.wavelength),
            f(l.detection_efficiency)
        );
        s
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).fold(String::new(), |mut acc, b| {
            let _ = write!(acc, "{b:02x}");
            acc
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("distance", self.distance),
            ("aperture", self.aperture),
            ("fov", self.fov),
            ("wavelength", self.wavelength),
            ("mu_d", self.mu_d),
            ("water_index", self.water_index),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(key, format!("must be positive, got {v}")));
            }
        }
        if !(self.depth >= 0.0 && self.depth.is_finite()) {
            return Err(invalid("depth", format!("must be non-negative, got {}", self.depth)));
        }
        if self.fov > std::f64::consts::FRAC_PI_2 {
            return Err(invalid("fov", "must not exceed 90 degrees"));
        }
        if !(self.water_absorption >= 0.0) {
            return Err(invalid("water_absorption", "must be non-negative"));
        }
        if let Some(e) = self.extinction {
            if !(e > 0.0 && e.is_finite()) {
                return Err(invalid("extinction", format!("must be positive, got {e}")));
            }
        }
        if self.extinction() < self.water_absorption {
            return Err(invalid("extinction", "must not be below water_absorption"));
        }
        if self.photons == 0 {
            return Err(invalid("photons", "must be at least 1"));
        }
        if self.states.is_empty() {
            return Err(invalid("states", "at least one state is required"));
        }
        if self.diameter_nodes == 0 {
            return Err(invalid("diameter_nodes", "must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(invalid("workers", "must be at least 1"));
        }
        if let Some(sw) = &self.sweep {
            for &v in &sw.values {
                let probe = self.at(sw.key, v);
                probe.validate().map_err(|e| match e {
                    ConfigError::InvalidValue { message, .. } => invalid(sw.key.name(), message),
                    other => other,
                })?;
            }
        }
        self.link.validate().map_err(|e| invalid("link", e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Dimension {
    Length,
    Angle,
    Time,
}

fn unit_scale(dim: Dimension, unit: &str) -> Option<f64> {
    match (dim, unit) {
        (Dimension::Length, "m") => Some(1.0),
        (Dimension::Length, "km") => Some(1e3),
        (Dimension::Length, "cm") => Some(1e-2),
        (Dimension::Length, "mm") => Some(1e-3),
        (Dimension::Length, "um" | "µm" | "μm") => Some(1e-6),
        (Dimension::Length, "nm") => Some(1e-9),
        (Dimension::Angle, "rad") => Some(1.0),
        (Dimension::Angle, "mrad") => Some(1e-3),
        (Dimension::Angle, "deg" | "°") => Some(std::f64::consts::PI / 180.0),
        (Dimension::Time, "s") => Some(1.0),
        (Dimension::Time, "ms") => Some(1e-3),
        (Dimension::Time, "us" | "µs" | "μs") => Some(1e-6),
        (Dimension::Time, "ns") => Some(1e-9),
        (Dimension::Time, "ps") => Some(1e-12),
        _ => None,
    }
}

fn number(key: &str, v: &Value) -> Result<f64, ConfigError> {
    match v {
        Value::Integer(i) => Ok(*i as f64),
        Value::Float(f) => Ok(*f),
        Value::String(s) => s.trim().parse::<f64>().map_err(|_| invalid(key, format!("`{s}` is not a number"))),
        other => Err(invalid(key, format!("expected a number, got {}", other.type_str()))),
    }
}

fn quantity(key: &str, v: &Value, dim: Dimension) -> Result<f64, ConfigError> {
    let Value::String(s) = v else {
        return number(key, v);
    };
    let s = s.trim();
    let split = s
        .char_indices()
        .find(|&(i, c)| c.is_alphabetic() || c == '°' || (c == 'µ' && i > 0))
        .map(|(i, _)| i)
        .unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let value: f64 = num.trim().parse().map_err(|_| invalid(key, format!("`{s}` is not a number with a unit")))?;
    if unit.is_empty() {
        return Ok(value);
    }
    let scale = unit_scale(dim, unit.trim()).ok_or_else(|| invalid(key, format!("unknown unit `{unit}`")))?;
    Ok(value * scale)
}

fn integer(key: &str, v: &Value) -> Result<u64, ConfigError> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        Value::Float(f) if *f >= 0.0 && f.fract() == 0.0 && *f < 1.8e19 => Ok(*f as u64),
        Value::String(s) => {
            let f: f64 = s.trim().parse().map_err(|_| invalid(key, format!("`{s}` is not an integer")))?;
            integer(key, &Value::Float(f))
        }
        _ => Err(invalid(key, "expected a non-negative integer")),
    }
}

fn string<'a>(key: &str, v: &'a Value) -> Result<&'a str, ConfigError> {
    v.as_str().ok_or_else(|| invalid(key, "expected a string"))
}

/// Parses and validates a configuration document. Missing keys take the
/// defaults of [`ExperimentConfig::default`].
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    let mut cfg = ExperimentConfig::default();

    let sweeps: Vec<String> = table
        .iter()
        .filter(|(k, v)| v.is_array() && SweepKey::from_key(k).is_some())
        .map(|(k, _)| k.clone())
        .collect();
    if sweeps.len() > 1 {
        return Err(ConfigError::MultipleSweeps(sweeps));
    }

    let (mut slope, mut dmin, mut dmax) = (cfg.psd.slope(), cfg.psd.dmin(), cfg.psd.dmax());
    let (mut n_real, mut n_abs) = (cfg.particle_index.real(), cfg.particle_index.absorption());

    for (key, value) in &table {
        let k = key.as_str();
        match k {
            "distance" | "aperture" | "fov" | "depth" => {
                let dim = if k == "fov" { Dimension::Angle } else { Dimension::Length };
                let sweep_key = SweepKey::from_key(k).expect("known sweep key");
                if let Value::Array(items) = value {
                    let mut values = items.iter().map(|v| quantity(k, v, dim)).collect::<Result<Vec<_>, _>>()?;
                    values.sort_by(f64::total_cmp);
                    cfg.sweep = Some(Sweep { key: sweep_key, values });
                } else {
                    cfg.set(sweep_key, quantity(k, value, dim)?);
                }
            }
            "water" => {
                cfg.water = match value {
                    Value::Integer(i) => i.to_string().parse(),
                    _ => string(k, value)?.parse(),
                }
                .map_err(|e: String| invalid(k, e))?
            }
            "extinction" => cfg.extinction = Some(number(k, value)?),
            "water_absorption" => cfg.water_absorption = number(k, value)?,
            "wavelength" => {
                cfg.wavelength = quantity(k, value, Dimension::Length)?;
                cfg.link.wavelength = cfg.wavelength;
            }
            "environment" => {
                let s = string(k, value)?;
                cfg.environment = match s.to_ascii_lowercase().as_str() {
                    "none" | "dark" | "no-background" => None,
                    _ => Some(s.parse().map_err(|e: String| invalid(k, e))?),
                };
            }
            "mu_d" => cfg.mu_d = number(k, value)?,
            "states" => {
                let items: Vec<&str> = match value {
                    Value::Array(a) => a.iter().map(|v| string(k, v)).collect::<Result<_, _>>()?,
                    Value::String(s) => s.split(',').collect(),
                    _ => return Err(invalid(k, "expected a list of states")),
                };
                let mut states: Vec<Bb84State> =
                    items.iter().map(|s| s.parse().map_err(|e: String| invalid(k, e))).collect::<Result<_, _>>()?;
                states.sort();
                states.dedup();
                cfg.states = states;
            }
            "photons" => cfg.photons = integer(k, value)?,
            "seed" => cfg.seed = integer(k, value)?,
            "workers" => cfg.workers = Some(integer(k, value)? as usize),
            "psd_slope" => slope = number(k, value)?,
            "psd_dmin" => dmin = quantity(k, value, Dimension::Length)?,
            "psd_dmax" => dmax = quantity(k, value, Dimension::Length)?,
            "particle_index_real" => n_real = number(k, value)?,
            "particle_index_imag" => n_abs = number(k, value)?.abs(),
            "water_index" => cfg.water_index = number(k, value)?,
            "diameter_nodes" => cfg.diameter_nodes = integer(k, value)? as usize,
            "mean_photons" => cfg.link.mean_photons = number(k, value)?,
            "bit_period" => {
                cfg.link.bit_period = quantity(k, value, Dimension::Time)?;
                cfg.link.pulse_rate = 1.0 / cfg.link.bit_period;
            }
            "gate" => cfg.link.gate = quantity(k, value, Dimension::Time)?,
            "detection_efficiency" => cfg.link.detection_efficiency = number(k, value)?,
            "output" => cfg.output = Some(PathBuf::from(string(k, value)?)),
            _ => return Err(ConfigError::UnknownKey(key.clone())),
        }
    }

    cfg.psd = JungePsd::new(slope, dmin, dmax).map_err(|e| invalid("psd", e.to_string()))?;
    if !(n_real > 0.0) {
        return Err(invalid("particle_index_real", "must be positive"));
    }
    cfg.particle_index = ComplexIndex::new(n_real, n_abs);
    cfg.validate()?;
    Ok(cfg)
}
