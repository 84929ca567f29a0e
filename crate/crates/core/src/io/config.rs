//! TOML run configuration.
//!
//! ```toml
//! [model]
//! kind = "ac"          # ac | ch | pfc; every other key defaults per kind
//! mobility = 1.0
//! epsilon = 0.02
//! gamma0 = 1.0
//!
//! [grid]
//! nx = 128
//! ny = 128
//! lx = 1.0
//! ly = 1.0
//!
//! [time]
//! dt = 1e-3
//! t_end = 15.0
//! sample_interval = 0.1
//!
//! [rom]
//! variant = "ii"
//! scheme = "cn"
//! relaxed = true
//! eta = 0.99
//! rank = 10            # or: threshold = 1e-3 (not both)
//!
//! [paths]
//! snapshots = "ac.snap"
//! basis = "ac.basis"
//! outputs = "out"
//! ```

use std::path::PathBuf;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{CrystalSeed, ModelKind, ModelSpec};
use crate::pod::ThresholdMode;
use crate::rom::Variant;
use crate::spectral::Grid2D;
use crate::stepper::{Scheme, SchemeConfig, DEFAULT_ETA};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: RawModel,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    time: RawTime,
    #[serde(default)]
    rom: RawRom,
    #[serde(default)]
    paths: RawPaths,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kind: String,
    mobility: Option<f64>,
    epsilon: Option<f64>,
    a0: Option<f64>,
    b0: Option<f64>,
    gamma0: Option<f64>,
    energy_shift: Option<f64>,
    seed_mean: Option<f64>,
    seed_amplitude: Option<f64>,
    seed_radius: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    nx: Option<usize>,
    ny: Option<usize>,
    lx: Option<f64>,
    ly: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    dt: Option<f64>,
    t_end: Option<f64>,
    sample_interval: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRom {
    variant: Option<String>,
    scheme: Option<String>,
    relaxed: Option<bool>,
    eta: Option<f64>,
    rank: Option<usize>,
    threshold: Option<f64>,
    threshold_mode: Option<String>,
    deim: Option<bool>,
    deim_rank: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPaths {
    snapshots: Option<PathBuf>,
    basis: Option<PathBuf>,
    outputs: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_end: f64,
    pub sample_interval: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    Rank(usize),
    Threshold(f64, ThresholdMode),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RomConfig {
    pub variant: Variant,
    pub scheme: Scheme,
    pub relaxed: bool,
    pub eta: f64,
    pub truncation: Truncation,
    pub deim: bool,
    pub deim_rank: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathsConfig {
    pub snapshots: Option<PathBuf>,
    pub basis: Option<PathBuf>,
    pub outputs: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub grid: Grid2D,
    pub time: TimeConfig,
    pub rom: RomConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    /// Defaults of the built-in benchmark for `kind`.
    pub fn defaults_for(kind: ModelKind) -> Self {
        let (n, l, t_end, sample, rank) = match kind {
            ModelKind::AllenCahn => (128, 1.0, 15.0, 0.1, 10),
            ModelKind::CahnHilliard => (128, 1.0, 90.0, 0.6, 15),
            ModelKind::PhaseFieldCrystal => (128, 100.0, 100.0, 1.0, 8),
        };
        Self {
            model: ModelSpec::defaults_for(kind),
            grid: Grid2D::new(n, n, l, l).expect("built-in grid is valid"),
            time: TimeConfig {
                dt: 1e-3,
                t_end,
                sample_interval: sample,
            },
            rom: RomConfig {
                variant: Variant::II,
                scheme: Scheme::Cn,
                relaxed: true,
                eta: DEFAULT_ETA,
                truncation: Truncation::Rank(rank),
                deim: false,
                deim_rank: None,
            },
            paths: PathsConfig::default(),
        }
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        SchemeConfig {
            scheme: self.rom.scheme,
            variant: self.rom.variant,
            relaxed: self.rom.relaxed,
            eta: self.rom.eta,
            dt: self.time.dt,
        }
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::config(key, format!("must be positive, got {v}")))
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        let key = msg
            .split('`')
            .nth(1)
            .unwrap_or("document")
            .to_string();
        Error::config(key, msg)
    })?;

    let kind: ModelKind = raw
        .model
        .kind
        .parse()
        .map_err(|e: Error| Error::config("model.kind", e.to_string()))?;
    let mut cfg = RunConfig::defaults_for(kind);

    let m = &raw.model;
    let spec = &mut cfg.model;
    if let Some(v) = m.mobility {
        spec.mobility = positive("model.mobility", v)?;
    }
    if let Some(v) = m.epsilon {
        spec.epsilon = positive("model.epsilon", v)?;
    }
    if let Some(v) = m.gamma0 {
        spec.gamma0 = positive("model.gamma0", v)?;
    }
    if let Some(v) = m.a0 {
        spec.a0 = v;
    }
    if let Some(v) = m.b0 {
        spec.b0 = v;
    }
    if let Some(v) = m.energy_shift {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::config("model.energy_shift", format!("must be >= 0, got {v}")));
        }
        spec.energy_shift = v;
    }
    let seed = CrystalSeed {
        mean: m.seed_mean.unwrap_or(spec.seed.mean),
        amplitude: m.seed_amplitude.unwrap_or(spec.seed.amplitude),
        radius: match m.seed_radius {
            Some(v) => positive("model.seed_radius", v)?,
            None => spec.seed.radius,
        },
    };
    spec.seed = seed;
    spec.validate()
        .map_err(|e| Error::config("model", e.to_string()))?;

    let g = &raw.grid;
    let nx = g.nx.unwrap_or(cfg.grid.nx());
    let ny = g.ny.unwrap_or(cfg.grid.ny());
    for (key, v) in [("grid.nx", nx), ("grid.ny", ny)] {
        if v == 0 || v % 2 != 0 {
            return Err(Error::config(key, format!("must be a positive even integer, got {v}")));
        }
    }
    let lx = positive("grid.lx", g.lx.unwrap_or(cfg.grid.lx()))?;
    let ly = positive("grid.ly", g.ly.unwrap_or(cfg.grid.ly()))?;
    cfg.grid = Grid2D::new(nx, ny, lx, ly)?;

    let t = &raw.time;
    cfg.time.dt = positive("time.dt", t.dt.unwrap_or(cfg.time.dt))?;
    cfg.time.t_end = t.t_end.unwrap_or(cfg.time.t_end);
    if !(cfg.time.t_end.is_finite() && cfg.time.t_end >= 0.0) {
        return Err(Error::config("time.t_end", "must be >= 0"));
    }
    cfg.time.sample_interval =
        positive("time.sample_interval", t.sample_interval.unwrap_or(cfg.time.sample_interval))?;
    crate::fom::steps_in(cfg.time.sample_interval, cfg.time.dt, "sample interval")
        .map_err(|e| Error::config("time.sample_interval", e.to_string()))?;
    crate::fom::steps_in(cfg.time.t_end, cfg.time.dt, "final time")
        .map_err(|e| Error::config("time.t_end", e.to_string()))?;

    let r = &raw.rom;
    if let Some(v) = &r.variant {
        cfg.rom.variant = v.parse()?;
    }
    if let Some(s) = &r.scheme {
        cfg.rom.scheme = s.parse()?;
    }
    if let Some(v) = r.relaxed {
        cfg.rom.relaxed = v;
    }
    if let Some(v) = r.eta {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::config("eta", format!("must lie in [0, 1], got {v}")));
        }
        cfg.rom.eta = v;
    }
    let mode = match r.threshold_mode.as_deref() {
        None | Some("relative") => ThresholdMode::Relative,
        Some("absolute") => ThresholdMode::Absolute,
        Some(other) => {
            return Err(Error::config(
                "rom.threshold_mode",
                format!("expected `relative` or `absolute`, got `{other}`"),
            ))
        }
    };
    match (r.rank, r.threshold) {
        (Some(_), Some(_)) => {
            return Err(Error::config("rom.rank", "set either rank or threshold, not both"))
        }
        (Some(0), None) => return Err(Error::config("rom.rank", "must be at least 1")),
        (Some(k), None) => cfg.rom.truncation = Truncation::Rank(k),
        (None, Some(th)) => {
            cfg.rom.truncation = Truncation::Threshold(positive("rom.threshold", th)?, mode)
        }
        (None, None) => {}
    }
    cfg.rom.deim = r.deim.unwrap_or(false);
    cfg.rom.deim_rank = r.deim_rank;
    if cfg.rom.deim_rank == Some(0) {
        return Err(Error::config("rom.deim_rank", "must be at least 1"));
    }
    if cfg.rom.relaxed && cfg.rom.variant == Variant::Vanilla {
        return Err(Error::config("rom.relaxed", "the vanilla variant cannot be relaxed"));
    }

    cfg.paths = PathsConfig {
        snapshots: raw.paths.snapshots,
        basis: raw.paths.basis,
        outputs: raw.paths.outputs,
    };
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}
