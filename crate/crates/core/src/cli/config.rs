//! Run configuration: a flat `key = value` file split into `[sections]`,
//! with command-line flags applied on top through the same setter.
//!
//! ```text
//! [map]
//! name = lyness
//! mu = xy
//! a = 2
//!
//! [sweep]
//! count = 20
//! ray = 2.05,2.05 ; 6,6
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use crate::flow::IntegratorConfig;
use crate::maps::{builtin, MapError, MapSpec, MultiplierSpec, Params};
use crate::par::Exec;
use crate::rotation::{RotationConfig, DEFAULT_MAX_MULTIPLICITY};
use crate::vecgeo::Point;

/// Environment variable naming the config file used when `--config` is absent.
pub const CONFIG_ENV: &str = "INTFLOW_CONFIG";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    /// Line in the config file; `None` for command-line values.
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.key.is_empty()) {
            (Some(l), false) => write!(f, "line {l}: `{}`: {}", self.key, self.message),
            (Some(l), true) => write!(f, "line {l}: {}", self.message),
            (None, false) => write!(f, "`{}`: {}", self.key, self.message),
            (None, true) => write!(f, "{}", self.message),
        }
    }
}

impl ConfigError {
    fn new(key: &str, message: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            key: key.to_string(),
            message: message.into(),
        }
    }
}

impl From<MapError> for ConfigError {
    fn from(e: MapError) -> Self {
        ConfigError::new("map", e.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub map: Option<String>,
    pub params: Params,
    pub multiplier: Option<String>,
    pub power: u32,
    pub integrator: IntegratorConfig,
    pub max_multiplicity: usize,
    pub residual_threshold: f64,
    pub birkhoff_iterations: usize,
    pub seed: Option<Point>,
    pub ray: Option<(Point, Point)>,
    pub count: usize,
    /// Random points per pointwise check in `verify`.
    pub samples: usize,
    pub measure_samples: usize,
    pub rng_seed: u64,
    pub parallel: bool,
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub portrait_seeds: usize,
    pub markers: usize,
    pub axes: (usize, usize),
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            map: None,
            params: Params::new(),
            multiplier: None,
            power: 1,
            integrator: IntegratorConfig::default(),
            max_multiplicity: DEFAULT_MAX_MULTIPLICITY,
            residual_threshold: 1e-8,
            birkhoff_iterations: 0,
            seed: None,
            ray: None,
            count: 20,
            samples: 1000,
            measure_samples: 200_000,
            rng_seed: 1,
            parallel: true,
            csv: None,
            svg: None,
            portrait_seeds: 12,
            markers: 60,
            axes: (0, 1),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let at = |mut e: ConfigError| {
                e.line = Some(i + 1);
                e
            };
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| at(ConfigError::new("", "unterminated section header")))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(at(ConfigError::new(name, "unknown section")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(ConfigError::new("", "expected `key = value`")))?;
            let sec = section
                .as_deref()
                .ok_or_else(|| at(ConfigError::new(key.trim(), "key before any [section]")))?;
            cfg.set(&format!("{sec}.{}", key.trim()), value.trim())
                .map_err(at)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    /// Sets `section.key`. Unknown keys in `[map]` are map parameters.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let (section, name) = key
            .split_once('.')
            .ok_or_else(|| ConfigError::new(key, "expected `section.key`"))?;
        let ic = &mut self.integrator;
        match (section, name) {
            ("map", "name") => self.map = Some(value.to_string()),
            ("map", "mu") => self.multiplier = Some(value.to_string()),
            ("map", "power") => self.power = num(key, value)?,
            ("map", p) => {
                self.params.insert(p.to_string(), num(key, value)?);
            }
            ("integrator", "rel_tol") => ic.rel_tol = num(key, value)?,
            ("integrator", "abs_tol") => ic.abs_tol = num(key, value)?,
            ("integrator", "max_step") => ic.max_step = num(key, value)?,
            ("integrator", "horizon") => ic.horizon = num(key, value)?,
            ("integrator", "max_returns") => ic.max_returns = num(key, value)?,
            ("integrator", "closure_factor") => ic.closure_factor = num(key, value)?,
            ("integrator", "escape_radius") => ic.escape_radius = num(key, value)?,
            ("integrator", "max_steps") => ic.max_steps = num(key, value)?,
            ("rotation", "max_multiplicity") => self.max_multiplicity = num(key, value)?,
            ("rotation", "residual_threshold") => self.residual_threshold = num(key, value)?,
            ("rotation", "birkhoff_iterations") => self.birkhoff_iterations = num(key, value)?,
            ("run", "seed") => self.seed = Some(point(key, value)?),
            ("run", "rng_seed") => self.rng_seed = num(key, value)?,
            ("run", "samples") => self.samples = num(key, value)?,
            ("run", "measure_samples") => self.measure_samples = num(key, value)?,
            ("run", "parallel") => self.parallel = num(key, value)?,
            ("sweep", "count") => self.count = num(key, value)?,
            ("sweep", "ray") => self.ray = Some(ray(key, value)?),
            ("portrait", "seeds") => self.portrait_seeds = num(key, value)?,
            ("portrait", "markers") => self.markers = num(key, value)?,
            ("portrait", "axes") => {
                let v: Vec<usize> = list(key, value)?;
                match v[..] {
                    [i, j] if i != j => self.axes = (i, j),
                    _ => return Err(ConfigError::new(key, "expected two distinct indices `i,j`")),
                }
            }
            ("output", "csv") => self.csv = Some(PathBuf::from(value)),
            ("output", "svg") => self.svg = Some(PathBuf::from(value)),
            _ => return Err(ConfigError::new(key, "unknown key")),
        }
        Ok(())
    }

    /// The configured map (already raised to `power`) and multiplier,
    /// checked against the builtin registry.
    pub fn resolve(&self) -> Result<(MapSpec, MultiplierSpec), ConfigError> {
        let name = self
            .map
            .as_deref()
            .ok_or_else(|| ConfigError::new("map.name", "no map given"))?;
        if self.power == 0 {
            return Err(ConfigError::new("map.power", "must be at least 1"));
        }
        let m = builtin(name, &self.params)?.power_of(self.power);
        let mu = match &self.multiplier {
            Some(n) => m.multiplier(n)?.clone(),
            None => m.default_multiplier().clone(),
        };
        self.integrator
            .validate()
            .map_err(|e| ConfigError::new("integrator", e.to_string()))?;
        if self.max_multiplicity == 0 {
            return Err(ConfigError::new(
                "rotation.max_multiplicity",
                "must be at least 1",
            ));
        }
        if let Some(s) = &self.seed {
            if s.len() != m.dim() {
                return Err(ConfigError::new(
                    "run.seed",
                    format!("expected {} coordinates, got {}", m.dim(), s.len()),
                ));
            }
        }
        if let Some((a, b)) = &self.ray {
            if a.len() != m.dim() || b.len() != m.dim() {
                return Err(ConfigError::new(
                    "sweep.ray",
                    format!("endpoints need {} coordinates", m.dim()),
                ));
            }
        }
        if self.axes.0.max(self.axes.1) >= m.dim() {
            return Err(ConfigError::new(
                "portrait.axes",
                "index beyond the map dimension",
            ));
        }
        Ok((m, mu))
    }

    pub fn rotation(&self) -> RotationConfig {
        RotationConfig {
            integrator: self.integrator.clone(),
            max_multiplicity: self.max_multiplicity,
            residual_threshold: self.residual_threshold,
            exec: self.exec(),
        }
    }

    pub fn exec(&self) -> Exec {
        if self.parallel {
            Exec::default()
        } else {
            Exec::Sequential
        }
    }
}

const SECTIONS: [&str; 7] = [
    "map",
    "integrator",
    "rotation",
    "run",
    "sweep",
    "portrait",
    "output",
];

// `;` separates ray endpoints, so only `#` starts a comment after a value;
// a leading `;` still comments out the whole line.
fn strip_comment(raw: &str) -> &str {
    if raw.trim_start().starts_with(';') {
        return "";
    }
    raw.split('#').next().unwrap_or("")
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError::new(key, format!("cannot parse `{value}`")))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError> {
    value.split(',').map(|s| num(key, s.trim())).collect()
}

pub(crate) fn point(key: &str, value: &str) -> Result<Point, ConfigError> {
    let p: Point = list(key, value)?;
    if p.len() < 2 || p.iter().any(|c| !c.is_finite()) {
        return Err(ConfigError::new(
            key,
            "expected finite coordinates `x,y[,z...]`",
        ));
    }
    Ok(p)
}

pub(crate) fn ray(key: &str, value: &str) -> Result<(Point, Point), ConfigError> {
    let (a, b) = value
        .split_once(';')
        .ok_or_else(|| ConfigError::new(key, "expected `x0,y0 ; x1,y1`"))?;
    let (a, b) = (point(key, a.trim())?, point(key, b.trim())?);
    if a.len() != b.len() {
        return Err(ConfigError::new(key, "endpoints differ in dimension"));
    }
    Ok((a, b))
}
