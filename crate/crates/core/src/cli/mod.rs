//! `intflow verify | rotnum | sweep | portrait`.
//!
//! Exit codes: 0 pass, 1 check failure, 2 config error, 3 domain exit,
//! 4 orbit did not close, 5 not invariant at any multiplicity tried.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::fields::{self, build_field, Residual, VectorFieldSpec};
use crate::flow::{self, FlowError, OrbitClass};
use crate::maps::{MapError, MapSpec, SigmaClass};
use crate::rotation::{self, RotationError, SweepRow};
use crate::vecgeo::{self, Point};

pub use config::{ConfigError, RunConfig, CONFIG_ENV};
use output::{csv_table, write_atomic, Portrait};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_NOT_CLOSED: i32 = 4;
pub const EXIT_NOT_INVARIANT: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "intflow",
    version,
    about = "Flows, flight times and rotation numbers of integrable maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the functional equations, Jacobian, inverse, integrals and invariant measure.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Random points per pointwise check.
        #[arg(long)]
        samples: Option<usize>,
        /// Monte Carlo samples for the measure check (0 skips it).
        #[arg(long)]
        measure_samples: Option<usize>,
    },
    /// Period, flight time, multiplicity and rotation number for one seed.
    Rotnum {
        #[command(flatten)]
        common: Common,
        /// Also estimate rho from this many map iterates.
        #[arg(long)]
        birkhoff: Option<usize>,
    },
    /// Rotation numbers along a ray of seeds, written as CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        count: Option<usize>,
        /// `x0,y0;x1,y1`
        #[arg(long, allow_hyphen_values = true)]
        ray: Option<String>,
        /// CSV destination (stdout if absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// SVG phase portrait: flow orbits through a ray of seeds plus map iterates.
    Portrait {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        markers: Option<usize>,
        /// Projected coordinates `i,j` for maps of dimension above two.
        #[arg(long)]
        axes: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        ray: Option<String>,
        /// SVG destination (stdout if absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Config file; defaults to the file named by INTFLOW_CONFIG.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    map: Option<String>,
    /// Multiplier name.
    #[arg(long)]
    mu: Option<String>,
    /// Work with the iterate F^k.
    #[arg(long)]
    power: Option<u32>,
    #[arg(long = "a", id = "a", allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long = "b", id = "b", allow_hyphen_values = true)]
    b: Option<f64>,
    #[arg(long = "c", id = "c", allow_hyphen_values = true)]
    c: Option<f64>,
    #[arg(long = "d", id = "d", allow_hyphen_values = true)]
    d: Option<f64>,
    #[arg(long = "A", id = "big_a", allow_hyphen_values = true)]
    big_a: Option<f64>,
    #[arg(long = "B", id = "big_b", allow_hyphen_values = true)]
    big_b: Option<f64>,
    #[arg(long = "C", id = "big_c", allow_hyphen_values = true)]
    big_c: Option<f64>,
    /// Seed point `x,y[,z]`.
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<String>,
    #[arg(long)]
    rng_seed: Option<u64>,
    /// Run everything on one thread.
    #[arg(long)]
    sequential: bool,
    /// Any config key, e.g. `--set integrator.horizon=5e4`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    sets: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, ConfigError> {
        let path = self.config.clone().or_else(|| {
            std::env::var_os(CONFIG_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
        });
        let mut cfg = match path {
            Some(p) => RunConfig::load(&p)?,
            None => RunConfig::default(),
        };
        if let Some(m) = &self.map {
            cfg.set("map.name", m)?;
        }
        if let Some(mu) = &self.mu {
            cfg.set("map.mu", mu)?;
        }
        if let Some(k) = self.power {
            cfg.set("map.power", &k.to_string())?;
        }
        let params = [
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("d", self.d),
            ("A", self.big_a),
            ("B", self.big_b),
            ("C", self.big_c),
        ];
        for (k, v) in params {
            if let Some(v) = v {
                cfg.params.insert(k.to_string(), v);
            }
        }
        if let Some(s) = &self.seed {
            cfg.set("run.seed", s)?;
        }
        if let Some(s) = self.rng_seed {
            cfg.rng_seed = s;
        }
        if self.sequential {
            cfg.parallel = false;
        }
        for kv in &self.sets {
            let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError {
                line: None,
                key: kv.clone(),
                message: "expected `section.key=value`".into(),
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }
}

/// Runs the command line `args` (program name first), writing reports to
/// `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Verify {
            common,
            samples,
            measure_samples,
        } => common.load().and_then(|mut cfg| {
            set_opt(&mut cfg, "run.samples", samples)?;
            set_opt(&mut cfg, "run.measure_samples", measure_samples)?;
            Ok(cmd_verify(&cfg, out, err))
        }),
        Command::Rotnum { common, birkhoff } => common.load().and_then(|mut cfg| {
            set_opt(&mut cfg, "rotation.birkhoff_iterations", birkhoff)?;
            Ok(cmd_rotnum(&cfg, out, err))
        }),
        Command::Sweep {
            common,
            count,
            ray,
            out: path,
        } => common.load().and_then(|mut cfg| {
            set_opt(&mut cfg, "sweep.count", count)?;
            set_opt(&mut cfg, "sweep.ray", ray)?;
            if path.is_some() {
                cfg.csv = path;
            }
            Ok(cmd_sweep(&cfg, out, err))
        }),
        Command::Portrait {
            common,
            seeds,
            markers,
            axes,
            ray,
            out: path,
        } => common.load().and_then(|mut cfg| {
            set_opt(&mut cfg, "portrait.seeds", seeds)?;
            set_opt(&mut cfg, "portrait.markers", markers)?;
            set_opt(&mut cfg, "portrait.axes", axes)?;
            set_opt(&mut cfg, "sweep.ray", ray)?;
            if path.is_some() {
                cfg.svg = path;
            }
            Ok(cmd_portrait(&cfg, out, err))
        }),
    };
    match result {
        Ok(Ok(code)) => code,
        Ok(Err(CmdError::Config(e))) | Err(e) => {
            let _ = writeln!(err, "config error: {e}");
            EXIT_CONFIG
        }
        Ok(Err(CmdError::Io(e))) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_CHECK_FAILED
        }
    }
}

fn set_opt<T: ToString>(cfg: &mut RunConfig, key: &str, v: Option<T>) -> Result<(), ConfigError> {
    match v {
        Some(v) => cfg.set(key, &v.to_string()),
        None => Ok(()),
    }
}

#[derive(Debug, thiserror::Error)]
enum CmdError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type CmdResult = Result<i32, CmdError>;

/// Exit code for a failed rotation number.
pub fn exit_code(e: &RotationError) -> i32 {
    match e {
        RotationError::NotInvariant(_) => EXIT_NOT_INVARIANT,
        RotationError::NotPeriodic(OrbitClass::UnboundedOrOpen) => EXIT_DOMAIN,
        RotationError::NotPeriodic(_) => EXIT_NOT_CLOSED,
        RotationError::Flow(f) => match f {
            FlowError::DomainExit { .. } | FlowError::Escaped { .. } => EXIT_DOMAIN,
            FlowError::Map(_) => EXIT_DOMAIN,
            FlowError::Config(_) => EXIT_CONFIG,
            _ => EXIT_NOT_CLOSED,
        },
        RotationError::Map(MapError::OutsideDomain(_) | MapError::IterateOutside { .. }) => {
            EXIT_DOMAIN
        }
        _ => EXIT_CHECK_FAILED,
    }
}

fn field_for(
    m: &MapSpec,
    mu: &crate::maps::MultiplierSpec,
) -> Result<VectorFieldSpec, ConfigError> {
    build_field(m, &mu.field).map_err(|e| ConfigError {
        line: None,
        key: "map.mu".into(),
        message: e.to_string(),
    })
}

struct Check {
    name: &'static str,
    worst: f64,
    threshold: f64,
    note: String,
}

impl Check {
    fn passed(&self) -> bool {
        self.worst <= self.threshold
    }
}

fn worst_over<F>(samples: &[Point], f: F) -> (f64, usize)
where
    F: Fn(&[f64]) -> Option<Residual>,
{
    let mut worst = 0.0_f64;
    let mut skipped = 0;
    for p in samples {
        match f(p) {
            Some(r) if r.relative.is_finite() => worst = worst.max(r.relative),
            Some(_) => worst = f64::INFINITY,
            None => skipped += 1,
        }
    }
    (worst, skipped)
}

fn cmd_verify(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let (m, mu) = cfg.resolve()?;
    let x = field_for(&m, &mu)?;
    let thr = cfg.residual_threshold;
    let samples = m.sample_points(cfg.samples, cfg.rng_seed);
    writeln!(
        out,
        "verify {} with mu = {} on {} points (rng seed {})",
        m.label(),
        mu.field.name(),
        samples.len(),
        cfg.rng_seed
    )?;
    let mut checks = Vec::new();

    let (w_mu, _) = worst_over(&samples, |p| {
        fields::check_condition_mu(&m, &mu.field, p).ok()
    });
    let (w_x, _) = worst_over(&samples, |p| fields::check_condition_x(&m, &x, p).ok());
    let disagree = samples
        .iter()
        .filter(|p| {
            let a = fields::check_condition_mu(&m, &mu.field, p).map(|r| r.passes(thr));
            let b = fields::check_condition_x(&m, &x, p).map(|r| r.passes(thr));
            a.ok() != b.ok()
        })
        .count();
    checks.push(Check {
        name: "condition_mu",
        worst: w_mu,
        threshold: thr,
        note: String::new(),
    });
    checks.push(Check {
        name: "condition_X",
        worst: w_x,
        threshold: thr,
        note: String::new(),
    });
    checks.push(Check {
        name: "mu_X_agreement",
        worst: disagree as f64 / samples.len().max(1) as f64,
        threshold: 0.0,
        note: format!("{disagree} points disagree"),
    });
    let (w_orth, _) = worst_over(&samples, |p| Some(fields::orthogonality_residual(&x, p)));
    checks.push(Check {
        name: "orthogonality",
        worst: w_orth,
        threshold: thr,
        note: String::new(),
    });
    let (w_jac, _) = worst_over(&samples, |p| {
        let num = vecgeo::numeric_jacobian(|q| m.try_forward(q).ok(), p, 1e-6).ok()?;
        let exact = m.jacobian(p);
        Some(Residual::new(exact.sub(&num).max_abs(), exact.max_abs()))
    });
    checks.push(Check {
        name: "jacobian_fd",
        worst: w_jac,
        threshold: 1e-5,
        note: String::new(),
    });
    let (w_inv, _) = worst_over(&samples, |p| {
        let q = m.try_forward(p).ok()?;
        Some(Residual::new(
            vecgeo::dist(&m.inverse(&q), p),
            vecgeo::norm(p),
        ))
    });
    checks.push(Check {
        name: "round_trip",
        worst: w_inv,
        threshold: thr,
        note: String::new(),
    });
    let (w_v, _) = worst_over(&samples, |p| {
        let q = m.try_forward(p).ok()?;
        m.integrals()
            .iter()
            .map(|v| Residual::new((v.eval(&q) - v.eval(p)).abs(), v.eval(p).abs()))
            .reduce(Residual::worst)
    });
    checks.push(Check {
        name: "integrals",
        worst: w_v,
        threshold: thr,
        note: String::new(),
    });
    if let (Some((lo, hi)), true) = (m.measure_box(), cfg.measure_samples > 0) {
        let est = fields::check_invariant_measure_with(
            &m,
            &mu.field,
            (lo, hi),
            cfg.measure_samples,
            cfg.rng_seed,
            cfg.exec(),
        );
        checks.push(match est {
            Ok(e) => Check {
                name: "measure",
                worst: e.sigmas(),
                threshold: 3.0,
                note: format!(
                    "box {:.6e}, preimage {:.6e}; max is the gap in standard errors",
                    e.box_measure, e.preimage_measure
                ),
            },
            Err(e) => Check {
                name: "measure",
                worst: f64::INFINITY,
                threshold: 3.0,
                note: e.to_string(),
            },
        });
    }

    let mut all = true;
    for c in &checks {
        all &= c.passed();
        writeln!(
            out,
            "{:<16} max {:<10.3e} limit {:<8.0e} {}{}",
            c.name,
            c.worst,
            c.threshold,
            if c.passed() { "PASS" } else { "FAIL" },
            if c.note.is_empty() {
                String::new()
            } else {
                format!("  ({})", c.note)
            }
        )?;
    }
    if w_mu > thr {
        let cls = fields::classify_multiplier(&m, &mu.field, 200);
        if cls.class == SigmaClass::Minus {
            writeln!(
                err,
                "hint: {} changes sign under {} (anti-invariant); try --power {}",
                mu.field.name(),
                m.label(),
                2 * m.power()
            )?;
        }
    }
    writeln!(out, "{}", if all { "PASS" } else { "FAIL" })?;
    Ok(if all { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn cmd_rotnum(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let (m, mu) = cfg.resolve()?;
    let x = field_for(&m, &mu)?;
    let seed = match &cfg.seed {
        Some(s) => s.clone(),
        None => m
            .default_ray()
            .map(|r| r.0.clone())
            .ok_or_else(|| ConfigError {
                line: None,
                key: "run.seed".into(),
                message: "no seed given and the map has no default".into(),
            })?,
    };
    let (row, failure) = rotation::rotation_row(&x, &m, &seed, &cfg.rotation());
    write!(out, "{}", csv_table(m.dim(), std::slice::from_ref(&row)))?;
    if let Some(e) = failure {
        writeln!(err, "{}: {e}", m.label())?;
        return Ok(exit_code(&e));
    }
    if cfg.birkhoff_iterations > 0 {
        let k = row.multiplicity.unwrap_or(1) as u32;
        match rotation::rotation_number_birkhoff(
            &m.power_of(k),
            &seed,
            None,
            cfg.birkhoff_iterations,
        ) {
            Ok(b) => writeln!(
                err,
                "orbit average over {} iterates: rho = {b:.9} (flow {:.9}, difference {:.2e})",
                cfg.birkhoff_iterations,
                row.rho,
                (b - row.rho).abs()
            )?,
            Err(e) => writeln!(err, "orbit average unavailable: {e}")?,
        }
    }
    Ok(if row.is_ok() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}

fn summary(m: &MapSpec, rows: &[SweepRow], out: &mut dyn Write) -> std::io::Result<i32> {
    let valid = rows.iter().filter(|r| r.is_ok()).count();
    let rep = match rotation::monotonicity_report(rows, Some(m)) {
        Ok(r) => r,
        Err(e) => {
            writeln!(out, "verdict: unavailable ({e})")?;
            return Ok(EXIT_CHECK_FAILED);
        }
    };
    let viol: Vec<String> = rep
        .violations
        .iter()
        .map(|(i, j)| format!("({i},{j})"))
        .collect();
    writeln!(
        out,
        "verdict: {}{} ({valid}/{} rows valid, violations: {})",
        rep.verdict.as_str(),
        if rep.constant { ", constant" } else { "" },
        rows.len(),
        if viol.is_empty() {
            "none".to_string()
        } else {
            viol.join(" ")
        }
    )?;
    if rep.constant {
        writeln!(out, "constant rho = {:.9}", rep.rows[0].rho)?;
    }
    for lim in &rep.endpoint_limits {
        let coords: Vec<String> = lim.fixed_point.iter().map(|c| format!("{c:.6}")).collect();
        writeln!(
            out,
            "endpoint limit at ({}): extrapolated {:.6}, linearization {:.6}, difference {:.1e} {}",
            coords.join(", "),
            lim.extrapolated,
            lim.linearized,
            lim.error(),
            if lim.agrees() { "OK" } else { "MISMATCH" }
        )?;
    }
    Ok(EXIT_OK)
}

fn cmd_sweep(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let (m, mu) = cfg.resolve()?;
    let ray = match (&cfg.ray, m.default_ray()) {
        (Some(r), _) | (None, Some(r)) => r.clone(),
        (None, None) => {
            return Err(ConfigError {
                line: None,
                key: "sweep.ray".into(),
                message: "no ray given and the map has no default".into(),
            }
            .into())
        }
    };
    if cfg.count == 0 {
        return Err(ConfigError {
            line: None,
            key: "sweep.count".into(),
            message: "must be positive".into(),
        }
        .into());
    }
    let rows = match rotation::sweep(&m, &mu.field, &ray, cfg.count, &cfg.rotation()) {
        Ok(r) => r,
        Err(e) => {
            writeln!(err, "{e}")?;
            return Ok(EXIT_CHECK_FAILED);
        }
    };
    let table = csv_table(m.dim(), &rows);
    match &cfg.csv {
        Some(path) => {
            write_atomic(path, &table)?;
            writeln!(out, "wrote {} rows to {}", rows.len(), path.display())?;
            Ok(summary(&m, &rows, out)?)
        }
        None => {
            write!(out, "{table}")?;
            Ok(summary(&m, &rows, err)?)
        }
    }
}

fn cmd_portrait(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let (m, mu) = cfg.resolve()?;
    let x = field_for(&m, &mu)?;
    let ray = cfg
        .ray
        .clone()
        .or_else(|| m.portrait_ray().cloned())
        .ok_or_else(|| ConfigError {
            line: None,
            key: "sweep.ray".into(),
            message: "no ray given and the map has no default".into(),
        })?;
    let (i, j) = cfg.axes;
    let proj = |p: &[f64]| [p[i], p[j]];
    let seeds = rotation::ray_seeds(&ray, cfg.portrait_seeds);
    let traced = cfg
        .exec()
        .map(&seeds, |p| -> Result<(Curve, Curve), String> {
            m.check(p).map_err(|e| e.to_string())?;
            let orbit = flow::trace_orbit(&x, p, &cfg.integrator).map_err(|e| e.to_string())?;
            let (lo, hi, n) = match orbit.classification() {
                OrbitClass::Periodic => (0.0, orbit.period().unwrap(), 400),
                OrbitClass::UnboundedOrOpen => {
                    let (lo, hi) = orbit.time_range();
                    (lo, hi, 2000)
                }
                other => return Err(other.as_str().to_string()),
            };
            let curve = (0..=n)
                .filter_map(|k| orbit.point_at(lo + (hi - lo) * k as f64 / n as f64))
                .map(|q| proj(&q))
                .collect();
            let mut markers = Vec::with_capacity(cfg.markers);
            let mut q = p.to_vec();
            for _ in 0..cfg.markers {
                markers.push(proj(&q));
                match m.try_forward(&q) {
                    Ok(next) => q = next,
                    Err(_) => break,
                }
            }
            Ok((curve, markers))
        });
    let mut portrait = Portrait {
        title: format!(
            "{}{} mu = {}, coordinates ({}, {})",
            m.label(),
            params_label(&m),
            mu.field.name(),
            i + 1,
            j + 1
        ),
        view: m.view(),
        fixed_points: m.known_fixed_points().iter().map(|p| proj(p)).collect(),
        ..Default::default()
    };
    for (p, t) in seeds.into_iter().zip(traced) {
        match t {
            Ok((c, mk)) => {
                portrait.curves.push(c);
                portrait.markers.push(mk);
            }
            Err(why) => portrait.skipped.push((p, why)),
        }
    }
    let svg = portrait.to_svg();
    match &cfg.svg {
        Some(path) => {
            write_atomic(path, &svg)?;
            writeln!(
                out,
                "wrote {} orbits to {} ({} seeds skipped)",
                portrait.curves.len(),
                path.display(),
                portrait.skipped.len()
            )?;
        }
        None => write!(out, "{svg}")?,
    }
    for (p, why) in &portrait.skipped {
        writeln!(err, "skipped seed {p:?}: {why}")?;
    }
    Ok(EXIT_OK)
}

/// Projected points: a traced orbit or a run of map iterates.
type Curve = Vec<[f64; 2]>;

fn params_label(m: &MapSpec) -> String {
    if m.params().is_empty() {
        return String::new();
    }
    let kv: Vec<String> = m.params().iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("({})", kv.join(", "))
}
