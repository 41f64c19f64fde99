//! Integration of `x' = X_mu(x)`: periods by first return to a transversal
//! section, flight times to the image `F(p)`, and how many iterates it
//! takes `F` to come back to the starting orbit.

mod dopri;

use thiserror::Error;

use crate::fields::VectorFieldSpec;
use crate::maps::{MapError, MapSpec};
use crate::vecgeo::{self, Point};

pub use dopri::DenseStep;
use dopri::{solve, StepControl, Stop};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("trajectory left the domain at t = {t} near {point:?}")]
    DomainExit { t: f64, point: Point },
    #[error("trajectory escaped to infinity at t = {t}")]
    Escaped { t: f64 },
    #[error("step limit reached at t = {t}")]
    StepLimit { t: f64 },
    #[error("seed {point:?} is too close to an equilibrium (|X| = {norm:e})")]
    NearCritical { point: Point, norm: f64 },
    #[error("seed {0:?} is an equilibrium but not a fixed point of the map")]
    CriticalNotFixed(Point),
    #[error("{returns} section returns without closing")]
    TooManyReturns { returns: usize },
    #[error("invalid integrator setting: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Tolerances and limits for all flow computations.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Longest time span ever integrated.
    pub horizon: f64,
    /// Section crossings tolerated before giving up on closure.
    pub max_returns: usize,
    /// A return closes the orbit when it lands within
    /// `closure_factor * (1 + |p|)` of the seed.
    pub closure_factor: f64,
    /// Orbits reaching this norm count as unbounded.
    pub escape_radius: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-12,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            horizon: 1e4,
            max_returns: 1000,
            closure_factor: 1e-7,
            escape_radius: 1e8,
            max_steps: 200_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        let positive = |v: f64| v > 0.0 && !v.is_nan();
        if !positive(self.rel_tol) || !positive(self.abs_tol) {
            return Err(FlowError::Config("tolerances must be positive"));
        }
        if !positive(self.horizon) || !self.horizon.is_finite() {
            return Err(FlowError::Config("horizon must be positive and finite"));
        }
        if !positive(self.max_step) {
            return Err(FlowError::Config("max_step must be positive"));
        }
        if !positive(self.closure_factor) || !positive(self.escape_radius) {
            return Err(FlowError::Config(
                "closure factor and escape radius must be positive",
            ));
        }
        if self.max_steps == 0 {
            return Err(FlowError::Config("max_steps must be positive"));
        }
        Ok(())
    }

    pub fn closure_tol(&self, p: &[f64]) -> f64 {
        self.closure_factor * (1.0 + vecgeo::norm(p))
    }

    fn control(&self) -> StepControl {
        StepControl {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitClass {
    CriticalPoint,
    Periodic,
    UnboundedOrOpen,
    NotClosedWithinHorizon,
}

impl OrbitClass {
    pub fn as_str(self) -> &'static str {
        match self {
            OrbitClass::CriticalPoint => "critical_point",
            OrbitClass::Periodic => "periodic",
            OrbitClass::UnboundedOrOpen => "unbounded_or_open",
            OrbitClass::NotClosedWithinHorizon => "not_closed_within_horizon",
        }
    }
}

/// What is known about the flow orbit through one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitResult {
    pub seed: Point,
    pub period: Option<f64>,
    pub tau: Option<f64>,
    pub multiplicity: Option<usize>,
    pub closure_residual: f64,
    pub classification: OrbitClass,
}

/// Flight time from `p` to `F(p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightTime {
    pub tau: f64,
    /// Set at fixed points, where `tau = 0` by convention.
    pub degenerate: bool,
}

/// Right-hand side restricted to the domain component containing `seed`.
fn rhs<'a>(x: &'a VectorFieldSpec, seed: &[f64]) -> impl Fn(&[f64]) -> Option<Vec<f64>> + 'a {
    let chart = x.map().chart(seed);
    move |q: &[f64]| {
        if !x.map().in_domain(q) || x.map().chart(q) != chart {
            return None;
        }
        let v = x.eval(q);
        v.iter().all(|c| c.is_finite()).then_some(v)
    }
}

/// `phi(t, p)`.
pub fn integrate(
    x: &VectorFieldSpec,
    p: &[f64],
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<Point, FlowError> {
    cfg.validate()?;
    x.map().check(p)?;
    if t == 0.0 || vecgeo::norm(&x.eval(p)) == 0.0 {
        return Ok(p.to_vec());
    }
    if t.abs() > cfg.horizon {
        return Err(FlowError::Config("|t| exceeds the horizon"));
    }
    let f = rhs(x, p);
    let mut escaped = None;
    let (stop, tf, y) = solve(&f, p, t, &cfg.control(), |s| {
        if vecgeo::norm(&s.end()) > cfg.escape_radius {
            escaped = Some(s.t1());
            true
        } else {
            false
        }
    });
    match stop {
        Stop::Reached => Ok(y),
        Stop::Observer => Err(FlowError::Escaped {
            t: escaped.unwrap_or(tf),
        }),
        Stop::StepUnderflow => Err(FlowError::DomainExit { t: tf, point: y }),
        Stop::StepLimit => Err(FlowError::StepLimit { t: tf }),
    }
}

/// Points `phi(t_k, p)` at `count` equally spaced times in `[0, t_end]`,
/// plus how the trajectory ended if it stopped early.
#[derive(Debug, Clone)]
pub struct Path {
    pub times: Vec<f64>,
    pub points: Vec<Point>,
    pub early_stop: Option<FlowError>,
}

pub fn sample_path(
    x: &VectorFieldSpec,
    p: &[f64],
    t_end: f64,
    count: usize,
    cfg: &IntegratorConfig,
) -> Result<Path, FlowError> {
    cfg.validate()?;
    x.map().check(p)?;
    let count = count.max(2);
    let grid: Vec<f64> = (0..count)
        .map(|k| t_end * k as f64 / (count - 1) as f64)
        .collect();
    let mut path = Path {
        times: vec![0.0],
        points: vec![p.to_vec()],
        early_stop: None,
    };
    if vecgeo::norm(&x.eval(p)) == 0.0 || t_end == 0.0 {
        return Ok(path);
    }
    let f = rhs(x, p);
    let mut next = 1;
    let mut escaped = None;
    let (stop, tf, y) = solve(&f, p, t_end, &cfg.control(), |s| {
        while next < count && s.covers(grid[next]) {
            path.times.push(grid[next]);
            path.points.push(s.at(grid[next]));
            next += 1;
        }
        if vecgeo::norm(&s.end()) > cfg.escape_radius {
            escaped = Some(s.t1());
            return true;
        }
        false
    });
    path.early_stop = match stop {
        Stop::Reached => {
            if next < count {
                path.times.push(t_end);
                path.points.push(y);
            }
            None
        }
        Stop::Observer => Some(FlowError::Escaped {
            t: escaped.unwrap_or(tf),
        }),
        Stop::StepUnderflow => Some(FlowError::DomainExit { t: tf, point: y }),
        Stop::StepLimit => Some(FlowError::StepLimit { t: tf }),
    };
    Ok(path)
}

/// Root of `g(t) = (y(t) - c) . w` inside one step, given a sign change
/// between `ta` and `tb`: bisection to a coarse bracket, then Newton using
/// the field itself as `dy/dt`.
fn refine_crossing(step: &DenseStep, x: &VectorFieldSpec, c: &[f64], w: &[f64]) -> f64 {
    let g = |t: f64| vecgeo::dot(&vecgeo::sub(&step.at(t), c), w);
    let (mut a, mut b) = (step.t0, step.t1());
    let mut ga = g(a);
    let coarse = 1e-6 * step.h.abs();
    while (b - a).abs() > coarse {
        let m = 0.5 * (a + b);
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let mut t = 0.5 * (a + b);
    for _ in 0..8 {
        let y = step.at(t);
        let d = vecgeo::dot(&x.eval(&y), w);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let dt = vecgeo::dot(&vecgeo::sub(&y, c), w) / d;
        let next = (t - dt).clamp(lo, hi);
        let done = (next - t).abs() <= 1e-13 * t.abs().max(1.0);
        t = next;
        if done {
            break;
        }
    }
    t
}

/// How one direction of a traced trajectory ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceEnd {
    /// Returned to the seed; the trace covers a little more than a period.
    Closed,
    Horizon,
    Escaped(f64),
    /// Reached the edge of the domain component at this time.
    DomainExit(f64),
    StepLimit(f64),
}

/// A trajectory kept as dense-output steps so that several targets can be
/// searched for without integrating again.
#[derive(Debug, Clone)]
pub struct Orbit {
    seed: Point,
    class: OrbitClass,
    period: Option<f64>,
    residual: f64,
    ends: (TraceEnd, TraceEnd),
    forward: Vec<DenseStep>,
    backward: Vec<DenseStep>,
}

impl Orbit {
    pub fn seed(&self) -> &[f64] {
        &self.seed
    }

    pub fn classification(&self) -> OrbitClass {
        self.class
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn closure_residual(&self) -> f64 {
        self.residual
    }

    /// How the forward and backward traces ended.
    pub fn ends(&self) -> (TraceEnd, TraceEnd) {
        self.ends
    }

    /// Time span covered by the trace.
    pub fn time_range(&self) -> (f64, f64) {
        let hi = self.forward.last().map_or(0.0, |s| s.t1());
        let lo = self.backward.last().map_or(0.0, |s| s.t1());
        (lo, hi)
    }

    /// `phi(t, seed)` for any `t` covered by the trace; on closed orbits
    /// `t` is first reduced modulo the period.
    pub fn point_at(&self, t: f64) -> Option<Point> {
        if self.class == OrbitClass::CriticalPoint {
            return Some(self.seed.clone());
        }
        let t = self.period.map_or(t, |per| t.rem_euclid(per));
        let i;
        let steps = if t >= 0.0 {
            i = self.forward.partition_point(|s| s.t1() < t);
            &self.forward
        } else {
            i = self.backward.partition_point(|s| s.t1() > t);
            &self.backward
        };
        steps.get(i).filter(|s| s.covers(t)).map(|s| s.at(t))
    }

    /// Time at which the trajectory passes within `tol` of `q`, located on
    /// the section through `q` normal to `X(q)`. Closed orbits report a
    /// time in `[0, T)`; open ones the candidate closest to `t = 0`.
    pub fn locate(&self, x: &VectorFieldSpec, q: &[f64], tol: f64) -> Option<f64> {
        if self.class == OrbitClass::CriticalPoint {
            return (vecgeo::dist(q, &self.seed) <= tol).then_some(0.0);
        }
        let w = x.eval(q);
        if vecgeo::norm(&w) == 0.0 || !w.iter().all(|c| c.is_finite()) {
            return None;
        }
        let mut best: Option<f64> = None;
        for step in self.forward.iter().chain(&self.backward) {
            let g0 = vecgeo::dot(&vecgeo::sub(step.start(), q), &w);
            let g1 = vecgeo::dot(&vecgeo::sub(&step.end(), q), &w);
            if (g0 < 0.0) == (g1 < 0.0) && g0 != 0.0 {
                continue;
            }
            let t = refine_crossing(step, x, q, &w);
            if vecgeo::dist(&step.at(t), q) > tol {
                continue;
            }
            let t = match self.period {
                Some(per) => {
                    let r = t.rem_euclid(per);
                    if per - r < 1e-12 * per {
                        0.0
                    } else {
                        r
                    }
                }
                None => t,
            };
            if best.is_none_or(|b| t.abs() < b.abs()) {
                best = Some(t);
            }
            if self.period.is_some() {
                break;
            }
        }
        best
    }
}

fn trace_one_way<F>(
    f: &F,
    p: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
    steps: &mut Vec<DenseStep>,
) -> TraceEnd
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let mut escaped = None;
    let (stop, tf, _) = solve(f, p, t_end, &cfg.control(), |s| {
        steps.push(s.clone());
        if vecgeo::norm(&s.end()) > cfg.escape_radius {
            escaped = Some(s.t1());
            return true;
        }
        false
    });
    match stop {
        Stop::Reached => TraceEnd::Horizon,
        Stop::Observer => TraceEnd::Escaped(escaped.unwrap_or(tf)),
        Stop::StepUnderflow => TraceEnd::DomainExit(tf),
        Stop::StepLimit => TraceEnd::StepLimit(tf),
    }
}

/// Traces the orbit through `p` until it closes (then on to about `1.05 T`
/// so every point of the loop is covered by a step), escapes, reaches the
/// edge of the domain, or hits the horizon. Orbits that do not close are
/// traced backwards as well.
pub fn trace_orbit(
    x: &VectorFieldSpec,
    p: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Orbit, FlowError> {
    cfg.validate()?;
    x.map().check(p)?;
    let v = x.eval(p);
    let speed = vecgeo::norm(&v);
    let mut orbit = Orbit {
        seed: p.to_vec(),
        class: OrbitClass::CriticalPoint,
        period: None,
        residual: 0.0,
        ends: (TraceEnd::Closed, TraceEnd::Closed),
        forward: Vec::new(),
        backward: Vec::new(),
    };
    if speed <= cfg.abs_tol {
        return Ok(orbit);
    }
    if speed < 1e3 * cfg.abs_tol {
        return Err(FlowError::NearCritical {
            point: p.to_vec(),
            norm: speed,
        });
    }
    let tol = cfg.closure_tol(p);
    let f = rhs(x, p);
    let mut returns = 0usize;
    let mut closed: Option<(f64, f64)> = None;
    let mut escaped = None;
    let mut too_many = false;
    let (stop, tf, _) = solve(&f, p, cfg.horizon, &cfg.control(), |s| {
        orbit.forward.push(s.clone());
        if let Some((per, _)) = closed {
            return s.t1() >= 1.05 * per;
        }
        let y1 = s.end();
        if vecgeo::norm(&y1) > cfg.escape_radius {
            escaped = Some(s.t1());
            return true;
        }
        let g0 = vecgeo::dot(&vecgeo::sub(s.start(), p), &v);
        let g1 = vecgeo::dot(&vecgeo::sub(&y1, p), &v);
        if g0 < 0.0 && g1 >= 0.0 {
            let t = refine_crossing(s, x, p, &v);
            let res = vecgeo::dist(&s.at(t), p);
            if res <= tol {
                closed = Some((t, res));
                return s.t1() >= 1.05 * t;
            }
            returns += 1;
            if returns > cfg.max_returns {
                too_many = true;
                return true;
            }
        }
        false
    });
    if too_many {
        return Err(FlowError::TooManyReturns { returns });
    }
    if let Some((per, res)) = closed {
        orbit.class = OrbitClass::Periodic;
        orbit.period = Some(per);
        orbit.residual = res;
        return Ok(orbit);
    }
    let forward_end = match stop {
        Stop::Reached => TraceEnd::Horizon,
        Stop::Observer => TraceEnd::Escaped(escaped.unwrap_or(tf)),
        Stop::StepUnderflow => TraceEnd::DomainExit(tf),
        Stop::StepLimit => TraceEnd::StepLimit(tf),
    };
    let backward_end = trace_one_way(&f, p, -cfg.horizon, cfg, &mut orbit.backward);
    let open = |e: TraceEnd| matches!(e, TraceEnd::Escaped(_) | TraceEnd::DomainExit(_));
    orbit.class = if open(forward_end) || open(backward_end) {
        OrbitClass::UnboundedOrOpen
    } else {
        OrbitClass::NotClosedWithinHorizon
    };
    orbit.ends = (forward_end, backward_end);
    orbit.residual = f64::NAN;
    Ok(orbit)
}

/// Period of the orbit through `p`, or why there is none.
pub fn detect_period(
    x: &VectorFieldSpec,
    p: &[f64],
    cfg: &IntegratorConfig,
) -> Result<OrbitResult, FlowError> {
    let orbit = trace_orbit(x, p, cfg)?;
    Ok(OrbitResult {
        seed: p.to_vec(),
        period: orbit.period,
        tau: None,
        multiplicity: None,
        closure_residual: if orbit.class == OrbitClass::CriticalPoint {
            0.0
        } else {
            orbit.residual
        },
        classification: orbit.class,
    })
}

fn flight_on(
    orbit: &Orbit,
    x: &VectorFieldSpec,
    target: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Option<FlightTime>, FlowError> {
    let p = orbit.seed();
    let tol = cfg.closure_tol(p);
    if orbit.class == OrbitClass::CriticalPoint {
        return if vecgeo::dist(target, p) <= tol {
            Ok(Some(FlightTime {
                tau: 0.0,
                degenerate: true,
            }))
        } else {
            Err(FlowError::CriticalNotFixed(p.to_vec()))
        };
    }
    Ok(orbit.locate(x, target, tol).map(|t| {
        // signed representative with |tau| <= T/2
        let tau = match orbit.period {
            Some(per) if t > 0.5 * per => t - per,
            _ => t,
        };
        FlightTime {
            tau,
            degenerate: false,
        }
    }))
}

/// `tau` with `phi(tau, p) = F(p)` for the map carried by `x`, if `F(p)`
/// lies on the orbit of `p`. On closed orbits `tau` is reported in
/// `(-T/2, T/2]`.
pub fn time_to_image(
    x: &VectorFieldSpec,
    m: &MapSpec,
    p: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Option<FlightTime>, FlowError> {
    let q = m.try_forward(p)?;
    let orbit = trace_orbit(x, p, cfg)?;
    flight_on(&orbit, x, &q, cfg)
}

/// Smallest `k <= max_k` with `F^k(p)` on the orbit of `p`.
pub fn component_multiplicity(
    x: &VectorFieldSpec,
    m: &MapSpec,
    p: &[f64],
    max_k: usize,
    cfg: &IntegratorConfig,
) -> Result<Option<usize>, FlowError> {
    let orbit = trace_orbit(x, p, cfg)?;
    multiplicity_on(&orbit, x, m, max_k, cfg)
}

/// Number of orbit points, besides the seed, whose images are checked
/// when deciding that `F^k` maps the orbit onto itself.
// Fractions of the traced span; open traces lose invariance near their ends,
// where little flow time covers a long stretch of the curve.
const INVARIANCE_PROBES: [f64; 17] = [
    1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 0.999, 0.9999,
];

fn multiplicity_on(
    orbit: &Orbit,
    x: &VectorFieldSpec,
    m: &MapSpec,
    max_k: usize,
    cfg: &IntegratorConfig,
) -> Result<Option<usize>, FlowError> {
    let p = orbit.seed();
    let tol = cfg.closure_tol(p);
    let mut q = p.to_vec();
    for k in 1..=max_k {
        q = m.try_forward(&q).map_err(|e| match e {
            MapError::IterateOutside { .. } => MapError::IterateOutside {
                point: p.to_vec(),
                step: k,
            },
            other => other,
        })?;
        if orbit.locate(x, &q, tol).is_some() && maps_orbit_onto_itself(orbit, x, m, k, cfg) {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

/// For a diffeomorphism one image on the orbit implies the whole orbit is
/// mapped onto itself, so nothing more is checked. Without that hypothesis
/// it need not be: images of points spread over the whole trace must land
/// on it too.
fn maps_orbit_onto_itself(
    orbit: &Orbit,
    x: &VectorFieldSpec,
    m: &MapSpec,
    k: usize,
    cfg: &IntegratorConfig,
) -> bool {
    if !m.diffeo_counterexample() {
        return true;
    }
    let (lo, hi) = match orbit.period {
        Some(per) => (0.0, per),
        None => orbit.time_range(),
    };
    INVARIANCE_PROBES.iter().all(|&u| {
        let s = lo + (hi - lo) * u;
        let Some(r) = orbit.point_at(s) else {
            return true;
        };
        if !m.in_domain(&r) {
            return true;
        }
        match m.iterate(&r, k) {
            Ok(img) => orbit
                .locate(x, &img, cfg.closure_tol(&img).min(cfg.closure_tol(&r)))
                .is_some(),
            Err(_) => false,
        }
    })
}

/// Period, multiplicity and the flight time of `F^m` in one pass.
pub fn analyze_orbit(
    x: &VectorFieldSpec,
    m: &MapSpec,
    p: &[f64],
    max_k: usize,
    cfg: &IntegratorConfig,
) -> Result<(Orbit, OrbitResult), FlowError> {
    let orbit = trace_orbit(x, p, cfg)?;
    let mut res = OrbitResult {
        seed: p.to_vec(),
        period: orbit.period,
        tau: None,
        multiplicity: None,
        closure_residual: orbit.residual,
        classification: orbit.class,
    };
    if orbit.class == OrbitClass::CriticalPoint {
        res.closure_residual = 0.0;
        return Ok((orbit, res));
    }
    res.multiplicity = multiplicity_on(&orbit, x, m, max_k, cfg)?;
    if let Some(k) = res.multiplicity {
        let q = m.iterate(p, k)?;
        res.tau = flight_on(&orbit, x, &q, cfg)?.map(|f| f.tau);
    }
    Ok((orbit, res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::build_field;
    use crate::maps::{builtin, Params};

    fn setup(name: &str, pairs: &[(&str, f64)], mu: &str) -> (MapSpec, VectorFieldSpec) {
        let p: Params = pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let m = builtin(name, &p).unwrap();
        let x = build_field(&m, &m.multiplier(mu).unwrap().field).unwrap();
        (m, x)
    }

    #[test]
    fn zero_time_is_identity() {
        let (_, x) = setup("lyness", &[("a", 1.0)], "xy");
        let cfg = IntegratorConfig::default();
        assert_eq!(
            integrate(&x, &[1.0, 1.0], 0.0, &cfg).unwrap(),
            vec![1.0, 1.0]
        );
    }

    #[test]
    fn semigroup_and_conservation() {
        let (m, x) = setup("lyness", &[("a", 1.0)], "xy");
        let cfg = IntegratorConfig::default();
        let p = [1.0, 1.0];
        let a = integrate(&x, &p, 0.7, &cfg).unwrap();
        let b = integrate(&x, &a, 0.5, &cfg).unwrap();
        let c = integrate(&x, &p, 1.2, &cfg).unwrap();
        assert!(vecgeo::dist(&b, &c) < 1e-8);
        let q = integrate(&x, &p, 1.0, &cfg).unwrap();
        let v = m.integral_values(&q).unwrap()[0];
        assert!((v - 12.0).abs() <= 1e-8 * 12.0);
    }

    #[test]
    fn lyness_orbit_is_periodic() {
        let (_, x) = setup("lyness", &[("a", 1.0)], "xy");
        let cfg = IntegratorConfig::default();
        let r = detect_period(&x, &[1.0, 1.0], &cfg).unwrap();
        assert_eq!(r.classification, OrbitClass::Periodic);
        assert!(r.period.unwrap() > 0.0);
        assert!(r.closure_residual <= 1e-9, "{r:?}");
    }

    #[test]
    fn fixed_point_is_critical() {
        let (m, x) = setup("lyness", &[("a", 1.0)], "xy");
        let cfg = IntegratorConfig::default();
        let fp = m.known_fixed_points()[0].clone();
        let r = detect_period(&x, &fp, &cfg).unwrap();
        assert_eq!(r.classification, OrbitClass::CriticalPoint);
        let tau = time_to_image(&x, &m, &fp, &cfg).unwrap().unwrap();
        assert_eq!(tau.tau, 0.0);
        assert!(tau.degenerate);
    }

    #[test]
    fn lyness_flight_time_is_a_fifth_of_the_period() {
        let (m, x) = setup("lyness", &[("a", 1.0)], "xy");
        let cfg = IntegratorConfig::default();
        for p in [[1.0, 1.0], [3.0, 0.5], [0.2, 7.0]] {
            let per = detect_period(&x, &p, &cfg).unwrap().period.unwrap();
            let tau = time_to_image(&x, &m, &p, &cfg).unwrap().unwrap().tau;
            assert!(((tau / per).abs() - 0.2).abs() < 1e-6, "{tau} / {per}");
            assert_eq!(
                component_multiplicity(&x, &m, &p, 4, &cfg).unwrap(),
                Some(1)
            );
        }
    }

    #[test]
    fn todd_needs_the_square() {
        let (m, x) = setup("todd", &[("a", 1.0)], "xyz");
        let cfg = IntegratorConfig::default();
        let p = [1.0, 2.0, 3.0];
        assert_eq!(time_to_image(&x, &m, &p, &cfg).unwrap(), None);
        let m2 = m.power_of(2);
        assert!(time_to_image(&x, &m2, &p, &cfg).unwrap().is_some());
        assert_eq!(
            component_multiplicity(&x, &m, &p, 4, &cfg).unwrap(),
            Some(2)
        );
    }

    #[test]
    fn tilde_orbits_do_not_close() {
        let (m, x) = setup("tilde_lyness", &[("a", 3.0)], "zz1");
        let cfg = IntegratorConfig::default();
        let p = [0.7, 1.3];
        let r = detect_period(&x, &p, &cfg).unwrap();
        assert_ne!(r.classification, OrbitClass::Periodic, "{r:?}");
        assert_eq!(component_multiplicity(&x, &m, &p, 4, &cfg).unwrap(), None);
    }

    #[test]
    fn rejects_bad_config_and_seeds() {
        let (_, x) = setup("lyness", &[("a", 1.0)], "xy");
        let cfg = IntegratorConfig {
            rel_tol: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            integrate(&x, &[1.0, 1.0], 1.0, &cfg),
            Err(FlowError::Config(_))
        ));
        let cfg = IntegratorConfig::default();
        assert!(matches!(
            integrate(&x, &[-1.0, 1.0], 1.0, &cfg),
            Err(FlowError::Map(MapError::OutsideDomain(_)))
        ));
    }

    #[test]
    fn point_at_wraps_the_period() {
        let (_, x) = setup("lyness", &[("a", 2.0)], "xy");
        let cfg = IntegratorConfig::default();
        let orbit = trace_orbit(&x, &[1.0, 1.0], &cfg).unwrap();
        let per = orbit.period().unwrap();
        let a = orbit.point_at(0.3 * per).unwrap();
        let b = orbit.point_at(1.3 * per).unwrap();
        assert!(vecgeo::dist(&a, &b) < 1e-9);
        let c = integrate(&x, &[1.0, 1.0], 0.3 * per, &cfg).unwrap();
        assert!(vecgeo::dist(&a, &c) < 1e-9);
    }
}
