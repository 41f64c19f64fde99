//! Rotation numbers of maps restricted to their invariant curves.
//!
//! Two independent estimates: from the flow (`|tau| / T`, with `tau` the
//! flight time to the image) and from the discrete orbit (weighted average
//! of angle increments about a center). Both are folded into `(0, 1/2]`, so
//! neither depends on the orientation of the curve or on the sign of the
//! multiplier.

use std::cmp::Ordering;

use thiserror::Error;

use crate::fields::{self, build_field, FieldError, VectorFieldSpec};
use crate::flow::{self, FlowError, IntegratorConfig, Orbit, OrbitClass};
use crate::maps::{MapError, MapSpec, ScalarField};
use crate::par::Exec;
use crate::vecgeo::{self, Mat, Point};

/// Largest iterate tried when looking for the multiplicity.
pub const DEFAULT_MAX_MULTIPLICITY: usize = 4;
/// Two rotation numbers closer than this count as equal.
pub const TIE_TOLERANCE: f64 = 1e-9;
/// Spread below which a sweep is reported as constant; the flow estimate
/// itself is only good to about this.
pub const CONSTANT_TOLERANCE: f64 = 1e-6;
/// Agreement required between an extrapolated endpoint and the rotation of
/// the linearization at the fixed point.
pub const ENDPOINT_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RotationError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("orbit is not periodic ({})", .0.as_str())]
    NotPeriodic(OrbitClass),
    #[error("not invariant at any multiplicity m <= {0}")]
    NotInvariant(usize),
    #[error("orbit is not star-shaped about the center (iteration {0})")]
    NotStarShaped(usize),
    #[error("need at least {need} iterations, got {got}")]
    TooFewIterations { need: usize, got: usize },
    #[error("map is {0}-dimensional; a planar map is required")]
    NotPlanar(usize),
    #[error("{point:?} is not fixed (|F(p) - p| = {residual:e})")]
    NotFixed { point: Point, residual: f64 },
    #[error("jacobian determinant at the fixed point is {0}, not 1")]
    NotConservative(f64),
    #[error("fixed point is hyperbolic (half trace {0})")]
    Hyperbolic(f64),
    #[error("need at least 3 valid rows, got {0}")]
    TooFewRows(usize),
}

/// Knobs shared by single-seed rotation numbers and sweeps.
#[derive(Debug, Clone)]
pub struct RotationConfig {
    pub integrator: IntegratorConfig,
    pub max_multiplicity: usize,
    /// Rows whose residuals exceed this are flagged.
    pub residual_threshold: f64,
    pub exec: Exec,
}

impl Default for RotationConfig {
    fn default() -> Self {
        RotationConfig {
            integrator: IntegratorConfig::default(),
            max_multiplicity: DEFAULT_MAX_MULTIPLICITY,
            residual_threshold: 1e-8,
            exec: Exec::default(),
        }
    }
}

/// Flow-based rotation number of `F^m` on the orbit of one seed.
#[derive(Debug, Clone)]
pub struct FlowRotation {
    pub rho: f64,
    pub period: f64,
    pub tau: f64,
    pub multiplicity: usize,
    pub orbit: Orbit,
}

/// `|tau| / T` for `F^m`, `m` the smallest iterate mapping the orbit of `p`
/// onto itself.
pub fn rotation_number_flow(
    x: &VectorFieldSpec,
    m: &MapSpec,
    p: &[f64],
    max_k: usize,
    cfg: &IntegratorConfig,
) -> Result<FlowRotation, RotationError> {
    let (orbit, res) = flow::analyze_orbit(x, m, p, max_k, cfg)?;
    if res.classification == OrbitClass::CriticalPoint {
        return Err(RotationError::NotPeriodic(OrbitClass::CriticalPoint));
    }
    // Not being invariant is the stronger statement: open orbits that no
    // iterate returns to are reported as such.
    let Some(k) = res.multiplicity else {
        return Err(RotationError::NotInvariant(max_k));
    };
    let Some(period) = res.period else {
        return Err(RotationError::NotPeriodic(res.classification));
    };
    let tau = res.tau.ok_or(RotationError::NotInvariant(max_k))?;
    Ok(FlowRotation {
        rho: tau.abs() / period,
        period,
        tau,
        multiplicity: k,
        orbit,
    })
}

/// Weighted Birkhoff average of the angle increments of `F` about `center`
/// (the orbit centroid when `None`). For `n > 2` the orbit is first
/// projected onto its two principal directions. Pass `m.power_of(k)` to
/// measure `F^k`.
pub fn rotation_number_birkhoff(
    m: &MapSpec,
    p: &[f64],
    center: Option<&[f64]>,
    iterations: usize,
) -> Result<f64, RotationError> {
    if iterations < 8 {
        return Err(RotationError::TooFewIterations {
            need: 8,
            got: iterations,
        });
    }
    let mut pts = Vec::with_capacity(iterations + 1);
    pts.push(p.to_vec());
    for _ in 0..iterations {
        let q = m.try_forward(pts.last().unwrap())?;
        pts.push(q);
    }
    let c = match center {
        Some(c) => c.to_vec(),
        None => centroid(&pts),
    };
    let (e1, e2) = if m.dim() == 2 {
        (vec![1.0, 0.0], vec![0.0, 1.0])
    } else {
        principal_plane(&pts, &c)
    };
    let angles: Vec<f64> = pts
        .iter()
        .map(|q| {
            let d = vecgeo::sub(q, &c);
            vecgeo::dot(&d, &e2).atan2(vecgeo::dot(&d, &e1))
        })
        .collect();
    let incs: Vec<f64> = angles.windows(2).map(|w| wrap(w[1] - w[0])).collect();
    let total: f64 = incs.iter().sum();
    if let Some(j) = incs.iter().position(|d| {
        d.abs() > 1e-12 && (d.signum() != total.signum() || d.abs() >= std::f64::consts::PI)
    }) {
        return Err(RotationError::NotStarShaped(j + 1));
    }
    Ok((bump_average(&incs) / std::f64::consts::TAU).abs())
}

/// Rotation of the linearization at a fixed point of a planar map:
/// eigenvalues `e^{±i theta}` give `theta / 2pi` in `(0, 1/2)`.
pub fn fixed_point_rotation(m: &MapSpec, p_fix: &[f64]) -> Result<f64, RotationError> {
    if m.dim() != 2 {
        return Err(RotationError::NotPlanar(m.dim()));
    }
    let residual = vecgeo::dist(&m.try_forward(p_fix)?, p_fix);
    if residual > 1e-9 * (1.0 + vecgeo::norm(p_fix)) {
        return Err(RotationError::NotFixed {
            point: p_fix.to_vec(),
            residual,
        });
    }
    let j = m.jacobian(p_fix);
    let det = j.det();
    if (det - 1.0).abs() > 1e-6 {
        return Err(RotationError::NotConservative(det));
    }
    let half_trace = 0.5 * (j[(0, 0)] + j[(1, 1)]);
    if half_trace.abs() >= 1.0 {
        return Err(RotationError::Hyperbolic(half_trace));
    }
    Ok(half_trace.acos() / std::f64::consts::TAU)
}

/// Largest `|F^m(phi(s, p)) - phi(s + tau, p)|`, relative to `1 + |.|`, over
/// `samples` times spread over one period: how far `F^m` is from acting on
/// the orbit as a time shift.
pub fn conjugacy_residual(rot: &FlowRotation, m: &MapSpec, samples: usize) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..samples {
        let s = rot.period * i as f64 / samples as f64;
        let (Some(a), Some(b)) = (rot.orbit.point_at(s), rot.orbit.point_at(s + rot.tau)) else {
            return f64::INFINITY;
        };
        match m.iterate(&a, rot.multiplicity) {
            Ok(fa) => worst = worst.max(vecgeo::dist(&fa, &b) / (1.0 + vecgeo::norm(&b))),
            Err(_) => return f64::INFINITY,
        }
    }
    worst
}

/// `(j, k)` with `|rho - j/k| <= tol` and the smallest such `k <= max_den`.
pub fn nearby_rational(rho: f64, max_den: u32, tol: f64) -> Option<(u32, u32)> {
    (1..=max_den).find_map(|k| {
        let j = (rho * k as f64).round();
        ((rho - j / k as f64).abs() <= tol).then_some((j as u32, k))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    /// Computed, but a residual is above the threshold.
    Residual,
    NotPeriodic,
    NotInvariant,
    DomainExit,
    Failed,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Residual => "residual",
            RowStatus::NotPeriodic => "not_periodic",
            RowStatus::NotInvariant => "not_invariant",
            RowStatus::DomainExit => "domain_exit",
            RowStatus::Failed => "failed",
        }
    }

    fn of(e: &RotationError) -> Self {
        match e {
            RotationError::NotPeriodic(_) => RowStatus::NotPeriodic,
            RotationError::NotInvariant(_) => RowStatus::NotInvariant,
            RotationError::Flow(FlowError::DomainExit { .. })
            | RotationError::Map(MapError::IterateOutside { .. })
            | RotationError::Map(MapError::OutsideDomain(_)) => RowStatus::DomainExit,
            _ => RowStatus::Failed,
        }
    }
}

/// One level of a sweep. Values that could not be computed are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Values of the first integrals at the seed.
    pub h: Vec<f64>,
    pub seed: Point,
    pub period: f64,
    pub tau: f64,
    pub rho: f64,
    pub multiplicity: Option<usize>,
    pub res_mu: f64,
    pub res_x: f64,
    /// Worst relative drift of the integrals along one period.
    pub res_v: f64,
    pub status: RowStatus,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == RowStatus::Ok
    }

    fn failed(m: &MapSpec, p: &[f64], status: RowStatus) -> Self {
        SweepRow {
            h: m.integrals().iter().map(|v| v.eval(p)).collect(),
            seed: p.to_vec(),
            period: f64::NAN,
            tau: f64::NAN,
            rho: f64::NAN,
            multiplicity: None,
            res_mu: f64::NAN,
            res_x: f64::NAN,
            res_v: f64::NAN,
            status,
        }
    }
}

/// Full row for one seed; the error is returned as well so callers can
/// tell failures apart.
pub fn rotation_row(
    x: &VectorFieldSpec,
    m: &MapSpec,
    p: &[f64],
    rc: &RotationConfig,
) -> (SweepRow, Option<RotationError>) {
    if let Err(e) = m.check(p) {
        return (
            SweepRow::failed(m, p, RowStatus::DomainExit),
            Some(e.into()),
        );
    }
    let rot = match rotation_number_flow(x, m, p, rc.max_multiplicity, &rc.integrator) {
        Ok(r) => r,
        Err(e) => return (SweepRow::failed(m, p, RowStatus::of(&e)), Some(e)),
    };
    let k = rot.multiplicity;
    let mk = m.power_of(k as u32);
    let xk = x.for_power(k as u32);
    let res_mu = fields::check_condition_mu(&mk, x.mu(), p).map_or(f64::NAN, |r| r.relative);
    let res_x = fields::check_condition_x(&mk, &xk, p).map_or(f64::NAN, |r| r.relative);
    let res_v = integral_drift(&rot, m);
    let thr = rc.residual_threshold;
    // NaN compares false, so unusable residuals also flag the row
    let clean = [res_mu, res_x, res_v].iter().all(|r| *r <= thr);
    let row = SweepRow {
        h: m.integrals().iter().map(|v| v.eval(p)).collect(),
        seed: p.to_vec(),
        period: rot.period,
        tau: rot.tau,
        rho: rot.rho,
        multiplicity: Some(k),
        res_mu,
        res_x,
        res_v,
        status: if clean {
            RowStatus::Ok
        } else {
            RowStatus::Residual
        },
    };
    (row, None)
}

fn integral_drift(rot: &FlowRotation, m: &MapSpec) -> f64 {
    let p = rot.orbit.seed();
    let mut worst = 0.0_f64;
    for i in 1..=16 {
        let Some(q) = rot.orbit.point_at(rot.period * i as f64 / 16.0) else {
            return f64::NAN;
        };
        for v in m.integrals() {
            let v0 = v.eval(p);
            worst = worst.max((v.eval(&q) - v0).abs() / v0.abs().max(1.0));
        }
    }
    worst
}

/// `count` seeds evenly spaced on the segment `ray`, endpoints included.
pub fn ray_seeds(ray: &(Point, Point), count: usize) -> Vec<Point> {
    let (a, b) = ray;
    (0..count)
        .map(|i| {
            let s = if count > 1 {
                i as f64 / (count - 1) as f64
            } else {
                0.0
            };
            a.iter().zip(b).map(|(u, v)| u + s * (v - u)).collect()
        })
        .collect()
}

/// One row per seed on `ray`, sorted by level. Failed seeds stay in as
/// flagged rows.
pub fn sweep(
    m: &MapSpec,
    mu: &ScalarField,
    ray: &(Point, Point),
    count: usize,
    rc: &RotationConfig,
) -> Result<Vec<SweepRow>, RotationError> {
    rc.integrator.validate()?;
    let x = build_field(m, mu)?;
    let seeds = ray_seeds(ray, count);
    let mut rows = rc.exec.map(&seeds, |p| rotation_row(&x, m, p, rc).0);
    rows.sort_by(|a, b| cmp_levels(&a.h, &b.h));
    Ok(rows)
}

fn cmp_levels(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Increasing,
    Decreasing,
    NonMonotonic,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Increasing => "increasing",
            Verdict::Decreasing => "decreasing",
            Verdict::NonMonotonic => "non_monotonic",
        }
    }
}

/// Limit of the sweep at a fixed point: linear extrapolation of the two
/// rows nearest to its level, against the linearization.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointLimit {
    pub fixed_point: Point,
    pub level: f64,
    pub extrapolated: f64,
    pub linearized: f64,
}

impl EndpointLimit {
    pub fn error(&self) -> f64 {
        (self.extrapolated - self.linearized).abs()
    }

    pub fn agrees(&self) -> bool {
        self.error() <= ENDPOINT_TOLERANCE
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    /// Valid rows, sorted by level.
    pub rows: Vec<SweepRow>,
    pub verdict: Verdict,
    /// All rho within [`CONSTANT_TOLERANCE`] of each other.
    pub constant: bool,
    /// 1-based positions `(i, i+1)` among valid rows that break strict
    /// monotonicity in the overall direction.
    pub violations: Vec<(usize, usize)>,
    pub endpoint_limits: Vec<EndpointLimit>,
}

/// Monotonicity verdict over the valid rows. With `m` given, the sweep is
/// also extrapolated to each elliptic fixed point of `m` whose level lies
/// just beyond one end of the sweep.
pub fn monotonicity_report(
    rows: &[SweepRow],
    m: Option<&MapSpec>,
) -> Result<MonotonicityReport, RotationError> {
    let mut rows: Vec<SweepRow> = rows.iter().filter(|r| r.is_ok()).cloned().collect();
    if rows.len() < 3 {
        return Err(RotationError::TooFewRows(rows.len()));
    }
    rows.sort_by(|a, b| cmp_levels(&a.h, &b.h));
    let rho: Vec<f64> = rows.iter().map(|r| r.rho).collect();
    let rising = rho[rho.len() - 1] >= rho[0];
    let violations: Vec<(usize, usize)> = rho
        .windows(2)
        .enumerate()
        .filter(|(_, w)| {
            let d = if rising { w[1] - w[0] } else { w[0] - w[1] };
            d <= TIE_TOLERANCE
        })
        .map(|(i, _)| (i + 1, i + 2))
        .collect();
    let verdict = match (violations.is_empty(), rising) {
        (true, true) => Verdict::Increasing,
        (true, false) => Verdict::Decreasing,
        _ => Verdict::NonMonotonic,
    };
    let (lo, hi) = rho
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| {
            (a.min(r), b.max(r))
        });
    let endpoint_limits = m.map_or_else(Vec::new, |m| endpoint_limits(&rows, m));
    Ok(MonotonicityReport {
        constant: hi - lo <= CONSTANT_TOLERANCE,
        rows,
        verdict,
        violations,
        endpoint_limits,
    })
}

fn endpoint_limits(rows: &[SweepRow], m: &MapSpec) -> Vec<EndpointLimit> {
    let n = rows.len();
    let (h_lo, h_hi) = (rows[0].h[0], rows[n - 1].h[0]);
    let span = h_hi - h_lo;
    m.known_fixed_points()
        .iter()
        .filter_map(|pc| {
            let linearized = fixed_point_rotation(m, pc).ok()?;
            let level = m.integrals()[0].eval(pc);
            let (a, b) = if level <= h_lo && h_lo - level <= span {
                (&rows[0], &rows[1])
            } else if level >= h_hi && level - h_hi <= span {
                (&rows[n - 1], &rows[n - 2])
            } else {
                return None;
            };
            let slope = (b.rho - a.rho) / (b.h[0] - a.h[0]);
            Some(EndpointLimit {
                fixed_point: pc.clone(),
                level,
                extrapolated: a.rho + slope * (level - a.h[0]),
                linearized,
            })
        })
        .collect()
}

fn wrap(a: f64) -> f64 {
    let r = a.rem_euclid(std::f64::consts::TAU);
    if r > std::f64::consts::PI {
        r - std::f64::consts::TAU
    } else {
        r
    }
}

/// Average with weights `exp(-1/(s(1-s)))`; for quasi-periodic sequences
/// this converges much faster than the plain mean.
fn bump_average(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, x) in xs.iter().enumerate() {
        let s = (i as f64 + 0.5) / n;
        let w = (-1.0 / (s * (1.0 - s))).exp();
        num += w * x;
        den += w;
    }
    num / den
}

fn centroid(pts: &[Point]) -> Point {
    let mut c = vec![0.0; pts[0].len()];
    for q in pts {
        for (ci, qi) in c.iter_mut().zip(q) {
            *ci += qi;
        }
    }
    vecgeo::scale(&c, 1.0 / pts.len() as f64)
}

/// Two leading eigenvectors of the scatter matrix about `c`.
fn principal_plane(pts: &[Point], c: &[f64]) -> (Point, Point) {
    let n = c.len();
    let mut s = Mat::zeros(n);
    for q in pts {
        let d = vecgeo::sub(q, c);
        for i in 0..n {
            for j in 0..n {
                s[(i, j)] += d[i] * d[j];
            }
        }
    }
    let (vals, vecs) = symmetric_eigen(s);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    (vecs.column(idx[0]), vecs.column(idx[1]))
}

/// Cyclic Jacobi: eigenvalues and eigenvectors (as columns).
fn symmetric_eigen(mut a: Mat) -> (Vec<f64>, Mat) {
    let n = a.dim();
    let mut v = Mat::identity(n);
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off <= 1e-30 * a.frobenius().powi(2) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)] == 0.0 {
                    continue;
                }
                let theta = 0.5 * (a[(q, q)] - a[(p, p)]) / a[(p, q)];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let (cs, sn) = (1.0 / (t * t + 1.0).sqrt(), t / (t * t + 1.0).sqrt());
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = cs * akp - sn * akq;
                    a[(k, q)] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = cs * apk - sn * aqk;
                    a[(q, k)] = sn * apk + cs * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = cs * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + cs * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{builtin, Params};

    fn map(name: &str, pairs: &[(&str, f64)]) -> MapSpec {
        let p: Params = pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        builtin(name, &p).unwrap()
    }

    fn field(m: &MapSpec, mu: &str) -> VectorFieldSpec {
        build_field(m, &m.multiplier(mu).unwrap().field).unwrap()
    }

    fn fake_row(h: f64, rho: f64) -> SweepRow {
        SweepRow {
            h: vec![h],
            seed: vec![h, h],
            period: 1.0,
            tau: rho,
            rho,
            multiplicity: Some(1),
            res_mu: 0.0,
            res_x: 0.0,
            res_v: 0.0,
            status: RowStatus::Ok,
        }
    }

    #[test]
    fn five_periodic_lyness_rotates_by_a_fifth() {
        let m = map("lyness", &[("a", 1.0)]);
        let x = field(&m, "xy");
        let cfg = IntegratorConfig::default();
        for p in [[1.0, 1.0], [0.5, 3.0], [4.0, 0.2]] {
            let r = rotation_number_flow(&x, &m, &p, 4, &cfg).unwrap();
            assert_eq!(r.multiplicity, 1);
            assert!((r.rho - 0.2).abs() < 1e-6, "{p:?}: {}", r.rho);
            assert!(conjugacy_residual(&r, &m, 16) < 1e-6);
        }
        let phi = 0.5 * (1.0 + 5f64.sqrt());
        let b = rotation_number_birkhoff(&m, &[1.0, 1.0], Some(&[phi, phi]), 10_000).unwrap();
        assert!((b - 0.2).abs() < 1e-4, "{b}");
        assert_eq!(nearby_rational(0.2 + 1e-10, 12, 1e-9), Some((1, 5)));
    }

    #[test]
    fn near_fixed_point_matches_linearization() {
        let theta = 0.25f64.acos() / std::f64::consts::TAU;
        assert!((theta - 0.209773).abs() < 1e-4);
        let m = map("lyness", &[("a", 2.0)]);
        assert!((fixed_point_rotation(&m, &[2.0, 2.0]).unwrap() - theta).abs() < 1e-12);
        let x = field(&m, "xy");
        let r =
            rotation_number_flow(&x, &m, &[2.01, 2.0], 4, &IntegratorConfig::default()).unwrap();
        assert!((r.rho - theta).abs() < 1e-3, "{}", r.rho);

        let gm = map("gumovski_mira", &[("A", 1.0), ("B", 1.0), ("C", 0.0)]);
        let x = field(&gm, "one");
        let r =
            rotation_number_flow(&x, &gm, &[0.01, 0.0], 4, &IntegratorConfig::default()).unwrap();
        assert!((r.rho - 1.0 / 6.0).abs() < 1e-3, "{}", r.rho);
        let b = rotation_number_birkhoff(&gm, &[0.1, 0.0], Some(&[0.0, 0.0]), 10_000).unwrap();
        assert!((b - 1.0 / 6.0).abs() < 1e-3, "{b}");
        for beta in [0.3, 1.0, 1.5, 1.9] {
            let gm = map("gumovski_mira", &[("A", 1.0), ("B", beta), ("C", 0.0)]);
            let want = (beta / 2.0).acos() / std::f64::consts::TAU;
            assert!((fixed_point_rotation(&gm, &[0.0, 0.0]).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn flow_and_orbit_estimates_agree() {
        let m = map("lyness", &[("a", 2.0)]);
        let x = field(&m, "xy");
        let r = rotation_number_flow(&x, &m, &[1.0, 1.0], 4, &IntegratorConfig::default()).unwrap();
        let b = rotation_number_birkhoff(&m, &[1.0, 1.0], Some(&[2.0, 2.0]), 100_000).unwrap();
        assert!((r.rho - b).abs() < 1e-4, "{} vs {b}", r.rho);
        // centroid default works too
        let c = rotation_number_birkhoff(&m, &[1.0, 1.0], None, 100_000).unwrap();
        assert!((r.rho - c).abs() < 1e-4);
    }

    #[test]
    fn todd_rotation_is_measured_for_the_square() {
        let m = map("todd", &[("a", 1.0)]);
        let x = field(&m, "xyz");
        let r = rotation_number_flow(&x, &m, &[1.0, 2.0, 3.0], 4, &IntegratorConfig::default())
            .unwrap();
        assert_eq!(r.multiplicity, 2);
        let b = rotation_number_birkhoff(&m.power_of(2), &[1.0, 2.0, 3.0], None, 20_000).unwrap();
        assert!((r.rho - b).abs() < 1e-4, "{} vs {b}", r.rho);
    }

    #[test]
    fn saddles_and_non_fixed_points_are_rejected() {
        let gm = map("gumovski_mira", &[("A", 1.0), ("B", 3.0), ("C", 0.0)]);
        assert!(matches!(
            fixed_point_rotation(&gm, &[0.0, 0.0]),
            Err(RotationError::Hyperbolic(_))
        ));
        let m = map("lyness", &[("a", 2.0)]);
        assert!(matches!(
            fixed_point_rotation(&m, &[1.0, 2.0]),
            Err(RotationError::NotFixed { .. })
        ));
        let t = map("todd", &[("a", 1.0)]);
        assert_eq!(
            fixed_point_rotation(&t, &[1.0, 1.0, 1.0]),
            Err(RotationError::NotPlanar(3))
        );
    }

    #[test]
    fn birkhoff_rejects_a_badly_placed_center() {
        let m = map("lyness", &[("a", 2.0)]);
        // center outside the curve: increments change sign
        let r = rotation_number_birkhoff(&m, &[1.0, 1.0], Some(&[30.0, 30.0]), 1000);
        assert!(matches!(r, Err(RotationError::NotStarShaped(_))), "{r:?}");
        assert!(rotation_number_birkhoff(&m, &[1.0, 1.0], None, 3).is_err());
    }

    #[test]
    fn constant_sweep_on_five_periodic_lyness() {
        let m = map("lyness", &[("a", 1.0)]);
        let rc = RotationConfig::default();
        let rows = sweep(
            &m,
            &m.multiplier("xy").unwrap().field,
            m.default_ray().unwrap(),
            10,
            &rc,
        )
        .unwrap();
        assert_eq!(rows.len(), 10);
        for r in &rows {
            assert!(r.is_ok(), "{r:?}");
            assert!((r.rho - 0.2).abs() < 1e-6);
        }
        let rep = monotonicity_report(&rows, Some(&m)).unwrap();
        assert!(rep.constant);
        assert_eq!(rep.verdict, Verdict::NonMonotonic);
    }

    #[test]
    fn lyness_two_is_strictly_monotone_toward_the_linearization() {
        let m = map("lyness", &[("a", 2.0)]);
        let rc = RotationConfig::default();
        let rows = sweep(
            &m,
            &m.multiplier("xy").unwrap().field,
            m.default_ray().unwrap(),
            20,
            &rc,
        )
        .unwrap();
        assert!(rows.windows(2).all(|w| w[0].h[0] <= w[1].h[0]));
        let rep = monotonicity_report(&rows, Some(&m)).unwrap();
        assert_eq!(rep.rows.len(), 20);
        assert_ne!(rep.verdict, Verdict::NonMonotonic, "{:?}", rep.violations);
        assert!(rep.violations.is_empty());
        assert!(!rep.constant);
        assert_eq!(rep.endpoint_limits.len(), 1);
        assert!(rep.endpoint_limits[0].agrees(), "{:?}", rep.endpoint_limits);
    }

    #[test]
    fn todd_sweep_rows_need_the_square() {
        let m = map("todd", &[("a", 1.0)]);
        let rows = sweep(
            &m,
            &m.multiplier("xyz").unwrap().field,
            m.default_ray().unwrap(),
            10,
            &RotationConfig::default(),
        )
        .unwrap();
        for r in &rows {
            assert_eq!(r.multiplicity, Some(2), "{r:?}");
            assert!(r.is_ok(), "{r:?}");
        }
    }

    #[test]
    fn sweep_is_the_same_in_either_execution_mode() {
        let m = map("lyness", &[("a", 2.0)]);
        let mu = m.multiplier("xy").unwrap().field.clone();
        let ray = m.default_ray().unwrap();
        let seq = RotationConfig {
            exec: Exec::Sequential,
            ..Default::default()
        };
        let par = RotationConfig {
            exec: Exec::Parallel,
            ..Default::default()
        };
        assert_eq!(
            sweep(&m, &mu, ray, 6, &seq).unwrap(),
            sweep(&m, &mu, ray, 6, &par).unwrap()
        );
    }

    #[test]
    fn counterexample_seeds_fail_as_not_invariant() {
        let m = map("tilde_lyness", &[]);
        let x = field(&m, m.default_multiplier().field.name());
        let (row, err) = rotation_row(&x, &m, &[0.7, 1.3], &RotationConfig::default());
        assert_eq!(err, Some(RotationError::NotInvariant(4)));
        assert_eq!(row.status, RowStatus::NotInvariant);
        assert!(row.rho.is_nan());
    }

    #[test]
    fn synthetic_reports() {
        let rows = [fake_row(1.0, 0.1), fake_row(3.0, 0.2), fake_row(2.0, 0.3)];
        let rep = monotonicity_report(&rows, None).unwrap();
        assert_eq!(rep.verdict, Verdict::NonMonotonic);
        assert_eq!(rep.violations, vec![(2, 3)]);

        let rows = [fake_row(1.0, 0.3), fake_row(2.0, 0.2), fake_row(3.0, 0.1)];
        assert_eq!(
            monotonicity_report(&rows, None).unwrap().verdict,
            Verdict::Decreasing
        );

        let mut bad = fake_row(4.0, 0.0);
        bad.status = RowStatus::NotPeriodic;
        let rows = [fake_row(1.0, 0.1), fake_row(2.0, 0.2), bad];
        assert_eq!(
            monotonicity_report(&rows, None),
            Err(RotationError::TooFewRows(2))
        );
    }

    #[test]
    fn helpers() {
        assert!((wrap(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap(-0.5) + 0.5).abs() < 1e-15);
        assert!((bump_average(&[2.0; 50]) - 2.0).abs() < 1e-14);
        let a = Mat::from_rows(&[
            vec![2.0, 1.0, 0.0],
            vec![1.0, 2.0, 0.0],
            vec![0.0, 0.0, 5.0],
        ]);
        let (vals, vecs) = symmetric_eigen(a.clone());
        for i in 0..3 {
            let v = vecs.column(i);
            let av = a.mul_vec(&v);
            assert!(vecgeo::dist(&av, &vecgeo::scale(&v, vals[i])) < 1e-12);
        }
        assert_eq!(
            ray_seeds(&(vec![0.0, 0.0], vec![1.0, 2.0]), 3)[1],
            vec![0.5, 1.0]
        );
    }
}
