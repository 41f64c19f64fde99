//! Diffeomorphisms with first integrals, bundled with everything the
//! analysis needs: inverse, closed-form Jacobian, integrals with gradients,
//! candidate multipliers and a domain predicate.

mod builtins;
mod sampling;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::vecgeo::{self, Mat, Point};

pub use builtins::{builtin, BUILTIN_NAMES};
pub use sampling::SampleRegion;

pub type Params = BTreeMap<String, f64>;

type PointFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type RealFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type MatFn = Arc<dyn Fn(&[f64]) -> Mat + Send + Sync>;
type DomainFn = Arc<dyn Fn(&[f64], f64) -> bool + Send + Sync>;
type ChartFn = Arc<dyn Fn(&[f64]) -> u32 + Send + Sync>;

/// Default distance kept from singular domain boundaries.
pub const DOMAIN_MARGIN: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("unknown map `{0}` (known: {known})", known = BUILTIN_NAMES.join(", "))]
    UnknownMap(String),
    #[error("map `{map}` has no parameter `{key}`")]
    UnknownParam { map: String, key: String },
    #[error("invalid parameter {key} = {value} for `{map}`: {reason}")]
    InvalidParam {
        map: String,
        key: String,
        value: f64,
        reason: &'static str,
    },
    #[error("point {0:?} is outside the domain")]
    OutsideDomain(Point),
    #[error("map `{map}` has no multiplier `{name}` (known: {known})")]
    UnknownMultiplier {
        map: String,
        name: String,
        known: String,
    },
    #[error("iterate {step} of {point:?} leaves the domain")]
    IterateOutside { point: Point, step: usize },
}

/// A real function together with its closed-form gradient.
#[derive(Clone)]
pub struct ScalarField {
    name: String,
    eval: RealFn,
    grad: PointFn,
}

impl ScalarField {
    pub fn new<E, G>(name: impl Into<String>, eval: E, grad: G) -> Self
    where
        E: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
            grad: Arc::new(grad),
        }
    }

    pub fn constant(name: impl Into<String>, n: usize, c: f64) -> Self {
        Self::new(name, move |_| c, move |_| vec![0.0; n])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        (self.eval)(p)
    }

    pub fn grad(&self, p: &[f64]) -> Vec<f64> {
        (self.grad)(p)
    }

    /// `c * self`.
    pub fn scaled(&self, c: f64, name: impl Into<String>) -> Self {
        let (e, g) = (self.eval.clone(), self.grad.clone());
        Self::new(name, move |p| c * e(p), move |p| vecgeo::scale(&g(p), c))
    }

    /// `self * other`.
    pub fn product(&self, other: &ScalarField, name: impl Into<String>) -> Self {
        let (e1, g1, e2, g2) = (
            self.eval.clone(),
            self.grad.clone(),
            other.eval.clone(),
            other.grad.clone(),
        );
        let (v1, v2) = (e1.clone(), e2.clone());
        Self::new(
            name,
            move |p| v1(p) * v2(p),
            move |p| {
                let (a, b) = (e1(p), e2(p));
                g1(p)
                    .iter()
                    .zip(g2(p))
                    .map(|(da, db)| da * b + a * db)
                    .collect()
            },
        )
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({})", self.name)
    }
}

/// Which functional equation a multiplier solves: `mu(F) = det(DF) mu`
/// (`Plus`), `mu(F) = -det(DF) mu` (`Minus`), or neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SigmaClass {
    Plus,
    Minus,
    None,
}

impl SigmaClass {
    /// Class of the same function for `F^k`.
    pub fn for_power(self, k: u32) -> SigmaClass {
        match self {
            SigmaClass::Minus if k % 2 == 0 => SigmaClass::Plus,
            c => c,
        }
    }

    pub fn sign(self) -> Option<f64> {
        match self {
            SigmaClass::Plus => Some(1.0),
            SigmaClass::Minus => Some(-1.0),
            SigmaClass::None => None,
        }
    }
}

impl fmt::Display for SigmaClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SigmaClass::Plus => "Sigma+",
            SigmaClass::Minus => "Sigma-",
            SigmaClass::None => "none",
        })
    }
}

#[derive(Debug, Clone)]
pub struct MultiplierSpec {
    pub field: ScalarField,
    pub claimed_class: SigmaClass,
}

/// A diffeomorphism bundle. Immutable once built; cheap to clone.
#[derive(Clone)]
pub struct MapSpec {
    pub(crate) name: String,
    pub(crate) n: usize,
    pub(crate) params: Params,
    pub(crate) power: u32,
    pub(crate) margin: f64,
    pub(crate) domain: DomainFn,
    /// Labels the connected components of a disconnected domain.
    pub(crate) chart: Option<ChartFn>,
    pub(crate) forward: PointFn,
    pub(crate) inverse: PointFn,
    pub(crate) jacobian: MatFn,
    pub(crate) integrals: Vec<ScalarField>,
    pub(crate) aux: Vec<ScalarField>,
    pub(crate) multipliers: Vec<MultiplierSpec>,
    pub(crate) fixed_points: Vec<Point>,
    pub(crate) region: SampleRegion,
    pub(crate) ray: Option<(Point, Point)>,
    pub(crate) portrait_ray: Option<(Point, Point)>,
    pub(crate) measure_box: Option<(Point, Point)>,
    pub(crate) view: [f64; 4],
    pub(crate) diffeo_counterexample: bool,
}

impl fmt::Debug for MapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MapSpec")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("params", &self.params)
            .field("power", &self.power)
            .finish_non_exhaustive()
    }
}

impl MapSpec {
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Name including the iterate, e.g. `todd^2`.
    pub fn label(&self) -> String {
        if self.power == 1 {
            self.name.clone()
        } else {
            format!("{}^{}", self.name, self.power)
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    /// Which iterate of the underlying map this bundle represents.
    pub fn power(&self) -> u32 {
        self.power
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Set when the map is not a diffeomorphism of its domain, so the
    /// invariance conclusions for flow orbits do not apply.
    pub fn diffeo_counterexample(&self) -> bool {
        self.diffeo_counterexample
    }

    pub fn in_domain(&self, p: &[f64]) -> bool {
        p.len() == self.n && p.iter().all(|x| x.is_finite()) && (self.domain)(p, self.margin)
    }

    pub fn in_domain_with_margin(&self, p: &[f64], margin: f64) -> bool {
        p.len() == self.n && p.iter().all(|x| x.is_finite()) && (self.domain)(p, margin)
    }

    /// Which connected component of the domain `p` lies in. Trajectories
    /// must not jump between components across a thin excluded set.
    pub fn chart(&self, p: &[f64]) -> u32 {
        self.chart.as_ref().map_or(0, |c| c(p))
    }

    pub fn with_margin(&self, margin: f64) -> MapSpec {
        let mut m = self.clone();
        m.margin = margin;
        m
    }

    /// Unchecked evaluation of `F`.
    pub fn forward(&self, p: &[f64]) -> Point {
        (self.forward)(p)
    }

    pub fn inverse(&self, p: &[f64]) -> Point {
        (self.inverse)(p)
    }

    pub fn jacobian(&self, p: &[f64]) -> Mat {
        (self.jacobian)(p)
    }

    /// `F(p)`, checking that both `p` and its image lie in the domain.
    pub fn try_forward(&self, p: &[f64]) -> Result<Point, MapError> {
        self.check(p)?;
        let q = self.forward(p);
        if !self.in_domain(&q) {
            return Err(MapError::IterateOutside {
                point: p.to_vec(),
                step: 1,
            });
        }
        Ok(q)
    }

    /// `F^k(p)` for `k >= 0`, failing if an iterate leaves the domain.
    pub fn iterate(&self, p: &[f64], k: usize) -> Result<Point, MapError> {
        self.check(p)?;
        let mut q = p.to_vec();
        for step in 1..=k {
            q = self.forward(&q);
            if !self.in_domain(&q) {
                return Err(MapError::IterateOutside {
                    point: p.to_vec(),
                    step,
                });
            }
        }
        Ok(q)
    }

    pub fn check(&self, p: &[f64]) -> Result<(), MapError> {
        if self.in_domain(p) {
            Ok(())
        } else {
            Err(MapError::OutsideDomain(p.to_vec()))
        }
    }

    pub fn integrals(&self) -> &[ScalarField] {
        &self.integrals
    }

    /// Auxiliary closed-form functions (critical-surface polynomials,
    /// integrals of iterates) by name.
    pub fn aux(&self, name: &str) -> Option<&ScalarField> {
        self.aux.iter().find(|f| f.name() == name)
    }

    pub fn aux_fields(&self) -> &[ScalarField] {
        &self.aux
    }

    pub fn multipliers(&self) -> &[MultiplierSpec] {
        &self.multipliers
    }

    /// The published multiplier used when none is requested.
    pub fn default_multiplier(&self) -> &MultiplierSpec {
        &self.multipliers[0]
    }

    pub fn multiplier(&self, name: &str) -> Result<&MultiplierSpec, MapError> {
        self.multipliers
            .iter()
            .find(|m| m.field.name() == name)
            .ok_or_else(|| MapError::UnknownMultiplier {
                map: self.name.clone(),
                name: name.to_string(),
                known: self
                    .multipliers
                    .iter()
                    .map(|m| m.field.name().to_string())
                    .collect::<Vec<_>>()
                    .join(", "),
            })
    }

    pub fn known_fixed_points(&self) -> &[Point] {
        &self.fixed_points
    }

    pub fn sample_region(&self) -> &SampleRegion {
        &self.region
    }

    /// Default seed segment for sweeps.
    pub fn default_ray(&self) -> Option<&(Point, Point)> {
        self.ray.as_ref()
    }

    /// Default seed segment for phase portraits.
    pub fn portrait_ray(&self) -> Option<&(Point, Point)> {
        self.portrait_ray.as_ref().or(self.ray.as_ref())
    }

    pub fn measure_box(&self) -> Option<&(Point, Point)> {
        self.measure_box.as_ref()
    }

    /// Plot window `[xmin, xmax, ymin, ymax]` in the first two coordinates.
    pub fn view(&self) -> [f64; 4] {
        self.view
    }

    pub fn integral_values(&self, p: &[f64]) -> Result<Vec<f64>, MapError> {
        self.check(p)?;
        Ok(self.integrals.iter().map(|v| v.eval(p)).collect())
    }

    pub fn jacobian_det(&self, p: &[f64]) -> Result<f64, MapError> {
        self.check(p)?;
        Ok(self.jacobian(p).det())
    }

    /// The bundle for `F^k`: composed forward and inverse maps, chained
    /// Jacobian, the same integrals, and multiplier classes mapped through
    /// [`SigmaClass::for_power`].
    pub fn power_of(&self, k: u32) -> MapSpec {
        assert!(k >= 1, "power must be at least 1");
        if k == 1 {
            return self.clone();
        }
        let base = self.clone();
        let mut m = self.clone();
        m.power = self.power * k;
        let kk = k as usize;
        let f = base.forward.clone();
        m.forward = Arc::new(move |p| {
            let mut q = p.to_vec();
            for _ in 0..kk {
                q = f(&q);
            }
            q
        });
        let g = base.inverse.clone();
        m.inverse = Arc::new(move |p| {
            let mut q = p.to_vec();
            for _ in 0..kk {
                q = g(&q);
            }
            q
        });
        let (f, jac) = (base.forward.clone(), base.jacobian.clone());
        m.jacobian = Arc::new(move |p| {
            let mut q = p.to_vec();
            let mut acc = jac(&q);
            for _ in 1..kk {
                q = f(&q);
                acc = jac(&q).mul_mat(&acc);
            }
            acc
        });
        let (f, dom) = (base.forward.clone(), base.domain.clone());
        m.domain = Arc::new(move |p, margin| {
            let mut q = p.to_vec();
            for _ in 1..kk {
                if !dom(&q, margin) {
                    return false;
                }
                q = f(&q);
            }
            dom(&q, margin)
        });
        m.multipliers = base
            .multipliers
            .iter()
            .map(|ms| MultiplierSpec {
                field: ms.field.clone(),
                claimed_class: ms.claimed_class.for_power(k),
            })
            .collect();
        m
    }

    /// Uniform/log-uniform random domain points whose image and preimage
    /// also lie in the domain. Deterministic for a given seed.
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<Point> {
        sampling::sample_points(self, count, seed)
    }
}
