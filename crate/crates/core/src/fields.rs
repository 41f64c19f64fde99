//! The field `X_mu` built from the integral gradients, and numerical checks
//! of the functional equations it rests on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::maps::{MapError, MapSpec, ScalarField, SigmaClass};
use crate::par::Exec;
use crate::vecgeo::{self, GeoError, Point};

/// Relative threshold below which a functional equation counts as holding.
pub const DEFAULT_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Geometry(#[from] GeoError),
    #[error("map `{map}` has {got} integrals, a field in R^{n} needs {}", n - 1)]
    IntegralCount { map: String, n: usize, got: usize },
    #[error("`{name}` has gradient of length {got}, expected {expected}")]
    DimensionMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("could not draw any domain point for `{0}`")]
    NoSamples(String),
    #[error("exponents must sum to 1, got {0}")]
    ExponentSum(i32),
    #[error("factor `{0}` has no sigma class; nothing can be predicted")]
    UnclassifiedFactor(String),
    #[error("divisor `{name}` vanishes at {point:?}")]
    VanishingDivisor { name: String, point: Point },
    #[error("multiplier `{name}` vanishes or changes sign in the box (near {point:?})")]
    MeasureSign { name: String, point: Point },
    #[error("det(DF) changes sign in the box (near {0:?})")]
    MixedOrientation(Point),
    #[error("box corners must satisfy lo < hi in every coordinate")]
    BadBox,
}

/// `X_mu` for a map bundle and a multiplier.
#[derive(Clone, Debug)]
pub struct VectorFieldSpec {
    map: MapSpec,
    mu: ScalarField,
}

impl VectorFieldSpec {
    pub fn map(&self) -> &MapSpec {
        &self.map
    }

    pub fn mu(&self) -> &ScalarField {
        &self.mu
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    /// The field with `F` replaced by `F^k`; the vector field itself is
    /// unchanged since it depends only on the integrals and `mu`.
    pub fn for_power(&self, k: u32) -> VectorFieldSpec {
        VectorFieldSpec {
            map: self.map.power_of(k),
            mu: self.mu.clone(),
        }
    }

    pub fn eval(&self, p: &[f64]) -> Point {
        let mu = self.mu.eval(p);
        let grads: Vec<Point> = self.map.integrals().iter().map(|v| v.grad(p)).collect();
        let dir = if self.map.dim() == 2 {
            vec![-grads[0][1], grads[0][0]]
        } else {
            vecgeo::cross(&grads).expect("gradient shapes are checked when the field is built")
        };
        vecgeo::scale(&dir, mu)
    }
}

/// Builds `mu (-V_y, V_x)` in the plane and `mu * cross(grad V_1, ..)` above.
pub fn build_field(m: &MapSpec, mu: &ScalarField) -> Result<VectorFieldSpec, FieldError> {
    let n = m.dim();
    if m.integrals().len() != n - 1 {
        return Err(FieldError::IntegralCount {
            map: m.name().into(),
            n,
            got: m.integrals().len(),
        });
    }
    let probe = m
        .known_fixed_points()
        .first()
        .cloned()
        .or_else(|| m.sample_points(1, 0).pop())
        .ok_or_else(|| FieldError::NoSamples(m.name().into()))?;
    for f in m.integrals().iter().chain(std::iter::once(mu)) {
        let got = f.grad(&probe).len();
        if got != n {
            return Err(FieldError::DimensionMismatch {
                name: f.name().into(),
                expected: n,
                got,
            });
        }
    }
    Ok(VectorFieldSpec {
        map: m.clone(),
        mu: mu.clone(),
    })
}

/// An absolute residual with the magnitude it should be judged against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub value: f64,
    pub scale: f64,
    pub relative: f64,
}

impl Residual {
    pub fn new(value: f64, scale: f64) -> Self {
        Residual {
            value,
            scale,
            relative: value / scale.max(1.0),
        }
    }

    pub fn passes(&self, threshold: f64) -> bool {
        self.relative <= threshold
    }

    /// Componentwise worst of two residuals (by relative value).
    pub fn worst(self, other: Residual) -> Residual {
        if other.relative > self.relative || other.relative.is_nan() {
            other
        } else {
            self
        }
    }
}

fn image_in_domain(m: &MapSpec, p: &[f64]) -> Result<Point, FieldError> {
    Ok(m.try_forward(p)?)
}

/// `|X(F(p)) - DF(p) X(p)|` against `|DF(p) X(p)|`.
pub fn check_condition_x(
    m: &MapSpec,
    x: &VectorFieldSpec,
    p: &[f64],
) -> Result<Residual, FieldError> {
    let fp = image_in_domain(m, p)?;
    let pushed = m.jacobian(p).mul_vec(&x.eval(p));
    Ok(Residual::new(
        vecgeo::dist(&x.eval(&fp), &pushed),
        vecgeo::norm(&pushed),
    ))
}

/// `|mu(F(p)) - det DF(p) mu(p)|` against `|det DF(p) mu(p)|`.
pub fn check_condition_mu(
    m: &MapSpec,
    mu: &ScalarField,
    p: &[f64],
) -> Result<Residual, FieldError> {
    let fp = image_in_domain(m, p)?;
    let rhs = m.jacobian(p).det() * mu.eval(p);
    Ok(Residual::new((mu.eval(&fp) - rhs).abs(), rhs.abs()))
}

/// Worst `|X . grad V_i|` against `|X| |grad V_i|`.
pub fn orthogonality_residual(x: &VectorFieldSpec, p: &[f64]) -> Residual {
    let xv = x.eval(p);
    let xn = vecgeo::norm(&xv);
    x.map()
        .integrals()
        .iter()
        .map(|v| {
            let g = v.grad(p);
            Residual::new(vecgeo::dot(&xv, &g).abs(), xn * vecgeo::norm(&g))
        })
        .fold(Residual::new(0.0, 0.0), Residual::worst)
}

/// Outcome of [`classify_multiplier`].
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub class: SigmaClass,
    /// Samples where both equations could be judged.
    pub regular: usize,
    /// Samples skipped because `mu` or `det DF` was non-finite or huge there.
    pub near_singular: usize,
    /// Set when `mu` vanished at every sample.
    pub degenerate: bool,
    /// Worst relative residual of `mu(F) = det mu` and `mu(F) = -det mu`.
    pub worst_plus: f64,
    pub worst_minus: f64,
}

impl Classification {
    /// Fraction of samples that took part in the vote.
    pub fn quorum(&self) -> f64 {
        let total = self.regular + self.near_singular;
        if total == 0 {
            0.0
        } else {
            self.regular as f64 / total as f64
        }
    }
}

const SINGULAR_MAGNITUDE: f64 = 1e12;
const MIN_QUORUM: f64 = 0.9;

/// Decides which of `mu(F) = +-det(DF) mu` holds at every sample, with the
/// default seed and threshold.
pub fn classify_multiplier(m: &MapSpec, mu: &ScalarField, samples: usize) -> Classification {
    classify_multiplier_with(m, mu, samples, 0xC1A55, DEFAULT_THRESHOLD)
}

pub fn classify_multiplier_with(
    m: &MapSpec,
    mu: &ScalarField,
    samples: usize,
    seed: u64,
    threshold: f64,
) -> Classification {
    let pts = m.sample_points(samples.max(1), seed);
    let mut c = Classification {
        class: SigmaClass::None,
        regular: 0,
        near_singular: 0,
        degenerate: false,
        worst_plus: 0.0,
        worst_minus: 0.0,
    };
    let mut zeros = 0;
    for p in &pts {
        let (here, there) = (mu.eval(p), mu.eval(&m.forward(p)));
        let det = m.jacobian(p).det();
        let rhs = det * here;
        let vals = [here, there, det, rhs];
        if vals
            .iter()
            .any(|v| !v.is_finite() || v.abs() > SINGULAR_MAGNITUDE)
        {
            c.near_singular += 1;
            continue;
        }
        if here == 0.0 && there == 0.0 {
            zeros += 1;
            continue;
        }
        let scale = rhs.abs().max(there.abs());
        c.regular += 1;
        c.worst_plus = c.worst_plus.max((there - rhs).abs() / scale);
        c.worst_minus = c.worst_minus.max((there + rhs).abs() / scale);
    }
    if c.regular == 0 {
        c.degenerate = zeros > 0;
        return c;
    }
    let voted = c.regular + zeros;
    if (voted as f64) < MIN_QUORUM * pts.len() as f64 {
        return c;
    }
    c.class = if c.worst_plus <= threshold {
        SigmaClass::Plus
    } else if c.worst_minus <= threshold {
        SigmaClass::Minus
    } else {
        SigmaClass::None
    };
    c
}

/// A multiplier assembled from known ones, with the class the algebra of
/// solutions predicts for it.
#[derive(Debug, Clone)]
pub struct Combined {
    pub field: ScalarField,
    pub class_for_map: SigmaClass,
    /// Always `Plus`: both classes become `Plus` for the second iterate.
    pub class_for_square: SigmaClass,
}

/// `prod mu_i^{e_i}` (times an optional first integral). The exponents must
/// sum to 1, e.g. `mu^l nu^(1-l)`; the predicted class for `F` is the
/// product of the factor signs raised to their exponents. Divisors are
/// checked not to vanish on `samples` domain points of `m`.
pub fn sigma_combine(
    m: &MapSpec,
    entries: &[(ScalarField, SigmaClass, i32)],
    integral: Option<&ScalarField>,
    name: &str,
    samples: usize,
) -> Result<Combined, FieldError> {
    let sum: i32 = entries.iter().map(|e| e.2).sum();
    if sum != 1 {
        return Err(FieldError::ExponentSum(sum));
    }
    let mut sign = 1.0;
    for (f, class, e) in entries {
        let s = class
            .sign()
            .ok_or_else(|| FieldError::UnclassifiedFactor(f.name().into()))?;
        sign *= s.powi(*e);
    }
    let pts = m.sample_points(samples, 0xD1F);
    for (f, _, e) in entries.iter().filter(|e| e.2 < 0) {
        let _ = e;
        if let Some(p) = pts.iter().find(|p| {
            let v = f.eval(p);
            !v.is_finite() || v.abs() < 1e-12
        }) {
            return Err(FieldError::VanishingDivisor {
                name: f.name().into(),
                point: p.clone(),
            });
        }
    }

    let factors: Vec<(ScalarField, i32)> =
        entries.iter().map(|(f, _, e)| (f.clone(), *e)).collect();
    let eval_factors = factors.clone();
    let integral_eval = integral.cloned();
    let integral_grad = integral.cloned();
    let field = ScalarField::new(
        name,
        move |p| {
            let base: f64 = eval_factors
                .iter()
                .map(|(f, e)| f.eval(p).powi(*e))
                .product();
            base * integral_eval.as_ref().map_or(1.0, |v| v.eval(p))
        },
        move |p| {
            let vals: Vec<f64> = factors.iter().map(|(f, _)| f.eval(p)).collect();
            let n = p.len();
            let mut grad = vec![0.0; n];
            let mut base = 1.0;
            for (i, (f, e)) in factors.iter().enumerate() {
                base *= vals[i].powi(*e);
                let others: f64 = factors
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(j, (_, ej))| vals[j].powi(*ej))
                    .product();
                let coef = *e as f64 * vals[i].powi(e - 1) * others;
                for (g, d) in grad.iter_mut().zip(f.grad(p)) {
                    *g += coef * d;
                }
            }
            match &integral_grad {
                None => grad,
                Some(v) => {
                    let val = v.eval(p);
                    grad.iter()
                        .zip(v.grad(p))
                        .map(|(g, dv)| g * val + base * dv)
                        .collect()
                }
            }
        },
    );
    Ok(Combined {
        field,
        class_for_map: if sign > 0.0 {
            SigmaClass::Plus
        } else {
            SigmaClass::Minus
        },
        class_for_square: SigmaClass::Plus,
    })
}

/// Monte Carlo estimates of the `1/|mu|`-measure of a box and of its
/// preimage.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureEstimate {
    pub box_measure: f64,
    pub box_stderr: f64,
    pub preimage_measure: f64,
    pub preimage_stderr: f64,
    /// 1 for `F`, 2 when the orientation-reversing map was squared first.
    pub power_used: u32,
}

impl MeasureEstimate {
    pub fn combined_stderr(&self) -> f64 {
        self.box_stderr.hypot(self.preimage_stderr)
    }

    /// Difference in units of the combined standard error.
    pub fn sigmas(&self) -> f64 {
        (self.box_measure - self.preimage_measure).abs() / self.combined_stderr()
    }

    pub fn agrees(&self, sigmas: f64) -> bool {
        let d = (self.box_measure - self.preimage_measure).abs();
        d <= sigmas * self.combined_stderr() || d <= 1e-12 * self.box_measure.abs()
    }
}

const MC_CHUNK: usize = 1 << 15;

/// Integral of `g` over the box `[lo, hi]` by uniform sampling: (mean, stderr).
fn mc_integral<G>(lo: &[f64], hi: &[f64], samples: usize, seed: u64, exec: Exec, g: G) -> (f64, f64)
where
    G: Fn(&[f64]) -> f64 + Sync + Send,
{
    let vol: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
    let chunks = samples.div_ceil(MC_CHUNK);
    let parts = exec.map_range(chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let count = MC_CHUNK.min(samples - c * MC_CHUNK);
        let mut p = vec![0.0; lo.len()];
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..count {
            for (k, x) in p.iter_mut().enumerate() {
                *x = rng.gen_range(lo[k]..hi[k]);
            }
            let v = g(&p);
            s += v;
            s2 += v * v;
        }
        (s, s2)
    });
    let (s, s2) = parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = samples as f64;
    let mean = s / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    (vol * mean, vol * (var / n).sqrt())
}

fn grid_points(lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<Point> {
    let n = lo.len();
    let total = per_axis.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            (0..n)
                .map(|k| {
                    let i = idx % per_axis;
                    idx /= per_axis;
                    lo[k] + (hi[k] - lo[k]) * i as f64 / (per_axis - 1) as f64
                })
                .collect()
        })
        .collect()
}

/// Compares `m_nu(B)` with `m_nu(F^{-1}(B))` for `nu = 1/|mu|`. Maps that
/// reverse orientation on the box are squared first. The preimage is
/// integrated over a padded bounding box of `F^{-1}(B)`.
pub fn check_invariant_measure(
    m: &MapSpec,
    mu: &ScalarField,
    bx: (&[f64], &[f64]),
    n_samples: usize,
    seed: u64,
) -> Result<MeasureEstimate, FieldError> {
    check_invariant_measure_with(m, mu, bx, n_samples, seed, Exec::default())
}

pub fn check_invariant_measure_with(
    m: &MapSpec,
    mu: &ScalarField,
    bx: (&[f64], &[f64]),
    n_samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<MeasureEstimate, FieldError> {
    let (lo, hi) = bx;
    let n = m.dim();
    if lo.len() != n || hi.len() != n || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
        return Err(FieldError::BadBox);
    }
    let per_axis = if n == 2 { 41 } else { 17 };
    let grid = grid_points(lo, hi, per_axis);
    for p in &grid {
        m.check(p)?;
    }

    let dets: Vec<f64> = grid.iter().map(|p| m.jacobian(p).det()).collect();
    let map = if dets.iter().all(|d| *d > 0.0) {
        m.clone()
    } else if dets.iter().all(|d| *d < 0.0) {
        m.power_of(2)
    } else {
        let i = dets.iter().position(|d| *d <= 0.0).unwrap();
        return Err(FieldError::MixedOrientation(grid[i].clone()));
    };

    let mu_sign = |pts: &[Point]| -> Result<(), FieldError> {
        let s0 = mu.eval(&pts[0]).signum();
        match pts.iter().find(|p| {
            let v = mu.eval(p);
            !v.is_finite() || v == 0.0 || v.signum() != s0
        }) {
            Some(p) => Err(FieldError::MeasureSign {
                name: mu.name().into(),
                point: p.clone(),
            }),
            None => Ok(()),
        }
    };
    mu_sign(&grid)?;

    let pre: Vec<Point> = grid.iter().map(|p| map.inverse(p)).collect();
    for p in &pre {
        map.check(p)?;
    }
    mu_sign(&pre)?;
    let mut plo = pre[0].clone();
    let mut phi = pre[0].clone();
    for p in &pre {
        for k in 0..n {
            plo[k] = plo[k].min(p[k]);
            phi[k] = phi[k].max(p[k]);
        }
    }
    for k in 0..n {
        let pad = 0.1 * (phi[k] - plo[k]);
        plo[k] -= pad;
        phi[k] += pad;
    }

    let (bm, bse) = mc_integral(lo, hi, n_samples, seed, exec, |p| 1.0 / mu.eval(p).abs());
    let inside = |q: &[f64]| q.iter().zip(lo).zip(hi).all(|((x, a), b)| x >= a && x <= b);
    let (pm, pse) = mc_integral(&plo, &phi, n_samples, seed ^ 0x9E37_79B9, exec, |q| {
        if !map.in_domain_with_margin(q, 0.0) {
            return 0.0;
        }
        let img = map.forward(q);
        if img.iter().all(|x| x.is_finite()) && inside(&img) {
            1.0 / mu.eval(q).abs()
        } else {
            0.0
        }
    });
    Ok(MeasureEstimate {
        box_measure: bm,
        box_stderr: bse,
        preimage_measure: pm,
        preimage_stderr: pse,
        power_used: map.power(),
    })
}

/// Result of probing the zero set of a multiplier for invariance.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroSetReport {
    /// Points located on `mu = 0`.
    pub points: usize,
    /// Worst `|mu(F(p))| / (eps (1 + |det DF(p)|))` over those points.
    pub worst_ratio: f64,
}

impl ZeroSetReport {
    pub fn passes(&self) -> bool {
        self.worst_ratio <= 1.0
    }
}

/// Locates zeros of `mu` by bisection between sample points of opposite
/// sign and checks that `F` keeps them (approximately) on the zero set.
pub fn check_zero_set_invariance(
    m: &MapSpec,
    mu: &ScalarField,
    samples: usize,
    seed: u64,
) -> ZeroSetReport {
    let pts = m.sample_points(samples, seed);
    let mut report = ZeroSetReport {
        points: 0,
        worst_ratio: 0.0,
    };
    for pair in pts.windows(2) {
        let (mut a, mut b) = (pair[0].clone(), pair[1].clone());
        let (mut fa, fb) = (mu.eval(&a), mu.eval(&b));
        if !(fa * fb < 0.0) {
            continue;
        }
        let scale = fa.abs().max(fb.abs()).max(1.0);
        let mut mid = a.clone();
        let mut ok = true;
        for _ in 0..200 {
            mid = vecgeo::scale(&vecgeo::add(&a, &b), 0.5);
            if !m.in_domain(&mid) {
                ok = false;
                break;
            }
            let fm = mu.eval(&mid);
            if fm.abs() <= 1e-13 * scale || vecgeo::dist(&a, &b) < 1e-15 {
                break;
            }
            if fm * fa < 0.0 {
                b = mid.clone();
            } else {
                a = mid.clone();
                fa = fm;
            }
        }
        let Ok(img) = m.try_forward(&mid) else {
            continue;
        };
        if !ok {
            continue;
        }
        let eps = 1e-9
            * scale
                .max(mu.eval(&img).abs().min(SINGULAR_MAGNITUDE))
                .max(1.0);
        let det = m.jacobian(&mid).det();
        report.points += 1;
        report.worst_ratio = report
            .worst_ratio
            .max(mu.eval(&img).abs() / (eps * (1.0 + det.abs())));
    }
    report
}
