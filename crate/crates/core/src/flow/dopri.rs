//! Dormand–Prince 5(4) with PI step-size control and the pair's own
//! fourth-order dense output (Hairer, Nørsett & Wanner, `dopri5`).

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// step control
const SAFE: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
// accepted steps change h by a factor in [FAC_MIN, FAC_MAX]
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Dense output of one accepted step; valid on `[t0, t0 + h]` (or
/// `[t0 + h, t0]` when integrating backwards).
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    n: usize,
    // rcont1..rcont5 back to back
    coef: Vec<f64>,
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn start(&self) -> &[f64] {
        &self.coef[..self.n]
    }

    pub fn end(&self) -> Vec<f64> {
        let n = self.n;
        (0..n).map(|i| self.coef[i] + self.coef[n + i]).collect()
    }

    /// Whether `t` lies in the step's time interval.
    pub fn covers(&self, t: f64) -> bool {
        let (a, b) = if self.h >= 0.0 {
            (self.t0, self.t1())
        } else {
            (self.t1(), self.t0)
        };
        t >= a && t <= b
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        let n = self.n;
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let r = &self.coef;
        (0..n)
            .map(|i| {
                r[i] + s * (r[n + i] + s1 * (r[2 * n + i] + s * (r[3 * n + i] + s1 * r[4 * n + i])))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

/// Why [`solve`] returned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    /// Reached the requested end time.
    Reached,
    /// The observer asked to stop.
    Observer,
    /// The step size collapsed, normally because every trial step left
    /// the domain of the right-hand side.
    StepUnderflow,
    StepLimit,
}

fn weighted_rms(err: &[f64], y0: &[f64], y1: &[f64], c: &StepControl) -> f64 {
    let n = err.len() as f64;
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sk = c.abs_tol + c.rel_tol * a.abs().max(b.abs());
            (e / sk).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

fn axpy(y: &[f64], terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = y.to_vec();
    for (a, k) in terms {
        for (o, v) in out.iter_mut().zip(k.iter()) {
            *o += a * v;
        }
    }
    out
}

fn initial_step<F>(f: &F, y0: &[f64], f0: &[f64], dir: f64, c: &StepControl) -> f64
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let zero = vec![0.0; y0.len()];
    let d0 = weighted_rms(y0, y0, &zero, c);
    let d1 = weighted_rms(f0, y0, &zero, c);
    let mut h0 = if d0 < 1e-10 || d1 < 1e-10 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h0 = h0.min(c.max_step);
    let y1 = axpy(y0, &[(dir * h0, f0)]);
    let Some(f1) = f(&y1) else {
        return h0 * 1e-3;
    };
    let df: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = weighted_rms(&df, y0, &zero, c) / h0;
    let dm = d1.max(d2);
    let h1 = if dm <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dm).powf(0.2)
    };
    (100.0 * h0).min(h1).min(c.max_step)
}

/// Integrates `y' = f(y)` from `t = 0` to `t_end` (either sign). `f`
/// returns `None` outside its domain; such trial steps are rejected and
/// retried smaller. `observe` sees each accepted step and may return
/// `true` to stop. Returns the stop reason, final time and state.
pub fn solve<F, O>(
    f: &F,
    y0: &[f64],
    t_end: f64,
    c: &StepControl,
    mut observe: O,
) -> (Stop, f64, Vec<f64>)
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
    O: FnMut(&DenseStep) -> bool,
{
    let n = y0.len();
    let mut t = 0.0;
    let mut y = y0.to_vec();
    if t_end == 0.0 {
        return (Stop::Reached, t, y);
    }
    let dir = t_end.signum();
    let Some(mut k1) = f(&y) else {
        return (Stop::StepUnderflow, t, y);
    };
    let mut h = initial_step(f, &y, &k1, dir, c);
    let mut facold: f64 = 1e-4;
    let mut last_rejected = false;
    let mut steps = 0usize;

    loop {
        let remaining = (t_end - t) * dir;
        if remaining <= 0.0 {
            return (Stop::Reached, t, y);
        }
        if steps >= c.max_steps {
            return (Stop::StepLimit, t, y);
        }
        let hmin = 16.0 * f64::EPSILON * t.abs().max(1.0);
        let mut hh = h.min(c.max_step);
        let last = hh >= remaining;
        if last {
            hh = remaining;
        }
        if hh < hmin && !last {
            return (Stop::StepUnderflow, t, y);
        }
        let hs = dir * hh;
        steps += 1;

        let stages = (|| {
            let k2 = f(&axpy(&y, &[(hs * A21, &k1)]))?;
            let k3 = f(&axpy(&y, &[(hs * A31, &k1), (hs * A32, &k2)]))?;
            let k4 = f(&axpy(
                &y,
                &[(hs * A41, &k1), (hs * A42, &k2), (hs * A43, &k3)],
            ))?;
            let k5 = f(&axpy(
                &y,
                &[
                    (hs * A51, &k1),
                    (hs * A52, &k2),
                    (hs * A53, &k3),
                    (hs * A54, &k4),
                ],
            ))?;
            let k6 = f(&axpy(
                &y,
                &[
                    (hs * A61, &k1),
                    (hs * A62, &k2),
                    (hs * A63, &k3),
                    (hs * A64, &k4),
                    (hs * A65, &k5),
                ],
            ))?;
            let y1 = axpy(
                &y,
                &[
                    (hs * A71, &k1),
                    (hs * A73, &k3),
                    (hs * A74, &k4),
                    (hs * A75, &k5),
                    (hs * A76, &k6),
                ],
            );
            let k7 = f(&y1)?;
            Some((k2, k3, k4, k5, k6, k7, y1))
        })();

        let Some((_k2, k3, k4, k5, k6, k7, y1)) = stages else {
            h = hh * 0.25;
            last_rejected = true;
            continue;
        };

        let err_vec: Vec<f64> = (0..n)
            .map(|i| {
                hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            })
            .collect();
        let err = weighted_rms(&err_vec, &y, &y1, c);
        if !err.is_finite() {
            h = hh * 0.25;
            last_rejected = true;
            continue;
        }

        let fac11 = err.powf(EXPO1);
        if err <= 1.0 {
            // Lund stabilisation
            let fac = (fac11 / facold.powf(BETA) / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut hnew = hh / fac;
            if last_rejected {
                hnew = hnew.min(hh);
            }
            facold = err.max(1e-4);

            let mut coef = Vec::with_capacity(5 * n);
            coef.extend_from_slice(&y);
            let r2: Vec<f64> = (0..n).map(|i| y1[i] - y[i]).collect();
            let r3: Vec<f64> = (0..n).map(|i| hs * k1[i] - r2[i]).collect();
            let r4: Vec<f64> = (0..n).map(|i| r2[i] - hs * k7[i] - r3[i]).collect();
            let r5: Vec<f64> = (0..n)
                .map(|i| {
                    hs * (D1 * k1[i]
                        + D3 * k3[i]
                        + D4 * k4[i]
                        + D5 * k5[i]
                        + D6 * k6[i]
                        + D7 * k7[i])
                })
                .collect();
            coef.extend(r2);
            coef.extend(r3);
            coef.extend(r4);
            coef.extend(r5);
            let step = DenseStep {
                t0: t,
                h: hs,
                n,
                coef,
            };
            t = if last { t_end } else { t + hs };
            y = y1;
            k1 = k7;
            h = hnew;
            last_rejected = false;
            if observe(&step) {
                return (Stop::Observer, t, y);
            }
        } else {
            h = hh / (1.0 / FAC_MIN).min(fac11 / SAFE);
            last_rejected = true;
        }
    }
}
