//! The compiled-in example maps.

use std::sync::Arc;

use super::DOMAIN_MARGIN;
use super::{MapError, MapSpec, MultiplierSpec, Params, SampleRegion, ScalarField, SigmaClass};
use crate::vecgeo::Mat;

pub const BUILTIN_NAMES: [&str; 6] = [
    "lyness",
    "gumovski_mira",
    "kulenovic",
    "tilde_lyness",
    "todd",
    "hky_y1",
];

/// Builds a built-in map. Missing parameters take their defaults; unknown
/// keys are rejected.
pub fn builtin(name: &str, params: &Params) -> Result<MapSpec, MapError> {
    match name {
        "lyness" => {
            let [a] = read(name, params, [("a", 1.0)])?;
            positive(name, "a", a)?;
            Ok(lyness(a))
        }
        "gumovski_mira" => {
            let [a, b, c] = read(name, params, [("A", 1.0), ("B", 1.0), ("C", 0.0)])?;
            gumovski_mira(a, b, c)
        }
        "kulenovic" => {
            let [a, b, c, d] = read(
                name,
                params,
                [("a", 2.0), ("b", 1.0), ("c", 1.0), ("d", 1.0)],
            )?;
            for (k, v) in [("a", a), ("b", b), ("c", c), ("d", d)] {
                positive(name, k, v)?;
            }
            if (a * d - b * c).abs() <= 1e-12 * (a * d).abs().max(1.0) {
                return Err(MapError::InvalidParam {
                    map: name.into(),
                    key: "d".into(),
                    value: d,
                    reason: "ad = bc makes the recurrence degenerate",
                });
            }
            Ok(kulenovic(a, b, c, d))
        }
        "tilde_lyness" => {
            let [a] = read(name, params, [("a", 3.0)])?;
            Ok(tilde_lyness(a))
        }
        "todd" => {
            let [a] = read(name, params, [("a", 1.0)])?;
            positive(name, "a", a)?;
            Ok(todd(a))
        }
        "hky_y1" => {
            let [] = read(name, params, [])?;
            Ok(hky_y1())
        }
        _ => Err(MapError::UnknownMap(name.to_string())),
    }
}

fn read<const K: usize>(
    map: &str,
    params: &Params,
    keys: [(&str, f64); K],
) -> Result<[f64; K], MapError> {
    if let Some(bad) = params.keys().find(|k| !keys.iter().any(|(n, _)| n == k)) {
        return Err(MapError::UnknownParam {
            map: map.into(),
            key: bad.clone(),
        });
    }
    let mut out = [0.0; K];
    for (slot, (key, default)) in out.iter_mut().zip(keys) {
        let v = params.get(key).copied().unwrap_or(default);
        if !v.is_finite() {
            return Err(MapError::InvalidParam {
                map: map.into(),
                key: key.into(),
                value: v,
                reason: "must be finite",
            });
        }
        *slot = v;
    }
    Ok(out)
}

fn positive(map: &str, key: &str, v: f64) -> Result<(), MapError> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(MapError::InvalidParam {
            map: map.into(),
            key: key.into(),
            value: v,
            reason: "must be positive",
        })
    }
}

fn params_of(pairs: &[(&str, f64)]) -> Params {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn positive_cone(p: &[f64], margin: f64) -> bool {
    p.iter().all(|&x| x > margin)
}

/// Single positive root of a polynomial that is negative at 0 and
/// increasing past its positive root, by bisection.
fn positive_root(f: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Real roots of `t^3 + p t + q = 0`, ascending.
fn depressed_cubic_roots(p: f64, q: f64) -> Vec<f64> {
    if p == 0.0 && q == 0.0 {
        return vec![0.0];
    }
    let disc = -(4.0 * p * p * p + 27.0 * q * q);
    let mut roots = if disc > 0.0 {
        let r = 2.0 * (-p / 3.0).sqrt();
        let phi = ((3.0 * q) / (p * r)).clamp(-1.0, 1.0).acos() / 3.0;
        (0..3)
            .map(|k| r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos())
            .collect::<Vec<_>>()
    } else {
        let s = (q * q / 4.0 + p * p * p / 27.0).max(0.0).sqrt();
        vec![(-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt()]
    };
    // one Newton polish per root
    for t in roots.iter_mut() {
        let d = 3.0 * *t * *t + p;
        if d != 0.0 {
            *t -= (*t * *t * *t + p * *t + q) / d;
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    roots
}

fn diag(v: f64, n: usize) -> Vec<f64> {
    vec![v; n]
}

fn lyness(a: f64) -> MapSpec {
    let xc = 0.5 * (1.0 + (1.0 + 4.0 * a).sqrt());
    let v = ScalarField::new(
        "V",
        move |p| {
            let (x, y) = (p[0], p[1]);
            (x + 1.0) * (y + 1.0) * (x + y + a) / (x * y)
        },
        move |p| {
            let (x, y) = (p[0], p[1]);
            vec![
                (y + 1.0) * (x * x - y - a) / (x * x * y),
                (x + 1.0) * (y * y - x - a) / (y * y * x),
            ]
        },
    );
    let xy = ScalarField::new("xy", |p| p[0] * p[1], |p| vec![p[1], p[0]]);
    MapSpec {
        name: "lyness".into(),
        n: 2,
        params: params_of(&[("a", a)]),
        power: 1,
        margin: DOMAIN_MARGIN,
        domain: Arc::new(positive_cone),
        chart: None,
        forward: Arc::new(move |p| vec![p[1], (a + p[1]) / p[0]]),
        inverse: Arc::new(move |p| vec![(a + p[0]) / p[1], p[0]]),
        jacobian: Arc::new(move |p| {
            let (x, y) = (p[0], p[1]);
            Mat::from_rows(&[vec![0.0, 1.0], vec![-(a + y) / (x * x), 1.0 / x]])
        }),
        integrals: vec![v],
        aux: vec![],
        multipliers: vec![MultiplierSpec {
            field: xy,
            claimed_class: SigmaClass::Plus,
        }],
        fixed_points: vec![diag(xc, 2)],
        region: SampleRegion::LogCone { lo: 0.1, hi: 10.0 },
        ray: Some((diag(xc + 0.05, 2), diag(xc + 4.0, 2))),
        portrait_ray: Some((diag(xc + 0.1, 2), diag(xc + 6.0, 2))),
        measure_box: Some((vec![1.0, 1.0], vec![2.0, 2.0])),
        view: [0.0, xc + 8.0, 0.0, xc + 8.0],
        diffeo_counterexample: false,
    }
}

fn gm_integral(a: f64, b: f64, c: f64) -> ScalarField {
    ScalarField::new(
        "V",
        move |p| {
            let (x, y) = (p[0], p[1]);
            x * x * y * y + a * (x * x + y * y) - b * x * y - c * (x + y)
        },
        move |p| {
            let (x, y) = (p[0], p[1]);
            vec![
                2.0 * x * y * y + 2.0 * a * x - b * y - c,
                2.0 * x * x * y + 2.0 * a * y - b * x - c,
            ]
        },
    )
}

fn gumovski_mira(a: f64, b: f64, c: f64) -> Result<MapSpec, MapError> {
    let name = "gumovski_mira";
    let annulus = if a > 0.0 {
        None
    } else if a < 0.0 {
        let amp = (-a).sqrt();
        if b != -2.0 || c != 0.0 {
            return Err(MapError::InvalidParam {
                map: name.into(),
                key: "A".into(),
                value: a,
                reason: "A < 0 is only supported as the family A = -a^2, B = -2, C = 0",
            });
        }
        if amp <= 1.0 {
            return Err(MapError::InvalidParam {
                map: name.into(),
                key: "A".into(),
                value: a,
                reason: "A = -a^2 needs a > 1 (a = 1 leaves no period annulus)",
            });
        }
        Some(amp)
    } else {
        return Err(MapError::InvalidParam {
            map: name.into(),
            key: "A".into(),
            value: a,
            reason: "A = 0 makes the map singular at y = 0",
        });
    };

    let g = move |y: f64| (b * y + c) / (y * y + a);
    let dg = move |y: f64| {
        let den = y * y + a;
        (b * den - 2.0 * y * (b * y + c)) / (den * den)
    };
    let v = gm_integral(a, b, c);
    let one = ScalarField::constant("one", 2, 1.0);

    let mut spec = MapSpec {
        name: name.into(),
        n: 2,
        params: params_of(&[("A", a), ("B", b), ("C", c)]),
        power: 1,
        margin: DOMAIN_MARGIN,
        domain: Arc::new(|_, _| true),
        chart: None,
        forward: Arc::new(move |p| vec![p[1], -p[0] + g(p[1])]),
        inverse: Arc::new(move |p| vec![g(p[0]) - p[1], p[0]]),
        jacobian: Arc::new(move |p| Mat::from_rows(&[vec![0.0, 1.0], vec![-1.0, dg(p[1])]])),
        integrals: vec![v.clone()],
        aux: vec![],
        multipliers: vec![
            // the constant first: `V` vanishes at the origin and slows the
            // flow there to a crawl
            MultiplierSpec {
                field: one,
                claimed_class: SigmaClass::Plus,
            },
            MultiplierSpec {
                field: v,
                claimed_class: SigmaClass::Plus,
            },
        ],
        fixed_points: vec![],
        region: SampleRegion::Box {
            lo: vec![-2.0, -2.0],
            hi: vec![2.0, 2.0],
        },
        ray: None,
        portrait_ray: None,
        measure_box: Some((vec![0.5, 0.5], vec![1.0, 1.0])),
        view: [-2.5, 2.5, -2.5, 2.5],
        diffeo_counterexample: false,
    };

    match annulus {
        None => {
            // fixed points lie on the diagonal: 2x^3 + (2A - B)x - C = 0
            let roots = depressed_cubic_roots((2.0 * a - b) / 2.0, -c / 2.0);
            spec.fixed_points = roots.iter().map(|&r| diag(r, 2)).collect();
            if c == 0.0 && b > 2.0 * a {
                // two centers inside a figure-eight separatrix through the origin
                let center = ((b - 2.0 * a) / 2.0).sqrt();
                let lobe = (b - 2.0 * a).sqrt();
                spec.fixed_points = vec![diag(center, 2), diag(-center, 2), diag(0.0, 2)];
                spec.ray = Some((diag(center + 0.02, 2), diag(lobe - 0.02, 2)));
                spec.portrait_ray = Some((diag(-2.0, 2), diag(2.0, 2)));
            } else if c == 0.0 {
                spec.fixed_points = vec![diag(0.0, 2)];
                spec.ray = Some((vec![0.02, 0.0], vec![1.5, 0.0]));
                spec.portrait_ray = Some((vec![0.1, 0.0], vec![2.2, 0.0]));
            }
        }
        Some(amp) => {
            let s = (amp * amp - 1.0).sqrt();
            spec.domain = Arc::new(move |p, margin| {
                let (x, y) = (p[0], p[1]);
                if x.abs() >= s - margin {
                    return false;
                }
                let lower = (-amp * x + amp * amp - 1.0) / (x - amp);
                let upper = (amp * x + amp * amp - 1.0) / (x + amp);
                y > lower + margin && y < upper - margin
            });
            spec.fixed_points = vec![diag(0.0, 2)];
            spec.region = SampleRegion::Box {
                lo: vec![-s, -s],
                hi: vec![s, s],
            };
            let xmax = (amp * amp - 1.0) / amp;
            spec.ray = Some((vec![0.02, 0.0], vec![0.9 * xmax, 0.0]));
            spec.portrait_ray = Some((vec![0.05, 0.0], vec![0.97 * xmax, 0.0]));
            spec.measure_box = Some((vec![0.1, 0.1], vec![0.4, 0.4]));
            spec.view = [-s - 0.3, s + 0.3, -s - 0.3, s + 0.3];
        }
    }
    Ok(spec)
}

fn kulenovic(a: f64, b: f64, c: f64, d: f64) -> MapSpec {
    let r = move |y: f64| (a * y + b) / (c * y + d);
    let dr = move |y: f64| (a * d - b * c) / ((c * y + d) * (c * y + d));
    let num = move |x: f64, y: f64| {
        (d + c * x) * (d * x + a) * y * y
            + (a * a + b * d + x * x * (a * c + d * d)) * y
            + (d * x + a) * (a * x + b)
    };
    let num_grad = move |x: f64, y: f64| {
        [
            (c * (d * x + a) + d * (d + c * x)) * y * y
                + 2.0 * x * (a * c + d * d) * y
                + d * (a * x + b)
                + a * (d * x + a),
            2.0 * (d + c * x) * (d * x + a) * y + a * a + b * d + x * x * (a * c + d * d),
        ]
    };
    let v = ScalarField::new(
        "V",
        move |p| num(p[0], p[1]) / (p[0] * p[1]),
        move |p| {
            let (x, y) = (p[0], p[1]);
            let val = num(x, y) / (x * y);
            let g = num_grad(x, y);
            vec![g[0] / (x * y) - val / x, g[1] / (x * y) - val / y]
        },
    );
    let xy = ScalarField::new("xy", |p| p[0] * p[1], |p| vec![p[1], p[0]]);
    let xyv = ScalarField::new(
        "xyV",
        move |p| num(p[0], p[1]),
        move |p| num_grad(p[0], p[1]).to_vec(),
    );
    let xc = positive_root(|x| c * x * x * x + d * x * x - a * x - b);
    MapSpec {
        name: "kulenovic".into(),
        n: 2,
        params: params_of(&[("a", a), ("b", b), ("c", c), ("d", d)]),
        power: 1,
        margin: DOMAIN_MARGIN,
        domain: Arc::new(positive_cone),
        chart: None,
        forward: Arc::new(move |p| vec![p[1], r(p[1]) / p[0]]),
        inverse: Arc::new(move |p| vec![r(p[0]) / p[1], p[0]]),
        jacobian: Arc::new(move |p| {
            let (x, y) = (p[0], p[1]);
            Mat::from_rows(&[vec![0.0, 1.0], vec![-r(y) / (x * x), dr(y) / x]])
        }),
        integrals: vec![v],
        aux: vec![],
        multipliers: vec![
            MultiplierSpec {
                field: xy,
                claimed_class: SigmaClass::Plus,
            },
            MultiplierSpec {
                field: xyv,
                claimed_class: SigmaClass::Plus,
            },
        ],
        fixed_points: vec![diag(xc, 2)],
        region: SampleRegion::LogCone { lo: 0.1, hi: 10.0 },
        ray: Some((diag(xc + 0.05, 2), diag(xc + 4.0, 2))),
        portrait_ray: Some((diag(xc + 0.1, 2), diag(xc + 5.0, 2))),
        measure_box: Some((vec![1.0, 1.0], vec![2.0, 2.0])),
        view: [0.0, xc + 8.0, 0.0, xc + 8.0],
        diffeo_counterexample: false,
    }
}

fn tilde_lyness(a: f64) -> MapSpec {
    // coordinates are (y, z)
    let h = ScalarField::new(
        "H",
        move |p| {
            let (y, z) = (p[0], p[1]);
            (1.0 + y + z) * (y + a - 1.0) / z
        },
        move |p| {
            let (y, z) = (p[0], p[1]);
            vec![(2.0 * y + z + a) / z, -(y + a - 1.0) * (1.0 + y) / (z * z)]
        },
    );
    let mu = ScalarField::new(
        "zz1",
        |p| p[1] * (1.0 + p[1]),
        |p| vec![0.0, 1.0 + 2.0 * p[1]],
    );
    MapSpec {
        name: "tilde_lyness".into(),
        n: 2,
        params: params_of(&[("a", a)]),
        power: 1,
        margin: DOMAIN_MARGIN,
        domain: Arc::new(move |p, margin| p[1].abs() > margin && (a + p[0] + p[1]).abs() > margin),
        chart: Some(Arc::new(move |p| {
            (p[1] > 0.0) as u32 | ((a + p[0] + p[1] > 0.0) as u32) << 1
        })),
        forward: Arc::new(move |p| {
            let (y, z) = (p[0], p[1]);
            vec![
                -(1.0 + y + z) / z,
                (1.0 + y + (2.0 - a) * z) / (z * (a + y + z)),
            ]
        }),
        inverse: Arc::new(move |p| {
            let (u, v) = (p[0], p[1]);
            let z = (a * v + a + u - v - 1.0) / (u * v);
            vec![-1.0 - (u + 1.0) * z, z]
        }),
        jacobian: Arc::new(move |p| {
            let (y, z) = (p[0], p[1]);
            let num = 1.0 + y + (2.0 - a) * z;
            let den = z * (a + y + z);
            let den2 = den * den;
            Mat::from_rows(&[
                vec![-1.0 / z, (1.0 + y) / (z * z)],
                vec![
                    (den - num * z) / den2,
                    ((2.0 - a) * den - num * (a + y + 2.0 * z)) / den2,
                ],
            ])
        }),
        integrals: vec![h],
        aux: vec![],
        multipliers: vec![MultiplierSpec {
            field: mu,
            claimed_class: SigmaClass::Plus,
        }],
        fixed_points: vec![],
        region: SampleRegion::Box {
            lo: vec![-4.0, -4.0],
            hi: vec![4.0, 4.0],
        },
        ray: Some((vec![0.5, 0.5], vec![2.5, 2.5])),
        portrait_ray: Some((vec![0.3, 0.3], vec![4.0, 4.0])),
        measure_box: None,
        view: [-6.0, 6.0, -6.0, 6.0],
        diffeo_counterexample: true,
    }
}

fn todd_g(a: f64) -> ScalarField {
    ScalarField::new(
        "G",
        move |p| {
            let (x, y, z) = (p[0], p[1], p[2]);
            -y * y * y - (x + a + 1.0 + z) * y * y - (a + x + z) * y
                + x * x * z * z
                + x * z
                + x * x * z
                + x * z * z
        },
        move |p| {
            let (x, y, z) = (p[0], p[1], p[2]);
            vec![
                -y * y - y + 2.0 * x * z * z + z + 2.0 * x * z + z * z,
                -3.0 * y * y - 2.0 * (x + a + 1.0 + z) * y - (a + x + z),
                -y * y - y + 2.0 * x * x * z + x + x * x + 2.0 * x * z,
            ]
        },
    )
}

fn xyz_field() -> ScalarField {
    ScalarField::new(
        "xyz",
        |p| p[0] * p[1] * p[2],
        |p| vec![p[1] * p[2], p[0] * p[2], p[0] * p[1]],
    )
}

fn todd(a: f64) -> MapSpec {
    let v1 = ScalarField::new(
        "V1",
        move |p| {
            let (x, y, z) = (p[0], p[1], p[2]);
            (x + 1.0) * (y + 1.0) * (z + 1.0) * (a + x + y + z) / (x * y * z)
        },
        move |p| {
            let (x, y, z) = (p[0], p[1], p[2]);
            let t = a + x + y + z;
            vec![
                (y + 1.0) * (z + 1.0) * (x * x + x - t) / (x * x * y * z),
                (x + 1.0) * (z + 1.0) * (y * y + y - t) / (x * y * y * z),
                (x + 1.0) * (y + 1.0) * (z * z + z - t) / (x * y * z * z),
            ]
        },
    );
    let v2 = ScalarField::new(
        "V2",
        move |p| {
            let (x, y, z) = (p[0], p[1], p[2]);
            (1.0 + y + z) * (1.0 + x + y) * (a + x + y + z + x * z) / (x * y * z)
        },
        move |p| {
            let (x, y, z) = (p[0], p[1], p[2]);
            let (pp, q, r) = (1.0 + y + z, 1.0 + x + y, a + x + y + z + x * z);
            vec![
                pp * (x * (r + q * (1.0 + z)) - q * r) / (x * x * y * z),
                (y * (q * r + pp * r + pp * q) - pp * q * r) / (x * y * y * z),
                q * (z * (r + pp * (1.0 + x)) - pp * r) / (x * y * z * z),
            ]
        },
    );
    let g = todd_g(a);
    let g2 = g.clone();
    let mu_tilde = ScalarField::new(
        "mu_tilde",
        {
            let g = g.clone();
            move |p| {
                let s = p[0] * p[1] * p[2];
                s * s / g.eval(p)
            }
        },
        move |p| {
            let s = p[0] * p[1] * p[2];
            let gv = g2.eval(p);
            let gg = g2.grad(p);
            let m = s * s / gv;
            (0..3).map(|i| m * (2.0 / p[i] - gg[i] / gv)).collect()
        },
    );
    let xc = 1.0 + (1.0 + a).sqrt();
    MapSpec {
        name: "todd".into(),
        n: 3,
        params: params_of(&[("a", a)]),
        power: 1,
        margin: DOMAIN_MARGIN,
        domain: Arc::new(positive_cone),
        chart: None,
        forward: Arc::new(move |p| vec![p[1], p[2], (a + p[1] + p[2]) / p[0]]),
        inverse: Arc::new(move |p| vec![(a + p[0] + p[1]) / p[2], p[0], p[1]]),
        jacobian: Arc::new(move |p| {
            let (x, y, z) = (p[0], p[1], p[2]);
            Mat::from_rows(&[
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
                vec![-(a + y + z) / (x * x), 1.0 / x, 1.0 / x],
            ])
        }),
        integrals: vec![v1, v2],
        aux: vec![g.clone()],
        multipliers: vec![
            MultiplierSpec {
                field: xyz_field(),
                claimed_class: SigmaClass::Minus,
            },
            MultiplierSpec {
                field: g,
                claimed_class: SigmaClass::Plus,
            },
            MultiplierSpec {
                field: mu_tilde,
                claimed_class: SigmaClass::Plus,
            },
        ],
        fixed_points: vec![diag(xc, 3)],
        region: SampleRegion::LogCone { lo: 0.1, hi: 10.0 },
        ray: Some((vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 8.0])),
        portrait_ray: Some((vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 8.0])),
        measure_box: Some((vec![1.0, 1.0, 1.0], vec![2.0, 2.0, 2.0])),
        view: [0.0, 12.0, 0.0, 12.0],
        diffeo_counterexample: false,
    }
}

fn hky_y1() -> MapSpec {
    let rr = |y: f64, z: f64| (y + 1.0) * (z + 1.0) / (1.0 + y + z);
    let i1 = ScalarField::new(
        "I1",
        |p| {
            let (x, y, z) = (p[0], p[1], p[2]);
            (1.0 + x + y + z + x * y + y * z + x * y * z) / (x * z)
        },
        |p| {
            let (x, y, z) = (p[0], p[1], p[2]);
            let v = (1.0 + x + y + z + x * y + y * z + x * y * z) / (x * z);
            vec![
                (1.0 + y + y * z) / (x * z) - v / x,
                (1.0 + x + z + x * z) / (x * z),
                (1.0 + y + x * y) / (x * z) - v / z,
            ]
        },
    );
    let i2 = ScalarField::new(
        "I2",
        |p| {
            let (x, y, z) = (p[0], p[1], p[2]);
            (1.0 + x + z + x * y + x * z + y * z) / y
        },
        |p| {
            let (x, y, z) = (p[0], p[1], p[2]);
            let v = (1.0 + x + z + x * y + x * z + y * z) / y;
            vec![(1.0 + y + z) / y, (x + z) / y - v / y, (1.0 + x + y) / y]
        },
    );
    let v1 = {
        let (a, b) = (i1.clone(), i2.clone());
        let (ga, gb) = (i1.clone(), i2.clone());
        ScalarField::new(
            "V1",
            move |p| a.eval(p) + b.eval(p),
            move |p| crate::vecgeo::add(&ga.grad(p), &gb.grad(p)),
        )
    };
    let v2 = i1.product(&i2, "V2");
    let g = ScalarField::new(
        "G",
        |p| {
            let (x, y, z) = (p[0], p[1], p[2]);
            -(1.0 + x) * (1.0 + z) * y * y
                + (x * x * z + (z * z - 1.0) * x - (1.0 + z)) * y
                + x * z * (x + 1.0) * (z + 1.0)
        },
        |p| {
            let (x, y, z) = (p[0], p[1], p[2]);
            vec![
                -(1.0 + z) * y * y
                    + (2.0 * x * z + z * z - 1.0) * y
                    + z * (z + 1.0) * (2.0 * x + 1.0),
                -2.0 * (1.0 + x) * (1.0 + z) * y + x * x * z + (z * z - 1.0) * x - (1.0 + z),
                -(1.0 + x) * y * y
                    + (x * x + 2.0 * z * x - 1.0) * y
                    + x * (x + 1.0) * (2.0 * z + 1.0),
            ]
        },
    );
    let xc = positive_root(|x| 2.0 * x * x * x - 2.0 * x - 1.0);
    MapSpec {
        name: "hky_y1".into(),
        n: 3,
        params: Params::new(),
        power: 1,
        margin: DOMAIN_MARGIN,
        domain: Arc::new(positive_cone),
        chart: None,
        forward: Arc::new(move |p| vec![p[1], p[2], rr(p[1], p[2]) / p[0]]),
        inverse: Arc::new(move |p| vec![rr(p[0], p[1]) / p[2], p[0], p[1]]),
        jacobian: Arc::new(move |p| {
            let (x, y, z) = (p[0], p[1], p[2]);
            let s = 1.0 + y + z;
            Mat::from_rows(&[
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
                vec![
                    -rr(y, z) / (x * x),
                    z * (z + 1.0) / (s * s * x),
                    y * (y + 1.0) / (s * s * x),
                ],
            ])
        }),
        integrals: vec![v1, v2],
        aux: vec![i1, i2, g.clone()],
        multipliers: vec![
            MultiplierSpec {
                field: xyz_field(),
                claimed_class: SigmaClass::Minus,
            },
            MultiplierSpec {
                field: g,
                claimed_class: SigmaClass::Plus,
            },
        ],
        fixed_points: vec![diag(xc, 3)],
        region: SampleRegion::LogCone { lo: 0.1, hi: 10.0 },
        ray: Some((vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 8.0])),
        portrait_ray: Some((vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 8.0])),
        measure_box: Some((vec![1.0, 1.0, 1.0], vec![2.0, 2.0, 2.0])),
        view: [0.0, 12.0, 0.0, 12.0],
        diffeo_counterexample: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vecgeo::{self, numeric_gradient, numeric_jacobian, FD_STEP};

    fn p(pairs: &[(&str, f64)]) -> Params {
        params_of(pairs)
    }

    fn all_builtins() -> Vec<MapSpec> {
        vec![
            builtin("lyness", &p(&[("a", 2.0)])).unwrap(),
            builtin("gumovski_mira", &p(&[("B", 1.0)])).unwrap(),
            builtin("gumovski_mira", &p(&[("B", 3.0)])).unwrap(),
            builtin("gumovski_mira", &p(&[("A", -4.0), ("B", -2.0), ("C", 0.0)])).unwrap(),
            builtin("gumovski_mira", &p(&[("A", 1.0), ("B", 0.7), ("C", 0.4)])).unwrap(),
            builtin("kulenovic", &p(&[])).unwrap(),
            builtin("tilde_lyness", &p(&[("a", 3.0)])).unwrap(),
            builtin("todd", &p(&[("a", 1.0)])).unwrap(),
            builtin("hky_y1", &p(&[])).unwrap(),
        ]
    }

    #[test]
    fn lyness_forward_and_fixed_point() {
        let m = builtin("lyness", &p(&[("a", 1.0)])).unwrap();
        assert_eq!(m.forward(&[1.0, 1.0]), vec![1.0, 2.0]);
        let phi = 0.5 * (1.0 + 5f64.sqrt());
        let fp = &m.known_fixed_points()[0];
        assert!((fp[0] - phi).abs() < 1e-15 && (fp[1] - phi).abs() < 1e-15);
        assert!(vecgeo::dist(&m.forward(fp), fp) < 1e-14);
    }

    #[test]
    fn todd_forward() {
        let m = builtin("todd", &p(&[("a", 1.0)])).unwrap();
        assert_eq!(m.forward(&[1.0, 1.0, 1.0]), vec![1.0, 1.0, 3.0]);
    }

    #[test]
    fn integral_values_examples() {
        let m = builtin("lyness", &p(&[("a", 1.0)])).unwrap();
        assert_eq!(m.integral_values(&[1.0, 1.0]).unwrap(), vec![12.0]);
        let t = builtin("todd", &p(&[("a", 1.0)])).unwrap();
        assert_eq!(
            t.integral_values(&[1.0, 1.0, 1.0]).unwrap(),
            vec![32.0, 45.0]
        );
        assert!(matches!(
            m.integral_values(&[-1.0, 1.0]),
            Err(MapError::OutsideDomain(_))
        ));
    }

    #[test]
    fn jacobian_det_examples() {
        let gm = builtin("gumovski_mira", &p(&[("B", 0.8)])).unwrap();
        for q in gm.sample_points(20, 3) {
            assert!((gm.jacobian_det(&q).unwrap() - 1.0).abs() < 1e-14);
        }
        let a = 2.5;
        let ly = builtin("lyness", &p(&[("a", a)])).unwrap();
        for q in ly.sample_points(20, 4) {
            let expected = (a + q[1]) / (q[0] * q[0]);
            assert!((ly.jacobian_det(&q).unwrap() - expected).abs() < 1e-12 * expected.abs());
        }
        let td = builtin("todd", &p(&[("a", a)])).unwrap();
        for q in td.sample_points(20, 5) {
            let expected = -(a + q[1] + q[2]) / (q[0] * q[0]);
            assert!((td.jacobian_det(&q).unwrap() - expected).abs() < 1e-12 * expected.abs());
        }
    }

    #[test]
    fn rejects_bad_names_and_params() {
        assert!(matches!(
            builtin("unknown", &Params::new()),
            Err(MapError::UnknownMap(_))
        ));
        assert!(matches!(
            builtin("lyness", &p(&[("a", 0.0)])),
            Err(MapError::InvalidParam { .. })
        ));
        assert!(matches!(
            builtin("lyness", &p(&[("b", 1.0)])),
            Err(MapError::UnknownParam { .. })
        ));
        assert!(matches!(
            builtin("gumovski_mira", &p(&[("A", -1.0), ("B", -2.0), ("C", 0.0)])),
            Err(MapError::InvalidParam { .. })
        ));
        assert!(matches!(
            builtin("kulenovic", &p(&[("a", -1.0)])),
            Err(MapError::InvalidParam { .. })
        ));
        assert!(matches!(
            builtin("todd", &p(&[("a", -1.0)])),
            Err(MapError::InvalidParam { .. })
        ));
    }

    #[test]
    fn round_trip_on_domain_samples() {
        for m in all_builtins() {
            for q in m.sample_points(1000, 11) {
                let back = m.inverse(&m.forward(&q));
                let err = vecgeo::dist(&back, &q);
                assert!(
                    err <= 1e-10 * (1.0 + vecgeo::norm(&q)),
                    "{}: {q:?} -> {back:?}",
                    m.label()
                );
                let fwd = m.forward(&m.inverse(&q));
                assert!(vecgeo::dist(&fwd, &q) <= 1e-10 * (1.0 + vecgeo::norm(&q)));
            }
        }
    }

    #[test]
    fn integrals_are_invariant() {
        for m in all_builtins() {
            for q in m.sample_points(100, 12) {
                let before = m.integral_values(&q).unwrap();
                let after: Vec<f64> = m
                    .integrals()
                    .iter()
                    .map(|v| v.eval(&m.forward(&q)))
                    .collect();
                for (b, a) in before.iter().zip(&after) {
                    assert!(
                        (a - b).abs() <= 1e-10 * b.abs().max(1.0),
                        "{}: {b} vs {a} at {q:?}",
                        m.label()
                    );
                }
            }
        }
    }

    #[test]
    fn closed_form_derivatives_match_finite_differences() {
        for m in all_builtins() {
            let mut fields: Vec<ScalarField> = m.integrals().to_vec();
            fields.extend(m.aux_fields().iter().cloned());
            fields.extend(m.multipliers().iter().map(|s| s.field.clone()));
            for q in m.sample_points(100, 13) {
                let f = |x: &[f64]| Some(m.forward(x));
                let num = numeric_jacobian(f, &q, FD_STEP).unwrap();
                let exact = m.jacobian(&q);
                let rel = exact.sub(&num).frobenius() / exact.frobenius().max(1.0);
                assert!(
                    rel <= 1e-5,
                    "{}: jacobian rel err {rel} at {q:?}",
                    m.label()
                );
                for sf in &fields {
                    let g = sf.grad(&q);
                    let ng = numeric_gradient(|x| Some(sf.eval(x)), &q, FD_STEP).unwrap();
                    let rel = vecgeo::dist(&g, &ng) / vecgeo::norm(&g).max(1.0);
                    assert!(
                        rel <= 1e-5,
                        "{} {}: grad rel err {rel}",
                        m.label(),
                        sf.name()
                    );
                }
            }
        }
    }

    #[test]
    fn integrals_are_functionally_independent() {
        for m in all_builtins() {
            let pts = m.sample_points(500, 14);
            let good = pts
                .iter()
                .filter(|q| {
                    let rows: Vec<Vec<f64>> = m.integrals().iter().map(|v| v.grad(q)).collect();
                    vecgeo::rank(&rows, 1e-8) == m.dim() - 1
                })
                .count();
            assert!(
                good * 100 >= pts.len() * 99,
                "{}: {good}/{}",
                m.label(),
                pts.len()
            );
        }
    }

    #[test]
    fn todd_two_periodic_line() {
        let a = 1.0;
        let m = builtin("todd", &p(&[("a", a)])).unwrap();
        for k in 1..50 {
            let x = 1.0 + 0.1 * k as f64;
            let q = vec![x, (x + a) / (x - 1.0), x];
            let back = m.iterate(&q, 2).unwrap();
            assert!(vecgeo::dist(&back, &q) <= 1e-10 * (1.0 + vecgeo::norm(&q)));
        }
    }

    #[test]
    fn fixed_points_are_fixed() {
        for m in all_builtins() {
            for fp in m.known_fixed_points() {
                let img = m.forward(fp);
                assert!(vecgeo::dist(&img, fp) < 1e-12, "{} {fp:?}", m.label());
            }
        }
    }

    #[test]
    fn power_composes() {
        let m = builtin("todd", &p(&[("a", 1.0)])).unwrap();
        let m2 = m.power_of(2);
        assert_eq!(m2.label(), "todd^2");
        let q = [1.0, 2.0, 3.0];
        assert_eq!(m2.forward(&q), m.forward(&m.forward(&q)));
        let j = m2.jacobian(&q);
        let num = numeric_jacobian(|x| Some(m2.forward(x)), &q, FD_STEP).unwrap();
        assert!(j.sub(&num).frobenius() / j.frobenius() < 1e-6);
        assert_eq!(
            m2.multiplier("xyz").unwrap().claimed_class,
            SigmaClass::Plus
        );
    }

    #[test]
    fn cubic_roots() {
        let r = depressed_cubic_roots(-1.0, 0.0);
        assert_eq!(r.len(), 3);
        assert!((r[0] + 1.0).abs() < 1e-14 && r[1].abs() < 1e-14 && (r[2] - 1.0).abs() < 1e-14);
        let r = depressed_cubic_roots(1.0, -2.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 1.0).abs() < 1e-14);
    }
}
