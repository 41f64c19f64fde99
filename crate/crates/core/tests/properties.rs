use proptest::prelude::*;

use intflow::cli::output::{csv_header, csv_line};
use intflow::cli::RunConfig;
use intflow::fields::{build_field, check_condition_mu, orthogonality_residual};
use intflow::flow::{self, IntegratorConfig};
use intflow::maps::{builtin, MapSpec, Params};
use intflow::rotation::{
    monotonicity_report, nearby_rational, RowStatus, SweepRow, Verdict, TIE_TOLERANCE,
};
use intflow::vecgeo::{self, Mat};

fn vectors(n: usize, k: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-2.0..2.0f64, n), k)
}

fn lyness(a: f64) -> MapSpec {
    let p: Params = [("a".to_string(), a)].into_iter().collect();
    builtin("lyness", &p).unwrap()
}

fn scale_of(vs: &[Vec<f64>]) -> f64 {
    vs.iter().map(|v| vecgeo::max_abs(v)).fold(1.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cross_is_orthogonal_and_matches_its_determinant(n in 3usize..6, seed in vectors(6, 6)) {
        let ws: Vec<Vec<f64>> = seed[..n - 1].iter().map(|v| v[..n].to_vec()).collect();
        let u = seed[n - 1][..n].to_vec();
        let c = vecgeo::cross(&ws).unwrap();
        let mut rows = vec![u.clone()];
        rows.extend(ws.iter().cloned());
        let d = vecgeo::det(&Mat::from_rows(&rows));
        let s = scale_of(&rows).powi(n as i32);
        prop_assert!((vecgeo::dot(&u, &c) - d).abs() <= 1e-10 * s);
        for w in &ws {
            prop_assert!(vecgeo::dot(w, &c).abs() <= 1e-10 * s);
        }
    }

    #[test]
    fn cross_is_antisymmetric_and_linear(n in 3usize..6, seed in vectors(6, 6), t in -3.0..3.0f64) {
        let ws: Vec<Vec<f64>> = seed[..n - 1].iter().map(|v| v[..n].to_vec()).collect();
        let c = vecgeo::cross(&ws).unwrap();
        let s = scale_of(&ws).powi(n as i32) * (1.0 + t.abs());
        let mut swapped = ws.clone();
        swapped.swap(0, n - 2);
        let cs = vecgeo::cross(&swapped).unwrap();
        prop_assert!(vecgeo::dist(&cs, &vecgeo::scale(&c, -1.0)) <= 1e-10 * s);
        let mut scaled = ws.clone();
        scaled[0] = vecgeo::add(&vecgeo::scale(&ws[0], t), &seed[5][..n]);
        let mut other = ws.clone();
        other[0] = seed[5][..n].to_vec();
        let lhs = vecgeo::cross(&scaled).unwrap();
        let rhs = vecgeo::add(&vecgeo::scale(&c, t), &vecgeo::cross(&other).unwrap());
        prop_assert!(vecgeo::dist(&lhs, &rhs) <= 1e-10 * s);
    }

    #[test]
    fn cross_pushes_forward_through_a_matrix(n in 3usize..6, a in vectors(5, 5), ws in vectors(5, 4)) {
        let a = Mat::from_rows(&a.iter().take(n).map(|r| r[..n].to_vec()).collect::<Vec<_>>());
        let ws: Vec<Vec<f64>> = ws.iter().take(n - 1).map(|w| w[..n].to_vec()).collect();
        let at = a.transpose();
        let pulled: Vec<Vec<f64>> = ws.iter().map(|w| at.mul_vec(w)).collect();
        let lhs = a.mul_vec(&vecgeo::cross(&pulled).unwrap());
        let rhs = vecgeo::scale(&vecgeo::cross(&ws).unwrap(), a.det());
        let s = 2f64.powi(2 * n as i32) * (n as f64).powi(n as i32);
        prop_assert!(vecgeo::dist(&lhs, &rhs) <= 1e-9 * s.max(vecgeo::max_abs(&lhs)));
    }

    #[test]
    fn lyness_round_trips_and_keeps_its_integral(a in 0.2..5.0f64, x in 0.05..20.0f64, y in 0.05..20.0f64) {
        let m = lyness(a);
        let p = [x, y];
        let q = m.forward(&p);
        prop_assert!(vecgeo::dist(&m.inverse(&q), &p) <= 1e-12 * (1.0 + vecgeo::norm(&p)));
        let v = &m.integrals()[0];
        prop_assert!((v.eval(&q) - v.eval(&p)).abs() <= 1e-12 * v.eval(&p).abs().max(1.0));
        let mu = &m.multiplier("xy").unwrap().field;
        prop_assert!(check_condition_mu(&m, mu, &p).unwrap().relative <= 1e-12);
        let xf = build_field(&m, mu).unwrap();
        prop_assert!(orthogonality_residual(&xf, &p).relative <= 1e-12);
    }

    #[test]
    fn flow_composes(x in 0.3..4.0f64, y in 0.3..4.0f64, s in 0.0..1.0f64, t in -1.0..1.0f64) {
        let m = lyness(2.0);
        let xf = build_field(&m, &m.multiplier("xy").unwrap().field).unwrap();
        let cfg = IntegratorConfig::default();
        let p = [x, y];
        let once = flow::integrate(&xf, &p, s + t, &cfg).unwrap();
        let twice = flow::integrate(&xf, &flow::integrate(&xf, &p, t, &cfg).unwrap(), s, &cfg).unwrap();
        prop_assert!(vecgeo::dist(&once, &twice) <= 1e-8 * (1.0 + vecgeo::norm(&once)));
    }

    #[test]
    fn verdict_agrees_with_pairwise_order(rhos in prop::collection::vec(0.0..0.5f64, 3..12)) {
        let rows: Vec<SweepRow> = rhos.iter().enumerate().map(|(i, &r)| row(i as f64, r)).collect();
        let rep = monotonicity_report(&rows, None).unwrap();
        let inc = rhos.windows(2).all(|w| w[1] - w[0] > TIE_TOLERANCE);
        let dec = rhos.windows(2).all(|w| w[0] - w[1] > TIE_TOLERANCE);
        let want = if inc { Verdict::Increasing } else if dec { Verdict::Decreasing } else { Verdict::NonMonotonic };
        prop_assert_eq!(rep.verdict, want);
        prop_assert_eq!(rep.violations.is_empty(), inc || dec);
        for &(i, j) in &rep.violations {
            prop_assert_eq!(j, i + 1);
            prop_assert!(j <= rhos.len());
        }
    }

    #[test]
    fn rational_detection_is_exact(k in 1u32..13, j in 0u32..13) {
        prop_assume!(j <= k);
        let rho = j as f64 / k as f64;
        let (jj, kk) = nearby_rational(rho, 12, 1e-9).unwrap();
        prop_assert!(((jj * k) as i64 - (j * kk) as i64) == 0);
        prop_assert!(kk <= k);
    }

    #[test]
    fn csv_rows_have_header_width(dim in 2usize..5, vals in prop::collection::vec(-1e6..1e6f64, 12), m in prop::option::of(1usize..5)) {
        let r = SweepRow {
            h: vals[..dim - 1].to_vec(),
            seed: vals[4..4 + dim].to_vec(),
            period: vals[9],
            tau: vals[10],
            rho: f64::NAN,
            multiplicity: m,
            res_mu: vals[11].abs(),
            res_x: 0.0,
            res_v: f64::NAN,
            status: RowStatus::Failed,
        };
        let line = csv_line(&r);
        prop_assert_eq!(line.split(',').count(), csv_header(dim).split(',').count());
        prop_assert!(!line.contains('\n'));
    }

    #[test]
    fn config_values_survive_parsing(count in 1usize..1000, tol in 1e-14..1e-6f64, a in 0.1..10.0f64) {
        let text = format!("[map]\nname = lyness\na = {a}\n[sweep]\ncount = {count}\n[integrator]\nrel_tol = {tol:e}\n");
        let c = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(c.count, count);
        prop_assert_eq!(c.integrator.rel_tol, tol);
        prop_assert_eq!(c.params["a"], a);
    }
}

fn row(h: f64, rho: f64) -> SweepRow {
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
