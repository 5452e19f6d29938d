mod common;

use common::{seeded_data, toy_closed_form, toy_grid, two_sample_1d};
use eel_core::simulate::example1;
use eel_core::{oel_logratio, solve_profile, OelSolver, RowMatrix, SolverOptions, TwoSampleData};
use proptest::prelude::*;

fn toy() -> TwoSampleData {
    TwoSampleData::univariate(&[0.0, 1.0], &[2.0, 3.0]).unwrap()
}

#[test]
fn toy_matches_closed_form_and_grid() {
    let data = toy();
    let opts = SolverOptions::default();
    let l = oel_logratio(&data, &[2.5], &opts);
    assert!((l - toy_closed_form(2.5)).abs() < 1e-9, "{l}");
    assert!((l - toy_grid(2.5, 1_000_000)).abs() < 1e-6, "{l}");
    for &t in &[1.2, 1.9, 2.0, 2.3, 2.99] {
        let l = oel_logratio(&data, &[t], &opts);
        assert!((l - toy_closed_form(t)).abs() < 1e-8 * (1.0 + l), "theta {t}: {l}");
    }
}

#[test]
fn toy_exterior_and_boundary_are_infinite() {
    let data = toy();
    let opts = SolverOptions::default();
    for &t in &[0.5, 1.0, 3.0, 3.5, -10.0] {
        assert_eq!(oel_logratio(&data, &[t], &opts), f64::INFINITY, "theta {t}");
    }
}

#[test]
fn primal_and_dual_agree_on_bivariate_data() {
    let (x, y) = example1();
    let data = seeded_data(&x, &y, 20, 20, 7);
    let opts = SolverOptions::default();
    let theta = {
        let c = data.mele();
        vec![c[0] - 0.3, c[1] + 0.2]
    };
    let sol = solve_profile(&data, &theta, &opts).unwrap();
    assert!(sol.converged);
    assert!(sol.p.iter().chain(&sol.q).all(|&w| w > 0.0));
    assert!((sol.p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    assert!((sol.q.iter().sum::<f64>() - 1.0).abs() < 1e-10);

    let mut diff = vec![0.0; 2];
    for (w, row) in sol.p.iter().zip(data.x().iter_rows()) {
        for c in 0..2 {
            diff[c] -= w * row[c];
        }
    }
    for (w, row) in sol.q.iter().zip(data.y().iter_rows()) {
        for c in 0..2 {
            diff[c] += w * row[c];
        }
    }
    for c in 0..2 {
        assert!((diff[c] - theta[c]).abs() < 1e-8, "{diff:?}");
    }

    let primal = sol.primal_log_ratio();
    assert!((primal - sol.log_ratio).abs() < 1e-8, "{primal} vs {}", sol.log_ratio);
    let (m, n) = (20.0_f64, 20.0_f64);
    let from_dual = -2.0 * (sol.dual_value + m * m.ln() + n * n.ln());
    assert!((from_dual - sol.log_ratio).abs() < 1e-8, "{from_dual} vs {}", sol.log_ratio);
}

#[test]
fn zero_at_mele_only() {
    let (x, y) = example1();
    let data = seeded_data(&x, &y, 15, 12, 3);
    let opts = SolverOptions::default();
    let c = data.mele();
    assert!(oel_logratio(&data, &c, &opts).abs() < 1e-12);
    assert!(oel_logratio(&data, &[c[0] + 0.05, c[1]], &opts) > 0.0);
}

#[test]
fn blows_up_toward_boundary() {
    let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() + 0.01 * i as f64).collect();
    let y: Vec<f64> = (0..50).map(|i| (i as f64 * 0.61).cos() + 0.5).collect();
    let data = TwoSampleData::univariate(&x, &y).unwrap();
    let opts = SolverOptions::default();
    let min_x = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_y = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let edge = max_y - min_x;
    let mut prev = 0.0;
    for k in 1..=6 {
        let l = oel_logratio(&data, &[edge - 10f64.powi(-k)], &opts);
        assert!(l.is_finite() && l > prev, "k {k}: {l}");
        prev = l;
    }
    assert!(prev > 1e3);
}

#[test]
fn warm_start_reproduces_cold_start() {
    let (x, y) = example1();
    let data = seeded_data(&x, &y, 20, 20, 11);
    let solver = OelSolver::new(&data, SolverOptions::default()).unwrap();
    let c = data.mele();
    let a = solver.solve(&[c[0] + 0.2, c[1]]).unwrap();
    let target = [c[0] + 0.3, c[1] - 0.1];
    let cold = solver.solve(&target).unwrap();
    let warm = solver.solve_from(&target, Some(&a.state)).unwrap();
    assert!((cold.log_ratio - warm.log_ratio).abs() < 1e-9);
}

#[test]
fn rank_deficient_data_rejected() {
    let x = RowMatrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]).unwrap();
    let y = RowMatrix::from_rows(&[[0.5, 0.5], [1.5, 1.5], [2.5, 2.5], [0.2, 0.2]]).unwrap();
    let data = TwoSampleData::new(x, y).unwrap();
    assert!(OelSolver::new(&data, SolverOptions::default()).is_err());
    assert_eq!(oel_logratio(&data, &[0.1, 0.1], &SolverOptions::default()), f64::INFINITY);
}

fn sample_vec(len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn univariate_matches_profile_oracle(x in sample_vec(3..=5), y in sample_vec(3..=5), u in 0.05..0.95f64) {
        let data = TwoSampleData::univariate(&x, &y).unwrap();
        let lo = y.iter().cloned().fold(f64::INFINITY, f64::min) - x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(hi - lo > 1e-3);
        let theta = lo + u * (hi - lo);
        let l = oel_logratio(&data, &[theta], &SolverOptions::default());
        let oracle = two_sample_1d(&x, &y, theta);
        prop_assert!((l - oracle).abs() < 1e-6 * (1.0 + oracle), "{} vs {}", l, oracle);
    }

    #[test]
    fn nonnegative_and_shift_invariant(x in sample_vec(4..=8), y in sample_vec(4..=8), t in -4.0..4.0f64, b in -5.0..5.0f64) {
        let opts = SolverOptions::default();
        let data = TwoSampleData::univariate(&x, &y).unwrap();
        let l = oel_logratio(&data, &[t], &opts);
        prop_assert!(l >= 0.0);
        let xs: Vec<f64> = x.iter().map(|v| v + b).collect();
        let ys: Vec<f64> = y.iter().map(|v| v + b).collect();
        let shifted = oel_logratio(&TwoSampleData::univariate(&xs, &ys).unwrap(), &[t], &opts);
        if l.is_finite() {
            prop_assert!((l - shifted).abs() < 1e-7 * (1.0 + l), "{} vs {}", l, shifted);
        } else {
            prop_assert!(!shifted.is_finite() || shifted > 1e5);
        }
    }

    #[test]
    fn linear_equivariance(seed in 0u64..1000, a11 in 0.5..2.0f64, a12 in -1.0..1.0f64, a21 in -1.0..1.0f64, a22 in 0.5..2.0f64, u in -0.4..0.4f64, v in -0.4..0.4f64) {
        prop_assume!((a11 * a22 - a12 * a21).abs() > 0.2);
        let (xd, yd) = example1();
        let data = seeded_data(&xd, &yd, 15, 15, seed);
        let opts = SolverOptions::default();
        let c = data.mele();
        let theta = [c[0] + u, c[1] + v];
        let map = |r: &[f64], out: &mut [f64]| {
            out[0] = a11 * r[0] + a12 * r[1] + 1.0;
            out[1] = a21 * r[0] + a22 * r[1] - 2.0;
        };
        let mapped = TwoSampleData::new(data.x().map_rows(2, map), data.y().map_rows(2, map)).unwrap();
        let at = [a11 * theta[0] + a12 * theta[1], a21 * theta[0] + a22 * theta[1]];
        let l = oel_logratio(&data, &theta, &opts);
        let lm = oel_logratio(&mapped, &at, &opts);
        if l.is_finite() && l < 1e4 {
            prop_assert!((l - lm).abs() < 1e-7 * (1.0 + l), "{} vs {}", l, lm);
        }
    }

    #[test]
    fn increases_along_rays(seed in 0u64..1000, phi in 0.0..std::f64::consts::TAU) {
        let (xd, yd) = example1();
        let data = seeded_data(&xd, &yd, 12, 12, seed);
        let opts = SolverOptions::default();
        let c = data.mele();
        let (s, co) = phi.sin_cos();
        let mut prev = 0.0;
        for k in 1..=40 {
            let r = 0.05 * k as f64;
            let l = oel_logratio(&data, &[c[0] + r * co, c[1] + r * s], &opts);
            if !l.is_finite() {
                break;
            }
            prop_assert!(l >= prev - 1e-9, "r {}: {} < {}", r, l, prev);
            prev = l;
        }
    }

    #[test]
    fn sample_order_is_irrelevant(x in sample_vec(4..=7), y in sample_vec(4..=7), t in -3.0..3.0f64) {
        let opts = SolverOptions::default();
        let a = oel_logratio(&TwoSampleData::univariate(&x, &y).unwrap(), &[t], &opts);
        let xr: Vec<f64> = x.iter().rev().cloned().collect();
        let yr: Vec<f64> = y.iter().rev().cloned().collect();
        let b = oel_logratio(&TwoSampleData::univariate(&xr, &yr).unwrap(), &[t], &opts);
        if a.is_finite() {
            prop_assert!((a - b).abs() < 1e-8 * (1.0 + a));
        } else {
            prop_assert!(!b.is_finite());
        }
    }
}
