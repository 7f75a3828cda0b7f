//! Randomized invariants.

mod common;

use std::ops::ControlFlow;
use std::sync::Arc;

use common::*;
use ddrom::baselines::{galerkin_project, pod, strong_greedy, GalerkinRom};
use ddrom::linalg::{to_complex, CMat};
use ddrom::measure::{l2_distance, QuadRule};
use ddrom::objective::{fd_gradients, max_relative_deviation, objective_and_gradients};
use ddrom::optim::{l2_opt_psf, quasi_newton_minimize, OptimOptions};
use ddrom::problems::fem::{build_poisson_fom, Grid2D};
use ddrom::problems::lti::random_stable_system;
use ddrom::quadrature::integrate_fixed;
use ddrom::recovery::{recover_projection, RecoveryOptions, RecoveryStatus};
use ddrom::{Complex64, DiscretePoints, Measure, QuadOptions, ScalarFn};
use proptest::prelude::*;
use rand::Rng;

fn scalar_fn() -> impl Strategy<Value = ScalarFn> {
    prop_oneof![
        (-3.0..3.0f64).prop_map(ScalarFn::Constant),
        (0..2usize, 0..6u32, -1.0..1.0f64).prop_map(|(component, exponent, shift)| ScalarFn::Monomial {
            component,
            exponent,
            shift
        }),
        (0..2usize).prop_map(ScalarFn::Cos),
        (0..2usize).prop_map(ScalarFn::Sin),
    ]
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| Complex64::new(a, b))
}

fn rule() -> QuadRule {
    QuadRule::Adaptive(QuadOptions::default())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scalar_functions_commute_with_conjugation(f in scalar_fn(), p0 in complex(), p1 in complex()) {
        let p = [p0, p1];
        let pc = [p0.conj(), p1.conj()];
        let (a, b) = (f.eval(&pc), f.eval(&p).conj());
        prop_assert!((a - b).norm() <= 1e-14 * a.norm().max(1.0));
        let real = f.eval(&[c(p0.re), c(p1.re)]);
        prop_assert_eq!(real.im, 0.0);
    }

    #[test]
    fn operator_is_linear_in_each_coefficient(seed in any::<u64>(), t in 0..3usize, p in complex()) {
        let mut g = rng(seed);
        let m = random_model(&mut g, 3, 3, (1, 1), true);
        let delta = cmat(&mut g, 3, 3, 1.0);
        let op = m.a_op();
        let bumped = {
            let mut k = -1i64;
            op.map_coeffs(|x| {
                k += 1;
                if k as usize == t { x + &delta } else { x.clone() }
            }).unwrap()
        };
        let diff = bumped.eval(&[p]).unwrap() - op.eval(&[p]).unwrap();
        let expect = &delta * op.fns()[t].eval(&[p]);
        prop_assert!((diff - &expect).norm() <= 1e-13 * expect.norm().max(1.0));
    }

    #[test]
    fn state_dual_and_output_satisfy_their_equations(seed in any::<u64>(), complex_model in any::<bool>(), p in complex()) {
        let mut g = rng(seed);
        let m = random_model(&mut g, 4, 3, (2, 3), complex_model);
        let p = [p * 0.4];
        let a = m.a_op().eval(&p).unwrap();
        let b = m.b_op().eval(&p).unwrap();
        let cm = m.c_op().eval(&p).unwrap();
        let node = m.solve_node(&p).unwrap();
        prop_assert!((&a * &node.state - &b).norm() <= 1e-10 * b.norm());
        prop_assert!((a.adjoint() * &node.dual - cm.adjoint()).norm() <= 1e-10 * cm.norm());
        prop_assert!((&cm * &node.state - &node.output).norm() <= 1e-10 * node.output.norm().max(1e-300));
    }

    #[test]
    fn real_models_at_real_parameters_give_real_outputs(seed in any::<u64>(), p in -1.0..1.0f64) {
        let mut g = rng(seed);
        let m = random_model(&mut g, 3, 3, (2, 2), false);
        let node = m.solve_node(&[c(p)]).unwrap();
        prop_assert!(node.state.iter().chain(node.output.iter()).all(|z| z.im.abs() <= 1e-14));
    }

    #[test]
    fn one_interval_rule_is_exact_for_degree_13(coeffs in prop::collection::vec(-1.0..1.0f64, 14), a in -2.0..0.0f64, w in 0.1..2.0f64) {
        let b = a + w;
        let poly = |x: f64| coeffs.iter().rev().fold(0.0, |s, k| s * x + k);
        let anti = |x: f64| coeffs.iter().enumerate().rev().fold(0.0, |s, (k, v)| s * x + v / (k + 1) as f64) * x;
        let got = integrate_fixed(|x| Ok(vec![c(poly(x))]), &[a, b], 1).unwrap().value[0].re;
        let exact = anti(b) - anti(a);
        let x = a.abs().max(b.abs());
        let scale = w * coeffs.iter().enumerate().map(|(k, v)| v.abs() * x.powi(k as i32)).sum::<f64>();
        prop_assert!((got - exact).abs() <= 1e-13 * scale.max(1.0), "{} vs {}", got, exact);
    }

    #[test]
    fn conjugate_symmetric_integrands_integrate_to_real(seed in any::<u64>(), n in 2..15usize) {
        let mut g = rng(seed);
        let pts = random_points(&mut g, n, true);
        let m = random_model(&mut g, 2, 2, (1, 1), false);
        let mu = Measure::Discrete(pts);
        let (v, _) = mu.integrate_matrix((1, 1), |p| m.output(p), &QuadOptions::default()).unwrap();
        prop_assert!(v[(0, 0)].im.abs() <= 1e-12);
        let axis = Measure::h2();
        let lti = random_stable_system(4, 1, 1, seed).unwrap().to_ddrom().unwrap();
        // the extra pole at s = 1 keeps the integral away from zero
        let f = |p: &[Complex64]| lti.output(p).map(|y| &y * &y / (Complex64::new(1.0, 0.0) - p[0]));
        let (h, err) = axis.integrate_matrix((1, 1), f, &QuadOptions::default()).unwrap();
        // the adaptive partition need not be symmetric, so the imaginary part sits at the error level
        prop_assert!(h[(0, 0)].im.abs() <= 10.0 * err + 1e-12, "{} vs {}", h[(0, 0)].im, err);
    }

    #[test]
    fn l2_distance_triangle_inequality(seed in any::<u64>(), discrete in any::<bool>()) {
        let mut g = rng(seed);
        let ms: Vec<_> = (0..3).map(|_| random_model(&mut g, 2, 2, (1, 1), false)).collect();
        let mu = if discrete { Measure::Discrete(random_points(&mut g, 9, true)) } else { Measure::interval(-1.0, 1.0, 0.5).unwrap() };
        let o = QuadOptions::default();
        let d = |i: usize, j: usize| l2_distance(&ms[i], &ms[j], &mu, &o).unwrap();
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-10);
        prop_assert_eq!(d(1, 1), 0.0);
    }

    #[test]
    fn discrete_sum_ignores_point_order(seed in any::<u64>(), n in 3..30usize) {
        let mut g = rng(seed);
        let pts = random_points(&mut g, n, true);
        let m = random_model(&mut g, 2, 2, (1, 1), false);
        let mut idx: Vec<usize> = (0..pts.len()).collect();
        for i in (1..idx.len()).rev() {
            idx.swap(i, g.random_range(0..=i));
        }
        let shuffled = DiscretePoints::new(
            idx.iter().map(|&i| pts.points()[i].clone()).collect(),
            idx.iter().map(|&i| pts.weights()[i]).collect(),
        ).unwrap();
        let f = |p: &[Complex64]| Ok(vec![m.output(p)?[(0, 0)]]);
        let a = Measure::Discrete(pts).integrate(1, f, &QuadOptions::default()).unwrap();
        let b = Measure::Discrete(shuffled).integrate(1, f, &QuadOptions::default()).unwrap();
        prop_assert_eq!(a.value[0].re.to_bits(), b.value[0].re.to_bits());
        prop_assert_eq!(a.value[0].im.to_bits(), b.value[0].im.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn analytic_gradient_matches_finite_differences(seed in any::<u64>(), r in 1..4usize, q in 1..4usize, cplx in any::<bool>(), n in 10..41usize) {
        let inst = random_instance(seed, r, q, cplx, n);
        let ev = objective_and_gradients(&inst.truth, &inst.model, &inst.mu, &rule()).unwrap();
        let fd = fd_gradients(&inst.truth, &inst.model, &inst.mu, 1e-6, &rule()).unwrap();
        let (dev, at) = max_relative_deviation(&ev.grad, &fd);
        prop_assert!(dev <= 1e-5, "{} at {}", dev, at);
        if !cplx {
            // real model on conjugation-closed data
            prop_assert!(ev.imag_residue <= 1e-12 * ev.grad.max_abs().max(1.0));
        }
    }

    #[test]
    fn gradients_vanish_on_interpolated_data(seed in any::<u64>(), n in 1..12usize) {
        let mut g = rng(seed);
        let m = random_model(&mut g, 2, 2, (1, 1), true);
        let pts = random_points(&mut g, n, false);
        let ev = objective_and_gradients(&m, &m, &Measure::Discrete(pts), &rule()).unwrap();
        prop_assert!(ev.grad.max_abs() <= 1e-12);
    }

    #[test]
    fn quasi_newton_descends_on_random_convex_quadratics(seed in any::<u64>(), n in 2..8usize, memory in 0..6usize) {
        let mut g = rng(seed);
        let l = nalgebra::DMatrix::<f64>::from_fn(n, n, |_, _| g.random_range(-1.0..1.0));
        let h = &l * l.transpose() + nalgebra::DMatrix::identity(n, n) * 0.1;
        let b = nalgebra::DVector::<f64>::from_fn(n, |_, _| g.random_range(-1.0..1.0));
        let fg = |x: &[f64]| {
            let x = nalgebra::DVector::from_column_slice(x);
            let hx = &h * &x;
            Ok((0.5 * x.dot(&hx) - b.dot(&x), (hx - &b).as_slice().to_vec()))
        };
        let x0 = vec![1.0; n];
        let opts = OptimOptions { memory, ..Default::default() };
        let run = || quasi_newton_minimize(fg, &x0, &opts, |_, _| ControlFlow::Continue(())).unwrap();
        let r1 = run();
        prop_assert!(r1.trace.windows(2).all(|w| w[1].value < w[0].value));
        prop_assert!(r1.trace.iter().skip(1).all(|t| t.slope < 0.0));
        prop_assert!(r1.value <= fg(&x0).unwrap().0);
        let r2 = run();
        prop_assert_eq!(r1.x, r2.x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn fits_never_end_above_their_start(seed in any::<u64>()) {
        let inst = random_instance(seed, 2, 2, false, 15);
        let opts = OptimOptions { maxit: 40, ..Default::default() };
        let mut values = Vec::new();
        let fit = l2_opt_psf(&inst.truth, &inst.model, &inst.mu, &opts, |_, rec| values.push(rec.value)).unwrap();
        prop_assert!(fit.final_value <= fit.initial_value);
        prop_assert!(values.windows(2).all(|w| w[1] < w[0]));
        let again = l2_opt_psf(&inst.truth, &inst.model, &inst.mu, &opts, |_, _| {}).unwrap();
        prop_assert_eq!(fit.model, again.model);
    }

    #[test]
    fn greedy_training_error_never_increases(seed in any::<u64>(), n_train in 5..25usize) {
        let mut g = rng(seed);
        // compliant and symmetric, so the output error is an energy error of nested Galerkin spaces
        let fom = Arc::new(build_poisson_fom(&Grid2D::new(5).unwrap()).unwrap());
        let train: Vec<_> = (0..n_train).map(|_| vec![c(g.random_range(0.1..10.0))]).collect();
        let res = strong_greedy(fom, &train, 5, 0.0).unwrap();
        prop_assert!(res.max_errors.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn compliant_galerkin_error_is_nonnegative(seed in any::<u64>(), r in 1..4usize) {
        let mut g = rng(seed);
        let fom = Arc::new(build_poisson_fom(&Grid2D::new(6).unwrap()).unwrap());
        let train: Vec<_> = (0..8).map(|_| vec![c(g.random_range(0.1..10.0))]).collect();
        let rom = pod(fom.clone(), &train, r).unwrap().rom;
        for _ in 0..20 {
            let p = [c(g.random_range(0.1..10.0))];
            let e = fom.output(&p).unwrap()[(0, 0)].re - rom.output(&p).unwrap()[(0, 0)].re;
            prop_assert!(e >= -1e-12, "{}", e);
        }
    }

    #[test]
    fn galerkin_reproduces_states_in_the_basis(seed in any::<u64>()) {
        let mut g = rng(seed);
        let fom = random_fom(&mut g, 14, 2, 1, 1);
        let p = [c(g.random_range(-1.0..1.0))];
        let x = fom.solve_state(&p).unwrap().map(|z| z.re);
        let extra = orthonormal(&mut g, 14, 2);
        let v = nalgebra::DMatrix::from_columns(&[x.column(0).into_owned(), extra.column(0).into_owned()]).qr().q();
        let rom = GalerkinRom::new(Arc::new(fom.clone()), to_complex(&v), to_complex(&v)).unwrap();
        let y = fom.output(&p).unwrap();
        prop_assert!((rom.output(&p).unwrap() - &y).norm() <= 1e-10 * y.norm());
    }

    #[test]
    fn projection_recovery_round_trip(seed in any::<u64>(), n in prop::sample::select(vec![20usize, 30]), r in 2..4usize, q in 2..4usize) {
        let mut g = rng(seed);
        let fom = random_fom(&mut g, n, q, 1, 1);
        let (v, w) = (orthonormal(&mut g, n, r), orthonormal(&mut g, n, r));
        let m = galerkin_project(&fom, &to_complex(&v), &to_complex(&w)).unwrap();
        let res = recover_projection(&fom, &m, &RecoveryOptions::default()).unwrap();
        // the stacked system in X has full row rank for these generic draws
        let d = &res.diagnostics;
        prop_assert_eq!(d.system_rank, d.system_shape.0.min(d.system_shape.1));
        prop_assert_eq!(res.status, RecoveryStatus::Recovered);
        prop_assert!(res.residuals.unwrap().max_abs() <= 1e-8);
    }

    #[test]
    fn transfer_samples_are_conjugate_symmetric(seed in any::<u64>(), w in 0.0..20.0f64) {
        let sys = random_stable_system(6, 1, 2, seed).unwrap();
        let m = sys.to_ddrom().unwrap();
        let h = m.output(&[Complex64::new(0.0, w)]).unwrap();
        let hc = m.output(&[Complex64::new(0.0, -w)]).unwrap();
        prop_assert!((hc - h.map(|z| z.conj())).norm() <= 1e-12 * h.norm());
    }
}

#[test]
fn fem_outputs_are_real_and_assembly_deterministic() {
    let g = Grid2D::new(5).unwrap();
    let a = build_poisson_fom(&g).unwrap();
    let b = build_poisson_fom(&g).unwrap();
    for p in [0.1, 2.0, 9.0] {
        let (ya, yb): (CMat, CMat) = (a.output(&[c(p)]).unwrap(), b.output(&[c(p)]).unwrap());
        assert_eq!(ya, yb);
        assert_eq!(ya[(0, 0)].im, 0.0);
    }
}
