use critmetro::cli::format_value;
use critmetro::metrology::{quantumness, spin_covariance_qfim, Diagnostics, MetroTensors, ParamKind};
use critmetro::scaling::{fit_exponential, fit_power_law};
use critmetro::{QuantumState, SpinAxis, C64};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn random_state() -> impl Strategy<Value = (usize, QuantumState)> {
    (3usize..=6).prop_flat_map(|n| {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << n)
            .prop_filter_map("nonzero", move |v| QuantumState::new(v.into_iter().map(|(a, b)| C64::new(a, b)).collect()).ok().map(|s| (n, s)))
    })
}

fn rotation_tensors(n: usize, s: &QuantumState) -> MetroTensors {
    let (f, u) = spin_covariance_qfim(s, n).unwrap();
    let f = DMatrix::from_fn(3, 3, |i, j| f[(i, j)]);
    let u = DMatrix::from_fn(3, 3, |i, j| u[(i, j)]);
    MetroTensors::assemble(ParamKind::Rotation, SpinAxis::ALL.to_vec(), f, u, Diagnostics::default())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn physical_tensors_obey_the_bounds((n, s) in random_state()) {
        let t = rotation_tensors(n, &s);
        let scale = t.f.amax().max(1.0);
        prop_assert!((&t.u + t.u.transpose()).amax() <= 1e-12 * scale);
        prop_assert!(SymmetricEigen::new(t.f.clone()).eigenvalues.min() >= -1e-10 * scale);
        for i in 0..3 {
            for j in i + 1..3 {
                let det_f = t.f[(i, i)] * t.f[(j, j)] - t.f[(i, j)] * t.f[(j, i)];
                prop_assert!(det_f >= 4.0 * t.u[(i, j)].powi(2) - 1e-10 * scale * scale);
            }
        }
        if let Some(full) = t.r_full {
            prop_assert!(full.raw >= 0.0 && full.raw <= 1.0 + 1e-9);
            for p in &t.r_pairs {
                if let Some(q) = p.r {
                    prop_assert!(q.value <= full.value + 1e-9);
                    if let Some(d) = q.det_form {
                        prop_assert!((q.raw - d).abs() <= 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn quantumness_ignores_parameter_units((n, s) in random_state(), d in prop::collection::vec(0.01f64..100.0, 3)) {
        let t = rotation_tensors(n, &s);
        let Ok(q) = quantumness(&t.f, &t.u) else { return Ok(()) };
        let dm = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d));
        let q2 = quantumness(&(&dm * &t.f * &dm), &(&dm * &t.u * &dm)).unwrap();
        prop_assert!((q.raw - q2.raw).abs() <= 1e-9);
    }

    #[test]
    fn fits_recover_exact_laws(a in 0.1f64..10.0, m in -3.0f64..3.0, rate in -0.5f64..0.5) {
        let x = [6.0, 8.0, 10.0, 12.0, 14.0];
        let p: Vec<f64> = x.iter().map(|l: &f64| a * l.powf(m)).collect();
        let e: Vec<f64> = x.iter().map(|l| a * (rate * l).exp()).collect();
        let fp = fit_power_law(&x, &p).unwrap();
        let fe = fit_exponential(&x, &e).unwrap();
        prop_assert!((fp.coef("m") - m).abs() < 1e-9);
        prop_assert!((fe.coef("lambda_e") - rate).abs() < 1e-9);
        prop_assert!((fe.coef("A") - a).abs() < 1e-8 * a);
    }

    #[test]
    fn twelve_digit_output_round_trips(x in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        let y: f64 = format_value(x).parse().unwrap();
        prop_assert!((y - x).abs() <= 5e-12 * x.abs());
    }
}
