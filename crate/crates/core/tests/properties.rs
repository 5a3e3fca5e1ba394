use aec_core::model::{aux_value, quad_form};
use aec_core::solver_eiss::{self, SweepMode};
use aec_core::spectral::{analyze, synthesize, tail_len};
use aec_core::{AecConfig, Complex64, ExtractionFilter, WeightedCovariance};
use proptest::prelude::*;

fn small_config() -> AecConfig {
    AecConfig {
        frame_len: 64,
        hop: 16,
        fft_size: 64,
        ..Default::default()
    }
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

/// `B B^H + 0.1 I` for a random square `B`.
fn pd(n: usize) -> impl Strategy<Value = WeightedCovariance> {
    prop::collection::vec(complex(), n * n).prop_map(move |b| {
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for c in 0..n {
                data[r * n + c] = (0..n).map(|k| b[r * n + k] * b[c * n + k].conj()).sum();
            }
            data[r * n + r] += 0.1;
        }
        WeightedCovariance::from_row_major(n, data).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stft_round_trip_interior(x in prop::collection::vec(-1.0..1.0f64, 64..600)) {
        let cfg = small_config();
        let y = synthesize(&analyze(&x, &cfg).unwrap(), &cfg).unwrap();
        prop_assert_eq!(y.len(), x.len());
        let tail = tail_len(&cfg);
        if x.len() > 2 * tail {
            for t in tail..x.len() - tail {
                prop_assert!((y[t] - x[t]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn covariance_stays_hermitian_and_trace_positive(
        ys in prop::collection::vec(prop::collection::vec(complex(), 5), 1..40),
        phis in prop::collection::vec(0.0..50.0f64, 40),
        alpha in 0.5..0.999f64,
    ) {
        let mut v = WeightedCovariance::scaled_identity(5, 1e-3);
        for (y, phi) in ys.iter().zip(&phis) {
            v.update(y, *phi, alpha).unwrap();
        }
        prop_assert_eq!(v.hermitian_defect(), 0.0);
        prop_assert!(v.trace() > 0.0);
        // PSD: every quadratic form is non-negative
        for y in &ys {
            prop_assert!(quad_form(y, &v) >= -1e-12 * v.trace());
        }
    }

    #[test]
    fn eiss_sweep_never_increases_aux_value(v in pd(6), w in prop::collection::vec(complex(), 5)) {
        let mut w0 = vec![Complex64::new(1.0, 0.0)];
        w0.extend(w);
        let w0 = ExtractionFilter(w0);
        let before = aux_value(&w0, &v, Some(w0.0[0])).unwrap();
        let mut w1 = w0.clone();
        solver_eiss::sweep_in_place(&mut w1.0, &v, SweepMode::Sequential);
        let after = aux_value(&w1, &v, Some(w1.0[0])).unwrap();
        prop_assert!(after <= before + 1e-9 * before.abs().max(1.0), "{} -> {}", before, after);
    }

    #[test]
    fn eiss_update_keeps_unit_first_tap(v in pd(7)) {
        let w = solver_eiss::eiss_update(&ExtractionFilter::identity(7), &v).unwrap();
        prop_assert!((w.0[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        prop_assert!(w.is_finite());
    }
}
