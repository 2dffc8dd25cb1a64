//! Property tests for the correlation primitives and metrics.

use cosmic_core::metrics::islr;
use cosmic_core::sequence::{
    cross_correlation_direct, cross_correlation_fft, ComplexSequence, CrossCorrelationMatrix,
    LagWindow,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), len..=len)
        .prop_map(|v| v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Matrix application equals the brute-force double loop at every lag.
    #[test]
    fn matrix_equals_direct_summation(k in 1usize..=32, pair in (0u64..1000).prop_flat_map(|_| (any::<u16>(), any::<u16>()))) {
        let _ = pair;
        prop_assume!(k >= 1);
        let runner = k; // deterministic per-size content below
        let s: Vec<Complex64> = (0..k)
            .map(|i| Complex64::new(((i * 7 + runner) % 13) as f64 / 13.0 - 0.5, ((i * 11 + 3) % 17) as f64 / 17.0 - 0.5))
            .collect();
        let x: Vec<Complex64> = (0..k)
            .map(|i| Complex64::new(((i * 5 + 1) % 19) as f64 / 19.0 - 0.5, ((i * 3 + runner) % 23) as f64 / 23.0 - 0.5))
            .collect();
        let w = LagWindow::full(k);
        let m = CrossCorrelationMatrix::from_sequence(&ComplexSequence::new(s.clone()).unwrap(), w).unwrap();
        let got = m.apply(&x).unwrap();
        // Independent oracle.
        for (i, l) in w.lags().enumerate() {
            let mut want = Complex64::new(0.0, 0.0);
            for kk in 0..k as i64 {
                let j = kk + l;
                if j >= 0 && j < k as i64 {
                    want += s[kk as usize].conj() * x[j as usize];
                }
            }
            prop_assert!((got[i] - want).norm() < 1e-12);
        }
    }

    /// FFT and direct evaluation agree on random complex data.
    #[test]
    fn fft_equals_direct(s in complex_vec(24), x in complex_vec(40)) {
        let w = LagWindow::new(-23, 39).unwrap();
        let a = cross_correlation_direct(&s, &x, w);
        let b = cross_correlation_fft(&s, &x, w);
        for (u, v) in a.iter().zip(b.iter()) {
            prop_assert!((u - v).norm() < 1e-10);
        }
    }

    /// Reversing the arguments conjugates and mirrors the correlation.
    #[test]
    fn correlation_conjugate_symmetry(s in complex_vec(16), x in complex_vec(16)) {
        let w = LagWindow::full(16);
        let fwd = cross_correlation_direct(&s, &x, w);
        let rev = cross_correlation_direct(&x, &s, w);
        let len = fwd.len();
        for i in 0..len {
            let mirrored = rev[len - 1 - i].conj();
            prop_assert!((fwd[i] - mirrored).norm() < 1e-12);
        }
    }

    /// ISLR is invariant to positive scaling of the profile.
    #[test]
    fn islr_scale_invariance(profile in proptest::collection::vec(0.01f64..10.0, 16..64), scale in 0.001f64..1000.0) {
        let peak = profile.len() / 2;
        let a = islr(&profile, 1, &[peak]).unwrap();
        let scaled: Vec<f64> = profile.iter().map(|v| v * scale).collect();
        let b = islr(&scaled, 1, &[peak]).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    /// Parseval-style check: the full-window autocorrelation peak is the
    /// energy and bounds every other lag.
    #[test]
    fn autocorrelation_peak_dominates(s in complex_vec(20)) {
        prop_assume!(s.iter().map(|c| c.norm_sqr()).sum::<f64>() > 1e-6);
        let w = LagWindow::full(20);
        let r = cross_correlation_direct(&s, &s, w);
        let energy: f64 = s.iter().map(|c| c.norm_sqr()).sum();
        let mid = r[19];
        prop_assert!((mid.re - energy).abs() < 1e-10);
        prop_assert!(mid.im.abs() < 1e-10);
        for v in &r {
            prop_assert!(v.norm() <= energy + 1e-10);
        }
    }
}
