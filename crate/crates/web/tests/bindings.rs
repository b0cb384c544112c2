use nvdress_web::{coherence_curve, dressed_summary, filter_curve, second_order_coherence, MAX_RUNS};

#[test]
fn filter_curve_peaks_at_dressed_gaps() {
    let (omega, t, n) = (10.0, 2.0, 401);
    let y = filter_curve(omega, t, 10.0, n).unwrap();
    assert_eq!(y.len(), n);
    // grid step 0.05 MHz, so +-Omega/2 = +-5 MHz sit at indices 100 and 300
    let peak = (0..n).fold(0, |b, i| if y[i] > y[b] { i } else { b });
    assert!(peak == 100 || peak == 300, "{peak}");
    assert!((y[100] - y[300]).abs() < 1e-12);
    assert!(y.iter().all(|v| *v >= 0.0));
}

#[test]
fn undriven_coherence_is_calibrated() {
    let l = second_order_coherence(0.0, 0.3).unwrap();
    assert!((l - (1.0 - 0.01)).abs() < 1e-3, "{l}");
    assert!(second_order_coherence(10.0, 20.0).unwrap() > second_order_coherence(0.0, 0.3).unwrap());
}

#[test]
fn dressed_levels_split_by_half_omega() {
    let s = dressed_summary("zero-field", 10.0).unwrap();
    assert_eq!(s.len(), 4);
    for (v, e) in s[..3].iter().zip([-5.0, 0.0, 5.0]) {
        assert!((v - e).abs() < 1e-9, "{s:?}");
    }
    // resonance near the 2.87 GHz zero-field splitting
    assert!((s[3] - 2870.0).abs() < 1.0, "{}", s[3]);
    assert!(dressed_summary("nowhere", 1.0).is_err());
}

#[test]
fn coherence_curve_shape_and_limits() {
    let y = coherence_curve("zero-field", 10.0, 4, 1, 2.0, 1.0).unwrap();
    assert_eq!(y.len(), 3);
    assert!((y[0] - 1.0).abs() < 1e-12);
    assert!(coherence_curve("zero-field", 10.0, MAX_RUNS + 1, 1, 2.0, 1.0).is_err());
    assert!(coherence_curve("zero-field", 10.0, 0, 1, 2.0, 1.0).is_err());
}
