use num_complex::Complex64;
use tpflow_core::corpus;
use tpflow_core::embedding_verifier::{embedding_ratio, m_symbol, m_symbol_sup, EmbeddingParams};
use tpflow_core::spectral_field::BoxGrid;

#[test]
fn multiplier_is_bounded_and_balanced_at_the_parabolic_scale() {
    let (omega, alpha) = (0.7, 1.3);
    for k in [1i64, -2, 5] {
        let wk = omega * k as f64;
        let s = wk.abs().sqrt();
        // |ξ|² = |ωk| gives |ωk| / (|ωk| + iωk)
        let m = m_symbol(k, [s, 0.0, 0.0], omega, alpha);
        let expected = Complex64::new(wk.abs(), 0.0) / Complex64::new(wk.abs(), wk);
        assert!((m - expected).norm() < 1e-14);
    }
    assert_eq!(m_symbol(0, [1.0, 2.0, 0.0], omega, alpha), Complex64::new(0.0, 0.0));
    let g = BoxGrid::new(16, 8.0).unwrap();
    assert!(m_symbol_sup(&g, 8, omega, alpha) <= 1.0);
}

#[test]
fn ratios_are_scale_invariant() {
    let g = BoxGrid::new(32, 16.0).unwrap();
    let u = corpus::embedding_field(g, 2, 1.2, 5);
    let params = EmbeddingParams::new(1.0, 0.5, 1.25, 1.0).unwrap();
    let base = embedding_ratio(&u, &params).unwrap();
    let scaled = embedding_ratio(&u.scaled(Complex64::new(3.0, 0.0)), &params).unwrap();
    assert!(base.ratio.is_finite() && base.ratio > 0.0);
    assert!((scaled.ratio - base.ratio).abs() < 1e-12 * base.ratio);
    assert!((scaled.lhs - 3.0 * base.lhs).abs() < 1e-12 * scaled.lhs);
}

#[test]
fn steady_parts_are_rejected() {
    let g = BoxGrid::new(32, 16.0).unwrap();
    let u = corpus::manufactured_series(g, 2, 2, true, 3);
    let params = EmbeddingParams::new(1.0, 0.5, 1.25, 1.0).unwrap();
    assert!(embedding_ratio(&u, &params).is_err());
}
