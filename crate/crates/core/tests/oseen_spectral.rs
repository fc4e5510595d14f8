use num_complex::Complex64;
use tpflow_core::corpus;
use tpflow_core::oseen_spectral::{oseen_mode_residual, solve_oseen_mode, FlowParams};
use tpflow_core::spectral_field::{BoxGrid, Field};
use tpflow_core::Error;

#[test]
fn single_fourier_mode_has_closed_form_solution() {
    let g = BoxGrid::new(16, 8.0).unwrap();
    let kf = g.fundamental_wavenumber();
    let xi = [2.0 * kf, -kf, 3.0 * kf];
    let a = [
        Complex64::new(1.0, 0.5),
        Complex64::new(-0.3, 0.2),
        Complex64::new(0.7, -1.0),
    ];
    let wave = |x: [f64; 3]| Complex64::from_polar(1.0, xi[0] * x[0] + xi[1] * x[1] + xi[2] * x[2]);
    let f = Field::vector_from_fn(g, |x| [a[0] * wave(x), a[1] * wave(x), a[2] * wave(x)]);
    let (lambda, omega, k) = (0.3, 0.7, 2);

    let k2: f64 = xi.iter().map(|v| v * v).sum();
    let dot = (xi[0] * a[0] + xi[1] * a[1] + xi[2] * a[2]) / k2;
    let symbol = Complex64::new(k2, omega * k as f64 - lambda * xi[0]);
    let v_hat: Vec<Complex64> = (0..3).map(|i| (a[i] - xi[i] * dot) / symbol).collect();
    let p_hat: Vec<Complex64> = (0..3).map(|i| xi[i] * dot).collect();
    let v_exact = Field::vector_from_fn(g, |x| [v_hat[0] * wave(x), v_hat[1] * wave(x), v_hat[2] * wave(x)]);
    let p_exact = Field::vector_from_fn(g, |x| [p_hat[0] * wave(x), p_hat[1] * wave(x), p_hat[2] * wave(x)]);

    let (v, p) = solve_oseen_mode(k, &f, lambda, omega).unwrap();
    assert!(v.sub(&v_exact).unwrap().max_abs() < 1e-12);
    assert!(p.sub(&p_exact).unwrap().max_abs() < 1e-12);
}

#[test]
fn mode_solutions_are_solenoidal_with_small_residual() {
    let g = BoxGrid::new(16, 8.0).unwrap();
    let f = corpus::random_field(g, 3, 21);
    for k in [-2, 0, 1, 4] {
        let (v, p) = solve_oseen_mode(k, &f, 0.2, 0.5).unwrap();
        assert!(v.divergence().unwrap().max_abs() < 1e-12 * f.max_abs());
        let r = oseen_mode_residual(k, &v, &p, &f, 0.2, 0.5).unwrap();
        assert!(r.max_abs() < 1e-12 * f.max_abs(), "k={k}: residual {:e}", r.max_abs());
    }
}

#[test]
fn flow_parameters_enforce_the_admissible_window() {
    assert!(FlowParams::new(0.2, 0.5, 1.0, 0.5, 1.25).is_ok());
    let low_omega = FlowParams::new(1.0, 0.5, 1.0, 0.5, 1.25);
    assert!(matches!(low_omega, Err(Error::InvalidParameter(_))));
    let bad_q = FlowParams::new(0.2, 0.5, 1.0, 0.5, 2.5);
    assert!(FlowParams::new(0.2, 0.5, 1.0, 0.4, 1.25).is_err());
    assert!(matches!(bad_q, Err(Error::InvalidParameter(_))));
}
