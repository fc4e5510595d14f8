use num_complex::Complex64;
use tpflow_core::corpus;
use tpflow_core::nonlinear_solver::{
    convective_series, lifting_field, nonlinearity, zero_like, BodyMotion, Cutoff, Frame,
};
use tpflow_core::spectral_field::{BoxGrid, Field, SupportGuard};
use tpflow_core::wiener_algebra::{ScalarSeries, TorusSeries};

fn c(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

fn grid() -> BoxGrid {
    BoxGrid::new(32, 16.0).unwrap()
}

#[test]
fn steady_lifting_is_a_rigid_motion_inside_the_cutoff() {
    let g = grid();
    let (lambda, omega) = (0.1, 0.3);
    let cutoff = Cutoff::new(2.5).unwrap();
    let alpha = ScalarSeries::steady(Complex64::new(lambda, 0.0));
    let lift = lifting_field(&alpha, omega, cutoff, g, 0).unwrap();
    assert!(lift.max_divergence < 1e-12);
    let u = lift.velocity.coeff(0).unwrap();
    let mut worst = 0.0f64;
    for idx in 0..g.len() {
        let x = g.position(idx);
        if x.iter().map(|v| v * v).sum::<f64>().sqrt() >= 2.0 {
            continue;
        }
        let exact = [lambda, -omega * x[2], omega * x[1]];
        for (comp, e) in exact.iter().enumerate() {
            worst = worst.max((u.value(idx, comp) - c(*e)).norm());
        }
    }
    assert!(worst < 1e-8, "max deviation {worst:e}");
}

#[test]
fn nonlinearity_of_a_swirl_is_centripetal() {
    // v = g(r) e₁∧x with U = 0 and α = λ leaves N = −v·∇v = g²(0, x₂, x₃);
    // the finer grid keeps g² inside the dealiasing band
    let g = BoxGrid::new(64, 16.0).unwrap();
    let s = 1.2;
    let swirl = Field::vector_from_fn(g, |x| {
        let w = corpus::gaussian(x, [0.0; 3], s);
        [c(0.0), c(-x[2] * w), c(x[1] * w)]
    });
    let v = TorusSeries::steady(swirl);
    let lifting = zero_like(&v);
    let motion = BodyMotion::steady(0.1, 0.3).unwrap();
    let n = nonlinearity(&v, &lifting, &motion, Frame::Inertial, &SupportGuard::default()).unwrap();
    let exact = Field::vector_from_fn(g, |x| {
        let w = corpus::gaussian(x, [0.0; 3], s);
        [c(0.0), c(w * w * x[1]), c(w * w * x[2])]
    });
    let err = n.coeff(0).unwrap().sub(&exact).unwrap().max_abs();
    assert!(err < 1e-9 * exact.max_abs(), "max error {err:e}");
}

#[test]
fn convective_term_is_bilinear() {
    let g = grid();
    let a = corpus::bump_series(g, 1, 1, 3);
    let b = corpus::bump_series(g, 1, 1, 4);
    let c = corpus::bump_series(g, 1, 1, 5);
    let two = Complex64::new(2.0, 0.0);
    let lhs = convective_series(&a.add_scaled(two, &c).unwrap(), &b, 1).unwrap();
    let rhs = convective_series(&a, &b, 1)
        .unwrap()
        .add_scaled(two, &convective_series(&c, &b, 1).unwrap())
        .unwrap();
    let scale = lhs.a_norm(2.0).unwrap();
    assert!(lhs.sub(&rhs).unwrap().a_norm(2.0).unwrap() < 1e-13 * scale);
}

#[test]
fn motion_rejects_complex_speed_profiles() {
    let mut alpha = ScalarSeries::from_real_trig(0.1, &[0.02], &[]);
    *alpha.coeff_mut(1).unwrap() = Complex64::new(0.0, 0.3);
    assert!(BodyMotion::new(alpha, 0.2).is_err());
}
