//! Whole-space Oseen solvers on the periodic box.
//!
//! Each time mode `k` of the time-periodic Oseen system
//! `ω∂_t u − Δu − λ∂₁u + ∇p = f, div u = 0` is a Fourier multiplier. The
//! rotating system `ω(∂_t u + e₁∧u − e₁∧x·∇u) − Δu − λ∂₁u + ∇p = f` is reduced
//! to it by the frame transform in [`frame`].

pub mod estimates;
pub mod frame;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral_field::{BoxGrid, Field, SupportGuard};
use crate::wiener_algebra::{FieldSeries, TorusSeries};
use frame::{rotate_frame, rotate_frame_unguarded, FrameConfig, FrameDirection};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Reynolds number `λ`, Taylor number `ω`, coupling bounds `θ`, `B` and the
/// integrability exponent `q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowParams {
    pub lambda: f64,
    pub omega: f64,
    pub theta: f64,
    pub bound: f64,
    pub q: f64,
}

impl FlowParams {
    /// Validates `λ, ω, θ, B > 0`, `λ² ≤ θω ≤ B` and `q ∈ (1, 2)`.
    pub fn new(lambda: f64, omega: f64, theta: f64, bound: f64, q: f64) -> Result<Self> {
        for (name, v) in [("lambda", lambda), ("omega", omega), ("theta", theta), ("B", bound)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(q > 1.0 && q < 2.0) {
            return Err(Error::InvalidParameter(format!("q must lie in (1, 2), got {q}")));
        }
        if lambda * lambda > theta * omega {
            return Err(Error::InvalidParameter(format!(
                "lambda^2 <= theta*omega violated: {} > {}",
                lambda * lambda,
                theta * omega
            )));
        }
        if theta * omega > bound {
            return Err(Error::InvalidParameter(format!(
                "theta*omega <= B violated: {} > {bound}",
                theta * omega
            )));
        }
        Ok(Self {
            lambda,
            omega,
            theta,
            bound,
            q,
        })
    }

    pub fn s1(&self) -> f64 {
        2.0 * self.q / (2.0 - self.q)
    }

    pub fn s2(&self) -> f64 {
        4.0 * self.q / (4.0 - self.q)
    }

    pub fn s3(&self) -> f64 {
        8.0 * self.q / (8.0 - self.q)
    }
}

/// Velocity and pressure gradient of a time-periodic solve.
#[derive(Clone, Debug)]
pub struct TPSolution {
    pub velocity: FieldSeries,
    pub pressure_gradient: FieldSeries,
    /// Largest sampled `|div v|` over all modes.
    pub max_divergence: f64,
}

fn require_vector(f: &Field, what: &str) -> Result<()> {
    if f.ncomp() == 3 {
        Ok(())
    } else {
        Err(Error::Structural(format!(
            "{what} needs a vector field, got {} components",
            f.ncomp()
        )))
    }
}

/// Solves `iωk v − Δv − λ∂₁v + ∇p = F, div v = 0` for one time mode.
///
/// The `(k, ξ) = (0, 0)` velocity coefficient is set to zero; the net force
/// it would carry is balanced by a spatially constant pressure gradient.
pub fn solve_oseen_mode(k: i64, forcing: &Field, lambda: f64, omega: f64) -> Result<(Field, Field)> {
    require_vector(forcing, "Oseen mode solve")?;
    let wk = omega * k as f64;
    let both = forcing.apply_multiplier(6, |xi, f, out| {
        let k2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        if k2 == 0.0 {
            if k == 0 {
                out[3..6].copy_from_slice(f);
            } else {
                let d = Complex64::new(0.0, wk);
                for i in 0..3 {
                    out[i] = f[i] / d;
                }
            }
            return;
        }
        let dot = (xi[0] * f[0] + xi[1] * f[1] + xi[2] * f[2]) / k2;
        let symbol = Complex64::new(k2, wk - lambda * xi[0]);
        for i in 0..3 {
            let grad = xi[i] * dot;
            out[i] = (f[i] - grad) / symbol;
            out[3 + i] = grad;
        }
    });
    let grid = *forcing.grid();
    let len = grid.len();
    let data = both.into_data();
    let v = Field::from_data(grid, 3, data[..3 * len].to_vec())?;
    let p = Field::from_data(grid, 3, data[3 * len..].to_vec())?;
    Ok((v, p))
}

/// `iωk v − Δv − λ∂₁v + ∇p − F` evaluated with the generic spectral operators.
pub fn oseen_mode_residual(
    k: i64,
    velocity: &Field,
    pressure_gradient: &Field,
    forcing: &Field,
    lambda: f64,
    omega: f64,
) -> Result<Field> {
    let mut r = velocity.scaled(Complex64::new(0.0, omega * k as f64));
    r.axpy(Complex64::new(-1.0, 0.0), &velocity.laplacian())?;
    r.axpy(Complex64::new(-lambda, 0.0), &velocity.partial(0))?;
    r.axpy(Complex64::new(1.0, 0.0), pressure_gradient)?;
    r.axpy(Complex64::new(-1.0, 0.0), forcing)?;
    Ok(r)
}

/// Modewise Oseen solve without the parameter-window check.
pub fn solve_oseen_series(forcing: &FieldSeries, lambda: f64, omega: f64) -> Result<TPSolution> {
    let pairs = forcing.try_map(|k, f| {
        let (v, p) = solve_oseen_mode(k, f, lambda, omega)?;
        Field::stack(&[&v, &p])
    })?;
    let velocity = pairs.map(|_, vp| split(vp).0);
    let pressure_gradient = pairs.map(|_, vp| split(vp).1);
    let max_divergence = velocity
        .coeffs()
        .iter()
        .map(|v| v.divergence().map(|d| d.max_abs()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(TPSolution {
        velocity,
        pressure_gradient,
        max_divergence,
    })
}

fn split(vp: &Field) -> (Field, Field) {
    let len = vp.grid().len();
    let v = Field::from_data(*vp.grid(), 3, vp.data()[..3 * len].to_vec()).expect("six components");
    let p = Field::from_data(*vp.grid(), 3, vp.data()[3 * len..].to_vec()).expect("six components");
    (v, p)
}

/// Time-periodic Oseen solve for admissible parameters.
pub fn solve_oseen_tp(forcing: &FieldSeries, params: &FlowParams) -> Result<TPSolution> {
    solve_oseen_series(forcing, params.lambda, params.omega)
}

/// `ω∂_t u − Δu − λ∂₁u + ∇p − f` as a series.
pub fn oseen_tp_residual(sol: &TPSolution, forcing: &FieldSeries, lambda: f64, omega: f64) -> Result<FieldSeries> {
    let k = sol.velocity.k_max().max(forcing.k_max());
    let u = sol.velocity.truncate(k);
    let p = sol.pressure_gradient.truncate(k);
    let f = forcing.truncate(k);
    let parts = u.try_map(|m, v| oseen_mode_residual(m, v, p.coeff(m).unwrap(), f.coeff(m).unwrap(), lambda, omega))?;
    Ok(parts)
}

/// How the dilation `U(x) = u(ω^{-1/2} x)` is realized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RescaleMethod {
    /// Same samples on a box of length `ω^{1/2} L`; exact.
    DilatedBox,
    /// Trigonometric interpolation on the original grid.
    Interpolated,
}

/// `U(t, x) = u(t, ω^{-1/2} x)` for a purely periodic series.
pub fn rescale_purely_periodic(
    series: &FieldSeries,
    omega: f64,
    method: RescaleMethod,
    guard: &SupportGuard,
) -> Result<FieldSeries> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
    }
    if series.coeff(0).unwrap().max_abs() != 0.0 {
        return Err(Error::Structural("rescaling expects a purely periodic series".into()));
    }
    match method {
        RescaleMethod::DilatedBox => {
            let grid = series.grid().rescaled(omega.sqrt())?;
            series.try_map(|_, c| Field::from_data(grid, c.ncomp(), c.data().to_vec()))
        }
        RescaleMethod::Interpolated => {
            let out = series.try_map(|_, c| dilate(c, omega.powf(-0.5)))?;
            for (k, c) in out.iter() {
                guard.check(c, &format!("rescaled mode {k}"))?;
            }
            Ok(out)
        }
    }
}

/// Samples the trigonometric interpolant of `f` at `s·x` on the same grid.
/// Points mapped outside the box evaluate to zero.
pub fn dilate(f: &Field, s: f64) -> Result<Field> {
    let grid: BoxGrid = *f.grid();
    let n = grid.n();
    let half = 0.5 * grid.length();
    let k0 = grid.fundamental_wavenumber();
    // evaluation matrix E[j, m]
    let mut e = Array2::<Complex64>::zeros((n, n));
    for j in 0..n {
        let x = s * grid.coordinate(j);
        if x.abs() > half * (1.0 + 1e-12) {
            continue;
        }
        for i in 0..n {
            let m = grid.signed_index(i);
            e[[j, i]] = if m == -((n / 2) as i64) {
                Complex64::new((k0 * m as f64 * x).cos(), 0.0)
            } else {
                Complex64::from_polar(1.0, k0 * m as f64 * x)
            };
        }
    }
    let spec = f.transform();
    let len = grid.len();
    let mut data = spec.data().to_vec();
    let mut line = vec![ZERO; n];
    for block in data.chunks_mut(len) {
        for axis in 0..3 {
            let stride = [1, n, n * n][axis];
            for base in 0..len {
                let idx = grid.unravel(base);
                if idx[axis] != 0 {
                    continue;
                }
                for (i, v) in line.iter_mut().enumerate() {
                    *v = block[base + i * stride];
                }
                for j in 0..n {
                    let mut acc = ZERO;
                    for i in 0..n {
                        acc += e[[j, i]] * line[i];
                    }
                    block[base + j * stride] = acc;
                }
            }
        }
    }
    Field::from_data(grid, f.ncomp(), data)
}

/// Two-path check of the scaling reduction: the purely periodic part solved
/// directly with `(λ, ω)` and through `(λω^{-1/2}, 1)` on rescaled data.
/// Returns both solutions' velocities on the original grid.
pub fn scaling_two_path(
    forcing: &FieldSeries,
    lambda: f64,
    omega: f64,
    method: RescaleMethod,
    guard: &SupportGuard,
) -> Result<(FieldSeries, FieldSeries)> {
    let fp = forcing.project_purely_periodic();
    let direct = solve_oseen_series(&fp, lambda, omega)?.velocity;
    let scaled_f = rescale_purely_periodic(&fp, omega, method, guard)?.scaled(Complex64::new(1.0 / omega, 0.0));
    let reduced = solve_oseen_series(&scaled_f, lambda / omega.sqrt(), 1.0)?.velocity;
    let back = rescale_purely_periodic(&reduced, 1.0 / omega, method, guard)?;
    Ok((direct, back))
}

/// Solves the rotating time-periodic Oseen system
/// `ω(∂_t u + e₁∧u − e₁∧x·∇u) − Δu − λ∂₁u + ∇p = f` by conjugation with the
/// frame rotation. The output keeps the support `|k| ≤ f.k_max`.
pub fn solve_rotating_oseen_tp(forcing: &FieldSeries, params: &FlowParams, frame: &FrameConfig) -> Result<TPSolution> {
    solve_rotating_series(forcing, params.lambda, params.omega, frame)
}

/// Rotating solve without the parameter-window check.
pub fn solve_rotating_series(
    forcing: &FieldSeries,
    lambda: f64,
    omega: f64,
    frame: &FrameConfig,
) -> Result<TPSolution> {
    let k = forcing.k_max();
    let body = rotate_frame(forcing, FrameDirection::Forward, k + frame.guard_width, frame)?;
    let sol = solve_oseen_series(&body, lambda, omega)?;
    frame.support.check_all(
        sol.velocity.coeffs().iter().chain(sol.pressure_gradient.coeffs()),
        "body-frame solution",
    )?;
    let velocity = rotate_frame_unguarded(&sol.velocity, FrameDirection::Inverse, k, frame)?;
    let pressure_gradient = rotate_frame_unguarded(&sol.pressure_gradient, FrameDirection::Inverse, k, frame)?;
    let max_divergence = velocity
        .coeffs()
        .iter()
        .map(|v| v.divergence().map(|d| d.max_abs()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(TPSolution {
        velocity,
        pressure_gradient,
        max_divergence,
    })
}

/// `(ik − e₁∧x·∇ + e₁∧)v` for one time mode, i.e. the body-frame time
/// derivative of `e^{ikt} v`.
pub fn rotating_derivative_mode(k: i64, v: &Field, guard: &SupportGuard) -> Result<Field> {
    guard.check(v, "rotating derivative")?;
    Ok(rotating_derivative_unchecked(k, v))
}

pub(crate) fn rotating_derivative_unchecked(k: i64, v: &Field) -> Field {
    let mut r = v.rotation_term_unchecked().scaled(Complex64::new(-1.0, 0.0));
    r.axpy_unchecked(Complex64::new(0.0, k as f64), v);
    r
}

/// `ω(∂_t u + e₁∧u − e₁∧x·∇u) − Δu − λ∂₁u + ∇p − f` evaluated with the
/// directly discretized rotation term.
pub fn rotating_residual(
    sol: &TPSolution,
    forcing: &FieldSeries,
    lambda: f64,
    omega: f64,
    guard: &SupportGuard,
) -> Result<FieldSeries> {
    let k = sol.velocity.k_max().max(forcing.k_max());
    let u = sol.velocity.truncate(k);
    let p = sol.pressure_gradient.truncate(k);
    let f = forcing.truncate(k);
    guard.check_all(u.coeffs(), "rotating residual")?;
    u.try_map(|m, v| {
        let mut r = rotating_derivative_unchecked(m, v).scaled(Complex64::new(omega, 0.0));
        r.axpy(Complex64::new(-1.0, 0.0), &v.laplacian())?;
        r.axpy(Complex64::new(-lambda, 0.0), &v.partial(0))?;
        r.axpy(Complex64::new(1.0, 0.0), p.coeff(m).unwrap())?;
        r.axpy(Complex64::new(-1.0, 0.0), f.coeff(m).unwrap())?;
        Ok(r)
    })
}

/// Applies the rotating Oseen operator (without pressure) to a series:
/// `ω(∂_t u + e₁∧u − e₁∧x·∇u) − Δu − λ∂₁u`.
pub fn apply_rotating_operator(u: &FieldSeries, lambda: f64, omega: f64, guard: &SupportGuard) -> Result<FieldSeries> {
    guard.check_all(u.coeffs(), "rotating operator")?;
    u.try_map(|m, v| {
        let mut r = rotating_derivative_unchecked(m, v).scaled(Complex64::new(omega, 0.0));
        r.axpy(Complex64::new(-1.0, 0.0), &v.laplacian())?;
        r.axpy(Complex64::new(-lambda, 0.0), &v.partial(0))?;
        Ok(r)
    })
}

/// Solution of one rotating resolvent problem.
#[derive(Clone, Debug)]
pub struct ResolventSolution {
    pub velocity: Field,
    pub pressure_gradient: Field,
    /// Largest off-mode norm over the on-mode norm.
    pub leak_ratio: f64,
}

/// Solves `ω(ikv + e₁∧v − e₁∧x·∇v) − Δv − λ∂₁v + ∇p = F` through the
/// time-periodic solver with forcing `e^{ikt} F`.
pub fn solve_rotating_resolvent(
    k: i64,
    forcing: &Field,
    params: &FlowParams,
    frame: &FrameConfig,
    leak_tolerance: f64,
) -> Result<ResolventSolution> {
    require_vector(forcing, "resolvent solve")?;
    let k_max = k.unsigned_abs() as usize + frame.guard_width;
    let f = TorusSeries::from_modes(k_max, forcing, vec![(k, forcing.clone())])?;
    let sol = solve_rotating_oseen_tp(&f, params, frame)?;
    let on = sol.velocity.coeff(k).unwrap().lq_norm(2.0);
    let off = sol
        .velocity
        .iter()
        .filter(|(m, _)| *m != k)
        .map(|(_, c)| c.lq_norm(2.0))
        .fold(0.0, f64::max);
    let leak_ratio = if on > 0.0 {
        off / on
    } else if off > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    if leak_ratio > leak_tolerance {
        return Err(Error::DomainApproximation(format!(
            "mode leak {leak_ratio:.3e} exceeds {leak_tolerance:.1e} at k = {k}"
        )));
    }
    Ok(ResolventSolution {
        velocity: sol.velocity.coeff(k).unwrap().clone(),
        pressure_gradient: sol.pressure_gradient.coeff(k).unwrap().clone(),
        leak_ratio,
    })
}

/// Direct per-mode rotating resolvent residual
/// `ω(ikv + e₁∧v − e₁∧x·∇v) − Δv − λ∂₁v + ∇p − F`.
pub fn rotating_resolvent_residual(
    k: i64,
    sol: &ResolventSolution,
    forcing: &Field,
    params: &FlowParams,
    guard: &SupportGuard,
) -> Result<Field> {
    let v = &sol.velocity;
    let mut r = rotating_derivative_mode(k, v, guard)?.scaled(Complex64::new(params.omega, 0.0));
    r.axpy(Complex64::new(-1.0, 0.0), &v.laplacian())?;
    r.axpy(Complex64::new(-params.lambda, 0.0), &v.partial(0))?;
    r.axpy(Complex64::new(1.0, 0.0), &sol.pressure_gradient)?;
    r.axpy(Complex64::new(-1.0, 0.0), forcing)?;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    const I: Complex64 = Complex64::new(0.0, 1.0);

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    fn grid() -> BoxGrid {
        BoxGrid::new(16, 8.0).unwrap()
    }

    #[test]
    fn params_window() {
        assert!(FlowParams::new(0.1, 0.1, 1.0, 10.0, 1.25).is_ok());
        let e = FlowParams::new(1.0, 0.1, 1.0, 10.0, 1.25).unwrap_err();
        assert!(e.to_string().contains("lambda^2 <= theta*omega violated"));
        assert!(FlowParams::new(0.1, 0.1, 1.0, 0.01, 1.25).is_err());
        assert!(FlowParams::new(0.1, 0.1, 1.0, 10.0, 2.0).is_err());
        let p = FlowParams::new(0.1, 0.1, 1.0, 10.0, 1.25).unwrap();
        assert!((p.s1() - 2.5 / 0.75).abs() < 1e-15);
        assert!((p.s2() - 5.0 / 2.75).abs() < 1e-15);
        assert!((p.s3() - 10.0 / 6.75).abs() < 1e-15);
    }

    #[test]
    fn zero_forcing_gives_zero() {
        let (v, p) = solve_oseen_mode(1, &Field::zeros(grid(), 3), 0.3, 0.7).unwrap();
        assert_eq!(v.max_abs(), 0.0);
        assert_eq!(p.max_abs(), 0.0);
    }

    #[test]
    fn steady_plane_wave_matches_closed_form() {
        let g = grid();
        let k0 = g.fundamental_wavenumber();
        let lambda = 0.4;
        let f = Field::vector_from_fn(g, |x| {
            let e = Complex64::from_polar(1.0, k0 * x[0]);
            [c(0.0), e, c(0.0)]
        });
        let (v, p) = solve_oseen_mode(0, &f, lambda, 1.0).unwrap();
        let symbol = Complex64::new(k0 * k0, -lambda * k0);
        let expected = f.scaled(symbol.inv());
        assert!(v.sub(&expected).unwrap().max_abs() < 1e-14);
        assert!(p.max_abs() < 1e-14);
        // residual at two sample points from the closed-form derivatives
        for idx in [0usize, 777] {
            let x = g.position(idx);
            let e = Complex64::from_polar(1.0, k0 * x[0]) / symbol;
            let lhs = e * (k0 * k0) - lambda * I * k0 * e;
            let rhs = Complex64::from_polar(1.0, k0 * x[0]);
            assert!((lhs - rhs).norm() < 1e-13);
            assert!((v.value(idx, 1) - e).norm() < 1e-13);
        }
    }

    #[test]
    fn unsteady_divergence_free_wave() {
        let g = grid();
        let k0 = g.fundamental_wavenumber();
        let (lambda, omega) = (0.2, 0.9);
        let f = Field::vector_from_fn(g, |x| {
            let e = Complex64::from_polar(1.0, k0 * (x[0] + 2.0 * x[2]));
            [c(0.0), e, c(0.0)]
        });
        let (v, p) = solve_oseen_mode(1, &f, lambda, omega).unwrap();
        let xi2 = 5.0 * k0 * k0;
        let symbol = Complex64::new(xi2, omega - lambda * k0);
        assert!(v.sub(&f.scaled(symbol.inv())).unwrap().max_abs() < 1e-14);
        assert!(p.max_abs() < 1e-14);
        let r = oseen_mode_residual(1, &v, &p, &f, lambda, omega).unwrap();
        assert!(r.max_abs() < 1e-12);
    }

    #[test]
    fn gauge_and_zero_spatial_mode() {
        let g = grid();
        let cst = Field::constant(g, &[c(1.0), c(-2.0), c(0.5)]);
        let (v, p) = solve_oseen_mode(0, &cst, 0.3, 1.0).unwrap();
        assert!(v.max_abs() < 1e-15);
        assert!(p.sub(&cst).unwrap().max_abs() < 1e-14);
        let (v, _) = solve_oseen_mode(2, &cst, 0.3, 0.5).unwrap();
        let expected = cst.scaled(Complex64::new(0.0, 1.0).inv());
        assert!(v.sub(&expected).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn random_forcing_residual_and_divergence() {
        let g = grid();
        let f = corpus::random_vector_field(g, 17);
        for k in [-2i64, 0, 3] {
            let (v, p) = solve_oseen_mode(k, &f, 0.3, 0.6).unwrap();
            let r = oseen_mode_residual(k, &v, &p, &f, 0.3, 0.6).unwrap();
            assert!(r.max_abs() < 1e-11 * f.max_abs());
            assert!(v.divergence().unwrap().max_abs() < 1e-12);
            assert!(p.curl().unwrap().max_abs() < 1e-11);
        }
    }

    #[test]
    fn tp_solve_is_linear_and_deterministic() {
        let g = grid();
        let f1 = corpus::random_series(g, 2, 3, 1);
        let f2 = corpus::random_series(g, 2, 3, 2);
        let s1 = solve_oseen_series(&f1, 0.3, 0.5).unwrap();
        let s2 = solve_oseen_series(&f2, 0.3, 0.5).unwrap();
        let s12 = solve_oseen_series(&f1.add(&f2).unwrap(), 0.3, 0.5).unwrap();
        let d = s12.velocity.sub(&s1.velocity.add(&s2.velocity).unwrap()).unwrap();
        assert!(d.a_norm(2.0).unwrap() < 1e-12 * s12.velocity.a_norm(2.0).unwrap());
        let again = solve_oseen_series(&f1, 0.3, 0.5).unwrap();
        for (a, b) in again.velocity.coeffs().iter().zip(s1.velocity.coeffs()) {
            assert_eq!(a.data(), b.data());
        }
        let steady = solve_oseen_series(&f1.project_steady(), 0.3, 0.5).unwrap();
        assert_eq!(steady.velocity.project_purely_periodic().a_norm(2.0).unwrap(), 0.0);
        let r = oseen_tp_residual(&s1, &f1, 0.3, 0.5).unwrap();
        assert!(r.a_norm(2.0).unwrap() < 1e-11 * f1.a_norm(2.0).unwrap());
    }

    #[test]
    fn rescaling_examples() {
        let g = grid();
        let k0 = g.fundamental_wavenumber();
        let guard = SupportGuard {
            max_outside_fraction: 1.0,
        };
        let wave = Field::vector_from_fn(g, |x| [Complex64::from_polar(1.0, k0 * x[1]), c(0.0), c(0.0)]);
        let s = TorusSeries::from_modes(1, &wave, vec![(1, wave.clone())]).unwrap();
        for method in [RescaleMethod::DilatedBox, RescaleMethod::Interpolated] {
            let same = rescale_purely_periodic(&s, 1.0, method, &guard).unwrap();
            assert!(same.coeff(1).unwrap().sub(&wave).unwrap().max_abs() < 1e-13);
        }
        let half = rescale_purely_periodic(&s, 4.0, RescaleMethod::Interpolated, &guard).unwrap();
        let expected = Field::vector_from_fn(g, |x| [Complex64::from_polar(1.0, 0.5 * k0 * x[1]), c(0.0), c(0.0)]);
        assert!(half.coeff(1).unwrap().sub(&expected).unwrap().max_abs() < 1e-12);
        let dil = rescale_purely_periodic(&s, 4.0, RescaleMethod::DilatedBox, &guard).unwrap();
        assert_eq!(dil.grid().length(), 16.0);
        let with_steady = TorusSeries::from_modes(1, &wave, vec![(0, wave.clone()), (1, wave.clone())]).unwrap();
        assert!(rescale_purely_periodic(&with_steady, 4.0, RescaleMethod::DilatedBox, &guard).is_err());
    }

    #[test]
    fn interpolated_dilation_of_compact_bump() {
        let g = BoxGrid::new(32, 16.0).unwrap();
        let f = Field::scalar_from_fn(g, |x| c(corpus::gaussian(x, [0.2, -0.1, 0.3], 1.1)));
        let d = dilate(&f, 2.0).unwrap();
        let expected = Field::scalar_from_fn(g, |x| {
            c(corpus::gaussian(
                [2.0 * x[0], 2.0 * x[1], 2.0 * x[2]],
                [0.2, -0.1, 0.3],
                1.1,
            ))
        });
        let err = d.sub(&expected).unwrap().max_abs();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn dilated_box_two_path_is_exact() {
        let g = BoxGrid::new(16, 8.0).unwrap();
        let f = corpus::random_series(g, 2, 3, 5);
        let guard = SupportGuard::default();
        for omega in [0.25, 1.0, 4.0] {
            let (a, b) = scaling_two_path(&f, 0.3, omega, RescaleMethod::DilatedBox, &guard).unwrap();
            let rel = a.sub(&b).unwrap().a_norm(2.0).unwrap() / a.a_norm(2.0).unwrap();
            assert!(rel < 1e-12, "{rel}");
        }
    }
}
