//! Picard iteration for the nonlinear time-periodic problem at small data.
//!
//! The velocity is split as `u = v + U` with a lifting field `U` that carries
//! the rigid motion `α(t)e₁ + ωe₁∧x` near the body. The perturbation solves
//!
//! ```text
//! ω(∂_t v + e₁∧v − e₁∧x·∇v) − Δv − λ∂₁v + ∇q = f + N(v),   div v = 0,
//! ```
//!
//! which is iterated as a fixed point `v ↦ w`. The iteration runs in the
//! inertial frame `V(t, y) = Q(t) v(t, Q(t)ᵀ y)`, where the rotating operator
//! becomes `ω∂_t` and the linear step is the plain Oseen multiplier. `U` is
//! invariant under the conjugation.
//!
//! The obstacle is represented only through `U` and `N`: the solver imposes
//! no condition on the body surface, and the certified quantity is the PDE
//! residual on the box.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::oseen_spectral::frame::{rotate_frame, FrameConfig, FrameDirection};
use crate::oseen_spectral::{rotating_derivative_unchecked, solve_oseen_series, FlowParams};
use crate::spectral_field::{BoxGrid, Field, SupportGuard};
use crate::wiener_algebra::{FieldSeries, ScalarSeries, TorusSeries};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

fn real(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// Dimensional fluid and body data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalParams {
    pub density: f64,
    pub viscosity: f64,
    pub diameter: f64,
    pub period: f64,
}

impl PhysicalParams {
    pub fn new(density: f64, viscosity: f64, diameter: f64, period: f64) -> Result<Self> {
        positive("density", density)?;
        positive("viscosity", viscosity)?;
        positive("diameter", diameter)?;
        positive("period", period)?;
        Ok(Self {
            density,
            viscosity,
            diameter,
            period,
        })
    }
}

/// Translational speed profile `α(t)` along e₁ and angular speed `ω` about e₁.
#[derive(Clone, Debug)]
pub struct BodyMotion {
    alpha: ScalarSeries,
    alpha_dot: ScalarSeries,
    omega: f64,
    lambda: f64,
}

impl BodyMotion {
    /// Requires a real profile with positive mean and `ω > 0`.
    pub fn new(alpha: ScalarSeries, omega: f64) -> Result<Self> {
        positive("omega", omega)?;
        if alpha.coeffs().iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::Numerical("non-finite speed profile".into()));
        }
        let scale = alpha.a_norm(1.0)?.max(f64::MIN_POSITIVE);
        let asym = alpha
            .iter()
            .map(|(k, c)| (c - alpha.coeff(-k).unwrap().conj()).norm())
            .fold(0.0, f64::max);
        if asym > 1e-12 * scale {
            return Err(Error::InvalidParameter(format!(
                "speed profile must be real (conjugate symmetric), asymmetry {asym:.3e}"
            )));
        }
        let lambda = alpha.coeff(0).unwrap().re;
        positive("mean speed lambda", lambda)?;
        let alpha_dot = alpha.time_derivative();
        Ok(Self {
            alpha,
            alpha_dot,
            omega,
            lambda,
        })
    }

    /// Constant speed `λ`.
    pub fn steady(lambda: f64, omega: f64) -> Result<Self> {
        Self::new(ScalarSeries::steady(real(lambda)), omega)
    }

    pub fn alpha(&self) -> &ScalarSeries {
        &self.alpha
    }

    pub fn alpha_dot(&self) -> &ScalarSeries {
        &self.alpha_dot
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `α − λ`.
    pub fn fluctuation(&self) -> ScalarSeries {
        self.alpha.project_purely_periodic()
    }

    /// `‖α − λ‖_{A(T)}`.
    pub fn fluctuation_norm(&self) -> f64 {
        self.fluctuation().coeffs().iter().map(|c| c.norm()).sum()
    }

    /// `‖dα/dt‖_{A(T)}`.
    pub fn alpha_dot_norm(&self) -> f64 {
        self.alpha_dot.coeffs().iter().map(|c| c.norm()).sum()
    }
}

/// Rescales dimensional motion data with `t' = ωt`, `x' = x/d`.
///
/// `alpha_dim` holds the coefficients of `α` in `e^{ik·2πt/T}`; since one
/// period is one revolution these are also its coefficients in `e^{ikt'}`.
pub fn nondimensionalize(phys: &PhysicalParams, alpha_dim: &ScalarSeries, omega_dim: f64) -> Result<BodyMotion> {
    positive("omega", omega_dim)?;
    let turn = omega_dim * phys.period;
    if (turn - 2.0 * PI).abs() > 1e-9 * 2.0 * PI {
        return Err(Error::InvalidParameter(format!(
            "period and angular speed are incompatible: omega*T = {turn}, expected 2*pi"
        )));
    }
    let nu = phys.viscosity / phys.density;
    let alpha = alpha_dim.scaled(real(phys.diameter / nu));
    let omega = omega_dim * phys.diameter * phys.diameter / nu;
    BodyMotion::new(alpha, omega)
}

/// Radial cutoff with `φ = 1` on `|x| ≤ R` and `φ = 0` on `|x| ≥ 2R`.
///
/// The transition is the smooth step `g(1−s)/(g(1−s) + g(s))`,
/// `g(s) = exp(−1/s)`, in `s = (|x| − R)/R`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoff {
    radius: f64,
}

impl Cutoff {
    pub fn new(radius: f64) -> Result<Self> {
        positive("cutoff radius", radius)?;
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn step(s: f64) -> (f64, f64) {
        if s <= 0.0 {
            return (1.0, 0.0);
        }
        if s >= 1.0 {
            return (0.0, 0.0);
        }
        let a = (-1.0 / (1.0 - s)).exp();
        let b = (-1.0 / s).exp();
        let sum = a + b;
        let d = -a * b * (1.0 / ((1.0 - s) * (1.0 - s)) + 1.0 / (s * s)) / (sum * sum);
        (a / sum, d)
    }

    pub fn value(&self, r: f64) -> f64 {
        Self::step((r - self.radius) / self.radius).0
    }

    /// `dφ/dr`.
    pub fn derivative(&self, r: f64) -> f64 {
        Self::step((r - self.radius) / self.radius).1 / self.radius
    }
}

/// The lifting field and diagnostics of its construction.
#[derive(Clone, Debug)]
pub struct LiftingField {
    pub velocity: FieldSeries,
    pub cutoff: Cutoff,
    /// Largest `|div U|` over all modes.
    pub max_divergence: f64,
    /// Largest pointwise difference to the sampled closed form.
    pub correction: f64,
    /// Fraction of `‖U‖²_{L²}` outside `|x| ≤ 2R`.
    pub outside_fraction: f64,
}

/// `U(t, x) = ½ rot[(α(t)e₁∧x − ωe₁|x|²)φ(x)]` with modes `|k| ≤ k_max`.
///
/// The closed-form curl is sampled pointwise and then replaced by the
/// divergence-free field that keeps its values at the grid points in
/// `|x| < R`. The sampled cutoff is not resolved by the grid, so the
/// correction reaches beyond `2R` at the level of the spectral truncation error.
pub fn lifting_field(
    alpha: &ScalarSeries,
    omega: f64,
    cutoff: Cutoff,
    grid: BoxGrid,
    k_max: usize,
) -> Result<LiftingField> {
    let r = cutoff.radius();
    if 2.0 * r >= grid.safe_radius() {
        return Err(Error::DomainApproximation(format!(
            "cutoff support 2R = {} exceeds the safe radius {:.3}",
            2.0 * r,
            grid.safe_radius()
        )));
    }
    if alpha.k_max() > k_max
        && alpha
            .iter()
            .any(|(k, c)| k.unsigned_abs() as usize > k_max && c.norm() > 0.0)
    {
        return Err(Error::InvalidParameter(format!(
            "speed profile has modes beyond the lifting support {k_max}"
        )));
    }
    let translation = Field::vector_from_fn(grid, |x| {
        let rr = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let phi = cutoff.value(rr);
        let dphi = cutoff.derivative(rr);
        if dphi == 0.0 {
            return [real(phi), ZERO, ZERO];
        }
        // φe₁ + ½φ'(r e₁ − x₁x/r)
        let h = 0.5 * dphi;
        [
            real(phi + h * (rr - x[0] * x[0] / rr)),
            real(-h * x[0] * x[1] / rr),
            real(-h * x[0] * x[2] / rr),
        ]
    });
    let rotation = Field::vector_from_fn(grid, |x| {
        let rr = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        // (φ + ½rφ') e₁∧x
        let g = cutoff.value(rr) + 0.5 * rr * cutoff.derivative(rr);
        [ZERO, real(-g * x[2]), real(g * x[1])]
    });
    let (translation, c1) = interior_constrained_projection(&translation, r)?;
    let (rotation, c2) = interior_constrained_projection(&rotation, r)?;

    let zero = Field::zeros(grid, 3);
    let mut velocity = FieldSeries::zeros(k_max, &zero);
    for (k, a) in alpha.iter() {
        if a.norm() > 0.0 {
            if let Some(slot) = velocity.coeff_mut(k) {
                slot.axpy(*a, &translation)?;
            }
        }
    }
    if omega != 0.0 {
        velocity.coeff_mut(0).unwrap().axpy(real(omega), &rotation)?;
    }
    let mut max_divergence: f64 = 0.0;
    let mut outside = 0.0;
    let mut total = 0.0;
    for c in velocity.coeffs() {
        max_divergence = max_divergence.max(c.divergence()?.max_abs());
        let (o, t) = c.mass_split(2.0 * r);
        outside += o;
        total += t;
    }
    let scale = alpha.coeffs().iter().map(|c| c.norm()).fold(omega.abs(), f64::max);
    Ok(LiftingField {
        velocity,
        cutoff,
        max_divergence,
        correction: scale * c1.max(c2),
        outside_fraction: if total > 0.0 { outside / total } else { 0.0 },
    })
}

/// Divergence-free field equal to `field` at the grid points with
/// `|x| < radius`: `P(field + z)` with `P` the Helmholtz projection and `z`
/// supported on those points. `z` solves the dense system `S P Sᵀ z = S(field − P field)`
/// with `S` the restriction to the inner points; `P` is applied through its
/// translation-invariant kernel. Returns the field and `max |result − field|`.
fn interior_constrained_projection(field: &Field, radius: f64) -> Result<(Field, f64)> {
    let grid = *field.grid();
    let n = grid.n();
    let len = grid.len();
    let r2 = radius * radius;
    let inner: Vec<usize> = (0..len)
        .filter(|&idx| {
            let x = grid.position(idx);
            x[0] * x[0] + x[1] * x[1] + x[2] * x[2] < r2
        })
        .collect();
    let projected = field.helmholtz_project()?;
    if inner.is_empty() {
        let size = projected.sub(field)?.max_abs();
        return Ok((projected, size));
    }
    let origin = grid.index(n / 2, n / 2, n / 2);
    let kernels = (0..3)
        .map(|b| {
            let mut delta = Field::zeros(grid, 3);
            delta.component_mut(b)[origin] = real(1.0);
            delta.helmholtz_project()
        })
        .collect::<Result<Vec<Field>>>()?;
    let m = inner.len();
    let shifted = |p: usize, q: usize| {
        let [a1, a2, a3] = grid.unravel(p);
        let [b1, b2, b3] = grid.unravel(q);
        let w = |a: usize, b: usize| (a + n + n / 2 - b) % n;
        grid.index(w(a1, b1), w(a2, b2), w(a3, b3))
    };
    let mut matrix = DMatrix::<Complex64>::zeros(3 * m, 3 * m);
    for (i, &p) in inner.iter().enumerate() {
        for (j, &q) in inner.iter().enumerate() {
            let off = shifted(p, q);
            for a in 0..3 {
                for b in 0..3 {
                    matrix[(3 * i + a, 3 * j + b)] = kernels[b].component(a)[off];
                }
            }
        }
    }
    let mut rhs = DVector::<Complex64>::zeros(3 * m);
    for (i, &p) in inner.iter().enumerate() {
        for a in 0..3 {
            rhs[3 * i + a] = field.component(a)[p] - projected.component(a)[p];
        }
    }
    let z = matrix
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| matrix.lu().solve(&rhs))
        .ok_or_else(|| Error::Numerical("interior constraint system is singular".into()))?;
    let mut spikes = Field::zeros(grid, 3);
    for (i, &p) in inner.iter().enumerate() {
        for a in 0..3 {
            spikes.component_mut(a)[p] = z[3 * i + a];
        }
    }
    let out = projected.add(&spikes.helmholtz_project()?)?;
    let size = out.sub(field)?.max_abs();
    Ok((out, size))
}

/// Which form of the rotating time derivative an operator uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    /// `∂_t + e₁∧ − e₁∧x·∇`, applied to safe-ball fields only.
    Body,
    /// Plain `∂_t` after conjugation with the frame rotation.
    Inertial,
}

fn mode_time_derivative(frame: Frame, k: i64, v: &Field) -> Field {
    match frame {
        Frame::Body => rotating_derivative_unchecked(k, v),
        Frame::Inertial => v.scaled(Complex64::new(0.0, k as f64)),
    }
}

fn dealias_cutoff(grid: &BoxGrid) -> f64 {
    grid.n() as f64 * grid.fundamental_wavenumber() / 3.0 * (1.0 + 1e-12)
}

/// 2/3-rule truncation fused with the gradient, layout `[c*3+i] = ∂_i f_c`.
fn dealiased_gradient(f: &Field) -> Field {
    let cut = dealias_cutoff(f.grid());
    let nc = f.ncomp();
    f.apply_multiplier(nc * 3, |xi, u, out| {
        if xi.iter().any(|x| x.abs() > cut) {
            return;
        }
        for c in 0..nc {
            for i in 0..3 {
                out[c * 3 + i] = I * xi[i] * u[c];
            }
        }
    })
}

/// Dealiased `(a·∇)b` for vector series, truncated to `|k| ≤ k_out`.
///
/// Both factors are truncated to `3|m| ≤ n` before the pointwise product and
/// the product is truncated again. Time products use enough samples that the
/// retained modes are free of aliasing.
pub fn convective_series(a: &FieldSeries, b: &FieldSeries, k_out: usize) -> Result<FieldSeries> {
    if a.ncomp() != 3 || b.ncomp() != 3 || !a.grid().same_as(b.grid()) {
        return Err(Error::Structural(
            "convective term needs vector series on one grid".into(),
        ));
    }
    let a_d = a.map_fields(Field::dealias);
    let grad_b = b.map_fields(dealiased_gradient);
    let nt = a.k_max() + b.k_max() + k_out + 1;
    let samples = (0..nt)
        .into_par_iter()
        .map(|j| {
            let t = 2.0 * PI * j as f64 / nt as f64;
            Field::convective(&a_d.time_eval(t), &grad_b.time_eval(t))
        })
        .collect::<Result<Vec<Field>>>()?;
    Ok(FieldSeries::from_time_samples(&samples, k_out)?.map_fields(Field::dealias))
}

fn check_lifting(v: &FieldSeries, lifting: &FieldSeries) -> Result<()> {
    if v.ncomp() != 3 || lifting.ncomp() != 3 || !v.grid().same_as(lifting.grid()) {
        return Err(Error::Structural(
            "perturbation and lifting must be vector series on one grid".into(),
        ));
    }
    Ok(())
}

/// The lifting terms `−ω D_t U + ΔU + α∂₁U` with `D_t` the frame's time
/// derivative, truncated to `|k| ≤ k_out`.
pub fn lifting_forcing(
    lifting: &FieldSeries,
    motion: &BodyMotion,
    frame: Frame,
    guard: &SupportGuard,
    k_out: usize,
) -> Result<FieldSeries> {
    if frame == Frame::Body {
        guard.check_all(lifting.coeffs(), "lifting field rotation term")?;
    }
    let omega = motion.omega();
    let local = lifting.map(|k, u| {
        let mut r = mode_time_derivative(frame, k, u).scaled(real(-omega));
        r.add_assign_unchecked(&u.laplacian());
        r
    });
    let drift = motion.alpha().times_fields(&lifting.map_fields(|u| u.partial(0)))?;
    local.truncate(k_out).add(&drift.truncate(k_out))
}

/// `N(v) = (α−λ)∂₁v − ω D_t U + ΔU + α∂₁U − (v+U)·∇(v+U)` with modes
/// `|k| ≤ v.k_max`. The convective part is [`convective_series`].
pub fn nonlinearity(
    v: &FieldSeries,
    lifting: &FieldSeries,
    motion: &BodyMotion,
    frame: Frame,
    guard: &SupportGuard,
) -> Result<FieldSeries> {
    check_lifting(v, lifting)?;
    let k = v.k_max();
    let data = lifting_forcing(lifting, motion, frame, guard, k)?;
    nonlinearity_with(v, lifting, motion.alpha(), motion.lambda(), &data)
}

/// [`nonlinearity`] with the lifting terms precomputed.
fn nonlinearity_with(
    v: &FieldSeries,
    lifting: &FieldSeries,
    alpha: &ScalarSeries,
    lambda: f64,
    lifting_terms: &FieldSeries,
) -> Result<FieldSeries> {
    let k = v.k_max();
    let mut fluctuation = alpha.clone();
    *fluctuation.coeff_mut(0).unwrap() -= real(lambda);
    let drift = fluctuation.times_fields(&v.map_fields(|f| f.partial(0)))?.truncate(k);
    let total = v.add(&lifting.truncate(k))?;
    let conv = convective_series(&total, &total, k)?;
    drift.add(&lifting_terms.truncate(k))?.sub(&conv)
}

/// Weighted terms of the `X^q` norm.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct XNorm {
    /// `ω‖D_t v‖_{A^q}`.
    pub rotation: f64,
    /// `‖∇²v‖_{A^q}`.
    pub hessian: f64,
    /// `λ‖∂₁v‖_{A^q}`.
    pub translation: f64,
    /// `λ^{1/2}‖v‖_{A^{s₁}}`.
    pub velocity: f64,
    /// `λ^{1/4}‖∇v‖_{A^{s₂}}`.
    pub gradient: f64,
}

impl XNorm {
    pub fn total(&self) -> f64 {
        self.rotation + self.hessian + self.translation + self.velocity + self.gradient
    }
}

/// The `X^q` norm of a vector series, with `D_t` taken in the given frame.
pub fn x_norm(v: &FieldSeries, params: &FlowParams, frame: Frame, guard: &SupportGuard) -> Result<XNorm> {
    if v.ncomp() != 3 {
        return Err(Error::Structural("X^q norm needs a vector series".into()));
    }
    if frame == Frame::Body {
        guard.check_all(v.coeffs(), "X^q rotation term")?;
    }
    let (q, s1, s2) = (params.q, params.s1(), params.s2());
    let parts: Vec<XNorm> = v
        .iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(k, f)| {
            if f.max_abs() == 0.0 {
                return XNorm::default();
            }
            XNorm {
                rotation: mode_time_derivative(frame, k, f).lq_norm(q),
                hessian: f.hessian().lq_norm(q),
                translation: f.partial(0).lq_norm(q),
                velocity: f.lq_norm(s1),
                gradient: f.gradient().lq_norm(s2),
            }
        })
        .collect();
    let sum = |g: fn(&XNorm) -> f64| parts.iter().map(g).sum::<f64>();
    Ok(XNorm {
        rotation: params.omega * sum(|x| x.rotation),
        hessian: sum(|x| x.hessian),
        translation: params.lambda * sum(|x| x.translation),
        velocity: params.lambda.sqrt() * sum(|x| x.velocity),
        gradient: params.lambda.powf(0.25) * sum(|x| x.gradient),
    })
}

/// Parameters of the fixed-point iteration.
#[derive(Clone, Debug)]
pub struct FixedPointConfig {
    pub q: f64,
    /// Exponent `ρ` in `ω < κλ^ρ` and in the ball radius `δ = λ^ρ`.
    pub rho_exp: f64,
    pub theta: f64,
    pub kappa: f64,
    /// Upper end of the admissible Reynolds numbers.
    pub lambda0: f64,
    /// Data smallness; `None` means `λ²`.
    pub epsilon: Option<f64>,
    /// Relative stopping threshold on the update norm.
    pub tol: f64,
    pub max_iter: usize,
    pub cutoff_radius: f64,
    pub frame: FrameConfig,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            q: 1.25,
            rho_exp: 0.9,
            theta: 1.0,
            kappa: 1.0,
            lambda0: 0.1,
            epsilon: None,
            tol: 1e-10,
            max_iter: 60,
            cutoff_radius: 2.5,
            frame: FrameConfig::default(),
        }
    }
}

impl FixedPointConfig {
    /// Checks `q ∈ [6/5, 4/3]`, `ρ ∈ ((3q−3)/q, 1)` and positivity.
    pub fn validate(&self) -> Result<()> {
        if !(self.q >= 1.2 - 1e-12 && self.q <= 4.0 / 3.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "q must lie in [6/5, 4/3], got {}",
                self.q
            )));
        }
        let lo = (3.0 * self.q - 3.0) / self.q;
        if !(self.rho_exp > lo && self.rho_exp < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rho_exp must lie in ({lo}, 1), got {}",
                self.rho_exp
            )));
        }
        positive("theta", self.theta)?;
        positive("kappa", self.kappa)?;
        positive("lambda0", self.lambda0)?;
        positive("tol", self.tol)?;
        positive("cutoff radius", self.cutoff_radius)?;
        if let Some(e) = self.epsilon {
            positive("epsilon", e)?;
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    /// `λ ∈ (0, λ₀)` and `ω ∈ (λ²/θ, κλ^ρ)`.
    pub fn check_window(&self, lambda: f64, omega: f64) -> Result<()> {
        if !(lambda > 0.0 && lambda < self.lambda0) {
            return Err(Error::InvalidParameter(format!(
                "lambda = {lambda} outside (0, {})",
                self.lambda0
            )));
        }
        let lo = lambda * lambda / self.theta;
        let hi = self.kappa * lambda.powf(self.rho_exp);
        if !(omega > lo && omega < hi) {
            return Err(Error::InvalidParameter(format!("omega = {omega} outside ({lo}, {hi})")));
        }
        Ok(())
    }

    pub fn epsilon(&self, lambda: f64) -> f64 {
        self.epsilon.unwrap_or(lambda * lambda)
    }

    pub fn delta(&self, lambda: f64) -> f64 {
        lambda.powf(self.rho_exp)
    }

    /// Flow parameters for the linear steps and the `X^q` weights.
    pub fn flow_params(&self, lambda: f64, omega: f64) -> Result<FlowParams> {
        FlowParams::new(lambda, omega, self.theta, self.theta * omega, self.q)
    }
}

/// Inputs of the self-mapping inequality
/// `C(ε + ελ⁻¹δ + λ^{−(3q−3)/q}δ² + (λ+ω+ε)(1+λ+ω+ε+‖α'‖+δ)) ≤ δ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallnessInputs {
    pub constant: f64,
    pub lambda: f64,
    pub omega: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub alpha_dot_norm: f64,
    pub q: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallnessVerdict {
    pub passed: bool,
    pub lhs: f64,
    pub delta: f64,
    /// `δ − lhs`.
    pub margin: f64,
}

/// Evaluates the self-mapping inequality. Terms with a vanishing numerator
/// count as zero even when `λ = 0`.
pub fn smallness_inequality(s: &SmallnessInputs) -> SmallnessVerdict {
    let singular = |num: f64, den: f64| if num == 0.0 { 0.0 } else { num / den };
    let p = (3.0 * s.q - 3.0) / s.q;
    let lin = s.lambda + s.omega + s.epsilon;
    let inner = s.epsilon
        + singular(s.epsilon * s.delta, s.lambda)
        + singular(s.delta * s.delta, s.lambda.powf(p))
        + lin * (1.0 + lin + s.alpha_dot_norm + s.delta);
    let lhs = s.constant * inner;
    let margin = s.delta - lhs;
    SmallnessVerdict {
        passed: margin >= 0.0,
        lhs,
        delta: s.delta,
        margin,
    }
}

/// The inequality at `δ = λ^ρ`, `ε` from the config. Fails outright when
/// `ω ≥ κλ^ρ`.
pub fn smallness_check(
    cfg: &FixedPointConfig,
    lambda: f64,
    omega: f64,
    alpha_dot_norm: f64,
    constant: f64,
) -> SmallnessVerdict {
    let inputs = SmallnessInputs {
        constant,
        lambda,
        omega,
        epsilon: cfg.epsilon(lambda),
        delta: cfg.delta(lambda),
        alpha_dot_norm,
        q: cfg.q,
    };
    let mut verdict = smallness_inequality(&inputs);
    if omega >= cfg.kappa * lambda.powf(cfg.rho_exp) {
        verdict.passed = false;
    }
    verdict
}

/// Largest `λ ≤ lambda_max` for which [`smallness_check`] passes with
/// `ω = omega_of(λ)`, located by bisection. `None` if it fails at `λ = 1e-12`.
pub fn critical_lambda(
    cfg: &FixedPointConfig,
    constant: f64,
    alpha_dot_norm: f64,
    omega_of: impl Fn(f64) -> f64,
    lambda_max: f64,
) -> Option<f64> {
    let passes = |l: f64| smallness_check(cfg, l, omega_of(l), alpha_dot_norm, constant).passed;
    let (mut lo, mut hi) = (1e-12, lambda_max);
    if !passes(lo) {
        return None;
    }
    if passes(hi) {
        return Some(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if passes(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Some(lo)
}

/// One Picard step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// `X^q` norm of `v_{n} − v_{n−1}`.
    pub update_xnorm: f64,
    /// `update_n / update_{n−1}`; absent for the first step.
    pub contraction_ratio: Option<f64>,
    /// `‖N(v_n) − N(v_{n−1})‖_{A^q}` relative to the data, which equals the
    /// assembled residual of `v_n`.
    pub residual: f64,
}

pub fn write_trace_csv<W: Write>(w: &mut W, trace: &[IterationRecord]) -> Result<()> {
    writeln!(w, "iter,update_xnorm,contraction_ratio,residual")?;
    for r in trace {
        let ratio = r.contraction_ratio.map(|x| format!("{x:.6e}")).unwrap_or_default();
        writeln!(w, "{},{:.6e},{},{:.6e}", r.iter, r.update_xnorm, ratio, r.residual)?;
    }
    Ok(())
}

/// Residual of the momentum equation for `u = v + U` in the inertial frame,
/// `ω∂_t u − Δu − α∂₁u + u·∇u + ∇p − f`, assembled from the spectral
/// operators directly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualReport {
    /// `‖R‖_{A^q}`, which bounds `‖R(t)‖_{L^q}` at every time.
    pub absolute: f64,
    /// Sum of the `A^q` norms of the individual terms.
    pub scale: f64,
    pub relative: f64,
}

pub fn assembled_residual(
    velocity: &FieldSeries,
    pressure_gradient: &FieldSeries,
    lifting: &FieldSeries,
    forcing: &FieldSeries,
    motion: &BodyMotion,
    q: f64,
) -> Result<ResidualReport> {
    check_lifting(velocity, lifting)?;
    let k = velocity.k_max();
    let u = velocity.add(&lifting.truncate(k))?;
    let omega = motion.omega();
    let terms = [
        u.map(|m, f| f.scaled(Complex64::new(0.0, omega * m as f64))),
        u.map_fields(|f| f.laplacian().scaled(real(-1.0))),
        motion
            .alpha()
            .times_fields(&u.map_fields(|f| f.partial(0)))?
            .truncate(k)
            .scaled(real(-1.0)),
        convective_series(&u, &u, k)?,
        pressure_gradient.truncate(k),
        forcing.truncate(k).scaled(real(-1.0)),
    ];
    let mut total = terms[0].clone();
    for t in &terms[1..] {
        total = total.add(t)?;
    }
    let absolute = total.a_norm(q)?;
    let scale = terms
        .iter()
        .map(|t| t.a_norm(q))
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum::<f64>();
    Ok(ResidualReport {
        absolute,
        scale,
        relative: if scale > 0.0 { absolute / scale } else { absolute },
    })
}

/// Result of a converged fixed-point solve. Fields are in the inertial frame.
#[derive(Clone, Debug)]
pub struct FixedPointSolution {
    pub velocity: FieldSeries,
    pub pressure_gradient: FieldSeries,
    pub lifting: LiftingField,
    /// The forcing conjugated to the inertial frame.
    pub forcing: FieldSeries,
    pub trace: Vec<IterationRecord>,
    pub residual: ResidualReport,
    /// Largest `|div(v + U)|` over all modes.
    pub max_divergence: f64,
    /// Set when `‖α−λ‖_A + ‖f‖_{A^q} > ε`.
    pub data_warning: Option<String>,
}

impl FixedPointSolution {
    /// `u = v + U`.
    pub fn total_velocity(&self) -> Result<FieldSeries> {
        self.velocity
            .add(&self.lifting.velocity.truncate(self.velocity.k_max()))
    }

    /// The perturbation in the body frame. Only available when it lives in
    /// the safe ball, which excludes the Oseen far field of a nonzero net force.
    pub fn body_frame_velocity(&self, frame: &FrameConfig) -> Result<FieldSeries> {
        rotate_frame(&self.velocity, FrameDirection::Inverse, self.velocity.k_max(), frame)
    }
}

/// Inertial-frame Picard iteration `V_{n+1} = S(F + N(V_n))`, `V_0 = 0`, with
/// `S` the time-periodic Oseen solve. Returns the last iterate, its pressure
/// gradient and the trace.
pub fn picard_iterate(
    forcing: &FieldSeries,
    lifting: &FieldSeries,
    motion_alpha: &ScalarSeries,
    params: &FlowParams,
    tol: f64,
    max_iter: usize,
) -> Result<(FieldSeries, FieldSeries, Vec<IterationRecord>)> {
    check_lifting(forcing, lifting)?;
    let k = forcing.k_max();
    let (lambda, omega) = (params.lambda, params.omega);
    let guard = SupportGuard::default();

    let lifting_terms = {
        let local = lifting.map(|m, u| {
            let mut r = u.scaled(Complex64::new(0.0, -omega * m as f64));
            r.add_assign_unchecked(&u.laplacian());
            r
        });
        let drift = motion_alpha.times_fields(&lifting.map_fields(|u| u.partial(0)))?;
        local.truncate(k).add(&drift.truncate(k))?
    };
    let data_scale = {
        let s = forcing.a_norm(params.q)? + lifting_terms.a_norm(params.q)?;
        if s > 0.0 {
            s
        } else {
            1.0
        }
    };

    let mut v = FieldSeries::zeros(k, &Field::zeros(*forcing.grid(), 3));
    let mut n_prev = nonlinearity_with(&v, lifting, motion_alpha, lambda, &lifting_terms)?;
    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut first: Option<f64> = None;
    let mut rising = 0;
    for iter in 1..=max_iter {
        let sol = solve_oseen_series(&forcing.add(&n_prev)?, lambda, omega)?;
        let next = sol.velocity;
        if !next.coeffs().iter().all(Field::is_finite) {
            return Err(Error::Numerical(format!("iterate {iter} is not finite")));
        }
        let update = x_norm(&next.sub(&v)?, params, Frame::Inertial, &guard)?.total();
        if !update.is_finite() {
            return Err(Error::Numerical(format!("update norm of iterate {iter} is not finite")));
        }
        let n_next = nonlinearity_with(&next, lifting, motion_alpha, lambda, &lifting_terms)?;
        let residual = n_next.sub(&n_prev)?.a_norm(params.q)? / data_scale;
        let ratio = trace.last().map(|r| update / r.update_xnorm);
        trace.push(IterationRecord {
            iter,
            update_xnorm: update,
            contraction_ratio: ratio,
            residual,
        });
        v = next;
        n_prev = n_next;

        let reference = *first.get_or_insert(update);
        if update == 0.0 || update < tol * reference {
            return Ok((v, sol.pressure_gradient, trace));
        }
        match ratio {
            Some(r) if r >= 1.0 || r.is_nan() => rising += 1,
            _ => rising = 0,
        }
        if rising >= 3 {
            return Err(Error::NonConvergence {
                iterations: iter,
                reason: "contraction ratio >= 1 for 3 consecutive iterations".into(),
                trace,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        reason: format!("update norm above {tol:e} x first update after {max_iter} iterations"),
        trace,
    })
}

/// Solves the nonlinear problem for body-frame forcing `f` and the given
/// motion. The working time support is `f.k_max` plus the frame guard width.
pub fn fixed_point_solve(
    forcing: &FieldSeries,
    motion: &BodyMotion,
    cfg: &FixedPointConfig,
) -> Result<FixedPointSolution> {
    cfg.validate()?;
    let (lambda, omega) = (motion.lambda(), motion.omega());
    cfg.check_window(lambda, omega)?;
    if forcing.ncomp() != 3 {
        return Err(Error::Structural("forcing must be a vector series".into()));
    }
    let params = cfg.flow_params(lambda, omega)?;
    let data = motion.fluctuation_norm() + forcing.a_norm(cfg.q)?;
    let eps = cfg.epsilon(lambda);
    let data_warning =
        (data > eps).then(|| format!("data size {data:.3e} exceeds the smallness level epsilon = {eps:.3e}"));

    let k = (forcing.k_max() + cfg.frame.guard_width).max(motion.alpha().k_max());
    let inertial = rotate_frame(forcing, FrameDirection::Forward, k, &cfg.frame)?;
    let cutoff = Cutoff::new(cfg.cutoff_radius)?;
    let lifting = lifting_field(motion.alpha(), omega, cutoff, *forcing.grid(), k)?;
    let (velocity, pressure_gradient, trace) = picard_iterate(
        &inertial,
        &lifting.velocity,
        motion.alpha(),
        &params,
        cfg.tol,
        cfg.max_iter,
    )?;
    let residual = assembled_residual(
        &velocity,
        &pressure_gradient,
        &lifting.velocity,
        &inertial,
        motion,
        cfg.q,
    )?;
    let mut max_divergence: f64 = 0.0;
    for c in velocity.add(&lifting.velocity)?.coeffs() {
        max_divergence = max_divergence.max(c.divergence()?.max_abs());
    }
    Ok(FixedPointSolution {
        velocity,
        pressure_gradient,
        lifting,
        forcing: inertial,
        trace,
        residual,
        max_divergence,
        data_warning,
    })
}

/// Zero series with the layout of `template`.
pub fn zero_like(template: &FieldSeries) -> FieldSeries {
    TorusSeries::zeros(template.k_max(), &Field::zeros(*template.grid(), template.ncomp()))
}
