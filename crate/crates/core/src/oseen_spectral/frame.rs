//! Rotating-frame conjugation by `Q(t)`, the rotation about e₁ by angle `t`.
//!
//! The forward map is `U(t, y) = Q(t) u(t, Q(t)ᵀ y)` and the inverse is
//! `u(t, x) = Q(t)ᵀ U(t, Q(t) x)`. Both are evaluated at uniform time samples
//! and re-expanded in time modes. Off-grid values come from the trigonometric
//! interpolant in each x₁-plane; preimages outside the box evaluate to zero.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral_field::{fft_transverse, Field, SupportGuard};
use crate::wiener_algebra::FieldSeries;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameDirection {
    /// Inertial to body-fixed: `U(t, y) = Q(t) u(t, Q(t)ᵀ y)`.
    Forward,
    /// Body-fixed to inertial: `u(t, x) = Q(t)ᵀ U(t, Q(t) x)`.
    Inverse,
}

/// Mode budget of the frame transform.
#[derive(Clone, Copy, Debug)]
pub struct FrameConfig {
    /// Extra time modes kept by the forward map. The rotation spreads a field of
    /// azimuthal order `m` over `m + 1` neighbouring modes.
    pub guard_width: usize,
    /// Number of time samples; `None` picks `2·(k_max+1)+1` for the larger
    /// of the input and output supports.
    pub time_samples: Option<usize>,
    pub support: SupportGuard,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            guard_width: 4,
            time_samples: None,
            support: SupportGuard::default(),
        }
    }
}

impl FrameConfig {
    fn samples_for(&self, k_in: usize, k_out: usize) -> Result<usize> {
        let needed = 2 * (k_in.max(k_out) + 1) + 1;
        match self.time_samples {
            None => Ok(needed),
            Some(nt) if nt > 2 * k_out => Ok(nt),
            Some(nt) => Err(Error::InvalidParameter(format!(
                "{nt} time samples cannot resolve output modes up to {k_out}"
            ))),
        }
    }
}

/// `R_a u (y) = R(a) u(R(−a) y)` with `R(a)` the rotation about e₁ by `a`.
/// Scalars (one component) only have their argument rotated.
pub fn rotate_about_axis(field: &Field, angle: f64) -> Result<Field> {
    let nc = field.ncomp();
    if nc != 1 && nc != 3 {
        return Err(Error::Structural(format!(
            "rotation acts on scalars or vectors, got {nc} components"
        )));
    }
    let grid = *field.grid();
    let n = grid.n();
    let nn = n * n;
    let len = grid.len();
    let half = 0.5 * grid.length();
    let k0 = grid.fundamental_wavenumber();
    let (s, c) = angle.sin_cos();

    // 1-D interpolation weights: e^{iκ m x}, split cosine at Nyquist, zero off-box
    let weights = |x: f64, out: &mut [Complex64]| {
        if x.abs() > half * (1.0 + 1e-12) {
            out.iter_mut().for_each(|w| *w = ZERO);
            return;
        }
        for (i, w) in out.iter_mut().enumerate() {
            let m = grid.signed_index(i);
            *w = if m == -((n / 2) as i64) {
                Complex64::new((k0 * m as f64 * x).cos(), 0.0)
            } else {
                Complex64::from_polar(1.0, k0 * m as f64 * x)
            };
        }
    };

    // preimage coordinates of every output point p = j2 + n·j3
    let mut e2 = Array2::<Complex64>::zeros((nn, n));
    let mut e3 = Array2::<Complex64>::zeros((n, nn));
    let mut row = vec![ZERO; n];
    for j3 in 0..n {
        for j2 in 0..n {
            let y2 = grid.coordinate(j2);
            let y3 = grid.coordinate(j3);
            let x2 = c * y2 + s * y3;
            let x3 = -s * y2 + c * y3;
            let p = j2 + n * j3;
            weights(x2, &mut row);
            for (i, w) in row.iter().enumerate() {
                e2[[p, i]] = *w;
            }
            weights(x3, &mut row);
            for (i, w) in row.iter().enumerate() {
                e3[[i, p]] = *w;
            }
        }
    }

    // transverse coefficients per plane, rows (i1, i2), columns i3
    let scale = 1.0 / nn as f64;
    let values: Vec<Vec<Complex64>> = (0..nc)
        .into_par_iter()
        .map(|comp| {
            let mut block = field.component(comp).to_vec();
            fft_transverse(&mut block, n, false);
            let mut g = Array2::<Complex64>::zeros((nn, n));
            for i3 in 0..n {
                for i2 in 0..n {
                    let sign = if (i2 + i3) % 2 == 0 { scale } else { -scale };
                    for i1 in 0..n {
                        g[[i1 * n + i2, i3]] = block[i1 + n * i2 + nn * i3] * sign;
                    }
                }
            }
            let h = g.dot(&e3);
            let mut out = vec![ZERO; len];
            contract_planes(h.view(), e2.view(), n, &mut out);
            out
        })
        .collect();

    let mut out = Field::zeros(grid, nc);
    if nc == 1 {
        out.component_mut(0).copy_from_slice(&values[0]);
    } else {
        out.component_mut(0).copy_from_slice(&values[0]);
        let (u2, u3) = (&values[1], &values[2]);
        let data = out.data_mut();
        for idx in 0..len {
            data[len + idx] = c * u2[idx] - s * u3[idx];
            data[2 * len + idx] = s * u2[idx] + c * u3[idx];
        }
    }
    Ok(out)
}

/// `out[i1 + n·p] = Σ_{i2} e2[p, i2] · h[(i1, i2), p]`.
fn contract_planes(h: ArrayView2<Complex64>, e2: ArrayView2<Complex64>, n: usize, out: &mut [Complex64]) {
    let nn = n * n;
    for i1 in 0..n {
        for i2 in 0..n {
            let hrow = h.row(i1 * n + i2);
            for p in 0..nn {
                let w = e2[[p, i2]];
                if w != ZERO {
                    let j2 = p % n;
                    let j3 = p / n;
                    out[i1 + n * j2 + nn * j3] += w * hrow[p];
                }
            }
        }
    }
}

/// Conjugates a time-periodic field by the frame rotation and returns modes
/// `|k| ≤ k_out`.
pub fn rotate_frame(
    series: &FieldSeries,
    direction: FrameDirection,
    k_out: usize,
    config: &FrameConfig,
) -> Result<FieldSeries> {
    config.support.check_all(series.coeffs(), "frame transform input")?;
    rotate_frame_unguarded(series, direction, k_out, config)
}

/// [`rotate_frame`] without the support check, for callers that checked a
/// family of series jointly.
pub(crate) fn rotate_frame_unguarded(
    series: &FieldSeries,
    direction: FrameDirection,
    k_out: usize,
    config: &FrameConfig,
) -> Result<FieldSeries> {
    let nt = config.samples_for(series.k_max(), k_out)?;
    let sign = match direction {
        FrameDirection::Forward => 1.0,
        FrameDirection::Inverse => -1.0,
    };
    let samples = (0..nt)
        .map(|j| {
            let t = 2.0 * PI * j as f64 / nt as f64;
            rotate_about_axis(&series.time_eval(t), sign * t)
        })
        .collect::<Result<Vec<Field>>>()?;
    FieldSeries::from_time_samples(&samples, k_out)
}

/// Forward transform with the configured guard width added to the support.
pub fn to_body_frame(series: &FieldSeries, config: &FrameConfig) -> Result<FieldSeries> {
    rotate_frame(
        series,
        FrameDirection::Forward,
        series.k_max() + config.guard_width,
        config,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_field::BoxGrid;
    use crate::wiener_algebra::TorusSeries;

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    fn bump(x: [f64; 3], center: [f64; 3], s: f64) -> f64 {
        let r2: f64 = (0..3).map(|i| (x[i] - center[i]).powi(2)).sum();
        (-r2 / (2.0 * s * s)).exp()
    }

    #[test]
    fn quarter_turn_is_an_index_permutation() {
        let grid = BoxGrid::new(16, 12.0).unwrap();
        let u = Field::vector_from_fn(grid, |x| {
            let b = bump(x, [0.3, 1.2, -0.4], 1.0);
            [c(b), c(2.0 * b), c(-b)]
        });
        let r = rotate_about_axis(&u, PI / 2.0).unwrap();
        // R(π/2): e₂ ↦ e₃, e₃ ↦ −e₂; value at y equals R u(R⁻¹y)
        let expected = Field::vector_from_fn(grid, |y| {
            let x = [y[0], y[2], -y[1]];
            let b = bump(x, [0.3, 1.2, -0.4], 1.0);
            [c(b), c(b), c(2.0 * b)]
        });
        assert!(r.sub(&expected).unwrap().max_abs() < 1e-6);
    }

    #[test]
    fn generic_angle_is_spectrally_accurate() {
        let grid = BoxGrid::new(32, 16.0).unwrap();
        let f = |x: [f64; 3]| bump(x, [0.5, 0.6, 0.4], 1.15);
        let u = Field::scalar_from_fn(grid, |x| c(f(x)));
        let a = 0.83;
        let r = rotate_about_axis(&u, a).unwrap();
        let (s, co) = a.sin_cos();
        let expected = Field::scalar_from_fn(grid, |y| c(f([y[0], co * y[1] + s * y[2], -s * y[1] + co * y[2]])));
        let err = r.sub(&expected).unwrap().max_abs();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn axisymmetric_field_is_invariant() {
        let grid = BoxGrid::new(32, 16.0).unwrap();
        let u = Field::vector_from_fn(grid, |x| [c(bump(x, [0.4, 0.0, 0.0], 1.2)), c(0.0), c(0.0)]);
        let s = TorusSeries::steady(u.clone());
        let f = rotate_frame(&s, FrameDirection::Forward, 2, &FrameConfig::default()).unwrap();
        assert!(f.coeff(0).unwrap().sub(&u).unwrap().max_abs() < 1e-10);
        for k in [-2i64, -1, 1, 2] {
            assert!(f.coeff(k).unwrap().max_abs() < 1e-10);
        }
    }

    #[test]
    fn bump_on_e2_moves_to_e3_at_quarter_period() {
        let grid = BoxGrid::new(32, 16.0).unwrap();
        let u = Field::scalar_from_fn(grid, |x| c(bump(x, [0.0, 2.0, 0.0], 1.1)));
        let cfg = FrameConfig {
            guard_width: 24,
            ..FrameConfig::default()
        };
        let f = rotate_frame(&TorusSeries::steady(u), FrameDirection::Forward, 24, &cfg).unwrap();
        let at = f.time_eval(PI / 2.0);
        let on_e3 = at.value(grid.index(16, 16, 20), 0).re;
        let on_e2 = at.value(grid.index(16, 20, 16), 0).re;
        assert!((on_e3 - 1.0).abs() < 1e-6, "{on_e3}");
        let expected = (-8.0f64 / (2.0 * 1.1 * 1.1)).exp();
        assert!((on_e2 - expected).abs() < 1e-6, "{on_e2}");
    }

    #[test]
    fn outside_support_is_rejected() {
        let grid = BoxGrid::new(16, 8.0).unwrap();
        let u = Field::constant(grid, &[c(1.0), c(0.0), c(0.0)]);
        let r = rotate_frame(
            &TorusSeries::steady(u),
            FrameDirection::Forward,
            2,
            &FrameConfig::default(),
        );
        assert!(matches!(r, Err(Error::DomainApproximation(_))));
    }
}
