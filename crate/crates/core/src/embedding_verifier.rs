//! Numerical check of the time-periodic embedding inequality
//!
//! ```text
//! ω^{α/2}‖u‖_{L^{r₀}(T;L^{p₀})} + ω^{β/2}‖∇u‖_{L^{r₁}(T;L^{p₁})} ≤ C (ω‖∂_t u‖_q + ‖∇²u‖_q)
//! ```
//!
//! for purely periodic `u`, together with the kernels and multipliers of the
//! factorization `u = ω^{−α/2} I_{2−α} ∗ γ_α ∗ M_ω (ω∂_t − Δ)u`.
//!
//! Time integrals use the normalized measure on `[0, 2π)` and uniform
//! samples. Series are handled through their nonzero modes only, so a
//! zero-padded series costs the same as the original.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral_field::{lq_norm_from_squares, BoxGrid, Field, SupportGuard};
use crate::wiener_algebra::FieldSeries;

const SPACE_DIM: f64 = 3.0;

/// Exponents of the embedding inequality in three space dimensions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmbeddingParams {
    pub alpha: f64,
    pub beta: f64,
    pub q: f64,
    pub omega: f64,
}

impl EmbeddingParams {
    pub fn new(alpha: f64, beta: f64, q: f64, omega: f64) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(0.0..=2.0).contains(&alpha) {
            return bad("alpha must lie in [0, 2]");
        }
        if !(0.0..=1.0).contains(&beta) {
            return bad("beta must lie in [0, 1]");
        }
        if !(q > 1.0 && q.is_finite()) {
            return bad("q must lie in (1, inf)");
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return bad("omega must be positive");
        }
        if alpha * q >= 2.0 || (2.0 - alpha) * q >= SPACE_DIM {
            return bad("alpha*q < 2 and (2-alpha)*q < 3 required");
        }
        if beta * q >= 2.0 || (1.0 - beta) * q >= SPACE_DIM {
            return bad("beta*q < 2 and (1-beta)*q < 3 required");
        }
        Ok(Self { alpha, beta, q, omega })
    }

    pub fn r0(&self) -> f64 {
        2.0 * self.q / (2.0 - self.alpha * self.q)
    }

    pub fn p0(&self) -> f64 {
        SPACE_DIM * self.q / (SPACE_DIM - (2.0 - self.alpha) * self.q)
    }

    pub fn r1(&self) -> f64 {
        2.0 * self.q / (2.0 - self.beta * self.q)
    }

    pub fn p1(&self) -> f64 {
        SPACE_DIM * self.q / (SPACE_DIM - (1.0 - self.beta) * self.q)
    }
}

/// `γ_α(t) = Σ_{0<|k|≤K} |k|^{−α/2} e^{ikt}` at `nt` uniform samples.
pub fn kernel_gamma(alpha: f64, k_trunc: usize, nt: usize) -> Result<Vec<f64>> {
    if !(0.0..=2.0).contains(&alpha) {
        return Err(Error::InvalidParameter("alpha must lie in [0, 2]".into()));
    }
    if nt == 0 {
        return Err(Error::InvalidParameter("at least one time sample required".into()));
    }
    Ok((0..nt)
        .map(|j| {
            let t = 2.0 * PI * j as f64 / nt as f64;
            (1..=k_trunc)
                .map(|k| 2.0 * (k as f64).powf(-0.5 * alpha) * (k as f64 * t).cos())
                .sum()
        })
        .collect())
}

/// Multiplies by `|ξ|^{−σ}` and zeroes the `ξ = 0` coefficient.
pub fn riesz_potential(field: &Field, sigma: f64) -> Result<Field> {
    if !(0.0..3.0).contains(&sigma) {
        return Err(Error::InvalidParameter(format!("Riesz order {sigma} outside [0, 3)")));
    }
    Ok(field.apply_multiplier(field.ncomp(), |xi, u, out| {
        let k2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        if k2 == 0.0 {
            return;
        }
        let w = k2.powf(-0.5 * sigma);
        for (o, v) in out.iter_mut().zip(u) {
            *o = w * v;
        }
    }))
}

/// `M_ω(k, ξ) = |ωk|^{α/2} |ξ|^{2−α} / (|ξ|² + iωk)` for `k ≠ 0`, and 0 at `k = 0`.
pub fn m_symbol(k: i64, xi: [f64; 3], omega: f64, alpha: f64) -> Complex64 {
    if k == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let k2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
    let wk = omega * k as f64;
    let num = wk.abs().powf(0.5 * alpha) * k2.powf(1.0 - 0.5 * alpha);
    num / Complex64::new(k2, wk)
}

pub fn apply_m_multiplier(u: &FieldSeries, omega: f64, alpha: f64) -> FieldSeries {
    u.map(|k, v| {
        if k == 0 {
            return Field::zeros(*v.grid(), v.ncomp());
        }
        v.apply_multiplier(v.ncomp(), |xi, a, out| {
            let m = m_symbol(k, xi, omega, alpha);
            for (o, x) in out.iter_mut().zip(a) {
                *o = m * x;
            }
        })
    })
}

/// `max |M_ω|` over the box wavevectors and `0 < |k| ≤ k_max`.
pub fn m_symbol_sup(grid: &BoxGrid, k_max: usize, omega: f64, alpha: f64) -> f64 {
    let mut sup = 0.0f64;
    for k in 1..=k_max as i64 {
        for idx in 0..grid.len() {
            sup = sup.max(m_symbol(k, grid.wavevector(idx), omega, alpha).norm());
        }
    }
    sup
}

/// Time convolution `(γ_α ∗ u)(t) = ∫ γ_α(t − s) u(s) ds` under the
/// normalized measure, carried out on uniform samples with the kernel
/// truncated at the series support.
pub fn gamma_convolve(u: &FieldSeries, alpha: f64) -> Result<FieldSeries> {
    let k = u.k_max();
    let nt = 2 * k + 1;
    let gamma = kernel_gamma(alpha, k, nt)?;
    let samples = u.time_samples(nt);
    let conv: Vec<Field> = (0..nt)
        .into_par_iter()
        .map(|i| {
            let mut acc = samples[0].scaled(Complex64::new(0.0, 0.0));
            for (j, s) in samples.iter().enumerate() {
                let w = gamma[(i + nt - j) % nt] / nt as f64;
                acc.axpy(Complex64::new(w, 0.0), s)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    FieldSeries::from_time_samples(&conv, k)
}

/// Rebuilds `u` from `F = ω∂_t u − Δu` as `ω^{−α/2} I_{2−α} ∗ γ_α ∗ M_ω F`.
/// Exact for purely periodic `u` without a spatial mean.
pub fn factorization_reconstruct(u: &FieldSeries, omega: f64, alpha: f64) -> Result<FieldSeries> {
    let f = u.map(|k, v| {
        let mut r = v.scaled(Complex64::new(0.0, omega * k as f64));
        r.axpy_unchecked(Complex64::new(-1.0, 0.0), &v.laplacian());
        r
    });
    let g = gamma_convolve(&apply_m_multiplier(&f, omega, alpha), alpha)?;
    let scale = Complex64::new(omega.powf(-0.5 * alpha), 0.0);
    g.try_map(|_, c| Ok(riesz_potential(c, 2.0 - alpha)?.scaled(scale)))
}

/// Sample count used for mixed norms of a series with top mode `k`.
pub fn default_time_samples(k: usize) -> usize {
    8 * (k + 1)
}

/// Largest `|k|` with a nonzero coefficient.
pub fn time_bandwidth(u: &FieldSeries) -> usize {
    u.iter()
        .filter(|(_, c)| c.max_abs() > 0.0)
        .map(|(k, _)| k.unsigned_abs() as usize)
        .max()
        .unwrap_or(0)
}

/// Nonzero modes of a series. For real series only `k ≥ 0` is kept and the
/// negative modes are implied by conjugation.
struct SparseSeries {
    modes: Vec<(i64, Field)>,
    real: bool,
}

impl SparseSeries {
    fn new(u: &FieldSeries) -> Self {
        let real = (1..=u.k_max() as i64).all(|k| {
            let a = u.coeff(k).unwrap().data();
            let b = u.coeff(-k).unwrap().data();
            a.iter().zip(b).all(|(x, y)| *x == y.conj())
        }) && u.coeff(0).unwrap().data().iter().all(|v| v.im == 0.0);
        let modes = u
            .iter()
            .filter(|(k, c)| (!real || *k >= 0) && c.max_abs() > 0.0)
            .map(|(k, c)| (k, c.clone()))
            .collect();
        Self { modes, real }
    }

    fn map(&self, f: impl Fn(i64, &Field) -> Field) -> Self {
        Self {
            modes: self.modes.iter().map(|(k, c)| (*k, f(*k, c))).collect(),
            real: self.real,
        }
    }

    /// `Σ_c |u_c(t)|² = Σ_d e^{idt} P_d` with `P_{−d} = conj(P_d)`, as the
    /// pairs `(d, P_d)` for `d ≥ 0`.
    fn square_spectrum(&self) -> Vec<(i64, Vec<Complex64>)> {
        let Some((_, first)) = self.modes.first() else {
            return Vec::new();
        };
        let len = first.grid().len();
        let mut full: Vec<(i64, &Field, bool)> = Vec::new();
        for (k, f) in &self.modes {
            full.push((*k, f, false));
            if self.real && *k > 0 {
                full.push((-*k, f, true));
            }
        }
        let mut terms: Vec<(i64, Vec<Complex64>)> = Vec::new();
        for &(k, a, conj_a) in &full {
            for &(l, b, conj_b) in &full {
                let d = k - l;
                if d < 0 {
                    continue;
                }
                let slot = match terms.iter().position(|(e, _)| *e == d) {
                    Some(i) => i,
                    None => {
                        terms.push((d, vec![Complex64::new(0.0, 0.0); len]));
                        terms.len() - 1
                    }
                };
                let acc = &mut terms[slot].1;
                for c in 0..first.ncomp() {
                    acc.par_iter_mut()
                        .zip(a.component(c).par_iter().zip(b.component(c)))
                        .for_each(|(o, (x, y))| {
                            let x = if conj_a { x.conj() } else { *x };
                            let y = if conj_b { *y } else { y.conj() };
                            *o += x * y;
                        });
                }
            }
        }
        terms
    }
}

/// Pointwise `Σ_d e^{idt} P_d` from [`SparseSeries::square_spectrum`].
fn squares_at(spectrum: &[(i64, Vec<Complex64>)], t: f64) -> Vec<f64> {
    let Some((_, first)) = spectrum.first() else {
        return Vec::new();
    };
    let mut out = vec![0.0; first.len()];
    for (d, p) in spectrum {
        let (w, ph) = if *d == 0 {
            (1.0, Complex64::new(1.0, 0.0))
        } else {
            (2.0, Complex64::from_polar(1.0, *d as f64 * t))
        };
        for (o, v) in out.iter_mut().zip(p) {
            *o += w * (ph * v).re;
        }
    }
    // round-off can leave tiny negative values where |u| vanishes
    out.iter_mut().for_each(|v| *v = v.max(0.0));
    out
}

fn combine_in_time(values: &[f64], r: f64) -> f64 {
    if r.is_infinite() {
        return values.iter().cloned().fold(0.0, f64::max);
    }
    let mean = values.iter().map(|v| v.powf(r)).sum::<f64>() / values.len() as f64;
    mean.powf(1.0 / r)
}

/// Mixed norms `‖u‖_{L^r(T;L^p)}` of a sparse mode list for several `(r, p)`.
fn sparse_mixed_norms(modes: &SparseSeries, exponents: &[(f64, f64)], nt: usize) -> Vec<f64> {
    let Some((_, first)) = modes.modes.first() else {
        return vec![0.0; exponents.len()];
    };
    let h3 = first.grid().cell_volume();
    let spectrum = modes.square_spectrum();
    let mut spatial: Vec<f64> = Vec::new();
    for &(_, p) in exponents {
        if !spatial.contains(&p) {
            spatial.push(p);
        }
    }
    // squares repeat with period 2π/g, so the first nt/g samples carry the
    // same mean and maximum as all nt
    let g = spectrum.iter().fold(0u64, |acc, (d, _)| gcd(acc, d.unsigned_abs()));
    let distinct = if g > 1 && nt.is_multiple_of(g as usize) {
        nt / g as usize
    } else {
        nt
    };
    let per_sample: Vec<Vec<f64>> = (0..distinct)
        .into_par_iter()
        .map(|j| {
            let sq = squares_at(&spectrum, 2.0 * PI * j as f64 / nt as f64);
            spatial.iter().map(|&p| lq_norm_from_squares(&sq, p, h3)).collect()
        })
        .collect();
    exponents
        .iter()
        .map(|&(r, p)| {
            let e = spatial.iter().position(|&x| x == p).expect("collected above");
            let vals: Vec<f64> = per_sample.iter().map(|s| s[e]).collect();
            combine_in_time(&vals, r)
        })
        .collect()
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn check_exponents(exponents: &[(f64, f64)], nt: usize) -> Result<()> {
    if nt == 0 {
        return Err(Error::InvalidParameter("at least one time sample required".into()));
    }
    for &(r, p) in exponents {
        if !(r >= 1.0 && p >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "mixed-norm exponents ({r}, {p}) below 1"
            )));
        }
    }
    Ok(())
}

/// `‖u‖_{L^r(T;L^p)} = ((1/N) Σ_j ‖u(t_j)‖_p^r)^{1/r}` over `nt` uniform samples.
pub fn mixed_norm(u: &FieldSeries, r: f64, p: f64, nt: usize) -> Result<f64> {
    Ok(mixed_norms(u, &[(r, p)], nt)?[0])
}

/// Several mixed norms of the same series sharing the time samples.
pub fn mixed_norms(u: &FieldSeries, exponents: &[(f64, f64)], nt: usize) -> Result<Vec<f64>> {
    check_exponents(exponents, nt)?;
    Ok(sparse_mixed_norms(&SparseSeries::new(u), exponents, nt))
}

/// Mixed norms of `op(k, u_k)` built from the nonzero modes of `u` only.
/// `op` must map conjugate pairs to conjugate pairs, as real differential
/// operators and `k ↦ ik` do.
pub fn mixed_norms_mapped(
    u: &FieldSeries,
    op: impl Fn(i64, &Field) -> Field,
    exponents: &[(f64, f64)],
    nt: usize,
) -> Result<Vec<f64>> {
    check_exponents(exponents, nt)?;
    Ok(sparse_mixed_norms(&SparseSeries::new(u).map(op), exponents, nt))
}

/// Both sides of the embedding inequality.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmbeddingRatio {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Derivatives of the nonzero modes of a purely periodic series.
struct ModeDerivatives {
    u: SparseSeries,
    grad: SparseSeries,
    dt: SparseSeries,
    hess: SparseSeries,
}

impl ModeDerivatives {
    fn new(u: &FieldSeries) -> Self {
        let u = SparseSeries::new(u);
        let grad = u.map(|_, v| v.gradient());
        let dt = u.map(|k, v| v.scaled(Complex64::new(0.0, k as f64)));
        let hess = u.map(|_, v| v.hessian());
        Self { u, grad, dt, hess }
    }
}

fn require_purely_periodic(u: &FieldSeries, guard: &SupportGuard) -> Result<()> {
    let steady = u.coeff(0).map(|c| c.max_abs()).unwrap_or(0.0);
    let top = u.coeffs().iter().map(|c| c.max_abs()).fold(0.0, f64::max);
    if steady > 1e-12 * top {
        return Err(Error::Structural(
            "embedding ratio needs a purely periodic series".into(),
        ));
    }
    guard.check_all(u.coeffs(), "embedding ratio")
}

/// LHS/RHS of the embedding inequality, with `N_t = 8(K+1)` samples for the
/// top nonzero mode `K`.
pub fn embedding_ratio(u: &FieldSeries, params: &EmbeddingParams) -> Result<EmbeddingRatio> {
    Ok(embedding_ratios(u, std::slice::from_ref(params))?[0])
}

/// [`embedding_ratio`] for several parameter sets on the same field.
pub fn embedding_ratios(u: &FieldSeries, params: &[EmbeddingParams]) -> Result<Vec<EmbeddingRatio>> {
    embedding_ratios_with(u, params, default_time_samples(time_bandwidth(u)))
}

pub fn embedding_ratios_with(u: &FieldSeries, params: &[EmbeddingParams], nt: usize) -> Result<Vec<EmbeddingRatio>> {
    require_purely_periodic(u, &SupportGuard::default())?;
    let d = ModeDerivatives::new(u);
    let u_exp: Vec<(f64, f64)> = params.iter().map(|p| (p.r0(), p.p0())).collect();
    let g_exp: Vec<(f64, f64)> = params.iter().map(|p| (p.r1(), p.p1())).collect();
    let q_exp: Vec<(f64, f64)> = params.iter().map(|p| (p.q, p.q)).collect();
    check_exponents(&u_exp, nt)?;
    check_exponents(&g_exp, nt)?;
    let nu = sparse_mixed_norms(&d.u, &u_exp, nt);
    let ng = sparse_mixed_norms(&d.grad, &g_exp, nt);
    let ndt = sparse_mixed_norms(&d.dt, &q_exp, nt);
    let nh = sparse_mixed_norms(&d.hess, &q_exp, nt);
    params
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let lhs = p.omega.powf(0.5 * p.alpha) * nu[i] + p.omega.powf(0.5 * p.beta) * ng[i];
            let rhs = p.omega * ndt[i] + nh[i];
            let ratio = if rhs > 0.0 {
                lhs / rhs
            } else if lhs == 0.0 {
                0.0
            } else {
                return Err(Error::Numerical(format!(
                    "embedding violated: lhs {lhs:.3e} with vanishing rhs"
                )));
            };
            Ok(EmbeddingRatio { lhs, rhs, ratio })
        })
        .collect()
}

/// One row of the embedding CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingRecord {
    pub field_id: usize,
    pub alpha: f64,
    pub beta: f64,
    pub omega: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

pub fn write_embedding_csv<W: Write>(w: &mut W, rows: &[EmbeddingRecord]) -> Result<()> {
    writeln!(w, "field_id,alpha,beta,omega,lhs,rhs,ratio")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{:.12e},{:.12e},{:.12e}",
            r.field_id, r.alpha, r.beta, r.omega, r.lhs, r.rhs, r.ratio
        )?;
    }
    Ok(())
}

/// Ratios for every field of a corpus and every parameter set. Fields are
/// consumed one at a time.
pub fn verify_corpus(
    fields: impl IntoIterator<Item = FieldSeries>,
    params: &[EmbeddingParams],
) -> Result<Vec<EmbeddingRecord>> {
    let mut rows = Vec::new();
    for (id, u) in fields.into_iter().enumerate() {
        for (p, r) in params.iter().zip(embedding_ratios(&u, params)?) {
            rows.push(EmbeddingRecord {
                field_id: id,
                alpha: p.alpha,
                beta: p.beta,
                omega: p.omega,
                lhs: r.lhs,
                rhs: r.rhs,
                ratio: r.ratio,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::wiener_algebra::TorusSeries;

    #[test]
    fn exponent_window_is_enforced() {
        assert!(EmbeddingParams::new(1.0, 0.5, 1.25, 1.0).is_ok());
        assert!(EmbeddingParams::new(0.0, 0.0, 1.6, 1.0).is_err());
        assert!(EmbeddingParams::new(1.0, 0.5, 2.1, 1.0).is_err());
        let p = EmbeddingParams::new(1.0, 0.5, 1.25, 2.0).unwrap();
        assert!((p.r0() - 2.5 / 0.75).abs() < 1e-14);
        assert!((p.p0() - 3.75 / 1.75).abs() < 1e-14);
    }

    #[test]
    fn gamma_two_at_pi_is_alternating_harmonic_sum() -> Result<()> {
        let k = 2000;
        let g = kernel_gamma(2.0, k, 2)?;
        // t = π is sample 1 of 2; alternating-series tail ≤ 2/(K+1)
        let err = (g[1] + 2.0 * 2f64.ln()).abs();
        assert!(err <= 2.0 / (k as f64 + 1.0), "{err}");
        Ok(())
    }

    #[test]
    fn gamma_is_even_with_zero_mean() {
        let nt = 64;
        let g = kernel_gamma(0.5, 20, nt).unwrap();
        for j in 1..nt {
            assert!((g[j] - g[nt - j]).abs() < 1e-12);
        }
        assert!(g.iter().sum::<f64>().abs() / (nt as f64) < 1e-12);
    }

    #[test]
    fn riesz_on_plane_wave_and_composition() {
        let g = BoxGrid::new(16, 8.0).unwrap();
        let k0 = g.fundamental_wavenumber();
        let wave = Field::scalar_from_fn(g, |x| Complex64::from_polar(1.0, k0 * (2.0 * x[0] + x[2])));
        let r = riesz_potential(&wave, 1.3).unwrap();
        let expected = wave.scale_real((5.0 * k0 * k0).powf(-0.65));
        assert!(r.sub(&expected).unwrap().max_abs() < 1e-13);

        let f = corpus::random_field(g, 1, 4).transform().inverse_transform();
        let mean_free = riesz_potential(&f, 0.0).unwrap();
        let a = riesz_potential(&riesz_potential(&mean_free, 0.7).unwrap(), 1.1).unwrap();
        let b = riesz_potential(&mean_free, 1.8).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() < 1e-12 * b.max_abs());
        // order two inverts −Δ
        let back = riesz_potential(&mean_free, 2.0).unwrap().laplacian().scale_real(-1.0);
        assert!(back.sub(&mean_free).unwrap().max_abs() < 1e-11 * mean_free.max_abs());
    }

    #[test]
    fn m_symbol_closed_form_and_bound() {
        let g = BoxGrid::new(16, 8.0).unwrap();
        let k0 = g.fundamental_wavenumber();
        let m = m_symbol(1, [k0, 0.0, 0.0], 2.0, 1.0);
        let expected = 2f64.sqrt() * k0 / Complex64::new(k0 * k0, 2.0);
        assert!((m - expected).norm() < 1e-15);
        for alpha in [0.0, 1.0, 2.0] {
            for omega in [0.25, 1.0, 4.0] {
                assert!(m_symbol_sup(&g, 4, omega, alpha) <= 1.0 + 1e-14);
            }
        }
        let s = TorusSeries::steady(corpus::random_field(g, 3, 1));
        assert_eq!(apply_m_multiplier(&s, 1.0, 1.0).coeff(0).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn mixed_norm_of_constant_in_time_magnitudes() {
        let g = BoxGrid::new(8, 4.0).unwrap();
        let v = corpus::random_field(g, 3, 2);
        let steady = TorusSeries::steady(v.clone());
        let n = mixed_norm(&steady, 3.0, 1.5, 16).unwrap();
        assert!((n - v.lq_norm(1.5)).abs() < 1e-12 * n);
        let z = Field::zeros(g, 3);
        let single = TorusSeries::from_modes(2, &z, vec![(1, v.clone())]).unwrap();
        let n = mixed_norm(&single, 2.5, 4.0, 24).unwrap();
        assert!((n - v.lq_norm(4.0)).abs() < 1e-12 * n);
    }

    #[test]
    fn mixed_norm_converges_under_time_refinement() {
        let g = BoxGrid::new(8, 4.0).unwrap();
        let u = corpus::random_series(g, 2, 3, 8);
        let coarse = mixed_norm(&u, 2.5, 1.5, default_time_samples(2)).unwrap();
        let fine = mixed_norm(&u, 2.5, 1.5, 4 * default_time_samples(2)).unwrap();
        assert!((coarse - fine).abs() < 1e-6 * fine, "{coarse} {fine}");
    }

    #[test]
    fn factorization_reproduces_field() {
        let g = BoxGrid::new(16, 12.0).unwrap();
        let v = corpus::manufactured_velocity(g, 3);
        let z = Field::zeros(g, 3);
        let u = TorusSeries::from_modes(3, &z, vec![(-2, v.conj()), (1, v.scale_real(0.5)), (2, v.clone())]).unwrap();
        for alpha in [0.0, 0.5, 1.0, 2.0] {
            let back = factorization_reconstruct(&u, 0.7, alpha).unwrap();
            let err = back.sub(&u).unwrap().a_norm(2.0).unwrap() / u.a_norm(2.0).unwrap();
            assert!(err < 1e-12, "alpha {alpha}: {err}");
        }
    }

    #[test]
    fn ratio_conventions() {
        let g = BoxGrid::new(32, 16.0).unwrap();
        let p = EmbeddingParams::new(1.0, 0.5, 1.25, 1.0).unwrap();
        let z = TorusSeries::zeros(1, &Field::zeros(g, 3));
        assert_eq!(embedding_ratio(&z, &p).unwrap().ratio, 0.0);
        let steady = TorusSeries::steady(corpus::manufactured_velocity(g, 1));
        assert!(matches!(embedding_ratio(&steady, &p), Err(Error::Structural(_))));
        let u = corpus::manufactured_series(g, 2, 2, false, 5);
        let r = embedding_ratio(&u, &p).unwrap();
        assert!(r.ratio.is_finite() && r.ratio > 0.0);
        let padded = embedding_ratio(&u.truncate(6), &p).unwrap();
        assert_eq!(r, padded);
    }
}
