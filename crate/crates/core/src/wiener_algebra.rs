//! Finitely supported Fourier series in time with field-valued coefficients.
//!
//! A [`TorusSeries`] stores the coefficients `f_k` for `|k| ≤ k_max` densely.
//! The function it represents is `f(t) = Σ_k f_k e^{ikt}` on the torus
//! `[0, 2π)`, and its Wiener norm is `Σ_k ‖f_k‖`.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral_field::{read_f64, read_u32, BoxGrid, Field, FORMAT_VERSION};

/// Coefficient types a [`TorusSeries`] can carry.
pub trait Coefficient: Clone + Send + Sync {
    fn zero_like(&self) -> Self;
    fn compatible(&self, other: &Self) -> bool;
    /// `self += a·x`; callers check compatibility first.
    fn add_scaled(&mut self, a: Complex64, x: &Self);
    fn scale(&mut self, a: Complex64);
    fn conjugate(&self) -> Self;
    /// Lebesgue norm of the coefficient (absolute value for scalars).
    fn lq_norm(&self, q: f64) -> f64;
}

impl Coefficient for Complex64 {
    fn zero_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn compatible(&self, _: &Self) -> bool {
        true
    }
    fn add_scaled(&mut self, a: Complex64, x: &Self) {
        *self += a * x;
    }
    fn scale(&mut self, a: Complex64) {
        *self *= a;
    }
    fn conjugate(&self) -> Self {
        self.conj()
    }
    fn lq_norm(&self, _q: f64) -> f64 {
        self.norm()
    }
}

impl Coefficient for Field {
    fn zero_like(&self) -> Self {
        Field::zeros(*self.grid(), self.ncomp())
    }
    fn compatible(&self, other: &Self) -> bool {
        Field::compatible(self, other)
    }
    fn add_scaled(&mut self, a: Complex64, x: &Self) {
        self.axpy_unchecked(a, x);
    }
    fn scale(&mut self, a: Complex64) {
        self.data_mut().iter_mut().for_each(|v| *v *= a);
    }
    fn conjugate(&self) -> Self {
        self.conj()
    }
    fn lq_norm(&self, q: f64) -> f64 {
        Field::lq_norm(self, q)
    }
}

/// Dense time-Fourier coefficients over `[-k_max, k_max]`.
#[derive(Clone, Debug)]
pub struct TorusSeries<C> {
    k_max: usize,
    coeffs: Vec<C>,
}

pub type ScalarSeries = TorusSeries<Complex64>;
pub type FieldSeries = TorusSeries<Field>;

impl<C: Coefficient> TorusSeries<C> {
    /// Builds a series from `2·k_max+1` coefficients in ascending `k`.
    pub fn new(k_max: usize, coeffs: Vec<C>) -> Result<Self> {
        if coeffs.len() != 2 * k_max + 1 {
            return Err(Error::Structural(format!(
                "series with k_max = {k_max} needs {} coefficients, got {}",
                2 * k_max + 1,
                coeffs.len()
            )));
        }
        if let Some(first) = coeffs.first() {
            if coeffs.iter().any(|c| !c.compatible(first)) {
                return Err(Error::Structural("series coefficients have mismatched shapes".into()));
            }
        }
        Ok(Self { k_max, coeffs })
    }

    pub fn zeros(k_max: usize, template: &C) -> Self {
        Self {
            k_max,
            coeffs: vec![template.zero_like(); 2 * k_max + 1],
        }
    }

    /// Series with the given modes set and every other mode zero.
    pub fn from_modes(k_max: usize, template: &C, modes: Vec<(i64, C)>) -> Result<Self> {
        let mut out = Self::zeros(k_max, template);
        for (k, c) in modes {
            if !c.compatible(template) {
                return Err(Error::Structural(format!("mode {k} has a mismatched shape")));
            }
            *out.coeff_mut(k)
                .ok_or_else(|| Error::Structural(format!("mode {k} outside |k| <= {k_max}")))? = c;
        }
        Ok(out)
    }

    /// Steady series with a single coefficient.
    pub fn steady(c: C) -> Self {
        Self {
            k_max: 0,
            coeffs: vec![c],
        }
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C> {
        self.coeffs
    }

    /// Integer modes in storage order.
    pub fn modes(&self) -> impl Iterator<Item = i64> {
        let k = self.k_max as i64;
        -k..=k
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &C)> {
        self.modes().zip(self.coeffs.iter())
    }

    fn slot(&self, k: i64) -> Option<usize> {
        if k.unsigned_abs() as usize <= self.k_max {
            Some((k + self.k_max as i64) as usize)
        } else {
            None
        }
    }

    pub fn coeff(&self, k: i64) -> Option<&C> {
        self.slot(k).map(|i| &self.coeffs[i])
    }

    pub fn coeff_mut(&mut self, k: i64) -> Option<&mut C> {
        self.slot(k).map(move |i| &mut self.coeffs[i])
    }

    /// Coefficient `k`, or zero outside the support.
    pub fn coeff_or_zero(&self, k: i64) -> C {
        self.coeff(k).cloned().unwrap_or_else(|| self.coeffs[0].zero_like())
    }

    fn check_shapes(&self) -> Result<()> {
        let first = &self.coeffs[0];
        if self.coeffs.iter().all(|c| c.compatible(first)) {
            Ok(())
        } else {
            Err(Error::Structural("series coefficients have mismatched shapes".into()))
        }
    }

    /// `Σ_k ‖f_k‖_{L^q}`.
    pub fn a_norm(&self, q: f64) -> Result<f64> {
        self.check_shapes()?;
        Ok(self.coeffs.iter().map(|c| c.lq_norm(q)).sum())
    }

    /// Per-mode norms `‖f_k‖_{L^q}` in ascending `k`.
    pub fn mode_norms(&self, q: f64) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.lq_norm(q)).collect()
    }

    /// Zero-padded or truncated copy with support `|k| ≤ k_max`.
    pub fn truncate(&self, k_max: usize) -> Self {
        let mut out = Self::zeros(k_max, &self.coeffs[0]);
        for (k, c) in self.iter() {
            if let Some(slot) = out.coeff_mut(k) {
                *slot = c.clone();
            }
        }
        out
    }

    /// Coefficientwise linear combination `self + a·other` on the larger support.
    pub fn add_scaled(&self, a: Complex64, other: &Self) -> Result<Self> {
        if !self.coeffs[0].compatible(&other.coeffs[0]) {
            return Err(Error::Structural("adding series of different shapes".into()));
        }
        let mut out = self.truncate(self.k_max.max(other.k_max));
        for (k, c) in other.iter() {
            out.coeff_mut(k).expect("support covers both").add_scaled(a, c);
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.add_scaled(Complex64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add_scaled(Complex64::new(-1.0, 0.0), other)
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| c.scale(a));
        out
    }

    /// Keeps only the steady `k = 0` coefficient.
    pub fn project_steady(&self) -> Self {
        let mut out = Self::zeros(self.k_max, &self.coeffs[0]);
        out.coeffs[self.k_max] = self.coeffs[self.k_max].clone();
        out
    }

    /// Zeroes the steady coefficient.
    pub fn project_purely_periodic(&self) -> Self {
        let mut out = self.clone();
        out.coeffs[self.k_max] = self.coeffs[self.k_max].zero_like();
        out
    }

    /// `Σ_k f_k e^{ikt}`.
    pub fn time_eval(&self, t: f64) -> C {
        let mut acc = self.coeffs[0].zero_like();
        for (k, c) in self.iter() {
            acc.add_scaled(Complex64::from_polar(1.0, k as f64 * t), c);
        }
        acc
    }

    /// `k ↦ ik f_k`.
    pub fn time_derivative(&self) -> Self {
        let mut out = self.clone();
        for (k, c) in self.modes().zip(out.coeffs.iter_mut()) {
            c.scale(Complex64::new(0.0, k as f64));
        }
        out
    }

    /// Coefficientwise map into another coefficient type.
    pub fn map<D: Coefficient>(&self, f: impl Fn(i64, &C) -> D + Sync) -> TorusSeries<D> {
        let k = self.k_max as i64;
        let coeffs = self
            .coeffs
            .par_iter()
            .enumerate()
            .map(|(i, c)| f(i as i64 - k, c))
            .collect();
        TorusSeries {
            k_max: self.k_max,
            coeffs,
        }
    }

    pub fn try_map<D: Coefficient>(&self, f: impl Fn(i64, &C) -> Result<D> + Sync) -> Result<TorusSeries<D>> {
        let k = self.k_max as i64;
        let coeffs = self
            .coeffs
            .par_iter()
            .enumerate()
            .map(|(i, c)| f(i as i64 - k, c))
            .collect::<Result<Vec<D>>>()?;
        TorusSeries::new(self.k_max, coeffs)
    }

    /// Convolution `(fg)_k = Σ_ℓ f_ℓ ⊙ g_{k−ℓ}` with a caller-supplied
    /// pointwise product. The result has `k_max = f.k_max + g.k_max`.
    pub fn product_with<D: Coefficient, E: Coefficient>(
        &self,
        other: &TorusSeries<D>,
        mul: impl Fn(&C, &D) -> Result<E> + Sync,
    ) -> Result<TorusSeries<E>> {
        let template = mul(&self.coeffs[0], &other.coeffs[0])?.zero_like();
        let k_out = self.k_max + other.k_max;
        let ka = self.k_max as i64;
        let kb = other.k_max as i64;
        let coeffs = (-(k_out as i64)..=k_out as i64)
            .into_par_iter()
            .map(|k| {
                let mut acc = template.zero_like();
                let lo = (-ka).max(k - kb);
                let hi = ka.min(k + kb);
                for l in lo..=hi {
                    let a = &self.coeffs[(l + ka) as usize];
                    let b = &other.coeffs[(k - l + kb) as usize];
                    let p = mul(a, b)?;
                    if !p.compatible(&acc) {
                        return Err(Error::Structural("product shapes differ between modes".into()));
                    }
                    acc.add_scaled(Complex64::new(1.0, 0.0), &p);
                }
                Ok(acc)
            })
            .collect::<Result<Vec<E>>>()?;
        Ok(TorusSeries { k_max: k_out, coeffs })
    }

    /// Whether `f_{−k} = conj(f_k)` holds within `tol` (relative to the largest coefficient).
    pub fn is_real(&self, tol: f64, q: f64) -> bool {
        let scale = self.coeffs.iter().map(|c| c.lq_norm(q)).fold(0.0, f64::max);
        for k in 0..=self.k_max as i64 {
            let mut d = self.coeff(-k).unwrap().clone();
            d.add_scaled(Complex64::new(-1.0, 0.0), &self.coeff(k).unwrap().conjugate());
            if d.lq_norm(q) > tol * scale.max(f64::MIN_POSITIVE) {
                return false;
            }
        }
        true
    }

    /// Values at `nt` uniform times `t_j = 2πj/nt`.
    pub fn time_samples(&self, nt: usize) -> Vec<C> {
        (0..nt)
            .into_par_iter()
            .map(|j| self.time_eval(2.0 * PI * j as f64 / nt as f64))
            .collect()
    }

    /// Coefficients `|k| ≤ k_max` recovered from `nt` uniform samples by the
    /// discrete Fourier transform in time. Requires `nt ≥ 2·k_max + 1`.
    pub fn from_time_samples(samples: &[C], k_max: usize) -> Result<Self> {
        let nt = samples.len();
        if nt < 2 * k_max + 1 {
            return Err(Error::InvalidParameter(format!(
                "{nt} time samples cannot resolve modes up to {k_max}"
            )));
        }
        let template = samples[0].zero_like();
        let k = k_max as i64;
        let coeffs = (-k..=k)
            .into_par_iter()
            .map(|m| {
                let mut acc = template.zero_like();
                for (j, s) in samples.iter().enumerate() {
                    let t = 2.0 * PI * j as f64 / nt as f64;
                    acc.add_scaled(Complex64::from_polar(1.0 / nt as f64, -(m as f64) * t), s);
                }
                acc
            })
            .collect();
        Ok(Self { k_max, coeffs })
    }
}

impl ScalarSeries {
    /// Real cosine/sine data `a₀ + Σ (a_k cos kt + b_k sin kt)` as a series.
    pub fn from_real_trig(a0: f64, cos: &[f64], sin: &[f64]) -> Self {
        let k_max = cos.len().max(sin.len());
        let mut out = Self::zeros(k_max, &Complex64::new(0.0, 0.0));
        *out.coeff_mut(0).unwrap() = Complex64::new(a0, 0.0);
        for k in 1..=k_max {
            let a = cos.get(k - 1).copied().unwrap_or(0.0);
            let b = sin.get(k - 1).copied().unwrap_or(0.0);
            let c = Complex64::new(0.5 * a, -0.5 * b);
            *out.coeff_mut(k as i64).unwrap() = c;
            *out.coeff_mut(-(k as i64)).unwrap() = c.conj();
        }
        out
    }

    /// Scalar-in-time times field-valued series.
    pub fn times_fields(&self, fields: &FieldSeries) -> Result<FieldSeries> {
        self.product_with(fields, |a, f| Ok(f.scaled(*a)))
    }
}

impl FieldSeries {
    /// Product with the pointwise rule of [`Field::pointwise_mul`].
    pub fn product(&self, other: &FieldSeries) -> Result<FieldSeries> {
        self.product_with(other, |a, b| a.pointwise_mul(b))
    }

    /// `L²(T × box)` norm under the normalized time measure, by Parseval.
    pub fn space_time_l2(&self) -> f64 {
        self.coeffs.iter().map(|c| c.lq_norm(2.0).powi(2)).sum::<f64>().sqrt()
    }

    pub fn grid(&self) -> &BoxGrid {
        self.coeffs[0].grid()
    }

    pub fn ncomp(&self) -> usize {
        self.coeffs[0].ncomp()
    }

    /// Applies a spatial operator to every coefficient.
    pub fn map_fields(&self, f: impl Fn(&Field) -> Field + Sync) -> FieldSeries {
        self.map(|_, c| f(c))
    }

    pub fn try_map_fields(&self, f: impl Fn(&Field) -> Result<Field> + Sync) -> Result<FieldSeries> {
        self.try_map(|_, c| f(c))
    }

    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        let grid = self.grid();
        w.write_all(SERIES_MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.k_max as u32).to_le_bytes())?;
        w.write_all(&(grid.n() as u32).to_le_bytes())?;
        w.write_all(&grid.length().to_le_bytes())?;
        w.write_all(&(self.ncomp() as u32).to_le_bytes())?;
        for c in &self.coeffs {
            c.write_binary(w)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(r: &mut R) -> Result<FieldSeries> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != SERIES_MAGIC {
            return Err(Error::Structural("not a series file (bad magic)".into()));
        }
        let version = read_u32(r)?;
        if version != FORMAT_VERSION {
            return Err(Error::Structural(format!(
                "unsupported series format version {version}"
            )));
        }
        let k_max = read_u32(r)? as usize;
        let n = read_u32(r)? as usize;
        let length = read_f64(r)?;
        let ncomp = read_u32(r)? as usize;
        let grid = BoxGrid::new(n, length)?;
        let mut coeffs = Vec::with_capacity(2 * k_max + 1);
        for _ in 0..2 * k_max + 1 {
            let f = Field::read_binary(r)?;
            if !f.grid().same_as(&grid) || f.ncomp() != ncomp {
                return Err(Error::Structural("series coefficient disagrees with header".into()));
            }
            coeffs.push(f);
        }
        TorusSeries::new(k_max, coeffs)
    }
}

const SERIES_MAGIC: &[u8; 4] = b"TPOS";

/// Left and right side of a norm inequality `lhs ≤ rhs`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl InequalityCheck {
    /// `lhs ≤ rhs·(1 + rel_tol)`.
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.lhs <= self.rhs * (1.0 + rel_tol)
    }

    /// `|lhs − rhs| / rhs`.
    pub fn gap(&self) -> f64 {
        (self.lhs - self.rhs).abs() / self.rhs
    }
}

/// `‖fg‖_{A^r} ≤ ‖f‖_{A^p}‖g‖_{A^q}` with `1/r = 1/p + 1/q`.
pub fn holder_check(f: &FieldSeries, g: &FieldSeries, p: f64, q: f64) -> Result<InequalityCheck> {
    let r = 1.0 / (1.0 / p + 1.0 / q);
    if r < 1.0 {
        return Err(Error::InvalidParameter(format!("1/p + 1/q = {} exceeds 1", 1.0 / r)));
    }
    Ok(InequalityCheck {
        lhs: f.product(g)?.a_norm(r)?,
        rhs: f.a_norm(p)? * g.a_norm(q)?,
    })
}

/// `‖f‖_{A^r} ≤ ‖f‖_{A^p}^{1−θ}‖f‖_{A^q}^θ` with `1/r = (1−θ)/p + θ/q`.
pub fn interpolation_check(f: &FieldSeries, p: f64, q: f64, theta: f64) -> Result<InequalityCheck> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!(
            "theta must lie in [0, 1], got {theta}"
        )));
    }
    let r = 1.0 / ((1.0 - theta) / p + theta / q);
    Ok(InequalityCheck {
        lhs: f.a_norm(r)?,
        rhs: f.a_norm(p)?.powf(1.0 - theta) * f.a_norm(q)?.powf(theta),
    })
}

/// One line of the Wiener-algebra suite.
#[derive(Clone, Debug, PartialEq)]
pub struct WienerRecord {
    pub case: usize,
    /// `holder`, `interpolation`, `holder_equality` or `interpolation_equality`.
    pub kind: &'static str,
    pub p: f64,
    pub q: f64,
    /// `r` for Hölder, `θ` for interpolation.
    pub third: f64,
    pub check: InequalityCheck,
}

/// Seeded random pairs (scalar `f`, vector `g`, all modes `|k| ≤ k_max`
/// filled) checked against both inequalities, followed by single-mode cases
/// built to attain equality: `f = h^{r/p} e^{ik₁t}`, `g = h^{r/q} e^{ik₂t}`
/// for Hölder and `f = c·1_S e^{ikt}` for interpolation.
pub fn wiener_suite(
    grid: BoxGrid,
    k_max: usize,
    pairs: usize,
    equality_cases: usize,
    seed: u64,
) -> Result<Vec<WienerRecord>> {
    use crate::corpus;
    use rand::Rng;

    let mut out = Vec::with_capacity(2 * (pairs + equality_cases));
    for case in 0..pairs {
        let s = seed.wrapping_mul(7919).wrapping_add(case as u64);
        let mut r = corpus::rng(s);
        let f = corpus::random_series(grid, k_max, 1, s.wrapping_mul(2));
        let g = corpus::random_series(grid, k_max, 3, s.wrapping_mul(2).wrapping_add(1));
        let (p, q) = loop {
            let p = r.random_range(1.1..4.0);
            let q = r.random_range(1.1..4.0);
            if 1.0 / p + 1.0 / q <= 1.0 {
                break (p, q);
            }
        };
        out.push(WienerRecord {
            case,
            kind: "holder",
            p,
            q,
            third: 1.0 / (1.0 / p + 1.0 / q),
            check: holder_check(&f, &g, p, q)?,
        });
        let (p, q, theta) = (
            r.random_range(1.1..3.0),
            r.random_range(3.0..8.0),
            r.random_range(0.0..1.0),
        );
        out.push(WienerRecord {
            case,
            kind: "interpolation",
            p,
            q,
            third: theta,
            check: interpolation_check(&g, p, q, theta)?,
        });
    }
    let zero1 = Field::zeros(grid, 1);
    let zero3 = Field::zeros(grid, 3);
    let k = k_max as i64;
    for case in 0..equality_cases {
        let s = seed.wrapping_mul(104_729).wrapping_add(case as u64);
        let mut r = corpus::rng(s);
        let (p, q) = (r.random_range(1.5..4.0), r.random_range(1.5..4.0));
        let rr = 1.0 / (1.0 / p + 1.0 / q);
        let h: Vec<f64> = (0..grid.len()).map(|_| r.random_range(0.1..1.0)).collect();
        let dir = [
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
        ];
        let phase = Complex64::from_polar(1.0, r.random_range(0.0..2.0 * PI));
        let (k1, k2) = (r.random_range(-k..=k), r.random_range(-k..=k));
        let f = Field::from_data(grid, 1, h.iter().map(|v| phase * v.powf(rr / p)).collect())?;
        let mut gdata = Vec::with_capacity(3 * grid.len());
        for d in dir {
            gdata.extend(h.iter().map(|v| Complex64::new(d * v.powf(rr / q), 0.0)));
        }
        let g = Field::from_data(grid, 3, gdata)?;
        let f = TorusSeries::from_modes(k_max, &zero1, vec![(k1, f)])?;
        let g = TorusSeries::from_modes(k_max, &zero3, vec![(k2, g)])?;
        out.push(WienerRecord {
            case,
            kind: "holder_equality",
            p,
            q,
            third: rr,
            check: holder_check(&f, &g, p, q)?,
        });

        let c = Complex64::new(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
        let support: Vec<bool> = (0..grid.len()).map(|_| r.random_bool(0.3)).collect();
        let mut data = Vec::with_capacity(3 * grid.len());
        for _ in 0..3 {
            data.extend(
                support
                    .iter()
                    .map(|&inside| if inside { c } else { Complex64::new(0.0, 0.0) }),
            );
        }
        let u = TorusSeries::from_modes(k_max, &zero3, vec![(k1, Field::from_data(grid, 3, data)?)])?;
        let (p, q, theta) = (
            r.random_range(1.1..3.0),
            r.random_range(3.0..8.0),
            r.random_range(0.0..1.0),
        );
        out.push(WienerRecord {
            case,
            kind: "interpolation_equality",
            p,
            q,
            third: theta,
            check: interpolation_check(&u, p, q, theta)?,
        });
    }
    Ok(out)
}

pub fn write_wiener_csv<W: Write>(w: &mut W, rows: &[WienerRecord]) -> Result<()> {
    writeln!(w, "case,kind,p,q,r_or_theta,lhs,rhs,ratio")?;
    for row in rows {
        writeln!(
            w,
            "{},{},{:.6},{:.6},{:.6},{:.12e},{:.12e},{:.12e}",
            row.case,
            row.kind,
            row.p,
            row.q,
            row.third,
            row.check.lhs,
            row.check.rhs,
            row.check.lhs / row.check.rhs
        )?;
    }
    Ok(())
}
