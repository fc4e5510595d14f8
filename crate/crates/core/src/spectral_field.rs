//! Periodic-box discretization of R³.
//!
//! A [`BoxGrid`] samples the cube `[-L/2, L/2)³` with `n` points per axis and
//! the origin at the box center. A [`Field`] holds complex samples with any
//! number of components (1 for scalars, 3 for vectors, 9 for gradients of
//! vectors). Differential operators are Fourier multipliers; the coordinate
//! `x` appearing in the rotation term is the centered physical coordinate,
//! which only makes sense for fields living inside the safe ball.
//!
//! Spectral coefficients use the Fourier-series convention
//! `f(x) = Σ_m f̂_m exp(i ξ_m·x)`, so Parseval reads
//! `‖f‖²_{L²} = V Σ_m |f̂_m|²` with `V` the box volume.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Uniform periodic grid on `[-L/2, L/2)³`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxGrid {
    n: usize,
    length: f64,
}

impl BoxGrid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "grid size must be a power of two >= 4, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "box length must be positive, got {length}"
            )));
        }
        Ok(Self { n, length })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(3)
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Radius of the ball inside which fields must live for the
    /// unbounded-coefficient operators and frame rotations to be faithful.
    pub fn safe_radius(&self) -> f64 {
        0.45 * self.length
    }

    /// Centered coordinate of grid index `i` along any axis.
    pub fn coordinate(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) * self.spacing()
    }

    /// Signed Fourier index in `[-n/2, n/2)`.
    pub fn signed_index(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    pub fn fundamental_wavenumber(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn wavenumber(&self, i: usize) -> f64 {
        self.fundamental_wavenumber() * self.signed_index(i) as f64
    }

    /// Linear index with x₁ fastest.
    #[inline]
    pub fn index(&self, i1: usize, i2: usize, i3: usize) -> usize {
        i1 + self.n * (i2 + self.n * i3)
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx % n, (idx / n) % n, idx / (n * n)]
    }

    pub fn position(&self, idx: usize) -> [f64; 3] {
        let [a, b, c] = self.unravel(idx);
        [self.coordinate(a), self.coordinate(b), self.coordinate(c)]
    }

    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let [a, b, c] = self.unravel(idx);
        [self.wavenumber(a), self.wavenumber(b), self.wavenumber(c)]
    }

    /// Same samples on a box dilated by `factor`.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.n, self.length * factor)
    }

    pub fn same_as(&self, other: &BoxGrid) -> bool {
        self.n == other.n && (self.length - other.length).abs() <= 1e-12 * self.length
    }
}

thread_local! {
    static PLANNER: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if let Some(f) = p.1.get(&(n, inverse)) {
            return f.clone();
        }
        let f = if inverse {
            p.0.plan_fft_inverse(n)
        } else {
            p.0.plan_fft_forward(n)
        };
        p.1.insert((n, inverse), f.clone());
        f
    })
}

/// Unnormalized 3-D DFT of one component block (length n³, x₁ fastest).
fn fft3(data: &mut [Complex64], n: usize, inverse: bool) {
    let fft = plan(n, inverse);
    let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
    // axis 1: contiguous lines
    fft.process_with_scratch(data, &mut scratch);

    let mut buf = vec![ZERO; n * n];
    // axis 2: within each x₃ slab, transpose (i2,i1) -> (i1,i2)
    for slab in data.chunks_mut(n * n) {
        for i2 in 0..n {
            for i1 in 0..n {
                buf[i1 * n + i2] = slab[i2 * n + i1];
            }
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for i2 in 0..n {
            for i1 in 0..n {
                slab[i2 * n + i1] = buf[i1 * n + i2];
            }
        }
    }
    // axis 3: for each x₂ row gather (i3,i1) -> (i1,i3)
    let nn = n * n;
    for i2 in 0..n {
        for i3 in 0..n {
            let base = i3 * nn + i2 * n;
            for i1 in 0..n {
                buf[i1 * n + i3] = data[base + i1];
            }
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for i3 in 0..n {
            let base = i3 * nn + i2 * n;
            for i1 in 0..n {
                data[base + i1] = buf[i1 * n + i3];
            }
        }
    }
}

/// 2-D DFT over (x₂, x₃) of every x₁ column, i.e. axes 2 and 3 only.
pub(crate) fn fft_transverse(data: &mut [Complex64], n: usize, inverse: bool) {
    let fft = plan(n, inverse);
    let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
    let mut buf = vec![ZERO; n * n];
    for slab in data.chunks_mut(n * n) {
        for i2 in 0..n {
            for i1 in 0..n {
                buf[i1 * n + i2] = slab[i2 * n + i1];
            }
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for i2 in 0..n {
            for i1 in 0..n {
                slab[i2 * n + i1] = buf[i1 * n + i2];
            }
        }
    }
    let nn = n * n;
    for i2 in 0..n {
        for i3 in 0..n {
            let base = i3 * nn + i2 * n;
            for i1 in 0..n {
                buf[i1 * n + i3] = data[base + i1];
            }
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for i3 in 0..n {
            let base = i3 * nn + i2 * n;
            for i1 in 0..n {
                data[base + i1] = buf[i1 * n + i3];
            }
        }
    }
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Safe-ball support check used by operators with the unbounded coefficient.
#[derive(Clone, Copy, Debug)]
pub struct SupportGuard {
    /// Maximum admissible fraction of L² mass outside the safe ball.
    pub max_outside_fraction: f64,
}

impl Default for SupportGuard {
    fn default() -> Self {
        Self {
            max_outside_fraction: 1e-10,
        }
    }
}

impl SupportGuard {
    pub fn check(&self, field: &Field, what: &str) -> Result<()> {
        let frac = field.mass_fraction_outside(field.grid.safe_radius());
        self.verdict(frac, field.grid.safe_radius(), what)
    }

    /// Checks several fields jointly: the outside mass of all of them over
    /// their total mass.
    pub fn check_all<'a>(&self, fields: impl IntoIterator<Item = &'a Field>, what: &str) -> Result<()> {
        let mut outside = 0.0;
        let mut total = 0.0;
        let mut radius = 0.0;
        for f in fields {
            radius = f.grid.safe_radius();
            let (o, t) = f.mass_split(radius);
            outside += o;
            total += t;
        }
        let frac = if total == 0.0 { 0.0 } else { outside / total };
        self.verdict(frac, radius, what)
    }

    fn verdict(&self, frac: f64, radius: f64, what: &str) -> Result<()> {
        if frac > self.max_outside_fraction {
            return Err(Error::DomainApproximation(format!(
                "{what}: fraction {frac:.3e} of the L2 mass lies outside the safe ball \
                 (radius {radius:.3}), limit {:.1e}",
                self.max_outside_fraction
            )));
        }
        Ok(())
    }
}

/// Complex grid samples with `ncomp` components, stored component-major.
#[derive(Clone, Debug)]
pub struct Field {
    grid: BoxGrid,
    ncomp: usize,
    data: Vec<Complex64>,
}

/// Fourier-series coefficients of a [`Field`].
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: BoxGrid,
    ncomp: usize,
    data: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: BoxGrid, ncomp: usize) -> Self {
        Self {
            grid,
            ncomp,
            data: vec![ZERO; ncomp * grid.len()],
        }
    }

    pub fn from_data(grid: BoxGrid, ncomp: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != ncomp * grid.len() {
            return Err(Error::Structural(format!(
                "expected {} samples, got {}",
                ncomp * grid.len(),
                data.len()
            )));
        }
        Ok(Self { grid, ncomp, data })
    }

    /// Samples `f(x)` at every grid point; `f` writes `ncomp` values.
    pub fn from_fn(grid: BoxGrid, ncomp: usize, f: impl Fn([f64; 3], &mut [Complex64])) -> Self {
        let mut out = Self::zeros(grid, ncomp);
        let len = grid.len();
        let mut vals = vec![ZERO; ncomp];
        for idx in 0..len {
            vals.iter_mut().for_each(|v| *v = ZERO);
            f(grid.position(idx), &mut vals);
            for (c, v) in vals.iter().enumerate() {
                out.data[c * len + idx] = *v;
            }
        }
        out
    }

    pub fn scalar_from_fn(grid: BoxGrid, f: impl Fn([f64; 3]) -> Complex64) -> Self {
        Self::from_fn(grid, 1, |x, out| out[0] = f(x))
    }

    pub fn vector_from_fn(grid: BoxGrid, f: impl Fn([f64; 3]) -> [Complex64; 3]) -> Self {
        Self::from_fn(grid, 3, |x, out| out.copy_from_slice(&f(x)))
    }

    /// Spatially constant field.
    pub fn constant(grid: BoxGrid, values: &[Complex64]) -> Self {
        let mut out = Self::zeros(grid, values.len());
        for (c, v) in values.iter().enumerate() {
            out.component_mut(c).iter_mut().for_each(|x| *x = *v);
        }
        out
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let len = self.grid.len();
        &self.data[c * len..(c + 1) * len]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let len = self.grid.len();
        &mut self.data[c * len..(c + 1) * len]
    }

    /// Copy of a single component as a scalar field.
    pub fn extract(&self, c: usize) -> Field {
        Field {
            grid: self.grid,
            ncomp: 1,
            data: self.component(c).to_vec(),
        }
    }

    /// Stacks fields component-wise.
    pub fn stack(parts: &[&Field]) -> Result<Field> {
        let grid = *parts
            .first()
            .ok_or_else(|| Error::Structural("stack of zero fields".into()))?
            .grid();
        let mut data = Vec::new();
        let mut ncomp = 0;
        for p in parts {
            if !p.grid.same_as(&grid) {
                return Err(Error::Structural("stacking fields on different grids".into()));
            }
            data.extend_from_slice(&p.data);
            ncomp += p.ncomp;
        }
        Ok(Field { grid, ncomp, data })
    }

    pub fn value(&self, idx: usize, c: usize) -> Complex64 {
        self.data[c * self.grid.len() + idx]
    }

    pub fn compatible(&self, other: &Field) -> bool {
        self.ncomp == other.ncomp && self.grid.same_as(&other.grid)
    }

    fn require_compatible(&self, other: &Field, what: &str) -> Result<()> {
        if self.compatible(other) {
            Ok(())
        } else {
            Err(Error::Structural(format!(
                "{what}: fields with {} and {} components or different grids",
                self.ncomp, other.ncomp
            )))
        }
    }

    fn require_vector(&self, what: &str) -> Result<()> {
        if self.ncomp == 3 {
            Ok(())
        } else {
            Err(Error::Structural(format!(
                "{what} needs a vector field, got {} components",
                self.ncomp
            )))
        }
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.require_compatible(other, "add")?;
        let mut out = self.clone();
        out.add_assign_unchecked(other);
        Ok(out)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.require_compatible(other, "sub")?;
        let mut out = self.clone();
        out.axpy_unchecked(-Complex64::new(1.0, 0.0), other);
        Ok(out)
    }

    pub(crate) fn add_assign_unchecked(&mut self, other: &Field) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub(crate) fn axpy_unchecked(&mut self, a: Complex64, x: &Field) {
        for (y, x) in self.data.iter_mut().zip(&x.data) {
            *y += a * x;
        }
    }

    pub fn axpy(&mut self, a: Complex64, x: &Field) -> Result<()> {
        self.require_compatible(x, "axpy")?;
        self.axpy_unchecked(a, x);
        Ok(())
    }

    pub fn scaled(&self, a: Complex64) -> Field {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= a);
        out
    }

    pub fn scale_real(&self, a: f64) -> Field {
        self.scaled(Complex64::new(a, 0.0))
    }

    pub fn conj(&self) -> Field {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = v.conj());
        out
    }

    /// Multiplies every component by the scalar field `s`.
    pub fn mul_scalar_field(&self, s: &Field) -> Result<Field> {
        if s.ncomp != 1 || !s.grid.same_as(&self.grid) {
            return Err(Error::Structural(
                "scalar multiplier must be a 1-component field on the same grid".into(),
            ));
        }
        let len = self.grid.len();
        let mut out = self.clone();
        for c in 0..self.ncomp {
            for (v, w) in out.data[c * len..(c + 1) * len].iter_mut().zip(&s.data) {
                *v *= w;
            }
        }
        Ok(out)
    }

    /// Pointwise product: scalar × field, field × scalar, or componentwise
    /// for equal component counts.
    pub fn pointwise_mul(&self, other: &Field) -> Result<Field> {
        if other.ncomp == 1 {
            self.mul_scalar_field(other)
        } else if self.ncomp == 1 {
            other.mul_scalar_field(self)
        } else {
            self.require_compatible(other, "pointwise product")?;
            let mut out = self.clone();
            for (a, b) in out.data.iter_mut().zip(&other.data) {
                *a *= b;
            }
            Ok(out)
        }
    }

    /// `(a·∇)b` for a vector `a` and the 9-component gradient `grad_b`
    /// (layout `grad_b[c*3+i] = ∂_i b_c`).
    pub fn convective(a: &Field, grad_b: &Field) -> Result<Field> {
        a.require_vector("convective term")?;
        if grad_b.ncomp != 9 || !grad_b.grid.same_as(&a.grid) {
            return Err(Error::Structural("convective term needs a 9-component gradient".into()));
        }
        let len = a.grid.len();
        let mut out = Field::zeros(a.grid, 3);
        for c in 0..3 {
            for i in 0..3 {
                let ai = &a.data[i * len..(i + 1) * len];
                let g = &grad_b.data[(c * 3 + i) * len..(c * 3 + i + 1) * len];
                let o = &mut out.data[c * len..(c + 1) * len];
                for ((o, x), y) in o.iter_mut().zip(ai).zip(g) {
                    *o += x * y;
                }
            }
        }
        Ok(out)
    }

    /// Pointwise magnitude (Euclidean over components).
    pub fn magnitude_squared(&self) -> Vec<f64> {
        let len = self.grid.len();
        let mut out = vec![0.0; len];
        for c in 0..self.ncomp {
            for (o, v) in out.iter_mut().zip(self.component(c)) {
                *o += v.norm_sqr();
            }
        }
        out
    }

    /// Discrete Lebesgue norm `(Σ |f(x_i)|^q h³)^{1/q}`; `q = ∞` gives the max.
    pub fn lq_norm(&self, q: f64) -> f64 {
        lq_norm_from_squares(&self.magnitude_squared(), q, self.grid.cell_volume())
    }

    /// `⟨a, b⟩ = Σ a·conj(b) h³`.
    pub fn inner(&self, other: &Field) -> Result<Complex64> {
        self.require_compatible(other, "inner product")?;
        let mut re = CompensatedSum::default();
        let mut im = CompensatedSum::default();
        for (a, b) in self.data.iter().zip(&other.data) {
            let p = a * b.conj();
            re.add(p.re);
            im.add(p.im);
        }
        Ok(Complex64::new(re.value(), im.value()) * self.grid.cell_volume())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Fraction of `‖f‖²_{L²}` located at `|x| > radius`.
    pub fn mass_fraction_outside(&self, radius: f64) -> f64 {
        let (outside, total) = self.mass_split(radius);
        if total == 0.0 {
            0.0
        } else {
            outside / total
        }
    }

    /// `(Σ_{|x|>radius} |f|², Σ |f|²)` over the samples.
    pub fn mass_split(&self, radius: f64) -> (f64, f64) {
        let m2 = self.magnitude_squared();
        let r2 = radius * radius;
        let mut total = 0.0;
        let mut outside = 0.0;
        for (idx, v) in m2.iter().enumerate() {
            total += v;
            let x = self.grid.position(idx);
            if x[0] * x[0] + x[1] * x[1] + x[2] * x[2] > r2 {
                outside += v;
            }
        }
        (outside, total)
    }

    pub fn transform(&self) -> SpectralField {
        let n = self.grid.n;
        let len = self.grid.len();
        let mut data = self.data.clone();
        let scale = 1.0 / len as f64;
        for block in data.chunks_mut(len) {
            fft3(block, n, false);
            for (idx, v) in block.iter_mut().enumerate() {
                let [a, b, c] = self.grid.unravel(idx);
                // phase of the centered origin: (-1)^(a+b+c)
                let s = if (a + b + c) % 2 == 0 { scale } else { -scale };
                *v *= s;
            }
        }
        SpectralField {
            grid: self.grid,
            ncomp: self.ncomp,
            data,
        }
    }

    /// Applies a per-wavevector linear map. `f(ξ, input, output)` sees the
    /// `ncomp` input coefficients and writes `out_ncomp` output coefficients.
    pub fn apply_multiplier(&self, out_ncomp: usize, f: impl Fn([f64; 3], &[Complex64], &mut [Complex64])) -> Field {
        let grid = self.grid;
        let n = grid.n;
        let len = grid.len();
        let mut spec = self.data.clone();
        for block in spec.chunks_mut(len) {
            fft3(block, n, false);
        }
        let mut out = vec![ZERO; out_ncomp * len];
        let mut inp = vec![ZERO; self.ncomp];
        let mut res = vec![ZERO; out_ncomp];
        for idx in 0..len {
            let xi = grid.wavevector(idx);
            for c in 0..self.ncomp {
                inp[c] = spec[c * len + idx];
            }
            res.iter_mut().for_each(|r| *r = ZERO);
            f(xi, &inp, &mut res);
            for c in 0..out_ncomp {
                out[c * len + idx] = res[c];
            }
        }
        let scale = 1.0 / len as f64;
        for block in out.chunks_mut(len) {
            fft3(block, n, true);
            block.iter_mut().for_each(|v| *v *= scale);
        }
        Field {
            grid,
            ncomp: out_ncomp,
            data: out,
        }
    }

    /// Full gradient, layout `out[c*3+i] = ∂_i f_c`.
    pub fn gradient(&self) -> Field {
        let nc = self.ncomp;
        self.apply_multiplier(nc * 3, |xi, u, out| {
            for c in 0..nc {
                for i in 0..3 {
                    out[c * 3 + i] = I * xi[i] * u[c];
                }
            }
        })
    }

    pub fn partial(&self, axis: usize) -> Field {
        self.apply_multiplier(self.ncomp, |xi, u, out| {
            for (o, v) in out.iter_mut().zip(u) {
                *o = I * xi[axis] * v;
            }
        })
    }

    pub fn divergence(&self) -> Result<Field> {
        self.require_vector("divergence")?;
        Ok(self.apply_multiplier(1, |xi, u, out| {
            out[0] = I * (xi[0] * u[0] + xi[1] * u[1] + xi[2] * u[2]);
        }))
    }

    pub fn laplacian(&self) -> Field {
        self.apply_multiplier(self.ncomp, |xi, u, out| {
            let k2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
            for (o, v) in out.iter_mut().zip(u) {
                *o = -k2 * v;
            }
        })
    }

    /// All second derivatives, layout `out[(c*3+i)*3+j] = ∂_i∂_j f_c`.
    pub fn hessian(&self) -> Field {
        let nc = self.ncomp;
        self.apply_multiplier(nc * 9, |xi, u, out| {
            for c in 0..nc {
                for i in 0..3 {
                    for j in 0..3 {
                        out[(c * 3 + i) * 3 + j] = -(xi[i] * xi[j]) * u[c];
                    }
                }
            }
        })
    }

    pub fn curl(&self) -> Result<Field> {
        self.require_vector("curl")?;
        Ok(self.apply_multiplier(3, |xi, u, out| {
            out[0] = I * (xi[1] * u[2] - xi[2] * u[1]);
            out[1] = I * (xi[2] * u[0] - xi[0] * u[2]);
            out[2] = I * (xi[0] * u[1] - xi[1] * u[0]);
        }))
    }

    /// Multiplication by `I − ξξᵀ/|ξ|²`; the ξ = 0 coefficient passes through.
    pub fn helmholtz_project(&self) -> Result<Field> {
        self.require_vector("Helmholtz projection")?;
        Ok(self.apply_multiplier(3, |xi, u, out| {
            let k2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
            out.copy_from_slice(u);
            if k2 > 0.0 {
                let d = (xi[0] * u[0] + xi[1] * u[1] + xi[2] * u[2]) / k2;
                for i in 0..3 {
                    out[i] -= xi[i] * d;
                }
            }
        }))
    }

    /// 2/3-rule truncation: zeroes every mode with `3|m_i| > n` on some axis.
    pub fn dealias(&self) -> Field {
        let n = self.grid.n as i64;
        let grid = self.grid;
        let len = grid.len();
        let mut spec = self.data.clone();
        for block in spec.chunks_mut(len) {
            fft3(block, grid.n, false);
            for (idx, v) in block.iter_mut().enumerate() {
                let [a, b, c] = grid.unravel(idx);
                let keep = [a, b, c].iter().all(|&i| 3 * grid.signed_index(i).abs() <= n);
                if !keep {
                    *v = ZERO;
                }
            }
            fft3(block, grid.n, true);
            block.iter_mut().for_each(|v| *v /= len as f64);
        }
        Field {
            grid,
            ncomp: self.ncomp,
            data: spec,
        }
    }

    /// `e₁∧x·∇u − e₁∧u` with spectral derivatives and the centered coordinate.
    /// The unchecked variant skips the support guard for callers that check
    /// a whole family of fields at once.
    pub fn rotation_term(&self, guard: &SupportGuard) -> Result<Field> {
        self.require_vector("rotation term")?;
        guard.check(self, "rotation term")?;
        Ok(self.rotation_term_unchecked())
    }

    pub fn rotation_term_unchecked(&self) -> Field {
        let grid = self.grid;
        let len = grid.len();
        // ∂₂ and ∂₃ of every component
        let d = self.apply_multiplier(6, |xi, u, out| {
            for c in 0..3 {
                out[2 * c] = I * xi[1] * u[c];
                out[2 * c + 1] = I * xi[2] * u[c];
            }
        });
        let mut out = Field::zeros(grid, 3);
        for idx in 0..len {
            let x = grid.position(idx);
            for c in 0..3 {
                let d2 = d.data[(2 * c) * len + idx];
                let d3 = d.data[(2 * c + 1) * len + idx];
                out.data[c * len + idx] = x[1] * d3 - x[2] * d2;
            }
            // − e₁∧u = (0, u₃, −u₂)
            out.data[len + idx] += self.data[2 * len + idx];
            out.data[2 * len + idx] -= self.data[len + idx];
        }
        out
    }

    /// Multiplies each sample by `g(x)`.
    pub fn mul_fn(&self, g: impl Fn([f64; 3]) -> f64) -> Field {
        let len = self.grid.len();
        let mut out = self.clone();
        for idx in 0..len {
            let w = g(self.grid.position(idx));
            for c in 0..self.ncomp {
                out.data[c * len + idx] *= w;
            }
        }
        out
    }

    /// Trigonometric interpolant evaluated at arbitrary points. Direct
    /// summation, intended for a handful of probe points.
    pub fn evaluate_at(&self, points: &[[f64; 3]]) -> Vec<Vec<Complex64>> {
        let spec = self.transform();
        let grid = self.grid;
        let n = grid.n;
        let k0 = grid.fundamental_wavenumber();
        points
            .iter()
            .map(|p| {
                let basis: Vec<Vec<Complex64>> = (0..3)
                    .map(|ax| {
                        (0..n)
                            .map(|i| {
                                let m = grid.signed_index(i);
                                if m == -((n / 2) as i64) {
                                    // split Nyquist term keeps real data real
                                    Complex64::new((k0 * m as f64 * p[ax]).cos(), 0.0)
                                } else {
                                    Complex64::from_polar(1.0, k0 * m as f64 * p[ax])
                                }
                            })
                            .collect()
                    })
                    .collect();
                (0..self.ncomp)
                    .map(|c| {
                        let block = &spec.data[c * grid.len()..(c + 1) * grid.len()];
                        let mut acc = ZERO;
                        for i3 in 0..n {
                            for i2 in 0..n {
                                let w = basis[1][i2] * basis[2][i3];
                                let row = &block[grid.index(0, i2, i3)..grid.index(0, i2, i3) + n];
                                let mut s = ZERO;
                                for (i1, v) in row.iter().enumerate() {
                                    s += v * basis[0][i1];
                                }
                                acc += s * w;
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(FIELD_MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.grid.n as u32).to_le_bytes())?;
        w.write_all(&self.grid.length.to_le_bytes())?;
        w.write_all(&(self.ncomp as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.data.len() * 16);
        for v in &self.data {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(r: &mut R) -> Result<Field> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != FIELD_MAGIC {
            return Err(Error::Structural("not a field file (bad magic)".into()));
        }
        let version = read_u32(r)?;
        if version != FORMAT_VERSION {
            return Err(Error::Structural(format!("unsupported field format version {version}")));
        }
        let n = read_u32(r)? as usize;
        let length = read_f64(r)?;
        let ncomp = read_u32(r)? as usize;
        let grid = BoxGrid::new(n, length)?;
        let count = ncomp * grid.len();
        let mut bytes = vec![0u8; count * 16];
        r.read_exact(&mut bytes)?;
        let data = bytes
            .chunks_exact(16)
            .map(|b| {
                Complex64::new(
                    f64::from_le_bytes(b[..8].try_into().unwrap()),
                    f64::from_le_bytes(b[8..].try_into().unwrap()),
                )
            })
            .collect();
        Field::from_data(grid, ncomp, data)
    }
}

const FIELD_MAGIC: &[u8; 4] = b"TPOF";
pub(crate) const FORMAT_VERSION: u32 = 1;

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// `(Σ s_i^{q/2} h³)^{1/q}` from pointwise squared magnitudes.
pub fn lq_norm_from_squares(squares: &[f64], q: f64, cell_volume: f64) -> f64 {
    if q.is_infinite() {
        return squares.iter().cloned().fold(0.0, f64::max).sqrt();
    }
    let half = 0.5 * q;
    let s: f64 = if (half - 1.0).abs() < f64::EPSILON {
        squares.iter().sum()
    } else {
        squares.iter().map(|&v| if v > 0.0 { v.powf(half) } else { 0.0 }).sum()
    };
    (s * cell_volume).powf(1.0 / q)
}

impl SpectralField {
    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Coefficient of `exp(i ξ_m·x)` for signed indices `m`.
    pub fn coefficient(&self, c: usize, m: [i64; 3]) -> Complex64 {
        let n = self.grid.n as i64;
        let w = |v: i64| v.rem_euclid(n) as usize;
        self.data[c * self.grid.len() + self.grid.index(w(m[0]), w(m[1]), w(m[2]))]
    }

    pub fn inverse_transform(&self) -> Field {
        let n = self.grid.n;
        let len = self.grid.len();
        let mut data = self.data.clone();
        for block in data.chunks_mut(len) {
            for (idx, v) in block.iter_mut().enumerate() {
                let [a, b, c] = self.grid.unravel(idx);
                if (a + b + c) % 2 == 1 {
                    *v = -*v;
                }
            }
            fft3(block, n, true);
        }
        Field {
            grid: self.grid,
            ncomp: self.ncomp,
            data,
        }
    }

    /// `Σ_m |f̂_m|²` summed over components.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// One row of a norm export.
#[derive(Clone, Debug, PartialEq)]
pub struct NormRecord {
    pub name: String,
    pub q: f64,
    pub value: f64,
}

/// CSV export of norms with columns `name,q,value`.
pub fn write_norms_csv<W: Write>(w: &mut W, rows: &[NormRecord]) -> Result<()> {
    writeln!(w, "name,q,value")?;
    for r in rows {
        writeln!(w, "{},{},{:.17e}", r.name, r.q, r.value)?;
    }
    Ok(())
}
