//! Seeded test-data generators.
//!
//! Localized fields are Gaussians, or curls of polynomial-times-Gaussian
//! potentials centered on the x₁-axis. The polynomial degree bounds the
//! azimuthal order, which keeps the frame transform within its guard width.
//! Random coefficients come from a ChaCha8 stream seeded by the caller.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::spectral_field::{BoxGrid, Field};
use crate::wiener_algebra::{FieldSeries, TorusSeries};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn complex_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(normal(rng), normal(rng)) * std::f64::consts::FRAC_1_SQRT_2
}

/// `exp(−|x − center|² / 2σ²)`.
pub fn gaussian(x: [f64; 3], center: [f64; 3], sigma: f64) -> f64 {
    let r2: f64 = (0..3).map(|i| (x[i] - center[i]).powi(2)).sum();
    (-r2 / (2.0 * sigma * sigma)).exp()
}

/// Uniform random samples in the unit square, not localized.
pub fn random_vector_field(grid: BoxGrid, seed: u64) -> Field {
    random_field(grid, 3, seed)
}

pub fn random_field(grid: BoxGrid, ncomp: usize, seed: u64) -> Field {
    let mut r = rng(seed);
    let data = (0..ncomp * grid.len())
        .map(|_| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
        .collect();
    Field::from_data(grid, ncomp, data).expect("sizes agree")
}

/// Series of unlocalized random fields.
pub fn random_series(grid: BoxGrid, k_max: usize, ncomp: usize, seed: u64) -> FieldSeries {
    let coeffs = (0..2 * k_max + 1)
        .map(|i| random_field(grid, ncomp, seed.wrapping_mul(1000).wrapping_add(i as u64)))
        .collect();
    TorusSeries::new(k_max, coeffs).expect("sizes agree")
}

/// Gaussian width that keeps localized fields resolved and decayed on `grid`:
/// the spectral tail at the Nyquist wavenumber and the value at the box face
/// are then comparable.
pub fn default_width(grid: &BoxGrid) -> f64 {
    // balance exp(−σ²(π/h)²/2) against exp(−(L/2)²/2σ²)
    let h = grid.spacing();
    let half = 0.5 * grid.length();
    (half * h / std::f64::consts::PI).sqrt()
}

/// Divergence-free field `curl A` where each potential component is a
/// polynomial of degree ≤ 2 in (x₂, x₃) times a Gaussian centered at
/// `(x1_center, 0, 0)`. `coeffs[c]` holds the coefficients of
/// `1, x₂, x₃, x₂², x₂x₃, x₃²` for component `c`.
pub fn axial_curl_field(grid: BoxGrid, sigma: f64, coeffs: &[[Complex64; 6]; 3], x1_center: f64) -> Field {
    let potential = Field::from_fn(grid, 3, |x, out| {
        let g = gaussian(x, [x1_center, 0.0, 0.0], sigma);
        let mono = [1.0, x[1], x[2], x[1] * x[1], x[1] * x[2], x[2] * x[2]];
        for c in 0..3 {
            let p: Complex64 = coeffs[c].iter().zip(mono).map(|(a, m)| a * m).sum();
            out[c] = p * g;
        }
    });
    potential.curl().expect("vector potential")
}

/// Random complex potential coefficients with polynomial terms scaled by the
/// width so all contributions are comparable.
pub fn random_axial_coefficients(seed: u64, sigma: f64) -> [[Complex64; 6]; 3] {
    let mut r = rng(seed);
    let scale = [
        1.0,
        1.0 / sigma,
        1.0 / sigma,
        0.5 / (sigma * sigma),
        0.5 / (sigma * sigma),
        0.5 / (sigma * sigma),
    ];
    let mut out = [[Complex64::new(0.0, 0.0); 6]; 3];
    for row in out.iter_mut() {
        for (v, s) in row.iter_mut().zip(scale) {
            *v = complex_normal(&mut r) * s;
        }
    }
    out
}

/// Seeded divergence-free localized field of azimuthal order ≤ 2.
pub fn manufactured_velocity(grid: BoxGrid, seed: u64) -> Field {
    manufactured_velocity_with_width(grid, default_width(&grid), seed)
}

/// [`manufactured_velocity`] with a prescribed Gaussian width.
pub fn manufactured_velocity_with_width(grid: BoxGrid, sigma: f64, seed: u64) -> Field {
    let mut r = rng(seed ^ 0x5eed);
    let x1 = r.random_range(-0.5..0.5);
    axial_curl_field(grid, sigma, &random_axial_coefficients(seed, sigma), x1)
}

/// Width for fields fed to the rotating operator. Its extra derivatives and
/// the growing `x` factor weigh the face value more than the spectral tail,
/// which moves the balance slightly inward from [`default_width`].
pub fn rotating_width(grid: &BoxGrid) -> f64 {
    0.98 * default_width(grid)
}

/// Seeded divergence-free field `curl(a g)` with a constant complex vector `a`
/// and an axial Gaussian `g`; azimuthal order ≤ 1.
pub fn rotating_manufactured_velocity(grid: BoxGrid, seed: u64) -> Field {
    rotating_manufactured_velocity_with_width(grid, rotating_width(&grid), seed)
}

/// [`rotating_manufactured_velocity`] with a prescribed Gaussian width.
pub fn rotating_manufactured_velocity_with_width(grid: BoxGrid, sigma: f64, seed: u64) -> Field {
    let mut r = rng(seed ^ 0x5eed);
    let x1 = r.random_range(-0.5..0.5);
    let mut coeffs = random_axial_coefficients(seed, sigma);
    for row in coeffs.iter_mut() {
        row.iter_mut().skip(1).for_each(|c| *c = Complex64::new(0.0, 0.0));
    }
    axial_curl_field(grid, sigma, &coeffs, x1)
}

/// Real single-harmonic series `v e^{it} + conj(v) e^{−it}` on `|k| ≤ k_max`.
pub fn rotating_manufactured_series(grid: BoxGrid, k_max: usize, seed: u64) -> FieldSeries {
    rotating_manufactured_series_with_width(grid, rotating_width(&grid), k_max, seed)
}

pub fn rotating_manufactured_series_with_width(grid: BoxGrid, sigma: f64, k_max: usize, seed: u64) -> FieldSeries {
    let v = rotating_manufactured_velocity_with_width(grid, sigma, seed);
    let zero = Field::zeros(grid, 3);
    TorusSeries::from_modes(k_max, &zero, vec![(-1, v.conj()), (1, v)]).expect("modes within support")
}

/// Real-valued time-periodic series with modes `1..=k_active` (and their
/// conjugates) drawn from [`manufactured_velocity`]; the steady mode is
/// included when `steady` is set.
pub fn manufactured_series(grid: BoxGrid, k_max: usize, k_active: usize, steady: bool, seed: u64) -> FieldSeries {
    manufactured_series_with_width(grid, default_width(&grid), k_max, k_active, steady, seed)
}

pub fn manufactured_series_with_width(
    grid: BoxGrid,
    sigma: f64,
    k_max: usize,
    k_active: usize,
    steady: bool,
    seed: u64,
) -> FieldSeries {
    let zero = Field::zeros(grid, 3);
    let mut modes = Vec::new();
    if steady {
        let v = manufactured_velocity_with_width(grid, sigma, seed.wrapping_mul(31));
        let real = v.add(&v.conj()).expect("same grid").scale_real(0.5);
        modes.push((0i64, real));
    }
    for k in 1..=k_active.min(k_max) {
        let v = manufactured_velocity_with_width(grid, sigma, seed.wrapping_mul(31).wrapping_add(k as u64));
        let w = 1.0 / (k * k) as f64;
        modes.push((-(k as i64), v.conj().scale_real(w)));
        modes.push((k as i64, v.scale_real(w)));
    }
    TorusSeries::from_modes(k_max, &zero, modes).expect("modes within support")
}

/// Seeded Gaussian bump with random center inside `|x| ≤ spread` and a
/// random complex amplitude vector.
pub fn safe_bump(grid: BoxGrid, seed: u64, spread: f64) -> Field {
    let sigma = default_width(&grid);
    let mut r = rng(seed);
    let center = [
        r.random_range(-spread..spread),
        r.random_range(-spread..spread),
        r.random_range(-spread..spread),
    ];
    let amp = [complex_normal(&mut r), complex_normal(&mut r), complex_normal(&mut r)];
    Field::vector_from_fn(grid, |x| {
        let g = gaussian(x, center, sigma);
        [amp[0] * g, amp[1] * g, amp[2] * g]
    })
}

/// Real-valued series of seeded safe-ball bumps on modes `|k| ≤ k_active`.
pub fn bump_series(grid: BoxGrid, k_max: usize, k_active: usize, seed: u64) -> FieldSeries {
    let zero = Field::zeros(grid, 3);
    let mut modes = Vec::new();
    let b0 = safe_bump(grid, seed.wrapping_mul(97), 1.0);
    modes.push((0i64, b0.add(&b0.conj()).expect("same grid").scale_real(0.5)));
    for k in 1..=k_active.min(k_max) {
        let b = safe_bump(grid, seed.wrapping_mul(97).wrapping_add(k as u64), 1.0);
        modes.push((-(k as i64), b.conj()));
        modes.push((k as i64, b));
    }
    TorusSeries::from_modes(k_max, &zero, modes).expect("modes within support")
}

/// Purely periodic real series `2 Re(e^{ikt} v)` with `k ∈ {1, 2}` whose
/// profile `v` is a Gaussian bump (even seeds) or an axial curl field (odd
/// seeds) of width `sigma`. The width is given in physical units so the same
/// seed describes the same function on every grid.
pub fn embedding_field(grid: BoxGrid, k_max: usize, sigma: f64, seed: u64) -> FieldSeries {
    let mut r = rng(seed ^ 0xe3b);
    let k = r.random_range(1..=2usize).min(k_max) as i64;
    let profile = if seed.is_multiple_of(2) {
        let center = [
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
        ];
        let amp = [complex_normal(&mut r), complex_normal(&mut r), complex_normal(&mut r)];
        Field::vector_from_fn(grid, |x| {
            let g = gaussian(x, center, sigma);
            [amp[0] * g, amp[1] * g, amp[2] * g]
        })
    } else {
        let x1 = r.random_range(-0.5..0.5);
        axial_curl_field(grid, sigma, &random_axial_coefficients(r.random(), sigma), x1)
    };
    let zero = Field::zeros(grid, 3);
    TorusSeries::from_modes(k_max, &zero, vec![(-k, profile.conj()), (k, profile)]).expect("modes within support")
}
