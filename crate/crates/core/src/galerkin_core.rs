//! Galerkin solve of one rotating resolvent problem on a divergence-free basis.
//!
//! For `u = Σ_ℓ ξ_ℓ ψ_ℓ` the weak form tested with `ψ_j` reads
//! `(S + M) ξ = c` with
//!
//! ```text
//! S_{jℓ} = ⟨∇ψ_ℓ, ∇ψ_j⟩,
//! M_{jℓ} = ⟨ω(ikψ_ℓ + e₁∧ψ_ℓ − e₁∧x·∇ψ_ℓ) − λ∂₁ψ_ℓ, ψ_j⟩,
//! c_j    = ⟨F, ψ_j⟩.
//! ```
//!
//! `M` is skew-Hermitian, so `Re ξᴴ(S+M)ξ = ξᴴSξ` and the system is uniquely
//! solvable. Inner products are grid Riemann sums.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::corpus;
use crate::error::{Error, Result};
use crate::spectral_field::{BoxGrid, Field};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Divergence-free fields supported in the annulus `r_in ≤ |x| ≤ r_out`.
#[derive(Clone, Debug)]
pub struct DiscreteBasis {
    grid: BoxGrid,
    functions: Vec<Field>,
    gradients: Vec<Field>,
    r_in: f64,
    r_out: f64,
    mass: DMatrix<Complex64>,
    stiffness: DMatrix<Complex64>,
}

/// Largest admissible `‖ψ‖²` fraction outside the annulus.
pub const MASK_TOLERANCE: f64 = 1e-10;

fn annulus_leak(f: &Field, r_in: f64, r_out: f64) -> f64 {
    let m2 = f.magnitude_squared();
    let grid = f.grid();
    let (mut out, mut total) = (0.0, 0.0);
    for (idx, v) in m2.iter().enumerate() {
        let x = grid.position(idx);
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        total += v;
        if r < r_in || r > r_out {
            out += v;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        out / total
    }
}

fn gram(a: &[Field], b: &[Field]) -> Result<DMatrix<Complex64>> {
    let n = a.len();
    let entries = (0..n * n)
        .into_par_iter()
        .map(|e| {
            let (j, l) = (e % n, e / n);
            a[l].inner(&b[j])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_vec(n, n, entries))
}

impl DiscreteBasis {
    /// Validates divergence and support and forms the Gram matrices.
    pub fn new(functions: Vec<Field>, r_in: f64, r_out: f64) -> Result<Self> {
        let Some(first) = functions.first() else {
            return Err(Error::InvalidParameter("empty basis".into()));
        };
        if !(0.0 <= r_in && r_in < r_out) {
            return Err(Error::InvalidParameter(format!("mask radii {r_in} < {r_out} required")));
        }
        let grid = *first.grid();
        for (j, f) in functions.iter().enumerate() {
            if f.ncomp() != 3 || !f.grid().same_as(&grid) {
                return Err(Error::Structural(format!(
                    "basis function {j} is not a vector field on the common grid"
                )));
            }
        }
        let gradients: Vec<Field> = functions.par_iter().map(|f| f.gradient()).collect();
        for (j, (f, g)) in functions.iter().zip(&gradients).enumerate() {
            let div = f.divergence()?.max_abs();
            if div > 1e-10 * g.max_abs().max(f64::MIN_POSITIVE) {
                return Err(Error::Structural(format!(
                    "basis function {j} has divergence {div:.3e}"
                )));
            }
            let leak = annulus_leak(f, r_in, r_out);
            if leak > MASK_TOLERANCE {
                return Err(Error::DomainApproximation(format!(
                    "basis function {j} leaves the mask: fraction {leak:.3e} outside [{r_in}, {r_out}]"
                )));
            }
        }
        let mass = gram(&functions, &functions)?;
        let stiffness = gram(&gradients, &gradients)?;
        Ok(Self {
            grid,
            functions,
            gradients,
            r_in,
            r_out,
            mass,
            stiffness,
        })
    }

    /// Real L²-orthonormalized curls of Gaussian vector potentials centered on the
    /// mid-radius sphere of the annulus, width one twelfth of its thickness.
    pub fn curl_bumps(grid: BoxGrid, count: usize, r_in: f64, r_out: f64, seed: u64) -> Result<Self> {
        let mut rng = corpus::rng(seed);
        let radius = 0.5 * (r_in + r_out);
        let sigma = (r_out - r_in) / 12.0;
        let generators: Vec<Field> = (0..count)
            .map(|_| {
                let mut d = [0.0f64; 3];
                loop {
                    d.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
                    let n2: f64 = d.iter().map(|v| v * v).sum();
                    if n2 > 1e-2 && n2 <= 1.0 {
                        d.iter_mut().for_each(|v| *v *= radius / n2.sqrt());
                        break;
                    }
                }
                let a: [Complex64; 3] = std::array::from_fn(|_| Complex64::new(rng.random_range(-1.0..1.0), 0.0));
                Field::vector_from_fn(grid, |x| {
                    let g = corpus::gaussian(x, d, sigma);
                    [a[0] * g, a[1] * g, a[2] * g]
                })
                .curl()
                .expect("vector potential")
            })
            .collect();
        Self::new(gram_schmidt(generators)?, r_in, r_out)
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn functions(&self) -> &[Field] {
        &self.functions
    }

    pub fn mask(&self) -> (f64, f64) {
        (self.r_in, self.r_out)
    }

    pub fn mass_gram(&self) -> &DMatrix<Complex64> {
        &self.mass
    }

    pub fn stiffness_gram(&self) -> &DMatrix<Complex64> {
        &self.stiffness
    }

    /// `Σ ξ_j ψ_j`.
    pub fn reconstruct(&self, xi: &DVector<Complex64>) -> Result<Field> {
        if xi.len() != self.len() {
            return Err(Error::Structural(format!(
                "{} coefficients for {} basis functions",
                xi.len(),
                self.len()
            )));
        }
        let mut u = Field::zeros(self.grid, 3);
        for (c, f) in xi.iter().zip(&self.functions) {
            u.axpy(*c, f)?;
        }
        Ok(u)
    }
}

/// Modified Gram–Schmidt in L²; nearly dependent generators are rejected.
pub fn gram_schmidt(generators: Vec<Field>) -> Result<Vec<Field>> {
    let mut out: Vec<Field> = Vec::with_capacity(generators.len());
    for (j, mut g) in generators.into_iter().enumerate() {
        let n0 = g.inner(&g)?.re.sqrt();
        for e in &out {
            let p = g.inner(e)?;
            g.axpy(-p, e)?;
        }
        let n = g.inner(&g)?.re.sqrt();
        if n <= 1e-8 * n0 {
            return Err(Error::Structural(format!(
                "generator {j} is linearly dependent on its predecessors"
            )));
        }
        out.push(g.scale_real(1.0 / n));
    }
    Ok(out)
}

/// Assembled system `(S + M) ξ = c` for one `(λ, ω, k)`.
#[derive(Clone, Debug)]
pub struct GalerkinSystem {
    pub s: DMatrix<Complex64>,
    pub m: DMatrix<Complex64>,
    pub c: DVector<Complex64>,
    pub lambda: f64,
    pub omega: f64,
    pub k: i64,
}

/// `ω(ikψ + e₁∧ψ − e₁∧x·∇ψ) − λ∂₁ψ`.
pub fn transport_operator(psi: &Field, lambda: f64, omega: f64, k: i64) -> Field {
    let mut r = psi.rotation_term_unchecked().scaled(Complex64::new(-omega, 0.0));
    r.axpy_unchecked(Complex64::new(0.0, omega * k as f64), psi);
    r.axpy_unchecked(Complex64::new(-lambda, 0.0), &psi.partial(0));
    r
}

pub fn assemble(basis: &DiscreteBasis, lambda: f64, omega: f64, k: i64, forcing: &Field) -> Result<GalerkinSystem> {
    if !forcing.compatible(&basis.functions[0]) {
        return Err(Error::Structural("forcing does not match the basis grid".into()));
    }
    let images: Vec<Field> = basis
        .functions
        .par_iter()
        .map(|psi| transport_operator(psi, lambda, omega, k))
        .collect();
    let m = gram(&images, &basis.functions)?;
    let c = basis
        .functions
        .iter()
        .map(|psi| forcing.inner(psi))
        .collect::<Result<Vec<_>>>()?;
    Ok(GalerkinSystem {
        s: basis.stiffness.clone(),
        m,
        c: DVector::from_vec(c),
        lambda,
        omega,
        k,
    })
}

impl GalerkinSystem {
    pub fn matrix(&self) -> DMatrix<Complex64> {
        &self.s + &self.m
    }

    /// `‖M + Mᴴ‖_F / ‖M‖_F`, 0 for `M = 0`.
    pub fn skewness(&self) -> f64 {
        let norm = self.m.norm();
        if norm == 0.0 {
            0.0
        } else {
            (&self.m + self.m.adjoint()).norm() / norm
        }
    }

    /// Spectral condition number of `S + M`.
    pub fn condition_number(&self) -> f64 {
        let sv = self.matrix().singular_values();
        let max = sv.iter().cloned().fold(0.0, f64::max);
        let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }

    /// `‖(S+M)ξ − c‖ / ‖c‖` (absolute when `c = 0`).
    pub fn residual(&self, xi: &DVector<Complex64>) -> f64 {
        let r = (self.matrix() * xi - &self.c).norm();
        let c = self.c.norm();
        if c > 0.0 {
            r / c
        } else {
            r
        }
    }
}

/// `ξ = (S+M)⁻¹ c` by LU with one step of iterative refinement.
pub fn solve(system: &GalerkinSystem) -> Result<DVector<Complex64>> {
    let a = system.matrix();
    let lu = a.clone().lu();
    let singular = || {
        Error::Numerical(format!(
            "Galerkin matrix is numerically singular (condition number {:.3e})",
            system.condition_number()
        ))
    };
    let mut xi = lu.solve(&system.c).ok_or_else(singular)?;
    let r = &system.c - &a * &xi;
    xi += lu.solve(&r).ok_or_else(singular)?;
    if !xi.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        return Err(singular());
    }
    Ok(xi)
}

/// Energy identities of a Galerkin solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyReport {
    /// `|Re⟨Tu, u⟩| / ‖∇u‖²` for the transport part `T` of the operator.
    pub transport_real_part: f64,
    /// `|Re ξᴴ(S+M)ξ − ξᴴSξ| / ξᴴSξ`.
    pub energy_identity: f64,
    /// `‖∇u‖² / (‖F‖_{6/5} ‖u‖₆)`.
    pub sobolev_ratio: f64,
    /// `‖u‖₆ / ‖∇u‖₂`.
    pub sobolev_constant: f64,
    pub gradient_energy: f64,
}

pub fn energy_report(
    system: &GalerkinSystem,
    xi: &DVector<Complex64>,
    forcing: &Field,
    basis: &DiscreteBasis,
) -> Result<EnergyReport> {
    let u = basis.reconstruct(xi)?;
    let grad = {
        let mut g = Field::zeros(basis.grid, 9);
        for (c, d) in xi.iter().zip(&basis.gradients) {
            g.axpy(*c, d)?;
        }
        g
    };
    let grad2 = grad.inner(&grad)?.re;
    let quad = xi.dotc(&(system.matrix() * xi));
    let sxx = xi.dotc(&(&system.s * xi)).re;
    if grad2 == 0.0 {
        return Ok(EnergyReport {
            transport_real_part: 0.0,
            energy_identity: 0.0,
            sobolev_ratio: 0.0,
            sobolev_constant: 0.0,
            gradient_energy: 0.0,
        });
    }
    let t = transport_operator(&u, system.lambda, system.omega, system.k);
    let tu = t.inner(&u)?;
    let f65 = forcing.lq_norm(1.2);
    let u6 = u.lq_norm(6.0);
    let denom = f65 * u6;
    Ok(EnergyReport {
        transport_real_part: tu.re.abs() / grad2,
        energy_identity: (quad.re - sxx).abs() / sxx,
        sobolev_ratio: if denom > 0.0 { grad2 / denom } else { f64::INFINITY },
        sobolev_constant: u6 / grad2.sqrt(),
        gradient_energy: grad2,
    })
}

/// Smallest singular value of `S + M` and smallest eigenvalue of `S`.
pub fn coercivity(system: &GalerkinSystem) -> (f64, f64) {
    let smin = system
        .matrix()
        .singular_values()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let emin = system
        .s
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    (smin, emin)
}

/// Zero coefficient vector of the right length.
pub fn zero_coefficients(basis: &DiscreteBasis) -> DVector<Complex64> {
    DVector::from_element(basis.len(), ZERO)
}

/// One seeded system of the Galerkin suite.
#[derive(Clone, Debug, PartialEq)]
pub struct GalerkinRecord {
    pub system: usize,
    pub basis_seed: u64,
    pub lambda: f64,
    pub omega: f64,
    pub k: i64,
    pub skewness: f64,
    pub condition_number: f64,
    pub residual: f64,
    pub energy: EnergyReport,
}

/// `systems` random `(λ, ω, k, F)` draws, five per seeded basis, with
/// `λ ∈ [0.02, 0.5]`, `ω ∈ [λ², 2]`, `|k| ≤ 3` and a safe-ball bump `F`.
pub fn galerkin_suite(
    grid: BoxGrid,
    systems: usize,
    basis_size: usize,
    r_in: f64,
    r_out: f64,
    seed: u64,
) -> Result<Vec<GalerkinRecord>> {
    const PER_BASIS: usize = 5;
    let mut rng = corpus::rng(seed);
    let mut rows = Vec::with_capacity(systems);
    let mut basis = None;
    for i in 0..systems {
        let basis_seed = seed.wrapping_add((i / PER_BASIS) as u64);
        if i % PER_BASIS == 0 {
            basis = Some(DiscreteBasis::curl_bumps(grid, basis_size, r_in, r_out, basis_seed)?);
        }
        let b = basis.as_ref().expect("built on the first system");
        let lambda = rng.random_range(0.02..0.5);
        let omega = rng.random_range(lambda * lambda..2.0);
        let k = rng.random_range(-3..=3i64);
        let f = corpus::safe_bump(grid, rng.random(), 1.0);
        let sys = assemble(b, lambda, omega, k, &f)?;
        let xi = solve(&sys)?;
        rows.push(GalerkinRecord {
            system: i,
            basis_seed,
            lambda,
            omega,
            k,
            skewness: sys.skewness(),
            condition_number: sys.condition_number(),
            residual: sys.residual(&xi),
            energy: energy_report(&sys, &xi, &f, b)?,
        });
    }
    Ok(rows)
}

pub fn write_galerkin_csv<W: Write>(w: &mut W, rows: &[GalerkinRecord]) -> Result<()> {
    writeln!(
        w,
        "system,basis_seed,lambda,omega,k,skewness,condition_number,residual,energy_identity,transport_real_part,sobolev_ratio"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:.12e},{:.12e},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.12e}",
            r.system,
            r.basis_seed,
            r.lambda,
            r.omega,
            r.k,
            r.skewness,
            r.condition_number,
            r.residual,
            r.energy.energy_identity,
            r.energy.transport_real_part,
            r.energy.sobolev_ratio
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(count: usize, seed: u64) -> DiscreteBasis {
        let g = BoxGrid::new(64, 16.0).unwrap();
        DiscreteBasis::curl_bumps(g, count, 0.3, 7.2, seed).unwrap()
    }

    #[test]
    fn orthonormal_basis_and_hermitian_stiffness() {
        let b = basis(6, 1);
        let id = DMatrix::<Complex64>::identity(6, 6);
        assert!((b.mass_gram() - id).norm() < 1e-12);
        let s = b.stiffness_gram();
        assert!((s - s.adjoint()).norm() < 1e-12 * s.norm());
        let (_, emin) = coercivity(&assemble(&b, 0.0, 0.0, 0, &Field::zeros(*b.grid(), 3)).unwrap());
        assert!(emin > 0.0);
    }

    #[test]
    fn stokes_limit_has_no_transport_block() {
        let b = basis(4, 2);
        let f = corpus::safe_bump(*b.grid(), 3, 1.0);
        let sys = assemble(&b, 0.0, 0.0, 0, &f).unwrap();
        assert_eq!(sys.m.norm(), 0.0);
        let xi = solve(&sys).unwrap();
        let direct = b.stiffness_gram().clone().lu().solve(&sys.c).unwrap();
        assert!((xi - direct).norm() < 1e-12);
    }

    #[test]
    fn single_function_block_is_pure_rotation_of_the_mode() {
        let b = basis(1, 4);
        let (omega, lambda) = (0.7, 0.3);
        let sys = assemble(&b, lambda, omega, 1, &Field::zeros(*b.grid(), 3)).unwrap();
        // antisymmetric parts vanish, leaving iω‖ψ‖² = iω
        let m = sys.m[(0, 0)];
        assert!(m.re.abs() < 1e-12 && (m.im - omega).abs() < 1e-10, "{m}");
    }

    #[test]
    fn transport_block_is_skew_hermitian() {
        let b = basis(6, 5);
        let f = corpus::safe_bump(*b.grid(), 6, 1.0);
        let sys = assemble(&b, 0.2, 0.5, 3, &f).unwrap();
        assert!(sys.skewness() < 1e-10, "{}", sys.skewness());
        let (smin, emin) = coercivity(&sys);
        assert!(smin >= emin * (1.0 - 1e-10));
    }

    #[test]
    fn solution_satisfies_energy_identities() {
        let b = basis(6, 7);
        let f = corpus::safe_bump(*b.grid(), 8, 1.0);
        let sys = assemble(&b, 0.1, 0.4, -2, &f).unwrap();
        let xi = solve(&sys).unwrap();
        assert!(sys.residual(&xi) < 1e-12);
        let e = energy_report(&sys, &xi, &f, &b).unwrap();
        assert!(e.energy_identity < 1e-12, "{e:?}");
        assert!(e.transport_real_part < 1e-10, "{e:?}");
        assert!(e.sobolev_ratio <= 1.0 + 1e-6, "{e:?}");
    }

    #[test]
    fn zero_forcing_gives_zero_solution() {
        let b = basis(3, 9);
        let f = Field::zeros(*b.grid(), 3);
        let sys = assemble(&b, 0.2, 0.5, 1, &f).unwrap();
        let xi = solve(&sys).unwrap();
        assert_eq!(xi.norm(), 0.0);
        let e = energy_report(&sys, &xi, &f, &b).unwrap();
        assert_eq!(e.gradient_energy, 0.0);
        assert_eq!(zero_coefficients(&b).len(), 3);
    }

    #[test]
    fn invalid_bases_are_refused() {
        let g = BoxGrid::new(16, 8.0).unwrap();
        let grad = Field::scalar_from_fn(g, |x| Complex64::new(corpus::gaussian(x, [0.0; 3], 1.0), 0.0)).gradient();
        assert!(matches!(
            DiscreteBasis::new(vec![grad], 0.0, 3.0),
            Err(Error::Structural(_))
        ));
        let wide = Field::vector_from_fn(g, |x| {
            let v = Complex64::new(corpus::gaussian(x, [0.0; 3], 1.0), 0.0);
            [v, v, v]
        })
        .curl()
        .unwrap();
        assert!(matches!(
            DiscreteBasis::new(vec![wide], 1.0, 3.0),
            Err(Error::DomainApproximation(_))
        ));
    }
}
