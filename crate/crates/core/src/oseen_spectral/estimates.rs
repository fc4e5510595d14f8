//! Estimate tables.
//!
//! Three families of a priori estimates are evaluated term by term:
//!
//! - `Resolvent { k }`: one time mode of the rotating system in `L^q` norms;
//! - `Wiener`: the rotating time-periodic system in `A(T; L^q)` norms;
//! - `SpaceTime`: the non-rotating time-periodic system in space-time norms,
//!   including the mixed `L^{s₂}(T; L^{s₁})` and `L^{s₃}(T; L^{s₂})` terms.
//!
//! The report lists every left-hand term, the right-hand side `‖f‖` and the
//! ratio LHS/RHS, which is 0 when both vanish.

use std::io::Write;

use num_complex::Complex64;

use super::{apply_rotating_operator, rotating_derivative_unchecked, FlowParams, TPSolution};
use crate::corpus;
use crate::embedding_verifier::{default_time_samples, mixed_norms_mapped, time_bandwidth};
use crate::error::{Error, Result};
use crate::spectral_field::{BoxGrid, Field, SupportGuard};
use crate::wiener_algebra::{FieldSeries, TorusSeries};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimateFamily {
    Resolvent { k: i64 },
    Wiener,
    SpaceTime,
}

impl EstimateFamily {
    pub fn label(&self) -> String {
        match self {
            EstimateFamily::Resolvent { k } => format!("resolvent(k={k})"),
            EstimateFamily::Wiener => "wiener".into(),
            EstimateFamily::SpaceTime => "space-time".into(),
        }
    }
}

/// Time exponent of a norm: a single mode, the Wiener sum, or `L^r(T)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeNorm {
    Mode,
    Wiener,
    Lebesgue(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateTerm {
    pub name: &'static str,
    /// Weighted value, e.g. `λ^{1/2}‖u‖`.
    pub value: f64,
    pub time: TimeNorm,
    pub space: f64,
}

impl EstimateTerm {
    pub fn exponent_pair(&self) -> String {
        let t = match self.time {
            TimeNorm::Mode => "mode".to_string(),
            TimeNorm::Wiener => "A".to_string(),
            TimeNorm::Lebesgue(r) => format!("{r}"),
        };
        format!("{t}/{}", self.space)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateReport {
    pub family: EstimateFamily,
    pub terms: Vec<EstimateTerm>,
    pub rhs: EstimateTerm,
    pub lhs: f64,
    pub ratio: f64,
}

impl EstimateReport {
    fn new(family: EstimateFamily, terms: Vec<EstimateTerm>, rhs: EstimateTerm) -> Result<Self> {
        let lhs: f64 = terms.iter().map(|t| t.value).sum();
        let ratio = if rhs.value > 0.0 {
            lhs / rhs.value
        } else if lhs == 0.0 {
            0.0
        } else {
            return Err(Error::Numerical(format!(
                "{}: left side {lhs:.3e} with vanishing forcing",
                family.label()
            )));
        };
        Ok(Self {
            family,
            terms,
            rhs,
            lhs,
            ratio,
        })
    }

    pub fn term(&self, name: &str) -> Option<&EstimateTerm> {
        self.terms.iter().find(|t| t.name == name)
    }
}

/// Evaluates one estimate family on a solution and its forcing.
pub fn estimate_report(
    family: EstimateFamily,
    solution: &TPSolution,
    forcing: &FieldSeries,
    params: &FlowParams,
) -> Result<EstimateReport> {
    match family {
        EstimateFamily::Resolvent { k } => resolvent_report(k, solution, forcing, params),
        EstimateFamily::Wiener => wiener_report(solution, forcing, params),
        EstimateFamily::SpaceTime => space_time_report(solution, forcing, params),
    }
}

/// Exact solution and forcing for one family, built from a seeded
/// divergence-free profile of Gaussian width `sigma`.
///
/// The resolvent family uses a single mode `k`, the Wiener family a real
/// first harmonic, both with the rotating operator. The space-time family
/// uses modes `|k| ≤ 2` with the non-rotating operator. Pressure vanishes.
pub fn manufactured_case(
    family: EstimateFamily,
    grid: BoxGrid,
    k_max: usize,
    sigma: f64,
    params: &FlowParams,
    seed: u64,
) -> Result<(TPSolution, FieldSeries)> {
    let zero = Field::zeros(grid, 3);
    let (lambda, omega) = (params.lambda, params.omega);
    // built on the active modes only, then padded with zeros
    let velocity = match family {
        EstimateFamily::Resolvent { k } => {
            let v = corpus::rotating_manufactured_velocity_with_width(grid, sigma, seed);
            TorusSeries::from_modes(k.unsigned_abs() as usize, &zero, vec![(k, v)])?
        }
        EstimateFamily::Wiener => corpus::rotating_manufactured_series_with_width(grid, sigma, 1, seed),
        EstimateFamily::SpaceTime => corpus::manufactured_series_with_width(grid, sigma, 2, 2, true, seed),
    };
    let forcing = match family {
        EstimateFamily::SpaceTime => velocity.try_map(|k, v| {
            let mut r = v.scaled(Complex64::new(0.0, omega * k as f64));
            r.axpy(Complex64::new(-1.0, 0.0), &v.laplacian())?;
            r.axpy(Complex64::new(-lambda, 0.0), &v.partial(0))?;
            Ok(r)
        })?,
        _ => apply_rotating_operator(&velocity, lambda, omega, &SupportGuard::default())?,
    };
    let mut max_divergence = 0.0f64;
    for v in velocity.coeffs() {
        max_divergence = max_divergence.max(v.divergence()?.max_abs());
    }
    let k_out = k_max.max(velocity.k_max());
    let solution = TPSolution {
        velocity: velocity.truncate(k_out),
        pressure_gradient: TorusSeries::zeros(k_out, &zero),
        max_divergence,
    };
    let forcing = forcing.truncate(k_out);
    Ok((solution, forcing))
}

/// Unweighted spatial norms of the rotating-family terms for one mode, in
/// the order of [`ROTATING_TERMS`].
fn rotating_mode_norms(k: i64, v: &Field, grad_p: &Field, p: &FlowParams) -> [f64; 6] {
    if v.max_abs() == 0.0 && grad_p.max_abs() == 0.0 {
        return [0.0; 6];
    }
    let q = p.q;
    [
        rotating_derivative_unchecked(k, v).lq_norm(q),
        v.hessian().lq_norm(q),
        v.partial(0).lq_norm(q),
        v.lq_norm(p.s1()),
        v.gradient().lq_norm(p.s2()),
        grad_p.lq_norm(q),
    ]
}

const ROTATING_TERMS: [&str; 6] = [
    "rotating_derivative",
    "hessian",
    "translation",
    "velocity",
    "gradient",
    "pressure",
];

fn rotating_terms(norms: [f64; 6], time: TimeNorm, p: &FlowParams) -> Vec<EstimateTerm> {
    let weights = [p.omega, 1.0, p.lambda, p.lambda.sqrt(), p.lambda.powf(0.25), 1.0];
    let spaces = [p.q, p.q, p.q, p.s1(), p.s2(), p.q];
    (0..6)
        .map(|i| EstimateTerm {
            name: ROTATING_TERMS[i],
            value: weights[i] * norms[i],
            time,
            space: spaces[i],
        })
        .collect()
}

fn mode_of<'a>(s: &'a FieldSeries, k: i64, what: &str) -> Result<&'a Field> {
    s.coeff(k)
        .ok_or_else(|| Error::Structural(format!("{what} has no mode {k}")))
}

fn resolvent_report(k: i64, sol: &TPSolution, f: &FieldSeries, p: &FlowParams) -> Result<EstimateReport> {
    let v = mode_of(&sol.velocity, k, "velocity")?;
    let gp = mode_of(&sol.pressure_gradient, k, "pressure gradient")?;
    let fk = mode_of(f, k, "forcing")?;
    SupportGuard::default().check(v, "resolvent estimate")?;
    let terms = rotating_terms(rotating_mode_norms(k, v, gp, p), TimeNorm::Mode, p);
    let rhs = EstimateTerm {
        name: "forcing",
        value: fk.lq_norm(p.q),
        time: TimeNorm::Mode,
        space: p.q,
    };
    EstimateReport::new(EstimateFamily::Resolvent { k }, terms, rhs)
}

fn wiener_report(sol: &TPSolution, f: &FieldSeries, p: &FlowParams) -> Result<EstimateReport> {
    SupportGuard::default().check_all(sol.velocity.coeffs(), "Wiener estimate")?;
    let zero = sol.velocity.coeffs()[0].scaled(Complex64::new(0.0, 0.0));
    let mut sums = [0.0; 6];
    for (k, v) in sol.velocity.iter() {
        let gp = sol.pressure_gradient.coeff(k).unwrap_or(&zero);
        for (s, n) in sums.iter_mut().zip(rotating_mode_norms(k, v, gp, p)) {
            *s += n;
        }
    }
    let terms = rotating_terms(sums, TimeNorm::Wiener, p);
    let rhs = EstimateTerm {
        name: "forcing",
        value: f.a_norm(p.q)?,
        time: TimeNorm::Wiener,
        space: p.q,
    };
    EstimateReport::new(EstimateFamily::Wiener, terms, rhs)
}

fn space_time_report(sol: &TPSolution, f: &FieldSeries, p: &FlowParams) -> Result<EstimateReport> {
    let u = &sol.velocity;
    let band = time_bandwidth(u)
        .max(time_bandwidth(f))
        .max(time_bandwidth(&sol.pressure_gradient));
    let nt = default_time_samples(band);
    let q = p.q;
    let st = TimeNorm::Lebesgue(q);
    let qq = [(q, q)];
    let one = |s: &FieldSeries, op: &dyn Fn(i64, &Field) -> Field, e: (f64, f64)| -> Result<f64> {
        Ok(mixed_norms_mapped(s, op, &[e], nt)?[0])
    };
    let dt = one(u, &|k, v| v.scaled(Complex64::new(0.0, k as f64)), qq[0])?;
    let hess = one(u, &|_, v| v.hessian(), qq[0])?;
    let d1 = one(u, &|_, v| v.partial(0), qq[0])?;
    let vel = one(u, &|_, v| v.clone(), (p.s2(), p.s1()))?;
    let grad = one(u, &|_, v| v.gradient(), (p.s3(), p.s2()))?;
    let pres = one(&sol.pressure_gradient, &|_, v| v.clone(), qq[0])?;
    let force = one(f, &|_, v| v.clone(), qq[0])?;
    let term = |name, value, time, space| EstimateTerm {
        name,
        value,
        time,
        space,
    };
    let terms = vec![
        term("time_derivative", p.omega * dt, st, q),
        term("hessian", hess, st, q),
        term("translation", p.lambda * d1, st, q),
        term("velocity", p.lambda.sqrt() * vel, TimeNorm::Lebesgue(p.s2()), p.s1()),
        term(
            "gradient",
            p.lambda.powf(0.25) * grad,
            TimeNorm::Lebesgue(p.s3()),
            p.s2(),
        ),
        term("pressure", pres, st, q),
    ];
    EstimateReport::new(EstimateFamily::SpaceTime, terms, term("forcing", force, st, q))
}

/// CSV with columns `term_name,value,exponent_pair,ratio`; per-term ratios
/// are relative to the right-hand side, and a `lhs` row carries the total.
pub fn write_estimate_csv<W: Write>(w: &mut W, reports: &[EstimateReport]) -> Result<()> {
    writeln!(w, "term_name,value,exponent_pair,ratio")?;
    for r in reports {
        let fam = r.family.label();
        let rel = |v: f64| if r.rhs.value > 0.0 { v / r.rhs.value } else { 0.0 };
        for t in &r.terms {
            writeln!(
                w,
                "{fam}:{},{:.12e},{},{:.12e}",
                t.name,
                t.value,
                t.exponent_pair(),
                rel(t.value)
            )?;
        }
        writeln!(w, "{fam}:lhs,{:.12e},,{:.12e}", r.lhs, r.ratio)?;
        writeln!(w, "{fam}:forcing,{:.12e},{},1", r.rhs.value, r.rhs.exponent_pair())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::spectral_field::BoxGrid;
    use crate::wiener_algebra::TorusSeries;

    fn params() -> FlowParams {
        FlowParams::new(0.2, 0.5, 1.0, 10.0, 1.25).unwrap()
    }

    fn zero_solution(g: BoxGrid, k_max: usize) -> (TPSolution, FieldSeries) {
        let z = TorusSeries::zeros(k_max, &Field::zeros(g, 3));
        (
            TPSolution {
                velocity: z.clone(),
                pressure_gradient: z.clone(),
                max_divergence: 0.0,
            },
            z,
        )
    }

    #[test]
    fn zero_data_gives_zero_ratio() {
        let g = BoxGrid::new(16, 8.0).unwrap();
        let (sol, f) = zero_solution(g, 2);
        for fam in [
            EstimateFamily::Resolvent { k: 1 },
            EstimateFamily::Wiener,
            EstimateFamily::SpaceTime,
        ] {
            let r = estimate_report(fam, &sol, &f, &params()).unwrap();
            assert_eq!(r.ratio, 0.0);
            assert!(r.terms.iter().all(|t| t.value == 0.0));
        }
    }

    #[test]
    fn single_mode_terms_match_pointwise_quadrature() {
        // u = e^{it} a g(x), every term has a closed-form integrand
        let g = BoxGrid::new(32, 16.0).unwrap();
        let s = 1.1;
        let a = [
            Complex64::new(1.0, 0.5),
            Complex64::new(-0.3, 0.0),
            Complex64::new(0.2, -0.7),
        ];
        let gauss = |x: [f64; 3]| corpus::gaussian(x, [0.0; 3], s);
        let v = Field::vector_from_fn(g, |x| {
            let w = gauss(x);
            [a[0] * w, a[1] * w, a[2] * w]
        });
        let z = Field::zeros(g, 3);
        let u = TorusSeries::from_modes(1, &z, vec![(1, v)]).unwrap();
        let sol = TPSolution {
            velocity: u.clone(),
            pressure_gradient: TorusSeries::zeros(1, &z),
            max_divergence: 0.0,
        };
        let p = params();
        let amag = a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let h3 = g.cell_volume();
        let quad = |q: f64, f: &dyn Fn([f64; 3]) -> f64| -> f64 {
            let sum: f64 = (0..g.len()).map(|i| f(g.position(i)).powf(q)).sum();
            (sum * h3).powf(1.0 / q)
        };
        // |∂₁ g| = |x₁|/σ² g, |∇²g|_F² = g²(Σ_ij (x_i x_j/σ⁴ − δ_ij/σ²)²)
        let d1 = quad(p.q, &|x| amag * x[0].abs() / (s * s) * gauss(x));
        let hess = quad(p.q, &|x| {
            let mut f2 = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    let d = if i == j { 1.0 / (s * s) } else { 0.0 };
                    f2 += (x[i] * x[j] / s.powi(4) - d).powi(2);
                }
            }
            amag * f2.sqrt() * gauss(x)
        });
        let vel = quad(p.s1(), &|x| amag * gauss(x));
        let r = estimate_report(EstimateFamily::Resolvent { k: 1 }, &sol, &u, &p).unwrap();
        for (name, expected) in [
            ("translation", p.lambda * d1),
            ("hessian", hess),
            ("velocity", p.lambda.sqrt() * vel),
        ] {
            let got = r.term(name).unwrap().value;
            assert!((got - expected).abs() < 1e-8 * expected, "{name}: {got} vs {expected}");
        }
        // a single mode has |u(t, x)| independent of t
        let st = estimate_report(EstimateFamily::SpaceTime, &sol, &u, &p).unwrap();
        let got = st.term("hessian").unwrap().value;
        assert!((got - hess).abs() < 1e-8 * hess);
        let w = estimate_report(EstimateFamily::Wiener, &sol, &u, &p).unwrap();
        assert!((w.term("hessian").unwrap().value - hess).abs() < 1e-8 * hess);
    }

    #[test]
    fn csv_has_a_row_per_term() {
        let g = BoxGrid::new(16, 8.0).unwrap();
        let (sol, f) = zero_solution(g, 1);
        let r = estimate_report(EstimateFamily::Wiener, &sol, &f, &params()).unwrap();
        let mut buf = Vec::new();
        write_estimate_csv(&mut buf, &[r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 6 + 2);
        assert!(text.starts_with("term_name,value,exponent_pair,ratio"));
    }
}
