//! Gauss equation for equivariant minimal Lagrangian surfaces.
//!
//! With `γ = e^u μ` the conformal factor of the induced metric against the
//! hyperbolic background, the family along a ray `t·Q₀` reads
//!
//! ```text
//! H(u, t) = Δ_μ u − 2t²‖Q₀‖²_μ e^{−2u} − 2e^u + 2 = 0.
//! ```
//!
//! Only the pointwise norm `‖Q₀‖²_μ` enters, so the data here is an arbitrary
//! non-negative field `qsq`. Holomorphicity of `Q₀` is **not** enforced. In
//! particular constant `qsq` is allowed: no holomorphic cubic differential has
//! constant norm, but constant data turns the equation into the scalar cubic
//! `v³ − v² + t²q² = 0` (with `v = e^u`), which the discrete operators solve
//! exactly and which therefore gives exact oracles for everything below.

pub mod continuation;

use crate::error::{Error, Result};
use crate::sparse::{dot, CsrMatrix, LuSolver};
use crate::surface::{integrate, Background, ScalarField};

pub use continuation::{continue_ray, continue_ray_with, RayContinuation, RayOptions, RaySample, RayStatus};

/// `√(4/27)`, the fold of the constant branch at `t·q = 1`.
pub fn fold_constant() -> f64 {
    (4.0f64 / 27.0).sqrt()
}

/// Converged solutions must satisfy `max u ≤` this.
pub const MAX_PRINCIPLE_SLACK: f64 = 1e-8;

/// Bound on `‖𝒬‖²_γ` below which the embedding is almost ℝ-Fuchsian.
pub const EMBEDDING_BOUND: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct GaussProblem<'a> {
    background: &'a Background,
    qsq: ScalarField,
    t: f64,
}

impl<'a> GaussProblem<'a> {
    pub fn new(background: &'a Background, qsq: ScalarField, t: f64) -> Result<Self> {
        background.mesh.check_field(&qsq)?;
        if qsq.values().iter().any(|&q| !(q >= 0.0)) {
            return Err(Error::InvalidInput("qsq must be ≥ 0".into()));
        }
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidInput(format!("t must be ≥ 0, got {t}")));
        }
        Ok(Self { background, qsq, t })
    }

    pub fn background(&self) -> &'a Background {
        self.background
    }

    pub fn qsq(&self) -> &ScalarField {
        &self.qsq
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn at(&self, t: f64) -> Result<Self> {
        Self::new(self.background, self.qsq.clone(), t)
    }

    fn n(&self) -> usize {
        self.background.mesh.vertex_count()
    }

    fn mass(&self) -> &[f64] {
        self.background.mesh.vertex_areas()
    }

    /// Residual at raw values, no mesh check.
    fn residual_values(&self, u: &[f64]) -> Vec<f64> {
        let t2 = self.t * self.t;
        let su = self.background.stiffness.matrix.matvec(u);
        u.iter()
            .zip(su)
            .zip(self.mass())
            .zip(self.qsq.values())
            .map(|(((&ui, si), &m), &q)| -si / m - 2.0 * t2 * q * (-2.0 * ui).exp() - 2.0 * ui.exp() + 2.0)
            .collect()
    }

    /// Diagonal potential `2e^u − 4t²·qsq·e^{−2u}` of the linearised operator.
    fn potential(&self, u: &[f64]) -> Vec<f64> {
        let t2 = self.t * self.t;
        u.iter()
            .zip(self.qsq.values())
            .map(|(&ui, &q)| 2.0 * ui.exp() - 4.0 * t2 * q * (-2.0 * ui).exp())
            .collect()
    }

    /// Entries of `S + M·diag(potential + shift)`.
    fn operator_entries(&self, u: &[f64], shift: f64) -> Vec<(usize, usize, f64)> {
        let pot = self.potential(u);
        let mut entries: Vec<_> = self.background.stiffness.matrix.triplets().collect();
        for (i, (p, m)) in pot.iter().zip(self.mass()).enumerate() {
            entries.push((i, i, m * (p + shift)));
        }
        entries
    }

    /// `∂R/∂t = −4t·qsq·e^{−2u}`.
    fn residual_t_derivative(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.qsq.values())
            .map(|(&ui, &q)| -4.0 * self.t * q * (-2.0 * ui).exp())
            .collect()
    }

    fn mass_norm(&self, r: &[f64]) -> f64 {
        r.iter().zip(self.mass()).map(|(x, m)| m * x * x).sum::<f64>().sqrt()
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Pointwise `Δ_μu − 2t²·qsq·e^{−2u} − 2e^u + 2`.
pub fn residual(u: &ScalarField, problem: &GaussProblem) -> Result<ScalarField> {
    problem.background.mesh.check_field(u)?;
    Ok(u.with_values(problem.residual_values(u.values())))
}

/// Symmetric linearised operator `S + M·diag(2e^u − 4t²·qsq·e^{−2u})`. The
/// Jacobian of [`residual`] is `−M⁻¹` times this matrix.
pub fn linearized_operator(u: &ScalarField, problem: &GaussProblem) -> Result<CsrMatrix> {
    problem.background.mesh.check_field(u)?;
    Ok(CsrMatrix::from_triplets(problem.n(), problem.operator_entries(u.values(), 0.0)))
}

/// Directional derivative of [`residual`] at `u` along `v`.
pub fn jacobian_apply(u: &ScalarField, v: &ScalarField, problem: &GaussProblem) -> Result<ScalarField> {
    problem.background.mesh.check_field(v)?;
    let op = linearized_operator(u, problem)?;
    let lv = op.matvec(v.values());
    Ok(v.with_values(lv.iter().zip(problem.mass()).map(|(x, m)| -x / m).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Target max-norm of the residual.
    pub tol: f64,
    pub max_iters: usize,
    /// Step halvings allowed per Newton step before giving up.
    pub max_halvings: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iters: 60,
            max_halvings: 12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GaussSolution {
    pub u: ScalarField,
    /// Max-norm of the residual at `u`.
    pub residual_norm: f64,
    pub newton_iters: usize,
}

impl GaussSolution {
    /// `Area_γ(Σ) = ∫ e^u v_μ`.
    pub fn area_gamma(&self, background: &Background) -> Result<f64> {
        integrate(&self.u.map(f64::exp), &background.mesh)
    }
}

/// Damped Newton iteration from `initial_guess`.
pub fn solve(problem: &GaussProblem, initial_guess: &ScalarField, tol: f64) -> Result<GaussSolution> {
    solve_with(
        problem,
        initial_guess,
        &SolverOptions {
            tol,
            ..SolverOptions::default()
        },
    )
}

pub fn solve_with(
    problem: &GaussProblem,
    initial_guess: &ScalarField,
    options: &SolverOptions,
) -> Result<GaussSolution> {
    if !(options.tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    problem.background.mesh.check_field(initial_guess)?;
    let mut u = initial_guess.values().to_vec();
    let mut r = problem.residual_values(&u);
    let mut merit = problem.mass_norm(&r);
    for iter in 0..=options.max_iters {
        if !merit.is_finite() {
            return Err(Error::Numerical("non-finite residual in Newton iteration".into()));
        }
        let rn = max_abs(&r);
        if rn <= options.tol {
            return Ok(GaussSolution {
                u: initial_guess.with_values(u),
                residual_norm: rn,
                newton_iters: iter,
            });
        }
        if iter == options.max_iters {
            break;
        }
        // −M⁻¹L δ = −R  ⇔  L δ = M R
        let lu = LuSolver::factor(problem.n(), &problem.operator_entries(&u, 0.0))?;
        let rhs: Vec<f64> = r.iter().zip(problem.mass()).map(|(x, m)| x * m).collect();
        let delta = lu.solve(&rhs)?;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=options.max_halvings {
            let cand: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
            let rc = problem.residual_values(&cand);
            let mc = problem.mass_norm(&rc);
            if mc < merit {
                accepted = Some((cand, rc, mc));
                break;
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((cand, rc, mc)) => {
                u = cand;
                r = rc;
                merit = mc;
            }
            None => {
                return Err(Error::NoConvergence {
                    iterations: iter + 1,
                    residual: rn,
                })
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: options.max_iters,
        residual: max_abs(&r),
    })
}

#[derive(Debug, Clone)]
pub struct StabilityRecord {
    pub lambda_min: f64,
    /// Unit mass-norm eigenfunction with positive mean.
    pub eigenfunction: ScalarField,
    pub is_f_stable: bool,
    pub iterations: usize,
}

/// Eigen-solver tolerance on the residual `‖M⁻¹(Lx − λMx)‖_M`.
const EIGEN_TOL: f64 = 1e-11;
const EIGEN_MAX_ITERS: usize = 5000;

/// Smallest eigenvalue of `𝓛 = −Δ_μ + 2e^u − 4t²·qsq·e^{−2u}`, i.e. the
/// generalised pair `(S + M·diag(2e^u − 4t²·qsq·e^{−2u}), M)`, by shifted
/// inverse iteration. The shift sits below the potential's minimum, which
/// bounds the spectrum from below because `S` is positive semidefinite.
pub fn f_stability(sol: &GaussSolution, problem: &GaussProblem) -> Result<StabilityRecord> {
    problem.background.mesh.check_field(&sol.u)?;
    let u = sol.u.values();
    let n = problem.n();
    let mass = problem.mass();
    let pot = problem.potential(u);
    let shift = pot.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let op = CsrMatrix::from_triplets(n, problem.operator_entries(u, 0.0));
    let shifted = LuSolver::factor(n, &problem.operator_entries(u, -shift))?;

    let normalize = |x: &mut Vec<f64>| {
        let norm = x.iter().zip(mass).map(|(v, m)| m * v * v).sum::<f64>().sqrt();
        let sign = if x.iter().zip(mass).map(|(v, m)| v * m).sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        x.iter_mut().for_each(|v| *v *= sign / norm);
    };
    let mut x = vec![1.0; n];
    normalize(&mut x);
    let mut lambda = f64::NAN;
    for it in 0..EIGEN_MAX_ITERS {
        let lx = op.matvec(&x);
        lambda = dot(&x, &lx);
        let res = lx
            .iter()
            .zip(&x)
            .zip(mass)
            .map(|((l, v), m)| {
                let r = l - lambda * m * v;
                r * r / m
            })
            .sum::<f64>()
            .sqrt();
        if !lambda.is_finite() {
            return Err(Error::Numerical("non-finite Rayleigh quotient".into()));
        }
        if res <= EIGEN_TOL * lambda.abs().max(1.0) {
            return Ok(StabilityRecord {
                lambda_min: lambda,
                eigenfunction: sol.u.with_values(x),
                is_f_stable: lambda > 0.0,
                iterations: it,
            });
        }
        let rhs: Vec<f64> = x.iter().zip(mass).map(|(v, m)| v * m).collect();
        x = shifted.solve(&rhs)?;
        normalize(&mut x);
    }
    Err(Error::Numerical(format!(
        "inverse iteration stagnated at λ ≈ {lambda:e}"
    )))
}

/// Rayleigh quotient `xᵀLx / xᵀMx` of the linearised operator.
pub fn rayleigh_quotient(x: &ScalarField, u: &ScalarField, problem: &GaussProblem) -> Result<f64> {
    let op = linearized_operator(u, problem)?;
    let mx: f64 = x.values().iter().zip(problem.mass()).map(|(v, m)| m * v * v).sum();
    Ok(op.quadratic_form(x.values()) / mx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingReport {
    /// `max ‖𝒬‖²_γ = max t²·qsq·e^{−3u}`.
    pub max_qsq_gamma: f64,
    pub almost_r_fuchsian: bool,
    /// `√(4/27)·(max √qsq)⁻¹`; infinite for `qsq ≡ 0`.
    pub t0: f64,
}

pub fn embedding_check(sol: &GaussSolution, problem: &GaussProblem) -> Result<EmbeddingReport> {
    problem.background.mesh.check_field(&sol.u)?;
    let t2 = problem.t * problem.t;
    let max_qsq_gamma = sol
        .u
        .values()
        .iter()
        .zip(problem.qsq.values())
        .map(|(&u, &q)| t2 * q * (-3.0 * u).exp())
        .fold(0.0, f64::max);
    let qmax = problem.qsq.max().sqrt();
    Ok(EmbeddingReport {
        max_qsq_gamma,
        almost_r_fuchsian: max_qsq_gamma < EMBEDDING_BOUND,
        t0: if qmax > 0.0 { fold_constant() / qmax } else { f64::INFINITY },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaReport {
    /// `∫ e^u v_μ`.
    pub area_gamma: f64,
    /// `∫ ‖𝒬‖²_γ v_γ = ∫ t²·qsq·e^{−2u} v_μ`.
    pub cubic_energy: f64,
    /// `4π(g − 1)`.
    pub expected: f64,
}

impl AreaReport {
    pub fn total(&self) -> f64 {
        self.area_gamma + self.cubic_energy
    }

    pub fn relative_error(&self) -> f64 {
        (self.total() - self.expected).abs() / self.expected
    }
}

/// Both sides of the Lagrangian area equality.
pub fn area_identity(sol: &GaussSolution, problem: &GaussProblem) -> Result<AreaReport> {
    let mesh = &problem.background.mesh;
    mesh.check_field(&sol.u)?;
    let t2 = problem.t * problem.t;
    let energy = sol
        .u
        .with_values(
            sol.u
                .values()
                .iter()
                .zip(problem.qsq.values())
                .map(|(&u, &q)| t2 * q * (-2.0 * u).exp())
                .collect(),
        );
    Ok(AreaReport {
        area_gamma: sol.area_gamma(problem.background)?,
        cubic_energy: integrate(&energy, mesh)?,
        expected: mesh.expected_area(),
    })
}
