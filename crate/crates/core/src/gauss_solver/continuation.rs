//! Continuation of the F-stable branch along `t ↦ t·Q₀`.
//!
//! Natural-parameter steps are used while the stability eigenvalue is
//! comfortably positive. Near the fold the branch turns back in `t`, so the
//! stepper switches to pseudo-arclength on `(u, t)` with the tangent norm
//! `‖(δu, δt)‖² = Σ Mᵢ δuᵢ² / Area + δt²`. The fold itself is located where
//! `λ_min` changes sign, by a safeguarded secant on the arclength parameter.

use crate::error::{Error, Result};
use crate::sparse::LuSolver;
use crate::surface::{Background, ScalarField};

use super::{
    embedding_check, f_stability, solve_with, EmbeddingReport, GaussProblem, GaussSolution, SolverOptions,
    StabilityRecord,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayOptions {
    pub t_max: f64,
    pub step: f64,
    pub solver: SolverOptions,
    /// Below this `λ_min` the stepper switches to pseudo-arclength.
    pub arclength_threshold: f64,
    /// Non-F-stable samples recorded past the fold.
    pub post_fold_samples: usize,
    /// Stop refining the fold once `|λ_min|` is below this.
    pub fold_tol: f64,
}

impl RayOptions {
    pub fn new(t_max: f64, step: f64) -> Self {
        Self {
            t_max,
            step,
            solver: SolverOptions::default(),
            arclength_threshold: 0.05,
            post_fold_samples: 3,
            fold_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RaySample {
    pub t: f64,
    pub solution: GaussSolution,
    pub stability: StabilityRecord,
    pub embedding: EmbeddingReport,
    pub area_gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RayStatus {
    /// Reached `t_max` on the F-stable branch.
    Completed,
    FoldDetected,
    /// A step failed before `t_max` without a stability crossing.
    Diverged,
}

impl RayStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RayStatus::Completed => "completed",
            RayStatus::FoldDetected => "fold_detected",
            RayStatus::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RayContinuation {
    pub samples: Vec<RaySample>,
    /// Estimate of the end `T₁` of the F-stable branch.
    pub fold_t: Option<f64>,
    /// Index of the fold sample in `samples`.
    pub fold_index: Option<usize>,
    /// `√(4/27)·(max ‖Q₀‖_μ)⁻¹`.
    pub t0: f64,
    /// First `t` past the fold where Newton fails from the fold solution.
    pub t2: Option<f64>,
    pub status: RayStatus,
    /// Largest `u(t₂) − u(t₁)` over consecutive F-stable samples with `t₂ > t₁`.
    pub monotonicity_excess: f64,
}

impl RayContinuation {
    /// Samples on the F-stable segment, in order of increasing `t`.
    pub fn stable_samples(&self) -> &[RaySample] {
        let end = self.fold_index.unwrap_or(self.samples.len());
        let n = self.samples[..end]
            .iter()
            .take_while(|s| s.stability.is_f_stable)
            .count();
        &self.samples[..n]
    }

    pub fn is_monotone(&self) -> bool {
        self.monotonicity_excess <= super::MAX_PRINCIPLE_SLACK
    }

    /// CSV with columns `t, min_u, max_u, lambda_min, max_Qsq_gamma, area_gamma, newton_iters`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,min_u,max_u,lambda_min,max_Qsq_gamma,area_gamma,newton_iters\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}\n",
                s.t,
                s.solution.u.min(),
                s.solution.u.max(),
                s.stability.lambda_min,
                s.embedding.max_qsq_gamma,
                s.area_gamma,
                s.solution.newton_iters
            ));
        }
        out
    }
}

/// Continues from `t = 0`, `u ≡ 0` up to `t_max` with the given step.
pub fn continue_ray(background: &Background, qsq: &ScalarField, t_max: f64, step: f64) -> Result<RayContinuation> {
    continue_ray_with(background, qsq, &RayOptions::new(t_max, step))
}

/// A point `(u, t)` on the branch with its diagnostics.
fn sample(problem: &GaussProblem, solution: GaussSolution) -> Result<RaySample> {
    let stability = f_stability(&solution, problem)?;
    let embedding = embedding_check(&solution, problem)?;
    let area_gamma = solution.area_gamma(problem.background())?;
    Ok(RaySample {
        t: problem.t(),
        solution,
        stability,
        embedding,
        area_gamma,
    })
}

struct Stepper<'a, 'b> {
    base: &'b GaussProblem<'a>,
    weights: Vec<f64>,
    options: RayOptions,
}

/// Unit tangent `(du, dt)` in the weighted norm.
#[derive(Clone)]
struct Tangent {
    du: Vec<f64>,
    dt: f64,
}

impl<'a, 'b> Stepper<'a, 'b> {
    fn n(&self) -> usize {
        self.weights.len()
    }

    fn norm(&self, du: &[f64], dt: f64) -> f64 {
        (du.iter().zip(&self.weights).map(|(x, w)| w * x * x).sum::<f64>() + dt * dt).sqrt()
    }

    /// Entries of the bordered matrix `[[J_u, J_t], [wᵀ, c]]` where `J` is the
    /// Jacobian of the pointwise residual.
    fn bordered(&self, problem: &GaussProblem, u: &[f64], border: (&[f64], f64)) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mass = problem.mass();
        let mut entries: Vec<_> = problem
            .operator_entries(u, 0.0)
            .into_iter()
            .map(|(i, j, v)| (i, j, -v / mass[i]))
            .collect();
        for (i, d) in problem.residual_t_derivative(u).into_iter().enumerate() {
            entries.push((i, n, d));
        }
        for (j, &w) in border.0.iter().enumerate() {
            entries.push((n, j, w));
        }
        entries.push((n, n, border.1));
        entries
    }

    /// Tangent at a solution `(u, t)`, oriented along `prev` (or towards
    /// increasing `t` when there is none).
    fn tangent(&self, u: &[f64], t: f64, prev: Option<&Tangent>) -> Result<Tangent> {
        let problem = self.base.at(t)?;
        let n = self.n();
        let (mut du, mut dt) = match prev {
            Some(p) => {
                let border: Vec<f64> = p.du.iter().zip(&self.weights).map(|(x, w)| x * w).collect();
                let lu = LuSolver::factor(n + 1, &self.bordered(&problem, u, (&border, p.dt)))?;
                let mut rhs = vec![0.0; n + 1];
                rhs[n] = 1.0;
                let mut z = lu.solve(&rhs)?;
                let dt = z.pop().unwrap();
                (z, dt)
            }
            None => {
                // J_u du = −J_t with dt = 1
                let lu = LuSolver::factor(n, &problem.operator_entries(u, 0.0))?;
                let rhs: Vec<f64> = problem
                    .residual_t_derivative(u)
                    .iter()
                    .zip(problem.mass())
                    .map(|(d, m)| d * m)
                    .collect();
                (lu.solve(&rhs)?, 1.0)
            }
        };
        let norm = self.norm(&du, dt);
        let mut sign = 1.0 / norm;
        if let Some(p) = prev {
            let proj: f64 = du
                .iter()
                .zip(&p.du)
                .zip(&self.weights)
                .map(|((a, b), w)| a * b * w)
                .sum::<f64>()
                + dt * p.dt;
            if proj < 0.0 {
                sign = -sign;
            }
        }
        du.iter_mut().for_each(|x| *x *= sign);
        dt *= sign;
        Ok(Tangent { du, dt })
    }

    /// Newton corrector on `{R(u, t) = 0, ⟨τ, (u, t) − (u₀, t₀)⟩_W = s}`.
    fn correct(&self, u0: &[f64], t0: f64, tangent: &Tangent, s: f64) -> Result<(Vec<f64>, f64, usize)> {
        let n = self.n();
        let mut u: Vec<f64> = u0.iter().zip(&tangent.du).map(|(a, d)| a + s * d).collect();
        let mut t = t0 + s * tangent.dt;
        let border: Vec<f64> = tangent.du.iter().zip(&self.weights).map(|(x, w)| x * w).collect();
        let constraint = |u: &[f64], t: f64| -> f64 {
            u.iter()
                .zip(u0)
                .zip(&border)
                .map(|((a, b), w)| (a - b) * w)
                .sum::<f64>()
                + (t - t0) * tangent.dt
                - s
        };
        let tol = self.options.solver.tol;
        for iter in 0..self.options.solver.max_iters {
            if !(t >= 0.0) {
                return Err(Error::Numerical("arclength corrector left t ≥ 0".into()));
            }
            let problem = self.base.at(t)?;
            let r = problem.residual_values(&u);
            let c = constraint(&u, t);
            let rn = super::max_abs(&r);
            if !rn.is_finite() {
                return Err(Error::Numerical("non-finite residual in arclength corrector".into()));
            }
            if rn <= tol && c.abs() <= tol {
                return Ok((u, t, iter));
            }
            let lu = LuSolver::factor(n + 1, &self.bordered(&problem, &u, (&border, tangent.dt)))?;
            let mut rhs: Vec<f64> = r.iter().map(|x| -x).collect();
            rhs.push(-c);
            let delta = lu.solve(&rhs)?;
            u.iter_mut().zip(&delta).for_each(|(a, d)| *a += d);
            t += delta[n];
        }
        let problem = self.base.at(t.max(0.0))?;
        Err(Error::NoConvergence {
            iterations: self.options.solver.max_iters,
            residual: super::max_abs(&problem.residual_values(&u)),
        })
    }

    fn sample_at(&self, u: Vec<f64>, t: f64, iters: usize) -> Result<RaySample> {
        let problem = self.base.at(t)?;
        let residual_norm = super::max_abs(&problem.residual_values(&u));
        let solution = GaussSolution {
            u: problem.qsq().with_values(u),
            residual_norm,
            newton_iters: iters,
        };
        sample(&problem, solution)
    }
}

pub fn continue_ray_with(background: &Background, qsq: &ScalarField, options: &RayOptions) -> Result<RayContinuation> {
    if !(options.step > 0.0) || !options.step.is_finite() {
        return Err(Error::InvalidInput("ray step must be positive".into()));
    }
    if !(options.t_max >= 0.0) || !options.t_max.is_finite() {
        return Err(Error::InvalidInput("t_max must be ≥ 0".into()));
    }
    let base = GaussProblem::new(background, qsq.clone(), 0.0)?;
    let mesh = &background.mesh;
    let area = mesh.total_area();
    let stepper = Stepper {
        base: &base,
        weights: mesh.vertex_areas().iter().map(|m| m / area).collect(),
        options: *options,
    };
    let t0 = embedding_check(
        &GaussSolution {
            u: mesh.constant_field(0.0)?,
            residual_norm: 0.0,
            newton_iters: 0,
        },
        &base,
    )?
    .t0;

    let mut samples = Vec::new();
    let start = solve_with(&base, &mesh.constant_field(0.0)?, &options.solver)?;
    samples.push(sample(&base, start)?);

    let mut status = RayStatus::Completed;
    let mut fold: Option<(f64, usize)> = None;

    // natural-parameter stage
    let mut arclength = false;
    loop {
        let last = samples.last().unwrap();
        if last.t >= options.t_max {
            break;
        }
        if last.stability.lambda_min < options.arclength_threshold {
            arclength = true;
            break;
        }
        let t = (last.t + options.step).min(options.t_max);
        let problem = base.at(t)?;
        match solve_with(&problem, &last.solution.u, &options.solver) {
            Ok(sol) => {
                let s = sample(&problem, sol)?;
                if s.stability.lambda_min <= 0.0 {
                    // crossed the fold in a single natural step; redo with arclength
                    arclength = true;
                    break;
                }
                samples.push(s);
            }
            Err(Error::NoConvergence { .. }) | Err(Error::Numerical(_)) => {
                arclength = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }

    if arclength {
        let last = samples.last().unwrap();
        let mut u = last.solution.u.values().to_vec();
        let mut t = last.t;
        let mut lambda = last.stability.lambda_min;
        let mut tangent = stepper.tangent(&u, t, None)?;
        let max_ds = options.step;
        let min_ds = options.step * 1e-4;
        let mut ds = options.step;
        let mut after_fold = 0usize;
        loop {
            if fold.is_some() && after_fold >= options.post_fold_samples {
                status = RayStatus::FoldDetected;
                break;
            }
            match stepper.correct(&u, t, &tangent, ds) {
                Ok((un, tn, iters)) => {
                    if fold.is_none() && tangent.dt > 0.0 && tn >= options.t_max {
                        // the branch reached t_max before folding
                        let problem = base.at(options.t_max)?;
                        if let Ok(sol) = solve_with(&problem, &samples.last().unwrap().solution.u, &options.solver) {
                            let s = sample(&problem, sol)?;
                            if s.stability.lambda_min > 0.0 {
                                samples.push(s);
                                status = RayStatus::Completed;
                                break;
                            }
                        }
                    }
                    let s = stepper.sample_at(un.clone(), tn, iters)?;
                    let lambda_new = s.stability.lambda_min;
                    if fold.is_none() && lambda > 0.0 && lambda_new <= 0.0 {
                        let f = refine_fold(&stepper, &u, t, &tangent, (0.0, lambda), (ds, lambda_new))?;
                        samples.push(f);
                        fold = Some((samples.last().unwrap().t, samples.len() - 1));
                    }
                    if fold.is_some() {
                        after_fold += 1;
                    }
                    samples.push(s);
                    tangent = stepper.tangent(&un, tn, Some(&tangent))?;
                    u = un;
                    t = tn;
                    lambda = lambda_new;
                    if iters <= 4 {
                        ds = (ds * 1.5).min(max_ds);
                    }
                    if t <= 0.0 {
                        status = if fold.is_some() { RayStatus::FoldDetected } else { RayStatus::Diverged };
                        break;
                    }
                }
                Err(Error::NoConvergence { .. }) | Err(Error::Numerical(_)) => {
                    ds *= 0.5;
                    if ds < min_ds {
                        status = if fold.is_some() { RayStatus::FoldDetected } else { RayStatus::Diverged };
                        break;
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }

    // T₂: first natural-parameter failure beyond the fold
    let mut t2 = None;
    if let Some((fold_t, idx)) = fold {
        let guess = samples[idx].solution.u.clone();
        let mut k = 1;
        loop {
            let t = fold_t + k as f64 * options.step;
            if t > options.t_max + 0.5 * options.step {
                break;
            }
            match solve_with(&base.at(t)?, &guess, &options.solver) {
                Ok(_) => k += 1,
                Err(Error::NoConvergence { .. }) | Err(Error::Numerical(_)) => {
                    t2 = Some(t);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
    }

    let mut result = RayContinuation {
        samples,
        fold_t: fold.map(|f| f.0),
        fold_index: fold.map(|f| f.1),
        t0,
        t2,
        status,
        monotonicity_excess: f64::NEG_INFINITY,
    };
    result.monotonicity_excess = monotonicity_excess(result.stable_samples());
    Ok(result)
}

/// `max (u(t_{k+1}) − u(t_k))` over consecutive samples with increasing `t`.
fn monotonicity_excess(samples: &[RaySample]) -> f64 {
    samples
        .windows(2)
        .filter(|w| w[1].t > w[0].t)
        .flat_map(|w| {
            w[1].solution
                .u
                .values()
                .iter()
                .zip(w[0].solution.u.values())
                .map(|(b, a)| b - a)
                .collect::<Vec<_>>()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Illinois false position for `λ_min(s) = 0` along the arclength chord from
/// `(u, t)` in direction `tangent`.
fn refine_fold(
    stepper: &Stepper,
    u: &[f64],
    t: f64,
    tangent: &Tangent,
    mut lo: (f64, f64),
    mut hi: (f64, f64),
) -> Result<RaySample> {
    let mut best: Option<RaySample> = None;
    let mut side = 0i8;
    for _ in 0..60 {
        let s = (lo.0 * hi.1 - hi.0 * lo.1) / (hi.1 - lo.1);
        let (un, tn, iters) = stepper.correct(u, t, tangent, s)?;
        let sample = stepper.sample_at(un, tn, iters)?;
        let lam = sample.stability.lambda_min;
        let done = lam.abs() <= stepper.options.fold_tol || (hi.0 - lo.0).abs() <= 1e-14;
        best = Some(sample);
        if done {
            break;
        }
        if lam > 0.0 {
            lo = (s, lam);
            if side == 1 {
                hi.1 *= 0.5;
            }
            side = 1;
        } else {
            hi = (s, lam);
            if side == -1 {
                lo.1 *= 0.5;
            }
            side = -1;
        }
    }
    best.ok_or_else(|| Error::Numerical("fold refinement made no progress".into()))
}
