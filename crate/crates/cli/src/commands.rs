//! Dispatch of a validated [`RunConfig`] to the numerical modules.

use std::fs;
use std::path::Path;

use chsurf::gauss_solver::continuation::{continue_ray_with, RayContinuation, RayOptions, RayStatus};
use chsurf::gauss_solver::{
    area_identity, embedding_check, f_stability, solve, GaussProblem, GaussSolution,
};
use chsurf::moduli;
use chsurf::normal_flow::{self, NormalSample, SweepRow};
use chsurf::surface::{Background, ScalarField};
use chsurf::toda::{self, ChartGrid, ConnectionPair, HolonomyResult, TodaChartData};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{ChartExample, ChartSource, ConfigError, Format, Params, QField, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}", join_errors(.0))]
    Config(Vec<ConfigError>),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] chsurf::Error),
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
}

fn join_errors(errors: &[ConfigError]) -> String {
    errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n")
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
/// No solution exists at the requested parameter (Newton failure past the fold).
pub const EXIT_NONEXISTENCE: i32 = 3;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) => match e {
                chsurf::Error::NoConvergence { .. } => EXIT_NONEXISTENCE,
                chsurf::Error::InvalidInput(_) | chsurf::Error::MeshMismatch { .. } | chsurf::Error::Json(_) => {
                    EXIT_USAGE
                }
                _ => EXIT_NUMERICAL,
            },
            CliError::Write { .. } => EXIT_NUMERICAL,
        }
    }
}

/// Result of a command: the artifact, a one-line summary and the exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub artifact: String,
    pub summary: String,
    pub exit_code: i32,
}

impl Outcome {
    fn ok(artifact: String, summary: String) -> Self {
        Self {
            artifact,
            summary,
            exit_code: EXIT_OK,
        }
    }
}

pub fn execute(config: &RunConfig) -> Result<Outcome, CliError> {
    match &config.params {
        Params::Mesh { refine } => mesh(*refine),
        Params::Solve { refine, qsq, t, tol } => solve_cmd(*refine, qsq, *t, *tol, config.format),
        Params::Ray {
            refine,
            qsq,
            t_max,
            step,
            tol,
        } => ray(*refine, qsq, *t_max, *step, *tol, config.format),
        Params::TodaCheck { chart, perturb, seed } => toda_check(chart, *perturb, *seed, config.format),
        Params::Holonomy {
            chart,
            center,
            radius,
            vertices,
            steps,
            analytic,
        } => holonomy(chart, *center, *radius, *vertices, *steps, *analytic),
        Params::Expmap {
            q0,
            sweep,
            nr,
            nalpha,
            point,
        } => expmap(*q0, *sweep, *nr, *nalpha, *point, config.format),
        Params::Moduli { genus } => moduli_table(*genus, config.format),
    }
}

/// Runs the command and writes the artifact to `output` (or returns it for stdout).
pub fn run(config: &RunConfig) -> Result<Outcome, CliError> {
    let outcome = execute(config)?;
    if let Some(path) = &config.output {
        write_file(path, &outcome.artifact)?;
    }
    Ok(outcome)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn mesh(refine: usize) -> Result<Outcome, CliError> {
    let mesh = chsurf::surface::build_bolza_mesh(refine)?;
    let doc: Value = serde_json::to_value(mesh.to_document()).map_err(chsurf::Error::from)?;
    let summary = format!(
        "Bolza mesh level {refine}: {} vertices, {} triangles, χ = {}, area {:.6} (4π(g−1) = {:.6})",
        mesh.vertex_count(),
        mesh.triangles().len(),
        mesh.euler_characteristic(),
        mesh.total_area(),
        mesh.expected_area()
    );
    Ok(Outcome::ok(pretty(&doc), summary))
}

fn qsq_field(bg: &Background, spec: &QField) -> Result<ScalarField, CliError> {
    match spec {
        QField::Constant(v) => Ok(bg.mesh.constant_field(*v)?),
        QField::File(path) => {
            let values: Vec<f64> = serde_json::from_str(&read_file(path)?)
                .map_err(|e| CliError::Usage(format!("{}: expected a JSON array of numbers ({e})", path.display())))?;
            if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
                return Err(CliError::Usage(format!("{}: qsq must be ≥ 0 (found {v})", path.display())));
            }
            Ok(bg.mesh.field(values)?)
        }
    }
}

fn fmt_time(t: f64) -> String {
    if t.is_finite() {
        format!("{t:.4}")
    } else {
        "∞".into()
    }
}

/// Largest step used when walking from `t = 0` to the requested `t`.
const SOLVE_STEP: f64 = 0.02;
/// Step halvings tried before a failed continuation step is taken as nonexistence.
const SOLVE_HALVINGS: usize = 8;

/// Natural continuation from `u ≡ 0` at `t = 0` to `t`.
fn solve_to<'a>(
    bg: &'a Background,
    qsq: &ScalarField,
    t: f64,
    tol: f64,
) -> Result<(GaussProblem<'a>, GaussSolution), CliError> {
    let mut problem = GaussProblem::new(bg, qsq.clone(), 0.0)?;
    let mut sol = solve(&problem, &bg.mesh.constant_field(0.0)?, tol)?;
    let mut step = SOLVE_STEP;
    let mut halvings = 0;
    while problem.t() < t {
        let next_t = (problem.t() + step).min(t);
        let next = problem.at(next_t)?;
        match solve(&next, &sol.u, tol) {
            Ok(s) => {
                sol = s;
                problem = next;
            }
            Err(chsurf::Error::NoConvergence { .. }) if halvings < SOLVE_HALVINGS => {
                step *= 0.5;
                halvings += 1;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok((problem, sol))
}

fn solve_cmd(refine: usize, qsq: &QField, t: f64, tol: f64, format: Format) -> Result<Outcome, CliError> {
    let bg = Background::bolza(refine)?;
    let qsq = qsq_field(&bg, qsq)?;
    let (problem, sol) = solve_to(&bg, &qsq, t, tol)?;
    let stability = f_stability(&sol, &problem)?;
    let embedding = embedding_check(&sol, &problem)?;
    let area = area_identity(&sol, &problem)?;
    let summary = format!(
        "t = {t}: λ_min = {:.6e} ({}), max ‖𝒬‖²_γ = {:.4} ({}), T0 = {}, area identity error {:.2e}",
        stability.lambda_min,
        if stability.is_f_stable { "F-stable" } else { "not F-stable" },
        embedding.max_qsq_gamma,
        if embedding.almost_r_fuchsian { "almost ℝ-Fuchsian" } else { "not almost ℝ-Fuchsian" },
        fmt_time(embedding.t0),
        area.relative_error()
    );
    let artifact = match format {
        Format::Json => pretty(&json!({
            "refine": refine,
            "t": t,
            "t0": finite_or_null(embedding.t0),
            "residual_norm": sol.residual_norm,
            "newton_iters": sol.newton_iters,
            "lambda_min": stability.lambda_min,
            "is_f_stable": stability.is_f_stable,
            "max_qsq_gamma": embedding.max_qsq_gamma,
            "almost_r_fuchsian": embedding.almost_r_fuchsian,
            "area_gamma": area.area_gamma,
            "cubic_energy": area.cubic_energy,
            "expected_area": area.expected,
            "u": sol.u.values(),
        })),
        _ => {
            let mut out = String::from("vertex,u\n");
            for (k, u) in sol.u.values().iter().enumerate() {
                out.push_str(&format!("{k},{u:.12e}\n"));
            }
            out
        }
    };
    Ok(Outcome::ok(artifact, summary))
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn ray_json(ray: &RayContinuation) -> Value {
    let samples: Vec<Value> = ray
        .samples
        .iter()
        .map(|s| {
            json!({
                "t": s.t,
                "min_u": s.solution.u.min(),
                "max_u": s.solution.u.max(),
                "lambda_min": s.stability.lambda_min,
                "is_f_stable": s.stability.is_f_stable,
                "max_qsq_gamma": s.embedding.max_qsq_gamma,
                "area_gamma": s.area_gamma,
                "newton_iters": s.solution.newton_iters,
            })
        })
        .collect();
    json!({
        "status": ray.status.as_str(),
        "t0": finite_or_null(ray.t0),
        "fold_t": ray.fold_t,
        "t2": ray.t2,
        "monotonicity_excess": ray.monotonicity_excess,
        "samples": samples,
    })
}

fn ray(refine: usize, qsq: &QField, t_max: f64, step: f64, tol: f64, format: Format) -> Result<Outcome, CliError> {
    let bg = Background::bolza(refine)?;
    let qsq = qsq_field(&bg, qsq)?;
    let mut options = RayOptions::new(t_max, step);
    options.solver.tol = tol;
    let ray = continue_ray_with(&bg, &qsq, &options)?;
    let t0 = fmt_time(ray.t0);
    let monotone = if ray.is_monotone() { "u decreasing in t" } else { "u NOT monotone" };
    let (summary, exit_code) = match ray.status {
        RayStatus::FoldDetected => {
            let fold = ray.fold_t.expect("fold status carries a fold");
            let t2 = ray.t2.map(|t| format!(", no solution from T2 ≈ {t:.4}")).unwrap_or_default();
            (format!("fold T1 ≈ {fold:.4} (T0 = {t0}){t2}; λ_min → 0, {monotone}"), EXIT_OK)
        }
        RayStatus::Completed => {
            let last = ray.samples.last().expect("a completed ray has samples");
            (
                format!(
                    "reached t_max = {t_max} on the F-stable branch (T0 = {t0}), λ_min = {:.4e}, {monotone}",
                    last.stability.lambda_min
                ),
                EXIT_OK,
            )
        }
        RayStatus::Diverged => {
            let t = ray.samples.last().map_or(0.0, |s| s.t);
            (
                format!("continuation failed after t = {t:.4} without a stability crossing (T0 = {t0})"),
                EXIT_NUMERICAL,
            )
        }
    };
    let artifact = match format {
        Format::Json => pretty(&ray_json(&ray)),
        _ => ray.to_csv(),
    };
    Ok(Outcome {
        artifact,
        summary,
        exit_code,
    })
}

fn load_chart(chart: &ChartSource) -> Result<TodaChartData, CliError> {
    Ok(match chart {
        ChartSource::File(path) => TodaChartData::from_json(&read_file(path)?)?,
        ChartSource::Example { example, half, n } => {
            let ChartExample::LagrangianStrip { q, phi0 } = example else {
                let grid = ChartGrid::square(*half, *n)?;
                return Ok(match example {
                    ChartExample::RFuchsian => TodaChartData::r_fuchsian(grid)?,
                    ChartExample::Mobius(a) => TodaChartData::mobius_fuchsian(grid, *a)?,
                    ChartExample::LagrangianStrip { .. } => unreachable!(),
                });
            };
            TodaChartData::lagrangian_strip(ChartGrid::square(*half, *n)?, *q, *phi0)?
        }
    })
}

/// Multiplies `u₁, u₂` pointwise by `1 + amplitude·ξ`, `ξ` uniform on `[−1, 1]`.
fn perturb_chart(data: &TodaChartData, amplitude: f64, seed: u64) -> Result<TodaChartData, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = |v: &[f64]| -> Vec<f64> { v.iter().map(|x| x * (1.0 + amplitude * rng.gen_range(-1.0..=1.0))).collect() };
    let u1 = jitter(data.u1());
    let u2 = jitter(data.u2());
    Ok(TodaChartData::new(*data.grid(), u1, u2, data.q().to_vec())?)
}

fn toda_check(chart: &ChartSource, perturb: f64, seed: u64, format: Format) -> Result<Outcome, CliError> {
    let mut data = load_chart(chart)?;
    if perturb > 0.0 {
        data = perturb_chart(&data, perturb, seed)?;
    }
    let (r1, r2) = toda::toda_residuals(&data);
    let conn = toda::assemble_connection(&data);
    let flat = toda::flatness_residual(&conn);
    let curv = toda::curvature_report(&data)?;
    let kahler = toda::kahler_report(&data);
    let cubic = toda::cubic_norm_sq(&data);
    let toda_max = r1.max_abs().max(r2.max_abs());
    let summary = format!(
        "max Toda residual {:.3e}, max flatness residual {:.3e}, reality defect {:.1e}, κ_γ ∈ [{:.4}, {:.4}], κ⊥ ∈ [{:.4}, {:.4}]",
        toda_max,
        flat.max_abs(),
        conn.reality_defect(),
        curv.kappa_gamma.min(),
        curv.kappa_gamma.max(),
        curv.kappa_perp.min(),
        curv.kappa_perp.max()
    );
    let artifact = match format {
        Format::Json => pretty(&json!({
            "grid": serde_json::to_value(data.grid()).map_err(chsurf::Error::from)?,
            "toda_residual_max": toda_max,
            "flatness_residual_max": flat.max_abs(),
            "reality_defect": conn.reality_defect(),
            "kappa_gamma": [curv.kappa_gamma.min(), curv.kappa_gamma.max()],
            "kappa_perp": [curv.kappa_perp.min(), curv.kappa_perp.max()],
            "curvature_identity_max": curv.identity_residual.max_abs(),
            "tan_identity_max": kahler.tan_identity_residual.max_abs(),
        })),
        _ => toda::fields_to_csv(
            &[
                "toda_r1",
                "toda_r2",
                "flatness",
                "kappa_gamma",
                "kappa_perp",
                "curvature_identity",
                "cos_theta",
                "cubic_norm_sq",
            ],
            &[
                &r1,
                &r2,
                &flat,
                &curv.kappa_gamma,
                &curv.kappa_perp,
                &curv.identity_residual,
                &kahler.cos_theta,
                &cubic,
            ],
        ),
    };
    Ok(Outcome::ok(artifact, summary))
}

fn holonomy_json(h: &HolonomyResult, center: Complex64, radius: f64) -> Value {
    let rows: Vec<Value> = (0..3)
        .map(|i| Value::Array((0..3).map(|j| json!([h.matrix[(i, j)].re, h.matrix[(i, j)].im])).collect()))
        .collect();
    json!({
        "center": [center.re, center.im],
        "radius": radius,
        "step_count": h.step_count,
        "matrix": rows,
        "scale": h.scale,
        "unitarity_defect": h.unitarity_defect,
        "distance_to_identity": h.distance_to_identity(),
    })
}

fn holonomy(
    chart: &ChartSource,
    center: Complex64,
    radius: f64,
    vertices: usize,
    steps: usize,
    analytic: bool,
) -> Result<Outcome, CliError> {
    let path = toda::circle_loop(center, radius, vertices);
    let result = if analytic {
        toda::holonomy(&toda::r_fuchsian_connection(), &path, steps)?
    } else {
        let conn: ConnectionPair = toda::assemble_connection(&load_chart(chart)?);
        toda::holonomy(&conn, &path, steps)?
    };
    let summary = format!(
        "holonomy around |z − ({:.3}{:+.3}i)| = {radius}: ‖M − I‖ = {:.3e}, η-unitarity defect {:.1e} (scale {:.6})",
        center.re,
        center.im,
        result.distance_to_identity(),
        result.unitarity_defect,
        result.scale
    );
    Ok(Outcome::ok(pretty(&holonomy_json(&result, center, radius)), summary))
}

fn sweep_row(q0: f64, r: f64, alpha: f64) -> Result<SweepRow, CliError> {
    let s = NormalSample::from_polar(q0, r, alpha)?;
    let (l, k) = normal_flow::phi_coefficients(&s);
    let (a, da_dr) = normal_flow::area_density(q0, r, alpha)?;
    Ok(SweepRow {
        q0,
        r,
        alpha,
        l,
        k,
        lower_bound: normal_flow::lower_bound(&s),
        a,
        da_dr,
    })
}

fn expmap(
    q0: f64,
    sweep: bool,
    nr: usize,
    nalpha: usize,
    point: Option<(f64, f64)>,
    format: Format,
) -> Result<Outcome, CliError> {
    let mut rows = if sweep { normal_flow::sweep(q0, nr, nalpha)? } else { Vec::new() };
    if let Some((r, alpha)) = point {
        rows.push(sweep_row(q0, r, alpha)?);
    }
    let min_bound = rows.iter().map(|r| r.lower_bound).fold(f64::INFINITY, f64::min);
    let complete = normal_flow::completeness_verdict(q0)?;
    let mut summary = format!(
        "Q0 = {q0}: min lower bound l² − |k|² = {min_bound:.4e} over {} points; Θ*g {}",
        rows.len(),
        if complete { "complete" } else { "not certified complete" }
    );
    if let Some((r, alpha)) = point {
        let metric = normal_flow::full_theta_g(&NormalSample::from_polar(q0, r, alpha)?);
        summary.push_str(&format!(
            "; Θ*g at (r, α) = ({r}, {alpha}) is {}",
            if metric.is_positive_definite() { "positive definite" } else { "degenerate" }
        ));
    }
    let artifact = match format {
        Format::Json => pretty(&Value::Array(
            rows.iter()
                .map(|r| {
                    json!({
                        "Q0": r.q0, "r": r.r, "alpha": r.alpha, "l": r.l,
                        "k_re": r.k.re, "k_im": r.k.im,
                        "lower_bound": r.lower_bound, "a": r.a, "da_dr": r.da_dr,
                    })
                })
                .collect(),
        )),
        _ => normal_flow::sweep_csv(&rows),
    };
    Ok(Outcome::ok(artifact, summary))
}

fn moduli_table(genus: i64, format: Format) -> Result<Outcome, CliError> {
    let nonhol = moduli::enumerate_nonhol(genus)?;
    let hol = moduli::enumerate_hol(genus)?;
    let reducible = moduli::reducible_family(genus)?;
    let mut dims: Vec<i64> = nonhol
        .iter()
        .map(|c| moduli::nonhol_invariants(c).dim)
        .chain(hol.iter().map(|c| moduli::hol_invariants(c).dim))
        .collect();
    dims.sort_unstable();
    dims.dedup();
    let taus: Vec<_> = hol.iter().map(|c| moduli::hol_invariants(c).toledo).collect();
    let (tmin, tmax) = (taus.iter().min(), taus.iter().max());
    let tau_range = match (tmin, tmax) {
        (Some(a), Some(b)) => format!(", holomorphic τ ∈ [{a}, {b}]"),
        _ => String::new(),
    };
    let summary = format!(
        "genus {genus}: {} non-holomorphic V(d1, d2), {} holomorphic W±(b, l) pairs, {} reducible; dims {:?}{tau_range}",
        nonhol.len(),
        hol.len(),
        reducible.len(),
        dims
    );
    let artifact = match format {
        Format::Csv => moduli::table_csv(genus)?,
        _ => moduli::table_markdown(genus)?,
    };
    Ok(Outcome::ok(artifact, summary))
}
