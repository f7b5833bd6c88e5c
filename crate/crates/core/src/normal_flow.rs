//! Normal exponential map of a minimal Lagrangian in ℂH², evaluated at a base
//! point normalised so that the induced metric is `|dz|²` there, `s_z = 0`,
//! and the cubic differential takes the real value `Q₀ ∈ [0, ½)`. The fibre
//! coordinate is `w` with `|w| < 1/√2`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Margin used when turning strict positivity into a sampled verdict.
pub const POSITIVITY_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalSample {
    q0: f64,
    w: Complex64,
}

impl NormalSample {
    pub fn new(q0: f64, w: Complex64) -> Result<Self> {
        check_q0(q0)?;
        if !(w.norm() < FRAC_1_SQRT_2) {
            return Err(Error::Domain(format!("|w| = {} must be below 1/√2", w.norm())));
        }
        Ok(Self { q0, w })
    }

    pub fn from_polar(q0: f64, r: f64, alpha: f64) -> Result<Self> {
        check_radius(r)?;
        Self::new(q0, Complex64::from_polar(r, alpha))
    }

    pub fn q0(&self) -> f64 {
        self.q0
    }

    pub fn w(&self) -> Complex64 {
        self.w
    }

    pub fn r(&self) -> f64 {
        self.w.norm()
    }

    pub fn alpha(&self) -> f64 {
        self.w.arg()
    }
}

fn check_q0(q0: f64) -> Result<()> {
    if !(0.0..0.5).contains(&q0) {
        return Err(Error::Domain(format!("Q0 = {q0} must lie in [0, 1/2)")));
    }
    Ok(())
}

fn check_radius(r: f64) -> Result<()> {
    if !(0.0..FRAC_1_SQRT_2).contains(&r) {
        return Err(Error::Domain(format!("r = {r} must lie in [0, 1/√2)")));
    }
    Ok(())
}

/// `φ = l dz + k dz̄` with `l = (1 + |w|²)/√2`, `k = −2Q₀w − w̄²/√2`.
pub fn phi_coefficients(s: &NormalSample) -> (f64, Complex64) {
    let w = s.w;
    let l = (1.0 + w.norm_sqr()) / SQRT_2;
    let k = -2.0 * s.q0 * w - w.conj() * w.conj() / SQRT_2;
    (l, k)
}

/// `B` with `(φ₁, φ₂)ᵀ = B (dx, dy)ᵀ`.
pub fn phi_matrix(s: &NormalSample) -> Matrix2<f64> {
    let (l, k) = phi_coefficients(s);
    Matrix2::new(l + k.re, k.im, k.im, l - k.re)
}

/// Eigenvalues `(λ₊, λ₋)` of `BᵀB`. `B` is symmetric, so these are the
/// squares of its eigenvalues; squaring keeps the small one relatively accurate.
pub fn phi_metric_eigen(s: &NormalSample) -> (f64, f64) {
    let eig = SymmetricEigen::new(phi_matrix(s)).eigenvalues;
    let (a, b) = (eig[0] * eig[0], eig[1] * eig[1]);
    (a.max(b), a.min(b))
}

/// `r²(1 − 4Q₀²) + ½ − 2√2·Q₀r³cos 3α`, equal to `l² − |k|²`.
pub fn lower_bound(s: &NormalSample) -> f64 {
    let (r, a, q) = (s.r(), s.alpha(), s.q0);
    r * r * (1.0 - 4.0 * q * q) + 0.5 - 2.0 * SQRT_2 * q * r.powi(3) * (3.0 * a).cos()
}

/// `P(r) = 1 + 2r²(1 − 4Q₀²) − 4√2·Q₀r³cos 3α` and `dP/dr`.
fn density_numerator(q0: f64, r: f64, alpha: f64) -> (f64, f64) {
    let (c3, m) = ((3.0 * alpha).cos(), 1.0 - 4.0 * q0 * q0);
    let p = 1.0 + 2.0 * r * r * m - 4.0 * SQRT_2 * q0 * r.powi(3) * c3;
    let dp = 4.0 * r * m - 12.0 * SQRT_2 * q0 * r * r * c3;
    (p, dp)
}

/// Volume density `a(r) = (1 − 2r²)^{−3/2} P(r)` of the parallel surface at
/// distance parameter `r` and its derivative
/// `4r(1 − 2r²)^{−5/2}[(1 + r²)(1 − 4Q₀²) + (3/2)(1 − 2√2·Q₀r cos 3α)]`.
pub fn area_density(q0: f64, r: f64, alpha: f64) -> Result<(f64, f64)> {
    check_q0(q0)?;
    check_radius(r)?;
    let e = 1.0 - 2.0 * r * r;
    let (p, _) = density_numerator(q0, r, alpha);
    let a = p / e.powf(1.5);
    let bracket = (1.0 + r * r) * (1.0 - 4.0 * q0 * q0) + 1.5 * (1.0 - 2.0 * SQRT_2 * q0 * r * (3.0 * alpha).cos());
    let da = 4.0 * r * bracket / e.powf(2.5);
    Ok((a, da))
}

/// Symmetric form with basis labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricForm {
    pub matrix: DMatrix<f64>,
    pub basis: Vec<&'static str>,
}

impl MetricForm {
    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    pub fn is_positive_definite(&self) -> bool {
        self.eigenvalues()[0] > 0.0
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }
}

/// `θ₁ = (1 − 2r²)⁻² Bᵀ [[2 − 4w₁², 4w₁w₂], [4w₁w₂, 2 − 4w₂²]] B` in `(dx, dy)`.
pub fn theta1(s: &NormalSample) -> Matrix2<f64> {
    let (w1, w2) = (s.w.re, s.w.im);
    let n = Matrix2::new(2.0 - 4.0 * w1 * w1, 4.0 * w1 * w2, 4.0 * w1 * w2, 2.0 - 4.0 * w2 * w2);
    // B = B̃/√2 keeps the zero section exact
    let w = s.w;
    let lt = 1.0 + w.norm_sqr();
    let kt = -2.0 * SQRT_2 * s.q0 * w - w.conj() * w.conj();
    let bt = Matrix2::new(lt + kt.re, kt.im, kt.im, lt - kt.re);
    let e = 1.0 - 2.0 * w.norm_sqr();
    let m = bt.transpose() * n * bt * 0.5 / (e * e);
    (m + m.transpose()) * 0.5
}

/// `θ₂ = (1 − 2r²)⁻² (2|dw|² + (w dw̄ − w̄ dw)²)` in `(dw₁, dw₂)`: the Klein
/// model metric of the fibre.
pub fn theta2(s: &NormalSample) -> Matrix2<f64> {
    let (w1, w2) = (s.w.re, s.w.im);
    // (w dw̄ − w̄ dw)² = −4(w₂dw₁ − w₁dw₂)²
    let m = Matrix2::new(2.0 - 4.0 * w2 * w2, 4.0 * w1 * w2, 4.0 * w1 * w2, 2.0 - 4.0 * w1 * w1);
    let e = 1.0 - 2.0 * s.w.norm_sqr();
    m / (e * e)
}

/// `Θ*g = θ₁ + θ₂` in `(dx, dy, dw₁, dw₂)`.
pub fn full_theta_g(s: &NormalSample) -> MetricForm {
    let (t1, t2) = (theta1(s), theta2(s));
    let mut m = DMatrix::zeros(4, 4);
    m.view_mut((0, 0), (2, 2)).copy_from(&t1);
    m.view_mut((2, 2), (2, 2)).copy_from(&t2);
    MetricForm {
        matrix: m,
        basis: vec!["dx", "dy", "dw1", "dw2"],
    }
}

/// Sample points `(r, α)` on an `nr × nα` grid covering `[0, 1/√2) × [0, 2π)`.
pub fn polar_grid(nr: usize, nalpha: usize) -> impl Iterator<Item = (f64, f64)> {
    (0..nr).flat_map(move |i| {
        let r = FRAC_1_SQRT_2 * i as f64 / nr as f64;
        (0..nalpha).map(move |j| (r, 2.0 * PI * j as f64 / nalpha as f64))
    })
}

pub const VERDICT_GRID: usize = 200;

/// Grid infimum of [`lower_bound`] over `200 × 200` points in `(r, α)`.
pub fn lower_bound_infimum(q0: f64) -> Result<f64> {
    check_q0(q0)?;
    polar_grid(VERDICT_GRID, VERDICT_GRID)
        .map(|(r, a)| NormalSample::from_polar(q0, r, a).map(|s| lower_bound(&s)))
        .try_fold(f64::INFINITY, |m, v| v.map(|v| m.min(v)))
}

/// Whether `Θ*g` is complete: the grid infimum of `l² − |k|²` exceeds `ε`.
pub fn completeness_verdict(q0: f64) -> Result<bool> {
    Ok(lower_bound_infimum(q0)? > POSITIVITY_EPS)
}

/// Mean curvature of the parallel surface paired with `grad ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanCurvatureRelation {
    /// `dρ(H) = −(da/dr)/a`.
    pub d_rho_h: f64,
    /// `d/dr log a`, from the logarithmic derivative of the factors.
    pub d_log_a: f64,
    pub residual: f64,
}

pub fn mean_curvature_relation(q0: f64, r: f64, alpha: f64) -> Result<MeanCurvatureRelation> {
    let (a, da) = area_density(q0, r, alpha)?;
    let (p, dp) = density_numerator(q0, r, alpha);
    let d_log_a = 6.0 * r / (1.0 - 2.0 * r * r) + dp / p;
    let d_rho_h = -da / a;
    Ok(MeanCurvatureRelation {
        d_rho_h,
        d_log_a,
        residual: (d_log_a + d_rho_h).abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub q0: f64,
    pub r: f64,
    pub alpha: f64,
    pub l: f64,
    pub k: Complex64,
    pub lower_bound: f64,
    pub a: f64,
    pub da_dr: f64,
}

pub fn sweep(q0: f64, nr: usize, nalpha: usize) -> Result<Vec<SweepRow>> {
    check_q0(q0)?;
    if nr == 0 || nalpha == 0 {
        return Err(Error::InvalidInput("sweep grid must be non-empty".into()));
    }
    polar_grid(nr, nalpha)
        .map(|(r, alpha)| {
            let s = NormalSample::from_polar(q0, r, alpha)?;
            let (l, k) = phi_coefficients(&s);
            let (a, da_dr) = area_density(q0, r, alpha)?;
            Ok(SweepRow {
                q0,
                r,
                alpha,
                l,
                k,
                lower_bound: lower_bound(&s),
                a,
                da_dr,
            })
        })
        .collect()
}

/// CSV with columns `Q0, r, alpha, l, k_re, k_im, lower_bound, a, da_dr`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("Q0,r,alpha,l,k_re,k_im,lower_bound,a,da_dr\n");
    for row in rows {
        out.push_str(&format!(
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
            row.q0, row.r, row.alpha, row.l, row.k.re, row.k.im, row.lower_bound, row.a, row.da_dr
        ));
    }
    out
}
