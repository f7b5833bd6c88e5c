//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;

/// Roots `(upper, lower)` of `v³ − v² + c = 0` in `(0, 1]`, split at `v = 2/3`, by bisection.
pub fn cubic_roots(c: f64) -> (f64, f64) {
    let f = |v: f64| v * v * v - v * v + c;
    let bisect = |mut lo: f64, mut hi: f64| {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    (bisect(2.0 / 3.0, 1.0), bisect(0.0, 2.0 / 3.0))
}

/// Hyperbolic distance from the origin in the Poincaré disc.
pub fn rho(z: Complex64) -> f64 {
    2.0 * z.norm().atanh()
}

/// Radius of the bump below; well inside the inradius (≈ 1.528) of the regular octagon.
pub const BUMP_RADIUS: f64 = 1.2;

/// `(1 − ρ²/R²)⁸` inside `ρ < R`, zero outside: a C⁷ function supported in the fundamental domain.
pub fn bump(z: Complex64) -> f64 {
    let s = rho(z).powi(2) / (BUMP_RADIUS * BUMP_RADIUS);
    if s < 1.0 {
        (1.0 - s).powi(8)
    } else {
        0.0
    }
}

/// Hyperbolic Laplacian of [`bump`], from `Δf = f″ + coth ρ · f′` for radial `f`.
pub fn bump_laplacian(z: Complex64) -> f64 {
    let r = rho(z);
    let rr = BUMP_RADIUS * BUMP_RADIUS;
    let s = r * r / rr;
    if s >= 1.0 {
        return 0.0;
    }
    let g1 = -8.0 * (1.0 - s).powi(7);
    let g2 = 56.0 * (1.0 - s).powi(6);
    let r_coth = if r < 1e-8 { 1.0 } else { r / r.tanh() };
    let f2 = g2 * (2.0 * r / rr).powi(2) + g1 * 2.0 / rr;
    f2 + g1 * 2.0 * r_coth / rr
}

/// Observed convergence orders `log₂(e_k / e_{k+1})` for halving mesh sizes.
pub fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Conjugate gradients for `S x = b` with `S` symmetric positive semidefinite
/// and `b` in its range (mean-zero loads for a stiffness matrix).
pub fn conjugate_gradient(apply: impl Fn(&[f64]) -> Vec<f64>, b: &[f64], tol: f64) -> Vec<f64> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let stop = tol * tol * rr;
    for _ in 0..10 * b.len() {
        if rr <= stop {
            break;
        }
        let ap = apply(&p);
        let alpha = rr / dot(&p, &ap);
        for k in 0..x.len() {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let next = dot(&r, &r);
        for k in 0..p.len() {
            p[k] = r[k] + next / rr * p[k];
        }
        rr = next;
    }
    x
}
