//! Poincaré disc model of the hyperbolic plane, curvature −1.
//!
//! The metric is `4|dz|² / (1 − |z|²)²`.

use num_complex::Complex64;

/// Hyperbolic distance between two points of the open unit disc.
pub fn distance(z: Complex64, w: Complex64) -> f64 {
    let ratio = (z - w).norm() / (Complex64::new(1.0, 0.0) - z.conj() * w).norm();
    2.0 * ratio.min(1.0).atanh()
}

/// Disc automorphism sending `z0` to the origin.
pub fn to_origin(z0: Complex64, z: Complex64) -> Complex64 {
    (z - z0) / (Complex64::new(1.0, 0.0) - z0.conj() * z)
}

/// Inverse of [`to_origin`].
pub fn from_origin(z0: Complex64, z: Complex64) -> Complex64 {
    (z + z0) / (Complex64::new(1.0, 0.0) + z0.conj() * z)
}

/// Midpoint of the geodesic segment from `z` to `w`.
pub fn midpoint(z: Complex64, w: Complex64) -> Complex64 {
    let moved = to_origin(z, w);
    let rho = moved.norm();
    if rho == 0.0 {
        return z;
    }
    // tanh(atanh(ρ)/2)
    let half = rho / (1.0 + (1.0 - rho * rho).sqrt());
    from_origin(z, moved * (half / rho))
}

/// Hyperbolic translation along the diameter at angle `direction`, moving the
/// origin to `tanh(shift/2)·e^{i direction}`; `shift` is the hyperbolic distance.
pub fn translation(direction: f64, shift: f64, z: Complex64) -> Complex64 {
    let rot = Complex64::from_polar(1.0, direction);
    let a = (shift / 2.0).tanh();
    let w = z / rot;
    rot * (w + a) / (1.0 + a * w)
}

/// Interior angle opposite side `a` of a hyperbolic triangle with side lengths
/// `a`, `b`, `c` (hyperbolic law of cosines).
pub fn angle_opposite(a: f64, b: f64, c: f64) -> f64 {
    let cos = (b.cosh() * c.cosh() - a.cosh()) / (b.sinh() * c.sinh());
    cos.clamp(-1.0, 1.0).acos()
}

/// Area of the Euclidean triangle with the given side lengths (Kahan's form of Heron).
pub fn heron_area(a: f64, b: f64, c: f64) -> f64 {
    let mut s = [a, b, c];
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let [a, b, c] = s;
    let p = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    0.25 * p.max(0.0).sqrt()
}

/// Euclidean radius of the vertices of the regular hyperbolic `n`-gon with
/// interior angle `angle`, centred at the origin.
pub fn regular_polygon_radius(n: usize, angle: f64) -> f64 {
    let cot = |x: f64| 1.0 / x.tan();
    let cosh_rho = cot(std::f64::consts::PI / n as f64) * cot(angle / 2.0);
    ((cosh_rho - 1.0) / (cosh_rho + 1.0)).sqrt()
}
