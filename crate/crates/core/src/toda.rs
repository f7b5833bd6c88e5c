//! Chart-level Toda system for minimal surfaces in ℂH² and its flat connection.
//!
//! Data lives on a uniform grid in a coordinate `z = x + iy`. Conventions:
//! `Z = ½(∂ₓ − i∂ᵧ)`, `Z̄ = ½(∂ₓ + i∂ᵧ)`, so `ZZ̄ = ¼Δ_flat`. All derivatives
//! are second-order central differences; quantities needing one derivative
//! are defined off a one-cell boundary ring, the connection curvature (which
//! differentiates the connection again) off a two-cell ring.

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix3 = Matrix3<Complex64>;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartGrid {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub nx: usize,
    pub ny: usize,
}

impl ChartGrid {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize) -> Result<Self> {
        let g = Self { x0, x1, y0, y1, nx, ny };
        g.validate()?;
        Ok(g)
    }

    /// `[−half, half]²` with `n × n` points.
    pub fn square(half: f64, n: usize) -> Result<Self> {
        Self::new(-half, half, -half, half, n, n)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x0, self.x1, self.y0, self.y1].iter().all(|v| v.is_finite());
        if !finite || !(self.x1 > self.x0) || !(self.y1 > self.y0) {
            return Err(Error::InvalidInput("grid rectangle must be non-degenerate".into()));
        }
        if self.nx < 5 || self.ny < 5 {
            return Err(Error::InvalidInput("grid needs at least 5 points per axis".into()));
        }
        if self.nx.saturating_mul(self.ny) > 16_000_000 {
            return Err(Error::Resource("grid larger than 16M points".into()));
        }
        Ok(())
    }

    pub fn hx(&self) -> f64 {
        (self.x1 - self.x0) / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y1 - self.y0) / (self.ny - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major index, `i` along x.
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn point(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.x0 + i as f64 * self.hx(), self.y0 + j as f64 * self.hy())
    }

    pub fn points(&self) -> impl Iterator<Item = Complex64> + '_ {
        (0..self.ny).flat_map(move |j| (0..self.nx).map(move |i| self.point(i, j)))
    }

    /// Largest `|z|` on the grid.
    pub fn max_radius(&self) -> f64 {
        let x = self.x0.abs().max(self.x1.abs());
        let y = self.y0.abs().max(self.y1.abs());
        x.hypot(y)
    }

    fn require_in_disc(&self) -> Result<()> {
        if self.max_radius() >= 1.0 {
            return Err(Error::Domain("chart grid must lie inside the unit disc".into()));
        }
        Ok(())
    }
}

/// Values on a [`ChartGrid`], meaningful only at least `margin` cells from the edge.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField<T> {
    grid: ChartGrid,
    margin: usize,
    values: Vec<T>,
}

impl<T: Copy> GridField<T> {
    fn build(grid: ChartGrid, margin: usize, fill: T, f: impl Fn(usize, usize) -> T) -> Self {
        let mut values = vec![fill; grid.len()];
        for j in margin..grid.ny.saturating_sub(margin) {
            for i in margin..grid.nx.saturating_sub(margin) {
                values[grid.index(i, j)] = f(i, j);
            }
        }
        Self { grid, margin, values }
    }

    pub fn grid(&self) -> &ChartGrid {
        &self.grid
    }

    pub fn margin(&self) -> usize {
        self.margin
    }

    pub fn get(&self, i: usize, j: usize) -> Option<T> {
        let m = self.margin;
        let inside = i >= m && j >= m && i + m < self.grid.nx && j + m < self.grid.ny;
        inside.then(|| self.values[self.grid.index(i, j)])
    }

    pub fn interior(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        let m = self.margin;
        (m..self.grid.ny - m).flat_map(move |j| (m..self.grid.nx - m).map(move |i| (i, j, self.values[self.grid.index(i, j)])))
    }

    pub fn map<S: Copy + Default>(&self, f: impl Fn(T) -> S) -> GridField<S> {
        GridField::build(self.grid, self.margin, S::default(), |i, j| f(self.values[self.grid.index(i, j)]))
    }
}

impl GridField<f64> {
    pub fn max_abs(&self) -> f64 {
        self.interior().fold(0.0, |a, (_, _, v)| a.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.interior().fold(f64::NEG_INFINITY, |a, (_, _, v)| a.max(v))
    }

    pub fn min(&self) -> f64 {
        self.interior().fold(f64::INFINITY, |a, (_, _, v)| a.min(v))
    }

    /// Largest `|v|` over interior points whose coordinate satisfies `keep`.
    pub fn max_abs_where(&self, keep: impl Fn(Complex64) -> bool) -> f64 {
        self.interior()
            .filter(|&(i, j, _)| keep(self.grid.point(i, j)))
            .fold(0.0, |a, (_, _, v)| a.max(v.abs()))
    }

    /// Largest `|self − other|` over common interior points.
    pub fn max_abs_diff(&self, other: &GridField<f64>) -> f64 {
        self.interior()
            .filter_map(|(i, j, v)| other.get(i, j).map(|w| (v - w).abs()))
            .fold(0.0, f64::max)
    }
}

/// Per-point CSV `x,y,<names...>` over the common interior of the fields.
pub fn fields_to_csv(names: &[&str], fields: &[&GridField<f64>]) -> String {
    assert_eq!(names.len(), fields.len());
    let mut out = String::from("x,y");
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    if let Some(first) = fields.first() {
        let margin = fields.iter().map(|f| f.margin).max().unwrap();
        let g = first.grid;
        for j in margin..g.ny - margin {
            for i in margin..g.nx - margin {
                let z = g.point(i, j);
                out.push_str(&format!("{:.12e},{:.12e}", z.re, z.im));
                for f in fields {
                    out.push_str(&format!(",{:.12e}", f.values[g.index(i, j)]));
                }
                out.push('\n');
            }
        }
    }
    out
}

/// Local data `(u₁, u₂, Q)` of a minimal surface without complex or
/// anti-complex points in the chart.
#[derive(Debug, Clone, PartialEq)]
pub struct TodaChartData {
    grid: ChartGrid,
    u1: Vec<f64>,
    u2: Vec<f64>,
    q: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartDocument {
    pub grid: ChartGrid,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    #[serde(rename = "Q_re")]
    pub q_re: Vec<f64>,
    #[serde(rename = "Q_im")]
    pub q_im: Vec<f64>,
}

impl TodaChartData {
    pub fn new(grid: ChartGrid, u1: Vec<f64>, u2: Vec<f64>, q: Vec<Complex64>) -> Result<Self> {
        grid.validate()?;
        let n = grid.len();
        for (name, len) in [("u1", u1.len()), ("u2", u2.len()), ("Q", q.len())] {
            if len != n {
                return Err(Error::InvalidInput(format!("{name} has {len} values, grid has {n}")));
            }
        }
        if let Some(k) = u1.iter().chain(&u2).position(|v| !(*v > 0.0) || !v.is_finite()) {
            let (name, k) = if k < n { ("u1", k) } else { ("u2", k - n) };
            return Err(Error::Domain(format!(
                "{name} must be positive and finite (index {k}); the chart contains a complex or anti-complex point"
            )));
        }
        if q.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidInput("Q must be finite".into()));
        }
        Ok(Self { grid, u1, u2, q })
    }

    pub fn from_fn(grid: ChartGrid, f: impl Fn(Complex64) -> (f64, f64, Complex64)) -> Result<Self> {
        let (mut u1, mut u2, mut q) = (Vec::new(), Vec::new(), Vec::new());
        for z in grid.points() {
            let (a, b, w) = f(z);
            u1.push(a);
            u2.push(b);
            q.push(w);
        }
        Self::new(grid, u1, u2, q)
    }

    /// Totally geodesic ℝH² ⊂ ℂH²: `u₁ = u₂ = √2/(1 − |z|²)`, `Q = 0`.
    pub fn r_fuchsian(grid: ChartGrid) -> Result<Self> {
        grid.require_in_disc()?;
        Self::from_fn(grid, |z| {
            let s = 2f64.sqrt() / (1.0 - z.norm_sqr());
            (s, s, c(0.0))
        })
    }

    /// The ℝ-Fuchsian data pulled back by the disc automorphism `(z − a)/(1 − āz)`.
    pub fn mobius_fuchsian(grid: ChartGrid, a: Complex64) -> Result<Self> {
        grid.require_in_disc()?;
        if a.norm() >= 1.0 {
            return Err(Error::Domain("Möbius centre must lie in the unit disc".into()));
        }
        Self::from_fn(grid, |z| {
            let den = c(1.0) - a.conj() * z;
            let h = (z - a) / den;
            let dh = (1.0 - a.norm_sqr()) / den.norm_sqr();
            let s = 2f64.sqrt() * dh / (1.0 - h.norm_sqr());
            (s, s, c(0.0))
        })
    }

    pub fn constant(grid: ChartGrid, u1: f64, u2: f64, q: Complex64) -> Result<Self> {
        Self::from_fn(grid, |_| (u1, u2, q))
    }

    /// Lagrangian solution with constant `Q`: `u₁ = u₂ = s(x)` where
    /// `φ = log s²` solves `φ'' = 4(e^φ + |Q|²e^{−2φ})`, `φ(0) = phi0`,
    /// `φ'(0) = 0` (RK4).
    pub fn lagrangian_strip(grid: ChartGrid, q: Complex64, phi0: f64) -> Result<Self> {
        grid.validate()?;
        let q2 = q.norm_sqr();
        let rhs = |y: [f64; 2]| [y[1], 4.0 * (y[0].exp() + q2 * (-2.0 * y[0]).exp())];
        let solve = |x: f64| -> f64 {
            let steps = ((x.abs() / 2e-4).ceil() as usize).max(1);
            let h = x / steps as f64;
            let mut y = [phi0, 0.0];
            for _ in 0..steps {
                let add = |y: [f64; 2], k: [f64; 2], s: f64| [y[0] + s * k[0], y[1] + s * k[1]];
                let k1 = rhs(y);
                let k2 = rhs(add(y, k1, h / 2.0));
                let k3 = rhs(add(y, k2, h / 2.0));
                let k4 = rhs(add(y, k3, h));
                y[0] += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
                y[1] += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
            }
            y[0]
        };
        let column: Vec<f64> = (0..grid.nx).map(|i| (0.5 * solve(grid.point(i, 0).re)).exp()).collect();
        if column.iter().any(|s| !s.is_finite()) {
            return Err(Error::Domain("strip solution blows up inside the chart".into()));
        }
        let mut u = Vec::with_capacity(grid.len());
        for _ in 0..grid.ny {
            u.extend_from_slice(&column);
        }
        Self::new(grid, u.clone(), u, vec![q; grid.len()])
    }

    pub fn grid(&self) -> &ChartGrid {
        &self.grid
    }

    pub fn u1(&self) -> &[f64] {
        &self.u1
    }

    pub fn u2(&self) -> &[f64] {
        &self.u2
    }

    pub fn q(&self) -> &[Complex64] {
        &self.q
    }

    pub fn to_document(&self) -> ChartDocument {
        ChartDocument {
            grid: self.grid,
            u1: self.u1.clone(),
            u2: self.u2.clone(),
            q_re: self.q.iter().map(|z| z.re).collect(),
            q_im: self.q.iter().map(|z| z.im).collect(),
        }
    }

    pub fn from_document(doc: ChartDocument) -> Result<Self> {
        if doc.q_re.len() != doc.q_im.len() {
            return Err(Error::InvalidInput("Q_re and Q_im differ in length".into()));
        }
        let q = doc.q_re.iter().zip(&doc.q_im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        Self::new(doc.grid, doc.u1, doc.u2, q)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }
}

/// `(f_x, f_y)` by central differences.
fn grad(f: &[f64], g: &ChartGrid, i: usize, j: usize) -> (f64, f64) {
    let fx = (f[g.index(i + 1, j)] - f[g.index(i - 1, j)]) / (2.0 * g.hx());
    let fy = (f[g.index(i, j + 1)] - f[g.index(i, j - 1)]) / (2.0 * g.hy());
    (fx, fy)
}

/// `ZZ̄ f = ¼(f_xx + f_yy)`, five-point stencil.
fn zzbar(f: &[f64], g: &ChartGrid, i: usize, j: usize) -> f64 {
    let k = g.index(i, j);
    let fxx = (f[g.index(i + 1, j)] - 2.0 * f[k] + f[g.index(i - 1, j)]) / (g.hx() * g.hx());
    let fyy = (f[g.index(i, j + 1)] - 2.0 * f[k] + f[g.index(i, j - 1)]) / (g.hy() * g.hy());
    0.25 * (fxx + fyy)
}

/// `Z f` for real `f`.
fn z_deriv(f: &[f64], g: &ChartGrid, i: usize, j: usize) -> Complex64 {
    let (fx, fy) = grad(f, g, i, j);
    0.5 * Complex64::new(fx, -fy)
}

fn log_sq(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| 2.0 * x.ln()).collect()
}

/// Residuals of
/// `ZZ̄ log u₁² = 2u₁² + |Q|²/u₁²u₂² − u₂²` and
/// `ZZ̄ log u₂² = 2u₂² + |Q|²/u₁²u₂² − u₁²`.
pub fn toda_residuals(data: &TodaChartData) -> (GridField<f64>, GridField<f64>) {
    let g = data.grid;
    let (l1, l2) = (log_sq(&data.u1), log_sq(&data.u2));
    let source = |k: usize| {
        let (a, b) = (data.u1[k] * data.u1[k], data.u2[k] * data.u2[k]);
        (a, b, data.q[k].norm_sqr() / (a * b))
    };
    let r1 = GridField::build(g, 1, 0.0, |i, j| {
        let (a, b, qq) = source(g.index(i, j));
        zzbar(&l1, &g, i, j) - (2.0 * a + qq - b)
    });
    let r2 = GridField::build(g, 1, 0.0, |i, j| {
        let (a, b, qq) = source(g.index(i, j));
        zzbar(&l2, &g, i, j) - (2.0 * b + qq - a)
    });
    (r1, r2)
}

/// `η = diag(1, 1, −1)`.
pub fn eta() -> CMatrix3 {
    CMatrix3::from_diagonal(&nalgebra::Vector3::new(c(1.0), c(1.0), c(-1.0)))
}

/// `−η·Xᴴ·η`, the `u(2,1)` partner of a `(1,0)`-part.
pub fn reality_partner(a_z: &CMatrix3) -> CMatrix3 {
    let e = eta();
    -(e * a_z.adjoint() * e)
}

/// The connection `d + A_z dz + A_z̄ dz̄` on a grid.
#[derive(Debug, Clone)]
pub struct ConnectionPair {
    pub a_z: GridField<CMatrix3>,
    pub a_zbar: GridField<CMatrix3>,
}

impl ConnectionPair {
    /// Builds the pair from `A_z`, taking `A_z̄` from the reality condition.
    pub fn from_a_z(a_z: GridField<CMatrix3>) -> Self {
        let a_zbar = a_z.map(|m| reality_partner(&m));
        Self { a_z, a_zbar }
    }

    pub fn zero(grid: ChartGrid) -> Self {
        Self::from_a_z(GridField::build(grid, 0, CMatrix3::zeros(), |_, _| CMatrix3::zeros()))
    }

    /// Evaluates an analytic `A_z` on the grid.
    pub fn sample(grid: ChartGrid, a_z: impl Fn(Complex64) -> CMatrix3) -> Self {
        Self::from_a_z(GridField::build(grid, 0, CMatrix3::zeros(), |i, j| a_z(grid.point(i, j))))
    }

    pub fn grid(&self) -> &ChartGrid {
        self.a_z.grid()
    }

    /// `max ‖A_z̄ + ηA_zᴴη‖_F`.
    pub fn reality_defect(&self) -> f64 {
        self.a_z
            .interior()
            .map(|(i, j, m)| (self.a_zbar.get(i, j).unwrap() - reality_partner(&m)).norm())
            .fold(0.0, f64::max)
    }
}

/// `A_z = [[Z log u₁, 0, u₁], [Q/(u₁u₂), −Z log u₂, 0], [0, u₂, 0]]`.
pub fn assemble_connection(data: &TodaChartData) -> ConnectionPair {
    let g = data.grid;
    let (lu1, lu2): (Vec<f64>, Vec<f64>) = (data.u1.iter().map(|x| x.ln()).collect(), data.u2.iter().map(|x| x.ln()).collect());
    let a_z = GridField::build(g, 1, CMatrix3::zeros(), |i, j| {
        let k = g.index(i, j);
        let (u1, u2) = (data.u1[k], data.u2[k]);
        let zero = c(0.0);
        CMatrix3::new(
            z_deriv(&lu1, &g, i, j),
            zero,
            c(u1),
            data.q[k] / (u1 * u2),
            -z_deriv(&lu2, &g, i, j),
            zero,
            zero,
            c(u2),
            zero,
        )
    });
    ConnectionPair::from_a_z(a_z)
}

/// `(∂ₓX, ∂ᵧX)` for a matrix field with valid neighbours.
fn matrix_grad(f: &GridField<CMatrix3>, i: usize, j: usize) -> Option<(CMatrix3, CMatrix3)> {
    let g = f.grid;
    let fx = (f.get(i + 1, j)? - f.get(i - 1, j)?) * c(0.5 / g.hx());
    let fy = (f.get(i, j + 1)? - f.get(i, j - 1)?) * c(0.5 / g.hy());
    Some((fx, fy))
}

/// `F = ∂_z A_z̄ − ∂_z̄ A_z + [A_z, A_z̄]`.
pub fn curvature(conn: &ConnectionPair) -> GridField<CMatrix3> {
    let margin = conn.a_z.margin() + 1;
    GridField::build(*conn.grid(), margin, CMatrix3::zeros(), |i, j| {
        let (bx, by) = matrix_grad(&conn.a_zbar, i, j).unwrap();
        let (ax, ay) = matrix_grad(&conn.a_z, i, j).unwrap();
        let dz_abar = (bx - by * I) * c(0.5);
        let dzbar_a = (ax + ay * I) * c(0.5);
        let (a, b) = (conn.a_z.get(i, j).unwrap(), conn.a_zbar.get(i, j).unwrap());
        dz_abar - dzbar_a + (a * b - b * a)
    })
}

/// Pointwise Frobenius norm of the trace-free part of the curvature.
///
/// The connection is only projectively flat: for exact Toda data the
/// curvature is `(u₂² − u₁²)·I`, so the scalar part is removed.
pub fn flatness_residual(conn: &ConnectionPair) -> GridField<f64> {
    curvature(conn).map(|f| {
        let s = f.trace() / c(3.0);
        (f - CMatrix3::identity() * s).norm()
    })
}

/// Something that can be evaluated as a connection at any chart point.
pub trait ConnectionSource {
    /// `(A_z, A_z̄)` at `z`.
    fn at(&self, z: Complex64) -> Result<(CMatrix3, CMatrix3)>;
}

impl ConnectionSource for ConnectionPair {
    /// Bilinear interpolation of the grid values.
    fn at(&self, z: Complex64) -> Result<(CMatrix3, CMatrix3)> {
        let g = self.grid();
        let m = self.a_z.margin() as f64;
        let fx = (z.re - g.x0) / g.hx();
        let fy = (z.im - g.y0) / g.hy();
        let lo_ok = fx >= m && fy >= m;
        let hi_ok = fx <= (g.nx - 1) as f64 - m && fy <= (g.ny - 1) as f64 - m;
        if !(lo_ok && hi_ok) {
            return Err(Error::Domain(format!("point {z} outside the connection's grid interior")));
        }
        let i = (fx.floor() as usize).min(g.nx - 2 - self.a_z.margin());
        let j = (fy.floor() as usize).min(g.ny - 2 - self.a_z.margin());
        let (sx, sy) = (fx - i as f64, fy - j as f64);
        let lerp = |f: &GridField<CMatrix3>| {
            let v00 = f.get(i, j).unwrap();
            let v10 = f.get(i + 1, j).unwrap();
            let v01 = f.get(i, j + 1).unwrap();
            let v11 = f.get(i + 1, j + 1).unwrap();
            v00 * c((1.0 - sx) * (1.0 - sy)) + v10 * c(sx * (1.0 - sy)) + v01 * c((1.0 - sx) * sy) + v11 * c(sx * sy)
        };
        Ok((lerp(&self.a_z), lerp(&self.a_zbar)))
    }
}

/// Connection given by a closed-form `A_z`, with `A_z̄` from the reality condition.
pub struct AnalyticConnection<F>(pub F);

impl<F: Fn(Complex64) -> CMatrix3> ConnectionSource for AnalyticConnection<F> {
    fn at(&self, z: Complex64) -> Result<(CMatrix3, CMatrix3)> {
        let a = (self.0)(z);
        Ok((a, reality_partner(&a)))
    }
}

/// Exact connection of the ℝ-Fuchsian data, `Z log s = z̄/(1 − |z|²)`.
pub fn r_fuchsian_connection() -> AnalyticConnection<impl Fn(Complex64) -> CMatrix3> {
    AnalyticConnection(|z: Complex64| {
        let w = 1.0 - z.norm_sqr();
        let s = c(2f64.sqrt() / w);
        let a = z.conj() / w;
        let zero = c(0.0);
        CMatrix3::new(a, zero, s, zero, -a, zero, zero, s, zero)
    })
}

#[derive(Debug, Clone)]
pub struct HolonomyResult {
    pub matrix: CMatrix3,
    pub path: Vec<Complex64>,
    pub step_count: usize,
    /// `c` in `MᴴηM ≈ cη`.
    pub scale: f64,
    /// `‖MᴴηM − cη‖_F / ‖M‖_F²`.
    pub unitarity_defect: f64,
}

impl HolonomyResult {
    /// `‖M − I‖_F`.
    pub fn distance_to_identity(&self) -> f64 {
        (self.matrix - CMatrix3::identity()).norm()
    }
}

pub const MIN_HOLONOMY_STEPS: usize = 100;

/// Largest relative η-unitarity defect accepted from [`holonomy`].
pub const HOLONOMY_TOL: f64 = 1e-8;

/// Closed polygon approximating a circle; last vertex repeats the first.
pub fn circle_loop(center: Complex64, radius: f64, vertices: usize) -> Vec<Complex64> {
    (0..=vertices)
        .map(|k| center + Complex64::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / vertices as f64))
        .collect()
}

/// Path-ordered transport `M = ∏ exp(−(A_z dz + A_z̄ dz̄))` along a polyline
/// (closed if the last vertex differs from the first). Later steps multiply
/// on the left, so the holonomy of `loop1` followed by `loop2` is
/// `M(loop2)·M(loop1)`.
pub fn holonomy(source: &impl ConnectionSource, path: &[Complex64], steps: usize) -> Result<HolonomyResult> {
    if steps < MIN_HOLONOMY_STEPS {
        return Err(Error::InvalidInput(format!("holonomy needs at least {MIN_HOLONOMY_STEPS} steps")));
    }
    if path.len() < 2 {
        return Err(Error::InvalidInput("loop needs at least two vertices".into()));
    }
    let mut pts = path.to_vec();
    if pts.first() != pts.last() {
        pts.push(pts[0]);
    }
    let lengths: Vec<f64> = pts.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let total: f64 = lengths.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidInput("loop has zero length".into()));
    }
    // split steps proportionally to length, at least one per non-empty segment
    let mut counts: Vec<usize> = lengths
        .iter()
        .map(|l| if *l > 0.0 { ((l / total) * steps as f64).round().max(1.0) as usize } else { 0 })
        .collect();
    let assigned: usize = counts.iter().sum();
    if assigned != steps {
        let k = lengths
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        counts[k] = (counts[k] + steps).saturating_sub(assigned).max(1);
    }
    let mut m = CMatrix3::identity();
    let mut step_count = 0;
    for (w, &n) in pts.windows(2).zip(&counts) {
        for s in 0..n {
            let a = w[0] + (w[1] - w[0]) * (s as f64 / n as f64);
            let b = w[0] + (w[1] - w[0]) * ((s + 1) as f64 / n as f64);
            let (az, azb) = source.at(0.5 * (a + b))?;
            let dz = b - a;
            let x = az * dz + azb * dz.conj();
            m = (-x).exp() * m;
            step_count += 1;
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("holonomy overflowed".into()));
    }
    let e = eta();
    let gram = m.adjoint() * e * m;
    let scale = (e * gram).trace().re / 3.0;
    let unitarity_defect = (gram - e * c(scale)).norm() / m.norm_squared();
    if unitarity_defect > HOLONOMY_TOL || !(scale > 0.0) {
        return Err(Error::Accuracy(format!(
            "holonomy is not η-unitary (defect {unitarity_defect:e}); refine the step size"
        )));
    }
    Ok(HolonomyResult {
        matrix: m,
        path: pts,
        step_count,
        scale,
        unitarity_defect,
    })
}

#[derive(Debug, Clone)]
pub struct KahlerReport {
    /// `(u₁² − u₂²)/(u₁² + u₂²)`.
    pub cos_theta: GridField<f64>,
    /// `f*ω / dx∧dy = u₁² − u₂²`.
    pub omega_density: GridField<f64>,
    /// `ZZ̄ log(u₂²/u₁²) − 3(u₂² − u₁²)`.
    pub tan_identity_residual: GridField<f64>,
}

pub fn kahler_report(data: &TodaChartData) -> KahlerReport {
    let g = data.grid;
    let sq = |k: usize| (data.u1[k] * data.u1[k], data.u2[k] * data.u2[k]);
    let ratio: Vec<f64> = data.u2.iter().zip(&data.u1).map(|(b, a)| 2.0 * (b / a).ln()).collect();
    KahlerReport {
        cos_theta: GridField::build(g, 0, 0.0, |i, j| {
            let (a, b) = sq(g.index(i, j));
            (a - b) / (a + b)
        }),
        omega_density: GridField::build(g, 0, 0.0, |i, j| {
            let (a, b) = sq(g.index(i, j));
            a - b
        }),
        tan_identity_residual: GridField::build(g, 1, 0.0, |i, j| {
            let (a, b) = sq(g.index(i, j));
            zzbar(&ratio, &g, i, j) - 3.0 * (b - a)
        }),
    }
}

#[derive(Debug, Clone)]
pub struct CurvatureReport {
    pub kappa_gamma: GridField<f64>,
    pub kappa_perp: GridField<f64>,
    /// `(κ⊥ − κ_γ) − 2(1 + ‖𝒬/γ₁γ₂‖_γ‖𝒬‖_γ)`.
    pub identity_residual: GridField<f64>,
}

/// Smallest `sin²θ` accepted before a point counts as complex or anti-complex.
const MIN_SIN_SQ: f64 = 1e-12;

pub fn curvature_report(data: &TodaChartData) -> Result<CurvatureReport> {
    let g = data.grid;
    let lam: Vec<f64> = data.u1.iter().zip(&data.u2).map(|(a, b)| a * a + b * b).collect();
    let sin_sq: Vec<f64> = data
        .u1
        .iter()
        .zip(&data.u2)
        .zip(&lam)
        .map(|((a, b), l)| 4.0 * a * a * b * b / (l * l))
        .collect();
    if let Some(k) = sin_sq.iter().position(|s| !(*s > MIN_SIN_SQ)) {
        return Err(Error::Domain(format!("sin θ vanishes at grid index {k}")));
    }
    let log_lam: Vec<f64> = lam.iter().map(|l| l.ln()).collect();
    let log_sin: Vec<f64> = sin_sq.iter().map(|s| s.ln()).collect();
    let kappa_gamma = GridField::build(g, 1, 0.0, |i, j| -2.0 / lam[g.index(i, j)] * zzbar(&log_lam, &g, i, j));
    let kappa_perp = GridField::build(g, 1, 0.0, |i, j| {
        let k = g.index(i, j);
        2.0 / lam[k] * zzbar(&log_sin, &g, i, j) - kappa_gamma.get(i, j).unwrap()
    });
    let identity_residual = GridField::build(g, 1, 0.0, |i, j| {
        let k = g.index(i, j);
        let (a, b, l, q) = (data.u1[k], data.u2[k], lam[k], data.q[k].norm());
        let over = q * l.sqrt() / (2f64.sqrt() * a * a * b * b);
        let cubic = 2.0 * 2f64.sqrt() * q / l.powf(1.5);
        kappa_perp.get(i, j).unwrap() - kappa_gamma.get(i, j).unwrap() - 2.0 * (1.0 + over * cubic)
    });
    Ok(CurvatureReport {
        kappa_gamma,
        kappa_perp,
        identity_residual,
    })
}

/// `‖𝒬‖²_γ = 8|Q|²/(u₁² + u₂²)³` pointwise.
pub fn cubic_norm_sq(data: &TodaChartData) -> GridField<f64> {
    let g = data.grid;
    GridField::build(g, 0, 0.0, |i, j| {
        let k = g.index(i, j);
        let l = data.u1[k] * data.u1[k] + data.u2[k] * data.u2[k];
        8.0 * data.q[k].norm_sqr() / (l * l * l)
    })
}

#[derive(Debug, Clone)]
pub struct GaussTransformMetric {
    /// Coefficient of `|dz|²` in the induced metric of the Gauss transform.
    pub metric: GridField<f64>,
    /// The metric is negative everywhere on the grid.
    pub timelike: bool,
}

/// `m = |Q|²/(u₁²u₂²) − u₂²`.
pub fn gauss_transform_metric(data: &TodaChartData) -> GaussTransformMetric {
    let g = data.grid;
    let metric = GridField::build(g, 0, 0.0, |i, j| {
        let k = g.index(i, j);
        let (a, b) = (data.u1[k] * data.u1[k], data.u2[k] * data.u2[k]);
        data.q[k].norm_sqr() / (a * b) - b
    });
    let timelike = metric.max() < 0.0;
    GaussTransformMetric { metric, timelike }
}

/// `Q ↦ e^{2iψ}Q` with `u₁, u₂` fixed.
pub fn circle_action(data: &TodaChartData, psi: f64) -> TodaChartData {
    let phase = Complex64::from_polar(1.0, 2.0 * psi);
    TodaChartData {
        q: data.q.iter().map(|q| q * phase).collect(),
        ..data.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> ChartGrid {
        ChartGrid::square(0.5, n).unwrap()
    }

    #[test]
    fn fuchsian_residual_is_second_order() {
        // measured on the interior of the coarsest grid
        let inner = |z: Complex64| z.re.abs().max(z.im.abs()) <= 0.45 + 1e-12;
        let e: Vec<f64> = [21, 41, 81]
            .iter()
            .map(|&n| {
                let (r1, r2) = toda_residuals(&TodaChartData::r_fuchsian(grid(n)).unwrap());
                r1.max_abs_where(inner).max(r2.max_abs_where(inner))
            })
            .collect();
        for w in e.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.8, "{e:?}");
        }
    }

    #[test]
    fn constants_do_not_solve() {
        let (s, q) = (1.3f64, Complex64::new(0.2, -0.4));
        let d = TodaChartData::constant(grid(11), s, s, q).unwrap();
        let (r1, _) = toda_residuals(&d);
        let expected = -(s * s + q.norm_sqr() / s.powi(4));
        assert!(r1.interior().all(|(_, _, v)| (v - expected).abs() < 1e-12));
        assert!(flatness_residual(&assemble_connection(&d)).min() > 0.1);
    }

    #[test]
    fn connection_entries() {
        let d = TodaChartData::constant(grid(9), 1.5, 0.5, Complex64::new(0.3, 0.0)).unwrap();
        let conn = assemble_connection(&d);
        let a = conn.a_z.get(4, 4).unwrap();
        let b = conn.a_zbar.get(4, 4).unwrap();
        assert_eq!(a[(0, 2)], c(1.5));
        assert!((a[(1, 0)] - c(0.4)).norm() < 1e-15);
        assert_eq!(b[(1, 2)], c(0.5));
        assert_eq!(b[(2, 0)], c(1.5));
        assert!((b[(0, 1)] + c(0.4)).norm() < 1e-15);
        assert_eq!(conn.reality_defect(), 0.0);
    }

    #[test]
    fn lagrangian_trace_vanishes() {
        let conn = assemble_connection(&TodaChartData::mobius_fuchsian(grid(17), Complex64::new(0.2, 0.1)).unwrap());
        assert!(conn.a_z.interior().all(|(_, _, m)| m.trace().norm() < 1e-14));
    }

    #[test]
    fn non_positive_data_rejected() {
        let g = grid(7);
        assert!(matches!(
            TodaChartData::constant(g, 1.0, 0.0, c(0.0)),
            Err(Error::Domain(_))
        ));
        assert!(TodaChartData::new(g, vec![1.0; 3], vec![1.0; 49], vec![c(0.0); 49]).is_err());
        assert!(TodaChartData::r_fuchsian(ChartGrid::square(0.8, 7).unwrap()).is_err());
    }

    #[test]
    fn json_round_trip() {
        let d = TodaChartData::constant(grid(6), 1.0, 2.0, Complex64::new(0.1, 0.2)).unwrap();
        let text = d.to_json().unwrap();
        assert!(text.contains("\"Q_re\"") && text.contains("\"nx\":6"));
        assert_eq!(TodaChartData::from_json(&text).unwrap(), d);
    }

    #[test]
    fn zero_connection_has_trivial_holonomy() {
        let conn = ConnectionPair::zero(grid(9));
        let h = holonomy(&conn, &circle_loop(c(0.0), 0.2, 16), 200).unwrap();
        assert_eq!(h.matrix, CMatrix3::identity());
        assert_eq!(h.step_count, 200);
    }

    #[test]
    fn holonomy_rejects_few_steps_and_outside_loops() {
        let conn = ConnectionPair::zero(grid(9));
        assert!(holonomy(&conn, &circle_loop(c(0.0), 0.2, 8), 50).is_err());
        let d = TodaChartData::r_fuchsian(grid(9)).unwrap();
        let err = holonomy(&assemble_connection(&d), &circle_loop(c(0.0), 0.49, 8), 200).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn gauss_transform_cases() {
        let d = TodaChartData::r_fuchsian(grid(9)).unwrap();
        let m = gauss_transform_metric(&d);
        assert!(m.timelike);
        assert!(m.metric.interior().all(|(i, j, v)| (v + d.u2[d.grid.index(i, j)].powi(2)).abs() < 1e-14));
        // |Q| = u₁u₂²: degenerate
        let d = TodaChartData::constant(grid(7), 1.2, 0.8, c(1.2 * 0.64)).unwrap();
        let m = gauss_transform_metric(&d);
        assert!(m.metric.max_abs() < 1e-14);
    }

    #[test]
    fn circle_action_periodicity() {
        let d = TodaChartData::constant(grid(7), 1.0, 1.0, Complex64::new(0.3, 0.1)).unwrap();
        assert_eq!(circle_action(&d, 0.0), d);
        let back = circle_action(&d, std::f64::consts::PI);
        assert!(back.q.iter().zip(&d.q).all(|(a, b)| (a - b).norm() < 1e-15));
    }

    #[test]
    fn kahler_on_lagrangian() {
        let d = TodaChartData::r_fuchsian(grid(11)).unwrap();
        let k = kahler_report(&d);
        assert_eq!(k.cos_theta.max_abs(), 0.0);
        assert_eq!(k.omega_density.max_abs(), 0.0);
    }
}
