//! Triangulated closed hyperbolic surfaces and their discrete operators.
//!
//! A [`SurfaceMesh`] is a geodesic triangulation of a fundamental domain in the
//! Poincaré disc together with the side pairing that closes it up. Vertices that
//! are glued by the pairing are merged into a single unknown, so every
//! [`ScalarField`] lives on the closed surface rather than on the domain.
//!
//! Sign convention: the stiffness matrix `S` is positive semidefinite and the
//! background Laplace–Beltrami operator is approximated by `Δ ≈ −M⁻¹S`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::disc;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Largest accepted Bolza refinement level (16·4⁸ ≈ 10⁶ triangles).
pub const MAX_REFINEMENT: usize = 8;

/// Angles below this (radians) are rejected as degenerate.
pub const MIN_ANGLE: f64 = 1e-6;

static NEXT_MESH_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    id: u64,
    genus: usize,
    vertices: Vec<Complex64>,
    triangles: Vec<[usize; 3]>,
    identifications: Vec<[usize; 2]>,
    /// Domain vertex → merged unknown.
    class_of: Vec<usize>,
    class_count: usize,
    /// Per triangle, hyperbolic length of the side opposite corner k.
    edge_lengths: Vec<[f64; 3]>,
    /// Per triangle, hyperbolic interior angle at corner k.
    angles: Vec<[f64; 3]>,
    triangle_areas: Vec<f64>,
    vertex_areas: Vec<f64>,
}

/// Serialized mesh layout: `{genus, vertices, triangles, identifications}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MeshDocument {
    pub genus: usize,
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub identifications: Vec<[usize; 2]>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

impl SurfaceMesh {
    /// Assembles a mesh from domain data and validates it.
    pub fn from_parts(
        genus: usize,
        vertices: Vec<Complex64>,
        triangles: Vec<[usize; 3]>,
        identifications: Vec<[usize; 2]>,
    ) -> Result<Self> {
        if genus < 2 {
            return Err(Error::InvalidInput(format!("genus must be ≥ 2, got {genus}")));
        }
        let n = vertices.len();
        if let Some(z) = vertices.iter().find(|z| !(z.norm() < 1.0)) {
            return Err(Error::InvalidInput(format!("vertex {z} is not inside the unit disc")));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= n) {
                return Err(Error::InvalidInput(format!("triangle {t} references a missing vertex")));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::MeshQuality(format!("triangle {t} repeats a vertex")));
            }
        }
        for pair in &identifications {
            if pair.iter().any(|&i| i >= n) {
                return Err(Error::InvalidInput("identification references a missing vertex".into()));
            }
        }

        let mut uf = UnionFind::new(n);
        for &[a, b] in &identifications {
            uf.union(a, b);
        }
        let mut class_index = HashMap::new();
        let mut class_of = Vec::with_capacity(n);
        for i in 0..n {
            let root = uf.find(i);
            let next = class_index.len();
            class_of.push(*class_index.entry(root).or_insert(next));
        }
        let class_count = class_index.len();

        let mut edge_lengths = Vec::with_capacity(triangles.len());
        let mut angles = Vec::with_capacity(triangles.len());
        let mut triangle_areas = Vec::with_capacity(triangles.len());
        let mut vertex_areas = vec![0.0; class_count];
        for (t, tri) in triangles.iter().enumerate() {
            let p = tri.map(|i| vertices[i]);
            let len = [
                disc::distance(p[1], p[2]),
                disc::distance(p[2], p[0]),
                disc::distance(p[0], p[1]),
            ];
            for k in 0..3 {
                let (a, b, c) = (len[k], len[(k + 1) % 3], len[(k + 2) % 3]);
                if !(a < b + c) {
                    return Err(Error::MeshQuality(format!(
                        "triangle {t} violates the triangle inequality"
                    )));
                }
            }
            let ang = [
                disc::angle_opposite(len[0], len[1], len[2]),
                disc::angle_opposite(len[1], len[2], len[0]),
                disc::angle_opposite(len[2], len[0], len[1]),
            ];
            if let Some(a) = ang.iter().find(|&&a| !(a >= MIN_ANGLE)) {
                return Err(Error::MeshQuality(format!("triangle {t} has angle {a:e} rad")));
            }
            let area = disc::heron_area(len[0], len[1], len[2]);
            for &i in tri {
                vertex_areas[class_of[i]] += area / 3.0;
            }
            edge_lengths.push(len);
            angles.push(ang);
            triangle_areas.push(area);
        }

        let mesh = Self {
            id: NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed),
            genus,
            vertices,
            triangles,
            identifications,
            class_of,
            class_count,
            edge_lengths,
            angles,
            triangle_areas,
            vertex_areas,
        };
        let chi = mesh.euler_characteristic();
        let expected = 2 - 2 * genus as i64;
        if chi != expected {
            return Err(Error::InvalidInput(format!(
                "Euler characteristic after identification is {chi}, expected {expected}"
            )));
        }
        Ok(mesh)
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    /// Domain vertices in disc coordinates (before identification).
    pub fn domain_vertices(&self) -> &[Complex64] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn identifications(&self) -> &[[usize; 2]] {
        &self.identifications
    }

    pub fn edge_lengths(&self) -> &[[f64; 3]] {
        &self.edge_lengths
    }

    pub fn angles(&self) -> &[[f64; 3]] {
        &self.angles
    }

    pub fn triangle_areas(&self) -> &[f64] {
        &self.triangle_areas
    }

    /// Number of unknowns on the closed surface.
    pub fn vertex_count(&self) -> usize {
        self.class_count
    }

    /// Merged unknown carrying domain vertex `i`.
    pub fn class_of(&self, domain_vertex: usize) -> usize {
        self.class_of[domain_vertex]
    }

    /// Lumped areas, indexed by unknown.
    pub fn vertex_areas(&self) -> &[f64] {
        &self.vertex_areas
    }

    pub fn total_area(&self) -> f64 {
        self.vertex_areas.iter().sum()
    }

    /// `2π|χ|`, the area of a closed surface of curvature −1 and this genus.
    pub fn expected_area(&self) -> f64 {
        4.0 * PI * (self.genus as f64 - 1.0)
    }

    /// Unknowns that do not lie on the boundary of the fundamental domain.
    pub fn interior_unknowns(&self) -> Vec<usize> {
        let mut glued = vec![false; self.class_count];
        for &[a, b] in &self.identifications {
            glued[self.class_of[a]] = true;
            glued[self.class_of[b]] = true;
        }
        let mut seen = vec![false; self.class_count];
        let mut out = Vec::new();
        for &c in &self.class_of {
            if !glued[c] && !seen[c] {
                seen[c] = true;
                out.push(c);
            }
        }
        out.sort_unstable();
        out
    }

    /// A representative disc position for every unknown.
    pub fn unknown_positions(&self) -> Vec<Complex64> {
        let mut pos = vec![None; self.class_count];
        for (i, &c) in self.class_of.iter().enumerate() {
            if pos[c].is_none() {
                pos[c] = Some(self.vertices[i]);
            }
        }
        pos.into_iter().map(|p| p.unwrap()).collect()
    }

    /// V − E + F of the closed surface. Boundary edges of the domain are glued
    /// in pairs by the side pairing.
    pub fn euler_characteristic(&self) -> i64 {
        let mut edge_use: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *edge_use.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let boundary = edge_use.values().filter(|&&c| c == 1).count();
        let interior = edge_use.len() - boundary;
        let edges = interior + boundary / 2;
        self.class_count as i64 - edges as i64 + self.triangles.len() as i64
    }

    pub fn field(&self, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != self.class_count {
            return Err(Error::MeshMismatch {
                expected: self.class_count,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("field values must be finite".into()));
        }
        Ok(ScalarField {
            mesh_id: self.id,
            values,
        })
    }

    pub fn constant_field(&self, value: f64) -> Result<ScalarField> {
        self.field(vec![value; self.class_count])
    }

    /// Evaluates `f` at each unknown's disc position.
    pub fn field_from_fn(&self, f: impl Fn(Complex64) -> f64) -> Result<ScalarField> {
        self.field(self.unknown_positions().into_iter().map(f).collect())
    }

    pub fn check_field(&self, field: &ScalarField) -> Result<()> {
        if field.mesh_id != self.id || field.values.len() != self.class_count {
            return Err(Error::MeshMismatch {
                expected: self.class_count,
                got: field.values.len(),
            });
        }
        Ok(())
    }

    pub fn to_document(&self) -> MeshDocument {
        MeshDocument {
            genus: self.genus,
            vertices: self.vertices.iter().map(|z| [z.re, z.im]).collect(),
            triangles: self.triangles.clone(),
            identifications: self.identifications.clone(),
        }
    }

    pub fn from_document(doc: MeshDocument) -> Result<Self> {
        Self::from_parts(
            doc.genus,
            doc.vertices.iter().map(|&[x, y]| Complex64::new(x, y)).collect(),
            doc.triangles,
            doc.identifications,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }
}

/// Real values at the unknowns of one particular mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    mesh_id: u64,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Same mesh, new values. Length is checked; finiteness is not.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> ScalarField {
        assert_eq!(values.len(), self.values.len());
        ScalarField {
            mesh_id: self.mesh_id,
            values,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> Result<ScalarField> {
        if other.mesh_id != self.mesh_id {
            return Err(Error::MeshMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    Stiffness,
    Mass,
}

#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub kind: OperatorKind,
    pub matrix: CsrMatrix,
}

impl DiscreteOperator {
    pub fn apply(&self, field: &ScalarField) -> ScalarField {
        field.with_values(self.matrix.matvec(field.values()))
    }
}

/// Cotangent stiffness with hyperbolic angles and lumped mass.
pub fn assemble_operators(mesh: &SurfaceMesh) -> Result<(DiscreteOperator, DiscreteOperator)> {
    let n = mesh.vertex_count();
    let mut entries = Vec::with_capacity(mesh.triangles.len() * 12);
    for (tri, ang) in mesh.triangles.iter().zip(&mesh.angles) {
        if let Some(a) = ang.iter().find(|&&a| a < MIN_ANGLE) {
            return Err(Error::MeshQuality(format!("degenerate angle {a:e} rad")));
        }
        for k in 0..3 {
            let i = mesh.class_of[tri[(k + 1) % 3]];
            let j = mesh.class_of[tri[(k + 2) % 3]];
            let w = 0.5 / ang[k].tan();
            entries.push((i, i, w));
            entries.push((j, j, w));
            entries.push((i, j, -w));
            entries.push((j, i, -w));
        }
    }
    let stiffness = DiscreteOperator {
        kind: OperatorKind::Stiffness,
        matrix: CsrMatrix::from_triplets(n, entries),
    };
    let mass = DiscreteOperator {
        kind: OperatorKind::Mass,
        matrix: CsrMatrix::diagonal_from(&mesh.vertex_areas),
    };
    Ok((stiffness, mass))
}

/// `Σᵢ fᵢ·areaᵢ`.
pub fn integrate(field: &ScalarField, mesh: &SurfaceMesh) -> Result<f64> {
    mesh.check_field(field)?;
    Ok(field
        .values
        .iter()
        .zip(&mesh.vertex_areas)
        .map(|(f, a)| f * a)
        .sum())
}

/// A mesh together with its assembled operators.
#[derive(Debug, Clone)]
pub struct Background {
    pub mesh: SurfaceMesh,
    pub stiffness: DiscreteOperator,
    pub mass: DiscreteOperator,
}

impl Background {
    pub fn new(mesh: SurfaceMesh) -> Result<Self> {
        let (stiffness, mass) = assemble_operators(&mesh)?;
        Ok(Self {
            mesh,
            stiffness,
            mass,
        })
    }

    pub fn bolza(refinement_level: usize) -> Result<Self> {
        Self::new(build_bolza_mesh(refinement_level)?)
    }

    /// Discrete `Δ_μ f = −M⁻¹ S f`.
    pub fn laplacian(&self, field: &ScalarField) -> Result<ScalarField> {
        self.mesh.check_field(field)?;
        let sf = self.stiffness.matrix.matvec(field.values());
        Ok(field.with_values(
            sf.iter()
                .zip(self.mesh.vertex_areas())
                .map(|(s, m)| -s / m)
                .collect(),
        ))
    }
}

/// Regular octagon with angles π/4 and opposite sides glued (the Bolza surface),
/// fanned into 16 triangles and refined `refinement_level` times by geodesic
/// midpoint subdivision.
pub fn build_bolza_mesh(refinement_level: usize) -> Result<SurfaceMesh> {
    if refinement_level > MAX_REFINEMENT {
        return Err(Error::Resource(format!(
            "refinement level {refinement_level} exceeds the limit {MAX_REFINEMENT}"
        )));
    }
    let radius = disc::regular_polygon_radius(8, PI / 4.0);
    let corner = |j: usize| Complex64::from_polar(radius, j as f64 * PI / 4.0 - PI / 8.0);

    // Bit s of `sides[v]` marks vertex v as lying on side s (corners j, j+1 bound side j).
    let mut vertices = vec![Complex64::new(0.0, 0.0)];
    let mut sides: Vec<u8> = vec![0];
    for j in 0..8 {
        vertices.push(corner(j));
        sides.push((1 << j) | (1 << ((j + 7) % 8)));
    }
    for j in 0..8 {
        vertices.push(disc::midpoint(corner(j), corner(j + 1)));
        sides.push(1 << j);
    }
    let mut triangles = Vec::with_capacity(16 << (2 * refinement_level));
    for j in 0..8 {
        let (v0, m, v1) = (1 + j, 9 + j, 1 + (j + 1) % 8);
        triangles.push([0, v0, m]);
        triangles.push([0, m, v1]);
    }

    for _ in 0..refinement_level {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Complex64>, sides: &mut Vec<u8>| {
            *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vertices.push(disc::midpoint(vertices[a], vertices[b]));
                sides.push(sides[a] & sides[b]);
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for &[a, b, c] in &triangles {
            let ab = mid(a, b, &mut vertices, &mut sides);
            let bc = mid(b, c, &mut vertices, &mut sides);
            let ca = mid(c, a, &mut vertices, &mut sides);
            next.push([a, ab, ca]);
            next.push([ab, b, bc]);
            next.push([ca, bc, c]);
            next.push([ab, bc, ca]);
        }
        triangles = next;
        flip_to_delaunay(&vertices, &mut triangles);
    }

    // Side k+4 is carried onto side k by the translation along the diameter
    // through the two side midpoints.
    let inradius = disc::distance(Complex64::new(0.0, 0.0), vertices[9]);
    let mut identifications = Vec::new();
    for k in 0..4 {
        let direction = k as f64 * PI / 4.0;
        let target: Vec<usize> = (0..vertices.len()).filter(|&v| sides[v] & (1 << k) != 0).collect();
        for v in (0..vertices.len()).filter(|&v| sides[v] & (1 << (k + 4)) != 0) {
            let image = disc::translation(direction, 2.0 * inradius, vertices[v]);
            let partner = target
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    (vertices[a] - image)
                        .norm()
                        .partial_cmp(&(vertices[b] - image).norm())
                        .unwrap()
                })
                .filter(|&w| (vertices[w] - image).norm() < 1e-9)
                .ok_or_else(|| Error::Numerical("side pairing found no partner vertex".into()))?;
            identifications.push([partner, v]);
        }
    }
    SurfaceMesh::from_parts(2, vertices, triangles, identifications)
}

/// Flips interior edges whose opposite hyperbolic angles sum past π, so that
/// every interior cotangent weight is non-negative. Edges on the domain
/// boundary are left alone.
fn flip_to_delaunay(vertices: &[Complex64], triangles: &mut [[usize; 3]]) -> usize {
    let angle_at = |tri: &[usize; 3], k: usize| {
        let p = tri.map(|i| vertices[i]);
        let a = disc::distance(p[(k + 1) % 3], p[(k + 2) % 3]);
        let b = disc::distance(p[(k + 2) % 3], p[k]);
        let c = disc::distance(p[k], p[(k + 1) % 3]);
        disc::angle_opposite(a, b, c)
    };
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    let mut edges: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            edges
                .entry(key(tri[(k + 1) % 3], tri[(k + 2) % 3]))
                .or_default()
                .push((t, k));
        }
    }
    let mut stack: Vec<(usize, usize)> = edges
        .iter()
        .filter(|(_, v)| v.len() == 2)
        .map(|(&e, _)| e)
        .collect();
    stack.sort_unstable();
    let budget = 20 * triangles.len();
    let mut flips = 0;
    while let Some(e) = stack.pop() {
        let Some(users) = edges.get(&e) else { continue };
        if users.len() != 2 {
            continue;
        }
        let [(t1, k1), (t2, k2)] = [users[0], users[1]];
        if angle_at(&triangles[t1], k1) + angle_at(&triangles[t2], k2) <= PI + 1e-12 {
            continue;
        }
        if flips == budget {
            break;
        }
        // t1 = (p, a, b) with the edge (a, b) opposite p; t2 holds q opposite (b, a).
        let p = triangles[t1][k1];
        let a = triangles[t1][(k1 + 1) % 3];
        let b = triangles[t1][(k1 + 2) % 3];
        let q = triangles[t2][k2];
        for (t, tri) in [(t1, triangles[t1]), (t2, triangles[t2])] {
            for k in 0..3 {
                let ek = key(tri[(k + 1) % 3], tri[(k + 2) % 3]);
                if let Some(list) = edges.get_mut(&ek) {
                    list.retain(|&(tt, _)| tt != t);
                }
            }
        }
        edges.remove(&e);
        triangles[t1] = [p, a, q];
        triangles[t2] = [q, b, p];
        for t in [t1, t2] {
            let tri = triangles[t];
            for k in 0..3 {
                let ek = key(tri[(k + 1) % 3], tri[(k + 2) % 3]);
                edges.entry(ek).or_default().push((t, k));
                if ek != key(p, q) {
                    stack.push(ek);
                }
            }
        }
        flips += 1;
    }
    flips
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_zero_topology() {
        let mesh = build_bolza_mesh(0).unwrap();
        assert_eq!(mesh.triangles().len(), 16);
        assert_eq!(mesh.euler_characteristic(), -2);
        // centre, one corner class, four midpoint classes
        assert_eq!(mesh.vertex_count(), 6);
    }

    #[test]
    fn triangle_count_grows_by_four() {
        for k in 0..4 {
            let mesh = build_bolza_mesh(k).unwrap();
            assert_eq!(mesh.triangles().len(), 16 * 4usize.pow(k as u32));
            assert_eq!(mesh.euler_characteristic(), -2);
        }
    }

    #[test]
    fn refinement_guard() {
        assert!(matches!(build_bolza_mesh(9), Err(Error::Resource(_))));
    }

    #[test]
    fn level_zero_angles() {
        let mesh = build_bolza_mesh(0).unwrap();
        let mut sum = 0.0;
        for ang in mesh.angles() {
            sum += PI - ang.iter().sum::<f64>();
            let mut a = *ang;
            a.sort_by(|x, y| x.partial_cmp(y).unwrap());
            assert!((a[0] - PI / 8.0).abs() < 1e-12);
            assert!((a[1] - PI / 8.0).abs() < 1e-12);
            assert!((a[2] - PI / 2.0).abs() < 1e-12);
        }
        // angle defect of the geodesic triangulation is exact Gauss–Bonnet
        assert!((sum - 4.0 * PI).abs() < 1e-11);
    }

    #[test]
    fn vertex_and_triangle_areas_agree() {
        let mesh = build_bolza_mesh(3).unwrap();
        let tri: f64 = mesh.triangle_areas().iter().sum();
        assert!((mesh.total_area() - tri).abs() <= 1e-12 * tri);
    }

    #[test]
    fn stiffness_structure() {
        let bg = Background::bolza(2).unwrap();
        let s = &bg.stiffness.matrix;
        assert_eq!(s.asymmetry(), 0.0);
        let ones = vec![1.0; s.dim()];
        let s1 = s.matvec(&ones);
        assert!(s1.iter().all(|v| v.abs() < 1e-12));
        assert!(bg.mass.matrix.diagonal().iter().all(|&m| m > 0.0));
    }

    #[test]
    fn field_checks() {
        let a = build_bolza_mesh(0).unwrap();
        let b = build_bolza_mesh(0).unwrap();
        let f = a.constant_field(1.0).unwrap();
        assert!(matches!(integrate(&f, &b), Err(Error::MeshMismatch { .. })));
        assert!(matches!(a.field(vec![0.0; 3]), Err(Error::MeshMismatch { .. })));
        assert!(a.field(vec![f64::NAN; 6]).is_err());
        assert_eq!(integrate(&a.constant_field(0.0).unwrap(), &a).unwrap(), 0.0);
    }

    #[test]
    fn json_round_trip_preserves_structure() {
        let mesh = build_bolza_mesh(1).unwrap();
        let back = SurfaceMesh::from_json(&mesh.to_json().unwrap()).unwrap();
        assert_eq!(back.vertex_count(), mesh.vertex_count());
        assert_eq!(back.to_document(), mesh.to_document());
        assert_ne!(back.id(), mesh.id());
    }

    #[test]
    fn rejects_wrong_topology() {
        let mesh = build_bolza_mesh(0).unwrap();
        let mut doc = mesh.to_document();
        doc.identifications.clear();
        assert!(matches!(SurfaceMesh::from_document(doc), Err(Error::InvalidInput(_))));
    }
}
