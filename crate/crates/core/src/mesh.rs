//! Closed oriented triangle meshes and surface quadrature.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;

use crate::geom::Vec3;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    /// Outward unit normals per face.
    pub face_normals: Vec<Vec3>,
    pub face_areas: Vec<f64>,
    pub face_centroids: Vec<Vec3>,
}

/// Quadrature rule over each flat face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    Centroid,
    /// Edge midpoints with equal weights (exact for quadratics).
    EdgeMidpoints,
}

impl SurfaceMesh {
    /// Validate a closed, consistently oriented surface and derive per-face
    /// geometry from the vertex winding. A globally inward orientation is
    /// flipped so that the enclosed signed volume is positive.
    pub fn new(vertices: Vec<Vec3>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        for (f, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("face {f} references a missing vertex")));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::InvalidMesh(format!("face {f} repeats a vertex")));
            }
        }
        check_closed_oriented(&triangles)?;
        let volume = signed_volume(&vertices, &triangles);
        if volume < 0.0 {
            for t in triangles.iter_mut() {
                t.swap(1, 2);
            }
        }
        let mut mesh = SurfaceMesh {
            vertices,
            triangles,
            face_normals: Vec::new(),
            face_areas: Vec::new(),
            face_centroids: Vec::new(),
        };
        mesh.recompute_geometry()?;
        Ok(mesh)
    }

    fn recompute_geometry(&mut self) -> Result<()> {
        let n = self.triangles.len();
        self.face_normals = Vec::with_capacity(n);
        self.face_areas = Vec::with_capacity(n);
        self.face_centroids = Vec::with_capacity(n);
        for (f, t) in self.triangles.iter().enumerate() {
            let [a, b, c] = t.map(|v| self.vertices[v]);
            let cr = (b - a).cross(c - a);
            let twice = cr.norm();
            if !(twice > 0.0) || !twice.is_finite() {
                return Err(Error::InvalidMesh(format!("face {f} is degenerate")));
            }
            self.face_normals.push(cr * (1.0 / twice));
            self.face_areas.push(0.5 * twice);
            self.face_centroids.push((a + b + c) * (1.0 / 3.0));
        }
        Ok(())
    }

    /// Replace the per-face normals by an exact surface normal evaluated at
    /// each centroid.
    pub fn with_analytic_normals<F: Fn(Vec3) -> Vec3>(mut self, normal: F) -> Result<Self> {
        for (f, c) in self.face_centroids.iter().enumerate() {
            let n = normal(*c);
            let len = n.norm();
            if !(len > 0.0) {
                return Err(Error::InvalidMesh(format!("zero normal at face {f}")));
            }
            let n = n * (1.0 / len);
            if n.dot(self.face_normals[f]) <= 0.0 {
                return Err(Error::InvalidMesh(format!("analytic normal of face {f} points inward")));
            }
            self.face_normals[f] = n;
        }
        Ok(self)
    }

    pub fn face_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn area(&self) -> f64 {
        self.face_areas.iter().sum()
    }

    pub fn volume(&self) -> f64 {
        signed_volume(&self.vertices, &self.triangles)
    }

    pub fn edge_count(&self) -> usize {
        3 * self.triangles.len() / 2
    }

    pub fn euler_characteristic(&self) -> i64 {
        let used = {
            let mut seen = alloc::vec![false; self.vertices.len()];
            for t in &self.triangles {
                for &v in t {
                    seen[v] = true;
                }
            }
            seen.iter().filter(|&&s| s).count()
        };
        used as i64 - self.edge_count() as i64 + self.triangles.len() as i64
    }

    /// Apply a map to every vertex and rebuild the face geometry.
    pub fn map_vertices<F: Fn(Vec3) -> Vec3>(&self, f: F) -> Result<Self> {
        SurfaceMesh::new(self.vertices.iter().map(|v| f(*v)).collect(), self.triangles.clone())
    }

    /// 1 -> 4 split of every face; `project` places the new edge midpoints.
    pub fn subdivide<F: Fn(Vec3) -> Vec3>(&self, project: F) -> Result<Self> {
        let (vertices, triangles) = split_faces(&self.vertices, &self.triangles, &project);
        SurfaceMesh::new(vertices, triangles)
    }
}

fn split_faces<F: Fn(Vec3) -> Vec3>(
    vertices: &[Vec3],
    triangles: &[[usize; 3]],
    project: &F,
) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let mut verts = vertices.to_vec();
    let mut mids: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut out = Vec::with_capacity(4 * triangles.len());
    let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
        let key = (a.min(b), a.max(b));
        *mids.entry(key).or_insert_with(|| {
            verts.push(project((verts[a] + verts[b]) * 0.5));
            verts.len() - 1
        })
    };
    for &[a, b, c] in triangles {
        let ab = midpoint(a, b, &mut verts);
        let bc = midpoint(b, c, &mut verts);
        let ca = midpoint(c, a, &mut verts);
        out.push([a, ab, ca]);
        out.push([ab, b, bc]);
        out.push([ca, bc, c]);
        out.push([ab, bc, ca]);
    }
    (verts, out)
}

fn check_closed_oriented(triangles: &[[usize; 3]]) -> Result<()> {
    // directed edge -> count
    let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for t in triangles {
        for k in 0..3 {
            *directed.entry((t[k], t[(k + 1) % 3])).or_insert(0) += 1;
        }
    }
    for (&(a, b), &count) in &directed {
        if count > 1 {
            return Err(Error::InvalidMesh(format!(
                "edge ({a}, {b}) is used twice with the same orientation"
            )));
        }
        if !directed.contains_key(&(b, a)) {
            return Err(Error::InvalidMesh(format!("edge ({a}, {b}) has no opposite half-edge")));
        }
    }
    Ok(())
}

fn signed_volume(vertices: &[Vec3], triangles: &[[usize; 3]]) -> f64 {
    triangles
        .iter()
        .map(|t| vertices[t[0]].dot(vertices[t[1]].cross(vertices[t[2]])) / 6.0)
        .sum()
}

/// Icosahedron subdivided `levels` times and projected onto the sphere.
pub fn icosphere(levels: usize, radius: f64) -> Result<SurfaceMesh> {
    if !(radius > 0.0) {
        return Err(Error::invalid("radius", "must be positive"));
    }
    let p = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        (-1.0, p, 0.0),
        (1.0, p, 0.0),
        (-1.0, -p, 0.0),
        (1.0, -p, 0.0),
        (0.0, -1.0, p),
        (0.0, 1.0, p),
        (0.0, -1.0, -p),
        (0.0, 1.0, -p),
        (p, 0.0, -1.0),
        (p, 0.0, 1.0),
        (-p, 0.0, -1.0),
        (-p, 0.0, 1.0),
    ];
    let mut vertices: Vec<Vec3> = raw.iter().map(|&(x, y, z)| Vec3::new(x, y, z).normalized()).collect();
    let mut triangles: Vec<[usize; 3]> = alloc::vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let unit = |v: Vec3| v.normalized();
    for _ in 0..levels {
        let (v, t) = split_faces(&vertices, &triangles, &unit);
        vertices = v;
        triangles = t;
    }
    let vertices = vertices.into_iter().map(|v| v * radius).collect();
    SurfaceMesh::new(vertices, triangles)?.with_analytic_normals(|c| c)
}

/// Ellipsoid with semi-axes `axes`, by scaling an icosphere, with exact
/// normals at the face centroids (projected radially onto the surface).
pub fn ellipsoid(levels: usize, axes: [f64; 3]) -> Result<SurfaceMesh> {
    if axes.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::invalid("axes", "semi-axes must be positive"));
    }
    let sphere = icosphere(levels, 1.0)?;
    let mesh = sphere.map_vertices(|v| Vec3::new(v.x() * axes[0], v.y() * axes[1], v.z() * axes[2]))?;
    mesh.with_analytic_normals(|c| ellipsoid_normal(c, axes))
}

fn ellipsoid_normal(c: Vec3, axes: [f64; 3]) -> Vec3 {
    let [a, b, cc] = axes;
    // radial projection onto the surface, then the gradient of the defining form
    let s = ((c.x() / a).powi(2) + (c.y() / b).powi(2) + (c.z() / cc).powi(2)).sqrt();
    let p = c * (1.0 / s);
    Vec3::new(p.x() / (a * a), p.y() / (b * b), p.z() / (cc * cc))
}

/// `sum f_i area_i` for per-face values.
pub fn surface_integral(mesh: &SurfaceMesh, f: &[f64]) -> Result<f64> {
    if f.len() != mesh.face_count() {
        return Err(Error::ShapeMismatch {
            expected: mesh.face_count(),
            found: f.len(),
        });
    }
    Ok(f.iter().zip(&mesh.face_areas).map(|(v, a)| v * a).sum())
}

/// Integrate `f(x, normal)` with the given rule (face normal at all points).
pub fn surface_integral_fn<F: Fn(Vec3, Vec3) -> f64>(mesh: &SurfaceMesh, rule: Quadrature, f: F) -> f64 {
    let mut total = 0.0;
    for (k, t) in mesh.triangles.iter().enumerate() {
        let n = mesh.face_normals[k];
        let area = mesh.face_areas[k];
        let value = match rule {
            Quadrature::Centroid => f(mesh.face_centroids[k], n),
            Quadrature::EdgeMidpoints => {
                let [a, b, c] = t.map(|v| mesh.vertices[v]);
                (f((a + b) * 0.5, n) + f((b + c) * 0.5, n) + f((c + a) * 0.5, n)) / 3.0
            }
        };
        total += value * area;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn tetra() -> (Vec<Vec3>, Vec<[usize; 3]>) {
        (
            alloc::vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.0, 0.0, 1.0),
            ],
            alloc::vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
        )
    }

    #[test]
    fn tetrahedron_geometry() {
        let (v, t) = tetra();
        let m = SurfaceMesh::new(v, t).unwrap();
        assert!((m.volume() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(m.euler_characteristic(), 2);
        for n in &m.face_normals {
            assert!((n.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inward_orientation_is_flipped() {
        let (v, t) = tetra();
        let flipped: Vec<[usize; 3]> = t.iter().map(|f| [f[0], f[2], f[1]]).collect();
        let m = SurfaceMesh::new(v, flipped).unwrap();
        assert!(m.volume() > 0.0);
    }

    #[test]
    fn open_or_inconsistent_meshes_are_rejected() {
        let (v, mut t) = tetra();
        t.pop();
        assert!(SurfaceMesh::new(v.clone(), t.clone()).is_err());
        let (v, mut t) = tetra();
        t[0] = [0, 1, 2];
        assert!(SurfaceMesh::new(v, t).is_err());
        let (v, mut t) = tetra();
        t[0] = [0, 2, 7];
        assert!(SurfaceMesh::new(v, t).is_err());
    }

    #[test]
    fn icosphere_area_and_topology() {
        let m = icosphere(4, 1.0).unwrap();
        assert_eq!(m.face_count(), 5120);
        assert_eq!(m.euler_characteristic(), 2);
        let area = surface_integral(&m, &alloc::vec![1.0; m.face_count()]).unwrap();
        assert!((area / (4.0 * PI) - 1.0).abs() < 5e-3, "{area}");
        let c = 2.5;
        let scaled = surface_integral(&m, &alloc::vec![c; m.face_count()]).unwrap();
        assert!((scaled - c * m.area()).abs() < 1e-12 * scaled);
    }

    #[test]
    fn mean_square_cosine_on_sphere() {
        let m = icosphere(4, 1.0).unwrap();
        let n = Vec3::new(0.3, -0.5, 0.8).normalized();
        let f: Vec<f64> = m.face_normals.iter().map(|nn| nn.dot(n).powi(2)).collect();
        let v = surface_integral(&m, &f).unwrap();
        assert!((v / (4.0 * PI / 3.0) - 1.0).abs() < 1e-2, "{v}");
    }

    #[test]
    fn refinement_converges_at_second_order() {
        let f = |x: Vec3, _n: Vec3| 1.0 + x.z() * x.z() + 0.5 * x.x();
        // exact: 4 pi + 4 pi / 3
        let exact = 4.0 * PI * (1.0 + 1.0 / 3.0);
        let mut errs = Vec::new();
        let mut m = icosphere(1, 1.0).unwrap();
        for _ in 0..3 {
            errs.push((surface_integral_fn(&m, Quadrature::Centroid, f) - exact).abs());
            m = m.subdivide(|v| v.normalized()).unwrap();
        }
        for w in errs.windows(2) {
            assert!(w[0] / w[1] > 3.5, "{errs:?}");
        }
    }

    #[test]
    fn ellipsoid_volume_and_normals() {
        let m = ellipsoid(4, [2.0, 1.0, 1.0]).unwrap();
        let exact = 4.0 / 3.0 * PI * 2.0;
        assert!((m.volume() / exact - 1.0).abs() < 5e-3);
        for (n, c) in m.face_normals.iter().zip(&m.face_centroids) {
            assert!((n.norm() - 1.0).abs() < 1e-12);
            assert!(n.dot(*c) > 0.0);
        }
    }
}
