//! Structured background triangulation of the box `[-1, 1]^2` and its
//! barycentric (Alfeld) refinement.
//!
//! Triangles are stored counter-clockwise. Local edge `k` of a triangle joins
//! local vertices `k` and `(k + 1) % 3`; the quadratic element places its
//! edge node `3 + k` on the midpoint of that edge.

use std::collections::HashMap;
use std::io::{self, Write};

use thiserror::Error;

use crate::scalar::{cross2, midpoint, signed_area, Point, Real};

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("mesh resolution must be at least 1, got {0}")]
    InvalidResolution(usize),
    #[error("triangle {0} has non-positive signed area")]
    Orientation(usize),
    #[error("edge ({0}, {1}) is shared by {2} triangles")]
    NonConforming(usize, usize, usize),
    #[error("edge ({0}, {1}) has a single triangle but is not on the box boundary")]
    DanglingEdge(usize, usize),
}

/// An undirected edge with its (one or two) incident triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge<T> {
    /// Vertex indices, smaller first.
    pub vertices: [usize; 2],
    pub midpoint: Point<T>,
    pub triangles: [Option<usize>; 2],
}

impl<T> Edge<T> {
    pub fn is_boundary(&self) -> bool {
        self.triangles[1].is_none()
    }

    pub fn incident_count(&self) -> usize {
        self.triangles.iter().flatten().count()
    }
}

/// Unique edges of a triangulation plus the triangle-to-edge map.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeTable<T> {
    pub edges: Vec<Edge<T>>,
    /// `triangle_edges[t][k]` is the edge joining local vertices `k` and `k + 1`.
    pub triangle_edges: Vec<[usize; 3]>,
}

/// Builds the edge table. Edge ids are assigned in order of first appearance
/// when walking triangles and their local edges, so the result is deterministic.
pub fn edge_table<T: Real>(vertices: &[Point<T>], triangles: &[[usize; 3]]) -> EdgeTable<T> {
    let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 2);
    let mut edges: Vec<Edge<T>> = Vec::with_capacity(triangles.len() * 3 / 2 + 1);
    let mut triangle_edges = Vec::with_capacity(triangles.len());
    for (t, tri) in triangles.iter().enumerate() {
        let mut local = [0usize; 3];
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            let id = *lookup.entry(key).or_insert_with(|| {
                edges.push(Edge {
                    vertices: [key.0, key.1],
                    midpoint: midpoint(vertices[key.0], vertices[key.1]),
                    triangles: [None, None],
                });
                edges.len() - 1
            });
            let slots = &mut edges[id].triangles;
            if slots[0].is_none() {
                slots[0] = Some(t);
            } else if slots[1].is_none() {
                slots[1] = Some(t);
            } else {
                // Over-shared edge; recorded by `Mesh::validate` via incident_count.
                slots[1] = Some(usize::MAX);
            }
            local[k] = id;
        }
        triangle_edges.push(local);
    }
    EdgeTable { edges, triangle_edges }
}

/// A conforming triangulation of the box `D = [-1, 1]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<T> {
    pub vertices: Vec<Point<T>>,
    pub triangles: Vec<[usize; 3]>,
    /// True for vertices on `|x| = 1` or `|y| = 1`.
    pub boundary_vertex: Vec<bool>,
    pub edges: EdgeTable<T>,
    /// For a split mesh, the index of the pre-split triangle each child came from.
    pub parent: Option<Vec<usize>>,
    /// Diameter of the pre-split background elements.
    pub h: T,
}

impl<T: Real> Mesh<T> {
    /// `n x n` squares, each cut along its lower-left to upper-right diagonal.
    pub fn build_uniform(n: usize) -> Result<Self, MeshError> {
        if n == 0 {
            return Err(MeshError::InvalidResolution(n));
        }
        let np = n + 1;
        let nf = T::from_usize_lossy(n);
        let mut vertices = Vec::with_capacity(np * np);
        let mut boundary_vertex = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                let x = T::from_usize_lossy(2 * i) / nf - T::one();
                let y = T::from_usize_lossy(2 * j) / nf - T::one();
                vertices.push([x, y]);
                boundary_vertex.push(i == 0 || j == 0 || i == n || j == n);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = j * np + i;
                let v10 = v00 + 1;
                let v01 = v00 + np;
                let v11 = v01 + 1;
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        let edges = edge_table(&vertices, &triangles);
        Ok(Self {
            vertices,
            triangles,
            boundary_vertex,
            edges,
            parent: None,
            h: T::lit(2.0 * std::f64::consts::SQRT_2) / T::from_usize_lossy(n),
        })
    }

    /// Barycentric refinement: every triangle `(a, b, c)` becomes
    /// `(a, b, g)`, `(b, c, g)`, `(c, a, g)` with `g` its barycenter.
    pub fn alfeld_split(&self) -> Self {
        let third = T::one() / T::lit(3.0);
        let mut vertices = self.vertices.clone();
        let mut boundary_vertex = self.boundary_vertex.clone();
        let mut triangles = Vec::with_capacity(3 * self.triangles.len());
        let mut parent = Vec::with_capacity(3 * self.triangles.len());
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
            let g = vertices.len();
            vertices.push([(pa[0] + pb[0] + pc[0]) * third, (pa[1] + pb[1] + pc[1]) * third]);
            boundary_vertex.push(false);
            for child in [[a, b, g], [b, c, g], [c, a, g]] {
                triangles.push(child);
                parent.push(t);
            }
        }
        let edges = edge_table(&vertices, &triangles);
        Self { vertices, triangles, boundary_vertex, edges, parent: Some(parent), h: self.h }
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.edges.len()
    }

    pub fn is_split(&self) -> bool {
        self.parent.is_some()
    }

    pub fn triangle_coords(&self, t: usize) -> [Point<T>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> T {
        signed_area(&self.triangle_coords(t))
    }

    /// Checks orientation and conformity.
    pub fn validate(&self) -> Result<(), MeshError> {
        for t in 0..self.n_triangles() {
            let tri = self.triangle_coords(t);
            if cross2(tri[0], tri[1], tri[2]) <= T::zero() {
                return Err(MeshError::Orientation(t));
            }
        }
        for e in &self.edges.edges {
            let [a, b] = e.vertices;
            let count = e.incident_count();
            let oversubscribed = e.triangles[1] == Some(usize::MAX);
            if oversubscribed || count == 0 {
                return Err(MeshError::NonConforming(a, b, if oversubscribed { 3 } else { count }));
            }
            if count == 1 && !self.edge_on_box_boundary(a, b) {
                return Err(MeshError::DanglingEdge(a, b));
            }
        }
        Ok(())
    }

    fn edge_on_box_boundary(&self, a: usize, b: usize) -> bool {
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        let one = T::one();
        (0..2).any(|d| (pa[d].abs() == one) && pa[d] == pb[d])
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_degrees(&self) -> T {
        let mut min = T::infinity();
        for t in 0..self.n_triangles() {
            let p = self.triangle_coords(t);
            for k in 0..3 {
                let o = p[k];
                let u = [p[(k + 1) % 3][0] - o[0], p[(k + 1) % 3][1] - o[1]];
                let v = [p[(k + 2) % 3][0] - o[0], p[(k + 2) % 3][1] - o[1]];
                let cos = (u[0] * v[0] + u[1] * v[1]) / ((u[0] * u[0] + u[1] * u[1]).sqrt() * (v[0] * v[0] + v[1] * v[1]).sqrt());
                min = min.min(cos.max(-T::one()).min(T::one()).acos());
            }
        }
        min.to_degrees()
    }

    /// Longest edge of each triangle.
    pub fn diameters(&self) -> Vec<T> {
        (0..self.n_triangles())
            .map(|t| {
                let p = self.triangle_coords(t);
                (0..3)
                    .map(|k| {
                        let d = [p[(k + 1) % 3][0] - p[k][0], p[(k + 1) % 3][1] - p[k][1]];
                        (d[0] * d[0] + d[1] * d[1]).sqrt()
                    })
                    .fold(T::zero(), T::max)
            })
            .collect()
    }

    /// Plain-text dump: one `x y` line per vertex, then one `i j k` line per triangle.
    pub fn write_dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        for v in &self.vertices {
            writeln!(out, "{} {}", v[0], v[1])?;
        }
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type M = Mesh<f64>;

    #[test]
    fn n1_counts_and_area() {
        let m = M::build_uniform(1).unwrap();
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_triangles(), 2);
        let area: f64 = (0..2).map(|t| m.area(t)).sum();
        assert_eq!(area, 4.0);
        assert_eq!(m.n_edges(), 5);
        assert_eq!(m.edges.edges.iter().filter(|e| e.is_boundary()).count(), 4);
        m.validate().unwrap();
    }

    #[test]
    fn n2_counts() {
        let m = M::build_uniform(2).unwrap();
        assert_eq!((m.n_vertices(), m.n_triangles()), (9, 8));
    }

    #[test]
    fn zero_resolution_rejected() {
        assert_eq!(M::build_uniform(0), Err(MeshError::InvalidResolution(0)));
    }

    #[test]
    fn split_of_two_triangles() {
        let m = M::build_uniform(1).unwrap();
        let s = m.alfeld_split();
        assert_eq!(s.n_triangles(), 6);
        assert_eq!(s.n_vertices(), 6);
        assert_eq!(s.n_edges(), 11);
        assert_eq!(s.n_vertices() + s.n_triangles() - 1, s.n_edges());
        s.validate().unwrap();
    }

    #[test]
    fn children_tile_parent() {
        let m = M::build_uniform(3).unwrap();
        let s = m.alfeld_split();
        let parent = s.parent.as_ref().unwrap();
        let mut sums = vec![0.0; m.n_triangles()];
        for (c, &p) in parent.iter().enumerate() {
            sums[p] += s.area(c);
        }
        for (t, sum) in sums.iter().enumerate() {
            let a = m.area(t);
            assert!(((sum - a) / a).abs() < 1e-14);
        }
        assert_eq!(s.n_vertices(), m.n_vertices() + m.n_triangles());
    }

    #[test]
    fn interior_edges_have_two_triangles() {
        let s = M::build_uniform(4).unwrap().alfeld_split();
        for e in &s.edges.edges {
            let on_box = s.boundary_vertex[e.vertices[0]] && s.boundary_vertex[e.vertices[1]] && e.is_boundary();
            assert_eq!(e.incident_count(), if on_box { 1 } else { 2 });
        }
    }

    #[test]
    fn shape_regularity_and_quasi_uniformity() {
        let mut ratios = Vec::new();
        for n in [2, 5, 10, 20] {
            let s = M::build_uniform(n).unwrap().alfeld_split();
            assert!(s.min_angle_degrees() >= 10.0, "min angle {}", s.min_angle_degrees());
            let d = s.diameters();
            let max = d.iter().cloned().fold(0.0, f64::max);
            let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
            ratios.push(max / min);
        }
        for r in &ratios {
            assert!((r - ratios[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn h_for_fine_resolution() {
        let m = M::build_uniform(160).unwrap();
        // Leg length 2/160 = 0.0125; diameter is the diagonal.
        assert!((m.h - 0.0125 * std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn construction_is_deterministic() {
        let a = M::build_uniform(7).unwrap().alfeld_split();
        let b = M::build_uniform(7).unwrap().alfeld_split();
        assert_eq!(a, b);
    }

    #[test]
    fn detects_bad_orientation() {
        let mut m = M::build_uniform(1).unwrap();
        m.triangles[0].swap(1, 2);
        assert_eq!(m.validate(), Err(MeshError::Orientation(0)));
    }

    #[test]
    fn dump_format() {
        let m = M::build_uniform(1).unwrap();
        let mut buf = Vec::new();
        m.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], "-1 -1");
        assert_eq!(lines[4], "0 1 3");
    }

    #[test]
    fn single_precision_mesh() {
        let s = Mesh::<f32>::build_uniform(3).unwrap().alfeld_split();
        s.validate().unwrap();
        let area: f32 = (0..s.n_triangles()).map(|t| s.area(t)).sum();
        assert!((area - 4.0).abs() < 1e-5);
    }
}
