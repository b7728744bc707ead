//! Scott-Vogelius pair on an Alfeld-split mesh: continuous piecewise
//! quadratic velocity vanishing on the box boundary, discontinuous piecewise
//! linear pressure.
//!
//! Velocity degrees of freedom are blocked by component: scalar node `k`
//! carries dofs `k` (x-component) and `n_nodes + k` (y-component). Scalar
//! nodes are the mesh vertices followed by the edge midpoints.

use thiserror::Error;

use crate::mesh::Mesh;
use crate::scalar::{from_barycentric, Point, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeError {
    #[error("element {0} is degenerate (zero area)")]
    Degenerate(usize),
}

/// Constant data of the affine map of one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementMap<T> {
    pub vertices: [Point<T>; 3],
    /// Physical gradients of the barycentric coordinates.
    pub grad_lambda: [Point<T>; 3],
    pub area: T,
}

impl<T: Real> ElementMap<T> {
    pub fn new(vertices: [Point<T>; 3]) -> Option<Self> {
        let [p0, p1, p2] = vertices;
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        if det == T::zero() || !det.is_finite() {
            return None;
        }
        let inv = T::one() / det;
        // grad(l_i) is the rotated opposite edge divided by twice the signed area.
        let grad = |a: Point<T>, b: Point<T>| [(a[1] - b[1]) * inv, (b[0] - a[0]) * inv];
        Some(Self {
            vertices,
            grad_lambda: [grad(p1, p2), grad(p2, p0), grad(p0, p1)],
            area: det.abs() * T::lit(0.5),
        })
    }

    pub fn point(&self, bary: [T; 3]) -> Point<T> {
        from_barycentric(&self.vertices, bary)
    }

    /// Barycentric coordinates of a physical point.
    pub fn barycentric(&self, p: Point<T>) -> [T; 3] {
        let d = [p[0] - self.vertices[0][0], p[1] - self.vertices[0][1]];
        let l1 = self.grad_lambda[1][0] * d[0] + self.grad_lambda[1][1] * d[1];
        let l2 = self.grad_lambda[2][0] * d[0] + self.grad_lambda[2][1] * d[1];
        [T::one() - l1 - l2, l1, l2]
    }
}

/// Local edge `k` of a triangle joins local vertices `EDGE_VERTICES[k]`.
pub const EDGE_VERTICES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

/// Lagrange P2 basis values: vertex nodes 0..3, then edge-midpoint nodes 3..6.
#[inline]
pub fn p2_values<T: Real>(l: [T; 3]) -> [T; 6] {
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    [
        l[0] * (two * l[0] - T::one()),
        l[1] * (two * l[1] - T::one()),
        l[2] * (two * l[2] - T::one()),
        four * l[0] * l[1],
        four * l[1] * l[2],
        four * l[2] * l[0],
    ]
}

/// Physical gradients of the P2 basis.
#[inline]
pub fn p2_gradients<T: Real>(l: [T; 3], gl: &[Point<T>; 3]) -> [Point<T>; 6] {
    let four = T::lit(4.0);
    let mut out = [[T::zero(); 2]; 6];
    for i in 0..3 {
        let s = four * l[i] - T::one();
        out[i] = [s * gl[i][0], s * gl[i][1]];
    }
    for (k, [a, b]) in EDGE_VERTICES.iter().copied().enumerate() {
        out[3 + k] = [four * (l[a] * gl[b][0] + l[b] * gl[a][0]), four * (l[a] * gl[b][1] + l[b] * gl[a][1])];
    }
    out
}

/// Discontinuous P1 basis: the barycentric coordinates themselves.
#[inline]
pub fn p1_values<T: Real>(l: [T; 3]) -> [T; 3] {
    l
}

#[derive(Debug, Clone)]
pub struct VelocitySpace<T> {
    pub n_nodes: usize,
    pub node_coords: Vec<Point<T>>,
    /// Scalar nodes of each element: 3 vertices, then the 3 edge midpoints.
    pub element_nodes: Vec<[usize; 6]>,
    pub element_maps: Vec<ElementMap<T>>,
    pub boundary_node: Vec<bool>,
}

impl<T: Real> VelocitySpace<T> {
    pub fn n_dofs(&self) -> usize {
        2 * self.n_nodes
    }

    #[inline]
    pub fn dof(&self, component: usize, node: usize) -> usize {
        component * self.n_nodes + node
    }

    pub fn n_elements(&self) -> usize {
        self.element_nodes.len()
    }

    /// Mask over all dofs, true where the value is constrained to the boundary data.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let mut mask = self.boundary_node.clone();
        mask.extend_from_slice(&self.boundary_node);
        mask
    }

    /// Global dofs of element `t` in the order (component, local node).
    pub fn element_dofs(&self, t: usize) -> [usize; 12] {
        let nodes = &self.element_nodes[t];
        std::array::from_fn(|i| self.dof(i / 6, nodes[i % 6]))
    }

    /// P2 basis values and physical gradients on element `t`.
    pub fn eval_basis(&self, t: usize, bary: [T; 3]) -> ([T; 6], [Point<T>; 6]) {
        let map = &self.element_maps[t];
        (p2_values(bary), p2_gradients(bary, &map.grad_lambda))
    }

    /// Nodal interpolant of a vector field.
    pub fn interpolate(&self, field: impl Fn(Point<T>) -> Point<T>) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_dofs()];
        for (k, &p) in self.node_coords.iter().enumerate() {
            let v = field(p);
            out[k] = v[0];
            out[self.n_nodes + k] = v[1];
        }
        out
    }

    /// Sets every boundary-constrained dof to zero.
    pub fn apply_boundary_mask(&self, coeffs: &mut [T]) {
        for (k, &b) in self.boundary_node.iter().enumerate() {
            if b {
                coeffs[k] = T::zero();
                coeffs[self.n_nodes + k] = T::zero();
            }
        }
    }

    /// Value and gradient (`grad[c] = d u_c`) of a discrete field on element `t`.
    pub fn evaluate(&self, coeffs: &[T], t: usize, bary: [T; 3]) -> (Point<T>, [Point<T>; 2]) {
        let (vals, grads) = self.eval_basis(t, bary);
        let nodes = &self.element_nodes[t];
        let mut u = [T::zero(); 2];
        let mut g = [[T::zero(); 2]; 2];
        for c in 0..2 {
            for i in 0..6 {
                let coef = coeffs[self.dof(c, nodes[i])];
                u[c] += coef * vals[i];
                g[c][0] += coef * grads[i][0];
                g[c][1] += coef * grads[i][1];
            }
        }
        (u, g)
    }

    /// Pointwise divergence on element `t`.
    pub fn divergence(&self, coeffs: &[T], t: usize, bary: [T; 3]) -> T {
        let (_, g) = self.evaluate(coeffs, t, bary);
        g[0][0] + g[1][1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureSpace {
    pub n_elements: usize,
}

impl PressureSpace {
    pub fn n_dofs(&self) -> usize {
        3 * self.n_elements
    }

    #[inline]
    pub fn dof(&self, t: usize, local: usize) -> usize {
        3 * t + local
    }

    /// Value of a pressure field on element `t`.
    pub fn evaluate<T: Real>(&self, coeffs: &[T], t: usize, bary: [T; 3]) -> T {
        (0..3).map(|j| coeffs[self.dof(t, j)] * bary[j]).sum()
    }
}

/// Builds both spaces. The mesh is expected to be Alfeld-split; the spaces
/// are well defined on any conforming mesh but inf-sup stable only on split ones.
pub fn build_spaces<T: Real>(mesh: &Mesh<T>) -> Result<(VelocitySpace<T>, PressureSpace), FeError> {
    let nv = mesh.n_vertices();
    let ne = mesh.n_edges();
    let mut node_coords = mesh.vertices.clone();
    node_coords.extend(mesh.edges.edges.iter().map(|e| e.midpoint));
    let mut boundary_node = mesh.boundary_vertex.clone();
    boundary_node.extend(mesh.edges.edges.iter().map(|e| {
        e.is_boundary() && mesh.boundary_vertex[e.vertices[0]] && mesh.boundary_vertex[e.vertices[1]]
    }));
    let mut element_nodes = Vec::with_capacity(mesh.n_triangles());
    let mut element_maps = Vec::with_capacity(mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let [a, b, c] = mesh.triangles[t];
        let [e0, e1, e2] = mesh.edges.triangle_edges[t];
        element_nodes.push([a, b, c, nv + e0, nv + e1, nv + e2]);
        element_maps.push(ElementMap::new(mesh.triangle_coords(t)).ok_or(FeError::Degenerate(t))?);
    }
    Ok((
        VelocitySpace { n_nodes: nv + ne, node_coords, element_nodes, element_maps, boundary_node },
        PressureSpace { n_elements: mesh.n_triangles() },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bary(rng: &mut impl Rng) -> [f64; 3] {
        let (mut a, mut b): (f64, f64) = (rng.gen(), rng.gen());
        if a + b > 1.0 {
            a = 1.0 - a;
            b = 1.0 - b;
        }
        [1.0 - a - b, a, b]
    }

    fn split(n: usize) -> Mesh<f64> {
        Mesh::build_uniform(n).unwrap().alfeld_split()
    }

    #[test]
    fn n1_dof_counts() {
        let m = split(1);
        let (v, p) = build_spaces(&m).unwrap();
        assert_eq!(v.n_dofs(), 34);
        assert_eq!(p.n_dofs(), 18);
        // Every node on the box boundary is masked, nothing else.
        for (k, &x) in v.node_coords.iter().enumerate() {
            let on_box = x[0].abs() == 1.0 || x[1].abs() == 1.0;
            assert_eq!(v.boundary_node[k], on_box, "node {k} at {x:?}");
        }
        assert_eq!(v.boundary_node.iter().filter(|&&b| b).count(), 8);
    }

    #[test]
    fn n20_dof_count_from_edge_table() {
        let m = split(20);
        let table = crate::mesh::edge_table(&m.vertices, &m.triangles);
        let (v, _) = build_spaces(&m).unwrap();
        assert_eq!(v.n_dofs(), 2 * (m.n_vertices() + table.edges.len()));
    }

    #[test]
    fn nodal_basis() {
        let nodes: [[f64; 3]; 6] =
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];
        for (i, l) in nodes.iter().enumerate() {
            let v = p2_values(*l);
            for (j, &x) in v.iter().enumerate() {
                assert_eq!(x, if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let map = ElementMap::new([[0.1, 0.2], [0.9, 0.3], [0.4, 1.1]]).unwrap();
        for _ in 0..50 {
            let l = random_bary(&mut rng);
            let s: f64 = p2_values(l).iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
            assert!((p1_values(l).iter().sum::<f64>() - 1.0).abs() < 1e-15);
            let g = p2_gradients(l, &map.grad_lambda);
            let gs = g.iter().fold([0.0, 0.0], |acc, x| [acc[0] + x[0], acc[1] + x[1]]);
            assert!(gs[0].abs() < 1e-12 && gs[1].abs() < 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let map = ElementMap::new([[-0.3, 0.1], [0.5, -0.2], [0.2, 0.7]]).unwrap();
        let step = 1e-6;
        for _ in 0..20 {
            let l = random_bary(&mut rng);
            let p = map.point(l);
            let grads = p2_gradients(l, &map.grad_lambda);
            for d in 0..2 {
                let mut pp = p;
                let mut pm = p;
                pp[d] += step;
                pm[d] -= step;
                let vp = p2_values(map.barycentric(pp));
                let vm = p2_values(map.barycentric(pm));
                for i in 0..6 {
                    let fd = (vp[i] - vm[i]) / (2.0 * step);
                    assert!((fd - grads[i][d]).abs() < 1e-6, "basis {i} dir {d}: {fd} vs {}", grads[i][d]);
                }
            }
        }
    }

    #[test]
    fn degenerate_element_rejected() {
        assert!(ElementMap::new([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).is_none());
        let mut m = split(1);
        m.vertices[4] = m.vertices[0];
        assert!(matches!(build_spaces(&m), Err(FeError::Degenerate(_))));
    }

    #[test]
    fn constant_interpolation() {
        let m = split(3);
        let (v, _) = build_spaces(&m).unwrap();
        let coeffs = v.interpolate(|_| [2.5, -1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let t = rng.gen_range(0..v.n_elements());
            let (u, g) = v.evaluate(&coeffs, t, random_bary(&mut rng));
            assert!((u[0] - 2.5).abs() < 1e-13 && (u[1] + 1.0).abs() < 1e-13);
            assert!(g.iter().flatten().all(|x| x.abs() < 1e-11));
        }
    }

    #[test]
    fn quadratic_interpolation_is_exact() {
        let f = |p: Point<f64>| [1.0 + p[0] - 2.0 * p[1] + p[0] * p[0] - 3.0 * p[0] * p[1], p[1] * p[1] + 0.5 * p[0]];
        let m = split(4);
        let (v, _) = build_spaces(&m).unwrap();
        let coeffs = v.interpolate(f);
        let rule = crate::quadrature::TriangleRule::<f64>::with_degree(5).unwrap();
        for t in 0..v.n_elements() {
            for l in &rule.bary {
                let (u, _) = v.evaluate(&coeffs, t, *l);
                let e = f(v.element_maps[t].point(*l));
                assert!((u[0] - e[0]).abs() <= 1e-12 * e[0].abs().max(1.0));
                assert!((u[1] - e[1]).abs() <= 1e-12 * e[1].abs().max(1.0));
            }
        }
    }

    #[test]
    fn divergence_is_elementwise_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = split(3);
        let (v, _) = build_spaces(&m).unwrap();
        let coeffs: Vec<f64> = (0..v.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for t in 0..v.n_elements() {
            let corners: Vec<f64> = (0..3)
                .map(|i| {
                    let mut l = [0.0; 3];
                    l[i] = 1.0;
                    v.divergence(&coeffs, t, l)
                })
                .collect();
            for _ in 0..5 {
                let l = random_bary(&mut rng);
                let linear: f64 = (0..3).map(|i| corners[i] * l[i]).sum();
                let d = v.divergence(&coeffs, t, l);
                assert!((d - linear).abs() <= 1e-12 * corners.iter().fold(1.0f64, |a, x| a.max(x.abs())));
            }
        }
    }

    #[test]
    fn exact_velocity_interpolation_at_half_time() {
        let m = split(20);
        let (v, _) = build_spaces(&m).unwrap();
        let coeffs = v.interpolate(|p| crate::manufactured::exact_velocity(0.5, p));
        // (0.5, 0) is a mesh vertex (index 15 along x, 10 along y).
        let k = 10 * 21 + 15;
        assert_eq!(v.node_coords[k], [0.5, 0.0]);
        let expected = -std::f64::consts::PI * std::f64::consts::FRAC_PI_4.cos();
        assert!(coeffs[k].abs() < 1e-15);
        assert!((coeffs[v.n_nodes + k] - expected).abs() < 1e-12);
        assert!(v.interpolate(|p| crate::manufactured::exact_velocity(0.0, p)).iter().all(|&c| c == 0.0));
    }
}
