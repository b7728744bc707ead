//! Independent reference computations used by the check suite and tests.
//!
//! Nothing here shares code with the production quadrature or basis: the
//! triangle rules are collapsed Gauss-Legendre products, the P2 and P1 bases
//! are recovered by inverting Vandermonde matrices in physical coordinates,
//! and matrices are accumulated densely.

use crate::assembly::Discretization;
use crate::fespace::{PressureSpace, VelocitySpace};
use crate::geometry::{LevelSet, Side};
use crate::manufactured::{exact_pressure, exact_velocity};

pub type Dense = Vec<Vec<f64>>;

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Collapsed product rule on a physical triangle: `(point, weight)` pairs,
/// exact for polynomials of degree `2n - 2`.
pub fn triangle_points(tri: &[[f64; 2]; 3], n: usize) -> Vec<([f64; 2], f64)> {
    let (x, w) = gauss_legendre(n);
    let [a, b, c] = *tri;
    let jac = ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])).abs();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let s = x[i];
            let t = x[j] * (1.0 - s);
            let p = [a[0] + s * (b[0] - a[0]) + t * (c[0] - a[0]), a[1] + s * (b[1] - a[1]) + t * (c[1] - a[1])];
            out.push((p, w[i] * w[j] * (1.0 - s) * jac));
        }
    }
    out
}

pub fn integrate_triangle(tri: &[[f64; 2]; 3], n: usize, f: impl Fn([f64; 2]) -> f64) -> f64 {
    triangle_points(tri, n).into_iter().map(|(p, w)| w * f(p)).sum()
}

/// Solves a small dense system by Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Dense, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).expect("nonempty");
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let m = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= m * a[k][j];
            }
            b[i] -= m * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

/// Nodal basis of a polynomial space given by monomial exponents, built from
/// node positions; monomials are taken about `center` for conditioning.
#[derive(Debug, Clone)]
pub struct NodalBasis {
    exponents: Vec<(i32, i32)>,
    center: [f64; 2],
    /// `coeffs[i][m]`: coefficient of monomial `m` in basis function `i`.
    coeffs: Dense,
}

impl NodalBasis {
    pub fn new(exponents: &[(i32, i32)], nodes: &[[f64; 2]]) -> Self {
        let n = nodes.len();
        assert_eq!(n, exponents.len());
        let center = [nodes.iter().map(|p| p[0]).sum::<f64>() / n as f64, nodes.iter().map(|p| p[1]).sum::<f64>() / n as f64];
        let vander: Dense = nodes
            .iter()
            .map(|p| exponents.iter().map(|&(a, b)| (p[0] - center[0]).powi(a) * (p[1] - center[1]).powi(b)).collect())
            .collect();
        // Column i of the inverse Vandermonde holds basis function i.
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                dense_solve(vander.clone(), e)
            })
            .collect();
        Self { exponents: exponents.to_vec(), center, coeffs: cols }
    }

    /// Quadratic Lagrange basis on the three vertices and three edge midpoints.
    pub fn quadratic(nodes: &[[f64; 2]; 6]) -> Self {
        Self::new(&[(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)], nodes)
    }

    pub fn linear(nodes: &[[f64; 2]; 3]) -> Self {
        Self::new(&[(0, 0), (1, 0), (0, 1)], nodes)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn value(&self, i: usize, p: [f64; 2]) -> f64 {
        let (x, y) = (p[0] - self.center[0], p[1] - self.center[1]);
        self.exponents.iter().zip(&self.coeffs[i]).map(|(&(a, b), c)| c * x.powi(a) * y.powi(b)).sum()
    }

    pub fn gradient(&self, i: usize, p: [f64; 2]) -> [f64; 2] {
        let (x, y) = (p[0] - self.center[0], p[1] - self.center[1]);
        let mut g = [0.0; 2];
        for (&(a, b), c) in self.exponents.iter().zip(&self.coeffs[i]) {
            if a > 0 {
                g[0] += c * a as f64 * x.powi(a - 1) * y.powi(b);
            }
            if b > 0 {
                g[1] += c * b as f64 * x.powi(a) * y.powi(b - 1);
            }
        }
        g
    }
}

fn element_basis(space: &VelocitySpace<f64>, t: usize) -> NodalBasis {
    let nodes = space.element_nodes[t].map(|k| space.node_coords[k]);
    NodalBasis::quadratic(&nodes)
}

const ORDER: usize = 8;

/// Dense velocity-velocity matrix from a per-point kernel `k(basis, p, i, j)`.
fn dense_vv(space: &VelocitySpace<f64>, pieces: impl Fn(usize) -> Vec<[[f64; 2]; 3]>, kernel: impl Fn(&NodalBasis, [f64; 2], usize, usize, usize) -> f64) -> Dense {
    let n = space.n_dofs();
    let mut m = vec![vec![0.0; n]; n];
    for t in 0..space.n_elements() {
        let basis = element_basis(space, t);
        let nodes = space.element_nodes[t];
        for tri in pieces(t) {
            for (p, w) in triangle_points(&tri, ORDER) {
                for c in 0..2 {
                    for i in 0..6 {
                        for j in 0..6 {
                            m[space.dof(c, nodes[i])][space.dof(c, nodes[j])] += w * kernel(&basis, p, c, i, j);
                        }
                    }
                }
            }
        }
    }
    m
}

fn whole(space: &VelocitySpace<f64>) -> impl Fn(usize) -> Vec<[[f64; 2]; 3]> + '_ {
    |t| vec![space.element_maps[t].vertices]
}

pub fn dense_mass(space: &VelocitySpace<f64>) -> Dense {
    dense_vv(space, whole(space), |b, p, _, i, j| b.value(i, p) * b.value(j, p))
}

pub fn dense_viscous(space: &VelocitySpace<f64>, mu: f64) -> Dense {
    dense_vv(space, whole(space), |b, p, _, i, j| {
        let (gi, gj) = (b.gradient(i, p), b.gradient(j, p));
        mu * (gi[0] * gj[0] + gi[1] * gj[1])
    })
}

/// Convection form for the advecting coefficient vector `w`.
pub fn dense_convection(space: &VelocitySpace<f64>, w: &[f64]) -> Dense {
    let n = space.n_dofs();
    let mut m = vec![vec![0.0; n]; n];
    for t in 0..space.n_elements() {
        let b = element_basis(space, t);
        let nodes = space.element_nodes[t];
        for (p, wq) in triangle_points(&space.element_maps[t].vertices, ORDER) {
            let mut adv = [0.0; 2];
            for k in 0..6 {
                let phi = b.value(k, p);
                adv[0] += w[space.dof(0, nodes[k])] * phi;
                adv[1] += w[space.dof(1, nodes[k])] * phi;
            }
            for c in 0..2 {
                for i in 0..6 {
                    for j in 0..6 {
                        let g = b.gradient(j, p);
                        m[space.dof(c, nodes[i])][space.dof(c, nodes[j])] += wq * (adv[0] * g[0] + adv[1] * g[1]) * b.value(i, p);
                    }
                }
            }
        }
    }
    m
}

/// Mass form restricted to `D1`, integrated over the same interface pieces
/// as the production code.
pub fn dense_penalty_mass<L: LevelSet<f64>>(disc: &Discretization<f64, L>) -> Dense {
    dense_vv(&disc.velocity, |t| disc.geometry.pieces(&disc.mesh, t, Side::D1), |b, p, _, i, j| b.value(i, p) * b.value(j, p))
}

/// `-int psi_i div phi_j`, pressure rows by velocity columns.
pub fn dense_divergence(space: &VelocitySpace<f64>, pressure: &PressureSpace) -> Dense {
    let mut m = vec![vec![0.0; space.n_dofs()]; pressure.n_dofs()];
    for t in 0..space.n_elements() {
        let b = element_basis(space, t);
        let verts = space.element_maps[t].vertices;
        let q = NodalBasis::linear(&verts);
        let nodes = space.element_nodes[t];
        for (p, w) in triangle_points(&verts, ORDER) {
            for i in 0..3 {
                for j in 0..6 {
                    let g = b.gradient(j, p);
                    let psi = q.value(i, p);
                    m[pressure.dof(t, i)][space.dof(0, nodes[j])] -= w * psi * g[0];
                    m[pressure.dof(t, i)][space.dof(1, nodes[j])] -= w * psi * g[1];
                }
            }
        }
    }
    m
}

/// `max |a - b| / max |a|` over all entries.
pub fn relative_difference(a: &Dense, b: &Dense) -> f64 {
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            diff = diff.max((x - y).abs());
            scale = scale.max(x.abs());
        }
    }
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Fourth-order central difference of a scalar function along `dir`.
pub fn fd_derivative(f: impl Fn([f64; 2]) -> f64, p: [f64; 2], dir: [f64; 2], h: f64) -> f64 {
    let at = |s: f64| f([p[0] + s * dir[0], p[1] + s * dir[1]]);
    (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
}

/// Fourth-order central second derivative along `dir`.
pub fn fd_second_derivative(f: impl Fn([f64; 2]) -> f64, p: [f64; 2], dir: [f64; 2], h: f64) -> f64 {
    let at = |s: f64| f([p[0] + s * dir[0], p[1] + s * dir[1]]);
    (-at(2.0 * h) + 16.0 * at(h) - 30.0 * at(0.0) + 16.0 * at(-h) - at(-2.0 * h)) / (12.0 * h * h)
}

/// Momentum residual `u_t + (u . grad) u - mu lap u + grad p` of the
/// manufactured solution, by finite differences.
pub fn fd_momentum_residual(t: f64, p: [f64; 2], mu: f64) -> [f64; 2] {
    let h = 1e-3;
    let (ex, ey) = ([1.0, 0.0], [0.0, 1.0]);
    let u = exact_velocity(t, p);
    let grad_p = [fd_derivative(exact_pressure, p, ex, h), fd_derivative(exact_pressure, p, ey, h)];
    let mut out = [0.0; 2];
    for c in 0..2 {
        let comp = |q: [f64; 2]| exact_velocity(t, q)[c];
        let dt = {
            let at = |s: f64| exact_velocity(t + s, p)[c];
            (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
        };
        let dx = fd_derivative(comp, p, ex, h);
        let dy = fd_derivative(comp, p, ey, h);
        let lap = fd_second_derivative(comp, p, ex, h) + fd_second_derivative(comp, p, ey, h);
        out[c] = dt + u[0] * dx + u[1] * dy - mu * lap + grad_p[c];
    }
    out
}

/// Divergence of the manufactured velocity by finite differences.
pub fn fd_divergence(t: f64, p: [f64; 2]) -> f64 {
    let h = 1e-3;
    fd_derivative(|q| exact_velocity(t, q)[0], p, [1.0, 0.0], h) + fd_derivative(|q| exact_velocity(t, q)[1], p, [0.0, 1.0], h)
}
