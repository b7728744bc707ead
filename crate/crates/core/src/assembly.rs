//! Finite element forms and the per-step saddle point system.
//!
//! Velocity-velocity forms are component diagonal and all share one sparsity
//! pattern (explicit zeros included), so they can be combined value-wise.
//! Element contributions are computed in parallel and accumulated
//! sequentially in element order, which makes the result independent of the
//! thread count.

use rayon::prelude::*;

use crate::error::Error;
use crate::fespace::{build_spaces, p2_gradients, p2_values, PressureSpace, VelocitySpace};
use crate::geometry::{LevelSet, MeshGeometry, Side};
use crate::mesh::Mesh;
use crate::quadrature::TriangleRule;
use crate::scalar::{Point, Real};
use crate::sparse::CsrMatrix;

/// Exactness degree for mass, stiffness, divergence and penalty forms.
pub const FORM_DEGREE: usize = 4;
/// Exactness degree for the convection form (cubic times quadratic).
pub const CONVECTION_DEGREE: usize = 5;
/// Degree of the base rule used for non-polynomial integrands (forcing, errors).
pub const SMOOTH_DEGREE: usize = 6;

/// Mesh, spaces and interface geometry for one background resolution.
#[derive(Debug, Clone)]
pub struct Discretization<T, L> {
    pub mesh: Mesh<T>,
    pub velocity: VelocitySpace<T>,
    pub pressure: PressureSpace,
    pub geometry: MeshGeometry<T, L>,
}

impl<T: Real, L: LevelSet<T>> Discretization<T, L> {
    /// Uniform `n x n` background mesh of the box, Alfeld-split.
    pub fn new(n: usize, levelset: L, cut_depth: usize) -> Result<Self, Error> {
        let mesh = Mesh::build_uniform(n)?.alfeld_split();
        Self::from_mesh(mesh, levelset, cut_depth)
    }

    pub fn from_mesh(mesh: Mesh<T>, levelset: L, cut_depth: usize) -> Result<Self, Error> {
        let (velocity, pressure) = build_spaces(&mesh)?;
        let geometry = MeshGeometry::new(&mesh, levelset, cut_depth)?;
        Ok(Self { mesh, velocity, pressure, geometry })
    }

    pub fn n_elements(&self) -> usize {
        self.mesh.n_triangles()
    }
}

fn rule<T: Real>(degree: usize) -> TriangleRule<T> {
    TriangleRule::with_degree(degree).expect("built-in rule")
}

type Local6<T> = [[T; 6]; 6];

/// Scatters per-element 6x6 scalar matrices into both velocity components.
fn accumulate_vv<T: Real>(space: &VelocitySpace<T>, order: &[usize], locals: &[Local6<T>]) -> CsrMatrix<T> {
    let mut trip = Vec::with_capacity(order.len() * 72);
    for &t in order {
        let nodes = &space.element_nodes[t];
        let local = &locals[t];
        for c in 0..2 {
            for i in 0..6 {
                for j in 0..6 {
                    trip.push((space.dof(c, nodes[i]), space.dof(c, nodes[j]), local[i][j]));
                }
            }
        }
    }
    let n = space.n_dofs();
    CsrMatrix::from_triplets(n, n, &trip)
}

fn natural_order(n: usize) -> Vec<usize> {
    (0..n).collect()
}

fn mass_local<T: Real>(space: &VelocitySpace<T>, t: usize, rule: &TriangleRule<T>) -> Local6<T> {
    let area = space.element_maps[t].area;
    let mut m = [[T::zero(); 6]; 6];
    for (l, &w) in rule.bary.iter().zip(&rule.weights) {
        let n = p2_values(*l);
        let wa = w * area;
        for i in 0..6 {
            for j in 0..6 {
                m[i][j] += wa * n[i] * n[j];
            }
        }
    }
    m
}

/// `int_D phi_j . phi_i`.
pub fn assemble_mass<T: Real>(space: &VelocitySpace<T>) -> CsrMatrix<T> {
    assemble_mass_ordered(space, &natural_order(space.n_elements()))
}

pub(crate) fn assemble_mass_ordered<T: Real>(space: &VelocitySpace<T>, order: &[usize]) -> CsrMatrix<T> {
    let r = rule(FORM_DEGREE);
    let locals: Vec<_> = (0..space.n_elements()).into_par_iter().map(|t| mass_local(space, t, &r)).collect();
    accumulate_vv(space, order, &locals)
}

/// `mu int_D grad phi_j : grad phi_i`, without boundary elimination.
pub fn assemble_viscous<T: Real>(space: &VelocitySpace<T>, mu: T) -> CsrMatrix<T> {
    assemble_viscous_ordered(space, mu, &natural_order(space.n_elements()))
}

pub(crate) fn assemble_viscous_ordered<T: Real>(space: &VelocitySpace<T>, mu: T, order: &[usize]) -> CsrMatrix<T> {
    let r = rule(FORM_DEGREE);
    let locals: Vec<_> = (0..space.n_elements())
        .into_par_iter()
        .map(|t| {
            let map = &space.element_maps[t];
            let mut k = [[T::zero(); 6]; 6];
            for (l, &w) in r.bary.iter().zip(&r.weights) {
                let g = p2_gradients(*l, &map.grad_lambda);
                let wa = w * map.area * mu;
                for i in 0..6 {
                    for j in 0..6 {
                        k[i][j] += wa * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                    }
                }
            }
            k
        })
        .collect();
    accumulate_vv(space, order, &locals)
}

/// `int_D (w . grad phi_j) . phi_i` for a frozen advecting field `w`.
pub fn assemble_convection<T: Real>(space: &VelocitySpace<T>, w: &[T]) -> CsrMatrix<T> {
    assemble_convection_ordered(space, w, &natural_order(space.n_elements()))
}

pub(crate) fn assemble_convection_ordered<T: Real>(space: &VelocitySpace<T>, w: &[T], order: &[usize]) -> CsrMatrix<T> {
    assert_eq!(w.len(), space.n_dofs());
    let r = rule(CONVECTION_DEGREE);
    let locals: Vec<_> = (0..space.n_elements())
        .into_par_iter()
        .map(|t| {
            let map = &space.element_maps[t];
            let nodes = &space.element_nodes[t];
            let mut c = [[T::zero(); 6]; 6];
            for (l, &wq) in r.bary.iter().zip(&r.weights) {
                let n = p2_values(*l);
                let g = p2_gradients(*l, &map.grad_lambda);
                let mut adv = [T::zero(); 2];
                for k in 0..6 {
                    adv[0] += w[space.dof(0, nodes[k])] * n[k];
                    adv[1] += w[space.dof(1, nodes[k])] * n[k];
                }
                let wa = wq * map.area;
                for j in 0..6 {
                    let transport = adv[0] * g[j][0] + adv[1] * g[j][1];
                    for i in 0..6 {
                        c[i][j] += wa * transport * n[i];
                    }
                }
            }
            c
        })
        .collect();
    accumulate_vv(space, order, &locals)
}

/// `int_{D1} phi_j . phi_i` on the cut-cell quadrature of the fictitious part.
pub fn assemble_penalty_mass<T: Real, L: LevelSet<T>>(disc: &Discretization<T, L>) -> CsrMatrix<T> {
    assemble_penalty_mass_ordered(disc, &natural_order(disc.n_elements()))
}

pub(crate) fn assemble_penalty_mass_ordered<T: Real, L: LevelSet<T>>(disc: &Discretization<T, L>, order: &[usize]) -> CsrMatrix<T> {
    let r = rule(FORM_DEGREE);
    let space = &disc.velocity;
    let locals: Vec<_> = (0..space.n_elements())
        .into_par_iter()
        .map(|t| {
            let map = &space.element_maps[t];
            let mut m = [[T::zero(); 6]; 6];
            disc.geometry.for_each_point(&disc.mesh, t, Side::D1, &r, |p, w| {
                let n = p2_values(map.barycentric(p));
                for i in 0..6 {
                    for j in 0..6 {
                        m[i][j] += w * n[i] * n[j];
                    }
                }
            });
            m
        })
        .collect();
    accumulate_vv(space, order, &locals)
}

/// `-int_D psi_i div phi_j`, pressure rows by velocity columns.
pub fn assemble_divergence<T: Real>(space: &VelocitySpace<T>, pressure: &PressureSpace) -> CsrMatrix<T> {
    assemble_divergence_ordered(space, pressure, &natural_order(space.n_elements()))
}

pub(crate) fn assemble_divergence_ordered<T: Real>(space: &VelocitySpace<T>, pressure: &PressureSpace, order: &[usize]) -> CsrMatrix<T> {
    let r = rule(FORM_DEGREE);
    let locals: Vec<[[T; 12]; 3]> = (0..space.n_elements())
        .into_par_iter()
        .map(|t| {
            let map = &space.element_maps[t];
            let mut b = [[T::zero(); 12]; 3];
            for (l, &w) in r.bary.iter().zip(&r.weights) {
                let g = p2_gradients(*l, &map.grad_lambda);
                let wa = w * map.area;
                for i in 0..3 {
                    for j in 0..6 {
                        b[i][j] -= wa * l[i] * g[j][0];
                        b[i][6 + j] -= wa * l[i] * g[j][1];
                    }
                }
            }
            b
        })
        .collect();
    let mut trip = Vec::with_capacity(order.len() * 36);
    for &t in order {
        let dofs = space.element_dofs(t);
        for i in 0..3 {
            for (j, &dof) in dofs.iter().enumerate() {
                trip.push((pressure.dof(t, i), dof, locals[t][i][j]));
            }
        }
    }
    CsrMatrix::from_triplets(pressure.n_dofs(), space.n_dofs(), &trip)
}

/// `int_Omega f . phi_i`; the forcing is extended by zero into `D1`.
pub fn assemble_rhs<T: Real, L: LevelSet<T>>(disc: &Discretization<T, L>, f: impl Fn(Point<T>) -> Point<T> + Sync) -> Vec<T> {
    let r = rule(SMOOTH_DEGREE);
    let space = &disc.velocity;
    let locals: Vec<[T; 12]> = (0..space.n_elements())
        .into_par_iter()
        .map(|t| {
            let map = &space.element_maps[t];
            let mut b = [T::zero(); 12];
            disc.geometry.for_each_point(&disc.mesh, t, Side::Omega, &r, |p, w| {
                let n = p2_values(map.barycentric(p));
                let fv = f(p);
                for i in 0..6 {
                    b[i] += w * fv[0] * n[i];
                    b[6 + i] += w * fv[1] * n[i];
                }
            });
            b
        })
        .collect();
    let mut out = vec![T::zero(); space.n_dofs()];
    for (t, local) in locals.iter().enumerate() {
        for (k, &dof) in space.element_dofs(t).iter().enumerate() {
            out[dof] += local[k];
        }
    }
    out
}

/// `||u||_{L2(D1)}` from the penalty mass matrix.
pub fn l2_norm_d1<T: Real>(u: &[T], penalty_mass: &CsrMatrix<T>) -> T {
    penalty_mass.quadratic_form(u, u).max(T::zero()).sqrt()
}

/// `1 / (eps (norm^beta + delta_reg))` with `0^0 = 1`.
pub fn penalty_factor<T: Real>(norm_d1: T, eps: T, beta: T, delta_reg: T) -> T {
    let damp = if beta == T::zero() { T::one() } else { norm_d1.powf(beta) };
    T::one() / (eps * (damp + delta_reg))
}

/// Penalty coefficient evaluated at the coefficient vector `u`.
pub fn penalty_coefficient<T: Real>(u: &[T], eps: T, beta: T, delta_reg: T, penalty_mass: &CsrMatrix<T>) -> T {
    penalty_factor(l2_norm_d1(u, penalty_mass), eps, beta, delta_reg)
}

/// Assembled block operator and right-hand side of one time step.
///
/// Unknowns are ordered `[velocity | pressure | mean multiplier]`:
/// ```text
/// [ A   B^T  0 ] [u]   [F]
/// [ B   0    m ] [p] = [0]
/// [ 0   m^T  0 ] [l]   [0]
/// ```
/// with Dirichlet rows of `A` replaced by identity rows and the matching
/// columns of `A` and `B` removed.
#[derive(Debug, Clone)]
pub struct SparseSystem<T> {
    pub matrix: CsrMatrix<T>,
    pub rhs: Vec<T>,
    pub n_velocity: usize,
    pub n_pressure: usize,
}

impl<T: Real> SparseSystem<T> {
    pub fn size(&self) -> usize {
        self.rhs.len()
    }

    pub fn velocity<'a>(&self, solution: &'a [T]) -> &'a [T] {
        &solution[..self.n_velocity]
    }

    pub fn pressure<'a>(&self, solution: &'a [T]) -> &'a [T] {
        &solution[self.n_velocity..self.n_velocity + self.n_pressure]
    }
}

/// Time-invariant blocks, assembled once per discretization.
#[derive(Debug, Clone)]
pub struct StokesBlocks<T> {
    pub mass: CsrMatrix<T>,
    /// Unit-viscosity stiffness; the viscous form is `mu * stiffness`.
    pub stiffness: CsrMatrix<T>,
    pub penalty_mass: CsrMatrix<T>,
    pub divergence: CsrMatrix<T>,
    /// `int_D psi_i`, the mean-value functional on the pressure space.
    pub pressure_mean: Vec<T>,
    pub boundary: Vec<bool>,
}

impl<T: Real> StokesBlocks<T> {
    pub fn new<L: LevelSet<T>>(disc: &Discretization<T, L>) -> Self {
        let space = &disc.velocity;
        let pressure_mean = (0..disc.n_elements())
            .flat_map(|t| {
                let a = space.element_maps[t].area / T::lit(3.0);
                [a, a, a]
            })
            .collect();
        Self {
            mass: assemble_mass(space),
            stiffness: assemble_viscous(space, T::one()),
            penalty_mass: assemble_penalty_mass(disc),
            divergence: assemble_divergence(space, &disc.pressure),
            pressure_mean,
            boundary: space.boundary_mask(),
        }
    }

    pub fn n_velocity(&self) -> usize {
        self.mass.nrows()
    }

    pub fn n_pressure(&self) -> usize {
        self.divergence.nrows()
    }

    /// `mass_coeff M + mu K + C + sigma M1`, before boundary elimination.
    pub fn velocity_block(&self, mass_coeff: T, mu: T, convection: Option<&CsrMatrix<T>>, sigma: T) -> CsrMatrix<T> {
        let mut a = self.stiffness.clone();
        a.scale(mu);
        a.add_scaled(mass_coeff, &self.mass);
        if let Some(c) = convection {
            a.add_scaled(T::one(), c);
        }
        a.add_scaled(sigma, &self.penalty_mass);
        a
    }

    /// Bordered saddle point system for a velocity block and load vector.
    pub fn system(&self, velocity_block: &CsrMatrix<T>, load: &[T]) -> SparseSystem<T> {
        let nv = self.n_velocity();
        let np = self.n_pressure();
        let n = nv + np + 1;
        let mut trip = Vec::with_capacity(velocity_block.nnz() + 2 * self.divergence.nnz() + 2 * np);
        for i in 0..nv {
            if self.boundary[i] {
                trip.push((i, i, T::one()));
                continue;
            }
            for (j, v) in velocity_block.row(i) {
                if !self.boundary[j] {
                    trip.push((i, j, v));
                }
            }
        }
        for p in 0..np {
            for (j, v) in self.divergence.row(p) {
                if !self.boundary[j] {
                    trip.push((nv + p, j, v));
                    trip.push((j, nv + p, v));
                }
            }
            trip.push((nv + p, nv + np, self.pressure_mean[p]));
            trip.push((nv + np, nv + p, self.pressure_mean[p]));
        }
        let mut rhs = vec![T::zero(); n];
        for i in 0..nv {
            if !self.boundary[i] {
                rhs[i] = load[i];
            }
        }
        SparseSystem { matrix: CsrMatrix::from_triplets(n, n, &trip), rhs, n_velocity: nv, n_pressure: np }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Disk;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disc(n: usize) -> Discretization<f64, Disk<f64>> {
        Discretization::new(n, Disk::default(), 4).unwrap()
    }

    #[test]
    fn penalty_factor_examples() {
        let v: f64 = penalty_factor(3.7, 1e-3, 0.0, 1e-9);
        assert!((v - 1.0 / (1e-3 * (1.0 + 1e-9))).abs() < 1e-9);
        assert!((penalty_factor(0.0f64, 1e-3, 0.5, 1e-9) - 1e12).abs() < 1e-3);
        assert!((penalty_factor(4.0f64, 1e-2, 0.5, 1e-9) - 1.0 / (1e-2 * (2.0 + 1e-9))).abs() < 1e-12);
        assert!((penalty_factor(4.0f64, 1e-2, 0.5, 1e-9) - 50.0).abs() < 1e-6);
    }

    #[test]
    fn viscous_symmetric_positive() {
        let d = disc(3);
        let k = assemble_viscous(&d.velocity, 1.3);
        assert!(k.asymmetry() <= 1e-12 * k.max_abs());
        let mask = d.velocity.boundary_mask();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let v: Vec<f64> = mask.iter().map(|&b| if b { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect();
            assert!(k.quadratic_form(&v, &v) > 0.0);
        }
    }

    #[test]
    fn constant_pressure_annihilates_admissible_velocity() {
        let d = disc(3);
        let b = assemble_divergence(&d.velocity, &d.pressure);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut v: Vec<f64> = (0..d.velocity.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        d.velocity.apply_boundary_mask(&mut v);
        let ones = vec![1.0; d.pressure.n_dofs()];
        let bv = b.mul_vec(&v);
        let s: f64 = ones.iter().zip(&bv).map(|(a, b)| a * b).sum();
        assert!(s.abs() < 1e-12, "{s}");
    }

    #[test]
    fn rigid_rotation_is_discretely_solenoidal() {
        let d = disc(2);
        let b = assemble_divergence(&d.velocity, &d.pressure);
        let v = d.velocity.interpolate(|p| [-p[1], p[0]]);
        assert!(b.mul_vec(&v).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn convection_of_zero_field_vanishes() {
        let d = disc(2);
        let c = assemble_convection(&d.velocity, &vec![0.0; d.velocity.n_dofs()]);
        assert_eq!(c.max_abs(), 0.0);
        assert!(c.same_pattern(&assemble_mass(&d.velocity)));
    }

    #[test]
    fn penalty_mass_bounded_by_full_mass() {
        let d = disc(4);
        let m = assemble_mass(&d.velocity);
        let m1 = assemble_penalty_mass(&d);
        assert!(m1.asymmetry() <= 1e-15 * m1.max_abs() && m.asymmetry() <= 1e-15 * m.max_abs());
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let v: Vec<f64> = (0..d.velocity.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let q1 = m1.quadratic_form(&v, &v);
            assert!(q1 >= 0.0);
            assert!(q1 <= m.quadratic_form(&v, &v));
        }
    }

    #[test]
    fn penalty_mass_of_constant_field_is_d1_area() {
        let d = disc(6);
        let m1 = assemble_penalty_mass(&d);
        let v = d.velocity.interpolate(|_| [1.0, 0.0]);
        let area = d.geometry.side_area(&d.mesh, Side::D1);
        assert!((m1.quadratic_form(&v, &v) - area).abs() < 1e-12);
    }

    #[test]
    fn rhs_zero_forcing_and_d1_support() {
        let d = disc(4);
        assert!(assemble_rhs(&d, |_| [0.0, 0.0]).iter().all(|&x| x == 0.0));
        let b = assemble_rhs(&d, |p| crate::manufactured::forcing(0.0, p, 1.0));
        assert!(b.iter().any(|&x| x.abs() > 1e-3));
        // Nodes whose whole support lies in D1 get nothing.
        let mut supported_in_omega = vec![false; d.velocity.n_nodes];
        for t in 0..d.n_elements() {
            if d.geometry.classes[t] != crate::geometry::ElementClass::Outside {
                for &k in &d.velocity.element_nodes[t] {
                    supported_in_omega[k] = true;
                }
            }
        }
        let mut checked = 0;
        for k in 0..d.velocity.n_nodes {
            if !supported_in_omega[k] {
                assert_eq!(b[k], 0.0);
                assert_eq!(b[d.velocity.n_nodes + k], 0.0);
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn permuted_assembly_agrees() {
        let d = disc(3);
        let mut order: Vec<usize> = (0..d.n_elements()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let w: Vec<f64> = (0..d.velocity.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pairs = [
            (assemble_mass(&d.velocity), assemble_mass_ordered(&d.velocity, &order)),
            (assemble_viscous(&d.velocity, 1.0), assemble_viscous_ordered(&d.velocity, 1.0, &order)),
            (assemble_convection(&d.velocity, &w), assemble_convection_ordered(&d.velocity, &w, &order)),
            (assemble_penalty_mass(&d), assemble_penalty_mass_ordered(&d, &order)),
            (
                assemble_divergence(&d.velocity, &d.pressure),
                assemble_divergence_ordered(&d.velocity, &d.pressure, &order),
            ),
        ];
        for (a, b) in &pairs {
            assert!(a.same_pattern(b));
            assert!(crate::sparse::max_abs_diff(a, b) <= 1e-12 * a.max_abs());
        }
    }

    #[test]
    fn system_layout() {
        let d = disc(2);
        let blocks = StokesBlocks::new(&d);
        let a = blocks.velocity_block(10.0, 1.0, None, 5.0);
        let load: Vec<f64> = (0..blocks.n_velocity()).map(|i| i as f64).collect();
        let sys = blocks.system(&a, &load);
        assert_eq!(sys.size(), d.velocity.n_dofs() + d.pressure.n_dofs() + 1);
        for (i, &b) in blocks.boundary.iter().enumerate() {
            if b {
                assert_eq!(sys.rhs[i], 0.0);
                assert_eq!(sys.matrix.row(i).collect::<Vec<_>>(), vec![(i, 1.0)]);
            } else {
                assert_eq!(sys.rhs[i], i as f64);
            }
        }
        let mean: f64 = blocks.pressure_mean.iter().sum();
        assert!((mean - 4.0).abs() < 1e-14);
    }

    #[test]
    fn generic_over_f32() {
        let d: Discretization<f32, Disk<f32>> = Discretization::new(2, Disk::default(), 3).unwrap();
        let m = assemble_mass(&d.velocity);
        let v = d.velocity.interpolate(|_| [1.0, 1.0]);
        assert!((m.quadratic_form(&v, &v) - 8.0).abs() < 1e-4);
    }
}
