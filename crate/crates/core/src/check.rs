//! Invariant suite behind the `check` command.
//!
//! Every check compares production code against an independent reference or
//! an exact identity and reports the worst deviation it saw.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{damping_monotone, rate_exponent};
use crate::assembly::{
    assemble_convection, assemble_divergence, assemble_mass, assemble_penalty_mass, assemble_viscous, Discretization,
};
use crate::fespace::p2_values;
use crate::geometry::{Disk, ElementClass, Side, DEFAULT_BASE_ORDER, DEFAULT_CUT_DEPTH};
use crate::manufactured::{exact_velocity, forcing};
use crate::mesh::Mesh;
use crate::oracle::{self, NodalBasis};
use crate::sparse::CsrMatrix;

/// Tolerances of the individual checks.
pub mod tol {
    pub const PARTITION: f64 = 1e-12;
    pub const AREA: f64 = 1e-4;
    pub const BASIS: f64 = 1e-12;
    pub const ASSEMBLY: f64 = 1e-10;
    pub const EXACT_DIVERGENCE: f64 = 1e-6;
    pub const EXACT_TRACE: f64 = 1e-12;
    pub const FORCING: f64 = 1e-5;
    pub const DAMPING: f64 = -1e-15;
    pub const RATE: f64 = 1e-12;
    pub const MIN_ANGLE_DEGREES: f64 = 10.0;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CheckOptions {
    /// Fault injection: scale one cut-cell quadrature weight so that the
    /// partition check must fail.
    pub perturb_quadrature_weight: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<String, String>) -> CheckOutcome {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    CheckOutcome { name, passed, detail, seconds: start.elapsed().as_secs_f64() }
}

fn verdict(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub fn run_checks(opts: CheckOptions) -> Vec<CheckOutcome> {
    vec![
        timed("mesh", check_mesh),
        timed("geometry partition", || {
            let r = geometry_report(opts);
            verdict(r.passed(), r.summary())
        }),
        timed("p2 basis", check_basis),
        timed("assembly oracles", || {
            let r = assembly_oracle_deviations();
            let worst = r.iter().map(|(_, d)| *d).fold(0.0, f64::max);
            let detail = r.iter().map(|(n, d)| format!("{n} {d:.1e}")).collect::<Vec<_>>().join(", ");
            verdict(worst <= tol::ASSEMBLY, detail)
        }),
        timed("manufactured solution", || {
            let m = manufactured_certificates();
            verdict(m.passed(), m.summary())
        }),
        timed("damping monotonicity", || {
            let worst = damping_sweep(100_000, 7);
            verdict(worst >= tol::DAMPING, format!("min over 1e5 samples {worst:.3e}"))
        }),
        timed("rate exponent", || {
            let err = rate_exponent_deviation();
            verdict(err <= tol::RATE, format!("max deviation {err:.1e}"))
        }),
    ]
}

fn check_mesh() -> Result<String, String> {
    let mesh = Mesh::<f64>::build_uniform(20).map_err(|e| e.to_string())?.alfeld_split();
    mesh.validate().map_err(|e| e.to_string())?;
    let euler = mesh.n_vertices() as i64 - mesh.n_edges() as i64 + mesh.n_triangles() as i64;
    let angle = mesh.min_angle_degrees();
    verdict(euler == 1 && angle >= tol::MIN_ANGLE_DEGREES, format!("V - E + F = {euler}, min angle {angle:.2} deg"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryReport {
    pub worst_partition: f64,
    pub area_omega: f64,
    pub area_d1: f64,
}

impl GeometryReport {
    pub fn area_errors(&self) -> (f64, f64) {
        ((self.area_omega - PI / 2.0).abs(), (self.area_d1 - (4.0 - PI / 2.0)).abs())
    }

    pub fn passed(&self) -> bool {
        let (a, b) = self.area_errors();
        self.worst_partition <= tol::PARTITION && a <= tol::AREA && b <= tol::AREA
    }

    pub fn summary(&self) -> String {
        let (a, b) = self.area_errors();
        format!("partition {:.1e}, |area(Omega) - pi/2| {a:.1e}, |area(D1) - (4 - pi/2)| {b:.1e}", self.worst_partition)
    }
}

/// Partition and area properties of the cut quadrature at the default depth
/// on the `n = 20` mesh.
pub fn geometry_report(opts: CheckOptions) -> GeometryReport {
    let mesh = Mesh::<f64>::build_uniform(20).expect("valid").alfeld_split();
    let disc = Discretization::from_mesh(mesh, Disk::default(), DEFAULT_CUT_DEPTH).expect("valid");
    let mut injected = !opts.perturb_quadrature_weight;
    let (mut worst, mut omega, mut d1) = (0.0f64, 0.0, 0.0);
    for t in 0..disc.n_elements() {
        let mut inside = disc.geometry.rule(&disc.mesh, t, Side::Omega, DEFAULT_BASE_ORDER).expect("supported order");
        let outside = disc.geometry.rule(&disc.mesh, t, Side::D1, DEFAULT_BASE_ORDER).expect("supported order");
        if !injected && disc.geometry.classes[t] == ElementClass::Cut && !inside.weights.is_empty() {
            inside.weights[0] *= 2.0;
            injected = true;
        }
        let (wi, wo) = (inside.total_weight(), outside.total_weight());
        worst = worst.max((wi + wo - disc.mesh.area(t)).abs());
        omega += wi;
        d1 += wo;
    }
    GeometryReport { worst_partition: worst, area_omega: omega, area_d1: d1 }
}

fn check_basis() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let v: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]].map(|p| [p[0] + rng.gen_range(-0.2..0.2), p[1] + rng.gen_range(-0.2..0.2)]);
        let mid = |a: usize, b: usize| [(v[a][0] + v[b][0]) / 2.0, (v[a][1] + v[b][1]) / 2.0];
        let basis = NodalBasis::quadratic(&[v[0], v[1], v[2], mid(0, 1), mid(1, 2), mid(2, 0)]);
        for _ in 0..10 {
            let (a, b) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            let l = if a + b > 1.0 { [a + b - 1.0, 1.0 - a, 1.0 - b] } else { [1.0 - a - b, a, b] };
            let p = [0, 1].map(|c| l[0] * v[0][c] + l[1] * v[1][c] + l[2] * v[2][c]);
            for (i, &val) in p2_values(l).iter().enumerate() {
                worst = worst.max((val - basis.value(i, p)).abs());
            }
        }
    }
    verdict(worst <= tol::BASIS, format!("max deviation {worst:.1e}"))
}

fn frobenius_relative(a: &CsrMatrix<f64>, dense: &oracle::Dense) -> f64 {
    let mut diff = 0.0;
    let mut norm = 0.0;
    let sparse = a.to_dense();
    for (ra, rd) in sparse.iter().zip(dense) {
        for (x, y) in ra.iter().zip(rd) {
            diff += (x - y) * (x - y);
            norm += y * y;
        }
    }
    if norm == 0.0 {
        diff.sqrt()
    } else {
        (diff / norm).sqrt()
    }
}

/// Relative Frobenius deviation of each assembled form from the dense
/// oracle on the two-by-two background mesh (24 triangles after splitting).
pub fn assembly_oracle_deviations() -> Vec<(&'static str, f64)> {
    let disc: Discretization<f64, Disk<f64>> = Discretization::new(2, Disk::default(), DEFAULT_CUT_DEPTH).expect("valid");
    let space = &disc.velocity;
    let w = space.interpolate(|p| exact_velocity(0.3, p));
    vec![
        ("mass", frobenius_relative(&assemble_mass(space), &oracle::dense_mass(space))),
        ("viscous", frobenius_relative(&assemble_viscous(space, 1.7), &oracle::dense_viscous(space, 1.7))),
        ("divergence", frobenius_relative(&assemble_divergence(space, &disc.pressure), &oracle::dense_divergence(space, &disc.pressure))),
        ("convection", frobenius_relative(&assemble_convection(space, &w), &oracle::dense_convection(space, &w))),
        ("penalty mass", frobenius_relative(&assemble_penalty_mass(&disc), &oracle::dense_penalty_mass(&disc))),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedReport {
    pub max_divergence: f64,
    pub max_trace: f64,
    pub max_forcing_deviation: f64,
}

impl ManufacturedReport {
    pub fn passed(&self) -> bool {
        self.max_divergence <= tol::EXACT_DIVERGENCE && self.max_trace <= tol::EXACT_TRACE && self.max_forcing_deviation <= tol::FORCING
    }

    pub fn summary(&self) -> String {
        format!(
            "div {:.1e}, trace on circle {:.1e}, forcing vs finite differences {:.1e}",
            self.max_divergence, self.max_trace, self.max_forcing_deviation
        )
    }
}

/// Finite-difference certificates of the closed-form solution at 100 random
/// space-time samples in the box and on the circle.
pub fn manufactured_certificates() -> ManufacturedReport {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut r = ManufacturedReport { max_divergence: 0.0, max_trace: 0.0, max_forcing_deviation: 0.0 };
    for _ in 0..100 {
        let t = rng.gen_range(0.0..1.0);
        let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        r.max_divergence = r.max_divergence.max(oracle::fd_divergence(t, p).abs());
        let f = forcing(t, p, 1.0);
        let g = oracle::fd_momentum_residual(t, p, 1.0);
        r.max_forcing_deviation = r.max_forcing_deviation.max((f[0] - g[0]).abs().max((f[1] - g[1]).abs()));
        let theta = rng.gen_range(0.0..2.0 * PI);
        let s = [0.5f64.sqrt() * theta.cos(), 0.5f64.sqrt() * theta.sin()];
        let u = exact_velocity(t, s);
        r.max_trace = r.max_trace.max(u[0].abs().max(u[1].abs()));
    }
    r
}

/// Minimum of the damping monotonicity expression over random samples
/// `a, b in [0, 10)`, `beta in [0, 1)`.
pub fn damping_sweep(samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| damping_monotone(rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0), rng.gen_range(0.0..1.0)))
        .fold(f64::INFINITY, f64::min)
}

/// Deviation of the rate exponent from its unit values; infinite if it is
/// not increasing in `beta`.
pub fn rate_exponent_deviation() -> f64 {
    let a = |k: f64, b: f64| rate_exponent(k, b).unwrap_or(f64::NAN);
    let mut err = (a(0.0, 0.0) - 1.0).abs().max((a(0.0, 0.5) - 2.0).abs());
    let mut last = f64::NEG_INFINITY;
    for i in 0..10 {
        let b = i as f64 / 10.0;
        let v = a(0.0, b);
        err = err.max((v - 1.0 / (1.0 - b)).abs());
        if !(v > last) {
            return f64::INFINITY;
        }
        last = v;
    }
    if err.is_nan() {
        f64::INFINITY
    } else {
        err
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_suite_passes() {
        for c in run_checks(CheckOptions::default()) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
            assert!(c.seconds >= 0.0);
        }
    }

    #[test]
    fn perturbed_weight_fails_partition() {
        let out = run_checks(CheckOptions { perturb_quadrature_weight: true });
        let geo = out.iter().find(|c| c.name == "geometry partition").unwrap();
        assert!(!geo.passed, "{}", geo.detail);
        assert!(out.iter().filter(|c| c.name != "geometry partition").all(|c| c.passed));
    }
}
