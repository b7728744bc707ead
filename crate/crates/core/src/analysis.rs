//! Error norms, rate fitting and energy diagnostics.

use thiserror::Error;

use crate::assembly::{l2_norm_d1, Discretization, StokesBlocks, SMOOTH_DEGREE};
use crate::fespace::VelocitySpace;
use crate::geometry::{LevelSet, Side};
use crate::manufactured::{exact_velocity, exact_velocity_gradient};
use crate::quadrature::TriangleRule;
use crate::scalar::{Point, Real};

pub const DEFAULT_FLOOR_FACTOR: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("rate exponent needs 0 <= beta < 1, got {0}")]
    BetaOutOfRange(f64),
    #[error("rate exponent needs 0 <= k < 8/3, got {0}")]
    KOutOfRange(f64),
}

/// Squared `L2(Omega)` and `H1(Omega)`-seminorm parts of `u_h - u`.
pub fn error_parts_omega<T: Real, L: LevelSet<T>>(
    disc: &Discretization<T, L>,
    u_h: &[T],
    exact: impl Fn(Point<T>) -> Point<T>,
    exact_grad: impl Fn(Point<T>) -> [Point<T>; 2],
) -> (T, T) {
    let rule = TriangleRule::<T>::with_degree(SMOOTH_DEGREE).expect("built-in rule");
    let space = &disc.velocity;
    let (mut l2, mut semi) = (T::zero(), T::zero());
    for t in 0..disc.n_elements() {
        let map = &space.element_maps[t];
        disc.geometry.for_each_point(&disc.mesh, t, Side::Omega, &rule, |p, w| {
            let (v, g) = space.evaluate(u_h, t, map.barycentric(p));
            let e = exact(p);
            let ge = exact_grad(p);
            for c in 0..2 {
                l2 += w * (v[c] - e[c]).powi(2);
                semi += w * ((g[c][0] - ge[c][0]).powi(2) + (g[c][1] - ge[c][1]).powi(2));
            }
        });
    }
    (l2, semi)
}

/// `||u_h - u(t)||_{L2(Omega)}` against the manufactured velocity.
pub fn error_l2_omega<T: Real, L: LevelSet<T>>(disc: &Discretization<T, L>, u_h: &[T], t: T) -> T {
    let (l2, _) = error_parts_omega(disc, u_h, |p| exact_velocity(t, p), |p| exact_velocity_gradient(t, p));
    l2.sqrt()
}

/// Full `H1(Omega)` norm of `u_h - u(t)`.
pub fn error_h1_omega<T: Real, L: LevelSet<T>>(disc: &Discretization<T, L>, u_h: &[T], t: T) -> T {
    let (l2, semi) = error_parts_omega(disc, u_h, |p| exact_velocity(t, p), |p| exact_velocity_gradient(t, p));
    (l2 + semi).sqrt()
}

/// `||div u_h||_{L2(D)}`; the divergence is linear per element, so a
/// degree-2 rule is exact.
pub fn div_norm<T: Real>(space: &VelocitySpace<T>, u_h: &[T]) -> T {
    let rule = TriangleRule::<T>::with_degree(2).expect("built-in rule");
    let mut s = T::zero();
    for t in 0..space.n_elements() {
        let area = space.element_maps[t].area;
        for (l, &w) in rule.bary.iter().zip(&rule.weights) {
            s += w * area * space.divergence(u_h, t, *l).powi(2);
        }
    }
    s.sqrt()
}

/// Predicted exponent `A(k, beta) = (16 - 6k) / (16 + 12k - 16 beta - 3 beta k)`
/// of the squared error; the norm converges like `eps^(A/2)`.
pub fn rate_exponent<T: Real>(k: T, beta: T) -> Result<T, AnalysisError> {
    if !(beta >= T::zero() && beta < T::one()) {
        return Err(AnalysisError::BetaOutOfRange(beta.as_f64()));
    }
    if !(k >= T::zero() && k < T::lit(8.0 / 3.0)) {
        return Err(AnalysisError::KOutOfRange(k.as_f64()));
    }
    let l = T::lit;
    Ok((l(16.0) - l(6.0) * k) / (l(16.0) + l(12.0) * k - l(16.0) * beta - l(3.0) * beta * k))
}

/// `(a - b)(a^(1-beta) - b^(1-beta))`, nonnegative for `a, b >= 0`.
pub fn damping_monotone<T: Real>(a: T, b: T, beta: T) -> T {
    let e = T::one() - beta;
    (a - b) * (a.powf(e) - b.powf(e))
}

/// `y = mu ||grad u||^2_{L2(D)} + eps^-1 ||u||^(2-beta)_{L2(D1)}`.
pub fn energy_functional<T: Real>(u_h: &[T], eps: T, beta: T, mu: T, blocks: &StokesBlocks<T>) -> T {
    let grad = blocks.stiffness.quadratic_form(u_h, u_h).max(T::zero());
    let d1 = l2_norm_d1(u_h, &blocks.penalty_mass);
    let pen = if d1 == T::zero() { T::zero() } else { d1.powf(T::lit(2.0) - beta) };
    mu * grad + pen / eps
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    Fitted,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub points: Vec<(f64, f64)>,
    /// Indices into `points` used by the fit.
    pub window: Vec<usize>,
    /// Least-squares slope of `log error` against `log eps`; NaN if inconclusive.
    pub slope: f64,
    pub status: FitStatus,
}

impl RateFit {
    pub fn is_fitted(&self) -> bool {
        self.status == FitStatus::Fitted
    }

    /// Human-readable window such as `eps in [1e-3, 1e0] (4 points)`.
    pub fn window_description(&self) -> String {
        if self.window.is_empty() {
            return "empty window".to_string();
        }
        let eps: Vec<f64> = self.window.iter().map(|&i| self.points[i].0).collect();
        let lo = eps.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = eps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        format!("eps in [{lo:e}, {hi:e}] ({} points)", eps.len())
    }
}

/// Fits the convergence slope over the pre-floor window.
///
/// Points with non-finite or non-positive error (failed runs) are ignored.
/// The window keeps points whose error exceeds `floor_factor` times the
/// minimum error and whose `eps` lies above the minimizing `eps`, so a
/// rebound below the floor cannot enter the fit.
pub fn fit_rate(points: &[(f64, f64)], floor_factor: f64) -> RateFit {
    let valid: Vec<usize> = (0..points.len()).filter(|&i| points[i].1.is_finite() && points[i].1 > 0.0 && points[i].0 > 0.0).collect();
    let argmin = valid.iter().copied().min_by(|&a, &b| points[a].1.total_cmp(&points[b].1));
    let window: Vec<usize> = match argmin {
        None => Vec::new(),
        Some(m) => {
            let (eps_min, err_min) = points[m];
            valid.into_iter().filter(|&i| points[i].1 > floor_factor * err_min && points[i].0 > eps_min).collect()
        }
    };
    if window.len() < 2 {
        return RateFit { points: points.to_vec(), window, slope: f64::NAN, status: FitStatus::Inconclusive };
    }
    let xs: Vec<f64> = window.iter().map(|&i| points[i].0.ln()).collect();
    let ys: Vec<f64> = window.iter().map(|&i| points[i].1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return RateFit { points: points.to_vec(), window, slope: f64::NAN, status: FitStatus::Inconclusive };
    }
    RateFit { points: points.to_vec(), window, slope: sxy / sxx, status: FitStatus::Fitted }
}
