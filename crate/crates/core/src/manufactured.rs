//! Closed-form rotating flow used for verification: velocity, pressure and the
//! forcing `f = u_t + (u . grad) u - mu lap u + grad p`.
//!
//! The velocity has the form `u = w(r^2) (y, -x)` with
//! `w = 2 pi sin(pi t) cos(pi r^2)`, so it is divergence free and vanishes on
//! the circle `r^2 = 1/2`. For such a field
//! `(u . grad) u = -w^2 (x, y)` and `lap u = (4 r^2 w'' + 8 w') (y, -x)`,
//! primes denoting derivatives in `r^2`.

use crate::scalar::{Point, Real};

/// Velocity at time `t`.
pub fn exact_velocity<T: Real>(t: T, p: Point<T>) -> Point<T> {
    let w = angular(t, p[0] * p[0] + p[1] * p[1]);
    [w * p[1], -w * p[0]]
}

/// Gradient of the velocity, `grad[c] = d u_c / d(x, y)`.
pub fn exact_velocity_gradient<T: Real>(t: T, p: Point<T>) -> [Point<T>; 2] {
    let [x, y] = p;
    let rr = x * x + y * y;
    let w = angular(t, rr);
    let two = T::lit(2.0);
    // d w / d r^2
    let dw = -T::lit(2.0) * T::PI() * T::PI() * (T::PI() * t).sin() * (T::PI() * rr).sin();
    [[two * x * y * dw, two * y * y * dw + w], [-(two * x * x * dw + w), -two * x * y * dw]]
}

/// `sin(pi r^2) - 2/pi`.
pub fn exact_pressure<T: Real>(p: Point<T>) -> T {
    let rr = p[0] * p[0] + p[1] * p[1];
    (T::PI() * rr).sin() - T::lit(2.0) / T::PI()
}

/// Momentum forcing reproducing the exact solution with viscosity `mu`.
pub fn forcing<T: Real>(t: T, p: Point<T>, mu: T) -> Point<T> {
    let [x, y] = p;
    let pi = T::PI();
    let two = T::lit(2.0);
    let rr = x * x + y * y;
    let (s_rr, c_rr) = (pi * rr).sin_cos();
    let (s_t, c_t) = (pi * t).sin_cos();
    let amp = two * pi * s_t;
    let w = amp * c_rr;
    let dw_dt = two * pi * pi * c_t * c_rr;
    // 4 r^2 w'' + 8 w' with w' = -amp pi sin, w'' = -amp pi^2 cos.
    let lap = -T::lit(4.0) * amp * pi * pi * rr * c_rr - T::lit(8.0) * amp * pi * s_rr;
    let grad_p = two * pi * c_rr;
    [
        dw_dt * y - w * w * x - mu * lap * y + grad_p * x,
        -dw_dt * x - w * w * y + mu * lap * x + grad_p * y,
    ]
}

/// `||u(t)||_{L2(Omega)}` on the disk `r^2 < 1/2`, in closed form:
/// `|sin(pi t)| sqrt(pi (pi^2/4 - 1))`.
pub fn exact_l2_norm_omega<T: Real>(t: T) -> T {
    let pi = T::PI();
    (pi * t).sin().abs() * (pi * (pi * pi / T::lit(4.0) - T::one())).sqrt()
}

fn angular<T: Real>(t: T, rr: T) -> T {
    T::lit(2.0) * T::PI() * (T::PI() * t).sin() * (T::PI() * rr).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    #[test]
    fn velocity_examples() {
        assert_eq!(exact_velocity(0.0, [0.3, -0.7]), [0.0, 0.0]);
        let on_s = [0.5f64.sqrt() * 0.6f64.cos(), 0.5f64.sqrt() * 0.6f64.sin()];
        let u = exact_velocity(0.37, on_s);
        assert!(u[0].abs() < 1e-14 && u[1].abs() < 1e-14);
        let u = exact_velocity(0.5f64, [0.5, 0.0]);
        assert!(u[0].abs() < 1e-15);
        assert!((u[1] + PI * FRAC_PI_4.cos()).abs() < 1e-14);
        assert!((u[1] + 2.2214415).abs() < 1e-7);
    }

    #[test]
    fn pressure_examples() {
        assert!((exact_pressure([0.0, 0.0]) + 2.0 / PI).abs() < 1e-15);
        assert!((exact_pressure([0.5, 0.5]) - (1.0 - 2.0 / PI)).abs() < 1e-15);
        assert!((exact_pressure([1.0, 0.0]) + 2.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn forcing_examples() {
        let f = forcing(0.0f64, [0.5, 0.0], 1.0);
        assert!((f[0] - 2.2214).abs() < 1e-4 && (f[1] + 6.9789).abs() < 1e-4, "{f:?}");
        let f = forcing(0.5, [0.0, 0.0], 1.0);
        assert_eq!(f, [0.0, 0.0]);
    }

    #[test]
    fn gradient_is_trace_free() {
        for &(t, p) in &[(0.3f64, [0.2, -0.4]), (0.8, [-0.6, 0.1])] {
            let g = exact_velocity_gradient(t, p);
            assert!((g[0][0] + g[1][1]).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetric_in_time() {
        for &t in &[0.1f64, 0.25, 0.4] {
            let p = [0.3, 0.45];
            let a = exact_velocity(t, p);
            let b = exact_velocity(1.0 - t, p);
            assert!((a[0] - b[0]).abs() < 1e-14 && (a[1] - b[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn l2_norm_at_half_time() {
        // pi (pi^2/4 - 1) = 4.6098...
        assert!((exact_l2_norm_omega(0.5f64) - 2.147_04).abs() < 1e-4);
        assert_eq!(exact_l2_norm_omega(0.0), 0.0);
    }
}
