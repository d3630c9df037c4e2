//! Rotor loads from a coefficient surface and the wind relative to the hub.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::surface::CoefficientSurface;
use crate::ad::Scalar;

/// Rotor speed below which the torque division is regularized [rad/s].
pub const OMEGA_FLOOR: f64 = 0.05;

static NONPOSITIVE_INFLOW: AtomicU64 = AtomicU64::new(0);

/// Number of load evaluations so far that saw a non-positive relative wind.
pub fn nonpositive_inflow_count() -> u64 {
    NONPOSITIVE_INFLOW.load(Ordering::Relaxed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotorGeometry {
    pub radius: f64,
    pub rho_air: f64,
    /// Hub height above the platform COG along the body z axis.
    pub hub_height: f64,
    /// Hub position along body x (negative upwind).
    pub hub_x: f64,
}

impl RotorGeometry {
    pub fn swept_area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AeroLoads<S> {
    pub thrust: S,
    pub torque: S,
    pub power: S,
    pub u_rel: S,
    pub lambda: S,
}

/// Continuously differentiable stand-in for the rotor speed in `power / omega`.
pub fn regularized_omega<S: Scalar>(omega: S) -> S {
    if omega.re() >= OMEGA_FLOOR {
        omega
    } else {
        omega * omega * (1.0 / (2.0 * OMEGA_FLOOR)) + 0.5 * OMEGA_FLOOR
    }
}

/// Earth-frame fore-aft velocity of the hub.
pub fn hub_velocity<S: Scalar>(vx: S, vz: S, wy: S, theta: S, g: &RotorGeometry) -> S {
    let (s, c) = (theta.sin(), theta.cos());
    c * (vx + wy * g.hub_height) + s * (vz - wy * g.hub_x)
}

/// Thrust, torque and power for absolute wind `u_abs`, platform body velocities
/// (`vx`, `vz`, `wy`), pitch angle `theta`, rotor speed `omega` and blade pitch [rad].
#[allow(clippy::too_many_arguments)]
pub fn aero_loads<S: Scalar>(
    u_abs: S,
    vx: S,
    vz: S,
    wy: S,
    theta: S,
    omega: S,
    blade_pitch: S,
    surf: &CoefficientSurface,
    g: &RotorGeometry,
) -> AeroLoads<S> {
    let u_rel = u_abs - hub_velocity(vx, vz, wy, theta, g);
    let zero = S::cst(0.0);
    if u_rel.re() <= 0.0 {
        NONPOSITIVE_INFLOW.fetch_add(1, Ordering::Relaxed);
        return AeroLoads { thrust: zero, torque: zero, power: zero, u_rel, lambda: zero };
    }
    let lambda = omega * g.radius / u_rel;
    let [cp, ct] = surf.eval_scalar(lambda, blade_pitch * (180.0 / std::f64::consts::PI));
    let q = 0.5 * g.rho_air * g.swept_area();
    let thrust = ct * u_rel * u_rel * q;
    let power = cp * u_rel * u_rel * u_rel * q;
    let torque = power / regularized_omega(omega);
    AeroLoads { thrust, torque, power, u_rel, lambda }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(cp: f64, ct: f64) -> CoefficientSurface {
        CoefficientSurface::from_tables(vec![1.0, 20.0], vec![0.0, 40.0], vec![cp; 4], vec![ct; 4]).unwrap()
    }

    fn geom() -> RotorGeometry {
        RotorGeometry { radius: 63.0, rho_air: 1.225, hub_height: 100.0, hub_x: -5.0 }
    }

    #[test]
    fn still_hub_sees_absolute_wind() {
        let l = aero_loads(11.4, 0.0, 0.0, 0.0, 0.0, 1.2, 0.0, &flat(0.48, 0.8), &geom());
        assert_eq!(l.u_rel, 11.4);
        let expected = 0.5 * 1.225 * std::f64::consts::PI * 63.0f64.powi(2) * 0.48 * 11.4f64.powi(3);
        assert!((l.power - expected).abs() < 1e-6 * expected);
        assert!((l.power / 1e6 - 5.4).abs() < 0.1);
        assert!((l.power - l.torque * 1.2).abs() < 1e-9 * l.power);
    }

    #[test]
    fn zero_coefficients_give_zero_loads() {
        let l = aero_loads(10.0, 0.3, 0.1, 0.01, 0.05, 1.0, 0.1, &flat(0.0, 0.0), &geom());
        assert_eq!((l.thrust, l.torque, l.power), (0.0, 0.0, 0.0));
    }

    #[test]
    fn reversed_inflow_is_zeroed_and_counted() {
        let before = nonpositive_inflow_count();
        let l = aero_loads(1.0, 2.0, 0.0, 0.0, 0.0, 1.0, 0.0, &flat(0.4, 0.8), &geom());
        assert_eq!(l.thrust, 0.0);
        assert!(nonpositive_inflow_count() > before);
    }

    #[test]
    fn regularized_speed_is_c1() {
        let e = 1e-9;
        let lo = regularized_omega(OMEGA_FLOOR - e);
        let hi = regularized_omega(OMEGA_FLOOR + e);
        assert!((hi - lo - 2.0 * e).abs() < 1e-12);
        assert!(regularized_omega(0.0) > 0.0);
    }
}
