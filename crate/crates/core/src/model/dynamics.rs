//! External loads and the state derivative of the 4-DOF model with actuator states.
//!
//! State: `[x_p, z_p, theta_p, v_x, v_z, omega_y, Omega, theta_b, tau_g]` with
//! `z_p` the absolute elevation of the platform COG. Controls: blade pitch rate and
//! generator torque rate.

use super::plant::{MooringModel, Plant};
use super::platform::{check_draft, hydrostatic_earth};
use super::rigid::{coriolis_loads, gravity_loads};
use crate::ad::Scalar;
use crate::aero::{aero_loads, AeroLoads};
use crate::environment::WaveSample;
use crate::error::{Error, Result};
use crate::mooring::{solve_catenary, Pose};

pub const NX: usize = 9;
pub const NU: usize = 2;

pub const STATE_NAMES: [&str; NX] = ["x_p", "z_p", "theta_p", "v_x", "v_z", "omega_y", "Omega", "theta_b", "tau_g"];
pub const CONTROL_NAMES: [&str; NU] = ["theta_b_rate", "tau_g_rate"];

/// Smoothing speed of the quadratic drag law [m/s].
const DRAG_EPS: f64 = 1e-2;

/// Wind and wave kinematics at one instant.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnvSample {
    pub wind: f64,
    pub wave: WaveSample,
}

impl EnvSample {
    pub fn still(wind: f64) -> Self {
        Self { wind, wave: WaveSample::default() }
    }
}

/// Body-frame external loads `[F_x, F_z, M_y]` by source, and the rotor torque.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoadSet {
    pub hs: [f64; 3],
    pub a: [f64; 3],
    pub moor: [f64; 3],
    pub hd: [f64; 3],
    pub tau_a: f64,
}

impl LoadSet {
    pub fn total(&self) -> [f64; 3] {
        std::array::from_fn(|i| self.hs[i] + self.a[i] + self.moor[i] + self.hd[i])
    }
}

/// All load terms for a scalar type.
#[derive(Clone, Copy, Debug)]
pub struct LoadTerms<S> {
    pub gravity: [S; 4],
    pub coriolis: [S; 4],
    pub hs: [S; 3],
    pub a: [S; 3],
    pub moor: [S; 3],
    pub hd: [S; 3],
    pub aero: AeroLoads<S>,
}

fn to_body<S: Scalar>(fx: S, fz: S, s: S, c: S) -> [S; 2] {
    [c * fx - s * fz, s * fx + c * fz]
}

fn zeros<S: Scalar>() -> [S; 3] {
    [S::cst(0.0); 3]
}

/// Earth-frame mooring loads `[F_x, F_z, M_y]` about the platform reference point.
pub fn mooring_earth<S: Scalar>(plant: &Plant, x: S, z: S, theta: S) -> [S; 3] {
    let g = &plant.mooring_geometry;
    match &plant.mooring {
        MooringModel::None => zeros(),
        MooringModel::Surrogate(s) => g.loads_smooth(s, x, z, theta),
        MooringModel::Exact(line) => {
            let f = |p: [f64; 3]| -> [f64; 3] {
                match g.loads_exact(line, Pose { x: p[0], z: p[1], theta: p[2] }) {
                    Ok(l) => [l.fx, l.fz, l.my],
                    Err(_) => [f64::NAN; 3],
                }
            };
            let at = [x.re(), z.re(), theta.re()];
            let v = f(at);
            let steps = [1e-4, 1e-4, 1e-6];
            let mut grads = [[0.0; 3]; 3];
            for j in 0..3 {
                let (mut a, mut b) = (at, at);
                a[j] += steps[j];
                b[j] -= steps[j];
                let (fa, fb) = (f(a), f(b));
                for (k, gk) in grads.iter_mut().enumerate() {
                    gk[j] = (fa[k] - fb[k]) / (2.0 * steps[j]);
                }
            }
            let inputs = [x, z, theta];
            std::array::from_fn(|k| S::chain(&inputs, v[k], &grads[k], &[[0.0; 3]; 3]))
        }
    }
}

/// Exact catenary tension check used by forward simulation.
pub fn check_mooring(plant: &Plant, x: f64, z: f64, theta: f64) -> Result<()> {
    if let MooringModel::Exact(line) = &plant.mooring {
        for (l, h) in plant.mooring_geometry.offsets(Pose { x, z, theta }) {
            solve_catenary(l, h, line)?;
        }
    }
    Ok(())
}

pub fn load_terms<S: Scalar>(plant: &Plant, x: &[S; NX], env: &EnvSample) -> LoadTerms<S> {
    let sw = plant.switches;
    let pp = &plant.params.platform;
    let g = plant.params.gravity;
    let rho = pp.water_density;
    let [xp, zp, th, vx, vz, wy, om, pitch, _] = *x;
    let (s, c) = (th.sin(), th.cos());

    let gravity = if sw.gravity { gravity_loads(th, &plant.inventory, g) } else { [S::cst(0.0); 4] };
    let coriolis = coriolis_loads(&[vx, vz, wy, om], &plant.mass_matrix, plant.hydro.a11());

    let hs = if sw.hydrostatics {
        let (fz, my) = hydrostatic_earth(zp - plant.z_ref(), th, &plant.hull, plant.z_ref(), rho, g);
        let [bx, bz] = to_body(S::cst(0.0), fz, s, c);
        [bx, bz, my]
    } else {
        zeros()
    };

    let aero = if sw.aero {
        aero_loads(S::cst(env.wind), vx, vz, wy, th, om, pitch, &plant.surface, &plant.rotor)
    } else {
        let z = S::cst(0.0);
        AeroLoads { thrust: z, torque: z, power: z, u_rel: S::cst(env.wind), lambda: z }
    };
    let a = [aero.thrust, S::cst(0.0), aero.thrust * plant.rotor.hub_height];

    let moor = if sw.mooring {
        let [fx, fz, my] = mooring_earth(plant, xp, zp, th);
        let [bx, bz] = to_body(fx, fz, s, c);
        [bx, bz, my]
    } else {
        zeros()
    };

    let mut hd = zeros::<S>();
    let wave = if sw.waves { env.wave } else { WaveSample::default() };
    let [ufx, ufz] = to_body(S::cst(wave.u), S::cst(wave.w), s, c);
    if sw.drag {
        let mut fx = S::cst(0.0);
        let mut my = S::cst(0.0);
        for st in &plant.hull.strips {
            let vrel = vx + wy * st.z_body - ufx;
            let f = vrel.smooth_sq(DRAG_EPS) * (-0.5 * rho * pp.drag_coefficient * st.diameter * st.length);
            fx += f;
            my += f * st.z_body;
        }
        let keel = std::f64::consts::PI * plant.hull.keel_diameter.powi(2) / 4.0;
        let vzr = vz - ufz;
        let fz = vzr.smooth_sq(DRAG_EPS) * (-0.5 * rho * pp.heave_drag_coefficient * keel) - vzr * pp.linear_damping_heave;
        fx -= (vx - ufx) * pp.linear_damping_surge;
        hd = [fx, fz, my];
    }
    if sw.waves && (wave.du != 0.0 || wave.dw != 0.0) {
        let fx_e = (rho * plant.hull.volume + plant.hydro.a11()) * wave.du;
        let fz_e = plant.hydro.a22() * wave.dw;
        let [bx, bz] = to_body(S::cst(fx_e), S::cst(fz_e), s, c);
        let lever = plant.hull.cb_z - plant.z_ref();
        hd = [hd[0] + bx, hd[1] + bz, hd[2] + bx * lever];
    }

    LoadTerms { gravity, coriolis, hs, a, moor, hd, aero }
}

/// Time derivative of the state for controls `u = [theta_b_rate, tau_g_rate]`.
pub fn rates<S: Scalar>(plant: &Plant, x: &[S; NX], u: &[S; NU], env: &EnvSample) -> [S; NX] {
    let lt = load_terms(plant, x, env);
    let [_, _, th, vx, vz, wy, _, _, tau_g] = *x;
    let (s, c) = (th.sin(), th.cos());
    let mut rhs = [S::cst(0.0); 4];
    for i in 0..3 {
        rhs[i] = lt.gravity[i] + lt.hs[i] + lt.a[i] + lt.moor[i] + lt.hd[i] - lt.coriolis[i];
    }
    rhs[3] = lt.aero.torque - tau_g - lt.coriolis[3];
    let mi = &plant.mass_inverse;
    let acc: [S; 4] = std::array::from_fn(|i| rhs[0] * mi[(i, 0)] + rhs[1] * mi[(i, 1)] + rhs[2] * mi[(i, 2)] + rhs[3] * mi[(i, 3)]);
    [vx * c + vz * s, vz * c - vx * s, wy, acc[0], acc[1], acc[2], acc[3], u[0], u[1]]
}

/// Checked state derivative: validates the hull and mooring envelope and the result.
pub fn state_derivative(plant: &Plant, x: &[f64; NX], u: &[f64; NU], env: &EnvSample) -> Result<[f64; NX]> {
    check_draft(x[1] - plant.z_ref(), &plant.hull)?;
    check_mooring(plant, x[0], x[1], x[2])?;
    let d = rates(plant, x, u, env);
    if d.iter().all(|v| v.is_finite()) {
        Ok(d)
    } else {
        Err(Error::Model(format!("non-finite state derivative at {x:?}")))
    }
}

pub fn load_set(plant: &Plant, x: &[f64; NX], env: &EnvSample) -> LoadSet {
    let lt = load_terms(plant, x, env);
    LoadSet { hs: lt.hs, a: lt.a, moor: lt.moor, hd: lt.hd, tau_a: lt.aero.torque }
}

/// Instantaneous derived outputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outputs<S> {
    /// Generator power `tau_g * Omega`.
    pub p_u: S,
    pub p_a: S,
    pub sigma: S,
    pub thrust: S,
    pub u_rel: S,
    pub lambda: S,
}

pub fn outputs<S: Scalar>(plant: &Plant, x: &[S; NX], wind: f64) -> Outputs<S> {
    let a = if plant.switches.aero {
        aero_loads(S::cst(wind), x[3], x[4], x[5], x[2], x[6], x[7], &plant.surface, &plant.rotor)
    } else {
        let z = S::cst(0.0);
        AeroLoads { thrust: z, torque: z, power: z, u_rel: S::cst(wind), lambda: z }
    };
    Outputs {
        p_u: x[8] * x[6],
        p_a: a.power,
        sigma: a.thrust * plant.tower_props.stress_factor,
        thrust: a.thrust,
        u_rel: a.u_rel,
        lambda: a.lambda,
    }
}

/// Mechanical energy of the free platform relative to the design pose:
/// kinetic (rigid plus added mass) plus gravity and hydrostatic potentials.
pub fn mechanical_energy(plant: &Plant, x: &[f64; NX]) -> f64 {
    let nu = nalgebra::Vector4::new(x[3], x[4], x[5], x[6]);
    let kin = 0.5 * (nu.transpose() * (plant.mass_matrix + plant.added_mass) * nu)[(0, 0)];
    let g = plant.params.gravity;
    let inv = &plant.inventory;
    let (s, c) = x[2].sin_cos();
    let dz = x[1] - plant.z_ref();
    let lift = inv.big_d_r * (inv.m_nc + inv.m_r) + inv.big_d_t * inv.m_t;
    let u_grav = g * (inv.total_mass() * dz + lift * (c - 1.0) - inv.m26() * s);
    let u_hs = super::platform::hydrostatic_potential(dz, x[2], &plant.hull, plant.z_ref(), plant.params.platform.water_density, g);
    kin + u_grav + u_hs
}

/// Gravity, hydrostatic and mooring loads at a pose with the platform at rest.
pub fn static_loads(plant: &Plant, x: f64, z: f64, theta: f64) -> [f64; 3] {
    let sw = plant.switches;
    let g = plant.params.gravity;
    let (s, c) = theta.sin_cos();
    let mut out = [0.0; 3];
    if sw.gravity {
        let gr = gravity_loads(theta, &plant.inventory, g);
        out = [gr[0], gr[1], gr[2]];
    }
    if sw.hydrostatics {
        let (fz, my) = hydrostatic_earth(z - plant.z_ref(), theta, &plant.hull, plant.z_ref(), plant.params.platform.water_density, g);
        let [bx, bz] = to_body(0.0, fz, s, c);
        out = [out[0] + bx, out[1] + bz, out[2] + my];
    }
    if sw.mooring {
        let [fx, fz, my] = mooring_earth(plant, x, z, theta);
        let [bx, bz] = to_body(fx, fz, s, c);
        out = [out[0] + bx, out[1] + bz, out[2] + my];
    }
    out
}

/// Static pose under a steady thrust at the hub (velocities zero).
pub fn static_equilibrium(plant: &Plant, thrust: f64) -> Result<Pose> {
    let resid = |p: &[f64; 3]| -> [f64; 3] {
        let st = static_loads(plant, p[0], p[1], p[2]);
        let a = [thrust, 0.0, thrust * plant.rotor.hub_height];
        std::array::from_fn(|i| st[i] + a[i])
    };
    // scale moment equation to force units
    let scale = [1.0, 1.0, 1.0 / plant.rotor.hub_height];
    let mut p = [0.0, plant.z_ref(), 0.0];
    for _ in 0..50 {
        let r = resid(&p);
        let rn = (0..3).map(|i| (r[i] * scale[i]).abs()).fold(0.0, f64::max);
        if rn < 1e-6 {
            return Ok(Pose { x: p[0], z: p[1], theta: p[2] });
        }
        let steps = [1e-3, 1e-3, 1e-6];
        let mut jac = nalgebra::Matrix3::zeros();
        for j in 0..3 {
            let (mut a, mut b) = (p, p);
            a[j] += steps[j];
            b[j] -= steps[j];
            let (ra, rb) = (resid(&a), resid(&b));
            for i in 0..3 {
                jac[(i, j)] = (ra[i] - rb[i]) * scale[i] / (2.0 * steps[j]);
            }
        }
        let rhs = nalgebra::Vector3::new(-r[0] * scale[0], -r[1] * scale[1], -r[2] * scale[2]);
        let dx = jac.lu().solve(&rhs).ok_or_else(|| Error::RootFind { what: "platform statics".into(), residual: rn })?;
        for i in 0..3 {
            p[i] += dx[i];
        }
    }
    let r = resid(&p);
    Err(Error::RootFind { what: "platform statics".into(), residual: (0..3).map(|i| (r[i] * scale[i]).abs()).fold(0.0, f64::max) })
}
