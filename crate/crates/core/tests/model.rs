use std::sync::Arc;

use fowt_core::aero::CoefficientSurface;
use fowt_core::model::dynamics::{load_terms, mechanical_energy, static_loads};
use fowt_core::model::integrate::OdeOptions;
use fowt_core::model::*;

fn flat_surface(cp: f64, ct: f64) -> Arc<CoefficientSurface> {
    Arc::new(CoefficientSurface::from_tables(vec![1.0, 8.0, 15.0], vec![0.0, 20.0, 40.0], vec![cp; 9], vec![ct; 9]).unwrap())
}

fn plant_with(switches: LoadSwitches) -> Plant {
    let mut p = ModelParams::default();
    p.loads = switches;
    let moor = MooringModel::from_params(&p.mooring).unwrap();
    Plant::new(&p, flat_surface(0.45, 0.75), moor).unwrap()
}

fn baseline() -> Plant {
    plant_with(LoadSwitches::default())
}

fn state(pose: Pose3, omega: f64, tau: f64) -> [f64; NX] {
    [pose.0, pose.1, pose.2, 0.0, 0.0, 0.0, omega, 0.0, tau]
}

type Pose3 = (f64, f64, f64);

#[test]
fn heave_balance_at_design_pose() {
    let plant = baseline();
    let st = static_loads(&plant, 0.0, plant.z_ref(), 0.0);
    let weight = plant.inventory.total_mass() * plant.params.gravity;
    assert!(st[1].abs() < 1e-6 * weight, "net heave {}", st[1]);
}

#[test]
fn static_equilibrium_has_zero_derivative() {
    let plant = baseline();
    let pose = static_equilibrium(&plant, 0.0).unwrap();
    let x = state((pose.x, pose.z, pose.theta), 0.0, 0.0);
    let d = state_derivative(&plant, &x, &[0.0, 0.0], &EnvSample::still(0.0)).unwrap();
    for (i, v) in d.iter().enumerate() {
        assert!(v.abs() < 1e-7, "component {i}: {v}");
    }
}

#[test]
fn pitch_restoring_about_equilibrium() {
    let plant = baseline();
    let pose = static_equilibrium(&plant, 0.0).unwrap();
    let up = static_loads(&plant, pose.x, pose.z, pose.theta + 0.01);
    let down = static_loads(&plant, pose.x, pose.z, pose.theta - 0.01);
    assert!(up[2] < 0.0 && down[2] > 0.0);
}

#[test]
fn heave_perturbation_matches_waterplane_stiffness() {
    let plant = plant_with(LoadSwitches { mooring: false, ..LoadSwitches::default() });
    let x0 = state((0.0, plant.z_ref(), 0.0), 0.0, 0.0);
    let mut x1 = x0;
    x1[1] += 0.5;
    let env = EnvSample::still(0.0);
    let f0 = load_set(&plant, &x0, &env).hs[1];
    let f1 = load_set(&plant, &x1, &env).hs[1];
    let rho_g_a = 1025.0 * plant.params.gravity * plant.hull.waterplane_area;
    assert!(((f1 - f0) + rho_g_a * 0.5).abs() < 1e-9 * f0.abs());
}

#[test]
fn load_set_total_is_sum_of_tags() {
    let plant = baseline();
    let x = [1.0, plant.z_ref() + 0.2, 0.02, 0.3, -0.1, 0.01, 1.0, 0.05, 2.0e6];
    let env = EnvSample { wind: 11.0, wave: fowt_core::environment::WaveSample { eta: 0.5, u: 0.4, w: 0.1, du: 0.2, dw: -0.1 } };
    let ls = load_set(&plant, &x, &env);
    let tot = ls.total();
    for i in 0..3 {
        assert_eq!(tot[i], ls.hs[i] + ls.a[i] + ls.moor[i] + ls.hd[i]);
    }
}

#[test]
fn rotor_acceleration_matches_aero_oracle() {
    let plant = baseline();
    let (u, om, tau) = (10.0, 1.0, 1.5e6);
    let x = state((0.0, plant.z_ref(), 0.0), om, tau);
    let d = rates(&plant, &x, &[0.0, 0.0], &EnvSample::still(u));
    let lambda = om * 63.0 / u;
    let (cp, _) = plant.surface.eval(lambda, 0.0);
    let tau_a = 0.5 * 1.225 * std::f64::consts::PI * 63.0f64.powi(2) * cp * u.powi(3) / om;
    let expected = (tau_a - tau) / plant.inventory.i_rx;
    assert!((d[6] - expected).abs() < 1e-9 * expected.abs());
}

#[test]
fn still_water_pitch_decay() {
    let plant = baseline();
    let pose = static_equilibrium(&plant, 0.0).unwrap();
    let mut x0 = state((pose.x, pose.z, pose.theta), 0.0, 0.0);
    x0[2] += 0.05;
    let times: Vec<f64> = (0..=300).map(|i| i as f64).collect();
    let sched = ControlSchedule::constant([0.0, 0.0], 0.0, 300.0);
    let env = Environment::steady(0.0, 300.0);
    let tr = simulate_forward(&plant, &sched, &env, &x0, 0.0, 300.0, &times, &OdeOptions::default()).unwrap();
    let early = tr.states[..60].iter().map(|s| (s[2] - pose.theta).abs()).fold(0.0, f64::max);
    let late = tr.states[240..].iter().map(|s| (s[2] - pose.theta).abs()).fold(0.0, f64::max);
    assert!((early - 0.05).abs() < 0.01);
    assert!(late < 0.6 * early, "late amplitude {late} vs early {early}");
}

#[test]
fn free_platform_conserves_energy() {
    let sw = LoadSwitches { aero: false, mooring: false, drag: false, waves: false, ..LoadSwitches::default() };
    let plant = plant_with(sw);
    let x0 = [0.0, plant.z_ref() + 0.3, 0.04, 0.2, 0.0, 0.005, 0.0, 0.0, 0.0];
    let times: Vec<f64> = (0..=100).map(|i| i as f64).collect();
    let sched = ControlSchedule::constant([0.0, 0.0], 0.0, 100.0);
    let env = Environment::steady(0.0, 100.0);
    let tr = simulate_forward(&plant, &sched, &env, &x0, 0.0, 100.0, &times, &OdeOptions::default()).unwrap();
    let e0 = mechanical_energy(&plant, &x0);
    let drift = tr.states.iter().map(|s| (mechanical_energy(&plant, s) - e0).abs()).fold(0.0, f64::max);
    assert!(drift <= 1e-3 * e0.abs(), "drift {drift} of {e0}");
}

#[test]
fn all_loads_off_at_rest_is_constant() {
    let sw = LoadSwitches { aero: false, hydrostatics: false, mooring: false, drag: false, waves: false, gravity: false };
    let plant = plant_with(sw);
    let x0 = [1.0, plant.z_ref(), 0.01, 0.0, 0.0, 0.0, 0.0, 0.1, 0.0];
    let times = [0.0, 5.0, 10.0];
    let tr = simulate_forward(&plant, &ControlSchedule::constant([0.0, 0.0], 0.0, 10.0), &Environment::steady(0.0, 10.0), &x0, 0.0, 10.0, &times, &OdeOptions::default())
        .unwrap();
    for s in &tr.states {
        assert_eq!(s, &x0);
    }
}

#[test]
fn derivative_is_deterministic() {
    let plant = baseline();
    let x = [0.5, plant.z_ref() - 0.1, 0.03, 0.2, 0.05, -0.01, 1.1, 0.02, 3e6];
    let env = EnvSample::still(12.0);
    let a = state_derivative(&plant, &x, &[0.01, 1e4], &env).unwrap();
    let b = state_derivative(&plant, &x, &[0.01, 1e4], &env).unwrap();
    assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
}

#[test]
fn sunk_platform_is_out_of_envelope() {
    let plant = baseline();
    let x = [0.0, plant.z_ref() - 12.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    assert!(state_derivative(&plant, &x, &[0.0, 0.0], &EnvSample::still(0.0)).is_err());
}

#[test]
fn quadratic_velocity_terms_scale_with_square() {
    let plant = baseline();
    let x = [0.0, plant.z_ref(), 0.0, 0.4, -0.2, 0.03, 1.0, 0.0, 0.0];
    let mut y = x;
    for v in &mut y[3..7] {
        *v *= 2.5;
    }
    let env = EnvSample::still(0.0);
    let a = load_terms(&plant, &x, &env).coriolis;
    let b = load_terms(&plant, &y, &env).coriolis;
    for i in 0..4 {
        assert!((b[i] - 6.25 * a[i]).abs() <= 1e-9 * a[i].abs().max(1.0));
    }
}

#[test]
fn trajectory_csv_round_trips() {
    let plant = baseline();
    let x0 = state((0.0, plant.z_ref(), 0.0), 1.0, 1e6);
    let env = Environment::steady(9.0, 4.0);
    let tr = simulate_forward(&plant, &ControlSchedule::constant([0.001, 10.0], 0.0, 4.0), &env, &x0, 0.0, 4.0, &[0.0, 1.0, 2.5, 4.0], &OdeOptions::default()).unwrap();
    let back = Trajectory::from_csv(&tr.to_csv(true)).unwrap();
    assert_eq!(back.times, tr.times);
    assert_eq!(back.states, tr.states);
    assert_eq!(back.controls, tr.controls);
    assert_eq!(back.sigma, tr.sigma);
}
