use std::sync::{Arc, OnceLock};

use fowt_core::aero::{design_surface, nrel5mw_polars, BladeDesign, SurfaceGrid};
use fowt_core::model::dynamics::STATE_NAMES;
use fowt_core::model::*;
use fowt_core::oloc::*;

fn plant() -> &'static Plant {
    static P: OnceLock<Plant> = OnceLock::new();
    P.get_or_init(|| {
        let surf = design_surface(&BladeDesign::baseline(), &nrel5mw_polars(), &SurfaceGrid::default(), None).unwrap();
        let p = ModelParams::default();
        Plant::new(&p, Arc::new(surf), MooringModel::from_params(&p.mooring).unwrap()).unwrap()
    })
}

fn solve_steady(u: f64, cfg: OlocConfig) -> (OlocProblem<'static>, OlocSolution) {
    let prob = OlocProblem::new(plant(), Environment::steady(u, cfg.horizon), cfg).unwrap();
    let sol = prob.solve().unwrap();
    (prob, sol)
}

#[test]
fn variable_count_matches_mesh() {
    let prob = OlocProblem::new(plant(), Environment::steady(8.0, 100.0), OlocConfig { segments: 7, ..Default::default() }).unwrap();
    let trim = prob.trim().unwrap();
    let model = prob.model();
    let nlp = Collocation::new(&model, prob.spec(&trim)).unwrap();
    assert_eq!(Nlp::n(&nlp), 15 * (NX + NU));
    // initial states, two defect sets per segment, two path rows at every point but the first
    assert_eq!(Nlp::m(&nlp), NX + 2 * NX * 7 + 2 * 14);
}

#[test]
fn trim_is_a_steady_state_within_limits() {
    let cfg = OlocConfig::default();
    for u in [5.0, 8.0, 11.0, 14.0, 20.0] {
        let t = trim(plant(), u, &cfg).unwrap();
        let d = state_derivative(plant(), &t.state, &[0.0, 0.0], &EnvSample::still(u)).unwrap();
        for (i, v) in d.iter().enumerate() {
            assert!(v.abs() < 1e-5, "u={u} component {i}: {v}");
        }
        assert!(t.power <= 0.995 * cfg.power_max + 1e-6);
        assert!(t.state[6] <= 0.995 * cfg.omega_max + 1e-12);
        assert!(plant().tower_stress(t.thrust) <= 0.995 * cfg.sigma_max() * (1.0 + 1e-12));
    }
}

#[test]
fn region_two_tracks_the_cp_ridge() {
    let (_, sol) = solve_steady(8.0, OlocConfig::default());
    assert_eq!(sol.status, SolveStatus::Solved, "{}", sol.solver_log);
    assert!(sol.feasible);
    // steady region-2 operation: past the initial transient with the blade pitch inactive
    let n = sol.lambda.len();
    let steady: Vec<usize> = (n / 10..n).filter(|&j| sol.trajectory.states[j][7].to_degrees() < 0.5).collect();
    assert!(steady.len() * 10 >= 6 * n, "steady portion covers {} of {n} points", steady.len());
    let (ridge, _) = plant().surface.cp_max_ridge(0.0);
    for j in steady {
        let dev = (sol.lambda[j] - ridge).abs() / ridge;
        assert!(dev < 0.05, "point {j}: lambda {} ridge {ridge}", sol.lambda[j]);
    }
}

#[test]
fn above_rated_power_saturates_with_positive_multipliers() {
    let (_, sol) = solve_steady(14.0, OlocConfig::default());
    assert_eq!(sol.status, SolveStatus::Solved, "{}", sol.solver_log);
    let n = sol.trajectory.times.len();
    let mut active = 0;
    for j in n / 5..n {
        let pu = sol.trajectory.p_u[j];
        assert!((pu - 5e6).abs() < 0.01 * 5e6, "P_u {pu} at point {j}");
        if pu > 5e6 * (1.0 - 1e-4) {
            active += 1;
            assert!(sol.multipliers[j][1] > 0.0, "multiplier at point {j}: {}", sol.multipliers[j][1]);
        }
    }
    assert!(active > n / 2, "constraint active at only {active} of {n} points");
}

#[test]
fn reintegration_reproduces_collocation_states() {
    for u in [8.0, 14.0] {
        let (prob, sol) = solve_steady(u, OlocConfig::default());
        let re = prob.reintegrate(&sol).unwrap();
        let err = consistency_errors(plant(), &sol.trajectory, &re);
        for (i, e) in err.iter().enumerate() {
            assert!(*e < 0.02, "u={u} channel {}: {e}", STATE_NAMES[i]);
        }
    }
}

#[test]
fn objective_gradient_matches_central_differences() {
    let prob = OlocProblem::new(plant(), Environment::steady(11.0, 20.0), OlocConfig { horizon: 20.0, segments: 5, ..Default::default() }).unwrap();
    let trim = prob.trim().unwrap();
    let model = prob.model();
    let mut nlp = Collocation::new(&model, prob.spec(&trim)).unwrap();
    let x0 = nlp.initial_point();
    let (lo, hi) = nlp.var_bounds();
    let mut rng_state = 17u64;
    let mut next = || {
        rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((rng_state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    for _ in 0..3 {
        let x: Vec<f64> = x0.iter().enumerate().map(|(i, v)| (v + 0.2 * next()).clamp(lo[i] + 1e-3, hi[i] - 1e-3)).collect();
        let ev = nlp.eval_derivatives(&x).unwrap();
        for v in 0..x.len() {
            let h = 1e-6;
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[v] += h;
            xm[v] -= h;
            let fd = (nlp.eval_values(&xp).0 - nlp.eval_values(&xm).0) / (2.0 * h);
            let scale = ev.grad[v].abs().max(1e-3 * ev.grad.iter().fold(0.0f64, |a, b| a.max(b.abs())));
            assert!((fd - ev.grad[v]).abs() <= 1e-5 * scale, "var {v}: fd {fd} ad {}", ev.grad[v]);
        }
    }
}

#[test]
fn solve_is_deterministic() {
    let cfg = OlocConfig { horizon: 40.0, segments: 20, ..Default::default() };
    let (_, a) = solve_steady(12.0, cfg.clone());
    let (_, b) = solve_steady(12.0, cfg);
    assert_eq!(a.trajectory, b.trajectory);
    assert_eq!(a.p_out.to_bits(), b.p_out.to_bits());
    assert_eq!(a.solver_log, b.solver_log);
}

#[test]
fn relaxing_the_stress_limit_never_lowers_power() {
    for u in [11.0, 13.0] {
        let cfg45 = OlocConfig { horizon: 60.0, segments: 30, ..Default::default() };
        let cfg90 = OlocConfig { sigma_max_mpa: 90.0, ..cfg45.clone() };
        let (_, s45) = solve_steady(u, cfg45);
        let (_, s90) = solve_steady(u, cfg90);
        assert!(s45.status.is_success() && s90.status.is_success());
        assert!(s90.p_out >= s45.p_out * (1.0 - 1e-6), "u={u}: {} < {}", s90.p_out, s45.p_out);
    }
}

#[test]
fn inner_objective_limits() {
    let times: Vec<f64> = (0..=10).map(|i| i as f64).collect();
    let zero = vec![[0.0, 0.0]; 11];
    let (j, p) = inner_objective(&times, &[2.0e6; 11], &zero, 1e-7, 1e7).unwrap();
    assert!((p - 2.0e6).abs() < 1e-6);
    assert!((j + 10.0 * 2.0e6).abs() < 1e-3);
    let (_, p) = inner_objective(&times, &[0.0; 11], &vec![[0.01, 1e3]; 11], 1e-7, 1e7).unwrap();
    assert!(p < 0.0);
    let pa: Vec<f64> = times.iter().map(|t| 1e6 + 1e5 * t).collect();
    let (_, p) = inner_objective(&times, &pa, &vec![[0.3, 5e4]; 11], 0.0, 0.0).unwrap();
    assert!((p - 1.5e6).abs() < 1e-6);
}

#[test]
fn feasibility_report_measures_relative_excess() {
    let cfg = OlocConfig::default();
    let (_, sol) = solve_steady(8.0, OlocConfig { horizon: 20.0, segments: 10, ..Default::default() });
    assert_eq!(check_feasibility(&sol.trajectory, &cfg).max_violation(), 0.0);
    let mut tr = sol.trajectory.clone();
    tr.states[3][8] = 1.01 * cfg.torque_max;
    let rep = check_feasibility(&tr, &cfg);
    assert!((rep.torque - 0.01).abs() < 1e-12);
    assert_eq!(rep.max_path_violation(), 0.0);
}

#[test]
fn mismatched_plant_violates_the_pitch_bound() {
    // controls optimised for the baseline replayed on a plant with a raised centre of gravity
    let (_, sol) = solve_steady(11.0, OlocConfig { horizon: 60.0, segments: 30, ..Default::default() });
    assert!(sol.feasible);
    let mut params = ModelParams::default();
    params.platform.cog_z += 20.0;
    let soft = Plant::new(&params, plant().surface.clone(), MooringModel::from_params(&params.mooring).unwrap()).unwrap();
    let env = Environment::steady(11.0, 60.0);
    let sched = sol.control_schedule().unwrap();
    let times = sol.trajectory.times.clone();
    let mut x0 = sol.trajectory.states[0];
    x0[1] += soft.z_ref() - plant().z_ref();
    let tr = simulate_forward(&soft, &sched, &env, &x0, 0.0, 60.0, &times, &Default::default()).unwrap();
    assert!(check_feasibility(&tr, &OlocConfig::default()).platform_pitch > 0.0);
}
