//! Forward simulation of the plant under prescribed control-rate trajectories.

use std::io::Write;
use std::path::Path;

use super::dynamics::{outputs, state_derivative, EnvSample, NU, NX, STATE_NAMES};
use super::integrate::{dopri5, OdeOptions};
use super::plant::Plant;
use crate::environment::{WaveField, WindProfile};
use crate::error::{Error, Result};

/// Control rates that are quadratic on each segment, through the values at the
/// segment start, midpoint and end (the collocation representation).
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSchedule {
    /// Node and midpoint times, `2 N + 1` entries.
    pub times: Vec<f64>,
    pub values: Vec<[f64; NU]>,
}

impl ControlSchedule {
    pub fn new(times: Vec<f64>, values: Vec<[f64; NU]>) -> Result<Self> {
        if times.len() < 3 || times.len() % 2 == 0 || times.len() != values.len() || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument("control schedule needs 2N+1 increasing times with matching values".into()));
        }
        Ok(Self { times, values })
    }

    pub fn constant(u: [f64; NU], t0: f64, t1: f64) -> Self {
        Self { times: vec![t0, 0.5 * (t0 + t1), t1], values: vec![u; 3] }
    }

    pub fn segments(&self) -> usize {
        (self.times.len() - 1) / 2
    }

    /// Segment boundaries (node times).
    pub fn nodes(&self) -> Vec<f64> {
        self.times.iter().step_by(2).copied().collect()
    }

    pub fn eval(&self, t: f64) -> [f64; NU] {
        let nseg = self.segments();
        let nodes = self.nodes();
        let k = (nodes.partition_point(|&v| v <= t).max(1) - 1).min(nseg - 1);
        let (t0, tm, t1) = (self.times[2 * k], self.times[2 * k + 1], self.times[2 * k + 2]);
        let (u0, um, u1) = (self.values[2 * k], self.values[2 * k + 1], self.values[2 * k + 2]);
        let l0 = (t - tm) * (t - t1) / ((t0 - tm) * (t0 - t1));
        let lm = (t - t0) * (t - t1) / ((tm - t0) * (tm - t1));
        let l1 = (t - t0) * (t - tm) / ((t1 - t0) * (t1 - tm));
        std::array::from_fn(|i| l0 * u0[i] + lm * um[i] + l1 * u1[i])
    }
}

/// Wind and wave histories.
#[derive(Clone, Debug)]
pub struct Environment {
    pub wind: WindProfile,
    pub waves: WaveField,
}

impl Environment {
    pub fn steady(u: f64, duration: f64) -> Self {
        Self { wind: WindProfile::steady(u, duration), waves: WaveField::calm() }
    }

    pub fn sample(&self, t: f64) -> EnvSample {
        EnvSample { wind: self.wind.speed(t), wave: self.waves.sample(t) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<[f64; NX]>,
    pub controls: Vec<[f64; NU]>,
    pub p_u: Vec<f64>,
    pub sigma: Vec<f64>,
    pub wind: Vec<f64>,
}

pub const TRAJECTORY_HEADER: [&str; 12] = ["t", "x_p", "z_p", "theta_p", "v_x", "v_z", "omega_y", "Omega", "theta_b", "tau_g", "P_u", "sigma"];

impl Trajectory {
    pub fn from_states(plant: &Plant, env: &Environment, times: Vec<f64>, states: Vec<[f64; NX]>, controls: Vec<[f64; NU]>) -> Self {
        let mut p_u = Vec::with_capacity(times.len());
        let mut sigma = Vec::with_capacity(times.len());
        let mut wind = Vec::with_capacity(times.len());
        for (t, x) in times.iter().zip(&states) {
            let u = env.wind.speed(*t);
            let o = outputs(plant, x, u);
            p_u.push(o.p_u);
            sigma.push(o.sigma);
            wind.push(u);
        }
        Self { times, states, controls, p_u, sigma, wind }
    }

    /// CSV with the trajectory schema, optionally followed by the control-rate columns.
    pub fn to_csv(&self, with_rates: bool) -> String {
        let mut s = TRAJECTORY_HEADER.join(",");
        if with_rates {
            s.push_str(",theta_b_rate,tau_g_rate");
        }
        s.push('\n');
        for i in 0..self.times.len() {
            let mut row: Vec<String> = vec![format!("{}", self.times[i])];
            row.extend(self.states[i].iter().map(|v| format!("{v}")));
            row.push(format!("{}", self.p_u[i]));
            row.push(format!("{}", self.sigma[i]));
            if with_rates {
                row.extend(self.controls[i].iter().map(|v| format!("{v}")));
            }
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path, with_rates: bool) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv(with_rates).as_bytes())?;
        Ok(())
    }

    /// Parses the CSV written by [`Self::to_csv`] (outputs are read back as stored).
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        let with_rates = headers.len() == TRAJECTORY_HEADER.len() + NU;
        if headers.iter().take(TRAJECTORY_HEADER.len()).ne(TRAJECTORY_HEADER.iter().copied()) {
            return Err(Error::Parse("unexpected trajectory header".into()));
        }
        let mut t = Trajectory { times: vec![], states: vec![], controls: vec![], p_u: vec![], sigma: vec![], wind: vec![] };
        for rec in rdr.records() {
            let rec = rec?;
            let v: Vec<f64> = rec.iter().map(|s| s.parse::<f64>().map_err(|e| Error::Parse(e.to_string()))).collect::<Result<_>>()?;
            t.times.push(v[0]);
            t.states.push(std::array::from_fn(|i| v[1 + i]));
            t.p_u.push(v[1 + NX]);
            t.sigma.push(v[2 + NX]);
            t.controls.push(if with_rates { [v[3 + NX], v[4 + NX]] } else { [0.0; NU] });
        }
        Ok(t)
    }

    pub fn channel(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|x| x[i]).collect()
    }

    pub fn state_names() -> [&'static str; NX] {
        STATE_NAMES
    }
}

/// Integrates the plant from `x0` at `t_i` to `t_f`, restarting at every control
/// segment boundary, and reports the state at `sample_times`.
pub fn simulate_forward(
    plant: &Plant,
    controls: &ControlSchedule,
    env: &Environment,
    x0: &[f64; NX],
    t_i: f64,
    t_f: f64,
    sample_times: &[f64],
    opts: &OdeOptions,
) -> Result<Trajectory> {
    if !(t_f > t_i) {
        return Err(Error::Argument(format!("simulation needs t_f > t_i (got {t_i}, {t_f})")));
    }
    let mut breaks: Vec<f64> = controls.nodes().into_iter().filter(|&t| t > t_i && t < t_f).collect();
    breaks.insert(0, t_i);
    breaks.push(t_f);
    let mut states = Vec::with_capacity(sample_times.len());
    let mut y = x0.to_vec();
    let mut idx = 0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let last = b == t_f;
        let mut local = Vec::new();
        while idx < sample_times.len() && (sample_times[idx] < b || (last && sample_times[idx] <= b)) {
            if sample_times[idx] >= a {
                local.push(sample_times[idx]);
            }
            idx += 1;
        }
        let rhs = |t: f64, y: &[f64]| -> Result<Vec<f64>> {
            let x: [f64; NX] = std::array::from_fn(|i| y[i]);
            Ok(state_derivative(plant, &x, &controls.eval(t), &env.sample(t))?.to_vec())
        };
        let (ys, yend) = dopri5(rhs, a, &y, b, &local, opts)?;
        states.extend(ys.into_iter().map(|v| std::array::from_fn(|i| v[i])));
        y = yend;
    }
    let times: Vec<f64> = sample_times.iter().copied().filter(|&t| t >= t_i && t <= t_f).collect();
    let ctrl = times.iter().map(|&t| controls.eval(t)).collect();
    Ok(Trajectory::from_states(plant, env, times, states, ctrl))
}
