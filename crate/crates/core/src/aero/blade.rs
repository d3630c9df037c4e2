//! 17-node blade definition and the interpolating twist/chord parameterisation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_NODES: usize = 17;
/// 1-based node numbers carrying design variables.
pub const OPT_NODES: [usize; 5] = [4, 6, 9, 12, 17];
/// 1-based node numbers that are knots of the interpolant (fixed + optimizing).
const KNOTS: [usize; 8] = [1, 2, 3, 4, 6, 9, 12, 17];

pub const TWIST_BOUNDS: (f64, f64) = (-0.001, 15.970);
pub const CHORD_BOUNDS: (f64, f64) = (0.014, 5.580);

pub const NODE_RADII: [f64; N_NODES] = [
    2.8667, 5.6000, 8.3333, 11.7500, 15.8500, 19.9500, 24.0500, 28.1500, 32.2500, 36.3500, 40.4500, 44.5500, 48.6500,
    52.7500, 56.1667, 58.9000, 61.6333,
];
pub const NODE_SPANS: [f64; N_NODES] = [
    2.7333, 2.7333, 2.7333, 4.1000, 4.1000, 4.1000, 4.1000, 4.1000, 4.1000, 4.1000, 4.1000, 4.1000, 4.1000, 4.1000,
    2.7333, 2.7333, 2.7333,
];
/// Index into the polar set (Cyl1, Cyl2, DU40, DU35, DU30, DU25, DU21, NACA64) per node.
pub const NODE_AIRFOIL: [usize; N_NODES] = [0, 0, 1, 2, 3, 3, 4, 5, 5, 6, 6, 7, 7, 7, 7, 7, 7];

pub const REFERENCE_TWIST: [f64; N_NODES] = [
    13.308, 13.308, 13.308, 13.308, 11.480, 10.162, 9.011, 7.795, 6.544, 5.361, 4.188, 3.125, 2.319, 1.526, 0.863,
    0.370, 0.106,
];
pub const REFERENCE_CHORD: [f64; N_NODES] = [
    3.542, 3.854, 4.167, 4.557, 4.652, 4.458, 4.249, 4.007, 3.748, 3.502, 3.256, 3.010, 2.764, 2.518, 2.313, 2.086,
    1.419,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BladeDesign {
    /// Twist [deg] at nodes 4, 6, 9, 12, 17.
    pub twist: [f64; 5],
    /// Chord [m] at nodes 4, 6, 9, 12, 17.
    pub chord: [f64; 5],
    pub fixed_twist: [f64; 3],
    pub fixed_chord: [f64; 3],
    pub radius: f64,
    pub hub_radius: f64,
    pub blades: usize,
}

impl BladeDesign {
    /// Reference blade sampled at the optimizing nodes.
    pub fn baseline() -> Self {
        Self::with_nodes([13.31, 11.48, 6.54, 1.53, 0.11], [4.557, 4.007, 3.502, 2.764, 1.419])
    }

    pub fn with_nodes(twist: [f64; 5], chord: [f64; 5]) -> Self {
        Self {
            twist,
            chord,
            fixed_twist: [REFERENCE_TWIST[0], REFERENCE_TWIST[1], REFERENCE_TWIST[2]],
            fixed_chord: [REFERENCE_CHORD[0], REFERENCE_CHORD[1], REFERENCE_CHORD[2]],
            radius: 63.0,
            hub_radius: 1.5,
            blades: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let tw_ok = self.twist.iter().all(|&v| v >= TWIST_BOUNDS.0 && v <= TWIST_BOUNDS.1);
        let ch_ok = self.chord.iter().all(|&v| v >= CHORD_BOUNDS.0 && v <= CHORD_BOUNDS.1);
        if tw_ok && ch_ok && self.radius > self.hub_radius && self.blades > 0 {
            Ok(())
        } else {
            Err(Error::InvalidDesign(format!("blade design outside bounds: {self:?}")))
        }
    }

    /// Stable textual key (bit patterns) used for surface caching.
    pub fn cache_key(&self) -> String {
        let mut s = String::new();
        for v in self.twist.iter().chain(&self.chord).chain(&self.fixed_twist).chain(&self.fixed_chord) {
            s.push_str(&format!("{:016x}", v.to_bits()));
        }
        s.push_str(&format!("{:016x}{:016x}{}", self.radius.to_bits(), self.hub_radius.to_bits(), self.blades));
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BladeGeometry {
    pub radii: [f64; N_NODES],
    pub spans: [f64; N_NODES],
    pub twist: [f64; N_NODES],
    pub chord: [f64; N_NODES],
    pub airfoil: [usize; N_NODES],
    pub radius: f64,
    pub hub_radius: f64,
    pub blades: usize,
}

/// Shape-preserving tangents (Fritsch-Butland harmonic mean, three-point one-sided ends).
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut m = vec![0.0; n];
    if n == 2 {
        m[0] = d[0];
        m[1] = d[0];
        return m;
    }
    for k in 1..n - 1 {
        if d[k - 1] * d[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let mut s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s.signum() != d0.signum() || d0 == 0.0 {
            s = 0.0;
        } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
            s = 3.0 * d0;
        }
        s
    };
    m[0] = end(h[0], h[1], d[0], d[1]);
    m[n - 1] = end(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
    m
}

/// Evaluates the piecewise cubic Bezier whose segment control points are
/// `y_i, y_i + m_i h/3, y_{i+1} - m_{i+1} h/3, y_{i+1}` over `x_i..x_{i+1}`.
fn bezier_eval(x: &[f64], y: &[f64], m: &[f64], at: f64) -> f64 {
    let n = x.len();
    let i = x.iter().rposition(|&v| v <= at).unwrap_or(0).min(n - 2);
    let h = x[i + 1] - x[i];
    let t = ((at - x[i]) / h).clamp(0.0, 1.0);
    let p = [y[i], y[i] + m[i] * h / 3.0, y[i + 1] - m[i + 1] * h / 3.0, y[i + 1]];
    let u = 1.0 - t;
    u * u * u * p[0] + 3.0 * u * u * t * p[1] + 3.0 * u * t * t * p[2] + t * t * t * p[3]
}

fn interpolate(knot_values: &[f64; 8]) -> [f64; N_NODES] {
    let x: Vec<f64> = KNOTS.iter().map(|&k| NODE_RADII[k - 1]).collect();
    let m = pchip_slopes(&x, knot_values);
    let mut out = [0.0; N_NODES];
    for (i, o) in out.iter_mut().enumerate() {
        *o = match KNOTS.iter().position(|&k| k == i + 1) {
            Some(j) => knot_values[j],
            None => bezier_eval(&x, knot_values, &m, NODE_RADII[i]),
        };
    }
    out
}

pub fn blade_geometry(b: &BladeDesign) -> BladeGeometry {
    let tk = [b.fixed_twist[0], b.fixed_twist[1], b.fixed_twist[2], b.twist[0], b.twist[1], b.twist[2], b.twist[3], b.twist[4]];
    let ck = [b.fixed_chord[0], b.fixed_chord[1], b.fixed_chord[2], b.chord[0], b.chord[1], b.chord[2], b.chord[3], b.chord[4]];
    BladeGeometry {
        radii: NODE_RADII,
        spans: NODE_SPANS,
        twist: interpolate(&tk),
        chord: interpolate(&ck),
        airfoil: NODE_AIRFOIL,
        radius: b.radius,
        hub_radius: b.hub_radius,
        blades: b.blades,
    }
}

/// The reference 17-node schedule as a geometry (no interpolation).
pub fn reference_geometry() -> BladeGeometry {
    BladeGeometry {
        radii: NODE_RADII,
        spans: NODE_SPANS,
        twist: REFERENCE_TWIST,
        chord: REFERENCE_CHORD,
        airfoil: NODE_AIRFOIL,
        radius: 63.0,
        hub_radius: 1.5,
        blades: 3,
    }
}
