use serde::{Deserialize, Serialize};

use super::catenary::{solve_catenary, LineProperties};
use super::surrogate::MooringSurrogate;
use crate::ad::{lift, HyperDual, Scalar};
use crate::error::{Error, Result};

/// Radial line arrangement around the spar axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MooringLayout {
    /// Line headings from the +x (downwind) axis [deg].
    pub azimuths_deg: Vec<f64>,
    pub anchor_radius: f64,
    /// Anchor elevation (negative, below SWL).
    pub anchor_z: f64,
    pub fairlead_radius: f64,
    /// Fairlead elevation relative to SWL at the design pose.
    pub fairlead_z: f64,
}

impl MooringLayout {
    pub fn oc3() -> Self {
        Self { azimuths_deg: vec![180.0, 60.0, -60.0], anchor_radius: 853.87, anchor_z: -320.0, fairlead_radius: 5.2, fairlead_z: -70.0 }
    }
}

/// Platform pose: surge, heave of the platform reference point (earth), pitch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub z: f64,
    pub theta: f64,
}

/// Line geometry resolved in the platform frame (origin at the platform COG).
#[derive(Clone, Debug, PartialEq)]
pub struct MooringGeometry {
    pub layout: MooringLayout,
    /// Fairlead height above the platform reference point.
    pub fairlead_body_z: f64,
}

/// Earth-frame surge force, heave force and pitch moment about the platform reference point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MooringLoad {
    pub fx: f64,
    pub fz: f64,
    pub my: f64,
}

impl MooringGeometry {
    pub fn new(layout: MooringLayout, platform_ref_z: f64) -> Self {
        let fairlead_body_z = layout.fairlead_z - platform_ref_z;
        Self { layout, fairlead_body_z }
    }

    /// Per-line (l, h) and the unit horizontal direction (fairlead minus anchor) in x.
    fn line_offsets<S: Scalar>(&self, x: S, z: S, theta: S) -> Vec<(S, S, S, S, S)> {
        let (s, c) = (theta.sin(), theta.cos());
        let lay = &self.layout;
        lay.azimuths_deg
            .iter()
            .map(|az| {
                let b = az.to_radians();
                let xf = lay.fairlead_radius * b.cos();
                let yf = lay.fairlead_radius * b.sin();
                let rx = c * xf + s * self.fairlead_body_z;
                let rz = -(s * xf) + c * self.fairlead_body_z;
                let dx = x + rx - lay.anchor_radius * b.cos();
                let dy = yf - lay.anchor_radius * b.sin();
                let l = (dx * dx + dy * dy).sqrt();
                let h = z + rz - lay.anchor_z;
                (l, h, dx / l, rx, rz)
            })
            .collect()
    }

    fn aggregate<S: Scalar>(&self, x: S, z: S, theta: S, mut forces: impl FnMut(S, S) -> [S; 2]) -> [S; 3] {
        let mut fx = S::cst(0.0);
        let mut fz = S::cst(0.0);
        let mut my = S::cst(0.0);
        for (l, h, ux, rx, rz) in self.line_offsets(x, z, theta) {
            let [hf, vf] = forces(l, h);
            let px = -(hf * ux);
            let pz = -vf;
            fx += px;
            fz += pz;
            my += rz * px - rx * pz;
        }
        [fx, fz, my]
    }

    /// Surrogate loads (smooth blend across regimes) for any scalar type.
    pub fn loads_smooth<S: Scalar>(&self, sur: &MooringSurrogate, x: S, z: S, theta: S) -> [S; 3] {
        lift(&[x, z, theta], |v: &[HyperDual<3>; 3]| self.aggregate(v[0], v[1], v[2], |l, h| sur.eval_smooth(l, h)))
    }

    /// Surrogate loads with hard regime selection and domain checks.
    pub fn loads_surrogate(&self, sur: &MooringSurrogate, pose: Pose) -> Result<MooringLoad> {
        let mut err = None;
        let [fx, fz, my] = self.aggregate(pose.x, pose.z, pose.theta, |l, h| match sur.eval(l, h) {
            Ok((a, b)) => [a, b],
            Err(e) => {
                err.get_or_insert(e);
                [0.0, 0.0]
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(MooringLoad { fx, fz, my }),
        }
    }

    /// Loads from the exact catenary solver.
    pub fn loads_exact(&self, props: &LineProperties, pose: Pose) -> Result<MooringLoad> {
        let mut err: Option<Error> = None;
        let [fx, fz, my] = self.aggregate(pose.x, pose.z, pose.theta, |l, h| match solve_catenary(l, h, props) {
            Ok(s) => [s.h_force, s.v_force],
            Err(e) => {
                err.get_or_insert(e);
                [0.0, 0.0]
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(MooringLoad { fx, fz, my }),
        }
    }

    /// (l, h) of every line at `pose`.
    pub fn offsets(&self, pose: Pose) -> Vec<(f64, f64)> {
        self.line_offsets(pose.x, pose.z, pose.theta).into_iter().map(|(l, h, ..)| (l, h)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_layout_is_balanced_and_restoring() {
        let g = MooringGeometry::new(MooringLayout::oc3(), -89.9155);
        let p = LineProperties::oc3();
        let at = g.loads_exact(&p, Pose { x: 0.0, z: -89.9155, theta: 0.0 }).unwrap();
        assert!(at.fx.abs() < 1e-6 * at.fz.abs());
        assert!(at.my.abs() < 1e-6 * at.fz.abs());
        let off = g.loads_exact(&p, Pose { x: 5.0, z: -89.9155, theta: 0.0 }).unwrap();
        assert!(off.fx < 0.0);
    }
}
