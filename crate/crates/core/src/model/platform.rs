//! Spar hull geometry (axisymmetric sections) and the hydrostatic, added-mass and
//! viscous-drag quantities derived from it.

use serde::{Deserialize, Serialize};

use crate::ad::Scalar;
use crate::error::{Error, Result};

/// Conical hull section between two elevations (relative to SWL, `z_top > z_bottom`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HullSection {
    pub z_top: f64,
    pub z_bottom: f64,
    pub d_top: f64,
    pub d_bottom: f64,
}

impl HullSection {
    fn diameter(&self, z: f64) -> f64 {
        let s = (z - self.z_bottom) / (self.z_top - self.z_bottom);
        self.d_bottom + (self.d_top - self.d_bottom) * s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlatformParams {
    pub sections: Vec<HullSection>,
    /// Platform COG elevation at the design pose [m] (reference point of the body frame).
    pub cog_z: f64,
    /// Structural plus fixed ballast mass [kg]; variable ballast is added by the heave balance.
    pub structural_mass: f64,
    /// Pitch inertia about the platform COG [kg m^2].
    pub pitch_inertia: f64,
    pub water_density: f64,
    pub added_mass_coefficient: f64,
    pub drag_coefficient: f64,
    /// Quadratic drag coefficient of the keel disc in heave.
    pub heave_drag_coefficient: f64,
    pub linear_damping_surge: f64,
    pub linear_damping_heave: f64,
    /// Morison strips along the submerged hull.
    pub drag_strips: usize,
}

impl Default for PlatformParams {
    fn default() -> Self {
        Self {
            sections: vec![
                HullSection { z_top: 10.0, z_bottom: -4.0, d_top: 6.5, d_bottom: 6.5 },
                HullSection { z_top: -4.0, z_bottom: -12.0, d_top: 6.5, d_bottom: 9.4 },
                HullSection { z_top: -12.0, z_bottom: -120.0, d_top: 9.4, d_bottom: 9.4 },
            ],
            cog_z: -89.9155,
            structural_mass: 6.0e6,
            pitch_inertia: 4.2292e9,
            water_density: 1025.0,
            added_mass_coefficient: 0.97,
            drag_coefficient: 0.6,
            heave_drag_coefficient: 1.0,
            linear_damping_surge: 1.0e5,
            linear_damping_heave: 1.3e5,
            drag_strips: 20,
        }
    }
}

/// One Morison strip: body-frame height above the COG, length, diameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Strip {
    pub z_body: f64,
    pub length: f64,
    pub diameter: f64,
}

/// Integrated hull quantities at the design pose.
#[derive(Clone, Debug, PartialEq)]
pub struct HullProperties {
    pub volume: f64,
    /// Centre of buoyancy elevation (SWL frame).
    pub cb_z: f64,
    pub waterplane_area: f64,
    pub waterplane_inertia: f64,
    /// Displaced-fluid pitch inertia about the platform COG (includes density).
    pub displaced_inertia: f64,
    pub keel_diameter: f64,
    pub draft: f64,
    pub freeboard: f64,
    pub strips: Vec<Strip>,
}

impl PlatformParams {
    pub fn validate(&self) -> Result<()> {
        let ok = !self.sections.is_empty()
            && self.sections.iter().all(|s| s.z_top > s.z_bottom && s.d_top > 0.0 && s.d_bottom > 0.0)
            && self.sections.windows(2).all(|w| (w[0].z_bottom - w[1].z_top).abs() < 1e-9)
            && self.sections[0].z_top > 0.0
            && self.sections[self.sections.len() - 1].z_bottom < 0.0
            && self.water_density > 0.0
            && self.added_mass_coefficient > 0.0
            && self.structural_mass >= 0.0
            && self.drag_strips > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDesign("platform sections must be contiguous, ordered top-down and pierce the waterline".into()))
        }
    }

    fn diameter_at(&self, z: f64) -> Option<f64> {
        self.sections.iter().find(|s| z <= s.z_top && z >= s.z_bottom).map(|s| s.diameter(z))
    }

    pub fn hull(&self) -> Result<HullProperties> {
        self.validate()?;
        let rho = self.water_density;
        let bottom = self.sections[self.sections.len() - 1].z_bottom;
        let n = 4000;
        let dz = -bottom / n as f64;
        let (mut vol, mut vz, mut izz) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let z = bottom + (i as f64 + 0.5) * dz;
            let d = self.diameter_at(z).unwrap_or(0.0);
            let a = std::f64::consts::PI * d * d / 4.0 * dz;
            vol += a;
            vz += a * z;
            izz += a * (z - self.cog_z).powi(2);
        }
        let dw = self.diameter_at(0.0).unwrap_or(0.0);
        let m = self.drag_strips;
        let sdz = -bottom / m as f64;
        let strips = (0..m)
            .map(|i| {
                let z = bottom + (i as f64 + 0.5) * sdz;
                Strip { z_body: z - self.cog_z, length: sdz, diameter: self.diameter_at(z).unwrap_or(0.0) }
            })
            .collect();
        Ok(HullProperties {
            volume: vol,
            cb_z: vz / vol,
            waterplane_area: std::f64::consts::PI * dw * dw / 4.0,
            waterplane_inertia: std::f64::consts::PI / 64.0 * dw.powi(4),
            displaced_inertia: rho * izz,
            keel_diameter: self.sections[self.sections.len() - 1].d_bottom,
            draft: -bottom,
            freeboard: self.sections[0].z_top,
            strips,
        })
    }
}

/// Hydrostatic restoring loads from a potential: earth-vertical buoyancy that
/// varies linearly with heave over the waterplane, and a pitch moment from the
/// buoyancy-centre lever and the waterplane inertia. Returns the earth-frame
/// vertical force and the pitch moment.
pub fn hydrostatic_earth<S: Scalar>(dz: S, theta: S, hull: &HullProperties, cog_z: f64, rho: f64, g: f64) -> (S, S) {
    let fz = (dz * (-hull.waterplane_area) + hull.volume) * (rho * g);
    let lever = hull.cb_z - cog_z;
    let (s, c) = (theta.sin(), theta.cos());
    let my = s * (-rho * g * hull.volume * lever) - s * c * (rho * g * hull.waterplane_inertia);
    (fz, my)
}

/// Potential energy of [`hydrostatic_earth`] (zero at the design pose).
pub fn hydrostatic_potential(dz: f64, theta: f64, hull: &HullProperties, cog_z: f64, rho: f64, g: f64) -> f64 {
    let lever = hull.cb_z - cog_z;
    -rho * g * hull.volume * dz + 0.5 * rho * g * hull.waterplane_area * dz * dz + rho * g * hull.volume * lever * (1.0 - theta.cos())
        + 0.5 * rho * g * hull.waterplane_inertia * theta.sin().powi(2)
}

/// Errors when the heave excursion `dz` leaves the hull (fully submerged or emerged).
pub fn check_draft(dz: f64, hull: &HullProperties) -> Result<()> {
    if -dz >= hull.freeboard || dz >= hull.draft || !dz.is_finite() {
        Err(Error::OutOfEnvelope(format!("platform heave excursion {dz:.3} m leaves the hull")))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spar_hull_quantities() {
        let p = PlatformParams::default();
        let h = p.hull().unwrap();
        let v = 108.0 * std::f64::consts::PI / 4.0 * 9.4f64.powi(2)
            + 8.0 * std::f64::consts::PI / 12.0 * (9.4f64.powi(2) + 9.4 * 6.5 + 6.5f64.powi(2))
            + 4.0 * std::f64::consts::PI / 4.0 * 6.5f64.powi(2);
        assert!((h.volume - v).abs() < 1e-3 * v, "{} vs {v}", h.volume);
        assert!((h.volume - 8029.0).abs() < 5.0);
        assert!((h.cb_z + 62.06).abs() < 0.1, "{}", h.cb_z);
        assert!((h.waterplane_area - 33.18).abs() < 0.01);
        let total: f64 = h.strips.iter().map(|s| s.length).sum();
        assert!((total - 120.0).abs() < 1e-9);
    }

    #[test]
    fn heave_stiffness_and_pitch_restoring() {
        let p = PlatformParams::default();
        let h = p.hull().unwrap();
        let (rho, g) = (1025.0, 9.80665);
        let (f0, _) = hydrostatic_earth(0.0, 0.0, &h, p.cog_z, rho, g);
        let (f1, _) = hydrostatic_earth(0.5, 0.0, &h, p.cog_z, rho, g);
        assert!(((f1 - f0) + rho * g * h.waterplane_area * 0.5).abs() < 1e-6 * f0);
        let (_, m) = hydrostatic_earth(0.0, 0.02, &h, p.cog_z, rho, g);
        assert!(m < 0.0);
    }

    #[test]
    fn hydrostatics_derive_from_potential() {
        let p = PlatformParams::default();
        let h = p.hull().unwrap();
        let (rho, g, e) = (1025.0, 9.80665, 1e-5);
        let (dz, th) = (0.7, 0.05);
        let (fz, my) = hydrostatic_earth(dz, th, &h, p.cog_z, rho, g);
        let u = |a: f64, b: f64| hydrostatic_potential(a, b, &h, p.cog_z, rho, g);
        let fz_fd = -(u(dz + e, th) - u(dz - e, th)) / (2.0 * e);
        let my_fd = -(u(dz, th + e) - u(dz, th - e)) / (2.0 * e);
        assert!((fz - fz_fd).abs() < 1e-6 * fz.abs());
        assert!((my - my_fd).abs() < 1e-6 * my.abs());
    }

    #[test]
    fn envelope() {
        let h = PlatformParams::default().hull().unwrap();
        assert!(check_draft(0.0, &h).is_ok());
        assert!(check_draft(-10.0, &h).is_err());
        assert!(check_draft(120.0, &h).is_err());
    }
}
