use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BASELINE_D_BASE: f64 = 6.5;
pub const STEEL_DENSITY: f64 = 8500.0;

/// Linearly tapered hollow steel tower.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerDesign {
    pub t_base: f64,
    pub t_tip: f64,
    pub d_tip: f64,
    pub l: f64,
    #[serde(default = "default_d_base")]
    pub d_base: f64,
}

fn default_d_base() -> f64 {
    BASELINE_D_BASE
}

impl TowerDesign {
    pub fn new(t_base: f64, t_tip: f64, d_tip: f64, l: f64) -> Self {
        Self { t_base, t_tip, d_tip, l, d_base: BASELINE_D_BASE }
    }

    pub fn baseline() -> Self {
        Self::new(0.027, 0.019, 3.870, 77.6)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.t_base > 0.0
            && self.t_tip > 0.0
            && self.l > 0.0
            && self.d_tip > 2.0 * self.t_tip
            && self.d_base > 2.0 * self.t_base
            && [self.t_base, self.t_tip, self.d_tip, self.l, self.d_base].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDesign(format!("degenerate tower geometry {self:?}")))
        }
    }

    /// Outer diameter and wall thickness at height `z` above the base.
    pub fn section(&self, z: f64) -> (f64, f64) {
        let s = (z / self.l).clamp(0.0, 1.0);
        (self.d_base + (self.d_tip - self.d_base) * s, self.t_base + (self.t_tip - self.t_base) * s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TowerProperties {
    pub mass: f64,
    /// Pitch inertia about the tower's own centre of gravity.
    pub inertia: f64,
    /// Centre-of-gravity height above the tower base.
    pub cog_height: f64,
    pub base_section_modulus: f64,
    /// max over the span of (lever arm to the top) / (section modulus) [1/m^2];
    /// fore-aft stress is thrust times this factor.
    pub stress_factor: f64,
}

pub fn section_modulus(d: f64, t: f64) -> f64 {
    let di = d - 2.0 * t;
    std::f64::consts::PI / 64.0 * (d.powi(4) - di.powi(4)) / (d / 2.0)
}

const SLICES: usize = 400;

pub fn tower_properties(t: &TowerDesign, density: f64) -> Result<TowerProperties> {
    t.validate()?;
    if !(density > 0.0) {
        return Err(Error::InvalidDesign(format!("material density must be positive, got {density}")));
    }
    let dz = t.l / SLICES as f64;
    let (mut m, mut mz, mut mzz, mut ring) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..SLICES {
        let z = (i as f64 + 0.5) * dz;
        let (d, th) = t.section(z);
        let (ro, ri) = (d / 2.0, d / 2.0 - th);
        if ri <= 0.0 {
            return Err(Error::InvalidDesign(format!("inner diameter vanishes at z = {z:.2} m")));
        }
        let dm = density * std::f64::consts::PI * (ro * ro - ri * ri) * dz;
        m += dm;
        mz += dm * z;
        mzz += dm * z * z;
        ring += dm * (ro * ro + ri * ri) / 4.0;
    }
    let cog = mz / m;
    let inertia = mzz - m * cog * cog + ring;

    let samples = 2000;
    let mut factor: f64 = 0.0;
    for i in 0..=samples {
        let z = t.l * i as f64 / samples as f64;
        let (d, th) = t.section(z);
        factor = factor.max((t.l - z) / section_modulus(d, th));
    }
    Ok(TowerProperties {
        mass: m,
        inertia,
        cog_height: cog,
        base_section_modulus: section_modulus(t.d_base, t.t_base),
        stress_factor: factor,
    })
}

/// Quasi-static fore-aft bending stress from hub thrust [Pa].
pub fn tower_stress(thrust: f64, props: &TowerProperties) -> f64 {
    thrust.abs() * props.stress_factor
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_tube_closed_form() {
        let (d, th, l) = (5.0, 0.03, 80.0);
        let t = TowerDesign { t_base: th, t_tip: th, d_tip: d, l, d_base: d };
        let p = tower_properties(&t, 8000.0).unwrap();
        let oracle = 8000.0 * std::f64::consts::PI * (d - th) * th * l;
        assert!((p.mass - oracle).abs() / oracle < 1e-12);
        assert!((p.cog_height - l / 2.0).abs() < 1e-9);
        // uniform section: the critical section is the base
        assert!((p.stress_factor - l / p.base_section_modulus).abs() / p.stress_factor < 1e-12);
    }

    #[test]
    fn paper_tower_masses() {
        let base = tower_properties(&TowerDesign::baseline(), STEEL_DENSITY).unwrap();
        assert!((base.mass / 1e3 - 249.6).abs() / 249.6 < 0.02);
        let opt = tower_properties(&TowerDesign::new(0.042, 0.012, 4.95, 83.04), STEEL_DENSITY).unwrap();
        assert!((opt.mass / 1e3 - 344.4).abs() / 344.4 < 0.02);
    }

    #[test]
    fn stress_from_uniform_annulus() {
        let (d, th, l) = (6.5_f64, 0.027_f64, 77.6);
        let t = TowerDesign { t_base: th, t_tip: th, d_tip: d, l, d_base: d };
        let p = tower_properties(&t, STEEL_DENSITY).unwrap();
        let i = std::f64::consts::PI / 64.0 * (d.powi(4) - (d - 2.0 * th).powi(4));
        let oracle = 500e3 * l / (i / (d / 2.0));
        assert!((tower_stress(500e3, &p) - oracle).abs() / oracle < 1e-12);
        assert_eq!(tower_stress(0.0, &p), 0.0);
        assert!((tower_stress(2.0 * 3e5, &p) - 2.0 * tower_stress(3e5, &p)).abs() < 1e-6);
    }

    #[test]
    fn degenerate_geometry_is_rejected() {
        let t = TowerDesign::new(0.027, 2.0, 3.87, 77.6);
        assert!(tower_properties(&t, STEEL_DENSITY).is_err());
    }
}
