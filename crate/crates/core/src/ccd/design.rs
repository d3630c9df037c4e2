use serde::{Deserialize, Serialize};

use crate::aero::blade::{CHORD_BOUNDS, TWIST_BOUNDS};
use crate::aero::BladeDesign;
use crate::error::{Error, Result};
use crate::model::TowerDesign;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignMode {
    TowerOnly,
    TowerAndBlades,
}

impl DesignMode {
    pub fn dim(&self) -> usize {
        match self {
            DesignMode::TowerOnly => 4,
            DesignMode::TowerAndBlades => 14,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            DesignMode::TowerOnly => "tower-only",
            DesignMode::TowerAndBlades => "tower-and-blades",
        }
    }
}

impl std::str::FromStr for DesignMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tower-only" => Ok(DesignMode::TowerOnly),
            "tower-and-blades" => Ok(DesignMode::TowerAndBlades),
            _ => Err(Error::Argument(format!("unknown design mode '{s}' (expected tower-only or tower-and-blades)"))),
        }
    }
}

pub const TOWER_VARIABLES: [&str; 4] = ["t_tip", "d_tip", "t_base", "l"];

/// Names of the decision-vector entries, tower first.
pub fn variable_names(mode: DesignMode) -> Vec<String> {
    let mut v: Vec<String> = TOWER_VARIABLES.iter().map(|s| s.to_string()).collect();
    if mode == DesignMode::TowerAndBlades {
        for n in crate::aero::blade::OPT_NODES {
            v.push(format!("twist_{n}"));
        }
        for n in crate::aero::blade::OPT_NODES {
            v.push(format!("chord_{n}"));
        }
    }
    v
}

pub fn variable_units(mode: DesignMode) -> Vec<&'static str> {
    let mut v = vec!["m"; 4];
    if mode == DesignMode::TowerAndBlades {
        v.extend(["deg"; 5]);
        v.extend(["m"; 5]);
    }
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantDesign {
    pub tower: TowerDesign,
    pub blade: BladeDesign,
    pub mode: DesignMode,
}

impl PlantDesign {
    pub fn baseline(mode: DesignMode) -> Self {
        Self { tower: TowerDesign::baseline(), blade: BladeDesign::baseline(), mode }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let d: Self = toml::from_str(text).map_err(|e| Error::Parse(format!("design file: {e}")))?;
        d.tower.validate()?;
        d.blade.validate()?;
        Ok(d)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Decision vector `[t_tip, d_tip, t_base, l]` followed in blade mode by five twists and five chords.
    pub fn to_vector(&self) -> Vec<f64> {
        let t = &self.tower;
        let mut v = vec![t.t_tip, t.d_tip, t.t_base, t.l];
        if self.mode == DesignMode::TowerAndBlades {
            v.extend_from_slice(&self.blade.twist);
            v.extend_from_slice(&self.blade.chord);
        }
        v
    }

    /// Rebuilds a design from a decision vector, taking fixed parts from `template`.
    pub fn from_vector(template: &PlantDesign, x: &[f64]) -> Result<Self> {
        let mode = template.mode;
        if x.len() != mode.dim() {
            return Err(Error::Argument(format!("{} design vector needs {} entries, got {}", mode.as_str(), mode.dim(), x.len())));
        }
        let mut d = template.clone();
        d.tower.t_tip = x[0];
        d.tower.d_tip = x[1];
        d.tower.t_base = x[2];
        d.tower.l = x[3];
        if mode == DesignMode::TowerAndBlades {
            d.blade.twist.copy_from_slice(&x[4..9]);
            d.blade.chord.copy_from_slice(&x[9..14]);
        }
        Ok(d)
    }
}

/// Box on the tower variables (same order as the decision vector).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TowerBox {
    pub lower: [f64; 4],
    pub upper: [f64; 4],
}

impl Default for TowerBox {
    fn default() -> Self {
        Self { lower: [0.008, 3.0, 0.015, 65.0], upper: [0.040, 6.0, 0.060, 95.0] }
    }
}

impl TowerBox {
    pub fn validate(&self) -> Result<()> {
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(l < u) || !(*l > 0.0)) {
            return Err(Error::Argument(format!("tower box needs 0 < lower < upper: {self:?}")));
        }
        Ok(())
    }

    /// Full decision-vector bounds for `mode`.
    pub fn bounds(&self, mode: DesignMode) -> (Vec<f64>, Vec<f64>) {
        let (mut lo, mut hi) = (self.lower.to_vec(), self.upper.to_vec());
        if mode == DesignMode::TowerAndBlades {
            lo.extend([TWIST_BOUNDS.0; 5]);
            hi.extend([TWIST_BOUNDS.1; 5]);
            lo.extend([CHORD_BOUNDS.0; 5]);
            hi.extend([CHORD_BOUNDS.1; 5]);
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_round_trip() {
        let d = PlantDesign::baseline(DesignMode::TowerAndBlades);
        let x = d.to_vector();
        assert_eq!(x.len(), 14);
        assert_eq!(x[3], 77.6);
        assert_eq!(PlantDesign::from_vector(&d, &x).unwrap(), d);
        let t = PlantDesign::baseline(DesignMode::TowerOnly);
        assert_eq!(t.to_vector(), vec![0.019, 3.870, 0.027, 77.6]);
    }

    #[test]
    fn baseline_inside_default_box() {
        let (lo, hi) = TowerBox::default().bounds(DesignMode::TowerAndBlades);
        let x = PlantDesign::baseline(DesignMode::TowerAndBlades).to_vector();
        assert!(x.iter().zip(lo.iter().zip(&hi)).all(|(v, (l, h))| v >= l && v <= h));
    }
}
