//! Scenario files: one TOML document with [model], [wind], [wave], [oloc], [ccd], [fatigue], [output].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::fatigue::{FatigueSpec, MeanStress};
use crate::aero::{nrel5mw_polars, BladeDesign, SurfaceGrid};
use crate::ccd::{CcdConfig, PlantEvaluator};
use crate::environment::{weibull_bins, WaveSpec, WindBinSet, WindTemplate, GRAVITY};
use crate::error::{Error, Result};
use crate::model::plant::{MooringParams, RotorNacelleParams};
use crate::model::platform::PlatformParams;
use crate::model::tower::STEEL_DENSITY;
use crate::model::{LoadSwitches, ModelParams, MooringModel, Plant, TowerDesign};
use crate::oloc::OlocConfig;

/// Environment variable naming the scenario used when none is given.
pub const SCENARIO_ENV: &str = "FOWT_CCD_SCENARIO";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub gravity: f64,
    pub steel_density: f64,
    pub tower: TowerDesign,
    pub blade: BladeDesign,
    pub rotor: RotorNacelleParams,
    pub platform: PlatformParams,
    pub mooring: MooringParams,
    pub loads: LoadSwitches,
    pub surface_grid: SurfaceGrid,
    /// Directory for cached coefficient surfaces.
    pub surface_cache: Option<String>,
}

impl Default for ModelSection {
    fn default() -> Self {
        let p = ModelParams::default();
        Self {
            gravity: GRAVITY,
            steel_density: STEEL_DENSITY,
            tower: p.tower,
            blade: p.blade,
            rotor: p.rotor,
            platform: p.platform,
            mooring: p.mooring,
            loads: p.loads,
            surface_grid: SurfaceGrid::default(),
            surface_cache: None,
        }
    }
}

impl ModelSection {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            gravity: self.gravity,
            steel_density: self.steel_density,
            tower: self.tower,
            blade: self.blade.clone(),
            rotor: self.rotor.clone(),
            platform: self.platform.clone(),
            mooring: self.mooring.clone(),
            loads: self.loads,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindMode {
    Steady,
    Varied,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindSection {
    pub weibull_k: f64,
    pub weibull_c: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub step: f64,
    pub profile: WindMode,
    pub seed: u64,
    pub template: WindTemplate,
    pub power_curve_duration: f64,
}

impl Default for WindSection {
    fn default() -> Self {
        Self {
            weibull_k: 2.0,
            weibull_c: 13.44,
            u_min: 3.0,
            u_max: 25.0,
            step: 1.0,
            profile: WindMode::Varied,
            seed: 1,
            template: WindTemplate::default(),
            power_curve_duration: 600.0,
        }
    }
}

impl WindSection {
    pub fn template(&self) -> WindTemplate {
        match self.profile {
            WindMode::Steady => WindTemplate::steady(),
            WindMode::Varied => self.template.clone(),
        }
    }

    pub fn speeds(&self) -> Vec<f64> {
        let n = ((self.u_max - self.u_min) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.u_min + self.step * i as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveSection {
    pub enabled: bool,
    pub hs: f64,
    pub tp: f64,
    pub components: usize,
    pub seed: u64,
}

impl Default for WaveSection {
    fn default() -> Self {
        let w = WaveSpec::default();
        Self { enabled: false, hs: w.hs, tp: w.tp, components: w.components, seed: w.seed }
    }
}

impl WaveSection {
    pub fn spec(&self) -> WaveSpec {
        WaveSpec { hs: self.hs, tp: self.tp, components: self.components, seed: self.seed }
    }

    pub fn active(&self) -> Option<WaveSpec> {
        self.enabled.then(|| self.spec())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FatigueSection {
    pub slope: f64,
    pub cycles_at_ultimate: f64,
    pub lifetime_years: f64,
    pub mean_stress: MeanStress,
    /// Sampling step of the re-simulated stress history [s].
    pub sample_dt: f64,
}

impl Default for FatigueSection {
    fn default() -> Self {
        let f = FatigueSpec::default();
        Self { slope: f.slope, cycles_at_ultimate: f.cycles_at_ultimate, lifetime_years: f.lifetime_years, mean_stress: f.mean_stress, sample_dt: 0.1 }
    }
}

impl FatigueSection {
    pub fn spec(&self) -> FatigueSpec {
        FatigueSpec { slope: self.slope, cycles_at_ultimate: self.cycles_at_ultimate, lifetime_years: self.lifetime_years, mean_stress: self.mean_stress }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    /// Fixed run-directory name; a timestamped name is generated when absent.
    pub run_name: Option<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "runs".into(), run_name: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub model: ModelSection,
    pub wind: WindSection,
    pub wave: WaveSection,
    pub oloc: OlocConfig,
    pub ccd: CcdConfig,
    pub fatigue: FatigueSection,
    pub output: OutputSection,
}

fn scenario_err(e: impl std::fmt::Display) -> Error {
    Error::Scenario(e.to_string())
}

/// Sets `a.b.c = value` in a TOML table. The value is parsed as a TOML literal and kept
/// as a string when it does not parse.
pub fn apply_override(doc: &mut toml::Table, key: &str, value: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Scenario(format!("malformed override key '{key}'")));
    }
    let parsed: toml::Value = match format!("v = {value}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(value.to_string()),
    };
    let mut table = doc;
    for p in &parts[..parts.len() - 1] {
        let entry = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| Error::Scenario(format!("override '{key}': '{p}' is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with(text, &[])
    }

    pub fn from_toml_with(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut doc: toml::Table = text.parse().map_err(scenario_err)?;
        for (k, v) in overrides {
            apply_override(&mut doc, k, v)?;
        }
        let s: Scenario = toml::Value::Table(doc).try_into().map_err(scenario_err)?;
        Ok(s)
    }

    /// Reads, overrides and validates a scenario. Relative model file paths are resolved
    /// against the scenario's directory.
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Scenario(format!("cannot read scenario {}: {e}", path.display())))?;
        let mut s = Self::from_toml_with(&text, overrides)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &str| -> String {
            let pb = PathBuf::from(p);
            if pb.is_absolute() {
                p.to_string()
            } else {
                base.join(pb).to_string_lossy().into_owned()
            }
        };
        if let Some(p) = &s.model.mooring.surrogate_path {
            s.model.mooring.surrogate_path = Some(resolve(p));
        }
        if let Some(p) = &s.model.surface_cache {
            s.model.surface_cache = Some(resolve(p));
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |r: Result<()>| r.map_err(|e| Error::Scenario(e.to_string()));
        wrap(self.oloc.validate())?;
        wrap(self.ccd.validate())?;
        wrap(self.fatigue.spec().validate())?;
        wrap(self.wave.spec().validate())?;
        wrap(self.model.tower.validate())?;
        wrap(self.model.blade.validate())?;
        wrap(self.model.platform.validate())?;
        if !(self.oloc.sigma_max_mpa > 0.0) {
            return Err(Error::Scenario("stress limit must be positive".into()));
        }
        if let Some(p) = &self.model.mooring.surrogate_path {
            if !Path::new(p).exists() {
                return Err(Error::Scenario(format!("mooring surrogate file {p} does not exist")));
            }
        }
        if !(self.fatigue.sample_dt > 0.0) || !(self.wind.power_curve_duration > 0.0) {
            return Err(Error::Scenario("sample_dt and power_curve_duration must be positive".into()));
        }
        let full = wrap(self.full_bins().map(|_| ()));
        full?;
        if self.ccd.bins > self.full_bins()?.len() {
            return Err(Error::Scenario(format!("ccd.bins = {} exceeds the {} wind bins", self.ccd.bins, self.full_bins()?.len())));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(scenario_err)
    }

    pub fn full_bins(&self) -> Result<WindBinSet> {
        let w = &self.wind;
        weibull_bins(w.weibull_k, w.weibull_c, w.u_min, w.u_max, w.step)
    }

    /// Bins used by the outer loop (grouped to `ccd.bins`).
    pub fn ccd_bins(&self) -> Result<WindBinSet> {
        self.full_bins()?.grouped(self.ccd.bins)
    }

    pub fn params(&self) -> ModelParams {
        self.model.params()
    }

    pub fn evaluator(&self, bins: WindBinSet) -> Result<PlantEvaluator> {
        let params = self.params();
        let mooring = MooringModel::from_params(&params.mooring)?;
        PlantEvaluator::new(
            params,
            mooring,
            nrel5mw_polars(),
            self.model.surface_grid.clone(),
            self.model.surface_cache.as_ref().map(PathBuf::from),
            bins,
            self.wind.template(),
            self.wind.seed,
            self.wave.active(),
            self.oloc.clone(),
        )
    }

    /// The scenario's own plant (tower and blade from [model]).
    pub fn plant(&self, evaluator: &PlantEvaluator) -> Result<Plant> {
        evaluator.plant(&crate::ccd::PlantDesign { tower: self.model.tower, blade: self.model.blade.clone(), mode: self.ccd.mode })
    }
}
