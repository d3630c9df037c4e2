//! Model parameters and the assembled plant: inventory, matrices, hull, mooring,
//! rotor surface and the variable-ballast heave balance.

use std::sync::Arc;

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use super::platform::{HullProperties, PlatformParams};
use super::rigid::{assemble_added_mass, assemble_mass_matrix, HydroParams, RigidBodyInventory};
use super::tower::{tower_properties, TowerDesign, TowerProperties, STEEL_DENSITY};
use crate::aero::{BladeDesign, CoefficientSurface, RotorGeometry};
use crate::environment::GRAVITY;
use crate::error::{Error, Result};
use crate::mooring::{LineProperties, MooringGeometry, MooringLayout, MooringSurrogate, Pose};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RotorNacelleParams {
    pub radius: f64,
    pub air_density: f64,
    pub rotor_mass: f64,
    pub nacelle_mass: f64,
    /// Rotor plus generator inertia about the shaft [kg m^2].
    pub spin_inertia: f64,
    pub rotor_pitch_inertia: f64,
    pub nacelle_pitch_inertia: f64,
    /// Rotor COG upwind of the tower axis [m].
    pub rotor_overhang: f64,
    /// Nacelle COG downwind of the tower axis [m].
    pub nacelle_offset: f64,
    /// Hub height above the tower top [m].
    pub hub_above_tower: f64,
    /// Tower base elevation above SWL [m].
    pub tower_base_z: f64,
}

impl Default for RotorNacelleParams {
    fn default() -> Self {
        Self {
            radius: 63.0,
            air_density: 1.225,
            rotor_mass: 110_000.0,
            nacelle_mass: 240_000.0,
            spin_inertia: 38_759_236.0 + 534.116 * 97.0 * 97.0,
            rotor_pitch_inertia: 19_379_618.0,
            nacelle_pitch_inertia: 2_607_890.0,
            rotor_overhang: 5.0,
            nacelle_offset: 1.9,
            hub_above_tower: 2.4,
            tower_base_z: 10.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MooringKind {
    Surrogate,
    Exact,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MooringParams {
    pub kind: MooringKind,
    pub line: LineProperties,
    pub layout: MooringLayout,
    /// Trained surrogate file; the shipped OC3 surrogate is used when absent.
    pub surrogate_path: Option<String>,
}

impl Default for MooringParams {
    fn default() -> Self {
        Self { kind: MooringKind::Surrogate, line: LineProperties::oc3(), layout: MooringLayout::oc3(), surrogate_path: None }
    }
}

/// Which external load groups enter the dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadSwitches {
    pub aero: bool,
    pub hydrostatics: bool,
    pub mooring: bool,
    pub drag: bool,
    pub waves: bool,
    pub gravity: bool,
}

impl Default for LoadSwitches {
    fn default() -> Self {
        Self { aero: true, hydrostatics: true, mooring: true, drag: true, waves: true, gravity: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub gravity: f64,
    pub steel_density: f64,
    pub tower: TowerDesign,
    pub blade: BladeDesign,
    pub rotor: RotorNacelleParams,
    pub platform: PlatformParams,
    pub mooring: MooringParams,
    pub loads: LoadSwitches,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            gravity: GRAVITY,
            steel_density: STEEL_DENSITY,
            tower: TowerDesign::baseline(),
            blade: BladeDesign::baseline(),
            rotor: RotorNacelleParams::default(),
            platform: PlatformParams::default(),
            mooring: MooringParams::default(),
            loads: LoadSwitches::default(),
        }
    }
}

/// The OC3 mooring surrogate shipped with the crate.
pub fn shipped_surrogate() -> Arc<MooringSurrogate> {
    static CELL: std::sync::OnceLock<Arc<MooringSurrogate>> = std::sync::OnceLock::new();
    CELL.get_or_init(|| {
        Arc::new(MooringSurrogate::from_text(include_str!("../../data/mooring_oc3.txt")).expect("shipped surrogate parses"))
    })
    .clone()
}

#[derive(Clone, Debug)]
pub enum MooringModel {
    Surrogate(Arc<MooringSurrogate>),
    Exact(LineProperties),
    None,
}

impl MooringModel {
    pub fn from_params(p: &MooringParams) -> Result<Self> {
        Ok(match p.kind {
            MooringKind::None => MooringModel::None,
            MooringKind::Exact => MooringModel::Exact(p.line),
            MooringKind::Surrogate => match &p.surrogate_path {
                Some(path) => MooringModel::Surrogate(Arc::new(MooringSurrogate::load(std::path::Path::new(path))?)),
                None => MooringModel::Surrogate(shipped_surrogate()),
            },
        })
    }
}

/// Everything the dynamics need for one plant design.
#[derive(Clone, Debug)]
pub struct Plant {
    pub params: ModelParams,
    pub tower: TowerDesign,
    pub tower_props: TowerProperties,
    pub inventory: RigidBodyInventory,
    pub hydro: HydroParams,
    pub hull: HullProperties,
    pub mass_matrix: Matrix4<f64>,
    pub added_mass: Matrix4<f64>,
    /// Inverse of the generalised mass (rigid plus added).
    pub mass_inverse: Matrix4<f64>,
    pub rotor: RotorGeometry,
    pub surface: Arc<CoefficientSurface>,
    pub mooring: MooringModel,
    pub mooring_geometry: MooringGeometry,
    /// Variable ballast from the heave balance [kg].
    pub ballast: f64,
    /// Static vertical mooring pull at the design pose [N] (positive downward).
    pub pretension: f64,
    pub switches: LoadSwitches,
}

impl Plant {
    /// Assembles the plant with `params.tower` and the supplied rotor surface.
    pub fn new(params: &ModelParams, surface: Arc<CoefficientSurface>, mooring: MooringModel) -> Result<Self> {
        let p = params;
        let hull = p.platform.hull()?;
        let tower = p.tower;
        let tp = tower_properties(&tower, p.steel_density)?;
        let rn = &p.rotor;
        let z_ref = p.platform.cog_z;
        let hub_z = rn.tower_base_z + tower.l + rn.hub_above_tower;
        let big_d_r = hub_z - z_ref;
        let big_d_t = rn.tower_base_z + tp.cog_height - z_ref;
        let geometry = MooringGeometry::new(p.mooring.layout.clone(), z_ref);
        let pose = Pose { x: 0.0, z: z_ref, theta: 0.0 };
        let pretension = match &mooring {
            MooringModel::None => 0.0,
            MooringModel::Surrogate(s) => -geometry.loads_surrogate(s, pose)?.fz,
            MooringModel::Exact(line) => -geometry.loads_exact(line, pose)?.fz,
        };
        let ballast = ballast_mass(p.platform.water_density, hull.volume, pretension, p.gravity, p.platform.structural_mass + tp.mass + rn.rotor_mass + rn.nacelle_mass)?;
        let inventory = RigidBodyInventory {
            m_p: p.platform.structural_mass + ballast,
            m_t: tp.mass,
            m_nc: rn.nacelle_mass,
            m_r: rn.rotor_mass,
            i_py: p.platform.pitch_inertia,
            i_ty: tp.inertia,
            i_ncy: rn.nacelle_pitch_inertia,
            i_ry: rn.rotor_pitch_inertia,
            i_rx: rn.spin_inertia,
            d_r: rn.rotor_overhang,
            d_nc: rn.nacelle_offset,
            big_d_t,
            big_d_r,
        };
        let hydro = HydroParams {
            c_am: p.platform.added_mass_coefficient,
            rho: p.platform.water_density,
            v_d: hull.volume,
            d1: hull.keel_diameter,
            a_cv: hull.cb_z,
            a_pf: z_ref,
            i_add: hull.displaced_inertia,
            g: p.gravity,
        };
        let mass_matrix = assemble_mass_matrix(&inventory);
        let added_mass = assemble_added_mass(&hydro);
        let mass_inverse = (mass_matrix + added_mass)
            .try_inverse()
            .ok_or_else(|| Error::Model("generalised mass matrix is singular".into()))?;
        let rotor = RotorGeometry { radius: rn.radius, rho_air: rn.air_density, hub_height: big_d_r, hub_x: -rn.rotor_overhang };
        Ok(Self {
            params: params.clone(),
            tower,
            tower_props: tp,
            inventory,
            hydro,
            hull,
            mass_matrix,
            added_mass,
            mass_inverse,
            rotor,
            surface,
            mooring,
            mooring_geometry: geometry,
            ballast,
            pretension,
            switches: p.loads,
        })
    }

    /// Same parameters with a different tower.
    pub fn with_tower(&self, tower: TowerDesign) -> Result<Self> {
        let mut p = self.params.clone();
        p.tower = tower;
        Plant::new(&p, self.surface.clone(), self.mooring.clone())
    }

    /// Design heave reference (platform COG elevation at the design pose).
    pub fn z_ref(&self) -> f64 {
        self.params.platform.cog_z
    }

    pub fn hub_elevation(&self) -> f64 {
        self.z_ref() + self.inventory.big_d_r
    }

    pub fn tower_stress(&self, thrust: f64) -> f64 {
        super::tower::tower_stress(thrust, &self.tower_props)
    }
}

/// Variable ballast closing the heave balance at the design draught.
pub fn ballast_mass(rho: f64, volume: f64, pretension: f64, g: f64, other_mass: f64) -> Result<f64> {
    let m = rho * volume - pretension / g - other_mass;
    if m < 0.0 {
        Err(Error::InfeasiblePlant(format!("required ballast {m:.1} kg is negative (structure too heavy)")))
    } else {
        Ok(m)
    }
}
