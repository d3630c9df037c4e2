//! Generalised mass, added mass, quadratic-velocity and gravity terms of the 4-DOF model.

use nalgebra::Matrix4;

use crate::ad::Scalar;

/// Component masses, inertias and offsets. Offsets are measured from the platform
/// centre of gravity: `d_r` rotor (upwind), `d_nc` nacelle (downwind), `big_d_t`
/// tower COG height, `big_d_r` rotor/nacelle height.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidBodyInventory {
    pub m_p: f64,
    pub m_t: f64,
    pub m_nc: f64,
    pub m_r: f64,
    pub i_py: f64,
    pub i_ty: f64,
    pub i_ncy: f64,
    pub i_ry: f64,
    pub i_rx: f64,
    pub d_r: f64,
    pub d_nc: f64,
    pub big_d_t: f64,
    pub big_d_r: f64,
}

impl RigidBodyInventory {
    pub fn total_mass(&self) -> f64 {
        self.m_p + self.m_t + self.m_nc + self.m_r
    }

    pub fn m13(&self) -> f64 {
        self.big_d_r * (self.m_r + self.m_nc) + self.m_t * self.big_d_t
    }

    pub fn m26(&self) -> f64 {
        self.d_nc * self.m_nc - self.d_r * self.m_r
    }

    pub fn total_pitch_inertia(&self) -> f64 {
        self.i_py + self.i_ty + self.i_ncy + self.i_ry
    }

    pub fn m55(&self) -> f64 {
        let dr2 = self.big_d_r * self.big_d_r;
        self.total_pitch_inertia()
            + self.m_r * (dr2 + self.d_r * self.d_r)
            + self.m_nc * (dr2 + self.d_nc * self.d_nc)
            + self.big_d_t * self.big_d_t * self.m_t
    }

    pub fn validate(&self) -> bool {
        let masses = [self.m_p, self.m_t, self.m_nc, self.m_r];
        let inertias = [self.i_py, self.i_ty, self.i_ncy, self.i_ry, self.i_rx];
        let offsets = [self.d_r, self.d_nc, self.big_d_t, self.big_d_r];
        masses.iter().chain(&inertias).all(|v| *v >= 0.0 && v.is_finite()) && offsets.iter().all(|v| v.is_finite())
    }
}

pub fn assemble_mass_matrix(inv: &RigidBodyInventory) -> Matrix4<f64> {
    let mt = inv.total_mass();
    let (m13, m26, m55) = (inv.m13(), inv.m26(), inv.m55());
    Matrix4::new(
        mt, 0.0, m13, 0.0, //
        0.0, mt, -m26, 0.0, //
        m13, -m26, m55, 0.0, //
        0.0, 0.0, 0.0, inv.i_rx,
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HydroParams {
    pub c_am: f64,
    pub rho: f64,
    pub v_d: f64,
    /// Platform base diameter.
    pub d1: f64,
    /// Height of the centre of displaced volume and of the platform COG, same datum.
    pub a_cv: f64,
    pub a_pf: f64,
    /// Displaced-fluid pitch inertia about the platform COG (includes density).
    pub i_add: f64,
    pub g: f64,
}

impl HydroParams {
    pub fn a11(&self) -> f64 {
        self.c_am * self.rho * self.v_d
    }
    pub fn a22(&self) -> f64 {
        self.c_am * self.rho * std::f64::consts::PI * self.d1.powi(3) / 12.0
    }
    pub fn a13(&self) -> f64 {
        self.a11() * (self.a_cv - self.a_pf)
    }
    pub fn a33(&self) -> f64 {
        self.c_am * self.i_add
    }
}

pub fn assemble_added_mass(h: &HydroParams) -> Matrix4<f64> {
    let (a11, a22, a13, a33) = (h.a11(), h.a22(), h.a13(), h.a33());
    Matrix4::new(
        a11, 0.0, a13, 0.0, //
        0.0, a22, 0.0, 0.0, //
        a13, 0.0, a33, 0.0, //
        0.0, 0.0, 0.0, 0.0,
    )
}

/// `(S * M_sys + C_A) * nu` for body velocities `nu = [v_x, v_z, omega_y, Omega]`.
pub fn coriolis_loads<S: Scalar>(nu: &[S; 4], m_sys: &Matrix4<f64>, a11: f64) -> [S; 4] {
    let [vx, vz, wy, rot] = *nu;
    // momentum p = M nu
    let p: [S; 4] = std::array::from_fn(|i| {
        let r = m_sys.row(i);
        vx * r[0] + vz * r[1] + wy * r[2] + rot * r[3]
    });
    let s_row0 = wy * p[1];
    let s_row1 = -(wy * p[0]);
    let s_row2 = vz * p[0] - vx * p[1];
    let ca0 = vz * wy * a11;
    let ca1 = -(vx * wy * a11);
    let ca2 = -(vz * vx * a11) + vx * vz * a11;
    [s_row0 + ca0, s_row1 + ca1, s_row2 + ca2, S::cst(0.0)]
}

/// Gravity in the body frame for pitch `theta`.
pub fn gravity_loads<S: Scalar>(theta: S, inv: &RigidBodyInventory, g: f64) -> [S; 4] {
    let (s, c) = (theta.sin(), theta.cos());
    let mt = inv.total_mass();
    let lift = inv.big_d_r * (inv.m_nc + inv.m_r) + inv.big_d_t * inv.m_t;
    let moment = s * (g * lift) + c * (g * inv.m26());
    [s * (mt * g), -(c * (mt * g)), moment, S::cst(0.0)]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inv() -> RigidBodyInventory {
        RigidBodyInventory {
            m_p: 7.4e6,
            m_t: 2.5e5,
            m_nc: 2.4e5,
            m_r: 1.1e5,
            i_py: 4.2e9,
            i_ty: 1.3e8,
            i_ncy: 2.6e6,
            i_ry: 1.9e7,
            i_rx: 4.4e7,
            d_r: 5.0,
            d_nc: 1.9,
            big_d_t: 133.0,
            big_d_r: 180.0,
        }
    }

    #[test]
    fn point_mass_limit() {
        let i = RigidBodyInventory {
            m_p: 3.0,
            m_t: 0.0,
            m_nc: 0.0,
            m_r: 0.0,
            i_py: 2.0,
            i_ty: 0.0,
            i_ncy: 0.0,
            i_ry: 0.0,
            i_rx: 5.0,
            d_r: 0.0,
            d_nc: 0.0,
            big_d_t: 0.0,
            big_d_r: 0.0,
        };
        assert_eq!(assemble_mass_matrix(&i), Matrix4::from_diagonal(&nalgebra::Vector4::new(3.0, 3.0, 2.0, 5.0)));
    }

    #[test]
    fn m13_reduction() {
        let mut i = inv();
        i.m_r = 0.0;
        i.m_nc = 0.0;
        assert_eq!(i.m13(), i.m_t * i.big_d_t);
    }

    #[test]
    fn added_mass_cases() {
        let h = HydroParams { c_am: 1.0, rho: 1025.0, v_d: 8029.0, d1: 9.4, a_cv: 57.94, a_pf: 30.08, i_add: 1e9, g: 9.81 };
        assert!((h.a11() - 8.23e6).abs() / 8.23e6 < 1e-3);
        assert!((h.a11() - 1025.0 * 8029.0).abs() < 1e-6);
        let zero = HydroParams { c_am: 0.0, ..h };
        assert_eq!(assemble_added_mass(&zero), Matrix4::zeros());
        let coll = HydroParams { a_cv: 10.0, a_pf: 10.0, ..h };
        assert_eq!(coll.a13(), 0.0);
        let a = assemble_added_mass(&h);
        for k in 0..4 {
            assert_eq!(a[(3, k)], 0.0);
            assert_eq!(a[(k, 3)], 0.0);
        }
    }

    #[test]
    fn coriolis_zero_at_rest_and_row3_expansion() {
        let m = assemble_mass_matrix(&inv());
        let z = coriolis_loads(&[0.0, 0.0, 0.0, 1.2], &m, 8e6);
        assert_eq!(z, [0.0; 4]);
        let (vx, vz) = (0.7, -0.3);
        let c = coriolis_loads(&[vx, vz, 0.0, 1.0], &m, 8e6);
        assert_eq!(c[0], 0.0);
        assert_eq!(c[1], 0.0);
        let mt = inv().total_mass();
        // row 3 of S~ applied to M nu with omega = 0: v_z (M row1 . nu) - v_x (M row2 . nu)
        let oracle = vz * (mt * vx) - vx * (mt * vz);
        assert!((c[2] - oracle).abs() < 1e-6);
    }

    #[test]
    fn gravity_at_zero_pitch() {
        let i = inv();
        let g = gravity_loads(0.0, &i, 9.81);
        assert_eq!(g[0], 0.0);
        assert!((g[1] + i.total_mass() * 9.81).abs() < 1e-6);
        assert!((g[2] - 9.81 * (i.d_nc * i.m_nc - i.d_r * i.m_r)).abs() < 1e-9);
        let mut sym = i;
        sym.d_nc = sym.d_r * sym.m_r / sym.m_nc;
        assert!(gravity_loads(0.0, &sym, 9.81)[2].abs() < 1e-6);
    }

    #[test]
    fn baseline_like_matrix_is_positive_definite() {
        let m = assemble_mass_matrix(&inv());
        let e = nalgebra::SymmetricEigen::new(m);
        assert!(e.eigenvalues.iter().all(|&v| v > 0.0));
    }
}
