//! Elastic catenary statics of a single line with frictionless seabed contact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineProperties {
    pub length: f64,
    /// Submerged weight per unit length [N/m].
    pub weight: f64,
    pub ea: f64,
}

impl LineProperties {
    pub fn oc3() -> Self {
        Self { length: 902.2, weight: 698.094, ea: 384.243e6 }
    }

    pub fn total_weight(&self) -> f64 {
        self.weight * self.length
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Suspended,
    Seabed,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CatenarySolution {
    pub h_force: f64,
    pub v_force: f64,
    pub regime: Regime,
    /// Length of line resting on the seabed (0 when suspended).
    pub grounded_length: f64,
    /// max(|x residual| / l, |z residual| / h).
    pub residual: f64,
    pub iterations: usize,
}

/// Profile residual (x(H,V) - l, z(H,V) - h) and its Jacobian.
fn profile(hf: f64, vf: f64, l: f64, h: f64, p: &LineProperties) -> ([f64; 2], [[f64; 2]; 2]) {
    let (w, len, ea) = (p.weight, p.length, p.ea);
    let a = vf / hf;
    let sa = (1.0 + a * a).sqrt();
    if vf >= w * len {
        let b = (vf - w * len) / hf;
        let sb = (1.0 + b * b).sqrt();
        let x = hf / w * (a.asinh() - b.asinh()) + hf * len / ea;
        let z = hf / w * (sa - sb) + (vf * len - 0.5 * w * len * len) / ea;
        let dxdh = (a.asinh() - b.asinh()) / w - (a / sa - b / sb) / w + len / ea;
        let dxdv = (1.0 / sa - 1.0 / sb) / w;
        let dzdh = (1.0 / sa - 1.0 / sb) / w;
        let dzdv = (a / sa - b / sb) / w + len / ea;
        ([x - l, z - h], [[dxdh, dxdv], [dzdh, dzdv]])
    } else {
        let x = len - vf / w + hf / w * a.asinh() + hf * len / ea;
        let z = hf / w * (sa - 1.0) + vf * vf / (2.0 * ea * w);
        let dxdh = a.asinh() / w - a / sa / w + len / ea;
        let dxdv = -1.0 / w + 1.0 / (sa * w);
        let dzdh = (1.0 / sa - 1.0) / w;
        let dzdv = a / sa / w + vf / (ea * w);
        ([x - l, z - h], [[dxdh, dxdv], [dzdh, dzdv]])
    }
}

fn scaled_norm(r: &[f64; 2], l: f64, h: f64) -> f64 {
    (r[0] / l.max(1.0)).abs().max((r[1] / h.max(1.0)).abs())
}

/// Vertical suspended length of a line hanging straight down over height `h`
/// (stretch included): `s + w s^2 / (2 EA) = h`.
fn hanging_length(h: f64, p: &LineProperties) -> f64 {
    let k = p.weight / (2.0 * p.ea);
    (-1.0 + (1.0 + 4.0 * k * h).sqrt()) / (2.0 * k)
}

/// Fairlead tensions for horizontal offset `l` and height `h` of the fairlead above the anchor.
pub fn solve_catenary(l: f64, h: f64, p: &LineProperties) -> Result<CatenarySolution> {
    if !(l.is_finite() && h.is_finite()) || h <= 0.0 || l < 0.0 {
        return Err(Error::OutOfEnvelope(format!("fairlead offset (l={l}, h={h}) not reachable")));
    }
    let (w, len) = (p.weight, p.length);
    let span = (l * l + h * h).sqrt();
    if span > 1.05 * len {
        return Err(Error::OutOfEnvelope(format!("line taut beyond elastic validity: span {span:.2} m for length {len:.2} m")));
    }
    // slack limit: the hanging part is vertical and the remainder lies on the seabed
    let s_hang = hanging_length(h, p);
    if l <= len - s_hang {
        return Ok(CatenarySolution {
            h_force: 0.0,
            v_force: w * s_hang,
            regime: Regime::Seabed,
            grounded_length: len - s_hang,
            residual: 0.0,
            iterations: 0,
        });
    }

    let lam0 = if len * len <= l * l + h * h {
        0.2
    } else {
        (3.0 * ((len * len - h * h) / (l * l) - 1.0)).sqrt().max(0.2)
    };
    let mut hf = (w * l / (2.0 * lam0)).abs().max(1.0);
    let mut vf = 0.5 * w * (h / lam0.tanh() + len);

    let mut iterations = 0;
    let (mut r, mut jac) = profile(hf, vf, l, h, p);
    let mut norm = scaled_norm(&r, l, h);
    while norm > 1e-14 && iterations < 100 {
        iterations += 1;
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dh = -(jac[1][1] * r[0] - jac[0][1] * r[1]) / det;
        let dv = -(-jac[1][0] * r[0] + jac[0][0] * r[1]) / det;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let (hn, vn) = (hf + step * dh, vf + step * dv);
            if hn > 0.0 && vn > 0.0 {
                let (rn, jn) = profile(hn, vn, l, h, p);
                let nn = scaled_norm(&rn, l, h);
                if nn.is_finite() && (nn < norm || nn < 1e-15) {
                    hf = hn;
                    vf = vn;
                    r = rn;
                    jac = jn;
                    norm = nn;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if norm > 1e-10 {
        return Err(Error::RootFind { what: format!("catenary at l={l:.4}, h={h:.4}"), residual: norm });
    }
    let regime = if vf > w * len { Regime::Suspended } else { Regime::Seabed };
    let grounded = match regime {
        Regime::Suspended => 0.0,
        Regime::Seabed => len - vf / w,
    };
    let tension = (hf * hf + vf * vf).sqrt();
    if tension > 0.1 * p.ea {
        return Err(Error::OutOfEnvelope(format!("line tension {tension:.3e} N exceeds 10% of EA")));
    }
    Ok(CatenarySolution { h_force: hf, v_force: vf, regime, grounded_length: grounded, residual: norm, iterations })
}

/// Horizontal offset at which the touchdown point reaches the anchor, for height `h`.
pub fn regime_boundary(h: f64, p: &LineProperties) -> Result<f64> {
    let (w, len, ea) = (p.weight, p.length, p.ea);
    let vf = w * len;
    // z(H) = H/w (sqrt(1 + (V/H)^2) - 1) + V^2 / (2 EA w) is decreasing in H
    let z_of = |hf: f64| {
        let a = vf / hf;
        hf / w * ((1.0 + a * a).sqrt() - 1.0) + vf * vf / (2.0 * ea * w)
    };
    let (mut lo, mut hi) = (1e-6 * vf, 1e3 * vf);
    if z_of(lo) < h || z_of(hi) > h {
        return Err(Error::OutOfEnvelope(format!("no touchdown boundary at h = {h}")));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if z_of(mid) > h {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    let hf = 0.5 * (lo + hi);
    Ok(hf / w * (vf / hf).asinh() + hf * len / ea)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oc3_design_point_converges_tightly() {
        let p = LineProperties::oc3();
        let s = solve_catenary(848.67, 250.0, &p).unwrap();
        assert!(s.residual < 1e-8);
        assert_eq!(s.regime, Regime::Seabed);
        assert!(s.h_force > 5e5 && s.h_force < 1e6);
    }

    #[test]
    fn far_fairlead_is_suspended() {
        let p = LineProperties::oc3();
        let s = solve_catenary(870.0, 250.0, &p).unwrap();
        assert_eq!(s.regime, Regime::Suspended);
        assert!(s.v_force > p.total_weight());
    }

    #[test]
    fn boundary_separates_regimes() {
        let p = LineProperties::oc3();
        let lb = regime_boundary(250.0, &p).unwrap();
        assert_eq!(solve_catenary(lb - 0.05, 250.0, &p).unwrap().regime, Regime::Seabed);
        assert_eq!(solve_catenary(lb + 0.05, 250.0, &p).unwrap().regime, Regime::Suspended);
    }

    #[test]
    fn horizontal_force_vanishes_with_offset() {
        let p = LineProperties::oc3();
        let lmin = p.length - 250.0;
        let mut prev = f64::INFINITY;
        for d in [50.0, 10.0, 1.0, 0.1, 0.01] {
            let s = solve_catenary(lmin + d, 250.0, &p).unwrap();
            assert!(s.h_force < prev);
            prev = s.h_force;
        }
        assert!(prev < 500.0);
        assert_eq!(solve_catenary(10.0, 250.0, &p).unwrap().h_force, 0.0);
    }

    #[test]
    fn taut_line_is_out_of_envelope() {
        let p = LineProperties::oc3();
        assert!(matches!(solve_catenary(900.0, 400.0, &p), Err(Error::OutOfEnvelope(_))));
    }
}
