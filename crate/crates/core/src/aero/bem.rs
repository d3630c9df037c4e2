//! Steady blade element momentum solution with Prandtl tip/hub loss and Buhl's
//! high-induction correction.

use super::blade::{BladeGeometry, N_NODES};
use super::polar::Polar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BemResult {
    pub cp: f64,
    pub ct: f64,
    /// Elements whose induction iteration did not converge (fallback value used).
    pub unconverged: usize,
}

const MAX_ITER: usize = 400;
const TOL: f64 = 1e-9;
const RELAX: f64 = 0.4;

struct Element {
    a: f64,
    ap: f64,
    cn: f64,
    ct: f64,
    converged: bool,
}

fn loss(b: f64, r: f64, radius: f64, hub: f64, sphi: f64) -> f64 {
    let s = sphi.abs().max(1e-6);
    let ftip = b / 2.0 * (radius - r) / (r * s);
    let fhub = b / 2.0 * (r - hub) / (hub * s);
    let f = 4.0 / (std::f64::consts::PI * std::f64::consts::PI) * (-ftip).exp().acos() * (-fhub).exp().acos();
    f.max(1e-4)
}

/// Solves one annulus at tip speed ratio `lam` (unit wind speed) and pitch `pitch_deg`.
fn solve_element(g: &BladeGeometry, i: usize, polar: &Polar, lam: f64, pitch_deg: f64) -> Element {
    let r = g.radii[i];
    let b = g.blades as f64;
    let sigma = b * g.chord[i] / (2.0 * std::f64::consts::PI * r);
    let omega_r = lam * r / g.radius;
    let (mut a, mut ap): (f64, f64) = (0.3, 0.0);
    let mut state = (0.0, 0.0);
    let mut converged = false;
    for _ in 0..MAX_ITER {
        let phi = (1.0 - a).atan2((1.0 + ap) * omega_r);
        let (sphi, cphi) = phi.sin_cos();
        let alpha = phi.to_degrees() - g.twist[i] - pitch_deg;
        let (cl, cd) = polar.coefficients(alpha);
        let cn = cl * cphi + cd * sphi;
        let ct = cl * sphi - cd * cphi;
        state = (cn, ct);
        let f = loss(b, r, g.radius, g.hub_radius, sphi);
        let s2 = (sphi * sphi).max(1e-12);
        let k = sigma * cn / (4.0 * f * s2);
        let mut an = k / (1.0 + k);
        if an > 0.4 {
            // Buhl's empirical thrust curve matched to momentum thrust q (1-a)^2
            let q = sigma * cn / s2;
            let qa = 50.0 / 9.0 - 4.0 * f - q;
            let qb = 4.0 * f - 40.0 / 9.0 + 2.0 * q;
            let qc = 8.0 / 9.0 - q;
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 && qa.abs() > 1e-12 {
                let r1 = (-qb + disc.sqrt()) / (2.0 * qa);
                let r2 = (-qb - disc.sqrt()) / (2.0 * qa);
                let pick = [r1, r2].into_iter().filter(|x| *x > 0.3 && *x < 1.5).fold(f64::NAN, |acc, x| if acc.is_nan() { x } else { acc.min(x) });
                if pick.is_finite() {
                    an = pick;
                }
            }
        }
        let kp = sigma * ct / (4.0 * f * sphi * cphi).max(1e-12).copysign(sphi * cphi);
        let mut apn = kp / (1.0 - kp);
        if !apn.is_finite() || apn.abs() > 1.0 {
            apn = apn.clamp(-0.5, 0.5);
            if !apn.is_finite() {
                apn = 0.0;
            }
        }
        let an = an.clamp(-0.5, 1.5);
        if (an - a).abs() < TOL && (apn - ap).abs() < TOL {
            a = an;
            ap = apn;
            converged = true;
            break;
        }
        a = (1.0 - RELAX) * a + RELAX * an;
        ap = (1.0 - RELAX) * ap + RELAX * apn;
    }
    Element { a, ap, cn: state.0, ct: state.1, converged }
}

/// Power and thrust coefficients of the rotor at tip speed ratio `lam` and
/// collective pitch `pitch_deg`.
pub fn bem_solve(g: &BladeGeometry, polars: &[Polar], lam: f64, pitch_deg: f64) -> BemResult {
    if lam <= 0.0 {
        return BemResult { cp: 0.0, ct: 0.0, unconverged: 0 };
    }
    let b = g.blades as f64;
    let (mut thrust, mut torque) = (0.0, 0.0);
    let mut unconverged = 0;
    for i in 0..N_NODES {
        let e = solve_element(g, i, &polars[g.airfoil[i]], lam, pitch_deg);
        if !e.converged {
            unconverged += 1;
        }
        let r = g.radii[i];
        let omega_r = lam * r / g.radius;
        let w2 = (1.0 - e.a).powi(2) + ((1.0 + e.ap) * omega_r).powi(2);
        thrust += b * 0.5 * w2 * g.chord[i] * e.cn * g.spans[i];
        torque += b * 0.5 * w2 * g.chord[i] * e.ct * r * g.spans[i];
    }
    let area = std::f64::consts::PI * g.radius * g.radius;
    let omega = lam / g.radius;
    BemResult { cp: torque * omega / (0.5 * area), ct: thrust / (0.5 * area), unconverged }
}

#[cfg(test)]
mod tests {
    use super::super::blade::reference_geometry;
    use super::super::polar::nrel5mw_polars;
    use super::*;

    #[test]
    fn drag_only_rotor_extracts_no_power() {
        let mut g = reference_geometry();
        g.airfoil = [0; N_NODES];
        let p = nrel5mw_polars();
        for lam in [2.0, 5.0, 9.0] {
            assert!(bem_solve(&g, &p, lam, 0.0).cp <= 0.0);
        }
    }

    #[test]
    fn vanishing_tip_speed_ratio() {
        let g = reference_geometry();
        let p = nrel5mw_polars();
        assert_eq!(bem_solve(&g, &p, 0.0, 0.0).cp, 0.0);
        assert!(bem_solve(&g, &p, 1e-3, 0.0).cp.abs() < 1e-3);
    }

    #[test]
    fn reference_blade_peak() {
        let g = reference_geometry();
        let p = nrel5mw_polars();
        let best = (20..=40).map(|k| k as f64 * 0.25).map(|l| (bem_solve(&g, &p, l, 0.0).cp, l)).fold((0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a });
        assert!(best.0 > 0.45 && best.0 < 0.50, "{best:?}");
        assert!(best.1 >= 7.0 && best.1 <= 8.0, "{best:?}");
    }
}
