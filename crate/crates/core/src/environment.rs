//! Wind-speed binning, shear, per-bin wind series and the irregular wave field.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRAVITY: f64 = 9.80665;
/// Height of the tower base above the reference height used by the shear law.
pub const SHEAR_Z_BASE: f64 = 12.4;
pub const SHEAR_L_BASELINE: f64 = 76.0;
pub const SHEAR_EXPONENT: f64 = 0.2;

#[derive(Clone, Debug, PartialEq)]
pub struct WindBinSet {
    pub centers: Vec<f64>,
    pub probs: Vec<f64>,
    pub k: f64,
    pub c: f64,
}

pub fn weibull_pdf(u: f64, k: f64, c: f64) -> f64 {
    if u < 0.0 {
        return 0.0;
    }
    (k / c) * (u / c).powf(k - 1.0) * (-(u / c).powf(k)).exp()
}

/// Weibull density at the bin centers `lo, lo+step, ..., hi`, renormalised to unit sum.
pub fn weibull_bins(k: f64, c: f64, lo: f64, hi: f64, step: f64) -> Result<WindBinSet> {
    if !(k > 0.0 && c > 0.0) {
        return Err(Error::Argument(format!("weibull parameters must be positive (k={k}, c={c})")));
    }
    if !(step > 0.0) || hi < lo {
        return Err(Error::Argument(format!("empty wind range {lo}..{hi} step {step}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    let centers: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
    let raw: Vec<f64> = centers.iter().map(|&u| weibull_pdf(u, k, c)).collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Argument("weibull mass vanishes on the requested range".into()));
    }
    let probs = raw.iter().map(|p| p / total).collect();
    Ok(WindBinSet { centers, probs, k, c })
}

impl WindBinSet {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Collapses the bins into `groups` contiguous groups. Each group is represented
    /// by its probability-weighted mean speed and carries the group's total probability.
    pub fn grouped(&self, groups: usize) -> Result<WindBinSet> {
        let n = self.len();
        if groups == 0 || groups > n {
            return Err(Error::Argument(format!("cannot group {n} bins into {groups}")));
        }
        if groups == n {
            return Ok(self.clone());
        }
        let mut centers = Vec::with_capacity(groups);
        let mut probs = Vec::with_capacity(groups);
        let base = n / groups;
        let extra = n % groups;
        let mut start = 0;
        for g in 0..groups {
            let size = base + usize::from(g < extra);
            let (mut p, mut pu) = (0.0, 0.0);
            for i in start..start + size {
                p += self.probs[i];
                pu += self.probs[i] * self.centers[i];
            }
            centers.push(pu / p);
            probs.push(p);
            start += size;
        }
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        Ok(WindBinSet { centers, probs, k: self.k, c: self.c })
    }
}

/// Power-law shear correction of a bin speed for a tower of length `l`.
pub fn shear_adjust(u_mean: f64, l: f64, z_base: f64, l_baseline: f64) -> f64 {
    u_mean * ((l + z_base) / (l_baseline + z_base)).powf(SHEAR_EXPONENT)
}

pub fn shear_adjust_default(u_mean: f64, l: f64) -> f64 {
    shear_adjust(u_mean, l, SHEAR_Z_BASE, SHEAR_L_BASELINE)
}

/// Parameters of the fluctuation template shared by every bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindTemplate {
    /// Peak fluctuation as a fraction of the mean (the template is bounded by twice this).
    pub amplitude: f64,
    pub components: usize,
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for WindTemplate {
    fn default() -> Self {
        Self { amplitude: 0.08, components: 6, f_min: 0.01, f_max: 0.08 }
    }
}

impl WindTemplate {
    pub fn steady() -> Self {
        Self { amplitude: 0.0, ..Self::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindProfile {
    pub mean: f64,
    pub duration: f64,
    /// (weight, frequency [Hz], phase)
    comps: Vec<(f64, f64, f64)>,
    amplitude: f64,
    offset: f64,
}

/// Deterministic wind series: `mean * (1 + a * (s(t) - mean(s)))` with `s` a seeded sum of sinusoids.
pub fn wind_profile(u_mean: f64, duration: f64, seed: u64, template: &WindTemplate) -> WindProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = template.components.max(1);
    let mut comps = Vec::with_capacity(n);
    for i in 0..n {
        let lo = template.f_min + (template.f_max - template.f_min) * i as f64 / n as f64;
        let hi = template.f_min + (template.f_max - template.f_min) * (i + 1) as f64 / n as f64;
        let f = rng.gen_range(lo..hi);
        let w = rng.gen_range(0.5..1.0);
        let ph = rng.gen_range(0.0..std::f64::consts::TAU);
        comps.push((w, f, ph));
    }
    let wsum: f64 = comps.iter().map(|c| c.0).sum();
    for c in &mut comps {
        c.0 /= wsum;
    }
    // exact mean of the template over [0, duration]
    let offset = if duration > 0.0 {
        comps
            .iter()
            .map(|&(w, f, ph)| {
                let om = std::f64::consts::TAU * f;
                w * (ph.cos() - (om * duration + ph).cos()) / (om * duration)
            })
            .sum()
    } else {
        0.0
    };
    WindProfile { mean: u_mean, duration, comps, amplitude: template.amplitude, offset }
}

impl WindProfile {
    pub fn steady(u: f64, duration: f64) -> Self {
        Self { mean: u, duration, comps: Vec::new(), amplitude: 0.0, offset: 0.0 }
    }

    pub fn speed(&self, t: f64) -> f64 {
        if self.amplitude == 0.0 {
            return self.mean;
        }
        let s: f64 = self
            .comps
            .iter()
            .map(|&(w, f, ph)| w * (std::f64::consts::TAU * f * t + ph).sin())
            .sum();
        self.mean * (1.0 + self.amplitude * (s - self.offset))
    }

    pub fn sample(&self, times: &[f64]) -> Vec<f64> {
        times.iter().map(|&t| self.speed(t)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveSpec {
    pub hs: f64,
    pub tp: f64,
    pub components: usize,
    pub seed: u64,
}

impl Default for WaveSpec {
    fn default() -> Self {
        Self { hs: 6.0, tp: 10.0, components: 50, seed: 11 }
    }
}

impl WaveSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.hs >= 0.0) || !(self.tp > 0.0) {
            return Err(Error::Argument(format!("wave spec needs hs >= 0 and tp > 0 (hs={}, tp={})", self.hs, self.tp)));
        }
        Ok(())
    }
}

/// Fluid kinematics at the representative depth, earth frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WaveSample {
    pub eta: f64,
    pub u: f64,
    pub w: f64,
    pub du: f64,
    pub dw: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaveField {
    /// (amplitude, angular frequency, phase, depth decay factor)
    comps: Vec<(f64, f64, f64, f64)>,
    pub depth: f64,
}

/// Bretschneider (two-parameter Pierson-Moskowitz) spectral density.
pub fn pm_spectrum(omega: f64, hs: f64, tp: f64) -> f64 {
    if omega <= 0.0 {
        return 0.0;
    }
    let wp = std::f64::consts::TAU / tp;
    5.0 / 16.0 * hs * hs * wp.powi(4) / omega.powi(5) * (-1.25 * (wp / omega).powi(4)).exp()
}

/// Linear random-phase realisation with deep-water Airy kinematics at `depth` (negative, below SWL).
pub fn wave_field(spec: &WaveSpec, depth: f64) -> Result<WaveField> {
    spec.validate()?;
    if spec.hs == 0.0 || spec.components == 0 {
        return Ok(WaveField { comps: Vec::new(), depth });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let wp = std::f64::consts::TAU / spec.tp;
    let (w_lo, w_hi) = (0.5 * wp, 4.0 * wp);
    let n = spec.components;
    let dw = (w_hi - w_lo) / n as f64;
    let mut comps = Vec::with_capacity(n);
    for i in 0..n {
        let w = w_lo + dw * (i as f64 + rng.gen_range(0.0..1.0));
        let ph = rng.gen_range(0.0..std::f64::consts::TAU);
        let amp = (2.0 * pm_spectrum(w, spec.hs, spec.tp) * dw).sqrt();
        let k = w * w / GRAVITY;
        comps.push((amp, w, ph, (k * depth.min(0.0)).exp()));
    }
    Ok(WaveField { comps, depth })
}

impl WaveField {
    pub fn calm() -> Self {
        Self { comps: Vec::new(), depth: 0.0 }
    }

    pub fn is_calm(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn sample(&self, t: f64) -> WaveSample {
        let mut s = WaveSample::default();
        for &(a, w, ph, decay) in &self.comps {
            let (sn, cs) = (w * t + ph).sin_cos();
            s.eta += a * cs;
            s.u += a * w * decay * cs;
            s.w += a * w * decay * sn;
            s.du -= a * w * w * decay * sn;
            s.dw += a * w * w * decay * cs;
        }
        s
    }

    pub fn series(&self, times: &[f64]) -> Vec<WaveSample> {
        times.iter().map(|&t| self.sample(t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weibull_pdf_at_twelve() {
        // independent evaluation of the two-parameter density
        let (k, c, u) = (2.0_f64, 13.44_f64, 12.0_f64);
        let oracle = k / c * (u / c) * (-(u / c) * (u / c)).exp();
        assert!((weibull_pdf(u, k, c) - oracle).abs() < 1e-15);
        assert!((oracle - 0.0599).abs() < 5e-5);
    }

    #[test]
    fn default_bins() {
        let b = weibull_bins(2.0, 13.44, 3.0, 25.0, 1.0).unwrap();
        assert_eq!(b.len(), 23);
        assert!((b.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(b.centers.windows(2).all(|w| (w[1] - w[0] - 1.0).abs() < 1e-12));
    }

    #[test]
    fn empty_range_is_an_error() {
        assert!(weibull_bins(2.0, 13.44, 5.0, 3.0, 1.0).is_err());
        assert!(weibull_bins(0.0, 13.44, 3.0, 5.0, 1.0).is_err());
    }

    #[test]
    fn grouping_keeps_unit_mass() {
        let b = weibull_bins(2.0, 13.44, 3.0, 25.0, 1.0).unwrap();
        let g = b.grouped(5).unwrap();
        assert_eq!(g.len(), 5);
        assert!((g.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mean_full: f64 = b.centers.iter().zip(&b.probs).map(|(u, p)| u * p).sum();
        let mean_grp: f64 = g.centers.iter().zip(&g.probs).map(|(u, p)| u * p).sum();
        assert!((mean_full - mean_grp).abs() < 1e-12);
    }

    #[test]
    fn shear_examples() {
        assert_eq!(shear_adjust_default(12.0, 76.0), 12.0);
        let oracle = 12.0 * ((83.04_f64 + 12.4) / 88.4).powf(0.2);
        assert!((shear_adjust_default(12.0, 83.04) - oracle).abs() < 1e-12);
        assert!((oracle - 12.185).abs() < 2e-3);
    }

    #[test]
    fn wind_profile_mean_and_determinism() {
        let t = WindTemplate::default();
        let p = wind_profile(11.0, 100.0, 3, &t);
        let n = 20000;
        let mean: f64 = (0..n).map(|i| p.speed((i as f64 + 0.5) * 100.0 / n as f64)).sum::<f64>() / n as f64;
        assert!((mean - 11.0).abs() / 11.0 < 5e-3);
        assert_eq!(p, wind_profile(11.0, 100.0, 3, &t));
        let q = wind_profile(11.0, 100.0, 4, &t);
        assert_ne!(p.speed(13.0), q.speed(13.0));
        let flat = wind_profile(9.0, 100.0, 3, &WindTemplate::steady());
        assert!((0..50).all(|i| flat.speed(i as f64 * 2.0) == 9.0));
    }

    #[test]
    fn wave_elevation_matches_significant_height() {
        let spec = WaveSpec { hs: 6.0, tp: 10.0, components: 200, seed: 5 };
        let f = wave_field(&spec, 0.0).unwrap();
        let n = 200_000;
        let dt = 0.5;
        let (mut s, mut s2) = (0.0, 0.0);
        for i in 0..n {
            let e = f.sample(i as f64 * dt).eta;
            s += e;
            s2 += e * e;
        }
        let var = s2 / n as f64 - (s / n as f64).powi(2);
        assert!((4.0 * var.sqrt() - 6.0).abs() / 6.0 < 0.05);
    }

    #[test]
    fn calm_sea_is_zero() {
        let spec = WaveSpec { hs: 0.0, ..WaveSpec::default() };
        let f = wave_field(&spec, -60.0).unwrap();
        assert_eq!(f.sample(12.3), WaveSample::default());
    }
}
