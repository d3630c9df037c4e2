//! Rainflow counting, Miner damage and the ultimate strength required for a design life.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cycle {
    pub range: f64,
    pub mean: f64,
    /// 1.0 for a closed cycle, 0.5 for a residue half cycle.
    pub count: f64,
}

/// Local extrema of `series` (plateaus collapsed, end points kept).
pub fn turning_points(series: &[f64]) -> Vec<f64> {
    let mut pts: Vec<f64> = Vec::with_capacity(series.len());
    for &v in series {
        if pts.last() == Some(&v) {
            continue;
        }
        if pts.len() >= 2 {
            let (a, b) = (pts[pts.len() - 2], pts[pts.len() - 1]);
            if (b - a) * (v - b) > 0.0 {
                pts.pop();
            }
        }
        pts.push(v);
    }
    pts
}

/// Three-point rainflow counting with half-cycle residue.
pub fn rainflow(series: &[f64]) -> Result<Vec<Cycle>> {
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("rainflow series contains non-finite values".into()));
    }
    let mut cycles = Vec::new();
    let mut stack: Vec<f64> = Vec::new();
    for p in turning_points(series) {
        stack.push(p);
        while stack.len() >= 3 {
            let n = stack.len();
            let x = (stack[n - 1] - stack[n - 2]).abs();
            let y = (stack[n - 2] - stack[n - 3]).abs();
            if x < y {
                break;
            }
            let mean = 0.5 * (stack[n - 2] + stack[n - 3]);
            if n == 3 {
                cycles.push(Cycle { range: y, mean, count: 0.5 });
                stack.remove(0);
            } else {
                cycles.push(Cycle { range: y, mean, count: 1.0 });
                let last = stack[n - 1];
                stack.truncate(n - 3);
                stack.push(last);
            }
        }
    }
    for w in stack.windows(2) {
        cycles.push(Cycle { range: (w[1] - w[0]).abs(), mean: 0.5 * (w[0] + w[1]), count: 0.5 });
    }
    Ok(cycles)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanStress {
    None,
    Goodman,
}

/// Basquin curve anchored at the ultimate strength: a cycle of amplitude `S_a` fails after
/// `N = cycles_at_ultimate * (S_ult / S_a)^m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FatigueSpec {
    pub slope: f64,
    pub cycles_at_ultimate: f64,
    pub lifetime_years: f64,
    pub mean_stress: MeanStress,
}

impl Default for FatigueSpec {
    fn default() -> Self {
        Self { slope: 4.0, cycles_at_ultimate: 0.5, lifetime_years: 20.0, mean_stress: MeanStress::None }
    }
}

impl FatigueSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.slope > 0.0) || !(self.lifetime_years > 0.0) || !(self.cycles_at_ultimate > 0.0) {
            return Err(Error::Argument(format!("fatigue spec needs positive slope, intercept and lifetime: {self:?}")));
        }
        Ok(())
    }

    /// Miner damage of `cycles` for ultimate strength `s_ult`.
    pub fn damage(&self, cycles: &[Cycle], s_ult: f64) -> f64 {
        cycles
            .iter()
            .map(|c| {
                let mut amp = 0.5 * c.range;
                if self.mean_stress == MeanStress::Goodman {
                    let f = 1.0 - c.mean.abs() / s_ult;
                    if f <= 0.0 {
                        return f64::INFINITY;
                    }
                    amp /= f;
                }
                c.count * (amp / s_ult).powf(self.slope) / self.cycles_at_ultimate
            })
            .sum()
    }
}

/// Stress cycles from one series with an occurrence weight (e.g. a wind-bin probability).
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedSeries {
    pub cycles: Vec<Cycle>,
    pub duration: f64,
    pub weight: f64,
}

impl WeightedSeries {
    pub fn new(series: &[f64], duration: f64, weight: f64) -> Result<Self> {
        if !(duration > 0.0) || !(weight >= 0.0) {
            return Err(Error::Argument("series needs a positive duration and nonnegative weight".into()));
        }
        Ok(Self { cycles: rainflow(series)?, duration, weight })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FatigueResult {
    /// Ultimate strength giving unit lifetime damage [same unit as the stress series].
    pub required_strength: f64,
    pub lifetime_damage: f64,
    pub cycle_count: f64,
    pub max_abs_mean: f64,
}

/// Lifetime Miner damage: each series' damage rate scaled by its weight over the design life.
pub fn lifetime_damage(spec: &FatigueSpec, series: &[WeightedSeries], s_ult: f64) -> f64 {
    let life = spec.lifetime_years * 365.25 * 86400.0;
    let wsum: f64 = series.iter().map(|s| s.weight).sum();
    series.iter().map(|s| s.weight / wsum * spec.damage(&s.cycles, s_ult) * life / s.duration).sum()
}

/// Bisection on the ultimate strength for unit lifetime damage.
pub fn fatigue_required_strength(spec: &FatigueSpec, series: &[WeightedSeries]) -> Result<FatigueResult> {
    spec.validate()?;
    if series.is_empty() || !(series.iter().map(|s| s.weight).sum::<f64>() > 0.0) {
        return Err(Error::Argument("fatigue needs at least one series with positive weight".into()));
    }
    let cycles: f64 = series.iter().flat_map(|s| s.cycles.iter()).filter(|c| c.range > 0.0).map(|c| c.count).sum();
    let max_abs_mean = series.iter().flat_map(|s| s.cycles.iter()).map(|c| c.mean.abs()).fold(0.0, f64::max);
    let max_range = series.iter().flat_map(|s| s.cycles.iter()).map(|c| c.range).fold(0.0, f64::max);
    if cycles == 0.0 || max_range == 0.0 {
        return Err(Error::Argument("stress series has no cycles: required strength is unbounded below".into()));
    }
    let d = |s: f64| lifetime_damage(spec, series, s);
    let mut lo = match spec.mean_stress {
        MeanStress::None => 0.5 * max_range * 1e-6,
        MeanStress::Goodman => max_abs_mean * (1.0 + 1e-12),
    };
    let mut hi = max_range.max(max_abs_mean).max(f64::MIN_POSITIVE);
    while d(hi) > 1.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Numerical("fatigue strength bracket diverged".into()));
        }
    }
    if d(lo) <= 1.0 {
        lo = 0.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if d(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(FatigueResult { required_strength: hi, lifetime_damage: d(hi), cycle_count: cycles, max_abs_mean })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn totals(cycles: &[Cycle]) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for c in cycles {
            match out.iter_mut().find(|(r, _)| *r == c.range) {
                Some(e) => e.1 += c.count,
                None => out.push((c.range, c.count)),
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    #[test]
    fn astm_worked_example() {
        let s = [-2.0, 1.0, -3.0, 5.0, -1.0, 3.0, -4.0, 4.0, -2.0];
        let t = totals(&rainflow(&s).unwrap());
        assert_eq!(t, vec![(3.0, 0.5), (4.0, 1.5), (6.0, 0.5), (8.0, 1.0), (9.0, 0.5)]);
    }

    #[test]
    fn sinusoid_gives_full_cycles() {
        let n = 7;
        let period: Vec<f64> = (0..40).map(|i| -3.0 * (std::f64::consts::TAU * i as f64 / 40.0).cos()).collect();
        let s: Vec<f64> = (0..=n * 40).map(|i| period[i % 40]).collect();
        let c = rainflow(&s).unwrap();
        let at_peak: f64 = c.iter().filter(|c| (c.range - 6.0).abs() < 1e-9).map(|c| c.count).sum();
        assert_eq!(at_peak, n as f64);
        assert!(c.iter().all(|c| (c.range - 6.0).abs() < 1e-9));
    }

    #[test]
    fn monotone_series_is_one_half_cycle() {
        let c = rainflow(&[0.0, 1.0, 2.0, 5.0]).unwrap();
        assert_eq!(c, vec![Cycle { range: 5.0, mean: 2.5, count: 0.5 }]);
    }

    #[test]
    fn required_strength_matches_closed_form() {
        let spec = FatigueSpec::default();
        let s: Vec<f64> = (0..=400).map(|i| 40.0 + 2.0 * (i as f64 * 0.3).sin()).collect();
        let w = WeightedSeries::new(&s, 100.0, 1.0).unwrap();
        let r = fatigue_required_strength(&spec, &[w.clone()]).unwrap();
        // D(S) = K / S^m  =>  S* = K^(1/m)
        let life = 20.0 * 365.25 * 86400.0;
        let k: f64 = w.cycles.iter().map(|c| c.count * (0.5 * c.range).powf(4.0) / 0.5).sum::<f64>() * life / 100.0;
        let oracle = k.powf(0.25);
        assert!((r.required_strength - oracle).abs() < 1e-9 * oracle, "{} {oracle}", r.required_strength);
    }

    #[test]
    fn scaling_the_series_scales_the_strength() {
        let spec = FatigueSpec { mean_stress: MeanStress::Goodman, ..Default::default() };
        let s: Vec<f64> = (0..=300).map(|i| 30.0 + 3.0 * (i as f64 * 0.2).sin() + (i as f64 * 0.05).cos()).collect();
        let a = fatigue_required_strength(&spec, &[WeightedSeries::new(&s, 60.0, 1.0).unwrap()]).unwrap();
        let s2: Vec<f64> = s.iter().map(|v| 2.5 * v).collect();
        let b = fatigue_required_strength(&spec, &[WeightedSeries::new(&s2, 60.0, 1.0).unwrap()]).unwrap();
        assert!((b.required_strength / a.required_strength - 2.5).abs() < 1e-9);
        assert!(a.required_strength > a.max_abs_mean);
    }

    #[test]
    fn constant_series_is_flagged() {
        assert!(fatigue_required_strength(&FatigueSpec::default(), &[WeightedSeries::new(&[1.0; 10], 1.0, 1.0).unwrap()]).is_err());
    }
}
