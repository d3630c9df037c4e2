use fowt_core::analysis::{fatigue_study, power_curve, CurveMode, FatigueSpec, Scenario};
use fowt_core::environment::{weibull_bins, WaveSpec};

fn small() -> Scenario {
    let mut s = Scenario::default();
    s.oloc.horizon = 20.0;
    s.oloc.segments = 10;
    s.ccd.bins = 2;
    s
}

#[test]
fn short_power_curve_rises_then_saturates() {
    let s = small();
    let ev = s.evaluator(s.ccd_bins().unwrap()).unwrap();
    let plant = s.plant(&ev).unwrap();
    let curve = power_curve(&plant, &s.oloc, &[6.0, 9.0, 18.0], 20.0, &CurveMode::Steady).unwrap();
    let p: Vec<f64> = curve.points.iter().map(|q| q.p_mean).collect();
    assert!(curve.points.iter().all(|q| q.feasible), "{:?}", curve.points);
    assert!(p[0] < p[1] && p[1] < p[2], "{p:?}");
    assert!(p[2] <= s.oloc.power_max * (1.0 + 1e-4));
    assert!(p[2] > 0.97 * s.oloc.power_max, "{p:?}");

    assert_eq!(curve.to_csv().unwrap().lines().count(), 4);

    // AEP from the curve against a direct Weibull sum of interpolated powers
    let bins = weibull_bins(2.0, 13.44, 3.0, 25.0, 1.0).unwrap();
    let direct: f64 = bins.centers.iter().zip(&bins.probs).map(|(u, pr)| pr * curve.power_at(*u)).sum::<f64>() * 8760.0;
    assert!((curve.aep(&bins, 76.0) - direct).abs() < 1e-9 * direct);
}

#[test]
fn waves_raise_the_required_fatigue_strength() {
    let s = small();
    let ev = s.evaluator(s.ccd_bins().unwrap()).unwrap();
    let plant = s.plant(&ev).unwrap();
    let spec = FatigueSpec::default();
    let calm = fatigue_study(&ev, &plant, None, &spec, 0.1).unwrap();
    let waves = WaveSpec { hs: 6.0, tp: 10.0, ..WaveSpec::default() };
    let rough = fatigue_study(&ev, &plant, Some(&waves), &spec, 0.1).unwrap();
    assert_eq!(calm.bins.len(), 2);
    assert!((calm.result.lifetime_damage - 1.0).abs() < 1e-6);
    assert!(rough.required_mpa > calm.required_mpa, "{} vs {}", rough.required_mpa, calm.required_mpa);
}
