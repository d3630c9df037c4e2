//! Two-regime neural surrogate of the catenary solver.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::catenary::{regime_boundary, solve_catenary, LineProperties, Regime};
use super::mlp::{train_mlp, Mlp, OutputTransform, TrainConfig, TrainReport};
use crate::ad::{HyperDual, Scalar};
use crate::error::{Error, Result};

const FORMAT_HEADER: &str = "fowt-mooring-surrogate";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub l_min: f64,
    pub l_max: f64,
    pub h_min: f64,
    pub h_max: f64,
}

impl Domain {
    pub fn contains(&self, l: f64, h: f64) -> bool {
        l >= self.l_min && l <= self.l_max && h >= self.h_min && h <= self.h_max
    }
}

/// Touchdown boundary l_b(h) as a natural cubic spline on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Boundary {
    pub h: Vec<f64>,
    pub l: Vec<f64>,
    m: Vec<f64>,
}

impl Boundary {
    pub fn new(h: Vec<f64>, l: Vec<f64>) -> Self {
        let m = natural_spline_moments(&h, &l);
        Self { h, l, m }
    }

    /// Value, first and second derivative at `h` (linear extrapolation outside the grid).
    pub fn eval(&self, h: f64) -> (f64, f64, f64) {
        let n = self.h.len();
        if n == 1 {
            return (self.l[0], 0.0, 0.0);
        }
        let i = match self.h.iter().position(|&x| x > h) {
            Some(0) => 0,
            Some(k) => k - 1,
            None => n - 2,
        }
        .min(n - 2);
        let (x0, x1) = (self.h[i], self.h[i + 1]);
        let d = x1 - x0;
        let (a, b) = ((x1 - h) / d, (h - x0) / d);
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.l[i], self.l[i + 1]);
        let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * d * d / 6.0;
        let dv = (y1 - y0) / d + (-(3.0 * a * a - 1.0) * m0 + (3.0 * b * b - 1.0) * m1) * d / 6.0;
        let d2 = a * m0 + b * m1;
        (v, dv, d2)
    }
}

fn natural_spline_moments(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // tridiagonal system for interior second derivatives
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        let a = h0 / 6.0;
        let b = (h0 + h1) / 3.0;
        let cc = h1 / 6.0;
        let rhs = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
        let denom = b - a * c[i - 1];
        c[i] = cc / denom;
        d[i] = (rhs - a * d[i - 1]) / denom;
    }
    for i in (1..n - 1).rev() {
        m[i] = d[i] - c[i] * m[i + 1];
    }
    m
}

fn smootherstep(x: f64) -> (f64, f64, f64) {
    if x <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if x >= 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        let v = x * x * x * (x * (6.0 * x - 15.0) + 10.0);
        let d = 30.0 * x * x * (x - 1.0) * (x - 1.0);
        let d2 = 60.0 * x * (2.0 * x * x - 3.0 * x + 1.0);
        (v, d, d2)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MooringSurrogate {
    pub props: LineProperties,
    pub domain: Domain,
    pub boundary: Boundary,
    /// Half width of the C2 blend band around the boundary used by [`Self::eval_smooth`].
    pub blend: f64,
    pub suspended: Mlp,
    pub seabed: Mlp,
}

#[derive(Clone, Debug)]
pub struct SurrogateConfig {
    pub domain: Domain,
    pub hidden: Vec<usize>,
    pub train_samples: usize,
    pub val_samples: usize,
    /// Samples from the other side of the boundary included in each regime's set.
    pub band: f64,
    pub blend: f64,
    pub boundary_points: usize,
    pub train: TrainConfig,
    pub max_rel_error: f64,
    pub check_grid: usize,
}

impl SurrogateConfig {
    pub fn default_for(props: &LineProperties, l0: f64, h0: f64) -> Self {
        let _ = props;
        Self {
            domain: Domain { l_min: l0 - 30.0, l_max: l0 + 30.0, h_min: h0 - 8.0, h_max: h0 + 8.0 },
            hidden: vec![16, 16],
            train_samples: 700,
            val_samples: 200,
            band: 2.0,
            blend: 0.5,
            boundary_points: 33,
            train: TrainConfig::default(),
            max_rel_error: 0.01,
            check_grid: 41,
        }
    }

    /// Default configuration centred on the design-pose line offsets of `layout`.
    pub fn for_layout(props: &LineProperties, layout: &super::MooringLayout) -> Self {
        let l0 = layout.anchor_radius - layout.fairlead_radius;
        let h0 = layout.fairlead_z - layout.anchor_z;
        Self::default_for(props, l0, h0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateReport {
    pub suspended: TrainReport,
    pub seabed: TrainReport,
    /// Max relative error per output (F_H, F_V) per regime on the check grid.
    pub max_rel_error_suspended: [f64; 2],
    pub max_rel_error_seabed: [f64; 2],
}

impl SurrogateReport {
    pub fn max_rel_error(&self) -> f64 {
        self.max_rel_error_suspended.iter().chain(&self.max_rel_error_seabed).fold(0.0_f64, |a, &b| a.max(b))
    }
}

fn sample_regime(
    rng: &mut ChaCha8Rng,
    n: usize,
    regime: Regime,
    dom: &Domain,
    bnd: &Boundary,
    band: f64,
    props: &LineProperties,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    while xs.len() < n {
        let h = rng.gen_range(dom.h_min..=dom.h_max);
        let lb = bnd.eval(h).0;
        let (lo, hi) = match regime {
            Regime::Suspended => ((lb - band).max(dom.l_min), dom.l_max),
            Regime::Seabed => (dom.l_min, (lb + band).min(dom.l_max)),
        };
        if hi <= lo {
            continue;
        }
        let l = rng.gen_range(lo..=hi);
        let s = solve_catenary(l, h, props)?;
        xs.push(vec![l, h]);
        ys.push(vec![s.h_force, s.v_force]);
    }
    Ok((xs, ys))
}

/// Trains both regime networks and checks them on a grid distinct from the samples.
pub fn train_surrogate(props: &LineProperties, cfg: &SurrogateConfig) -> Result<(MooringSurrogate, SurrogateReport)> {
    let dom = cfg.domain;
    let nb = cfg.boundary_points.max(2);
    let (bh_lo, bh_hi) = (dom.h_min - 1.0, dom.h_max + 1.0);
    let mut bh = Vec::with_capacity(nb);
    let mut bl = Vec::with_capacity(nb);
    for i in 0..nb {
        let h = bh_lo + (bh_hi - bh_lo) * i as f64 / (nb - 1) as f64;
        bh.push(h);
        bl.push(regime_boundary(h, props)?);
    }
    let boundary = Boundary::new(bh, bl);

    let mut sizes = vec![2];
    sizes.extend_from_slice(&cfg.hidden);
    sizes.push(2);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
    let mut nets = Vec::new();
    let mut reports = Vec::new();
    for regime in [Regime::Suspended, Regime::Seabed] {
        let (tx, ty) = sample_regime(&mut rng, cfg.train_samples, regime, &dom, &boundary, cfg.band, props)?;
        let (vx, vy) = sample_regime(&mut rng, cfg.val_samples, regime, &dom, &boundary, cfg.band, props)?;
        let (net, rep) = train_mlp(&sizes, OutputTransform::Log, &tx, &ty, &vx, &vy, &cfg.train);
        nets.push(net);
        reports.push(rep);
    }
    let seabed = nets.pop().unwrap();
    let suspended = nets.pop().unwrap();
    let s = MooringSurrogate { props: *props, domain: dom, boundary, blend: cfg.blend, suspended, seabed };
    let (es, eb) = s.check_error(cfg.check_grid)?;
    let report = SurrogateReport {
        suspended: reports[0].clone(),
        seabed: reports[1].clone(),
        max_rel_error_suspended: es,
        max_rel_error_seabed: eb,
    };
    if report.max_rel_error() > cfg.max_rel_error {
        return Err(Error::TrainingFailure { max_rel_err: report.max_rel_error(), limit: cfg.max_rel_error });
    }
    Ok((s, report))
}

impl MooringSurrogate {
    pub fn regime(&self, l: f64, h: f64) -> Regime {
        if l > self.boundary.eval(h).0 {
            Regime::Suspended
        } else {
            Regime::Seabed
        }
    }

    /// Hard regime selection; refuses to extrapolate.
    pub fn eval(&self, l: f64, h: f64) -> Result<(f64, f64)> {
        if !self.domain.contains(l, h) {
            return Err(Error::Extrapolation { l, h });
        }
        let net = match self.regime(l, h) {
            Regime::Suspended => &self.suspended,
            Regime::Seabed => &self.seabed,
        };
        let y = net.eval(&[l, h]);
        Ok((y[0], y[1]))
    }

    /// C2 blend of the two networks across the boundary band, for use inside smooth residuals.
    /// Evaluates outside the domain without complaint; callers bound the pose instead.
    pub fn eval_smooth<S: Scalar>(&self, l: S, h: S) -> [S; 2] {
        let (lb, dlb, d2lb) = self.boundary.eval(h.re());
        let lb_s = S::chain(&[h], lb, &[dlb], &[[d2lb]]);
        let x = (l - lb_s + self.blend) / (2.0 * self.blend);
        let (wv, wd, wd2) = smootherstep(x.re());
        let w = S::chain(&[x], wv, &[wd], &[[wd2]]);
        let inp = [l, h];
        if wv >= 1.0 {
            let y = self.suspended.eval(&inp);
            [y[0], y[1]]
        } else if wv <= 0.0 {
            let y = self.seabed.eval(&inp);
            [y[0], y[1]]
        } else {
            let a = self.suspended.eval(&inp);
            let b = self.seabed.eval(&inp);
            [w * a[0] + (S::cst(1.0) - w) * b[0], w * a[1] + (S::cst(1.0) - w) * b[1]]
        }
    }

    /// Local second-order expansion of the smooth surrogate in (l, h).
    pub fn eval_smooth_local(&self, l: f64, h: f64) -> [HyperDual<2>; 2] {
        let [ld, hd] = HyperDual::<2>::vars(&[l, h]);
        self.eval_smooth(ld, hd)
    }

    /// Max relative error per output in each regime over an `n x n` grid offset from any
    /// training sample pattern.
    pub fn check_error(&self, n: usize) -> Result<([f64; 2], [f64; 2])> {
        let d = self.domain;
        let mut es = [0.0_f64; 2];
        let mut eb = [0.0_f64; 2];
        for i in 0..n {
            for j in 0..n {
                let l = d.l_min + (d.l_max - d.l_min) * (i as f64 + 0.5) / n as f64;
                let h = d.h_min + (d.h_max - d.h_min) * (j as f64 + 0.5) / n as f64;
                let exact = solve_catenary(l, h, &self.props)?;
                let (fh, fv) = self.eval(l, h)?;
                let e = [(fh / exact.h_force - 1.0).abs(), (fv / exact.v_force - 1.0).abs()];
                let slot = match exact.regime {
                    Regime::Suspended => &mut es,
                    Regime::Seabed => &mut eb,
                };
                slot[0] = slot[0].max(e[0]);
                slot[1] = slot[1].max(e[1]);
            }
        }
        Ok((es, eb))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let fl = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        writeln!(s, "{FORMAT_HEADER} {FORMAT_VERSION}").unwrap();
        writeln!(s, "line {:?} {:?} {:?}", self.props.length, self.props.weight, self.props.ea).unwrap();
        let d = self.domain;
        writeln!(s, "domain {:?} {:?} {:?} {:?}", d.l_min, d.l_max, d.h_min, d.h_max).unwrap();
        writeln!(s, "blend {:?}", self.blend).unwrap();
        writeln!(s, "boundary {}", self.boundary.h.len()).unwrap();
        for (h, l) in self.boundary.h.iter().zip(&self.boundary.l) {
            writeln!(s, "{h:?} {l:?}").unwrap();
        }
        for (name, net) in [("suspended", &self.suspended), ("seabed", &self.seabed)] {
            writeln!(s, "network {name}").unwrap();
            writeln!(s, "layers {}", net.sizes.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")).unwrap();
            writeln!(s, "activation tanh").unwrap();
            writeln!(s, "output_transform {}", net.transform.tag()).unwrap();
            writeln!(s, "input_min {}", fl(&net.in_min)).unwrap();
            writeln!(s, "input_max {}", fl(&net.in_max)).unwrap();
            writeln!(s, "output_min {}", fl(&net.out_min)).unwrap();
            writeln!(s, "output_max {}", fl(&net.out_max)).unwrap();
            for (k, (w, b)) in net.weights.iter().zip(&net.biases).enumerate() {
                let (nin, nout) = (net.sizes[k], net.sizes[k + 1]);
                writeln!(s, "weights {k} {nout} {nin}").unwrap();
                for r in 0..nout {
                    writeln!(s, "{}", fl(&w[r * nin..(r + 1) * nin])).unwrap();
                }
                writeln!(s, "biases {k} {nout}").unwrap();
                writeln!(s, "{}", fl(b)).unwrap();
            }
        }
        writeln!(s, "end").unwrap();
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let perr = |m: &str| Error::Parse(format!("mooring surrogate: {m}"));
        let mut next = || lines.next().ok_or_else(|| perr("unexpected end of file"));
        let nums = |line: &str, skip: usize| -> Result<Vec<f64>> {
            line.split_whitespace()
                .skip(skip)
                .map(|t| t.parse::<f64>().map_err(|_| perr(&format!("bad number {t:?}"))))
                .collect()
        };
        let head = next()?;
        let mut ht = head.split_whitespace();
        if ht.next() != Some(FORMAT_HEADER) {
            return Err(perr("missing header"));
        }
        let ver: u32 = ht.next().and_then(|v| v.parse().ok()).ok_or_else(|| perr("missing version"))?;
        if ver != FORMAT_VERSION {
            return Err(perr(&format!("unsupported version {ver}")));
        }
        let expect = |line: &str, key: &str| -> Result<()> {
            if line.split_whitespace().next() == Some(key) {
                Ok(())
            } else {
                Err(perr(&format!("expected `{key}`, found `{line}`")))
            }
        };
        let l = next()?;
        expect(l, "line")?;
        let v = nums(l, 1)?;
        let props = LineProperties { length: v[0], weight: v[1], ea: v[2] };
        let l = next()?;
        expect(l, "domain")?;
        let v = nums(l, 1)?;
        let domain = Domain { l_min: v[0], l_max: v[1], h_min: v[2], h_max: v[3] };
        let l = next()?;
        expect(l, "blend")?;
        let blend = nums(l, 1)?[0];
        let l = next()?;
        expect(l, "boundary")?;
        let nb = nums(l, 1)?[0] as usize;
        let (mut bh, mut bl) = (Vec::with_capacity(nb), Vec::with_capacity(nb));
        for _ in 0..nb {
            let v = nums(next()?, 0)?;
            bh.push(v[0]);
            bl.push(v[1]);
        }
        let mut nets = Vec::new();
        for name in ["suspended", "seabed"] {
            let l = next()?;
            if l.trim() != format!("network {name}") {
                return Err(perr(&format!("expected network {name}")));
            }
            let l = next()?;
            expect(l, "layers")?;
            let sizes: Vec<usize> = nums(l, 1)?.iter().map(|&x| x as usize).collect();
            let l = next()?;
            if l.trim() != "activation tanh" {
                return Err(perr("only tanh activation is supported"));
            }
            let l = next()?;
            expect(l, "output_transform")?;
            let tag = l.split_whitespace().nth(1).unwrap_or("");
            let transform = OutputTransform::from_tag(tag).ok_or_else(|| perr("bad output transform"))?;
            let mut net = Mlp::new(&sizes, transform);
            for key in ["input_min", "input_max", "output_min", "output_max"] {
                let l = next()?;
                expect(l, key)?;
                let v = nums(l, 1)?;
                match key {
                    "input_min" => net.in_min = v,
                    "input_max" => net.in_max = v,
                    "output_min" => net.out_min = v,
                    _ => net.out_max = v,
                }
            }
            for k in 0..sizes.len() - 1 {
                let (nin, nout) = (sizes[k], sizes[k + 1]);
                expect(next()?, "weights")?;
                let mut w = Vec::with_capacity(nin * nout);
                for _ in 0..nout {
                    let row = nums(next()?, 0)?;
                    if row.len() != nin {
                        return Err(perr("weight row length mismatch"));
                    }
                    w.extend(row);
                }
                net.weights[k] = w;
                expect(next()?, "biases")?;
                let b = nums(next()?, 0)?;
                if b.len() != nout {
                    return Err(perr("bias length mismatch"));
                }
                net.biases[k] = b;
            }
            nets.push(net);
        }
        if next()?.trim() != "end" {
            return Err(perr("missing end marker"));
        }
        let seabed = nets.pop().unwrap();
        let suspended = nets.pop().unwrap();
        Ok(Self { props, domain, boundary: Boundary::new(bh, bl), blend, suspended, seabed })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spline_is_exact_on_cubic_free_data() {
        let h: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let l: Vec<f64> = h.iter().map(|x| 2.0 * x + 1.0).collect();
        let b = Boundary::new(h, l);
        let (v, d, d2) = b.eval(3.3);
        assert!((v - 7.6).abs() < 1e-12 && (d - 2.0).abs() < 1e-12 && d2.abs() < 1e-12);
    }

    #[test]
    fn smootherstep_is_c2_at_ends() {
        let (v0, d0, s0) = smootherstep(1e-9);
        let (v1, d1, s1) = smootherstep(1.0 - 1e-9);
        assert!(v0 < 1e-12 && d0 < 1e-12 && s0.abs() < 1e-6);
        assert!((v1 - 1.0).abs() < 1e-12 && d1 < 1e-12 && s1.abs() < 1e-6);
    }
}
