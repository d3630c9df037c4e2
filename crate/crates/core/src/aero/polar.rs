use std::path::Path;

use crate::error::{Error, Result};

/// Lift and drag versus angle of attack, linearly interpolated.
#[derive(Clone, Debug, PartialEq)]
pub struct Polar {
    pub name: String,
    pub alpha_deg: Vec<f64>,
    pub cl: Vec<f64>,
    pub cd: Vec<f64>,
}

impl Polar {
    pub fn from_csv_str(name: &str, text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let (mut a, mut l, mut d) = (Vec::new(), Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            let get = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Parse(format!("polar {name}: bad row {rec:?}")))
            };
            a.push(get(0)?);
            l.push(get(1)?);
            d.push(get(2)?);
        }
        if a.len() < 2 || a.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parse(format!("polar {name}: angles must be strictly increasing")));
        }
        Ok(Self { name: name.to_string(), alpha_deg: a, cl: l, cd: d })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("polar").to_string();
        Self::from_csv_str(&name, &std::fs::read_to_string(path)?)
    }

    /// (Cl, Cd) at `alpha` [deg], wrapped into [-180, 180].
    pub fn coefficients(&self, alpha: f64) -> (f64, f64) {
        let mut a = alpha;
        while a > 180.0 {
            a -= 360.0;
        }
        while a < -180.0 {
            a += 360.0;
        }
        let xs = &self.alpha_deg;
        let n = xs.len();
        if a <= xs[0] {
            return (self.cl[0], self.cd[0]);
        }
        if a >= xs[n - 1] {
            return (self.cl[n - 1], self.cd[n - 1]);
        }
        let i = xs.partition_point(|&x| x <= a) - 1;
        let t = (a - xs[i]) / (xs[i + 1] - xs[i]);
        (self.cl[i] + t * (self.cl[i + 1] - self.cl[i]), self.cd[i] + t * (self.cd[i + 1] - self.cd[i]))
    }
}

/// Source note for the shipped polar set.
pub const POLAR_SOURCE: &str = "NREL 5 MW AeroDyn v13 airfoil tables (Cylinder1/2, DU40/35/30/25/21_A17, NACA64_A17)";

/// The NREL 5 MW airfoil family in blade-table order: Cyl1, Cyl2, DU40, DU35, DU30, DU25, DU21, NACA64.
pub fn nrel5mw_polars() -> Vec<Polar> {
    let src: [(&str, &str); 8] = [
        ("cylinder1", include_str!("../../data/polars/cylinder1.csv")),
        ("cylinder2", include_str!("../../data/polars/cylinder2.csv")),
        ("du40_a17", include_str!("../../data/polars/du40_a17.csv")),
        ("du35_a17", include_str!("../../data/polars/du35_a17.csv")),
        ("du30_a17", include_str!("../../data/polars/du30_a17.csv")),
        ("du25_a17", include_str!("../../data/polars/du25_a17.csv")),
        ("du21_a17", include_str!("../../data/polars/du21_a17.csv")),
        ("naca64_a17", include_str!("../../data/polars/naca64_a17.csv")),
    ];
    src.iter().map(|(n, t)| Polar::from_csv_str(n, t).expect("shipped polar parses")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_polars_parse_and_interpolate() {
        let p = nrel5mw_polars();
        assert_eq!(p.len(), 8);
        let (cl, cd) = p[0].coefficients(12.0);
        assert_eq!((cl, cd), (0.0, 0.5));
        let naca = &p[7];
        let (cl0, _) = naca.coefficients(0.0);
        let (cl5, _) = naca.coefficients(5.0);
        assert!(cl5 > cl0 && cl0 > 0.0);
        assert_eq!(naca.coefficients(360.0 + 5.0), naca.coefficients(5.0));
    }
}
