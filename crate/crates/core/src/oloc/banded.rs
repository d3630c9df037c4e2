//! Banded LU factorisation with partial pivoting.

/// Square band matrix with `kl` sub- and `ku` super-diagonals; storage leaves room
/// for the `kl` extra super-diagonals created by row interchanges.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    /// Adds `v` at (i, j); panics in debug builds outside the declared band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i}, {j}) outside band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.slot(i, j)]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            for j in lo..=hi {
                *yi += self.get(i, j) * x[j];
            }
        }
        y
    }

    /// In-place factorisation; returns `None` on an exactly singular pivot.
    pub fn factor(mut self) -> Option<BandLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for r in k + 1..=last_row {
                let v = self.get(r, k).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return None;
            }
            piv[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for c in k..=last_col {
                    let (a, b) = (self.slot(k, c), self.slot(p, c));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.get(k, k);
            for r in k + 1..=last_row {
                let sr = self.slot(r, k);
                let l = self.data[sr] / pivot;
                self.data[sr] = l;
                if l != 0.0 {
                    let base_k = self.slot(k, k);
                    let base_r = self.slot(r, k);
                    for off in 1..=(last_col - k) {
                        self.data[base_r + off] -= l * self.data[base_k + off];
                    }
                }
            }
        }
        Some(BandLu { m: self, piv })
    }
}

#[derive(Clone, Debug)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.m.n, self.m.kl, self.m.ku);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for r in k + 1..=(k + kl).min(n - 1) {
                    b[r] -= self.m.get(r, k) * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut acc = b[k];
            for c in k + 1..=(k + kl + ku).min(n - 1) {
                acc -= self.m.get(k, c) * b[c];
            }
            b[k] = acc / self.m.get(k, k);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};

    #[test]
    fn matches_dense_solve_with_pivoting() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let (n, kl, ku) = (40, 3, 5);
        let mut band = BandMatrix::zeros(n, kl, ku);
        let mut dense = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // zero diagonal forces row interchanges
                let v = if i == j { 0.0 } else { rng.gen_range(-1.0..1.0) };
                band.add(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x_ref = dense.clone().lu().solve(&DVector::from_vec(b.clone())).unwrap();
        let lu = band.clone().factor().unwrap();
        let mut x = b.clone();
        lu.solve(&mut x);
        for i in 0..n {
            assert!((x[i] - x_ref[i]).abs() < 1e-9 * x_ref.amax().max(1.0));
        }
        let r = band.matvec(&x);
        for i in 0..n {
            assert!((r[i] - b[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let band = BandMatrix::zeros(4, 1, 1);
        assert!(band.factor().is_none());
    }
}
