//! Scalar abstraction used by every residual in the model.
//!
//! Model code is written once over `S: Scalar`. With `S = f64` it is a plain
//! evaluation; with `S = HyperDual<N>` one pass yields the value, gradient and
//! Hessian with respect to `N` seeded inputs. Expensive sub-models evaluate on a
//! small local hyper-dual and re-enter the caller's scalar type through
//! [`Scalar::chain`].

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub trait Scalar:
    Copy
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign<f64>
{
    fn cst(v: f64) -> Self;
    fn re(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tanh(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn powf(self, p: f64) -> Self;

    /// Builds a value from a local second-order expansion in `inputs`:
    /// `value`, `grad[i] = d/d inputs[i]`, `hess[i][j]`.
    fn chain<const K: usize>(
        inputs: &[Self; K],
        value: f64,
        grad: &[f64; K],
        hess: &[[f64; K]; K],
    ) -> Self;

    fn powi(self, n: i32) -> Self {
        let mut acc = Self::cst(1.0);
        for _ in 0..n.unsigned_abs() {
            acc = acc * self;
        }
        if n < 0 {
            Self::cst(1.0) / acc
        } else {
            acc
        }
    }

    fn recip(self) -> Self {
        Self::cst(1.0) / self
    }

    /// Smooth signed square: `x * sqrt(x^2 + eps^2)`, a C-infinity stand-in for `x|x|`.
    fn smooth_sq(self, eps: f64) -> Self {
        self * (self * self + eps * eps).sqrt()
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn re(&self) -> f64 {
        *self
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    #[inline]
    fn chain<const K: usize>(_: &[Self; K], value: f64, _: &[f64; K], _: &[[f64; K]; K]) -> Self {
        value
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// Second-order forward-mode number over `N` seeded directions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperDual<const N: usize> {
    pub v: f64,
    pub g: [f64; N],
    pub h: [[f64; N]; N],
}

impl<const N: usize> HyperDual<N> {
    pub fn constant(v: f64) -> Self {
        Self { v, g: [0.0; N], h: [[0.0; N]; N] }
    }

    /// Independent variable number `i`.
    pub fn var(v: f64, i: usize) -> Self {
        let mut d = Self::constant(v);
        d.g[i] = 1.0;
        d
    }

    pub fn vars(values: &[f64; N]) -> [Self; N] {
        std::array::from_fn(|i| Self::var(values[i], i))
    }

    #[inline]
    fn unary(self, f: f64, df: f64, d2f: f64) -> Self {
        let mut out = Self { v: f, g: [0.0; N], h: [[0.0; N]; N] };
        for i in 0..N {
            out.g[i] = df * self.g[i];
        }
        for i in 0..N {
            let gi = d2f * self.g[i];
            for j in 0..N {
                out.h[i][j] = df * self.h[i][j] + gi * self.g[j];
            }
        }
        out
    }
}

impl<const N: usize> Add for HyperDual<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, o: Self) -> Self {
        self += o;
        self
    }
}

impl<const N: usize> AddAssign for HyperDual<N> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.v += o.v;
        for i in 0..N {
            self.g[i] += o.g[i];
            for j in 0..N {
                self.h[i][j] += o.h[i][j];
            }
        }
    }
}

impl<const N: usize> Sub for HyperDual<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, o: Self) -> Self {
        self -= o;
        self
    }
}

impl<const N: usize> SubAssign for HyperDual<N> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        self.v -= o.v;
        for i in 0..N {
            self.g[i] -= o.g[i];
            for j in 0..N {
                self.h[i][j] -= o.h[i][j];
            }
        }
    }
}

impl<const N: usize> Mul for HyperDual<N> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let mut out = Self { v: self.v * o.v, g: [0.0; N], h: [[0.0; N]; N] };
        for i in 0..N {
            out.g[i] = self.v * o.g[i] + o.v * self.g[i];
        }
        for i in 0..N {
            for j in 0..N {
                out.h[i][j] = self.v * o.h[i][j]
                    + o.v * self.h[i][j]
                    + self.g[i] * o.g[j]
                    + o.g[i] * self.g[j];
            }
        }
        out
    }
}

impl<const N: usize> Div for HyperDual<N> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl<const N: usize> Neg for HyperDual<N> {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        self *= -1.0;
        self
    }
}

impl<const N: usize> Add<f64> for HyperDual<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, o: f64) -> Self {
        self.v += o;
        self
    }
}

impl<const N: usize> Sub<f64> for HyperDual<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, o: f64) -> Self {
        self.v -= o;
        self
    }
}

impl<const N: usize> Mul<f64> for HyperDual<N> {
    type Output = Self;
    #[inline]
    fn mul(mut self, o: f64) -> Self {
        self *= o;
        self
    }
}

impl<const N: usize> MulAssign<f64> for HyperDual<N> {
    #[inline]
    fn mul_assign(&mut self, o: f64) {
        self.v *= o;
        for i in 0..N {
            self.g[i] *= o;
            for j in 0..N {
                self.h[i][j] *= o;
            }
        }
    }
}

impl<const N: usize> Div<f64> for HyperDual<N> {
    type Output = Self;
    #[inline]
    fn div(self, o: f64) -> Self {
        self * (1.0 / o)
    }
}

impl<const N: usize> Scalar for HyperDual<N> {
    #[inline]
    fn cst(v: f64) -> Self {
        Self::constant(v)
    }
    #[inline]
    fn re(&self) -> f64 {
        self.v
    }
    fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.unary(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.unary(c, -s, -c)
    }
    fn tanh(self) -> Self {
        let t = self.v.tanh();
        let d = 1.0 - t * t;
        self.unary(t, d, -2.0 * t * d)
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.unary(e, e, e)
    }
    fn ln(self) -> Self {
        let r = 1.0 / self.v;
        self.unary(self.v.ln(), r, -r * r)
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.unary(s, 0.5 / s, -0.25 / (s * self.v))
    }
    fn powf(self, p: f64) -> Self {
        let f = self.v.powf(p);
        let d = p * self.v.powf(p - 1.0);
        let d2 = p * (p - 1.0) * self.v.powf(p - 2.0);
        self.unary(f, d, d2)
    }
    fn recip(self) -> Self {
        let r = 1.0 / self.v;
        self.unary(r, -r * r, 2.0 * r * r * r)
    }
    fn chain<const K: usize>(
        inputs: &[Self; K],
        value: f64,
        grad: &[f64; K],
        hess: &[[f64; K]; K],
    ) -> Self {
        let mut out = Self::constant(value);
        for (k, inp) in inputs.iter().enumerate() {
            let gk = grad[k];
            if gk == 0.0 {
                continue;
            }
            for i in 0..N {
                out.g[i] += gk * inp.g[i];
                for j in 0..N {
                    out.h[i][j] += gk * inp.h[i][j];
                }
            }
        }
        for a in 0..K {
            // w_i = sum_b hess[a][b] * g_b[i]
            let mut w = [0.0; N];
            let mut any = false;
            for b in 0..K {
                let hab = hess[a][b];
                if hab != 0.0 {
                    any = true;
                    for i in 0..N {
                        w[i] += hab * inputs[b].g[i];
                    }
                }
            }
            if !any {
                continue;
            }
            for i in 0..N {
                let gai = inputs[a].g[i];
                if gai == 0.0 {
                    continue;
                }
                for j in 0..N {
                    out.h[i][j] += gai * w[j];
                }
            }
        }
        out
    }
}

/// Runs `f` on a fresh `K`-variable hyper-dual seeded at `inputs` (values only)
/// and returns value, gradient and Hessian of each output.
pub fn local_expansion<const K: usize, const M: usize>(
    at: &[f64; K],
    f: impl Fn(&[HyperDual<K>; K]) -> [HyperDual<K>; M],
) -> [HyperDual<K>; M] {
    let vars = HyperDual::<K>::vars(at);
    f(&vars)
}

/// Evaluates a vector function of `K` inputs on a local hyper-dual and maps each
/// output back into the caller's scalar type.
pub fn lift<S: Scalar, const K: usize, const M: usize>(
    inputs: &[S; K],
    f: impl Fn(&[HyperDual<K>; K]) -> [HyperDual<K>; M],
) -> [S; M] {
    let at: [f64; K] = std::array::from_fn(|i| inputs[i].re());
    let out = local_expansion(&at, f);
    std::array::from_fn(|m| S::chain(inputs, out[m].v, &out[m].g, &out[m].h))
}
