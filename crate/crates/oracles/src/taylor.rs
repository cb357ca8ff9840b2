//! Truncated multivariate Taylor arithmetic. A `Taylor` holds the
//! coefficients of a function's expansion around a point, so every partial
//! derivative up to the truncation order is exact up to rounding.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use liesym::jetspace::{multi_indices_up_to, MultiIndex};

#[derive(Debug)]
pub struct TaylorSpace {
    vars: usize,
    order: usize,
    indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    /// `(a, b, a + b)` for every pair with `|a| + |b| <= order`.
    products: Vec<(usize, usize, usize)>,
}

impl TaylorSpace {
    pub fn new(vars: usize, order: usize) -> Arc<Self> {
        let indices = multi_indices_up_to(vars, order);
        let lookup: HashMap<MultiIndex, usize> = indices.iter().enumerate().map(|(i, j)| (j.clone(), i)).collect();
        let mut products = Vec::new();
        for (a, ja) in indices.iter().enumerate() {
            for (b, jb) in indices.iter().enumerate() {
                if ja.order() + jb.order() <= order {
                    let sum: Vec<u32> = ja.entries().iter().zip(jb.entries()).map(|(x, y)| x + y).collect();
                    products.push((a, b, lookup[&MultiIndex::new(sum)]));
                }
            }
        }
        Arc::new(Self {
            vars,
            order,
            indices,
            lookup,
            products,
        })
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn order(&self) -> usize {
        self.order
    }
}

#[derive(Clone, Debug)]
pub struct Taylor {
    space: Arc<TaylorSpace>,
    coeffs: Vec<f64>,
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

impl Taylor {
    pub fn constant(space: &Arc<TaylorSpace>, value: f64) -> Self {
        let mut coeffs = vec![0.0; space.indices.len()];
        coeffs[0] = value;
        Self {
            space: space.clone(),
            coeffs,
        }
    }

    /// The coordinate function `v_i` expanded at `v_i = value`.
    pub fn variable(space: &Arc<TaylorSpace>, i: usize, value: f64) -> Self {
        let mut t = Self::constant(space, value);
        if space.order >= 1 {
            t.coeffs[space.lookup[&MultiIndex::unit(space.vars, i)]] = 1.0;
        }
        t
    }

    pub fn space(&self) -> &Arc<TaylorSpace> {
        &self.space
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// `d^J f` at the expansion point.
    pub fn derivative(&self, j: &MultiIndex) -> f64 {
        let scale: f64 = j.entries().iter().map(|&k| factorial(k)).product();
        self.coeffs[self.space.lookup[j]] * scale
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: f64) -> Self {
        let mut t = self.clone();
        t.coeffs[0] += s;
        t
    }

    /// `f(self)` given `derivs[k] = f^(k)(self.value())` for `k <= order`.
    pub fn compose(&self, derivs: &[f64]) -> Self {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut out = Self::constant(&self.space, derivs[0]);
        let mut power = Self::constant(&self.space, 1.0);
        for (k, d) in derivs.iter().enumerate().skip(1).take(self.space.order) {
            power = &power * &h;
            out = &out + &power.scale(d / factorial(k as u32));
        }
        out
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose(&vec![e; self.space.order + 1])
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        self.compose(&(0..=self.space.order).map(|k| cycle[k % 4]).collect::<Vec<_>>())
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        self.compose(&(0..=self.space.order).map(|k| cycle[k % 4]).collect::<Vec<_>>())
    }

    /// `self^a` for a positive base value.
    pub fn powf(&self, a: f64) -> Self {
        let v = self.value();
        let mut derivs = Vec::with_capacity(self.space.order + 1);
        let mut falling = 1.0;
        for k in 0..=self.space.order {
            derivs.push(falling * v.powf(a - k as f64));
            falling *= a - k as f64;
        }
        self.compose(&derivs)
    }

    pub fn recip(&self) -> Self {
        let v = self.value();
        let mut derivs = Vec::with_capacity(self.space.order + 1);
        let mut f = 1.0;
        for k in 0..=self.space.order {
            derivs.push(f / v.powi(k as i32 + 1));
            f *= -(k as f64 + 1.0);
        }
        self.compose(&derivs)
    }
}

impl Add for &Taylor {
    type Output = Taylor;
    fn add(self, o: &Taylor) -> Taylor {
        Taylor {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Taylor {
    type Output = Taylor;
    fn sub(self, o: &Taylor) -> Taylor {
        self + &(-o)
    }
}

impl Neg for &Taylor {
    type Output = Taylor;
    fn neg(self) -> Taylor {
        self.scale(-1.0)
    }
}

impl Mul for &Taylor {
    type Output = Taylor;
    fn mul(self, o: &Taylor) -> Taylor {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for &(a, b, c) in &self.space.products {
            coeffs[c] += self.coeffs[a] * o.coeffs[b];
        }
        Taylor {
            space: self.space.clone(),
            coeffs,
        }
    }
}
