//! Truncated multivariate Taylor polynomials (forward-mode jets).
//!
//! A [`Taylor`] holds the coefficients `c_α = ∂^α f / α!` of a function of
//! `m ≤ 3` variables for all multi-indices with `|α| ≤ 3`. Arithmetic and
//! composition with smooth scalar functions are exact up to rounding, so
//! derivatives extracted from a result carry no discretisation error.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

pub const MAX_ORDER: usize = 3;
pub const MAX_VARS: usize = 3;

struct Basis {
    monos: Vec<[u8; MAX_VARS]>,
    /// Dense lookup from exponent tuple (base 4 encoding) to coefficient slot.
    slot: Vec<Option<usize>>,
    /// `(i, j, k)` with `mono_i + mono_j = mono_k`.
    products: Vec<(usize, usize, usize)>,
}

fn encode(e: &[u8; MAX_VARS]) -> usize {
    e.iter().rev().fold(0, |acc, &x| acc * 4 + x as usize)
}

impl Basis {
    fn build(m: usize) -> Basis {
        let mut monos = Vec::new();
        for deg in 0..=MAX_ORDER {
            let mut level = Vec::new();
            let mut e = [0u8; MAX_VARS];
            collect(m, 0, deg, &mut e, &mut level);
            // lexicographically descending within a degree: x^2 before xy before y^2
            level.sort_by(|a, b| b.cmp(a));
            monos.extend(level);
        }
        let mut slot = vec![None; 4usize.pow(MAX_VARS as u32)];
        for (i, e) in monos.iter().enumerate() {
            slot[encode(e)] = Some(i);
        }
        let mut products = Vec::new();
        for (i, a) in monos.iter().enumerate() {
            for (j, b) in monos.iter().enumerate() {
                let deg: u8 = a.iter().chain(b.iter()).sum();
                if deg as usize > MAX_ORDER {
                    continue;
                }
                let mut s = [0u8; MAX_VARS];
                for v in 0..MAX_VARS {
                    s[v] = a[v] + b[v];
                }
                products.push((i, j, slot[encode(&s)].expect("closed under addition")));
            }
        }
        Basis { monos, slot, products }
    }
}

fn collect(m: usize, var: usize, remaining: usize, e: &mut [u8; MAX_VARS], out: &mut Vec<[u8; MAX_VARS]>) {
    if var + 1 == m {
        e[var] = remaining as u8;
        out.push(*e);
        e[var] = 0;
        return;
    }
    for k in 0..=remaining {
        e[var] = k as u8;
        collect(m, var + 1, remaining - k, e, out);
    }
    e[var] = 0;
}

fn basis(m: usize) -> &'static Basis {
    static BASES: [OnceLock<Basis>; MAX_VARS + 1] =
        [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    assert!((1..=MAX_VARS).contains(&m), "Taylor jets support 1..=3 variables");
    BASES[m].get_or_init(|| Basis::build(m))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Taylor {
    m: usize,
    c: Vec<f64>,
}

impl Taylor {
    pub fn constant(m: usize, value: f64) -> Self {
        let mut c = vec![0.0; basis(m).monos.len()];
        c[0] = value;
        Taylor { m, c }
    }

    /// The coordinate function `t_var` expanded around `value`.
    pub fn variable(m: usize, var: usize, value: f64) -> Self {
        assert!(var < m);
        let mut t = Taylor::constant(m, value);
        let mut e = [0u8; MAX_VARS];
        e[var] = 1;
        let i = basis(m).slot[encode(&e)].unwrap();
        t.c[i] = 1.0;
        t
    }

    pub fn vars(&self) -> usize {
        self.m
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Partial derivative `∂^α f` at the expansion point; `alpha` lists
    /// the variable index of each differentiation (order does not matter).
    pub fn derivative(&self, alpha: &[usize]) -> f64 {
        assert!(alpha.len() <= MAX_ORDER);
        let mut e = [0u8; MAX_VARS];
        for &v in alpha {
            assert!(v < self.m);
            e[v] += 1;
        }
        let i = basis(self.m).slot[encode(&e)].unwrap();
        let factorial: f64 = e.iter().map(|&k| (1..=k as u32).product::<u32>() as f64).product();
        self.c[i] * factorial
    }

    pub fn scale(&self, s: f64) -> Self {
        Taylor {
            m: self.m,
            c: self.c.iter().map(|x| s * x).collect(),
        }
    }

    /// `f(self)` given `[f(a), f'(a), f''(a), f'''(a)]` at `a = self.value()`.
    pub fn compose(&self, d: [f64; MAX_ORDER + 1]) -> Self {
        let mut delta = self.clone();
        delta.c[0] = 0.0;
        let mut out = Taylor::constant(self.m, d[0]);
        let mut power = Taylor::constant(self.m, 1.0);
        let mut factorial = 1.0;
        for (k, dk) in d.iter().enumerate().skip(1) {
            power = &power * &delta;
            factorial *= k as f64;
            let w = dk / factorial;
            for (o, p) in out.c.iter_mut().zip(&power.c) {
                *o += w * p;
            }
        }
        out
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose([e; 4])
    }

    pub fn tanh(&self) -> Self {
        let th = self.value().tanh();
        let s2 = 1.0 - th * th;
        self.compose([th, s2, -2.0 * s2 * th, 4.0 * s2 * th * th - 2.0 * s2 * s2])
    }

    pub fn sech(&self) -> Self {
        let th = self.value().tanh();
        let se = 1.0 / self.value().cosh();
        let se2 = se * se;
        self.compose([
            se,
            -se * th,
            se * (th * th - se2),
            -se * th * th * th + 5.0 * se * se2 * th,
        ])
    }
}

impl Add for &Taylor {
    type Output = Taylor;
    fn add(self, rhs: &Taylor) -> Taylor {
        debug_assert_eq!(self.m, rhs.m);
        Taylor {
            m: self.m,
            c: self.c.iter().zip(&rhs.c).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Taylor {
    type Output = Taylor;
    fn sub(self, rhs: &Taylor) -> Taylor {
        debug_assert_eq!(self.m, rhs.m);
        Taylor {
            m: self.m,
            c: self.c.iter().zip(&rhs.c).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &Taylor {
    type Output = Taylor;
    fn mul(self, rhs: &Taylor) -> Taylor {
        debug_assert_eq!(self.m, rhs.m);
        let b = basis(self.m);
        let mut c = vec![0.0; b.monos.len()];
        for &(i, j, k) in &b.products {
            c[k] += self.c[i] * rhs.c[j];
        }
        Taylor { m: self.m, c }
    }
}

impl Neg for &Taylor {
    type Output = Taylor;
    fn neg(self) -> Taylor {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_sizes() {
        assert_eq!(basis(1).monos.len(), 4);
        assert_eq!(basis(2).monos.len(), 10);
        assert_eq!(basis(3).monos.len(), 20);
    }

    #[test]
    fn polynomial_derivatives_are_exact() {
        // f = x^2 y + 3 y^3 at (2, -1)
        let x = Taylor::variable(2, 0, 2.0);
        let y = Taylor::variable(2, 1, -1.0);
        let f = &(&(&x * &x) * &y) + &(&(&y * &y) * &y).scale(3.0);
        assert_eq!(f.value(), -4.0 - 3.0);
        assert_eq!(f.derivative(&[0]), -4.0);
        assert_eq!(f.derivative(&[1]), 4.0 + 9.0);
        assert_eq!(f.derivative(&[0, 0]), -2.0);
        assert_eq!(f.derivative(&[0, 1]), 4.0);
        assert_eq!(f.derivative(&[1, 1]), -18.0);
        assert_eq!(f.derivative(&[0, 0, 1]), 2.0);
        assert_eq!(f.derivative(&[1, 1, 1]), 18.0);
        assert_eq!(f.derivative(&[0, 0, 0]), 0.0);
    }

    #[test]
    fn elementary_functions_match_central_differences() {
        let x0 = 0.37;
        let h = 1e-3;
        type Pair = (fn(&Taylor) -> Taylor, fn(f64) -> f64);
        let fns: [Pair; 5] = [
            (Taylor::sin, f64::sin),
            (Taylor::cos, f64::cos),
            (Taylor::exp, f64::exp),
            (Taylor::tanh, f64::tanh),
            (Taylor::sech, |x| 1.0 / x.cosh()),
        ];
        for (tf, f) in fns {
            let t = tf(&Taylor::variable(1, 0, x0));
            let d3 = (f(x0 + 2.0 * h) - 2.0 * f(x0 + h) + 2.0 * f(x0 - h) - f(x0 - 2.0 * h)) / (2.0 * h * h * h);
            let d2 = (f(x0 + h) - 2.0 * f(x0) + f(x0 - h)) / (h * h);
            let d1 = (f(x0 + h) - f(x0 - h)) / (2.0 * h);
            assert!((t.derivative(&[0]) - d1).abs() < 1e-6);
            assert!((t.derivative(&[0, 0]) - d2).abs() < 1e-5);
            assert!((t.derivative(&[0, 0, 0]) - d3).abs() < 1e-4);
        }
    }

    #[test]
    fn chain_rule_through_composition() {
        // sin(x y) : ∂x∂y = cos(xy) - xy sin(xy)
        let (x0, y0) = (0.4, 1.3);
        let x = Taylor::variable(2, 0, x0);
        let y = Taylor::variable(2, 1, y0);
        let f = (&x * &y).sin();
        let p = x0 * y0;
        assert!((f.derivative(&[0, 1]) - (p.cos() - p * p.sin())).abs() < 1e-14);
        // ∂x∂x∂y = -2y sin(xy) - x y^2 cos(xy)
        let expected = -2.0 * y0 * p.sin() - x0 * y0 * y0 * p.cos();
        assert!((f.derivative(&[0, 0, 1]) - expected).abs() < 1e-14);
    }
}
