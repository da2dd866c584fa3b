//! Vectors of `C^n ≅ R^{2n}` and the complex structure acting on them.
//!
//! A vector with `n` complex slots is stored as `2n` reals: real parts in
//! `[0, n)`, imaginary parts in `[n, 2n)`. All inner products are the real
//! Euclidean product of `R^{2n}`.

use num_complex::Complex64;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

#[derive(Debug, Clone, PartialEq)]
pub struct AmbientVector(Vec<f64>);

impl AmbientVector {
    pub fn zeros(n: usize) -> Self {
        AmbientVector(vec![0.0; 2 * n])
    }

    /// Builds a vector from `2n` reals in block order (real parts, then imaginary parts).
    ///
    /// Panics if the length is odd.
    pub fn from_reals(coords: Vec<f64>) -> Self {
        assert!(coords.len().is_multiple_of(2), "ambient vectors need an even number of reals");
        AmbientVector(coords)
    }

    pub fn from_complex(z: &[Complex64]) -> Self {
        let n = z.len();
        let mut v = vec![0.0; 2 * n];
        for (k, zk) in z.iter().enumerate() {
            v[k] = zk.re;
            v[n + k] = zk.im;
        }
        AmbientVector(v)
    }

    /// Number of complex slots.
    pub fn complex_dim(&self) -> usize {
        self.0.len() / 2
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn component(&self, k: usize) -> Complex64 {
        let n = self.complex_dim();
        Complex64::new(self.0[k], self.0[n + k])
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        (0..self.complex_dim()).map(|k| self.component(k)).collect()
    }

    /// `J(x, y) = (−y, x)`, i.e. multiplication by `i` in every slot.
    pub fn j(&self) -> Self {
        let n = self.complex_dim();
        let mut out = vec![0.0; 2 * n];
        for k in 0..n {
            out[k] = -self.0[n + k];
            out[n + k] = self.0[k];
        }
        AmbientVector(out)
    }

    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.0.len(), other.0.len());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// `⟨J self, other⟩` without materialising `J self`.
    pub fn j_dot(&self, other: &Self) -> f64 {
        let n = self.complex_dim();
        let mut s = 0.0;
        for k in 0..n {
            s += -self.0[n + k] * other.0[k] + self.0[k] * other.0[n + k];
        }
        s
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: f64, other: &Self) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += c * b;
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        AmbientVector(self.0.iter().map(|a| c * a).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, a| m.max(a.abs()))
    }
}

/// The standard symplectic pairing `ω(v, w) = ⟨Jv, w⟩`.
pub fn symplectic_pair(v: &AmbientVector, w: &AmbientVector) -> f64 {
    v.j_dot(w)
}

impl Index<usize> for AmbientVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for AmbientVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for &AmbientVector {
    type Output = AmbientVector;
    fn add(self, rhs: &AmbientVector) -> AmbientVector {
        AmbientVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &AmbientVector {
    type Output = AmbientVector;
    fn sub(self, rhs: &AmbientVector) -> AmbientVector {
        AmbientVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl AddAssign<&AmbientVector> for AmbientVector {
    fn add_assign(&mut self, rhs: &AmbientVector) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&AmbientVector> for AmbientVector {
    fn sub_assign(&mut self, rhs: &AmbientVector) {
        self.axpy(-1.0, rhs);
    }
}

impl Mul<&AmbientVector> for f64 {
    type Output = AmbientVector;
    fn mul(self, rhs: &AmbientVector) -> AmbientVector {
        rhs.scaled(self)
    }
}

impl Neg for &AmbientVector {
    type Output = AmbientVector;
    fn neg(self) -> AmbientVector {
        self.scaled(-1.0)
    }
}
