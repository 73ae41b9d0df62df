//! Dense polynomials in `z`, generic over the coefficient field so the
//! same code runs in `f64` and in exact rationals.

use std::ops::{Add, Mul, Sub};

use num_traits::{FromPrimitive, Num, Signed};

/// `Σ_k c_k z^k`; coefficients stored lowest degree first. The length is
/// part of the value (a generating function of `n` particles always has
/// `n + 1` slots), so trailing zeros are kept.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly<T> {
    coeffs: Vec<T>,
}

pub type GenPoly = Poly<f64>;

impl<T: Clone + Num + FromPrimitive> Poly<T> {
    pub fn from_coeffs(coeffs: Vec<T>) -> Self {
        Self { coeffs }
    }

    pub fn zero(len: usize) -> Self {
        Self { coeffs: vec![T::zero(); len] }
    }

    pub fn constant(c: T) -> Self {
        Self { coeffs: vec![c] }
    }

    /// `c z^k`.
    pub fn monomial(c: T, k: usize) -> Self {
        let mut p = Self::zero(k + 1);
        p.coeffs[k] = c;
        p
    }

    /// `a + b z`.
    pub fn linear(a: T, b: T) -> Self {
        Self { coeffs: vec![a, b] }
    }

    /// `(1 − z)^k`.
    pub fn one_minus_z_pow(k: usize) -> Self {
        Self::linear(T::one(), T::zero() - T::one()).pow(k)
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    /// Number of coefficient slots.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, k: usize) -> T {
        self.coeffs.get(k).cloned().unwrap_or_else(T::zero)
    }

    /// Highest index with a nonzero coefficient (`None` for zero).
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|c| !c.is_zero())
    }

    /// Same polynomial with exactly `len` slots; higher terms must vanish.
    pub fn resized(mut self, len: usize) -> Self {
        debug_assert!(self.coeffs.iter().skip(len).all(|c| c.is_zero()));
        self.coeffs.resize(len, T::zero());
        self
    }

    pub fn eval(&self, z: T) -> T {
        self.coeffs.iter().rev().fold(T::zero(), |acc, c| acc * z.clone() + c.clone())
    }

    pub fn derivative(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c.clone() * T::from_usize(k).unwrap())
            .collect::<Vec<_>>();
        if coeffs.is_empty() {
            Self::zero(1)
        } else {
            Self { coeffs }
        }
    }

    pub fn scale(&self, c: T) -> Self {
        Self { coeffs: self.coeffs.iter().map(|v| v.clone() * c.clone()).collect() }
    }

    pub fn pow(&self, k: usize) -> Self {
        (0..k).fold(Self::constant(T::one()), |acc, _| &acc * self)
    }
}

impl<T: Clone + Num + FromPrimitive + Signed + PartialOrd> Poly<T> {
    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> T {
        self.coeffs
            .iter()
            .map(|c| c.abs())
            .fold(T::zero(), |m, v| if v > m { v } else { m })
    }
}

impl<T: Clone + Num + FromPrimitive> Add for &Poly<T> {
    type Output = Poly<T>;
    fn add(self, rhs: &Poly<T>) -> Poly<T> {
        let len = self.len().max(rhs.len());
        Poly { coeffs: (0..len).map(|k| self.coeff(k) + rhs.coeff(k)).collect() }
    }
}

impl<T: Clone + Num + FromPrimitive> Sub for &Poly<T> {
    type Output = Poly<T>;
    fn sub(self, rhs: &Poly<T>) -> Poly<T> {
        let len = self.len().max(rhs.len());
        Poly { coeffs: (0..len).map(|k| self.coeff(k) - rhs.coeff(k)).collect() }
    }
}

impl<T: Clone + Num + FromPrimitive> Mul for &Poly<T> {
    type Output = Poly<T>;
    fn mul(self, rhs: &Poly<T>) -> Poly<T> {
        if self.is_empty() || rhs.is_empty() {
            return Poly::zero(0);
        }
        let mut out: Poly<T> = Poly::zero(self.len() + rhs.len() - 1);
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out.coeffs[i + j] = out.coeffs[i + j].clone() + a.clone() * b.clone();
            }
        }
        out
    }
}
