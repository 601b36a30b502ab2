//! Minimal field abstraction so that each closed-form expression is
//! transcribed once and evaluated with f64, first-order jets, exact
//! rationals, or truncated power series alike.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub trait Scalar: Clone {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_int(n: i64) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;

    fn neg(&self) -> Self {
        Self::zero().sub(self)
    }

    fn powi(&self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_int(n: i64) -> Self {
        n as f64
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
}

impl Scalar for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_int(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
}

/// First-order jet: value and d/dx, for forward-mode derivatives through
/// an expression tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d: f64,
}

impl Jet {
    pub fn variable(v: f64) -> Self {
        Jet { v, d: 1.0 }
    }
    pub fn constant(v: f64) -> Self {
        Jet { v, d: 0.0 }
    }
}

impl Scalar for Jet {
    fn zero() -> Self {
        Jet::constant(0.0)
    }
    fn one() -> Self {
        Jet::constant(1.0)
    }
    fn from_int(n: i64) -> Self {
        Jet::constant(n as f64)
    }
    fn add(&self, o: &Self) -> Self {
        Jet {
            v: self.v + o.v,
            d: self.d + o.d,
        }
    }
    fn sub(&self, o: &Self) -> Self {
        Jet {
            v: self.v - o.v,
            d: self.d - o.d,
        }
    }
    fn mul(&self, o: &Self) -> Self {
        Jet {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
        }
    }
    fn div(&self, o: &Self) -> Self {
        let v = self.v / o.v;
        Jet {
            v,
            d: (self.d - v * o.d) / o.v,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_quotient_rule() {
        // f(x) = x^2 / (1 + x) at x = 2: f = 4/3, f' = (2x(1+x) - x^2)/(1+x)^2 = 8/9
        let x = Jet::variable(2.0);
        let f = x.mul(&x).div(&Jet::constant(1.0).add(&x));
        assert!((f.v - 4.0 / 3.0).abs() < 1e-14);
        assert!((f.d - 8.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn rational_pow() {
        let h = BigRational::new(BigInt::from(1), BigInt::from(2));
        assert_eq!(h.powi(3), BigRational::new(BigInt::from(1), BigInt::from(8)));
    }
}
