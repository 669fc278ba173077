//! Forward-mode dual numbers over the complex field.
//!
//! A [`Dual`] carries a value and its derivative with respect to a single
//! real seed variable. Derivatives are exact up to rounding, which makes the
//! type suitable as an oracle for finite-difference code.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub value: Complex64,
    pub deriv: Complex64,
}

impl Dual {
    pub fn constant(value: Complex64) -> Self {
        Self {
            value,
            deriv: Complex64::new(0.0, 0.0),
        }
    }

    pub fn real(value: f64) -> Self {
        Self::constant(Complex64::new(value, 0.0))
    }

    /// A real independent variable with unit seed.
    pub fn variable(value: f64) -> Self {
        Self {
            value: Complex64::new(value, 0.0),
            deriv: Complex64::new(1.0, 0.0),
        }
    }

    pub fn i() -> Self {
        Self::constant(Complex64::i())
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        Self {
            value: e,
            deriv: e * self.deriv,
        }
    }

    /// Complex conjugate of value and derivative (valid for real seeds).
    pub fn conj(self) -> Self {
        Self {
            value: self.value.conj(),
            deriv: self.deriv.conj(),
        }
    }

    pub fn scale(self, s: f64) -> Self {
        Self {
            value: self.value * s,
            deriv: self.deriv * s,
        }
    }
}

impl From<f64> for Dual {
    fn from(v: f64) -> Self {
        Dual::real(v)
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual {
            value: self.value + o.value,
            deriv: self.deriv + o.deriv,
        }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual {
            value: self.value - o.value,
            deriv: self.deriv - o.deriv,
        }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual {
            value: self.value * o.value,
            deriv: self.deriv * o.value + self.value * o.deriv,
        }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let v = self.value / o.value;
        Dual {
            value: v,
            deriv: (self.deriv - v * o.deriv) / o.value,
        }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual {
            value: -self.value,
            deriv: -self.deriv,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_quotient_rules() {
        let x = Dual::variable(2.0);
        let f = x * x * x;
        assert_eq!(f.value.re, 8.0);
        assert_eq!(f.deriv.re, 12.0);
        let g = Dual::real(1.0) / x;
        assert_eq!(g.deriv.re, -0.25);
    }

    #[test]
    fn exp_of_imaginary_argument() {
        let t = Dual::variable(0.3);
        let e = (Dual::i() * t).exp();
        assert!((e.deriv - Complex64::i() * e.value).norm() < 1e-15);
        let c = e.conj();
        assert!((c.value * e.value - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }
}
