//! Rational functions of `z` over the rationals, normalized with a monic
//! denominator coprime to the numerator.

use std::fmt;

use num_traits::{One, Zero};

use crate::error::EngineError;
use crate::num::Q;
use crate::poly::Poly;

#[derive(Clone, PartialEq, Eq)]
pub struct RatFun {
    num: Poly,
    den: Poly,
}

impl RatFun {
    pub fn new(num: Poly, den: Poly) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        let mut rf = RatFun { num, den };
        rf.normalize();
        rf
    }

    pub fn zero() -> Self {
        RatFun {
            num: Poly::zero(),
            den: Poly::one(),
        }
    }

    pub fn one() -> Self {
        RatFun {
            num: Poly::one(),
            den: Poly::one(),
        }
    }

    pub fn constant(c: Q) -> Self {
        RatFun {
            num: Poly::constant(c),
            den: Poly::one(),
        }
    }

    pub fn var() -> Self {
        RatFun {
            num: Poly::var(),
            den: Poly::one(),
        }
    }

    pub fn from_poly(p: Poly) -> Self {
        RatFun {
            num: p,
            den: Poly::one(),
        }
    }

    fn normalize(&mut self) {
        if self.num.is_zero() {
            self.den = Poly::one();
            return;
        }
        let g = self.num.gcd(&self.den);
        if g.degree().unwrap_or(0) > 0 {
            self.num = self.num.divides_exactly(&g).unwrap();
            self.den = self.den.divides_exactly(&g).unwrap();
        }
        let lead = self.den.leading();
        if !lead.is_one() {
            let inv = lead.recip();
            self.num = self.num.scale(&inv);
            self.den = self.den.scale(&inv);
        }
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn denominator(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn add(&self, other: &RatFun) -> RatFun {
        RatFun::new(
            self.num.mul(&other.den).add(&other.num.mul(&self.den)),
            self.den.mul(&other.den),
        )
    }

    pub fn sub(&self, other: &RatFun) -> RatFun {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> RatFun {
        RatFun {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, other: &RatFun) -> RatFun {
        RatFun::new(self.num.mul(&other.num), self.den.mul(&other.den))
    }

    pub fn scale(&self, c: &Q) -> RatFun {
        RatFun {
            num: self.num.scale(c),
            den: self.den.clone(),
        }
    }

    pub fn div(&self, other: &RatFun) -> Result<RatFun, EngineError> {
        if other.is_zero() {
            return Err(EngineError::DivisionByZero);
        }
        Ok(RatFun::new(
            self.num.mul(&other.den),
            self.den.mul(&other.num),
        ))
    }

    pub fn recip(&self) -> Result<RatFun, EngineError> {
        RatFun::one().div(self)
    }

    pub fn derivative(&self) -> RatFun {
        // (n/d)' = (n'd - nd')/d^2
        RatFun::new(
            self.num
                .derivative()
                .mul(&self.den)
                .sub(&self.num.mul(&self.den.derivative())),
            self.den.mul(&self.den),
        )
    }

    pub fn pow(&self, n: i32) -> Result<RatFun, EngineError> {
        if n >= 0 {
            Ok(RatFun::new(self.num.pow(n as u32), self.den.pow(n as u32)))
        } else {
            self.recip()?.pow(-n)
        }
    }

    /// Exact evaluation; `None` at a pole.
    pub fn eval(&self, x: &Q) -> Option<Q> {
        let d = self.den.eval(x);
        if d.is_zero() {
            return None;
        }
        Some(self.num.eval(x) / d)
    }

    /// Order of vanishing at a finite rational point (negative at a pole).
    pub fn order_at(&self, x: &Q) -> i64 {
        assert!(!self.is_zero());
        self.num.root_multiplicity(x) as i64 - self.den.root_multiplicity(x) as i64
    }

    /// Order of vanishing at infinity of the function (deg den - deg num).
    pub fn order_at_infinity(&self) -> i64 {
        assert!(!self.is_zero());
        self.den.degree().unwrap_or(0) as i64 - self.num.degree().unwrap_or(0) as i64
    }

    /// Substitute `z -> 1/w`, returning a rational function of `w`.
    pub fn subst_inv(&self) -> RatFun {
        let dn = self.num.degree().unwrap_or(0);
        let dd = self.den.degree().unwrap_or(0);
        let m = dn.max(dd);
        // multiply num and den by z^m: coefficient of z^e goes to w^{m-e}
        let pad = |p: &Poly| -> Poly {
            let mut rev = Poly::zero();
            for (e, c) in p.terms() {
                rev.set(m - e, c.clone());
            }
            rev
        };
        if self.num.is_zero() {
            return RatFun::zero();
        }
        RatFun::new(pad(&self.num), pad(&self.den))
    }
}

impl fmt::Debug for RatFun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == Poly::one() {
            write!(f, "{:?}", self.num)
        } else {
            write!(f, "[{:?}] / [{:?}]", self.num, self.den)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::qi;

    fn zpoly(cs: &[i64]) -> Poly {
        Poly::from_coeffs(
            &cs.iter()
                .enumerate()
                .map(|(e, &c)| (e as u32, qi(c)))
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn cancellation() {
        // (z^2-1)/(z-1) div (z+1) = 1
        let f = RatFun::new(zpoly(&[-1, 0, 1]), zpoly(&[-1, 1]));
        let g = RatFun::from_poly(zpoly(&[1, 1]));
        assert_eq!(f.div(&g).unwrap(), RatFun::one());
    }

    #[test]
    fn identities() {
        let f = RatFun::new(zpoly(&[1, 2, 3]), zpoly(&[5, 0, 1]));
        assert_eq!(f.add(&RatFun::zero()), f);
        // (1/z) * z = 1
        let invz = RatFun::new(Poly::one(), Poly::var());
        let z = RatFun::var();
        assert_eq!(invz.mul(&z), RatFun::one());
    }

    #[test]
    fn inversion_substitution() {
        // f = z^2 -> f(1/w) = 1/w^2
        let f = RatFun::from_poly(zpoly(&[0, 0, 1]));
        let g = f.subst_inv();
        assert_eq!(g, RatFun::new(Poly::one(), zpoly(&[0, 0, 1])));
    }

    #[test]
    fn division_by_zero() {
        let f = RatFun::one();
        assert!(f.div(&RatFun::zero()).is_err());
    }
}
