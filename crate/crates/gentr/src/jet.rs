//! Truncated Laurent jets in one local variable.
//!
//! A jet stores exact coefficients for every exponent below its truncation
//! order; exponents `>= trunc` are unknown. Every operation computes the
//! tightest provable truncation of its result rather than guessing, so a
//! final window that is too short surfaces as a `Precision` error instead of
//! a silently wrong coefficient.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::error::EngineError;
use crate::num::{qi, Q, Z};

/// Coefficient module: rationals, or spectator tensors over them.
pub trait Coeff: Clone + PartialEq {
    fn zero() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn scale(&self, c: &Q) -> Self;
}

impl Coeff for Q {
    fn zero() -> Self {
        <Q as Zero>::zero()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn neg(&self) -> Self {
        -self.clone()
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, c: &Q) -> Self {
        self * c
    }
}

pub const TRUNC_INF: i64 = i64::MAX / 4;

#[derive(Clone, PartialEq)]
pub struct JetOf<C: Coeff> {
    coeffs: BTreeMap<i64, C>,
    /// exponents >= trunc are unknown
    pub trunc: i64,
}

pub type Jet = JetOf<Q>;

impl<C: Coeff> JetOf<C> {
    pub fn zero(trunc: i64) -> Self {
        JetOf {
            coeffs: BTreeMap::new(),
            trunc,
        }
    }

    pub fn monomial(exp: i64, c: C, trunc: i64) -> Self {
        let mut j = JetOf::zero(trunc);
        j.set(exp, c);
        j
    }

    pub fn set(&mut self, exp: i64, c: C) {
        if exp >= self.trunc {
            return;
        }
        if c.is_zero() {
            self.coeffs.remove(&exp);
        } else {
            self.coeffs.insert(exp, c);
        }
    }

    pub fn add_term(&mut self, exp: i64, c: C) {
        if exp >= self.trunc || c.is_zero() {
            return;
        }
        let cur = match self.coeffs.remove(&exp) {
            Some(v) => v.add(&c),
            None => c,
        };
        self.set(exp, cur);
    }

    pub fn coeff(&self, exp: i64) -> C {
        self.coeffs.get(&exp).cloned().unwrap_or_else(C::zero)
    }

    pub fn get(&self, exp: i64) -> Option<&C> {
        self.coeffs.get(&exp)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Exact valuation of the stored window (`None` when no terms survive).
    pub fn valuation(&self) -> Option<i64> {
        self.coeffs.keys().next().copied()
    }

    /// Lower bound for the valuation usable in truncation bookkeeping: the
    /// actual valuation, or `trunc` for a window that is identically zero.
    pub fn val_bound(&self) -> i64 {
        self.valuation().unwrap_or(self.trunc)
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &C)> {
        self.coeffs.iter().map(|(e, c)| (*e, c))
    }

    pub fn truncate(&self, trunc: i64) -> Self {
        let mut out = JetOf::zero(self.trunc.min(trunc));
        for (e, c) in &self.coeffs {
            out.set(*e, c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        let mut out = JetOf::zero(self.trunc);
        for (e, c) in &self.coeffs {
            out.set(*e, c.neg());
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = JetOf::zero(self.trunc.min(other.trunc));
        for (e, c) in &self.coeffs {
            out.add_term(*e, c.clone());
        }
        for (e, c) in &other.coeffs {
            out.add_term(*e, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Q) -> Self {
        let mut out = JetOf::zero(self.trunc);
        for (e, v) in &self.coeffs {
            out.set(*e, v.scale(c));
        }
        out
    }

    /// Multiply by the monomial t^k (shifts exponents and the window).
    pub fn shift(&self, k: i64) -> Self {
        let mut out = JetOf::zero(self.trunc.saturating_add(k).min(TRUNC_INF));
        for (e, c) in &self.coeffs {
            out.set(e + k, c.clone());
        }
        out
    }

    /// Product with provable truncation
    /// `min(a.trunc + val(b), b.trunc + val(a))`.
    pub fn mul(&self, other: &Self) -> Self {
        let t = (self.trunc.saturating_add(other.val_bound()))
            .min(other.trunc.saturating_add(self.val_bound()))
            .min(TRUNC_INF);
        let mut out = JetOf::zero(t);
        for (e1, c1) in &self.coeffs {
            for (e2, c2) in &other.coeffs {
                if e1 + e2 >= t {
                    break;
                }
                out.add_term(e1 + e2, c1.mul(c2));
            }
        }
        out
    }

    /// Termwise d/dt. Exponent 0 drops, so the result never has a t^{-1}
    /// term; the window tightens by one.
    pub fn derivative(&self) -> Self {
        let mut out = JetOf::zero(self.trunc - 1);
        for (e, c) in &self.coeffs {
            if *e != 0 {
                out.set(e - 1, c.scale(&qi(*e)));
            }
        }
        out
    }

    /// Termwise primitive with zero constant; requires no t^{-1} term.
    pub fn primitive(&self) -> Result<Self, EngineError> {
        if self.coeffs.contains_key(&-1) {
            return Err(EngineError::Valuation(
                "primitive of a jet with residue".into(),
            ));
        }
        let mut out = JetOf::zero(self.trunc.saturating_add(1).min(TRUNC_INF));
        for (e, c) in &self.coeffs {
            out.set(e + 1, c.scale(&qi(e + 1).recip()));
        }
        Ok(out)
    }

    pub fn map<D: Coeff>(&self, f: impl Fn(&C) -> D) -> JetOf<D> {
        let mut out = JetOf::zero(self.trunc);
        for (e, c) in &self.coeffs {
            out.set(*e, f(c));
        }
        out
    }
}

impl Jet {
    pub fn one(trunc: i64) -> Jet {
        Jet::monomial(0, Q::one(), trunc)
    }

    pub fn from_coeffs(lo: i64, cs: &[Q], trunc: i64) -> Jet {
        let mut j = Jet::zero(trunc);
        for (k, c) in cs.iter().enumerate() {
            j.set(lo + k as i64, c.clone());
        }
        j
    }

    /// Multiplicative inverse; the leading stored coefficient must be the
    /// true leading term (exact by construction) and nonzero.
    pub fn invert(&self) -> Result<Jet, EngineError> {
        let v = self
            .valuation()
            .ok_or_else(|| EngineError::DivisionByZero)?;
        let lead = self.coeff(v);
        // normalize to a unit series u = 1 + ...
        let width = self.trunc - v;
        let mut unit = Jet::zero(width);
        for (e, c) in &self.coeffs {
            unit.set(e - v, c / &lead);
        }
        let mut inv = Jet::zero(width);
        inv.set(0, Q::one());
        for k in 1..width {
            let mut acc = <Q as Zero>::zero();
            for (e, c) in unit.coeffs.range(1..=k) {
                let other = inv.coeff(k - e);
                if !Zero::is_zero(&other) {
                    acc += c * other;
                }
            }
            inv.set(k, -acc);
        }
        let mut out = Jet::zero(width - v);
        for (e, c) in &inv.coeffs {
            out.set(e - v, c / &lead);
        }
        Ok(out)
    }

    pub fn div(&self, other: &Jet) -> Result<Jet, EngineError> {
        Ok(self.mul(&other.invert()?))
    }

    /// Composition `outer(inner)`; `inner` must have strictly positive
    /// valuation. Negative exponents of `outer` go through the inverse of
    /// `inner`.
    pub fn compose(&self, inner: &Jet) -> Result<Jet, EngineError> {
        let iv = inner.val_bound();
        if iv <= 0 {
            return Err(EngineError::Valuation(format!(
                "composition requires positive inner valuation, got {iv}"
            )));
        }
        // provable output order: outer tail contributes from trunc_o * iv;
        // inner tail at exponent e contributes from inner.trunc + (e-1)*iv.
        let mut t = self.trunc.saturating_mul(iv);
        for (e, _) in self.terms() {
            t = t.min(inner.trunc.saturating_add((e - 1).saturating_mul(iv)));
        }
        t = t.min(TRUNC_INF);
        let t = t.max(0);
        let mut out = Jet::zero(t);
        // positive part by Horner over descending exponents
        let pos: Vec<(i64, Q)> = self
            .coeffs
            .range(0..)
            .map(|(e, c)| (*e, c.clone()))
            .collect();
        if !pos.is_empty() {
            let mut acc = Jet::zero(t);
            let mut prev_exp = pos.last().unwrap().0;
            for (e, c) in pos.iter().rev() {
                if *e != prev_exp {
                    for _ in 0..(prev_exp - e) {
                        acc = acc.mul(inner);
                        acc = acc.truncate(t);
                    }
                    prev_exp = *e;
                }
                acc.add_term(0, c.clone());
            }
            for _ in 0..prev_exp {
                acc = acc.mul(inner).truncate(t);
            }
            out = out.add(&acc);
        }
        // negative part via powers of inner^{-1}
        let negs: Vec<(i64, Q)> = self
            .coeffs
            .range(..0)
            .map(|(e, c)| (*e, c.clone()))
            .collect();
        if !negs.is_empty() {
            let inv = inner.invert()?;
            let mut pow = Jet::one(TRUNC_INF);
            let mut cur = 0i64;
            for (e, c) in negs.iter().rev() {
                while cur > *e {
                    pow = pow.mul(&inv);
                    cur -= 1;
                }
                out = out.add(&pow.scale(c).truncate(t));
            }
        }
        Ok(out.truncate(t))
    }

    /// Functional inverse of a valuation-1 jet: returns `b` with
    /// `self(b(t)) = t` to the provable order.
    pub fn reverse(&self) -> Result<Jet, EngineError> {
        if self.valuation() != Some(1) {
            return Err(EngineError::Valuation(
                "series reversion needs valuation exactly 1".into(),
            ));
        }
        let order = self.trunc;
        let a1 = self.coeff(1);
        // order-by-order solve of a(b(t)) = t on an exact polynomial
        // candidate; the provable window of the result is `order`.
        let mut b = Jet::monomial(1, a1.recip(), TRUNC_INF);
        for nt in 2..order {
            let comp = self.truncate(nt + 1).compose(&b)?;
            // comp = t + err * t^{nt} + O(t^{nt+1})
            let err = comp.coeff(nt);
            b.set(nt, -err / a1.clone());
        }
        Ok(b.truncate(order))
    }

    /// exp of a jet with strictly positive valuation.
    pub fn exp(&self) -> Result<Jet, EngineError> {
        if self.val_bound() <= 0 && !self.is_zero() {
            return Err(EngineError::Valuation(
                "exp needs strictly positive valuation".into(),
            ));
        }
        let t = self.trunc;
        let v = self.val_bound().max(1);
        let mut out = Jet::one(t);
        let mut pow = Jet::one(t);
        let mut k = 0u64;
        loop {
            k += 1;
            if v.saturating_mul(k as i64) >= t {
                break;
            }
            pow = pow.mul(self).truncate(t);
            if pow.is_zero() {
                break;
            }
            out = out.add(&pow.scale(&crate::num::factorial(k).recip()));
        }
        Ok(out)
    }

    /// `n`-th root of a unit jet (valuation 0, leading coefficient 1).
    pub fn root_of_unit(&self, n: u32) -> Result<Jet, EngineError> {
        if self.valuation() != Some(0) || !self.coeff(0).is_one() {
            return Err(EngineError::Valuation(
                "root_of_unit needs a series 1 + O(t)".into(),
            ));
        }
        // binomial series on (1 + w)^{1/n}
        let w = self.sub(&Jet::one(self.trunc));
        let t = self.trunc;
        let mut out = Jet::one(t);
        let mut pow = Jet::one(t);
        let mut coef = Q::one();
        let alpha = Q::new(Z::one(), Z::from(n));
        let mut k = 0i64;
        loop {
            k += 1;
            if w.val_bound().saturating_mul(k) >= t || w.is_zero() {
                break;
            }
            coef = coef * (alpha.clone() - qi(k - 1)) / qi(k);
            pow = pow.mul(&w).truncate(t);
            if pow.is_zero() {
                break;
            }
            out = out.add(&pow.scale(&coef));
        }
        Ok(out)
    }

    pub fn pow_i(&self, n: i64) -> Result<Jet, EngineError> {
        if n < 0 {
            return self.invert()?.pow_i(-n);
        }
        let mut acc = Jet::one(TRUNC_INF);
        for _ in 0..n {
            acc = acc.mul(self);
        }
        Ok(acc)
    }
}

impl<C: Coeff> std::fmt::Debug for JetOf<C>
where
    C: std::fmt::Debug,
{
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Jet[")?;
        for (e, c) in &self.coeffs {
            write!(f, " {:?}*t^{}", c, e)?;
        }
        write!(f, " + O(t^{})]", self.trunc)
    }
}

/// Convenience: exact jet of a polynomial at `z = a + t`.
pub fn poly_jet_at(p: &crate::poly::Poly, a: &Q, trunc: i64) -> Jet {
    let shifted = p.shift(a);
    let mut j = Jet::zero(trunc);
    for (e, c) in shifted.terms() {
        j.set(e as i64, c.clone());
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{qi, qr};

    #[test]
    fn compose_examples() {
        // outer = w + w^2, inner = 2t -> 2t + 4t^2
        let outer = Jet::from_coeffs(1, &[qi(1), qi(1)], 3);
        let inner = Jet::monomial(1, qi(2), 10);
        let got = outer.compose(&inner).unwrap();
        assert_eq!(got.coeff(1), qi(2));
        assert_eq!(got.coeff(2), qi(4));

        // identity outer
        let outer = Jet::monomial(1, qi(1), 8);
        let inner = Jet::from_coeffs(1, &[qi(3), qi(-1), qi(5)], 4);
        let got = outer.compose(&inner).unwrap();
        assert_eq!(got.coeff(1), qi(3));
        assert_eq!(got.coeff(3), qi(5));

        // geometric: outer = 1/(1-w) to order 3, inner = t -> 1 + t + t^2
        let outer = Jet::from_coeffs(0, &[qi(1), qi(1), qi(1)], 3);
        let inner = Jet::monomial(1, qi(1), 10);
        let got = outer.compose(&inner).unwrap();
        for e in 0..3 {
            assert_eq!(got.coeff(e), qi(1), "exp {e}");
        }
    }

    #[test]
    fn reverse_examples() {
        // a = 2t -> t/2
        let a = Jet::monomial(1, qi(2), 6);
        assert_eq!(a.reverse().unwrap().coeff(1), qr(1, 2));

        // a = t + t^2 -> t - t^2 + 2t^3 (Lagrange inversion oracle)
        let a = Jet::from_coeffs(1, &[qi(1), qi(1)], 5);
        let b = a.reverse().unwrap();
        assert_eq!(b.coeff(1), qi(1));
        assert_eq!(b.coeff(2), qi(-1));
        assert_eq!(b.coeff(3), qi(2));
        // and a(b(t)) = t to order
        let comp = a.compose(&b).unwrap();
        assert_eq!(comp.coeff(1), qi(1));
        assert_eq!(comp.coeff(2), qi(0));
        assert_eq!(comp.coeff(3), qi(0));

        // identity
        let a = Jet::monomial(1, qi(1), 9);
        assert_eq!(a.reverse().unwrap().coeff(1), qi(1));
    }

    #[test]
    fn exp_examples() {
        // exp(0) = 1
        let z = Jet::zero(5);
        assert_eq!(z.exp().unwrap().coeff(0), qi(1));
        // exp(ct) to t^2: 1 + ct + c^2 t^2 / 2
        let a = Jet::monomial(1, qi(3), 3);
        let e = a.exp().unwrap();
        assert_eq!(e.coeff(0), qi(1));
        assert_eq!(e.coeff(1), qi(3));
        assert_eq!(e.coeff(2), qr(9, 2));
        // nonpositive valuation rejected
        let bad = Jet::monomial(0, qi(1), 4);
        assert!(bad.exp().is_err());
    }

    #[test]
    fn invert_laurent() {
        // 1/(t^{-1} + 1) = t - t^2 + t^3 - ...
        let a = Jet::from_coeffs(-1, &[qi(1), qi(1)], 4);
        let inv = a.invert().unwrap();
        assert_eq!(inv.coeff(1), qi(1));
        assert_eq!(inv.coeff(2), qi(-1));
        assert_eq!(inv.coeff(3), qi(1));
        // window: a known to t^4 exclusive, val -1 => inv known to width 5 - val...
        assert!(inv.trunc >= 4);
    }

    #[test]
    fn truncation_is_provable_under_mul() {
        let a = Jet::from_coeffs(2, &[qi(1)], 5); // t^2 + O(t^5)
        let b = Jet::from_coeffs(-1, &[qi(1)], 2); // t^{-1} + O(t^2)
        let p = a.mul(&b);
        // t^2 * O(t^2) = O(t^4); O(t^5) * t^{-1} = O(t^4)
        assert_eq!(p.trunc, 4);
        assert_eq!(p.coeff(1), qi(1));
    }

    #[test]
    fn root_of_unit_squares_back() {
        let u = Jet::from_coeffs(0, &[qi(1), qi(4), qi(-2), qr(1, 3)], 4);
        let r = u.root_of_unit(2).unwrap();
        let sq = r.mul(&r);
        for e in 0..4 {
            assert_eq!(sq.coeff(e), u.coeff(e), "exp {e}");
        }
    }
}
