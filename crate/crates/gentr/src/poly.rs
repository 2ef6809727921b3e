//! Univariate polynomials over the rationals, sparse by exponent.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};

use crate::num::{divisors, Q, Z};

#[derive(Clone, PartialEq, Eq)]
pub struct Poly {
    /// exponent -> coefficient; no zero coefficients stored
    coeffs: BTreeMap<u32, Q>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly {
            coeffs: BTreeMap::new(),
        }
    }

    pub fn one() -> Self {
        Poly::constant(Q::one())
    }

    pub fn constant(c: Q) -> Self {
        let mut p = Poly::zero();
        p.set(0, c);
        p
    }

    /// The variable `z`.
    pub fn var() -> Self {
        Poly::monomial(1, Q::one())
    }

    pub fn monomial(exp: u32, c: Q) -> Self {
        let mut p = Poly::zero();
        p.set(exp, c);
        p
    }

    pub fn from_coeffs(cs: &[(u32, Q)]) -> Self {
        let mut p = Poly::zero();
        for (e, c) in cs {
            p.add_term(*e, c.clone());
        }
        p
    }

    pub fn set(&mut self, exp: u32, c: Q) {
        if c.is_zero() {
            self.coeffs.remove(&exp);
        } else {
            self.coeffs.insert(exp, c);
        }
    }

    pub fn add_term(&mut self, exp: u32, c: Q) {
        if c.is_zero() {
            return;
        }
        let cur = self.coeffs.remove(&exp).unwrap_or_else(Q::zero) + c;
        self.set(exp, cur);
    }

    pub fn coeff(&self, exp: u32) -> Q {
        self.coeffs.get(&exp).cloned().unwrap_or_else(Q::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<u32> {
        self.coeffs.keys().next_back().copied()
    }

    pub fn valuation(&self) -> Option<u32> {
        self.coeffs.keys().next().copied()
    }

    pub fn leading(&self) -> Q {
        self.degree().map(|d| self.coeff(d)).unwrap_or_else(Q::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, &Q)> {
        self.coeffs.iter().map(|(e, c)| (*e, c))
    }

    pub fn neg(&self) -> Poly {
        let mut out = Poly::zero();
        for (e, c) in &self.coeffs {
            out.set(*e, -c.clone());
        }
        out
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.coeffs {
            out.add_term(*e, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (e1, c1) in &self.coeffs {
            for (e2, c2) in &other.coeffs {
                out.add_term(e1 + e2, c1 * c2);
            }
        }
        out
    }

    pub fn scale(&self, c: &Q) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        let mut out = Poly::zero();
        for (e, v) in &self.coeffs {
            out.set(*e, v * c);
        }
        out
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut acc = Poly::one();
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn derivative(&self) -> Poly {
        let mut out = Poly::zero();
        for (e, c) in &self.coeffs {
            if *e > 0 {
                out.set(e - 1, c * Q::from_integer(Z::from(*e)));
            }
        }
        out
    }

    /// Quotient and remainder of exact rational division.
    pub fn div_rem(&self, d: &Poly) -> (Poly, Poly) {
        assert!(!d.is_zero(), "division by zero polynomial");
        let dd = d.degree().unwrap();
        let dl = d.leading();
        let mut rem = self.clone();
        let mut quot = Poly::zero();
        while let Some(rd) = rem.degree() {
            if rd < dd {
                break;
            }
            let c = rem.leading() / dl.clone();
            let e = rd - dd;
            quot.add_term(e, c.clone());
            for (de, dc) in &d.coeffs {
                rem.add_term(de + e, -(dc * &c));
            }
        }
        (quot, rem)
    }

    pub fn divides_exactly(&self, d: &Poly) -> Option<Poly> {
        let (q, r) = self.div_rem(d);
        r.is_zero().then_some(q)
    }

    /// Monic gcd.
    pub fn gcd(&self, other: &Poly) -> Poly {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r;
        }
        if a.is_zero() {
            a
        } else {
            a.monic()
        }
    }

    pub fn monic(&self) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        self.scale(&self.leading().recip())
    }

    pub fn eval(&self, x: &Q) -> Q {
        let mut acc = Q::zero();
        // Horner over the dense span is wasteful for sparse data; power directly.
        for (e, c) in &self.coeffs {
            let mut p = Q::one();
            for _ in 0..*e {
                p *= x;
            }
            acc += c * p;
        }
        acc
    }

    /// Substitute `z -> z + a` (shift of coordinate).
    pub fn shift(&self, a: &Q) -> Poly {
        let mut out = Poly::zero();
        let base = Poly::from_coeffs(&[(0, a.clone()), (1, Q::one())]);
        for (e, c) in &self.coeffs {
            out = out.add(&base.pow(*e).scale(c));
        }
        out
    }

    /// Coefficients reversed: `z^d * p(1/z)` for d = deg p.
    pub fn reversed(&self) -> Poly {
        let Some(d) = self.degree() else {
            return Poly::zero();
        };
        let mut out = Poly::zero();
        for (e, c) in &self.coeffs {
            out.set(d - e, c.clone());
        }
        out
    }

    /// Multiplicity of `root` as a zero of `self`.
    pub fn root_multiplicity(&self, root: &Q) -> u32 {
        let lin = Poly::from_coeffs(&[(0, -root.clone()), (1, Q::one())]);
        let mut m = 0;
        let mut cur = self.clone();
        while let Some(q) = cur.divides_exactly(&lin) {
            m += 1;
            cur = q;
            if cur.is_zero() {
                break;
            }
        }
        m
    }

    /// Clear denominators and content: primitive integer version of self.
    fn primitive_int(&self) -> Vec<(u32, Z)> {
        use num_integer::Integer;
        let mut lcm = Z::one();
        for (_, c) in &self.coeffs {
            lcm = lcm.lcm(c.denom());
        }
        let mut ints: Vec<(u32, Z)> = self
            .coeffs
            .iter()
            .map(|(e, c)| (*e, c.numer() * (&lcm / c.denom())))
            .collect();
        let mut content = Z::zero();
        for (_, c) in &ints {
            content = content.gcd(c);
        }
        if !content.is_zero() && !content.is_one() {
            for (_, c) in &mut ints {
                *c /= &content;
            }
        }
        ints
    }

    /// All rational roots with multiplicities, plus the degree of the
    /// residual factor having no rational root (0 when the polynomial splits
    /// over Q up to its rational part).
    pub fn rational_roots(&self) -> RootReport {
        assert!(!self.is_zero(), "rational_roots of zero polynomial");
        let mut roots: Vec<(Q, u32)> = Vec::new();
        let mut cur = self.clone();
        // factor out z^v first
        if let Some(v) = cur.valuation() {
            if v > 0 {
                let mut shifted = Poly::zero();
                for (e, c) in &cur.coeffs {
                    shifted.set(e - v, c.clone());
                }
                cur = shifted;
                roots.push((Q::zero(), v));
            }
        }
        if cur.degree() == Some(0) || cur.degree().is_none() {
            return RootReport {
                roots,
                residual: cur,
            };
        }
        let ints = cur.primitive_int();
        let a0 = ints.iter().find(|(e, _)| *e == 0).map(|(_, c)| c.clone());
        let alead = ints.last().map(|(_, c)| c.clone()).unwrap();
        let a0 = a0.expect("constant term nonzero after valuation strip");
        let mut candidates: Vec<Q> = Vec::new();
        for p in divisors(&a0) {
            for q in divisors(&alead) {
                let r = Q::new(p.clone(), q.clone());
                candidates.push(r.clone());
                candidates.push(-r);
            }
        }
        candidates.sort();
        candidates.dedup();
        for cand in candidates {
            let m = cur.root_multiplicity(&cand);
            if m > 0 {
                let lin = Poly::from_coeffs(&[(0, -cand.clone()), (1, Q::one())]);
                for _ in 0..m {
                    cur = cur.divides_exactly(&lin).unwrap();
                }
                roots.push((cand, m));
            }
        }
        roots.sort_by(|a, b| a.0.cmp(&b.0));
        RootReport {
            roots,
            residual: cur,
        }
    }

    /// Squarefree part (product of distinct irreducible factors).
    pub fn squarefree_part(&self) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let g = self.gcd(&self.derivative());
        if g.degree().unwrap_or(0) == 0 {
            return self.monic();
        }
        self.divides_exactly(&g).unwrap().monic()
    }

    /// Squarefree decomposition: list of (factor, multiplicity) with factors
    /// squarefree, pairwise coprime, multiplicities ascending.
    pub fn squarefree_decomposition(&self) -> Vec<(Poly, u32)> {
        // Yun's algorithm
        if self.is_zero() || self.degree() == Some(0) {
            return Vec::new();
        }
        let f = self.monic();
        let fp = f.derivative();
        let mut a = f.gcd(&fp);
        let mut b = f.divides_exactly(&a).unwrap();
        let mut c = fp.divides_exactly(&a).unwrap();
        let mut d = c.sub(&b.derivative());
        let mut out = Vec::new();
        let mut i = 1u32;
        loop {
            a = b.gcd(&d);
            if a.degree().unwrap_or(0) > 0 {
                out.push((a.clone(), i));
            }
            b = b.divides_exactly(&a).unwrap();
            if b.degree().unwrap_or(0) == 0 {
                break;
            }
            c = d.divides_exactly(&a).unwrap();
            d = c.sub(&b.derivative());
            i += 1;
        }
        out
    }
}

pub struct RootReport {
    pub roots: Vec<(Q, u32)>,
    /// monic factor with no rational roots (constant when none remains)
    pub residual: Poly,
}

impl RootReport {
    pub fn residual_degree(&self) -> u32 {
        self.residual.degree().unwrap_or(0)
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.coeffs.iter().rev() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match e {
                0 => write!(f, "({})", c)?,
                1 => write!(f, "({})z", c)?,
                _ => write!(f, "({})z^{}", c, e)?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{qi, qr};

    fn zpoly(cs: &[i64]) -> Poly {
        Poly::from_coeffs(
            &cs.iter()
                .enumerate()
                .map(|(e, &c)| (e as u32, qi(c)))
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn rational_roots_examples() {
        // z^2 - 1 -> {(1,1),(-1,1)}, no residual
        let r = zpoly(&[-1, 0, 1]).rational_roots();
        assert_eq!(r.roots, vec![(qi(-1), 1), (qi(1), 1)]);
        assert_eq!(r.residual_degree(), 0);

        // z^2 - 2 -> {}, residual degree 2
        let r = zpoly(&[-2, 0, 1]).rational_roots();
        assert!(r.roots.is_empty());
        assert_eq!(r.residual_degree(), 2);

        // z^3 -> {(0,3)}, no residual
        let r = zpoly(&[0, 0, 0, 1]).rational_roots();
        assert_eq!(r.roots, vec![(qi(0), 3)]);
        assert_eq!(r.residual_degree(), 0);

        // (2z-1)^2 (z+3)
        let p = zpoly(&[-1, 2]).pow(2).mul(&zpoly(&[3, 1]));
        let r = p.rational_roots();
        assert_eq!(r.roots, vec![(qi(-3), 1), (qr(1, 2), 2)]);
        assert_eq!(r.residual_degree(), 0);
    }

    #[test]
    fn squarefree_decomposition_yun() {
        let p = zpoly(&[-1, 1]).pow(2).mul(&zpoly(&[1, 1]).pow(3));
        let d = p.squarefree_decomposition();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0], (zpoly(&[-1, 1]), 2));
        assert_eq!(d[1], (zpoly(&[1, 1]), 3));
    }

    #[test]
    fn div_rem_exact() {
        let p = zpoly(&[-1, 0, 1]); // z^2-1
        let d = zpoly(&[-1, 1]); // z-1
        let (q, r) = p.div_rem(&d);
        assert!(r.is_zero());
        assert_eq!(q, zpoly(&[1, 1]));
    }
}
