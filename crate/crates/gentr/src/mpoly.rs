//! Sparse multivariate Laurent polynomials over Q, and gcd-free rational
//! pairs built on them. Only the handful of variables the determinantal and
//! closed-form checks need (n <= 4).

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::num::{qi, Q};

#[derive(Clone, PartialEq, Debug)]
pub struct MPoly {
    pub nvars: usize,
    pub terms: BTreeMap<Vec<i32>, Q>,
}

impl MPoly {
    pub fn zero(nvars: usize) -> Self {
        MPoly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: Q) -> Self {
        let mut p = MPoly::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(vec![0; nvars], c);
        }
        p
    }

    pub fn one(nvars: usize) -> Self {
        MPoly::constant(nvars, Q::one())
    }

    pub fn monomial(nvars: usize, exps: Vec<i32>, c: Q) -> Self {
        assert_eq!(exps.len(), nvars);
        let mut p = MPoly::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(exps, c);
        }
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        MPoly::monomial(nvars, e, Q::one())
    }

    /// `(z_i - z_j)`
    pub fn var_diff(nvars: usize, i: usize, j: usize) -> Self {
        MPoly::var(nvars, i).sub(&MPoly::var(nvars, j))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, exps: Vec<i32>, c: Q) {
        if c.is_zero() {
            return;
        }
        let cur = self.terms.remove(&exps).unwrap_or_else(Q::zero) + c;
        if cur.is_zero() {
            self.terms.remove(&exps);
        } else {
            self.terms.insert(exps, cur);
        }
    }

    pub fn add(&self, other: &MPoly) -> MPoly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &MPoly) -> MPoly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> MPoly {
        let mut out = MPoly::zero(self.nvars);
        for (e, c) in &self.terms {
            out.terms.insert(e.clone(), -c.clone());
        }
        out
    }

    pub fn scale(&self, c: &Q) -> MPoly {
        if c.is_zero() {
            return MPoly::zero(self.nvars);
        }
        let mut out = MPoly::zero(self.nvars);
        for (e, v) in &self.terms {
            out.terms.insert(e.clone(), v * c);
        }
        out
    }

    pub fn mul(&self, other: &MPoly) -> MPoly {
        let mut out = MPoly::zero(self.nvars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Vec<i32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, c1 * c2);
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> MPoly {
        let mut acc = MPoly::one(self.nvars);
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn derivative(&self, i: usize) -> MPoly {
        let mut out = MPoly::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] != 0 {
                let mut e2 = e.clone();
                e2[i] -= 1;
                out.add_term(e2, c * qi(e[i] as i64));
            }
        }
        out
    }

    /// Substitute `z_j := z_i` (merging exponents).
    pub fn identify(&self, i: usize, j: usize) -> MPoly {
        let mut out = MPoly::zero(self.nvars);
        for (e, c) in &self.terms {
            let mut e2 = e.clone();
            e2[i] += e2[j];
            e2[j] = 0;
            out.add_term(e2, c.clone());
        }
        out
    }

    /// Exact division by `(z_i - z_j)` for true polynomials vanishing on the
    /// diagonal z_i = z_j; uses `a^p - b^p = (a-b)(a^{p-1} + ... + b^{p-1})`.
    pub fn div_by_diff(&self, i: usize, j: usize) -> Option<MPoly> {
        if !self.identify(i, j).is_zero() {
            return None;
        }
        let mut out = MPoly::zero(self.nvars);
        // decompose as sum over z_i-exponent: P = sum_a C_a z_i^a;
        // P = sum_a C_a (z_i^a - z_j^a) since the diagonal value is 0 classwise
        // after regrouping, so process each term against its z_j image.
        // We instead divide term by term via the telescoping identity applied
        // to P directly: repeatedly subtract c * z^e with e_i > min handled by
        // a simple recursive scheme. Easiest correct route: treat P as a
        // univariate polynomial in z_i with MPoly coefficients.
        let mut by_deg: BTreeMap<i32, MPoly> = BTreeMap::new();
        let mut min_i = 0i32;
        for e in self.terms.keys() {
            min_i = min_i.min(e[i]);
        }
        for (e, c) in &self.terms {
            let mut rest = e.clone();
            let a = rest[i] - min_i;
            rest[i] = 0;
            by_deg
                .entry(a)
                .or_insert_with(|| MPoly::zero(self.nvars))
                .add_term(rest, c.clone());
        }
        // P = z_i^{min} * sum_a C_a z_i^a; division by (z_i - z_j) of the sum:
        // synthetic division from the top degree.
        let top = *by_deg.keys().next_back().unwrap_or(&0);
        let mut carry = MPoly::zero(self.nvars);
        let zj = MPoly::var(self.nvars, j);
        let mut quot_terms: Vec<(i32, MPoly)> = Vec::new();
        for a in (0..=top).rev() {
            let ca = by_deg
                .get(&a)
                .cloned()
                .unwrap_or_else(|| MPoly::zero(self.nvars));
            let coef = ca.add(&carry);
            if a == 0 {
                if !coef.is_zero() {
                    return None;
                }
                break;
            }
            quot_terms.push((a - 1, coef.clone()));
            carry = coef.mul(&zj);
        }
        for (a, c) in quot_terms {
            for (e, v) in &c.terms {
                let mut e2 = e.clone();
                e2[i] += a + min_i;
                out.add_term(e2, v.clone());
            }
        }
        Some(out)
    }
}

/// gcd-free rational pair; denominators multiply, no simplification.
#[derive(Clone, Debug)]
pub struct MRat {
    pub num: MPoly,
    pub den: MPoly,
}

impl MRat {
    pub fn from_poly(p: MPoly) -> MRat {
        let n = p.nvars;
        MRat {
            num: p,
            den: MPoly::one(n),
        }
    }

    pub fn zero(nvars: usize) -> MRat {
        MRat::from_poly(MPoly::zero(nvars))
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn add(&self, other: &MRat) -> MRat {
        if self.den == other.den {
            return MRat {
                num: self.num.add(&other.num),
                den: self.den.clone(),
            };
        }
        MRat {
            num: self
                .num
                .mul(&other.den)
                .add(&other.num.mul(&self.den)),
            den: self.den.mul(&other.den),
        }
    }

    pub fn sub(&self, other: &MRat) -> MRat {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> MRat {
        MRat {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, other: &MRat) -> MRat {
        MRat {
            num: self.num.mul(&other.num),
            den: self.den.mul(&other.den),
        }
    }

    pub fn scale(&self, c: &Q) -> MRat {
        MRat {
            num: self.num.scale(c),
            den: self.den.clone(),
        }
    }

    pub fn recip(&self) -> MRat {
        assert!(!self.num.is_zero());
        MRat {
            num: self.den.clone(),
            den: self.num.clone(),
        }
    }

    pub fn derivative(&self, i: usize) -> MRat {
        // (n/d)' = (n'd - nd')/d^2
        MRat {
            num: self
                .num
                .derivative(i)
                .mul(&self.den)
                .sub(&self.num.mul(&self.den.derivative(i))),
            den: self.den.mul(&self.den),
        }
    }

    /// Cross-multiplied equality.
    pub fn eq_rat(&self, other: &MRat) -> bool {
        self.num.mul(&other.den) == other.num.mul(&self.den)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn division_by_difference() {
        // (z0^3 - z1^3) / (z0 - z1) = z0^2 + z0 z1 + z1^2
        let p = MPoly::monomial(2, vec![3, 0], qi(1)).sub(&MPoly::monomial(2, vec![0, 3], qi(1)));
        let q = p.div_by_diff(0, 1).unwrap();
        let want = MPoly::monomial(2, vec![2, 0], qi(1))
            .add(&MPoly::monomial(2, vec![1, 1], qi(1)))
            .add(&MPoly::monomial(2, vec![0, 2], qi(1)));
        assert_eq!(q, want);
        // multiply back
        assert_eq!(q.mul(&MPoly::var_diff(2, 0, 1)), p);
        // non-divisible input rejected
        assert!(MPoly::one(2).div_by_diff(0, 1).is_none());
    }

    #[test]
    fn identify_diagonal() {
        let p = MPoly::var_diff(2, 0, 1);
        assert!(p.identify(0, 1).is_zero());
    }

    #[test]
    fn mrat_equality() {
        // (z0^2-1)/(z0-1) == (z0+1)/1
        let num = MPoly::monomial(1, vec![2], qi(1)).sub(&MPoly::one(1));
        let den = MPoly::var(1, 0).sub(&MPoly::one(1));
        let a = MRat { num, den };
        let b = MRat::from_poly(MPoly::var(1, 0).add(&MPoly::one(1)));
        assert!(a.eq_rat(&b));
    }
}
