//! Multivariate rational functions with factored denominators, closed under
//! the operator calculus of the duality induction. Denominator factors are
//! variable differences `(z_i - z_j)` and univariate dictionary polynomials
//! `p(z_i)`; addition merges denominators by factor-wise lcm, so chains of
//! sums do not blow the denominator up.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::error::EngineError;
use crate::mpoly::MPoly;
use crate::num::{qi, Q};
use crate::poly::Poly;

/// Shared dictionary of monic univariate factor polynomials.
#[derive(Clone, Default)]
pub struct Dict {
    pub polys: Vec<Poly>,
}

impl Dict {
    pub fn intern(&mut self, p: &Poly) -> usize {
        let m = p.monic();
        if let Some(i) = self.polys.iter().position(|q| *q == m) {
            return i;
        }
        self.polys.push(m);
        self.polys.len() - 1
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Factor {
    /// z_i - z_j with i < j
    Diff(u8, u8),
    /// dictionary polynomial evaluated at z_i
    Uni(u8, usize),
}

pub type Den = BTreeMap<Factor, u32>;

#[derive(Clone, Debug)]
pub struct FRat {
    pub nv: usize,
    pub num: MPoly,
    pub den: Den,
}

fn lift_poly(p: &Poly, nv: usize, var: usize) -> MPoly {
    let mut out = MPoly::zero(nv);
    for (e, c) in p.terms() {
        let mut exps = vec![0; nv];
        exps[var] = e as i32;
        out.add_term(exps, c.clone());
    }
    out
}

impl FRat {
    pub fn zero(nv: usize) -> Self {
        FRat {
            nv,
            num: MPoly::zero(nv),
            den: Den::new(),
        }
    }

    pub fn from_mpoly(num: MPoly) -> Self {
        FRat {
            nv: num.nvars,
            num,
            den: Den::new(),
        }
    }

    pub fn constant(nv: usize, c: Q) -> Self {
        FRat::from_mpoly(MPoly::constant(nv, c))
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn factor_mpoly(dict: &Dict, nv: usize, f: &Factor) -> MPoly {
        match f {
            Factor::Diff(i, j) => MPoly::var_diff(nv, *i as usize, *j as usize),
            Factor::Uni(i, id) => lift_poly(&dict.polys[*id], nv, *i as usize),
        }
    }

    pub fn den_mpoly(&self, dict: &Dict) -> MPoly {
        let mut acc = MPoly::one(self.nv);
        for (f, a) in &self.den {
            let fm = FRat::factor_mpoly(dict, self.nv, f);
            for _ in 0..*a {
                acc = acc.mul(&fm);
            }
        }
        acc
    }

    pub fn neg(&self) -> FRat {
        FRat {
            nv: self.nv,
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn scale(&self, c: &Q) -> FRat {
        if c.is_zero() {
            return FRat::zero(self.nv);
        }
        FRat {
            nv: self.nv,
            num: self.num.scale(c),
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, other: &FRat) -> FRat {
        if self.is_zero() || other.is_zero() {
            return FRat::zero(self.nv);
        }
        let mut den = self.den.clone();
        for (f, a) in &other.den {
            *den.entry(*f).or_insert(0) += a;
        }
        FRat {
            nv: self.nv,
            num: self.num.mul(&other.num),
            den,
        }
    }

    pub fn add(&self, other: &FRat, dict: &Dict) -> FRat {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        // lcm of factored denominators
        let mut den = Den::new();
        let keys: Vec<Factor> = self.den.keys().chain(other.den.keys()).copied().collect();
        for f in keys {
            let a = *self.den.get(&f).unwrap_or(&0);
            let b = *other.den.get(&f).unwrap_or(&0);
            den.insert(f, a.max(b));
        }
        den.retain(|_, a| *a > 0);
        let mut n1 = self.num.clone();
        let mut n2 = other.num.clone();
        for (f, a) in &den {
            let fm = FRat::factor_mpoly(dict, self.nv, f);
            let a1 = *self.den.get(f).unwrap_or(&0);
            let a2 = *other.den.get(f).unwrap_or(&0);
            for _ in 0..(a - a1) {
                n1 = n1.mul(&fm);
            }
            for _ in 0..(a - a2) {
                n2 = n2.mul(&fm);
            }
        }
        let mut out = FRat {
            nv: self.nv,
            num: n1.add(&n2),
            den,
        };
        if out.num.is_zero() {
            out.den.clear();
        }
        out
    }

    pub fn sub(&self, other: &FRat, dict: &Dict) -> FRat {
        self.add(&other.neg(), dict)
    }

    /// Multiply by `1 / factor`.
    pub fn div_factor(&self, f: Factor) -> FRat {
        if self.is_zero() {
            return self.clone();
        }
        let mut den = self.den.clone();
        *den.entry(f).or_insert(0) += 1;
        FRat {
            nv: self.nv,
            num: self.num.clone(),
            den,
        }
    }

    /// d/dz_i with the quotient rule over the factored denominator:
    /// bumps every factor by one and keeps factors intact.
    pub fn derivative(&self, i: usize, dict: &Dict) -> FRat {
        if self.is_zero() {
            return self.clone();
        }
        // d(N * prod f^{-a}) = [N' prodf - N sum_f a_f f'_i prod_{g != f} g] / (den * prodf)
        let distinct: Vec<Factor> = self.den.keys().copied().collect();
        let prod_all = {
            let mut acc = MPoly::one(self.nv);
            for f in &distinct {
                acc = acc.mul(&FRat::factor_mpoly(dict, self.nv, f));
            }
            acc
        };
        let mut num = self.num.derivative(i).mul(&prod_all);
        for f in &distinct {
            let a = self.den[f];
            let fprime = match f {
                Factor::Diff(p, q) => {
                    if *p as usize == i {
                        MPoly::one(self.nv)
                    } else if *q as usize == i {
                        MPoly::constant(self.nv, qi(-1))
                    } else {
                        MPoly::zero(self.nv)
                    }
                }
                Factor::Uni(p, id) => {
                    if *p as usize == i {
                        lift_poly(&dict.polys[*id].derivative(), self.nv, i)
                    } else {
                        MPoly::zero(self.nv)
                    }
                }
            };
            if fprime.is_zero() {
                continue;
            }
            let mut others = MPoly::one(self.nv);
            for g in &distinct {
                if g != f {
                    others = others.mul(&FRat::factor_mpoly(dict, self.nv, g));
                }
            }
            num = num.sub(&self.num.scale(&qi(a as i64)).mul(&fprime).mul(&others));
        }
        let mut den = self.den.clone();
        for f in &distinct {
            *den.get_mut(f).unwrap() += 1;
        }
        let mut out = FRat { nv: self.nv, num, den };
        if out.num.is_zero() {
            out.den.clear();
        }
        out.reduce(dict);
        out
    }

    /// Renaming of variables (for slot remaps and restrictions). `map[i]`
    /// gives the new index of old variable i; identification of several old
    /// variables onto one new index is allowed for the numerator and for
    /// Uni factors; Diff factors must stay non-degenerate.
    pub fn remap(&self, map: &[usize], new_nv: usize) -> Result<FRat, EngineError> {
        let mut num = MPoly::zero(new_nv);
        for (e, c) in &self.num.terms {
            let mut exps = vec![0i32; new_nv];
            for (i, a) in e.iter().enumerate() {
                exps[map[i]] += a;
            }
            num.add_term(exps, c.clone());
        }
        let mut den = Den::new();
        let mut flip = 0u32;
        for (f, a) in &self.den {
            let nf = match f {
                Factor::Diff(i, j) => {
                    let ni = map[*i as usize] as u8;
                    let nj = map[*j as usize] as u8;
                    if ni == nj {
                        return Err(EngineError::Precision(
                            "variable identification hits a diagonal denominator".into(),
                        ));
                    }
                    if ni > nj {
                        // (z_i - z_j) = -(z_j - z_i): compensate odd powers
                        flip += a;
                    }
                    Factor::Diff(ni.min(nj), ni.max(nj))
                }
                Factor::Uni(i, id) => Factor::Uni(map[*i as usize] as u8, *id),
            };
            *den.entry(nf).or_insert(0) += a;
        }
        if flip % 2 == 1 {
            num = num.neg();
        }
        Ok(FRat {
            nv: new_nv,
            num,
            den,
        })
    }

    /// Exact equality by cross multiplication.
    pub fn eq_rat(&self, other: &FRat, dict: &Dict) -> bool {
        self.num.mul(&other.den_mpoly(dict)) == other.num.mul(&self.den_mpoly(dict))
    }

    /// Opportunistic exact cancellation of denominator factors against the
    /// numerator (keeps growth down; correctness does not depend on it).
    pub fn reduce(&mut self, dict: &Dict) {
        let factors: Vec<Factor> = self.den.keys().copied().collect();
        for f in factors {
            loop {
                let a = *self.den.get(&f).unwrap_or(&0);
                if a == 0 {
                    break;
                }
                let fm = FRat::factor_mpoly(dict, self.nv, &f);
                match exact_div(&self.num, &fm, &f) {
                    Some(q) => {
                        self.num = q;
                        if a == 1 {
                            self.den.remove(&f);
                        } else {
                            self.den.insert(f, a - 1);
                        }
                    }
                    None => break,
                }
            }
        }
    }
}

/// Exact multivariate division by a factor polynomial, exploiting that the
/// factor is univariate-in-one-variable (or a difference). Returns None when
/// the division is not exact.
fn exact_div(num: &MPoly, fm: &MPoly, f: &Factor) -> Option<MPoly> {
    match f {
        Factor::Diff(i, j) => num.div_by_diff(*i as usize, *j as usize),
        Factor::Uni(i, _) => div_univar(num, fm, *i as usize),
    }
}

/// Division by a polynomial in the single variable `i`, with MPoly
/// coefficients in the other variables.
fn div_univar(num: &MPoly, fm: &MPoly, i: usize) -> Option<MPoly> {
    // decompose fm by z_i-degree (its coefficients are constants)
    let mut fdeg: BTreeMap<i32, Q> = BTreeMap::new();
    for (e, c) in &fm.terms {
        fdeg.insert(e[i], c.clone());
    }
    let (&ftop, flead) = fdeg.iter().next_back()?;
    if ftop == 0 {
        // constant factor
        let inv = flead.clone().recip();
        return Some(num.scale(&inv));
    }
    // numerator by z_i-degree
    let mut ndeg: BTreeMap<i32, MPoly> = BTreeMap::new();
    let min_i = num.terms.keys().map(|e| e[i]).min().unwrap_or(0).min(0);
    for (e, c) in &num.terms {
        let mut rest = e.clone();
        let d = rest[i] - min_i;
        rest[i] = 0;
        ndeg.entry(d)
            .or_insert_with(|| MPoly::zero(num.nvars))
            .add_term(rest, c.clone());
    }
    let ntop = *ndeg.keys().next_back()?;
    if ntop < ftop {
        return None;
    }
    let inv_lead = flead.clone().recip();
    let mut quot: BTreeMap<i32, MPoly> = BTreeMap::new();
    let mut rem = ndeg;
    for d in (ftop..=ntop).rev() {
        let lead = match rem.get(&d) {
            Some(p) if !p.is_zero() => p.clone(),
            _ => continue,
        };
        let qd = lead.scale(&inv_lead);
        quot.insert(d - ftop, qd.clone());
        for (fe, fc) in &fdeg {
            let target = d - ftop + fe;
            let sub = qd.scale(fc);
            let cur = rem
                .remove(&target)
                .unwrap_or_else(|| MPoly::zero(num.nvars));
            let nw = cur.sub(&sub);
            if !nw.is_zero() {
                rem.insert(target, nw);
            }
        }
    }
    if rem.values().any(|p| !p.is_zero()) {
        return None;
    }
    let mut out = MPoly::zero(num.nvars);
    for (d, p) in quot {
        for (e, c) in &p.terms {
            let mut exps = e.clone();
            exps[i] += d + min_i;
            out.add_term(exps, c.clone());
        }
    }
    Some(out)
}

/// Exact division of a multivariate polynomial by a polynomial univariate
/// in `var` (used by the tensor extraction).
pub fn exact_div_pub(num: &MPoly, fm: &MPoly, var: usize) -> Option<MPoly> {
    div_univar(num, fm, var)
}

/// Lift a univariate rational function into variable `var`, interning its
/// denominator factors in the dictionary (split into rational linear factors
/// plus the residual).
pub fn lift_ratfun(
    f: &crate::ratfun::RatFun,
    nv: usize,
    var: usize,
    dict: &mut Dict,
) -> FRat {
    if f.is_zero() {
        return FRat::zero(nv);
    }
    let mut out = FRat::from_mpoly(lift_poly(f.numerator(), nv, var));
    let den = f.denominator();
    if den.degree().unwrap_or(0) > 0 {
        let report = den.rational_roots();
        for (root, mult) in &report.roots {
            let lin = Poly::from_coeffs(&[(0, -root.clone()), (1, Q::one())]);
            let id = dict.intern(&lin);
            for _ in 0..*mult {
                out = out.div_factor(Factor::Uni(var as u8, id));
            }
        }
        if report.residual.degree().unwrap_or(0) > 0 {
            let id = dict.intern(&report.residual);
            out = out.div_factor(Factor::Uni(var as u8, id));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratfun::RatFun;

    fn zp(cs: &[i64]) -> Poly {
        Poly::from_coeffs(
            &cs.iter()
                .enumerate()
                .map(|(e, &c)| (e as u32, qi(c)))
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn add_with_lcm_denominators() {
        let mut dict = Dict::default();
        // 1/(z0-z1) + 1/(z0-z1)^2 = (z0-z1+1)/(z0-z1)^2
        let a = FRat::constant(2, qi(1)).div_factor(Factor::Diff(0, 1));
        let b = FRat::constant(2, qi(1))
            .div_factor(Factor::Diff(0, 1))
            .div_factor(Factor::Diff(0, 1));
        let s = a.add(&b, &dict);
        assert_eq!(s.den.get(&Factor::Diff(0, 1)), Some(&2));
        let want_num = MPoly::var_diff(2, 0, 1).add(&MPoly::one(2));
        assert_eq!(s.num, want_num);
        let _ = &mut dict;
    }

    #[test]
    fn derivative_quotient_rule() {
        let mut dict = Dict::default();
        // d/dz0 of 1/(z0 - z1) = -1/(z0-z1)^2
        let a = FRat::constant(2, qi(1)).div_factor(Factor::Diff(0, 1));
        let d = a.derivative(0, &dict);
        let b = FRat::constant(2, qi(-1))
            .div_factor(Factor::Diff(0, 1))
            .div_factor(Factor::Diff(0, 1));
        assert!(d.eq_rat(&b, &dict));
        // d/dz0 of 1/p(z0) with p = z^2: -2 z0 / z0^4 (reduces to -2/z0^3)
        let f = lift_ratfun(&RatFun::new(Poly::one(), zp(&[0, 0, 1])), 1, 0, &mut dict);
        let df = f.derivative(0, &dict);
        let want = lift_ratfun(
            &RatFun::new(zp(&[-2]), zp(&[0, 0, 0, 1])),
            1,
            0,
            &mut dict,
        );
        assert!(df.eq_rat(&want, &dict));
    }

    #[test]
    fn reduce_cancels_exactly() {
        let dict = {
            let mut d = Dict::default();
            d.intern(&zp(&[0, 1]));
            d
        };
        // (z0^2 - z1^2)/(z0 - z1) reduces to z0 + z1
        let num = MPoly::monomial(2, vec![2, 0], qi(1)).sub(&MPoly::monomial(2, vec![0, 2], qi(1)));
        let mut f = FRat::from_mpoly(num).div_factor(Factor::Diff(0, 1));
        f.reduce(&dict);
        assert!(f.den.is_empty());
        assert_eq!(
            f.num,
            MPoly::var(2, 0).add(&MPoly::var(2, 1))
        );
    }

    #[test]
    fn remap_identifies_variables() {
        // (z2 - z1) under z2 -> z0 becomes (z0 - z1)
        let f = FRat::from_mpoly(MPoly::var_diff(3, 2, 1));
        let g = f.remap(&[0, 1, 0], 2).unwrap();
        assert_eq!(g.num, MPoly::var_diff(2, 0, 1));
        // identifying across a Diff denominator is an error
        let f = FRat::constant(3, qi(1)).div_factor(Factor::Diff(1, 2));
        assert!(f.remap(&[0, 1, 1], 2).is_err());
    }
}
