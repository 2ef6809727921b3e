//! Meromorphic 1-forms on CP^1 in a global affine coordinate z, their local
//! expansions (the chart w = 1/z handles infinity), residues, and the
//! operator d(1/dmu) together with the S-operator built from it.
//!
//! A `FormJet` is the Laurent jet of the dz-density (dw-density at infinity)
//! in the local variable t centered at the anchor.

use std::cmp::Ordering;
use std::fmt;

use num_traits::Zero;

use crate::error::EngineError;
use crate::jet::{poly_jet_at, Jet};
use crate::num::{fmt_q, parse_q, s_coeff, Q};
use crate::ratfun::RatFun;

/// A point of CP^1: finite rational or infinity.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Point {
    Finite(Q),
    Inf,
}

impl Point {
    pub fn finite(q: Q) -> Self {
        Point::Finite(q)
    }

    pub fn parse(s: &str) -> Option<Point> {
        let s = s.trim();
        if s == "inf" || s == "oo" || s == "∞" {
            return Some(Point::Inf);
        }
        parse_q(s).map(Point::Finite)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Finite(q) => write!(f, "{}", fmt_q(q)),
            Point::Inf => write!(f, "inf"),
        }
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

/// Finite rationals ascending, then infinity.
impl Ord for Point {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Point::Finite(a), Point::Finite(b)) => a.cmp(b),
            (Point::Finite(_), Point::Inf) => Ordering::Less,
            (Point::Inf, Point::Finite(_)) => Ordering::Greater,
            (Point::Inf, Point::Inf) => Ordering::Equal,
        }
    }
}

impl PartialOrd for Point {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A meromorphic 1-form `f(z) dz` with rational density.
#[derive(Clone, PartialEq, Debug)]
pub struct OneForm {
    pub density: RatFun,
}

impl OneForm {
    pub fn new(density: RatFun) -> Self {
        OneForm { density }
    }

    pub fn is_zero(&self) -> bool {
        self.density.is_zero()
    }

    /// Local order r-1 of the density at q, where `form = a t^{r-1}(1+..)dt`.
    pub fn density_order_at(&self, q: &Point) -> i64 {
        match q {
            Point::Finite(a) => self.density.order_at(a),
            // dz = -dw/w^2
            Point::Inf => self.density.subst_inv().order_at(&Q::zero()) - 2,
        }
    }

    /// Laurent jet of the local density at q to the requested window.
    pub fn local_expand(&self, q: &Point, order: i64) -> Result<Jet, EngineError> {
        match q {
            Point::Finite(a) => ratfun_jet_at(&self.density, a, order),
            Point::Inf => {
                let f = self.density.subst_inv(); // f(1/w)
                let g = f.neg(); // density * dz/dw = -f(1/w)/w^2
                Ok(ratfun_jet_at(&g, &Q::zero(), order + 2)?.shift(-2).truncate(order))
            }
        }
    }
}

/// Exact Laurent window of a rational function at a finite point.
pub fn ratfun_jet_at(f: &RatFun, a: &Q, order: i64) -> Result<Jet, EngineError> {
    if f.is_zero() {
        return Ok(Jet::zero(order));
    }
    let dv = f.denominator().root_multiplicity(a) as i64;
    let num = poly_jet_at(f.numerator(), a, order + dv);
    let den = poly_jet_at(f.denominator(), a, order + dv);
    Ok(num.div(&den)?.truncate(order))
}

/// Coefficient of t^{-1} dt; errors if the window does not reach it.
pub fn residue_at(j: &Jet) -> Result<Q, EngineError> {
    if j.trunc < 0 {
        return Err(EngineError::Precision(format!(
            "residue slot hidden by truncation O(t^{})",
            j.trunc
        )));
    }
    Ok(j.coeff(-1))
}

/// The operator d(1/dmu): eta -> d(eta / dmu), on density jets.
pub fn apply_inv_d(eta: &Jet, dmu: &Jet) -> Result<Jet, EngineError> {
    Ok(eta.div(dmu)?.derivative())
}

/// One slot of the S-operator ladder: `s_{2i} * (d/dmu)^{2i} (eta/dmu)`, for
/// i = 0..=max_i. Entry i is the coefficient of `(u hbar)^{2i+1}` after the
/// overall `u hbar` prefactor is attached by the caller.
pub fn s_ladder(eta: &Jet, dmu: &Jet, max_i: u64) -> Result<Vec<Jet>, EngineError> {
    let mut out = Vec::with_capacity(max_i as usize + 1);
    let mut cur = eta.div(dmu)?;
    out.push(cur.clone());
    for i in 1..=max_i {
        // two more derivative steps d/dmu = (d/dt) / dmu-density
        for _ in 0..2 {
            cur = cur.derivative().div(dmu)?;
        }
        out.push(cur.scale(&s_coeff(i)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{qi, qr};
    use crate::poly::Poly;

    fn form(num: &[i64], den: &[i64]) -> OneForm {
        let p = |cs: &[i64]| {
            Poly::from_coeffs(
                &cs.iter()
                    .enumerate()
                    .map(|(e, &c)| (e as u32, qi(c)))
                    .collect::<Vec<_>>(),
            )
        };
        OneForm::new(RatFun::new(p(num), p(den)))
    }

    #[test]
    fn local_expansion_examples() {
        // z dz at 0: density t + O(t^3)
        let w = form(&[0, 1], &[1]);
        let j = w.local_expand(&Point::Finite(Q::zero()), 3).unwrap();
        assert_eq!(j.coeff(1), qi(1));
        assert_eq!(j.coeff(0), qi(0));

        // z dz at inf: -w^{-3} dw
        let j = w.local_expand(&Point::Inf, 2).unwrap();
        assert_eq!(j.coeff(-3), qi(-1));
        assert_eq!(w.density_order_at(&Point::Inf), -3);

        // dz/z at 0: simple pole, residue 1
        let w = form(&[1], &[0, 1]);
        let j = w.local_expand(&Point::Finite(Q::zero()), 3).unwrap();
        assert_eq!(j.coeff(-1), qi(1));
        assert_eq!(residue_at(&j).unwrap(), qi(1));

        // dz/z at inf: residue -1 (chart sign)
        let j = w.local_expand(&Point::Inf, 3).unwrap();
        assert_eq!(residue_at(&j).unwrap(), qi(-1));

        // expansion at a shifted point: dz/(z-1) at 2: 1/(1+t) = 1 - t + ...
        let w = form(&[-1, 1], &[1]);
        let w = OneForm::new(w.density.recip().unwrap());
        let j = w.local_expand(&Point::Finite(qi(2)), 3).unwrap();
        assert_eq!(j.coeff(0), qi(1));
        assert_eq!(j.coeff(1), qi(-1));
        assert_eq!(j.coeff(2), qi(1));
    }

    #[test]
    fn inv_d_examples() {
        // eta = z dz, dmu = dz -> d(z) = dz
        let eta = Jet::monomial(1, qi(1), 8);
        let dmu = Jet::one(8);
        let out = apply_inv_d(&eta, &dmu).unwrap();
        assert_eq!(out.coeff(0), qi(1));
        assert!(out.terms().count() == 1);

        // eta = dz, dmu = dz -> 0
        let eta = Jet::one(8);
        let out = apply_inv_d(&eta, &dmu).unwrap();
        assert!(out.is_zero());

        // eta = dz/z^2, dmu = z dz -> d(z^{-3}) = -3 z^{-4} dz
        let eta = Jet::monomial(-2, qi(1), 6);
        let dmu = Jet::monomial(1, qi(1), 6);
        let out = apply_inv_d(&eta, &dmu).unwrap();
        assert_eq!(out.coeff(-4), qi(-3));
    }

    #[test]
    fn inv_d_kills_residues() {
        // derivative of a Laurent jet never has a t^{-1} term
        let eta = Jet::from_coeffs(-3, &[qi(2), qi(5), qi(-7), qi(1), qi(4)], 4);
        let dmu = Jet::from_coeffs(0, &[qi(1), qi(3)], 9);
        let out = apply_inv_d(&eta, &dmu).unwrap();
        assert_eq!(out.coeff(-1), qi(0));
    }

    #[test]
    fn s_ladder_examples() {
        // j = z^{-1} density, dmu = dz: level 1 = (1/24) d^2/dz^2 (z^{-1}) = z^{-3}/12
        let j = Jet::monomial(-1, qi(1), 6);
        let dmu = Jet::one(12);
        let lad = s_ladder(&j, &dmu, 1).unwrap();
        assert_eq!(lad[0].coeff(-1), qi(1)); // S(0) = 1: plain division
        assert_eq!(lad[1].coeff(-3), qr(1, 12));
    }
}
