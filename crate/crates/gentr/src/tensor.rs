//! Spectator tensors, jets with tensor coefficients, local expansions of
//! pole-basis forms and of the Bergman kernel, and the diagonal-adapted
//! bivariate jets used for the regularized kernel B~.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::error::EngineError;
use crate::forms::Point;
use crate::jet::{Jet, JetOf};
use crate::num::{qi, Q};

/// Index of the pole-basis 1-form `d((z-q)^{-k})` (at q = inf: `d(z^k)`).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct PoleIdx {
    pub pt: Point,
    pub k: u32,
}

impl PoleIdx {
    pub fn new(pt: Point, k: u32) -> Self {
        assert!(k >= 1, "pole basis index k must be >= 1");
        PoleIdx { pt, k }
    }
}

/// A partial assignment of pole-basis indices to labeled spectator slots.
pub type Assign = Vec<(u8, PoleIdx)>;

/// Finite Q-linear combination of partial assignments. Two tensors multiply
/// by merging assignments; their slot sets must be disjoint.
#[derive(Clone, PartialEq, Debug)]
pub struct Tensor {
    pub entries: BTreeMap<Assign, Q>,
}

impl Tensor {
    pub fn scalar(c: Q) -> Tensor {
        let mut t = Tensor {
            entries: BTreeMap::new(),
        };
        if !c.is_zero() {
            t.entries.insert(Vec::new(), c);
        }
        t
    }

    pub fn single(slot: u8, idx: PoleIdx, c: Q) -> Tensor {
        let mut t = Tensor {
            entries: BTreeMap::new(),
        };
        if !c.is_zero() {
            t.entries.insert(vec![(slot, idx)], c);
        }
        t
    }

    pub fn from_assign(assign: Assign, c: Q) -> Tensor {
        let mut a = assign;
        a.sort_by(|x, y| x.0.cmp(&y.0));
        let mut t = Tensor {
            entries: BTreeMap::new(),
        };
        if !c.is_zero() {
            t.entries.insert(a, c);
        }
        t
    }

    pub fn add_entry(&mut self, assign: Assign, c: Q) {
        if c.is_zero() {
            return;
        }
        let cur = self.entries.remove(&assign).unwrap_or_else(Q::zero) + c;
        if cur.is_zero() {
            self.entries.remove(&assign);
        } else {
            self.entries.insert(assign, cur);
        }
    }
}

fn merge_assign(a: &Assign, b: &Assign) -> Assign {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                out.push(a[i].clone());
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j].clone());
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                panic!("tensor slot collision on slot {}", a[i].0)
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

impl Tensor {
    pub fn zero() -> Self {
        Tensor {
            entries: BTreeMap::new(),
        }
    }
    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }
    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (a, c) in &other.entries {
            out.add_entry(a.clone(), c.clone());
        }
        out
    }
    pub fn neg(&self) -> Self {
        let mut out = Tensor::zero();
        for (a, c) in &self.entries {
            out.entries.insert(a.clone(), -c.clone());
        }
        out
    }
    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Tensor::zero();
        for (a1, c1) in &self.entries {
            for (a2, c2) in &other.entries {
                out.add_entry(merge_assign(a1, a2), c1 * c2);
            }
        }
        out
    }
    pub fn scale(&self, c: &Q) -> Self {
        if num_traits::Zero::is_zero(c) {
            return Tensor::zero();
        }
        let mut out = Tensor::zero();
        for (a, v) in &self.entries {
            out.entries.insert(a.clone(), v * c);
        }
        out
    }
}

impl crate::jet::Coeff for Tensor {
    fn zero() -> Self {
        Tensor::zero()
    }
    fn is_zero(&self) -> bool {
        Tensor::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        Tensor::add(self, other)
    }
    fn neg(&self) -> Self {
        Tensor::neg(self)
    }
    fn mul(&self, other: &Self) -> Self {
        Tensor::mul(self, other)
    }
    fn scale(&self, c: &Q) -> Self {
        Tensor::scale(self, c)
    }
}

/// Jet in the local variable with spectator-tensor coefficients.
pub type TJet = JetOf<Tensor>;

pub fn tjet_from_scalar(j: &Jet) -> TJet {
    j.map(|c| Tensor::scalar(c.clone()))
}

impl TJet {
    pub fn mul_scalar_jet(&self, s: &Jet) -> TJet {
        let t = (self.trunc.saturating_add(s.val_bound()))
            .min(s.trunc.saturating_add(self.val_bound()))
            .min(crate::jet::TRUNC_INF);
        let mut out = TJet::zero(t);
        for (e1, c1) in self.terms() {
            for (e2, c2) in s.terms() {
                if e1 + e2 >= t {
                    break;
                }
                out.add_term(e1 + e2, c1.scale(c2));
            }
        }
        out
    }

    pub fn div_scalar_jet(&self, s: &Jet) -> Result<TJet, EngineError> {
        Ok(self.mul_scalar_jet(&s.invert()?))
    }

    /// Composition with a scalar inner jet of positive valuation.
    pub fn compose_scalar(&self, inner: &Jet) -> Result<TJet, EngineError> {
        let iv = inner.val_bound();
        if iv <= 0 {
            return Err(EngineError::Valuation(
                "composition requires positive inner valuation".into(),
            ));
        }
        let mut t = self.trunc.saturating_mul(iv);
        for (e, _) in self.terms() {
            t = t.min(inner.trunc.saturating_add((e - 1).saturating_mul(iv)));
        }
        t = t.min(crate::jet::TRUNC_INF).max(0);
        let mut out = TJet::zero(t);
        // iterated powers; their mul-tracked windows cover t by construction
        let mut pow_cache: BTreeMap<i64, Jet> = BTreeMap::new();
        let inv = if self.terms().any(|(e, _)| e < 0) {
            Some(inner.invert()?)
        } else {
            None
        };
        for (e, c) in self.terms() {
            let p = pow_cache.entry(e).or_insert_with(|| {
                let base = if e >= 0 {
                    inner.clone()
                } else {
                    inv.clone().unwrap()
                };
                let mut acc = Jet::one(crate::jet::TRUNC_INF);
                for _ in 0..e.abs() {
                    acc = acc.mul(&base);
                }
                acc
            });
            for (pe, pc) in p.terms() {
                if pe >= t {
                    break;
                }
                out.add_term(pe, c.scale(pc));
            }
        }
        Ok(out)
    }
}

/// Jet at `anchor` of the basis form `b = d((z-p)^{-k})`, as a density in
/// the local variable (w-chart density at infinity).
pub fn basis_jet_at(idx: &PoleIdx, anchor: &Point, order: i64) -> Jet {
    let k = idx.k as i64;
    match (&idx.pt, anchor) {
        (Point::Finite(p), Point::Finite(a)) if p == a => {
            Jet::monomial(-k - 1, qi(-k), order)
        }
        (Point::Finite(p), Point::Finite(a)) => {
            // -k (t + (a-p))^{-k-1}
            let c = a - p;
            binom_pow_jet(&c, -(k + 1), order).scale(&qi(-k))
        }
        (Point::Finite(p), Point::Inf) => {
            // k w^{k-1} (1 - p w)^{-k-1}
            let mut out = Jet::zero(order);
            let base = binom_pow_jet_linear(&-p.clone(), -(k + 1), order - (k - 1));
            for (e, c) in base.terms() {
                out.set(e + k - 1, c * qi(k));
            }
            out
        }
        (Point::Inf, Point::Finite(a)) => {
            // d(z^k) = k z^{k-1} dz at z = a + t
            let p = crate::poly::Poly::monomial(idx.k, Q::one()).derivative();
            crate::jet::poly_jet_at(&p, a, order)
        }
        (Point::Inf, Point::Inf) => Jet::monomial(-k - 1, qi(-k), order),
    }
}

/// Jet of `(c + t)^e` for nonzero rational `c` and integer `e` (negative ok).
fn binom_pow_jet(c: &Q, e: i64, order: i64) -> Jet {
    assert!(!c.is_zero());
    // c^e (1 + t/c)^e
    let mut out = Jet::zero(order);
    let mut coef = pow_q(c, e);
    let cinv = c.clone().recip();
    let mut m = 0i64;
    loop {
        if m >= order {
            break;
        }
        out.set(m, coef.clone());
        // next binomial coefficient: * (e - m)/(m+1) * (1/c)
        coef = coef * (qi(e) - qi(m)) / qi(m + 1) * cinv.clone();
        if coef.is_zero() {
            break;
        }
        m += 1;
    }
    out
}

/// Jet of `(1 + c t)^e`.
fn binom_pow_jet_linear(c: &Q, e: i64, order: i64) -> Jet {
    let mut out = Jet::zero(order.max(0));
    let mut coef = Q::one();
    let mut m = 0i64;
    loop {
        if m >= order {
            break;
        }
        out.set(m, coef.clone());
        coef = coef * (qi(e) - qi(m)) / qi(m + 1) * c;
        if coef.is_zero() {
            break;
        }
        m += 1;
    }
    out
}

fn pow_q(c: &Q, e: i64) -> Q {
    let mut acc = Q::one();
    let b = if e >= 0 { c.clone() } else { c.clone().recip() };
    for _ in 0..e.abs() {
        acc = acc * &b;
    }
    acc
}

/// Expansion of `B(z~, z_spec)` at `z~ -> anchor`:
/// `B = - sum_{m>=0} t^m b_{anchor, m+1}(z_spec)`, uniformly over charts.
pub fn b_kernel_expansion(anchor: &Point, spectator: u8, order: i64) -> TJet {
    let mut out = TJet::zero(order);
    for m in 0..order.max(0) {
        out.set(
            m,
            Tensor::single(
                spectator,
                PoleIdx::new(anchor.clone(), (m + 1) as u32),
                qi(-1),
            ),
        );
    }
    out
}

/// Bivariate jet adapted to the diagonal: Laurent in `s` (= first variable),
/// Taylor in `d` (= second minus first). Used for the regularized kernel.
#[derive(Clone)]
pub struct BiJet {
    /// d-exponent -> Laurent jet in s
    pub rows: BTreeMap<i64, Jet>,
    pub d_trunc: i64,
}

impl BiJet {
    pub fn zero(s_trunc: i64, d_trunc: i64) -> BiJet {
        let _ = s_trunc;
        BiJet {
            rows: BTreeMap::new(),
            d_trunc,
        }
    }

    pub fn from_rows(rows: Vec<(i64, Jet)>, d_trunc: i64) -> BiJet {
        let mut b = BiJet {
            rows: BTreeMap::new(),
            d_trunc,
        };
        for (e, j) in rows {
            if e < d_trunc && !j.is_zero() {
                b.rows.insert(e, j);
            }
        }
        b
    }

    /// Rows that are zero on a finite window are kept: their truncation still
    /// constrains later products. A missing row is identically zero.
    pub fn set_row(&mut self, e: i64, j: Jet) {
        if e < self.d_trunc && !(j.is_zero() && j.trunc >= crate::jet::TRUNC_INF / 2) {
            self.rows.insert(e, j);
        }
    }

    pub fn row(&self, e: i64) -> Jet {
        self.rows
            .get(&e)
            .cloned()
            .unwrap_or_else(|| Jet::zero(crate::jet::TRUNC_INF))
    }

    pub fn add(&self, other: &BiJet) -> BiJet {
        let mut out = BiJet::zero(0, self.d_trunc.min(other.d_trunc));
        let mut keys: Vec<i64> = self.rows.keys().chain(other.rows.keys()).copied().collect();
        keys.sort();
        keys.dedup();
        for e in keys {
            if e >= out.d_trunc {
                continue;
            }
            let j = match (self.rows.get(&e), other.rows.get(&e)) {
                (Some(a), Some(b)) => a.add(b),
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b.clone(),
                (None, None) => continue,
            };
            out.set_row(e, j);
        }
        out
    }

    pub fn mul(&self, other: &BiJet) -> BiJet {
        let mut out = BiJet::zero(0, self.d_trunc.min(other.d_trunc));
        let mut acc: BTreeMap<i64, Jet> = BTreeMap::new();
        for (e1, j1) in &self.rows {
            for (e2, j2) in &other.rows {
                let e = e1 + e2;
                if e >= out.d_trunc {
                    continue;
                }
                let p = j1.mul(j2);
                acc.entry(e)
                    .and_modify(|cur| *cur = cur.add(&p))
                    .or_insert(p);
            }
        }
        for (e, j) in acc {
            out.set_row(e, j);
        }
        out
    }

    pub fn scale(&self, c: &Q) -> BiJet {
        let mut out = BiJet::zero(0, self.d_trunc);
        for (e, j) in &self.rows {
            out.set_row(*e, j.scale(c));
        }
        out
    }

    /// d-valuation of the stored data.
    pub fn d_val(&self) -> Option<i64> {
        self.rows.keys().next().copied()
    }

    /// Inverse of a bijet whose d-leading row is an invertible s-jet.
    pub fn invert(&self) -> Result<BiJet, EngineError> {
        let v = self
            .d_val()
            .ok_or(EngineError::DivisionByZero)?;
        let lead = self.row(v);
        let lead_inv = lead.invert()?;
        let width = self.d_trunc - v;
        // normalize: self = d^v * lead * (1 + R), invert the unit part
        let mut unit_rows: BTreeMap<i64, Jet> = BTreeMap::new();
        for (e, j) in &self.rows {
            unit_rows.insert(e - v, j.mul(&lead_inv));
        }
        let mut inv_rows: BTreeMap<i64, Jet> = BTreeMap::new();
        inv_rows.insert(0, Jet::one(lead.mul(&lead_inv).trunc));
        for k in 1..width {
            let mut acc = Jet::zero(crate::jet::TRUNC_INF);
            for (e, j) in unit_rows.range(1..=k) {
                if let Some(prev) = inv_rows.get(&(k - e)) {
                    acc = acc.add(&j.mul(prev));
                }
            }
            if !acc.is_zero() {
                inv_rows.insert(k, acc.neg());
            }
        }
        let mut out = BiJet::zero(0, width - v);
        for (e, j) in inv_rows {
            out.set_row(e - v, j.mul(&lead_inv));
        }
        Ok(out)
    }

    /// Shift all d-exponents by `k` (divide by d^{-k} when k < 0; the caller
    /// asserts regularity via `d_val`).
    pub fn shift_d(&self, k: i64) -> BiJet {
        let mut out = BiJet::zero(0, self.d_trunc + k);
        for (e, j) in &self.rows {
            out.set_row(e + k, j.clone());
        }
        out
    }

    /// d/d(t2) at fixed t1  =  d/dd.
    pub fn deriv_2(&self) -> BiJet {
        let mut out = BiJet::zero(0, self.d_trunc - 1);
        for (e, j) in &self.rows {
            if *e != 0 {
                out.set_row(e - 1, j.scale(&qi(*e)));
            }
        }
        out
    }

    /// d/d(t1) at fixed t2  =  d/ds - d/dd.
    pub fn deriv_1(&self) -> BiJet {
        let mut out = BiJet::zero(0, self.d_trunc - 1);
        let mut acc: BTreeMap<i64, Jet> = BTreeMap::new();
        for (e, j) in &self.rows {
            // d/ds keeps the d-row
            if *e < self.d_trunc - 1 {
                acc.entry(*e)
                    .and_modify(|c| *c = c.add(&j.derivative()))
                    .or_insert_with(|| j.derivative());
            }
            // -d/dd lowers it
            if *e != 0 {
                let v = j.scale(&qi(-*e));
                acc.entry(e - 1).and_modify(|c| *c = c.add(&v)).or_insert(v);
            }
        }
        for (e, j) in acc {
            out.set_row(e, j);
        }
        out
    }

    /// Multiply by a function of t1 (an s-jet).
    pub fn mul_f1(&self, f: &Jet) -> BiJet {
        let mut out = BiJet::zero(0, self.d_trunc);
        for (e, j) in &self.rows {
            out.set_row(*e, j.mul(f));
        }
        out
    }

    /// Multiply by a function of t2 = s + d: the Taylor shift of an s-jet.
    pub fn mul_f2(&self, f: &Jet) -> BiJet {
        self.mul(&taylor_shift(f, self.d_trunc))
    }

    /// Restriction to the diagonal d = 0.
    pub fn diag(&self) -> Jet {
        self.row(0)
    }
}

/// f(s + d) = sum_j f^{(j)}(s) d^j / j! as a BiJet.
pub fn taylor_shift(f: &Jet, d_trunc: i64) -> BiJet {
    let mut out = BiJet::zero(0, d_trunc);
    let mut cur = f.clone();
    let mut fact = Q::one();
    for j in 0..d_trunc {
        if j > 0 {
            cur = cur.derivative();
            fact = fact * qi(j).recip();
        }
        out.set_row(j, cur.scale(&fact));
    }
    out
}

/// The regularized kernel
/// `B~(t1,t2) = [1/(t1-t2)^2 - x'(t1)x'(t2)/(x(t1)-x(t2))^2] dt1 dt2`
/// as a BiJet in (s, d), built from the dx-density jet alone.
pub fn regularized_b(dx_density: &Jet, d_trunc: i64) -> Result<BiJet, EngineError> {
    // D(s,d) = (x(t2)-x(t1))/d = sum_{j>=1} x^{(j)}(s) d^{j-1}/j!
    let mut dd = BiJet::zero(0, d_trunc);
    let mut cur = dx_density.clone();
    let mut fact = Q::one();
    for j in 1..=d_trunc {
        fact = fact * qi(j).recip();
        dd.set_row(j - 1, cur.scale(&fact));
        cur = cur.derivative();
    }
    // N = 1 - x'(s) x'(s+d) / D^2; B~ = N / d^2
    let x2 = taylor_shift(dx_density, d_trunc);
    let frac = x2
        .mul_f1(dx_density)
        .mul(&dd.mul(&dd).invert()?);
    let mut one = BiJet::zero(0, d_trunc);
    one.set_row(0, Jet::one(frac.row(0).trunc));
    let n = one.add(&frac.scale(&qi(-1)));
    if let Some(v) = n.d_val() {
        if v < 2 {
            // exact cancellation must clear d^0 and d^1
            if !n.row(0).is_zero() || !n.row(1).is_zero() {
                return Err(EngineError::Precision(
                    "regularized kernel failed diagonal cancellation".into(),
                ));
            }
        }
    }
    Ok(n.shift_d(-2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::qr;

    #[test]
    fn basis_expansion_at_its_own_point() {
        // b_{0,3}(z~) at 0 -> -3 t^{-4}
        let j = basis_jet_at(&PoleIdx::new(Point::Finite(Q::zero()), 3), &Point::Finite(Q::zero()), 4);
        assert_eq!(j.coeff(-4), qi(-3));
    }

    #[test]
    fn basis_expansion_at_other_point() {
        // b_{1,1}(z) at 0: -(z-1)^{-2} = -(1 - t)^{-2}|... density -(t-1)^{-2} = -(1-t)^{-2}
        let j = basis_jet_at(&PoleIdx::new(Point::Finite(qi(1)), 1), &Point::Finite(Q::zero()), 3);
        // -(t-1)^{-2} = -(1 + 2t + 3t^2 + ...)
        assert_eq!(j.coeff(0), qi(-1));
        assert_eq!(j.coeff(1), qi(-2));
        assert_eq!(j.coeff(2), qi(-3));
    }

    #[test]
    fn basis_at_infinity_charts() {
        // b_{inf,2} = d(z^2) = 2z dz at finite 3: 2(3+t)
        let j = basis_jet_at(&PoleIdx::new(Point::Inf, 2), &Point::Finite(qi(3)), 3);
        assert_eq!(j.coeff(0), qi(6));
        assert_eq!(j.coeff(1), qi(2));
        // b_{0,1} at inf: k w^{k-1}(1-0w)^{-k-1} with k=1: constant 1
        let j = basis_jet_at(&PoleIdx::new(Point::Finite(Q::zero()), 1), &Point::Inf, 3);
        assert_eq!(j.coeff(0), qi(1));
    }

    #[test]
    fn b_kernel_sign() {
        // B(z~,z) at 0 = -[dz~ b_{0,1}(z) + z~ dz~ b_{0,2}(z) + ...]
        let t = b_kernel_expansion(&Point::Finite(Q::zero()), 0, 3);
        let c0 = t.coeff(0);
        let key: Assign = vec![(0, PoleIdx::new(Point::Finite(Q::zero()), 1))];
        assert_eq!(c0.entries.get(&key), Some(&qi(-1)));
    }

    #[test]
    fn regularized_b_airy_diagonal() {
        // dx = z dz at 0: B~(z,z) = dz^2/(4z^2)
        let dx = Jet::monomial(1, qi(1), 12);
        let bt = regularized_b(&dx, 5).unwrap();
        let diag = bt.diag();
        assert_eq!(diag.coeff(-2), qr(1, 4));
    }

    #[test]
    fn regularized_b_trivial_for_flat_x() {
        // dx = dz: x = z makes both terms equal, B~ = 0
        let dx = Jet::one(12);
        let bt = regularized_b(&dx, 5).unwrap();
        assert!(bt.diag().is_zero());
        assert!(bt.rows.values().all(|j| j.is_zero()));
    }

    #[test]
    fn regularized_b_log_curve() {
        // dx = dz/z: B~ must still be a clean Taylor object in d
        let dx = Jet::monomial(-1, qi(1), 12);
        let bt = regularized_b(&dx, 5).unwrap();
        // diagonal value: B~(z,z) = [1/d^2 - (1/t1 t2)/(log t1 - log t2)^2]
        // -> 1/(t^2) * (1/e^2 - 1/((1+e) log(1+e)^2)) ... leading coefficient 1/12 t^{-2}? verify value:
        // expand: 1/((1+e)log(1+e)^2) = e^{-2}(1 - e + ...)(1 + e + 11/12 e^2...)^{-2}
        // known: B~ diag for x=log z is dz^2 * (1/12) * z^{-2} * ... just check regularity + symmetry proxy
        let diag = bt.diag();
        assert!(diag.coeff(-2) != Q::zero());
    }

    #[test]
    fn tensor_product_disjoint_slots() {
        let a = Tensor::single(0, PoleIdx::new(Point::Inf, 1), qi(2));
        let b = Tensor::single(1, PoleIdx::new(Point::Inf, 2), qi(3));
        let p = a.mul(&b);
        assert_eq!(p.entries.len(), 1);
        let (k, v) = p.entries.iter().next().unwrap();
        assert_eq!(k.len(), 2);
        assert_eq!(*v, qi(6));
    }
}
