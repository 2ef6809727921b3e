//! Symmetric n-differentials as sparse tensors over the pole basis
//! `d((z-q)^{-k})`, plus their local expansions and the distinguished
//! Bergman kernel objects.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::curve::SpectralCurve;
use crate::error::EngineError;
use crate::forms::Point;
use crate::jet::Jet;
use crate::num::{fmt_q, parse_q, Q};
use crate::tensor::{basis_jet_at, regularized_b, PoleIdx, Tensor, TJet};

/// A symmetric n-differential, stored on canonically sorted index tuples.
/// The stored coefficient is the coefficient of every ordered representative.
#[derive(Clone, PartialEq, Debug)]
pub struct MultiDiff {
    pub g: u32,
    pub n: u32,
    pub terms: BTreeMap<Vec<PoleIdx>, Q>,
}

impl MultiDiff {
    pub fn zero(g: u32, n: u32) -> Self {
        MultiDiff {
            g,
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn insert(&mut self, mut idx: Vec<PoleIdx>, c: Q) {
        assert_eq!(idx.len(), self.n as usize);
        idx.sort();
        if c.is_zero() {
            self.terms.remove(&idx);
        } else {
            self.terms.insert(idx, c);
        }
    }

    /// f^(g)_{k1..kn}, order-insensitive.
    pub fn coefficient(&self, ks: &[PoleIdx]) -> Q {
        let mut key = ks.to_vec();
        key.sort();
        self.terms.get(&key).cloned().unwrap_or_else(Q::zero)
    }

    /// Build from a map over ordered tuples; returns the symmetry defect
    /// (max spread of coefficients within a permutation class).
    pub fn from_ordered(
        g: u32,
        n: u32,
        ordered: &BTreeMap<Vec<PoleIdx>, Q>,
    ) -> (Self, Q) {
        let defect = symmetry_defect_ordered(ordered);
        let mut out = MultiDiff::zero(g, n);
        for (k, v) in ordered {
            let mut key = k.clone();
            key.sort();
            // keep one representative; symmetric input repeats the same value
            out.terms.insert(key, v.clone());
        }
        out.terms.retain(|_, v| !v.is_zero());
        (out, defect)
    }

    /// All distinct orderings of every stored tuple, with the coefficient.
    pub fn ordered_terms(&self) -> Vec<(Vec<PoleIdx>, Q)> {
        let mut out = Vec::new();
        for (k, v) in &self.terms {
            for perm in distinct_permutations(k) {
                out.push((perm, v.clone()));
            }
        }
        out
    }

    /// Laurent jet of the differential in the `slot` variable at `q`, with
    /// (n-1)-slot tensor coefficients labeled by the remaining original
    /// slot indices.
    pub fn expand_slot(&self, slot: usize, q: &Point, order: i64) -> TJet {
        assert!(slot < self.n as usize);
        let mut out = TJet::zero(order);
        for (key, c) in self.ordered_terms() {
            let jet = basis_jet_at(&key[slot], q, order);
            let mut assign = Vec::new();
            for (i, idx) in key.iter().enumerate() {
                if i != slot {
                    assign.push((i as u8, idx.clone()));
                }
            }
            let t = Tensor::from_assign(assign, c);
            for (e, jc) in jet.terms() {
                out.add_term(e, t.scale(jc));
            }
        }
        out
    }

    /// `expand_slot` composed with a substitution jet in the slot variable.
    pub fn substitute_jet(
        &self,
        slot: usize,
        q: &Point,
        sigma: &Jet,
        order: i64,
    ) -> Result<TJet, EngineError> {
        // composition of a density jet: f(sigma(t)) sigma'(t)
        let expanded = self.expand_slot(slot, q, order);
        let composed = expanded.compose_scalar(sigma)?;
        Ok(composed.mul_scalar_jet(&sigma.derivative()))
    }

    /// Max-norm of the antisymmetric part: 0 iff symmetric.
    pub fn symmetry_defect(&self) -> Q {
        // canonical storage is symmetric by construction
        let ordered: BTreeMap<Vec<PoleIdx>, Q> = self.ordered_terms().into_iter().collect();
        symmetry_defect_ordered(&ordered)
    }

    /// The set of basis points used by any slot.
    pub fn support_points(&self) -> Vec<Point> {
        let mut pts: Vec<Point> = self
            .terms
            .keys()
            .flat_map(|k| k.iter().map(|i| i.pt.clone()))
            .collect();
        pts.sort();
        pts.dedup();
        pts
    }

    pub fn scale(&self, c: &Q) -> MultiDiff {
        let mut out = MultiDiff::zero(self.g, self.n);
        if c.is_zero() {
            return out;
        }
        for (k, v) in &self.terms {
            out.terms.insert(k.clone(), v * c);
        }
        out
    }

    pub fn add(&self, other: &MultiDiff) -> MultiDiff {
        assert_eq!((self.g, self.n), (other.g, other.n));
        let mut out = self.clone();
        for (k, v) in &other.terms {
            let cur = out.terms.remove(k).unwrap_or_else(Q::zero) + v;
            if !cur.is_zero() {
                out.terms.insert(k.clone(), cur);
            }
        }
        out
    }
}

/// Spread (max - min over each permutation class, absent entries read as 0),
/// maximized over classes appearing in the map.
pub fn symmetry_defect_ordered(ordered: &BTreeMap<Vec<PoleIdx>, Q>) -> Q {
    let mut classes: BTreeMap<Vec<PoleIdx>, Vec<Q>> = BTreeMap::new();
    for (k, v) in ordered {
        let mut s = k.clone();
        s.sort();
        classes.entry(s).or_default().push(v.clone());
    }
    let mut defect = Q::zero();
    for (class, mut vals) in classes {
        let size = distinct_permutations(&class).len();
        while vals.len() < size {
            vals.push(Q::zero());
        }
        let mx = vals.iter().max().unwrap().clone();
        let mn = vals.iter().min().unwrap().clone();
        let spread = mx - mn;
        if spread > defect {
            defect = spread;
        }
    }
    defect
}

/// All distinct permutations of a sorted multiset.
pub fn distinct_permutations<T: Clone + Ord>(sorted: &[T]) -> Vec<Vec<T>> {
    let mut cur = sorted.to_vec();
    cur.sort();
    let mut out = vec![cur.clone()];
    // next_permutation loop
    loop {
        let n = cur.len();
        if n < 2 {
            break;
        }
        let mut i = n - 1;
        while i > 0 && cur[i - 1] >= cur[i] {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        let mut j = n - 1;
        while cur[j] <= cur[i - 1] {
            j -= 1;
        }
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(cur.clone());
    }
    out
}

/// Diagonal jet of `B(t1,t2) - dx1 dx2/(x1-x2)^2` at q (a 2-differential
/// density in the local variable).
pub fn regularized_diagonal(
    c: &SpectralCurve,
    q: &Point,
    order: i64,
) -> Result<Jet, EngineError> {
    let dxj = c.dx.local_expand(q, order + 4)?;
    Ok(regularized_b(&dxj, 3)?.diag().truncate(order))
}

// --- serialization -----------------------------------------------------------

#[derive(Serialize, Deserialize)]
pub struct MultiDiffDoc {
    pub g: u32,
    pub n: u32,
    pub terms: Vec<TermDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve_hash: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub engine_version: Option<String>,
}

#[derive(Serialize, Deserialize)]
pub struct TermDoc {
    pub idx: Vec<(String, u32)>,
    pub coeff: String,
}

impl MultiDiff {
    pub fn to_doc(&self, curve_hash: Option<String>) -> MultiDiffDoc {
        MultiDiffDoc {
            g: self.g,
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|(k, v)| TermDoc {
                    idx: k.iter().map(|i| (i.pt.to_string(), i.k)).collect(),
                    coeff: fmt_q(v),
                })
                .collect(),
            curve_hash,
            engine_version: Some(env!("CARGO_PKG_VERSION").to_string()),
        }
    }

    pub fn from_doc(doc: &MultiDiffDoc) -> Result<MultiDiff, EngineError> {
        let mut out = MultiDiff::zero(doc.g, doc.n);
        for t in &doc.terms {
            let mut idx = Vec::new();
            for (p, k) in &t.idx {
                let pt = Point::parse(p)
                    .ok_or_else(|| EngineError::Parse(format!("bad point {p}")))?;
                idx.push(PoleIdx::new(pt, *k));
            }
            let c = parse_q(&t.coeff)
                .ok_or_else(|| EngineError::Parse(format!("bad coeff {}", t.coeff)))?;
            out.insert(idx, c);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::parse_curve;
    use crate::num::{qi, qr};

    fn b0(k: u32) -> PoleIdx {
        PoleIdx::new(Point::Finite(Q::zero()), k)
    }

    #[test]
    fn coefficient_examples() {
        let mut w = MultiDiff::zero(0, 3);
        w.insert(vec![b0(1), b0(1), b0(1)], qi(1));
        assert_eq!(w.coefficient(&[b0(1), b0(1), b0(1)]), qi(1));
        assert_eq!(w.coefficient(&[b0(1), b0(3), b0(1)]), qi(0));
        let mut v = MultiDiff::zero(1, 1);
        v.insert(vec![b0(3)], qr(1, 24));
        assert_eq!(v.coefficient(&[b0(3)]), qr(1, 24));
    }

    #[test]
    fn symmetry_defect_examples() {
        let mut w = MultiDiff::zero(0, 2);
        w.insert(vec![b0(1), b0(2)], qi(5));
        assert_eq!(w.symmetry_defect(), qi(0));

        // hand-built asymmetric ordered tensor
        let mut ordered = BTreeMap::new();
        ordered.insert(vec![b0(1), b0(2)], qi(1));
        assert_eq!(symmetry_defect_ordered(&ordered), qi(1));
    }

    #[test]
    fn expand_basis_term() {
        // b_{0,3}(z~) (x) b_{0,1}(z1), expanded at 0 in slot 0:
        // -3 t^{-4} dt (x) b_{0,1}
        let mut w = MultiDiff::zero(0, 2);
        w.insert(vec![b0(3), b0(1)], qi(1));
        let jet = w.expand_slot(0, &Point::Finite(Q::zero()), 2);
        // slot 0 can hold either index; the b_{0,3}-active branch sits at t^{-4}
        let c = jet.coeff(-4);
        let key = vec![(1u8, b0(1))];
        assert_eq!(c.entries.get(&key), Some(&qi(-3)));
    }

    #[test]
    fn expand_slot_away_from_support() {
        // differential with poles only at 1 expanded at 0: valuation >= 0
        let mut w = MultiDiff::zero(0, 1);
        w.insert(vec![PoleIdx::new(Point::Finite(qi(1)), 2)], qi(1));
        let jet = w.expand_slot(0, &Point::Finite(Q::zero()), 4);
        assert!(jet.valuation().unwrap_or(0) >= 0);
    }

    #[test]
    fn substitute_scaling() {
        // basis term b_{0,1} with sigma = 2t: density -(2t)^{-2} * 2 = -(1/2) t^{-2}
        let mut w = MultiDiff::zero(0, 1);
        w.insert(vec![b0(1)], qi(1));
        let sigma = Jet::monomial(1, qi(2), 8);
        let jet = w
            .substitute_jet(0, &Point::Finite(Q::zero()), &sigma, 4)
            .unwrap();
        let c = jet.coeff(-2);
        assert_eq!(c.entries.get(&Vec::new()), Some(&qr(-1, 2)));
    }

    #[test]
    fn airy_regularized_diagonal() {
        let c = parse_curve("dx = z dz; dy = dz; keys = [0]").unwrap();
        let d = regularized_diagonal(&c, &Point::Finite(Q::zero()), 3).unwrap();
        assert_eq!(d.coeff(-2), qr(1, 4));
        // flat curve: identically zero
        let c = parse_curve("dx = dz; dy = z dz; keys = [0]").unwrap();
        let d = regularized_diagonal(&c, &Point::Finite(Q::zero()), 3).unwrap();
        assert!(d.is_zero());
    }

    #[test]
    fn serialization_roundtrip() {
        let mut w = MultiDiff::zero(1, 2);
        w.insert(vec![b0(1), PoleIdx::new(Point::Inf, 4)], qr(-7, 3));
        let doc = w.to_doc(Some("abc".into()));
        let s = serde_json::to_string(&doc).unwrap();
        let doc2: MultiDiffDoc = serde_json::from_str(&s).unwrap();
        let w2 = MultiDiff::from_doc(&doc2).unwrap();
        assert_eq!(w, w2);
    }

    #[test]
    fn permutations_of_multiset() {
        let p = distinct_permutations(&[1, 1, 2]);
        assert_eq!(p.len(), 3);
    }
}
