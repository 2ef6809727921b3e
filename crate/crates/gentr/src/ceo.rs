//! The classical residue recursion at simple zeros of dx with regular
//! nonvanishing dy, used as an independent oracle for the generalized
//! engine.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::builder::{order_guess, project_principal};
use crate::curve::SpectralCurve;
use crate::error::EngineError;
use crate::forms::Point;
use crate::jet::Jet;
use crate::multidiff::MultiDiff;
use crate::num::{qi, Q};
use crate::tensor::{tjet_from_scalar, PoleIdx, TJet};

/// Deck transformation jet at a simple zero of dx: sigma(t) = -t + O(t^2)
/// with x(sigma(t)) = x(t) to the window.
pub struct DeckJet {
    pub q: Point,
    pub sigma: Jet,
}

/// Solve x(sigma) = x(t), sigma != id, through the square-root normal form.
pub fn deck(c: &SpectralCurve, q: &Point, order: i64) -> Result<DeckJet, EngineError> {
    let cl = c.classify(q);
    if cl.r != 2 {
        return Err(EngineError::NotSimpleZero(q.to_string()));
    }
    let dxj = c.dx.local_expand(q, order + 2)?;
    // x(t) - x(q) = integral of the density: valuation 2
    let x = dxj.primitive()?;
    debug_assert_eq!(x.valuation(), Some(2));
    // x = c t^2 * unit; psi = t * sqrt(unit) has rational coefficients
    let lead = x.coeff(2);
    let unit = x.shift(-2).scale(&lead.recip());
    let psi = unit.root_of_unit(2)?.shift(1);
    let psi_inv = psi.reverse()?;
    let sigma = psi_inv.compose(&psi.neg())?;
    Ok(DeckJet {
        q: q.clone(),
        sigma,
    })
}

pub struct CeoEngine {
    pub curve: SpectralCurve,
    memo: BTreeMap<(u32, u32), Arc<MultiDiff>>,
    filled_chi: i64,
}

impl CeoEngine {
    /// Refuses curves outside the classical regime: every key point must be
    /// a simple zero of dx with dy regular and nonvanishing there.
    pub fn new(curve: SpectralCurve) -> Result<Self, EngineError> {
        for q in &curve.keys {
            let cl = curve.classify(q);
            if cl.r != 2 {
                return Err(EngineError::NotSimpleZero(q.to_string()));
            }
            if cl.s != 1 {
                return Err(EngineError::HypothesisViolated(format!(
                    "dy is not regular nonvanishing at {q}"
                )));
            }
        }
        Ok(CeoEngine {
            curve,
            memo: BTreeMap::new(),
            filled_chi: 0,
        })
    }

    /// The recursion germ at q for the (g, n+1) cell, as a local jet with
    /// spectator-tensor coefficients (spectators labeled 1..n).
    pub fn germ(
        &self,
        q: &Point,
        g: u32,
        n: u32,
        order: i64,
    ) -> Result<TJet, EngineError> {
        let deck = deck(&self.curve, q, order)?;
        let sigma = &deck.sigma;
        let dxj = self.curve.dx.local_expand(q, order)?;
        let dyj = self.curve.dy.local_expand(q, order)?;
        // y(t) - y(sigma(t)) from dy only
        let y = dyj.primitive()?;
        let y_sigma = y.compose(sigma)?;
        let prefactor = y.sub(&y_sigma).mul(&dxj).invert()?;
        let mut core = TJet::zero(crate::jet::TRUNC_INF);
        // omega^{(g-1)}_{n+2}(z, sigma z, spectators)
        if g >= 1 {
            core = core.add(&self.pair_expansion(g - 1, n + 2, q, sigma, order)?);
        }
        // sum over stable splittings, (0,1) parts excluded
        for g1 in 0..=g {
            let g2 = g - g1;
            // distribute labeled spectators 1..n into I1/I2 by bitmask
            let full: u32 = if n == 0 { 0 } else { (1 << n) - 1 };
            for mask in 0..=full {
                let i1: Vec<u8> = (0..n as u8).filter(|b| mask & (1 << b) != 0).map(|b| b + 1).collect();
                let i2: Vec<u8> = (0..n as u8).filter(|b| mask & (1 << b) == 0).map(|b| b + 1).collect();
                if (g1, i1.len()) == (0, 0) || (g2, i2.len()) == (0, 0) {
                    continue;
                }
                let a = self.slot_expansion(g1, &i1, q, None, order)?;
                let b = self.slot_expansion(g2, &i2, q, Some(sigma), order)?;
                core = core.add(&a.mul(&b));
            }
        }
        Ok(core.mul_scalar_jet(&prefactor))
    }

    /// Expansion of omega^{(g)}_{|I|+1}(z or sigma(z), z_I) at q.
    fn slot_expansion(
        &self,
        g: u32,
        spect: &[u8],
        q: &Point,
        sigma: Option<&Jet>,
        order: i64,
    ) -> Result<TJet, EngineError> {
        let n = spect.len() as u32 + 1;
        let chi = 2 * g as i64 - 2 + n as i64;
        let jet = if (g, n) == (0, 2) {
            // B(z, z_j): expansion with the single spectator label
            crate::tensor::b_kernel_expansion(q, spect[0], order)
        } else if chi <= 0 {
            return Ok(TJet::zero(crate::jet::TRUNC_INF));
        } else {
            let md = self
                .memo
                .get(&(g, n))
                .ok_or_else(|| EngineError::MissingDependency(format!("ceo cell ({g},{n})")))?;
            // relabel expand_slot's 1..n to the requested spectator labels
            let base = md.expand_slot(0, q, order);
            relabel(&base, spect)
        };
        match sigma {
            None => Ok(jet),
            Some(s) => Ok(jet.compose_scalar(s)?.mul_scalar_jet(&s.derivative())),
        }
    }

    /// omega^{(g)}_{n}(z, sigma z, spectators 1..n-2) expanded at q.
    fn pair_expansion(
        &self,
        g: u32,
        n: u32,
        q: &Point,
        sigma: &Jet,
        order: i64,
    ) -> Result<TJet, EngineError> {
        let chi = 2 * g as i64 - 2 + n as i64;
        if (g, n) == (0, 2) {
            // B(t, sigma(t)) density: sigma'(t)/(t - sigma t)^2
            let diff = Jet::monomial(1, qi(1), order).sub(sigma);
            let b = sigma.derivative().mul(&diff.mul(&diff).invert()?);
            return Ok(tjet_from_scalar(&b));
        }
        if chi <= 0 {
            return Ok(TJet::zero(crate::jet::TRUNC_INF));
        }
        let md = self
            .memo
            .get(&(g, n))
            .ok_or_else(|| EngineError::MissingDependency(format!("ceo cell ({g},{n})")))?;
        // expand slot 0 at q (remaining labels 1..n-1), then compose slot 1
        // (label 1) with sigma and relabel the spectators down by one.
        let mut out = TJet::zero(order);
        for (key, f) in md.ordered_terms() {
            let j0 = crate::tensor::basis_jet_at(&key[0], q, order);
            let j1 = crate::tensor::basis_jet_at(&key[1], q, order);
            let j1s = {
                let t = tjet_from_scalar(&j1).compose_scalar(sigma)?;
                t.mul_scalar_jet(&sigma.derivative())
            };
            let mut spect = crate::tensor::Tensor::scalar(f);
            for (i, idx) in key.iter().enumerate().skip(2) {
                spect = spect.mul(&crate::tensor::Tensor::single(
                    (i - 1) as u8,
                    idx.clone(),
                    Q::one(),
                ));
            }
            let prod = j1s.mul_scalar_jet(&j0);
            for (e, c) in prod.terms() {
                out.add_term(e, c.mul(&spect));
            }
        }
        Ok(out)
    }

    pub fn fill(&mut self, chi_max: i64) -> Result<(), EngineError> {
        for chi in (self.filled_chi + 1)..=chi_max {
            for (g, n) in crate::engine::Engine::cells_at_level(chi) {
                let md = self.compute_cell(g, n)?;
                self.memo.insert((g, n), Arc::new(md));
            }
            self.filled_chi = chi;
        }
        Ok(())
    }

    pub fn compute(&mut self, g: u32, n: u32) -> Result<Arc<MultiDiff>, EngineError> {
        let chi = 2 * g as i64 - 2 + n as i64;
        if chi <= 0 {
            return Err(EngineError::MissingDependency(
                "unstable cells answered from distinguished entries".into(),
            ));
        }
        self.fill(chi)?;
        Ok(self.memo.get(&(g, n)).unwrap().clone())
    }

    fn compute_cell(&self, g: u32, n: u32) -> Result<MultiDiff, EngineError> {
        let chi = 2 * g as i64 - 2 + n as i64;
        let mut ordered: BTreeMap<Vec<PoleIdx>, Q> = BTreeMap::new();
        for q in &self.curve.keys.clone() {
            let cl = self.curve.classify(q);
            let order = order_guess(chi, cl.r, cl.s) * 2;
            let germ = self.germ(q, g, n - 1, order)?;
            let parts = project_principal(&germ, q)?;
            for (m, tensor) in parts {
                for (assign, val) in &tensor.entries {
                    let mut key: Vec<Option<PoleIdx>> = vec![None; n as usize];
                    key[0] = Some(PoleIdx::new(q.clone(), m));
                    for (slot, idx) in assign {
                        key[*slot as usize] = Some(idx.clone());
                    }
                    let key: Vec<PoleIdx> = key.into_iter().map(Option::unwrap).collect();
                    let cur = ordered.remove(&key).unwrap_or_else(Q::zero) + val;
                    if !cur.is_zero() {
                        ordered.insert(key, cur);
                    }
                }
            }
        }
        let (md, defect) = MultiDiff::from_ordered(g, n, &ordered);
        if !defect.is_zero() {
            return Err(EngineError::OrderDivergence(format!(
                "ceo symmetry defect in ({g},{n})"
            )));
        }
        Ok(md)
    }
}

fn relabel(jet: &TJet, labels: &[u8]) -> TJet {
    let mut out = TJet::zero(jet.trunc);
    for (e, t) in jet.terms() {
        let mut nt = crate::tensor::Tensor::zero();
        for (assign, v) in &t.entries {
            let mut na: Vec<(u8, PoleIdx)> = assign
                .iter()
                .map(|(s, idx)| (labels[(*s as usize) - 1], idx.clone()))
                .collect();
            na.sort_by_key(|(s, _)| *s);
            nt.add_entry(na, v.clone());
        }
        out.add_term(e, nt);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::parse_curve;
    use crate::num::qr;

    #[test]
    fn deck_examples() {
        // x = z^2/2: sigma = -z
        let c = parse_curve("dx = z dz; dy = dz; keys = [0]").unwrap();
        let d = deck(&c, &Point::Finite(Q::zero()), 8).unwrap();
        assert_eq!(d.sigma.coeff(1), qi(-1));
        assert!(d.sigma.coeff(2).is_zero());

        // x = z^2/2 + z^3/3: sigma = -z - (2/3)z^2 + O(z^3)
        let c = parse_curve("dx = z(1+z) dz; dy = dz; keys = [0]").unwrap();
        let d = deck(&c, &Point::Finite(Q::zero()), 8).unwrap();
        assert_eq!(d.sigma.coeff(1), qi(-1));
        assert_eq!(d.sigma.coeff(2), qr(-2, 3));

        // involution and x-invariance to the window
        let dxj = c.dx.local_expand(&Point::Finite(Q::zero()), 8).unwrap();
        let x = dxj.primitive().unwrap();
        let x_sigma = x.compose(&d.sigma).unwrap();
        assert!(x.sub(&x_sigma).truncate(x_sigma.trunc).is_zero());
        let invol = d.sigma.compose(&d.sigma).unwrap();
        let id = Jet::monomial(1, qi(1), invol.trunc);
        assert!(invol.sub(&id).is_zero());
    }

    #[test]
    fn deck_refuses_higher_zeros() {
        let c = parse_curve("dx = z^2 dz; dy = dz; keys = [0]").unwrap();
        assert!(matches!(
            deck(&c, &Point::Finite(Q::zero()), 6),
            Err(EngineError::NotSimpleZero(_))
        ));
    }

    #[test]
    fn airy_ceo_matches_known_values() {
        let c = parse_curve("dx = z dz; dy = dz; keys = [0]").unwrap();
        let mut e = CeoEngine::new(c).unwrap();
        let b0 = |k: u32| PoleIdx::new(Point::Finite(Q::zero()), k);
        let w = e.compute(1, 1).unwrap();
        assert_eq!(w.coefficient(&[b0(3)]), qr(1, 24));
        let w = e.compute(0, 3).unwrap();
        assert_eq!(w.coefficient(&[b0(1), b0(1), b0(1)]), qi(1));
        let w = e.compute(1, 2).unwrap();
        assert_eq!(w.coefficient(&[b0(1), b0(5)]), qr(1, 8));
        assert_eq!(w.coefficient(&[b0(3), b0(3)]), qr(1, 24));
    }

    #[test]
    fn ceo_refuses_singular_dy() {
        let c = parse_curve("dx = z dz; dy = z^-2 dz; keys = [0]").unwrap();
        assert!(CeoEngine::new(c).is_err());
    }
}
