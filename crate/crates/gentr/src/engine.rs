//! The generalized recursion engine: memoized (g,n) cells over the
//! Euler-characteristic DAG, with adaptive working orders and the
//! principal-part projection at key points.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::Zero;
use rayon::prelude::*;

use crate::builder::{order_guess, project_principal, Cell, CellSource, Side, WBuilder};
use crate::curve::{PointClassification, SpectralCurve};
use crate::error::EngineError;
use crate::forms::Point;
use crate::multidiff::MultiDiff;
use crate::num::Q;
use crate::tensor::{PoleIdx, TJet};

struct PureStore<'a> {
    memo: &'a BTreeMap<(u32, u32), Arc<MultiDiff>>,
}

impl<'a> CellSource for PureStore<'a> {
    fn get(&self, g: u32, m: u32, n: u32) -> Cell<'_> {
        assert_eq!(n, 0, "pure store queried with y-slots");
        if g == 0 && m == 2 {
            return Cell::BKernel(1);
        }
        let chi = 2 * g as i64 - 2 + m as i64;
        if chi <= 0 {
            return Cell::Zero;
        }
        match self.memo.get(&(g, m)) {
            Some(md) => Cell::Pure(md),
            None => panic!("missing dependency: cell ({g},{m})"),
        }
    }
}

pub struct Engine {
    pub curve: SpectralCurve,
    pub special: Vec<PointClassification>,
    memo: BTreeMap<(u32, u32), Arc<MultiDiff>>,
    /// accepted per-point principal-part jets, kept for oracle comparisons
    bars: BTreeMap<(u32, u32, Point), TJet>,
    filled_chi: i64,
    pub jobs: usize,
}

impl Engine {
    pub fn new(curve: SpectralCurve) -> Result<Self, EngineError> {
        let special = curve.special_points()?;
        Ok(Engine {
            curve,
            special,
            memo: BTreeMap::new(),
            bars: BTreeMap::new(),
            filled_chi: 0,
            jobs: 1,
        })
    }

    pub fn classification(&self, q: &Point) -> Option<&PointClassification> {
        self.special.iter().find(|c| c.point == *q)
    }

    /// Cells (g,n) at a given Euler level chi = 2g-2+n.
    pub fn cells_at_level(chi: i64) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for n in 1..=(chi + 2) {
            let rem = chi + 2 - n;
            if rem % 2 == 0 {
                out.push(((rem / 2) as u32, n as u32));
            }
        }
        out
    }

    /// Fill the memo through Euler characteristic `chi_max`.
    pub fn fill(&mut self, chi_max: i64) -> Result<(), EngineError> {
        for chi in (self.filled_chi + 1)..=chi_max {
            let cells = Self::cells_at_level(chi);
            let results: Vec<Result<CellResult, EngineError>> = if self.jobs > 1 {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(self.jobs)
                    .build()
                    .map_err(|e| EngineError::Parse(e.to_string()))?;
                pool.install(|| {
                    cells
                        .par_iter()
                        .map(|&(g, n)| self.compute_cell_adaptive(g, n))
                        .collect()
                })
            } else {
                cells
                    .iter()
                    .map(|&(g, n)| self.compute_cell_adaptive(g, n))
                    .collect()
            };
            for r in results {
                let r = r?;
                for (q, bar) in r.bars {
                    self.bars.insert((r.g, r.n, q), bar);
                }
                self.memo.insert((r.g, r.n), Arc::new(r.md));
            }
            self.filled_chi = chi;
        }
        Ok(())
    }

    /// The memoized differential; unstable cells are rejected upstream.
    pub fn compute(&mut self, g: u32, n: u32) -> Result<Arc<MultiDiff>, EngineError> {
        let chi = 2 * g as i64 - 2 + n as i64;
        if chi <= 0 {
            return Err(EngineError::MissingDependency(format!(
                "unstable cell ({g},{n}) is answered from the distinguished entries"
            )));
        }
        self.fill(chi)?;
        Ok(self.memo.get(&(g, n)).unwrap().clone())
    }

    pub fn get_memo(&self, g: u32, n: u32) -> Option<Arc<MultiDiff>> {
        self.memo.get(&(g, n)).cloned()
    }

    pub fn memo_cells(&self) -> impl Iterator<Item = (&(u32, u32), &Arc<MultiDiff>)> {
        self.memo.iter()
    }

    /// The accepted principal-part jet of omega-bar at a key point.
    pub fn omega_bar(&self, g: u32, n: u32, q: &Point) -> Option<&TJet> {
        self.bars.get(&(g, n, q.clone()))
    }

    /// Working order for a cell at a point, per the adaptive strategy.
    pub fn adaptive_order(&self, g: u32, n: u32, q: &Point) -> i64 {
        let cl = self.curve.classify(q);
        order_guess(2 * g as i64 - 2 + n as i64, cl.r, cl.s)
    }

    fn compute_cell_adaptive(&self, g: u32, n: u32) -> Result<CellResult, EngineError> {
        let mut escalation = 0u32;
        let mut factor = 1i64;
        loop {
            let attempt = self.compute_cell_fixed(g, n, factor, 0);
            let check = self.compute_cell_fixed(g, n, factor, 4);
            match (attempt, check) {
                (Ok(a), Ok(b)) if a.md == b.md => return Ok(a),
                (Err(e @ EngineError::ResidueNonZero(_)), _) => return Err(e),
                (_, Err(e @ EngineError::ResidueNonZero(_))) => return Err(e),
                _ => {
                    escalation += 1;
                    if escalation > 4 {
                        return Err(EngineError::OrderDivergence(format!(
                            "cell ({g},{n}) did not stabilize"
                        )));
                    }
                    factor *= 2;
                }
            }
        }
    }

    fn compute_cell_fixed(
        &self,
        g: u32,
        n: u32,
        order_factor: i64,
        order_bump: i64,
    ) -> Result<CellResult, EngineError> {
        let chi = 2 * g as i64 - 2 + n as i64;
        let store = PureStore { memo: &self.memo };
        let specs: Vec<u8> = (1..n as u8).collect();
        let mut ordered: BTreeMap<Vec<PoleIdx>, Q> = BTreeMap::new();
        let mut bars = Vec::new();
        for q in &self.curve.keys {
            let order = self.adaptive_order(g, n, q) * order_factor + order_bump;
            let mut b = WBuilder::new(&self.curve, Side::X, &store, q, order, chi + 1)?;
            b.max_input_weight = chi - 1;
            let bar = b.omega_bar(&specs, &[], chi)?;
            let parts = project_principal(&bar, q)?;
            for (m, tensor) in parts {
                for (assign, val) in &tensor.entries {
                    let mut key: Vec<Option<PoleIdx>> = vec![None; n as usize];
                    key[0] = Some(PoleIdx::new(q.clone(), m));
                    for (slot, idx) in assign {
                        key[*slot as usize] = Some(idx.clone());
                    }
                    let key: Vec<PoleIdx> = key
                        .into_iter()
                        .map(|k| {
                            k.ok_or_else(|| {
                                EngineError::MissingDependency(
                                    "unbound spectator slot in projection".into(),
                                )
                            })
                        })
                        .collect::<Result<_, _>>()?;
                    let cur = ordered.remove(&key).unwrap_or_else(Q::zero) + val;
                    if !cur.is_zero() {
                        ordered.insert(key, cur);
                    }
                }
            }
            bars.push((q.clone(), bar));
        }
        let (md, defect) = MultiDiff::from_ordered(g, n, &ordered);
        if !defect.is_zero() {
            return Err(EngineError::OrderDivergence(format!(
                "symmetry defect {defect:?} in cell ({g},{n})"
            )));
        }
        Ok(CellResult { g, n, md, bars })
    }

    /// Full u-layers of W_n^{(g)} at a key point: layer 0 is the memoized
    /// omega_{n+1} expanded locally, layers r >= 1 come from the builder.
    /// Used by the loop-equation checks.
    pub fn w_layers(
        &self,
        g: u32,
        n: u32,
        q: &Point,
        order: i64,
    ) -> Result<BTreeMap<i64, TJet>, EngineError> {
        let chi = 2 * g as i64 - 1 + n as i64;
        let store = PureStore { memo: &self.memo };
        let specs: Vec<u8> = (1..=n as u8).collect();
        let mut b = WBuilder::new(&self.curve, Side::X, &store, q, order, chi + 1)?;
        b.max_input_weight = chi - 1;
        let mut layers = b.wbar_layers(&specs, &[], chi)?;
        let next = self
            .memo
            .get(&(g, n + 1))
            .ok_or_else(|| EngineError::MissingDependency(format!("cell ({g},{})", n + 1)))?;
        let u0 = next.expand_slot(0, q, order);
        if !u0.is_zero() {
            layers.insert(0, u0);
        }
        Ok(layers)
    }
}

struct CellResult {
    g: u32,
    n: u32,
    md: MultiDiff,
    bars: Vec<(Point, TJet)>,
}

/// Convenience: run the engine on a curve and return all cells to chi_max.
pub fn compute_all(
    curve: &SpectralCurve,
    chi_max: i64,
    jobs: usize,
) -> Result<Engine, EngineError> {
    let mut e = Engine::new(curve.clone())?;
    e.jobs = jobs.max(1);
    e.fill(chi_max)?;
    Ok(e)
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
    fn airy_first_cells() {
        let c = parse_curve("dx = z dz; dy = dz; keys = [0]").unwrap();
        let mut e = Engine::new(c).unwrap();
        // omega_3^(0): f_{(0,1)^3} = 1
        let w = e.compute(0, 3).unwrap();
        assert_eq!(w.coefficient(&[b0(1), b0(1), b0(1)]), qi(1));
        assert_eq!(w.terms.len(), 1);
        // omega_1^(1): f_{(0,3)} = 1/24
        let w = e.compute(1, 1).unwrap();
        assert_eq!(w.coefficient(&[b0(3)]), qr(1, 24));
        assert_eq!(w.terms.len(), 1);
    }

    #[test]
    fn airy_chi_two_cells() {
        let c = parse_curve("dx = z dz; dy = dz; keys = [0]").unwrap();
        let mut e = Engine::new(c).unwrap();
        // omega_4^(0): <tau_0^3 tau_1> = 1: f_{1,1,1,3} = 1
        let w = e.compute(0, 4).unwrap();
        assert_eq!(w.coefficient(&[b0(1), b0(1), b0(1), b0(3)]), qi(1));
        // omega_2^(1): f_{1,5} = 1/8, f_{3,3} = 1/24
        let w = e.compute(1, 2).unwrap();
        assert_eq!(w.coefficient(&[b0(1), b0(5)]), qr(1, 8));
        assert_eq!(w.coefficient(&[b0(3), b0(3)]), qr(1, 24));
    }

    #[test]
    fn trivial_curve_zero_ladder() {
        // (z,z): no special points, empty keys: everything vanishes
        let c = parse_curve("dx = dz; dy = dz; keys = []").unwrap();
        let mut e = Engine::new(c).unwrap();
        for chi in 1..=3 {
            for (g, n) in Engine::cells_at_level(chi) {
                let w = e.compute(g, n).unwrap();
                assert!(w.is_zero(), "cell ({g},{n})");
            }
        }
    }

    #[test]
    fn symmetry_holds_on_engine_output() {
        let c = parse_curve("dx = z dz; dy = dz; keys = [0]").unwrap();
        let mut e = Engine::new(c).unwrap();
        for chi in 1..=3 {
            for (g, n) in Engine::cells_at_level(chi) {
                let w = e.compute(g, n).unwrap();
                assert_eq!(w.symmetry_defect(), qi(0), "cell ({g},{n})");
            }
        }
    }

    #[test]
    fn u0_layer_reproduces_next_cell() {
        let c = parse_curve("dx = z dz; dy = dz; keys = [0]").unwrap();
        let mut e = Engine::new(c).unwrap();
        e.fill(3).unwrap();
        // [u^0] W_1^(1) must equal omega_2^(1) expanded at the key point
        let q = Point::Finite(Q::zero());
        let layers = e.w_layers(1, 1, &q, 24).unwrap();
        let direct = e.get_memo(1, 2).unwrap().expand_slot(0, &q, 24);
        let diff = layers.get(&0).unwrap().sub(&direct);
        assert!(diff.is_zero());
    }
}
