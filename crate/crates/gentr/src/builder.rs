//! Shared jet machinery for the extended differentials W_n at a point:
//! the T-blocks, their partition sums, the exponential prefactor, and the
//! principal-part extraction that both the recursion engine and the duality
//! transform project through.
//!
//! Grading: a cell of weight w = 2g-2+(slots) enters the hbar ladder at
//! h = w + (number of active ops) + 2*(S-corrections); u-degree tracks the
//! op count the same way. The dx/(u hbar) prefactor is applied at the very
//! end as an index shift.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};

use crate::curve::SpectralCurve;
use crate::error::EngineError;
use crate::forms::Point;
use crate::jet::{Jet, TRUNC_INF};
use crate::multidiff::{distinct_permutations, MultiDiff};
use crate::num::{factorial, qi, s_coeff, Q};
use crate::ratfun::RatFun;
use crate::tensor::{
    basis_jet_at, regularized_b, tjet_from_scalar, PoleIdx, Tensor, TJet,
};

/// Which 1-form drives the active ops (the engine and the forward transform
/// use X; the inverse transform swaps the roles).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Side {
    X,
    Y,
}

/// A stable cell of the ladder, or a distinguished kernel.
pub enum Cell<'a> {
    Zero,
    /// scalar multiple of B
    BKernel(i64),
    Pure(&'a MultiDiff),
}

impl<'a> Cell<'a> {
    /// Sorted terms as (x-group, y-group, coeff).
    fn sorted_terms(&self) -> Vec<(Vec<PoleIdx>, Vec<PoleIdx>, Q)> {
        match self {
            Cell::Zero | Cell::BKernel(_) => Vec::new(),
            Cell::Pure(md) => md
                .terms
                .iter()
                .map(|(k, v)| (k.clone(), Vec::new(), v.clone()))
                .collect(),
        }
    }
}

/// Source of already-computed cells, indexed by (g, x-slots, y-slots).
pub trait CellSource {
    fn get(&self, g: u32, m: u32, n: u32) -> Cell<'_>;
}

/// Graded series in (hbar, u) with jet values; terms above the hbar cutoff
/// are dropped eagerly.
#[derive(Clone)]
pub struct Graded {
    pub hmax: i64,
    pub terms: BTreeMap<(i64, i64), TJet>,
}

impl Graded {
    pub fn zero(hmax: i64) -> Self {
        Graded {
            hmax,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(hmax: i64) -> Self {
        let mut g = Graded::zero(hmax);
        g.add_term(0, 0, tjet_from_scalar(&Jet::one(TRUNC_INF)));
        g
    }

    pub fn add_term(&mut self, h: i64, d: i64, jet: TJet) {
        if h > self.hmax || jet.is_zero() {
            return;
        }
        match self.terms.remove(&(h, d)) {
            Some(cur) => {
                let sum = cur.add(&jet);
                if !sum.is_zero() {
                    self.terms.insert((h, d), sum);
                }
            }
            None => {
                self.terms.insert((h, d), jet);
            }
        }
    }

    pub fn add(&self, other: &Graded) -> Graded {
        let mut out = Graded::zero(self.hmax.min(other.hmax));
        for ((h, d), j) in &self.terms {
            out.add_term(*h, *d, j.clone());
        }
        for ((h, d), j) in &other.terms {
            out.add_term(*h, *d, j.clone());
        }
        out
    }

    pub fn mul(&self, other: &Graded) -> Graded {
        let mut out = Graded::zero(self.hmax.min(other.hmax));
        for ((h1, d1), j1) in &self.terms {
            for ((h2, d2), j2) in &other.terms {
                if h1 + h2 > out.hmax {
                    continue;
                }
                out.add_term(h1 + h2, d1 + d2, j1.mul(j2));
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// exp of a series with all terms at h >= 1.
    pub fn exp(&self) -> Graded {
        debug_assert!(self.terms.keys().all(|(h, _)| *h >= 1));
        let mut out = Graded::one(self.hmax);
        let mut pow = Graded::one(self.hmax);
        let mut k = 0u64;
        loop {
            k += 1;
            if k as i64 > self.hmax {
                break;
            }
            pow = pow.mul(self);
            if pow.is_zero() {
                break;
            }
            let mut scaled = Graded::zero(self.hmax);
            let inv = factorial(k).recip();
            for ((h, d), j) in &pow.terms {
                scaled.add_term(*h, *d, j.scale(&inv));
            }
            out = out.add(&scaled);
        }
        out
    }
}

/// Per-point expansion context: densities, their inverses, op ladders.
pub struct PointCtx {
    pub q: Point,
    pub order: i64,
    /// density jet of the op-side form (dx for Side::X)
    pub d_active: Jet,
    /// density jet of the passive form (dy for Side::X)
    pub d_passive: Jet,
    inv_active: Jet,
    basis_ladders: HashMap<PoleIdx, Vec<Jet>>,
    mono_ladders: Vec<Vec<Jet>>, // [a][e]: s_{2a} (d/dmu)^{2a} (t^e / d_active)
    amax: usize,
}

impl PointCtx {
    pub fn new(
        curve: &SpectralCurve,
        side: Side,
        q: &Point,
        order: i64,
        hmax: i64,
    ) -> Result<Self, EngineError> {
        let (fa, fp) = match side {
            Side::X => (&curve.dx, &curve.dy),
            Side::Y => (&curve.dy, &curve.dx),
        };
        let d_active = fa.local_expand(q, order)?;
        let d_passive = fp.local_expand(q, order)?;
        let inv_active = d_active.invert()?;
        let amax = ((hmax - 1).max(0) / 2) as usize;
        // ladders for the pure monomials t^e, reused for B expansions
        let mut mono_ladders = Vec::with_capacity(amax + 1);
        let mut cur: Vec<Jet> = (0..order.max(1))
            .map(|e| inv_active.shift(e))
            .collect();
        mono_ladders.push(cur.clone());
        for a in 1..=amax {
            for j in cur.iter_mut() {
                for _ in 0..2 {
                    *j = j.derivative().mul(&inv_active);
                }
            }
            let sc = s_coeff(a as u64);
            mono_ladders.push(cur.iter().map(|j| j.scale(&sc)).collect());
        }
        Ok(PointCtx {
            q: q.clone(),
            order,
            d_active,
            d_passive,
            inv_active,
            basis_ladders: HashMap::new(),
            mono_ladders,
            amax,
        })
    }

    /// Ladder for a basis form: entry a = s_{2a} (d/dmu)^{2a}(b / d_active).
    fn basis_ladder(&mut self, idx: &PoleIdx) -> &Vec<Jet> {
        if !self.basis_ladders.contains_key(idx) {
            let base = basis_jet_at(idx, &self.q, self.order);
            let mut lad = Vec::with_capacity(self.amax + 1);
            let mut cur = base.mul(&self.inv_active);
            lad.push(cur.clone());
            for a in 1..=self.amax {
                for _ in 0..2 {
                    cur = cur.derivative().mul(&self.inv_active);
                }
                lad.push(cur.scale(&s_coeff(a as u64)));
            }
            self.basis_ladders.insert(idx.clone(), lad);
        }
        self.basis_ladders.get(idx).unwrap()
    }

    /// Ladder entry a of the B(z~, spectator) expansion, as a TJet.
    fn bspec_ladder(&self, a: usize, spectator: u8, sign: i64) -> TJet {
        let mut out = TJet::zero(self.mono_ladders[a][0].trunc);
        for (e, jet) in self.mono_ladders[a].iter().enumerate() {
            let t = Tensor::single(
                spectator,
                PoleIdx::new(self.q.clone(), (e + 1) as u32),
                qi(-sign),
            );
            for (je, jc) in jet.terms() {
                out.add_term(je, t.scale(jc));
            }
        }
        out
    }
}

/// Builder for the graded prefactor-stripped product
/// `E(T_0) * sum_partitions prod T_blocks` at one point.
pub struct WBuilder<'a> {
    pub curve: &'a SpectralCurve,
    pub side: Side,
    pub store: &'a dyn CellSource,
    pub hmax: i64,
    /// cells of weight above this are skipped; sound for the r >= 1 layers,
    /// which only reach weights <= hmax - 2 (the u^0 layer is served from
    /// the store directly)
    pub max_input_weight: i64,
    pub ctx: PointCtx,
    /// derivatives of the passive/active density ratio:
    /// entry j = (d/dmu)^{j+1} of the passive primitive (as rational fn)
    ratio_derivs: Vec<RatFun>,
}

impl<'a> WBuilder<'a> {
    pub fn new(
        curve: &'a SpectralCurve,
        side: Side,
        store: &'a dyn CellSource,
        q: &Point,
        order: i64,
        hmax: i64,
    ) -> Result<Self, EngineError> {
        let ctx = PointCtx::new(curve, side, q, order, hmax)?;
        let (fa, fp) = match side {
            Side::X => (&curve.dx, &curve.dy),
            Side::Y => (&curve.dy, &curve.dx),
        };
        // (S(u hbar d/dmu) - 1) applied to the passive primitive needs
        // (d/dmu)^{2i} of it, i.e. (d/dmu)^{2i-1} of the rational ratio.
        let ratio = fp.density.div(&fa.density)?;
        let mut ratio_derivs = vec![ratio.clone()];
        for _ in 1..(hmax.max(1) as usize) {
            let prev = ratio_derivs.last().unwrap();
            ratio_derivs.push(prev.derivative().div(&fa.density)?);
        }
        Ok(WBuilder {
            curve,
            side,
            store,
            hmax,
            max_input_weight: hmax - 2,
            ctx,
            ratio_derivs,
        })
    }

    /// The ratio-derivative jets need the w-chart at infinity.
    fn ratio_deriv_jet(&self, j: usize) -> Result<Jet, EngineError> {
        let f = &self.ratio_derivs[j];
        match &self.ctx.q {
            Point::Finite(a) => crate::forms::ratfun_jet_at(f, a, self.ctx.order),
            Point::Inf => crate::forms::ratfun_jet_at(
                &f.subst_inv(),
                &Q::zero(),
                self.ctx.order,
            ),
        }
    }

    /// T-block for the given spectator labels.
    pub fn build_t(&mut self, xs: &[u8], ys: &[u8]) -> Result<Graded, EngineError> {
        let m = xs.len() as u32;
        let n = ys.len() as u32;
        let mut out = Graded::zero(self.hmax);
        if m == 0 && n == 0 {
            // u (S(u hbar d) - 1) applied to the passive primitive
            let mut i = 1i64;
            while 2 * i <= self.hmax {
                let jet = self.ratio_deriv_jet((2 * i - 1) as usize)?;
                out.add_term(
                    2 * i,
                    2 * i + 1,
                    tjet_from_scalar(&jet.scale(&s_coeff(i as u64))),
                );
                i += 1;
            }
        }
        for k in 1u32..=(self.hmax as u32) {
            let mut gprime = 0u32;
            loop {
                let w = 2 * gprime as i64 - 2 + (k + m + n) as i64;
                if w + k as i64 > self.hmax {
                    break;
                }
                if w <= self.max_input_weight && !(gprime == 0 && (k + m + n) == 1) {
                    self.consume_cell(&mut out, gprime, k, xs, ys, w)?;
                }
                gprime += 1;
            }
        }
        Ok(out)
    }

    fn consume_cell(
        &mut self,
        out: &mut Graded,
        g: u32,
        k: u32,
        xs: &[u8],
        ys: &[u8],
        w: i64,
    ) -> Result<(), EngineError> {
        let m = xs.len() as u32;
        let n = ys.len() as u32;
        match self.store.get(g, k + m, n) {
            Cell::Zero => Ok(()),
            Cell::BKernel(sign) => {
                if k == 2 && m == 0 && n == 0 {
                    self.add_diagonal_terms(out, sign)
                } else if k == 1 && m + n == 1 {
                    let spec = if m == 1 { xs[0] } else { ys[0] };
                    let amax = ((self.hmax - 1).max(0) / 2) as usize;
                    for a in 0..=amax {
                        let h = 2 * a as i64 + 1 + w;
                        if h > self.hmax {
                            break;
                        }
                        out.add_term(h, 2 * a as i64 + 1, self.ctx.bspec_ladder(a, spec, sign));
                    }
                    Ok(())
                } else {
                    Err(EngineError::MissingDependency(format!(
                        "kernel cell consumed with unexpected split k={k}, m={m}, n={n}"
                    )))
                }
            }
            cell @ Cell::Pure(_) => {
                let terms = cell.sorted_terms();
                let inv_kfact = factorial(k as u64).recip();
                for (xs_t, ys_t, f) in terms {
                    debug_assert_eq!(xs_t.len() as u32, k + m);
                    debug_assert_eq!(ys_t.len() as u32, n);
                    let coeff = &f * &inv_kfact;
                    for ysp in distinct_permutations(&ys_t) {
                        let mut spect = Tensor::scalar(Q::one());
                        for (j, idx) in ysp.iter().enumerate() {
                            spect = spect.mul(&Tensor::single(ys[j], idx.clone(), Q::one()));
                        }
                        for xsp in distinct_permutations(&xs_t) {
                            let mut full = spect.clone();
                            for (j, idx) in xsp[k as usize..].iter().enumerate() {
                                full =
                                    full.mul(&Tensor::single(xs[j], idx.clone(), Q::one()));
                            }
                            self.accumulate_actives(
                                out,
                                &xsp[..k as usize],
                                w,
                                &full.scale(&coeff),
                            )?;
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// Product over active slots of `sum_a (u hbar)^{2a+1} ladder[a]`,
    /// scaled by the spectator tensor, accumulated at the cell weight.
    fn accumulate_actives(
        &mut self,
        out: &mut Graded,
        actives: &[PoleIdx],
        w: i64,
        spect: &Tensor,
    ) -> Result<(), EngineError> {
        if spect.is_zero() {
            return Ok(());
        }
        let k = actives.len() as i64;
        let budget = self.hmax - w - k;
        if budget < 0 {
            return Ok(());
        }
        let mut acc: BTreeMap<i64, Jet> = BTreeMap::new();
        acc.insert(0, Jet::one(TRUNC_INF));
        for idx in actives {
            let lad = self.ctx.basis_ladder(idx).clone();
            let mut next: BTreeMap<i64, Jet> = BTreeMap::new();
            for (extra, jet) in &acc {
                for (a, lj) in lad.iter().enumerate() {
                    let e2 = extra + 2 * a as i64;
                    if e2 > budget {
                        break;
                    }
                    let p = jet.mul(lj);
                    next.entry(e2)
                        .and_modify(|c| *c = c.add(&p))
                        .or_insert(p);
                }
            }
            acc = next;
        }
        for (extra, jet) in acc {
            let h = w + k + extra;
            let d = k + extra;
            let mut tj = TJet::zero(jet.trunc);
            for (e, c) in jet.terms() {
                tj.add_term(e, spect.scale(c));
            }
            out.add_term(h, d, tj);
        }
        Ok(())
    }

    /// The regularized-diagonal contribution of the k=2 kernel cell:
    /// `(sign/2) sum_{a,b} s_{2a} s_{2b} (u hbar)^{2a+2b+2}
    ///  [op1^{2a} op2^{2b}] (B~/dmu1 dmu2) |diag`.
    fn add_diagonal_terms(&mut self, out: &mut Graded, sign: i64) -> Result<(), EngineError> {
        let amax = ((self.hmax - 2).max(0) / 2) as usize;
        let d_trunc = 2 * amax as i64 + 3;
        let bt = regularized_b(&self.ctx.d_active, d_trunc + 2)?;
        let inv = self.ctx.inv_active.clone();
        // divide by dmu(t2), then chain (d/dmu2)^{2b}
        let mut v2 = bt.mul_f2(&inv);
        let mut bstage = Vec::with_capacity(amax + 1);
        bstage.push(v2.clone());
        for _ in 1..=amax {
            for _ in 0..2 {
                v2 = v2.deriv_2().mul_f2(&inv);
            }
            bstage.push(v2.clone());
        }
        for (b, stage_b) in bstage.iter().enumerate() {
            // divide by dmu(t1), then chain (d/dmu1)^{2a}
            let mut v1 = stage_b.mul_f1(&inv);
            for a in 0..=amax {
                if a > 0 {
                    for _ in 0..2 {
                        v1 = v1.deriv_1().mul_f1(&inv);
                    }
                }
                let h = 2 * (a + b) as i64 + 2;
                if h > self.hmax {
                    break;
                }
                let jet = v1
                    .diag()
                    .scale(&(s_coeff(a as u64) * s_coeff(b as u64) * crate::num::qr(sign, 2)));
                out.add_term(h, h, tjet_from_scalar(&jet));
            }
        }
        Ok(())
    }

    /// Full graded product `exp(T_0) * sum_partitions prod T_J` for the
    /// given spectator labels ((side, label) pairs; labels unique).
    pub fn graded_product(
        &mut self,
        x_specs: &[u8],
        y_specs: &[u8],
    ) -> Result<Graded, EngineError> {
        let t0 = self.build_t(&[], &[])?;
        let e = t0.exp();
        let all: Vec<(Side, u8)> = x_specs
            .iter()
            .map(|l| (Side::X, *l))
            .chain(y_specs.iter().map(|l| (Side::Y, *l)))
            .collect();
        let nn = all.len();
        if nn == 0 {
            return Ok(e);
        }
        // T per nonempty subset
        let full: usize = (1 << nn) - 1;
        let mut t_cache: Vec<Option<Graded>> = vec![None; full + 1];
        for mask in 1..=full {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (i, (side, label)) in all.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    match side {
                        Side::X => xs.push(*label),
                        Side::Y => ys.push(*label),
                    }
                }
            }
            t_cache[mask] = Some(self.build_t(&xs, &ys)?);
        }
        // partition sum by dynamic programming over subsets
        let mut p_cache: Vec<Option<Graded>> = vec![None; full + 1];
        p_cache[0] = Some(Graded::one(self.hmax));
        for mask in 1..=full {
            let low = mask & mask.wrapping_neg();
            let rest = mask & !low;
            let mut acc = Graded::zero(self.hmax);
            // submasks of rest, each joined with the low bit
            let mut sub = rest;
            loop {
                let block = sub | low;
                let t = t_cache[block].as_ref().unwrap();
                if !t.is_zero() {
                    let p = p_cache[mask & !block].as_ref().unwrap();
                    if !p.is_zero() {
                        acc = acc.add(&t.mul(p));
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
            p_cache[mask] = Some(acc);
        }
        Ok(e.mul(p_cache[full].as_ref().unwrap()))
    }

    /// The positive-u layers of W at hbar layer `chi`:
    /// `Wbar[r] = d_active * G[(chi+1, r+1)]`, r >= 1.
    pub fn wbar_layers(
        &mut self,
        x_specs: &[u8],
        y_specs: &[u8],
        chi: i64,
    ) -> Result<BTreeMap<i64, TJet>, EngineError> {
        let g = self.graded_product(x_specs, y_specs)?;
        let mut out = BTreeMap::new();
        for ((h, d), jet) in &g.terms {
            if *h == chi + 1 && *d >= 2 {
                let w = jet.mul_scalar_jet(&self.ctx.d_active);
                if !w.is_zero() {
                    out.insert(d - 1, w);
                }
            }
        }
        // u-degree bound: [u^r] Wbar vanishes for r > 2 chi + 2
        for r in out.keys() {
            if *r > 2 * chi + 2 {
                return Err(EngineError::OrderDivergence(format!(
                    "u-degree bound violated: r={r} at chi={chi}"
                )));
            }
        }
        Ok(out)
    }

    /// `-sum_{r>=1} (-d 1/dmu_passive)^r [u^r] Wbar` as a jet at the point.
    pub fn omega_bar(
        &mut self,
        x_specs: &[u8],
        y_specs: &[u8],
        chi: i64,
    ) -> Result<TJet, EngineError> {
        let wbar = self.wbar_layers(x_specs, y_specs, chi)?;
        let mut bar = TJet::zero(TRUNC_INF);
        for (r, jet) in wbar {
            let mut v = jet;
            for _ in 0..r {
                v = v.div_scalar_jet(&self.ctx.d_passive)?.derivative();
            }
            let sign = if r % 2 == 1 { qi(1) } else { qi(-1) };
            bar = bar.add(&v.scale(&sign));
        }
        Ok(bar)
    }
}

/// Principal part of a zero-residue jet as basis data: pairs (m, tensor)
/// meaning coefficient tensor on `b_{q,m}`.
pub fn project_principal(bar: &TJet, q: &Point) -> Result<Vec<(u32, Tensor)>, EngineError> {
    if bar.trunc < 0 {
        return Err(EngineError::Precision(format!(
            "principal-part window insufficient at {q}: O(t^{})",
            bar.trunc
        )));
    }
    let res = bar.coeff(-1);
    if !res.is_zero() {
        return Err(EngineError::ResidueNonZero(format!(
            "residue at {q} is {:?}",
            res
        )));
    }
    let mut out = Vec::new();
    for (e, c) in bar.terms() {
        if e <= -2 {
            let m = (-e - 1) as u32;
            out.push((m, c.scale(&crate::num::qr(-1, m as i64))));
        }
    }
    Ok(out)
}

/// Spec'd initial working order for a cell at a point with local orders (r,s).
pub fn order_guess(chi: i64, r: i64, s: i64) -> i64 {
    chi.max(0) * (r.abs() + s.abs() + 2) + r.abs() + s.abs() + 4
}
