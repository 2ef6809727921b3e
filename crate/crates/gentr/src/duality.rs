//! The x-y duality transform and its inverse via the two-index induction on
//! mixed differentials, computed over exact global rational functions (the
//! intermediate cells carry cross-diagonal poles, so they live as factored
//! multivariate rationals rather than pole-basis tensors), plus the
//! closed-form evaluation for trivial duals and the log-shifted dual form.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::curve::SpectralCurve;
use crate::engine::Engine;
use crate::error::EngineError;
use crate::forms::Point;
use crate::frat::{lift_ratfun, Dict, FRat, Factor};
use crate::mpoly::{MPoly, MRat};
use crate::multidiff::MultiDiff;
use crate::num::{factorial, inv_s_coeffs, qi, qr, s_coeff, Q};
use crate::poly::Poly;
use crate::ratfun::RatFun;
use crate::tensor::PoleIdx;

/// A mixed cell of the induction: m x-side slots (variables 0..m), n y-side
/// slots (variables m..m+n), one hbar layer (fixed genus), as an exact
/// rational density.
#[derive(Clone)]
pub struct MixedCell {
    pub g: u32,
    pub m: u32,
    pub n: u32,
    pub value: FRat,
}

/// Graded series in (hbar, u) with rational-density values.
#[derive(Clone)]
struct GFRat {
    nv: usize,
    hmax: i64,
    terms: BTreeMap<(i64, i64), FRat>,
}

impl GFRat {
    fn zero(nv: usize, hmax: i64) -> Self {
        GFRat {
            nv,
            hmax,
            terms: BTreeMap::new(),
        }
    }

    fn one(nv: usize, hmax: i64) -> Self {
        let mut s = GFRat::zero(nv, hmax);
        s.terms
            .insert((0, 0), FRat::constant(nv, Q::one()));
        s
    }

    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, h: i64, d: i64, v: FRat, dict: &Dict) {
        if h > self.hmax || v.is_zero() {
            return;
        }
        match self.terms.remove(&(h, d)) {
            Some(cur) => {
                let s = cur.add(&v, dict);
                if !s.is_zero() {
                    self.terms.insert((h, d), s);
                }
            }
            None => {
                self.terms.insert((h, d), v);
            }
        }
    }

    fn add(&self, other: &GFRat, dict: &Dict) -> GFRat {
        let mut out = self.clone();
        for ((h, d), v) in &other.terms {
            out.add_term(*h, *d, v.clone(), dict);
        }
        out
    }

    fn mul(&self, other: &GFRat, dict: &Dict) -> GFRat {
        let mut out = GFRat::zero(self.nv, self.hmax.min(other.hmax));
        for ((h1, d1), v1) in &self.terms {
            for ((h2, d2), v2) in &other.terms {
                if h1 + h2 > out.hmax {
                    continue;
                }
                out.add_term(h1 + h2, d1 + d2, v1.mul(v2), dict);
            }
        }
        out
    }

    fn exp(&self, dict: &Dict) -> GFRat {
        debug_assert!(self.terms.keys().all(|(h, _)| *h >= 1));
        let mut out = GFRat::one(self.nv, self.hmax);
        let mut pow = GFRat::one(self.nv, self.hmax);
        for k in 1..=(self.hmax.max(0) as u64) {
            pow = pow.mul(self, dict);
            if pow.is_zero() {
                break;
            }
            let inv = factorial(k).recip();
            let mut scaled = GFRat::zero(self.nv, self.hmax);
            for ((h, d), v) in &pow.terms {
                scaled.add_term(*h, *d, v.scale(&inv), dict);
            }
            out = out.add(&scaled, dict);
        }
        out
    }
}

/// The mixed ladder of one transform direction over rational densities.
pub struct RatLadder {
    /// curve as seen by the transform (the active side is dx)
    pub curve: SpectralCurve,
    pub chi_max: i64,
    pub dict: Dict,
    pub cells: BTreeMap<(u32, u32, u32), FRat>,
    /// ratio derivatives (d/dx)^{j+1} of the passive primitive, rational
    ratio_derivs: Vec<RatFun>,
    /// regularized-kernel diagonals G_{ab}(z), rational
    diag_ops: Vec<Vec<RatFun>>,
}

impl RatLadder {
    pub fn run(
        curve: &SpectralCurve,
        seeds: &BTreeMap<(u32, u32), MultiDiff>,
        chi_max: i64,
    ) -> Result<Self, EngineError> {
        let dict = Dict::default();
        let hmax = chi_max + 1;
        let ratio = curve.dy.density.div(&curve.dx.density)?;
        let mut ratio_derivs = vec![ratio];
        for _ in 1..(hmax.max(1) as usize) {
            let prev = ratio_derivs.last().unwrap();
            ratio_derivs.push(prev.derivative().div(&curve.dx.density)?);
        }
        let amax = ((hmax - 2).max(0) / 2) as usize;
        let diag_ops = regularized_diag_ops(&curve.dx.density, amax)?;
        let mut ladder = RatLadder {
            curve: curve.clone(),
            chi_max,
            dict,
            cells: BTreeMap::new(),
            ratio_derivs,
            diag_ops,
        };
        // seed level n = 0 from the pure tensors
        for (&(g, m), md) in seeds {
            let chi = 2 * g as i64 - 2 + m as i64;
            if chi >= 1 && chi <= chi_max {
                let f = tensor_frat(md, &mut ladder.dict);
                ladder.cells.insert((g, m, 0), f);
            }
        }
        for level in 1..=(chi_max + 2) {
            let n_new = level as u32;
            let mut targets = Vec::new();
            for g in 0u32.. {
                let base = 2 * g as i64 - 2 + n_new as i64;
                if base > chi_max {
                    break;
                }
                for m in 0u32.. {
                    let chi = base + m as i64;
                    if chi > chi_max {
                        break;
                    }
                    if chi >= 1 {
                        targets.push((g, m));
                    }
                }
            }
            for (g, m) in targets {
                let cell = ladder.compute_cell(g, m, n_new)?;
                ladder.cells.insert((g, m, n_new), cell);
            }
        }
        Ok(ladder)
    }

    /// omega_{m, n_new}^{(g)} from W_{m, n_new - 1}.
    fn compute_cell(&mut self, g: u32, m: u32, n_new: u32) -> Result<FRat, EngineError> {
        let nu = n_new - 1;
        let chi = 2 * g as i64 - 2 + (m + n_new) as i64;
        let spect = (m + nu) as usize;
        // layout while building W: var 0 = z, spectators 1..=spect
        let wbar = self.wbar_layers(m, nu, chi)?;
        // A' = -sum_{r>=1} (-d 1/dy)^r [u^r] Wbar
        let nv = 1 + spect;
        let mut a = FRat::zero(nv);
        let inv_dy = {
            let f = self.curve.dy.density.recip()?;
            lift_ratfun(&f, nv, 0, &mut self.dict)
        };
        for (r, w) in wbar {
            let mut v = w;
            for _ in 0..r {
                v = v.mul(&inv_dy).derivative(0, &self.dict);
            }
            let sign = if r % 2 == 1 { qi(1) } else { qi(-1) };
            a = a.add(&v.scale(&sign), &self.dict);
        }
        // relabel into the cell layout: z becomes the first y-slot
        let mut map = vec![0usize; nv];
        map[0] = m as usize;
        for i in 1..=(m as usize) {
            map[i] = i - 1;
        }
        for j in 1..=(nu as usize) {
            map[m as usize + j] = m as usize + j;
        }
        let mut out = a.remap(&map, spect + 1)?;
        // r = 0 layer: -omega_{m+1, nu} with the last x-slot read as the new y
        let chi_src = 2 * g as i64 - 2 + (m + 1 + nu) as i64;
        if chi_src >= 1 {
            let src = self.cells.get(&(g, m + 1, nu)).ok_or_else(|| {
                EngineError::MissingDependency(format!("mixed cell ({g},{},{nu})", m + 1))
            })?;
            // identical variable layout: x-slots 0..m, moved slot at m, ys after
            out = out.sub(src, &self.dict);
        } else if g == 0 && m + 1 + nu == 2 {
            // the source is a distinguished kernel cell: (2,0) -> B or (1,1) -> -B
            let sign = if (m + 1, nu) == (1, 1) { qi(1) } else { qi(-1) };
            let b = FRat::constant(2, sign)
                .div_factor(Factor::Diff(0, 1))
                .div_factor(Factor::Diff(0, 1));
            out = out.add(&b, &self.dict);
        }
        out.reduce(&self.dict);
        Ok(out)
    }

    /// The positive-u layers of W_{m,nu} at hbar layer chi (one genus layer).
    fn wbar_layers(
        &mut self,
        m: u32,
        nu: u32,
        chi: i64,
    ) -> Result<BTreeMap<i64, FRat>, EngineError> {
        let spect = (m + nu) as usize;
        let nv = 1 + spect;
        let hmax = chi + 1;
        let t0 = self.build_t(m, nu, &[], &[], hmax)?;
        let e = t0.exp(&self.dict);
        // subsets of the spectator labels 1..=spect
        let full: usize = (1usize << spect).saturating_sub(1);
        let mut t_cache: Vec<Option<GFRat>> = vec![None; full + 1];
        for mask in 1..=full {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for i in 0..spect {
                if mask & (1 << i) != 0 {
                    let label = (i + 1) as u8;
                    if (i as u32) < m {
                        xs.push(label);
                    } else {
                        ys.push(label);
                    }
                }
            }
            t_cache[mask] = Some(self.build_t(m, nu, &xs, &ys, hmax)?);
        }
        let mut p_cache: Vec<Option<GFRat>> = vec![None; full + 1];
        p_cache[0] = Some(GFRat::one(nv, hmax));
        for mask in 1..=full {
            let low = mask & mask.wrapping_neg();
            let rest = mask & !low;
            let mut acc = GFRat::zero(nv, hmax);
            let mut sub = rest;
            loop {
                let block = sub | low;
                let t = t_cache[block].as_ref().unwrap();
                if !t.is_zero() {
                    let p = p_cache[mask & !block].as_ref().unwrap();
                    if !p.is_zero() {
                        acc = acc.add(&t.mul(p, &self.dict), &self.dict);
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
            p_cache[mask] = Some(acc);
        }
        let g = e.mul(p_cache[full].as_ref().unwrap(), &self.dict);
        let dx = lift_ratfun(&self.curve.dx.density, nv, 0, &mut self.dict);
        let mut out = BTreeMap::new();
        for ((h, d), v) in &g.terms {
            if *h == chi + 1 && *d >= 2 {
                let w = v.mul(&dx);
                if !w.is_zero() {
                    let cur = out.remove(&(d - 1)).unwrap_or_else(|| FRat::zero(nv));
                    out.insert(d - 1, cur.add(&w, &self.dict));
                }
            }
        }
        Ok(out)
    }

    /// T-block with the given spectator labels (labels are variable indices
    /// in the 1..=m+nu layout; xs on the x side, ys on the y side).
    fn build_t(
        &mut self,
        m_total: u32,
        nu_total: u32,
        xs: &[u8],
        ys: &[u8],
        hmax: i64,
    ) -> Result<GFRat, EngineError> {
        let spect = (m_total + nu_total) as usize;
        let nv = 1 + spect;
        let m = xs.len() as u32;
        let n = ys.len() as u32;
        let mut out = GFRat::zero(nv, hmax);
        if m == 0 && n == 0 {
            // u (S(u hbar d/dx) - 1) y  and the regularized-kernel diagonal
            let mut i = 1i64;
            while 2 * i <= hmax {
                let jet = lift_ratfun(
                    &self.ratio_derivs[(2 * i - 1) as usize].clone(),
                    nv,
                    0,
                    &mut self.dict,
                );
                out.add_term(2 * i, 2 * i + 1, jet.scale(&s_coeff(i as u64)), &self.dict);
                i += 1;
            }
            let amax = self.diag_ops.len().saturating_sub(1);
            for a in 0..=amax {
                for b in 0..=amax {
                    let h = 2 * (a + b) as i64 + 2;
                    if h > hmax {
                        continue;
                    }
                    let gab = lift_ratfun(&self.diag_ops[a][b].clone(), nv, 0, &mut self.dict);
                    out.add_term(
                        h,
                        h,
                        gab.scale(&(s_coeff(a as u64) * s_coeff(b as u64) * qr(1, 2))),
                        &self.dict,
                    );
                }
            }
        }
        let max_w = hmax - 2;
        for k in 1u32..=(hmax as u32) {
            let mut gp = 0u32;
            loop {
                let w = 2 * gp as i64 - 2 + (k + m + n) as i64;
                if w + k as i64 > hmax {
                    break;
                }
                if w <= max_w && !(gp == 0 && (k + m + n) == 1) {
                    self.consume(&mut out, gp, k, xs, ys, w, nv, hmax)?;
                }
                gp += 1;
            }
        }
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn consume(
        &mut self,
        out: &mut GFRat,
        g: u32,
        k: u32,
        xs: &[u8],
        ys: &[u8],
        w: i64,
        nv: usize,
        hmax: i64,
    ) -> Result<(), EngineError> {
        let m = xs.len() as u32;
        let n = ys.len() as u32;
        // the consumed cell as a rational density in temp layout
        let cell: FRat = if g == 0 && (k + m + n) == 2 {
            if k == 2 {
                // handled by the regularized diagonal in build_t
                return Ok(());
            }
            // B(z~, spectator), sign -1 for the (1,1) kernel cell
            debug_assert_eq!(k, 1);
            let sign = if (m, n) == (0, 1) { qi(-1) } else { qi(1) };
            FRat::constant(2, sign)
                .div_factor(Factor::Diff(0, 1))
                .div_factor(Factor::Diff(0, 1))
        } else {
            let chi_cell = 2 * g as i64 - 2 + (k + m + n) as i64;
            if chi_cell <= 0 {
                return Ok(());
            }
            match self.cells.get(&(g, k + m, n)) {
                Some(c) => c.clone(),
                None => {
                    return Err(EngineError::MissingDependency(format!(
                        "mixed cell ({g},{},{n})",
                        k + m
                    )))
                }
            }
        };
        // remap cell variables into the working layout plus temps:
        // cell x-slots: 0..k are active -> temps nv..nv+k; k..k+m -> xs labels;
        // y-slots -> ys labels.
        let nv2 = nv + k as usize;
        let mut map = vec![0usize; (k + m + n) as usize];
        for i in 0..k as usize {
            map[i] = nv + i;
        }
        for (j, label) in xs.iter().enumerate() {
            map[k as usize + j] = *label as usize;
        }
        for (j, label) in ys.iter().enumerate() {
            map[(k + m) as usize + j] = *label as usize;
        }
        let cur = cell.remap(&map, nv2)?;
        // per active temp variable: X -> sum_i (u hbar)^{2i+1} s_{2i}
        // (d/dx_v)^{2i} (X / x'(v)); graded accumulation
        let mut graded = GFRat::zero(nv2, hmax);
        graded.terms.insert((w, 0), cur);
        for t in 0..k as usize {
            let v = nv + t;
            let invx = lift_ratfun(&self.curve.dx.density.recip()?, nv2, v, &mut self.dict);
            let mut next = GFRat::zero(nv2, hmax);
            for ((h, d), val) in &graded.terms {
                let mut ladder = val.mul(&invx);
                let mut i = 0i64;
                loop {
                    let hh = h + 2 * i + 1;
                    if hh > hmax {
                        break;
                    }
                    next.add_term(hh, d + 2 * i + 1, ladder.scale(&s_coeff(i as u64)), &self.dict);
                    i += 1;
                    if h + 2 * i + 1 > hmax {
                        break;
                    }
                    for _ in 0..2 {
                        ladder = ladder.derivative(v, &self.dict).mul(&invx);
                    }
                }
            }
            graded = next;
        }
        // restrict temps -> z (variable 0) and add with 1/k!
        let mut rmap: Vec<usize> = (0..nv2).collect();
        for t in 0..k as usize {
            rmap[nv + t] = 0;
        }
        let inv_kfact = factorial(k as u64).recip();
        for ((h, d), val) in &graded.terms {
            let restricted = val.remap(&rmap[..], nv)?;
            out.add_term(*h, *d, restricted.scale(&inv_kfact), &self.dict);
        }
        Ok(())
    }
}

/// Tensor to rational density in the cell's own layout (x-slots first).
pub fn tensor_frat(md: &MultiDiff, dict: &mut Dict) -> FRat {
    let nv = md.n as usize;
    let mut out = FRat::zero(nv);
    for (key, f) in md.ordered_terms() {
        let mut term = FRat::constant(nv, f);
        for (i, idx) in key.iter().enumerate() {
            let k = idx.k as i64;
            match &idx.pt {
                Point::Finite(p) => {
                    // -k (z_i - p)^{-k-1}
                    let lin = Poly::from_coeffs(&[(0, -p.clone()), (1, Q::one())]);
                    let id = dict.intern(&lin);
                    let mut piece = FRat::constant(nv, qi(-k));
                    for _ in 0..(k + 1) {
                        piece = piece.div_factor(Factor::Uni(i as u8, id));
                    }
                    term = term.mul(&piece);
                }
                Point::Inf => {
                    let mut e = vec![0i32; nv];
                    e[i] = (k - 1) as i32;
                    term = term.mul(&FRat::from_mpoly(MPoly::monomial(
                        nv,
                        e,
                        qi(k),
                    )));
                }
            }
        }
        out = out.add(&term, dict);
    }
    out
}

/// The regularized-diagonal operator values
/// `G_{ab}(z) = [ (d/dx1)^{2a} (1/x'_1) (d/dx2)^{2b} (1/x'_2) Btilde ] |diag`
/// as exact rational functions, for a,b = 0..=amax.
fn regularized_diag_ops(
    dx: &RatFun,
    amax: usize,
) -> Result<Vec<Vec<RatFun>>, EngineError> {
    let d_trunc = (4 * amax + 4) as i64;
    // BiRat: power series in d over rational rows
    type BiRat = BTreeMap<i64, RatFun>;
    let mul = |a: &BiRat, b: &BiRat, cap: i64| -> BiRat {
        let mut out = BiRat::new();
        for (e1, r1) in a {
            for (e2, r2) in b {
                if e1 + e2 >= cap {
                    continue;
                }
                let p = r1.mul(r2);
                out.entry(e1 + e2)
                    .and_modify(|c| *c = c.add(&p))
                    .or_insert(p);
            }
        }
        out.retain(|_, r| !r.is_zero());
        out
    };
    let add = |a: &BiRat, b: &BiRat| -> BiRat {
        let mut out = a.clone();
        for (e, r) in b {
            out.entry(*e).and_modify(|c| *c = c.add(r)).or_insert(r.clone());
        }
        out.retain(|_, r| !r.is_zero());
        out
    };
    // Taylor rows of a rational function of t2 = s + d
    let taylor = |f: &RatFun, cap: i64| -> BiRat {
        let mut rows = BiRat::new();
        let mut cur = f.clone();
        let mut fact = Q::one();
        for j in 0..cap {
            if j > 0 {
                cur = cur.derivative();
                fact = fact * qi(j).recip();
            }
            let r = cur.scale(&fact);
            if !r.is_zero() {
                rows.insert(j, r);
            }
        }
        rows
    };
    // D = (x(t2)-x(t1))/d = sum_{j>=1} x^{(j)}(s) d^{j-1}/j!
    let mut dd = BiRat::new();
    {
        let mut cur = dx.clone();
        let mut fact = Q::one();
        for j in 1..=d_trunc {
            fact = fact * qi(j).recip();
            let r = cur.scale(&fact);
            if !r.is_zero() {
                dd.insert(j - 1, r);
            }
            cur = cur.derivative();
        }
    }
    // invert D^2 as a d-series (leading row x'(s)^2 is invertible)
    let d2 = mul(&dd, &dd, d_trunc);
    let lead = d2.get(&0).unwrap().clone();
    let lead_inv = lead.recip()?;
    let mut rest = BiRat::new();
    for (e, r) in &d2 {
        if *e > 0 {
            rest.insert(*e, r.mul(&lead_inv));
        }
    }
    let mut inv = BiRat::new();
    inv.insert(0, RatFun::one());
    let mut pw = BiRat::new();
    pw.insert(0, RatFun::one());
    for t in 1..=d_trunc {
        pw = mul(&pw, &rest, d_trunc);
        if pw.is_empty() {
            break;
        }
        let sign = if t % 2 == 1 { qi(-1) } else { qi(1) };
        let signed: BiRat = pw.iter().map(|(e, r)| (*e, r.scale(&sign))).collect();
        inv = add(&inv, &signed);
    }
    let inv_d2: BiRat = {
        let tmp = inv;
        tmp.iter().map(|(e, r)| (*e, r.mul(&lead_inv))).collect()
    };
    // N = 1 - x'(s) x'(s+d) / D^2, Btilde = N / d^2
    let x2 = taylor(dx, d_trunc);
    let mut frac = mul(&x2, &inv_d2, d_trunc);
    for r in frac.values_mut() {
        *r = r.mul(dx);
    }
    let mut one_row = BiRat::new();
    one_row.insert(0, RatFun::one());
    let n = add(&one_row, &frac.iter().map(|(e, r)| (*e, r.neg())).collect());
    if n.contains_key(&0) || n.contains_key(&1) {
        return Err(EngineError::Precision(
            "regularized kernel failed diagonal cancellation".into(),
        ));
    }
    let bt: BiRat = n.iter().map(|(e, r)| (e - 2, r.clone())).collect();
    // per-variable operator chains, as in the jet pipeline
    let inv_dx = dx.recip()?;
    let deriv2 = |b: &BiRat| -> BiRat {
        let mut out = BiRat::new();
        for (e, r) in b {
            if *e != 0 {
                out.insert(e - 1, r.scale(&qi(*e)));
            }
        }
        out
    };
    let deriv1 = |b: &BiRat| -> BiRat {
        let mut out = BiRat::new();
        for (e, r) in b {
            let ds = r.derivative();
            if !ds.is_zero() {
                out.entry(*e).and_modify(|c| *c = c.add(&ds)).or_insert(ds);
            }
            if *e != 0 {
                let v = r.scale(&qi(-*e));
                out.entry(e - 1).and_modify(|c| *c = c.add(&v)).or_insert(v);
            }
        }
        out.retain(|_, r| !r.is_zero());
        out
    };
    let mul_f1 = |b: &BiRat, f: &RatFun| -> BiRat {
        b.iter()
            .map(|(e, r)| (*e, r.mul(f)))
            .filter(|(_, r)| !r.is_zero())
            .collect()
    };
    let mul_f2 = |b: &BiRat, f: &RatFun, cap: i64| -> BiRat { mul(b, &taylor(f, cap), cap) };
    let mut v2 = mul_f2(&bt, &inv_dx, d_trunc);
    let mut stages = Vec::with_capacity(amax + 1);
    stages.push(v2.clone());
    for _ in 1..=amax {
        for _ in 0..2 {
            v2 = mul_f2(&deriv2(&v2), &inv_dx, d_trunc);
        }
        stages.push(v2.clone());
    }
    let mut out = Vec::with_capacity(amax + 1);
    for stage in &stages {
        let mut v1 = mul_f1(stage, &inv_dx);
        let mut row = Vec::with_capacity(amax + 1);
        for a in 0..=amax {
            if a > 0 {
                for _ in 0..2 {
                    v1 = mul_f1(&deriv1(&v1), &inv_dx);
                }
            }
            row.push(v1.get(&0).cloned().unwrap_or_else(RatFun::zero));
        }
        out.push(row);
    }
    // out[b][a]; transpose to [a][b]
    let mut t = vec![vec![RatFun::zero(); amax + 1]; amax + 1];
    for (b, row) in out.iter().enumerate() {
        for (a, v) in row.iter().enumerate() {
            t[a][b] = v.clone();
        }
    }
    Ok(t)
}

/// Extract a pole-basis tensor from a rational density supported at the
/// given finite points with zero residues; errors when the density has any
/// other singular or polynomial content.
pub fn frat_to_tensor(
    cell: &FRat,
    dict: &Dict,
    g: u32,
    n: u32,
    points: &[Q],
) -> Result<MultiDiff, EngineError> {
    let mrat = MRat {
        num: cell.num.clone(),
        den: cell.den_mpoly(dict),
    };
    let out: MultiDiff;
    let mut stack: Vec<(MRat, Vec<PoleIdx>)> = vec![(mrat, Vec::new())];
    for slot in 0..n as usize {
        let mut next = Vec::new();
        for (f, prefix) in stack {
            let parts = univar_principal(&f, slot, points)?;
            for (p, k, coeff) in parts {
                if k < 2 {
                    return Err(EngineError::ResidueNonZero(format!(
                        "dual density has a residue at {p} in slot {slot}"
                    )));
                }
                let basis_k = k - 1;
                let mut pre = prefix.clone();
                pre.push(PoleIdx::new(Point::Finite(p), basis_k as u32));
                // density of b_{p, k-1} is -(k-1) (z-p)^{-k}
                next.push((coeff.scale(&qr(-1, basis_k)), pre));
            }
        }
        stack = next;
    }
    let mut ordered: BTreeMap<Vec<PoleIdx>, Q> = BTreeMap::new();
    for (f, prefix) in stack {
        // all slots consumed: f must be a rational constant
        let c = mrat_constant(&f).ok_or_else(|| {
            EngineError::Precision("tensor extraction left a non-constant remainder".into())
        })?;
        if !c.is_zero() {
            ordered.insert(prefix, c);
        }
    }
    let (extracted, defect) = MultiDiff::from_ordered(g, n, &ordered);
    if !defect.is_zero() {
        return Err(EngineError::Precision(format!(
            "extracted dual tensor has symmetry defect {defect:?}"
        )));
    }
    out = extracted;
    // completeness: the reassembled tensor must equal the original density
    let mut dict2 = Dict::default();
    let back = tensor_frat(&out, &mut dict2);
    let lhs = cell.num.mul(&back.den_mpoly(&dict2));
    let rhs = back.num.mul(&cell.den_mpoly(dict));
    if lhs != rhs {
        return Err(EngineError::Precision(
            "dual density is not a pure pole-basis tensor".into(),
        ));
    }
    Ok(out)
}

/// Principal-part decomposition of an exact multivariate rational in one
/// slot: returns (point, pole order, coefficient-in-the-rest); asserts no
/// polynomial or foreign-pole remainder in that slot.
fn univar_principal(
    f: &MRat,
    slot: usize,
    points: &[Q],
) -> Result<Vec<(Q, i64, MRat)>, EngineError> {
    let mut parts = Vec::new();
    let mut rest = f.clone();
    for p in points {
        loop {
            let k = den_multiplicity(&rest, slot, p);
            if k == 0 {
                break;
            }
            // a_k = ((z-p)^k f)|_{z=p}
            let mut shifted = rest.clone();
            for _ in 0..k {
                shifted = MRat {
                    num: shifted
                        .num
                        .mul(&linear_mpoly(f.num.nvars, slot, p)),
                    den: shifted.den.clone(),
                };
            }
            let a = subst_var(&shifted, slot, p)?;
            if !a.is_zero() {
                parts.push((p.clone(), k, a.clone()));
                // rest -= a/(z-p)^k
                let mut denp = MPoly::one(f.num.nvars);
                for _ in 0..k {
                    denp = denp.mul(&linear_mpoly(f.num.nvars, slot, p));
                }
                let sub = MRat {
                    num: a.num,
                    den: a.den.mul(&denp),
                };
                rest = rest.sub(&sub);
            } else {
                // the apparent multiplicity was spurious; reduce by one step
                rest = reduce_spurious(&rest, slot, p)?;
            }
        }
    }
    if !rest.num.is_zero() {
        return Err(EngineError::NonHolomorphicDual(format!(
            "slot {slot} has a nonzero non-pole remainder"
        )));
    }
    Ok(parts)
}

fn linear_mpoly(nv: usize, slot: usize, p: &Q) -> MPoly {
    MPoly::var(nv, slot).sub(&MPoly::constant(nv, p.clone()))
}

fn den_multiplicity(f: &MRat, slot: usize, p: &Q) -> i64 {
    // multiplicity of (z_slot - p) in den minus num, floor 0
    let m_den = diff_multiplicity(&f.den, slot, p);
    let m_num = diff_multiplicity(&f.num, slot, p);
    (m_den - m_num).max(0)
}

fn diff_multiplicity(poly: &MPoly, slot: usize, p: &Q) -> i64 {
    let mut m = 0;
    let mut cur = poly.clone();
    loop {
        if cur.is_zero() {
            return m;
        }
        let at = subst_mpoly(&cur, slot, p);
        if !at.is_zero() {
            return m;
        }
        cur = match div_linear(&cur, slot, p) {
            Some(q) => q,
            None => return m,
        };
        m += 1;
    }
}

fn div_linear(poly: &MPoly, slot: usize, p: &Q) -> Option<MPoly> {
    let lin = linear_mpoly(poly.nvars, slot, p);
    crate::frat::exact_div_pub(poly, &lin, slot)
}

fn subst_mpoly(poly: &MPoly, slot: usize, p: &Q) -> MPoly {
    let mut out = MPoly::zero(poly.nvars);
    for (e, c) in &poly.terms {
        let mut coef = c.clone();
        let mut pw = e[slot];
        debug_assert!(pw >= 0);
        while pw > 0 {
            coef = coef * p;
            pw -= 1;
        }
        let mut e2 = e.clone();
        e2[slot] = 0;
        out.add_term(e2, coef);
    }
    out
}

fn subst_var(f: &MRat, slot: usize, p: &Q) -> Result<MRat, EngineError> {
    let den = subst_mpoly(&f.den, slot, p);
    if den.is_zero() {
        return Err(EngineError::Precision(
            "substitution hit a remaining pole".into(),
        ));
    }
    Ok(MRat {
        num: subst_mpoly(&f.num, slot, p),
        den,
    })
}

fn reduce_spurious(f: &MRat, slot: usize, p: &Q) -> Result<MRat, EngineError> {
    // both num and den divisible by (z-p): cancel one power
    let num = div_linear(&f.num, slot, p);
    let den = div_linear(&f.den, slot, p);
    match (num, den) {
        (Some(n), Some(d)) => Ok(MRat { num: n, den: d }),
        _ => Err(EngineError::Precision(
            "spurious multiplicity could not be cancelled".into(),
        )),
    }
}

fn mrat_constant(f: &MRat) -> Option<Q> {
    let nv = f.num.nvars;
    let num_c = if f.num.is_zero() {
        Q::zero()
    } else {
        f.num.terms.get(&vec![0; nv]).cloned()?
    };
    if f.num.terms.len() > 1 || (f.num.terms.len() == 1 && !f.num.terms.contains_key(&vec![0; nv]))
    {
        return None;
    }
    let den_c = f.den.terms.get(&vec![0; nv]).cloned()?;
    if f.den.terms.len() != 1 {
        return None;
    }
    Some(num_c / den_c)
}

/// The x-y dual differentials of the engine's ladder through chi_max, as
/// pole-basis tensors over the vee-key set.
pub fn xy_dual(
    engine: &Engine,
    chi_max: i64,
) -> Result<BTreeMap<(u32, u32), MultiDiff>, EngineError> {
    let seeds: BTreeMap<(u32, u32), MultiDiff> = engine
        .memo_cells()
        .map(|(&k, v)| (k, (**v).clone()))
        .collect();
    let ladder = RatLadder::run(&engine.curve, &seeds, chi_max)?;
    let special: Vec<Q> = engine
        .special
        .iter()
        .filter_map(|c| match &c.point {
            Point::Finite(q) => Some(q.clone()),
            Point::Inf => None,
        })
        .collect();
    let mut out = BTreeMap::new();
    for (&(g, m, n), cell) in &ladder.cells {
        if m != 0 {
            continue;
        }
        let md = frat_to_tensor(cell, &ladder.dict, g, n, &special)?;
        for p in md.support_points() {
            if engine.curve.keys.contains(&p) {
                return Err(EngineError::NonHolomorphicDual(format!(
                    "dual cell ({g},{n}) has a pole at key point {p}"
                )));
            }
        }
        out.insert((g, n), md);
    }
    Ok(out)
}

/// Inverse transform: recover the pure cells from a complete dual set by
/// running the same induction with the roles of dx and dy swapped.
pub fn xy_inverse(
    duals: &BTreeMap<(u32, u32), MultiDiff>,
    curve: &SpectralCurve,
    chi_max: i64,
) -> Result<BTreeMap<(u32, u32), MultiDiff>, EngineError> {
    let swapped = curve.dual_curve()?;
    let ladder = RatLadder::run(&swapped, duals, chi_max)?;
    let special: Vec<Q> = swapped
        .special_points()?
        .iter()
        .filter_map(|c| match &c.point {
            Point::Finite(q) => Some(q.clone()),
            Point::Inf => None,
        })
        .collect();
    let mut out = BTreeMap::new();
    for (&(g, m, n), cell) in &ladder.cells {
        if m != 0 {
            continue;
        }
        out.insert((g, n), frat_to_tensor(cell, &ladder.dict, g, n, &special)?);
    }
    Ok(out)
}

// --- z-hat jets and the log shift --------------------------------------------

/// Rational coefficients `a_j = (d/dy)^j z` (a_0 = z), the building blocks of
/// `zhat(z, v) = exp((v hbar / 2) d/dy) z`.
pub fn dy_derivatives_of_z(dy: &RatFun, jmax: usize) -> Result<Vec<RatFun>, EngineError> {
    let mut out = vec![RatFun::var()];
    for _ in 1..=jmax {
        let prev = out.last().unwrap();
        out.push(prev.derivative().div(dy)?);
    }
    Ok(out)
}

/// Coefficient of `(v hbar)^j` in `zhat(z, +v) - z` (use `sign = -1` for the
/// minus branch): `(sign/2)^j a_j / j!`.
pub fn zhat_coeff(a: &[RatFun], j: usize, sign: i64) -> RatFun {
    let c = qr(sign, 2);
    let mut p = Q::one();
    for _ in 0..j {
        p = p * &c;
    }
    a[j].scale(&(p * factorial(j as u64).recip()))
}

/// The hbar-even correction `xhat - x` produced by the simple nonzero poles
/// of dx: entries (2j, rational coefficient of hbar^{2j}).
pub fn log_shift(c: &SpectralCurve, hmax: i64) -> Result<Vec<(u32, RatFun)>, EngineError> {
    let den = c.dx.density.denominator();
    let num = c.dx.density.numerator();
    let mut poles: Vec<(Q, Q)> = Vec::new(); // (a, residue = alpha^{-1})
    for (root, mult) in den.rational_roots().roots {
        if mult != 1 || root.is_zero() {
            continue;
        }
        let lin = Poly::from_coeffs(&[(0, -root.clone()), (1, Q::one())]);
        let dd = den.divides_exactly(&lin).unwrap();
        let res = num.eval(&root) / dd.eval(&root);
        poles.push((root, res));
    }
    let jmax = (hmax / 2).max(0) as usize;
    let inv_s = inv_s_coeffs(jmax);
    let mut out = Vec::new();
    for j in 1..=jmax {
        let mut acc = RatFun::zero();
        for (a, res) in &poles {
            let alpha = res.clone().recip();
            let lin = RatFun::new(
                Poly::one(),
                Poly::from_coeffs(&[(0, -a.clone()), (1, Q::one())]),
            );
            let mut l = lin.div(&c.dy.density)?;
            for _ in 1..(2 * j) {
                l = l.derivative().div(&c.dy.density)?;
            }
            let mut apow = Q::one();
            for _ in 0..(2 * j - 1) {
                apow = apow * &alpha;
            }
            acc = acc.add(&l.scale(&(inv_s[j].clone() * apow)));
        }
        if !acc.is_zero() {
            out.push((2 * j as u32, acc));
        }
    }
    Ok(out)
}

// --- closed form for the trivial-dual regime ---------------------------------

/// Graded series in hbar and per-variable v-degrees, with multivariate
/// rational coefficients.
#[derive(Clone)]
struct VGraded {
    nv: usize,
    hmax: i64,
    terms: BTreeMap<(i64, Vec<i64>), MRat>,
}

impl VGraded {
    fn zero(nv: usize, hmax: i64) -> Self {
        VGraded {
            nv,
            hmax,
            terms: BTreeMap::new(),
        }
    }

    fn one(nv: usize, hmax: i64) -> Self {
        let mut s = VGraded::zero(nv, hmax);
        s.add_term(0, vec![0; nv], MRat::from_poly(MPoly::one(nv)));
        s
    }

    fn add_term(&mut self, h: i64, dv: Vec<i64>, r: MRat) {
        if h > self.hmax || r.is_zero() {
            return;
        }
        match self.terms.remove(&(h, dv.clone())) {
            Some(cur) => {
                let s = cur.add(&r);
                if !s.is_zero() {
                    self.terms.insert((h, dv), s);
                }
            }
            None => {
                self.terms.insert((h, dv), r);
            }
        }
    }

    fn add(&self, other: &VGraded) -> VGraded {
        let mut out = self.clone();
        for ((h, dv), r) in &other.terms {
            out.add_term(*h, dv.clone(), r.clone());
        }
        out
    }

    fn mul(&self, other: &VGraded) -> VGraded {
        let mut out = VGraded::zero(self.nv, self.hmax.min(other.hmax));
        for ((h1, d1), r1) in &self.terms {
            for ((h2, d2), r2) in &other.terms {
                if h1 + h2 > out.hmax {
                    continue;
                }
                let dv: Vec<i64> = d1.iter().zip(d2).map(|(a, b)| a + b).collect();
                out.add_term(h1 + h2, dv, r1.mul(r2));
            }
        }
        out
    }

    fn scale(&self, c: &Q) -> VGraded {
        let mut out = VGraded::zero(self.nv, self.hmax);
        for ((h, dv), r) in &self.terms {
            out.add_term(*h, dv.clone(), r.scale(c));
        }
        out
    }

    fn exp(&self) -> VGraded {
        let mut out = VGraded::one(self.nv, self.hmax);
        let mut pow = VGraded::one(self.nv, self.hmax);
        for k in 1..=(self.hmax.max(0) as u64) {
            pow = pow.mul(self);
            if pow.terms.is_empty() {
                break;
            }
            out = out.add(&pow.scale(&factorial(k).recip()));
        }
        out
    }
}

fn lift(f: &RatFun, nv: usize, var: usize) -> MRat {
    let lift_poly = |p: &Poly| -> MPoly {
        let mut out = MPoly::zero(nv);
        for (e, c) in p.terms() {
            let mut exps = vec![0; nv];
            exps[var] = e as i32;
            out.add_term(exps, c.clone());
        }
        out
    };
    MRat {
        num: lift_poly(f.numerator()),
        den: lift_poly(f.denominator()),
    }
}

fn n_cycles(n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![0]];
    }
    fn permute(arr: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&Vec<usize>)) {
        if k == arr.len() {
            f(arr);
            return;
        }
        for i in k..arr.len() {
            arr.swap(k, i);
            permute(arr, k + 1, f);
            arr.swap(k, i);
        }
    }
    let mut rest: Vec<usize> = (1..n).collect();
    let mut out = Vec::new();
    permute(&mut rest, 0, &mut |arr| {
        let mut sigma = vec![0usize; n];
        let mut prev = 0usize;
        for &a in arr.iter() {
            sigma[prev] = a;
            prev = a;
        }
        sigma[prev] = 0;
        out.push(sigma);
    });
    out
}

/// Exact closed-form evaluation of `omega_n^{(g)}` for curves whose special
/// points are all key (trivial dual recursion), as a multivariate rational
/// density in the n slot variables. Practical for n <= 3 and small genus.
pub fn closed_form_trivial_dual(
    c: &SpectralCurve,
    g: u32,
    n: u32,
) -> Result<MRat, EngineError> {
    let special = c.special_points()?;
    if special.iter().any(|p| !c.keys.contains(&p.point)) {
        return Err(EngineError::NotTrivialDual(
            "a special point is not key".into(),
        ));
    }
    let chi = 2 * g as i64 - 2 + n as i64;
    let nv = n as usize;
    // the n = 1 kernel carries a (v hbar)^{-1} slot, so ingredients are
    // built one order deeper than the extracted layer
    let hmax = chi + 1;
    if (g, n) == (0, 2) {
        return Ok(MRat {
            num: MPoly::one(2),
            den: MPoly::var_diff(2, 0, 1).pow(2),
        });
    }
    let jmax = (hmax + 2) as usize;
    let a = dy_derivatives_of_z(&c.dy.density, jmax + 1)?;
    let mut xy = vec![c.dx.density.div(&c.dy.density)?];
    for _ in 1..=(hmax.max(1) as usize) {
        let prev = xy.last().unwrap();
        xy.push(prev.derivative().div(&c.dy.density)?);
    }
    // per-variable prefactors exp(e_i) * sqrt_i
    let mut pref = Vec::with_capacity(nv);
    for i in 0..nv {
        let mut e = VGraded::zero(nv, hmax);
        let mut l = 1i64;
        while 2 * l <= hmax {
            let mut dv = vec![0; nv];
            dv[i] = 2 * l + 1;
            e.add_term(
                2 * l,
                dv,
                lift(&xy[(2 * l - 1) as usize], nv, i).scale(&s_coeff(l as u64)),
            );
            l += 1;
        }
        let expe = e.exp();
        let mut prod = VGraded::one(nv, hmax);
        for sign in [1i64, -1] {
            let mut s = VGraded::one(nv, hmax);
            for j in 1..=(hmax.max(0) as usize) {
                let cj = zhat_coeff(&a, j, sign).derivative();
                let mut dv = vec![0; nv];
                dv[i] = j as i64;
                s.add_term(j as i64, dv, lift(&cj, nv, i));
            }
            prod = prod.mul(&s);
        }
        let mut w = prod;
        w.terms.remove(&(0, vec![0; nv]));
        let mut sq = VGraded::one(nv, hmax);
        let mut pw = VGraded::one(nv, hmax);
        let mut coef = Q::one();
        for t in 1..=(hmax.max(0) as u64) {
            coef = coef * (qr(1, 2) - qi(t as i64 - 1)) / qi(t as i64);
            pw = pw.mul(&w);
            if pw.terms.is_empty() {
                break;
            }
            sq = sq.add(&pw.scale(&coef));
        }
        pref.push(expe.mul(&sq));
    }
    // cyclic kernel sum
    let mut kernel_sum = VGraded::zero(nv, hmax);
    for sigma in n_cycles(nv) {
        let mut prod = VGraded::one(nv, hmax);
        for i in 0..nv {
            let j = sigma[i];
            let k = if i == j {
                // zhat+ - zhat- = v hbar U, U = sum_l s_{2l}(v hbar)^{2l} a_{2l+1}
                debug_assert_eq!(nv, 1);
                let lead_inv = lift(&a[1], nv, i).recip();
                let mut r_ser = VGraded::zero(nv, hmax + 1);
                let mut l = 1i64;
                while 2 * l <= hmax + 1 {
                    let mut dv = vec![0; nv];
                    dv[i] = 2 * l;
                    r_ser.add_term(
                        2 * l,
                        dv,
                        lift(&a[(2 * l + 1) as usize], nv, i)
                            .mul(&lead_inv)
                            .scale(&s_coeff(l as u64)),
                    );
                    l += 1;
                }
                let mut inv = VGraded::one(nv, hmax + 1);
                let mut pw = VGraded::one(nv, hmax + 1);
                let mut t = 0u32;
                loop {
                    t += 1;
                    if 2 * t as i64 > hmax + 1 {
                        break;
                    }
                    pw = pw.mul(&r_ser);
                    if pw.terms.is_empty() {
                        break;
                    }
                    let sign = if t % 2 == 1 { qi(-1) } else { qi(1) };
                    inv = inv.add(&pw.scale(&sign));
                }
                let mut k = VGraded::zero(nv, hmax);
                for ((h, dv), r) in &inv.terms {
                    let mut d2 = dv.clone();
                    d2[i] -= 1;
                    k.add_term(h - 1, d2, r.mul(&lead_inv));
                }
                k
            } else {
                // 1/(z_i - z_j + Delta)
                let mut delta = VGraded::zero(nv, hmax);
                for jj in 1..=(hmax.max(0) as usize) {
                    let cp = zhat_coeff(&a, jj, 1);
                    let cm = zhat_coeff(&a, jj, -1);
                    let mut dvi = vec![0; nv];
                    dvi[i] = jj as i64;
                    delta.add_term(jj as i64, dvi, lift(&cp, nv, i));
                    let mut dvj = vec![0; nv];
                    dvj[j] = jj as i64;
                    delta.add_term(jj as i64, dvj, lift(&cm, nv, j).scale(&qi(-1)));
                }
                let base = MRat {
                    num: MPoly::one(nv),
                    den: MPoly::var_diff(nv, i, j),
                };
                let mut k = VGraded::zero(nv, hmax);
                let mut dpow = VGraded::one(nv, hmax);
                let mut bpow = base.clone();
                let mut t = 0i64;
                loop {
                    let sign = if t % 2 == 0 { qi(1) } else { qi(-1) };
                    for ((h, dv), r) in &dpow.terms {
                        k.add_term(*h, dv.clone(), r.mul(&bpow).scale(&sign));
                    }
                    t += 1;
                    if t > hmax {
                        break;
                    }
                    dpow = dpow.mul(&delta);
                    if dpow.terms.is_empty() {
                        break;
                    }
                    bpow = bpow.mul(&base);
                }
                k
            };
            prod = prod.mul(&k);
        }
        kernel_sum = kernel_sum.add(&prod);
    }
    let sgn = if nv % 2 == 0 { qi(-1) } else { qi(1) }; // (-1)^{n-1}
    let mut w = kernel_sum.scale(&sgn);
    for p in &pref {
        w = w.mul(p);
    }
    let xd = &c.dx.density;
    for i in 0..nv {
        let mut next = VGraded::zero(nv, w.hmax);
        for ((h, dv), r) in &w.terms {
            let k = dv[i];
            if k < 0 {
                // the (v hbar)^{-1} slot of the n = 1 kernel; the k >= 0
                // extraction never selects it
                continue;
            }
            let mut v = r.clone();
            for _ in 0..k {
                v = v.mul(&lift(&xd.recip()?, nv, i)).derivative(i);
            }
            let sign = if k % 2 == 0 { qi(1) } else { qi(-1) };
            let mut dv2 = dv.clone();
            dv2[i] = 0;
            next.add_term(*h, dv2, v.scale(&sign));
        }
        w = next;
    }
    let sgn_n = if nv % 2 == 0 { qi(1) } else { qi(-1) }; // (-1)^n
    let mut out = MRat::zero(nv);
    for ((h, dv), r) in &w.terms {
        if *h == chi && dv.iter().all(|d| *d == 0) {
            out = out.add(&r.scale(&sgn_n));
        }
    }
    Ok(out)
}

/// Density of a pure differential as a multivariate rational function
/// (for closed-form comparisons).
pub fn tensor_density_mrat(md: &MultiDiff) -> MRat {
    let nv = md.n as usize;
    let mut out = MRat::zero(nv);
    for (key, f) in md.ordered_terms() {
        let mut term = MRat::from_poly(MPoly::constant(nv, f));
        for (i, idx) in key.iter().enumerate() {
            let k = idx.k as i32;
            let dens = match &idx.pt {
                Point::Finite(q) => {
                    let lin = MPoly::var(nv, i).sub(&MPoly::constant(nv, q.clone()));
                    MRat {
                        num: MPoly::constant(nv, qi(-(k as i64))),
                        den: lin.pow((k + 1) as u32),
                    }
                }
                Point::Inf => {
                    let mut e = vec![0; nv];
                    e[i] = k - 1;
                    MRat::from_poly(MPoly::monomial(nv, e, qi(k as i64)))
                }
            };
            term = term.mul(&dens);
        }
        out = out.add(&term);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::parse_curve;

    #[test]
    fn zhat_printed_expansion() {
        let dy = RatFun::from_poly(Poly::var()); // y' = z
        let a = dy_derivatives_of_z(&dy, 3).unwrap();
        let c1 = zhat_coeff(&a, 1, 1);
        let want1 = RatFun::new(Poly::one(), Poly::var()).scale(&qr(1, 2));
        assert_eq!(c1, want1);
        let c2 = zhat_coeff(&a, 2, 1);
        let want2 = RatFun::new(Poly::one(), Poly::monomial(3, Q::one())).scale(&qr(-1, 8));
        assert_eq!(c2, want2);
        let c3 = zhat_coeff(&a, 3, 1);
        let want3 = RatFun::new(Poly::one(), Poly::monomial(5, Q::one())).scale(&qr(3, 48));
        assert_eq!(c3, want3);
    }

    #[test]
    fn log_shift_examples() {
        let c = parse_curve("dx = z dz; dy = dz; keys = [0]").unwrap();
        assert!(log_shift(&c, 4).unwrap().is_empty());
        let c = parse_curve("dx = z^-1 dz; dy = dz; keys = [0]").unwrap();
        assert!(log_shift(&c, 4).unwrap().is_empty());
        let c = parse_curve("dx = (z-1)^-1 dz; dy = dz; keys = []").unwrap();
        let s = log_shift(&c, 2).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].0, 2);
        let want = RatFun::new(
            Poly::one(),
            Poly::from_coeffs(&[(0, qi(1)), (1, qi(-2)), (2, qi(1))]),
        )
        .scale(&qr(1, 24));
        assert_eq!(s[0].1, want);
    }

    #[test]
    fn airy_duals_vanish_chi2() {
        let c = parse_curve("dx = z dz; dy = dz; keys = [0]").unwrap();
        let mut e = Engine::new(c).unwrap();
        e.fill(2).unwrap();
        let duals = xy_dual(&e, 2).unwrap();
        for ((g, n), md) in &duals {
            assert!(md.is_zero(), "dual ({g},{n}) = {:?}", md.terms);
        }
    }

    #[test]
    fn closed_form_airy_cells() {
        let c = parse_curve("dx = z dz; dy = dz; keys = [0]").unwrap();
        let mut e = Engine::new(c.clone()).unwrap();
        e.fill(1).unwrap();
        // (0,3)
        let cf = closed_form_trivial_dual(&c, 0, 3).unwrap();
        let md = e.get_memo(0, 3).unwrap();
        assert!(cf.eq_rat(&tensor_density_mrat(&md)), "(0,3) closed form");
        // (1,1)
        let cf = closed_form_trivial_dual(&c, 1, 1).unwrap();
        let md = e.get_memo(1, 1).unwrap();
        assert!(cf.eq_rat(&tensor_density_mrat(&md)), "(1,1) closed form");
        // (0,2) is B
        let cf = closed_form_trivial_dual(&c, 0, 2).unwrap();
        assert_eq!(cf.den, MPoly::var_diff(2, 0, 1).pow(2));
    }

    #[test]
    fn closed_form_requires_trivial_dual() {
        let c = parse_curve("dx = (z-1) dz; dy = (z+1) dz; keys = [1]").unwrap();
        assert!(matches!(
            closed_form_trivial_dual(&c, 0, 3),
            Err(EngineError::NotTrivialDual(_))
        ));
    }
}
