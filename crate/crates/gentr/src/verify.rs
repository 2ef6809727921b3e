//! Verification suite over published memo tables: symmetry, engine
//! agreement, dual triviality and holomorphy, loop equations, determinantal
//! identities, and discrete family sweeps.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::ceo::CeoEngine;
use crate::curve::{PointKind, SpectralCurve};
use crate::duality::{xy_dual, xy_inverse};
use crate::engine::Engine;
use crate::error::EngineError;
use crate::forms::Point;
use crate::multidiff::MultiDiff;
use crate::num::{qi, Q};
use crate::report::{CheckReport, Verdict};

/// Symmetry of every computed cell with chi <= chi_max.
pub fn symmetry_check(engine: &mut Engine, chi_max: i64) -> Result<CheckReport, EngineError> {
    engine.fill(chi_max)?;
    let mut report = CheckReport::new("symmetry", &engine.curve.label);
    report.params = format!("chi_max={chi_max}");
    for (&(g, n), md) in engine.memo_cells() {
        if 2 * g as i64 - 2 + n as i64 > chi_max {
            continue;
        }
        let defect = md.symmetry_defect();
        if defect.is_zero() {
            report.pass(format!("({g},{n})"));
        } else {
            report.fail(format!("({g},{n})"), format!("defect {:?}", defect));
        }
    }
    Ok(report)
}

/// Exact tensor agreement of the generalized and classical engines through
/// chi_max; N/A when the classical hypotheses fail.
pub fn compare_engines(curve: &SpectralCurve, chi_max: i64) -> Result<CheckReport, EngineError> {
    let mut ceo = match CeoEngine::new(curve.clone()) {
        Ok(c) => c,
        Err(e) => {
            return Ok(CheckReport::not_applicable(
                "engine-agreement",
                &curve.label,
                &format!("classical recursion refuses this curve: {e}"),
            ))
        }
    };
    let mut gen = Engine::new(curve.clone())?;
    gen.fill(chi_max)?;
    ceo.fill(chi_max)?;
    let mut report = CheckReport::new("engine-agreement", &curve.label);
    report.params = format!("chi_max={chi_max}");
    for chi in 1..=chi_max {
        for (g, n) in Engine::cells_at_level(chi) {
            let a = gen.get_memo(g, n).unwrap();
            let b = ceo.compute(g, n)?;
            if a.terms == b.terms {
                report.pass(format!("({g},{n})"));
            } else {
                report.fail(
                    format!("({g},{n})"),
                    format!("generalized {:?} vs classical {:?}", a.terms, b.terms),
                );
            }
        }
    }
    Ok(report)
}

/// All-key curves must have identically zero stable dual differentials.
pub fn dual_trivial_check(curve: &SpectralCurve, chi_max: i64) -> Result<CheckReport, EngineError> {
    let special = curve.special_points()?;
    if special.iter().any(|p| !curve.keys.contains(&p.point)) {
        return Ok(CheckReport::not_applicable(
            "dual-trivial",
            &curve.label,
            "some special points are not key",
        ));
    }
    let mut engine = Engine::new(curve.clone())?;
    engine.fill(chi_max)?;
    let duals = xy_dual(&engine, chi_max)?;
    let mut report = CheckReport::new("dual-trivial", &curve.label);
    report.params = format!("chi_max={chi_max}");
    for ((g, n), md) in &duals {
        if md.is_zero() {
            report.pass(format!("dual ({g},{n}) = 0"));
        } else {
            report.fail(format!("dual ({g},{n})"), format!("{:?}", md.terms));
        }
    }
    Ok(report)
}

/// Full duality audit for a general key split: dual holomorphy at key points
/// (hard), pole containment in the vee-key set, the dual ladder solving the
/// recursion for the dual data, and round-trip identity.
pub fn duality_check(curve: &SpectralCurve, chi_max: i64) -> Result<CheckReport, EngineError> {
    let mut engine = Engine::new(curve.clone())?;
    engine.fill(chi_max)?;
    let mut report = CheckReport::new("duality", &curve.label);
    report.params = format!("chi_max={chi_max}");
    let duals = xy_dual(&engine, chi_max)?; // NonHolomorphicDual is a hard error inside
    report.pass("dual cells holomorphic at key points".into());
    // pole containment: supports live in the vee-key set
    let dual_curve = curve.dual_curve()?;
    for ((g, n), md) in &duals {
        for p in md.support_points() {
            if !dual_curve.keys.contains(&p) {
                report.fail(
                    format!("dual ({g},{n}) support"),
                    format!("pole at {p} outside the vee-key set"),
                );
            }
        }
    }
    // the dual ladder satisfies the recursion for the dual data
    let mut dual_engine = Engine::new(dual_curve.clone())?;
    dual_engine.fill(chi_max)?;
    for chi in 1..=chi_max {
        for (g, n) in Engine::cells_at_level(chi) {
            let direct = dual_engine.get_memo(g, n).unwrap();
            let via_transform = duals
                .get(&(g, n))
                .cloned()
                .unwrap_or_else(|| MultiDiff::zero(g, n));
            if direct.terms == via_transform.terms {
                report.pass(format!("dual recursion ({g},{n})"));
            } else {
                report.fail(
                    format!("dual recursion ({g},{n})"),
                    format!("transform {:?} vs engine {:?}", via_transform.terms, direct.terms),
                );
            }
        }
    }
    // round trip
    let recovered = xy_inverse(&duals, curve, chi_max)?;
    for chi in 1..=chi_max {
        for (g, n) in Engine::cells_at_level(chi) {
            let orig = engine.get_memo(g, n).unwrap();
            let back = recovered
                .get(&(g, n))
                .cloned()
                .unwrap_or_else(|| MultiDiff::zero(g, n));
            if orig.terms == back.terms {
                report.pass(format!("round-trip ({g},{n})"));
            } else {
                report.fail(
                    format!("round-trip ({g},{n})"),
                    format!("recovered {:?} vs original {:?}", back.terms, orig.terms),
                );
            }
        }
    }
    Ok(report)
}

/// Regularity transfer at sampled non-special points (Lemma 3.4 flavor):
/// dual supports contain no non-special points.
pub fn regularity_audit(curve: &SpectralCurve, chi_max: i64) -> Result<CheckReport, EngineError> {
    let mut engine = Engine::new(curve.clone())?;
    engine.fill(chi_max)?;
    let duals = xy_dual(&engine, chi_max)?;
    let mut report = CheckReport::new("regularity", &curve.label);
    for ((g, n), md) in &duals {
        for p in md.support_points() {
            let cl = curve.classify(&p);
            if cl.kind != PointKind::Special {
                report.fail(
                    format!("dual ({g},{n})"),
                    format!("pole at non-special point {p}"),
                );
            }
        }
    }
    if report.witnesses.is_empty() {
        report.pass("all dual poles at special points".into());
    }
    Ok(report)
}

/// Exact cubic interpolation at tau = 0 through the four samples.
fn interpolate_at_zero(samples: &[(Q, Q)]) -> Q {
    let mut acc = Q::zero();
    for (i, (xi, yi)) in samples.iter().enumerate() {
        let mut term = yi.clone();
        for (j, (xj, _)) in samples.iter().enumerate() {
            if i != j {
                term = term * (-xj.clone()) / (xi.clone() - xj.clone());
            }
        }
        acc += term;
    }
    acc
}

/// Family sweep: for x = z^2/2 + tau z^3/3, y = z at tau in {1, 1/2, 1/4,
/// 1/8}, every fixed basis coefficient of the chi <= chi_max cells,
/// re-expanded at 0, interpolates (cubically, exactly) to the tau = 0 output.
pub fn family_sweep_check(chi_max: i64) -> Result<CheckReport, EngineError> {
    use crate::tensor::PoleIdx;
    let taus = [qi(1), crate::num::qr(1, 2), crate::num::qr(1, 4), crate::num::qr(1, 8)];
    let mut report = CheckReport::new("family-sweep", "x=z^2/2+tau z^3/3, y=z");
    report.params = format!("chi_max={chi_max}, tau=1,1/2,1/4,1/8");
    // tau = 0 reference: the Airy curve
    let airy = crate::curve::parse_curve("dx = z dz; dy = dz; keys = [0]")?;
    let mut ref_engine = Engine::new(airy)?;
    ref_engine.fill(chi_max)?;
    // per-tau engines; keys are both zeros of dx: 0 and -1/tau
    let mut engines = Vec::new();
    for tau in &taus {
        let dx = crate::curve::parse_expr(&format!(
            "z + {} z^2",
            crate::num::fmt_q(tau)
        ))?;
        let dy = crate::curve::parse_expr("1")?;
        let minus_inv = -tau.clone().recip();
        let c = SpectralCurve::new(
            crate::forms::OneForm::new(dx),
            crate::forms::OneForm::new(dy),
            vec![Point::Finite(Q::zero()), Point::Finite(minus_inv)],
            format!("sweep tau={}", crate::num::fmt_q(tau)),
        )?;
        let mut e = Engine::new(c)?;
        e.fill(chi_max)?;
        engines.push(e);
    }
    for chi in 1..=chi_max {
        for (g, n) in Engine::cells_at_level(chi) {
            let reference = ref_engine.get_memo(g, n).unwrap();
            // collect the union of re-expanded pole-basis keys at 0
            let mut keys: Vec<Vec<PoleIdx>> = reference.terms.keys().cloned().collect();
            let mut per_tau: Vec<BTreeMap<Vec<PoleIdx>, Q>> = Vec::new();
            for e in &engines {
                let md = e.get_memo(g, n).unwrap();
                let re = reexpand_at_zero(&md, n)?;
                for k in re.keys() {
                    if !keys.contains(k) {
                        keys.push(k.clone());
                    }
                }
                per_tau.push(re);
            }
            keys.sort();
            for key in keys {
                let samples: Vec<(Q, Q)> = taus
                    .iter()
                    .zip(&per_tau)
                    .map(|(t, m)| (t.clone(), m.get(&key).cloned().unwrap_or_else(Q::zero)))
                    .collect();
                let at_zero = interpolate_at_zero(&samples);
                let want = reference.terms.get(&key).cloned().unwrap_or_else(Q::zero);
                let label = format!("({g},{n}) {:?}", key);
                if at_zero == want {
                    report.pass(label);
                } else {
                    report.fail(
                        label,
                        format!(
                            "interpolated {} vs tau=0 value {}",
                            crate::num::fmt_q(&at_zero),
                            crate::num::fmt_q(&want)
                        ),
                    );
                }
            }
        }
    }
    Ok(report)
}

/// Principal-part window at 0 of a tensor: basis forms anchored elsewhere
/// are regular at 0 per slot, so only the all-slots-at-0 tuples survive the
/// re-expansion.
fn reexpand_at_zero(
    md: &MultiDiff,
    _n: u32,
) -> Result<BTreeMap<Vec<crate::tensor::PoleIdx>, Q>, EngineError> {
    use crate::tensor::PoleIdx;
    let zero = Point::Finite(Q::zero());
    let mut out: BTreeMap<Vec<PoleIdx>, Q> = BTreeMap::new();
    for (key, f) in &md.terms {
        if key.iter().all(|idx| idx.pt == zero) {
            out.insert(key.clone(), f.clone());
        }
    }
    Ok(out)
}

/// Shift-invariance of the joint loop verdict under y -> y + c on one curve.
pub fn loop_shift_invariance(curve: &SpectralCurve, kmax: i64) -> Result<bool, EngineError> {
    let mut e = Engine::new(curve.clone())?;
    e.fill(2)?;
    let q = curve.keys[0].clone();
    let base = crate::loops::loop_check(&e, &q, 1, 0, kmax)?;
    let shifted = crate::loops::loop_check_shifted(&e, &q, 1, 0, kmax, &qi(7))?;
    Ok((base.verdict == Verdict::Pass) == shifted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::parse_curve;

    #[test]
    fn airy_engines_agree_small() {
        let c = parse_curve("dx = z dz; dy = dz; keys = [0]").unwrap();
        let rep = compare_engines(&c, 2).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "{:?}", rep.witnesses);
    }

    #[test]
    fn ceo_not_applicable_for_singular_dy() {
        let c = parse_curve("dx = z dz; dy = z^-2 dz; keys = [0]").unwrap();
        let rep = compare_engines(&c, 2).unwrap();
        assert_eq!(rep.verdict, Verdict::NotApplicable);
    }

    #[test]
    fn airy_dual_trivial_small() {
        let c = parse_curve("dx = z dz; dy = dz; keys = [0]").unwrap();
        let rep = dual_trivial_check(&c, 2).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "{:?}", rep.witnesses);
    }

    #[test]
    fn interpolation_is_exact_for_cubics() {
        // P(tau) = 3 - 2 tau^3
        let p = |t: &Q| qi(3) - qi(2) * t * t * t;
        let samples: Vec<(Q, Q)> = [qi(1), crate::num::qr(1, 2), crate::num::qr(1, 4), crate::num::qr(1, 8)]
            .iter()
            .map(|t| (t.clone(), p(t)))
            .collect();
        assert_eq!(interpolate_at_zero(&samples), qi(3));
    }
}
