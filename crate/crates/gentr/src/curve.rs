//! Spectral-curve model: the pair (dx, dy) of rational 1-forms on CP^1, the
//! chosen key set, point classification, and the x-y dual data.

use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};

use crate::error::EngineError;
use crate::forms::{OneForm, Point};
use crate::num::{fmt_q, parse_q, Q};
use crate::poly::Poly;
use crate::ratfun::RatFun;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PointKind {
    NonSpecial,
    Special,
}

#[derive(Clone, Debug)]
pub struct PointClassification {
    pub point: Point,
    /// dx local order + 1: dx = a t^{r-1}(1+O(t)) dt
    pub r: i64,
    pub s: i64,
    pub kind: PointKind,
}

fn kind_of(r: i64, s: i64) -> PointKind {
    if (r == 1 && s == 1) || r + s <= 0 {
        PointKind::NonSpecial
    } else {
        PointKind::Special
    }
}

#[derive(Clone, Debug)]
pub struct SpectralCurve {
    pub dx: OneForm,
    pub dy: OneForm,
    /// key points P, a subset of the special points
    pub keys: Vec<Point>,
    pub label: String,
}

impl SpectralCurve {
    /// Build and validate: forms nonzero, all special points rational,
    /// every key special.
    pub fn new(
        dx: OneForm,
        dy: OneForm,
        keys: Vec<Point>,
        label: impl Into<String>,
    ) -> Result<Self, EngineError> {
        if dx.is_zero() || dy.is_zero() {
            return Err(EngineError::Parse("dx and dy must be nonzero".into()));
        }
        let mut keys = keys;
        keys.sort();
        keys.dedup();
        let c = SpectralCurve {
            dx,
            dy,
            keys,
            label: label.into(),
        };
        let special = c.special_points()?;
        for k in &c.keys {
            if !special.iter().any(|p| p.point == *k) {
                return Err(EngineError::KeyNotSpecial(k.to_string()));
            }
        }
        Ok(c)
    }

    /// Monomial curve dx = z^{r-1} dz, dy = z^{s-1} dz with key {0}.
    pub fn rs_curve(r: i64, s: i64) -> Result<Self, EngineError> {
        let mono = |e: i64| -> RatFun {
            if e >= 0 {
                RatFun::from_poly(Poly::monomial(e as u32, Q::one()))
            } else {
                RatFun::new(Poly::one(), Poly::monomial((-e) as u32, Q::one()))
            }
        };
        SpectralCurve::new(
            OneForm::new(mono(r - 1)),
            OneForm::new(mono(s - 1)),
            vec![Point::Finite(Q::zero())],
            format!("rs({},{})", r, s),
        )
    }

    pub fn classify(&self, q: &Point) -> PointClassification {
        let r = self.dx.density_order_at(q) + 1;
        let s = self.dy.density_order_at(q) + 1;
        PointClassification {
            point: q.clone(),
            r,
            s,
            kind: kind_of(r, s),
        }
    }

    /// Complete list of special points, ordered (finite ascending, then inf).
    pub fn special_points(&self) -> Result<Vec<PointClassification>, EngineError> {
        certify_residuals_nonspecial(&self.dx, &self.dy)?;
        let mut candidates: Vec<Point> = vec![Point::Inf];
        let add_roots = |p: &Poly, candidates: &mut Vec<Point>| {
            if p.degree().unwrap_or(0) == 0 {
                return;
            }
            for (root, _) in p.rational_roots().roots {
                candidates.push(Point::Finite(root));
            }
        };
        add_roots(self.dx.density.numerator(), &mut candidates);
        add_roots(self.dx.density.denominator(), &mut candidates);
        add_roots(self.dy.density.numerator(), &mut candidates);
        add_roots(self.dy.density.denominator(), &mut candidates);
        candidates.sort();
        candidates.dedup();
        let mut out = Vec::new();
        for q in candidates {
            let cl = self.classify(&q);
            if cl.kind == PointKind::Special {
                out.push(cl);
            }
        }
        Ok(out)
    }

    /// The x-y dual initial data: forms swapped, keys complemented.
    pub fn dual_curve(&self) -> Result<SpectralCurve, EngineError> {
        let special = self.special_points()?;
        let keys: Vec<Point> = special
            .iter()
            .map(|c| c.point.clone())
            .filter(|p| !self.keys.contains(p))
            .collect();
        SpectralCurve::new(
            self.dy.clone(),
            self.dx.clone(),
            keys,
            format!("dual({})", self.label),
        )
    }

    /// Stable content hash of the curve data (for output provenance).
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut s = String::new();
        let _ = write!(s, "dx={:?};dy={:?};keys=", self.dx.density, self.dy.density);
        for k in &self.keys {
            let _ = write!(s, "{},", k);
        }
        let mut h = Sha256::new();
        h.update(s.as_bytes());
        let out = h.finalize();
        out.iter().take(8).map(|b| format!("{:02x}", b)).collect()
    }

    /// For curves with monomial forms keyed at 0 (or keyless when trivial):
    /// the (r, s) exponents and the product of the leading signs, used to
    /// select golden fixtures.
    pub fn rs_signature(&self) -> Option<(i64, i64, i64)> {
        let single = |f: &RatFun| -> Option<(i64, i64)> {
            let n = f.numerator();
            let d = f.denominator();
            if n.terms().count() != 1 || d.terms().count() != 1 {
                return None;
            }
            let (en, cn) = n.terms().next().unwrap();
            let (ed, cd) = d.terms().next().unwrap();
            let ratio = cn / cd;
            if ratio.clone().abs() != Q::one() {
                return None;
            }
            let sign = if ratio.is_one() { 1 } else { -1 };
            Some((en as i64 - ed as i64, sign))
        };
        let keyed_at_zero = self.keys == vec![Point::Finite(Q::zero())];
        if !(keyed_at_zero || self.keys.is_empty()) {
            return None;
        }
        let (rx, sx) = single(&self.dx.density)?;
        let (ry, sy) = single(&self.dy.density)?;
        Some((rx + 1, ry + 1, sx * sy))
    }

    /// The monomial curve matching a golden-table row: dx = z^{r-1} dz,
    /// dy = sign z^{s-1} dz, keyed at 0 (keyless when nothing is special).
    pub fn golden_curve(r: i64, s: i64, sign: i64) -> Result<Self, EngineError> {
        let mono = |e: i64, c: i64| -> RatFun {
            let cq = Q::from_integer(c.into());
            if e >= 0 {
                RatFun::from_poly(Poly::monomial(e as u32, cq))
            } else {
                RatFun::new(
                    Poly::constant(cq),
                    Poly::monomial((-e) as u32, Q::one()),
                )
            }
        };
        let keys = if (r, s) == (1, 1) {
            vec![]
        } else {
            vec![Point::Finite(Q::zero())]
        };
        SpectralCurve::new(
            OneForm::new(mono(r - 1, 1)),
            OneForm::new(mono(s - 1, sign)),
            keys,
            format!("rs({r},{s};{sign})"),
        )
    }
}

/// Prove that every irrational root of the four defining polynomials is
/// non-special, or fail with `IrrationalSpecialPoint`. The residual factors
/// are refined into pairwise-coprime squarefree pieces with known
/// multiplicity vectors (a, b, c, d) in (dx num, dx den, dy num, dy den).
fn certify_residuals_nonspecial(dx: &OneForm, dy: &OneForm) -> Result<(), EngineError> {
    let residual = |p: &Poly| -> Vec<(Poly, u32)> {
        if p.degree().unwrap_or(0) == 0 {
            return Vec::new();
        }
        let res = p.rational_roots().residual;
        if res.degree().unwrap_or(0) == 0 {
            return Vec::new();
        }
        res.squarefree_decomposition()
    };
    // labeled squarefree families for the four polynomials
    let fams = [
        residual(dx.density.numerator()),
        residual(dx.density.denominator()),
        residual(dy.density.numerator()),
        residual(dy.density.denominator()),
    ];
    if fams.iter().all(|f| f.is_empty()) {
        return Ok(());
    }
    // common refinement: pieces (poly, [a,b,c,d])
    let mut pieces: Vec<(Poly, [u32; 4])> = Vec::new();
    for (fi, fam) in fams.iter().enumerate() {
        for (p, m) in fam {
            let mut rem = p.clone();
            let mut new_pieces = Vec::new();
            for (q, mult) in std::mem::take(&mut pieces) {
                let g = rem.gcd(&q);
                if g.degree().unwrap_or(0) == 0 {
                    new_pieces.push((q, mult));
                    continue;
                }
                let q_rest = q.divides_exactly(&g).unwrap();
                if q_rest.degree().unwrap_or(0) > 0 {
                    new_pieces.push((q_rest, mult));
                }
                let mut gm = mult;
                gm[fi] += m;
                new_pieces.push((g.clone(), gm));
                rem = rem.divides_exactly(&g).unwrap();
            }
            if rem.degree().unwrap_or(0) > 0 {
                let mut gm = [0u32; 4];
                gm[fi] += m;
                new_pieces.push((rem, gm));
            }
            pieces = new_pieces;
        }
    }
    for (p, [a, b, c, d]) in pieces {
        let r = 1 + a as i64 - b as i64;
        let s = 1 + c as i64 - d as i64;
        if kind_of(r, s) == PointKind::Special {
            return Err(EngineError::IrrationalSpecialPoint(format!(
                "roots of {:?} have (r,s)=({},{})",
                p, r, s
            )));
        }
    }
    Ok(())
}

// --- curve-spec grammar -----------------------------------------------------
//
// statements, one per line or ';'-separated:
//   dx = <expr> dz        |  x = <expr>
//   dy = <expr> dz        |  y = <expr>
//   keys = [p1, p2, ...]           (each pi rational or `inf`; may be empty)
// <expr> is rational in z over integer/rational literals with + - * / ^.

pub fn parse_curve(spec: &str) -> Result<SpectralCurve, EngineError> {
    let mut dx: Option<RatFun> = None;
    let mut dy: Option<RatFun> = None;
    let mut keys: Option<Vec<Point>> = None;
    for raw in spec.split(|c| c == '\n' || c == ';') {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (lhs, rhs) = line
            .split_once('=')
            .ok_or_else(|| EngineError::Parse(format!("expected `name = ...`: {line}")))?;
        let lhs = lhs.trim();
        let rhs = rhs.trim();
        match lhs {
            "dx" | "dy" => {
                let rhs = rhs
                    .strip_suffix("dz")
                    .ok_or_else(|| EngineError::Parse(format!("{lhs} needs a `dz` suffix")))?
                    .trim();
                let f = if rhs.is_empty() {
                    RatFun::one()
                } else {
                    parse_expr(rhs)?
                };
                if lhs == "dx" {
                    dx = Some(f);
                } else {
                    dy = Some(f);
                }
            }
            "x" | "y" => {
                let f = parse_expr(rhs)?.derivative();
                if lhs == "x" {
                    dx = Some(f);
                } else {
                    dy = Some(f);
                }
            }
            "keys" => {
                let inner = rhs
                    .strip_prefix('[')
                    .and_then(|r| r.strip_suffix(']'))
                    .ok_or_else(|| EngineError::Parse("keys = [ ... ]".into()))?;
                let mut ks = Vec::new();
                for part in inner.split(',') {
                    let part = part.trim();
                    if part.is_empty() {
                        continue;
                    }
                    ks.push(
                        Point::parse(part)
                            .ok_or_else(|| EngineError::Parse(format!("bad key `{part}`")))?,
                    );
                }
                keys = Some(ks);
            }
            other => return Err(EngineError::Parse(format!("unknown statement `{other}`"))),
        }
    }
    let dx = dx.ok_or_else(|| EngineError::Parse("missing dx".into()))?;
    let dy = dy.ok_or_else(|| EngineError::Parse("missing dy".into()))?;
    let keys = keys.ok_or_else(|| EngineError::Parse("missing keys".into()))?;
    SpectralCurve::new(OneForm::new(dx), OneForm::new(dy), keys, spec.trim())
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Q),
    Var,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn lex(s: &str) -> Result<Vec<Tok>, EngineError> {
    let mut lx = Lexer {
        chars: s.chars().peekable(),
    };
    let mut out = Vec::new();
    while let Some(&c) = lx.chars.peek() {
        match c {
            ' ' | '\t' => {
                lx.chars.next();
            }
            '0'..='9' => {
                let mut lit = String::new();
                while let Some(&d) = lx.chars.peek() {
                    if d.is_ascii_digit() {
                        lit.push(d);
                        lx.chars.next();
                    } else {
                        break;
                    }
                }
                out.push(Tok::Num(parse_q(&lit).unwrap()));
            }
            'z' => {
                lx.chars.next();
                out.push(Tok::Var);
            }
            '+' => {
                lx.chars.next();
                out.push(Tok::Plus);
            }
            '-' => {
                lx.chars.next();
                out.push(Tok::Minus);
            }
            '*' => {
                lx.chars.next();
                out.push(Tok::Star);
            }
            '/' => {
                lx.chars.next();
                out.push(Tok::Slash);
            }
            '^' => {
                lx.chars.next();
                out.push(Tok::Caret);
            }
            '(' => {
                lx.chars.next();
                out.push(Tok::LParen);
            }
            ')' => {
                lx.chars.next();
                out.push(Tok::RParen);
            }
            other => {
                return Err(EngineError::Parse(format!(
                    "unexpected character `{other}` in expression"
                )))
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }
    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }
    fn expr(&mut self) -> Result<RatFun, EngineError> {
        let mut acc = self.term()?;
        while let Some(t) = self.peek() {
            match t {
                Tok::Plus => {
                    self.next();
                    acc = acc.add(&self.term()?);
                }
                Tok::Minus => {
                    self.next();
                    acc = acc.sub(&self.term()?);
                }
                _ => break,
            }
        }
        Ok(acc)
    }
    fn term(&mut self) -> Result<RatFun, EngineError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.next();
                    acc = acc.mul(&self.factor()?);
                }
                Some(Tok::Slash) => {
                    self.next();
                    acc = acc.div(&self.factor()?)?;
                }
                // juxtaposition: `2 z`, `z (z+1)`
                Some(Tok::Var) | Some(Tok::LParen) | Some(Tok::Num(_)) => {
                    acc = acc.mul(&self.factor()?);
                }
                _ => break,
            }
        }
        Ok(acc)
    }
    fn factor(&mut self) -> Result<RatFun, EngineError> {
        let mut base = match self.next() {
            Some(Tok::Num(q)) => RatFun::constant(q),
            Some(Tok::Var) => RatFun::var(),
            Some(Tok::Minus) => return Ok(self.factor()?.neg()),
            Some(Tok::Plus) => return self.factor(),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                match self.next() {
                    Some(Tok::RParen) => inner,
                    _ => return Err(EngineError::Parse("unbalanced parenthesis".into())),
                }
            }
            other => {
                return Err(EngineError::Parse(format!(
                    "unexpected token {:?}",
                    other
                )))
            }
        };
        while self.peek() == Some(&Tok::Caret) {
            self.next();
            let mut sign = 1i32;
            while self.peek() == Some(&Tok::Minus) {
                self.next();
                sign = -sign;
            }
            let e = match self.next() {
                Some(Tok::Num(q)) if q.denom().is_one() => {
                    let n: i32 = q.numer().to_string().parse().map_err(|_| {
                        EngineError::Parse("exponent out of range".into())
                    })?;
                    n * sign
                }
                _ => return Err(EngineError::Parse("expected integer exponent".into())),
            };
            base = base.pow(e)?;
        }
        Ok(base)
    }
}

pub fn parse_expr(s: &str) -> Result<RatFun, EngineError> {
    let toks = lex(s)?;
    let mut p = Parser { toks, pos: 0 };
    let f = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(EngineError::Parse(format!("trailing tokens in `{s}`")));
    }
    Ok(f)
}

/// Human-readable point for messages.
pub fn point_str(p: &Point) -> String {
    match p {
        Point::Finite(q) => fmt_q(q),
        Point::Inf => "inf".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::qi;

    #[test]
    fn classify_examples() {
        // Airy: dx = z dz, dy = dz: at 0 -> (2,1) special
        let c = parse_curve("dx = z dz; dy = dz; keys = [0]").unwrap();
        let cl = c.classify(&Point::Finite(Q::zero()));
        assert_eq!((cl.r, cl.s), (2, 1));
        assert_eq!(cl.kind, PointKind::Special);
        // at inf: (-2,-1) nonspecial
        let cl = c.classify(&Point::Inf);
        assert_eq!((cl.r, cl.s), (-2, -1));
        assert_eq!(cl.kind, PointKind::NonSpecial);

        // dx = dz, dy = dz at 0: (1,1) nonspecial
        let c2 = parse_curve("dx = dz; dy = dz; keys = []").unwrap();
        let cl = c2.classify(&Point::Finite(Q::zero()));
        assert_eq!((cl.r, cl.s), (1, 1));
        assert_eq!(cl.kind, PointKind::NonSpecial);
    }

    #[test]
    fn special_point_sets() {
        // Airy: unique special point 0
        let c = parse_curve("dx = z dz; dy = dz; keys = [0]").unwrap();
        let sp = c.special_points().unwrap();
        assert_eq!(sp.len(), 1);
        assert_eq!(sp[0].point, Point::Finite(Q::zero()));

        // dx=(z-1)dz, dy=(z+1)dz -> {1,-1} with (2,1) and (1,2)
        let c = parse_curve("dx = (z-1) dz; dy = (z+1) dz; keys = [1]").unwrap();
        let sp = c.special_points().unwrap();
        let pts: Vec<Point> = sp.iter().map(|p| p.point.clone()).collect();
        assert_eq!(pts, vec![Point::Finite(qi(-1)), Point::Finite(qi(1))]);

        // (log z, z): dx = dz/z, dy = dz -> {0}, inf gives (0,-1) nonspecial
        let c = parse_curve("dx = z^-1 dz; dy = dz; keys = [0]").unwrap();
        let sp = c.special_points().unwrap();
        assert_eq!(sp.len(), 1);
        assert_eq!(sp[0].point, Point::Finite(Q::zero()));
        assert_eq!((sp[0].r, sp[0].s), (0, 1));
    }

    #[test]
    fn dual_curve_examples() {
        // Airy with P={0}: dual keys empty
        let c = parse_curve("dx = z dz; dy = dz; keys = [0]").unwrap();
        let d = c.dual_curve().unwrap();
        assert!(d.keys.is_empty());

        // mixed: keys {1} -> dual keys {-1}
        let c = parse_curve("dx = (z-1) dz; dy = (z+1) dz; keys = [1]").unwrap();
        let d = c.dual_curve().unwrap();
        assert_eq!(d.keys, vec![Point::Finite(qi(-1))]);

        // involution
        let dd = d.dual_curve().unwrap();
        assert_eq!(dd.keys, c.keys);
        assert_eq!(dd.dx.density, c.dx.density);
    }

    #[test]
    fn key_not_special_rejected() {
        let err = parse_curve("dx = dz; dy = dz; keys = [5]").unwrap_err();
        match err {
            EngineError::KeyNotSpecial(p) => assert_eq!(p, "5"),
            other => panic!("expected KeyNotSpecial, got {other:?}"),
        }
    }

    #[test]
    fn irrational_special_point_rejected() {
        // dx = (z^2-2)dz has irrational simple zeros (r=2, s=1): special
        let err = parse_curve("dx = (z^2-2) dz; dy = dz; keys = []").unwrap_err();
        assert!(matches!(err, EngineError::IrrationalSpecialPoint(_)));
    }

    #[test]
    fn irrational_nonspecial_accepted() {
        // dx = dz/(z^2-2)^2, dy = dz: at roots of z^2-2: r = 1-2 = -1, s = 1:
        // r+s = 0 -> nonspecial, so the curve validates
        let c = parse_curve("dx = (z^2-2)^-2 dz; dy = dz; keys = []").unwrap();
        assert!(c.special_points().unwrap().iter().all(|p| p.point == Point::Inf));
    }

    #[test]
    fn classification_swap_symmetry() {
        // the nonspecial predicate is symmetric under (dx<->dy, r<->s)
        let c = parse_curve("dx = z^2 (z-1) dz; dy = (z+2)^-1 dz; keys = []").unwrap();
        let swapped = SpectralCurve::new(c.dy.clone(), c.dx.clone(), vec![], "swap").unwrap();
        for q in [
            Point::Finite(qi(0)),
            Point::Finite(qi(1)),
            Point::Finite(qi(-2)),
            Point::Finite(qi(7)),
            Point::Inf,
        ] {
            let a = c.classify(&q);
            let b = swapped.classify(&q);
            assert_eq!((a.r, a.s), (b.s, b.r));
            assert_eq!(a.kind, b.kind);
        }
        // and the special sets agree as sets
        let s1: Vec<Point> = c.special_points().unwrap().iter().map(|p| p.point.clone()).collect();
        let s2: Vec<Point> = swapped.special_points().unwrap().iter().map(|p| p.point.clone()).collect();
        assert_eq!(s1, s2);
    }

    #[test]
    fn x_form_statements() {
        // x = z^2/2 differentiates to dx = z dz
        let c = parse_curve("x = z^2/2; y = z; keys = [0]").unwrap();
        let c2 = parse_curve("dx = z dz; dy = dz; keys = [0]").unwrap();
        assert_eq!(c.dx.density, c2.dx.density);
        assert_eq!(c.dy.density, c2.dy.density);
    }
}
