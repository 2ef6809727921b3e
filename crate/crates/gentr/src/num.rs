//! Exact rational scalars and small combinatorial helpers.
//!
//! All coefficient arithmetic in this crate happens over `Q`
//! (arbitrary-precision rationals, always stored in lowest terms with a
//! positive denominator).

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};

pub type Z = BigInt;
pub type Q = num_rational::BigRational;

pub fn qi(n: i64) -> Q {
    Q::from_integer(Z::from(n))
}

pub fn qr(num: i64, den: i64) -> Q {
    assert!(den != 0, "zero denominator");
    Q::new(Z::from(num), Z::from(den))
}

/// Parse an exact fraction string: `-3`, `7/24`, `+1/2`.
pub fn parse_q(s: &str) -> Option<Q> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: Z = n.trim().parse().ok()?;
            let d: Z = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(Q::new(n, d))
        }
        None => {
            let n: Z = s.parse().ok()?;
            Some(Q::from_integer(n))
        }
    }
}

/// Render a rational as `p` or `p/q` in lowest terms.
pub fn fmt_q(q: &Q) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn factorial(n: u64) -> Q {
    let mut acc = Z::one();
    for k in 2..=n {
        acc *= Z::from(k);
    }
    Q::from_integer(acc)
}

/// Coefficients of `S(u) = u^{-1}(e^{u/2} - e^{-u/2})`:
/// `s_{2i} = 1 / (2^{2i} (2i+1)!)`, the coefficient of `u^{2i}`.
pub fn s_coeff(i: u64) -> Q {
    let pow = Z::one() << (2 * i) as usize;
    (Q::from_integer(pow) * factorial(2 * i + 1)).recip()
}

/// Coefficients `c_{2i}` of `1/S(u) - 1 = sum_{i>=1} c_{2i} u^{2i}`.
pub fn inv_s_coeffs(max_i: usize) -> Vec<Q> {
    // invert the power series S(u) in u^2 steps
    let s: Vec<Q> = (0..=max_i as u64).map(s_coeff).collect();
    let mut inv = vec![Q::zero(); max_i + 1];
    inv[0] = Q::one();
    for k in 1..=max_i {
        let mut acc = Q::zero();
        for j in 1..=k {
            acc += &s[j] * &inv[k - j];
        }
        inv[k] = -acc;
    }
    inv
}

/// Divisors of a nonzero big integer, via trial division plus Pollard rho.
/// Complete for any input that factors within the rho budget; curve data in
/// practice keeps these numbers tiny.
pub fn divisors(n: &Z) -> Vec<Z> {
    let n = n.abs();
    let mut m: BigUint = n.to_biguint().expect("abs");
    let mut factors: Vec<(BigUint, u32)> = Vec::new();
    let push = |p: BigUint, factors: &mut Vec<(BigUint, u32)>| {
        if let Some(e) = factors.iter_mut().find(|(q, _)| *q == p) {
            e.1 += 1;
        } else {
            factors.push((p, 1));
        }
    };
    let mut d = BigUint::from(2u32);
    while &d * &d <= m {
        while (&m % &d).is_zero() {
            push(d.clone(), &mut factors);
            m /= &d;
        }
        if d > BigUint::from(1u32 << 20) {
            break;
        }
        d += 1u32;
    }
    if !m.is_one() {
        // rho on the remaining cofactor; recurse on split pieces
        fn rho_split(m: BigUint, out: &mut Vec<BigUint>) {
            if m.is_one() {
                return;
            }
            if is_probable_prime(&m) {
                out.push(m);
                return;
            }
            let d = pollard_rho(&m);
            rho_split(&m / &d, out);
            rho_split(d, out);
        }
        let mut primes = Vec::new();
        rho_split(m, &mut primes);
        for p in primes {
            push(p, &mut factors);
        }
    }
    let mut divs = vec![Z::one()];
    for (p, e) in factors {
        let p = Z::from_biguint(num_bigint::Sign::Plus, p);
        let mut next = Vec::with_capacity(divs.len() * (e as usize + 1));
        for d in &divs {
            let mut acc = d.clone();
            next.push(acc.clone());
            for _ in 0..e {
                acc = &acc * &p;
                next.push(acc.clone());
            }
        }
        divs = next;
    }
    divs.sort();
    divs.dedup();
    divs
}

fn modpow(base: &BigUint, exp: &BigUint, m: &BigUint) -> BigUint {
    base.modpow(exp, m)
}

fn is_probable_prime(n: &BigUint) -> bool {
    if *n < BigUint::from(2u32) {
        return false;
    }
    for p in [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let p = BigUint::from(p);
        if *n == p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    // Miller-Rabin with fixed bases (deterministic far beyond our sizes)
    let one = BigUint::one();
    let two = BigUint::from(2u32);
    let nm1 = n - &one;
    let mut d = nm1.clone();
    let mut r = 0u32;
    while (&d % &two).is_zero() {
        d /= &two;
        r += 1;
    }
    'outer: for a in [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let a = BigUint::from(a);
        let mut x = modpow(&a, &d, n);
        if x == one || x == nm1 {
            continue;
        }
        for _ in 0..r.saturating_sub(1) {
            x = modpow(&x, &two, n);
            if x == nm1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

fn pollard_rho(n: &BigUint) -> BigUint {
    use num_integer::Integer;
    let one = BigUint::one();
    let two = BigUint::from(2u32);
    if (n % &two).is_zero() {
        return two;
    }
    let mut c = BigUint::from(1u32);
    loop {
        let mut x = BigUint::from(2u32);
        let mut y = BigUint::from(2u32);
        let mut d = one.clone();
        while d == one {
            x = (&x * &x + &c) % n;
            y = (&y * &y + &c) % n;
            y = (&y * &y + &c) % n;
            let diff = if x > y { &x - &y } else { &y - &x };
            if diff.is_zero() {
                break;
            }
            d = diff.gcd(n);
        }
        if d != one && &d != n {
            return d;
        }
        c += 1u32;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s_series_constants() {
        // [u^0]S = 1, [u^2]S = 1/24, [u^4]S = 1/1920
        assert_eq!(s_coeff(0), qi(1));
        assert_eq!(s_coeff(1), qr(1, 24));
        assert_eq!(s_coeff(2), qr(1, 1920));
    }

    #[test]
    fn inv_s_series() {
        // 1/S = 1 - u^2/24 + 7u^4/5760 - ...
        let c = inv_s_coeffs(2);
        assert_eq!(c[0], qi(1));
        assert_eq!(c[1], qr(-1, 24));
        assert_eq!(c[2], qr(7, 5760));
    }

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_q("7/24"), Some(qr(7, 24)));
        assert_eq!(parse_q("-3"), Some(qi(-3)));
        assert_eq!(fmt_q(&qr(-6, 4)), "-3/2");
    }

    #[test]
    fn divisor_enumeration() {
        let d = divisors(&Z::from(12));
        let want: Vec<Z> = [1, 2, 3, 4, 6, 12].iter().map(|&x| Z::from(x)).collect();
        assert_eq!(d, want);
        assert_eq!(divisors(&Z::from(1)), vec![Z::one()]);
    }
}
