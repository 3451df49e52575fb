//! Exact integer arithmetic underneath everything else: Kronecker symbols,
//! p-adic valuations and square classes, Hilbert symbols, and deterministic
//! factorization.
//!
//! All functions here are total over their documented domains and use only
//! fixed-width integers; factorization of large inputs falls back to Brent's
//! cycle finder with fixed, deterministic parameters.

use std::sync::OnceLock;
use thiserror::Error;

/// Trial-division bound for [`factorize`]; cofactors below the square of this
/// bound are prime by construction.
pub const TRIAL_DIVISION_BOUND: u64 = 1_000_000;

/// A place of the rationals: the archimedean one or a finite prime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Place {
    Infinity,
    Prime(u128),
}

/// Ramification behaviour of a prime relative to the discriminant `D` of
/// `Q(sqrt(D))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrimeType {
    /// `p | D`.
    Ramified,
    /// `D` is a nonzero square modulo `p` (for `p = 2`: `D = 1 mod 8`).
    Split,
    /// `D` is a non-square modulo `p`.
    Inert,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ArithError {
    #[error("argument must be nonzero")]
    Zero,
    #[error("modulus is not an odd prime or 2: {0}")]
    BadPrime(u128),
    #[error("modulus must be composed of ramified primes: {0}")]
    BadModulus(u128),
    #[error("argument outside the defined domain: {0}")]
    OutOfDomain(&'static str),
}

/// Full Kronecker symbol `(a/n)`, extending the Jacobi symbol to all integers
/// `n` (including zero, negatives, and even moduli).
pub fn kronecker(a: i128, n: i128) -> i32 {
    if n == 0 {
        return i32::from(a == 1 || a == -1);
    }
    let mut a = a;
    let mut n = n;
    let mut k = 1i32;
    if n < 0 {
        n = -n;
        if a < 0 {
            k = -k;
        }
    }
    // Split off the even part of n; (a/2) depends on a mod 8.
    while n % 2 == 0 {
        n /= 2;
        if a % 2 == 0 {
            return 0;
        }
        let r = a.rem_euclid(8);
        if r == 3 || r == 5 {
            k = -k;
        }
    }
    // Jacobi loop on odd n > 0. The reciprocity twist must look at both odd
    // values before the reduction step, not after it.
    a = a.rem_euclid(n);
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            let r = n % 8;
            if r == 3 || r == 5 {
                k = -k;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if a % 4 == 3 && n % 4 == 3 {
            k = -k;
        }
        a %= n;
    }
    if n == 1 {
        k
    } else {
        0
    }
}

/// `v_p(n)`: the exponent of `p` in `n`. Panics on `n = 0` (infinite valuation).
pub fn valuation(n: i128, p: u128) -> u32 {
    assert!(n != 0, "valuation of zero is infinite");
    debug_assert!(p >= 2);
    let mut m = n.unsigned_abs();
    let mut v = 0;
    while m % p == 0 {
        m /= p;
        v += 1;
    }
    v
}

/// The class of a nonzero integer in `Q_p^* / (Q_p^*)^2`-friendly coordinates:
/// valuation plus the unit part reduced mod `p` (odd `p`) or mod 8 (`p = 2`).
///
/// Together with the sign this reconstructs `n` modulo `p^(v+1)` up to unit
/// squares, which is exactly what square detection and Hilbert symbols need.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PAdicClass {
    pub p: u128,
    pub valuation: u32,
    /// `n / p^v mod p` for odd `p`, `n / 2^v mod 8` for `p = 2`; always in
    /// canonical nonnegative range.
    pub unit: u128,
}

impl PAdicClass {
    /// Decompose nonzero `n` at the prime `p`.
    pub fn of(n: i128, p: u128) -> Self {
        assert!(n != 0);
        let v = valuation(n, p);
        let modulus = if p == 2 { 8 } else { p };
        let unit = (n / (p.pow(v) as i128)).rem_euclid(modulus as i128) as u128;
        PAdicClass {
            p,
            valuation: v,
            unit,
        }
    }

    /// Whether the class is a square in `Q_p^*`.
    pub fn is_square(&self) -> bool {
        if self.valuation % 2 != 0 {
            return false;
        }
        if self.p == 2 {
            self.unit == 1
        } else {
            kronecker(self.unit as i128, self.p as i128) == 1
        }
    }
}

/// Whether nonzero `n` is a square in the completion at `place`.
pub fn is_square_in_qp(n: i128, place: Place) -> bool {
    assert!(n != 0);
    match place {
        Place::Infinity => n > 0,
        Place::Prime(p) => PAdicClass::of(n, p).is_square(),
    }
}

/// Hilbert symbol `(a, b)` at `place`, for nonzero `a`, `b`. Returns `+1` or `-1`.
pub fn hilbert_symbol(a: i128, b: i128, place: Place) -> i32 {
    assert!(a != 0 && b != 0);
    match place {
        Place::Infinity => {
            if a < 0 && b < 0 {
                -1
            } else {
                1
            }
        }
        Place::Prime(2) => {
            let (alpha, u) = split_valuation(a, 2);
            let (beta, v) = split_valuation(b, 2);
            // exponent of -1: eps(u)eps(v) + alpha*omega(v) + beta*omega(u)
            let eps = |x: i128| ((x - 1) / 2).rem_euclid(2);
            let omega = |x: i128| ((x * x - 1) / 8).rem_euclid(2);
            let s = eps(u) * eps(v) + (alpha as i128) * omega(v) + (beta as i128) * omega(u);
            if s % 2 == 0 {
                1
            } else {
                -1
            }
        }
        Place::Prime(p) => {
            let (alpha, u) = split_valuation(a, p);
            let (beta, v) = split_valuation(b, p);
            let mut sym = 1i32;
            if alpha % 2 == 1 && beta % 2 == 1 && (p - 1) / 2 % 2 == 1 {
                sym = -sym;
            }
            if beta % 2 == 1 {
                sym *= kronecker(u, p as i128);
            }
            if alpha % 2 == 1 {
                sym *= kronecker(v, p as i128);
            }
            sym
        }
    }
}

fn split_valuation(n: i128, p: u128) -> (u32, i128) {
    let v = valuation(n, p);
    (v, n / (p.pow(v) as i128))
}

/// Ramification type of the prime `p` for the discriminant `d`.
///
/// Precondition (not re-checked here): `d` is squarefree, `d > 1`,
/// `d = 1 mod 8`. Under that hypothesis `2` is always split.
pub fn prime_type(p: u128, d: i128) -> PrimeType {
    if d % (p as i128) == 0 {
        PrimeType::Ramified
    } else if kronecker(d, p as i128) == 1 {
        PrimeType::Split
    } else {
        PrimeType::Inert
    }
}

/// Signed prime factorization. Factors are sorted ascending with positive
/// exponents; `1` and `-1` factor into the empty product.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeFactorization {
    /// `+1` or `-1`.
    pub sign: i8,
    pub factors: Vec<(u128, u32)>,
}

impl PrimeFactorization {
    /// Multiply the factorization back together.
    pub fn value(&self) -> i128 {
        let mut v = self.sign as i128;
        for &(p, e) in &self.factors {
            for _ in 0..e {
                v *= p as i128;
            }
        }
        v
    }

    pub fn valuation(&self, p: u128) -> u32 {
        self.factors
            .iter()
            .find(|&&(q, _)| q == p)
            .map_or(0, |&(_, e)| e)
    }

    /// Distinct primes, ascending.
    pub fn primes(&self) -> impl Iterator<Item = u128> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e == 1)
    }
}

fn small_primes() -> &'static [u32] {
    static PRIMES: OnceLock<Vec<u32>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        let n = TRIAL_DIVISION_BOUND as usize;
        let mut sieve = vec![true; n + 1];
        sieve[0] = false;
        sieve[1] = false;
        let mut i = 2usize;
        while i * i <= n {
            if sieve[i] {
                let mut j = i * i;
                while j <= n {
                    sieve[j] = false;
                    j += i;
                }
            }
            i += 1;
        }
        (2..=n).filter(|&i| sieve[i]).map(|i| i as u32).collect()
    })
}

/// Deterministic factorization of a nonzero integer: trial division below
/// [`TRIAL_DIVISION_BOUND`], then Miller-Rabin plus Brent's rho with fixed
/// parameters. Suitable for inputs up to roughly `2^96`; larger cofactors
/// still factor correctly, just slowly.
pub fn factorize(n: i128) -> Result<PrimeFactorization, ArithError> {
    if n == 0 {
        return Err(ArithError::Zero);
    }
    let sign = if n < 0 { -1 } else { 1 };
    let mut m = n.unsigned_abs();
    let mut factors: Vec<(u128, u32)> = Vec::new();
    for &p in small_primes() {
        let p = p as u128;
        if p * p > m {
            break;
        }
        if m % p == 0 {
            let mut e = 0;
            while m % p == 0 {
                m /= p;
                e += 1;
            }
            factors.push((p, e));
        }
    }
    if m > 1 {
        let mut stack = vec![m];
        let mut large: Vec<u128> = Vec::new();
        while let Some(x) = stack.pop() {
            if x < (TRIAL_DIVISION_BOUND as u128).pow(2) || is_prime_u128(x) {
                large.push(x);
            } else {
                let d = brent_rho(x);
                stack.push(d);
                stack.push(x / d);
            }
        }
        large.sort_unstable();
        for p in large {
            match factors.iter_mut().find(|(q, _)| *q == p) {
                Some((_, e)) => *e += 1,
                None => factors.push((p, 1)),
            }
        }
    }
    factors.sort_unstable_by_key(|&(p, _)| p);
    Ok(PrimeFactorization { sign, factors })
}

/// Deterministic Miller-Rabin. The base set decides correctly for all inputs
/// below 3.3 * 10^24; beyond that the extra bases make a pseudoprime
/// astronomically unlikely while keeping the function deterministic.
pub fn is_prime_u128(n: u128) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &[2u128, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let d = n - 1;
    let s = d.trailing_zeros();
    let d = d >> s;
    'base: for &a in &[
        2u128, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 53, 59, 61, 67, 71,
    ] {
        let a = a % n;
        if a == 0 {
            continue;
        }
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'base;
            }
        }
        return false;
    }
    true
}

/// `a * b mod m` without overflow for any `m < 2^127`.
pub fn mul_mod(a: u128, b: u128, m: u128) -> u128 {
    debug_assert!(m > 0);
    let (a, b) = (a % m, b % m);
    if m <= u64::MAX as u128 {
        return a * b % m;
    }
    // Double-and-add; only reached for moduli above 64 bits.
    let (mut a, mut b) = (a, b);
    let mut acc = 0u128;
    while b > 0 {
        if b & 1 == 1 {
            acc = add_mod(acc, a, m);
        }
        a = add_mod(a, a, m);
        b >>= 1;
    }
    acc
}

fn add_mod(a: u128, b: u128, m: u128) -> u128 {
    let r = a.wrapping_add(b);
    if r < a || r >= m {
        r.wrapping_sub(m)
    } else {
        r
    }
}

pub fn pow_mod(mut base: u128, mut exp: u128, m: u128) -> u128 {
    let mut acc = 1u128 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Inverse of `a` mod an odd prime `p`, via Fermat. Panics if `p | a`.
pub fn inv_mod_prime(a: i128, p: u128) -> u128 {
    let a = a.rem_euclid(p as i128) as u128;
    assert!(a != 0, "no inverse: {p} divides the argument");
    pow_mod(a, p - 2, p)
}

/// A square root of `a` mod an odd prime `p`, if one exists
/// (Tonelli–Shanks; the 3 mod 4 case short-circuits to one exponentiation).
pub fn sqrt_mod_prime(a: i128, p: u128) -> Option<u128> {
    debug_assert!(p > 2 && p % 2 == 1);
    let a = a.rem_euclid(p as i128) as u128;
    if a == 0 {
        return Some(0);
    }
    if kronecker(a as i128, p as i128) != 1 {
        return None;
    }
    if p % 4 == 3 {
        return Some(pow_mod(a, (p + 1) / 4, p));
    }
    let s = (p - 1).trailing_zeros();
    let q = (p - 1) >> s;
    let mut z = 2u128;
    while kronecker(z as i128, p as i128) != -1 {
        z += 1;
    }
    let mut m = s;
    let mut c = pow_mod(z, q, p);
    let mut t = pow_mod(a, q, p);
    let mut r = pow_mod(a, (q + 1) / 2, p);
    while t != 1 {
        let mut i = 0;
        let mut t2 = t;
        while t2 != 1 {
            t2 = mul_mod(t2, t2, p);
            i += 1;
        }
        let b = pow_mod(c, 1u128 << (m - i - 1), p);
        m = i;
        c = mul_mod(b, b, p);
        t = mul_mod(t, c, p);
        r = mul_mod(r, b, p);
    }
    Some(r)
}

/// Brent's variant of Pollard rho with fixed increments; input must be odd,
/// composite, and free of factors below the trial-division bound.
fn brent_rho(n: u128) -> u128 {
    debug_assert!(n % 2 == 1);
    for c in 1u128.. {
        if let Some(d) = brent_rho_attempt(n, c) {
            return d;
        }
    }
    unreachable!()
}

fn brent_rho_attempt(n: u128, c: u128) -> Option<u128> {
    let f = |x: u128| add_mod(mul_mod(x, x, n), c, n);
    let mut x = 2u128;
    let mut cycle = 1u128;
    loop {
        let y = x;
        for _ in 0..cycle {
            x = f(x);
        }
        let mut count = 0u128;
        while count < cycle {
            let mut prod = 1u128;
            let save = x;
            let batch = cycle.min(128).min(cycle - count);
            for _ in 0..batch {
                x = f(x);
                prod = mul_mod(prod, x.abs_diff(y), n);
            }
            count += batch;
            let g = gcd_u128(prod, n);
            if g > 1 {
                if g < n {
                    return Some(g);
                }
                // Batch overshot; retrace one step at a time.
                let mut x2 = save;
                for _ in 0..batch {
                    x2 = f(x2);
                    let g = gcd_u128(x2.abs_diff(y), n);
                    if g > 1 {
                        return if g < n { Some(g) } else { None };
                    }
                }
                return None;
            }
        }
        cycle *= 2;
        if cycle > 1 << 40 {
            return None;
        }
    }
}

fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Integer square root of a nonnegative `i128`.
pub fn isqrt(n: i128) -> i128 {
    assert!(n >= 0);
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as i128;
    // Newton correction to kill float rounding at the boundary.
    while x > 0 && x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

/// Whether `n` is a perfect square of an integer.
pub fn is_perfect_square(n: i128) -> bool {
    if n < 0 {
        return false;
    }
    let r = isqrt(n);
    r * r == n
}
