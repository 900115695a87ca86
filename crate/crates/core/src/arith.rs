//! Exact integer and real-quadratic-surd arithmetic.
//!
//! Everything here is exact: integers are [`BigInt`], surds carry a fixed
//! denominator of two, and no floating point is used anywhere.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision signed integer used throughout the crate.
pub type Int = BigInt;

/// `floor(sqrt(n))` for `n >= 0`.
pub fn isqrt(n: &Int) -> Result<Int> {
    if n.is_negative() {
        return Err(Error::invalid(format!("isqrt of negative number {n}")));
    }
    Ok(n.sqrt())
}

pub fn is_square(n: &Int) -> bool {
    if n.is_negative() {
        return false;
    }
    let r = n.sqrt();
    &r * &r == *n
}

const KRONECKER_TWO: [i32; 8] = [0, 1, 0, -1, 0, -1, 0, 1];

/// Kronecker symbol `(a/n)`, the extension of the Legendre and Jacobi symbols
/// to every nonzero modulus.
pub fn kronecker(a: &Int, n: &Int) -> Result<i32> {
    if n.is_zero() {
        return Err(Error::invalid("kronecker symbol with modulus 0"));
    }
    let mut sign = 1;
    let mut n = n.clone();
    if n.is_negative() {
        n = -n;
        if a.is_negative() {
            sign = -sign;
        }
    }
    let twos = n.trailing_zeros().unwrap_or(0);
    if twos > 0 {
        if a.is_even() {
            return Ok(0);
        }
        if twos % 2 == 1 {
            sign *= KRONECKER_TWO[mod_small(a, 8) as usize];
        }
        n >>= twos;
    }
    Ok(sign * jacobi(&a.mod_floor(&n), &n))
}

/// Jacobi symbol for odd positive `n` and `0 <= a < n`.
fn jacobi(a: &Int, n: &Int) -> i32 {
    let mut a = a.clone();
    let mut n = n.clone();
    let mut result = 1;
    while !a.is_zero() {
        let twos = a.trailing_zeros().unwrap_or(0);
        a >>= twos;
        if twos % 2 == 1 {
            let r = mod_small(&n, 8);
            if r == 3 || r == 5 {
                result = -result;
            }
        }
        if mod_small(&a, 4) == 3 && mod_small(&n, 4) == 3 {
            result = -result;
        }
        std::mem::swap(&mut a, &mut n);
        a = a.mod_floor(&n);
    }
    if n.is_one() {
        result
    } else {
        0
    }
}

fn mod_small(a: &Int, m: u32) -> u32 {
    a.mod_floor(&Int::from(m)).to_u32().expect("residue fits in u32")
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64 % m;
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

/// Deterministic Miller-Rabin; the first twelve prime bases are a proof of
/// primality for every 64-bit input.
pub fn is_prime_u64(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &BASES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Primality with a certain answer. Inputs beyond 64 bits fall back to
/// trial division, which is slow but never probabilistic.
pub fn is_prime(n: &Int) -> bool {
    if let Some(small) = n.to_u64() {
        return is_prime_u64(small);
    }
    if n.is_negative() {
        return false;
    }
    let f = factorize(n).expect("positive input");
    f.factors.len() == 1 && f.factors[0].1 == 1
}

/// Prime factorization as `(prime, exponent)` pairs with strictly increasing primes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Factorization {
    pub factors: Vec<(Int, u32)>,
}

impl Factorization {
    pub fn primes(&self) -> impl Iterator<Item = &Int> {
        self.factors.iter().map(|(p, _)| p)
    }

    pub fn value(&self) -> Int {
        self.factors
            .iter()
            .fold(Int::one(), |acc, (p, e)| acc * num_traits::pow(p.clone(), *e as usize))
    }
}

pub fn factorize(n: &Int) -> Result<Factorization> {
    if !n.is_positive() {
        return Err(Error::invalid(format!("cannot factor non-positive {n}")));
    }
    let mut factors = Vec::new();
    let mut rest = n.clone();
    let mut d = Int::from(2u32);
    // Big cofactors: plain trial division until the cofactor fits in 64 bits.
    while rest.to_u64().is_none() {
        if &d * &d > rest {
            factors.push((rest.clone(), 1));
            return Ok(Factorization { factors });
        }
        let mut e = 0;
        while (&rest % &d).is_zero() {
            rest /= &d;
            e += 1;
        }
        if e > 0 {
            factors.push((d.clone(), e));
        }
        d += if d == Int::from(2u32) { 1u32 } else { 2u32 };
    }
    let start = d.to_u64().expect("trial divisor fits in u64");
    for (p, e) in factorize_u64_from(rest.to_u64().expect("checked above"), start) {
        factors.push((Int::from(p), e));
    }
    Ok(Factorization { factors })
}

pub(crate) fn factorize_u64(n: u64) -> Vec<(u64, u32)> {
    factorize_u64_from(n, 2)
}

fn factorize_u64_from(mut n: u64, mut d: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    if n <= 1 {
        return out;
    }
    if (n as usize) < SPF_LIMIT {
        let spf = spf_table();
        while n > 1 {
            let p = spf[n as usize] as u64;
            let mut e = 0;
            while n.is_multiple_of(p) {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        return out;
    }
    let mut cofactor_prime = is_prime_u64(n);
    while n > 1 && !cofactor_prime {
        if (d as u128) * (d as u128) > n as u128 {
            break;
        }
        if n.is_multiple_of(d) {
            let mut e = 0;
            while n.is_multiple_of(d) {
                n /= d;
                e += 1;
            }
            out.push((d, e));
            cofactor_prime = is_prime_u64(n);
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

const SPF_LIMIT: usize = 1 << 22;

/// Smallest-prime-factor table for `n < 2^22`, built on first use.
fn spf_table() -> &'static [u32] {
    static TABLE: OnceLock<Vec<u32>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut spf = vec![0u32; SPF_LIMIT];
        for i in 2..SPF_LIMIT {
            if spf[i] == 0 {
                let mut j = i;
                while j < SPF_LIMIT {
                    if spf[j] == 0 {
                        spf[j] = i as u32;
                    }
                    j += i;
                }
            }
        }
        spf
    })
}

/// All positive divisors of `n >= 1`, unsorted.
pub(crate) fn divisors_u64(n: u64) -> Vec<u64> {
    let mut divs = vec![1u64];
    for (p, e) in factorize_u64(n) {
        let len = divs.len();
        let mut pk = 1u64;
        for _ in 0..e {
            pk *= p;
            for i in 0..len {
                divs.push(divs[i] * pk);
            }
        }
    }
    divs
}

/// Lucas sequence `V_k(t, 1)`: `V_0 = 2`, `V_1 = t`, `V_{j+1} = t V_j - V_{j-1}`.
///
/// For any 2x2 integer matrix of determinant one and trace `t` this is the
/// trace of its `k`-th power, i.e. `2 T_k(t/2)` with `T_k` the Chebyshev
/// polynomial of the first kind.
pub fn lucas_v(t: &Int, k: u32) -> Int {
    let mut prev = Int::from(2u32);
    if k == 0 {
        return prev;
    }
    let mut cur = t.clone();
    for _ in 1..k {
        let next = t * &cur - &prev;
        prev = std::mem::replace(&mut cur, next);
    }
    cur
}

/// Element `(x + y sqrt(d)) / 2` of a real quadratic field.
///
/// `d` is a positive non-square. The numerators satisfy the integrality
/// condition of the order they live in: `x = y (mod 2)` when `d = 1 (mod 4)`,
/// `x` even when `d = 0 (mod 4)` and both even otherwise. Every such element
/// has `x = y d (mod 2)` and the set is closed under `+` and `*`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QuadSurd {
    x: Int,
    y: Int,
    d: Int,
}

impl QuadSurd {
    pub fn new(x: Int, y: Int, d: Int) -> Result<Self> {
        if !d.is_positive() || is_square(&d) {
            return Err(Error::invalid(format!("radicand {d} must be a positive non-square")));
        }
        let ok = match mod_small(&d, 4) {
            1 => (&x - &y).is_even(),
            0 => x.is_even(),
            _ => x.is_even() && y.is_even(),
        };
        if !ok {
            return Err(Error::invalid(format!(
                "({x} + {y}*sqrt({d}))/2 is not integral over Z"
            )));
        }
        Ok(QuadSurd { x, y, d })
    }

    pub fn from_int(n: &Int, d: &Int) -> Result<Self> {
        Self::new(n * 2, Int::zero(), d.clone())
    }

    pub fn one(d: &Int) -> Result<Self> {
        Self::from_int(&Int::one(), d)
    }

    /// `sqrt(d)` itself, i.e. `(0 + 2 sqrt(d)) / 2`.
    pub fn sqrt_of(d: &Int) -> Result<Self> {
        Self::new(Int::zero(), Int::from(2u32), d.clone())
    }

    pub fn x(&self) -> &Int {
        &self.x
    }

    pub fn y(&self) -> &Int {
        &self.y
    }

    pub fn radicand(&self) -> &Int {
        &self.d
    }

    /// Field trace, which equals `x`.
    pub fn trace(&self) -> &Int {
        &self.x
    }

    /// Four times the field norm: `x^2 - d y^2`.
    pub fn norm4(&self) -> Int {
        &self.x * &self.x - &self.d * &self.y * &self.y
    }

    pub fn conj(&self) -> Self {
        QuadSurd { x: self.x.clone(), y: -&self.y, d: self.d.clone() }
    }

    pub fn is_rational(&self) -> bool {
        self.y.is_zero()
    }

    /// The integer value when the surd part vanishes.
    pub fn to_integer(&self) -> Option<Int> {
        if self.y.is_zero() && self.x.is_even() {
            Some(&self.x / 2)
        } else {
            None
        }
    }

    /// Sign of the real number `(x + y sqrt(d)) / 2`, computed exactly.
    pub fn signum(&self) -> i32 {
        let sx = self.x.sign();
        let sy = self.y.sign();
        use num_bigint::Sign::*;
        match (sx, sy) {
            (NoSign, NoSign) => 0,
            (Plus, Plus) | (Plus, NoSign) | (NoSign, Plus) => 1,
            (Minus, Minus) | (Minus, NoSign) | (NoSign, Minus) => -1,
            _ => {
                // x and y sqrt(d) have opposite signs; compare squares.
                let lhs = &self.x * &self.x;
                let rhs = &self.d * &self.y * &self.y;
                let x_wins = lhs > rhs;
                match (sx, x_wins) {
                    (Plus, true) | (Minus, false) => 1,
                    _ => -1,
                }
            }
        }
    }

    pub fn pow(&self, mut e: u32) -> Self {
        let mut acc = QuadSurd::one(&self.d).expect("radicand already validated");
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        acc
    }

    fn assert_same_field(&self, other: &Self) {
        assert_eq!(self.d, other.d, "surds over different radicands");
    }
}

impl fmt::Display for QuadSurd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} + {}*sqrt({}))/2", self.x, self.y, self.d)
    }
}

impl Add for &QuadSurd {
    type Output = QuadSurd;
    fn add(self, rhs: &QuadSurd) -> QuadSurd {
        self.assert_same_field(rhs);
        QuadSurd { x: &self.x + &rhs.x, y: &self.y + &rhs.y, d: self.d.clone() }
    }
}

impl Sub for &QuadSurd {
    type Output = QuadSurd;
    fn sub(self, rhs: &QuadSurd) -> QuadSurd {
        self.assert_same_field(rhs);
        QuadSurd { x: &self.x - &rhs.x, y: &self.y - &rhs.y, d: self.d.clone() }
    }
}

impl Neg for &QuadSurd {
    type Output = QuadSurd;
    fn neg(self) -> QuadSurd {
        QuadSurd { x: -&self.x, y: -&self.y, d: self.d.clone() }
    }
}

impl Mul for &QuadSurd {
    type Output = QuadSurd;
    fn mul(self, rhs: &QuadSurd) -> QuadSurd {
        self.assert_same_field(rhs);
        let x = &self.x * &rhs.x + &self.d * &self.y * &rhs.y;
        let y = &self.x * &rhs.y + &rhs.x * &self.y;
        debug_assert!(x.is_even() && y.is_even());
        QuadSurd { x: x / 2, y: y / 2, d: self.d.clone() }
    }
}

/// Value of `2 T_k(sqrt(delta + 4) / 2) - 2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChebValue {
    Integer(Int),
    /// The surd part is nonzero; carries the exact irrational value.
    NonInteger(QuadSurd),
}

impl ChebValue {
    pub fn as_integer(&self) -> Option<&Int> {
        match self {
            ChebValue::Integer(n) => Some(n),
            ChebValue::NonInteger(_) => None,
        }
    }
}

/// Evaluates `2 T_k(sqrt(delta+4)/2) - 2` exactly, reading the trace of the
/// matrix as `sqrt(delta + 4)`.
pub fn cheb_paper(delta: &Int, k: u32) -> Result<ChebValue> {
    if delta < &Int::one() {
        return Err(Error::invalid(format!("delta must be >= 1, got {delta}")));
    }
    let radicand = delta + 4u32;
    if is_square(&radicand) {
        let m = radicand.sqrt();
        return Ok(ChebValue::Integer(lucas_v(&m, k) - 2u32));
    }
    let x = QuadSurd::sqrt_of(&radicand)?;
    let mut prev = QuadSurd::from_int(&Int::from(2u32), &radicand)?;
    let mut cur = if k == 0 { prev.clone() } else { x.clone() };
    for _ in 1..k {
        let next = &(&x * &cur) - &prev;
        prev = std::mem::replace(&mut cur, next);
    }
    let value = &cur - &QuadSurd::from_int(&Int::from(2u32), &radicand)?;
    Ok(match value.to_integer() {
        Some(n) => ChebValue::Integer(n),
        None => ChebValue::NonInteger(value),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn int(n: i64) -> Int {
        Int::from(n)
    }

    /// Legendre symbol by scanning squares, for odd primes only.
    fn legendre_brute(a: i64, p: i64) -> i32 {
        let r = a.rem_euclid(p);
        if r == 0 {
            return 0;
        }
        if (1..p).any(|x| (x * x) % p == r) {
            1
        } else {
            -1
        }
    }

    #[test]
    fn kronecker_examples() {
        assert_eq!(kronecker(&int(5), &int(11)).unwrap(), 1);
        assert_eq!(kronecker(&int(6), &int(3)).unwrap(), 0);
        assert_eq!(kronecker(&int(5), &int(2)).unwrap(), -1);
        // (5/8) = (5/2)^3
        assert_eq!(kronecker(&int(5), &int(8)).unwrap(), -1);
        assert!(matches!(kronecker(&int(5), &int(0)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn kronecker_agrees_with_legendre_on_odd_primes() {
        for p in [3i64, 5, 7, 11, 13, 17, 19, 23, 97, 101] {
            for a in -60..60 {
                assert_eq!(kronecker(&int(a), &int(p)).unwrap(), legendre_brute(a, p), "({a}/{p})");
            }
        }
    }

    #[test]
    fn kronecker_is_multiplicative() {
        let k = |a: i64, n: i64| kronecker(&int(a), &int(n)).unwrap();
        for a in (-500i64..=500).step_by(7).filter(|&a| a != 0) {
            for m in (-500i64..=500).step_by(11).filter(|&m| m != 0) {
                for n in [-6i64, -1, 2, 3, 8, 15, 49] {
                    assert_eq!(k(a, m * n), k(a, m) * k(a, n), "a={a} m={m} n={n}");
                    assert_eq!(k(a * n, m), k(a, m) * k(n, m), "a={a} b={n} m={m}");
                }
            }
        }
    }

    #[test]
    fn isqrt_examples() {
        assert_eq!(isqrt(&int(0)).unwrap(), int(0));
        assert_eq!(isqrt(&int(9)).unwrap(), int(3));
        assert_eq!(isqrt(&int(44)).unwrap(), int(6));
        assert!(isqrt(&int(-1)).is_err());
    }

    #[test]
    fn factorize_examples() {
        assert!(factorize(&int(1)).unwrap().factors.is_empty());
        assert_eq!(factorize(&int(45)).unwrap().factors, vec![(int(3), 2), (int(5), 1)]);
        assert_eq!(factorize(&int(40)).unwrap().factors, vec![(int(2), 3), (int(5), 1)]);
        assert!(factorize(&int(0)).is_err());
        assert!(factorize(&int(-6)).is_err());
    }

    #[test]
    fn factorize_round_trips_up_to_a_million() {
        for n in 1u64..=1_000_000 {
            let f = factorize_u64(n);
            let back: u64 = f.iter().map(|&(p, e)| p.pow(e)).product();
            assert_eq!(back, n);
            assert!(f.windows(2).all(|w| w[0].0 < w[1].0));
        }
    }

    #[test]
    fn factorize_beyond_the_sieve_and_u64() {
        let p = 1_000_000_007u64;
        let q = 998_244_353u64;
        let n = Int::from(p) * Int::from(q);
        let f = factorize(&n).unwrap();
        assert_eq!(f.factors, vec![(Int::from(q), 1), (Int::from(p), 1)]);
        let big = Int::from(u64::MAX) * 6u32;
        let f = factorize(&big).unwrap();
        assert_eq!(f.value(), big);
        assert!(f.primes().all(is_prime));
    }

    #[test]
    fn miller_rabin_matches_trial_division() {
        for n in 0u64..20_000 {
            let trial = n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0);
            assert_eq!(is_prime_u64(n), trial, "{n}");
        }
        assert!(is_prime_u64(18_446_744_073_709_551_557));
        assert!(!is_prime_u64(3_215_031_751));
    }

    #[test]
    fn lucas_examples() {
        assert_eq!(lucas_v(&int(3), 1), int(3));
        assert_eq!(lucas_v(&int(3), 2), int(7));
        assert_eq!(lucas_v(&int(-17), 1), int(-17));
        assert_eq!(lucas_v(&int(3), 4), int(47));
    }

    #[test]
    fn lucas_doubling_identity() {
        for t in -30i64..=30 {
            for k in 1..=15 {
                let v = lucas_v(&int(t), k);
                assert_eq!(lucas_v(&int(t), 2 * k), &v * &v - 2u32);
            }
        }
    }

    #[test]
    fn cheb_paper_examples() {
        assert_eq!(cheb_paper(&int(5), 1).unwrap(), ChebValue::Integer(int(1)));
        assert_eq!(cheb_paper(&int(13), 2).unwrap(), ChebValue::Integer(int(13)));
        assert!(matches!(cheb_paper(&int(13), 1).unwrap(), ChebValue::NonInteger(_)));
        assert!(cheb_paper(&int(0), 1).is_err());
    }

    #[test]
    fn cheb_paper_even_degrees() {
        for delta in 1i64..=1000 {
            assert_eq!(cheb_paper(&int(delta), 2).unwrap(), ChebValue::Integer(int(delta)));
            assert_eq!(
                cheb_paper(&int(delta), 4).unwrap(),
                ChebValue::Integer(int(delta * (delta + 4)))
            );
        }
    }

    #[test]
    fn surd_rejects_bad_input() {
        assert!(QuadSurd::new(int(1), int(1), int(4)).is_err());
        assert!(QuadSurd::new(int(1), int(0), int(5)).is_err());
        assert!(QuadSurd::new(int(1), int(1), int(3)).is_err());
        assert!(QuadSurd::new(int(1), int(1), int(8)).is_err());
        assert!(QuadSurd::new(int(2), int(1), int(8)).is_ok());
    }

    #[test]
    fn surd_norm_and_sign() {
        let phi = QuadSurd::new(int(1), int(1), int(5)).unwrap();
        assert_eq!(phi.norm4(), int(-4));
        assert_eq!(phi.signum(), 1);
        assert_eq!(phi.conj().signum(), -1);
        assert_eq!((&phi * &phi.conj()).to_integer(), Some(int(-1)));
        let sq = phi.pow(2);
        assert_eq!((sq.x().clone(), sq.y().clone()), (int(3), int(1)));
    }

    fn make_surd(d: i64, u: i64, v: i64) -> QuadSurd {
        let (x, y) = match d.rem_euclid(4) {
            1 => (2 * u + v.rem_euclid(2), v),
            0 => (2 * u, v),
            _ => (2 * u, 2 * v),
        };
        QuadSurd::new(int(x), int(y), int(d)).unwrap()
    }

    fn check_admissible(s: &QuadSurd) {
        QuadSurd::new(s.x.clone(), s.y.clone(), s.d.clone()).expect("invariant preserved");
        assert_eq!(s.x.mod_floor(&int(2)), (&s.y * &s.d).mod_floor(&int(2)));
    }

    proptest! {
        #[test]
        fn surd_ring_axioms(d in prop::sample::select(vec![5i64, 8, 12, 13, 17, 7, 10, 21]),
                            c in prop::array::uniform6(-50i64..50)) {
            let a = make_surd(d, c[0], c[1]);
            let b = make_surd(d, c[2], c[3]);
            let e = make_surd(d, c[4], c[5]);
            prop_assert_eq!(&a + &b, &b + &a);
            prop_assert_eq!(&a * &b, &b * &a);
            prop_assert_eq!(&(&a + &b) + &e, &a + &(&b + &e));
            prop_assert_eq!(&(&a * &b) * &e, &a * &(&b * &e));
            prop_assert_eq!(&a * &(&b + &e), &(&a * &b) + &(&a * &e));
            check_admissible(&(&a * &b));
            check_admissible(&(&a + &b));
            // Norm is multiplicative.
            prop_assert_eq!((&a * &b).norm4() * 4, a.norm4() * b.norm4());
        }

        #[test]
        fn surd_signum_matches_float(x in -1000i64..1000, y in -1000i64..1000) {
            let s = QuadSurd::new(int(2 * x), int(2 * y), int(7)).unwrap();
            let v = x as f64 + y as f64 * 7f64.sqrt();
            prop_assert_eq!(s.signum(), if v > 0.0 { 1 } else if v < 0.0 { -1 } else { 0 });
        }
    }
}
