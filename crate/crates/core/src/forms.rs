//! Indefinite binary quadratic forms `a u^2 + b u v + c v^2`.
//!
//! Equivalence is proper equivalence (substitutions of determinant one), so
//! the class groups computed here are narrow class groups. Reduction follows
//! the indefinite criterion `|sqrt(D) - 2|a|| < b < sqrt(D)`; every class is a
//! single cycle of reduced forms under [`QuadForm::rho`].

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::arith::{divisors_u64, factorize, factorize_u64, is_square, Int};
use crate::error::{Error, Result};

/// Largest discriminant accepted by the enumerating routines. Keeps every
/// intermediate of the machine-word fast path below `i64::MAX`.
pub const MAX_ENUM_DISCRIMINANT: i64 = 1 << 62;

/// Primitive indefinite form with non-square discriminant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct QuadForm {
    #[serde(serialize_with = "crate::json::int")]
    a: Int,
    #[serde(serialize_with = "crate::json::int")]
    b: Int,
    #[serde(serialize_with = "crate::json::int")]
    c: Int,
}

impl QuadForm {
    pub fn new(a: Int, b: Int, c: Int) -> Result<Self> {
        if a.is_zero() {
            return Err(Error::unsupported("leading coefficient a must be nonzero"));
        }
        let d: Int = &b * &b - 4 * &a * &c;
        if !d.is_positive() {
            return Err(Error::unsupported(format!(
                "discriminant {d} is not positive; only indefinite forms are supported"
            )));
        }
        if is_square(&d) {
            return Err(Error::unsupported(format!("discriminant {d} is a perfect square")));
        }
        if !a.gcd(&b).gcd(&c).is_one() {
            return Err(Error::invalid(format!("form ({a}, {b}, {c}) is not primitive")));
        }
        Ok(QuadForm { a, b, c })
    }

    pub fn from_i64(a: i64, b: i64, c: i64) -> Result<Self> {
        Self::new(a.into(), b.into(), c.into())
    }

    fn raw(a: Int, b: Int, c: Int) -> Self {
        QuadForm { a, b, c }
    }

    pub fn a(&self) -> &Int {
        &self.a
    }

    pub fn b(&self) -> &Int {
        &self.b
    }

    pub fn c(&self) -> &Int {
        &self.c
    }

    pub fn discriminant(&self) -> Int {
        &self.b * &self.b - 4 * &self.a * &self.c
    }

    /// `(1, D mod 2, (D mod 2 - D) / 4)`, the identity of the class group.
    pub fn principal(d: &Discriminant) -> QuadForm {
        let sigma = d.value.mod_floor(&Int::from(2u32));
        let c = (&sigma - &d.value) / 4;
        QuadForm::raw(Int::one(), sigma, c)
    }

    /// `(a, -b, c)`, whose class is the inverse class.
    pub fn opposite(&self) -> QuadForm {
        QuadForm::raw(self.a.clone(), -&self.b, self.c.clone())
    }

    pub fn evaluate(&self, u: &Int, v: &Int) -> Int {
        &self.a * u * u + &self.b * u * v + &self.c * v * v
    }

    /// The form `q(alpha u + beta v, gamma u + delta v)`.
    ///
    /// Proper equivalence uses matrices of determinant one; any unimodular
    /// matrix preserves the discriminant.
    pub fn transform(&self, m: [[i64; 2]; 2]) -> Result<QuadForm> {
        let [[al, be], [ga, de]] = m.map(|row| row.map(Int::from));
        let det = &al * &de - &be * &ga;
        if det.abs() != Int::one() {
            return Err(Error::invalid("substitution matrix is not unimodular"));
        }
        let a = self.evaluate(&al, &ga);
        let c = self.evaluate(&be, &de);
        let b = 2 * &self.a * &al * &be + &self.b * (&al * &de + &be * &ga) + 2 * &self.c * &ga * &de;
        Ok(QuadForm::raw(a, b, c))
    }

    pub fn is_reduced(&self) -> bool {
        let d = self.discriminant();
        let s = d.sqrt();
        let two_a = 2 * self.a.abs();
        // b < sqrt(D) and |sqrt(D) - 2|a|| < b, exactly: sqrt(D) lies strictly
        // between s and s + 1.
        self.b.is_positive() && self.b <= s && &two_a - &self.b <= s && &two_a + &self.b > s
    }

    /// Neighbouring form `(c, r, (r^2 - D) / 4c)` with `r = -b (mod 2c)`.
    ///
    /// `r` is taken in `(sqrt(D) - 2|c|, sqrt(D))` when `|c| < sqrt(D)` and in
    /// `(-|c|, |c|]` otherwise. The substitution is `[[0, -1], [1, t]]`, so
    /// the class is preserved.
    pub fn rho(&self) -> QuadForm {
        let d = self.discriminant();
        let s = d.sqrt();
        let c_abs = self.c.abs();
        let modulus = 2 * &c_abs;
        let r = if c_abs <= s {
            &s - (&s + &self.b).mod_floor(&modulus)
        } else {
            let r0 = (-&self.b).mod_floor(&modulus);
            if r0 > c_abs {
                r0 - &modulus
            } else {
                r0
            }
        };
        let c_next = (&r * &r - &d) / (4 * &self.c);
        QuadForm::raw(self.c.clone(), r, c_next)
    }

    /// Iterates [`rho`](Self::rho) until the form is reduced.
    pub fn reduce(&self) -> QuadForm {
        self.reduce_counting().0
    }

    pub fn reduce_counting(&self) -> (QuadForm, usize) {
        let mut f = self.clone();
        let mut steps = 0;
        while !f.is_reduced() {
            f = f.rho();
            steps += 1;
        }
        (f, steps)
    }

    /// The rho-cycle through a reduced form, starting with the form itself.
    pub fn cycle(&self) -> Result<Vec<QuadForm>> {
        if !self.is_reduced() {
            return Err(Error::invalid(format!("{self} is not reduced")));
        }
        let mut out = vec![self.clone()];
        let mut f = self.rho();
        while &f != self {
            out.push(f.clone());
            f = f.rho();
        }
        Ok(out)
    }

    fn to_small(&self) -> Option<SmallForm> {
        Some((self.a.to_i64()?, self.b.to_i64()?, self.c.to_i64()?))
    }

    fn from_small((a, b, c): SmallForm) -> QuadForm {
        QuadForm::raw(a.into(), b.into(), c.into())
    }
}

impl fmt::Display for QuadForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.a, self.b, self.c)
    }
}

/// Positive non-square discriminant `D = f^2 D0` split into its fundamental
/// part `D0` and conductor `f`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Discriminant {
    #[serde(serialize_with = "crate::json::int")]
    pub value: Int,
    #[serde(serialize_with = "crate::json::int")]
    pub fundamental: Int,
    #[serde(serialize_with = "crate::json::int")]
    pub conductor: Int,
}

impl Discriminant {
    pub fn new(value: Int) -> Result<Self> {
        if !value.is_positive() {
            return Err(Error::unsupported(format!(
                "discriminant {value} is not positive; definite forms are out of scope"
            )));
        }
        if is_square(&value) {
            return Err(Error::unsupported(format!("discriminant {value} is a perfect square")));
        }
        let r = value.mod_floor(&Int::from(4u32));
        if !(r.is_zero() || r.is_one()) {
            return Err(Error::invalid(format!("{value} is not 0 or 1 mod 4")));
        }
        let mut squarefree = Int::one();
        let mut root = Int::one();
        for (p, e) in factorize(&value)?.factors {
            if e % 2 == 1 {
                squarefree *= &p;
            }
            root *= num_traits::pow(p, (e / 2) as usize);
        }
        let (fundamental, conductor) = if squarefree.mod_floor(&Int::from(4u32)).is_one() {
            (squarefree, root)
        } else {
            (4 * squarefree, root / 2)
        };
        Ok(Discriminant { value, fundamental, conductor })
    }

    pub fn from_i64(value: i64) -> Result<Self> {
        Self::new(value.into())
    }

    pub fn is_fundamental(&self) -> bool {
        self.conductor.is_one()
    }

    /// The discriminant `f^2 D0` of the order of conductor `f` in the same field.
    pub fn with_conductor(&self, f: &Int) -> Result<Self> {
        if !f.is_positive() {
            return Err(Error::invalid(format!("conductor {f} must be positive")));
        }
        Ok(Discriminant {
            value: &self.fundamental * f * f,
            fundamental: self.fundamental.clone(),
            conductor: f.clone(),
        })
    }

    fn small(&self) -> Result<i64> {
        self.value
            .to_i64()
            .filter(|&v| v < MAX_ENUM_DISCRIMINANT)
            .ok_or_else(|| Error::invalid(format!("discriminant {} is too large to enumerate", self.value)))
    }
}

impl fmt::Display for Discriminant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// True when `n` is the discriminant of a maximal order of a real quadratic field.
pub fn is_fundamental_discriminant(n: &Int) -> bool {
    if n <= &Int::one() {
        return false;
    }
    Discriminant::new(n.clone()).map(|d| d.is_fundamental()).unwrap_or(false)
}

pub fn discriminant_of(form: &QuadForm) -> Result<Discriminant> {
    Discriminant::new(form.discriminant())
}

type SmallForm = (i64, i64, i64);

fn rho_small((_, b, c): SmallForm, d: i64, s: i64) -> SmallForm {
    let modulus = 2 * c.abs();
    let r = s - (s + b).rem_euclid(modulus);
    (c, r, (r * r - d) / (4 * c))
}

fn gcd3(a: i64, b: i64, c: i64) -> i64 {
    a.gcd(&b).gcd(&c)
}

/// All primitive reduced forms of discriminant `d` (machine-word path).
fn reduced_small(d: i64) -> Vec<SmallForm> {
    let s = (d as u64).isqrt() as i64;
    let mut out = Vec::new();
    let mut b = if d % 2 == 0 { 2 } else { 1 };
    while b <= s {
        let m = (d - b * b) / 4;
        // |a| = g must satisfy s + 1 - b <= 2g <= s + b.
        let lo = (s + 2 - b) / 2;
        let lo = lo.max(1);
        let hi = (s + b) / 2;
        let mut push = |g: i64| {
            let c = m / g;
            if gcd3(g, b, c) == 1 {
                out.push((g, b, -c));
                out.push((-g, b, c));
            }
        };
        if hi - lo < 64 || m >= 1 << 22 {
            for g in lo..=hi {
                if m % g == 0 {
                    push(g);
                }
            }
        } else {
            for g in divisors_u64(m as u64) {
                let g = g as i64;
                if g >= lo && g <= hi {
                    push(g);
                }
            }
        }
        b += 2;
    }
    out.sort_unstable();
    out
}

/// Partition of the reduced forms into rho-cycles, in order of first form.
fn cycles_small(d: i64) -> Vec<Vec<SmallForm>> {
    let s = (d as u64).isqrt() as i64;
    let forms = reduced_small(d);
    let index: HashMap<SmallForm, usize> = forms.iter().enumerate().map(|(i, &f)| (f, i)).collect();
    let mut seen = vec![false; forms.len()];
    let mut cycles = Vec::new();
    for (i, &start) in forms.iter().enumerate() {
        if seen[i] {
            continue;
        }
        let mut cycle = vec![start];
        seen[i] = true;
        let mut f = rho_small(start, d, s);
        while f != start {
            let j = *index.get(&f).expect("rho keeps reduced forms reduced");
            debug_assert!(!seen[j], "rho-cycles are disjoint");
            seen[j] = true;
            cycle.push(f);
            f = rho_small(f, d, s);
        }
        cycles.push(cycle);
    }
    cycles
}

pub fn reduced_forms(d: &Discriminant) -> Result<Vec<QuadForm>> {
    Ok(reduced_small(d.small()?).into_iter().map(QuadForm::from_small).collect())
}

/// Number of rho-cycles of reduced forms, i.e. the narrow class number `h+(D)`.
pub fn narrow_class_number(d: &Discriminant) -> Result<usize> {
    Ok(cycles_small(d.small()?).len())
}

/// Proper equivalence, decided by walking the cycle of `reduce(f1)`.
pub fn equivalent(f1: &QuadForm, f2: &QuadForm) -> Result<bool> {
    if f1.discriminant() != f2.discriminant() {
        return Err(Error::invalid(format!("{f1} and {f2} have different discriminants")));
    }
    let target = f2.reduce();
    Ok(f1.reduce().cycle()?.contains(&target))
}

/// Extended gcd returning `(g, x, y)` with `a x + b y = g >= 0`.
fn xgcd(a: &Int, b: &Int) -> (Int, Int, Int) {
    let e = a.extended_gcd(b);
    if e.gcd.is_negative() {
        (-e.gcd, -e.x, -e.y)
    } else {
        (e.gcd, e.x, e.y)
    }
}

/// Dirichlet composition.
///
/// With `beta = (b1 + b2)/2` and `e = gcd(a1, a2, beta) = u a1 + v a2 + w beta`,
/// the united forms `(a1, B, a2 C)` and `(a2, B, a1 C)` compose to
/// `(a1 a2 / e^2, B, C')` where
/// `B = (u a1 b2 + v a2 b1 + w (b1 b2 + D)/2) / e  (mod 2 a1 a2 / e^2)`.
pub fn compose(f1: &QuadForm, f2: &QuadForm) -> Result<QuadForm> {
    let d = f1.discriminant();
    if d != f2.discriminant() {
        return Err(Error::invalid(format!("{f1} and {f2} have different discriminants")));
    }
    for f in [f1, f2] {
        if !f.a.gcd(&f.b).gcd(&f.c).is_one() {
            return Err(Error::invalid(format!("{f} is not primitive")));
        }
    }
    let (a1, b1) = (&f1.a, &f1.b);
    let (a2, b2) = (&f2.a, &f2.b);
    let beta = (b1 + b2) / 2;
    let (g, u1, v1) = xgcd(a1, a2);
    let (e, x, w) = xgcd(&g, &beta);
    let (u, v) = (&x * u1, &x * v1);
    let a3 = a1 * a2 / (&e * &e);
    let numer: Int = &u * a1 * b2 + &v * a2 * b1 + &w * ((b1 * b2 + &d) / 2);
    debug_assert!((&numer % &e).is_zero());
    let modulus = 2 * a3.abs();
    let mut b3 = (numer / &e).mod_floor(&modulus);
    if b3 > a3.abs() {
        b3 -= &modulus;
    }
    let num_c: Int = &b3 * &b3 - &d;
    let den_c: Int = 4 * &a3;
    debug_assert!((&num_c % &den_c).is_zero(), "composition produced a non-integral form");
    let c3 = num_c / den_c;
    Ok(QuadForm::raw(a3, b3, c3))
}

/// Narrow class group of a discriminant with its full composition table.
#[derive(Debug, Clone)]
pub struct ClassGroup {
    discriminant: Discriminant,
    /// One canonical reduced form per class; index 0 is the principal class.
    representatives: Vec<QuadForm>,
    cycles: Vec<Vec<QuadForm>>,
    class_index: HashMap<SmallForm, usize>,
    table: Vec<Vec<usize>>,
    invariant_factors: Vec<Int>,
}

impl ClassGroup {
    pub fn discriminant(&self) -> &Discriminant {
        &self.discriminant
    }

    pub fn order(&self) -> usize {
        self.representatives.len()
    }

    pub fn representatives(&self) -> &[QuadForm] {
        &self.representatives
    }

    pub fn cycle(&self, class: usize) -> &[QuadForm] {
        &self.cycles[class]
    }

    pub fn invariant_factors(&self) -> &[Int] {
        &self.invariant_factors
    }

    pub fn identity(&self) -> usize {
        0
    }

    pub fn compose_classes(&self, x: usize, y: usize) -> usize {
        self.table[x][y]
    }

    pub fn inverse_class(&self, x: usize) -> usize {
        self.class_of(&self.representatives[x].opposite())
            .expect("opposite form has the same discriminant")
    }

    /// Index of the class containing `form`.
    pub fn class_of(&self, form: &QuadForm) -> Result<usize> {
        if form.discriminant() != self.discriminant.value {
            return Err(Error::invalid(format!(
                "{form} does not have discriminant {}",
                self.discriminant
            )));
        }
        let reduced = form.reduce().to_small().expect("reduced forms fit in i64");
        Ok(self.class_index[&reduced])
    }

    pub fn power(&self, x: usize, mut n: u64) -> usize {
        let mut acc = self.identity();
        let mut base = x;
        while n > 0 {
            if n & 1 == 1 {
                acc = self.table[acc][base];
            }
            base = self.table[base][base];
            n >>= 1;
        }
        acc
    }

    pub fn element_order(&self, x: usize) -> u64 {
        let mut n = 1;
        let mut y = x;
        while y != self.identity() {
            y = self.table[y][x];
            n += 1;
        }
        n
    }
}

/// Canonical representative of a cycle: the reduced form with `a > 0` that is
/// least under `(|a|, a, b)`. Every cycle has one since signs of `a` alternate.
fn canonical(cycle: &[SmallForm]) -> SmallForm {
    *cycle
        .iter()
        .filter(|f| f.0 > 0)
        .min_by_key(|&&(a, b, _)| (a.abs(), a, b))
        .expect("rho-cycles alternate the sign of a")
}

pub fn class_group(d: &Discriminant) -> Result<ClassGroup> {
    let dd = d.small()?;
    let raw_cycles = cycles_small(dd);
    let principal = QuadForm::principal(d).reduce().to_small().expect("small");
    let mut keyed: Vec<(SmallForm, Vec<SmallForm>)> = raw_cycles
        .into_iter()
        .map(|c| (canonical(&c), c))
        .collect();
    keyed.sort_by_key(|(rep, cycle)| (!cycle.contains(&principal), rep.0.abs(), rep.0, rep.1));

    let mut class_index = HashMap::new();
    let mut representatives = Vec::with_capacity(keyed.len());
    let mut cycles = Vec::with_capacity(keyed.len());
    for (i, (rep, cycle)) in keyed.into_iter().enumerate() {
        for &f in &cycle {
            class_index.insert(f, i);
        }
        representatives.push(QuadForm::from_small(rep));
        cycles.push(cycle.into_iter().map(QuadForm::from_small).collect());
    }

    let h = representatives.len();
    let mut table = vec![vec![0usize; h]; h];
    for i in 0..h {
        for j in i..h {
            let composed = compose(&representatives[i], &representatives[j])?.reduce();
            let k = class_index[&composed.to_small().expect("reduced forms fit in i64")];
            table[i][j] = k;
            table[j][i] = k;
        }
    }
    let invariant_factors = invariant_factors_from_table(&table, 0);
    Ok(ClassGroup {
        discriminant: d.clone(),
        representatives,
        cycles,
        class_index,
        table,
        invariant_factors,
    })
}

/// Invariant factors `d1 | d2 | ...` (all > 1) of a finite abelian group given
/// by its multiplication table.
///
/// For each prime `p | h`, counting `N_j = #{x : x^(p^j) = 1}` gives
/// `log_p(N_j / N_{j-1}) = #{cyclic p-factors of order >= p^j}`; the
/// conjugate partition is the list of p-primary exponents.
pub(crate) fn invariant_factors_from_table(table: &[Vec<usize>], identity: usize) -> Vec<Int> {
    let h = table.len() as u64;
    let mut exponents_by_prime: Vec<(u64, Vec<u32>)> = Vec::new();
    let mut max_parts = 0;
    for (p, e) in factorize_u64(h) {
        let target = p.pow(e);
        let mut cur: Vec<usize> = (0..table.len()).collect();
        let mut prev_count = 1u64;
        let mut at_least = Vec::new();
        while prev_count < target {
            cur = cur
                .iter()
                .map(|&x| {
                    let mut y = identity;
                    for _ in 0..p {
                        y = table[y][x];
                    }
                    y
                })
                .collect();
            let count = cur.iter().filter(|&&y| y == identity).count() as u64;
            let mut ratio = count / prev_count;
            let mut r = 0;
            while ratio > 1 {
                ratio /= p;
                r += 1;
            }
            at_least.push(r);
            prev_count = count;
        }
        let parts = at_least.first().copied().unwrap_or(0);
        let lambdas: Vec<u32> = (1..=parts)
            .map(|i| at_least.iter().filter(|&&r| r >= i).count() as u32)
            .collect();
        max_parts = max_parts.max(parts as usize);
        exponents_by_prime.push((p, lambdas));
    }
    // lambdas are non-increasing; the i-th largest invariant factor takes the
    // i-th largest exponent of every prime.
    let mut factors: Vec<Int> = (0..max_parts)
        .map(|i| {
            exponents_by_prime.iter().fold(Int::one(), |acc, (p, lambdas)| {
                let e = lambdas.get(i).copied().unwrap_or(0);
                acc * BigInt::from(p.pow(e))
            })
        })
        .collect();
    factors.reverse();
    factors
}
