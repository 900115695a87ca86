//! Continued fractions of quadratic irrationals, the Pell equation
//! `t^2 - D s^2 = 4`, units of real quadratic orders and the class number of
//! the order `Z + f O_K`.

use std::collections::HashMap;

use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::arith::{factorize, is_square, kronecker, Int, QuadSurd};
use crate::error::{Error, Result};
use crate::forms::Discriminant;

/// Eventually periodic continued fraction `[preperiod; period...]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfExpansion {
    pub preperiod: Vec<Int>,
    pub period: Vec<Int>,
}

/// Continued fraction of `(p + sqrt(d)) / q`.
///
/// Runs the surd recurrence `a = floor((P + sqrt D)/Q)`, `P' = aQ - P`,
/// `Q' = (D - P'^2)/Q` and stops at the first repeated `(P, Q)` state, which
/// makes both the preperiod and the period minimal.
pub fn cf_expand(p: &Int, q: &Int, d: &Int) -> Result<CfExpansion> {
    if !d.is_positive() || is_square(d) {
        return Err(Error::invalid(format!("{d} must be a positive non-square")));
    }
    if q.is_zero() {
        return Err(Error::invalid("denominator Q must be nonzero"));
    }
    if !(d - p * p).is_multiple_of(q) {
        return Err(Error::invalid(format!("Q = {q} does not divide D - P^2 = {}", d - p * p)));
    }
    let root = d.sqrt();
    let mut seen: HashMap<(Int, Int), usize> = HashMap::new();
    let mut quotients = Vec::new();
    let (mut pp, mut qq) = (p.clone(), q.clone());
    loop {
        if let Some(&start) = seen.get(&(pp.clone(), qq.clone())) {
            let period = quotients.split_off(start);
            return Ok(CfExpansion { preperiod: quotients, period });
        }
        seen.insert((pp.clone(), qq.clone()), quotients.len());
        // floor((P + sqrt D)/Q) = floor((P + floor(sqrt D))/Q) for Q > 0 and
        // floor((-P - floor(sqrt D) - 1)/|Q|) for Q < 0, as sqrt D is irrational.
        let a = if qq.is_positive() {
            (&pp + &root).div_floor(&qq)
        } else {
            (-&pp - &root - 1u32).div_floor(&-&qq)
        };
        let p_next = &a * &qq - &pp;
        let q_next = (d - &p_next * &p_next) / &qq;
        quotients.push(a);
        pp = p_next;
        qq = q_next;
    }
}

/// Minimal positive solution of `t^2 - d s^2 = 4`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PellSolution {
    #[serde(serialize_with = "crate::json::int")]
    pub d: Int,
    #[serde(serialize_with = "crate::json::int")]
    pub t: Int,
    #[serde(serialize_with = "crate::json::int")]
    pub s: Int,
}

/// Fundamental unit of an order together with its norm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FundamentalUnit {
    /// `(x + y sqrt(D)) / 2 > 1`, with `D` the discriminant of the order.
    pub unit: QuadSurd,
    pub norm: i32,
}

impl FundamentalUnit {
    /// Least totally positive unit `> 1`: the unit itself when its norm is
    /// `+1`, otherwise its square.
    pub fn totally_positive(&self) -> QuadSurd {
        if self.norm == 1 {
            self.unit.clone()
        } else {
            self.unit.pow(2)
        }
    }
}

/// Unit data of the maximal order relative to the order of conductor `f`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitData {
    pub fundamental_unit: QuadSurd,
    pub norm: i32,
    /// Index of the totally positive units of `Z + f O_K` in those of `O_K`.
    pub e_f_plus: u64,
    /// Index of the full unit group of `Z + f O_K` in that of `O_K`.
    pub e_f: u64,
}

fn mat_mul(x: &[[Int; 2]; 2], y: &[[Int; 2]; 2]) -> [[Int; 2]; 2] {
    [
        [&x[0][0] * &y[0][0] + &x[0][1] * &y[1][0], &x[0][0] * &y[0][1] + &x[0][1] * &y[1][1]],
        [&x[1][0] * &y[0][0] + &x[1][1] * &y[1][0], &x[1][0] * &y[0][1] + &x[1][1] * &y[1][1]],
    ]
}

/// `prod [[a_i, 1], [1, 0]]` over the given partial quotients.
pub(crate) fn period_product(quotients: &[Int]) -> [[Int; 2]; 2] {
    let mut m = [[Int::one(), Int::zero()], [Int::zero(), Int::one()]];
    for a in quotients {
        m = mat_mul(&m, &[[a.clone(), Int::one()], [Int::one(), Int::zero()]]);
    }
    m
}

/// Continued fraction of `(D mod 2 + sqrt D) / 2`, whose multiplier ring is
/// the order of discriminant `D`.
pub fn principal_expansion(d: &Discriminant) -> CfExpansion {
    let sigma = d.value.mod_floor(&Int::from(2u32));
    cf_expand(&sigma, &Int::from(2u32), &d.value).expect("(sigma + sqrt D)/2 is a valid surd")
}

/// Fundamental unit of the order of discriminant `d`, read off the period
/// matrix of [`principal_expansion`]: its dominant eigenvalue is the unit and
/// its determinant `(-1)^period` is the norm.
pub fn unit_of_order(d: &Discriminant) -> FundamentalUnit {
    let cf = principal_expansion(d);
    let m = period_product(&cf.period);
    let trace = &m[0][0] + &m[1][1];
    let det = &m[0][0] * &m[1][1] - &m[0][1] * &m[1][0];
    let radicand: Int = &trace * &trace - 4 * &det;
    let (s_sq, rem) = radicand.div_rem(&d.value);
    assert!(rem.is_zero() && is_square(&s_sq), "period matrix eigenvalue lies outside Q(sqrt D)");
    let unit = QuadSurd::new(trace, s_sq.sqrt(), d.value.clone()).expect("unit is integral");
    FundamentalUnit { unit, norm: if det.is_one() { 1 } else { -1 } }
}

/// Fundamental unit of the maximal order of discriminant `d0`.
pub fn fundamental_unit(d0: &Int) -> Result<FundamentalUnit> {
    let d = Discriminant::new(d0.clone())?;
    if !d.is_fundamental() {
        return Err(Error::invalid(format!("{d0} is not a fundamental discriminant")));
    }
    Ok(unit_of_order(&d))
}

/// Largest `s` up to which [`pell4_fundamental`] re-derives the solution by
/// direct search.
const PELL_SCAN_LIMIT: u64 = 1000;

/// Minimal positive `(t, s)` with `t^2 - D s^2 = 4`.
pub fn pell4_fundamental(d: &Int) -> Result<PellSolution> {
    let disc = Discriminant::new(d.clone()).map_err(|e| match e {
        Error::UnsupportedForm(m) => Error::InvalidArgument(m),
        other => other,
    })?;
    let eps = unit_of_order(&disc).totally_positive();
    let sol = PellSolution { d: d.clone(), t: eps.x().clone(), s: eps.y().clone() };
    debug_assert_eq!(&sol.t * &sol.t - d * &sol.s * &sol.s, Int::from(4u32));
    if sol.s <= Int::from(PELL_SCAN_LIMIT) {
        let limit = sol.s.to_u64().expect("below the scan limit");
        let scanned = pell4_scan(d, limit).expect("the solution itself is within the scan");
        assert_eq!(scanned, sol, "continued fraction and direct search disagree");
    }
    Ok(sol)
}

/// Direct search over `s = 1..=limit` for the least `s` making `D s^2 + 4` a square.
pub fn pell4_scan(d: &Int, limit: u64) -> Option<PellSolution> {
    (1..=limit).find_map(|s| {
        let s = Int::from(s);
        let t_sq = d * &s * &s + 4u32;
        is_square(&t_sq).then(|| PellSolution { d: d.clone(), t: t_sq.sqrt(), s })
    })
}

/// Element of `O_K` in the basis `u + v w` with `w = (sigma + sqrt D0)/2`,
/// coordinates reduced modulo `f`.
#[derive(Clone, Copy, PartialEq, Eq)]
struct ModF {
    u: u64,
    v: u64,
}

fn to_basis(x: &QuadSurd, sigma: &Int, f: u64) -> ModF {
    let fi = Int::from(f);
    let v = x.y().clone();
    let u: Int = (x.x() - &v * sigma) / 2;
    ModF {
        u: u.mod_floor(&fi).to_u64().expect("residue"),
        v: v.mod_floor(&fi).to_u64().expect("residue"),
    }
}

/// Least `m >= 1` with `unit^m` in `Z + f O_K`. An element `u + v w` lies in
/// that order iff `f | v`; the search runs in `O_K / f O_K`, whose unit group
/// has fewer than `f^2` elements.
fn index_in_order(unit: &QuadSurd, d0: &Int, f: u64) -> u64 {
    if f == 1 {
        return 1;
    }
    let sigma = d0.mod_floor(&Int::from(2u32));
    let norm_w: Int = (d0 - &sigma) / 4;
    let norm_w = norm_w.mod_floor(&Int::from(f)).to_u64().expect("residue") as u128;
    let sigma_u = sigma.to_u64().expect("0 or 1") as u128;
    let base = to_basis(unit, &sigma, f);
    let fm = f as u128;
    let mul = |x: ModF, y: ModF| -> ModF {
        let (u1, v1, u2, v2) = (x.u as u128, x.v as u128, y.u as u128, y.v as u128);
        let vv = v1 * v2 % fm;
        // w^2 = sigma w + (D0 - sigma)/4
        let u = (u1 * u2 + vv * norm_w) % fm;
        let v = (u1 * v2 + u2 * v1 + vv * sigma_u) % fm;
        ModF { u: u as u64, v: v as u64 }
    };
    let mut acc = base;
    let mut m = 1u64;
    while acc.v != 0 {
        acc = mul(acc, base);
        m += 1;
        assert!(m <= f * f, "unit has no power in the order of conductor {f}");
    }
    m
}

/// Index `e_f+` of the totally positive units of `Z + f O_K` in those of `O_K`.
pub fn unit_index(d0: &Int, f: u64) -> Result<u64> {
    if f == 0 {
        return Err(Error::invalid("conductor must be >= 1"));
    }
    let eps = fundamental_unit(d0)?;
    Ok(index_in_order(&eps.totally_positive(), d0, f))
}

/// Index `e_f` of the full unit group of `Z + f O_K` in that of `O_K`.
pub fn unit_index_wide(d0: &Int, f: u64) -> Result<u64> {
    if f == 0 {
        return Err(Error::invalid("conductor must be >= 1"));
    }
    let eps = fundamental_unit(d0)?;
    // -1 lies in every order, so only the positive generator matters.
    Ok(index_in_order(&eps.unit, d0, f))
}

pub fn unit_data(d0: &Int, f: u64) -> Result<UnitData> {
    let eps = fundamental_unit(d0)?;
    Ok(UnitData {
        e_f_plus: unit_index(d0, f)?,
        e_f: unit_index_wide(d0, f)?,
        fundamental_unit: eps.unit,
        norm: eps.norm,
    })
}

/// `(f / e) * prod_{p | f} (1 - (D0/p) / p)`, the factor by which the class
/// number grows from `O_K` to the order of conductor `f`.
pub fn conductor_factor(d0: &Int, f: u64, e: u64) -> Result<BigRational> {
    let mut factor = BigRational::new(Int::from(f), Int::from(e));
    for p in factorize(&Int::from(f))?.primes() {
        let chi = kronecker(d0, p)?;
        factor *= BigRational::one() - BigRational::new(Int::from(chi), p.clone());
    }
    Ok(factor)
}

fn require_positive_integer(value: BigRational, context: String) -> Result<Int> {
    if value.is_integer() && value.is_positive() {
        Ok(value.to_integer())
    } else {
        Err(Error::FormulaMismatch { context, value })
    }
}

/// Narrow class number of the order of conductor `f`:
/// `h+(f^2 D0) = h+(D0) * f / e_f+ * prod_{p | f} (1 - (D0/p)/p)`.
pub fn class_number_order(d0: &Int, f: u64, h_plus_k: &Int) -> Result<Int> {
    if f == 0 {
        return Err(Error::invalid("conductor must be >= 1"));
    }
    let e = unit_index(d0, f)?;
    let value = BigRational::from_integer(h_plus_k.clone()) * conductor_factor(d0, f, e)?;
    require_positive_integer(value, format!("narrow class number of conductor {f} over D0 = {d0}"))
}

/// The same formula with wide class numbers and the full unit index.
pub fn class_number_order_wide(d0: &Int, f: u64, h_k: &Int) -> Result<Int> {
    if f == 0 {
        return Err(Error::invalid("conductor must be >= 1"));
    }
    let e = unit_index_wide(d0, f)?;
    let value = BigRational::from_integer(h_k.clone()) * conductor_factor(d0, f, e)?;
    require_positive_integer(value, format!("wide class number of conductor {f} over D0 = {d0}"))
}

/// Wide class number from the narrow one: they agree exactly when the order
/// has a unit of norm `-1`, otherwise the narrow group is twice as large.
pub fn wide_class_number(d: &Discriminant, h_plus: usize) -> usize {
    if unit_of_order(d).norm == -1 {
        h_plus
    } else {
        h_plus / 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{class_group, narrow_class_number};

    fn int(n: i64) -> Int {
        Int::from(n)
    }

    fn ints(v: &[i64]) -> Vec<Int> {
        v.iter().map(|&n| int(n)).collect()
    }

    fn cf(p: i64, q: i64, d: i64) -> CfExpansion {
        cf_expand(&int(p), &int(q), &int(d)).unwrap()
    }

    #[test]
    fn cf_examples() {
        assert_eq!(cf(1, 2, 5), CfExpansion { preperiod: vec![], period: ints(&[1]) });
        assert_eq!(cf(0, 1, 2), CfExpansion { preperiod: ints(&[1]), period: ints(&[2]) });
        assert_eq!(cf(0, 1, 13), CfExpansion { preperiod: ints(&[3]), period: ints(&[1, 1, 1, 1, 6]) });
        // negative denominator: (-1 + sqrt 5)/(-2) ~ -0.618 = [-1; 2, 1, 1, ...]
        assert_eq!(cf(-1, -2, 5), CfExpansion { preperiod: ints(&[-1, 2]), period: ints(&[1]) });
        assert!(cf_expand(&int(0), &int(1), &int(9)).is_err());
        assert!(cf_expand(&int(0), &int(3), &int(5)).is_err());
        assert!(cf_expand(&int(0), &int(0), &int(5)).is_err());
    }

    /// Value of `[preperiod; period, period]` as a float, and of `(P + sqrt D)/Q`.
    fn convergent_value(e: &CfExpansion) -> f64 {
        let mut qs: Vec<f64> = e.preperiod.iter().map(|x| x.to_f64().unwrap()).collect();
        for _ in 0..40 {
            qs.extend(e.period.iter().map(|x| x.to_f64().unwrap()));
        }
        let mut v = *qs.last().unwrap();
        for a in qs.iter().rev().skip(1) {
            v = a + 1.0 / v;
        }
        v
    }

    #[test]
    fn cf_reconstructs_the_surd() {
        for (p, q, d) in [(1, 2, 5), (0, 1, 2), (0, 1, 13), (3, 7, 2), (-5, 3, 7), (1, 2, 45), (2, -3, 19)] {
            if (d - p * p) % q != 0 {
                continue;
            }
            let e = cf(p, q, d);
            let exact = (p as f64 + (d as f64).sqrt()) / q as f64;
            assert!((convergent_value(&e) - exact).abs() < 1e-9, "({p}, {q}, {d})");
            assert!(e.period.iter().all(|a| a >= &Int::one()));
            // Minimal period: no proper rotation-free divisor length repeats.
            let n = e.period.len();
            for k in 1..n {
                if n.is_multiple_of(k) {
                    assert!(e.period.chunks(k).any(|c| c != &e.period[..k]));
                }
            }
        }
    }

    #[test]
    fn pell_examples() {
        let p = pell4_fundamental(&int(5)).unwrap();
        assert_eq!((p.t, p.s), (int(3), int(1)));
        let p = pell4_fundamental(&int(13)).unwrap();
        assert_eq!((p.t, p.s), (int(11), int(3)));
        let p = pell4_fundamental(&int(8)).unwrap();
        assert_eq!((p.t, p.s), (int(6), int(2)));
        assert!(matches!(pell4_fundamental(&int(16)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn pell_solutions_are_valid_and_minimal() {
        for n in 5i64..2000 {
            let Ok(disc) = Discriminant::from_i64(n) else { continue };
            let p = pell4_fundamental(&disc.value).unwrap();
            assert_eq!(&p.t * &p.t - &disc.value * &p.s * &p.s, int(4));
            if let Some(s) = p.s.to_u64().filter(|&s| s <= 2_000_000) {
                assert_eq!(pell4_scan(&disc.value, s).unwrap(), p, "D = {n}");
            }
        }
    }

    #[test]
    fn fundamental_unit_examples() {
        let u = fundamental_unit(&int(5)).unwrap();
        assert_eq!((u.unit.x(), u.unit.y(), u.norm), (&int(1), &int(1), -1));
        let u = fundamental_unit(&int(8)).unwrap();
        assert_eq!((u.unit.x(), u.unit.y(), u.norm), (&int(2), &int(1), -1));
        let u = fundamental_unit(&int(12)).unwrap();
        assert_eq!((u.unit.x(), u.unit.y(), u.norm), (&int(4), &int(1), 1));
        assert!(fundamental_unit(&int(20)).is_err());
    }

    #[test]
    fn fundamental_units_are_minimal() {
        for n in 5i64..600 {
            if !crate::forms::is_fundamental_discriminant(&int(n)) {
                continue;
            }
            let u = fundamental_unit(&int(n)).unwrap();
            assert_eq!(u.unit.norm4(), int(4 * u.norm as i64));
            assert_eq!(u.unit.signum(), 1);
            let Some(y) = u.unit.y().to_u64().filter(|&y| y < 100_000) else { continue };
            // No unit (x + y' sqrt D)/2 with 1 <= y' < y exists.
            for yy in 1..y {
                let base = int(n) * int(yy as i64) * int(yy as i64);
                assert!(!is_square(&(&base + 4)) && !is_square(&(&base - 4)), "D={n} y={yy}");
            }
        }
    }

    #[test]
    fn unit_index_examples() {
        for d0 in [5, 8, 12, 13, 17] {
            assert_eq!(unit_index(&int(d0), 1).unwrap(), 1);
        }
        assert_eq!(unit_index(&int(5), 2).unwrap(), 3);
        assert_eq!(unit_index(&int(5), 3).unwrap(), 2);
    }

    #[test]
    fn unit_index_matches_direct_powers() {
        for d0 in [5i64, 8, 12, 13, 17, 21, 24, 28, 29] {
            let eps = fundamental_unit(&int(d0)).unwrap().totally_positive();
            for f in 1u64..=12 {
                let direct = (1u64..)
                    .find(|&m| eps.pow(m as u32).y().is_multiple_of(&Int::from(f)))
                    .unwrap();
                assert_eq!(unit_index(&int(d0), f).unwrap(), direct, "D0={d0} f={f}");
            }
        }
    }

    #[test]
    fn unit_index_tower() {
        for d0 in [5i64, 8, 12, 13, 17, 21, 24] {
            for f in 1u64..=10 {
                for m in 1u64..=6 {
                    let small = unit_index(&int(d0), f).unwrap();
                    let big = unit_index(&int(d0), f * m).unwrap();
                    assert_eq!(big % small, 0, "D0={d0} f={f} m={m}");
                }
            }
        }
    }

    #[test]
    fn class_number_order_examples() {
        assert_eq!(class_number_order(&int(5), 1, &int(1)).unwrap(), int(1));
        assert_eq!(class_number_order(&int(5), 2, &int(1)).unwrap(), int(1));
        assert_eq!(class_number_order(&int(5), 3, &int(1)).unwrap(), int(2));
        assert!(matches!(
            class_number_order(&int(5), 2, &int(0)),
            Err(Error::FormulaMismatch { .. })
        ));
        assert!(class_number_order(&int(5), 0, &int(1)).is_err());
    }

    #[test]
    fn formula_agrees_with_cycle_count() {
        for d0 in [5i64, 8, 12, 13, 17, 21, 24] {
            let h_k = int(narrow_class_number(&Discriminant::from_i64(d0).unwrap()).unwrap() as i64);
            for f in 1i64..=5 {
                let d = Discriminant::from_i64(f * f * d0).unwrap();
                let brute = class_group(&d).unwrap().order();
                let formula = class_number_order(&int(d0), f as u64, &h_k).unwrap();
                assert_eq!(formula, int(brute as i64), "D0={d0} f={f}");
            }
        }
    }

    #[test]
    fn wide_formula_agrees_with_wide_counts() {
        for d0 in [5i64, 8, 12, 13, 17, 21, 24, 33, 60] {
            let dk = Discriminant::from_i64(d0).unwrap();
            let h_k = wide_class_number(&dk, narrow_class_number(&dk).unwrap());
            for f in 1i64..=6 {
                let d = Discriminant::from_i64(f * f * d0).unwrap();
                let h = wide_class_number(&d, narrow_class_number(&d).unwrap());
                let formula = class_number_order_wide(&int(d0), f as u64, &int(h_k as i64)).unwrap();
                assert_eq!(formula, int(h as i64), "D0={d0} f={f}");
            }
        }
    }
}
