//! Integer matrices, Smith normal form and the quotient `Z^n / (I - A^k) Z^n`.
//!
//! `A` is the det-1 partial-multiplicity matrix of a stationary AF-algebra;
//! the quotient is the K0-group of its crossed product by the `k`-th power of
//! the shift. Also exports the Bratteli diagram of `A` as DOT text.

use std::fmt::{self, Write as _};

use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Serialize, Serializer};

use crate::arith::Int;
use crate::error::{Error, Result};
use crate::forms::Discriminant;
use crate::orders::{period_product, principal_expansion, CfExpansion};

/// Square integer matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    n: usize,
    entries: Vec<Int>,
}

impl IntMatrix {
    pub fn new(n: usize, entries: Vec<Int>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::invalid(format!(
                "{} entries do not fill a {n}x{n} matrix",
                entries.len()
            )));
        }
        Ok(IntMatrix { n, entries })
    }

    pub fn from_rows<T: Into<Int> + Copy>(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("matrix rows must all have length n"));
        }
        Ok(IntMatrix { n, entries: rows.iter().flatten().map(|&x| x.into()).collect() })
    }

    pub fn zero(n: usize) -> Self {
        IntMatrix { n, entries: vec![Int::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n);
        for i in 0..n {
            m[(i, i)] = Int::one();
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> Vec<Vec<Int>> {
        self.entries.chunks(self.n.max(1)).map(|r| r.to_vec()).collect()
    }

    pub fn trace(&self) -> Int {
        (0..self.n).map(|i| &self[(i, i)]).sum()
    }

    pub fn mul(&self, rhs: &IntMatrix) -> IntMatrix {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        let n = self.n;
        let mut out = Self::zero(n);
        for i in 0..n {
            for k in 0..n {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * &rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn sub(&self, rhs: &IntMatrix) -> IntMatrix {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        let entries = self.entries.iter().zip(&rhs.entries).map(|(a, b)| a - b).collect();
        IntMatrix { n: self.n, entries }
    }

    pub fn pow(&self, mut k: u32) -> IntMatrix {
        let mut acc = Self::identity(self.n);
        let mut base = self.clone();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            k >>= 1;
        }
        acc
    }

    /// Determinant by fraction-free (Bareiss) elimination.
    pub fn det(&self) -> Int {
        let n = self.n;
        if n == 0 {
            return Int::one();
        }
        let mut m = self.clone();
        let mut sign = Int::one();
        let mut prev = Int::one();
        for k in 0..n - 1 {
            if m[(k, k)].is_zero() {
                let Some(p) = (k + 1..n).find(|&i| !m[(i, k)].is_zero()) else {
                    return Int::zero();
                };
                m.swap_rows(k, p);
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = (&m[(i, j)] * &m[(k, k)] - &m[(i, k)] * &m[(k, j)]) / &prev;
                    m[(i, j)] = v;
                }
            }
            prev = m[(k, k)].clone();
        }
        sign * &m[(n - 1, n - 1)]
    }

    pub fn is_unimodular(&self) -> bool {
        self.det().abs().is_one()
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        if i != j {
            for c in 0..self.n {
                self.entries.swap(i * self.n + c, j * self.n + c);
            }
        }
    }

    fn swap_cols(&mut self, i: usize, j: usize) {
        if i != j {
            for r in 0..self.n {
                self.entries.swap(r * self.n + i, r * self.n + j);
            }
        }
    }

    /// row_dst += q * row_src
    fn add_row(&mut self, dst: usize, src: usize, q: &Int) {
        for c in 0..self.n {
            let v = q * &self[(src, c)];
            self[(dst, c)] += v;
        }
    }

    /// col_dst += q * col_src
    fn add_col(&mut self, dst: usize, src: usize, q: &Int) {
        for r in 0..self.n {
            let v = q * &self[(r, src)];
            self[(r, dst)] += v;
        }
    }

    fn negate_row(&mut self, i: usize) {
        for c in 0..self.n {
            let v = -&self[(i, c)];
            self[(i, c)] = v;
        }
    }
}

impl std::ops::Index<(usize, usize)> for IntMatrix {
    type Output = Int;
    fn index(&self, (i, j): (usize, usize)) -> &Int {
        &self.entries[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Int {
        &mut self.entries[i * self.n + j]
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .rows()
            .iter()
            .map(|r| format!("[{}]", r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")))
            .collect();
        write!(f, "[{}]", rows.join(", "))
    }
}

impl Serialize for IntMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        crate::json::int_rows(&self.rows(), s)
    }
}

/// `U * M * V = S` with `U`, `V` unimodular and `S` diagonal, `s_1 | s_2 | ...`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnfResult {
    pub u: IntMatrix,
    pub s: IntMatrix,
    pub v: IntMatrix,
}

impl SnfResult {
    pub fn diagonal(&self) -> Vec<Int> {
        (0..self.s.n).map(|i| self.s[(i, i)].clone()).collect()
    }
}

/// Smallest nonzero `|entry|` in the lower-right block starting at `t`, first
/// in row-major order on ties.
fn find_pivot(s: &IntMatrix, t: usize) -> Option<(usize, usize)> {
    let mut best: Option<((usize, usize), Int)> = None;
    for i in t..s.n {
        for j in t..s.n {
            let v = s[(i, j)].abs();
            if v.is_zero() {
                continue;
            }
            if best.as_ref().is_none_or(|(_, b)| &v < b) {
                best = Some(((i, j), v));
            }
        }
    }
    best.map(|(pos, _)| pos)
}

pub fn smith_normal_form(m: &IntMatrix) -> SnfResult {
    let n = m.n;
    let mut s = m.clone();
    let mut u = IntMatrix::identity(n);
    let mut v = IntMatrix::identity(n);
    for t in 0..n {
        loop {
            let Some((pi, pj)) = find_pivot(&s, t) else {
                return SnfResult { u, s, v };
            };
            s.swap_rows(t, pi);
            u.swap_rows(t, pi);
            s.swap_cols(t, pj);
            v.swap_cols(t, pj);

            let pivot = s[(t, t)].clone();
            let mut clean = true;
            for i in t + 1..n {
                let q = -s[(i, t)].div_floor(&pivot);
                if !q.is_zero() {
                    s.add_row(i, t, &q);
                    u.add_row(i, t, &q);
                }
                clean &= s[(i, t)].is_zero();
            }
            for j in t + 1..n {
                let q = -s[(t, j)].div_floor(&pivot);
                if !q.is_zero() {
                    s.add_col(j, t, &q);
                    v.add_col(j, t, &q);
                }
                clean &= s[(t, j)].is_zero();
            }
            if !clean {
                continue;
            }
            // Row and column t are clear; the pivot must divide the rest.
            let offender = (t + 1..n)
                .flat_map(|i| (t + 1..n).map(move |j| (i, j)))
                .find(|&(i, j)| !s[(i, j)].is_multiple_of(&pivot));
            match offender {
                Some((i, _)) => {
                    s.add_row(t, i, &Int::one());
                    u.add_row(t, i, &Int::one());
                }
                None => break,
            }
        }
        if s[(t, t)].is_negative() {
            s.negate_row(t);
            u.negate_row(t);
        }
    }
    SnfResult { u, s, v }
}

/// Finite abelian group `Z/d_1 + ... + Z/d_r` with `1 < d_1 | ... | d_r`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct K0Group {
    #[serde(serialize_with = "crate::json::ints")]
    pub invariant_factors: Vec<Int>,
    #[serde(serialize_with = "crate::json::int")]
    pub order: Int,
}

impl K0Group {
    pub fn is_trivial(&self) -> bool {
        self.invariant_factors.is_empty()
    }
}

impl fmt::Display for K0Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.invariant_factors.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.invariant_factors.iter().map(|d| format!("Z/{d}")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// `Z^n / (I - A^k) Z^n` for a det-1 matrix `A`, via Smith normal form.
pub fn k0_crossed_product(a: &IntMatrix, k: u32) -> Result<K0Group> {
    if k == 0 {
        return Err(Error::invalid("shift exponent k must be >= 1"));
    }
    if !a.det().is_one() {
        return Err(Error::invalid(format!("matrix {a} does not have determinant 1")));
    }
    let m = IntMatrix::identity(a.n).sub(&a.pow(k));
    let order = m.det().abs();
    if order.is_zero() {
        return Err(Error::DegenerateInput(format!(
            "I - A^{k} is singular for A = {a}; the quotient is infinite"
        )));
    }
    let invariant_factors = smith_normal_form(&m)
        .diagonal()
        .into_iter()
        .filter(|d| !d.is_one())
        .collect();
    Ok(K0Group { invariant_factors, order })
}

/// Product of `[[a_i, 1], [1, 0]]` over one period, taken twice when the
/// period has odd length so that the determinant is `+1`.
pub fn matrix_from_cf(expansion: &CfExpansion) -> Result<IntMatrix> {
    if expansion.period.is_empty() {
        return Err(Error::invalid("continued fraction has an empty period"));
    }
    let mut quotients = expansion.period.clone();
    if quotients.len() % 2 == 1 {
        quotients.extend_from_slice(&expansion.period);
    }
    let [[a, b], [c, d]] = period_product(&quotients);
    IntMatrix::new(2, vec![a, b, c, d])
}

/// The non-negative det-1 matrix attached to discriminant `d`: the period
/// product of `(D mod 2 + sqrt D)/2`. Its trace is the Pell `t` of `d`.
pub fn matrix_from_pell(d: &Int) -> Result<IntMatrix> {
    let disc = Discriminant::new(d.clone())?;
    matrix_from_cf(&principal_expansion(&disc))
}

/// DOT text of the Bratteli diagram of `a`: a root joined to each vertex of
/// rank 1, then `levels` transitions in which vertex `r` of rank `i` has
/// `a[r][s]` parallel edges to vertex `s` of rank `i + 1`.
pub fn bratteli_export(a: &IntMatrix, levels: u32) -> Result<String> {
    if levels == 0 {
        return Err(Error::invalid("levels must be >= 1"));
    }
    if a.entries.iter().any(|x| x.is_negative()) {
        return Err(Error::invalid(format!("{a} has a negative partial multiplicity")));
    }
    let n = a.n;
    let mut out = String::from("digraph bratteli {\n  rankdir=LR;\n  root [shape=point];\n");
    for rank in 1..=levels + 1 {
        for i in 1..=n {
            writeln!(out, "  v{rank}_{i} [shape=point];").unwrap();
        }
    }
    for i in 1..=n {
        writeln!(out, "  root -> v1_{i};").unwrap();
    }
    for rank in 1..=levels {
        for r in 0..n {
            for s in 0..n {
                let mut count = a[(r, s)].clone();
                while count.is_positive() {
                    writeln!(out, "  v{rank}_{} -> v{}_{};", r + 1, rank + 1, s + 1).unwrap();
                    count -= 1u32;
                }
            }
        }
    }
    out.push_str("}\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::lucas_v;
    use crate::orders::{cf_expand, pell4_fundamental};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn mat(rows: &[&[i64]]) -> IntMatrix {
        IntMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn ints(v: &[i64]) -> Vec<Int> {
        v.iter().map(|&x| Int::from(x)).collect()
    }

    fn golden() -> IntMatrix {
        mat(&[&[2, 1], &[1, 1]])
    }

    fn check_snf(m: &IntMatrix) {
        let r = smith_normal_form(m);
        assert_eq!(r.u.mul(m).mul(&r.v), r.s, "U M V != S for {m}");
        assert!(r.u.is_unimodular() && r.v.is_unimodular());
        let d = r.diagonal();
        for i in 0..m.n {
            for j in 0..m.n {
                if i != j {
                    assert!(r.s[(i, j)].is_zero());
                }
            }
        }
        assert!(d.iter().all(|x| !x.is_negative()));
        for w in d.windows(2) {
            assert!(w[1].is_multiple_of(&w[0]) || w[0].is_zero() && w[1].is_zero(), "{d:?}");
        }
        assert_eq!(r.s.det().abs(), m.det().abs());
    }

    #[test]
    fn determinant_small_cases() {
        assert_eq!(golden().det(), Int::from(1));
        assert_eq!(mat(&[&[0, 1], &[1, 0]]).det(), Int::from(-1));
        assert_eq!(mat(&[&[2, 0, 1], &[1, 3, 2], &[1, 1, 2]]).det(), Int::from(6));
        assert_eq!(mat(&[&[1, 2], &[2, 4]]).det(), Int::from(0));
        assert_eq!(mat(&[&[0, 0, 1], &[0, 1, 0], &[1, 0, 0]]).det(), Int::from(-1));
    }

    #[test]
    fn snf_examples() {
        let r = smith_normal_form(&IntMatrix::identity(2));
        assert_eq!(r.s, IntMatrix::identity(2));
        assert_eq!((r.u, r.v), (IntMatrix::identity(2), IntMatrix::identity(2)));
        assert_eq!(smith_normal_form(&mat(&[&[-1, -1], &[-1, 0]])).diagonal(), ints(&[1, 1]));
        assert_eq!(smith_normal_form(&mat(&[&[-33, -21], &[-21, -12]])).diagonal(), ints(&[3, 15]));
        assert_eq!(smith_normal_form(&IntMatrix::zero(3)).diagonal(), ints(&[0, 0, 0]));
        check_snf(&mat(&[&[2, 4, 4], &[-6, 6, 12], &[10, -4, -16]]));
        assert_eq!(
            smith_normal_form(&mat(&[&[2, 4, 4], &[-6, 6, 12], &[10, -4, -16]])).diagonal(),
            ints(&[2, 6, 12])
        );
    }

    #[test]
    fn snf_is_deterministic() {
        let m = mat(&[&[6, 4, 9], &[3, -8, 2], &[5, 5, 5]]);
        assert_eq!(smith_normal_form(&m), smith_normal_form(&m));
    }

    #[test]
    fn snf_contract_on_random_matrices() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..300 {
            let n = rng.gen_range(1..=5);
            let entries = (0..n * n).map(|_| Int::from(rng.gen_range(-20..=20))).collect();
            check_snf(&IntMatrix::new(n, entries).unwrap());
        }
    }

    #[test]
    fn k0_examples() {
        let g = k0_crossed_product(&golden(), 1).unwrap();
        assert!(g.is_trivial());
        assert_eq!(g.order, Int::from(1));
        let g = k0_crossed_product(&golden(), 2).unwrap();
        assert_eq!(g.invariant_factors, ints(&[5]));
        assert_eq!(g.order, Int::from(5));
        let g = k0_crossed_product(&golden(), 4).unwrap();
        assert_eq!(g.invariant_factors, ints(&[3, 15]));
        assert_eq!(g.order, Int::from(45));
    }

    #[test]
    fn k0_rejects_bad_input() {
        assert!(matches!(
            k0_crossed_product(&mat(&[&[1, 1], &[0, 1]]), 1),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            k0_crossed_product(&mat(&[&[2, 1], &[1, 0]]), 1),
            Err(Error::InvalidArgument(_))
        ));
        assert!(k0_crossed_product(&golden(), 0).is_err());
    }

    #[test]
    fn k0_order_is_lucas_minus_two() {
        for t in 3i64..=50 {
            let companion = mat(&[&[t, -1], &[1, 0]]);
            for k in 1..=20 {
                let g = k0_crossed_product(&companion, k).unwrap();
                assert_eq!(g.order, lucas_v(&Int::from(t), k) - 2u32);
            }
        }
    }

    #[test]
    fn cf_matrix_examples() {
        let e = cf_expand(&Int::from(1), &Int::from(2), &Int::from(5)).unwrap();
        assert_eq!(matrix_from_cf(&e).unwrap(), golden());
        let two = CfExpansion { preperiod: vec![], period: ints(&[2]) };
        assert_eq!(matrix_from_cf(&two).unwrap(), mat(&[&[5, 2], &[2, 1]]));
        let ones = CfExpansion { preperiod: vec![], period: ints(&[1, 1]) };
        assert_eq!(matrix_from_cf(&ones).unwrap(), golden());
        let empty = CfExpansion { preperiod: vec![], period: vec![] };
        assert!(matrix_from_cf(&empty).is_err());
    }

    #[test]
    fn pell_matrix_examples() {
        assert_eq!(matrix_from_pell(&Int::from(5)).unwrap(), golden());
        let m8 = matrix_from_pell(&Int::from(8)).unwrap();
        assert_eq!(m8.trace(), Int::from(6));
        assert_eq!(m8.det(), Int::from(1));
        for d in [5i64, 8, 12, 13, 20, 21, 24, 28, 29, 45, 60, 61, 92, 109] {
            let m = matrix_from_pell(&Int::from(d)).unwrap();
            assert_eq!(m.det(), Int::from(1));
            assert!(m.entries.iter().all(|x| !x.is_negative()));
            assert_eq!(m.trace(), pell4_fundamental(&Int::from(d)).unwrap().t, "D = {d}");
        }
    }

    #[test]
    fn bratteli_golden_edges() {
        let dot = bratteli_export(&golden(), 2).unwrap();
        let count = |e: &str| dot.lines().filter(|l| l.trim() == e).count();
        assert_eq!(count("v1_1 -> v2_1;"), 2);
        assert_eq!(count("v1_1 -> v2_2;"), 1);
        assert_eq!(count("v1_2 -> v2_1;"), 1);
        assert_eq!(count("v1_2 -> v2_2;"), 1);
        assert_eq!(count("v2_1 -> v3_1;"), 2);
        assert_eq!(count("root -> v1_1;"), 1);
        assert!(dot.starts_with("digraph bratteli {\n  rankdir=LR;"));

        let id = bratteli_export(&IntMatrix::identity(2), 1).unwrap();
        let edges: Vec<&str> = id.lines().filter(|l| l.contains("->") && !l.contains("root")).collect();
        assert_eq!(edges, vec!["  v1_1 -> v2_1;", "  v1_2 -> v2_2;"]);

        assert!(bratteli_export(&golden(), 0).is_err());
        assert!(bratteli_export(&mat(&[&[1, -1], &[0, 1]]), 1).is_err());
    }
}
