//! Genus of an indefinite form computed two ways: by counting classes, and as
//! `|det(I - A^k)|` for the matrix attached to its fundamental discriminant.

use std::collections::HashMap;
use std::fmt;

use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::arith::{cheb_paper, lucas_v, ChebValue, Int};
use crate::error::{Error, Result};
use crate::forms::{
    class_group, discriminant_of, is_fundamental_discriminant, narrow_class_number, Discriminant,
    QuadForm, MAX_ENUM_DISCRIMINANT,
};
use crate::k0::{k0_crossed_product, matrix_from_pell, K0Group};
use crate::orders::{
    class_number_order_wide, conductor_factor, pell4_fundamental, unit_index, wide_class_number, PellSolution,
};

/// How the right side `|det(I - A^k)|` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// `V_k(t) - 2` with `t` the trace of the Pell unit.
    #[default]
    PellTrace,
    /// `cheb_paper(D0, k)`, reading the trace as `sqrt(D0 + 4)`; non-integer values never match.
    PaperChebyshev,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::PellTrace => "pell-trace",
            Mode::PaperChebyshev => "paper-chebyshev",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pell-trace" => Ok(Mode::PellTrace),
            "paper-chebyshev" => Ok(Mode::PaperChebyshev),
            _ => Err(Error::invalid(format!("unknown mode {s:?}"))),
        }
    }
}

/// Which of `k` and `f` is minimized first when looking for the least pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchOrder {
    #[default]
    KThenF,
    FThenK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchBounds {
    pub max_f: u64,
    pub max_k: u32,
    pub order: SearchOrder,
}

impl Default for SearchBounds {
    fn default() -> Self {
        SearchBounds { max_f: 100, max_k: 64, order: SearchOrder::KThenF }
    }
}

impl SearchBounds {
    pub fn new(max_f: u64, max_k: u32) -> Result<Self> {
        let b = SearchBounds { max_f, max_k, order: SearchOrder::KThenF };
        b.validate()?;
        Ok(b)
    }

    fn validate(&self) -> Result<()> {
        if self.max_f == 0 || self.max_k == 0 {
            return Err(Error::invalid("search bounds must be >= 1"));
        }
        Ok(())
    }

    fn describe(&self) -> String {
        match self.order {
            SearchOrder::KThenF => {
                format!("search order: k = 1..{} outer, f = 1..{} inner", self.max_k, self.max_f)
            }
            SearchOrder::FThenK => {
                format!("search order: f = 1..{} outer, k = 1..{} inner", self.max_f, self.max_k)
            }
        }
    }
}

/// Least `(f, k)` with `h+(f^2 D0) = det_value`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SearchResult {
    pub f: u64,
    pub k: u32,
    #[serde(serialize_with = "crate::json::int")]
    pub det_value: Int,
    pub mode: Mode,
}

/// Right side of the search equation at exponent `k`, or `None` when the
/// Chebyshev reading at sqrt(D0 + 4) is not an integer there.
pub fn det_value(d0: &Int, pell: &PellSolution, k: u32, mode: Mode) -> Result<Option<Int>> {
    match mode {
        Mode::PellTrace => Ok(Some(lucas_v(&pell.t, k) - 2u32)),
        Mode::PaperChebyshev => Ok(match cheb_paper(d0, k)? {
            ChebValue::Integer(n) => Some(n),
            ChebValue::NonInteger(_) => None,
        }),
    }
}

fn require_fundamental(d0: &Int) -> Result<Discriminant> {
    let disc = Discriminant::new(d0.clone())?;
    if !disc.is_fundamental() {
        return Err(Error::invalid(format!("{d0} is not a fundamental discriminant")));
    }
    Ok(disc)
}

/// Per-discriminant search state: brute-force narrow class numbers of the
/// orders `f^2 D0` are computed at most once.
struct Searcher {
    d0: Discriminant,
    h0: Int,
    pell: PellSolution,
    mode: Mode,
    cache: HashMap<u64, Int>,
}

impl Searcher {
    fn new(d0: Discriminant, h0: Int, pell: PellSolution, mode: Mode) -> Self {
        Searcher { d0, h0, pell, mode, cache: HashMap::new() }
    }

    fn h_plus(&mut self, f: u64) -> Result<Int> {
        if let Some(h) = self.cache.get(&f) {
            return Ok(h.clone());
        }
        let h = if f == 1 {
            self.h0.clone()
        } else {
            Int::from(narrow_class_number(&self.d0.with_conductor(&Int::from(f))?)?)
        };
        self.cache.insert(f, h.clone());
        Ok(h)
    }

    /// A value can only be `h+(f^2 D0)` if it is a multiple of `h+(D0)` (the
    /// class group of the order surjects onto that of the maximal order) and at
    /// most `f^2 D0` (there are fewer reduced forms than that).
    fn plausible(&self, f: u64, det: &Int) -> bool {
        det.is_positive()
            && det <= &(&self.d0.value * f * f)
            && det.is_multiple_of(&self.h0)
    }

    fn matches(&mut self, f: u64, det: &Int) -> Result<bool> {
        Ok(self.plausible(f, det) && &self.h_plus(f)? == det)
    }

    fn run(&mut self, bounds: &SearchBounds) -> Result<Option<SearchResult>> {
        bounds.validate()?;
        let ceiling = &self.d0.value * bounds.max_f * bounds.max_f;
        let mut dets = Vec::with_capacity(bounds.max_k as usize);
        for k in 1..=bounds.max_k {
            let det = det_value(&self.d0.value, &self.pell, k, self.mode)?;
            // Both readings grow strictly with k, so nothing past the ceiling can match.
            if det.as_ref().is_some_and(|d| d > &ceiling) {
                break;
            }
            dets.push((k, det));
        }
        let found = |f: u64, k: u32, det: &Int, mode| SearchResult { f, k, det_value: det.clone(), mode };
        match bounds.order {
            SearchOrder::KThenF => {
                for (k, det) in &dets {
                    let Some(det) = det else { continue };
                    for f in 1..=bounds.max_f {
                        if self.matches(f, det)? {
                            return Ok(Some(found(f, *k, det, self.mode)));
                        }
                    }
                }
            }
            SearchOrder::FThenK => {
                for f in 1..=bounds.max_f {
                    for (k, det) in &dets {
                        let Some(det) = det else { continue };
                        if self.matches(f, det)? {
                            return Ok(Some(found(f, *k, det, self.mode)));
                        }
                    }
                }
            }
        }
        Ok(None)
    }
}

/// Least `(f, k)` within `bounds` with `class_group(f^2 D0).order` equal to the
/// right side at `k`, or `None` when there is no such pair.
pub fn search_fk(d0: &Int, bounds: &SearchBounds, mode: Mode) -> Result<Option<SearchResult>> {
    let disc = require_fundamental(d0)?;
    let h0 = Int::from(narrow_class_number(&disc)?);
    let pell = pell4_fundamental(d0)?;
    Searcher::new(disc, h0, pell, mode).run(bounds)
}

pub fn genus_bruteforce(form: &QuadForm) -> Result<Int> {
    Ok(Int::from(class_group(&discriminant_of(form)?)?.order()))
}

/// `det_value / ((f / e_f+) * prod_{p | f} (1 - (D0/p)/p))`, which must be the
/// positive integer `h+(D0)`.
pub fn genus_via_formula(d0: &Int, f: u64, k: u32, mode: Mode) -> Result<Int> {
    require_fundamental(d0)?;
    if f == 0 || k == 0 {
        return Err(Error::invalid("f and k must be >= 1"));
    }
    let pell = pell4_fundamental(d0)?;
    let Some(det) = det_value(d0, &pell, k, mode)? else {
        return Err(Error::invalid(format!("{mode} value at D0 = {d0}, k = {k} is not an integer")));
    };
    let e = unit_index(d0, f)?;
    let value = BigRational::from_integer(det) / conductor_factor(d0, f, e)?;
    if value.is_integer() && value.is_positive() {
        Ok(value.to_integer())
    } else {
        Err(Error::FormulaMismatch {
            context: format!("genus formula at D0 = {d0}, f = {f}, k = {k}"),
            value,
        })
    }
}

/// Outcome of comparing `Cl+(f^2 D0)` with `Z^2 / (I - A^k) Z^2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IsoVerdict {
    pub agrees: bool,
    pub k0: K0Group,
    #[serde(serialize_with = "crate::json::ints")]
    pub class_group_factors: Vec<Int>,
}

pub fn compare_groups(k0: K0Group, class_group_factors: Vec<Int>) -> IsoVerdict {
    IsoVerdict { agrees: k0.invariant_factors == class_group_factors, k0, class_group_factors }
}

pub fn verify_iso(d0: &Int, f: u64, k: u32) -> Result<IsoVerdict> {
    let disc = require_fundamental(d0)?;
    let cg = class_group(&disc.with_conductor(&Int::from(f))?)?;
    let k0 = k0_crossed_product(&matrix_from_pell(d0)?, k)?;
    Ok(compare_groups(k0, cg.invariant_factors().to_vec()))
}

fn discriminant_value<S: Serializer>(d: &Discriminant, s: S) -> std::result::Result<S::Ok, S::Error> {
    crate::json::int(&d.value, s)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GenusReport {
    pub input_form: Option<QuadForm>,
    #[serde(serialize_with = "discriminant_value")]
    pub discriminant: Discriminant,
    #[serde(serialize_with = "crate::json::int")]
    pub g_bruteforce: Int,
    pub pell: PellSolution,
    pub search_result: Option<SearchResult>,
    #[serde(serialize_with = "optional_int")]
    pub g_formula: Option<Int>,
    pub k0: K0Group,
    #[serde(serialize_with = "crate::json::ints")]
    pub class_group_factors: Vec<Int>,
    pub iso_agrees: bool,
    pub notes: Vec<String>,
    /// Set when the closed-form genus did not come out as `h+(D0)`.
    #[serde(skip)]
    pub formula_mismatch: bool,
}

fn optional_int<S: Serializer>(x: &Option<Int>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(n) => crate::json::int(n, s),
        None => s.serialize_none(),
    }
}

/// Full report for a discriminant `D = f0^2 D0`; the search and the K0 side
/// run over the fundamental part `D0`.
fn build_report(
    disc: Discriminant,
    input_form: Option<QuadForm>,
    bounds: &SearchBounds,
    mode: Mode,
    mut notes: Vec<String>,
) -> Result<GenusReport> {
    bounds.validate()?;
    let d0 = require_fundamental(&disc.fundamental)?;
    let cg = class_group(&disc)?;
    let g_bruteforce = Int::from(cg.order());
    let h0 = if disc.is_fundamental() { g_bruteforce.clone() } else { Int::from(narrow_class_number(&d0)?) };
    let pell = pell4_fundamental(&d0.value)?;
    if !disc.is_fundamental() {
        notes.push(format!(
            "discriminant {} has conductor {} over D0 = {}",
            disc.value, disc.conductor, d0.value
        ));
    }
    notes.push(bounds.describe());

    let mut searcher = Searcher::new(d0.clone(), h0.clone(), pell.clone(), mode);
    let search_result = match searcher.run(bounds) {
        Ok(r) => r,
        Err(e) => {
            notes.push(format!("search aborted: {e}"));
            None
        }
    };

    let mut formula_mismatch = false;
    let mut g_formula = None;
    let verdict = match &search_result {
        Some(r) => {
            let recheck = class_group(&d0.with_conductor(&Int::from(r.f))?)?;
            if Int::from(recheck.order()) != r.det_value {
                return Err(Error::invalid(format!(
                    "search at f = {}, k = {} did not re-verify: h+ = {}, det = {}",
                    r.f,
                    r.k,
                    recheck.order(),
                    r.det_value
                )));
            }
            match genus_via_formula(&d0.value, r.f, r.k, mode) {
                Ok(g) => {
                    if g != h0 {
                        formula_mismatch = true;
                        notes.push(format!("genus formula gives {g}, but h+(D0) = {h0}"));
                    }
                    g_formula = Some(g);
                }
                Err(e @ Error::FormulaMismatch { .. }) => {
                    formula_mismatch = true;
                    notes.push(e.to_string());
                }
                Err(e) => return Err(e),
            }
            let h0_usize = h0.to_usize().expect("class numbers of enumerable discriminants fit usize");
            let wide0 = Int::from(wide_class_number(&d0, h0_usize));
            let wide = class_number_order_wide(&d0.value, r.f, &wide0)?;
            if wide != r.det_value {
                notes.push(format!(
                    "wide class number of conductor {} is {wide} (narrow {})",
                    r.f, r.det_value
                ));
            }
            let k0 = k0_crossed_product(&matrix_from_pell(&d0.value)?, r.k)?;
            compare_groups(k0, recheck.invariant_factors().to_vec())
        }
        None => {
            notes.push(format!(
                "no (f, k) within bounds; comparing Cl+({}) with K0 at k = 1",
                d0.value
            ));
            let k0 = k0_crossed_product(&matrix_from_pell(&d0.value)?, 1)?;
            let factors = if disc.is_fundamental() {
                cg.invariant_factors().to_vec()
            } else {
                class_group(&d0)?.invariant_factors().to_vec()
            };
            compare_groups(k0, factors)
        }
    };
    if mode == Mode::PaperChebyshev && !crate::arith::is_square(&(&d0.value + 4u32)) {
        notes.push("paper-chebyshev: D0 + 4 is not a square, so the trace differs from the Pell trace".into());
    }

    Ok(GenusReport {
        input_form,
        discriminant: disc,
        g_bruteforce,
        pell,
        search_result,
        g_formula,
        k0: verdict.k0,
        class_group_factors: verdict.class_group_factors,
        iso_agrees: verdict.agrees,
        notes,
        formula_mismatch,
    })
}

pub fn report_for_form(form: &QuadForm, bounds: &SearchBounds, mode: Mode) -> Result<GenusReport> {
    build_report(discriminant_of(form)?, Some(form.clone()), bounds, mode, Vec::new())
}

/// Report for a discriminant; `delta = 2, 3 mod 4` is taken as `4 delta`.
pub fn report_for_discriminant(delta: &Int, bounds: &SearchBounds, mode: Mode) -> Result<GenusReport> {
    let (disc, notes) = normalize_discriminant(delta)?;
    build_report(disc, None, bounds, mode, notes)
}

pub fn normalize_discriminant(delta: &Int) -> Result<(Discriminant, Vec<String>)> {
    let r = delta.mod_floor(&Int::from(4u32));
    if delta.is_positive() && (r == Int::from(2u32) || r == Int::from(3u32)) {
        let d = delta * 4u32;
        let note = format!("{delta} is 2 or 3 mod 4; using discriminant {d}");
        return Ok((Discriminant::new(d)?, vec![note]));
    }
    Ok((Discriminant::new(delta.clone())?, Vec::new()))
}

/// Fundamental discriminants in `[from, to]`, ascending.
pub fn fundamental_discriminants(from: &Int, to: &Int) -> Result<Vec<Int>> {
    if to >= &Int::from(MAX_ENUM_DISCRIMINANT) {
        return Err(Error::invalid(format!("range end {to} is too large to enumerate")));
    }
    let (Some(lo), Some(hi)) = (from.max(&Int::one()).to_i64(), to.to_i64()) else {
        return Ok(Vec::new());
    };
    Ok((lo..=hi).map(Int::from).filter(is_fundamental_discriminant).collect())
}

fn sweep_item(d0: &Int, bounds: &SearchBounds, mode: Mode) -> GenusReport {
    let disc = Discriminant::new(d0.clone()).expect("fundamental discriminants are valid");
    build_report(disc.clone(), None, bounds, mode, Vec::new()).unwrap_or_else(|e| error_report(disc, mode, e))
}

/// Placeholder for an item whose computation failed; the error is in `notes`.
fn error_report(disc: Discriminant, mode: Mode, e: Error) -> GenusReport {
    GenusReport {
        input_form: None,
        pell: PellSolution { d: disc.value.clone(), t: Int::zero(), s: Int::zero() },
        discriminant: disc,
        g_bruteforce: Int::zero(),
        search_result: None,
        g_formula: None,
        k0: K0Group { invariant_factors: Vec::new(), order: Int::one() },
        class_group_factors: Vec::new(),
        iso_agrees: false,
        notes: vec![format!("{mode}: {e}")],
        formula_mismatch: matches!(e, Error::FormulaMismatch { .. }),
    }
}

/// One report per fundamental discriminant in `[from, to]`, in ascending order.
pub fn sweep(from: &Int, to: &Int, bounds: &SearchBounds, mode: Mode) -> Result<Vec<GenusReport>> {
    bounds.validate()?;
    Ok(fundamental_discriminants(from, to)?.iter().map(|d| sweep_item(d, bounds, mode)).collect())
}

/// [`sweep`] on the rayon pool; the output is identical.
pub fn sweep_parallel(from: &Int, to: &Int, bounds: &SearchBounds, mode: Mode) -> Result<Vec<GenusReport>> {
    bounds.validate()?;
    Ok(fundamental_discriminants(from, to)?.par_iter().map(|d| sweep_item(d, bounds, mode)).collect())
}
