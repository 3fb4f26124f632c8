//! Young functions, Luxemburg averages and the one-sided Orlicz maximal
//! operators.
//!
//! Every family is evaluated through `ln A(t)` so that the exponential
//! families stay finite far beyond the range where `A(t)` itself overflows.
//! Families that are not convex near the origin are replaced by their
//! convex minorant through the origin: linear up to the tangency point `t*`
//! that minimizes `φ(t)/t`, then `φ`. All families are normalized so that
//! `A(1) = 1`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::grid::{CellSet, IntervalSpec, SampledFunction};
use crate::maximal::{one_sided_maximal, Direction, WindowPolicy};

/// Relative tolerance of every bisection in this module.
pub const BISECTION_TOL: f64 = 1e-12;

const MIN_TABLE_SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `t^r`
    Power { r: f64 },
    /// `t^r log(e+t)^s`
    PowerLog { r: f64, s: f64 },
    /// `t log(e+t)^{1+k} log log(e^e+t)^{1+ε}`
    LogLogPower { k: f64, eps: f64 },
    /// `exp(t^{1/k}) − 1`
    ExpRoot { k: f64 },
    /// `exp(t^{1/(1+k)} / log(e+t)^{(1+ε)/(1+k)}) − 1`
    ExpLog { k: f64, eps: f64 },
    /// Samples `(t_i, A(t_i))`, interpolated linearly in log-log coordinates
    /// and extended past both ends with the end slopes.
    Tabulated {
        source: Option<String>,
        t: Vec<f64>,
        a: Vec<f64>,
    },
}

/// A normalized Young function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct YoungFunction {
    family: Family,
    /// Tangency point of the convex minorant; 0 when the family is convex.
    knee: f64,
    /// `ln(φ(t*)/t*)`, the log-slope of the linear piece.
    ln_slope: f64,
    /// `ln Φ(1)` before normalization.
    ln_norm: f64,
}

fn ln_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

impl Family {
    fn validate(&self) -> Result<()> {
        match *self {
            Family::Power { r } => check_range("r", r, r >= 1.0, ">= 1"),
            Family::PowerLog { r, s } => {
                check_range("r", r, r >= 1.0, ">= 1")?;
                check_range("s", s, s >= 0.0, ">= 0")
            }
            Family::LogLogPower { k, eps } | Family::ExpLog { k, eps } => {
                check_range("k", k, k >= 0.0, ">= 0")?;
                check_range("eps", eps, eps > 0.0, "> 0")
            }
            Family::ExpRoot { k } => check_range("k", k, k >= 1.0, ">= 1"),
            Family::Tabulated { ref t, ref a, .. } => {
                if t.len() != a.len() {
                    return Err(Error::LengthMismatch(t.len(), a.len()));
                }
                if t.len() < MIN_TABLE_SAMPLES {
                    return Err(Error::Parse(format!(
                        "tabulated Young function needs at least {MIN_TABLE_SAMPLES} samples, got {}",
                        t.len()
                    )));
                }
                let positive = t.iter().chain(a).all(|&v| v > 0.0 && v.is_finite());
                let increasing = t.windows(2).all(|w| w[0] < w[1]) && a.windows(2).all(|w| w[0] < w[1]);
                if !positive || !increasing {
                    return Err(Error::Parse(
                        "tabulated Young function samples must be positive and strictly increasing".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// `ln φ(t)` for `t > 0`, unnormalized and not convexified.
    fn ln_raw(&self, t: f64) -> f64 {
        let e = std::f64::consts::E;
        match *self {
            Family::Power { r } => r * t.ln(),
            Family::PowerLog { r, s } => r * t.ln() + s * (e + t).ln().ln(),
            Family::LogLogPower { k, eps } => {
                t.ln() + (1.0 + k) * (e + t).ln().ln() + (1.0 + eps) * (e.exp() + t).ln().ln().ln()
            }
            Family::ExpRoot { k } => ln_expm1(t.powf(1.0 / k)),
            Family::ExpLog { k, eps } => {
                let a = 1.0 / (1.0 + k);
                let b = (1.0 + eps) / (1.0 + k);
                ln_expm1((a * t.ln() - b * (e + t).ln().ln()).exp())
            }
            Family::Tabulated { t: ref ts, ref a, .. } => {
                let x = t.ln();
                let n = ts.len();
                let seg = match ts.partition_point(|&s| s <= t) {
                    0 => 0,
                    j if j >= n => n - 2,
                    j => j - 1,
                };
                let (x0, x1) = (ts[seg].ln(), ts[seg + 1].ln());
                let (y0, y1) = (a[seg].ln(), a[seg + 1].ln());
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
        }
    }

    fn needs_convexification(&self) -> bool {
        matches!(self, Family::ExpRoot { k } if *k > 1.0) || matches!(self, Family::ExpLog { .. })
    }
}

impl Family {
    /// Elasticity `t φ'(t) / φ(t)` of the exponential families.
    fn elasticity(&self, t: f64) -> f64 {
        let e = std::f64::consts::E;
        let (x, dx) = match *self {
            Family::ExpRoot { k } => {
                let x = t.powf(1.0 / k);
                (x, x / k)
            }
            Family::ExpLog { k, eps } => {
                let (a, b) = (1.0 / (1.0 + k), (1.0 + eps) / (1.0 + k));
                let l = (e + t).ln();
                let x = (a * t.ln() - b * l.ln()).exp();
                (x, x * (a - b * t / ((e + t) * l)))
            }
            _ => unreachable!("only the exponential families are convexified"),
        };
        dx / -(-x).exp_m1()
    }
}

/// Tangency point of the line through the origin, where the elasticity
/// `t φ'/φ` crosses 1; 0 if it never drops below 1.
fn tangency_point(family: &Family) -> f64 {
    let (lo, hi, steps) = (-30.0f64, 30.0f64, 1200);
    let h = (hi - lo) / steps as f64;
    let below = |u: f64| family.elasticity(u.exp()) < 1.0;
    let Some(i) = (0..steps).find(|&i| below(lo + h * i as f64) && !below(lo + h * (i + 1) as f64))
    else {
        return 0.0;
    };
    let (mut a, mut b) = (lo + h * i as f64, lo + h * (i + 1) as f64);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if below(mid) {
            a = mid;
        } else {
            b = mid;
        }
    }
    (0.5 * (a + b)).exp()
}

impl YoungFunction {
    pub fn new(family: Family) -> Result<Self> {
        family.validate()?;
        let knee = if family.needs_convexification() {
            tangency_point(&family)
        } else {
            0.0
        };
        let ln_slope = if knee > 0.0 {
            family.ln_raw(knee) - knee.ln()
        } else {
            0.0
        };
        let mut out = Self {
            family,
            knee,
            ln_slope,
            ln_norm: 0.0,
        };
        out.ln_norm = out.ln_unnormalized(1.0);
        Ok(out)
    }

    pub fn power(r: f64) -> Result<Self> {
        Self::new(Family::Power { r })
    }

    /// `L log L`, i.e. `t log(e+t)` normalized.
    pub fn l_log_l() -> Self {
        Self::new(Family::PowerLog { r: 1.0, s: 1.0 }).expect("valid parameters")
    }

    pub fn tabulated(t: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        Self::new(Family::Tabulated { source: None, t, a })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// The divisor `Φ(1)` applied to make `A(1) = 1`.
    pub fn normalization(&self) -> f64 {
        self.ln_norm.exp()
    }

    /// Tangency point `t*` of the linear piece, 0 for convex families.
    pub fn knee(&self) -> f64 {
        self.knee
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.family, Family::Power { r } if r == 1.0)
    }

    fn ln_unnormalized(&self, t: f64) -> f64 {
        if t < self.knee {
            self.ln_slope + t.ln()
        } else {
            self.family.ln_raw(t)
        }
    }

    /// `ln A(t)`; `-∞` at 0.
    pub fn ln_eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if self.is_identity() {
            return t.ln();
        }
        self.ln_unnormalized(t) - self.ln_norm
    }

    /// `A(t)` for `t ≥ 0`; `+∞` once it overflows.
    pub fn eval(&self, t: f64) -> f64 {
        if self.is_identity() {
            return t.max(0.0);
        }
        self.ln_eval(t).exp()
    }

    /// The `u` with `A(u) = s`, by bisection in log-space.
    pub fn inverse(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if self.is_identity() {
            return s;
        }
        let target = s.ln();
        let (mut lo, mut hi) = (1.0f64, 1.0f64);
        while self.ln_eval(hi) < target {
            hi *= 2.0;
        }
        while self.ln_eval(lo) > target {
            lo *= 0.5;
        }
        for _ in 0..200 {
            if hi / lo - 1.0 <= BISECTION_TOL {
                break;
            }
            let mid = (lo * hi).sqrt();
            if self.ln_eval(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo * hi).sqrt()
    }

    /// The built-in complementary function, when one is paired with this
    /// family: `t^p ↔ t^{p'}` and `L log L ↔ exp(t) − 1`.
    pub fn conjugate(&self) -> Option<YoungFunction> {
        let family = match self.family {
            Family::Power { r } if r > 1.0 => Family::Power { r: r / (r - 1.0) },
            Family::PowerLog { r, s } if r == 1.0 && s == 1.0 => Family::ExpRoot { k: 1.0 },
            Family::ExpRoot { k: 1.0 } => Family::PowerLog { r: 1.0, s: 1.0 },
            _ => return None,
        };
        Some(Self::new(family).expect("conjugate parameters are valid"))
    }
}

pub fn young_eval(a: &YoungFunction, t: f64) -> Result<f64> {
    check_range("t", t, t >= 0.0, ">= 0")?;
    Ok(a.eval(t))
}

pub fn young_inverse(a: &YoungFunction, s: f64) -> Result<f64> {
    check_range("s", s, s >= 0.0, ">= 0")?;
    Ok(a.inverse(s))
}

fn fmt_table_error(path: &str, message: impl fmt::Display) -> Error {
    Error::Io {
        path: path.to_string(),
        message: message.to_string(),
    }
}

/// Reads `t,A(t)` rows; a non-numeric first line is taken as a header.
fn read_table(path: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| fmt_table_error(path, e))?;
    let (mut t, mut a) = (Vec::new(), Vec::new());
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',').map(str::trim);
        let parsed = match (cols.next(), cols.next()) {
            (Some(x), Some(y)) => x.parse::<f64>().ok().zip(y.parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some((x, y)) => {
                t.push(x);
                a.push(y);
            }
            None if line_no == 0 => {}
            None => return Err(fmt_table_error(path, format!("bad row {}: {line}", line_no + 1))),
        }
    }
    Ok((t, a))
}

impl FromStr for YoungFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (tag, rest) = s.split_once(':').unwrap_or((s, ""));
        let nums = || -> Result<Vec<f64>> {
            rest.split(':')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad number {p:?} in Young spec {s:?}")))
                })
                .collect()
        };
        let arity = |v: Vec<f64>, n: usize| -> Result<Vec<f64>> {
            if v.len() == n {
                Ok(v)
            } else {
                Err(Error::Parse(format!("Young spec {s:?} expects {n} parameters")))
            }
        };
        let family = match tag {
            "power" => Family::Power { r: arity(nums()?, 1)?[0] },
            "powerlog" => {
                let v = arity(nums()?, 2)?;
                Family::PowerLog { r: v[0], s: v[1] }
            }
            "loglog" => {
                let v = arity(nums()?, 2)?;
                Family::LogLogPower { k: v[0], eps: v[1] }
            }
            "exproot" => Family::ExpRoot { k: arity(nums()?, 1)?[0] },
            "explog" => {
                let v = arity(nums()?, 2)?;
                Family::ExpLog { k: v[0], eps: v[1] }
            }
            "table" if !rest.is_empty() => {
                let (t, a) = read_table(rest)?;
                Family::Tabulated {
                    source: Some(rest.to_string()),
                    t,
                    a,
                }
            }
            _ => return Err(Error::Parse(format!("unknown Young function spec {s:?}"))),
        };
        Self::new(family)
    }
}

impl fmt::Display for YoungFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::Power { r } => write!(f, "power:{r}"),
            Family::PowerLog { r, s } => write!(f, "powerlog:{r}:{s}"),
            Family::LogLogPower { k, eps } => write!(f, "loglog:{k}:{eps}"),
            Family::ExpRoot { k } => write!(f, "exproot:{k}"),
            Family::ExpLog { k, eps } => write!(f, "explog:{k}:{eps}"),
            Family::Tabulated { source: Some(p), .. } => write!(f, "table:{p}"),
            Family::Tabulated { source: None, t, .. } => write!(f, "table:<{} samples>", t.len()),
        }
    }
}

impl TryFrom<String> for YoungFunction {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<YoungFunction> for String {
    fn from(a: YoungFunction) -> String {
        a.to_string()
    }
}

/// Luxemburg norm `inf{λ > 0 : Σ w_i A(|v_i|/λ) ≤ Σ w_i}` of a step function
/// given as `(value, length)` pieces.
pub fn luxemburg_norm(pieces: &[(f64, f64)], a: &YoungFunction) -> f64 {
    let total: f64 = pieces.iter().map(|p| p.1).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let max = pieces.iter().fold(0.0f64, |m, p| m.max(p.0.abs()));
    if max == 0.0 {
        return 0.0;
    }
    let mean = pieces.iter().map(|p| p.0.abs() * p.1).sum::<f64>() / total;
    if a.is_identity() {
        return mean.clamp(0.0, max);
    }
    let excess = |lambda: f64| -> f64 {
        pieces
            .iter()
            .filter(|p| p.0 != 0.0)
            .map(|p| p.1 * a.eval(p.0.abs() / lambda))
            .sum::<f64>()
            / total
    };
    let (mut lo, mut hi) = (mean.min(max), max);
    while excess(lo) <= 1.0 && lo > max * 1e-300 {
        lo *= 0.5;
    }
    if excess(lo) <= 1.0 {
        return lo;
    }
    for _ in 0..200 {
        if hi / lo - 1.0 <= BISECTION_TOL {
            break;
        }
        let mid = (lo * hi).sqrt();
        if excess(mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// A set over which an Orlicz average is taken.
#[derive(Debug, Clone, Copy)]
pub enum Region<'a> {
    Interval(IntervalSpec),
    Cells(&'a CellSet),
}

impl From<IntervalSpec> for Region<'_> {
    fn from(i: IntervalSpec) -> Self {
        Region::Interval(i)
    }
}

impl<'a> From<&'a CellSet> for Region<'a> {
    fn from(s: &'a CellSet) -> Self {
        Region::Cells(s)
    }
}

fn region_pieces(f: &SampledFunction, region: Region<'_>) -> Result<Vec<(f64, f64)>> {
    let g = &f.grid;
    match region {
        Region::Interval(iv) => {
            let lo = g.position(iv.a).round() as i64;
            let hi = g.position(iv.c).round() as i64;
            if hi <= lo {
                return Err(Error::EmptySet);
            }
            Ok((lo..hi)
                .map(|i| {
                    let v = if i >= 0 && (i as usize) < f.len() {
                        f.values[i as usize]
                    } else {
                        f.exterior
                    };
                    (v, g.spacing)
                })
                .collect())
        }
        Region::Cells(set) => {
            if !set.grid.same_as(g) {
                return Err(Error::GridMismatch);
            }
            if set.count() == 0 {
                return Err(Error::EmptySet);
            }
            Ok(set.indices().map(|i| (f.values[i], g.spacing)).collect())
        }
    }
}

/// `‖f‖_{A,E}`.
pub fn orlicz_average<'a>(
    f: &SampledFunction,
    region: impl Into<Region<'a>>,
    a: &YoungFunction,
) -> Result<f64> {
    Ok(luxemburg_norm(&region_pieces(f, region.into())?, a))
}

/// Pieces of the window of `k` cells from cell `i`, exterior included.
fn window_pieces(f: &SampledFunction, i: usize, k: usize) -> Vec<(f64, f64)> {
    let n = f.len();
    let end = (i + k).min(n);
    let mut pieces: Vec<(f64, f64)> = f.values[i..end].iter().map(|&v| (v, 1.0)).collect();
    if i + k > n {
        pieces.push((f.exterior, (i + k - n) as f64));
    }
    pieces
}

/// Dyadic window lengths from cell `i`: `1, 2, 4, …` up to the first power
/// reaching the end of the grid.
fn dyadic_lengths(n: usize, i: usize) -> impl Iterator<Item = usize> {
    let last = (n - i).next_power_of_two();
    std::iter::successors(Some(1usize), move |&k| (k < last).then_some(2 * k))
}

/// `M_A^+ f` over dyadic window lengths. For `A(t) = t` this is
/// `one_sided_maximal` with the dyadic policy.
pub fn orlicz_maximal(f: &SampledFunction, a: &YoungFunction) -> SampledFunction {
    if a.is_identity() {
        return one_sided_maximal(f, Direction::Forward, 1.0, WindowPolicy::DyadicLengths)
            .expect("delta = 1 is valid");
    }
    let n = f.len();
    let e = f.exterior.abs();
    let values = (0..n)
        .into_par_iter()
        .map(|i| {
            dyadic_lengths(n, i)
                .map(|k| luxemburg_norm(&window_pieces(f, i, k), a))
                .fold(e, f64::max)
        })
        .collect();
    SampledFunction {
        grid: f.grid,
        values,
        exterior: e,
    }
}

/// `M^+_{(α),A} f(x) = sup_h h^α ‖f‖_{A,(x,x+h)}` over dyadic window lengths.
pub fn fractional_orlicz_maximal(
    f: &SampledFunction,
    alpha: f64,
    a: &YoungFunction,
) -> Result<SampledFunction> {
    check_range("alpha", alpha, alpha > 0.0 && alpha < 1.0, "in (0, 1)")?;
    if f.exterior != 0.0 {
        return Err(Error::Unsupported(
            "fractional maximal operator of a function with a nonzero tail".into(),
        ));
    }
    let n = f.len();
    let dx = f.grid.spacing;
    let values = (0..n)
        .into_par_iter()
        .map(|i| {
            dyadic_lengths(n, i)
                .map(|k| (k as f64 * dx).powf(alpha) * luxemburg_norm(&window_pieces(f, i, k), a))
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(SampledFunction::new(f.grid, values).expect("finite values"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugatePair {
    pub a: YoungFunction,
    pub abar: YoungFunction,
}

impl ConjugatePair {
    /// `A` with its built-in complementary function.
    pub fn of(a: YoungFunction) -> Option<Self> {
        a.conjugate().map(|abar| Self { a, abar })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugateReport {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub argmin: f64,
    pub argmax: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Log-spaced sample of `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1).max(1) as f64).exp())
        .collect()
}

/// Range of `Ā⁻¹(t) A⁻¹(t) / t` over `tgrid`; passes when it lies in `[1, 2]`
/// up to the tolerance.
pub fn conjugate_check(pair: &ConjugatePair, tgrid: &[f64]) -> Result<ConjugateReport> {
    if tgrid.is_empty() {
        return Err(Error::EmptySet);
    }
    for &t in tgrid {
        check_range("t", t, (1.0..=1e6).contains(&t), "in [1, 1e6]")?;
    }
    let tolerance = 1e-6 + 4.0 * BISECTION_TOL;
    let mut report = ConjugateReport {
        min_ratio: f64::INFINITY,
        max_ratio: f64::NEG_INFINITY,
        argmin: f64::NAN,
        argmax: f64::NAN,
        tolerance,
        pass: false,
    };
    for &t in tgrid {
        let ratio = pair.abar.inverse(t) * pair.a.inverse(t) / t;
        if ratio < report.min_ratio {
            report.min_ratio = ratio;
            report.argmin = t;
        }
        if ratio > report.max_ratio {
            report.max_ratio = ratio;
            report.argmax = t;
        }
    }
    report.pass = report.min_ratio >= 1.0 - tolerance && report.max_ratio <= 2.0 + tolerance;
    Ok(report)
}

/// `(1/|E|)∫_E |f_1⋯f_n| / ∏‖f_i‖_{A_i,E}`, with 0/0 reported as 0.
///
/// The Young functions must satisfy `∏ A_i⁻¹(t) ≤ 2t` on `[1, 10⁶]`.
pub fn generalized_holder_check(
    fs: &[SampledFunction],
    young: &[YoungFunction],
    e: &IntervalSpec,
) -> Result<f64> {
    if fs.len() != young.len() {
        return Err(Error::LengthMismatch(fs.len(), young.len()));
    }
    if fs.len() < 2 {
        return Err(Error::OutOfRange {
            name: "number of functions",
            value: fs.len() as f64,
            expected: ">= 2",
        });
    }
    for t in log_grid(1.0, 1e6, 121) {
        let product: f64 = young.iter().map(|a| a.inverse(t)).product();
        if product > 2.0 * t * (1.0 + 1e-6) {
            return Err(Error::Unsupported(format!(
                "Young functions violate the inverse product bound at t = {t}"
            )));
        }
    }
    let mut product = fs[0].abs();
    for f in &fs[1..] {
        product = product.mul(f)?;
    }
    let lhs = orlicz_average(&product, *e, &YoungFunction::power(1.0)?)?;
    let mut rhs = 1.0;
    for (f, a) in fs.iter().zip(young) {
        rhs *= orlicz_average(f, *e, a)?;
    }
    Ok(if lhs == 0.0 { 0.0 } else { lhs / rhs })
}
