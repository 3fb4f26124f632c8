//! Weights, weighted norms and the one-sided weight conditions.
//!
//! Every quantity involving `M^+χ_{(a,c)}` uses its closed form
//! `(c−a)/(c−x)` left of `a`, integrated exactly over each cell, so the only
//! approximation is the truncation of `∫_ℝ` to the grid. The part of the line
//! left of the grid is estimated from the weight's analytic description and
//! reported.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::grid::{level_runs, sample_function, CellSet, FunctionSpec, Grid, IntervalSpec, SampledFunction};
use crate::maximal::indicator_maximal_closed_form;
use crate::verify::{RatioRecord, VerificationReport};

/// Relative size of the off-grid tail above which a record is flagged.
pub const TAIL_FLAG_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum WeightSpec {
    /// `const:c`
    Constant(f64),
    /// `power:gamma`, cell averages of `|x|^γ`.
    Power(f64),
    /// `csv:path`
    Csv(String),
}

impl FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad weight spec {s:?}"));
        let (tag, rest) = s.split_once(':').ok_or_else(bad)?;
        match tag {
            "const" => Ok(WeightSpec::Constant(rest.trim().parse().map_err(|_| bad())?)),
            "power" => Ok(WeightSpec::Power(rest.trim().parse().map_err(|_| bad())?)),
            "csv" if !rest.is_empty() => Ok(WeightSpec::Csv(rest.to_string())),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSpec::Constant(c) => write!(f, "const:{c}"),
            WeightSpec::Power(g) => write!(f, "power:{g}"),
            WeightSpec::Csv(p) => write!(f, "csv:{p}"),
        }
    }
}

impl TryFrom<String> for WeightSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<WeightSpec> for String {
    fn from(w: WeightSpec) -> String {
        w.to_string()
    }
}

/// How the weight continues left of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Extension {
    Constant(f64),
    Power(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub w: SampledFunction,
    pub extension: Extension,
}

impl Weight {
    /// A weight from its cell values; left of the grid it continues with the
    /// leftmost value.
    pub fn new(w: SampledFunction) -> Result<Self> {
        if let Some(v) = w.values.iter().find(|&&v| v < 0.0) {
            return Err(Error::OutOfRange {
                name: "weight",
                value: *v,
                expected: ">= 0",
            });
        }
        if w.values.iter().all(|&v| v == 0.0) {
            return Err(Error::OutOfRange {
                name: "weight",
                value: 0.0,
                expected: "not identically 0",
            });
        }
        let extension = Extension::Constant(w.values[0]);
        Ok(Self { w, extension })
    }

    pub fn from_spec(spec: &WeightSpec, grid: &Grid) -> Result<Self> {
        match spec {
            WeightSpec::Constant(c) => {
                check_range("weight", *c, *c > 0.0, "> 0")?;
                Weight::new(SampledFunction::constant(*grid, *c))
            }
            WeightSpec::Power(gamma) => {
                let w = sample_function(&FunctionSpec::Power { gamma: *gamma }, grid)?;
                Ok(Self {
                    extension: Extension::Power(*gamma),
                    ..Weight::new(w)?
                })
            }
            WeightSpec::Csv(path) => Weight::new(sample_function(&FunctionSpec::Csv(path.clone()), grid)?),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.w.grid
    }

    /// `w(E)`.
    pub fn measure_of(&self, e: &CellSet) -> f64 {
        e.indices().map(|i| self.w.values[i]).sum::<f64>() * self.w.grid.spacing
    }

    /// `∫_{−∞}^{origin} ((c−a)/(c−x))^p w(x) dx` from the analytic extension.
    fn left_tail(&self, p: f64, a: f64, c: f64) -> f64 {
        let o = self.w.grid.origin;
        let d = c - o;
        match self.extension {
            Extension::Constant(v) => v * (c - a).powf(p) * d.powf(1.0 - p) / (p - 1.0),
            Extension::Power(gamma) => {
                if p - gamma <= 1.0 {
                    return f64::INFINITY;
                }
                // t = c − x over (d, ∞), trapezoid in ln t
                let (lo, span, steps) = (d.ln(), 80.0, 8000);
                let h = span / steps as f64;
                let integrand = |u: f64| {
                    let t = u.exp();
                    t * t.powf(-p) * (c - t).abs().powf(gamma)
                };
                let inner: f64 = (1..steps).map(|k| integrand(lo + h * k as f64)).sum();
                let ends = 0.5 * (integrand(lo) + integrand(lo + span));
                (c - a).powf(p) * h * (inner + ends)
            }
        }
    }
}

/// `(Σ |f_i|^p w_i Δ)^{1/p}`.
pub fn weighted_lp_norm(f: &SampledFunction, w: &Weight, p: f64) -> Result<f64> {
    check_range("p", p, p > 0.0, "> 0")?;
    if !f.grid.same_as(&w.w.grid) {
        return Err(Error::GridMismatch);
    }
    let sum: f64 = f
        .values
        .iter()
        .zip(&w.w.values)
        .map(|(v, wv)| v.abs().powf(p) * wv)
        .sum();
    Ok((sum * f.grid.spacing).powf(1.0 / p))
}

/// `∫_{x0}^{x1} (M^+χ_{(a,c)})^p` for a cell `[x0, x1)` on either side of `a`.
pub(crate) fn cell_integral(p: f64, a: f64, c: f64, x0: f64, x1: f64) -> f64 {
    if x0 >= c {
        0.0
    } else if x0 >= a {
        x1.min(c) - x0
    } else if (p - 1.0).abs() < 1e-15 {
        (c - a) * ((c - x0) / (c - x1)).ln()
    } else {
        (c - a).powf(p) * ((c - x1).powf(1.0 - p) - (c - x0).powf(1.0 - p)) / (p - 1.0)
    }
}

/// `∫ (M^+χ_{(a,c)})^p w` over the grid, and the estimated remainder left of
/// it.
pub fn maximal_indicator_integral(w: &Weight, p: f64, a: f64, c: f64) -> (f64, f64) {
    let g = w.grid();
    let on_grid = (0..g.count)
        .map(|i| w.w.values[i] * cell_integral(p, a, c, g.boundary(i), g.boundary(i + 1)))
        .sum();
    (on_grid, w.left_tail(p, a, c))
}

/// `a < b < c` on cell boundaries and `E ⊆ (a, b)` with `|E| > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleConfig {
    pub id: String,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub e: CellSet,
}

impl TripleConfig {
    pub fn new(id: impl Into<String>, a: f64, b: f64, c: f64, e: CellSet) -> Result<Self> {
        let g = e.grid;
        if !(a < b && b < c) {
            return Err(Error::InvalidInterval { a, c });
        }
        let (a, b, c) = (
            g.boundary(g.boundary_index(a)?),
            g.boundary(g.boundary_index(b)?),
            g.boundary(g.boundary_index(c)?),
        );
        if e.count() == 0 {
            return Err(Error::EmptySet);
        }
        if !e.within(a, b) {
            return Err(Error::OutOfRange {
                name: "E",
                value: e.measure(),
                expected: "a subset of (a, b)",
            });
        }
        Ok(Self {
            id: id.into(),
            a,
            b,
            c,
            e,
        })
    }

    /// `E = (a, e_end)`.
    pub fn left_interval(id: impl Into<String>, grid: &Grid, a: f64, e_end: f64, b: f64, c: f64) -> Result<Self> {
        let e = CellSet::from_interval(*grid, &IntervalSpec::new(a, e_end, grid)?)?;
        Self::new(id, a, b, c, e)
    }

    /// Whether `c − b < b − a`.
    pub fn is_restricted(&self) -> bool {
        self.c - self.b < self.b - self.a
    }

    fn record(&self, numerator: f64, denominator: f64, on_grid: f64, tail: f64) -> RatioRecord {
        let mut r = RatioRecord::new(self.id.clone(), numerator, denominator)
            .with_param("a", self.a)
            .with_param("b", self.b)
            .with_param("c", self.c)
            .with_param("E", self.e.measure())
            .with_param("tail", tail)
            .with_param("restricted", if self.is_restricted() { 1.0 } else { 0.0 });
        if !(tail <= TAIL_FLAG_FRACTION * on_grid) {
            r = r.flag("tail-truncation");
        }
        r
    }
}

/// `w(E) / [(|E|/(c−b))^ε ∫ (M^+χ_{(a,c)})^p w]`, the denominator integral
/// taken over the grid.
pub fn cp_plus_ratio(w: &Weight, p: f64, eps: f64, config: &TripleConfig) -> Result<RatioRecord> {
    check_range("p", p, p > 1.0, "> 1")?;
    check_range("eps", eps, eps > 0.0, "> 0")?;
    if !config.e.grid.same_as(w.grid()) {
        return Err(Error::GridMismatch);
    }
    let numerator = w.measure_of(&config.e);
    let (on_grid, tail) = maximal_indicator_integral(w, p, config.a, config.c);
    let factor = (config.e.measure() / (config.c - config.b)).powf(eps);
    Ok(config
        .record(numerator, factor * on_grid, on_grid, tail)
        .with_param("p", p)
        .with_param("eps", eps))
}

/// `w(E) / ([1 + log⁺((c−b)/|E|)]^{−p} ∫ (M^+χ_{(a,c)})^p w)`.
pub fn log_condition_ratio(w: &Weight, p: f64, config: &TripleConfig) -> Result<RatioRecord> {
    check_range("p", p, p > 1.0, "> 1")?;
    if !config.e.grid.same_as(w.grid()) {
        return Err(Error::GridMismatch);
    }
    let numerator = w.measure_of(&config.e);
    let (on_grid, tail) = maximal_indicator_integral(w, p, config.a, config.c);
    let log_plus = ((config.c - config.b) / config.e.measure()).ln().max(0.0);
    let factor = (1.0 + log_plus).powf(-p);
    Ok(config
        .record(numerator, factor * on_grid, on_grid, tail)
        .with_param("p", p))
}

/// Shape of the set `E` inside `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EShape {
    /// `(a, a + 2^{−m}(b−a))`
    Left,
    /// A random union of unit runs.
    Runs,
    /// First and last quarters, recursively, down to the unit.
    Cantor,
}

/// A configuration in continuous coordinates; `e` lists the intervals of `E`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigSpec {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub e: Vec<(f64, f64)>,
}

impl ConfigSpec {
    pub fn realize(&self, id: impl Into<String>, grid: &Grid) -> Result<TripleConfig> {
        let intervals = self
            .e
            .iter()
            .map(|&(l, r)| IntervalSpec::new(l, r, grid))
            .collect::<Result<Vec<_>>>()?;
        TripleConfig::new(id, self.a, self.b, self.c, CellSet::from_intervals(*grid, &intervals)?)
    }
}

/// Seeded family of triples on a dyadic lattice.
///
/// Every length is a multiple of `unit`, so the same configurations realize
/// exactly on any grid whose spacing divides `unit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanGenerator {
    pub seed: u64,
    #[serde(default)]
    pub count: usize,
    pub unit: f64,
    /// Scales `unit · 2^s`, `s ≤ max_level`, set the lattice of `a, b, c`.
    #[serde(default = "default_max_level")]
    pub max_level: u32,
    /// `(a, c)` stays inside this window.
    pub window: (f64, f64),
    #[serde(default = "default_shapes")]
    pub shapes: Vec<EShape>,
    /// Configurations used verbatim, ahead of the generated ones.
    #[serde(default)]
    pub explicit: Vec<ConfigSpec>,
}

fn default_max_level() -> u32 {
    3
}

fn default_shapes() -> Vec<EShape> {
    vec![EShape::Left, EShape::Runs, EShape::Cantor]
}

impl ScanGenerator {
    pub fn new(seed: u64, count: usize, unit: f64, window: (f64, f64)) -> Self {
        Self {
            seed,
            count,
            unit,
            max_level: default_max_level(),
            window,
            shapes: default_shapes(),
            explicit: Vec::new(),
        }
    }

    pub fn single(config: ConfigSpec) -> Self {
        Self {
            seed: 0,
            count: 0,
            unit: 1.0,
            max_level: 0,
            window: (config.a, config.c),
            shapes: Vec::new(),
            explicit: vec![config],
        }
    }

    pub fn configs(&self) -> Vec<ConfigSpec> {
        let mut out = self.explicit.clone();
        if self.count == 0 || self.shapes.is_empty() {
            return out;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let u = self.unit;
        let slots = ((self.window.1 - self.window.0) / u).floor() as i64;
        let mut attempts = 0;
        while out.len() < self.explicit.len() + self.count && attempts < 100 * self.count {
            attempts += 1;
            let level = rng.gen_range(0..=self.max_level);
            let step = 1i64 << level;
            let left = step * rng.gen_range(1..=4);
            let right = step * rng.gen_range(1..=4);
            if left + right > slots {
                continue;
            }
            let start = rng.gen_range(0..=slots - left - right);
            let a = self.window.0 + start as f64 * u;
            let b = a + left as f64 * u;
            let c = b + right as f64 * u;
            let shape = self.shapes[rng.gen_range(0..self.shapes.len())];
            let e = match shape {
                EShape::Left => {
                    let max_m = (left as f64).log2().floor() as u32;
                    let m = rng.gen_range(0..=max_m);
                    vec![(a, a + (left >> m) as f64 * u)]
                }
                EShape::Runs => {
                    let picks: Vec<i64> = (0..left).filter(|_| rng.gen_bool(0.5)).collect();
                    let picks = if picks.is_empty() { vec![rng.gen_range(0..left)] } else { picks };
                    merge_units(&picks, a, u)
                }
                EShape::Cantor => {
                    let mut pieces = vec![(0i64, left)];
                    while pieces[0].1 - pieces[0].0 >= 4 {
                        pieces = pieces
                            .iter()
                            .flat_map(|&(l, r)| {
                                let q = (r - l) / 4;
                                [(l, l + q), (r - q, r)]
                            })
                            .collect();
                    }
                    pieces
                        .iter()
                        .map(|&(l, r)| (a + l as f64 * u, a + r as f64 * u))
                        .collect()
                }
            };
            out.push(ConfigSpec { a, b, c, e });
        }
        out
    }
}

fn merge_units(picks: &[i64], a: f64, u: f64) -> Vec<(f64, f64)> {
    let mut out: Vec<(i64, i64)> = Vec::new();
    for &k in picks {
        match out.last_mut() {
            Some(last) if last.1 == k => last.1 = k + 1,
            _ => out.push((k, k + 1)),
        }
    }
    out.iter()
        .map(|&(l, r)| (a + l as f64 * u, a + r as f64 * u))
        .collect()
}

/// `cp_plus_ratio` over every generated configuration. The report carries
/// the overall supremum and, in `extras`, the supremum over configurations
/// with `c − b < b − a`.
pub fn cp_plus_scan(w: &Weight, p: f64, eps: f64, generator: &ScanGenerator) -> Result<VerificationReport> {
    let start = std::time::Instant::now();
    let grid = *w.grid();
    let configs = generator
        .configs()
        .iter()
        .enumerate()
        .map(|(k, spec)| spec.realize(format!("config-{k:04}"), &grid))
        .collect::<Result<Vec<_>>>()?;
    let records = configs
        .par_iter()
        .map(|cfg| cp_plus_ratio(w, p, eps, cfg))
        .collect::<Result<Vec<_>>>()?;
    let restricted = records
        .iter()
        .zip(&configs)
        .filter(|(_, c)| c.is_restricted())
        .fold(0.0f64, |m, (r, _)| m.max(r.ratio));
    let mut report = VerificationReport::from_records("cp_plus_scan", records)
        .extra("sup_restricted", restricted)
        .extra("p", p)
        .extra("eps", eps);
    report.seed = Some(generator.seed);
    report.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

/// Output of [`m_pq_plus`]. `tail` holds the part of the sum over levels
/// below `k_min`, so `(values^p + tail)^{1/p}` is the untruncated operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpqOutput {
    pub values: SampledFunction,
    pub tail: Vec<f64>,
    pub k_min: i32,
    pub k_max: i32,
    pub p: f64,
}

impl MpqOutput {
    pub fn with_tail(&self) -> SampledFunction {
        let p = self.p;
        let mut out = self.values.clone();
        for (v, t) in out.values.iter_mut().zip(&self.tail) {
            *v = (v.powf(p) + t).powf(1.0 / p);
        }
        out
    }
}

/// `Σ_I (M^+χ_I)^q` over the components `I` of `{f > t}`.
fn level_sum(f: &SampledFunction, t: f64, q: f64) -> Vec<f64> {
    let g = &f.grid;
    let mut acc = vec![0.0; f.len()];
    for run in level_runs(f, t) {
        let (a, c) = (g.boundary(run.start), g.boundary(run.end));
        for (i, slot) in acc.iter_mut().enumerate().take(run.end) {
            *slot += indicator_maximal_closed_form(a, c, g.boundary(i)).powf(q);
        }
    }
    acc
}

/// `(Σ_{k ≥ k_min} Σ_i 2^{pk} (M^+χ_{I_i^k})^q)^{1/p}` with `I_i^k` the
/// components of `{f > 2^k}`. Below `⌊log₂ min f⌋` every level set is
/// `{f > 0}`, so the remainder is geometric and `tail` is exact. The default
/// `k_min` is one below that.
pub fn m_pq_plus(f: &SampledFunction, p: f64, q: f64, k_min: Option<i32>) -> Result<MpqOutput> {
    check_range("p", p, p > 1.0, "> 1")?;
    check_range("q", q, q > p, "> p")
        .or_else(|e| if q == p { Ok(()) } else { Err(e) })?;
    if let Some(v) = f.values.iter().find(|&&v| v < 0.0) {
        return Err(Error::OutOfRange {
            name: "f",
            value: *v,
            expected: ">= 0",
        });
    }
    if f.exterior != 0.0 {
        return Err(Error::Unsupported("M_{p,q} of a function that does not vanish at infinity".into()));
    }
    let n = f.len();
    let min_pos = f.values.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
    if !min_pos.is_finite() {
        let zeros = SampledFunction::zeros(f.grid);
        let k_min = k_min.unwrap_or(0);
        return Ok(MpqOutput {
            values: zeros,
            tail: vec![0.0; n],
            k_min,
            k_max: k_min,
            p,
        });
    }
    let k_floor = min_pos.log2().floor() as i32;
    let k_min = k_min.unwrap_or(k_floor - 1);
    let k_max = f.max_value().log2().ceil() as i32;
    let weighted = |k: i32| -> Vec<f64> {
        let scale = 2f64.powf(p * k as f64);
        level_sum(f, 2f64.powi(k), q).into_iter().map(|v| scale * v).collect()
    };
    let add = |acc: &mut Vec<f64>, v: Vec<f64>| acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
    let mut sum = vec![0.0; n];
    for k in k_min..=k_max {
        add(&mut sum, weighted(k));
    }
    let mut tail = vec![0.0; n];
    let geometric_from = k_min.min(k_floor);
    for k in geometric_from..k_min {
        add(&mut tail, weighted(k));
    }
    let base = level_sum(f, 0.0, q);
    let factor = 2f64.powf(p * geometric_from as f64) / (2f64.powf(p) - 1.0);
    add(&mut tail, base.into_iter().map(|v| factor * v).collect());
    Ok(MpqOutput {
        values: SampledFunction::new(f.grid, sum.into_iter().map(|v| v.powf(1.0 / p)).collect())
            .expect("finite values"),
        tail,
        k_min,
        k_max,
        p,
    })
}

/// `Δ(x) = Σ_k (M^+χ_{I_k})^p(x)` for pairwise disjoint intervals.
pub fn delta_sum(intervals: &[IntervalSpec], p: f64, grid: &Grid) -> Result<SampledFunction> {
    check_range("p", p, p > 0.0, "> 0")?;
    let mut sorted = intervals.to_vec();
    sorted.sort_by(|x, y| x.a.total_cmp(&y.a));
    if sorted.windows(2).any(|w| w[1].a < w[0].c) {
        return Err(Error::Overlap);
    }
    Ok(SampledFunction::from_cells(*grid, |i| {
        let x = grid.boundary(i);
        sorted
            .iter()
            .map(|iv| indicator_maximal_closed_form(iv.a, iv.c, x).powf(p))
            .sum()
    }))
}
