//! Empirical checks of pointwise and weighted inequalities.

use std::collections::BTreeMap;
use std::ops::Range;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::grid::{
    geometric_partition, level_runs, sample_function, CellSet, FunctionSpec, Grid, IntervalSpec, SampledFunction,
};
use crate::maximal::{
    bmo_plus_norm, indicator_maximal_closed_form, maximal_plus, one_sided_maximal, one_sided_maximal_fast,
    sharp_maximal, Direction, WindowPolicy,
};
use crate::operators::{apply, iterated_commutator, maximal_truncated, KernelSpec};
use crate::orlicz::{fractional_orlicz_maximal, log_grid, orlicz_maximal, YoungFunction};
use crate::squarefn::{oscillation_operator, square_function, DyadicRange};
use crate::weights::{cell_integral, m_pq_plus, maximal_indicator_integral, weighted_lp_norm, TripleConfig, Weight, WeightSpec};

/// One measured ratio `numerator / denominator`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRecord {
    pub id: String,
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub flags: Vec<String>,
}

impl RatioRecord {
    /// `0/0` is 0; `x/0` is infinite and flagged; `x/∞` is trivially
    /// satisfied and flagged.
    pub fn new(id: impl Into<String>, numerator: f64, denominator: f64) -> Self {
        let mut flags = Vec::new();
        let ratio = if numerator == 0.0 {
            0.0
        } else if denominator == 0.0 {
            flags.push("zero-denominator".to_string());
            f64::INFINITY
        } else if denominator.is_infinite() {
            flags.push("trivially-satisfied".to_string());
            0.0
        } else {
            numerator / denominator
        };
        Self {
            id: id.into(),
            numerator,
            denominator,
            ratio,
            params: BTreeMap::new(),
            flags,
        }
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn flag(mut self, flag: &str) -> Self {
        self.flags.push(flag.to_string());
        self
    }
}

/// Supremum at a coarse resolution and at double that resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub coarse: f64,
    pub fine: f64,
    pub relative_change: f64,
}

impl Trend {
    pub fn new(coarse: f64, fine: f64) -> Self {
        let relative_change = if coarse == fine {
            0.0
        } else {
            (fine - coarse).abs() / coarse.abs().max(fine.abs())
        };
        Self {
            coarse,
            fine,
            relative_change,
        }
    }

    /// The operational meaning of a constant that does not drift with the
    /// resolution: under 20% change when the cell count doubles.
    pub fn is_stable(&self) -> bool {
        self.coarse.is_finite() && self.fine.is_finite() && self.relative_change < 0.2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub suite: String,
    pub records: Vec<RatioRecord>,
    pub sup_ratio: f64,
    pub sup_location: Option<String>,
    pub trend: Option<Trend>,
    pub flags: Vec<String>,
    pub seed: Option<u64>,
    pub runtime_ms: f64,
    #[serde(default)]
    pub extras: BTreeMap<String, f64>,
}

impl VerificationReport {
    pub fn new(suite: impl Into<String>) -> Self {
        Self {
            suite: suite.into(),
            records: Vec::new(),
            sup_ratio: 0.0,
            sup_location: None,
            trend: None,
            flags: Vec::new(),
            seed: None,
            runtime_ms: 0.0,
            extras: BTreeMap::new(),
        }
    }

    /// Builds a report from records; the supremum ignores nothing, so an
    /// infinite record makes the supremum infinite.
    pub fn from_records(suite: impl Into<String>, records: Vec<RatioRecord>) -> Self {
        let mut report = Self::new(suite);
        for r in records {
            report.push(r);
        }
        report
    }

    pub fn push(&mut self, record: RatioRecord) {
        if record.ratio > self.sup_ratio || (self.sup_location.is_none() && record.ratio >= self.sup_ratio) {
            self.sup_ratio = record.ratio;
            self.sup_location = Some(record.id.clone());
        }
        for f in &record.flags {
            let tagged = format!("{}: {f}", record.id);
            self.flags.push(tagged);
        }
        self.records.push(record);
    }

    pub fn extra(mut self, name: &str, value: f64) -> Self {
        self.extras.insert(name.to_string(), value);
        self
    }

    pub fn flag_count(&self) -> usize {
        self.flags.len()
    }
}

/// Supremum at the grid and at its refinement by 2, with the trend between
/// them. The fine report is returned with `coarse_sup` in its extras.
pub fn with_refinement(
    grid: &Grid,
    run: impl Fn(&Grid) -> Result<VerificationReport>,
) -> Result<VerificationReport> {
    let coarse = run(grid)?;
    let mut fine = run(&grid.refined(2))?;
    fine.trend = Some(Trend::new(coarse.sup_ratio, fine.sup_ratio));
    fine.extras.insert("coarse_sup".to_string(), coarse.sup_ratio);
    for (k, v) in coarse.extras {
        fine.extras.insert(format!("coarse_{k}"), v);
    }
    Ok(fine)
}

/// Cap on `k` in `(M^+)^k`.
pub const MAX_ITERATED_MAXIMAL: u32 = 3;

/// Floor, relative to `max rhs`, below which pointwise ratios are not taken.
pub const DIVISION_FLOOR: f64 = 1e-12;

fn identity() -> Box<Expr> {
    Box::new(Expr::Identity)
}

fn one() -> f64 {
    1.0
}

fn one_u32() -> u32 {
    1
}

fn dyadic() -> WindowPolicy {
    WindowPolicy::DyadicLengths
}

fn forward() -> Direction {
    Direction::Forward
}

fn four() -> usize {
    4
}

/// An operator expression in the input function `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Expr {
    Identity,
    Abs {
        #[serde(default = "identity")]
        of: Box<Expr>,
    },
    /// `(M^±_δ)^times`.
    Maximal {
        #[serde(default = "identity")]
        of: Box<Expr>,
        #[serde(default = "forward")]
        direction: Direction,
        #[serde(default = "one")]
        delta: f64,
        #[serde(default)]
        policy: WindowPolicy,
        #[serde(default = "one_u32")]
        times: u32,
    },
    Sharp {
        #[serde(default = "identity")]
        of: Box<Expr>,
        #[serde(default = "one")]
        delta: f64,
        #[serde(default = "dyadic")]
        policy: WindowPolicy,
    },
    Orlicz {
        #[serde(default = "identity")]
        of: Box<Expr>,
        young: YoungFunction,
    },
    FractionalOrlicz {
        #[serde(default = "identity")]
        of: Box<Expr>,
        alpha: f64,
        young: YoungFunction,
    },
    Apply {
        #[serde(default = "identity")]
        of: Box<Expr>,
        kernel: KernelSpec,
    },
    /// `T_b^k`.
    Commutator {
        #[serde(default = "identity")]
        of: Box<Expr>,
        kernel: KernelSpec,
        b: FunctionSpec,
        k: u32,
    },
    MaximalTruncated {
        #[serde(default = "identity")]
        of: Box<Expr>,
        kernel: KernelSpec,
    },
    Square {
        #[serde(default = "identity")]
        of: Box<Expr>,
        #[serde(default)]
        range: Option<(i32, i32)>,
    },
    Oscillation {
        #[serde(default = "identity")]
        of: Box<Expr>,
        #[serde(default)]
        range: Option<(i32, i32)>,
        #[serde(default = "four")]
        samples: usize,
    },
    /// `Σ c_i e_i`.
    Sum { terms: Vec<(f64, Expr)> },
}

impl Expr {
    pub fn maximal(of: Expr) -> Self {
        Expr::Maximal {
            of: Box::new(of),
            direction: Direction::Forward,
            delta: 1.0,
            policy: WindowPolicy::AllLengths,
            times: 1,
        }
    }

    pub fn sharp(of: Expr, policy: WindowPolicy) -> Self {
        Expr::Sharp {
            of: Box::new(of),
            delta: 1.0,
            policy,
        }
    }

    pub fn apply(of: Expr, kernel: KernelSpec) -> Self {
        Expr::Apply {
            of: Box::new(of),
            kernel,
        }
    }

    pub fn eval(&self, f: &SampledFunction) -> Result<SampledFunction> {
        let grid = f.grid;
        let range = |r: &Option<(i32, i32)>| match r {
            Some((lo, hi)) => DyadicRange::new(*lo, *hi, &grid),
            None => Ok(DyadicRange::spanning(&grid)),
        };
        match self {
            Expr::Identity => Ok(f.clone()),
            Expr::Abs { of } => Ok(of.eval(f)?.abs()),
            Expr::Maximal {
                of,
                direction,
                delta,
                policy,
                times,
            } => {
                check_range(
                    "times",
                    *times as f64,
                    (1..=MAX_ITERATED_MAXIMAL).contains(times),
                    "in 1..=3",
                )?;
                let mut g = of.eval(f)?;
                for _ in 0..*times {
                    g = if *delta == 1.0 && *policy == WindowPolicy::AllLengths {
                        one_sided_maximal_fast(&g, *direction)
                    } else {
                        one_sided_maximal(&g, *direction, *delta, *policy)?
                    };
                }
                Ok(g)
            }
            Expr::Sharp { of, delta, policy } => sharp_maximal(&of.eval(f)?, *delta, *policy),
            Expr::Orlicz { of, young } => Ok(orlicz_maximal(&of.eval(f)?, young)),
            Expr::FractionalOrlicz { of, alpha, young } => fractional_orlicz_maximal(&of.eval(f)?, *alpha, young),
            Expr::Apply { of, kernel } => apply(&of.eval(f)?, kernel),
            Expr::Commutator { of, kernel, b, k } => {
                let b = sample_function(b, &grid)?;
                iterated_commutator(kernel, &b, *k, &of.eval(f)?)
            }
            Expr::MaximalTruncated { of, kernel } => maximal_truncated(&of.eval(f)?, kernel),
            Expr::Square { of, range: r } => square_function(&of.eval(f)?, range(r)?),
            Expr::Oscillation {
                of,
                range: r,
                samples,
            } => oscillation_operator(&of.eval(f)?, range(r)?, *samples),
            Expr::Sum { terms } => {
                let mut acc = SampledFunction::zeros(grid);
                for (c, e) in terms {
                    acc = acc.add(&e.eval(f)?.scale(*c))?;
                }
                Ok(acc)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimateMode {
    Pointwise,
    WeightedNorm { p: f64, weight: WeightSpec },
}

/// `lhs ≲ rhs`, either cell by cell or in `L^p(w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSpec {
    pub lhs: Expr,
    pub rhs: Expr,
    pub mode: EstimateMode,
}

impl EstimateSpec {
    pub fn pointwise(lhs: Expr, rhs: Expr) -> Self {
        Self {
            lhs,
            rhs,
            mode: EstimateMode::Pointwise,
        }
    }

    pub fn weighted(lhs: Expr, rhs: Expr, p: f64, weight: WeightSpec) -> Self {
        Self {
            lhs,
            rhs,
            mode: EstimateMode::WeightedNorm { p, weight },
        }
    }
}

/// Function specs realized on any grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Corpus {
    pub functions: Vec<FunctionSpec>,
}

impl Corpus {
    /// Indicators, dyadic combs, random steps, a monotone staircase, a spike
    /// and a signed step pair, all supported in `[0, 4]`. Pieces are multiples
    /// of `1/8`.
    pub fn standard(seed: u64) -> Self {
        let mut functions: Vec<FunctionSpec> = [
            "indicator:0:1",
            "indicator:1:3.5",
            "comb:0:4:4",
            "comb:0:2:8",
            "staircase:0:4:8",
            "spike:2:0.25:4",
            "steps:0,1,1;2,3,-1",
        ]
        .iter()
        .map(|s| s.parse().expect("valid spec"))
        .collect();
        for k in 0..4 {
            functions.push(FunctionSpec::Random {
                seed: seed.wrapping_add(k),
                lo: 0.0,
                hi: 1.0,
                piece: 0.125 * (1 << k) as f64,
                support: Some((0.0, 4.0)),
            });
        }
        Self { functions }
    }

    pub fn nonnegative(seed: u64) -> Self {
        let mut c = Self::standard(seed);
        c.functions.retain(|f| !matches!(f, FunctionSpec::Steps(_)));
        c
    }

    pub fn realize(&self, grid: &Grid) -> Result<Vec<(String, SampledFunction)>> {
        if self.functions.is_empty() {
            return Err(Error::EmptySet);
        }
        self.functions
            .iter()
            .map(|s| Ok((s.to_string(), sample_function(s, grid)?)))
            .collect()
    }
}

/// `[−8, 8)` with `n` cells, the extent used by the standard suites.
pub fn suite_grid(n: usize) -> Grid {
    Grid::new(-8.0, 16.0 / n as f64, n).expect("n >= 1")
}

/// Per-function supremum of `lhs/rhs` over cells where `rhs` exceeds the
/// floor. Cells with `lhs` above the floor and `rhs` below it are counted in
/// the record's `below_floor` parameter and flagged.
pub fn pointwise_domination_report(
    spec: &EstimateSpec,
    corpus: &[(String, SampledFunction)],
) -> Result<VerificationReport> {
    if corpus.is_empty() {
        return Err(Error::EmptySet);
    }
    let start = Instant::now();
    let records = corpus
        .par_iter()
        .map(|(id, f)| {
            let lhs = spec.lhs.eval(f)?;
            let rhs = spec.rhs.eval(f)?;
            let floor = DIVISION_FLOOR * rhs.max_abs();
            let (mut best, mut at) = ((0.0, 1.0), None);
            let mut below = 0usize;
            for i in 0..f.len() {
                let (l, r) = (lhs.values[i].abs(), rhs.values[i]);
                if r > floor {
                    if l / r > best.0 / best.1 {
                        best = (l, r);
                        at = Some(i);
                    }
                } else if l > floor {
                    below += 1;
                }
            }
            let mut rec = RatioRecord::new(id.clone(), best.0, best.1).with_param("below_floor", below as f64);
            if let Some(i) = at {
                rec = rec.with_param("x", f.grid.boundary(i));
            }
            if below > 0 {
                rec = rec.flag("rhs-below-floor");
            }
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = VerificationReport::from_records("pointwise", records);
    report.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

/// Per-function `‖lhs‖_{L^p(w)} / ‖rhs‖_{L^p(w)}`.
pub fn norm_ratio_report(
    spec: &EstimateSpec,
    corpus: &[(String, SampledFunction)],
    w: &Weight,
    p: f64,
) -> Result<VerificationReport> {
    if corpus.is_empty() {
        return Err(Error::EmptySet);
    }
    let start = Instant::now();
    let records = corpus
        .par_iter()
        .map(|(id, f)| {
            let lhs = weighted_lp_norm(&spec.lhs.eval(f)?, w, p)?;
            let rhs = weighted_lp_norm(&spec.rhs.eval(f)?, w, p)?;
            Ok(RatioRecord::new(id.clone(), lhs, rhs).with_param("p", p))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = VerificationReport::from_records("norm_ratio", records);
    report.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

/// Either mode of an estimate, with the weight realized on the corpus grid.
pub fn estimate_report(spec: &EstimateSpec, corpus: &[(String, SampledFunction)]) -> Result<VerificationReport> {
    match &spec.mode {
        EstimateMode::Pointwise => pointwise_domination_report(spec, corpus),
        EstimateMode::WeightedNorm { p, weight } => {
            let grid = corpus.first().ok_or(Error::EmptySet)?.1.grid;
            norm_ratio_report(spec, corpus, &Weight::from_spec(weight, &grid)?, *p)
        }
    }
}

/// Per-function largest relative difference between the fast and the naive
/// `M^+`.
pub fn maximal_equivalence_report(corpus: &[(String, SampledFunction)]) -> Result<VerificationReport> {
    if corpus.is_empty() {
        return Err(Error::EmptySet);
    }
    let start = Instant::now();
    let records = corpus
        .par_iter()
        .map(|(id, f)| {
            let fast = one_sided_maximal_fast(f, Direction::Forward);
            let naive = one_sided_maximal(f, Direction::Forward, 1.0, WindowPolicy::AllLengths)?;
            let (mut diff, mut scale) = (0.0, 1.0);
            for (a, b) in fast.values.iter().zip(&naive.values) {
                let d = (a - b).abs();
                if d * scale > diff * b.abs().max(a.abs()) {
                    (diff, scale) = (d, a.abs().max(b.abs()));
                }
            }
            Ok(RatioRecord::new(id.clone(), diff, scale))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = VerificationReport::from_records("maximal_equivalence", records);
    report.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

/// Weighted side of the good-λ step: `w(E_i) ≤ Cγ^ε ∫(M^+χ_{I_i ∪ I_{i+1}})^q w`.
#[derive(Debug, Clone, Copy)]
pub struct GoodLambdaWeight<'a> {
    pub w: &'a Weight,
    pub q: f64,
    pub eps: f64,
}

/// Cells of `E = {M^+f > 2^{k+1}, M^{♯,+}f ≤ γ2^k}`.
pub fn good_lambda_set(mf: &SampledFunction, sharp: &SampledFunction, gamma: f64, k: i32) -> CellSet {
    let hi = 2f64.powi(k + 1);
    let lo = gamma * 2f64.powi(k);
    let membership = (0..mf.len())
        .map(|i| mf.values[i] > hi && sharp.values[i] <= lo)
        .collect();
    CellSet::new(mf.grid, membership).expect("one flag per cell")
}

/// Splits each component of `Ω_k = {M^+f > 2^{k+1}}` by the geometric
/// partition towards its right end and records `|E_i| / (γ|I_{i+1}|)`. The
/// supremum of `|E_i| / |I_{i+1}|` goes to `extras["sup_measure_ratio"]`.
/// The sharp maximal function is taken over all window lengths.
pub fn good_lambda_report(
    f: &SampledFunction,
    gamma: f64,
    k: i32,
    weighted: Option<GoodLambdaWeight<'_>>,
) -> Result<VerificationReport> {
    check_range("gamma", gamma, gamma > 0.0 && gamma < 1.0, "in (0, 1)")?;
    let start = Instant::now();
    let mf = maximal_plus(f);
    let sharp = sharp_maximal(f, 1.0, WindowPolicy::AllLengths)?;
    let (records, sup_measure) = good_lambda_records(f, &mf, &sharp, gamma, k, weighted)?;
    let mut report = VerificationReport::from_records("good_lambda", records)
        .extra("sup_measure_ratio", sup_measure)
        .extra("gamma", gamma)
        .extra("k", k as f64);
    report.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

/// The body of [`good_lambda_report`] for precomputed `M^+f` and `M^{♯,+}f`.
pub fn good_lambda_records(
    f: &SampledFunction,
    mf: &SampledFunction,
    sharp: &SampledFunction,
    gamma: f64,
    k: i32,
    weighted: Option<GoodLambdaWeight<'_>>,
) -> Result<(Vec<RatioRecord>, f64)> {
    let g = f.grid;
    let e = good_lambda_set(mf, sharp, gamma, k);
    let mut records = Vec::new();
    let mut sup_measure: f64 = 0.0;
    for (j, run) in level_runs(mf, 2f64.powi(k + 1)).into_iter().enumerate() {
        let (a, b) = (g.boundary(run.start), g.boundary(run.end));
        let mut points = geometric_partition(a, b, &g)?;
        points.push(b);
        let pieces: Vec<Range<usize>> = points
            .windows(2)
            .map(|p| IntervalSpec::new(p[0], p[1], &g)?.cells(&g))
            .collect::<Result<_>>()?;
        for i in 0..pieces.len().saturating_sub(1) {
            let (cur, next) = (&pieces[i], &pieces[i + 1]);
            let e_cells = cur.clone().filter(|&c| e.contains(c)).count();
            let e_measure = e_cells as f64 * g.spacing;
            let next_len = next.len() as f64 * g.spacing;
            sup_measure = sup_measure.max(e_measure / next_len);
            let id = format!("k{k}-j{j}-i{i}");
            records.push(
                RatioRecord::new(id.clone(), e_measure, gamma * next_len)
                    .with_param("gamma", gamma)
                    .with_param("a", g.boundary(cur.start)),
            );
            if let Some(GoodLambdaWeight { w, q, eps }) = weighted {
                let we: f64 = cur.clone().filter(|&c| e.contains(c)).map(|c| w.w.values[c]).sum::<f64>() * g.spacing;
                let (lo, hi) = (g.boundary(cur.start), g.boundary(next.end));
                let (on_grid, tail) = maximal_indicator_integral(w, q, lo, hi);
                records.push(
                    RatioRecord::new(format!("{id}-weighted"), we, gamma.powf(eps) * (on_grid + tail))
                        .with_param("gamma", gamma)
                        .with_param("q", q)
                        .with_param("eps", eps),
                );
            }
        }
    }
    Ok((records, sup_measure))
}

/// Parameters of the lemma checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "lemma", rename_all = "snake_case", deny_unknown_fields)]
pub enum LemmaParams {
    /// `∫_I Σ_j (M^+χ_{J_j})^q w ≤ c(δ) w(I) + δ ∫ (M^+χ_I)^q w` and
    /// `∫ Σ_j (M^+χ_{J_j})^q w ≲ ∫ (M^+χ_I)^q w`.
    Packing {
        q: f64,
        interval: (f64, f64),
        subintervals: Vec<(f64, f64)>,
        deltas: Vec<f64>,
    },
    /// `∫ (M_{p,q}^+(M^+f))^p w ≲ ∫ (M^+f)^p w` over a corpus.
    Mpq { p: f64, q: f64 },
    /// `∫ Δ w ≲ (1 + log(|I|/Σ|I_k|))^{1−p} ∫ (M^+χ_I)^p w` with `pieces`
    /// equal subintervals of total measure `2^{−m}|I|`, `m ∈ ms`.
    LogDecay {
        p: f64,
        interval: (f64, f64),
        pieces: usize,
        ms: Vec<u32>,
    },
}

fn integral_over(w: &Weight, q: f64, a: f64, c: f64, cells: Range<usize>) -> f64 {
    let g = w.grid();
    cells
        .map(|i| w.w.values[i] * cell_integral(q, a, c, g.boundary(i), g.boundary(i + 1)))
        .sum()
}

fn full_integral(w: &Weight, q: f64, a: f64, c: f64) -> f64 {
    let (on_grid, tail) = maximal_indicator_integral(w, q, a, c);
    on_grid + tail
}

fn disjoint_intervals(list: &[(f64, f64)], grid: &Grid) -> Result<Vec<IntervalSpec>> {
    let mut out = list
        .iter()
        .map(|&(a, c)| IntervalSpec::new(a, c, grid))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|x, y| x.a.total_cmp(&y.a));
    if out.windows(2).any(|p| p[1].a < p[0].c) {
        return Err(Error::Overlap);
    }
    Ok(out)
}

/// Runs one lemma check. `corpus` is used by [`LemmaParams::Mpq`] only.
pub fn lemma_check(
    params: &LemmaParams,
    w: &Weight,
    corpus: &[(String, SampledFunction)],
) -> Result<VerificationReport> {
    let start = Instant::now();
    let grid = *w.grid();
    let mut report = match params {
        LemmaParams::Packing {
            q,
            interval,
            subintervals,
            deltas,
        } => {
            check_range("q", *q, *q > 1.0, "> 1")?;
            let outer = IntervalSpec::new(interval.0, interval.1, &grid)?;
            let inner = disjoint_intervals(subintervals, &grid)?;
            if let Some(j) = inner.iter().find(|j| !outer.contains_interval(j)) {
                return Err(Error::OutOfRange {
                    name: "subinterval",
                    value: j.a,
                    expected: "inside the interval",
                });
            }
            let cells = outer.cells(&grid)?;
            let w_i: f64 = cells.clone().map(|i| w.w.values[i]).sum::<f64>() * grid.spacing;
            let local: f64 = inner
                .iter()
                .map(|j| integral_over(w, *q, j.a, j.c, cells.clone()))
                .sum();
            let whole = full_integral(w, *q, outer.a, outer.c);
            let total: f64 = inner.iter().map(|j| full_integral(w, *q, j.a, j.c)).sum();
            let mut records = Vec::new();
            for &delta in deltas {
                check_range("delta", delta, delta > 0.0, "> 0")?;
                records.push(
                    RatioRecord::new(format!("c(delta={delta})"), (local - delta * whole).max(0.0), w_i)
                        .with_param("delta", delta),
                );
            }
            records.push(RatioRecord::new("global", total, whole).with_param("q", *q));
            VerificationReport::from_records("lemma_packing", records)
        }
        LemmaParams::Mpq { p, q } => {
            check_range("p", *p, *p > 1.0, "> 1")?;
            check_range("q", *q, *q > *p, "> p")?;
            if corpus.is_empty() {
                return Err(Error::EmptySet);
            }
            let records = corpus
                .par_iter()
                .map(|(id, f)| {
                    if f.values.iter().any(|&v| v < 0.0) {
                        return Err(Error::OutOfRange {
                            name: "f",
                            value: f.values.iter().copied().fold(0.0, f64::min),
                            expected: ">= 0",
                        });
                    }
                    let mf = maximal_plus(f);
                    let mpq = m_pq_plus(&mf, *p, *q, None)?.with_tail();
                    let lhs = weighted_lp_norm(&mpq, w, *p)?.powf(*p);
                    let rhs = weighted_lp_norm(&mf, w, *p)?.powf(*p);
                    Ok(RatioRecord::new(id.clone(), lhs, rhs).with_param("p", *p).with_param("q", *q))
                })
                .collect::<Result<Vec<_>>>()?;
            VerificationReport::from_records("lemma_mpq", records)
        }
        LemmaParams::LogDecay {
            p,
            interval,
            pieces,
            ms,
        } => {
            check_range("p", *p, *p > 1.0, "> 1")?;
            let outer = IntervalSpec::new(interval.0, interval.1, &grid)?;
            let whole = full_integral(w, *p, outer.a, outer.c);
            let mut records = Vec::new();
            if *pieces == 0 {
                records.push(RatioRecord::new("empty", 0.0, whole));
            }
            for &m in ms.iter().filter(|_| *pieces > 0) {
                let block = outer.len() / *pieces as f64;
                let piece_len = block / 2f64.powi(m as i32);
                let family = (0..*pieces)
                    .map(|k| {
                        let a = outer.a + k as f64 * block;
                        IntervalSpec::new(a, a + piece_len, &grid)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let lhs: f64 = family.iter().map(|iv| full_integral(w, *p, iv.a, iv.c)).sum();
                let covered: f64 = family.iter().map(IntervalSpec::len).sum();
                let bracket = (1.0 + (outer.len() / covered).ln()).powf(1.0 - *p);
                records.push(
                    RatioRecord::new(format!("m={m}"), lhs, bracket * whole)
                        .with_param("m", m as f64)
                        .with_param("fraction", covered / outer.len()),
                );
            }
            VerificationReport::from_records("lemma_log_decay", records)
        }
    };
    report.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

/// Output of [`necessity_construct_and_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessityCheck {
    /// `f = g + χ_{(a,c)}` with `g = log⁺(|(b,c)|/|E| · M^-χ_E)`.
    pub f: SampledFunction,
    pub g: SampledFunction,
    pub report: VerificationReport,
}

/// Builds the test function for a configuration and checks its properties.
///
/// `extras` carries `support_violations` (cells outside `(a, c)` with
/// `g ≠ 0`), `e_violations` (cells of `E` where `f` differs from
/// `log⁺(|(b,c)|/|E|) + 1`), `average` (the mean of `g` over `(a, c)`),
/// `bmo_plus` and `sharp_over_closed_form`. The records hold the per-cell
/// ratio of `M^{♯,+}f` to `M^+χ_{(a,c)}` left of `c`.
pub fn necessity_construct_and_check(config: &TripleConfig) -> Result<NecessityCheck> {
    let start = Instant::now();
    let grid = config.e.grid;
    let chi_e = config.e.indicator();
    let m_minus = one_sided_maximal(&chi_e, Direction::Backward, 1.0, WindowPolicy::AllLengths)?;
    let scale = (config.c - config.b) / config.e.measure();
    let g = m_minus.map(|m| (scale * m).ln().max(0.0)).with_exterior(0.0);
    let interval = IntervalSpec::new(config.a, config.c, &grid)?;
    let chi_i = CellSet::from_interval(grid, &interval)?.indicator();
    let f = g.add(&chi_i)?;
    let on_e = scale.ln().max(0.0) + 1.0;

    let cells = interval.cells(&grid)?;
    let support_violations = (0..grid.count)
        .filter(|i| !cells.contains(i) && g.values[*i] != 0.0)
        .count();
    let e_violations = config.e.indices().filter(|&i| f.values[i] != on_e).count();
    let average = g.values[cells.clone()].iter().sum::<f64>() * grid.spacing / interval.len();
    let bmo = bmo_plus_norm(&f);
    let sharp = sharp_maximal(&f, 1.0, WindowPolicy::AllLengths)?;
    let records: Vec<RatioRecord> = (0..grid.count)
        .map(|i| {
            let x = grid.boundary(i);
            RatioRecord::new(
                format!("cell-{i:05}"),
                sharp.values[i],
                indicator_maximal_closed_form(config.a, config.c, x),
            )
            .with_param("x", x)
        })
        .collect();
    let mut report = VerificationReport::from_records("necessity", records);
    let sup = report.sup_ratio;
    report = report
        .extra("support_violations", support_violations as f64)
        .extra("e_violations", e_violations as f64)
        .extra("average", average)
        .extra("bmo_plus", bmo)
        .extra("sharp_over_closed_form", sup)
        .extra("f_on_e", on_e);
    report.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(NecessityCheck { f, g, report })
}

/// `maximal_truncated(f, K) / (M^+_δ(T^+f) + M_A^+ f)` per function, plus
/// the weak-(1,1) quantity `λ |{|T^+f| > λ}| / ‖f‖_1` over a λ grid
/// (`extras["weak_11_sup"]`, per record in the `weak_11` parameter).
pub fn cotlar_report(
    kernel: &KernelSpec,
    young: &YoungFunction,
    delta: f64,
    corpus: &[(String, SampledFunction)],
) -> Result<VerificationReport> {
    check_range("delta", delta, delta > 0.0 && delta < 1.0, "in (0, 1)")?;
    let lhs = Expr::MaximalTruncated {
        of: identity(),
        kernel: kernel.clone(),
    };
    let rhs = Expr::Sum {
        terms: vec![
            (
                1.0,
                Expr::Maximal {
                    of: Box::new(Expr::apply(Expr::Identity, kernel.clone())),
                    direction: Direction::Forward,
                    delta,
                    policy: WindowPolicy::AllLengths,
                    times: 1,
                },
            ),
            (
                1.0,
                Expr::Orlicz {
                    of: identity(),
                    young: young.clone(),
                },
            ),
        ],
    };
    let mut report = pointwise_domination_report(&EstimateSpec::pointwise(lhs, rhs), corpus)?;
    report.suite = "cotlar".to_string();
    let weak: Vec<f64> = corpus
        .par_iter()
        .map(|(_, f)| weak_11(&apply(f, kernel)?, f))
        .collect::<Result<_>>()?;
    for (r, w) in report.records.iter_mut().zip(&weak) {
        r.params.insert("weak_11".to_string(), *w);
    }
    Ok(report.extra("weak_11_sup", weak.iter().copied().fold(0.0, f64::max)))
}

/// `sup_λ λ |{|Tf| > λ}| / ‖f‖_1` over 41 log-spaced `λ` up to `max |Tf|`.
pub fn weak_11(tf: &SampledFunction, f: &SampledFunction) -> Result<f64> {
    let norm: f64 = f.values.iter().map(|v| v.abs()).sum::<f64>() * f.grid.spacing;
    let top = tf.max_abs();
    if norm == 0.0 || top == 0.0 {
        return Ok(0.0);
    }
    Ok(log_grid(1e-4 * top, top, 41)
        .into_iter()
        .map(|lambda| {
            let count = tf.values.iter().filter(|v| v.abs() > lambda).count();
            lambda * count as f64 * f.grid.spacing / norm
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixed_grid() -> Grid {
        Grid::new(-4.0, 0.125, 96).unwrap()
    }

    fn corpus_on(grid: &Grid) -> Vec<(String, SampledFunction)> {
        Corpus::standard(3).realize(grid).unwrap()
    }

    fn dt() -> KernelSpec {
        "difftrans:1,-1,0.5:-2".parse().unwrap()
    }

    #[test]
    fn ratio_record_edge_cases() {
        assert_eq!(RatioRecord::new("a", 0.0, 0.0).ratio, 0.0);
        let r = RatioRecord::new("b", 1.0, 0.0);
        assert!(r.ratio.is_infinite() && r.flags == ["zero-denominator"]);
        let r = RatioRecord::new("c", 1.0, f64::INFINITY);
        assert!(r.ratio == 0.0 && r.flags == ["trivially-satisfied"]);
        let report = VerificationReport::from_records("s", vec![RatioRecord::new("x", 1.0, 2.0), r]);
        assert_eq!(report.sup_ratio, 0.5);
        assert_eq!(report.sup_location.as_deref(), Some("x"));
        assert_eq!(report.flags, ["c: trivially-satisfied"]);
    }

    #[test]
    fn maximal_equivalence_is_tight() {
        let g = fixed_grid();
        let r = maximal_equivalence_report(&corpus_on(&g)).unwrap();
        assert!(r.sup_ratio <= 1e-12);
        assert_eq!(r.records.len(), Corpus::standard(3).functions.len());
    }

    #[test]
    fn trend_stability() {
        assert!(Trend::new(1.0, 1.1).is_stable());
        assert!(!Trend::new(1.0, 1.5).is_stable());
        assert!(!Trend::new(1.0, f64::INFINITY).is_stable());
        assert_eq!(Trend::new(0.0, 0.0).relative_change, 0.0);
    }

    #[test]
    fn expressions_round_trip_and_evaluate() {
        let text = r#"{"op":"sum","terms":[[1.0,{"op":"maximal","of":{"op":"apply","kernel":"frac:0.5:forward"},"delta":0.5}],[2.0,{"op":"orlicz","young":"powerlog:1:1"}]]}"#;
        let e: Expr = serde_json::from_str(text).unwrap();
        assert_eq!(serde_json::from_str::<Expr>(&serde_json::to_string(&e).unwrap()).unwrap(), e);
        assert!(serde_json::from_str::<Expr>(r#"{"op":"maximal","bogus":1}"#).is_err());
        let g = fixed_grid();
        let f = sample_function(&"indicator:0:1".parse().unwrap(), &g).unwrap();
        let m = Expr::maximal(Expr::Identity).eval(&f).unwrap();
        assert_eq!(m, maximal_plus(&f));
        let twice = Expr::Maximal {
            of: identity(),
            direction: Direction::Forward,
            delta: 1.0,
            policy: WindowPolicy::AllLengths,
            times: 2,
        };
        assert_eq!(twice.eval(&f).unwrap(), maximal_plus(&maximal_plus(&f)));
        let four = Expr::Maximal {
            of: identity(),
            direction: Direction::Forward,
            delta: 1.0,
            policy: WindowPolicy::AllLengths,
            times: 4,
        };
        assert!(four.eval(&f).is_err());
        let diff = Expr::Sum {
            terms: vec![(1.0, Expr::Identity), (-1.0, Expr::Abs { of: identity() })],
        };
        assert!(diff.eval(&f).unwrap().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pointwise_examples() {
        let g = fixed_grid();
        // nondecreasing everywhere once the tail carries the top value
        let stairs = sample_function(&"staircase:0:2:4".parse().unwrap(), &g).unwrap();
        let stairs = SampledFunction::from_cells(g, |i| if g.boundary(i) >= 2.0 { 1.0 } else { stairs.values[i] })
            .with_exterior(1.0);
        let spec = EstimateSpec::pointwise(
            Expr::sharp(Expr::Identity, WindowPolicy::AllLengths),
            Expr::maximal(Expr::Identity),
        );
        let r = pointwise_domination_report(&spec, &[("stairs".into(), stairs)]).unwrap();
        assert_eq!(r.sup_ratio, 0.0);
        let r = pointwise_domination_report(&spec, &corpus_on(&g)).unwrap();
        assert!(r.sup_ratio <= 3.0);
        assert_eq!(r.flag_count(), 0);
        assert!(matches!(pointwise_domination_report(&spec, &[]), Err(Error::EmptySet)));
    }

    #[test]
    fn floor_flags_are_counted() {
        let g = fixed_grid();
        let f = sample_function(&"indicator:0:1".parse().unwrap(), &g).unwrap();
        // M^- is positive right of the support where M^+ vanishes
        let lhs = Expr::Maximal {
            of: identity(),
            direction: Direction::Backward,
            delta: 1.0,
            policy: WindowPolicy::AllLengths,
            times: 1,
        };
        let r = pointwise_domination_report(&EstimateSpec::pointwise(lhs, Expr::maximal(Expr::Identity)), &[("f".into(), f)]).unwrap();
        assert_eq!(r.records[0].params["below_floor"], 56.0);
        assert_eq!(r.flag_count(), 1);
    }

    #[test]
    fn differential_transform_domination_has_no_flags() {
        let g = fixed_grid();
        let spec = EstimateSpec::pointwise(
            Expr::sharp(Expr::apply(Expr::Identity, dt()), WindowPolicy::DyadicLengths),
            Expr::maximal(Expr::Identity),
        );
        let r = pointwise_domination_report(&spec, &Corpus::nonnegative(1).realize(&g).unwrap()).unwrap();
        assert!(r.sup_ratio.is_finite());
        assert_eq!(r.flag_count(), 0);
    }

    #[test]
    fn norm_ratio_examples() {
        let g = fixed_grid();
        let w = Weight::from_spec(&WeightSpec::Constant(1.0), &g).unwrap();
        let spec = EstimateSpec::weighted(Expr::maximal(Expr::Identity), Expr::sharp(Expr::Identity, WindowPolicy::AllLengths), 2.0, WeightSpec::Constant(1.0));
        let zero = vec![("zero".to_string(), SampledFunction::zeros(g))];
        assert_eq!(norm_ratio_report(&spec, &zero, &w, 2.0).unwrap().sup_ratio, 0.0);
        let r = estimate_report(&spec, &corpus_on(&g)).unwrap();
        assert!(r.sup_ratio.is_finite() && r.sup_ratio > 0.0);
        assert_eq!(r.records.len(), Corpus::standard(3).functions.len());
    }

    #[test]
    fn refinement_reports_trend() {
        let r = with_refinement(&fixed_grid(), |grid| {
            let spec = EstimateSpec::pointwise(
                Expr::sharp(Expr::Identity, WindowPolicy::AllLengths),
                Expr::maximal(Expr::Identity),
            );
            pointwise_domination_report(&spec, &corpus_on(grid))
        })
        .unwrap();
        let t = r.trend.unwrap();
        assert_eq!(t.fine, r.sup_ratio);
        assert_eq!(t.coarse, r.extras["coarse_sup"]);
    }

    #[test]
    fn good_lambda_constant_is_empty() {
        let g = fixed_grid();
        let f = SampledFunction::constant(g, 3.0);
        let r = good_lambda_report(&f, 0.5, 1, None).unwrap();
        assert!(r.records.is_empty());
        assert!(good_lambda_report(&f, 1.0, 1, None).is_err());
    }

    #[test]
    fn good_lambda_weighted_records() {
        let g = fixed_grid();
        let w = Weight::from_spec(&WeightSpec::Constant(1.0), &g).unwrap();
        let f = sample_function(&"staircase:0:2:4".parse().unwrap(), &g).unwrap();
        let weighted = GoodLambdaWeight { w: &w, q: 3.0, eps: 1.0 };
        let r = good_lambda_report(&f, 0.5, -3, Some(weighted)).unwrap();
        assert!(!r.records.is_empty());
        assert_eq!(r.records.iter().filter(|r| r.id.ends_with("-weighted")).count() * 2, r.records.len());
        assert!(r.sup_ratio.is_finite());
    }

    #[test]
    fn packing_single_subinterval() {
        let g = fixed_grid();
        let w = Weight::from_spec(&WeightSpec::Constant(1.0), &g).unwrap();
        let params = LemmaParams::Packing {
            q: 3.0,
            interval: (0.0, 1.0),
            subintervals: vec![(0.0, 1.0)],
            deltas: vec![0.5, 0.25],
        };
        let r = lemma_check(&params, &w, &[]).unwrap();
        let whole = full_integral(&w, 3.0, 0.0, 1.0);
        // the closed form: 1 + ∫_{−∞}^0 (1/(1−x))^3 dx = 1.5, less the cut-off tail
        assert!((whole - 1.5).abs() < 1e-12);
        assert!((r.records[0].ratio - (1.0 - 0.5 * whole).max(0.0)).abs() < 1e-12);
        assert!((r.records[1].ratio - (1.0 - 0.25 * whole)).abs() < 1e-12);
        assert!((r.records[2].ratio - 1.0).abs() < 1e-12);
        let overlap = LemmaParams::Packing {
            q: 3.0,
            interval: (0.0, 2.0),
            subintervals: vec![(0.0, 1.0), (0.5, 1.5)],
            deltas: vec![0.5],
        };
        assert!(lemma_check(&overlap, &w, &[]).is_err());
    }

    #[test]
    fn mpq_lemma_and_log_decay() {
        let g = fixed_grid();
        let w = Weight::from_spec(&WeightSpec::Constant(1.0), &g).unwrap();
        let f = vec![("chi".to_string(), sample_function(&"indicator:0:1".parse().unwrap(), &g).unwrap())];
        let r = lemma_check(&LemmaParams::Mpq { p: 2.0, q: 3.0 }, &w, &f).unwrap();
        assert!(r.sup_ratio.is_finite() && r.sup_ratio > 0.0);
        assert!(lemma_check(&LemmaParams::Mpq { p: 3.0, q: 3.0 }, &w, &f).is_err());
        let empty = LemmaParams::LogDecay {
            p: 2.0,
            interval: (0.0, 2.0),
            pieces: 0,
            ms: vec![0, 1],
        };
        assert_eq!(lemma_check(&empty, &w, &[]).unwrap().sup_ratio, 0.0);
        let sweep = LemmaParams::LogDecay {
            p: 2.0,
            interval: (0.0, 2.0),
            pieces: 2,
            ms: vec![0, 1, 2, 3],
        };
        let r = lemma_check(&sweep, &w, &[]).unwrap();
        assert_eq!(r.records.len(), 4);
        assert!((r.records[0].ratio - 1.0).abs() < 1e-12);
        assert!(r.sup_ratio.is_finite());
    }

    #[test]
    fn necessity_examples() {
        let g = Grid::new(-4.0, 0.0625, 160).unwrap();
        let full = TripleConfig::left_interval("full", &g, 0.0, 0.5, 0.5, 1.0).unwrap();
        let out = necessity_construct_and_check(&full).unwrap();
        assert!(full.e.indices().all(|i| out.f.values[i] == 1.0));
        let sparse = TripleConfig::left_interval("sparse", &g, 0.0, 0.125, 1.0, 1.5).unwrap();
        let out = necessity_construct_and_check(&sparse).unwrap();
        let expected = 4f64.ln() + 1.0;
        assert!((expected - 2.386_294_361_119_89).abs() < 1e-12);
        assert!(sparse.e.indices().all(|i| out.f.values[i] == expected));
        let c_index = g.boundary_index(1.5).unwrap();
        assert!(out.f.values[c_index..].iter().all(|&v| v == 0.0));
        assert_eq!(out.report.extras["support_violations"], 0.0);
        assert_eq!(out.report.extras["e_violations"], 0.0);
        assert!(out.report.extras["average"] > 0.0);
        assert!(out.report.sup_ratio.is_finite());
    }

    #[test]
    fn cotlar_examples() {
        let g = fixed_grid();
        let zero = vec![("zero".to_string(), SampledFunction::zeros(g))];
        let a = YoungFunction::power(1.0).unwrap();
        let r = cotlar_report(&dt(), &a, 0.5, &zero).unwrap();
        assert_eq!(r.sup_ratio, 0.0);
        assert_eq!(r.extras["weak_11_sup"], 0.0);
        let r = cotlar_report(&dt(), &a, 0.5, &Corpus::nonnegative(2).realize(&g).unwrap()).unwrap();
        assert!(r.sup_ratio.is_finite() && r.sup_ratio > 0.0);
        assert!(r.extras["weak_11_sup"].is_finite());
        assert!(cotlar_report(&dt(), &a, 1.0, &zero).is_err());
    }

    proptest! {
        #[test]
        fn good_lambda_sets_nest(v in proptest::collection::vec(0.0f64..4.0, 48), g1 in 0.01f64..0.99, g2 in 0.01f64..0.99, k in -2i32..2) {
            let grid = Grid::new(0.0, 0.125, 48).unwrap();
            let f = SampledFunction::new(grid, v).unwrap();
            let mf = maximal_plus(&f);
            let sharp = sharp_maximal(&f, 1.0, WindowPolicy::AllLengths).unwrap();
            let (lo, hi) = (g1.min(g2), g1.max(g2));
            let small = good_lambda_set(&mf, &sharp, lo, k);
            let large = good_lambda_set(&mf, &sharp, hi, k);
            prop_assert!(small.indices().all(|i| large.contains(i)));
        }

        #[test]
        fn reports_are_reproducible(seed in 0u64..1000) {
            let g = fixed_grid();
            let spec = EstimateSpec::pointwise(Expr::apply(Expr::Identity, dt()), Expr::maximal(Expr::Identity));
            let corpus = Corpus::standard(seed).realize(&g).unwrap();
            let a = pointwise_domination_report(&spec, &corpus).unwrap();
            let b = pointwise_domination_report(&spec, &corpus).unwrap();
            prop_assert_eq!(a.records, b.records);
        }
    }
}
