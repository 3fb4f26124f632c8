//! Uniform grids, piecewise-constant functions on them, and the
//! measure-theoretic helpers (exact integration, level-set components,
//! geometric partitions) everything else is built from.
//!
//! A [`SampledFunction`] is the piecewise-constant function whose value on
//! cell `i = [origin + iΔ, origin + (i+1)Δ)` is `values[i]`. Outside the grid
//! it is 0 (compact support), except for inputs built as constants, which keep
//! their value on the whole line.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};

/// Relative tolerance (in cells) used to decide that a coordinate sits on a
/// cell boundary.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: f64,
    pub spacing: f64,
    pub count: usize,
}

impl Grid {
    pub fn new(origin: f64, spacing: f64, count: usize) -> Result<Self> {
        if !origin.is_finite() || !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "origin {origin}, spacing {spacing}"
            )));
        }
        if count == 0 {
            return Err(Error::InvalidGrid("count must be positive".into()));
        }
        Ok(Self {
            origin,
            spacing,
            count,
        })
    }

    /// Grid covering `[start, end)` with `count` cells.
    pub fn spanning(start: f64, end: f64, count: usize) -> Result<Self> {
        if !(end > start) || count == 0 {
            return Err(Error::InvalidGrid(format!("[{start}, {end}) / {count}")));
        }
        Self::new(start, (end - start) / count as f64, count)
    }

    /// Same extent, `factor` times as many cells.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            origin: self.origin,
            spacing: self.spacing / factor as f64,
            count: self.count * factor,
        }
    }

    /// Left boundary of cell `i` (or the right end of the grid for `i == count`).
    pub fn boundary(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing
    }

    pub fn end(&self) -> f64 {
        self.boundary(self.count)
    }

    pub fn extent(&self) -> f64 {
        self.spacing * self.count as f64
    }

    /// Cell-boundary coordinates, `count + 1` of them.
    pub fn boundaries(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.count).map(move |i| self.boundary(i))
    }

    /// Left boundaries of the cells.
    pub fn lefts(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |i| self.boundary(i))
    }

    /// Position of `x` in units of cells from the origin (fractional).
    pub fn position(&self, x: f64) -> f64 {
        (x - self.origin) / self.spacing
    }

    /// Index `i` with `boundary(i) == x` up to [`BOUNDARY_TOL`] cells.
    pub fn boundary_index(&self, x: f64) -> Result<usize> {
        let pos = self.position(x);
        let r = pos.round();
        if (pos - r).abs() > BOUNDARY_TOL * r.abs().max(1.0) || r < 0.0 || r > self.count as f64 {
            return Err(Error::NotOnBoundary(x));
        }
        Ok(r as usize)
    }

    /// Nearest boundary index, clamped to the grid.
    pub fn nearest_boundary(&self, x: f64) -> usize {
        let r = self.position(x).round();
        r.clamp(0.0, self.count as f64) as usize
    }

    /// Number of whole cells in a length `len`, if it is one.
    pub fn cells_in(&self, len: f64) -> Option<usize> {
        let k = len / self.spacing;
        let r = k.round();
        if r >= 1.0 && (k - r).abs() <= BOUNDARY_TOL * r {
            Some(r as usize)
        } else {
            None
        }
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.count == other.count
            && (self.origin - other.origin).abs() <= BOUNDARY_TOL * self.spacing
            && (self.spacing - other.spacing).abs() <= BOUNDARY_TOL * self.spacing
    }
}

/// Piecewise-constant function on a [`Grid`].
///
/// Outside the grid the function takes the constant `exterior` value, which
/// is 0 for everything except explicitly constant inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
    #[serde(default)]
    pub exterior: f64,
}

impl SampledFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.count {
            return Err(Error::LengthMismatch(values.len(), grid.count));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::OutOfRange {
                name: "value",
                value: *v,
                expected: "finite",
            });
        }
        Ok(Self {
            grid,
            values,
            exterior: 0.0,
        })
    }

    pub fn with_exterior(mut self, exterior: f64) -> Self {
        self.exterior = exterior;
        self
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// `f ≡ c` on the whole line.
    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.count],
            exterior: c,
        }
    }

    /// Builds a function from per-cell values computed by `f(i)`.
    pub fn from_cells(grid: Grid, f: impl FnMut(usize) -> f64) -> Self {
        Self {
            grid,
            values: (0..grid.count).map(f).collect(),
            exterior: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            exterior: f(self.exterior),
        }
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn scale(&self, lambda: f64) -> Self {
        self.map(|v| lambda * v)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            exterior: f(self.exterior, other.exterior),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Mirror image `x ↦ f(-x)` expressed on the mirrored grid.
    pub fn reflect(&self) -> Self {
        let grid = Grid {
            origin: -self.grid.end(),
            ..self.grid
        };
        let mut values = self.values.clone();
        values.reverse();
        Self {
            grid,
            values,
            exterior: self.exterior,
        }
    }

    /// Shift by `m` whole cells to the right, zero-filling (content pushed past
    /// the edge is dropped).
    pub fn shift_cells(&self, m: isize) -> Self {
        let n = self.len() as isize;
        Self::from_cells(self.grid, |i| {
            let src = i as isize - m;
            if (0..n).contains(&src) {
                self.values[src as usize]
            } else {
                self.exterior
            }
        })
        .with_exterior(self.exterior)
    }

    /// Prefix sums of the cell values, `P[0] = 0`, `P[i+1] = P[i] + values[i]`.
    pub fn prefix_sums(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.len() + 1);
        let mut acc = 0.0;
        p.push(acc);
        for v in &self.values {
            acc += v;
            p.push(acc);
        }
        p
    }

    /// `∫_{origin}^{x} f` (negative for `x` left of the grid).
    fn antiderivative(&self, prefix: &[f64], x: f64) -> f64 {
        let g = &self.grid;
        let pos = g.position(x);
        if pos <= 0.0 {
            return self.exterior * pos * g.spacing;
        }
        if pos >= g.count as f64 {
            return (prefix[g.count] + self.exterior * (pos - g.count as f64)) * g.spacing;
        }
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        (prefix[i] + self.values[i] * frac) * g.spacing
    }

    /// Exact `∫_a^c f` for the piecewise-constant interpretation.
    pub fn integrate(&self, a: f64, c: f64) -> Result<f64> {
        if !(a <= c) {
            return Err(Error::InvalidInterval { a, c });
        }
        let prefix = self.prefix_sums();
        Ok(self.integrate_with(&prefix, a, c))
    }

    pub(crate) fn integrate_with(&self, prefix: &[f64], a: f64, c: f64) -> f64 {
        let g = &self.grid;
        if let (Ok(i), Ok(j)) = (g.boundary_index(a), g.boundary_index(c)) {
            return (prefix[j] - prefix[i]) * g.spacing;
        }
        self.antiderivative(prefix, c) - self.antiderivative(prefix, a)
    }

    /// Window statistics (sums, means, extremes) for windows that open at a
    /// cell's left boundary and extend to the right.
    pub fn windows(&self) -> Windows<'_> {
        Windows::new(self)
    }

    /// CSV with rows `x,value`, `x` the left boundary of each cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,value\n");
        for (x, v) in self.grid.lefts().zip(&self.values) {
            out.push_str(&format!("{x},{v}\n"));
        }
        out
    }

    pub fn read_csv(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_string(),
            message: e.to_string(),
        })?;
        Self::from_csv_str(&text)
    }

    /// Parses `x,value` rows (header optional). The `x` column must list the
    /// left boundaries of consecutive cells with constant spacing.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (Some(x), Some(v), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::Parse(format!("line {}: expected two columns", lineno + 1)));
            };
            match (x.parse::<f64>(), v.parse::<f64>()) {
                (Ok(x), Ok(v)) => {
                    xs.push(x);
                    vs.push(v);
                }
                _ if xs.is_empty() && lineno == 0 => continue, // header
                _ => {
                    return Err(Error::Parse(format!("line {}: not numeric", lineno + 1)));
                }
            }
        }
        if xs.len() < 2 {
            return Err(Error::Parse("need at least two rows".into()));
        }
        let spacing = xs[1] - xs[0];
        if !(spacing > 0.0) {
            return Err(Error::Parse("x must increase".into()));
        }
        for (k, x) in xs.iter().enumerate() {
            let expected = xs[0] + k as f64 * spacing;
            if (x - expected).abs() > 1e-9 * spacing {
                return Err(Error::Parse(format!(
                    "row {k}: x = {x} breaks constant spacing {spacing}"
                )));
            }
        }
        Self::new(Grid::new(xs[0], spacing, xs.len())?, vs)
    }
}

/// Sparse table answering range-min and range-max queries in O(1).
#[derive(Debug, Clone)]
struct MinMaxTable {
    mins: Vec<Vec<f64>>,
    maxs: Vec<Vec<f64>>,
}

impl MinMaxTable {
    fn new(values: &[f64]) -> Self {
        let mut mins = vec![values.to_vec()];
        let mut maxs = vec![values.to_vec()];
        let mut width = 1;
        while 2 * width <= values.len() {
            let (pm, px) = (&mins[mins.len() - 1], &maxs[maxs.len() - 1]);
            let count = values.len() + 1 - 2 * width;
            let m: Vec<f64> = (0..count).map(|i| pm[i].min(pm[i + width])).collect();
            let x: Vec<f64> = (0..count).map(|i| px[i].max(px[i + width])).collect();
            mins.push(m);
            maxs.push(x);
            width *= 2;
        }
        Self { mins, maxs }
    }

    /// Extremes over `lo..hi` (non-empty).
    fn query(&self, lo: usize, hi: usize) -> (f64, f64) {
        let level = (usize::BITS - 1 - (hi - lo).leading_zeros()) as usize;
        let w = 1 << level;
        (
            self.mins[level][lo].min(self.mins[level][hi - w]),
            self.maxs[level][lo].max(self.maxs[level][hi - w]),
        )
    }
}

/// Precomputed window statistics of a [`SampledFunction`].
///
/// Windows start at the left boundary of a cell and extend to the right;
/// beyond the grid they read the exterior value. Means are clamped into the
/// window's value range so constant windows average to their value exactly.
#[derive(Debug, Clone)]
pub struct Windows<'a> {
    f: &'a SampledFunction,
    prefix: Vec<f64>,
    table: MinMaxTable,
}

impl<'a> Windows<'a> {
    fn new(f: &'a SampledFunction) -> Self {
        Self {
            f,
            prefix: f.prefix_sums(),
            table: MinMaxTable::new(&f.values),
        }
    }

    pub fn prefix(&self) -> &[f64] {
        &self.prefix
    }

    /// Sum of the values of cells `i..i+k`.
    pub fn sum(&self, i: usize, k: usize) -> f64 {
        let n = self.f.len();
        let j = (i + k).min(n);
        let inside = if i < n { self.prefix[j] - self.prefix[i] } else { 0.0 };
        let outside = (i + k).saturating_sub(n.max(i));
        inside + self.f.exterior * outside as f64
    }

    /// Value range over cells `i..i+k` (k ≥ 1).
    pub fn range(&self, i: usize, k: usize) -> (f64, f64) {
        let n = self.f.len();
        let e = self.f.exterior;
        let (mut lo, mut hi) = if i < n {
            self.table.query(i, (i + k).min(n))
        } else {
            (e, e)
        };
        if i + k > n {
            lo = lo.min(e);
            hi = hi.max(e);
        }
        (lo, hi)
    }

    /// Mean over cells `i..i+k` (k ≥ 1).
    pub fn mean(&self, i: usize, k: usize) -> f64 {
        let (lo, hi) = self.range(i, k);
        (self.sum(i, k) / k as f64).clamp(lo, hi)
    }

    /// Exact mean over `(x_i, x_i + s)` for any `s > 0`; partial cells are
    /// weighted by overlap.
    pub fn mean_len(&self, i: usize, s: f64) -> f64 {
        let g = &self.f.grid;
        if s <= g.spacing {
            return if i < self.f.len() { self.f.values[i] } else { self.f.exterior };
        }
        if let Some(k) = g.cells_in(s) {
            return self.mean(i, k);
        }
        let x = g.boundary(i);
        let raw = (self.f.antiderivative(&self.prefix, x + s) - self.f.antiderivative(&self.prefix, x)) / s;
        let k = (s / g.spacing).ceil() as usize;
        let (lo, hi) = self.range(i, k);
        raw.clamp(lo, hi)
    }
}

/// Cell-resolution subset of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSet {
    pub grid: Grid,
    pub membership: Vec<bool>,
}

impl CellSet {
    pub fn new(grid: Grid, membership: Vec<bool>) -> Result<Self> {
        if membership.len() != grid.count {
            return Err(Error::LengthMismatch(membership.len(), grid.count));
        }
        Ok(Self { grid, membership })
    }

    pub fn empty(grid: Grid) -> Self {
        Self {
            grid,
            membership: vec![false; grid.count],
        }
    }

    pub fn from_interval(grid: Grid, interval: &IntervalSpec) -> Result<Self> {
        let cells = interval.cells(&grid)?;
        let mut set = Self::empty(grid);
        set.membership[cells].iter_mut().for_each(|m| *m = true);
        Ok(set)
    }

    pub fn from_intervals(grid: Grid, intervals: &[IntervalSpec]) -> Result<Self> {
        let mut set = Self::empty(grid);
        for iv in intervals {
            for m in &mut set.membership[iv.cells(&grid)?] {
                *m = true;
            }
        }
        Ok(set)
    }

    pub fn count(&self) -> usize {
        self.membership.iter().filter(|&&m| m).count()
    }

    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.grid.spacing
    }

    pub fn contains(&self, i: usize) -> bool {
        self.membership[i]
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.membership
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
    }

    /// Maximal runs of member cells.
    pub fn runs(&self) -> Vec<Range<usize>> {
        runs_where(&self.membership)
    }

    pub fn indicator(&self) -> SampledFunction {
        SampledFunction::from_cells(self.grid, |i| if self.membership[i] { 1.0 } else { 0.0 })
    }

    /// True when every member cell lies inside `[a, c)`.
    pub fn within(&self, a: f64, c: f64) -> bool {
        self.indices().all(|i| {
            self.grid.boundary(i) >= a - BOUNDARY_TOL * self.grid.spacing
                && self.grid.boundary(i + 1) <= c + BOUNDARY_TOL * self.grid.spacing
        })
    }
}

/// An interval `(a, c)` with both ends on cell boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalSpec {
    pub a: f64,
    pub c: f64,
}

impl IntervalSpec {
    /// Validated against `grid`; endpoints are snapped to the exact boundary
    /// coordinates.
    pub fn new(a: f64, c: f64, grid: &Grid) -> Result<Self> {
        if !(a < c) {
            return Err(Error::InvalidInterval { a, c });
        }
        let i = grid.boundary_index(a)?;
        let j = grid.boundary_index(c)?;
        Ok(Self::from_cells(grid, i..j))
    }

    pub fn from_cells(grid: &Grid, cells: Range<usize>) -> Self {
        Self {
            a: grid.boundary(cells.start),
            c: grid.boundary(cells.end),
        }
    }

    pub fn len(&self) -> f64 {
        self.c - self.a
    }

    pub fn cells(&self, grid: &Grid) -> Result<Range<usize>> {
        Ok(grid.boundary_index(self.a)?..grid.boundary_index(self.c)?)
    }

    pub fn contains_interval(&self, other: &IntervalSpec) -> bool {
        self.a <= other.a && other.c <= self.c
    }
}

fn runs_where(mask: &[bool]) -> Vec<Range<usize>> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &m) in mask.iter().enumerate() {
        match (m, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push(s..mask.len());
    }
    runs
}

/// Maximal runs of cells with `value > threshold`, as cell ranges.
pub fn level_runs(f: &SampledFunction, threshold: f64) -> Vec<Range<usize>> {
    let mask: Vec<bool> = f.values.iter().map(|&v| v > threshold).collect();
    runs_where(&mask)
}

/// Connected components of the strict super-level set `{f > threshold}`.
pub fn level_components(f: &SampledFunction, threshold: f64) -> Vec<IntervalSpec> {
    level_runs(f, threshold)
        .into_iter()
        .map(|r| IntervalSpec::from_cells(&f.grid, r))
        .collect()
}

/// Points `x_0 = a`, `x_{i+1} = (x_i + b)/2`, each snapped to the nearest
/// cell boundary, so that every piece is half of what remains up to `b`.
///
/// The recursion runs on the unsnapped values and stops once the next gap
/// would be under one cell. If snapping leaves more than one cell before `b`,
/// the boundary one cell short of `b` closes the sequence.
pub fn geometric_partition(a: f64, b: f64, grid: &Grid) -> Result<Vec<f64>> {
    if !(a < b) {
        return Err(Error::InvalidInterval { a, c: b });
    }
    let tol = BOUNDARY_TOL * grid.spacing;
    if a < grid.origin - tol || b > grid.end() + tol {
        return Err(Error::OutOfRange {
            name: "partition endpoint",
            value: if a < grid.origin { a } else { b },
            expected: "inside the grid",
        });
    }
    let mut points = vec![a];
    let mut u = a;
    loop {
        let next = 0.5 * (u + b);
        if next - u < grid.spacing {
            break;
        }
        u = next;
        let x = grid.boundary(grid.nearest_boundary(u));
        if x > points[points.len() - 1] + tol && x < b - tol {
            points.push(x);
        }
    }
    let last = points[points.len() - 1];
    if last + grid.spacing < b - tol {
        let closing = grid.boundary(grid.nearest_boundary(b) - 1);
        if closing > last + tol {
            points.push(closing);
        }
    }
    Ok(points)
}

/// A function described independently of any grid; [`sample_function`]
/// realizes it on one. Round-trips through its string grammar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FunctionSpec {
    /// `indicator:a:c`
    Indicator { a: f64, c: f64 },
    /// `const:c`
    Constant(f64),
    /// `power:gamma`, `|x|^γ` with cell values equal to exact cell averages.
    Power { gamma: f64 },
    /// `steps:a,c,v;a,c,v;...`, a sum of weighted indicators.
    Steps(Vec<(f64, f64, f64)>),
    /// `random:seed[:lo:hi[:piece[:a:c]]]`, independent uniform values on
    /// pieces of width `piece` covering `(a, c)` (default: the whole grid).
    Random {
        seed: u64,
        lo: f64,
        hi: f64,
        piece: f64,
        support: Option<(f64, f64)>,
    },
    /// `comb:a:c:teeth`, alternating 1/0 pieces, `2·teeth` of them.
    Comb { a: f64, c: f64, teeth: u32 },
    /// `staircase:a:c:steps`, nondecreasing steps `1/steps, 2/steps, …, 1`.
    Staircase { a: f64, c: f64, steps: u32 },
    /// `spike:x:width:height`
    Spike { x: f64, width: f64, height: f64 },
    /// `csv:path`
    Csv(String),
}

pub const DEFAULT_RANDOM_PIECE: f64 = 0.125;

impl FunctionSpec {
    /// The function as weighted indicators `(a, c, value)`, when it has that
    /// form on `grid`.
    fn pieces(&self, grid: &Grid) -> Result<Option<Vec<(f64, f64, f64)>>> {
        Ok(Some(match *self {
            FunctionSpec::Indicator { .. }
            | FunctionSpec::Power { .. }
            | FunctionSpec::Csv(_) => {
                return Ok(None)
            }
            FunctionSpec::Constant(_) => return Ok(None),
            FunctionSpec::Steps(ref steps) => steps.clone(),
            FunctionSpec::Random {
                seed,
                lo,
                hi,
                piece,
                support,
            } => {
                check_range("piece", piece, piece > 0.0, "> 0")?;
                check_range("hi", hi, hi >= lo, ">= lo")?;
                let (a, c) = support.unwrap_or((grid.origin, grid.end()));
                let count = ((c - a) / piece - 1e-9).ceil().max(1.0) as usize;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..count)
                    .map(|k| {
                        let v = if hi > lo { rng.gen_range(lo..hi) } else { lo };
                        let s = a + k as f64 * piece;
                        (s, (s + piece).min(c), v)
                    })
                    .collect()
            }
            FunctionSpec::Comb { a, c, teeth } => {
                let w = (c - a) / (2 * teeth.max(1)) as f64;
                (0..teeth.max(1))
                    .map(|t| {
                        let s = a + 2.0 * t as f64 * w;
                        (s, s + w, 1.0)
                    })
                    .collect()
            }
            FunctionSpec::Staircase { a, c, steps } => {
                let steps = steps.max(1);
                let w = (c - a) / steps as f64;
                (0..steps)
                    .map(|t| {
                        let s = a + t as f64 * w;
                        (s, s + w, (t + 1) as f64 / steps as f64)
                    })
                    .collect()
            }
            FunctionSpec::Spike { x, width, height } => vec![(x, x + width, height)],
        }))
    }
}

/// Cell averages of a sum of weighted indicators.
fn average_pieces(grid: &Grid, pieces: &[(f64, f64, f64)]) -> Vec<f64> {
    let mut values = vec![0.0; grid.count];
    for &(a, c, v) in pieces {
        if !(c > a) {
            continue;
        }
        let lo = grid.position(a).floor().max(0.0) as usize;
        let hi = (grid.position(c).ceil().max(0.0) as usize).min(grid.count);
        for (i, cell) in values.iter_mut().enumerate().take(hi).skip(lo) {
            let l = grid.boundary(i).max(a);
            let r = grid.boundary(i + 1).min(c);
            if r > l {
                // exact 1 for a fully covered cell
                let frac = if l == grid.boundary(i) && r == grid.boundary(i + 1) {
                    1.0
                } else {
                    (r - l) / grid.spacing
                };
                *cell += v * frac;
            }
        }
    }
    values
}

fn power_antiderivative(x: f64, gamma: f64) -> f64 {
    x.signum() * x.abs().powf(gamma + 1.0) / (gamma + 1.0)
}

/// Realizes `spec` on `grid`.
pub fn sample_function(spec: &FunctionSpec, grid: &Grid) -> Result<SampledFunction> {
    match spec {
        FunctionSpec::Indicator { a, c } => {
            let iv = IntervalSpec::new(*a, *c, grid)?;
            Ok(CellSet::from_interval(*grid, &iv)?.indicator())
        }
        FunctionSpec::Power { gamma } => {
            check_range("gamma", *gamma, *gamma > -1.0, "> -1")?;
            Ok(SampledFunction::from_cells(*grid, |i| {
                if *gamma == 0.0 {
                    return 1.0;
                }
                let (l, r) = (grid.boundary(i), grid.boundary(i + 1));
                (power_antiderivative(r, *gamma) - power_antiderivative(l, *gamma)) / (r - l)
            }))
        }
        FunctionSpec::Constant(c) => Ok(SampledFunction::constant(*grid, *c)),
        FunctionSpec::Csv(path) => {
            let src = SampledFunction::read_csv(path)?;
            if src.grid.same_as(grid) {
                return Ok(SampledFunction { grid: *grid, ..src });
            }
            let pieces: Vec<_> = src
                .values
                .iter()
                .enumerate()
                .map(|(i, &v)| (src.grid.boundary(i), src.grid.boundary(i + 1), v))
                .collect();
            SampledFunction::new(*grid, average_pieces(grid, &pieces))
        }
        other => {
            let pieces = other.pieces(grid)?.expect("piecewise spec");
            SampledFunction::new(*grid, average_pieces(grid, &pieces))
        }
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("{what}: cannot parse `{s}`")))
}

fn parse_u<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse::<T>()
        .map_err(|_| Error::Parse(format!("{what}: cannot parse `{s}`")))
}

impl FromStr for FunctionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let args: Vec<&str> = if rest.is_empty() {
            Vec::new()
        } else {
            rest.split(':').collect()
        };
        let need = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::Parse(format!(
                    "`{s}`: {kind} takes {n} argument(s), got {}",
                    args.len()
                )))
            }
        };
        match kind {
            "indicator" => {
                need(2)?;
                Ok(Self::Indicator {
                    a: parse_f64(args[0], "a")?,
                    c: parse_f64(args[1], "c")?,
                })
            }
            "const" => {
                need(1)?;
                Ok(Self::Constant(parse_f64(args[0], "c")?))
            }
            "power" => {
                need(1)?;
                Ok(Self::Power {
                    gamma: parse_f64(args[0], "gamma")?,
                })
            }
            "steps" => {
                let steps = rest
                    .split(';')
                    .filter(|t| !t.trim().is_empty())
                    .map(|t| {
                        let v: Vec<&str> = t.split(',').collect();
                        if v.len() != 3 {
                            return Err(Error::Parse(format!("step `{t}` needs a,c,value")));
                        }
                        Ok((
                            parse_f64(v[0], "a")?,
                            parse_f64(v[1], "c")?,
                            parse_f64(v[2], "value")?,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Self::Steps(steps))
            }
            "random" => {
                if !matches!(args.len(), 1 | 3 | 4 | 6) {
                    return Err(Error::Parse(format!(
                        "`{s}`: random takes seed[:lo:hi[:piece[:a:c]]]"
                    )));
                }
                let seed = parse_u(args[0], "seed")?;
                let (lo, hi) = if args.len() >= 3 {
                    (parse_f64(args[1], "lo")?, parse_f64(args[2], "hi")?)
                } else {
                    (0.0, 1.0)
                };
                let piece = if args.len() >= 4 {
                    parse_f64(args[3], "piece")?
                } else {
                    DEFAULT_RANDOM_PIECE
                };
                let support = if args.len() == 6 {
                    Some((parse_f64(args[4], "a")?, parse_f64(args[5], "c")?))
                } else {
                    None
                };
                Ok(Self::Random {
                    seed,
                    lo,
                    hi,
                    piece,
                    support,
                })
            }
            "comb" => {
                need(3)?;
                Ok(Self::Comb {
                    a: parse_f64(args[0], "a")?,
                    c: parse_f64(args[1], "c")?,
                    teeth: parse_u(args[2], "teeth")?,
                })
            }
            "staircase" => {
                need(3)?;
                Ok(Self::Staircase {
                    a: parse_f64(args[0], "a")?,
                    c: parse_f64(args[1], "c")?,
                    steps: parse_u(args[2], "steps")?,
                })
            }
            "spike" => {
                need(3)?;
                Ok(Self::Spike {
                    x: parse_f64(args[0], "x")?,
                    width: parse_f64(args[1], "width")?,
                    height: parse_f64(args[2], "height")?,
                })
            }
            "csv" => {
                if rest.is_empty() {
                    return Err(Error::Parse("csv needs a path".into()));
                }
                Ok(Self::Csv(rest.to_string()))
            }
            _ => Err(Error::Parse(format!("unknown function kind `{kind}`"))),
        }
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Indicator { a, c } => write!(f, "indicator:{a}:{c}"),
            Self::Constant(c) => write!(f, "const:{c}"),
            Self::Power { gamma } => write!(f, "power:{gamma}"),
            Self::Steps(steps) => {
                let parts: Vec<String> = steps.iter().map(|(a, c, v)| format!("{a},{c},{v}")).collect();
                write!(f, "steps:{}", parts.join(";"))
            }
            Self::Random {
                seed,
                lo,
                hi,
                piece,
                support,
            } => {
                write!(f, "random:{seed}:{lo}:{hi}:{piece}")?;
                if let Some((a, c)) = support {
                    write!(f, ":{a}:{c}")?;
                }
                Ok(())
            }
            Self::Comb { a, c, teeth } => write!(f, "comb:{a}:{c}:{teeth}"),
            Self::Staircase { a, c, steps } => write!(f, "staircase:{a}:{c}:{steps}"),
            Self::Spike { x, width, height } => write!(f, "spike:{x}:{width}:{height}"),
            Self::Csv(path) => write!(f, "csv:{path}"),
        }
    }
}

impl TryFrom<String> for FunctionSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FunctionSpec> for String {
    fn from(spec: FunctionSpec) -> String {
        spec.to_string()
    }
}
