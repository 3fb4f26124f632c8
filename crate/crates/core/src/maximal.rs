//! One-sided Hardy–Littlewood maximal operators, the one-sided sharp maximal
//! function and the one-sided BMO norm.
//!
//! `M^+` at cell `i` is evaluated at the cell's left boundary, `M^-` at its
//! right boundary. For piecewise-constant data the supremum over window
//! lengths is attained at windows ending on cell boundaries, so scanning
//! whole-cell windows gives the continuous value exactly.

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Result};
use crate::grid::SampledFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Windows `[x, x + h]`.
    Forward,
    /// Windows `[x - h, x]`.
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowPolicy {
    /// Every whole number of cells.
    #[default]
    AllLengths,
    /// Window lengths `1, 2, 4, …` cells.
    DyadicLengths,
}

fn check_delta(delta: f64) -> Result<()> {
    check_range("delta", delta, delta > 0.0 && delta <= 1.0, "in (0, 1]")
}

fn powered(f: &SampledFunction, delta: f64) -> SampledFunction {
    if delta == 1.0 {
        f.abs()
    } else {
        f.map(|v| v.abs().powf(delta))
    }
}

fn unpowered(mut g: SampledFunction, delta: f64) -> SampledFunction {
    if delta != 1.0 {
        let inv = 1.0 / delta;
        g.values.iter_mut().for_each(|v| *v = v.powf(inv));
        g.exterior = g.exterior.powf(inv);
    }
    g
}

/// Forward scan for nonnegative data by direct enumeration of windows.
fn forward_scan(g: &SampledFunction, policy: WindowPolicy) -> Vec<f64> {
    let n = g.len();
    let e = g.exterior;
    (0..n)
        .map(|i| {
            let mut best = e;
            let (mut sum, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
            for k in 1..=n - i {
                let v = g.values[i + k - 1];
                sum += v;
                lo = lo.min(v);
                hi = hi.max(v);
                if policy == WindowPolicy::AllLengths || k.is_power_of_two() {
                    best = best.max((sum / k as f64).clamp(lo, hi));
                }
            }
            let rest = n - i;
            if policy == WindowPolicy::DyadicLengths && !rest.is_power_of_two() {
                let k = rest.next_power_of_two();
                let padded = sum + e * (k - rest) as f64;
                best = best.max((padded / k as f64).clamp(lo.min(e), hi.max(e)));
            }
            best
        })
        .collect()
}

fn along(
    f: &SampledFunction,
    dir: Direction,
    forward: impl Fn(&SampledFunction) -> Vec<f64>,
) -> SampledFunction {
    match dir {
        Direction::Forward => SampledFunction {
            grid: f.grid,
            values: forward(f),
            exterior: f.exterior.abs(),
        },
        Direction::Backward => {
            let mut mirrored = f.clone();
            mirrored.values.reverse();
            let mut values = forward(&mirrored);
            values.reverse();
            SampledFunction {
                grid: f.grid,
                values,
                exterior: f.exterior.abs(),
            }
        }
    }
}

/// `M^+_δ f = (M^+ |f|^δ)^{1/δ}` (or `M^-_δ`), by enumerating every
/// admissible window. Quadratic in the cell count.
pub fn one_sided_maximal(
    f: &SampledFunction,
    dir: Direction,
    delta: f64,
    policy: WindowPolicy,
) -> Result<SampledFunction> {
    check_delta(delta)?;
    let g = powered(f, delta);
    Ok(unpowered(along(&g, dir, |h| forward_scan(h, policy)), delta))
}

/// Prefix sums carried in double-double form, so that window sums taken as
/// differences keep full relative precision even when the total is large.
struct CompensatedPrefix {
    hi: Vec<f64>,
    lo: Vec<f64>,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

impl CompensatedPrefix {
    fn new(values: &[f64]) -> Self {
        let mut hi = Vec::with_capacity(values.len() + 1);
        let mut lo = Vec::with_capacity(values.len() + 1);
        let (mut h, mut l) = (0.0, 0.0);
        hi.push(h);
        lo.push(l);
        for &v in values {
            let (s, e) = two_sum(h, v);
            let (s, e2) = two_sum(s, l + e);
            h = s;
            l = e2;
            hi.push(h);
            lo.push(l);
        }
        Self { hi, lo }
    }

    /// Sum of cells `i..j`.
    fn sum(&self, i: usize, j: usize) -> f64 {
        let (d, e) = two_sum(self.hi[j], -self.hi[i]);
        d + (e + (self.lo[j] - self.lo[i]))
    }
}

/// Maximal mean over windows starting at each cell, in linear time.
///
/// With `S` the prefix sums of `|f|`, the best window from cell `i` is the
/// point `(j, S_j)`, `j > i`, of steepest slope seen from `(i, S_i)`. That point
/// lies on the upper hull of the points to the right, and the vertices the
/// query skips over are exactly those the hull drops when `(i, S_i)` joins it,
/// so the sweep from right to left is amortized O(1) per cell.
fn forward_hull_sweep(g: &SampledFunction) -> Vec<f64> {
    let n = g.len();
    let s = CompensatedPrefix::new(&g.values);
    let mut out = vec![0.0; n];
    let mut hull: Vec<usize> = vec![n];
    for i in (0..n).rev() {
        // hull.last() is the leftmost vertex
        while hull.len() >= 2 {
            let h0 = hull[hull.len() - 1];
            let h1 = hull[hull.len() - 2];
            // slope(i, h0) < slope(h0, h1): h1 is strictly better
            let lhs = s.sum(i, h0) * (h1 - h0) as f64;
            let rhs = s.sum(h0, h1) * (h0 - i) as f64;
            if lhs < rhs {
                hull.pop();
            } else {
                break;
            }
        }
        let h0 = hull[hull.len() - 1];
        out[i] = (s.sum(i, h0) / (h0 - i) as f64).max(g.exterior);
        hull.push(i);
    }
    out
}

/// Same output as `one_sided_maximal(f, dir, 1, AllLengths)` in linear time.
pub fn one_sided_maximal_fast(f: &SampledFunction, dir: Direction) -> SampledFunction {
    along(&f.abs(), dir, forward_hull_sweep)
}

/// `M^+ f` through the fast path.
pub fn maximal_plus(f: &SampledFunction) -> SampledFunction {
    one_sided_maximal_fast(f, Direction::Forward)
}

/// Fenwick tree over value ranks accumulating counts and sums.
struct RankTree {
    count: Vec<u32>,
    sum: Vec<f64>,
}

impl RankTree {
    fn new(size: usize) -> Self {
        Self {
            count: vec![0; size + 1],
            sum: vec![0.0; size + 1],
        }
    }

    fn clear(&mut self) {
        self.count.iter_mut().for_each(|c| *c = 0);
        self.sum.iter_mut().for_each(|s| *s = 0.0);
    }

    fn insert(&mut self, rank: usize, value: f64) {
        let mut i = rank + 1;
        while i < self.count.len() {
            self.count[i] += 1;
            self.sum[i] += value;
            i += i & i.wrapping_neg();
        }
    }

    /// Count and sum of inserted values with rank `< rank`.
    fn below(&self, rank: usize) -> (u32, f64) {
        let (mut c, mut s) = (0, 0.0);
        let mut i = rank;
        while i > 0 {
            c += self.count[i];
            s += self.sum[i];
            i &= i - 1;
        }
        (c, s)
    }
}

/// `(1/k) Σ_{j in i..i+k} (g_j − m)^+` where `m` is the clamped mean of the
/// next `k` cells, for all-lengths windows.
fn sharp_all_lengths(g: &SampledFunction) -> Vec<f64> {
    let n = g.len();
    let win = g.windows();
    let mut sorted = g.values.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let rank: Vec<usize> = g
        .values
        .iter()
        .map(|v| sorted.partition_point(|s| s < v))
        .collect();
    let mut tree = RankTree::new(sorted.len());
    (0..n)
        .map(|i| {
            tree.clear();
            let (mut total_count, mut total_sum) = (0u32, 0.0);
            let mut best: f64 = 0.0;
            for k in 1..=n - i {
                let j = i + k - 1;
                tree.insert(rank[j], g.values[j]);
                total_count += 1;
                total_sum += g.values[j];
                let m = win.mean(i + k, k);
                let cut = sorted.partition_point(|&s| s <= m);
                let (c_le, s_le) = tree.below(cut);
                let above = total_count - c_le;
                if above > 0 {
                    let excess = (total_sum - s_le) - m * above as f64;
                    best = best.max(excess.max(0.0) / k as f64);
                }
            }
            best
        })
        .collect()
}

fn sharp_dyadic(g: &SampledFunction) -> Vec<f64> {
    let n = g.len();
    let win = g.windows();
    let at = |j: usize| if j < n { g.values[j] } else { g.exterior };
    (0..n)
        .map(|i| {
            let mut best: f64 = 0.0;
            let mut k = 1;
            loop {
                let m = win.mean(i + k, k);
                let excess: f64 = (i..i + k).map(|j| (at(j) - m).max(0.0)).sum();
                best = best.max(excess / k as f64);
                if k >= n - i {
                    break;
                }
                k *= 2;
            }
            best
        })
        .collect()
}

/// One-sided sharp maximal function
/// `sup_h (1/h) ∫_x^{x+h} (f(y) − (1/h)∫_{x+h}^{x+2h} f)^+ dy`, evaluated at cell
/// left boundaries over whole-cell `h`. For `δ < 1` it is applied to `|f|^δ`
/// and the result raised to `1/δ`.
pub fn sharp_maximal(
    f: &SampledFunction,
    delta: f64,
    policy: WindowPolicy,
) -> Result<SampledFunction> {
    check_delta(delta)?;
    let g = if delta == 1.0 {
        f.clone()
    } else {
        powered(f, delta)
    };
    let values = match policy {
        WindowPolicy::AllLengths => sharp_all_lengths(&g),
        WindowPolicy::DyadicLengths => sharp_dyadic(&g),
    };
    let out = SampledFunction {
        grid: f.grid,
        values,
        exterior: 0.0,
    };
    Ok(unpowered(out, delta))
}

/// `‖f‖_{BMO^+}`, taken as the supremum of the all-lengths `M^{♯,+} f`.
pub fn bmo_plus_norm(f: &SampledFunction) -> f64 {
    sharp_all_lengths(f).into_iter().fold(0.0, f64::max)
}

/// `M^+ χ_{(a,c)}(x)`: `(c−a)/(c−x)` left of the interval, 1 inside, 0 after.
pub fn indicator_maximal_closed_form(a: f64, c: f64, x: f64) -> f64 {
    debug_assert!(a < c);
    if x < a {
        (c - a) / (c - x)
    } else if x < c {
        1.0
    } else {
        0.0
    }
}
