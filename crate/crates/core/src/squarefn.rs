//! The one-sided discrete square function `S^+` and oscillation operator
//! `O^+`, built on right averages `A_s f(x) = (1/s)∫_x^{x+s} f`.

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::grid::{Grid, SampledFunction, Windows};

/// Dyadic scales `2^n`, `n_min ≤ n ≤ n_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicRange {
    pub n_min: i32,
    pub n_max: i32,
}

impl DyadicRange {
    pub fn new(n_min: i32, n_max: i32, grid: &Grid) -> Result<Self> {
        let r = Self { n_min, n_max };
        r.validate(grid)?;
        Ok(r)
    }

    /// From one cell up to the grid extent.
    pub fn spanning(grid: &Grid) -> Self {
        Self {
            n_min: grid.spacing.log2().ceil() as i32,
            n_max: grid.extent().log2().floor() as i32,
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let tol = 1.0 + 1e-12;
        if self.n_min > self.n_max {
            return Err(Error::OutOfRange {
                name: "n_min",
                value: self.n_min as f64,
                expected: "<= n_max",
            });
        }
        if 2f64.powi(self.n_min) * tol < grid.spacing {
            return Err(Error::OutOfRange {
                name: "n_min",
                value: self.n_min as f64,
                expected: "2^n_min at least one cell",
            });
        }
        if 2f64.powi(self.n_max) > grid.extent() * tol {
            return Err(Error::OutOfRange {
                name: "n_max",
                value: self.n_max as f64,
                expected: "2^n_max at most the grid extent",
            });
        }
        Ok(())
    }

    pub fn scales(&self) -> impl Iterator<Item = i32> {
        self.n_min..=self.n_max
    }
}

/// `A_s f` at every cell's left boundary; partial cells are weighted exactly.
pub fn rolling_average(f: &SampledFunction, s: f64) -> Result<SampledFunction> {
    check_range("s", s, s > 0.0, "> 0")?;
    let w = f.windows();
    Ok(SampledFunction {
        grid: f.grid,
        values: (0..f.len()).map(|i| w.mean_len(i, s)).collect(),
        exterior: f.exterior,
    })
}

fn increment(w: &Windows<'_>, i: usize, n: i32) -> f64 {
    w.mean_len(i, 2f64.powi(n)) - w.mean_len(i, 2f64.powi(n - 1))
}

/// `(Σ_n |A_{2^n} f − A_{2^{n−1}} f|²)^{1/2}` over the range.
pub fn square_function(f: &SampledFunction, range: DyadicRange) -> Result<SampledFunction> {
    range.validate(&f.grid)?;
    let w = f.windows();
    let values = (0..f.len())
        .map(|i| {
            range
                .scales()
                .map(|n| increment(&w, i, n).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Ok(SampledFunction::new(f.grid, values).expect("finite values"))
}

/// `Σ_{n > n_max} |A_{2^n} f − A_{2^{n−1}} f|²` at every cell, exactly: once
/// windows pass the grid end, `A_{2^n} f − e = J 2^{−n}` with
/// `J = ∫_x^{end} (f − e)`, so the remainder is geometric.
pub fn square_function_tail(f: &SampledFunction, range: DyadicRange) -> Result<Vec<f64>> {
    range.validate(&f.grid)?;
    let w = f.windows();
    let top = f.grid.extent().log2().ceil() as i32 + 1;
    let dx = f.grid.spacing;
    let n = f.len();
    Ok((0..n)
        .map(|i| {
            let near: f64 = (range.n_max + 1..=top.max(range.n_max))
                .map(|s| increment(&w, i, s).powi(2))
                .sum();
            let start = (range.n_max + 1).max(top + 1);
            let j = (w.sum(i, n - i) - f.exterior * (n - i) as f64) * dx;
            near + j * j * 4f64.powi(-(start - 1)) / 3.0
        })
        .collect())
}

/// Window lengths probed for the scale `[2^n, 2^{n+1})`: every cell-aligned
/// length, the limit `2^{n+1}`, and `2^n (1 + j/P)` for `P` the power of two
/// at least `samples`, so that larger `samples` give a superset.
fn scale_samples(grid: &Grid, n: i32, samples: usize) -> Vec<f64> {
    let lo = 2f64.powi(n);
    let hi = 2.0 * lo;
    let dx = grid.spacing;
    let first = (lo / dx).ceil() as usize;
    let last = (hi / dx).ceil() as usize;
    let mut s: Vec<f64> = (first.max(1)..last).map(|k| k as f64 * dx).filter(|&v| v >= lo).collect();
    let p = samples.next_power_of_two();
    s.extend((0..p).map(|j| lo * (1.0 + j as f64 / p as f64)));
    s.push(hi);
    s
}

/// `(Σ_n sup_{s ∈ [2^n, 2^{n+1})} |A_{2^n} f − A_s f|²)^{1/2}`. The sup is
/// taken over every cell-aligned `s` in the scale plus its right-end limit,
/// which is exact at cell boundaries since `A_s f(x)` is monotone in `s`
/// between consecutive cell-aligned lengths.
pub fn oscillation_operator(
    f: &SampledFunction,
    range: DyadicRange,
    per_scale_samples: usize,
) -> Result<SampledFunction> {
    range.validate(&f.grid)?;
    if per_scale_samples < 2 {
        return Err(Error::OutOfRange {
            name: "per_scale_samples",
            value: per_scale_samples as f64,
            expected: ">= 2",
        });
    }
    let w = f.windows();
    let samples: Vec<(i32, Vec<f64>)> = range
        .scales()
        .map(|n| (n, scale_samples(&f.grid, n, per_scale_samples)))
        .collect();
    let values = (0..f.len())
        .map(|i| {
            samples
                .iter()
                .map(|(n, ss)| {
                    let base = w.mean_len(i, 2f64.powi(*n));
                    ss.iter()
                        .map(|&s| (base - w.mean_len(i, s)).abs())
                        .fold(0.0, f64::max)
                        .powi(2)
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Ok(SampledFunction::new(f.grid, values).expect("finite values"))
}
