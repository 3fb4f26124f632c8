//! One-sided singular and fractional integrals.
//!
//! Kernels live on the negative half-line, so `T^+f(x) = ∫ K(x−y) f(y) dy`
//! only sees `y > x`. All kernels here are piecewise constant or have a closed
//! antiderivative, so every operator is applied through exact per-cell
//! weights `w_m = ∫_{-(m+1)Δ}^{-mΔ} K`: the value at the left boundary of
//! cell `i` is `Σ_m w_m f_{i+m}`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::grid::{Grid, SampledFunction};
use crate::maximal::Direction;
use crate::orlicz::{luxemburg_norm, YoungFunction};

/// Default for the constant `c` in the Hörmander condition `R > c|x|`.
pub const DEFAULT_HORMANDER_C: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum KernelSpec {
    /// `K = Σ_j v_j (2^{-j} χ_{(-2^j,0)} − 2^{1-j} χ_{(-2^{j-1},0)})` with
    /// `coeffs[i] = v_{j_min + i}`.
    DifferentialTransform { coeffs: Vec<f64>, j_min: i32 },
    /// `|x|^{α−1}` on the side opposite to `side`'s windows.
    Fractional { alpha: f64, side: Direction },
    /// A piecewise-constant kernel supported in `(−∞, 0]`.
    Tabulated {
        source: Option<String>,
        kernel: SampledFunction,
    },
}

impl KernelSpec {
    pub fn differential_transform(coeffs: Vec<f64>, j_min: i32) -> Result<Self> {
        let k = KernelSpec::DifferentialTransform { coeffs, j_min };
        k.validate()?;
        Ok(k)
    }

    pub fn tabulated(kernel: SampledFunction) -> Result<Self> {
        let k = KernelSpec::Tabulated { source: None, kernel };
        k.validate()?;
        Ok(k)
    }

    fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::DifferentialTransform { coeffs, .. } => {
                if coeffs.is_empty() {
                    return Err(Error::Parse("differential transform needs at least one coefficient".into()));
                }
                for &v in coeffs {
                    check_range("v_j", v, true, "finite")?;
                }
                Ok(())
            }
            KernelSpec::Fractional { alpha, .. } => {
                check_range("alpha", *alpha, *alpha > 0.0 && *alpha < 1.0, "in (0, 1)")
            }
            KernelSpec::Tabulated { kernel, .. } => {
                let tol = crate::grid::BOUNDARY_TOL * kernel.grid.spacing;
                if kernel.grid.end() > tol || kernel.exterior != 0.0 {
                    return Err(Error::Unsupported(
                        "tabulated kernels must be supported in (-inf, 0]".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    fn j_max(coeffs: &[f64], j_min: i32) -> i32 {
        j_min + coeffs.len() as i32 - 1
    }

    /// `K(x)`; the fractional kernel is returned for the forward side.
    pub fn value(&self, x: f64) -> f64 {
        if x >= 0.0 {
            return 0.0;
        }
        match self {
            KernelSpec::DifferentialTransform { coeffs, j_min } => coeffs
                .iter()
                .enumerate()
                .map(|(idx, v)| {
                    let j = j_min + idx as i32;
                    let (l, h) = (2f64.powi(j), 2f64.powi(j - 1));
                    let wide = if x > -l { 1.0 / l } else { 0.0 };
                    let narrow = if x > -h { 1.0 / h } else { 0.0 };
                    v * (wide - narrow)
                })
                .sum(),
            KernelSpec::Fractional { alpha, .. } => (-x).powf(alpha - 1.0),
            KernelSpec::Tabulated { kernel, .. } => {
                let pos = kernel.grid.position(x);
                if pos < 0.0 {
                    0.0
                } else {
                    kernel.values[(pos.floor() as usize).min(kernel.len() - 1)]
                }
            }
        }
    }

    /// `G(x) = ∫_{−∞}^x K` for the integrable kinds.
    fn antiderivative(&self, x: f64) -> f64 {
        match self {
            KernelSpec::DifferentialTransform { coeffs, j_min } => coeffs
                .iter()
                .enumerate()
                .map(|(idx, v)| {
                    let j = j_min + idx as i32;
                    let (l, h) = (2f64.powi(j), 2f64.powi(j - 1));
                    v * ((x + l).clamp(0.0, l) / l - (x + h).clamp(0.0, h) / h)
                })
                .sum(),
            KernelSpec::Tabulated { kernel, .. } => {
                let g = &kernel.grid;
                let x = x.clamp(g.origin, g.end());
                kernel.integrate(g.origin, x).expect("ordered limits")
            }
            KernelSpec::Fractional { .. } => unreachable!("fractional kernels are not integrable at infinity"),
        }
    }

    /// Points where `K` may jump, in increasing order.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            KernelSpec::DifferentialTransform { coeffs, j_min } => {
                let mut b: Vec<f64> = (j_min - 1..=Self::j_max(coeffs, *j_min))
                    .rev()
                    .map(|j| -(2f64.powi(j)))
                    .collect();
                b.push(0.0);
                b
            }
            KernelSpec::Tabulated { kernel, .. } => kernel.grid.boundaries().collect(),
            KernelSpec::Fractional { .. } => vec![0.0],
        }
    }

    fn require_integrable(&self) -> Result<()> {
        match self {
            KernelSpec::Fractional { .. } => Err(Error::Unsupported(
                "fractional kernels are not Calderón–Zygmund kernels".into(),
            )),
            _ => Ok(()),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad kernel spec {s:?}"));
        let num = |p: &str| p.trim().parse::<f64>().map_err(|_| bad());
        let parts: Vec<&str> = s.split(':').collect();
        let spec = match parts.as_slice() {
            ["difftrans", coeffs, j_min] => KernelSpec::DifferentialTransform {
                coeffs: coeffs.split(',').map(num).collect::<Result<_>>()?,
                j_min: j_min.trim().parse().map_err(|_| bad())?,
            },
            ["frac", alpha, side] => KernelSpec::Fractional {
                alpha: num(alpha)?,
                side: match *side {
                    "forward" => Direction::Forward,
                    "backward" => Direction::Backward,
                    _ => return Err(bad()),
                },
            },
            ["table", ..] if s.len() > "table:".len() => {
                let path = &s["table:".len()..];
                KernelSpec::Tabulated {
                    source: Some(path.to_string()),
                    kernel: SampledFunction::read_csv(path)?,
                }
            }
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::DifferentialTransform { coeffs, j_min } => {
                let list: Vec<String> = coeffs.iter().map(|v| v.to_string()).collect();
                write!(f, "difftrans:{}:{j_min}", list.join(","))
            }
            KernelSpec::Fractional { alpha, side } => {
                let side = match side {
                    Direction::Forward => "forward",
                    Direction::Backward => "backward",
                };
                write!(f, "frac:{alpha}:{side}")
            }
            KernelSpec::Tabulated { source: Some(p), .. } => write!(f, "table:{p}"),
            KernelSpec::Tabulated { source: None, kernel } => {
                write!(f, "table:<{} cells>", kernel.len())
            }
        }
    }
}

impl TryFrom<String> for KernelSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KernelSpec> for String {
    fn from(k: KernelSpec) -> String {
        k.to_string()
    }
}

/// Scales `2^j` from one cell up to the grid extent.
pub fn default_jrange(grid: &Grid) -> (i32, i32) {
    (
        grid.spacing.log2().ceil() as i32,
        grid.extent().log2().floor() as i32,
    )
}

fn dyadic_cells(grid: &Grid, j: i32) -> Result<usize> {
    let len = 2f64.powi(j);
    grid.cells_in(len).ok_or(Error::Misaligned(len))
}

/// `D_j f(x) = 2^{-j} ∫_x^{x+2^j} f`.
pub fn dyadic_average(f: &SampledFunction, j: i32) -> Result<SampledFunction> {
    let k = dyadic_cells(&f.grid, j)?;
    let w = f.windows();
    Ok(SampledFunction {
        grid: f.grid,
        values: (0..f.len()).map(|i| w.mean(i, k)).collect(),
        exterior: f.exterior,
    })
}

/// `Σ_j v_j (D_j f − D_{j−1} f)` over `j_min ..= j_min + coeffs.len() − 1`,
/// from window means. `2^{j_min}` must be a whole number of cells; `2^{j_min−1}`
/// may be half a cell, where the mean from a boundary is the cell value.
pub fn differential_transform(
    f: &SampledFunction,
    coeffs: &[f64],
    j_min: i32,
) -> Result<SampledFunction> {
    dyadic_cells(&f.grid, j_min)?;
    let w = f.windows();
    let values = (0..f.len())
        .map(|i| {
            let mut prev = w.mean_len(i, 2f64.powi(j_min - 1));
            let mut acc = 0.0;
            for (idx, v) in coeffs.iter().enumerate() {
                let cur = w.mean_len(i, 2f64.powi(j_min + idx as i32));
                if *v != 0.0 {
                    acc += v * (cur - prev);
                }
                prev = cur;
            }
            acc
        })
        .collect();
    Ok(SampledFunction {
        grid: f.grid,
        values,
        exterior: 0.0,
    })
}

/// `Δ^α/α ((m+1)^α − m^α)`, the mass of `y^{α−1}` on cell `m` to the right.
fn fractional_weights(alpha: f64, spacing: f64, count: usize) -> Vec<f64> {
    let scale = spacing.powf(alpha) / alpha;
    (0..count)
        .map(|m| {
            if m == 0 {
                scale
            } else {
                let m = m as f64;
                scale * m.powf(alpha) * (alpha * (1.0 / m).ln_1p()).exp_m1()
            }
        })
        .collect()
}

fn forward_fractional(values: &[f64], weights: &[f64]) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .into_par_iter()
        .map(|i| (0..n - i).map(|m| weights[m] * values[i + m]).sum())
        .collect()
}

fn mirrored(values: &[f64], op: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let mut v = values.to_vec();
    v.reverse();
    let mut out = op(&v);
    out.reverse();
    out
}

fn check_fractional(f: &SampledFunction, alpha: f64) -> Result<()> {
    check_range("alpha", alpha, alpha > 0.0 && alpha < 1.0, "in (0, 1)")?;
    if f.exterior != 0.0 {
        return Err(Error::Unsupported(
            "fractional integral of a function that does not vanish at infinity".into(),
        ));
    }
    Ok(())
}

/// `I_α^+ f(x) = ∫_x^∞ f(y)(y−x)^{α−1} dy` at cell left boundaries (forward),
/// or `I_α^- f(x) = ∫_{−∞}^x f(y)(x−y)^{α−1} dy` at cell right boundaries
/// (backward). The kernel is integrated exactly over each cell.
pub fn fractional_integral(
    f: &SampledFunction,
    alpha: f64,
    side: Direction,
) -> Result<SampledFunction> {
    check_fractional(f, alpha)?;
    let w = fractional_weights(alpha, f.grid.spacing, f.len());
    let values = match side {
        Direction::Forward => forward_fractional(&f.values, &w),
        Direction::Backward => mirrored(&f.values, |v| forward_fractional(v, &w)),
    };
    Ok(SampledFunction::new(f.grid, values).expect("finite values"))
}

/// `(I_α)_b^k f(x) = ∫ (b(x) − b(y))^k f(y) |y−x|^{α−1} dy`, computed directly.
pub fn fractional_commutator_closed_form(
    f: &SampledFunction,
    b: &SampledFunction,
    alpha: f64,
    side: Direction,
    k: u32,
) -> Result<SampledFunction> {
    check_fractional(f, alpha)?;
    if !b.grid.same_as(&f.grid) {
        return Err(Error::GridMismatch);
    }
    let n = f.len();
    let w = fractional_weights(alpha, f.grid.spacing, n);
    let forward = |fv: &[f64], bv: &[f64]| -> Vec<f64> {
        (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n - i)
                    .map(|m| w[m] * (bv[i] - bv[i + m]).powi(k as i32) * fv[i + m])
                    .sum()
            })
            .collect()
    };
    let values = match side {
        Direction::Forward => forward(&f.values, &b.values),
        Direction::Backward => {
            let mut bv = b.values.clone();
            bv.reverse();
            mirrored(&f.values, |fv| forward(fv, &bv))
        }
    };
    Ok(SampledFunction::new(f.grid, values).expect("finite values"))
}

/// Cell weights `w_m = G(−mΔ) − G(−(m+1)Δ)` for `m < count`.
fn kernel_weights(kernel: &KernelSpec, spacing: f64, count: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..=count)
        .map(|m| kernel.antiderivative(-(m as f64) * spacing))
        .collect();
    (0..count).map(|m| g[m] - g[m + 1]).collect()
}

/// `∫_{y ≥ x_i + eΔ} K(x_i − y) f(y) dy` for every cell `i`.
fn truncated_sums(f: &SampledFunction, kernel: &KernelSpec, e: usize) -> Vec<f64> {
    let n = f.len();
    let dx = f.grid.spacing;
    let w = kernel_weights(kernel, dx, n);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let inside: f64 = (e..n - i).map(|m| w[m] * f.values[i + m]).sum();
            let tail = if f.exterior != 0.0 {
                f.exterior * kernel.antiderivative(-(e.max(n - i) as f64) * dx)
            } else {
                0.0
            };
            inside + tail
        })
        .collect()
}

/// `T^+ f` for any kernel kind. The differential transform goes through
/// window means, tabulated kernels through the cell weights.
pub fn apply(f: &SampledFunction, kernel: &KernelSpec) -> Result<SampledFunction> {
    match kernel {
        KernelSpec::DifferentialTransform { coeffs, j_min } => differential_transform(f, coeffs, *j_min),
        KernelSpec::Fractional { alpha, side } => fractional_integral(f, *alpha, *side),
        KernelSpec::Tabulated { .. } => Ok(SampledFunction::new(f.grid, truncated_sums(f, kernel, 0))
            .expect("finite values")),
    }
}

/// Kernel convolution through the cell weights, for any integrable kernel.
pub fn convolve(f: &SampledFunction, kernel: &KernelSpec) -> Result<SampledFunction> {
    kernel.require_integrable()?;
    Ok(SampledFunction::new(f.grid, truncated_sums(f, kernel, 0)).expect("finite values"))
}

/// `T_b^k f = [b, T_b^{k−1}] f` with `T_b^0 = T`.
pub fn iterated_commutator(
    kernel: &KernelSpec,
    b: &SampledFunction,
    k: u32,
    f: &SampledFunction,
) -> Result<SampledFunction> {
    if !b.grid.same_as(&f.grid) {
        return Err(Error::GridMismatch);
    }
    if k == 0 {
        return apply(f, kernel);
    }
    let outer = b.mul(&iterated_commutator(kernel, b, k - 1, f)?)?;
    let inner = iterated_commutator(kernel, b, k - 1, &b.mul(f)?)?;
    outer.zip_with(&inner, |x, y| x - y)
}

/// `T_ε^+ f(x) = ∫_{y ≥ x+ε} K(x−y) f(y) dy`, with `ε` rounded to whole cells.
pub fn truncated_apply(f: &SampledFunction, kernel: &KernelSpec, eps: f64) -> Result<SampledFunction> {
    check_range("eps", eps, eps > 0.0, "> 0")?;
    kernel.require_integrable()?;
    let e = (eps / f.grid.spacing).round() as usize;
    if e == 0 {
        return Err(Error::Misaligned(eps));
    }
    Ok(SampledFunction::new(f.grid, truncated_sums(f, kernel, e)).expect("finite values"))
}

/// `sup_ε |T_ε^+ f|` over `ε = eΔ`, `e = 1 ..`, up to the grid extent, together
/// with the `ε → 0` limit (the full integral).
pub fn maximal_truncated(f: &SampledFunction, kernel: &KernelSpec) -> Result<SampledFunction> {
    kernel.require_integrable()?;
    let n = f.len();
    let dx = f.grid.spacing;
    let w = kernel_weights(kernel, dx, n);
    let values = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = if f.exterior != 0.0 {
                f.exterior * kernel.antiderivative(-((n - i) as f64) * dx)
            } else {
                0.0
            };
            let mut best = acc.abs();
            for m in (0..n - i).rev() {
                acc += w[m] * f.values[i + m];
                best = best.max(acc.abs());
            }
            best
        })
        .collect();
    Ok(SampledFunction::new(f.grid, values).expect("finite values"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CancellationSample {
    pub eps: f64,
    pub n: f64,
    pub integral: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    /// `max |∫_{ε<|x|<N} K|` over the sampled pairs.
    pub b1_estimate: f64,
    /// `max |x||K(x)|` over the sampled points.
    pub b2_estimate: f64,
    pub samples: Vec<CancellationSample>,
}

/// Sampled lower bounds for the size and cancellation constants of `K`.
pub fn kernel_condition_report(
    kernel: &KernelSpec,
    eps_grid: &[f64],
    n_grid: &[f64],
) -> Result<KernelReport> {
    kernel.require_integrable()?;
    let mut samples = Vec::new();
    for &eps in eps_grid {
        for &n in n_grid {
            if eps > 0.0 && n > eps {
                let integral = kernel.antiderivative(-eps) - kernel.antiderivative(-n);
                samples.push(CancellationSample { eps, n, integral });
            }
        }
    }
    let b1_estimate = samples.iter().fold(0.0f64, |m, s| m.max(s.integral.abs()));
    let lo = eps_grid.iter().copied().filter(|&e| e > 0.0).fold(f64::INFINITY, f64::min);
    let hi = n_grid.iter().copied().fold(0.0, f64::max);
    let mut b2_estimate: f64 = 0.0;
    if lo.is_finite() && hi > lo {
        for x in crate::orlicz::log_grid(lo, hi, 4096) {
            b2_estimate = b2_estimate.max(x * kernel.value(-x).abs());
        }
    }
    Ok(KernelReport {
        b1_estimate,
        b2_estimate,
        samples,
    })
}

/// Partial sums `S_1 .. S_M` of
/// `Σ_m 2^m R m^k ‖(K(x−·) − K(−·)) χ_{2^m R < |·| ≤ 2^{m+1} R}‖_{A, B(0, 2^{m+1} R)}`.
#[allow(clippy::too_many_arguments)]
pub fn hormander_partial_sum(
    kernel: &KernelSpec,
    young: &YoungFunction,
    k: u32,
    x: f64,
    r: f64,
    m_max: usize,
    c: f64,
) -> Result<Vec<f64>> {
    kernel.require_integrable()?;
    check_range("c", c, c >= 1.0, ">= 1")?;
    check_range("R", r, r > c * x.abs(), "> c|x|")?;
    let cuts: Vec<f64> = kernel
        .breakpoints()
        .into_iter()
        .flat_map(|b| [x - b, -b])
        .collect();
    let diff = |y: f64| kernel.value(x - y) - kernel.value(-y);
    let mut sums = Vec::with_capacity(m_max);
    let mut acc = 0.0;
    for m in 1..=m_max {
        let inner = 2f64.powi(m as i32) * r;
        let outer = 2.0 * inner;
        let mut pieces = vec![(0.0, 2.0 * inner)];
        for (lo, hi) in [(-outer, -inner), (inner, outer)] {
            let mut pts: Vec<f64> = cuts.iter().copied().filter(|&p| p > lo && p < hi).collect();
            pts.push(lo);
            pts.push(hi);
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            for w in pts.windows(2) {
                pieces.push((diff(0.5 * (w[0] + w[1])), w[1] - w[0]));
            }
        }
        let norm = luxemburg_norm(&pieces, young);
        acc += inner * (m as f64).powi(k as i32) * norm;
        sums.push(acc);
    }
    Ok(sums)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::sample_function;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid() -> Grid {
        Grid::new(-4.0, 0.25, 48).unwrap()
    }

    fn indicator(g: &Grid) -> SampledFunction {
        sample_function(&"indicator:0:1".parse().unwrap(), g).unwrap()
    }

    fn at(f: &SampledFunction, x: f64) -> f64 {
        f.values[f.grid.boundary_index(x).unwrap()]
    }

    fn dt(coeffs: &[f64], j_min: i32) -> KernelSpec {
        KernelSpec::differential_transform(coeffs.to_vec(), j_min).unwrap()
    }

    /// Direct double loop over cells with the kernel integrated by a fine
    /// midpoint rule on each cell (exact for piecewise-constant kernels whose
    /// jumps are on the sub-grid).
    fn double_loop(f: &SampledFunction, kernel: &KernelSpec, e: usize) -> Vec<f64> {
        let n = f.len();
        let dx = f.grid.spacing;
        let sub = 64;
        (0..n)
            .map(|i| {
                let x = f.grid.boundary(i);
                let mut acc = 0.0;
                for j in i + e..n {
                    let mut kint = 0.0;
                    for s in 0..sub {
                        let y = f.grid.boundary(j) + (s as f64 + 0.5) * dx / sub as f64;
                        kint += kernel.value(x - y) * dx / sub as f64;
                    }
                    acc += kint * f.values[j];
                }
                acc
            })
            .collect()
    }

    #[test]
    fn dyadic_average_examples() {
        let g = grid();
        let c = SampledFunction::constant(g, 1.7);
        for j in -2..4 {
            assert!(dyadic_average(&c, j).unwrap().values.iter().all(|&v| v == 1.7));
        }
        let d = dyadic_average(&indicator(&g), 0).unwrap();
        assert_eq!(at(&d, 0.5), 0.5);
        assert_eq!(at(&d, 0.0), 1.0);
        assert!(matches!(dyadic_average(&c, -3), Err(Error::Misaligned(_))));
    }

    #[test]
    fn differential_transform_examples() {
        let g = grid();
        let f = indicator(&g);
        let zero = differential_transform(&f, &[0.0, 0.0, 0.0], -1).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0));
        let c = SampledFunction::constant(g, 3.3);
        let t = differential_transform(&c, &[1.0, -0.5, 2.0, 0.25], -2).unwrap();
        assert!(t.values.iter().all(|&v| v == 0.0));
        let t = differential_transform(&f, &[1.0], 0).unwrap();
        assert_eq!(at(&t, 0.5), -0.5);
        assert!(differential_transform(&f, &[1.0], -3).is_err());
    }

    #[test]
    fn half_cell_scale_reads_the_cell() {
        // 2^{j_min − 1} is half a cell here
        let g = Grid::new(0.0, 0.5, 8).unwrap();
        let f = SampledFunction::from_cells(g, |i| i as f64);
        // D_{-1} f − D_{-2} f vanishes: both read the cell
        let t = differential_transform(&f, &[1.0], -1).unwrap();
        assert!(t.values.iter().all(|&v| v == 0.0));
        // D_0 f − D_{-1} f is half the next increment
        let t = differential_transform(&f, &[0.0, 1.0], -1).unwrap();
        for i in 0..7 {
            assert_eq!(t.values[i], 0.5);
        }
        assert_eq!(t.values[7], -3.5);
    }

    #[test]
    fn fractional_examples() {
        let g = Grid::new(-2.0, 1.0 / 64.0, 256).unwrap();
        let f = indicator(&g);
        for alpha in [0.25, 0.5, 0.75] {
            let i = fractional_integral(&f, alpha, Direction::Forward).unwrap();
            assert_relative_eq!(at(&i, 0.0), 1.0 / alpha, max_relative = 1e-12);
            assert_eq!(at(&i, 1.0), 0.0);
            assert_eq!(at(&i, 1.5), 0.0);
        }
        let i = fractional_integral(&f, 0.5, Direction::Forward).unwrap();
        assert_relative_eq!(at(&i, -1.0), 2.0 * (2f64.sqrt() - 1.0), max_relative = 1e-12);
        assert!(fractional_integral(&f, 1.0, Direction::Forward).is_err());
        assert!(fractional_integral(&SampledFunction::constant(g, 1.0), 0.5, Direction::Forward).is_err());
        // backward, at the right boundary x = 2: ∫_0^1 (2 − y)^{−1/2} dy
        let i = fractional_integral(&f, 0.5, Direction::Backward).unwrap();
        let last = *i.values.last().unwrap();
        assert_relative_eq!(last, 2.0 * (2f64.sqrt() - 1.0), max_relative = 1e-12);
    }

    #[test]
    fn commutator_examples() {
        let g = Grid::new(-2.0, 1.0 / 16.0, 96).unwrap();
        let f = sample_function(&"random:7:0:1:0.25:-1:2".parse().unwrap(), &g).unwrap();
        let b = sample_function(&"random:8:-1:1:0.5".parse().unwrap(), &g).unwrap();
        let frac = KernelSpec::Fractional {
            alpha: 0.4,
            side: Direction::Forward,
        };
        let kernel = dt(&[1.0, -1.0, 0.5], -2);
        for k in [&frac, &kernel] {
            assert_eq!(iterated_commutator(k, &b, 0, &f).unwrap(), apply(&f, k).unwrap());
            let c = SampledFunction::constant(g, 2.0);
            for order in 1..=2 {
                let out = iterated_commutator(k, &c, order, &f).unwrap();
                assert!(out.max_abs() < 1e-12, "{k} {order}");
            }
        }
        for side in [Direction::Forward, Direction::Backward] {
            let frac = KernelSpec::Fractional { alpha: 0.4, side };
            for order in 1..=2 {
                let rec = iterated_commutator(&frac, &b, order, &f).unwrap();
                let closed = fractional_commutator_closed_form(&f, &b, 0.4, side, order).unwrap();
                let scale = closed.max_abs();
                for (x, y) in rec.values.iter().zip(&closed.values) {
                    assert!((x - y).abs() <= 1e-8 * y.abs().max(1e-3 * scale));
                }
            }
        }
    }

    #[test]
    fn truncation_examples() {
        let g = Grid::new(-2.0, 0.125, 64).unwrap();
        let f = indicator(&g);
        let kernel = dt(&[1.0], 0);
        // from x = −2, support ends 3 units away
        let t = truncated_apply(&f, &kernel, 3.0).unwrap();
        assert_eq!(t.values[0], 0.0);
        let mt = maximal_truncated(&f, &kernel).unwrap();
        for e in 1..64 {
            let t = truncated_apply(&f, &kernel, e as f64 * 0.125).unwrap();
            for (x, y) in t.values.iter().zip(double_loop(&f, &kernel, e)) {
                assert!((x - y).abs() < 1e-12);
            }
            for i in 0..64 {
                assert!(mt.values[i] >= t.values[i].abs());
            }
        }
        let full = convolve(&f, &kernel).unwrap();
        for i in 0..64 {
            assert!(mt.values[i] >= full.values[i].abs());
        }
        assert!(truncated_apply(&f, &kernel, 0.0).is_err());
        let frac = KernelSpec::Fractional {
            alpha: 0.5,
            side: Direction::Forward,
        };
        assert!(truncated_apply(&f, &frac, 1.0).is_err());
        assert!(maximal_truncated(&f, &frac).is_err());
    }

    #[test]
    fn tabulated_kernel_matches_differential_transform() {
        let g = Grid::new(-3.0, 0.125, 64).unwrap();
        let kernel = dt(&[1.0, 0.5, -0.25], -1);
        let kgrid = Grid::new(-4.0, 0.125, 32).unwrap();
        let table = SampledFunction::from_cells(kgrid, |i| kernel.value(kgrid.boundary(i) + 0.0625));
        let tab = KernelSpec::tabulated(table).unwrap();
        let f = sample_function(&"random:3:-1:1:0.25".parse().unwrap(), &g).unwrap();
        let a = apply(&f, &tab).unwrap();
        let b = apply(&f, &kernel).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-12);
        }
        let positive = SampledFunction::zeros(Grid::new(-1.0, 0.5, 4).unwrap());
        assert!(KernelSpec::tabulated(positive).is_err());
    }

    #[test]
    fn kernel_report_examples() {
        let eps: Vec<f64> = (0..8).map(|i| 2f64.powi(-i - 2)).collect();
        let big: Vec<f64> = (0..8).map(|i| 2f64.powi(i + 2)).collect();
        let zero = kernel_condition_report(&dt(&[0.0], 0), &eps, &big).unwrap();
        assert_eq!((zero.b1_estimate, zero.b2_estimate), (0.0, 0.0));
        // ∫_{ε<|x|<N} K = ε once ε < 1/2 and N ≥ 1, vanishing in the limit
        let one = kernel_condition_report(&dt(&[1.0], 0), &eps, &big).unwrap();
        for s in &one.samples {
            assert_eq!(s.integral, s.eps);
        }
        let bounded = kernel_condition_report(&dt(&[1.0, -1.0, 1.0, -1.0, 1.0], -2), &eps, &big).unwrap();
        assert!(bounded.b2_estimate > 0.0 && bounded.b2_estimate <= 4.0);
    }

    #[test]
    fn hormander_examples() {
        let a: YoungFunction = "explog:1:0.5".parse().unwrap();
        let kernel = dt(&[1.0, -1.0, 0.5, 1.0, -0.5, 0.75, -1.0, 0.25], -4);
        let zero_x = hormander_partial_sum(&kernel, &a, 1, 0.0, 1.0, 10, DEFAULT_HORMANDER_C).unwrap();
        assert!(zero_x.iter().all(|&s| s == 0.0));
        let zero_k = hormander_partial_sum(&dt(&[0.0], 0), &a, 1, 0.3, 1.0, 10, DEFAULT_HORMANDER_C).unwrap();
        assert!(zero_k.iter().all(|&s| s == 0.0));
        let s = hormander_partial_sum(&kernel, &a, 1, 0.3, 1.0, 20, DEFAULT_HORMANDER_C).unwrap();
        assert!(s.windows(2).all(|w| w[1] >= w[0]));
        assert!(s[0] > 0.0);
        assert!((s[19] - s[18]) / s[19] < 1e-3);
        assert!(hormander_partial_sum(&kernel, &a, 1, 0.6, 1.0, 5, DEFAULT_HORMANDER_C).is_err());
    }

    #[test]
    fn grammar_round_trip() {
        for s in ["difftrans:1,-0.5,0.25:-2", "frac:0.5:forward", "frac:0.25:backward"] {
            let k: KernelSpec = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
        for bad in ["difftrans::0", "frac:1.5:forward", "frac:0.5:up", "table:", "nope"] {
            assert!(bad.parse::<KernelSpec>().is_err(), "{bad}");
        }
    }

    fn func(v: Vec<f64>) -> SampledFunction {
        SampledFunction::new(Grid::new(-4.0, 0.125, v.len()).unwrap(), v).unwrap()
    }

    fn coeffs() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-1.0f64..1.0, 1..7)
    }

    proptest! {
        #[test]
        fn transform_equals_kernel_convolution(v in proptest::collection::vec(-2.0f64..2.0, 64), c in coeffs(), j_min in -3i32..0, ext in prop_oneof![Just(0.0), -1.0f64..1.0]) {
            let f = func(v).with_exterior(ext);
            let kernel = dt(&c, j_min);
            let a = differential_transform(&f, &c, j_min).unwrap();
            let b = convolve(&f, &kernel).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() <= 1e-10 * (1.0 + y.abs()));
            }
        }

        #[test]
        fn truncation_matches_double_loop(v in proptest::collection::vec(-2.0f64..2.0, 32), c in coeffs(), e in 1usize..8) {
            let f = func(v);
            let kernel = dt(&c, -3);
            let t = truncated_apply(&f, &kernel, e as f64 * 0.125).unwrap();
            for (x, y) in t.values.iter().zip(double_loop(&f, &kernel, e)) {
                prop_assert!((x - y).abs() <= 1e-10);
            }
        }

        #[test]
        fn linear(v in proptest::collection::vec(-2.0f64..2.0, 40), w in proptest::collection::vec(-2.0f64..2.0, 40), lambda in -3.0f64..3.0, c in coeffs()) {
            let (f, g) = (func(v), func(w));
            let combo = f.scale(lambda).add(&g).unwrap();
            let kernels = [dt(&c, -3), KernelSpec::Fractional { alpha: 0.3, side: Direction::Forward }];
            for k in &kernels {
                let lhs = apply(&combo, k).unwrap();
                let (tf, tg) = (apply(&f, k).unwrap(), apply(&g, k).unwrap());
                for i in 0..40 {
                    let rhs = lambda * tf.values[i] + tg.values[i];
                    prop_assert!((lhs.values[i] - rhs).abs() <= 1e-10 * (1.0 + rhs.abs() + (lambda * tf.values[i]).abs()));
                }
            }
        }

        #[test]
        fn fractional_positive_and_covariant(v in proptest::collection::vec(0.0f64..2.0, 24), shift in 1isize..12, alpha in 0.05f64..0.95) {
            let mut padded = v;
            padded.extend(std::iter::repeat_n(0.0, 24));
            let f = func(padded);
            let i = fractional_integral(&f, alpha, Direction::Forward).unwrap();
            prop_assert!(i.values.iter().all(|&x| x >= 0.0));
            let is = fractional_integral(&f.shift_cells(shift), alpha, Direction::Forward).unwrap();
            for c in 0..24 {
                let (a, b) = (is.values[c + shift as usize], i.values[c]);
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b));
            }
        }
    }
}
