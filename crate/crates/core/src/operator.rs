//! Truncated, principal-value and maximal Cauchy integrals by midpoint
//! quadrature over the input grid, plus evaluation plans describing where
//! outputs are computed.

use std::ops::Range;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{inv, CauchyKernel};
use crate::sampling::{check_exponent, lp_norm, Grid, Interval, PatchedFunction, SampledFunction, TIE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Exclusion {
    /// Sum the window `|x - y| < t` as mirror pairs `x ± s`.
    #[default]
    SymmetricPair,
    /// Drop the node at `x` (if any) and sum the rest in grid order.
    NodeSkip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PvConfig {
    pub truncation: f64,
    pub quadrature_step: f64,
    #[serde(default)]
    pub exclusion: Exclusion,
}

impl PvConfig {
    /// Truncation of one step, symmetric pairing.
    pub fn for_step(step: f64) -> Self {
        PvConfig {
            truncation: step,
            quadrature_step: step,
            exclusion: Exclusion::SymmetricPair,
        }
    }

    pub fn with_truncation(mut self, t: f64) -> Self {
        self.truncation = t;
        self
    }

    pub fn with_exclusion(mut self, e: Exclusion) -> Self {
        self.exclusion = e;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.quadrature_step.is_finite() && self.quadrature_step > 0.0) {
            return Err(invalid(format!("quadrature step must be positive, got {}", self.quadrature_step)));
        }
        if !(self.truncation.is_finite() && self.truncation >= self.quadrature_step * (1.0 - TIE)) {
            return Err(invalid(format!(
                "p.v. truncation {} must be at least the quadrature step {}",
                self.truncation, self.quadrature_step
            )));
        }
        Ok(())
    }

    fn check_against(&self, f: &SampledFunction) -> Result<()> {
        self.validate()?;
        if ((self.quadrature_step - f.step()) / f.step()).abs() > TIE {
            return Err(Error::GridMismatch(format!(
                "quadrature step {} differs from the input grid step {}",
                self.quadrature_step,
                f.step()
            )));
        }
        Ok(())
    }
}

/// Cauchy integrals of one input function, with the curve heights at its
/// nonzero nodes cached.
pub struct CauchyIntegral<'a> {
    kernel: &'a CauchyKernel,
    f: &'a SampledFunction,
    support: Range<usize>,
    heights: Vec<f64>,
}

impl<'a> CauchyIntegral<'a> {
    pub fn new(kernel: &'a CauchyKernel, f: &'a SampledFunction) -> Self {
        let support = f.support().unwrap_or(0..0);
        let curve = kernel.curve();
        let heights = support.clone().map(|i| curve.height(f.node(i))).collect();
        CauchyIntegral {
            kernel,
            f,
            support,
            heights,
        }
    }

    pub fn input(&self) -> &SampledFunction {
        self.f
    }

    fn scale(&self) -> Complex64 {
        self.kernel.prefactor() * self.f.step()
    }

    /// `Σ K(x, y_i) w(i, f_i)` over support indices in `range`.
    #[inline]
    fn sum<W: Fn(usize, Complex64) -> Complex64>(&self, x: f64, ax: f64, range: Range<i64>, w: &W) -> Complex64 {
        let a = range.start.max(self.support.start as i64);
        let b = range.end.min(self.support.end as i64);
        let mut acc = Complex64::new(0.0, 0.0);
        if a >= b {
            return acc;
        }
        let vals = self.f.values();
        let s0 = self.support.start;
        for i in a as usize..b as usize {
            let u = self.f.node(i) - x;
            let v = self.heights[i - s0] - ax;
            acc += inv(u, v) * w(i, vals[i]);
        }
        acc
    }

    fn term<W: Fn(usize, Complex64) -> Complex64>(&self, x: f64, ax: f64, i: i64, w: &W) -> Complex64 {
        if i < self.support.start as i64 || i >= self.support.end as i64 {
            return Complex64::new(0.0, 0.0);
        }
        let i = i as usize;
        let u = self.f.node(i) - x;
        let v = self.heights[i - self.support.start] - ax;
        inv(u, v) * w(i, self.f.values()[i])
    }

    /// Index of the first node with `y > x + t` and one past the last node
    /// with `y < x - t`.
    fn outer_bounds(&self, x: f64, t: f64) -> (i64, i64) {
        let g = self.f.grid();
        let left_end = ((x - t - g.origin) / g.step - TIE).ceil() as i64;
        let right_start = ((x + t - g.origin) / g.step + TIE).floor() as i64 + 1;
        (left_end, right_start)
    }

    fn weighted_truncated<W: Fn(usize, Complex64) -> Complex64>(&self, x: f64, t: f64, w: &W) -> Complex64 {
        let ax = self.kernel.curve().height(x);
        let (l, r) = self.outer_bounds(x, t);
        let n = self.f.len() as i64;
        (self.sum(x, ax, 0..l, w) + self.sum(x, ax, r..n, w)) * self.scale()
    }

    /// `∫_{|x-y|>t} K(x,y) f(y) dy`.
    pub fn truncated(&self, x: f64, t: f64) -> Complex64 {
        self.weighted_truncated(x, t, &|_, v| v)
    }

    /// `∫_{t1<|x-y|<=t2} K(x,y) f(y) dy`, the difference of two truncations.
    pub fn annulus(&self, x: f64, t1: f64, t2: f64) -> Complex64 {
        let ax = self.kernel.curve().height(x);
        let (l1, r1) = self.outer_bounds(x, t1);
        let (l2, r2) = self.outer_bounds(x, t2);
        let w = |_: usize, v: Complex64| v;
        (self.sum(x, ax, l2..l1, &w) + self.sum(x, ax, r1..r2, &w)) * self.scale()
    }

    fn weighted_pv<W: Fn(usize, Complex64) -> Complex64>(&self, x: f64, cfg: &PvConfig, w: &W) -> Result<Complex64> {
        let g = self.f.grid();
        let c2 = g.half_index(x).ok_or(Error::Misaligned {
            what: "evaluation point x",
            value: x,
            step: g.step,
            requirement: "a grid node or a midpoint between nodes",
        })?;
        let ax = self.kernel.curve().height(x);
        let n = self.f.len() as i64;
        let total = match cfg.exclusion {
            Exclusion::NodeSkip => {
                if c2.rem_euclid(2) == 0 {
                    let c = c2 / 2;
                    self.sum(x, ax, 0..c, w) + self.sum(x, ax, c + 1..n, w)
                } else {
                    self.sum(x, ax, 0..n, w)
                }
            }
            Exclusion::SymmetricPair => {
                // offsets d = 2i - c2 share the parity of c2; the window
                // holds |d| < 2t/h
                let width = 2.0 * cfg.truncation / g.step;
                let mut dmax = (width - 1e-6).ceil() as i64 - 1;
                if (dmax - c2).rem_euclid(2) != 0 {
                    dmax -= 1;
                }
                let mut acc = Complex64::new(0.0, 0.0);
                let mut d = if c2.rem_euclid(2) == 0 { 2 } else { 1 };
                while d <= dmax {
                    let hi = (c2 + d) / 2;
                    let lo = (c2 - d) / 2;
                    acc += self.term(x, ax, hi, w) + self.term(x, ax, lo, w);
                    d += 2;
                }
                let (wl, wh) = if dmax >= 0 {
                    ((c2 - dmax).div_euclid(2), (c2 + dmax).div_euclid(2) + 1)
                } else {
                    let c = c2.div_euclid(2) + 1;
                    (c, c)
                };
                acc + self.sum(x, ax, 0..wl, w) + self.sum(x, ax, wh..n, w)
            }
        };
        Ok(total * self.scale())
    }

    /// Principal value at a node or midpoint `x`.
    pub fn pv(&self, x: f64, cfg: &PvConfig) -> Result<Complex64> {
        cfg.check_against(self.f)?;
        self.weighted_pv(x, cfg, &|_, v| v)
    }

    /// `max_t |∫_{|x-y|>t} K f|` over the ladder.
    pub fn maximal(&self, x: f64, ladder: &[f64]) -> Result<f64> {
        check_ladder(ladder)?;
        Ok(ladder.iter().map(|t| self.truncated(x, *t).norm()).fold(0.0, f64::max))
    }

    /// Nodes where `f` is nonzero (all other nodes contribute nothing).
    pub fn support(&self) -> Range<usize> {
        self.support.clone()
    }

    /// `Σ K(x, y_i)(b(x) - b_i) f_i h`, where `b[k]` is the symbol at
    /// support node `support().start + k`.
    pub(crate) fn commutator_at(&self, x: f64, bx: f64, b: &[f64]) -> Complex64 {
        let s0 = self.support.start;
        let w = |i: usize, v: Complex64| v * (bx - b[i - s0]);
        let ax = self.kernel.curve().height(x);
        self.sum(x, ax, 0..self.f.len() as i64, &w) * self.scale()
    }

    /// As `commutator_at`, leaving out node `c`.
    pub(crate) fn commutator_skipping(&self, x: f64, bx: f64, b: &[f64], c: i64) -> Complex64 {
        let s0 = self.support.start;
        let w = |i: usize, v: Complex64| v * (bx - b[i - s0]);
        let ax = self.kernel.curve().height(x);
        (self.sum(x, ax, 0..c, &w) + self.sum(x, ax, c + 1..self.f.len() as i64, &w)) * self.scale()
    }

    /// Weighted sums with the kernel evaluated at `x`, split by the distance
    /// of `y` to `center`: inner over `|center-y| <= s`, outer over the rest.
    pub(crate) fn split_at<W: Fn(usize, Complex64) -> Complex64>(
        &self,
        x: f64,
        center: f64,
        s: f64,
        w: &W,
    ) -> (Complex64, Complex64) {
        let ax = self.kernel.curve().height(x);
        let (l, r) = self.outer_bounds(center, s);
        let n = self.f.len() as i64;
        let outer = self.sum(x, ax, 0..l, w) + self.sum(x, ax, r..n, w);
        let inner = self.sum(x, ax, l..r, w);
        (inner * self.scale(), outer * self.scale())
    }
}

fn check_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.is_empty() {
        return Err(invalid("truncation ladder is empty"));
    }
    if ladder.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(invalid("truncation ladder entries must be positive"));
    }
    if ladder.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid("truncation ladder must be sorted"));
    }
    Ok(())
}

pub fn apply_truncated(kernel: &CauchyKernel, f: &SampledFunction, x: f64, t: f64) -> Result<Complex64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(invalid(format!("truncation t must be positive, got {t}")));
    }
    Ok(CauchyIntegral::new(kernel, f).truncated(x, t))
}

pub fn apply_pv(kernel: &CauchyKernel, f: &SampledFunction, x: f64, cfg: &PvConfig) -> Result<Complex64> {
    CauchyIntegral::new(kernel, f).pv(x, cfg)
}

pub fn apply_maximal(kernel: &CauchyKernel, f: &SampledFunction, x: f64, ladder: &[f64]) -> Result<f64> {
    CauchyIntegral::new(kernel, f).maximal(x, ladder)
}

/// A run of evaluation points on the midpoint lattice `origin + (j + ½)h`:
/// the block `j ∈ [start + m·stride, start + (m+1)·stride)` is represented
/// by its midpoint `j = start + m·stride + stride/2` with weight
/// `stride·h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalWindow {
    pub start: i64,
    pub cells: usize,
    pub stride: usize,
}

/// Where operator outputs are computed and how they are integrated.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPlan {
    lattice: Grid,
    windows: Vec<EvalWindow>,
}

const BLOCK: usize = 32;

fn pow2_floor(v: f64) -> usize {
    if v < 2.0 {
        1
    } else {
        1usize << (v.log2().floor() as u32).min(40)
    }
}

impl EvalPlan {
    pub fn from_windows(lattice: Grid, windows: Vec<EvalWindow>) -> Result<Self> {
        if windows.iter().any(|w| w.cells == 0 || w.stride == 0) {
            return Err(invalid("evaluation windows need positive cells and stride"));
        }
        Ok(EvalPlan { lattice, windows })
    }

    fn cell_index(&self, x: f64) -> i64 {
        ((x - self.lattice.origin) / self.lattice.step - TIE).ceil() as i64
    }

    /// Midpoints in `[lo, hi)` grouped by `stride` cells.
    pub fn uniform(lattice: &Grid, lo: f64, hi: f64, stride: usize) -> Result<Self> {
        if !(lo < hi) || stride == 0 {
            return Err(invalid(format!("bad evaluation window [{lo}, {hi}) with stride {stride}")));
        }
        let mut plan = EvalPlan {
            lattice: *lattice,
            windows: Vec::new(),
        };
        let a = plan.cell_index(lo);
        let b = plan.cell_index(hi).max(a + 1);
        let cells = ((b - a) as usize).div_ceil(stride);
        plan.windows.push(EvalWindow { start: a, cells, stride });
        Ok(plan)
    }

    /// Cover `window` with strides that grow in proportion to the distance
    /// from the `sources`: near source `I` the spacing is about
    /// `max(dist, r_I) / resolution`. No block straddles a breakpoint.
    pub fn adaptive(
        lattice: &Grid,
        sources: &[Interval],
        window: &Interval,
        resolution: f64,
        breakpoints: &[f64],
    ) -> Result<Self> {
        if sources.is_empty() {
            return Err(invalid("adaptive plan needs at least one source interval"));
        }
        if !(resolution.is_finite() && resolution >= 1.0) {
            return Err(invalid(format!("plan resolution must be at least 1, got {resolution}")));
        }
        let mut plan = EvalPlan {
            lattice: *lattice,
            windows: Vec::new(),
        };
        let h = lattice.step;
        let o = lattice.origin;
        let end = plan.cell_index(window.hi());
        let mut bps: Vec<i64> = breakpoints.iter().map(|b| plan.cell_index(*b)).collect();
        bps.sort_unstable();
        let desired = |a: f64, b: f64| -> f64 {
            sources
                .iter()
                .map(|s| {
                    let gap = (s.lo() - b).max(a - s.hi()).max(0.0);
                    gap.max(s.radius()) / resolution
                })
                .fold(f64::INFINITY, f64::min)
        };
        let mut j = plan.cell_index(window.lo());
        while j < end {
            let stop = bps.iter().copied().find(|b| *b > j).unwrap_or(end).min(end);
            let x = o + j as f64 * h;
            let mut s = pow2_floor(desired(x, x) / h);
            while s > 1 && pow2_floor(desired(x, x + s as f64 * h) / h) < s {
                s /= 2;
            }
            while s > 1 && (stop - j) < s as i64 {
                s /= 2;
            }
            let mut cells = 1;
            while cells < BLOCK
                && j + ((cells + 1) * s) as i64 <= stop
                && pow2_floor(desired(x, x + ((cells + 1) * s) as f64 * h) / h) >= s
            {
                cells += 1;
            }
            plan.windows.push(EvalWindow { start: j, cells, stride: s });
            j += (cells * s) as i64;
        }
        Ok(plan)
    }

    pub fn lattice(&self) -> &Grid {
        &self.lattice
    }

    pub fn windows(&self) -> &[EvalWindow] {
        &self.windows
    }

    pub fn len(&self) -> usize {
        self.windows.iter().map(|w| w.cells).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn window_point(&self, w: &EvalWindow, m: usize) -> f64 {
        self.lattice.midpoint(w.start + (m * w.stride + w.stride / 2) as i64)
    }

    pub fn points(&self) -> Vec<f64> {
        self.windows
            .iter()
            .flat_map(|w| (0..w.cells).map(move |m| (w, m)))
            .map(|(w, m)| self.window_point(w, m))
            .collect()
    }

    /// Packs one value per point (in `points()` order) into patches.
    pub fn assemble(&self, values: Vec<Complex64>) -> Result<PatchedFunction> {
        if values.len() != self.len() {
            return Err(invalid("value count does not match the plan"));
        }
        let mut it = values.into_iter();
        let patches = self
            .windows
            .iter()
            .map(|w| {
                let v: Vec<Complex64> = it.by_ref().take(w.cells).collect();
                SampledFunction::new(self.window_point(w, 0), w.stride as f64 * self.lattice.step, v)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PatchedFunction::new(patches))
    }

    /// Evaluates `g` at every point, in parallel, in a fixed order.
    pub fn evaluate<G>(&self, g: G) -> Result<PatchedFunction>
    where
        G: Fn(f64) -> Result<Complex64> + Sync,
    {
        let values = self.points().par_iter().map(|x| g(*x)).collect::<Result<Vec<_>>>()?;
        self.assemble(values)
    }

    pub(crate) fn check_lattice(&self, f: &SampledFunction) -> Result<()> {
        if self.lattice.same_lattice(f.grid()) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "plan lattice (origin {}, step {}) differs from the input grid (origin {}, step {})",
                self.lattice.origin,
                self.lattice.step,
                f.origin(),
                f.step()
            )))
        }
    }
}

/// `C_Γ f` at every plan point.
pub fn apply_pv_plan(kernel: &CauchyKernel, f: &SampledFunction, plan: &EvalPlan, cfg: &PvConfig) -> Result<PatchedFunction> {
    plan.check_lattice(f)?;
    cfg.check_against(f)?;
    let op = CauchyIntegral::new(kernel, f);
    plan.evaluate(|x| op.weighted_pv(x, cfg, &|_, v| v))
}

/// A lower bound for an operator norm: the best ratio over a family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub argmax: usize,
    pub ratios: Vec<f64>,
}

impl NormEstimate {
    pub(crate) fn from_ratios(ratios: Vec<f64>) -> Self {
        let (argmax, value) = ratios
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, r)| if r > acc.1 { (i, r) } else { acc });
        NormEstimate { value, argmax, ratios }
    }
}

pub(crate) fn family_norms(family: &[SampledFunction], p: f64) -> Result<Vec<f64>> {
    check_exponent(p)?;
    if family.is_empty() {
        return Err(invalid("test family is empty"));
    }
    family
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let n = lp_norm(f, p, None)?.value;
            if n > 0.0 {
                Ok(n)
            } else {
                Err(invalid(format!("family member {i} has zero norm")))
            }
        })
        .collect()
}

/// `max_f ‖C_Γ f‖_p / ‖f‖_p` over the family, with `‖C_Γ f‖_p` integrated
/// over the plan. A lower bound for the operator norm only.
pub fn operator_norm_lower(
    kernel: &CauchyKernel,
    p: f64,
    family: &[SampledFunction],
    plan: &EvalPlan,
    cfg: &PvConfig,
) -> Result<NormEstimate> {
    let norms = family_norms(family, p)?;
    let ratios = family
        .iter()
        .zip(norms)
        .map(|(f, n)| Ok(apply_pv_plan(kernel, f, plan, cfg)?.lp_norm(p)? / n))
        .collect::<Result<Vec<_>>>()?;
    Ok(NormEstimate::from_ratios(ratios))
}
