//! Intervals, uniform grids and sampled functions.
//!
//! A grid node `origin + i * step` stands for the cell of width `step`
//! centred on it, so every integral below is a midpoint-rule sum. Node
//! membership in an interval `(lo, hi)` is decided half-open on `[lo, hi)`
//! with a tie tolerance of `1e-9` steps, so an interval whose endpoints are
//! nodes contains exactly `(hi - lo) / step` of them.

use std::io::{Read, Write};
use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::report::fmt_f64;

/// Relative tolerance (in grid steps) for deciding lattice ties.
pub(crate) const TIE: f64 = 1e-9;

/// The open interval `I(x, r) = (x - r, x + r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    center: f64,
    radius: f64,
}

impl Interval {
    pub fn new(center: f64, radius: f64) -> Result<Self> {
        if !center.is_finite() || !(radius.is_finite() && radius > 0.0) {
            return Err(invalid(format!("interval needs finite centre and positive radius, got I({center}, {radius})")));
        }
        Ok(Interval { center, radius })
    }

    pub fn from_endpoints(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(invalid(format!("interval endpoints out of order: ({lo}, {hi})")));
        }
        Interval::new(0.5 * (lo + hi), 0.5 * (hi - lo))
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn lo(&self) -> f64 {
        self.center - self.radius
    }

    pub fn hi(&self) -> f64 {
        self.center + self.radius
    }

    /// `|I| = 2r`.
    pub fn measure(&self) -> f64 {
        2.0 * self.radius
    }

    /// `kI`: same centre, radius scaled by `k > 0`.
    pub fn dilate(&self, k: f64) -> Interval {
        assert!(k > 0.0 && k.is_finite(), "dilation factor must be positive");
        Interval {
            center: self.center,
            radius: k * self.radius,
        }
    }

    /// `I + y`.
    pub fn translate(&self, y: f64) -> Interval {
        Interval {
            center: self.center + y,
            radius: self.radius,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        (x - self.center).abs() < self.radius
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo() <= other.lo() && other.hi() <= self.hi()
    }

    pub fn is_disjoint(&self, other: &Interval) -> bool {
        self.hi() <= other.lo() || other.hi() <= self.lo()
    }

    /// Distance from `x` to the closure of the interval.
    pub fn distance_to(&self, x: f64) -> f64 {
        ((x - self.center).abs() - self.radius).max(0.0)
    }
}

/// `I^k = (x + 2^k r, x + 2^{k+1} r)`, the right-hand piece of the dyadic
/// shell around the base interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    pub base: Interval,
    pub k: u32,
}

impl Annulus {
    pub fn new(base: Interval, k: u32) -> Result<Self> {
        if k < 1 {
            return Err(invalid("annulus index k must be at least 1"));
        }
        Ok(Annulus { base, k })
    }

    pub fn interval(&self) -> Interval {
        let s = 2f64.powi(self.k as i32) * self.base.radius();
        Interval::from_endpoints(self.base.center() + s, self.base.center() + 2.0 * s)
            .expect("positive radius")
    }

    /// `2^{k+1} I \ 2^k I` as its left and right pieces.
    pub fn shell(&self) -> [Interval; 2] {
        let s = 2f64.powi(self.k as i32) * self.base.radius();
        let c = self.base.center();
        [
            Interval::from_endpoints(c - 2.0 * s, c - s).expect("positive radius"),
            Interval::from_endpoints(c + s, c + 2.0 * s).expect("positive radius"),
        ]
    }
}

/// A uniform grid `origin + i * step`, `0 <= i < count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: f64,
    pub step: f64,
    pub count: usize,
}

impl Grid {
    pub fn new(origin: f64, step: f64, count: usize) -> Result<Self> {
        if !origin.is_finite() {
            return Err(invalid(format!("grid origin must be finite, got {origin}")));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(invalid(format!("grid step must be positive, got {step}")));
        }
        if count == 0 {
            return Err(invalid("grid needs at least one node"));
        }
        Ok(Grid { origin, step, count })
    }

    /// Cell-centred grid whose cells exactly tile `[lo, hi)` (the last cell
    /// may overhang when the length is not a multiple of `step`).
    pub fn covering(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(invalid(format!("empty grid window [{lo}, {hi})")));
        }
        let count = ((hi - lo) / step - TIE).ceil().max(1.0) as usize;
        Grid::new(lo + 0.5 * step, step, count)
    }

    pub fn node(&self, i: i64) -> f64 {
        self.origin + i as f64 * self.step
    }

    /// Point halfway between nodes `i` and `i + 1`.
    pub fn midpoint(&self, i: i64) -> f64 {
        self.origin + (i as f64 + 0.5) * self.step
    }

    pub fn first(&self) -> f64 {
        self.origin
    }

    pub fn last(&self) -> f64 {
        self.node(self.count as i64 - 1)
    }

    /// Smallest (unclipped) node index `i` with `node(i) >= x` up to ties.
    pub fn ceil_index(&self, x: f64) -> i64 {
        ((x - self.origin) / self.step - TIE).ceil() as i64
    }

    /// Unclipped node indices inside `[lo, hi)`.
    pub fn raw_range(&self, lo: f64, hi: f64) -> Range<i64> {
        let a = self.ceil_index(lo);
        let b = self.ceil_index(hi).max(a);
        a..b
    }

    /// Node indices of this grid inside the interval, clipped to the grid.
    pub fn index_range(&self, interval: &Interval) -> Range<usize> {
        let r = self.raw_range(interval.lo(), interval.hi());
        let a = r.start.clamp(0, self.count as i64) as usize;
        let b = r.end.clamp(0, self.count as i64) as usize;
        a..b.max(a)
    }

    /// `2 (x - origin) / step` when `x` is a node (even) or a midpoint (odd).
    pub fn half_index(&self, x: f64) -> Option<i64> {
        let u = 2.0 * (x - self.origin) / self.step;
        let r = u.round();
        ((u - r).abs() <= 1e-6).then_some(r as i64)
    }

    /// Same lattice (origin modulo step, and step) up to ties.
    pub fn same_lattice(&self, other: &Grid) -> bool {
        if ((self.step - other.step) / self.step).abs() > TIE {
            return false;
        }
        let off = (other.origin - self.origin) / self.step;
        (off - off.round()).abs() <= 1e-6
    }

    pub fn same_grid(&self, other: &Grid) -> bool {
        self.count == other.count
            && ((self.step - other.step) / self.step).abs() <= TIE
            && ((self.origin - other.origin) / self.step).abs() <= 1e-6
    }
}

/// Complex values on a uniform grid. Real-valued functions carry zero
/// imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    grid: Grid,
    values: Vec<Complex64>,
}

impl SampledFunction {
    pub fn new(origin: f64, step: f64, values: Vec<Complex64>) -> Result<Self> {
        let grid = Grid::new(origin, step, values.len())?;
        Self::on_grid(grid, values)
    }

    pub fn on_grid(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.count {
            return Err(invalid(format!("{} values for a grid of {} nodes", values.len(), grid.count)));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(invalid(format!("non-finite value at node {i}")));
        }
        Ok(SampledFunction { grid, values })
    }

    pub fn from_real(origin: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        Self::new(origin, step, values.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..grid.count)
            .map(|i| Complex64::new(f(grid.node(i as i64)), 0.0))
            .collect();
        Self::on_grid(grid, values)
    }

    pub fn zeros(grid: Grid) -> Self {
        SampledFunction {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.count],
        }
    }

    /// `χ_[a,b]` with each node weighted by the fraction of its cell inside
    /// `[a, b]`, which keeps the midpoint rule second order at the jumps.
    pub fn indicator(grid: Grid, a: f64, b: f64) -> Result<Self> {
        let h = grid.step;
        Self::from_fn(grid, |y| cell_fraction(y, h, a, b))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn origin(&self) -> f64 {
        self.grid.origin
    }

    pub fn step(&self) -> f64 {
        self.grid.step
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn node(&self, i: usize) -> f64 {
        self.grid.node(i as i64)
    }

    /// Value at (unclipped) node index `i`, zero off the grid.
    pub fn at_index(&self, i: i64) -> Complex64 {
        if i < 0 || i >= self.values.len() as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            self.values[i as usize]
        }
    }

    /// Piecewise-linear interpolation between nodes, zero beyond the grid
    /// (so a midpoint gets the mean of its two neighbours).
    pub fn interpolate(&self, x: f64) -> Complex64 {
        let u = (x - self.grid.origin) / self.grid.step;
        let r = u.round();
        if (u - r).abs() <= TIE {
            return self.at_index(r as i64);
        }
        let i = u.floor();
        let w = u - i;
        let i = i as i64;
        self.at_index(i) * (1.0 - w) + self.at_index(i + 1) * w
    }

    /// Indices spanning every nonzero value, or `None` for the zero function.
    pub fn support(&self) -> Option<Range<usize>> {
        let zero = Complex64::new(0.0, 0.0);
        let first = self.values.iter().position(|v| *v != zero)?;
        let last = self.values.iter().rposition(|v| *v != zero)?;
        Some(first..last + 1)
    }

    pub fn map(&self, f: impl Fn(f64, Complex64) -> Complex64) -> SampledFunction {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| f(self.node(i), *v))
            .collect();
        SampledFunction { grid: self.grid, values }
    }

    pub fn scale(&self, lambda: Complex64) -> SampledFunction {
        self.map(|_, v| v * lambda)
    }

    fn zip(&self, other: &SampledFunction, op: impl Fn(Complex64, Complex64) -> Complex64) -> Result<SampledFunction> {
        if !self.grid.same_grid(&other.grid) {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| op(*a, *b)).collect();
        Ok(SampledFunction { grid: self.grid, values })
    }

    pub fn add(&self, other: &SampledFunction) -> Result<SampledFunction> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SampledFunction) -> Result<SampledFunction> {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &SampledFunction) -> Result<SampledFunction> {
        self.zip(other, |a, b| a * b)
    }

    /// Writes `x,re,im` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "re", "im"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([fmt_f64(self.node(i)), fmt_f64(v.re), fmt_f64(v.im)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `x,re,im` rows (the `im` column is optional) from a uniform
    /// grid. Lines starting with `#` are skipped.
    pub fn read_csv<R: Read>(input: R) -> Result<SampledFunction> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input);
        let mut xs = Vec::new();
        let mut vals = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let field = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| invalid(format!("row {}: missing column {k}", line + 1)))?
                    .parse::<f64>()
                    .map_err(|e| invalid(format!("row {}: {e}", line + 1)))
            };
            xs.push(field(0)?);
            let im = if rec.len() > 2 { field(2)? } else { 0.0 };
            vals.push(Complex64::new(field(1)?, im));
        }
        if xs.len() < 2 {
            return Err(invalid("CSV function needs at least two rows"));
        }
        let step = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
        if !(step > 0.0) {
            return Err(invalid("CSV abscissae must be strictly increasing"));
        }
        for (i, x) in xs.iter().enumerate() {
            if ((x - xs[0]) / step - i as f64).abs() > 1e-6 {
                return Err(invalid(format!("CSV abscissa {x} at row {} is off the uniform grid", i + 1)));
            }
        }
        SampledFunction::new(xs[0], step, vals)
    }
}

/// Fraction of the cell `[y - h/2, y + h/2]` inside `[a, b]`, with rounding
/// noise at cell boundaries snapped to 0 or 1.
pub(crate) fn cell_fraction(y: f64, h: f64, a: f64, b: f64) -> f64 {
    let lo = (y - 0.5 * h).max(a);
    let hi = (y + 0.5 * h).min(b);
    let w = ((hi - lo) / h).clamp(0.0, 1.0);
    if w < 1e-9 {
        0.0
    } else if w > 1.0 - 1e-9 {
        1.0
    } else {
        w
    }
}

/// `L^p` norm together with a flag for an empty integration domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpNorm {
    pub value: f64,
    pub empty_domain: bool,
}

pub fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("exponent p must lie in (1, inf), got {p}")))
    }
}

/// `(h Σ |f(node)|^p)^{1/p}` over the nodes in `domain` (all nodes when
/// `None`).
pub fn lp_norm(f: &SampledFunction, p: f64, domain: Option<&Interval>) -> Result<LpNorm> {
    check_exponent(p)?;
    let range = match domain {
        Some(d) => f.grid.index_range(d),
        None => 0..f.len(),
    };
    if range.is_empty() {
        return Ok(LpNorm {
            value: 0.0,
            empty_domain: true,
        });
    }
    Ok(LpNorm {
        value: (f.step() * power_sum(&f.values[range], p)).powf(1.0 / p),
        empty_domain: false,
    })
}

pub(crate) fn power_sum(values: &[Complex64], p: f64) -> f64 {
    values.iter().map(|v| v.norm().powf(p)).sum()
}

/// `g(x) = f(x + z)` on the same grid, zero where `x + z` leaves it. `z`
/// must be an integer number of steps.
pub fn shift(f: &SampledFunction, z: f64) -> Result<SampledFunction> {
    let m = steps_in(z, f.step(), "shift z")?;
    let values = (0..f.len() as i64).map(|i| f.at_index(i + m)).collect();
    Ok(SampledFunction { grid: f.grid, values })
}

pub(crate) fn steps_in(z: f64, step: f64, what: &'static str) -> Result<i64> {
    let u = z / step;
    let m = u.round();
    if !z.is_finite() || (u - m).abs() > 1e-6 {
        return Err(Error::Misaligned {
            what,
            value: z,
            step,
            requirement: "an integer multiple of the step",
        });
    }
    Ok(m as i64)
}

/// A function known on a union of disjoint uniform patches, possibly of
/// different steps. Operator outputs on multi-scale evaluation plans live
/// here.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchedFunction {
    patches: Vec<SampledFunction>,
}

impl PatchedFunction {
    pub fn new(patches: Vec<SampledFunction>) -> Self {
        PatchedFunction { patches }
    }

    pub fn patches(&self) -> &[SampledFunction] {
        &self.patches
    }

    /// The single patch of a uniform plan.
    pub fn into_single(mut self) -> Option<SampledFunction> {
        (self.patches.len() == 1).then(|| self.patches.pop().expect("one patch"))
    }

    /// `∫ |g|^p` over the patches.
    pub fn power_integral(&self, p: f64) -> f64 {
        self.patches.iter().map(|s| s.step() * power_sum(s.values(), p)).sum()
    }

    /// `∫ |g|^p` restricted to patch nodes where `keep(x)` holds.
    pub fn power_integral_where(&self, p: f64, keep: impl Fn(f64) -> bool) -> f64 {
        self.patches
            .iter()
            .map(|s| {
                s.step()
                    * s.values()
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| keep(s.node(*i)))
                        .map(|(_, v)| v.norm().powf(p))
                        .sum::<f64>()
            })
            .sum()
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        Ok(self.power_integral(p).powf(1.0 / p))
    }

    pub fn sub(&self, other: &PatchedFunction) -> Result<PatchedFunction> {
        if self.patches.len() != other.patches.len() {
            return Err(Error::GridMismatch("patch layouts differ".into()));
        }
        let patches = self
            .patches
            .iter()
            .zip(&other.patches)
            .map(|(a, b)| a.sub(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(PatchedFunction { patches })
    }

    pub fn scale(&self, lambda: Complex64) -> PatchedFunction {
        PatchedFunction {
            patches: self.patches.iter().map(|s| s.scale(lambda)).collect(),
        }
    }

    /// `L^p` distance between two functions on the same patch layout.
    pub fn distance(&self, other: &PatchedFunction, p: f64) -> Result<f64> {
        self.sub(other)?.lp_norm(p)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "re", "im", "weight"])?;
        for s in &self.patches {
            for (i, v) in s.values().iter().enumerate() {
                w.write_record([fmt_f64(s.node(i)), fmt_f64(v.re), fmt_f64(v.im), fmt_f64(s.step())])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
