//! `[b, C_Γ] f = b C_Γ f - C_Γ(b f)` and the lower bound `|C_Γ χ_{I1}| ≳ 1/M`
//! at distance about `M r`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::LipschitzCurve;
use crate::error::{invalid, Result};
use crate::kernel::CauchyKernel;
use crate::operator::{family_norms, CauchyIntegral, EvalPlan, NormEstimate, PvConfig};
use crate::report::{loglog_slope, BoundReport, BoundRow};
use crate::sampling::{Grid, Interval, PatchedFunction, SampledFunction};
use crate::symbol::Symbol;

/// The commutator applied to one input, with the symbol cached on the
/// input's support.
pub struct Commutator<'a> {
    op: CauchyIntegral<'a>,
    b: &'a dyn Symbol,
    b_nodes: Vec<f64>,
}

impl<'a> Commutator<'a> {
    pub fn new(b: &'a dyn Symbol, f: &'a SampledFunction, kernel: &'a CauchyKernel) -> Result<Self> {
        let op = CauchyIntegral::new(kernel, f);
        let s = op.support();
        let b_nodes = b.sample_range(f.grid(), s.start as i64..s.end as i64)?;
        Ok(Commutator { op, b, b_nodes })
    }

    /// `∫ K(x,y)(b(x) - b(y)) f(y) dy`; a node at `x` is skipped (its
    /// integrand vanishes in the limit).
    pub fn at(&self, x: f64) -> Complex64 {
        let f = self.op.input();
        match f.grid().half_index(x) {
            Some(c2) if c2.rem_euclid(2) == 0 => self.op.commutator_skipping(x, self.b.value(x), &self.b_nodes, c2 / 2),
            _ => self.op.commutator_at(x, self.b.value(x), &self.b_nodes),
        }
    }

    pub fn symbol_at(&self, x: f64) -> f64 {
        self.b.value(x)
    }

    pub fn integral(&self) -> &CauchyIntegral<'a> {
        &self.op
    }

    pub(crate) fn b_nodes(&self) -> &[f64] {
        &self.b_nodes
    }
}

/// `[b, C_Γ] f` at every plan point (all midpoints of `f`'s lattice).
pub fn apply_commutator(
    b: &dyn Symbol,
    f: &SampledFunction,
    kernel: &CauchyKernel,
    plan: &EvalPlan,
    cfg: &PvConfig,
) -> Result<PatchedFunction> {
    plan.check_lattice(f)?;
    cfg.validate()?;
    if ((cfg.quadrature_step - f.step()) / f.step()).abs() > 1e-9 {
        return Err(crate::error::Error::GridMismatch(format!(
            "quadrature step {} differs from the input grid step {}",
            cfg.quadrature_step,
            f.step()
        )));
    }
    let c = Commutator::new(b, f, kernel)?;
    plan.evaluate(|x| Ok(c.at(x)))
}

/// `[b, C_Γ] f (x)` at a single point.
pub fn commutator_at(b: &dyn Symbol, f: &SampledFunction, kernel: &CauchyKernel, x: f64) -> Result<Complex64> {
    Ok(Commutator::new(b, f, kernel)?.at(x))
}

/// `max_f ‖[b, C_Γ] f‖_p / ‖f‖_p` over the family, integrated over the plan.
/// A lower bound for the operator norm.
pub fn commutator_norm_lower(
    b: &dyn Symbol,
    p: f64,
    family: &[SampledFunction],
    kernel: &CauchyKernel,
    plan: &EvalPlan,
    cfg: &PvConfig,
) -> Result<NormEstimate> {
    let norms = family_norms(family, p)?;
    let ratios = family
        .iter()
        .zip(norms)
        .map(|(f, n)| Ok(apply_commutator(b, f, kernel, plan, cfg)?.lp_norm(p)? / n))
        .collect::<Result<Vec<_>>>()?;
    Ok(NormEstimate::from_ratios(ratios))
}

/// Two intervals of radius `r` whose points are `M r` to `2 M r` apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityCase {
    pub m: f64,
    pub r: f64,
    pub i0: Interval,
    pub i1: Interval,
    pub curve: LipschitzCurve,
}

impl HomogeneityCase {
    /// `I0 = I(x0, r)` and `I1 = I(x0 + 1.2(M+1) r, r)`.
    pub fn standard(curve: LipschitzCurve, m: f64, r: f64, x0: f64) -> Result<Self> {
        let i0 = Interval::new(x0, r)?;
        let i1 = Interval::new(x0 + 1.2 * (m + 1.0) * r, r)?;
        let case = HomogeneityCase { m, r, i0, i1, curve };
        case.validate()?;
        Ok(case)
    }

    /// `(min, max)` of `|y0 - y1|` over `y0 ∈ I0`, `y1 ∈ I1`.
    pub fn distance_range(&self) -> (f64, f64) {
        let gap = (self.i1.lo() - self.i0.hi()).max(self.i0.lo() - self.i1.hi());
        let far = (self.i1.hi() - self.i0.lo()).max(self.i0.hi() - self.i1.lo());
        (gap, far)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m.is_finite() && self.m > 10.0) {
            return Err(invalid(format!("homogeneity case needs M > 10, got {}", self.m)));
        }
        if (self.i0.radius() - self.r).abs() > 1e-12 * self.r || (self.i1.radius() - self.r).abs() > 1e-12 * self.r {
            return Err(invalid("I0 and I1 must both have radius r"));
        }
        if !self.i0.is_disjoint(&self.i1) {
            return Err(invalid("I0 and I1 overlap"));
        }
        let (near, far) = self.distance_range();
        let tol = 1e-12 * self.m * self.r;
        if near < self.m * self.r - tol || far > 2.0 * self.m * self.r + tol {
            return Err(invalid(format!(
                "distances between I0 and I1 span [{near}, {far}], outside [M r, 2 M r] = [{}, {}]",
                self.m * self.r,
                2.0 * self.m * self.r
            )));
        }
        Ok(())
    }

    /// `2 / ((L^2 + 1) M)`.
    pub fn target(&self) -> f64 {
        let l = self.curve.lipschitz_constant();
        2.0 / ((l * l + 1.0) * self.m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityConfig {
    /// Grid nodes per radius of `I1`.
    pub nodes_per_radius: usize,
    /// Pass iff the minimum is at least `slack × target`.
    pub slack: f64,
    #[serde(default)]
    pub prefactor: bool,
}

impl Default for HomogeneityConfig {
    fn default() -> Self {
        HomogeneityConfig {
            nodes_per_radius: 256,
            slack: 0.9,
            prefactor: false,
        }
    }
}

pub const HOMOGENEITY_CHECK: &str = "min_{x in I0} pi |C(chi_I1)(x)| >= slack * 2/((L^2+1) M)";

/// Evaluates `C_Γ χ_{I1}` on the midpoints of its grid inside `I0`. Rows
/// carry `π |C_Γ χ_{I1}(x)|` against `slack × target`.
pub fn homogeneity_check(case: &HomogeneityCase, cfg: &HomogeneityConfig) -> Result<BoundReport> {
    case.validate()?;
    if cfg.nodes_per_radius < 2 {
        return Err(invalid("need at least two nodes per radius"));
    }
    if !(cfg.slack > 0.0 && cfg.slack <= 1.0) {
        return Err(invalid(format!("slack must lie in (0, 1], got {}", cfg.slack)));
    }
    let h = case.r / cfg.nodes_per_radius as f64;
    let grid = Grid::new(case.i1.lo() + 0.5 * h, h, 2 * cfg.nodes_per_radius)?;
    let chi = SampledFunction::indicator(grid, case.i1.lo(), case.i1.hi())?;
    // the check is stated for the kernel without 1/(πi)
    let free = CauchyKernel::new(case.curve);
    let configured = CauchyKernel::with_prefactor(case.curve, cfg.prefactor);
    let plan = EvalPlan::uniform(&grid, case.i0.lo(), case.i0.hi(), 1)?;
    let op = CauchyIntegral::new(&free, &chi);
    let points = plan.points();
    let values: Vec<f64> = points.par_iter().map(|x| op.truncated(*x, 0.5 * h).norm()).collect();
    let target = case.target();
    let rhs = cfg.slack * target;
    let mut report = BoundReport::new(HOMOGENEITY_CHECK);
    let mut min_free = f64::INFINITY;
    for (x, v) in points.iter().zip(&values) {
        min_free = min_free.min(*v);
        report.push(BoundRow::lower(*x, case.i1.center(), None, PI * v, rhs));
    }
    let raw_scale = configured.prefactor().norm();
    let (near, far) = case.distance_range();
    report.metric("M", case.m);
    report.metric("r", case.r);
    report.metric("lipschitz_constant", case.curve.lipschitz_constant());
    report.metric("min_raw", raw_scale * min_free);
    report.metric("min_adjusted", PI * min_free);
    report.metric("target", target);
    report.metric("slack", cfg.slack);
    report.metric("min_distance", near);
    report.metric("max_distance", far);
    report.note(format!(
        "distance window [M r, 2 M r]: measured |y0 - y1| in [{near:?}, {far:?}]; adjusted = pi * |C(chi_I1)| with the kernel taken without 1/(pi i)"
    ));
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityRow {
    pub m: f64,
    pub min_adjusted: f64,
    pub min_raw: f64,
    pub target: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneitySweep {
    pub rows: Vec<HomogeneityRow>,
    /// Least-squares slope of `log min` against `log M`.
    pub slope: f64,
    pub slope_pass: bool,
}

impl HomogeneitySweep {
    pub fn pass(&self) -> bool {
        self.slope_pass && self.rows.iter().all(|r| r.pass)
    }
}

/// One case per `M`; the slope passes when it is within `0.1` of `-1`.
pub fn homogeneity_sweep(
    curve: LipschitzCurve,
    m_ladder: &[f64],
    r: f64,
    cfg: &HomogeneityConfig,
) -> Result<HomogeneitySweep> {
    if m_ladder.is_empty() {
        return Err(invalid("M ladder is empty"));
    }
    let rows = m_ladder
        .iter()
        .map(|m| {
            let case = HomogeneityCase::standard(curve, *m, r, 0.0)?;
            let rep = homogeneity_check(&case, cfg)?;
            Ok(HomogeneityRow {
                m: *m,
                min_adjusted: rep.get("min_adjusted").unwrap_or(f64::NAN),
                min_raw: rep.get("min_raw").unwrap_or(f64::NAN),
                target: case.target(),
                pass: rep.pass,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ms: Vec<f64> = rows.iter().map(|r| r.m).collect();
    let mins: Vec<f64> = rows.iter().map(|r| r.min_adjusted).collect();
    let slope = if rows.len() >= 2 { loglog_slope(&ms, &mins) } else { f64::NAN };
    let slope_pass = rows.len() < 2 || (slope + 1.0).abs() <= 0.1;
    Ok(HomogeneitySweep { rows, slope, slope_pass })
}
