//! Mean-zero test functions adapted to the oscillation of `b` on an
//! interval, and the annulus bounds for their commutator images.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bmo::{mean_oscillation, median_of};
use crate::commutator::Commutator;
use crate::error::{invalid, Error, Result};
use crate::kernel::CauchyKernel;
use crate::operator::{CauchyIntegral, EvalPlan};
use crate::report::{BoundReport, BoundRow};
use crate::sampling::{lp_norm, Annulus, Grid, Interval, SampledFunction};
use crate::symbol::Symbol;

/// `f = |I|^{-1/p} (χ_{b>α} - χ_{b<α} - a χ_I)` on the nodes of `I`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    /// Samples on the nodes of `base`.
    pub f: SampledFunction,
    pub base: Interval,
    /// The quadrature lattice and the window where `b` may be evaluated.
    pub window: Grid,
    pub a_j: f64,
    /// `α_I(b)`.
    pub alpha: f64,
    pub upper_set_mask: Vec<bool>,
    pub lower_set_mask: Vec<bool>,
    /// `b` at the nodes of `f`.
    pub b_values: Vec<f64>,
    pub p: f64,
    /// `M(b, I)`.
    pub epsilon: f64,
}

/// Builds the test function on the nodes of `window` inside `base`.
pub fn build_test_function(b: &dyn Symbol, window: &Grid, base: &Interval, p: f64) -> Result<TestFunction> {
    crate::sampling::check_exponent(p)?;
    check_symbol_covers(b, base)?;
    let bs = b.sample_on(window, base)?;
    let b_values: Vec<f64> = bs.values().iter().map(|v| v.re).collect();
    let sub = *bs.grid();
    let whole = Interval::from_endpoints(sub.first() - 0.5 * sub.step, sub.last() + 0.5 * sub.step)?;
    let epsilon = mean_oscillation(&bs, &whole)?;
    let scale = b_values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(epsilon > 1e-14 * scale) {
        return Err(Error::NoOscillation {
            center: base.center(),
            radius: base.radius(),
        });
    }
    let alpha = median_of(&b_values).value;
    let upper_set_mask: Vec<bool> = b_values.iter().map(|v| *v > alpha).collect();
    let lower_set_mask: Vec<bool> = b_values.iter().map(|v| *v < alpha).collect();
    let n = b_values.len();
    let n_up = upper_set_mask.iter().filter(|m| **m).count();
    let n_low = lower_set_mask.iter().filter(|m| **m).count();
    let a_j = (n_up as f64 - n_low as f64) / n as f64;
    let c = (n as f64 * sub.step).powf(-1.0 / p);
    let values = (0..n)
        .map(|i| {
            let f1 = if upper_set_mask[i] {
                1.0
            } else if lower_set_mask[i] {
                -1.0
            } else {
                0.0
            };
            Complex64::new(c * (f1 - a_j), 0.0)
        })
        .collect();
    Ok(TestFunction {
        f: SampledFunction::on_grid(sub, values)?,
        base: *base,
        window: *window,
        a_j,
        alpha,
        upper_set_mask,
        lower_set_mask,
        b_values,
        p,
        epsilon,
    })
}

fn check_symbol_covers(b: &dyn Symbol, region: &Interval) -> Result<()> {
    if let Some(g) = b.grid() {
        let lo = g.first() - 0.5 * g.step;
        let hi = g.last() + 0.5 * g.step;
        let tol = 1e-9 * g.step;
        if region.lo() < lo - tol || region.hi() > hi + tol {
            return Err(invalid(format!(
                "[{}, {}] lies outside the symbol grid window [{lo}, {hi}]",
                region.lo(),
                region.hi()
            )));
        }
    }
    Ok(())
}

fn check_window(tf: &TestFunction, region: &Interval) -> Result<()> {
    let g = &tf.window;
    let tol = 1e-9 * g.step;
    let lo = g.first() - 0.5 * g.step;
    let hi = g.last() + 0.5 * g.step;
    if region.lo() < lo - tol || region.hi() > hi + tol {
        return Err(invalid(format!(
            "[{}, {}] lies outside the grid window [{lo}, {hi}]",
            region.lo(),
            region.hi()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl InvariantCheck {
    fn at_most(value: f64, bound: f64) -> Self {
        InvariantCheck {
            value,
            bound,
            pass: value <= bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionInvariants {
    /// `|∫ f|` against `1e-10 |I|^{1-1/p}`.
    pub mean_zero: InvariantCheck,
    /// `|a_j|` against `1/2 + 1e-12`.
    pub a_bound: InvariantCheck,
    /// Distance of the farthest nonzero node outside `I` (0 when inside).
    pub support: InvariantCheck,
    /// `-min f (b - α)` against `1e-12`.
    pub sign: InvariantCheck,
    /// Largest relative excursion of `|f| |I|^{1/p}` outside `[1/2, 5/2]`
    /// on the masks.
    pub band: InvariantCheck,
}

impl TestFunctionInvariants {
    pub fn pass(&self) -> bool {
        self.mean_zero.pass && self.a_bound.pass && self.support.pass && self.sign.pass && self.band.pass
    }
}

impl TestFunction {
    /// `|I|` as the discrete measure of its nodes.
    pub fn measure(&self) -> f64 {
        self.f.len() as f64 * self.f.step()
    }

    pub fn lp_norm(&self) -> f64 {
        lp_norm(&self.f, self.p, None).map(|n| n.value).unwrap_or(f64::NAN)
    }

    /// Fraction of the nodes covered by the two masks.
    pub fn mask_fraction(&self) -> f64 {
        let n = self.upper_set_mask.iter().zip(&self.lower_set_mask).filter(|(u, l)| **u || **l).count();
        n as f64 / self.f.len() as f64
    }

    pub fn invariants(&self) -> TestFunctionInvariants {
        let h = self.f.step();
        let m = self.measure();
        let integral: f64 = self.f.values().iter().map(|v| v.re).sum::<f64>() * h;
        let mean_zero = InvariantCheck::at_most(integral.abs(), 1e-10 * m.powf(1.0 - 1.0 / self.p));
        let a_bound = InvariantCheck::at_most(self.a_j.abs(), 0.5 + 1e-12);
        let tol = 1e-9 * h;
        let outside = (0..self.f.len())
            .filter(|i| self.f.values()[*i].norm() != 0.0)
            .map(|i| {
                let y = self.f.node(i);
                (self.base.lo() - tol - y).max(y - self.base.hi()).max(0.0)
            })
            .fold(0.0, f64::max);
        let support = InvariantCheck::at_most(outside, 0.0);
        let worst_sign = self
            .f
            .values()
            .iter()
            .zip(&self.b_values)
            .map(|(f, b)| f.re * (b - self.alpha))
            .fold(f64::INFINITY, f64::min);
        let sign = InvariantCheck::at_most(-worst_sign.min(0.0), 1e-12);
        let c = m.powf(-1.0 / self.p);
        let excursion = (0..self.f.len())
            .filter(|i| self.upper_set_mask[*i] || self.lower_set_mask[*i])
            .map(|i| {
                let t = self.f.values()[i].norm() / c;
                (0.5 * (1.0 - 1e-12) - t).max(t - 2.5).max(0.0)
            })
            .fold(0.0, f64::max);
        let band = InvariantCheck::at_most(excursion, 0.0);
        TestFunctionInvariants {
            mean_zero,
            a_bound,
            support,
            sign,
            band,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusConfig {
    /// `A_1 > 4`; annuli start at `k = floor(log2 A_1)`.
    pub a1: f64,
    /// Approximate number of evaluation points per annulus.
    pub points_per_annulus: usize,
}

impl Default for AnnulusConfig {
    fn default() -> Self {
        AnnulusConfig {
            a1: 8.0,
            points_per_annulus: 512,
        }
    }
}

impl AnnulusConfig {
    pub fn min_k(&self) -> u32 {
        self.a1.log2().floor() as u32
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a1.is_finite() && self.a1 > 4.0) {
            return Err(invalid(format!("A1 must exceed 4, got {}", self.a1)));
        }
        if self.points_per_annulus == 0 {
            return Err(invalid("points_per_annulus must be positive"));
        }
        Ok(())
    }

    fn check_k(&self, k: u32) -> Result<()> {
        self.validate()?;
        if k < self.min_k() {
            return Err(invalid(format!("k = {k} is below floor(log2 A1) = {}", self.min_k())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusBoundReport {
    pub k: u32,
    pub side: Side,
    /// `∫ |[b, C] f|^p` over the annulus (lower) or the shell (upper).
    pub lhs: f64,
    /// `|I|^{p-1} / |2^k I|^{p-1} = 2^{-k(p-1)}`.
    pub normalizer: f64,
    pub ratio: f64,
    /// `ratio / ε^p` on the lower side and `ratio` on the upper side: the
    /// empirical constants.
    pub constant: f64,
    pub points: usize,
}

fn region_plan(tf: &TestFunction, region: &Interval, points: usize) -> Result<EvalPlan> {
    let h = tf.f.step();
    let cells = (region.measure() / h).round().max(1.0) as usize;
    let mut stride = 1usize;
    while stride * 2 * points <= cells {
        stride *= 2;
    }
    EvalPlan::uniform(tf.f.grid(), region.lo(), region.hi(), stride)
}

fn region_integral(
    b: &dyn Symbol,
    tf: &TestFunction,
    kernel: &CauchyKernel,
    regions: &[Interval],
    points: usize,
) -> Result<(f64, usize)> {
    let comm = Commutator::new(b, &tf.f, kernel)?;
    let mut total = 0.0;
    let mut count = 0;
    for region in regions {
        check_window(tf, region)?;
        check_symbol_covers(b, region)?;
        let plan = region_plan(tf, region, points)?;
        count += plan.len();
        total += plan.evaluate(|x| Ok(comm.at(x)))?.power_integral(tf.p);
    }
    Ok((total, count))
}

fn annulus_report(
    b: &dyn Symbol,
    tf: &TestFunction,
    k: u32,
    kernel: &CauchyKernel,
    cfg: &AnnulusConfig,
    side: Side,
) -> Result<AnnulusBoundReport> {
    cfg.check_k(k)?;
    let ann = Annulus::new(tf.base, k)?;
    let regions: Vec<Interval> = match side {
        Side::Lower => vec![ann.interval()],
        Side::Upper => ann.shell().to_vec(),
    };
    let (lhs, points) = region_integral(b, tf, kernel, &regions, cfg.points_per_annulus)?;
    let normalizer = 2f64.powf(-(k as f64) * (tf.p - 1.0));
    let ratio = lhs / normalizer;
    let constant = match side {
        Side::Lower => ratio / tf.epsilon.powf(tf.p),
        Side::Upper => ratio,
    };
    Ok(AnnulusBoundReport {
        k,
        side,
        lhs,
        normalizer,
        ratio,
        constant,
        points,
    })
}

/// `∫_{I^k} |[b, C] f|^p` over `I^k = (x + 2^k r, x + 2^{k+1} r)`.
pub fn verify_annulus_lower(
    b: &dyn Symbol,
    tf: &TestFunction,
    k: u32,
    kernel: &CauchyKernel,
    cfg: &AnnulusConfig,
) -> Result<AnnulusBoundReport> {
    annulus_report(b, tf, k, kernel, cfg, Side::Lower)
}

/// `∫_{2^{k+1} I \ 2^k I} |[b, C] f|^p`.
pub fn verify_annulus_upper(
    b: &dyn Symbol,
    tf: &TestFunction,
    k: u32,
    kernel: &CauchyKernel,
    cfg: &AnnulusConfig,
) -> Result<AnnulusBoundReport> {
    annulus_report(b, tf, k, kernel, cfg, Side::Upper)
}

/// Both sides over a `k` ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusLadder {
    pub lower: Vec<AnnulusBoundReport>,
    pub upper: Vec<AnnulusBoundReport>,
    /// max/min of the lower constants.
    pub lower_spread: f64,
    /// max/min of the upper ratios.
    pub upper_spread: f64,
    pub pass: bool,
}

pub const LOWER_SPREAD_LIMIT: f64 = 3.0;
pub const UPPER_SPREAD_LIMIT: f64 = 10.0;

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > 0.0 {
        hi / lo
    } else if hi == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

impl AnnulusLadder {
    /// Smallest lower constant: the empirical `C̃_1`.
    pub fn c1(&self) -> f64 {
        self.lower.iter().map(|r| r.constant).fold(f64::INFINITY, f64::min)
    }

    /// Largest upper ratio: the empirical `C̃_2`.
    pub fn c2(&self) -> f64 {
        self.upper.iter().map(|r| r.constant).fold(0.0, f64::max)
    }
}

pub fn annulus_ladder(
    b: &dyn Symbol,
    tf: &TestFunction,
    ks: &[u32],
    kernel: &CauchyKernel,
    cfg: &AnnulusConfig,
) -> Result<AnnulusLadder> {
    if ks.is_empty() {
        return Err(invalid("k ladder is empty"));
    }
    let rows = ks
        .par_iter()
        .map(|k| {
            Ok((
                verify_annulus_lower(b, tf, *k, kernel, cfg)?,
                verify_annulus_upper(b, tf, *k, kernel, cfg)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (lower, upper): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let lower_spread = spread(lower.iter().map(|r| r.constant));
    let upper_spread = spread(upper.iter().map(|r| r.constant));
    let pass = lower_spread <= LOWER_SPREAD_LIMIT
        && upper_spread <= UPPER_SPREAD_LIMIT
        && lower.iter().all(|r| r.constant > 0.0);
    Ok(AnnulusLadder {
        lower,
        upper,
        lower_spread,
        upper_spread,
        pass,
    })
}

pub const POINTWISE_CHECK: &str =
    "|(b(y)-alpha_I(b)) C f(y)| <= 2(L+1) r |I|^{1/p'} |b(y)-alpha_I(b)| / |x-y|^2 (sup|f| |I|^{1/p} folded in)";
pub const DRIFT_CHECK: &str = "|alpha_{2^{k+1}I}(b) - alpha_I(b)| <= 3.3 (k+1) max_m M(b, 2^m I)";

/// Slack on the pointwise majorant.
pub const POINTWISE_SLACK: f64 = 1.1;
/// Each dyadic step moves the median by at most `3 max M(b, 2^m I)`; the
/// extra 10% absorbs the node-count rounding of the dilates.
pub const DRIFT_FACTOR: f64 = 3.3;

/// Pointwise control of `B = (b - α) C f` on `I^k` and the drift of the
/// median along the dilates `2^m I`, `0 <= m <= k + 1`.
pub fn verify_intermediate_bounds(
    b: &dyn Symbol,
    tf: &TestFunction,
    k: u32,
    kernel: &CauchyKernel,
    cfg: &AnnulusConfig,
) -> Result<BoundReport> {
    cfg.check_k(k)?;
    let region = Annulus::new(tf.base, k)?.interval();
    check_window(tf, &region)?;
    check_symbol_covers(b, &region)?;
    let outer = tf.base.dilate(2f64.powi(k as i32 + 1));
    check_window(tf, &outer)?;
    check_symbol_covers(b, &outer)?;

    let own = b.sample_on(&tf.window, &tf.base)?;
    let own: Vec<f64> = own.values().iter().map(|v| v.re).collect();
    let alpha = median_of(&own).value;
    let m = tf.measure();
    let p = tf.p;
    let sup_f = tf.f.values().iter().fold(0.0f64, |s, v| s.max(v.norm()));
    let l = kernel.curve().lipschitz_constant();
    let constant = 2.0 * (l + 1.0) * kernel.prefactor().norm() * sup_f * m.powf(1.0 / p);
    let r = tf.base.radius();
    let xj = tf.base.center();
    let op = CauchyIntegral::new(kernel, &tf.f);
    let plan = region_plan(tf, &region, cfg.points_per_annulus)?;
    let points = plan.points();
    let rows: Vec<BoundRow> = points
        .par_iter()
        .map(|y| {
            let db = b.value(*y) - alpha;
            let lhs = (op.truncated(*y, 0.0) * db).norm();
            let rhs = constant * r * m.powf(1.0 - 1.0 / p) * db.abs() / (xj - y).powi(2);
            BoundRow::upper(*y, xj, None, lhs, POINTWISE_SLACK * rhs)
        })
        .collect();
    let mut report = BoundReport::new(format!("{POINTWISE_CHECK}; {DRIFT_CHECK}"));
    for row in rows {
        report.push(row);
    }
    let pointwise_violations = report.violations();
    let worst = report.worst_ratio();

    let mut alphas = Vec::new();
    let mut beta = 0.0f64;
    for mm in 0..=k + 1 {
        let d = tf.base.dilate(2f64.powi(mm as i32));
        let s = b.sample_on(&tf.window, &d)?;
        let v: Vec<f64> = s.values().iter().map(|v| v.re).collect();
        alphas.push(median_of(&v).value);
        let whole = Interval::from_endpoints(s.grid().first() - 0.5 * s.step(), s.grid().last() + 0.5 * s.step())?;
        beta = beta.max(mean_oscillation(&s, &whole)?);
    }
    let drift = (alphas[k as usize + 1] - alphas[0]).abs();
    let drift_rhs = DRIFT_FACTOR * (k as f64 + 1.0) * beta;
    report.push(BoundRow::upper(xj, r, None, drift, drift_rhs));
    report.metric("k", k as f64);
    report.metric("pointwise_violations", pointwise_violations as f64);
    report.metric("pointwise_worst_ratio", worst);
    report.metric("pointwise_constant", constant);
    report.metric("drift", drift);
    report.metric("drift_bound", drift_rhs);
    report.metric("bmo_over_dilates", beta);
    report.metric("drift_constant", if k > 0 && beta > 0.0 { drift / (k as f64 * beta) } else { 0.0 });
    report.note("the last row is the median drift; the others are pointwise on the annulus");
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::LipschitzCurve;
    use crate::symbol::SymbolSpec;
    use proptest::prelude::*;

    /// A window of `2^(kmax+2) r` around `x`, step `r / n`, with a node at `x`.
    fn window(x: f64, r: f64, n: usize, kmax: i32) -> Grid {
        let h = r / n as f64;
        let half = (2f64.powi(kmax + 2) * n as f64) as usize;
        Grid::new(x - half as f64 * h, h, 2 * half + 1).unwrap()
    }

    fn flat() -> CauchyKernel {
        CauchyKernel::new(LipschitzCurve::flat())
    }

    #[test]
    fn sign_example() {
        let base = Interval::new(0.0, 1.0).unwrap();
        // r = 64.5 h puts a node at the centre and 64 on each side
        let h = 1.0 / 64.5;
        let g = Grid::new(-129.0 * h, h, 259).unwrap();
        let b = SymbolSpec::Sign { center: 0.0 };
        let tf = build_test_function(&b, &g, &base, 2.0).unwrap();
        assert_eq!(tf.alpha, 0.0);
        assert!(tf.a_j.abs() <= 2.0 * g.step / 2.0);
        let c = tf.measure().powf(-0.5);
        for i in 0..tf.f.len() {
            let y = tf.f.node(i);
            let v = tf.f.values()[i].re;
            if y > 0.0 {
                assert!((v - c).abs() < 1e-12);
            } else if y < 0.0 {
                assert!((v + c).abs() < 1e-12);
            }
        }
        assert!(tf.invariants().pass());
        assert!((tf.epsilon - 1.0).abs() < 4.0 * g.step);
    }

    #[test]
    fn sign_without_centre_node_uses_lower_median() {
        let base = Interval::new(0.0, 1.0).unwrap();
        let g = Grid::covering(-4.0, 4.0, 1.0 / 64.0).unwrap();
        let tf = build_test_function(&SymbolSpec::Sign { center: 0.0 }, &g, &base, 2.0).unwrap();
        assert_eq!(tf.alpha, -1.0);
        assert_eq!(tf.a_j, 0.5);
        assert!(tf.invariants().pass());
    }

    #[test]
    fn constant_symbol_is_rejected() {
        let g = window(0.0, 1.0, 16, 2);
        let base = Interval::new(0.0, 1.0).unwrap();
        let r = build_test_function(&SymbolSpec::Constant { value: 3.0 }, &g, &base, 2.0);
        assert!(matches!(r, Err(Error::NoOscillation { .. })));
    }

    #[test]
    fn annulus_rejects_small_k_and_outside_window() {
        let g = window(0.0, 1.0, 32, 3);
        let base = Interval::new(0.0, 1.0).unwrap();
        let b = SymbolSpec::Sign { center: 0.0 };
        let tf = build_test_function(&b, &g, &base, 2.0).unwrap();
        let cfg = AnnulusConfig::default();
        assert!(verify_annulus_lower(&b, &tf, 2, &flat(), &cfg).is_err());
        assert!(verify_annulus_lower(&b, &tf, 3, &flat(), &cfg).is_ok());
        assert!(verify_annulus_upper(&b, &tf, 5, &flat(), &cfg).is_err());
        let bad = AnnulusConfig { a1: 4.0, ..cfg };
        assert!(verify_annulus_lower(&b, &tf, 3, &flat(), &bad).is_err());
    }

    #[test]
    fn constant_symbol_gives_zero_lhs() {
        let g = window(0.0, 1.0, 32, 4);
        let base = Interval::new(0.0, 1.0).unwrap();
        let tf = build_test_function(&SymbolSpec::Sign { center: 0.0 }, &g, &base, 2.0).unwrap();
        let c = SymbolSpec::Constant { value: 2.0 };
        let cfg = AnnulusConfig::default();
        assert_eq!(verify_annulus_upper(&c, &tf, 3, &flat(), &cfg).unwrap().lhs, 0.0);
        let rep = verify_intermediate_bounds(&c, &tf, 3, &flat(), &cfg).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.get("drift").unwrap(), 0.0);
    }

    #[test]
    fn normalizer_is_exact() {
        let g = window(0.0, 1.0, 16, 5);
        let base = Interval::new(0.0, 1.0).unwrap();
        let b = SymbolSpec::TruncatedLog { center: 0.0, floor: -30.0 };
        let tf = build_test_function(&b, &g, &base, 3.0).unwrap();
        let rep = verify_annulus_lower(&b, &tf, 4, &flat(), &AnnulusConfig::default()).unwrap();
        assert_eq!(rep.normalizer, 2f64.powi(-8));
        assert!(rep.lhs >= 0.0);
    }

    #[test]
    fn sign_lower_ladder_is_stable() {
        let g = window(0.0, 1.0, 64, 5);
        let base = Interval::new(0.0, 1.0).unwrap();
        let b = SymbolSpec::Sign { center: 0.0 };
        let tf = build_test_function(&b, &g, &base, 2.0).unwrap();
        let lad = annulus_ladder(&b, &tf, &[3, 4, 5], &flat(), &AnnulusConfig::default()).unwrap();
        assert!(lad.c1() > 0.0);
        assert!(lad.lower_spread <= 3.0, "{lad:?}");
    }

    #[test]
    fn lower_constant_is_scale_invariant() {
        let b = SymbolSpec::Sign { center: 0.0 };
        let c = |r: f64| {
            let g = window(0.0, r, 64, 4);
            let tf = build_test_function(&b, &g, &Interval::new(0.0, r).unwrap(), 2.0).unwrap();
            verify_annulus_lower(&b, &tf, 4, &flat(), &AnnulusConfig::default()).unwrap().constant
        };
        let (a, d) = (c(1.0), c(2.0));
        assert!((a - d).abs() <= 0.1 * a, "{a} {d}");
    }

    #[test]
    fn upper_ladder_bounded_and_decays() {
        let g = window(0.0, 1.0, 16, 8);
        let base = Interval::new(0.0, 1.0).unwrap();
        let b = SymbolSpec::TruncatedLog { center: 0.0, floor: -30.0 };
        let tf = build_test_function(&b, &g, &base, 2.0).unwrap();
        let ks: Vec<u32> = (3..=8).collect();
        let lad = annulus_ladder(&b, &tf, &ks, &flat(), &AnnulusConfig::default()).unwrap();
        assert!(lad.upper_spread <= 10.0, "{lad:?}");
        for w in lad.upper.windows(2) {
            let rate = w[0].lhs / w[1].lhs;
            assert!((0.5..=8.0).contains(&rate), "{rate}");
        }
    }

    #[test]
    fn intermediate_bounds_sign_and_log() {
        let g = window(0.0, 1.0, 64, 8);
        let base = Interval::new(0.0, 1.0).unwrap();
        let cfg = AnnulusConfig::default();
        let sign = SymbolSpec::Sign { center: 0.0 };
        let tf = build_test_function(&sign, &g, &base, 2.0).unwrap();
        let rep = verify_intermediate_bounds(&sign, &tf, 4, &flat(), &cfg).unwrap();
        assert_eq!(rep.get("pointwise_violations").unwrap(), 0.0);
        let log = SymbolSpec::TruncatedLog { center: 0.0, floor: -30.0 };
        let tf = build_test_function(&log, &g, &base, 2.0).unwrap();
        let mut per_k = Vec::new();
        for k in 3..=7 {
            let rep = verify_intermediate_bounds(&log, &tf, k, &flat(), &cfg).unwrap();
            assert!(rep.pass, "{k}");
            per_k.push(rep.get("drift").unwrap() / k as f64);
        }
        let hi = per_k.iter().cloned().fold(0.0, f64::max);
        assert!(hi < 2.0, "{per_k:?}");
    }

    fn arb_symbol() -> impl Strategy<Value = SymbolSpec> {
        prop_oneof![
            (-0.5f64..0.5).prop_map(|c| SymbolSpec::Sign { center: c }),
            (-0.5f64..0.5).prop_map(|c| SymbolSpec::TruncatedLog { center: c, floor: -30.0 }),
            prop::collection::vec(-3.0f64..3.0, 2..6).prop_flat_map(|vals| {
                let n = vals.len();
                prop::collection::vec(-0.9f64..0.9, n - 1).prop_map(move |mut br| {
                    br.sort_by(f64::total_cmp);
                    SymbolSpec::PiecewiseConstant {
                        breaks: br,
                        values: vals.clone(),
                    }
                })
            }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn invariants_hold(b in arb_symbol(), x in -0.2f64..0.2, r in 0.2f64..1.0, p in 1.2f64..4.0, n in 8usize..200) {
            let g = Grid::covering(-3.0, 3.0, r / n as f64).unwrap();
            let base = Interval::new(x, r).unwrap();
            match build_test_function(&b, &g, &base, p) {
                Ok(tf) => {
                    let inv = tf.invariants();
                    prop_assert!(inv.pass(), "{:?}", inv);
                    prop_assert!(tf.lp_norm() <= 2.5 + 1e-9);
                    prop_assert!(tf.lp_norm() >= 0.5 * tf.mask_fraction().powf(1.0 / p) - 1e-9);
                }
                Err(Error::NoOscillation { .. }) => {}
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }
}
