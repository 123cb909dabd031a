//! Fréchet–Kolmogorov diagnostics for commutator images and separated
//! sequences witnessing non-compactness.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bmo::mean_oscillation;
use crate::commutator::Commutator;
use crate::error::{invalid, Error, Result};
use crate::kernel::CauchyKernel;
use crate::operator::EvalPlan;
use crate::report::{fmt_f64, loglog_slope, BoundReport, BoundRow};
use crate::sampling::{check_exponent, steps_in, Grid, Interval, PatchedFunction, SampledFunction};
use crate::symbol::Symbol;
use crate::testfn::{build_test_function, verify_annulus_lower, verify_annulus_upper, AnnulusConfig, TestFunction};

/// The three Fréchet–Kolmogorov quantities over a finite image set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkReport {
    /// `max ‖g‖_p`.
    pub uniform_bound: f64,
    /// `(t, max ‖g‖_{L^p(|x|>t)})`, `t` ascending.
    pub tail_curve: Vec<(f64, f64)>,
    /// `(|z|, max ‖g(·+z) - g‖_p)`, `|z|` ascending.
    pub equicontinuity_curve: Vec<(f64, f64)>,
}

impl FkReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# check: Frechet-Kolmogorov (a) sup ||g||_p, (b) sup ||g||_Lp(|x|>t), (c) sup ||g(.+z)-g||_p")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["curve", "parameter", "value"])?;
        w.write_record(["uniform_bound", "", &fmt_f64(self.uniform_bound)])?;
        for (t, v) in &self.tail_curve {
            w.write_record(["tail", &fmt_f64(*t), &fmt_f64(*v)])?;
        }
        for (z, v) in &self.equicontinuity_curve {
            w.write_record(["equicontinuity", &fmt_f64(*z), &fmt_f64(*v)])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn power_sum_where(g: &SampledFunction, p: f64, keep: impl Fn(f64) -> bool) -> f64 {
    (0..g.len())
        .filter(|i| keep(g.node(*i)))
        .map(|i| g.values()[i].norm().powf(p))
        .sum::<f64>()
        * g.step()
}

/// `‖g(· + z) - g‖_p` with zero extension; `z` must be a multiple of the step.
pub fn shift_difference(g: &SampledFunction, z: f64, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let s = steps_in(z, g.step(), "shift z")?;
    let n = g.len() as i64;
    let lo = (-s).min(0);
    let hi = n + (-s).max(0);
    let sum: f64 = (lo..hi).map(|i| (g.at_index(i + s) - g.at_index(i)).norm().powf(p)).sum();
    Ok((sum * g.step()).powf(1.0 / p))
}

pub fn fk_diagnose(images: &[SampledFunction], p: f64, t_ladder: &[f64], z_ladder: &[f64]) -> Result<FkReport> {
    check_exponent(p)?;
    if images.is_empty() {
        return Err(invalid("image set is empty"));
    }
    if t_ladder.is_empty() || t_ladder.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(invalid("tail ladder must be non-empty with finite t >= 0"));
    }
    if z_ladder.is_empty() || z_ladder.iter().any(|z| !(z.is_finite() && *z != 0.0)) {
        return Err(invalid("shift ladder must be non-empty with finite nonzero z"));
    }
    let uniform_bound = images
        .iter()
        .map(|g| power_sum_where(g, p, |_| true).powf(1.0 / p))
        .fold(0.0, f64::max);
    let mut ts = t_ladder.to_vec();
    ts.sort_by(f64::total_cmp);
    let tail_curve = ts
        .par_iter()
        .map(|t| {
            let v = images
                .iter()
                .map(|g| power_sum_where(g, p, |x| x.abs() > *t).powf(1.0 / p))
                .fold(0.0, f64::max);
            (*t, v)
        })
        .collect();
    let mut zs = z_ladder.to_vec();
    zs.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let equicontinuity_curve = zs
        .par_iter()
        .map(|z| {
            let v = images
                .iter()
                .map(|g| shift_difference(g, *z, p))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            Ok((z.abs(), v))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FkReport {
        uniform_bound,
        tail_curve,
        equicontinuity_curve,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailConfig {
    /// `b` must vanish outside `I(0, R)`.
    pub radius: f64,
    /// Evaluation points per unit of relative distance.
    pub resolution: f64,
    /// The image is integrated over `I(0, outer_factor R)`.
    pub outer_factor: f64,
}

impl TailConfig {
    pub fn new(radius: f64) -> Self {
        TailConfig {
            radius,
            resolution: 32.0,
            outer_factor: 65536.0,
        }
    }
}

pub const TAIL_CHECK: &str = "||[b,C]f||_Lp(|x|>tR) <~ t^{-1/p'}";

/// Tolerance on the fitted slope.
pub const TAIL_SLOPE_TOLERANCE: f64 = 0.15;

/// `max_f ‖[b, C] f‖_{L^p(|x| > tR)}` for each `t`, with the log-log slope
/// against `-1/p'`. Rows compare each tail with the line of that slope
/// through the first one and pass within a factor 2.
pub fn tail_decay_check(
    b: &dyn Symbol,
    family: &[SampledFunction],
    p: f64,
    t_ladder: &[f64],
    kernel: &CauchyKernel,
    cfg: &TailConfig,
) -> Result<BoundReport> {
    check_exponent(p)?;
    if family.is_empty() {
        return Err(invalid("tail check needs a non-empty family"));
    }
    let r = cfg.radius;
    if !(r.is_finite() && r > 0.0) || !(cfg.outer_factor > 2.0) {
        return Err(invalid("tail check needs R > 0 and an outer factor above 2"));
    }
    if t_ladder.is_empty() || t_ladder.iter().any(|t| !(t.is_finite() && *t > 2.0)) {
        return Err(invalid("tail ladder entries must exceed 2"));
    }
    let ball = Interval::new(0.0, r)?;
    match b.support() {
        Some(s) if s.lo() >= ball.lo() - 1e-12 * r && s.hi() <= ball.hi() + 1e-12 * r => {}
        Some(s) => {
            return Err(invalid(format!(
                "symbol support [{}, {}] is not inside I(0, {r})",
                s.lo(),
                s.hi()
            )))
        }
        None => return Err(invalid("symbol has no bounded support")),
    }
    let mut ts = t_ladder.to_vec();
    ts.sort_by(f64::total_cmp);
    let window = Interval::new(0.0, cfg.outer_factor * r)?;
    if ts.last().copied().unwrap_or(0.0) * r >= window.hi() {
        return Err(invalid("largest t reaches the outer window"));
    }
    let breaks: Vec<f64> = ts.iter().flat_map(|t| [-t * r, t * r]).collect();
    let mut tails = vec![0.0f64; ts.len()];
    for f in family {
        let mut sources = vec![ball];
        if let Some(s) = f.support() {
            let h = f.step();
            sources.push(Interval::from_endpoints(f.node(s.start) - 0.5 * h, f.node(s.end - 1) + 0.5 * h)?);
        }
        let plan = EvalPlan::adaptive(f.grid(), &sources, &window, cfg.resolution, &breaks)?;
        let comm = Commutator::new(b, f, kernel)?;
        let image = plan.evaluate(|x| Ok(comm.at(x)))?;
        for (k, t) in ts.iter().enumerate() {
            let v = image.power_integral_where(p, |x| x.abs() > t * r).powf(1.0 / p);
            tails[k] = tails[k].max(v);
        }
    }
    let p_dual = p / (p - 1.0);
    let target = -1.0 / p_dual;
    let mut report = BoundReport::new(TAIL_CHECK);
    let zero = tails.iter().all(|v| *v == 0.0);
    for (t, v) in ts.iter().zip(&tails) {
        let reference = tails[0] * (t / ts[0]).powf(target);
        let within = if zero {
            true
        } else {
            *v > 0.0 && (v / reference).ln().abs() <= 2f64.ln()
        };
        report.push(BoundRow {
            x: *t,
            y: r,
            y_prime: None,
            lhs: *v,
            rhs: reference,
            pass: within,
        });
        report.metric(&format!("tail[t={}]", fmt_f64(*t)), *v);
    }
    report.metric("target_slope", target);
    if zero {
        report.note("all tails vanish");
    } else if ts.len() >= 2 {
        let slope = loglog_slope(&ts, &tails);
        report.metric("slope", slope);
        if !((slope - target).abs() <= TAIL_SLOPE_TOLERANCE) {
            report.fail();
        }
    }
    report.note(format!(
        "image integrated over |x| < {:?}; tails beyond are not included",
        window.hi()
    ));
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessCase {
    /// `|I_{l+1}| / |I_l| < 1/A_2`.
    SmallScale,
    /// `|I_l| / |I_{l+1}| < 1/A_2`.
    LargeScale,
    /// `A_2 I_l ∩ A_2 I_m = ∅`.
    FarAway,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessConfig {
    pub case: WitnessCase,
    pub a1: f64,
    pub a2: f64,
    pub intervals: Vec<Interval>,
    pub p: f64,
}

impl WitnessConfig {
    pub fn validate(&self) -> Result<()> {
        check_exponent(self.p)?;
        if !(self.a1.is_finite() && self.a1 > 4.0) {
            return Err(invalid(format!("A1 must exceed 4, got {}", self.a1)));
        }
        if !(self.a2.is_finite() && self.a2 > self.a1) {
            return Err(invalid(format!("A2 must exceed A1 = {}, got {}", self.a1, self.a2)));
        }
        if self.intervals.len() < 2 {
            return Err(invalid("a witness sequence needs at least two intervals"));
        }
        let iv = &self.intervals;
        match self.case {
            WitnessCase::SmallScale => {
                for (l, w) in iv.windows(2).enumerate() {
                    let q = w[1].measure() / w[0].measure();
                    if !(q < 1.0 / self.a2) {
                        return Err(invalid(format!(
                            "|I_{}|/|I_{}| = {q} is not below 1/A2 = {}",
                            l + 1,
                            l,
                            1.0 / self.a2
                        )));
                    }
                }
            }
            WitnessCase::LargeScale => {
                for (l, w) in iv.windows(2).enumerate() {
                    let q = w[0].measure() / w[1].measure();
                    if !(q < 1.0 / self.a2) {
                        return Err(invalid(format!(
                            "|I_{}|/|I_{}| = {q} is not below 1/A2 = {}",
                            l,
                            l + 1,
                            1.0 / self.a2
                        )));
                    }
                }
            }
            WitnessCase::FarAway => {
                for l in 0..iv.len() {
                    for m in l + 1..iv.len() {
                        if !iv[l].dilate(self.a2).is_disjoint(&iv[m].dilate(self.a2)) {
                            return Err(invalid(format!("A2-dilates of intervals {l} and {m} intersect")));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// `I(c, r_1 q^{-l})`, `l = 0..len`.
pub fn small_scale_sequence(center: f64, r1: f64, q: f64, len: usize) -> Result<Vec<Interval>> {
    (0..len).map(|l| Interval::new(center, r1 * q.powi(-(l as i32)))).collect()
}

/// `I(c, r_1 q^l)`, `l = 0..len`.
pub fn large_scale_sequence(center: f64, r1: f64, q: f64, len: usize) -> Result<Vec<Interval>> {
    (0..len).map(|l| Interval::new(center, r1 * q.powi(l as i32))).collect()
}

/// Intervals `I(R_j + r, r)` with `R_1 = 2 C_ε` and
/// `R_j = |x_{j-1}| + 4 A_2 C_ε`; requires `r <= C_ε`.
pub fn far_away_sequence(a2: f64, c_eps: f64, r: f64, len: usize) -> Result<Vec<Interval>> {
    if !(r > 0.0 && r <= c_eps) {
        return Err(invalid(format!("far-away radius {r} must lie in (0, C_eps = {c_eps}]")));
    }
    let mut out: Vec<Interval> = Vec::with_capacity(len);
    let mut big_r = 2.0 * c_eps;
    for _ in 0..len {
        let i = Interval::new(big_r + r, r)?;
        big_r = i.center().abs() + 4.0 * a2 * c_eps;
        out.push(i);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessOptions {
    /// Quadrature step shared by all test functions.
    pub step: f64,
    /// Adaptive plan resolution.
    pub resolution: f64,
    /// The images are integrated over `I(c, window_factor × extent)`, where
    /// `I(c, extent)` is the hull of the sequence.
    pub window_factor: f64,
    /// `M(b, I_l)` must exceed this for every interval.
    pub min_oscillation: f64,
    /// Estimate `C̃_1`, `C̃_2` from annuli `k0..=k0+2`, `k0 = floor(log2 A1)`.
    pub estimate_constants: bool,
    pub points_per_annulus: usize,
}

impl WitnessOptions {
    pub fn for_step(step: f64) -> Self {
        WitnessOptions {
            step,
            resolution: 32.0,
            window_factor: 256.0,
            min_oscillation: 0.0,
            estimate_constants: true,
            points_per_annulus: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub case: WitnessCase,
    pub distances: Vec<Vec<f64>>,
    pub min_off_diagonal: f64,
    pub image_norms: Vec<f64>,
    /// `M(b, I_l)` per interval.
    pub oscillations: Vec<f64>,
    /// `min_l M(b, I_l)`.
    pub epsilon: f64,
    pub c1: f64,
    pub c2: f64,
    /// `8^{1-p} C̃_1 ε^p A_1^{1-p}`.
    pub a3: f64,
    /// Smallest power of two above `A_1` with
    /// `A_3 > 2 C̃_2 / (1 - 2^{1-p}) 2^{-floor(log2 A_2)(p-1)}`.
    pub suggested_a2: f64,
    pub plan_points: usize,
    pub notes: Vec<String>,
}

impl WitnessReport {
    pub fn write_matrix_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# check: ||[b,C]f_l - [b,C]f_m||_p >~ A3^(1/p)")?;
        let mut w = csv::Writer::from_writer(out);
        let n = self.distances.len();
        let mut header = vec!["l".to_string()];
        header.extend((0..n).map(|m| m.to_string()));
        w.write_record(&header)?;
        for (l, row) in self.distances.iter().enumerate() {
            let mut rec = vec![l.to_string()];
            rec.extend(row.iter().map(|v| fmt_f64(*v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn suggested_a2(a1: f64, a3: f64, c2: f64, p: f64) -> f64 {
    if !(a3 > 0.0) || !c2.is_finite() {
        return f64::INFINITY;
    }
    let lead = 2.0 * c2 / (1.0 - 2f64.powf(1.0 - p));
    let mut m = a1.log2().floor() as i32 + 1;
    while m < 1024 {
        let a2 = 2f64.powi(m);
        if a2 > a1 && a3 > lead * 2f64.powf(-(m as f64) * (p - 1.0)) {
            return a2;
        }
        m += 1;
    }
    f64::INFINITY
}

/// Pairwise distances between commutator images of the test functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageDistances {
    pub distances: Vec<Vec<f64>>,
    pub min_off_diagonal: f64,
    pub image_norms: Vec<f64>,
    /// `M(b, I_l)` per interval.
    pub oscillations: Vec<f64>,
    pub plan_points: usize,
    /// The integration window of the images.
    pub window: Interval,
}

/// Builds `f_l` on each interval, applies the commutator on one shared plan
/// and returns all pairwise `L^p` distances. No geometry is imposed on the
/// intervals.
pub fn image_distances(
    b: &dyn Symbol,
    intervals: &[Interval],
    p: f64,
    kernel: &CauchyKernel,
    opts: &WitnessOptions,
) -> Result<ImageDistances> {
    Ok(image_engine(b, intervals, p, kernel, opts)?.0)
}

fn image_engine(
    b: &dyn Symbol,
    intervals: &[Interval],
    p: f64,
    kernel: &CauchyKernel,
    opts: &WitnessOptions,
) -> Result<(ImageDistances, Vec<TestFunction>)> {
    check_exponent(p)?;
    if intervals.is_empty() {
        return Err(invalid("interval sequence is empty"));
    }
    let h = opts.step;
    if !(h.is_finite() && h > 0.0) {
        return Err(invalid(format!("quadrature step must be positive, got {h}")));
    }
    let lo = intervals.iter().map(|i| i.lo()).fold(f64::INFINITY, f64::min);
    let hi = intervals.iter().map(|i| i.hi()).fold(f64::NEG_INFINITY, f64::max);
    let hull = Interval::from_endpoints(lo, hi)?;
    let window = Interval::new(hull.center(), opts.window_factor.max(2.0) * hull.radius())?;
    let lattice = Grid::covering(window.lo(), window.hi(), h)?;
    for (l, i) in intervals.iter().enumerate() {
        if i.radius() < h {
            return Err(invalid(format!("interval {l} has radius {} below the step {h}", i.radius())));
        }
    }
    let mut tfs = Vec::with_capacity(intervals.len());
    let mut oscillations = Vec::with_capacity(intervals.len());
    for (index, i) in intervals.iter().enumerate() {
        let s = b.sample_on(&lattice, i)?;
        let whole = Interval::from_endpoints(s.grid().first() - 0.5 * h, s.grid().last() + 0.5 * h)?;
        let osc = mean_oscillation(&s, &whole)?;
        let weak = Error::WeakOscillation {
            index,
            oscillation: osc,
            threshold: opts.min_oscillation,
        };
        if !(osc > opts.min_oscillation) {
            return Err(weak);
        }
        let tf = build_test_function(b, &lattice, i, p).map_err(|e| match e {
            Error::NoOscillation { .. } => weak,
            e => e,
        })?;
        oscillations.push(osc);
        tfs.push(tf);
    }
    let plan = EvalPlan::adaptive(&lattice, intervals, &window, opts.resolution, &[])?;
    let images = tfs
        .iter()
        .map(|tf| {
            let comm = Commutator::new(b, &tf.f, kernel)?;
            plan.evaluate(|x| Ok(comm.at(x)))
        })
        .collect::<Result<Vec<PatchedFunction>>>()?;
    let n = images.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|l| (l + 1..n).map(move |m| (l, m))).collect();
    let dists = pairs
        .par_iter()
        .map(|(l, m)| images[*l].distance(&images[*m], p))
        .collect::<Result<Vec<_>>>()?;
    let mut distances = vec![vec![0.0; n]; n];
    let mut min_off_diagonal = if n > 1 { f64::INFINITY } else { f64::NAN };
    for ((l, m), d) in pairs.iter().zip(dists) {
        distances[*l][*m] = d;
        distances[*m][*l] = d;
        min_off_diagonal = min_off_diagonal.min(d);
    }
    let image_norms = images.iter().map(|g| g.lp_norm(p)).collect::<Result<Vec<_>>>()?;
    Ok((
        ImageDistances {
            distances,
            min_off_diagonal,
            image_norms,
            oscillations,
            plan_points: plan.len(),
            window,
        },
        tfs,
    ))
}

/// Validates the sequence geometry, then measures the image separation and
/// the empirical constants.
pub fn witness_separation(
    b: &dyn Symbol,
    cfg: &WitnessConfig,
    kernel: &CauchyKernel,
    opts: &WitnessOptions,
) -> Result<WitnessReport> {
    cfg.validate()?;
    let p = cfg.p;
    let (d, tfs) = image_engine(b, &cfg.intervals, p, kernel, opts)?;
    let ImageDistances {
        distances,
        min_off_diagonal,
        image_norms,
        oscillations,
        plan_points,
        window,
    } = d;
    let n = distances.len();
    let epsilon = oscillations.iter().cloned().fold(f64::INFINITY, f64::min);

    let (mut c1, mut c2) = (f64::NAN, f64::NAN);
    if opts.estimate_constants {
        let acfg = AnnulusConfig {
            a1: cfg.a1,
            points_per_annulus: opts.points_per_annulus,
        };
        let k0 = acfg.min_k();
        let per = tfs
            .par_iter()
            .map(|tf| {
                let mut lo = f64::INFINITY;
                let mut hi = 0.0f64;
                for k in k0..=k0 + 2 {
                    lo = lo.min(verify_annulus_lower(b, tf, k, kernel, &acfg)?.constant);
                    hi = hi.max(verify_annulus_upper(b, tf, k, kernel, &acfg)?.constant);
                }
                Ok((lo, hi))
            })
            .collect::<Result<Vec<_>>>()?;
        c1 = per.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
        c2 = per.iter().map(|v| v.1).fold(0.0, f64::max);
    }
    let a3 = 8f64.powf(1.0 - p) * c1 * epsilon.powf(p) * cfg.a1.powf(1.0 - p);
    let notes = vec![
        format!(
            "certifies separation of the computed prefix of {n} intervals only; images integrated over [{:?}, {:?}]",
            window.lo(),
            window.hi()
        ),
        format!("A2 used for the geometry: {:?}", cfg.a2),
    ];
    Ok(WitnessReport {
        case: cfg.case,
        distances,
        min_off_diagonal,
        image_norms,
        oscillations,
        epsilon,
        c1,
        c2,
        a3,
        suggested_a2: suggested_a2(cfg.a1, a3, c2, p),
        plan_points,
        notes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquicontinuityConfig {
    /// The shift; a multiple of the quadrature step.
    pub z: f64,
    /// `ϵ ∈ (0, 1/2)`; the split radius is `|z| / ϵ`.
    pub split: f64,
    pub p: f64,
}

/// Slack on the explicit term bounds.
pub const TERM_SLACK: f64 = 1.25;

/// The four pieces of `[b,C]f(x) - [b,C]f(x+z)` split at `|x-y| = |z|/ϵ`,
/// with their `L^p` norms over the plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquicontinuityTerms {
    pub z: f64,
    pub split: f64,
    pub radius: f64,
    /// `‖L_i‖_p`, `i = 1..4`.
    pub norms: [f64; 4],
    /// `ω_b(z) ‖f‖_p`, `8(L+1) ‖b‖_∞ ϵ ‖f‖_p`, `2 Lip(b) |z|/ϵ ‖f‖_p` twice
    /// (times the kernel prefactor modulus).
    pub bounds: [f64; 4],
    pub ratios: [f64; 4],
    /// `‖[b,C]f - [b,C]f(·+z)‖_p`.
    pub total: f64,
    /// Largest `|Σ L_i - ([b,C]f(x) - [b,C]f(x+z))|` relative to the largest
    /// commutator value.
    pub identity_error: f64,
    pub f_norm: f64,
    pub b_sup: f64,
    pub b_lip: f64,
    pub omega: f64,
    /// `L_2`, `L_3`, `L_4` within `TERM_SLACK` of their bounds and the
    /// identity within `1e-10`. `L_1` is measured against `ω_b(z) ‖f‖_p`
    /// only.
    pub pass: bool,
}

pub fn equicontinuity_terms(
    b: &dyn Symbol,
    f: &SampledFunction,
    kernel: &CauchyKernel,
    plan: &EvalPlan,
    cfg: &EquicontinuityConfig,
) -> Result<EquicontinuityTerms> {
    if !(cfg.split > 0.0 && cfg.split < 0.5) {
        return Err(invalid(format!("split parameter must lie in (0, 1/2), got {}", cfg.split)));
    }
    check_exponent(cfg.p)?;
    if cfg.z == 0.0 {
        return Err(invalid("shift z must be nonzero"));
    }
    let h = f.step();
    steps_in(cfg.z, h, "shift z")?;
    if !plan.lattice().same_lattice(f.grid()) {
        return Err(Error::GridMismatch("plan lattice differs from the input grid".into()));
    }
    let z = cfg.z;
    let s = z.abs() / cfg.split;
    let comm = Commutator::new(b, f, kernel)?;
    let op = comm.integral();
    let s0 = op.support().start;
    let bn = comm.b_nodes();
    let points = plan.points();
    let terms: Vec<([Complex64; 4], Complex64, f64)> = points
        .par_iter()
        .map(|x| {
            let x = *x;
            let bx = comm.symbol_at(x);
            let bxz = comm.symbol_at(x + z);
            let plain = |_: usize, v: Complex64| v;
            let at_shift = |i: usize, v: Complex64| v * (bxz - bn[i - s0]);
            let at_x = |i: usize, v: Complex64| v * (bx - bn[i - s0]);
            let (_, out1) = op.split_at(x, x, s, &plain);
            let (_, out_a) = op.split_at(x, x, s, &at_shift);
            let (in_b, out_b) = op.split_at(x + z, x, s, &at_shift);
            let (in3, _) = op.split_at(x, x, s, &at_x);
            let l = [out1 * (bx - bxz), out_a - out_b, in3, -in_b];
            let direct = comm.at(x) - comm.at(x + z);
            (l, direct, (bx - bxz).abs())
        })
        .collect();
    let p = cfg.p;
    let norm_of = |vals: Vec<Complex64>| -> Result<f64> { plan.assemble(vals)?.lp_norm(p) };
    let mut norms = [0.0; 4];
    for (i, n) in norms.iter_mut().enumerate() {
        *n = norm_of(terms.iter().map(|t| t.0[i]).collect())?;
    }
    let total = norm_of(terms.iter().map(|t| t.1).collect())?;
    let scale = terms.iter().map(|t| t.1.norm()).fold(0.0, f64::max);
    let identity_error = terms
        .iter()
        .map(|t| (t.0.iter().sum::<Complex64>() - t.1).norm())
        .fold(0.0, f64::max)
        / scale.max(f64::MIN_POSITIVE);
    let omega = terms.iter().map(|t| t.2).fold(0.0, f64::max);

    let first = plan.points().first().copied().unwrap_or(0.0) - z.abs() - s;
    let last = plan.points().last().copied().unwrap_or(0.0) + z.abs() + s;
    let lo = first.min(f.grid().first());
    let hi = last.max(f.grid().last());
    let probe = Grid::covering(lo, hi, h)?;
    let probe = Grid::new(
        f.grid().node(f.grid().ceil_index(probe.origin) - 1),
        h,
        probe.count + 2,
    )?;
    let bs = b.sample_range(&probe, 0..probe.count as i64)?;
    let b_sup = bs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let b_lip = bs.windows(2).map(|w| (w[1] - w[0]).abs() / h).fold(0.0, f64::max);
    let f_norm = crate::sampling::lp_norm(f, p, None)?.value;
    let pref = kernel.prefactor().norm();
    let lc = kernel.curve().lipschitz_constant();
    let bounds = [
        omega * f_norm,
        8.0 * (lc + 1.0) * pref * b_sup * cfg.split * f_norm,
        2.0 * pref * b_lip * s * f_norm,
        2.0 * pref * b_lip * s * f_norm,
    ];
    let mut ratios = [0.0; 4];
    for i in 0..4 {
        ratios[i] = if bounds[i] > 0.0 { norms[i] / bounds[i] } else { 0.0 };
    }
    let pass = ratios[1..].iter().all(|r| *r <= TERM_SLACK) && identity_error <= 1e-10;
    Ok(EquicontinuityTerms {
        z,
        split: cfg.split,
        radius: s,
        norms,
        bounds,
        ratios,
        total,
        identity_error,
        f_norm,
        b_sup,
        b_lip,
        omega,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::LipschitzCurve;
    use crate::symbol::{Scaled, SymbolSpec};

    fn flat() -> CauchyKernel {
        CauchyKernel::new(LipschitzCurve::flat())
    }

    fn bump_b() -> SymbolSpec {
        SymbolSpec::SmoothBump {
            center: 0.0,
            radius: 1.0,
            height: 1.0,
        }
    }

    #[test]
    fn fk_of_zero_is_zero() {
        let g = Grid::covering(-1.0, 1.0, 0.01).unwrap();
        let rep = fk_diagnose(&[SampledFunction::zeros(g)], 2.0, &[0.5, 0.1], &[0.02, -0.01]).unwrap();
        assert_eq!(rep.uniform_bound, 0.0);
        assert!(rep.tail_curve.iter().all(|(_, v)| *v == 0.0));
        assert!(rep.equicontinuity_curve.iter().all(|(_, v)| *v == 0.0));
        assert_eq!(rep.tail_curve[0].0, 0.1);
        assert!(fk_diagnose(&[SampledFunction::zeros(g)], 2.0, &[0.5], &[0.015]).is_err());
        assert!(fk_diagnose(&[], 2.0, &[0.5], &[0.01]).is_err());
    }

    #[test]
    fn fk_of_smooth_bump() {
        let g = Grid::covering(-2.0, 2.0, 1e-3).unwrap();
        let f = bump_b().sample(&g).unwrap();
        let zs: Vec<f64> = (0..8).map(|k| 1e-3 * 2f64.powi(k)).collect();
        let rep = fk_diagnose(&[f.clone()], 2.0, &[0.0, 0.5, 0.9, 1.5], &zs).unwrap();
        for w in rep.equicontinuity_curve.windows(2) {
            assert!(w[0].1 <= w[1].1 * 1.05);
        }
        let last = rep.equicontinuity_curve.last().unwrap().1;
        assert!(rep.equicontinuity_curve[0].1 < 0.1 * last);
        for w in rep.tail_curve.windows(2) {
            assert!(w[1].1 <= w[0].1);
        }
        assert_eq!(rep.tail_curve[3].1, 0.0);
        let g2 = shift_difference(&f, 0.004, 2.0).unwrap();
        assert!((g2 - rep.equicontinuity_curve[2].1).abs() < 1e-15);
    }

    #[test]
    fn fk_of_commutator_images_is_equicontinuous() {
        let h = 1.0 / 256.0;
        let g = Grid::covering(-4.0, 4.0, h).unwrap();
        let family: Vec<SampledFunction> = [-0.5, 0.0, 0.5]
            .iter()
            .map(|c| {
                let f = SymbolSpec::SmoothBump {
                    center: *c,
                    radius: 0.25,
                    height: 1.0,
                }
                .sample(&g)
                .unwrap();
                let n = crate::sampling::lp_norm(&f, 2.0, None).unwrap().value;
                f.scale(Complex64::new(1.0 / n, 0.0))
            })
            .collect();
        let plan = EvalPlan::uniform(&g, -4.0, 4.0, 1).unwrap();
        let b = bump_b();
        let k = flat();
        let images: Vec<SampledFunction> = family
            .iter()
            .map(|f| {
                let c = Commutator::new(&b, f, &k).unwrap();
                plan.evaluate(|x| Ok(c.at(x))).unwrap().into_single().unwrap()
            })
            .collect();
        let zs: Vec<f64> = (0..7).map(|k| h * 2f64.powi(k)).collect();
        let rep = fk_diagnose(&images, 2.0, &[1.0, 2.0, 3.0], &zs).unwrap();
        let c = &rep.equicontinuity_curve;
        for w in c.windows(2) {
            assert!(w[0].1 <= 1.05 * w[1].1, "{c:?}");
        }
        let top = c.iter().map(|v| v.1).fold(0.0, f64::max);
        assert!(c[0].1 < 0.1 * top, "{c:?}");
    }

    #[test]
    fn tail_decay_examples() {
        let h = 1.0 / 256.0;
        let g = Grid::covering(-1.0, 1.0, h).unwrap();
        let f = SampledFunction::indicator(g, -1.0, 1.0).unwrap();
        let ts = [4.0, 8.0, 16.0, 32.0];
        let cfg = TailConfig::new(1.0);
        let rep = tail_decay_check(&bump_b(), &[f.clone()], 2.0, &ts, &flat(), &cfg).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!((rep.get("slope").unwrap() + 0.5).abs() <= 0.15);

        let f2 = f.scale(Complex64::new(2.0, 0.0));
        let rep2 = tail_decay_check(&bump_b(), &[f2], 2.0, &ts, &flat(), &cfg).unwrap();
        for (a, b) in rep.rows.iter().zip(&rep2.rows) {
            assert!((b.lhs - 2.0 * a.lhs).abs() <= 1e-12 * b.lhs);
        }
        let zero = SymbolSpec::Constant { value: 0.0 };
        let rz = tail_decay_check(&zero, &[f.clone()], 2.0, &ts, &flat(), &cfg).unwrap();
        assert!(rz.rows.iter().all(|r| r.lhs == 0.0));

        let log = SymbolSpec::TruncatedLog { center: 0.0, floor: -30.0 };
        assert!(tail_decay_check(&log, &[f.clone()], 2.0, &ts, &flat(), &cfg).is_err());
        let wide = SymbolSpec::SmoothBump {
            center: 0.0,
            radius: 2.0,
            height: 1.0,
        };
        assert!(tail_decay_check(&wide, &[f.clone()], 2.0, &ts, &flat(), &cfg).is_err());
        assert!(tail_decay_check(&bump_b(), &[f], 2.0, &[2.0], &flat(), &cfg).is_err());
    }

    #[test]
    fn witness_geometry() {
        let four = small_scale_sequence(0.0, 0.25, 4.0, 4).unwrap();
        let cfg = WitnessConfig {
            case: WitnessCase::SmallScale,
            a1: 5.0,
            a2: 8.0,
            intervals: four,
            p: 2.0,
        };
        assert!(cfg.validate().is_err());
        let sixteen = small_scale_sequence(0.0, 1.0 / 16.0, 16.0, 4).unwrap();
        assert!(WitnessConfig { intervals: sixteen.clone(), ..cfg.clone() }.validate().is_ok());
        let mut rev = sixteen.clone();
        rev.reverse();
        assert!(WitnessConfig { intervals: rev.clone(), ..cfg.clone() }.validate().is_err());
        assert!(WitnessConfig {
            case: WitnessCase::LargeScale,
            intervals: rev,
            ..cfg.clone()
        }
        .validate()
        .is_ok());
        let far = far_away_sequence(8.0, 1.0, 0.5, 5).unwrap();
        let fcfg = WitnessConfig {
            case: WitnessCase::FarAway,
            intervals: far.clone(),
            ..cfg.clone()
        };
        assert!(fcfg.validate().is_ok());
        for i in &far {
            assert!(i.lo() >= 2.0);
        }
        assert!(far_away_sequence(8.0, 1.0, 2.0, 3).is_err());
        let a1_bad = WitnessConfig { a1: 4.0, ..fcfg };
        assert!(a1_bad.validate().is_err());
    }

    fn opts() -> WitnessOptions {
        WitnessOptions {
            estimate_constants: false,
            ..WitnessOptions::for_step(1.0 / 512.0)
        }
    }

    #[test]
    fn identical_intervals_have_equal_images() {
        let i = Interval::new(0.1, 0.25).unwrap();
        let b = SymbolSpec::TruncatedLog { center: 0.0, floor: -30.0 };
        let d = image_distances(&b, &[i, i], 2.0, &flat(), &opts()).unwrap();
        assert_eq!(d.distances[0][1], 0.0);
    }

    #[test]
    fn witness_matrix_properties() {
        let seq = small_scale_sequence(0.0, 1.0 / 16.0, 16.0, 2).unwrap();
        let cfg = WitnessConfig {
            case: WitnessCase::SmallScale,
            a1: 5.0,
            a2: 8.0,
            intervals: seq,
            p: 2.0,
        };
        let o = WitnessOptions {
            points_per_annulus: 32,
            ..WitnessOptions::for_step(1.0 / 4096.0)
        };
        let b = SymbolSpec::TruncatedLog { center: 0.0, floor: -30.0 };
        let rep = witness_separation(&b, &cfg, &flat(), &o).unwrap();
        let n = rep.distances.len();
        for l in 0..n {
            assert_eq!(rep.distances[l][l], 0.0);
            for m in 0..n {
                assert_eq!(rep.distances[l][m], rep.distances[m][l]);
            }
        }
        assert!(rep.min_off_diagonal > 0.0);
        assert!(rep.c1 > 0.0 && rep.c2 > 0.0 && rep.a3 > 0.0);
        assert!(rep.suggested_a2 > cfg.a1);
        let scaled = Scaled { factor: 3.7, inner: &b };
        let r2 = witness_separation(&scaled, &cfg, &flat(), &o).unwrap();
        for l in 0..n {
            for m in 0..n {
                let (a, s) = (rep.distances[l][m], r2.distances[l][m]);
                assert!((s - 3.7 * a).abs() <= 1e-12 * s.max(1e-300));
            }
        }
    }

    #[test]
    fn weak_oscillation_reports_index() {
        let far = far_away_sequence(8.0, 1.0, 0.5, 3).unwrap();
        let b = SymbolSpec::Sign { center: far[1].center() };
        let cfg = WitnessConfig {
            case: WitnessCase::FarAway,
            a1: 5.0,
            a2: 8.0,
            intervals: far,
            p: 2.0,
        };
        match witness_separation(&b, &cfg, &flat(), &opts()) {
            Err(Error::WeakOscillation { index, .. }) => assert_eq!(index, 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn log_separates_and_bump_clusters() {
        let seq = small_scale_sequence(0.0, 1.0 / 16.0, 16.0, 3).unwrap();
        let o = WitnessOptions {
            estimate_constants: false,
            ..WitnessOptions::for_step(seq[2].radius() / 8.0)
        };
        let log = SymbolSpec::TruncatedLog { center: 0.0, floor: -30.0 };
        let dl = image_distances(&log, &seq, 2.0, &flat(), &o).unwrap();
        let db = image_distances(&bump_b(), &seq, 2.0, &flat(), &o).unwrap();
        assert!(dl.min_off_diagonal > 10.0 * db.min_off_diagonal, "{dl:?} {db:?}");
        assert!(db.distances[1][2] < db.distances[0][1]);
    }

    #[test]
    fn equicontinuity_split_identity_and_bounds() {
        let h = 1.0 / 512.0;
        let g = Grid::covering(-1.0, 1.0, h).unwrap();
        let f = SymbolSpec::SmoothBump {
            center: 0.2,
            radius: 0.5,
            height: 1.0,
        }
        .sample(&g)
        .unwrap();
        let plan = EvalPlan::uniform(&g, -3.0, 3.0, 4).unwrap();
        for (z, eps) in [(8.0 * h, 0.25), (2.0 * h, 0.1), (-4.0 * h, 0.4)] {
            let cfg = EquicontinuityConfig { z, split: eps, p: 2.0 };
            let t = equicontinuity_terms(&bump_b(), &f, &flat(), &plan, &cfg).unwrap();
            assert!(t.identity_error < 1e-10, "{t:?}");
            assert!(t.pass, "{t:?}");
        }
        let bad = EquicontinuityConfig { z: 8.0 * h, split: 0.5, p: 2.0 };
        assert!(equicontinuity_terms(&bump_b(), &f, &flat(), &plan, &bad).is_err());
        let off = EquicontinuityConfig { z: 0.3 * h, split: 0.25, p: 2.0 };
        assert!(equicontinuity_terms(&bump_b(), &f, &flat(), &plan, &off).is_err());
    }
}
