//! Command-line driver: parses flags, loads the config, runs one subcommand
//! and writes `<out-dir>/<subcommand>.csv` and `.json`.
//!
//! Exit status: 0 when every check passes, 1 on a bound violation, 2 on an
//! input error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;

use crate::bmo::{bmo_norm, dyadic_sweep, mean_oscillation, vmo_profile};
use crate::commutator::{apply_commutator, commutator_norm_lower, homogeneity_sweep, HomogeneityConfig, HOMOGENEITY_CHECK};
use crate::compactness::{
    far_away_sequence, fk_diagnose, large_scale_sequence, small_scale_sequence, witness_separation, WitnessCase,
    WitnessConfig, WitnessOptions,
};
use crate::config::{EvalMode, ExperimentConfig, SymbolSource};
use crate::curve::LipschitzCurve;
use crate::error::{Error, Result};
use crate::kernel::sweep_standard_estimates;
use crate::operator::{CauchyIntegral, EvalPlan};
use crate::report::{fmt_f64, BoundReport};
use crate::sampling::{lp_norm, Grid, Interval, SampledFunction};
use crate::symbol::{Symbol, SymbolSpec};
use crate::testfn::{annulus_ladder, build_test_function, verify_intermediate_bounds, AnnulusConfig};

#[derive(Debug, Parser)]
#[command(name = "cauchy-lab", version, about = "Cauchy integral, commutator and compactness experiments")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML experiment file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate C_Γ f on the `[eval]` window.
    EvalOperator,
    /// Dyadic lower bound for the BMO norm of `b`.
    BmoNorm,
    /// Small-scale, large-scale and far-away oscillation curves of `b`.
    VmoProfile,
    /// Randomized check of the size and smoothness estimates of the kernel.
    VerifyKernel {
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Lower bound for |C_Γ χ_I1| on I0 over an M ladder.
    VerifyHomogeneity {
        /// Lipschitz constant of an affine curve; overrides `[curve]`.
        #[arg(long = "L", alias = "lipschitz")]
        lipschitz: Option<f64>,
        /// Comma-separated M values.
        #[arg(long = "M-ladder", alias = "m-ladder", value_delimiter = ',')]
        m_ladder: Option<Vec<f64>>,
    },
    /// Test-function construction and annulus bounds for `b` on an interval.
    Lemma41 {
        /// CSV file with `x,re,im`; overrides `[symbol]`.
        #[arg(long)]
        b: Option<PathBuf>,
        /// `center,radius`.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        interval: Option<Vec<f64>>,
        #[arg(long)]
        p: Option<f64>,
        /// `lo..hi` (inclusive) or a comma-separated list.
        #[arg(long)]
        k_ladder: Option<String>,
    },
    /// Fréchet–Kolmogorov quantities for commutator images of normalized bumps.
    FkDiagnose,
    /// Pairwise separation of commutator images along a witness sequence.
    Witness {
        #[arg(long, value_parser = parse_case)]
        case: Option<WitnessCase>,
    },
    /// Lower bound for the commutator norm over `[commutator_norm].family`.
    CommutatorNorm,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::EvalOperator => "eval-operator",
            Command::BmoNorm => "bmo-norm",
            Command::VmoProfile => "vmo-profile",
            Command::VerifyKernel { .. } => "verify-kernel",
            Command::VerifyHomogeneity { .. } => "verify-homogeneity",
            Command::Lemma41 { .. } => "lemma41",
            Command::FkDiagnose => "fk-diagnose",
            Command::Witness { .. } => "witness",
            Command::CommutatorNorm => "commutator-norm",
        }
    }
}

fn parse_case(s: &str) -> std::result::Result<WitnessCase, String> {
    match s {
        "small" | "small-scale" => Ok(WitnessCase::SmallScale),
        "large" | "large-scale" => Ok(WitnessCase::LargeScale),
        "far" | "far-away" => Ok(WitnessCase::FarAway),
        _ => Err(format!("unknown case {s:?}; expected small, large or far")),
    }
}

fn parse_k_ladder(s: &str) -> Result<Vec<u32>> {
    let bad = || Error::Config(format!("cannot parse k ladder {s:?}"));
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(bad());
        }
        return Ok((lo..=hi).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

/// What a subcommand produced: file contents and the pass flag.
struct Outcome {
    csv: String,
    json: String,
    pass: bool,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    subcommand: &'a str,
    seed: u64,
    pass: bool,
    report: T,
}

fn envelope<T: Serialize>(name: &str, seed: u64, pass: bool, report: T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Envelope {
        subcommand: name,
        seed,
        pass,
        report,
    })?;
    s.push('\n');
    Ok(s)
}

fn to_string(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::InvalidInput(e.to_string()))
}

fn csv_table(check: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    to_string(|buf| {
        writeln!(buf, "# check: {check}")?;
        let mut w = csv::Writer::from_writer(&mut *buf);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        Ok(())
    })
}

fn load_symbol(cfg: &ExperimentConfig, grid: Option<&Grid>) -> Result<SampledFunction> {
    cfg.symbol
        .as_ref()
        .ok_or_else(|| Error::Config("missing [symbol] table".into()))?
        .load(grid)
}

fn eval_plan(cfg: &ExperimentConfig, grid: &Grid) -> Result<EvalPlan> {
    match &cfg.eval {
        Some(e) => EvalPlan::uniform(grid, e.lo, e.hi, e.stride),
        None => EvalPlan::uniform(grid, grid.first(), grid.last(), 1),
    }
}

fn eval_operator(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let f = cfg
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("missing [input] table".into()))?
        .load(Some(&grid))?;
    let kernel = cfg.kernel()?;
    let plan = eval_plan(cfg, f.grid())?;
    let pv = cfg.pv_config(f.step());
    let mode = cfg.eval.as_ref().map(|e| e.mode).unwrap_or_default();
    let radii = cfg.eval.as_ref().map(|e| e.radii.clone()).unwrap_or_default();
    pv.validate()?;
    let op = CauchyIntegral::new(&kernel, &f);
    let (check, out) = match mode {
        EvalMode::Pv => ("C f(x) = p.v. int K(x,y) f(y) dy", plan.evaluate(|x| op.pv(x, &pv))?),
        EvalMode::Truncated => {
            let t = *radii
                .first()
                .ok_or_else(|| Error::Config("eval.radii needs the truncation radius".into()))?;
            ("C_t f(x) = int_{|x-y|>t} K(x,y) f(y) dy", plan.evaluate(|x| Ok(op.truncated(x, t)))?)
        }
        EvalMode::Maximal => (
            "C_* f(x) = sup_t |C_t f(x)|",
            plan.evaluate(|x| Ok(Complex64::new(op.maximal(x, &radii)?, 0.0)))?,
        ),
    };
    let csv = to_string(|buf| {
        writeln!(buf, "# check: {check}")?;
        out.write_csv(&mut *buf)
    })?;
    let norm = out.lp_norm(2.0)?;
    let summary = serde_json::json!({
        "check": check,
        "points": plan.len(),
        "l2_norm_over_window": norm,
        "quadrature_step": f.step(),
        "truncation": pv.truncation,
    });
    Ok(Outcome {
        csv,
        json: envelope("eval-operator", cfg.seed, true, summary)?,
        pass: true,
    })
}

fn bmo_norm_cmd(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let b = load_symbol(cfg, Some(&grid))?;
    let g = b.grid();
    let window = match cfg.bmo {
        Some(w) => Interval::from_endpoints(w.lo, w.hi)?,
        None => Interval::from_endpoints(g.first() - 0.5 * g.step, g.last() + 0.5 * g.step)?,
    };
    let sweep = dyadic_sweep(g, &window);
    let value = bmo_norm(&b, &sweep)?;
    let mut best = None;
    for i in &sweep {
        let m = mean_oscillation(&b, i)?;
        if best.map_or(true, |(_, v)| m > v) {
            best = Some((*i, m));
        }
    }
    let check = "||b||_BMO >= max over dyadic I of (1/|I|) int_I |b - b_I|";
    let mut rows = vec![
        vec!["bmo_lower_bound".into(), fmt_f64(value)],
        vec!["intervals".into(), sweep.len().to_string()],
    ];
    if let Some((i, _)) = best {
        rows.push(vec!["argmax_center".into(), fmt_f64(i.center())]);
        rows.push(vec!["argmax_radius".into(), fmt_f64(i.radius())]);
    }
    let csv = csv_table(check, &["quantity", "value"], rows)?;
    let summary = serde_json::json!({
        "check": check,
        "bmo_lower_bound": value,
        "intervals": sweep.len(),
        "argmax": best.map(|(i, _)| i),
        "window": window,
    });
    Ok(Outcome {
        csv,
        json: envelope("bmo-norm", cfg.seed, true, summary)?,
        pass: true,
    })
}

fn vmo_profile_cmd(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let b = load_symbol(cfg, Some(&grid))?;
    let prof = vmo_profile(&b, &cfg.vmo.deltas, &cfg.vmo.radii)?;
    let csv = to_string(|buf| prof.write_csv(buf))?;
    Ok(Outcome {
        csv,
        json: envelope("vmo-profile", cfg.seed, true, &prof)?,
        pass: true,
    })
}

fn verify_kernel(cfg: &ExperimentConfig, samples: Option<usize>) -> Result<Outcome> {
    let kernel = cfg.kernel()?;
    let samples = samples.unwrap_or(cfg.verify_kernel.samples);
    let sweep = sweep_standard_estimates(&kernel, samples, cfg.verify_kernel.span, cfg.seed)?;
    let reports = [&sweep.size, &sweep.smoothness, &sweep.transposed];
    let check = reports.iter().map(|r| r.check.as_str()).collect::<Vec<_>>().join("; ");
    let mut rows = Vec::new();
    for r in reports {
        for row in r.rows.iter().filter(|row| !row.pass) {
            rows.push(vec![
                r.check.clone(),
                fmt_f64(row.x),
                fmt_f64(row.y),
                row.y_prime.map(fmt_f64).unwrap_or_default(),
                fmt_f64(row.lhs),
                fmt_f64(row.rhs),
            ]);
        }
    }
    let csv = csv_table(&check, &["estimate", "x", "y", "y_prime", "lhs", "rhs"], rows)?;
    let summaries: Vec<serde_json::Value> = reports
        .iter()
        .map(|r| r.to_json(false).and_then(|s| Ok(serde_json::from_str(&s)?)))
        .collect::<Result<_>>()?;
    Ok(Outcome {
        csv,
        json: envelope("verify-kernel", cfg.seed, sweep.pass(), summaries)?,
        pass: sweep.pass(),
    })
}

fn verify_homogeneity(cfg: &ExperimentConfig, lipschitz: Option<f64>, m_ladder: Option<Vec<f64>>) -> Result<Outcome> {
    let h = &cfg.homogeneity;
    let curve = match lipschitz.or(h.lipschitz) {
        Some(l) if l == 0.0 => LipschitzCurve::flat(),
        Some(l) => LipschitzCurve::affine(l)?,
        None => cfg.curve()?,
    };
    let ladder = m_ladder.unwrap_or_else(|| h.m_ladder.clone());
    let hc = HomogeneityConfig {
        nodes_per_radius: h.nodes_per_radius,
        slack: h.slack,
        prefactor: false,
    };
    let sweep = homogeneity_sweep(curve, &ladder, h.r, &hc)?;
    let rows = sweep
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.m),
                fmt_f64(r.min_adjusted),
                fmt_f64(r.min_raw),
                fmt_f64(r.target),
                r.pass.to_string(),
            ]
        })
        .collect();
    let csv = csv_table(HOMOGENEITY_CHECK, &["M", "min_modulus", "min_raw", "target", "pass"], rows)?;
    let summary = serde_json::json!({
        "check": HOMOGENEITY_CHECK,
        "lipschitz_constant": curve.lipschitz_constant(),
        "slack": h.slack,
        "sweep": sweep,
    });
    Ok(Outcome {
        csv,
        json: envelope("verify-homogeneity", cfg.seed, sweep.pass(), summary)?,
        pass: sweep.pass(),
    })
}

fn lemma41(
    cfg: &ExperimentConfig,
    b_path: Option<PathBuf>,
    interval: Option<Vec<f64>>,
    p: Option<f64>,
    k_ladder: Option<String>,
) -> Result<Outcome> {
    let spec = &cfg.lemma41;
    let (center, radius) = match interval.as_deref() {
        Some([c, r]) => (*c, *r),
        Some(_) => return Err(Error::Config("--interval takes center,radius".into())),
        None => (spec.center, spec.radius),
    };
    let base = Interval::new(center, radius)?;
    let p = p.unwrap_or(spec.p);
    let ks = match k_ladder {
        Some(s) => parse_k_ladder(&s)?,
        None => spec.k_ladder.clone(),
    };
    let kmax = *ks.iter().max().ok_or_else(|| Error::Config("k ladder is empty".into()))?;
    let source = match b_path {
        Some(csv) => SymbolSource::Csv { csv },
        None => cfg
            .symbol
            .clone()
            .ok_or_else(|| Error::Config("lemma41 needs --b or a [symbol] table".into()))?,
    };
    let b: Box<dyn Symbol> = match &source {
        SymbolSource::Csv { .. } => Box::new(source.load(None)?),
        SymbolSource::Spec(s) => Box::new(s.clone()),
    };
    // A built-in symbol gets a window reaching past the outermost shell, on
    // the [grid] lattice when there is one.
    let window = match &source {
        SymbolSource::Csv { .. } => *b.grid().expect("sampled symbol has a grid"),
        SymbolSource::Spec(_) => {
            let (origin, step) = match cfg.grid {
                Some(_) => {
                    let g = cfg.grid()?;
                    (g.origin, g.step)
                }
                None => (center, radius / spec.nodes_per_radius.max(2) as f64),
            };
            let reach = radius * 2f64.powi(kmax as i32 + 2);
            let lo = ((center - reach - origin) / step).floor();
            let hi = ((center + reach - origin) / step).ceil();
            Grid::new(origin + lo * step, step, (hi - lo) as usize + 1)?
        }
    };
    let kernel = cfg.kernel()?;
    let tf = build_test_function(b.as_ref(), &window, &base, p)?;
    let acfg = AnnulusConfig {
        a1: spec.a1,
        points_per_annulus: spec.points_per_annulus,
    };
    let ladder = annulus_ladder(b.as_ref(), &tf, &ks, &kernel, &acfg)?;
    let intermediate = ks
        .iter()
        .map(|k| verify_intermediate_bounds(b.as_ref(), &tf, *k, &kernel, &acfg))
        .collect::<Result<Vec<BoundReport>>>()?;
    let inv = tf.invariants();
    let pass = ladder.pass && inv.pass() && intermediate.iter().all(|r| r.pass);
    let check = "int_{I^k} |[b,C]f|^p >= C1 eps^p |I|^{p-1}/|2^k I|^{p-1}; int_{2^{k+1}I \\ 2^k I} |[b,C]f|^p <= C2 |I|^{p-1}/|2^k I|^{p-1}";
    let rows = ladder
        .lower
        .iter()
        .chain(&ladder.upper)
        .map(|r| {
            vec![
                r.k.to_string(),
                format!("{:?}", r.side).to_lowercase(),
                fmt_f64(r.lhs),
                fmt_f64(r.normalizer),
                fmt_f64(r.ratio),
                fmt_f64(r.constant),
                r.points.to_string(),
            ]
        })
        .collect();
    let csv = csv_table(check, &["k", "side", "lhs", "normalizer", "ratio", "constant", "points"], rows)?;
    let inter: Vec<serde_json::Value> = intermediate
        .iter()
        .map(|r| r.to_json(false).and_then(|s| Ok(serde_json::from_str(&s)?)))
        .collect::<Result<_>>()?;
    let summary = serde_json::json!({
        "check": check,
        "interval": base,
        "p": p,
        "median": tf.alpha,
        "a_j": tf.a_j,
        "epsilon": tf.epsilon,
        "nodes": tf.f.len(),
        "invariants": inv,
        "ladder": ladder,
        "c1": ladder.c1(),
        "c2": ladder.c2(),
        "intermediate": inter,
    });
    Ok(Outcome {
        csv,
        json: envelope("lemma41", cfg.seed, pass, summary)?,
        pass,
    })
}

fn normalized_bumps(grid: &Grid, positions: &[f64], radius: f64, p: f64) -> Result<Vec<SampledFunction>> {
    positions
        .iter()
        .map(|c| {
            let f = SymbolSpec::SmoothBump {
                center: *c,
                radius,
                height: 1.0,
            }
            .sample(grid)?;
            let n = lp_norm(&f, p, None)?.value;
            if n == 0.0 {
                return Err(Error::InvalidInput(format!("bump at {c} misses the grid")));
            }
            Ok(f.scale(Complex64::new(1.0 / n, 0.0)))
        })
        .collect()
}

fn fk_diagnose_cmd(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let b = load_symbol(cfg, Some(&grid))?;
    let kernel = cfg.kernel()?;
    let fk = &cfg.fk;
    let family = normalized_bumps(&grid, &fk.positions, fk.bump_radius, fk.p)?;
    let plan = eval_plan(cfg, &grid)?;
    let pv = cfg.pv_config(grid.step);
    let images = family
        .iter()
        .map(|f| {
            apply_commutator(&b, f, &kernel, &plan, &pv)?
                .into_single()
                .ok_or_else(|| Error::InvalidInput("evaluation window must be a single patch".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    let step = images[0].step();
    let zs: Vec<f64> = fk.z_steps.iter().map(|s| *s as f64 * step).collect();
    let report = fk_diagnose(&images, fk.p, &fk.t_ladder, &zs)?;
    let csv = to_string(|buf| report.write_csv(buf))?;
    Ok(Outcome {
        csv,
        json: envelope("fk-diagnose", cfg.seed, true, &report)?,
        pass: true,
    })
}

fn witness_cmd(cfg: &ExperimentConfig, case: Option<WitnessCase>) -> Result<Outcome> {
    let w = &cfg.witness;
    let case = case.unwrap_or(w.case);
    let intervals = match case {
        WitnessCase::SmallScale => small_scale_sequence(w.center, w.r1, w.ratio, w.len)?,
        WitnessCase::LargeScale => large_scale_sequence(w.center, w.r1, w.ratio, w.len)?,
        WitnessCase::FarAway => far_away_sequence(w.a2, w.c_eps, w.radius, w.len)?,
    };
    let rmin = intervals.iter().map(|i| i.radius()).fold(f64::INFINITY, f64::min);
    let wc = WitnessConfig {
        case,
        a1: w.a1,
        a2: w.a2,
        intervals,
        p: w.p,
    };
    let opts = WitnessOptions {
        step: w.step.unwrap_or(rmin / 8.0),
        resolution: w.resolution,
        window_factor: w.window_factor,
        min_oscillation: w.min_oscillation,
        estimate_constants: w.estimate_constants,
        ..WitnessOptions::for_step(1.0)
    };
    let b: Box<dyn Symbol> = match cfg.symbol.as_ref() {
        Some(SymbolSource::Spec(s)) => Box::new(s.clone()),
        Some(src) => Box::new(src.load(None)?),
        None => return Err(Error::Config("missing [symbol] table".into())),
    };
    let kernel = cfg.kernel()?;
    let report = witness_separation(b.as_ref(), &wc, &kernel, &opts)?;
    let csv = to_string(|buf| report.write_matrix_csv(buf))?;
    let summary = serde_json::json!({
        "intervals": wc.intervals,
        "step": opts.step,
        "witness": report,
    });
    Ok(Outcome {
        csv,
        json: envelope("witness", cfg.seed, true, summary)?,
        pass: true,
    })
}

fn commutator_norm_cmd(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let b = load_symbol(cfg, Some(&grid))?;
    let kernel = cfg.kernel()?;
    let spec = &cfg.commutator_norm;
    if spec.family.is_empty() {
        return Err(Error::Config("commutator_norm.family is empty".into()));
    }
    let family = spec
        .family
        .iter()
        .map(|s| s.load(Some(&grid)))
        .collect::<Result<Vec<_>>>()?;
    let plan = eval_plan(cfg, &grid)?;
    let est = commutator_norm_lower(&b, spec.p, &family, &kernel, &plan, &cfg.pv_config(grid.step))?;
    let check = "||[b,C]|| >= max_f ||[b,C]f||_p / ||f||_p";
    let rows = est
        .ratios
        .iter()
        .enumerate()
        .map(|(i, r)| vec![i.to_string(), fmt_f64(*r)])
        .collect();
    let csv = csv_table(check, &["member", "ratio"], rows)?;
    Ok(Outcome {
        csv,
        json: envelope("commutator-norm", cfg.seed, true, &est)?,
        pass: true,
    })
}

fn dispatch(cfg: &ExperimentConfig, command: Command) -> Result<Outcome> {
    match command {
        Command::EvalOperator => eval_operator(cfg),
        Command::BmoNorm => bmo_norm_cmd(cfg),
        Command::VmoProfile => vmo_profile_cmd(cfg),
        Command::VerifyKernel { samples } => verify_kernel(cfg, samples),
        Command::VerifyHomogeneity { lipschitz, m_ladder } => verify_homogeneity(cfg, lipschitz, m_ladder),
        Command::Lemma41 {
            b,
            interval,
            p,
            k_ladder,
        } => lemma41(cfg, b, interval, p, k_ladder),
        Command::FkDiagnose => fk_diagnose_cmd(cfg),
        Command::Witness { case } => witness_cmd(cfg, case),
        Command::CommutatorNorm => commutator_norm_cmd(cfg),
    }
}

/// Runs one subcommand and writes its reports; returns whether all checks
/// passed.
pub fn run(cli: Cli) -> Result<bool> {
    let mut cfg = match &cli.common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        cfg.seed = seed;
    }
    let name = cli.command.name();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::Config(e.to_string()))?;
    let outcome = pool.install(|| dispatch(&cfg, cli.command))?;
    let dir = &cli.common.out_dir;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("{name}.csv")), outcome.csv)?;
    std::fs::write(dir.join(format!("{name}.json")), outcome.json)?;
    Ok(outcome.pass)
}

/// Parses `args` (program name first) and runs; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("bound violation: see the report files");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_ladder_forms() {
        assert_eq!(parse_k_ladder("3..5").unwrap(), vec![3, 4, 5]);
        assert_eq!(parse_k_ladder("3, 6").unwrap(), vec![3, 6]);
        assert!(parse_k_ladder("5..3").is_err());
        assert!(parse_k_ladder("x").is_err());
    }

    #[test]
    fn case_names() {
        assert_eq!(parse_case("small").unwrap(), WitnessCase::SmallScale);
        assert_eq!(parse_case("far-away").unwrap(), WitnessCase::FarAway);
        assert!(parse_case("tiny").is_err());
    }
}
