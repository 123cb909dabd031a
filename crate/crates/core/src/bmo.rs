//! Averages, mean oscillation, medians and interval sweeps over sampled
//! functions. All integrals use the discrete measure `n·h` of the nodes
//! inside the interval and the real parts of the samples.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::report::fmt_f64;
use crate::sampling::{Grid, Interval, SampledFunction};

fn node_values(f: &SampledFunction, interval: &Interval) -> Result<Vec<f64>> {
    let r = f.grid().index_range(interval);
    if r.is_empty() {
        return Err(Error::EmptyIntersection {
            lo: interval.lo(),
            hi: interval.hi(),
        });
    }
    Ok(f.values()[r].iter().map(|v| v.re).collect())
}

/// `f_I`.
pub fn average(f: &SampledFunction, interval: &Interval) -> Result<f64> {
    let v = node_values(f, interval)?;
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

/// `(1/|I|) ∫_I |f - c|`.
pub fn deviation_from(f: &SampledFunction, interval: &Interval, c: f64) -> Result<f64> {
    let v = node_values(f, interval)?;
    Ok(v.iter().map(|x| (x - c).abs()).sum::<f64>() / v.len() as f64)
}

/// `M(f, I) = (1/|I|) ∫_I |f - f_I|`.
pub fn mean_oscillation(f: &SampledFunction, interval: &Interval) -> Result<f64> {
    let v = node_values(f, interval)?;
    let n = v.len() as f64;
    let avg = v.iter().sum::<f64>() / n;
    Ok(v.iter().map(|x| (x - avg).abs()).sum::<f64>() / n)
}

/// `max_I M(f, I)` over the sweep: a lower bound for `‖f‖_BMO`.
pub fn bmo_norm(f: &SampledFunction, sweep: &[Interval]) -> Result<f64> {
    if sweep.is_empty() {
        return Err(invalid("BMO sweep is empty"));
    }
    let m = sweep
        .par_iter()
        .map(|i| mean_oscillation(f, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(m.into_iter().fold(0.0, f64::max))
}

/// `α_I(f)` with the fractions of `I` where `f` lies strictly above and
/// strictly below it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MedianResult {
    pub value: f64,
    pub upper_excess: f64,
    pub lower_excess: f64,
}

/// The smallest node value `α` with `|{f > α}| <= |I|/2`; then also
/// `|{f < α}| < |I|/2`.
pub fn median(f: &SampledFunction, interval: &Interval) -> Result<MedianResult> {
    let v = node_values(f, interval)?;
    Ok(median_of(&v))
}

pub(crate) fn median_of(values: &[f64]) -> MedianResult {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let alpha = s[n.div_ceil(2) - 1];
    let above = n - s.partition_point(|x| *x <= alpha);
    let below = s.partition_point(|x| *x < alpha);
    MedianResult {
        value: alpha,
        upper_excess: above as f64 / n as f64,
        lower_excess: below as f64 / n as f64,
    }
}

/// Every interval whose endpoints are nodes of `grid` inside `window` and
/// whose length is `2^m` steps, `m >= 1`.
pub fn dyadic_sweep(grid: &Grid, window: &Interval) -> Vec<Interval> {
    let r = grid.index_range(window);
    let (a, b) = (r.start as i64, r.end as i64 - 1);
    let mut out = Vec::new();
    let mut len = 2i64;
    while len <= b - a {
        for s in a..=b - len {
            out.push(Interval::from_endpoints(grid.node(s), grid.node(s + len)).expect("ordered nodes"));
        }
        len *= 2;
    }
    out
}

/// Sup-oscillation curves for the three vanishing-oscillation conditions.
/// Every value is a lower bound (finitely many intervals are examined).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmoProfile {
    /// `(δ, sup_{|I|<δ} M(f, I))`
    pub small_scale: Vec<(f64, f64)>,
    /// `(R, sup_{|I|>R} M(f, I))`
    pub large_scale: Vec<(f64, f64)>,
    /// `(R, sup_{I ∩ I(0,R) = ∅} M(f, I))`
    pub far_away: Vec<(f64, f64)>,
}

impl VmoProfile {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# check: sup M(f,I) over |I|<delta, |I|>R, and I disjoint from I(0,R) (lower bounds)")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["family", "parameter", "sup_oscillation"])?;
        for (name, rows) in [
            ("small_scale", &self.small_scale),
            ("large_scale", &self.large_scale),
            ("far_away", &self.far_away),
        ] {
            for (k, v) in rows {
                w.write_record([name.to_string(), fmt_f64(*k), fmt_f64(*v)])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn check_ladder(name: &str, ladder: &[f64]) -> Result<Vec<f64>> {
    if ladder.is_empty() {
        return Err(invalid(format!("{name} ladder is empty")));
    }
    if ladder.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(invalid(format!("{name} ladder entries must be positive")));
    }
    let mut l = ladder.to_vec();
    l.sort_by(f64::total_cmp);
    Ok(l)
}

/// Evaluates the three conditions on one dyadic sweep of the whole grid.
pub fn vmo_profile(f: &SampledFunction, delta_ladder: &[f64], r_ladder: &[f64]) -> Result<VmoProfile> {
    let deltas = check_ladder("delta", delta_ladder)?;
    let rs = check_ladder("R", r_ladder)?;
    let g = f.grid();
    let window = Interval::from_endpoints(g.first() - 0.5 * g.step, g.last() + 0.5 * g.step)?;
    let sweep = dyadic_sweep(g, &window);
    let osc = sweep
        .par_iter()
        .map(|i| Ok((*i, mean_oscillation(f, i)?)))
        .collect::<Result<Vec<_>>>()?;
    let sup = |keep: &dyn Fn(&Interval) -> bool| {
        osc.iter()
            .filter(|(i, _)| keep(i))
            .map(|(_, m)| *m)
            .fold(0.0, f64::max)
    };
    let small_scale = deltas.iter().map(|d| (*d, sup(&|i| i.measure() < *d))).collect();
    let large_scale = rs.iter().map(|r| (*r, sup(&|i| i.measure() > *r))).collect();
    let far_away = rs
        .iter()
        .map(|r| {
            let core = Interval::new(0.0, *r).expect("positive radius");
            (*r, sup(&|i| i.is_disjoint(&core)))
        })
        .collect();
    Ok(VmoProfile {
        small_scale,
        large_scale,
        far_away,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::shift;
    use crate::symbol::{Symbol, SymbolSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(h: f64) -> Grid {
        Grid::new(-2.0, h, (4.0 / h) as usize + 1).unwrap()
    }

    fn unit() -> Interval {
        Interval::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn average_examples() {
        let h = 1e-3;
        let g = grid(h);
        let c = SampledFunction::from_fn(g, |_| 2.5).unwrap();
        assert!((average(&c, &unit()).unwrap() - 2.5).abs() < 1e-12);
        let x = SampledFunction::from_fn(g, |x| x).unwrap();
        assert!(average(&x, &unit()).unwrap().abs() <= h);
        let chi = SampledFunction::indicator(g, 0.0, 1.0).unwrap();
        assert!((average(&chi, &unit()).unwrap() - 0.5).abs() <= 2.0 * h / 2.0);
        assert!(average(&chi, &Interval::new(50.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn oscillation_examples() {
        let h = 1e-3;
        let g = grid(h);
        let c = SampledFunction::from_fn(g, |_| -1.0).unwrap();
        assert!(mean_oscillation(&c, &unit()).unwrap() < 1e-12);
        let sign = SymbolSpec::Sign { center: 0.0 }.sample(&g).unwrap();
        assert!((mean_oscillation(&sign, &unit()).unwrap() - 1.0).abs() <= 4.0 * h);
        let chi = SampledFunction::indicator(g, 0.0, 1.0).unwrap();
        assert!((mean_oscillation(&chi, &unit()).unwrap() - 0.5).abs() <= 4.0 * h);
    }

    #[test]
    fn bmo_examples() {
        let h = 1e-2;
        let g = grid(h);
        let window = Interval::new(0.0, 1.5).unwrap();
        let mut sweep = dyadic_sweep(&g, &window);
        let c = SampledFunction::from_fn(g, |_| 3.0).unwrap();
        assert!(bmo_norm(&c, &sweep).unwrap() < 1e-12);
        let sign = SymbolSpec::Sign { center: 0.0 }.sample(&g).unwrap();
        let small = bmo_norm(&sign, &sweep).unwrap();
        sweep.push(unit());
        let big = bmo_norm(&sign, &sweep).unwrap();
        assert!(big >= 1.0 - 4.0 * h);
        assert!(big >= small);
        assert!(bmo_norm(&sign, &[]).is_err());
    }

    #[test]
    fn median_examples() {
        let h = 1e-3;
        let g = grid(h);
        let c = SampledFunction::from_fn(g, |_| 0.7).unwrap();
        let m = median(&c, &unit()).unwrap();
        assert_eq!((m.value, m.upper_excess, m.lower_excess), (0.7, 0.0, 0.0));
        let sign = SymbolSpec::Sign { center: 0.0 }.sample(&g).unwrap();
        let m = median(&sign, &unit()).unwrap();
        assert_eq!(m.value, -1.0);
        assert!(m.upper_excess <= 0.5 && m.lower_excess <= 0.5);
        let x = SampledFunction::from_fn(g, |x| x).unwrap();
        assert!(median(&x, &unit()).unwrap().value.abs() <= h);
    }

    #[test]
    fn median_certificates_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let n = rng.gen_range(1..300);
            let v: Vec<f64> = (0..n).map(|_| (rng.gen_range(-5..5) as f64) * 0.5).collect();
            let m = median_of(&v);
            assert!(m.upper_excess <= 0.5 && m.lower_excess <= 0.5, "{v:?}");
            assert!(v.contains(&m.value));
            // no smaller node value qualifies
            let smaller = v.iter().filter(|x| **x < m.value);
            for s in smaller {
                let above = v.iter().filter(|x| *x > s).count();
                assert!(2 * above > n);
            }
        }
    }

    #[test]
    fn sweep_counts() {
        let g = Grid::new(0.0, 1.0, 9).unwrap();
        let w = Interval::from_endpoints(-0.5, 8.5).unwrap();
        let s = dyadic_sweep(&g, &w);
        // lengths 2, 4, 8 over 9 nodes: 7 + 5 + 1
        assert_eq!(s.len(), 13);
        assert!(s.iter().all(|i| g.index_range(i).len() == (i.measure() as usize)));
    }

    #[test]
    fn translation_invariance() {
        let h = 0.01;
        let g = Grid::new(-3.0, h, 601).unwrap();
        let f = SampledFunction::from_fn(g, |x| (3.0 * x).sin() + x.abs().sqrt()).unwrap();
        let window = Interval::new(0.0, 0.6).unwrap();
        let sweep = dyadic_sweep(&g, &window);
        let z = 37.0 * h;
        let shifted = shift(&f, z).unwrap();
        let moved: Vec<Interval> = sweep.iter().map(|i| i.translate(-z)).collect();
        assert_eq!(bmo_norm(&shifted, &moved).unwrap(), bmo_norm(&f, &sweep).unwrap());
    }

    #[test]
    fn vmo_examples() {
        let h = 1.0 / 256.0;
        let g = Grid::new(-2.0 + 0.5 * h, h, 1024).unwrap();
        let c = SampledFunction::from_fn(g, |_| 1.0).unwrap();
        let p = vmo_profile(&c, &[0.1, 0.5], &[0.5, 1.0]).unwrap();
        assert!(p.small_scale.iter().chain(&p.large_scale).chain(&p.far_away).all(|(_, v)| *v < 1e-12));

        let bump = SymbolSpec::SmoothBump { center: 0.0, radius: 1.0, height: 1.0 };
        let lip = bump.lipschitz().unwrap();
        let b = bump.sample(&g).unwrap();
        let p = vmo_profile(&b, &[0.02, 0.05, 0.1, 0.2], &[0.5]).unwrap();
        for (d, v) in &p.small_scale {
            assert!(*v <= lip * d / 2.0, "{d} {v}");
        }
        for w in p.small_scale.windows(2) {
            assert!(w[0].1 <= w[1].1);
        }

        let log = SymbolSpec::TruncatedLog { center: 0.0, floor: -30.0 }.sample(&g).unwrap();
        let p = vmo_profile(&log, &[0.02, 0.05, 0.1], &[0.5]).unwrap();
        for (_, v) in &p.small_scale {
            assert!(*v > 0.3, "{v}");
        }
        assert!(vmo_profile(&log, &[], &[1.0]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn median_is_a_near_minimizer(v in prop::collection::vec(-10.0f64..10.0, 2..80)) {
                let f = SampledFunction::from_real(0.0, 1.0, v.clone()).unwrap();
                let i = Interval::from_endpoints(-0.5, v.len() as f64 - 0.5).unwrap();
                let alpha = median(&f, &i).unwrap().value;
                let at_alpha = deviation_from(&f, &i, alpha).unwrap();
                let best = v.iter().map(|c| deviation_from(&f, &i, *c).unwrap()).fold(f64::INFINITY, f64::min);
                prop_assert!(at_alpha <= 2.0 * best + 1e-12);
                let osc = mean_oscillation(&f, &i).unwrap();
                prop_assert!(osc <= 2.0 * at_alpha + 1e-12);
            }
        }
    }
}
