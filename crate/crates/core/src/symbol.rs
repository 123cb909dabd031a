//! Symbols `b` for commutators: closed-form builtins and sampled data.

use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sampling::{cell_fraction, Grid, Interval, SampledFunction};

/// A real function that can be evaluated anywhere and sampled on a lattice.
pub trait Symbol: Sync {
    fn value(&self, x: f64) -> f64;

    /// Values at the nodes `range` (unclipped indices) of `grid`'s lattice.
    fn sample_range(&self, grid: &Grid, range: Range<i64>) -> Result<Vec<f64>>;

    /// An interval outside which the symbol vanishes, if there is one.
    fn support(&self) -> Option<Interval> {
        None
    }

    /// The grid a sampled symbol lives on.
    fn grid(&self) -> Option<&Grid> {
        None
    }

    fn sample(&self, grid: &Grid) -> Result<SampledFunction> {
        let v = self.sample_range(grid, 0..grid.count as i64)?;
        SampledFunction::on_grid(*grid, v.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
    }

    /// Samples on the nodes of `grid` that fall in `interval`; the result
    /// lives on a sub-grid of the same lattice.
    fn sample_on(&self, grid: &Grid, interval: &Interval) -> Result<SampledFunction> {
        let r = grid.raw_range(interval.lo(), interval.hi());
        if r.is_empty() {
            return Err(Error::EmptyIntersection {
                lo: interval.lo(),
                hi: interval.hi(),
            });
        }
        let sub = Grid::new(grid.node(r.start), grid.step, (r.end - r.start) as usize)?;
        let v = self.sample_range(grid, r)?;
        SampledFunction::on_grid(sub, v.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
    }
}

/// Builtin symbols, as written in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SymbolSpec {
    Constant {
        value: f64,
    },
    Linear {
        slope: f64,
        #[serde(default)]
        intercept: f64,
    },
    /// `sign(x - center)`, zero at the centre.
    Sign {
        #[serde(default)]
        center: f64,
    },
    /// `max(log|x - center|, floor)`.
    TruncatedLog {
        #[serde(default)]
        center: f64,
        #[serde(default = "default_floor")]
        floor: f64,
    },
    /// `height * exp(1 - 1/(1 - t^2))` with `t = (x - center)/radius`, zero
    /// for `|t| >= 1`.
    SmoothBump {
        #[serde(default)]
        center: f64,
        radius: f64,
        #[serde(default = "one")]
        height: f64,
    },
    /// `+amplitude` on `[0, period/2)` and `-amplitude` on the other half,
    /// repeated.
    SquareWave {
        period: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `χ_[lo, hi]`, sampled with cell averaging at the jumps.
    Indicator {
        lo: f64,
        hi: f64,
    },
    /// `values[k]` on `[breaks[k-1], breaks[k])`, with `values.len() ==
    /// breaks.len() + 1`.
    PiecewiseConstant {
        breaks: Vec<f64>,
        values: Vec<f64>,
    },
}

fn default_floor() -> f64 {
    -30.0
}

fn one() -> f64 {
    1.0
}

impl SymbolSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("symbol parameter {name} must be finite, got {v}")))
            }
        };
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(format!("symbol parameter {name} must be positive, got {v}")))
            }
        };
        match self {
            SymbolSpec::Constant { value } => finite("value", *value),
            SymbolSpec::Linear { slope, intercept } => {
                finite("slope", *slope)?;
                finite("intercept", *intercept)
            }
            SymbolSpec::Sign { center } => finite("center", *center),
            SymbolSpec::TruncatedLog { center, floor } => {
                finite("center", *center)?;
                finite("floor", *floor)
            }
            SymbolSpec::SmoothBump { center, radius, height } => {
                finite("center", *center)?;
                positive("radius", *radius)?;
                finite("height", *height)
            }
            SymbolSpec::SquareWave { period, amplitude } => {
                positive("period", *period)?;
                finite("amplitude", *amplitude)
            }
            SymbolSpec::Indicator { lo, hi } => {
                finite("lo", *lo)?;
                finite("hi", *hi)?;
                if lo < hi {
                    Ok(())
                } else {
                    Err(invalid(format!("indicator needs lo < hi, got [{lo}, {hi}]")))
                }
            }
            SymbolSpec::PiecewiseConstant { breaks, values } => {
                if values.len() != breaks.len() + 1 {
                    return Err(invalid(format!(
                        "piecewise-constant symbol needs {} values for {} breaks, got {}",
                        breaks.len() + 1,
                        breaks.len(),
                        values.len()
                    )));
                }
                if breaks.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(invalid("piecewise-constant breaks must be strictly increasing"));
                }
                breaks.iter().chain(values).try_for_each(|v| finite("breaks/values", *v))
            }
        }
    }

    /// `‖b'‖_∞` for the Lipschitz builtins.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            SymbolSpec::Constant { .. } => Some(0.0),
            SymbolSpec::Linear { slope, .. } => Some(slope.abs()),
            SymbolSpec::SmoothBump { radius, height, .. } => Some(height.abs() / radius * bump_max_slope()),
            _ => None,
        }
    }

    fn eval(&self, x: f64) -> f64 {
        match self {
            SymbolSpec::Constant { value } => *value,
            SymbolSpec::Linear { slope, intercept } => slope * x + intercept,
            SymbolSpec::Sign { center } => {
                let d = x - center;
                if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            SymbolSpec::TruncatedLog { center, floor } => (x - center).abs().ln().max(*floor),
            SymbolSpec::SmoothBump { center, radius, height } => height * bump((x - center) / radius),
            SymbolSpec::SquareWave { period, amplitude } => {
                if (x / period).rem_euclid(1.0) < 0.5 {
                    *amplitude
                } else {
                    -amplitude
                }
            }
            SymbolSpec::Indicator { lo, hi } => {
                if *lo <= x && x <= *hi {
                    1.0
                } else {
                    0.0
                }
            }
            SymbolSpec::PiecewiseConstant { breaks, values } => values[breaks.partition_point(|b| *b <= x)],
        }
    }
}

impl Symbol for SymbolSpec {
    fn value(&self, x: f64) -> f64 {
        self.eval(x)
    }

    fn sample_range(&self, grid: &Grid, range: Range<i64>) -> Result<Vec<f64>> {
        self.validate()?;
        let h = grid.step;
        Ok(range
            .map(|i| {
                let y = grid.node(i);
                match self {
                    SymbolSpec::Indicator { lo, hi } => cell_fraction(y, h, *lo, *hi),
                    _ => self.eval(y),
                }
            })
            .collect())
    }

    fn support(&self) -> Option<Interval> {
        match self {
            SymbolSpec::Constant { value } if *value == 0.0 => Interval::new(0.0, f64::MIN_POSITIVE).ok(),
            SymbolSpec::SmoothBump { center, radius, .. } => Interval::new(*center, *radius).ok(),
            SymbolSpec::Indicator { lo, hi } => Interval::from_endpoints(*lo, *hi).ok(),
            _ => None,
        }
    }
}

impl Symbol for SampledFunction {
    /// Real part of the linear interpolant.
    fn value(&self, x: f64) -> f64 {
        self.interpolate(x).re
    }

    fn sample_range(&self, grid: &Grid, range: Range<i64>) -> Result<Vec<f64>> {
        if !self.grid().same_lattice(grid) {
            return Err(Error::GridMismatch(format!(
                "symbol grid (origin {}, step {}) and quadrature lattice (origin {}, step {}) differ",
                self.origin(),
                self.step(),
                grid.origin,
                grid.step
            )));
        }
        let offset = ((grid.origin - self.origin()) / self.step()).round() as i64;
        Ok(range.map(|i| self.at_index(i + offset).re).collect())
    }

    fn support(&self) -> Option<Interval> {
        let h = self.step();
        match SampledFunction::support(self) {
            Some(r) => Interval::from_endpoints(self.node(r.start) - 0.5 * h, self.node(r.end - 1) + 0.5 * h).ok(),
            None => Interval::new(self.origin(), f64::MIN_POSITIVE).ok(),
        }
    }

    fn grid(&self) -> Option<&Grid> {
        Some(SampledFunction::grid(self))
    }
}

/// `λ b`.
#[derive(Debug, Clone, Copy)]
pub struct Scaled<S> {
    pub factor: f64,
    pub inner: S,
}

impl<S: Symbol> Symbol for Scaled<S> {
    fn value(&self, x: f64) -> f64 {
        self.factor * self.inner.value(x)
    }

    fn sample_range(&self, grid: &Grid, range: Range<i64>) -> Result<Vec<f64>> {
        Ok(self.inner.sample_range(grid, range)?.into_iter().map(|v| self.factor * v).collect())
    }

    fn support(&self) -> Option<Interval> {
        self.inner.support()
    }

    fn grid(&self) -> Option<&Grid> {
        self.inner.grid()
    }
}

impl<S: Symbol + ?Sized> Symbol for &S {
    fn value(&self, x: f64) -> f64 {
        (**self).value(x)
    }

    fn sample_range(&self, grid: &Grid, range: Range<i64>) -> Result<Vec<f64>> {
        (**self).sample_range(grid, range)
    }

    fn support(&self) -> Option<Interval> {
        (**self).support()
    }

    fn grid(&self) -> Option<&Grid> {
        (**self).grid()
    }
}

/// `exp(1 - 1/(1 - t^2))` on `|t| < 1`.
fn bump(t: f64) -> f64 {
    let s = 1.0 - t * t;
    if s <= 0.0 {
        0.0
    } else {
        (1.0 - 1.0 / s).exp()
    }
}

fn bump_slope(t: f64) -> f64 {
    let s = 1.0 - t * t;
    if s <= 0.0 {
        0.0
    } else {
        bump(t) * (-2.0 * t / (s * s))
    }
}

/// `max |d/dt bump|`, by golden-section search on `(0, 1)`.
fn bump_max_slope() -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if bump_slope(c).abs() > bump_slope(d).abs() {
            b = d;
        } else {
            a = c;
        }
    }
    bump_slope(0.5 * (a + b)).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_values() {
        assert_eq!(SymbolSpec::Sign { center: 1.0 }.value(0.5), -1.0);
        assert_eq!(SymbolSpec::Sign { center: 1.0 }.value(1.0), 0.0);
        let log = SymbolSpec::TruncatedLog { center: 0.0, floor: -5.0 };
        assert_eq!(log.value(0.0), -5.0);
        assert!((log.value(std::f64::consts::E) - 1.0).abs() < 1e-15);
        let bump = SymbolSpec::SmoothBump { center: 0.0, radius: 2.0, height: 3.0 };
        assert_eq!(bump.value(0.0), 3.0);
        assert_eq!(bump.value(2.0), 0.0);
        let sq = SymbolSpec::SquareWave { period: 2.0, amplitude: 1.0 };
        assert_eq!((sq.value(0.5), sq.value(1.5), sq.value(-0.5)), (1.0, -1.0, -1.0));
        let pc = SymbolSpec::PiecewiseConstant { breaks: vec![0.0, 1.0], values: vec![1.0, 2.0, 3.0] };
        assert_eq!((pc.value(-1.0), pc.value(0.0), pc.value(1.5)), (1.0, 2.0, 3.0));
    }

    #[test]
    fn bump_slope_matches_brute_force() {
        let b = SymbolSpec::SmoothBump { center: 0.3, radius: 0.5, height: 2.0 };
        let lip = b.lipschitz().unwrap();
        let h = 1e-6;
        let brute = (0..1_000_000)
            .map(|i| {
                let x = -0.2 + i as f64 * 1e-6;
                (b.value(x + h) - b.value(x)).abs() / h
            })
            .fold(0.0, f64::max);
        assert!((brute - lip).abs() < 1e-4 * lip, "{brute} vs {lip}");
    }

    #[test]
    fn validation() {
        assert!(SymbolSpec::Indicator { lo: 1.0, hi: 0.0 }.validate().is_err());
        assert!(SymbolSpec::SmoothBump { center: 0.0, radius: 0.0, height: 1.0 }.validate().is_err());
        assert!(SymbolSpec::PiecewiseConstant { breaks: vec![1.0], values: vec![1.0] }.validate().is_err());
    }

    #[test]
    fn sampled_symbol_interpolates_and_checks_lattice() {
        let g = Grid::new(0.0, 0.5, 5).unwrap();
        let f = SampledFunction::from_fn(g, |x| x * x).unwrap();
        assert_eq!(f.value(1.0), 1.0);
        assert_eq!(f.value(1.25), 0.5 * (1.0 + 2.25));
        assert_eq!(f.value(2.25), 0.5 * 4.0);
        assert_eq!(f.value(10.0), 0.0);
        let shifted = Grid::new(1.0, 0.5, 3).unwrap();
        assert_eq!(f.sample_range(&shifted, 0..3).unwrap(), vec![1.0, 2.25, 4.0]);
        let off = Grid::new(0.25, 0.5, 3).unwrap();
        assert!(matches!(f.sample_range(&off, 0..3), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn sample_on_subinterval() {
        let g = Grid::new(-1.0, 0.25, 9).unwrap();
        let s = SymbolSpec::Linear { slope: 1.0, intercept: 0.0 };
        let sub = s.sample_on(&g, &Interval::new(0.0, 0.5).unwrap()).unwrap();
        assert_eq!(sub.len(), 4);
        assert_eq!(sub.origin(), -0.5);
        assert!(s.sample_on(&g, &Interval::new(0.1, 0.05).unwrap()).is_err());
    }

    #[test]
    fn serde_shapes() {
        let s: SymbolSpec = toml::from_str("kind = \"truncated-log\"\ncenter = 0.5\n").unwrap();
        assert_eq!(s, SymbolSpec::TruncatedLog { center: 0.5, floor: -30.0 });
        let s: SymbolSpec = serde_json::from_str(r#"{"kind":"smooth-bump","radius":1.0}"#).unwrap();
        assert_eq!(s, SymbolSpec::SmoothBump { center: 0.0, radius: 1.0, height: 1.0 });
    }
}
