//! The Cauchy kernel `K(x, y) = 1 / (y - x + i(A(y) - A(x)))` and checks of
//! its size and smoothness estimates.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::LipschitzCurve;
use crate::error::{invalid, Error, Result};
use crate::report::{BoundReport, BoundRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CauchyKernel {
    curve: LipschitzCurve,
    /// Multiply by `1/(πi)`. Off by default.
    #[serde(default)]
    prefactor: bool,
}

/// `1 / (u + iv)`.
#[inline(always)]
pub(crate) fn inv(u: f64, v: f64) -> Complex64 {
    let d = u * u + v * v;
    Complex64::new(u / d, -v / d)
}

impl CauchyKernel {
    pub fn new(curve: LipschitzCurve) -> Self {
        CauchyKernel { curve, prefactor: false }
    }

    pub fn with_prefactor(curve: LipschitzCurve, prefactor: bool) -> Self {
        CauchyKernel { curve, prefactor }
    }

    pub fn curve(&self) -> &LipschitzCurve {
        &self.curve
    }

    pub fn has_prefactor(&self) -> bool {
        self.prefactor
    }

    /// `δ`.
    pub fn smoothness_exponent(&self) -> f64 {
        1.0
    }

    /// `2(L + 1)`.
    pub fn size_constant(&self) -> f64 {
        2.0 * (self.curve.lipschitz_constant() + 1.0)
    }

    /// `1` or `1/(πi) = -i/π`.
    pub fn prefactor(&self) -> Complex64 {
        if self.prefactor {
            Complex64::new(0.0, -1.0 / PI)
        } else {
            Complex64::new(1.0, 0.0)
        }
    }

    fn prefactor_modulus(&self) -> f64 {
        if self.prefactor {
            1.0 / PI
        } else {
            1.0
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<Complex64> {
        if x == y {
            return Err(Error::Singular(x));
        }
        Ok(self.prefactor() * inv(y - x, self.curve.rise(x, y)))
    }

    /// `|K(x, y)|`, never larger than `1/|y - x|` (times the prefactor
    /// modulus) even after rounding.
    pub fn modulus(&self, x: f64, y: f64) -> Result<f64> {
        if x == y {
            return Err(Error::Singular(x));
        }
        let u = y - x;
        let w = u.hypot(self.curve.rise(x, y)).max(u.abs());
        Ok(self.prefactor_modulus() / w)
    }

    pub fn size_row(&self, x: f64, y: f64) -> Result<BoundRow> {
        let lhs = self.modulus(x, y)?;
        let rhs = self.prefactor_modulus() / (y - x).abs();
        Ok(BoundRow::upper(x, y, None, lhs, rhs))
    }

    /// `|K(x, y)| <= 1/|y - x|`.
    pub fn check_size(&self, x: f64, y: f64) -> Result<BoundReport> {
        let mut r = BoundReport::new(SIZE_CHECK);
        r.push(self.size_row(x, y)?);
        Ok(r)
    }

    /// `|K(x,y) - K(x,y')|` (or `|K(y,x) - K(y',x)|` when transposed) against
    /// `2(L+1)|y - y'| / |y - x|^2`.
    pub fn smoothness_row(&self, x: f64, y: f64, y_prime: f64, transposed: bool) -> Result<BoundRow> {
        if x == y {
            return Err(Error::Singular(x));
        }
        let dist = (y - x).abs();
        let dy = (y - y_prime).abs();
        if !(dy <= 0.5 * dist) {
            return Err(invalid(format!(
                "smoothness check needs |y - y'| <= |y - x|/2, got |{y} - {y_prime}| > |{y} - {x}|/2"
            )));
        }
        let c = &self.curve;
        // 1/w - 1/w' = (w' - w) / (w w'), with each difference formed directly
        let (w, w2, diff) = if transposed {
            (
                Complex64::new(x - y, c.rise(y, x)),
                Complex64::new(x - y_prime, c.rise(y_prime, x)),
                Complex64::new(y - y_prime, c.rise(y_prime, y)),
            )
        } else {
            (
                Complex64::new(y - x, c.rise(x, y)),
                Complex64::new(y_prime - x, c.rise(x, y_prime)),
                Complex64::new(y_prime - y, c.rise(y, y_prime)),
            )
        };
        let lhs = self.prefactor_modulus() * diff.norm() / (w.norm() * w2.norm());
        let rhs = self.prefactor_modulus() * self.size_constant() * dy.powf(self.smoothness_exponent())
            / dist.powf(1.0 + self.smoothness_exponent());
        Ok(BoundRow::upper(x, y, Some(y_prime), lhs, rhs))
    }

    pub fn check_smoothness(&self, x: f64, y: f64, y_prime: f64, transposed: bool) -> Result<BoundReport> {
        let mut r = BoundReport::new(if transposed { SMOOTH_T_CHECK } else { SMOOTH_CHECK });
        r.push(self.smoothness_row(x, y, y_prime, transposed)?);
        Ok(r)
    }
}

pub const SIZE_CHECK: &str = "|K(x,y)| <= 1/|y-x|";
pub const SMOOTH_CHECK: &str = "|K(x,y) - K(x,y')| <= 2(L+1)|y-y'|/|y-x|^2 for |y-y'| <= |y-x|/2";
pub const SMOOTH_T_CHECK: &str = "|K(y,x) - K(y',x)| <= 2(L+1)|y-y'|/|y-x|^2 for |y-y'| <= |y-x|/2";

/// The three standard-estimate reports from one randomized sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSweep {
    pub size: BoundReport,
    pub smoothness: BoundReport,
    pub transposed: BoundReport,
}

impl KernelSweep {
    pub fn pass(&self) -> bool {
        self.size.pass && self.smoothness.pass && self.transposed.pass
    }

    pub fn violations(&self) -> usize {
        self.size.violations() + self.smoothness.violations() + self.transposed.violations()
    }
}

/// Random admissible triple: `x, y` uniform in `[-span, span]`, and `y'`
/// at a log-uniform fraction (down to `1e-6`) of the admissible radius
/// `|y - x|/2` around `y`.
fn triple(rng: &mut ChaCha8Rng, span: f64) -> (f64, f64, f64) {
    loop {
        let x: f64 = rng.gen_range(-span..span);
        let y: f64 = rng.gen_range(-span..span);
        if x == y {
            continue;
        }
        let scale = 10f64.powf(rng.gen_range(-6.0..0.0));
        let yp = y + rng.gen_range(-1.0..1.0) * scale * 0.5 * (y - x).abs();
        if (y - yp).abs() <= 0.5 * (y - x).abs() {
            return (x, y, yp);
        }
    }
}

/// `samples` random admissible triples per estimate, reproducible from
/// `seed`.
pub fn sweep_standard_estimates(kernel: &CauchyKernel, samples: usize, span: f64, seed: u64) -> Result<KernelSweep> {
    if samples == 0 {
        return Err(invalid("kernel sweep needs at least one sample"));
    }
    if !(span.is_finite() && span > 0.0) {
        return Err(invalid(format!("sweep span must be positive, got {span}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut size = BoundReport::new(SIZE_CHECK);
    let mut smoothness = BoundReport::new(SMOOTH_CHECK);
    let mut transposed = BoundReport::new(SMOOTH_T_CHECK);
    for _ in 0..samples {
        let (x, y, yp) = triple(&mut rng, span);
        size.push(kernel.size_row(x, y)?);
        smoothness.push(kernel.smoothness_row(x, y, yp, false)?);
        let (x, y, yp) = triple(&mut rng, span);
        transposed.push(kernel.smoothness_row(x, y, yp, true)?);
    }
    for r in [&mut size, &mut smoothness, &mut transposed] {
        r.metric("samples", samples as f64);
        r.metric("violations", r.violations() as f64);
        r.metric("worst_ratio", r.worst_ratio());
        r.metric("lipschitz_constant", kernel.curve().lipschitz_constant());
        r.metric("size_constant", kernel.size_constant());
    }
    Ok(KernelSweep {
        size,
        smoothness,
        transposed,
    })
}
