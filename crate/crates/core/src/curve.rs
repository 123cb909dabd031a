//! Lipschitz graphs `Γ = {x + iA(x)}` with closed-form profiles.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::report::{BoundReport, BoundRow};

/// Shape of the graph function `A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    Flat,
    Affine { slope: f64 },
    /// Triangle wave of the given period, peaking at `amplitude` a quarter
    /// period after each zero crossing.
    Sawtooth { amplitude: f64, period: f64 },
    /// Gaussian `height * exp(-(x / width)^2)`.
    SmoothBump { height: f64, width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Profile", into = "Profile")]
pub struct LipschitzCurve {
    profile: Profile,
    lipschitz: f64,
}

impl TryFrom<Profile> for LipschitzCurve {
    type Error = crate::error::Error;

    fn try_from(profile: Profile) -> Result<Self> {
        LipschitzCurve::new(profile)
    }
}

impl From<LipschitzCurve> for Profile {
    fn from(c: LipschitzCurve) -> Profile {
        c.profile
    }
}

impl LipschitzCurve {
    pub fn new(profile: Profile) -> Result<Self> {
        let lipschitz = match profile {
            Profile::Flat => 0.0,
            Profile::Affine { slope } => {
                finite("slope", slope)?;
                slope.abs()
            }
            Profile::Sawtooth { amplitude, period } => {
                finite("amplitude", amplitude)?;
                positive("period", period)?;
                amplitude.abs() * 4.0 / period
            }
            Profile::SmoothBump { height, width } => {
                finite("height", height)?;
                positive("width", width)?;
                // max |A'| is attained at x = width / sqrt(2)
                SQRT_2 * height.abs() * (-0.5f64).exp() / width
            }
        };
        Ok(LipschitzCurve { profile, lipschitz })
    }

    pub fn flat() -> Self {
        LipschitzCurve {
            profile: Profile::Flat,
            lipschitz: 0.0,
        }
    }

    pub fn affine(slope: f64) -> Result<Self> {
        Self::new(Profile::Affine { slope })
    }

    pub fn sawtooth(amplitude: f64, period: f64) -> Result<Self> {
        Self::new(Profile::Sawtooth { amplitude, period })
    }

    pub fn smooth_bump(height: f64, width: f64) -> Result<Self> {
        Self::new(Profile::SmoothBump { height, width })
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    /// `L = ‖A'‖_∞`, exact for every profile.
    pub fn lipschitz_constant(&self) -> f64 {
        self.lipschitz
    }

    pub fn height(&self, x: f64) -> f64 {
        match self.profile {
            Profile::Flat => 0.0,
            Profile::Affine { slope } => slope * x,
            Profile::Sawtooth { amplitude, period } => amplitude * triangle((x / period).rem_euclid(1.0)),
            Profile::SmoothBump { height, width } => height * (-(x / width).powi(2)).exp(),
        }
    }

    /// `A'(x)`; at the corners of the sawtooth the right derivative.
    pub fn slope(&self, x: f64) -> f64 {
        match self.profile {
            Profile::Flat => 0.0,
            Profile::Affine { slope } => slope,
            Profile::Sawtooth { amplitude, period } => {
                let u = (x / period).rem_euclid(1.0);
                let s = 4.0 * amplitude / period;
                if (0.25..0.75).contains(&u) {
                    -s
                } else {
                    s
                }
            }
            Profile::SmoothBump { height, width } => {
                -2.0 * height * x / (width * width) * (-(x / width).powi(2)).exp()
            }
        }
    }

    /// `A(x2) - A(x1)`, computed without the cancellation of subtracting two
    /// heights when the points are close. Antisymmetric under swapping.
    pub fn rise(&self, x1: f64, x2: f64) -> f64 {
        match self.profile {
            Profile::Flat => 0.0,
            Profile::Affine { slope } => slope * (x2 - x1),
            Profile::Sawtooth { amplitude, period } => {
                if x1 <= x2 {
                    sawtooth_rise(amplitude, period, x1, x2)
                } else {
                    -sawtooth_rise(amplitude, period, x2, x1)
                }
            }
            Profile::SmoothBump { height, width } => {
                let w2 = width * width;
                // factor out the larger exponential so expm1 never overflows
                if x1.abs() <= x2.abs() {
                    height * (-x1 * x1 / w2).exp() * ((x1 - x2) * (x1 + x2) / w2).exp_m1()
                } else {
                    -(height * (-x2 * x2 / w2).exp() * ((x2 - x1) * (x2 + x1) / w2).exp_m1())
                }
            }
        }
    }

    /// Largest difference quotient over the sample pairs, compared against
    /// the stored `L` with `1e-12` relative slack.
    pub fn verify_lipschitz(&self, samples: &[(f64, f64)]) -> Result<BoundReport> {
        if samples.is_empty() {
            return Err(invalid("no sample pairs"));
        }
        let bound = self.lipschitz * (1.0 + 1e-12);
        let mut report = BoundReport::new("|A(x1) - A(x2)| / |x1 - x2| <= L");
        let mut worst = 0.0f64;
        for &(x1, x2) in samples {
            if !(x1.is_finite() && x2.is_finite()) {
                return Err(invalid(format!("non-finite sample pair ({x1}, {x2})")));
            }
            if x1 == x2 {
                return Err(invalid(format!("coincident sample pair at x = {x1}")));
            }
            let q = self.rise(x1, x2).abs() / (x2 - x1).abs();
            worst = worst.max(q);
            report.push(BoundRow::upper(x1, x2, None, q, bound));
        }
        report.metric("max_quotient", worst);
        report.metric("lipschitz_constant", self.lipschitz);
        Ok(report)
    }
}

fn triangle(u: f64) -> f64 {
    if u < 0.25 {
        4.0 * u
    } else if u < 0.75 {
        2.0 - 4.0 * u
    } else {
        4.0 * u - 4.0
    }
}

/// Rise of the triangle wave over `[a, b]`, `a <= b`, accumulated segment by
/// segment between corners so that `|rise| <= slope * (b - a)` survives
/// rounding.
fn sawtooth_rise(amplitude: f64, period: f64, a: f64, b: f64) -> f64 {
    if b - a > period {
        return amplitude * (triangle((b / period).rem_euclid(1.0)) - triangle((a / period).rem_euclid(1.0)));
    }
    let slope = 4.0 * amplitude / period;
    // corners sit at period * (m / 2 + 1/4); the segment ending at corner m
    // rises when m is even
    let corner = |m: i64| period * (m as f64 * 0.5 + 0.25);
    let mut m = ((a / period - 0.25) * 2.0).floor() as i64 + 1;
    while corner(m) <= a {
        m += 1;
    }
    while corner(m - 1) > a {
        m -= 1;
    }
    let mut pos = a;
    let mut total = 0.0;
    loop {
        let c = corner(m);
        let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        if c >= b {
            total += sign * (b - pos);
            break;
        }
        total += sign * (c - pos);
        pos = c;
        m += 1;
    }
    slope * total
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite, got {v}")))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn builtins() -> Vec<LipschitzCurve> {
        vec![
            LipschitzCurve::flat(),
            LipschitzCurve::affine(0.5).unwrap(),
            LipschitzCurve::affine(-3.0).unwrap(),
            LipschitzCurve::sawtooth(1.0, 4.0).unwrap(),
            LipschitzCurve::sawtooth(0.3, 0.7).unwrap(),
            LipschitzCurve::smooth_bump(2.0, 1.5).unwrap(),
        ]
    }

    #[test]
    fn heights_match_closed_forms() {
        assert_eq!(LipschitzCurve::flat().height(3.7), 0.0);
        assert_eq!(LipschitzCurve::affine(0.5).unwrap().height(2.0), 1.0);
        let saw = LipschitzCurve::sawtooth(1.0, 4.0).unwrap();
        assert_eq!(saw.height(1.0), 1.0);
        assert_eq!(saw.height(0.0), 0.0);
        assert_eq!(saw.height(3.0), -1.0);
        assert_eq!(saw.height(2.0), 0.0);
        assert_eq!(saw.height(-1.0), -1.0);
        assert_eq!(saw.height(0.5), 0.5);
    }

    #[test]
    fn stored_constants() {
        assert_eq!(LipschitzCurve::flat().lipschitz_constant(), 0.0);
        assert_eq!(LipschitzCurve::affine(-0.5).unwrap().lipschitz_constant(), 0.5);
        assert_eq!(LipschitzCurve::sawtooth(1.0, 4.0).unwrap().lipschitz_constant(), 1.0);
        // brute-force the maximal slope of the Gaussian
        let bump = LipschitzCurve::smooth_bump(2.0, 1.5).unwrap();
        let max = (0..200_000)
            .map(|i| bump.slope(-5.0 + i as f64 * 5e-5).abs())
            .fold(0.0, f64::max);
        assert!((max - bump.lipschitz_constant()).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(LipschitzCurve::sawtooth(1.0, 0.0).is_err());
        assert!(LipschitzCurve::smooth_bump(1.0, -1.0).is_err());
        assert!(LipschitzCurve::affine(f64::NAN).is_err());
    }

    #[test]
    fn rise_matches_height_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for c in builtins() {
            for _ in 0..2000 {
                let a: f64 = rng.gen_range(-20.0..20.0);
                let b: f64 = rng.gen_range(-20.0..20.0);
                let direct = c.height(b) - c.height(a);
                assert!((c.rise(a, b) - direct).abs() < 1e-12, "{c:?} {a} {b}");
                assert_eq!(c.rise(a, b), -c.rise(b, a));
            }
        }
    }

    #[test]
    fn verify_examples() {
        let pairs = [(0.0, 1.0), (-3.0, 2.5), (10.0, 10.001)];
        let flat = LipschitzCurve::flat().verify_lipschitz(&pairs).unwrap();
        assert!(flat.pass);
        assert_eq!(flat.get("max_quotient"), Some(0.0));
        let aff = LipschitzCurve::affine(0.5).unwrap().verify_lipschitz(&pairs).unwrap();
        assert!(aff.pass);
        assert!((aff.get("max_quotient").unwrap() - 0.5).abs() < 1e-12);
        let saw = LipschitzCurve::sawtooth(1.0, 4.0).unwrap();
        let dense: Vec<(f64, f64)> = (0..4000).map(|i| (i as f64 * 1e-3, i as f64 * 1e-3 + 1e-4)).collect();
        let rep = saw.verify_lipschitz(&dense).unwrap();
        assert!(rep.pass);
        assert!(rep.get("max_quotient").unwrap() <= 1.0 + 1e-12);
        assert!(rep.get("max_quotient").unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn coincident_pair_rejected() {
        assert!(LipschitzCurve::flat().verify_lipschitz(&[(1.0, 1.0)]).is_err());
        assert!(LipschitzCurve::flat().verify_lipschitz(&[]).is_err());
    }

    #[test]
    fn random_pairs_never_exceed_stored_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for c in builtins() {
            let pairs: Vec<(f64, f64)> = (0..10_000)
                .map(|_| (rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0)))
                .collect();
            let rep = c.verify_lipschitz(&pairs).unwrap();
            assert_eq!(rep.violations(), 0, "{c:?}");
        }
    }

    #[test]
    fn close_pairs_straddling_corners() {
        let saw = LipschitzCurve::sawtooth(1.0, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pairs: Vec<(f64, f64)> = (0..10_000)
            .map(|_| {
                let corner = 2.0 * rng.gen_range(-50i32..50) as f64 + 1.0;
                let d: f64 = rng.gen_range(1e-9..1e-3);
                (corner - d * rng.gen::<f64>(), corner + d)
            })
            .collect();
        assert_eq!(saw.verify_lipschitz(&pairs).unwrap().violations(), 0);
    }

    #[test]
    fn serde_roundtrip_through_profile() {
        let c = LipschitzCurve::sawtooth(1.0, 4.0).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, r#"{"kind":"sawtooth","amplitude":1.0,"period":4.0}"#);
        let back: LipschitzCurve = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<LipschitzCurve>(r#"{"kind":"sawtooth","amplitude":1.0,"period":-4.0}"#).is_err());
    }
}
