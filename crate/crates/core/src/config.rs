//! TOML experiment configuration shared by all subcommands.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compactness::WitnessCase;
use crate::curve::{LipschitzCurve, Profile};
use crate::error::{Error, Result};
use crate::kernel::CauchyKernel;
use crate::operator::{Exclusion, PvConfig};
use crate::sampling::{Grid, SampledFunction};
use crate::symbol::SymbolSpec;

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// A built-in symbol or a CSV file with columns `x,re,im`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum SymbolSource {
    Csv { csv: PathBuf },
    Spec(SymbolSpec),
}

impl<'de> Deserialize<'de> for SymbolSource {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let table = toml::Table::deserialize(d)?;
        if let Some(v) = table.get("csv") {
            if table.len() != 1 {
                return Err(serde::de::Error::custom("a csv symbol takes no other keys"));
            }
            let path = v.as_str().ok_or_else(|| serde::de::Error::custom("csv must be a path string"))?;
            return Ok(SymbolSource::Csv { csv: path.into() });
        }
        let spec: SymbolSpec = toml::Value::Table(table).try_into().map_err(serde::de::Error::custom)?;
        spec.validate().map_err(serde::de::Error::custom)?;
        Ok(SymbolSource::Spec(spec))
    }
}

impl SymbolSource {
    /// A CSV file is read as is; a built-in symbol is sampled on `grid`.
    pub fn load(&self, grid: Option<&Grid>) -> Result<SampledFunction> {
        match self {
            SymbolSource::Csv { csv } => SampledFunction::read_csv(File::open(csv).map_err(|e| {
                config_err(format!("cannot open {}: {e}", csv.display()))
            })?),
            SymbolSource::Spec(s) => {
                use crate::symbol::Symbol;
                let g = grid.ok_or_else(|| config_err("a [grid] table is required to sample a built-in symbol"))?;
                s.sample(g)
            }
        }
    }

    fn resolve(&mut self, base: &Path) {
        if let SymbolSource::Csv { csv } = self {
            if csv.is_relative() {
                *csv = base.join(&*csv);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub origin: f64,
    pub step: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatorSpec {
    /// Principal-value truncation; defaults to the grid step.
    pub truncation: Option<f64>,
    pub exclusion: Exclusion,
    /// Include `1/(πi)` in the kernel.
    pub prefactor: bool,
}

impl Default for OperatorSpec {
    fn default() -> Self {
        OperatorSpec {
            truncation: None,
            exclusion: Exclusion::default(),
            prefactor: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    #[default]
    Pv,
    Truncated,
    Maximal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSpec {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub mode: EvalMode,
    /// Truncation radius for `truncated`, ladder for `maximal`.
    #[serde(default)]
    pub radii: Vec<f64>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSweepSpec {
    pub samples: usize,
    pub span: f64,
}

impl Default for KernelSweepSpec {
    fn default() -> Self {
        KernelSweepSpec {
            samples: 100_000,
            span: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HomogeneitySpec {
    /// Uses `Affine(L)` (flat for 0) instead of `[curve]` when set.
    pub lipschitz: Option<f64>,
    pub m_ladder: Vec<f64>,
    pub r: f64,
    pub nodes_per_radius: usize,
    pub slack: f64,
}

impl Default for HomogeneitySpec {
    fn default() -> Self {
        HomogeneitySpec {
            lipschitz: None,
            m_ladder: vec![16.0, 64.0, 256.0, 1024.0],
            r: 1.0,
            nodes_per_radius: 256,
            slack: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Lemma41Spec {
    pub center: f64,
    pub radius: f64,
    pub p: f64,
    pub k_ladder: Vec<u32>,
    pub a1: f64,
    pub points_per_annulus: usize,
    /// Used when there is no `[grid]` and `b` is built in.
    pub nodes_per_radius: usize,
}

impl Default for Lemma41Spec {
    fn default() -> Self {
        Lemma41Spec {
            center: 0.0,
            radius: 1.0,
            p: 2.0,
            k_ladder: (3..=8).collect(),
            a1: 8.0,
            points_per_annulus: 512,
            nodes_per_radius: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FkSpec {
    /// Centres of the normalized bumps whose images are examined.
    pub positions: Vec<f64>,
    pub bump_radius: f64,
    pub p: f64,
    pub t_ladder: Vec<f64>,
    /// Shifts in units of the evaluation spacing.
    pub z_steps: Vec<i64>,
}

impl Default for FkSpec {
    fn default() -> Self {
        FkSpec {
            positions: vec![-0.5, 0.0, 0.5],
            bump_radius: 0.25,
            p: 2.0,
            t_ladder: vec![1.0, 2.0, 4.0],
            z_steps: vec![1, 2, 4, 8, 16, 32],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WitnessSpec {
    pub case: WitnessCase,
    pub a1: f64,
    pub a2: f64,
    pub len: usize,
    pub center: f64,
    /// First radius (small and large scale).
    pub r1: f64,
    /// Ratio between successive radii.
    pub ratio: f64,
    /// `C_ε` and the common radius for the far-away case.
    pub c_eps: f64,
    pub radius: f64,
    pub p: f64,
    /// Defaults to an eighth of the smallest radius.
    pub step: Option<f64>,
    pub resolution: f64,
    pub window_factor: f64,
    pub min_oscillation: f64,
    pub estimate_constants: bool,
}

impl Default for WitnessSpec {
    fn default() -> Self {
        WitnessSpec {
            case: WitnessCase::SmallScale,
            a1: 5.0,
            a2: 8.0,
            len: 4,
            center: 0.0,
            r1: 1.0 / 16.0,
            ratio: 16.0,
            c_eps: 1.0,
            radius: 0.5,
            p: 2.0,
            step: None,
            resolution: 32.0,
            window_factor: 256.0,
            min_oscillation: 0.0,
            estimate_constants: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormSpec {
    pub p: f64,
    pub family: Vec<SymbolSource>,
}

impl Default for NormSpec {
    fn default() -> Self {
        NormSpec { p: 2.0, family: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VmoSpec {
    pub deltas: Vec<f64>,
    pub radii: Vec<f64>,
}

impl Default for VmoSpec {
    fn default() -> Self {
        VmoSpec {
            deltas: vec![0.5, 0.25, 0.125, 0.0625],
            radii: vec![0.5, 1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "flat")]
    pub curve: Profile,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub operator: OperatorSpec,
    /// The symbol `b`.
    #[serde(default)]
    pub symbol: Option<SymbolSource>,
    /// The function `f` for `eval-operator`.
    #[serde(default)]
    pub input: Option<SymbolSource>,
    #[serde(default)]
    pub eval: Option<EvalSpec>,
    #[serde(default)]
    pub bmo: Option<WindowSpec>,
    #[serde(default)]
    pub vmo: VmoSpec,
    #[serde(default)]
    pub verify_kernel: KernelSweepSpec,
    #[serde(default)]
    pub homogeneity: HomogeneitySpec,
    #[serde(default)]
    pub lemma41: Lemma41Spec,
    #[serde(default)]
    pub fk: FkSpec,
    #[serde(default)]
    pub witness: WitnessSpec,
    #[serde(default)]
    pub commutator_norm: NormSpec,
}

fn flat() -> Profile {
    Profile::Flat
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config parses")
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a file; relative CSV paths are taken from the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => config_err(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for s in cfg
            .symbol
            .iter_mut()
            .chain(cfg.input.iter_mut())
            .chain(cfg.commutator_norm.family.iter_mut())
        {
            s.resolve(base);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        LipschitzCurve::new(self.curve).map_err(|e| config_err(format!("curve: {e}")))?;
        if let Some(g) = &self.grid {
            positive("grid.step", g.step)?;
            if !g.origin.is_finite() {
                return Err(config_err("grid.origin must be finite"));
            }
            if g.count == 0 {
                return Err(config_err("grid.count must be positive"));
            }
        }
        if let Some(t) = self.operator.truncation {
            positive("operator.truncation", t)?;
        }
        if let Some(e) = &self.eval {
            if !(e.lo < e.hi) {
                return Err(config_err(format!("eval window [{}, {}) is empty", e.lo, e.hi)));
            }
            if e.stride == 0 {
                return Err(config_err("eval.stride must be positive"));
            }
        }
        positive("verify_kernel.span", self.verify_kernel.span)?;
        if self.verify_kernel.samples == 0 {
            return Err(config_err("verify_kernel.samples must be positive"));
        }
        positive("homogeneity.r", self.homogeneity.r)?;
        positive("homogeneity.slack", self.homogeneity.slack)?;
        positive("lemma41.radius", self.lemma41.radius)?;
        positive("lemma41.p", self.lemma41.p - 1.0).map_err(|_| config_err("lemma41.p must exceed 1"))?;
        positive("fk.bump_radius", self.fk.bump_radius)?;
        positive("witness.r1", self.witness.r1)?;
        positive("witness.ratio", self.witness.ratio)?;
        positive("witness.c_eps", self.witness.c_eps)?;
        positive("witness.radius", self.witness.radius)?;
        if let Some(s) = self.witness.step {
            positive("witness.step", s)?;
        }
        Ok(())
    }

    pub fn curve(&self) -> Result<LipschitzCurve> {
        LipschitzCurve::new(self.curve)
    }

    pub fn kernel(&self) -> Result<CauchyKernel> {
        Ok(CauchyKernel::with_prefactor(self.curve()?, self.operator.prefactor))
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = self.grid.ok_or_else(|| config_err("missing [grid] table with origin, step and count"))?;
        Grid::new(g.origin, g.step, g.count)
    }

    pub fn pv_config(&self, step: f64) -> PvConfig {
        let cfg = PvConfig::for_step(step).with_exclusion(self.operator.exclusion);
        match self.operator.truncation {
            Some(t) => cfg.with_truncation(t),
            None => cfg,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
seed = 11
[curve]
kind = "sawtooth"
amplitude = 1.0
period = 4.0
[grid]
origin = -1.0
step = 0.01
count = 201
[operator]
exclusion = "node-skip"
truncation = 0.02
[symbol]
kind = "truncated-log"
[input]
csv = "f.csv"
[eval]
lo = -2.0
hi = 2.0
stride = 2
mode = "maximal"
radii = [0.1, 0.2]
[witness]
case = "far-away"
step = 0.001
[commutator_norm]
family = [{ kind = "indicator", lo = -0.5, hi = 0.5 }, { csv = "g.csv" }]
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml(FULL).unwrap();
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.operator.exclusion, Exclusion::NodeSkip);
        assert_eq!(cfg.witness.case, WitnessCase::FarAway);
        assert_eq!(cfg.commutator_norm.family.len(), 2);
        assert!(matches!(cfg.input, Some(SymbolSource::Csv { .. })));
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        let d = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&d.to_toml().unwrap()).unwrap(), d);
    }

    #[test]
    fn diagnostics_name_the_field() {
        let e = ExperimentConfig::from_toml("[grid]\norigin = 0.0\ncount = 10\n").unwrap_err();
        assert!(e.to_string().contains("step"), "{e}");
        let e = ExperimentConfig::from_toml("[grid]\norigin = 0.0\nstep = -1.0\ncount = 10\n").unwrap_err();
        assert!(e.to_string().contains("grid.step"), "{e}");
        let e = ExperimentConfig::from_toml("[operator]\nexclusoin = \"node-skip\"\n").unwrap_err();
        assert!(e.to_string().contains("exclusoin"), "{e}");
        let e = ExperimentConfig::from_toml("[symbol]\nkind = \"smooth-bump\"\nradius = -1.0\n").unwrap_err();
        assert!(e.to_string().contains("radius"), "{e}");
        assert!(ExperimentConfig::default().grid().is_err());
    }
}
