//! Quadrature, oscillation functionals and compactness diagnostics for the
//! Cauchy integral on Lipschitz graphs and its commutators.

pub mod bmo;
pub mod cli;
pub mod commutator;
pub mod compactness;
pub mod config;
pub mod curve;
pub mod error;
pub mod kernel;
pub mod operator;
pub mod report;
pub mod sampling;
pub mod symbol;
pub mod testfn;

pub use bmo::{MedianResult, VmoProfile};
pub use config::ExperimentConfig;
pub use curve::{LipschitzCurve, Profile};
pub use error::{Error, Result};
pub use kernel::CauchyKernel;
pub use operator::{EvalPlan, EvalWindow, Exclusion, NormEstimate, PvConfig};
pub use report::{BoundReport, BoundRow};
pub use sampling::{Annulus, Grid, Interval, LpNorm, PatchedFunction, SampledFunction};
pub use symbol::{Scaled, Symbol, SymbolSpec};
