//! Bivariate copula link-based survival models under mixed censoring,
//! with bootstrap ranking-based variable selection, stepwise selection,
//! a data-generating simulator and a Monte Carlo evaluation harness.

pub mod brbvs;
pub mod copula;
pub mod data;
pub mod error;
pub mod fit;
pub mod likelihood;
pub mod margins;
pub mod optimizer;
pub mod prob;
pub mod ranking;
pub mod seeds;
pub mod simulator;
pub mod spline;
pub mod stats;
pub mod stepwise;

pub use brbvs::{run_brbvs, BrbvsConfig, BrbvsResult};
pub use copula::CopulaId;
pub use data::{CensorCode, DataSchema, Dataset, SubsampleIndex};
pub use error::{Error, Result};
pub use fit::{fit_model, fit_univariate, summarize, FittedModel, Measure, SummaryReport};
pub use likelihood::{BaselineConfig, ModelSpec, ModelWorkspace, ParamLayout};
pub use margins::{LinkKind, MarginModel, MonotoneBaseline};
pub use optimizer::{OptimOptions, OptimReport};
pub use ranking::{MarginRanking, Metric};
pub use simulator::{Scenario, SimConfig, SimOutput};
pub use stepwise::{backward, forward, select_link, StepTrace};
