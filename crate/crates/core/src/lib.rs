//! Sparse longitudinal generalized linear models.
//!
//! The coefficient matrix `W` (features x lags) is split as `W = U + V`.
//! A row-grouped `l_{1,2}` penalty on `U` selects features, a column-grouped
//! one on `V` selects lags. The penalized GEE objective is minimized by an
//! accelerated proximal-gradient inner solver, alternated with moment
//! re-estimation of the working correlation.
//!
//! ```no_run
//! use lgl::prelude::*;
//!
//! let cfg = SimConfig::default();
//! let sim = generate_regression(&cfg).unwrap();
//! let design = build_lagged(&sim.dataset, cfg.tau, false).unwrap();
//! let fit_cfg = FitConfig::new(1.0, 1.0);
//! let result = fit(&design, Family::Gaussian, CorrelationStructure::Ar1, &fit_cfg).unwrap();
//! println!("alpha = {}", result.working.alpha);
//! ```
//!
//! See the `examples/` directory for one runnable program per capability.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alternation;
pub mod cli;
pub mod correlation;
pub mod dataset;
pub mod error;
pub mod evalcv;
pub mod families;
pub mod fista;
mod linalg;
pub mod penalty;
pub mod simulate;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::alternation::{fit, predict, selected_support, FitConfig, FitResult, Support};
    pub use crate::correlation::{CorrelationStructure, WorkingCorrelation};
    pub use crate::dataset::{build_lagged, load_csv, split_temporal, CsvSchema, LaggedDesign, LongitudinalDataset};
    pub use crate::evalcv::{auc, grid_cv, nmse, CvSpec, Metric};
    pub use crate::families::Family;
    pub use crate::fista::{inner_solve, InnerConfig, StepMode};
    pub use crate::penalty::CoefficientPair;
    pub use crate::simulate::{generate_classification, generate_regression, SimConfig};
    pub use crate::{Error, Result};
}
