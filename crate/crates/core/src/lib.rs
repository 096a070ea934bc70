//! Robust estimation of GARCH(1,1) volatility models under heavy-tailed errors.
//!
//! The crate provides the tail-trimmed quasi-maximum likelihood estimator
//! (QMTTL) and the method of negligibly weighted moments (MNWM), five
//! benchmark estimators (QML, Log-LAD, weighted Laplace QML, power-law QML
//! and its tail-trimmed variant), heavy-tail robust standard errors and Wald
//! tests, and a Monte Carlo harness for comparing the estimators.
//!
//! ```
//! use tailgarch::{simulate_garch, ErrorDist, Estimator, FitConfig, GarchParams, SimConfig};
//!
//! let theta0 = GarchParams::new(0.05, 0.05, 0.90).unwrap();
//! let y = simulate_garch(&theta0, &ErrorDist::gaussian(), 400, 7, &SimConfig::default()).unwrap();
//! let config = FitConfig::for_sample(y.len()).unwrap();
//! let fit = Estimator::Qmttl.fit(&y, &config).unwrap();
//! assert!(fit.theta_hat.beta() > 0.0);
//! ```

// `!(x > 0.0)` style checks are there to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod inference;
pub mod io;
pub mod model;
pub mod montecarlo;
pub mod trimming;

pub use error::{Error, Result};
pub use estimators::{
    optimize, Estimator, FitConfig, FitResult, Objective, OptimizerConfig, OptimizerKind,
};
pub use inference::{ks_normality, mnwm_scale, qmttl_scale, wald_test, ScaleEstimate, WaldResult};
pub use io::{load_returns, PriceMode, ReturnsSeries};
pub use model::{
    iterate_volatility, iterate_volatility_with, sample_error, score_path, simulate_garch, ErrorDist, ErrorLaw,
    GarchParams, SimConfig, Standardization, VolInit, VolPath, IOTA,
};
pub use montecarlo::{EstimatorSpec, ExperimentSpec, McReport};
pub use trimming::{
    fractile_schedule, pareto_balance_k1, redescend_weight, thin_tail_schedule, trim_by_lag_y,
    trim_indicators, Redescender, TrimDiagnostics, TrimMode, TrimPlan,
};
