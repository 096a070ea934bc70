//! The seven fit routines and their shared configuration.

mod criteria;
mod optimizer;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{check_series, volatility_path, GarchParams, VolInit, IOTA};
use crate::trimming::{
    fractile_schedule, trim_by_lag_y_with, Redescender, TrimDiagnostics, TrimMode, TrimPlan,
};

pub use criteria::{
    wlqml_weights, wlqml_weights_with_threshold, LogLadCriterion, MnwmCriterion, MnwmMoments,
    PowerLawCriterion, TrimmedGaussianCriterion, WlqmlCriterion,
};
pub use optimizer::{optimize, Bounds, Objective, OptimizerConfig, OptimizerKind};

/// Default tail fraction `lambda` in `k2 = max{1, [lambda n / ln n]}`.
pub const DEFAULT_LAMBDA: f64 = 0.025;

/// Settings shared by all estimators. Fields an estimator does not use are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub plan: TrimPlan,
    /// MNWM transform.
    pub redescender: Redescender,
    /// Power-law index for PQML and PQMTTL.
    pub pqml_index: f64,
    pub optimizer: OptimizerConfig,
    /// Starting point; `None` uses `(0.1 mean(y^2), 0.05, 0.85)`.
    pub theta_init: Option<GarchParams>,
    /// Multiply by the lagged-`|y|` indicator (QMTTL and MNWM).
    pub use_y_trim: bool,
    /// Upper bound on omega; `None` uses `max(2, 10 mean(y^2))`.
    pub omega_upper: Option<f64>,
    /// Starting value of the volatility recursion.
    pub vol_init: VolInit,
}

impl FitConfig {
    /// Strong-asymmetric plan with `lambda = 0.025` for a sample of `n`.
    pub fn for_sample(n: usize) -> Result<Self> {
        Ok(Self::with_plan(fractile_schedule(n, DEFAULT_LAMBDA, TrimMode::StrongAsym)?))
    }

    pub fn with_plan(plan: TrimPlan) -> Self {
        Self {
            plan,
            redescender: Redescender::SimpleTrim,
            pqml_index: 3.5,
            optimizer: OptimizerConfig::default(),
            theta_init: None,
            use_y_trim: true,
            omega_upper: None,
            vol_init: VolInit::MeanSquare,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        self.redescender.validate()?;
        if !(self.pqml_index > 1.0) || !self.pqml_index.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "power-law index must exceed 1, got {}",
                self.pqml_index
            )));
        }
        if let Some(w) = self.omega_upper {
            if !(w > IOTA) || !w.is_finite() {
                return Err(Error::InvalidConfig(format!("omega upper bound {w} is not usable")));
            }
        }
        Ok(())
    }
}

/// Outcome of one fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta_hat: GarchParams,
    pub criterion_value: f64,
    /// Trimming at `theta_hat` (empty for untrimmed estimators).
    pub trim: TrimDiagnostics,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    /// Best criterion value after each iteration.
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Qmttl,
    Mnwm,
    Qml,
    LogLad,
    Wlqml,
    Pqml,
    Pqmttl,
}

impl Estimator {
    pub const ALL: [Estimator; 7] = [
        Estimator::Qmttl,
        Estimator::Mnwm,
        Estimator::Qml,
        Estimator::LogLad,
        Estimator::Wlqml,
        Estimator::Pqml,
        Estimator::Pqmttl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Qmttl => "qmttl",
            Estimator::Mnwm => "mnwm",
            Estimator::Qml => "qml",
            Estimator::LogLad => "loglad",
            Estimator::Wlqml => "wlqml",
            Estimator::Pqml => "pqml",
            Estimator::Pqmttl => "pqmttl",
        }
    }

    pub fn fit(self, series: &[f64], config: &FitConfig) -> Result<FitResult> {
        match self {
            Estimator::Qmttl => qmttl_fit(series, config),
            Estimator::Mnwm => mnwm_fit(series, config),
            Estimator::Qml => qml_fit(series, config),
            Estimator::LogLad => log_lad_fit(series, config),
            Estimator::Wlqml => wlqml_fit(series, config),
            Estimator::Pqml => pqml_fit(series, config),
            Estimator::Pqmttl => pqmttl_fit(series, config),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Estimator::ALL
            .into_iter()
            .find(|e| e.name() == lower || (lower == "log-lad" && *e == Estimator::LogLad))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown estimator `{s}`")))
    }
}

struct Prepared {
    start: [f64; 3],
    bounds: Bounds,
    h1: Option<f64>,
}

fn prepare(series: &[f64], config: &FitConfig) -> Result<Prepared> {
    config.validate()?;
    check_series(series)?;
    let first = series[0];
    if series.iter().all(|y| *y == first) {
        return Err(Error::InvalidData(if first == 0.0 {
            "series is identically zero".into()
        } else {
            "series is constant".into()
        }));
    }
    let msq = series.iter().map(|y| y * y).sum::<f64>() / series.len() as f64;
    let omega_upper = config.omega_upper.unwrap_or_else(|| (10.0 * msq).max(2.0));
    let bounds = Bounds::garch(omega_upper);
    let start = match &config.theta_init {
        Some(p) => p.to_array(),
        None => [0.1 * msq, 0.05, 0.85],
    };
    let mut start = start;
    bounds.project(&mut start);
    Ok(Prepared { start, bounds, h1: config.vol_init.start(series) })
}

fn lag_indicator(series: &[f64], config: &FitConfig) -> Option<Vec<bool>> {
    (config.use_y_trim && config.plan.k_y > 0)
        .then(|| trim_by_lag_y_with(series, config.plan.k_y, config.plan.exclusive))
}

fn room_check(n: usize, needed: usize, what: &str) -> Result<()> {
    if n <= needed {
        return Err(Error::InvalidConfig(format!(
            "{what} needs more than {needed} observations, got {n}"
        )));
    }
    Ok(())
}

/// Tail-trimmed Gaussian quasi-likelihood with trimming by the order
/// statistics of `e_t^2(theta) - 1` and, optionally, by lagged `|y|`.
pub fn qmttl_fit(series: &[f64], config: &FitConfig) -> Result<FitResult> {
    let prep = prepare(series, config)?;
    let plan = &config.plan;
    room_check(series.len(), plan.k1 + plan.k2 + 2, "QMTTL")?;
    plan.validate(series.len())?;
    let crit = TrimmedGaussianCriterion::new(
        series,
        plan.k1,
        plan.k2,
        plan.exclusive,
        lag_indicator(series, config),
    )
    .with_start(prep.h1);
    let mut fit = optimize(&crit, prep.start, &prep.bounds, &config.optimizer)?;
    fit.trim = crit.indicators(&fit.theta_hat.to_array()).1;
    Ok(fit)
}

/// Gaussian QML without trimming.
pub fn qml_fit(series: &[f64], config: &FitConfig) -> Result<FitResult> {
    let prep = prepare(series, config)?;
    let crit = TrimmedGaussianCriterion::untrimmed(series).with_start(prep.h1);
    optimize(&crit, prep.start, &prep.bounds, &config.optimizer)
}

/// Method of negligibly weighted moments with threshold the `k2`-th largest
/// `|e_t(theta)|`.
pub fn mnwm_fit(series: &[f64], config: &FitConfig) -> Result<FitResult> {
    let prep = prepare(series, config)?;
    let k = config.plan.k2;
    room_check(series.len(), k + 2, "MNWM")?;
    let crit = MnwmCriterion::new(
        series,
        k,
        config.plan.exclusive,
        config.redescender,
        lag_indicator(series, config),
    )
    .with_start(prep.h1);
    let mut fit = optimize(&crit, prep.start, &prep.bounds, &config.optimizer)?;
    // The re-centred moments do not see a common rescaling of (omega, alpha):
    // h -> c h leaves them unchanged. Fix the scale by mean e_t^2 = 1.
    let mut theta = fit.theta_hat.to_array();
    let path = volatility_path(theta, series, prep.h1);
    let c = series[1..].iter().zip(&path.h[1..]).map(|(y, h)| y * y / h).sum::<f64>()
        / (series.len() - 1) as f64;
    theta[0] *= c;
    theta[1] *= c;
    prep.bounds.project(&mut theta);
    fit.theta_hat = GarchParams::from_array(theta)?;
    fit.criterion_value = crit.value(&theta);
    let m = crit.moments(&theta);
    fit.trim = TrimDiagnostics {
        neg_threshold: f64::NEG_INFINITY,
        pos_threshold: m.threshold,
        trimmed_pos: m.trimmed,
        inclusive_count: m.trimmed,
        exclusive_count: k,
        trimmed_y: lag_indicator(series, config)
            .map_or(0, |l| l[1..].iter().filter(|k| !**k).count()),
        ..Default::default()
    };
    Ok(fit)
}

/// Least absolute deviations of `ln y_t^2` from `ln h_t`. Zero returns are
/// dropped; more than 10% zeros is an error.
pub fn log_lad_fit(series: &[f64], config: &FitConfig) -> Result<FitResult> {
    let prep = prepare(series, config)?;
    let crit = LogLadCriterion::new(series).with_start(prep.h1);
    let zeros = crit.zero_count();
    let used = series.len() - 1;
    if zeros * 10 > used {
        return Err(Error::InvalidData(format!(
            "{zeros} of {used} returns are zero; Log-LAD needs at least 90% nonzero"
        )));
    }
    if zeros > 0 {
        log::warn!("Log-LAD drops {zeros} zero returns");
    }
    let mut opt = config.optimizer;
    if opt.kind == OptimizerKind::ProjectedGradient {
        log::warn!("Log-LAD criterion is not smooth; using Nelder-Mead");
        opt.kind = OptimizerConfig::default().kind;
    }
    optimize(&crit, prep.start, &prep.bounds, &opt)
}

/// Weighted Laplace QML with outlier-downweighting weights.
pub fn wlqml_fit(series: &[f64], config: &FitConfig) -> Result<FitResult> {
    if series.len() < 20 {
        return Err(Error::InvalidInput(format!(
            "WLQML needs at least 20 observations, got {}",
            series.len()
        )));
    }
    let prep = prepare(series, config)?;
    let crit = WlqmlCriterion::new(series).with_start(prep.h1);
    optimize(&crit, prep.start, &prep.bounds, &config.optimizer)
}

/// Power-law QML with index `config.pqml_index`.
pub fn pqml_fit(series: &[f64], config: &FitConfig) -> Result<FitResult> {
    let prep = prepare(series, config)?;
    let crit = PowerLawCriterion::new(series, config.pqml_index, 0, 0, false).with_start(prep.h1);
    optimize(&crit, prep.start, &prep.bounds, &config.optimizer)
}

/// Power-law QML trimmed by the order statistics of `u_t = |e_t|/(1+|e_t|) - 1/index`.
pub fn pqmttl_fit(series: &[f64], config: &FitConfig) -> Result<FitResult> {
    let prep = prepare(series, config)?;
    let plan = &config.plan;
    room_check(series.len(), plan.k1 + plan.k2 + 2, "PQMTTL")?;
    let crit = PowerLawCriterion::new(series, config.pqml_index, plan.k1, plan.k2, plan.exclusive)
        .with_start(prep.h1);
    let mut fit = optimize(&crit, prep.start, &prep.bounds, &config.optimizer)?;
    fit.trim = crit.diagnostics(&fit.theta_hat.to_array());
    Ok(fit)
}
