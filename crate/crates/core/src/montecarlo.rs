//! Monte Carlo harness: simulate, fit every configured estimator, summarize.
//!
//! Replication `r` draws from its own ChaCha stream of `seed`, so results do
//! not depend on the number of threads or the order replications finish.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::{Estimator, FitConfig, DEFAULT_LAMBDA};
use crate::inference::{ks_normality, mnwm_scale, qmttl_scale};
use crate::model::{simulate_garch_with_rng, stream_rng, ErrorDist, ErrorLaw, GarchParams, SimConfig};
use crate::trimming::{fractile_schedule, pqmttl_schedule, Redescender, TrimMode, TrimPlan};

/// Two-sided 5% standard normal critical value.
pub const Z_975: f64 = 1.959964;
/// Rows with fewer usable replications are flagged incomplete.
pub const MIN_COMPLETE: usize = 30;
/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "TAILGARCH_THREADS";

/// One estimator column of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSpec {
    /// Preset name, e.g. `qmttl-sa`.
    pub label: String,
    pub estimator: Estimator,
    pub trim_mode: Option<TrimMode>,
    pub redescender: Redescender,
    pub pqml_index: f64,
}

impl EstimatorSpec {
    pub fn new(estimator: Estimator) -> Self {
        Self {
            label: estimator.name().to_string(),
            estimator,
            trim_mode: None,
            redescender: Redescender::SimpleTrim,
            pqml_index: 3.5,
        }
    }

    /// Presets: `qmttl-{sa,wa,s}`, `mnwm-{i,h,t,e}`, `pqmttl-{sa,wa,s}`,
    /// `pqml-<index>`, `qml`, `loglad`, `wlqml`. A bare `qmttl`, `mnwm`,
    /// `pqml` or `pqmttl` takes the first variant.
    pub fn preset(name: &str) -> Result<Self> {
        let lower = name.trim().to_ascii_lowercase();
        let (base, variant) = match lower.split_once('-') {
            Some((b, v)) if b != "log" => (b.to_string(), Some(v.to_string())),
            _ => (lower.clone(), None),
        };
        let unknown = || Error::InvalidConfig(format!("unknown estimator `{name}`"));
        let estimator: Estimator = base.parse().map_err(|_| unknown())?;
        let mut spec = Self::new(estimator);
        spec.label = lower.clone();
        match estimator {
            Estimator::Qmttl | Estimator::Pqmttl => {
                let mode: TrimMode = variant.as_deref().unwrap_or("sa").parse().map_err(|_| unknown())?;
                if mode == TrimMode::Custom {
                    return Err(unknown());
                }
                spec.trim_mode = Some(mode);
            }
            Estimator::Mnwm => {
                spec.redescender = variant.as_deref().unwrap_or("i").parse().map_err(|_| unknown())?;
            }
            Estimator::Pqml => {
                if let Some(v) = &variant {
                    spec.pqml_index = v.parse().map_err(|_| unknown())?;
                    if !(spec.pqml_index > 1.0) {
                        return Err(unknown());
                    }
                }
            }
            _ if variant.is_some() => return Err(unknown()),
            _ => {}
        }
        if variant.is_none() {
            spec.label = spec.default_label();
        }
        Ok(spec)
    }

    fn default_label(&self) -> String {
        match self.estimator {
            Estimator::Qmttl | Estimator::Pqmttl => format!(
                "{}-{}",
                self.estimator.name(),
                self.trim_mode.map_or("sa", TrimMode::short_name)
            ),
            Estimator::Mnwm => format!("mnwm-{}", self.redescender.short_name()),
            Estimator::Pqml => format!("pqml-{}", self.pqml_index),
            e => e.name().to_string(),
        }
    }

    /// Fit configuration for a sample of `n`.
    pub fn config(&self, n: usize, lambda: f64, exclusive: bool) -> Result<FitConfig> {
        let plan = match self.estimator {
            Estimator::Qmttl => fractile_schedule(n, lambda, self.trim_mode.unwrap_or(TrimMode::StrongAsym))?,
            Estimator::Pqmttl => pqmttl_schedule(n, lambda, self.trim_mode.unwrap_or(TrimMode::StrongAsym))?,
            Estimator::Mnwm => {
                let p = fractile_schedule(n, lambda, TrimMode::Symmetric)?;
                TrimPlan::custom(0, p.k2, p.k_y)
            }
            _ => TrimPlan::disabled(),
        };
        let mut cfg = FitConfig::with_plan(plan.with_exclusive(exclusive));
        cfg.redescender = self.redescender;
        cfg.pqml_index = self.pqml_index;
        Ok(cfg)
    }
}

/// Settings of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub n: usize,
    pub reps: usize,
    pub dist: ErrorDist,
    pub theta0: GarchParams,
    pub estimators: Vec<EstimatorSpec>,
    /// Values of beta tested at 5%; the first is usually the true value.
    pub hypotheses: Vec<f64>,
    pub seed: u64,
    pub lambda: f64,
    /// Trim exactly `k` per tail instead of the closed-interval convention.
    pub exclusive: bool,
    pub sim: SimConfig,
    /// Also compute analytic standard errors (QMTTL, QML and MNWM rows).
    pub analytic_se: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            n: 800,
            reps: 1000,
            dist: ErrorDist::gaussian(),
            theta0: GarchParams::new(0.05, 0.05, 0.90).expect("valid default"),
            estimators: vec![EstimatorSpec::preset("qmttl-sa").expect("valid preset")],
            hypotheses: vec![0.9, 0.7, 0.5],
            seed: 20240101,
            lambda: DEFAULT_LAMBDA,
            exclusive: false,
            sim: SimConfig::default(),
            analytic_se: false,
        }
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| bad_value(key, s)))
        .collect()
}

fn bad_value(key: &str, value: &str) -> Error {
    Error::InvalidConfig(format!("key `{key}`: cannot parse `{value}`"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad_value(key, value)),
    }
}

impl ExperimentSpec {
    /// Parse `key = value` lines; `#` starts a comment. Keys: `n`, `reps`,
    /// `dist`, `theta0`, `estimators`, `hypotheses`, `seed`, `lambda`,
    /// `trim_convention` (`inclusive` | `exclusive`), `burn_in_factor`,
    /// `analytic_se`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            spec.set(key.trim(), value.trim())?;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Set one key, as in a spec file.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n" => self.n = value.parse().map_err(|_| bad_value(key, value))?,
            "reps" | "R" => self.reps = value.parse().map_err(|_| bad_value(key, value))?,
            "seed" => self.seed = value.parse().map_err(|_| bad_value(key, value))?,
            "lambda" => self.lambda = value.parse().map_err(|_| bad_value(key, value))?,
            "dist" => {
                let law: ErrorLaw = value.parse().map_err(|_| bad_value(key, value))?;
                self.dist = ErrorDist { law, ..self.dist };
            }
            "theta0" => {
                let v: Vec<f64> = parse_list(key, value)?;
                let arr: [f64; 3] = v.try_into().map_err(|_| bad_value(key, value))?;
                self.theta0 = GarchParams::from_array(arr)
                    .map_err(|e| Error::InvalidConfig(format!("key `theta0`: {e}")))?;
            }
            "estimators" => {
                self.estimators = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        EstimatorSpec::preset(s).map_err(|_| {
                            Error::InvalidConfig(format!("key `estimators`: unknown estimator `{s}`"))
                        })
                    })
                    .collect::<Result<_>>()?;
            }
            "hypotheses" => self.hypotheses = parse_list(key, value)?,
            "trim_convention" => {
                self.exclusive = match value {
                    "inclusive" => false,
                    "exclusive" => true,
                    _ => return Err(bad_value(key, value)),
                }
            }
            "burn_in_factor" => {
                self.sim.burn_in_factor = value.parse().map_err(|_| bad_value(key, value))?
            }
            "analytic_se" => self.analytic_se = parse_bool(key, value)?,
            other => return Err(Error::InvalidConfig(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidConfig("key `reps` must be at least 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidConfig("key `estimators` lists no estimator".into()));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidConfig("key `lambda` must be positive".into()));
        }
        if self.hypotheses.iter().any(|h| !h.is_finite()) {
            return Err(Error::InvalidConfig("key `hypotheses` must be finite".into()));
        }
        if !self.hypotheses.contains(&self.theta0.beta()) {
            log::warn!("hypotheses do not include the true beta {}", self.theta0.beta());
        }
        self.dist.scale_factor()?;
        for e in &self.estimators {
            e.config(self.n, self.lambda, self.exclusive)?.validate()?;
        }
        Ok(())
    }

    /// Canonical `key = value` form; parsing it returns an equal spec.
    pub fn canonical(&self) -> String {
        let law = match self.dist.law {
            ErrorLaw::Gaussian => "gaussian".to_string(),
            ErrorLaw::Laplace => "laplace".to_string(),
            ErrorLaw::Pareto { kappa } => format!("pareto({kappa})"),
        };
        let t = self.theta0.to_array();
        let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "reps = {}", self.reps);
        let _ = writeln!(s, "dist = {law}");
        let _ = writeln!(s, "theta0 = {}", list(&t));
        let names: Vec<&str> = self.estimators.iter().map(|e| e.label.as_str()).collect();
        let _ = writeln!(s, "estimators = {}", names.join(","));
        let _ = writeln!(s, "hypotheses = {}", list(&self.hypotheses));
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "lambda = {}", self.lambda);
        let conv = if self.exclusive { "exclusive" } else { "inclusive" };
        let _ = writeln!(s, "trim_convention = {conv}");
        let _ = writeln!(s, "burn_in_factor = {}", self.sim.burn_in_factor);
        let _ = writeln!(s, "analytic_se = {}", self.analytic_se);
        s
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Estimates from one replication, one entry per estimator (`None` = missing).
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub estimates: Vec<Option<[f64; 3]>>,
    pub se: Vec<Option<[f64; 3]>>,
}

/// Simulate sample `r` and fit every estimator.
pub fn run_replication(spec: &ExperimentSpec, r: usize) -> Result<Replication> {
    if r >= spec.reps {
        return Err(Error::InvalidInput(format!("replication {r} out of range 0..{}", spec.reps)));
    }
    let mut rng = stream_rng(spec.seed, r as u64);
    let y = simulate_garch_with_rng(&spec.theta0, &spec.dist, spec.n, &mut rng, &spec.sim)?;
    let mut estimates = Vec::with_capacity(spec.estimators.len());
    let mut se = Vec::with_capacity(spec.estimators.len());
    for e in &spec.estimators {
        let cfg = e.config(spec.n, spec.lambda, spec.exclusive)?;
        match e.estimator.fit(&y, &cfg) {
            Ok(fit) if fit.converged => {
                estimates.push(Some(fit.theta_hat.to_array()));
                let scale = if !spec.analytic_se {
                    None
                } else {
                    match e.estimator {
                        Estimator::Qmttl | Estimator::Qml => qmttl_scale(&fit, &y, &cfg).ok(),
                        Estimator::Mnwm => mnwm_scale(&fit, &y, &cfg).ok(),
                        _ => None,
                    }
                };
                se.push(scale.map(|s| s.se));
            }
            Ok(_) => {
                log::debug!("replication {r}: {} did not converge", e.label);
                estimates.push(None);
                se.push(None);
            }
            Err(err) => {
                log::debug!("replication {r}: {} failed: {err}", e.label);
                estimates.push(None);
                se.push(None);
            }
        }
    }
    Ok(Replication { estimates, se })
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|n: &usize| *n > 0)
}

/// All replications in parallel, ordered by index.
pub fn run_replications(spec: &ExperimentSpec) -> Result<Vec<Replication>> {
    spec.validate()?;
    let work = || (0..spec.reps).into_par_iter().map(|r| run_replication(spec, r)).collect();
    match thread_cap() {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("{THREADS_ENV}: {e}")))?
            .install(work),
        None => work(),
    }
}

/// All replications on the calling thread.
pub fn run_replications_serial(spec: &ExperimentSpec) -> Result<Vec<Replication>> {
    spec.validate()?;
    (0..spec.reps).map(|r| run_replication(spec, r)).collect()
}

pub fn run(spec: &ExperimentSpec) -> Result<McReport> {
    let reps = run_replications(spec)?;
    Ok(summarize(&reps, spec))
}

/// Summary of one estimator over the usable replications.
#[derive(Debug, Clone, PartialEq)]
pub struct McRow {
    pub label: String,
    pub used: usize,
    pub missing: usize,
    /// Fewer than 30 usable replications.
    pub incomplete: bool,
    pub mean: [f64; 3],
    pub bias: [f64; 3],
    pub rmse: [f64; 3],
    /// Empirical variance with divisor `R`.
    pub variance: [f64; 3],
    /// KS ratio per coordinate; `None` when undefined (too few or zero variance).
    pub ks_ratio: [Option<f64>; 3],
    /// `(hypothesised beta, rejection frequency)` of the empirical-variance t-test.
    pub rejections: Vec<(f64, f64)>,
    /// Share of analytic 95% intervals for beta covering the true value.
    pub coverage: Option<f64>,
    /// Usable beta estimates in replication order.
    pub beta_hat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub spec_hash: String,
    pub seed: u64,
    pub reps: usize,
    pub n: usize,
    pub rows: Vec<McRow>,
}

impl McReport {
    pub fn row(&self, label: &str) -> Option<&McRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// Bias, RMSE and KS ratio per estimator and coordinate. Coverage is
    /// filled on the beta row only, when analytic standard errors were on.
    pub fn estimates_csv(&self) -> String {
        let mut s =
            String::from("estimator,param,bias,rmse,ks_ratio,used,missing,incomplete,coverage\n");
        for row in &self.rows {
            for (i, name) in ["omega", "alpha", "beta"].iter().enumerate() {
                let ks = row.ks_ratio[i].map_or("NA".to_string(), |k| format!("{k:.6}"));
                let cov = match (i, row.coverage) {
                    (2, Some(c)) => format!("{c:.4}"),
                    _ => "NA".to_string(),
                };
                let _ = writeln!(
                    s,
                    "{},{name},{:.6},{:.6},{ks},{},{},{},{cov}",
                    row.label, row.bias[i], row.rmse[i], row.used, row.missing, row.incomplete
                );
            }
        }
        s
    }

    /// Rejection frequency per estimator and hypothesis.
    pub fn rejections_csv(&self) -> String {
        let mut s = String::from("estimator,beta_h0,rejection\n");
        for row in &self.rows {
            for (h, f) in &row.rejections {
                let _ = writeln!(s, "{},{h},{f:.4}", row.label);
            }
        }
        s
    }
}

impl fmt::Display for McReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n = {}, R = {}, seed = {}", self.n, self.reps, self.seed)?;
        writeln!(f, "{:<12} {:>9} {:>9} {:>9} {:>6}  rejections", "estimator", "bias", "rmse", "ks", "miss")?;
        for row in &self.rows {
            let ks = row.ks_ratio[2].map_or("-".to_string(), |k| format!("{k:.2}"));
            let mut rej: Vec<String> =
                row.rejections.iter().map(|(h, p)| format!("{h}:{p:.3}")).collect();
            if let Some(c) = row.coverage {
                rej.push(format!("coverage:{c:.3}"));
            }
            writeln!(
                f,
                "{:<12} {:>9.4} {:>9.4} {:>9} {:>6}  {}",
                row.label,
                row.bias[2],
                row.rmse[2],
                ks,
                row.missing,
                rej.join(" ")
            )?;
        }
        Ok(())
    }
}

/// Aggregate replications into one row per estimator.
pub fn summarize(reps: &[Replication], spec: &ExperimentSpec) -> McReport {
    let theta0 = spec.theta0.to_array();
    let rows = spec
        .estimators
        .iter()
        .enumerate()
        .map(|(j, e)| {
            let est: Vec<[f64; 3]> = reps.iter().filter_map(|r| r.estimates[j]).collect();
            let used = est.len();
            let m = used.max(1) as f64;
            let mean: [f64; 3] = std::array::from_fn(|i| est.iter().map(|t| t[i]).sum::<f64>() / m);
            let bias: [f64; 3] = std::array::from_fn(|i| mean[i] - theta0[i]);
            let variance: [f64; 3] =
                std::array::from_fn(|i| est.iter().map(|t| (t[i] - mean[i]).powi(2)).sum::<f64>() / m);
            let rmse: [f64; 3] = std::array::from_fn(|i| {
                (est.iter().map(|t| (t[i] - theta0[i]).powi(2)).sum::<f64>() / m).sqrt()
            });
            let ks_ratio: [Option<f64>; 3] = std::array::from_fn(|i| {
                let v: Vec<f64> = est.iter().map(|t| t[i]).collect();
                ks_normality(&v).ok()
            });
            let sd = variance[2].sqrt();
            let rejections = spec
                .hypotheses
                .iter()
                .map(|h| {
                    let rej = if sd > 0.0 {
                        est.iter().filter(|t| ((t[2] - h) / sd).abs() > Z_975).count()
                    } else {
                        est.iter().filter(|t| t[2] != *h).count()
                    };
                    (*h, rej as f64 / m)
                })
                .collect();
            let with_se: Vec<([f64; 3], [f64; 3])> =
                reps.iter().filter_map(|r| Some((r.estimates[j]?, r.se[j]?))).collect();
            let coverage = (!with_se.is_empty()).then(|| {
                let hit = with_se
                    .iter()
                    .filter(|(t, s)| ((t[2] - theta0[2]) / s[2]).abs() <= Z_975)
                    .count();
                hit as f64 / with_se.len() as f64
            });
            McRow {
                label: e.label.clone(),
                used,
                missing: reps.len() - used,
                incomplete: used < MIN_COMPLETE,
                mean,
                bias,
                rmse,
                variance,
                ks_ratio,
                rejections,
                coverage,
                beta_hat: est.iter().map(|t| t[2]).collect(),
            }
        })
        .collect();
    McReport { spec_hash: spec.hash(), seed: spec.seed, reps: spec.reps, n: spec.n, rows }
}
