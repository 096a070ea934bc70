//! GARCH(1,1) data generation, the feasible volatility recursion and its
//! analytic derivative recursion.

use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Lower edge of the parameter box.
pub const IOTA: f64 = 1e-10;

/// A GARCH(1,1) parameter point `(omega, alpha, beta)`.
///
/// Construction enforces `omega >= IOTA` and `alpha, beta` in `[IOTA, 1 - IOTA]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GarchParams {
    omega: f64,
    alpha: f64,
    beta: f64,
}

impl GarchParams {
    pub fn new(omega: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(omega.is_finite() && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite GARCH parameters ({omega}, {alpha}, {beta})"
            )));
        }
        if omega < IOTA {
            return Err(Error::InvalidInput(format!(
                "omega = {omega} is below the lower bound {IOTA}"
            )));
        }
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(IOTA..=1.0 - IOTA).contains(&v) {
                return Err(Error::InvalidInput(format!(
                    "{name} = {v} lies outside [{IOTA}, 1 - {IOTA}]"
                )));
            }
        }
        Ok(Self { omega, alpha, beta })
    }

    pub fn from_array(theta: [f64; 3]) -> Result<Self> {
        Self::new(theta[0], theta[1], theta[2])
    }

    #[inline]
    pub fn omega(&self) -> f64 {
        self.omega
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn beta(&self) -> f64 {
        self.beta
    }

    #[inline]
    pub fn to_array(&self) -> [f64; 3] {
        [self.omega, self.alpha, self.beta]
    }

    pub fn persistence(&self) -> f64 {
        self.alpha + self.beta
    }

    /// `omega / (1 - alpha - beta)` when the process is covariance stationary.
    pub fn unconditional_variance(&self) -> Option<f64> {
        let p = self.persistence();
        (p < 1.0).then(|| self.omega / (1.0 - p))
    }
}

impl fmt::Display for GarchParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(omega={}, alpha={}, beta={})", self.omega, self.alpha, self.beta)
    }
}

/// Shape of the innovation law before standardization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorLaw {
    Gaussian,
    Laplace,
    /// Symmetric Pareto with `P(|Z| > a) = (1 + a)^-kappa`.
    Pareto { kappa: f64 },
}

impl FromStr for ErrorLaw {
    type Err = Error;

    /// `gaussian`, `laplace` or `pareto(<kappa>)`.
    fn from_str(s: &str) -> Result<Self> {
        let v = s.trim().to_ascii_lowercase();
        let bad = || Error::InvalidConfig(format!("unknown error law `{s}`"));
        match v.as_str() {
            "gaussian" | "normal" => Ok(ErrorLaw::Gaussian),
            "laplace" => Ok(ErrorLaw::Laplace),
            _ => {
                let inner = v.strip_prefix("pareto(").and_then(|r| r.strip_suffix(')')).ok_or_else(bad)?;
                let kappa: f64 = inner.trim().parse().map_err(|_| bad())?;
                if !(kappa > 0.0) {
                    return Err(bad());
                }
                Ok(ErrorLaw::Pareto { kappa })
            }
        }
    }
}

/// How raw draws are rescaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Standardization {
    /// `E[e^2] = 1`.
    #[default]
    UnitVariance,
    /// `E|e| = 1`, the identification condition of Laplace QML.
    UnitAbsMean,
    /// No rescaling.
    Raw,
}

/// Innovation distribution: a law plus its standardization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorDist {
    pub law: ErrorLaw,
    pub standardization: Standardization,
}

impl ErrorDist {
    pub fn gaussian() -> Self {
        Self { law: ErrorLaw::Gaussian, standardization: Standardization::UnitVariance }
    }

    pub fn laplace() -> Self {
        Self { law: ErrorLaw::Laplace, standardization: Standardization::UnitVariance }
    }

    pub fn pareto(kappa: f64) -> Self {
        Self { law: ErrorLaw::Pareto { kappa }, standardization: Standardization::UnitVariance }
    }

    pub fn with_standardization(mut self, standardization: Standardization) -> Self {
        self.standardization = standardization;
        self
    }

    /// Multiplier applied to raw draws.
    pub fn scale_factor(&self) -> Result<f64> {
        let (var, abs_mean) = match self.law {
            ErrorLaw::Gaussian => (1.0, (2.0 / std::f64::consts::PI).sqrt()),
            // raw Laplace has unit scale: variance 2, mean absolute value 1
            ErrorLaw::Laplace => (2.0, 1.0),
            ErrorLaw::Pareto { kappa } => {
                if !(kappa.is_finite() && kappa > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "Pareto tail index must be positive, got {kappa}"
                    )));
                }
                let var = if kappa > 2.0 {
                    2.0 / ((kappa - 1.0) * (kappa - 2.0))
                } else {
                    f64::INFINITY
                };
                let abs_mean = if kappa > 1.0 { 1.0 / (kappa - 1.0) } else { f64::INFINITY };
                (var, abs_mean)
            }
        };
        match self.standardization {
            Standardization::Raw => Ok(1.0),
            Standardization::UnitVariance if var.is_finite() => Ok(1.0 / var.sqrt()),
            Standardization::UnitAbsMean if abs_mean.is_finite() => Ok(1.0 / abs_mean),
            s => Err(Error::InvalidConfig(format!(
                "{s:?} standardization needs a finite moment, {} has none",
                self
            ))),
        }
    }

    pub(crate) fn sampler(&self) -> Result<ErrorSampler> {
        Ok(ErrorSampler { law: self.law, scale: self.scale_factor()? })
    }
}

impl fmt::Display for ErrorDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.law {
            ErrorLaw::Gaussian => write!(f, "gaussian")?,
            ErrorLaw::Laplace => write!(f, "laplace")?,
            ErrorLaw::Pareto { kappa } => write!(f, "pareto({kappa})")?,
        }
        match self.standardization {
            Standardization::UnitVariance => Ok(()),
            Standardization::UnitAbsMean => write!(f, "[abs-mean]"),
            Standardization::Raw => write!(f, "[raw]"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ErrorSampler {
    law: ErrorLaw,
    scale: f64,
}

impl ErrorSampler {
    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let raw = match self.law {
            ErrorLaw::Gaussian => rng.sample::<f64, _>(StandardNormal),
            ErrorLaw::Laplace => {
                // 1 - U lies in (0, 1]
                let u = 1.0 - rng.gen::<f64>();
                let m = -u.ln();
                if rng.gen::<bool>() { m } else { -m }
            }
            ErrorLaw::Pareto { kappa } => {
                let u = 1.0 - rng.gen::<f64>();
                let m = u.powf(-1.0 / kappa) - 1.0;
                if rng.gen::<bool>() { m } else { -m }
            }
        };
        raw * self.scale
    }
}

/// Seedable generator for stream `stream` of the master seed `seed`.
///
/// Streams of the same seed are independent, which lets Monte Carlo
/// replications run in any order.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draw `n` i.i.d. innovations.
pub fn sample_error(dist: &ErrorDist, seed: u64, n: usize) -> Result<Vec<f64>> {
    let sampler = dist.sampler()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| sampler.draw(&mut rng)).collect())
}

/// Simulation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Observations discarded before the retained sample, as a multiple of `n`.
    pub burn_in_factor: usize,
    /// Starting conditional variance of the simulated path.
    pub initial_variance: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { burn_in_factor: 19, initial_variance: 0.05 }
    }
}

/// Simulate `n` observations of `y_t = sigma_t e_t`.
pub fn simulate_garch(
    params: &GarchParams,
    dist: &ErrorDist,
    n: usize,
    seed: u64,
    config: &SimConfig,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_garch_with_rng(params, dist, n, &mut rng, config)
}

pub fn simulate_garch_with_rng<R: Rng + ?Sized>(
    params: &GarchParams,
    dist: &ErrorDist,
    n: usize,
    rng: &mut R,
    config: &SimConfig,
) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 observations, got {n}")));
    }
    if !(config.initial_variance.is_finite() && config.initial_variance > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "initial variance must be positive, got {}",
            config.initial_variance
        )));
    }
    if params.persistence() >= 1.0 {
        warn!("simulating a non-stationary GARCH process: alpha + beta = {}", params.persistence());
    }
    let sampler = dist.sampler()?;
    let burn = config.burn_in_factor * n;
    let (omega, alpha, beta) = (params.omega(), params.alpha(), params.beta());

    let mut out = Vec::with_capacity(n);
    let mut sigma2 = config.initial_variance;
    for t in 0..burn + n {
        let y = sigma2.sqrt() * sampler.draw(rng);
        if t >= burn {
            out.push(y);
        }
        sigma2 = omega + alpha * y * y + beta * sigma2;
    }
    Ok(out)
}

/// Iterated volatility path with derivatives and residuals at one parameter point.
///
/// Index 0 holds the starting value, see [`VolInit`].
#[derive(Debug, Clone, PartialEq)]
pub struct VolPath {
    pub h: Vec<f64>,
    pub dh: Vec<[f64; 3]>,
    /// Scaled volatility derivative `dh / h`.
    pub s: Vec<[f64; 3]>,
    /// `y_t / sqrt(h_t)`.
    pub residuals: Vec<f64>,
    /// `residual^2 - 1`.
    pub centered: Vec<f64>,
}

impl VolPath {
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

pub(crate) fn check_series(series: &[f64]) -> Result<()> {
    if series.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "series needs at least 2 observations, got {}",
            series.len()
        )));
    }
    if let Some(i) = series.iter().position(|y| !y.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite observation at index {i}")));
    }
    Ok(())
}

/// Starting value `h_1` of the volatility recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolInit {
    /// `h_1 = omega`, `dh_1 = [1, 0, 0]`.
    Omega,
    /// `h_1 = (1/n) sum y_t^2`, which does not depend on theta (`dh_1 = 0`).
    MeanSquare,
}

impl VolInit {
    /// Fixed starting value for `series`, or `None` when it is omega.
    pub fn start(self, series: &[f64]) -> Option<f64> {
        match self {
            VolInit::Omega => None,
            VolInit::MeanSquare => {
                Some(series.iter().map(|y| y * y).sum::<f64>() / series.len() as f64)
            }
        }
    }
}

impl FromStr for VolInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "omega" => Ok(VolInit::Omega),
            "mean-square" | "meansquare" | "sample" => Ok(VolInit::MeanSquare),
            other => Err(Error::InvalidConfig(format!("unknown volatility start `{other}`"))),
        }
    }
}

/// Run `h_t = omega + alpha y_{t-1}^2 + beta h_{t-1}` from `h_1 = omega`.
pub fn iterate_volatility(params: &GarchParams, series: &[f64]) -> Result<VolPath> {
    iterate_volatility_with(params, series, VolInit::Omega)
}

pub fn iterate_volatility_with(params: &GarchParams, series: &[f64], init: VolInit) -> Result<VolPath> {
    check_series(series)?;
    Ok(volatility_path(params.to_array(), series, init.start(series)))
}

/// Full path; `h1 = None` starts from omega.
pub(crate) fn volatility_path(theta: [f64; 3], series: &[f64], h1: Option<f64>) -> VolPath {
    let [omega, alpha, beta] = theta;
    let n = series.len();
    let mut h = Vec::with_capacity(n);
    let mut dh = Vec::with_capacity(n);
    match h1 {
        None => {
            h.push(omega);
            dh.push([1.0, 0.0, 0.0]);
        }
        Some(c) => {
            h.push(c);
            dh.push([0.0; 3]);
        }
    }
    for t in 1..n {
        let y2 = series[t - 1] * series[t - 1];
        let hp = h[t - 1];
        let dp: [f64; 3] = dh[t - 1];
        h.push(omega + alpha * y2 + beta * hp);
        dh.push([1.0 + beta * dp[0], y2 + beta * dp[1], hp + beta * dp[2]]);
    }
    let s = h.iter().zip(&dh).map(|(&ht, d)| [d[0] / ht, d[1] / ht, d[2] / ht]).collect();
    let residuals: Vec<f64> = series.iter().zip(&h).map(|(y, ht)| y / ht.sqrt()).collect();
    let centered = residuals.iter().map(|e| e * e - 1.0).collect();
    VolPath { h, dh, s, residuals, centered }
}

/// Volatility only, written into `h`. Used inside objective evaluations.
#[inline]
pub(crate) fn volatility_into(theta: [f64; 3], series: &[f64], h1: Option<f64>, h: &mut Vec<f64>) {
    let [omega, alpha, beta] = theta;
    h.clear();
    h.reserve(series.len());
    let mut prev = h1.unwrap_or(omega);
    h.push(prev);
    for y in &series[..series.len() - 1] {
        prev = omega + alpha * (y * y) + beta * prev;
        h.push(prev);
    }
}

/// Scaled volatility derivative `s_t = (dh_t/dtheta) / h_t`.
pub fn score_path(path: &VolPath) -> Vec<[f64; 3]> {
    path.s.clone()
}
