//! Scale estimates, standard errors, Wald tests and the KS normality ratio.
//!
//! The scale `V` is the matrix with `V^{1/2} (theta_hat - theta_0) -> N(0, I)`,
//! so `V^{-1}` is the covariance of the estimate. Neither the tail index
//! nor the convergence rate has to be known.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen, Vector3};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};
use crate::estimators::{FitConfig, FitResult, MnwmCriterion};
use crate::model::{check_series, volatility_path};
use crate::trimming::trim_indicators;

/// Relative eigenvalue floor used when inverting the scale.
const EIGEN_FLOOR: f64 = 1e-12;
/// Below this relative eigenvalue the score matrix counts as rank deficient.
const RANK_TOL: f64 = 1e-14;

/// Asymptotic 5% critical value of the one-sample KS statistic times `sqrt(R)`.
pub const KS_CRITICAL_5PCT: f64 = 1.358;

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleEstimate {
    /// Scale matrix, symmetric positive definite.
    pub v_hat: Matrix3<f64>,
    /// `v_hat^{-1}`, the covariance of the estimate.
    pub cov_theta: Matrix3<f64>,
    /// Square roots of the diagonal of `cov_theta`.
    pub se: [f64; 3],
    /// Set when an eigenvalue had to be raised to the floor during inversion.
    pub floored: bool,
}

impl ScaleEstimate {
    fn from_parts(scalar: f64, outer: Matrix3<f64>) -> Result<Self> {
        if !(scalar.is_finite() && scalar > 0.0) {
            return Err(Error::NumericalRank { rank: 0 });
        }
        let outer = symmetrize(outer);
        let eig = SymmetricEigen::new(outer);
        let trace = outer.trace();
        let rank = eig.eigenvalues.iter().filter(|l| **l > RANK_TOL * trace).count();
        if rank < 3 || !trace.is_finite() {
            return Err(Error::NumericalRank { rank });
        }
        let v_hat = outer * scalar;
        let (cov_theta, floored) = floored_inverse(&v_hat);
        let se = [0, 1, 2].map(|i| cov_theta[(i, i)].sqrt());
        Ok(Self { v_hat, cov_theta, se, floored })
    }

    /// t-ratio `(theta_hat_i - value) / se_i`.
    pub fn t_ratio(&self, fit: &FitResult, coordinate: usize, value: f64) -> f64 {
        (fit.theta_hat.to_array()[coordinate] - value) / self.se[coordinate]
    }
}

fn symmetrize(m: Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}

/// Inverse by eigendecomposition with eigenvalues floored at `1e-12 trace`.
fn floored_inverse(m: &Matrix3<f64>) -> (Matrix3<f64>, bool) {
    let eig = SymmetricEigen::new(symmetrize(*m));
    let floor = EIGEN_FLOOR * m.trace().abs();
    let mut floored = false;
    let inv_vals = eig.eigenvalues.map(|l| {
        if l < floor {
            floored = true;
            1.0 / floor
        } else {
            1.0 / l
        }
    });
    let q = eig.eigenvectors;
    (q * Matrix3::from_diagonal(&inv_vals) * q.transpose(), floored)
}

fn require_converged(fit: &FitResult) -> Result<()> {
    if !fit.converged {
        return Err(Error::InvalidInput("scale estimate needs a converged fit".into()));
    }
    Ok(())
}

/// QMTTL scale `n [(1/n) sum E_t^2 I_t]^{-1} (1/n) sum s_t s_t'` at `theta_hat`,
/// with `E_t = e_t^2 - 1` and `I_t` the error trimming indicator of `config.plan`.
pub fn qmttl_scale(fit: &FitResult, series: &[f64], config: &FitConfig) -> Result<ScaleEstimate> {
    require_converged(fit)?;
    check_series(series)?;
    let plan = &config.plan;
    let n = series.len();
    if n <= plan.k1 + plan.k2 + 3 {
        return Err(Error::InvalidConfig(format!(
            "scale estimate needs more than k1 + k2 + 3 = {} observations, got {n}",
            plan.k1 + plan.k2 + 3
        )));
    }
    let path = volatility_path(fit.theta_hat.to_array(), series, config.vol_init.start(series));
    let centered = &path.centered[1..];
    let keep = if plan.is_disabled() {
        vec![true; centered.len()]
    } else {
        trim_indicators(centered, plan)?.0
    };
    let m = centered.len() as f64;
    let e2 = centered.iter().zip(&keep).filter(|(_, k)| **k).map(|(e, _)| e * e).sum::<f64>() / m;
    let mut outer = Matrix3::zeros();
    for s in &path.s[1..] {
        let v = Vector3::from(*s);
        outer += v * v.transpose();
    }
    outer /= m;
    ScaleEstimate::from_parts(m / e2, outer)
}

/// MNWM scale `n [mean psi^4 - (mean psi^2)^2]^{-1} cov(s)` at `theta_hat`,
/// with the centered sample covariance of the scaled derivative.
pub fn mnwm_scale(fit: &FitResult, series: &[f64], config: &FitConfig) -> Result<ScaleEstimate> {
    require_converged(fit)?;
    check_series(series)?;
    let n = series.len();
    if n <= config.plan.k2 + 3 {
        return Err(Error::InvalidConfig(format!(
            "scale estimate needs more than k + 3 = {} observations, got {n}",
            config.plan.k2 + 3
        )));
    }
    let lag = (config.use_y_trim && config.plan.k_y > 0).then(|| {
        crate::trimming::trim_by_lag_y_with(series, config.plan.k_y, config.plan.exclusive)
    });
    let crit =
        MnwmCriterion::new(series, config.plan.k2, config.plan.exclusive, config.redescender, lag)
            .with_start(config.vol_init.start(series));
    let mom = crit.moments(&fit.theta_hat.to_array());
    let m = mom.psi.len() as f64;
    let psi4 = mom.psi.iter().map(|p| p.powi(4)).sum::<f64>() / m;
    let var_psi2 = psi4 - mom.mean_psi2 * mom.mean_psi2;
    let mean = mom.s.iter().fold(Vector3::zeros(), |acc, s| acc + Vector3::from(*s)) / m;
    let mut outer = Matrix3::zeros();
    for s in &mom.s {
        let v = Vector3::from(*s) - mean;
        outer += v * v.transpose();
    }
    outer /= m;
    ScaleEstimate::from_parts(m / var_psi2, outer)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaldResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Wald statistic `R' (D V^{-1} D')^{-1} R` for the restrictions `R(theta) = 0`
/// with Jacobian `D`, evaluated at `theta_hat`. The p-value is from chi-square(J).
pub fn wald_test<R, D>(
    fit: &FitResult,
    scale: &ScaleEstimate,
    restriction: R,
    jacobian: D,
) -> Result<WaldResult>
where
    R: Fn(&[f64; 3]) -> Vec<f64>,
    D: Fn(&[f64; 3]) -> Vec<[f64; 3]>,
{
    let theta = fit.theta_hat.to_array();
    let r = restriction(&theta);
    let d = jacobian(&theta);
    let j = r.len();
    if j == 0 || j > 3 || d.len() != j {
        return Err(Error::InvalidRestriction(format!(
            "{j} restrictions with a {}-row Jacobian",
            d.len()
        )));
    }
    if r.iter().chain(d.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidRestriction("non-finite restriction or Jacobian".into()));
    }
    let dm = DMatrix::from_fn(j, 3, |i, k| d[i][k]);
    let sv = dm.singular_values();
    let smax = sv.max();
    if !(smax > 0.0) || sv.min() <= 1e-12 * smax {
        return Err(Error::InvalidRestriction("Jacobian is not of full row rank".into()));
    }
    let cov = DMatrix::from_fn(3, 3, |a, b| scale.cov_theta[(a, b)]);
    let middle = &dm * cov * dm.transpose();
    let inv = middle
        .try_inverse()
        .ok_or_else(|| Error::InvalidRestriction("D V^-1 D' is singular".into()))?;
    let rv = DMatrix::from_column_slice(j, 1, &r);
    let statistic = (rv.transpose() * inv * &rv)[(0, 0)].max(0.0);
    let p_value = if statistic == 0.0 { 1.0 } else { gamma_ur(j as f64 / 2.0, statistic / 2.0) };
    Ok(WaldResult { statistic, df: j, p_value: p_value.clamp(0.0, 1.0) })
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// KS distance to the standard normal of the empirically standardized sample
/// (variance with divisor `R`), divided by the 5% critical value `1.358 / sqrt(R)`.
pub fn ks_normality(estimates: &[f64]) -> Result<f64> {
    let r = estimates.len();
    if r < 30 {
        return Err(Error::InvalidInput(format!("KS ratio needs at least 30 values, got {r}")));
    }
    if estimates.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite value in KS sample".into()));
    }
    let rf = r as f64;
    let mean = estimates.iter().sum::<f64>() / rf;
    let var = estimates.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rf;
    if !(var > 0.0) {
        return Err(Error::InvalidData("KS sample has zero variance".into()));
    }
    let sd = var.sqrt();
    let mut z: Vec<f64> = estimates.iter().map(|v| (v - mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    let d = z
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let f = normal_cdf(*z);
            ((i + 1) as f64 / rf - f).max(f - i as f64 / rf)
        })
        .fold(0.0, f64::max);
    Ok(d / (KS_CRITICAL_5PCT / rf.sqrt()))
}
