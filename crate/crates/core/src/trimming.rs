//! Order statistics, fractile schedules, trimming indicators and redescending
//! transforms.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Ratio of left to right tail fractiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrimMode {
    /// `k1 = 35 k2`.
    StrongAsym,
    /// `k1 = 10 k2`.
    WeakAsym,
    /// `k1 = k2`.
    Symmetric,
    /// Fractiles set directly.
    Custom,
}

impl TrimMode {
    pub fn multiplier(self) -> Option<usize> {
        match self {
            TrimMode::StrongAsym => Some(35),
            TrimMode::WeakAsym => Some(10),
            TrimMode::Symmetric => Some(1),
            TrimMode::Custom => None,
        }
    }

    /// Multipliers of the tail-trimmed power-law criterion (9, 5 and 1).
    pub fn pqmttl_multiplier(self) -> Option<usize> {
        match self {
            TrimMode::StrongAsym => Some(9),
            TrimMode::WeakAsym => Some(5),
            TrimMode::Symmetric => Some(1),
            TrimMode::Custom => None,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            TrimMode::StrongAsym => "sa",
            TrimMode::WeakAsym => "wa",
            TrimMode::Symmetric => "s",
            TrimMode::Custom => "custom",
        }
    }
}

impl std::str::FromStr for TrimMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sa" | "strong" | "strong-asym" => Ok(TrimMode::StrongAsym),
            "wa" | "weak" | "weak-asym" => Ok(TrimMode::WeakAsym),
            "s" | "sym" | "symmetric" => Ok(TrimMode::Symmetric),
            "custom" => Ok(TrimMode::Custom),
            other => Err(Error::InvalidConfig(format!("unknown trim mode `{other}`"))),
        }
    }
}

/// Number of trimmed observations per tail.
///
/// A fractile of zero disables trimming on that side. With the default
/// closed-interval convention a fractile `k` removes `k - 1` observations
/// from continuous data; `exclusive` removes exactly `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrimPlan {
    /// Left tail (most negative values).
    pub k1: usize,
    /// Right tail (largest values).
    pub k2: usize,
    /// Trimming by the lagged absolute observation.
    pub k_y: usize,
    pub mode: TrimMode,
    pub exclusive: bool,
}

impl TrimPlan {
    pub fn custom(k1: usize, k2: usize, k_y: usize) -> Self {
        Self { k1, k2, k_y, mode: TrimMode::Custom, exclusive: false }
    }

    /// No trimming at all.
    pub fn disabled() -> Self {
        Self::custom(0, 0, 0)
    }

    pub fn with_exclusive(mut self, exclusive: bool) -> Self {
        self.exclusive = exclusive;
        self
    }

    pub fn is_disabled(&self) -> bool {
        self.k1 == 0 && self.k2 == 0
    }

    /// Check the fractiles against a sample of size `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k1 + self.k2 >= n {
            return Err(Error::InvalidConfig(format!(
                "fractiles k1 = {} and k2 = {} leave nothing of n = {n} observations",
                self.k1, self.k2
            )));
        }
        if self.k_y >= n {
            return Err(Error::InvalidConfig(format!(
                "lag fractile k_y = {} must be below n = {n}",
                self.k_y
            )));
        }
        Ok(())
    }
}

/// Outcome of one trimming pass.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrimDiagnostics {
    /// k1-th smallest of the negative parts (0 when fewer than k1 are negative).
    pub neg_threshold: f64,
    /// k2-th largest of the nonnegative parts.
    pub pos_threshold: f64,
    pub trimmed_neg: usize,
    pub trimmed_pos: usize,
    pub trimmed_y: usize,
    /// Observations strictly outside the thresholds (closed-interval convention).
    pub inclusive_count: usize,
    /// Observations removed under the rank convention, `min(k, side size)` per side.
    pub exclusive_count: usize,
}

impl TrimDiagnostics {
    pub fn total_trimmed(&self) -> usize {
        self.trimmed_neg + self.trimmed_pos
    }
}

#[inline]
fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

fn lag_fractile(n: usize) -> usize {
    round_half_up(0.1 * (n as f64).ln()).max(1)
}

fn right_fractile(n: usize, lambda: f64) -> usize {
    round_half_up(lambda * n as f64 / (n as f64).ln()).max(1)
}

fn check_schedule_args(n: usize, lambda: f64) -> Result<()> {
    if n < 10 {
        return Err(Error::InvalidInput(format!("fractile schedules need n >= 10, got {n}")));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidConfig(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

/// `k2 = max{1, [lambda n / ln n]}`, `k1` from the mode multiplier and
/// `k_y = max{1, [0.1 ln n]}`, with `[.]` rounding half up.
pub fn fractile_schedule(n: usize, lambda: f64, mode: TrimMode) -> Result<TrimPlan> {
    let mult = mode.multiplier().ok_or_else(|| {
        Error::InvalidConfig("a custom trim mode has no fractile schedule".into())
    })?;
    schedule_with_multiplier(n, lambda, mult, mode)
}

/// Schedule of the tail-trimmed power-law criterion: `k1 = 9 k2` (strong),
/// `5 k2` (weak) or `k2`.
pub fn pqmttl_schedule(n: usize, lambda: f64, mode: TrimMode) -> Result<TrimPlan> {
    let mult = mode.pqmttl_multiplier().ok_or_else(|| {
        Error::InvalidConfig("a custom trim mode has no fractile schedule".into())
    })?;
    schedule_with_multiplier(n, lambda, mult, mode)
}

fn schedule_with_multiplier(n: usize, lambda: f64, mult: usize, mode: TrimMode) -> Result<TrimPlan> {
    check_schedule_args(n, lambda)?;
    let k2 = right_fractile(n, lambda);
    let plan = TrimPlan { k1: mult * k2, k2, k_y: lag_fractile(n), mode, exclusive: false };
    plan.validate(n)?;
    Ok(plan)
}

/// Symmetric `k1 = k2 = max{1, [0.025 sqrt(n)]}`, an `o(sqrt n)` rule for
/// thin-tailed errors.
pub fn thin_tail_schedule(n: usize) -> Result<TrimPlan> {
    thin_tail_schedule_with(n, 0.025)
}

pub fn thin_tail_schedule_with(n: usize, scale: f64) -> Result<TrimPlan> {
    check_schedule_args(n, scale)?;
    let k = round_half_up(scale * (n as f64).sqrt()).max(1);
    let plan = TrimPlan { k1: k, k2: k, k_y: lag_fractile(n), mode: TrimMode::Symmetric, exclusive: false };
    plan.validate(n)?;
    Ok(plan)
}

fn balance_rhs(kappa: f64, x: f64) -> f64 {
    0.5 * (kappa - 2.0) * (-1.0 + (1.0 - x).powf(-2.0 / kappa) + 2.0 / (kappa - 2.0) * x)
}

/// Residual of the Pareto fractile balance,
/// `((k2/n)^(1-2/kappa)) - (kappa-2)/2 (-1 + (1-k1/n)^(-2/kappa) + 2/(kappa-2) k1/n)`.
pub fn balance_residual(kappa: f64, n: usize, k1: f64, k2: f64) -> f64 {
    let n = n as f64;
    (k2 / n).powf(1.0 - 2.0 / kappa) - balance_rhs(kappa, k1 / n)
}

/// The (real) right-tail fractile that balances a given `k1`.
pub fn implied_k2(kappa: f64, n: usize, k1: f64) -> f64 {
    let rhs = balance_rhs(kappa, k1 / n as f64);
    n as f64 * rhs.powf(kappa / (kappa - 2.0))
}

/// Left-tail fractile that balances `k2` for Pareto errors with
/// `P(|e| > a) = (1 + a)^-kappa`, from the exact pre-asymptotic relation.
///
/// The real root is bracketed on `[k2, n - k2]` and found by bisection;
/// the neighbouring integer with the smaller residual is returned.
pub fn pareto_balance_k1(kappa: f64, n: usize, k2: usize) -> Result<usize> {
    if !(kappa > 2.0 && kappa < 4.0) {
        return Err(Error::InvalidInput(format!("tail index must lie in (2, 4), got {kappa}")));
    }
    if k2 < 1 || k2 >= n || 2 * k2 >= n {
        return Err(Error::InvalidInput(format!("need 1 <= k2 < n/2, got k2 = {k2}, n = {n}")));
    }
    let f = |k1: f64| balance_residual(kappa, n, k1, k2 as f64);
    let (mut lo, mut hi) = (k2 as f64, (n - k2) as f64);
    let (flo, fhi) = (f(lo), f(hi));
    if flo.signum() == fhi.signum() {
        return Err(Error::NoBracket(format!(
            "balance residual does not change sign on [{lo}, {hi}] ({flo:.4e}, {fhi:.4e})"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    let root = 0.5 * (lo + hi);
    let (a, b) = (root.floor().max(k2 as f64), root.ceil().min((n - k2) as f64));
    Ok(if f(a).abs() <= f(b).abs() { a as usize } else { b as usize })
}

/// Rate diagnostics for a right-tail fractile under a power-law tail with index `kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateDiagnostics {
    /// Scale factor of the estimator, `V_ii^{1/2} / E[s_i^2]^{1/2}`.
    pub scale_rate: f64,
    /// Asymptotic size of the trimmed second moment of the centered squared error.
    pub trimmed_second_moment: f64,
    /// `sqrt(n)`, the rate with finite fourth moment.
    pub root_n: f64,
    /// Exponent `p` in the rate `sqrt(n) / (ln n)^p` for `k1 ~ lambda n / ln n`
    /// and a balanced `k2`.
    pub log_rate_exponent: f64,
}

/// Rate formulas for `P(|e| > a) = d a^-kappa (1 + o(1))` and right fractile `k`.
pub fn rate_diagnostics(kappa: f64, n: usize, k: usize, d: f64) -> Result<RateDiagnostics> {
    if !(kappa > 2.0) || !(d > 0.0) || k == 0 || k >= n {
        return Err(Error::InvalidInput(format!(
            "rate diagnostics need kappa > 2, d > 0 and 0 < k < n (kappa = {kappa}, d = {d}, k = {k}, n = {n})"
        )));
    }
    let nf = n as f64;
    let ratio = k as f64 / nf;
    let (scale_rate, second) = if kappa < 4.0 {
        let second = kappa / (4.0 - kappa) * d.powf(4.0 / kappa) * (1.0 / ratio).powf(4.0 / kappa - 1.0);
        let rate = nf.sqrt()
            * ratio.powf(2.0 / kappa - 0.5)
            * d.powf(-2.0 / kappa)
            * ((4.0 - kappa) / kappa).sqrt();
        (rate, second)
    } else if kappa == 4.0 {
        ((nf / nf.ln()).sqrt() / d.sqrt(), d * nf.ln())
    } else {
        (nf.sqrt(), f64::NAN)
    };
    let log_rate_exponent =
        if kappa < 4.0 { (4.0 - kappa) / (2.0 * (kappa - 2.0)) } else { 0.0 };
    Ok(RateDiagnostics { scale_rate, trimmed_second_moment: second, root_n: nf.sqrt(), log_rate_exponent })
}

/// Reusable buffers for repeated trimming passes.
#[derive(Debug, Default)]
pub(crate) struct TrimScratch {
    buf: Vec<f64>,
}

fn cmp_f64(a: &f64, b: &f64) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

/// Trim the left `k1` and right `k2` tails of `values`, writing keep flags
/// into `keep` (which must already hold one flag per value, `true` = keep;
/// flags that are already `false` stay `false`).
pub(crate) fn trim_into(
    values: &[f64],
    k1: usize,
    k2: usize,
    exclusive: bool,
    scratch: &mut TrimScratch,
    keep: &mut [bool],
) -> TrimDiagnostics {
    debug_assert_eq!(values.len(), keep.len());
    let mut diag = TrimDiagnostics {
        neg_threshold: f64::NEG_INFINITY,
        pos_threshold: f64::INFINITY,
        ..Default::default()
    };

    if k1 > 0 {
        scratch.buf.clear();
        scratch.buf.extend(values.iter().copied().filter(|v| *v < 0.0));
        let side = scratch.buf.len();
        let thr = if side >= k1 {
            *scratch.buf.select_nth_unstable_by(k1 - 1, cmp_f64).1
        } else {
            0.0
        };
        diag.neg_threshold = thr;
        let target = k1.min(side);
        diag.exclusive_count += target;
        let strict = values.iter().filter(|v| **v < thr).count();
        diag.inclusive_count += strict;
        let mut ties_left = if exclusive { target.saturating_sub(strict) } else { 0 };
        for (v, k) in values.iter().zip(keep.iter_mut()) {
            if *v < thr || (ties_left > 0 && *v == thr && *v < 0.0) {
                if *v == thr {
                    ties_left -= 1;
                }
                *k = false;
                diag.trimmed_neg += 1;
            }
        }
    }

    if k2 > 0 {
        scratch.buf.clear();
        scratch.buf.extend(values.iter().copied().filter(|v| *v >= 0.0));
        let side = scratch.buf.len();
        let thr = if side >= k2 {
            let idx = side - k2;
            *scratch.buf.select_nth_unstable_by(idx, cmp_f64).1
        } else {
            0.0
        };
        diag.pos_threshold = thr;
        let target = k2.min(side);
        diag.exclusive_count += target;
        let strict = values.iter().filter(|v| **v > thr).count();
        diag.inclusive_count += strict;
        let mut ties_left = if exclusive { target.saturating_sub(strict) } else { 0 };
        for (v, k) in values.iter().zip(keep.iter_mut()) {
            if *v > thr || (ties_left > 0 && *v == thr && *v >= 0.0) {
                if *v == thr {
                    ties_left -= 1;
                }
                *k = false;
                diag.trimmed_pos += 1;
            }
        }
    }
    diag
}

/// Trimming indicators for a centered sequence: `true` when the value lies
/// between the `k1`-th smallest negative part and the `k2`-th largest
/// nonnegative part (closed interval), or outside the `k1 + k2` extreme ranks
/// when `plan.exclusive` is set. Ties at a threshold are trimmed in index order.
pub fn trim_indicators(centered: &[f64], plan: &TrimPlan) -> Result<(Vec<bool>, TrimDiagnostics)> {
    if centered.len() <= plan.k1 + plan.k2 {
        return Err(Error::InvalidConfig(format!(
            "cannot trim k1 + k2 = {} of {} observations",
            plan.k1 + plan.k2,
            centered.len()
        )));
    }
    let mut keep = vec![true; centered.len()];
    let diag = trim_into(centered, plan.k1, plan.k2, plan.exclusive, &mut TrimScratch::default(), &mut keep);
    Ok((keep, diag))
}

/// k-th largest of `|y|` (k >= 1).
pub(crate) fn kth_largest_abs(series: &[f64], k: usize, buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    buf.extend(series.iter().map(|y| y.abs()));
    let idx = buf.len() - k;
    *buf.select_nth_unstable_by(idx, cmp_f64).1
}

/// Indicator for observation `t` built from `|y_{t-1}|` against the `k_y`-th
/// largest absolute observation: trimmed iff `|y_{t-1}|` strictly exceeds it.
/// The first observation has no lag and is kept. `k_y = 0` keeps everything.
pub fn trim_by_lag_y(series: &[f64], k_y: usize) -> Vec<bool> {
    trim_by_lag_y_with(series, k_y, false)
}

/// As [`trim_by_lag_y`]; `exclusive` trims the successors of exactly the `k_y`
/// largest `|y|` (ties in index order).
pub fn trim_by_lag_y_with(series: &[f64], k_y: usize, exclusive: bool) -> Vec<bool> {
    let n = series.len();
    let mut keep = vec![true; n];
    if k_y == 0 || n == 0 {
        return keep;
    }
    let k_y = k_y.min(n);
    let thr = kth_largest_abs(series, k_y, &mut Vec::with_capacity(n));
    let strict = series.iter().filter(|y| y.abs() > thr).count();
    let mut ties_left = if exclusive { k_y.saturating_sub(strict) } else { 0 };
    for t in 1..n {
        let a = series[t - 1].abs();
        if a > thr {
            keep[t] = false;
        } else if ties_left > 0 && a == thr {
            keep[t] = false;
            ties_left -= 1;
        }
    }
    keep
}

/// Redescending transform family `psi(u, c) = u w(u, c) I(|u| <= c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Redescender {
    /// `w = 1`.
    SimpleTrim,
    /// Hampel's three-part function with inner thresholds `a = a_ratio c`, `b = b_ratio c`.
    Hampel { a_ratio: f64, b_ratio: f64 },
    /// `w = (1 - (u/c)^2)^2`.
    TukeyBisquare,
    /// `w = exp(-|u|/c)`.
    Exponential,
}

impl Redescender {
    pub fn hampel_default() -> Self {
        Redescender::Hampel { a_ratio: 0.25, b_ratio: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        if let Redescender::Hampel { a_ratio, b_ratio } = *self {
            if !(0.0 < a_ratio && a_ratio < b_ratio && b_ratio < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "Hampel ratios must satisfy 0 < a < b < 1, got ({a_ratio}, {b_ratio})"
                )));
            }
        }
        Ok(())
    }

    /// `w(u, c) I(|u| <= c)`, always in `[0, 1]`.
    #[inline]
    pub fn weight(&self, u: f64, c: f64) -> f64 {
        let a = u.abs();
        if a > c {
            return 0.0;
        }
        match *self {
            Redescender::SimpleTrim => 1.0,
            Redescender::TukeyBisquare => {
                let r = u / c;
                let w = 1.0 - r * r;
                w * w
            }
            Redescender::Exponential => (-a / c).exp(),
            Redescender::Hampel { a_ratio, b_ratio } => {
                let (ha, hb) = (a_ratio * c, b_ratio * c);
                if a <= ha {
                    1.0
                } else if a <= hb {
                    ha / a
                } else {
                    ha * (c - a) / (a * (c - hb))
                }
            }
        }
    }

    #[inline]
    pub fn psi(&self, u: f64, c: f64) -> f64 {
        u * self.weight(u, c)
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            Redescender::SimpleTrim => "i",
            Redescender::Hampel { .. } => "h",
            Redescender::TukeyBisquare => "t",
            Redescender::Exponential => "e",
        }
    }
}

impl std::str::FromStr for Redescender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "i" | "simple" | "trim" | "simple-trim" => Ok(Redescender::SimpleTrim),
            "t" | "tukey" | "bisquare" => Ok(Redescender::TukeyBisquare),
            "e" | "exp" | "exponential" => Ok(Redescender::Exponential),
            "h" | "hampel" => Ok(Redescender::hampel_default()),
            other => Err(Error::InvalidConfig(format!("unknown redescender `{other}`"))),
        }
    }
}

/// `psi(u, c)` for the given transform.
pub fn redescend_weight(u: f64, c: f64, r: Redescender) -> f64 {
    r.psi(u, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_matches_simulation_design() {
        let p = fractile_schedule(100, 0.025, TrimMode::StrongAsym).unwrap();
        assert_eq!((p.k1, p.k2, p.k_y), (35, 1, 1));
        let p = fractile_schedule(800, 0.025, TrimMode::StrongAsym).unwrap();
        assert_eq!((p.k1, p.k2, p.k_y), (105, 3, 1));
        let p = fractile_schedule(800, 0.025, TrimMode::WeakAsym).unwrap();
        assert_eq!((p.k1, p.k2), (30, 3));
        let p = fractile_schedule(10, 0.025, TrimMode::Symmetric).unwrap();
        assert_eq!(p.k2, 1);
        assert!(fractile_schedule(9, 0.025, TrimMode::Symmetric).is_err());
        // 35 + 1 >= 20 observations
        assert!(matches!(
            fractile_schedule(20, 0.5, TrimMode::StrongAsym),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn pqmttl_multipliers() {
        let p = pqmttl_schedule(800, 0.025, TrimMode::WeakAsym).unwrap();
        assert_eq!((p.k1, p.k2), (15, 3));
        let p = pqmttl_schedule(800, 0.025, TrimMode::StrongAsym).unwrap();
        assert_eq!((p.k1, p.k2), (27, 3));
    }

    #[test]
    fn thin_tail_rule() {
        let p = thin_tail_schedule(100).unwrap();
        assert_eq!((p.k1, p.k2), (1, 1));
        let p = thin_tail_schedule(10_000).unwrap();
        assert_eq!((p.k1, p.k2), (3, 3));
        assert!((p.k2 as f64 / 100.0 - 0.03).abs() < 1e-12);
        let big = thin_tail_schedule(1_000_000).unwrap();
        assert!((big.k2 as f64) / 1000.0 < 0.03);
    }

    #[test]
    fn balance_worked_examples() {
        let k1 = pareto_balance_k1(2.5, 100, 1).unwrap();
        assert!((31..=35).contains(&k1), "k1 = {k1}");
        let k1 = pareto_balance_k1(2.5, 800, 2).unwrap();
        assert!((190..=210).contains(&k1), "k1 = {k1}");
        assert!(pareto_balance_k1(2.0, 100, 1).is_err());
        assert!(pareto_balance_k1(2.5, 100, 0).is_err());
    }

    #[test]
    fn balance_round_trip() {
        for &(kappa, n, k2) in &[(2.5, 100, 1), (2.5, 800, 2), (3.0, 500, 3), (3.5, 2000, 10)] {
            let k1 = pareto_balance_k1(kappa, n, k2).unwrap();
            let implied = implied_k2(kappa, n, k1 as f64);
            assert!((implied - k2 as f64).abs() < 1.0, "{kappa} {n} {k2}: {implied}");
        }
    }

    #[test]
    fn balance_ratio_vanishes() {
        let ratios: Vec<f64> = [100usize, 1_000, 10_000]
            .iter()
            .map(|&n| {
                let k2 = fractile_schedule(n, 0.025, TrimMode::Symmetric).unwrap().k2;
                k2 as f64 / pareto_balance_k1(2.5, n, k2).unwrap() as f64
            })
            .collect();
        assert!(ratios[0] > ratios[1] && ratios[1] > ratios[2], "{ratios:?}");
    }

    #[test]
    fn closed_interval_keeps_the_extremes() {
        let v = [-0.9, -0.5, 0.2, 3.0, 1.0, -0.1];
        let (keep, d) = trim_indicators(&v, &TrimPlan::custom(1, 1, 0)).unwrap();
        assert!(keep.iter().all(|k| *k));
        assert_eq!(d.neg_threshold, -0.9);
        assert_eq!(d.pos_threshold, 3.0);
        let (keep, d) = trim_indicators(&v, &TrimPlan::custom(2, 2, 0)).unwrap();
        assert_eq!(keep, vec![false, true, true, false, true, true]);
        assert_eq!((d.trimmed_neg, d.trimmed_pos), (1, 1));
        assert_eq!(d.exclusive_count, 4);
        let (keep, _) = trim_indicators(&v, &TrimPlan::custom(2, 2, 0).with_exclusive(true)).unwrap();
        assert_eq!(keep, vec![false, false, true, false, false, true]);
    }

    #[test]
    fn all_negative_sequence() {
        let v = [-0.9, -0.5, -0.2, -0.3];
        let (keep, d) = trim_indicators(&v, &TrimPlan::custom(1, 2, 0)).unwrap();
        assert_eq!(d.pos_threshold, 0.0);
        assert_eq!(d.trimmed_pos, 0);
        assert!(keep.iter().all(|k| *k));
    }

    #[test]
    fn ties_trim_earliest_first() {
        let v = [2.0, 2.0, 2.0, -0.5, 0.1];
        let plan = TrimPlan::custom(0, 2, 0).with_exclusive(true);
        let (keep, d) = trim_indicators(&v, &plan).unwrap();
        assert_eq!(keep, vec![false, false, true, true, true]);
        assert_eq!(d.trimmed_pos, 2);
    }

    #[test]
    fn trim_requires_room() {
        assert!(trim_indicators(&[1.0, 2.0], &TrimPlan::custom(1, 1, 0)).is_err());
    }

    #[test]
    fn lag_trimming() {
        let y = [0.1, -5.0, 0.2, 3.0, 0.3];
        assert!(trim_by_lag_y(&y, 1).iter().all(|k| *k));
        assert_eq!(trim_by_lag_y(&y, 2), vec![true, true, false, true, true]);
        assert_eq!(trim_by_lag_y_with(&y, 1, true), vec![true, true, false, true, true]);
        assert!(trim_by_lag_y(&[1.0; 6], 3).iter().all(|k| *k));
        assert!(trim_by_lag_y(&y, 0).iter().all(|k| *k));
    }

    #[test]
    fn redescender_examples() {
        assert_eq!(redescend_weight(3.0, 2.0, Redescender::SimpleTrim), 0.0);
        assert_eq!(redescend_weight(1.5, 2.0, Redescender::SimpleTrim), 1.5);
        assert!((redescend_weight(1.0, 2.0, Redescender::TukeyBisquare) - 0.5625).abs() < 1e-15);
        let h = Redescender::Hampel { a_ratio: 0.25, b_ratio: 0.5 };
        assert!((redescend_weight(3.0, 4.0, h) - 0.5).abs() < 1e-15);
        assert!((redescend_weight(-3.0, 4.0, h) + 0.5).abs() < 1e-15);
        assert!((redescend_weight(1.5, 4.0, h) - 1.0).abs() < 1e-15);
        assert!((redescend_weight(0.5, 4.0, h) - 0.5).abs() < 1e-15);
        assert!((redescend_weight(1.0, 1.0, Redescender::Exponential) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((redescend_weight(1.0, 1.0, Redescender::Exponential) - 0.36788).abs() < 1e-5);
    }

    #[test]
    fn hampel_ratio_validation() {
        assert!(Redescender::Hampel { a_ratio: 0.5, b_ratio: 0.25 }.validate().is_err());
        assert!(Redescender::hampel_default().validate().is_ok());
    }

    #[test]
    fn rate_formulas() {
        let r = rate_diagnostics(2.5, 800, 3, 1.0).unwrap();
        assert!(r.scale_rate < r.root_n);
        assert!((r.log_rate_exponent - 1.5).abs() < 1e-12);
        let r4 = rate_diagnostics(4.0, 800, 3, 1.0).unwrap();
        assert!((r4.scale_rate - (800.0f64 / 800.0f64.ln()).sqrt()).abs() < 1e-12);
        assert!(rate_diagnostics(2.0, 800, 3, 1.0).is_err());
    }
}
