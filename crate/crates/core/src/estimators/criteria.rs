//! Sample criteria of the seven estimators.
//!
//! Every criterion conditions on the first observation: sums run over
//! `t = 2..n` (indices `1..n`) and are divided by `n`.

use std::cell::RefCell;

use crate::model::volatility_into;
use crate::trimming::{kth_largest_abs, trim_into, Redescender, TrimDiagnostics, TrimScratch};

use super::Objective;

/// `with_start(h1)` fixes the starting volatility; `None` starts from omega.
macro_rules! with_start {
    ($($name:ident),*) => {$(
        impl $name<'_> {
            pub fn with_start(mut self, h1: Option<f64>) -> Self {
                self.h1 = h1;
                self
            }
        }
    )*};
}

with_start!(TrimmedGaussianCriterion, MnwmCriterion, LogLadCriterion, WlqmlCriterion, PowerLawCriterion);

#[derive(Debug, Default)]
struct Scratch {
    h: Vec<f64>,
    v: Vec<f64>,
    keep: Vec<bool>,
    trim: TrimScratch,
    abs: Vec<f64>,
}

/// Gaussian quasi-likelihood `(1/n) sum (ln h_t + y_t^2/h_t) I_t`, where
/// `I_t` trims by the order statistics of `y_t^2/h_t - 1` and by lagged `|y|`.
/// With no trimming this is the QML criterion.
#[derive(Debug)]
pub struct TrimmedGaussianCriterion<'a> {
    y: &'a [f64],
    h1: Option<f64>,
    k1: usize,
    k2: usize,
    exclusive: bool,
    /// Lag indicator per observation.
    lag_keep: Option<Vec<bool>>,
    scratch: RefCell<Scratch>,
}

impl<'a> TrimmedGaussianCriterion<'a> {
    pub fn new(y: &'a [f64], k1: usize, k2: usize, exclusive: bool, lag_keep: Option<Vec<bool>>) -> Self {
        Self { y, h1: None, k1, k2, exclusive, lag_keep, scratch: RefCell::default() }
    }

    pub fn untrimmed(y: &'a [f64]) -> Self {
        Self::new(y, 0, 0, false, None)
    }

    fn trimming(&self) -> bool {
        self.k1 > 0 || self.k2 > 0
    }

    /// Keep flags for `t = 1..n` at `theta` together with the trim diagnostics.
    pub fn indicators(&self, theta: &[f64; 3]) -> (Vec<bool>, TrimDiagnostics) {
        let mut s = self.scratch.borrow_mut();
        let Scratch { h, v, keep, trim, .. } = &mut *s;
        self.fill(theta, h, v, keep, trim)
    }

    fn fill(
        &self,
        theta: &[f64; 3],
        h: &mut Vec<f64>,
        v: &mut Vec<f64>,
        keep: &mut Vec<bool>,
        trim: &mut TrimScratch,
    ) -> (Vec<bool>, TrimDiagnostics) {
        volatility_into(*theta, self.y, self.h1, h);
        v.clear();
        v.extend(self.y[1..].iter().zip(&h[1..]).map(|(y, h)| y * y / h - 1.0));
        keep.clear();
        match &self.lag_keep {
            Some(l) => keep.extend_from_slice(&l[1..]),
            None => keep.resize(v.len(), true),
        }
        let mut diag = if self.trimming() {
            trim_into(v, self.k1, self.k2, self.exclusive, trim, keep)
        } else {
            TrimDiagnostics::default()
        };
        if let Some(l) = &self.lag_keep {
            diag.trimmed_y = l[1..].iter().filter(|k| !**k).count();
        }
        (keep.clone(), diag)
    }
}

impl Objective for TrimmedGaussianCriterion<'_> {
    fn value(&self, theta: &[f64; 3]) -> f64 {
        let mut s = self.scratch.borrow_mut();
        let Scratch { h, v, keep, trim, .. } = &mut *s;
        let n = self.y.len() as f64;
        if !self.trimming() && self.lag_keep.is_none() {
            volatility_into(*theta, self.y, self.h1, h);
            let sum: f64 = self.y[1..].iter().zip(&h[1..]).map(|(y, h)| h.ln() + y * y / h).sum();
            return sum / n;
        }
        volatility_into(*theta, self.y, self.h1, h);
        v.clear();
        v.extend(self.y[1..].iter().zip(&h[1..]).map(|(y, h)| y * y / h - 1.0));
        keep.clear();
        match &self.lag_keep {
            Some(l) => keep.extend_from_slice(&l[1..]),
            None => keep.resize(v.len(), true),
        }
        if self.trimming() {
            trim_into(v, self.k1, self.k2, self.exclusive, trim, keep);
        }
        let mut sum = 0.0;
        for ((e, h), k) in v.iter().zip(&h[1..]).zip(keep.iter()) {
            if *k {
                sum += h.ln() + e + 1.0;
            }
        }
        sum / n
    }

    /// Almost-sure gradient `-(1/n) sum (e_t^2 - 1) s_t I_t` with the
    /// indicators held at their current values.
    fn gradient(&self, theta: &[f64; 3]) -> Option<[f64; 3]> {
        let (keep, _) = if self.trimming() || self.lag_keep.is_some() {
            self.indicators(theta)
        } else {
            (vec![true; self.y.len() - 1], TrimDiagnostics::default())
        };
        let path = crate::model::volatility_path(*theta, self.y, self.h1);
        let mut g = [0.0; 3];
        for t in 1..self.y.len() {
            if keep[t - 1] {
                for (gi, si) in g.iter_mut().zip(&path.s[t]) {
                    *gi -= path.centered[t] * si;
                }
            }
        }
        let n = self.y.len() as f64;
        Some(g.map(|x| x / n))
    }
}

/// Re-centred redescending moment equations
/// `m_t = (psi_t^2 - mean psi^2) s_t` with `psi_t = psi(e_t, c)`, `c` the
/// `k`-th largest `|e_t|`; the criterion is `|(1/n) sum m_t|^2`.
#[derive(Debug)]
pub struct MnwmCriterion<'a> {
    y: &'a [f64],
    h1: Option<f64>,
    k: usize,
    exclusive: bool,
    redescender: Redescender,
    lag_keep: Option<Vec<bool>>,
    scratch: RefCell<Scratch>,
}

/// Per-observation pieces of the moment equations at one parameter point.
#[derive(Debug, Clone)]
pub struct MnwmMoments {
    /// Transformed errors `psi_t` for `t = 1..n`.
    pub psi: Vec<f64>,
    /// Scaled volatility derivative for `t = 1..n`.
    pub s: Vec<[f64; 3]>,
    /// Outer threshold `c`.
    pub threshold: f64,
    /// Number of observations with `|e_t| > c`.
    pub trimmed: usize,
    pub mean_psi2: f64,
}

impl MnwmMoments {
    /// `psi_t^2 - mean psi^2`.
    pub fn centered_psi2(&self) -> Vec<f64> {
        self.psi.iter().map(|p| p * p - self.mean_psi2).collect()
    }

    /// Re-centred equations `m_t`.
    pub fn equations(&self) -> Vec<[f64; 3]> {
        self.psi
            .iter()
            .zip(&self.s)
            .map(|(p, s)| {
                let c = p * p - self.mean_psi2;
                [c * s[0], c * s[1], c * s[2]]
            })
            .collect()
    }
}

impl<'a> MnwmCriterion<'a> {
    pub fn new(
        y: &'a [f64],
        k: usize,
        exclusive: bool,
        redescender: Redescender,
        lag_keep: Option<Vec<bool>>,
    ) -> Self {
        Self { y, h1: None, k, exclusive, redescender, lag_keep, scratch: RefCell::default() }
    }

    fn threshold(&self, abs: &mut Vec<f64>, resid: &[f64]) -> f64 {
        if self.k == 0 {
            return f64::INFINITY;
        }
        let rank = if self.exclusive { self.k + 1 } else { self.k };
        kth_largest_abs(resid, rank.min(resid.len()), abs)
    }

    pub fn moments(&self, theta: &[f64; 3]) -> MnwmMoments {
        let path = crate::model::volatility_path(*theta, self.y, self.h1);
        let resid = &path.residuals[1..];
        let mut abs = Vec::new();
        let c = self.threshold(&mut abs, resid);
        let psi: Vec<f64> = resid
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let lag = self.lag_keep.as_ref().is_none_or(|l| l[i + 1]);
                if lag { self.redescender.psi(*e, c) } else { 0.0 }
            })
            .collect();
        let mean_psi2 = psi.iter().map(|p| p * p).sum::<f64>() / psi.len() as f64;
        let trimmed = resid.iter().filter(|e| e.abs() > c).count();
        MnwmMoments { psi, s: path.s[1..].to_vec(), threshold: c, trimmed, mean_psi2 }
    }
}

impl Objective for MnwmCriterion<'_> {
    fn value(&self, theta: &[f64; 3]) -> f64 {
        let mut guard = self.scratch.borrow_mut();
        let Scratch { h, v, abs, .. } = &mut *guard;
        let beta = theta[2];
        volatility_into(*theta, self.y, self.h1, h);
        let m = self.y.len() - 1;
        v.clear();
        v.extend(self.y[1..].iter().zip(&h[1..]).map(|(y, h)| y / h.sqrt()));
        let c = self.threshold(abs, v);
        // psi^2 in place
        for (i, e) in v.iter_mut().enumerate() {
            let lag = self.lag_keep.as_ref().is_none_or(|l| l[i + 1]);
            let p = if lag { self.redescender.psi(*e, c) } else { 0.0 };
            *e = p * p;
        }
        let mean = v.iter().sum::<f64>() / m as f64;
        let mut sum = [0.0; 3];
        let mut d = if self.h1.is_some() { [0.0; 3] } else { [1.0, 0.0, 0.0] };
        for t in 1..self.y.len() {
            let y2 = self.y[t - 1] * self.y[t - 1];
            d = [1.0 + beta * d[0], y2 + beta * d[1], h[t - 1] + beta * d[2]];
            let w = (v[t - 1] - mean) / h[t];
            for i in 0..3 {
                sum[i] += w * d[i];
            }
        }
        let mf = m as f64;
        sum.iter().map(|x| (x / mf) * (x / mf)).sum()
    }
}

/// Log-LAD criterion `(1/n) sum |ln y_t^2 - ln h_t|` over nonzero `y_t`.
#[derive(Debug)]
pub struct LogLadCriterion<'a> {
    y: &'a [f64],
    h1: Option<f64>,
    log_y2: Vec<Option<f64>>,
    scratch: RefCell<Vec<f64>>,
}

impl<'a> LogLadCriterion<'a> {
    pub fn new(y: &'a [f64]) -> Self {
        let log_y2 = y.iter().map(|v| (*v != 0.0).then(|| (v * v).ln())).collect();
        Self { y, h1: None, log_y2, scratch: RefCell::default() }
    }

    pub fn zero_count(&self) -> usize {
        self.log_y2[1..].iter().filter(|v| v.is_none()).count()
    }
}

impl Objective for LogLadCriterion<'_> {
    fn value(&self, theta: &[f64; 3]) -> f64 {
        let mut h = self.scratch.borrow_mut();
        volatility_into(*theta, self.y, self.h1, &mut h);
        let sum: f64 = self.log_y2[1..]
            .iter()
            .zip(&h[1..])
            .filter_map(|(l, h)| l.map(|l| (l - h.ln()).abs()))
            .sum();
        sum / self.y.len() as f64
    }
}

/// Outlier weights `w_t = max{1, C^-1 sum_{i>=1} i^-9 |y_{t-i}| I(|y_{t-i}| > C)}^-4`,
/// presample values taken as zero.
pub fn wlqml_weights_with_threshold(y: &[f64], c: f64) -> Vec<f64> {
    let n = y.len();
    let mut w = Vec::with_capacity(n);
    for t in 0..n {
        let mut sum = 0.0;
        for i in 1..=t {
            let a = y[t - i].abs();
            if a > c {
                sum += (i as f64).powi(-9) * a;
            }
        }
        w.push((sum / c).max(1.0).powi(-4));
    }
    w
}

/// Weights with `C` the `[0.1 n]`-th largest `|y|`.
pub fn wlqml_weights(y: &[f64]) -> Vec<f64> {
    let k = ((0.1 * y.len() as f64 + 0.5).floor() as usize).clamp(1, y.len());
    let c = kth_largest_abs(y, k, &mut Vec::new());
    wlqml_weights_with_threshold(y, c)
}

/// Weighted Laplace quasi-likelihood `(1/n) sum (ln h_t^{1/2} + |y_t|/h_t^{1/2}) w_t`.
#[derive(Debug)]
pub struct WlqmlCriterion<'a> {
    y: &'a [f64],
    h1: Option<f64>,
    weights: Vec<f64>,
    scratch: RefCell<Vec<f64>>,
}

impl<'a> WlqmlCriterion<'a> {
    pub fn new(y: &'a [f64]) -> Self {
        Self { y, h1: None, weights: wlqml_weights(y), scratch: RefCell::default() }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl Objective for WlqmlCriterion<'_> {
    fn value(&self, theta: &[f64; 3]) -> f64 {
        let mut h = self.scratch.borrow_mut();
        volatility_into(*theta, self.y, self.h1, &mut h);
        let mut sum = 0.0;
        for t in 1..self.y.len() {
            let sh = h[t].sqrt();
            sum += (sh.ln() + self.y[t].abs() / sh) * self.weights[t];
        }
        sum / self.y.len() as f64
    }
}

/// Power-law quasi-likelihood `(1/n) sum {ln h_t / 2 + index ln(1 + |y_t|/h_t^{1/2})}`,
/// optionally trimmed by the order statistics of
/// `u_t = |e_t|/(1 + |e_t|) - 1/index`.
#[derive(Debug)]
pub struct PowerLawCriterion<'a> {
    y: &'a [f64],
    h1: Option<f64>,
    index: f64,
    k1: usize,
    k2: usize,
    exclusive: bool,
    scratch: RefCell<Scratch>,
}

impl<'a> PowerLawCriterion<'a> {
    pub fn new(y: &'a [f64], index: f64, k1: usize, k2: usize, exclusive: bool) -> Self {
        Self { y, h1: None, index, k1, k2, exclusive, scratch: RefCell::default() }
    }

    fn trimming(&self) -> bool {
        self.k1 > 0 || self.k2 > 0
    }

    /// `u_t` for `t = 1..n`.
    pub fn u_values(&self, theta: &[f64; 3]) -> Vec<f64> {
        let mut h = Vec::new();
        volatility_into(*theta, self.y, self.h1, &mut h);
        self.y[1..]
            .iter()
            .zip(&h[1..])
            .map(|(y, h)| {
                let a = y.abs() / h.sqrt();
                a / (1.0 + a) - 1.0 / self.index
            })
            .collect()
    }

    pub fn diagnostics(&self, theta: &[f64; 3]) -> TrimDiagnostics {
        if !self.trimming() {
            return TrimDiagnostics::default();
        }
        let u = self.u_values(theta);
        let mut keep = vec![true; u.len()];
        trim_into(&u, self.k1, self.k2, self.exclusive, &mut TrimScratch::default(), &mut keep)
    }
}

impl Objective for PowerLawCriterion<'_> {
    fn value(&self, theta: &[f64; 3]) -> f64 {
        let mut guard = self.scratch.borrow_mut();
        let Scratch { h, v, keep, trim, .. } = &mut *guard;
        volatility_into(*theta, self.y, self.h1, h);
        let n = self.y.len() as f64;
        if !self.trimming() {
            let mut sum = 0.0;
            for (y, ht) in self.y.iter().zip(h).skip(1) {
                let a = y.abs() / ht.sqrt();
                sum += 0.5 * ht.ln() + self.index * a.ln_1p();
            }
            return sum / n;
        }
        // v holds |e_t|
        v.clear();
        v.extend(self.y[1..].iter().zip(&h[1..]).map(|(y, h)| y.abs() / h.sqrt()));
        let u: Vec<f64> = v.iter().map(|a| a / (1.0 + a) - 1.0 / self.index).collect();
        keep.clear();
        keep.resize(u.len(), true);
        trim_into(&u, self.k1, self.k2, self.exclusive, trim, keep);
        let mut sum = 0.0;
        for (i, a) in v.iter().enumerate() {
            if keep[i] {
                sum += 0.5 * h[i + 1].ln() + self.index * a.ln_1p();
            }
        }
        sum / n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate_garch, volatility_path, ErrorDist, GarchParams, SimConfig};

    fn sample(n: usize, seed: u64) -> Vec<f64> {
        let p = GarchParams::new(0.05, 0.05, 0.9).unwrap();
        simulate_garch(&p, &ErrorDist::pareto(2.5), n, seed, &SimConfig::default()).unwrap()
    }

    #[test]
    fn wlqml_toy_weight() {
        let y = [0.0, 0.0, 0.0, 0.0, 10.0, 0.0];
        let w = wlqml_weights_with_threshold(&y, 2.0);
        assert!(w[..5].iter().all(|w| *w == 1.0));
        assert!((w[5] - 0.0016).abs() < 1e-15);
    }

    #[test]
    fn wlqml_no_exceedance_means_unit_weight() {
        let y = [0.5, -0.3, 0.2, 0.1, -0.4];
        assert!(wlqml_weights_with_threshold(&y, 1.0).iter().all(|w| *w == 1.0));
    }

    #[test]
    fn mnwm_recentering_is_exact() {
        let y = sample(300, 4);
        for r in [Redescender::SimpleTrim, Redescender::TukeyBisquare, Redescender::Exponential] {
            let crit = MnwmCriterion::new(&y, 3, false, r, None);
            let m = crit.moments(&[0.07, 0.1, 0.8]);
            let total: f64 = m.centered_psi2().iter().sum();
            let scale: f64 = m.psi.iter().map(|p| p * p).sum();
            assert!(total.abs() <= 1e-12 * scale, "{total}");
        }
    }

    #[test]
    fn mnwm_value_matches_moment_sum() {
        let y = sample(200, 8);
        let crit = MnwmCriterion::new(&y, 2, false, Redescender::TukeyBisquare, None);
        let theta = [0.06, 0.08, 0.85];
        let m = crit.moments(&theta);
        let eq = m.equations();
        let k = eq.len() as f64;
        let sum: [f64; 3] = std::array::from_fn(|i| eq.iter().map(|e| e[i]).sum::<f64>() / k);
        let expected: f64 = sum.iter().map(|x| x * x).sum();
        let got = crit.value(&theta);
        assert!((got - expected).abs() <= 1e-10 * expected.max(1e-300), "{got} {expected}");
    }

    #[test]
    fn log_lad_is_nonnegative_and_zero_on_exact_fit() {
        let theta = [0.2, 0.1, 0.5];
        // construct y with y_t^2 = h_t exactly
        let mut y = vec![0.2f64.sqrt()];
        let mut h = 0.2;
        for _ in 1..20 {
            h = 0.2 + 0.1 * y.last().unwrap().powi(2) + 0.5 * h;
            y.push(h.sqrt());
        }
        let crit = LogLadCriterion::new(&y);
        assert!(crit.value(&theta).abs() < 1e-12);
        assert!(crit.value(&[0.3, 0.1, 0.5]) > 0.0);
    }

    #[test]
    fn u_values_are_bounded() {
        let y = sample(400, 2);
        let crit = PowerLawCriterion::new(&y, 3.5, 5, 1, false);
        for u in crit.u_values(&[0.05, 0.05, 0.9]) {
            assert!((-1.0 / 3.5..1.0 - 1.0 / 3.5).contains(&u));
        }
    }

    #[test]
    fn untrimmed_gaussian_matches_direct_sum() {
        let y = sample(100, 1);
        let theta = [0.05, 0.1, 0.8];
        let p = volatility_path(theta, &y, None);
        let direct: f64 = (1..y.len()).map(|t| p.h[t].ln() + y[t] * y[t] / p.h[t]).sum::<f64>()
            / y.len() as f64;
        let crit = TrimmedGaussianCriterion::untrimmed(&y);
        assert!((crit.value(&theta) - direct).abs() < 1e-12);
    }
}
