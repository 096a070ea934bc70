//! Box-constrained minimization over the GARCH parameter box: Nelder-Mead
//! with restarts, and projected gradient descent.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{stream_rng, GarchParams, IOTA};
use crate::trimming::TrimDiagnostics;

use super::FitResult;

/// Criterion minimized over `(omega, alpha, beta)`.
pub trait Objective {
    fn value(&self, theta: &[f64; 3]) -> f64;

    /// Analytic gradient, when available.
    fn gradient(&self, _theta: &[f64; 3]) -> Option<[f64; 3]> {
        None
    }
}

impl<F: Fn(&[f64; 3]) -> f64> Objective for F {
    fn value(&self, theta: &[f64; 3]) -> f64 {
        self(theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    NelderMead { restarts: usize },
    ProjectedGradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    /// Tolerance on the criterion decrease.
    pub tol: f64,
    /// Relative tolerance on the simplex (or step) size.
    pub xtol: f64,
    /// Evaluation budget per Nelder-Mead run, iteration budget for gradient descent.
    pub max_evals: usize,
    /// Seed for restart perturbations.
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::NelderMead { restarts: 3 },
            tol: 1e-8,
            xtol: 1e-7,
            max_evals: 4000,
            seed: 0x5eed,
        }
    }
}

impl OptimizerConfig {
    pub fn projected_gradient() -> Self {
        Self { kind: OptimizerKind::ProjectedGradient, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.xtol > 0.0) {
            return Err(Error::InvalidConfig("optimizer tolerances must be positive".into()));
        }
        if let OptimizerKind::NelderMead { restarts } = self.kind {
            if restarts < 1 {
                return Err(Error::InvalidConfig("Nelder-Mead needs at least one restart".into()));
            }
        }
        if self.max_evals == 0 {
            return Err(Error::InvalidConfig("evaluation budget must be positive".into()));
        }
        Ok(())
    }
}

/// Lower and upper corners of the parameter box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
}

impl Bounds {
    pub fn garch(omega_upper: f64) -> Self {
        Self { lower: [IOTA; 3], upper: [omega_upper, 1.0 - IOTA, 1.0 - IOTA] }
    }

    #[inline]
    pub fn project(&self, x: &mut [f64; 3]) {
        for ((v, lo), hi) in x.iter_mut().zip(self.lower).zip(self.upper) {
            *v = v.clamp(lo, hi);
        }
    }
}

impl Default for Bounds {
    fn default() -> Self {
        Self::garch(2.0)
    }
}

#[inline]
fn eval<O: Objective + ?Sized>(obj: &O, x: &[f64; 3], evals: &mut usize) -> f64 {
    *evals += 1;
    let v = obj.value(x);
    if v.is_finite() { v } else { f64::INFINITY }
}

struct RunOutcome {
    x: [f64; 3],
    f: f64,
    converged: bool,
    iterations: usize,
}

fn initial_steps(x0: &[f64; 3], bounds: &Bounds, scale: f64) -> [f64; 3] {
    let mut steps = [0.25 * x0[0].abs().max(1e-8), 0.05, 0.05];
    for (i, s) in steps.iter_mut().enumerate() {
        *s *= scale;
        if x0[i] + *s > bounds.upper[i] {
            *s = -*s;
        }
    }
    steps
}

fn nelder_mead_run<O: Objective + ?Sized>(
    obj: &O,
    x0: [f64; 3],
    steps: [f64; 3],
    bounds: &Bounds,
    cfg: &OptimizerConfig,
    evals: &mut usize,
    trace: &mut Vec<f64>,
) -> RunOutcome {
    let budget = *evals + cfg.max_evals;
    let mut simplex: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
    let f0 = eval(obj, &x0, evals);
    simplex.push((x0, f0));
    for i in 0..3 {
        let mut x = x0;
        x[i] += steps[i];
        bounds.project(&mut x);
        if x[i] == x0[i] {
            x[i] -= steps[i];
            bounds.project(&mut x);
        }
        let f = eval(obj, &x, evals);
        simplex.push((x, f));
    }
    let scale: [f64; 3] = std::array::from_fn(|i| steps[i].abs().max(f64::MIN_POSITIVE));

    let mut iterations = 0;
    let mut converged = false;
    while *evals < budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        iterations += 1;
        let (best, worst) = (simplex[0].1, simplex[3].1);
        trace.push(best);

        let fspread = worst - best;
        let x0 = simplex[0].0;
        let xspread = simplex[1..]
            .iter()
            .flat_map(|(x, _)| (0..3).map(move |i| (x[i] - x0[i]).abs() / scale[i]))
            .fold(0.0f64, f64::max);
        if best.is_finite() && fspread <= cfg.tol * (best.abs() + cfg.tol) && xspread <= cfg.xtol {
            converged = true;
            break;
        }

        let mut centroid = [0.0; 3];
        for (x, _) in &simplex[..3] {
            for i in 0..3 {
                centroid[i] += x[i] / 3.0;
            }
        }
        let xw = simplex[3].0;
        let along = |t: f64| {
            let mut p: [f64; 3] = std::array::from_fn(|i| centroid[i] + t * (xw[i] - centroid[i]));
            bounds.project(&mut p);
            p
        };

        let xr = along(-1.0);
        let fr = eval(obj, &xr, evals);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(obj, &xe, evals);
            simplex[3] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[2].1 {
            simplex[3] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst {
                let xc = along(-0.5);
                (xc, eval(obj, &xc, evals))
            } else {
                let xc = along(0.5);
                (xc, eval(obj, &xc, evals))
            };
            if fc < worst.min(fr) {
                simplex[3] = (xc, fc);
            } else {
                let xb = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    let mut p: [f64; 3] = std::array::from_fn(|i| xb[i] + 0.5 * (v.0[i] - xb[i]));
                    bounds.project(&mut p);
                    *v = (p, eval(obj, &p, evals));
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    RunOutcome { x: simplex[0].0, f: simplex[0].1, converged, iterations }
}

fn nelder_mead<O: Objective + ?Sized>(
    obj: &O,
    start: [f64; 3],
    bounds: &Bounds,
    cfg: &OptimizerConfig,
    restarts: usize,
) -> (RunOutcome, usize, Vec<f64>) {
    let mut evals = 0;
    let mut trace = Vec::new();
    let mut rng = stream_rng(cfg.seed, 0);

    let steps = initial_steps(&start, bounds, 1.0);
    let mut best = nelder_mead_run(obj, start, steps, bounds, cfg, &mut evals, &mut trace);
    let mut iterations = best.iterations;
    for _ in 0..restarts {
        let factor = 0.5 + rng.gen::<f64>();
        let steps = initial_steps(&best.x, bounds, 0.5 * factor);
        let run = nelder_mead_run(obj, best.x, steps, bounds, cfg, &mut evals, &mut trace);
        iterations += run.iterations;
        let improvement = best.f - run.f;
        let converged = run.converged;
        if run.f <= best.f {
            best = RunOutcome { iterations, ..run };
        } else {
            best.converged = converged && best.converged;
        }
        if improvement.abs() <= cfg.tol * (best.f.abs() + cfg.tol) && converged {
            break;
        }
    }
    best.iterations = iterations;
    (best, evals, trace)
}

fn numeric_gradient<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64; 3],
    bounds: &Bounds,
    evals: &mut usize,
) -> [f64; 3] {
    let mut g = [0.0; 3];
    for i in 0..3 {
        let h = 1e-6 * x[i].abs().max(1e-4);
        let (mut up, mut dn) = (*x, *x);
        up[i] = (x[i] + h).min(bounds.upper[i]);
        dn[i] = (x[i] - h).max(bounds.lower[i]);
        let width = up[i] - dn[i];
        if width > 0.0 {
            g[i] = (eval(obj, &up, evals) - eval(obj, &dn, evals)) / width;
        }
    }
    g
}

fn projected_gradient<O: Objective + ?Sized>(
    obj: &O,
    start: [f64; 3],
    bounds: &Bounds,
    cfg: &OptimizerConfig,
) -> (RunOutcome, usize, Vec<f64>) {
    let mut evals = 0;
    let mut trace = Vec::new();
    // coordinates are scaled so that omega moves relative to its starting size
    let scale = [start[0].abs().max(1e-8), 1.0, 1.0];
    let mut x = start;
    let mut f = eval(obj, &x, &mut evals);
    let mut step = 1e-2;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_evals {
        iterations += 1;
        trace.push(f);
        let g = match obj.gradient(&x) {
            Some(g) => g,
            None => numeric_gradient(obj, &x, bounds, &mut evals),
        };
        let gs: [f64; 3] = std::array::from_fn(|i| g[i] * scale[i]);
        let mut accepted = false;
        let mut t = step * 4.0;
        for _ in 0..60 {
            let mut trial: [f64; 3] = std::array::from_fn(|i| x[i] - t * gs[i] * scale[i]);
            bounds.project(&mut trial);
            let moved: f64 = (0..3).map(|i| (trial[i] - x[i]) / scale[i] * gs[i]).sum();
            let ft = eval(obj, &trial, &mut evals);
            // Armijo condition along the projected arc
            if ft <= f + 1e-4 * moved {
                let dx = (0..3).map(|i| ((trial[i] - x[i]) / scale[i]).abs()).fold(0.0, f64::max);
                let df = f - ft;
                x = trial;
                f = ft;
                step = t;
                accepted = true;
                if df <= cfg.tol * (f.abs() + cfg.tol) && dx <= cfg.xtol.sqrt() {
                    converged = true;
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // no descent along the projected gradient: stationary within the box
            converged = f.is_finite();
            break;
        }
        if converged {
            break;
        }
    }
    (RunOutcome { x, f, converged, iterations }, evals, trace)
}

/// Minimize `objective` over `bounds` starting at `start` (projected into the box).
///
/// Returns a fit whose trim diagnostics are empty; estimators fill them in.
pub fn optimize<O: Objective + ?Sized>(
    objective: &O,
    start: [f64; 3],
    bounds: &Bounds,
    config: &OptimizerConfig,
) -> Result<FitResult> {
    config.validate()?;
    let mut x0 = start;
    bounds.project(&mut x0);
    let (run, evaluations, trace) = match config.kind {
        OptimizerKind::NelderMead { restarts } => nelder_mead(objective, x0, bounds, config, restarts),
        OptimizerKind::ProjectedGradient => projected_gradient(objective, x0, bounds, config),
    };
    if !run.f.is_finite() {
        return Err(Error::OptimizationFailure {
            reason: "objective is non-finite at every probe".into(),
            evaluations,
            trace,
        });
    }
    Ok(FitResult {
        theta_hat: GarchParams::from_array(run.x)?,
        criterion_value: run.f,
        trim: TrimDiagnostics::default(),
        converged: run.converged,
        iterations: run.iterations,
        evaluations,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(target: [f64; 3]) -> impl Fn(&[f64; 3]) -> f64 {
        move |x: &[f64; 3]| {
            let d = [x[0] - target[0], x[1] - target[1], x[2] - target[2]];
            // positive definite, coupled
            4.0 * d[0] * d[0] + d[1] * d[1] + 2.0 * d[2] * d[2] + d[0] * d[1] + 0.5 * d[1] * d[2]
        }
    }

    #[test]
    fn interior_quadratic() {
        let target = [0.3, 0.2, 0.6];
        for cfg in [OptimizerConfig::default(), OptimizerConfig::projected_gradient()] {
            let fit = optimize(&quad(target), [1.0, 0.05, 0.3], &Bounds::default(), &cfg).unwrap();
            assert!(fit.converged, "{cfg:?}");
            for (a, b) in fit.theta_hat.to_array().iter().zip(&target) {
                assert!((a - b).abs() < 1e-4, "{cfg:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn boundary_optimum() {
        let target = [0.3, 0.2, 1.2];
        for cfg in [OptimizerConfig::default(), OptimizerConfig::projected_gradient()] {
            let fit = optimize(&quad(target), [0.5, 0.1, 0.5], &Bounds::default(), &cfg).unwrap();
            assert!(fit.converged);
            assert!((fit.theta_hat.beta() - (1.0 - IOTA)).abs() < 1e-6, "{}", fit.theta_hat);
        }
    }

    #[test]
    fn non_finite_everywhere_fails() {
        let f = |_: &[f64; 3]| f64::NAN;
        let err = optimize(&f, [0.1, 0.1, 0.1], &Bounds::default(), &OptimizerConfig::default());
        assert!(matches!(err, Err(Error::OptimizationFailure { .. })));
    }

    #[test]
    fn deterministic_given_seed() {
        let target = [0.3, 0.2, 0.6];
        let cfg = OptimizerConfig::default();
        let a = optimize(&quad(target), [1.0, 0.05, 0.3], &Bounds::default(), &cfg).unwrap();
        let b = optimize(&quad(target), [1.0, 0.05, 0.3], &Bounds::default(), &cfg).unwrap();
        assert_eq!(a.theta_hat, b.theta_hat);
        assert_eq!(a.objective_trace, b.objective_trace);
    }
}
