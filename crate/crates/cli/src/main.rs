//! `tailgarch`: fit, simulate, run Monte Carlo experiments and compute
//! fractile balances from the command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 optimizer did not converge.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tailgarch::io::{format_f64, write_series};
use tailgarch::montecarlo::{self, ExperimentSpec};
use tailgarch::trimming::{
    balance_residual, fractile_schedule, implied_k2, pqmttl_schedule, rate_diagnostics,
};
use tailgarch::{
    load_returns, mnwm_scale, pareto_balance_k1, qmttl_scale, simulate_garch, Error, ErrorDist,
    ErrorLaw, Estimator, FitConfig, GarchParams, PriceMode, Redescender, SimConfig, TrimMode,
};

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Bundled experiment specs, addressable by name.
const BUNDLED: &[(&str, &str)] = &[
    ("gaussian_n800", include_str!("../specs/gaussian_n800")),
    ("pareto25_n100", include_str!("../specs/pareto25_n100")),
];

#[derive(Parser, Debug)]
#[command(name = "tailgarch", version, about = "Robust GARCH(1,1) estimation under heavy-tailed errors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one estimator to a returns or prices column.
    Fit(FitArgs),
    /// Simulate a GARCH(1,1) sample and write it as a one-column file.
    Simulate(SimulateArgs),
    /// Run a Monte Carlo experiment from a spec file or a bundled spec.
    Montecarlo(McArgs),
    /// Balanced left-tail fractile and rate diagnostics for Pareto errors.
    Balance(BalanceArgs),
}

#[derive(Args, Debug)]
struct TrimArgs {
    /// Trimming schedule: sa, wa or s.
    #[arg(long = "trim-mode", default_value = "sa")]
    trim_mode: String,
    /// Tail fraction in k2 = max{1, [lambda n / ln n]}.
    #[arg(long, default_value_t = 0.025)]
    lambda: f64,
    /// MNWM transform: i (simple trim), h (Hampel), t (Tukey) or e (exponential).
    #[arg(long, default_value = "i")]
    redescender: String,
    /// Power-law index for pqml and pqmttl.
    #[arg(long = "pqml-index", default_value_t = 3.5)]
    pqml_index: f64,
    /// Trim exactly k observations per tail.
    #[arg(long)]
    exclusive: bool,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Comma-separated file with a header row.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "y")]
    column: String,
    /// prices or returns.
    #[arg(long, default_value = "returns")]
    mode: String,
    /// qmttl, mnwm, qml, loglad, wlqml, pqml or pqmttl.
    #[arg(long, default_value = "qmttl")]
    estimator: String,
    #[command(flatten)]
    trim: TrimArgs,
    /// Optimizer restart seed.
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
    /// Machine-readable report (name,value table); a `.meta` sidecar is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print a human-readable table.
    #[arg(long)]
    human: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, default_value_t = 800)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// gaussian, laplace or pareto (with --kappa), or pareto(<kappa>).
    #[arg(long, default_value = "gaussian")]
    dist: String,
    #[arg(long)]
    kappa: Option<f64>,
    /// omega,alpha,beta.
    #[arg(long, default_value = "0.05,0.05,0.90")]
    theta: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct McArgs {
    /// Spec file with `key = value` lines.
    #[arg(long, conflicts_with = "bundled")]
    spec: Option<PathBuf>,
    /// Name of a bundled spec.
    #[arg(long)]
    bundled: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated estimator presets, e.g. qmttl-sa,qml,loglad.
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Estimates table; rejections go to `<out>.rejections.csv`, metadata to `<out>.meta`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    human: bool,
}

#[derive(Args, Debug)]
struct BalanceArgs {
    #[arg(long)]
    kappa: f64,
    #[arg(long)]
    n: usize,
    /// Right-tail fractile; defaults to max{1, [lambda n / ln n]}.
    #[arg(long)]
    k2: Option<usize>,
    #[arg(long, default_value_t = 0.025)]
    lambda: f64,
    /// Pareto tail constant d in P(|e| > a) = d a^-kappa.
    #[arg(long, default_value_t = 1.0)]
    d: f64,
}

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidConfig(_) | Error::InvalidRestriction(_) | Error::NoBracket(_) => 1,
            Error::OptimizationFailure { .. } => 3,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Montecarlo(a) => cmd_montecarlo(a),
        Command::Balance(a) => cmd_balance(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("tailgarch: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn parse_dist(dist: &str, kappa: Option<f64>) -> Result<ErrorDist, Failure> {
    let law = match (dist.trim().to_ascii_lowercase().as_str(), kappa) {
        ("pareto", Some(k)) => ErrorLaw::Pareto { kappa: k },
        ("pareto", None) => return Err(usage("--dist pareto needs --kappa")),
        (other, _) => other.parse::<ErrorLaw>()?,
    };
    Ok(ErrorDist { law, ..ErrorDist::gaussian() })
}

/// Sidecar `<path>.meta` with `key = value` lines, followed by `extra` verbatim.
fn write_meta(path: &Path, lines: &[(&str, String)], extra: &str) -> Result<(), Failure> {
    let mut s = String::new();
    for (k, v) in lines {
        let _ = writeln!(s, "{k} = {v}");
    }
    s.push_str(extra);
    let mut meta = path.as_os_str().to_owned();
    meta.push(".meta");
    fs::write(PathBuf::from(meta), s).map_err(|e| Failure::from(Error::Io(e)))
}

fn fit_config(estimator: Estimator, n: usize, t: &TrimArgs, seed: u64) -> Result<FitConfig, Failure> {
    let mode: TrimMode = t.trim_mode.parse()?;
    let plan = match estimator {
        Estimator::Qmttl => fractile_schedule(n, t.lambda, mode)?,
        Estimator::Pqmttl => pqmttl_schedule(n, t.lambda, mode)?,
        Estimator::Mnwm => {
            let p = fractile_schedule(n, t.lambda, TrimMode::Symmetric)?;
            tailgarch::TrimPlan::custom(0, p.k2, p.k_y)
        }
        _ => tailgarch::TrimPlan::disabled(),
    };
    let mut cfg = FitConfig::with_plan(plan.with_exclusive(t.exclusive));
    cfg.redescender = t.redescender.parse::<Redescender>()?;
    cfg.pqml_index = t.pqml_index;
    cfg.optimizer.seed = seed;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_fit(a: FitArgs) -> Result<u8, Failure> {
    let estimator: Estimator = a.estimator.parse()?;
    let mode: PriceMode = a.mode.parse()?;
    let data = load_returns(&a.data, &a.column, mode)?;
    let y = &data.values;
    let cfg = fit_config(estimator, y.len(), &a.trim, a.seed)?;
    let fit = estimator.fit(y, &cfg)?;
    let se = if fit.converged {
        match estimator {
            Estimator::Qmttl | Estimator::Qml => qmttl_scale(&fit, y, &cfg).ok().map(|s| s.se),
            Estimator::Mnwm => mnwm_scale(&fit, y, &cfg).ok().map(|s| s.se),
            _ => None,
        }
    } else {
        None
    };
    let theta = fit.theta_hat.to_array();
    let num = |v: f64| format_f64(v);
    let se_of = |i: usize| se.map_or("NA".to_string(), |s| num(s[i]));

    let mut table = String::from("name,value\n");
    let rows: Vec<(&str, String)> = vec![
        ("omega", num(theta[0])),
        ("alpha", num(theta[1])),
        ("beta", num(theta[2])),
        ("se_omega", se_of(0)),
        ("se_alpha", se_of(1)),
        ("se_beta", se_of(2)),
        ("criterion", num(fit.criterion_value)),
        ("converged", fit.converged.to_string()),
        ("iterations", fit.iterations.to_string()),
        ("evaluations", fit.evaluations.to_string()),
        ("n", y.len().to_string()),
        ("k1", cfg.plan.k1.to_string()),
        ("k2", cfg.plan.k2.to_string()),
        ("k_y", cfg.plan.k_y.to_string()),
        ("trimmed_neg", fit.trim.trimmed_neg.to_string()),
        ("trimmed_pos", fit.trim.trimmed_pos.to_string()),
        ("trimmed_y", fit.trim.trimmed_y.to_string()),
    ];
    for (k, v) in &rows {
        let _ = writeln!(table, "{k},{v}");
    }

    if let Some(out) = &a.out {
        fs::write(out, &table).map_err(|e| Failure::from(Error::Io(e)))?;
        write_meta(
            out,
            &[
                ("tool", format!("tailgarch {VERSION}")),
                ("command", "fit".into()),
                ("data", a.data.display().to_string()),
                ("column", a.column.clone()),
                ("mode", a.mode.clone()),
                ("source_rows", data.source_rows.to_string()),
                ("skipped_rows", data.skipped_rows.to_string()),
                ("estimator", estimator.name().into()),
                ("trim_mode", a.trim.trim_mode.clone()),
                ("lambda", a.trim.lambda.to_string()),
                ("redescender", a.trim.redescender.clone()),
                ("pqml_index", a.trim.pqml_index.to_string()),
                ("exclusive", a.trim.exclusive.to_string()),
                ("seed", a.seed.to_string()),
            ],
            "",
        )?;
    }
    if a.human || a.out.is_none() {
        println!("{} fit on {} observations of `{}`", estimator.name(), y.len(), data.label);
        for (i, name) in ["omega", "alpha", "beta"].iter().enumerate() {
            let se = se.map_or(String::new(), |s| format!("({:.4})", s[i]));
            println!("  {name:<6} {:>9.4} {se}", theta[i]);
        }
        println!(
            "  trimmed: {} left, {} right, {} by lagged |y|",
            fit.trim.trimmed_neg, fit.trim.trimmed_pos, fit.trim.trimmed_y
        );
        println!(
            "  criterion {:.6}, {} iterations, converged: {}",
            fit.criterion_value, fit.iterations, fit.converged
        );
    }
    if !fit.converged {
        eprintln!("tailgarch: optimizer did not converge after {} evaluations", fit.evaluations);
        return Ok(3);
    }
    Ok(0)
}

fn cmd_simulate(a: SimulateArgs) -> Result<u8, Failure> {
    let dist = parse_dist(&a.dist, a.kappa)?;
    let parts: Vec<f64> = a
        .theta
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("--theta: cannot parse `{}`", a.theta)))?;
    let arr: [f64; 3] =
        parts.try_into().map_err(|_| usage("--theta needs three comma-separated values"))?;
    let theta = GarchParams::from_array(arr).map_err(|e| usage(e.to_string()))?;
    let y = simulate_garch(&theta, &dist, a.n, a.seed, &SimConfig::default())?;
    write_series(&a.out, "y", &y)?;
    write_meta(
        &a.out,
        &[
            ("tool", format!("tailgarch {VERSION}")),
            ("command", "simulate".into()),
            ("n", a.n.to_string()),
            ("seed", a.seed.to_string()),
            ("dist", dist.to_string()),
            ("theta", theta.to_string()),
        ],
        "",
    )?;
    Ok(0)
}

fn cmd_montecarlo(a: McArgs) -> Result<u8, Failure> {
    let text = match (&a.spec, &a.bundled) {
        (Some(path), _) => fs::read_to_string(path).map_err(|e| Failure::from(Error::Io(e)))?,
        (None, Some(name)) => BUNDLED
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t.to_string())
            .ok_or_else(|| {
                let names: Vec<&str> = BUNDLED.iter().map(|(n, _)| *n).collect();
                usage(format!("no bundled spec `{name}` (have: {})", names.join(", ")))
            })?,
        (None, None) => String::new(),
    };
    let mut spec = ExperimentSpec::parse(&text)?;
    if let Some(n) = a.n {
        spec.n = n;
    }
    if let Some(r) = a.reps {
        spec.reps = r;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(l) = a.lambda {
        spec.lambda = l;
    }
    if let Some(e) = &a.estimator {
        spec.set("estimators", e)?;
    }
    if let Some(d) = &a.dist {
        spec.dist = parse_dist(d, a.kappa)?;
    }
    spec.validate()?;
    let report = montecarlo::run(&spec)?;

    if let Some(out) = &a.out {
        fs::write(out, report.estimates_csv()).map_err(|e| Failure::from(Error::Io(e)))?;
        let mut rej = out.as_os_str().to_owned();
        rej.push(".rejections.csv");
        fs::write(PathBuf::from(rej), report.rejections_csv())
            .map_err(|e| Failure::from(Error::Io(e)))?;
        let canonical = spec.canonical();
        let echo: String = canonical.lines().filter(|l| !l.starts_with("seed ")).map(|l| format!("{l}\n")).collect();
        write_meta(
            out,
            &[
                ("tool", format!("tailgarch {VERSION}")),
                ("command", "montecarlo".into()),
                ("spec_hash", report.spec_hash.clone()),
                ("seed", spec.seed.to_string()),
            ],
            &echo,
        )?;
    }
    if a.human || a.out.is_none() {
        print!("{report}");
    }
    Ok(0)
}

fn cmd_balance(a: BalanceArgs) -> Result<u8, Failure> {
    if !(a.kappa > 2.0 && a.kappa < 4.0) {
        return Err(usage(format!("--kappa must lie in (2, 4), got {}", a.kappa)));
    }
    let k2 = match a.k2 {
        Some(k) => k,
        None => fractile_schedule(a.n, a.lambda, TrimMode::Symmetric)?.k2,
    };
    let k1 = pareto_balance_k1(a.kappa, a.n, k2)?;
    let residual = balance_residual(a.kappa, a.n, k1 as f64, k2 as f64);
    let implied = implied_k2(a.kappa, a.n, k1 as f64);
    let rate = rate_diagnostics(a.kappa, a.n, k2, a.d)?;
    println!("name,value");
    println!("kappa,{}", a.kappa);
    println!("n,{}", a.n);
    println!("k2,{k2}");
    println!("k1,{k1}");
    println!("residual,{}", format_f64(residual));
    println!("implied_k2,{}", format_f64(implied));
    println!("scale_rate,{}", format_f64(rate.scale_rate));
    println!("root_n,{}", format_f64(rate.root_n));
    println!("log_rate_exponent,{}", format_f64(rate.log_rate_exponent));
    Ok(0)
}
