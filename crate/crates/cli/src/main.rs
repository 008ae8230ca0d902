//! `helecell`: simulations, experiments and property suites from the shell.
//!
//! Exit codes: 0 success, 1 parse or validation failure, 2 a property
//! suite failed, 3 the solver failed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use helecell::diagnostics::{barrier_check, entropy_budget, mass_budget, BarrierSpec};
use helecell::experiments::{
    comparison_harness, convergence_config, convergence_study, epsilon_sweep, fig1_config,
    fig1_experiment, sweep_config, ExperimentError, Manufactured, StudyScheme, DEFAULT_EPSILONS,
    FIG1_GAMMA,
};
use helecell::hele_shaw::{evolve_front, front_speed, patch_pressure};
use helecell::io::{self, ConfigOverrides, IoError};
use helecell::solver::run;
use helecell::{DiagnosticsRecord, GrowthLaw, PressureLaw, RunConfig, SolverError, Trajectory};

#[derive(Debug, Parser)]
#[command(
    name = "helecell",
    version,
    about = "Tissue growth with a singular pressure law"
)]
struct Cli {
    /// TOML config file; every key is optional (defaults: eps = 0.5,
    /// G(p) = 10 (10 - p)_+, plateau of height 0.8 on [-4, 4], h = 1/200).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(
        long,
        global = true,
        value_name = "PATH",
        env = "HELECELL_OUT_DIR",
        default_value = "out"
    )]
    out_dir: PathBuf,

    /// Seed for randomised suites; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one configuration and write its profile, series and summary.
    Simulate(Overrides),
    /// Singular law against the power law at the reference constants.
    Fig1 {
        /// Power-law exponent.
        #[arg(long, default_value_t = FIG1_GAMMA)]
        gamma: f64,
        /// Final time (default 0.5).
        #[arg(long)]
        final_time: Option<f64>,
    },
    /// Incompressible-limit sweep over eps.
    Sweep {
        /// Comma-separated, strictly decreasing eps values.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_EPSILONS)]
        eps: Vec<f64>,
        /// Final time (default 0.1).
        #[arg(long)]
        final_time: Option<f64>,
    },
    /// Limit free-boundary reference: front length and patch pressure.
    Limit {
        /// Initial patch length.
        #[arg(long = "length0", default_value_t = 1.0)]
        length0: f64,
        /// Final time.
        #[arg(long = "final-time", default_value_t = 0.1)]
        final_time: f64,
        /// RK4 step.
        #[arg(long, default_value_t = 1e-5)]
        dt: f64,
        /// Cells in the pressure profile.
        #[arg(long, default_value_t = 400)]
        samples: usize,
    },
    /// Property suites on the configured run; exit 2 if any fails.
    Check {
        /// Suites to run (repeatable or comma-separated); default all.
        #[arg(long, value_enum, value_delimiter = ',')]
        suite: Vec<Suite>,
        /// Ordered pairs in the comparison suite.
        #[arg(long, default_value_t = 20)]
        pairs: usize,
        /// Time horizon of each comparison pair.
        #[arg(long, default_value_t = 0.02)]
        comparison_time: f64,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Manufactured-solution convergence study.
    Converge {
        /// Number of grid levels, halving h each time.
        #[arg(long, default_value_t = 3)]
        levels: usize,
        /// Coarsest spacing.
        #[arg(long, default_value_t = 0.02)]
        coarsest: f64,
        #[arg(long, value_enum, default_value_t = SchemeChoice::Both)]
        scheme: SchemeChoice,
        /// Semi-implicit step as a multiple of h.
        #[arg(long, default_value_t = 0.01)]
        courant: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Ceiling,
    StateLaw,
    Mass,
    Barrier,
    Entropy,
    Comparison,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeChoice {
    Explicit,
    SemiImplicit,
    Both,
}

/// Flags that override the config file.
#[derive(Debug, Clone, Default, Args)]
struct Overrides {
    /// Pressure law: singular or power-law.
    #[arg(long)]
    law: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Power-law exponent.
    #[arg(long)]
    gamma: Option<f64>,
    /// Slope g of the growth law G(p) = g (P_M - p)_+.
    #[arg(long)]
    g_slope: Option<f64>,
    /// Homeostatic pressure P_M.
    #[arg(long)]
    p_homeostatic: Option<f64>,
    #[arg(long)]
    final_time: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x_max: Option<f64>,
    #[arg(long, conflicts_with = "h")]
    cells: Option<usize>,
    #[arg(long)]
    h: Option<f64>,
    /// explicit or semi-implicit.
    #[arg(long)]
    scheme: Option<String>,
    /// Semi-implicit time step.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    cfl_safety: Option<f64>,
    #[arg(long)]
    snapshot_interval: Option<f64>,
    #[arg(long)]
    entropy_stride: Option<usize>,
}

impl Overrides {
    fn into_config(self, seed: Option<u64>) -> ConfigOverrides {
        ConfigOverrides {
            law: self.law,
            epsilon: self.epsilon,
            gamma: self.gamma,
            g_slope: self.g_slope,
            p_homeostatic: self.p_homeostatic,
            final_time: self.final_time,
            x_min: self.x_min,
            x_max: self.x_max,
            cells: self.cells,
            h: self.h,
            scheme: self.scheme,
            dt: self.dt,
            cfl_safety: self.cfl_safety,
            snapshot_interval: self.snapshot_interval,
            entropy_stride: self.entropy_stride,
            seed,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Suite(String),
    Solver(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Invalid(_) => 1,
            Self::Suite(_) => 2,
            Self::Solver(_) => 3,
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Self::Invalid(e.to_string())
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Config(v) => Self::Invalid(v.to_string()),
            e => Self::Solver(e.to_string()),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Run { source, label } => match source {
                SolverError::Config(v) => Self::Invalid(format!("{label}: {v}")),
                s => Self::Solver(format!("{label}: {s}")),
            },
            e => Self::Invalid(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Invalid(m) => eprintln!("error: {m}"),
                Failure::Suite(m) => eprintln!("property failed: {m}"),
                Failure::Solver(m) => eprintln!("solver failure: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn load(cli_config: Option<&Path>, overrides: ConfigOverrides) -> Result<RunConfig, Failure> {
    Ok(match cli_config {
        Some(path) => io::parse_config(path, &overrides)?,
        None => io::parse_config_str("", &overrides)?,
    })
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let out = cli.out_dir.as_path();
    match cli.command {
        Command::Simulate(o) => {
            let cfg = load(cli.config.as_deref(), o.into_config(cli.seed))?;
            simulate(&cfg, out)
        }
        Command::Fig1 { gamma, final_time } => {
            let mut cfg = fig1_config();
            if let Some(t) = final_time {
                cfg.final_time = t;
            }
            fig1(&cfg, gamma, out)
        }
        Command::Sweep { eps, final_time } => {
            let mut cfg = sweep_config();
            if let Some(t) = final_time {
                cfg.final_time = t;
            }
            sweep(&cfg, &eps, out)
        }
        Command::Limit {
            length0,
            final_time,
            dt,
            samples,
        } => {
            let cfg = load(cli.config.as_deref(), ConfigOverrides::default())?;
            limit(&cfg.growth, length0, final_time, dt, samples, out)
        }
        Command::Check {
            suite,
            pairs,
            comparison_time,
            overrides,
        } => {
            let cfg = load(cli.config.as_deref(), overrides.into_config(cli.seed))?;
            check(&cfg, &suite, pairs, comparison_time, out)
        }
        Command::Converge {
            levels,
            coarsest,
            scheme,
            courant,
        } => converge(levels, coarsest, scheme, courant, out),
    }
}

fn write_run(name: &str, hash: &str, traj: &Trajectory, out: &Path) -> Result<(), Failure> {
    let problem = &traj.problem;
    let records: Vec<DiagnosticsRecord> = traj.records().copied().collect();
    io::emit_series(&records, &io::output_path(out, name, hash, "csv"))?;
    io::emit_profile(
        traj.final_state(),
        &problem.law,
        &problem.grid,
        hash,
        &io::output_path(out, name, hash, "dat"),
    )?;
    Ok(())
}

fn simulate(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let hash = cfg.hash();
    let traj = run(cfg)?;
    write_run("simulate", &hash, &traj, out)?;
    let summary = json!({
        "config": cfg,
        "steps": traj.steps,
        "final": traj.final_record(),
        "max_density": traj.max_density(),
        "max_pressure": traj.max_pressure(),
        "mass_budget": mass_budget(&traj),
    });
    let path = io::write_summary(out, "simulate", &hash, &summary)?;
    let r = traj.final_record();
    println!(
        "t = {}  steps = {}  mass = {:.6}  max n = {:.6}  max p = {:.6}  support radius = {:.4}",
        r.t, traj.steps, r.mass, r.max_n, r.max_p, r.support_radius
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn fig1(cfg: &RunConfig, gamma: f64, out: &Path) -> Result<(), Failure> {
    let hash = cfg.hash();
    let result = fig1_experiment(cfg, gamma)?;
    write_run("fig1-singular", &hash, &result.singular, out)?;
    write_run("fig1-power", &hash, &result.power_law, out)?;
    let c = &result.claims;
    let summary = json!({
        "config": cfg,
        "gamma": gamma,
        "claims": c,
        "holds": c.holds(),
        "steps": { "singular": result.singular.steps, "power_law": result.power_law.steps },
    });
    let path = io::write_summary(out, "fig1", &hash, &summary)?;
    println!("ceiling P_M/(P_M+eps) = {}", c.ceiling);
    println!(
        "singular: max n = {}, max p = {}",
        c.singular_max_n, c.singular_max_p
    );
    println!("power law (gamma = {gamma}): max n = {}", c.power_max_n);
    println!("wrote {}", path.display());
    if c.holds() {
        Ok(())
    } else {
        Err(Failure::Suite(format!("fig1 claims do not hold: {c:?}")))
    }
}

fn sweep(cfg: &RunConfig, eps: &[f64], out: &Path) -> Result<(), Failure> {
    let hash = format!("{}-{}", cfg.hash(), eps.len());
    let r = epsilon_sweep(eps, cfg)?;
    let rows: Vec<Vec<f64>> = (0..eps.len())
        .map(|k| {
            vec![
                r.epsilons[k],
                r.residuals[k],
                r.front_errors[k],
                r.eps_mass[k],
                r.ab_constants[k],
                r.finals[k].support_radius,
                r.steps[k] as f64,
            ]
        })
        .collect();
    io::write_table(
        out,
        "sweep",
        &hash,
        &[
            "epsilon",
            "compl_residual_l1",
            "front_error",
            "eps_mass",
            "ab_constant",
            "support_radius",
            "steps",
        ],
        &rows,
    )?;
    let summary = json!({
        "config": cfg,
        "epsilons": r.epsilons,
        "residuals": r.residuals,
        "distances": r.distances,
        "front_errors": r.front_errors,
        "eps_mass": r.eps_mass,
        "eps_mass_slope": r.eps_mass_slope(),
        "ab_constants": r.ab_constants,
        "residuals_decreasing": r.residuals_decreasing(),
        "distances_decreasing": r.distances_decreasing(),
        "front_errors_decreasing": r.front_errors_decreasing(),
    });
    let path = io::write_summary(out, "sweep", &hash, &summary)?;
    println!(
        "{:>10} {:>14} {:>12} {:>12}",
        "eps", "residual", "front err", "eps*mass"
    );
    for row in &rows {
        println!(
            "{:>10} {:>14.6e} {:>12.6e} {:>12.6e}",
            row[0], row[1], row[2], row[3]
        );
    }
    println!("consecutive L1 distances: {:?}", r.distances);
    println!("wrote {}", path.display());
    Ok(())
}

fn limit(
    growth: &GrowthLaw,
    length0: f64,
    final_time: f64,
    dt: f64,
    samples: usize,
    out: &Path,
) -> Result<(), Failure> {
    if !(length0 > 0.0 && dt > 0.0 && final_time >= 0.0 && samples >= 2) {
        return Err(Failure::Invalid(
            "limit needs length0 > 0, dt > 0, final-time >= 0 and at least 2 samples".into(),
        ));
    }
    let front = evolve_front(length0, growth, final_time, dt);
    let last = *front.last().expect("front has a start");
    let reference = RunConfig {
        growth: *growth,
        final_time,
        ..RunConfig::default()
    };
    let hash = format!("{}-L{length0}", reference.hash());
    // thin the RK4 history to at most ~1000 rows
    let stride = (front.len() / 1000).max(1);
    let mut rows: Vec<Vec<f64>> = front
        .iter()
        .step_by(stride)
        .map(|s| vec![s.t, s.length, front_speed(s.length, growth)])
        .collect();
    if rows.last().map(|r| r[0]) != Some(last.t) {
        rows.push(vec![last.t, last.length, front_speed(last.length, growth)]);
    }
    io::write_table(
        out,
        "limit",
        &hash,
        &["t", "length", "endpoint_speed"],
        &rows,
    )?;
    let half = last.half_length();
    let profile: Vec<Vec<f64>> = (0..=samples)
        .map(|i| {
            let x = -half + 2.0 * half * i as f64 / samples as f64;
            vec![x, patch_pressure(last.length, growth, x)]
        })
        .collect();
    io::write_table(out, "limit-pressure", &hash, &["x", "p"], &profile)?;
    let summary = json!({
        "growth": growth,
        "length0": length0,
        "final_time": final_time,
        "final_length": last.length,
        "endpoint_speed": front_speed(last.length, growth),
        "centre_pressure": patch_pressure(last.length, growth, 0.0),
    });
    let path = io::write_summary(out, "limit", &hash, &summary)?;
    println!("L({final_time}) = {}  (from L0 = {length0})", last.length);
    println!("wrote {}", path.display());
    Ok(())
}

struct Verdict {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn check(
    cfg: &RunConfig,
    suites: &[Suite],
    pairs: usize,
    comparison_time: f64,
    out: &Path,
) -> Result<(), Failure> {
    use Suite::*;
    let selected: Vec<Suite> = if suites.is_empty() {
        vec![Ceiling, StateLaw, Mass, Barrier, Entropy, Comparison]
    } else {
        suites.to_vec()
    };
    let needs_run = selected.iter().any(|s| *s != Comparison);
    let singular = matches!(cfg.law, PressureLaw::Singular { .. });
    let mut cfg = cfg.clone();
    let spec = BarrierSpec::for_growth(cfg.growth.p_homeostatic, &cfg.growth);
    if selected.contains(&Barrier) {
        // two snapshots per barrier window
        cfg.snapshot_interval = cfg.snapshot_interval.min(0.5 * spec.theta);
    }
    let traj = if needs_run { Some(run(&cfg)?) } else { None };
    let mut verdicts = Vec::new();
    for suite in &selected {
        let v = match (suite, &traj) {
            (Ceiling, Some(t)) => {
                let ceiling = t.problem.density_ceiling();
                let p_max = cfg.growth.p_homeostatic;
                let passed = t
                    .records()
                    .all(|r| r.max_n <= ceiling + 1e-10 && (!singular || r.max_p <= p_max + 1e-8));
                Verdict {
                    name: "ceiling",
                    passed,
                    detail: format!(
                        "max n = {} (ceiling {ceiling}), max p = {}",
                        t.max_density(),
                        t.max_pressure()
                    ),
                }
            }
            (StateLaw, Some(t)) => {
                let gap = t.records().map(|r| r.state_law_gap).fold(0.0, f64::max);
                Verdict {
                    name: "state-law",
                    passed: gap <= 1e-12,
                    detail: format!("max |(1-n)p - eps n| = {gap:e}"),
                }
            }
            (Mass, Some(t)) => {
                let m = mass_budget(t);
                Verdict {
                    name: "mass",
                    passed: m.holds,
                    detail: format!("worst mass(t)/(exp(G_m t) mass(0)) = {}", m.worst_ratio),
                }
            }
            (Barrier, Some(t)) => match barrier_check(t, &spec) {
                Ok(b) => Verdict {
                    name: "barrier",
                    passed: b.passed,
                    detail: format!(
                        "max p - barrier = {:e}, max radius excess = {:e}, {} windows",
                        b.max_gap, b.max_radius_excess, b.windows
                    ),
                },
                Err(e) => Verdict {
                    name: "barrier",
                    passed: false,
                    detail: e.to_string(),
                },
            },
            (Entropy, Some(t)) if singular => match entropy_budget(t) {
                Ok(b) => {
                    let last = b.rows.last();
                    Verdict {
                        name: "entropy",
                        passed: b.holds,
                        detail: format!(
                            "final lhs = {:?}, rhs = {:?}",
                            last.map(|r| r.lhs),
                            last.map(|r| r.rhs_bound)
                        ),
                    }
                }
                Err(e) => Verdict {
                    name: "entropy",
                    passed: false,
                    detail: e.to_string(),
                },
            },
            (Entropy, _) => Verdict {
                name: "entropy",
                passed: true,
                detail: "skipped: the entropy is defined for the singular law only".into(),
            },
            (Comparison, _) => {
                let base = RunConfig {
                    final_time: comparison_time,
                    ..cfg.clone()
                };
                let report = comparison_harness(pairs, cfg.seed, &base)?;
                let min_gap = report
                    .pairs
                    .iter()
                    .map(|p| p.min_gap)
                    .fold(f64::INFINITY, f64::min);
                Verdict {
                    name: "comparison",
                    passed: report.passed(),
                    detail: match report.first_violation {
                        Some(v) => format!(
                            "pair {} violates the ordering at t = {}, cell {}: {} > {}",
                            v.pair, v.t, v.cell, v.lower, v.upper
                        ),
                        None => format!("{pairs} pairs, seed {}, min gap {min_gap:e}", cfg.seed),
                    },
                }
            }
            (_, None) => unreachable!("suites other than comparison run the config first"),
        };
        println!(
            "{} {:<10} {}",
            if v.passed { "PASS" } else { "FAIL" },
            v.name,
            v.detail
        );
        verdicts.push(v);
    }
    let hash = cfg.hash();
    let summary = json!({
        "config": cfg,
        "suites": verdicts
            .iter()
            .map(|v| json!({ "suite": v.name, "passed": v.passed, "detail": v.detail }))
            .collect::<Vec<_>>(),
    });
    io::write_summary(out, "check", &hash, &summary)?;
    let failed: Vec<&str> = verdicts
        .iter()
        .filter(|v| !v.passed)
        .map(|v| v.name)
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        let details: Vec<String> = verdicts
            .iter()
            .filter(|v| !v.passed)
            .map(|v| format!("{}: {}", v.name, v.detail))
            .collect();
        Err(Failure::Suite(details.join("; ")))
    }
}

fn converge(
    levels: usize,
    coarsest: f64,
    scheme: SchemeChoice,
    courant: f64,
    out: &Path,
) -> Result<(), Failure> {
    let base = convergence_config();
    let spacings: Vec<f64> = (0..levels)
        .map(|k| coarsest / f64::powi(2.0, k as i32))
        .collect();
    let solution = Manufactured::standard(base.law, base.growth);
    let schemes = match scheme {
        SchemeChoice::Explicit => vec![StudyScheme::Explicit],
        SchemeChoice::SemiImplicit => vec![StudyScheme::SemiImplicit { courant }],
        SchemeChoice::Both => vec![StudyScheme::Explicit, StudyScheme::SemiImplicit { courant }],
    };
    let hash = format!("{}-{levels}", base.hash());
    let mut tables = Vec::new();
    let mut rows = Vec::new();
    for s in schemes {
        let table = convergence_study(&spacings, &base, &solution, s)?;
        let tag = if matches!(s, StudyScheme::Explicit) {
            0.0
        } else {
            1.0
        };
        println!("{s:?}");
        println!("{:>12} {:>14} {:>8}", "h", "L1 error", "order");
        for r in &table.rows {
            let order = r.order.map_or("-".to_string(), |o| format!("{o:.4}"));
            println!("{:>12.6} {:>14.6e} {:>8}", r.h, r.error_l1, order);
            rows.push(vec![
                tag,
                r.h,
                r.error_l1,
                r.order.unwrap_or(f64::NAN),
                r.steps as f64,
            ]);
        }
        tables.push(table);
    }
    io::write_table(
        out,
        "converge",
        &hash,
        &["semi_implicit", "h", "error_l1", "order", "steps"],
        &rows,
    )?;
    let summary = json!({ "config": base, "solution": solution, "tables": tables });
    let path = io::write_summary(out, "converge", &hash, &summary)?;
    println!("wrote {}", path.display());
    Ok(())
}
