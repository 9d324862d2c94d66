//! The four subcommands. Each writes its human-readable report to `out`
//! and returns the process exit code alongside structured results.

use std::fs::{self, File};
use std::io::{BufWriter, Write};

use anyhow::Context;
use kwc_core::analysis::{convergence_study, ConvergenceReport};
use kwc_core::model::{default_c1, stability_bounds};
use kwc_core::stepper::RANGE_TOL;
use kwc_core::{Error as CoreError, Scheme, Simulation, StabilityBounds};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::series::{fmt_f64, write_snapshots, SeriesWriter, TimeSeriesRow, SERIES_FILE};
use crate::verify::{bound_suite, identity_suite, CheckResult, BOUND_EPS, IDENTITY_KS};

pub mod exit {
    pub const OK: u8 = 0;
    /// A verification floor or acceptance check was not met.
    pub const FLOOR: u8 = 1;
    pub const NONCONVERGENCE: u8 = 2;
    pub const INVARIANT: u8 = 3;
    pub const CONFIG: u8 = 64;
    pub const IO: u8 = 74;
}

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] anyhow::Error),
}

impl CommandError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CommandError::Config(_) => exit::CONFIG,
            CommandError::Io(_) => exit::IO,
        }
    }
}

fn config_err(e: CoreError) -> CommandError {
    CommandError::Config(ConfigError::Invalid(e.to_string()))
}

fn io<T>(r: std::io::Result<T>) -> Result<T, CommandError> {
    r.map_err(|e| CommandError::Io(e.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OffenceKind {
    Range,
    Dissipation,
}

/// The step that broke an invariant by the widest margin, measured in
/// units of the allowed tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Offender {
    pub j: usize,
    pub kind: OffenceKind,
    pub amount: f64,
    pub tol: f64,
}

impl Offender {
    fn ratio(&self) -> f64 {
        self.amount / self.tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Passed,
    Violated(Offender),
    /// The solve of step `j` failed.
    Failed { j: usize, message: String },
}

impl RunStatus {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunStatus::Passed => exit::OK,
            RunStatus::Violated(_) => exit::INVARIANT,
            RunStatus::Failed { .. } => exit::NONCONVERGENCE,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub rows: Vec<TimeSeriesRow>,
    pub status: RunStatus,
    pub bounds: StabilityBounds,
}

/// Step-size bounds for `cfg`, with `C1` defaulting to `max(1, max |H0|)`.
pub fn compute_bounds(cfg: &RunConfig) -> Result<StabilityBounds, CommandError> {
    let mobility = cfg.build_mobility()?;
    let c1 = match cfg.c1 {
        Some(c) => c,
        None => default_c1(cfg.ic.fields(&cfg.grid)?.0.interior()),
    };
    stability_bounds(&cfg.params, &mobility, c1, cfg.grid.dx()).map_err(config_err)
}

fn flag(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "violated"
    }
}

fn print_bounds(out: &mut dyn Write, dt: f64, b: &StabilityBounds) -> std::io::Result<()> {
    let exist = b.dt_exist.unwrap_or(f64::INFINITY);
    writeln!(out, "dt        {dt:e}")?;
    writeln!(out, "dt_exist  {exist:.6e}  {}", flag(dt < exist))?;
    writeln!(out, "a         {:.6e}  (C1 = {}, L = {})", b.a_const, b.c1, b.l_tilde - 1.0)?;
    writeln!(out, "dt_error  {:.6e}  {}", b.dt_error, flag(b.error_ok(dt)))
}

/// Prints both step-size bounds and whether the configured `dt` meets them.
pub fn bounds(cfg: &RunConfig, out: &mut dyn Write) -> Result<StabilityBounds, CommandError> {
    let b = compute_bounds(cfg)?;
    io(print_bounds(out, cfg.grid.dt(), &b))?;
    Ok(b)
}

/// Steps to `T = N dt`, writing `series.csv` and snapshots into the
/// output directory.
pub fn run(cfg: &RunConfig, out: &mut dyn Write) -> Result<RunSummary, CommandError> {
    let grid = cfg.grid;
    let mobility = cfg.build_mobility()?;
    let scheme = Scheme::new(cfg.params, grid, mobility).map_err(config_err)?;
    let (h0, th0) = cfg.ic.fields(&grid)?;
    if h0.min() < 0.0 || h0.max() > 1.0 {
        return Err(ConfigError::Invalid(format!(
            "initial H must lie in [0, 1], found [{}, {}]",
            h0.min(),
            h0.max()
        ))
        .into());
    }

    let b = compute_bounds(cfg)?;
    io(writeln!(
        out,
        "run: ic = {}, K = {}, dt = {}, N = {}, T = {}",
        cfg.ic.label(),
        grid.k(),
        grid.dt(),
        grid.steps(),
        grid.horizon()
    ))?;
    io(print_bounds(out, grid.dt(), &b))?;
    if b.exist_ok(grid.dt()) == Some(false) {
        let msg = format!(
            "dt = {} exceeds the sufficient existence bound {:.4e}",
            grid.dt(),
            b.dt_exist.unwrap_or(f64::INFINITY)
        );
        if cfg.solver.warn_only_on_exist_cond {
            io(writeln!(out, "warning: {msg}; the bound is only sufficient, continuing"))?;
        } else {
            return Err(ConfigError::Invalid(format!("{msg} and solver.strict_exist is set")).into());
        }
    }

    let mut sim = Simulation::new(scheme, h0, th0, cfg.solver).map_err(config_err)?;
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut series = SeriesWriter::create(&dir.join(SERIES_FILE))?;
    let first = TimeSeriesRow::initial(&sim.state);
    series.push(&first)?;
    write_snapshots(dir, &grid, &sim.state)?;
    let mut rows = vec![first];

    let mut worst: Option<Offender> = None;
    let mut status = RunStatus::Passed;
    let n = grid.steps();
    for j in 1..=n {
        let report = match sim.step() {
            Ok(r) => r,
            Err(e) => {
                status = RunStatus::Failed { j, message: e.to_string() };
                break;
            }
        };
        let row = TimeSeriesRow::after_step(&sim.state, &report);
        series.push(&row)?;
        rows.push(row);
        if j % cfg.output.stride == 0 || j == n {
            write_snapshots(dir, &grid, &sim.state)?;
        }
        let mut offences = Vec::new();
        if !report.range_ok {
            offences.push(Offender {
                j,
                kind: OffenceKind::Range,
                amount: report.range_violation,
                tol: RANGE_TOL,
            });
        }
        if !report.dissipation_ok {
            offences.push(Offender {
                j,
                kind: OffenceKind::Dissipation,
                amount: report.dissipation_slack,
                tol: sim.bounds.dissipation_tol(grid.dt()),
            });
        }
        for o in offences {
            if worst.is_none_or(|w| o.ratio() > w.ratio()) {
                worst = Some(o);
            }
        }
    }
    if let (RunStatus::Passed, Some(o)) = (&status, worst) {
        status = RunStatus::Violated(o);
    }

    let last = rows.last().expect("initial row");
    let msg = match &status {
        RunStatus::Passed => format!(
            "ok: {} steps, energy {} -> {}",
            last.j,
            fmt_f64(rows[0].energy),
            fmt_f64(last.energy)
        ),
        RunStatus::Violated(o) => format!(
            "invariant violated: worst offender step {} ({:?}) by {:e} (tolerance {:e})",
            o.j, o.kind, o.amount, o.tol
        ),
        RunStatus::Failed { j, message } => format!("solver failed at step {j}: {message}"),
    };
    io(writeln!(out, "{msg}"))?;
    Ok(RunSummary { rows, status, bounds: b })
}

pub const CONVERGENCE_FILE: &str = "convergence.csv";

#[derive(Debug, Clone)]
pub struct ConvergeOutcome {
    pub report: Option<ConvergenceReport>,
    pub code: u8,
}

/// Refinement study against a finer reference; exit 0 iff the fitted
/// order reaches `converge.floor` (or every level is exact).
pub fn converge(cfg: &RunConfig, out: &mut dyn Write) -> Result<ConvergeOutcome, CommandError> {
    let study = &cfg.converge.study;
    study.validate().map_err(config_err)?;
    let ic = cfg.ic.profiles().ok_or_else(|| {
        ConfigError::Invalid("converge needs grid-independent initial data (a preset or ic = expr)".into())
    })?;
    let mobility = cfg.mobility.build(&cfg.params, study.horizon)?;

    let report = match convergence_study(&cfg.params, &mobility, &ic, study) {
        Ok(r) => r,
        Err(e) => {
            io(writeln!(out, "convergence study failed: {e}"))?;
            return Ok(ConvergeOutcome {
                report: None,
                code: exit::NONCONVERGENCE,
            });
        }
    };

    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(CONVERGENCE_FILE);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(["level", "K", "dt", "e_eta", "e_theta"]).context("writing convergence.csv")?;
    for l in &report.levels {
        w.write_record([
            l.level.to_string(),
            l.k.to_string(),
            fmt_f64(l.dt),
            fmt_f64(l.e_eta),
            fmt_f64(l.e_theta),
        ])
        .context("writing convergence.csv")?;
    }
    w.flush().context("writing convergence.csv")?;

    let floor = cfg.converge.floor;
    let show = |o: Option<f64>| o.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    let (pass, verdict) = if report.exact() {
        (true, "exact".to_string())
    } else {
        let ok = report.meets(floor);
        (ok, if ok { "ok".into() } else { format!("below floor {floor}") })
    };
    io(writeln!(
        out,
        "order eta {} theta {} (pairwise {} / {}), fitted {} vs floor {floor}, reference K = {}: {verdict}",
        show(report.eta_fit.map(|f| f.order)),
        show(report.theta_fit.map(|f| f.order)),
        show(report.pairwise_eta),
        show(report.pairwise_theta),
        show(report.fitted_order()),
        report.reference_k,
    ))?;
    Ok(ConvergeOutcome {
        report: Some(report),
        code: if pass { exit::OK } else { exit::FLOOR },
    })
}

/// Runs the identity and bound suites; exit 1 if any check fails.
pub fn verify_ops(seed: u64, pairs: usize, samples: usize, out: &mut dyn Write) -> Result<(Vec<CheckResult>, u8), CommandError> {
    let mut checks = identity_suite(seed, pairs, &IDENTITY_KS);
    checks.extend(bound_suite(seed, samples, &BOUND_EPS));
    for c in &checks {
        io(writeln!(out, "{c}"))?;
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    io(writeln!(out, "{} checks, {failed} failed", checks.len()))?;
    let code = if failed == 0 { exit::OK } else { exit::FLOOR };
    Ok((checks, code))
}
