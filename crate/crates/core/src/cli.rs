//! Command-line interface.
//!
//! Exit codes: 0 on success (verdict `certified` or `grid_feasible_only`),
//! 2 when the verdict is `failed`, 1 on input, configuration or schema errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::certifier::{certify, Verdict};
use crate::config::{Config, ConfigError, Overrides, SweepOver};
use crate::dualsolver::maximize_dual;
use crate::instance::{Instance, InstanceError, Outcome};
use crate::output::{validate, validate_result, PlotBundle, ResultDocument, SchemaError, Timing};
use crate::sweep::{sweep_m, sweep_n, SweepError, SweepReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "arcfit", version, about = "Bounded polynomial approximation on circle arcs")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Polynomial degree n.
    #[arg(long, global = true)]
    pub degree: Option<usize>,
    /// Constraint grid size m.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Bound ρ, or a comma-separated list with one value per arc of J.
    #[arg(long, global = true, value_delimiter = ',')]
    pub bound: Option<Vec<f64>>,
    /// Output path; `-` for standard output.
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// KKT tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one instance and write a result document.
    Solve,
    /// Re-check a result document against the configured problem.
    Certify { result: PathBuf },
    /// Run the sweep described in the configuration.
    Sweep,
    /// Write plot data for a result document.
    EmitPlot { result: PathBuf },
    /// Check any arcfit JSON document against its schema.
    Validate { file: PathBuf },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("--config is required for this command")]
    NoConfig,
    #[error("configuration has no [sweep] section")]
    NoSweep,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error("{path}: {source}")]
    Schema { path: PathBuf, source: SchemaError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: invalid JSON: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("cannot write CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("result does not belong to this configuration: {0}")]
    Mismatch(String),
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

pub fn execute(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Solve => solve(cli),
        Command::Certify { result } => recertify(cli, result),
        Command::Sweep => sweep(cli),
        Command::EmitPlot { result } => emit_plot(cli, result),
        Command::Validate { file } => {
            let value = read_json(file)?;
            let schema = validate(&value).map_err(|source| CliError::Schema { path: file.clone(), source })?;
            println!("{}: valid {schema}", file.display());
            Ok(EXIT_OK)
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config, CliError> {
    let path = cli.config.as_ref().ok_or(CliError::NoConfig)?;
    let mut cfg = Config::load(path)?;
    cfg.apply(&Overrides {
        degree: cli.degree,
        grid: cli.grid,
        bound: cli.bound.clone(),
        tol: cli.tol,
        jobs: cli.jobs,
    });
    Ok(cfg)
}

fn verdict_code(v: Verdict) -> i32 {
    if v == Verdict::Failed {
        EXIT_FAILED
    } else {
        EXIT_OK
    }
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.to_path_buf(), source })
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) if p != Path::new("-") => {
            std::fs::write(p, text).map_err(|source| CliError::Io { path: p.to_path_buf(), source })
        }
        _ => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_json<T: Serialize>(path: Option<&Path>, doc: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(doc).expect("documents serialize");
    text.push('\n');
    write_text(path, &text)
}

fn solve(cli: &Cli) -> Result<i32, CliError> {
    let cfg = load_config(cli)?;
    let inst = cfg.instance()?;
    let (n, m) = (cfg.degree()?, cfg.grid()?);
    let problem = inst.problem(n, m)?;
    let t = Instant::now();
    let result = maximize_dual(&problem, &inst.solve).map_err(InstanceError::from)?;
    let solve_s = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let certificate = certify(&problem, &result.coefficients, &result.multipliers, &inst.certify);
    let certify_s = t.elapsed().as_secs_f64();
    let verdict = certificate.verdict;
    eprintln!(
        "n={n} m={m} status={:?} iterations={} misfit={:.6e} verdict={:?}",
        result.status, result.iterations, result.misfit, verdict
    );
    let outcome = Outcome { problem, result, certificate };
    let doc = ResultDocument::new(&inst, n, m, outcome, Timing { solve_s, certify_s })?;
    write_json(cli.out.as_deref().or(cfg.output.result.as_deref()), &doc)?;
    Ok(verdict_code(verdict))
}

/// Load a result document and check that it was produced from `inst`.
fn load_result(inst: &Instance, path: &Path) -> Result<ResultDocument, CliError> {
    let value = read_json(path)?;
    let doc = validate_result(&value).map_err(|source| CliError::Schema { path: path.to_path_buf(), source })?;
    if doc.problem.data_digest != inst.digest() {
        return Err(CliError::Mismatch("data digest differs".into()));
    }
    let arcs: Vec<(f64, f64)> = inst.arcs.clone().into();
    let same_arcs = arcs.len() == doc.problem.arcs.len()
        && arcs.iter().zip(&doc.problem.arcs).all(|(a, b)| (a.0 - b.0).abs() <= 1e-12 && (a.1 - b.1).abs() <= 1e-12);
    if !same_arcs {
        return Err(CliError::Mismatch("approximation arcs differ".into()));
    }
    if doc.problem.bounds != inst.component_bounds()? {
        return Err(CliError::Mismatch("bounds differ".into()));
    }
    if doc.problem.gram_mode != inst.gram_mode {
        return Err(CliError::Mismatch("Gram mode differs".into()));
    }
    Ok(doc)
}

fn recertify(cli: &Cli, path: &Path) -> Result<i32, CliError> {
    let cfg = load_config(cli)?;
    let inst = cfg.instance()?;
    let doc = load_result(&inst, path)?;
    for (flag, given, stored) in [("--degree", cli.degree, doc.problem.degree), ("--grid", cli.grid, doc.problem.grid)]
    {
        if given.is_some_and(|v| v != stored) {
            return Err(CliError::Mismatch(format!("{flag} differs from the result ({stored})")));
        }
    }
    let problem = inst.problem(doc.problem.degree, doc.problem.grid)?;
    if problem.num_constraints() != doc.solve.multipliers.len() {
        return Err(CliError::Mismatch("constraint grid size differs".into()));
    }
    let cert = certify(&problem, &doc.solve.coefficients, &doc.solve.multipliers, &inst.certify);
    eprintln!(
        "verdict={:?} stationarity={:.3e} grid_violation={:.3e}",
        cert.verdict, cert.stationarity_residual, cert.max_grid_violation
    );
    for r in &cert.reasons {
        eprintln!("  {r}");
    }
    write_json(cli.out.as_deref(), &cert)?;
    Ok(verdict_code(cert.verdict))
}

fn report_paths(prefix: &Path) -> (PathBuf, PathBuf) {
    let base = if prefix.extension().is_some_and(|e| e == "json" || e == "csv") {
        prefix.with_extension("")
    } else {
        prefix.to_path_buf()
    };
    let mut json = base.clone().into_os_string();
    json.push(".json");
    let mut csv = base.into_os_string();
    csv.push(".csv");
    (json.into(), csv.into())
}

fn sweep(cli: &Cli) -> Result<i32, CliError> {
    let cfg = load_config(cli)?;
    let plan = cfg.sweep.clone().ok_or(CliError::NoSweep)?;
    let inst = cfg.instance()?;
    let report: SweepReport = match plan.over {
        SweepOver::Grid => sweep_m(&inst, cfg.degree()?, &plan.grids, plan.jobs)?,
        SweepOver::Degree => sweep_n(&inst, &plan.degrees, plan.rule, plan.jobs)?,
    };
    for c in &report.cells {
        let verdict = c.verdict.map(|v| format!("{v:?}")).or_else(|| c.error.clone()).unwrap_or_default();
        eprintln!("n={:<5} m={:<6} misfit={:<12.6e} {verdict}", c.n, c.m, c.misfit.unwrap_or(f64::NAN));
    }
    let prefix = cli.out.clone().or(cfg.output.report.clone()).unwrap_or_else(|| PathBuf::from("report"));
    let (json_path, csv_path) = report_paths(&prefix);
    write_json(Some(&json_path), &report)?;
    write_text(Some(&csv_path), &report.to_csv()?)?;
    eprintln!("wrote {} and {}", json_path.display(), csv_path.display());
    Ok(EXIT_OK)
}

fn emit_plot(cli: &Cli, path: &Path) -> Result<i32, CliError> {
    let cfg = load_config(cli)?;
    let inst = cfg.instance()?;
    let doc = load_result(&inst, path)?;
    let bundle = PlotBundle::new(&inst.arcs, &doc.problem.bounds, &doc.solve.coefficients, &inst.data);
    write_json(cli.out.as_deref().or(cfg.output.plot.as_deref()), &bundle)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse_anywhere() {
        let cli = Cli::try_parse_from(["arcfit", "solve", "--config", "a.toml", "--bound", "0.9,0.8", "--degree", "4"])
            .unwrap();
        assert_eq!(cli.bound, Some(vec![0.9, 0.8]));
        assert_eq!(cli.degree, Some(4));
        assert!(matches!(cli.command, Command::Solve));
        let cli = Cli::try_parse_from(["arcfit", "--jobs", "3", "certify", "r.json"]).unwrap();
        assert!(matches!(cli.command, Command::Certify { .. }));
        assert_eq!(cli.jobs, Some(3));
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["arcfit", "frobnicate"]), EXIT_INPUT);
        assert_eq!(run(["arcfit", "solve"]), EXIT_INPUT);
        assert_eq!(run(["arcfit", "--help"]), EXIT_OK);
    }

    #[test]
    fn report_paths_strip_known_extensions() {
        let (j, c) = report_paths(Path::new("out/sweep.json"));
        assert_eq!(j, PathBuf::from("out/sweep.json"));
        assert_eq!(c, PathBuf::from("out/sweep.csv"));
        let (j, _) = report_paths(Path::new("out/run.1"));
        assert_eq!(j, PathBuf::from("out/run.1.json"));
    }
}
