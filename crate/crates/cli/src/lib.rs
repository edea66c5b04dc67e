//! Subcommands behind the `phaseprop` binary.

pub mod config;
pub mod output;

use std::fmt;
use std::num::NonZeroUsize;
use std::path::Path;

use phaseprop::verify::{self, Check, Level};
use phaseprop::{run_double_slit, sweep_sigma_s, Execution};

use config::{parse_config, ConfigFile};
use output::{write_bundle, write_summary, RunSummary, SUMMARY_FILE};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Solver(phaseprop::Error),
    Output(String),
    /// Number of failed checks.
    Verification(usize),
}

impl CliError {
    /// 2 for bad input, 3 for failed runs, 4 for failed checks.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Output(_) => 2,
            CliError::Solver(e) if e.is_config() => 2,
            CliError::Solver(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Solver(e) if e.is_config() => write!(f, "configuration error: {e}"),
            CliError::Solver(e) => write!(f, "run failed: {e}"),
            CliError::Output(m) => write!(f, "cannot write output: {m}"),
            CliError::Verification(n) => write!(f, "{n} verification check(s) failed"),
        }
    }
}

impl std::error::Error for CliError {}

pub fn simulate(config: Option<&Path>, out: &Path) -> Result<RunSummary, CliError> {
    let file = parse_config(config)?;
    let experiment = file.to_experiment()?;
    log::info!("simulating into {}", out.display());
    let result = run_double_slit(&experiment).map_err(CliError::Solver)?;
    write_bundle(out, &file, &result)
}

/// Directory of the `index`-th sweep run.
pub fn sweep_dir(out: &Path, index: usize, sigma_s_nm: f64) -> std::path::PathBuf {
    out.join(format!("run{index:03}_sigma_s_{sigma_s_nm}nm"))
}

/// Per-value outcome of a sweep: sigma_S in nm and the run summary or error text.
pub type SweepRows = Vec<(f64, Result<RunSummary, String>)>;

/// Runs one bundle per value plus `summary.csv`. Fails after writing the
/// summary if any run failed.
pub fn sweep(
    config: Option<&Path>,
    sigma_s_nm: &[f64],
    out: &Path,
    jobs: Option<NonZeroUsize>,
) -> Result<SweepRows, CliError> {
    if sigma_s_nm.is_empty() {
        return Err(CliError::Config("--sigma-s-nm needs at least one value".into()));
    }
    let file = parse_config(config)?;
    let base = file.to_experiment()?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Output(format!("{}: {e}", out.display())))?;
    let values: Vec<f64> = sigma_s_nm.iter().map(|v| config::shift_decimal(*v, -9)).collect();
    let results = with_jobs(jobs, || sweep_sigma_s(&base, &values))?.map_err(CliError::Solver)?;

    let mut rows = Vec::with_capacity(results.len());
    let mut worst: Option<CliError> = None;
    for (i, (nm, result)) in sigma_s_nm.iter().zip(results).enumerate() {
        let echo = ConfigFile {
            sigma_s_nm: Some(*nm),
            ..file.clone()
        };
        let row = match result {
            Ok(r) => write_bundle(&sweep_dir(out, i, *nm), &echo, &r),
            Err(e) => Err(CliError::Solver(e)),
        };
        let row = match row {
            Ok(s) => Ok(s),
            Err(e) => {
                log::error!("sigma_s = {nm} nm: {e}");
                let msg = e.to_string();
                if worst.as_ref().is_none_or(|w| e.exit_code() > w.exit_code()) {
                    worst = Some(e);
                }
                Err(msg)
            }
        };
        rows.push((*nm, row));
    }
    write_summary(&out.join(SUMMARY_FILE), &rows)?;
    match worst {
        Some(e) => Err(e),
        None => Ok(rows),
    }
}

#[cfg(feature = "parallel")]
fn with_jobs<T: Send>(jobs: Option<NonZeroUsize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.get())
                .build()
                .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn with_jobs<T: Send>(jobs: Option<NonZeroUsize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    if jobs.is_some() {
        log::warn!("built without the parallel feature; --jobs is ignored");
    }
    Ok(f())
}

pub fn verify(level: Level) -> Vec<Check> {
    verify::run_checks(level, Execution::Parallel)
}

/// Fixed-width pass/fail table.
pub fn render_checks(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0).max("check".len());
    let mut s = format!("{:<width$}  result  detail\n", "check");
    for c in checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        s.push_str(&format!("{:<width$}  {verdict:<6}  {}\n", c.name, c.detail));
    }
    s
}
