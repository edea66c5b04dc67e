//! CSV and JSON run bundles. Every float is written with 17 significant digits.

use std::fs;
use std::path::Path;

use phaseprop::{born_discrepancy, fringe_analysis, Extremum, RunMetadata, RunResult};
use serde::Serialize;

use crate::config::ConfigFile;
use crate::CliError;

pub const DATA_FILE: &str = "data.csv";
pub const FRINGE_FILE: &str = "fringes.csv";
pub const METADATA_FILE: &str = "metadata.json";
pub const CONFIG_ECHO_FILE: &str = "config.toml";
pub const SUMMARY_FILE: &str = "summary.csv";

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Serialize)]
struct GridEcho {
    x_min_m: f64,
    x_max_m: f64,
    cells: usize,
    dx_m: f64,
}

#[derive(Debug, Serialize)]
struct DiscrepancyEcho {
    linf_relative: f64,
    l2_relative: f64,
}

#[derive(Debug, Serialize)]
struct FringeEcho {
    central_value: f64,
    central_is_minimum: bool,
    central_is_maximum: bool,
    split_depth: f64,
    fringe_spacing_estimate_m: Option<f64>,
    maxima_spacing_m: Option<f64>,
    maxima: usize,
    minima: usize,
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    tool_version: &'static str,
    config: &'a ConfigFile,
    grid: GridEcho,
    node_epsilon: f64,
    born_discrepancy: DiscrepancyEcho,
    fringes: FringeEcho,
    run: &'a RunMetadata,
}

/// What the sweep summary needs from one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub split_depth: f64,
    pub central_is_minimum: bool,
    pub linf_born_discrepancy: f64,
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output(format!("{}: {e}", path.display()))
}

/// Writes data, fringe, metadata and config echo files into `dir`.
pub fn write_bundle(dir: &Path, config: &ConfigFile, result: &RunResult) -> Result<RunSummary, CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let grid = result.rho_final.grid();
    let discrepancy = born_discrepancy(&result.rho_final, &result.born_reference).map_err(CliError::Solver)?;
    let report = fringe_analysis(&result.rho_final);

    let data = dir.join(DATA_FILE);
    let mut w = csv::Writer::from_path(&data).map_err(|e| io_error(&data, e))?;
    w.write_record(["x_m", "rho", "born_reference", "velocity_at_t_final"])
        .map_err(|e| io_error(&data, e))?;
    let rows = grid
        .centers()
        .into_iter()
        .zip(result.rho_final.values())
        .zip(result.born_reference.values())
        .zip(&result.velocity);
    for (((x, rho), born), v) in rows {
        w.write_record([float(x), float(*rho), float(*born), float(*v)])
            .map_err(|e| io_error(&data, e))?;
    }
    w.flush().map_err(|e| io_error(&data, e))?;

    let fringes = dir.join(FRINGE_FILE);
    let mut extrema: Vec<(&str, &Extremum)> = report
        .maxima
        .iter()
        .map(|e| ("maximum", e))
        .chain(report.minima.iter().map(|e| ("minimum", e)))
        .collect();
    extrema.sort_by(|a, b| a.1.position.total_cmp(&b.1.position));
    let mut w = csv::Writer::from_path(&fringes).map_err(|e| io_error(&fringes, e))?;
    w.write_record(["kind", "position_m", "height"]).map_err(|e| io_error(&fringes, e))?;
    for (kind, e) in extrema {
        w.write_record([kind.to_string(), float(e.position), float(e.height)])
            .map_err(|e| io_error(&fringes, e))?;
    }
    w.flush().map_err(|e| io_error(&fringes, e))?;

    let resolved = config.resolved();
    let metadata = Metadata {
        tool_version: env!("CARGO_PKG_VERSION"),
        config: &resolved,
        grid: GridEcho {
            x_min_m: grid.x_min(),
            x_max_m: grid.x_max(),
            cells: grid.cells(),
            dx_m: grid.dx(),
        },
        node_epsilon: result.metadata.node_epsilon,
        born_discrepancy: DiscrepancyEcho {
            linf_relative: discrepancy.linf_relative,
            l2_relative: discrepancy.l2_relative,
        },
        fringes: FringeEcho {
            central_value: report.central_value,
            central_is_minimum: report.central_is_minimum,
            central_is_maximum: report.central_is_maximum,
            split_depth: report.split_depth,
            fringe_spacing_estimate_m: report.fringe_spacing_estimate,
            maxima_spacing_m: report.maxima_spacing,
            maxima: report.maxima.len(),
            minima: report.minima.len(),
        },
        run: &result.metadata,
    };
    let meta_path = dir.join(METADATA_FILE);
    let json = serde_json::to_string_pretty(&metadata).expect("metadata serializes");
    fs::write(&meta_path, json + "\n").map_err(|e| io_error(&meta_path, e))?;

    let echo = dir.join(CONFIG_ECHO_FILE);
    fs::write(&echo, resolved.to_toml()).map_err(|e| io_error(&echo, e))?;

    Ok(RunSummary {
        split_depth: report.split_depth,
        central_is_minimum: report.central_is_minimum,
        linf_born_discrepancy: discrepancy.linf_relative,
    })
}

/// One summary row per sweep value, in input order.
pub fn write_summary(path: &Path, rows: &[(f64, Result<RunSummary, String>)]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    w.write_record([
        "sigma_s_nm",
        "split_depth",
        "central_is_minimum",
        "linf_born_discrepancy",
        "status",
        "error",
    ])
    .map_err(|e| io_error(path, e))?;
    for (sigma_s_nm, row) in rows {
        let record = match row {
            Ok(s) => [
                sigma_s_nm.to_string(),
                float(s.split_depth),
                s.central_is_minimum.to_string(),
                float(s.linf_born_discrepancy),
                "ok".to_string(),
                String::new(),
            ],
            Err(msg) => [
                sigma_s_nm.to_string(),
                String::new(),
                String::new(),
                String::new(),
                "failed".to_string(),
                msg.clone(),
            ],
        };
        w.write_record(&record).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        let s = float(0.1);
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
        let third = 1.0 / 3.0;
        assert_eq!(float(third).parse::<f64>().unwrap(), third);
    }
}
