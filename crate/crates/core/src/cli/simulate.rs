//! Scenario runs written to disk.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use super::config::Scenario;
use crate::error::{Error, Result};
use crate::sim::{run_im_scenario, run_wrsm_scenario, summarize, RunSummary, SimTrace};

/// Runs the scenario and returns the decimated trace with its summary. The
/// summary is computed from the decimated rows only.
pub fn simulate(scenario: &Scenario, decimate: usize) -> Result<(SimTrace, RunSummary)> {
    let start = Instant::now();
    let (full, checks) = match scenario {
        Scenario::Wrsm(sc) => (run_wrsm_scenario(sc)?, sc.checks()),
        Scenario::Im(sc) => (run_im_scenario(sc)?, sc.checks()),
    };
    let trace = full.decimated(decimate);
    let mut summary = summarize(&trace, &checks);
    summary.wall_clock_s = start.elapsed().as_secs_f64();
    Ok((trace, summary))
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io(format!("cannot write {}: {e}", path.display()))
}

/// Writes `trace.csv`, `summary.json` and optionally `plot.gp` into `dir`.
pub fn write_outputs(dir: &Path, trace: &SimTrace, summary: &RunSummary, plot: bool) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    trace.save_csv(&dir.join("trace.csv"), 1)?;
    let json = serde_json::to_string_pretty(summary).expect("summary serializes");
    let path = dir.join("summary.json");
    std::fs::write(&path, json + "\n").map_err(io(&path))?;
    if plot {
        let path = dir.join("plot.gp");
        std::fs::write(&path, plot_script(trace, &summary.machine)).map_err(io(&path))?;
    }
    Ok(())
}

fn plot_line(out: &mut String, columns: &[&str]) {
    let parts: Vec<String> =
        columns.iter().map(|c| format!("'trace.csv' using \"t\":\"{c}\" with lines title \"{c}\"")).collect();
    let _ = writeln!(out, "plot {}", parts.join(", \\\n     "));
}

/// Gnuplot script drawing the main channels of `trace.csv` into `plot.png`.
pub fn plot_script(trace: &SimTrace, machine: &str) -> String {
    let has = |c: &str| trace.index(c).is_some();
    let with_suffix =
        |s: &str| -> Vec<&str> { trace.columns.iter().filter(|c| c.ends_with(s)).map(String::as_str).collect() };
    let mut panels: Vec<(&str, Vec<&str>)> = Vec::new();
    if machine == "wrsm" {
        panels.push(("rotor angle error (rad)", with_suffix("_theta_err")));
        panels.push(("speed (rad/s)", vec!["omega", "omega_o"]));
        panels.push(("margin rms (rad/s)", vec!["margin_rms", "violated"]));
    } else {
        panels.push(("relative flux error", with_suffix("_flux_err")));
        panels.push(("speed (rad/s)", vec!["omega_e", "omega_s"]));
        panels.push(("condition (rad/s)", vec!["im_condition", "violated"]));
    }
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str("set terminal pngcairo size 1000,900\n");
    s.push_str("set output 'plot.png'\n");
    s.push_str("set xlabel 't (s)'\nset grid\n");
    let _ = writeln!(s, "set multiplot layout {},1", panels.len());
    for (label, cols) in panels {
        let cols: Vec<&str> = cols.into_iter().filter(|c| has(c)).collect();
        if cols.is_empty() {
            continue;
        }
        let _ = writeln!(s, "set ylabel '{label}'");
        plot_line(&mut s, &cols);
    }
    s.push_str("unset multiplot\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_references_existing_columns() {
        let trace =
            SimTrace::new(["t", "omega_e", "a_flux_err", "im_condition"].iter().map(|s| s.to_string()).collect());
        let s = plot_script(&trace, "im");
        assert!(s.contains("\"a_flux_err\""));
        assert!(s.contains("\"im_condition\""));
        assert!(!s.contains("\"violated\""));
    }
}
