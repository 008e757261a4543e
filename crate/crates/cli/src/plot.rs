//! gnuplot script generation from the CSV artifacts of a run directory.

use std::fs;
use std::path::Path;

use crate::error::{CliError, Result};
use crate::output::write_file;

pub const PLOT_FILE: &str = "plot.gp";

fn csv_files(dir: &Path, prefix: &str) -> Result<Vec<String>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut names: Vec<(f64, String)> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter_map(|name| {
            let kt = name.strip_prefix(prefix)?.strip_suffix(".csv")?.parse::<f64>().ok()?;
            Some((kt, name))
        })
        .collect();
    names.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(names.into_iter().map(|(_, n)| n).collect())
}

/// Builds the plotting script for `dir`. Requires `series.csv`; every other
/// panel is emitted only when its files exist.
pub fn plot_script(dir: &Path) -> Result<String> {
    let mut missing = Vec::new();
    if !dir.is_dir() {
        missing.push(dir.display().to_string());
    } else if !dir.join("series.csv").is_file() {
        missing.push(dir.join("series.csv").display().to_string());
    }
    if !missing.is_empty() {
        return Err(CliError::MissingArtifacts(missing));
    }
    let snapshots = csv_files(dir, "rapidity_")?;

    let mut s = String::from(
        "# Run with: gnuplot plot.gp (from the run directory)\n\
         set datafile separator ','\n\
         set key autotitle columnhead\n\
         set terminal pngcairo size 1400,1000\n\
         set output 'figures.png'\n\
         set multiplot layout 2,2\n\n",
    );
    s.push_str(
        "set title 'density'\nset logscale xy\nset xlabel 'kappa t'\nset ylabel 'n'\n\
         plot 'series.csv' using 1:2 with linespoints title 'n'\n\n",
    );
    s.push_str(
        "set title 'logarithmic derivatives'\nset logscale x\nunset logscale y\nset ylabel 'D'\n\
         plot 'series.csv' using 1:5 with lines title 'D1', \\\n     '' using 1:6 with lines title 'D2'\n\n",
    );
    s.push_str(
        "set title 'ratios'\nset ylabel 'ratio'\n\
         plot 'series.csv' using 1:($3/$2) with lines title 'current/(J n)', \\\n     \
         '' using 1:($4/$2) with lines title 'energy/(J n)'\n\n",
    );
    if snapshots.is_empty() {
        s.push_str(
            "set title 'current'\nset ylabel 'current/J'\n\
             plot 'series.csv' using 1:3 with lines title 'current/J'\n",
        );
    } else {
        s.push_str("set title 'rapidity distribution'\nunset logscale\nset xlabel 'k'\nset ylabel 'rho(k)'\nset xrange [0:2*pi]\nplot ");
        let curves: Vec<String> = snapshots
            .iter()
            .map(|f| {
                let label = f.trim_start_matches("rapidity_").trim_end_matches(".csv");
                format!("'{f}' using 1:2 with lines title 'kappa t = {label}'")
            })
            .collect();
        s.push_str(&curves.join(", \\\n     "));
        s.push('\n');
    }
    s.push_str("\nunset multiplot\n");
    Ok(s)
}

/// Writes `plot.gp` into the run directory and returns its text.
pub fn emit_plot_script(dir: &Path) -> Result<String> {
    let text = plot_script(dir)?;
    write_file(&dir.join(PLOT_FILE), &text)?;
    Ok(text)
}
