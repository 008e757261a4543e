//! Mode dispatch and artifact writing.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use tgge::bench::{
    dense_lindblad, run_trajectory_statistics, EnsembleStatistics, SectorOccupations, SpinChainConfig,
    TrajectoryControl,
};
use tgge::observables::{
    fit_gaussian_peak, fit_power_law, log_derivatives, LogDerivatives, ObservableSeries, RATIO_GUARD,
};
use tgge::{evolve, initial_rapidity, FourierGrid, IntegratorConfig, RapidityState, RateEquation};

use crate::config::{Mode, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{ensure_dir, fmt_float, read_series_csv, write_file, Cell, Table};

pub const SERIES_COLUMNS: [&str; 6] = ["kt", "n", "current_over_J", "energy_over_J", "D1", "D2"];
pub const FITS_FILE: &str = "fits.json-lines";
pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub files: Vec<String>,
    pub wall_time_s: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    program: &'static str,
    version: &'static str,
    mode: Mode,
    seed: u64,
    config: &'a RunConfig,
    /// Feeding this text back through `--config` reproduces the run.
    config_text: String,
    wall_time_s: f64,
    files: &'a [String],
}

/// Executes one run and writes its artifacts into `cfg.out`.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    let start = Instant::now();
    let dir = ensure_dir(&cfg.out)?;
    let mut files = match cfg.mode {
        Mode::Tgge => run_rapidity(cfg, &dir, RateEquation::Tgge)?,
        Mode::FreeFermion => run_rapidity(cfg, &dir, RateEquation::FreeFermion)?,
        Mode::Trajectories => run_trajectories(cfg, &dir)?,
        Mode::DenseLindblad => run_dense(cfg, &dir)?,
        Mode::Compare => run_compare(cfg, &dir)?,
        Mode::Fit => run_fit(cfg, &dir)?,
    };
    let wall_time_s = start.elapsed().as_secs_f64();
    files.push(MANIFEST_FILE.into());
    let manifest = Manifest {
        program: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        mode: cfg.mode,
        seed: cfg.seed,
        config: cfg,
        config_text: cfg.to_text(),
        wall_time_s,
        files: &files,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write_file(&dir.join(MANIFEST_FILE), &text)?;
    Ok(RunSummary {
        mode: cfg.mode,
        files,
        wall_time_s,
    })
}

fn integrator(cfg: &RunConfig, times: &[f64]) -> IntegratorConfig {
    IntegratorConfig {
        rel_tol: cfg.rel_tol,
        abs_tol: cfg.abs_tol,
        dt_init: cfg.dt_init,
        checkpoints: times.iter().map(|kt| kt / cfg.params.kappa).collect(),
        max_steps: cfg.max_steps,
    }
}

fn chain(cfg: &RunConfig, times: Vec<f64>) -> Result<SpinChainConfig> {
    let sites = cfg.sites.expect("validated for chain modes");
    let mut chain = SpinChainConfig::new(sites, cfg.params, cfg.n_traj, cfg.seed, times)?;
    chain.control = TrajectoryControl {
        rel_tol: cfg.traj_rel_tol,
        ..TrajectoryControl::default()
    };
    Ok(chain)
}

fn evolve_rapidity(cfg: &RunConfig, eq: RateEquation, times: &[f64]) -> Result<Vec<RapidityState>> {
    if times.is_empty() {
        return Ok(Vec::new());
    }
    let grid = FourierGrid::new(cfg.grid_size)?;
    let initial = initial_rapidity(cfg.params.theta, &grid)?;
    Ok(evolve(&initial, eq, &cfg.params, &integrator(cfg, times))?.states)
}

/// Series using the configured `κt` values verbatim as the time column.
fn series_from_states(cfg: &RunConfig, times: &[f64], states: &[RapidityState], tag: &str) -> Result<ObservableSeries> {
    let mut s = ObservableSeries::from_states(states, &cfg.params, tag)?;
    s.times = times.to_vec();
    Ok(s)
}

/// Log derivatives on the positive-time part of a series; `None` where not
/// defined (too few points, `κt = 0`, or `n = 0`).
fn derivatives(kt: &[f64], n: &[f64]) -> (Vec<Option<f64>>, Vec<Option<f64>>) {
    let len = kt.len();
    let first = kt.iter().position(|t| *t > 0.0).unwrap_or(len);
    let mut d1 = vec![None; len];
    let mut d2 = vec![None; len];
    if n[first..].iter().all(|v| *v > 0.0) {
        if let Ok(LogDerivatives { d1: a, d2: b, .. }) = log_derivatives(&kt[first..], &n[first..]) {
            for i in first..len {
                d1[i] = Some(a[i - first]);
                d2[i] = Some(b[i - first]);
            }
        }
    }
    (d1, d2)
}

fn series_table(s: &ObservableSeries, j: f64) -> Table {
    let (d1, d2) = derivatives(&s.times, &s.n);
    let mut t = Table::new(&SERIES_COLUMNS);
    for i in 0..s.len() {
        t.push(vec![
            s.times[i].into(),
            s.n[i].into(),
            (s.current[i] / j).into(),
            (s.energy[i] / j).into(),
            d1[i].into(),
            d2[i].into(),
        ]);
    }
    t
}

fn kt_tag(kt: f64) -> String {
    fmt_float(kt)
}

fn power_law_record(kt: &[f64], n: &[f64], window: (f64, f64)) -> Value {
    match fit_power_law(kt, n, window) {
        Ok(f) => json!({
            "fit": "power_law",
            "chi": f.chi,
            "stderr": f.stderr,
            "window": [f.window.0, f.window.1],
            "points": f.points,
        }),
        Err(e) => json!({ "fit": "power_law", "window": [window.0, window.1], "error": e.to_string() }),
    }
}

fn write_fits(dir: &Path, records: &[Value]) -> Result<String> {
    let text: String = records.iter().map(|r| r.to_string() + "\n").collect();
    write_file(&dir.join(FITS_FILE), &text)?;
    Ok(FITS_FILE.into())
}

fn run_rapidity(cfg: &RunConfig, dir: &Path, eq: RateEquation) -> Result<Vec<String>> {
    let times = cfg.times();
    let states = evolve_rapidity(cfg, eq, &times)?;
    let series = series_from_states(cfg, &times, &states, cfg.mode.name())?;
    let mut files = vec![series_table(&series, cfg.params.j).write(dir, "series", cfg.format)?];

    let mut fits = Vec::new();
    if !series.is_empty() {
        fits.push(power_law_record(&series.times, &series.n, cfg.fit_window));
    }
    let k_star = cfg.params.slow_mode();
    for &kt in &cfg.snapshots {
        let i = times
            .iter()
            .position(|t| *t == kt)
            .expect("snapshots merged into output times");
        let state = &states[i];
        let mut t = Table::new(&["k", "rho"]);
        for (m, r) in state.rho().iter().enumerate() {
            t.push(vec![state.grid().node(m).into(), (*r).into()]);
        }
        files.push(t.write(dir, &format!("rapidity_{}", kt_tag(kt)), cfg.format)?);

        let n = series.n[i];
        let ratio = (n.abs() > RATIO_GUARD).then(|| series.current[i] / (cfg.params.j * n));
        fits.push(match fit_gaussian_peak(state, k_star) {
            Ok(g) => json!({
                "fit": "gaussian_peak",
                "kt": kt,
                "amplitude": g.amplitude,
                "sigma": g.sigma,
                "center": g.center,
                "residual": g.residual,
                "points": g.points,
                "current_over_Jn": ratio,
                "gaussian_prediction": cfg.params.phi.sin() * (1.0 - 0.5 * g.sigma * g.sigma),
            }),
            Err(e) => json!({ "fit": "gaussian_peak", "kt": kt, "error": e.to_string() }),
        });
    }
    files.push(write_fits(dir, &fits)?);
    Ok(files)
}

fn stats_table(stats: &EnsembleStatistics) -> Table {
    let mut t = Table::new(&[
        "kt",
        "n",
        "n_stderr",
        "current_over_J",
        "current_stderr",
        "energy_over_J",
        "energy_stderr",
        "rho_tilde_density",
        "max_offdiag_score",
    ]);
    for c in &stats.checkpoints {
        t.push(vec![
            c.kt.into(),
            c.n.mean.into(),
            c.n.stderr.into(),
            c.current_over_j.mean.into(),
            c.current_over_j.stderr.into(),
            c.energy_over_j.mean.into(),
            c.energy_over_j.stderr.into(),
            c.occupations().density().into(),
            c.max_offdiagonal_score().into(),
        ]);
    }
    t
}

fn occupation_table(occ: &SectorOccupations, stderr: Option<(&[f64], &[f64], &[f64])>) -> Table {
    let mut t = Table::new(&["sector", "k", "rho", "stderr"]);
    let err = |which: usize, i: usize| -> Cell { stderr.map(|s| [s.0, s.1, s.2][which][i]).into() };
    for (which, (name, ks, rs)) in [
        ("ap", &occ.q_ap, &occ.rho_ap),
        ("p", &occ.q_p, &occ.rho_p),
        ("tilde", &occ.k_tilde, &occ.rho_tilde),
    ]
    .into_iter()
    .enumerate()
    {
        for i in 0..ks.len() {
            t.push(vec![name.into(), ks[i].into(), rs[i].into(), err(which, i)]);
        }
    }
    t
}

fn write_ensemble(cfg: &RunConfig, dir: &Path, stats: &EnsembleStatistics) -> Result<Vec<String>> {
    let mut files = vec![stats_table(stats).write(dir, "trajectory_stats", cfg.format)?];
    for c in &stats.checkpoints {
        let se = |v: &[tgge::bench::Estimate]| v.iter().map(|e| e.stderr).collect::<Vec<_>>();
        let (a, p, r) = (se(&c.rho_ap), se(&c.rho_p), se(&c.rho_tilde));
        let t = occupation_table(&c.occupations(), Some((&a, &p, &r)));
        files.push(t.write(dir, &format!("occupations_{}", kt_tag(c.kt)), cfg.format)?);
    }
    Ok(files)
}

fn ensemble_series(stats: &EnsembleStatistics, j: f64) -> Result<ObservableSeries> {
    let c = &stats.checkpoints;
    Ok(ObservableSeries::new(
        c.iter().map(|c| c.kt).collect(),
        c.iter().map(|c| c.n.mean).collect(),
        c.iter().map(|c| c.current_over_j.mean * j).collect(),
        c.iter().map(|c| c.energy_over_j.mean * j).collect(),
        "trajectories",
    )?)
}

fn run_trajectories(cfg: &RunConfig, dir: &Path) -> Result<Vec<String>> {
    let stats = run_trajectory_statistics(&chain(cfg, cfg.times())?)?;
    let series = ensemble_series(&stats, cfg.params.j)?;
    let mut files = vec![series_table(&series, cfg.params.j).write(dir, "series", cfg.format)?];
    files.extend(write_ensemble(cfg, dir, &stats)?);
    Ok(files)
}

fn run_dense(cfg: &RunConfig, dir: &Path) -> Result<Vec<String>> {
    let times = cfg.times();
    let run = dense_lindblad(&chain(cfg, times.clone())?)?;
    let mut series = run.series.clone();
    series.times = times.clone();
    let mut files = vec![series_table(&series, cfg.params.j).write(dir, "series", cfg.format)?];
    let mut diag = Table::new(&["kt", "trace", "purity"]);
    for (i, kt) in times.iter().enumerate() {
        diag.push(vec![(*kt).into(), run.trace[i].into(), run.purity[i].into()]);
        let occ = run.correlations(i).momentum_matrices().occupations();
        files.push(occupation_table(&occ, None).write(dir, &format!("occupations_{}", kt_tag(*kt)), cfg.format)?);
    }
    files.push(diag.write(dir, "lindblad_diagnostics", cfg.format)?);
    Ok(files)
}

fn run_compare(cfg: &RunConfig, dir: &Path) -> Result<Vec<String>> {
    let times = cfg.times();
    let states = evolve_rapidity(cfg, RateEquation::Tgge, &times)?;
    let series = series_from_states(cfg, &times, &states, "tgge")?;
    let stats = run_trajectory_statistics(&chain(cfg, times.clone())?)?;

    let mut files = vec![series_table(&series, cfg.params.j).write(dir, "series", cfg.format)?];
    files.extend(write_ensemble(cfg, dir, &stats)?);
    let mut delta = Table::new(&["kt", "max_abs_delta", "k_at_max", "n_tgge", "n_traj", "n_traj_stderr"]);
    for (i, c) in stats.checkpoints.iter().enumerate() {
        let occ = c.occupations();
        let (d, at) = occ.max_deviation(&states[i]);
        delta.push(vec![
            c.kt.into(),
            d.into(),
            occ.k_tilde[at].into(),
            series.n[i].into(),
            c.n.mean.into(),
            c.n.stderr.into(),
        ]);
    }
    files.push(delta.write(dir, "delta", cfg.format)?);
    Ok(files)
}

fn run_fit(cfg: &RunConfig, dir: &Path) -> Result<Vec<String>> {
    let input = cfg.input.as_deref().expect("validated for fit mode");
    let (kt, n) = read_series_csv(input)?;
    if kt.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CliError::Input {
            path: input.to_path_buf(),
            message: "kt column must be strictly increasing".into(),
        });
    }
    let (d1, d2) = derivatives(&kt, &n);
    let mut t = Table::new(&["kt", "n", "D1", "D2"]);
    for i in 0..kt.len() {
        t.push(vec![kt[i].into(), n[i].into(), d1[i].into(), d2[i].into()]);
    }
    let files = vec![
        t.write(dir, "derivatives", cfg.format)?,
        write_fits(dir, &[power_law_record(&kt, &n, cfg.fit_window)])?,
    ];
    Ok(files)
}
