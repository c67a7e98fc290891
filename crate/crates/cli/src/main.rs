//! `nmflux` command-line front end.

mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{error::ErrorKind, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use nmflux::dynamics::{amplitudes_exact, flux_from_amplitudes};
use nmflux::mcwf::{analytic_flux_at, flux_residual_stats, simulate_record, DEFAULT_BIN_WIDTH};
use nmflux::measure::{markovian_boundary, nm_measure, GroundTruth, DEFAULT_EPS_N, DEFAULT_TOL_V};
use nmflux::params::{DEFAULT_DT, DEFAULT_T_MAX};
use nmflux::spectrum::{
    classify, detrend, dft_windowed, dominant_peak, threshold_frequency, ClassifyConfig, RegionVerdict, Window,
    DEFAULT_MIN_PROMINENCE,
};
use nmflux::sweep::{
    fig3_threshold, figure_datasets, resolve_workers, run_and_write, with_workers, FigureOptions, GridSpec, SweepConfig,
    FIG3_DEFAULT_POINTS,
};
use nmflux::{ModelParams, TimeGrid};
use serde::Serialize;

use config::{CliConfig, UsageError};

/// Photon-flux monitoring of a two-level atom coupled to a damped pseudomode.
///
/// Rates and frequencies are in units of gamma and times in units of
/// 1/gamma. `--gamma` only rescales the written outputs.
#[derive(Debug, Parser)]
#[command(name = "nmflux", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Atomic population and photon flux on a time grid.
    Dynamics(DynamicsArgs),
    /// Monte Carlo photon counting and binned flux estimate.
    Mcwf(McwfArgs),
    /// Non-Markovianity measure of the atom.
    Measure(MeasureArgs),
    /// Markovian boundary V_c(delta) by bisection.
    Boundary(BoundaryArgs),
    /// Power spectrum of the detrended photon flux.
    Spectrum(SpectrumArgs),
    /// Spectral non-Markovianity verdict as JSON.
    Classify(ClassifyArgs),
    /// Parameter-grid sweep described by a JSON file.
    Sweep(SweepArgs),
    /// Datasets for figure 1, 2, 3 or 4.
    Figures(FiguresArgs),
}

#[derive(Debug, Args)]
struct Physics {
    /// Atom-pseudomode coupling V.
    #[arg(long, allow_negative_numbers = true)]
    v: Option<f64>,
    /// Atom-pseudomode detuning delta.
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    /// Pseudomode decay rate used to rescale outputs [default: 1].
    #[arg(long)]
    gamma: Option<f64>,
    /// Monitoring time T [default: 14].
    #[arg(long)]
    t_max: Option<f64>,
    /// Sampling step [default: 0.001].
    #[arg(long)]
    dt: Option<f64>,
    /// JSON file with any of the options; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DynamicsArgs {
    #[command(flatten)]
    physics: Physics,
    /// Output directory [default: out/dynamics].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct McwfArgs {
    #[command(flatten)]
    physics: Physics,
    /// Number of trajectories [default: 100000].
    #[arg(long)]
    n_traj: Option<u64>,
    /// Master seed [default: 0, with a warning].
    #[arg(long)]
    seed: Option<u64>,
    /// Bin width of the flux estimate [default: 0.1].
    #[arg(long)]
    bin: Option<f64>,
    /// Worker threads (NM_WORKERS overrides).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory [default: out/mcwf].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MeasureArgs {
    #[command(flatten)]
    physics: Physics,
    /// Evaluate over the long ground-truth horizon instead of [0, T].
    #[arg(long)]
    ground_truth: bool,
}

#[derive(Debug, Args)]
struct BoundaryArgs {
    /// Pseudomode decay rate used to rescale outputs [default: 1].
    #[arg(long)]
    gamma: Option<f64>,
    /// Smallest detuning [default: 0].
    #[arg(long, allow_negative_numbers = true)]
    delta_min: Option<f64>,
    /// Largest detuning [default: 2].
    #[arg(long, allow_negative_numbers = true)]
    delta_max: Option<f64>,
    /// Number of detunings [default: 21].
    #[arg(long)]
    delta_count: Option<usize>,
    /// Lower end of the coupling search interval [default: 0.05].
    #[arg(long)]
    v_min: Option<f64>,
    /// Upper end of the coupling search interval [default: 1.2].
    #[arg(long)]
    v_max: Option<f64>,
    /// Bisection tolerance on V [default: 0.001].
    #[arg(long)]
    tol_v: Option<f64>,
    /// JSON file with any of the options; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: out/boundary].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WindowArg {
    None,
    Hann,
}

impl From<WindowArg> for Window {
    fn from(w: WindowArg) -> Self {
        match w {
            WindowArg::None => Window::None,
            WindowArg::Hann => Window::Hann,
        }
    }
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    #[command(flatten)]
    physics: Physics,
    /// Window applied before the transform [default: none].
    #[arg(long, value_enum)]
    window: Option<WindowArg>,
    /// Output directory [default: out/spectrum].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[command(flatten)]
    physics: Physics,
    /// Threshold frequency Omega_M.
    #[arg(long, conflicts_with = "auto_threshold")]
    omega_threshold: Option<f64>,
    /// Compute Omega_M on the default domain V in [0.05, 1.2], delta in [0, 2].
    #[arg(long)]
    auto_threshold: bool,
    /// Points per axis for --auto-threshold [default: 200].
    #[arg(long)]
    grid_points: Option<usize>,
    /// Minimum share of the spectral power in the peak bin [default: 0.05].
    #[arg(long)]
    min_prominence: Option<f64>,
    /// Window applied before the transform [default: none].
    #[arg(long, value_enum)]
    window: Option<WindowArg>,
    /// Resolve inconclusive verdicts with the exact measure.
    #[arg(long)]
    ground_truth: bool,
    /// Exit with status 1 when the flux carries no signal.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Sweep configuration (JSON).
    config: PathBuf,
    /// Output directory, overriding `out_dir` of the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, overriding the configuration (NM_WORKERS wins).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct FiguresArgs {
    /// Figure number (1-4).
    id: u32,
    /// Output directory; files go to <OUT>/fig<ID> [default: figures].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Points per axis of the threshold grid [default: 200].
    #[arg(long)]
    grid_points: Option<usize>,
    /// Threshold for figure 4 instead of computing it.
    #[arg(long)]
    omega_threshold: Option<f64>,
    /// Worker threads (NM_WORKERS overrides).
    #[arg(long)]
    workers: Option<usize>,
}

/// `println!` that stops quietly when stdout is closed.
macro_rules! emit {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

/// Parameters after merging flags, config file and defaults.
struct Resolved {
    params: ModelParams,
    gamma: f64,
    dt: f64,
}

fn missing(sub: &str, field: &str) -> ! {
    let mut cmd = Cli::command();
    cmd.build();
    let sub = cmd.find_subcommand_mut(sub).expect("known subcommand");
    sub.error(
        ErrorKind::MissingRequiredArgument,
        format!("missing required parameter `{field}` (pass --{field} or set it in --config)"),
    )
    .exit()
}

fn resolve(sub: &str, p: &Physics, cfg: &CliConfig) -> anyhow::Result<Resolved> {
    let gamma = p.gamma.or(cfg.gamma).unwrap_or(1.0);
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(nmflux::Error::InvalidParameter {
            field: "gamma",
            reason: format!("must be finite and > 0, got {gamma}"),
        }
        .into());
    }
    let Some(v) = p.v.or(cfg.v) else { missing(sub, "v") };
    let delta = p.delta.or(cfg.delta).unwrap_or(0.0);
    let t_max = p.t_max.or(cfg.t_max).unwrap_or(DEFAULT_T_MAX);
    let dt = p.dt.or(cfg.dt).unwrap_or(DEFAULT_DT);
    let params = ModelParams::new(1.0, v, delta, t_max)?;
    TimeGrid::new(t_max, dt)?;
    Ok(Resolved { params, gamma, dt })
}

fn out_dir(flag: &Option<PathBuf>, cfg: &CliConfig, default: &str) -> PathBuf {
    flag.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from(default))
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    emit!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn cmd_dynamics(a: &DynamicsArgs) -> anyhow::Result<ExitCode> {
    let cfg = CliConfig::load(a.physics.config.as_deref())?;
    let r = resolve("dynamics", &a.physics, &cfg)?;
    let out = out_dir(&a.out, &cfg, "out/dynamics");
    let grid = TimeGrid::new(r.params.t_max, r.dt)?;
    let series = amplitudes_exact(&r.params, grid);
    series.write_population_csv(&out.join("population.csv"), 1.0 / r.gamma)?;
    flux_from_amplitudes(&series).write_csv_scaled(&out.join("flux.csv"), r.gamma)?;
    let nm = nm_measure(&r.params, grid)?;
    let kind = if nm.n_value > DEFAULT_EPS_N { "non-Markovian" } else { "Markovian" };
    emit!(
        "N = {:.6e} over T = {} ({kind}); wrote {}",
        nm.n_value,
        r.params.t_max / r.gamma,
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_mcwf(a: &McwfArgs) -> anyhow::Result<ExitCode> {
    let cfg = CliConfig::load(a.physics.config.as_deref())?;
    let r = resolve("mcwf", &a.physics, &cfg)?;
    let out = out_dir(&a.out, &cfg, "out/mcwf");
    let n_traj = a.n_traj.or(cfg.n_traj).unwrap_or(100_000);
    if n_traj == 0 {
        return Err(UsageError("--n-traj must be >= 1".into()).into());
    }
    let bin = a.bin.or(cfg.bin).unwrap_or(DEFAULT_BIN_WIDTH);
    let seed = match a.seed.or(cfg.seed) {
        Some(s) => s,
        None => {
            log::warn!("no --seed given, using 0");
            0
        }
    };
    let record = with_workers(resolve_workers(a.workers)?, || simulate_record(&r.params, n_traj, seed))??;
    let estimate = record.binned_flux(bin)?;
    record.write_csv_scaled(&out.join("jumps.csv"), r.gamma)?;
    estimate.write_csv_scaled(&out.join("flux_estimate.csv"), r.gamma)?;
    record.write_manifest(&out.join("manifest.json"), bin)?;
    let analytic = analytic_flux_at(&r.params, &estimate.times);
    let stats = flux_residual_stats(&estimate, &analytic, 3.0)?;
    emit!(
        "{} jumps in {} trajectories; {} bins: rms {:.3e}, max |z| {:.2}, within 3 sigma {:.1}%",
        record.jump_count(),
        n_traj,
        stats.n_bins,
        stats.rms * r.gamma,
        stats.max_abs_z.unwrap_or(f64::NAN),
        100.0 * stats.fraction_within.unwrap_or(f64::NAN)
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct MeasureReport {
    n_value: f64,
    nonmarkovian: bool,
    horizon: f64,
    revival_intervals: Vec<(f64, f64)>,
}

fn cmd_measure(a: &MeasureArgs) -> anyhow::Result<ExitCode> {
    let cfg = CliConfig::load(a.physics.config.as_deref())?;
    let r = resolve("measure", &a.physics, &cfg)?;
    let (nm, eps) = if a.ground_truth {
        let truth = GroundTruth::default();
        (truth.measure(&r.params)?, truth.eps_n)
    } else {
        (nm_measure(&r.params, TimeGrid::new(r.params.t_max, r.dt)?)?, DEFAULT_EPS_N)
    };
    print_json(&MeasureReport {
        n_value: nm.n_value,
        nonmarkovian: nm.n_value > eps,
        horizon: nm.grid.t_max / r.gamma,
        revival_intervals: nm
            .revival_intervals
            .iter()
            .map(|&(s, e)| (s / r.gamma, e / r.gamma))
            .collect(),
    })?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_boundary(a: &BoundaryArgs) -> anyhow::Result<ExitCode> {
    let cfg = CliConfig::load(a.config.as_deref())?;
    let gamma = a.gamma.or(cfg.gamma).unwrap_or(1.0);
    let base = ModelParams::new(1.0, 0.0, 0.0, DEFAULT_T_MAX)?;
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(UsageError(format!("invalid parameter `gamma`: must be > 0, got {gamma}")).into());
    }
    let deltas = GridSpec::new(
        a.delta_min.or(cfg.delta_min).unwrap_or(0.0),
        a.delta_max.or(cfg.delta_max).unwrap_or(2.0),
        a.delta_count.or(cfg.delta_count).unwrap_or(21),
    );
    deltas.validate("delta_count")?;
    let v_search = (
        a.v_min.or(cfg.v_min).unwrap_or(0.05),
        a.v_max.or(cfg.v_max).unwrap_or(1.2),
    );
    let tol_v = a.tol_v.or(cfg.tol_v).unwrap_or(DEFAULT_TOL_V);
    let out = out_dir(&a.out, &cfg, "out/boundary");
    let mut curve = markovian_boundary(&base, &deltas.values(), v_search, tol_v, &GroundTruth::default())?;
    let threshold = threshold_frequency(&curve).ok();
    for p in &mut curve.points {
        p.delta *= gamma;
        p.v_c *= gamma;
        p.v_markov *= gamma;
    }
    curve.write_csv(&out.join("boundary.csv"))?;
    #[derive(Serialize)]
    struct Report {
        omega_m: Option<f64>,
        bracketed: usize,
        unbracketed: Vec<f64>,
    }
    print_json(&Report {
        omega_m: threshold.map(|t| t.omega_m * gamma),
        bracketed: curve.points.len(),
        unbracketed: curve.unbracketed.iter().map(|u| u.delta * gamma).collect(),
    })?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_spectrum(a: &SpectrumArgs) -> anyhow::Result<ExitCode> {
    let cfg = CliConfig::load(a.physics.config.as_deref())?;
    let r = resolve("spectrum", &a.physics, &cfg)?;
    let window = a.window.map(Window::from).or(cfg.window).unwrap_or_default();
    let out = out_dir(&a.out, &cfg, "out/spectrum");
    let flux = flux_from_amplitudes(&amplitudes_exact(&r.params, TimeGrid::new(r.params.t_max, r.dt)?));
    let spectrum = dft_windowed(&detrend(&flux), flux.dt(), window)?;
    spectrum.write_csv(&out.join("spectrum.csv"), r.gamma)?;
    match dominant_peak(&spectrum) {
        Ok(peak) => print_json(&serde_json::json!({
            "omega_peak": peak.omega * r.gamma,
            "prominence": peak.prominence,
            "line": peak.line,
            "bin_width": spectrum.bin_width() * r.gamma,
        }))?,
        Err(nmflux::Error::NoSignal { .. }) => print_json(&serde_json::json!({ "note": "no signal: zero flux" }))?,
        Err(e) => return Err(e.into()),
    }
    Ok(ExitCode::SUCCESS)
}

fn scale_verdict(mut v: RegionVerdict, gamma: f64) -> RegionVerdict {
    v.omega_peak = v.omega_peak.map(|w| w * gamma);
    v.omega_threshold *= gamma;
    v.params.gamma = gamma;
    v.params.v *= gamma;
    v.params.delta *= gamma;
    v.params.t_max /= gamma;
    v
}

fn cmd_classify(a: &ClassifyArgs) -> anyhow::Result<ExitCode> {
    let cfg = CliConfig::load(a.physics.config.as_deref())?;
    let r = resolve("classify", &a.physics, &cfg)?;
    let omega_m = match (a.omega_threshold, a.auto_threshold) {
        (Some(w), _) => w,
        (None, true) => {
            let n = a.grid_points.or(cfg.grid_points).unwrap_or(FIG3_DEFAULT_POINTS);
            fig3_threshold(n)?.3.omega_m
        }
        (None, false) => match cfg.omega_threshold {
            Some(w) => w,
            None => missing("classify", "omega-threshold"),
        },
    };
    let cc = ClassifyConfig {
        min_prominence: a.min_prominence.or(cfg.min_prominence).unwrap_or(DEFAULT_MIN_PROMINENCE),
        dt: r.dt,
        window: a.window.map(Window::from).or(cfg.window).unwrap_or_default(),
        ground_truth: a.ground_truth.then(GroundTruth::default),
    };
    let verdict = classify(&r.params, omega_m, &cc)?;
    let no_signal = verdict.omega_peak.is_none();
    print_json(&scale_verdict(verdict, r.gamma))?;
    if no_signal && a.strict {
        eprintln!("error: no signal in the photon flux");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(a: &SweepArgs) -> anyhow::Result<ExitCode> {
    let mut cfg = SweepConfig::from_json_file(&a.config).map_err(|e| match e {
        nmflux::Error::Json(j) => UsageError(format!("config {}: {j}", a.config.display())).into(),
        e => anyhow::Error::from(e),
    })?;
    if let Some(out) = &a.out {
        cfg.out_dir = out.clone();
    }
    if a.workers.is_some() {
        cfg.workers = a.workers;
    }
    let map = run_and_write(&cfg)?;
    let failed = map.manifest.failures.len();
    emit!(
        "{} cells, {} failed, omega threshold {}; wrote {}",
        map.cells.len(),
        failed,
        map.manifest
            .omega_threshold
            .map_or_else(|| "none".to_string(), |w| format!("{w:.4}")),
        cfg.out_dir.display()
    );
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_figures(a: &FiguresArgs) -> anyhow::Result<ExitCode> {
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("figures"));
    let opts = FigureOptions {
        grid_points: a.grid_points.unwrap_or(FIG3_DEFAULT_POINTS),
        omega_threshold: a.omega_threshold,
        workers: a.workers,
    };
    let files = figure_datasets(a.id, &out, &opts)?;
    for f in &files {
        emit!("{}", f.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_status(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<nmflux::Error>() {
        Some(
            nmflux::Error::InvalidParameter { .. }
            | nmflux::Error::InvalidBinning(_)
            | nmflux::Error::UnknownFigure(_)
            | nmflux::Error::UnsupportedInitialState { .. }
            | nmflux::Error::Json(_),
        ) => 2,
        _ => 1,
    }
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    match &cli.command {
        Command::Dynamics(a) => cmd_dynamics(a),
        Command::Mcwf(a) => cmd_mcwf(a),
        Command::Measure(a) => cmd_measure(a),
        Command::Boundary(a) => cmd_boundary(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Figures(a) => cmd_figures(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(exit_status(&e))
        }
    }
}
