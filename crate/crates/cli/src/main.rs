use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde::Serialize;

use rescoup::baseline::{acquire_grid, fit_grid, Acquisition, GridData, GridSpec};
use rescoup::config::Config;
use rescoup::format::sci;
use rescoup::physics::{excitation_probability_damped, ControlSetting, SystemParams};
use rescoup::rng::stream_rng;
use rescoup::sim::{relative_errors, run_ensemble, sweep, with_threads, write_sweep_csv, SimulatedExperiment};
use rescoup::{run_estimation, Error};

const EXIT_CONFIG: u8 = 3;
const EXIT_IO: u8 = 4;
const EXIT_RUNTIME: u8 = 5;

/// Stream of the master seed used for a randomly drawn truth.
const TRUTH_STREAM: u64 = 2;
/// Stream used for sampled baseline grids.
const GRID_STREAM: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Run,
    Ensemble,
    Sweep,
    Baseline,
    Spectrum,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Run => "run",
            Mode::Ensemble => "ensemble",
            Mode::Sweep => "sweep",
            Mode::Baseline => "baseline",
            Mode::Spectrum => "spectrum",
        }
    }
}

/// Adaptive estimation of qubit-resonator coupling and resonator frequency.
#[derive(Debug, Parser)]
#[command(name = "rescoup", version)]
struct Cli {
    /// Execution mode.
    #[arg(value_enum, required_unless_present = "mode_flag", conflicts_with = "mode_flag")]
    mode: Option<Mode>,
    #[arg(long = "mode", value_enum, id = "mode_flag")]
    mode_flag: Option<Mode>,
    /// Key/value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    n_runs: Option<usize>,
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long)]
    particles: Option<usize>,
    /// Worker threads; 0 lets the runtime decide.
    #[arg(long)]
    threads: Option<usize>,
    /// Also write the final particle cloud (run mode).
    #[arg(long)]
    dump_posterior: bool,
    /// 10 000 runs and 50 000 particles.
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Io(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Io(_) => EXIT_IO,
            Failure::Runtime(_) => EXIT_RUNTIME,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Io(m) | Failure::Runtime(m) => m,
        }
    }
}

fn config_err(e: Error) -> Failure {
    Failure::Config(e.to_string())
}

fn runtime_err(e: Error) -> Failure {
    match e {
        Error::Io(m) => Failure::Io(m),
        Error::InvalidParameter { .. } | Error::Config { .. } => Failure::Config(e.to_string()),
        other => Failure::Runtime(other.to_string()),
    }
}

fn resolve(cli: &Cli) -> Result<Config, Failure> {
    let mut config = Config::default();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        config
            .apply_text(&text)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    }
    if cli.paper_scale {
        config.n_runs = 10_000;
        config.particles = 50_000;
    }
    for item in &cli.set {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("--set expects KEY=VALUE, got `{item}`")))?;
        config.set(key.trim(), value).map_err(config_err)?;
    }
    if let Some(v) = cli.seed {
        config.seed = v;
    }
    if let Some(v) = cli.n_runs {
        config.n_runs = v;
    }
    if let Some(v) = cli.shots {
        config.shots = v;
    }
    if let Some(v) = cli.particles {
        config.particles = v;
    }
    if let Some(v) = cli.threads {
        config.threads = v;
    }
    Ok(config)
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn new(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn file(&self, name: &str) -> Result<BufWriter<File>, Failure> {
        let path = self.dir.join(name);
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
    }

    fn text(&self, name: &str, text: &str) -> Result<(), Failure> {
        let mut f = self.file(name)?;
        f.write_all(text.as_bytes())
            .and_then(|_| f.flush())
            .map_err(|e| Failure::Io(format!("{name}: {e}")))
    }

    fn json(&self, name: &str, value: &impl Serialize) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
        text.push('\n');
        self.text(name, &text)
    }

    fn with<F>(&self, name: &str, write: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut BufWriter<File>) -> rescoup::Result<()>,
    {
        let mut f = self.file(name)?;
        write(&mut f).map_err(runtime_err)?;
        f.flush().map_err(|e| Failure::Io(format!("{name}: {e}")))
    }
}

#[derive(Serialize)]
struct Provenance<'a> {
    mode: &'static str,
    config: &'a Config,
}

fn truth_or_draw(config: &Config) -> Result<SystemParams, Failure> {
    match config.truth().map_err(config_err)? {
        Some(t) => Ok(t),
        None => {
            config.prior.validate().map_err(config_err)?;
            config
                .prior
                .sample(&mut stream_rng(config.seed, TRUTH_STREAM))
                .map_err(runtime_err)
        }
    }
}

fn run_mode(config: &Config, out: &Output, dump_posterior: bool) -> Result<(), Failure> {
    let session = config.session().map_err(config_err)?;
    let truth = truth_or_draw(config)?;
    let mut oracle = SimulatedExperiment::new(truth, session.noise, config.seed);
    let record = with_threads(config.threads, || run_estimation(&session, &mut oracle))
        .map_err(config_err)?
        .map_err(runtime_err)?;
    let (eps2_g, eps2_omega) = relative_errors(&record.estimate, &truth, config.omega_scale.unwrap_or(config.prior.mu_g));

    #[derive(Serialize)]
    struct RunProvenance<'a> {
        mode: &'static str,
        config: &'a Config,
        truth: SystemParams,
        eps2_g: f64,
        eps2_omega: f64,
    }
    let provenance = RunProvenance {
        mode: "run",
        config,
        truth,
        eps2_g,
        eps2_omega,
    };
    let json = record.to_json(&provenance).map_err(runtime_err)?;
    out.text("run.json", &(json + "\n"))?;
    out.with("shots.csv", |w| record.write_shots_csv(w))?;
    if dump_posterior {
        if let Some(cloud) = &record.final_cloud {
            out.with("posterior.csv", |w| cloud.write_csv(w))?;
        }
    }
    eprintln!(
        "status {:?}; estimate g={} omega_r={}; truth g={} omega_r={}; eps2_g={}",
        record.status,
        sci(record.estimate.g),
        sci(record.estimate.omega_r),
        sci(truth.g),
        sci(truth.omega_r),
        sci(eps2_g)
    );
    Ok(())
}

fn ensemble_mode(config: &Config, out: &Output) -> Result<(), Failure> {
    let ensemble_config = config.ensemble().map_err(config_err)?;
    let ensemble = run_ensemble(&ensemble_config).map_err(runtime_err)?;

    #[derive(Serialize)]
    struct CurveOutput<'a> {
        provenance: Provenance<'a>,
        curve: &'a rescoup::sim::ErrorCurve,
    }
    out.with("error_curve.csv", |w| ensemble.curve.write_csv(w))?;
    out.with("outliers.csv", |w| ensemble.curve.write_outliers_csv(w))?;
    out.json(
        "error_curve.json",
        &CurveOutput {
            provenance: Provenance {
                mode: "ensemble",
                config,
            },
            curve: &ensemble.curve,
        },
    )?;
    let curve = &ensemble.curve;
    eprintln!(
        "{} runs, {} failed; final median eps2_g={}",
        curve.n_runs,
        curve.n_failed,
        curve.median_eps2_g.last().map_or_else(|| "n/a".into(), |v| sci(*v))
    );
    Ok(())
}

fn sweep_mode(config: &Config, out: &Output) -> Result<(), Failure> {
    let ensemble_config = config.ensemble().map_err(config_err)?;
    if config.sweep_values.is_empty() || config.sweep_targets.is_empty() {
        return Err(Failure::Config("sweep.values and sweep.targets must be non-empty".into()));
    }
    let rows = sweep(&ensemble_config, config.sweep_axis, &config.sweep_values, &config.sweep_targets).map_err(runtime_err)?;

    #[derive(Serialize)]
    struct SweepOutput<'a> {
        provenance: Provenance<'a>,
        rows: &'a [rescoup::sim::SweepRow],
    }
    out.with("sweep.csv", |w| write_sweep_csv(&rows, w))?;
    out.json(
        "sweep.json",
        &SweepOutput {
            provenance: Provenance { mode: "sweep", config },
            rows: &rows,
        },
    )?;
    eprintln!("{} sweep rows over {}", rows.len(), config.sweep_axis.name());
    Ok(())
}

fn baseline_mode(config: &Config, out: &Output) -> Result<(), Failure> {
    let noise = config.noise().map_err(config_err)?;
    config.prior.validate().map_err(config_err)?;
    let (data, truth) = match &config.grid_input {
        Some(path) => {
            let file = File::open(path).map_err(|e| Failure::Io(format!("{path}: {e}")))?;
            (GridData::read_csv(file).map_err(runtime_err)?, config.truth().map_err(config_err)?)
        }
        None => {
            let grid: GridSpec = config.grid().map_err(config_err)?;
            let truth = truth_or_draw(config)?;
            let acquisition = if config.grid_exact {
                Acquisition::Exact
            } else {
                Acquisition::Sampled
            };
            let data = acquire_grid(&truth, &grid, &noise, acquisition, &mut stream_rng(config.seed, GRID_STREAM))
                .map_err(runtime_err)?;
            (data, Some(truth))
        }
    };
    let fit = with_threads(config.threads, || fit_grid(&data, &noise, &config.prior))
        .map_err(config_err)?
        .map_err(runtime_err)?;
    let errors = truth.map(|t| relative_errors(&fit.estimate, &t, config.omega_scale.unwrap_or(config.prior.mu_g)));

    #[derive(Serialize)]
    struct BaselineOutput<'a> {
        provenance: Provenance<'a>,
        truth: Option<SystemParams>,
        fit: rescoup::baseline::GridFit,
        n_settings: usize,
        total_shots: u64,
        eps2_g: Option<f64>,
        eps2_omega: Option<f64>,
    }
    out.with("grid.csv", |w| data.write_csv(w))?;
    out.json(
        "baseline.json",
        &BaselineOutput {
            provenance: Provenance {
                mode: "baseline",
                config,
            },
            truth,
            fit,
            n_settings: data.cells.len(),
            total_shots: data.total_shots(),
            eps2_g: errors.map(|e| e.0),
            eps2_omega: errors.map(|e| e.1),
        },
    )?;
    eprintln!(
        "fit g={} omega_r={} from {} shots{}",
        sci(fit.estimate.g),
        sci(fit.estimate.omega_r),
        data.total_shots(),
        match (fit.on_boundary, fit.poor_fit) {
            (true, _) => " (on search boundary)",
            (false, true) => " (poor fit: deviance far above expectation)",
            _ => "",
        }
    );
    Ok(())
}

fn linspace(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    if n == 1 {
        lo
    } else {
        lo + (hi - lo) * i as f64 / (n - 1) as f64
    }
}

fn spectrum_mode(config: &Config, out: &Output) -> Result<(), Failure> {
    let noise = config.noise().map_err(config_err)?;
    let truth = match config.truth().map_err(config_err)? {
        Some(t) => t,
        None => SystemParams::new(config.prior.mu_g, config.prior.mu_omega).map_err(config_err)?,
    };
    let (d_lo, d_hi) = config.spectrum_delta;
    if config.spectrum_n_delta < 1 || config.spectrum_n_t < 1 || !(d_hi >= d_lo) || !(config.spectrum_t_max >= 0.0) {
        return Err(Failure::Config("spectrum grid needs counts >= 1 and ordered, non-negative ranges".into()));
    }
    let mut text = String::from("delta,omega_q,t,probability\n");
    for i in 0..config.spectrum_n_delta {
        let delta = linspace(d_lo, d_hi, config.spectrum_n_delta, i);
        let omega_q = truth.omega_r + 2.0 * truth.g * delta;
        for j in 0..config.spectrum_n_t {
            let t = linspace(0.0, config.spectrum_t_max, config.spectrum_n_t, j);
            let p = excitation_probability_damped(&truth, &ControlSetting { omega_q, t }, &noise);
            text.push_str(&format!("{},{},{},{}\n", sci(delta), sci(omega_q), sci(t), sci(p)));
        }
    }
    out.text("spectrum.csv", &text)?;
    eprintln!("{} x {} spectrum points", config.spectrum_n_delta, config.spectrum_n_t);
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let mode = cli.mode.or(cli.mode_flag).ok_or_else(|| Failure::Config("no mode given".into()))?;
    let config = resolve(cli)?;
    let out = Output::new(&cli.out)?;
    out.text("config.txt", &config.to_text())?;
    match mode {
        Mode::Run => run_mode(&config, &out, cli.dump_posterior),
        Mode::Ensemble => ensemble_mode(&config, &out),
        Mode::Sweep => sweep_mode(&config, &out),
        Mode::Baseline => baseline_mode(&config, &out),
        Mode::Spectrum => spectrum_mode(&config, &out),
    }
    .map(|()| eprintln!("{} outputs written to {}", mode.name(), cli.out.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("rescoup: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
