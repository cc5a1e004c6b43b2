mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{RunConfig, Sampling};

/// Floquet prethermalization in amplitude-modulated optical lattices.
#[derive(Parser)]
#[command(name = "prethermal", version)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by all subcommands; each overrides its config entry.
#[derive(Args, Default)]
struct CommonArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Static lattice depth in E_R.
    #[arg(long, global = true)]
    v0: Option<f64>,
    /// Modulation amplitude.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Modulation frequency relative to the on-site frequency.
    #[arg(long, global = true)]
    omega: Option<f64>,
    /// Drive phase at t = 0 in radians (pi/2 gives a cosine drive).
    #[arg(long, global = true, allow_hyphen_values = true)]
    phase: Option<f64>,
    /// Plane waves run over m = -mmax..=mmax.
    #[arg(long, global = true)]
    mmax: Option<usize>,
    /// Quasimomentum in units of k_L.
    #[arg(long, global = true, allow_hyphen_values = true)]
    q: Option<f64>,
    /// Integrator substeps per drive period.
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Parameter grid as a0:a1:na,w0:w1:nw.
    #[arg(long, global = true)]
    grid: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write SVG heatmaps.
    #[arg(long, global = true)]
    svg: bool,
    /// Half-width of the quasimomentum window in k_L (0.4 or 1.0).
    #[arg(long, global = true)]
    bz_window: Option<f64>,
    /// Prepend an undriven alpha = 0 row to the grid.
    #[arg(long, global = true)]
    zero_alpha: bool,
    /// Worker threads for parameter sweeps.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Static band structure and lattice anchors.
    Bands,
    /// Quasienergies, overlaps and IPR at one drive point.
    Floquet,
    /// Diagonal-ensemble band occupations over the parameter grid.
    Map,
    /// Time evolution of the static ground state under the drive.
    Evolve {
        #[arg(long, conflicts_with = "periods")]
        duration_us: Option<f64>,
        #[arg(long)]
        periods: Option<f64>,
        #[arg(long, value_enum)]
        sampling: Option<Sampling>,
        /// Sample count for uniform sampling.
        #[arg(long)]
        samples: Option<usize>,
        /// Additional boxcar-binned output with this bin width.
        #[arg(long)]
        bin_us: Option<f64>,
        /// Quasimomentum points across the zone.
        #[arg(long)]
        q_points: Option<usize>,
        /// Gaussian quasimomentum width in k_L.
        #[arg(long)]
        q_sigma: Option<f64>,
    },
    /// Classical pendulum stability map and boundary.
    Stability,
    /// Power-law fit of a time-series channel.
    Fit {
        /// Series CSV (own format or external time_us,value).
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        channel: Option<String>,
        #[arg(long)]
        t_min_us: Option<f64>,
        #[arg(long)]
        t_max_us: Option<f64>,
        /// Fit the reciprocal of the channel.
        #[arg(long)]
        reciprocal: bool,
    },
}

fn apply_overrides(config: &mut RunConfig, common: &CommonArgs, command: &Command) -> Result<(), String> {
    let set = |slot: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut config.drive.v0, common.v0);
    set(&mut config.drive.alpha, common.alpha);
    set(&mut config.drive.omega, common.omega);
    set(&mut config.drive.phase, common.phase);
    set(&mut config.basis.q, common.q);
    set(&mut config.evolve.bz_window, common.bz_window);
    if let Some(m) = common.mmax {
        config.basis.m_max = m;
    }
    if common.steps.is_some() {
        config.integrator.steps = common.steps;
    }
    if let Some(g) = &common.grid {
        let (a, w) = g.split_once(',').ok_or_else(|| format!("--grid '{g}' must look like a0:a1:na,w0:w1:nw"))?;
        config.grid.alpha = a.to_string();
        config.grid.omega = w.to_string();
    }
    if let Some(o) = &common.out {
        config.output.dir = o.clone();
    }
    config.output.svg |= common.svg;
    config.grid.zero_alpha |= common.zero_alpha;
    if common.workers.is_some() {
        config.workers = common.workers;
    }
    match command {
        Command::Evolve { duration_us, periods, sampling, samples, bin_us, q_points, q_sigma } => {
            if duration_us.is_some() || periods.is_some() {
                config.evolve.duration_us = *duration_us;
                config.evolve.periods = *periods;
            }
            if let Some(s) = sampling {
                config.evolve.sampling = *s;
            }
            if let Some(n) = samples {
                config.evolve.samples = *n;
            }
            if bin_us.is_some() {
                config.evolve.bin_us = *bin_us;
            }
            if let Some(n) = q_points {
                config.evolve.q_points = *n;
            }
            if q_sigma.is_some() {
                config.evolve.q_sigma = *q_sigma;
            }
        }
        Command::Fit { input, channel, t_min_us, t_max_us, reciprocal } => {
            if input.is_some() {
                config.fit.input = input.clone();
            }
            if let Some(c) = channel {
                config.fit.channel = c.clone();
            }
            if t_min_us.is_some() {
                config.fit.t_min_us = *t_min_us;
            }
            if t_max_us.is_some() {
                config.fit.t_max_us = *t_max_us;
            }
            config.fit.reciprocal |= reciprocal;
        }
        Command::Bands | Command::Floquet | Command::Map | Command::Stability => {}
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), commands::CliError> {
    let mut config = match &cli.common.config {
        Some(path) => RunConfig::load(path).map_err(commands::CliError::Config)?,
        None => RunConfig::default(),
    };
    apply_overrides(&mut config, &cli.common, &cli.command).map_err(commands::CliError::Config)?;
    config.validate().map_err(commands::CliError::Config)?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = config.workers {
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| commands::CliError::Config(format!("worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Bands => commands::bands(&config),
        Command::Floquet => commands::floquet(&config),
        Command::Map => commands::map(&config),
        Command::Evolve { .. } => commands::evolve(&config),
        Command::Stability => commands::stability(&config),
        Command::Fit { .. } => commands::fit(&config),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
