use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eth_core::consistency::suite::SignFlipCg;
use eth_core::spin_algebra::{CgCache, ClebschGordan};
use eth_lab::config::PipelineConfig;
use eth_lab::pipeline::Pipeline;
use eth_lab::CliError;

/// SU(2)-resolved exact diagonalization of Heisenberg chains and
/// eigenstate-thermalization statistics of spherical tensor operators.
///
/// Every CSV starts with `#` lines carrying the command, the config content
/// hash and the conventions in force; a JSON sidecar per command repeats the
/// canonical config and a summary. Exit codes: 0 success, 1 validation
/// failure, 2 configuration or input error.
#[derive(Parser, Debug)]
#[command(name = "eth-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration; see docs/schema.md. Missing fields take defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Use the reference-study parameters, including N = 18, ignoring --config.
    #[arg(long, global = true, conflicts_with = "config")]
    paper_defaults: bool,
    /// Override the chain length.
    #[arg(long, global = true, value_name = "N")]
    n: Option<usize>,
    /// Override the cache directory.
    #[arg(long, global = true, value_name = "DIR")]
    cache: Option<PathBuf>,
    /// Disable the on-disk cache.
    #[arg(long, global = true, conflicts_with = "cache")]
    no_cache: bool,
    /// Override the output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,
    /// Replace the coupling coefficients with a sign-corrupted provider.
    #[arg(long, global = true, hide = true)]
    inject_cg_fault: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Diagonalize every spin block and write per-sector summaries.
    ///
    /// spectrum_summary.csv: s, dim, degeneracy, e_min, e_max.
    /// spectrum_levels.csv: s, index, energy, energy_density.
    Spectrum,
    /// Minimal gap ratios per configured spin sector against the GOE surmise.
    ///
    /// gapstats_hist.csv: s, bin_lo, bin_hi, bin_center, density, p_goe, two_p_goe.
    /// gapstats_summary.csv: s, levels, dropped_levels, ratios, mean_ratio, r2_fit, r2_direct_2p, r2_direct_p.
    Gapstats,
    /// Diagonal reduced elements against energy density, per operator.
    ///
    /// bands_<op>.csv: s, energy_density, value.
    Bands,
    /// Histograms of diagonal residuals and off-diagonal elements in a window at each sector's DOS peak.
    ///
    /// hist_<op>.csv: s, kind, bin_lo, bin_hi, density, gaussian_density.
    /// hist_<op>_summary.csv: s, kind, window_center, window_width, count, mean, variance, ks_statistic, ks_critical, ks_pass, histogram_r2, low_stats.
    Hist,
    /// Off-diagonal envelope |f| on a grid of sector pairs, mean energy and omega.
    ///
    /// fscan_<op>.csv: s_row, s_col, mean_spin, nu, energy_center, omega_center, count, mean, variance, dos, f_magnitude, reliable.
    Fscan,
    /// Ratio of diagonal to off-diagonal variances over a sweep of narrow windows.
    ///
    /// varratio_<op>.csv: s, center, mean, std, stderr, window_count, skipped.
    /// varratio_<op>_windows.csv: s, center, diag_count, off_count, var_diag, var_off, ratio.
    Varratio,
    /// Density of states and thermodynamic entropy per sector.
    ///
    /// dos.csv: s, energy_density, count, dos, entropy.
    /// dos_peaks.csv: s, peak_energy_density, bin_width.
    Dos,
    /// Run the invariant and identity suite at N <= 8 (larger N is clamped).
    ///
    /// validate.csv: name, instance, max_abs_deviation, max_rel_deviation, tolerance_abs, tolerance_rel, slope, passed.
    /// Exits 1 and names the worst offender when any check fails.
    Validate,
    /// Every command above, in the order spectrum, dos, gapstats, bands, hist, fscan, varratio, validate.
    All,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Gapstats => "gapstats",
            Command::Bands => "bands",
            Command::Hist => "hist",
            Command::Fscan => "fscan",
            Command::Varratio => "varratio",
            Command::Dos => "dos",
            Command::Validate => "validate",
            Command::All => "all",
        }
    }
}

fn build_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut config = if cli.paper_defaults {
        PipelineConfig::reference()
    } else if let Some(path) = &cli.config {
        PipelineConfig::load(path)?
    } else {
        PipelineConfig::default()
    };
    if let Some(n) = cli.n {
        config.model.n_qubits = n;
    }
    if let Some(dir) = &cli.cache {
        config.cache_dir = Some(dir.clone());
    }
    if cli.no_cache {
        config.cache_dir = None;
    }
    if let Some(dir) = &cli.out {
        config.out_dir = dir.clone();
    }
    if cli.threads.is_some() {
        config.threads = cli.threads;
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = build_config(cli)?;
    if let Some(k) = config.threads.filter(|&k| k > 0) {
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let exact = CgCache::new();
    let provider: &dyn ClebschGordan = if cli.inject_cg_fault { &SignFlipCg } else { &exact };
    let pipeline = Pipeline::new(config, provider)?;
    log::info!("config hash {}", pipeline.config().content_hash());
    pipeline.run(cli.command.name())?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("eth-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
