//! Subcommand implementations over a shared, lazily computed spectrum.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::OnceLock;

use eth_core::consistency::suite::run_validation;
use eth_core::coupled_basis::allowed_spins;
use eth_core::eth_stats::synthetic::{goe_matrix, table_from_elements};
use eth_core::eth_stats::{
    band_data, diag_residual_stats, f_magnitude, gap_ratios_with_bins, gaussian_fit, offdiag_window_stats, p_goe, variance_ratio_sector,
    DosTable, EnergyWindow, FScanSpec, GaussianFit, Histogram, StatsError, VarianceSweep,
};
use eth_core::model_ops::TensorOpSpec;
use eth_core::spectral::cache::SpectrumCache;
use eth_core::spectral::{operator_tables, triangle_allows, ChainSpectra, OperatorTables, ReducedElementTable, StateBank};
use eth_core::spin_algebra::{ClebschGordan, HalfInt};
use rand::SeedableRng;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::memory::MemoryEstimate;
use crate::output::OutputDir;
use crate::CliError;

/// Subcommands producing output files, in the order `all` runs them.
pub const COMMANDS: [&str; 8] = ["spectrum", "dos", "gapstats", "bands", "hist", "fscan", "varratio", "validate"];

/// Dimension of the synthetic random-matrix control in `varratio`.
const CONTROL_DIM: usize = 1000;

pub struct Pipeline<'a> {
    config: PipelineConfig,
    provider: &'a dyn ClebschGordan,
    cache: Option<SpectrumCache>,
    out: OutputDir,
    spectra: OnceLock<ChainSpectra>,
}

impl<'a> Pipeline<'a> {
    pub fn new(config: PipelineConfig, provider: &'a dyn ClebschGordan) -> Result<Self, CliError> {
        config.validate()?;
        let cache = config.cache_dir.as_ref().map(SpectrumCache::new).transpose()?;
        let out = OutputDir::new(&config)?;
        Ok(Pipeline { config, provider, cache, out, spectra: OnceLock::new() })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// Refuses chains whose estimated footprint exceeds the configured limit.
    pub fn check_memory(&self) -> Result<MemoryEstimate, CliError> {
        let threads = self.config.threads.unwrap_or_else(rayon::current_num_threads);
        let max_rank = self.config.operators()?.iter().map(|o| o.rank).max().unwrap_or(HalfInt::ONE);
        let est = MemoryEstimate::new(self.config.model.n_qubits, threads, max_rank);
        log::info!("{}", est.describe());
        if MemoryEstimate::gib(est.total) > self.config.memory_limit_gb {
            return Err(CliError::Config(format!("{}; exceeds memory_limit_gb = {}", est.describe(), self.config.memory_limit_gb)));
        }
        Ok(est)
    }

    fn spectra(&self) -> Result<&ChainSpectra, CliError> {
        if let Some(s) = self.spectra.get() {
            return Ok(s);
        }
        self.check_memory()?;
        let (spectra, stats) = ChainSpectra::compute_cached(&self.config.model, self.cache.as_ref())?;
        log::info!("spectrum: diagonalized {} blocks, loaded {} from cache", stats.diagonalized, stats.cache_hits);
        Ok(self.spectra.get_or_init(|| spectra))
    }

    fn tables(&self, op: &TensorOpSpec) -> Result<OperatorTables, CliError> {
        let (tables, stats) = operator_tables(self.provider, &StateBank::new(), self.spectra()?, op, self.cache.as_ref())?;
        log::info!("{}: computed {} reduced-element tables, loaded {} from cache", op.label, stats.computed, stats.cache_hits);
        Ok(tables)
    }

    fn dos(&self) -> Result<DosTable, CliError> {
        Ok(DosTable::from_spectra(self.spectra()?))
    }

    fn check_spin(&self, s: HalfInt) -> Result<(), CliError> {
        let n = self.config.model.n_qubits;
        if allowed_spins(n).contains(&s) {
            return Ok(());
        }
        let list: Vec<String> = allowed_spins(n).iter().map(|s| s.to_string()).collect();
        Err(CliError::Config(format!("spin sector s = {s} does not exist at N = {n}; allowed spins are {}", list.join(", "))))
    }

    fn diagonal_table<'t>(&self, tables: &'t OperatorTables, op: &TensorOpSpec, s: HalfInt) -> Result<&'t ReducedElementTable, CliError> {
        self.check_spin(s)?;
        tables.get(s, s).ok_or_else(|| {
            debug_assert!(!triangle_allows(op.rank, s, s));
            CliError::Config(format!(
                "operator {} of rank {} has no reduced elements within s = {s}: the triangle rule |s - s'| <= k <= s + s' fails for s = s' = {s}",
                op.label, op.rank
            ))
        })
    }

    pub fn run(&self, command: &str) -> Result<Vec<PathBuf>, CliError> {
        match command {
            "spectrum" => self.spectrum(),
            "dos" => self.dos_tables(),
            "gapstats" => self.gapstats(),
            "bands" => self.bands(),
            "hist" => self.hist(),
            "fscan" => self.fscan(),
            "varratio" => self.varratio(),
            "validate" => self.validate(),
            "all" => {
                let mut files = Vec::new();
                for c in COMMANDS {
                    files.extend(self.run(c)?);
                }
                Ok(files)
            }
            other => Err(CliError::Config(format!("unknown command {other:?}"))),
        }
    }

    fn spectrum(&self) -> Result<Vec<PathBuf>, CliError> {
        #[derive(Serialize)]
        struct Summary {
            s: HalfInt,
            dim: usize,
            degeneracy: i64,
            e_min: f64,
            e_max: f64,
        }
        #[derive(Serialize)]
        struct Level {
            s: HalfInt,
            index: usize,
            energy: f64,
            energy_density: f64,
        }
        let spectra = self.spectra()?;
        let n = spectra.n_qubits() as f64;
        let summary: Vec<Summary> = spectra
            .blocks
            .values()
            .map(|b| Summary {
                s: b.s,
                dim: b.dim(),
                degeneracy: b.s.twice() + 1,
                e_min: b.eigenvalues.first().copied().unwrap_or(f64::NAN),
                e_max: b.eigenvalues.last().copied().unwrap_or(f64::NAN),
            })
            .collect();
        let levels: Vec<Level> = spectra
            .blocks
            .values()
            .flat_map(|b| b.eigenvalues.iter().enumerate().map(move |(i, &e)| Level { s: b.s, index: i, energy: e, energy_density: e / n }))
            .collect();
        let files = vec![
            self.out.write_csv("spectrum_summary.csv", "spectrum", &[], &summary)?,
            self.out.write_csv("spectrum_levels.csv", "spectrum", &[], &levels)?,
        ];
        let side = serde_json::json!({ "bandwidth": spectra.bandwidth(), "sectors": summary.len(), "levels": levels.len() });
        let sidecar = self.out.write_sidecar("spectrum.json", "spectrum", &files, &side)?;
        Ok([files, vec![sidecar]].concat())
    }

    fn dos_tables(&self) -> Result<Vec<PathBuf>, CliError> {
        #[derive(Serialize)]
        struct Row {
            s: HalfInt,
            energy_density: f64,
            count: usize,
            dos: f64,
            entropy: f64,
        }
        #[derive(Serialize)]
        struct Peak {
            s: HalfInt,
            peak_energy_density: f64,
            bin_width: f64,
        }
        let dos = self.dos()?;
        let w = &self.config.windows;
        let mut rows = Vec::new();
        let mut peaks = Vec::new();
        for s in self.spectra()?.spins() {
            for (center, _) in dos.partition(s, w.dos_width)? {
                let win = dos.window(s, center, w.dos_width)?;
                rows.push(Row { s, energy_density: center, count: win.count, dos: win.dos, entropy: win.entropy });
            }
            peaks.push(Peak { s, peak_energy_density: dos.peak(s, w.peak_width)?, bin_width: w.peak_width });
        }
        let files = vec![self.out.write_csv("dos.csv", "dos", &[], &rows)?, self.out.write_csv("dos_peaks.csv", "dos", &[], &peaks)?];
        let sidecar = self.out.write_sidecar("dos.json", "dos", &files, &peaks)?;
        Ok([files, vec![sidecar]].concat())
    }

    fn gapstats(&self) -> Result<Vec<PathBuf>, CliError> {
        #[derive(Serialize)]
        struct Bin {
            s: HalfInt,
            bin_lo: f64,
            bin_hi: f64,
            bin_center: f64,
            density: f64,
            p_goe: f64,
            two_p_goe: f64,
        }
        #[derive(Serialize)]
        struct Summary {
            s: HalfInt,
            levels: usize,
            dropped_levels: usize,
            ratios: usize,
            mean_ratio: f64,
            r2_fit: f64,
            r2_direct_2p: f64,
            r2_direct_p: f64,
        }
        let spectra = self.spectra()?;
        let mut bins = Vec::new();
        let mut summary = Vec::new();
        for &s in &self.config.spins {
            self.check_spin(s)?;
            let levels = &spectra.block(s)?.eigenvalues;
            let r = gap_ratios_with_bins(levels, self.config.histogram.gap_ratio_bins)?;
            let width = r.histogram.bin_width();
            for (i, (c, d)) in r.histogram.centers().into_iter().zip(&r.histogram.densities).enumerate() {
                let lo = r.histogram.lo + i as f64 * width;
                bins.push(Bin { s, bin_lo: lo, bin_hi: lo + width, bin_center: c, density: *d, p_goe: p_goe(c), two_p_goe: 2.0 * p_goe(c) });
            }
            summary.push(Summary {
                s,
                levels: levels.len(),
                dropped_levels: r.dropped_levels,
                ratios: r.ratios.len(),
                mean_ratio: r.mean_ratio,
                r2_fit: r.r2_fit,
                r2_direct_2p: r.r2_direct_2p,
                r2_direct_p: r.r2_direct_p,
            });
        }
        let notes = vec![
            "P_GOE(r) = (27/4) r (1+r) / (1+r+r^2)^(5/2) has unit area on [0,1]".to_string(),
            "r2_fit: linear regression (with intercept) of density on 2 P_GOE; r2_direct_*: no fitted parameters".to_string(),
        ];
        let files = vec![
            self.out.write_csv("gapstats_hist.csv", "gapstats", &notes, &bins)?,
            self.out.write_csv("gapstats_summary.csv", "gapstats", &notes, &summary)?,
        ];
        let sidecar = self.out.write_sidecar("gapstats.json", "gapstats", &files, &summary)?;
        Ok([files, vec![sidecar]].concat())
    }

    fn bands(&self) -> Result<Vec<PathBuf>, CliError> {
        #[derive(Serialize)]
        struct Row {
            s: HalfInt,
            energy_density: f64,
            value: f64,
        }
        let mut files = Vec::new();
        let mut summary = BTreeMap::new();
        for op in self.config.operators()? {
            let tables = self.tables(&op)?;
            let data = band_data(&tables, &self.spectra()?.blocks);
            let rows: Vec<Row> =
                data.iter().flat_map(|(&s, pts)| pts.iter().map(move |p| Row { s, energy_density: p.energy_density, value: p.value })).collect();
            let absent: Vec<String> = self.spectra()?.spins().filter(|s| !data.contains_key(s)).map(|s| s.to_string()).collect();
            let notes = if absent.is_empty() {
                vec![]
            } else {
                vec![format!("no diagonal elements for s = {} (triangle rule with rank {})", absent.join(", "), op.rank)]
            };
            files.push(self.out.write_csv(&format!("bands_{}.csv", op.label), "bands", &notes, &rows)?);
            summary.insert(op.label.clone(), serde_json::json!({ "points": rows.len(), "sectors_without_diagonal": absent }));
        }
        let sidecar = self.out.write_sidecar("bands.json", "bands", &files, &summary)?;
        files.push(sidecar);
        Ok(files)
    }

    fn hist(&self) -> Result<Vec<PathBuf>, CliError> {
        #[derive(Serialize)]
        struct Bin {
            s: HalfInt,
            kind: &'static str,
            bin_lo: f64,
            bin_hi: f64,
            density: f64,
            gaussian_density: f64,
        }
        #[derive(Serialize)]
        struct Summary {
            s: HalfInt,
            kind: &'static str,
            window_center: f64,
            window_width: f64,
            count: usize,
            mean: f64,
            variance: f64,
            ks_statistic: f64,
            ks_critical: f64,
            ks_pass: bool,
            histogram_r2: f64,
            low_stats: bool,
        }
        let dos = self.dos()?;
        let w = &self.config.windows;
        let mut files = Vec::new();
        let mut side = BTreeMap::new();
        for op in self.config.operators()? {
            let tables = self.tables(&op)?;
            let mut bins = Vec::new();
            let mut summary = Vec::new();
            for &s in &self.config.spins {
                let table = self.diagonal_table(&tables, &op, s)?;
                let block = self.spectra()?.block(s)?;
                let center = dos.peak(s, w.peak_width)?;
                let window = EnergyWindow::new(center, w.width)?;
                let diag = diag_residual_stats(table, block, &window)?;
                let off = offdiag_window_stats(table, block, block, &window)?;
                for (kind, samples, low) in [("diagonal_residual", &diag.residuals, diag.low_stats), ("off_diagonal", &off.samples, off.low_stats)] {
                    let fit = gaussian_fit(samples, self.config.histogram.element_bins).map_err(|e| match e {
                        StatsError::TooFewSamples(k) => CliError::Config(format!(
                            "{} s = {s}: only {k} {kind} samples in the width-{} window at E/N = {center}; the Gaussian fit needs at least 2",
                            op.label, w.width
                        )),
                        other => other.into(),
                    })?;
                    if low {
                        log::warn!("{} s = {s}: {kind} sample count {} is below the statistics threshold", op.label, fit.count);
                    }
                    bins.extend(histogram_rows(samples, &fit).into_iter().map(|(lo, hi, d, g)| Bin {
                        s,
                        kind,
                        bin_lo: lo,
                        bin_hi: hi,
                        density: d,
                        gaussian_density: g,
                    }));
                    summary.push(Summary {
                        s,
                        kind,
                        window_center: center,
                        window_width: w.width,
                        count: fit.count,
                        mean: fit.mean,
                        variance: fit.variance,
                        ks_statistic: fit.ks_statistic,
                        ks_critical: fit.ks_critical,
                        ks_pass: fit.ks_pass,
                        histogram_r2: fit.histogram_r2,
                        low_stats: low,
                    });
                }
            }
            files.push(self.out.write_csv(&format!("hist_{}.csv", op.label), "hist", &[], &bins)?);
            files.push(self.out.write_csv(&format!("hist_{}_summary.csv", op.label), "hist", &[], &summary)?);
            side.insert(op.label.clone(), summary);
        }
        let sidecar = self.out.write_sidecar("hist.json", "hist", &files, &side)?;
        files.push(sidecar);
        Ok(files)
    }

    fn fscan(&self) -> Result<Vec<PathBuf>, CliError> {
        let dos = self.dos()?;
        let f = &self.config.fscan;
        let spec = FScanSpec {
            energy_width: self.config.windows.width,
            energy_centers: f.energy_offsets.clone(),
            relative_to_peak: true,
            peak_width: self.config.windows.peak_width,
            omega_bin_width: f.omega_bin_width,
            omega_max: f.omega_max,
            min_count: f.min_count,
        };
        let mut files = Vec::new();
        let mut side = BTreeMap::new();
        for op in self.config.operators()? {
            let tables = self.tables(&op)?;
            let result = f_magnitude(&tables, &self.spectra()?.blocks, &dos, &spec)?;
            let unreliable = result.cells.iter().filter(|c| !c.reliable).count();
            let notes = vec![format!("reliable = false marks cells with fewer than {} samples", f.min_count)];
            files.push(self.out.write_csv(&format!("fscan_{}.csv", op.label), "fscan", &notes, &result.cells)?);
            side.insert(op.label.clone(), serde_json::json!({ "cells": result.cells.len(), "unreliable": unreliable, "spec": spec }));
        }
        let sidecar = self.out.write_sidecar("fscan.json", "fscan", &files, &side)?;
        files.push(sidecar);
        Ok(files)
    }

    fn varratio(&self) -> Result<Vec<PathBuf>, CliError> {
        #[derive(Serialize)]
        struct Row {
            s: HalfInt,
            center: f64,
            mean: f64,
            std: f64,
            stderr: f64,
            window_count: usize,
            skipped: usize,
        }
        #[derive(Serialize)]
        struct WindowRow {
            s: HalfInt,
            center: f64,
            diag_count: usize,
            off_count: usize,
            var_diag: f64,
            var_off: f64,
            ratio: Option<f64>,
        }
        let dos = self.dos()?;
        let w = &self.config.windows;
        let sweep = VarianceSweep {
            narrow_width: w.width,
            stride: w.stride,
            encompassing_width: w.encompassing_width,
            center: None,
            peak_width: w.peak_width,
            min_diag: self.config.variance.min_diag,
            min_off: self.config.variance.min_off,
        };
        let mut files = Vec::new();
        let mut side = BTreeMap::new();
        for op in self.config.operators()? {
            let tables = self.tables(&op)?;
            let mut rows = Vec::new();
            let mut windows = Vec::new();
            for &s in &self.config.spins {
                let table = self.diagonal_table(&tables, &op, s)?;
                let r = variance_ratio_sector(table, self.spectra()?.block(s)?, &dos, &sweep).map_err(|e| match e {
                    StatsError::AllWindowsSkipped { s, skipped } => CliError::Config(format!(
                        "{} s = {s}: all {skipped} windows have fewer than {} diagonal or {} off-diagonal samples",
                        op.label, sweep.min_diag, sweep.min_off
                    )),
                    other => other.into(),
                })?;
                windows.extend(r.windows.iter().map(|x| WindowRow {
                    s,
                    center: x.center,
                    diag_count: x.diag_count,
                    off_count: x.off_count,
                    var_diag: x.var_diag,
                    var_off: x.var_off,
                    ratio: x.ratio,
                }));
                rows.push(Row { s, center: r.center, mean: r.mean, std: r.std, stderr: r.stderr, window_count: r.window_count, skipped: r.skipped });
            }
            files.push(self.out.write_csv(&format!("varratio_{}.csv", op.label), "varratio", &[], &rows)?);
            files.push(self.out.write_csv(&format!("varratio_{}_windows.csv", op.label), "varratio", &[], &windows)?);
            side.insert(op.label.clone(), serde_json::to_value(&rows)?);
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.config.seed);
        let n = self.config.model.n_qubits;
        let (table, spectrum) = table_from_elements(goe_matrix(CONTROL_DIM, &mut rng), n, 1.0);
        let control_dos = DosTable::from_levels(n, [(HalfInt::ZERO, spectrum.eigenvalues.clone())]);
        let control = variance_ratio_sector(&table, &spectrum, &control_dos, &VarianceSweep { center: Some(0.0), ..sweep.clone() })?;
        side.insert(
            "synthetic_goe_control".into(),
            serde_json::json!({ "dim": CONTROL_DIM, "seed": self.config.seed, "mean": control.mean, "std": control.std, "window_count": control.window_count }),
        );
        let sidecar = self.out.write_sidecar("varratio.json", "varratio", &files, &side)?;
        files.push(sidecar);
        Ok(files)
    }

    fn validate(&self) -> Result<Vec<PathBuf>, CliError> {
        #[derive(Serialize)]
        struct Row<'r> {
            name: &'r str,
            instance: &'r str,
            max_abs_deviation: f64,
            max_rel_deviation: f64,
            tolerance_abs: f64,
            tolerance_rel: f64,
            slope: Option<f64>,
            passed: bool,
        }
        let summary = run_validation(self.provider, &self.config.model)?;
        let rows: Vec<Row> = summary
            .reports
            .iter()
            .map(|r| Row {
                name: &r.name,
                instance: &r.instance,
                max_abs_deviation: r.max_abs_deviation,
                max_rel_deviation: r.max_rel_deviation,
                tolerance_abs: r.tolerance.abs,
                tolerance_rel: r.tolerance.rel,
                slope: r.slope,
                passed: r.passed,
            })
            .collect();
        let notes = summary.clamped_from.map(|n| vec![format!("requested N = {n} clamped to {}", summary.n_qubits)]).unwrap_or_default();
        let files = vec![self.out.write_csv("validate.csv", "validate", &notes, &rows)?];
        let sidecar = self.out.write_sidecar("validate.json", "validate", &files, &summary)?;
        let failures = summary.failures().count();
        log::info!("validate: {} checks, {failures} failed", summary.reports.len());
        if !summary.passed {
            let w = summary.worst().expect("a failing report exists");
            return Err(CliError::Validation(format!(
                "{failures} of {} checks failed; worst: {} [{}] abs {:.3e} rel {:.3e}{}",
                summary.reports.len(),
                w.name,
                w.instance,
                w.max_abs_deviation,
                w.max_rel_deviation,
                w.slope.map(|s| format!(" slope {s:.3}")).unwrap_or_default()
            )));
        }
        Ok([files, vec![sidecar]].concat())
    }
}

/// `(lo, hi, density, fitted normal density at the bin center)` per bin.
fn histogram_rows(samples: &[f64], fit: &GaussianFit) -> Vec<(f64, f64, f64, f64)> {
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let hist = Histogram::new(samples, lo, hi, fit.bins);
    let width = hist.bin_width();
    let sd = fit.variance.sqrt();
    hist.centers()
        .into_iter()
        .zip(&hist.densities)
        .map(|(c, &d)| {
            let g = if sd > 0.0 { (-(c - fit.mean).powi(2) / (2.0 * fit.variance)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt()) } else { 0.0 };
            (c - width / 2.0, c + width / 2.0, d, g)
        })
        .collect()
}
