//! Batch runner behind the `simulate` binary.

pub mod config;
pub mod output;
pub mod presets;

use std::path::{Path, PathBuf};

use crate::cooperativity::{run_sweep_with, Grid, SweepPoint};
use crate::error::Result;

pub use config::{load_config, parse_config, ConfigFile, Overrides, RunConfig, Tolerances};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub points: usize,
    pub failed: usize,
    pub flagged: usize,
    pub directories: Vec<PathBuf>,
}

/// Run every sweep, writing `results.csv`, spectra, plots and `manifest.toml`.
///
/// A single sweep writes into `config.out`; several sweeps each get a
/// subdirectory named after the sweep.
pub fn run(config: &RunConfig, progress: &mut dyn FnMut(&str)) -> Result<RunSummary> {
    // Sweep points are the parallel unit; keep each solve single-threaded.
    faer::set_global_parallelism(faer::Par::Seq);
    std::fs::create_dir_all(&config.out)?;
    std::fs::write(
        config.out.join("manifest.toml"),
        config::manifest_text(config)?,
    )?;
    let settings = config.settings();
    let mut summary = RunSummary::default();
    for spec in &config.sweeps {
        let dir = if config.sweeps.len() == 1 {
            config.out.clone()
        } else {
            config.out.join(&spec.name)
        };
        std::fs::create_dir_all(&dir)?;
        let total = spec.grid.values()?.len();
        let mut writer = output::ResultsWriter::create(&dir.join("results.csv"))?;
        let mut done: Vec<SweepPoint> = Vec::with_capacity(total);
        let mut io_error = None;
        run_sweep_with(spec, &settings, |point| {
            if io_error.is_some() {
                return;
            }
            let status = point.status();
            progress(&format!(
                "[{}] {}/{} {} = {:.4e}: {}",
                spec.name,
                point.index + 1,
                total,
                spec.axis.name(),
                point.value,
                status
            ));
            let res = writer
                .write(&point)
                .and_then(|_| write_point_spectrum(&dir, &point));
            if let Err(e) = res {
                io_error = Some(e);
            }
            done.push(point);
        })?;
        if let Some(e) = io_error {
            return Err(e);
        }
        summary.points += done.len();
        summary.failed += done.iter().filter(|p| p.outcome.is_err()).count();
        summary.flagged += done
            .iter()
            .filter(|p| p.outcome.as_ref().is_ok_and(|r| r.status() != "ok"))
            .count();
        if config.plots {
            let log_x = matches!(spec.grid, Grid::Log { .. });
            output::write_sweep_plots(&dir, spec.axis, log_x, &done)?;
        }
        summary.directories.push(dir);
    }
    Ok(summary)
}

fn write_point_spectrum(dir: &Path, point: &SweepPoint) -> Result<()> {
    if let Ok(r) = &point.outcome {
        if let Some(s) = &r.spectrum {
            output::write_spectrum(&dir.join(format!("spectrum_{}.csv", point.index)), s)?;
        }
    }
    Ok(())
}
