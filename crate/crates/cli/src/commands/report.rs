//! Plot rendering for a finished run directory.

use std::path::{Path, PathBuf};

use elastmap_core::io::{read_adjoint_history_csv, read_field_csv, read_train_history_csv};
use elastmap_core::{Error, Result};

use crate::config::ExperimentConfig;
use crate::manifest::Manifest;
use crate::raster::{elemental_cell_raster, lattice_raster};
use crate::svg::{field_map, line_chart, Series};

use super::announce;

pub struct ReportArgs {
    pub run: Option<PathBuf>,
}

pub fn run(cfg: &ExperimentConfig, args: &ReportArgs) -> Result<()> {
    let dir = args.run.clone().unwrap_or_else(|| cfg.out_dir());
    if !dir.is_dir() {
        return Err(Error::invalid(format!("{} is not a directory", dir.display())));
    }
    let mut manifest = Manifest::new("report", cfg);
    let mut wrote_any = false;

    let history = dir.join("history.csv");
    if history.is_file() {
        let records = read_train_history_csv(&history)?;
        let take = |f: fn(&elastmap_core::pinn::TrainRecord) -> f64| -> Vec<(f64, f64)> {
            records.iter().map(|r| (r.iteration as f64, f(r))).collect()
        };
        let series = [
            Series { name: "pde", points: take(|r| r.l_pde) },
            Series { name: "constitutive", points: take(|r| r.l_const) },
            Series { name: "data", points: take(|r| r.l_data) },
            Series { name: "total", points: take(|r| r.total) },
        ];
        let path = dir.join("convergence.svg");
        line_chart(&path, "loss convergence", "iteration", "loss", &series, true)?;
        announce(&path);
        manifest = manifest.input(&history)?;
        wrote_any = true;

        let errs: Vec<(f64, f64)> = records
            .iter()
            .filter_map(|r| r.e_l2_pct.map(|e| (r.iteration as f64, e)))
            .collect();
        if !errs.is_empty() {
            let path = dir.join("error_curve.svg");
            line_chart(
                &path,
                "modulus error",
                "iteration",
                "L2 error %",
                &[Series { name: "E error", points: errs }],
                true,
            )?;
            announce(&path);
        }
    }

    let adjoint = dir.join("adjoint_history.csv");
    if adjoint.is_file() {
        let records = read_adjoint_history_csv(&adjoint)?;
        let mut series = vec![
            Series {
                name: "objective",
                points: records.iter().map(|r| (r.iteration as f64, r.objective)).collect(),
            },
            Series {
                name: "strain error %",
                points: records
                    .iter()
                    .map(|r| (r.iteration as f64, r.strain_error_pct))
                    .collect(),
            },
        ];
        let modulus: Vec<(f64, f64)> = records
            .iter()
            .filter_map(|r| r.modulus_error_pct.map(|m| (r.iteration as f64, m)))
            .collect();
        if !modulus.is_empty() {
            series.push(Series { name: "modulus error %", points: modulus });
        }
        let path = dir.join("adjoint_convergence.svg");
        line_chart(&path, "inversion convergence", "iteration", "value", &series, true)?;
        announce(&path);
        manifest = manifest.input(&adjoint)?;
        wrote_any = true;
    }

    for csv in field_csvs(&dir)? {
        let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("field");
        let (coords, values) = match read_field_csv(&csv) {
            Ok(cv) => cv,
            Err(_) => continue, // a different CSV layout, not a field
        };
        let raster = lattice_raster(&coords, &values)
            .or_else(|_| elemental_cell_raster(&values));
        let raster = match raster {
            Ok(r) => r,
            Err(_) => continue, // scattered points with no raster form
        };
        let path = dir.join(format!("map_{stem}.svg"));
        field_map(&path, stem, &raster)?;
        announce(&path);
        manifest = manifest.input(&csv)?;
        wrote_any = true;
    }

    if !wrote_any {
        return Err(Error::invalid(format!(
            "nothing to plot in {}: no history.csv, adjoint_history.csv, or field CSVs",
            dir.display()
        )));
    }
    manifest.write(&dir)?;
    Ok(())
}

/// Candidate field CSVs, sorted by name for stable output order. Histories
/// are charted separately and per-iteration snapshots stay unplotted.
fn field_csvs(dir: &Path) -> Result<Vec<PathBuf>> {
    let skip = ["history.csv", "adjoint_history.csv", "sweep.csv"];
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.extension().is_some_and(|x| x == "csv")
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_none_or(|n| !skip.contains(&n) && !n.starts_with("e_iter_"))
        })
        .collect();
    v.sort();
    Ok(v)
}
