//! Gradient-histogram entropy of an image or a lattice field.

use std::path::PathBuf;

use elastmap_core::complexity::gradient_histogram;
use elastmap_core::fieldgen::load_image;
use elastmap_core::io::read_field_csv;
use elastmap_core::{Error, Result};

use crate::config::ExperimentConfig;
use crate::manifest::Manifest;
use crate::raster::{lattice_raster, to_unit_range};

use super::announce;

pub struct DelentropyArgs {
    pub image: Option<PathBuf>,
    pub field: Option<PathBuf>,
    pub histogram: Option<PathBuf>,
}

pub fn run(cfg: &ExperimentConfig, args: &DelentropyArgs) -> Result<()> {
    let (raster, input) = match (&args.image, &args.field) {
        (Some(p), None) => (load_image(p)?.mapv(|v| v / 255.0), p),
        (None, Some(p)) => {
            let (coords, values) = read_field_csv(p)?;
            let grid = lattice_raster(&coords, &values).map_err(|e| {
                Error::invalid(format!("{}: not a full rectangular lattice ({e})", p.display()))
            })?;
            (to_unit_range(&grid)?, p)
        }
        _ => {
            return Err(Error::invalid(
                "pass exactly one of --image or --field",
            ))
        }
    };

    let hist = gradient_histogram(&raster)?;
    let de = hist.delentropy();
    println!("{de}");

    let out = cfg.out_dir();
    std::fs::create_dir_all(&out)?;

    if let Some(path) = &args.histogram {
        // sparse dump: only occupied bins, at gradient-space bin centers
        let bins = hist.p.dim().0;
        let width = 2.0 * hist.range / bins as f64;
        let mut coords = Vec::new();
        let mut values = Vec::new();
        for ((i, j), &p) in hist.p.indexed_iter() {
            if p > 0.0 {
                coords.push([
                    -hist.range + (i as f64 + 0.5) * width,
                    -hist.range + (j as f64 + 0.5) * width,
                ]);
                values.push(p);
            }
        }
        elastmap_core::io::write_field_csv(path, &coords, &values)?;
        announce(path);
    }

    let (rows, cols) = raster.dim();
    let report = serde_json::json!({
        "input": input.display().to_string(),
        "rows": rows,
        "cols": cols,
        "delentropy_bits": de,
    });
    let report_path = out.join("delentropy.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report).unwrap() + "\n")?;
    announce(&report_path);

    Manifest::new("delentropy", cfg).input(input)?.write(&out)?;
    Ok(())
}
