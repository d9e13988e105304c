//! Reference-data generation: intensity field -> modulus map -> forward
//! solve -> (optionally noisy) strain reference.

use std::path::Path;

use elastmap_core::fem::solve_forward;
use elastmap_core::fieldgen::{
    add_strain_noise, elemental_modulus, load_image, map_image_to_nodes, sample_grf,
};
use elastmap_core::geometry::build_crossed_mesh;
use elastmap_core::io::{write_solution_csv, write_vtk, VtkFields};
use elastmap_core::{Error, Result};

use crate::config::{ExperimentConfig, FieldSource};
use crate::manifest::Manifest;

use super::{announce, write_corner_grid_csv, write_elemental_csv};

pub fn run(cfg: &ExperimentConfig) -> Result<()> {
    let mesh = build_crossed_mesh(cfg.mesh.grid_n)?;
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out)?;

    let mut manifest = Manifest::new("generate", cfg).seed("noise", cfg.noise.seed);
    let intensity = match cfg.field.source {
        FieldSource::Grf => {
            manifest = manifest.seed("field", cfg.field.seed);
            sample_grf(&mesh, cfg.field.length_scale, cfg.field.seed)?
        }
        FieldSource::Image => {
            let path = cfg.field.image_path.as_deref().ok_or_else(|| {
                Error::invalid("field.image_path is required when field.source is \"image\"")
            })?;
            manifest = manifest.input(Path::new(path))?;
            let raster = load_image(Path::new(path))?;
            map_image_to_nodes(&raster, &mesh)?
        }
    };
    let modulus = elemental_modulus(&intensity, &mesh);
    let model = cfg.material_model()?;
    let load = cfg.boundary_load()?;

    let solution = solve_forward(&mesh, &model, &modulus, &load)?;
    let strain_ref = add_strain_noise(&solution.strain_nodes, cfg.noise.percent, cfg.noise.seed)?;

    let reference = out.join("reference.csv");
    write_solution_csv(&reference, &mesh, &solution.u, &strain_ref)?;
    announce(&reference);

    let truth_solution = out.join("truth_solution.csv");
    write_solution_csv(&truth_solution, &mesh, &solution.u, &solution.strain_nodes)?;
    announce(&truth_solution);

    let truth_modulus = out.join("truth_modulus.csv");
    write_elemental_csv(&truth_modulus, &mesh, &modulus.values)?;
    announce(&truth_modulus);

    let intensity_grid = out.join("intensity_grid.csv");
    write_corner_grid_csv(&intensity_grid, &mesh, &intensity.values)?;
    announce(&intensity_grid);

    let vtk = out.join("fields.vtk");
    write_vtk(
        &vtk,
        &mesh,
        &VtkFields {
            point_scalars: vec![
                ("intensity", &intensity.values),
                ("exx", &solution.strain_nodes.xx),
                ("eyy", &solution.strain_nodes.yy),
                ("exy", &solution.strain_nodes.xy),
            ],
            point_vectors: vec![("u", &solution.u)],
            cell_scalars: vec![("E", &modulus.values)],
        },
    )?;
    announce(&vtk);

    manifest.write(&out)?;
    println!(
        "forward solve converged, residual {:e}; strain noise {}%",
        solution.residual_norm, cfg.noise.percent
    );
    Ok(())
}
