//! Network training against a strain reference.

use std::path::PathBuf;

use elastmap_core::fieldgen::ModulusField;
use elastmap_core::geometry::build_crossed_mesh;
use elastmap_core::io::{
    read_field_csv, read_solution_csv, write_solution_csv, write_train_history_csv, write_vtk,
    VtkFields,
};
use elastmap_core::net::save_checkpoint;
use elastmap_core::pinn::{evaluate_fields, train, GroundTruth, TransformStats};
use elastmap_core::{Error, Result};

use crate::config::{modulus_from_values, ExperimentConfig};
use crate::manifest::Manifest;

use super::{announce, check_mesh_matches, solution_as_reference, write_corner_grid_csv, write_elemental_csv};

pub struct TrainArgs {
    pub reference: PathBuf,
    pub truth_modulus: Option<PathBuf>,
    pub truth_solution: Option<PathBuf>,
}

pub fn run(cfg: &ExperimentConfig, args: &TrainArgs) -> Result<()> {
    let mesh = build_crossed_mesh(cfg.mesh.grid_n)?;
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out)?;

    let data = read_solution_csv(&args.reference)?;
    check_mesh_matches(&mesh, &data.nodes, "reference")?;

    let truth_modulus: Option<ModulusField> = match &args.truth_modulus {
        Some(p) => {
            let (_, values) = read_field_csv(p)?;
            Some(modulus_from_values(values, mesh.element_count())?)
        }
        None => None,
    };
    let truth_solution = match &args.truth_solution {
        Some(p) => {
            let sol = read_solution_csv(p)?;
            check_mesh_matches(&mesh, &sol.nodes, "truth solution")?;
            Some(solution_as_reference(sol, mesh.element_count()))
        }
        None => None,
    };

    let stats = TransformStats::from_displacements(&data.u)?;
    let pinn_cfg = cfg.pinn_config()?;

    // provenance first; a long run may still abort
    let mut manifest = Manifest::new("train", cfg)
        .seed("pinn", cfg.pinn.seed)
        .input(&args.reference)?;
    for p in [&args.truth_modulus, &args.truth_solution].into_iter().flatten() {
        manifest = manifest.input(p)?;
    }
    manifest.write(&out)?;

    let outcome = match train(&pinn_cfg, &mesh, &data.strain_nodes, &stats, truth_modulus.as_ref())
    {
        Ok(o) => o,
        Err(Error::TrainingAborted {
            iteration,
            l_pde,
            l_const,
            l_data,
        }) => {
            let diag = serde_json::json!({
                "iteration": iteration,
                "l_pde": l_pde,
                "l_const": l_const,
                "l_data": l_data,
            });
            let path = out.join("abort.json");
            std::fs::write(&path, diag.to_string() + "\n")?;
            eprintln!("diagnostic written to {}", path.display());
            return Err(Error::TrainingAborted {
                iteration,
                l_pde,
                l_const,
                l_data,
            });
        }
        Err(e) => return Err(e),
    };

    let history_path = out.join("history.csv");
    write_train_history_csv(&history_path, &outcome.history)?;
    announce(&history_path);

    let checkpoint = out.join("checkpoint.bin");
    save_checkpoint(
        &checkpoint,
        &pinn_cfg.network_spec(),
        &outcome.params,
        pinn_cfg.iterations as u64,
    )?;
    announce(&checkpoint);

    let truth = match (&truth_solution, &truth_modulus) {
        (Some(fem), Some(modulus)) => Some(GroundTruth { fem, modulus }),
        _ => None,
    };
    let fields = evaluate_fields(&pinn_cfg, &outcome.params, &mesh, &stats, truth)?;

    let u: Vec<[f64; 2]> = fields
        .ux
        .iter()
        .zip(&fields.uy)
        .map(|(&x, &y)| [x, y])
        .collect();
    let predicted = out.join("predicted.csv");
    write_solution_csv(&predicted, &mesh, &u, &fields.strain)?;
    announce(&predicted);

    let predicted_modulus = out.join("predicted_modulus.csv");
    write_elemental_csv(&predicted_modulus, &mesh, &fields.e_elements)?;
    announce(&predicted_modulus);

    let e_grid = out.join("predicted_e_grid.csv");
    write_corner_grid_csv(&e_grid, &mesh, &fields.e_nodes)?;
    announce(&e_grid);

    let mut point_scalars: Vec<(&str, &[f64])> = vec![
        ("E", &fields.e_nodes),
        ("exx", &fields.strain.xx),
        ("eyy", &fields.strain.yy),
        ("exy", &fields.strain.xy),
    ];
    if let Some(err) = &fields.abs_err_strain {
        point_scalars.push(("abs_err_exx", &err.xx));
        point_scalars.push(("abs_err_eyy", &err.yy));
        point_scalars.push(("abs_err_exy", &err.xy));
    }
    let mut point_vectors: Vec<(&str, &[[f64; 2]])> = vec![("u", &u)];
    if let Some(err) = &fields.abs_err_u {
        point_vectors.push(("abs_err_u", err));
    }
    let mut cell_scalars: Vec<(&str, &[f64])> = vec![("E_elements", &fields.e_elements)];
    if let Some(err) = &fields.abs_err_e {
        cell_scalars.push(("abs_err_E", err));
    }
    let vtk = out.join("predicted.vtk");
    write_vtk(
        &vtk,
        &mesh,
        &VtkFields {
            point_scalars,
            point_vectors,
            cell_scalars,
        },
    )?;
    announce(&vtk);

    let last = outcome.history.last().ok_or_else(|| {
        Error::invalid("training produced no history records (log stride too large?)")
    })?;
    let report = serde_json::json!({
        "variant": cfg.pinn.variant,
        "fcnn": cfg.pinn.fcnn,
        "param_count": outcome.params.len(),
        "iterations": pinn_cfg.iterations,
        "clamp_events": outcome.clamp_events,
        "final": {
            "l_pde": last.l_pde,
            "l_const": last.l_const,
            "l_data": last.l_data,
            "total": last.total,
            "e_l2_pct": last.e_l2_pct,
        },
        "l2": fields.l2.map(|l| serde_json::json!({
            "ux": l.ux, "uy": l.uy, "strain": l.strain, "e": l.e,
        })),
    });
    let report_path = out.join("report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report).unwrap() + "\n")?;
    announce(&report_path);

    println!(
        "final losses: pde {:e}, constitutive {:e}, data {:e}, total {:e}",
        last.l_pde, last.l_const, last.l_data, last.total
    );
    if let Some(e) = last.e_l2_pct {
        println!("modulus error {e:.3}% (L2, vs supplied truth)");
    }
    Ok(())
}
