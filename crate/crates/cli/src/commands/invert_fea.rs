//! Adjoint-based inversion of the elemental modulus from strain data.

use std::path::PathBuf;

use elastmap_core::adjoint::{inverse_fea, AdjointRun, Termination};
use elastmap_core::geometry::build_crossed_mesh;
use elastmap_core::io::{read_field_csv, read_solution_csv, write_adjoint_history_csv, write_vtk, VtkFields};
use elastmap_core::Result;

use crate::config::{modulus_from_values, ExperimentConfig};
use crate::manifest::Manifest;

use super::{announce, check_mesh_matches, write_elemental_csv};

pub struct InvertArgs {
    pub reference: PathBuf,
    pub truth_modulus: Option<PathBuf>,
}

pub fn run(cfg: &ExperimentConfig, args: &InvertArgs) -> Result<()> {
    let mesh = build_crossed_mesh(cfg.mesh.grid_n)?;
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out)?;

    let data = read_solution_csv(&args.reference)?;
    check_mesh_matches(&mesh, &data.nodes, "reference")?;

    let mut run = AdjointRun::new(
        cfg.initial_modulus()?,
        cfg.adjoint.max_iter,
        cfg.adjoint.tol,
    );
    if let Some(p) = &args.truth_modulus {
        let (_, values) = read_field_csv(p)?;
        run = run.with_truth(modulus_from_values(values, mesh.element_count())?);
    }

    let mut manifest = Manifest::new("invert-fea", cfg).input(&args.reference)?;
    if let Some(p) = &args.truth_modulus {
        manifest = manifest.input(p)?;
    }
    manifest.write(&out)?;

    let model = cfg.material_model()?;
    let load = cfg.boundary_load()?;
    let done = inverse_fea(&mesh, &model, &load, &data.strain_nodes, run)?;

    let history = out.join("adjoint_history.csv");
    write_adjoint_history_csv(&history, &done.history)?;
    announce(&history);

    for (record, field) in done.history.iter().zip(&done.snapshots) {
        let snap = out.join(format!("e_iter_{:04}.csv", record.iteration));
        write_elemental_csv(&snap, &mesh, &field.values)?;
    }
    println!("wrote {} modulus snapshots", done.snapshots.len());

    let best = out.join("e_best.csv");
    write_elemental_csv(&best, &mesh, &done.e_best.values)?;
    announce(&best);

    let finals = out.join("e_final.csv");
    write_elemental_csv(&finals, &mesh, &done.e_final.values)?;
    announce(&finals);

    let mut cell_scalars: Vec<(&str, &[f64])> = vec![
        ("E_best", &done.e_best.values),
        ("E_final", &done.e_final.values),
    ];
    if let Some(t) = &done.e_truth {
        cell_scalars.push(("E_truth", &t.values));
    }
    let vtk = out.join("adjoint.vtk");
    write_vtk(
        &vtk,
        &mesh,
        &VtkFields {
            point_scalars: vec![
                ("exx_ref", &data.strain_nodes.xx),
                ("eyy_ref", &data.strain_nodes.yy),
                ("exy_ref", &data.strain_nodes.xy),
            ],
            point_vectors: vec![],
            cell_scalars,
        },
    )?;
    announce(&vtk);

    let termination = match &done.termination {
        Some(Termination::Converged) => serde_json::json!("converged"),
        Some(Termination::MaxIterations) => serde_json::json!("max-iterations"),
        Some(Termination::EarlyTermination(why)) => serde_json::json!({ "early": why }),
        None => serde_json::Value::Null,
    };
    let last = done.history.last();
    let best_strain = done
        .history
        .iter()
        .map(|r| r.strain_error_pct)
        .fold(f64::INFINITY, f64::min);
    let report = serde_json::json!({
        "termination": termination,
        "iterations": done.history.len(),
        "final_objective": last.map(|r| r.objective),
        "final_strain_error_pct": last.map(|r| r.strain_error_pct),
        "best_strain_error_pct": if best_strain.is_finite() { Some(best_strain) } else { None },
        "final_modulus_error_pct": last.and_then(|r| r.modulus_error_pct),
    });
    let report_path = out.join("adjoint_report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report).unwrap() + "\n")?;
    announce(&report_path);

    if let Some(r) = last {
        println!(
            "stopped after {} records: strain error {:.4}%{}",
            done.history.len(),
            r.strain_error_pct,
            r.modulus_error_pct
                .map(|m| format!(", modulus error {m:.4}%"))
                .unwrap_or_default()
        );
    }
    Ok(())
}
