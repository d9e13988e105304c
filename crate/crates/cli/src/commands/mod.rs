//! Subcommand implementations.

pub mod delentropy;
pub mod generate;
pub mod invert_fea;
pub mod report;
pub mod sweep;
pub mod train;

use std::path::Path;

use elastmap_core::fem::FemSolution;
use elastmap_core::fieldgen::Tensor2Field;
use elastmap_core::geometry::Mesh;
use elastmap_core::io::SolutionData;
use elastmap_core::{Error, Result};

/// Element centroids, in element order.
pub(crate) fn element_centroids(mesh: &Mesh) -> Vec<[f64; 2]> {
    mesh.elements
        .iter()
        .map(|e| {
            let (a, b, c) = (mesh.nodes[e[0]], mesh.nodes[e[1]], mesh.nodes[e[2]]);
            [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
        })
        .collect()
}

/// Per-element field CSV with centroid coordinates.
pub(crate) fn write_elemental_csv(path: &Path, mesh: &Mesh, values: &[f64]) -> Result<()> {
    elastmap_core::io::write_field_csv(path, &element_centroids(mesh), values)
}

/// Nodal field restricted to the corner lattice: the first (n+1)^2 mesh
/// nodes, which form the full rectangular grid the cell centers interleave.
pub(crate) fn write_corner_grid_csv(path: &Path, mesh: &Mesh, nodal: &[f64]) -> Result<()> {
    let np = mesh.grid_n + 1;
    let corners = np * np;
    if nodal.len() != mesh.nodes.len() {
        return Err(Error::invalid("nodal field does not cover the mesh"));
    }
    elastmap_core::io::write_field_csv(path, &mesh.nodes[..corners], &nodal[..corners])
}

/// Checks that loaded reference data lives on exactly this mesh.
pub(crate) fn check_mesh_matches(mesh: &Mesh, nodes: &[[f64; 2]], what: &str) -> Result<()> {
    if nodes.len() != mesh.nodes.len() {
        return Err(Error::invalid(format!(
            "{what} covers {} nodes but the configured mesh has {} (check mesh.grid_n)",
            nodes.len(),
            mesh.nodes.len()
        )));
    }
    for (i, (a, b)) in nodes.iter().zip(&mesh.nodes).enumerate() {
        if a != b {
            return Err(Error::invalid(format!(
                "{what} node {i} is at ({}, {}) but the configured mesh puts it at ({}, {})",
                a[0], a[1], b[0], b[1]
            )));
        }
    }
    Ok(())
}

/// Wraps loaded solution data as a reference solution. Only nodal
/// displacements and strains carry information; the per-element strains are
/// not stored in the CSV and stay zero.
pub(crate) fn solution_as_reference(data: SolutionData, elements: usize) -> FemSolution {
    FemSolution {
        u: data.u,
        strain_nodes: data.strain_nodes,
        strain_elements: Tensor2Field::zeros(elements),
        residual_norm: 0.0,
    }
}

pub(crate) fn announce(path: &Path) {
    println!("wrote {}", path.display());
}
