//! File formats: solution/field CSVs, history CSVs, and legacy VTK.
//!
//! Floats are written with the shortest representation that parses back to
//! the identical value, so write/read roundtrips are bitwise and reruns are
//! byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::adjoint::AdjointRecord;
use crate::fieldgen::Tensor2Field;
use crate::geometry::Mesh;
use crate::pinn::TrainRecord;
use crate::{Error, Result};

const SOLUTION_HEADER: &str = "node,x,y,ux,uy,exx,eyy,exy";
const FIELD_HEADER: &str = "index,x,y,value";
const TRAIN_HEADER: &str = "iteration,l_pde,l_const,l_data,total,e_l2_pct";
const ADJOINT_HEADER: &str = "iteration,objective,strain_error_pct,modulus_error_pct";

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::format(format!("line {line}: {s:?} is not a number")))
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| Error::format(format!("line {line}: {s:?} is not an index")))
}

fn split_columns(line: &str, want: usize, lineno: usize) -> Result<Vec<&str>> {
    let cols: Vec<&str> = line.split(',').collect();
    if cols.len() != want {
        return Err(Error::format(format!(
            "line {lineno}: expected {want} columns, found {}",
            cols.len()
        )));
    }
    Ok(cols)
}

fn check_header(line: Option<&str>, expected: &str) -> Result<()> {
    match line {
        Some(l) if l.trim_end() == expected => Ok(()),
        Some(l) => Err(Error::format(format!(
            "unexpected header {:?}, expected {expected:?}",
            l.trim_end()
        ))),
        None => Err(Error::format("empty file")),
    }
}

/// Nodal solution record as stored on disk: coordinates, displacements, and
/// nodal strains.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionData {
    pub nodes: Vec<[f64; 2]>,
    pub u: Vec<[f64; 2]>,
    pub strain_nodes: Tensor2Field,
}

/// Writes the reference-data wire format (one row per node).
pub fn write_solution_csv(
    path: &Path,
    mesh: &Mesh,
    u: &[[f64; 2]],
    strain_nodes: &Tensor2Field,
) -> Result<()> {
    if u.len() != mesh.node_count() || strain_nodes.len() != mesh.node_count() {
        return Err(Error::invalid("solution does not cover every mesh node"));
    }
    let mut out = String::new();
    out.push_str(SOLUTION_HEADER);
    out.push('\n');
    for (i, p) in mesh.nodes.iter().enumerate() {
        writeln!(
            out,
            "{i},{},{},{},{},{},{},{}",
            p[0],
            p[1],
            u[i][0],
            u[i][1],
            strain_nodes.xx[i],
            strain_nodes.yy[i],
            strain_nodes.xy[i]
        )
        .expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads the reference-data wire format back. Rows must be sorted by node
/// index starting at zero.
pub fn read_solution_csv(path: &Path) -> Result<SolutionData> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    check_header(lines.next(), SOLUTION_HEADER)?;
    let mut nodes = Vec::new();
    let mut u = Vec::new();
    let mut xx = Vec::new();
    let mut yy = Vec::new();
    let mut xy = Vec::new();
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        let cols = split_columns(line, 8, lineno)?;
        let idx = parse_usize(cols[0], lineno)?;
        if idx != nodes.len() {
            return Err(Error::format(format!(
                "line {lineno}: node index {idx} out of order (expected {})",
                nodes.len()
            )));
        }
        nodes.push([parse_f64(cols[1], lineno)?, parse_f64(cols[2], lineno)?]);
        u.push([parse_f64(cols[3], lineno)?, parse_f64(cols[4], lineno)?]);
        xx.push(parse_f64(cols[5], lineno)?);
        yy.push(parse_f64(cols[6], lineno)?);
        xy.push(parse_f64(cols[7], lineno)?);
    }
    if nodes.is_empty() {
        return Err(Error::format("no data rows"));
    }
    Ok(SolutionData {
        nodes,
        u,
        strain_nodes: Tensor2Field { xx, yy, xy },
    })
}

/// Writes a scalar field sampled at the given coordinates (nodes or element
/// centroids).
pub fn write_field_csv(path: &Path, coords: &[[f64; 2]], values: &[f64]) -> Result<()> {
    if coords.len() != values.len() {
        return Err(Error::invalid("coordinate/value count mismatch"));
    }
    let mut out = String::new();
    out.push_str(FIELD_HEADER);
    out.push('\n');
    for (i, (p, v)) in coords.iter().zip(values).enumerate() {
        writeln!(out, "{i},{},{},{v}", p[0], p[1]).expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_field_csv(path: &Path) -> Result<(Vec<[f64; 2]>, Vec<f64>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    check_header(lines.next(), FIELD_HEADER)?;
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        let cols = split_columns(line, 4, lineno)?;
        let idx = parse_usize(cols[0], lineno)?;
        if idx != coords.len() {
            return Err(Error::format(format!(
                "line {lineno}: index {idx} out of order"
            )));
        }
        coords.push([parse_f64(cols[1], lineno)?, parse_f64(cols[2], lineno)?]);
        values.push(parse_f64(cols[3], lineno)?);
    }
    if coords.is_empty() {
        return Err(Error::format("no data rows"));
    }
    Ok((coords, values))
}

/// Writes the training history; the modulus-error column is empty when no
/// ground truth was supplied.
pub fn write_train_history_csv(path: &Path, history: &[TrainRecord]) -> Result<()> {
    let mut out = String::new();
    out.push_str(TRAIN_HEADER);
    out.push('\n');
    for r in history {
        write!(
            out,
            "{},{},{},{},{}",
            r.iteration, r.l_pde, r.l_const, r.l_data, r.total
        )
        .expect("string write");
        match r.e_l2_pct {
            Some(e) => writeln!(out, ",{e}").expect("string write"),
            None => out.push_str(",\n"),
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_train_history_csv(path: &Path) -> Result<Vec<TrainRecord>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    check_header(lines.next(), TRAIN_HEADER)?;
    let mut history = Vec::new();
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        let cols = split_columns(line, 6, lineno)?;
        history.push(TrainRecord {
            iteration: parse_usize(cols[0], lineno)?,
            l_pde: parse_f64(cols[1], lineno)?,
            l_const: parse_f64(cols[2], lineno)?,
            l_data: parse_f64(cols[3], lineno)?,
            total: parse_f64(cols[4], lineno)?,
            e_l2_pct: if cols[5].trim().is_empty() {
                None
            } else {
                Some(parse_f64(cols[5], lineno)?)
            },
        });
    }
    Ok(history)
}

/// Writes the inverse-solver history; the modulus-error column is empty
/// when no ground truth was supplied.
pub fn write_adjoint_history_csv(path: &Path, history: &[AdjointRecord]) -> Result<()> {
    let mut out = String::new();
    out.push_str(ADJOINT_HEADER);
    out.push('\n');
    for r in history {
        write!(
            out,
            "{},{},{}",
            r.iteration, r.objective, r.strain_error_pct
        )
        .expect("string write");
        match r.modulus_error_pct {
            Some(e) => writeln!(out, ",{e}").expect("string write"),
            None => out.push_str(",\n"),
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_adjoint_history_csv(path: &Path) -> Result<Vec<AdjointRecord>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    check_header(lines.next(), ADJOINT_HEADER)?;
    let mut history = Vec::new();
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        let cols = split_columns(line, 4, lineno)?;
        history.push(AdjointRecord {
            iteration: parse_usize(cols[0], lineno)?,
            objective: parse_f64(cols[1], lineno)?,
            strain_error_pct: parse_f64(cols[2], lineno)?,
            modulus_error_pct: if cols[3].trim().is_empty() {
                None
            } else {
                Some(parse_f64(cols[3], lineno)?)
            },
        });
    }
    Ok(history)
}

/// Fields attached to a VTK export.
#[derive(Default)]
pub struct VtkFields<'a> {
    pub point_scalars: Vec<(&'a str, &'a [f64])>,
    pub point_vectors: Vec<(&'a str, &'a [[f64; 2]])>,
    pub cell_scalars: Vec<(&'a str, &'a [f64])>,
}

/// Writes a legacy ASCII VTK unstructured grid (triangle cells, type 5).
pub fn write_vtk(path: &Path, mesh: &Mesh, fields: &VtkFields<'_>) -> Result<()> {
    let n = mesh.node_count();
    let m = mesh.element_count();
    for (name, v) in &fields.point_scalars {
        if v.len() != n {
            return Err(Error::invalid(format!(
                "point field {name:?} has {} values for {n} nodes",
                v.len()
            )));
        }
    }
    for (name, v) in &fields.point_vectors {
        if v.len() != n {
            return Err(Error::invalid(format!(
                "point field {name:?} has {} values for {n} nodes",
                v.len()
            )));
        }
    }
    for (name, v) in &fields.cell_scalars {
        if v.len() != m {
            return Err(Error::invalid(format!(
                "cell field {name:?} has {} values for {m} elements",
                v.len()
            )));
        }
    }

    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("elastmap export\n");
    out.push_str("ASCII\n");
    out.push_str("DATASET UNSTRUCTURED_GRID\n");
    writeln!(out, "POINTS {n} double").expect("string write");
    for p in &mesh.nodes {
        writeln!(out, "{} {} 0", p[0], p[1]).expect("string write");
    }
    writeln!(out, "CELLS {m} {}", 4 * m).expect("string write");
    for e in &mesh.elements {
        writeln!(out, "3 {} {} {}", e[0], e[1], e[2]).expect("string write");
    }
    writeln!(out, "CELL_TYPES {m}").expect("string write");
    for _ in 0..m {
        out.push_str("5\n");
    }

    if !fields.point_scalars.is_empty() || !fields.point_vectors.is_empty() {
        writeln!(out, "POINT_DATA {n}").expect("string write");
        for (name, values) in &fields.point_scalars {
            writeln!(out, "SCALARS {name} double 1").expect("string write");
            out.push_str("LOOKUP_TABLE default\n");
            for v in *values {
                writeln!(out, "{v}").expect("string write");
            }
        }
        for (name, values) in &fields.point_vectors {
            writeln!(out, "VECTORS {name} double").expect("string write");
            for v in *values {
                writeln!(out, "{} {} 0", v[0], v[1]).expect("string write");
            }
        }
    }
    if !fields.cell_scalars.is_empty() {
        writeln!(out, "CELL_DATA {m}").expect("string write");
        for (name, values) in &fields.cell_scalars {
            writeln!(out, "SCALARS {name} double 1").expect("string write");
            out.push_str("LOOKUP_TABLE default\n");
            for v in *values {
                writeln!(out, "{v}").expect("string write");
            }
        }
    }

    fs::write(path, out)?;
    Ok(())
}
