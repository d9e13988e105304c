//! Rasters out of field CSVs.
//!
//! Nodal outputs on the corner lattice reconstruct exactly (coordinates
//! round-trip bit-for-bit through the CSVs), and per-element fields on the
//! crossed mesh collapse to one pixel per grid cell by averaging the four
//! triangles that share it.

use ndarray::Array2;

use elastmap_core::{Error, Result};

/// Reconstructs a full rectangular lattice from scattered (coord, value)
/// rows. Fails if the points do not cover every (x, y) combination exactly
/// once. Row 0 of the result is the smallest y.
pub fn lattice_raster(coords: &[[f64; 2]], values: &[f64]) -> Result<Array2<f64>> {
    if coords.len() != values.len() {
        return Err(Error::invalid("coordinate and value counts differ"));
    }
    if coords.is_empty() {
        return Err(Error::invalid("empty field"));
    }
    let xs = sorted_unique(coords.iter().map(|c| c[0]))?;
    let ys = sorted_unique(coords.iter().map(|c| c[1]))?;
    let (nx, ny) = (xs.len(), ys.len());
    if nx * ny != coords.len() {
        return Err(Error::invalid(format!(
            "{} points do not fill a {nx} x {ny} lattice",
            coords.len()
        )));
    }
    let index_of = |sorted: &[f64], v: f64| sorted.binary_search_by(|p| p.total_cmp(&v)).ok();

    let mut grid = Array2::<f64>::zeros((ny, nx));
    let mut seen = Array2::<bool>::from_elem((ny, nx), false);
    for (c, &v) in coords.iter().zip(values) {
        let (ix, iy) = match (index_of(&xs, c[0]), index_of(&ys, c[1])) {
            (Some(ix), Some(iy)) => (ix, iy),
            _ => return Err(Error::invalid("point off the lattice")),
        };
        if seen[[iy, ix]] {
            return Err(Error::invalid("duplicate lattice point"));
        }
        seen[[iy, ix]] = true;
        grid[[iy, ix]] = v;
    }
    if !seen.iter().all(|&s| s) {
        return Err(Error::invalid("lattice has holes"));
    }
    Ok(grid)
}

/// Collapses a per-element field on the crossed mesh (four triangles per
/// cell, cell-major order) to an n x n cell raster. Row 0 is the bottom
/// cell row.
pub fn elemental_cell_raster(values: &[f64]) -> Result<Array2<f64>> {
    let len = values.len();
    if len == 0 || len % 4 != 0 {
        return Err(Error::invalid(format!(
            "{len} values are not 4 triangles per cell"
        )));
    }
    let cells = len / 4;
    let n = (cells as f64).sqrt().round() as usize;
    if n * n != cells {
        return Err(Error::invalid(format!("{cells} cells are not a square grid")));
    }
    let mut grid = Array2::<f64>::zeros((n, n));
    for cy in 0..n {
        for cx in 0..n {
            let base = 4 * (cy * n + cx);
            grid[[cy, cx]] = values[base..base + 4].iter().sum::<f64>() / 4.0;
        }
    }
    Ok(grid)
}

/// Affinely rescales to [0, 1]; a constant raster maps to all zeros.
pub fn to_unit_range(raster: &Array2<f64>) -> Result<Array2<f64>> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in raster.iter() {
        if !v.is_finite() {
            return Err(Error::invalid("raster contains non-finite values"));
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo >= 0.0 && hi <= 1.0 {
        return Ok(raster.clone());
    }
    if lo == hi {
        return Ok(Array2::zeros(raster.raw_dim()));
    }
    Ok(raster.mapv(|v| (v - lo) / (hi - lo)))
}

fn sorted_unique(it: impl Iterator<Item = f64>) -> Result<Vec<f64>> {
    let mut v: Vec<f64> = Vec::new();
    for x in it {
        if !x.is_finite() {
            return Err(Error::invalid("non-finite coordinate"));
        }
        v.push(x);
    }
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup_by(|a, b| a.total_cmp(b).is_eq());
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_reconstructs_row_major() {
        // 3 x 2 lattice listed in scrambled order
        let coords = [
            [1.0, 0.0],
            [0.0, 1.0],
            [2.0, 1.0],
            [0.0, 0.0],
            [2.0, 0.0],
            [1.0, 1.0],
        ];
        let values = [1.0, 3.0, 5.0, 0.0, 2.0, 4.0];
        let g = lattice_raster(&coords, &values).unwrap();
        assert_eq!(g.shape(), [2, 3]);
        assert_eq!(g[[0, 0]], 0.0);
        assert_eq!(g[[0, 2]], 2.0);
        assert_eq!(g[[1, 1]], 4.0);
    }

    #[test]
    fn quincunx_points_are_rejected() {
        // corner + center pattern: unique xs/ys exist but combinations are missing
        let coords = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.5], [0.0, 1.0], [1.0, 1.0]];
        let values = [0.0; 5];
        assert!(lattice_raster(&coords, &values).is_err());
    }

    #[test]
    fn cell_raster_averages_four_triangles() {
        // 2 x 2 cells: element k of cell c holds c*4 + k
        let values: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let g = elemental_cell_raster(&values).unwrap();
        assert_eq!(g.shape(), [2, 2]);
        assert_eq!(g[[0, 0]], 1.5);
        assert_eq!(g[[0, 1]], 5.5);
        assert_eq!(g[[1, 0]], 9.5);
        assert_eq!(g[[1, 1]], 13.5);
    }

    #[test]
    fn unit_range_is_identity_inside_and_affine_outside() {
        let inside = ndarray::array![[0.0, 0.5], [1.0, 0.25]];
        assert_eq!(to_unit_range(&inside).unwrap(), inside);
        let outside = ndarray::array![[1.0, 3.0], [5.0, 2.0]];
        let scaled = to_unit_range(&outside).unwrap();
        assert_eq!(scaled[[0, 0]], 0.0);
        assert_eq!(scaled[[1, 0]], 1.0);
        assert_eq!(scaled[[0, 1]], 0.5);
        let flat = ndarray::array![[2.0, 2.0]];
        assert_eq!(to_unit_range(&flat).unwrap(), ndarray::array![[0.0, 0.0]]);
    }
}
