//! Structured unit-square triangular mesh.
//!
//! The square is divided into `grid_n` x `grid_n` cells and each cell into
//! four triangles meeting at the cell centroid (crossed layout). Node order
//! is fixed: corner grid row-major first, then centroids cell-row-major, so
//! fields serialize reproducibly.

use crate::{Error, Result};

pub const COORD_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Default)]
pub struct BoundarySets {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub bottom: Vec<usize>,
    pub top: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub grid_n: usize,
    /// (x, y) per node.
    pub nodes: Vec<[f64; 2]>,
    /// Node-index triples, counter-clockwise.
    pub elements: Vec<[usize; 3]>,
    pub boundary: BoundarySets,
}

/// Builds the crossed mesh on [0,1]^2 with `grid_n` cells per side.
pub fn build_crossed_mesh(grid_n: usize) -> Result<Mesh> {
    if grid_n == 0 {
        return Err(Error::invalid("grid_n must be at least 1"));
    }
    let n = grid_n;
    let np = n + 1;
    let mut nodes = Vec::with_capacity(np * np + n * n);
    for j in 0..np {
        for i in 0..np {
            nodes.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let centroid_base = np * np;
    for cy in 0..n {
        for cx in 0..n {
            nodes.push([(cx as f64 + 0.5) / n as f64, (cy as f64 + 0.5) / n as f64]);
        }
    }

    let mut elements = Vec::with_capacity(4 * n * n);
    for cy in 0..n {
        for cx in 0..n {
            let bl = cy * np + cx;
            let br = bl + 1;
            let tl = bl + np;
            let tr = tl + 1;
            let c = centroid_base + cy * n + cx;
            // four triangles per cell: bottom, right, top, left (all CCW)
            elements.push([bl, br, c]);
            elements.push([br, tr, c]);
            elements.push([tr, tl, c]);
            elements.push([tl, bl, c]);
        }
    }

    let boundary = boundary_sets_of(&nodes);
    Ok(Mesh {
        grid_n,
        nodes,
        elements,
        boundary,
    })
}

/// Face sets by coordinate test against the unit square.
pub fn boundary_sets(mesh: &Mesh) -> BoundarySets {
    boundary_sets_of(&mesh.nodes)
}

fn boundary_sets_of(nodes: &[[f64; 2]]) -> BoundarySets {
    let mut sets = BoundarySets {
        left: Vec::new(),
        right: Vec::new(),
        bottom: Vec::new(),
        top: Vec::new(),
    };
    for (id, &[x, y]) in nodes.iter().enumerate() {
        if x.abs() <= COORD_TOL {
            sets.left.push(id);
        }
        if (x - 1.0).abs() <= COORD_TOL {
            sets.right.push(id);
        }
        if y.abs() <= COORD_TOL {
            sets.bottom.push(id);
        }
        if (y - 1.0).abs() <= COORD_TOL {
            sets.top.push(id);
        }
    }
    sets
}

impl Mesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn signed_area(&self, e: usize) -> f64 {
        let [a, b, c] = self.elements[e];
        let pa = self.nodes[a];
        let pb = self.nodes[b];
        let pc = self.nodes[c];
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn element_centroid(&self, e: usize) -> [f64; 2] {
        let [a, b, c] = self.elements[e];
        [
            (self.nodes[a][0] + self.nodes[b][0] + self.nodes[c][0]) / 3.0,
            (self.nodes[a][1] + self.nodes[b][1] + self.nodes[c][1]) / 3.0,
        ]
    }

    /// The four corner node ids (bottom-left, bottom-right, top-left, top-right).
    pub fn corner_nodes(&self) -> [usize; 4] {
        let np = self.grid_n + 1;
        [0, self.grid_n, self.grid_n * np, np * np - 1]
    }

    /// Nodes on any face of the square, deduplicated, ascending.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self
            .boundary
            .left
            .iter()
            .chain(&self.boundary.right)
            .chain(&self.boundary.bottom)
            .chain(&self.boundary.top)
            .copied()
            .collect();
        all.sort_unstable();
        all.dedup();
        all
    }
}
