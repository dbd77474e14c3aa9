use std::cmp::Ordering;

use nalgebra::{Matrix3, Vector3};

use super::AtomicSystem;
use crate::{Error, Result};

/// Directed edge `src → dst`, with `offset` selecting the periodic image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub offset: [i32; 3],
}

/// Radius graph with per-edge geometry. Edges are sorted by destination,
/// then by the neighbour ranking used for `max_neighbors` truncation.
#[derive(Clone, Debug, PartialEq)]
pub struct RadiusGraph {
    pub edges: Vec<Edge>,
    pub distances: Vec<f64>,
    pub rel_vectors: Vec<Vector3<f64>>,
    pub cutoff: f64,
    pub max_neighbors: usize,
}

impl RadiusGraph {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn sources(&self) -> Vec<usize> {
        self.edges.iter().map(|e| e.src).collect()
    }

    pub fn destinations(&self) -> Vec<usize> {
        self.edges.iter().map(|e| e.dst).collect()
    }
}

/// `(x_i − x_j) + oᵀ·C` with lattice vectors as the rows of `cell`.
pub fn pbc_edge_vector(
    xi: &Vector3<f64>,
    xj: &Vector3<f64>,
    offset: [i32; 3],
    cell: &Matrix3<f64>,
) -> Vector3<f64> {
    let mut v = xi - xj;
    for (a, &o) in offset.iter().enumerate() {
        if o != 0 {
            v += cell.row(a).transpose() * o as f64;
        }
    }
    v
}

/// Per-axis perpendicular width and the fractional-coordinate map of a cell.
struct CellGeometry {
    inverse: Matrix3<f64>,
    widths: [f64; 3],
}

impl CellGeometry {
    fn new(cell: &Matrix3<f64>) -> Self {
        let rows = [
            cell.row(0).transpose(),
            cell.row(1).transpose(),
            cell.row(2).transpose(),
        ];
        let volume = cell.determinant().abs();
        let widths = std::array::from_fn(|a| {
            let normal = rows[(a + 1) % 3].cross(&rows[(a + 2) % 3]);
            volume / normal.norm()
        });
        let inverse = cell.try_inverse().expect("periodic cell is invertible");
        Self { inverse, widths }
    }

    /// Fractional coordinates of a Cartesian difference vector.
    fn fractional(&self, v: &Vector3<f64>) -> Vector3<f64> {
        // Row vector times C⁻¹.
        self.inverse.transpose() * v
    }
}

/// Distance to the nearest integer `n` with `|n| ≥ 2`, measured as `|f + n|`.
fn far_image_gap(f: f64) -> f64 {
    let nearest = (-f).round();
    [nearest - 1.0, nearest, nearest + 1.0, -2.0, 2.0]
        .into_iter()
        .filter(|n| n.abs() >= 2.0)
        .map(|n| (f + n).abs())
        .fold(f64::INFINITY, f64::min)
}

fn offset_range(periodic: bool) -> std::ops::RangeInclusive<i32> {
    if periodic {
        -1..=1
    } else {
        0..=0
    }
}

fn neighbour_order(a: (f64, &Edge), b: (f64, &Edge)) -> Ordering {
    a.0.total_cmp(&b.0)
        .then(a.1.src.cmp(&b.1.src))
        .then(a.1.offset.cmp(&b.1.offset))
}

/// All directed pairs `(j → i, o)` with `o ∈ {−1,0,1}³` on periodic axes and
/// `‖x_i − x_j + oᵀC‖ < cutoff`, excluding the trivial self pair.
///
/// Each node keeps at most `max_neighbors` incoming edges, nearest first
/// (ties: smaller source index, then lexicographic offset).
///
/// Fails with [`Error::CutoffExceedsImageRange`] when some pair could have an
/// image closer than `cutoff` at an offset component of magnitude ≥ 2.
pub fn build_radius_graph(
    system: &AtomicSystem,
    cutoff: f64,
    max_neighbors: usize,
) -> Result<RadiusGraph> {
    if !(cutoff > 0.0 && cutoff.is_finite()) {
        return Err(Error::InvalidConfig(format!("cutoff must be positive, got {cutoff}")));
    }
    if max_neighbors == 0 {
        return Err(Error::InvalidConfig("max_neighbors must be positive".into()));
    }
    let n = system.len();
    let pos = system.positions();
    let pbc = system.pbc();
    let periodic = system.is_periodic();
    let zero_cell = Matrix3::zeros();
    let cell = system.cell().unwrap_or(&zero_cell);
    let geometry = periodic.then(|| CellGeometry::new(cell));

    let mut incoming: Vec<Vec<(f64, Edge, Vector3<f64>)>> = vec![Vec::new(); n];
    for dst in 0..n {
        for src in 0..n {
            if let Some(geo) = &geometry {
                let frac = geo.fractional(&(pos[dst] - pos[src]));
                for axis in (0..3).filter(|&a| pbc[a]) {
                    if geo.widths[axis] * far_image_gap(frac[axis]) < cutoff {
                        return Err(Error::CutoffExceedsImageRange {
                            cutoff,
                            axis,
                            src,
                            dst,
                        });
                    }
                }
            }
            for ox in offset_range(pbc[0]) {
                for oy in offset_range(pbc[1]) {
                    for oz in offset_range(pbc[2]) {
                        let offset = [ox, oy, oz];
                        if src == dst && offset == [0, 0, 0] {
                            continue;
                        }
                        let rel = pbc_edge_vector(&pos[dst], &pos[src], offset, cell);
                        let d = rel.norm();
                        if d < cutoff {
                            incoming[dst].push((d, Edge { src, dst, offset }, rel));
                        }
                    }
                }
            }
        }
    }

    let mut edges = Vec::new();
    let mut distances = Vec::new();
    let mut rel_vectors = Vec::new();
    for mut list in incoming {
        list.sort_by(|a, b| neighbour_order((a.0, &a.1), (b.0, &b.1)));
        list.truncate(max_neighbors);
        for (d, e, r) in list {
            edges.push(e);
            distances.push(d);
            rel_vectors.push(r);
        }
    }
    Ok(RadiusGraph {
        edges,
        distances,
        rel_vectors,
        cutoff,
        max_neighbors,
    })
}
