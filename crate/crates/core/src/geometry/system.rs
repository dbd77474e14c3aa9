use nalgebra::{Matrix3, Vector3};

use super::EuclideanTransform;
use crate::{Error, Result};

/// Minimum |det C| (Å³) accepted for a periodic cell.
pub const MIN_CELL_VOLUME: f64 = 1e-10;

/// Positions, atomic numbers and an optional unit cell.
///
/// The cell is stored with lattice vectors as rows, so an integer offset `o`
/// selects the image displacement `oᵀ·C`.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicSystem {
    positions: Vec<Vector3<f64>>,
    atomic_numbers: Vec<u32>,
    cell: Option<Matrix3<f64>>,
    pbc: [bool; 3],
}

impl AtomicSystem {
    /// A non-periodic system.
    pub fn new(positions: Vec<Vector3<f64>>, atomic_numbers: Vec<u32>) -> Result<Self> {
        Self::with_cell(positions, atomic_numbers, None, [false; 3])
    }

    /// A system with a cell and per-axis periodicity flags.
    pub fn periodic(
        positions: Vec<Vector3<f64>>,
        atomic_numbers: Vec<u32>,
        cell: Matrix3<f64>,
        pbc: [bool; 3],
    ) -> Result<Self> {
        Self::with_cell(positions, atomic_numbers, Some(cell), pbc)
    }

    pub fn with_cell(
        positions: Vec<Vector3<f64>>,
        atomic_numbers: Vec<u32>,
        cell: Option<Matrix3<f64>>,
        pbc: [bool; 3],
    ) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidSystem("a system needs at least one atom".into()));
        }
        if positions.len() != atomic_numbers.len() {
            return Err(Error::InvalidSystem(format!(
                "{} positions but {} atomic numbers",
                positions.len(),
                atomic_numbers.len()
            )));
        }
        if let Some(i) = atomic_numbers.iter().position(|&z| z == 0) {
            return Err(Error::InvalidSystem(format!("atom {i} has atomic number 0")));
        }
        if positions.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidSystem("non-finite coordinate".into()));
        }
        if pbc.iter().any(|&p| p) {
            match cell {
                None => {
                    return Err(Error::InvalidSystem(
                        "periodic boundary conditions require a cell".into(),
                    ))
                }
                Some(c) if c.determinant().abs() <= MIN_CELL_VOLUME => {
                    return Err(Error::InvalidSystem(format!(
                        "cell determinant {} is too small",
                        c.determinant()
                    )))
                }
                _ => {}
            }
        }
        Ok(Self {
            positions,
            atomic_numbers,
            cell,
            pbc,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    pub fn atomic_numbers(&self) -> &[u32] {
        &self.atomic_numbers
    }

    pub fn cell(&self) -> Option<&Matrix3<f64>> {
        self.cell.as_ref()
    }

    pub fn pbc(&self) -> [bool; 3] {
        self.pbc
    }

    pub fn is_periodic(&self) -> bool {
        self.pbc.iter().any(|&p| p)
    }

    pub fn centroid(&self) -> Vector3<f64> {
        self.positions.iter().sum::<Vector3<f64>>() / self.len() as f64
    }

    /// Same atoms and periodicity, new coordinates and cell. Internal helper
    /// for maps that are known to preserve the invariants.
    pub(crate) fn remapped(
        &self,
        positions: Vec<Vector3<f64>>,
        cell: Option<Matrix3<f64>>,
    ) -> Self {
        debug_assert_eq!(positions.len(), self.positions.len());
        Self {
            positions,
            atomic_numbers: self.atomic_numbers.clone(),
            cell,
            pbc: self.pbc,
        }
    }

    /// Reorder atoms: atom `k` of the result is atom `order[k]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        if order.len() != self.len() || order.iter().any(|&i| i >= self.len() || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::InvalidSystem("order is not a permutation".into()));
        }
        Ok(Self {
            positions: order.iter().map(|&i| self.positions[i]).collect(),
            atomic_numbers: order.iter().map(|&i| self.atomic_numbers[i]).collect(),
            cell: self.cell,
            pbc: self.pbc,
        })
    }

    /// Act with `g`: positions `x ↦ Ux + t`.
    ///
    /// Cell rows are lattice (difference) vectors and only rotate, `c ↦ Uc`.
    /// Translating them would change the lattice of a periodic system.
    pub fn transformed(&self, g: &EuclideanTransform) -> Self {
        let positions = self.positions.iter().map(|p| g.apply_point(p)).collect();
        let cell = self.cell.map(|c| c * g.rotation().transpose());
        self.remapped(positions, cell)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_systems() {
        assert!(AtomicSystem::new(vec![], vec![]).is_err());
        assert!(AtomicSystem::new(vec![Vector3::zeros()], vec![0]).is_err());
        assert!(AtomicSystem::new(vec![Vector3::zeros()], vec![1, 2]).is_err());
        assert!(AtomicSystem::with_cell(vec![Vector3::zeros()], vec![1], None, [true, false, false]).is_err());
        let flat = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0);
        assert!(AtomicSystem::periodic(vec![Vector3::zeros()], vec![1], flat, [true; 3]).is_err());
        // A flat cell is fine as long as no axis is periodic.
        assert!(AtomicSystem::periodic(vec![Vector3::zeros()], vec![1], flat, [false; 3]).is_ok());
    }

    #[test]
    fn permutation_must_be_bijective() {
        let s = AtomicSystem::new(vec![Vector3::zeros(), Vector3::x()], vec![1, 8]).unwrap();
        assert!(s.permuted(&[0, 0]).is_err());
        let p = s.permuted(&[1, 0]).unwrap();
        assert_eq!(p.atomic_numbers(), &[8, 1]);
        assert_eq!(p.positions()[1], Vector3::zeros());
    }
}
