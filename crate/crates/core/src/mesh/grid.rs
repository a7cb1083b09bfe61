use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::invalid;
use crate::Result;

/// Uniform tensor-product grid on `(0, L₁)` or `(0, L₁) × (0, L₂)`.
///
/// Nodes include the boundary: axis `a` carries `counts[a] + 2` nodes at
/// `x = k·h_a`, `k = 0..=counts[a]+1`. Nodes are stored row-major, i.e. the
/// flat index of node `(i, j)` is `i·(n₂+2) + j` (1D grids use `j = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    lengths: [f64; 2],
    counts: [usize; 2],
}

/// Boundary node together with the two nodes next to it along the inward
/// normal, used for one-sided normal derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace {
    pub node: usize,
    pub first: usize,
    pub second: usize,
    /// Spacing along the normal.
    pub spacing: f64,
    /// Lumped boundary measure of the node (1 in 1D, tangential spacing in 2D).
    pub weight: f64,
}

impl Grid {
    pub const MIN_COUNT: usize = 3;

    pub fn new_1d(length: f64, count: usize) -> Result<Self> {
        Self::build(1, [length, 1.0], [count, 1])
    }

    pub fn new_2d(lengths: [f64; 2], counts: [usize; 2]) -> Result<Self> {
        Self::build(2, lengths, counts)
    }

    /// Builds a grid of dimension `lengths.len()` (1 or 2).
    pub fn new(lengths: &[f64], counts: &[usize]) -> Result<Self> {
        match (lengths, counts) {
            ([l], [n]) => Self::new_1d(*l, *n),
            ([l1, l2], [n1, n2]) => Self::new_2d([*l1, *l2], [*n1, *n2]),
            _ => Err(invalid(format!(
                "grid needs one or two axes with matching lengths/counts (got {} lengths, {} counts)",
                lengths.len(),
                counts.len()
            ))),
        }
    }

    fn build(dim: usize, lengths: [f64; 2], counts: [usize; 2]) -> Result<Self> {
        for axis in 0..dim {
            let l = lengths[axis];
            if !(l.is_finite() && l > 0.0) {
                return Err(invalid(format!("axis {axis}: length must be positive, got {l}")));
            }
            if counts[axis] < Self::MIN_COUNT {
                return Err(invalid(format!(
                    "axis {axis}: need at least {} interior nodes, got {}",
                    Self::MIN_COUNT,
                    counts[axis]
                )));
            }
        }
        Ok(Grid { dim, lengths, counts })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.lengths[axis]
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dim]
    }

    /// Interior node count along `axis`.
    pub fn count(&self, axis: usize) -> usize {
        self.counts[axis]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts[..self.dim]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / (self.counts[axis] + 1) as f64
    }

    /// Full node count along `axis`, boundary included.
    pub fn extent(&self, axis: usize) -> usize {
        if axis < self.dim {
            self.counts[axis] + 2
        } else {
            1
        }
    }

    pub fn node_count(&self) -> usize {
        self.extent(0) * self.extent(1)
    }

    pub fn interior_count(&self) -> usize {
        self.counts[..self.dim].iter().product()
    }

    /// Row stride of the flat layout (`n₂ + 2` in 2D, 1 in 1D).
    pub fn stride(&self) -> usize {
        self.extent(1)
    }

    /// Lumped quadrature weight `hᵈ` of an interior node.
    pub fn weight(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    /// Lumped measure of Ω: interior count times the node weight.
    pub fn measure(&self) -> f64 {
        self.interior_count() as f64 * self.weight()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.stride() + j
    }

    pub fn position(&self, idx: usize) -> (usize, usize) {
        (idx / self.stride(), idx % self.stride())
    }

    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.position(idx);
        let x = i as f64 * self.spacing(0);
        let y = if self.dim == 2 { j as f64 * self.spacing(1) } else { 0.0 };
        [x, y]
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let (i, j) = self.position(idx);
        if i == 0 || i == self.counts[0] + 1 {
            return true;
        }
        self.dim == 2 && (j == 0 || j == self.counts[1] + 1)
    }

    /// Boundary node indices in ascending order. Traces are stored in this order.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&k| self.is_boundary(k)).collect()
    }

    /// Interior node indices in ascending (row-major) order.
    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&k| !self.is_boundary(k)).collect()
    }

    /// Position of interior node `(i, j)` in the packed interior layout.
    pub fn interior_slot(&self, i: usize, j: usize) -> usize {
        if self.dim == 1 {
            i - 1
        } else {
            (i - 1) * self.counts[1] + (j - 1)
        }
    }

    /// Boundary faces carrying a well-defined inward normal (corners excluded).
    pub fn boundary_faces(&self) -> Vec<BoundaryFace> {
        let mut faces = Vec::new();
        let n0 = self.counts[0];
        if self.dim == 1 {
            let h = self.spacing(0);
            faces.push(BoundaryFace { node: 0, first: 1, second: 2, spacing: h, weight: 1.0 });
            faces.push(BoundaryFace { node: n0 + 1, first: n0, second: n0 - 1, spacing: h, weight: 1.0 });
            return faces;
        }
        let n1 = self.counts[1];
        let (h0, h1) = (self.spacing(0), self.spacing(1));
        for j in 1..=n1 {
            faces.push(BoundaryFace {
                node: self.index(0, j),
                first: self.index(1, j),
                second: self.index(2, j),
                spacing: h0,
                weight: h1,
            });
            faces.push(BoundaryFace {
                node: self.index(n0 + 1, j),
                first: self.index(n0, j),
                second: self.index(n0 - 1, j),
                spacing: h0,
                weight: h1,
            });
        }
        for i in 1..=n0 {
            faces.push(BoundaryFace {
                node: self.index(i, 0),
                first: self.index(i, 1),
                second: self.index(i, 2),
                spacing: h1,
                weight: h0,
            });
            faces.push(BoundaryFace {
                node: self.index(i, n1 + 1),
                first: self.index(i, n1),
                second: self.index(i, n1 - 1),
                spacing: h1,
                weight: h0,
            });
        }
        faces
    }

    /// Short identifier used in certificate files, e.g. `d1-n255-L6`.
    pub fn id(&self) -> String {
        if self.dim == 1 {
            format!("d1-n{}-L{}", self.counts[0], self.lengths[0])
        } else {
            format!("d2-n{}x{}-L{}x{}", self.counts[0], self.counts[1], self.lengths[0], self.lengths[1])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_split_into_interior_and_boundary() {
        for grid in [Grid::new_1d(1.0, 5).unwrap(), Grid::new_2d([1.0, 2.0], [4, 3]).unwrap()] {
            let b = grid.boundary_nodes();
            let i = grid.interior_nodes();
            assert_eq!(b.len() + i.len(), grid.node_count());
            assert_eq!(i.len(), grid.interior_count());
            assert!(b.iter().all(|k| !i.contains(k)));
        }
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid::new_1d(1.0, 2).is_err());
        assert!(Grid::new_1d(0.0, 5).is_err());
        assert!(Grid::new_1d(f64::NAN, 5).is_err());
        assert!(Grid::new_2d([1.0, 1.0], [3, 2]).is_err());
        assert!(Grid::new(&[1.0], &[3, 3]).is_err());
    }

    #[test]
    fn quadrature_weights_approach_the_measure() {
        let g = Grid::new_2d([2.0, 3.0], [99, 99]).unwrap();
        let rel = (g.measure() - 6.0).abs() / 6.0;
        assert!(rel < 3.0 / 100.0, "{rel}");
        let g = Grid::new_1d(1.0, 3).unwrap();
        assert_eq!(g.measure(), 0.75);
    }

    #[test]
    fn faces_skip_corners() {
        let g = Grid::new_2d([1.0, 1.0], [3, 4]).unwrap();
        let faces = g.boundary_faces();
        assert_eq!(faces.len(), 2 * 3 + 2 * 4);
        for f in &faces {
            let (i, j) = g.position(f.node);
            let corner = (i == 0 || i == 4) && (j == 0 || j == 5);
            assert!(!corner);
            assert!(!g.is_boundary(f.first));
        }
    }
}
