use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform cell-centred grid on the cube `[-extent/2, extent/2]ⁿ`.
///
/// Nodes sit at cell centres, so each node carries the weight `hⁿ` and the
/// weights sum to `extentⁿ`. Linear indices are row-major with the last axis
/// fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    per_axis: usize,
    extent: f64,
    spacing: f64,
}

/// Integer lattice position of a node.
pub type Node = [i64; 3];

pub fn build_grid(dim: usize, extent: f64, spacing: f64) -> Result<Grid> {
    if dim != 2 && dim != 3 {
        return Err(Error::Grid(format!("dimension must be 2 or 3, got {dim}")));
    }
    if !(extent > 0.0 && spacing > 0.0 && extent.is_finite() && spacing.is_finite()) {
        return Err(Error::Grid(format!(
            "extent {extent} and spacing {spacing} must be positive"
        )));
    }
    let ratio = extent / spacing;
    let count = ratio.round();
    if (ratio - count).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::Grid(format!(
            "extent {extent} / spacing {spacing} = {ratio} is not an integral node count"
        )));
    }
    if count < 8.0 {
        return Err(Error::Grid(format!(
            "need at least 8 nodes per axis, got {count}"
        )));
    }
    Ok(Grid {
        dim,
        per_axis: count as usize,
        extent,
        spacing,
    })
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of every node, `hⁿ`.
    pub fn weight(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    pub fn total_weight(&self) -> f64 {
        self.weight() * self.len() as f64
    }

    /// Half the extent: the largest radius of a ball centred at the origin
    /// that touches the faces of the domain.
    pub fn half_extent(&self) -> f64 {
        0.5 * self.extent
    }

    pub fn multi_index(&self, idx: usize) -> Node {
        let n = self.per_axis;
        let mut out = [0i64; 3];
        let mut rest = idx;
        for axis in (0..self.dim).rev() {
            out[axis] = (rest % n) as i64;
            rest /= n;
        }
        out
    }

    pub fn linear_index(&self, node: Node) -> Option<usize> {
        let n = self.per_axis as i64;
        let mut idx = 0usize;
        for &k in node.iter().take(self.dim) {
            if k < 0 || k >= n {
                return None;
            }
            idx = idx * self.per_axis + k as usize;
        }
        Some(idx)
    }

    /// Coordinate of a lattice index along one axis.
    pub fn axis_coord(&self, k: i64) -> f64 {
        -0.5 * self.extent + (k as f64 + 0.5) * self.spacing
    }

    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let node = self.multi_index(idx);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = self.axis_coord(node[axis]);
        }
        x
    }

    pub fn radius(&self, idx: usize) -> f64 {
        let x = self.coords(idx);
        (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
    }

    /// Nodes touching a face of the domain (the one-node boundary layer).
    pub fn is_boundary(&self, idx: usize) -> bool {
        let node = self.multi_index(idx);
        let last = self.per_axis as i64 - 1;
        node.iter()
            .take(self.dim)
            .any(|&k| k == 0 || k == last)
    }

    /// Indices of nodes with `|x| < radius`, in increasing order.
    pub fn nodes_in_ball(&self, radius: f64) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.radius(i) < radius).collect()
    }

    /// Whether the ball `B(0, radius)` stays clear of the boundary layer.
    pub fn ball_fits(&self, radius: f64) -> bool {
        radius <= self.half_extent() - self.spacing
    }

    /// Squared lattice distance `|m|²` between two nodes, in units of `h²`.
    pub fn offset_sq(&self, a: usize, b: usize) -> usize {
        let na = self.multi_index(a);
        let nb = self.multi_index(b);
        (0..self.dim)
            .map(|k| {
                let d = na[k] - nb[k];
                (d * d) as usize
            })
            .sum()
    }

    /// Lattice offset `a − b`.
    pub fn offset(&self, a: usize, b: usize) -> Node {
        let na = self.multi_index(a);
        let nb = self.multi_index(b);
        [na[0] - nb[0], na[1] - nb[1], na[2] - nb[2]]
    }

    /// Neighbour of `idx` shifted by `step` (±1) along `axis`, if inside the grid.
    pub fn neighbor(&self, idx: usize, axis: usize, step: i64) -> Option<usize> {
        let mut node = self.multi_index(idx);
        node[axis] += step;
        self.linear_index(node)
    }

    /// Grid with the same extent and spacing divided by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Grid> {
        build_grid(self.dim, self.extent, self.spacing / factor as f64)
    }
}
