use serde::{Deserialize, Serialize};

use super::Grid;

/// Radial cutoff `χ` equal to one on `B(0, 0.8·radius)`, decreasing to zero at
/// `radius` through the quintic smoothstep (C² across both ends of the ramp).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothCutoff {
    pub radius: f64,
}

const PLATEAU: f64 = 0.8;

impl SmoothCutoff {
    pub fn new(radius: f64) -> Self {
        Self { radius }
    }

    pub fn plateau_radius(&self) -> f64 {
        PLATEAU * self.radius
    }

    fn ramp_width(&self) -> f64 {
        (1.0 - PLATEAU) * self.radius
    }

    pub fn value_at_radius(&self, r: f64) -> f64 {
        let t = (r - self.plateau_radius()) / self.ramp_width();
        if t <= 0.0 {
            1.0
        } else if t >= 1.0 {
            0.0
        } else {
            1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
        }
    }

    /// d χ / d r.
    pub fn radial_derivative(&self, r: f64) -> f64 {
        let t = (r - self.plateau_radius()) / self.ramp_width();
        if t <= 0.0 || t >= 1.0 {
            0.0
        } else {
            -30.0 * t * t * (1.0 - t) * (1.0 - t) / self.ramp_width()
        }
    }

    pub fn value(&self, grid: &Grid, idx: usize) -> f64 {
        self.value_at_radius(grid.radius(idx))
    }

    pub fn gradient(&self, grid: &Grid, idx: usize) -> [f64; 3] {
        let x = grid.coords(idx);
        let r = grid.radius(idx);
        let d = self.radial_derivative(r);
        if d == 0.0 || r == 0.0 {
            return [0.0; 3];
        }
        [d * x[0] / r, d * x[1] / r, d * x[2] / r]
    }

    /// Nodes where `χ > 0`, i.e. `|x| < radius`.
    pub fn support(&self, grid: &Grid) -> Vec<usize> {
        grid.nodes_in_ball(self.radius)
    }

    pub fn values(&self, grid: &Grid, nodes: &[usize]) -> Vec<f64> {
        nodes.iter().map(|&i| self.value(grid, i)).collect()
    }

    /// `χ ≡ 1` on every listed node.
    pub fn is_one_on(&self, grid: &Grid, nodes: &[usize]) -> bool {
        nodes.iter().all(|&i| self.value(grid, i) == 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_and_support() {
        let m = SmoothCutoff::new(1.0);
        assert_eq!(m.value_at_radius(0.0), 1.0);
        assert_eq!(m.value_at_radius(0.8), 1.0);
        assert_eq!(m.value_at_radius(1.0), 0.0);
        let mid = m.value_at_radius(0.9);
        assert!((mid - 0.5).abs() < 1e-14);
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let m = SmoothCutoff::new(1.5);
        for &r in &[1.21, 1.3, 1.37, 1.45] {
            let d = 1e-6;
            let fd = (m.value_at_radius(r + d) - m.value_at_radius(r - d)) / (2.0 * d);
            assert!((fd - m.radial_derivative(r)).abs() < 1e-6);
        }
    }
}
