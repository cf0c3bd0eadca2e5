use serde::{Deserialize, Serialize};

use super::{Grid, SmoothCutoff};
use crate::{Error, Result};

/// Initial pair `(u₀, u₁)` supported in `B(0, R₁)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyData {
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
    pub support_radius: f64,
}

/// Named initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataPreset {
    Zero,
    /// `u₀ = A·exp(−|x−x₀|²/2σ²)·χ_{R₁}(x)`, `u₁ = 0`, with `χ_{R₁}` the
    /// smooth cutoff of radius `R₁`.
    GaussianPulse {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: [f64; 3],
    },
    /// `u₀ = A·(1 − |x|²/R₁²)⁴` inside `B(0,R₁)`, `u₁ = 0`.
    PolynomialBump { amplitude: f64 },
    /// `u₀ = 0`, `u₁ = A·exp(−|x|²/2σ²)·χ_{R₁}(x)`.
    VelocityPulse { amplitude: f64, width: f64 },
}

impl CauchyData {
    pub fn new(grid: &Grid, u0: Vec<f64>, u1: Vec<f64>, support_radius: f64) -> Result<Self> {
        for v in [&u0, &u1] {
            if v.len() != grid.len() {
                return Err(Error::Length {
                    expected: grid.len(),
                    got: v.len(),
                });
            }
        }
        for i in 0..grid.len() {
            if grid.radius(i) >= support_radius && (u0[i] != 0.0 || u1[i] != 0.0) {
                return Err(Error::Support(format!(
                    "data nonzero at node {i} (|x| = {}) outside B(0, {support_radius})",
                    grid.radius(i)
                )));
            }
            if !(u0[i].is_finite() && u1[i].is_finite()) {
                return Err(Error::Argument(format!("non-finite data at node {i}")));
            }
        }
        Ok(Self {
            u0,
            u1,
            support_radius,
        })
    }

    pub fn zero(grid: &Grid, support_radius: f64) -> Self {
        Self {
            u0: vec![0.0; grid.len()],
            u1: vec![0.0; grid.len()],
            support_radius,
        }
    }

    pub fn from_preset(preset: &DataPreset, grid: &Grid, support_radius: f64) -> Result<Self> {
        if !grid.ball_fits(support_radius) {
            return Err(Error::Support(format!(
                "R₁ = {support_radius} does not fit inside the grid"
            )));
        }
        let n = grid.len();
        let mask = SmoothCutoff::new(support_radius);
        let gaussian = |i: usize, width: f64, center: [f64; 3]| {
            let x = grid.coords(i);
            let d2: f64 = (0..3).map(|k| (x[k] - center[k]).powi(2)).sum();
            (-d2 / (2.0 * width * width)).exp() * mask.value(grid, i)
        };
        let (u0, u1) = match *preset {
            DataPreset::Zero => (vec![0.0; n], vec![0.0; n]),
            DataPreset::GaussianPulse {
                amplitude,
                width,
                center,
            } => (
                (0..n).map(|i| amplitude * gaussian(i, width, center)).collect(),
                vec![0.0; n],
            ),
            DataPreset::PolynomialBump { amplitude } => (
                (0..n)
                    .map(|i| {
                        let s = grid.radius(i) / support_radius;
                        if s < 1.0 {
                            amplitude * (1.0 - s * s).powi(4)
                        } else {
                            0.0
                        }
                    })
                    .collect(),
                vec![0.0; n],
            ),
            DataPreset::VelocityPulse { amplitude, width } => (
                vec![0.0; n],
                (0..n)
                    .map(|i| amplitude * gaussian(i, width, [0.0; 3]))
                    .collect(),
            ),
        };
        Self::new(grid, u0, u1, support_radius)
    }

    pub fn is_zero(&self) -> bool {
        self.u0.iter().chain(self.u1.iter()).all(|&v| v == 0.0)
    }

    /// Linear combination `α·self + β·other`.
    pub fn combine(&self, alpha: f64, other: &CauchyData, beta: f64) -> CauchyData {
        CauchyData {
            u0: self
                .u0
                .iter()
                .zip(&other.u0)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
            u1: self
                .u1
                .iter()
                .zip(&other.u1)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
            support_radius: self.support_radius.max(other.support_radius),
        }
    }

    /// Uniform rescaling of both components.
    pub fn scaled(&self, factor: f64) -> CauchyData {
        CauchyData {
            u0: self.u0.iter().map(|v| v * factor).collect(),
            u1: self.u1.iter().map(|v| v * factor).collect(),
            support_radius: self.support_radius,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_grid;

    #[test]
    fn presets_vanish_outside_support() {
        let g = build_grid(2, 4.0, 0.125).unwrap();
        for preset in [
            DataPreset::GaussianPulse {
                amplitude: 1.0,
                width: 0.3,
                center: [0.0; 3],
            },
            DataPreset::PolynomialBump { amplitude: 1.0 },
            DataPreset::VelocityPulse {
                amplitude: 1.0,
                width: 0.3,
            },
        ] {
            let d = CauchyData::from_preset(&preset, &g, 1.0).unwrap();
            assert!(!d.is_zero());
            for i in 0..g.len() {
                if g.radius(i) >= 1.0 {
                    assert_eq!(d.u0[i], 0.0);
                    assert_eq!(d.u1[i], 0.0);
                }
            }
        }
    }

    #[test]
    fn rejects_data_outside_ball() {
        let g = build_grid(2, 2.0, 0.25).unwrap();
        let u0 = vec![1.0; g.len()];
        assert!(CauchyData::new(&g, u0, vec![0.0; g.len()], 0.5).is_err());
    }
}
