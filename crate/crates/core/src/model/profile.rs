use serde::{Deserialize, Serialize};

use super::Grid;
use crate::{Error, Result};

/// Analytic description of a wavespeed. Each preset has `c ≡ 1` outside
/// `B(0, ρ)`; the preset shapes are choices of this crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileSpec {
    Constant,
    /// Tent `c = 1 + a·max(0, 1 − |x|/ρ)`.
    LipschitzBump { amplitude: f64, radius: f64 },
    /// `c = 1 − a` on the shell `inner + ramp ≤ |x| ≤ radius − ramp`, linear
    /// ramps back to 1 at `inner` and at `radius`.
    AnnulusWell {
        depth: f64,
        inner: f64,
        radius: f64,
        ramp: f64,
    },
}

impl ProfileSpec {
    pub const PRESET_NAMES: [&'static str; 3] = ["constant", "bump", "well"];

    /// Named presets: `bump` has `c_max = 1.5` on `B(0, 0.6)`, `well` dips to
    /// `c = 0.5` on a shell inside the same ball.
    pub fn preset(name: &str) -> Option<ProfileSpec> {
        match name {
            "constant" => Some(ProfileSpec::Constant),
            "bump" => Some(ProfileSpec::LipschitzBump {
                amplitude: 0.5,
                radius: 0.6,
            }),
            "well" => Some(ProfileSpec::AnnulusWell {
                depth: 0.5,
                inner: 0.2,
                radius: 0.6,
                ramp: 0.1,
            }),
            _ => None,
        }
    }

    pub fn speed_at_radius(&self, r: f64) -> f64 {
        match *self {
            ProfileSpec::Constant => 1.0,
            ProfileSpec::LipschitzBump { amplitude, radius } => {
                1.0 + amplitude * (1.0 - r / radius).max(0.0)
            }
            ProfileSpec::AnnulusWell {
                depth,
                inner,
                radius,
                ramp,
            } => {
                let s = if r <= inner || r >= radius {
                    0.0
                } else if r < inner + ramp {
                    (r - inner) / ramp
                } else if r > radius - ramp {
                    (radius - r) / ramp
                } else {
                    1.0
                };
                1.0 - depth * s
            }
        }
    }

    pub fn support_radius(&self) -> f64 {
        match *self {
            ProfileSpec::Constant => 0.0,
            ProfileSpec::LipschitzBump { radius, .. } | ProfileSpec::AnnulusWell { radius, .. } => {
                radius
            }
        }
    }

    /// Lipschitz constant of the analytic profile.
    pub fn analytic_lipschitz(&self) -> f64 {
        match *self {
            ProfileSpec::Constant => 0.0,
            ProfileSpec::LipschitzBump { amplitude, radius } => amplitude.abs() / radius,
            ProfileSpec::AnnulusWell { depth, ramp, .. } => depth.abs() / ramp,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProfileSpec::Constant => "constant",
            ProfileSpec::LipschitzBump { .. } => "lipschitz_bump",
            ProfileSpec::AnnulusWell { .. } => "annulus_well",
        }
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        match *self {
            ProfileSpec::Constant => Ok(()),
            ProfileSpec::LipschitzBump { amplitude, radius } => {
                if amplitude <= -1.0 {
                    return Err(Error::Profile(format!(
                        "bump amplitude {amplitude} ≤ −1 makes c vanish"
                    )));
                }
                check_radius(radius, grid)
            }
            ProfileSpec::AnnulusWell {
                depth,
                inner,
                radius,
                ramp,
            } => {
                if !(depth < 1.0) {
                    return Err(Error::Profile(format!(
                        "well depth {depth} ≥ 1 makes c vanish"
                    )));
                }
                if !(inner >= 0.0 && ramp > 0.0 && inner + 2.0 * ramp <= radius) {
                    return Err(Error::Profile(format!(
                        "shell geometry inner={inner}, ramp={ramp}, radius={radius} is inconsistent"
                    )));
                }
                check_radius(radius, grid)
            }
        }
    }
}

fn check_radius(radius: f64, grid: &Grid) -> Result<()> {
    if !(radius > 0.0) {
        return Err(Error::Profile(format!("support radius {radius} must be positive")));
    }
    if !grid.ball_fits(radius) {
        return Err(Error::Profile(format!(
            "support radius {radius} exceeds the grid (half extent {}, spacing {})",
            grid.half_extent(),
            grid.spacing()
        )));
    }
    Ok(())
}

/// Nodal wavespeed `c(xᵢ)` together with its summary constants.
#[derive(Debug, Clone, PartialEq)]
pub struct WavespeedProfile {
    pub spec: ProfileSpec,
    pub values: Vec<f64>,
    pub support_radius: f64,
    /// Largest centred-difference gradient magnitude over interior nodes.
    pub lipschitz: f64,
    pub analytic_lipschitz: f64,
    pub c_min: f64,
    pub c_max: f64,
}

pub fn make_wavespeed(spec: &ProfileSpec, grid: &Grid) -> Result<WavespeedProfile> {
    spec.validate(grid)?;
    let values: Vec<f64> = (0..grid.len())
        .map(|i| spec.speed_at_radius(grid.radius(i)))
        .collect();
    let c_min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let c_max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(c_min > 0.0) {
        return Err(Error::Profile(format!("c_min = {c_min} is not positive")));
    }
    let h = grid.spacing();
    let mut lipschitz: f64 = 0.0;
    for i in 0..grid.len() {
        let mut g2 = 0.0;
        let mut interior = true;
        for axis in 0..grid.dim() {
            match (grid.neighbor(i, axis, 1), grid.neighbor(i, axis, -1)) {
                (Some(p), Some(m)) => {
                    let d = (values[p] - values[m]) / (2.0 * h);
                    g2 += d * d;
                }
                _ => interior = false,
            }
        }
        if interior {
            lipschitz = lipschitz.max(g2.sqrt());
        }
    }
    Ok(WavespeedProfile {
        support_radius: spec.support_radius(),
        analytic_lipschitz: spec.analytic_lipschitz(),
        spec: spec.clone(),
        values,
        lipschitz,
        c_min,
        c_max,
    })
}

impl WavespeedProfile {
    pub fn constant(grid: &Grid) -> Self {
        make_wavespeed(&ProfileSpec::Constant, grid).expect("constant profile is always valid")
    }

    pub fn c(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn inv_c2(&self, idx: usize) -> f64 {
        let c = self.values[idx];
        1.0 / (c * c)
    }

    /// `V_c = 1 − c⁻²`.
    pub fn potential(&self, idx: usize) -> f64 {
        1.0 - self.inv_c2(idx)
    }

    /// Nodes where `c ≠ 1`.
    pub fn perturbation_support(&self) -> Vec<usize> {
        (0..self.values.len())
            .filter(|&i| self.values[i] != 1.0)
            .collect()
    }

    pub fn is_free(&self) -> bool {
        self.values.iter().all(|&c| c == 1.0)
    }
}
