use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::model::{build_grid, DataPreset, Grid, ProfileSpec};
use crate::stone::StoneConfig;
use crate::wave::EnergyWeight;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ScanNorm,
    ScanStrip,
    Simulate,
    StoneCompare,
    FitDecay,
    Verify,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::ScanNorm => "scan-norm",
            ExperimentKind::ScanStrip => "scan-strip",
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::StoneCompare => "stone-compare",
            ExperimentKind::FitDecay => "fit-decay",
            ExperimentKind::Verify => "verify",
        }
    }

    fn uses_masks(&self) -> bool {
        matches!(
            self,
            ExperimentKind::ScanNorm | ExperimentKind::ScanStrip | ExperimentKind::Verify
        )
    }

    fn uses_data(&self) -> bool {
        matches!(
            self,
            ExperimentKind::Simulate | ExperimentKind::StoneCompare | ExperimentKind::FitDecay
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    /// Side length of the cube `[−L/2, L/2]ⁿ`.
    pub extent: f64,
    pub spacing: f64,
}

/// A named preset with optional parameter overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    #[serde(default = "default_preset")]
    pub preset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp: Option<f64>,
}

fn default_preset() -> String {
    "bump".into()
}

impl Default for ProfileSection {
    fn default() -> Self {
        Self {
            preset: default_preset(),
            amplitude: None,
            radius: None,
            depth: None,
            inner: None,
            ramp: None,
        }
    }
}

impl ProfileSection {
    pub fn spec(&self) -> Result<ProfileSpec> {
        let base = ProfileSpec::preset(&self.preset).ok_or_else(|| {
            Error::Config(format!(
                "unknown profile preset {:?}; expected one of {:?}",
                self.preset,
                ProfileSpec::PRESET_NAMES
            ))
        })?;
        let stray = |names: &[(&str, Option<f64>)]| -> Result<()> {
            match names.iter().find(|(_, v)| v.is_some()) {
                Some((k, _)) => Err(Error::Config(format!(
                    "profile key `{k}` does not apply to preset {:?}",
                    self.preset
                ))),
                None => Ok(()),
            }
        };
        match base {
            ProfileSpec::Constant => {
                stray(&[
                    ("amplitude", self.amplitude),
                    ("radius", self.radius),
                    ("depth", self.depth),
                    ("inner", self.inner),
                    ("ramp", self.ramp),
                ])?;
                Ok(base)
            }
            ProfileSpec::LipschitzBump { amplitude, radius } => {
                stray(&[("depth", self.depth), ("inner", self.inner), ("ramp", self.ramp)])?;
                Ok(ProfileSpec::LipschitzBump {
                    amplitude: self.amplitude.unwrap_or(amplitude),
                    radius: self.radius.unwrap_or(radius),
                })
            }
            ProfileSpec::AnnulusWell {
                depth,
                inner,
                radius,
                ramp,
            } => {
                stray(&[("amplitude", self.amplitude)])?;
                Ok(ProfileSpec::AnnulusWell {
                    depth: self.depth.unwrap_or(depth),
                    inner: self.inner.unwrap_or(inner),
                    radius: self.radius.unwrap_or(radius),
                    ramp: self.ramp.unwrap_or(ramp),
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskSection {
    /// `χ`, equal to 1 on `B(0, 0.8·chi_radius)`.
    #[serde(default = "default_chi")]
    pub chi_radius: f64,
    /// `χ̃` for gradient norms; gradients are skipped when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_tilde_radius: Option<f64>,
    /// `χ₁` in the gradient identity.
    #[serde(default = "default_chi1")]
    pub inner_radius: f64,
}

fn default_chi() -> f64 {
    1.5
}
fn default_chi1() -> f64 {
    0.95
}

impl Default for MaskSection {
    fn default() -> Self {
        Self {
            chi_radius: default_chi(),
            chi_tilde_radius: None,
            inner_radius: default_chi1(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(default = "default_data_preset")]
    pub preset: DataPreset,
    #[serde(default = "default_r1")]
    pub r1: f64,
    #[serde(default = "default_r2")]
    pub r2: f64,
}

fn default_data_preset() -> DataPreset {
    DataPreset::GaussianPulse {
        amplitude: 1.0,
        width: 0.3,
        center: [0.0; 3],
    }
}
fn default_r1() -> f64 {
    1.2
}
fn default_r2() -> f64 {
    2.0
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            preset: default_data_preset(),
            r1: default_r1(),
            r2: default_r2(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    #[serde(default = "default_lambda_min")]
    pub lambda_min: f64,
    #[serde(default = "default_lambda_max")]
    pub lambda_max: f64,
    #[serde(default = "default_scan_count")]
    pub count: usize,
    /// Samples with `λ` at most this enter the low-energy fit.
    #[serde(default = "default_low_cutoff")]
    pub low_energy_cutoff: f64,
}

fn default_lambda_min() -> f64 {
    0.05
}
fn default_lambda_max() -> f64 {
    8.0
}
fn default_scan_count() -> usize {
    50
}
fn default_low_cutoff() -> f64 {
    0.1
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            lambda_min: default_lambda_min(),
            lambda_max: default_lambda_max(),
            count: default_scan_count(),
            low_energy_cutoff: default_low_cutoff(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StripSection {
    #[serde(default = "default_re_min")]
    pub re_min: f64,
    #[serde(default = "default_lambda_max")]
    pub re_max: f64,
    #[serde(default = "default_max_depth")]
    pub max_depth: f64,
    #[serde(default = "default_re_count")]
    pub re_count: usize,
    #[serde(default = "default_depth_count")]
    pub depth_count: usize,
}

fn default_re_min() -> f64 {
    0.5
}
fn default_max_depth() -> f64 {
    0.5
}
fn default_re_count() -> usize {
    8
}
fn default_depth_count() -> usize {
    6
}

impl Default for StripSection {
    fn default() -> Self {
        Self {
            re_min: default_re_min(),
            re_max: default_lambda_max(),
            max_depth: default_max_depth(),
            re_count: default_re_count(),
            depth_count: default_depth_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
    #[serde(default)]
    pub weight: EnergyWeight,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Run forward then backward and report the recovery error.
    #[serde(default = "default_true")]
    pub reversal: bool,
    /// Graph-norm order for the decay fit.
    #[serde(default = "default_decay_k")]
    pub decay_k: u32,
}

fn default_t_end() -> f64 {
    1.0
}
fn default_safety() -> f64 {
    0.5
}
fn default_stride() -> usize {
    1
}
fn default_true() -> bool {
    true
}
fn default_decay_k() -> u32 {
    1
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            t_end: default_t_end(),
            safety: default_safety(),
            sample_stride: default_stride(),
            weight: EnergyWeight::default(),
            snapshot_times: Vec::new(),
            reversal: default_true(),
            decay_k: default_decay_k(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoneSection {
    #[serde(default = "default_stone_times")]
    pub times: Vec<f64>,
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default = "StoneSection::default_eps")]
    pub eps: f64,
    #[serde(default = "StoneSection::default_window")]
    pub window: f64,
    #[serde(default = "StoneSection::default_nodes")]
    pub nodes_per_panel: usize,
    #[serde(default = "StoneSection::default_avoidance")]
    pub avoidance: f64,
    #[serde(default = "default_true")]
    pub symmetric: bool,
}

fn default_stone_times() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

impl StoneSection {
    fn default_eps() -> f64 {
        StoneConfig::default().eps
    }
    fn default_window() -> f64 {
        StoneConfig::default().window
    }
    fn default_nodes() -> usize {
        StoneConfig::default().nodes_per_panel
    }
    fn default_avoidance() -> f64 {
        StoneConfig::default().avoidance
    }

    pub fn stone_config(&self) -> StoneConfig {
        StoneConfig {
            eps: self.eps,
            window: self.window,
            nodes_per_panel: self.nodes_per_panel,
            avoidance: self.avoidance,
            symmetric: self.symmetric,
        }
    }
}

impl Default for StoneSection {
    fn default() -> Self {
        Self {
            times: default_stone_times(),
            safety: default_safety(),
            eps: Self::default_eps(),
            window: Self::default_window(),
            nodes_per_panel: Self::default_nodes(),
            avoidance: Self::default_avoidance(),
            symmetric: default_true(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// `[Re λ, Im λ, Re μ, Im μ]`, both in the upper half-plane.
    #[serde(default = "default_pairs")]
    pub pairs: Vec<[f64; 4]>,
    /// Points where Neumann and direct solves are compared when `‖Kχ‖ < ½`.
    #[serde(default = "default_neumann_points")]
    pub neumann_points: Vec<[f64; 2]>,
}

fn default_pairs() -> Vec<[f64; 4]> {
    vec![[1.0, 0.5, 2.0, 0.3], [0.4, 1.0, 3.0, 0.2]]
}
fn default_neumann_points() -> Vec<[f64; 2]> {
    vec![[0.05, 0.0], [0.3, -0.05], [0.5, 0.1]]
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            pairs: default_pairs(),
            neumann_points: default_neumann_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "Tolerances::identity")]
    pub identity: f64,
    #[serde(default = "Tolerances::neumann_agreement")]
    pub neumann_agreement: f64,
    #[serde(default = "Tolerances::neumann_prefactor")]
    pub neumann_prefactor: f64,
    #[serde(default = "Tolerances::ceiling_slack")]
    pub ceiling_slack: f64,
    #[serde(default = "Tolerances::energy_band")]
    pub energy_band: f64,
    #[serde(default = "Tolerances::reversal")]
    pub reversal: f64,
    #[serde(default = "Tolerances::stone")]
    pub stone: f64,
    #[serde(default = "Tolerances::decay_band")]
    pub decay_band: f64,
    #[serde(default = "Tolerances::monotone")]
    pub monotone: f64,
}

impl Tolerances {
    fn identity() -> f64 {
        1e-6
    }
    fn neumann_agreement() -> f64 {
        1e-10
    }
    fn neumann_prefactor() -> f64 {
        3.0
    }
    fn ceiling_slack() -> f64 {
        0.05
    }
    fn energy_band() -> f64 {
        1e-3
    }
    fn reversal() -> f64 {
        1e-6
    }
    fn stone() -> f64 {
        1e-1
    }
    fn decay_band() -> f64 {
        50.0
    }
    fn monotone() -> f64 {
        1e-3
    }

    fn validate(&self) -> Result<()> {
        let all = [
            ("identity", self.identity),
            ("neumann_agreement", self.neumann_agreement),
            ("neumann_prefactor", self.neumann_prefactor),
            ("ceiling_slack", self.ceiling_slack),
            ("energy_band", self.energy_band),
            ("reversal", self.reversal),
            ("stone", self.stone),
            ("decay_band", self.decay_band),
            ("monotone", self.monotone),
        ];
        for (k, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("tolerance `{k}` = {v} must be positive")));
            }
        }
        Ok(())
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            identity: Self::identity(),
            neumann_agreement: Self::neumann_agreement(),
            neumann_prefactor: Self::neumann_prefactor(),
            ceiling_slack: Self::ceiling_slack(),
            energy_band: Self::energy_band(),
            reversal: Self::reversal(),
            stone: Self::stone(),
            decay_band: Self::decay_band(),
            monotone: Self::monotone(),
        }
    }
}

fn default_seed() -> u64 {
    0x5eed
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// One experiment. Only `kind` and `[grid]` are required; every other
/// section falls back to its defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub grid: GridSection,
    #[serde(default)]
    pub profile: ProfileSection,
    #[serde(default)]
    pub masks: MaskSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub strip: StripSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub stone: StoneSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// Parses and validates a TOML experiment description.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn build_grid(&self) -> Result<Grid> {
        build_grid(self.grid.dim, self.grid.extent, self.grid.spacing)
    }

    /// Checks the radii chain `ρ ≤ 0.8·χ` and `χ ≤ 0.8·χ̃` (each cutoff is 1
    /// on the support of the previous one) and that every ball fits
    /// inside the grid, plus the per-kind parameters.
    pub fn validate(&self) -> Result<()> {
        self.tolerances.validate()?;
        let grid = self.build_grid()?;
        let spec = self.profile.spec()?;
        let rho = spec.support_radius();
        let fits = |name: &str, r: f64| -> Result<()> {
            if grid.ball_fits(r) {
                Ok(())
            } else {
                Err(Error::Nesting(format!(
                    "{name} = {r} does not fit inside the grid (half extent {}, spacing {})",
                    grid.half_extent(),
                    grid.spacing()
                )))
            }
        };
        if rho > 0.0 {
            fits("profile radius ρ", rho)?;
        }
        if self.kind.uses_masks() {
            let m = &self.masks;
            if !(m.chi_radius > 0.0) {
                return Err(Error::Config(format!("chi_radius = {} must be positive", m.chi_radius)));
            }
            if m.chi_radius < rho {
                return Err(Error::Nesting(format!(
                    "chi_radius = {} is smaller than the profile radius ρ = {rho}",
                    m.chi_radius
                )));
            }
            if 0.8 * m.chi_radius < rho {
                return Err(Error::Nesting(format!(
                    "chi_radius = {}: the plateau B(0, 0.8·chi_radius) does not cover the profile radius ρ = {rho}",
                    m.chi_radius
                )));
            }
            if let Some(t) = m.chi_tilde_radius {
                if 0.8 * t < m.chi_radius {
                    return Err(Error::Nesting(format!(
                        "chi_tilde_radius = {t}: the plateau B(0, 0.8·chi_tilde_radius) does not cover chi_radius = {}",
                        m.chi_radius
                    )));
                }
                fits("chi_tilde_radius", t)?;
            } else {
                fits("chi_radius", m.chi_radius)?;
            }
            if self.kind == ExperimentKind::Verify && !(m.inner_radius > 0.0 && m.inner_radius <= 0.8 * m.chi_radius) {
                return Err(Error::Nesting(format!(
                    "inner_radius = {} must lie in (0, 0.8·chi_radius = {}]",
                    m.inner_radius,
                    0.8 * m.chi_radius
                )));
            }
        }
        if self.kind.uses_data() {
            let d = &self.data;
            if !(d.r1 > 0.0) {
                return Err(Error::Config(format!("r1 = {} must be positive", d.r1)));
            }
            if d.r2 < d.r1 {
                return Err(Error::Nesting(format!("r2 = {} is smaller than r1 = {}", d.r2, d.r1)));
            }
            fits("r1", d.r1)?;
            fits("r2", d.r2)?;
        }
        match self.kind {
            ExperimentKind::ScanNorm => {
                let s = &self.scan;
                if !(s.lambda_min > 0.0 && s.lambda_max >= s.lambda_min) || s.count == 0 {
                    return Err(Error::Config(format!(
                        "scan range [{}, {}] with {} samples is empty or inverted",
                        s.lambda_min, s.lambda_max, s.count
                    )));
                }
            }
            ExperimentKind::ScanStrip => {
                let s = &self.strip;
                if !(s.max_depth > 0.0 && s.re_max >= s.re_min) || s.re_count == 0 || s.depth_count == 0 {
                    return Err(Error::Config("strip region is empty or inverted".into()));
                }
            }
            ExperimentKind::Simulate | ExperimentKind::FitDecay => {
                let s = &self.simulate;
                if !(s.t_end > 0.0) || !(s.safety > 0.0 && s.safety <= 1.0) || s.sample_stride == 0 {
                    return Err(Error::Config(format!(
                        "simulation needs t_end > 0, safety in (0, 1] and stride ≥ 1 (got {}, {}, {})",
                        s.t_end, s.safety, s.sample_stride
                    )));
                }
                if !(1..=3).contains(&s.decay_k) {
                    return Err(Error::Config(format!("decay_k = {} must be 1, 2 or 3", s.decay_k)));
                }
            }
            ExperimentKind::StoneCompare => {
                let s = &self.stone;
                if s.times.is_empty() || s.times.iter().any(|t| !(*t >= 0.0)) {
                    return Err(Error::Config("stone times must be a nonempty list of t ≥ 0".into()));
                }
                if !(s.safety > 0.0 && s.safety <= 1.0) {
                    return Err(Error::Config(format!("safety = {} must lie in (0, 1]", s.safety)));
                }
                s.stone_config().validate().map_err(|e| Error::Config(e.to_string()))?;
            }
            ExperimentKind::Verify => {
                let v = &self.verify;
                if v.pairs.is_empty() {
                    return Err(Error::Config("verify needs at least one (λ, μ) pair".into()));
                }
                if let Some(p) = v.pairs.iter().find(|p| !(p[1] > 0.0 && p[3] > 0.0)) {
                    return Err(Error::Config(format!("pair {p:?} has Im λ or Im μ ≤ 0")));
                }
            }
        }
        Ok(())
    }
}
