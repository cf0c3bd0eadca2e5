//! Evolution through the spectral measure of `B`: the shifted-line form of
//! Stone's formula applied to the resolvent `R_B(λ) = (B − λ)⁻¹`.
//!
//! `R(λ) = (−c²Δ_h − λ²)⁻¹` is realized on the periodic box spanned by the
//! grid ([`LatticeResolvent`]), so the reconstruction uses the same spatial
//! operator as the leapfrog solver and agrees with it inside the causal
//! window. The box spectrum is discrete; with the shift `ε` each eigenvalue
//! contributes a Lorentzian of width `ε`, which the quadrature resolves with
//! panels of width `2ε` below the top of the spectrum and geometrically
//! growing panels above it. The full-line integral equals `e^{−εt}e^{−itB}`,
//! so the result is multiplied by `e^{εt}`.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{apply_b, h_norm, CauchyData, FieldPair, Grid, WavespeedProfile};
use crate::perturbed::LatticeResolvent;
use crate::wave::{energy_in_ball, run_simulation, EnergyWeight, SimulationConfig};
use crate::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Quadrature nodes evaluated per batch before their sum is accumulated in
/// order, keeping the reduction independent of the thread count.
const BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoneConfig {
    /// Contour shift `ε`.
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Frequency window `[−Λ, Λ]`.
    #[serde(default = "default_window")]
    pub window: f64,
    /// Gauss–Legendre nodes per panel.
    #[serde(default = "default_nodes")]
    pub nodes_per_panel: usize,
    /// Radius of the interval around `λ = 0` left out of the integral.
    #[serde(default = "default_avoidance")]
    pub avoidance: f64,
    /// Use the reflection `λ ↦ −λ̄` and the conjugation symmetry of real data
    /// to evaluate one resolvent per node on `λ > 0` only.
    #[serde(default = "default_symmetric")]
    pub symmetric: bool,
}

fn default_eps() -> f64 {
    1e-2
}
fn default_window() -> f64 {
    64.0
}
fn default_nodes() -> usize {
    10
}
fn default_avoidance() -> f64 {
    1e-3
}
fn default_symmetric() -> bool {
    true
}

impl Default for StoneConfig {
    fn default() -> Self {
        Self {
            eps: default_eps(),
            window: default_window(),
            nodes_per_panel: default_nodes(),
            avoidance: default_avoidance(),
            symmetric: default_symmetric(),
        }
    }
}

impl StoneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 0.5) {
            return Err(Error::Argument(format!("ε = {} not in (0, 0.5]", self.eps)));
        }
        if !(self.avoidance >= 1e-4) {
            return Err(Error::Argument(format!(
                "avoidance radius {} below 1e-4",
                self.avoidance
            )));
        }
        if self.nodes_per_panel < 2 || self.nodes_per_panel % 2 != 0 {
            return Err(Error::Argument(format!(
                "nodes per panel {} must be even and at least 2",
                self.nodes_per_panel
            )));
        }
        if !(self.window > self.avoidance && self.window.is_finite()) {
            return Err(Error::Argument(format!(
                "window Λ = {} must exceed the avoidance radius",
                self.window
            )));
        }
        Ok(())
    }
}

/// Upper bound `c_max·2√n/h` on the frequencies of `B_h`.
pub fn frequency_bound(grid: &Grid, profile: &WavespeedProfile) -> f64 {
    profile.c_max * 2.0 * (grid.dim() as f64).sqrt() / grid.spacing()
}

/// Panels covering `[avoidance, Λ]`: width `2ε` up to `ω_max + 20ε`, then
/// `2·max(ε, a − ω_max)` so each panel stays two half-widths away from the
/// spectrum.
pub fn panels(cfg: &StoneConfig, omega_max: f64) -> Vec<(f64, f64)> {
    let dense_end = (omega_max + 20.0 * cfg.eps).min(cfg.window);
    let mut out = Vec::new();
    let mut a = cfg.avoidance;
    while a < cfg.window * (1.0 - 1e-14) {
        let width = if a < dense_end {
            2.0 * cfg.eps
        } else {
            2.0 * cfg.eps.max(a - omega_max)
        };
        let b = (a + width).min(cfg.window);
        out.push((a, b));
        a = b;
    }
    out
}

fn quadrature_nodes(cfg: &StoneConfig, omega_max: f64) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(cfg.nodes_per_panel).expect("validated"));
    let pairs = rule.as_node_weight_pairs();
    panels(cfg, omega_max)
        .into_iter()
        .flat_map(|(a, b)| {
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            pairs.iter().map(move |&(x, w)| (mid + half * x, half * w))
        })
        .collect()
}

fn is_zero(v: &[Complex64]) -> bool {
    v.iter().all(|z| z.re == 0.0 && z.im == 0.0)
}

/// `(R(λ)u₀, R(λ)u₁)`, skipping zero components.
fn resolvent_parts(
    lambda: Complex64,
    data: &FieldPair,
    profile: &WavespeedProfile,
    grid: &Grid,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let r = LatticeResolvent::new(grid, profile, lambda)?;
    let zero = vec![Complex64::new(0.0, 0.0); grid.len()];
    let a = if is_zero(&data.u0) { zero.clone() } else { r.apply(&data.u0) };
    let b = if is_zero(&data.u1) { zero } else { r.apply(&data.u1) };
    Ok((a, b))
}

/// `(λRu₀ + iRu₁, −iλ²Ru₀ − iu₀ + λRu₁)`.
fn combine(lambda: Complex64, u0: &[Complex64], ru0: &[Complex64], ru1: &[Complex64]) -> FieldPair {
    let l2 = lambda * lambda;
    FieldPair {
        u0: ru0.iter().zip(ru1).map(|(a, b)| lambda * a + I * b).collect(),
        u1: ru0
            .iter()
            .zip(ru1)
            .zip(u0)
            .map(|((a, b), f)| -I * l2 * a - I * f + lambda * b)
            .collect(),
    }
}

/// `R_B(λ)(u₀, u₁)` for `Im λ ≠ 0`, on the whole grid.
pub fn apply_rb(
    lambda: Complex64,
    data: &FieldPair,
    profile: &WavespeedProfile,
    grid: &Grid,
) -> Result<FieldPair> {
    if lambda.im == 0.0 {
        return Err(Error::Argument(format!("R_B(λ) needs Im λ ≠ 0, got λ = {lambda}")));
    }
    if data.u0.len() != grid.len() || data.u1.len() != grid.len() {
        return Err(Error::Length {
            expected: grid.len(),
            got: data.u0.len().min(data.u1.len()),
        });
    }
    let (a, b) = resolvent_parts(lambda, data, profile, grid)?;
    Ok(combine(lambda, &data.u0, &a, &b))
}

/// Reconstructed `(u(t), ∂ₜu(t))` on the whole grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StoneField {
    pub t: f64,
    pub u: Vec<f64>,
    pub ut: Vec<f64>,
    /// `‖Im‖/‖Re‖` before the imaginary part was dropped; zero in the
    /// symmetric evaluation, where the result is real by construction.
    pub imag_ratio: f64,
}

/// Accumulates `Σ w·g(λ)` for each time in `times`, batch by batch.
struct Accumulator {
    u: Vec<Vec<Complex64>>,
    ut: Vec<Vec<Complex64>>,
}

impl Accumulator {
    fn new(times: usize, len: usize) -> Self {
        let zero = vec![Complex64::new(0.0, 0.0); len];
        Self {
            u: vec![zero.clone(); times],
            ut: vec![zero; times],
        }
    }

    fn add(&mut self, k: usize, pair: &FieldPair, coef: Complex64) {
        self.u[k].iter_mut().zip(&pair.u0).for_each(|(s, v)| *s += coef * v);
        self.ut[k].iter_mut().zip(&pair.u1).for_each(|(s, v)| *s += coef * v);
    }
}

fn difference(a: &FieldPair, b: &FieldPair) -> FieldPair {
    FieldPair {
        u0: a.u0.iter().zip(&b.u0).map(|(x, y)| x - y).collect(),
        u1: a.u1.iter().zip(&b.u1).map(|(x, y)| x - y).collect(),
    }
}

/// `D(λ) = R_B(λ+iε)f − R_B(λ−iε)f` for real `f`, from one resolvent solve:
/// `R(λ−iε)g = conj(R(λ+iε)g)` for real `g`.
fn jump_real(
    lambda: f64,
    eps: f64,
    data: &FieldPair,
    profile: &WavespeedProfile,
    grid: &Grid,
) -> Result<FieldPair> {
    let up = Complex64::new(lambda, eps);
    let (a, b) = resolvent_parts(up, data, profile, grid)?;
    let ac: Vec<Complex64> = a.iter().map(|z| z.conj()).collect();
    let bc: Vec<Complex64> = b.iter().map(|z| z.conj()).collect();
    Ok(difference(
        &combine(up, &data.u0, &a, &b),
        &combine(up.conj(), &data.u0, &ac, &bc),
    ))
}

fn jump_general(
    lambda: f64,
    eps: f64,
    data: &FieldPair,
    profile: &WavespeedProfile,
    grid: &Grid,
) -> Result<FieldPair> {
    let plus = apply_rb(Complex64::new(lambda, eps), data, profile, grid)?;
    let minus = apply_rb(Complex64::new(lambda, -eps), data, profile, grid)?;
    Ok(difference(&plus, &minus))
}

fn check_finite(pair: &FieldPair, lambda: f64) -> Result<()> {
    if pair.u0.iter().chain(&pair.u1).all(|z| z.is_finite()) {
        Ok(())
    } else {
        Err(Error::Quadrature(Complex64::new(lambda, 0.0)))
    }
}

/// `e^{−itB}(u₀, u₁)` at each requested time, from one sweep over the
/// quadrature nodes.
pub fn stone_evolve_many(
    data: &CauchyData,
    times: &[f64],
    cfg: &StoneConfig,
    profile: &WavespeedProfile,
    grid: &Grid,
) -> Result<Vec<StoneField>> {
    cfg.validate()?;
    if let Some(&t) = times.iter().find(|&&t| !(t >= 0.0 && t.is_finite())) {
        return Err(Error::Argument(format!("time {t} must be nonnegative")));
    }
    let pair = FieldPair::from_data(data);
    let len = grid.len();
    let mut acc = Accumulator::new(times.len(), len);
    if !data.is_zero() {
        let half_line = quadrature_nodes(cfg, frequency_bound(grid, profile));
        let nodes: Vec<(f64, f64)> = if cfg.symmetric {
            half_line
        } else {
            half_line
                .iter()
                .rev()
                .map(|&(x, w)| (-x, w))
                .chain(half_line.iter().copied())
                .collect()
        };
        for batch in nodes.chunks(BATCH) {
            let jumps: Vec<FieldPair> = batch
                .par_iter()
                .map(|&(lambda, _)| {
                    let d = if cfg.symmetric {
                        jump_real(lambda, cfg.eps, &pair, profile, grid)?
                    } else {
                        jump_general(lambda, cfg.eps, &pair, profile, grid)?
                    };
                    check_finite(&d, lambda)?;
                    Ok(d)
                })
                .collect::<Result<_>>()?;
            for (d, &(lambda, w)) in jumps.iter().zip(batch) {
                for (k, &t) in times.iter().enumerate() {
                    let phase = Complex64::from_polar(1.0, -t * lambda);
                    // symmetric: (1/π) Im(e^{−itλ}D) = Re(e^{−itλ}D/(πi));
                    // general: (2πi)⁻¹ e^{−itλ}D
                    let coef = if cfg.symmetric {
                        phase * w / (PI * I)
                    } else {
                        phase * w / (2.0 * PI * I)
                    };
                    acc.add(k, d, coef);
                }
            }
        }
    }
    Ok(times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let growth = (cfg.eps * t).exp();
            let re_u: Vec<f64> = acc.u[k].iter().map(|z| z.re * growth).collect();
            let re_ut: Vec<f64> = acc.ut[k].iter().map(|z| z.re * growth).collect();
            let norm = |f: &dyn Fn(&Complex64) -> f64| -> f64 {
                acc.u[k].iter().chain(&acc.ut[k]).map(|z| f(z).powi(2)).sum::<f64>().sqrt()
            };
            let re = norm(&|z| z.re);
            let im = norm(&|z| z.im);
            StoneField {
                t,
                u: re_u,
                ut: re_ut,
                imag_ratio: if cfg.symmetric || re == 0.0 { 0.0 } else { im / re },
            }
        })
        .collect())
}

pub fn stone_evolve(
    data: &CauchyData,
    t: f64,
    cfg: &StoneConfig,
    profile: &WavespeedProfile,
    grid: &Grid,
) -> Result<StoneField> {
    Ok(stone_evolve_many(data, &[t], cfg, profile, grid)?.remove(0))
}

/// `‖S_{R₂}(a) − S_{R₂}(b)‖/‖S_{R₂}(b)‖`, with `S_R(u, uₜ) = (∇u, uₜ)|_{B(0,R)}`.
pub fn restricted_discrepancy(
    a: (&[f64], &[f64]),
    b: (&[f64], &[f64]),
    r2: f64,
    profile: &WavespeedProfile,
    grid: &Grid,
) -> f64 {
    let du: Vec<f64> = a.0.iter().zip(b.0).map(|(x, y)| x - y).collect();
    let dut: Vec<f64> = a.1.iter().zip(b.1).map(|(x, y)| x - y).collect();
    let diff = energy_in_ball(&du, &dut, r2, profile, grid, EnergyWeight::Plain);
    let base = energy_in_ball(b.0, b.1, r2, profile, grid, EnergyWeight::Plain);
    if base == 0.0 {
        diff.sqrt()
    } else {
        (diff / base).sqrt()
    }
}

/// Relative error of the `t = 0` reconstruction against the data itself.
pub fn self_error(
    data: &CauchyData,
    r2: f64,
    cfg: &StoneConfig,
    profile: &WavespeedProfile,
    grid: &Grid,
) -> Result<f64> {
    let f = stone_evolve(data, 0.0, cfg, profile, grid)?;
    Ok(restricted_discrepancy(
        (&f.u, &f.ut),
        (&data.u0, &data.u1),
        r2,
        profile,
        grid,
    ))
}

/// `‖B_h d‖_H/Λ`, the size of the spectral tail outside the window.
pub fn window_tail_bound(
    data: &CauchyData,
    window: f64,
    profile: &WavespeedProfile,
    grid: &Grid,
) -> Option<f64> {
    let image = apply_b(&FieldPair::from_data(data), profile, grid).ok()?;
    Some(h_norm(&image, profile, grid).ok()? / window)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub t: f64,
    pub l2_discrepancy: f64,
    pub energy_discrepancy: f64,
    pub eps: f64,
    pub lambda_window: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub r2: f64,
    pub quadrature_nodes: usize,
    pub window_tail_bound: Option<f64>,
    pub max_imag_ratio: f64,
}

/// Stone reconstruction against the leapfrog run at each `t`, both
/// restricted to `B(0, R₂)`.
pub fn compare_propagators(
    data: &CauchyData,
    times: &[f64],
    stone: &StoneConfig,
    safety: f64,
    r2: f64,
    profile: &WavespeedProfile,
    grid: &Grid,
) -> Result<ComparisonReport> {
    stone.validate()?;
    let t_end = times.iter().copied().fold(0.0, f64::max);
    let mut sim = SimulationConfig::new(t_end, r2);
    sim.safety = safety;
    sim.sample_stride = usize::MAX;
    sim.snapshot_times = times.to_vec();
    let run = run_simulation(data, profile, grid, &sim)?;
    let actual: Vec<f64> = run.snapshots.iter().map(|s| s.t).collect();
    let fields = stone_evolve_many(data, &actual, stone, profile, grid)?;
    let rows = run
        .snapshots
        .iter()
        .zip(&fields)
        .map(|(s, f)| {
            let e_sim = energy_in_ball(&s.u, &s.ut, r2, profile, grid, EnergyWeight::Plain);
            let e_stone = energy_in_ball(&f.u, &f.ut, r2, profile, grid, EnergyWeight::Plain);
            ComparisonRow {
                t: s.t,
                l2_discrepancy: restricted_discrepancy((&f.u, &f.ut), (&s.u, &s.ut), r2, profile, grid),
                energy_discrepancy: if e_sim == 0.0 {
                    e_stone
                } else {
                    (e_stone - e_sim).abs() / e_sim
                },
                eps: stone.eps,
                lambda_window: stone.window,
            }
        })
        .collect();
    Ok(ComparisonReport {
        rows,
        r2,
        quadrature_nodes: quadrature_nodes(stone, frequency_bound(grid, profile)).len(),
        window_tail_bound: window_tail_bound(data, stone.window, profile, grid),
        max_imag_ratio: fields.iter().map(|f| f.imag_ratio).fold(0.0, f64::max),
    })
}
