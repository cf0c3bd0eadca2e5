//! Leapfrog time stepping for `∂ₜ²u − c²Δ_h u = 0` and the energies measured
//! along the way.
//!
//! The domain carries no absorbing layer. A run is only allowed when the
//! causal ball `B(0, R₁ + c_max·T + margin)` stays inside the grid, and every
//! step checks that the field has not reached the boundary layer.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{graph_norm, CauchyData, DataPreset, Grid, ProfileSpec, WavespeedProfile};
use crate::model::make_wavespeed;
use crate::{Error, Result};

/// Boundary-layer values above this fraction of the largest `|u|` seen so far
/// stop a run. Dispersive precursors of the stencil sit far below it.
const BOUNDARY_TOLERANCE: f64 = 1e-8;

/// Nodes of slack between the causal ball and the boundary layer.
const CAUSAL_MARGIN_NODES: f64 = 4.0;

/// Weight on `|∂ₜu|²` in the local energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyWeight {
    /// `|∇u|² + |∂ₜu|²`
    #[default]
    Plain,
    /// `|∇u|² + c⁻²|∂ₜu|²`, the conserved density.
    Wavespeed,
}

/// `u` at time `t` and the staggered velocity `v` at `t − Δt/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
    pub dt: f64,
    /// Largest `|u|` over the steps taken so far.
    pub peak: f64,
}

pub fn cfl_timestep(grid: &Grid, profile: &WavespeedProfile, safety: f64) -> f64 {
    safety * grid.spacing() / (profile.c_max * (grid.dim() as f64).sqrt())
}

fn strides(grid: &Grid) -> Vec<usize> {
    let n = grid.per_axis();
    (0..grid.dim())
        .map(|axis| n.pow((grid.dim() - 1 - axis) as u32))
        .collect()
}

/// `c²Δ_h u`, zero extension beyond the grid.
pub fn acceleration(grid: &Grid, profile: &WavespeedProfile, u: &[f64]) -> Vec<f64> {
    let n = grid.per_axis();
    let st = strides(grid);
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let centre = 2.0 * grid.dim() as f64;
    (0..u.len())
        .into_par_iter()
        .map(|idx| {
            let mut acc = -centre * u[idx];
            for &s in &st {
                let k = (idx / s) % n;
                if k > 0 {
                    acc += u[idx - s];
                }
                if k + 1 < n {
                    acc += u[idx + s];
                }
            }
            let c = profile.values[idx];
            c * c * acc * inv_h2
        })
        .collect()
}

impl FieldState {
    /// Starts from `(u₀, u₁)`; the first kick then yields the Taylor
    /// half-step `v(Δt/2) = u₁ + (Δt/2)·c²Δ_h u₀`.
    pub fn new(data: &CauchyData, profile: &WavespeedProfile, grid: &Grid, dt: f64) -> Result<Self> {
        if data.u0.len() != grid.len() || profile.values.len() != grid.len() {
            return Err(Error::Length {
                expected: grid.len(),
                got: data.u0.len().min(profile.values.len()),
            });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Argument(format!("time step {dt} must be positive")));
        }
        let a = acceleration(grid, profile, &data.u0);
        let v = data
            .u1
            .iter()
            .zip(&a)
            .map(|(u1, a)| u1 - 0.5 * dt * a)
            .collect();
        Ok(Self {
            peak: data.u0.iter().fold(0.0, |m, x| m.max(x.abs())),
            u: data.u0.clone(),
            v,
            t: 0.0,
            dt,
        })
    }

    /// `∂ₜu(t)` as the mean of the two neighbouring half-step velocities.
    pub fn velocity(&self, profile: &WavespeedProfile, grid: &Grid) -> Vec<f64> {
        let a = acceleration(grid, profile, &self.u);
        self.v
            .iter()
            .zip(&a)
            .map(|(v, a)| v + 0.5 * self.dt * a)
            .collect()
    }

    /// Negates `∂ₜu` in the staggered sense, so that further steps retrace
    /// the trajectory exactly (up to rounding).
    pub fn reverse(&mut self, profile: &WavespeedProfile, grid: &Grid) {
        let a = acceleration(grid, profile, &self.u);
        for (v, a) in self.v.iter_mut().zip(&a) {
            *v = -(*v + self.dt * a);
        }
    }

    fn boundary_excess(&mut self, grid: &Grid) -> Option<usize> {
        self.peak = self.u.iter().fold(self.peak, |m, v| m.max(v.abs()));
        if self.peak == 0.0 {
            return None;
        }
        let limit = BOUNDARY_TOLERANCE * self.peak;
        (0..self.u.len()).find(|&i| grid.is_boundary(i) && self.u[i].abs() > limit)
    }
}

/// `v += Δt·c²Δ_h u; u += Δt·v; t += Δt`.
pub fn leapfrog_step(state: &mut FieldState, profile: &WavespeedProfile, grid: &Grid) -> Result<()> {
    let a = acceleration(grid, profile, &state.u);
    let dt = state.dt;
    state
        .v
        .par_iter_mut()
        .zip(state.u.par_iter_mut())
        .zip(a.par_iter())
        .for_each(|((v, u), a)| {
            *v += dt * a;
            *u += dt * *v;
        });
    state.t += dt;
    if let Some(i) = state.boundary_excess(grid) {
        return Err(Error::Support(format!(
            "field reached the boundary layer at node {i}, t = {}",
            state.t
        )));
    }
    Ok(())
}

/// Energy of `(u, ∂ₜu)` over nodes with `|x| < radius`.
pub fn energy_in_ball(
    u: &[f64],
    ut: &[f64],
    radius: f64,
    profile: &WavespeedProfile,
    grid: &Grid,
    weight: EnergyWeight,
) -> f64 {
    let n = grid.per_axis();
    let st = strides(grid);
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let sum: f64 = (0..u.len())
        .into_par_iter()
        .filter(|&i| grid.radius(i) < radius)
        .map(|i| {
            let mut g = 0.0;
            for &s in &st {
                let k = (i / s) % n;
                let fwd = if k + 1 < n { u[i + s] } else { 0.0 };
                let bwd = if k > 0 { u[i - s] } else { 0.0 };
                g += 0.5 * ((fwd - u[i]).powi(2) + (u[i] - bwd).powi(2));
            }
            let w = match weight {
                EnergyWeight::Plain => 1.0,
                EnergyWeight::Wavespeed => profile.inv_c2(i),
            };
            g * inv_h2 + w * ut[i] * ut[i]
        })
        .sum();
    sum * grid.weight()
}

pub fn local_energy(
    state: &FieldState,
    r2: f64,
    profile: &WavespeedProfile,
    grid: &Grid,
    weight: EnergyWeight,
) -> Result<f64> {
    if !grid.ball_fits(r2) {
        return Err(Error::Support(format!("R₂ = {r2} does not fit inside the grid")));
    }
    let ut = state.velocity(profile, grid);
    Ok(energy_in_ball(&state.u, &ut, r2, profile, grid, weight))
}

/// Conserved energy `‖∇u‖² + ‖c⁻¹∂ₜu‖²` over the whole grid.
pub fn global_energy(state: &FieldState, profile: &WavespeedProfile, grid: &Grid) -> f64 {
    let ut = state.velocity(profile, grid);
    energy_in_ball(&state.u, &ut, f64::INFINITY, profile, grid, EnergyWeight::Wavespeed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportReport {
    pub pass: bool,
    pub radius: f64,
    /// Largest `|B_h d|` at nodes outside `B(0, R′ + h)`.
    pub max_outside: f64,
}

/// Applies `B_h` and checks the image vanishes outside `B(0, R′ + h)`.
pub fn check_b_support(
    data: &CauchyData,
    r_prime: f64,
    profile: &WavespeedProfile,
    grid: &Grid,
) -> Result<SupportReport> {
    if !(r_prime > data.support_radius) {
        return Err(Error::Argument(format!(
            "R′ = {r_prime} must exceed R₁ = {}",
            data.support_radius
        )));
    }
    let a = acceleration(grid, profile, &data.u0);
    let reach = r_prime + grid.spacing();
    let max_outside = (0..grid.len())
        .filter(|&i| grid.radius(i) >= reach || grid.is_boundary(i))
        .map(|i| data.u1[i].abs().max(a[i].abs()))
        .fold(0.0, f64::max);
    let touches_edge = (0..grid.len())
        .any(|i| grid.is_boundary(i) && (data.u0[i] != 0.0 || data.u1[i] != 0.0));
    Ok(SupportReport {
        pass: max_outside == 0.0 && !touches_edge,
        radius: r_prime,
        max_outside,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub t_end: f64,
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
    pub r2: f64,
    #[serde(default)]
    pub weight: EnergyWeight,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

fn default_safety() -> f64 {
    0.5
}

fn default_stride() -> usize {
    1
}

impl SimulationConfig {
    pub fn new(t_end: f64, r2: f64) -> Self {
        Self {
            t_end,
            safety: default_safety(),
            sample_stride: default_stride(),
            r2,
            weight: EnergyWeight::default(),
            snapshot_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    pub local: Vec<f64>,
    pub global: Vec<f64>,
    /// `‖d‖_{D(B_h^k)}` for `k = 1, 2, 3`, absent when `B_h^k d` leaves the grid.
    pub graph_norms: [Option<f64>; 3],
}

impl EnergyTrace {
    /// `(max − min)/max` of the global energy.
    pub fn global_band(&self) -> f64 {
        let max = self.global.iter().copied().fold(f64::MIN, f64::max);
        let min = self.global.iter().copied().fold(f64::MAX, f64::min);
        if max <= 0.0 {
            0.0
        } else {
            (max - min) / max
        }
    }
}

/// Synchronized `(u, ∂ₜu)` at a sampled time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
    pub ut: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub trace: EnergyTrace,
    pub snapshots: Vec<Snapshot>,
    pub dt: f64,
    pub steps: usize,
    pub final_state: FieldState,
}

/// Radius the field can reach by `t_end`, plus the numerical margin.
pub fn causal_radius(data: &CauchyData, profile: &WavespeedProfile, grid: &Grid, t_end: f64) -> f64 {
    data.support_radius + profile.c_max * t_end + CAUSAL_MARGIN_NODES * grid.spacing()
}

fn step_count(grid: &Grid, profile: &WavespeedProfile, cfg: &SimulationConfig) -> Result<usize> {
    if !(cfg.safety > 0.0 && cfg.safety <= 1.0) {
        return Err(Error::Argument(format!("CFL safety {} not in (0, 1]", cfg.safety)));
    }
    if !(cfg.t_end >= 0.0 && cfg.t_end.is_finite()) {
        return Err(Error::Argument(format!("T_end = {} must be nonnegative", cfg.t_end)));
    }
    if cfg.sample_stride == 0 {
        return Err(Error::Argument("sample stride must be at least 1".into()));
    }
    let base = (cfg.t_end / cfl_timestep(grid, profile, cfg.safety)).ceil() as usize;
    // smallest admissible count that lands every snapshot on a step, if any
    let lands = |n: usize| {
        cfg.snapshot_times.iter().all(|&t| {
            let k = t * n as f64 / cfg.t_end;
            (k - k.round()).abs() < 1e-9
        })
    };
    if base == 0 {
        return Ok(0);
    }
    Ok((base..=4 * base).find(|&n| lands(n)).unwrap_or(base))
}

pub fn run_simulation(
    data: &CauchyData,
    profile: &WavespeedProfile,
    grid: &Grid,
    cfg: &SimulationConfig,
) -> Result<SimulationOutput> {
    let steps = step_count(grid, profile, cfg)?;
    run_steps(data, profile, grid, cfg, steps)
}

fn run_steps(
    data: &CauchyData,
    profile: &WavespeedProfile,
    grid: &Grid,
    cfg: &SimulationConfig,
    steps: usize,
) -> Result<SimulationOutput> {
    let reach = causal_radius(data, profile, grid, cfg.t_end);
    if !grid.ball_fits(reach) {
        return Err(Error::Support(format!(
            "T_end = {} needs the ball of radius {reach:.4} inside the grid, half extent is {}",
            cfg.t_end,
            grid.half_extent()
        )));
    }
    if !grid.ball_fits(cfg.r2) {
        return Err(Error::Support(format!("R₂ = {} does not fit inside the grid", cfg.r2)));
    }
    let dt = if steps == 0 { 1.0 } else { cfg.t_end / steps as f64 };
    let mut state = FieldState::new(data, profile, grid, dt)?;
    let snap_steps: Vec<usize> = cfg
        .snapshot_times
        .iter()
        .map(|&t| {
            if !(0.0..=cfg.t_end + 1e-12).contains(&t) {
                Err(Error::Argument(format!("snapshot time {t} outside [0, {}]", cfg.t_end)))
            } else {
                Ok((t / dt).round() as usize)
            }
        })
        .collect::<Result<_>>()?;
    let norms = [1, 2, 3].map(|k| graph_norm(data, k, profile, grid).ok());
    let mut trace = EnergyTrace {
        times: Vec::new(),
        local: Vec::new(),
        global: Vec::new(),
        graph_norms: norms,
    };
    let mut snapshots = Vec::new();
    for step in 0..=steps {
        if step > 0 {
            leapfrog_step(&mut state, profile, grid)?;
        }
        let sample = step % cfg.sample_stride == 0 || step == steps;
        let snap = snap_steps.contains(&step);
        if sample || snap {
            let ut = state.velocity(profile, grid);
            let t = step as f64 * dt;
            if sample {
                trace.times.push(t);
                trace.local.push(energy_in_ball(&state.u, &ut, cfg.r2, profile, grid, cfg.weight));
                trace.global.push(energy_in_ball(
                    &state.u,
                    &ut,
                    f64::INFINITY,
                    profile,
                    grid,
                    EnergyWeight::Wavespeed,
                ));
            }
            for _ in snap_steps.iter().filter(|&&s| s == step) {
                snapshots.push(Snapshot {
                    t,
                    u: state.u.clone(),
                    ut: ut.clone(),
                });
            }
        }
    }
    Ok(SimulationOutput {
        trace,
        snapshots,
        dt,
        steps,
        final_state: state,
    })
}

/// Relative error after evolving to `t_end`, reversing, and evolving back.
pub fn time_reversal_error(
    data: &CauchyData,
    profile: &WavespeedProfile,
    grid: &Grid,
    t_end: f64,
    safety: f64,
) -> Result<f64> {
    let cfg = SimulationConfig {
        safety,
        ..SimulationConfig::new(t_end, 0.0)
    };
    let steps = step_count(grid, profile, &cfg)?;
    if !grid.ball_fits(causal_radius(data, profile, grid, t_end)) {
        return Err(Error::Support(format!("T_end = {t_end} violates the causal margin")));
    }
    let mut state = FieldState::new(data, profile, grid, t_end / steps.max(1) as f64)?;
    for _ in 0..steps {
        leapfrog_step(&mut state, profile, grid)?;
    }
    state.reverse(profile, grid);
    for _ in 0..steps {
        leapfrog_step(&mut state, profile, grid)?;
    }
    let ut = state.velocity(profile, grid);
    let mut diff = 0.0;
    let mut base = 0.0;
    for i in 0..grid.len() {
        diff += (state.u[i] - data.u0[i]).powi(2) + (ut[i] + data.u1[i]).powi(2);
        base += data.u0[i].powi(2) + data.u1[i].powi(2);
    }
    if base == 0.0 {
        return Ok(diff.sqrt());
    }
    Ok((diff / base).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub spacings: Vec<f64>,
    /// `‖u_h − u_{h/3}‖` and `‖u_{h/3} − u_{h/9}‖` on the coarsest nodes.
    pub differences: Vec<f64>,
    pub order: f64,
}

/// Observed order from three runs with `h`, `Δt` refined together by 3.
pub fn self_convergence(
    base: &Grid,
    spec: &ProfileSpec,
    preset: &DataPreset,
    r1: f64,
    t_end: f64,
    safety: f64,
) -> Result<ConvergenceReport> {
    let grids = [base.clone(), base.refined(3)?, base.refined(9)?];
    let mut cfg = SimulationConfig::new(t_end, 0.0);
    cfg.safety = safety;
    cfg.sample_stride = usize::MAX;
    let coarse_profile = make_wavespeed(spec, base)?;
    let steps0 = step_count(base, &coarse_profile, &cfg)?.max(1);
    let mut fields = Vec::new();
    for (level, g) in grids.iter().enumerate() {
        let p = make_wavespeed(spec, g)?;
        let d = CauchyData::from_preset(preset, g, r1)?;
        let out = run_steps(&d, &p, g, &cfg, steps0 * 3usize.pow(level as u32))?;
        let factor = 3i64.pow(level as u32);
        let sampled: Vec<f64> = (0..base.len())
            .map(|i| {
                let node = base.multi_index(i);
                let mut fine = [0i64; 3];
                for axis in 0..base.dim() {
                    fine[axis] = factor * node[axis] + (factor - 1) / 2;
                }
                out.final_state.u[g.linear_index(fine).expect("nested node")]
            })
            .collect();
        fields.push(sampled);
    }
    let dist = |a: &[f64], b: &[f64]| {
        (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() * base.weight()).sqrt()
    };
    let e1 = dist(&fields[0], &fields[1]);
    let e2 = dist(&fields[1], &fields[2]);
    Ok(ConvergenceReport {
        spacings: grids.iter().map(|g| g.spacing()).collect(),
        differences: vec![e1, e2],
        order: (e1 / e2).ln() / 3f64.ln(),
    })
}
