//! Sweeps of `‖χR(λ)χ‖` along the real axis and over rectangles below it.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::{operator_norm, weighted_matrix_norm, NormOptions};
use crate::model::{Grid, WavespeedProfile};
use crate::perturbed::{
    gradient_cutoff_resolvent, solve_problem, CutoffProblem, Method, SolveOptions,
};
use crate::special::on_branch_cut;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormSample {
    pub re_lambda: f64,
    pub im_lambda: f64,
    /// `‖χR(λ)χ‖` on `L²_c`; NaN when the point is flagged as a pole.
    pub norm: f64,
    /// `‖∇χR(λ)χ‖` from `L²_c` to `L²`, when requested.
    pub grad_norm: Option<f64>,
    pub k_norm: f64,
    pub method: Method,
    pub pole_flag: bool,
    pub cond: f64,
}

impl NormSample {
    pub fn lambda(&self) -> Complex64 {
        Complex64::new(self.re_lambda, self.im_lambda)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CeilingCheck {
    pub re_lambda: f64,
    pub im_lambda: f64,
    pub norm: f64,
    /// `1/dist(λ², [0, ∞))`
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnDepth {
    pub re_lambda: f64,
    /// Deepest sampled `|Im λ|` reached with no pole flag above it in the column.
    pub pole_free_depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScanRegion {
    RealAxis {
        lambda_min: f64,
        lambda_max: f64,
        count: usize,
    },
    LowerHalfPlane {
        re_min: f64,
        re_max: f64,
        max_depth: f64,
        re_count: usize,
        depth_count: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub region: ScanRegion,
    pub dim: usize,
    pub per_axis: usize,
    pub spacing: f64,
    pub profile: String,
    pub chi_radius: f64,
    /// Largest sample `λ` below which every real-axis sample has `‖Kχ‖ < ½`.
    pub epsilon0: Option<f64>,
    pub columns: Vec<ColumnDepth>,
    pub ceiling: Vec<CeilingCheck>,
    pub samples: Vec<NormSample>,
    pub warnings: Vec<String>,
}

impl ScanReport {
    pub fn pole_count(&self) -> usize {
        self.samples.iter().filter(|s| s.pole_flag).count()
    }

    pub fn ceiling_holds(&self, slack: f64) -> bool {
        self.ceiling.iter().all(|c| c.norm <= c.bound * (1.0 + slack))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub solve: SolveOptions,
    /// Also compute `‖∇χR(λ)χ‖` with `χ̃` of this radius.
    pub gradient_radius: Option<f64>,
    /// Half-width of the excluded neighbourhood of `Re λ = 0`.
    pub zero_exclusion: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            solve: SolveOptions::default(),
            gradient_radius: None,
            zero_exclusion: 1e-4,
        }
    }
}

/// `1/dist(λ², [0, ∞))` for `Im λ > 0`.
pub fn spectral_ceiling(lambda: Complex64) -> f64 {
    let z = lambda * lambda;
    let dist = if z.re >= 0.0 { z.im.abs() } else { z.norm() };
    1.0 / dist
}

/// Geometric spacing below 1 and linear spacing above, `count` points in all.
pub fn real_axis_points(lambda_min: f64, lambda_max: f64, count: usize) -> Result<Vec<f64>> {
    if !(lambda_min > 0.0) {
        return Err(Error::Argument(format!("λ_min = {lambda_min} must be positive")));
    }
    if !(lambda_max > lambda_min) || count < 2 {
        return Err(Error::Argument(format!(
            "need λ_min < λ_max and count ≥ 2, got [{lambda_min}, {lambda_max}], {count}"
        )));
    }
    let geometric = |a: f64, b: f64, n: usize| -> Vec<f64> {
        (0..n)
            .map(|k| a * (b / a).powf(k as f64 / (n - 1).max(1) as f64))
            .collect()
    };
    let linear = |a: f64, b: f64, n: usize| -> Vec<f64> {
        (0..n)
            .map(|k| a + (b - a) * k as f64 / (n - 1).max(1) as f64)
            .collect()
    };
    if lambda_max <= 1.0 {
        return Ok(geometric(lambda_min, lambda_max, count));
    }
    if lambda_min >= 1.0 {
        return Ok(linear(lambda_min, lambda_max, count));
    }
    let log_len = (1.0 / lambda_min).ln();
    let lin_len = lambda_max - 1.0;
    let n_geo = ((count as f64 * log_len / (log_len + lin_len)).round() as usize).clamp(1, count - 1);
    let n_lin = count - n_geo;
    // geometric part stops one step short of 1, the linear part starts at 1
    let mut pts = geometric(lambda_min, 1.0, n_geo + 1);
    pts.pop();
    if n_lin == 1 {
        pts.push(lambda_max);
    } else {
        pts.extend(linear(1.0, lambda_max, n_lin));
    }
    Ok(pts)
}

/// `‖χR(λ)χ‖` on `L²_c` at one point, with the solve diagnostics.
pub fn sample_at(
    problem: &CutoffProblem,
    lambda: Complex64,
    opts: &ScanOptions,
) -> Result<NormSample> {
    let (x, report) = solve_problem(problem, lambda, Method::Direct, &opts.solve)?;
    let mut sample = NormSample {
        re_lambda: lambda.re,
        im_lambda: lambda.im,
        norm: f64::NAN,
        grad_norm: None,
        k_norm: report.k_norm,
        method: Method::Direct,
        pole_flag: report.pole_flag,
        cond: report.condition,
    };
    if report.pole_flag {
        return Ok(sample);
    }
    let w = &problem.inv_c2;
    sample.norm = weighted_matrix_norm(&x.matrix, w, w, &opts.solve.norm)?.value;
    if let Some(outer) = opts.gradient_radius {
        let grads = gradient_cutoff_resolvent(
            lambda,
            problem.profile,
            problem.grid,
            problem.cutoff.radius,
            outer,
            &opts.solve,
        )?;
        sample.grad_norm = Some(stacked_norm(&grads, &problem.inv_c2, &opts.solve.norm)?);
    }
    Ok(sample)
}

/// Norm of the column of gradient components from `L²_c` to `L²`.
fn stacked_norm(
    parts: &[crate::free::KernelMatrix],
    right_weights: &[f64],
    opts: &NormOptions,
) -> Result<f64> {
    let n = right_weights.len();
    let scale: Vec<f64> = right_weights.iter().map(|w| 1.0 / w.sqrt()).collect();
    let rows = parts[0].matrix.rows();
    Ok(operator_norm(
        n,
        |x| {
            let xs: Vec<Complex64> = x.iter().zip(&scale).map(|(v, s)| v * s).collect();
            Ok(parts.iter().flat_map(|p| p.matrix.matvec(&xs)).collect())
        },
        |y| {
            let mut out = vec![Complex64::new(0.0, 0.0); n];
            for (k, p) in parts.iter().enumerate() {
                let part = p.matrix.matvec_adjoint(&y[k * rows..(k + 1) * rows]);
                out.iter_mut().zip(part).for_each(|(o, v)| *o += v);
            }
            Ok(out.iter().zip(&scale).map(|(v, s)| v * s).collect())
        },
        opts,
    )?
    .value)
}

fn resolution_warnings(grid: &Grid, lambdas: &[Complex64]) -> Vec<String> {
    let limit = std::f64::consts::FRAC_PI_2 / grid.spacing();
    match lambdas.iter().map(|l| l.re.abs()).fold(0.0, f64::max) {
        m if m > limit => vec![format!(
            "|Re λ| up to {m} exceeds the 4-nodes-per-wavelength limit {limit:.3}"
        )],
        _ => Vec::new(),
    }
}

fn ceiling_checks(problem: &CutoffProblem, points: &[Complex64], opts: &ScanOptions) -> Result<Vec<CeilingCheck>> {
    points
        .par_iter()
        .map(|&l| {
            let s = sample_at(problem, l, opts)?;
            Ok(CeilingCheck {
                re_lambda: l.re,
                im_lambda: l.im,
                norm: s.norm,
                bound: spectral_ceiling(l),
            })
        })
        .collect()
}

pub fn scan_real_axis(
    lambda_min: f64,
    lambda_max: f64,
    count: usize,
    profile: &WavespeedProfile,
    grid: &Grid,
    chi_radius: f64,
    opts: &ScanOptions,
) -> Result<ScanReport> {
    let pts = real_axis_points(lambda_min, lambda_max, count)?;
    let problem = CutoffProblem::new(grid, profile, chi_radius)?;
    let lambdas: Vec<Complex64> = pts.iter().map(|&l| Complex64::new(l, 0.0)).collect();
    let samples: Vec<NormSample> = lambdas
        .par_iter()
        .map(|&l| sample_at(&problem, l, opts))
        .collect::<Result<_>>()?;
    let epsilon0 = samples
        .iter()
        .take_while(|s| s.k_norm < 0.5)
        .last()
        .map(|s| s.re_lambda);
    let ceiling = ceiling_checks(&problem, &[Complex64::new(0.0, 2.0)], opts)?;
    Ok(ScanReport {
        region: ScanRegion::RealAxis {
            lambda_min,
            lambda_max,
            count,
        },
        dim: grid.dim(),
        per_axis: grid.per_axis(),
        spacing: grid.spacing(),
        profile: profile.spec.name().to_string(),
        chi_radius,
        epsilon0,
        columns: Vec::new(),
        ceiling,
        warnings: resolution_warnings(grid, &lambdas),
        samples,
    })
}

/// Depths from `max_depth/100` to `max_depth`, geometric.
pub fn depth_points(max_depth: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![max_depth];
    }
    (0..count)
        .map(|k| max_depth * 10f64.powf(-2.0 * (count - 1 - k) as f64 / (count - 1) as f64))
        .collect()
}

pub fn scan_lower_halfplane(
    re_range: (f64, f64),
    max_depth: f64,
    grid_counts: (usize, usize),
    profile: &WavespeedProfile,
    grid: &Grid,
    chi_radius: f64,
    opts: &ScanOptions,
) -> Result<ScanReport> {
    let (re_min, re_max) = re_range;
    let (re_count, depth_count) = grid_counts;
    if !(max_depth > 0.0) || re_count == 0 || depth_count == 0 || !(re_max >= re_min) {
        return Err(Error::Argument("empty or inverted lower half-plane region".into()));
    }
    if re_min <= opts.zero_exclusion && re_max >= -opts.zero_exclusion {
        let cut = Complex64::new(0.0, -max_depth);
        if grid.dim() == 2 && on_branch_cut(cut) {
            return Err(Error::BranchCut(cut));
        }
        return Err(Error::Argument(format!(
            "Re λ range [{re_min}, {re_max}] enters the excluded neighbourhood of 0"
        )));
    }
    let problem = CutoffProblem::new(grid, profile, chi_radius)?;
    let res: Vec<f64> = if re_count == 1 {
        vec![re_min]
    } else {
        (0..re_count)
            .map(|k| re_min + (re_max - re_min) * k as f64 / (re_count - 1) as f64)
            .collect()
    };
    let depths = depth_points(max_depth, depth_count);
    let lambdas: Vec<Complex64> = res
        .iter()
        .flat_map(|&a| depths.iter().map(move |&d| Complex64::new(a, -d)))
        .collect();
    let mut samples: Vec<NormSample> = lambdas
        .par_iter()
        .map(|&l| sample_at(&problem, l, opts))
        .collect::<Result<_>>()?;
    samples.sort_by(|a, b| {
        a.re_lambda
            .total_cmp(&b.re_lambda)
            .then(a.im_lambda.total_cmp(&b.im_lambda))
    });
    let columns = res
        .iter()
        .map(|&a| {
            let mut depth = 0.0;
            for &d in &depths {
                let s = samples
                    .iter()
                    .find(|s| s.re_lambda == a && s.im_lambda == -d)
                    .expect("sample exists for every grid point");
                if s.pole_flag {
                    break;
                }
                depth = d;
            }
            ColumnDepth {
                re_lambda: a,
                pole_free_depth: depth,
            }
        })
        .collect();
    let above: Vec<Complex64> = res.iter().map(|&a| Complex64::new(a, max_depth)).collect();
    let ceiling = ceiling_checks(&problem, &above, opts)?;
    Ok(ScanReport {
        region: ScanRegion::LowerHalfPlane {
            re_min,
            re_max,
            max_depth,
            re_count,
            depth_count,
        },
        dim: grid.dim(),
        per_axis: grid.per_axis(),
        spacing: grid.spacing(),
        profile: profile.spec.name().to_string(),
        chi_radius,
        epsilon0: None,
        columns,
        ceiling,
        warnings: resolution_warnings(grid, &lambdas),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::free::assemble_free_resolvent;
    use crate::linalg::matrix_norm;
    use crate::model::{build_grid, make_wavespeed, ProfileSpec};

    fn grid() -> Grid {
        build_grid(2, 4.0, 0.125).unwrap()
    }

    fn profile(g: &Grid, spec: ProfileSpec) -> WavespeedProfile {
        make_wavespeed(&spec, g).unwrap()
    }

    fn bump() -> ProfileSpec {
        ProfileSpec::LipschitzBump {
            amplitude: 0.5,
            radius: 0.6,
        }
    }

    #[test]
    fn real_axis_point_layout() {
        let p = real_axis_points(1e-2, 5.0, 12).unwrap();
        assert_eq!(p.len(), 12);
        assert!(p.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(p[0], 1e-2);
        assert!((p[11] - 5.0).abs() < 1e-12);
        let below: Vec<f64> = p.iter().copied().filter(|&x| x < 1.0).collect();
        let r = below[1] / below[0];
        assert!(below.windows(2).all(|w| (w[1] / w[0] - r).abs() < 1e-9));
        assert!(real_axis_points(0.0, 1.0, 5).is_err());
        assert!(real_axis_points(1.0, 0.5, 5).is_err());
        assert!(real_axis_points(0.1, 0.5, 1).is_err());
    }

    #[test]
    fn free_scan_equals_free_norms() {
        let g = grid();
        let p = WavespeedProfile::constant(&g);
        let r = scan_real_axis(0.5, 4.0, 4, &p, &g, 1.2, &ScanOptions::default()).unwrap();
        for s in &r.samples {
            let f = assemble_free_resolvent(s.lambda(), &g, 1.2).unwrap();
            let n = matrix_norm(&f.matrix, &NormOptions::default()).unwrap().value;
            assert!((s.norm - n).abs() <= 1e-10 * n);
        }
        assert_eq!(r.epsilon0, Some(4.0));
    }

    #[test]
    fn low_energy_norms_grow() {
        let g = grid();
        let p = profile(&g, bump());
        let r = scan_real_axis(1e-4, 1e-1, 6, &p, &g, 1.2, &ScanOptions::default()).unwrap();
        assert!(r.samples.windows(2).all(|w| w[1].norm < w[0].norm));
        assert_eq!(r.pole_count(), 0);
        assert!(r.ceiling_holds(0.05));
    }

    #[test]
    fn no_poles_on_real_axis_for_presets() {
        let g = grid();
        for spec in [
            ProfileSpec::Constant,
            bump(),
            ProfileSpec::AnnulusWell {
                depth: 0.5,
                inner: 0.2,
                radius: 0.6,
                ramp: 0.1,
            },
        ] {
            let p = profile(&g, spec);
            let r = scan_real_axis(0.05, 8.0, 10, &p, &g, 1.2, &ScanOptions::default()).unwrap();
            assert_eq!(r.pole_count(), 0, "{}", p.spec.name());
        }
    }

    #[test]
    fn lower_halfplane_strip_is_nonempty() {
        let g = grid();
        let b = profile(&g, bump());
        let o = ScanOptions::default();
        let rb = scan_lower_halfplane((1.0, 5.0), 0.5, (3, 3), &b, &g, 1.2, &o).unwrap();
        assert!(rb.columns.iter().all(|c| c.pole_free_depth > 0.0));
        assert!(rb.samples.windows(2).all(|w| (w[0].re_lambda, w[0].im_lambda) < (w[1].re_lambda, w[1].im_lambda)));
        assert!(rb.ceiling_holds(0.05), "{:?}", rb.ceiling);
        let free = WavespeedProfile::constant(&g);
        let rf = scan_lower_halfplane((1.0, 5.0), 0.5, (3, 3), &free, &g, 1.2, &o).unwrap();
        assert_eq!(rf.pole_count(), 0);
        let well = profile(
            &g,
            ProfileSpec::AnnulusWell {
                depth: 0.5,
                inner: 0.2,
                radius: 0.6,
                ramp: 0.1,
            },
        );
        let rw = scan_lower_halfplane((1.0, 5.0), 0.5, (3, 3), &well, &g, 1.2, &o).unwrap();
        for (w, b) in rw.columns.iter().zip(&rb.columns) {
            assert!(w.pole_free_depth <= b.pole_free_depth);
        }
    }

    #[test]
    fn region_through_zero_is_rejected() {
        let g = grid();
        let p = profile(&g, bump());
        let o = ScanOptions::default();
        assert!(scan_lower_halfplane((-1.0, 1.0), 0.5, (3, 3), &p, &g, 1.2, &o).is_err());
        assert!(scan_lower_halfplane((1.0, 2.0), 0.0, (3, 3), &p, &g, 1.2, &o).is_err());
    }

    #[test]
    fn reflected_sample_matches() {
        let g = grid();
        let p = profile(&g, bump());
        let o = ScanOptions::default();
        let problem = CutoffProblem::new(&g, &p, 1.2).unwrap();
        let l = Complex64::new(2.5, -0.2);
        let a = sample_at(&problem, l, &o).unwrap();
        let b = sample_at(&problem, -l.conj(), &o).unwrap();
        assert!((a.norm - b.norm).abs() <= 1e-10 * a.norm);
    }

    #[test]
    fn adjacent_samples_are_continuous() {
        let g = grid();
        let p = profile(&g, bump());
        let r = scan_real_axis(1.0, 3.0, 9, &p, &g, 1.2, &ScanOptions::default()).unwrap();
        let k = r
            .samples
            .windows(2)
            .map(|w| (w[1].norm - w[0].norm).abs() / (w[1].re_lambda - w[0].re_lambda))
            .fold(0.0, f64::max);
        assert!(k.is_finite() && k < 10.0, "K = {k}");
    }

    #[test]
    fn gradient_norms_are_reported() {
        let g = grid();
        let p = profile(&g, bump());
        let o = ScanOptions {
            gradient_radius: Some(1.6),
            ..ScanOptions::default()
        };
        let r = scan_real_axis(1.0, 2.0, 2, &p, &g, 1.2, &o).unwrap();
        assert!(r.samples.iter().all(|s| s.grad_norm.map_or(false, |v| v.is_finite() && v > 0.0)));
    }

    #[test]
    fn ceiling_formula() {
        assert!((spectral_ceiling(Complex64::new(0.0, 2.0)) - 0.25).abs() < 1e-15);
        // λ² = 3 + 4i lies to the right of the origin: distance 4
        assert!((spectral_ceiling(Complex64::new(2.0, 1.0)) - 0.25).abs() < 1e-15);
    }
}
