//! Free Green's kernels of `−Δ − λ²` in two and three dimensions and the
//! Nyström discretization of `χR₀(λ)χ`.

mod assembly;
mod kernel;

pub use assembly::{
    assemble_block, assemble_free_resolvent, assemble_gradient_block, mask_nodes, KernelMatrix,
    KernelRole, KernelTable,
};
pub use kernel::{
    grad_green_kernel, green_kernel, self_cell_integral, SpectralPoint, CELL_INV_3D, CELL_LOG_2D,
};

use num_complex::Complex64;
use serde::Serialize;

use crate::linalg::NormOptions;
use crate::model::Grid;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormSample {
    pub re_lambda: f64,
    pub im_lambda: f64,
    pub norm: f64,
}

/// `‖χR₀(λ)χ‖` at each `λ` of a list near the origin.
pub fn low_energy_expansion_probe(
    lambdas: &[Complex64],
    grid: &Grid,
    chi_radius: f64,
    opts: &NormOptions,
) -> Result<Vec<NormSample>> {
    if lambdas.is_empty() {
        return Err(Error::Argument("empty λ list".into()));
    }
    if let Some(z) = lambdas.iter().find(|z| z.norm() == 0.0) {
        return Err(Error::Argument(format!("λ = {z} excluded from the low-energy probe")));
    }
    lambdas
        .iter()
        .map(|&lam| {
            let m = assemble_free_resolvent(lam, grid, chi_radius)?;
            Ok(NormSample {
                re_lambda: lam.re,
                im_lambda: lam.im,
                norm: m.norm(opts)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_grid, laplacian, SmoothCutoff};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Least-squares line through `(x, y)`: returns (intercept, slope).
    fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        let slope = sxy / sxx;
        (my - slope * mx, slope)
    }

    /// Max error of `(−Δ_h − λ²)χR₀χf − χ²f` over nodes whose stencil lies
    /// where `χ ≡ 1`.
    fn defect(h: f64, lambda: Complex64) -> f64 {
        let g = build_grid(2, 2.0, h).unwrap();
        let chi = 0.8;
        let m = assemble_free_resolvent(lambda, &g, chi).unwrap();
        let f: Vec<Complex64> = (0..g.len())
            .map(|i| {
                let x = g.coords(i);
                c((-((x[0] - 0.1).powi(2) + (x[1] + 0.05).powi(2)) / 0.02).exp(), 0.0)
            })
            .collect();
        let u = m.apply(&f, g.len());
        let lu = laplacian(&g, &u);
        let cut = SmoothCutoff::new(chi);
        let mut err = 0.0f64;
        for i in 0..g.len() {
            if g.radius(i) + 2.0 * h < cut.plateau_radius() && g.radius(i) < 0.5 {
                let r = -lu[i] - lambda * lambda * u[i];
                err = err.max((r - f[i]).norm());
            }
        }
        err
    }

    #[test]
    fn resolvent_inverts_helmholtz_under_refinement() {
        let lam = c(2.0, 0.0);
        let e1 = defect(1.0 / 16.0, lam);
        let e2 = defect(1.0 / 32.0, lam);
        let e3 = defect(1.0 / 64.0, lam);
        let o1 = (e1 / e2).log2();
        let o2 = (e2 / e3).log2();
        assert!(o1 >= 1.5 && o2 >= 1.5, "errors {e1} {e2} {e3}");
    }

    #[test]
    fn point_mass_column_is_kernel_column() {
        let g = build_grid(2, 4.0, 0.125).unwrap();
        let lam = c(0.0, 2.0);
        let m = assemble_free_resolvent(lam, &g, 1.2).unwrap();
        let cut = SmoothCutoff::new(1.2);
        let j = m.cols.iter().position(|&k| g.radius(k) < 0.2).unwrap();
        let node_j = m.cols[j];
        for (i, &node_i) in m.rows.iter().enumerate() {
            if node_i == node_j {
                continue;
            }
            let r = (0..3).map(|k| (g.coords(node_i)[k] - g.coords(node_j)[k]).powi(2)).sum::<f64>().sqrt();
            let expect = green_kernel(2, lam, r).unwrap()
                * (cut.value(&g, node_i) * g.weight() * cut.value(&g, node_j));
            assert!((m.matrix.get(i, j) - expect).norm() < 1e-14 * expect.norm().max(1e-10));
        }
    }

    #[test]
    fn reciprocity_and_reflection() {
        for dim in [2usize, 3] {
            let g = if dim == 2 {
                build_grid(2, 4.0, 0.25).unwrap()
            } else {
                build_grid(3, 2.0, 0.25).unwrap()
            };
            let lam = c(1.3, -0.4);
            let a = assemble_free_resolvent(lam, &g, 0.7).unwrap();
            let b = assemble_free_resolvent(-lam.conj(), &g, 0.7).unwrap();
            let n = a.rows.len();
            for i in 0..n {
                for j in 0..n {
                    assert!((a.matrix.get(i, j) - a.matrix.get(j, i)).norm() < 1e-15);
                    assert!((b.matrix.get(i, j) - a.matrix.get(i, j).conj()).norm() < 1e-13);
                }
            }
            assert!(a.is_finite());
        }
    }

    #[test]
    fn three_dimensional_entries_decay() {
        let g = build_grid(3, 2.0, 0.25).unwrap();
        let lam = c(1.0, 0.8);
        let m = assemble_free_resolvent(lam, &g, 0.7).unwrap();
        for (i, &a) in m.rows.iter().enumerate() {
            for (j, &b) in m.cols.iter().enumerate() {
                if a == b {
                    continue;
                }
                let r = g.spacing() * (g.offset_sq(a, b) as f64).sqrt();
                let bound = (-0.8 * r).exp() / (4.0 * std::f64::consts::PI * r)
                    * m.row_mask[i]
                    * g.weight()
                    * m.col_mask[j];
                assert!(m.matrix.get(i, j).norm() <= bound * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn coarse_grid_is_flagged() {
        let g = build_grid(2, 4.0, 0.25).unwrap();
        assert!(assemble_free_resolvent(c(8.0, 0.0), &g, 1.0).unwrap().warnings.len() == 1);
        assert!(assemble_free_resolvent(c(2.0, 0.0), &g, 1.0).unwrap().warnings.is_empty());
        assert!(assemble_free_resolvent(c(0.0, -1.0), &g, 1.0).is_err());
    }

    #[test]
    fn low_energy_profile_in_two_dimensions() {
        let g = build_grid(2, 4.0, 0.125).unwrap();
        let lams: Vec<Complex64> = (0..7).map(|k| c(10f64.powf(-4.0 + 0.5 * k as f64), 0.0)).collect();
        let s = low_energy_expansion_probe(&lams, &g, 1.2, &NormOptions::default()).unwrap();
        let x: Vec<f64> = lams.iter().map(|l| l.norm().ln().abs()).collect();
        let y: Vec<f64> = s.iter().map(|p| p.norm).collect();
        let (a, b) = line_fit(&x, &y);
        let worst = x
            .iter()
            .zip(&y)
            .map(|(xi, yi)| ((a + b * xi) - yi).abs() / yi)
            .fold(0.0, f64::max);
        assert!(worst < 0.05, "relative residual {worst}");
        assert!(b > 0.0);
    }

    #[test]
    fn low_energy_profile_in_three_dimensions() {
        let g = build_grid(3, 2.0, 0.125).unwrap();
        let lams: Vec<Complex64> = [1e-4, 1e-3, 1e-2, 1e-1].iter().map(|&l| c(l, 0.0)).collect();
        let s = low_energy_expansion_probe(&lams, &g, 0.8, &NormOptions::default()).unwrap();
        let hi = s.iter().map(|p| p.norm).fold(0.0, f64::max);
        let lo = s.iter().map(|p| p.norm).fold(f64::INFINITY, f64::min);
        assert!((hi - lo) / lo < 0.1);
        assert!(low_energy_expansion_probe(&[], &g, 0.8, &NormOptions::default()).is_err());
        assert!(low_energy_expansion_probe(&[c(0.0, 0.0)], &g, 0.8, &NormOptions::default()).is_err());
    }

    #[test]
    fn high_energy_slope_along_real_axis() {
        let g = build_grid(2, 4.0, 0.125).unwrap();
        let lams = [2.0, 3.0, 4.5, 6.0, 8.0, 10.0, 12.0];
        let x: Vec<f64> = lams.iter().map(|l: &f64| l.ln()).collect();
        let y: Vec<f64> = lams
            .iter()
            .map(|&l| {
                assemble_free_resolvent(c(l, 0.0), &g, 1.2)
                    .unwrap()
                    .norm(&NormOptions::default())
                    .unwrap()
                    .ln()
            })
            .collect();
        let (_, slope) = line_fit(&x, &y);
        assert!((slope + 1.0).abs() <= 0.2, "slope {slope}");
    }
}
