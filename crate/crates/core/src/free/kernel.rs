use std::f64::consts::PI;

use num_complex::Complex64;

use crate::special::{branch_ln, hankel1_0, hankel1_1, on_branch_cut, EULER_GAMMA};
use crate::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `∫_{[−½,½]²} ln|x| dx`
pub const CELL_LOG_2D: f64 = -1.061_175_426_882_524_4;
/// `∫_{[−½,½]³} |x|⁻¹ dx = 3 ln(2+√3) − π/2`
pub const CELL_INV_3D: f64 = 2.380_077_363_979_553;

/// A spectral parameter with the even-dimensional log branch cut along iℝ₋.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    pub lambda: Complex64,
    pub dim: usize,
}

impl SpectralPoint {
    pub fn new(lambda: Complex64, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        if !(lambda.re.is_finite() && lambda.im.is_finite()) {
            return Err(Error::Argument(format!("non-finite λ = {lambda}")));
        }
        if dim == 2 && on_branch_cut(lambda) {
            return Err(Error::BranchCut(lambda));
        }
        Ok(Self { lambda, dim })
    }

    /// `Im λ > 0`, where the kernel realizes the L² resolvent.
    pub fn is_physical(&self) -> bool {
        self.lambda.im > 0.0
    }

    /// `−λ̄`, the mirror image across the imaginary axis.
    pub fn reflected(&self) -> Self {
        Self {
            lambda: -self.lambda.conj(),
            dim: self.dim,
        }
    }

    pub fn log_lambda(&self) -> Complex64 {
        branch_ln(self.lambda)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(Error::Grid(format!("dimension {dim} not supported")))
    }
}

fn check_lambda(dim: usize, lambda: Complex64) -> Result<()> {
    SpectralPoint::new(lambda, dim).map(|_| ())
}

/// Kernel of `R₀(λ) = (−Δ − λ²)⁻¹` at distance `r`.
pub fn green_kernel(dim: usize, lambda: Complex64, r: f64) -> Result<Complex64> {
    check_lambda(dim, lambda)?;
    if !(r > 0.0) {
        return Err(Error::Argument(format!("kernel needs r > 0, got {r}")));
    }
    Ok(kernel_unchecked(dim, lambda, r))
}

pub(crate) fn kernel_unchecked(dim: usize, lambda: Complex64, r: f64) -> Complex64 {
    if dim == 3 {
        (I * lambda * r).exp() / (4.0 * PI * r)
    } else if lambda == Complex64::new(0.0, 0.0) {
        Complex64::new(-r.ln() / (2.0 * PI), 0.0)
    } else {
        0.25 * I * hankel1_0(lambda * r)
    }
}

/// `dG/dr`.
pub(crate) fn radial_derivative_unchecked(dim: usize, lambda: Complex64, r: f64) -> Complex64 {
    if dim == 3 {
        (I * lambda * r).exp() * (I * lambda * r - 1.0) / (4.0 * PI * r * r)
    } else if lambda == Complex64::new(0.0, 0.0) {
        Complex64::new(-1.0 / (2.0 * PI * r), 0.0)
    } else {
        -0.25 * I * lambda * hankel1_1(lambda * r)
    }
}

/// `∇ₓ G(|x − y|)`.
pub fn grad_green_kernel(
    dim: usize,
    lambda: Complex64,
    x: [f64; 3],
    y: [f64; 3],
) -> Result<[Complex64; 3]> {
    check_lambda(dim, lambda)?;
    let d: Vec<f64> = (0..dim).map(|k| x[k] - y[k]).collect();
    let r = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(Error::Argument("gradient kernel at coincident points".into()));
    }
    let g = radial_derivative_unchecked(dim, lambda, r) / r;
    let mut out = [Complex64::new(0.0, 0.0); 3];
    for k in 0..dim {
        out[k] = g * d[k];
    }
    Ok(out)
}

/// `∫_cell G` over the cube of side `h` centred at the singularity: the
/// leading singular part integrated exactly plus the regular part at the
/// centre times the cell volume.
pub fn self_cell_integral(dim: usize, lambda: Complex64, h: f64) -> Complex64 {
    if dim == 3 {
        Complex64::new(h * h * CELL_INV_3D / (4.0 * PI), 0.0) + I * lambda * h.powi(3) / (4.0 * PI)
    } else {
        let singular = -(h * h) * (h.ln() + CELL_LOG_2D) / (2.0 * PI);
        let regular = if lambda == Complex64::new(0.0, 0.0) {
            Complex64::new(0.0, 0.0)
        } else {
            0.25 * I - (branch_ln(lambda) - std::f64::consts::LN_2 + EULER_GAMMA) / (2.0 * PI)
        };
        Complex64::new(singular, 0.0) + regular * (h * h)
    }
}
