//! Exact inverses of the lattice operators `−Δ_h − λ²` and `−c²Δ_h − λ²` on
//! the periodic torus spanned by a grid.
//!
//! The Nyström matrices of [`crate::free`] approximate the continuum kernel
//! and are not exact inverses of the stencil, so resolvent identities that
//! mix both hold only to discretization accuracy. On the torus the free
//! resolvent is diagonal in Fourier space and the identities can be checked
//! to rounding error with the same Lippmann–Schwinger algebra.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::linalg::{CMat, Lu};
use crate::model::{Grid, Node, WavespeedProfile};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

struct FftPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// `(−Δ_h − λ²)⁻¹` on the torus `(ℤ/Qℤ)ⁿ` with spacing `h`.
pub struct LatticeFreeResolvent {
    dim: usize,
    q: usize,
    lambda: Complex64,
    /// `1/(σ(k) − λ²)` on the dual lattice
    symbol: Vec<Complex64>,
    /// periodic kernel `g(m)`, so `(R₀f)(a) = Σ_b g(a − b) f(b)`; built on
    /// first use
    kernel: OnceLock<Vec<Complex64>>,
    fft: FftPair,
}

fn transform(data: &mut [Complex64], dim: usize, q: usize, fft: &Arc<dyn Fft<f64>>) {
    let total = data.len();
    let mut line = vec![ZERO; q];
    for axis in 0..dim {
        let stride = q.pow((dim - 1 - axis) as u32);
        for start in 0..total {
            // visit each line once: its first element has axis coordinate 0
            if (start / stride) % q != 0 {
                continue;
            }
            for k in 0..q {
                line[k] = data[start + k * stride];
            }
            fft.process(&mut line);
            for k in 0..q {
                data[start + k * stride] = line[k];
            }
        }
    }
}

impl LatticeFreeResolvent {
    pub fn new(grid: &Grid, lambda: Complex64) -> Result<Self> {
        let dim = grid.dim();
        let q = grid.per_axis();
        let h = grid.spacing();
        let l2 = lambda * lambda;
        let mut planner = FftPlanner::new();
        let fft = FftPair {
            forward: planner.plan_fft_forward(q),
            inverse: planner.plan_fft_inverse(q),
        };
        let sin2: Vec<f64> = (0..q)
            .map(|k| 4.0 / (h * h) * (PI * k as f64 / q as f64).sin().powi(2))
            .collect();
        let total = grid.len();
        let mut symbol = Vec::with_capacity(total);
        for idx in 0..total {
            let node = grid.multi_index(idx);
            let sigma: f64 = (0..dim).map(|a| sin2[node[a] as usize]).sum();
            let d = Complex64::new(sigma, 0.0) - l2;
            if d.norm() < 1e-12 * sigma.max(1.0) {
                return Err(Error::Singular);
            }
            symbol.push(1.0 / d);
        }
        Ok(Self {
            dim,
            q,
            lambda,
            symbol,
            kernel: OnceLock::new(),
            fft,
        })
    }

    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    fn wrap(&self, a: &Node, b: &Node) -> usize {
        let q = self.q as i64;
        let mut idx = 0usize;
        for k in 0..self.dim {
            idx = idx * self.q + (a[k] - b[k]).rem_euclid(q) as usize;
        }
        idx
    }

    fn kernel(&self) -> &[Complex64] {
        self.kernel.get_or_init(|| {
            let mut kernel = self.symbol.clone();
            transform(&mut kernel, self.dim, self.q, &self.fft.inverse);
            let scale = 1.0 / kernel.len() as f64;
            kernel.iter_mut().for_each(|v| *v *= scale);
            kernel
        })
    }

    pub fn entry(&self, a: &Node, b: &Node) -> Complex64 {
        self.kernel()[self.wrap(a, b)]
    }

    /// `a(xᵢ)·R₀(xᵢ, xⱼ)·b(xⱼ)` on node lists.
    pub fn block(
        &self,
        grid: &Grid,
        rows: &[usize],
        row_mask: &[f64],
        cols: &[usize],
        col_mask: &[f64],
    ) -> CMat {
        let rn: Vec<Node> = rows.iter().map(|&i| grid.multi_index(i)).collect();
        let cn: Vec<Node> = cols.iter().map(|&i| grid.multi_index(i)).collect();
        let kernel = self.kernel();
        CMat::from_fn(rows.len(), cols.len(), |i, j| {
            kernel[self.wrap(&rn[i], &cn[j])] * (row_mask[i] * col_mask[j])
        })
    }

    /// `R₀f` on the whole torus.
    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        let mut data = f.to_vec();
        transform(&mut data, self.dim, self.q, &self.fft.forward);
        data.iter_mut().zip(&self.symbol).for_each(|(v, s)| *v *= s);
        transform(&mut data, self.dim, self.q, &self.fft.inverse);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|v| *v *= scale);
        data
    }
}

/// `(−c²Δ_h − λ²)⁻¹` on the torus, through `R₀` and a dense solve on
/// `W = supp(1 − c⁻²)`.
pub struct LatticeResolvent<'a> {
    free: LatticeFreeResolvent,
    profile: &'a WavespeedProfile,
    w_nodes: Vec<usize>,
    /// `(1 − c⁻²)λ²` on `W`
    d: Vec<Complex64>,
    lu: Option<Lu>,
}

impl<'a> LatticeResolvent<'a> {
    pub fn new(grid: &Grid, profile: &'a WavespeedProfile, lambda: Complex64) -> Result<Self> {
        let free = LatticeFreeResolvent::new(grid, lambda)?;
        let w_nodes = profile.perturbation_support();
        let l2 = lambda * lambda;
        let d: Vec<Complex64> = w_nodes.iter().map(|&i| l2 * profile.potential(i)).collect();
        let lu = if w_nodes.is_empty() {
            None
        } else {
            let ones = vec![1.0; w_nodes.len()];
            let mut a = free.block(grid, &w_nodes, &ones, &w_nodes, &ones);
            a.scale_rows(&d);
            a.add_identity(Complex64::new(1.0, 0.0));
            Some(Lu::factor(a)?)
        };
        Ok(Self {
            free,
            profile,
            w_nodes,
            d,
            lu,
        })
    }

    pub fn free(&self) -> &LatticeFreeResolvent {
        &self.free
    }

    /// `R(λ)g` on the whole torus.
    pub fn apply(&self, g: &[Complex64]) -> Vec<Complex64> {
        let mut src: Vec<Complex64> = g
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.profile.inv_c2(i))
            .collect();
        if let Some(lu) = &self.lu {
            let r0 = self.free.apply(&src);
            let rhs: Vec<Complex64> = self
                .w_nodes
                .iter()
                .zip(&self.d)
                .map(|(&i, d)| -d * r0[i])
                .collect();
            let sigma = lu.solve(&rhs);
            for (&i, s) in self.w_nodes.iter().zip(sigma) {
                src[i] += s;
            }
        }
        self.free.apply(&src)
    }
}
