use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use super::kernel::{kernel_unchecked, radial_derivative_unchecked, self_cell_integral, SpectralPoint};
use crate::linalg::{matrix_norm, CMat, NormOptions};
use crate::model::{Grid, Node, SmoothCutoff};
use crate::Result;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelRole {
    FreeResolvent,
    KOperator,
    CutoffResolvent,
    GradientComponent(usize),
}

/// Dense operator between two node sets of a grid.
///
/// Entry `(i, j)` couples node `rows[i]` to node `cols[j]`; nodes outside
/// those lists carry zero rows/columns. Vectors on the full grid are gathered
/// and scattered by [`KernelMatrix::apply`].
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub lambda: Complex64,
    pub role: KernelRole,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub row_mask: Vec<f64>,
    pub col_mask: Vec<f64>,
    pub matrix: CMat,
    pub warnings: Vec<String>,
}

impl KernelMatrix {
    /// `M f` for a full-grid vector `f`, returned on the full grid.
    pub fn apply(&self, f: &[Complex64], grid_len: usize) -> Vec<Complex64> {
        let x: Vec<Complex64> = self.cols.iter().map(|&j| f[j]).collect();
        let y = self.matrix.matvec(&x);
        let mut out = vec![ZERO; grid_len];
        for (&i, v) in self.rows.iter().zip(y) {
            out[i] = v;
        }
        out
    }

    /// Operator norm on `L²` with the grid weights. The weights are uniform,
    /// so this is the spectral norm of the stored block.
    pub fn norm(&self, opts: &NormOptions) -> Result<f64> {
        Ok(matrix_norm(&self.matrix, opts)?.value)
    }

    pub fn is_finite(&self) -> bool {
        self.matrix.is_finite()
    }
}

/// Kernel samples on the squared integer offsets `m = |i − j|²` of a grid.
/// Entry 0 holds the self-cell integral divided by the cell weight.
pub struct KernelTable {
    values: Vec<Complex64>,
    derivative_over_r: Vec<Complex64>,
}

impl KernelTable {
    pub fn new(point: &SpectralPoint, grid: &Grid) -> Self {
        let n = grid.per_axis() - 1;
        let max_m = grid.dim() * n * n;
        let h = grid.spacing();
        let dim = grid.dim();
        let lam = point.lambda;
        let (values, derivative_over_r): (Vec<Complex64>, Vec<Complex64>) = (0..=max_m)
            .map(|m| {
                if m == 0 {
                    (self_cell_integral(dim, lam, h) / grid.weight(), ZERO)
                } else {
                    let r = h * (m as f64).sqrt();
                    (
                        kernel_unchecked(dim, lam, r),
                        radial_derivative_unchecked(dim, lam, r) / r,
                    )
                }
            })
            .unzip();
        Self {
            values,
            derivative_over_r,
        }
    }

    pub fn value(&self, m: usize) -> Complex64 {
        self.values[m]
    }

    pub fn derivative_over_r(&self, m: usize) -> Complex64 {
        self.derivative_over_r[m]
    }
}

fn coarse_warning(point: &SpectralPoint, grid: &Grid) -> Vec<String> {
    // at least four nodes per wavelength 2π/|Re λ|
    if point.lambda.re.abs() * grid.spacing() > FRAC_PI_2 {
        vec![format!(
            "grid spacing {} resolves fewer than 4 nodes per wavelength at Re λ = {}",
            grid.spacing(),
            point.lambda.re
        )]
    } else {
        Vec::new()
    }
}

/// `Mᵢⱼ = a(xᵢ)·G(xᵢ − xⱼ)·w·b(xⱼ)` on the given node lists.
pub fn assemble_block(
    point: &SpectralPoint,
    grid: &Grid,
    table: &KernelTable,
    rows: &[usize],
    row_mask: &[f64],
    cols: &[usize],
    col_mask: &[f64],
    role: KernelRole,
) -> KernelMatrix {
    let w = grid.weight();
    let rn = lattice(grid, rows);
    let cn = lattice(grid, cols);
    let matrix = CMat::from_fn(rows.len(), cols.len(), |i, j| {
        table.value(offset_sq(&rn[i], &cn[j])) * (row_mask[i] * w * col_mask[j])
    });
    KernelMatrix {
        lambda: point.lambda,
        role,
        rows: rows.to_vec(),
        cols: cols.to_vec(),
        row_mask: row_mask.to_vec(),
        col_mask: col_mask.to_vec(),
        matrix,
        warnings: coarse_warning(point, grid),
    }
}

/// Components `∂ₐ(a·G)(xᵢ, xⱼ)·w·b(xⱼ)` for each axis, where the row
/// factor `a` is a smooth cutoff or 1.
pub fn assemble_gradient_block(
    point: &SpectralPoint,
    grid: &Grid,
    table: &KernelTable,
    rows: &[usize],
    row_cutoff: Option<&SmoothCutoff>,
    cols: &[usize],
    col_mask: &[f64],
) -> Vec<KernelMatrix> {
    let w = grid.weight();
    let (a, da): (Vec<f64>, Vec<[f64; 3]>) = rows
        .iter()
        .map(|&i| match row_cutoff {
            Some(c) => (c.value(grid, i), c.gradient(grid, i)),
            None => (1.0, [0.0; 3]),
        })
        .unzip();
    let rn = lattice(grid, rows);
    let cn = lattice(grid, cols);
    (0..grid.dim())
        .map(|axis| {
            let h = grid.spacing();
            let matrix = CMat::from_fn(rows.len(), cols.len(), |i, j| {
                let m = offset_sq(&rn[i], &cn[j]);
                let off = (rn[i][axis] - cn[j][axis]) as f64 * h;
                let grad = table.derivative_over_r(m) * off;
                (table.value(m) * da[i][axis] + grad * a[i]) * (w * col_mask[j])
            });
            KernelMatrix {
                lambda: point.lambda,
                role: KernelRole::GradientComponent(axis),
                rows: rows.to_vec(),
                cols: cols.to_vec(),
                row_mask: a.clone(),
                col_mask: col_mask.to_vec(),
                matrix,
                warnings: coarse_warning(point, grid),
            }
        })
        .collect()
}

fn lattice(grid: &Grid, nodes: &[usize]) -> Vec<Node> {
    nodes.iter().map(|&i| grid.multi_index(i)).collect()
}

fn offset_sq(a: &Node, b: &Node) -> usize {
    a.iter()
        .zip(b)
        .map(|(x, y)| ((x - y) * (x - y)) as usize)
        .sum()
}

/// Nodes where the cutoff is nonzero, and its values there.
pub fn mask_nodes(grid: &Grid, cutoff: &SmoothCutoff) -> (Vec<usize>, Vec<f64>) {
    let nodes: Vec<usize> = cutoff
        .support(grid)
        .into_iter()
        .filter(|&i| cutoff.value(grid, i) > 0.0)
        .collect();
    let values = cutoff.values(grid, &nodes);
    (nodes, values)
}

/// `χR₀(λ)χ` with `χ` the smooth cutoff of radius `chi_radius`.
pub fn assemble_free_resolvent(
    lambda: Complex64,
    grid: &Grid,
    chi_radius: f64,
) -> Result<KernelMatrix> {
    let point = SpectralPoint::new(lambda, grid.dim())?;
    let cutoff = SmoothCutoff::new(chi_radius);
    if !grid.ball_fits(chi_radius) {
        return Err(crate::Error::Support(format!(
            "cutoff radius {chi_radius} does not fit inside the grid"
        )));
    }
    let table = KernelTable::new(&point, grid);
    let (nodes, values) = mask_nodes(grid, &cutoff);
    Ok(assemble_block(
        &point,
        grid,
        &table,
        &nodes,
        &values,
        &nodes,
        &values,
        KernelRole::FreeResolvent,
    ))
}
