use num_complex::Complex64;

use super::solve::{cutoff_resolvent_rows, CutoffProblem, SolveOptions};
use crate::free::{assemble_gradient_block, KernelMatrix, KernelTable};
use crate::linalg::CMat;
use crate::model::{Grid, WavespeedProfile};
use crate::{Error, Result};

/// Components of `∇χR(λ)χ` on `supp χ`, from
///
/// `∇χRχ = ∇χR₀χ − ∇χR₀χ̃ · (1 − c⁻²) · (χ + λ²·χ̃Rχ̃·χ)`
///
/// where `χ̃ ≡ 1` on `supp χ`. This follows from `R = R₀ − R₀(1 − c⁻²)(I + λ²R)`.
pub fn gradient_cutoff_resolvent(
    lambda: Complex64,
    profile: &WavespeedProfile,
    grid: &Grid,
    chi_radius: f64,
    chi_tilde_radius: f64,
    opts: &SolveOptions,
) -> Result<Vec<KernelMatrix>> {
    let inner = CutoffProblem::new(grid, profile, chi_radius)?;
    if !grid.ball_fits(chi_tilde_radius) {
        return Err(Error::Support(format!(
            "χ̃ of radius {chi_tilde_radius} does not fit inside the grid"
        )));
    }
    let outer = CutoffProblem::new(grid, profile, chi_tilde_radius)?;
    if !outer.cutoff.is_one_on(grid, &inner.nodes) {
        return Err(Error::Nesting(format!(
            "χ̃ of radius {chi_tilde_radius} is not 1 on supp χ (radius {chi_radius})"
        )));
    }
    let point = inner.point(lambda)?;
    let table = KernelTable::new(&point, grid);

    let free_grad = assemble_gradient_block(
        &point,
        grid,
        &table,
        &inner.nodes,
        Some(&inner.cutoff),
        &inner.nodes,
        &inner.mask,
    );
    if inner.potential.iter().all(|&v| v == 0.0) {
        return Ok(free_grad);
    }

    // Rows of χ̃Rχ̃ on W = supp(1 − c⁻²), columns restricted to supp χ.
    let w_slots: Vec<usize> = (0..outer.nodes.len())
        .filter(|&k| outer.potential[k] != 0.0)
        .collect();
    let x_rows = cutoff_resolvent_rows(&outer, lambda, &w_slots, opts)?;
    let w_nodes: Vec<usize> = w_slots.iter().map(|&k| outer.nodes[k]).collect();
    let pos_in_outer: std::collections::HashMap<usize, usize> =
        outer.nodes.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let inner_cols: Vec<usize> = inner.nodes.iter().map(|i| pos_in_outer[i]).collect();
    let l2 = lambda * lambda;
    // (1 − c⁻²)(χ + λ²χ̃Rχ̃χ) restricted to W × supp χ
    let middle = CMat::from_fn(w_slots.len(), inner.nodes.len(), |a, j| {
        let k = w_slots[a];
        let chi_j = inner.mask[j];
        let mut v = l2 * x_rows.get(a, inner_cols[j]) * chi_j;
        if outer.nodes[k] == inner.nodes[j] {
            v += chi_j;
        }
        v * outer.potential[k]
    });
    let ones = vec![1.0; w_nodes.len()];
    let coupling = assemble_gradient_block(
        &point,
        grid,
        &table,
        &inner.nodes,
        Some(&inner.cutoff),
        &w_nodes,
        &ones,
    );
    Ok(free_grad
        .into_iter()
        .zip(coupling)
        .map(|(mut g, c)| {
            let correction = c.matrix.matmul(&middle);
            g.matrix.add_assign(&correction, Complex64::new(-1.0, 0.0));
            g
        })
        .collect())
}
