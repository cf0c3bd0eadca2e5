use num_complex::Complex64;
use serde::Serialize;

use super::gradient::gradient_cutoff_resolvent;
use super::lattice::LatticeResolvent;
use super::solve::{solve_from_free, solve_problem, CutoffProblem, Method, SolveOptions};
use crate::free::{assemble_gradient_block, KernelTable};
use crate::linalg::{matrix_norm, CMat, Lu, NormOptions};
use crate::model::{Grid, SmoothCutoff, WavespeedProfile};
use crate::{Error, Result};

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub lambda: [f64; 2],
    pub mu: [f64; 2],
    /// `χR(λ)χ − χR(μ)χ` against `(λ² − μ²)χR(λ)R(μ)χ`, lattice realization.
    pub first_identity: f64,
    /// `χR(λ)χ − χR(μ)χ` against the five-term sum, lattice realization.
    pub five_term: f64,
    /// `(χR(λ)χ)* − χR(λ̄)χ` in `L²_c`, Nyström realization.
    pub adjoint: f64,
    /// `∇χ₁R(λ)χ₁` from the gradient identity through `χ` against
    /// `∇χ₁R₀χ₁(I + Kχ₁)⁻¹c⁻²`, Nyström realization; worst axis.
    pub gradient: f64,
}

/// Relative residual in operator norm; absolute when the reference vanishes.
fn relative(diff: &CMat, reference: &CMat, opts: &NormOptions) -> Result<f64> {
    let d = matrix_norm(diff, opts)?.value;
    let r = matrix_norm(reference, opts)?.value;
    Ok(if r > 0.0 { d / r } else { d })
}

fn diag(v: &[f64]) -> CMat {
    let mut m = CMat::zeros(v.len(), v.len());
    for (i, &x) in v.iter().enumerate() {
        m.set(i, i, Complex64::new(x, 0.0));
    }
    m
}

/// `[Δ_h, χ₁]` on `supp χ`: `Σ_{j ~ i} (χ₁(x_j) − χ₁(x_i)) f_j / h²`.
fn commutator(grid: &Grid, nodes: &[usize], chi1: &SmoothCutoff) -> Result<CMat> {
    let slot: std::collections::HashMap<usize, usize> =
        nodes.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let h2 = grid.spacing() * grid.spacing();
    let mut m = CMat::zeros(nodes.len(), nodes.len());
    for (k, &i) in nodes.iter().enumerate() {
        let ci = chi1.value(grid, i);
        for axis in 0..grid.dim() {
            for step in [-1, 1] {
                let j = grid
                    .neighbor(i, axis, step)
                    .ok_or_else(|| Error::Nesting("commutator stencil leaves the grid".into()))?;
                let cj = chi1.value(grid, j);
                if cj == ci {
                    continue;
                }
                let &l = slot
                    .get(&j)
                    .ok_or_else(|| Error::Nesting("commutator stencil leaves supp χ".into()))?;
                m.set(k, l, m.get(k, l) + Complex64::new((cj - ci) / h2, 0.0));
            }
        }
    }
    Ok(m)
}

/// Residuals of the first resolvent identity, the five-term decomposition
/// of `χR(λ)χ − χR(μ)χ`, the adjoint relation and the gradient identity.
///
/// Requires `Im λ, Im μ > 0`, and, with stencil neighbours included,
/// `χ₁ ≡ 1` on `supp(c − 1)` and `χ ≡ 1` on `supp χ₁`.
pub fn verify_identities(
    lambda: Complex64,
    mu: Complex64,
    profile: &WavespeedProfile,
    grid: &Grid,
    chi_radius: f64,
    chi1_radius: f64,
    opts: &SolveOptions,
) -> Result<IdentityReport> {
    if !(lambda.im > 0.0 && mu.im > 0.0) {
        return Err(Error::Argument(format!(
            "identity check needs Im λ, Im μ > 0, got λ = {lambda}, μ = {mu}"
        )));
    }
    let problem = CutoffProblem::new(grid, profile, chi_radius)?;
    let chi1 = SmoothCutoff::new(chi1_radius);
    // −c²Δ_h couples each node of supp(c − 1) to its stencil neighbours.
    let mut reach = profile.perturbation_support();
    for i in profile.perturbation_support() {
        for axis in 0..grid.dim() {
            reach.extend([-1, 1].iter().filter_map(|&s| grid.neighbor(i, axis, s)));
        }
    }
    if !chi1.is_one_on(grid, &reach) {
        return Err(Error::Nesting(format!(
            "χ₁ of radius {chi1_radius} is not 1 on the stencil neighbourhood of supp(c − 1)"
        )));
    }
    let widened: Vec<usize> = grid.nodes_in_ball(chi1_radius + 2.0 * grid.spacing());
    if !problem.cutoff.is_one_on(grid, &widened) {
        return Err(Error::Nesting(format!(
            "χ of radius {chi_radius} is not 1 on the stencil neighbourhood of supp χ₁"
        )));
    }
    let nodes = &problem.nodes;
    let mask = &problem.mask;

    // lattice realization
    let r_lam = LatticeResolvent::new(grid, profile, lambda)?;
    let r_mu = LatticeResolvent::new(grid, profile, mu)?;
    let f_lam = r_lam.free().block(grid, nodes, mask, nodes, mask);
    let f_mu = r_mu.free().block(grid, nodes, mask, nodes, mask);
    let (x_lam, rep_l) =
        solve_from_free(&f_lam, &problem.potential, &problem.inv_c2, lambda, Method::Direct, opts)?;
    let (x_mu, rep_m) =
        solve_from_free(&f_mu, &problem.potential, &problem.inv_c2, mu, Method::Direct, opts)?;
    if !(rep_l.success && rep_m.success) {
        return Err(Error::Singular);
    }
    let lhs = x_lam.sub(&x_mu);
    let dl2 = lambda * lambda - mu * mu;

    // (a) apply R(μ) then R(λ) to χ e_j on the whole torus
    let n = grid.len();
    let columns: Vec<Vec<Complex64>> = nodes
        .iter()
        .zip(mask)
        .map(|(&j, &m)| {
            let mut e = vec![Complex64::new(0.0, 0.0); n];
            e[j] = Complex64::new(m, 0.0);
            let u = r_lam.apply(&r_mu.apply(&e));
            nodes.iter().zip(mask).map(|(&i, &mi)| dl2 * u[i] * mi).collect()
        })
        .collect();
    let rhs_a = CMat::from_fn(nodes.len(), nodes.len(), |i, j| columns[j][i]);
    let first_identity = relative(&lhs.sub(&rhs_a), &lhs, &opts.norm)?;

    // (b) five terms
    let c1: Vec<f64> = nodes.iter().map(|&i| chi1.value(grid, i)).collect();
    let bump = diag(&c1.iter().map(|v| v * (2.0 - v)).collect::<Vec<_>>());
    let outside = diag(&c1.iter().map(|v| 1.0 - v).collect::<Vec<_>>());
    let comm = commutator(grid, nodes, &chi1)?;
    let df = f_lam.sub(&f_mu);
    let mut t1 = x_lam.matmul(&bump).matmul(&x_mu);
    t1.scale(dl2);
    let t2 = outside.matmul(&df).matmul(&outside);
    let t3 = outside.matmul(&df).matmul(&comm).matmul(&x_mu);
    let t4 = x_lam.matmul(&comm).matmul(&df).matmul(&outside);
    let t5 = x_lam.matmul(&comm).matmul(&df).matmul(&comm).matmul(&x_mu);
    let mut sum = t1;
    sum.add_assign(&t2, ONE);
    sum.add_assign(&t3, ONE);
    sum.add_assign(&t4, -ONE);
    sum.add_assign(&t5, -ONE);
    let five_term = relative(&lhs.sub(&sum), &lhs, &opts.norm)?;

    // (c) Nyström: the L²_c adjoint of χR(λ)χ is χR(λ̄)χ, whose physical
    // realization is the outgoing continuation at −λ̄.
    let (ny, rep) = solve_problem(&problem, lambda, Method::Direct, opts)?;
    let (ny_bar, rep_bar) = solve_problem(&problem, -lambda.conj(), Method::Direct, opts)?;
    if !(rep.success && rep_bar.success) {
        return Err(Error::Singular);
    }
    let inv_c2: Vec<Complex64> = problem.inv_c2.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let c2: Vec<Complex64> = problem.inv_c2.iter().map(|&v| Complex64::new(1.0 / v, 0.0)).collect();
    // adjoint in L²_c: diag(c²)·Xᴴ·diag(c⁻²)
    let mut adj = ny.matrix.transpose().conj();
    adj.scale_rows(&c2);
    adj.scale_cols(&inv_c2);
    let adjoint = relative(&adj.sub(&ny_bar.matrix), &ny_bar.matrix, &opts.norm)?;

    let gradient = gradient_residual(lambda, profile, grid, chi1_radius, chi_radius, opts)?;

    Ok(IdentityReport {
        lambda: [lambda.re, lambda.im],
        mu: [mu.re, mu.im],
        first_identity,
        five_term,
        adjoint,
        gradient,
    })
}

fn gradient_residual(
    lambda: Complex64,
    profile: &WavespeedProfile,
    grid: &Grid,
    inner_radius: f64,
    outer_radius: f64,
    opts: &SolveOptions,
) -> Result<f64> {
    let via_identity =
        gradient_cutoff_resolvent(lambda, profile, grid, inner_radius, outer_radius, opts)?;
    let inner = CutoffProblem::new(grid, profile, inner_radius)?;
    let point = inner.point(lambda)?;
    let table = KernelTable::new(&point, grid);
    let free = inner.free_block(&point, &table).matrix;
    let l2 = lambda * lambda;
    let mut a = free.clone();
    a.scale_rows(&inner.potential.iter().map(|&v| l2 * v).collect::<Vec<_>>());
    a.add_identity(ONE);
    let lu = Lu::factor(a)?;
    let inv_c2: Vec<Complex64> = inner.inv_c2.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let direct = assemble_gradient_block(
        &point,
        grid,
        &table,
        &inner.nodes,
        Some(&inner.cutoff),
        &inner.nodes,
        &inner.mask,
    );
    let mut worst = 0.0f64;
    for (g_id, g_direct) in via_identity.iter().zip(direct) {
        let mut y = lu.solve_right(&g_direct.matrix);
        y.scale_cols(&inv_c2);
        worst = worst.max(relative(&g_id.matrix.sub(&y), &y, &opts.norm)?);
    }
    Ok(worst)
}
