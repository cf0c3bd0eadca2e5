use num_complex::Complex64;
use serde::Serialize;

use crate::free::{assemble_block, mask_nodes, KernelMatrix, KernelRole, KernelTable, SpectralPoint};
use crate::linalg::{inverse_norm, matrix_norm, CMat, Lu, NormOptions};
use crate::model::{Grid, SmoothCutoff, WavespeedProfile};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Direct,
    Neumann,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Neumann => "neumann",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub residual_tolerance: f64,
    pub neumann_term_tolerance: f64,
    pub neumann_max_terms: usize,
    /// Condition indicator above which a point is flagged as a numerical pole.
    pub pole_threshold: f64,
    pub norm: NormOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            residual_tolerance: 1e-12,
            neumann_term_tolerance: 1e-14,
            neumann_max_terms: 2000,
            pole_threshold: 1e12,
            norm: NormOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub re_lambda: f64,
    pub im_lambda: f64,
    pub method: Method,
    pub k_norm: f64,
    pub neumann_terms: Option<usize>,
    /// `‖I − Σ(−1)ⁿ(Kχ)ⁿ⁺¹‖` for the Neumann route.
    pub series_norm: Option<f64>,
    pub residual: f64,
    /// `‖(I + Kχ)⁻¹‖`, the reciprocal of the smallest singular value.
    pub condition: f64,
    pub pole_flag: bool,
    pub success: bool,
}

/// Grid, profile and cutoff `χ` with the nodes of `supp χ`.
#[derive(Debug, Clone)]
pub struct CutoffProblem<'a> {
    pub grid: &'a Grid,
    pub profile: &'a WavespeedProfile,
    pub cutoff: SmoothCutoff,
    pub nodes: Vec<usize>,
    pub mask: Vec<f64>,
    /// `1 − c⁻²` on `nodes`.
    pub potential: Vec<f64>,
    /// `c⁻²` on `nodes`.
    pub inv_c2: Vec<f64>,
}

impl<'a> CutoffProblem<'a> {
    pub fn new(grid: &'a Grid, profile: &'a WavespeedProfile, chi_radius: f64) -> Result<Self> {
        if profile.values.len() != grid.len() {
            return Err(Error::Length {
                expected: grid.len(),
                got: profile.values.len(),
            });
        }
        if !grid.ball_fits(chi_radius) {
            return Err(Error::Support(format!(
                "cutoff radius {chi_radius} does not fit inside the grid"
            )));
        }
        let cutoff = SmoothCutoff::new(chi_radius);
        let support = profile.perturbation_support();
        if !cutoff.is_one_on(grid, &support) {
            return Err(Error::Nesting(format!(
                "χ of radius {chi_radius} is not 1 on supp(c − 1) (ρ = {})",
                profile.support_radius
            )));
        }
        let (nodes, mask) = mask_nodes(grid, &cutoff);
        let potential = nodes.iter().map(|&i| profile.potential(i)).collect();
        let inv_c2 = nodes.iter().map(|&i| profile.inv_c2(i)).collect();
        Ok(Self {
            grid,
            profile,
            cutoff,
            nodes,
            mask,
            potential,
            inv_c2,
        })
    }

    pub fn point(&self, lambda: Complex64) -> Result<SpectralPoint> {
        SpectralPoint::new(lambda, self.grid.dim())
    }

    /// `χR₀(λ)χ` on `supp χ`.
    pub fn free_block(&self, point: &SpectralPoint, table: &KernelTable) -> KernelMatrix {
        assemble_block(
            point,
            self.grid,
            table,
            &self.nodes,
            &self.mask,
            &self.nodes,
            &self.mask,
            KernelRole::FreeResolvent,
        )
    }

    fn k_diagonal(&self, lambda: Complex64) -> Vec<Complex64> {
        let l2 = lambda * lambda;
        self.potential.iter().map(|&v| l2 * v).collect()
    }
}

/// `K(λ)χ = (1 − c⁻²)λ²·χR₀(λ)χ` as a matrix on `supp χ`.
fn k_from_free(problem: &CutoffProblem, free: &KernelMatrix) -> KernelMatrix {
    let mut k = free.clone();
    k.matrix.scale_rows(&problem.k_diagonal(free.lambda));
    k.role = KernelRole::KOperator;
    k
}

pub fn assemble_k(
    lambda: Complex64,
    profile: &WavespeedProfile,
    grid: &Grid,
    chi_radius: f64,
) -> Result<KernelMatrix> {
    let problem = CutoffProblem::new(grid, profile, chi_radius)?;
    let point = problem.point(lambda)?;
    let table = KernelTable::new(&point, grid);
    Ok(k_from_free(&problem, &problem.free_block(&point, &table)))
}

fn neumann_series(k: &CMat, opts: &SolveOptions) -> Result<(CMat, usize)> {
    let n = k.rows();
    let mut sum = CMat::identity(n);
    let mut term = CMat::identity(n);
    let mut minus_k = k.clone();
    minus_k.scale(Complex64::new(-1.0, 0.0));
    for terms in 1..=opts.neumann_max_terms {
        term = term.matmul(&minus_k);
        sum.add_assign(&term, Complex64::new(1.0, 0.0));
        if term.frobenius_norm() < opts.neumann_term_tolerance {
            return Ok((sum, terms));
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.neumann_max_terms,
        estimate: term.frobenius_norm(),
    })
}

/// Solves for `χR(λ)χ = χ(−Δ − c⁻²λ²)⁻¹χ·c⁻²` on `supp χ` from
/// `χR₀χ(I + Kχ)⁻¹`.
///
/// A singular or ill-conditioned direct solve is returned with `pole_flag`
/// set rather than as an error; the Neumann route refuses `‖Kχ‖ ≥ ½`.
pub fn solve_cutoff_resolvent(
    lambda: Complex64,
    profile: &WavespeedProfile,
    grid: &Grid,
    chi_radius: f64,
    method: Method,
    opts: &SolveOptions,
) -> Result<(KernelMatrix, SolveReport)> {
    let problem = CutoffProblem::new(grid, profile, chi_radius)?;
    solve_problem(&problem, lambda, method, opts)
}

pub fn solve_problem(
    problem: &CutoffProblem,
    lambda: Complex64,
    method: Method,
    opts: &SolveOptions,
) -> Result<(KernelMatrix, SolveReport)> {
    let point = problem.point(lambda)?;
    let table = KernelTable::new(&point, problem.grid);
    let free = problem.free_block(&point, &table);
    let (x, report) = solve_from_free(&free.matrix, &problem.potential, &problem.inv_c2, lambda, method, opts)?;
    let mut out = free;
    out.role = KernelRole::CutoffResolvent;
    out.matrix = x;
    Ok((out, report))
}

/// `F(I + K)⁻¹·diag(c⁻²)` with `K = diag((1 − c⁻²)λ²)·F`, for any
/// realization `F` of `χR₀(λ)χ` on `supp χ`.
pub fn solve_from_free(
    free: &CMat,
    potential: &[f64],
    inv_c2: &[f64],
    lambda: Complex64,
    method: Method,
    opts: &SolveOptions,
) -> Result<(CMat, SolveReport)> {
    let l2 = lambda * lambda;
    let mut k = free.clone();
    k.scale_rows(&potential.iter().map(|&v| l2 * v).collect::<Vec<_>>());
    let k_norm = matrix_norm(&k, &opts.norm)?.value;
    let n = free.rows();
    let mut a = k.clone();
    a.add_identity(Complex64::new(1.0, 0.0));

    let mut report = SolveReport {
        re_lambda: lambda.re,
        im_lambda: lambda.im,
        method,
        k_norm,
        neumann_terms: None,
        series_norm: None,
        residual: f64::NAN,
        condition: f64::INFINITY,
        pole_flag: true,
        success: false,
    };

    let x = match method {
        Method::Neumann => {
            if !(k_norm < 0.5) {
                return Err(Error::NeumannRegime(k_norm));
            }
            let (series, terms) = neumann_series(&k, opts)?;
            let series_norm = matrix_norm(&series, &opts.norm)?.value;
            report.neumann_terms = Some(terms);
            report.series_norm = Some(series_norm);
            // the series is (I + K)⁻¹ itself
            report.condition = series_norm;
            free.matmul(&series)
        }
        Method::Direct => match Lu::factor(a.clone()) {
            Ok(lu) => {
                report.condition = inverse_norm(&lu, &opts.norm)
                    .map(|e| e.value)
                    .unwrap_or(f64::INFINITY);
                lu.solve_right(free)
            }
            Err(Error::Singular) => return Ok((CMat::zeros(n, n), report)),
            Err(e) => return Err(e),
        },
    };
    let f_norm = free.frobenius_norm();
    report.residual = if f_norm > 0.0 {
        x.matmul(&a).sub(free).frobenius_norm() / f_norm
    } else {
        x.frobenius_norm()
    };
    let residual_ok = report.residual < opts.residual_tolerance;
    report.pole_flag = !residual_ok || !(report.condition <= opts.pole_threshold);
    report.success = residual_ok && report.condition.is_finite();
    let mut x = x;
    x.scale_cols(&inv_c2.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>());
    Ok((x, report))
}

/// Selected rows of `χR(λ)χ` by the direct route, without the condition
/// estimate. Fails if the solve does not meet the residual tolerance.
pub fn cutoff_resolvent_rows(
    problem: &CutoffProblem,
    lambda: Complex64,
    row_slots: &[usize],
    opts: &SolveOptions,
) -> Result<CMat> {
    let point = problem.point(lambda)?;
    let table = KernelTable::new(&point, problem.grid);
    let free = problem.free_block(&point, &table).matrix;
    let mut a = free.clone();
    a.scale_rows(&problem.k_diagonal(lambda));
    a.add_identity(Complex64::new(1.0, 0.0));
    let lu = Lu::factor(a.clone())?;
    let all: Vec<usize> = (0..free.cols()).collect();
    let rhs = free.select(row_slots, &all);
    let mut x = lu.solve_right(&rhs);
    let residual = x.matmul(&a).sub(&rhs).frobenius_norm() / rhs.frobenius_norm().max(f64::MIN_POSITIVE);
    if !(residual < opts.residual_tolerance) {
        return Err(Error::Singular);
    }
    x.scale_cols(&problem.inv_c2.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>());
    Ok(x)
}
