use super::Grid;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareOptions {
    pub max_iterations: usize,
    /// Relative change of the eigenvalue estimate at which iteration stops.
    pub tolerance: f64,
    pub cg_tolerance: f64,
    pub cg_max_iterations: usize,
}

impl Default for PoincareOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-10,
            cg_tolerance: 1e-12,
            cg_max_iterations: 20_000,
        }
    }
}

/// `−Δ_h` on the nodes of a ball with zero values everywhere else.
struct BallLaplacian<'a> {
    grid: &'a Grid,
    nodes: Vec<usize>,
    slot: Vec<Option<usize>>,
}

impl<'a> BallLaplacian<'a> {
    fn new(grid: &'a Grid, radius: f64) -> Self {
        let nodes = grid.nodes_in_ball(radius);
        let mut slot = vec![None; grid.len()];
        for (k, &i) in nodes.iter().enumerate() {
            slot[i] = Some(k);
        }
        Self { grid, nodes, slot }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let inv_h2 = 1.0 / (self.grid.spacing() * self.grid.spacing());
        let centre = 2.0 * self.grid.dim() as f64;
        for (k, &i) in self.nodes.iter().enumerate() {
            let mut acc = centre * x[k];
            for axis in 0..self.grid.dim() {
                for step in [-1, 1] {
                    if let Some(j) = self.grid.neighbor(i, axis, step) {
                        if let Some(m) = self.slot[j] {
                            acc -= x[m];
                        }
                    }
                }
            }
            out[k] = acc * inv_h2;
        }
    }

    fn cg(&self, b: &[f64], opts: &PoincareOptions) -> Result<Vec<f64>> {
        let n = b.len();
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut ap = vec![0.0; n];
        let b_norm = dot(b, b).sqrt();
        let mut rr = dot(&r, &r);
        for _ in 0..opts.cg_max_iterations {
            if rr.sqrt() <= opts.cg_tolerance * b_norm {
                return Ok(x);
            }
            self.apply(&p, &mut ap);
            let alpha = rr / dot(&p, &ap);
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            for k in 0..n {
                p[k] = r[k] + beta * p[k];
            }
        }
        Err(Error::NoConvergence {
            iterations: opts.cg_max_iterations,
            estimate: rr.sqrt() / b_norm,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Smallest `C` with `‖φ‖_{L²} ≤ C‖∇φ‖_{L²}` for grid functions supported in
/// `B(0, radius)`: `1/√μ₁` for the lowest Dirichlet eigenvalue `μ₁` of `−Δ_h`
/// on the discrete ball, found by inverse power iteration.
pub fn poincare_constant(radius: f64, grid: &Grid, opts: &PoincareOptions) -> Result<f64> {
    if !(radius > 0.0) || !grid.ball_fits(radius) {
        return Err(Error::Support(format!(
            "ball of radius {radius} does not fit inside the grid"
        )));
    }
    let op = BallLaplacian::new(grid, radius);
    if op.nodes.is_empty() {
        return Err(Error::Support(format!("ball of radius {radius} holds no nodes")));
    }
    let n = op.nodes.len();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut av = vec![0.0; n];
    let mut mu = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let mut y = op.cg(&v, opts)?;
        let norm = dot(&y, &y).sqrt();
        y.iter_mut().for_each(|t| *t /= norm);
        op.apply(&y, &mut av);
        let next = dot(&y, &av);
        v = y;
        if (next - mu).abs() <= opts.tolerance * next {
            return Ok(1.0 / next.sqrt());
        }
        mu = next;
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        estimate: 1.0 / mu.sqrt(),
    })
}
