//! Dense complex matrices, LU factorization and operator-norm estimation.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Length {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds the matrix row by row in parallel.
    pub fn from_fn<F>(rows: usize, cols: usize, f: F) -> Self
    where
        F: Fn(usize, usize) -> Complex64 + Sync,
    {
        let mut data = vec![ZERO; rows * cols];
        if cols > 0 {
            data.par_chunks_mut(cols).enumerate().for_each(|(i, row)| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = f(i, j);
                }
            });
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols);
        if self.cols == 0 {
            return vec![ZERO; self.rows];
        }
        self.data
            .par_chunks(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `Aᴴx`.
    pub fn matvec_adjoint(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![ZERO; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * xi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &CMat) -> CMat {
        assert_eq!(self.cols, other.rows);
        let n = other.cols;
        let mut data = vec![ZERO; self.rows * n];
        if n > 0 {
            data.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
                for (k, &a) in self.row(i).iter().enumerate() {
                    if a == ZERO {
                        continue;
                    }
                    for (o, b) in out.iter_mut().zip(other.row(k)) {
                        *o += a * b;
                    }
                }
            });
        }
        CMat {
            rows: self.rows,
            cols: n,
            data,
        }
    }

    pub fn transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn conj(&self) -> CMat {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn scale(&mut self, s: Complex64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// `diag(d)·A`.
    pub fn scale_rows(&mut self, d: &[Complex64]) {
        assert_eq!(d.len(), self.rows);
        let cols = self.cols;
        if cols == 0 {
            return;
        }
        self.data
            .par_chunks_mut(cols)
            .zip(d)
            .for_each(|(row, &s)| row.iter_mut().for_each(|v| *v *= s));
    }

    /// `A·diag(d)`.
    pub fn scale_cols(&mut self, d: &[Complex64]) {
        assert_eq!(d.len(), self.cols);
        let cols = self.cols;
        if cols == 0 {
            return;
        }
        self.data.par_chunks_mut(cols).for_each(|row| {
            row.iter_mut().zip(d).for_each(|(v, &s)| *v *= s);
        });
    }

    pub fn add_identity(&mut self, s: Complex64) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            self.data[i * self.cols + i] += s;
        }
    }

    pub fn add_assign(&mut self, other: &CMat, s: Complex64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += s * b);
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        let mut out = self.clone();
        out.add_assign(other, Complex64::new(-1.0, 0.0));
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Submatrix on the given row and column index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> CMat {
        CMat::from_fn(rows.len(), cols.len(), |i, j| self.get(rows[i], cols[j]))
    }
}

/// LU factorization with partial pivoting, `PA = LU`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: CMat,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(mut a: CMat) -> Result<Lu> {
        if a.rows != a.cols {
            return Err(Error::Argument("LU of a non-square matrix".into()));
        }
        let n = a.rows;
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (p, best) = (k..n)
                .map(|i| (i, a.get(i, k).norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best <= 1e-300 * scale || !best.is_finite() {
                return Err(Error::Singular);
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
            }
            let pivot = a.get(k, k);
            let (top, bottom) = a.data.split_at_mut((k + 1) * n);
            let prow = &top[k * n..(k + 1) * n];
            bottom.par_chunks_mut(n).for_each(|row| {
                let f = row[k] / pivot;
                row[k] = f;
                if f != ZERO {
                    for j in k + 1..n {
                        row[j] -= f * prow[j];
                    }
                }
            });
        }
        Ok(Lu { lu: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    /// Solves `Ax = b`.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s: Complex64 = (0..i).map(|j| row[j] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s: Complex64 = (i + 1..n).map(|j| row[j] * x[j]).sum();
            x[i] = (x[i] - s) / row[i];
        }
        x
    }

    /// Solves `Aᵀx = b`.
    pub fn solve_transpose(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        // Aᵀ = Uᵀ Lᵀ P
        let mut y = b.to_vec();
        for i in 0..n {
            let s: Complex64 = (0..i).map(|j| self.lu.get(j, i) * y[j]).sum();
            y[i] = (y[i] - s) / self.lu.get(i, i);
        }
        for i in (0..n).rev() {
            let s: Complex64 = (i + 1..n).map(|j| self.lu.get(j, i) * y[j]).sum();
            y[i] -= s;
        }
        let mut x = vec![ZERO; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }

    /// Solves `Aᴴx = b`.
    pub fn solve_adjoint(&self, b: &[Complex64]) -> Vec<Complex64> {
        let bc: Vec<Complex64> = b.iter().map(|v| v.conj()).collect();
        self.solve_transpose(&bc).into_iter().map(|v| v.conj()).collect()
    }

    /// Solves `X·A = F` row by row.
    pub fn solve_right(&self, f: &CMat) -> CMat {
        let rows: Vec<Vec<Complex64>> = (0..f.rows)
            .into_par_iter()
            .map(|i| self.solve_transpose(f.row(i)))
            .collect();
        CMat {
            rows: f.rows,
            cols: f.cols,
            data: rows.concat(),
        }
    }

    /// Solves `A·X = F` column by column.
    pub fn solve_left(&self, f: &CMat) -> CMat {
        let cols: Vec<Vec<Complex64>> = (0..f.cols)
            .into_par_iter()
            .map(|j| {
                let col: Vec<Complex64> = (0..f.rows).map(|i| f.get(i, j)).collect();
                self.solve(&col)
            })
            .collect();
        CMat::from_fn(f.rows, f.cols, |i, j| cols[j][i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-10,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
}

fn dotc(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm2(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest eigenvalue of the symmetric tridiagonal matrix with diagonal `a`
/// and off-diagonal `b`, by Sturm-sequence bisection.
fn tridiagonal_max_eigenvalue(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { b[i - 1].abs() } else { 0.0 } + if i + 1 < n { b[i].abs() } else { 0.0 };
        lo = lo.min(a[i] - r);
        hi = hi.max(a[i] + r);
    }
    // number of eigenvalues below x
    let count_below = |x: f64| {
        let mut c = 0;
        let mut d = 1.0;
        for i in 0..n {
            let off = if i > 0 { b[i - 1] * b[i - 1] } else { 0.0 };
            d = a[i] - x - if i > 0 { off / d } else { 0.0 };
            if d == 0.0 {
                d = -1e-300;
            }
            if d < 0.0 {
                c += 1;
            }
        }
        c
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(mid) < n {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Estimates `‖A‖₂` from `x ↦ Ax` and `y ↦ Aᴴy` by Lanczos iteration on
/// `AᴴA` with full reorthogonalization.
pub fn operator_norm<F, G>(dim: usize, apply: F, apply_adjoint: G, opts: &NormOptions) -> Result<NormEstimate>
where
    F: Fn(&[Complex64]) -> Result<Vec<Complex64>>,
    G: Fn(&[Complex64]) -> Result<Vec<Complex64>>,
{
    if dim == 0 {
        return Ok(NormEstimate {
            value: 0.0,
            iterations: 0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let n0 = norm2(&q);
    q.iter_mut().for_each(|v| *v /= n0);

    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut last = 0.0;
    let steps = opts.max_iterations.min(dim);
    for k in 0..steps {
        let mut w = apply_adjoint(&apply(&q)?)?;
        let a = dotc(&q, &w).re;
        basis.push(q.clone());
        alpha.push(a);
        for _ in 0..2 {
            for v in &basis {
                let c = dotc(v, &w);
                w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
            }
        }
        let lambda = tridiagonal_max_eigenvalue(&alpha, &beta).max(0.0);
        let value = lambda.sqrt();
        let b = norm2(&w);
        let converged = k > 0 && (value - last).abs() <= opts.tolerance * value;
        if converged || b <= 1e-14 * value.max(f64::MIN_POSITIVE) || k + 1 == steps {
            if !value.is_finite() {
                return Err(Error::NoConvergence {
                    iterations: k + 1,
                    estimate: value,
                });
            }
            if converged || b <= 1e-14 * value.max(f64::MIN_POSITIVE) || k + 1 == dim {
                return Ok(NormEstimate {
                    value,
                    iterations: k + 1,
                });
            }
            return Err(Error::NoConvergence {
                iterations: k + 1,
                estimate: value,
            });
        }
        last = value;
        beta.push(b);
        q = w.into_iter().map(|v| v / b).collect();
    }
    unreachable!("loop returns on its last step")
}

/// `‖A‖₂` of an explicit matrix.
pub fn matrix_norm(a: &CMat, opts: &NormOptions) -> Result<NormEstimate> {
    if a.rows == 0 || a.cols == 0 {
        return Ok(NormEstimate {
            value: 0.0,
            iterations: 0,
        });
    }
    operator_norm(a.cols, |x| Ok(a.matvec(x)), |y| Ok(a.matvec_adjoint(y)), opts)
}

/// `‖diag(√l)·A·diag(1/√r)‖₂`, the norm of `A` from `L²(r)` to `L²(l)`.
pub fn weighted_matrix_norm(
    a: &CMat,
    left_weights: &[f64],
    right_weights: &[f64],
    opts: &NormOptions,
) -> Result<NormEstimate> {
    if left_weights.len() != a.rows || right_weights.len() != a.cols {
        return Err(Error::Length {
            expected: a.rows + a.cols,
            got: left_weights.len() + right_weights.len(),
        });
    }
    if left_weights.iter().chain(right_weights).any(|&w| !(w > 0.0)) {
        return Err(Error::Argument("operator norm weights must be positive".into()));
    }
    let mut b = a.clone();
    let l: Vec<Complex64> = left_weights.iter().map(|w| Complex64::new(w.sqrt(), 0.0)).collect();
    let r: Vec<Complex64> = right_weights.iter().map(|w| Complex64::new(1.0 / w.sqrt(), 0.0)).collect();
    b.scale_rows(&l);
    b.scale_cols(&r);
    matrix_norm(&b, opts)
}

/// `‖A⁻¹‖₂` from an LU factorization.
pub fn inverse_norm(lu: &Lu, opts: &NormOptions) -> Result<NormEstimate> {
    operator_norm(lu.dim(), |x| Ok(lu.solve(x)), |y| Ok(lu.solve_adjoint(y)), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMat::from_vec(
            rows,
            cols,
            (0..rows * cols)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap()
    }

    /// Largest singular value by one-sided Jacobi rotations, used as an
    /// independent oracle.
    fn jacobi_max_singular(a: &CMat) -> f64 {
        if a.cols() > a.rows() {
            return jacobi_max_singular(&a.transpose().conj());
        }
        let m = a.rows();
        let n = a.cols();
        let mut cols: Vec<Vec<Complex64>> = (0..n).map(|j| (0..m).map(|i| a.get(i, j)).collect()).collect();
        for _sweep in 0..60 {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in p + 1..n {
                    let alpha: f64 = cols[p].iter().map(|v| v.norm_sqr()).sum();
                    let beta: f64 = cols[q].iter().map(|v| v.norm_sqr()).sum();
                    let gamma = dotc(&cols[p], &cols[q]);
                    if gamma.norm() < 1e-15 * (alpha * beta).sqrt() {
                        continue;
                    }
                    off = off.max(gamma.norm() / (alpha * beta).sqrt());
                    let phase = gamma / gamma.norm();
                    let zeta = (beta - alpha) / (2.0 * gamma.norm());
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let t = if zeta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for i in 0..m {
                        let x = cols[p][i];
                        let y = cols[q][i];
                        cols[p][i] = c * x - s * phase.conj() * y;
                        cols[q][i] = s * phase * x + c * y;
                    }
                }
            }
            if off < 1e-15 {
                break;
            }
        }
        cols.iter().map(|c| norm2(c)).fold(0.0, f64::max)
    }

    #[test]
    fn jacobi_oracle_on_diagonal() {
        let mut a = CMat::zeros(3, 3);
        a.set(0, 0, Complex64::new(1.0, 0.0));
        a.set(1, 1, Complex64::new(0.0, -3.0));
        a.set(2, 2, Complex64::new(2.0, 0.0));
        assert!((jacobi_max_singular(&a) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn norm_matches_jacobi_oracle() {
        for (m, n, seed) in [(20, 20, 1), (30, 12, 2), (12, 30, 3), (64, 64, 4)] {
            let a = random_matrix(m, n, seed);
            let expect = jacobi_max_singular(&a);
            let got = matrix_norm(&a, &NormOptions::default()).unwrap().value;
            assert!((got - expect).abs() < 1e-8 * expect, "{m}x{n}: {got} vs {expect}");
        }
    }

    #[test]
    fn lu_solves_and_transposes() {
        let n = 40;
        let mut a = random_matrix(n, n, 9);
        a.add_identity(Complex64::new(2.0, 0.0));
        let lu = Lu::factor(a.clone()).unwrap();
        let b: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let x = lu.solve(&b);
        let r = a.matvec(&x);
        assert!(r.iter().zip(&b).all(|(u, v)| (u - v).norm() < 1e-11 * norm2(&b)));
        let xt = lu.solve_transpose(&b);
        let rt = a.transpose().matvec(&xt);
        assert!(rt.iter().zip(&b).all(|(u, v)| (u - v).norm() < 1e-11 * norm2(&b)));
        let xa = lu.solve_adjoint(&b);
        let ra = a.matvec_adjoint(&xa);
        assert!(ra.iter().zip(&b).all(|(u, v)| (u - v).norm() < 1e-11 * norm2(&b)));
        let f = random_matrix(7, n, 10);
        let xr = lu.solve_right(&f);
        assert!(xr.matmul(&a).sub(&f).frobenius_norm() < 1e-11 * f.frobenius_norm());
        let g = random_matrix(n, 5, 11);
        let xl = lu.solve_left(&g);
        assert!(a.matmul(&xl).sub(&g).frobenius_norm() < 1e-11 * g.frobenius_norm());
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = CMat::zeros(4, 4);
        assert!(matches!(Lu::factor(a), Err(Error::Singular)));
    }

    #[test]
    fn weighted_norm_trivial_cases() {
        let o = NormOptions::default();
        let id = CMat::identity(4);
        assert!((weighted_matrix_norm(&id, &[1.0; 4], &[1.0; 4], &o).unwrap().value - 1.0).abs() < 1e-14);
        let mut d = CMat::identity(2);
        d.set(0, 0, Complex64::new(3.0, 0.0));
        assert!((weighted_matrix_norm(&d, &[1.0; 2], &[1.0; 2], &o).unwrap().value - 3.0).abs() < 1e-13);
        // diag(1/c²) from L²_c to L²_c with c = 2 on one node: 1/4 there.
        let mut e = CMat::identity(2);
        e.set(1, 1, Complex64::new(0.25, 0.0));
        let w = [1.0, 0.25];
        assert!((weighted_matrix_norm(&e, &w, &w, &o).unwrap().value - 1.0).abs() < 1e-13);
        assert!(weighted_matrix_norm(&e, &[1.0, 0.0], &w, &o).is_err());
    }

    #[test]
    fn inverse_norm_of_diagonal() {
        let mut a = CMat::identity(5);
        a.set(3, 3, Complex64::new(0.01, 0.0));
        let lu = Lu::factor(a).unwrap();
        let v = inverse_norm(&lu, &NormOptions::default()).unwrap().value;
        assert!((v - 100.0).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn norm_is_homogeneous_and_bounded(seed in 0u64..1000, s in 0.1f64..10.0) {
            let a = random_matrix(10, 10, seed);
            let o = NormOptions::default();
            let n1 = matrix_norm(&a, &o).unwrap().value;
            let mut b = a.clone();
            b.scale(Complex64::new(0.0, s));
            let n2 = matrix_norm(&b, &o).unwrap().value;
            prop_assert!((n2 - s * n1).abs() <= 1e-8 * n2);
            prop_assert!(n1 <= a.frobenius_norm() * (1.0 + 1e-12));
            prop_assert!(n1 >= a.max_abs() * (1.0 - 1e-12));
        }
    }
}
