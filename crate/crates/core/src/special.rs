//! Bessel and Hankel functions of order 0 and 1 at complex argument.
//!
//! The logarithm is taken with its branch cut along the negative imaginary
//! axis, `arg z ∈ (−π/2, 3π/2)`, so that `H₀⁽¹⁾(λr)` continues from the upper
//! half-plane through the positive and negative real axes into the lower
//! half-plane. Small arguments use the ascending series, large ones the
//! Hankel asymptotic expansion.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Modulus above which the asymptotic expansion is used.
const SERIES_LIMIT: f64 = 12.0;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Argument of `z` in `(−π/2, 3π/2]`.
pub fn branch_arg(z: Complex64) -> f64 {
    let a = z.arg();
    if a <= -FRAC_PI_2 {
        a + 2.0 * PI
    } else {
        a
    }
}

/// `log z` on the branch cut along the negative imaginary axis.
pub fn branch_ln(z: Complex64) -> Complex64 {
    Complex64::new(z.norm().ln(), branch_arg(z))
}

/// True when `z` lies on the cut `{−i s : s ≥ 0}`.
pub fn on_branch_cut(z: Complex64) -> bool {
    z.re == 0.0 && z.im <= 0.0
}

fn branch_sqrt(z: Complex64) -> Complex64 {
    Complex64::from_polar(z.norm().sqrt(), 0.5 * branch_arg(z))
}

/// Ascending series of `J₀`, `J₁` and the log-free parts of `Y₀`, `Y₁`.
struct Series {
    j0: Complex64,
    j1: Complex64,
    y0_tail: Complex64,
    y1_tail: Complex64,
}

fn ascending(z: Complex64) -> Series {
    let q = -0.25 * z * z;
    let half = 0.5 * z;
    // k-th terms: q^k/(k!)² and (z/2)·q^k/(k!(k+1)!)
    let mut t0 = Complex64::new(1.0, 0.0);
    let mut t1 = half;
    let mut j0 = t0;
    let mut j1 = t1;
    let mut harmonic = 0.0;
    let mut y0_tail = Complex64::new(0.0, 0.0);
    // ψ(k+1) + ψ(k+2) = −2γ + 2H_k + 1/(k+1)
    let mut y1_tail = t1 * (1.0 - 2.0 * EULER_GAMMA);
    for k in 1..200 {
        let kf = k as f64;
        t0 *= q / (kf * kf);
        t1 *= q / (kf * (kf + 1.0));
        harmonic += 1.0 / kf;
        j0 += t0;
        j1 += t1;
        y0_tail -= t0 * harmonic;
        y1_tail += t1 * (-2.0 * EULER_GAMMA + 2.0 * harmonic + 1.0 / (kf + 1.0));
        if t0.norm() < 1e-18 * j0.norm().max(1e-300) && t1.norm() < 1e-18 * j1.norm().max(1e-300)
        {
            break;
        }
    }
    Series {
        j0,
        j1,
        y0_tail,
        y1_tail,
    }
}

fn y_from_series(z: Complex64, s: &Series) -> (Complex64, Complex64) {
    let log_half = branch_ln(z) - std::f64::consts::LN_2;
    let y0 = (2.0 / PI) * ((log_half + EULER_GAMMA) * s.j0 + s.y0_tail);
    let y1 = (2.0 / PI) * s.j1 * log_half - 2.0 / (PI * z) - s.y1_tail / PI;
    (y0, y1)
}

/// Hankel asymptotic sums `P ± iQ` for order `nu` with the sign `sigma = ±1`
/// selecting `H⁽¹⁾` or `H⁽²⁾`.
fn asymptotic_sum(nu: f64, z: Complex64, sigma: f64) -> Complex64 {
    let mu = 4.0 * nu * nu;
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut last = f64::INFINITY;
    for k in 1..100 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = term * (mu - odd * odd) / (kf * 8.0) * (sigma * I) / z;
        let size = next.norm();
        if size > last {
            break;
        }
        term = next;
        sum += term;
        last = size;
        if size < 1e-17 * sum.norm() {
            break;
        }
    }
    sum
}

fn hankel_asymptotic(nu: f64, z: Complex64, sigma: f64) -> Complex64 {
    let phase = sigma * (z - nu * FRAC_PI_2 - FRAC_PI_4);
    let pre = (2.0 / PI).sqrt() / branch_sqrt(z);
    pre * (I * phase).exp() * asymptotic_sum(nu, z, sigma)
}

pub fn hankel1_0(z: Complex64) -> Complex64 {
    if z.norm() > SERIES_LIMIT {
        return hankel_asymptotic(0.0, z, 1.0);
    }
    let s = ascending(z);
    let (y0, _) = y_from_series(z, &s);
    s.j0 + I * y0
}

pub fn hankel1_1(z: Complex64) -> Complex64 {
    if z.norm() > SERIES_LIMIT {
        return hankel_asymptotic(1.0, z, 1.0);
    }
    let s = ascending(z);
    let (_, y1) = y_from_series(z, &s);
    s.j1 + I * y1
}

fn use_asymptotic_pair(z: Complex64) -> bool {
    z.norm() > SERIES_LIMIT && z.re > 0.0
}

pub fn bessel_j0(z: Complex64) -> Complex64 {
    if use_asymptotic_pair(z) {
        return 0.5 * (hankel_asymptotic(0.0, z, 1.0) + hankel_asymptotic(0.0, z, -1.0));
    }
    ascending(z).j0
}

pub fn bessel_j1(z: Complex64) -> Complex64 {
    if use_asymptotic_pair(z) {
        return 0.5 * (hankel_asymptotic(1.0, z, 1.0) + hankel_asymptotic(1.0, z, -1.0));
    }
    ascending(z).j1
}

pub fn bessel_y0(z: Complex64) -> Complex64 {
    if use_asymptotic_pair(z) {
        return -0.5 * I * (hankel_asymptotic(0.0, z, 1.0) - hankel_asymptotic(0.0, z, -1.0));
    }
    let s = ascending(z);
    y_from_series(z, &s).0
}

pub fn bessel_y1(z: Complex64) -> Complex64 {
    if use_asymptotic_pair(z) {
        return -0.5 * I * (hankel_asymptotic(1.0, z, 1.0) - hankel_asymptotic(1.0, z, -1.0));
    }
    let s = ascending(z);
    y_from_series(z, &s).1
}
