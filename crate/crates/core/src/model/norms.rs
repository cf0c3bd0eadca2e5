use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use super::{CauchyData, Grid, WavespeedProfile};
use crate::{Error, Result};

/// A pair of complex grid functions, an element of the discrete energy space.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    pub u0: Vec<Complex64>,
    pub u1: Vec<Complex64>,
}

impl FieldPair {
    pub fn zeros(len: usize) -> Self {
        Self {
            u0: vec![Complex64::new(0.0, 0.0); len],
            u1: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn from_data(data: &CauchyData) -> Self {
        Self {
            u0: data.u0.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            u1: data.u1.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

fn strides(grid: &Grid) -> [usize; 3] {
    let n = grid.per_axis();
    let mut s = [0usize; 3];
    for (axis, stride) in s.iter_mut().enumerate().take(grid.dim()) {
        *stride = n.pow((grid.dim() - 1 - axis) as u32);
    }
    s
}

/// `Δ_h f` with the (2n+1)-point stencil; values beyond the grid are zero.
pub fn laplacian<T>(grid: &Grid, f: &[T]) -> Vec<T>
where
    T: Copy + Default + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let n = grid.per_axis();
    let st = strides(grid);
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let centre = 2.0 * grid.dim() as f64;
    let mut out = vec![T::default(); f.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let mut acc = T::default();
        for &s in st.iter().take(grid.dim()) {
            let k = (idx / s) % n;
            if k > 0 {
                acc = acc + f[idx - s];
            }
            if k + 1 < n {
                acc = acc + f[idx + s];
            }
        }
        *o = (acc - f[idx] * centre) * inv_h2;
    }
    out
}

/// Per-node `Σ_axes ½(|D₊f|² + |D₋f|²)`; its sum over nodes is the
/// edge-based Dirichlet form that pairs with `Δ_h`.
pub fn gradient_energy_density(grid: &Grid, f: &[Complex64]) -> Vec<f64> {
    let n = grid.per_axis();
    let st = strides(grid);
    let inv_h = 1.0 / grid.spacing();
    let zero = Complex64::new(0.0, 0.0);
    (0..f.len())
        .map(|idx| {
            let mut acc = 0.0;
            for &s in st.iter().take(grid.dim()) {
                let k = (idx / s) % n;
                let fwd = if k + 1 < n { f[idx + s] } else { zero };
                let bwd = if k > 0 { f[idx - s] } else { zero };
                acc += 0.5 * ((fwd - f[idx]) * inv_h).norm_sqr();
                acc += 0.5 * ((f[idx] - bwd) * inv_h).norm_sqr();
            }
            acc
        })
        .collect()
}

fn gradient_pairing(grid: &Grid, a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let n = grid.per_axis();
    let st = strides(grid);
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let zero = Complex64::new(0.0, 0.0);
    let mut acc = zero;
    for idx in 0..a.len() {
        for &s in st.iter().take(grid.dim()) {
            let k = (idx / s) % n;
            let (af, bf) = if k + 1 < n {
                (a[idx + s], b[idx + s])
            } else {
                (zero, zero)
            };
            let (ab, bb) = if k > 0 {
                (a[idx - s], b[idx - s])
            } else {
                (zero, zero)
            };
            acc += 0.5 * ((af - a[idx]) * (bf - b[idx]).conj() + (a[idx] - ab) * (b[idx] - bb).conj());
        }
    }
    acc * inv_h2 * grid.weight()
}

fn check_len(grid: &Grid, len: usize) -> Result<()> {
    if len != grid.len() {
        return Err(Error::Length {
            expected: grid.len(),
            got: len,
        });
    }
    Ok(())
}

fn check_boundary<T: PartialEq + Default>(grid: &Grid, f: &[T]) -> Result<()> {
    let zero = T::default();
    match (0..f.len()).find(|&i| grid.is_boundary(i) && f[i] != zero) {
        Some(i) => Err(Error::BoundarySupport(i)),
        None => Ok(()),
    }
}

/// `Σᵢ f(xᵢ)·conj(g(xᵢ))·c(xᵢ)⁻²·wᵢ`.
pub fn weighted_inner_product(
    f: &[Complex64],
    g: &[Complex64],
    profile: &WavespeedProfile,
    grid: &Grid,
) -> Result<Complex64> {
    check_len(grid, f.len())?;
    check_len(grid, g.len())?;
    let w = grid.weight();
    Ok(f.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (a, b))| a * b.conj() * (profile.inv_c2(i) * w))
        .sum())
}

/// Discrete `Ḣ¹` seminorm from forward/backward differences. Rejects
/// functions that do not vanish on the boundary layer.
pub fn h1dot_seminorm(f: &[f64], grid: &Grid) -> Result<f64> {
    check_len(grid, f.len())?;
    check_boundary(grid, f)?;
    let fc: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Ok(h1dot_unchecked(grid, &fc))
}

pub fn h1dot_seminorm_complex(f: &[Complex64], grid: &Grid) -> Result<f64> {
    check_len(grid, f.len())?;
    check_boundary(grid, f)?;
    Ok(h1dot_unchecked(grid, f))
}

fn h1dot_unchecked(grid: &Grid, f: &[Complex64]) -> f64 {
    (gradient_energy_density(grid, f).iter().sum::<f64>() * grid.weight()).sqrt()
}

/// `⟨a, b⟩_H = ⟨∇a₀, ∇b₀⟩ + ⟨a₁, b₁⟩_{L²_c}`.
pub fn h_inner_product(
    a: &FieldPair,
    b: &FieldPair,
    profile: &WavespeedProfile,
    grid: &Grid,
) -> Result<Complex64> {
    check_len(grid, a.u0.len())?;
    check_len(grid, b.u0.len())?;
    Ok(gradient_pairing(grid, &a.u0, &b.u0) + weighted_inner_product(&a.u1, &b.u1, profile, grid)?)
}

pub fn h_norm(pair: &FieldPair, profile: &WavespeedProfile, grid: &Grid) -> Result<f64> {
    check_len(grid, pair.u0.len())?;
    check_len(grid, pair.u1.len())?;
    let grad = gradient_energy_density(grid, &pair.u0).iter().sum::<f64>() * grid.weight();
    let l2 = weighted_inner_product(&pair.u1, &pair.u1, profile, grid)?.re;
    Ok((grad + l2).sqrt())
}

/// `B_h(u₀, u₁) = (i·u₁, −i·L_h u₀)` with `L_h = −c²Δ_h`.
///
/// Fails when the result reaches the boundary layer.
pub fn apply_b(pair: &FieldPair, profile: &WavespeedProfile, grid: &Grid) -> Result<FieldPair> {
    check_len(grid, pair.u0.len())?;
    check_len(grid, pair.u1.len())?;
    check_boundary(grid, &pair.u0)?;
    check_boundary(grid, &pair.u1)?;
    let i = Complex64::new(0.0, 1.0);
    let lap = laplacian(grid, &pair.u0);
    let out = FieldPair {
        u0: pair.u1.iter().map(|v| i * v).collect(),
        u1: lap
            .iter()
            .enumerate()
            .map(|(k, v)| i * v * (profile.c(k) * profile.c(k)))
            .collect(),
    };
    check_boundary(grid, &out.u1)
        .map_err(|_| Error::Support("B_h widened the support onto the boundary layer".into()))?;
    Ok(out)
}

pub fn apply_b_power(
    pair: &FieldPair,
    k: usize,
    profile: &WavespeedProfile,
    grid: &Grid,
) -> Result<FieldPair> {
    let mut out = pair.clone();
    for _ in 0..k {
        out = apply_b(&out, profile, grid)?;
    }
    Ok(out)
}

/// `‖d‖_H + ‖B_h^k d‖_H` for `k ∈ {1,2,3}`; `k = 0` gives the plain `H` norm.
pub fn graph_norm(
    data: &CauchyData,
    k: usize,
    profile: &WavespeedProfile,
    grid: &Grid,
) -> Result<f64> {
    if k > 3 {
        return Err(Error::Argument(format!("graph norm order {k} not in 0..=3")));
    }
    let pair = FieldPair::from_data(data);
    check_boundary(grid, &pair.u0)?;
    check_boundary(grid, &pair.u1)?;
    let base = h_norm(&pair, profile, grid)?;
    if k == 0 {
        return Ok(base);
    }
    let image = apply_b_power(&pair, k, profile, grid)?;
    Ok(base + h_norm(&image, profile, grid)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_grid, make_wavespeed, DataPreset, ProfileSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    fn interior_random(grid: &Grid, rng: &mut ChaCha8Rng, margin: usize) -> Vec<Complex64> {
        let n = grid.per_axis() as i64;
        (0..grid.len())
            .map(|i| {
                let node = grid.multi_index(i);
                let inside = (0..grid.dim())
                    .all(|k| node[k] >= margin as i64 && node[k] < n - margin as i64);
                if inside {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                } else {
                    c(0.0)
                }
            })
            .collect()
    }

    fn bump_profile(grid: &Grid) -> WavespeedProfile {
        make_wavespeed(
            &ProfileSpec::LipschitzBump {
                amplitude: 0.5,
                radius: 0.6,
            },
            grid,
        )
        .unwrap()
    }

    #[test]
    fn weighted_product_trivial_cases() {
        let g = build_grid(2, 1.0, 0.125).unwrap();
        let ones = vec![c(1.0); g.len()];
        let p = WavespeedProfile::constant(&g);
        let v = weighted_inner_product(&ones, &ones, &p, &g).unwrap();
        assert!((v - c(1.0)).norm() < 1e-14);
        let mut p2 = p.clone();
        p2.values.iter_mut().for_each(|v| *v = 2.0);
        let v = weighted_inner_product(&ones, &ones, &p2, &g).unwrap();
        assert!((v - c(0.25)).norm() < 1e-14);
        assert!(weighted_inner_product(&ones[1..], &ones, &p, &g).is_err());
    }

    #[test]
    fn weighted_product_matches_reordered_sum() {
        let g = build_grid(2, 2.0, 0.125).unwrap();
        let p = bump_profile(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = interior_random(&g, &mut rng, 0);
        let h = interior_random(&g, &mut rng, 0);
        let got = weighted_inner_product(&f, &h, &p, &g).unwrap();
        // Oracle: reverse-order accumulation with the weight applied last.
        let mut acc = c(0.0);
        for i in (0..g.len()).rev() {
            acc += f[i] * h[i].conj() / (p.values[i] * p.values[i]);
        }
        acc *= g.weight();
        assert!((got - acc).norm() <= 1e-14 * acc.norm().max(1.0));
    }

    #[test]
    fn seminorm_zero_and_boundary_rejection() {
        let g = build_grid(2, 2.0, 0.25).unwrap();
        assert_eq!(h1dot_seminorm(&vec![0.0; g.len()], &g).unwrap(), 0.0);
        let mut f = vec![0.0; g.len()];
        f[0] = 1.0;
        assert!(matches!(h1dot_seminorm(&f, &g), Err(Error::BoundarySupport(0))));
    }

    #[test]
    fn seminorm_converges_at_second_order() {
        let mut values = Vec::new();
        for &h in &[1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
            let g = build_grid(2, 3.0, h).unwrap();
            let d = CauchyData::from_preset(&DataPreset::PolynomialBump { amplitude: 1.0 }, &g, 1.0)
                .unwrap();
            values.push(h1dot_seminorm(&d.u0, &g).unwrap().powi(2));
        }
        let e1 = (values[0] - values[1]).abs();
        let e2 = (values[1] - values[2]).abs();
        let order = (e1 / e2).log2();
        assert!(order > 1.8, "observed order {order}");
        // Closed form ∫|∇(1−r²)⁴|² over the disk = 2π·64·∫₀¹ r³(1−r²)⁶ dr = 2π·64/112.
        let exact = 2.0 * std::f64::consts::PI * 64.0 / 112.0;
        assert!((values[2] - exact).abs() / exact < 1e-3);
    }

    #[test]
    fn graph_norm_cases() {
        let g = build_grid(2, 4.0, 0.125).unwrap();
        let p = bump_profile(&g);
        let d = CauchyData::from_preset(
            &DataPreset::VelocityPulse {
                amplitude: 1.0,
                width: 0.3,
            },
            &g,
            1.0,
        )
        .unwrap();
        let pair = FieldPair::from_data(&d);
        let plain = h_norm(&pair, &p, &g).unwrap();
        assert_eq!(graph_norm(&d, 0, &p, &g).unwrap(), plain);
        // B(0, u₁) = (i u₁, 0)
        let k1 = graph_norm(&d, 1, &p, &g).unwrap();
        let l2c = weighted_inner_product(&pair.u1, &pair.u1, &p, &g).unwrap().re.sqrt();
        let h1 = h1dot_seminorm(&d.u1, &g).unwrap();
        assert!((k1 - (l2c + h1)).abs() < 1e-12 * k1);
        // k = 2 equals composing B twice by hand.
        let b1 = apply_b(&pair, &p, &g).unwrap();
        let b2 = apply_b(&b1, &p, &g).unwrap();
        let manual = plain + h_norm(&b2, &p, &g).unwrap();
        let k2 = graph_norm(&d, 2, &p, &g).unwrap();
        assert!((k2 - manual).abs() < 1e-12 * k2);
        assert!(graph_norm(&d, 4, &p, &g).is_err());
    }

    #[test]
    fn graph_norm_rejects_support_growth() {
        let g = build_grid(2, 2.0, 0.25).unwrap();
        let p = WavespeedProfile::constant(&g);
        let mut u0 = vec![0.0; g.len()];
        let idx = g.linear_index([2, 3, 0]).unwrap();
        u0[idx] = 1.0;
        let d = CauchyData {
            u0,
            u1: vec![0.0; g.len()],
            support_radius: 10.0,
        };
        assert!(graph_norm(&d, 2, &p, &g).is_ok());
        assert!(graph_norm(&d, 3, &p, &g).is_err());
    }

    #[test]
    fn discrete_l_is_self_adjoint_in_weighted_product() {
        let g = build_grid(2, 2.0, 0.125).unwrap();
        let p = bump_profile(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = interior_random(&g, &mut rng, 1);
        let v = interior_random(&g, &mut rng, 1);
        let l = |f: &[Complex64]| -> Vec<Complex64> {
            laplacian(&g, f)
                .iter()
                .enumerate()
                .map(|(i, x)| -x * p.values[i] * p.values[i])
                .collect()
        };
        let lhs = weighted_inner_product(&l(&u), &v, &p, &g).unwrap();
        let rhs = weighted_inner_product(&u, &l(&v), &p, &g).unwrap();
        let nu = weighted_inner_product(&u, &u, &p, &g).unwrap().re.sqrt();
        let nv = weighted_inner_product(&v, &v, &p, &g).unwrap().re.sqrt();
        let scale = nu * nv / (g.spacing() * g.spacing());
        assert!((lhs - rhs).norm() <= 1e-12 * scale);
    }

    #[test]
    fn discrete_b_is_symmetric_in_energy_product() {
        let g = build_grid(2, 2.0, 0.125).unwrap();
        let p = bump_profile(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = FieldPair {
            u0: interior_random(&g, &mut rng, 2),
            u1: interior_random(&g, &mut rng, 2),
        };
        let b = FieldPair {
            u0: interior_random(&g, &mut rng, 2),
            u1: interior_random(&g, &mut rng, 2),
        };
        let lhs = h_inner_product(&a, &apply_b(&b, &p, &g).unwrap(), &p, &g).unwrap();
        let rhs = h_inner_product(&apply_b(&a, &p, &g).unwrap(), &b, &p, &g).unwrap();
        assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(rhs.norm()));
    }
}
