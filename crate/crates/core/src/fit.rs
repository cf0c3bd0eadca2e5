//! Least-squares and envelope fits of scan norms and energy traces.

use serde::Serialize;

use crate::wave::EnergyTrace;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `a + b·|λ|^{n−2}·|log λ|`
    LowEnergy,
    /// `log‖·‖ = a + b·λ`
    HighEnergy,
    /// `E^{1/2}(t) ≤ C·(log(2+t))^{−k}·‖d‖_{D(B^k)}`
    DecayEnvelope,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub model: FitModel,
    pub coefficients: Vec<f64>,
    /// `‖y − Ac‖/‖y‖` for the regressions; zero for the envelope.
    pub residual: f64,
    pub samples: usize,
    pub range: [f64; 2],
    /// `(t, E^{1/2}(t)·(log(2+t))^k)` for the envelope fit.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub ratio_profile: Vec<(f64, f64)>,
}

impl FitResult {
    /// `max/min` of the envelope ratio over the sampled times.
    pub fn ratio_band(&self) -> f64 {
        let max = self.ratio_profile.iter().map(|r| r.1).fold(0.0, f64::max);
        let min = self.ratio_profile.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        max / min
    }
}

fn range_of(xs: impl Iterator<Item = f64>) -> [f64; 2] {
    xs.fold([f64::INFINITY, f64::NEG_INFINITY], |[lo, hi], x| [lo.min(x), hi.max(x)])
}

/// Two-column least squares by modified Gram–Schmidt; returns the
/// coefficients and the relative residual.
fn least_squares_2(a0: &[f64], a1: &[f64], y: &[f64]) -> Result<([f64; 2], f64)> {
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let r00 = dot(a0, a0).sqrt();
    if r00 == 0.0 {
        return Err(Error::Singular);
    }
    let q0: Vec<f64> = a0.iter().map(|v| v / r00).collect();
    let r01 = dot(&q0, a1);
    let w: Vec<f64> = a1.iter().zip(&q0).map(|(a, q)| a - r01 * q).collect();
    let r11 = dot(&w, &w).sqrt();
    if r11 <= 1e-14 * dot(a1, a1).sqrt() {
        return Err(Error::Singular);
    }
    let q1: Vec<f64> = w.iter().map(|v| v / r11).collect();
    let z0 = dot(&q0, y);
    let mut rest: Vec<f64> = y.iter().zip(&q0).map(|(v, q)| v - z0 * q).collect();
    let z1 = dot(&q1, &rest);
    rest.iter_mut().zip(&q1).for_each(|(v, q)| *v -= z1 * q);
    let b = z1 / r11;
    let a = (z0 - r01 * b) / r00;
    let ynorm = dot(y, y).sqrt();
    let residual = if ynorm == 0.0 { 0.0 } else { dot(&rest, &rest).sqrt() / ynorm };
    Ok(([a, b], residual))
}

fn check_count(got: usize, need: usize) -> Result<()> {
    if got < need {
        return Err(Error::Samples { need, got });
    }
    Ok(())
}

/// Fits `‖χR(λ)χ‖ ≈ a + b·|λ|^{n−2}·|log λ|` over `(λ, norm)` samples.
pub fn fit_low_energy(samples: &[(f64, f64)], dim: usize) -> Result<FitResult> {
    check_count(samples.len(), 8)?;
    if dim != 2 && dim != 3 {
        return Err(Error::Argument(format!("dimension {dim} not in {{2, 3}}")));
    }
    if let Some(s) = samples.iter().find(|s| !(s.0 > 0.0 && s.1.is_finite())) {
        return Err(Error::Argument(format!("invalid sample {s:?}")));
    }
    let ones = vec![1.0; samples.len()];
    let basis: Vec<f64> = samples
        .iter()
        .map(|&(l, _)| l.powi(dim as i32 - 2) * l.ln().abs())
        .collect();
    let y: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (c, residual) = least_squares_2(&ones, &basis, &y)?;
    Ok(FitResult {
        model: FitModel::LowEnergy,
        coefficients: c.to_vec(),
        residual,
        samples: samples.len(),
        range: range_of(samples.iter().map(|s| s.0)),
        ratio_profile: Vec::new(),
    })
}

/// Fits `log‖·‖ ≈ a + b·λ` for `λ ≥ 1`; `b` is the growth-rate surrogate.
pub fn fit_high_energy(samples: &[(f64, f64)]) -> Result<FitResult> {
    check_count(samples.len(), 4)?;
    if let Some(s) = samples.iter().find(|s| !(s.1 > 0.0)) {
        return Err(Error::Argument(format!("nonpositive norm in sample {s:?}")));
    }
    if let Some(s) = samples.iter().find(|s| !(s.0 >= 1.0)) {
        return Err(Error::Argument(format!("sample {s:?} below λ = 1")));
    }
    let ones = vec![1.0; samples.len()];
    let x: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let (c, residual) = least_squares_2(&ones, &x, &y)?;
    Ok(FitResult {
        model: FitModel::HighEnergy,
        coefficients: c.to_vec(),
        residual,
        samples: samples.len(),
        range: range_of(x.into_iter()),
        ratio_profile: Vec::new(),
    })
}

/// Smallest `C` with `E^{1/2}(t) ≤ C·(log(2+t))^{−k}·g` at every sample,
/// where `E` is the local energy of the trace and `g` the graph norm.
pub fn fit_decay(trace: &EnergyTrace, k: u32, graph_norm: f64) -> Result<FitResult> {
    if k < 1 {
        return Err(Error::Argument("decay order k must be at least 1".into()));
    }
    if !(graph_norm > 0.0 && graph_norm.is_finite()) {
        return Err(Error::Argument(format!("graph norm {graph_norm} must be positive")));
    }
    check_count(trace.times.len(), 1)?;
    if trace.times.len() != trace.local.len() {
        return Err(Error::Length {
            expected: trace.times.len(),
            got: trace.local.len(),
        });
    }
    if let Some(&t) = trace.times.iter().find(|&&t| !(t >= 0.0)) {
        return Err(Error::Argument(format!("negative sample time {t}")));
    }
    let profile: Vec<(f64, f64)> = trace
        .times
        .iter()
        .zip(&trace.local)
        .map(|(&t, &e)| (t, e.max(0.0).sqrt() * (2.0 + t).ln().powi(k as i32)))
        .collect();
    let c = profile.iter().map(|r| r.1).fold(0.0, f64::max) / graph_norm;
    Ok(FitResult {
        model: FitModel::DecayEnvelope,
        coefficients: vec![c, k as f64],
        residual: 0.0,
        samples: profile.len(),
        range: range_of(trace.times.iter().copied()),
        ratio_profile: profile,
    })
}

/// Time after which every wave launched from `B(0, R₁)` has left `B(0, R₂)`.
pub fn transit_time(r1: f64, r2: f64, c_min: f64) -> f64 {
    (r1 + r2) / c_min
}

/// Whether the local energy never rises by more than `tol` after `t0`.
pub fn non_increasing_after(trace: &EnergyTrace, t0: f64, tol: f64) -> bool {
    let tail: Vec<f64> = trace
        .times
        .iter()
        .zip(&trace.local)
        .filter(|(&t, _)| t >= t0)
        .map(|(_, &e)| e)
        .collect();
    tail.windows(2).all(|w| w[1] <= w[0] + tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::{prop_assert, proptest};

    fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
    }

    fn trace(times: &[f64], local: &[f64]) -> EnergyTrace {
        EnergyTrace {
            times: times.to_vec(),
            local: local.to_vec(),
            global: local.to_vec(),
            graph_norms: [None; 3],
        }
    }

    #[test]
    fn exact_low_energy_recovery() {
        let s: Vec<(f64, f64)> = geometric(1e-4, 1e-1, 12)
            .into_iter()
            .map(|l| (l, 2.0 + 3.0 * l.ln().abs()))
            .collect();
        let f = fit_low_energy(&s, 2).unwrap();
        assert!((f.coefficients[0] - 2.0).abs() < 1e-10);
        assert!((f.coefficients[1] - 3.0).abs() < 1e-10);
        assert!(f.residual < 1e-13);
        assert_eq!(f.range, [1e-4, 1e-1]);
    }

    #[test]
    fn constant_data_in_3d() {
        let s: Vec<(f64, f64)> = geometric(1e-4, 1e-1, 10).into_iter().map(|l| (l, 0.7)).collect();
        let f = fit_low_energy(&s, 3).unwrap();
        assert!(f.coefficients[1].abs() < 1e-10);
        assert!((f.coefficients[0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn low_energy_needs_samples() {
        let s = vec![(0.1, 1.0); 7];
        assert!(matches!(fit_low_energy(&s, 2), Err(Error::Samples { need: 8, got: 7 })));
    }

    #[test]
    fn high_energy_slope() {
        let s: Vec<(f64, f64)> = (0..10).map(|k| 1.0 + k as f64).map(|l| (l, 4.0 * (0.3 * l).exp())).collect();
        let f = fit_high_energy(&s).unwrap();
        assert!((f.coefficients[1] - 0.3).abs() < 1e-10);
        assert!((f.coefficients[0] - 4f64.ln()).abs() < 1e-10);
        let decaying: Vec<(f64, f64)> = (1..9).map(|k| (k as f64, 1.0 / k as f64)).collect();
        assert!(fit_high_energy(&decaying).unwrap().coefficients[1] < 0.0);
        assert!(fit_high_energy(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0), (4.0, 1.0)]).is_err());
        assert!(fit_high_energy(&[(0.5, 1.0), (2.0, 1.0), (3.0, 1.0), (4.0, 1.0)]).is_err());
    }

    #[test]
    fn decay_envelope_cases() {
        let times: Vec<f64> = (0..20).map(|k| k as f64 * 0.5).collect();
        let local: Vec<f64> = times.iter().map(|t| (2.0 + t).ln().powi(-2)).collect();
        let f = fit_decay(&trace(&times, &local), 1, 1.0).unwrap();
        assert!((f.coefficients[0] - 1.0).abs() < 1e-14);
        assert!((f.ratio_band() - 1.0).abs() < 1e-12);
        let zero = fit_decay(&trace(&times, &vec![0.0; 20]), 1, 1.0).unwrap();
        assert_eq!(zero.coefficients[0], 0.0);
        assert!(fit_decay(&trace(&times, &local), 1, 0.0).is_err());
        assert!(fit_decay(&trace(&times, &local), 0, 1.0).is_err());
    }

    #[test]
    fn monotone_tail() {
        let t = trace(&[0.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 0.5, 0.5005]);
        assert!(non_increasing_after(&t, 1.5, 1e-3));
        assert!(!non_increasing_after(&t, 0.0, 1e-3));
        assert_eq!(transit_time(1.0, 2.0, 0.5), 6.0);
    }

    proptest! {
        #[test]
        fn fits_ignore_sample_order(seed in 0u64..1000, a in 0.1f64..5.0, b in -2.0f64..2.0) {
            let base: Vec<(f64, f64)> = geometric(1e-4, 1e-1, 12)
                .into_iter()
                .enumerate()
                .map(|(k, l)| (l, a + b * l.ln().abs() + 1e-3 * ((k as f64) * 1.7).sin()))
                .collect();
            let mut shuffled = base.clone();
            let n = shuffled.len();
            for k in 0..n {
                shuffled.swap(k, (seed as usize * 7 + k * 13) % n);
            }
            let f = fit_low_energy(&base, 2).unwrap();
            let g = fit_low_energy(&shuffled, 2).unwrap();
            prop_assert!((f.coefficients[0] - g.coefficients[0]).abs() < 1e-9 * (1.0 + f.coefficients[0].abs()));
            prop_assert!((f.coefficients[1] - g.coefficients[1]).abs() < 1e-9 * (1.0 + f.coefficients[1].abs()));
            prop_assert!((f.residual - g.residual).abs() < 1e-9);
        }

        #[test]
        fn envelope_is_homogeneous_and_monotone(scale in 0.01f64..100.0, extra in 0.0f64..3.0) {
            let times: Vec<f64> = (0..15).map(|k| k as f64 * 0.3).collect();
            let local: Vec<f64> = times.iter().map(|t| 1.0 / (1.0 + t * t)).collect();
            let c1 = fit_decay(&trace(&times, &local), 2, 1.5).unwrap().coefficients[0];
            let scaled: Vec<f64> = local.iter().map(|e| e * scale * scale).collect();
            let c2 = fit_decay(&trace(&times, &scaled), 2, 1.5).unwrap().coefficients[0];
            prop_assert!((c2 - scale * c1).abs() < 1e-12 * c2.max(1e-300));
            let mut t2 = times.clone();
            let mut l2 = local.clone();
            t2.push(5.0);
            l2.push(extra);
            let c3 = fit_decay(&trace(&t2, &l2), 2, 1.5).unwrap().coefficients[0];
            prop_assert!(c3 >= c1);
        }
    }
}
