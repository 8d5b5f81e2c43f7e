//! Closed-form stability bounds: condition numbers, noise level, error
//! prediction and the second smallest singular value of `S_0`.

use crate::error::{check_len, Error, Result};
use crate::metrics::corr;
use crate::numerics::{norm_sq, C64};
use crate::system::{delta_a_norm, ModelKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaBound {
    pub general: f64,
    /// The reduced form, present when `‖w‖` sits at its natural scale.
    pub simplified: Option<f64>,
}

impl KappaBound {
    pub fn value(&self) -> f64 {
        self.general
    }
}

fn gain_extremes(d0: &[C64]) -> Result<(f64, f64)> {
    if d0.is_empty() {
        return Err(Error::InvalidDimension("empty gain vector".into()));
    }
    let mods = d0.iter().map(|d| d.norm());
    let (lo, hi) = mods.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo == 0.0 {
        return Err(Error::InvalidInput("gains must be nonzero".into()));
    }
    Ok((lo, hi))
}

fn norm_extremes(x_norms: &[f64]) -> Result<(f64, f64)> {
    let lo = x_norms.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x_norms.iter().copied().fold(0.0, f64::max);
    if x_norms.is_empty() || lo.is_nan() || lo <= 0.0 {
        return Err(Error::InvalidInput("signal norms must be positive".into()));
    }
    Ok((lo, hi))
}

fn natural_scale(w_sq: f64, target: f64) -> bool {
    (w_sq - target).abs() <= 1e-12 * target
}

/// Condition-number bound for repeated measurements. `Corr(w, z0) = 0` gives
/// `+∞`.
pub fn kappa_bound_model1(d0: &[C64], x_norm: f64, w: &[C64], z0: &[C64], m: usize, p: usize) -> Result<KappaBound> {
    check_len(m, d0.len())?;
    check_len(z0.len(), w.len())?;
    let (dmin, dmax) = gain_extremes(d0)?;
    norm_extremes(&[x_norm])?;
    let mp = (m * p) as f64;
    let mf = m as f64;
    let w_sq = norm_sq(w);
    let rho = corr(w, z0)?.norm();
    let x_sq = x_norm * x_norm;
    let ratio = (dmax * dmax * x_sq).max(mf) / (dmin * dmin * x_sq).min(mf);
    if rho == 0.0 {
        return Ok(KappaBound { general: f64::INFINITY, simplified: None });
    }
    let general = (6.0 * (mp + w_sq) / mp.min(w_sq * rho * rho) * ratio).sqrt();
    let simplified = natural_scale(w_sq, mp).then(|| 2.0 * 3f64.sqrt() / rho * ratio.sqrt());
    Ok(KappaBound { general, simplified })
}

/// Condition-number bound shared by diverse inputs and multiple snapshots.
pub fn kappa_bound_model23(
    d0: &[C64],
    x_norms: &[f64],
    w: &[C64],
    z0: &[C64],
    m: usize,
    p: usize,
) -> Result<KappaBound> {
    check_len(m, d0.len())?;
    check_len(z0.len(), w.len())?;
    let (dmin, dmax) = gain_extremes(d0)?;
    let (xmin, xmax) = norm_extremes(x_norms)?;
    let (mf, pf) = (m as f64, p as f64);
    let w_sq = norm_sq(w);
    let rho = corr(w, z0)?.norm();
    let ratio = (pf * dmax * dmax).max(mf / (xmin * xmin)) / (pf * dmin * dmin).min(mf / (xmax * xmax));
    if rho == 0.0 {
        return Ok(KappaBound { general: f64::INFINITY, simplified: None });
    }
    let lead = 6.0 * xmax * xmax * (mf + w_sq) / (xmin * xmin * mf.min(w_sq * rho * rho));
    let general = (lead * ratio).sqrt();
    let simplified = natural_scale(w_sq, mf).then(|| 2.0 * 3f64.sqrt() * xmax / (xmin * rho) * ratio.sqrt());
    Ok(KappaBound { general, simplified })
}

/// `2‖δA‖/√(mp)` for repeated measurements, `2‖δA‖/√m` otherwise.
pub fn eta(model: ModelKind, eps: &[Vec<C64>], m: usize, p: usize) -> f64 {
    let scale = match model {
        ModelKind::RepeatedMeasurements => ((m * p) as f64).sqrt(),
        _ => (m as f64).sqrt(),
    };
    2.0 * delta_a_norm(eps) / scale
}

/// `κη(1 + 2/(1 − κη))` when `κη < 1`, else `+∞`.
pub fn predicted_error_upper(kappa: f64, eta: f64) -> f64 {
    let k = kappa * eta;
    if k < 1.0 {
        k * (1.0 + 2.0 / (1.0 - k))
    } else {
        f64::INFINITY
    }
}

/// Lower bound on `σ₂(S_0)`. `x_norms` holds `‖x‖` for model 1 and every
/// `‖x_l‖` otherwise.
pub fn sigma2_lower_bound(model: ModelKind, d_min: f64, x_norms: &[f64], m: usize, p: usize) -> Result<f64> {
    if d_min.is_nan() || d_min <= 0.0 || m == 0 || p == 0 {
        return Err(Error::InvalidInput("d_min, m and p must be positive".into()));
    }
    let (xmin, xmax) = norm_extremes(x_norms)?;
    let (mf, pf) = (m as f64, p as f64);
    Ok(match model {
        ModelKind::RepeatedMeasurements => (pf / 2.0).sqrt() * mf.sqrt().min(d_min * xmax),
        _ => xmin / 2f64.sqrt() * (pf.sqrt() * d_min).min(mf.sqrt() / xmax),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{norm, ONE, ZERO};

    fn scaled(v: &[C64], target: f64) -> Vec<C64> {
        let k = target / norm(v);
        v.iter().map(|z| z * k).collect()
    }

    #[test]
    fn model1_simplified_collapses_to_two_root_three() {
        let (m, n, p) = (4usize, 2usize, 3usize);
        let d0 = vec![ONE; m];
        // ‖x‖² = m
        let x = vec![C64::new((m as f64 / n as f64).sqrt(), 0.0); n];
        let z0: Vec<C64> = vec![ONE; m].into_iter().chain(x.iter().copied()).collect();
        let w = scaled(&z0, ((m * p) as f64).sqrt());
        let b = kappa_bound_model1(&d0, norm(&x), &w, &z0, m, p).unwrap();
        let expected = 2.0 * 3f64.sqrt();
        assert!((b.simplified.unwrap() - expected).abs() < 1e-12);
        assert!((b.general - expected).abs() < 1e-12);
    }

    #[test]
    fn model1_forms_agree_at_natural_scale() {
        let d0 = vec![C64::new(0.7, 0.0), C64::new(1.3, 0.2), C64::new(1.1, 0.0)];
        let z0 = vec![C64::new(1.0, 0.5), C64::new(0.3, -0.2), ONE, C64::new(2.0, 0.0), C64::new(-1.0, 1.0)];
        let w = scaled(&[ONE, ONE, ONE, ZERO, ONE], 6f64.sqrt());
        let b = kappa_bound_model1(&d0, 2.5, &w, &z0, 3, 2).unwrap();
        assert!((b.general - b.simplified.unwrap()).abs() < 1e-12 * b.general);
    }

    #[test]
    fn zero_correlation_gives_infinite_bound() {
        let b = kappa_bound_model1(&[ONE], 1.0, &[ONE, ZERO], &[ZERO, ONE], 1, 1).unwrap();
        assert_eq!(b.general, f64::INFINITY);
    }

    #[test]
    fn model23_simplified_cases() {
        let (m, p) = (8usize, 2usize);
        // p·d² = m/x² with d = 1 → x² = m/p = 4
        let d0 = vec![ONE; m];
        let xn = vec![2.0, 2.0];
        let z0: Vec<C64> = (0..m + 4).map(|i| C64::new(1.0 + i as f64, 0.0)).collect();
        let w = scaled(&z0, (m as f64).sqrt());
        let b = kappa_bound_model23(&d0, &xn, &w, &z0, m, p).unwrap();
        assert!((b.simplified.unwrap() - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        assert!((b.general - b.simplified.unwrap()).abs() < 1e-12);

        // x_max/x_min = 2 doubles the leading factor
        let base = kappa_bound_model23(&d0, &[1.0, 1.0], &w, &z0, m, p).unwrap().simplified.unwrap();
        let wide = kappa_bound_model23(&d0, &[1.0, 2.0], &w, &z0, m, p).unwrap().simplified.unwrap();
        let ratio_base = ((p as f64).max(m as f64) / (p as f64).min(m as f64)).sqrt();
        let ratio_wide = ((p as f64).max(m as f64) / (p as f64).min(m as f64 / 4.0)).sqrt();
        assert!((wide / ratio_wide - 2.0 * base / ratio_base).abs() < 1e-12);
    }

    #[test]
    fn eta_values() {
        assert_eq!(eta(ModelKind::RepeatedMeasurements, &[vec![ZERO; 4]], 4, 1), 0.0);
        let mut e = vec![ZERO; 9];
        e[4] = C64::new(0.0, 3.0);
        assert!((eta(ModelKind::RepeatedMeasurements, &[e.clone()], 9, 1) - 2.0).abs() < 1e-15);
        assert!((eta(ModelKind::DiverseInputs, &[e.clone(), e], 9, 2) - 2.0 * 18f64.sqrt() / 3.0).abs() < 1e-14);
    }

    #[test]
    fn predicted_error_values() {
        assert_eq!(predicted_error_upper(3.0, 0.0), 0.0);
        assert!((predicted_error_upper(1.0, 0.5) - 2.5).abs() < 1e-15);
        assert_eq!(predicted_error_upper(2.0, 0.5), f64::INFINITY);
    }

    #[test]
    fn sigma2_bound_values() {
        let b = sigma2_lower_bound(ModelKind::RepeatedMeasurements, 1.0, &[10.0], 4, 2).unwrap();
        assert!((b - 2.0).abs() < 1e-15);
        let b = sigma2_lower_bound(ModelKind::DiverseInputs, 1.0, &[1.0; 4], 16, 4).unwrap();
        assert!((b - 2f64.sqrt()).abs() < 1e-15);
        assert!(sigma2_lower_bound(ModelKind::DiverseInputs, 0.0, &[1.0], 4, 1).is_err());
    }

    proptest::proptest! {
        #[test]
        fn bounds_are_pure_and_nonnegative(k in 0.0f64..10.0, e in 0.0f64..1.0) {
            let a = predicted_error_upper(k, e);
            proptest::prop_assert!(a >= 0.0);
            proptest::prop_assert_eq!(a.to_bits(), predicted_error_upper(k, e).to_bits());
            proptest::prop_assert_eq!(a.is_finite(), k * e < 1.0);
        }
    }
}
