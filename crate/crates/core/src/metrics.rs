//! SNR, scalar-aligned recovery errors and the correlation functional.

use crate::error::{check_len, Error, Result};
use crate::numerics::{dot, norm, norm_sq, C64, ZERO};
use crate::system::ProblemInstance;

/// Entries of `ŝ` smaller than this in modulus are treated as degenerate gains.
pub const DEGENERATE_GAIN: f64 = 1e-12;

/// `10·log10(Σ‖y_l‖² / Σ‖ε_l‖²)`; `+∞` without noise.
pub fn snr_db(y_clean: &[Vec<C64>], eps: &[Vec<C64>]) -> f64 {
    let signal: f64 = y_clean.iter().map(|y| norm_sq(y)).sum();
    let noise: f64 = eps.iter().map(|e| norm_sq(e)).sum();
    if noise == 0.0 {
        return f64::INFINITY;
    }
    if signal == 0.0 {
        return f64::NEG_INFINITY;
    }
    10.0 * (signal / noise).log10()
}

/// `20·log10(err)`, with `−∞` for an exact zero.
pub fn to_db(err: f64) -> f64 {
    if err == 0.0 {
        f64::NEG_INFINITY
    } else {
        20.0 * err.log10()
    }
}

/// `min_α ‖α·v̂ − v0‖ / ‖v0‖` and the minimizing `α = ⟨v̂, v0⟩ / ‖v̂‖²`.
pub fn aligned_rel_error(v_hat: &[C64], v0: &[C64]) -> Result<(f64, C64)> {
    check_len(v0.len(), v_hat.len())?;
    let n0 = norm(v0);
    if n0 == 0.0 {
        return Err(Error::InvalidInput("reference vector is zero".into()));
    }
    let nh = norm_sq(v_hat);
    if nh == 0.0 {
        return Ok((1.0, ZERO));
    }
    let alpha = dot(v_hat, v0) / nh;
    let resid: f64 = v_hat.iter().zip(v0).map(|(a, b)| (alpha * a - b).norm_sqr()).sum();
    Ok((resid.sqrt() / n0, alpha))
}

/// `u*v / (‖u‖·‖v‖)`
pub fn corr(u: &[C64], v: &[C64]) -> Result<C64> {
    check_len(u.len(), v.len())?;
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::InvalidInput("correlation of a zero vector".into()));
    }
    Ok(dot(u, v) / (nu * nv))
}

/// `‖ẑ − α·z0‖ / ‖α·z0‖` with `α = c / (w*z0)`: the error the stability
/// theory bounds.
pub fn constrained_error(z_hat: &[C64], z0: &[C64], w: &[C64], c: C64) -> Result<f64> {
    check_len(z0.len(), z_hat.len())?;
    check_len(z0.len(), w.len())?;
    let wz = dot(w, z0);
    if wz == ZERO || c == ZERO {
        return Err(Error::InvalidInput("w*z0 and c must be nonzero".into()));
    }
    let alpha = c / wz;
    let diff: f64 = z_hat.iter().zip(z0).map(|(a, b)| (a - alpha * b).norm_sqr()).sum();
    Ok(diff.sqrt() / (alpha.norm() * norm(z0)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// `max(gain_error, signal_error)`
    pub rel_error: f64,
    pub rel_error_db: f64,
    pub gain_error: f64,
    pub signal_error: f64,
    pub gain_alpha: C64,
    pub signal_alpha: C64,
    /// Count of `ŝ` entries clamped because `|ŝ_i| < 1e-12`.
    pub degenerate_gains: usize,
}

/// Recovered gains `d̂ = 1/ŝ`, clamping degenerate entries. Returns the
/// number of clamped entries.
pub fn gains_from_s(s_hat: &[C64]) -> (Vec<C64>, usize) {
    let mut clamped = 0;
    let d = s_hat
        .iter()
        .map(|s| {
            if s.norm() < DEGENERATE_GAIN {
                clamped += 1;
                let phase = if *s == ZERO { C64::new(1.0, 0.0) } else { s / s.norm() };
                (phase * DEGENERATE_GAIN).inv()
            } else {
                s.inv()
            }
        })
        .collect();
    (d, clamped)
}

/// Recovery error of `ẑ = (ŝ, x̂)` against the instance's ground truth. The
/// signal error aligns the whole concatenation `(x̂_1, …, x̂_p)` with one scalar.
pub fn rel_error_report(z_hat: &[C64], problem: &ProblemInstance) -> Result<ErrorReport> {
    check_len(problem.dim(), z_hat.len())?;
    if z_hat.iter().all(|z| *z == ZERO) {
        return Err(Error::InvalidInput("estimate is identically zero".into()));
    }
    let (s_hat, x_hat) = z_hat.split_at(problem.m);
    let (d_hat, degenerate_gains) = gains_from_s(s_hat);
    let (gain_error, gain_alpha) = aligned_rel_error(&d_hat, &problem.d0)?;
    let x0: Vec<C64> = problem.signals.concat();
    let (signal_error, signal_alpha) = aligned_rel_error(x_hat, &x0)?;
    let rel_error = gain_error.max(signal_error);
    Ok(ErrorReport {
        rel_error,
        rel_error_db: to_db(rel_error),
        gain_error,
        signal_error,
        gain_alpha,
        signal_alpha,
        degenerate_gains,
    })
}
