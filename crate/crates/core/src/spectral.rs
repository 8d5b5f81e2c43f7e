//! Spectral recovery: the right singular vector of `S` for its smallest
//! singular value, by power iteration on `λI − S*S`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lls::{count_upticks, SolveReport};
use crate::numerics::{dot, norm, norm_sq, RandomStream, C64, ZERO};
use crate::sensing::SensingOperator;
use crate::system::{ModelKind, StackedSystem};

/// Safety factor on power-iteration norm estimates.
pub const ESTIMATE_SAFETY: f64 = 1.1;
const START_TAG: u64 = 0x5bec_7a11;
const NORM_TAG: u64 = 0x9047_e571;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaMode {
    #[default]
    Auto,
    Manual(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectralConfig {
    pub lambda: LambdaMode,
    /// Bound on the relative change of the shifted Rayleigh quotient and on
    /// the eigen-residual relative to `λ`.
    pub tol: f64,
    pub max_iterations: usize,
    /// Rotate so the largest-magnitude entry is real and positive.
    pub normalize_phase: bool,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self { lambda: LambdaMode::Auto, tol: 1e-10, max_iterations: 5000, normalize_phase: true }
    }
}

impl SpectralConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput("max_iterations must be at least 1".into()));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidInput("tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Largest eigenvalue of a PSD operator by power iteration.
fn power_estimate<F>(dim: usize, stream: &mut RandomStream, apply: F) -> Result<f64>
where
    F: Fn(&[C64]) -> Result<Vec<C64>>,
{
    let mut v: Vec<C64> = (0..dim).map(|_| stream.complex_gaussian()).collect();
    let k = norm(&v);
    v.iter_mut().for_each(|z| *z /= k);
    let mut est = 0.0;
    for _ in 0..500 {
        let u = apply(&v)?;
        let next = dot(&v, &u).re;
        let nu = norm(&u);
        if nu == 0.0 {
            return Ok(0.0);
        }
        v = u.iter().map(|z| z / nu).collect();
        if (next - est).abs() <= 1e-9 * next {
            return Ok(next);
        }
        est = next;
    }
    Ok(est)
}

fn operator_norm_sq(op: &SensingOperator, stream: &mut RandomStream) -> Result<f64> {
    if let Some(v) = op.exact_norm_sq() {
        return Ok(v);
    }
    let est = power_estimate(op.cols(), stream, |v| op.adjoint(&op.apply(v)?))?;
    Ok(ESTIMATE_SAFETY * est)
}

/// Upper bound on `‖S‖²`: the exact norm of the gain block plus a bound on
/// the sensing block.
pub fn lambda_bound(sys: &StackedSystem<'_>) -> Result<f64> {
    let pr = sys.problem();
    let (m, p) = (pr.m, pr.p);
    let gain_term = (0..m).map(|i| sys.observations().iter().map(|y| y[i].norm_sqr()).sum::<f64>()).fold(0.0, f64::max);
    let mut stream = RandomStream::derive(pr.seed, NORM_TAG);
    let sensing_term = match pr.model {
        ModelKind::RepeatedMeasurements => {
            let ops: Vec<&SensingOperator> = (0..p).map(|l| pr.operator(l)).collect();
            if ops.iter().all(|op| op.gram_scale().is_some()) {
                ops.iter().map(|op| op.gram_scale().unwrap()).sum()
            } else if ops.iter().all(|op| op.exact_norm_sq().is_some()) {
                ops.iter().map(|op| op.exact_norm_sq().unwrap()).sum()
            } else {
                let est = power_estimate(pr.n, &mut stream, |v| {
                    let mut acc = vec![ZERO; v.len()];
                    for op in &ops {
                        for (a, b) in acc.iter_mut().zip(op.adjoint(&op.apply(v)?)?) {
                            *a += b;
                        }
                    }
                    Ok(acc)
                })?;
                ESTIMATE_SAFETY * est
            }
        }
        _ => pr
            .operators
            .iter()
            .map(|op| operator_norm_sq(op, &mut stream))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max),
    };
    Ok(gain_term + sensing_term)
}

/// Power-iteration estimate of `‖S‖²` (a lower estimate).
pub fn estimate_s_norm_sq(sys: &StackedSystem<'_>) -> Result<f64> {
    let mut stream = RandomStream::derive(sys.problem().seed, NORM_TAG ^ 1);
    power_estimate(sys.dim(), &mut stream, |v| sys.apply_s_adjoint(&sys.apply_s(v)?))
}

fn resolve_lambda(sys: &StackedSystem<'_>, mode: LambdaMode) -> Result<f64> {
    let lambda = match mode {
        LambdaMode::Auto => lambda_bound(sys)?,
        LambdaMode::Manual(l) => {
            if !l.is_finite() || l <= 0.0 {
                return Err(Error::InvalidInput(format!("lambda must be positive and finite (got {l})")));
            }
            let est = estimate_s_norm_sq(sys)?;
            if l < est {
                return Err(Error::InvalidInput(format!("lambda {l} is below the estimated ‖S‖² = {est}")));
            }
            l
        }
    };
    if lambda <= 0.0 {
        return Err(Error::InvalidInput("degenerate system: S is zero".into()));
    }
    Ok(lambda)
}

/// Multiply by the conjugate phase of the largest-magnitude entry.
pub fn normalize_phase(v: &mut [C64]) {
    let mut best = (0.0, ZERO);
    for z in v.iter() {
        if z.norm() > best.0 {
            best = (z.norm(), *z);
        }
    }
    if best.0 > 0.0 {
        let rot = best.1.conj() / best.0;
        v.iter_mut().for_each(|z| *z *= rot);
    }
}

/// Rescale `z` so that `⟨w, z⟩ = c`; `None` when `⟨w, z⟩ = 0`.
pub fn rescale_to_constraint(z: &[C64], w: &[C64], c: C64) -> Option<Vec<C64>> {
    let wz = dot(w, z);
    (wz != ZERO).then(|| z.iter().map(|x| x * (c / wz)).collect())
}

/// Unit-norm `ẑ` minimizing `‖S z‖`. The history holds `‖S v_k‖²`.
pub fn solve_spectral(sys: &StackedSystem<'_>, cfg: &SpectralConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let start = Instant::now();
    let lambda = resolve_lambda(sys, cfg.lambda)?;
    let dim = sys.dim();
    let mut stream = RandomStream::derive(sys.problem().seed, START_TAG);
    let mut v: Vec<C64> = (0..dim).map(|_| stream.complex_gaussian()).collect();
    let k = norm(&v);
    v.iter_mut().for_each(|z| *z /= k);

    let mut sv = sys.apply_s(&v)?;
    let mut rho = norm_sq(&sv);
    let mut history = vec![rho];
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=cfg.max_iterations {
        iterations = it;
        let g = sys.apply_s_adjoint(&sv)?;
        let resid: f64 = g.iter().zip(&v).map(|(a, b)| (a - b * rho).norm_sqr()).sum::<f64>().sqrt();
        let mut next: Vec<C64> = v.iter().zip(&g).map(|(a, b)| a * lambda - b).collect();
        let nn = norm(&next);
        if nn == 0.0 || !nn.is_finite() {
            return Err(Error::Breakdown { iteration: it });
        }
        next.iter_mut().for_each(|z| *z /= nn);
        v = next;
        sv = sys.apply_s(&v)?;
        let rho_next = norm_sq(&sv);
        history.push(rho_next);
        let mu_change = (rho_next - rho).abs() / (lambda - rho_next).max(f64::MIN_POSITIVE);
        rho = rho_next;
        if mu_change <= cfg.tol && resid <= cfg.tol * lambda {
            converged = true;
            break;
        }
    }
    if cfg.normalize_phase {
        normalize_phase(&mut v);
    }
    let residual_upticks = count_upticks(&history);
    Ok(SolveReport {
        z_hat: v,
        iterations,
        residual_history: history,
        converged,
        wall_time: start.elapsed().as_secs_f64(),
        residual_upticks,
    })
}
