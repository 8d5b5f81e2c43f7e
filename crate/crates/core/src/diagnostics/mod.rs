//! Dense oracles, stability bounds and moment identities.

pub mod bounds;
pub mod checks;
pub mod dense;
pub mod moments;

pub use bounds::{eta, kappa_bound_model1, kappa_bound_model23, predicted_error_upper, sigma2_lower_bound, KappaBound};
pub use checks::{
    block_psd_bound_check, check_congruence_sigma2, check_perturbation_bound, check_svd2_bound, projection_residual,
    CheckOutcome, CheckStatus,
};
pub use dense::{dense_sigma2_and_nullvector, materialize_system, min_norm_lstsq};
pub use moments::{gaussian_moment_oracle, laal_oracle, rademacher_moment_oracle};

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::metrics::corr;
use crate::numerics::{dot, norm, C64};
use crate::system::{ModelKind, ProblemInstance};

#[derive(Debug, Clone, PartialEq)]
pub struct GramReport {
    pub gram: DMatrix<C64>,
    pub norm: f64,
    pub fro: f64,
    /// `1 ≤ ‖G‖` and `√p ≤ ‖G‖_F ≤ p`; informational only.
    pub in_stated_range: bool,
}

/// Gram matrix of the normalized snapshots `x_l/‖x_l‖`.
pub fn gram_report(signals: &[Vec<C64>]) -> Result<GramReport> {
    let p = signals.len();
    if p == 0 {
        return Err(Error::InvalidDimension("no signals".into()));
    }
    let n = signals[0].len();
    let mut units = Vec::with_capacity(p);
    for x in signals {
        check_len(n, x.len())?;
        let k = norm(x);
        if k == 0.0 {
            return Err(Error::InvalidInput("zero signal in Gram matrix".into()));
        }
        units.push(x.iter().map(|z| z / k).collect::<Vec<_>>());
    }
    let gram = DMatrix::from_fn(p, p, |k, l| if k == l { C64::from(1.0) } else { dot(&units[k], &units[l]) });
    let norm = dense::spectral_norm(&gram);
    let fro = gram.norm();
    let pf = p as f64;
    let tol = 1e-12 * pf;
    let in_stated_range = norm >= 1.0 - tol && fro >= pf.sqrt() - tol && fro <= pf + tol;
    Ok(GramReport { gram, norm, fro, in_stated_range })
}

/// Theory-side summary for one instance and constraint vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub kappa_upper: f64,
    pub eta: f64,
    pub kappa_eta: f64,
    pub predicted_error_upper: f64,
    pub sigma2_lower: f64,
    pub corr_wz0: C64,
    /// `(‖G‖, ‖G‖_F)` for models with several signals.
    pub gram: Option<(f64, f64)>,
}

pub fn bound_report(problem: &ProblemInstance, w: &[C64]) -> Result<BoundReport> {
    let ProblemInstance { model, m, p, .. } = *problem;
    let z0 = problem.z0();
    let norms = problem.signal_norms();
    let kappa = match model {
        ModelKind::RepeatedMeasurements => kappa_bound_model1(&problem.d0, norms[0], w, &z0, m, p)?,
        _ => kappa_bound_model23(&problem.d0, &norms, w, &z0, m, p)?,
    };
    let eta = eta(model, &problem.eps, m, p);
    let d_min = problem.d0.iter().map(|d| d.norm()).fold(f64::INFINITY, f64::min);
    let gram = match model {
        ModelKind::RepeatedMeasurements => None,
        _ => {
            let g = gram_report(&problem.signals)?;
            Some((g.norm, g.fro))
        }
    };
    Ok(BoundReport {
        kappa_upper: kappa.general,
        eta,
        kappa_eta: kappa.general * eta,
        predicted_error_upper: predicted_error_upper(kappa.general, eta),
        sigma2_lower: sigma2_lower_bound(model, d_min, &norms, m, p)?,
        corr_wz0: corr(w, &z0)?,
        gram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{sample_complex_gaussian, unit_vector, RandomStream, ONE};
    use crate::sensing::{SensingKind, SensingSpec};
    use crate::system::{default_w, synthesize_problem, ProblemConfig, WeightHint};

    #[test]
    fn gram_of_orthonormal_and_identical() {
        let p = 3;
        let basis: Vec<Vec<C64>> = (0..p).map(|i| unit_vector(4, i)).collect();
        let g = gram_report(&basis).unwrap();
        assert!((g.norm - 1.0).abs() < 1e-14);
        assert!((g.fro - 3f64.sqrt()).abs() < 1e-14);

        let x = sample_complex_gaussian(&mut RandomStream::new(1), 4).unwrap();
        let g = gram_report(&vec![x; p]).unwrap();
        assert!((g.norm - p as f64).abs() < 1e-12);
        assert!((g.fro - p as f64).abs() < 1e-12);
        assert!(g.in_stated_range);
    }

    #[test]
    fn gram_trace_is_p() {
        let mut s = RandomStream::new(2);
        let xs: Vec<Vec<C64>> = (0..4).map(|_| sample_complex_gaussian(&mut s, 16).unwrap()).collect();
        let g = gram_report(&xs).unwrap();
        assert_eq!(g.gram.trace(), C64::from(4.0));
        assert!(gram_report(&[vec![ONE], vec![C64::from(0.0)]]).is_err());
    }

    #[test]
    fn report_fields_are_consistent() {
        let cfg = ProblemConfig::new(ModelKind::DiverseInputs, SensingSpec::new(SensingKind::Gaussian, 16, 4), 4)
            .with_snr_db(20.0);
        let pr = synthesize_problem(&cfg, &mut RandomStream::new(3)).unwrap();
        let w = default_w(pr.model, pr.m, pr.n, pr.p, &WeightHint::Ones).unwrap();
        let r = bound_report(&pr, &w).unwrap();
        assert!(r.kappa_upper > 0.0 && r.eta > 0.0 && r.sigma2_lower > 0.0);
        assert_eq!(r.kappa_eta, r.kappa_upper * r.eta);
        assert_eq!(r.predicted_error_upper.is_finite(), r.kappa_eta < 1.0);
        assert!(r.corr_wz0.norm() <= 1.0);
        assert!(r.gram.is_some());
    }
}
