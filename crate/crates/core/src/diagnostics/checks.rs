//! Deterministic perturbation and spectral inequalities, evaluated densely.

use nalgebra::DMatrix;

use super::dense::{
    condition_number, dense_sigma2_and_nullvector, hermitian_eigenvalues, min_norm_lstsq, singular_values,
    spectral_norm, to_dvector,
};
use crate::error::{Error, Result};
use crate::numerics::{dot, norm, sub, C64};

const SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Holds,
    Fails,
    /// The hypothesis of the inequality is not met.
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOutcome {
    pub status: CheckStatus,
    pub lhs: f64,
    pub rhs: f64,
}

impl CheckOutcome {
    pub fn holds(&self) -> bool {
        self.status == CheckStatus::Holds
    }

    fn upper(lhs: f64, rhs: f64) -> Self {
        let ok = rhs.is_infinite() || lhs <= rhs + SLACK;
        Self { status: if ok { CheckStatus::Holds } else { CheckStatus::Fails }, lhs, rhs }
    }
}

/// Least-squares perturbation: `‖û − u0‖/‖u0‖ ≤ κη(1 + 2/(1 − κη))` with
/// `η = ‖δA‖/‖A‖`.
pub fn check_perturbation_bound(a0: &DMatrix<C64>, da: &DMatrix<C64>, b: &[C64]) -> Result<CheckOutcome> {
    if a0.shape() != da.shape() {
        return Err(Error::DimensionMismatch { expected: a0.len(), actual: da.len() });
    }
    if a0.nrows() <= a0.ncols() {
        return Err(Error::InvalidInput("system must be overdetermined".into()));
    }
    let u0 = min_norm_lstsq(a0, b)?;
    let fit = a0 * to_dvector(&u0);
    let resid: f64 = fit.iter().zip(b).map(|(a, c)| (a - c).norm_sqr()).sum::<f64>().sqrt();
    if resid > 1e-9 * norm(b).max(1.0) || norm(&u0) == 0.0 {
        return Err(Error::InvalidInput("A0 u0 = b is not consistent".into()));
    }
    let kappa = condition_number(a0);
    let eta = spectral_norm(da) / spectral_norm(a0);
    let k = kappa * eta;
    let rhs = super::bounds::predicted_error_upper(kappa, eta);
    if k >= 1.0 {
        return Ok(CheckOutcome { status: CheckStatus::NotApplicable, lhs: f64::NAN, rhs });
    }
    let u_hat = min_norm_lstsq(&(a0 + da), b)?;
    let lhs = norm(&sub(&u_hat, &u0)) / norm(&u0);
    Ok(CheckOutcome::upper(lhs, rhs))
}

/// Smallest right singular vector perturbation:
/// `‖(I − ẑẑ*)z0‖/‖z0‖ ≤ ‖δS‖/[σ₂(S0) − ‖δS‖]₊`.
pub fn check_svd2_bound(s0: &DMatrix<C64>, ds: &DMatrix<C64>) -> Result<CheckOutcome> {
    if s0.shape() != ds.shape() {
        return Err(Error::DimensionMismatch { expected: s0.len(), actual: ds.len() });
    }
    let sv = singular_values(s0);
    let smax = sv.last().copied().unwrap_or(0.0);
    if sv[0] > 1e-8 * smax.max(1.0) {
        return Err(Error::InvalidInput("S0 has full column rank".into()));
    }
    let (sigma2, z0) = dense_sigma2_and_nullvector(s0)?;
    let (_, z_hat) = dense_sigma2_and_nullvector(&(s0 + ds))?;
    let lhs = projection_residual(&z_hat, &z0);
    let ds_norm = spectral_norm(ds);
    let gap = (sigma2 - ds_norm).max(0.0);
    let rhs = if gap == 0.0 { f64::INFINITY } else { ds_norm / gap };
    Ok(CheckOutcome::upper(lhs, rhs))
}

/// `‖(I − ẑẑ*)z0‖/‖z0‖` for unit `ẑ`.
pub fn projection_residual(z_hat: &[C64], z0: &[C64]) -> f64 {
    let k = dot(z_hat, z0);
    let r: Vec<C64> = z0.iter().zip(z_hat).map(|(a, b)| a - k * b).collect();
    norm(&r) / norm(z0)
}

fn hermitian_defect(a: &DMatrix<C64>) -> f64 {
    (a - a.adjoint()).norm() / a.norm().max(1.0)
}

/// `σ₂(PAP*) ≥ σ₂(A)·σ_min(P)²` for invertible `P` and PSD `A` with a
/// one-dimensional kernel.
pub fn check_congruence_sigma2(p: &DMatrix<C64>, a: &DMatrix<C64>) -> Result<CheckOutcome> {
    if !p.is_square() || !a.is_square() || p.nrows() != a.nrows() || a.nrows() < 2 {
        return Err(Error::InvalidInput("P and A must be square of equal size ≥ 2".into()));
    }
    let sp = singular_values(p);
    let p_max = sp.last().copied().unwrap_or(0.0);
    if sp[0] <= 1e-10 * p_max {
        return Err(Error::InvalidInput("P is not invertible".into()));
    }
    if hermitian_defect(a) > 1e-10 {
        return Err(Error::InvalidInput("A is not Hermitian".into()));
    }
    let ev = hermitian_eigenvalues(a);
    let top = ev.last().copied().unwrap_or(0.0).max(1.0);
    if ev[0] < -1e-9 * top || ev[0].abs() > 1e-9 * top || ev[1] <= 1e-9 * top {
        return Err(Error::InvalidInput("A must be PSD with a one-dimensional kernel".into()));
    }
    let lhs = singular_values(&(p * a * p.adjoint()))[1];
    let rhs = singular_values(a)[1] * sp[0] * sp[0];
    let ok = lhs >= rhs - SLACK * rhs.max(1.0);
    Ok(CheckOutcome { status: if ok { CheckStatus::Holds } else { CheckStatus::Fails }, lhs, rhs })
}

/// `2·blockdiag(S11, S22) − S ⪰ 0` for PSD `S` split after `split` rows.
/// `lhs` is the smallest eigenvalue of the difference.
pub fn block_psd_bound_check(s: &DMatrix<C64>, split: usize) -> Result<CheckOutcome> {
    if !s.is_square() || split == 0 || split >= s.nrows() {
        return Err(Error::InvalidInput("need a square matrix and 0 < split < size".into()));
    }
    if hermitian_defect(s) > 1e-10 {
        return Err(Error::InvalidInput("S is not Hermitian".into()));
    }
    let ev = hermitian_eigenvalues(s);
    let top = ev.last().copied().unwrap_or(0.0).max(1.0);
    if ev[0] < -1e-9 * top {
        return Err(Error::InvalidInput("S is not positive semi-definite".into()));
    }
    let n = s.nrows();
    let mut diff = -s.clone();
    for i in 0..n {
        for j in 0..n {
            if (i < split) == (j < split) {
                diff[(i, j)] += s[(i, j)] * 2.0;
            }
        }
    }
    let lhs = hermitian_eigenvalues(&diff)[0];
    let ok = lhs >= -SLACK * top;
    Ok(CheckOutcome { status: if ok { CheckStatus::Holds } else { CheckStatus::Fails }, lhs, rhs: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{RandomStream, ZERO};

    fn random(rows: usize, cols: usize, s: &mut RandomStream) -> DMatrix<C64> {
        DMatrix::from_fn(rows, cols, |_, _| s.complex_gaussian())
    }

    #[test]
    fn perturbation_zero_noise() {
        let mut s = RandomStream::new(1);
        let a = random(8, 4, &mut s);
        let u = random(4, 1, &mut s);
        let b: Vec<C64> = (&a * &u).iter().copied().collect();
        let out = check_perturbation_bound(&a, &DMatrix::from_element(8, 4, ZERO), &b).unwrap();
        assert!(out.holds());
        assert!(out.lhs < 1e-12 && out.rhs == 0.0);
    }

    #[test]
    fn perturbation_gate_and_consistency() {
        let mut s = RandomStream::new(2);
        let a = random(8, 4, &mut s);
        let u = random(4, 1, &mut s);
        let b: Vec<C64> = (&a * &u).iter().copied().collect();
        let big = &a * C64::new(2.0, 0.0);
        assert_eq!(check_perturbation_bound(&a, &big, &b).unwrap().status, CheckStatus::NotApplicable);
        let inconsistent = random(8, 1, &mut s);
        assert!(check_perturbation_bound(&a, &a, inconsistent.as_slice()).is_err());
    }

    #[test]
    fn svd2_cases() {
        let mut s = RandomStream::new(3);
        // rank-deficient 6×4: last column is a combination of the others
        let mut s0 = random(6, 4, &mut s);
        let col = s0.column(0) + s0.column(1) * C64::new(0.5, -1.0);
        s0.set_column(3, &col);
        let zero = DMatrix::from_element(6, 4, ZERO);
        let out = check_svd2_bound(&s0, &zero).unwrap();
        assert!(out.holds() && out.lhs < 1e-12);

        let huge = random(6, 4, &mut s) * C64::new(100.0, 0.0);
        let out = check_svd2_bound(&s0, &huge).unwrap();
        assert!(out.rhs.is_infinite() && out.holds());

        assert!(check_svd2_bound(&random(6, 4, &mut s), &zero).is_err());
    }

    fn rank_deficient_psd(n: usize, s: &mut RandomStream) -> DMatrix<C64> {
        let b = random(n, n - 1, s);
        &b * b.adjoint()
    }

    #[test]
    fn congruence_scalar_p() {
        let mut s = RandomStream::new(4);
        let a = rank_deficient_psd(5, &mut s);
        let id = DMatrix::<C64>::identity(5, 5);
        let out = check_congruence_sigma2(&id, &a).unwrap();
        assert!((out.lhs - out.rhs).abs() < 1e-10 * out.rhs);
        let two = &id * C64::new(2.0, 0.0);
        let out = check_congruence_sigma2(&two, &a).unwrap();
        assert!((out.lhs - out.rhs).abs() < 1e-10 * out.rhs);
        assert!((out.rhs - 4.0 * singular_values(&a)[1]).abs() < 1e-10 * out.rhs);
        assert!(check_congruence_sigma2(&id, &(&id * C64::new(1.0, 0.0))).is_err());
    }

    #[test]
    fn block_psd_cases() {
        let mut s = RandomStream::new(5);
        let b = random(3, 3, &mut s);
        let mut block = DMatrix::from_element(6, 6, ZERO);
        block.view_mut((0, 0), (3, 3)).copy_from(&(&b * b.adjoint()));
        block.view_mut((3, 3), (3, 3)).copy_from(&(b.adjoint() * &b));
        assert!(block_psd_bound_check(&block, 3).unwrap().holds());

        let v = random(6, 1, &mut s);
        let rank1 = &v * v.adjoint();
        assert!(block_psd_bound_check(&rank1, 2).unwrap().holds());

        let neg = -rank1;
        assert!(block_psd_bound_check(&neg, 2).is_err());
    }

    #[test]
    fn random_instances_hold() {
        let mut s = RandomStream::new(6);
        for _ in 0..20 {
            let a = rank_deficient_psd(6, &mut s);
            let p = random(6, 6, &mut s);
            assert!(check_congruence_sigma2(&p, &a).unwrap().holds());
            let split = 1 + s.below(5);
            assert!(block_psd_bound_check(&(&p * p.adjoint()), split).unwrap().holds());
        }
    }
}
